#include <gtest/gtest.h>

#include <set>

#include "toy_model.hpp"

namespace stnas {
namespace {

using namespace testing;

TEST(Supernet, OutputShape) {
  ModelConfig c = tiny_config();
  c.nodes = 5;
  c.history = 12;
  c.horizon = 12;
  c.patches = 3;
  Rng rng(1);
  const Supernet net(c, ring_adjacency(5), unit_stats(), 3);
  EXPECT_EQ(net.forward(random_batch(c, 2, rng)).shape(), (Shape{2, 12, 5, 1}));
  c.mode = SearchMode::Mixed;
  const Supernet mixed(c, ring_adjacency(5), unit_stats(), 3);
  EXPECT_EQ(mixed.forward(random_batch(c, 2, rng)).shape(), (Shape{2, 12, 5, 1}));
}

TEST(Supernet, ZeroWeightsPredictTheMean) {
  const ModelConfig c = tiny_config();
  const data::NormStats stats{{3.5}, {2.0}};
  Supernet net(c, ring_adjacency(4), stats, 5);
  for (auto& t : net.weights())
    for (auto& v : t.mutable_values()) v = 0.0;
  Rng rng(2);
  for (double v : values(net.forward(random_batch(c, 2, rng)))) EXPECT_EQ(v, 3.5);
}

TEST(Supernet, RepeatedForwardsAreBitIdentical) {
  for (auto mode : {SearchMode::Decoupled, SearchMode::Mixed}) {
    const ModelConfig c = tiny_config(mode);
    const Supernet a(c, ring_adjacency(4), unit_stats(), 11);
    const Supernet b(c, ring_adjacency(4), unit_stats(), 11);
    Rng rng(3);
    const auto batch = random_batch(c, 3, rng);
    const auto first = values(a.forward(batch));
    EXPECT_EQ(values(a.forward(batch)), first);
    EXPECT_EQ(values(b.forward(batch)), first);
    const Supernet other(c, ring_adjacency(4), unit_stats(), 12);
    EXPECT_NE(values(other.forward(batch)), first);
  }
}

TEST(Supernet, InputErrorsNameTheStage) {
  const ModelConfig c = tiny_config();
  const Supernet net(c, ring_adjacency(4), unit_stats(), 0);
  const std::vector<data::TimeIndex> t(2);
  try {
    net.forward(Tensor::zeros({2, 5, 4, 1}), t);
    FAIL();
  } catch (const std::invalid_argument& e) {
    EXPECT_NE(std::string(e.what()).find("model input"), std::string::npos);
  }
  EXPECT_THROW(net.forward(Tensor::zeros({3, 4, 4, 1}), t), std::invalid_argument);
}

TEST(Supernet, ConfigurationErrors) {
  ModelConfig c = tiny_config();
  c.patches = 3;
  EXPECT_THROW(Supernet(c, ring_adjacency(4), unit_stats(), 0), std::invalid_argument);
  c = tiny_config();
  EXPECT_THROW(Supernet(c, ring_adjacency(5), unit_stats(), 0), std::invalid_argument);
  EXPECT_THROW(Supernet(c, ring_adjacency(4), unit_stats(2), 0), std::invalid_argument);
  c.spatial_ops = {OpKind::GnnFixed};
  EXPECT_THROW(Supernet(c, Tensor(), unit_stats(), 0), std::invalid_argument);
  c.spatial_ops = {OpKind::Gdcc};
  EXPECT_THROW(Supernet(c, ring_adjacency(4), unit_stats(), 0), std::invalid_argument);
  c = tiny_config();
  c.heads = 3;
  EXPECT_THROW(Supernet(c, ring_adjacency(4), unit_stats(), 0), std::invalid_argument);
}

TEST(Supernet, SpacesFollowTheAdjacencyAndRestrictions) {
  ModelConfig c = tiny_config();
  Supernet with(c, ring_adjacency(4), unit_stats(), 0);
  Supernet without(c, Tensor(), unit_stats(), 0);
  EXPECT_EQ(with.spatial().cell.space.size(), 5u);
  EXPECT_EQ(without.spatial().cell.space.size(), 4u);
  c.spatial_ops = {OpKind::Identity, OpKind::Zero};
  Supernet ablated(c, ring_adjacency(4), unit_stats(), 0);
  EXPECT_EQ(ablated.spatial().cell.space, (std::vector<OpKind>{OpKind::Zero, OpKind::Identity}));
  c = tiny_config(SearchMode::Mixed);
  Supernet mixed(c, ring_adjacency(4), unit_stats(), 0);
  ASSERT_EQ(mixed.mixed().size(), 2u);
  EXPECT_EQ(mixed.mixed()[0].cell.space.size(), 7u);
}

TEST(Supernet, ParameterGroupsAreDisjointAndComplete) {
  for (auto mode : {SearchMode::Decoupled, SearchMode::Mixed}) {
    const Supernet net(tiny_config(mode), ring_adjacency(4), unit_stats(), 0);
    std::set<const void*> w, a, named;
    for (const auto& t : net.weights()) w.insert(t.node().get());
    for (const auto& t : net.arch_params()) a.insert(t.node().get());
    std::set<std::string> names;
    for (const auto& [name, t] : net.named_parameters()) {
      named.insert(t.node().get());
      EXPECT_TRUE(names.insert(name).second) << name;
    }
    for (const void* p : a) EXPECT_EQ(w.count(p), 0u);
    EXPECT_EQ(w.size() + a.size(), named.size());
    EXPECT_EQ(a.size(), mode == SearchMode::Mixed ? 2u : 3u);
  }
}

TEST(Arch, DeriveIsCompleteAndRoundTrips) {
  Supernet net(tiny_config(), ring_adjacency(4), unit_stats(), 0);
  Rng rng(4);
  randomise_logits(net, rng);
  const auto arch = net.derive();
  EXPECT_EQ(arch.temporal_edges.size(), 3u);
  ASSERT_EQ(arch.spatial_dags.size(), 2u);
  for (const auto& m : arch.spatial_dags) EXPECT_EQ(m.size(), 3u);
  EXPECT_EQ(arch.hyperparameters.at("D"), 4);
  const auto text = arch.to_text();
  EXPECT_EQ(DiscreteArchitecture::from_text(text).to_text(), text);
  EXPECT_EQ(DiscreteArchitecture::from_text(text).temporal_edges, arch.temporal_edges);
  EXPECT_LT(text.find("\"hyperparameters\""), text.find("\"mode\""));
  EXPECT_LT(text.find("\"spatial_dags\""), text.find("\"temporal_edges\""));
  EXPECT_NE(text.find("\"0->1\""), std::string::npos);
}

TEST(Arch, ShiftingAnEdgeLeavesTheChoice) {
  Supernet net(tiny_config(), ring_adjacency(4), unit_stats(), 0);
  Rng rng(5);
  randomise_logits(net, rng);
  const auto before = net.derive().to_text();
  for (auto& v : net.temporal().alpha.mutable_values()) v += 3.0;
  EXPECT_EQ(net.derive().to_text(), before);
}

TEST(Arch, EdgeMapErrors) {
  const auto edges = cell_edges(2);
  const auto space = temporal_space();
  EdgeMap map{{"0->1", "gdcc"}, {"0->2", "zero"}, {"1->2", "identity"}};
  EXPECT_EQ(from_edge_map(map, edges, space), (std::vector<OpKind>{OpKind::Gdcc, OpKind::Zero, OpKind::Identity}));
  map["1->2"] = "gnn_att";
  EXPECT_THROW(from_edge_map(map, edges, space), std::invalid_argument);
  map.erase("1->2");
  EXPECT_THROW(from_edge_map(map, edges, space), std::invalid_argument);
  map["0->3"] = "zero";
  EXPECT_THROW(from_edge_map(map, edges, space), std::invalid_argument);
  EXPECT_THROW(DiscreteArchitecture::from_text("{not json"), std::runtime_error);
  EXPECT_THROW(parse_mode("hybrid"), std::invalid_argument);
}

TEST(Arch, SetHardValidatesAgainstTheConfig) {
  const ModelConfig c = tiny_config();
  Supernet net(c, ring_adjacency(4), unit_stats(), 0);
  auto arch = net.derive();
  ModelConfig other = c;
  other.d_model = 8;
  Supernet wider(other, ring_adjacency(4), unit_stats(), 0);
  EXPECT_THROW(wider.set_hard(arch), std::invalid_argument);
  Supernet mixed(tiny_config(SearchMode::Mixed), ring_adjacency(4), unit_stats(), 0);
  EXPECT_THROW(mixed.set_hard(arch), std::invalid_argument);
  auto short_arch = arch;
  short_arch.spatial_dags.pop_back();
  EXPECT_THROW(net.set_hard(short_arch), std::invalid_argument);
  net.set_hard(arch);
  EXPECT_TRUE(net.hard());
  EXPECT_TRUE(net.arch_params().empty());
}

TEST(Arch, HardWeightsAreOnlyTheChosenOperators) {
  const ModelConfig c = tiny_config();
  Supernet net(c, ring_adjacency(4), unit_stats(), 0);
  const std::size_t soft = net.weights().size();
  DiscreteArchitecture arch = net.derive();
  for (auto& [k, v] : arch.temporal_edges) v = "zero";
  for (auto& m : arch.spatial_dags)
    for (auto& [k, v] : m) v = "identity";
  net.set_hard(arch);
  const std::size_t hard = net.weights().size();
  EXPECT_LT(hard, soft);
  Supernet base(c, ring_adjacency(4), unit_stats(), 0);
  std::vector<Tensor> fixed;
  base.embedding().collect(fixed);
  base.patch().collect(fixed);
  EXPECT_EQ(hard, fixed.size() + 6);  // output layer: time_w, time_b, w1, b1, w2, b2
}

TEST(Arch, OneHotLogitsMatchTheHardModel) {
  for (auto mode : {SearchMode::Decoupled, SearchMode::Mixed}) {
    const ModelConfig c = tiny_config(mode);
    Supernet soft(c, ring_adjacency(4), unit_stats(), 21);
    Rng rng(6);
    randomise_logits(soft, rng);
    const auto arch = soft.derive();
    peak_logits(soft, arch, 20.0);
    auto hard = clone_net(soft, ring_adjacency(4), 21);
    hard->set_hard(arch);
    const auto batch = random_batch(c, 2, rng);
    EXPECT_LE(max_abs_diff(soft.forward(batch), hard->forward(batch)), 1e-6) << mode_name(mode);
  }
}

TEST(GradientCheck, ComposedSupernet) {
  for (auto mode : {SearchMode::Decoupled, SearchMode::Mixed}) {
    const ModelConfig c = tiny_config(mode);
    Supernet net(c, ring_adjacency(4), unit_stats(), 8);
    Rng rng(7);
    randomise_logits(net, rng);
    const auto batch = random_batch(c, 2, rng);
    std::vector<Tensor> all;
    for (const auto& [name, t] : net.named_parameters()) all.push_back(t);
    const double err = ad::grad_check_params([&] { return loss_masked_mae(net.forward(batch), batch.y); }, all, 1e-5);
    EXPECT_LE(err, 1e-4) << mode_name(mode);
  }
}

}  // namespace
}  // namespace stnas
