#include <gtest/gtest.h>

#include <cmath>

#include "stnas/spatial_ops.hpp"
#include "support.hpp"

namespace stnas {
namespace {

using testing::max_abs_diff;
using testing::probe;
using testing::random_constant;
using testing::values;

void set_identity(Tensor t) {
  auto v = t.mutable_values();
  std::fill(v.begin(), v.end(), 0.0);
  for (std::size_t i = 0; i < t.dim(0); ++i) v[i * t.dim(1) + i] = 1.0;
}

TEST(GnnFixed, DepthZeroIsAPlainProjection) {
  Rng rng(1);
  const auto p = GnnFixedParams::init(4, 0, rng);
  const Tensor x = random_constant({2, 3, 4}, rng);
  const Tensor a = random_constant({3, 3}, rng);
  EXPECT_LE(max_abs_diff(op_gnn_fixed(x, a, p), linear_last(x, p.w)), 1e-15);
}

TEST(GnnFixed, ZeroAdjacencyLeavesOnlyTheFirstTerm) {
  Rng rng(2);
  const auto p = GnnFixedParams::init(4, 2, rng);
  const Tensor x = random_constant({2, 3, 4}, rng);
  EXPECT_LE(max_abs_diff(op_gnn_fixed(x, Tensor::zeros({3, 3}), p), linear_last(x, p.w)), 1e-15);
}

TEST(GnnFixed, IdentityAdjacencyTriples) {
  Rng rng(3);
  const auto p = GnnFixedParams::init(4, 2, rng);
  const Tensor x = random_constant({2, 3, 4}, rng);
  Tensor eye = Tensor::zeros({3, 3});
  set_identity(eye);
  EXPECT_LE(max_abs_diff(op_gnn_fixed(x, eye, p), ad::scale(linear_last(x, p.w), 3.0)), 1e-14);
}

// sum_k A^k x W, evaluated with explicit matrix loops
TEST(GnnFixed, MatchesHandDiffusion) {
  Rng rng(4);
  const std::size_t N = 4, D = 3, K = 3;
  const auto p = GnnFixedParams::init(D, K, rng);
  const Tensor x = random_constant({1, N, D}, rng);
  const Tensor a = random_constant({N, N}, rng, 0, 0.5);
  std::vector<double> xw(N * D, 0), term, out(N * D, 0);
  for (std::size_t n = 0; n < N; ++n)
    for (std::size_t o = 0; o < D; ++o)
      for (std::size_t c = 0; c < D; ++c) xw[n * D + o] += x.at({0, n, c}) * p.w.at({c, o});
  term = xw;
  for (std::size_t k = 0; k <= K; ++k) {
    for (std::size_t i = 0; i < N * D; ++i) out[i] += term[i];
    std::vector<double> next(N * D, 0);
    for (std::size_t i = 0; i < N; ++i)
      for (std::size_t j = 0; j < N; ++j)
        for (std::size_t d = 0; d < D; ++d) next[i * D + d] += a.at({i, j}) * term[j * D + d];
    term = next;
  }
  const auto got = values(op_gnn_fixed(x, a, p));
  for (std::size_t i = 0; i < got.size(); ++i) EXPECT_NEAR(got[i], out[i], 1e-12);
}

TEST(GnnFixed, MismatchedAdjacencyFails) {
  Rng rng(5);
  const auto p = GnnFixedParams::init(4, 2, rng);
  EXPECT_THROW(op_gnn_fixed(Tensor::zeros({1, 3, 4}), Tensor::zeros({2, 2}), p), std::invalid_argument);
  EXPECT_THROW(op_gnn_fixed(Tensor::zeros({1, 3, 5}), Tensor::zeros({3, 3}), p), std::invalid_argument);
}

TEST(AdaptiveAdjacency, TwoNodeExample) {
  const Tensor e = Tensor::constant({2, 1}, {1, 0});
  const Tensor a = build_adaptive_adj(e, e);
  const double E = std::exp(1.0);
  EXPECT_NEAR(a.at({0, 0}), E / (E + 1), 1e-15);
  EXPECT_NEAR(a.at({0, 1}), 1 / (E + 1), 1e-15);
  EXPECT_DOUBLE_EQ(a.at({1, 0}), 0.5);
  EXPECT_DOUBLE_EQ(a.at({1, 1}), 0.5);
}

TEST(AdaptiveAdjacency, NegativeProductsGiveUniformRows) {
  const Tensor e1 = Tensor::constant({3, 1}, {1, 2, 3});
  const Tensor e2 = Tensor::constant({3, 1}, {-1, -2, -0.5});
  const Tensor a = build_adaptive_adj(e1, e2);
  for (double v : a.values()) EXPECT_DOUBLE_EQ(v, 1.0 / 3.0);
}

TEST(AdaptiveAdjacency, RowsAreStochastic) {
  Rng rng(6);
  const Tensor a = build_adaptive_adj(random_constant({7, 4}, rng, -3, 3), random_constant({7, 4}, rng, -3, 3));
  const Tensor rows = ad::sum(a, 1);
  for (double v : rows.values()) EXPECT_NEAR(v, 1.0, 1e-12);
}

TEST(GnnAdap, DepthZeroIgnoresEmbeddings) {
  Rng rng(7);
  const auto p = GnnAdapParams::init(3, 2, 4, 0, rng);
  const Tensor x = random_constant({2, 3, 4}, rng);
  EXPECT_LE(max_abs_diff(op_gnn_adap(x, p), linear_last(x, p.w)), 1e-15);
}

TEST(GnnAdap, UniformAdjacencyAddsTheNodeMean) {
  Rng rng(8);
  auto p = GnnAdapParams::init(4, 1, 3, 1, rng);
  const std::vector<double> pos{1, 2, 3, 4}, neg{-1, -1, -2, -3};
  std::copy(pos.begin(), pos.end(), p.e1.mutable_values().begin());
  std::copy(neg.begin(), neg.end(), p.e2.mutable_values().begin());
  set_identity(p.w);
  const Tensor x = random_constant({1, 4, 3}, rng);
  const Tensor out = op_gnn_adap(x, p);
  for (std::size_t d = 0; d < 3; ++d) {
    double mean = 0;
    for (std::size_t n = 0; n < 4; ++n) mean += x.at({0, n, d}) / 4.0;
    for (std::size_t n = 0; n < 4; ++n) EXPECT_NEAR((out.at({0, n, d})), x.at({0, n, d}) + mean, 1e-12);
  }
}

TEST(GnnAdap, AdjacencyFollowsTheEmbeddings) {
  Rng rng(9);
  auto p = GnnAdapParams::init(3, 2, 4, 2, rng);
  const Tensor x = random_constant({1, 3, 4}, rng);
  const auto before = values(op_gnn_adap(x, p));
  p.e1.mutable_values()[0] += 0.5;
  EXPECT_NE(values(op_gnn_adap(x, p)), before);
}

// Heads side by side inside each feature group, scores scaled by 1/sqrt(head width).
std::vector<double> naive_messages(const Tensor& x, const GnnAttParams& p) {
  const auto B = x.dim(0), N = x.dim(1), D = x.dim(2);
  const auto G = p.groups, H = p.heads_per_group(), W = D / G, E = W / H;
  std::vector<double> out(B * N * D, 0);
  for (std::size_t b = 0; b < B; ++b)
    for (std::size_t g = 0; g < G; ++g) {
      auto proj = [&](const Tensor& w, std::size_t n, std::size_t col) {
        double s = 0;
        for (std::size_t c = 0; c < W; ++c) s += x.at({b, n, g * W + c}) * w.at({c, col});
        return s;
      };
      for (std::size_t h = 0; h < H; ++h)
        for (std::size_t i = 0; i < N; ++i) {
          std::vector<double> s(N);
          double mx = -1e300, total = 0;
          for (std::size_t j = 0; j < N; ++j) {
            double d = 0;
            for (std::size_t e = 0; e < E; ++e) d += proj(p.wq[g], i, h * E + e) * proj(p.wk[g], j, h * E + e);
            s[j] = d / std::sqrt(static_cast<double>(E));
            mx = std::max(mx, s[j]);
          }
          for (auto& v : s) total += (v = std::exp(v - mx));
          for (std::size_t e = 0; e < E; ++e) {
            double acc = 0;
            for (std::size_t j = 0; j < N; ++j) acc += s[j] / total * proj(p.wv[g], j, h * E + e);
            out[(b * N + i) * D + (g * H + h) * E + e] = acc;
          }
        }
    }
  return out;
}

TEST(GnnAtt, GroupedHeadsMatchNestedLoops) {
  Rng rng(10);
  for (auto [heads, groups] : std::vector<std::pair<std::size_t, std::size_t>>{{4, 1}, {4, 2}, {2, 4}, {1, 1}}) {
    const auto p = GnnAttParams::init(8, heads, groups, rng);
    const Tensor x = random_constant({2, 5, 8}, rng);
    const auto expect = naive_messages(x, p);
    const auto got = values(gnn_att_messages(x, p));
    for (std::size_t i = 0; i < got.size(); ++i) EXPECT_NEAR(got[i], expect[i], 1e-12) << heads << "/" << groups;
  }
}

TEST(GnnAtt, ZeroQueriesAndKeysAverageNodes) {
  Rng rng(11);
  auto p = GnnAttParams::init(4, 2, 1, rng);
  for (auto& v : p.wq[0].mutable_values()) v = 0.0;
  for (auto& v : p.wk[0].mutable_values()) v = 0.0;
  const Tensor x = random_constant({1, 5, 4}, rng);
  for (const auto& a : gnn_att_attention(x, p)) {
    for (double v : a.values()) EXPECT_DOUBLE_EQ(v, 0.2);
  }
  const Tensor msg = gnn_att_messages(x, p);
  const Tensor xv = linear_last(x, p.wv[0]);
  for (std::size_t d = 0; d < 4; ++d) {
    double mean = 0;
    for (std::size_t n = 0; n < 5; ++n) mean += xv.at({0, n, d}) / 5.0;
    for (std::size_t n = 0; n < 5; ++n) EXPECT_NEAR((msg.at({0, n, d})), mean, 1e-12);
  }
}

TEST(GnnAtt, SingleNodeAttendsToItself) {
  Rng rng(12);
  const auto p = GnnAttParams::init(4, 4, 1, rng);
  const Tensor x = random_constant({3, 1, 4}, rng);
  for (const auto& a : gnn_att_attention(x, p)) {
    for (double v : a.values()) EXPECT_DOUBLE_EQ(v, 1.0);
  }
  EXPECT_LE(max_abs_diff(gnn_att_messages(x, p), linear_last(x, p.wv[0])), 1e-15);
}

TEST(GnnAtt, AttentionRowsAreStochastic) {
  Rng rng(13);
  const auto p = GnnAttParams::init(8, 4, 2, rng);
  const Tensor x = random_constant({2, 6, 8}, rng, -4, 4);
  const auto att = gnn_att_attention(x, p);
  EXPECT_EQ(att.size(), 4u);
  for (const auto& a : att) {
    const Tensor rows = ad::sum(a, 2);
    for (double v : rows.values()) EXPECT_NEAR(v, 1.0, 1e-12);
  }
}

TEST(GnnAtt, LayoutIsValidatedAtConstruction) {
  Rng rng(14);
  EXPECT_THROW(GnnAttParams::init(6, 4, 1, rng), std::invalid_argument);
  EXPECT_THROW(GnnAttParams::init(8, 1, 3, rng), std::invalid_argument);
  EXPECT_THROW(GnnAttParams::init(8, 0, 1, rng), std::invalid_argument);
  EXPECT_NO_THROW(GnnAttParams::init(8, 2, 4, rng));
}

TEST(Linearity, FixedAndAdaptiveAreLinearAttentionIsNot) {
  Rng rng(15);
  const Tensor x = random_constant({2, 4, 4}, rng);
  const Tensor x2 = ad::scale(x, 2.0);
  const Tensor a = random_constant({4, 4}, rng, 0, 1);
  const auto fixed = GnnFixedParams::init(4, 2, rng);
  const auto adap = GnnAdapParams::init(4, 3, 4, 2, rng);
  const auto att = GnnAttParams::init(4, 2, 1, rng);
  EXPECT_LE(max_abs_diff(op_gnn_fixed(x2, a, fixed), ad::scale(op_gnn_fixed(x, a, fixed), 2.0)), 1e-12);
  EXPECT_LE(max_abs_diff(op_gnn_adap(x2, adap), ad::scale(op_gnn_adap(x, adap), 2.0)), 1e-12);
  EXPECT_GT(max_abs_diff(op_gnn_att(x2, att), ad::scale(op_gnn_att(x, att), 2.0)), 1e-3);
}

TEST(GradientCheck, EverySpatialOperator) {
  Rng rng(16);
  const Tensor x = random_constant({2, 3, 4}, rng);
  const Tensor a = random_constant({3, 3}, rng, 0, 0.6);
  const auto fixed = GnnFixedParams::init(4, 2, rng);
  const auto adap = GnnAdapParams::init(3, 2, 4, 2, rng);
  const auto att = GnnAttParams::init(4, 2, 2, rng);
  EXPECT_LE(ad::grad_check([&](const Tensor& v) { return probe(op_gnn_fixed(v, a, fixed)); }, x, 1e-5), 1e-4);
  EXPECT_LE(ad::grad_check([&](const Tensor& v) { return probe(op_gnn_adap(v, adap)); }, x, 1e-5), 1e-4);
  EXPECT_LE(ad::grad_check([&](const Tensor& v) { return probe(op_gnn_att(v, att)); }, x, 1e-5), 1e-4);
  std::vector<Tensor> w;
  adap.collect(w);
  EXPECT_LE(ad::grad_check_params([&] { return probe(op_gnn_adap(x, adap)); }, w, 1e-5), 1e-4);
  w.clear();
  att.collect(w);
  EXPECT_LE(ad::grad_check_params([&] { return probe(op_gnn_att(x, att)); }, w, 1e-5), 1e-4);
}

TEST(Aggregate, ElementwiseSum) {
  Rng rng(17);
  const Tensor a = random_constant({1, 3, 2}, rng);
  const std::vector<Tensor> one{a};
  EXPECT_EQ(values(aggregate_patches(one)), values(a));
  const std::vector<Tensor> cancel{a, ad::scale(a, -1.0)};
  EXPECT_EQ(values(aggregate_patches(cancel)), std::vector<double>(6, 0.0));
  const std::vector<Tensor> zeros{Tensor::zeros({1, 3, 2}), Tensor::zeros({1, 3, 2})};
  EXPECT_EQ(values(aggregate_patches(zeros)), std::vector<double>(6, 0.0));
  EXPECT_THROW(aggregate_patches(std::vector<Tensor>{}), std::invalid_argument);
}

}  // namespace
}  // namespace stnas
