#include "stnas/metrics.hpp"

#include <cmath>
#include <cstdio>
#include <limits>
#include <stdexcept>

namespace stnas {

namespace {

constexpr double kMapeGuard = 1e-6;

struct Accum {
  double abs = 0.0, sq = 0.0, pct = 0.0;
  std::size_t n = 0, n_pct = 0;

  void add(double p, double t) {
    const double e = p - t;
    abs += std::fabs(e);
    sq += e * e;
    ++n;
    if (std::fabs(t) > kMapeGuard) {
      pct += std::fabs(e) / std::fabs(t);
      ++n_pct;
    }
  }

  ErrorTriple finish() const {
    ErrorTriple r;
    r.mae = abs / static_cast<double>(n);
    r.rmse = std::sqrt(sq / static_cast<double>(n));
    r.mape = n_pct == 0 ? std::numeric_limits<double>::quiet_NaN()
                        : 100.0 * pct / static_cast<double>(n_pct);
    return r;
  }
};

void check_layout(std::span<const double> pred, std::span<const double> target,
                  const ad::Shape& shape, const char* who) {
  if (shape.size() != 4) throw std::invalid_argument(std::string(who) + ": expected [B,Q,N,C]");
  if (pred.size() != target.size() || pred.size() != ad::numel(shape)) {
    throw std::invalid_argument(std::string(who) + ": " + std::to_string(pred.size()) +
                                " predictions and " + std::to_string(target.size()) +
                                " targets for shape " + ad::shape_str(shape));
  }
}

std::string num(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

}  // namespace

MetricReport metrics_multistep(std::span<const double> pred, std::span<const double> target,
                               const ad::Shape& shape, std::optional<double> sentinel) {
  check_layout(pred, target, shape, "metrics");
  const std::size_t B = shape[0], Q = shape[1], inner = shape[2] * shape[3];
  std::vector<Accum> per(Q);
  Accum all;
  MetricReport r;
  r.samples = B;
  for (std::size_t b = 0; b < B; ++b) {
    for (std::size_t q = 0; q < Q; ++q) {
      for (std::size_t i = 0; i < inner; ++i) {
        const std::size_t k = (b * Q + q) * inner + i;
        if (sentinel && target[k] == *sentinel) {
          ++r.masked;
          continue;
        }
        per[q].add(pred[k], target[k]);
        all.add(pred[k], target[k]);
      }
    }
  }
  if (all.n == 0) throw std::invalid_argument("metrics: every position is masked");
  r.count = all.n;
  r.overall = all.finish();
  for (const auto& a : per) {
    r.horizon.push_back(a.n == 0 ? ErrorTriple{std::nan(""), std::nan(""), std::nan("")} : a.finish());
  }
  return r;
}

SingleStepScores metrics_singlestep(std::span<const double> pred, std::span<const double> target,
                                    const ad::Shape& shape) {
  check_layout(pred, target, shape, "single-step metrics");
  const std::size_t n_total = target.size();
  double mean = 0.0;
  for (double t : target) mean += t;
  mean /= static_cast<double>(n_total);
  double err = 0.0, dev = 0.0;
  for (std::size_t i = 0; i < n_total; ++i) {
    err += (pred[i] - target[i]) * (pred[i] - target[i]);
    dev += (target[i] - mean) * (target[i] - mean);
  }
  if (dev == 0.0) throw std::invalid_argument("single-step metrics: target has zero variance");

  const std::size_t N = shape[2], C = shape[3];
  const std::size_t outer = shape[0] * shape[1];
  double corr_sum = 0.0;
  std::size_t used = 0;
  for (std::size_t n = 0; n < N; ++n) {
    double mp = 0.0, mt = 0.0;
    const std::size_t len = outer * C;
    auto index = [&](std::size_t o, std::size_t c) { return (o * N + n) * C + c; };
    for (std::size_t o = 0; o < outer; ++o) {
      for (std::size_t c = 0; c < C; ++c) {
        mp += pred[index(o, c)];
        mt += target[index(o, c)];
      }
    }
    mp /= static_cast<double>(len);
    mt /= static_cast<double>(len);
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (std::size_t o = 0; o < outer; ++o) {
      for (std::size_t c = 0; c < C; ++c) {
        const double dp = pred[index(o, c)] - mp, dt = target[index(o, c)] - mt;
        sxy += dp * dt;
        sxx += dp * dp;
        syy += dt * dt;
      }
    }
    if (syy == 0.0) continue;
    // A constant prediction carries no correlation with the target.
    corr_sum += sxx == 0.0 ? 0.0 : sxy / std::sqrt(sxx * syy);
    ++used;
  }
  if (used == 0) throw std::invalid_argument("single-step metrics: every node is constant");
  return {std::sqrt(err) / std::sqrt(dev), corr_sum / static_cast<double>(used)};
}

std::vector<double> persistence_forecast(const data::ForecastDataset& data) {
  const auto& s = *data.signals;
  const std::size_t Q = data.horizon, inner = s.nodes * s.channels;
  std::vector<double> out;
  out.reserve(data.size() * Q * inner);
  for (std::size_t origin : data.origins) {
    for (std::size_t q = 0; q < Q; ++q) {
      out.insert(out.end(), s.values.begin() + static_cast<std::ptrdiff_t>(origin * inner),
                 s.values.begin() + static_cast<std::ptrdiff_t>((origin + 1) * inner));
    }
  }
  return out;
}

std::vector<double> dataset_targets(const data::ForecastDataset& data) {
  const auto& s = *data.signals;
  const std::size_t Q = data.horizon, inner = s.nodes * s.channels;
  std::vector<double> out;
  out.reserve(data.size() * Q * inner);
  for (std::size_t origin : data.origins) {
    const auto first = s.values.begin() + static_cast<std::ptrdiff_t>((origin + 1) * inner);
    out.insert(out.end(), first, first + static_cast<std::ptrdiff_t>(Q * inner));
  }
  return out;
}

std::string format_table(const MetricReport& r) {
  std::string out;
  char line[128];
  std::snprintf(line, sizeof line, "%-8s %12s %12s %12s\n", "horizon", "MAE", "RMSE", "MAPE(%)");
  out += line;
  for (std::size_t q = 0; q < r.horizon.size(); ++q) {
    const auto& h = r.horizon[q];
    std::snprintf(line, sizeof line, "%-8zu %12.4f %12.4f %12.4f\n", q + 1, h.mae, h.rmse, h.mape);
    out += line;
  }
  std::snprintf(line, sizeof line, "%-8s %12.4f %12.4f %12.4f\n", "all", r.overall.mae,
                r.overall.rmse, r.overall.mape);
  out += line;
  if (r.rrse) {
    std::snprintf(line, sizeof line, "RRSE %.4f  CORR %.4f\n", *r.rrse, r.corr.value_or(std::nan("")));
    out += line;
  }
  return out;
}

std::string to_csv(const MetricReport& r) {
  std::string out = "metric,horizon,value\n";
  auto rows = [&](const std::string& h, const ErrorTriple& t) {
    out += "mae," + h + "," + num(t.mae) + "\n";
    out += "rmse," + h + "," + num(t.rmse) + "\n";
    out += "mape," + h + "," + num(t.mape) + "\n";
  };
  for (std::size_t q = 0; q < r.horizon.size(); ++q) rows(std::to_string(q + 1), r.horizon[q]);
  rows("all", r.overall);
  if (r.rrse) out += "rrse,all," + num(*r.rrse) + "\n";
  if (r.corr) out += "corr,all," + num(*r.corr) + "\n";
  return out;
}

std::string bench_csv(std::span<const BenchRow> rows) {
  std::string out = "mode,epochs,sec_per_epoch,peak_bytes,val_mae\n";
  for (const auto& r : rows) {
    out += r.mode + "," + std::to_string(r.epochs) + "," + num(r.seconds_per_epoch) + "," +
           std::to_string(r.peak_bytes) + "," + num(r.val_mae) + "\n";
  }
  return out;
}

std::string bench_table(std::span<const BenchRow> rows) {
  std::string out;
  char line[160];
  std::snprintf(line, sizeof line, "%-10s %6s %12s %14s %10s\n", "mode", "epochs", "s/epoch",
                "peak bytes", "val MAE");
  out += line;
  for (const auto& r : rows) {
    std::snprintf(line, sizeof line, "%-10s %6zu %12.3f %14zu %10.4f\n", r.mode.c_str(), r.epochs,
                  r.seconds_per_epoch, r.peak_bytes, r.val_mae);
    out += line;
  }
  return out;
}

}  // namespace stnas
