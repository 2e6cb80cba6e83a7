#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "stnas/data.hpp"

namespace stnas {

struct ErrorTriple {
  double mae = 0.0;
  double rmse = 0.0;
  double mape = 0.0;  // percent; NaN when no target clears the zero guard
};

struct MetricReport {
  std::vector<ErrorTriple> horizon;  // one per forecast step
  ErrorTriple overall;
  std::size_t samples = 0;
  std::size_t count = 0;   // unmasked positions
  std::size_t masked = 0;  // sentinel positions
  std::optional<double> rrse;
  std::optional<double> corr;
};

/// pred and target laid out [B, Q, N, C]. Positions whose target equals the
/// sentinel are dropped everywhere; MAPE also drops |target| <= 1e-6.
MetricReport metrics_multistep(std::span<const double> pred, std::span<const double> target,
                               const ad::Shape& shape, std::optional<double> sentinel = std::nullopt);

struct SingleStepScores {
  double rrse = 0.0;
  double corr = 0.0;
};

/// Same layout; the node axis is axis 2. CORR averages per-node Pearson
/// coefficients, skipping nodes whose target series is constant.
SingleStepScores metrics_singlestep(std::span<const double> pred, std::span<const double> target,
                                    const ad::Shape& shape);

/// Repeats the last observed raw value across the horizon, [S, Q, N, C].
std::vector<double> persistence_forecast(const data::ForecastDataset& data);
/// Raw targets of every sample in order, [S, Q, N, C].
std::vector<double> dataset_targets(const data::ForecastDataset& data);

std::string format_table(const MetricReport& report);
/// Rows of `metric,horizon,value`; the aggregate row uses horizon `all`.
std::string to_csv(const MetricReport& report);

struct BenchRow {
  std::string mode;
  std::size_t epochs = 0;
  double seconds_per_epoch = 0.0;
  std::size_t peak_bytes = 0;
  double val_mae = 0.0;
};

std::string bench_csv(std::span<const BenchRow> rows);
std::string bench_table(std::span<const BenchRow> rows);

}  // namespace stnas
