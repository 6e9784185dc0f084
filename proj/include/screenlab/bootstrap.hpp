#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

namespace screenlab {

/// Percentile bootstrap interval. lo <= hi always; point may fall outside
/// [lo, hi] for skewed statistics.
struct BootstrapCI {
  double point = 0.0;
  double lo = 0.0;
  double hi = 0.0;
  double level = 0.95;
  std::size_t n_boot = 0;
  std::uint64_t seed = 0;
};

struct BootstrapOptions {
  std::size_t n_boot = 2000;
  double level = 0.95;
  std::uint64_t seed = 0;
  /// Worker threads; 0 picks the hardware concurrency. Results do not depend
  /// on this value.
  unsigned threads = 0;
};

/// Statistic evaluated on a resample, given as indices into the units.
using UnitStatistic = std::function<double(std::span<const std::size_t>)>;
using VectorStatistic = std::function<void(std::span<const std::size_t>, std::span<double>)>;

/// Resamples `n_units` units with replacement n_boot times and takes the
/// (1-level)/2 and (1+level)/2 percentiles of the statistic. The point
/// estimate is the statistic on the identity resample.
BootstrapCI bootstrap_ci(std::size_t n_units, const UnitStatistic& statistic,
                         const BootstrapOptions& options);

/// Vector-valued variant. A statistic may write NaN for an output that is
/// undefined on a given resample; those replicates are dropped for that
/// output only. Outputs undefined on every replicate come back as NaN.
std::vector<BootstrapCI> bootstrap_ci(std::size_t n_units, std::size_t n_outputs,
                                      const VectorStatistic& statistic,
                                      const BootstrapOptions& options);

/// CI for the mean of i.i.d. values.
BootstrapCI bootstrap_mean_ci(std::span<const double> values, const BootstrapOptions& options);

/// CI for the pooled mean when whole clusters (films) are the resampling unit.
BootstrapCI cluster_bootstrap_mean_ci(std::span<const std::vector<double>> clusters,
                                      const BootstrapOptions& options);

/// Linear-interpolation quantile (Hyndman-Fan type 7) of sorted data.
double quantile_sorted(std::span<const double> sorted, double q);

}  // namespace screenlab
