#include "screenlab/bootstrap.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <thread>

#include "screenlab/error.hpp"
#include "screenlab/rng.hpp"

namespace screenlab {

namespace {

void resample(std::size_t n_units, std::uint64_t seed, std::size_t replicate,
              std::vector<std::size_t>& indices) {
  Rng rng(derive_seed(seed, replicate));
  indices.resize(n_units);
  for (auto& i : indices) i = static_cast<std::size_t>(rng.uniform_index(n_units));
}

unsigned worker_count(const BootstrapOptions& options) {
  unsigned t = options.threads != 0 ? options.threads : std::thread::hardware_concurrency();
  t = std::max(1u, t);
  return static_cast<unsigned>(std::min<std::size_t>(t, std::max<std::size_t>(1, options.n_boot)));
}

void check_options(std::size_t n_units, const BootstrapOptions& options) {
  if (n_units == 0) throw InsufficientDataError("bootstrap", 0, 1);
  if (options.n_boot == 0) throw DomainError("bootstrap: n_boot must be > 0");
  if (!(options.level > 0.0 && options.level < 1.0)) {
    throw DomainError("bootstrap: level must lie in (0, 1)");
  }
}

}  // namespace

double quantile_sorted(std::span<const double> sorted, double q) {
  if (sorted.empty()) return std::numeric_limits<double>::quiet_NaN();
  const double h = q * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const auto hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

std::vector<BootstrapCI> bootstrap_ci(std::size_t n_units, std::size_t n_outputs,
                                      const VectorStatistic& statistic,
                                      const BootstrapOptions& options) {
  check_options(n_units, options);
  std::vector<double> point(n_outputs);
  {
    std::vector<std::size_t> identity(n_units);
    std::iota(identity.begin(), identity.end(), std::size_t{0});
    statistic(identity, point);
  }

  // replicates[b * n_outputs + k]
  std::vector<double> replicates(options.n_boot * n_outputs);
  auto run_range = [&](std::size_t begin, std::size_t end) {
    std::vector<std::size_t> indices;
    for (std::size_t b = begin; b < end; ++b) {
      resample(n_units, options.seed, b, indices);
      statistic(indices, std::span<double>(replicates).subspan(b * n_outputs, n_outputs));
    }
  };
  const unsigned workers = worker_count(options);
  if (workers == 1) {
    run_range(0, options.n_boot);
  } else {
    std::vector<std::jthread> pool;
    const std::size_t chunk = (options.n_boot + workers - 1) / workers;
    for (unsigned w = 0; w < workers; ++w) {
      const std::size_t begin = w * chunk;
      const std::size_t end = std::min(options.n_boot, begin + chunk);
      if (begin < end) pool.emplace_back(run_range, begin, end);
    }
  }

  const double tail = 0.5 * (1.0 - options.level);
  std::vector<BootstrapCI> out(n_outputs);
  std::vector<double> column;
  for (std::size_t k = 0; k < n_outputs; ++k) {
    column.clear();
    for (std::size_t b = 0; b < options.n_boot; ++b) {
      const double v = replicates[b * n_outputs + k];
      if (!std::isnan(v)) column.push_back(v);
    }
    std::sort(column.begin(), column.end());
    out[k] = BootstrapCI{point[k], quantile_sorted(column, tail), quantile_sorted(column, 1.0 - tail),
                         options.level, options.n_boot, options.seed};
  }
  return out;
}

BootstrapCI bootstrap_ci(std::size_t n_units, const UnitStatistic& statistic,
                         const BootstrapOptions& options) {
  auto wrapped = [&statistic](std::span<const std::size_t> idx, std::span<double> out) {
    out[0] = statistic(idx);
  };
  return bootstrap_ci(n_units, 1, wrapped, options).front();
}

BootstrapCI bootstrap_mean_ci(std::span<const double> values, const BootstrapOptions& options) {
  return bootstrap_ci(
      values.size(),
      [values](std::span<const std::size_t> idx) {
        double sum = 0.0;
        for (auto i : idx) sum += values[i];
        return sum / static_cast<double>(idx.size());
      },
      options);
}

BootstrapCI cluster_bootstrap_mean_ci(std::span<const std::vector<double>> clusters,
                                      const BootstrapOptions& options) {
  std::vector<double> sums(clusters.size());
  std::vector<double> counts(clusters.size());
  for (std::size_t c = 0; c < clusters.size(); ++c) {
    sums[c] = std::accumulate(clusters[c].begin(), clusters[c].end(), 0.0);
    counts[c] = static_cast<double>(clusters[c].size());
  }
  return bootstrap_ci(
      clusters.size(),
      [&](std::span<const std::size_t> idx) {
        double sum = 0.0;
        double count = 0.0;
        for (auto i : idx) {
          sum += sums[i];
          count += counts[i];
        }
        return count > 0.0 ? sum / count : std::numeric_limits<double>::quiet_NaN();
      },
      options);
}

}  // namespace screenlab
