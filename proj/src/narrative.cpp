#include "screenlab/narrative.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>

#include "screenlab/error.hpp"

namespace screenlab {

namespace {

constexpr double kAllNeutral = 1.0 - 1e-9;

/// Value an utterance contributes to a measure; empty when it does not take
/// part.
using Measure = std::function<std::optional<double>(const UtteranceRecord&)>;

TrajectoryReport build_trajectory(const Corpus& corpus, const Measure& measure,
                                  std::string measure_name, const TrajectoryOptions& options) {
  if (options.n_bins == 0) throw DomainError("trajectory: n_bins must be > 0");
  const std::size_t nb = options.n_bins;

  TrajectoryReport report;
  report.n_bins = nb;
  report.measure = std::move(measure_name);
  report.mode = options.mode;

  // Per-film per-bin sums and counts; films are the bootstrap unit.
  std::vector<std::vector<double>> sums;
  std::vector<std::vector<double>> counts;
  for (const auto& [film_id, range] : corpus.film_ranges()) {
    const auto& film = corpus.film(film_id);
    std::vector<double> s(nb, 0.0), c(nb, 0.0);
    for (std::size_t i = range.first; i < range.second; ++i) {
      const auto& u = corpus.utterances[i];
      const auto bin = assign_bin(u, film, nb);
      if (!bin) {
        ++report.n_excluded;
        continue;
      }
      const auto value = measure(u);
      if (!value) {
        ++report.n_not_applicable;
        continue;
      }
      s[*bin] += *value;
      c[*bin] += 1.0;
    }
    sums.push_back(std::move(s));
    counts.push_back(std::move(c));
  }

  auto per_bin_means = [&](std::span<const std::size_t> films, std::span<double> out) {
    for (std::size_t b = 0; b < nb; ++b) {
      double s = 0.0, c = 0.0;
      for (auto f : films) {
        s += sums[f][b];
        c += counts[f][b];
      }
      out[b] = c > 0.0 ? s / c : std::numeric_limits<double>::quiet_NaN();
    }
  };

  std::vector<double> point(nb, std::numeric_limits<double>::quiet_NaN());
  std::vector<BootstrapCI> cis;
  if (!sums.empty()) {
    std::vector<std::size_t> all(sums.size());
    for (std::size_t f = 0; f < all.size(); ++f) all[f] = f;
    per_bin_means(all, point);
    if (options.bootstrap.n_boot > 0) {
      cis = bootstrap_ci(sums.size(), nb, per_bin_means, options.bootstrap);
    }
  }

  report.bins.resize(nb);
  for (std::size_t b = 0; b < nb; ++b) {
    auto& bin = report.bins[b];
    bin.index = b;
    bin.lo_pct = 100.0 * static_cast<double>(b) / static_cast<double>(nb);
    bin.hi_pct = 100.0 * static_cast<double>(b + 1) / static_cast<double>(nb);
    for (const auto& c : counts) bin.n_utts += static_cast<std::size_t>(c[b]);
    if (!std::isnan(point[b])) {
      bin.point = point[b];
      if (!cis.empty()) bin.ci = cis[b];
    }
  }
  return report;
}

}  // namespace

std::optional<std::size_t> assign_bin(const UtteranceRecord& u, const FilmRecord& film,
                                      std::size_t n_bins) {
  const double runtime = film.effective_runtime();
  const double mid = u.midpoint();
  if (mid > runtime) return std::nullopt;
  const auto bin = static_cast<std::size_t>(std::floor(static_cast<double>(n_bins) * mid / runtime));
  return std::min(bin, n_bins - 1);
}

TrajectoryReport emotionality_trajectory(const Corpus& corpus, const TrajectoryOptions& options) {
  const auto mode = options.mode;
  return build_trajectory(
      corpus, [mode](const UtteranceRecord& u) -> std::optional<double> { return emotionality(u, mode); },
      "emotionality", options);
}

TrajectoryReport emotion_proportion_trajectory(const Corpus& corpus, Emotion label,
                                               const TrajectoryOptions& options) {
  if (label == Emotion::neutral) {
    throw DomainError("emotion proportion trajectory needs a non-neutral label");
  }
  Measure measure;
  if (options.mode == EmotionalityMode::prob) {
    measure = [label](const UtteranceRecord& u) -> std::optional<double> {
      const double neutral = u.emotion[Emotion::neutral];
      if (neutral >= kAllNeutral) return std::nullopt;
      return std::min(1.0, u.emotion[label] / (1.0 - neutral));
    };
  } else {
    measure = [label](const UtteranceRecord& u) -> std::optional<double> {
      const auto top = u.emotion.argmax();
      if (top == Emotion::neutral) return std::nullopt;
      return top == label ? 1.0 : 0.0;
    };
  }
  return build_trajectory(corpus, measure, "emotion:" + std::string(emotion_name(label)), options);
}

}  // namespace screenlab
