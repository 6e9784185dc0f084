#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "screenlab/bootstrap.hpp"
#include "screenlab/corpus.hpp"

namespace screenlab {

inline constexpr std::size_t kDefaultBins = 20;

/// Narrative-time bin of an utterance: floor(n_bins * midpoint / runtime),
/// with runtime the film's credits boundary when known, clamped to the last
/// bin. Empty when the midpoint lies past that runtime.
std::optional<std::size_t> assign_bin(const UtteranceRecord& u, const FilmRecord& film,
                                      std::size_t n_bins = kDefaultBins);

struct TrajectoryBin {
  std::size_t index = 0;
  double lo_pct = 0.0;
  double hi_pct = 0.0;
  /// Missing when no utterance contributes to the bin.
  std::optional<double> point;
  std::optional<BootstrapCI> ci;
  std::size_t n_utts = 0;
};

struct TrajectoryReport {
  std::size_t n_bins = kDefaultBins;
  /// "emotionality" or "emotion:<label>".
  std::string measure;
  EmotionalityMode mode = EmotionalityMode::prob;
  std::vector<TrajectoryBin> bins;
  /// Utterances whose midpoint fell past the effective runtime.
  std::size_t n_excluded = 0;
  /// Utterances left out of a proportion measure (all-neutral ones).
  std::size_t n_not_applicable = 0;
};

struct TrajectoryOptions {
  EmotionalityMode mode = EmotionalityMode::prob;
  std::size_t n_bins = kDefaultBins;
  /// Film-level cluster bootstrap; CIs are skipped when n_boot == 0.
  BootstrapOptions bootstrap;
};

/// Per-bin mean emotionality over all utterances in the bin.
TrajectoryReport emotionality_trajectory(const Corpus& corpus, const TrajectoryOptions& options = {});

/// Per-bin share of one non-neutral label among the emotional mass.
/// prob: mean of P(label) / (1 - P(neutral)) over utterances that are not
/// (numerically) all-neutral. argmax: fraction of utterances with a
/// non-neutral argmax whose argmax is the label.
/// Throws DomainError for label == neutral.
TrajectoryReport emotion_proportion_trajectory(const Corpus& corpus, Emotion label,
                                               const TrajectoryOptions& options = {});

}  // namespace screenlab
