#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "screenlab/bootstrap.hpp"
#include "screenlab/corpus.hpp"
#include "screenlab/dirichlet.hpp"

namespace screenlab {

inline constexpr std::size_t kDefaultRangeMinN = 50;
inline constexpr std::size_t kDefaultMinFilms = 30;

/// Emotional range of one subject: entropy of the Dirichlet fitted to its
/// utterances' emotion vectors.
struct RangeReport {
  std::string subject_id;
  std::size_t n = 0;
  DirichletParams params;
  double entropy = 0.0;
  double epsilon = 0.0;
  std::optional<BootstrapCI> ci;
};

/// smooth -> fit -> entropy. Throws InsufficientDataError naming subject_id
/// when fewer than min_n distributions are given.
RangeReport emotional_range(std::span<const EmotionDistribution> dists,
                            const std::string& subject_id, std::size_t min_n = kDefaultRangeMinN,
                            const DirichletFitOptions& fit = {});

/// A subject that was left out of a batch analysis.
struct SkippedSubject {
  std::string subject_id;
  std::size_t count = 0;
  std::string reason;
};

struct RangeSubject {
  std::string subject_id;
  std::vector<EmotionDistribution> dists;
};

struct SubjectRangeResult {
  std::vector<RangeReport> reports;  // ascending entropy
  std::vector<SkippedSubject> skipped;
};

/// Ranges for many subjects (phrase groups, films). Subjects below min_n go
/// to `skipped`. When bootstrap is given, each report gets an
/// utterance-level percentile CI on its entropy.
SubjectRangeResult subject_ranges(std::span<const RangeSubject> subjects, std::size_t min_n,
                                  const DirichletFitOptions& fit,
                                  const std::optional<BootstrapOptions>& bootstrap);

/// How a genre's score is assembled from its films.
enum class GenreAggregation {
  /// One Dirichlet over the pooled utterances of every film in the genre.
  pooled,
  /// Mean of per-film entropies.
  film_mean,
};

struct GenreRangeOptions {
  std::size_t min_films = kDefaultMinFilms;
  GenreAggregation aggregation = GenreAggregation::pooled;
  /// film_mean only: films with fewer utterances are not scored.
  std::size_t min_film_utterances = 2;
  DirichletFitOptions fit;
  /// Film-level cluster bootstrap; CIs are skipped when n_boot == 0.
  BootstrapOptions bootstrap;
};

struct GenreRange {
  RangeReport report;  // report.ci is the film-level cluster bootstrap CI
  std::size_t n_films = 0;
};

struct GenreRangeReport {
  std::vector<GenreRange> genres;  // ascending entropy
  std::vector<SkippedSubject> skipped;
};

/// Emotional range per genre. A film listing several genres contributes to
/// each; genres with fewer than min_films films are listed in `skipped`.
GenreRangeReport genre_emotional_range(const Corpus& corpus, const GenreRangeOptions& options = {});

}  // namespace screenlab
