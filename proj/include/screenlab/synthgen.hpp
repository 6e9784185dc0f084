#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "screenlab/corpus.hpp"
#include "screenlab/diachronic.hpp"
#include "screenlab/dirichlet.hpp"
#include "screenlab/phrase_graph.hpp"

namespace screenlab {

/// n draws from Dir(alpha): independent Gamma(alpha_j, 1) variates, normalized.
/// Normalization is done in log space so tiny alphas do not underflow to an
/// all-zero vector. Throws DomainError unless every alpha_j > 0.
std::vector<EmotionDistribution> sample_dirichlet(const EmotionVector& alpha, std::size_t n,
                                                  std::uint64_t seed);

struct PlantedGraph {
  SimilarityGraph graph;
  std::vector<std::size_t> labels;  // block of each node
};

/// Stochastic block model with `blocks` blocks of `block_size` nodes and unit
/// edge weights. Node ids are "n0", "n1", ... in block order.
PlantedGraph planted_partition(std::size_t blocks, std::size_t block_size, double p_in,
                               double p_out, std::uint64_t seed);

/// Panel with y = a_g + beta * x + noise * N(0, 1). `sizes[g]` observations
/// in group g, x drawn uniformly from [x_lo, x_hi] (whole numbers when
/// integer_x), a_g ~ N(0, 1).
std::vector<PanelObservation> synth_panel(std::span<const std::size_t> sizes, double beta,
                                          double noise, std::uint64_t seed, double x_lo = 1950.0,
                                          double x_hi = 2020.0, bool integer_x = true);

/// Recipe for a synthetic corpus. Each utterance's emotion vector is drawn
/// from a Dirichlet whose mean is set by the curves below, so the expected
/// P(neutral) in narrative bin b of a film released in years[i] is
///   clamp(neutral_by_bin[b] - emotionality_by_year[i], 0.01, 0.99).
/// The non-neutral mass is split evenly over the six other labels, except in
/// anger_peak_bin where anger takes anger_peak_share of it.
struct SynthSpec {
  std::size_t n_films = 40;
  std::size_t utterances_per_film = 200;
  std::size_t n_bins = 20;
  /// Release years, assigned to films cyclically.
  std::vector<int> years = {2000};
  /// Expected P(neutral) per bin; empty means flat at 0.6.
  std::vector<double> neutral_by_bin;
  /// Added to emotionality per entry of `years`; empty means no year effect.
  std::vector<double> emotionality_by_year;
  std::optional<std::size_t> anger_peak_bin;
  double anger_peak_share = 0.7;
  /// Dirichlet concentration alpha_0 around the target mean.
  double concentration = 20.0;
  /// Genres assigned to films cyclically, each with its own concentration
  /// (overrides `concentration`) when genre_concentration is non-empty.
  std::vector<std::string> genres = {"drama"};
  std::vector<double> genre_concentration;
  /// Texts come from this many phrase families, each with variants_per_family
  /// spellings whose sentence embeddings sit close to a family centre. Zero
  /// gives every utterance a unique text and no embeddings.
  std::size_t n_phrase_families = 0;
  std::size_t variants_per_family = 3;
  std::size_t embedding_dim = 16;
  double variant_noise = 0.05;
  double runtime_s = 6000.0;
  /// Credits run for this long at the end of each film; 0 disables them.
  double credits_s = 240.0;
  /// Extra utterances placed inside the credits.
  std::size_t credits_utterances = 2;
  std::uint64_t seed = 0;
};

/// Throws ValidationError when curve lengths or probabilities are invalid.
void check_spec(const SynthSpec& spec);

/// Builds and validates a corpus following `spec`. Deterministic per seed.
Corpus synth_corpus(const SynthSpec& spec);

}  // namespace screenlab
