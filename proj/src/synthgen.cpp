#include "screenlab/synthgen.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>

#include "screenlab/error.hpp"
#include "screenlab/rng.hpp"

namespace screenlab {

namespace {

// stream ids, kept apart from the per-film streams 1..n_films
constexpr std::uint64_t kFamilyStream = 0xfa3117ULL << 32;

EmotionDistribution draw_dirichlet(Rng& rng, const EmotionVector& alpha) {
  EmotionVector logs{};
  double mx = -std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < kNumEmotions; ++j) {
    logs[j] = rng.log_gamma_variate(alpha[j]);
    mx = std::max(mx, logs[j]);
  }
  double sum = 0.0;
  for (auto& v : logs) {
    v = std::exp(v - mx);
    sum += v;
  }
  for (auto& v : logs) v /= sum;
  return EmotionDistribution::from_probs(logs);
}

std::string format(const char* fmt, std::size_t a, std::size_t b) {
  char buf[64];
  std::snprintf(buf, sizeof buf, fmt, a, b);
  return buf;
}

}  // namespace

std::vector<EmotionDistribution> sample_dirichlet(const EmotionVector& alpha, std::size_t n,
                                                  std::uint64_t seed) {
  for (double a : alpha) {
    if (!(a > 0.0) || !std::isfinite(a)) throw DomainError("sample_dirichlet: alpha must be positive");
  }
  Rng rng(seed);
  std::vector<EmotionDistribution> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) out.push_back(draw_dirichlet(rng, alpha));
  return out;
}

PlantedGraph planted_partition(std::size_t blocks, std::size_t block_size, double p_in,
                               double p_out, std::uint64_t seed) {
  if (!(p_in >= 0.0 && p_in <= 1.0 && p_out >= 0.0 && p_out <= 1.0)) {
    throw DomainError("planted_partition: probabilities must lie in [0, 1]");
  }
  PlantedGraph out;
  const std::size_t n = blocks * block_size;
  out.graph.node_ids.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    out.graph.node_ids.push_back("n" + std::to_string(i));
    out.labels.push_back(i / block_size);
  }
  Rng rng(seed);
  for (std::size_t u = 0; u < n; ++u) {
    for (std::size_t v = u + 1; v < n; ++v) {
      const double p = out.labels[u] == out.labels[v] ? p_in : p_out;
      if (rng.bernoulli(p)) out.graph.edges.push_back({u, v, 1.0});
    }
  }
  return out;
}

std::vector<PanelObservation> synth_panel(std::span<const std::size_t> sizes, double beta,
                                          double noise, std::uint64_t seed, double x_lo,
                                          double x_hi, bool integer_x) {
  Rng rng(seed);
  std::vector<PanelObservation> out;
  for (std::size_t g = 0; g < sizes.size(); ++g) {
    const double a = rng.normal();
    for (std::size_t i = 0; i < sizes[g]; ++i) {
      double x = x_lo + (x_hi - x_lo) * rng.uniform();
      if (integer_x) x = std::floor(x);
      const double y = a + beta * x + noise * rng.normal();
      out.push_back({g, x, y, format("g%zu_%zu", g, i)});
    }
  }
  return out;
}

void check_spec(const SynthSpec& spec) {
  auto fail = [](const std::string& msg) { throw ValidationError("synth spec: " + msg); };
  if (spec.n_films == 0 || spec.utterances_per_film == 0) fail("n_films and utterances_per_film must be > 0");
  if (spec.n_bins == 0) fail("n_bins must be > 0");
  if (spec.years.empty()) fail("years must not be empty");
  if (!spec.neutral_by_bin.empty() && spec.neutral_by_bin.size() != spec.n_bins) {
    fail("neutral_by_bin has " + std::to_string(spec.neutral_by_bin.size()) + " entries for " +
         std::to_string(spec.n_bins) + " bins");
  }
  for (double p : spec.neutral_by_bin) {
    if (!(p >= 0.0 && p <= 1.0)) fail("neutral_by_bin entries must lie in [0, 1]");
  }
  if (!spec.emotionality_by_year.empty() && spec.emotionality_by_year.size() != spec.years.size()) {
    fail("emotionality_by_year has " + std::to_string(spec.emotionality_by_year.size()) +
         " entries for " + std::to_string(spec.years.size()) + " years");
  }
  if (spec.anger_peak_bin && *spec.anger_peak_bin >= spec.n_bins) fail("anger_peak_bin out of range");
  if (!(spec.anger_peak_share >= 0.0 && spec.anger_peak_share <= 1.0)) fail("anger_peak_share must lie in [0, 1]");
  if (!(spec.concentration > 0.0)) fail("concentration must be > 0");
  if (spec.genres.empty()) fail("genres must not be empty");
  if (!spec.genre_concentration.empty() && spec.genre_concentration.size() != spec.genres.size()) {
    fail("genre_concentration must match genres");
  }
  for (double c : spec.genre_concentration) {
    if (!(c > 0.0)) fail("genre_concentration entries must be > 0");
  }
  if (spec.n_phrase_families > 0 && (spec.variants_per_family == 0 || spec.embedding_dim == 0)) {
    fail("variants_per_family and embedding_dim must be > 0");
  }
  if (!(spec.runtime_s > 0.0) || spec.credits_s < 0.0 || spec.credits_s >= spec.runtime_s) {
    fail("need runtime_s > credits_s >= 0");
  }
}

Corpus synth_corpus(const SynthSpec& spec) {
  check_spec(spec);
  Corpus corpus;

  // phrase families: text and embedding of every variant
  std::vector<std::vector<std::string>> family_texts(spec.n_phrase_families);
  std::vector<std::vector<std::vector<double>>> family_vecs(spec.n_phrase_families);
  {
    Rng rng(derive_seed(spec.seed, kFamilyStream));
    for (std::size_t k = 0; k < spec.n_phrase_families; ++k) {
      std::vector<double> centre(spec.embedding_dim);
      for (auto& c : centre) c = rng.normal();
      for (std::size_t v = 0; v < spec.variants_per_family; ++v) {
        std::vector<double> e = centre;
        for (auto& x : e) x += spec.variant_noise * rng.normal();
        family_texts[k].push_back(format("phrase %zu variant %zu", k, v));
        family_vecs[k].push_back(std::move(e));
      }
    }
  }

  const double effective = spec.runtime_s - spec.credits_s;
  for (std::size_t f = 0; f < spec.n_films; ++f) {
    FilmRecord film;
    film.film_id = format("film%03zu", f, 0);
    film.title = format("Synthetic Film %zu", f + 1, 0);
    const std::size_t year_idx = f % spec.years.size();
    film.year = spec.years[year_idx];
    film.runtime_s = spec.runtime_s;
    if (spec.credits_s > 0.0) film.credits_start_s = effective;
    const std::size_t genre_idx = f % spec.genres.size();
    film.genres.insert(spec.genres[genre_idx]);
    const double conc =
        spec.genre_concentration.empty() ? spec.concentration : spec.genre_concentration[genre_idx];
    const double year_shift = spec.emotionality_by_year.empty() ? 0.0 : spec.emotionality_by_year[year_idx];

    Rng rng(derive_seed(spec.seed, f + 1));
    const std::size_t n = spec.utterances_per_film;
    const double slot = effective / static_cast<double>(n);
    auto make = [&](std::size_t i, double start, double end, std::optional<std::size_t> bin) {
      UtteranceRecord u;
      u.film_id = film.film_id;
      u.utt_id = format("film%03zu_u%04zu", f, i);
      u.start_s = start;
      u.end_s = end;
      if (spec.n_phrase_families > 0) {
        const auto k = static_cast<std::size_t>(rng.uniform_index(spec.n_phrase_families));
        const auto v = static_cast<std::size_t>(rng.uniform_index(spec.variants_per_family));
        u.text = family_texts[k][v];
        u.sent_embedding = family_vecs[k][v];
      } else {
        u.text = format("film%03zu line %zu", f, i);
      }
      double neutral = 0.6;
      if (bin && !spec.neutral_by_bin.empty()) neutral = spec.neutral_by_bin[*bin];
      neutral = std::clamp(neutral - year_shift, 0.01, 0.99);
      const double rest = 1.0 - neutral;
      EmotionVector mean{};
      double anger_share = 1.0 / 6.0;
      if (bin && spec.anger_peak_bin && *bin == *spec.anger_peak_bin) {
        anger_share = spec.anger_peak_share + (1.0 - spec.anger_peak_share) / 6.0;
      }
      const double other_share = (1.0 - anger_share) / 5.0;
      for (auto e : kAllEmotions) {
        mean[index_of(e)] = e == Emotion::neutral ? neutral
                            : e == Emotion::anger ? rest * anger_share
                                                  : rest * other_share;
      }
      EmotionVector alpha{};
      for (std::size_t j = 0; j < kNumEmotions; ++j) alpha[j] = std::max(1e-3, conc * mean[j]);
      u.emotion = draw_dirichlet(rng, alpha);
      corpus.utterances.push_back(std::move(u));
    };

    for (std::size_t i = 0; i < n; ++i) {
      const double start = (static_cast<double>(i) + 0.1 * rng.uniform()) * slot;
      const double end = start + 0.6 * slot;
      const double mid = 0.5 * (start + end);
      const auto bin = std::min(spec.n_bins - 1, static_cast<std::size_t>(std::floor(
                                                     static_cast<double>(spec.n_bins) * mid / effective)));
      make(i, start, end, bin);
    }
    if (spec.credits_s > 0.0) {
      const double cslot = spec.credits_s / static_cast<double>(spec.credits_utterances + 1);
      for (std::size_t c = 0; c < spec.credits_utterances; ++c) {
        const double start = effective + (static_cast<double>(c) + 0.5) * cslot;
        make(n + c, start, start + 0.4 * cslot, std::nullopt);
      }
    }
    corpus.films.emplace(film.film_id, std::move(film));
  }
  sort_utterances(corpus);
  validate_corpus(corpus);
  return corpus;
}

}  // namespace screenlab
