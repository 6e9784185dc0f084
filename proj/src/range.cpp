#include "screenlab/range.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>

#include "screenlab/error.hpp"

namespace screenlab {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

bool by_entropy(const RangeReport& a, const RangeReport& b) {
  if (a.entropy != b.entropy) return a.entropy < b.entropy;
  return a.subject_id < b.subject_id;
}

DirichletSufficientStats stats_of(std::span<const EmotionVector> smoothed,
                                  std::span<const std::size_t> idx) {
  DirichletSufficientStats s;
  for (auto i : idx) s.add(smoothed[i]);
  return s;
}

double entropy_or_nan(const DirichletSufficientStats& stats, const DirichletFitOptions& fit) {
  if (stats.n() < 2) return kNaN;
  return dirichlet_entropy(dirichlet_mle(stats, fit).alpha);
}

}  // namespace

RangeReport emotional_range(std::span<const EmotionDistribution> dists,
                            const std::string& subject_id, std::size_t min_n,
                            const DirichletFitOptions& fit) {
  if (dists.size() < std::max<std::size_t>(min_n, 2)) {
    throw InsufficientDataError(subject_id, dists.size(), std::max<std::size_t>(min_n, 2));
  }
  RangeReport r;
  r.subject_id = subject_id;
  r.n = dists.size();
  r.params = dirichlet_mle(dists, fit);
  r.entropy = dirichlet_entropy(r.params.alpha);
  r.epsilon = fit.epsilon;
  return r;
}

SubjectRangeResult subject_ranges(std::span<const RangeSubject> subjects, std::size_t min_n,
                                  const DirichletFitOptions& fit,
                                  const std::optional<BootstrapOptions>& bootstrap) {
  SubjectRangeResult out;
  for (const auto& subject : subjects) {
    if (subject.dists.size() < std::max<std::size_t>(min_n, 2)) {
      out.skipped.push_back({subject.subject_id, subject.dists.size(),
                             "fewer than " + std::to_string(min_n) + " utterances"});
      continue;
    }
    RangeReport report = emotional_range(subject.dists, subject.subject_id, min_n, fit);
    if (bootstrap) {
      std::vector<EmotionVector> smoothed;
      smoothed.reserve(subject.dists.size());
      for (const auto& d : subject.dists) smoothed.push_back(smooth(d, fit.epsilon));
      report.ci = bootstrap_ci(
          smoothed.size(),
          [&](std::span<const std::size_t> idx) {
            return entropy_or_nan(stats_of(smoothed, idx), fit);
          },
          *bootstrap);
    }
    out.reports.push_back(std::move(report));
  }
  std::sort(out.reports.begin(), out.reports.end(), by_entropy);
  return out;
}

GenreRangeReport genre_emotional_range(const Corpus& corpus, const GenreRangeOptions& options) {
  // Per-film sufficient statistics, in film_id order.
  std::vector<std::string> film_ids;
  std::vector<DirichletSufficientStats> film_stats;
  std::vector<std::vector<EmotionDistribution>> film_dists;
  std::map<std::string, std::size_t> film_index;
  for (const auto& [id, film] : corpus.films) {
    film_index[id] = film_ids.size();
    film_ids.push_back(id);
    film_stats.emplace_back();
    film_dists.emplace_back();
  }
  for (const auto& u : corpus.utterances) {
    const auto f = film_index.at(u.film_id);
    film_stats[f].add(smooth(u.emotion, options.fit.epsilon));
    film_dists[f].push_back(u.emotion);
  }

  std::map<std::string, std::vector<std::size_t>> genre_films;
  for (const auto& [id, film] : corpus.films) {
    for (const auto& g : film.genres) genre_films[g].push_back(film_index.at(id));
  }

  GenreRangeReport out;
  for (const auto& [genre, films] : genre_films) {
    if (films.size() < options.min_films) {
      out.skipped.push_back({genre, films.size(),
                             "fewer than " + std::to_string(options.min_films) + " films"});
      continue;
    }
    GenreRange entry;
    entry.n_films = films.size();
    if (options.aggregation == GenreAggregation::pooled) {
      DirichletSufficientStats pooled;
      std::vector<EmotionDistribution> all;
      for (auto f : films) {
        pooled.merge(film_stats[f]);
        all.insert(all.end(), film_dists[f].begin(), film_dists[f].end());
      }
      if (pooled.n() < 2) {
        out.skipped.push_back({genre, films.size(), "fewer than 2 utterances"});
        continue;
      }
      entry.report = emotional_range(all, genre, 2, options.fit);
      if (options.bootstrap.n_boot > 0) {
        entry.report.ci = bootstrap_ci(
          films.size(),
          [&](std::span<const std::size_t> idx) {
            DirichletSufficientStats s;
            for (auto i : idx) s.merge(film_stats[films[i]]);
            return entropy_or_nan(s, options.fit);
          },
          options.bootstrap);
      }
    } else {
      std::vector<double> entropies;
      std::size_t n_utts = 0;
      for (auto f : films) {
        if (film_dists[f].size() < std::max<std::size_t>(options.min_film_utterances, 2)) continue;
        entropies.push_back(dirichlet_entropy(dirichlet_mle(film_stats[f], options.fit).alpha));
        n_utts += film_dists[f].size();
      }
      if (entropies.empty()) {
        out.skipped.push_back({genre, films.size(), "no film with enough utterances"});
        continue;
      }
      entry.report.subject_id = genre;
      entry.report.n = n_utts;
      entry.report.epsilon = options.fit.epsilon;
      entry.report.entropy = std::accumulate(entropies.begin(), entropies.end(), 0.0) /
                             static_cast<double>(entropies.size());
      if (options.bootstrap.n_boot > 0) entry.report.ci = bootstrap_mean_ci(entropies, options.bootstrap);
    }
    out.genres.push_back(std::move(entry));
  }
  std::sort(out.genres.begin(), out.genres.end(),
            [](const GenreRange& a, const GenreRange& b) { return by_entropy(a.report, b.report); });
  return out;
}

}  // namespace screenlab
