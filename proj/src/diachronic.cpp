#include "screenlab/diachronic.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <set>
#include <unordered_map>

#include "screenlab/error.hpp"
#include "screenlab/special.hpp"

namespace screenlab {

YearlyReport yearly_emotionality(const Corpus& corpus, EmotionalityMode mode,
                                 const BootstrapOptions& bootstrap) {
  YearlyReport report;
  report.mode = mode;

  std::map<int, std::vector<std::vector<double>>> by_year;  // year -> films -> values
  std::set<int> all_years;
  const auto ranges = corpus.film_ranges();
  for (const auto& [film_id, film] : corpus.films) {
    all_years.insert(film.year);
    auto it = ranges.find(film_id);
    if (it == ranges.end()) continue;
    std::vector<double> values;
    for (std::size_t i = it->second.first; i < it->second.second; ++i) {
      values.push_back(emotionality(corpus.utterances[i], mode));
    }
    by_year[film.year].push_back(std::move(values));
  }

  for (const int year : all_years) {
    auto it = by_year.find(year);
    if (it == by_year.end()) {
      report.empty_years.push_back(year);
      continue;
    }
    const auto& films = it->second;
    YearRow row;
    row.year = year;
    row.n_films = films.size();
    for (const auto& f : films) row.n_utts += f.size();
    if (bootstrap.n_boot > 0) {
      row.ci = cluster_bootstrap_mean_ci(films, bootstrap);
      row.point = row.ci.point;
    } else {
      double sum = 0.0;
      for (const auto& f : films) sum = std::accumulate(f.begin(), f.end(), sum);
      row.point = sum / static_cast<double>(row.n_utts);
      row.ci = {row.point, std::numeric_limits<double>::quiet_NaN(),
                std::numeric_limits<double>::quiet_NaN(), bootstrap.level, 0, bootstrap.seed};
    }
    report.rows.push_back(row);
  }
  return report;
}

std::vector<int> corpus_years(const Corpus& corpus) {
  std::set<int> years;
  for (const auto& [film_id, range] : corpus.film_ranges()) years.insert(corpus.film(film_id).year);
  return {years.begin(), years.end()};
}

namespace {

std::unordered_map<std::string, const UtteranceRecord*> index_utterances(const Corpus& corpus) {
  std::unordered_map<std::string, const UtteranceRecord*> by_id;
  by_id.reserve(corpus.utterances.size());
  for (const auto& u : corpus.utterances) by_id.emplace(u.utt_id, &u);
  return by_id;
}

const UtteranceRecord& lookup(const std::unordered_map<std::string, const UtteranceRecord*>& by_id,
                              const std::string& utt_id) {
  auto it = by_id.find(utt_id);
  if (it == by_id.end()) throw ValidationError("phrase group refers to unknown utt_id '" + utt_id + "'");
  return *it->second;
}

}  // namespace

std::vector<PhraseGroup> select_ubiquitous_groups(const Corpus& corpus,
                                                  std::span<const PhraseGroup> groups) {
  const auto years = corpus_years(corpus);
  const auto by_id = index_utterances(corpus);
  std::vector<PhraseGroup> out;
  for (const auto& g : groups) {
    std::set<int> seen;
    for (const auto& id : g.utterance_ids) seen.insert(corpus.film(lookup(by_id, id).film_id).year);
    if (!years.empty() && seen.size() == years.size()) out.push_back(g);
  }
  return out;
}

std::vector<PanelObservation> build_panel(const Corpus& corpus, std::span<const PhraseGroup> groups,
                                          EmotionalityMode mode) {
  const auto by_id = index_utterances(corpus);
  std::vector<PanelObservation> panel;
  for (const auto& g : groups) {
    for (const auto& id : g.utterance_ids) {
      const auto& u = lookup(by_id, id);
      panel.push_back({g.group_id, static_cast<double>(corpus.film(u.film_id).year),
                       emotionality(u, mode), u.utt_id});
    }
  }
  return panel;
}

RegressionReport fixed_effects_ols(std::span<const PanelObservation> obs) {
  RegressionReport r;
  r.n_obs = obs.size();
  if (obs.empty()) throw DegenerateDesignError("fixed_effects_ols: no observations");

  double x_center = 0.0;
  for (const auto& o : obs) x_center += o.x;
  x_center /= static_cast<double>(obs.size());

  struct Sums {
    double x = 0.0, y = 0.0, n = 0.0;
  };
  std::map<std::size_t, Sums> groups;
  for (const auto& o : obs) {
    auto& g = groups[o.group_id];
    g.x += o.x - x_center;
    g.y += o.y;
    g.n += 1.0;
  }
  r.n_groups = groups.size();
  if (r.n_obs < r.n_groups + 2) {
    throw DegenerateDesignError("fixed_effects_ols: need at least n_groups + 2 observations (have " +
                                std::to_string(r.n_obs) + " for " + std::to_string(r.n_groups) +
                                " groups)");
  }
  r.df2 = r.n_obs - r.n_groups - 1;

  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (const auto& o : obs) {
    const auto& g = groups.at(o.group_id);
    const double xt = (o.x - x_center) - g.x / g.n;
    const double yt = o.y - g.y / g.n;
    sxx += xt * xt;
    sxy += xt * yt;
    syy += yt * yt;
  }
  if (!(sxx > 0.0)) {
    throw DegenerateDesignError("fixed_effects_ols: x does not vary within any group");
  }
  r.beta = sxy / sxx;
  const double explained = r.beta * r.beta * sxx;
  const double residual = std::max(0.0, syy - explained);
  const double df2 = static_cast<double>(r.df2);
  r.se = std::sqrt(residual / df2 / sxx);
  r.r2 = syy > 0.0 ? std::min(1.0, explained / syy) : 0.0;
  if (r.r2 >= 1.0) {
    r.f_stat = std::numeric_limits<double>::infinity();
    r.p_value = 0.0;
  } else {
    r.f_stat = df2 * r.r2 / (1.0 - r.r2);
    r.p_value = special::f_distribution_sf(r.f_stat, 1.0, df2);
  }
  return r;
}

}  // namespace screenlab
