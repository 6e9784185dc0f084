#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "screenlab/bootstrap.hpp"
#include "screenlab/corpus.hpp"
#include "screenlab/phrase_graph.hpp"

namespace screenlab {

struct YearRow {
  int year = 0;
  double point = 0.0;
  BootstrapCI ci;
  std::size_t n_utts = 0;
  std::size_t n_films = 0;
};

struct YearlyReport {
  EmotionalityMode mode = EmotionalityMode::prob;
  std::vector<YearRow> rows;  // ascending year
  /// Release years that have films but no utterances; omitted from rows.
  std::vector<int> empty_years;
};

/// Mean emotionality of all utterances per film release year, with a
/// film-level cluster bootstrap CI per year (lo and hi are NaN when
/// bootstrap.n_boot == 0).
YearlyReport yearly_emotionality(const Corpus& corpus, EmotionalityMode mode,
                                 const BootstrapOptions& bootstrap);

/// Distinct release years among films that have at least one utterance.
std::vector<int> corpus_years(const Corpus& corpus);

/// Groups with at least one utterance in every year of corpus_years().
std::vector<PhraseGroup> select_ubiquitous_groups(const Corpus& corpus,
                                                  std::span<const PhraseGroup> groups);

struct PanelObservation {
  std::size_t group_id = 0;
  double x = 0.0;  // release year
  double y = 0.0;  // emotionality
  std::string utt_id;
};

/// One observation per utterance of each group.
std::vector<PanelObservation> build_panel(const Corpus& corpus, std::span<const PhraseGroup> groups,
                                          EmotionalityMode mode);

struct RegressionReport {
  double beta = 0.0;
  double se = 0.0;
  double r2 = 0.0;  // within R^2
  double f_stat = 0.0;
  std::size_t df1 = 1;
  std::size_t df2 = 0;  // n_obs - n_groups - 1
  double p_value = 1.0;
  std::size_t n_obs = 0;
  std::size_t n_groups = 0;
};

/// Within (fixed-effects) estimator for y = a_g + beta x + e: x and y are
/// demeaned inside each group and beta is the OLS slope on the demeaned
/// data. x is centered on its overall mean first for conditioning; beta is
/// unaffected. F = df2 R^2 / (1 - R^2) on (1, df2) degrees of freedom.
///
/// Throws DegenerateDesignError when x has no within-group variation or
/// df2 < 1.
RegressionReport fixed_effects_ols(std::span<const PanelObservation> obs);

}  // namespace screenlab
