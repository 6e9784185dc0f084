#include <doctest.h>

#include <filesystem>

#include "screenlab/error.hpp"
#include "screenlab/range.hpp"
#include "screenlab/synthgen.hpp"

using namespace screenlab;
namespace fs = std::filesystem;

namespace {

Corpus tiny() {
  const fs::path d = fs::path(SCREENLAB_FIXTURES) / "tiny";
  return parse_corpus(d / "utterances.jsonl", d / "films.jsonl");
}

std::vector<EmotionDistribution> dists_of(const Corpus& c, const std::string& film = "") {
  std::vector<EmotionDistribution> out;
  for (const auto& u : c.utterances) {
    if (film.empty() || u.film_id == film) out.push_back(u.emotion);
  }
  return out;
}

}  // namespace

TEST_CASE("emotional_range is the entropy of the fitted Dirichlet") {
  const auto xs = sample_dirichlet({2, 1, 1, 1, 5, 1, 1}, 500, 4);
  const auto r = emotional_range(xs, "s");
  CHECK(r.subject_id == "s");
  CHECK(r.n == 500);
  CHECK(r.entropy == dirichlet_entropy(dirichlet_mle(xs).alpha));
  CHECK(r.epsilon == 1e-6);
}

TEST_CASE("subjects below the minimum are named") {
  const auto xs = sample_dirichlet({1, 1, 1, 1, 1, 1, 1}, 49, 4);
  try {
    emotional_range(xs, "phrase 7");
    FAIL("expected InsufficientDataError");
  } catch (const InsufficientDataError& e) {
    CHECK(e.subject() == "phrase 7");
    CHECK(e.have() == 49);
    CHECK(e.need() == 50);
  }
}

TEST_CASE("subject_ranges sorts ascending and lists skipped subjects") {
  std::vector<RangeSubject> subjects = {
      {"loose", sample_dirichlet({2, 2, 2, 2, 2, 2, 2}, 300, 1)},
      {"tight", sample_dirichlet({20, 20, 20, 20, 20, 20, 20}, 300, 2)},
      {"small", sample_dirichlet({2, 2, 2, 2, 2, 2, 2}, 10, 3)},
  };
  const auto res = subject_ranges(subjects, 50, {}, BootstrapOptions{.n_boot = 200, .seed = 9});
  REQUIRE(res.reports.size() == 2);
  CHECK(res.reports[0].subject_id == "tight");
  CHECK(res.reports[1].subject_id == "loose");
  REQUIRE(res.skipped.size() == 1);
  CHECK(res.skipped[0].subject_id == "small");
  CHECK(res.skipped[0].count == 10);
  for (const auto& r : res.reports) {
    REQUIRE(r.ci.has_value());
    CHECK(r.ci->lo <= r.entropy);
    CHECK(r.entropy <= r.ci->hi);
    CHECK(r.ci->point == r.entropy);
  }
  const auto again = subject_ranges(subjects, 50, {}, BootstrapOptions{.n_boot = 200, .seed = 9});
  CHECK(again.reports[0].ci->lo == res.reports[0].ci->lo);
  const auto no_ci = subject_ranges(subjects, 50, {}, std::nullopt);
  CHECK_FALSE(no_ci.reports[0].ci.has_value());
}

TEST_CASE("pooled genre range fits every utterance of the genre's films") {
  const auto c = tiny();
  GenreRangeOptions o;
  o.min_films = 1;
  o.bootstrap.n_boot = 100;
  const auto res = genre_emotional_range(c, o);
  REQUIRE(res.genres.size() == 2);
  for (const auto& g : res.genres) {
    if (g.report.subject_id == "drama") {
      CHECK(g.n_films == 2);
      CHECK(g.report.n == 10);
      CHECK(g.report.entropy == doctest::Approx(emotional_range(dists_of(c), "d", 2).entropy).epsilon(1e-12));
    } else {
      CHECK(g.report.subject_id == "comedy");
      CHECK(g.n_films == 1);
      CHECK(g.report.entropy == doctest::Approx(emotional_range(dists_of(c, "f2"), "c", 2).entropy).epsilon(1e-12));
    }
  }
  o.min_films = 2;
  const auto strict = genre_emotional_range(c, o);
  CHECK(strict.genres.size() == 1);
  REQUIRE(strict.skipped.size() == 1);
  CHECK(strict.skipped[0].subject_id == "comedy");
}

TEST_CASE("film-mean genre range averages per-film entropies") {
  const auto c = tiny();
  GenreRangeOptions o;
  o.min_films = 2;
  o.aggregation = GenreAggregation::film_mean;
  o.bootstrap.n_boot = 0;
  const auto res = genre_emotional_range(c, o);
  REQUIRE(res.genres.size() == 1);
  const double e1 = emotional_range(dists_of(c, "f1"), "f1", 2).entropy;
  const double e2 = emotional_range(dists_of(c, "f2"), "f2", 2).entropy;
  CHECK(res.genres[0].report.entropy == doctest::Approx(0.5 * (e1 + e2)).epsilon(1e-12));
  CHECK_FALSE(res.genres[0].report.ci.has_value());
}
