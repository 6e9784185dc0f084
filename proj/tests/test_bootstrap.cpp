#include <doctest.h>

#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <vector>

#include "screenlab/bootstrap.hpp"
#include "screenlab/error.hpp"

using namespace screenlab;

TEST_CASE("type-7 quantiles match numpy's default") {
  const std::vector<double> x = {1, 2, 3, 4, 10};
  // numpy.quantile(x, [0, .1, .25, .5, .9, 1])
  CHECK(quantile_sorted(x, 0.0) == 1.0);
  CHECK(quantile_sorted(x, 0.1) == doctest::Approx(1.4));
  CHECK(quantile_sorted(x, 0.25) == doctest::Approx(2.0));
  CHECK(quantile_sorted(x, 0.5) == doctest::Approx(3.0));
  CHECK(quantile_sorted(x, 0.9) == doctest::Approx(7.6));
  CHECK(quantile_sorted(x, 1.0) == 10.0);
  CHECK(std::isnan(quantile_sorted({}, 0.5)));
}

TEST_CASE("results do not depend on the thread count") {
  std::mt19937 gen(1);
  std::normal_distribution<double> nd(3.0, 2.0);
  std::vector<double> v(300);
  for (auto& x : v) x = nd(gen);
  BootstrapOptions o;
  o.n_boot = 999;
  o.seed = 77;
  o.threads = 1;
  const auto a = bootstrap_mean_ci(v, o);
  o.threads = 5;
  const auto b = bootstrap_mean_ci(v, o);
  CHECK(a.lo == b.lo);
  CHECK(a.hi == b.hi);
  CHECK(a.point == doctest::Approx(std::accumulate(v.begin(), v.end(), 0.0) / 300));
  CHECK(a.lo < a.point);
  CHECK(a.point < a.hi);
  o.seed = 78;
  const auto c = bootstrap_mean_ci(v, o);
  CHECK(c.lo != a.lo);
}

TEST_CASE("a constant sample gives a degenerate interval") {
  const std::vector<double> v(20, 4.5);
  const auto ci = bootstrap_mean_ci(v, {.n_boot = 200, .seed = 1});
  CHECK(ci.lo == 4.5);
  CHECK(ci.hi == 4.5);
}

TEST_CASE("NaN replicates are dropped per output") {
  // output 0 is always defined, output 1 only when unit 0 is drawn
  auto stat = [](std::span<const std::size_t> idx, std::span<double> out) {
    out[0] = static_cast<double>(idx.size());
    bool has0 = false;
    for (auto i : idx) has0 = has0 || i == 0;
    out[1] = has0 ? 1.0 : std::numeric_limits<double>::quiet_NaN();
    out[2] = std::numeric_limits<double>::quiet_NaN();
  };
  const auto cis = bootstrap_ci(3, 3, stat, {.n_boot = 300, .seed = 2});
  CHECK(cis[0].lo == 3.0);
  CHECK(cis[1].lo == 1.0);
  CHECK(cis[1].hi == 1.0);
  CHECK(std::isnan(cis[2].lo));
}

TEST_CASE("cluster bootstrap resamples whole clusters") {
  // two clusters with very different means: a replicate is either all-a,
  // all-b or a mix, so the interval spans both cluster means
  const std::vector<std::vector<double>> clusters = {{0, 0, 0, 0}, {1, 1}};
  const auto ci = cluster_bootstrap_mean_ci(clusters, {.n_boot = 2000, .seed = 3});
  CHECK(ci.point == doctest::Approx(1.0 / 3.0));
  CHECK(ci.lo == 0.0);
  CHECK(ci.hi == 1.0);
}

TEST_CASE("bad input") {
  CHECK_THROWS_AS(bootstrap_mean_ci({}, {}), InsufficientDataError);
  const std::vector<double> v = {1, 2};
  CHECK_THROWS_AS(bootstrap_mean_ci(v, {.n_boot = 0}), DomainError);
  CHECK_THROWS_AS(bootstrap_mean_ci(v, {.level = 1.0}), DomainError);
}
