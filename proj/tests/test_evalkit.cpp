#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "oracles.hpp"
#include "screenlab/error.hpp"
#include "screenlab/evalkit.hpp"
#include "screenlab/rng.hpp"

using namespace screenlab;
namespace fs = std::filesystem;

namespace {

std::vector<Emotion> labels(std::initializer_list<const char*> names) {
  std::vector<Emotion> out;
  for (const char* n : names) out.push_back(*parse_emotion(n));
  return out;
}

SerHeadParams random_head(std::size_t hidden, std::uint64_t seed) {
  Rng rng(seed);
  SerHeadParams p;
  p.hidden = hidden;
  auto fill = [&](std::vector<float>& v, std::size_t n, double sd) {
    v.resize(n);
    for (auto& x : v) x = static_cast<float>(sd * rng.normal());
  };
  fill(p.layer_logits, p.n_layers, 1.0);
  fill(p.hidden_w, hidden * p.dim, 0.05);
  fill(p.hidden_b, hidden, 0.1);
  fill(p.out_w, kNumEmotions * hidden, 0.5);
  fill(p.out_b, kNumEmotions, 0.1);
  return p;
}

std::vector<float> read_floats(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::vector<float> v(kLayerRows * kLayerCols);
  f.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(v.size() * sizeof(float)));
  REQUIRE(f.gcount() == static_cast<std::streamsize>(v.size() * sizeof(float)));
  return v;
}

}  // namespace

TEST_CASE("classification report on a hand-checked confusion") {
  const auto gold = labels({"anger", "anger", "anger", "anger", "joy", "joy", "joy", "neutral", "neutral", "neutral"});
  const auto pred = labels({"anger", "anger", "anger", "joy", "joy", "joy", "neutral", "neutral", "neutral", "joy"});
  const auto r = classification_report(gold, pred, {.n_boot = 0});
  CHECK(r.n == 10);
  CHECK(r.accuracy == doctest::Approx(0.7));
  const auto& a = r.per_class[index_of(Emotion::anger)];
  CHECK(a.precision == doctest::Approx(1.0));
  CHECK(a.recall == doctest::Approx(0.75));
  CHECK(a.f1 == doctest::Approx(6.0 / 7.0));
  CHECK(a.support == 4);
  const auto& j = r.per_class[index_of(Emotion::joy)];
  CHECK(j.precision == doctest::Approx(0.5));
  CHECK(j.f1 == doctest::Approx(4.0 / 7.0));
  CHECK(r.per_class[index_of(Emotion::neutral)].f1 == doctest::Approx(2.0 / 3.0));
  CHECK(r.per_class[index_of(Emotion::fear)].f1 == 0.0);
  CHECK(r.per_class[index_of(Emotion::fear)].support == 0);
  CHECK(r.weighted_f1 == doctest::Approx(5.0 / 7.0));
  CHECK(r.confusion[index_of(Emotion::anger)][index_of(Emotion::joy)] == 1);
  CHECK(r.confusion[index_of(Emotion::neutral)][index_of(Emotion::joy)] == 1);
  CHECK_FALSE(r.accuracy_ci.has_value());
}

TEST_CASE("bootstrap CIs bracket the point and reproduce") {
  const auto gold = labels({"anger", "joy", "joy", "neutral", "sadness", "fear", "anger", "joy"});
  const auto pred = labels({"anger", "joy", "neutral", "neutral", "sadness", "anger", "anger", "joy"});
  const auto a = classification_report(gold, pred, {.n_boot = 300, .seed = 5});
  const auto b = classification_report(gold, pred, {.n_boot = 300, .seed = 5, .threads = 1});
  REQUIRE(a.accuracy_ci);
  CHECK(a.accuracy_ci->lo <= a.accuracy);
  CHECK(a.accuracy_ci->hi >= a.accuracy);
  CHECK(a.accuracy_ci->lo == b.accuracy_ci->lo);
  CHECK(a.f1_ci->hi == b.f1_ci->hi);
}

TEST_CASE("distribution predictions reduce with argmax") {
  const auto gold = labels({"joy", "anger"});
  std::vector<EmotionDistribution> pred = {EmotionDistribution::one_hot(Emotion::joy),
                                           EmotionDistribution::one_hot(Emotion::fear)};
  const auto r = classification_report(gold, pred, {.n_boot = 0});
  CHECK(r.accuracy == doctest::Approx(0.5));
}

TEST_CASE("classification report errors") {
  const auto gold = labels({"joy", "anger"});
  const auto pred = labels({"joy"});
  CHECK_THROWS_AS(classification_report(gold, pred, {.n_boot = 0}), ShapeError);
  CHECK_THROWS_AS(classification_report(std::span<const Emotion>{}, std::span<const Emotion>{}, {.n_boot = 0}),
                  InsufficientDataError);
}

TEST_CASE("Krippendorff alpha, nominal, with missing values") {
  // four coders, twelve units; reference value 0.743
  const std::optional<int> m;
  const std::vector<std::vector<std::optional<int>>> by_coder = {
      {1, 2, 3, 3, 2, 1, 4, 1, 2, m, m, m},
      {1, 2, 3, 3, 2, 2, 4, 1, 2, 5, m, 3},
      {m, 3, 3, 3, 2, 3, 4, 2, 2, 5, 1, m},
      {1, 2, 3, 3, 2, 4, 4, 1, 2, 5, 1, m}};
  std::vector<std::vector<std::optional<int>>> units(12);
  for (const auto& row : by_coder) {
    for (std::size_t u = 0; u < 12; ++u) units[u].push_back(row[u]);
  }
  CHECK(krippendorff_alpha(units) == doctest::Approx(0.743421052631579).epsilon(1e-12));
}

TEST_CASE("Krippendorff alpha edge cases") {
  CHECK(krippendorff_alpha({{1, 1}, {2, 2}, {3, 3, 3}}) == doctest::Approx(1.0));
  CHECK(krippendorff_alpha({{4, 4}, {4, 4, 4}}) == 1.0);
  // systematic disagreement goes below zero
  CHECK(krippendorff_alpha({{1, 2}, {2, 1}, {1, 2}}) < 0.0);
  CHECK_THROWS_AS(krippendorff_alpha({{1}, {2, std::nullopt}}), InsufficientDataError);
}

TEST_CASE("Fleiss kappa") {
  const std::vector<std::vector<std::size_t>> t = {
      {0, 0, 0, 0, 14}, {0, 2, 6, 4, 2}, {0, 0, 3, 5, 6}, {0, 3, 9, 2, 0}, {2, 2, 8, 1, 1},
      {7, 7, 0, 0, 0},  {3, 2, 6, 3, 0}, {2, 5, 3, 2, 2}, {6, 5, 2, 1, 0}, {0, 2, 2, 3, 7}};
  CHECK(fleiss_kappa(t, 14) == doctest::Approx(0.20993070442195522).epsilon(1e-12));
  CHECK(fleiss_kappa({{3, 0}, {0, 3}, {3, 0}}, 3) == doctest::Approx(1.0));
  CHECK_THROWS_AS(fleiss_kappa({{3, 1}}, 3), ValidationError);
  CHECK_THROWS_AS(fleiss_kappa({{1, 0}}, 1), DomainError);
  CHECK_THROWS_AS(fleiss_kappa({}, 3), DomainError);
  CHECK_THROWS_AS(fleiss_kappa({{3, 0}, {3}}, 3), ShapeError);
}

TEST_CASE("head forward pass matches the numpy reference") {
  const fs::path dir = fs::path(SCREENLAB_FIXTURES) / "head";
  const auto params = read_head_weights(dir / "head.bin");
  CHECK(params.hidden == 8);
  std::istringstream csv(oracle::read_file(dir / "expected.csv"));
  std::string line;
  std::getline(csv, line);
  CHECK(line == "utt_id,sidecar,anger,disgust,fear,joy,neutral,sadness,surprise");
  int rows = 0;
  while (std::getline(csv, line)) {
    std::istringstream ls(line);
    std::string id, sidecar, cell;
    std::getline(ls, id, ',');
    std::getline(ls, sidecar, ',');
    const auto probs = ser_head_forward(read_floats(dir / sidecar), params);
    for (std::size_t j = 0; j < kNumEmotions; ++j) {
      std::getline(ls, cell, ',');
      CHECK(std::abs(probs[j] - std::stod(cell)) < 1e-6);
    }
    ++rows;
  }
  CHECK(rows == 3);
}

TEST_CASE("weight file round trip and label permutation") {
  const auto dir = oracle::temp_dir("head_roundtrip");
  const auto p = random_head(5, 11);
  write_head_weights(p, dir / "w.bin");
  const auto q = read_head_weights(dir / "w.bin");
  CHECK(q.layer_logits == p.layer_logits);
  CHECK(q.hidden_w == p.hidden_w);
  CHECK(q.out_w == p.out_w);
  CHECK(q.out_b == p.out_b);

  // Rewrite with labels reversed and output rows reversed to match: the
  // model is the same, so predictions must agree.
  std::string bytes = oracle::read_file(dir / "w.bin");
  std::uint32_t len = 0;
  std::memcpy(&len, bytes.data() + 12, 4);
  auto header = nlohmann::json::parse(bytes.substr(16, len));
  auto lbls = header["labels"].get<std::vector<std::string>>();
  std::reverse(lbls.begin(), lbls.end());
  header["labels"] = lbls;
  const std::string h = header.dump();
  SerHeadParams rev = p;
  for (std::size_t r = 0; r < kNumEmotions; ++r) {
    const std::size_t s = kNumEmotions - 1 - r;
    std::copy_n(p.out_w.begin() + static_cast<std::ptrdiff_t>(s * p.hidden), p.hidden,
                rev.out_w.begin() + static_cast<std::ptrdiff_t>(r * p.hidden));
    rev.out_b[r] = p.out_b[s];
  }
  write_head_weights(rev, dir / "rev.bin");
  std::string rb = oracle::read_file(dir / "rev.bin");
  std::string out = rb.substr(0, 12);
  const auto hl = static_cast<std::uint32_t>(h.size());
  out.append(reinterpret_cast<const char*>(&hl), 4);
  out += h;
  out += rb.substr(16 + len);
  oracle::write_file(dir / "perm.bin", out);
  const auto perm = read_head_weights(dir / "perm.bin");

  Rng rng(3);
  std::vector<float> layers(kLayerRows * kLayerCols);
  for (auto& x : layers) x = static_cast<float>(rng.normal());
  const auto a = ser_head_forward(layers, p);
  const auto b = ser_head_forward(layers, perm);
  for (std::size_t j = 0; j < kNumEmotions; ++j) CHECK(a[j] == doctest::Approx(b[j]).epsilon(1e-12));
}

TEST_CASE("weight file errors") {
  const auto dir = oracle::temp_dir("head_errors");
  auto p = random_head(4, 2);
  p.out_b.pop_back();
  CHECK_THROWS_AS(p.check(), ShapeError);
  CHECK_THROWS_AS(write_head_weights(p, dir / "bad.bin"), ShapeError);
  p = random_head(4, 2);
  p.activation = "tanh";
  CHECK_THROWS_AS(p.check(), ValidationError);

  p = random_head(4, 2);
  write_head_weights(p, dir / "ok.bin");
  std::string bytes = oracle::read_file(dir / "ok.bin");
  oracle::write_file(dir / "trunc.bin", bytes.substr(0, bytes.size() - 4));
  CHECK_THROWS_AS(read_head_weights(dir / "trunc.bin"), Error);
  oracle::write_file(dir / "extra.bin", bytes + "xx");
  CHECK_THROWS_AS(read_head_weights(dir / "extra.bin"), Error);
  oracle::write_file(dir / "magic.bin", "NOTAHEAD" + bytes.substr(8));
  CHECK_THROWS_AS(read_head_weights(dir / "magic.bin"), Error);
  CHECK_THROWS_AS(read_head_weights(dir / "missing.bin"), Error);

  std::vector<float> short_layers(10);
  CHECK_THROWS_AS(ser_head_forward(short_layers, p), ShapeError);
}
