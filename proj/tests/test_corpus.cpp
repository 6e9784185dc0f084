#include <doctest.h>

#include <cmath>
#include <string>

#include "oracles.hpp"
#include "screenlab/corpus.hpp"
#include "screenlab/error.hpp"

using namespace screenlab;
namespace fs = std::filesystem;

namespace {

const fs::path kTiny = fs::path(SCREENLAB_FIXTURES) / "tiny";

Corpus tiny() { return parse_corpus(kTiny / "utterances.jsonl", kTiny / "films.jsonl"); }

const char* kFilms =
    R"({"film_id":"a","title":"A","year":2000,"runtime_s":100,"genres":["drama"]})"
    "\n"
    R"({"film_id":"b","title":"B","year":2001,"runtime_s":50,"credits_start_s":45,"genres":[]})"
    "\n";

std::string utt(const std::string& film, const std::string& id, double start, double end,
                const std::string& probs = "[0,0,0,0,1,0,0]") {
  return R"({"film_id":")" + film + R"(","utt_id":")" + id + R"(","start_s":)" +
         std::to_string(start) + R"(,"end_s":)" + std::to_string(end) +
         R"(,"text":"x","emotion_probs":)" + probs + "}\n";
}

std::vector<Diagnostic> diagnostics_for(const std::string& utterances, const std::string& films = kFilms) {
  const auto dir = oracle::temp_dir("corpus_diag");
  oracle::write_file(dir / "u.jsonl", utterances);
  oracle::write_file(dir / "f.jsonl", films);
  try {
    parse_corpus(dir / "u.jsonl", dir / "f.jsonl");
  } catch (const CorpusError& e) {
    return e.diagnostics();
  }
  return {};
}

}  // namespace

TEST_CASE("labels are in canonical order") {
  CHECK(emotion_name(Emotion::anger) == "anger");
  CHECK(emotion_name(Emotion::surprise) == "surprise");
  CHECK(index_of(Emotion::neutral) == 4);
  CHECK(parse_emotion("joy") == Emotion::joy);
  CHECK_FALSE(parse_emotion("Joy").has_value());
}

TEST_CASE("from_probs renormalizes inside the band and rejects outside it") {
  const std::vector<double> near = {0.1, 0.1, 0.1, 0.1, 0.6, 0.0, 0.0005};
  const auto d = EmotionDistribution::from_probs(near);
  double s = 0.0;
  for (double p : d.probs()) s += p;
  CHECK(s == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(d[Emotion::neutral] == doctest::Approx(0.6 / 1.0005));

  CHECK_THROWS_AS(EmotionDistribution::from_probs(std::vector<double>{0.1, 0.1, 0.1, 0.1, 0.6, 0.0, 0.002}),
                  ValidationError);
  CHECK_THROWS_AS(EmotionDistribution::from_probs(std::vector<double>{-0.1, 0.2, 0.1, 0.1, 0.6, 0.1, 0.0}),
                  ValidationError);
  CHECK_THROWS_AS(EmotionDistribution::from_probs(std::vector<double>{1.0, 0.0}), ValidationError);
}

TEST_CASE("argmax ties go to the earliest label") {
  const auto d = EmotionDistribution::from_probs(std::vector<double>{0, 0, 0, 0.5, 0.5, 0, 0});
  CHECK(d.argmax() == Emotion::joy);
  CHECK(EmotionDistribution().argmax() == Emotion::anger);
}

TEST_CASE("tiny fixture parses in canonical order") {
  const auto c = tiny();
  CHECK(c.films.size() == 2);
  REQUIRE(c.utterances.size() == 10);
  CHECK(c.utterances.front().utt_id == "f1_01");
  CHECK(c.utterances.back().utt_id == "f2_04");
  CHECK(c.film("f1").credits_start_s == 90.0);
  CHECK(c.film("f1").effective_runtime() == 90.0);
  CHECK(c.film("f2").effective_runtime() == 200.0);
  CHECK(c.film("f2").genres == std::set<std::string>{"comedy", "drama"});
  const auto ranges = c.film_ranges();
  CHECK(ranges.at("f1") == std::pair<std::size_t, std::size_t>{0, 6});
  CHECK(ranges.at("f2") == std::pair<std::size_t, std::size_t>{6, 10});
  CHECK(c.utterances[0].sent_embedding->size() == 3);
  CHECK_THROWS_AS(c.film("nope"), ValidationError);
}

TEST_CASE("emotionality in both modes") {
  const auto c = tiny();
  // f1_03 is a joy/neutral tie; the tie goes to joy
  double prob = 0.0, arg = 0.0;
  for (std::size_t i = 0; i < 6; ++i) {
    prob += emotionality(c.utterances[i], EmotionalityMode::prob);
    arg += emotionality(c.utterances[i], EmotionalityMode::argmax);
  }
  CHECK(prob == doctest::Approx(2.8));
  CHECK(arg == 4.0);
  CHECK(parse_mode("argmax") == EmotionalityMode::argmax);
  CHECK_FALSE(parse_mode("binary").has_value());
}

TEST_CASE("write then parse is bit-exact") {
  const auto c = tiny();
  const auto dir = oracle::temp_dir("corpus_roundtrip");
  write_utterances_jsonl(c, dir / "u.jsonl");
  write_films_jsonl(c, dir / "f.jsonl");
  const auto back = parse_corpus(dir / "u.jsonl", dir / "f.jsonl");
  CHECK(back == c);
  write_utterances_jsonl(back, dir / "u2.jsonl");
  CHECK(oracle::read_file(dir / "u.jsonl") == oracle::read_file(dir / "u2.jsonl"));
}

TEST_CASE("input order does not matter and exact duplicates collapse") {
  const std::string a = utt("a", "a1", 1, 2), b = utt("a", "a2", 3, 4), c = utt("b", "b1", 1, 2);
  const auto dir = oracle::temp_dir("corpus_order");
  oracle::write_file(dir / "f.jsonl", kFilms);
  oracle::write_file(dir / "u1.jsonl", a + b + c);
  oracle::write_file(dir / "u2.jsonl", c + b + "\n" + a + b);
  const auto x = parse_corpus(dir / "u1.jsonl", dir / "f.jsonl");
  const auto y = parse_corpus(dir / "u2.jsonl", dir / "f.jsonl");
  CHECK(x == y);
  CHECK(y.utterances.size() == 3);
}

TEST_CASE("every bad line is reported with its line number") {
  const std::string text = utt("a", "a1", 1, 2) +                       // 1 ok
                           "{not json\n" +                              // 2 parse
                           utt("zz", "z1", 1, 2) +                      // 3 referential
                           utt("a", "a2", 5, 4) +                       // 4 end before start
                           utt("a", "a3", 6, 7, "[0.5,0,0,0,0.6,0,0]") +  // 5 sum 1.1
                           utt("a", "a4", 8, 120) +                     // 6 past runtime
                           utt("b", "a1", 1, 2) +                       // 7 duplicate id
                           R"({"film_id":"a","utt_id":"a9","start_s":9,"end_s":10,"emotion_probs":[0,0,0,0,1,0,0]})" "\n";  // 8 no text
  const auto d = diagnostics_for(text);
  REQUIRE(d.size() == 7);
  std::vector<std::size_t> lines;
  for (const auto& x : d) lines.push_back(x.line);
  CHECK(lines == std::vector<std::size_t>{2, 3, 4, 5, 6, 7, 8});
  CHECK(d[0].kind == DiagnosticKind::parse);
  CHECK(d[1].kind == DiagnosticKind::referential);
  CHECK(d[2].kind == DiagnosticKind::validation);
  CHECK(d[5].message.find("duplicate utt_id 'a1'") != std::string::npos);
  CHECK(d[6].message.find("text") != std::string::npos);
}

TEST_CASE("equal start times within a film are rejected") {
  const auto d = diagnostics_for(utt("a", "a1", 1, 2) + utt("a", "a2", 1, 3));
  REQUIRE(d.size() == 1);
  CHECK(d[0].message.find("strictly after") != std::string::npos);
}

TEST_CASE("film file problems come first") {
  const std::string films = std::string(kFilms) + R"({"film_id":"c","title":"C","year":2000,"runtime_s":-5,"genres":[]})" "\n";
  const auto d = diagnostics_for("garbage\n", films);
  REQUIRE(d.size() == 2);
  CHECK(d[0].line == 3);
  CHECK(d[0].file.find("f.jsonl") != std::string::npos);
  CHECK(d[1].file.find("u.jsonl") != std::string::npos);
}

TEST_CASE("sent_embedding dimensions must agree") {
  std::string a = utt("a", "a1", 1, 2), b = utt("a", "a2", 3, 4);
  a.insert(a.size() - 2, R"(,"sent_embedding":[1,2,3])");
  b.insert(b.size() - 2, R"(,"sent_embedding":[1,2])");
  const auto d = diagnostics_for(a + b);
  REQUIRE(d.size() == 1);
  CHECK(d[0].line == 2);
}

TEST_CASE("layer sidecars are size-checked and resolved next to the utterances file") {
  const fs::path head = fs::path(SCREENLAB_FIXTURES) / "head";
  const auto c = parse_corpus(head / "utterances.jsonl", head / "films.jsonl");
  REQUIRE(c.utterances[0].layer_embeddings.has_value());
  CHECK(c.utterances[0].layer_embeddings->values.size() == kLayerRows * kLayerCols);
  const auto lazy = parse_corpus(head / "utterances.jsonl", head / "films.jsonl", {.load_layer_embeddings = false});
  CHECK_FALSE(lazy.utterances[0].layer_embeddings.has_value());
  CHECK(lazy.utterances[0].layer_embeddings_path == "layers_0.bin");

  const auto dir = oracle::temp_dir("corpus_sidecar");
  oracle::write_file(dir / "short.bin", std::string(100, '\0'));
  std::string line = utt("a", "a1", 1, 2);
  line.insert(line.size() - 2, R"(,"layer_embeddings_path":"short.bin")");
  oracle::write_file(dir / "u.jsonl", line);
  oracle::write_file(dir / "f.jsonl", kFilms);
  try {
    parse_corpus(dir / "u.jsonl", dir / "f.jsonl");
    FAIL("expected CorpusError");
  } catch (const CorpusError& e) {
    REQUIRE(e.diagnostics().size() == 1);
    CHECK(e.diagnostics()[0].message.find("76800") != std::string::npos);
  }
}

TEST_CASE("validate_corpus catches in-memory violations") {
  auto c = tiny();
  CHECK_NOTHROW(validate_corpus(c));
  std::swap(c.utterances[0], c.utterances[1]);
  CHECK_THROWS_AS(validate_corpus(c), CorpusError);
  sort_utterances(c);
  CHECK_NOTHROW(validate_corpus(c));
  c.utterances[3].film_id = "ghost";
  CHECK_THROWS_AS(validate_corpus(c), CorpusError);
}

TEST_CASE("trim_credits drops utterances starting at or after the boundary") {
  const auto c = trim_credits(tiny());
  CHECK(c.utterances.size() == 9);
  for (const auto& u : c.utterances) CHECK(u.utt_id != "f1_06");
}

TEST_CASE("conversations split on gaps longer than the threshold") {
  auto c = tiny();
  // f1: 0-4, 10-14 (gap 6), so with gap 6 the first two join
  const auto g = group_conversations(c, 6.0);
  CHECK(g.utterances[0].conversation_id == g.utterances[1].conversation_id);
  CHECK(g.utterances[1].conversation_id != g.utterances[2].conversation_id);
  const auto g3 = group_conversations(c, 3.0);
  std::set<std::string> ids;
  for (const auto& u : g3.utterances) ids.insert(*u.conversation_id);
  // 88 -> 91 in f1 is exactly 3 s and stays joined
  CHECK(ids.size() == 9);
  CHECK(g3.utterances[0].conversation_id == "f1:0");
}
