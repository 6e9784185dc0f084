#include <doctest.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <limits>
#include <sstream>

#include <json.hpp>

#include "oracles.hpp"
#include "screenlab/cli.hpp"

namespace fs = std::filesystem;
using screenlab::cli::run;

namespace {

const fs::path kFx = SCREENLAB_FIXTURES;

struct Result {
  int code;
  std::string out, err;
};

Result call(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = run(args, out, err);
  return {code, out.str(), err.str()};
}

std::vector<std::string> corpus_args(const std::string& name) {
  return {"--utterances", (kFx / name / "utterances.jsonl").string(), "--films",
          (kFx / name / "films.jsonl").string()};
}

std::vector<std::string> cmd(const std::string& sub, const std::string& corpus, const fs::path& out,
                             std::vector<std::string> extra = {}) {
  std::vector<std::string> a = {sub};
  for (auto& s : corpus_args(corpus)) a.push_back(s);
  a.push_back("--out");
  a.push_back(out.string());
  for (auto& s : extra) a.push_back(s);
  return a;
}

std::vector<std::string> csv_lines(const fs::path& p) {
  std::vector<std::string> lines;
  std::istringstream in(oracle::read_file(p));
  for (std::string l; std::getline(in, l);) lines.push_back(l);
  return lines;
}

std::vector<std::string> split(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  for (std::string c; std::getline(ss, c, ',');) out.push_back(c);
  if (!s.empty() && s.back() == ',') out.emplace_back();
  return out;
}

// whitespace-separated arguments with {fx} and {out} substituted
std::vector<std::string> expand(const std::string& line, const fs::path& out) {
  std::vector<std::string> args;
  std::istringstream in(line);
  for (std::string a; in >> a;) {
    for (auto [key, val] : {std::pair<std::string, std::string>{"{fx}", kFx.string()}, {"{out}", out.string()}}) {
      for (auto pos = a.find(key); pos != std::string::npos; pos = a.find(key)) a.replace(pos, key.size(), val);
    }
    args.push_back(a);
  }
  return args;
}

struct EnvGuard {
  std::string name;
  EnvGuard(const std::string& n, const std::string& v) : name(n) { setenv(n.c_str(), v.c_str(), 1); }
  ~EnvGuard() { unsetenv(name.c_str()); }
};

}  // namespace

TEST_CASE("number formatting") {
  using screenlab::cli::format_number;
  CHECK(format_number(0.1) == "0.1");
  CHECK(format_number(1.0 / 3.0) == "0.3333333333");
  CHECK(format_number(2.0) == "2");
  CHECK(format_number(-0.0) == "0");
  CHECK(format_number(1e-20) == "1e-20");
  CHECK(format_number(std::numeric_limits<double>::quiet_NaN()).empty());
}

TEST_CASE("usage errors exit with 2") {
  const auto dir = oracle::temp_dir("cli_usage");
  auto r = call(cmd("trajectory", "tiny", dir, {"--no-such-flag"}));
  CHECK(r.code == screenlab::cli::kExitUsage);
  CHECK(r.err.find("no-such-flag") != std::string::npos);
  CHECK(r.err.find("--bins") != std::string::npos);  // help text follows

  CHECK(call({"trajectory"}).code == screenlab::cli::kExitUsage);
  CHECK(call({"bogus"}).code == screenlab::cli::kExitUsage);
  CHECK(call({"trajectory", "--out", dir.string()}).code == screenlab::cli::kExitUsage);
  CHECK(call(cmd("trajectory", "tiny", dir, {"--measure", "emotion:neutral"})).code == screenlab::cli::kExitUsage);
  CHECK(call(cmd("trajectory", "tiny", dir, {"--mode", "soft"})).code == screenlab::cli::kExitUsage);
  CHECK(call(cmd("range", "tiny", dir, {"--by", "year"})).code == screenlab::cli::kExitUsage);
  CHECK(call({"--help"}).code == screenlab::cli::kExitOk);
}

TEST_CASE("validation errors exit with 1 and name file and line") {
  const auto dir = oracle::temp_dir("cli_invalid");
  oracle::write_file(dir / "films.jsonl", oracle::read_file(kFx / "tiny" / "films.jsonl"));
  oracle::write_file(dir / "utterances.jsonl",
                     "{\"film_id\":\"f1\",\"utt_id\":\"a\",\"start_s\":1,\"end_s\":2,\"text\":\"x\","
                     "\"emotion_probs\":[0,0,0,0,1,0,0]}\n"
                     "{\"film_id\":\"f1\",\"utt_id\":\"b\",\"start_s\":5,\"end_s\":3,\"text\":\"y\","
                     "\"emotion_probs\":[0,0,0,0,1,0,0]}\n"
                     "{\"film_id\":\"zz\",\"utt_id\":\"c\",\"start_s\":1,\"end_s\":2,\"text\":\"z\","
                     "\"emotion_probs\":[0.5,0,0,0,0.2,0,0]}\n");
  const auto r = call({"trajectory", "--utterances", (dir / "utterances.jsonl").string(), "--films",
                       (dir / "films.jsonl").string(), "--out", (dir / "out").string()});
  CHECK(r.code == screenlab::cli::kExitValidation);
  CHECK(r.err.find("utterances.jsonl:2:") != std::string::npos);
  CHECK(r.err.find("utterances.jsonl:3:") != std::string::npos);
  CHECK(r.err.find("utterances.jsonl:1:") == std::string::npos);
}

TEST_CASE("trajectory writes one row per bin and a manifest") {
  const auto dir = oracle::temp_dir("cli_trajectory");
  EnvGuard sde("SOURCE_DATE_EPOCH", "0");
  const auto r = call(cmd("trajectory", "synth", dir, {"--n-boot", "50", "--seed", "3"}));
  REQUIRE(r.code == 0);
  const auto lines = csv_lines(dir / "trajectory.csv");
  REQUIRE(lines.size() == 21);
  CHECK(lines[0] == "bin_index,bin_lo_pct,bin_hi_pct,point,ci_lo,ci_hi,n_utts,measure,mode");
  CHECK(lines[1].rfind("0,0,5,", 0) == 0);
  CHECK(lines[20].rfind("19,95,100,", 0) == 0);
  CHECK(csv_lines(dir / "trajectory.dat").size() == 22);

  const auto m = nlohmann::json::parse(oracle::read_file(dir / "manifest.json"));
  CHECK(m["command"] == "trajectory");
  CHECK(m["seed"] == 3);
  CHECK(m["timestamp"] == "1970-01-01T00:00:00Z");
  CHECK(m["config"]["bins"] == "20");
  const auto utts = (kFx / "synth" / "utterances.jsonl").string();
  CHECK(m["inputs"][utts] == screenlab::cli::file_digest(utts));
  CHECK(m["outputs"] == nlohmann::json{"trajectory.csv", "trajectory.dat"});
  CHECK(m["summary"]["n_excluded_past_runtime"] == 24);
}

TEST_CASE("config file fills in options the command line leaves out") {
  const auto dir = oracle::temp_dir("cli_config");
  oracle::write_file(dir / "run.cfg", "# defaults\nbins = 5\nn-boot=0\nwidgets=3\n");
  auto r = call(cmd("trajectory", "tiny", dir / "a", {"--config", (dir / "run.cfg").string()}));
  REQUIRE(r.code == 0);
  CHECK(csv_lines(dir / "a" / "trajectory.csv").size() == 6);
  r = call(cmd("trajectory", "tiny", dir / "b", {"--config", (dir / "run.cfg").string(), "--bins", "8"}));
  REQUIRE(r.code == 0);
  CHECK(csv_lines(dir / "b" / "trajectory.csv").size() == 9);
  const auto m = nlohmann::json::parse(oracle::read_file(dir / "b" / "manifest.json"));
  CHECK(m["config"]["bins"] == "8");
  CHECK(m["config"]["n-boot"] == "0");

  oracle::write_file(dir / "bad.cfg", "bins\n");
  r = call(cmd("trajectory", "tiny", dir / "c", {"--config", (dir / "bad.cfg").string()}));
  CHECK(r.code == screenlab::cli::kExitUsage);
  CHECK(r.err.find("bad.cfg:1") != std::string::npos);
}

TEST_CASE("seed falls back to SCREENLAB_SEED") {
  const auto dir = oracle::temp_dir("cli_seed");
  REQUIRE(call(cmd("diachronic", "synth", dir / "explicit", {"--n-boot", "100", "--seed", "123"})).code == 0);
  {
    EnvGuard env("SCREENLAB_SEED", "123");
    REQUIRE(call(cmd("diachronic", "synth", dir / "env", {"--n-boot", "100"})).code == 0);
    REQUIRE(call(cmd("diachronic", "synth", dir / "override", {"--n-boot", "100", "--seed", "9"})).code == 0);
  }
  REQUIRE(call(cmd("diachronic", "synth", dir / "none", {"--n-boot", "100"})).code == 0);
  const auto explicit_csv = oracle::read_file(dir / "explicit" / "diachronic.csv");
  CHECK(oracle::read_file(dir / "env" / "diachronic.csv") == explicit_csv);
  CHECK(oracle::read_file(dir / "override" / "diachronic.csv") != explicit_csv);
  CHECK(oracle::read_file(dir / "none" / "diachronic.csv") != explicit_csv);
  CHECK(nlohmann::json::parse(oracle::read_file(dir / "env" / "manifest.json"))["seed"] == 123);
  CHECK(nlohmann::json::parse(oracle::read_file(dir / "override" / "manifest.json"))["seed"] == 9);
  CHECK(nlohmann::json::parse(oracle::read_file(dir / "none" / "manifest.json"))["seed"] == 0);

  EnvGuard bad("SCREENLAB_SEED", "abc");
  CHECK(call(cmd("diachronic", "synth", dir / "bad", {"--n-boot", "10"})).code == screenlab::cli::kExitUsage);
}

TEST_CASE("outputs do not depend on the thread count") {
  const auto dir = oracle::temp_dir("cli_threads");
  for (const char* t : {"1", "3"}) {
    REQUIRE(call(cmd("range", "synth", dir / t, {"--by", "genre", "--min-films", "2", "--n-boot", "100",
                                               "--seed", "5", "--threads", t}))
                .code == 0);
  }
  CHECK(oracle::read_file(dir / "1" / "range_report.csv") == oracle::read_file(dir / "3" / "range_report.csv"));
}

TEST_CASE("range reports are ranked by ascending entropy") {
  const auto dir = oracle::temp_dir("cli_range");
  REQUIRE(call(cmd("range", "synth", dir, {"--by", "film", "--min-count", "10", "--n-boot", "0"})).code == 0);
  const auto lines = csv_lines(dir / "range_report.csv");
  REQUIRE(lines.size() == 13);
  double prev = -1e300;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const auto cells = split(lines[i]);
    REQUIRE(cells.size() == 18);
    CHECK(cells[0] == std::to_string(i));
    const double h = std::stod(cells[5]);
    CHECK(h >= prev);
    prev = h;
    CHECK(cells[6].empty());  // no CI without replicates
    CHECK(cells[16] == "true");
  }
}

TEST_CASE("ingest writes a canonical corpus that reads back identically") {
  const auto dir = oracle::temp_dir("cli_ingest");
  REQUIRE(call(cmd("ingest", "tiny", dir / "a", {"--trim-credits"})).code == 0);
  const auto s = nlohmann::json::parse(oracle::read_file(dir / "a" / "ingest_summary.json"));
  CHECK(s["n_utterances"] == 9);
  CHECK(s["years"] == nlohmann::json{1999, 2005});
  REQUIRE(call({"ingest", "--utterances", (dir / "a" / "utterances.jsonl").string(), "--films",
                (dir / "a" / "films.jsonl").string(), "--out", (dir / "b").string()})
              .code == 0);
  CHECK(oracle::read_file(dir / "a" / "utterances.jsonl") == oracle::read_file(dir / "b" / "utterances.jsonl"));
  CHECK(oracle::read_file(dir / "a" / "films.jsonl") == oracle::read_file(dir / "b" / "films.jsonl"));
}

TEST_CASE("eval on predictions and annotations") {
  const auto dir = oracle::temp_dir("cli_eval");
  oracle::write_file(dir / "pred.jsonl",
                     "{\"gold\":\"joy\",\"pred\":\"joy\"}\n"
                     "{\"gold\":\"anger\",\"pred\":[0.1,0,0,0,0.9,0,0]}\n"
                     "\n"
                     "{\"gold\":\"neutral\",\"pred\":[0,0,0,0,1,0,0]}\n"
                     "{\"gold\":\"sadness\",\"pred\":\"sadness\"}\n");
  oracle::write_file(dir / "ann.csv", "unit,coder,label\nu1,a,joy\nu1,b,joy\nu2,a,anger\nu2,b,anger\n");
  auto r = call({"eval", "--predictions", (dir / "pred.jsonl").string(), "--annotations",
                 (dir / "ann.csv").string(), "--n-boot", "0", "--out", (dir / "out").string()});
  REQUIRE(r.code == 0);
  const auto rep = nlohmann::json::parse(oracle::read_file(dir / "out" / "eval_report.json"));
  CHECK(rep["accuracy"].get<double>() == doctest::Approx(0.75));
  CHECK(rep["accuracy_ci"].is_null());
  const auto agr = nlohmann::json::parse(oracle::read_file(dir / "out" / "agreement.json"));
  CHECK(agr["krippendorff_alpha"].get<double>() == doctest::Approx(1.0));
  CHECK(agr["fleiss_kappa"].get<double>() == doctest::Approx(1.0));
  CHECK(csv_lines(dir / "out" / "confusion.csv").size() == 8);

  oracle::write_file(dir / "bad.jsonl", "{\"gold\":\"joy\",\"pred\":\"joy\"}\n{\"gold\":\"happy\",\"pred\":\"joy\"}\n");
  r = call({"eval", "--predictions", (dir / "bad.jsonl").string(), "--out", (dir / "bad").string()});
  CHECK(r.code == screenlab::cli::kExitValidation);
  CHECK(r.err.find("bad.jsonl:2") != std::string::npos);
}

TEST_CASE("head-predict reproduces the reference forward pass") {
  const fs::path hd = kFx / "head";
  const auto dir = oracle::temp_dir("cli_head");
  REQUIRE(call(cmd("head-predict", "head", dir / "corpus", {"--weights", (hd / "head.bin").string()})).code == 0);
  REQUIRE(call({"head-predict", "--weights", (hd / "head.bin").string(), "--layers",
                (hd / "layers_0.bin").string(), "--layers", (hd / "layers_1.bin").string(), "--layers",
                (hd / "layers_2.bin").string(), "--out", (dir / "raw").string()})
              .code == 0);
  const auto expected = csv_lines(hd / "expected.csv");
  const auto by_corpus = csv_lines(dir / "corpus" / "predictions.csv");
  const auto by_layers = csv_lines(dir / "raw" / "predictions.csv");
  REQUIRE(expected.size() == 4);
  REQUIRE(by_corpus.size() == 4);
  REQUIRE(by_layers.size() == 4);
  for (std::size_t i = 1; i < 4; ++i) {
    const auto e = split(expected[i]), a = split(by_corpus[i]), b = split(by_layers[i]);
    CHECK(a[0] == e[0]);
    CHECK(b[0] == e[1]);
    for (std::size_t j = 0; j < 7; ++j) {
      CHECK(std::abs(std::stod(a[j + 1]) - std::stod(e[j + 2])) < 1e-6);
      CHECK(a[j + 1] == b[j + 1]);
    }
  }
  REQUIRE(call(cmd("head-predict", "tiny", dir / "none", {"--weights", (hd / "head.bin").string()})).code ==
          screenlab::cli::kExitValidation);
}

TEST_CASE("synthgen output is deterministic and loads") {
  const auto dir = oracle::temp_dir("cli_synthgen");
  const std::vector<std::string> base = {"synthgen", "--n-films", "4", "--utterances-per-film", "30",
                                         "--years", "1990,2000", "--families", "3", "--seed", "6"};
  for (const char* d : {"a", "b"}) {
    auto args = base;
    args.push_back("--out");
    args.push_back((dir / d).string());
    REQUIRE(call(args).code == 0);
  }
  CHECK(oracle::read_file(dir / "a" / "utterances.jsonl") == oracle::read_file(dir / "b" / "utterances.jsonl"));
  CHECK(call({"ingest", "--utterances", (dir / "a" / "utterances.jsonl").string(), "--films",
              (dir / "a" / "films.jsonl").string(), "--out", (dir / "c").string()})
            .code == 0);
  auto bad = base;
  bad.insert(bad.end(), {"--anger-peak-bin", "25", "--out", (dir / "d").string()});
  CHECK(call(bad).code == screenlab::cli::kExitValidation);
}

TEST_CASE("range, trajectory and regress match the checked-in goldens") {
  std::istringstream cmds(oracle::read_file(kFx / "golden" / "commands.txt"));
  int n = 0;
  for (std::string line; std::getline(cmds, line);) {
    if (line.empty() || line[0] == '#') continue;
    const auto bar = line.find('|');
    std::string name = line.substr(0, bar);
    name.erase(name.find_last_not_of(' ') + 1);
    CAPTURE(name);
    const auto dir = oracle::temp_dir("cli_golden_" + name);
    const auto r = call(expand(line.substr(bar + 1), dir));
    REQUIRE(r.code == 0);
    const fs::path golden = kFx / "golden" / name;
    REQUIRE(fs::is_directory(golden));
    int files = 0;
    for (const auto& entry : fs::directory_iterator(golden)) {
      const auto fname = entry.path().filename();
      CAPTURE(fname);
      CHECK(oracle::read_file(dir / fname) == oracle::read_file(entry.path()));
      ++files;
    }
    CHECK(files > 0);
    ++n;
  }
  CHECK(n == 6);
}
