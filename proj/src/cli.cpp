#include "screenlab/cli.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "screenlab/bootstrap.hpp"
#include "screenlab/corpus.hpp"
#include "screenlab/diachronic.hpp"
#include "screenlab/error.hpp"
#include "screenlab/evalkit.hpp"
#include "screenlab/narrative.hpp"
#include "screenlab/phrase_graph.hpp"
#include "screenlab/range.hpp"
#include "screenlab/synthgen.hpp"

#ifndef SCREENLAB_VERSION
#define SCREENLAB_VERSION "0.0.0"
#endif

namespace screenlab::cli {

namespace fs = std::filesystem;
using ojson = nlohmann::ordered_json;

std::string file_digest(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw Error("cannot open " + path);
  std::uint64_t h = 0xcbf29ce484222325ULL;
  char buf[1 << 16];
  while (f) {
    f.read(buf, sizeof buf);
    for (std::streamsize i = 0; i < f.gcount(); ++i) {
      h ^= static_cast<unsigned char>(buf[i]);
      h *= 0x100000001b3ULL;
    }
  }
  char hex[17];
  std::snprintf(hex, sizeof hex, "%016llx", static_cast<unsigned long long>(h));
  return hex;
}

std::string format_number(double v) {
  if (std::isnan(v)) return "";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  if (v == 0.0) return "0";
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::general, 10);
  return std::string(buf, res.ptr);
}

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

}  // namespace

std::vector<std::pair<std::string, std::string>> read_config(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ValidationError("cannot open config file " + path);
  std::vector<std::pair<std::string, std::string>> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(f, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    const auto t = trim(line);
    if (t.empty()) continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos || trim(t.substr(0, eq)).empty()) {
      throw ValidationError(path + ":" + std::to_string(lineno) + ": expected key=value");
    }
    auto key = trim(t.substr(0, eq));
    if (key.rfind("--", 0) == 0) key.erase(0, 2);
    out.emplace_back(key, trim(t.substr(eq + 1)));
  }
  return out;
}

namespace {

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
  std::string q = "\"";
  for (char c : s) {
    if (c == '"') q += '"';
    q += c;
  }
  return q + "\"";
}

class Csv {
 public:
  explicit Csv(std::vector<std::string> header) { row(header); }

  void row(const std::vector<std::string>& fields) {
    for (std::size_t i = 0; i < fields.size(); ++i) {
      if (i) text_ += ',';
      text_ += csv_field(fields[i]);
    }
    text_ += '\n';
  }

  const std::string& text() const { return text_; }

 private:
  std::string text_;
};

std::string num(double v) { return format_number(v); }
std::string num(std::size_t v) { return std::to_string(v); }
std::string num(const std::optional<double>& v) { return v ? format_number(*v) : ""; }

ojson json_number(double v) {
  if (std::isfinite(v)) return v;
  return nullptr;
}

ojson ci_json(const std::optional<BootstrapCI>& ci) {
  if (!ci) return nullptr;
  return ojson{{"lo", json_number(ci->lo)},
               {"hi", json_number(ci->hi)},
               {"level", ci->level},
               {"n_boot", ci->n_boot},
               {"seed", ci->seed}};
}

std::string timestamp() {
  std::time_t t;
  if (const char* sde = std::getenv("SOURCE_DATE_EPOCH"); sde && *sde) {
    t = static_cast<std::time_t>(std::strtoll(sde, nullptr, 10));
  } else {
    t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  }
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

struct Options {
  std::string utterances;
  std::string films;
  std::string out_dir;
  std::string config;
  std::uint64_t seed = 0;
  std::string mode = "prob";
  std::size_t n_boot = 2000;
  double level = 0.95;
  unsigned threads = 0;

  // cluster / range / regress
  std::size_t k = 10;
  double tau = 0.8;
  double resolution = 1.0;
  int restarts = 8;
  std::size_t min_count = kDefaultRangeMinN;
  std::size_t min_films = kDefaultMinFilms;
  std::string by = "phrase";
  std::string aggregation = "pooled";
  double epsilon = 1e-6;

  // trajectory
  std::string measure = "emotionality";
  std::size_t bins = kDefaultBins;

  // ingest
  std::optional<double> conversation_gap;
  bool trim = false;

  // eval
  std::string predictions;
  std::string annotations;

  // head-predict
  std::string weights;
  std::vector<std::string> layers;

  // synthgen
  std::size_t n_films = 40;
  std::size_t per_film = 200;
  std::vector<int> years;
  double neutral_start = 0.6;
  double neutral_end = 0.6;
  double year_trend = 0.0;
  std::optional<std::size_t> anger_peak_bin;
  double anger_peak_share = 0.7;
  double concentration = 20.0;
  std::vector<std::string> genres;
  std::vector<double> genre_concentration;
  std::size_t families = 0;
  std::size_t variants = 3;
  std::size_t embedding_dim = 16;
};

/// Collects the files a command writes and the manifest describing them.
class OutputDir {
 public:
  explicit OutputDir(const std::string& dir) : dir_(dir) {
    std::error_code ec;
    fs::create_directories(dir_, ec);
    if (ec) throw Error("cannot create output directory " + dir + ": " + ec.message());
  }

  fs::path path(const std::string& name) {
    files_.push_back(name);
    return dir_ / name;
  }

  void write(const std::string& name, const std::string& content) {
    std::ofstream f(path(name), std::ios::binary);
    if (!f) throw Error("cannot write " + (dir_ / name).string());
    f << content;
    if (!f) throw Error("cannot write " + (dir_ / name).string());
  }

  void write_json(const std::string& name, const ojson& j) { write(name, j.dump(2) + "\n"); }

  const std::vector<std::string>& files() const { return files_; }
  const fs::path& dir() const { return dir_; }

 private:
  fs::path dir_;
  std::vector<std::string> files_;
};

EmotionalityMode mode_of(const Options& o) {
  auto m = parse_mode(o.mode);
  if (!m) throw UsageError("--mode must be prob or argmax");
  return *m;
}

BootstrapOptions bootstrap_of(const Options& o) {
  BootstrapOptions b;
  b.n_boot = o.n_boot;
  b.level = o.level;
  b.seed = o.seed;
  b.threads = o.threads;
  return b;
}

Corpus load(const Options& o, bool layers = false) {
  if (o.utterances.empty() || o.films.empty()) throw UsageError("--utterances and --films are required");
  ParseOptions po;
  po.load_layer_embeddings = layers;
  return parse_corpus(o.utterances, o.films, po);
}

struct Clustering {
  SimilarityGraph graph;
  Partition partition;
  std::vector<PhraseGroup> groups;
};

Clustering cluster_corpus(const Corpus& corpus, const Options& o, std::size_t min_count) {
  Clustering c;
  const auto te = collect_text_embeddings(corpus);
  KnnOptions knn;
  knn.k = o.k;
  knn.tau = o.tau;
  knn.threads = o.threads;
  c.graph = build_knn_graph(te.texts, te.embeddings, knn);
  LeidenOptions lo;
  lo.resolution = o.resolution;
  lo.seed = o.seed;
  lo.restarts = o.restarts;
  c.partition = leiden_partition(c.graph, lo);
  c.groups = make_phrase_groups(corpus, c.graph, c.partition, min_count);
  return c;
}

ojson cluster_params(const Options& o) {
  return ojson{{"k", o.k}, {"tau", o.tau}, {"resolution", o.resolution}, {"restarts", o.restarts},
               {"seed", o.seed}};
}

std::vector<std::string> range_header() {
  std::vector<std::string> h = {"rank", "subject_id", "label", "n", "n_films", "entropy",
                                "ci_lo", "ci_hi", "alpha0"};
  for (auto e : kAllEmotions) h.push_back("alpha_" + std::string(emotion_name(e)));
  h.push_back("converged");
  h.push_back("iterations");
  return h;
}

void range_row(Csv& csv, std::size_t rank, const RangeReport& r, const std::string& label,
               std::optional<std::size_t> n_films, bool has_params) {
  std::vector<std::string> row = {num(rank), r.subject_id, label, num(r.n),
                                  n_films ? num(*n_films) : "", num(r.entropy),
                                  r.ci ? num(r.ci->lo) : "", r.ci ? num(r.ci->hi) : ""};
  if (has_params) {
    row.push_back(num(r.params.alpha0));
    for (double a : r.params.alpha) row.push_back(num(a));
    row.push_back(r.params.converged ? "true" : "false");
    row.push_back(num(static_cast<std::size_t>(r.params.iterations)));
  } else {
    row.insert(row.end(), kNumEmotions + 3, "");
  }
  csv.row(row);
}

ojson cmd_ingest(const Options& o, OutputDir& out) {
  Corpus corpus = load(o, false);
  if (o.trim) corpus = trim_credits(corpus);
  if (o.conversation_gap) corpus = group_conversations(corpus, *o.conversation_gap);
  write_utterances_jsonl(corpus, out.path("utterances.jsonl"));
  write_films_jsonl(corpus, out.path("films.jsonl"));

  std::map<std::string, std::size_t> genres;
  std::size_t films_without = 0;
  const auto ranges = corpus.film_ranges();
  for (const auto& [id, film] : corpus.films) {
    for (const auto& g : film.genres) ++genres[g];
    if (!ranges.contains(id)) ++films_without;
  }
  ojson summary{{"n_films", corpus.films.size()},
                {"n_utterances", corpus.utterances.size()},
                {"n_films_without_utterances", films_without},
                {"years", corpus_years(corpus)},
                {"genres", genres}};
  out.write_json("ingest_summary.json", summary);
  return summary;
}

ojson cmd_cluster(const Options& o, OutputDir& out) {
  const Corpus corpus = load(o);
  const auto c = cluster_corpus(corpus, o, o.min_count);

  Csv groups({"group_id", "representative", "count", "n_texts"});
  Csv members({"group_id", "text"});
  for (const auto& g : c.groups) {
    groups.row({num(g.group_id), g.representative, num(g.count), num(g.member_texts.size())});
    for (const auto& t : g.member_texts) members.row({num(g.group_id), t});
  }
  out.write("phrase_groups.csv", groups.text());
  out.write("phrase_members.csv", members.text());

  ojson trace = ojson::array();
  for (double q : c.partition.quality_trace) trace.push_back(q);
  ojson report{{"params", cluster_params(o)},
               {"min_count", o.min_count},
               {"n_texts", c.graph.node_count()},
               {"n_edges", c.graph.edges.size()},
               {"n_communities", c.partition.community_count},
               {"n_groups", c.groups.size()},
               {"modularity", c.partition.quality},
               {"quality_trace", trace}};
  out.write_json("cluster.json", report);
  return report;
}

ojson cmd_range(const Options& o, OutputDir& out) {
  const Corpus corpus = load(o);
  DirichletFitOptions fit;
  fit.epsilon = o.epsilon;
  const auto boot = bootstrap_of(o);
  std::optional<BootstrapOptions> sub_boot;
  if (boot.n_boot > 0) sub_boot = boot;

  Csv csv(range_header());
  Csv skipped({"subject_id", "count", "reason"});
  ojson meta{{"by", o.by}, {"epsilon", o.epsilon}, {"n_boot", o.n_boot}, {"seed", o.seed}};

  auto emit_subjects = [&](const SubjectRangeResult& res, const std::map<std::string, std::string>& labels) {
    std::size_t rank = 1;
    for (const auto& r : res.reports) range_row(csv, rank++, r, labels.at(r.subject_id), std::nullopt, true);
    for (const auto& s : res.skipped) skipped.row({s.subject_id, num(s.count), s.reason});
    meta["n_reported"] = res.reports.size();
    meta["n_skipped"] = res.skipped.size();
  };

  if (o.by == "phrase") {
    const auto c = cluster_corpus(corpus, o, 1);
    std::unordered_map<std::string, const UtteranceRecord*> by_id;
    for (const auto& u : corpus.utterances) by_id.emplace(u.utt_id, &u);
    std::vector<RangeSubject> subjects;
    std::map<std::string, std::string> labels;
    for (const auto& g : c.groups) {
      RangeSubject s;
      s.subject_id = "group" + std::to_string(g.group_id);
      for (const auto& id : g.utterance_ids) s.dists.push_back(by_id.at(id)->emotion);
      labels[s.subject_id] = g.representative;
      subjects.push_back(std::move(s));
    }
    emit_subjects(subject_ranges(subjects, o.min_count, fit, sub_boot), labels);
    meta["min_count"] = o.min_count;
    meta["cluster"] = cluster_params(o);
  } else if (o.by == "film") {
    std::vector<RangeSubject> subjects;
    std::map<std::string, std::string> labels;
    for (const auto& [id, range] : corpus.film_ranges()) {
      RangeSubject s;
      s.subject_id = id;
      for (std::size_t i = range.first; i < range.second; ++i) s.dists.push_back(corpus.utterances[i].emotion);
      labels[id] = corpus.film(id).title;
      subjects.push_back(std::move(s));
    }
    emit_subjects(subject_ranges(subjects, o.min_count, fit, sub_boot), labels);
    meta["min_count"] = o.min_count;
  } else {
    GenreRangeOptions go;
    go.min_films = o.min_films;
    go.fit = fit;
    go.bootstrap = boot;
    if (o.aggregation == "pooled") {
      go.aggregation = GenreAggregation::pooled;
    } else if (o.aggregation == "film_mean") {
      go.aggregation = GenreAggregation::film_mean;
    } else {
      throw UsageError("--aggregation must be pooled or film_mean");
    }
    const auto res = genre_emotional_range(corpus, go);
    std::size_t rank = 1;
    for (const auto& g : res.genres) {
      range_row(csv, rank++, g.report, g.report.subject_id, g.n_films,
                go.aggregation == GenreAggregation::pooled);
    }
    for (const auto& s : res.skipped) skipped.row({s.subject_id, num(s.count), s.reason});
    meta["min_films"] = o.min_films;
    meta["aggregation"] = o.aggregation;
    meta["n_reported"] = res.genres.size();
    meta["n_skipped"] = res.skipped.size();
  }
  out.write("range_report.csv", csv.text());
  out.write("range_skipped.csv", skipped.text());
  return meta;
}

ojson cmd_trajectory(const Options& o, OutputDir& out) {
  const Corpus corpus = load(o);
  TrajectoryOptions to;
  to.mode = mode_of(o);
  to.n_bins = o.bins;
  to.bootstrap = bootstrap_of(o);
  TrajectoryReport rep;
  if (o.measure == "emotionality") {
    rep = emotionality_trajectory(corpus, to);
  } else {
    const auto label = parse_emotion(std::string_view(o.measure).substr(8));
    rep = emotion_proportion_trajectory(corpus, *label, to);
  }
  const std::string mode(to_string(rep.mode));
  Csv csv({"bin_index", "bin_lo_pct", "bin_hi_pct", "point", "ci_lo", "ci_hi", "n_utts", "measure", "mode"});
  std::string dat = "# measure=" + rep.measure + " mode=" + mode + "\n# bin_mid_pct point ci_lo ci_hi n_utts\n";
  for (const auto& b : rep.bins) {
    csv.row({num(b.index), num(b.lo_pct), num(b.hi_pct), num(b.point), b.ci ? num(b.ci->lo) : "",
             b.ci ? num(b.ci->hi) : "", num(b.n_utts), rep.measure, mode});
    auto dat_num = [](const std::string& s) { return s.empty() ? std::string("NaN") : s; };
    dat += num(0.5 * (b.lo_pct + b.hi_pct)) + " " + dat_num(num(b.point)) + " " +
           dat_num(b.ci ? num(b.ci->lo) : "") + " " + dat_num(b.ci ? num(b.ci->hi) : "") + " " +
           num(b.n_utts) + "\n";
  }
  out.write("trajectory.csv", csv.text());
  out.write("trajectory.dat", dat);
  return ojson{{"measure", rep.measure},
               {"mode", mode},
               {"n_bins", rep.n_bins},
               {"n_excluded_past_runtime", rep.n_excluded},
               {"n_not_applicable", rep.n_not_applicable}};
}

ojson cmd_diachronic(const Options& o, OutputDir& out) {
  const Corpus corpus = load(o);
  const auto rep = yearly_emotionality(corpus, mode_of(o), bootstrap_of(o));
  Csv csv({"year", "point", "ci_lo", "ci_hi", "n_utts", "n_films", "mode"});
  for (const auto& r : rep.rows) {
    csv.row({std::to_string(r.year), num(r.point), num(r.ci.lo), num(r.ci.hi), num(r.n_utts),
             num(r.n_films), std::string(to_string(rep.mode))});
  }
  out.write("diachronic.csv", csv.text());
  return ojson{{"mode", to_string(rep.mode)}, {"years_without_utterances", rep.empty_years}};
}

ojson cmd_regress(const Options& o, OutputDir& out) {
  const Corpus corpus = load(o);
  const auto mode = mode_of(o);
  const auto c = cluster_corpus(corpus, o, o.min_count);
  const auto ubiquitous = select_ubiquitous_groups(corpus, c.groups);
  const auto panel = build_panel(corpus, ubiquitous, mode);
  const auto r = fixed_effects_ols(panel);

  Csv groups({"group_id", "representative", "count"});
  for (const auto& g : ubiquitous) groups.row({num(g.group_id), g.representative, num(g.count)});
  out.write("ubiquitous_groups.csv", groups.text());

  Csv csv({"beta", "se", "r2", "f_stat", "df1", "df2", "p_value", "n_obs", "n_groups", "mode"});
  csv.row({num(r.beta), num(r.se), num(r.r2), num(r.f_stat), num(r.df1), num(r.df2), num(r.p_value),
           num(r.n_obs), num(r.n_groups), std::string(to_string(mode))});
  out.write("fe_regression.csv", csv.text());

  ojson report{{"beta", r.beta},
               {"se", r.se},
               {"r2", r.r2},
               {"f_stat", json_number(r.f_stat)},
               {"df1", r.df1},
               {"df2", r.df2},
               {"p_value", r.p_value},
               {"n_obs", r.n_obs},
               {"n_groups", r.n_groups},
               {"mode", to_string(mode)},
               {"selection",
                {{"min_count", o.min_count},
                 {"rule", "group has utterances in every release year of the corpus"},
                 {"years", corpus_years(corpus)},
                 {"n_candidate_groups", c.groups.size()}}},
               {"cluster", cluster_params(o)},
               {"seed", o.seed}};
  out.write_json("fe_regression.json", report);
  return ojson{{"n_groups", r.n_groups}, {"n_obs", r.n_obs}};
}

Emotion label_or_throw(const nlohmann::json& v, const std::string& where) {
  if (!v.is_string()) throw ValidationError(where + ": label must be a string");
  auto e = parse_emotion(v.get<std::string>());
  if (!e) throw ValidationError(where + ": unknown label '" + v.get<std::string>() + "'");
  return *e;
}

ojson cmd_eval(const Options& o, OutputDir& out) {
  if (o.predictions.empty() && o.annotations.empty()) {
    throw UsageError("eval needs --predictions and/or --annotations");
  }
  ojson meta;
  if (!o.predictions.empty()) {
    std::ifstream f(o.predictions);
    if (!f) throw ValidationError("cannot open " + o.predictions);
    std::vector<Emotion> gold, pred;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(f, line)) {
      ++lineno;
      if (trim(line).empty()) continue;
      const std::string where = o.predictions + ":" + std::to_string(lineno);
      nlohmann::json j;
      try {
        j = nlohmann::json::parse(line);
      } catch (const nlohmann::json::exception& e) {
        throw ValidationError(where + ": " + e.what());
      }
      if (!j.is_object() || !j.contains("gold") || !j.contains("pred")) {
        throw ValidationError(where + ": expected an object with gold and pred");
      }
      gold.push_back(label_or_throw(j["gold"], where));
      const auto& p = j["pred"];
      if (p.is_array()) {
        std::vector<double> probs;
        for (const auto& x : p) {
          if (!x.is_number()) throw ValidationError(where + ": pred probabilities must be numbers");
          probs.push_back(x.get<double>());
        }
        if (probs.size() != kNumEmotions) throw ValidationError(where + ": pred needs 7 probabilities");
        pred.push_back(EmotionDistribution::from_probs(probs).argmax());
      } else {
        pred.push_back(label_or_throw(p, where));
      }
    }
    const auto r = classification_report(gold, pred, bootstrap_of(o));
    Csv per_class({"label", "precision", "recall", "f1", "support"});
    Csv confusion([] {
      std::vector<std::string> h = {"gold"};
      for (auto e : kAllEmotions) h.push_back(std::string(emotion_name(e)));
      return h;
    }());
    for (auto e : kAllEmotions) {
      const auto& m = r.per_class[index_of(e)];
      per_class.row({std::string(emotion_name(e)), num(m.precision), num(m.recall), num(m.f1), num(m.support)});
      std::vector<std::string> row = {std::string(emotion_name(e))};
      for (auto c : r.confusion[index_of(e)]) row.push_back(num(c));
      confusion.row(row);
    }
    out.write("per_class.csv", per_class.text());
    out.write("confusion.csv", confusion.text());
    ojson report{{"n", r.n},
                 {"accuracy", r.accuracy},
                 {"accuracy_ci", ci_json(r.accuracy_ci)},
                 {"weighted_f1", r.weighted_f1},
                 {"weighted_f1_ci", ci_json(r.f1_ci)}};
    out.write_json("eval_report.json", report);
    meta["classification"] = report;
  }
  if (!o.annotations.empty()) {
    // unit,coder,label rows; an empty label is a missing coding
    std::ifstream f(o.annotations);
    if (!f) throw ValidationError("cannot open " + o.annotations);
    std::map<std::string, std::map<std::string, std::optional<int>>> table;
    std::set<std::string> coders;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(f, line)) {
      ++lineno;
      if (trim(line).empty() || (lineno == 1 && line.rfind("unit", 0) == 0)) continue;
      std::vector<std::string> cells;
      std::stringstream ss(line);
      std::string cell;
      while (std::getline(ss, cell, ',')) cells.push_back(trim(cell));
      if (line.back() == ',') cells.emplace_back();
      if (cells.size() != 3) {
        throw ValidationError(o.annotations + ":" + std::to_string(lineno) + ": expected unit,coder,label");
      }
      std::optional<int> v;
      if (!cells[2].empty()) {
        auto e = parse_emotion(cells[2]);
        if (!e) throw ValidationError(o.annotations + ":" + std::to_string(lineno) + ": unknown label '" + cells[2] + "'");
        v = static_cast<int>(index_of(*e));
      }
      table[cells[0]][cells[1]] = v;
      coders.insert(cells[1]);
    }
    std::vector<std::vector<std::optional<int>>> units;
    std::vector<std::vector<std::size_t>> counts;
    std::optional<std::size_t> raters;
    bool constant_raters = true;
    for (const auto& [unit, row] : table) {
      std::vector<std::optional<int>> codes;
      std::vector<std::size_t> c(kNumEmotions, 0);
      std::size_t m = 0;
      for (const auto& coder : coders) {
        auto it = row.find(coder);
        codes.push_back(it == row.end() ? std::nullopt : it->second);
        if (codes.back()) {
          ++c[static_cast<std::size_t>(*codes.back())];
          ++m;
        }
      }
      if (!raters) raters = m;
      constant_raters = constant_raters && *raters == m;
      units.push_back(std::move(codes));
      counts.push_back(std::move(c));
    }
    ojson agreement{{"n_units", units.size()}, {"n_coders", coders.size()}};
    agreement["krippendorff_alpha"] = krippendorff_alpha(units);
    if (constant_raters && raters && *raters >= 2) {
      agreement["fleiss_kappa"] = fleiss_kappa(counts, *raters);
    } else {
      agreement["fleiss_kappa"] = nullptr;
      agreement["fleiss_kappa_note"] = "needs the same number (>= 2) of codings on every unit";
    }
    out.write_json("agreement.json", agreement);
    meta["agreement"] = agreement;
  }
  return meta;
}

ojson cmd_head_predict(const Options& o, OutputDir& out) {
  const auto params = read_head_weights(o.weights);
  std::vector<std::pair<std::string, EmotionDistribution>> preds;
  if (!o.layers.empty()) {
    for (const auto& p : o.layers) {
      std::ifstream f(p, std::ios::binary);
      if (!f) throw ValidationError("cannot open " + p);
      const std::string bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
      if (bytes.size() != 4 * params.n_layers * params.dim) {
        throw ShapeError(p + ": " + std::to_string(bytes.size()) + " bytes, expected " +
                         std::to_string(4 * params.n_layers * params.dim) + " (" +
                         std::to_string(params.n_layers) + "x" + std::to_string(params.dim) + " float32)");
      }
      std::vector<float> values(params.n_layers * params.dim);
      for (std::size_t i = 0; i < values.size(); ++i) {
        std::uint32_t w = 0;
        for (int b = 0; b < 4; ++b) w |= static_cast<std::uint32_t>(static_cast<unsigned char>(bytes[4 * i + b])) << (8 * b);
        values[i] = std::bit_cast<float>(w);
      }
      preds.emplace_back(fs::path(p).filename().string(), ser_head_forward(values, params));
    }
  } else {
    const Corpus corpus = load(o, true);
    std::vector<std::string> missing;
    for (const auto& u : corpus.utterances) {
      if (!u.layer_embeddings) {
        missing.push_back(u.utt_id);
        continue;
      }
      preds.emplace_back(u.utt_id, ser_head_forward(*u.layer_embeddings, params));
    }
    if (!missing.empty()) {
      std::string list;
      for (std::size_t i = 0; i < missing.size() && i < 10; ++i) list += (i ? ", " : "") + missing[i];
      if (missing.size() > 10) list += ", ...";
      throw ValidationError(std::to_string(missing.size()) + " utterances have no layer embeddings: " + list);
    }
  }
  std::vector<std::string> header = {"id"};
  for (auto e : kAllEmotions) header.push_back(std::string(emotion_name(e)));
  header.push_back("argmax");
  Csv csv(header);
  std::string jsonl;
  for (const auto& [id, d] : preds) {
    std::vector<std::string> row = {id};
    for (double p : d.probs()) row.push_back(num(p));
    row.push_back(std::string(emotion_name(d.argmax())));
    csv.row(row);
    jsonl += ojson{{"id", id}, {"emotion_probs", d.probs()}}.dump() + "\n";
  }
  out.write("predictions.csv", csv.text());
  out.write("predictions.jsonl", jsonl);
  return ojson{{"n_predictions", preds.size()},
               {"head", {{"version", params.version}, {"hidden", params.hidden},
                         {"n_layers", params.n_layers}, {"dim", params.dim}}}};
}

ojson cmd_synthgen(const Options& o, OutputDir& out) {
  SynthSpec spec;
  spec.n_films = o.n_films;
  spec.utterances_per_film = o.per_film;
  spec.n_bins = o.bins;
  if (!o.years.empty()) spec.years = o.years;
  spec.neutral_by_bin.resize(spec.n_bins);
  for (std::size_t b = 0; b < spec.n_bins; ++b) {
    const double t = spec.n_bins > 1 ? static_cast<double>(b) / static_cast<double>(spec.n_bins - 1) : 0.0;
    spec.neutral_by_bin[b] = o.neutral_start + t * (o.neutral_end - o.neutral_start);
  }
  if (o.year_trend != 0.0) {
    const int y0 = *std::min_element(spec.years.begin(), spec.years.end());
    for (int y : spec.years) spec.emotionality_by_year.push_back(o.year_trend * (y - y0));
  }
  spec.anger_peak_bin = o.anger_peak_bin;
  spec.anger_peak_share = o.anger_peak_share;
  spec.concentration = o.concentration;
  if (!o.genres.empty()) spec.genres = o.genres;
  spec.genre_concentration = o.genre_concentration;
  spec.n_phrase_families = o.families;
  spec.variants_per_family = o.variants;
  spec.embedding_dim = o.embedding_dim;
  spec.seed = o.seed;
  const auto corpus = synth_corpus(spec);
  write_utterances_jsonl(corpus, out.path("utterances.jsonl"));
  write_films_jsonl(corpus, out.path("films.jsonl"));
  return ojson{{"n_films", corpus.films.size()}, {"n_utterances", corpus.utterances.size()}};
}

void add_common(CLI::App* sub, Options& o, bool corpus_inputs) {
  if (corpus_inputs) {
    sub->add_option("--utterances", o.utterances, "Utterances JSONL");
    sub->add_option("--films", o.films, "Films JSONL");
  }
  sub->add_option("--out", o.out_dir, "Output directory")->required();
  sub->add_option("--seed", o.seed, "Random seed (fallback: SCREENLAB_SEED)");
  sub->add_option("--threads", o.threads, "Worker threads (0 = all cores)")->capture_default_str();
  sub->add_option("--config", o.config, "Flat key=value file with option defaults");
}

void add_mode(CLI::App* sub, Options& o) {
  sub->add_option("--mode", o.mode, "Emotionality: prob or argmax")
      ->check(CLI::IsMember({"prob", "argmax"}))
      ->capture_default_str();
}

void add_bootstrap(CLI::App* sub, Options& o) {
  sub->add_option("--n-boot", o.n_boot, "Bootstrap replicates (0 = no CIs)")->capture_default_str();
  sub->add_option("--level", o.level, "CI level")->check(CLI::Range(0.5, 0.999))->capture_default_str();
}

void add_cluster(CLI::App* sub, Options& o) {
  sub->add_option("--k", o.k, "Neighbours per text")->check(CLI::PositiveNumber)->capture_default_str();
  sub->add_option("--tau", o.tau, "Minimum cosine similarity")->check(CLI::Range(-1.0, 1.0))->capture_default_str();
  sub->add_option("--resolution", o.resolution, "Modularity resolution")->check(CLI::PositiveNumber)->capture_default_str();
  sub->add_option("--restarts", o.restarts, "Independent Leiden runs; the best is kept")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
}

bool has_flag(const std::vector<std::string>& args, const std::string& name) {
  for (const auto& a : args) {
    if (a == name || a.rfind(name + "=", 0) == 0) return true;
  }
  return false;
}

std::string option_value(const std::vector<std::string>& args, const std::string& name) {
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (args[i] == name && i + 1 < args.size()) return args[i + 1];
    if (args[i].rfind(name + "=", 0) == 0) return args[i].substr(name.size() + 1);
  }
  return {};
}

ojson effective_config(const CLI::App* sub) {
  ojson cfg = ojson::object();
  for (const auto* opt : sub->get_options()) {
    const auto& name = opt->get_single_name();
    if (name.empty() || name == "help" || name == "config") continue;
    const auto& res = opt->results();
    if (!res.empty()) {
      if (res.size() == 1) {
        cfg[name] = res.front();
      } else {
        cfg[name] = res;
      }
    } else if (!opt->get_default_str().empty()) {
      cfg[name] = opt->get_default_str();
    }
  }
  return cfg;
}

}  // namespace

int run(const std::vector<std::string>& raw_args, std::ostream& out, std::ostream& err) {
  Options o;
  CLI::App app{"screenlab: corpus analytics for emotion in film dialogue", "screenlab"};
  app.set_version_flag("--version", SCREENLAB_VERSION);
  app.require_subcommand(1);

  auto* ingest = app.add_subcommand("ingest", "Validate a corpus and write it in canonical form");
  add_common(ingest, o, true);
  ingest->add_option("--conversation-gap", o.conversation_gap, "Assign conversation ids with this gap (s)");
  ingest->add_flag("--trim-credits", o.trim, "Drop utterances inside the credits");

  auto* cluster = app.add_subcommand("cluster", "Group utterance texts into phrase groups");
  add_common(cluster, o, true);
  add_cluster(cluster, o);
  cluster->add_option("--min-count", o.min_count, "Minimum utterances per group")->capture_default_str();

  auto* range = app.add_subcommand("range", "Emotional range (Dirichlet entropy) per subject");
  add_common(range, o, true);
  add_cluster(range, o);
  add_bootstrap(range, o);
  range->add_option("--by", o.by, "phrase, genre or film")
      ->check(CLI::IsMember({"phrase", "genre", "film"}))
      ->capture_default_str();
  range->add_option("--min-count", o.min_count, "Minimum utterances per phrase group or film")->capture_default_str();
  range->add_option("--min-films", o.min_films, "Minimum films per genre")->capture_default_str();
  range->add_option("--aggregation", o.aggregation, "Genre scoring: pooled or film_mean")
      ->check(CLI::IsMember({"pooled", "film_mean"}))
      ->capture_default_str();
  range->add_option("--epsilon", o.epsilon, "Probability floor before fitting")->capture_default_str();

  auto* trajectory = app.add_subcommand("trajectory", "Per-bin measure over narrative time");
  add_common(trajectory, o, true);
  add_mode(trajectory, o);
  add_bootstrap(trajectory, o);
  trajectory->add_option("--measure", o.measure, "emotionality or emotion:<label>")
      ->check([](const std::string& m) -> std::string {
        if (m == "emotionality") return {};
        if (m.rfind("emotion:", 0) == 0) {
          auto e = parse_emotion(std::string_view(m).substr(8));
          if (e && *e != Emotion::neutral) return {};
        }
        return "measure must be emotionality or emotion:<non-neutral label>";
      })
      ->capture_default_str();
  trajectory->add_option("--bins", o.bins, "Narrative-time bins")->check(CLI::PositiveNumber)->capture_default_str();

  auto* diachronic = app.add_subcommand("diachronic", "Mean emotionality per release year");
  add_common(diachronic, o, true);
  add_mode(diachronic, o);
  add_bootstrap(diachronic, o);

  auto* regress = app.add_subcommand("regress", "Fixed-effects regression of emotionality on year");
  add_common(regress, o, true);
  add_mode(regress, o);
  add_cluster(regress, o);
  regress->add_option("--min-count", o.min_count, "Minimum utterances per phrase group")->capture_default_str();

  auto* eval = app.add_subcommand("eval", "Classification metrics and annotator agreement");
  add_common(eval, o, false);
  add_bootstrap(eval, o);
  eval->add_option("--predictions", o.predictions, "JSONL lines {\"gold\": label, \"pred\": label or probs}");
  eval->add_option("--annotations", o.annotations, "CSV unit,coder,label");

  auto* head = app.add_subcommand("head-predict", "Run the utterance emotion head on layer embeddings");
  add_common(head, o, true);
  head->add_option("--weights", o.weights, "Head weight file")->required();
  head->add_option("--layers", o.layers, "Raw 25x768 float32 sidecar files (instead of a corpus)");

  auto* synth = app.add_subcommand("synthgen", "Write a synthetic corpus");
  add_common(synth, o, false);
  synth->add_option("--n-films", o.n_films)->capture_default_str();
  synth->add_option("--utterances-per-film", o.per_film)->capture_default_str();
  synth->add_option("--bins", o.bins)->check(CLI::PositiveNumber)->capture_default_str();
  synth->add_option("--years", o.years, "Release years, assigned cyclically")->delimiter(',');
  synth->add_option("--neutral-start", o.neutral_start, "Expected P(neutral) in the first bin")->capture_default_str();
  synth->add_option("--neutral-end", o.neutral_end, "Expected P(neutral) in the last bin")->capture_default_str();
  synth->add_option("--year-trend", o.year_trend, "Emotionality change per year")->capture_default_str();
  synth->add_option("--anger-peak-bin", o.anger_peak_bin);
  synth->add_option("--anger-peak-share", o.anger_peak_share)->capture_default_str();
  synth->add_option("--concentration", o.concentration)->capture_default_str();
  synth->add_option("--genres", o.genres)->delimiter(',');
  synth->add_option("--genre-concentration", o.genre_concentration)->delimiter(',');
  synth->add_option("--families", o.families, "Phrase families")->capture_default_str();
  synth->add_option("--variants", o.variants, "Spellings per phrase family")->capture_default_str();
  synth->add_option("--embedding-dim", o.embedding_dim)->capture_default_str();

  std::vector<std::string> args = raw_args;
  try {
    // config values fill in options the command line left out
    const std::string config_path = option_value(args, "--config");
    if (!config_path.empty() && !args.empty()) {
      CLI::App* sub = nullptr;
      for (auto* s : app.get_subcommands({})) {
        if (s->get_name() == args.front()) sub = s;
      }
      if (sub) {
        for (const auto& [key, value] : read_config(config_path)) {
          const std::string flag = "--" + key;
          if (has_flag(args, flag) || sub->get_option_no_throw(flag) == nullptr) continue;
          args.push_back(flag + "=" + value);
        }
      }
    }
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  }

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(std::move(reversed));
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForVersion& e) {
    out << SCREENLAB_VERSION << "\n";
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n";
    const auto subs = app.get_subcommands();
    err << (subs.empty() ? app.help() : subs.front()->help());
    return kExitUsage;
  }

  CLI::App* sub = app.get_subcommands().front();
  const std::string name = sub->get_name();
  std::optional<std::uint64_t> env_seed;
  if (sub->count("--seed") == 0) {
    if (const char* s = std::getenv("SCREENLAB_SEED"); s && *s) {
      std::uint64_t v = 0;
      const auto* end = s + std::strlen(s);
      auto res = std::from_chars(s, end, v);
      if (res.ec != std::errc() || res.ptr != end) {
        err << "error: SCREENLAB_SEED must be an unsigned integer\n";
        return kExitUsage;
      }
      o.seed = v;
      env_seed = v;
    }
  }

  try {
    OutputDir dir(o.out_dir);
    ojson summary;
    if (name == "ingest") summary = cmd_ingest(o, dir);
    else if (name == "cluster") summary = cmd_cluster(o, dir);
    else if (name == "range") summary = cmd_range(o, dir);
    else if (name == "trajectory") summary = cmd_trajectory(o, dir);
    else if (name == "diachronic") summary = cmd_diachronic(o, dir);
    else if (name == "regress") summary = cmd_regress(o, dir);
    else if (name == "eval") summary = cmd_eval(o, dir);
    else if (name == "head-predict") summary = cmd_head_predict(o, dir);
    else if (name == "synthgen") summary = cmd_synthgen(o, dir);

    ojson inputs = ojson::object();
    for (const auto& p : {o.utterances, o.films, o.predictions, o.annotations, o.weights, o.config}) {
      if (!p.empty()) inputs[p] = file_digest(p);
    }
    for (const auto& p : o.layers) inputs[p] = file_digest(p);
    auto config = effective_config(sub);
    if (env_seed) config["seed"] = std::to_string(*env_seed);
    ojson manifest{{"tool", "screenlab"},
                   {"version", SCREENLAB_VERSION},
                   {"command", name},
                   {"argv", raw_args},
                   {"config", config},
                   {"seed", o.seed},
                   {"inputs", inputs},
                   {"outputs", dir.files()},
                   {"summary", summary},
                   {"timestamp", timestamp()}};
    std::ofstream mf(dir.dir() / "manifest.json");
    mf << manifest.dump(2) << "\n";
    if (!mf) throw Error("cannot write manifest");
    out << name << ": wrote " << dir.files().size() << " files to " << o.out_dir << "\n";
    return kExitOk;
  } catch (const UsageError& e) {
    err << "error: " << e.what() << "\n\n" << sub->help();
    return kExitUsage;
  } catch (const CorpusError& e) {
    for (const auto& d : e.diagnostics()) {
      err << d.file;
      if (d.line > 0) err << ":" << d.line;
      err << ": " << to_string(d.kind) << " error: " << d.message << "\n";
    }
    err << e.diagnostics().size() << " problem(s) found\n";
    return kExitValidation;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kExitValidation;
  }
}

int run(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return run(args, std::cout, std::cerr);
}

}  // namespace screenlab::cli
