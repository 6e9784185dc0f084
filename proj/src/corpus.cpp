#include "screenlab/corpus.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include <json.hpp>

#include "screenlab/error.hpp"

namespace screenlab {

namespace {

using nlohmann::json;
namespace fs = std::filesystem;

constexpr std::array<std::string_view, kNumEmotions> kEmotionNames = {
    "anger", "disgust", "fear", "joy", "neutral", "sadness", "surprise"};

// Renormalization is skipped once the sum is this close to 1, which makes
// parse -> write -> parse bit-exact.
constexpr double kExactSumSlack = 1e-12;

/// Collects per-line problems for one input file.
class DiagnosticSink {
 public:
  explicit DiagnosticSink(std::vector<Diagnostic>& out) : out_(out) {}

  void add(DiagnosticKind kind, const std::string& file, std::size_t line, std::string message) {
    out_.push_back({kind, file, line, std::move(message)});
  }

 private:
  std::vector<Diagnostic>& out_;
};

std::string field_error(const char* key, const char* expected) {
  return std::string("field '") + key + "' must be " + expected;
}

const json* find_field(const json& obj, const char* key) {
  auto it = obj.find(key);
  return it == obj.end() ? nullptr : &*it;
}

std::optional<std::string> get_string(const json& obj, const char* key, std::string& error,
                                      bool required = true) {
  const json* v = find_field(obj, key);
  if (v == nullptr || v->is_null()) {
    if (required) error = std::string("missing field '") + key + "'";
    return std::nullopt;
  }
  if (!v->is_string()) {
    error = field_error(key, "a string");
    return std::nullopt;
  }
  return v->get<std::string>();
}

std::optional<double> get_number(const json& obj, const char* key, std::string& error,
                                 bool required = true) {
  const json* v = find_field(obj, key);
  if (v == nullptr || v->is_null()) {
    if (required) error = std::string("missing field '") + key + "'";
    return std::nullopt;
  }
  if (!v->is_number()) {
    error = field_error(key, "a number");
    return std::nullopt;
  }
  const double d = v->get<double>();
  if (!std::isfinite(d)) {
    error = field_error(key, "finite");
    return std::nullopt;
  }
  return d;
}

std::optional<std::vector<double>> get_number_array(const json& obj, const char* key,
                                                    std::string& error, bool required = true) {
  const json* v = find_field(obj, key);
  if (v == nullptr || v->is_null()) {
    if (required) error = std::string("missing field '") + key + "'";
    return std::nullopt;
  }
  if (!v->is_array()) {
    error = field_error(key, "an array of numbers");
    return std::nullopt;
  }
  std::vector<double> out;
  out.reserve(v->size());
  for (const auto& x : *v) {
    if (!x.is_number()) {
      error = field_error(key, "an array of numbers");
      return std::nullopt;
    }
    out.push_back(x.get<double>());
  }
  return out;
}

std::optional<LayerEmbeddings> read_layer_sidecar(const fs::path& path, bool load,
                                                  std::string& error) {
  constexpr std::uintmax_t expected = kLayerRows * kLayerCols * sizeof(float);
  std::error_code ec;
  const auto size = fs::file_size(path, ec);
  if (ec) {
    error = "cannot read layer embeddings sidecar '" + path.string() + "'";
    return std::nullopt;
  }
  if (size != expected) {
    std::ostringstream os;
    os << "layer embeddings sidecar '" << path.string() << "' has " << size << " bytes, expected "
       << expected << " (" << kLayerRows << "x" << kLayerCols << " float32)";
    error = os.str();
    return std::nullopt;
  }
  if (!load) return LayerEmbeddings{};
  std::ifstream in(path, std::ios::binary);
  std::vector<char> raw(expected);
  if (!in.read(raw.data(), static_cast<std::streamsize>(raw.size()))) {
    error = "short read on layer embeddings sidecar '" + path.string() + "'";
    return std::nullopt;
  }
  LayerEmbeddings emb;
  emb.values.resize(kLayerRows * kLayerCols);
  for (std::size_t i = 0; i < emb.values.size(); ++i) {
    std::uint32_t bits;
    std::memcpy(&bits, raw.data() + 4 * i, 4);
    if constexpr (std::endian::native == std::endian::big) {
      bits = ((bits & 0xffu) << 24) | ((bits & 0xff00u) << 8) | ((bits >> 8) & 0xff00u) |
             (bits >> 24);
    }
    emb.values[i] = std::bit_cast<float>(bits);
  }
  return emb;
}

struct SourcedUtterance {
  UtteranceRecord record;
  std::size_t line;
};

FilmRecord parse_film_line(const json& obj, std::string& error) {
  FilmRecord film;
  if (auto v = get_string(obj, "film_id", error)) film.film_id = *v;
  if (auto v = get_string(obj, "title", error)) film.title = *v;
  if (const json* y = find_field(obj, "year"); y == nullptr) {
    error = "missing field 'year'";
  } else if (!y->is_number_integer()) {
    error = field_error("year", "an integer");
  } else {
    film.year = y->get<int>();
  }
  if (auto v = get_number(obj, "runtime_s", error)) film.runtime_s = *v;
  if (auto v = get_number(obj, "credits_start_s", error, false)) film.credits_start_s = *v;
  if (const json* g = find_field(obj, "genres"); g == nullptr) {
    error = "missing field 'genres'";
  } else if (!g->is_array()) {
    error = field_error("genres", "an array of strings");
  } else {
    for (const auto& x : *g) {
      if (!x.is_string()) {
        error = field_error("genres", "an array of strings");
        break;
      }
      film.genres.insert(x.get<std::string>());
    }
  }
  return film;
}

std::string check_film(const FilmRecord& film) {
  if (film.film_id.empty()) return "film_id must be non-empty";
  if (!(film.runtime_s > 0.0)) return "runtime_s must be > 0";
  if (film.credits_start_s &&
      !(*film.credits_start_s > 0.0 && *film.credits_start_s <= film.runtime_s)) {
    return "credits_start_s must satisfy 0 < credits_start_s <= runtime_s";
  }
  return {};
}

std::string check_utterance(const UtteranceRecord& u, const FilmRecord& film) {
  if (u.utt_id.empty()) return "utt_id must be non-empty";
  if (!(u.start_s >= 0.0)) return "start_s must be >= 0";
  if (!(u.end_s > u.start_s)) return "end_s must be greater than start_s";
  if (u.end_s > film.runtime_s) {
    std::ostringstream os;
    os << "end_s " << u.end_s << " exceeds runtime_s " << film.runtime_s << " of film '"
       << film.film_id << "'";
    return os.str();
  }
  if (u.layer_embeddings && u.layer_embeddings->values.size() != kLayerRows * kLayerCols &&
      !u.layer_embeddings->values.empty()) {
    return "layer embeddings must be 25x768";
  }
  return {};
}

bool utterance_less(const UtteranceRecord& a, const UtteranceRecord& b) {
  if (a.film_id != b.film_id) return a.film_id < b.film_id;
  return a.start_s < b.start_s;
}

/// Ordering, duplicate-id and embedding-dimension checks shared by the file
/// parser and validate_corpus. `lines[i]` is the source line of utterance i
/// (0 when unknown).
void check_cross_record(const std::vector<UtteranceRecord>& utts,
                        const std::vector<std::size_t>& lines, const std::string& file,
                        DiagnosticSink& sink) {
  std::unordered_map<std::string, std::size_t> seen_ids;
  std::optional<std::size_t> embedding_dim;
  for (std::size_t i = 0; i < utts.size(); ++i) {
    const auto& u = utts[i];
    if (auto [it, inserted] = seen_ids.emplace(u.utt_id, i); !inserted) {
      sink.add(DiagnosticKind::validation, file, lines[i],
               "duplicate utt_id '" + u.utt_id + "' (first seen on line " +
                   std::to_string(lines[it->second]) + ")");
    }
    if (u.sent_embedding) {
      if (u.sent_embedding->empty()) {
        sink.add(DiagnosticKind::validation, file, lines[i], "sent_embedding is empty");
      } else if (!embedding_dim) {
        embedding_dim = u.sent_embedding->size();
      } else if (*embedding_dim != u.sent_embedding->size()) {
        sink.add(DiagnosticKind::validation, file, lines[i],
                 "sent_embedding has dimension " + std::to_string(u.sent_embedding->size()) +
                     ", corpus dimension is " + std::to_string(*embedding_dim));
      }
    }
    if (i > 0 && utts[i - 1].film_id == u.film_id && !(utts[i - 1].start_s < u.start_s)) {
      std::ostringstream os;
      os << "utterance '" << u.utt_id << "' does not start strictly after '" << utts[i - 1].utt_id
         << "' (line " << lines[i - 1] << ") in film '" << u.film_id << "'";
      sink.add(DiagnosticKind::validation, file, lines[i], os.str());
    }
  }
}

std::vector<std::string> read_lines(const fs::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw CorpusError({{DiagnosticKind::parse, path.string(), 0, "cannot open file"}});
  }
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(std::move(line));
  }
  return lines;
}

bool is_blank(const std::string& s) {
  return std::all_of(s.begin(), s.end(), [](unsigned char c) { return std::isspace(c) != 0; });
}

}  // namespace

std::string_view emotion_name(Emotion e) noexcept { return kEmotionNames[index_of(e)]; }

std::optional<Emotion> parse_emotion(std::string_view name) noexcept {
  for (std::size_t i = 0; i < kNumEmotions; ++i) {
    if (kEmotionNames[i] == name) return kAllEmotions[i];
  }
  return std::nullopt;
}

EmotionDistribution::EmotionDistribution() { probs_.fill(1.0 / kNumEmotions); }

EmotionDistribution EmotionDistribution::from_probs(std::span<const double> probs,
                                                    double tolerance) {
  if (probs.size() != kNumEmotions) {
    throw ValidationError("emotion_probs must have exactly 7 entries, got " +
                          std::to_string(probs.size()));
  }
  double sum = 0.0;
  for (double p : probs) {
    if (!std::isfinite(p) || p < 0.0) {
      throw ValidationError("emotion probabilities must be finite and non-negative");
    }
    sum += p;
  }
  if (!(std::fabs(sum - 1.0) <= tolerance)) {
    std::ostringstream os;
    os.precision(10);
    os << "emotion probabilities sum to " << sum << ", outside [1-" << tolerance << ", 1+"
       << tolerance << "]";
    throw ValidationError(os.str());
  }
  EmotionDistribution d;
  std::copy(probs.begin(), probs.end(), d.probs_.begin());
  if (std::fabs(sum - 1.0) > kExactSumSlack) {
    for (double& p : d.probs_) p /= sum;
  }
  return d;
}

EmotionDistribution EmotionDistribution::one_hot(Emotion e) {
  EmotionDistribution d;
  d.probs_.fill(0.0);
  d.probs_[index_of(e)] = 1.0;
  return d;
}

Emotion EmotionDistribution::argmax() const noexcept {
  std::size_t best = 0;
  for (std::size_t i = 1; i < kNumEmotions; ++i) {
    if (probs_[i] > probs_[best]) best = i;
  }
  return kAllEmotions[best];
}

const FilmRecord& Corpus::film(const std::string& film_id) const {
  auto it = films.find(film_id);
  if (it == films.end()) throw ValidationError("unknown film_id '" + film_id + "'");
  return it->second;
}

std::map<std::string, std::pair<std::size_t, std::size_t>> Corpus::film_ranges() const {
  std::map<std::string, std::pair<std::size_t, std::size_t>> ranges;
  std::size_t i = 0;
  while (i < utterances.size()) {
    std::size_t j = i;
    while (j < utterances.size() && utterances[j].film_id == utterances[i].film_id) ++j;
    ranges[utterances[i].film_id] = {i, j};
    i = j;
  }
  return ranges;
}

Corpus parse_corpus(const fs::path& utterances_path, const fs::path& films_path,
                    const ParseOptions& options) {
  std::vector<Diagnostic> diagnostics;
  DiagnosticSink sink(diagnostics);
  Corpus corpus;

  const std::string films_file = films_path.string();
  const auto film_lines = read_lines(films_path);
  std::unordered_map<std::string, std::size_t> film_line_of;
  for (std::size_t i = 0; i < film_lines.size(); ++i) {
    const std::size_t lineno = i + 1;
    if (is_blank(film_lines[i])) continue;
    json obj;
    try {
      obj = json::parse(film_lines[i]);
    } catch (const json::parse_error& e) {
      sink.add(DiagnosticKind::parse, films_file, lineno, std::string("malformed JSON: ") + e.what());
      continue;
    }
    if (!obj.is_object()) {
      sink.add(DiagnosticKind::parse, films_file, lineno, "line is not a JSON object");
      continue;
    }
    std::string error;
    FilmRecord film = parse_film_line(obj, error);
    if (error.empty()) error = check_film(film);
    if (!error.empty()) {
      sink.add(DiagnosticKind::validation, films_file, lineno, error);
      continue;
    }
    if (auto [it, inserted] = film_line_of.emplace(film.film_id, lineno); !inserted) {
      sink.add(DiagnosticKind::validation, films_file, lineno,
               "duplicate film_id '" + film.film_id + "' (first seen on line " +
                   std::to_string(it->second) + ")");
      continue;
    }
    corpus.films.emplace(film.film_id, std::move(film));
  }

  const std::string utts_file = utterances_path.string();
  const fs::path sidecar_base = utterances_path.parent_path();
  const auto utt_lines = read_lines(utterances_path);
  std::vector<SourcedUtterance> parsed;
  parsed.reserve(utt_lines.size());
  for (std::size_t i = 0; i < utt_lines.size(); ++i) {
    const std::size_t lineno = i + 1;
    if (is_blank(utt_lines[i])) continue;
    json obj;
    try {
      obj = json::parse(utt_lines[i]);
    } catch (const json::parse_error& e) {
      sink.add(DiagnosticKind::parse, utts_file, lineno, std::string("malformed JSON: ") + e.what());
      continue;
    }
    if (!obj.is_object()) {
      sink.add(DiagnosticKind::parse, utts_file, lineno, "line is not a JSON object");
      continue;
    }
    std::string error;
    UtteranceRecord u;
    if (auto v = get_string(obj, "film_id", error)) u.film_id = *v;
    if (auto v = get_string(obj, "utt_id", error)) u.utt_id = *v;
    if (auto v = get_number(obj, "start_s", error)) u.start_s = *v;
    if (auto v = get_number(obj, "end_s", error)) u.end_s = *v;
    if (auto v = get_string(obj, "text", error)) u.text = *v;
    auto probs = get_number_array(obj, "emotion_probs", error);
    u.sent_embedding = get_number_array(obj, "sent_embedding", error, false);
    u.layer_embeddings_path = get_string(obj, "layer_embeddings_path", error, false);
    u.conversation_id = get_string(obj, "conversation_id", error, false);
    if (!error.empty()) {
      sink.add(DiagnosticKind::validation, utts_file, lineno, error);
      continue;
    }
    try {
      u.emotion = EmotionDistribution::from_probs(*probs);
    } catch (const ValidationError& e) {
      sink.add(DiagnosticKind::validation, utts_file, lineno, e.what());
      continue;
    }
    auto film_it = corpus.films.find(u.film_id);
    if (film_it == corpus.films.end()) {
      sink.add(DiagnosticKind::referential, utts_file, lineno,
               "unknown film_id '" + u.film_id + "'");
      continue;
    }
    if (u.layer_embeddings_path) {
      fs::path p(*u.layer_embeddings_path);
      if (p.is_relative()) p = sidecar_base / p;
      u.layer_embeddings = read_layer_sidecar(p, options.load_layer_embeddings, error);
      if (!error.empty()) {
        sink.add(DiagnosticKind::validation, utts_file, lineno, error);
        continue;
      }
      if (!options.load_layer_embeddings) u.layer_embeddings.reset();
    }
    if (auto problem = check_utterance(u, film_it->second); !problem.empty()) {
      sink.add(DiagnosticKind::validation, utts_file, lineno, problem);
      continue;
    }
    parsed.push_back({std::move(u), lineno});
  }

  std::stable_sort(parsed.begin(), parsed.end(),
                   [](const SourcedUtterance& a, const SourcedUtterance& b) {
                     return utterance_less(a.record, b.record);
                   });
  // Exact duplicate lines collapse to the first occurrence.
  std::vector<std::size_t> lines;
  for (auto& s : parsed) {
    bool duplicate = false;
    for (auto k = corpus.utterances.size(); k > 0; --k) {
      const auto& prev = corpus.utterances[k - 1];
      if (prev.film_id != s.record.film_id || prev.start_s != s.record.start_s) break;
      if (prev == s.record) {
        duplicate = true;
        break;
      }
    }
    if (duplicate) continue;
    corpus.utterances.push_back(std::move(s.record));
    lines.push_back(s.line);
  }
  check_cross_record(corpus.utterances, lines, utts_file, sink);

  if (!diagnostics.empty()) {
    std::stable_sort(diagnostics.begin(), diagnostics.end(),
                     [&](const Diagnostic& a, const Diagnostic& b) {
                       const bool a_films = a.file == films_file;
                       const bool b_films = b.file == films_file;
                       if (a_films != b_films) return a_films;
                       return a.line < b.line;
                     });
    throw CorpusError(std::move(diagnostics));
  }
  return corpus;
}

void validate_corpus(const Corpus& corpus) {
  std::vector<Diagnostic> diagnostics;
  DiagnosticSink sink(diagnostics);
  const std::string where = "<corpus>";
  for (const auto& [id, film] : corpus.films) {
    if (id != film.film_id) {
      sink.add(DiagnosticKind::validation, where, 0, "film keyed '" + id + "' has film_id '" +
                                                        film.film_id + "'");
    }
    if (auto problem = check_film(film); !problem.empty()) {
      sink.add(DiagnosticKind::validation, where, 0, "film '" + id + "': " + problem);
    }
  }
  std::vector<std::size_t> lines(corpus.utterances.size(), 0);
  for (std::size_t i = 0; i < corpus.utterances.size(); ++i) {
    const auto& u = corpus.utterances[i];
    auto it = corpus.films.find(u.film_id);
    if (it == corpus.films.end()) {
      sink.add(DiagnosticKind::referential, where, 0,
               "utterance '" + u.utt_id + "': unknown film_id '" + u.film_id + "'");
      continue;
    }
    if (auto problem = check_utterance(u, it->second); !problem.empty()) {
      sink.add(DiagnosticKind::validation, where, 0, "utterance '" + u.utt_id + "': " + problem);
    }
    double sum = 0.0;
    for (double p : u.emotion.probs()) {
      if (!(p >= 0.0)) sum = -1.0;
      sum += p;
    }
    if (!(std::fabs(sum - 1.0) <= 1e-6)) {
      sink.add(DiagnosticKind::validation, where, 0,
               "utterance '" + u.utt_id + "': emotion distribution is not normalized");
    }
    if (i > 0 && utterance_less(u, corpus.utterances[i - 1])) {
      sink.add(DiagnosticKind::validation, where, 0,
               "utterance '" + u.utt_id + "' is out of (film_id, start_s) order");
    }
  }
  check_cross_record(corpus.utterances, lines, where, sink);
  if (!diagnostics.empty()) throw CorpusError(std::move(diagnostics));
}

void sort_utterances(Corpus& corpus) {
  std::stable_sort(corpus.utterances.begin(), corpus.utterances.end(), utterance_less);
}

void write_utterances_jsonl(const Corpus& corpus, const fs::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write '" + path.string() + "'");
  for (const auto& u : corpus.utterances) {
    nlohmann::ordered_json obj;
    obj["film_id"] = u.film_id;
    obj["utt_id"] = u.utt_id;
    obj["start_s"] = u.start_s;
    obj["end_s"] = u.end_s;
    obj["text"] = u.text;
    obj["emotion_probs"] = u.emotion.probs();
    if (u.sent_embedding) obj["sent_embedding"] = *u.sent_embedding;
    if (u.layer_embeddings_path) obj["layer_embeddings_path"] = *u.layer_embeddings_path;
    if (u.conversation_id) obj["conversation_id"] = *u.conversation_id;
    out << obj.dump() << '\n';
  }
}

void write_films_jsonl(const Corpus& corpus, const fs::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write '" + path.string() + "'");
  for (const auto& [id, film] : corpus.films) {
    nlohmann::ordered_json obj;
    obj["film_id"] = film.film_id;
    obj["title"] = film.title;
    obj["year"] = film.year;
    obj["runtime_s"] = film.runtime_s;
    if (film.credits_start_s) obj["credits_start_s"] = *film.credits_start_s;
    obj["genres"] = film.genres;
    out << obj.dump() << '\n';
  }
}

Corpus trim_credits(const Corpus& corpus) {
  Corpus out;
  out.films = corpus.films;
  out.utterances.reserve(corpus.utterances.size());
  for (const auto& u : corpus.utterances) {
    const auto& film = corpus.film(u.film_id);
    if (film.credits_start_s && u.start_s >= *film.credits_start_s) continue;
    out.utterances.push_back(u);
  }
  return out;
}

Corpus group_conversations(const Corpus& corpus, double gap_s) {
  Corpus out = corpus;
  std::size_t index = 0;
  for (std::size_t i = 0; i < out.utterances.size(); ++i) {
    auto& u = out.utterances[i];
    if (i == 0 || out.utterances[i - 1].film_id != u.film_id) {
      index = 0;
    } else if (u.start_s - out.utterances[i - 1].end_s > gap_s) {
      ++index;
    }
    u.conversation_id = u.film_id + ":" + std::to_string(index);
  }
  return out;
}

std::string_view to_string(EmotionalityMode mode) noexcept {
  return mode == EmotionalityMode::prob ? "prob" : "argmax";
}

std::optional<EmotionalityMode> parse_mode(std::string_view s) noexcept {
  if (s == "prob") return EmotionalityMode::prob;
  if (s == "argmax") return EmotionalityMode::argmax;
  return std::nullopt;
}

double emotionality(const EmotionDistribution& e, EmotionalityMode mode) noexcept {
  if (mode == EmotionalityMode::prob) return 1.0 - e[Emotion::neutral];
  return e.argmax() == Emotion::neutral ? 0.0 : 1.0;
}

}  // namespace screenlab
