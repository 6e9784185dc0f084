#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace screenlab {

/// Emotion labels in canonical (alphabetical) order. Every serialized
/// probability vector uses this order.
enum class Emotion : std::uint8_t { anger, disgust, fear, joy, neutral, sadness, surprise };

inline constexpr std::size_t kNumEmotions = 7;

inline constexpr std::array<Emotion, kNumEmotions> kAllEmotions = {
    Emotion::anger, Emotion::disgust, Emotion::fear,    Emotion::joy,
    Emotion::neutral, Emotion::sadness, Emotion::surprise};

std::string_view emotion_name(Emotion e) noexcept;
std::optional<Emotion> parse_emotion(std::string_view name) noexcept;

constexpr std::size_t index_of(Emotion e) noexcept { return static_cast<std::size_t>(e); }

/// Band around 1 inside which a probability vector is silently renormalized.
inline constexpr double kProbSumTolerance = 1e-3;

/// A point on the probability simplex over the seven labels.
class EmotionDistribution {
 public:
  /// Uniform distribution.
  EmotionDistribution();

  /// Validates and renormalizes. Throws ValidationError when an entry is
  /// negative or non-finite, or when the sum lies outside
  /// [1 - tolerance, 1 + tolerance].
  static EmotionDistribution from_probs(std::span<const double> probs,
                                        double tolerance = kProbSumTolerance);

  /// All mass on one label.
  static EmotionDistribution one_hot(Emotion e);

  const std::array<double, kNumEmotions>& probs() const noexcept { return probs_; }
  double operator[](Emotion e) const noexcept { return probs_[index_of(e)]; }
  double operator[](std::size_t i) const noexcept { return probs_[i]; }

  /// Most probable label; ties go to the earliest label in canonical order.
  Emotion argmax() const noexcept;

  friend bool operator==(const EmotionDistribution&, const EmotionDistribution&) = default;

 private:
  std::array<double, kNumEmotions> probs_;
};

inline constexpr std::size_t kLayerRows = 25;
inline constexpr std::size_t kLayerCols = 768;

/// Per-layer utterance embeddings, row-major kLayerRows x kLayerCols.
struct LayerEmbeddings {
  std::vector<float> values;

  std::span<const float> row(std::size_t layer) const {
    return std::span<const float>(values).subspan(layer * kLayerCols, kLayerCols);
  }
  friend bool operator==(const LayerEmbeddings&, const LayerEmbeddings&) = default;
};

struct UtteranceRecord {
  std::string film_id;
  std::string utt_id;
  double start_s = 0.0;
  double end_s = 0.0;
  std::string text;
  EmotionDistribution emotion;
  std::optional<std::vector<double>> sent_embedding;
  /// Sidecar path exactly as written in the input line.
  std::optional<std::string> layer_embeddings_path;
  std::optional<LayerEmbeddings> layer_embeddings;
  std::optional<std::string> conversation_id;

  double midpoint() const noexcept { return 0.5 * (start_s + end_s); }

  friend bool operator==(const UtteranceRecord&, const UtteranceRecord&) = default;
};

struct FilmRecord {
  std::string film_id;
  std::string title;
  int year = 0;
  double runtime_s = 0.0;
  std::optional<double> credits_start_s;
  std::set<std::string> genres;

  /// Runtime the narrative clock runs on: the credits boundary when known.
  double effective_runtime() const noexcept { return credits_start_s.value_or(runtime_s); }

  friend bool operator==(const FilmRecord&, const FilmRecord&) = default;
};

/// Validated corpus. Utterances are ordered by (film_id, start_s), strictly
/// increasing in start_s within a film, and every film_id resolves.
struct Corpus {
  std::map<std::string, FilmRecord> films;
  std::vector<UtteranceRecord> utterances;

  const FilmRecord& film(const std::string& film_id) const;

  /// [begin, end) index ranges of each film's utterances, in film_id order.
  std::map<std::string, std::pair<std::size_t, std::size_t>> film_ranges() const;

  friend bool operator==(const Corpus&, const Corpus&) = default;
};

struct ParseOptions {
  /// Load layer-embedding sidecars into memory. Their size is validated
  /// either way.
  bool load_layer_embeddings = true;
};

/// Reads and validates a corpus. Problems on all lines are collected and
/// thrown together as a CorpusError carrying per-line diagnostics.
///
/// Exact duplicate utterance lines are dropped. Sidecar paths are resolved
/// relative to the directory of the utterances file.
Corpus parse_corpus(const std::filesystem::path& utterances_path,
                    const std::filesystem::path& films_path, const ParseOptions& options = {});

/// Re-checks every invariant of an in-memory corpus (synthetic corpora,
/// transformed corpora). Throws CorpusError.
void validate_corpus(const Corpus& corpus);

/// Sorts utterances into canonical (film_id, start_s) order.
void sort_utterances(Corpus& corpus);

void write_utterances_jsonl(const Corpus& corpus, const std::filesystem::path& path);
void write_films_jsonl(const Corpus& corpus, const std::filesystem::path& path);

/// Drops every utterance starting at or after its film's credits boundary.
Corpus trim_credits(const Corpus& corpus);

inline constexpr double kDefaultConversationGap = 3.0;

/// Assigns conversation ids: consecutive utterances of a film share an id iff
/// the next one starts no more than `gap_s` after the previous one ends.
Corpus group_conversations(const Corpus& corpus, double gap_s = kDefaultConversationGap);

enum class EmotionalityMode { prob, argmax };

std::string_view to_string(EmotionalityMode mode) noexcept;
std::optional<EmotionalityMode> parse_mode(std::string_view s) noexcept;

/// prob: 1 - P(neutral). argmax: 1 when the most probable label is not
/// neutral.
double emotionality(const EmotionDistribution& e, EmotionalityMode mode) noexcept;

inline double emotionality(const UtteranceRecord& u, EmotionalityMode mode) noexcept {
  return emotionality(u.emotion, mode);
}

}  // namespace screenlab
