#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "screenlab/bootstrap.hpp"
#include "screenlab/corpus.hpp"

namespace screenlab {

inline constexpr std::uint32_t kHeadFormatVersion = 1;

/// Weights of the utterance-level emotion head: a softmax-weighted average
/// over encoder layers followed by one hidden ReLU layer and a 7-way output.
///
/// On disk (little-endian):
///   8 bytes   magic "SLHEAD\0\0"
///   uint32    format version
///   uint32    byte length L of the JSON header
///   L bytes   JSON header: {"version", "n_layers", "dim", "hidden",
///             "n_labels", "activation", "labels", ...}
///   float32   layer_logits[n_layers]
///   float32   hidden_w[hidden][dim]
///   float32   hidden_b[hidden]
///   float32   out_w[n_labels][hidden]
///   float32   out_b[n_labels]
/// Nothing may follow the last block.
struct SerHeadParams {
  std::string version = "1";
  std::string activation = "relu";
  std::size_t n_layers = kLayerRows;
  std::size_t dim = kLayerCols;
  std::size_t hidden = 128;
  std::vector<float> layer_logits;  // n_layers
  std::vector<float> hidden_w;      // hidden x dim, row-major
  std::vector<float> hidden_b;      // hidden
  std::vector<float> out_w;         // kNumEmotions x hidden, canonical label order
  std::vector<float> out_b;         // kNumEmotions

  /// Throws ShapeError when a block size disagrees with the dimensions and
  /// ValidationError for an unsupported activation or hidden == 0.
  void check() const;

  /// softmax(layer_logits).
  std::vector<double> layer_weights() const;
};

/// Reads a weight file. Output rows are permuted into canonical label order
/// when the header lists the labels in another order.
SerHeadParams read_head_weights(const std::filesystem::path& path);
void write_head_weights(const SerHeadParams& params, const std::filesystem::path& path);

/// `layers` is n_layers x dim, row-major. Accumulation is in double.
EmotionDistribution ser_head_forward(std::span<const float> layers, const SerHeadParams& params);

inline EmotionDistribution ser_head_forward(const LayerEmbeddings& layers,
                                            const SerHeadParams& params) {
  return ser_head_forward(std::span<const float>(layers.values), params);
}

struct ClassMetrics {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::size_t support = 0;  // gold count
};

struct EvalReport {
  double accuracy = 0.0;
  double weighted_f1 = 0.0;
  std::array<ClassMetrics, kNumEmotions> per_class{};
  /// confusion[gold][pred].
  std::array<std::array<std::size_t, kNumEmotions>, kNumEmotions> confusion{};
  std::size_t n = 0;
  std::optional<BootstrapCI> accuracy_ci;
  std::optional<BootstrapCI> f1_ci;
};

/// Accuracy, per-class precision/recall/F1 (0 where undefined) and F1
/// weighted by gold support. CIs come from an utterance-level bootstrap and
/// are skipped when bootstrap.n_boot == 0.
///
/// Throws ShapeError on a length mismatch and InsufficientDataError on empty
/// input.
EvalReport classification_report(std::span<const Emotion> gold, std::span<const Emotion> pred,
                                  const BootstrapOptions& bootstrap);

/// Predictions given as distributions are reduced with argmax.
EvalReport classification_report(std::span<const Emotion> gold,
                                  std::span<const EmotionDistribution> pred,
                                  const BootstrapOptions& bootstrap);

/// Nominal Krippendorff's alpha. `units[u][c]` is coder c's category for unit
/// u, or empty when missing. Rows may have different lengths. Units with
/// fewer than two codings are ignored. Returns 1 when every pairable value
/// falls in one category.
///
/// Throws InsufficientDataError when no unit has two codings.
double krippendorff_alpha(const std::vector<std::vector<std::optional<int>>>& units);

/// Fleiss' kappa. `counts[i][j]` is the number of raters putting unit i in
/// category j. Throws ValidationError when a row does not sum to
/// raters_per_unit, and DomainError when raters_per_unit < 2 or there are no
/// units.
double fleiss_kappa(const std::vector<std::vector<std::size_t>>& counts,
                    std::size_t raters_per_unit);

}  // namespace screenlab
