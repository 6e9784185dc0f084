#include "screenlab/evalkit.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <limits>
#include <map>
#include <tuple>

#include <json.hpp>

#include "screenlab/error.hpp"

namespace screenlab {

namespace {

constexpr char kMagic[8] = {'S', 'L', 'H', 'E', 'A', 'D', '\0', '\0'};

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xffu));
}

std::uint32_t get_u32(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

void put_floats(std::string& out, const std::vector<float>& values) {
  for (float f : values) put_u32(out, std::bit_cast<std::uint32_t>(f));
}

std::string shape_text(std::size_t a, std::size_t b) {
  return std::to_string(a) + "x" + std::to_string(b);
}

void expect_size(const char* block, std::size_t have, std::size_t need, const std::string& shape) {
  if (have != need) {
    throw ShapeError(std::string("head weights: ") + block + " has " + std::to_string(have) +
                     " values, expected " + shape);
  }
}

std::vector<double> softmax(std::span<const double> x) {
  const double mx = *std::max_element(x.begin(), x.end());
  std::vector<double> out(x.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    out[i] = std::exp(x[i] - mx);
    sum += out[i];
  }
  for (auto& v : out) v /= sum;
  return out;
}

}  // namespace

void SerHeadParams::check() const {
  if (activation != "relu") throw ValidationError("head weights: unsupported activation '" + activation + "'");
  if (hidden == 0) throw ValidationError("head weights: hidden width must be >= 1");
  if (n_layers == 0 || dim == 0) throw ValidationError("head weights: n_layers and dim must be >= 1");
  expect_size("layer_logits", layer_logits.size(), n_layers, std::to_string(n_layers));
  expect_size("hidden_w", hidden_w.size(), hidden * dim, shape_text(hidden, dim));
  expect_size("hidden_b", hidden_b.size(), hidden, std::to_string(hidden));
  expect_size("out_w", out_w.size(), kNumEmotions * hidden, shape_text(kNumEmotions, hidden));
  expect_size("out_b", out_b.size(), kNumEmotions, std::to_string(kNumEmotions));
}

std::vector<double> SerHeadParams::layer_weights() const {
  std::vector<double> logits(layer_logits.begin(), layer_logits.end());
  return softmax(logits);
}

void write_head_weights(const SerHeadParams& params, const std::filesystem::path& path) {
  params.check();
  nlohmann::ordered_json header;
  header["version"] = params.version;
  header["n_layers"] = params.n_layers;
  header["dim"] = params.dim;
  header["hidden"] = params.hidden;
  header["n_labels"] = kNumEmotions;
  header["activation"] = params.activation;
  auto labels = nlohmann::ordered_json::array();
  for (auto e : kAllEmotions) labels.push_back(std::string(emotion_name(e)));
  header["labels"] = labels;
  const std::string text = header.dump();

  std::string out(kMagic, sizeof kMagic);
  put_u32(out, kHeadFormatVersion);
  put_u32(out, static_cast<std::uint32_t>(text.size()));
  out += text;
  put_floats(out, params.layer_logits);
  put_floats(out, params.hidden_w);
  put_floats(out, params.hidden_b);
  put_floats(out, params.out_w);
  put_floats(out, params.out_b);

  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error("cannot write " + path.string());
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!f) throw Error("cannot write " + path.string());
}

SerHeadParams read_head_weights(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw Error("cannot open " + path.string());
  const std::string bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  const auto* p = reinterpret_cast<const unsigned char*>(bytes.data());
  const std::string where = path.string() + ": ";

  if (bytes.size() < 16 || std::memcmp(bytes.data(), kMagic, sizeof kMagic) != 0) {
    throw ValidationError(where + "not a head weight file");
  }
  const auto format = get_u32(p + 8);
  if (format != kHeadFormatVersion) {
    throw ValidationError(where + "unsupported format version " + std::to_string(format));
  }
  const std::size_t header_len = get_u32(p + 12);
  if (bytes.size() < 16 + header_len) throw ValidationError(where + "truncated header");

  nlohmann::json header;
  try {
    header = nlohmann::json::parse(bytes.substr(16, header_len));
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(where + "bad header: " + e.what());
  }

  SerHeadParams params;
  std::vector<std::string> labels;
  try {
    const auto& v = header.at("version");
    params.version = v.is_string() ? v.get<std::string>() : v.dump();
    params.n_layers = header.at("n_layers").get<std::size_t>();
    params.dim = header.at("dim").get<std::size_t>();
    params.hidden = header.at("hidden").get<std::size_t>();
    params.activation = header.at("activation").get<std::string>();
    labels = header.at("labels").get<std::vector<std::string>>();
    if (header.contains("n_labels") && header["n_labels"].get<std::size_t>() != labels.size()) {
      throw ValidationError(where + "n_labels disagrees with labels");
    }
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(where + "bad header: " + e.what());
  }

  // position of each canonical label in the file's label order
  if (labels.size() != kNumEmotions) {
    throw ValidationError(where + "expected " + std::to_string(kNumEmotions) + " labels, got " +
                          std::to_string(labels.size()));
  }
  std::array<std::size_t, kNumEmotions> file_row{};
  std::array<bool, kNumEmotions> found{};
  for (std::size_t i = 0; i < labels.size(); ++i) {
    auto e = parse_emotion(labels[i]);
    if (!e) throw ValidationError(where + "unknown label '" + labels[i] + "'");
    if (found[index_of(*e)]) throw ValidationError(where + "duplicate label '" + labels[i] + "'");
    found[index_of(*e)] = true;
    file_row[index_of(*e)] = i;
  }

  const std::size_t h = params.hidden, d = params.dim, l = params.n_layers;
  const std::size_t n_floats = l + h * d + h + kNumEmotions * h + kNumEmotions;
  const std::size_t body = bytes.size() - 16 - header_len;
  if (body != 4 * n_floats) {
    throw ShapeError(where + "weight blocks hold " + std::to_string(body) + " bytes, header implies " +
                     std::to_string(4 * n_floats));
  }
  const unsigned char* q = p + 16 + header_len;
  auto take = [&](std::size_t count) {
    std::vector<float> v(count);
    for (auto& x : v) {
      x = std::bit_cast<float>(get_u32(q));
      q += 4;
    }
    return v;
  };
  params.layer_logits = take(l);
  params.hidden_w = take(h * d);
  params.hidden_b = take(h);
  const auto out_w = take(kNumEmotions * h);
  const auto out_b = take(kNumEmotions);
  params.out_w.resize(kNumEmotions * h);
  params.out_b.resize(kNumEmotions);
  for (std::size_t c = 0; c < kNumEmotions; ++c) {
    std::copy_n(out_w.begin() + static_cast<std::ptrdiff_t>(file_row[c] * h), h,
                params.out_w.begin() + static_cast<std::ptrdiff_t>(c * h));
    params.out_b[c] = out_b[file_row[c]];
  }
  params.check();
  return params;
}

EmotionDistribution ser_head_forward(std::span<const float> layers, const SerHeadParams& params) {
  params.check();
  const std::size_t l = params.n_layers, d = params.dim, h = params.hidden;
  if (layers.size() != l * d) {
    throw ShapeError("head forward: input has " + std::to_string(layers.size()) +
                     " values, expected " + shape_text(l, d));
  }
  const auto w = params.layer_weights();
  std::vector<double> v(d, 0.0);
  for (std::size_t i = 0; i < l; ++i) {
    const float* row = layers.data() + i * d;
    for (std::size_t j = 0; j < d; ++j) v[j] += w[i] * static_cast<double>(row[j]);
  }
  std::vector<double> a(h);
  for (std::size_t k = 0; k < h; ++k) {
    const float* row = params.hidden_w.data() + k * d;
    double s = params.hidden_b[k];
    for (std::size_t j = 0; j < d; ++j) s += static_cast<double>(row[j]) * v[j];
    a[k] = std::max(0.0, s);
  }
  std::array<double, kNumEmotions> logits{};
  for (std::size_t c = 0; c < kNumEmotions; ++c) {
    const float* row = params.out_w.data() + c * h;
    double s = params.out_b[c];
    for (std::size_t k = 0; k < h; ++k) s += static_cast<double>(row[k]) * a[k];
    logits[c] = s;
  }
  const auto probs = softmax(logits);
  return EmotionDistribution::from_probs(probs);
}

namespace {

using Confusion = std::array<std::array<double, kNumEmotions>, kNumEmotions>;

// accuracy and weighted F1 from a (possibly resampled) confusion table
std::pair<double, double> headline(const Confusion& m, std::array<ClassMetrics, kNumEmotions>* per_class) {
  double n = 0.0, correct = 0.0;
  std::array<double, kNumEmotions> gold{}, pred{};
  for (std::size_t g = 0; g < kNumEmotions; ++g) {
    for (std::size_t p = 0; p < kNumEmotions; ++p) {
      n += m[g][p];
      gold[g] += m[g][p];
      pred[p] += m[g][p];
    }
    correct += m[g][g];
  }
  double wf1 = 0.0;
  for (std::size_t c = 0; c < kNumEmotions; ++c) {
    const double tp = m[c][c];
    const double precision = pred[c] > 0.0 ? tp / pred[c] : 0.0;
    const double recall = gold[c] > 0.0 ? tp / gold[c] : 0.0;
    const double f1 = precision + recall > 0.0 ? 2.0 * precision * recall / (precision + recall) : 0.0;
    wf1 += gold[c] * f1;
    if (per_class) (*per_class)[c] = {precision, recall, f1, static_cast<std::size_t>(gold[c])};
  }
  return {correct / n, wf1 / n};
}

}  // namespace

EvalReport classification_report(std::span<const Emotion> gold, std::span<const Emotion> pred,
                                  const BootstrapOptions& bootstrap) {
  if (gold.size() != pred.size()) {
    throw ShapeError("classification_report: " + std::to_string(gold.size()) + " gold labels but " +
                     std::to_string(pred.size()) + " predictions");
  }
  if (gold.empty()) throw InsufficientDataError("classification_report", 0, 1);

  EvalReport r;
  r.n = gold.size();
  Confusion m{};
  for (std::size_t i = 0; i < gold.size(); ++i) {
    ++r.confusion[index_of(gold[i])][index_of(pred[i])];
    m[index_of(gold[i])][index_of(pred[i])] += 1.0;
  }
  std::tie(r.accuracy, r.weighted_f1) = headline(m, &r.per_class);

  if (bootstrap.n_boot > 0) {
    auto stat = [&](std::span<const std::size_t> idx, std::span<double> out) {
      Confusion b{};
      for (auto i : idx) b[index_of(gold[i])][index_of(pred[i])] += 1.0;
      auto [acc, f1] = headline(b, nullptr);
      out[0] = acc;
      out[1] = f1;
    };
    auto cis = bootstrap_ci(gold.size(), 2, stat, bootstrap);
    r.accuracy_ci = cis[0];
    r.f1_ci = cis[1];
  }
  return r;
}

EvalReport classification_report(std::span<const Emotion> gold,
                                 std::span<const EmotionDistribution> pred,
                                 const BootstrapOptions& bootstrap) {
  std::vector<Emotion> labels;
  labels.reserve(pred.size());
  for (const auto& d : pred) labels.push_back(d.argmax());
  return classification_report(gold, labels, bootstrap);
}

double krippendorff_alpha(const std::vector<std::vector<std::optional<int>>>& units) {
  // coincidence matrix over the categories that occur in pairable units
  std::map<int, std::map<int, double>> o;
  std::map<int, double> n_c;
  double n = 0.0;
  for (const auto& unit : units) {
    std::vector<int> values;
    for (const auto& v : unit) {
      if (v) values.push_back(*v);
    }
    const auto m = values.size();
    if (m < 2) continue;
    const double w = 1.0 / static_cast<double>(m - 1);
    for (std::size_t i = 0; i < m; ++i) {
      for (std::size_t j = 0; j < m; ++j) {
        if (i == j) continue;
        o[values[i]][values[j]] += w;
      }
      n_c[values[i]] += 1.0;
    }
    n += static_cast<double>(m);
  }
  if (n == 0.0) throw InsufficientDataError("krippendorff_alpha: units with two codings", 0, 1);

  double disagree = 0.0;
  for (const auto& [c, row] : o) {
    for (const auto& [k, v] : row) {
      if (c != k) disagree += v;
    }
  }
  double expected = 0.0;
  for (const auto& [c, nc] : n_c) expected += nc * (n - nc);
  if (expected == 0.0) return 1.0;
  return 1.0 - (n - 1.0) * disagree / expected;
}

double fleiss_kappa(const std::vector<std::vector<std::size_t>>& counts,
                    std::size_t raters_per_unit) {
  if (raters_per_unit < 2) throw DomainError("fleiss_kappa: need at least two raters per unit");
  if (counts.empty()) throw DomainError("fleiss_kappa: no units");
  const std::size_t k = counts.front().size();
  const double nr = static_cast<double>(raters_per_unit);
  std::vector<double> col(k, 0.0);
  double p_bar = 0.0;
  for (std::size_t i = 0; i < counts.size(); ++i) {
    const auto& row = counts[i];
    if (row.size() != k) {
      throw ShapeError("fleiss_kappa: row " + std::to_string(i) + " has " +
                       std::to_string(row.size()) + " categories, expected " + std::to_string(k));
    }
    std::size_t total = 0;
    double sq = 0.0;
    for (std::size_t j = 0; j < k; ++j) {
      total += row[j];
      sq += static_cast<double>(row[j]) * static_cast<double>(row[j]);
      col[j] += static_cast<double>(row[j]);
    }
    if (total != raters_per_unit) {
      throw ValidationError("fleiss_kappa: row " + std::to_string(i) + " sums to " +
                            std::to_string(total) + ", expected " + std::to_string(raters_per_unit));
    }
    p_bar += (sq - nr) / (nr * (nr - 1.0));
  }
  const double n_units = static_cast<double>(counts.size());
  p_bar /= n_units;
  double p_e = 0.0;
  for (double c : col) {
    const double pj = c / (n_units * nr);
    p_e += pj * pj;
  }
  if (p_e >= 1.0) return 1.0;
  return (p_bar - p_e) / (1.0 - p_e);
}

}  // namespace screenlab
