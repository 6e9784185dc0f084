#include "screenlab/phrase_graph.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <thread>
#include <unordered_map>

#include "screenlab/error.hpp"

namespace screenlab {

double cosine_similarity(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) {
    throw ShapeError("cosine_similarity: dimensions differ (" + std::to_string(a.size()) + " vs " +
                     std::to_string(b.size()) + ")");
  }
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  if (na == 0.0 || nb == 0.0) throw DomainError("cosine_similarity: zero vector");
  return std::clamp(dot / (std::sqrt(na) * std::sqrt(nb)), -1.0, 1.0);
}

double SimilarityGraph::total_weight() const noexcept {
  double w = 0.0;
  for (const auto& e : edges) w += e.weight;
  return w;
}

void finalize_edges(SimilarityGraph& graph) {
  for (auto& e : graph.edges) {
    if (e.u > e.v) std::swap(e.u, e.v);
  }
  std::sort(graph.edges.begin(), graph.edges.end(), [](const WeightedEdge& a, const WeightedEdge& b) {
    return a.u != b.u ? a.u < b.u : a.v < b.v;
  });
  std::vector<WeightedEdge> merged;
  merged.reserve(graph.edges.size());
  for (const auto& e : graph.edges) {
    if (!merged.empty() && merged.back().u == e.u && merged.back().v == e.v) {
      merged.back().weight = std::max(merged.back().weight, e.weight);
    } else {
      merged.push_back(e);
    }
  }
  graph.edges = std::move(merged);
}

SimilarityGraph build_knn_graph(std::span<const std::string> texts,
                                std::span<const std::vector<double>> embeddings,
                                const KnnOptions& options) {
  if (texts.size() != embeddings.size()) {
    throw ShapeError("build_knn_graph: " + std::to_string(texts.size()) + " texts but " +
                     std::to_string(embeddings.size()) + " embeddings");
  }
  std::vector<std::string> missing;
  for (std::size_t i = 0; i < texts.size(); ++i) {
    if (embeddings[i].empty()) missing.push_back(texts[i]);
  }
  if (!missing.empty()) {
    std::string msg = "missing sentence embedding for " + std::to_string(missing.size()) + " text(s):";
    for (const auto& t : missing) msg += "\n  \"" + t + "\"";
    throw ValidationError(msg);
  }

  const std::size_t n = texts.size();
  const std::size_t dim = n == 0 ? 0 : embeddings[0].size();
  std::vector<double> unit(n * dim);
  for (std::size_t i = 0; i < n; ++i) {
    if (embeddings[i].size() != dim) {
      throw ShapeError("build_knn_graph: embedding of \"" + texts[i] + "\" has dimension " +
                       std::to_string(embeddings[i].size()) + ", expected " + std::to_string(dim));
    }
    double norm = 0.0;
    for (double x : embeddings[i]) norm += x * x;
    if (norm == 0.0) throw DomainError("build_knn_graph: zero embedding for \"" + texts[i] + "\"");
    norm = std::sqrt(norm);
    for (std::size_t d = 0; d < dim; ++d) unit[i * dim + d] = embeddings[i][d] / norm;
  }

  std::vector<std::vector<WeightedEdge>> per_node(n);
  auto scan = [&](std::size_t begin, std::size_t end) {
    std::vector<std::pair<double, std::size_t>> sims;
    for (std::size_t i = begin; i < end; ++i) {
      sims.clear();
      for (std::size_t j = 0; j < n; ++j) {
        if (j == i) continue;
        double dot = 0.0;
        for (std::size_t d = 0; d < dim; ++d) dot += unit[i * dim + d] * unit[j * dim + d];
        dot = std::clamp(dot, -1.0, 1.0);
        if (dot >= options.tau) sims.emplace_back(dot, j);
      }
      const auto by_similarity = [&](const auto& a, const auto& b) {
        return a.first != b.first ? a.first > b.first : texts[a.second] < texts[b.second];
      };
      const std::size_t keep = std::min(options.k, sims.size());
      std::partial_sort(sims.begin(), sims.begin() + static_cast<std::ptrdiff_t>(keep), sims.end(),
                        by_similarity);
      for (std::size_t r = 0; r < keep; ++r) per_node[i].push_back({i, sims[r].second, sims[r].first});
    }
  };
  unsigned workers = options.threads != 0 ? options.threads : std::thread::hardware_concurrency();
  workers = static_cast<unsigned>(std::clamp<std::size_t>(workers, 1, std::max<std::size_t>(1, n / 64)));
  if (workers == 1) {
    scan(0, n);
  } else {
    std::vector<std::jthread> pool;
    const std::size_t chunk = (n + workers - 1) / workers;
    for (unsigned w = 0; w < workers; ++w) {
      const std::size_t begin = w * chunk;
      const std::size_t end = std::min(n, begin + chunk);
      if (begin < end) pool.emplace_back(scan, begin, end);
    }
  }

  SimilarityGraph graph;
  graph.node_ids.assign(texts.begin(), texts.end());
  for (auto& edges : per_node) graph.edges.insert(graph.edges.end(), edges.begin(), edges.end());
  finalize_edges(graph);
  return graph;
}

TextEmbeddings collect_text_embeddings(const Corpus& corpus) {
  std::map<std::string, const std::vector<double>*> first;
  for (const auto& u : corpus.utterances) {
    auto [it, inserted] = first.emplace(u.text, nullptr);
    if (it->second == nullptr && u.sent_embedding) it->second = &*u.sent_embedding;
  }
  TextEmbeddings out;
  out.texts.reserve(first.size());
  out.embeddings.reserve(first.size());
  for (const auto& [text, emb] : first) {
    out.texts.push_back(text);
    out.embeddings.push_back(emb != nullptr ? *emb : std::vector<double>{});
  }
  return out;
}

double modularity(const SimilarityGraph& graph, std::span<const std::size_t> community_of,
                  double resolution) {
  if (community_of.size() != graph.node_count()) {
    throw ShapeError("modularity: assignment covers " + std::to_string(community_of.size()) +
                     " nodes, graph has " + std::to_string(graph.node_count()));
  }
  const double total = graph.total_weight();
  if (!(total > 0.0)) throw DomainError("modularity: graph has zero total edge weight");
  const std::size_t n_comm =
      community_of.empty() ? 0 : *std::max_element(community_of.begin(), community_of.end()) + 1;
  std::vector<double> inside(n_comm, 0.0);
  std::vector<double> strength(n_comm, 0.0);
  for (const auto& e : graph.edges) {
    const auto cu = community_of[e.u];
    const auto cv = community_of[e.v];
    if (cu == cv) inside[cu] += e.weight;
    strength[cu] += e.weight;
    strength[cv] += e.weight;
  }
  double q = 0.0;
  for (std::size_t c = 0; c < n_comm; ++c) {
    const double share = strength[c] / (2.0 * total);
    q += inside[c] / total - resolution * share * share;
  }
  return q;
}

double normalized_mutual_information(std::span<const std::size_t> a,
                                     std::span<const std::size_t> b) {
  if (a.size() != b.size()) throw ShapeError("NMI: labelings have different lengths");
  if (a.empty()) throw DomainError("NMI: empty labelings");
  const double n = static_cast<double>(a.size());
  std::map<std::size_t, double> pa, pb;
  std::map<std::pair<std::size_t, std::size_t>, double> pab;
  for (std::size_t i = 0; i < a.size(); ++i) {
    pa[a[i]] += 1.0;
    pb[b[i]] += 1.0;
    pab[{a[i], b[i]}] += 1.0;
  }
  auto entropy = [n](const auto& counts) {
    double h = 0.0;
    for (const auto& [k, c] : counts) h -= (c / n) * std::log(c / n);
    return h;
  };
  const double ha = entropy(pa);
  const double hb = entropy(pb);
  double mi = 0.0;
  for (const auto& [key, c] : pab) {
    mi += (c / n) * std::log(c * n / (pa[key.first] * pb[key.second]));
  }
  if (ha + hb == 0.0) return 1.0;
  return std::clamp(2.0 * mi / (ha + hb), 0.0, 1.0);
}

std::vector<PhraseGroup> make_phrase_groups(const Corpus& corpus, const SimilarityGraph& graph,
                                            const Partition& partition, std::size_t min_count) {
  if (partition.community_of.size() != graph.node_count()) {
    throw ShapeError("make_phrase_groups: partition does not match graph");
  }
  std::unordered_map<std::string, std::size_t> node_of;
  for (std::size_t i = 0; i < graph.node_count(); ++i) node_of.emplace(graph.node_ids[i], i);

  const std::size_t n_comm = partition.community_count;
  std::vector<std::map<std::string, std::size_t>> text_counts(n_comm);
  std::vector<std::vector<std::string>> utt_ids(n_comm);
  for (const auto& u : corpus.utterances) {
    auto it = node_of.find(u.text);
    if (it == node_of.end()) {
      throw ValidationError("make_phrase_groups: text \"" + u.text + "\" is not a graph node");
    }
    const auto c = partition.community_of[it->second];
    ++text_counts[c][u.text];
    utt_ids[c].push_back(u.utt_id);
  }

  std::vector<PhraseGroup> groups;
  for (std::size_t c = 0; c < n_comm; ++c) {
    if (utt_ids[c].size() < std::max<std::size_t>(min_count, 1)) continue;
    PhraseGroup g;
    g.count = utt_ids[c].size();
    g.utterance_ids = std::move(utt_ids[c]);
    std::size_t best = 0;
    for (const auto& [text, count] : text_counts[c]) {  // lexicographic, so first max wins ties
      g.member_texts.push_back(text);
      if (count > best) {
        best = count;
        g.representative = text;
      }
    }
    groups.push_back(std::move(g));
  }
  std::sort(groups.begin(), groups.end(), [](const PhraseGroup& a, const PhraseGroup& b) {
    return a.count != b.count ? a.count > b.count : a.representative < b.representative;
  });
  for (std::size_t i = 0; i < groups.size(); ++i) groups[i].group_id = i;
  return groups;
}

}  // namespace screenlab
