#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "screenlab/corpus.hpp"

namespace screenlab {

/// dot(a, b) / (|a| |b|), clamped to [-1, 1]. Throws DomainError on a zero
/// vector, ShapeError on mismatched dimensions.
double cosine_similarity(std::span<const double> a, std::span<const double> b);

struct WeightedEdge {
  std::size_t u = 0;
  std::size_t v = 0;  // u < v, except self-loops (u == v) in aggregated graphs
  double weight = 0.0;

  friend bool operator==(const WeightedEdge&, const WeightedEdge&) = default;
};

/// Undirected weighted graph over labelled nodes (utterance texts). At most
/// one edge per unordered pair; edges are kept sorted by (u, v).
struct SimilarityGraph {
  std::vector<std::string> node_ids;
  std::vector<WeightedEdge> edges;

  std::size_t node_count() const noexcept { return node_ids.size(); }
  double total_weight() const noexcept;
};

/// Orients every edge as u <= v, sorts them, and merges repeated pairs
/// (keeping the larger weight).
void finalize_edges(SimilarityGraph& graph);

struct KnnOptions {
  std::size_t k = 10;
  double tau = 0.8;
  /// Worker threads for the similarity scan; 0 = hardware concurrency.
  unsigned threads = 0;
};

/// Exact k-nearest-neighbour graph on cosine similarity. Node i links to its
/// k most similar other nodes (ties broken by text), keeping only edges with
/// similarity >= tau; an edge found from both ends is stored once.
///
/// `embeddings[i]` belongs to `texts[i]`; an empty embedding counts as
/// missing and is reported (with every other missing text) as a
/// ValidationError.
SimilarityGraph build_knn_graph(std::span<const std::string> texts,
                                std::span<const std::vector<double>> embeddings,
                                const KnnOptions& options = {});

/// Deduplicated utterance texts of a corpus in lexicographic order, with the
/// sentence embedding of each (first occurrence wins; empty if none).
struct TextEmbeddings {
  std::vector<std::string> texts;
  std::vector<std::vector<double>> embeddings;
};

TextEmbeddings collect_text_embeddings(const Corpus& corpus);

/// Q = sum_c [ w_c / W - resolution * (s_c / 2W)^2 ], with w_c the weight
/// inside community c, s_c its total strength and W the total edge weight.
/// Throws DomainError for a graph with zero total weight.
double modularity(const SimilarityGraph& graph, std::span<const std::size_t> community_of,
                  double resolution = 1.0);

struct Partition {
  /// Community of each node, numbered 0.. in order of first appearance.
  std::vector<std::size_t> community_of;
  std::size_t community_count = 0;
  double quality = 0.0;  // modularity at `resolution`
  double resolution = 1.0;
  std::uint64_t seed = 0;
  /// Quality after each outer iteration; non-decreasing.
  std::vector<double> quality_trace;
};

struct LeidenOptions {
  double resolution = 1.0;
  std::uint64_t seed = 0;
  /// Randomness of the refinement phase; small values make it near-greedy.
  double theta = 0.01;
  int max_iterations = 100;
  /// Independent runs (seeds derived from `seed`); the best quality wins.
  int restarts = 8;
};

/// Leiden community detection maximizing modularity (local moving,
/// refinement, aggregation, repeated until the partition is stable), with a
/// Kernighan-Lin polishing sweep after each pass. Deterministic for a given
/// seed; every community is connected. quality_trace is that of the winning
/// run. Throws DomainError on a graph with no nodes or restarts < 1.
Partition leiden_partition(const SimilarityGraph& graph, const LeidenOptions& options = {});

/// Normalized mutual information (arithmetic-mean normalization) between two
/// labelings of the same nodes. 1 for identical partitions up to relabeling.
double normalized_mutual_information(std::span<const std::size_t> a,
                                     std::span<const std::size_t> b);

struct PhraseGroup {
  std::size_t group_id = 0;
  std::vector<std::string> member_texts;  // sorted
  std::vector<std::string> utterance_ids;  // corpus order
  std::string representative;
  std::size_t count = 0;
};

/// Groups the corpus' utterances by the community of their text. Groups with
/// fewer than min_count utterances are dropped; the rest are sorted by count
/// descending (ties: representative) and numbered in that order. The
/// representative is the most frequent text (ties: lexicographically first).
std::vector<PhraseGroup> make_phrase_groups(const Corpus& corpus, const SimilarityGraph& graph,
                                            const Partition& partition, std::size_t min_count);

}  // namespace screenlab
