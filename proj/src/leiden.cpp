// Leiden community detection for modularity: local moving, refinement into
// well-connected sub-communities, aggregation on the refined partition.
// Quality gains inside the algorithm are kept in edge-weight units (not
// divided by the total weight), so theta applies on the usual scale.

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <numeric>
#include <queue>
#include <stdexcept>

#include "screenlab/error.hpp"
#include "screenlab/phrase_graph.hpp"
#include "screenlab/rng.hpp"

namespace screenlab {

namespace {

struct Neighbor {
  std::size_t node;
  double weight;
};

/// Adjacency form of a (possibly aggregated) graph. Self-loops are kept apart
/// and count twice towards strength.
struct Network {
  std::vector<std::vector<Neighbor>> adj;
  std::vector<double> self_loop;
  std::vector<double> strength;
  double total = 0.0;  // every edge once, self-loops included

  std::size_t size() const noexcept { return adj.size(); }
};

Network make_network(const SimilarityGraph& graph) {
  Network net;
  const std::size_t n = graph.node_count();
  net.adj.resize(n);
  net.self_loop.assign(n, 0.0);
  net.strength.assign(n, 0.0);
  for (const auto& e : graph.edges) {
    if (e.u == e.v) {
      net.self_loop[e.u] += e.weight;
      net.strength[e.u] += 2.0 * e.weight;
    } else {
      net.adj[e.u].push_back({e.v, e.weight});
      net.adj[e.v].push_back({e.u, e.weight});
      net.strength[e.u] += e.weight;
      net.strength[e.v] += e.weight;
    }
    net.total += e.weight;
  }
  return net;
}

/// Renumbers labels 0.. in order of first appearance; returns the count.
std::size_t relabel(std::vector<std::size_t>& labels) {
  std::vector<std::size_t> map(labels.size() + 1, std::numeric_limits<std::size_t>::max());
  std::size_t next = 0;
  for (auto& l : labels) {
    if (l >= map.size()) map.resize(l + 1, std::numeric_limits<std::size_t>::max());
    if (map[l] == std::numeric_limits<std::size_t>::max()) map[l] = next++;
    l = map[l];
  }
  return next;
}

class Leiden {
 public:
  Leiden(const LeidenOptions& options, double total)
      : gamma_(options.resolution), theta_(options.theta), rng_(options.seed),
        two_m_(2.0 * total) {}

  /// Queue-based local moving. `community` holds ids in [0, n).
  void move_nodes(const Network& net, std::vector<std::size_t>& community) {
    const std::size_t n = net.size();
    std::vector<double> comm_strength(n, 0.0);
    std::vector<std::size_t> comm_size(n, 0);
    for (std::size_t v = 0; v < n; ++v) {
      comm_strength[community[v]] += net.strength[v];
      ++comm_size[community[v]];
    }
    std::vector<std::size_t> empty;
    for (std::size_t c = n; c > 0; --c) {
      if (comm_size[c - 1] == 0) empty.push_back(c - 1);
    }

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    rng_.shuffle(std::span<std::size_t>(order));
    std::deque<std::size_t> queue(order.begin(), order.end());
    std::vector<char> queued(n, 1);

    std::vector<double> weight_to(n, 0.0);
    std::vector<char> seen(n, 0);
    std::vector<std::size_t> touched;
    while (!queue.empty()) {
      const std::size_t v = queue.front();
      queue.pop_front();
      queued[v] = 0;
      const std::size_t current = community[v];
      const double kv = net.strength[v];

      touched.clear();
      for (const auto& nb : net.adj[v]) {
        const auto c = community[nb.node];
        if (!seen[c]) {
          seen[c] = 1;
          touched.push_back(c);
        }
        weight_to[c] += nb.weight;
      }

      comm_strength[current] -= kv;
      --comm_size[current];
      const double stay_gain = weight_to[current] - gamma_ * kv * comm_strength[current] / two_m_;
      std::size_t best = current;
      double best_gain = stay_gain;
      for (const auto c : touched) {
        if (c == current) continue;
        const double gain = weight_to[c] - gamma_ * kv * comm_strength[c] / two_m_;
        if (gain > best_gain || (gain == best_gain && best != current && c < best)) {
          best_gain = gain;
          best = c;
        }
      }
      // An empty community has gain 0; leave for it when everything else is
      // worse than being alone.
      if (best_gain < 0.0 && comm_size[current] > 0 && !empty.empty()) {
        best = empty.back();
        best_gain = 0.0;
      }
      if (best != current && !(best_gain > stay_gain)) best = current;

      for (const auto c : touched) {
        weight_to[c] = 0.0;
        seen[c] = 0;
      }

      if (best != current && comm_size[best] == 0) {
        empty.erase(std::find(empty.begin(), empty.end(), best));
      }
      comm_strength[best] += kv;
      ++comm_size[best];
      community[v] = best;
      if (comm_size[current] == 0 && best != current) empty.push_back(current);

      if (best != current) {
        for (const auto& nb : net.adj[v]) {
          if (!queued[nb.node] && community[nb.node] != best) {
            queued[nb.node] = 1;
            queue.push_back(nb.node);
          }
        }
      }
    }
  }

  /// Refinement: inside each community, merge well-connected singletons into
  /// well-connected sub-communities, choosing randomly among non-negative
  /// gains with weight exp(gain / theta).
  std::vector<std::size_t> refine(const Network& net, const std::vector<std::size_t>& community) {
    const std::size_t n = net.size();
    std::vector<std::size_t> refined(n);
    std::iota(refined.begin(), refined.end(), std::size_t{0});
    std::vector<double> ref_strength = net.strength;
    std::vector<double> ref_external(n, 0.0);  // weight from sub-community to rest of its community
    std::vector<char> singleton(n, 1);

    std::vector<double> comm_strength(n, 0.0);
    std::vector<std::vector<std::size_t>> members(n);
    for (std::size_t v = 0; v < n; ++v) {
      comm_strength[community[v]] += net.strength[v];
      members[community[v]].push_back(v);
    }
    std::vector<double> within(n, 0.0);  // k_{v, C - v}
    for (std::size_t v = 0; v < n; ++v) {
      for (const auto& nb : net.adj[v]) {
        if (community[nb.node] == community[v]) within[v] += nb.weight;
      }
      ref_external[v] = within[v];
    }

    std::vector<double> weight_to(n, 0.0);
    std::vector<char> seen(n, 0);
    std::vector<std::size_t> touched;
    std::vector<double> gains;
    for (std::size_t c = 0; c < n; ++c) {
      auto& nodes = members[c];
      if (nodes.size() < 2) continue;
      rng_.shuffle(std::span<std::size_t>(nodes));
      const double kc = comm_strength[c];
      for (const auto v : nodes) {
        if (!singleton[refined[v]]) continue;
        const double kv = net.strength[v];
        if (within[v] < gamma_ * kv * (kc - kv) / two_m_) continue;

        touched.clear();
        for (const auto& nb : net.adj[v]) {
          if (community[nb.node] != c) continue;
          const auto t = refined[nb.node];
          if (t == refined[v]) continue;
          if (!seen[t]) {
            seen[t] = 1;
            touched.push_back(t);
          }
          weight_to[t] += nb.weight;
        }
        // Candidates: staying alone (gain 0) or joining a well-connected
        // neighbouring sub-community with non-negative gain.
        std::vector<std::size_t> candidates{refined[v]};
        gains.assign(1, 0.0);
        for (const auto t : touched) {
          const double kt = ref_strength[t];
          if (ref_external[t] < gamma_ * kt * (kc - kt) / two_m_) continue;
          const double gain = weight_to[t] - gamma_ * kv * kt / two_m_;
          if (gain >= 0.0) {
            candidates.push_back(t);
            gains.push_back(gain);
          }
        }
        for (const auto t : touched) {
          weight_to[t] = 0.0;
          seen[t] = 0;
        }
        if (candidates.size() == 1) continue;

        const double max_gain = *std::max_element(gains.begin(), gains.end());
        double total = 0.0;
        for (auto& g : gains) {
          g = std::exp((g - max_gain) / theta_);
          total += g;
        }
        double pick = rng_.uniform() * total;
        std::size_t chosen = candidates.back();
        for (std::size_t i = 0; i < candidates.size(); ++i) {
          if (pick < gains[i]) {
            chosen = candidates[i];
            break;
          }
          pick -= gains[i];
        }
        if (chosen == refined[v]) continue;

        double to_chosen = 0.0;
        for (const auto& nb : net.adj[v]) {
          if (refined[nb.node] == chosen) to_chosen += nb.weight;
        }
        ref_strength[chosen] += kv;
        ref_external[chosen] += within[v] - 2.0 * to_chosen;
        ref_strength[refined[v]] = 0.0;
        ref_external[refined[v]] = 0.0;
        refined[v] = chosen;
        singleton[chosen] = 0;
      }
    }
    relabel(refined);
    return refined;
  }

  /// Kernighan-Lin sweeps over single-node moves: every node moves once per
  /// sweep, best move first even when it loses quality, then the sweep is
  /// cut back to its best prefix. Gets out of optima that need several nodes
  /// to move together. Returns the gain kept, in edge-weight units.
  double polish(const Network& net, std::vector<std::size_t>& community, int max_sweeps = 16) {
    const std::size_t n = net.size();
    std::vector<double> comm_strength(n);
    std::vector<std::size_t> comm_size(n);
    std::vector<std::size_t> free;
    std::vector<double> weight_to(n, 0.0);
    std::vector<char> seen(n, 0);
    std::vector<std::size_t> touched;
    constexpr auto kNone = std::numeric_limits<std::size_t>::max();

    // best target for v and the gain of moving there; kNone when v has none
    auto best_move = [&](std::size_t v) -> std::pair<double, std::size_t> {
      const std::size_t cur = community[v];
      const double kv = net.strength[v];
      touched.clear();
      for (const auto& nb : net.adj[v]) {
        const auto c = community[nb.node];
        if (!seen[c]) {
          seen[c] = 1;
          touched.push_back(c);
        }
        weight_to[c] += nb.weight;
      }
      const double loss = weight_to[cur] - gamma_ * kv * (comm_strength[cur] - kv) / two_m_;
      double best = -std::numeric_limits<double>::infinity();
      std::size_t target = kNone;
      if (comm_size[cur] > 1 && !free.empty()) {
        best = -loss;
        target = free.back();
      }
      for (const auto c : touched) {
        if (c == cur) continue;
        const double g = weight_to[c] - gamma_ * kv * comm_strength[c] / two_m_ - loss;
        if (g > best || (g == best && c < target)) {
          best = g;
          target = c;
        }
      }
      for (const auto c : touched) {
        weight_to[c] = 0.0;
        seen[c] = 0;
      }
      return {best, target};
    };

    struct Entry {
      double gain;
      std::size_t node;
      bool operator<(const Entry& o) const { return gain < o.gain || (gain == o.gain && node > o.node); }
    };
    struct Done {
      std::size_t node, from;
    };

    double kept = 0.0;
    for (int sweep = 0; sweep < max_sweeps; ++sweep) {
      std::fill(comm_strength.begin(), comm_strength.end(), 0.0);
      std::fill(comm_size.begin(), comm_size.end(), 0);
      for (std::size_t v = 0; v < n; ++v) {
        comm_strength[community[v]] += net.strength[v];
        ++comm_size[community[v]];
      }
      free.clear();
      for (std::size_t c = n; c > 0; --c) {
        if (comm_size[c - 1] == 0) free.push_back(c - 1);
      }

      std::priority_queue<Entry> heap;
      for (std::size_t v = 0; v < n; ++v) {
        const auto [g, t] = best_move(v);
        if (t != kNone) heap.push({g, v});
      }
      std::vector<char> moved(n, 0);
      std::vector<Done> log;
      double cum = 0.0, best_cum = 0.0;
      std::size_t best_len = 0;
      while (!heap.empty()) {
        const auto top = heap.top();
        heap.pop();
        const std::size_t v = top.node;
        if (moved[v]) continue;
        const auto [g, t] = best_move(v);
        if (t == kNone) continue;
        if (!heap.empty() && g < heap.top().gain) {
          heap.push({g, v});  // stale entry: requeue at its current value
          continue;
        }
        const std::size_t from = community[v];
        if (comm_size[t] == 0) free.erase(std::find(free.begin(), free.end(), t));
        comm_strength[from] -= net.strength[v];
        --comm_size[from];
        comm_strength[t] += net.strength[v];
        ++comm_size[t];
        if (comm_size[from] == 0) free.push_back(from);
        community[v] = t;
        moved[v] = 1;
        log.push_back({v, from});
        cum += g;
        if (cum > best_cum + 1e-12 * two_m_) {
          best_cum = cum;
          best_len = log.size();
        }
        for (const auto& nb : net.adj[v]) {
          if (moved[nb.node]) continue;
          const auto [gn, tn] = best_move(nb.node);
          if (tn != kNone) heap.push({gn, nb.node});
        }
      }
      for (std::size_t i = log.size(); i > best_len; --i) community[log[i - 1].node] = log[i - 1].from;
      if (best_len == 0) break;
      kept += best_cum;
    }
    return kept;
  }

 private:
  double gamma_;
  double theta_;
  Rng rng_;
  double two_m_;
};

/// Splits every community into its connected components. Never lowers
/// modularity: the pieces share no edges, so only the null-model term moves,
/// and it shrinks.
void split_disconnected(const Network& net, std::vector<std::size_t>& community) {
  const std::size_t n = net.size();
  constexpr auto kUnset = std::numeric_limits<std::size_t>::max();
  std::vector<std::size_t> out(n, kUnset);
  std::size_t next = 0;
  std::vector<std::size_t> stack;
  for (std::size_t s = 0; s < n; ++s) {
    if (out[s] != kUnset) continue;
    out[s] = next;
    stack.push_back(s);
    while (!stack.empty()) {
      const auto v = stack.back();
      stack.pop_back();
      for (const auto& nb : net.adj[v]) {
        if (out[nb.node] == kUnset && community[nb.node] == community[s]) {
          out[nb.node] = next;
          stack.push_back(nb.node);
        }
      }
    }
    ++next;
  }
  community = std::move(out);
}

Network aggregate(const Network& net, const std::vector<std::size_t>& refined, std::size_t count) {
  Network agg;
  agg.adj.resize(count);
  agg.self_loop.assign(count, 0.0);
  agg.strength.assign(count, 0.0);
  agg.total = net.total;
  std::vector<double> weight_to(count, 0.0);
  std::vector<char> seen(count, 0);
  std::vector<std::vector<std::size_t>> members(count);
  for (std::size_t v = 0; v < net.size(); ++v) {
    members[refined[v]].push_back(v);
    agg.strength[refined[v]] += net.strength[v];
    agg.self_loop[refined[v]] += net.self_loop[v];
  }
  std::vector<std::size_t> touched;
  for (std::size_t a = 0; a < count; ++a) {
    touched.clear();
    for (const auto v : members[a]) {
      for (const auto& nb : net.adj[v]) {
        const auto b = refined[nb.node];
        if (b == a) {
          // Each internal edge is seen from both ends.
          agg.self_loop[a] += 0.5 * nb.weight;
          continue;
        }
        if (!seen[b]) {
          seen[b] = 1;
          touched.push_back(b);
        }
        weight_to[b] += nb.weight;
      }
    }
    std::sort(touched.begin(), touched.end());
    for (const auto b : touched) {
      agg.adj[a].push_back({b, weight_to[b]});
      weight_to[b] = 0.0;
      seen[b] = 0;
    }
  }
  return agg;
}


/// One full run: passes of local moving, refinement and aggregation, each
/// followed by polishing, until a pass brings no gain.
Partition single_run(const SimilarityGraph& graph, const LeidenOptions& options, double total) {
  const std::size_t n = graph.node_count();
  Partition result;
  const Network base = make_network(graph);
  Leiden leiden(options, total);

  // Passes repeat from the previous pass's partition until one brings no
  // gain; the refinement step lets a later pass split what an earlier one
  // merged too eagerly.
  std::vector<std::size_t> best(n);
  std::iota(best.begin(), best.end(), std::size_t{0});
  double best_q = -std::numeric_limits<double>::infinity();
  std::vector<std::size_t> flat(n);
  int iter = 0;
  while (iter < options.max_iterations) {
    Network net = base;
    std::vector<std::size_t> node_to_agg(n);  // original node -> node of `net`
    std::iota(node_to_agg.begin(), node_to_agg.end(), std::size_t{0});
    std::vector<std::size_t> community = best;

    for (; iter < options.max_iterations; ++iter) {
      leiden.move_nodes(net, community);
      const std::size_t count = relabel(community);

      for (std::size_t v = 0; v < n; ++v) flat[v] = community[node_to_agg[v]];
      const double q = modularity(graph, flat, options.resolution);
      if (!result.quality_trace.empty() && q < result.quality_trace.back() - 1e-12) {
        throw std::logic_error("Leiden: quality decreased between iterations");
      }
      result.quality_trace.push_back(q);

      if (count == net.size()) break;

      auto refined = leiden.refine(net, community);
      const std::size_t refined_count = *std::max_element(refined.begin(), refined.end()) + 1;
      Network agg = aggregate(net, refined, refined_count);
      std::vector<std::size_t> agg_community(refined_count);
      for (std::size_t v = 0; v < net.size(); ++v) agg_community[refined[v]] = community[v];
      for (auto& a : node_to_agg) a = refined[a];
      net = std::move(agg);
      community = std::move(agg_community);
    }
    ++iter;

    for (std::size_t v = 0; v < n; ++v) flat[v] = community[node_to_agg[v]];
    relabel(flat);
    if (leiden.polish(base, flat) > 0.0) {
      split_disconnected(base, flat);
      relabel(flat);
      const double polished = modularity(graph, flat, options.resolution);
      if (polished < result.quality_trace.back() - 1e-12) {
        throw std::logic_error("Leiden: polishing lowered quality");
      }
      result.quality_trace.push_back(polished);
    }
    const double q = modularity(graph, flat, options.resolution);
    const bool improved = q > best_q + 1e-12;
    if (q >= best_q) {
      best = flat;
      best_q = q;
    }
    if (!improved) break;
  }

  result.community_count = relabel(best);
  result.community_of = std::move(best);
  result.quality = modularity(graph, result.community_of, options.resolution);
  return result;
}

}  // namespace

Partition leiden_partition(const SimilarityGraph& graph, const LeidenOptions& options) {
  const std::size_t n = graph.node_count();
  if (n == 0) throw DomainError("leiden_partition: graph has no nodes");
  if (options.restarts < 1) throw DomainError("leiden_partition: restarts must be >= 1");

  Partition result;
  const double total = graph.total_weight();
  if (!(total > 0.0)) {
    result.community_of.resize(n);
    std::iota(result.community_of.begin(), result.community_of.end(), std::size_t{0});
    result.community_count = n;
    result.quality = 0.0;
    result.quality_trace = {0.0};
  } else {
    for (int r = 0; r < options.restarts; ++r) {
      LeidenOptions run = options;
      if (r > 0) run.seed = derive_seed(options.seed, static_cast<std::uint64_t>(r));
      auto p = single_run(graph, run, total);
      if (r == 0 || p.quality > result.quality) result = std::move(p);
    }
  }
  result.resolution = options.resolution;
  result.seed = options.seed;
  return result;
}

}  // namespace screenlab
