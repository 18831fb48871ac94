#ifndef STABSEL_MIN_COST_FLOW_HPP
#define STABSEL_MIN_COST_FLOW_HPP

#include <cstdint>
#include <limits>
#include <queue>
#include <vector>

#include "stabsel/core.hpp"

namespace stabsel {

// Successive-shortest-path min-cost flow with node potentials. All arc costs
// must be nonnegative, so Dijkstra applies from the first augmentation.
// Deterministic: arcs are relaxed in a fixed (reverse-insertion) order and
// the heap breaks distance ties by node index.
class MinCostFlow {
 public:
  explicit MinCostFlow(int n_nodes) : head_(n_nodes, -1) {}

  // Returns the arc id; query flow through it with flow_on() after solving.
  int add_arc(int from, int to, std::int64_t capacity, std::int64_t cost) {
    if (cost < 0) throw ContractError("min_cost_flow: negative arc costs not supported");
    const int id = static_cast<int>(arcs_.size());
    arcs_.push_back({to, head_[from], capacity, cost});
    head_[from] = id;
    arcs_.push_back({from, head_[to], 0, -cost});
    head_[to] = id + 1;
    return id;
  }

  // Pushes up to max_flow units from source to sink; returns (flow, cost).
  std::pair<std::int64_t, std::int64_t> solve(int source, int sink, std::int64_t max_flow) {
    const int n = static_cast<int>(head_.size());
    std::vector<std::int64_t> potential(n, 0), dist(n);
    std::vector<int> parent_arc(n);
    std::int64_t flow = 0, cost = 0;

    while (flow < max_flow) {
      constexpr std::int64_t kInf = std::numeric_limits<std::int64_t>::max() / 4;
      dist.assign(n, kInf);
      parent_arc.assign(n, -1);
      dist[source] = 0;
      using Item = std::pair<std::int64_t, int>;  // (distance, node)
      std::priority_queue<Item, std::vector<Item>, std::greater<Item>> heap;
      heap.push({0, source});
      while (!heap.empty()) {
        const auto [d, u] = heap.top();
        heap.pop();
        if (d > dist[u]) continue;
        for (int a = head_[u]; a >= 0; a = arcs_[a].next) {
          const Arc& arc = arcs_[a];
          if (arc.capacity <= 0) continue;
          const std::int64_t nd = d + arc.cost + potential[u] - potential[arc.to];
          if (nd < dist[arc.to]) {
            dist[arc.to] = nd;
            parent_arc[arc.to] = a;
            heap.push({nd, arc.to});
          }
        }
      }
      if (dist[sink] >= kInf) break;  // no augmenting path left
      for (int v = 0; v < n; ++v)
        if (dist[v] < kInf) potential[v] += dist[v];

      std::int64_t push = max_flow - flow;
      for (int v = sink; v != source;) {
        const Arc& arc = arcs_[parent_arc[v]];
        push = std::min(push, arc.capacity);
        v = arcs_[parent_arc[v] ^ 1].to;
      }
      for (int v = sink; v != source;) {
        const int a = parent_arc[v];
        arcs_[a].capacity -= push;
        arcs_[a ^ 1].capacity += push;
        cost += push * arcs_[a].cost;
        v = arcs_[a ^ 1].to;
      }
      flow += push;
    }
    return {flow, cost};
  }

  std::int64_t flow_on(int arc_id) const { return arcs_[arc_id ^ 1].capacity; }

 private:
  struct Arc {
    int to;
    int next;
    std::int64_t capacity;
    std::int64_t cost;
  };
  std::vector<Arc> arcs_;
  std::vector<int> head_;
};

}  // namespace stabsel

#endif  // STABSEL_MIN_COST_FLOW_HPP
