#pragma once

#include <cstddef>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "skiphash/skip_hash.hpp"

namespace skiphash::verify {

struct structural_report {
  bool composition_equality = true;
  bool bidir_links = true;
  bool tower_contiguity = true;
  bool sortedness = true;
  bool rtime_write_once = true;
  bool bucket_chains = true;
  bool no_inflight_ranges = true;
  /// Logically deleted nodes still linked into the list.
  std::size_t leak_count = 0;
  std::size_t stitched_nodes = 0;
  std::size_t present_nodes = 0;
  std::size_t map_entries = 0;

  bool ok() const noexcept {
    return composition_equality && bidir_links && tower_contiguity && sortedness && rtime_write_once &&
           bucket_chains && no_inflight_ranges;
  }

  std::vector<std::string> failures() const {
    std::vector<std::string> f;
    if (!composition_equality) f.emplace_back("composition_equality");
    if (!bidir_links) f.emplace_back("bidir_links");
    if (!tower_contiguity) f.emplace_back("tower_contiguity");
    if (!sortedness) f.emplace_back("sortedness");
    if (!rtime_write_once) f.emplace_back("rtime_write_once");
    if (!bucket_chains) f.emplace_back("bucket_chains");
    if (!no_inflight_ranges) f.emplace_back("no_inflight_ranges");
    return f;
  }
};

/// Walk the whole structure with direct loads. Only meaningful at
/// quiescence: no live transactions, no in-flight range queries, removal
/// buffers flushed.
template <class Map>
structural_report scan_structure(const Map& m) {
  using node = typename Map::node;
  structural_report rep;
  const auto& sl = m.list();
  node* head = sl.head();
  node* tail = sl.tail();
  const unsigned levels = sl.max_level();

  // Per-level links.
  std::vector<std::vector<node*>> level_nodes(levels);
  for (unsigned l = 0; l < levels; ++l) {
    node* prev = head;
    std::size_t guard = 0;
    for (node* n = head->at(l).succ.load_direct(); n != tail; n = n->at(l).succ.load_direct()) {
      if (!n || n->kind != node_kind::item || ++guard > (std::size_t{1} << 40)) {
        rep.bidir_links = false;
        break;
      }
      if (n->at(l).pred.load_direct() != prev) rep.bidir_links = false;
      if (n->height <= l) rep.tower_contiguity = false;
      level_nodes[l].push_back(n);
      prev = n;
    }
    if (tail->at(l).pred.load_direct() != prev) rep.bidir_links = false;
  }

  // Every node at level l > 0 must appear at level l - 1 in the same
  // relative order, and every node must appear at all levels below its height.
  for (unsigned l = 1; l < levels; ++l) {
    const auto& lower = level_nodes[l - 1];
    std::size_t j = 0;
    for (node* n : level_nodes[l]) {
      while (j < lower.size() && lower[j] != n) ++j;
      if (j == lower.size()) {
        rep.tower_contiguity = false;
        break;
      }
      ++j;
    }
  }
  {
    std::unordered_map<const node*, unsigned> appearances;
    for (const auto& lvl : level_nodes)
      for (node* n : lvl) ++appearances[n];
    for (node* n : level_nodes[0])
      if (appearances[n] != n->height) rep.tower_contiguity = false;
  }

  // Bottom level: order, logical state, times.
  const auto& bottom = level_nodes[0];
  rep.stitched_nodes = bottom.size();
  std::unordered_map<const node*, bool> present;
  for (std::size_t i = 0; i < bottom.size(); ++i) {
    node* n = bottom[i];
    version r = n->r_time.load_direct();
    bool live = r == no_time;
    present[n] = live;
    if (live)
      ++rep.present_nodes;
    else
      ++rep.leak_count;
    if (!live && r < n->i_time) rep.rtime_write_once = false;
    if (i + 1 < bottom.size()) {
      node* next = bottom[i + 1];
      if (sl.node_less(next, n)) rep.sortedness = false;
      // Equal keys: only the last of a run may be present.
      if (!sl.node_less(n, next) && live) rep.sortedness = false;
    }
  }
  if (m.r_time_rewrites() != 0) rep.rtime_write_once = false;

  // Hash map against the list.
  const auto& hm = m.map();
  std::size_t mapped_present = 0;
  std::unordered_set<const node*> targets;
  hm.for_each_direct([&](std::size_t bucket, const auto& e) {
    ++rep.map_entries;
    if (hm.bucket_index(e.key) != bucket) rep.bucket_chains = false;
    if (!targets.insert(e.target).second) rep.bucket_chains = false;
    auto it = present.find(e.target);
    if (it == present.end() || !it->second) {
      rep.composition_equality = false;
      return;
    }
    if (!(!sl.key_less(e.key, e.target->key) && !sl.key_less(e.target->key, e.key))) rep.composition_equality = false;
    ++mapped_present;
  });
  for (std::size_t i = 0; i < hm.bucket_count(); ++i) {
    for (auto* e = hm.bucket_at(i).head.load_direct(); e; e = e->next.load_direct())
      for (auto* earlier = hm.bucket_at(i).head.load_direct(); earlier != e; earlier = earlier->next.load_direct())
        if (!sl.key_less(earlier->key, e->key) && !sl.key_less(e->key, earlier->key)) rep.bucket_chains = false;
  }
  if (mapped_present != rep.present_nodes || rep.map_entries != rep.present_nodes) rep.composition_equality = false;

  rep.no_inflight_ranges = m.rqc().in_flight_direct() == 0;
  return rep;
}

}  // namespace skiphash::verify
