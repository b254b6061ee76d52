#pragma once

#include <algorithm>
#include <random>
#include <set>
#include <string>
#include <tuple>
#include <vector>

#include "sgp/scene_graph.hpp"

namespace sgp::testutil {

/// Random valid scene graph: 1-2 components, each a handful of objects with
/// attributes and (possibly parallel, distinctly labeled) relations, emitted
/// under a random id permutation so transforms see arbitrary orders.
inline SceneGraph random_valid_graph(std::mt19937_64& rng) {
  static const std::vector<std::string> obj_pool = {"dog", "cat", "ball",
                                                    "tree", "car", "haus"};
  static const std::vector<std::string> attr_pool = {"red", "big", "pale", "björn"};
  static const std::vector<std::string> rel_pool = {"chases", "on", "near", "über"};

  struct ProtoNode {
    NodeKind kind;
    std::string label;
  };
  std::vector<ProtoNode> nodes;
  std::vector<std::pair<int, int>> edges;

  auto pick = [&rng](const std::vector<std::string>& pool) {
    return pool[std::uniform_int_distribution<size_t>(0, pool.size() - 1)(rng)];
  };
  int components = 1 + static_cast<int>(rng() % 2);
  for (int c = 0; c < components; ++c) {
    int base = static_cast<int>(nodes.size());
    int n_obj = 2 + static_cast<int>(rng() % 3);
    for (int i = 0; i < n_obj; ++i) nodes.push_back({NodeKind::Object, pick(obj_pool)});
    int n_attr = static_cast<int>(rng() % 3);
    for (int i = 0; i < n_attr; ++i) {
      int owner = base + static_cast<int>(rng() % n_obj);
      nodes.push_back({NodeKind::Attribute, pick(attr_pool)});
      edges.push_back({owner, static_cast<int>(nodes.size()) - 1});
    }
    std::set<std::tuple<int, int, std::string>> used;
    auto add_relation = [&](int a, int b) {
      std::string label = pick(rel_pool);
      if (!used.insert({a, b, label}).second) return;
      nodes.push_back({NodeKind::Relation, label});
      edges.push_back({a, static_cast<int>(nodes.size()) - 1});
      edges.push_back({static_cast<int>(nodes.size()) - 1, b});
    };
    // Spanning chain keeps the component weakly connected, then extras.
    for (int i = 1; i < n_obj; ++i) add_relation(base + i - 1, base + i);
    int n_extra = static_cast<int>(rng() % 3);
    for (int i = 0; i < n_extra; ++i) {
      int a = base + static_cast<int>(rng() % n_obj);
      int b = base + static_cast<int>(rng() % n_obj);
      if (a != b) add_relation(a, b);
    }
  }

  // Random dense relabeling.
  int n = static_cast<int>(nodes.size());
  std::vector<int> perm(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) perm[static_cast<size_t>(i)] = i;
  std::shuffle(perm.begin(), perm.end(), rng);

  SceneGraph g;
  g.modality = Modality::Visual;
  g.nodes.resize(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i)
    g.nodes[static_cast<size_t>(perm[static_cast<size_t>(i)])] = {
        nodes[static_cast<size_t>(i)].kind, nodes[static_cast<size_t>(i)].label};
  for (auto [s, d] : edges)
    g.add_edge(perm[static_cast<size_t>(s)], perm[static_cast<size_t>(d)]);
  return g;
}

}  // namespace sgp::testutil
