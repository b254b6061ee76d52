#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "sgp/errors.hpp"

namespace sgp {

enum class Modality { Language, Visual, Mixed };
enum class NodeKind { Object, Attribute, Relation };

std::string to_string(Modality m);
std::string to_string(NodeKind k);

struct SgNode {
  NodeKind kind;
  std::string label;
};

/// Typed directed scene graph. Node ids are the dense indices 0..n-1 into
/// `nodes`. The same carrier represents language, visual, skeleton,
/// hallucinated, and fused graphs; `modality` tags which.
struct SceneGraph {
  Modality modality = Modality::Language;
  std::vector<SgNode> nodes;
  std::vector<std::pair<int, int>> edges;

  int add_node(NodeKind kind, std::string label);
  void add_edge(int src, int dst);
  int node_count(NodeKind kind) const;
};

/// Degenerate form: relation nodes rewritten as labeled edges. Attribute
/// attachment uses the reserved label "attr", which is excluded from relation
/// vocabularies.
inline constexpr const char* kAttrEdgeLabel = "attr";

struct LabeledEdge {
  int src;
  int dst;
  std::string label;
};

struct LabeledGraph {
  Modality modality = Modality::Language;
  std::vector<SgNode> nodes;  // Object and Attribute nodes only
  std::vector<LabeledEdge> edges;
};

/// Structural validation. Returns one message per violated invariant (with
/// the offending node/edge ids); an empty list means the graph is valid.
/// `max_components` bounds the number of weakly connected components, each of
/// which must contain at least one Object node.
std::vector<std::string> validate(const SceneGraph& g, int max_components = 3);
bool is_valid(const SceneGraph& g, int max_components = 3);

/// Rewrites every O -> R -> O' relation as a labeled edge (O, O', label(R))
/// and every O -> A as (O, A, "attr"). Object/Attribute node order is
/// preserved; ids are remapped densely. Throws DataError on invalid input.
LabeledGraph degenerate_relations(const SceneGraph& g);

/// Exact inverse of degenerate_relations up to node-id renaming. Labeled
/// edges other than "attr" become Relation nodes appended in edge order.
/// Throws DataError on an "attr" edge whose dst is not an Attribute node.
SceneGraph inflate_relations(const LabeledGraph& lg);

struct KindGrowth {
  int before = 0;
  int after = 0;
  /// (after - before) / before; empty when before == 0 (undefined, not inf).
  std::optional<double> rate;
};

struct GrowthReport {
  KindGrowth objects, attributes, relations;
  std::string to_text() const;
};

GrowthReport graph_stats(const SceneGraph& before, const SceneGraph& after);
/// Aggregate growth over parallel corpora (sums of per-kind counts).
GrowthReport corpus_stats(const std::vector<SceneGraph>& before,
                          const std::vector<SceneGraph>& after);

/// Canonical UTF-8 JSON serialization: ids ascending, edges lexicographic,
/// stable field order. serialize(deserialize(serialize(g))) == serialize(g).
std::string serialize(const SceneGraph& g);
/// Parses the canonical format; throws DataError with a byte position on
/// malformed input.
SceneGraph deserialize(const std::string& text);

/// Exact isomorphism test respecting node kinds and labels (backtracking
/// with degree/label pruning; intended for desk-scale graphs).
bool isomorphic(const SceneGraph& a, const SceneGraph& b);

}  // namespace sgp
