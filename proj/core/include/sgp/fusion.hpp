#pragma once

#include <utility>
#include <vector>

#include "sgp/scene_graph.hpp"
#include "sgp/tape.hpp"

namespace sgp {

/// Where a fused node came from: an LSG node, a VSG node, or a merged pair.
struct FusedProvenance {
  int lsg_id = -1;
  int vsg_id = -1;
  bool merged() const { return lsg_id >= 0 && vsg_id >= 0; }
};

struct FusedGraph {
  SceneGraph graph;  // modality Mixed; merged nodes keep the LSG label
  std::vector<FusedProvenance> prov;
  int merged_count = 0;
};

/// Cross-modal fusing: same-kind node pairs with cosine similarity above
/// `alpha` are greedily merged in descending score order (ties by ascending
/// ids), constrained so the union stays a valid scene graph: attributes merge
/// only when their owners merged, relations only when both endpoints merged.
/// Unmerged structure is unioned with duplicate edges removed; a same-label
/// relation or attribute that becomes an exact structural duplicate after its
/// endpoints merged is also collapsed (counted as a merge).
FusedGraph align_and_fuse(const SceneGraph& lsg, const num::Tensor& lsg_reps,
                          const SceneGraph& vsg, const num::Tensor& vsg_reps,
                          double alpha);

/// Initial representation rows for the fused graph: merged nodes take the
/// elementwise mean of their two source rows.
num::Var fused_init_reps(const FusedGraph& fused, num::Var lsg_reps,
                         num::Var vsg_reps);
num::Tensor fused_init_reps_raw(const FusedGraph& fused,
                                const num::Tensor& lsg_reps,
                                const num::Tensor& vsg_reps);

}  // namespace sgp
