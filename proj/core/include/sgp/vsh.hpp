#pragma once

#include <optional>
#include <string>
#include <vector>

#include "sgp/encoder.hpp"
#include "sgp/params.hpp"
#include "sgp/scene_graph.hpp"
#include "sgp/tape.hpp"

namespace sgp {

/// Visual label tables built from training visual graphs only. Each label
/// belongs to exactly one table; the derived classifier vocabularies append a
/// reserved dummy class (epsilon, "attach/add nothing") which never appears
/// as a graph label.
struct VsgVocabularies {
  std::vector<std::string> objects;     // D^o, first-occurrence order
  std::vector<std::string> attributes;  // D^a
  std::vector<std::string> relations;   // D^r

  // D^na = D^o + D^a + {epsilon}; D^pa = D^r + {epsilon}.
  int na_size() const { return static_cast<int>(objects.size() + attributes.size()) + 1; }
  int pa_size() const { return static_cast<int>(relations.size()) + 1; }
  int na_epsilon() const { return na_size() - 1; }
  int pa_epsilon() const { return pa_size() - 1; }

  int na_index_of_object(const std::string& label) const;
  int na_index_of_attribute(const std::string& label) const;
  int relation_index(const std::string& label) const;
  bool is_na_object(int index) const {
    return index < static_cast<int>(objects.size());
  }
};

VsgVocabularies build_vocabularies(const std::vector<SceneGraph>& training_vsgs);

std::string vocab_to_json(const VsgVocabularies& vocab);
VsgVocabularies vocab_from_json(const std::string& text);

struct VshConfig {
  int dim = 64;
  int growth_passes = 1;   // completion passes; one new node per object each
  int max_pairs = 500;     // relation-augmentor pair traversal cap per graph
  double epsilon_bias = 2.0;  // initial logit bias of the dummy class
};

/// Creates the augmentor parameter family under "aug.": the node-augmentor
/// head over D^na, the relation-label head over D^r, and the triaffine tensor
/// W of shape (d+1, d, d+1) with its head over D^pa. The epsilon logits are
/// biased positive so an untrained model hallucinates nothing.
void create_augmentor_params(num::ParameterStore& store,
                             const VsgVocabularies& vocab, const VshConfig& cfg,
                             uint64_t seed);

/// Step 1 (sketching skeleton): copies the topology of the language graph and
/// relabels each Object with the nearest visual object label by cosine
/// similarity in the shared embedding space (lowest index wins ties).
/// Attribute and Relation nodes are copied verbatim.
SceneGraph sketch_skeleton(const SceneGraph& lsg, const VsgVocabularies& vocab,
                           const LabelVocab& labels, const num::Tensor& table);

struct NodeAugmentScores {
  num::Var probs;   // distribution over D^na
  num::Var logits;
  num::Var h;       // routed representation h^na_i
  std::vector<int> neighbors;
  num::Var alpha;   // attention over neighbors; invalid when isolated
};

/// Node augmentor: 1-hop attention routing over the (degenerate) skeleton,
/// then a feed-forward head over D^na. `node` must be an Object.
NodeAugmentScores node_augment_scores(num::Tape& tape, const LabeledGraph& lg,
                                      const GraphView& view, int node,
                                      num::Var reps,
                                      num::ParameterStore& store);

struct RelationLabelScores {
  num::Var probs;  // distribution over D^r
  num::Var logits;
};

/// Relation label for an accepted new object: head over D^r (no epsilon; an
/// accepted object must get a real relation).
RelationLabelScores node_relation_label(num::Tape& tape, num::Var h,
                                        num::Var r_i,
                                        num::ParameterStore& store);

struct RelationAugmentScores {
  num::Var probs;  // distribution over D^pa
  num::Var logits;
  num::Var hidden;
};

/// Relation augmentor: triaffine contraction of [r_i;1], r_j and the pooled
/// path representation [r_path;1] against W, sigmoid, head, softmax over
/// D^pa. `path` holds the node ids of the connecting path (empty when the
/// pair is disconnected; the path representation is then a zero vector).
/// The pair must be distinct non-Relation nodes with no existing edge.
RelationAugmentScores relation_augment_scores(num::Tape& tape,
                                              const LabeledGraph& lg,
                                              const GraphView& view, int i,
                                              int j, num::Var reps,
                                              const std::vector<int>& path,
                                              num::ParameterStore& store);

/// Shortest undirected path between two nodes (BFS, ascending-id tie-break),
/// endpoints included; empty when disconnected.
std::vector<int> shortest_path(const GraphView& view, int from, int to);

/// Step 2 (completing vision): one deterministic pass that degenerates the
/// skeleton, encodes it with the visual GCN, attaches at most one argmax
/// prediction per Object, adds argmax relation edges between unlinked object
/// pairs, and inflates back to node form. Output always validates; node and
/// edge counts never decrease.
SceneGraph complete_vision(const SceneGraph& skeleton,
                           const VsgVocabularies& vocab,
                           const LabelVocab& labels,
                           const num::ParameterStore& store,
                           const VshConfig& cfg);

/// Teacher-forced supervision targets from diffing the sketched skeleton of
/// the gold language graph against the gold visual graph.
struct VshTargets {
  bool alignable = false;
  std::vector<int> na_target;          // per skeleton object, index into D^na
  std::vector<int> nr_target;          // parallel: D^r index or -1
  std::vector<int> object_ids;         // skeleton (degenerate) node ids
  struct PairTarget {
    int i, j;
    int pa_index;
  };
  std::vector<PairTarget> pairs;
};

VshTargets extract_vsh_targets(const SceneGraph& skeleton,
                               const SceneGraph& gold_vsg,
                               const VsgVocabularies& vocab,
                               const VshConfig& cfg);

struct VshLoss {
  bool skipped = false;  // unalignable gold pair
  num::Var loss;         // L_VSH = L_NA + L_PA
  int na_terms = 0, nr_terms = 0, pa_terms = 0;
};

/// L_VSH: negative log-likelihood of the extracted targets under the node and
/// relation augmentors, differentiable through the visual encoder and shared
/// embeddings.
VshLoss vsh_loss(num::Tape& tape, const SceneGraph& gold_lsg,
                 const SceneGraph& gold_vsg, const VsgVocabularies& vocab,
                 const LabelVocab& labels, num::Var table,
                 num::ParameterStore& store, const EncoderConfig& enc_cfg,
                 const VshConfig& cfg);

}  // namespace sgp
