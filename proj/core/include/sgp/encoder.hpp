#pragma once

#include <map>
#include <string>
#include <vector>

#include "sgp/params.hpp"
#include "sgp/scene_graph.hpp"
#include "sgp/tape.hpp"

namespace sgp {

/// Label/token index shared by every encoder and decoder. One table row per
/// distinct surface form, so language tokens and visual labels live in one
/// embedding space (the space the skeleton matcher searches).
class LabelVocab {
 public:
  int add(const std::string& label);
  int id(const std::string& label) const;   // DataError naming OOV labels
  bool has(const std::string& label) const;
  const std::string& label(int id) const;
  int size() const { return static_cast<int>(id_to_label_.size()); }
  const std::vector<std::string>& labels() const { return id_to_label_; }

 private:
  std::vector<std::string> id_to_label_;
  std::map<std::string, int> label_to_id_;
};

/// Adjacency view used by the GCN; built from either graph form.
struct GraphView {
  int n = 0;
  std::vector<std::vector<int>> in;   // in-neighbors per node
  std::vector<std::vector<int>> out;  // out-neighbors per node

  static GraphView of(const SceneGraph& g);
  static GraphView of(const LabeledGraph& g);  // edge labels ignored
};

struct EncoderConfig {
  int dim = 64;
  int layers = 2;
};

// Parameter naming scheme: "<prefix>.l<k>.{w_self,w_in,w_out,bias}".
void create_gcn_params(num::ParameterStore& store, const std::string& prefix,
                       const EncoderConfig& cfg, uint64_t seed);

/// Embedding rows for every node label of g. Throws DataError naming the
/// first out-of-vocabulary label.
num::Var embed_nodes(const SceneGraph& g, num::Var table,
                     const LabelVocab& vocab);

std::vector<int> node_label_ids(const std::vector<SgNode>& nodes,
                                const LabelVocab& vocab);

/// Two-layer (configurable) spatial GCN: per layer each node combines its own
/// representation with the mean of in- and out-neighbor representations under
/// separate weights; ReLU on hidden layers, identity on the last. Empty
/// neighborhoods contribute zero.
num::Var gcn_forward(num::Tape& tape, const GraphView& view, num::Var feats,
                     num::ParameterStore& store, const std::string& prefix,
                     const EncoderConfig& cfg);

/// Tape-free forward for inference paths.
num::Tensor gcn_forward_raw(const GraphView& view, const num::Tensor& feats,
                            const num::ParameterStore& store,
                            const std::string& prefix, const EncoderConfig& cfg);

num::Tensor embed_nodes_raw(const SceneGraph& g, const num::Tensor& table,
                            const LabelVocab& vocab);

}  // namespace sgp
