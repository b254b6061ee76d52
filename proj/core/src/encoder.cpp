#include "sgp/encoder.hpp"

namespace sgp {

using num::Tape;
using num::Tensor;
using num::Var;

int LabelVocab::add(const std::string& label) {
  auto it = label_to_id_.find(label);
  if (it != label_to_id_.end()) return it->second;
  int id = static_cast<int>(id_to_label_.size());
  id_to_label_.push_back(label);
  label_to_id_.emplace(label, id);
  return id;
}

int LabelVocab::id(const std::string& label) const {
  auto it = label_to_id_.find(label);
  if (it == label_to_id_.end())
    throw DataError("out-of-vocabulary label: '" + label + "'");
  return it->second;
}

bool LabelVocab::has(const std::string& label) const {
  return label_to_id_.count(label) != 0;
}

const std::string& LabelVocab::label(int id) const {
  return id_to_label_.at(static_cast<size_t>(id));
}

GraphView GraphView::of(const SceneGraph& g) {
  GraphView v;
  v.n = static_cast<int>(g.nodes.size());
  v.in.resize(static_cast<size_t>(v.n));
  v.out.resize(static_cast<size_t>(v.n));
  for (auto [s, d] : g.edges) {
    v.out[static_cast<size_t>(s)].push_back(d);
    v.in[static_cast<size_t>(d)].push_back(s);
  }
  return v;
}

GraphView GraphView::of(const LabeledGraph& g) {
  GraphView v;
  v.n = static_cast<int>(g.nodes.size());
  v.in.resize(static_cast<size_t>(v.n));
  v.out.resize(static_cast<size_t>(v.n));
  for (const auto& e : g.edges) {
    v.out[static_cast<size_t>(e.src)].push_back(e.dst);
    v.in[static_cast<size_t>(e.dst)].push_back(e.src);
  }
  return v;
}

void create_gcn_params(num::ParameterStore& store, const std::string& prefix,
                       const EncoderConfig& cfg, uint64_t seed) {
  for (int l = 0; l < cfg.layers; ++l) {
    std::string base = prefix + ".l" + std::to_string(l) + ".";
    store.create_uniform(base + "w_self", {cfg.dim, cfg.dim}, cfg.dim, seed);
    store.create_uniform(base + "w_in", {cfg.dim, cfg.dim}, cfg.dim, seed);
    store.create_uniform(base + "w_out", {cfg.dim, cfg.dim}, cfg.dim, seed);
    store.create(base + "bias", {cfg.dim});
  }
}

std::vector<int> node_label_ids(const std::vector<SgNode>& nodes,
                                const LabelVocab& vocab) {
  std::vector<int> ids;
  ids.reserve(nodes.size());
  for (const auto& node : nodes) ids.push_back(vocab.id(node.label));
  return ids;
}

Var embed_nodes(const SceneGraph& g, Var table, const LabelVocab& vocab) {
  if (g.nodes.empty()) throw ContractError("embed_nodes: graph has no nodes");
  return num::rows_gather(table, node_label_ids(g.nodes, vocab));
}

Var gcn_forward(Tape& tape, const GraphView& view, Var feats,
                num::ParameterStore& store, const std::string& prefix,
                const EncoderConfig& cfg) {
  const Tensor& fv = tape.val(feats);
  if (fv.rank() != 2 || fv.dim(0) != view.n || fv.dim(1) != cfg.dim)
    throw ContractError("gcn_forward: feature matrix shape " + fv.shape_str() +
                        " does not match graph/config");
  Var h = feats;
  for (int l = 0; l < cfg.layers; ++l) {
    std::string base = prefix + ".l" + std::to_string(l) + ".";
    Var w_self = tape.param(store.get(base + "w_self"));
    Var w_in = tape.param(store.get(base + "w_in"));
    Var w_out = tape.param(store.get(base + "w_out"));
    Var bias = tape.param(store.get(base + "bias"));
    Var self_term = num::matmul_nt(h, w_self);
    Var in_term = num::matmul_nt(num::neighbor_mean(h, view.in), w_in);
    Var out_term = num::matmul_nt(num::neighbor_mean(h, view.out), w_out);
    Var z = num::add_rowwise(num::add(num::add(self_term, in_term), out_term), bias);
    // ReLU on hidden layers, identity on the final layer of a deep stack; a
    // single-layer encoder keeps the nonlinearity.
    bool relu_here = (l + 1 < cfg.layers) || cfg.layers == 1;
    h = relu_here ? num::relu(z) : z;
  }
  return h;
}

Tensor embed_nodes_raw(const SceneGraph& g, const Tensor& table,
                       const LabelVocab& vocab) {
  if (g.nodes.empty()) throw ContractError("embed_nodes: graph has no nodes");
  int d = table.dim(1);
  Tensor out({static_cast<int>(g.nodes.size()), d});
  for (size_t i = 0; i < g.nodes.size(); ++i) {
    int id = vocab.id(g.nodes[i].label);
    for (int j = 0; j < d; ++j) out.at(static_cast<int>(i), j) = table.at(id, j);
  }
  return out;
}

namespace {

Tensor apply_linear_rows(const Tensor& h, const Tensor& w) {
  int n = h.dim(0), d = h.dim(1);
  Tensor out({n, d});
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < d; ++j) {
      double s = 0.0;
      for (int k = 0; k < d; ++k) s += h.at(i, k) * w.at(j, k);
      out.at(i, j) = s;
    }
  return out;
}

Tensor neighbor_mean_raw(const Tensor& h, const std::vector<std::vector<int>>& lists) {
  int d = h.dim(1);
  Tensor out({static_cast<int>(lists.size()), d});
  for (size_t i = 0; i < lists.size(); ++i) {
    if (lists[i].empty()) continue;
    double inv = 1.0 / static_cast<double>(lists[i].size());
    for (int j : lists[i])
      for (int c = 0; c < d; ++c)
        out.at(static_cast<int>(i), c) += inv * h.at(j, c);
  }
  return out;
}

}  // namespace

Tensor gcn_forward_raw(const GraphView& view, const Tensor& feats,
                       const num::ParameterStore& store,
                       const std::string& prefix, const EncoderConfig& cfg) {
  if (feats.rank() != 2 || feats.dim(0) != view.n || feats.dim(1) != cfg.dim)
    throw ContractError("gcn_forward_raw: bad feature shape " + feats.shape_str());
  Tensor h = feats;
  for (int l = 0; l < cfg.layers; ++l) {
    std::string base = prefix + ".l" + std::to_string(l) + ".";
    const Tensor& w_self = store.get(base + "w_self").value;
    const Tensor& w_in = store.get(base + "w_in").value;
    const Tensor& w_out = store.get(base + "w_out").value;
    const Tensor& bias = store.get(base + "bias").value;
    Tensor z = apply_linear_rows(h, w_self);
    Tensor zin = apply_linear_rows(neighbor_mean_raw(h, view.in), w_in);
    Tensor zout = apply_linear_rows(neighbor_mean_raw(h, view.out), w_out);
    bool relu_here = (l + 1 < cfg.layers) || cfg.layers == 1;
    for (int i = 0; i < view.n; ++i)
      for (int j = 0; j < cfg.dim; ++j) {
        double v = z.at(i, j) + zin.at(i, j) + zout.at(i, j) + bias[j];
        z.at(i, j) = relu_here ? (v > 0.0 ? v : 0.0) : v;
      }
    h = std::move(z);
  }
  return h;
}

}  // namespace sgp
