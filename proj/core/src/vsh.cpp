#include "sgp/vsh.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <map>
#include <set>

#include <nlohmann/json.hpp>

namespace sgp {

using num::Tape;
using num::Tensor;
using num::Var;

// ---- vocabularies -----------------------------------------------------------

int VsgVocabularies::na_index_of_object(const std::string& label) const {
  for (size_t i = 0; i < objects.size(); ++i)
    if (objects[i] == label) return static_cast<int>(i);
  throw DataError("label not in object vocabulary: " + label);
}

int VsgVocabularies::na_index_of_attribute(const std::string& label) const {
  for (size_t i = 0; i < attributes.size(); ++i)
    if (attributes[i] == label)
      return static_cast<int>(objects.size() + i);
  throw DataError("label not in attribute vocabulary: " + label);
}

int VsgVocabularies::relation_index(const std::string& label) const {
  for (size_t i = 0; i < relations.size(); ++i)
    if (relations[i] == label) return static_cast<int>(i);
  throw DataError("label not in relation vocabulary: " + label);
}

VsgVocabularies build_vocabularies(const std::vector<SceneGraph>& training_vsgs) {
  if (training_vsgs.empty())
    throw DataError("build_vocabularies: need at least one training visual graph");
  VsgVocabularies v;
  std::map<std::string, NodeKind> kind_of;
  auto table_for = [&](NodeKind k) -> std::vector<std::string>& {
    switch (k) {
      case NodeKind::Object: return v.objects;
      case NodeKind::Attribute: return v.attributes;
      default: return v.relations;
    }
  };
  for (const auto& g : training_vsgs) {
    for (const auto& node : g.nodes) {
      auto it = kind_of.find(node.label);
      if (it == kind_of.end()) {
        kind_of.emplace(node.label, node.kind);
        table_for(node.kind).push_back(node.label);
      } else if (it->second != node.kind) {
        throw DataError("label '" + node.label + "' occurs as both " +
                        to_string(it->second) + " and " + to_string(node.kind));
      }
    }
  }
  return v;
}

std::string vocab_to_json(const VsgVocabularies& vocab) {
  nlohmann::ordered_json j;
  j["objects"] = vocab.objects;
  j["attributes"] = vocab.attributes;
  j["relations"] = vocab.relations;
  return j.dump(2);
}

VsgVocabularies vocab_from_json(const std::string& text) {
  try {
    auto j = nlohmann::json::parse(text);
    VsgVocabularies v;
    v.objects = j.at("objects").get<std::vector<std::string>>();
    v.attributes = j.at("attributes").get<std::vector<std::string>>();
    v.relations = j.at("relations").get<std::vector<std::string>>();
    return v;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("vocabulary file format error: ") + e.what());
  }
}

// ---- parameters ----------------------------------------------------------------

void create_augmentor_params(num::ParameterStore& store,
                             const VsgVocabularies& vocab, const VshConfig& cfg,
                             uint64_t seed) {
  int d = cfg.dim;
  int dna = vocab.na_size(), dr = static_cast<int>(vocab.relations.size()),
      dpa = vocab.pa_size();
  store.create_uniform("aug.na.w0", {d, d}, d, seed);
  store.create("aug.na.b0", {d});
  store.create_uniform("aug.na.w1", {dna, d}, d, seed);
  Tensor& nab = store.create("aug.na.b1", {dna}).value;
  nab[vocab.na_epsilon()] = cfg.epsilon_bias;

  store.create_uniform("aug.nr.w0", {d, 2 * d}, 2 * d, seed);
  store.create("aug.nr.b0", {d});
  store.create_uniform("aug.nr.w1", {dr, d}, d, seed);
  store.create("aug.nr.b1", {dr});

  store.create_uniform("aug.pa.W", {d + 1, d, d + 1}, d, seed);
  store.create_uniform("aug.pa.w0", {d, d}, d, seed);
  store.create("aug.pa.b0", {d});
  store.create_uniform("aug.pa.w1", {dpa, d}, d, seed);
  Tensor& pab = store.create("aug.pa.b1", {dpa}).value;
  pab[vocab.pa_epsilon()] = cfg.epsilon_bias;
}

// ---- skeleton sketching ----------------------------------------------------------

SceneGraph sketch_skeleton(const SceneGraph& lsg, const VsgVocabularies& vocab,
                           const LabelVocab& labels, const Tensor& table) {
  auto violations = validate(lsg);
  if (!violations.empty())
    throw DataError("sketch_skeleton: invalid language graph: " + violations.front());
  if (lsg.modality != Modality::Language)
    throw ContractError("sketch_skeleton: input must be a language graph");
  if (vocab.objects.empty())
    throw DataError("sketch_skeleton: empty object vocabulary D^o");

  int d = table.dim(1);
  auto emb_row = [&](const std::string& label) {
    int id = labels.id(label);
    Tensor r({d});
    for (int j = 0; j < d; ++j) r[j] = table.at(id, j);
    return r;
  };
  std::vector<Tensor> obj_embs;
  obj_embs.reserve(vocab.objects.size());
  for (const auto& label : vocab.objects) obj_embs.push_back(emb_row(label));

  SceneGraph out = lsg;
  out.modality = Modality::Visual;
  for (auto& node : out.nodes) {
    if (node.kind != NodeKind::Object) continue;  // copied verbatim
    Tensor e = emb_row(node.label);
    int best = 0;
    double best_s = num::raw::cosine(e, obj_embs[0]);
    for (size_t k = 1; k < obj_embs.size(); ++k) {
      double s = num::raw::cosine(e, obj_embs[k]);
      if (s > best_s) {
        best_s = s;
        best = static_cast<int>(k);
      }
    }
    node.label = vocab.objects[static_cast<size_t>(best)];
  }
  return out;
}

// ---- augmentor scoring (tape) -------------------------------------------------------

static std::vector<int> undirected_neighbors(const GraphView& view, int node) {
  std::set<int> s(view.in[static_cast<size_t>(node)].begin(),
                  view.in[static_cast<size_t>(node)].end());
  s.insert(view.out[static_cast<size_t>(node)].begin(),
           view.out[static_cast<size_t>(node)].end());
  s.erase(node);
  return {s.begin(), s.end()};
}

NodeAugmentScores node_augment_scores(Tape& tape, const LabeledGraph& lg,
                                      const GraphView& view, int node, Var reps,
                                      num::ParameterStore& store) {
  if (node < 0 || node >= static_cast<int>(lg.nodes.size()))
    throw ContractError("node_augment_scores: node id out of range");
  if (lg.nodes[static_cast<size_t>(node)].kind != NodeKind::Object)
    throw ContractError("node_augment_scores: node " + std::to_string(node) +
                        " is not an Object");

  NodeAugmentScores out;
  out.neighbors = undirected_neighbors(view, node);
  Var r_i = num::row(reps, node);
  if (out.neighbors.empty()) {
    out.h = r_i;
  } else {
    std::vector<Var> dots;
    dots.reserve(out.neighbors.size());
    for (int k : out.neighbors)
      dots.push_back(num::dot(r_i, num::row(reps, k)));
    out.alpha = num::softmax(num::stack_scalars(dots), 1.0);
    Var routed = num::vecmat(out.alpha, num::rows_gather(reps, out.neighbors));
    out.h = num::add(r_i, routed);
  }
  Var hidden = num::relu(num::add(num::matvec(tape.param(store.get("aug.na.w0")), out.h),
                                  tape.param(store.get("aug.na.b0"))));
  out.logits = num::add(num::matvec(tape.param(store.get("aug.na.w1")), hidden),
                        tape.param(store.get("aug.na.b1")));
  out.probs = num::softmax(out.logits, 1.0);
  return out;
}

RelationLabelScores node_relation_label(Tape& tape, Var h, Var r_i,
                                        num::ParameterStore& store) {
  Var x = num::concat(h, r_i);
  Var hidden = num::relu(num::add(num::matvec(tape.param(store.get("aug.nr.w0")), x),
                                  tape.param(store.get("aug.nr.b0"))));
  RelationLabelScores out;
  out.logits = num::add(num::matvec(tape.param(store.get("aug.nr.w1")), hidden),
                        tape.param(store.get("aug.nr.b1")));
  out.probs = num::softmax(out.logits, 1.0);
  return out;
}

std::vector<int> shortest_path(const GraphView& view, int from, int to) {
  if (from == to) return {from};
  std::vector<int> parent(static_cast<size_t>(view.n), -1);
  std::deque<int> queue{from};
  parent[static_cast<size_t>(from)] = from;
  while (!queue.empty()) {
    int u = queue.front();
    queue.pop_front();
    auto nbrs = undirected_neighbors(view, u);  // ascending ids: lowest-id ties
    for (int v : nbrs) {
      if (parent[static_cast<size_t>(v)] >= 0) continue;
      parent[static_cast<size_t>(v)] = u;
      if (v == to) {
        std::vector<int> path{v};
        while (path.back() != from) path.push_back(parent[static_cast<size_t>(path.back())]);
        std::reverse(path.begin(), path.end());
        return path;
      }
      queue.push_back(v);
    }
  }
  return {};
}

RelationAugmentScores relation_augment_scores(Tape& tape, const LabeledGraph& lg,
                                              const GraphView& view, int i, int j,
                                              Var reps, const std::vector<int>& path,
                                              num::ParameterStore& store) {
  if (i == j) throw ContractError("relation_augment_scores: nodes must be distinct");
  for (int x : {i, j})
    if (x < 0 || x >= static_cast<int>(lg.nodes.size()) ||
        lg.nodes[static_cast<size_t>(x)].kind == NodeKind::Relation)
      throw ContractError("relation_augment_scores: node " + std::to_string(x) +
                          " must be an existing non-Relation node");
  for (int nb : view.out[static_cast<size_t>(i)])
    if (nb == j)
      throw ContractError("relation_augment_scores: edge already exists between " +
                          std::to_string(i) + " and " + std::to_string(j));
  for (int nb : view.out[static_cast<size_t>(j)])
    if (nb == i)
      throw ContractError("relation_augment_scores: edge already exists between " +
                          std::to_string(i) + " and " + std::to_string(j));

  Var r_i = num::row(reps, i);
  Var r_j = num::row(reps, j);
  int d = tape.val(reps).dim(1);
  Var r_path = path.empty()
                   ? tape.constant(Tensor({d}))
                   : num::pool_mean(num::rows_gather(reps, path));
  Var t = num::triaffine(tape.param(store.get("aug.pa.W")), r_i, r_path);
  RelationAugmentScores out;
  out.hidden = num::sigmoid(num::mul(t, r_j));
  Var hidden2 = num::relu(
      num::add(num::matvec(tape.param(store.get("aug.pa.w0")), out.hidden),
               tape.param(store.get("aug.pa.b0"))));
  out.logits = num::add(num::matvec(tape.param(store.get("aug.pa.w1")), hidden2),
                        tape.param(store.get("aug.pa.b1")));
  out.probs = num::softmax(out.logits, 1.0);
  return out;
}

// ---- raw scoring used by completion ---------------------------------------------------

namespace {

Tensor row_of(const Tensor& m, int r) {
  int d = m.dim(1);
  Tensor out({d});
  for (int j = 0; j < d; ++j) out[j] = m.at(r, j);
  return out;
}

Tensor raw_mlp(const num::ParameterStore& store, const std::string& prefix,
               const Tensor& x) {
  Tensor h = num::raw::matvec(store.get(prefix + ".w0").value, x);
  const Tensor& b0 = store.get(prefix + ".b0").value;
  for (int64_t k = 0; k < h.size(); ++k) {
    h[k] += b0[k];
    if (h[k] < 0.0) h[k] = 0.0;
  }
  Tensor logits = num::raw::matvec(store.get(prefix + ".w1").value, h);
  const Tensor& b1 = store.get(prefix + ".b1").value;
  for (int64_t k = 0; k < logits.size(); ++k) logits[k] += b1[k];
  return logits;
}

int argmax_lowest(const Tensor& v) {
  int best = 0;
  for (int64_t i = 1; i < v.size(); ++i)
    if (v[i] > v[best]) best = static_cast<int>(i);
  return best;
}

struct RawNodeAugment {
  Tensor h;
  Tensor logits;
};

RawNodeAugment raw_node_augment(const GraphView& view, int node, const Tensor& reps,
                                const num::ParameterStore& store) {
  RawNodeAugment out;
  Tensor r_i = row_of(reps, node);
  auto nbrs = undirected_neighbors(view, node);
  if (nbrs.empty()) {
    out.h = r_i;
  } else {
    Tensor dots({static_cast<int>(nbrs.size())});
    for (size_t k = 0; k < nbrs.size(); ++k)
      dots[static_cast<int64_t>(k)] = num::raw::dot(r_i, row_of(reps, nbrs[k]));
    Tensor alpha = num::raw::softmax(dots, 1.0);
    out.h = r_i;
    for (size_t k = 0; k < nbrs.size(); ++k) {
      double a = alpha[static_cast<int64_t>(k)];
      for (int j = 0; j < reps.dim(1); ++j) out.h[j] += a * reps.at(nbrs[k], j);
    }
  }
  out.logits = raw_mlp(store, "aug.na", out.h);
  return out;
}

Tensor raw_relation_augment(const GraphView& view, int i, int j, const Tensor& reps,
                            const num::ParameterStore& store) {
  int d = reps.dim(1);
  Tensor r_i = row_of(reps, i), r_j = row_of(reps, j);
  auto path = shortest_path(view, i, j);
  Tensor r_path({d});
  if (!path.empty()) {
    double inv = 1.0 / static_cast<double>(path.size());
    for (int p : path)
      for (int c = 0; c < d; ++c) r_path[c] += inv * reps.at(p, c);
  }
  // t_b = sum_{a,c} [r_i;1]_a W[a,b,c] [r_path;1]_c ; hidden = sigmoid(t * r_j)
  const Tensor& W = store.get("aug.pa.W").value;
  Tensor hidden({d});
  for (int a = 0; a <= d; ++a) {
    double ua = a < d ? r_i[a] : 1.0;
    if (ua == 0.0) continue;
    for (int b = 0; b < d; ++b) {
      double s = 0.0;
      const double* Wab = W.data() + (static_cast<int64_t>(a) * d + b) * (d + 1);
      for (int c = 0; c < d; ++c) s += Wab[c] * r_path[c];
      s += Wab[d];
      hidden[b] += ua * s;
    }
  }
  for (int b = 0; b < d; ++b)
    hidden[b] = 1.0 / (1.0 + std::exp(-hidden[b] * r_j[b]));
  return raw_mlp(store, "aug.pa", hidden);
}

}  // namespace

SceneGraph complete_vision(const SceneGraph& skeleton,
                           const VsgVocabularies& vocab,
                           const LabelVocab& labels,
                           const num::ParameterStore& store,
                           const VshConfig& cfg) {
  auto violations = validate(skeleton);
  if (!violations.empty())
    throw DataError("complete_vision: invalid skeleton: " + violations.front());

  LabeledGraph lg = degenerate_relations(skeleton);
  const Tensor& table = store.get("emb.table").value;
  EncoderConfig enc_cfg{cfg.dim, 2};

  for (int pass = 0; pass < cfg.growth_passes; ++pass) {
    GraphView view = GraphView::of(lg);
    Tensor feats({view.n, cfg.dim});
    for (int i = 0; i < view.n; ++i) {
      int id = labels.id(lg.nodes[static_cast<size_t>(i)].label);
      for (int j = 0; j < cfg.dim; ++j) feats.at(i, j) = table.at(id, j);
    }
    Tensor reps = gcn_forward_raw(view, feats, store, "enc.vsg", enc_cfg);

    int n0 = static_cast<int>(lg.nodes.size());

    // Node augmentor: at most one attachment per existing object, id order.
    for (int i = 0; i < n0; ++i) {
      if (lg.nodes[static_cast<size_t>(i)].kind != NodeKind::Object) continue;
      RawNodeAugment na = raw_node_augment(view, i, reps, store);
      int pred = argmax_lowest(na.logits);
      if (pred == vocab.na_epsilon()) continue;
      if (vocab.is_na_object(pred)) {
        Tensor nr_in({2 * cfg.dim});
        for (int j = 0; j < cfg.dim; ++j) nr_in[j] = na.h[j];
        for (int j = 0; j < cfg.dim; ++j) nr_in[cfg.dim + j] = reps.at(i, j);
        Tensor nr_logits = raw_mlp(store, "aug.nr", nr_in);
        const std::string& rel = vocab.relations.at(
            static_cast<size_t>(argmax_lowest(nr_logits)));
        int nid = static_cast<int>(lg.nodes.size());
        lg.nodes.push_back({NodeKind::Object, vocab.objects[static_cast<size_t>(pred)]});
        lg.edges.push_back({i, nid, rel});
      } else {
        int nid = static_cast<int>(lg.nodes.size());
        lg.nodes.push_back(
            {NodeKind::Attribute,
             vocab.attributes[static_cast<size_t>(pred - vocab.objects.size())]});
        lg.edges.push_back({i, nid, kAttrEdgeLabel});
      }
    }

    // Relation augmentor: unlinked object pairs among the pre-pass nodes,
    // id order, capped. New edges run from the lower to the higher id.
    std::set<std::pair<int, int>> linked;
    for (const auto& e : lg.edges) {
      linked.insert({e.src, e.dst});
      linked.insert({e.dst, e.src});
    }
    int evaluated = 0;
    for (int i = 0; i < n0 && evaluated < cfg.max_pairs; ++i) {
      if (lg.nodes[static_cast<size_t>(i)].kind != NodeKind::Object) continue;
      for (int j = i + 1; j < n0 && evaluated < cfg.max_pairs; ++j) {
        if (lg.nodes[static_cast<size_t>(j)].kind != NodeKind::Object) continue;
        if (linked.count({i, j})) continue;
        ++evaluated;
        Tensor pa_logits = raw_relation_augment(view, i, j, reps, store);
        int pred = argmax_lowest(pa_logits);
        if (pred == vocab.pa_epsilon()) continue;
        lg.edges.push_back({i, j, vocab.relations[static_cast<size_t>(pred)]});
      }
    }
  }

  SceneGraph out = inflate_relations(lg);
  out.modality = Modality::Visual;
  auto out_violations = validate(out);
  if (!out_violations.empty())
    throw ContractError("complete_vision: output failed validation: " +
                        out_violations.front());
  return out;
}

// ---- supervision targets ------------------------------------------------------------

VshTargets extract_vsh_targets(const SceneGraph& skeleton,
                               const SceneGraph& gold_vsg,
                               const VsgVocabularies& vocab,
                               const VshConfig& cfg) {
  LabeledGraph ls = degenerate_relations(skeleton);
  LabeledGraph lgold = degenerate_relations(gold_vsg);
  int ns = static_cast<int>(ls.nodes.size());
  int ng = static_cast<int>(lgold.nodes.size());

  VshTargets t;

  // 1. Greedy one-to-one object matching by label, ascending ids.
  std::vector<int> match(static_cast<size_t>(ns), -1);
  std::vector<int> gold_matched(static_cast<size_t>(ng), -1);
  for (int i = 0; i < ns; ++i) {
    if (ls.nodes[static_cast<size_t>(i)].kind != NodeKind::Object) continue;
    for (int g = 0; g < ng; ++g) {
      if (gold_matched[static_cast<size_t>(g)] >= 0) continue;
      if (lgold.nodes[static_cast<size_t>(g)].kind != NodeKind::Object) continue;
      if (lgold.nodes[static_cast<size_t>(g)].label !=
          ls.nodes[static_cast<size_t>(i)].label)
        continue;
      match[static_cast<size_t>(i)] = g;
      gold_matched[static_cast<size_t>(g)] = i;
      break;
    }
  }
  bool any = false;
  for (int i = 0; i < ns; ++i)
    if (match[static_cast<size_t>(i)] >= 0) any = true;
  if (!any) return t;  // alignable stays false: entity sets disjoint
  t.alignable = true;

  // 2. Pair skeleton attributes with gold attributes of the matched owner in
  // id order (labels differ across modalities, counts decide the extras).
  std::vector<int> owner_s(static_cast<size_t>(ns), -1), owner_g(static_cast<size_t>(ng), -1);
  for (const auto& e : ls.edges)
    if (e.label == kAttrEdgeLabel) owner_s[static_cast<size_t>(e.dst)] = e.src;
  for (const auto& e : lgold.edges)
    if (e.label == kAttrEdgeLabel) owner_g[static_cast<size_t>(e.dst)] = e.src;
  std::vector<bool> gold_attr_used(static_cast<size_t>(ng), false);
  for (int a = 0; a < ns; ++a) {
    if (ls.nodes[static_cast<size_t>(a)].kind != NodeKind::Attribute) continue;
    int i = owner_s[static_cast<size_t>(a)];
    if (i < 0 || match[static_cast<size_t>(i)] < 0) continue;
    int gi = match[static_cast<size_t>(i)];
    for (int b = 0; b < ng; ++b) {
      if (gold_attr_used[static_cast<size_t>(b)]) continue;
      if (lgold.nodes[static_cast<size_t>(b)].kind != NodeKind::Attribute) continue;
      if (owner_g[static_cast<size_t>(b)] != gi) continue;
      gold_attr_used[static_cast<size_t>(b)] = true;
      break;
    }
  }

  // 3. Pair skeleton relation edges with gold edges over matched endpoints.
  std::vector<bool> gold_edge_used(lgold.edges.size(), false);
  for (const auto& e : ls.edges) {
    if (e.label == kAttrEdgeLabel) continue;
    int gi = match[static_cast<size_t>(e.src)], gj = match[static_cast<size_t>(e.dst)];
    if (gi < 0 || gj < 0) continue;
    for (size_t k = 0; k < lgold.edges.size(); ++k) {
      if (gold_edge_used[k] || lgold.edges[k].label == kAttrEdgeLabel) continue;
      if (lgold.edges[k].src == gi && lgold.edges[k].dst == gj) {
        gold_edge_used[k] = true;
        break;
      }
    }
  }

  // Gold adjacency for the extra-node scan.
  std::vector<std::vector<std::pair<int, std::string>>> gold_adj(
      static_cast<size_t>(ng));
  for (const auto& e : lgold.edges) {
    gold_adj[static_cast<size_t>(e.src)].push_back({e.dst, e.label});
    gold_adj[static_cast<size_t>(e.dst)].push_back({e.src, e.label});
  }
  for (auto& lst : gold_adj) std::sort(lst.begin(), lst.end());

  // 4. Node-augmentor targets, one per skeleton object.
  for (int i = 0; i < ns; ++i) {
    if (ls.nodes[static_cast<size_t>(i)].kind != NodeKind::Object) continue;
    t.object_ids.push_back(i);
    int na = vocab.na_epsilon();
    int nr = -1;
    int gi = match[static_cast<size_t>(i)];
    if (gi >= 0) {
      for (const auto& [nb, elabel] : gold_adj[static_cast<size_t>(gi)]) {
        const SgNode& gn = lgold.nodes[static_cast<size_t>(nb)];
        if (gn.kind == NodeKind::Object) {
          if (gold_matched[static_cast<size_t>(nb)] >= 0) continue;  // not extra
          na = vocab.na_index_of_object(gn.label);
          nr = vocab.relation_index(elabel);
          break;
        }
        if (gn.kind == NodeKind::Attribute) {
          if (gold_attr_used[static_cast<size_t>(nb)]) continue;
          na = vocab.na_index_of_attribute(gn.label);
          nr = -1;
          break;
        }
      }
    }
    t.na_target.push_back(na);
    t.nr_target.push_back(nr);
  }

  // 5. Relation-augmentor targets over unlinked matched object pairs.
  std::set<std::pair<int, int>> linked;
  for (const auto& e : ls.edges) {
    linked.insert({e.src, e.dst});
    linked.insert({e.dst, e.src});
  }
  int evaluated = 0;
  for (int i = 0; i < ns && evaluated < cfg.max_pairs; ++i) {
    if (ls.nodes[static_cast<size_t>(i)].kind != NodeKind::Object) continue;
    if (match[static_cast<size_t>(i)] < 0) continue;
    for (int j = i + 1; j < ns && evaluated < cfg.max_pairs; ++j) {
      if (ls.nodes[static_cast<size_t>(j)].kind != NodeKind::Object) continue;
      if (match[static_cast<size_t>(j)] < 0) continue;
      if (linked.count({i, j})) continue;
      ++evaluated;
      int gi = match[static_cast<size_t>(i)], gj = match[static_cast<size_t>(j)];
      int target = vocab.pa_epsilon();
      for (size_t k = 0; k < lgold.edges.size(); ++k) {
        if (gold_edge_used[k] || lgold.edges[k].label == kAttrEdgeLabel) continue;
        bool fwd = lgold.edges[k].src == gi && lgold.edges[k].dst == gj;
        bool rev = lgold.edges[k].src == gj && lgold.edges[k].dst == gi;
        if (fwd || rev) {
          target = vocab.relation_index(lgold.edges[k].label);
          gold_edge_used[k] = true;
          break;
        }
      }
      t.pairs.push_back({i, j, target});
    }
  }
  return t;
}

VshLoss vsh_loss(Tape& tape, const SceneGraph& gold_lsg,
                 const SceneGraph& gold_vsg, const VsgVocabularies& vocab,
                 const LabelVocab& labels, Var table,
                 num::ParameterStore& store, const EncoderConfig& enc_cfg,
                 const VshConfig& cfg) {
  SceneGraph skeleton =
      sketch_skeleton(gold_lsg, vocab, labels, tape.val(table));
  VshTargets targets = extract_vsh_targets(skeleton, gold_vsg, vocab, cfg);
  VshLoss out;
  if (!targets.alignable) {
    out.skipped = true;
    return out;
  }

  LabeledGraph lg = degenerate_relations(skeleton);
  GraphView view = GraphView::of(lg);
  Var feats = num::rows_gather(table, node_label_ids(lg.nodes, labels));
  Var reps = gcn_forward(tape, view, feats, store, "enc.vsg", enc_cfg);

  std::vector<Var> terms;
  for (size_t k = 0; k < targets.object_ids.size(); ++k) {
    int i = targets.object_ids[k];
    NodeAugmentScores na = node_augment_scores(tape, lg, view, i, reps, store);
    terms.push_back(num::neg(num::pick(num::log_softmax(na.logits), targets.na_target[k])));
    ++out.na_terms;
    if (targets.nr_target[k] >= 0) {
      RelationLabelScores nr =
          node_relation_label(tape, na.h, num::row(reps, i), store);
      terms.push_back(num::neg(num::pick(num::log_softmax(nr.logits), targets.nr_target[k])));
      ++out.nr_terms;
    }
  }
  for (const auto& pt : targets.pairs) {
    auto path = shortest_path(view, pt.i, pt.j);
    RelationAugmentScores ra =
        relation_augment_scores(tape, lg, view, pt.i, pt.j, reps, path, store);
    terms.push_back(num::neg(num::pick(num::log_softmax(ra.logits), pt.pa_index)));
    ++out.pa_terms;
  }

  out.loss = num::sum(num::stack_scalars(terms));
  return out;
}

}  // namespace sgp
