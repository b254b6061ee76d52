#include <random>

#include <doctest.h>

#include "sgp/encoder.hpp"
#include "sgp/fdcheck.hpp"

using namespace sgp;
using namespace sgp::num;

TEST_SUITE_BEGIN("sg_encoder");

namespace {

LabelVocab small_vocab() {
  LabelVocab v;
  for (const char* s : {"dog", "cat", "red", "chases"}) v.add(s);
  return v;
}

}  // namespace

TEST_CASE("embed_nodes: identical labels share rows, OOV is named") {
  LabelVocab vocab = small_vocab();
  ParameterStore store;
  Param& table = store.create_uniform("emb.table", {vocab.size(), 4}, 4, 1);

  SceneGraph g;
  g.add_node(NodeKind::Object, "dog");
  g.add_node(NodeKind::Object, "dog");
  Tape t;
  const Tensor& rows = t.val(embed_nodes(g, t.param(table), vocab));
  for (int j = 0; j < 4; ++j) CHECK(rows.at(0, j) == rows.at(1, j));

  SceneGraph bad;
  bad.add_node(NodeKind::Object, "zzz");
  Tape t2;
  try {
    embed_nodes(bad, t2.param(table), vocab);
    FAIL("expected DataError");
  } catch (const DataError& e) {
    CHECK(std::string(e.what()).find("zzz") != std::string::npos);
  }
}

TEST_CASE("single-layer gcn on an isolated node is ReLU of its input") {
  ParameterStore store;
  EncoderConfig cfg{2, 1};
  Param& w_self = store.create("enc.x.l0.w_self", {2, 2});
  w_self.value.at(0, 0) = 1.0;
  w_self.value.at(1, 1) = 1.0;
  store.create("enc.x.l0.w_in", {2, 2});
  store.create("enc.x.l0.w_out", {2, 2});
  store.create("enc.x.l0.bias", {2});

  GraphView view;
  view.n = 1;
  view.in.resize(1);
  view.out.resize(1);
  Tape t;
  Var feats = t.constant(Tensor::mat(1, 2, {-1.5, 2.5}));
  const Tensor& out = t.val(gcn_forward(t, view, feats, store, "enc.x", cfg));
  CHECK(out.at(0, 0) == 0.0);   // ReLU clips the negative coordinate
  CHECK(out.at(0, 1) == 2.5);
}

TEST_CASE("hand-computed two-node single-layer case") {
  ParameterStore store;
  EncoderConfig cfg{2, 1};
  Param& ws = store.create("enc.h.l0.w_self", {2, 2});
  Param& wi = store.create("enc.h.l0.w_in", {2, 2});
  Param& wo = store.create("enc.h.l0.w_out", {2, 2});
  Param& b = store.create("enc.h.l0.bias", {2});
  // Fixed small weights.
  double WS[4] = {0.2, -0.1, 0.05, 0.3};
  double WI[4] = {0.5, 0.0, -0.25, 0.1};
  double WO[4] = {-0.3, 0.2, 0.15, 0.4};
  for (int k = 0; k < 4; ++k) {
    ws.value[k] = WS[k];
    wi.value[k] = WI[k];
    wo.value[k] = WO[k];
  }
  b.value[0] = 0.01;
  b.value[1] = -0.02;

  GraphView view;  // edge 0 -> 1
  view.n = 2;
  view.in = {{}, {0}};
  view.out = {{1}, {}};
  double h0[2] = {0.7, -0.4}, h1[2] = {-0.2, 0.9};

  Tape t;
  Var feats = t.constant(Tensor::mat(2, 2, {h0[0], h0[1], h1[0], h1[1]}));
  const Tensor& out = t.val(gcn_forward(t, view, feats, store, "enc.h", cfg));

  // Manual arithmetic, written independently of the implementation.
  auto apply = [](const double* w, const double* x, int r) {
    return w[2 * r + 0] * x[0] + w[2 * r + 1] * x[1];
  };
  for (int r = 0; r < 2; ++r) {
    double z0 = apply(WS, h0, r) + apply(WO, h1, r) + (r == 0 ? 0.01 : -0.02);
    double z1 = apply(WS, h1, r) + apply(WI, h0, r) + (r == 0 ? 0.01 : -0.02);
    CHECK(out.at(0, r) == doctest::Approx(z0 > 0 ? z0 : 0).epsilon(1e-12));
    CHECK(out.at(1, r) == doctest::Approx(z1 > 0 ? z1 : 0).epsilon(1e-12));
  }
}

namespace {

struct EncFixture {
  LabelVocab vocab = small_vocab();
  ParameterStore store;
  EncoderConfig cfg{4, 2};
  EncFixture() {
    store.create_uniform("emb.table", {vocab.size(), 4}, 4, 3);
    create_gcn_params(store, "enc.t", cfg, 3);
  }
  Tensor run(const SceneGraph& g) {
    Tape t;
    Var feats = embed_nodes(g, t.param(store.get("emb.table")), vocab);
    return t.val(gcn_forward(t, GraphView::of(g), feats, store, "enc.t", cfg));
  }
};

SceneGraph chase_graph() {
  SceneGraph g;
  int dog = g.add_node(NodeKind::Object, "dog");
  int chases = g.add_node(NodeKind::Relation, "chases");
  int cat = g.add_node(NodeKind::Object, "cat");
  int red = g.add_node(NodeKind::Attribute, "red");
  g.add_edge(dog, chases);
  g.add_edge(chases, cat);
  g.add_edge(dog, red);
  return g;
}

}  // namespace

TEST_CASE("gcn is permutation equivariant") {
  EncFixture fx;
  SceneGraph g = chase_graph();
  // Relabel ids with the permutation p (node i -> p[i]).
  std::vector<int> p = {2, 0, 3, 1};
  SceneGraph pg;
  pg.modality = g.modality;
  pg.nodes.resize(g.nodes.size());
  for (size_t i = 0; i < g.nodes.size(); ++i) pg.nodes[static_cast<size_t>(p[i])] = g.nodes[i];
  for (auto [s, d] : g.edges)
    pg.add_edge(p[static_cast<size_t>(s)], p[static_cast<size_t>(d)]);

  Tensor a = fx.run(g);
  Tensor b = fx.run(pg);
  // Degrees here are <= 2, so the aggregation sums are exactly commutative.
  for (size_t i = 0; i < g.nodes.size(); ++i)
    for (int j = 0; j < 4; ++j)
      CHECK(a.at(static_cast<int>(i), j) == b.at(p[i], j));
}

TEST_CASE("L-layer locality: labels beyond L hops cannot move a representation") {
  EncFixture fx;
  // Path: o0 -r0- o1 -r1- o2 -r2- o3 (seven nodes).
  auto build = [&](const std::string& far_label) {
    SceneGraph g;
    int o0 = g.add_node(NodeKind::Object, "dog");
    int r0 = g.add_node(NodeKind::Relation, "chases");
    int o1 = g.add_node(NodeKind::Object, "cat");
    int r1 = g.add_node(NodeKind::Relation, "chases");
    int o2 = g.add_node(NodeKind::Object, "dog");
    int r2 = g.add_node(NodeKind::Relation, "chases");
    int o3 = g.add_node(NodeKind::Object, far_label);
    g.add_edge(o0, r0);
    g.add_edge(r0, o1);
    g.add_edge(o1, r1);
    g.add_edge(r1, o2);
    g.add_edge(o2, r2);
    g.add_edge(r2, o3);
    return g;
  };
  Tensor a = fx.run(build("dog"));
  Tensor b = fx.run(build("cat"));
  // Node 0 is six hops from node 6; with two layers its row is bit-identical.
  for (int j = 0; j < 4; ++j) {
    CHECK(a.at(0, j) == b.at(0, j));
    CHECK(a.at(1, j) == b.at(1, j));
  }
  // The far node itself must differ (its own label changed).
  bool differs = false;
  for (int j = 0; j < 4; ++j)
    if (a.at(6, j) != b.at(6, j)) differs = true;
  CHECK(differs);
}

TEST_CASE("encoder parameters pass finite differences through a readout") {
  EncFixture fx;
  SceneGraph g = chase_graph();
  auto f = [&](ParameterStore& s) {
    Tape t;
    Var feats = embed_nodes(g, t.param(s.get("emb.table")), fx.vocab);
    Var reps = gcn_forward(t, GraphView::of(g), feats, s, "enc.t", fx.cfg);
    Var loss = num::sum(num::mul(reps, reps));
    t.backward(loss);
    return t.val(loss).item();
  };
  FdReport rep = finite_difference_check(f, fx.store);
  CAPTURE(rep.worst_param);
  CHECK_FALSE(rep.aborted);
  CHECK(rep.max_rel_error < 1e-4);
}

TEST_SUITE_END();
