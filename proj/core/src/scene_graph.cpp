#include "sgp/scene_graph.hpp"

#include <algorithm>
#include <functional>
#include <map>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

namespace sgp {

using nlohmann::json;
using nlohmann::ordered_json;

std::string to_string(Modality m) {
  switch (m) {
    case Modality::Language: return "language";
    case Modality::Visual: return "visual";
    case Modality::Mixed: return "mixed";
  }
  return "?";
}

std::string to_string(NodeKind k) {
  switch (k) {
    case NodeKind::Object: return "object";
    case NodeKind::Attribute: return "attribute";
    case NodeKind::Relation: return "relation";
  }
  return "?";
}

static Modality modality_from(const std::string& s) {
  if (s == "language") return Modality::Language;
  if (s == "visual") return Modality::Visual;
  if (s == "mixed") return Modality::Mixed;
  throw DataError("unknown modality: " + s);
}

static NodeKind kind_from(const std::string& s) {
  if (s == "object") return NodeKind::Object;
  if (s == "attribute") return NodeKind::Attribute;
  if (s == "relation") return NodeKind::Relation;
  throw DataError("unknown node kind: " + s);
}

int SceneGraph::add_node(NodeKind kind, std::string label) {
  nodes.push_back({kind, std::move(label)});
  return static_cast<int>(nodes.size()) - 1;
}

void SceneGraph::add_edge(int src, int dst) { edges.emplace_back(src, dst); }

int SceneGraph::node_count(NodeKind kind) const {
  int n = 0;
  for (const auto& node : nodes)
    if (node.kind == kind) ++n;
  return n;
}

// ---- validation -------------------------------------------------------------

std::vector<std::string> validate(const SceneGraph& g, int max_components) {
  std::vector<std::string> out;
  int n = static_cast<int>(g.nodes.size());

  bool has_object = false;
  for (const auto& node : g.nodes)
    if (node.kind == NodeKind::Object) has_object = true;
  if (!has_object) out.push_back("no Object node");

  std::set<std::pair<int, int>> seen;
  bool ids_ok = true;
  for (size_t e = 0; e < g.edges.size(); ++e) {
    auto [s, d] = g.edges[e];
    if (s < 0 || s >= n || d < 0 || d >= n) {
      out.push_back("edge " + std::to_string(e) + " references missing node id");
      ids_ok = false;
      continue;
    }
    if (s == d) out.push_back("self-loop at node " + std::to_string(s));
    if (!seen.insert({s, d}).second)
      out.push_back("duplicate edge (" + std::to_string(s) + "," +
                    std::to_string(d) + ")");
  }
  if (!ids_ok) return out;  // degree checks would misfire on dangling edges

  std::vector<int> indeg(n, 0), outdeg(n, 0);
  std::vector<int> in_from(n, -1), out_to(n, -1);
  for (auto [s, d] : g.edges) {
    ++outdeg[s];
    ++indeg[d];
    in_from[d] = s;
    out_to[s] = d;
  }

  for (int i = 0; i < n; ++i) {
    const SgNode& node = g.nodes[i];
    if (node.kind == NodeKind::Relation) {
      if (indeg[i] != 1 || in_from[i] < 0 ||
          g.nodes[in_from[i]].kind != NodeKind::Object)
        out.push_back("relation node " + std::to_string(i) +
                      " must have exactly one incoming edge from an Object");
      if (outdeg[i] != 1 || out_to[i] < 0 ||
          g.nodes[out_to[i]].kind != NodeKind::Object)
        out.push_back("relation node " + std::to_string(i) +
                      " must have exactly one outgoing edge to an Object");
    } else if (node.kind == NodeKind::Attribute) {
      if (indeg[i] != 1 || in_from[i] < 0 ||
          g.nodes[in_from[i]].kind != NodeKind::Object)
        out.push_back("attribute node " + std::to_string(i) +
                      " must have exactly one incoming edge from an Object");
      if (outdeg[i] != 0)
        out.push_back("attribute node " + std::to_string(i) +
                      " must have out-degree 0");
    }
  }

  for (size_t e = 0; e < g.edges.size(); ++e) {
    auto [s, d] = g.edges[e];
    if (g.nodes[s].kind == NodeKind::Object &&
        g.nodes[d].kind == NodeKind::Object)
      out.push_back("direct object-object edge (" + std::to_string(s) + "," +
                    std::to_string(d) + "); objects link through relation nodes");
  }

  // Parallel relation nodes between one object pair need distinct labels.
  std::map<std::pair<int, int>, std::set<std::string>> rel_labels;
  for (int i = 0; i < n; ++i) {
    if (g.nodes[i].kind != NodeKind::Relation) continue;
    if (in_from[i] < 0 || out_to[i] < 0) continue;
    auto key = std::make_pair(in_from[i], out_to[i]);
    if (!rel_labels[key].insert(g.nodes[i].label).second)
      out.push_back("duplicate relation label '" + g.nodes[i].label +
                    "' between objects " + std::to_string(key.first) + " and " +
                    std::to_string(key.second));
  }

  if (n > 0) {
    // Weak connectivity: union-find over undirected edges.
    std::vector<int> parent(n);
    for (int i = 0; i < n; ++i) parent[i] = i;
    std::function<int(int)> find = [&](int x) {
      while (parent[x] != x) x = parent[x] = parent[parent[x]];
      return x;
    };
    for (auto [s, d] : g.edges) parent[find(s)] = find(d);
    std::map<int, bool> comp_has_object;
    for (int i = 0; i < n; ++i) {
      int r = find(i);
      comp_has_object[r] = comp_has_object[r] || g.nodes[i].kind == NodeKind::Object;
    }
    if (static_cast<int>(comp_has_object.size()) > max_components)
      out.push_back("graph has " + std::to_string(comp_has_object.size()) +
                    " components, more than the allowed " +
                    std::to_string(max_components));
    for (auto& [root, has_obj] : comp_has_object)
      if (!has_obj)
        out.push_back("component containing node " + std::to_string(root) +
                      " has no Object node");
  }

  return out;
}

bool is_valid(const SceneGraph& g, int max_components) {
  return validate(g, max_components).empty();
}

// ---- degeneration / inflation --------------------------------------------------

LabeledGraph degenerate_relations(const SceneGraph& g) {
  auto violations = validate(g);
  if (!violations.empty())
    throw DataError("degenerate_relations: invalid graph: " + violations.front());

  int n = static_cast<int>(g.nodes.size());
  std::vector<int> remap(n, -1);
  LabeledGraph lg;
  lg.modality = g.modality;
  for (int i = 0; i < n; ++i) {
    if (g.nodes[i].kind == NodeKind::Relation) continue;
    remap[i] = static_cast<int>(lg.nodes.size());
    lg.nodes.push_back(g.nodes[i]);
  }

  std::vector<int> out_to(n, -1);
  for (auto [s, d] : g.edges)
    if (g.nodes[s].kind == NodeKind::Relation) out_to[s] = d;
  for (auto [s, d] : g.edges) {
    if (g.nodes[s].kind == NodeKind::Relation) continue;  // handled at the relation
    if (g.nodes[d].kind == NodeKind::Relation) {
      lg.edges.push_back({remap[s], remap[out_to[d]], g.nodes[d].label});
    } else {
      lg.edges.push_back({remap[s], remap[d], kAttrEdgeLabel});
    }
  }
  return lg;
}

SceneGraph inflate_relations(const LabeledGraph& lg) {
  SceneGraph g;
  g.modality = lg.modality;
  for (const auto& node : lg.nodes) {
    if (node.kind == NodeKind::Relation)
      throw DataError("inflate_relations: relation node in degenerate form");
    g.nodes.push_back(node);
  }
  for (const auto& e : lg.edges) {
    if (e.label == kAttrEdgeLabel) {
      if (e.dst < 0 || e.dst >= static_cast<int>(g.nodes.size()) ||
          g.nodes[e.dst].kind != NodeKind::Attribute)
        throw DataError("inflate_relations: 'attr' edge must point at an Attribute");
      g.add_edge(e.src, e.dst);
    } else {
      int rid = g.add_node(NodeKind::Relation, e.label);
      g.add_edge(e.src, rid);
      g.add_edge(rid, e.dst);
    }
  }
  return g;
}

// ---- statistics ------------------------------------------------------------------

static KindGrowth growth(int before, int after) {
  KindGrowth k;
  k.before = before;
  k.after = after;
  if (before > 0)
    k.rate = (static_cast<double>(after) - before) / static_cast<double>(before);
  return k;
}

GrowthReport graph_stats(const SceneGraph& before, const SceneGraph& after) {
  GrowthReport r;
  r.objects = growth(before.node_count(NodeKind::Object),
                     after.node_count(NodeKind::Object));
  r.attributes = growth(before.node_count(NodeKind::Attribute),
                        after.node_count(NodeKind::Attribute));
  r.relations = growth(before.node_count(NodeKind::Relation),
                       after.node_count(NodeKind::Relation));
  return r;
}

GrowthReport corpus_stats(const std::vector<SceneGraph>& before,
                          const std::vector<SceneGraph>& after) {
  if (before.size() != after.size())
    throw ContractError("corpus_stats: corpora sizes differ");
  int ob = 0, oa = 0, ab = 0, aa = 0, rb = 0, ra = 0;
  for (size_t i = 0; i < before.size(); ++i) {
    ob += before[i].node_count(NodeKind::Object);
    oa += after[i].node_count(NodeKind::Object);
    ab += before[i].node_count(NodeKind::Attribute);
    aa += after[i].node_count(NodeKind::Attribute);
    rb += before[i].node_count(NodeKind::Relation);
    ra += after[i].node_count(NodeKind::Relation);
  }
  GrowthReport r;
  r.objects = growth(ob, oa);
  r.attributes = growth(ab, aa);
  r.relations = growth(rb, ra);
  return r;
}

static std::string rate_str(const KindGrowth& k) {
  if (!k.rate) return "undefined";
  std::ostringstream os;
  os.precision(4);
  os << std::fixed << *k.rate;
  return os.str();
}

std::string GrowthReport::to_text() const {
  std::ostringstream os;
  os << "object:    " << objects.before << " -> " << objects.after
     << "  rate " << rate_str(objects) << "\n"
     << "attribute: " << attributes.before << " -> " << attributes.after
     << "  rate " << rate_str(attributes) << "\n"
     << "relation:  " << relations.before << " -> " << relations.after
     << "  rate " << rate_str(relations) << "\n";
  return os.str();
}

// ---- serialization ----------------------------------------------------------------

std::string serialize(const SceneGraph& g) {
  ordered_json j;
  j["modality"] = to_string(g.modality);
  j["nodes"] = ordered_json::array();
  for (size_t i = 0; i < g.nodes.size(); ++i) {
    ordered_json node;
    node["id"] = i;
    node["kind"] = to_string(g.nodes[i].kind);
    node["label"] = g.nodes[i].label;
    j["nodes"].push_back(std::move(node));
  }
  auto edges = g.edges;
  std::sort(edges.begin(), edges.end());
  j["edges"] = ordered_json::array();
  for (auto [s, d] : edges) j["edges"].push_back(ordered_json::array({s, d}));
  return j.dump();
}

SceneGraph deserialize(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw DataError("scene graph parse error at byte " + std::to_string(e.byte) +
                    ": " + e.what());
  }
  try {
    SceneGraph g;
    g.modality = modality_from(j.at("modality").get<std::string>());
    const auto& nodes = j.at("nodes");
    g.nodes.resize(nodes.size());
    for (const auto& node : nodes) {
      int id = node.at("id").get<int>();
      if (id < 0 || id >= static_cast<int>(g.nodes.size()))
        throw DataError("node id out of range: " + std::to_string(id));
      g.nodes[id] = {kind_from(node.at("kind").get<std::string>()),
                     node.at("label").get<std::string>()};
    }
    for (const auto& e : j.at("edges")) {
      if (!e.is_array() || e.size() != 2)
        throw DataError("edge entries must be [src, dst] pairs");
      g.add_edge(e[0].get<int>(), e[1].get<int>());
    }
    return g;
  } catch (const json::exception& e) {
    throw DataError(std::string("scene graph format error: ") + e.what());
  }
}

// ---- isomorphism -------------------------------------------------------------------

bool isomorphic(const SceneGraph& a, const SceneGraph& b) {
  int n = static_cast<int>(a.nodes.size());
  if (n != static_cast<int>(b.nodes.size())) return false;
  if (a.edges.size() != b.edges.size()) return false;

  auto signature = [](const SceneGraph& g) {
    std::multiset<std::string> sig;
    for (const auto& node : g.nodes) sig.insert(to_string(node.kind) + ":" + node.label);
    return sig;
  };
  if (signature(a) != signature(b)) return false;

  std::vector<int> indeg_a(n, 0), outdeg_a(n, 0), indeg_b(n, 0), outdeg_b(n, 0);
  for (auto [s, d] : a.edges) { ++outdeg_a[s]; ++indeg_a[d]; }
  for (auto [s, d] : b.edges) { ++outdeg_b[s]; ++indeg_b[d]; }

  std::set<std::pair<int, int>> eb(b.edges.begin(), b.edges.end());
  std::vector<int> map(n, -1);
  std::vector<bool> used(n, false);

  std::function<bool(int)> assign = [&](int i) -> bool {
    if (i == n) {
      for (auto [s, d] : a.edges)
        if (!eb.count({map[s], map[d]})) return false;
      return true;
    }
    for (int j = 0; j < n; ++j) {
      if (used[j]) continue;
      if (a.nodes[i].kind != b.nodes[j].kind) continue;
      if (a.nodes[i].label != b.nodes[j].label) continue;
      if (indeg_a[i] != indeg_b[j] || outdeg_a[i] != outdeg_b[j]) continue;
      bool ok = true;  // check edges among already-mapped nodes
      for (auto [s, d] : a.edges) {
        if (s == i && map[d] >= 0 && !eb.count({j, map[d]})) ok = false;
        if (d == i && map[s] >= 0 && !eb.count({map[s], j})) ok = false;
        if (!ok) break;
      }
      if (!ok) continue;
      map[i] = j;
      used[j] = true;
      if (assign(i + 1)) return true;
      map[i] = -1;
      used[j] = false;
    }
    return false;
  };
  return assign(0);
}

}  // namespace sgp
