#include "sgp/fusion.hpp"

#include <algorithm>
#include <map>
#include <set>
#include <tuple>

namespace sgp {

using num::Tensor;
using num::Var;

namespace {

struct Candidate {
  double score;
  int i, j;  // lsg id, vsg id
};

Tensor row_of(const Tensor& m, int r) {
  int d = m.dim(1);
  Tensor out({d});
  for (int j = 0; j < d; ++j) out[j] = m.at(r, j);
  return out;
}

// Owner object of an attribute, subject/object of a relation.
struct Structure {
  std::vector<int> in_from, out_to;
};

Structure structure_of(const SceneGraph& g) {
  Structure s;
  s.in_from.assign(g.nodes.size(), -1);
  s.out_to.assign(g.nodes.size(), -1);
  for (auto [a, b] : g.edges) {
    s.in_from[static_cast<size_t>(b)] = a;
    s.out_to[static_cast<size_t>(a)] = b;
  }
  return s;
}

}  // namespace

FusedGraph align_and_fuse(const SceneGraph& lsg, const Tensor& lsg_reps,
                          const SceneGraph& vsg, const Tensor& vsg_reps,
                          double alpha) {
  int nl = static_cast<int>(lsg.nodes.size());
  int nv = static_cast<int>(vsg.nodes.size());
  if (lsg_reps.rank() != 2 || vsg_reps.rank() != 2 || lsg_reps.dim(0) != nl ||
      vsg_reps.dim(0) != nv || lsg_reps.dim(1) != vsg_reps.dim(1))
    throw ContractError("align_and_fuse: representation shapes do not match graphs");

  Structure sl = structure_of(lsg), sv = structure_of(vsg);

  // Same-kind candidates above the threshold, by kind.
  std::map<NodeKind, std::vector<Candidate>> cands;
  for (int i = 0; i < nl; ++i)
    for (int j = 0; j < nv; ++j) {
      if (lsg.nodes[static_cast<size_t>(i)].kind != vsg.nodes[static_cast<size_t>(j)].kind)
        continue;
      double s = num::raw::cosine(row_of(lsg_reps, i), row_of(vsg_reps, j));
      if (s > alpha)
        cands[lsg.nodes[static_cast<size_t>(i)].kind].push_back({s, i, j});
    }
  for (auto& [_, list] : cands)
    std::sort(list.begin(), list.end(), [](const Candidate& a, const Candidate& b) {
      return std::tie(b.score, a.i, a.j) < std::tie(a.score, b.i, b.j);
    });

  std::vector<int> match_l(static_cast<size_t>(nl), -1);
  std::vector<int> match_v(static_cast<size_t>(nv), -1);
  auto both_free = [&](const Candidate& c) {
    return match_l[static_cast<size_t>(c.i)] < 0 && match_v[static_cast<size_t>(c.j)] < 0;
  };
  auto accept = [&](const Candidate& c) {
    match_l[static_cast<size_t>(c.i)] = c.j;
    match_v[static_cast<size_t>(c.j)] = c.i;
  };
  auto merged_pair = [&](int li, int vj) {
    return li >= 0 && vj >= 0 && match_l[static_cast<size_t>(li)] == vj;
  };

  // Objects first: attribute and relation merges depend on them.
  for (const auto& c : cands[NodeKind::Object])
    if (both_free(c)) accept(c);
  for (const auto& c : cands[NodeKind::Attribute]) {
    if (!both_free(c)) continue;
    if (merged_pair(sl.in_from[static_cast<size_t>(c.i)],
                    sv.in_from[static_cast<size_t>(c.j)]))
      accept(c);
  }
  for (const auto& c : cands[NodeKind::Relation]) {
    if (!both_free(c)) continue;
    if (merged_pair(sl.in_from[static_cast<size_t>(c.i)],
                    sv.in_from[static_cast<size_t>(c.j)]) &&
        merged_pair(sl.out_to[static_cast<size_t>(c.i)],
                    sv.out_to[static_cast<size_t>(c.j)]))
      accept(c);
  }

  FusedGraph out;
  out.graph.modality = Modality::Mixed;

  std::vector<int> fused_of_l(static_cast<size_t>(nl), -1);
  std::vector<int> fused_of_v(static_cast<size_t>(nv), -1);
  for (int i = 0; i < nl; ++i) {
    fused_of_l[static_cast<size_t>(i)] =
        out.graph.add_node(lsg.nodes[static_cast<size_t>(i)].kind,
                           lsg.nodes[static_cast<size_t>(i)].label);
    out.prov.push_back({i, match_l[static_cast<size_t>(i)]});
    if (match_l[static_cast<size_t>(i)] >= 0) {
      fused_of_v[static_cast<size_t>(match_l[static_cast<size_t>(i)])] =
          fused_of_l[static_cast<size_t>(i)];
      ++out.merged_count;
    }
  }

  // Structural duplicates: an unmatched VSG relation/attribute whose endpoints
  // merged and whose label already exists there collapses into the LSG copy.
  for (int j = 0; j < nv; ++j) {
    if (match_v[static_cast<size_t>(j)] >= 0) continue;
    const SgNode& node = vsg.nodes[static_cast<size_t>(j)];
    if (node.kind == NodeKind::Relation) {
      int subj = sv.in_from[static_cast<size_t>(j)], obj = sv.out_to[static_cast<size_t>(j)];
      if (subj >= 0 && obj >= 0 && match_v[static_cast<size_t>(subj)] >= 0 &&
          match_v[static_cast<size_t>(obj)] >= 0) {
        int ls_subj = match_v[static_cast<size_t>(subj)];
        for (int i = 0; i < nl; ++i) {
          if (lsg.nodes[static_cast<size_t>(i)].kind != NodeKind::Relation) continue;
          if (lsg.nodes[static_cast<size_t>(i)].label != node.label) continue;
          if (sl.in_from[static_cast<size_t>(i)] == ls_subj &&
              sl.out_to[static_cast<size_t>(i)] == match_v[static_cast<size_t>(obj)]) {
            fused_of_v[static_cast<size_t>(j)] = fused_of_l[static_cast<size_t>(i)];
            ++out.merged_count;
            out.prov[static_cast<size_t>(fused_of_l[static_cast<size_t>(i)])].vsg_id = j;
            break;
          }
        }
      }
    } else if (node.kind == NodeKind::Attribute) {
      int owner = sv.in_from[static_cast<size_t>(j)];
      if (owner >= 0 && match_v[static_cast<size_t>(owner)] >= 0) {
        int ls_owner = match_v[static_cast<size_t>(owner)];
        for (int i = 0; i < nl; ++i) {
          if (lsg.nodes[static_cast<size_t>(i)].kind != NodeKind::Attribute) continue;
          if (lsg.nodes[static_cast<size_t>(i)].label != node.label) continue;
          if (sl.in_from[static_cast<size_t>(i)] == ls_owner) {
            fused_of_v[static_cast<size_t>(j)] = fused_of_l[static_cast<size_t>(i)];
            ++out.merged_count;
            out.prov[static_cast<size_t>(fused_of_l[static_cast<size_t>(i)])].vsg_id = j;
            break;
          }
        }
      }
    }
  }

  for (int j = 0; j < nv; ++j) {
    if (fused_of_v[static_cast<size_t>(j)] >= 0) continue;
    fused_of_v[static_cast<size_t>(j)] =
        out.graph.add_node(vsg.nodes[static_cast<size_t>(j)].kind,
                           vsg.nodes[static_cast<size_t>(j)].label);
    out.prov.push_back({-1, j});
  }

  std::set<std::pair<int, int>> edge_set;
  for (auto [s, d] : lsg.edges)
    edge_set.insert({fused_of_l[static_cast<size_t>(s)], fused_of_l[static_cast<size_t>(d)]});
  for (auto [s, d] : vsg.edges)
    edge_set.insert({fused_of_v[static_cast<size_t>(s)], fused_of_v[static_cast<size_t>(d)]});
  for (auto [s, d] : edge_set) out.graph.add_edge(s, d);

  auto violations = validate(out.graph, 6);
  if (!violations.empty())
    throw ContractError("align_and_fuse: fused graph failed validation: " +
                        violations.front());
  return out;
}

Var fused_init_reps(const FusedGraph& fused, Var lsg_reps, Var vsg_reps) {
  std::vector<Var> rows;
  rows.reserve(fused.prov.size());
  for (const auto& p : fused.prov) {
    if (p.merged()) {
      rows.push_back(num::scale(
          num::add(num::row(lsg_reps, p.lsg_id), num::row(vsg_reps, p.vsg_id)), 0.5));
    } else if (p.lsg_id >= 0) {
      rows.push_back(num::row(lsg_reps, p.lsg_id));
    } else {
      rows.push_back(num::row(vsg_reps, p.vsg_id));
    }
  }
  return num::stack_rows(rows);
}

Tensor fused_init_reps_raw(const FusedGraph& fused, const Tensor& lsg_reps,
                           const Tensor& vsg_reps) {
  int d = lsg_reps.dim(1);
  Tensor out({static_cast<int>(fused.prov.size()), d});
  for (size_t r = 0; r < fused.prov.size(); ++r) {
    const auto& p = fused.prov[r];
    for (int j = 0; j < d; ++j) {
      double v;
      if (p.merged())
        v = 0.5 * (lsg_reps.at(p.lsg_id, j) + vsg_reps.at(p.vsg_id, j));
      else if (p.lsg_id >= 0)
        v = lsg_reps.at(p.lsg_id, j);
      else
        v = vsg_reps.at(p.vsg_id, j);
      out.at(static_cast<int>(r), j) = v;
    }
  }
  return out;
}

}  // namespace sgp
