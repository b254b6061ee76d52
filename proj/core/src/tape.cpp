#include "sgp/tape.hpp"

#include <algorithm>
#include <cmath>

namespace sgp::num {

namespace {

void check_same_tape(Var a, Var b, const char* op) {
  if (a.tape == nullptr || b.tape == nullptr || a.tape != b.tape)
    throw ContractError(std::string(op) + ": operands must live on one tape");
}

[[noreturn]] void shape_fail(const char* op, const Tensor& a) {
  throw ContractError(std::string(op) + ": bad operand shape " + a.shape_str());
}

[[noreturn]] void shape_fail2(const char* op, const Tensor& a, const Tensor& b) {
  throw ContractError(std::string(op) + ": incompatible shapes " + a.shape_str() +
                      " and " + b.shape_str());
}

}  // namespace

int Tape::push(Tensor value, bool needs_grad, std::function<void(Tape&)> back) {
  if (backward_run_)
    throw ContractError("tape already consumed by backward(); build a new tape");
  Node n;
  n.value = std::move(value);
  n.needs_grad = needs_grad;
  n.back = std::move(back);
  nodes_.push_back(std::move(n));
  return static_cast<int>(nodes_.size()) - 1;
}

Var Tape::constant(Tensor t) {
  t.ensure_finite("constant leaf");
  int id = push(std::move(t), false, nullptr);
  return Var{this, id};
}

Var Tape::input(Tensor t) {
  t.ensure_finite("input leaf");
  t.requires_grad = true;
  int id = push(std::move(t), true, nullptr);
  return Var{this, id};
}

Var Tape::param(Param& p) {
  p.value.ensure_finite("param leaf " + p.name);
  Tensor copy = p.value;
  copy.requires_grad = true;
  int id = push(std::move(copy), true, nullptr);
  nodes_.back().bound = &p;
  return Var{this, id};
}

const Tensor& Tape::val(Var v) const {
  return nodes_.at(static_cast<size_t>(v.id)).value;
}

Tensor& Tape::grad_buf(int id) {
  Node& n = nodes_.at(static_cast<size_t>(id));
  if (!n.grad_alloc) {
    n.grad = Tensor(n.value.shape());
    n.grad_alloc = true;
  }
  return n.grad;
}

const Tensor& Tape::grad(Var v) { return grad_buf(v.id); }

void Tape::backward(Var loss) {
  if (backward_run_)
    throw ContractError("backward() already run on this tape");
  if (loss.tape != this) throw ContractError("backward(): loss from another tape");
  const Tensor& lv = val(loss);
  if (lv.rank() != 0)
    throw ContractError("backward() requires a scalar loss, got shape " + lv.shape_str());
  backward_run_ = true;
  grad_buf(loss.id)[0] = 1.0;
  for (int id = loss.id; id >= 0; --id) {
    Node& n = nodes_[static_cast<size_t>(id)];
    if (!n.needs_grad || !n.grad_alloc) continue;
    if (n.back) n.back(*this);
    if (n.bound) {
      Tensor& g = n.grad;
      for (int64_t i = 0; i < g.size(); ++i) n.bound->grad[i] += g[i];
    }
  }
}

// ---- helpers for op bodies --------------------------------------------------

namespace {

Var make_op(Tape* tape, Tensor out, std::vector<int> parents,
            std::function<void(Tape&)> back, const char* op) {
  out.ensure_finite(op);
  bool needs = false;
  for (int p : parents)
    if (tape->needs(p)) needs = true;
  int id = tape->push(std::move(out), needs, needs ? std::move(back) : nullptr);
  return Var{tape, id};
}

}  // namespace

// ---- elementwise ------------------------------------------------------------

Var add(Var a, Var b) {
  check_same_tape(a, b, "add");
  const Tensor& av = a.tape->val(a);
  const Tensor& bv = b.tape->val(b);
  if (!av.same_shape(bv)) shape_fail2("add", av, bv);
  Tensor out = av;
  for (int64_t i = 0; i < out.size(); ++i) out[i] += bv[i];
  int out_id = a.tape->size();
  auto back = [a, b, out_id](Tape& t) {
    const Tensor& g = t.grad_buf(out_id);
    if (t.needs(a.id)) {
      Tensor& ga = t.grad_buf(a.id);
      for (int64_t i = 0; i < g.size(); ++i) ga[i] += g[i];
    }
    if (t.needs(b.id)) {
      Tensor& gb = t.grad_buf(b.id);
      for (int64_t i = 0; i < g.size(); ++i) gb[i] += g[i];
    }
  };
  return make_op(a.tape, std::move(out), {a.id, b.id}, back, "add");
}

Var sub(Var a, Var b) {
  check_same_tape(a, b, "sub");
  const Tensor& av = a.tape->val(a);
  const Tensor& bv = b.tape->val(b);
  if (!av.same_shape(bv)) shape_fail2("sub", av, bv);
  Tensor out = av;
  for (int64_t i = 0; i < out.size(); ++i) out[i] -= bv[i];
  int out_id = a.tape->size();
  auto back = [a, b, out_id](Tape& t) {
    const Tensor& g = t.grad_buf(out_id);
    if (t.needs(a.id)) {
      Tensor& ga = t.grad_buf(a.id);
      for (int64_t i = 0; i < g.size(); ++i) ga[i] += g[i];
    }
    if (t.needs(b.id)) {
      Tensor& gb = t.grad_buf(b.id);
      for (int64_t i = 0; i < g.size(); ++i) gb[i] -= g[i];
    }
  };
  return make_op(a.tape, std::move(out), {a.id, b.id}, back, "sub");
}

Var mul(Var a, Var b) {
  check_same_tape(a, b, "mul");
  const Tensor& av = a.tape->val(a);
  const Tensor& bv = b.tape->val(b);
  if (!av.same_shape(bv)) shape_fail2("mul", av, bv);
  Tensor out = av;
  for (int64_t i = 0; i < out.size(); ++i) out[i] *= bv[i];
  int out_id = a.tape->size();
  auto back = [a, b, out_id](Tape& t) {
    const Tensor& g = t.grad_buf(out_id);
    const Tensor& av2 = t.val(a);
    const Tensor& bv2 = t.val(b);
    if (t.needs(a.id)) {
      Tensor& ga = t.grad_buf(a.id);
      for (int64_t i = 0; i < g.size(); ++i) ga[i] += g[i] * bv2[i];
    }
    if (t.needs(b.id)) {
      Tensor& gb = t.grad_buf(b.id);
      for (int64_t i = 0; i < g.size(); ++i) gb[i] += g[i] * av2[i];
    }
  };
  return make_op(a.tape, std::move(out), {a.id, b.id}, back, "mul");
}

Var scale(Var a, double k) {
  Tensor out = a.tape->val(a);
  for (int64_t i = 0; i < out.size(); ++i) out[i] *= k;
  int out_id = a.tape->size();
  auto back = [a, k, out_id](Tape& t) {
    const Tensor& g = t.grad_buf(out_id);
    if (!t.needs(a.id)) return;
    Tensor& ga = t.grad_buf(a.id);
    for (int64_t i = 0; i < g.size(); ++i) ga[i] += k * g[i];
  };
  return make_op(a.tape, std::move(out), {a.id}, back, "scale");
}

Var neg(Var a) { return scale(a, -1.0); }

// ---- linear algebra ----------------------------------------------------------

Var matmul_nt(Var a, Var b) {
  check_same_tape(a, b, "matmul_nt");
  const Tensor& av = a.tape->val(a);
  const Tensor& bv = b.tape->val(b);
  if (av.rank() != 2 || bv.rank() != 2 || av.dim(1) != bv.dim(1))
    shape_fail2("matmul_nt", av, bv);
  int m = av.dim(0), k = av.dim(1), n = bv.dim(0);
  Tensor out({m, n});
  for (int i = 0; i < m; ++i) {
    const double* ar = av.data() + static_cast<int64_t>(i) * k;
    for (int j = 0; j < n; ++j) {
      const double* br = bv.data() + static_cast<int64_t>(j) * k;
      double s = 0.0;
      for (int x = 0; x < k; ++x) s += ar[x] * br[x];
      out.at(i, j) = s;
    }
  }
  int out_id = a.tape->size();
  auto back = [a, b, m, n, k, out_id](Tape& t) {
    const Tensor& g = t.grad_buf(out_id);
    const Tensor& av2 = t.val(a);
    const Tensor& bv2 = t.val(b);
    if (t.needs(a.id)) {
      Tensor& ga = t.grad_buf(a.id);  // dA = G B  (m,n)x(n,k)
      for (int i = 0; i < m; ++i)
        for (int j = 0; j < n; ++j) {
          double gij = g.at(i, j);
          if (gij == 0.0) continue;
          const double* br = bv2.data() + static_cast<int64_t>(j) * k;
          double* gr = ga.data() + static_cast<int64_t>(i) * k;
          for (int x = 0; x < k; ++x) gr[x] += gij * br[x];
        }
    }
    if (t.needs(b.id)) {
      Tensor& gb = t.grad_buf(b.id);  // dB = G^T A  (n,m)x(m,k)
      for (int i = 0; i < m; ++i)
        for (int j = 0; j < n; ++j) {
          double gij = g.at(i, j);
          if (gij == 0.0) continue;
          const double* ar = av2.data() + static_cast<int64_t>(i) * k;
          double* gr = gb.data() + static_cast<int64_t>(j) * k;
          for (int x = 0; x < k; ++x) gr[x] += gij * ar[x];
        }
    }
  };
  return make_op(a.tape, std::move(out), {a.id, b.id}, back, "matmul_nt");
}

Var matvec(Var w, Var x) {
  check_same_tape(w, x, "matvec");
  const Tensor& wv = w.tape->val(w);
  const Tensor& xv = x.tape->val(x);
  if (wv.rank() != 2 || xv.rank() != 1 || wv.dim(1) != xv.dim(0))
    shape_fail2("matvec", wv, xv);
  int m = wv.dim(0), n = wv.dim(1);
  Tensor out({m});
  for (int i = 0; i < m; ++i) {
    const double* wr = wv.data() + static_cast<int64_t>(i) * n;
    double s = 0.0;
    for (int j = 0; j < n; ++j) s += wr[j] * xv[j];
    out[i] = s;
  }
  int out_id = w.tape->size();
  auto back = [w, x, m, n, out_id](Tape& t) {
    const Tensor& g = t.grad_buf(out_id);
    const Tensor& wv2 = t.val(w);
    const Tensor& xv2 = t.val(x);
    if (t.needs(w.id)) {
      Tensor& gw = t.grad_buf(w.id);
      for (int i = 0; i < m; ++i) {
        double gi = g[i];
        if (gi == 0.0) continue;
        double* gr = gw.data() + static_cast<int64_t>(i) * n;
        for (int j = 0; j < n; ++j) gr[j] += gi * xv2[j];
      }
    }
    if (t.needs(x.id)) {
      Tensor& gx = t.grad_buf(x.id);
      for (int i = 0; i < m; ++i) {
        double gi = g[i];
        if (gi == 0.0) continue;
        const double* wr = wv2.data() + static_cast<int64_t>(i) * n;
        for (int j = 0; j < n; ++j) gx[j] += gi * wr[j];
      }
    }
  };
  return make_op(w.tape, std::move(out), {w.id, x.id}, back, "matvec");
}

Var vecmat(Var x, Var a) {
  check_same_tape(x, a, "vecmat");
  const Tensor& xv = x.tape->val(x);
  const Tensor& av = a.tape->val(a);
  if (xv.rank() != 1 || av.rank() != 2 || xv.dim(0) != av.dim(0))
    shape_fail2("vecmat", xv, av);
  int m = av.dim(0), n = av.dim(1);
  Tensor out({n});
  for (int i = 0; i < m; ++i) {
    double xi = xv[i];
    if (xi == 0.0) continue;
    const double* ar = av.data() + static_cast<int64_t>(i) * n;
    for (int j = 0; j < n; ++j) out[j] += xi * ar[j];
  }
  int out_id = x.tape->size();
  auto back = [x, a, m, n, out_id](Tape& t) {
    const Tensor& g = t.grad_buf(out_id);
    const Tensor& xv2 = t.val(x);
    const Tensor& av2 = t.val(a);
    if (t.needs(x.id)) {
      Tensor& gx = t.grad_buf(x.id);
      for (int i = 0; i < m; ++i) {
        const double* ar = av2.data() + static_cast<int64_t>(i) * n;
        double s = 0.0;
        for (int j = 0; j < n; ++j) s += ar[j] * g[j];
        gx[i] += s;
      }
    }
    if (t.needs(a.id)) {
      Tensor& ga = t.grad_buf(a.id);
      for (int i = 0; i < m; ++i) {
        double xi = xv2[i];
        if (xi == 0.0) continue;
        double* gr = ga.data() + static_cast<int64_t>(i) * n;
        for (int j = 0; j < n; ++j) gr[j] += xi * g[j];
      }
    }
  };
  return make_op(x.tape, std::move(out), {x.id, a.id}, back, "vecmat");
}

// ---- nonlinearities -----------------------------------------------------------

Var relu(Var a) {
  Tensor out = a.tape->val(a);
  for (int64_t i = 0; i < out.size(); ++i) out[i] = out[i] > 0.0 ? out[i] : 0.0;
  int out_id = a.tape->size();
  auto back = [a, out_id](Tape& t) {
    if (!t.needs(a.id)) return;
    const Tensor& g = t.grad_buf(out_id);
    const Tensor& av2 = t.val(a);
    Tensor& ga = t.grad_buf(a.id);
    for (int64_t i = 0; i < g.size(); ++i)
      if (av2[i] > 0.0) ga[i] += g[i];
  };
  return make_op(a.tape, std::move(out), {a.id}, back, "relu");
}

Var sigmoid(Var a) {
  Tensor out = a.tape->val(a);
  for (int64_t i = 0; i < out.size(); ++i) out[i] = 1.0 / (1.0 + std::exp(-out[i]));
  int out_id = a.tape->size();
  auto back = [a, out_id](Tape& t) {
    if (!t.needs(a.id)) return;
    const Tensor& g = t.grad_buf(out_id);
    const Tensor& y = t.node(out_id).value;
    Tensor& ga = t.grad_buf(a.id);
    for (int64_t i = 0; i < g.size(); ++i) ga[i] += g[i] * y[i] * (1.0 - y[i]);
  };
  return make_op(a.tape, std::move(out), {a.id}, back, "sigmoid");
}

Var tanh_op(Var a) {
  Tensor out = a.tape->val(a);
  for (int64_t i = 0; i < out.size(); ++i) out[i] = std::tanh(out[i]);
  int out_id = a.tape->size();
  auto back = [a, out_id](Tape& t) {
    if (!t.needs(a.id)) return;
    const Tensor& g = t.grad_buf(out_id);
    const Tensor& y = t.node(out_id).value;
    Tensor& ga = t.grad_buf(a.id);
    for (int64_t i = 0; i < g.size(); ++i) ga[i] += g[i] * (1.0 - y[i] * y[i]);
  };
  return make_op(a.tape, std::move(out), {a.id}, back, "tanh");
}

// ---- reductions and indexing ----------------------------------------------------

Var sum(Var a) {
  const Tensor& av = a.tape->val(a);
  double s = 0.0;
  for (int64_t i = 0; i < av.size(); ++i) s += av[i];
  int out_id = a.tape->size();
  auto back = [a, out_id](Tape& t) {
    if (!t.needs(a.id)) return;
    double g = t.grad_buf(out_id)[0];
    Tensor& ga = t.grad_buf(a.id);
    for (int64_t i = 0; i < ga.size(); ++i) ga[i] += g;
  };
  return make_op(a.tape, Tensor::scalar(s), {a.id}, back, "sum");
}

Var dot(Var u, Var v) {
  check_same_tape(u, v, "dot");
  const Tensor& uv = u.tape->val(u);
  const Tensor& vv = v.tape->val(v);
  if (uv.rank() != 1 || !uv.same_shape(vv)) shape_fail2("dot", uv, vv);
  double s = 0.0;
  for (int64_t i = 0; i < uv.size(); ++i) s += uv[i] * vv[i];
  int out_id = u.tape->size();
  auto back = [u, v, out_id](Tape& t) {
    double g = t.grad_buf(out_id)[0];
    const Tensor& uv2 = t.val(u);
    const Tensor& vv2 = t.val(v);
    if (t.needs(u.id)) {
      Tensor& gu = t.grad_buf(u.id);
      for (int64_t i = 0; i < gu.size(); ++i) gu[i] += g * vv2[i];
    }
    if (t.needs(v.id)) {
      Tensor& gv = t.grad_buf(v.id);
      for (int64_t i = 0; i < gv.size(); ++i) gv[i] += g * uv2[i];
    }
  };
  return make_op(u.tape, Tensor::scalar(s), {u.id, v.id}, back, "dot");
}

Var pick(Var v, int index) {
  const Tensor& vv = v.tape->val(v);
  if (vv.rank() != 1) shape_fail("pick", vv);
  if (index < 0 || index >= vv.dim(0)) throw ContractError("pick: index out of range");
  int out_id = v.tape->size();
  auto back = [v, index, out_id](Tape& t) {
    if (!t.needs(v.id)) return;
    t.grad_buf(v.id)[index] += t.grad_buf(out_id)[0];
  };
  return make_op(v.tape, Tensor::scalar(vv[index]), {v.id}, back, "pick");
}

Var row(Var m, int r) {
  const Tensor& mv = m.tape->val(m);
  if (mv.rank() != 2) shape_fail("row", mv);
  if (r < 0 || r >= mv.dim(0)) throw ContractError("row: index out of range");
  int d = mv.dim(1);
  Tensor out({d});
  for (int j = 0; j < d; ++j) out[j] = mv.at(r, j);
  int out_id = m.tape->size();
  auto back = [m, r, d, out_id](Tape& t) {
    if (!t.needs(m.id)) return;
    const Tensor& g = t.grad_buf(out_id);
    Tensor& gm = t.grad_buf(m.id);
    for (int j = 0; j < d; ++j) gm.at(r, j) += g[j];
  };
  return make_op(m.tape, std::move(out), {m.id}, back, "row");
}

Var rows_gather(Var m, std::vector<int> ids) {
  const Tensor& mv = m.tape->val(m);
  if (mv.rank() != 2) shape_fail("rows_gather", mv);
  if (ids.empty()) throw ContractError("rows_gather: empty index list");
  int d = mv.dim(1);
  Tensor out({static_cast<int>(ids.size()), d});
  for (size_t r = 0; r < ids.size(); ++r) {
    int src = ids[r];
    if (src < 0 || src >= mv.dim(0))
      throw ContractError("rows_gather: index out of range");
    for (int j = 0; j < d; ++j) out.at(static_cast<int>(r), j) = mv.at(src, j);
  }
  int out_id = m.tape->size();
  auto back = [m, ids = std::move(ids), d, out_id](Tape& t) {
    if (!t.needs(m.id)) return;
    const Tensor& g = t.grad_buf(out_id);
    Tensor& gm = t.grad_buf(m.id);
    for (size_t r = 0; r < ids.size(); ++r)
      for (int j = 0; j < d; ++j)
        gm.at(ids[r], j) += g.at(static_cast<int>(r), j);
  };
  return make_op(m.tape, std::move(out), {m.id}, back, "rows_gather");
}

Var stack_scalars(const std::vector<Var>& xs) {
  if (xs.empty()) throw ContractError("stack_scalars: empty input");
  Tape* tape = xs[0].tape;
  Tensor out({static_cast<int>(xs.size())});
  std::vector<int> parents;
  for (size_t i = 0; i < xs.size(); ++i) {
    check_same_tape(xs[0], xs[i], "stack_scalars");
    out[static_cast<int64_t>(i)] = tape->val(xs[i]).item();
    parents.push_back(xs[i].id);
  }
  int out_id = tape->size();
  auto back = [xs, out_id](Tape& t) {
    const Tensor& g = t.grad_buf(out_id);
    for (size_t i = 0; i < xs.size(); ++i)
      if (t.needs(xs[i].id)) t.grad_buf(xs[i].id)[0] += g[static_cast<int64_t>(i)];
  };
  return make_op(tape, std::move(out), parents, back, "stack_scalars");
}

Var stack_rows(const std::vector<Var>& rows) {
  if (rows.empty()) throw ContractError("stack_rows: empty input");
  Tape* tape = rows[0].tape;
  int d = tape->val(rows[0]).dim(0);
  Tensor out({static_cast<int>(rows.size()), d});
  std::vector<int> parents;
  for (size_t r = 0; r < rows.size(); ++r) {
    check_same_tape(rows[0], rows[r], "stack_rows");
    const Tensor& rv = tape->val(rows[r]);
    if (rv.rank() != 1 || rv.dim(0) != d) shape_fail("stack_rows", rv);
    for (int j = 0; j < d; ++j) out.at(static_cast<int>(r), j) = rv[j];
    parents.push_back(rows[r].id);
  }
  int out_id = tape->size();
  auto back = [rows, d, out_id](Tape& t) {
    const Tensor& g = t.grad_buf(out_id);
    for (size_t r = 0; r < rows.size(); ++r) {
      if (!t.needs(rows[r].id)) continue;
      Tensor& gr = t.grad_buf(rows[r].id);
      for (int j = 0; j < d; ++j) gr[j] += g.at(static_cast<int>(r), j);
    }
  };
  return make_op(tape, std::move(out), parents, back, "stack_rows");
}

Var concat(Var u, Var v) {
  check_same_tape(u, v, "concat");
  const Tensor& uv = u.tape->val(u);
  const Tensor& vv = v.tape->val(v);
  if (uv.rank() != 1 || vv.rank() != 1) shape_fail2("concat", uv, vv);
  int m = uv.dim(0), n = vv.dim(0);
  Tensor out({m + n});
  for (int i = 0; i < m; ++i) out[i] = uv[i];
  for (int i = 0; i < n; ++i) out[m + i] = vv[i];
  int out_id = u.tape->size();
  auto back = [u, v, m, n, out_id](Tape& t) {
    const Tensor& g = t.grad_buf(out_id);
    if (t.needs(u.id)) {
      Tensor& gu = t.grad_buf(u.id);
      for (int i = 0; i < m; ++i) gu[i] += g[i];
    }
    if (t.needs(v.id)) {
      Tensor& gv = t.grad_buf(v.id);
      for (int i = 0; i < n; ++i) gv[i] += g[m + i];
    }
  };
  return make_op(u.tape, std::move(out), {u.id, v.id}, back, "concat");
}

Var add_rowwise(Var m, Var b) {
  check_same_tape(m, b, "add_rowwise");
  const Tensor& mv = m.tape->val(m);
  const Tensor& bv = b.tape->val(b);
  if (mv.rank() != 2 || bv.rank() != 1 || mv.dim(1) != bv.dim(0))
    shape_fail2("add_rowwise", mv, bv);
  int n = mv.dim(0), d = mv.dim(1);
  Tensor out = mv;
  for (int r = 0; r < n; ++r)
    for (int j = 0; j < d; ++j) out.at(r, j) += bv[j];
  int out_id = m.tape->size();
  auto back = [m, b, n, d, out_id](Tape& t) {
    const Tensor& g = t.grad_buf(out_id);
    if (t.needs(m.id)) {
      Tensor& gm = t.grad_buf(m.id);
      for (int64_t i = 0; i < g.size(); ++i) gm[i] += g[i];
    }
    if (t.needs(b.id)) {
      Tensor& gb = t.grad_buf(b.id);
      for (int r = 0; r < n; ++r)
        for (int j = 0; j < d; ++j) gb[j] += g.at(r, j);
    }
  };
  return make_op(m.tape, std::move(out), {m.id, b.id}, back, "add_rowwise");
}

Var neighbor_mean(Var m, std::vector<std::vector<int>> lists) {
  const Tensor& mv = m.tape->val(m);
  if (mv.rank() != 2) shape_fail("neighbor_mean", mv);
  int n = static_cast<int>(lists.size()), d = mv.dim(1);
  Tensor out({n, d});
  for (int i = 0; i < n; ++i) {
    if (lists[static_cast<size_t>(i)].empty()) continue;
    double inv = 1.0 / static_cast<double>(lists[static_cast<size_t>(i)].size());
    for (int j : lists[static_cast<size_t>(i)]) {
      if (j < 0 || j >= mv.dim(0))
        throw ContractError("neighbor_mean: neighbor index out of range");
      for (int c = 0; c < d; ++c) out.at(i, c) += inv * mv.at(j, c);
    }
  }
  int out_id = m.tape->size();
  auto back = [m, lists = std::move(lists), d, out_id](Tape& t) {
    if (!t.needs(m.id)) return;
    const Tensor& g = t.grad_buf(out_id);
    Tensor& gm = t.grad_buf(m.id);
    for (size_t i = 0; i < lists.size(); ++i) {
      if (lists[i].empty()) continue;
      double inv = 1.0 / static_cast<double>(lists[i].size());
      for (int j : lists[i])
        for (int c = 0; c < d; ++c)
          gm.at(j, c) += inv * g.at(static_cast<int>(i), c);
    }
  };
  return make_op(m.tape, std::move(out), {m.id}, back, "neighbor_mean");
}

Var pool_mean(Var m) {
  const Tensor& mv = m.tape->val(m);
  if (mv.rank() != 2) shape_fail("pool_mean", mv);
  int n = mv.dim(0), d = mv.dim(1);
  if (n < 1) throw ContractError("pool_mean: needs at least one row");
  Tensor out({d});
  double inv = 1.0 / static_cast<double>(n);
  for (int r = 0; r < n; ++r)
    for (int j = 0; j < d; ++j) out[j] += inv * mv.at(r, j);
  int out_id = m.tape->size();
  auto back = [m, n, d, inv, out_id](Tape& t) {
    if (!t.needs(m.id)) return;
    const Tensor& g = t.grad_buf(out_id);
    Tensor& gm = t.grad_buf(m.id);
    for (int r = 0; r < n; ++r)
      for (int j = 0; j < d; ++j) gm.at(r, j) += inv * g[j];
  };
  return make_op(m.tape, std::move(out), {m.id}, back, "pool_mean");
}

// ---- softmax family -----------------------------------------------------------

namespace {

void check_tau(double tau, const char* op) {
  if (!(tau > 0.0) || !std::isfinite(tau))
    throw NumericError(std::string(op) + ": temperature must be positive, got " +
                       std::to_string(tau));
}

}  // namespace

Var softmax(Var v, double tau) {
  check_tau(tau, "softmax");
  const Tensor& vv = v.tape->val(v);
  if (vv.rank() != 1) shape_fail("softmax", vv);
  int n = vv.dim(0);
  double mx = vv[0];
  for (int i = 1; i < n; ++i) mx = std::max(mx, vv[i]);
  Tensor out({n});
  double z = 0.0;
  for (int i = 0; i < n; ++i) {
    out[i] = std::exp((vv[i] - mx) / tau);
    z += out[i];
  }
  for (int i = 0; i < n; ++i) out[i] /= z;
  int out_id = v.tape->size();
  auto back = [v, tau, n, out_id](Tape& t) {
    if (!t.needs(v.id)) return;
    const Tensor& g = t.grad_buf(out_id);
    const Tensor& y = t.node(out_id).value;
    double gy = 0.0;
    for (int i = 0; i < n; ++i) gy += g[i] * y[i];
    Tensor& gv = t.grad_buf(v.id);
    for (int i = 0; i < n; ++i) gv[i] += y[i] * (g[i] - gy) / tau;
  };
  return make_op(v.tape, std::move(out), {v.id}, back, "softmax");
}

Var log_softmax(Var v, double tau) {
  check_tau(tau, "log_softmax");
  const Tensor& vv = v.tape->val(v);
  if (vv.rank() != 1) shape_fail("log_softmax", vv);
  int n = vv.dim(0);
  double mx = vv[0];
  for (int i = 1; i < n; ++i) mx = std::max(mx, vv[i]);
  double z = 0.0;
  for (int i = 0; i < n; ++i) z += std::exp((vv[i] - mx) / tau);
  double logz = std::log(z);
  Tensor out({n});
  for (int i = 0; i < n; ++i) out[i] = (vv[i] - mx) / tau - logz;
  int out_id = v.tape->size();
  auto back = [v, tau, n, out_id](Tape& t) {
    if (!t.needs(v.id)) return;
    const Tensor& g = t.grad_buf(out_id);
    const Tensor& l = t.node(out_id).value;
    double gs = 0.0;
    for (int i = 0; i < n; ++i) gs += g[i];
    Tensor& gv = t.grad_buf(v.id);
    for (int i = 0; i < n; ++i) gv[i] += (g[i] - std::exp(l[i]) * gs) / tau;
  };
  return make_op(v.tape, std::move(out), {v.id}, back, "log_softmax");
}

Var cosine_similarity(Var u, Var v) {
  check_same_tape(u, v, "cosine_similarity");
  const Tensor& uv = u.tape->val(u);
  const Tensor& vv = v.tape->val(v);
  if (uv.rank() != 1 || !uv.same_shape(vv)) shape_fail2("cosine_similarity", uv, vv);
  int n = uv.dim(0);
  double uu = 0.0, vv2 = 0.0, uvdot = 0.0;
  for (int i = 0; i < n; ++i) {
    uu += uv[i] * uv[i];
    vv2 += vv[i] * vv[i];
    uvdot += uv[i] * vv[i];
  }
  if (uu == 0.0 || vv2 == 0.0)
    throw NumericError("cosine_similarity: zero-norm vector input");
  double nu = std::sqrt(uu), nv = std::sqrt(vv2);
  double s = uvdot / (nu * nv);
  int out_id = u.tape->size();
  auto back = [u, v, n, nu, nv, s, out_id](Tape& t) {
    double g = t.grad_buf(out_id)[0];
    const Tensor& uv3 = t.val(u);
    const Tensor& vv3 = t.val(v);
    if (t.needs(u.id)) {
      Tensor& gu = t.grad_buf(u.id);
      for (int i = 0; i < n; ++i)
        gu[i] += g * (vv3[i] / (nu * nv) - s * uv3[i] / (nu * nu));
    }
    if (t.needs(v.id)) {
      Tensor& gv = t.grad_buf(v.id);
      for (int i = 0; i < n; ++i)
        gv[i] += g * (uv3[i] / (nu * nv) - s * vv3[i] / (nv * nv));
    }
  };
  return make_op(u.tape, Tensor::scalar(s), {u.id, v.id}, back, "cosine_similarity");
}

Var mse(Var a, Var b) {
  check_same_tape(a, b, "mse");
  const Tensor& av = a.tape->val(a);
  const Tensor& bv = b.tape->val(b);
  if (!av.same_shape(bv)) shape_fail2("mse", av, bv);
  int64_t n = av.size();
  double s = 0.0;
  for (int64_t i = 0; i < n; ++i) {
    double d = av[i] - bv[i];
    s += d * d;
  }
  s /= static_cast<double>(n);
  int out_id = a.tape->size();
  auto back = [a, b, n, out_id](Tape& t) {
    double g = t.grad_buf(out_id)[0] * 2.0 / static_cast<double>(n);
    const Tensor& av2 = t.val(a);
    const Tensor& bv2 = t.val(b);
    if (t.needs(a.id)) {
      Tensor& ga = t.grad_buf(a.id);
      for (int64_t i = 0; i < n; ++i) ga[i] += g * (av2[i] - bv2[i]);
    }
    if (t.needs(b.id)) {
      Tensor& gb = t.grad_buf(b.id);
      for (int64_t i = 0; i < n; ++i) gb[i] -= g * (av2[i] - bv2[i]);
    }
  };
  return make_op(a.tape, Tensor::scalar(s), {a.id, b.id}, back, "mse");
}

Var triaffine(Var w, Var u, Var p) {
  check_same_tape(w, u, "triaffine");
  check_same_tape(w, p, "triaffine");
  const Tensor& wv = w.tape->val(w);
  const Tensor& uv = u.tape->val(u);
  const Tensor& pv = p.tape->val(p);
  if (wv.rank() != 3 || uv.rank() != 1 || pv.rank() != 1)
    throw ContractError("triaffine: expects W rank-3 plus two vectors");
  int d = wv.dim(1);
  if (wv.dim(0) != d + 1 || wv.dim(2) != d + 1 || uv.dim(0) != d || pv.dim(0) != d)
    throw ContractError("triaffine: W must be (d+1,d,d+1) matching vectors of length d");
  auto ubar = [&](int a2) { return a2 < d ? uv[a2] : 1.0; };
  auto pbar = [&](int c) { return c < d ? pv[c] : 1.0; };
  Tensor out({d});
  const double* W = wv.data();
  for (int a2 = 0; a2 <= d; ++a2) {
    double ua = ubar(a2);
    if (ua == 0.0) continue;
    const double* Wa = W + static_cast<int64_t>(a2) * d * (d + 1);
    for (int b = 0; b < d; ++b) {
      const double* Wab = Wa + static_cast<int64_t>(b) * (d + 1);
      double s = 0.0;
      for (int c = 0; c <= d; ++c) s += Wab[c] * pbar(c);
      out[b] += ua * s;
    }
  }
  int out_id = w.tape->size();
  auto back = [w, u, p, d, out_id](Tape& t) {
    const Tensor& g = t.grad_buf(out_id);
    const Tensor& wv2 = t.val(w);
    const Tensor& uv2 = t.val(u);
    const Tensor& pv2 = t.val(p);
    auto ubar2 = [&](int a2) { return a2 < d ? uv2[a2] : 1.0; };
    auto pbar2 = [&](int c) { return c < d ? pv2[c] : 1.0; };
    if (t.needs(w.id)) {
      Tensor& gw = t.grad_buf(w.id);
      double* GW = gw.data();
      for (int a2 = 0; a2 <= d; ++a2) {
        double ua = ubar2(a2);
        if (ua == 0.0) continue;
        double* Ga = GW + static_cast<int64_t>(a2) * d * (d + 1);
        for (int b = 0; b < d; ++b) {
          double ug = ua * g[b];
          if (ug == 0.0) continue;
          double* Gab = Ga + static_cast<int64_t>(b) * (d + 1);
          for (int c = 0; c <= d; ++c) Gab[c] += ug * pbar2(c);
        }
      }
    }
    const double* W2 = wv2.data();
    if (t.needs(u.id)) {
      Tensor& gu = t.grad_buf(u.id);
      for (int a2 = 0; a2 < d; ++a2) {
        const double* Wa = W2 + static_cast<int64_t>(a2) * d * (d + 1);
        double s = 0.0;
        for (int b = 0; b < d; ++b) {
          const double* Wab = Wa + static_cast<int64_t>(b) * (d + 1);
          double inner = 0.0;
          for (int c = 0; c <= d; ++c) inner += Wab[c] * pbar2(c);
          s += g[b] * inner;
        }
        gu[a2] += s;
      }
    }
    if (t.needs(p.id)) {
      Tensor& gp = t.grad_buf(p.id);
      for (int a2 = 0; a2 <= d; ++a2) {
        double ua = ubar2(a2);
        if (ua == 0.0) continue;
        const double* Wa = W2 + static_cast<int64_t>(a2) * d * (d + 1);
        for (int b = 0; b < d; ++b) {
          double ug = ua * g[b];
          if (ug == 0.0) continue;
          const double* Wab = Wa + static_cast<int64_t>(b) * (d + 1);
          for (int c = 0; c < d; ++c) gp[c] += ug * Wab[c];
        }
      }
    }
  };
  return make_op(w.tape, std::move(out), {w.id, u.id, p.id}, back, "triaffine");
}

// ---- raw kernels ---------------------------------------------------------------

namespace raw {

Tensor matvec(const Tensor& w, const Tensor& x) {
  if (w.rank() != 2 || x.rank() != 1 || w.dim(1) != x.dim(0))
    throw ContractError("raw::matvec: incompatible shapes");
  int m = w.dim(0), n = w.dim(1);
  Tensor out({m});
  for (int i = 0; i < m; ++i) {
    const double* wr = w.data() + static_cast<int64_t>(i) * n;
    double s = 0.0;
    for (int j = 0; j < n; ++j) s += wr[j] * x[j];
    out[i] = s;
  }
  return out;
}

Tensor add(const Tensor& a, const Tensor& b) {
  if (!a.same_shape(b)) throw ContractError("raw::add: shape mismatch");
  Tensor out = a;
  for (int64_t i = 0; i < out.size(); ++i) out[i] += b[i];
  return out;
}

Tensor tanh_t(const Tensor& a) {
  Tensor out = a;
  for (int64_t i = 0; i < out.size(); ++i) out[i] = std::tanh(out[i]);
  return out;
}

double dot(const Tensor& u, const Tensor& v) {
  if (!u.same_shape(v)) throw ContractError("raw::dot: shape mismatch");
  double s = 0.0;
  for (int64_t i = 0; i < u.size(); ++i) s += u[i] * v[i];
  return s;
}

double cosine(const Tensor& u, const Tensor& v) {
  double uu = dot(u, u), vv = dot(v, v);
  if (uu == 0.0 || vv == 0.0)
    throw NumericError("cosine: zero-norm vector input");
  return dot(u, v) / std::sqrt(uu * vv);
}

Tensor softmax(const Tensor& v, double tau) {
  if (!(tau > 0.0)) throw NumericError("softmax: temperature must be positive");
  int n = static_cast<int>(v.size());
  double mx = v[0];
  for (int i = 1; i < n; ++i) mx = std::max(mx, v[i]);
  Tensor out = v;
  double z = 0.0;
  for (int i = 0; i < n; ++i) {
    out[i] = std::exp((v[i] - mx) / tau);
    z += out[i];
  }
  for (int i = 0; i < n; ++i) out[i] /= z;
  return out;
}

}  // namespace raw

}  // namespace sgp::num
