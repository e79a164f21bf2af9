#include "medtag/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace medtag {

namespace {

[[noreturn]] void shape_error(const std::string& op, const Tensor& a, const Tensor& b) {
  throw std::invalid_argument(op + ": incompatible shapes " + a.shape_str() + " and " + b.shape_str());
}

[[noreturn]] void shape_error(const std::string& op, const Tensor& a) {
  throw std::invalid_argument(op + ": bad shape " + a.shape_str());
}

Tape& tape_of(Var v, const char* op) {
  if (v.tape == nullptr || v.id < 0) throw std::invalid_argument(std::string(op) + ": unbound Var");
  return *v.tape;
}

void check_same_tape(Var a, Var b, const char* op) {
  if (a.tape != b.tape) throw std::invalid_argument(std::string(op) + ": operands recorded on different tapes");
}

// out (+)= op(A) * op(B) with optional transposes; A' is m x k, B' is k x n.
void mm_accum(const Tensor& a, bool ta, const Tensor& b, bool tb, Tensor& out) {
  int m = ta ? a.shape[1] : a.shape[0];
  int k = ta ? a.shape[0] : a.shape[1];
  int n = tb ? b.shape[0] : b.shape[1];
  auto ae = [&](int i, int j) { return ta ? a.at(j, i) : a.at(i, j); };
  auto be = [&](int i, int j) { return tb ? b.at(j, i) : b.at(i, j); };
  for (int i = 0; i < m; ++i) {
    for (int p = 0; p < k; ++p) {
      double av = ae(i, p);
      if (av == 0.0) continue;
      for (int j = 0; j < n; ++j) {
        out.at(i, j) += av * be(p, j);
      }
    }
  }
}

}  // namespace

// ---------------------------------------------------------------------------
// ParamStore
// ---------------------------------------------------------------------------

Parameter& ParamStore::create(const std::string& name, Tensor init) {
  if (params_.count(name)) throw std::invalid_argument("ParamStore: duplicate parameter " + name);
  auto p = std::make_unique<Parameter>(name, std::move(init));
  Parameter& ref = *p;
  params_.emplace(name, std::move(p));
  return ref;
}

Parameter& ParamStore::get(const std::string& name) {
  auto it = params_.find(name);
  if (it == params_.end()) throw std::invalid_argument("ParamStore: unknown parameter " + name);
  return *it->second;
}

const Parameter& ParamStore::get(const std::string& name) const {
  auto it = params_.find(name);
  if (it == params_.end()) throw std::invalid_argument("ParamStore: unknown parameter " + name);
  return *it->second;
}

std::vector<Parameter*> ParamStore::all() {
  std::vector<Parameter*> out;
  out.reserve(params_.size());
  for (auto& [k, v] : params_) out.push_back(v.get());
  return out;
}

std::vector<const Parameter*> ParamStore::all() const {
  std::vector<const Parameter*> out;
  out.reserve(params_.size());
  for (auto& [k, v] : params_) out.push_back(v.get());
  return out;
}

void ParamStore::zero_grads() {
  for (auto& [k, v] : params_) std::fill(v->grad.data.begin(), v->grad.data.end(), 0.0);
}

std::size_t ParamStore::total_values() const {
  std::size_t n = 0;
  for (auto& [k, v] : params_) n += v->value.size();
  return n;
}

// ---------------------------------------------------------------------------
// Tape
// ---------------------------------------------------------------------------

int Tape::push(Tensor value, std::vector<int> parents, BackFn back) {
  Node n;
  n.grad = Tensor::zeros(value.shape);
  n.value = std::move(value);
  n.parents = std::move(parents);
  n.back = std::move(back);
  nodes_.push_back(std::move(n));
  return static_cast<int>(nodes_.size()) - 1;
}

Var Tape::input(Tensor value) { return Var{push(std::move(value), {}, nullptr), this}; }

Var Tape::param(Parameter& p) {
  auto it = bound_ids_.find(&p);
  if (it != bound_ids_.end()) return Var{it->second, this};
  int id = push(p.value, {}, nullptr);
  nodes_[id].bound = &p;
  bound_ids_[&p] = id;
  return Var{id, this};
}

void Tape::backward(Var loss) {
  if (nodes_.empty()) throw std::logic_error("Tape::backward: nothing recorded");
  if (loss.tape != this || loss.id < 0 || loss.id >= static_cast<int>(nodes_.size())) {
    throw std::invalid_argument("Tape::backward: loss is not on this tape");
  }
  if (!nodes_[loss.id].value.is_scalar()) {
    throw std::invalid_argument("Tape::backward: loss must be a scalar, got " + nodes_[loss.id].value.shape_str());
  }
  nodes_[loss.id].grad[0] = 1.0;
  for (int id = loss.id; id >= 0; --id) {
    if (nodes_[id].back) nodes_[id].back(*this, id);
  }
  for (auto& n : nodes_) {
    if (n.bound == nullptr) continue;
    for (std::size_t i = 0; i < n.grad.size(); ++i) n.bound->grad[i] += n.grad[i];
  }
}

const Tensor& Tape::val(Var v) const { return nodes_.at(v.id).value; }
const Tensor& Tape::grad(Var v) const { return nodes_.at(v.id).grad; }

Rng& Tape::dropout_rng() {
  if (dropout_rng_ == nullptr) throw std::logic_error("Tape: dropout requested but no RNG attached");
  return *dropout_rng_;
}

// ---------------------------------------------------------------------------
// Elementwise ops
// ---------------------------------------------------------------------------

Var add(Var a, Var b) {
  Tape& t = tape_of(a, "add");
  check_same_tape(a, b, "add");
  const Tensor& av = t.value_at(a.id);
  const Tensor& bv = t.value_at(b.id);
  if (!av.same_shape(bv)) shape_error("add", av, bv);
  Tensor out = av;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += bv[i];
  int aid = a.id, bid = b.id;
  int id = t.push(std::move(out), {aid, bid}, [aid, bid](Tape& tp, int self) {
    const Tensor& g = tp.grad_at(self);
    Tensor& ga = tp.grad_at(aid);
    Tensor& gb = tp.grad_at(bid);
    for (std::size_t i = 0; i < g.size(); ++i) {
      ga[i] += g[i];
      gb[i] += g[i];
    }
  });
  return Var{id, &t};
}

Var sub(Var a, Var b) {
  Tape& t = tape_of(a, "sub");
  check_same_tape(a, b, "sub");
  const Tensor& av = t.value_at(a.id);
  const Tensor& bv = t.value_at(b.id);
  if (!av.same_shape(bv)) shape_error("sub", av, bv);
  Tensor out = av;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] -= bv[i];
  int aid = a.id, bid = b.id;
  int id = t.push(std::move(out), {aid, bid}, [aid, bid](Tape& tp, int self) {
    const Tensor& g = tp.grad_at(self);
    Tensor& ga = tp.grad_at(aid);
    Tensor& gb = tp.grad_at(bid);
    for (std::size_t i = 0; i < g.size(); ++i) {
      ga[i] += g[i];
      gb[i] -= g[i];
    }
  });
  return Var{id, &t};
}

Var mul(Var a, Var b) {
  Tape& t = tape_of(a, "mul");
  check_same_tape(a, b, "mul");
  const Tensor& av = t.value_at(a.id);
  const Tensor& bv = t.value_at(b.id);
  if (!av.same_shape(bv)) shape_error("mul", av, bv);
  Tensor out = av;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= bv[i];
  int aid = a.id, bid = b.id;
  int id = t.push(std::move(out), {aid, bid}, [aid, bid](Tape& tp, int self) {
    const Tensor& g = tp.grad_at(self);
    const Tensor& av2 = tp.value_at(aid);
    const Tensor& bv2 = tp.value_at(bid);
    Tensor& ga = tp.grad_at(aid);
    Tensor& gb = tp.grad_at(bid);
    for (std::size_t i = 0; i < g.size(); ++i) {
      ga[i] += g[i] * bv2[i];
      gb[i] += g[i] * av2[i];
    }
  });
  return Var{id, &t};
}

Var scale(Var a, double c) {
  Tape& t = tape_of(a, "scale");
  Tensor out = t.value_at(a.id);
  for (double& x : out.data) x *= c;
  int aid = a.id;
  int id = t.push(std::move(out), {aid}, [aid, c](Tape& tp, int self) {
    const Tensor& g = tp.grad_at(self);
    Tensor& ga = tp.grad_at(aid);
    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += c * g[i];
  });
  return Var{id, &t};
}

Var add_rowwise(Var m, Var v) {
  Tape& t = tape_of(m, "add_rowwise");
  check_same_tape(m, v, "add_rowwise");
  const Tensor& mv = t.value_at(m.id);
  const Tensor& vv = t.value_at(v.id);
  if (mv.dim() != 2 || vv.dim() != 1 || mv.shape[1] != vv.shape[0]) shape_error("add_rowwise", mv, vv);
  Tensor out = mv;
  int rows = mv.shape[0], cols = mv.shape[1];
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) out.at(r, c) += vv[c];
  int mid = m.id, vid = v.id;
  int id = t.push(std::move(out), {mid, vid}, [mid, vid, rows, cols](Tape& tp, int self) {
    const Tensor& g = tp.grad_at(self);
    Tensor& gm = tp.grad_at(mid);
    Tensor& gv = tp.grad_at(vid);
    for (int r = 0; r < rows; ++r) {
      for (int c = 0; c < cols; ++c) {
        double gg = g.at(r, c);
        gm.at(r, c) += gg;
        gv[c] += gg;
      }
    }
  });
  return Var{id, &t};
}

// ---------------------------------------------------------------------------
// Linear algebra
// ---------------------------------------------------------------------------

Var matmul(Var a, Var b, bool trans_a, bool trans_b) {
  Tape& t = tape_of(a, "matmul");
  check_same_tape(a, b, "matmul");
  const Tensor& av = t.value_at(a.id);
  const Tensor& bv = t.value_at(b.id);
  if (av.dim() != 2 || bv.dim() != 2) shape_error("matmul", av, bv);
  int m = trans_a ? av.shape[1] : av.shape[0];
  int k = trans_a ? av.shape[0] : av.shape[1];
  int k2 = trans_b ? bv.shape[1] : bv.shape[0];
  int n = trans_b ? bv.shape[0] : bv.shape[1];
  if (k != k2) shape_error("matmul", av, bv);
  Tensor out({m, n});
  mm_accum(av, trans_a, bv, trans_b, out);
  int aid = a.id, bid = b.id;
  int id = t.push(std::move(out), {aid, bid}, [aid, bid, trans_a, trans_b](Tape& tp, int self) {
    const Tensor& g = tp.grad_at(self);
    const Tensor& av2 = tp.value_at(aid);
    const Tensor& bv2 = tp.value_at(bid);
    Tensor& ga = tp.grad_at(aid);
    Tensor& gb = tp.grad_at(bid);
    // dA' = dC * B'^T, dB' = A'^T * dC, transposed back as needed
    if (!trans_a) {
      mm_accum(g, false, bv2, !trans_b, ga);
    } else {
      mm_accum(bv2, trans_b, g, true, ga);
    }
    if (!trans_b) {
      mm_accum(av2, !trans_a, g, false, gb);
    } else {
      mm_accum(g, true, av2, trans_a, gb);
    }
  });
  return Var{id, &t};
}

Var matvec(Var w, Var x) {
  Tape& t = tape_of(w, "matvec");
  check_same_tape(w, x, "matvec");
  const Tensor& wv = t.value_at(w.id);
  const Tensor& xv = t.value_at(x.id);
  if (wv.dim() != 2 || xv.dim() != 1 || wv.shape[1] != xv.shape[0]) shape_error("matvec", wv, xv);
  int m = wv.shape[0], n = wv.shape[1];
  Tensor out({m});
  for (int i = 0; i < m; ++i) {
    double s = 0.0;
    for (int j = 0; j < n; ++j) s += wv.at(i, j) * xv[j];
    out[i] = s;
  }
  int wid = w.id, xid = x.id;
  int id = t.push(std::move(out), {wid, xid}, [wid, xid, m, n](Tape& tp, int self) {
    const Tensor& g = tp.grad_at(self);
    const Tensor& wv2 = tp.value_at(wid);
    const Tensor& xv2 = tp.value_at(xid);
    Tensor& gw = tp.grad_at(wid);
    Tensor& gx = tp.grad_at(xid);
    for (int i = 0; i < m; ++i) {
      double gi = g[i];
      if (gi == 0.0) continue;
      for (int j = 0; j < n; ++j) {
        gw.at(i, j) += gi * xv2[j];
        gx[j] += gi * wv2.at(i, j);
      }
    }
  });
  return Var{id, &t};
}

// ---------------------------------------------------------------------------
// Shaping ops
// ---------------------------------------------------------------------------

Var concat(Var a, Var b) { return concat(std::vector<Var>{a, b}); }

Var concat(const std::vector<Var>& parts) {
  if (parts.empty()) throw std::invalid_argument("concat: no inputs");
  Tape& t = tape_of(parts[0], "concat");
  int total = 0;
  std::vector<int> ids;
  std::vector<int> lens;
  for (Var p : parts) {
    check_same_tape(parts[0], p, "concat");
    const Tensor& pv = t.value_at(p.id);
    if (pv.dim() != 1) shape_error("concat", pv);
    ids.push_back(p.id);
    lens.push_back(pv.shape[0]);
    total += pv.shape[0];
  }
  Tensor out({total});
  int off = 0;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    const Tensor& pv = t.value_at(ids[i]);
    std::copy(pv.data.begin(), pv.data.end(), out.data.begin() + off);
    off += lens[i];
  }
  int id = t.push(std::move(out), ids, [ids, lens](Tape& tp, int self) {
    const Tensor& g = tp.grad_at(self);
    int off2 = 0;
    for (std::size_t i = 0; i < ids.size(); ++i) {
      Tensor& gp = tp.grad_at(ids[i]);
      for (int j = 0; j < lens[i]; ++j) gp[j] += g[off2 + j];
      off2 += lens[i];
    }
  });
  return Var{id, &t};
}

Var concat_cols(const std::vector<Var>& parts) {
  if (parts.empty()) throw std::invalid_argument("concat_cols: no inputs");
  Tape& t = tape_of(parts[0], "concat_cols");
  int rows = -1, total_cols = 0;
  std::vector<int> ids, widths;
  for (Var p : parts) {
    check_same_tape(parts[0], p, "concat_cols");
    const Tensor& pv = t.value_at(p.id);
    if (pv.dim() != 2) shape_error("concat_cols", pv);
    if (rows < 0) rows = pv.shape[0];
    if (pv.shape[0] != rows) shape_error("concat_cols", t.value_at(parts[0].id), pv);
    ids.push_back(p.id);
    widths.push_back(pv.shape[1]);
    total_cols += pv.shape[1];
  }
  Tensor out({rows, total_cols});
  int off = 0;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    const Tensor& pv = t.value_at(ids[i]);
    for (int r = 0; r < rows; ++r)
      for (int c = 0; c < widths[i]; ++c) out.at(r, off + c) = pv.at(r, c);
    off += widths[i];
  }
  int id = t.push(std::move(out), ids, [ids, widths, rows](Tape& tp, int self) {
    const Tensor& g = tp.grad_at(self);
    int off2 = 0;
    for (std::size_t i = 0; i < ids.size(); ++i) {
      Tensor& gp = tp.grad_at(ids[i]);
      for (int r = 0; r < rows; ++r)
        for (int c = 0; c < widths[i]; ++c) gp.at(r, c) += g.at(r, off2 + c);
      off2 += widths[i];
    }
  });
  return Var{id, &t};
}

Var stack_rows(const std::vector<Var>& rows) {
  if (rows.empty()) throw std::invalid_argument("stack_rows: no inputs");
  Tape& t = tape_of(rows[0], "stack_rows");
  int cols = -1;
  std::vector<int> ids;
  for (Var r : rows) {
    check_same_tape(rows[0], r, "stack_rows");
    const Tensor& rv = t.value_at(r.id);
    if (rv.dim() != 1) shape_error("stack_rows", rv);
    if (cols < 0) cols = rv.shape[0];
    if (rv.shape[0] != cols) shape_error("stack_rows", t.value_at(rows[0].id), rv);
    ids.push_back(r.id);
  }
  int n = static_cast<int>(ids.size());
  Tensor out({n, cols});
  for (int r = 0; r < n; ++r) {
    const Tensor& rv = t.value_at(ids[r]);
    for (int c = 0; c < cols; ++c) out.at(r, c) = rv[c];
  }
  int id = t.push(std::move(out), ids, [ids, cols](Tape& tp, int self) {
    const Tensor& g = tp.grad_at(self);
    for (std::size_t r = 0; r < ids.size(); ++r) {
      Tensor& gr = tp.grad_at(ids[r]);
      for (int c = 0; c < cols; ++c) gr[c] += g.at(static_cast<int>(r), c);
    }
  });
  return Var{id, &t};
}

Var row(Var m, int r) {
  Tape& t = tape_of(m, "row");
  const Tensor& mv = t.value_at(m.id);
  if (mv.dim() != 2 || r < 0 || r >= mv.shape[0]) shape_error("row", mv);
  int cols = mv.shape[1];
  Tensor out({cols});
  for (int c = 0; c < cols; ++c) out[c] = mv.at(r, c);
  int mid = m.id;
  int id = t.push(std::move(out), {mid}, [mid, r, cols](Tape& tp, int self) {
    const Tensor& g = tp.grad_at(self);
    Tensor& gm = tp.grad_at(mid);
    for (int c = 0; c < cols; ++c) gm.at(r, c) += g[c];
  });
  return Var{id, &t};
}

Var col(Var m, int c) {
  Tape& t = tape_of(m, "col");
  const Tensor& mv = t.value_at(m.id);
  if (mv.dim() != 2 || c < 0 || c >= mv.shape[1]) shape_error("col", mv);
  int rows = mv.shape[0];
  Tensor out({rows});
  for (int r = 0; r < rows; ++r) out[r] = mv.at(r, c);
  int mid = m.id;
  int id = t.push(std::move(out), {mid}, [mid, c, rows](Tape& tp, int self) {
    const Tensor& g = tp.grad_at(self);
    Tensor& gm = tp.grad_at(mid);
    for (int r = 0; r < rows; ++r) gm.at(r, c) += g[r];
  });
  return Var{id, &t};
}

Var slice(Var a, int start, int len) {
  Tape& t = tape_of(a, "slice");
  const Tensor& av = t.value_at(a.id);
  if (av.dim() != 1 || start < 0 || len < 0 || start + len > av.shape[0]) shape_error("slice", av);
  Tensor out({len});
  for (int i = 0; i < len; ++i) out[i] = av[start + i];
  int aid = a.id;
  int id = t.push(std::move(out), {aid}, [aid, start, len](Tape& tp, int self) {
    const Tensor& g = tp.grad_at(self);
    Tensor& ga = tp.grad_at(aid);
    for (int i = 0; i < len; ++i) ga[start + i] += g[i];
  });
  return Var{id, &t};
}

Var slice_cols(Var m, int start, int len) {
  Tape& t = tape_of(m, "slice_cols");
  const Tensor& mv = t.value_at(m.id);
  if (mv.dim() != 2 || start < 0 || len < 0 || start + len > mv.shape[1]) shape_error("slice_cols", mv);
  int rows = mv.shape[0];
  Tensor out({rows, len});
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < len; ++c) out.at(r, c) = mv.at(r, start + c);
  int mid = m.id;
  int id = t.push(std::move(out), {mid}, [mid, start, len, rows](Tape& tp, int self) {
    const Tensor& g = tp.grad_at(self);
    Tensor& gm = tp.grad_at(mid);
    for (int r = 0; r < rows; ++r)
      for (int c = 0; c < len; ++c) gm.at(r, start + c) += g.at(r, c);
  });
  return Var{id, &t};
}

Var gather_rows(Var m, const std::vector<int>& idx) {
  Tape& t = tape_of(m, "gather_rows");
  const Tensor& mv = t.value_at(m.id);
  if (mv.dim() != 2) shape_error("gather_rows", mv);
  for (int i : idx) {
    if (i < 0 || i >= mv.shape[0]) {
      throw std::invalid_argument("gather_rows: index " + std::to_string(i) + " out of range for " + mv.shape_str());
    }
  }
  int cols = mv.shape[1];
  Tensor out({static_cast<int>(idx.size()), cols});
  for (std::size_t r = 0; r < idx.size(); ++r)
    for (int c = 0; c < cols; ++c) out.at(static_cast<int>(r), c) = mv.at(idx[r], c);
  int mid = m.id;
  std::vector<int> idx_copy = idx;
  int id = t.push(std::move(out), {mid}, [mid, idx_copy, cols](Tape& tp, int self) {
    const Tensor& g = tp.grad_at(self);
    Tensor& gm = tp.grad_at(mid);
    for (std::size_t r = 0; r < idx_copy.size(); ++r)
      for (int c = 0; c < cols; ++c) gm.at(idx_copy[r], c) += g.at(static_cast<int>(r), c);
  });
  return Var{id, &t};
}

// ---------------------------------------------------------------------------
// Reductions
// ---------------------------------------------------------------------------

Var sum(Var a) {
  Tape& t = tape_of(a, "sum");
  const Tensor& av = t.value_at(a.id);
  double s = 0.0;
  for (double x : av.data) s += x;
  int aid = a.id;
  int id = t.push(Tensor::scalar(s), {aid}, [aid](Tape& tp, int self) {
    double g = tp.grad_at(self)[0];
    Tensor& ga = tp.grad_at(aid);
    for (double& x : ga.data) x += g;
  });
  return Var{id, &t};
}

Var pick(Var a, int index) {
  Tape& t = tape_of(a, "pick");
  const Tensor& av = t.value_at(a.id);
  if (index < 0 || static_cast<std::size_t>(index) >= av.size()) {
    throw std::invalid_argument("pick: index " + std::to_string(index) + " out of range for " + av.shape_str());
  }
  int aid = a.id;
  int id = t.push(Tensor::scalar(av[index]), {aid}, [aid, index](Tape& tp, int self) {
    tp.grad_at(aid)[index] += tp.grad_at(self)[0];
  });
  return Var{id, &t};
}

// ---------------------------------------------------------------------------
// Nonlinearities
// ---------------------------------------------------------------------------

Var tanh(Var a) {
  Tape& t = tape_of(a, "tanh");
  Tensor out = t.value_at(a.id);
  for (double& x : out.data) x = std::tanh(x);
  int aid = a.id;
  int id = t.push(std::move(out), {aid}, [aid](Tape& tp, int self) {
    const Tensor& g = tp.grad_at(self);
    const Tensor& y = tp.value_at(self);
    Tensor& ga = tp.grad_at(aid);
    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * (1.0 - y[i] * y[i]);
  });
  return Var{id, &t};
}

Var sigmoid(Var a) {
  Tape& t = tape_of(a, "sigmoid");
  Tensor out = t.value_at(a.id);
  for (double& x : out.data) x = 1.0 / (1.0 + std::exp(-x));
  int aid = a.id;
  int id = t.push(std::move(out), {aid}, [aid](Tape& tp, int self) {
    const Tensor& g = tp.grad_at(self);
    const Tensor& y = tp.value_at(self);
    Tensor& ga = tp.grad_at(aid);
    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * y[i] * (1.0 - y[i]);
  });
  return Var{id, &t};
}

Var gelu(Var a) {
  Tape& t = tape_of(a, "gelu");
  const Tensor& av = t.value_at(a.id);
  Tensor out = av;
  constexpr double kInvSqrt2 = 0.70710678118654752440;
  for (double& x : out.data) x = 0.5 * x * (1.0 + std::erf(x * kInvSqrt2));
  int aid = a.id;
  int id = t.push(std::move(out), {aid}, [aid](Tape& tp, int self) {
    const Tensor& g = tp.grad_at(self);
    const Tensor& x = tp.value_at(aid);
    Tensor& ga = tp.grad_at(aid);
    constexpr double kInvSqrt2a = 0.70710678118654752440;
    constexpr double kInvSqrt2Pi = 0.39894228040143267794;
    for (std::size_t i = 0; i < g.size(); ++i) {
      double cdf = 0.5 * (1.0 + std::erf(x[i] * kInvSqrt2a));
      double pdf = kInvSqrt2Pi * std::exp(-0.5 * x[i] * x[i]);
      ga[i] += g[i] * (cdf + x[i] * pdf);
    }
  });
  return Var{id, &t};
}

// ---------------------------------------------------------------------------
// Softmax family (all max-subtracted for stability)
// ---------------------------------------------------------------------------

Var softmax(Var a) {
  Tape& t = tape_of(a, "softmax");
  const Tensor& av = t.value_at(a.id);
  if (av.dim() != 1) shape_error("softmax", av);
  Tensor out = av;
  double mx = *std::max_element(out.data.begin(), out.data.end());
  double z = 0.0;
  for (double& x : out.data) {
    x = std::exp(x - mx);
    z += x;
  }
  for (double& x : out.data) x /= z;
  int aid = a.id;
  int id = t.push(std::move(out), {aid}, [aid](Tape& tp, int self) {
    const Tensor& g = tp.grad_at(self);
    const Tensor& y = tp.value_at(self);
    Tensor& ga = tp.grad_at(aid);
    double dot = 0.0;
    for (std::size_t i = 0; i < g.size(); ++i) dot += g[i] * y[i];
    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += y[i] * (g[i] - dot);
  });
  return Var{id, &t};
}

Var softmax_rows(Var m, const std::vector<unsigned char>* keep) {
  Tape& t = tape_of(m, "softmax_rows");
  const Tensor& mv = t.value_at(m.id);
  if (mv.dim() != 2) shape_error("softmax_rows", mv);
  int rows = mv.shape[0], cols = mv.shape[1];
  std::vector<unsigned char> mask(cols, 1);
  if (keep) {
    if (static_cast<int>(keep->size()) != cols) {
      throw std::invalid_argument("softmax_rows: mask length " + std::to_string(keep->size()) + " for " + mv.shape_str());
    }
    mask = *keep;
    if (std::count(mask.begin(), mask.end(), 1) == 0) {
      throw std::invalid_argument("softmax_rows: mask keeps no columns");
    }
  }
  Tensor out({rows, cols});
  for (int r = 0; r < rows; ++r) {
    double mx = -1e300;
    for (int c = 0; c < cols; ++c)
      if (mask[c] && mv.at(r, c) > mx) mx = mv.at(r, c);
    double z = 0.0;
    for (int c = 0; c < cols; ++c) {
      if (!mask[c]) continue;
      double e = std::exp(mv.at(r, c) - mx);
      out.at(r, c) = e;
      z += e;
    }
    for (int c = 0; c < cols; ++c)
      if (mask[c]) out.at(r, c) /= z;
  }
  int mid = m.id;
  int id = t.push(std::move(out), {mid}, [mid, rows, cols, mask](Tape& tp, int self) {
    const Tensor& g = tp.grad_at(self);
    const Tensor& y = tp.value_at(self);
    Tensor& gm = tp.grad_at(mid);
    for (int r = 0; r < rows; ++r) {
      double dot = 0.0;
      for (int c = 0; c < cols; ++c)
        if (mask[c]) dot += g.at(r, c) * y.at(r, c);
      for (int c = 0; c < cols; ++c)
        if (mask[c]) gm.at(r, c) += y.at(r, c) * (g.at(r, c) - dot);
    }
  });
  return Var{id, &t};
}

Var log_softmax_rows(Var m) {
  Tape& t = tape_of(m, "log_softmax_rows");
  const Tensor& mv = t.value_at(m.id);
  if (mv.dim() != 2) shape_error("log_softmax_rows", mv);
  int rows = mv.shape[0], cols = mv.shape[1];
  Tensor out({rows, cols});
  for (int r = 0; r < rows; ++r) {
    double mx = -1e300;
    for (int c = 0; c < cols; ++c) mx = std::max(mx, mv.at(r, c));
    double z = 0.0;
    for (int c = 0; c < cols; ++c) z += std::exp(mv.at(r, c) - mx);
    double lse = mx + std::log(z);
    for (int c = 0; c < cols; ++c) out.at(r, c) = mv.at(r, c) - lse;
  }
  int mid = m.id;
  int id = t.push(std::move(out), {mid}, [mid, rows, cols](Tape& tp, int self) {
    const Tensor& g = tp.grad_at(self);
    const Tensor& y = tp.value_at(self);  // log-probabilities
    Tensor& gm = tp.grad_at(mid);
    for (int r = 0; r < rows; ++r) {
      double rowsum = 0.0;
      for (int c = 0; c < cols; ++c) rowsum += g.at(r, c);
      for (int c = 0; c < cols; ++c) gm.at(r, c) += g.at(r, c) - std::exp(y.at(r, c)) * rowsum;
    }
  });
  return Var{id, &t};
}

Var log_sum_exp(Var a) {
  Tape& t = tape_of(a, "log_sum_exp");
  const Tensor& av = t.value_at(a.id);
  if (av.dim() != 1 || av.size() == 0) shape_error("log_sum_exp", av);
  double mx = *std::max_element(av.data.begin(), av.data.end());
  double z = 0.0;
  for (double x : av.data) z += std::exp(x - mx);
  double v = mx + std::log(z);
  int aid = a.id;
  int id = t.push(Tensor::scalar(v), {aid}, [aid](Tape& tp, int self) {
    double g = tp.grad_at(self)[0];
    double v2 = tp.value_at(self)[0];
    const Tensor& x = tp.value_at(aid);
    Tensor& ga = tp.grad_at(aid);
    for (std::size_t i = 0; i < x.size(); ++i) ga[i] += g * std::exp(x[i] - v2);
  });
  return Var{id, &t};
}

// ---------------------------------------------------------------------------
// Regularization
// ---------------------------------------------------------------------------

Var dropout(Var a, double p) {
  Tape& t = tape_of(a, "dropout");
  if (p < 0.0 || p >= 1.0) throw std::invalid_argument("dropout: p must be in [0,1), got " + std::to_string(p));
  if (!t.training() || p == 0.0) return a;
  const Tensor& av = t.value_at(a.id);
  Rng& rng = t.dropout_rng();
  std::vector<double> mask(av.size());
  double keep_scale = 1.0 / (1.0 - p);
  for (double& m : mask) m = rng.bernoulli(p) ? 0.0 : keep_scale;
  Tensor out = av;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= mask[i];
  int aid = a.id;
  int id = t.push(std::move(out), {aid}, [aid, mask](Tape& tp, int self) {
    const Tensor& g = tp.grad_at(self);
    Tensor& ga = tp.grad_at(aid);
    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * mask[i];
  });
  return Var{id, &t};
}

Var layer_norm_rows(Var x, Var gamma, Var beta, double eps) {
  Tape& t = tape_of(x, "layer_norm_rows");
  check_same_tape(x, gamma, "layer_norm_rows");
  check_same_tape(x, beta, "layer_norm_rows");
  const Tensor& xv = t.value_at(x.id);
  const Tensor& gv = t.value_at(gamma.id);
  const Tensor& bv = t.value_at(beta.id);
  if (xv.dim() != 2 || gv.dim() != 1 || bv.dim() != 1 || gv.shape[0] != xv.shape[1] || bv.shape[0] != xv.shape[1]) {
    shape_error("layer_norm_rows", xv, gv);
  }
  int rows = xv.shape[0], cols = xv.shape[1];
  Tensor out({rows, cols});
  std::vector<double> inv_sigma(rows);
  std::vector<double> xhat(static_cast<std::size_t>(rows) * cols);
  for (int r = 0; r < rows; ++r) {
    double mean = 0.0;
    for (int c = 0; c < cols; ++c) mean += xv.at(r, c);
    mean /= cols;
    double var = 0.0;
    for (int c = 0; c < cols; ++c) {
      double d = xv.at(r, c) - mean;
      var += d * d;
    }
    var /= cols;
    double is = 1.0 / std::sqrt(var + eps);
    inv_sigma[r] = is;
    for (int c = 0; c < cols; ++c) {
      double xh = (xv.at(r, c) - mean) * is;
      xhat[static_cast<std::size_t>(r) * cols + c] = xh;
      out.at(r, c) = xh * gv[c] + bv[c];
    }
  }
  int xid = x.id, gid = gamma.id, bid = beta.id;
  int id = t.push(std::move(out), {xid, gid, bid},
                  [xid, gid, bid, rows, cols, inv_sigma, xhat](Tape& tp, int self) {
    const Tensor& g = tp.grad_at(self);
    const Tensor& gv2 = tp.value_at(gid);
    Tensor& gx = tp.grad_at(xid);
    Tensor& gg = tp.grad_at(gid);
    Tensor& gb = tp.grad_at(bid);
    for (int r = 0; r < rows; ++r) {
      double mean_h = 0.0, mean_hx = 0.0;
      for (int c = 0; c < cols; ++c) {
        double h = g.at(r, c) * gv2[c];
        double xh = xhat[static_cast<std::size_t>(r) * cols + c];
        mean_h += h;
        mean_hx += h * xh;
        gg[c] += g.at(r, c) * xh;
        gb[c] += g.at(r, c);
      }
      mean_h /= cols;
      mean_hx /= cols;
      for (int c = 0; c < cols; ++c) {
        double h = g.at(r, c) * gv2[c];
        double xh = xhat[static_cast<std::size_t>(r) * cols + c];
        gx.at(r, c) += (h - mean_h - xh * mean_hx) * inv_sigma[r];
      }
    }
  });
  return Var{id, &t};
}

// ---------------------------------------------------------------------------
// Initializers
// ---------------------------------------------------------------------------

Tensor glorot_uniform(std::vector<int> shape, int fan_in, int fan_out, Rng& rng) {
  double bound = std::sqrt(6.0 / (fan_in + fan_out));
  Tensor t(std::move(shape));
  for (double& x : t.data) x = rng.uniform(-bound, bound);
  return t;
}

Tensor normal_init(std::vector<int> shape, double stddev, Rng& rng) {
  Tensor t(std::move(shape));
  for (double& x : t.data) x = rng.normal(0.0, stddev);
  return t;
}

}  // namespace medtag
