#include "resgin/autodiff.hpp"

#include <algorithm>
#include <cmath>

namespace resgin::diff {

namespace {

void check_same_tape(Var a, Var b) {
  if (a.tape != b.tape) throw ShapeError("operands recorded on different tapes");
}

double stable_sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace

Var Tape::emit(Tensor value, bool requires_grad,
               std::function<void(Tape&, const Tensor&)> backprop) {
  if (!value.all_finite()) throw NumericError("non-finite value produced (" + value.shape_str() + ")");
  Node n;
  n.value = std::move(value);
  n.requires_grad = requires_grad;
  n.backprop = std::move(backprop);
  nodes_.push_back(std::move(n));
  return Var{this, static_cast<int>(nodes_.size()) - 1};
}

Tensor& Tape::grad_buffer(int id) {
  Node& n = nodes_[id];
  if (n.grad.size() == 0) n.grad = Tensor(n.value.rows, n.value.cols);
  return n.grad;
}

Var Tape::input(Tensor v) { return emit(std::move(v), false, nullptr); }

Var Tape::param(Parameter& p) {
  for (const auto& [bp, id] : bound_)
    if (bp == &p) return Var{this, id};
  Var v = emit(p.value, true, nullptr);
  bound_.emplace_back(&p, v.id);
  return v;
}

void Tape::backward(Var output) {
  if (output.tape != this) throw NonScalarOutput("output recorded on a different tape");
  const Tensor& out = nodes_[output.id].value;
  if (out.rows != 1 || out.cols != 1)
    throw NonScalarOutput("backward requires a 1x1 output, got " + out.shape_str());

  for (auto& [p, id] : bound_) p->zero_grad();
  grad_buffer(output.id).data[0] = 1.0;

  for (int id = output.id; id >= 0; --id) {
    Node& n = nodes_[id];
    if (!n.requires_grad || n.grad.size() == 0) continue;
    if (n.backprop) n.backprop(*this, n.grad);
  }

  for (auto& [p, id] : bound_) {
    const Tensor& g = nodes_[id].grad;
    if (g.size() == 0) continue;  // unreachable from the output: stays zero
    for (int i = 0; i < g.size(); ++i) p->grad.data[i] += g.data[i];
  }
}

Var matmul(Var a, Var b) {
  check_same_tape(a, b);
  Tape& t = *a.tape;
  Tensor c = matmul(t.value(a), t.value(b));
  bool req = t.needs_grad(a) || t.needs_grad(b);
  int ai = a.id, bi = b.id;
  return t.emit(std::move(c), req, [ai, bi](Tape& tp, const Tensor& g) {
    if (tp.needs_grad({&tp, ai}))
      matmul_accumulate(tp.grad_buffer(ai), g, transpose(tp.nodes_[bi].value));
    if (tp.needs_grad({&tp, bi}))
      matmul_accumulate(tp.grad_buffer(bi), transpose(tp.nodes_[ai].value), g);
  });
}

Var transpose(Var a) {
  Tape& t = *a.tape;
  int ai = a.id;
  return t.emit(transpose(t.value(a)), t.needs_grad(a), [ai](Tape& tp, const Tensor& g) {
    Tensor& da = tp.grad_buffer(ai);
    for (int i = 0; i < g.rows; ++i)
      for (int j = 0; j < g.cols; ++j) da.at(j, i) += g.at(i, j);
  });
}

Var add(Var a, Var b) {
  check_same_tape(a, b);
  Tape& t = *a.tape;
  const Tensor &va = t.value(a), &vb = t.value(b);
  if (!va.same_shape(vb))
    throw ShapeError("add shape mismatch: " + va.shape_str() + " vs " + vb.shape_str());
  Tensor c = va;
  for (int i = 0; i < c.size(); ++i) c.data[i] += vb.data[i];
  int ai = a.id, bi = b.id;
  return t.emit(std::move(c), t.needs_grad(a) || t.needs_grad(b), [ai, bi](Tape& tp, const Tensor& g) {
    for (int pid : {ai, bi}) {
      if (!tp.needs_grad({&tp, pid})) continue;
      Tensor& d = tp.grad_buffer(pid);
      for (int i = 0; i < g.size(); ++i) d.data[i] += g.data[i];
    }
  });
}

Var sub(Var a, Var b) { return add(a, scale(b, -1.0)); }

Var mul(Var a, Var b) {
  check_same_tape(a, b);
  Tape& t = *a.tape;
  const Tensor &va = t.value(a), &vb = t.value(b);
  if (!va.same_shape(vb))
    throw ShapeError("mul shape mismatch: " + va.shape_str() + " vs " + vb.shape_str());
  Tensor c = va;
  for (int i = 0; i < c.size(); ++i) c.data[i] *= vb.data[i];
  int ai = a.id, bi = b.id;
  return t.emit(std::move(c), t.needs_grad(a) || t.needs_grad(b), [ai, bi](Tape& tp, const Tensor& g) {
    if (tp.needs_grad({&tp, ai})) {
      Tensor& d = tp.grad_buffer(ai);
      const Tensor& other = tp.nodes_[bi].value;
      for (int i = 0; i < g.size(); ++i) d.data[i] += g.data[i] * other.data[i];
    }
    if (tp.needs_grad({&tp, bi})) {
      Tensor& d = tp.grad_buffer(bi);
      const Tensor& other = tp.nodes_[ai].value;
      for (int i = 0; i < g.size(); ++i) d.data[i] += g.data[i] * other.data[i];
    }
  });
}

Var scale(Var a, double c) {
  Tape& t = *a.tape;
  Tensor v = t.value(a);
  for (double& x : v.data) x *= c;
  int ai = a.id;
  return t.emit(std::move(v), t.needs_grad(a), [ai, c](Tape& tp, const Tensor& g) {
    Tensor& d = tp.grad_buffer(ai);
    for (int i = 0; i < g.size(); ++i) d.data[i] += c * g.data[i];
  });
}

Var add_const(Var a, double c) {
  Tape& t = *a.tape;
  Tensor v = t.value(a);
  for (double& x : v.data) x += c;
  int ai = a.id;
  return t.emit(std::move(v), t.needs_grad(a), [ai](Tape& tp, const Tensor& g) {
    Tensor& d = tp.grad_buffer(ai);
    for (int i = 0; i < g.size(); ++i) d.data[i] += g.data[i];
  });
}

Var add_rowvec(Var m, Var r) {
  check_same_tape(m, r);
  Tape& t = *m.tape;
  const Tensor &vm = t.value(m), &vr = t.value(r);
  if (vr.rows != 1 || vr.cols != vm.cols)
    throw ShapeError("add_rowvec expects 1x" + std::to_string(vm.cols) + ", got " + vr.shape_str());
  Tensor c = vm;
  for (int i = 0; i < c.rows; ++i) {
    double* row = c.row_ptr(i);
    for (int j = 0; j < c.cols; ++j) row[j] += vr.data[j];
  }
  int mi = m.id, ri = r.id;
  return t.emit(std::move(c), t.needs_grad(m) || t.needs_grad(r), [mi, ri](Tape& tp, const Tensor& g) {
    if (tp.needs_grad({&tp, mi})) {
      Tensor& d = tp.grad_buffer(mi);
      for (int i = 0; i < g.size(); ++i) d.data[i] += g.data[i];
    }
    if (tp.needs_grad({&tp, ri})) {
      Tensor& d = tp.grad_buffer(ri);
      for (int i = 0; i < g.rows; ++i) {
        const double* row = g.row_ptr(i);
        for (int j = 0; j < g.cols; ++j) d.data[j] += row[j];
      }
    }
  });
}

Var scalar_mul(Var s, Var m) {
  check_same_tape(s, m);
  Tape& t = *s.tape;
  const Tensor &vs = t.value(s), &vm = t.value(m);
  if (vs.rows != 1 || vs.cols != 1) throw ShapeError("scalar_mul expects a 1x1 scalar");
  Tensor c = vm;
  for (double& x : c.data) x *= vs.data[0];
  int si = s.id, mi = m.id;
  return t.emit(std::move(c), t.needs_grad(s) || t.needs_grad(m), [si, mi](Tape& tp, const Tensor& g) {
    const double sv = tp.nodes_[si].value.data[0];
    if (tp.needs_grad({&tp, mi})) {
      Tensor& d = tp.grad_buffer(mi);
      for (int i = 0; i < g.size(); ++i) d.data[i] += sv * g.data[i];
    }
    if (tp.needs_grad({&tp, si})) {
      const Tensor& mv = tp.nodes_[mi].value;
      double acc = 0.0;
      for (int i = 0; i < g.size(); ++i) acc += g.data[i] * mv.data[i];
      tp.grad_buffer(si).data[0] += acc;
    }
  });
}

Var relu(Var a) {
  Tape& t = *a.tape;
  Tensor v = t.value(a);
  for (double& x : v.data) x = x > 0.0 ? x : 0.0;
  int ai = a.id;
  return t.emit(std::move(v), t.needs_grad(a), [ai](Tape& tp, const Tensor& g) {
    Tensor& d = tp.grad_buffer(ai);
    const Tensor& x = tp.nodes_[ai].value;
    for (int i = 0; i < g.size(); ++i)
      if (x.data[i] > 0.0) d.data[i] += g.data[i];
  });
}

Var tanh(Var a) {
  Tape& t = *a.tape;
  Tensor v = t.value(a);
  for (double& x : v.data) x = std::tanh(x);
  int ai = a.id;
  Var out = t.emit(std::move(v), t.needs_grad(a), nullptr);
  int oi = out.id;
  t.nodes_[oi].backprop = [ai, oi](Tape& tp, const Tensor& g) {
    Tensor& d = tp.grad_buffer(ai);
    const Tensor& y = tp.nodes_[oi].value;
    for (int i = 0; i < g.size(); ++i) d.data[i] += g.data[i] * (1.0 - y.data[i] * y.data[i]);
  };
  return out;
}

Var sigmoid(Var a) {
  Tape& t = *a.tape;
  Tensor v = t.value(a);
  for (double& x : v.data) x = stable_sigmoid(x);
  int ai = a.id;
  Var out = t.emit(std::move(v), t.needs_grad(a), nullptr);
  int oi = out.id;
  t.nodes_[oi].backprop = [ai, oi](Tape& tp, const Tensor& g) {
    Tensor& d = tp.grad_buffer(ai);
    const Tensor& y = tp.nodes_[oi].value;
    for (int i = 0; i < g.size(); ++i) d.data[i] += g.data[i] * y.data[i] * (1.0 - y.data[i]);
  };
  return out;
}

Var log(Var a) {
  Tape& t = *a.tape;
  Tensor v = t.value(a);
  for (double& x : v.data) x = std::log(x);
  int ai = a.id;
  return t.emit(std::move(v), t.needs_grad(a), [ai](Tape& tp, const Tensor& g) {
    Tensor& d = tp.grad_buffer(ai);
    const Tensor& x = tp.nodes_[ai].value;
    for (int i = 0; i < g.size(); ++i) d.data[i] += g.data[i] / x.data[i];
  });
}

Var clamp(Var a, double lo, double hi) {
  Tape& t = *a.tape;
  Tensor v = t.value(a);
  for (double& x : v.data) x = std::min(hi, std::max(lo, x));
  int ai = a.id;
  return t.emit(std::move(v), t.needs_grad(a), [ai, lo, hi](Tape& tp, const Tensor& g) {
    Tensor& d = tp.grad_buffer(ai);
    const Tensor& x = tp.nodes_[ai].value;
    for (int i = 0; i < g.size(); ++i)
      if (x.data[i] >= lo && x.data[i] <= hi) d.data[i] += g.data[i];
  });
}

Var dropout(Var a, double rate, Rng& rng, bool training) {
  Tape& t = *a.tape;
  if (!training || rate == 0.0) {
    int ai = a.id;
    return t.emit(t.value(a), t.needs_grad(a), [ai](Tape& tp, const Tensor& g) {
      Tensor& d = tp.grad_buffer(ai);
      for (int i = 0; i < g.size(); ++i) d.data[i] += g.data[i];
    });
  }
  if (rate < 0.0 || rate >= 1.0) throw ShapeError("dropout rate must be in [0, 1)");
  const Tensor& v = t.value(a);
  const double keep_scale = 1.0 / (1.0 - rate);
  Tensor mask(v.rows, v.cols);
  Tensor out = v;
  for (int i = 0; i < v.size(); ++i) {
    mask.data[i] = rng.uniform() < rate ? 0.0 : keep_scale;
    out.data[i] *= mask.data[i];
  }
  int ai = a.id;
  return t.emit(std::move(out), t.needs_grad(a),
                [ai, mask = std::move(mask)](Tape& tp, const Tensor& g) {
                  Tensor& d = tp.grad_buffer(ai);
                  for (int i = 0; i < g.size(); ++i) d.data[i] += g.data[i] * mask.data[i];
                });
}

Var rowwise_softmax(Var a) {
  Tape& t = *a.tape;
  const Tensor& v = t.value(a);
  if (v.size() == 0) throw ShapeError("rowwise_softmax on empty tensor");
  Tensor out(v.rows, v.cols);
  for (int i = 0; i < v.rows; ++i) {
    const double* row = v.row_ptr(i);
    double m = row[0];
    for (int j = 1; j < v.cols; ++j) m = std::max(m, row[j]);
    double z = 0.0;
    double* orow = out.row_ptr(i);
    for (int j = 0; j < v.cols; ++j) {
      orow[j] = std::exp(row[j] - m);
      z += orow[j];
    }
    for (int j = 0; j < v.cols; ++j) orow[j] /= z;
  }
  int ai = a.id;
  Var o = t.emit(std::move(out), t.needs_grad(a), nullptr);
  int oi = o.id;
  t.nodes_[oi].backprop = [ai, oi](Tape& tp, const Tensor& g) {
    Tensor& d = tp.grad_buffer(ai);
    const Tensor& y = tp.nodes_[oi].value;
    for (int i = 0; i < g.rows; ++i) {
      const double* grow = g.row_ptr(i);
      const double* yrow = y.row_ptr(i);
      double dot = 0.0;
      for (int j = 0; j < g.cols; ++j) dot += grow[j] * yrow[j];
      double* drow = d.row_ptr(i);
      for (int j = 0; j < g.cols; ++j) drow[j] += yrow[j] * (grow[j] - dot);
    }
  };
  return o;
}

Var row_sums(Var a) {
  Tape& t = *a.tape;
  const Tensor& v = t.value(a);
  Tensor out(v.rows, 1);
  for (int i = 0; i < v.rows; ++i) {
    const double* row = v.row_ptr(i);
    double acc = 0.0;
    for (int j = 0; j < v.cols; ++j) acc += row[j];
    out.data[i] = acc;
  }
  int ai = a.id;
  return t.emit(std::move(out), t.needs_grad(a), [ai](Tape& tp, const Tensor& g) {
    Tensor& d = tp.grad_buffer(ai);
    for (int i = 0; i < d.rows; ++i) {
      double* drow = d.row_ptr(i);
      for (int j = 0; j < d.cols; ++j) drow[j] += g.data[i];
    }
  });
}

Var sum_all(Var a) {
  Tape& t = *a.tape;
  const Tensor& v = t.value(a);
  double acc = 0.0;
  for (double x : v.data) acc += x;
  int ai = a.id;
  return t.emit(Tensor::scalar(acc), t.needs_grad(a), [ai](Tape& tp, const Tensor& g) {
    Tensor& d = tp.grad_buffer(ai);
    for (int i = 0; i < d.size(); ++i) d.data[i] += g.data[0];
  });
}

Var concat_cols(Var a, Var b) {
  check_same_tape(a, b);
  Tape& t = *a.tape;
  const Tensor &va = t.value(a), &vb = t.value(b);
  if (va.rows != vb.rows)
    throw ShapeError("concat_cols row mismatch: " + va.shape_str() + " vs " + vb.shape_str());
  Tensor c(va.rows, va.cols + vb.cols);
  for (int i = 0; i < c.rows; ++i) {
    double* crow = c.row_ptr(i);
    std::copy(va.row_ptr(i), va.row_ptr(i) + va.cols, crow);
    std::copy(vb.row_ptr(i), vb.row_ptr(i) + vb.cols, crow + va.cols);
  }
  int ai = a.id, bi = b.id;
  int acols = va.cols;
  return t.emit(std::move(c), t.needs_grad(a) || t.needs_grad(b),
                [ai, bi, acols](Tape& tp, const Tensor& g) {
                  if (tp.needs_grad({&tp, ai})) {
                    Tensor& d = tp.grad_buffer(ai);
                    for (int i = 0; i < d.rows; ++i)
                      for (int j = 0; j < acols; ++j) d.at(i, j) += g.at(i, j);
                  }
                  if (tp.needs_grad({&tp, bi})) {
                    Tensor& d = tp.grad_buffer(bi);
                    for (int i = 0; i < d.rows; ++i)
                      for (int j = 0; j < d.cols; ++j) d.at(i, j) += g.at(i, j + acols);
                  }
                });
}

Var segment_sum(Var values, const std::vector<int>& segment_of,
                const std::vector<int>& gather_from, int n_out,
                const std::vector<double>& weights) {
  Tape& t = *values.tape;
  const Tensor& v = t.value(values);
  if (segment_of.size() != gather_from.size())
    throw IndexError("segment_sum index lists differ in length");
  if (!weights.empty() && weights.size() != segment_of.size())
    throw IndexError("segment_sum weights length mismatch");
  Tensor out(n_out, v.cols);
  for (size_t m = 0; m < segment_of.size(); ++m) {
    const int s = segment_of[m], g = gather_from[m];
    if (s < 0 || s >= n_out || g < 0 || g >= v.rows)
      throw IndexError("segment_sum index out of range at pair " + std::to_string(m));
    const double w = weights.empty() ? 1.0 : weights[m];
    const double* src = v.row_ptr(g);
    double* dst = out.row_ptr(s);
    for (int j = 0; j < v.cols; ++j) dst[j] += w * src[j];
  }
  int vi = values.id;
  return t.emit(std::move(out), t.needs_grad(values),
                [vi, segment_of, gather_from, weights](Tape& tp, const Tensor& g) {
                  Tensor& d = tp.grad_buffer(vi);
                  for (size_t m = 0; m < segment_of.size(); ++m) {
                    const double w = weights.empty() ? 1.0 : weights[m];
                    const double* src = g.row_ptr(segment_of[m]);
                    double* dst = d.row_ptr(gather_from[m]);
                    for (int j = 0; j < d.cols; ++j) dst[j] += w * src[j];
                  }
                });
}

double grad_check(std::span<Parameter* const> params, const std::function<Var(Tape&)>& build,
                  double h) {
  std::vector<Tensor> analytic;
  {
    for (Parameter* p : params) p->zero_grad();  // params the build never touches stay zero
    Tape t;
    Var out = build(t);
    t.backward(out);
    for (Parameter* p : params) analytic.push_back(p->grad);
  }
  auto eval = [&build]() {
    Tape t;
    Var out = build(t);
    return t.value(out).data[0];
  };
  // worst entrywise deviation normalized by the gradient scale; the scale is
  // taken over the whole gradient so finite-difference roundoff on entries
  // whose true gradient is ~0 does not swamp the comparison
  double max_diff = 0.0;
  double scale = 1e-8;
  for (size_t pi = 0; pi < params.size(); ++pi) {
    Parameter& p = *params[pi];
    for (int i = 0; i < p.value.size(); ++i) {
      const double orig = p.value.data[i];
      p.value.data[i] = orig + h;
      const double fp = eval();
      p.value.data[i] = orig - h;
      const double fm = eval();
      p.value.data[i] = orig;
      const double numeric = (fp - fm) / (2.0 * h);
      const double ana = analytic[pi].data[i];
      max_diff = std::max(max_diff, std::fabs(ana - numeric));
      scale = std::max({scale, std::fabs(ana), std::fabs(numeric)});
    }
  }
  return max_diff / scale;
}

}  // namespace resgin::diff
