#include "graphda/autodiff.hpp"

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>

#include "graphda/errors.hpp"

namespace graphda {

namespace {

std::string shape_str(const Matrix& m) {
  std::ostringstream os;
  os << m.rows << "x" << m.cols;
  return os.str();
}

void require(bool ok, const std::string& prim, const std::string& detail) {
  if (!ok) throw ValidationError(prim + ": " + detail);
}

void require_same_tape(const char* prim, Var a, Var b) {
  require(a.tape != nullptr && a.tape == b.tape, prim,
          "operands recorded on different tapes");
}

}  // namespace

const Matrix& Var::value() const { return tape->value(id); }

Var Tape::input(Matrix value) {
  return emit(std::move(value), {}, nullptr);
}

Var Tape::param(Tensor& tensor) {
  Var v = emit(tensor.value, {}, nullptr);
  nodes_[v.id].needs_grad = tensor.requires_grad;
  nodes_[v.id].bound = tensor.requires_grad ? &tensor : nullptr;
  return v;
}

Var Tape::emit(Matrix value, std::vector<int> parents, Backprop backprop) {
  NodeRec rec;
  rec.value = std::move(value);
  rec.parents = std::move(parents);
  rec.backprop = std::move(backprop);
  for (int p : rec.parents) {
    if (nodes_[p].needs_grad) {
      rec.needs_grad = true;
      break;
    }
  }
  nodes_.push_back(std::move(rec));
  return Var{this, static_cast<int>(nodes_.size()) - 1};
}

Matrix* Tape::grad_sink(int id) {
  NodeRec& n = nodes_[id];
  if (!n.needs_grad || !n.reachable) return &discard_;
  return &n.grad;
}

void Tape::backward(Var loss) {
  require(loss.tape == this, "backward", "loss from another tape");
  const Matrix& lv = nodes_[loss.id].value;
  require(lv.is_scalar(), "backward",
          "loss must be scalar, got " + shape_str(lv));

  // Mark ancestors of the loss that can influence a parameter.
  for (auto& n : nodes_) n.reachable = false;
  std::vector<int> stack{loss.id};
  nodes_[loss.id].reachable = nodes_[loss.id].needs_grad;
  while (!stack.empty()) {
    int id = stack.back();
    stack.pop_back();
    for (int p : nodes_[id].parents) {
      NodeRec& pn = nodes_[p];
      if (pn.needs_grad && !pn.reachable) {
        pn.reachable = true;
        stack.push_back(p);
      }
    }
  }
  if (!nodes_[loss.id].reachable) return;  // loss independent of parameters

  for (auto& n : nodes_) {
    if (!n.reachable) continue;
    if (n.grad.same_shape(n.value)) {
      n.grad.fill(0.0);
    } else {
      n.grad = Matrix(n.value.rows, n.value.cols);
    }
  }
  nodes_[loss.id].grad.data[0] = 1.0;

  for (int id = loss.id; id >= 0; --id) {
    NodeRec& n = nodes_[id];
    if (!n.reachable) continue;
    if (n.backprop) n.backprop(*this, id);
  }

  for (auto& n : nodes_) {
    if (!n.reachable || n.bound == nullptr) continue;
    Tensor& t = *n.bound;
    for (std::size_t i = 0; i < t.grad.size(); ++i)
      t.grad.data[i] += n.grad.data[i];
  }
}

// ---- primitives ------------------------------------------------------------

namespace {

// Accumulate a += b; the discard sink is resized on demand so writes from
// no-grad parents stay in bounds.
void add_into(Matrix* a, const Matrix& b) {
  if (a->data.size() < b.data.size()) *a = Matrix(b.rows, b.cols);
  for (std::size_t i = 0; i < b.size(); ++i) a->data[i] += b.data[i];
}

}  // namespace

Var matmul(Var a, Var b) {
  require_same_tape("matmul", a, b);
  require(a.cols() == b.rows(), "matmul",
          "inner dimensions differ: " + shape_str(a.value()) + " * " +
              shape_str(b.value()));
  Matrix out = matmul(a.value(), b.value());
  int pa = a.id, pb = b.id;
  return a.tape->emit(std::move(out), {pa, pb}, [pa, pb](Tape& t, int self) {
    const Matrix& g = t.grad(self);
    if (t.needs_grad(pa))
      add_into(t.grad_sink(pa), matmul(g, transpose(t.value(pb))));
    if (t.needs_grad(pb))
      add_into(t.grad_sink(pb), matmul(transpose(t.value(pa)), g));
  });
}

Var add(Var a, Var b) {
  require_same_tape("add", a, b);
  require(a.value().same_shape(b.value()), "add",
          "shape mismatch: " + shape_str(a.value()) + " vs " +
              shape_str(b.value()));
  Matrix out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out.data[i] += b.value().data[i];
  int pa = a.id, pb = b.id;
  return a.tape->emit(std::move(out), {pa, pb}, [pa, pb](Tape& t, int self) {
    add_into(t.grad_sink(pa), t.grad(self));
    add_into(t.grad_sink(pb), t.grad(self));
  });
}

Var sub(Var a, Var b) {
  require_same_tape("sub", a, b);
  require(a.value().same_shape(b.value()), "sub",
          "shape mismatch: " + shape_str(a.value()) + " vs " +
              shape_str(b.value()));
  Matrix out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out.data[i] -= b.value().data[i];
  int pa = a.id, pb = b.id;
  return a.tape->emit(std::move(out), {pa, pb}, [pa, pb](Tape& t, int self) {
    const Matrix& g = t.grad(self);
    add_into(t.grad_sink(pa), g);
    Matrix* gb = t.grad_sink(pb);
    if (gb->data.size() < g.data.size()) *gb = Matrix(g.rows, g.cols);
    for (std::size_t i = 0; i < g.size(); ++i) gb->data[i] -= g.data[i];
  });
}

Var hadamard(Var a, Var b) {
  require_same_tape("hadamard", a, b);
  require(a.value().same_shape(b.value()), "hadamard",
          "shape mismatch: " + shape_str(a.value()) + " vs " +
              shape_str(b.value()));
  Matrix out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out.data[i] *= b.value().data[i];
  int pa = a.id, pb = b.id;
  return a.tape->emit(std::move(out), {pa, pb}, [pa, pb](Tape& t, int self) {
    const Matrix& g = t.grad(self);
    if (t.needs_grad(pa)) {
      Matrix ga = g;
      const Matrix& bv = t.value(pb);
      for (std::size_t i = 0; i < ga.size(); ++i) ga.data[i] *= bv.data[i];
      add_into(t.grad_sink(pa), ga);
    }
    if (t.needs_grad(pb)) {
      Matrix gb = g;
      const Matrix& av = t.value(pa);
      for (std::size_t i = 0; i < gb.size(); ++i) gb.data[i] *= av.data[i];
      add_into(t.grad_sink(pb), gb);
    }
  });
}

Var concat_rows(Var a, Var b) {
  require_same_tape("concat_rows", a, b);
  require(a.rows() == b.rows(), "concat_rows",
          "row counts differ: " + shape_str(a.value()) + " vs " +
              shape_str(b.value()));
  const Matrix& av = a.value();
  const Matrix& bv = b.value();
  Matrix out(av.rows, av.cols + bv.cols);
  for (std::size_t i = 0; i < av.rows; ++i) {
    std::copy(av.row_ptr(i), av.row_ptr(i) + av.cols, out.row_ptr(i));
    std::copy(bv.row_ptr(i), bv.row_ptr(i) + bv.cols, out.row_ptr(i) + av.cols);
  }
  int pa = a.id, pb = b.id;
  std::size_t ca = av.cols, cb = bv.cols;
  return a.tape->emit(std::move(out), {pa, pb},
                      [pa, pb, ca, cb](Tape& t, int self) {
    const Matrix& g = t.grad(self);
    if (t.needs_grad(pa)) {
      Matrix ga(g.rows, ca);
      for (std::size_t i = 0; i < g.rows; ++i)
        std::copy(g.row_ptr(i), g.row_ptr(i) + ca, ga.row_ptr(i));
      add_into(t.grad_sink(pa), ga);
    }
    if (t.needs_grad(pb)) {
      Matrix gb(g.rows, cb);
      for (std::size_t i = 0; i < g.rows; ++i)
        std::copy(g.row_ptr(i) + ca, g.row_ptr(i) + ca + cb, gb.row_ptr(i));
      add_into(t.grad_sink(pb), gb);
    }
  });
}

Var relu(Var x) {
  Matrix out = x.value();
  for (auto& v : out.data) v = v > 0.0 ? v : 0.0;
  int px = x.id;
  return x.tape->emit(std::move(out), {px}, [px](Tape& t, int self) {
    const Matrix& g = t.grad(self);
    const Matrix& xv = t.value(px);
    Matrix gx = g;
    for (std::size_t i = 0; i < gx.size(); ++i)
      if (xv.data[i] <= 0.0) gx.data[i] = 0.0;
    add_into(t.grad_sink(px), gx);
  });
}

Var sigmoid(Var x) {
  Matrix out = x.value();
  for (auto& v : out.data) v = 1.0 / (1.0 + std::exp(-v));
  int px = x.id;
  return x.tape->emit(std::move(out), {px}, [px](Tape& t, int self) {
    const Matrix& g = t.grad(self);
    const Matrix& s = t.value(self);
    Matrix gx = g;
    for (std::size_t i = 0; i < gx.size(); ++i)
      gx.data[i] *= s.data[i] * (1.0 - s.data[i]);
    add_into(t.grad_sink(px), gx);
  });
}

Var softmax_rows(Var x) {
  Matrix out = x.value();
  for (std::size_t i = 0; i < out.rows; ++i) {
    double* row = out.row_ptr(i);
    double mx = row[0];
    for (std::size_t j = 1; j < out.cols; ++j) mx = std::max(mx, row[j]);
    double sum = 0.0;
    for (std::size_t j = 0; j < out.cols; ++j) {
      row[j] = std::exp(row[j] - mx);
      sum += row[j];
    }
    for (std::size_t j = 0; j < out.cols; ++j) row[j] /= sum;
  }
  int px = x.id;
  return x.tape->emit(std::move(out), {px}, [px](Tape& t, int self) {
    const Matrix& g = t.grad(self);
    const Matrix& s = t.value(self);
    Matrix gx(g.rows, g.cols);
    for (std::size_t i = 0; i < g.rows; ++i) {
      double dot = 0.0;
      for (std::size_t j = 0; j < g.cols; ++j) dot += g(i, j) * s(i, j);
      for (std::size_t j = 0; j < g.cols; ++j)
        gx(i, j) = (g(i, j) - dot) * s(i, j);
    }
    add_into(t.grad_sink(px), gx);
  });
}

Var log(Var x) {
  Matrix out = x.value();
  for (auto& v : out.data) v = std::log(v);
  int px = x.id;
  return x.tape->emit(std::move(out), {px}, [px](Tape& t, int self) {
    const Matrix& g = t.grad(self);
    const Matrix& xv = t.value(px);
    Matrix gx = g;
    for (std::size_t i = 0; i < gx.size(); ++i) gx.data[i] /= xv.data[i];
    add_into(t.grad_sink(px), gx);
  });
}

Var clamp_min(Var x, double lo) {
  Matrix out = x.value();
  for (auto& v : out.data) v = std::max(v, lo);
  int px = x.id;
  return x.tape->emit(std::move(out), {px}, [px, lo](Tape& t, int self) {
    const Matrix& g = t.grad(self);
    const Matrix& xv = t.value(px);
    Matrix gx = g;
    for (std::size_t i = 0; i < gx.size(); ++i)
      if (xv.data[i] <= lo) gx.data[i] = 0.0;
    add_into(t.grad_sink(px), gx);
  });
}

Var mean_rows(Var x) {
  const Matrix& xv = x.value();
  require(xv.rows >= 1, "mean_rows", "empty input");
  Matrix out(1, xv.cols);
  for (std::size_t i = 0; i < xv.rows; ++i)
    for (std::size_t j = 0; j < xv.cols; ++j) out(0, j) += xv(i, j);
  for (auto& v : out.data) v /= static_cast<double>(xv.rows);
  int px = x.id;
  std::size_t n = xv.rows;
  return x.tape->emit(std::move(out), {px}, [px, n](Tape& t, int self) {
    const Matrix& g = t.grad(self);
    Matrix gx(n, g.cols);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < g.cols; ++j)
        gx(i, j) = g(0, j) / static_cast<double>(n);
    add_into(t.grad_sink(px), gx);
  });
}

Var row_sum(Var x) {
  const Matrix& xv = x.value();
  Matrix out(xv.rows, 1);
  for (std::size_t i = 0; i < xv.rows; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < xv.cols; ++j) s += xv(i, j);
    out(i, 0) = s;
  }
  int px = x.id;
  std::size_t c = xv.cols;
  return x.tape->emit(std::move(out), {px}, [px, c](Tape& t, int self) {
    const Matrix& g = t.grad(self);
    Matrix gx(g.rows, c);
    for (std::size_t i = 0; i < g.rows; ++i)
      for (std::size_t j = 0; j < c; ++j) gx(i, j) = g(i, 0);
    add_into(t.grad_sink(px), gx);
  });
}

Var sum_all(Var x) {
  const Matrix& xv = x.value();
  double s = 0.0;
  for (double v : xv.data) s += v;
  int px = x.id;
  std::size_t r = xv.rows, c = xv.cols;
  return x.tape->emit(Matrix::scalar(s), {px}, [px, r, c](Tape& t, int self) {
    const double g = t.grad(self).data[0];
    Matrix gx(r, c, g);
    add_into(t.grad_sink(px), gx);
  });
}

// Rows are divided by max(||x||, eps). The floor form keeps the output
// exactly invariant to positive scaling away from the degenerate zero row,
// which an additive epsilon under the root would not.
Var l2_normalize_rows(Var x, double eps) {
  const Matrix& xv = x.value();
  Matrix out(xv.rows, xv.cols);
  std::vector<double> norms(xv.rows);
  std::vector<char> floored(xv.rows);
  for (std::size_t i = 0; i < xv.rows; ++i) {
    double ss = 0.0;
    for (std::size_t j = 0; j < xv.cols; ++j) ss += xv(i, j) * xv(i, j);
    const double n = std::sqrt(ss);
    floored[i] = n < eps;
    norms[i] = floored[i] ? eps : n;
    for (std::size_t j = 0; j < xv.cols; ++j) out(i, j) = xv(i, j) / norms[i];
  }
  int px = x.id;
  return x.tape->emit(std::move(out), {px},
                      [px, norms = std::move(norms),
                       floored = std::move(floored)](Tape& t, int self) {
    const Matrix& g = t.grad(self);
    const Matrix& xv = t.value(px);
    Matrix gx(g.rows, g.cols);
    for (std::size_t i = 0; i < g.rows; ++i) {
      const double n = norms[i];
      if (floored[i]) {
        for (std::size_t j = 0; j < g.cols; ++j) gx(i, j) = g(i, j) / n;
        continue;
      }
      double dot = 0.0;
      for (std::size_t j = 0; j < g.cols; ++j) dot += g(i, j) * xv(i, j);
      for (std::size_t j = 0; j < g.cols; ++j)
        gx(i, j) = g(i, j) / n - xv(i, j) * dot / (n * n * n);
    }
    add_into(t.grad_sink(px), gx);
  });
}

Var scalar_affine(Var x, double a, double b) {
  Matrix out = x.value();
  for (auto& v : out.data) v = a * v + b;
  int px = x.id;
  return x.tape->emit(std::move(out), {px}, [px, a](Tape& t, int self) {
    Matrix gx = t.grad(self);
    for (auto& v : gx.data) v *= a;
    add_into(t.grad_sink(px), gx);
  });
}

Var scalar_mul(Var x, double c) { return scalar_affine(x, c, 0.0); }

Var transpose(Var x) {
  Matrix out = transpose(x.value());
  int px = x.id;
  return x.tape->emit(std::move(out), {px}, [px](Tape& t, int self) {
    add_into(t.grad_sink(px), transpose(t.grad(self)));
  });
}

Var grad_scale(Var x, double factor) {
  Matrix out = x.value();
  int px = x.id;
  return x.tape->emit(std::move(out), {px}, [px, factor](Tape& t, int self) {
    Matrix gx = t.grad(self);
    for (auto& v : gx.data) v *= factor;
    add_into(t.grad_sink(px), gx);
  });
}

Var bilinear(Var e, Var w, Var r) {
  require_same_tape("bilinear", e, w);
  require_same_tape("bilinear", e, r);
  const Matrix& ev = e.value();
  const Matrix& wv = w.value();
  const Matrix& rv = r.value();
  require(rv.rows == 1, "bilinear", "summary must be a 1-row vector, got " +
                                        shape_str(rv));
  require(ev.cols == wv.rows && wv.cols == rv.cols, "bilinear",
          "shapes do not conform: " + shape_str(ev) + " * " + shape_str(wv) +
              " * " + shape_str(rv) + "^T");
  Matrix wr = matmul(wv, transpose(rv));  // d x 1
  Matrix out = matmul(ev, wr);            // n x 1
  int pe = e.id, pw = w.id, pr = r.id;
  return e.tape->emit(std::move(out), {pe, pw, pr},
                      [pe, pw, pr](Tape& t, int self) {
    const Matrix& g = t.grad(self);          // n x 1
    const Matrix& ev = t.value(pe);          // n x d
    const Matrix& wv = t.value(pw);          // d x k
    const Matrix& rv = t.value(pr);          // 1 x k
    if (t.needs_grad(pe)) {
      Matrix wr = matmul(wv, transpose(rv));             // d x 1
      add_into(t.grad_sink(pe), matmul(g, transpose(wr)));
    }
    if (t.needs_grad(pw)) {
      Matrix etg = matmul(transpose(ev), g);             // d x 1
      add_into(t.grad_sink(pw), matmul(etg, rv));        // d x k
    }
    if (t.needs_grad(pr)) {
      Matrix gte = matmul(transpose(g), ev);             // 1 x d
      add_into(t.grad_sink(pr), matmul(gte, wv));        // 1 x k
    }
  });
}

Var gather_rows(Var x, std::vector<int> positions) {
  const Matrix& xv = x.value();
  for (int p : positions)
    require(p >= 0 && static_cast<std::size_t>(p) < xv.rows, "gather_rows",
            "row index out of range");
  Matrix out(positions.size(), xv.cols);
  for (std::size_t i = 0; i < positions.size(); ++i)
    std::copy(xv.row_ptr(positions[i]), xv.row_ptr(positions[i]) + xv.cols,
              out.row_ptr(i));
  int px = x.id;
  std::size_t nrows = xv.rows;
  return x.tape->emit(std::move(out), {px},
                      [px, nrows, positions = std::move(positions)](Tape& t,
                                                                   int self) {
    const Matrix& g = t.grad(self);
    Matrix gx(nrows, g.cols);
    for (std::size_t i = 0; i < positions.size(); ++i) {
      double* dst = gx.row_ptr(positions[i]);
      const double* src = g.row_ptr(i);
      for (std::size_t j = 0; j < g.cols; ++j) dst[j] += src[j];
    }
    add_into(t.grad_sink(px), gx);
  });
}

Var gather_weighted_sum(
    Var x, std::vector<std::vector<std::pair<int, double>>> lists) {
  const Matrix& xv = x.value();
  for (const auto& list : lists)
    for (const auto& [u, w] : list) {
      (void)w;
      require(u >= 0 && static_cast<std::size_t>(u) < xv.rows,
              "gather_weighted_sum", "row index out of range");
    }
  Matrix out(lists.size(), xv.cols);
  for (std::size_t i = 0; i < lists.size(); ++i) {
    double* dst = out.row_ptr(i);
    for (const auto& [u, w] : lists[i]) {
      const double* src = xv.row_ptr(u);
      for (std::size_t j = 0; j < xv.cols; ++j) dst[j] += w * src[j];
    }
  }
  int px = x.id;
  std::size_t nrows = xv.rows;
  return x.tape->emit(std::move(out), {px},
                      [px, nrows, lists = std::move(lists)](Tape& t, int self) {
    const Matrix& g = t.grad(self);
    Matrix gx(nrows, g.cols);
    for (std::size_t i = 0; i < lists.size(); ++i) {
      const double* src = g.row_ptr(i);
      for (const auto& [u, w] : lists[i]) {
        double* dst = gx.row_ptr(u);
        for (std::size_t j = 0; j < g.cols; ++j) dst[j] += w * src[j];
      }
    }
    add_into(t.grad_sink(px), gx);
  });
}

// ---- checkpoint ------------------------------------------------------------

namespace {

constexpr char kMagic[8] = {'G', 'D', 'C', 'K', 'P', 'T', '0', '1'};

void check_little_endian() {
  if constexpr (std::endian::native != std::endian::little)
    throw std::runtime_error("checkpoint: little-endian host required");
}

template <typename T>
void write_raw(std::ostream& os, const T& v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_raw(std::istream& is) {
  T v{};
  is.read(reinterpret_cast<char*>(&v), sizeof(T));
  return v;
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path,
                     const std::vector<const Tensor*>& tensors) {
  check_little_endian();
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("checkpoint: cannot open " + path.string());
  os.write(kMagic, sizeof(kMagic));
  write_raw<std::uint64_t>(os, tensors.size());
  for (const Tensor* t : tensors) {
    write_raw<std::uint32_t>(os, static_cast<std::uint32_t>(t->name.size()));
    os.write(t->name.data(), static_cast<std::streamsize>(t->name.size()));
    write_raw<std::uint64_t>(os, t->value.rows);
    write_raw<std::uint64_t>(os, t->value.cols);
    os.write(reinterpret_cast<const char*>(t->value.data.data()),
             static_cast<std::streamsize>(t->value.size() * sizeof(double)));
  }
  if (!os) throw std::runtime_error("checkpoint: write failed " + path.string());
}

std::map<std::string, Matrix> load_checkpoint(
    const std::filesystem::path& path) {
  check_little_endian();
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("checkpoint: cannot open " + path.string());
  char magic[8];
  is.read(magic, sizeof(magic));
  if (!is || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
    throw ValidationError("checkpoint: bad magic in " + path.string());
  const auto count = read_raw<std::uint64_t>(is);
  std::map<std::string, Matrix> result;
  for (std::uint64_t i = 0; i < count; ++i) {
    const auto name_len = read_raw<std::uint32_t>(is);
    std::string name(name_len, '\0');
    is.read(name.data(), name_len);
    const auto rows = read_raw<std::uint64_t>(is);
    const auto cols = read_raw<std::uint64_t>(is);
    Matrix m(rows, cols);
    is.read(reinterpret_cast<char*>(m.data.data()),
            static_cast<std::streamsize>(m.size() * sizeof(double)));
    if (!is)
      throw ValidationError("checkpoint: truncated file " + path.string());
    result.emplace(std::move(name), std::move(m));
  }
  return result;
}

void restore_checkpoint(const std::filesystem::path& path,
                        const std::vector<Tensor*>& tensors) {
  auto loaded = load_checkpoint(path);
  for (Tensor* t : tensors) {
    auto it = loaded.find(t->name);
    if (it == loaded.end())
      throw ValidationError("checkpoint: missing tensor '" + t->name + "'");
    if (!it->second.same_shape(t->value))
      throw ValidationError("checkpoint: shape mismatch for '" + t->name +
                            "'");
    t->value = it->second;
  }
}

}  // namespace graphda
