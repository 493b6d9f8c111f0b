#include "mpcc/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

namespace mpcc {

namespace {

[[noreturn]] void fail(const std::string& msg) {
  throw std::invalid_argument(msg);
}

void check_shape(const Shape& s) {
  if (s.empty()) fail("tensor shape must have at least one dimension");
  for (long d : s) {
    if (d < 1) fail("tensor shape dimensions must be >= 1, got " + shape_str(s));
  }
}

std::string two_shapes(const char* op, const Shape& a, const Shape& b) {
  std::ostringstream os;
  os << op << ": incompatible shapes " << shape_str(a) << " and "
     << shape_str(b);
  return os.str();
}

// Row-major strides, with stride 0 on broadcast (size-1) axes.
std::vector<long> broadcast_strides(const Shape& in, const Shape& out) {
  const long r_out = static_cast<long>(out.size());
  const long r_in = static_cast<long>(in.size());
  std::vector<long> strides(r_out, 0);
  long s = 1;
  for (long i = r_in - 1; i >= 0; --i) {
    const long o = i + (r_out - r_in);
    strides[o] = (in[i] == 1) ? 0 : s;
    s *= in[i];
  }
  return strides;
}

// dC = A(ta) * B(tb), with A of stored shape (ar x ac), B of (br x bc).
// accumulate=false overwrites out.
void mm(const double* a, long ar, long ac, bool ta, const double* b, long br,
        long bc, bool tb, double* out, bool accumulate) {
  const long m = ta ? ac : ar;
  const long k = ta ? ar : ac;
  const long n = tb ? br : bc;
  if (!accumulate) std::fill(out, out + m * n, 0.0);
  for (long i = 0; i < m; ++i) {
    for (long p = 0; p < k; ++p) {
      const double av = ta ? a[p * ac + i] : a[i * ac + p];
      if (av == 0.0) continue;
      const double* brow = tb ? nullptr : b + p * bc;
      double* orow = out + i * n;
      if (tb) {
        for (long j = 0; j < n; ++j) orow[j] += av * b[j * bc + p];
      } else {
        for (long j = 0; j < n; ++j) orow[j] += av * brow[j];
      }
    }
  }
}

}  // namespace

long shape_numel(const Shape& s) {
  long n = 1;
  for (long d : s) n *= d;
  return n;
}

std::string shape_str(const Shape& s) {
  std::ostringstream os;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i) os << 'x';
    os << s[i];
  }
  return os.str();
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
  return full(std::move(shape), 0.0, requires_grad);
}

Tensor Tensor::full(Shape shape, double v, bool requires_grad) {
  check_shape(shape);
  Tensor t;
  t.d_ = std::make_shared<TensorData>();
  t.d_->values.assign(static_cast<std::size_t>(shape_numel(shape)), v);
  t.d_->shape = std::move(shape);
  t.d_->requires_grad = requires_grad;
  return t;
}

Tensor Tensor::from(Shape shape, std::vector<double> values,
                    bool requires_grad) {
  check_shape(shape);
  if (shape_numel(shape) != static_cast<long>(values.size()))
    fail("tensor: " + std::to_string(values.size()) +
         " values do not fill shape " + shape_str(shape));
  Tensor t;
  t.d_ = std::make_shared<TensorData>();
  t.d_->shape = std::move(shape);
  t.d_->values = std::move(values);
  t.d_->requires_grad = requires_grad;
  return t;
}

Tensor Tensor::scalar(double v) { return from({1}, {v}); }

long Tensor::rows() const {
  if (rank() != 2) fail("rows(): tensor is not rank 2, shape " + shape_str(shape()));
  return d_->shape[0];
}

long Tensor::cols() const {
  if (rank() != 2) fail("cols(): tensor is not rank 2, shape " + shape_str(shape()));
  return d_->shape[1];
}

double Tensor::value() const {
  if (numel() != 1)
    fail("value(): tensor with shape " + shape_str(shape()) + " is not scalar");
  return d_->values[0];
}

std::vector<double>& Tensor::grad_buffer() {
  if (d_->grad.empty()) d_->grad.assign(d_->values.size(), 0.0);
  return d_->grad;
}

const std::vector<double>* Tensor::grad() const {
  return d_->grad.empty() ? nullptr : &d_->grad;
}

Tensor one_hot(const std::vector<int>& idx, long k) {
  if (idx.empty()) fail("one_hot: empty index list");
  Tensor t = Tensor::zeros({static_cast<long>(idx.size()), k});
  for (std::size_t i = 0; i < idx.size(); ++i) {
    if (idx[i] < 0 || idx[i] >= k)
      fail("one_hot: index " + std::to_string(idx[i]) + " outside [0, " +
           std::to_string(k) + ")");
    t.values()[i * k + idx[i]] = 1.0;
  }
  return t;
}

// ---------------------------------------------------------------------------
// elementwise binary with broadcasting

Tensor Tape::binary_broadcast(const char* op, const Tensor& a, const Tensor& b,
                              bool is_add) {
  const Shape& sa = a.shape();
  const Shape& sb = b.shape();
  const long rank = std::max<long>(sa.size(), sb.size());
  Shape out_shape(rank, 1);
  for (long i = 0; i < rank; ++i) {
    const long da = (i < rank - static_cast<long>(sa.size())) ? 1 : sa[i - (rank - sa.size())];
    const long db = (i < rank - static_cast<long>(sb.size())) ? 1 : sb[i - (rank - sb.size())];
    if (da != db && da != 1 && db != 1) fail(two_shapes(op, sa, sb));
    out_shape[i] = std::max(da, db);
  }

  Tensor out = Tensor::zeros(out_shape);
  const long n = out.numel();
  const auto& va = a.values();
  const auto& vb = b.values();
  auto& vo = out.values();

  if (sa == sb) {
    if (is_add)
      for (long i = 0; i < n; ++i) vo[i] = va[i] + vb[i];
    else
      for (long i = 0; i < n; ++i) vo[i] = va[i] * vb[i];
  } else {
    const auto stra = broadcast_strides(sa, out_shape);
    const auto strb = broadcast_strides(sb, out_shape);
    std::vector<long> idx(rank, 0);
    long ia = 0, ib = 0;
    for (long i = 0; i < n; ++i) {
      vo[i] = is_add ? va[ia] + vb[ib] : va[ia] * vb[ib];
      for (long d = rank - 1; d >= 0; --d) {
        ++idx[d];
        ia += stra[d];
        ib += strb[d];
        if (idx[d] < out_shape[d]) break;
        idx[d] = 0;
        ia -= stra[d] * out_shape[d];
        ib -= strb[d] * out_shape[d];
      }
    }
  }

  if (a.requires_grad() || b.requires_grad()) {
    out.set_requires_grad(true);
    Tensor ac = a, bc = b, oc = out;
    record([ac, bc, oc, is_add]() mutable {
      const auto* og = oc.grad();
      if (!og) return;
      const Shape& os = oc.shape();
      auto pull_into = [&](Tensor& t, const Tensor& other) {
        auto& g = t.grad_buffer();
        const auto stri = broadcast_strides(t.shape(), os);
        const auto stro = broadcast_strides(other.shape(), os);
        const long rank = static_cast<long>(os.size());
        std::vector<long> idx(rank, 0);
        long ii = 0, io = 0;
        const long n = shape_numel(os);
        for (long i = 0; i < n; ++i) {
          g[ii] += is_add ? (*og)[i] : (*og)[i] * other.values()[io];
          for (long d = rank - 1; d >= 0; --d) {
            ++idx[d];
            ii += stri[d];
            io += stro[d];
            if (idx[d] < os[d]) break;
            idx[d] = 0;
            ii -= stri[d] * os[d];
            io -= stro[d] * os[d];
          }
        }
      };
      if (ac.requires_grad()) pull_into(ac, bc);
      if (bc.requires_grad()) pull_into(bc, ac);
    });
  }
  return out;
}

Tensor Tape::add(const Tensor& a, const Tensor& b) {
  return binary_broadcast("add", a, b, true);
}

Tensor Tape::sub(const Tensor& a, const Tensor& b) {
  return add(a, negate(b));
}

Tensor Tape::mul(const Tensor& a, const Tensor& b) {
  return binary_broadcast("mul", a, b, false);
}

// ---------------------------------------------------------------------------
// elementwise unary

Tensor Tape::unary(const char* op, const Tensor& a,
                   const std::function<double(double)>& f,
                   const std::function<double(double, double)>& df) {
  (void)op;
  Tensor out = Tensor::zeros(a.shape());
  const long n = a.numel();
  for (long i = 0; i < n; ++i) out.values()[i] = f(a.values()[i]);
  if (a.requires_grad()) {
    out.set_requires_grad(true);
    Tensor ac = a, oc = out;
    record([ac, oc, df]() mutable {
      const auto* og = oc.grad();
      if (!og) return;
      auto& g = ac.grad_buffer();
      const long n = ac.numel();
      for (long i = 0; i < n; ++i)
        g[i] += (*og)[i] * df(ac.values()[i], oc.values()[i]);
    });
  }
  return out;
}

Tensor Tape::negate(const Tensor& a) {
  return unary("negate", a, [](double x) { return -x; },
               [](double, double) { return -1.0; });
}

Tensor Tape::exp(const Tensor& a) {
  return unary("exp", a, [](double x) { return std::exp(x); },
               [](double, double y) { return y; });
}

Tensor Tape::log(const Tensor& a) {
  for (double v : a.values()) {
    if (!(v > 0.0))
      fail("log: non-positive input " + std::to_string(v) + " in tensor of shape " +
           shape_str(a.shape()));
  }
  return unary("log", a, [](double x) { return std::log(x); },
               [](double x, double) { return 1.0 / x; });
}

Tensor Tape::tanh(const Tensor& a) {
  return unary("tanh", a, [](double x) { return std::tanh(x); },
               [](double, double y) { return 1.0 - y * y; });
}

Tensor Tape::softplus(const Tensor& a) {
  // max(x,0) + log1p(exp(-|x|)) is finite for any finite x
  return unary(
      "softplus", a,
      [](double x) { return std::max(x, 0.0) + std::log1p(std::exp(-std::fabs(x))); },
      [](double x, double) { return 1.0 / (1.0 + std::exp(-x)); });
}

Tensor Tape::leaky_relu(const Tensor& a) {
  return unary("leaky_relu", a,
               [](double x) { return x > 0.0 ? x : kLeakySlope * x; },
               [](double x, double) { return x > 0.0 ? 1.0 : kLeakySlope; });
}

Tensor Tape::relu(const Tensor& a) {
  return unary("relu", a, [](double x) { return x > 0.0 ? x : 0.0; },
               [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

Tensor Tape::square(const Tensor& a) {
  return unary("square", a, [](double x) { return x * x; },
               [](double x, double) { return 2.0 * x; });
}

// ---------------------------------------------------------------------------
// matmul

Tensor Tape::matmul(const Tensor& a, const Tensor& b, bool transpose_a,
                    bool transpose_b) {
  if (a.rank() != 2 || b.rank() != 2) fail(two_shapes("matmul", a.shape(), b.shape()));
  const long ar = a.shape()[0], ac = a.shape()[1];
  const long br = b.shape()[0], bc = b.shape()[1];
  const long m = transpose_a ? ac : ar;
  const long k = transpose_a ? ar : ac;
  const long kb = transpose_b ? bc : br;
  const long n = transpose_b ? br : bc;
  if (k != kb) fail(two_shapes("matmul", a.shape(), b.shape()));

  Tensor out = Tensor::zeros({m, n});
  mm(a.values().data(), ar, ac, transpose_a, b.values().data(), br, bc,
     transpose_b, out.values().data(), false);

  if (a.requires_grad() || b.requires_grad()) {
    out.set_requires_grad(true);
    Tensor ac_ = a, bc_ = b, oc = out;
    record([ac_, bc_, oc, transpose_a, transpose_b]() mutable {
      const auto* og = oc.grad();
      if (!og) return;
      const long ar = ac_.shape()[0], ac = ac_.shape()[1];
      const long br = bc_.shape()[0], bc = bc_.shape()[1];
      const double* gd = og->data();
      const long m = oc.shape()[0], n = oc.shape()[1];
      if (ac_.requires_grad()) {
        double* da = ac_.grad_buffer().data();
        if (!transpose_a) {
          // dA += dC * B', where B' is B as used in the forward pass
          mm(gd, m, n, false, bc_.values().data(), br, bc, !transpose_b, da,
             true);
        } else {
          // dA += (dC * B'^T)^T = B' * dC^T
          mm(bc_.values().data(), br, bc, transpose_b, gd, m, n, true, da,
             true);
        }
      }
      if (bc_.requires_grad()) {
        double* db = bc_.grad_buffer().data();
        if (!transpose_b) {
          // dB += A'^T * dC
          mm(ac_.values().data(), ar, ac, !transpose_a, gd, m, n, false, db,
             true);
        } else {
          // dB += (A'^T * dC)^T = dC^T * A'
          mm(gd, m, n, true, ac_.values().data(), ar, ac, transpose_a, db,
             true);
        }
      }
    });
  }
  return out;
}

// ---------------------------------------------------------------------------
// reductions

Tensor Tape::sum(const Tensor& a) {
  double s = 0.0;
  for (double v : a.values()) s += v;
  Tensor out = Tensor::scalar(s);
  if (a.requires_grad()) {
    out.set_requires_grad(true);
    Tensor ac = a, oc = out;
    record([ac, oc]() mutable {
      const auto* og = oc.grad();
      if (!og) return;
      auto& g = ac.grad_buffer();
      for (double& gi : g) gi += (*og)[0];
    });
  }
  return out;
}

Tensor Tape::mean(const Tensor& a) {
  const double inv = 1.0 / static_cast<double>(a.numel());
  double s = 0.0;
  for (double v : a.values()) s += v;
  Tensor out = Tensor::scalar(s * inv);
  if (a.requires_grad()) {
    out.set_requires_grad(true);
    Tensor ac = a, oc = out;
    record([ac, oc, inv]() mutable {
      const auto* og = oc.grad();
      if (!og) return;
      auto& g = ac.grad_buffer();
      for (double& gi : g) gi += (*og)[0] * inv;
    });
  }
  return out;
}

Tensor Tape::sum_axis(const Tensor& a, int axis, bool keepdim) {
  if (a.rank() != 2 || (axis != 0 && axis != 1))
    fail("sum_axis: expects a rank-2 tensor and axis 0 or 1, got shape " +
         shape_str(a.shape()) + " axis " + std::to_string(axis));
  const long r = a.shape()[0], c = a.shape()[1];
  Shape os = axis == 0 ? (keepdim ? Shape{1, c} : Shape{c})
                       : (keepdim ? Shape{r, 1} : Shape{r});
  Tensor out = Tensor::zeros(os);
  for (long i = 0; i < r; ++i)
    for (long j = 0; j < c; ++j)
      out.values()[axis == 0 ? j : i] += a.values()[i * c + j];
  if (a.requires_grad()) {
    out.set_requires_grad(true);
    Tensor ac = a, oc = out;
    record([ac, oc, axis]() mutable {
      const auto* og = oc.grad();
      if (!og) return;
      auto& g = ac.grad_buffer();
      const long r = ac.shape()[0], c = ac.shape()[1];
      for (long i = 0; i < r; ++i)
        for (long j = 0; j < c; ++j)
          g[i * c + j] += (*og)[axis == 0 ? j : i];
    });
  }
  return out;
}

Tensor Tape::mean_axis(const Tensor& a, int axis, bool keepdim) {
  Tensor s = sum_axis(a, axis, keepdim);
  const double inv = 1.0 / static_cast<double>(a.shape()[axis]);
  return mul(s, Tensor::scalar(inv));
}

// ---------------------------------------------------------------------------
// structural ops along the last axis

Tensor Tape::concat(const Tensor& a, const Tensor& b) {
  if (a.rank() != b.rank() || (a.rank() != 1 && a.rank() != 2))
    fail(two_shapes("concat", a.shape(), b.shape()));
  Shape os;
  long rows = 1, ca, cb;
  if (a.rank() == 1) {
    ca = a.shape()[0];
    cb = b.shape()[0];
    os = {ca + cb};
  } else {
    if (a.shape()[0] != b.shape()[0]) fail(two_shapes("concat", a.shape(), b.shape()));
    rows = a.shape()[0];
    ca = a.shape()[1];
    cb = b.shape()[1];
    os = {rows, ca + cb};
  }
  Tensor out = Tensor::zeros(os);
  for (long i = 0; i < rows; ++i) {
    std::copy(a.values().begin() + i * ca, a.values().begin() + (i + 1) * ca,
              out.values().begin() + i * (ca + cb));
    std::copy(b.values().begin() + i * cb, b.values().begin() + (i + 1) * cb,
              out.values().begin() + i * (ca + cb) + ca);
  }
  if (a.requires_grad() || b.requires_grad()) {
    out.set_requires_grad(true);
    Tensor ac = a, bc = b, oc = out;
    record([ac, bc, oc, rows, ca, cb]() mutable {
      const auto* og = oc.grad();
      if (!og) return;
      if (ac.requires_grad()) {
        auto& g = ac.grad_buffer();
        for (long i = 0; i < rows; ++i)
          for (long j = 0; j < ca; ++j) g[i * ca + j] += (*og)[i * (ca + cb) + j];
      }
      if (bc.requires_grad()) {
        auto& g = bc.grad_buffer();
        for (long i = 0; i < rows; ++i)
          for (long j = 0; j < cb; ++j)
            g[i * cb + j] += (*og)[i * (ca + cb) + ca + j];
      }
    });
  }
  return out;
}

Tensor Tape::slice(const Tensor& a, long lo, long hi) {
  if (a.rank() != 1 && a.rank() != 2)
    fail("slice: expects rank 1 or 2, got shape " + shape_str(a.shape()));
  const long rows = a.rank() == 2 ? a.shape()[0] : 1;
  const long c = a.rank() == 2 ? a.shape()[1] : a.shape()[0];
  if (lo < 0 || hi > c || lo >= hi)
    fail("slice: range [" + std::to_string(lo) + ", " + std::to_string(hi) +
         ") invalid for last axis of shape " + shape_str(a.shape()));
  const long w = hi - lo;
  Tensor out = Tensor::zeros(a.rank() == 2 ? Shape{rows, w} : Shape{w});
  for (long i = 0; i < rows; ++i)
    std::copy(a.values().begin() + i * c + lo, a.values().begin() + i * c + hi,
              out.values().begin() + i * w);
  if (a.requires_grad()) {
    out.set_requires_grad(true);
    Tensor ac = a, oc = out;
    record([ac, oc, rows, c, lo, w]() mutable {
      const auto* og = oc.grad();
      if (!og) return;
      auto& g = ac.grad_buffer();
      for (long i = 0; i < rows; ++i)
        for (long j = 0; j < w; ++j) g[i * c + lo + j] += (*og)[i * w + j];
    });
  }
  return out;
}

Tensor Tape::logsumexp(const Tensor& a, bool keepdim) {
  if (a.rank() != 1 && a.rank() != 2)
    fail("logsumexp: expects rank 1 or 2, got shape " + shape_str(a.shape()));
  const long rows = a.rank() == 2 ? a.shape()[0] : 1;
  const long c = a.rank() == 2 ? a.shape()[1] : a.shape()[0];
  Shape os = a.rank() == 2 ? (keepdim ? Shape{rows, 1} : Shape{rows}) : Shape{1};
  Tensor out = Tensor::zeros(os);
  for (long i = 0; i < rows; ++i) {
    const double* row = a.values().data() + i * c;
    double mx = row[0];
    for (long j = 1; j < c; ++j) mx = std::max(mx, row[j]);
    double s = 0.0;
    for (long j = 0; j < c; ++j) s += std::exp(row[j] - mx);
    out.values()[i] = mx + std::log(s);
  }
  if (a.requires_grad()) {
    out.set_requires_grad(true);
    Tensor ac = a, oc = out;
    record([ac, oc, rows, c]() mutable {
      const auto* og = oc.grad();
      if (!og) return;
      auto& g = ac.grad_buffer();
      for (long i = 0; i < rows; ++i)
        for (long j = 0; j < c; ++j)
          g[i * c + j] +=
              (*og)[i] * std::exp(ac.values()[i * c + j] - oc.values()[i]);
    });
  }
  return out;
}

Tensor Tape::reshape(const Tensor& a, Shape shape) {
  if (shape_numel(shape) != a.numel())
    fail("reshape: cannot view " + shape_str(a.shape()) + " as " +
         shape_str(shape));
  Tensor out = Tensor::from(std::move(shape), a.values());
  if (a.requires_grad()) {
    out.set_requires_grad(true);
    Tensor ac = a, oc = out;
    record([ac, oc]() mutable {
      const auto* og = oc.grad();
      if (!og) return;
      auto& g = ac.grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += (*og)[i];
    });
  }
  return out;
}

Tensor Tape::detach(const Tensor& a) {
  return Tensor::from(a.shape(), a.values());
}

void Tape::backward(const Tensor& root) {
  if (root.numel() != 1)
    fail("backward: root must be scalar, got shape " + shape_str(root.shape()));
  if (root.requires_grad()) {
    auto& g = const_cast<Tensor&>(root).grad_buffer();
    g[0] += 1.0;
  }
  for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) it->pull();
}

}  // namespace mpcc
