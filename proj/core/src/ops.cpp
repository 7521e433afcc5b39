#include "hoic/ops.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <numeric>

namespace hoic::ops {

namespace {

using detail::Node;
using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapMat = Eigen::Map<RowMat>;
using CMapMat = Eigen::Map<const RowMat>;

// Grad buffer of parent i, or nullptr when that parent takes no gradient.
double* parent_grad(const Node& self, std::size_t i) {
  Node& p = *self.parents[i];
  if (!p.requires_grad) return nullptr;
  return p.ensure_grad().data();
}

const std::vector<double>& parent_value(const Node& self, std::size_t i) {
  return self.parents[i]->value;
}

// Size of the right operand's repeating block, or throws.
std::size_t broadcast_block(const Tensor& a, const Tensor& b, const char* op) {
  const Shape& sa = a.shape();
  const Shape& sb = b.shape();
  if (b.size() == 1) return 1;
  if (sb.size() <= sa.size() && std::equal(sb.begin(), sb.end(), sa.end() - static_cast<long>(sb.size()))) {
    return static_cast<std::size_t>(b.size());
  }
  throw ShapeError(std::string(op) + ": cannot broadcast " + shape_str(sb) + " onto " + shape_str(sa));
}

void require_same(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) + " vs " +
                     shape_str(b.shape()));
  }
}

template <typename F, typename DA, typename DB>
Tensor binary(const Tensor& a, const Tensor& b, const char* name, F f, DA dfa, DB dfb) {
  const std::size_t block = broadcast_block(a, b, name);
  const auto& va = a.data();
  const auto& vb = b.data();
  std::vector<double> out(va.size());
  for (std::size_t i = 0; i < va.size(); ++i) out[i] = f(va[i], vb[i % block]);
  return detail::make_result(a.shape(), std::move(out), {a, b}, [block, dfa, dfb](const Node& self) {
    const auto& x = parent_value(self, 0);
    const auto& y = parent_value(self, 1);
    double* ga = parent_grad(self, 0);
    double* gb = parent_grad(self, 1);
    for (std::size_t i = 0; i < self.grad.size(); ++i) {
      const double g = self.grad[i];
      const double yi = y[i % block];
      if (ga) ga[i] += g * dfa(x[i], yi);
      if (gb) gb[i % block] += g * dfb(x[i], yi);
    }
  });
}

template <typename F, typename D>
Tensor unary(const Tensor& a, F f, D df) {
  const auto& va = a.data();
  std::vector<double> out(va.size());
  for (std::size_t i = 0; i < va.size(); ++i) out[i] = f(va[i]);
  return detail::make_result(a.shape(), std::move(out), {a}, [df](const Node& self) {
    const auto& x = parent_value(self, 0);
    double* ga = parent_grad(self, 0);
    for (std::size_t i = 0; i < self.grad.size(); ++i) ga[i] += self.grad[i] * df(x[i], self.value[i]);
  });
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  return binary(
      a, b, "add", [](double x, double y) { return x + y; }, [](double, double) { return 1.0; },
      [](double, double) { return 1.0; });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  return binary(
      a, b, "sub", [](double x, double y) { return x - y; }, [](double, double) { return 1.0; },
      [](double, double) { return -1.0; });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  return binary(
      a, b, "mul", [](double x, double y) { return x * y; }, [](double, double y) { return y; },
      [](double x, double) { return x; });
}

Tensor div(const Tensor& a, const Tensor& b) {
  return binary(
      a, b, "div", [](double x, double y) { return x / y; }, [](double, double y) { return 1.0 / y; },
      [](double x, double y) { return -x / (y * y); });
}

Tensor minimum(const Tensor& a, const Tensor& b) {
  require_same(a, b, "minimum");
  // Ties route the gradient to a.
  return binary(
      a, b, "minimum", [](double x, double y) { return std::min(x, y); },
      [](double x, double y) { return x <= y ? 1.0 : 0.0; },
      [](double x, double y) { return x <= y ? 0.0 : 1.0; });
}

Tensor maximum(const Tensor& a, const Tensor& b) {
  require_same(a, b, "maximum");
  return binary(
      a, b, "maximum", [](double x, double y) { return std::max(x, y); },
      [](double x, double y) { return x >= y ? 1.0 : 0.0; },
      [](double x, double y) { return x >= y ? 0.0 : 1.0; });
}

Tensor neg(const Tensor& a) { return scale(a, -1.0); }

Tensor scale(const Tensor& a, double factor) {
  return unary(
      a, [factor](double x) { return x * factor; }, [factor](double, double) { return factor; });
}

Tensor add_scalar(const Tensor& a, double value) {
  return unary(
      a, [value](double x) { return x + value; }, [](double, double) { return 1.0; });
}

Tensor relu(const Tensor& a) {
  return unary(
      a, [](double x) { return x > 0.0 ? x : 0.0; }, [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

Tensor sigmoid(const Tensor& a) {
  return unary(
      a,
      [](double x) {
        if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
        const double e = std::exp(x);
        return e / (1.0 + e);
      },
      [](double, double y) { return y * (1.0 - y); });
}

Tensor tanh(const Tensor& a) {
  return unary(
      a, [](double x) { return std::tanh(x); }, [](double, double y) { return 1.0 - y * y; });
}

Tensor exp(const Tensor& a) {
  return unary(
      a, [](double x) { return std::exp(x); }, [](double, double y) { return y; });
}

Tensor log(const Tensor& a, double floor) {
  return unary(
      a, [floor](double x) { return std::log(std::max(x, floor)); },
      [floor](double x, double) { return x > floor ? 1.0 / x : 0.0; });
}

Tensor abs(const Tensor& a) {
  return unary(
      a, [](double x) { return std::abs(x); },
      [](double x, double) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); });
}

Tensor sum(const Tensor& a) {
  const auto& v = a.data();
  const double s = std::accumulate(v.begin(), v.end(), 0.0);
  return detail::make_result({1}, {s}, {a}, [](const Node& self) {
    double* ga = parent_grad(self, 0);
    const std::size_t n = parent_value(self, 0).size();
    for (std::size_t i = 0; i < n; ++i) ga[i] += self.grad[0];
  });
}

Tensor mean(const Tensor& a) {
  if (a.size() == 0) throw ShapeError("mean of empty tensor");
  return scale(sum(a), 1.0 / static_cast<double>(a.size()));
}

Tensor reshape(const Tensor& a, Shape shape) {
  if (numel(shape) != a.size()) {
    throw ShapeError("reshape " + shape_str(a.shape()) + " -> " + shape_str(shape));
  }
  std::vector<double> out(a.data().begin(), a.data().end());
  return detail::make_result(std::move(shape), std::move(out), {a}, [](const Node& self) {
    double* ga = parent_grad(self, 0);
    for (std::size_t i = 0; i < self.grad.size(); ++i) ga[i] += self.grad[i];
  });
}

Tensor permute(const Tensor& a, const std::vector<int>& perm) {
  const Shape& in = a.shape();
  const std::size_t r = in.size();
  if (perm.size() != r) throw ShapeError("permute: rank mismatch");
  Shape out_shape(r);
  std::vector<std::int64_t> in_stride(r, 1);
  for (int i = static_cast<int>(r) - 2; i >= 0; --i) in_stride[i] = in_stride[i + 1] * in[i + 1];
  std::vector<std::int64_t> src_stride(r);
  for (std::size_t i = 0; i < r; ++i) {
    out_shape[i] = in[static_cast<std::size_t>(perm[i])];
    src_stride[i] = in_stride[static_cast<std::size_t>(perm[i])];
  }
  const std::int64_t n = a.size();
  // Source offset for every output element, shared by forward and backward.
  auto index = std::make_shared<std::vector<std::int64_t>>(static_cast<std::size_t>(n));
  std::vector<int> ctr(r, 0);
  std::int64_t src = 0;
  for (std::int64_t i = 0; i < n; ++i) {
    (*index)[static_cast<std::size_t>(i)] = src;
    for (int d = static_cast<int>(r) - 1; d >= 0; --d) {
      if (++ctr[d] < out_shape[d]) {
        src += src_stride[d];
        break;
      }
      src -= src_stride[d] * (out_shape[d] - 1);
      ctr[d] = 0;
    }
  }
  const auto& v = a.data();
  std::vector<double> out(static_cast<std::size_t>(n));
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = v[static_cast<std::size_t>((*index)[i])];
  return detail::make_result(std::move(out_shape), std::move(out), {a}, [index](const Node& self) {
    double* ga = parent_grad(self, 0);
    for (std::size_t i = 0; i < self.grad.size(); ++i) ga[(*index)[i]] += self.grad[i];
  });
}

Tensor slice(const Tensor& a, int axis, int start, int length) {
  const Shape& in = a.shape();
  if (axis < 0) axis += static_cast<int>(in.size());
  if (axis < 0 || axis >= static_cast<int>(in.size()) || start < 0 || length < 0 ||
      start + length > in[static_cast<std::size_t>(axis)]) {
    throw ShapeError("slice out of range on " + shape_str(in));
  }
  std::int64_t outer = 1, inner = 1;
  for (int i = 0; i < axis; ++i) outer *= in[static_cast<std::size_t>(i)];
  for (std::size_t i = static_cast<std::size_t>(axis) + 1; i < in.size(); ++i) inner *= in[i];
  const std::int64_t full = in[static_cast<std::size_t>(axis)];
  Shape out_shape = in;
  out_shape[static_cast<std::size_t>(axis)] = length;
  const auto& v = a.data();
  std::vector<double> out(static_cast<std::size_t>(outer * length * inner));
  for (std::int64_t o = 0; o < outer; ++o) {
    std::copy_n(v.begin() + (o * full + start) * inner, length * inner, out.begin() + o * length * inner);
  }
  return detail::make_result(std::move(out_shape), std::move(out), {a},
                             [outer, inner, full, start, length](const Node& self) {
                               double* ga = parent_grad(self, 0);
                               for (std::int64_t o = 0; o < outer; ++o) {
                                 const double* g = self.grad.data() + o * length * inner;
                                 double* dst = ga + (o * full + start) * inner;
                                 for (std::int64_t i = 0; i < length * inner; ++i) dst[i] += g[i];
                               }
                             });
}

Tensor concat(const std::vector<Tensor>& parts, int axis) {
  if (parts.empty()) throw ShapeError("concat of nothing");
  const Shape& first = parts.front().shape();
  if (axis < 0) axis += static_cast<int>(first.size());
  std::int64_t outer = 1, inner = 1;
  for (int i = 0; i < axis; ++i) outer *= first[static_cast<std::size_t>(i)];
  for (std::size_t i = static_cast<std::size_t>(axis) + 1; i < first.size(); ++i) inner *= first[i];
  std::vector<std::int64_t> widths;
  std::int64_t total = 0;
  for (const auto& p : parts) {
    Shape s = p.shape();
    if (s.size() != first.size()) throw ShapeError("concat rank mismatch");
    for (std::size_t i = 0; i < s.size(); ++i) {
      if (static_cast<int>(i) != axis && s[i] != first[i]) {
        throw ShapeError("concat: " + shape_str(s) + " vs " + shape_str(first));
      }
    }
    widths.push_back(s[static_cast<std::size_t>(axis)]);
    total += widths.back();
  }
  Shape out_shape = first;
  out_shape[static_cast<std::size_t>(axis)] = static_cast<int>(total);
  std::vector<double> out(static_cast<std::size_t>(outer * total * inner));
  std::int64_t offset = 0;
  for (std::size_t k = 0; k < parts.size(); ++k) {
    const auto& v = parts[k].data();
    for (std::int64_t o = 0; o < outer; ++o) {
      std::copy_n(v.begin() + o * widths[k] * inner, widths[k] * inner,
                  out.begin() + (o * total + offset) * inner);
    }
    offset += widths[k];
  }
  return detail::make_result(std::move(out_shape), std::move(out), parts,
                             [outer, inner, total, widths](const Node& self) {
                               std::int64_t off = 0;
                               for (std::size_t k = 0; k < widths.size(); ++k) {
                                 if (double* gp = parent_grad(self, k)) {
                                   for (std::int64_t o = 0; o < outer; ++o) {
                                     const double* g = self.grad.data() + (o * total + off) * inner;
                                     double* dst = gp + o * widths[k] * inner;
                                     for (std::int64_t i = 0; i < widths[k] * inner; ++i) dst[i] += g[i];
                                   }
                                 }
                                 off += widths[k];
                               }
                             });
}

Tensor gather_rows(const Tensor& a, const std::vector<int>& rows) {
  if (a.rank() != 2) throw ShapeError("gather_rows needs a 2-D tensor, got " + shape_str(a.shape()));
  const int n = a.dim(0);
  const int d = a.dim(1);
  std::vector<double> out(rows.size() * static_cast<std::size_t>(d));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r] < 0 || rows[r] >= n) throw ShapeError("gather_rows index out of range");
    std::copy_n(a.data().begin() + static_cast<std::int64_t>(rows[r]) * d, d, out.begin() + static_cast<std::int64_t>(r) * d);
  }
  return detail::make_result({static_cast<int>(rows.size()), d}, std::move(out), {a},
                             [rows, d](const Node& self) {
                               double* ga = parent_grad(self, 0);
                               for (std::size_t r = 0; r < rows.size(); ++r) {
                                 for (int j = 0; j < d; ++j) {
                                   ga[static_cast<std::int64_t>(rows[r]) * d + j] += self.grad[r * d + j];
                                 }
                               }
                             });
}

Tensor repeat_rows(const Tensor& a, int n) {
  if (a.rank() != 2) throw ShapeError("repeat_rows needs (B, D), got " + shape_str(a.shape()));
  const int b = a.dim(0);
  const int d = a.dim(1);
  std::vector<double> out(static_cast<std::size_t>(b) * n * d);
  for (int i = 0; i < b; ++i) {
    for (int r = 0; r < n; ++r) {
      std::copy_n(a.data().begin() + static_cast<std::int64_t>(i) * d, d,
                  out.begin() + (static_cast<std::int64_t>(i) * n + r) * d);
    }
  }
  return detail::make_result({b, n, d}, std::move(out), {a}, [b, n, d](const Node& self) {
    double* ga = parent_grad(self, 0);
    for (int i = 0; i < b; ++i) {
      for (int r = 0; r < n; ++r) {
        for (int j = 0; j < d; ++j) ga[i * d + j] += self.grad[(static_cast<std::size_t>(i) * n + r) * d + j];
      }
    }
  });
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.rank() < 2 || b.rank() < 2) throw ShapeError("matmul needs rank >= 2");
  const int m = a.dim(-2), k = a.dim(-1);
  const int k2 = b.dim(-2), n = b.dim(-1);
  if (k != k2) throw ShapeError("matmul: " + shape_str(a.shape()) + " x " + shape_str(b.shape()));
  const std::int64_t batch = a.size() / (static_cast<std::int64_t>(m) * k);
  const bool shared_b = b.rank() == 2;
  if (!shared_b) {
    Shape lead_a(a.shape().begin(), a.shape().end() - 2);
    Shape lead_b(b.shape().begin(), b.shape().end() - 2);
    if (lead_a != lead_b) throw ShapeError("matmul batch mismatch " + shape_str(a.shape()) + " x " + shape_str(b.shape()));
  }
  Shape out_shape(a.shape().begin(), a.shape().end() - 2);
  out_shape.push_back(m);
  out_shape.push_back(n);
  std::vector<double> out(static_cast<std::size_t>(batch * m * n));
  const double* pa = a.data().data();
  const double* pb = b.data().data();
  if (shared_b) {
    MapMat(out.data(), batch * m, n).noalias() = CMapMat(pa, batch * m, k) * CMapMat(pb, k, n);
  } else {
    for (std::int64_t i = 0; i < batch; ++i) {
      MapMat(out.data() + i * m * n, m, n).noalias() =
          CMapMat(pa + i * m * k, m, k) * CMapMat(pb + i * k * n, k, n);
    }
  }
  return detail::make_result(std::move(out_shape), std::move(out), {a, b},
                             [batch, m, k, n, shared_b](const Node& self) {
                               const double* va = parent_value(self, 0).data();
                               const double* vb = parent_value(self, 1).data();
                               double* ga = parent_grad(self, 0);
                               double* gb = parent_grad(self, 1);
                               const double* g = self.grad.data();
                               if (shared_b) {
                                 CMapMat G(g, batch * m, n);
                                 if (ga) MapMat(ga, batch * m, k).noalias() += G * CMapMat(vb, k, n).transpose();
                                 if (gb) MapMat(gb, k, n).noalias() += CMapMat(va, batch * m, k).transpose() * G;
                                 return;
                               }
                               for (std::int64_t i = 0; i < batch; ++i) {
                                 CMapMat G(g + i * m * n, m, n);
                                 if (ga) MapMat(ga + i * m * k, m, k).noalias() += G * CMapMat(vb + i * k * n, k, n).transpose();
                                 if (gb) MapMat(gb + i * k * n, k, n).noalias() += CMapMat(va + i * m * k, m, k).transpose() * G;
                               }
                             });
}

Tensor linear(const Tensor& x, const Tensor& w, const Tensor& bias) {
  if (w.rank() != 2) throw ShapeError("linear weight must be 2-D");
  const int out_f = w.dim(0), in_f = w.dim(1);
  if (x.dim(-1) != in_f) {
    throw ShapeError("linear: input " + shape_str(x.shape()) + " vs weight " + shape_str(w.shape()));
  }
  const bool has_bias = bias.defined();
  if (has_bias && bias.size() != out_f) throw ShapeError("linear: bias size mismatch");
  const std::int64_t rows = x.size() / in_f;
  Shape out_shape = x.shape();
  out_shape.back() = out_f;
  std::vector<double> out(static_cast<std::size_t>(rows * out_f));
  MapMat O(out.data(), rows, out_f);
  O.noalias() = CMapMat(x.data().data(), rows, in_f) * CMapMat(w.data().data(), out_f, in_f).transpose();
  if (has_bias) O.rowwise() += Eigen::Map<const Eigen::RowVectorXd>(bias.data().data(), out_f);
  std::vector<Tensor> inputs{x, w};
  if (has_bias) inputs.push_back(bias);
  return detail::make_result(std::move(out_shape), std::move(out), std::move(inputs),
                             [rows, in_f, out_f, has_bias](const Node& self) {
                               CMapMat G(self.grad.data(), rows, out_f);
                               if (double* gx = parent_grad(self, 0)) {
                                 MapMat(gx, rows, in_f).noalias() += G * CMapMat(parent_value(self, 1).data(), out_f, in_f);
                               }
                               if (double* gw = parent_grad(self, 1)) {
                                 MapMat(gw, out_f, in_f).noalias() += G.transpose() * CMapMat(parent_value(self, 0).data(), rows, in_f);
                               }
                               if (has_bias) {
                                 if (double* gb = parent_grad(self, 2)) {
                                   Eigen::Map<Eigen::RowVectorXd>(gb, out_f) += G.colwise().sum();
                                 }
                               }
                             });
}

Tensor softmax_last(const Tensor& a) {
  const int k = a.dim(-1);
  const std::int64_t rows = a.size() / k;
  const auto& v = a.data();
  std::vector<double> out(v.size());
  for (std::int64_t r = 0; r < rows; ++r) {
    const double* x = v.data() + r * k;
    double* y = out.data() + r * k;
    const double mx = *std::max_element(x, x + k);
    double z = 0.0;
    for (int j = 0; j < k; ++j) z += (y[j] = std::exp(x[j] - mx));
    for (int j = 0; j < k; ++j) y[j] /= z;
  }
  return detail::make_result(a.shape(), std::move(out), {a}, [rows, k](const Node& self) {
    double* ga = parent_grad(self, 0);
    for (std::int64_t r = 0; r < rows; ++r) {
      const double* y = self.value.data() + r * k;
      const double* g = self.grad.data() + r * k;
      double dot = 0.0;
      for (int j = 0; j < k; ++j) dot += g[j] * y[j];
      for (int j = 0; j < k; ++j) ga[r * k + j] += y[j] * (g[j] - dot);
    }
  });
}

Tensor log_softmax_last(const Tensor& a) {
  const int k = a.dim(-1);
  const std::int64_t rows = a.size() / k;
  const auto& v = a.data();
  std::vector<double> out(v.size());
  for (std::int64_t r = 0; r < rows; ++r) {
    const double* x = v.data() + r * k;
    double* y = out.data() + r * k;
    const double mx = *std::max_element(x, x + k);
    double z = 0.0;
    for (int j = 0; j < k; ++j) z += std::exp(x[j] - mx);
    const double lse = mx + std::log(z);
    for (int j = 0; j < k; ++j) y[j] = x[j] - lse;
  }
  return detail::make_result(a.shape(), std::move(out), {a}, [rows, k](const Node& self) {
    double* ga = parent_grad(self, 0);
    for (std::int64_t r = 0; r < rows; ++r) {
      const double* y = self.value.data() + r * k;
      const double* g = self.grad.data() + r * k;
      double gs = 0.0;
      for (int j = 0; j < k; ++j) gs += g[j];
      for (int j = 0; j < k; ++j) ga[r * k + j] += g[j] - std::exp(y[j]) * gs;
    }
  });
}

Tensor log_softmax_channels(const Tensor& a) {
  if (a.rank() != 4) throw ShapeError("log_softmax_channels needs (B, K, H, W)");
  const int b = a.dim(0), k = a.dim(1);
  const std::int64_t hw = static_cast<std::int64_t>(a.dim(2)) * a.dim(3);
  const auto& v = a.data();
  std::vector<double> out(v.size());
  std::vector<double> mx(static_cast<std::size_t>(hw)), z(static_cast<std::size_t>(hw));
  for (int n = 0; n < b; ++n) {
    const double* x = v.data() + static_cast<std::int64_t>(n) * k * hw;
    double* y = out.data() + static_cast<std::int64_t>(n) * k * hw;
    std::fill(mx.begin(), mx.end(), -std::numeric_limits<double>::infinity());
    std::fill(z.begin(), z.end(), 0.0);
    for (int c = 0; c < k; ++c) {
      for (std::int64_t p = 0; p < hw; ++p) mx[p] = std::max(mx[p], x[c * hw + p]);
    }
    for (int c = 0; c < k; ++c) {
      for (std::int64_t p = 0; p < hw; ++p) z[p] += std::exp(x[c * hw + p] - mx[p]);
    }
    for (std::int64_t p = 0; p < hw; ++p) z[p] = mx[p] + std::log(z[p]);
    for (int c = 0; c < k; ++c) {
      for (std::int64_t p = 0; p < hw; ++p) y[c * hw + p] = x[c * hw + p] - z[p];
    }
  }
  return detail::make_result(a.shape(), std::move(out), {a}, [b, k, hw](const Node& self) {
    double* ga = parent_grad(self, 0);
    std::vector<double> gs(static_cast<std::size_t>(hw));
    for (int n = 0; n < b; ++n) {
      const std::int64_t base = static_cast<std::int64_t>(n) * k * hw;
      std::fill(gs.begin(), gs.end(), 0.0);
      for (int c = 0; c < k; ++c) {
        for (std::int64_t p = 0; p < hw; ++p) gs[p] += self.grad[base + c * hw + p];
      }
      for (int c = 0; c < k; ++c) {
        for (std::int64_t p = 0; p < hw; ++p) {
          const std::int64_t i = base + c * hw + p;
          ga[i] += self.grad[i] - std::exp(self.value[i]) * gs[p];
        }
      }
    }
  });
}

namespace {

// Column buffer (Cin*k*k, Ho*Wo) for one sample.
void im2col(const double* x, int cin, int h, int w, int k, int stride, int pad, int ho, int wo, double* col) {
  for (int c = 0; c < cin; ++c) {
    for (int ky = 0; ky < k; ++ky) {
      for (int kx = 0; kx < k; ++kx) {
        double* row = col + ((static_cast<std::int64_t>(c) * k + ky) * k + kx) * ho * wo;
        for (int oy = 0; oy < ho; ++oy) {
          const int iy = oy * stride - pad + ky;
          double* dst = row + static_cast<std::int64_t>(oy) * wo;
          if (iy < 0 || iy >= h) {
            std::fill_n(dst, wo, 0.0);
            continue;
          }
          const double* src = x + (static_cast<std::int64_t>(c) * h + iy) * w;
          for (int ox = 0; ox < wo; ++ox) {
            const int ix = ox * stride - pad + kx;
            dst[ox] = (ix >= 0 && ix < w) ? src[ix] : 0.0;
          }
        }
      }
    }
  }
}

void col2im(const double* col, int cin, int h, int w, int k, int stride, int pad, int ho, int wo, double* x) {
  for (int c = 0; c < cin; ++c) {
    for (int ky = 0; ky < k; ++ky) {
      for (int kx = 0; kx < k; ++kx) {
        const double* row = col + ((static_cast<std::int64_t>(c) * k + ky) * k + kx) * ho * wo;
        for (int oy = 0; oy < ho; ++oy) {
          const int iy = oy * stride - pad + ky;
          if (iy < 0 || iy >= h) continue;
          double* dst = x + (static_cast<std::int64_t>(c) * h + iy) * w;
          const double* src = row + static_cast<std::int64_t>(oy) * wo;
          for (int ox = 0; ox < wo; ++ox) {
            const int ix = ox * stride - pad + kx;
            if (ix >= 0 && ix < w) dst[ix] += src[ox];
          }
        }
      }
    }
  }
}

}  // namespace

Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor& bias, int stride, int pad) {
  if (x.rank() != 4 || w.rank() != 4) throw ShapeError("conv2d needs (B,C,H,W) input and (O,C,k,k) weight");
  const int b = x.dim(0), cin = x.dim(1), h = x.dim(2), wd = x.dim(3);
  const int cout = w.dim(0), k = w.dim(2);
  if (w.dim(1) != cin || w.dim(3) != k) {
    throw ShapeError("conv2d: input " + shape_str(x.shape()) + " vs weight " + shape_str(w.shape()));
  }
  const int ho = (h + 2 * pad - k) / stride + 1;
  const int wo = (wd + 2 * pad - k) / stride + 1;
  if (ho <= 0 || wo <= 0) throw ShapeError("conv2d: empty output for " + shape_str(x.shape()));
  const bool has_bias = bias.defined();
  const std::int64_t ckk = static_cast<std::int64_t>(cin) * k * k;
  const std::int64_t npix = static_cast<std::int64_t>(ho) * wo;
  const std::int64_t in_sz = static_cast<std::int64_t>(cin) * h * wd;

  auto cols = std::make_shared<std::vector<double>>(static_cast<std::size_t>(b * ckk * npix));
  std::vector<double> out(static_cast<std::size_t>(static_cast<std::int64_t>(b) * cout * npix));
  CMapMat W(w.data().data(), cout, ckk);
  for (int n = 0; n < b; ++n) {
    double* col = cols->data() + n * ckk * npix;
    im2col(x.data().data() + n * in_sz, cin, h, wd, k, stride, pad, ho, wo, col);
    MapMat O(out.data() + static_cast<std::int64_t>(n) * cout * npix, cout, npix);
    O.noalias() = W * CMapMat(col, ckk, npix);
    if (has_bias) O.colwise() += Eigen::Map<const Eigen::VectorXd>(bias.data().data(), cout);
  }
  std::vector<Tensor> inputs{x, w};
  if (has_bias) inputs.push_back(bias);
  return detail::make_result(
      {b, cout, ho, wo}, std::move(out), std::move(inputs),
      [=](const Node& self) {
        double* gx = parent_grad(self, 0);
        double* gw = parent_grad(self, 1);
        double* gb = has_bias ? parent_grad(self, 2) : nullptr;
        CMapMat Wt(parent_value(self, 1).data(), cout, ckk);
        std::vector<double> dcol;
        if (gx) dcol.resize(static_cast<std::size_t>(ckk * npix));
        for (int n = 0; n < b; ++n) {
          CMapMat G(self.grad.data() + static_cast<std::int64_t>(n) * cout * npix, cout, npix);
          const double* col = cols->data() + n * ckk * npix;
          if (gw) MapMat(gw, cout, ckk).noalias() += G * CMapMat(col, ckk, npix).transpose();
          if (gb) Eigen::Map<Eigen::VectorXd>(gb, cout) += G.rowwise().sum();
          if (gx) {
            MapMat(dcol.data(), ckk, npix).noalias() = Wt.transpose() * G;
            col2im(dcol.data(), cin, h, wd, k, stride, pad, ho, wo, gx + n * in_sz);
          }
        }
      });
}

Tensor upsample2x(const Tensor& x) {
  if (x.rank() != 4) throw ShapeError("upsample2x needs (B,C,H,W)");
  const int b = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
  const std::int64_t planes = static_cast<std::int64_t>(b) * c;
  std::vector<double> out(static_cast<std::size_t>(planes * 4 * h * w));
  const auto& v = x.data();
  for (std::int64_t p = 0; p < planes; ++p) {
    for (int y = 0; y < 2 * h; ++y) {
      const double* src = v.data() + (p * h + y / 2) * w;
      double* dst = out.data() + (p * 2 * h + y) * 2 * w;
      for (int xx = 0; xx < 2 * w; ++xx) dst[xx] = src[xx / 2];
    }
  }
  return detail::make_result({b, c, 2 * h, 2 * w}, std::move(out), {x}, [planes, h, w](const Node& self) {
    double* gx = parent_grad(self, 0);
    for (std::int64_t p = 0; p < planes; ++p) {
      for (int y = 0; y < 2 * h; ++y) {
        const double* g = self.grad.data() + (p * 2 * h + y) * 2 * w;
        double* dst = gx + (p * h + y / 2) * w;
        for (int xx = 0; xx < 2 * w; ++xx) dst[xx / 2] += g[xx];
      }
    }
  });
}

namespace {

// Shared normalization kernel. Elements are grouped into `groups` sets that
// are normalized independently; group_of maps an element index to its set and
// channel_of to the affine channel.
struct NormLayout {
  std::int64_t count;        // elements per group
  std::int64_t num_groups;
  std::function<std::int64_t(std::int64_t)> group_of;
  std::function<std::int64_t(std::int64_t)> channel_of;
};

Tensor normalize(const Tensor& x, const Tensor& gamma, const Tensor& beta, const std::vector<double>& mean,
                 const std::vector<double>& inv_std, const NormLayout& L, bool batch_stats) {
  const auto& v = x.data();
  const std::size_t n = v.size();
  auto xhat = std::make_shared<std::vector<double>>(n);
  std::vector<double> out(n);
  const double* g = gamma.data().data();
  const double* bt = beta.data().data();
  for (std::size_t i = 0; i < n; ++i) {
    const auto grp = static_cast<std::size_t>(L.group_of(static_cast<std::int64_t>(i)));
    const auto ch = static_cast<std::size_t>(L.channel_of(static_cast<std::int64_t>(i)));
    (*xhat)[i] = (v[i] - mean[grp]) * inv_std[grp];
    out[i] = (*xhat)[i] * g[ch] + bt[ch];
  }
  return detail::make_result(x.shape(), std::move(out), {x, gamma, beta},
                             [xhat, inv_std, L, batch_stats](const Node& self) {
                               const std::size_t n = self.grad.size();
                               const double* gm = parent_value(self, 1).data();
                               double* gx = parent_grad(self, 0);
                               double* gg = parent_grad(self, 1);
                               double* gbeta = parent_grad(self, 2);
                               std::vector<double> sum_dy(static_cast<std::size_t>(L.num_groups), 0.0);
                               std::vector<double> sum_dy_xhat(static_cast<std::size_t>(L.num_groups), 0.0);
                               for (std::size_t i = 0; i < n; ++i) {
                                 const auto ch = static_cast<std::size_t>(L.channel_of(static_cast<std::int64_t>(i)));
                                 const double dy = self.grad[i];
                                 if (gg) gg[ch] += dy * (*xhat)[i];
                                 if (gbeta) gbeta[ch] += dy;
                                 const auto grp = static_cast<std::size_t>(L.group_of(static_cast<std::int64_t>(i)));
                                 const double dxh = dy * gm[ch];
                                 sum_dy[grp] += dxh;
                                 sum_dy_xhat[grp] += dxh * (*xhat)[i];
                               }
                               if (!gx) return;
                               const double m = static_cast<double>(L.count);
                               for (std::size_t i = 0; i < n; ++i) {
                                 const auto ch = static_cast<std::size_t>(L.channel_of(static_cast<std::int64_t>(i)));
                                 const auto grp = static_cast<std::size_t>(L.group_of(static_cast<std::int64_t>(i)));
                                 const double dxh = self.grad[i] * gm[ch];
                                 if (batch_stats) {
                                   gx[i] += inv_std[grp] * (dxh - sum_dy[grp] / m - (*xhat)[i] * sum_dy_xhat[grp] / m);
                                 } else {
                                   gx[i] += inv_std[grp] * dxh;
                                 }
                               }
                             });
}

}  // namespace

Tensor batch_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, BatchNormState& state,
                  bool training) {
  if (x.rank() != 2 && x.rank() != 4) throw ShapeError("batch_norm needs (B,C) or (B,C,H,W)");
  const int b = x.dim(0), c = x.dim(1);
  const std::int64_t hw = x.rank() == 4 ? static_cast<std::int64_t>(x.dim(2)) * x.dim(3) : 1;
  if (gamma.size() != c || beta.size() != c) throw ShapeError("batch_norm affine size mismatch");
  if (state.running_mean.size() != static_cast<std::size_t>(c)) {
    state.running_mean.assign(static_cast<std::size_t>(c), 0.0);
    state.running_var.assign(static_cast<std::size_t>(c), 1.0);
  }
  NormLayout L;
  L.count = b * hw;
  L.num_groups = c;
  L.group_of = [c, hw](std::int64_t i) { return (i / hw) % c; };
  L.channel_of = L.group_of;
  std::vector<double> mean(static_cast<std::size_t>(c), 0.0), inv_std(static_cast<std::size_t>(c));
  const auto& v = x.data();
  if (training) {
    std::vector<double> var(static_cast<std::size_t>(c), 0.0);
    for (std::size_t i = 0; i < v.size(); ++i) mean[static_cast<std::size_t>(L.group_of(static_cast<std::int64_t>(i)))] += v[i];
    for (auto& m : mean) m /= static_cast<double>(L.count);
    for (std::size_t i = 0; i < v.size(); ++i) {
      const auto ch = static_cast<std::size_t>(L.group_of(static_cast<std::int64_t>(i)));
      var[ch] += (v[i] - mean[ch]) * (v[i] - mean[ch]);
    }
    for (int ch = 0; ch < c; ++ch) {
      const double biased = var[ch] / static_cast<double>(L.count);
      inv_std[ch] = 1.0 / std::sqrt(biased + state.eps);
      const double unbiased = L.count > 1 ? var[ch] / static_cast<double>(L.count - 1) : biased;
      state.running_mean[ch] = (1 - state.momentum) * state.running_mean[ch] + state.momentum * mean[ch];
      state.running_var[ch] = (1 - state.momentum) * state.running_var[ch] + state.momentum * unbiased;
    }
  } else {
    for (int ch = 0; ch < c; ++ch) {
      mean[ch] = state.running_mean[ch];
      inv_std[ch] = 1.0 / std::sqrt(state.running_var[ch] + state.eps);
    }
  }
  return normalize(x, gamma, beta, mean, inv_std, L, training);
}

Tensor group_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, int groups, double eps) {
  if (x.rank() != 2 && x.rank() != 4) throw ShapeError("group_norm needs (B,C) or (B,C,H,W)");
  const int b = x.dim(0), c = x.dim(1);
  if (groups <= 0 || c % groups != 0) throw ShapeError("group_norm: channels not divisible by groups");
  if (gamma.size() != c || beta.size() != c) throw ShapeError("group_norm affine size mismatch");
  const std::int64_t hw = x.rank() == 4 ? static_cast<std::int64_t>(x.dim(2)) * x.dim(3) : 1;
  const std::int64_t per_group = (c / groups) * hw;
  NormLayout L;
  L.count = per_group;
  L.num_groups = static_cast<std::int64_t>(b) * groups;
  L.group_of = [per_group](std::int64_t i) { return i / per_group; };
  L.channel_of = [c, hw](std::int64_t i) { return (i / hw) % c; };
  std::vector<double> mean(static_cast<std::size_t>(L.num_groups), 0.0), inv_std(static_cast<std::size_t>(L.num_groups), 0.0);
  const auto& v = x.data();
  for (std::int64_t grp = 0; grp < L.num_groups; ++grp) {
    const double* p = v.data() + grp * per_group;
    double m = 0.0;
    for (std::int64_t i = 0; i < per_group; ++i) m += p[i];
    m /= static_cast<double>(per_group);
    double var = 0.0;
    for (std::int64_t i = 0; i < per_group; ++i) var += (p[i] - m) * (p[i] - m);
    var /= static_cast<double>(per_group);
    mean[grp] = m;
    inv_std[grp] = 1.0 / std::sqrt(var + eps);
  }
  return normalize(x, gamma, beta, mean, inv_std, L, true);
}

Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps) {
  const int d = x.dim(-1);
  if (gamma.size() != d || beta.size() != d) throw ShapeError("layer_norm affine size mismatch");
  const std::int64_t rows = x.size() / d;
  NormLayout L;
  L.count = d;
  L.num_groups = rows;
  L.group_of = [d](std::int64_t i) { return i / d; };
  L.channel_of = [d](std::int64_t i) { return i % d; };
  std::vector<double> mean(static_cast<std::size_t>(rows)), inv_std(static_cast<std::size_t>(rows));
  const auto& v = x.data();
  for (std::int64_t r = 0; r < rows; ++r) {
    const double* p = v.data() + r * d;
    double m = 0.0;
    for (int i = 0; i < d; ++i) m += p[i];
    m /= d;
    double var = 0.0;
    for (int i = 0; i < d; ++i) var += (p[i] - m) * (p[i] - m);
    mean[r] = m;
    inv_std[r] = 1.0 / std::sqrt(var / d + eps);
  }
  return normalize(x, gamma, beta, mean, inv_std, L, true);
}

Tensor dropout(const Tensor& x, double p, std::mt19937_64& rng, bool training) {
  if (!training || p <= 0.0) return x;
  auto mask = std::make_shared<std::vector<double>>(static_cast<std::size_t>(x.size()));
  const double keep = 1.0 - p;
  for (auto& m : *mask) {
    const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
    m = u < keep ? 1.0 / keep : 0.0;
  }
  std::vector<double> out(mask->size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x.data()[i] * (*mask)[i];
  return detail::make_result(x.shape(), std::move(out), {x}, [mask](const Node& self) {
    double* gx = parent_grad(self, 0);
    for (std::size_t i = 0; i < self.grad.size(); ++i) gx[i] += self.grad[i] * (*mask)[i];
  });
}

Tensor global_avg_pool(const Tensor& x) {
  if (x.rank() != 4) throw ShapeError("global_avg_pool needs (B,C,H,W)");
  return region_avg_pool(x, std::vector<CellRect>(static_cast<std::size_t>(x.dim(0)),
                                                  CellRect{0, 0, x.dim(3), x.dim(2)}));
}

Tensor region_avg_pool(const Tensor& x, const std::vector<CellRect>& rects) {
  if (x.rank() != 4) throw ShapeError("region_avg_pool needs (B,C,H,W)");
  const int b = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
  if (rects.size() != static_cast<std::size_t>(b)) throw ShapeError("region_avg_pool: one rect per sample");
  for (const auto& r : rects) {
    if (r.empty() || r.x0 < 0 || r.y0 < 0 || r.x1 > w || r.y1 > h) {
      throw ShapeError("region_avg_pool: rect outside the feature grid");
    }
  }
  std::vector<double> out(static_cast<std::size_t>(b) * c, 0.0);
  const auto& v = x.data();
  for (int n = 0; n < b; ++n) {
    const auto& r = rects[static_cast<std::size_t>(n)];
    const double inv = 1.0 / static_cast<double>((r.x1 - r.x0) * (r.y1 - r.y0));
    for (int ch = 0; ch < c; ++ch) {
      const double* plane = v.data() + (static_cast<std::int64_t>(n) * c + ch) * h * w;
      double s = 0.0;
      for (int y = r.y0; y < r.y1; ++y) {
        for (int xx = r.x0; xx < r.x1; ++xx) s += plane[y * w + xx];
      }
      out[static_cast<std::size_t>(n) * c + ch] = s * inv;
    }
  }
  return detail::make_result({b, c}, std::move(out), {x}, [rects, c, h, w](const Node& self) {
    double* gx = parent_grad(self, 0);
    for (std::size_t n = 0; n < rects.size(); ++n) {
      const auto& r = rects[n];
      const double inv = 1.0 / static_cast<double>((r.x1 - r.x0) * (r.y1 - r.y0));
      for (int ch = 0; ch < c; ++ch) {
        const double g = self.grad[n * c + ch] * inv;
        double* plane = gx + (static_cast<std::int64_t>(n) * c + ch) * h * w;
        for (int y = r.y0; y < r.y1; ++y) {
          for (int xx = r.x0; xx < r.x1; ++xx) plane[y * w + xx] += g;
        }
      }
    }
  });
}

Tensor scale_cells(const Tensor& x, const Tensor& factor, const std::vector<std::vector<std::uint8_t>>& masks) {
  if (x.rank() != 4) throw ShapeError("scale_cells needs (B,C,H,W)");
  if (factor.size() != 1) throw ShapeError("scale_cells factor must have one element");
  const int b = x.dim(0), c = x.dim(1);
  const std::int64_t hw = static_cast<std::int64_t>(x.dim(2)) * x.dim(3);
  if (masks.size() != static_cast<std::size_t>(b)) throw ShapeError("scale_cells: one mask per sample");
  for (const auto& m : masks) {
    if (static_cast<std::int64_t>(m.size()) != hw) throw ShapeError("scale_cells: mask size mismatch");
  }
  const double f = factor.item();
  std::vector<double> out(x.data().begin(), x.data().end());
  for (int n = 0; n < b; ++n) {
    const auto& m = masks[static_cast<std::size_t>(n)];
    for (int ch = 0; ch < c; ++ch) {
      double* plane = out.data() + (static_cast<std::int64_t>(n) * c + ch) * hw;
      for (std::int64_t p = 0; p < hw; ++p) {
        if (m[static_cast<std::size_t>(p)]) plane[p] *= f;
      }
    }
  }
  return detail::make_result(x.shape(), std::move(out), {x, factor}, [masks, c, hw, f](const Node& self) {
    double* gx = parent_grad(self, 0);
    double* gf = parent_grad(self, 1);
    const auto& xv = parent_value(self, 0);
    for (std::size_t n = 0; n < masks.size(); ++n) {
      const auto& m = masks[n];
      for (int ch = 0; ch < c; ++ch) {
        const std::int64_t base = (static_cast<std::int64_t>(n) * c + ch) * hw;
        for (std::int64_t p = 0; p < hw; ++p) {
          const double g = self.grad[base + p];
          if (m[static_cast<std::size_t>(p)]) {
            if (gx) gx[base + p] += g * f;
            if (gf) gf[0] += g * xv[base + p];
          } else if (gx) {
            gx[base + p] += g;
          }
        }
      }
    }
  });
}

Tensor mul_channels(const Tensor& x, const Tensor& gate) {
  if (x.rank() != 4 || gate.rank() != 2 || gate.dim(0) != x.dim(0) || gate.dim(1) != x.dim(1)) {
    throw ShapeError("mul_channels: " + shape_str(x.shape()) + " with gate " + shape_str(gate.shape()));
  }
  const std::int64_t planes = static_cast<std::int64_t>(x.dim(0)) * x.dim(1);
  const std::int64_t hw = static_cast<std::int64_t>(x.dim(2)) * x.dim(3);
  std::vector<double> out(static_cast<std::size_t>(x.size()));
  for (std::int64_t p = 0; p < planes; ++p) {
    const double g = gate.data()[static_cast<std::size_t>(p)];
    for (std::int64_t i = 0; i < hw; ++i) out[p * hw + i] = x.data()[p * hw + i] * g;
  }
  return detail::make_result(x.shape(), std::move(out), {x, gate}, [planes, hw](const Node& self) {
    double* gx = parent_grad(self, 0);
    double* gg = parent_grad(self, 1);
    const auto& xv = parent_value(self, 0);
    const auto& gv = parent_value(self, 1);
    for (std::int64_t p = 0; p < planes; ++p) {
      double acc = 0.0;
      for (std::int64_t i = 0; i < hw; ++i) {
        const double g = self.grad[p * hw + i];
        if (gx) gx[p * hw + i] += g * gv[p];
        acc += g * xv[p * hw + i];
      }
      if (gg) gg[p] += acc;
    }
  });
}

Tensor binary_cross_entropy(const Tensor& probs, const std::vector<double>& targets, double eps) {
  if (static_cast<std::int64_t>(targets.size()) != probs.size()) {
    throw ShapeError("binary_cross_entropy: " + std::to_string(targets.size()) + " targets for " +
                     shape_str(probs.shape()));
  }
  const auto& p = probs.data();
  const double n = static_cast<double>(p.size());
  double loss = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double q = std::clamp(p[i], eps, 1.0 - eps);
    loss -= targets[i] * std::log(q) + (1.0 - targets[i]) * std::log(1.0 - q);
  }
  return detail::make_result({1}, {loss / n}, {probs}, [targets, eps, n](const Node& self) {
    double* gp = parent_grad(self, 0);
    const auto& p = parent_value(self, 0);
    for (std::size_t i = 0; i < p.size(); ++i) {
      if (p[i] < eps || p[i] > 1.0 - eps) continue;
      gp[i] += self.grad[0] * (-targets[i] / p[i] + (1.0 - targets[i]) / (1.0 - p[i])) / n;
    }
  });
}

Tensor nll_sum(const Tensor& log_probs, const std::vector<int>& targets) {
  if (log_probs.rank() != 2 || log_probs.dim(0) != static_cast<int>(targets.size())) {
    throw ShapeError("nll_sum: " + shape_str(log_probs.shape()) + " with " + std::to_string(targets.size()) +
                     " targets");
  }
  const int k = log_probs.dim(1);
  double loss = 0.0;
  for (std::size_t r = 0; r < targets.size(); ++r) {
    if (targets[r] < 0 || targets[r] >= k) throw ShapeError("nll_sum: target out of range");
    loss -= log_probs.data()[r * k + static_cast<std::size_t>(targets[r])];
  }
  return detail::make_result({1}, {loss}, {log_probs}, [targets, k](const Node& self) {
    double* g = parent_grad(self, 0);
    for (std::size_t r = 0; r < targets.size(); ++r) g[r * k + static_cast<std::size_t>(targets[r])] -= self.grad[0];
  });
}

Tensor pixel_nll(const Tensor& log_probs, std::span<const int> labels, std::span<const double> class_weights) {
  if (log_probs.rank() != 4) throw ShapeError("pixel_nll needs (B,K,H,W)");
  const int b = log_probs.dim(0), k = log_probs.dim(1);
  const std::int64_t hw = static_cast<std::int64_t>(log_probs.dim(2)) * log_probs.dim(3);
  if (static_cast<std::int64_t>(labels.size()) != b * hw) throw ShapeError("pixel_nll: label count mismatch");
  if (static_cast<int>(class_weights.size()) != k) throw ShapeError("pixel_nll: weight count mismatch");
  const auto& v = log_probs.data();
  double num = 0.0, den = 0.0;
  for (int n = 0; n < b; ++n) {
    for (std::int64_t p = 0; p < hw; ++p) {
      const int lbl = labels[static_cast<std::size_t>(n * hw + p)];
      if (lbl < 0 || lbl >= k) throw ShapeError("pixel_nll: label out of range");
      const double wgt = class_weights[static_cast<std::size_t>(lbl)];
      num -= wgt * v[static_cast<std::size_t>((static_cast<std::int64_t>(n) * k + lbl) * hw + p)];
      den += wgt;
    }
  }
  if (den <= 0.0) throw ShapeError("pixel_nll: zero total weight");
  std::vector<int> lbl(labels.begin(), labels.end());
  std::vector<double> wts(class_weights.begin(), class_weights.end());
  return detail::make_result({1}, {num / den}, {log_probs}, [lbl = std::move(lbl), wts = std::move(wts), b, k, hw, den](const Node& self) {
    double* g = parent_grad(self, 0);
    const double s = self.grad[0] / den;
    for (int n = 0; n < b; ++n) {
      for (std::int64_t p = 0; p < hw; ++p) {
        const int l = lbl[static_cast<std::size_t>(n * hw + p)];
        g[(static_cast<std::int64_t>(n) * k + l) * hw + p] -= s * wts[static_cast<std::size_t>(l)];
      }
    }
  });
}

}  // namespace hoic::ops
