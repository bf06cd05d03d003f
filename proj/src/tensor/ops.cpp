// Copyright 2026 The allo Authors
// SPDX-License-Identifier: Apache-2.0

#include "allo/ops.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <limits>
#include <fmt/format.h>

#include "allo/error.hpp"

namespace allo::ops {
namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapC = Eigen::Map<const RowMat>;
using Map = Eigen::Map<RowMat>;

[[noreturn]] void dim_error(std::string_view op, const Tensor& a, const Tensor& b) {
  throw DimensionError(
      fmt::format("{}: incompatible shapes {} and {}", op, shape_string(a.shape()), shape_string(b.shape())));
}

void require_rank(std::string_view op, const Tensor& a, std::size_t rank) {
  if (a.rank() != rank) {
    throw DimensionError(fmt::format("{}: expected rank {} input, got shape {}", op, rank, shape_string(a.shape())));
  }
}

template <typename F, typename DF>
Tensor unary(const Tensor& a, F f, DF df) {
  std::vector<double> out(a.size());
  auto in = a.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = f(in[i]);
  Tensor y(a.shape(), std::move(out), should_record({&a}));
  if (y.requires_grad()) {
    GradTape::active()->record(y, [a, y, df](GradTape& tape) {
      if (!a.requires_grad()) return;
      auto gy = tape.grad(y);
      auto ga = tape.grad(a);
      auto x = a.data();
      auto yv = y.data();
      for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += gy[i] * df(x[i], yv[i]);
    });
  }
  return y;
}

// Rows and columns of a rank-1 or rank-2 tensor viewed as a matrix.
std::pair<std::size_t, std::size_t> as_matrix(std::string_view op, const Tensor& a) {
  if (a.rank() == 1) return {1, a.dim(0)};
  if (a.rank() == 2) return {a.dim(0), a.dim(1)};
  throw DimensionError(fmt::format("{}: expected rank 1 or 2, got shape {}", op, shape_string(a.shape())));
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(0)) dim_error("matmul", a, b);
  const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  std::vector<double> out(m * n);
  Map(out.data(), m, n).noalias() = MapC(a.data().data(), m, k) * MapC(b.data().data(), k, n);
  Tensor c({m, n}, std::move(out), should_record({&a, &b}));
  if (c.requires_grad()) {
    GradTape::active()->record(c, [a, b, c, m, k, n](GradTape& tape) {
      MapC gc(tape.grad(c).data(), m, n);
      if (a.requires_grad()) {
        Map(tape.grad(a).data(), m, k).noalias() += gc * MapC(b.data().data(), k, n).transpose();
      }
      if (b.requires_grad()) {
        Map(tape.grad(b).data(), k, n).noalias() += MapC(a.data().data(), m, k).transpose() * gc;
      }
    });
  }
  return c;
}

Tensor add(const Tensor& a, const Tensor& b) {
  const bool broadcast = a.shape() != b.shape();
  if (broadcast && !(a.rank() == 2 && b.rank() == 1 && a.dim(1) == b.dim(0))) dim_error("add", a, b);
  const std::size_t n = b.size();
  std::vector<double> out(a.data().begin(), a.data().end());
  auto bv = b.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += bv[broadcast ? i % n : i];
  Tensor y(a.shape(), std::move(out), should_record({&a, &b}));
  if (y.requires_grad()) {
    GradTape::active()->record(y, [a, b, y, n, broadcast](GradTape& tape) {
      auto gy = tape.grad(y);
      if (a.requires_grad()) {
        auto ga = tape.grad(a);
        for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += gy[i];
      }
      if (b.requires_grad()) {
        auto gb = tape.grad(b);
        for (std::size_t i = 0; i < gy.size(); ++i) gb[broadcast ? i % n : i] += gy[i];
      }
    });
  }
  return y;
}

Tensor add_qv_bias(const Tensor& qkv, const Tensor& bias) {
  if (qkv.rank() != 2 || bias.rank() != 1 || qkv.dim(1) % 3 != 0 || bias.dim(0) * 3 != qkv.dim(1) * 2) {
    dim_error("add_qv_bias", qkv, bias);
  }
  const std::size_t d = bias.dim(0) / 2, w = 3 * d;
  // Column c of qkv takes bias[src(c)]; key columns take nothing.
  auto src = [d](std::size_t c) { return c < d ? c : c - d; };
  std::vector<double> out(qkv.data().begin(), qkv.data().end());
  for (std::size_t i = 0; i < out.size(); ++i) {
    const std::size_t c = i % w;
    if (c < d || c >= 2 * d) out[i] += bias[src(c)];
  }
  Tensor y(qkv.shape(), std::move(out), should_record({&qkv, &bias}));
  if (y.requires_grad()) {
    GradTape::active()->record(y, [qkv, bias, y, d, w, src](GradTape& tape) {
      auto gy = tape.grad(y);
      if (qkv.requires_grad()) {
        auto ga = tape.grad(qkv);
        for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += gy[i];
      }
      if (bias.requires_grad()) {
        auto gb = tape.grad(bias);
        for (std::size_t i = 0; i < gy.size(); ++i) {
          const std::size_t c = i % w;
          if (c < d || c >= 2 * d) gb[src(c)] += gy[i];
        }
      }
    });
  }
  return y;
}

Tensor sub(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) dim_error("sub", a, b);
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] - b[i];
  Tensor y(a.shape(), std::move(out), should_record({&a, &b}));
  if (y.requires_grad()) {
    GradTape::active()->record(y, [a, b, y](GradTape& tape) {
      auto gy = tape.grad(y);
      if (a.requires_grad()) {
        auto ga = tape.grad(a);
        for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += gy[i];
      }
      if (b.requires_grad()) {
        auto gb = tape.grad(b);
        for (std::size_t i = 0; i < gb.size(); ++i) gb[i] -= gy[i];
      }
    });
  }
  return y;
}

Tensor mul(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) dim_error("mul", a, b);
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] * b[i];
  Tensor y(a.shape(), std::move(out), should_record({&a, &b}));
  if (y.requires_grad()) {
    GradTape::active()->record(y, [a, b, y](GradTape& tape) {
      auto gy = tape.grad(y);
      if (a.requires_grad()) {
        auto ga = tape.grad(a);
        for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += gy[i] * b[i];
      }
      if (b.requires_grad()) {
        auto gb = tape.grad(b);
        for (std::size_t i = 0; i < gb.size(); ++i) gb[i] += gy[i] * a[i];
      }
    });
  }
  return y;
}

Tensor scale(const Tensor& a, double factor) {
  return unary(a, [factor](double x) { return x * factor; }, [factor](double, double) { return factor; });
}

Tensor neg(const Tensor& a) {
  return unary(a, [](double x) { return -x; }, [](double, double) { return -1.0; });
}

Tensor log(const Tensor& a) {
  return unary(a, [](double x) { return std::log(x); }, [](double x, double) { return 1.0 / x; });
}

Tensor exp(const Tensor& a) {
  return unary(a, [](double x) { return std::exp(x); }, [](double, double y) { return y; });
}

Tensor sigmoid(const Tensor& a) {
  return unary(
      a,
      [](double x) {
        if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
        const double e = std::exp(x);
        return e / (1.0 + e);
      },
      [](double, double y) { return y * (1.0 - y); });
}

Tensor log_sigmoid(const Tensor& a) {
  return unary(
      a, [](double x) { return std::min(x, 0.0) - std::log1p(std::exp(-std::abs(x))); },
      [](double x, double) {
        // d/dx log sigma(x) = sigma(-x)
        if (x >= 0) {
          const double e = std::exp(-x);
          return e / (1.0 + e);
        }
        return 1.0 / (1.0 + std::exp(x));
      });
}

Tensor gelu(const Tensor& a) {
  constexpr double kC = 0.7978845608028654;  // sqrt(2/pi)
  constexpr double kA = 0.044715;
  return unary(
      a,
      [](double x) {
        const double u = kC * (x + kA * x * x * x);
        return 0.5 * x * (1.0 + std::tanh(u));
      },
      [](double x, double) {
        const double u = kC * (x + kA * x * x * x);
        const double t = std::tanh(u);
        const double du = kC * (1.0 + 3.0 * kA * x * x);
        return 0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * du;
      });
}

Tensor abs(const Tensor& a) {
  return unary(a, [](double x) { return std::abs(x); }, [](double x, double) { return std::copysign(1.0, x); });
}

Tensor sum(const Tensor& a) {
  double total = 0.0;
  for (double v : a.data()) total += v;
  Tensor y = Tensor::scalar(total, should_record({&a}));
  if (y.requires_grad()) {
    GradTape::active()->record(y, [a, y](GradTape& tape) {
      const double g = tape.grad(y)[0];
      for (double& v : tape.grad(a)) v += g;
    });
  }
  return y;
}

Tensor mean(const Tensor& a) {
  if (a.size() == 0) throw DimensionError("mean: empty tensor");
  return scale(sum(a), 1.0 / static_cast<double>(a.size()));
}

Tensor softmax(const Tensor& a) {
  auto [rows, cols] = as_matrix("softmax", a);
  std::vector<double> out(a.size());
  for (std::size_t r = 0; r < rows; ++r) {
    const double* x = a.data().data() + r * cols;
    double* y = out.data() + r * cols;
    const double mx = *std::max_element(x, x + cols);
    double z = 0.0;
    for (std::size_t c = 0; c < cols; ++c) z += (y[c] = std::exp(x[c] - mx));
    for (std::size_t c = 0; c < cols; ++c) y[c] /= z;
  }
  Tensor y(a.shape(), std::move(out), should_record({&a}));
  if (y.requires_grad()) {
    GradTape::active()->record(y, [a, y, rows, cols](GradTape& tape) {
      auto gy = tape.grad(y);
      auto ga = tape.grad(a);
      for (std::size_t r = 0; r < rows; ++r) {
        const std::size_t o = r * cols;
        double dot = 0.0;
        for (std::size_t c = 0; c < cols; ++c) dot += gy[o + c] * y[o + c];
        for (std::size_t c = 0; c < cols; ++c) ga[o + c] += y[o + c] * (gy[o + c] - dot);
      }
    });
  }
  return y;
}

Tensor log_softmax(const Tensor& a) {
  auto [rows, cols] = as_matrix("log_softmax", a);
  std::vector<double> out(a.size());
  for (std::size_t r = 0; r < rows; ++r) {
    const double* x = a.data().data() + r * cols;
    double* y = out.data() + r * cols;
    const double mx = *std::max_element(x, x + cols);
    double z = 0.0;
    for (std::size_t c = 0; c < cols; ++c) z += std::exp(x[c] - mx);
    const double lz = mx + std::log(z);
    for (std::size_t c = 0; c < cols; ++c) y[c] = x[c] - lz;
  }
  Tensor y(a.shape(), std::move(out), should_record({&a}));
  if (y.requires_grad()) {
    GradTape::active()->record(y, [a, y, rows, cols](GradTape& tape) {
      auto gy = tape.grad(y);
      auto ga = tape.grad(a);
      for (std::size_t r = 0; r < rows; ++r) {
        const std::size_t o = r * cols;
        double total = 0.0;
        for (std::size_t c = 0; c < cols; ++c) total += gy[o + c];
        for (std::size_t c = 0; c < cols; ++c) ga[o + c] += gy[o + c] - std::exp(y[o + c]) * total;
      }
    });
  }
  return y;
}

Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias, double eps) {
  require_rank("layer_norm", x, 2);
  const std::size_t m = x.dim(0), n = x.dim(1);
  if (gain.shape() != Shape{n}) dim_error("layer_norm", x, gain);
  if (bias.shape() != Shape{n}) dim_error("layer_norm", x, bias);
  std::vector<double> out(m * n), xhat(m * n), rstd(m);
  for (std::size_t r = 0; r < m; ++r) {
    const double* xr = x.data().data() + r * n;
    double mu = 0.0;
    for (std::size_t c = 0; c < n; ++c) mu += xr[c];
    mu /= static_cast<double>(n);
    double var = 0.0;
    for (std::size_t c = 0; c < n; ++c) var += (xr[c] - mu) * (xr[c] - mu);
    var /= static_cast<double>(n);
    rstd[r] = 1.0 / std::sqrt(var + eps);
    for (std::size_t c = 0; c < n; ++c) {
      xhat[r * n + c] = (xr[c] - mu) * rstd[r];
      out[r * n + c] = xhat[r * n + c] * gain[c] + bias[c];
    }
  }
  Tensor y({m, n}, std::move(out), should_record({&x, &gain, &bias}));
  if (y.requires_grad()) {
    GradTape::active()->record(
        y, [x, gain, bias, y, m, n, xhat = std::move(xhat), rstd = std::move(rstd)](GradTape& tape) {
          auto gy = tape.grad(y);
          if (gain.requires_grad()) {
            auto gg = tape.grad(gain);
            for (std::size_t i = 0; i < m * n; ++i) gg[i % n] += gy[i] * xhat[i];
          }
          if (bias.requires_grad()) {
            auto gb = tape.grad(bias);
            for (std::size_t i = 0; i < m * n; ++i) gb[i % n] += gy[i];
          }
          if (x.requires_grad()) {
            auto gx = tape.grad(x);
            std::vector<double> dxhat(n);
            for (std::size_t r = 0; r < m; ++r) {
              const std::size_t o = r * n;
              double mean_d = 0.0, mean_dx = 0.0;
              for (std::size_t c = 0; c < n; ++c) {
                dxhat[c] = gy[o + c] * gain[c];
                mean_d += dxhat[c];
                mean_dx += dxhat[c] * xhat[o + c];
              }
              mean_d /= static_cast<double>(n);
              mean_dx /= static_cast<double>(n);
              for (std::size_t c = 0; c < n; ++c) {
                gx[o + c] += rstd[r] * (dxhat[c] - mean_d - xhat[o + c] * mean_dx);
              }
            }
          }
        });
  }
  return y;
}

Tensor embedding(const Tensor& table, std::span<const std::int32_t> ids) {
  require_rank("embedding", table, 2);
  const std::size_t v = table.dim(0), d = table.dim(1);
  std::vector<double> out(ids.size() * d);
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] < 0 || static_cast<std::size_t>(ids[i]) >= v) {
      throw DimensionError(fmt::format("embedding: index {} out of range for table {}", ids[i],
                                       shape_string(table.shape())));
    }
    std::copy_n(table.data().data() + static_cast<std::size_t>(ids[i]) * d, d, out.data() + i * d);
  }
  Tensor y({ids.size(), d}, std::move(out), should_record({&table}));
  if (y.requires_grad()) {
    GradTape::active()->record(y, [table, y, d, idx = std::vector<std::int32_t>(ids.begin(), ids.end())](
                                      GradTape& tape) {
      auto gy = tape.grad(y);
      auto gt = tape.grad(table);
      for (std::size_t i = 0; i < idx.size(); ++i) {
        const std::size_t row = static_cast<std::size_t>(idx[i]) * d;
        for (std::size_t c = 0; c < d; ++c) gt[row + c] += gy[i * d + c];
      }
    });
  }
  return y;
}

Tensor gather(const Tensor& a, std::span<const std::int32_t> cols) {
  require_rank("gather", a, 2);
  const std::size_t m = a.dim(0), n = a.dim(1);
  if (cols.size() != m) {
    throw DimensionError(fmt::format("gather: {} indices for input {}", cols.size(), shape_string(a.shape())));
  }
  std::vector<double> out(m);
  for (std::size_t i = 0; i < m; ++i) {
    if (cols[i] < 0 || static_cast<std::size_t>(cols[i]) >= n) {
      throw DimensionError(fmt::format("gather: index {} out of range for {}", cols[i], shape_string(a.shape())));
    }
    out[i] = a[i * n + static_cast<std::size_t>(cols[i])];
  }
  Tensor y({m}, std::move(out), should_record({&a}));
  if (y.requires_grad()) {
    GradTape::active()->record(y, [a, y, n, idx = std::vector<std::int32_t>(cols.begin(), cols.end())](
                                      GradTape& tape) {
      auto gy = tape.grad(y);
      auto ga = tape.grad(a);
      for (std::size_t i = 0; i < idx.size(); ++i) ga[i * n + static_cast<std::size_t>(idx[i])] += gy[i];
    });
  }
  return y;
}

Tensor slice_rows(const Tensor& a, std::size_t begin, std::size_t end) {
  require_rank("slice_rows", a, 2);
  if (begin > end || end > a.dim(0)) {
    throw DimensionError(
        fmt::format("slice_rows: range [{}, {}) invalid for shape {}", begin, end, shape_string(a.shape())));
  }
  const std::size_t n = a.dim(1);
  std::vector<double> out(a.data().begin() + static_cast<std::ptrdiff_t>(begin * n),
                          a.data().begin() + static_cast<std::ptrdiff_t>(end * n));
  Tensor y({end - begin, n}, std::move(out), should_record({&a}));
  if (y.requires_grad()) {
    GradTape::active()->record(y, [a, y, begin, n](GradTape& tape) {
      auto gy = tape.grad(y);
      auto ga = tape.grad(a);
      for (std::size_t i = 0; i < gy.size(); ++i) ga[begin * n + i] += gy[i];
    });
  }
  return y;
}

Tensor causal_attention(const Tensor& qkv, std::size_t n_heads) {
  require_rank("causal_attention", qkv, 2);
  const std::size_t t = qkv.dim(0);
  if (n_heads == 0 || qkv.dim(1) % (3 * n_heads) != 0) {
    throw DimensionError(fmt::format("causal_attention: width {} not divisible into 3 x {} heads", qkv.dim(1),
                                     n_heads));
  }
  const std::size_t d = qkv.dim(1) / 3, hd = d / n_heads, w = 3 * d;
  const double inv = 1.0 / std::sqrt(static_cast<double>(hd));
  const double* src = qkv.data().data();
  // probs[h][i][j] for j <= i, stored densely as t x t per head.
  std::vector<double> probs(n_heads * t * t, 0.0);
  std::vector<double> out(t * d, 0.0);
  for (std::size_t h = 0; h < n_heads; ++h) {
    const std::size_t qo = h * hd, ko = d + h * hd, vo = 2 * d + h * hd;
    for (std::size_t i = 0; i < t; ++i) {
      double* p = probs.data() + (h * t + i) * t;
      double mx = -std::numeric_limits<double>::infinity();
      for (std::size_t j = 0; j <= i; ++j) {
        double s = 0.0;
        for (std::size_t c = 0; c < hd; ++c) s += src[i * w + qo + c] * src[j * w + ko + c];
        p[j] = s * inv;
        mx = std::max(mx, p[j]);
      }
      double z = 0.0;
      for (std::size_t j = 0; j <= i; ++j) z += (p[j] = std::exp(p[j] - mx));
      for (std::size_t j = 0; j <= i; ++j) p[j] /= z;
      double* o = out.data() + i * d + h * hd;
      for (std::size_t j = 0; j <= i; ++j) {
        for (std::size_t c = 0; c < hd; ++c) o[c] += p[j] * src[j * w + vo + c];
      }
    }
  }
  Tensor y({t, d}, std::move(out), should_record({&qkv}));
  if (y.requires_grad()) {
    GradTape::active()->record(y, [qkv, y, t, d, hd, w, inv, n_heads, probs = std::move(probs)](GradTape& tape) {
      auto gy = tape.grad(y);
      auto gq = tape.grad(qkv);
      const double* src = qkv.data().data();
      std::vector<double> dp(t);
      for (std::size_t h = 0; h < n_heads; ++h) {
        const std::size_t qo = h * hd, ko = d + h * hd, vo = 2 * d + h * hd;
        for (std::size_t i = 0; i < t; ++i) {
          const double* p = probs.data() + (h * t + i) * t;
          const double* go = gy.data() + i * d + h * hd;
          double dot = 0.0;
          for (std::size_t j = 0; j <= i; ++j) {
            double s = 0.0;
            for (std::size_t c = 0; c < hd; ++c) {
              s += go[c] * src[j * w + vo + c];
              gq[j * w + vo + c] += p[j] * go[c];
            }
            dp[j] = s;
            dot += p[j] * s;
          }
          for (std::size_t j = 0; j <= i; ++j) {
            const double ds = p[j] * (dp[j] - dot) * inv;
            for (std::size_t c = 0; c < hd; ++c) {
              gq[i * w + qo + c] += ds * src[j * w + ko + c];
              gq[j * w + ko + c] += ds * src[i * w + qo + c];
            }
          }
        }
      }
    });
  }
  return y;
}

}  // namespace allo::ops
