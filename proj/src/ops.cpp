// Copyright 2026 The lfsr Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "lfsr/ops.hpp"

#include <unsupported/Eigen/FFT>

#include <cmath>
#include <complex>
#include <numbers>
#include <vector>

namespace lfsr::ops {

namespace {

template <typename Scalar>
using Mat = Matrix<Scalar>;

void require(bool ok, const char* what) {
  if (!ok) throw std::invalid_argument(what);
}

template <typename Scalar>
void require_same_shape(const Var<Scalar>& a, const Var<Scalar>& b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw std::invalid_argument(std::string(op) + ": shape mismatch");
  }
}

// cols.col(t).segment(k*C, C) = x.col(t*stride - pad + k*dilation)
template <typename Scalar>
Mat<Scalar> im2col(const Mat<Scalar>& x, const Conv1dGeometry& g, Index out_len) {
  const Index c = x.rows();
  const Index len = x.cols();
  Mat<Scalar> cols = Mat<Scalar>::Zero(c * g.kernel, out_len);
  for (Index t = 0; t < out_len; ++t) {
    const Index base = t * g.stride - g.padding;
    for (Index k = 0; k < g.kernel; ++k) {
      const Index src = base + k * g.dilation;
      if (src >= 0 && src < len) cols.col(t).segment(k * c, c) = x.col(src);
    }
  }
  return cols;
}

template <typename Scalar>
void col2im_add(const Mat<Scalar>& cols, const Conv1dGeometry& g, Mat<Scalar>& dx) {
  const Index c = dx.rows();
  const Index len = dx.cols();
  for (Index t = 0; t < cols.cols(); ++t) {
    const Index base = t * g.stride - g.padding;
    for (Index k = 0; k < g.kernel; ++k) {
      const Index src = base + k * g.dilation;
      if (src >= 0 && src < len) dx.col(src) += cols.col(t).segment(k * c, c);
    }
  }
}

template <typename Scalar>
Mat<Scalar> im2col_2d(const Mat<Scalar>& x, Index h, Index w, const Conv2dGeometry& g) {
  const Index c = x.rows();
  const Index oh = g.out_h(h), ow = g.out_w(w);
  Mat<Scalar> cols = Mat<Scalar>::Zero(c * g.kernel_h * g.kernel_w, oh * ow);
  for (Index i = 0; i < oh; ++i) {
    for (Index j = 0; j < ow; ++j) {
      const Index col = i * ow + j;
      for (Index ki = 0; ki < g.kernel_h; ++ki) {
        const Index si = i * g.stride_h - g.pad_h + ki;
        if (si < 0 || si >= h) continue;
        for (Index kj = 0; kj < g.kernel_w; ++kj) {
          const Index sj = j * g.stride_w - g.pad_w + kj;
          if (sj < 0 || sj >= w) continue;
          cols.col(col).segment((ki * g.kernel_w + kj) * c, c) = x.col(si * w + sj);
        }
      }
    }
  }
  return cols;
}

template <typename Scalar>
void col2im_2d_add(const Mat<Scalar>& cols, Index h, Index w, const Conv2dGeometry& g,
                   Mat<Scalar>& dx) {
  const Index c = dx.rows();
  const Index oh = g.out_h(h), ow = g.out_w(w);
  for (Index i = 0; i < oh; ++i) {
    for (Index j = 0; j < ow; ++j) {
      const Index col = i * ow + j;
      for (Index ki = 0; ki < g.kernel_h; ++ki) {
        const Index si = i * g.stride_h - g.pad_h + ki;
        if (si < 0 || si >= h) continue;
        for (Index kj = 0; kj < g.kernel_w; ++kj) {
          const Index sj = j * g.stride_w - g.pad_w + kj;
          if (sj < 0 || sj >= w) continue;
          dx.col(si * w + sj) += cols.col(col).segment((ki * g.kernel_w + kj) * c, c);
        }
      }
    }
  }
}

template <typename Scalar>
Scalar softplus(Scalar x) {
  return std::max(x, Scalar(0)) + std::log1p(std::exp(-std::abs(x)));
}

template <typename Scalar>
Scalar sigmoid(Scalar x) {
  if (x >= 0) return Scalar(1) / (Scalar(1) + std::exp(-x));
  const Scalar e = std::exp(x);
  return e / (Scalar(1) + e);
}

template <typename Scalar>
std::vector<Scalar> hann(Index n) {
  std::vector<Scalar> w(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) {
    w[i] = Scalar(0.5) - Scalar(0.5) * std::cos(Scalar(2) * std::numbers::pi_v<Scalar> *
                                                 Scalar(i) / Scalar(n));
  }
  return w;
}

}  // namespace

template <typename Scalar>
Var<Scalar> add(const Var<Scalar>& a, const Var<Scalar>& b) {
  require_same_shape(a, b, "add");
  const auto ia = a.id(), ib = b.id();
  return a.tape().record(a.value() + b.value(), {a, b}, [ia, ib](auto& t, std::size_t self) {
    t.accumulate(ia, t.grad(self));
    t.accumulate(ib, t.grad(self));
  });
}

template <typename Scalar>
Var<Scalar> sub(const Var<Scalar>& a, const Var<Scalar>& b) {
  require_same_shape(a, b, "sub");
  const auto ia = a.id(), ib = b.id();
  return a.tape().record(a.value() - b.value(), {a, b}, [ia, ib](auto& t, std::size_t self) {
    t.accumulate(ia, t.grad(self));
    t.accumulate(ib, -t.grad(self));
  });
}

template <typename Scalar>
Var<Scalar> mul(const Var<Scalar>& a, const Var<Scalar>& b) {
  require_same_shape(a, b, "mul");
  const auto ia = a.id(), ib = b.id();
  return a.tape().record(a.value().cwiseProduct(b.value()), {a, b},
                         [ia, ib](auto& t, std::size_t self) {
                           t.accumulate(ia, t.grad(self).cwiseProduct(t.value(ib)));
                           t.accumulate(ib, t.grad(self).cwiseProduct(t.value(ia)));
                         });
}

template <typename Scalar>
Var<Scalar> scale(const Var<Scalar>& a, Scalar s) {
  const auto ia = a.id();
  return a.tape().record(a.value() * s, {a},
                         [ia, s](auto& t, std::size_t self) { t.accumulate(ia, t.grad(self) * s); });
}

template <typename Scalar>
Var<Scalar> add_scalar(const Var<Scalar>& a, Scalar s) {
  const auto ia = a.id();
  return a.tape().record((a.value().array() + s).matrix(), {a},
                         [ia](auto& t, std::size_t self) { t.accumulate(ia, t.grad(self)); });
}

template <typename Scalar>
Var<Scalar> add_bias(const Var<Scalar>& x, const Var<Scalar>& b) {
  require(b.cols() == 1 && b.rows() == x.rows(), "add_bias: bias must be (rows x 1)");
  const auto ix = x.id(), ib = b.id();
  Mat<Scalar> y = x.value().colwise() + b.value().col(0);
  return x.tape().record(std::move(y), {x, b}, [ix, ib](auto& t, std::size_t self) {
    t.accumulate(ix, t.grad(self));
    t.accumulate(ib, t.grad(self).rowwise().sum());
  });
}

template <typename Scalar>
Var<Scalar> matmul(const Var<Scalar>& a, const Var<Scalar>& b) {
  require(a.cols() == b.rows(), "matmul: inner dimension mismatch");
  const auto ia = a.id(), ib = b.id();
  Mat<Scalar> y = a.value() * b.value();
  return a.tape().record(std::move(y), {a, b}, [ia, ib](auto& t, std::size_t self) {
    if (t.requires_grad(ia)) t.grad_buffer(ia).noalias() += t.grad(self) * t.value(ib).transpose();
    if (t.requires_grad(ib)) t.grad_buffer(ib).noalias() += t.value(ia).transpose() * t.grad(self);
  });
}

template <typename Scalar>
Var<Scalar> transpose(const Var<Scalar>& a) {
  const auto ia = a.id();
  return a.tape().record(a.value().transpose(), {a}, [ia](auto& t, std::size_t self) {
    t.accumulate(ia, t.grad(self).transpose());
  });
}

template <typename Scalar>
Var<Scalar> concat_rows(const Var<Scalar>& a, const Var<Scalar>& b) {
  require(a.cols() == b.cols(), "concat_rows: column count mismatch");
  const auto ia = a.id(), ib = b.id();
  const Index ra = a.rows(), rb = b.rows();
  Mat<Scalar> y(ra + rb, a.cols());
  y.topRows(ra) = a.value();
  y.bottomRows(rb) = b.value();
  return a.tape().record(std::move(y), {a, b}, [ia, ib, ra, rb](auto& t, std::size_t self) {
    t.accumulate(ia, t.grad(self).topRows(ra));
    t.accumulate(ib, t.grad(self).bottomRows(rb));
  });
}

template <typename Scalar>
Var<Scalar> slice_rows(const Var<Scalar>& a, Index start, Index n) {
  require(start >= 0 && n >= 0 && start + n <= a.rows(), "slice_rows: out of range");
  const auto ia = a.id();
  return a.tape().record(a.value().middleRows(start, n), {a},
                         [ia, start, n](auto& t, std::size_t self) {
                           if (t.requires_grad(ia)) t.grad_buffer(ia).middleRows(start, n) += t.grad(self);
                         });
}

template <typename Scalar>
Var<Scalar> slice_cols(const Var<Scalar>& a, Index start, Index n) {
  require(start >= 0 && n >= 0 && start + n <= a.cols(), "slice_cols: out of range");
  const auto ia = a.id();
  return a.tape().record(a.value().middleCols(start, n), {a},
                         [ia, start, n](auto& t, std::size_t self) {
                           if (t.requires_grad(ia)) t.grad_buffer(ia).middleCols(start, n) += t.grad(self);
                         });
}

template <typename Scalar>
Var<Scalar> reflect_pad_right(const Var<Scalar>& a, Index n) {
  const Index len = a.cols();
  require(n >= 0 && n < len, "reflect_pad_right: pad must be shorter than the input");
  const auto ia = a.id();
  Mat<Scalar> y(a.rows(), len + n);
  y.leftCols(len) = a.value();
  for (Index j = 0; j < n; ++j) y.col(len + j) = a.value().col(len - 2 - j);
  return a.tape().record(std::move(y), {a}, [ia, len, n](auto& t, std::size_t self) {
    if (!t.requires_grad(ia)) return;
    auto& g = t.grad_buffer(ia);
    const auto& gy = t.grad(self);
    g += gy.leftCols(len);
    for (Index j = 0; j < n; ++j) g.col(len - 2 - j) += gy.col(len + j);
  });
}

template <typename Scalar>
Var<Scalar> zero_pad_right(const Var<Scalar>& a, Index n) {
  require(n >= 0, "zero_pad_right: negative pad");
  const Index len = a.cols();
  const auto ia = a.id();
  Mat<Scalar> y = Mat<Scalar>::Zero(a.rows(), len + n);
  y.leftCols(len) = a.value();
  return a.tape().record(std::move(y), {a}, [ia, len](auto& t, std::size_t self) {
    t.accumulate(ia, t.grad(self).leftCols(len));
  });
}

template <typename Scalar>
Var<Scalar> conv1d(const Var<Scalar>& x, const Var<Scalar>& w, const Conv1dGeometry& g) {
  const Index cin = x.rows();
  require(w.cols() == cin * g.kernel, "conv1d: weight columns != kernel * in_channels");
  const Index out_len = g.out_length(x.cols());
  require(out_len > 0, "conv1d: input shorter than the receptive field");
  const auto ix = x.id(), iw = w.id();
  Mat<Scalar> y;
  {
    const Mat<Scalar> cols = im2col(x.value(), g, out_len);
    y.noalias() = w.value() * cols;
  }
  return x.tape().record(std::move(y), {x, w}, [ix, iw, g, out_len](auto& t, std::size_t self) {
    const auto& gy = t.grad(self);
    if (t.requires_grad(iw)) {
      const Mat<Scalar> cols = im2col(t.value(ix), g, out_len);
      t.grad_buffer(iw).noalias() += gy * cols.transpose();
    }
    if (t.requires_grad(ix)) {
      const Mat<Scalar> dcols = t.value(iw).transpose() * gy;
      col2im_add(dcols, g, t.grad_buffer(ix));
    }
  });
}

template <typename Scalar>
Var<Scalar> conv_transpose1d(const Var<Scalar>& x, const Var<Scalar>& w, const Conv1dGeometry& g) {
  const Index cin = x.rows();
  require(w.cols() == cin * g.kernel, "conv_transpose1d: weight columns != kernel * in_channels");
  const Index cout = w.rows();
  const Index in_len = x.cols();
  const Index out_len = g.transposed_out_length(in_len);
  require(out_len > 0, "conv_transpose1d: empty output");
  const auto ix = x.id(), iw = w.id();

  // Stacked per-tap weights: rows k*cout + o hold w(o, k*cin + c).
  auto stack = [cin, cout, g](const Mat<Scalar>& wm) {
    Mat<Scalar> s(g.kernel * cout, cin);
    for (Index k = 0; k < g.kernel; ++k) s.middleRows(k * cout, cout) = wm.middleCols(k * cin, cin);
    return s;
  };

  Mat<Scalar> y = Mat<Scalar>::Zero(cout, out_len);
  {
    const Mat<Scalar> taps = stack(w.value()) * x.value();
    for (Index t = 0; t < in_len; ++t) {
      for (Index k = 0; k < g.kernel; ++k) {
        const Index dst = t * g.stride - g.padding + k * g.dilation;
        if (dst >= 0 && dst < out_len) y.col(dst) += taps.col(t).segment(k * cout, cout);
      }
    }
  }
  return x.tape().record(std::move(y), {x, w}, [=](auto& t, std::size_t self) {
    const auto& gy = t.grad(self);
    Mat<Scalar> dtaps = Mat<Scalar>::Zero(g.kernel * cout, in_len);
    for (Index tt = 0; tt < in_len; ++tt) {
      for (Index k = 0; k < g.kernel; ++k) {
        const Index dst = tt * g.stride - g.padding + k * g.dilation;
        if (dst >= 0 && dst < out_len) dtaps.col(tt).segment(k * cout, cout) = gy.col(dst);
      }
    }
    if (t.requires_grad(iw)) {
      const Mat<Scalar> ds = dtaps * t.value(ix).transpose();
      auto& gw = t.grad_buffer(iw);
      for (Index k = 0; k < g.kernel; ++k) gw.middleCols(k * cin, cin) += ds.middleRows(k * cout, cout);
    }
    if (t.requires_grad(ix)) {
      t.grad_buffer(ix).noalias() += stack(t.value(iw)).transpose() * dtaps;
    }
  });
}

template <typename Scalar>
Var<Scalar> conv2d(const Var<Scalar>& x, const Var<Scalar>& w, Index height, Index width,
                   const Conv2dGeometry& g) {
  const Index cin = x.rows();
  require(x.cols() == height * width, "conv2d: input columns != height * width");
  require(w.cols() == cin * g.kernel_h * g.kernel_w, "conv2d: weight shape mismatch");
  require(g.out_h(height) > 0 && g.out_w(width) > 0, "conv2d: input smaller than kernel");
  const auto ix = x.id(), iw = w.id();
  Mat<Scalar> y;
  {
    const Mat<Scalar> cols = im2col_2d(x.value(), height, width, g);
    y.noalias() = w.value() * cols;
  }
  return x.tape().record(std::move(y), {x, w}, [=](auto& t, std::size_t self) {
    const auto& gy = t.grad(self);
    if (t.requires_grad(iw)) {
      const Mat<Scalar> cols = im2col_2d(t.value(ix), height, width, g);
      t.grad_buffer(iw).noalias() += gy * cols.transpose();
    }
    if (t.requires_grad(ix)) {
      const Mat<Scalar> dcols = t.value(iw).transpose() * gy;
      col2im_2d_add(dcols, height, width, g, t.grad_buffer(ix));
    }
  });
}

template <typename Scalar>
Var<Scalar> weight_norm(const Var<Scalar>& v, const Var<Scalar>& g) {
  require(g.rows() == v.rows() && g.cols() == 1, "weight_norm: magnitude must be (rows x 1)");
  const auto iv = v.id(), ig = g.id();
  const Vector<Scalar> norms = v.value().rowwise().norm();
  const Vector<Scalar> factor = g.value().col(0).cwiseQuotient(norms);
  Mat<Scalar> w = factor.asDiagonal() * v.value();
  return v.tape().record(std::move(w), {v, g}, [iv, ig, norms, factor](auto& t, std::size_t self) {
    const auto& gw = t.grad(self);
    const auto& vv = t.value(iv);
    const Vector<Scalar> proj = gw.cwiseProduct(vv).rowwise().sum();  // <gw_r, v_r>
    t.accumulate(ig, proj.cwiseQuotient(norms));
    if (t.requires_grad(iv)) {
      const Vector<Scalar> coef = proj.cwiseQuotient(norms.cwiseProduct(norms));
      t.grad_buffer(iv) += factor.asDiagonal() * (gw - coef.asDiagonal() * vv);
    }
  });
}

template <typename Scalar>
Var<Scalar> snake(const Var<Scalar>& x, const Var<Scalar>& log_alpha) {
  require(log_alpha.rows() == x.rows() && log_alpha.cols() == 1, "snake: alpha must be (channels x 1)");
  const auto ix = x.id(), ia = log_alpha.id();
  const Vector<Scalar> alpha = log_alpha.value().col(0).array().exp().matrix();
  const auto& xv = x.value();
  Mat<Scalar> y(xv.rows(), xv.cols());
  for (Index j = 0; j < xv.cols(); ++j) {
    for (Index c = 0; c < xv.rows(); ++c) {
      const Scalar s = std::sin(alpha[c] * xv(c, j));
      y(c, j) = xv(c, j) + s * s / alpha[c];
    }
  }
  return x.tape().record(std::move(y), {x, log_alpha}, [ix, ia, alpha](auto& t, std::size_t self) {
    const auto& gy = t.grad(self);
    const auto& xv = t.value(ix);
    const bool gx = t.requires_grad(ix), ga = t.requires_grad(ia);
    Mat<Scalar> dx(gx ? xv.rows() : 0, gx ? xv.cols() : 0);
    Vector<Scalar> dla = Vector<Scalar>::Zero(xv.rows());
    for (Index j = 0; j < xv.cols(); ++j) {
      for (Index c = 0; c < xv.rows(); ++c) {
        const Scalar ax = alpha[c] * xv(c, j);
        const Scalar s2 = std::sin(Scalar(2) * ax);
        if (gx) dx(c, j) = gy(c, j) * (Scalar(1) + s2);
        if (ga) {
          const Scalar s = std::sin(ax);
          dla[c] += gy(c, j) * (xv(c, j) * s2 - s * s / alpha[c]);
        }
      }
    }
    if (gx) t.accumulate(ix, dx);
    if (ga) t.accumulate(ia, dla);
  });
}

template <typename Scalar>
Var<Scalar> mish(const Var<Scalar>& x) {
  const auto ix = x.id();
  Mat<Scalar> y = x.value().unaryExpr([](Scalar v) { return v * std::tanh(softplus(v)); });
  return x.tape().record(std::move(y), {x}, [ix](auto& t, std::size_t self) {
    Mat<Scalar> d = t.value(ix).unaryExpr([](Scalar v) {
      const Scalar th = std::tanh(softplus(v));
      return th + v * (Scalar(1) - th * th) * sigmoid(v);
    });
    t.accumulate(ix, t.grad(self).cwiseProduct(d));
  });
}

template <typename Scalar>
Var<Scalar> tanh(const Var<Scalar>& x) {
  const auto ix = x.id();
  // Saturated values are pulled inside (-1, 1), matching the exact function.
  const Scalar edge = std::nextafter(Scalar(1), Scalar(0));
  Mat<Scalar> y = x.value().array().tanh().cwiseMax(-edge).cwiseMin(edge).matrix();
  return x.tape().record(std::move(y), {x}, [ix](auto& t, std::size_t self) {
    const auto& yv = t.value(self);
    t.accumulate(ix, t.grad(self).cwiseProduct((Scalar(1) - yv.array().square()).matrix()));
  });
}

template <typename Scalar>
Var<Scalar> relu(const Var<Scalar>& x) {
  return leaky_relu(x, Scalar(0));
}

template <typename Scalar>
Var<Scalar> leaky_relu(const Var<Scalar>& x, Scalar slope) {
  const auto ix = x.id();
  Mat<Scalar> y = x.value().unaryExpr([slope](Scalar v) { return v > 0 ? v : slope * v; });
  return x.tape().record(std::move(y), {x}, [ix, slope](auto& t, std::size_t self) {
    Mat<Scalar> d = t.value(ix).unaryExpr([slope](Scalar v) { return v > 0 ? Scalar(1) : slope; });
    t.accumulate(ix, t.grad(self).cwiseProduct(d));
  });
}

template <typename Scalar>
Var<Scalar> abs(const Var<Scalar>& x) {
  const auto ix = x.id();
  return x.tape().record(x.value().cwiseAbs(), {x}, [ix](auto& t, std::size_t self) {
    Mat<Scalar> d = t.value(ix).unaryExpr(
        [](Scalar v) { return v > 0 ? Scalar(1) : (v < 0 ? Scalar(-1) : Scalar(0)); });
    t.accumulate(ix, t.grad(self).cwiseProduct(d));
  });
}

template <typename Scalar>
Var<Scalar> square(const Var<Scalar>& x) {
  const auto ix = x.id();
  return x.tape().record(x.value().array().square().matrix(), {x}, [ix](auto& t, std::size_t self) {
    t.accumulate(ix, Scalar(2) * t.grad(self).cwiseProduct(t.value(ix)));
  });
}

template <typename Scalar>
Var<Scalar> softmax_rows(const Var<Scalar>& x) {
  const auto ix = x.id();
  Mat<Scalar> y = x.value();
  for (Index j = 0; j < y.cols(); ++j) {
    auto c = y.col(j);
    c.array() -= c.maxCoeff();
    c = c.array().exp().matrix();
    c /= c.sum();
  }
  return x.tape().record(std::move(y), {x}, [ix](auto& t, std::size_t self) {
    const auto& yv = t.value(self);
    const auto& gy = t.grad(self);
    Mat<Scalar> dx = yv.cwiseProduct(gy);
    const Eigen::Matrix<Scalar, 1, Eigen::Dynamic> dots = dx.colwise().sum();
    dx -= yv * dots.asDiagonal();
    t.accumulate(ix, dx);
  });
}

template <typename Scalar>
Var<Scalar> group_norm(const Var<Scalar>& x, const Var<Scalar>& gamma, const Var<Scalar>& beta,
                       Index groups, Scalar eps) {
  const Index c = x.rows();
  require(groups > 0 && c % groups == 0, "group_norm: channels not divisible by groups");
  require(gamma.rows() == c && beta.rows() == c, "group_norm: affine shape mismatch");
  const Index per = c / groups;
  const Index n = per * x.cols();
  const auto ix = x.id(), ig = gamma.id(), ib = beta.id();

  Mat<Scalar> xhat(c, x.cols());
  Vector<Scalar> inv_std(groups);
  for (Index g = 0; g < groups; ++g) {
    const auto block = x.value().middleRows(g * per, per);
    const Scalar mu = block.sum() / Scalar(n);
    const Scalar var = (block.array() - mu).square().sum() / Scalar(n);
    inv_std[g] = Scalar(1) / std::sqrt(var + eps);
    xhat.middleRows(g * per, per) = ((block.array() - mu) * inv_std[g]).matrix();
  }
  Mat<Scalar> y = gamma.value().col(0).asDiagonal() * xhat;
  y.colwise() += beta.value().col(0);
  return x.tape().record(std::move(y), {x, gamma, beta},
                         [=, xhat = std::move(xhat)](auto& t, std::size_t self) {
    const auto& gy = t.grad(self);
    t.accumulate(ig, gy.cwiseProduct(xhat).rowwise().sum());
    t.accumulate(ib, gy.rowwise().sum());
    if (!t.requires_grad(ix)) return;
    const Mat<Scalar> dxhat = t.value(ig).col(0).asDiagonal() * gy;
    auto& dx = t.grad_buffer(ix);
    for (Index g = 0; g < groups; ++g) {
      const auto d = dxhat.middleRows(g * per, per);
      const auto h = xhat.middleRows(g * per, per);
      const Scalar md = d.sum() / Scalar(n);
      const Scalar mdh = d.cwiseProduct(h).sum() / Scalar(n);
      dx.middleRows(g * per, per) += (inv_std[g] * (d.array() - md - h.array() * mdh)).matrix();
    }
  });
}

template <typename Scalar>
Var<Scalar> layer_norm(const Var<Scalar>& x, const Var<Scalar>& gamma, const Var<Scalar>& beta,
                       Scalar eps) {
  const Index c = x.rows();
  require(gamma.rows() == c && beta.rows() == c, "layer_norm: affine shape mismatch");
  const auto ix = x.id(), ig = gamma.id(), ib = beta.id();
  const auto& xv = x.value();
  const Eigen::Array<Scalar, 1, Eigen::Dynamic> mu = xv.colwise().mean().array();
  Mat<Scalar> xhat = xv.rowwise() - mu.matrix();
  const Eigen::Array<Scalar, 1, Eigen::Dynamic> inv_std =
      ((xhat.array().square().colwise().sum() / Scalar(c)) + eps).rsqrt();
  xhat = xhat * inv_std.matrix().asDiagonal();
  Mat<Scalar> y = gamma.value().col(0).asDiagonal() * xhat;
  y.colwise() += beta.value().col(0);
  return x.tape().record(std::move(y), {x, gamma, beta},
                         [=, xhat = std::move(xhat)](auto& t, std::size_t self) {
    const auto& gy = t.grad(self);
    t.accumulate(ig, gy.cwiseProduct(xhat).rowwise().sum());
    t.accumulate(ib, gy.rowwise().sum());
    if (!t.requires_grad(ix)) return;
    const Mat<Scalar> d = t.value(ig).col(0).asDiagonal() * gy;
    const Eigen::Array<Scalar, 1, Eigen::Dynamic> md = d.colwise().mean().array();
    const Eigen::Array<Scalar, 1, Eigen::Dynamic> mdh = d.cwiseProduct(xhat).colwise().mean().array();
    Mat<Scalar> dx = d;
    dx.array().rowwise() -= md;
    dx.array() -= xhat.array().rowwise() * mdh;
    dx.array().rowwise() *= inv_std;
    t.grad_buffer(ix) += dx;
  });
}

template <typename Scalar>
Var<Scalar> sum(const Var<Scalar>& x) {
  const auto ix = x.id();
  Mat<Scalar> y(1, 1);
  y(0, 0) = x.value().sum();
  return x.tape().record(std::move(y), {x}, [ix](auto& t, std::size_t self) {
    const Scalar g = t.grad(self)(0, 0);
    if (t.requires_grad(ix)) t.grad_buffer(ix).array() += g;
  });
}

template <typename Scalar>
Var<Scalar> mean(const Var<Scalar>& x) {
  return scale(sum(x), Scalar(1) / Scalar(x.value().size()));
}

Index stft_frames(Index length, Index hop) { return 1 + length / hop; }

template <typename Scalar>
Var<Scalar> stft(const Var<Scalar>& x, Index n_fft, Index hop) {
  require(x.rows() == 1, "stft: expects a (1 x L) signal");
  require(n_fft > 0 && (n_fft & (n_fft - 1)) == 0, "stft: n_fft must be a power of two");
  require(hop > 0 && hop <= n_fft, "stft: invalid hop");
  const Index len = x.cols();
  const Index frames = stft_frames(len, hop);
  const Index bins = n_fft / 2 + 1;
  const Index half = n_fft / 2;
  const auto window = hann<Scalar>(n_fft);
  const auto ix = x.id();

  Eigen::FFT<Scalar> fft;
  std::vector<Scalar> frame(static_cast<std::size_t>(n_fft));
  std::vector<std::complex<Scalar>> spec;
  Mat<Scalar> y(2, bins * frames);
  const auto& xv = x.value();
  for (Index m = 0; m < frames; ++m) {
    for (Index n = 0; n < n_fft; ++n) {
      const Index src = m * hop + n - half;
      frame[n] = (src >= 0 && src < len) ? window[n] * xv(0, src) : Scalar(0);
    }
    fft.fwd(spec, frame);
    for (Index k = 0; k < bins; ++k) {
      y(0, k * frames + m) = spec[k].real();
      y(1, k * frames + m) = spec[k].imag();
    }
  }
  return x.tape().record(std::move(y), {x}, [=](auto& t, std::size_t self) {
    if (!t.requires_grad(ix)) return;
    const auto& gy = t.grad(self);
    auto& dx = t.grad_buffer(ix);
    Eigen::FFT<Scalar> ifft;
    std::vector<std::complex<Scalar>> z(static_cast<std::size_t>(n_fft));
    std::vector<std::complex<Scalar>> out;
    for (Index m = 0; m < frames; ++m) {
      std::fill(z.begin(), z.end(), std::complex<Scalar>(0, 0));
      for (Index k = 0; k < bins; ++k) {
        z[k] = std::complex<Scalar>(gy(0, k * frames + m), gy(1, k * frames + m));
      }
      ifft.inv(out, z);
      for (Index n = 0; n < n_fft; ++n) {
        const Index src = m * hop + n - half;
        if (src >= 0 && src < len) dx(0, src) += window[n] * Scalar(n_fft) * out[n].real();
      }
    }
  });
}

#define LFSR_INSTANTIATE_OPS(S)                                                              \
  template Var<S> add(const Var<S>&, const Var<S>&);                                         \
  template Var<S> sub(const Var<S>&, const Var<S>&);                                         \
  template Var<S> mul(const Var<S>&, const Var<S>&);                                         \
  template Var<S> scale(const Var<S>&, S);                                                   \
  template Var<S> add_scalar(const Var<S>&, S);                                              \
  template Var<S> add_bias(const Var<S>&, const Var<S>&);                                    \
  template Var<S> matmul(const Var<S>&, const Var<S>&);                                      \
  template Var<S> transpose(const Var<S>&);                                                  \
  template Var<S> concat_rows(const Var<S>&, const Var<S>&);                                 \
  template Var<S> slice_rows(const Var<S>&, Index, Index);                                   \
  template Var<S> slice_cols(const Var<S>&, Index, Index);                                   \
  template Var<S> reflect_pad_right(const Var<S>&, Index);                                   \
  template Var<S> zero_pad_right(const Var<S>&, Index);                                      \
  template Var<S> conv1d(const Var<S>&, const Var<S>&, const Conv1dGeometry&);               \
  template Var<S> conv_transpose1d(const Var<S>&, const Var<S>&, const Conv1dGeometry&);     \
  template Var<S> conv2d(const Var<S>&, const Var<S>&, Index, Index, const Conv2dGeometry&); \
  template Var<S> weight_norm(const Var<S>&, const Var<S>&);                                 \
  template Var<S> snake(const Var<S>&, const Var<S>&);                                       \
  template Var<S> mish(const Var<S>&);                                                       \
  template Var<S> tanh(const Var<S>&);                                                       \
  template Var<S> relu(const Var<S>&);                                                       \
  template Var<S> leaky_relu(const Var<S>&, S);                                              \
  template Var<S> abs(const Var<S>&);                                                        \
  template Var<S> square(const Var<S>&);                                                     \
  template Var<S> softmax_rows(const Var<S>&);                                               \
  template Var<S> group_norm(const Var<S>&, const Var<S>&, const Var<S>&, Index, S);         \
  template Var<S> layer_norm(const Var<S>&, const Var<S>&, const Var<S>&, S);                \
  template Var<S> sum(const Var<S>&);                                                        \
  template Var<S> mean(const Var<S>&);                                                       \
  template Var<S> stft(const Var<S>&, Index, Index);

LFSR_INSTANTIATE_OPS(float)
LFSR_INSTANTIATE_OPS(double)

#undef LFSR_INSTANTIATE_OPS

}  // namespace lfsr::ops
