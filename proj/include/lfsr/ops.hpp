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

// Differentiable operations on Var. Feature maps are (channels x time)
// matrices; 2-D feature maps are (channels x H*W) with row-major spatial
// index h*W + w. Convolution weights are (out x kernel*in) with column index
// k*in + c (2-D: (kh*kernel_w + kw)*in + c), for both the forward and
// transposed 1-D variants.

#pragma once

#include "lfsr/autodiff.hpp"

namespace lfsr::ops {

template <typename Scalar>
using Var = ad::Var<Scalar>;

struct Conv1dGeometry {
  Index kernel = 1;
  Index stride = 1;
  Index dilation = 1;
  Index padding = 0;
  Index output_padding = 0;  // transposed convolution only

  Index out_length(Index in) const {
    return (in + 2 * padding - dilation * (kernel - 1) - 1) / stride + 1;
  }
  Index transposed_out_length(Index in) const {
    return (in - 1) * stride - 2 * padding + dilation * (kernel - 1) + 1 + output_padding;
  }
};

struct Conv2dGeometry {
  Index kernel_h = 1, kernel_w = 1;
  Index stride_h = 1, stride_w = 1;
  Index pad_h = 0, pad_w = 0;

  Index out_h(Index h) const { return (h + 2 * pad_h - kernel_h) / stride_h + 1; }
  Index out_w(Index w) const { return (w + 2 * pad_w - kernel_w) / stride_w + 1; }
};

// elementwise and structural
template <typename Scalar> Var<Scalar> add(const Var<Scalar>& a, const Var<Scalar>& b);
template <typename Scalar> Var<Scalar> sub(const Var<Scalar>& a, const Var<Scalar>& b);
template <typename Scalar> Var<Scalar> mul(const Var<Scalar>& a, const Var<Scalar>& b);
template <typename Scalar> Var<Scalar> scale(const Var<Scalar>& a, Scalar s);
template <typename Scalar> Var<Scalar> add_scalar(const Var<Scalar>& a, Scalar s);
/// x + b broadcast over columns; b is (rows x 1).
template <typename Scalar> Var<Scalar> add_bias(const Var<Scalar>& x, const Var<Scalar>& b);
template <typename Scalar> Var<Scalar> matmul(const Var<Scalar>& a, const Var<Scalar>& b);
template <typename Scalar> Var<Scalar> transpose(const Var<Scalar>& a);
template <typename Scalar> Var<Scalar> concat_rows(const Var<Scalar>& a, const Var<Scalar>& b);
template <typename Scalar> Var<Scalar> slice_rows(const Var<Scalar>& a, Index start, Index n);
template <typename Scalar> Var<Scalar> slice_cols(const Var<Scalar>& a, Index start, Index n);
/// Appends `n` reflected columns on the right (edge column not repeated).
template <typename Scalar> Var<Scalar> reflect_pad_right(const Var<Scalar>& a, Index n);
/// Appends `n` zero columns on the right.
template <typename Scalar> Var<Scalar> zero_pad_right(const Var<Scalar>& a, Index n);

// convolution
template <typename Scalar>
Var<Scalar> conv1d(const Var<Scalar>& x, const Var<Scalar>& w, const Conv1dGeometry& g);
template <typename Scalar>
Var<Scalar> conv_transpose1d(const Var<Scalar>& x, const Var<Scalar>& w, const Conv1dGeometry& g);
template <typename Scalar>
Var<Scalar> conv2d(const Var<Scalar>& x, const Var<Scalar>& w, Index height, Index width,
                   const Conv2dGeometry& g);
/// Row-wise weight normalization: w_r = g_r * v_r / ||v_r||.
template <typename Scalar> Var<Scalar> weight_norm(const Var<Scalar>& v, const Var<Scalar>& g);

// activations
/// x + sin^2(alpha x) / alpha with alpha = exp(log_alpha) per row.
template <typename Scalar> Var<Scalar> snake(const Var<Scalar>& x, const Var<Scalar>& log_alpha);
template <typename Scalar> Var<Scalar> mish(const Var<Scalar>& x);
template <typename Scalar> Var<Scalar> tanh(const Var<Scalar>& x);
template <typename Scalar> Var<Scalar> relu(const Var<Scalar>& x);
template <typename Scalar> Var<Scalar> leaky_relu(const Var<Scalar>& x, Scalar slope);
template <typename Scalar> Var<Scalar> abs(const Var<Scalar>& x);
template <typename Scalar> Var<Scalar> square(const Var<Scalar>& x);
/// Softmax over rows, independently per column.
template <typename Scalar> Var<Scalar> softmax_rows(const Var<Scalar>& x);

// normalization
template <typename Scalar>
Var<Scalar> group_norm(const Var<Scalar>& x, const Var<Scalar>& gamma, const Var<Scalar>& beta,
                       Index groups, Scalar eps);
/// Normalizes every column over its rows (channels), then applies gamma/beta.
template <typename Scalar>
Var<Scalar> layer_norm(const Var<Scalar>& x, const Var<Scalar>& gamma, const Var<Scalar>& beta,
                       Scalar eps);

// reductions
template <typename Scalar> Var<Scalar> sum(const Var<Scalar>& x);
template <typename Scalar> Var<Scalar> mean(const Var<Scalar>& x);

/// Short-time Fourier transform of a (1 x L) signal with a periodic Hann window
/// and n_fft/2 zero padding on both sides. Returns (2 x bins*frames) with the
/// real part in row 0 and the imaginary part in row 1, spatial index
/// bin*frames + frame.
template <typename Scalar> Var<Scalar> stft(const Var<Scalar>& x, Index n_fft, Index hop);
Index stft_frames(Index length, Index hop);

}  // namespace lfsr::ops
