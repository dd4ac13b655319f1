#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "lyricnn/errors.hpp"
#include "lyricnn/rng.hpp"
#include "lyricnn/tensor.hpp"
#include "lyricnn/text.hpp"

namespace lyricnn {

// Forward/backward primitives for the network. Conventions shared by all of
// them:
//  - forward saves whatever the matching backward needs (masks, argmax
//    indices, pre-activation inputs) explicitly at the call site;
//  - parameter-gradient outputs are accumulated (+=) so a batch can sum
//    per-example contributions in ascending example order;
//  - input-gradient outputs are overwritten.

// ---------------------------------------------------------------------------
// embedding

// out[i, :] = table[ids[i], :]
inline Tensor embedding_forward(const TokenSequence& ids, const Tensor& table) {
  const std::size_t vocab = table.dim(0), embed = table.dim(1);
  Tensor out({ids.size(), embed});
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] >= vocab) throw ValidationError("embedding: token id out of range");
    const double* row = table.data() + ids[i] * embed;
    std::copy(row, row + embed, out.data() + i * embed);
  }
  return out;
}

inline void embedding_backward(const TokenSequence& ids, const Tensor& upstream,
                               Tensor& grad_table) {
  const std::size_t embed = grad_table.dim(1);
  for (std::size_t i = 0; i < ids.size(); ++i) {
    double* grad_row = grad_table.data() + ids[i] * embed;
    const double* up_row = upstream.data() + i * embed;
    for (std::size_t e = 0; e < embed; ++e) grad_row[e] += up_row[e];
  }
}

// ---------------------------------------------------------------------------
// dropout (inverted: survivors scaled by 1/(1-p) so inference is identity)

struct DropoutResult {
  Tensor output;
  Tensor mask;  // per-element multiplier: 0 (dropped) or 1/(1-p) (kept)
};

// Draws the keep/drop multiplier per element in row-major order: one unit
// draw each, kept iff draw >= p. Inference masks are all-ones and consume no
// draws.
inline Tensor dropout_mask(const std::vector<std::size_t>& shape, double p, bool training,
                           SplitMix64& rng) {
  if (!(p >= 0.0 && p < 1.0)) throw ValidationError("dropout: p must be in [0, 1)");
  Tensor mask(shape);
  if (!training || p == 0.0) {
    mask.fill(1.0);
    return mask;
  }
  const double scale = 1.0 / (1.0 - p);
  for (std::size_t i = 0; i < mask.size(); ++i) mask[i] = rng.next_unit() >= p ? scale : 0.0;
  return mask;
}

inline Tensor apply_mask(const Tensor& x, const Tensor& mask) {
  require_same_shape(x, mask, "apply_mask");
  Tensor out = Tensor::zeros_like(x);
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] * mask[i];
  return out;
}

inline DropoutResult dropout_forward(const Tensor& x, double p, bool training, SplitMix64& rng) {
  Tensor mask = dropout_mask(x.shape(), p, training, rng);
  return DropoutResult{apply_mask(x, mask), std::move(mask)};
}

inline Tensor dropout_backward(const Tensor& upstream, const Tensor& mask) {
  require_same_shape(upstream, mask, "dropout_backward");
  Tensor grad = Tensor::zeros_like(upstream);
  for (std::size_t i = 0; i < upstream.size(); ++i) grad[i] = upstream[i] * mask[i];
  return grad;
}

// ---------------------------------------------------------------------------
// 1-D valid convolution: x is T x C_in, kernels F x K x C_in, bias F

// out[t, f] = bias[f] + sum_{k, c} x[t+k, c] * kernels[f, k, c]
inline Tensor conv1d_forward(const Tensor& x, const Tensor& kernels, const Tensor& bias) {
  const std::size_t steps = x.dim(0), channels = x.dim(1);
  const std::size_t filters = kernels.dim(0), width = kernels.dim(1);
  if (kernels.dim(2) != channels) throw ValidationError("conv1d: channel mismatch");
  if (bias.size() != filters) throw ValidationError("conv1d: bias size mismatch");
  if (steps < width) throw ValidationError("conv1d: input shorter than kernel");

  const std::size_t out_steps = steps - width + 1;
  Tensor out({out_steps, filters});
#pragma omp parallel for schedule(static)
  for (std::size_t t = 0; t < out_steps; ++t) {
    double* out_row = out.data() + t * filters;
    for (std::size_t f = 0; f < filters; ++f) {
      const double* w = kernels.data() + f * width * channels;
      const double* xi = x.data() + t * channels;
      double acc = bias[f];
      for (std::size_t i = 0; i < width * channels; ++i) acc += xi[i] * w[i];
      out_row[f] = acc;
    }
  }
  return out;
}

inline void conv1d_backward(const Tensor& x, const Tensor& kernels, const Tensor& upstream,
                            Tensor& grad_input, Tensor& grad_kernels, Tensor& grad_bias) {
  const std::size_t steps = x.dim(0), channels = x.dim(1);
  const std::size_t filters = kernels.dim(0), width = kernels.dim(1);
  const std::size_t out_steps = steps - width + 1;
  if (upstream.dim(0) != out_steps || upstream.dim(1) != filters)
    throw ValidationError("conv1d_backward: upstream shape mismatch");

  for (std::size_t f = 0; f < filters; ++f) {
    double acc = 0.0;
    for (std::size_t t = 0; t < out_steps; ++t) acc += upstream.at(t, f);
    grad_bias[f] += acc;
  }

  // grad_kernels[f, k, c] = sum_t upstream[t, f] * x[t+k, c]
#pragma omp parallel for schedule(static)
  for (std::size_t f = 0; f < filters; ++f) {
    double* gw = grad_kernels.data() + f * width * channels;
    for (std::size_t t = 0; t < out_steps; ++t) {
      const double up = upstream.at(t, f);
      const double* xi = x.data() + t * channels;
      for (std::size_t i = 0; i < width * channels; ++i) gw[i] += up * xi[i];
    }
  }

  // grad_x[s, c] = sum_{f, k : s-k in [0, out_steps)} upstream[s-k, f] * kernels[f, k, c]
  grad_input = Tensor({steps, channels});
#pragma omp parallel for schedule(static)
  for (std::size_t s = 0; s < steps; ++s) {
    double* gx = grad_input.data() + s * channels;
    const std::size_t k_lo = s + 1 >= out_steps ? s + 1 - out_steps : 0;
    const std::size_t k_hi = std::min(width - 1, s);
    for (std::size_t k = k_lo; k <= k_hi; ++k) {
      const double* up_row = upstream.data() + (s - k) * filters;
      for (std::size_t f = 0; f < filters; ++f) {
        const double up = up_row[f];
        const double* w = kernels.data() + (f * width + k) * channels;
        for (std::size_t c = 0; c < channels; ++c) gx[c] += up * w[c];
      }
    }
  }
}

// ---------------------------------------------------------------------------
// max pooling, non-overlapping windows, trailing remainder dropped

struct PoolResult {
  Tensor output;
  std::vector<std::size_t> argmax;  // flat index into the input, per output element
};

// Ties resolve to the earliest index, which is also where the backward pass
// routes the gradient.
inline PoolResult maxpool1d_forward(const Tensor& x, std::size_t pool) {
  if (pool < 1) throw ValidationError("maxpool1d: pool must be >= 1");
  const std::size_t steps = x.dim(0), channels = x.dim(1);
  if (steps < pool) throw ValidationError("maxpool1d: input shorter than pool window");
  const std::size_t out_steps = steps / pool;

  PoolResult result{Tensor({out_steps, channels}), {}};
  result.argmax.assign(out_steps * channels, 0);
  for (std::size_t t = 0; t < out_steps; ++t) {
    for (std::size_t c = 0; c < channels; ++c) {
      std::size_t best = t * pool;
      double best_value = x.at(best, c);
      for (std::size_t i = 1; i < pool; ++i) {
        const double value = x.at(t * pool + i, c);
        if (value > best_value) {
          best_value = value;
          best = t * pool + i;
        }
      }
      result.output.at(t, c) = best_value;
      result.argmax[t * channels + c] = best * channels + c;
    }
  }
  return result;
}

inline Tensor maxpool1d_backward(const Tensor& upstream, const std::vector<std::size_t>& argmax,
                                 const std::vector<std::size_t>& input_shape) {
  if (upstream.size() != argmax.size())
    throw ValidationError("maxpool1d_backward: cache size mismatch");
  Tensor grad(input_shape);
  for (std::size_t i = 0; i < argmax.size(); ++i) grad[argmax[i]] += upstream[i];
  return grad;
}

// out[f] = max_t x[t, f]; earliest maximizing t wins ties.
inline PoolResult global_maxpool_forward(const Tensor& x) {
  const std::size_t steps = x.dim(0), channels = x.dim(1);
  PoolResult result{Tensor({channels}), {}};
  result.argmax.assign(channels, 0);
  for (std::size_t c = 0; c < channels; ++c) {
    std::size_t best = 0;
    double best_value = x.at(0, c);
    for (std::size_t t = 1; t < steps; ++t) {
      if (x.at(t, c) > best_value) {
        best_value = x.at(t, c);
        best = t;
      }
    }
    result.output[c] = best_value;
    result.argmax[c] = best * channels + c;
  }
  return result;
}

inline Tensor global_maxpool_backward(const Tensor& upstream, const std::vector<std::size_t>& argmax,
                                      const std::vector<std::size_t>& input_shape) {
  if (upstream.size() != argmax.size())
    throw ValidationError("global_maxpool_backward: cache size mismatch");
  Tensor grad(input_shape);
  for (std::size_t i = 0; i < argmax.size(); ++i) grad[argmax[i]] += upstream[i];
  return grad;
}

// ---------------------------------------------------------------------------
// dense: y = W x + b with W out x in

inline Tensor dense_forward(const Tensor& x, const Tensor& weights, const Tensor& bias) {
  const std::size_t out_units = weights.dim(0), in_units = weights.dim(1);
  if (x.size() != in_units) throw ValidationError("dense: input size mismatch");
  if (bias.size() != out_units) throw ValidationError("dense: bias size mismatch");
  Tensor y({out_units});
  for (std::size_t o = 0; o < out_units; ++o) {
    const double* w = weights.data() + o * in_units;
    double acc = bias[o];
    for (std::size_t i = 0; i < in_units; ++i) acc += w[i] * x[i];
    y[o] = acc;
  }
  return y;
}

inline void dense_backward(const Tensor& x, const Tensor& weights, const Tensor& upstream,
                           Tensor& grad_input, Tensor& grad_weights, Tensor& grad_bias) {
  const std::size_t out_units = weights.dim(0), in_units = weights.dim(1);
  if (upstream.size() != out_units) throw ValidationError("dense_backward: upstream size mismatch");
  grad_input = Tensor({in_units});
  for (std::size_t o = 0; o < out_units; ++o) {
    const double up = upstream[o];
    grad_bias[o] += up;
    double* gw = grad_weights.data() + o * in_units;
    const double* w = weights.data() + o * in_units;
    for (std::size_t i = 0; i < in_units; ++i) {
      gw[i] += up * x[i];
      grad_input[i] += up * w[i];
    }
  }
}

// ---------------------------------------------------------------------------
// activations (elementwise)

inline double relu_value(double x) { return x > 0.0 ? x : 0.0; }

// Stable softplus: max(x, 0) + log1p(exp(-|x|)) never overflows.
inline double softplus_value(double x) { return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x))); }

inline double sigmoid_value(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

inline Tensor relu(const Tensor& x) {
  Tensor y = Tensor::zeros_like(x);
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = relu_value(x[i]);
  return y;
}

// Gradient at exactly 0 is taken as 0.
inline Tensor relu_backward(const Tensor& x, const Tensor& upstream) {
  require_same_shape(x, upstream, "relu_backward");
  Tensor grad = Tensor::zeros_like(x);
  for (std::size_t i = 0; i < x.size(); ++i) grad[i] = x[i] > 0.0 ? upstream[i] : 0.0;
  return grad;
}

inline Tensor softplus(const Tensor& x) {
  Tensor y = Tensor::zeros_like(x);
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = softplus_value(x[i]);
  return y;
}

// d softplus / dx = sigmoid(x)
inline Tensor softplus_backward(const Tensor& x, const Tensor& upstream) {
  require_same_shape(x, upstream, "softplus_backward");
  Tensor grad = Tensor::zeros_like(x);
  for (std::size_t i = 0; i < x.size(); ++i) grad[i] = upstream[i] * sigmoid_value(x[i]);
  return grad;
}

inline Tensor sigmoid(const Tensor& x) {
  Tensor y = Tensor::zeros_like(x);
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = sigmoid_value(x[i]);
  return y;
}

// ---------------------------------------------------------------------------
// binary cross-entropy

inline constexpr double kBceEpsilon = 1e-7;

// Mean over all elements of -[y ln p + (1-y) ln(1-p)], with p clipped to
// [eps, 1-eps] to keep the logs finite.
inline double bce_loss(const Tensor& probabilities, const Tensor& targets) {
  require_same_shape(probabilities, targets, "bce_loss");
  double total = 0.0;
  for (std::size_t i = 0; i < probabilities.size(); ++i) {
    const double p = std::clamp(probabilities[i], kBceEpsilon, 1.0 - kBceEpsilon);
    const double y = targets[i];
    total += -(y * std::log(p) + (1.0 - y) * std::log(1.0 - p));
  }
  return total / static_cast<double>(probabilities.size());
}

}  // namespace lyricnn
