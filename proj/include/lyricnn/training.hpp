#pragma once

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <ostream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "lyricnn/dataset.hpp"
#include "lyricnn/errors.hpp"
#include "lyricnn/model.hpp"
#include "lyricnn/rng.hpp"
#include "lyricnn/text.hpp"

namespace lyricnn {

struct TrainConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_epsilon = 1e-8;
  std::size_t batch_size = 64;
  std::size_t epochs = 10;
  std::uint64_t seed = 0;
  double val_fraction = 0.1;

  void validate() const {
    if (!(learning_rate > 0.0)) throw ValidationError("train config: learning_rate must be > 0");
    if (!(beta1 >= 0.0 && beta1 < 1.0)) throw ValidationError("train config: beta1 must be in [0, 1)");
    if (!(beta2 >= 0.0 && beta2 < 1.0)) throw ValidationError("train config: beta2 must be in [0, 1)");
    if (!(adam_epsilon > 0.0)) throw ValidationError("train config: adam_epsilon must be > 0");
    if (batch_size < 1) throw ValidationError("train config: batch_size must be >= 1");
    if (epochs < 1) throw ValidationError("train config: epochs must be >= 1");
  }
};

// Per-parameter first/second moment accumulators, mirroring the canonical
// parameter order, plus the shared timestep.
struct AdamState {
  ParamSet m;
  ParamSet v;
  std::uint64_t t = 0;

  static AdamState init(const ModelConfig& config) {
    return AdamState{ParamSet::shaped(config), ParamSet::shaped(config), 0};
  }
};

// Standard Adam update with bias correction:
//   t <- t+1; m <- b1 m + (1-b1) g; v <- b2 v + (1-b2) g^2
//   theta <- theta - lr * (m / (1-b1^t)) / (sqrt(v / (1-b2^t)) + eps)
// Non-finite gradients reject the whole step, naming the offending tensor.
inline void adam_step(ModelParams& params, const ModelGrads& grads, AdamState& state,
                      const TrainConfig& config) {
  auto param_tensors = params.tensors();
  auto grad_tensors = grads.tensors();
  auto m_tensors = state.m.tensors();
  auto v_tensors = state.v.tensors();

  for (std::size_t k = 0; k < ParamSet::kTensorCount; ++k) {
    if (!param_tensors[k]->same_shape(*grad_tensors[k]))
      throw ValidationError(std::string("adam_step: gradient shape mismatch for ") +
                            ParamSet::names()[k]);
    for (std::size_t i = 0; i < grad_tensors[k]->size(); ++i) {
      if (!std::isfinite((*grad_tensors[k])[i]))
        throw NumericError(std::string("adam_step: non-finite gradient in ") +
                           ParamSet::names()[k]);
    }
  }

  state.t += 1;
  const double bias1 = 1.0 - std::pow(config.beta1, static_cast<double>(state.t));
  const double bias2 = 1.0 - std::pow(config.beta2, static_cast<double>(state.t));

  for (std::size_t k = 0; k < ParamSet::kTensorCount; ++k) {
    Tensor& theta = *param_tensors[k];
    const Tensor& g = *grad_tensors[k];
    Tensor& m = *m_tensors[k];
    Tensor& v = *v_tensors[k];
    for (std::size_t i = 0; i < theta.size(); ++i) {
      m[i] = config.beta1 * m[i] + (1.0 - config.beta1) * g[i];
      v[i] = config.beta2 * v[i] + (1.0 - config.beta2) * g[i] * g[i];
      const double m_hat = m[i] / bias1;
      const double v_hat = v[i] / bias2;
      theta[i] -= config.learning_rate * m_hat / (std::sqrt(v_hat) + config.adam_epsilon);
    }
  }
}

// Token ids at fixed length plus the 8-dim binary target.
struct EncodedExample {
  TokenSequence ids;
  TargetVector target{};
};

inline std::vector<EncodedExample> encode_examples(const std::vector<LabeledExample>& examples,
                                                   const Vocabulary& vocab, std::size_t seq_len) {
  std::vector<EncodedExample> encoded;
  encoded.reserve(examples.size());
  for (const auto& example : examples) {
    encoded.push_back(EncodedExample{encode(tokenize(example.text), vocab, seq_len), example.target});
  }
  return encoded;
}

struct EpochRecord {
  std::size_t epoch = 0;  // 1-based
  double train_loss = 0.0;
  double val_loss = 0.0;  // NaN when there is no validation split
  double seconds = 0.0;
};

using TrainHistory = std::vector<EpochRecord>;

inline std::string history_to_csv(const TrainHistory& history) {
  std::ostringstream out;
  out << "epoch,train_loss,val_loss,seconds\n";
  out.precision(17);
  for (const auto& record : history) {
    out << record.epoch << ',' << record.train_loss << ',' << record.val_loss << ','
        << record.seconds << '\n';
  }
  return out.str();
}

namespace detail {

inline Tensor targets_tensor(const std::vector<EncodedExample>& examples, std::size_t begin,
                             std::size_t end) {
  Tensor targets({end - begin, kEmotionCount});
  for (std::size_t b = begin; b < end; ++b) {
    for (std::size_t u = 0; u < kEmotionCount; ++u)
      targets.at(b - begin, u) = static_cast<double>(examples[b].target[u]);
  }
  return targets;
}

// Reported metric: element-mean BCE over a whole set, evaluated in inference
// mode, batched to bound memory.
inline double mean_bce(const ModelParams& params, const ModelConfig& config,
                       const std::vector<EncodedExample>& examples, std::size_t batch_size) {
  if (examples.empty()) return std::numeric_limits<double>::quiet_NaN();
  double total = 0.0;
  std::size_t count = 0;
  for (std::size_t begin = 0; begin < examples.size(); begin += batch_size) {
    const std::size_t end = std::min(begin + batch_size, examples.size());
    std::vector<TokenSequence> batch;
    batch.reserve(end - begin);
    for (std::size_t b = begin; b < end; ++b) batch.push_back(examples[b].ids);
    const Tensor probs = infer_probabilities(params, config, batch);
    const Tensor targets = targets_tensor(examples, begin, end);
    total += bce_loss(probs, targets) * static_cast<double>(probs.size());
    count += probs.size();
  }
  return total / static_cast<double>(count);
}

}  // namespace detail

// Mini-batch training: per epoch a seeded shuffle, then batches of
// batch_size (final partial batch kept), each taking forward(training) ->
// backward -> adam_step. Two runs with equal seeds and inputs produce
// bitwise-identical parameters.
inline TrainHistory train(const std::vector<EncodedExample>& train_set,
                          const std::vector<EncodedExample>& val_set, ModelBundle& bundle,
                          const TrainConfig& config, std::ostream* progress = nullptr) {
  config.validate();
  bundle.config.validate();
  if (train_set.empty()) throw ValidationError("train: empty training set");

  AdamState state = AdamState::init(bundle.config);
  TrainHistory history;
  history.reserve(config.epochs);

  std::vector<std::size_t> order(train_set.size());
  SplitMix64 shuffle_rng(derive_seed(config.seed, 0xE70C));

  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    const auto epoch_start = std::chrono::steady_clock::now();

    std::iota(order.begin(), order.end(), 0);
    fisher_yates_shuffle(order, shuffle_rng);

    double loss_sum = 0.0;
    std::size_t element_count = 0;
    std::size_t batch_index = 0;
    for (std::size_t begin = 0; begin < order.size(); begin += config.batch_size, ++batch_index) {
      const std::size_t end = std::min(begin + config.batch_size, order.size());

      std::vector<TokenSequence> batch_ids;
      batch_ids.reserve(end - begin);
      Tensor targets({end - begin, kEmotionCount});
      for (std::size_t b = begin; b < end; ++b) {
        const EncodedExample& example = train_set[order[b]];
        batch_ids.push_back(example.ids);
        for (std::size_t u = 0; u < kEmotionCount; ++u)
          targets.at(b - begin, u) = static_cast<double>(example.target[u]);
      }

      const std::uint64_t dropout_seed = derive_seed(config.seed, (epoch << 20) | batch_index);
      ForwardTrace trace =
          forward(bundle.params, bundle.config, batch_ids, /*training=*/true, dropout_seed);

      const double batch_loss = bce_loss(trace.probabilities, targets);
      if (!std::isfinite(batch_loss)) {
        std::ostringstream msg;
        msg << "train: non-finite loss at epoch " << epoch << ", batch " << batch_index;
        throw NumericError(msg.str());
      }
      loss_sum += batch_loss * static_cast<double>(trace.probabilities.size());
      element_count += trace.probabilities.size();

      ModelGrads grads = backward(trace, bundle.params, bundle.config, targets);
      adam_step(bundle.params, grads, state, config);
    }

    const double val_loss =
        detail::mean_bce(bundle.params, bundle.config, val_set, config.batch_size);
    const auto epoch_end = std::chrono::steady_clock::now();

    EpochRecord record;
    record.epoch = epoch;
    record.train_loss = loss_sum / static_cast<double>(element_count);
    record.val_loss = val_loss;
    record.seconds = std::chrono::duration<double>(epoch_end - epoch_start).count();
    history.push_back(record);

    if (progress) {
      *progress << "epoch " << epoch << "/" << config.epochs << " train_loss=" << record.train_loss
                << " val_loss=" << record.val_loss << " (" << record.seconds << "s)\n";
    }
  }
  return history;
}

// Central-difference check of the analytic gradients, using the same
// objective backward() differentiates (per-example BCE summed over units,
// averaged over the batch). Dropout masks are frozen by reusing one seed for
// every evaluation, so the objective is a fixed differentiable function of
// the parameters. Checks every coordinate, or a seeded sample of 1000 when
// the model has more than 10,000 parameters. Returns the max over checked
// coordinates of |ga - gn| / max(1e-12, |ga| + |gn|).
inline double gradient_check(const ModelBundle& bundle, const std::vector<EncodedExample>& batch,
                             double step, std::uint64_t seed = 1, bool fault_sign_flip = false) {
  if (!(step > 0.0)) throw ValidationError("gradient_check: step must be > 0");
  if (batch.empty()) throw ValidationError("gradient_check: empty batch");

  std::vector<TokenSequence> batch_ids;
  batch_ids.reserve(batch.size());
  for (const auto& example : batch) batch_ids.push_back(example.ids);
  Tensor targets({batch.size(), kEmotionCount});
  for (std::size_t b = 0; b < batch.size(); ++b) {
    for (std::size_t u = 0; u < kEmotionCount; ++u)
      targets.at(b, u) = static_cast<double>(batch[b].target[u]);
  }

  const std::uint64_t dropout_seed = derive_seed(seed, 0xD0);

  ModelParams params = bundle.params;  // mutable working copy
  const auto objective = [&]() {
    ForwardTrace trace = forward(params, bundle.config, batch_ids, /*training=*/true, dropout_seed);
    double total = 0.0;
    for (std::size_t b = 0; b < batch.size(); ++b) {
      for (std::size_t u = 0; u < kEmotionCount; ++u) {
        const double p = std::clamp(trace.probabilities.at(b, u), kBceEpsilon, 1.0 - kBceEpsilon);
        const double y = targets.at(b, u);
        total += -(y * std::log(p) + (1.0 - y) * std::log(1.0 - p));
      }
    }
    return total / static_cast<double>(batch.size());
  };

  ForwardTrace trace = forward(params, bundle.config, batch_ids, /*training=*/true, dropout_seed);
  ModelGrads grads = backward(trace, params, bundle.config, targets);
  if (fault_sign_flip) {
    // Test hook: corrupt the analytic gradients so the check must fail.
    for (double& g : grads.conv1_weights) g = -g;
  }

  const std::size_t total_params = params.parameter_count();
  std::vector<std::pair<std::size_t, std::size_t>> coords;  // (tensor index, flat offset)
  if (total_params <= 10000) {
    for (std::size_t k = 0; k < ParamSet::kTensorCount; ++k) {
      for (std::size_t i = 0; i < params.tensors()[k]->size(); ++i) coords.emplace_back(k, i);
    }
  } else {
    SplitMix64 rng(derive_seed(seed, 0xC0));
    std::vector<bool> taken(total_params, false);
    std::vector<std::size_t> tensor_offsets(ParamSet::kTensorCount, 0);
    std::size_t running = 0;
    for (std::size_t k = 0; k < ParamSet::kTensorCount; ++k) {
      tensor_offsets[k] = running;
      running += params.tensors()[k]->size();
    }
    while (coords.size() < 1000) {
      const std::size_t flat = static_cast<std::size_t>(rng.next_below(total_params));
      if (taken[flat]) continue;
      taken[flat] = true;
      std::size_t k = ParamSet::kTensorCount - 1;
      while (tensor_offsets[k] > flat) --k;
      coords.emplace_back(k, flat - tensor_offsets[k]);
    }
  }

  double max_rel_error = 0.0;
  auto param_tensors = params.tensors();
  auto grad_tensors = grads.tensors();
  for (const auto& [k, i] : coords) {
    Tensor& t = *param_tensors[k];
    const double saved = t[i];
    t[i] = saved + step;
    const double loss_plus = objective();
    t[i] = saved - step;
    const double loss_minus = objective();
    t[i] = saved;

    const double numeric = (loss_plus - loss_minus) / (2.0 * step);
    const double analytic = (*grad_tensors[k])[i];
    const double rel =
        std::abs(analytic - numeric) / std::max(1e-12, std::abs(analytic) + std::abs(numeric));
    max_rel_error = std::max(max_rel_error, rel);
  }
  return max_rel_error;
}

// Deterministic 32-example toy set: the token "fury" marks anger and "tears"
// marks sadness. Used by the overfit sanity check.
inline std::vector<LabeledExample> synthetic_overfit_dataset() {
  static const std::array<const char*, 8> fillers = {"the",  "night", "road", "sun",
                                                     "rain", "heart", "cold", "morning"};
  std::vector<LabeledExample> examples;
  examples.reserve(32);
  for (std::size_t i = 0; i < 32; ++i) {
    const bool anger = (i % 2) == 0;
    const char* signal = anger ? "fury" : "tears";
    const char* a = fillers[i % fillers.size()];
    const char* b = fillers[(i / 2) % fillers.size()];
    const char* c = fillers[(i / 4) % fillers.size()];

    LabeledExample example;
    example.text = std::string(a) + " " + signal + " " + b + " " + signal + " " + c;
    example.target[index_of(anger ? Emotion::anger : Emotion::sadness)] = 1;
    examples.push_back(std::move(example));
  }
  return examples;
}

}  // namespace lyricnn
