#pragma once

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "lyricnn/emotions.hpp"
#include "lyricnn/errors.hpp"
#include "lyricnn/io.hpp"
#include "lyricnn/layers.hpp"
#include "lyricnn/rng.hpp"
#include "lyricnn/tensor.hpp"
#include "lyricnn/text.hpp"

namespace lyricnn {

// Network hyperparameters. The reference stack is two conv layers of 100
// filters with kernel size 4, dense layers of 64 and 32 units, one output
// unit per emotion, and 20% dropout; seq_len and embed_size are sized to the
// data at hand.
struct ModelConfig {
  std::size_t vocab_size = 0;
  std::size_t embed_size = 64;
  std::size_t seq_len = 128;
  std::size_t conv_filters = 100;
  std::size_t kernel_size = 4;
  std::size_t pool_size = 2;
  std::size_t dense1_units = 64;
  std::size_t dense2_units = 32;
  std::size_t output_units = kEmotionCount;
  double dropout_p = 0.2;

  std::size_t conv1_out_len() const { return seq_len - kernel_size + 1; }
  std::size_t conv2_out_len() const { return conv1_out_len() - kernel_size + 1; }
  std::size_t pool_out_len() const { return conv2_out_len() / pool_size; }

  void validate() const {
    if (vocab_size < 2) throw ValidationError("config: vocab_size must be >= 2");
    for (std::size_t v : {embed_size, seq_len, conv_filters, kernel_size, pool_size, dense1_units,
                          dense2_units, output_units}) {
      if (v < 1) throw ValidationError("config: all size fields must be >= 1");
    }
    if (!(dropout_p >= 0.0 && dropout_p < 1.0))
      throw ValidationError("config: dropout_p must be in [0, 1)");
    // The network must produce at least one pooled position.
    if (seq_len < 2 * (kernel_size - 1) + pool_size)
      throw ValidationError("config: seq_len too short for kernel_size and pool_size");
  }

  nlohmann::json to_json() const {
    return {{"vocab_size", vocab_size},     {"embed_size", embed_size},
            {"seq_len", seq_len},           {"conv_filters", conv_filters},
            {"kernel_size", kernel_size},   {"pool_size", pool_size},
            {"dense1_units", dense1_units}, {"dense2_units", dense2_units},
            {"output_units", output_units}, {"dropout_p", dropout_p}};
  }

  static ModelConfig from_json(const nlohmann::json& j) {
    ModelConfig config;
    try {
      config.vocab_size = j.at("vocab_size").get<std::size_t>();
      config.embed_size = j.at("embed_size").get<std::size_t>();
      config.seq_len = j.at("seq_len").get<std::size_t>();
      config.conv_filters = j.at("conv_filters").get<std::size_t>();
      config.kernel_size = j.at("kernel_size").get<std::size_t>();
      config.pool_size = j.at("pool_size").get<std::size_t>();
      config.dense1_units = j.at("dense1_units").get<std::size_t>();
      config.dense2_units = j.at("dense2_units").get<std::size_t>();
      config.output_units = j.at("output_units").get<std::size_t>();
      config.dropout_p = j.at("dropout_p").get<double>();
    } catch (const nlohmann::json::exception& e) {
      throw ValidationError(std::string("config: ") + e.what());
    }
    return config;
  }
};

// All learnable tensors in canonical order. This order is the serialization
// order and the Adam-state order; every gradient bundle mirrors it.
struct ParamSet {
  Tensor embedding;       // V x E
  Tensor conv1_weights;   // F x K x E
  Tensor conv1_bias;      // F
  Tensor conv2_weights;   // F x K x F
  Tensor conv2_bias;      // F
  Tensor dense1_weights;  // D1 x F
  Tensor dense1_bias;     // D1
  Tensor dense2_weights;  // D2 x D1
  Tensor dense2_bias;     // D2
  Tensor output_weights;  // U x D2
  Tensor output_bias;     // U

  static constexpr std::size_t kTensorCount = 11;

  static const std::array<const char*, kTensorCount>& names() {
    static const std::array<const char*, kTensorCount> kNames = {
        "embedding",     "conv1_weights",  "conv1_bias",  "conv2_weights",
        "conv2_bias",    "dense1_weights", "dense1_bias", "dense2_weights",
        "dense2_bias",   "output_weights", "output_bias"};
    return kNames;
  }

  std::array<Tensor*, kTensorCount> tensors() {
    return {&embedding,      &conv1_weights, &conv1_bias,  &conv2_weights,
            &conv2_bias,     &dense1_weights, &dense1_bias, &dense2_weights,
            &dense2_bias,    &output_weights, &output_bias};
  }

  std::array<const Tensor*, kTensorCount> tensors() const {
    return {&embedding,      &conv1_weights, &conv1_bias,  &conv2_weights,
            &conv2_bias,     &dense1_weights, &dense1_bias, &dense2_weights,
            &dense2_bias,    &output_weights, &output_bias};
  }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (const Tensor* t : tensors()) n += t->size();
    return n;
  }

  // Zero-filled tensors with the canonical shapes for `config`.
  static ParamSet shaped(const ModelConfig& config) {
    ParamSet p;
    p.embedding = Tensor({config.vocab_size, config.embed_size});
    p.conv1_weights = Tensor({config.conv_filters, config.kernel_size, config.embed_size});
    p.conv1_bias = Tensor({config.conv_filters});
    p.conv2_weights = Tensor({config.conv_filters, config.kernel_size, config.conv_filters});
    p.conv2_bias = Tensor({config.conv_filters});
    p.dense1_weights = Tensor({config.dense1_units, config.conv_filters});
    p.dense1_bias = Tensor({config.dense1_units});
    p.dense2_weights = Tensor({config.dense2_units, config.dense1_units});
    p.dense2_bias = Tensor({config.dense2_units});
    p.output_weights = Tensor({config.output_units, config.dense2_units});
    p.output_bias = Tensor({config.output_units});
    return p;
  }
};

using ModelParams = ParamSet;
using ModelGrads = ParamSet;

// Embedding rows uniform in (-0.05, 0.05); conv and dense weights
// Glorot-uniform with limit sqrt(6 / (fan_in + fan_out)); biases zero.
// Equal seeds give bitwise-equal parameters.
inline ModelParams init_params(const ModelConfig& config, std::uint64_t seed) {
  config.validate();
  ModelParams params = ParamSet::shaped(config);
  SplitMix64 rng(seed);

  for (double& v : params.embedding) v = rng.next_uniform(-0.05, 0.05);

  const auto glorot_fill = [&rng](Tensor& t, std::size_t fan_in, std::size_t fan_out) {
    const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    for (double& v : t) v = rng.next_uniform(-limit, limit);
  };
  glorot_fill(params.conv1_weights, config.kernel_size * config.embed_size, config.conv_filters);
  glorot_fill(params.conv2_weights, config.kernel_size * config.conv_filters, config.conv_filters);
  glorot_fill(params.dense1_weights, config.conv_filters, config.dense1_units);
  glorot_fill(params.dense2_weights, config.dense1_units, config.dense2_units);
  glorot_fill(params.output_weights, config.dense2_units, config.output_units);
  return params;
}

// Saved activations for one example, consumed by the backward pass.
struct ExampleTrace {
  TokenSequence ids;
  Tensor drop1_mask;    // L x E
  Tensor conv1_input;   // L x E (embedding after dropout)
  Tensor conv1_pre;     // (L-K+1) x F
  Tensor conv2_input;   // relu(conv1_pre)
  Tensor conv2_pre;     // (L-2K+2) x F
  Tensor relu2_out;     // max-pool input
  std::vector<std::size_t> pool_argmax;
  Tensor pool_out;      // P x F (global max-pool input)
  std::vector<std::size_t> gmp_argmax;
  Tensor dense1_input;  // F
  Tensor dense1_pre;    // D1
  Tensor dense2_input;  // softplus(dense1_pre)
  Tensor dense2_pre;    // D2
  Tensor drop2_mask;    // D2
  Tensor output_input;  // softplus(dense2_pre) after dropout
  Tensor probabilities; // U
};

// One batch worth of caches plus the output probabilities, consumed at most
// once by backward().
struct ForwardTrace {
  Tensor probabilities;  // B x U
  std::vector<ExampleTrace> examples;
  bool consumed = false;
};

namespace detail {

inline ExampleTrace forward_one(const ModelParams& params, const ModelConfig& config,
                                const TokenSequence& ids, const Tensor& drop1_mask,
                                const Tensor& drop2_mask) {
  ExampleTrace trace;
  trace.ids = ids;
  trace.drop1_mask = drop1_mask;
  trace.drop2_mask = drop2_mask;

  const Tensor embedded = embedding_forward(ids, params.embedding);
  trace.conv1_input = apply_mask(embedded, drop1_mask);

  trace.conv1_pre = conv1d_forward(trace.conv1_input, params.conv1_weights, params.conv1_bias);
  trace.conv2_input = relu(trace.conv1_pre);
  trace.conv2_pre = conv1d_forward(trace.conv2_input, params.conv2_weights, params.conv2_bias);
  trace.relu2_out = relu(trace.conv2_pre);

  PoolResult pooled = maxpool1d_forward(trace.relu2_out, config.pool_size);
  trace.pool_argmax = std::move(pooled.argmax);
  trace.pool_out = std::move(pooled.output);

  PoolResult global = global_maxpool_forward(trace.pool_out);
  trace.gmp_argmax = std::move(global.argmax);
  trace.dense1_input = std::move(global.output);

  trace.dense1_pre = dense_forward(trace.dense1_input, params.dense1_weights, params.dense1_bias);
  trace.dense2_input = softplus(trace.dense1_pre);
  trace.dense2_pre = dense_forward(trace.dense2_input, params.dense2_weights, params.dense2_bias);

  const Tensor dense2_post = softplus(trace.dense2_pre);
  trace.output_input = apply_mask(dense2_post, drop2_mask);

  const Tensor logits = dense_forward(trace.output_input, params.output_weights, params.output_bias);
  trace.probabilities = sigmoid(logits);
  return trace;
}

}  // namespace detail

// Layer order: embed, dropout, conv+relu, conv+relu, max-pool, global
// max-pool, dense+softplus, dense+softplus, dropout, dense+sigmoid.
// Dropout masks are drawn from `seed` sequentially per example in ascending
// index order, so the result is independent of evaluation order.
inline ForwardTrace forward(const ModelParams& params, const ModelConfig& config,
                            const std::vector<TokenSequence>& batch, bool training,
                            std::uint64_t seed) {
  config.validate();
  if (batch.empty()) throw ValidationError("forward: empty batch");
  for (const TokenSequence& ids : batch) {
    if (ids.size() != config.seq_len) throw ValidationError("forward: sequence length mismatch");
  }

  SplitMix64 rng(seed);
  std::vector<Tensor> drop1_masks, drop2_masks;
  drop1_masks.reserve(batch.size());
  drop2_masks.reserve(batch.size());
  for (std::size_t b = 0; b < batch.size(); ++b) {
    drop1_masks.push_back(
        dropout_mask({config.seq_len, config.embed_size}, config.dropout_p, training, rng));
    drop2_masks.push_back(dropout_mask({config.dense2_units}, config.dropout_p, training, rng));
  }

  ForwardTrace trace;
  trace.probabilities = Tensor({batch.size(), config.output_units});
  trace.examples.reserve(batch.size());
  for (std::size_t b = 0; b < batch.size(); ++b) {
    trace.examples.push_back(
        detail::forward_one(params, config, batch[b], drop1_masks[b], drop2_masks[b]));
    const Tensor& probs = trace.examples.back().probabilities;
    for (std::size_t u = 0; u < config.output_units; ++u) trace.probabilities.at(b, u) = probs[u];
  }
  return trace;
}

// Gradients of the training objective: per-example binary cross-entropy
// summed over the output units, averaged over the batch. With a sigmoid
// output this makes d(objective)/d(logit) = (p - y) / B, and the output-bias
// gradient the batch mean of (p - y).
inline ModelGrads backward(ForwardTrace& trace, const ModelParams& params,
                           const ModelConfig& config, const Tensor& targets) {
  if (trace.consumed) throw ValidationError("backward: trace already consumed");
  trace.consumed = true;
  const std::size_t batch_size = trace.examples.size();
  if (targets.rank() != 2 || targets.dim(0) != batch_size || targets.dim(1) != config.output_units)
    throw ValidationError("backward: target shape mismatch");

  ModelGrads grads = ParamSet::shaped(config);
  const double inv_batch = 1.0 / static_cast<double>(batch_size);

  for (std::size_t b = 0; b < batch_size; ++b) {
    const ExampleTrace& ex = trace.examples[b];

    Tensor dlogits({config.output_units});
    for (std::size_t u = 0; u < config.output_units; ++u)
      dlogits[u] = (ex.probabilities[u] - targets.at(b, u)) * inv_batch;

    Tensor d_output_input;
    dense_backward(ex.output_input, params.output_weights, dlogits, d_output_input,
                   grads.output_weights, grads.output_bias);

    Tensor d_dense2_post = dropout_backward(d_output_input, ex.drop2_mask);
    Tensor d_dense2_pre = softplus_backward(ex.dense2_pre, d_dense2_post);

    Tensor d_dense2_input;
    dense_backward(ex.dense2_input, params.dense2_weights, d_dense2_pre, d_dense2_input,
                   grads.dense2_weights, grads.dense2_bias);
    Tensor d_dense1_pre = softplus_backward(ex.dense1_pre, d_dense2_input);

    Tensor d_dense1_input;
    dense_backward(ex.dense1_input, params.dense1_weights, d_dense1_pre, d_dense1_input,
                   grads.dense1_weights, grads.dense1_bias);

    Tensor d_pool_out =
        global_maxpool_backward(d_dense1_input, ex.gmp_argmax, ex.pool_out.shape());
    Tensor d_relu2_out = maxpool1d_backward(d_pool_out, ex.pool_argmax, ex.relu2_out.shape());
    Tensor d_conv2_pre = relu_backward(ex.conv2_pre, d_relu2_out);

    Tensor d_conv2_input;
    conv1d_backward(ex.conv2_input, params.conv2_weights, d_conv2_pre, d_conv2_input,
                    grads.conv2_weights, grads.conv2_bias);
    Tensor d_conv1_pre = relu_backward(ex.conv1_pre, d_conv2_input);

    Tensor d_conv1_input;
    conv1d_backward(ex.conv1_input, params.conv1_weights, d_conv1_pre, d_conv1_input,
                    grads.conv1_weights, grads.conv1_bias);

    Tensor d_embedded = dropout_backward(d_conv1_input, ex.drop1_mask);
    embedding_backward(ex.ids, d_embedded, grads.embedding);
  }
  return grads;
}

// Inference helper: probabilities only, dropout inactive.
inline Tensor infer_probabilities(const ModelParams& params, const ModelConfig& config,
                                  const std::vector<TokenSequence>& batch) {
  return forward(params, config, batch, /*training=*/false, /*seed=*/0).probabilities;
}

// ---------------------------------------------------------------------------
// model bundle persistence
//
// Binary little-endian layout:
//   bytes 0..3   magic "LYC1"
//   bytes 4..7   u32 format version (1)
//   bytes 8..15  u64 JSON header length H
//   H bytes      JSON header {"config": {...}, "emotions": [8 names],
//                             "vocab": [tokens in id order]}
//   N*4 bytes    parameter values as f32, canonical tensor order
//   4 bytes      u32 CRC-32 of everything before it

struct ModelBundle {
  ModelConfig config;
  ModelParams params;
  Vocabulary vocab;
};

inline constexpr char kModelMagic[4] = {'L', 'Y', 'C', '1'};
inline constexpr std::uint32_t kModelFormatVersion = 1;

namespace detail {

inline void append_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

inline void append_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

inline std::uint32_t read_u32(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

inline std::uint64_t read_u64(const unsigned char* p) {
  std::uint64_t v = 0;
  for (int i = 7; i >= 0; --i) v = (v << 8) | p[i];
  return v;
}

}  // namespace detail

inline std::string serialize_model(const ModelBundle& bundle) {
  bundle.config.validate();
  if (bundle.vocab.size() != bundle.config.vocab_size)
    throw ValidationError("save_model: vocabulary size does not match config");

  nlohmann::json header;
  header["config"] = bundle.config.to_json();
  header["emotions"] = std::vector<std::string>(emotion_names().begin(), emotion_names().end());
  header["vocab"] = bundle.vocab.id_to_token();
  const std::string header_text = header.dump();

  std::string out(kModelMagic, sizeof(kModelMagic));
  detail::append_u32(out, kModelFormatVersion);
  detail::append_u64(out, header_text.size());
  out += header_text;

  for (const Tensor* t : bundle.params.tensors()) {
    for (std::size_t i = 0; i < t->size(); ++i) {
      const auto bits = std::bit_cast<std::uint32_t>(static_cast<float>((*t)[i]));
      detail::append_u32(out, bits);
    }
  }
  detail::append_u32(out, detail::crc32(out));
  return out;
}

inline ModelBundle deserialize_model(std::string_view blob) {
  if (blob.size() < 16) throw ValidationError("model file: truncated header");
  const auto* bytes = reinterpret_cast<const unsigned char*>(blob.data());
  if (std::memcmp(blob.data(), kModelMagic, sizeof(kModelMagic)) != 0)
    throw ValidationError("model file: bad magic");
  const std::uint32_t version = detail::read_u32(bytes + 4);
  if (version != kModelFormatVersion) {
    std::ostringstream msg;
    msg << "model file: unsupported version " << version;
    throw ValidationError(msg.str());
  }
  const std::uint64_t header_len = detail::read_u64(bytes + 8);
  if (blob.size() < 16 + header_len + 4) throw ValidationError("model file: truncated header");

  nlohmann::json header = nlohmann::json::parse(blob.substr(16, header_len), nullptr, false);
  if (header.is_discarded() || !header.is_object())
    throw ValidationError("model file: invalid JSON header");
  if (!header.contains("config") || !header.contains("emotions") || !header.contains("vocab"))
    throw ValidationError("model file: incomplete JSON header");

  ModelConfig config = ModelConfig::from_json(header.at("config"));
  config.validate();

  const auto emotions = header.at("emotions").get<std::vector<std::string>>();
  if (emotions.size() != kEmotionCount)
    throw ValidationError("model file: emotion list size mismatch");
  for (std::size_t i = 0; i < kEmotionCount; ++i) {
    if (emotions[i] != emotion_names()[i])
      throw ValidationError("model file: emotion order differs from canonical order");
  }

  ModelParams params = ParamSet::shaped(config);
  const std::size_t value_count = params.parameter_count();
  const std::size_t expected_size = 16 + header_len + value_count * 4 + 4;
  if (blob.size() < expected_size) throw ValidationError("model file: truncated weights");
  if (blob.size() > expected_size) throw ValidationError("model file: trailing bytes");

  const std::uint32_t stored_crc = detail::read_u32(bytes + blob.size() - 4);
  const std::uint32_t actual_crc =
      detail::crc32(bytes, blob.size() - 4);
  if (stored_crc != actual_crc) throw ValidationError("model file: checksum mismatch");

  std::size_t offset = 16 + header_len;
  for (Tensor* t : params.tensors()) {
    for (std::size_t i = 0; i < t->size(); ++i, offset += 4) {
      const std::uint32_t bits = detail::read_u32(bytes + offset);
      (*t)[i] = static_cast<double>(std::bit_cast<float>(bits));
    }
  }

  Vocabulary vocab = Vocabulary::from_tokens(header.at("vocab").get<std::vector<std::string>>());
  if (vocab.size() != config.vocab_size)
    throw ValidationError("model file: vocabulary size does not match config");

  return ModelBundle{config, std::move(params), std::move(vocab)};
}

inline void save_model(const ModelBundle& bundle, const std::filesystem::path& path) {
  atomic_write_file(path, serialize_model(bundle));
}

inline ModelBundle load_model(const std::filesystem::path& path) {
  return deserialize_model(read_file(path));
}

// Narrows every parameter through f32 the way one save/load cycle would;
// model files are bit-stable after this.
inline void quantize_params(ModelParams& params) {
  for (Tensor* t : params.tensors()) {
    for (double& v : *t) v = static_cast<double>(static_cast<float>(v));
  }
}

}  // namespace lyricnn
