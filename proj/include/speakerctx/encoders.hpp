/*
 * Copyright 2026 The speakerctx Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#ifndef SPEAKERCTX_ENCODERS_HPP_
#define SPEAKERCTX_ENCODERS_HPP_

// Response encoders: a single-layer bidirectional LSTM over token
// embeddings with last-step or attention pooling, an affine audio
// projection, and multimodal concatenation. Parameters live in one flat
// vector owned by the caller; the encoder object only knows the layout, so
// copying a model is a vector copy and optimizers see a single block.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <type_traits>
#include <vector>

#include "speakerctx/common.hpp"

namespace speakerctx {

enum class Pooling { kLastStep, kAttention };

std::string pooling_name(Pooling pooling);
Pooling parse_pooling(const std::string& name);

struct EncoderConfig {
  int vocab_size = 1;
  int embed_dim = 16;
  int hidden_dim = 16;  // per direction
  Pooling pooling = Pooling::kAttention;
  int audio_input_dim = 0;  // 0 means text-only
  int audio_context_dim = 0;
  int max_length = 512;  // longer sequences keep their first max_length tokens

  bool has_audio() const { return audio_input_dim > 0; }
  int text_context_dim() const { return 2 * hidden_dim; }
  int context_dim() const {
    return text_context_dim() + (has_audio() ? audio_context_dim : 0);
  }
  bool operator==(const EncoderConfig&) const = default;
};

struct Slice {
  int begin = 0;
  int end = 0;
  int size() const { return end - begin; }
  bool operator==(const Slice&) const = default;
};

struct ModalitySlices {
  Slice text;
  std::optional<Slice> audio;

  static ModalitySlices for_config(const EncoderConfig& config) {
    ModalitySlices slices{{0, config.text_context_dim()}, std::nullopt};
    if (config.has_audio()) {
      slices.audio = Slice{config.text_context_dim(), config.context_dim()};
    }
    return slices;
  }
  int size() const { return audio ? audio->end : text.end; }
  bool operator==(const ModalitySlices&) const = default;
};

template <typename Scalar>
struct ContextVector {
  std::string speaker_id;
  int prompt_index = 0;
  Vector<Scalar> values;
  ModalitySlices slices;

  auto text() const { return values.segment(slices.text.begin, slices.text.size()); }
  auto audio() const {
    if (!slices.audio) fail(ErrorKind::kMissingKey, "context vector has no audio slice");
    return values.segment(slices.audio->begin, slices.audio->size());
  }
};

template <typename Scalar>
inline Vector<Scalar> softmax(const Eigen::Ref<const Vector<Scalar>>& scores) {
  Vector<Scalar> weights = (scores.array() - scores.maxCoeff()).exp().matrix();
  weights /= weights.sum();
  return weights;
}

template <typename Scalar>
struct AttentionState {
  Vector<Scalar> scores;   // e_t = w_a . h_t
  Vector<Scalar> weights;  // softmax(e)
  Vector<Scalar> context;  // sum_t weights_t h_t
};

// `hidden` holds one hidden state per column.
template <typename Scalar>
AttentionState<Scalar> attend(const Eigen::Ref<const Matrix<Scalar>>& hidden,
                              const Eigen::Ref<const Vector<Scalar>>& score_weights) {
  require(hidden.cols() > 0, "attention over an empty sequence");
  require(score_weights.size() == hidden.rows(), "attention weight dimension mismatch");
  AttentionState<Scalar> state;
  state.scores = hidden.transpose() * score_weights;
  state.weights = softmax<Scalar>(state.scores);
  state.context = hidden * state.weights;
  return state;
}

// c^a = W^a v^a + b^a
template <typename Scalar>
Vector<Scalar> encode_audio(const Eigen::Ref<const Vector<Scalar>>& features,
                            const Eigen::Ref<const Matrix<Scalar>>& projection,
                            const Eigen::Ref<const Vector<Scalar>>& bias) {
  if (features.size() != projection.cols()) {
    fail(ErrorKind::kInvalidArgument,
         "audio feature dimension " + std::to_string(features.size()) +
             " does not match projection input " + std::to_string(projection.cols()));
  }
  require(bias.size() == projection.rows(), "audio bias dimension mismatch");
  return projection * features + bias;
}

// Text first, audio second.
template <typename Scalar>
ContextVector<Scalar> fuse_multimodal(const ContextVector<Scalar>& text,
                                      const Eigen::Ref<const Vector<Scalar>>& audio) {
  ContextVector<Scalar> fused;
  fused.speaker_id = text.speaker_id;
  fused.prompt_index = text.prompt_index;
  const auto text_dim = text.values.size();
  fused.values.resize(text_dim + audio.size());
  fused.values << text.values, audio;
  fused.slices.text = Slice{0, static_cast<int>(text_dim)};
  fused.slices.audio = Slice{static_cast<int>(text_dim),
                             static_cast<int>(text_dim + audio.size())};
  return fused;
}

template <typename Scalar>
struct LstmTrace {
  Matrix<Scalar> gates;   // 4H x T, activated i, f, g, o
  Matrix<Scalar> cell;    // H x T
  Matrix<Scalar> hidden;  // H x T, indexed by token position
};

template <typename Scalar>
struct EncoderTrace {
  std::vector<std::int32_t> tokens;
  Matrix<Scalar> inputs;  // E x T embedded tokens
  LstmTrace<Scalar> forward;
  LstmTrace<Scalar> backward;
  Vector<Scalar> attention;  // empty for last-step pooling
  Vector<Scalar> audio_input;
};

template <typename Scalar>
class BiLstmEncoder {
 public:
  using Vec = Vector<Scalar>;
  using Mat = Matrix<Scalar>;
  using Index = Eigen::Index;

  explicit BiLstmEncoder(EncoderConfig config) : config_(config) {
    require(config_.vocab_size >= 1, "vocab_size must be >= 1");
    require(config_.embed_dim >= 1 && config_.hidden_dim >= 1,
            "embed_dim and hidden_dim must be >= 1");
    require(!config_.has_audio() || config_.audio_context_dim >= 1,
            "audio_context_dim must be >= 1 when audio is enabled");
    require(config_.max_length >= 1, "max_length must be >= 1");
    const Index e = config_.embed_dim, h = config_.hidden_dim;
    Index offset = 0;
    embedding_ = offset;
    offset += e * config_.vocab_size;
    for (Direction& dir : directions_) {
      dir.input_weights = offset;
      offset += 4 * h * e;
      dir.recurrent_weights = offset;
      offset += 4 * h * h;
      dir.bias = offset;
      offset += 4 * h;
    }
    attention_ = offset;
    if (config_.pooling == Pooling::kAttention) offset += 2 * h;
    audio_weights_ = offset;
    if (config_.has_audio()) {
      offset += static_cast<Index>(config_.audio_context_dim) * config_.audio_input_dim;
    }
    audio_bias_ = offset;
    if (config_.has_audio()) offset += config_.audio_context_dim;
    size_ = offset;
  }

  const EncoderConfig& config() const { return config_; }
  Index num_parameters() const { return size_; }
  int context_dim() const { return config_.context_dim(); }
  ModalitySlices slices() const { return ModalitySlices::for_config(config_); }

  // Views into a flat parameter (or gradient) block.
  template <typename P>
  auto embedding(P* p) const { return view(p + embedding_, config_.embed_dim, config_.vocab_size); }
  template <typename P>
  auto input_weights(P* p, int dir) const {
    return view(p + directions_[dir].input_weights, 4 * config_.hidden_dim, config_.embed_dim);
  }
  template <typename P>
  auto recurrent_weights(P* p, int dir) const {
    return view(p + directions_[dir].recurrent_weights, 4 * config_.hidden_dim, config_.hidden_dim);
  }
  template <typename P>
  auto gate_bias(P* p, int dir) const { return view(p + directions_[dir].bias, 4 * config_.hidden_dim, 1); }
  template <typename P>
  auto attention_weights(P* p) const {
    require(config_.pooling == Pooling::kAttention, "encoder has no attention parameters");
    return view(p + attention_, 2 * config_.hidden_dim, 1);
  }
  template <typename P>
  auto audio_projection(P* p) const {
    require(config_.has_audio(), "encoder has no audio branch");
    return view(p + audio_weights_, config_.audio_context_dim, config_.audio_input_dim);
  }
  template <typename P>
  auto audio_bias(P* p) const {
    require(config_.has_audio(), "encoder has no audio branch");
    return view(p + audio_bias_, config_.audio_context_dim, 1);
  }
  Index embedding_offset() const { return embedding_; }
  Index attention_offset() const { return attention_; }

  // Embeddings uniform +-0.05 with the UNK column pinned at zero; LSTM and
  // projection weights uniform +-1/sqrt(fan); forget-gate bias 1.
  void initialize(std::span<Scalar> params, std::uint64_t seed) const {
    require(static_cast<Index>(params.size()) == size_, "parameter block size mismatch");
    std::mt19937_64 rng(seed);
    auto uniform = [&rng](double bound) {
      return static_cast<Scalar>(std::uniform_real_distribution<double>(-bound, bound)(rng));
    };
    Scalar* p = params.data();
    auto emb = embedding(p);
    for (Index v = 0; v < emb.cols(); ++v)
      for (Index r = 0; r < emb.rows(); ++r) emb(r, v) = uniform(0.05);
    emb.col(0).setZero();
    const double bound = 1.0 / std::sqrt(static_cast<double>(config_.hidden_dim));
    const int h = config_.hidden_dim;
    for (int dir = 0; dir < 2; ++dir) {
      auto wx = input_weights(p, dir);
      auto wh = recurrent_weights(p, dir);
      for (Index k = 0; k < wx.size(); ++k) wx.data()[k] = uniform(bound);
      for (Index k = 0; k < wh.size(); ++k) wh.data()[k] = uniform(bound);
      auto b = gate_bias(p, dir);
      b.setZero();
      b.middleRows(h, h).setOnes();
    }
    if (config_.pooling == Pooling::kAttention) {
      auto wa = attention_weights(p);
      const double abound = 1.0 / std::sqrt(2.0 * h);
      for (Index k = 0; k < wa.size(); ++k) wa.data()[k] = uniform(abound);
    }
    if (config_.has_audio()) {
      auto wa = audio_projection(p);
      const double abound = 1.0 / std::sqrt(static_cast<double>(config_.audio_input_dim));
      for (Index k = 0; k < wa.size(); ++k) wa.data()[k] = uniform(abound);
      audio_bias(p).setZero();
    }
  }

  // Out-of-vocabulary indices map to UNK; sequences are truncated to max_length.
  std::vector<std::int32_t> prepare_tokens(std::span<const std::int32_t> tokens) const {
    if (tokens.empty()) fail(ErrorKind::kInvalidArgument, "cannot encode an empty token sequence");
    const std::size_t length = std::min<std::size_t>(tokens.size(), config_.max_length);
    std::vector<std::int32_t> out(tokens.begin(), tokens.begin() + length);
    for (auto& t : out) {
      if (t < 0 || t >= config_.vocab_size) t = 0;
    }
    return out;
  }

  Vec forward(std::span<const Scalar> params, std::span<const std::int32_t> tokens,
              const Eigen::Ref<const Vec>& audio, EncoderTrace<Scalar>* trace = nullptr) const {
    require(static_cast<Index>(params.size()) == size_, "parameter block size mismatch");
    EncoderTrace<Scalar> local;
    EncoderTrace<Scalar>& tr = trace ? *trace : local;
    const Scalar* p = params.data();
    tr.tokens = prepare_tokens(tokens);
    const Index steps = static_cast<Index>(tr.tokens.size());
    const int h = config_.hidden_dim;

    const auto emb = embedding(p);
    tr.inputs.resize(config_.embed_dim, steps);
    for (Index t = 0; t < steps; ++t) tr.inputs.col(t) = emb.col(tr.tokens[t]);
    run_direction(p, 0, tr.inputs, tr.forward);
    run_direction(p, 1, tr.inputs, tr.backward);

    Vec context(context_dim());
    if (config_.pooling == Pooling::kLastStep) {
      context.head(h) = tr.forward.hidden.col(steps - 1);
      context.segment(h, h) = tr.backward.hidden.col(0);
      tr.attention.resize(0);
    } else {
      Mat stacked(2 * h, steps);
      stacked.topRows(h) = tr.forward.hidden;
      stacked.bottomRows(h) = tr.backward.hidden;
      auto state = attend<Scalar>(stacked, attention_weights(p));
      context.head(2 * h) = state.context;
      tr.attention = std::move(state.weights);
    }
    if (config_.has_audio()) {
      tr.audio_input = audio;
      context.tail(config_.audio_context_dim) =
          encode_audio<Scalar>(audio, audio_projection(p), audio_bias(p));
    }
    return context;
  }

  // Accumulates d(loss)/d(params) into `grad` given d(loss)/d(context).
  void backward(std::span<const Scalar> params, const EncoderTrace<Scalar>& tr,
                const Eigen::Ref<const Vec>& d_context, std::span<Scalar> grad) const {
    require(static_cast<Index>(grad.size()) == size_, "gradient block size mismatch");
    require(d_context.size() == context_dim(), "context gradient dimension mismatch");
    const Scalar* p = params.data();
    Scalar* g = grad.data();
    const Index steps = static_cast<Index>(tr.tokens.size());
    const int h = config_.hidden_dim;

    Mat d_fwd = Mat::Zero(h, steps);
    Mat d_bwd = Mat::Zero(h, steps);
    const auto d_text = d_context.head(2 * h);
    if (config_.pooling == Pooling::kLastStep) {
      d_fwd.col(steps - 1) += d_text.head(h);
      d_bwd.col(0) += d_text.tail(h);
    } else {
      const auto wa = attention_weights(p);
      const Vec& a = tr.attention;
      // d c / d h_t = a_t I ; d c / d a_t = h_t
      Vec da(steps);
      for (Index t = 0; t < steps; ++t) {
        da[t] = tr.forward.hidden.col(t).dot(d_text.head(h)) +
                tr.backward.hidden.col(t).dot(d_text.tail(h));
      }
      const Scalar mean = a.dot(da);
      const Vec de = (a.array() * (da.array() - mean)).matrix();
      auto gwa = attention_weights(g);
      gwa.topRows(h).noalias() += tr.forward.hidden * de;
      gwa.bottomRows(h).noalias() += tr.backward.hidden * de;
      d_fwd.noalias() += d_text.head(h) * a.transpose();
      d_bwd.noalias() += d_text.tail(h) * a.transpose();
      d_fwd.noalias() += wa.topRows(h) * de.transpose();
      d_bwd.noalias() += wa.bottomRows(h) * de.transpose();
    }

    Mat d_inputs = Mat::Zero(config_.embed_dim, steps);
    backprop_direction(p, g, 0, tr.inputs, tr.forward, d_fwd, d_inputs);
    backprop_direction(p, g, 1, tr.inputs, tr.backward, d_bwd, d_inputs);
    auto gemb = embedding(g);
    for (Index t = 0; t < steps; ++t) {
      if (tr.tokens[t] != 0) gemb.col(tr.tokens[t]) += d_inputs.col(t);
    }

    if (config_.has_audio()) {
      const auto d_audio = d_context.tail(config_.audio_context_dim);
      audio_projection(g).noalias() += d_audio * tr.audio_input.transpose();
      audio_bias(g) += d_audio;
    }
  }

 private:
  struct Direction {
    Index input_weights = 0;
    Index recurrent_weights = 0;
    Index bias = 0;
  };

  template <typename P>
  static auto view(P* base, Index rows, Index cols) {
    using M = std::conditional_t<std::is_const_v<P>, const Mat, Mat>;
    return Eigen::Map<M>(base, rows, cols);
  }

  static Scalar sigmoid(Scalar x) { return Scalar(1) / (Scalar(1) + std::exp(-x)); }

  // dir 0 walks positions 0..T-1, dir 1 walks T-1..0.
  void run_direction(const Scalar* p, int dir, const Mat& inputs, LstmTrace<Scalar>& out) const {
    const int h = config_.hidden_dim;
    const Index steps = inputs.cols();
    const auto wh = recurrent_weights(p, dir);
    out.gates.noalias() = input_weights(p, dir) * inputs;
    out.gates.colwise() += gate_bias(p, dir).col(0);
    out.cell.resize(h, steps);
    out.hidden.resize(h, steps);
    Vec h_prev = Vec::Zero(h), c_prev = Vec::Zero(h);
    Vec z(4 * h);
    for (Index s = 0; s < steps; ++s) {
      const Index t = dir == 0 ? s : steps - 1 - s;
      z.noalias() = out.gates.col(t) + wh * h_prev;
      for (int k = 0; k < h; ++k) {
        z[k] = sigmoid(z[k]);
        z[h + k] = sigmoid(z[h + k]);
        z[2 * h + k] = std::tanh(z[2 * h + k]);
        z[3 * h + k] = sigmoid(z[3 * h + k]);
      }
      out.gates.col(t) = z;
      for (int k = 0; k < h; ++k) {
        const Scalar c = z[h + k] * c_prev[k] + z[k] * z[2 * h + k];
        out.cell(k, t) = c;
        out.hidden(k, t) = z[3 * h + k] * std::tanh(c);
      }
      h_prev = out.hidden.col(t);
      c_prev = out.cell.col(t);
    }
  }

  void backprop_direction(const Scalar* p, Scalar* g, int dir, const Mat& inputs,
                          const LstmTrace<Scalar>& tr, const Mat& d_hidden, Mat& d_inputs) const {
    const int h = config_.hidden_dim;
    const Index steps = inputs.cols();
    const auto wh = recurrent_weights(p, dir);
    Mat d_pre(4 * h, steps);
    Mat prev_hidden = Mat::Zero(h, steps);
    Vec dh_next = Vec::Zero(h), dc_next = Vec::Zero(h);
    for (Index s = steps - 1; s >= 0; --s) {
      const Index t = dir == 0 ? s : steps - 1 - s;
      const bool has_prev = s > 0;
      const Index tp = dir == 0 ? t - 1 : t + 1;
      if (has_prev) prev_hidden.col(t) = tr.hidden.col(tp);
      for (int k = 0; k < h; ++k) {
        const Scalar i = tr.gates(k, t), f = tr.gates(h + k, t);
        const Scalar gg = tr.gates(2 * h + k, t), o = tr.gates(3 * h + k, t);
        const Scalar tc = std::tanh(tr.cell(k, t));
        const Scalar dh = d_hidden(k, t) + dh_next[k];
        const Scalar dc = dh * o * (Scalar(1) - tc * tc) + dc_next[k];
        const Scalar c_prev = has_prev ? tr.cell(k, tp) : Scalar(0);
        d_pre(k, t) = dc * gg * i * (Scalar(1) - i);
        d_pre(h + k, t) = dc * c_prev * f * (Scalar(1) - f);
        d_pre(2 * h + k, t) = dc * i * (Scalar(1) - gg * gg);
        d_pre(3 * h + k, t) = dh * tc * o * (Scalar(1) - o);
        dc_next[k] = dc * f;
      }
      dh_next.noalias() = wh.transpose() * d_pre.col(t);
    }
    input_weights(g, dir).noalias() += d_pre * inputs.transpose();
    recurrent_weights(g, dir).noalias() += d_pre * prev_hidden.transpose();
    gate_bias(g, dir).col(0) += d_pre.rowwise().sum();
    d_inputs.noalias() += input_weights(p, dir).transpose() * d_pre;
  }

  EncoderConfig config_;
  Index embedding_ = 0;
  Direction directions_[2];
  Index attention_ = 0;
  Index audio_weights_ = 0;
  Index audio_bias_ = 0;
  Index size_ = 0;
};

using Encoder = BiLstmEncoder<double>;

// Text-only context vector for one response.
template <typename Scalar>
ContextVector<Scalar> encode_text(const BiLstmEncoder<Scalar>& encoder,
                                  std::span<const Scalar> params,
                                  std::span<const std::int32_t> tokens) {
  require(!encoder.config().has_audio(), "encode_text expects a text-only encoder");
  ContextVector<Scalar> out;
  out.values = encoder.forward(params, tokens, Vector<Scalar>());
  out.slices = encoder.slices();
  return out;
}

}  // namespace speakerctx

#endif  // SPEAKERCTX_ENCODERS_HPP_
