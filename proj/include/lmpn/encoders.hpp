#pragma once

// Sentence-level CNN encoder, five-phrase encoder, and their fine-grained
// concatenation. Templated on scalar type: float for training, double for
// the finite-difference harness.

#include <cmath>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "lmpn/config.hpp"
#include "lmpn/data.hpp"
#include "lmpn/rng.hpp"
#include "lmpn/tensor.hpp"

namespace lmpn {

template <typename T>
struct ModelParamsT {
  ModelConfig cfg;
  int pad_id = 0;

  Tensor<T> word_emb;                    // V x d_word, PAD row frozen at zero
  Tensor<T> pos_head_emb, pos_tail_emb;  // (2*max_rel+1) x d_pos
  Tensor<T> sent_kernel, sent_bias;      // {w, d_word+2*d_pos, F}, {F}
  std::vector<Tensor<T>> phrase_kernels; // empty (cnn/tied), 1 (shared), or 5
  std::vector<Tensor<T>> phrase_biases;
  Tensor<T> fc_weight, fc_bias;          // {5*F_p, H}, {H}

  std::vector<std::pair<std::string, Tensor<T>>> named() const {
    std::vector<std::pair<std::string, Tensor<T>>> out;
    out.emplace_back("word_emb", word_emb);
    out.emplace_back("pos_head_emb", pos_head_emb);
    out.emplace_back("pos_tail_emb", pos_tail_emb);
    out.emplace_back("sent_conv_kernel", sent_kernel);
    out.emplace_back("sent_conv_bias", sent_bias);
    for (std::size_t i = 0; i < phrase_kernels.size(); ++i) {
      out.emplace_back("phrase_conv_kernel_" + std::to_string(i), phrase_kernels[i]);
      out.emplace_back("phrase_conv_bias_" + std::to_string(i), phrase_biases[i]);
    }
    if (fc_weight) {
      out.emplace_back("phrase_fc_weight", fc_weight);
      out.emplace_back("phrase_fc_bias", fc_bias);
    }
    return out;
  }

  std::vector<Tensor<T>> trainable() const {
    std::vector<Tensor<T>> out;
    for (auto& [_, t] : named()) out.push_back(t);
    return out;
  }
};

namespace detail {

template <typename T>
Tensor<T> glorot(std::vector<int> shape, int fan_in, int fan_out,
                 std::mt19937_64& rng) {
  const double limit = std::sqrt(6.0 / (fan_in + fan_out));
  std::uniform_real_distribution<double> unif(-limit, limit);
  std::vector<T> data(numel(shape));
  for (auto& v : data) v = static_cast<T>(unif(rng));
  return make_tensor<T>(std::move(shape), std::move(data), true);
}

template <typename T>
Tensor<T> uniform_table(std::vector<int> shape, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> unif(-0.25, 0.25);
  std::vector<T> data(numel(shape));
  for (auto& v : data) v = static_cast<T>(unif(rng));
  return make_tensor<T>(std::move(shape), std::move(data), true);
}

}  // namespace detail

template <typename T>
ModelParamsT<T> init_params(const ModelConfig& cfg, const Vocab& vocab,
                            std::uint64_t seed) {
  cfg.validate();
  if (vocab.dim != cfg.d_word) {
    throw std::invalid_argument("init_params: vocab dimension " +
                                std::to_string(vocab.dim) + " != configured d_word " +
                                std::to_string(cfg.d_word));
  }
  ModelParamsT<T> p;
  p.cfg = cfg;
  p.pad_id = vocab.pad_id();

  std::vector<T> emb(vocab.embedding.begin(), vocab.embedding.end());
  p.word_emb = make_tensor<T>({vocab.size(), cfg.d_word}, std::move(emb), true);

  auto rng = stream_rng(seed, streams::kParamsInit);
  const int pos_rows = 2 * cfg.max_rel + 1;
  p.pos_head_emb = detail::uniform_table<T>({pos_rows, cfg.d_pos}, rng);
  p.pos_tail_emb = detail::uniform_table<T>({pos_rows, cfg.d_pos}, rng);

  const int din = cfg.sentence_in_dim();
  p.sent_kernel = detail::glorot<T>({cfg.window, din, cfg.filters},
                                    cfg.window * din, cfg.filters, rng);
  p.sent_bias = zeros<T>({cfg.filters}, true);

  if (cfg.encoder == EncoderMode::fgf) {
    if (!cfg.tie_phrase_conv) {
      const int n_convs = cfg.phrase_cnn == PhraseCnnMode::shared ? 1 : 5;
      const int pdin = cfg.phrase_in_dim();
      for (int i = 0; i < n_convs; ++i) {
        p.phrase_kernels.push_back(detail::glorot<T>(
            {cfg.phrase_window, pdin, cfg.phrase_filters},
            cfg.phrase_window * pdin, cfg.phrase_filters, rng));
        p.phrase_biases.push_back(zeros<T>({cfg.phrase_filters}, true));
      }
    }
    p.fc_weight = detail::glorot<T>({5 * cfg.phrase_filters, cfg.phrase_hidden},
                                    5 * cfg.phrase_filters, cfg.phrase_hidden, rng);
    p.fc_bias = zeros<T>({cfg.phrase_hidden}, true);
  }
  return p;
}

namespace detail {

// Pad ids (and matching position indices) so the sequence is at least
// `window` long; appended PADs continue the clipped position ramp.
inline void pad_to_window(std::vector<int>& ids, std::vector<int>& hpos,
                          std::vector<int>& tpos, int window, int pad_id,
                          int max_rel) {
  while (static_cast<int>(ids.size()) < window) {
    ids.push_back(pad_id);
    hpos.push_back(std::min(hpos.empty() ? max_rel : hpos.back() + 1, 2 * max_rel));
    tpos.push_back(std::min(tpos.empty() ? max_rel : tpos.back() + 1, 2 * max_rel));
  }
}

template <typename T>
Tensor<T> embed_rows(Tape<T>* tape, const ModelParamsT<T>& p,
                     const std::vector<int>& ids, const std::vector<int>& hpos,
                     const std::vector<int>& tpos, bool with_positions) {
  auto words = gather_rows(tape, p.word_emb, ids);
  if (!with_positions) return words;
  auto ph = gather_rows(tape, p.pos_head_emb, hpos);
  auto pt = gather_rows(tape, p.pos_tail_emb, tpos);
  return hconcat(tape, {words, ph, pt});
}

template <typename T>
Tensor<T> conv_encode(Tape<T>* tape, const Tensor<T>& rows, const Tensor<T>& kernel,
                      const Tensor<T>& bias) {
  return maxpool_over_time(tape, relu(tape, conv1d(tape, rows, kernel, bias)));
}

}  // namespace detail

// f_sentence: word+position embeddings -> conv -> ReLU -> max-over-time.
template <typename T>
Tensor<T> encode_sentence(Tape<T>* tape, const ModelParamsT<T>& p,
                          const EncodedInstance& inst) {
  std::vector<int> ids = inst.token_ids;
  std::vector<int> hpos = inst.positions.head_idx;
  std::vector<int> tpos = inst.positions.tail_idx;
  if (ids.empty()) throw std::invalid_argument("encode_sentence: empty instance");
  detail::pad_to_window(ids, hpos, tpos, p.cfg.window, p.pad_id, p.cfg.max_rel);
  auto rows = detail::embed_rows(tape, p, ids, hpos, tpos, true);
  return detail::conv_encode(tape, rows, p.sent_kernel, p.sent_bias);
}

// f_phrase: each of the five segments through the phrase CNN, concatenated
// in the fixed order r_f, e_h, r_m, e_t, r_b, then a ReLU fully connected
// layer.
template <typename T>
Tensor<T> encode_phrase(Tape<T>* tape, const ModelParamsT<T>& p,
                        const EncodedInstance& inst) {
  if (p.cfg.encoder != EncoderMode::fgf) {
    throw std::logic_error("encode_phrase: model configured without a phrase branch");
  }
  std::vector<Tensor<T>> pooled;
  pooled.reserve(5);
  for (int s = 0; s < 5; ++s) {
    std::vector<int> ids = inst.segments.ids[s];
    std::vector<int> hpos = inst.seg_head_idx[s];
    std::vector<int> tpos = inst.seg_tail_idx[s];
    detail::pad_to_window(ids, hpos, tpos, p.cfg.phrase_window, p.pad_id,
                          p.cfg.max_rel);
    auto rows = detail::embed_rows(tape, p, ids, hpos, tpos, p.cfg.phrase_positions);
    const Tensor<T>& kernel =
        p.cfg.tie_phrase_conv
            ? p.sent_kernel
            : p.phrase_kernels[p.cfg.phrase_cnn == PhraseCnnMode::shared ? 0 : s];
    const Tensor<T>& bias =
        p.cfg.tie_phrase_conv
            ? p.sent_bias
            : p.phrase_biases[p.cfg.phrase_cnn == PhraseCnnMode::shared ? 0 : s];
    pooled.push_back(detail::conv_encode(tape, rows, kernel, bias));
  }
  auto cat = concat(tape, pooled);
  return relu(tape, linear(tape, cat, p.fc_weight, p.fc_bias));
}

// f(x) = f_sentence(x) (+) f_phrase(x) in fgf mode; sentence only in cnn mode.
template <typename T>
Tensor<T> encode(Tape<T>* tape, const ModelParamsT<T>& p, const EncodedInstance& inst) {
  auto sent = encode_sentence(tape, p, inst);
  if (p.cfg.encoder == EncoderMode::cnn) return sent;
  auto phrase = encode_phrase(tape, p, inst);
  return concat(tape, {sent, phrase});
}

using ModelParams = ModelParamsT<float>;

}  // namespace lmpn
