#pragma once

// Episodic machinery: N-way-K-shot sampling, prototypes, distance-softmax
// classification, prototype-anchored triplet loss, and the combined
// objective.

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "lmpn/config.hpp"
#include "lmpn/data.hpp"
#include "lmpn/encoders.hpp"
#include "lmpn/tensor.hpp"

namespace lmpn {

struct Episode {
  std::vector<std::string> class_ids;                   // local index -> relation id
  std::vector<std::vector<TokenizedInstance>> support;  // N x K
  std::vector<std::vector<TokenizedInstance>> query;    // N x Q
  std::vector<std::vector<int>> support_idx;            // dataset indices, per class
  std::vector<std::vector<int>> query_idx;
};

struct EncodedEpisode {
  int n_way = 0, k_shot = 0, n_query = 0;
  std::vector<std::string> class_ids;
  std::vector<std::vector<EncodedInstance>> support;
  std::vector<std::vector<EncodedInstance>> query;
};

// Uniform choice of N relations without replacement, then K+Q distinct
// instances per relation (first K to support). Deterministic per rng state.
Episode sample_episode(const RelationDataset& dataset, const EpisodeSpec& spec,
                       std::mt19937_64& rng);

EncodedEpisode encode_episode(const Vocab& vocab, const Episode& ep, int max_rel);

// Plain (non-differentiable) helpers used at evaluation time. Distances are
// accumulated in double so reference oracles can match exactly.
std::vector<std::vector<float>> compute_prototypes(
    const std::vector<std::vector<std::vector<float>>>& support_embs);

struct Classification {
  std::vector<double> logits;  // -squared_euclidean per class
  int predicted = 0;           // argmax, ties to lowest index
};
Classification classify_query(const std::vector<float>& query_emb,
                               const std::vector<std::vector<float>>& prototypes);

std::vector<double> softmax_probs(const std::vector<double>& logits);

// Majority vote among the k nearest supports; ties by smaller mean distance,
// then lower class index.
int knn_predict(const std::vector<std::vector<std::vector<float>>>& support_embs,
                const std::vector<float>& query_emb, int k);

// ---- differentiable episode losses -------------------------------------

template <typename T>
struct EpisodeEmbeddings {
  std::vector<std::vector<Tensor<T>>> query;  // N x Q
  std::vector<Tensor<T>> prototypes;          // N
};

template <typename T>
EpisodeEmbeddings<T> embed_episode(Tape<T>* tape, const ModelParamsT<T>& params,
                                   const EncodedEpisode& ep) {
  EpisodeEmbeddings<T> out;
  out.prototypes.reserve(ep.n_way);
  for (int c = 0; c < ep.n_way; ++c) {
    std::vector<Tensor<T>> sup;
    sup.reserve(ep.k_shot);
    for (const auto& inst : ep.support[c]) sup.push_back(encode(tape, params, inst));
    out.prototypes.push_back(mean_stack(tape, sup));
  }
  out.query.resize(ep.n_way);
  for (int c = 0; c < ep.n_way; ++c) {
    for (const auto& inst : ep.query[c]) {
      out.query[c].push_back(encode(tape, params, inst));
    }
  }
  return out;
}

template <typename T>
Tensor<T> softmax_loss_from(Tape<T>* tape, const EpisodeEmbeddings<T>& emb) {
  std::vector<Tensor<T>> losses;
  const int n_way = static_cast<int>(emb.prototypes.size());
  for (int c = 0; c < n_way; ++c) {
    for (const auto& q : emb.query[c]) {
      std::vector<Tensor<T>> logit_parts;
      logit_parts.reserve(n_way);
      for (int k = 0; k < n_way; ++k) {
        logit_parts.push_back(scale(tape, squared_euclidean(tape, q, emb.prototypes[k]),
                                    T(-1)));
      }
      losses.push_back(log_softmax_xent(tape, concat(tape, logit_parts), c));
    }
  }
  if (losses.empty()) throw std::invalid_argument("softmax loss: episode has no queries");
  return mean_stack(tape, losses);
}

// Anchors are class prototypes, positives are same-class queries, negatives
// are other-class queries. all_pairs averages every (anchor, positive,
// negative) hinge; semi_hard keeps only the hardest negative per positive.
template <typename T>
Tensor<T> triplet_loss_from(Tape<T>* tape, const EpisodeEmbeddings<T>& emb, T gamma,
                            TripletPolicy policy) {
  if (gamma < T(0)) throw std::invalid_argument("triplet loss: gamma must be >= 0");
  const int n_way = static_cast<int>(emb.prototypes.size());
  // dist[c][x]: distance from prototype c to flattened query x, computed once
  std::vector<Tensor<T>> flat_query;
  std::vector<int> flat_label;
  for (int c = 0; c < n_way; ++c) {
    for (const auto& q : emb.query[c]) {
      flat_query.push_back(q);
      flat_label.push_back(c);
    }
  }
  const int nq = static_cast<int>(flat_query.size());
  std::vector<std::vector<Tensor<T>>> dist(n_way, std::vector<Tensor<T>>(nq));
  for (int c = 0; c < n_way; ++c) {
    for (int x = 0; x < nq; ++x) {
      dist[c][x] = squared_euclidean(tape, emb.prototypes[c], flat_query[x]);
    }
  }
  std::vector<Tensor<T>> hinges;
  for (int c = 0; c < n_way; ++c) {
    for (int p = 0; p < nq; ++p) {
      if (flat_label[p] != c) continue;
      if (policy == TripletPolicy::all_pairs) {
        for (int n = 0; n < nq; ++n) {
          if (flat_label[n] == c) continue;
          hinges.push_back(relu(
              tape, add_const(tape, sub(tape, dist[c][p], dist[c][n]), gamma)));
        }
      } else {
        int hardest = -1;
        for (int n = 0; n < nq; ++n) {
          if (flat_label[n] == c) continue;
          if (hardest < 0 || dist[c][n]->data[0] < dist[c][hardest]->data[0]) {
            hardest = n;
          }
        }
        if (hardest >= 0) {
          hinges.push_back(relu(
              tape, add_const(tape, sub(tape, dist[c][p], dist[c][hardest]), gamma)));
        }
      }
    }
  }
  if (hinges.empty()) throw std::invalid_argument("triplet loss: no triplets in episode");
  return mean_stack(tape, hinges);
}

template <typename T>
Tensor<T> episode_softmax_loss(Tape<T>* tape, const ModelParamsT<T>& params,
                               const EncodedEpisode& ep) {
  auto emb = embed_episode(tape, params, ep);
  return softmax_loss_from(tape, emb);
}

template <typename T>
Tensor<T> episode_triplet_loss(Tape<T>* tape, const ModelParamsT<T>& params,
                               const EncodedEpisode& ep, T gamma,
                               TripletPolicy policy) {
  auto emb = embed_episode(tape, params, ep);
  return triplet_loss_from(tape, emb, gamma, policy);
}

// L = L_softmax + lambda * L_triplet; lambda == 0 skips the triplet branch
// entirely so the result is bitwise equal to the softmax loss.
template <typename T>
Tensor<T> combined_loss(Tape<T>* tape, const ModelParamsT<T>& params,
                        const EncodedEpisode& ep, const LossConfig& cfg) {
  auto emb = embed_episode(tape, params, ep);
  auto soft = softmax_loss_from(tape, emb);
  if (cfg.lambda == 0.0) return soft;
  auto trip = triplet_loss_from(tape, emb, static_cast<T>(cfg.gamma), cfg.policy);
  return add(tape, soft, scale(tape, trip, static_cast<T>(cfg.lambda)));
}

}  // namespace lmpn
