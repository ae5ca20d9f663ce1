#include "lmpn/fewshot.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>

namespace lmpn {

namespace {

double sq_dist(const std::vector<float>& a, const std::vector<float>& b) {
  if (a.size() != b.size()) {
    throw std::invalid_argument("squared distance: dimension mismatch");
  }
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = static_cast<double>(a[i]) - static_cast<double>(b[i]);
    acc += d * d;
  }
  return acc;
}

}  // namespace

Episode sample_episode(const RelationDataset& dataset, const EpisodeSpec& spec,
                       std::mt19937_64& rng) {
  if (spec.n_way < 2 || spec.k_shot < 1 || spec.n_query < 0) {
    throw std::invalid_argument("sample_episode: invalid episode spec");
  }
  const auto ids = dataset.relation_ids();
  const int n_rel = static_cast<int>(ids.size());
  if (n_rel < spec.n_way) {
    throw std::runtime_error("sample_episode: dataset has " + std::to_string(n_rel) +
                             " relations, need " + std::to_string(spec.n_way));
  }
  std::vector<int> order(n_rel);
  for (int i = 0; i < n_rel; ++i) order[i] = i;
  for (int i = 0; i < spec.n_way; ++i) {
    std::uniform_int_distribution<int> pick(i, n_rel - 1);
    std::swap(order[i], order[pick(rng)]);
  }

  Episode ep;
  const int need = spec.k_shot + spec.n_query;
  for (int c = 0; c < spec.n_way; ++c) {
    const std::string& rel = ids[order[c]];
    const auto& insts = dataset.relations.at(rel);
    const int m = static_cast<int>(insts.size());
    if (m < need) {
      throw std::runtime_error("sample_episode: relation " + rel + " has " +
                               std::to_string(m) + " instances, need " +
                               std::to_string(need));
    }
    std::vector<int> idx(m);
    for (int i = 0; i < m; ++i) idx[i] = i;
    for (int i = 0; i < need; ++i) {
      std::uniform_int_distribution<int> pick(i, m - 1);
      std::swap(idx[i], idx[pick(rng)]);
    }
    ep.class_ids.push_back(rel);
    std::vector<TokenizedInstance> sup, qry;
    std::vector<int> sup_idx, qry_idx;
    for (int i = 0; i < spec.k_shot; ++i) {
      sup.push_back(insts[idx[i]]);
      sup_idx.push_back(idx[i]);
    }
    for (int i = spec.k_shot; i < need; ++i) {
      qry.push_back(insts[idx[i]]);
      qry_idx.push_back(idx[i]);
    }
    ep.support.push_back(std::move(sup));
    ep.query.push_back(std::move(qry));
    ep.support_idx.push_back(std::move(sup_idx));
    ep.query_idx.push_back(std::move(qry_idx));
  }
  return ep;
}

EncodedEpisode encode_episode(const Vocab& vocab, const Episode& ep, int max_rel) {
  EncodedEpisode out;
  out.n_way = static_cast<int>(ep.class_ids.size());
  out.k_shot = out.n_way > 0 ? static_cast<int>(ep.support[0].size()) : 0;
  out.n_query = out.n_way > 0 ? static_cast<int>(ep.query[0].size()) : 0;
  out.class_ids = ep.class_ids;
  out.support.resize(out.n_way);
  out.query.resize(out.n_way);
  for (int c = 0; c < out.n_way; ++c) {
    for (const auto& inst : ep.support[c]) {
      out.support[c].push_back(encode_instance(vocab, inst, max_rel));
    }
    for (const auto& inst : ep.query[c]) {
      out.query[c].push_back(encode_instance(vocab, inst, max_rel));
    }
  }
  return out;
}

std::vector<std::vector<float>> compute_prototypes(
    const std::vector<std::vector<std::vector<float>>>& support_embs) {
  std::vector<std::vector<float>> protos;
  protos.reserve(support_embs.size());
  for (const auto& cls : support_embs) {
    if (cls.empty()) throw std::invalid_argument("compute_prototypes: empty class");
    std::vector<double> acc(cls[0].size(), 0.0);
    for (const auto& e : cls) {
      for (std::size_t d = 0; d < acc.size(); ++d) acc[d] += e[d];
    }
    std::vector<float> mean(acc.size());
    for (std::size_t d = 0; d < acc.size(); ++d) {
      mean[d] = static_cast<float>(acc[d] / static_cast<double>(cls.size()));
    }
    protos.push_back(std::move(mean));
  }
  return protos;
}

Classification classify_query(const std::vector<float>& query_emb,
                               const std::vector<std::vector<float>>& prototypes) {
  if (prototypes.empty()) throw std::invalid_argument("classify_query: no prototypes");
  Classification out;
  out.logits.reserve(prototypes.size());
  for (const auto& p : prototypes) out.logits.push_back(-sq_dist(query_emb, p));
  out.predicted = 0;
  for (std::size_t k = 1; k < out.logits.size(); ++k) {
    if (out.logits[k] > out.logits[out.predicted]) out.predicted = static_cast<int>(k);
  }
  return out;
}

std::vector<double> softmax_probs(const std::vector<double>& logits) {
  double m = logits[0];
  for (double v : logits) m = std::max(m, v);
  std::vector<double> p(logits.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    p[i] = std::exp(logits[i] - m);
    sum += p[i];
  }
  for (double& v : p) v /= sum;
  return p;
}

int knn_predict(const std::vector<std::vector<std::vector<float>>>& support_embs,
                const std::vector<float>& query_emb, int k) {
  int total = 0;
  for (const auto& cls : support_embs) total += static_cast<int>(cls.size());
  if (k < 1 || k > total) {
    throw std::invalid_argument("knn_predict: k out of range [1, " +
                                std::to_string(total) + "]");
  }
  struct Neighbor {
    double dist;
    int cls;
    int flat;
  };
  std::vector<Neighbor> nbrs;
  nbrs.reserve(total);
  int flat = 0;
  for (std::size_t c = 0; c < support_embs.size(); ++c) {
    for (const auto& e : support_embs[c]) {
      nbrs.push_back({sq_dist(query_emb, e), static_cast<int>(c), flat++});
    }
  }
  std::sort(nbrs.begin(), nbrs.end(), [](const Neighbor& a, const Neighbor& b) {
    if (a.dist != b.dist) return a.dist < b.dist;
    return a.flat < b.flat;
  });
  std::map<int, std::pair<int, double>> votes;  // class -> (count, dist sum)
  for (int i = 0; i < k; ++i) {
    auto& v = votes[nbrs[i].cls];
    v.first += 1;
    v.second += nbrs[i].dist;
  }
  int best_cls = -1;
  int best_count = -1;
  double best_mean = 0.0;
  for (const auto& [cls, v] : votes) {
    const double mean = v.second / v.first;
    if (v.first > best_count ||
        (v.first == best_count && (mean < best_mean ||
                                   (mean == best_mean && cls < best_cls)))) {
      best_cls = cls;
      best_count = v.first;
      best_mean = mean;
    }
  }
  return best_cls;
}

}  // namespace lmpn
