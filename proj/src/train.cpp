#include "lmpn/train.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <set>
#include <sstream>
#include <stdexcept>

#include "lmpn/rng.hpp"

namespace lmpn {

namespace {

void check_disjoint(const RelationDataset& a, const RelationDataset& b) {
  for (const auto& [rel, _] : a.relations) {
    if (b.relations.count(rel)) {
      throw std::runtime_error("train/val relation sets are not disjoint: " + rel);
    }
  }
}

std::vector<std::vector<float>> encode_class(const ModelParams& params,
                                             const std::vector<EncodedInstance>& insts) {
  std::vector<std::vector<float>> out;
  out.reserve(insts.size());
  for (const auto& inst : insts) {
    out.push_back(encode<float>(nullptr, params, inst)->data);
  }
  return out;
}

double episode_accuracy(const ModelParams& params, const EncodedEpisode& ep,
                        EvalMethod method, int knn_k) {
  std::vector<std::vector<std::vector<float>>> support_embs;
  support_embs.reserve(ep.n_way);
  for (int c = 0; c < ep.n_way; ++c) {
    support_embs.push_back(encode_class(params, ep.support[c]));
  }
  const auto protos = compute_prototypes(support_embs);
  long correct = 0, total = 0;
  for (int c = 0; c < ep.n_way; ++c) {
    for (const auto& q : ep.query[c]) {
      const auto emb = encode<float>(nullptr, params, q)->data;
      const int pred = method == EvalMethod::prototype
                           ? classify_query(emb, protos).predicted
                           : knn_predict(support_embs, emb, knn_k);
      correct += (pred == c);
      ++total;
    }
  }
  return total > 0 ? static_cast<double>(correct) / static_cast<double>(total) : 0.0;
}

double run_validation(const ModelParams& params, const Vocab& vocab,
                      const RelationDataset& val_set, const TrainConfig& cfg) {
  EvalOptions opts;
  opts.spec = cfg.train_spec;
  opts.n_episodes = cfg.eval_episodes;
  opts.seed = derive_seed(cfg.seed, streams::kValEpisode);
  const auto accs = evaluate_episode_accuracies(params, vocab, val_set, opts);
  double sum = 0.0;
  for (double a : accs) sum += a;
  return accs.empty() ? 0.0 : 100.0 * sum / static_cast<double>(accs.size());
}

}  // namespace

TrainResult train(const TrainConfig& cfg, const RelationDataset& train_set,
                  const RelationDataset& val_set, const Vocab& vocab,
                  std::ostream* log) {
  cfg.validate();
  check_disjoint(train_set, val_set);

  ModelParams params = init_params<float>(cfg.model, vocab, cfg.seed);
  auto trainable = params.trainable();
  Optimizer<float> opt(cfg.optimizer.kind == "adam" ? OptKind::adam : OptKind::sgd,
                       static_cast<float>(cfg.optimizer.lr),
                       static_cast<float>(cfg.optimizer.weight_decay));

  const int pad_row = params.pad_id;
  const int d_word = params.cfg.d_word;

  TrainResult result;
  std::vector<TensorBlob> best;
  double best_acc = -1.0;
  long best_episode = 0;

  for (long ep_i = 0; ep_i < cfg.train_episodes; ++ep_i) {
    if (cfg.optimizer.lr_decay_every > 0) {
      const double decays = static_cast<double>(ep_i / cfg.optimizer.lr_decay_every);
      opt.set_lr(static_cast<float>(cfg.optimizer.lr *
                                    std::pow(cfg.optimizer.lr_decay_factor, decays)));
    }
    const std::uint64_t ep_seed = derive_seed(cfg.seed, streams::kTrainEpisode,
                                              static_cast<std::uint64_t>(ep_i));
    std::mt19937_64 rng(ep_seed);
    const Episode raw = sample_episode(train_set, cfg.train_spec, rng);
    const EncodedEpisode ep = encode_episode(vocab, raw, cfg.model.max_rel);

    Tape<float> tape;
    LossConfig lc = cfg.loss_cfg;
    if (cfg.loss == LossMode::softmax_only) lc.lambda = 0.0;
    Tensor<float> loss = combined_loss(&tape, params, ep, lc);
    const double loss_val = static_cast<double>(loss->data[0]);
    if (!std::isfinite(loss_val)) {
      std::ostringstream msg;
      msg << "non-finite loss " << loss_val << " at episode " << ep_i
          << " (episode seed " << ep_seed << ", gamma " << lc.gamma << ", lambda "
          << lc.lambda << ")";
      throw std::runtime_error(msg.str());
    }
    tape.backward(loss);
    // PAD embedding row stays frozen at zero
    std::fill(params.word_emb->grad.begin() + static_cast<std::size_t>(pad_row) * d_word,
              params.word_emb->grad.begin() + static_cast<std::size_t>(pad_row + 1) * d_word,
              0.0f);
    opt.step(trainable);

    const bool interval_end = (ep_i + 1) % cfg.eval_every == 0;
    const bool last = ep_i + 1 == cfg.train_episodes;
    if (interval_end || last) {
      const double val_acc = run_validation(params, vocab, val_set, cfg);
      result.history.push_back({ep_i + 1, loss_val, val_acc});
      if (log) {
        (*log) << (ep_i + 1) << '\t' << loss_val << '\t' << val_acc << '\n';
        log->flush();
      }
      if (val_acc > best_acc) {
        best_acc = val_acc;
        best_episode = ep_i + 1;
        best.clear();
        for (const auto& [name, t] : params.named()) {
          best.push_back({name, t->shape, t->data});
        }
      }
    }
  }

  // Restore the best parameters into `params` and snapshot them.
  for (const auto& [name, t] : params.named()) {
    for (const auto& b : best) {
      if (b.name == name) {
        t->data = b.data;
        break;
      }
    }
  }
  result.best_val_acc_pct = best_acc;
  result.checkpoint = make_checkpoint(cfg, vocab, params, best_episode, best_acc);
  return result;
}

std::vector<double> evaluate_episode_accuracies(const ModelParams& params,
                                                const Vocab& vocab,
                                                const RelationDataset& dataset,
                                                const EvalOptions& opts) {
  if (opts.n_episodes < 1) throw std::invalid_argument("evaluate: n_episodes must be >= 1");
  std::vector<double> accs;
  accs.reserve(static_cast<std::size_t>(opts.n_episodes));
  for (long i = 0; i < opts.n_episodes; ++i) {
    std::mt19937_64 rng = stream_rng(opts.seed, streams::kEvalEpisode,
                                     static_cast<std::uint64_t>(i));
    const Episode raw = sample_episode(dataset, opts.spec, rng);
    const EncodedEpisode ep = encode_episode(vocab, raw, params.cfg.max_rel);
    accs.push_back(episode_accuracy(params, ep, opts.method, opts.spec.k_shot));
  }
  return accs;
}

EvalReport evaluate(const ModelParams& params, const Vocab& vocab,
                    const RelationDataset& dataset, const EvalOptions& opts) {
  const auto accs = evaluate_episode_accuracies(params, vocab, dataset, opts);
  const long n = static_cast<long>(accs.size());
  double mean = 0.0;
  for (double a : accs) mean += a;
  mean /= static_cast<double>(n);
  double half_width = 0.0;
  if (n > 1) {
    double ss = 0.0;
    for (double a : accs) ss += (a - mean) * (a - mean);
    const double stdev = std::sqrt(ss / static_cast<double>(n - 1));
    half_width = 1.96 * stdev / std::sqrt(static_cast<double>(n));
  }
  EvalReport rep;
  rep.model = opts.model_name;
  rep.n_way = opts.spec.n_way;
  rep.k_shot = opts.spec.k_shot;
  rep.n_episodes = n;
  rep.mean_acc_pct = 100.0 * mean;
  rep.half_width_pct = 100.0 * half_width;
  rep.seed = opts.seed;
  return rep;
}

std::string eval_reports_csv(const std::vector<EvalReport>& reports) {
  std::ostringstream out;
  out << "model,setting,n_episodes,accuracy,ci95,seed\n";
  out << std::fixed << std::setprecision(4);
  for (const auto& r : reports) {
    out << r.model << ',' << r.setting() << ',' << r.n_episodes << ','
        << r.mean_acc_pct << ',' << r.half_width_pct << ',' << r.seed << '\n';
  }
  return out.str();
}

std::vector<EvalReport> run_ablation(const TrainConfig& base_cfg,
                                     const RelationDataset& train_set,
                                     const RelationDataset& val_set,
                                     const RelationDataset& holdout,
                                     const Vocab& vocab, long eval_episodes,
                                     std::ostream* log) {
  struct Variant {
    const char* name;
    EncoderMode encoder;
    LossMode loss;
  };
  const Variant grid[4] = {
      {"ProtoNet (CNN)", EncoderMode::cnn, LossMode::softmax_only},
      {"ProtoNet (FGF)", EncoderMode::fgf, LossMode::softmax_only},
      {"LM-ProtoNet (CNN)", EncoderMode::cnn, LossMode::softmax_triplet},
      {"LM-ProtoNet (FGF)", EncoderMode::fgf, LossMode::softmax_triplet},
  };
  const EpisodeSpec settings[4] = {{5, 1, 5}, {5, 5, 5}, {10, 1, 5}, {10, 5, 5}};

  std::vector<EvalReport> reports;
  for (const auto& v : grid) {
    TrainConfig cfg = base_cfg;
    cfg.model.encoder = v.encoder;
    cfg.loss = v.loss;
    if (log) (*log) << "# training " << v.name << '\n';
    TrainResult res = train(cfg, train_set, val_set, vocab, log);
    RestoredModel model = restore_model(res.checkpoint);
    for (const auto& spec : settings) {
      if (static_cast<int>(holdout.relations.size()) < spec.n_way) {
        if (log) {
          (*log) << "# skipping " << spec.n_way << "w" << spec.k_shot
                 << "s: holdout has only " << holdout.relations.size()
                 << " relations\n";
        }
        continue;
      }
      EvalOptions opts;
      opts.spec = spec;
      opts.n_episodes = eval_episodes;
      opts.seed = derive_seed(cfg.seed, streams::kEvalEpisode);
      opts.model_name = v.name;
      reports.push_back(evaluate(model.params, model.vocab, holdout, opts));
    }
  }
  return reports;
}

}  // namespace lmpn
