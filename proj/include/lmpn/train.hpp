#pragma once

// Episodic training with validation-based model selection, seeded
// evaluation with confidence intervals, and the four-variant ablation grid.

#include <cstdint>
#include <ostream>
#include <string>
#include <vector>

#include "lmpn/checkpoint.hpp"
#include "lmpn/config.hpp"
#include "lmpn/data.hpp"
#include "lmpn/encoders.hpp"
#include "lmpn/fewshot.hpp"

namespace lmpn {

struct TrainProgress {
  long episode = 0;
  double loss = 0.0;
  double val_acc_pct = 0.0;
};

struct TrainResult {
  Checkpoint checkpoint;
  std::vector<TrainProgress> history;
  double best_val_acc_pct = 0.0;
};

// Runs cfg.train_episodes episodes of sample -> encode -> combined loss ->
// backward -> optimizer step, evaluating on val_set every cfg.eval_every
// episodes and keeping the best parameters. `log`, when given, receives
// tab-separated `episode\tloss\tval_acc` lines per interval.
TrainResult train(const TrainConfig& cfg, const RelationDataset& train_set,
                  const RelationDataset& val_set, const Vocab& vocab,
                  std::ostream* log = nullptr);

struct EvalReport {
  std::string model;
  int n_way = 0, k_shot = 0;
  long n_episodes = 0;
  double mean_acc_pct = 0.0;
  double half_width_pct = 0.0;  // 1.96 * stdev / sqrt(n), 0 for n == 1
  std::uint64_t seed = 0;

  std::string setting() const {
    return std::to_string(n_way) + "w" + std::to_string(k_shot) + "s";
  }
};

enum class EvalMethod { prototype, knn };

struct EvalOptions {
  EpisodeSpec spec;
  long n_episodes = 10000;
  std::uint64_t seed = 0;
  EvalMethod method = EvalMethod::prototype;
  std::string model_name = "model";
};

EvalReport evaluate(const ModelParams& params, const Vocab& vocab,
                    const RelationDataset& dataset, const EvalOptions& opts);

// Per-episode accuracies for the same seeded stream (evaluate() aggregates
// these; exposed for order-independence checks).
std::vector<double> evaluate_episode_accuracies(const ModelParams& params,
                                                const Vocab& vocab,
                                                const RelationDataset& dataset,
                                                const EvalOptions& opts);

std::string eval_reports_csv(const std::vector<EvalReport>& reports);

// Trains {ProtoNet, LM-ProtoNet} x {CNN, FGF} with identical seeds and
// budgets and evaluates each on the holdout at the four standard settings.
std::vector<EvalReport> run_ablation(const TrainConfig& base_cfg,
                                     const RelationDataset& train_set,
                                     const RelationDataset& val_set,
                                     const RelationDataset& holdout,
                                     const Vocab& vocab, long eval_episodes,
                                     std::ostream* log = nullptr);

}  // namespace lmpn
