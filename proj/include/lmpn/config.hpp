#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace lmpn {

struct EpisodeSpec {
  int n_way = 5;
  int k_shot = 1;
  int n_query = 5;
};

enum class TripletPolicy { all_pairs, semi_hard };

struct LossConfig {
  double gamma = 5.0;   // triplet margin, squared-distance space
  double lambda = 1.0;  // triplet trade-off
  TripletPolicy policy = TripletPolicy::all_pairs;
};

enum class EncoderMode { cnn, fgf };
enum class PhraseCnnMode { shared, per_segment };

struct ModelConfig {
  EncoderMode encoder = EncoderMode::fgf;
  int d_word = 50;
  int d_pos = 5;
  int max_rel = 128;
  int max_len = 128;
  int filters = 230;        // F, sentence conv
  int window = 3;           // w
  int phrase_filters = 100; // F_p
  int phrase_window = 3;    // w_p
  int phrase_hidden = 200;  // H
  PhraseCnnMode phrase_cnn = PhraseCnnMode::shared;
  bool phrase_positions = false;   // position features in the phrase branch
  bool tie_phrase_conv = false;    // reuse the sentence conv for phrases

  int embedding_dim() const {
    return encoder == EncoderMode::cnn ? filters : filters + phrase_hidden;
  }
  int sentence_in_dim() const { return d_word + 2 * d_pos; }
  int phrase_in_dim() const {
    return phrase_positions ? d_word + 2 * d_pos : d_word;
  }
  void validate() const {
    if (d_word < 1 || filters < 1 || window < 1 || max_rel < 1 || max_len < 2) {
      throw std::invalid_argument("model config: dimensions must be positive");
    }
    if (encoder == EncoderMode::fgf &&
        (phrase_filters < 1 || phrase_window < 1 || phrase_hidden < 1)) {
      throw std::invalid_argument("model config: phrase dimensions must be positive");
    }
    if (tie_phrase_conv && !phrase_positions) {
      throw std::invalid_argument(
          "model config: tie_phrase_conv requires phrase_positions (input dims must match)");
    }
    if (tie_phrase_conv && phrase_cnn == PhraseCnnMode::per_segment) {
      throw std::invalid_argument(
          "model config: tie_phrase_conv is incompatible with per-segment phrase CNNs");
    }
    if (tie_phrase_conv && (phrase_window != window || phrase_filters != filters)) {
      throw std::invalid_argument(
          "model config: tied phrase conv requires matching window and filter count");
    }
  }
};

struct OptimizerConfig {
  std::string kind = "sgd";  // sgd | adam
  double lr = 0.1;
  double weight_decay = 1e-5;
  long lr_decay_every = 20000;  // episodes; 0 disables
  double lr_decay_factor = 0.1;
};

enum class LossMode { softmax_only, softmax_triplet };

struct TrainConfig {
  ModelConfig model;
  LossMode loss = LossMode::softmax_triplet;
  EpisodeSpec train_spec{10, 5, 5};
  long train_episodes = 30000;
  long eval_every = 2000;
  long eval_episodes = 1000;  // validation stream per interval
  OptimizerConfig optimizer;
  LossConfig loss_cfg;
  std::string vectors_path;  // pretrained word vectors, optional
  std::uint64_t seed = 42;

  void validate() const {
    model.validate();
    if (train_episodes < 1) throw std::invalid_argument("train config: train_episodes must be >= 1");
    if (eval_every < 1 || eval_every > train_episodes) {
      throw std::invalid_argument("train config: eval_every must be in [1, train_episodes]");
    }
    if (train_spec.n_way < 2 || train_spec.k_shot < 1 || train_spec.n_query < 1) {
      throw std::invalid_argument("train config: invalid episode spec");
    }
    if (loss_cfg.gamma < 0 || loss_cfg.lambda < 0) {
      throw std::invalid_argument("train config: gamma and lambda must be non-negative");
    }
    if (optimizer.kind != "sgd" && optimizer.kind != "adam") {
      throw std::invalid_argument("train config: optimizer kind must be sgd or adam");
    }
  }
};

// JSON round-trip (strict: unknown keys are errors). Implemented in config.cpp.
TrainConfig parse_train_config(const std::string& json_text);
std::string train_config_to_json(const TrainConfig& cfg);
TrainConfig load_train_config_file(const std::string& path);

std::string to_string(EncoderMode m);
std::string to_string(LossMode m);
std::string to_string(TripletPolicy p);
std::string to_string(PhraseCnnMode m);

}  // namespace lmpn
