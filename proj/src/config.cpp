#include "lmpn/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"

namespace lmpn {

using nlohmann::json;

namespace {

// Unknown keys are errors, not warnings, so config typos surface immediately.
void check_keys(const json& obj, const std::set<std::string>& allowed,
                const std::string& where) {
  for (const auto& [k, _] : obj.items()) {
    if (!allowed.count(k)) {
      throw std::invalid_argument("config: unknown key \"" + k + "\" in " + where);
    }
  }
}

EncoderMode parse_encoder(const std::string& s) {
  if (s == "cnn") return EncoderMode::cnn;
  if (s == "fgf") return EncoderMode::fgf;
  throw std::invalid_argument("config: encoder must be cnn or fgf, got " + s);
}

LossMode parse_loss(const std::string& s) {
  if (s == "softmax") return LossMode::softmax_only;
  if (s == "softmax_triplet") return LossMode::softmax_triplet;
  throw std::invalid_argument("config: loss must be softmax or softmax_triplet, got " + s);
}

TripletPolicy parse_policy(const std::string& s) {
  if (s == "all_pairs") return TripletPolicy::all_pairs;
  if (s == "semi_hard") return TripletPolicy::semi_hard;
  throw std::invalid_argument("config: triplet_policy must be all_pairs or semi_hard, got " + s);
}

PhraseCnnMode parse_phrase_cnn(const std::string& s) {
  if (s == "shared") return PhraseCnnMode::shared;
  if (s == "per_segment") return PhraseCnnMode::per_segment;
  throw std::invalid_argument("config: phrase_cnn must be shared or per_segment, got " + s);
}

template <typename T>
void get_if(const json& obj, const char* key, T& out) {
  if (obj.contains(key)) out = obj.at(key).get<T>();
}

}  // namespace

std::string to_string(EncoderMode m) { return m == EncoderMode::cnn ? "cnn" : "fgf"; }
std::string to_string(LossMode m) {
  return m == LossMode::softmax_only ? "softmax" : "softmax_triplet";
}
std::string to_string(TripletPolicy p) {
  return p == TripletPolicy::all_pairs ? "all_pairs" : "semi_hard";
}
std::string to_string(PhraseCnnMode m) {
  return m == PhraseCnnMode::shared ? "shared" : "per_segment";
}

TrainConfig parse_train_config(const std::string& json_text) {
  json root;
  try {
    root = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw std::invalid_argument(std::string("config: parse error: ") + e.what());
  }
  check_keys(root, {"encoder", "loss", "n_way", "k_shot", "n_query", "train_episodes",
                    "eval_every", "eval_episodes", "optimizer", "margin", "lambda",
                    "triplet_policy", "model", "vectors_path", "seed"},
             "top level");
  TrainConfig cfg;
  if (root.contains("encoder")) cfg.model.encoder = parse_encoder(root["encoder"]);
  if (root.contains("loss")) cfg.loss = parse_loss(root["loss"]);
  get_if(root, "n_way", cfg.train_spec.n_way);
  get_if(root, "k_shot", cfg.train_spec.k_shot);
  get_if(root, "n_query", cfg.train_spec.n_query);
  get_if(root, "train_episodes", cfg.train_episodes);
  get_if(root, "eval_every", cfg.eval_every);
  get_if(root, "eval_episodes", cfg.eval_episodes);
  get_if(root, "margin", cfg.loss_cfg.gamma);
  get_if(root, "lambda", cfg.loss_cfg.lambda);
  if (root.contains("triplet_policy")) {
    cfg.loss_cfg.policy = parse_policy(root["triplet_policy"]);
  }
  get_if(root, "vectors_path", cfg.vectors_path);
  get_if(root, "seed", cfg.seed);

  if (root.contains("optimizer")) {
    const auto& o = root["optimizer"];
    check_keys(o, {"kind", "lr", "weight_decay", "lr_decay_every", "lr_decay_factor"},
               "optimizer");
    get_if(o, "kind", cfg.optimizer.kind);
    get_if(o, "lr", cfg.optimizer.lr);
    get_if(o, "weight_decay", cfg.optimizer.weight_decay);
    get_if(o, "lr_decay_every", cfg.optimizer.lr_decay_every);
    get_if(o, "lr_decay_factor", cfg.optimizer.lr_decay_factor);
  }
  if (root.contains("model")) {
    const auto& m = root["model"];
    check_keys(m, {"d_word", "d_pos", "max_rel", "max_len", "filters", "window",
                   "phrase_filters", "phrase_window", "phrase_hidden", "phrase_cnn",
                   "phrase_positions", "tie_phrase_conv"},
               "model");
    get_if(m, "d_word", cfg.model.d_word);
    get_if(m, "d_pos", cfg.model.d_pos);
    get_if(m, "max_rel", cfg.model.max_rel);
    get_if(m, "max_len", cfg.model.max_len);
    get_if(m, "filters", cfg.model.filters);
    get_if(m, "window", cfg.model.window);
    get_if(m, "phrase_filters", cfg.model.phrase_filters);
    get_if(m, "phrase_window", cfg.model.phrase_window);
    get_if(m, "phrase_hidden", cfg.model.phrase_hidden);
    if (m.contains("phrase_cnn")) cfg.model.phrase_cnn = parse_phrase_cnn(m["phrase_cnn"]);
    get_if(m, "phrase_positions", cfg.model.phrase_positions);
    get_if(m, "tie_phrase_conv", cfg.model.tie_phrase_conv);
  }
  cfg.validate();
  return cfg;
}

std::string train_config_to_json(const TrainConfig& cfg) {
  json m{{"d_word", cfg.model.d_word},
         {"d_pos", cfg.model.d_pos},
         {"max_rel", cfg.model.max_rel},
         {"max_len", cfg.model.max_len},
         {"filters", cfg.model.filters},
         {"window", cfg.model.window},
         {"phrase_filters", cfg.model.phrase_filters},
         {"phrase_window", cfg.model.phrase_window},
         {"phrase_hidden", cfg.model.phrase_hidden},
         {"phrase_cnn", to_string(cfg.model.phrase_cnn)},
         {"phrase_positions", cfg.model.phrase_positions},
         {"tie_phrase_conv", cfg.model.tie_phrase_conv}};
  json o{{"kind", cfg.optimizer.kind},
         {"lr", cfg.optimizer.lr},
         {"weight_decay", cfg.optimizer.weight_decay},
         {"lr_decay_every", cfg.optimizer.lr_decay_every},
         {"lr_decay_factor", cfg.optimizer.lr_decay_factor}};
  json root{{"encoder", to_string(cfg.model.encoder)},
            {"loss", to_string(cfg.loss)},
            {"n_way", cfg.train_spec.n_way},
            {"k_shot", cfg.train_spec.k_shot},
            {"n_query", cfg.train_spec.n_query},
            {"train_episodes", cfg.train_episodes},
            {"eval_every", cfg.eval_every},
            {"eval_episodes", cfg.eval_episodes},
            {"margin", cfg.loss_cfg.gamma},
            {"lambda", cfg.loss_cfg.lambda},
            {"triplet_policy", to_string(cfg.loss_cfg.policy)},
            {"vectors_path", cfg.vectors_path},
            {"seed", cfg.seed},
            {"optimizer", o},
            {"model", m}};
  return root.dump(2);
}

TrainConfig load_train_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("config: cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_train_config(ss.str());
}

}  // namespace lmpn
