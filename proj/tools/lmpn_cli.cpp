// lmpn: few-shot relation classification pipeline.
// Subcommands: train, eval, ablate, export-emb, tsne, plot, selftest.
// Exit codes: 0 success, 1 usage error, 2 runtime error.

#include <fstream>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "lmpn/checkpoint.hpp"
#include "lmpn/config.hpp"
#include "lmpn/data.hpp"
#include "lmpn/selftest.hpp"
#include "lmpn/train.hpp"
#include "lmpn/viz.hpp"

namespace {

void write_text(const std::string& path, const std::string& text) {
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw std::runtime_error("cannot open " + path + " for writing");
  f << text;
  if (!f) throw std::runtime_error("write failed for " + path);
}

int run(int argc, char** argv) {
  CLI::App app{"LM-ProtoNet (FGF): few-shot relation classification"};
  app.require_subcommand(1);

  // train
  auto* cmd_train = app.add_subcommand("train", "train a model on episodic data");
  std::string t_config, t_train, t_val, t_out;
  std::uint64_t t_seed = 0;
  bool t_seed_set = false;
  cmd_train->add_option("--config", t_config, "JSON config file")->required();
  cmd_train->add_option("--train", t_train, "FewRel-format training JSON")->required();
  cmd_train->add_option("--val", t_val, "FewRel-format validation JSON")->required();
  cmd_train->add_option("--out", t_out, "output checkpoint path")->required();
  cmd_train->add_option("--seed", t_seed, "override the config seed")
      ->each([&](const std::string&) { t_seed_set = true; });

  // eval
  auto* cmd_eval = app.add_subcommand("eval", "evaluate a checkpoint");
  std::string e_ckpt, e_data, e_csv, e_method = "proto";
  int e_nway = 5, e_kshot = 1;
  long e_episodes = 10000;
  std::uint64_t e_seed = 0;
  cmd_eval->add_option("--ckpt", e_ckpt, "checkpoint path")->required();
  cmd_eval->add_option("--data", e_data, "FewRel-format JSON")->required();
  cmd_eval->add_option("--nway", e_nway, "classes per episode");
  cmd_eval->add_option("--kshot", e_kshot, "supports per class");
  cmd_eval->add_option("--episodes", e_episodes, "evaluation episodes");
  cmd_eval->add_option("--seed", e_seed, "evaluation seed");
  cmd_eval->add_option("--csv", e_csv, "report CSV output path")->required();
  cmd_eval->add_option("--method", e_method, "proto | knn (k = kshot)")
      ->check(CLI::IsMember({"proto", "knn"}));

  // ablate
  auto* cmd_ablate = app.add_subcommand(
      "ablate", "train and evaluate the {ProtoNet,LM-ProtoNet} x {CNN,FGF} grid");
  std::string a_config, a_train, a_val, a_csv;
  int a_holdout = 8;
  long a_episodes = 10000;
  std::uint64_t a_seed = 0;
  bool a_seed_set = false;
  cmd_ablate->add_option("--config", a_config, "JSON config file")->required();
  cmd_ablate->add_option("--train", a_train, "FewRel-format training JSON")->required();
  cmd_ablate->add_option("--val", a_val, "FewRel-format validation JSON")->required();
  cmd_ablate->add_option("--holdout", a_holdout, "relations held out of val for testing");
  cmd_ablate->add_option("--episodes", a_episodes, "evaluation episodes per setting");
  cmd_ablate->add_option("--seed", a_seed, "override the config seed")
      ->each([&](const std::string&) { a_seed_set = true; });
  cmd_ablate->add_option("--csv", a_csv, "report CSV output path")->required();

  // export-emb
  auto* cmd_export = app.add_subcommand("export-emb", "export support-set embeddings");
  std::string x_ckpt, x_data, x_out;
  int x_nway = 7, x_kshot = 40;
  std::uint64_t x_seed = 0;
  cmd_export->add_option("--ckpt", x_ckpt, "checkpoint path")->required();
  cmd_export->add_option("--data", x_data, "FewRel-format JSON")->required();
  cmd_export->add_option("--nway", x_nway, "classes in the exported episode");
  cmd_export->add_option("--kshot", x_kshot, "supports per class");
  cmd_export->add_option("--seed", x_seed, "episode seed");
  cmd_export->add_option("--out", x_out, "embedding CSV output path")->required();

  // tsne
  auto* cmd_tsne = app.add_subcommand("tsne", "project embeddings to 2D (exact t-SNE)");
  std::string s_in, s_out;
  double s_perplexity = 30.0;
  int s_iters = 1000;
  std::uint64_t s_seed = 0;
  cmd_tsne->add_option("--in", s_in, "embedding CSV")->required();
  cmd_tsne->add_option("--perplexity", s_perplexity, "Gaussian perplexity");
  cmd_tsne->add_option("--iters", s_iters, "gradient descent iterations");
  cmd_tsne->add_option("--seed", s_seed, "projection seed");
  cmd_tsne->add_option("--out", s_out, "coordinate CSV output path")->required();

  // plot
  auto* cmd_plot = app.add_subcommand("plot", "render 2D coordinates to SVG");
  std::string p_in, p_out;
  cmd_plot->add_option("--in", p_in, "coordinate CSV")->required();
  cmd_plot->add_option("--out", p_out, "SVG output path")->required();

  auto* cmd_selftest =
      app.add_subcommand("selftest", "run gradient checks and invariant suite");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);  // --help
    std::cerr << e.what() << "\n\n" << app.help() << std::flush;
    return 1;
  }

  if (cmd_train->parsed()) {
    lmpn::TrainConfig cfg = lmpn::load_train_config_file(t_config);
    if (t_seed_set) cfg.seed = t_seed;
    const auto train_set = lmpn::load_fewrel(t_train, "train", cfg.model.max_len);
    const auto val_set = lmpn::load_fewrel(t_val, "val", cfg.model.max_len);
    const auto vocab = lmpn::build_vocab({&train_set, &val_set}, cfg.vectors_path,
                                         cfg.model.d_word, cfg.seed);
    lmpn::TrainResult res = lmpn::train(cfg, train_set, val_set, vocab, &std::cout);
    lmpn::save_checkpoint(res.checkpoint, t_out);
    std::cout << "best validation accuracy: " << res.best_val_acc_pct << "%\n";
    return 0;
  }
  if (cmd_eval->parsed()) {
    const auto ckpt = lmpn::load_checkpoint(e_ckpt);
    const auto model = lmpn::restore_model(ckpt);
    const auto data = lmpn::load_fewrel(e_data, "eval", model.cfg.model.max_len);
    lmpn::EvalOptions opts;
    opts.spec = {e_nway, e_kshot, model.cfg.train_spec.n_query};
    opts.n_episodes = e_episodes;
    opts.seed = e_seed;
    opts.method = e_method == "knn" ? lmpn::EvalMethod::knn : lmpn::EvalMethod::prototype;
    opts.model_name = (model.cfg.loss == lmpn::LossMode::softmax_triplet
                           ? std::string("LM-ProtoNet")
                           : std::string("ProtoNet")) +
                      " (" + (model.cfg.model.encoder == lmpn::EncoderMode::fgf
                                  ? "FGF" : "CNN") + ")" +
                      (e_method == "knn" ? " [knn]" : "");
    const auto rep = lmpn::evaluate(model.params, model.vocab, data, opts);
    const std::string csv = lmpn::eval_reports_csv({rep});
    write_text(e_csv, csv);
    std::cout << csv;
    return 0;
  }
  if (cmd_ablate->parsed()) {
    lmpn::TrainConfig cfg = lmpn::load_train_config_file(a_config);
    if (a_seed_set) cfg.seed = a_seed;
    const auto train_set = lmpn::load_fewrel(a_train, "train", cfg.model.max_len);
    const auto val_full = lmpn::load_fewrel(a_val, "val", cfg.model.max_len);
    auto [val_reduced, holdout] = lmpn::split_holdout(val_full, a_holdout, cfg.seed);
    const auto vocab = lmpn::build_vocab({&train_set, &val_full}, cfg.vectors_path,
                                         cfg.model.d_word, cfg.seed);
    const auto reports = lmpn::run_ablation(cfg, train_set, val_reduced, holdout,
                                            vocab, a_episodes, &std::cout);
    const std::string csv = lmpn::eval_reports_csv(reports);
    write_text(a_csv, csv);
    std::cout << csv;
    return 0;
  }
  if (cmd_export->parsed()) {
    const auto model = lmpn::restore_model(lmpn::load_checkpoint(x_ckpt));
    const auto data = lmpn::load_fewrel(x_data, "export", model.cfg.model.max_len);
    const auto emb = lmpn::export_embeddings(model, data, {x_nway, x_kshot, 0}, x_seed);
    lmpn::write_embeddings_csv(emb, x_out);
    std::cout << "wrote " << emb.rows.size() << " embeddings to " << x_out << '\n';
    return 0;
  }
  if (cmd_tsne->parsed()) {
    const auto emb = lmpn::read_embeddings_csv(s_in);
    lmpn::TsneConfig cfg;
    cfg.perplexity = s_perplexity;
    cfg.iterations = s_iters;
    cfg.seed = s_seed;
    auto source = emb;
    source.seed = s_seed;
    const auto res = lmpn::tsne_project(emb.rows, cfg);
    lmpn::write_coords_csv(source, res, s_out);
    std::cout << "projected " << res.coords.size() << " points to " << s_out << '\n';
    return 0;
  }
  if (cmd_plot->parsed()) {
    lmpn::render_scatter(lmpn::read_coords_csv(p_in), p_out);
    std::cout << "wrote " << p_out << '\n';
    return 0;
  }
  if (cmd_selftest->parsed()) {
    return lmpn::run_selftest(std::cout) == 0 ? 0 : 2;
  }
  return 1;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
}
