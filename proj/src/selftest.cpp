#include "lmpn/selftest.hpp"

#include <cmath>
#include <random>
#include <set>
#include <vector>

#include "lmpn/data.hpp"
#include "lmpn/encoders.hpp"
#include "lmpn/fewshot.hpp"
#include "lmpn/gradcheck.hpp"
#include "lmpn/rng.hpp"
#include "lmpn/synthetic.hpp"
#include "lmpn/tensor.hpp"

namespace lmpn {

namespace {

Tensor<double> rand_tensor(std::vector<int> shape, std::mt19937_64& rng,
                           double scale = 1.0) {
  std::normal_distribution<double> n(0.0, scale);
  std::vector<double> data(numel(shape));
  for (auto& v : data) v = n(rng);
  return make_tensor<double>(std::move(shape), std::move(data), true);
}

ModelConfig toy_config() {
  ModelConfig cfg;
  cfg.encoder = EncoderMode::fgf;
  cfg.d_word = 8;
  cfg.d_pos = 3;
  cfg.max_rel = 16;
  cfg.max_len = 32;
  cfg.filters = 6;
  cfg.window = 3;
  cfg.phrase_filters = 4;
  cfg.phrase_window = 2;
  cfg.phrase_hidden = 5;
  return cfg;
}

}  // namespace

int run_selftest(std::ostream& out) {
  int failures = 0;
  auto check = [&](const char* name, bool ok) {
    out << (ok ? "PASS " : "FAIL ") << name << '\n';
    if (!ok) ++failures;
  };

  std::mt19937_64 rng(12345);

  // per-op gradient checks (64-bit, central differences)
  {
    auto input = rand_tensor({7, 4}, rng);
    auto kernel = rand_tensor({3, 4, 5}, rng);
    auto bias = rand_tensor({5}, rng);
    const double err = finite_diff_check(
        [&](Tape<double>& t) {
          return sum_all(&t, relu(&t, conv1d(&t, input, kernel, bias)));
        },
        {input, kernel, bias});
    check("grad conv1d+relu", err < 1e-3);
  }
  {
    auto input = rand_tensor({6, 5}, rng);
    const double err = finite_diff_check(
        [&](Tape<double>& t) { return sum_all(&t, maxpool_over_time(&t, input)); },
        {input});
    check("grad maxpool", err < 1e-3);
  }
  {
    auto x = rand_tensor({6}, rng);
    auto w = rand_tensor({6, 4}, rng);
    auto b = rand_tensor({4}, rng);
    const double err = finite_diff_check(
        [&](Tape<double>& t) { return sum_all(&t, linear(&t, x, w, b)); }, {x, w, b});
    check("grad linear", err < 1e-3);
  }
  {
    auto a = rand_tensor({5}, rng);
    auto b = rand_tensor({5}, rng);
    const double err = finite_diff_check(
        [&](Tape<double>& t) { return squared_euclidean(&t, a, b); }, {a, b});
    check("grad squared_euclidean", err < 1e-3);
  }
  {
    auto logits = rand_tensor({4}, rng);
    const double err = finite_diff_check(
        [&](Tape<double>& t) { return log_softmax_xent(&t, logits, 2); }, {logits});
    check("grad log_softmax_xent", err < 1e-3);
  }
  {
    auto a = rand_tensor({3}, rng);
    auto b = rand_tensor({4}, rng);
    const double err = finite_diff_check(
        [&](Tape<double>& t) {
          auto c = concat(&t, {a, b});
          return squared_euclidean(&t, c, zeros<double>({7}));
        },
        {a, b});
    check("grad concat", err < 1e-3);
  }

  // xent shift invariance
  {
    auto logits = rand_tensor({5}, rng);
    const double l0 = log_softmax_xent<double>(nullptr, logits, 1)->data[0];
    auto shifted = add_const<double>(nullptr, logits, 37.5);
    const double l1 = log_softmax_xent<double>(nullptr, shifted, 1)->data[0];
    check("xent shift invariance", std::fabs(l0 - l1) < 1e-6);
  }

  // tape linearity: backward of a sum equals the sum of backwards
  {
    auto x = rand_tensor({4}, rng);
    Tape<double> t1;
    auto l1 = sum_all(&t1, relu(&t1, x));
    auto l2 = squared_euclidean(&t1, x, zeros<double>({4}));
    t1.backward(l1);
    t1.backward(l2);
    const auto grads_separate = x->grad;
    zero_grad(x);
    Tape<double> t2;
    auto lsum = add(&t2, sum_all(&t2, relu(&t2, x)),
                    squared_euclidean(&t2, x, zeros<double>({4})));
    t2.backward(lsum);
    bool ok = true;
    for (std::size_t i = 0; i < x->grad.size(); ++i) {
      if (std::fabs(x->grad[i] - grads_separate[i]) > 1e-12) ok = false;
    }
    check("tape linearity", ok);
  }

  // full combined loss on a tiny 2-way-2-shot episode
  {
    const auto corpus = make_marker_corpus(4, 10, 99);
    const Vocab vocab = build_vocab({&corpus}, "", 8, 7);
    const ModelConfig cfg = toy_config();
    auto params = init_params<double>(cfg, vocab, 11);
    std::mt19937_64 ep_rng(3);
    const Episode raw = sample_episode(corpus, {2, 2, 2}, ep_rng);
    const EncodedEpisode ep = encode_episode(vocab, raw, cfg.max_rel);
    LossConfig lc;
    lc.gamma = 1.0;
    lc.lambda = 0.5;
    const double err = finite_diff_check(
        [&](Tape<double>& t) { return combined_loss(&t, params, ep, lc); },
        params.trainable(), 1e-4, 20, 5);
    check("grad combined loss", err < 1e-3);
  }

  // episodic protocol invariants
  {
    const auto corpus = make_marker_corpus(8, 12, 5);
    bool ok = true;
    for (int i = 0; i < 1000 && ok; ++i) {
      std::mt19937_64 r = stream_rng(17, streams::kEvalEpisode, i);
      const Episode ep = sample_episode(corpus, {5, 2, 3}, r);
      std::set<std::string> classes(ep.class_ids.begin(), ep.class_ids.end());
      if (classes.size() != 5) ok = false;
      for (int c = 0; c < 5 && ok; ++c) {
        if (ep.support[c].size() != 2 || ep.query[c].size() != 3) ok = false;
        std::set<int> s(ep.support_idx[c].begin(), ep.support_idx[c].end());
        for (int qi : ep.query_idx[c]) {
          if (s.count(qi)) ok = false;
        }
        if (s.size() != 2) ok = false;
      }
    }
    check("episode sampling invariants", ok);
  }

  // classify/knn vs naive double-loop references
  {
    std::normal_distribution<double> n(0.0, 1.0);
    bool ok = true;
    for (int trial = 0; trial < 100 && ok; ++trial) {
      const int N = 4, K = 3, D = 6;
      std::vector<std::vector<std::vector<float>>> sup(N);
      for (int c = 0; c < N; ++c) {
        for (int k = 0; k < K; ++k) {
          std::vector<float> e(D);
          for (auto& v : e) v = static_cast<float>(n(rng));
          sup[c].push_back(std::move(e));
        }
      }
      std::vector<float> q(D);
      for (auto& v : q) v = static_cast<float>(n(rng));

      const auto protos = compute_prototypes(sup);
      int ref_best = 0;
      double ref_dist = 1e300;
      for (int c = 0; c < N; ++c) {
        double d = 0.0;
        for (int j = 0; j < D; ++j) {
          const double diff = static_cast<double>(q[j]) - static_cast<double>(protos[c][j]);
          d += diff * diff;
        }
        if (d < ref_dist) {
          ref_dist = d;
          ref_best = c;
        }
      }
      if (classify_query(q, protos).predicted != ref_best) ok = false;

      // 1-NN reference
      int nn_cls = 0;
      double nn_dist = 1e300;
      for (int c = 0; c < N; ++c) {
        for (int k = 0; k < K; ++k) {
          double d = 0.0;
          for (int j = 0; j < D; ++j) {
            const double diff = static_cast<double>(q[j]) - static_cast<double>(sup[c][k][j]);
            d += diff * diff;
          }
          if (d < nn_dist) {
            nn_dist = d;
            nn_cls = c;
          }
        }
      }
      if (knn_predict(sup, q, 1) != nn_cls) ok = false;
    }
    check("classify/knn oracle", ok);
  }

  out << (failures == 0 ? "selftest: all checks passed\n"
                        : "selftest: FAILURES DETECTED\n");
  return failures;
}

}  // namespace lmpn
