#include <cmath>
#include <filesystem>
#include <random>
#include <set>

#include "doctest.h"
#include "lmpn/synthetic.hpp"
#include "lmpn/train.hpp"
#include "lmpn/viz.hpp"

using namespace lmpn;
namespace fs = std::filesystem;

namespace {

fs::path tmp(const std::string& name) { return fs::temp_directory_path() / name; }

// Two well-separated Gaussian blobs in 5-D, `per` points each.
std::vector<std::vector<double>> two_blobs(int per, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n(0.0, 0.05);
  std::vector<std::vector<double>> rows;
  for (int b = 0; b < 2; ++b) {
    for (int i = 0; i < per; ++i) {
      std::vector<double> row(5);
      for (auto& v : row) v = n(rng) + (b == 0 ? 0.0 : 10.0);
      rows.push_back(row);
    }
  }
  return rows;
}

RestoredModel toy_model() {
  RelationDataset train = make_marker_corpus(6, 12, 11, "train");
  Vocab vocab = build_vocab({&train}, "", 8, 42);
  TrainConfig cfg;
  cfg.model.d_word = 8;
  cfg.model.d_pos = 3;
  cfg.model.max_rel = 16;
  cfg.model.filters = 6;
  cfg.model.phrase_filters = 4;
  cfg.model.phrase_window = 2;
  cfg.model.phrase_hidden = 5;
  auto params = init_params<float>(cfg.model, vocab, 7);
  return restore_model(make_checkpoint(cfg, vocab, params, 0, 0.0));
}

// Minimal XML sanity: every <tag ...> is either self-closed or matched by
// </tag> in LIFO order.
bool tags_balanced(const std::string& xml) {
  std::vector<std::string> stack;
  std::size_t i = 0;
  while ((i = xml.find('<', i)) != std::string::npos) {
    const std::size_t end = xml.find('>', i);
    if (end == std::string::npos) return false;
    std::string inside = xml.substr(i + 1, end - i - 1);
    i = end + 1;
    if (inside.empty() || inside[0] == '?' || inside[0] == '!') continue;
    const bool closing = inside[0] == '/';
    const bool self_closed = inside.back() == '/';
    if (closing) inside = inside.substr(1);
    const std::string name = inside.substr(0, inside.find_first_of(" \t\n/"));
    if (closing) {
      if (stack.empty() || stack.back() != name) return false;
      stack.pop_back();
    } else if (!self_closed) {
      stack.push_back(name);
    }
  }
  return stack.empty();
}

}  // namespace

TEST_CASE("tsne conditional distribution normalization") {
  TsneConfig cfg;
  cfg.perplexity = 5.0;
  cfg.iterations = 250;
  const auto res = tsne_project(two_blobs(10, 1), cfg);
  CHECK(std::fabs(res.p_sum - 1.0) < 1e-9);
}

TEST_CASE("tsne keeps well-separated clusters separate") {
  const auto rows = two_blobs(10, 2);
  TsneConfig cfg;
  cfg.perplexity = 5.0;
  cfg.seed = 3;
  const auto res = tsne_project(rows, cfg);
  REQUIRE(res.coords.size() == 20);
  // nearest neighbor of every point lies in its own cluster
  for (int i = 0; i < 20; ++i) {
    int nearest = -1;
    double best = 1e300;
    for (int j = 0; j < 20; ++j) {
      if (j == i) continue;
      const double dx = res.coords[i][0] - res.coords[j][0];
      const double dy = res.coords[i][1] - res.coords[j][1];
      if (dx * dx + dy * dy < best) {
        best = dx * dx + dy * dy;
        nearest = j;
      }
    }
    CHECK(nearest / 10 == i / 10);
  }
}

TEST_CASE("tsne determinism and seed sensitivity") {
  const auto rows = two_blobs(6, 4);
  TsneConfig cfg;
  cfg.perplexity = 3.0;
  cfg.iterations = 300;
  cfg.seed = 11;
  const auto a = tsne_project(rows, cfg);
  const auto b = tsne_project(rows, cfg);
  CHECK(a.coords == b.coords);
  cfg.seed = 12;
  const auto c = tsne_project(rows, cfg);
  CHECK(a.coords != c.coords);
}

TEST_CASE("tsne input validation and degenerate data") {
  TsneConfig cfg;
  CHECK_THROWS_AS(tsne_project({{1.0, 2.0}}, cfg), std::invalid_argument);

  const auto rows = two_blobs(4, 5);  // n = 8, perplexity must be < 7/3
  CHECK_THROWS_AS(tsne_project(rows, cfg), std::invalid_argument);  // default 30

  cfg.perplexity = 2.0;
  cfg.iterations = 100;
  CHECK_THROWS_AS(tsne_project(rows, cfg), std::invalid_argument);

  cfg.iterations = 250;
  CHECK_NOTHROW(tsne_project(rows, cfg));

  // identical points: jitter keeps everything finite
  std::vector<std::vector<double>> flat(9, std::vector<double>(3, 1.0));
  cfg.perplexity = 2.0;
  const auto res = tsne_project(flat, cfg);
  for (const auto& c : res.coords) {
    CHECK(std::isfinite(c[0]));
    CHECK(std::isfinite(c[1]));
  }
}

TEST_CASE("export_embeddings shape and determinism") {
  const auto model = toy_model();
  const auto data = make_marker_corpus(6, 12, 11, "train");
  const auto m = export_embeddings(model, data, {4, 6, 0}, 77);
  REQUIRE(m.rows.size() == 24);
  CHECK(m.instance_ids.size() == 24);
  CHECK(m.labels.size() == 24);
  CHECK(m.seed == 77);
  for (const auto& r : m.rows) {
    CHECK(static_cast<int>(r.size()) == model.cfg.model.embedding_dim());
  }
  std::set<std::string> classes(m.labels.begin(), m.labels.end());
  CHECK(classes.size() == 4);
  std::set<std::string> ids(m.instance_ids.begin(), m.instance_ids.end());
  CHECK(ids.size() == 24);  // unique per instance

  const auto m2 = export_embeddings(model, data, {4, 6, 0}, 77);
  CHECK(m2.rows == m.rows);
  const auto m3 = export_embeddings(model, data, {4, 6, 0}, 78);
  CHECK(m3.rows != m.rows);
}

TEST_CASE("embeddings csv round-trip") {
  const auto model = toy_model();
  const auto data = make_marker_corpus(6, 12, 11, "train");
  const auto m = export_embeddings(model, data, {3, 4, 0}, 9);
  const auto path = tmp("lmpn_emb.csv");
  write_embeddings_csv(m, path.string());
  const auto r = read_embeddings_csv(path.string());
  CHECK(r.instance_ids == m.instance_ids);
  CHECK(r.labels == m.labels);
  CHECK(r.seed == m.seed);
  REQUIRE(r.rows.size() == m.rows.size());
  for (std::size_t i = 0; i < m.rows.size(); ++i) {
    for (std::size_t d = 0; d < m.rows[i].size(); ++d) {
      CHECK(r.rows[i][d] == doctest::Approx(m.rows[i][d]).epsilon(1e-9));
    }
  }
}

TEST_CASE("coords csv round-trip") {
  EmbeddingMatrix m;
  m.instance_ids = {"a#0", "a#1", "b#0"};
  m.labels = {"A", "A", "B"};
  m.rows = {{0.0}, {1.0}, {2.0}};
  TsneResult res;
  res.coords = {{0.5, -1.25}, {3.0, 4.0}, {-2.0, 0.125}};
  const auto path = tmp("lmpn_coords.csv");
  write_coords_csv(m, res, path.string());
  const auto r = read_coords_csv(path.string());
  CHECK(r.instance_ids == m.instance_ids);
  CHECK(r.labels == m.labels);
  REQUIRE(r.coords.size() == 3);
  for (int i = 0; i < 3; ++i) {
    CHECK(r.coords[i][0] == doctest::Approx(res.coords[i][0]));
    CHECK(r.coords[i][1] == doctest::Approx(res.coords[i][1]));
  }
}

TEST_CASE("svg scatter contains one circle per point and a legend per class") {
  LabeledCoords pts;
  for (int i = 0; i < 12; ++i) {
    pts.instance_ids.push_back("p" + std::to_string(i));
    pts.labels.push_back(i < 7 ? "alpha & co" : "beta<x>");
    pts.coords.push_back({static_cast<double>(i), static_cast<double>(i % 3)});
  }
  const auto svg = render_scatter_svg(pts);
  const bool svg_or_xml_prefix =
      svg.rfind("<svg", 0) == 0 || svg.rfind("<?xml", 0) == 0;
  CHECK(svg_or_xml_prefix);
  CHECK(tags_balanced(svg));

  std::size_t circles = 0, pos = 0;
  while ((pos = svg.find("<circle", pos)) != std::string::npos) {
    ++circles;
    pos += 7;
  }
  CHECK(circles >= 12);  // points plus legend swatches
  CHECK(svg.find("alpha &amp; co") != std::string::npos);
  CHECK(svg.find("beta&lt;x&gt;") != std::string::npos);
  CHECK(svg.find("beta<x>") == std::string::npos);

  const auto path = tmp("lmpn_plot.svg");
  render_scatter(pts, path.string());
  CHECK(fs::file_size(path) > 100);
}

TEST_CASE("svg handles a single point and many classes") {
  LabeledCoords one;
  one.instance_ids = {"only"};
  one.labels = {"L"};
  one.coords = {{0.0, 0.0}};
  CHECK(tags_balanced(render_scatter_svg(one)));

  LabeledCoords many;
  for (int i = 0; i < 14; ++i) {  // more classes than palette entries: colors cycle
    many.instance_ids.push_back("q" + std::to_string(i));
    many.labels.push_back("class" + std::to_string(i));
    many.coords.push_back({std::cos(i * 0.7), std::sin(i * 0.7)});
  }
  CHECK(tags_balanced(render_scatter_svg(many)));
}
