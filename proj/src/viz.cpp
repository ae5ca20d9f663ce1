#include "lmpn/viz.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <random>
#include <sstream>
#include <stdexcept>

#include "lmpn/fewshot.hpp"
#include "lmpn/rng.hpp"

namespace lmpn {

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  out.push_back(cur);
  return out;
}

std::string xml_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out.push_back(c);
    }
  }
  return out;
}

constexpr const char* kPalette[10] = {
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd",
    "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};

}  // namespace

EmbeddingMatrix export_embeddings(const RestoredModel& model,
                                  const RelationDataset& dataset,
                                  const EpisodeSpec& spec, std::uint64_t seed) {
  std::mt19937_64 rng = stream_rng(seed, streams::kExportEpisode);
  const Episode raw = sample_episode(dataset, spec, rng);
  const EncodedEpisode ep = encode_episode(model.vocab, raw, model.cfg.model.max_rel);

  EmbeddingMatrix out;
  out.seed = seed;
  for (int c = 0; c < ep.n_way; ++c) {
    for (std::size_t i = 0; i < ep.support[c].size(); ++i) {
      const auto emb = encode<float>(nullptr, model.params, ep.support[c][i])->data;
      out.instance_ids.push_back(ep.class_ids[c] + "#" + std::to_string(i));
      out.labels.push_back(ep.class_ids[c]);
      out.rows.emplace_back(emb.begin(), emb.end());
    }
  }
  return out;
}

void write_embeddings_csv(const EmbeddingMatrix& m, const std::string& path) {
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw std::runtime_error("embeddings: cannot open " + path + " for writing");
  f << "# seed=" << m.seed << '\n';
  const std::size_t dim = m.rows.empty() ? 0 : m.rows[0].size();
  f << "instance_id,class";
  for (std::size_t d = 0; d < dim; ++d) f << ",dim_" << d;
  f << '\n';
  f.precision(9);
  for (std::size_t i = 0; i < m.rows.size(); ++i) {
    f << m.instance_ids[i] << ',' << m.labels[i];
    for (double v : m.rows[i]) f << ',' << v;
    f << '\n';
  }
  if (!f) throw std::runtime_error("embeddings: write failed for " + path);
}

EmbeddingMatrix read_embeddings_csv(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("embeddings: cannot open " + path);
  EmbeddingMatrix m;
  std::string line;
  bool header_seen = false;
  while (std::getline(f, line)) {
    if (line.empty()) continue;
    if (line[0] == '#') {
      const auto pos = line.find("seed=");
      if (pos != std::string::npos) m.seed = std::stoull(line.substr(pos + 5));
      continue;
    }
    if (!header_seen) {
      header_seen = true;
      continue;
    }
    auto parts = split_csv_line(line);
    if (parts.size() < 3) throw std::runtime_error("embeddings: malformed row in " + path);
    m.instance_ids.push_back(parts[0]);
    m.labels.push_back(parts[1]);
    std::vector<double> row;
    for (std::size_t i = 2; i < parts.size(); ++i) row.push_back(std::stod(parts[i]));
    if (!m.rows.empty() && row.size() != m.rows[0].size()) {
      throw std::runtime_error("embeddings: inconsistent dimension in " + path);
    }
    m.rows.push_back(std::move(row));
  }
  if (m.rows.size() < 2) throw std::runtime_error("embeddings: need at least 2 rows");
  return m;
}

TsneResult tsne_project(const std::vector<std::vector<double>>& rows,
                        const TsneConfig& cfg) {
  const int n = static_cast<int>(rows.size());
  if (n < 2) throw std::invalid_argument("tsne: need at least 2 points");
  if (n > 5000) throw std::invalid_argument("tsne: exact method limited to 5000 points");
  if (!(cfg.perplexity > 1.0 && cfg.perplexity < (n - 1) / 3.0)) {
    throw std::invalid_argument("tsne: perplexity must satisfy 1 < perp < (n-1)/3");
  }
  if (cfg.iterations < 250) throw std::invalid_argument("tsne: iterations must be >= 250");

  const int dim = static_cast<int>(rows[0].size());
  std::vector<std::vector<double>> x = rows;
  std::mt19937_64 rng = stream_rng(cfg.seed, streams::kTsneInit);

  std::vector<double> d2(static_cast<std::size_t>(n) * n, 0.0);
  auto compute_d2 = [&]() {
    double max_d = 0.0;
    for (int i = 0; i < n; ++i) {
      for (int j = i + 1; j < n; ++j) {
        double s = 0.0;
        for (int d = 0; d < dim; ++d) {
          const double diff = x[i][d] - x[j][d];
          s += diff * diff;
        }
        d2[i * n + j] = d2[j * n + i] = s;
        max_d = std::max(max_d, s);
      }
    }
    return max_d;
  };
  if (compute_d2() == 0.0) {
    // all-identical inputs: seeded jitter so the projection stays defined
    std::normal_distribution<double> jitter(0.0, 1e-10);
    for (auto& row : x) {
      for (double& v : row) v += jitter(rng);
    }
    compute_d2();
  }

  // per-point Gaussian bandwidth via bisection on entropy
  const double target_h = std::log(cfg.perplexity);
  std::vector<double> p(static_cast<std::size_t>(n) * n, 0.0);
  for (int i = 0; i < n; ++i) {
    double beta = 1.0, beta_lo = 0.0, beta_hi = std::numeric_limits<double>::infinity();
    for (int iter = 0; iter < 50; ++iter) {
      double sum = 0.0, dsum = 0.0;
      for (int j = 0; j < n; ++j) {
        if (j == i) continue;
        const double e = std::exp(-beta * d2[i * n + j]);
        sum += e;
        dsum += d2[i * n + j] * e;
      }
      const double h = sum > 0.0 ? std::log(sum) + beta * dsum / sum : 0.0;
      const double diff = h - target_h;
      if (std::fabs(diff) < 1e-5) break;
      if (diff > 0) {
        beta_lo = beta;
        beta = std::isinf(beta_hi) ? beta * 2.0 : (beta + beta_hi) / 2.0;
      } else {
        beta_hi = beta;
        beta = (beta + beta_lo) / 2.0;
      }
    }
    double sum = 0.0;
    for (int j = 0; j < n; ++j) {
      if (j != i) sum += std::exp(-beta * d2[i * n + j]);
    }
    for (int j = 0; j < n; ++j) {
      if (j != i && sum > 0.0) p[i * n + j] = std::exp(-beta * d2[i * n + j]) / sum;
    }
  }

  // symmetrize and normalize to a joint distribution
  double total = 0.0;
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      const double v = (p[i * n + j] + p[j * n + i]) / (2.0 * n);
      p[i * n + j] = p[j * n + i] = v;
      total += 2.0 * v;
    }
  }
  TsneResult result;
  result.p_sum = total;

  std::normal_distribution<double> init(0.0, 1e-4);
  std::vector<std::array<double, 2>> y(n), vel(n, {0.0, 0.0}), grad(n);
  for (auto& yi : y) {
    yi[0] = init(rng);
    yi[1] = init(rng);
  }

  std::vector<double> num(static_cast<std::size_t>(n) * n, 0.0);
  for (int iter = 0; iter < cfg.iterations; ++iter) {
    const double exag = iter < cfg.exaggeration_iters ? cfg.early_exaggeration : 1.0;
    const double momentum = iter < 250 ? 0.5 : 0.8;

    double z = 0.0;
    for (int i = 0; i < n; ++i) {
      for (int j = i + 1; j < n; ++j) {
        const double dy0 = y[i][0] - y[j][0];
        const double dy1 = y[i][1] - y[j][1];
        const double v = 1.0 / (1.0 + dy0 * dy0 + dy1 * dy1);
        num[i * n + j] = num[j * n + i] = v;
        z += 2.0 * v;
      }
    }
    for (int i = 0; i < n; ++i) grad[i] = {0.0, 0.0};
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n; ++j) {
        if (j == i) continue;
        const double q = std::max(num[i * n + j] / z, 1e-12);
        const double mult = 4.0 * (exag * p[i * n + j] - q) * num[i * n + j];
        grad[i][0] += mult * (y[i][0] - y[j][0]);
        grad[i][1] += mult * (y[i][1] - y[j][1]);
      }
    }
    double mean0 = 0.0, mean1 = 0.0;
    for (int i = 0; i < n; ++i) {
      vel[i][0] = momentum * vel[i][0] - cfg.learning_rate * grad[i][0];
      vel[i][1] = momentum * vel[i][1] - cfg.learning_rate * grad[i][1];
      y[i][0] += vel[i][0];
      y[i][1] += vel[i][1];
      mean0 += y[i][0];
      mean1 += y[i][1];
    }
    mean0 /= n;
    mean1 /= n;
    for (int i = 0; i < n; ++i) {
      y[i][0] -= mean0;
      y[i][1] -= mean1;
    }
  }
  for (const auto& yi : y) {
    if (!std::isfinite(yi[0]) || !std::isfinite(yi[1])) {
      throw std::runtime_error("tsne: non-finite coordinates produced");
    }
  }
  result.coords = std::move(y);
  return result;
}

void write_coords_csv(const EmbeddingMatrix& source, const TsneResult& res,
                      const std::string& path) {
  if (source.rows.size() != res.coords.size()) {
    throw std::invalid_argument("coords: row count mismatch with source embeddings");
  }
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw std::runtime_error("coords: cannot open " + path + " for writing");
  f << "# seed=" << source.seed << '\n';
  f << "instance_id,class,x,y\n";
  f.precision(9);
  for (std::size_t i = 0; i < res.coords.size(); ++i) {
    f << source.instance_ids[i] << ',' << source.labels[i] << ',' << res.coords[i][0]
      << ',' << res.coords[i][1] << '\n';
  }
  if (!f) throw std::runtime_error("coords: write failed for " + path);
}

LabeledCoords read_coords_csv(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("coords: cannot open " + path);
  LabeledCoords out;
  std::string line;
  bool header_seen = false;
  while (std::getline(f, line)) {
    if (line.empty() || line[0] == '#') continue;
    if (!header_seen) {
      header_seen = true;
      continue;
    }
    auto parts = split_csv_line(line);
    if (parts.size() != 4) throw std::runtime_error("coords: malformed row in " + path);
    out.instance_ids.push_back(parts[0]);
    out.labels.push_back(parts[1]);
    out.coords.push_back({std::stod(parts[2]), std::stod(parts[3])});
  }
  if (out.coords.empty()) throw std::runtime_error("coords: no rows in " + path);
  return out;
}

std::string render_scatter_svg(const LabeledCoords& pts) {
  if (pts.coords.empty()) throw std::invalid_argument("render: no points");
  const double width = 800, height = 600;

  double xmin = pts.coords[0][0], xmax = xmin, ymin = pts.coords[0][1], ymax = ymin;
  for (const auto& c : pts.coords) {
    xmin = std::min(xmin, c[0]);
    xmax = std::max(xmax, c[0]);
    ymin = std::min(ymin, c[1]);
    ymax = std::max(ymax, c[1]);
  }
  double xr = xmax - xmin, yr = ymax - ymin;
  if (xr == 0.0) xr = 1.0;
  if (yr == 0.0) yr = 1.0;
  xmin -= 0.05 * xr;
  xmax += 0.05 * xr;
  ymin -= 0.05 * yr;
  ymax += 0.05 * yr;

  std::map<std::string, int> class_color;
  for (const auto& l : pts.labels) class_color.emplace(l, 0);
  int ci = 0;
  for (auto& [_, idx] : class_color) idx = ci++ % 10;

  std::ostringstream svg;
  svg << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width
      << "\" height=\"" << height << "\" viewBox=\"0 0 " << width << " " << height
      << "\">\n";
  svg << "<rect width=\"" << width << "\" height=\"" << height
      << "\" fill=\"white\"/>\n";
  for (std::size_t i = 0; i < pts.coords.size(); ++i) {
    const double px = (pts.coords[i][0] - xmin) / (xmax - xmin) * width;
    const double py = height - (pts.coords[i][1] - ymin) / (ymax - ymin) * height;
    svg << "<circle cx=\"" << px << "\" cy=\"" << py << "\" r=\"4\" fill=\""
        << kPalette[class_color.at(pts.labels[i])] << "\" fill-opacity=\"0.8\"/>\n";
  }
  double ly = 20.0;
  for (const auto& [label, idx] : class_color) {
    svg << "<g class=\"legend-entry\"><rect x=\"10\" y=\"" << ly - 10
        << "\" width=\"12\" height=\"12\" fill=\"" << kPalette[idx] << "\"/>"
        << "<text x=\"28\" y=\"" << ly << "\" font-family=\"sans-serif\" "
        << "font-size=\"13\">" << xml_escape(label) << "</text></g>\n";
    ly += 18.0;
  }
  svg << "</svg>\n";
  return svg.str();
}

void render_scatter(const LabeledCoords& pts, const std::string& path) {
  const std::string svg = render_scatter_svg(pts);
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw std::runtime_error("render: cannot open " + path + " for writing");
  f << svg;
  if (!f) throw std::runtime_error("render: write failed for " + path);
}

}  // namespace lmpn
