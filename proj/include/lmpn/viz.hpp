#pragma once

// Embedding export, exact (quadratic) t-SNE, and SVG scatter rendering.

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "lmpn/checkpoint.hpp"
#include "lmpn/config.hpp"
#include "lmpn/data.hpp"

namespace lmpn {

struct EmbeddingMatrix {
  std::vector<std::string> instance_ids;
  std::vector<std::string> labels;
  std::vector<std::vector<double>> rows;  // n x D
  std::uint64_t seed = 0;
};

// Samples one seeded episode and encodes all support instances.
EmbeddingMatrix export_embeddings(const RestoredModel& model,
                                  const RelationDataset& dataset,
                                  const EpisodeSpec& spec, std::uint64_t seed);

void write_embeddings_csv(const EmbeddingMatrix& m, const std::string& path);
EmbeddingMatrix read_embeddings_csv(const std::string& path);

struct TsneConfig {
  double perplexity = 30.0;
  int iterations = 1000;
  double learning_rate = 200.0;
  double early_exaggeration = 12.0;
  int exaggeration_iters = 250;
  std::uint64_t seed = 0;
};

struct TsneResult {
  std::vector<std::array<double, 2>> coords;
  double p_sum = 0.0;  // symmetrized P total, 1 up to normalization error
};

TsneResult tsne_project(const std::vector<std::vector<double>>& rows,
                        const TsneConfig& cfg);

void write_coords_csv(const EmbeddingMatrix& source, const TsneResult& res,
                      const std::string& path);

struct LabeledCoords {
  std::vector<std::string> instance_ids;
  std::vector<std::string> labels;
  std::vector<std::array<double, 2>> coords;
};
LabeledCoords read_coords_csv(const std::string& path);

// Self-contained SVG: one circle per point, fixed 10-color palette per
// class, legend, 5% autoscale margin.
std::string render_scatter_svg(const LabeledCoords& pts);
void render_scatter(const LabeledCoords& pts, const std::string& path);

}  // namespace lmpn
