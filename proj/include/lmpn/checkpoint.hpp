#pragma once

// Binary checkpoint format:
//   magic "LMPN", u32 LE version (1),
//   u64 LE config-JSON length, UTF-8 config JSON,
//   u32 LE tensor count, then per tensor:
//     u16 LE name length + name, u8 rank, u64 LE dims, f32 LE payload.

#include <cstdint>
#include <string>
#include <vector>

#include "lmpn/config.hpp"
#include "lmpn/data.hpp"
#include "lmpn/encoders.hpp"

namespace lmpn {

struct TensorBlob {
  std::string name;
  std::vector<int> shape;
  std::vector<float> data;
};

struct Checkpoint {
  std::uint32_t version = 1;
  std::string config_json;  // train config + vocab words + training metadata
  std::vector<TensorBlob> tensors;
};

Checkpoint make_checkpoint(const TrainConfig& cfg, const Vocab& vocab,
                           const ModelParams& params, long trained_episodes,
                           double best_val_acc_pct);

void save_checkpoint(const Checkpoint& ckpt, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

struct RestoredModel {
  TrainConfig cfg;
  Vocab vocab;
  ModelParams params;
  long trained_episodes = 0;
  double best_val_acc_pct = 0.0;
};

RestoredModel restore_model(const Checkpoint& ckpt);

}  // namespace lmpn
