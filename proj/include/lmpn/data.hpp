#pragma once

// FewRel ingestion: JSON parsing, vocabulary with pretrained vectors,
// entity-relative position features, and five-phrase segmentation.

#include <array>
#include <cstdint>
#include <map>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

namespace lmpn {

struct TokenizedInstance {
  std::vector<std::string> tokens;
  int head_begin = 0, head_end = 0;  // inclusive token spans
  int tail_begin = 0, tail_end = 0;
  std::string relation_id;
};

struct RelationDataset {
  std::map<std::string, std::vector<TokenizedInstance>> relations;
  std::string split;          // train | val | test | holdout
  int dropped_instances = 0;  // overlapping spans or unfittable truncation

  std::vector<std::string> relation_ids() const;
  std::size_t total_instances() const;
};

struct Vocab {
  std::vector<std::string> words;  // id order; UNK then PAD appended last
  std::unordered_map<std::string, int> index;
  int dim = 0;
  std::vector<float> embedding;  // V x dim, row-major; PAD row all zeros

  int size() const { return static_cast<int>(words.size()); }
  int unk_id() const { return size() - 2; }
  int pad_id() const { return size() - 1; }
  int lookup(const std::string& word) const;  // case-folds, falls back to UNK
};

// Token-id segments in the fixed order r_front, head, r_mid, tail, r_back.
// src holds original token indices (-1 for an inserted PAD), so the textual
// sequence can be reconstructed and position features derived per segment.
struct FiveSegments {
  std::array<std::vector<int>, 5> ids;
  std::array<std::vector<int>, 5> src;
};

struct PositionFeatures {
  std::vector<int> head_idx;  // per-token index into the head position table
  std::vector<int> tail_idx;  // in [0, 2*max_rel]
};

// Instance pre-digested for the encoders.
struct EncodedInstance {
  std::vector<int> token_ids;
  PositionFeatures positions;
  FiveSegments segments;
  std::array<std::vector<int>, 5> seg_head_idx;  // per-segment position indices
  std::array<std::vector<int>, 5> seg_tail_idx;
};

RelationDataset load_fewrel(const std::string& path, const std::string& split,
                            int max_len = 128);

// Builds the case-folded vocabulary of all dataset tokens. Words present in
// the vector file get pretrained rows; the rest get seeded uniform(-0.25,0.25)
// rows of dimension `dim` (the file dimension overrides `dim` when given).
Vocab build_vocab(const std::vector<const RelationDataset*>& datasets,
                  const std::string& vectors_path, int dim, std::uint64_t seed);

FiveSegments segment_instance(const TokenizedInstance& inst, const Vocab& vocab);
PositionFeatures encode_positions(const TokenizedInstance& inst, int max_rel);
EncodedInstance encode_instance(const Vocab& vocab, const TokenizedInstance& inst,
                                int max_rel);

// Moves a seeded uniform choice of n_holdout relations into a new dataset.
std::pair<RelationDataset, RelationDataset> split_holdout(
    const RelationDataset& dataset, int n_holdout, std::uint64_t seed);

}  // namespace lmpn
