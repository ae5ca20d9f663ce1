#pragma once

// Synthetic relation corpus for self-tests: every relation carries a
// distinct marker word between the entities, so a single conv filter
// separates the classes. Fillers and entity words are shared across
// relations and carry no signal.

#include <cstdint>
#include <random>
#include <string>

#include "lmpn/data.hpp"
#include "lmpn/rng.hpp"

namespace lmpn {

inline RelationDataset make_marker_corpus(int n_relations, int per_relation,
                                          std::uint64_t seed,
                                          const std::string& split = "train",
                                          int relation_offset = 0) {
  static const char* kFillers[] = {"the", "a", "of", "in", "and", "on", "with", "was"};
  static const char* kEntities[] = {"alpha", "beta", "gamma", "delta", "epsilon",
                                    "zeta", "eta", "theta", "iota", "kappa"};
  std::mt19937_64 rng(splitmix64(seed ^ 0xC0FFEEULL));
  std::uniform_int_distribution<int> filler(0, 7);
  std::uniform_int_distribution<int> entity(0, 9);

  RelationDataset ds;
  ds.split = split;
  for (int r = 0; r < n_relations; ++r) {
    const int rid = relation_offset + r;
    const std::string rel = "R" + std::string(rid < 10 ? "0" : "") + std::to_string(rid);
    const std::string marker = "marker_" + std::to_string(rid);
    std::vector<TokenizedInstance> insts;
    for (int i = 0; i < per_relation; ++i) {
      TokenizedInstance inst;
      inst.relation_id = rel;
      inst.tokens = {kFillers[filler(rng)], kEntities[entity(rng)],
                     kFillers[filler(rng)], marker, kFillers[filler(rng)],
                     kEntities[entity(rng)], kFillers[filler(rng)]};
      inst.head_begin = inst.head_end = 1;
      inst.tail_begin = inst.tail_end = 5;
      insts.push_back(std::move(inst));
    }
    ds.relations[rel] = std::move(insts);
  }
  return ds;
}

}  // namespace lmpn
