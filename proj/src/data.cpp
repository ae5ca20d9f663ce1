#include "lmpn/data.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <random>
#include <set>
#include <sstream>
#include <stdexcept>

#include "json.hpp"
#include "lmpn/rng.hpp"

namespace lmpn {

namespace {

std::string fold_case(const std::string& w) {
  std::string out = w;
  for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

// First mention's index list defines the span.
std::pair<int, int> mention_span(const nlohmann::json& ent, const std::string& rel,
                                 std::size_t idx, const char* which) {
  if (!ent.is_array() || ent.size() < 3 || !ent[2].is_array() || ent[2].empty() ||
      !ent[2][0].is_array() || ent[2][0].empty()) {
    throw std::runtime_error("fewrel: malformed " + std::string(which) +
                             " entity in relation " + rel + " instance " +
                             std::to_string(idx));
  }
  int lo = ent[2][0][0].get<int>();
  int hi = lo;
  for (const auto& v : ent[2][0]) {
    const int i = v.get<int>();
    lo = std::min(lo, i);
    hi = std::max(hi, i);
  }
  return {lo, hi};
}

// Truncate to max_len keeping both entity spans intact: prefer dropping
// from the back, then the front, then the middle between the spans
// (center-out). Returns false if the spans alone exceed the budget.
bool truncate_instance(TokenizedInstance& inst, int max_len) {
  const int n = static_cast<int>(inst.tokens.size());
  if (n <= max_len) return true;
  const bool head_first = inst.head_begin <= inst.tail_begin;
  const int fb = head_first ? inst.head_begin : inst.tail_begin;
  const int fe = head_first ? inst.head_end : inst.tail_end;
  const int sb = head_first ? inst.tail_begin : inst.head_begin;
  const int se = head_first ? inst.tail_end : inst.head_end;
  std::vector<bool> keep(n, true);
  int count = n;
  // back
  for (int i = n - 1; i > se && count > max_len; --i) {
    keep[i] = false;
    --count;
  }
  // front
  for (int i = 0; i < fb && count > max_len; ++i) {
    keep[i] = false;
    --count;
  }
  // middle, center-out
  if (count > max_len) {
    std::vector<int> mid;
    for (int i = fe + 1; i < sb; ++i) mid.push_back(i);
    const int m = static_cast<int>(mid.size());
    for (int k = 0; k < m && count > max_len; ++k) {
      const int pos = (m / 2) + ((k % 2 == 0) ? k / 2 : -(k / 2 + 1));
      if (pos < 0 || pos >= m || !keep[mid[pos]]) continue;
      keep[mid[pos]] = false;
      --count;
    }
  }
  if (count > max_len) return false;
  std::vector<int> remap(n, -1);
  std::vector<std::string> kept;
  kept.reserve(count);
  for (int i = 0; i < n; ++i) {
    if (keep[i]) {
      remap[i] = static_cast<int>(kept.size());
      kept.push_back(std::move(inst.tokens[i]));
    }
  }
  inst.tokens = std::move(kept);
  inst.head_begin = remap[inst.head_begin];
  inst.head_end = remap[inst.head_end];
  inst.tail_begin = remap[inst.tail_begin];
  inst.tail_end = remap[inst.tail_end];
  return inst.head_begin >= 0 && inst.head_end >= 0 && inst.tail_begin >= 0 &&
         inst.tail_end >= 0;
}

int clip_shift(int offset, int max_rel) {
  return std::clamp(offset, -max_rel, max_rel) + max_rel;
}

}  // namespace

std::vector<std::string> RelationDataset::relation_ids() const {
  std::vector<std::string> ids;
  ids.reserve(relations.size());
  for (const auto& [id, _] : relations) ids.push_back(id);
  return ids;
}

std::size_t RelationDataset::total_instances() const {
  std::size_t n = 0;
  for (const auto& [_, v] : relations) n += v.size();
  return n;
}

int Vocab::lookup(const std::string& word) const {
  auto it = index.find(fold_case(word));
  return it == index.end() ? unk_id() : it->second;
}

RelationDataset load_fewrel(const std::string& path, const std::string& split,
                            int max_len) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("fewrel: cannot open " + path);
  nlohmann::json root;
  try {
    root = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw std::runtime_error("fewrel: parse error in " + path + " at byte " +
                             std::to_string(e.byte) + ": " + e.what());
  }
  if (!root.is_object()) throw std::runtime_error("fewrel: top level must be an object");

  RelationDataset ds;
  ds.split = split;
  for (const auto& [rel, arr] : root.items()) {
    if (!arr.is_array()) {
      throw std::runtime_error("fewrel: relation " + rel + " is not an array");
    }
    std::vector<TokenizedInstance> insts;
    for (std::size_t i = 0; i < arr.size(); ++i) {
      const auto& o = arr[i];
      if (!o.contains("tokens") || !o.contains("h") || !o.contains("t")) {
        throw std::runtime_error("fewrel: missing tokens/h/t in relation " + rel +
                                 " instance " + std::to_string(i));
      }
      TokenizedInstance inst;
      inst.relation_id = rel;
      for (const auto& t : o["tokens"]) inst.tokens.push_back(t.get<std::string>());
      auto [hb, he] = mention_span(o["h"], rel, i, "head");
      auto [tb, te] = mention_span(o["t"], rel, i, "tail");
      inst.head_begin = hb;
      inst.head_end = he;
      inst.tail_begin = tb;
      inst.tail_end = te;
      const int n = static_cast<int>(inst.tokens.size());
      if (n < 2 || hb < 0 || he >= n || tb < 0 || te >= n || hb > he || tb > te) {
        throw std::runtime_error("fewrel: invalid spans in relation " + rel +
                                 " instance " + std::to_string(i));
      }
      const bool overlap = !(he < tb || te < hb);
      if (overlap || !truncate_instance(inst, max_len)) {
        ++ds.dropped_instances;
        continue;
      }
      insts.push_back(std::move(inst));
    }
    ds.relations[rel] = std::move(insts);
  }
  return ds;
}

Vocab build_vocab(const std::vector<const RelationDataset*>& datasets,
                  const std::string& vectors_path, int dim, std::uint64_t seed) {
  std::set<std::string> tokens;
  for (const auto* ds : datasets) {
    for (const auto& [_, insts] : ds->relations) {
      for (const auto& inst : insts) {
        for (const auto& t : inst.tokens) tokens.insert(fold_case(t));
      }
    }
  }

  std::unordered_map<std::string, std::vector<float>> pretrained;
  int file_dim = 0;
  if (!vectors_path.empty()) {
    std::ifstream vf(vectors_path);
    if (!vf) throw std::runtime_error("vectors: cannot open " + vectors_path);
    std::string line;
    long line_no = 0;
    while (std::getline(vf, line)) {
      ++line_no;
      if (line.empty()) continue;
      std::istringstream ss(line);
      std::string word;
      ss >> word;
      std::vector<float> vals;
      float v;
      while (ss >> v) vals.push_back(v);
      if (vals.empty()) {
        throw std::runtime_error("vectors: no values on line " + std::to_string(line_no));
      }
      if (file_dim == 0) {
        file_dim = static_cast<int>(vals.size());
      } else if (static_cast<int>(vals.size()) != file_dim) {
        throw std::runtime_error("vectors: inconsistent dimension on line " +
                                 std::to_string(line_no));
      }
      pretrained.emplace(fold_case(word), std::move(vals));
    }
  }

  Vocab vocab;
  vocab.dim = file_dim > 0 ? file_dim : dim;
  if (vocab.dim < 1) throw std::invalid_argument("build_vocab: dimension must be positive");
  vocab.words.assign(tokens.begin(), tokens.end());
  vocab.words.push_back("<UNK>");
  vocab.words.push_back("<PAD>");
  for (std::size_t i = 0; i < vocab.words.size(); ++i) {
    vocab.index.emplace(vocab.words[i], static_cast<int>(i));
  }

  auto rng = stream_rng(seed, streams::kVocabInit);
  std::uniform_real_distribution<float> unif(-0.25f, 0.25f);
  vocab.embedding.assign(vocab.words.size() * static_cast<std::size_t>(vocab.dim), 0.0f);
  for (std::size_t i = 0; i + 1 < vocab.words.size(); ++i) {  // PAD row stays zero
    float* row = vocab.embedding.data() + i * vocab.dim;
    auto it = pretrained.find(vocab.words[i]);
    if (it != pretrained.end()) {
      std::copy(it->second.begin(), it->second.end(), row);
    } else {
      for (int d = 0; d < vocab.dim; ++d) row[d] = unif(rng);
    }
  }
  return vocab;
}

FiveSegments segment_instance(const TokenizedInstance& inst, const Vocab& vocab) {
  const bool overlap = !(inst.head_end < inst.tail_begin || inst.tail_end < inst.head_begin);
  if (overlap) throw std::invalid_argument("segment_instance: overlapping entity spans");

  const bool head_first = inst.head_begin < inst.tail_begin;
  const int fb = head_first ? inst.head_begin : inst.tail_begin;
  const int fe = head_first ? inst.head_end : inst.tail_end;
  const int sb = head_first ? inst.tail_begin : inst.head_begin;
  const int se = head_first ? inst.tail_end : inst.head_end;
  const int n = static_cast<int>(inst.tokens.size());

  auto range = [&](int lo, int hi) {  // [lo, hi)
    std::pair<std::vector<int>, std::vector<int>> out;
    for (int i = lo; i < hi; ++i) {
      out.first.push_back(vocab.lookup(inst.tokens[i]));
      out.second.push_back(i);
    }
    if (out.first.empty()) {
      out.first.push_back(vocab.pad_id());
      out.second.push_back(-1);
    }
    return out;
  };

  FiveSegments segs;
  auto front = range(0, fb);
  auto first = range(fb, fe + 1);
  auto mid = range(fe + 1, sb);
  auto second = range(sb, se + 1);
  auto back = range(se + 1, n);

  segs.ids[0] = std::move(front.first);
  segs.src[0] = std::move(front.second);
  segs.ids[2] = std::move(mid.first);
  segs.src[2] = std::move(mid.second);
  segs.ids[4] = std::move(back.first);
  segs.src[4] = std::move(back.second);
  // head/tail slots keep semantic roles regardless of textual order
  if (head_first) {
    segs.ids[1] = std::move(first.first);
    segs.src[1] = std::move(first.second);
    segs.ids[3] = std::move(second.first);
    segs.src[3] = std::move(second.second);
  } else {
    segs.ids[1] = std::move(second.first);
    segs.src[1] = std::move(second.second);
    segs.ids[3] = std::move(first.first);
    segs.src[3] = std::move(first.second);
  }
  return segs;
}

PositionFeatures encode_positions(const TokenizedInstance& inst, int max_rel) {
  PositionFeatures pf;
  const int n = static_cast<int>(inst.tokens.size());
  pf.head_idx.reserve(n);
  pf.tail_idx.reserve(n);
  for (int i = 0; i < n; ++i) {
    pf.head_idx.push_back(clip_shift(i - inst.head_begin, max_rel));
    pf.tail_idx.push_back(clip_shift(i - inst.tail_begin, max_rel));
  }
  return pf;
}

EncodedInstance encode_instance(const Vocab& vocab, const TokenizedInstance& inst,
                                int max_rel) {
  EncodedInstance enc;
  enc.token_ids.reserve(inst.tokens.size());
  for (const auto& t : inst.tokens) enc.token_ids.push_back(vocab.lookup(t));
  enc.positions = encode_positions(inst, max_rel);
  enc.segments = segment_instance(inst, vocab);
  for (int s = 0; s < 5; ++s) {
    for (int src : enc.segments.src[s]) {
      if (src < 0) {  // inserted PAD sits at the entity-relative origin
        enc.seg_head_idx[s].push_back(max_rel);
        enc.seg_tail_idx[s].push_back(max_rel);
      } else {
        enc.seg_head_idx[s].push_back(clip_shift(src - inst.head_begin, max_rel));
        enc.seg_tail_idx[s].push_back(clip_shift(src - inst.tail_begin, max_rel));
      }
    }
  }
  return enc;
}

std::pair<RelationDataset, RelationDataset> split_holdout(
    const RelationDataset& dataset, int n_holdout, std::uint64_t seed) {
  const auto ids = dataset.relation_ids();
  const int n = static_cast<int>(ids.size());
  if (n_holdout < 0 || n_holdout >= n) {
    throw std::invalid_argument("split_holdout: n_holdout must be in [0, relation count)");
  }
  std::vector<int> order(n);
  for (int i = 0; i < n; ++i) order[i] = i;
  auto rng = stream_rng(seed, streams::kHoldoutSplit);
  for (int i = 0; i < n_holdout; ++i) {
    std::uniform_int_distribution<int> pick(i, n - 1);
    std::swap(order[i], order[pick(rng)]);
  }
  std::set<int> held(order.begin(), order.begin() + n_holdout);

  RelationDataset reduced, holdout;
  reduced.split = dataset.split;
  holdout.split = "holdout";
  for (int i = 0; i < n; ++i) {
    auto& dst = held.count(i) ? holdout : reduced;
    dst.relations[ids[i]] = dataset.relations.at(ids[i]);
  }
  return {std::move(reduced), std::move(holdout)};
}

}  // namespace lmpn
