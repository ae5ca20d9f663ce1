#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>

#include "doctest.h"
#include "lmpn/data.hpp"
#include "lmpn/fewshot.hpp"
#include "lmpn/synthetic.hpp"

using namespace lmpn;
namespace fs = std::filesystem;

namespace {

fs::path temp_file(const std::string& name, const std::string& content) {
  const fs::path p = fs::temp_directory_path() / name;
  std::ofstream f(p, std::ios::trunc);
  f << content;
  return p;
}

const char* kFixture = R"({
  "P1": [
    {"tokens": ["Capital", "Gate", "was", "designed", "by", "architectural",
                "firm", "RMJM", "and", "was", "completed", "in", "2011", "."],
     "h": ["capital gate", "Q1", [[0, 1]]],
     "t": ["rmjm", "Q2", [[7]]]},
    {"tokens": ["Alpha", "likes", "Beta"],
     "h": ["alpha", "Q3", [[0]]],
     "t": ["beta", "Q4", [[2]]]}
  ],
  "P2": [
    {"tokens": ["Beta", "made", "Alpha", "happy"],
     "h": ["beta", "Q4", [[0]]],
     "t": ["alpha", "Q3", [[2]]]},
    {"tokens": ["overlap", "case", "here"],
     "h": ["overlap case", "Q5", [[0, 1]]],
     "t": ["case", "Q6", [[1]]]}
  ]
})";

}  // namespace

TEST_CASE("load_fewrel parses the fixture and drops overlapping spans") {
  const auto path = temp_file("lmpn_fixture.json", kFixture);
  const auto ds = load_fewrel(path.string(), "train");
  CHECK(ds.relations.size() == 2);
  CHECK(ds.relations.at("P1").size() == 2);
  CHECK(ds.relations.at("P2").size() == 1);  // overlapping instance dropped
  CHECK(ds.dropped_instances == 1);

  const auto& cg = ds.relations.at("P1")[0];
  CHECK(cg.head_begin == 0);
  CHECK(cg.head_end == 1);
  CHECK(cg.tail_begin == 7);
  CHECK(cg.tail_end == 7);
}

TEST_CASE("load_fewrel error cases") {
  const auto bad = temp_file("lmpn_bad.json", "{\"P1\": [");
  CHECK_THROWS_WITH_AS(load_fewrel(bad.string(), "train"),
                       doctest::Contains("byte"), std::runtime_error);

  const auto missing = temp_file(
      "lmpn_missing.json", R"({"P9": [{"tokens": ["a", "b"], "h": ["a","Q",[[0]]]}]})");
  CHECK_THROWS_WITH_AS(load_fewrel(missing.string(), "train"),
                       doctest::Contains("P9"), std::runtime_error);

  const auto empty = temp_file("lmpn_empty.json", "{}");
  const auto ds = load_fewrel(empty.string(), "train");
  CHECK(ds.relations.empty());
  std::mt19937_64 rng(1);
  CHECK_THROWS_AS(sample_episode(ds, {5, 1, 5}, rng), std::runtime_error);
}

TEST_CASE("load_fewrel truncates long sentences without cutting entity spans") {
  std::string toks = "[";
  for (int i = 0; i < 200; ++i) {
    toks += "\"w" + std::to_string(i) + "\"";
    if (i != 199) toks += ",";
  }
  toks += "]";
  const std::string doc = "{\"P1\": [{\"tokens\": " + toks +
                          ", \"h\": [\"w5\",\"Q\",[[5,6]]], \"t\": [\"w150\",\"Q\",[[150]]]}]}";
  const auto path = temp_file("lmpn_long.json", doc);
  const auto ds = load_fewrel(path.string(), "train", 128);
  const auto& inst = ds.relations.at("P1")[0];
  CHECK(inst.tokens.size() <= 128);
  CHECK(inst.tokens[inst.head_begin] == "w5");
  CHECK(inst.tokens[inst.head_end] == "w6");
  CHECK(inst.tokens[inst.tail_begin] == "w150");
}

TEST_CASE("build_vocab counts, PAD row, and determinism") {
  const auto data = temp_file("lmpn_tiny.json",
                              R"({"P1": [{"tokens": ["The", "the"],
                                  "h": ["the","Q",[[0]]], "t": ["the","Q",[[1]]]}]})");
  const auto ds = load_fewrel(data.string(), "train");
  const auto vecs = temp_file("lmpn_vecs.txt", "the 0.5 0.25 -0.5\n");
  const Vocab v = build_vocab({&ds}, vecs.string(), 0, 9);
  CHECK(v.size() == 3);  // the, UNK, PAD
  CHECK(v.dim == 3);
  CHECK(v.lookup("THE") == 0);
  CHECK(v.embedding[0] == 0.5f);
  for (int d = 0; d < v.dim; ++d) CHECK(v.embedding[v.pad_id() * v.dim + d] == 0.0f);

  // missing words get seeded rows, identical across builds with the same seed
  const Vocab a = build_vocab({&ds}, "", 4, 9);
  const Vocab b = build_vocab({&ds}, "", 4, 9);
  CHECK(a.embedding == b.embedding);
  const Vocab c = build_vocab({&ds}, "", 4, 10);
  CHECK(a.embedding != c.embedding);
}

TEST_CASE("build_vocab rejects inconsistent vector dimensions") {
  const auto data = temp_file("lmpn_tiny2.json",
                              R"({"P1": [{"tokens": ["a", "b"],
                                  "h": ["a","Q",[[0]]], "t": ["b","Q",[[1]]]}]})");
  const auto ds = load_fewrel(data.string(), "train");
  const auto vecs = temp_file("lmpn_badvecs.txt", "a 0.5 0.25\nb 0.5\n");
  CHECK_THROWS_WITH_AS(build_vocab({&ds}, vecs.string(), 0, 1),
                       doctest::Contains("line 2"), std::runtime_error);
}

TEST_CASE("segment_instance on the Capital Gate sentence") {
  const auto path = temp_file("lmpn_fixture.json", kFixture);
  const auto ds = load_fewrel(path.string(), "train");
  const Vocab v = build_vocab({&ds}, "", 4, 1);
  const auto& inst = ds.relations.at("P1")[0];
  const auto segs = segment_instance(inst, v);

  CHECK(segs.ids[0] == std::vector<int>{v.pad_id()});  // empty r_front
  CHECK(segs.ids[1] == std::vector<int>{v.lookup("capital"), v.lookup("gate")});
  CHECK(segs.ids[2] == std::vector<int>{v.lookup("was"), v.lookup("designed"),
                                        v.lookup("by"), v.lookup("architectural"),
                                        v.lookup("firm")});
  CHECK(segs.ids[3] == std::vector<int>{v.lookup("rmjm")});
  CHECK(segs.ids[4] == std::vector<int>{v.lookup("and"), v.lookup("was"),
                                        v.lookup("completed"), v.lookup("in"),
                                        v.lookup("2011"), v.lookup(".")});
}

TEST_CASE("segment_instance boundary and reversed-order cases") {
  const auto path = temp_file("lmpn_fixture.json", kFixture);
  const auto ds = load_fewrel(path.string(), "train");
  const Vocab v = build_vocab({&ds}, "", 4, 1);

  // head at sentence start, tail at sentence end
  const auto& edge = ds.relations.at("P1")[1];
  const auto s1 = segment_instance(edge, v);
  CHECK(s1.ids[0] == std::vector<int>{v.pad_id()});
  CHECK(s1.ids[4] == std::vector<int>{v.pad_id()});

  // tail textually precedes head: slots keep semantic roles
  const auto& rev = ds.relations.at("P2")[0];
  const auto s2 = segment_instance(rev, v);
  CHECK(s2.ids[1] == std::vector<int>{v.lookup("beta")});   // head slot
  CHECK(s2.ids[3] == std::vector<int>{v.lookup("alpha")});  // tail slot
}

TEST_CASE("segment round-trip reconstructs the token sequence") {
  const auto corpus = make_marker_corpus(6, 20, 41);
  const Vocab v = build_vocab({&corpus}, "", 4, 2);
  for (const auto& [rel, insts] : corpus.relations) {
    for (const auto& inst : insts) {
      const auto segs = segment_instance(inst, v);
      // textual order: sort all (src, id) pairs by src, dropping PADs
      std::vector<std::pair<int, int>> flat;
      for (int s = 0; s < 5; ++s) {
        for (std::size_t i = 0; i < segs.src[s].size(); ++i) {
          if (segs.src[s][i] >= 0) flat.emplace_back(segs.src[s][i], segs.ids[s][i]);
        }
      }
      std::sort(flat.begin(), flat.end());
      REQUIRE(flat.size() == inst.tokens.size());
      for (std::size_t i = 0; i < flat.size(); ++i) {
        CHECK(flat[i].first == static_cast<int>(i));
        CHECK(flat[i].second == v.lookup(inst.tokens[i]));
      }
    }
  }
}

TEST_CASE("encode_positions arithmetic, clipping, and range") {
  TokenizedInstance inst;
  inst.tokens = {"a", "b", "c"};
  inst.head_begin = inst.head_end = 0;
  inst.tail_begin = inst.tail_end = 2;
  const auto pf = encode_positions(inst, 10);
  CHECK(pf.head_idx == std::vector<int>{10, 11, 12});  // offsets 0,1,2 shifted
  CHECK(pf.tail_idx == std::vector<int>{8, 9, 10});    // offsets -2,-1,0 shifted
  CHECK(pf.head_idx[inst.head_begin] == 10);

  const auto clipped = encode_positions(inst, 1);
  CHECK(clipped.head_idx == std::vector<int>{1, 2, 2});  // offset 2 clips to +1

  const auto corpus = make_marker_corpus(3, 10, 4);
  for (const auto& [_, insts] : corpus.relations) {
    for (const auto& inst2 : insts) {
      const auto p = encode_positions(inst2, 5);
      for (int i : p.head_idx) CHECK((i >= 0 && i <= 10));
      for (int i : p.tail_idx) CHECK((i >= 0 && i <= 10));
    }
  }
}

TEST_CASE("split_holdout partitions deterministically") {
  const auto corpus = make_marker_corpus(16, 8, 77, "val");
  auto [reduced, holdout] = split_holdout(corpus, 8, 123);
  CHECK(reduced.relations.size() == 8);
  CHECK(holdout.relations.size() == 8);
  for (const auto& [rel, _] : holdout.relations) CHECK(!reduced.relations.count(rel));

  auto [r2, h2] = split_holdout(corpus, 8, 123);
  CHECK(r2.relation_ids() == reduced.relation_ids());

  auto [r3, h3] = split_holdout(corpus, 0, 123);
  CHECK(h3.relations.empty());
  CHECK(r3.relations.size() == corpus.relations.size());

  CHECK_THROWS_AS(split_holdout(corpus, 16, 1), std::invalid_argument);
}

TEST_CASE("loading the same file twice is structurally identical") {
  const auto path = temp_file("lmpn_fixture.json", kFixture);
  const auto a = load_fewrel(path.string(), "train");
  const auto b = load_fewrel(path.string(), "train");
  REQUIRE(a.relation_ids() == b.relation_ids());
  for (const auto& [rel, insts] : a.relations) {
    const auto& other = b.relations.at(rel);
    REQUIRE(insts.size() == other.size());
    for (std::size_t i = 0; i < insts.size(); ++i) {
      CHECK(insts[i].tokens == other[i].tokens);
      CHECK(insts[i].head_begin == other[i].head_begin);
      CHECK(insts[i].tail_end == other[i].tail_end);
    }
  }
}
