#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <fstream>
#include <random>
#include <set>

#include "normmark/corpus.hpp"
#include "testutil.hpp"

using namespace normmark;
using testutil::TempDir;

namespace {

LabelSet two_labels() { return LabelSet({"Greeting", "Request"}); }

void write_file(const std::filesystem::path& p, const std::string& text) {
  std::ofstream out(p);
  out << text;
}

}  // namespace

TEST_CASE("parse_jsonl reads labels and order back") {
  TempDir dir("corpus_parse");
  write_file(dir.path() / "c.jsonl",
             R"({"id":"d0","segments":[{"text":"hi there","label":"Greeting"},)"
             R"({"text":"please help","label":"Greeting"}]})"
             "\n");
  Corpus c = parse_jsonl((dir.path() / "c.jsonl").string(), two_labels());
  REQUIRE(c.dialogues.size() == 1);
  REQUIRE(c.dialogues[0].segments.size() == 2);
  CHECK(c.num_labeled_segments() == 2);
  CHECK(c.dialogues[0].segments[0].raw_text == "hi there");
  CHECK(c.dialogues[0].segments[0].words ==
        std::vector<std::string>{"hi", "there"});
  CHECK(*c.dialogues[0].segments[0].label == 0);
}

TEST_CASE("parse_jsonl: missing label key means unlabeled") {
  TempDir dir("corpus_unlabeled");
  write_file(dir.path() / "c.jsonl",
             R"({"id":"d0","segments":[{"text":"hi","label":"Greeting"},{"text":"ok"}]})"
             "\n");
  Corpus c = parse_jsonl((dir.path() / "c.jsonl").string(), two_labels());
  CHECK(c.num_labeled_segments() == 1);
  CHECK(!c.dialogues[0].segments[1].label.has_value());
}

TEST_CASE("parse_jsonl: unknown label names the line") {
  TempDir dir("corpus_badlabel");
  write_file(dir.path() / "c.jsonl",
             R"({"id":"d0","segments":[{"text":"hi","label":"Greeting"}]})"
             "\n"
             R"({"id":"d1","segments":[{"text":"ty","label":"Gratitude"}]})"
             "\n");
  try {
    parse_jsonl((dir.path() / "c.jsonl").string(), two_labels());
    FAIL("expected labeling error");
  } catch (const std::runtime_error& e) {
    const std::string msg = e.what();
    CHECK(msg.find("Gratitude") != std::string::npos);
    CHECK(msg.find("line 2") != std::string::npos);
  }
}

TEST_CASE("parse_jsonl: malformed line reports its number") {
  TempDir dir("corpus_malformed");
  write_file(dir.path() / "c.jsonl",
             R"({"id":"d0","segments":[{"text":"hi"}]})"
             "\nnot json at all\n");
  try {
    parse_jsonl((dir.path() / "c.jsonl").string(), two_labels());
    FAIL("expected parse error");
  } catch (const std::runtime_error& e) {
    CHECK(std::string(e.what()).find("line 2") != std::string::npos);
  }
}

TEST_CASE("write then parse round-trips order, labels, raw text") {
  Corpus orig = testutil::make_corpus(
      {{{"hello there", 0}, {"anything Else", -1}, {"more words here", 1}},
       {{"second dialogue", 1}, {"final segment", -1}}},
      two_labels());
  TempDir dir("corpus_roundtrip");
  const std::string path = (dir.path() / "c.jsonl").string();
  write_jsonl(orig, path);
  Corpus back = parse_jsonl(path, two_labels());
  REQUIRE(back.dialogues.size() == orig.dialogues.size());
  for (size_t d = 0; d < orig.dialogues.size(); ++d) {
    REQUIRE(back.dialogues[d].segments.size() ==
            orig.dialogues[d].segments.size());
    CHECK(back.dialogues[d].id == orig.dialogues[d].id);
    for (size_t s = 0; s < orig.dialogues[d].segments.size(); ++s) {
      CHECK(back.dialogues[d].segments[s].raw_text ==
            orig.dialogues[d].segments[s].raw_text);
      CHECK(back.dialogues[d].segments[s].label ==
            orig.dialogues[d].segments[s].label);
    }
  }
}

TEST_CASE("build_vocab: min_count filters and UNK substitutes") {
  Corpus c = testutil::make_corpus({{{"a a a b", -1}}}, two_labels());
  Vocabulary v = build_vocab(c, 2);
  CHECK(v.contains("a"));
  CHECK(!v.contains("b"));
  CHECK(v.id_of("b") == kUnk);

  Vocabulary v1 = build_vocab(c, 1);
  CHECK(v1.contains("a"));
  CHECK(v1.contains("b"));
}

TEST_CASE("build_vocab: frequency then lexicographic tie-break") {
  // same content, both insertion orders
  Corpus c1 = testutil::make_corpus({{{"zebra apple", -1}}}, two_labels());
  Corpus c2 = testutil::make_corpus({{{"apple zebra", -1}}}, two_labels());
  Vocabulary v1 = build_vocab(c1, 1);
  Vocabulary v2 = build_vocab(c2, 1);
  // equal frequency: lexicographically smaller gets the smaller id
  CHECK(v1.id_of("apple") == kNumSpecials);
  CHECK(v1.id_of("zebra") == kNumSpecials + 1);
  CHECK(v2.id_of("apple") == v1.id_of("apple"));
  CHECK(v2.id_of("zebra") == v1.id_of("zebra"));

  // higher frequency wins regardless of lexicographic order
  Corpus c3 = testutil::make_corpus({{{"zebra zebra apple", -1}}}, two_labels());
  Vocabulary v3 = build_vocab(c3, 1);
  CHECK(v3.id_of("zebra") == kNumSpecials);
}

TEST_CASE("build_vocab rejects an empty corpus") {
  Corpus empty;
  empty.labels = two_labels();
  CHECK_THROWS(build_vocab(empty, 1));
}

TEST_CASE("window_dialogues basic counts") {
  auto dialogue_of = [&](int n) {
    std::vector<std::pair<std::string, int>> segs;
    for (int i = 0; i < n; ++i) segs.emplace_back("w" + std::to_string(i), 0);
    return segs;
  };

  Corpus ten = testutil::make_corpus({dialogue_of(10)}, two_labels());
  CHECK(window_dialogues(ten, 5, 5, false).size() == 2);

  Corpus three = testutil::make_corpus({dialogue_of(3)}, two_labels());
  CHECK(window_dialogues(three, 5, 5, false).empty());

  Corpus seven = testutil::make_corpus({dialogue_of(7)}, two_labels());
  auto windows = window_dialogues(seven, 5, 1, false);
  // brute-force oracle over start positions
  std::vector<int> expected_starts;
  for (int s = 0; s + 5 <= 7; ++s) expected_starts.push_back(s);
  REQUIRE(windows.size() == expected_starts.size());
  for (size_t i = 0; i < windows.size(); ++i)
    CHECK(windows[i].start_index == expected_starts[i]);
}

TEST_CASE("window_dialogues pad_last emits one flagged short window") {
  auto dialogue_of = [&](int n) {
    std::vector<std::pair<std::string, int>> segs;
    for (int i = 0; i < n; ++i) segs.emplace_back("w" + std::to_string(i), 0);
    return segs;
  };
  Corpus c = testutil::make_corpus({dialogue_of(7)}, two_labels());
  auto windows = window_dialogues(c, 5, 5, true);
  REQUIRE(windows.size() == 2);
  CHECK(windows[1].start_index == 5);
  CHECK(windows[1].segments.size() == 5);
  CHECK(windows[1].scoring == std::vector<bool>{true, true, false, false, false});
}

TEST_CASE("window count formula holds over random corpora") {
  std::mt19937_64 rng(99);
  for (int trial = 0; trial < 20; ++trial) {
    std::uniform_int_distribution<int> nd(1, 14), ld(1, 6), sd(1, 6), dn(1, 5);
    const int L = ld(rng), stride = sd(rng), num_d = dn(rng);
    std::vector<std::vector<std::pair<std::string, int>>> dials;
    long expected = 0;
    for (int d = 0; d < num_d; ++d) {
      const int n = nd(rng);
      std::vector<std::pair<std::string, int>> segs;
      for (int i = 0; i < n; ++i) segs.emplace_back("x", 0);
      dials.push_back(segs);
      if (n >= L) expected += (n - L) / stride + 1;
    }
    Corpus c = testutil::make_corpus(dials, two_labels());
    CHECK(static_cast<long>(window_dialogues(c, L, stride, false).size()) ==
          expected);
  }
}

TEST_CASE("split_corpus: 60/20/20 on ten dialogues and determinism") {
  std::vector<std::vector<std::pair<std::string, int>>> dials;
  for (int i = 0; i < 10; ++i) dials.push_back({{"t" + std::to_string(i), 0}});
  Corpus c = testutil::make_corpus(dials, two_labels());

  auto [tr, dv, te] = split_corpus(c, 0.6, 0.2, 0.2, 7);
  CHECK(tr.dialogues.size() == 6);
  CHECK(dv.dialogues.size() == 2);
  CHECK(te.dialogues.size() == 2);

  auto [tr2, dv2, te2] = split_corpus(c, 0.6, 0.2, 0.2, 7);
  for (size_t i = 0; i < tr.dialogues.size(); ++i)
    CHECK(tr.dialogues[i].id == tr2.dialogues[i].id);

  // partition: union of ids equals input, no overlaps
  std::set<std::string> seen;
  for (const Corpus* part : {&tr, &dv, &te})
    for (const auto& d : part->dialogues) CHECK(seen.insert(d.id).second);
  CHECK(seen.size() == 10);
}

TEST_CASE("split_corpus: different seeds move at least one dialogue") {
  std::vector<std::vector<std::pair<std::string, int>>> dials;
  for (int i = 0; i < 100; ++i) dials.push_back({{"t" + std::to_string(i), 0}});
  Corpus c = testutil::make_corpus(dials, two_labels());
  auto [a_tr, a_dv, a_te] = split_corpus(c, 0.6, 0.2, 0.2, 7);
  auto [b_tr, b_dv, b_te] = split_corpus(c, 0.6, 0.2, 0.2, 8);
  std::set<std::string> a_train_ids, b_train_ids;
  for (const auto& d : a_tr.dialogues) a_train_ids.insert(d.id);
  for (const auto& d : b_tr.dialogues) b_train_ids.insert(d.id);
  CHECK(a_train_ids != b_train_ids);
}

TEST_CASE("split_corpus rejects bad inputs") {
  std::vector<std::vector<std::pair<std::string, int>>> dials = {{{"a", 0}},
                                                                 {{"b", 0}}};
  Corpus two = testutil::make_corpus(dials, two_labels());
  CHECK_THROWS(split_corpus(two, 0.6, 0.2, 0.2, 1));
  dials.push_back({{"c", 0}});
  Corpus three = testutil::make_corpus(dials, two_labels());
  CHECK_THROWS(split_corpus(three, 0.5, 0.2, 0.2, 1));
}

TEST_CASE("encode_segment adds BOS/EOS, truncates, maps unknowns") {
  Corpus c = testutil::make_corpus({{{"a b c", -1}}}, two_labels());
  Vocabulary v = build_vocab(c, 1);
  Segment one;
  one.words = {"a"};
  CHECK(encode_segment(one, v, 8) == std::vector<int>{kBos, v.id_of("a"), kEos});

  Segment three;
  three.words = {"a", "b", "c"};
  CHECK(encode_segment(three, v, 4) ==
        std::vector<int>{kBos, v.id_of("a"), v.id_of("b"), kEos});

  Segment unk;
  unk.words = {"a", "zzz", "b"};
  const auto ids = encode_segment(unk, v, 16);
  CHECK(ids[2] == kUnk);

  CHECK_THROWS(encode_segment(one, v, 2));
}

TEST_CASE("vocabulary save/load preserves ids and hash") {
  Corpus c =
      testutil::make_corpus({{{"alpha beta gamma beta", -1}}}, two_labels());
  Vocabulary v = build_vocab(c, 1);
  TempDir dir("vocab_io");
  const std::string path = (dir.path() / "vocab.txt").string();
  v.save(path);
  Vocabulary back = Vocabulary::load(path);
  CHECK(back.size() == v.size());
  CHECK(back.hash() == v.hash());
  CHECK(back.id_of("beta") == v.id_of("beta"));
}

TEST_CASE("label set basics") {
  LabelSet def = LabelSet::default_labels();
  CHECK(def.size() == 8);
  CHECK(def.index_of("none") == 0);
  CHECK(def.index_of("Taking-leave") == 7);
  CHECK(def.index_of("missing") == -1);
  CHECK_THROWS(LabelSet({"only"}));
  CHECK_THROWS(LabelSet({"dup", "dup"}));
}
