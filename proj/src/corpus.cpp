#include "normmark/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <random>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace normmark {

using nlohmann::json;

namespace {

const std::vector<std::string> kSpecialNames = {"<pad>", "<unk>", "<bos>",
                                                "<eos>", "<z>",   "<c>"};

[[noreturn]] void fail(const std::string& msg) {
  throw std::runtime_error(msg);
}

}  // namespace

LabelSet::LabelSet(std::vector<std::string> names) : names_(std::move(names)) {
  if (names_.size() < 2) fail("label set needs at least 2 labels");
  for (size_t i = 0; i < names_.size(); ++i) {
    if (names_[i].empty()) fail("empty label name at index " + std::to_string(i));
    auto [it, inserted] = index_.emplace(names_[i], static_cast<int>(i));
    if (!inserted) fail("duplicate label name: " + names_[i]);
  }
}

LabelSet LabelSet::default_labels() {
  return LabelSet({"none", "Apology", "Criticism", "Greeting", "Request",
                   "Persuasion", "Thanks", "Taking-leave"});
}

LabelSet LabelSet::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail("cannot open label file: " + path);
  std::vector<std::string> names;
  std::string line;
  while (std::getline(in, line)) {
    while (!line.empty() && (line.back() == '\r' || line.back() == '\n'))
      line.pop_back();
    if (!line.empty()) names.push_back(line);
  }
  return LabelSet(std::move(names));
}

void LabelSet::save(const std::string& path) const {
  std::ofstream out(path);
  if (!out) fail("cannot write label file: " + path);
  for (const auto& n : names_) out << n << "\n";
}

int LabelSet::index_of(const std::string& name) const {
  auto it = index_.find(name);
  return it == index_.end() ? -1 : it->second;
}

int Corpus::num_segments() const {
  int n = 0;
  for (const auto& d : dialogues) n += static_cast<int>(d.segments.size());
  return n;
}

int Corpus::num_labeled_segments() const {
  int n = 0;
  for (const auto& d : dialogues)
    for (const auto& s : d.segments)
      if (s.label) ++n;
  return n;
}

Vocabulary::Vocabulary() {
  for (const auto& s : kSpecialNames) add(s);
}

void Vocabulary::add(const std::string& token) {
  auto [it, inserted] = ids_.emplace(token, static_cast<int>(tokens_.size()));
  if (!inserted) fail("duplicate vocabulary token: " + token);
  tokens_.push_back(token);
}

int Vocabulary::id_of(const std::string& token) const {
  auto it = ids_.find(token);
  return it == ids_.end() ? kUnk : it->second;
}

bool Vocabulary::contains(const std::string& token) const {
  return ids_.count(token) > 0;
}

const std::string& Vocabulary::token(int id) const { return tokens_.at(id); }

uint64_t Vocabulary::hash() const {
  uint64_t h = 1469598103934665603ull;
  for (const auto& t : tokens_) {
    for (char c : t) {
      h ^= static_cast<unsigned char>(c);
      h *= 1099511628211ull;
    }
    h ^= 0xff;
    h *= 1099511628211ull;
  }
  return h;
}

void Vocabulary::save(const std::string& path) const {
  std::ofstream out(path);
  if (!out) fail("cannot write vocabulary file: " + path);
  for (const auto& t : tokens_) out << t << "\n";
}

Vocabulary Vocabulary::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail("cannot open vocabulary file: " + path);
  Vocabulary v;
  std::string line;
  int idx = 0;
  while (std::getline(in, line)) {
    while (!line.empty() && (line.back() == '\r' || line.back() == '\n'))
      line.pop_back();
    if (line.empty()) continue;
    if (idx < kNumSpecials) {
      if (line != kSpecialNames[idx])
        fail("vocabulary file is missing special token " +
             kSpecialNames[idx]);
    } else {
      v.add(line);
    }
    ++idx;
  }
  if (idx < kNumSpecials) fail("vocabulary file truncated: " + path);
  return v;
}

std::vector<std::string> tokenize(const std::string& text) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : text) {
    if (std::isspace(static_cast<unsigned char>(c))) {
      if (!cur.empty()) {
        out.push_back(cur);
        cur.clear();
      }
    } else {
      cur.push_back(static_cast<char>(
          std::tolower(static_cast<unsigned char>(c))));
    }
  }
  if (!cur.empty()) out.push_back(cur);
  return out;
}

Corpus parse_jsonl(const std::string& path, const LabelSet& labels) {
  std::ifstream in(path);
  if (!in) fail("cannot open corpus file: " + path);
  Corpus corpus;
  corpus.labels = labels;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json rec;
    try {
      rec = json::parse(line);
    } catch (const json::exception& e) {
      fail("parse error at line " + std::to_string(lineno) + ": " + e.what());
    }
    if (!rec.is_object() || !rec.contains("id") || !rec.contains("segments"))
      fail("parse error at line " + std::to_string(lineno) +
           ": record needs \"id\" and \"segments\"");
    Dialogue d;
    d.id = rec["id"].get<std::string>();
    for (const auto& seg : rec["segments"]) {
      Segment s;
      s.raw_text = seg.at("text").get<std::string>();
      s.words = tokenize(s.raw_text);
      if (seg.contains("label")) {
        const std::string name = seg["label"].get<std::string>();
        const int idx = labels.index_of(name);
        if (idx < 0)
          fail("unknown label \"" + name + "\" at line " +
               std::to_string(lineno));
        s.label = idx;
      }
      d.segments.push_back(std::move(s));
    }
    if (d.segments.empty())
      fail("dialogue without segments at line " + std::to_string(lineno));
    corpus.dialogues.push_back(std::move(d));
  }
  return corpus;
}

void write_jsonl(const Corpus& corpus, const std::string& path) {
  std::ofstream out(path);
  if (!out) fail("cannot write corpus file: " + path);
  for (const auto& d : corpus.dialogues) {
    json rec;
    rec["id"] = d.id;
    rec["segments"] = json::array();
    for (const auto& s : d.segments) {
      json seg;
      seg["text"] = s.raw_text;
      if (s.label) seg["label"] = corpus.labels.name(*s.label);
      rec["segments"].push_back(std::move(seg));
    }
    out << rec.dump() << "\n";
  }
}

Vocabulary build_vocab(const Corpus& corpus, int min_count) {
  if (corpus.dialogues.empty()) fail("build_vocab: empty corpus");
  if (min_count < 1) fail("build_vocab: min_count must be >= 1");
  std::map<std::string, long> counts;
  for (const auto& d : corpus.dialogues)
    for (const auto& s : d.segments)
      for (const auto& w : s.words) ++counts[w];

  std::vector<std::pair<std::string, long>> kept;
  for (const auto& [tok, n] : counts)
    if (n >= min_count) kept.emplace_back(tok, n);
  // frequency desc, then lexicographic
  std::sort(kept.begin(), kept.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });

  Vocabulary v;
  for (const auto& [tok, n] : kept) v.add(tok);
  return v;
}

std::vector<SegmentSequence> window_dialogues(const Corpus& corpus, int window,
                                              int stride, bool pad_last) {
  if (window < 1) fail("window_dialogues: window must be >= 1");
  if (stride < 1) fail("window_dialogues: stride must be >= 1");
  std::vector<SegmentSequence> out;
  for (const auto& d : corpus.dialogues) {
    const int n = static_cast<int>(d.segments.size());
    for (int start = 0; start < n; start += stride) {
      const int avail = n - start;
      if (avail >= window) {
        SegmentSequence seq;
        seq.dialogue_id = d.id;
        seq.start_index = start;
        for (int j = 0; j < window; ++j) {
          seq.segments.push_back(d.segments[start + j]);
          seq.scoring.push_back(true);
        }
        out.push_back(std::move(seq));
      } else if (pad_last && avail > 0) {
        SegmentSequence seq;
        seq.dialogue_id = d.id;
        seq.start_index = start;
        for (int j = 0; j < avail; ++j) {
          seq.segments.push_back(d.segments[start + j]);
          seq.scoring.push_back(true);
        }
        for (int j = avail; j < window; ++j) {
          seq.segments.push_back(Segment{});
          seq.scoring.push_back(false);
        }
        out.push_back(std::move(seq));
        break;  // everything after this start is already covered
      } else {
        break;
      }
    }
  }
  return out;
}

std::tuple<Corpus, Corpus, Corpus> split_corpus(const Corpus& corpus,
                                                double r_train, double r_dev,
                                                double r_test, uint64_t seed) {
  if (r_train <= 0 || r_dev <= 0 || r_test <= 0)
    fail("split_corpus: ratios must be positive");
  if (std::abs(r_train + r_dev + r_test - 1.0) > 1e-9)
    fail("split_corpus: ratios must sum to 1");
  const int n = static_cast<int>(corpus.dialogues.size());
  if (n < 3) fail("split_corpus: need at least 3 dialogues");

  std::vector<int> order(n);
  for (int i = 0; i < n; ++i) order[i] = i;
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);

  int n_train = static_cast<int>(std::llround(n * r_train));
  int n_dev = static_cast<int>(std::llround(n * r_dev));
  n_train = std::max(1, std::min(n_train, n - 2));
  n_dev = std::max(1, std::min(n_dev, n - n_train - 1));

  Corpus train, dev, test;
  train.labels = dev.labels = test.labels = corpus.labels;
  train.split_tag = "train";
  dev.split_tag = "dev";
  test.split_tag = "test";
  for (int i = 0; i < n; ++i) {
    const Dialogue& d = corpus.dialogues[order[i]];
    if (i < n_train)
      train.dialogues.push_back(d);
    else if (i < n_train + n_dev)
      dev.dialogues.push_back(d);
    else
      test.dialogues.push_back(d);
  }
  return {std::move(train), std::move(dev), std::move(test)};
}

std::vector<int> encode_segment(const Segment& segment, const Vocabulary& vocab,
                                int max_len) {
  if (max_len < 3) fail("encode_segment: max_len must be >= 3");
  std::vector<int> ids;
  ids.push_back(kBos);
  const int budget = max_len - 2;
  for (const auto& w : segment.words) {
    if (static_cast<int>(ids.size()) - 1 >= budget) break;
    ids.push_back(vocab.id_of(w));
  }
  ids.push_back(kEos);
  return ids;
}

EncodedDataset encode_sequences(const std::vector<SegmentSequence>& windows,
                                const Vocabulary& vocab, int max_len) {
  EncodedDataset ds;
  ds.vocab_hash = vocab.hash();
  for (const auto& w : windows) {
    EncodedSequence seq;
    seq.dialogue_id = w.dialogue_id;
    seq.start_index = w.start_index;
    for (size_t j = 0; j < w.segments.size(); ++j) {
      EncodedSegment es;
      es.ids = encode_segment(w.segments[j], vocab, max_len);
      es.label = w.segments[j].label;
      es.scoring = w.scoring[j];
      seq.segments.push_back(std::move(es));
    }
    ds.sequences.push_back(std::move(seq));
  }
  return ds;
}

}  // namespace normmark
