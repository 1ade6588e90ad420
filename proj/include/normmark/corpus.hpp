#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <tuple>
#include <vector>

namespace normmark {

// Fixed special token ids, always at the bottom of the vocabulary.
enum SpecialToken : int {
  kPad = 0,
  kUnk = 1,
  kBos = 2,
  kEos = 3,
  kZTok = 4,
  kCTok = 5,
  kNumSpecials = 6,
};

// The ordered set of norm labels; index = position in the source file.
class LabelSet {
 public:
  LabelSet() = default;
  explicit LabelSet(std::vector<std::string> names);
  static LabelSet default_labels();  // K=8 set used throughout the experiments
  static LabelSet load(const std::string& path);
  void save(const std::string& path) const;

  int size() const { return static_cast<int>(names_.size()); }
  const std::string& name(int index) const { return names_.at(index); }
  const std::vector<std::string>& names() const { return names_; }
  // -1 when the name is unknown.
  int index_of(const std::string& name) const;

 private:
  std::vector<std::string> names_;
  std::map<std::string, int> index_;
};

struct Segment {
  std::string raw_text;
  std::vector<std::string> words;  // lowercased whitespace tokens
  std::optional<int> label;        // index into the label set
};

struct Dialogue {
  std::string id;
  std::vector<Segment> segments;
};

struct Corpus {
  std::vector<Dialogue> dialogues;
  LabelSet labels;
  std::string split_tag;  // train|dev|test or empty

  int num_segments() const;
  int num_labeled_segments() const;
};

class Vocabulary {
 public:
  Vocabulary();

  int id_of(const std::string& token) const;  // kUnk when absent
  const std::string& token(int id) const;
  int size() const { return static_cast<int>(tokens_.size()); }
  bool contains(const std::string& token) const;

  // FNV-1a over tokens in id order; identifies the vocabulary in checkpoints.
  uint64_t hash() const;

  void save(const std::string& path) const;
  static Vocabulary load(const std::string& path);

 private:
  friend Vocabulary build_vocab(const Corpus&, int);
  void add(const std::string& token);

  std::vector<std::string> tokens_;
  std::map<std::string, int> ids_;
};

// A window of contiguous segments from one dialogue; short final windows are
// padded with non-scoring empty segments when pad_last is set.
struct SegmentSequence {
  std::vector<Segment> segments;
  std::vector<bool> scoring;  // false only for pad slots
  std::string dialogue_id;
  int start_index = 0;
};

// Model-ready view: token ids per segment, label, scoring flag.
struct EncodedSegment {
  std::vector<int> ids;  // BOS ... EOS, no interior PAD
  std::optional<int> label;
  bool scoring = true;
};

struct EncodedSequence {
  std::vector<EncodedSegment> segments;
  std::string dialogue_id;
  int start_index = 0;
};

struct EncodedDataset {
  std::vector<EncodedSequence> sequences;
  uint64_t vocab_hash = 0;
};

std::vector<std::string> tokenize(const std::string& text);

// One dialogue per line: {"id": str, "segments": [{"text":..., "label":?}]}.
Corpus parse_jsonl(const std::string& path, const LabelSet& labels);
void write_jsonl(const Corpus& corpus, const std::string& path);

Vocabulary build_vocab(const Corpus& corpus, int min_count);

std::vector<SegmentSequence> window_dialogues(const Corpus& corpus, int window,
                                              int stride, bool pad_last);

std::tuple<Corpus, Corpus, Corpus> split_corpus(const Corpus& corpus,
                                                double r_train, double r_dev,
                                                double r_test, uint64_t seed);

std::vector<int> encode_segment(const Segment& segment, const Vocabulary& vocab,
                                int max_len);

EncodedDataset encode_sequences(const std::vector<SegmentSequence>& windows,
                                const Vocabulary& vocab, int max_len);

}  // namespace normmark
