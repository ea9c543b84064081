#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

namespace sgta {

struct ParseError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

enum class Split { Train, Valid, Test };

Split split_from_string(const std::string& s);
std::string to_string(Split s);

struct Topic {
  int id = 0;
  std::string name;
};

/// One ordered topic-id sequence, optionally with a conversation target
/// topic and an opaque text payload (used only by the selection heads).
struct TopicSequence {
  std::string id;
  std::vector<int> topics;
  std::optional<int> target;
  Split split = Split::Train;
  std::string text;
};

struct Corpus {
  std::vector<Topic> vocab;
  std::vector<TopicSequence> sequences;
  std::unordered_map<std::string, int> name_to_id;

  int vocab_size() const { return static_cast<int>(vocab.size()); }
  const std::string& topic_name(int id) const { return vocab.at(id).name; }
};

/// Global pairwise co-occurrence counts over train sequences, set
/// semantics: a sequence contributes at most 1 to each pair it contains.
struct CoOccurrenceMatrix {
  Eigen::MatrixXi counts;     // symmetric, zero diagonal
  Eigen::VectorXi marginals;  // sequences containing topic i
  std::string built_from = "train";

  int size() const { return static_cast<int>(marginals.size()); }
};

struct SyntheticSpec {
  int vocab_size = 0;
  int order = 1;  // transition order, 1 or 2
  int num_sequences = 0;
  int seq_len = 0;
  double noise = 0.0;  // probability of an off-pattern transition
  std::uint64_t seed = 0;
};

struct SyntheticResult {
  Corpus corpus;
  // planted transition table: last `order` topic ids -> next topic id
  std::map<std::vector<int>, int> planted;
};

struct PaddedSequence {
  std::vector<int> ids;   // length n, left-padded with pad_id
  std::vector<int> mask;  // 1 for real positions
};

// Line-delimited JSON records: {"id": str, "topics": [str,...],
// "target": str?, "text": str?}. Vocabulary is the union of topic names,
// sorted lexicographically. The second overload maps names against a
// fixed vocabulary and rejects unknown topics.
Corpus load_corpus(const std::string& path, Split split);
Corpus load_corpus(const std::string& path, Split split,
                   const std::vector<std::string>& vocab);

Corpus parse_corpus(const std::string& text, Split split,
                    const std::vector<std::string>* fixed_vocab = nullptr);

CoOccurrenceMatrix build_cooccurrence(const Corpus& corpus);

/// The m topics with largest co-occurrence against topic i, self excluded,
/// descending count, ties by ascending id.
std::vector<int> topm_cooccurring(const CoOccurrenceMatrix& g, int i, int m);

SyntheticResult generate_synthetic(const SyntheticSpec& spec);

PaddedSequence pad_truncate(const std::vector<int>& topics, int n, int pad_id);

void save_cooccurrence(const CoOccurrenceMatrix& g,
                       const std::vector<std::string>& vocab,
                       const std::string& path);
// returns matrix + vocab names
std::pair<CoOccurrenceMatrix, std::vector<std::string>> load_cooccurrence(
    const std::string& path);

void save_corpus(const Corpus& corpus, Split split, const std::string& path);

}  // namespace sgta
