#include "sgta/corpus.hpp"

#include <algorithm>
#include <fstream>
#include <random>
#include <set>
#include <sstream>

#include "json.hpp"

namespace sgta {

using nlohmann::json;

Split split_from_string(const std::string& s) {
  if (s == "train") return Split::Train;
  if (s == "valid") return Split::Valid;
  if (s == "test") return Split::Test;
  throw ConfigError("unknown split: " + s);
}

std::string to_string(Split s) {
  switch (s) {
    case Split::Train: return "train";
    case Split::Valid: return "valid";
    case Split::Test: return "test";
  }
  return "?";
}

namespace {

struct RawRecord {
  std::string id;
  std::vector<std::string> topics;
  std::optional<std::string> target;
  std::string text;
};

RawRecord parse_line(const std::string& line, int lineno) {
  json j;
  try {
    j = json::parse(line);
  } catch (const json::parse_error& e) {
    throw ParseError("line " + std::to_string(lineno) + ": invalid JSON: " +
                     e.what());
  }
  if (!j.is_object() || !j.contains("topics") || !j["topics"].is_array()) {
    throw ParseError("line " + std::to_string(lineno) +
                     ": missing or invalid \"topics\" array");
  }
  RawRecord r;
  r.id = j.value("id", std::string{});
  for (const auto& t : j["topics"]) {
    if (!t.is_string()) {
      throw ParseError("line " + std::to_string(lineno) +
                       ": topic entries must be strings");
    }
    r.topics.push_back(t.get<std::string>());
  }
  if (r.topics.empty()) {
    throw ParseError("line " + std::to_string(lineno) + ": empty topic list");
  }
  if (j.contains("target")) r.target = j["target"].get<std::string>();
  r.text = j.value("text", std::string{});
  return r;
}

}  // namespace

Corpus parse_corpus(const std::string& text, Split split,
                    const std::vector<std::string>* fixed_vocab) {
  std::vector<RawRecord> records;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    records.push_back(parse_line(line, lineno));
  }

  Corpus c;
  if (fixed_vocab) {
    for (int i = 0; i < static_cast<int>(fixed_vocab->size()); ++i) {
      c.vocab.push_back({i, (*fixed_vocab)[i]});
      c.name_to_id[(*fixed_vocab)[i]] = i;
    }
  } else {
    std::set<std::string> names;
    for (const auto& r : records) {
      names.insert(r.topics.begin(), r.topics.end());
      if (r.target) names.insert(*r.target);
    }
    int id = 0;
    for (const auto& n : names) {
      c.vocab.push_back({id, n});
      c.name_to_id[n] = id;
      ++id;
    }
  }

  auto lookup = [&](const std::string& name) {
    auto it = c.name_to_id.find(name);
    if (it == c.name_to_id.end())
      throw ParseError("unknown topic name: " + name);
    return it->second;
  };
  for (const auto& r : records) {
    TopicSequence s;
    s.id = r.id;
    s.split = split;
    s.text = r.text;
    for (const auto& t : r.topics) s.topics.push_back(lookup(t));
    if (r.target) s.target = lookup(*r.target);
    c.sequences.push_back(std::move(s));
  }
  return c;
}

static std::string read_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot open file: " + path);
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

Corpus load_corpus(const std::string& path, Split split) {
  return parse_corpus(read_file(path), split);
}

Corpus load_corpus(const std::string& path, Split split,
                   const std::vector<std::string>& vocab) {
  return parse_corpus(read_file(path), split, &vocab);
}

CoOccurrenceMatrix build_cooccurrence(const Corpus& corpus) {
  const int T = corpus.vocab_size();
  CoOccurrenceMatrix g;
  g.counts = Eigen::MatrixXi::Zero(T, T);
  g.marginals = Eigen::VectorXi::Zero(T);

  bool any_train = false;
  for (const auto& s : corpus.sequences) {
    if (s.split != Split::Train) continue;
    any_train = true;
    std::set<int> uniq(s.topics.begin(), s.topics.end());
    for (int t : uniq) g.marginals[t] += 1;
    for (auto it = uniq.begin(); it != uniq.end(); ++it) {
      for (auto jt = std::next(it); jt != uniq.end(); ++jt) {
        g.counts(*it, *jt) += 1;
        g.counts(*jt, *it) += 1;
      }
    }
  }
  if (!any_train) throw ConfigError("corpus has no train sequences");
  return g;
}

std::vector<int> topm_cooccurring(const CoOccurrenceMatrix& g, int i, int m) {
  const int T = g.size();
  if (m > T - 1) throw ConfigError("topm_cooccurring: m exceeds |T|-1");
  std::vector<int> ids;
  ids.reserve(T - 1);
  for (int k = 0; k < T; ++k)
    if (k != i) ids.push_back(k);
  std::stable_sort(ids.begin(), ids.end(), [&](int a, int b) {
    if (g.counts(i, a) != g.counts(i, b)) return g.counts(i, a) > g.counts(i, b);
    return a < b;
  });
  ids.resize(m);
  return ids;
}

SyntheticResult generate_synthetic(const SyntheticSpec& spec) {
  if (spec.vocab_size < 2) throw ConfigError("vocab_size must be >= 2");
  if (spec.order != 1 && spec.order != 2)
    throw ConfigError("order must be 1 or 2");
  if (spec.num_sequences < 1 || spec.seq_len < 1)
    throw ConfigError("num_sequences and seq_len must be positive");
  if (spec.noise < 0.0 || spec.noise > 1.0)
    throw ConfigError("noise must lie in [0,1]");

  const int V = spec.vocab_size;
  std::mt19937_64 rng(spec.seed);
  std::uniform_int_distribution<int> utopic(0, V - 1);
  std::uniform_real_distribution<double> unif(0.0, 1.0);

  SyntheticResult out;
  // Planted transition table over all order-tuples.
  if (spec.order == 1) {
    for (int a = 0; a < V; ++a) out.planted[{a}] = utopic(rng);
  } else {
    for (int a = 0; a < V; ++a)
      for (int b = 0; b < V; ++b) out.planted[{a, b}] = utopic(rng);
  }

  int width = 1;
  for (int v = V - 1; v >= 10; v /= 10) ++width;
  auto topic_name = [&](int i) {
    std::ostringstream ss;
    ss << "t";
    std::string num = std::to_string(i);
    ss << std::string(width - static_cast<int>(num.size()), '0') << num;
    return ss.str();
  };

  Corpus& c = out.corpus;
  for (int i = 0; i < V; ++i) {
    c.vocab.push_back({i, topic_name(i)});
    c.name_to_id[topic_name(i)] = i;
  }

  const int n_train = static_cast<int>(spec.num_sequences * 0.8);
  const int n_valid = static_cast<int>(spec.num_sequences * 0.1);
  for (int s = 0; s < spec.num_sequences; ++s) {
    TopicSequence seq;
    seq.id = "syn" + std::to_string(s);
    seq.split = s < n_train          ? Split::Train
                : s < n_train + n_valid ? Split::Valid
                                        : Split::Test;
    for (int p = 0; p < spec.seq_len; ++p) {
      if (p < spec.order) {
        seq.topics.push_back(utopic(rng));
        continue;
      }
      std::vector<int> state(seq.topics.end() - spec.order, seq.topics.end());
      // draw the noise coin first so the planted path consumes a fixed
      // number of rng variates per position
      double u = unif(rng);
      int noisy = utopic(rng);
      seq.topics.push_back(u < spec.noise ? noisy : out.planted.at(state));
    }
    c.sequences.push_back(std::move(seq));
  }
  return out;
}

PaddedSequence pad_truncate(const std::vector<int>& topics, int n, int pad_id) {
  if (n < 1) throw ConfigError("window length must be >= 1");
  PaddedSequence p;
  p.ids.assign(n, pad_id);
  p.mask.assign(n, 0);
  const int l = static_cast<int>(topics.size());
  const int keep = std::min(l, n);
  for (int i = 0; i < keep; ++i) {
    p.ids[n - keep + i] = topics[l - keep + i];
    p.mask[n - keep + i] = 1;
  }
  return p;
}

void save_cooccurrence(const CoOccurrenceMatrix& g,
                       const std::vector<std::string>& vocab,
                       const std::string& path) {
  json j;
  j["vocab"] = vocab;
  std::vector<std::vector<int>> counts(g.size());
  for (int i = 0; i < g.size(); ++i) {
    counts[i].resize(g.size());
    for (int k = 0; k < g.size(); ++k) counts[i][k] = g.counts(i, k);
  }
  j["counts"] = counts;
  std::vector<int> marg(g.marginals.data(), g.marginals.data() + g.size());
  j["marginals"] = marg;
  std::ofstream f(path);
  if (!f) throw ConfigError("cannot write file: " + path);
  f << j.dump() << "\n";
}

std::pair<CoOccurrenceMatrix, std::vector<std::string>> load_cooccurrence(
    const std::string& path) {
  json j = json::parse(read_file(path));
  std::vector<std::string> vocab = j.at("vocab").get<std::vector<std::string>>();
  auto counts = j.at("counts").get<std::vector<std::vector<int>>>();
  auto marg = j.at("marginals").get<std::vector<int>>();
  const int T = static_cast<int>(vocab.size());
  if (static_cast<int>(counts.size()) != T || static_cast<int>(marg.size()) != T)
    throw ParseError("co-occurrence file dimensions disagree with vocab");
  CoOccurrenceMatrix g;
  g.counts.resize(T, T);
  g.marginals.resize(T);
  for (int i = 0; i < T; ++i) {
    if (static_cast<int>(counts[i].size()) != T)
      throw ParseError("co-occurrence row has wrong length");
    for (int k = 0; k < T; ++k) g.counts(i, k) = counts[i][k];
    g.marginals[i] = marg[i];
  }
  return {std::move(g), std::move(vocab)};
}

void save_corpus(const Corpus& corpus, Split split, const std::string& path) {
  std::ofstream f(path);
  if (!f) throw ConfigError("cannot write file: " + path);
  for (const auto& s : corpus.sequences) {
    if (s.split != split) continue;
    json j;
    j["id"] = s.id;
    std::vector<std::string> names;
    for (int t : s.topics) names.push_back(corpus.topic_name(t));
    j["topics"] = names;
    if (s.target) j["target"] = corpus.topic_name(*s.target);
    if (!s.text.empty()) j["text"] = s.text;
    f << j.dump() << "\n";
  }
}

}  // namespace sgta
