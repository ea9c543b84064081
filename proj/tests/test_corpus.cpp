#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "sgta/corpus.hpp"

using namespace sgta;

TEST_SUITE("corpus") {

TEST_CASE("empty input yields empty corpus") {
  Corpus c = parse_corpus("", Split::Train);
  CHECK(c.sequences.empty());
  CHECK(c.vocab.empty());
}

TEST_CASE("minimal record and lexicographic vocab") {
  Corpus c = parse_corpus(R"({"id":"s1","topics":["b","a"]})" "\n",
                          Split::Train);
  REQUIRE(c.vocab_size() == 2);
  CHECK(c.vocab[0].name == "a");
  CHECK(c.vocab[1].name == "b");
  REQUIRE(c.sequences.size() == 1);
  CHECK(c.sequences[0].topics == std::vector<int>{1, 0});
  CHECK(c.name_to_id.at("a") == 0);
}

TEST_CASE("missing topics key names the line") {
  CHECK_THROWS_WITH_AS(parse_corpus(R"({"id":"s1"})" "\n", Split::Train),
                       doctest::Contains("line 1"), ParseError);
}

TEST_CASE("co-occurrence counts, two sequences") {
  Corpus c = parse_corpus(R"({"id":"1","topics":["a","b","c"]})"
                          "\n"
                          R"({"id":"2","topics":["a","c"]})"
                          "\n",
                          Split::Train);
  CoOccurrenceMatrix g = build_cooccurrence(c);
  CHECK(g.counts(0, 2) == 2);
  CHECK(g.counts(0, 1) == 1);
  CHECK(g.counts(1, 2) == 1);
  CHECK(g.counts == g.counts.transpose().eval());
  CHECK(g.counts.diagonal().isZero());
  CHECK(g.marginals(0) == 2);
  CHECK(g.marginals(1) == 1);
  CHECK(g.marginals(2) == 2);
}

TEST_CASE("single-topic sequence has no pairs") {
  Corpus c = parse_corpus(R"({"id":"1","topics":["a"]})" "\n", Split::Train);
  CoOccurrenceMatrix g = build_cooccurrence(c);
  CHECK(g.counts(0, 0) == 0);
  CHECK(g.marginals(0) == 1);
}

TEST_CASE("set semantics: repeats count once") {
  Corpus c =
      parse_corpus(R"({"id":"1","topics":["a","a","b"]})" "\n", Split::Train);
  CoOccurrenceMatrix g = build_cooccurrence(c);
  CHECK(g.counts(0, 1) == 1);
  CHECK(g.marginals(0) == 1);
  CHECK(g.marginals(1) == 1);
}

TEST_CASE("co-occurrence requires a train split") {
  Corpus c = parse_corpus(R"({"id":"1","topics":["a","b"]})" "\n", Split::Valid);
  CHECK_THROWS_AS(build_cooccurrence(c), ConfigError);
}

TEST_CASE("marginals dominate rows on random corpora") {
  SyntheticSpec sp;
  sp.vocab_size = 8;
  sp.order = 1;
  sp.num_sequences = 50;
  sp.seq_len = 6;
  sp.noise = 0.5;
  sp.seed = 3;
  Corpus c = generate_synthetic(sp).corpus;
  CoOccurrenceMatrix g = build_cooccurrence(c);
  for (int i = 0; i < g.size(); ++i)
    for (int j = 0; j < g.size(); ++j)
      CHECK(g.counts(i, j) <= std::min(g.marginals(i), g.marginals(j)));
}

TEST_CASE("top-m neighbors with tie-break") {
  CoOccurrenceMatrix g;
  g.counts = Eigen::MatrixXi::Zero(4, 4);
  g.counts(0, 1) = g.counts(1, 0) = 5;
  g.counts(0, 2) = g.counts(2, 0) = 3;
  g.counts(0, 3) = g.counts(3, 0) = 3;
  g.marginals = Eigen::VectorXi::Zero(4);
  CHECK(topm_cooccurring(g, 0, 2) == std::vector<int>{1, 2});
  CHECK(topm_cooccurring(g, 0, 3) == std::vector<int>{1, 2, 3});

  CoOccurrenceMatrix z;
  z.counts = Eigen::MatrixXi::Zero(3, 3);
  z.marginals = Eigen::VectorXi::Zero(3);
  CHECK(topm_cooccurring(z, 0, 1) == std::vector<int>{1});
  CHECK(topm_cooccurring(z, 1, 1) == std::vector<int>{0});
  CHECK_THROWS_AS(topm_cooccurring(z, 0, 3), ConfigError);
}

TEST_CASE("padding keeps the latest topics, left-padded") {
  PaddedSequence p = pad_truncate({0, 1, 2}, 5, 9);
  CHECK(p.ids == std::vector<int>{9, 9, 0, 1, 2});
  CHECK(p.mask == std::vector<int>{0, 0, 1, 1, 1});
  CHECK(pad_truncate({0, 1, 2, 3}, 2, 9).ids == std::vector<int>{2, 3});
  CHECK(pad_truncate({0}, 1, 9).ids == std::vector<int>{0});
}

TEST_CASE("synthetic generation is seed-deterministic") {
  SyntheticSpec sp;
  sp.vocab_size = 10;
  sp.order = 2;
  sp.num_sequences = 40;
  sp.seq_len = 7;
  sp.noise = 0.3;
  sp.seed = 11;
  SyntheticResult a = generate_synthetic(sp);
  SyntheticResult b = generate_synthetic(sp);
  REQUIRE(a.corpus.sequences.size() == b.corpus.sequences.size());
  for (std::size_t i = 0; i < a.corpus.sequences.size(); ++i)
    CHECK(a.corpus.sequences[i].topics == b.corpus.sequences[i].topics);
  CHECK(a.planted == b.planted);
}

TEST_CASE("zero noise follows the planted table exactly") {
  SyntheticSpec sp;
  sp.vocab_size = 6;
  sp.order = 1;
  sp.num_sequences = 30;
  sp.seq_len = 8;
  sp.noise = 0.0;
  sp.seed = 5;
  SyntheticResult r = generate_synthetic(sp);
  for (const auto& s : r.corpus.sequences)
    for (std::size_t p = 1; p < s.topics.size(); ++p)
      CHECK(s.topics[p] == r.planted.at({s.topics[p - 1]}));
}

TEST_CASE("full noise gives a uniform next-topic distribution") {
  SyntheticSpec sp;
  sp.vocab_size = 10;
  sp.order = 1;
  sp.num_sequences = 2500;
  sp.seq_len = 41;
  sp.noise = 1.0;
  sp.seed = 17;
  Corpus c = generate_synthetic(sp).corpus;
  Eigen::VectorXd freq = Eigen::VectorXd::Zero(10);
  long total = 0;
  for (const auto& s : c.sequences)
    for (std::size_t p = 1; p < s.topics.size(); ++p) {
      freq(s.topics[p]) += 1;
      ++total;
    }
  const double pexp = 0.1;
  const double se = std::sqrt(pexp * (1 - pexp) / total);
  for (int t = 0; t < 10; ++t)
    CHECK(std::abs(freq(t) / total - pexp) < 3 * se);
}

TEST_CASE("80/10/10 split by sequence index") {
  SyntheticSpec sp;
  sp.vocab_size = 5;
  sp.order = 1;
  sp.num_sequences = 100;
  sp.seq_len = 4;
  sp.noise = 0.0;
  sp.seed = 1;
  Corpus c = generate_synthetic(sp).corpus;
  int tr = 0, va = 0, te = 0;
  for (const auto& s : c.sequences) {
    if (s.split == Split::Train) ++tr;
    if (s.split == Split::Valid) ++va;
    if (s.split == Split::Test) ++te;
  }
  CHECK(tr == 80);
  CHECK(va == 10);
  CHECK(te == 10);
}

TEST_CASE("co-occurrence persistence round-trips") {
  Corpus c = parse_corpus(R"({"id":"1","topics":["a","b","c"]})"
                          "\n"
                          R"({"id":"2","topics":["a","c"]})"
                          "\n",
                          Split::Train);
  CoOccurrenceMatrix g = build_cooccurrence(c);
  auto path = std::filesystem::temp_directory_path() / "sgta_cooc_test.json";
  save_cooccurrence(g, {"a", "b", "c"}, path.string());
  auto [g2, names] = load_cooccurrence(path.string());
  CHECK(names == std::vector<std::string>{"a", "b", "c"});
  CHECK(g2.counts == g.counts);
  CHECK(g2.marginals == g.marginals);
  std::filesystem::remove(path);
}

TEST_CASE("corpus save/load round-trips under a fixed vocab") {
  Corpus c = parse_corpus(R"({"id":"1","topics":["a","b"],"target":"b"})" "\n",
                          Split::Test);
  auto path = std::filesystem::temp_directory_path() / "sgta_corpus_test.jsonl";
  save_corpus(c, Split::Test, path.string());
  Corpus back = load_corpus(path.string(), Split::Test, {"a", "b"});
  REQUIRE(back.sequences.size() == 1);
  CHECK(back.sequences[0].topics == c.sequences[0].topics);
  CHECK(back.sequences[0].target == c.sequences[0].target);
  std::filesystem::remove(path);
}

TEST_CASE("fixed vocabulary rejects unknown topics") {
  std::vector<std::string> vocab = {"a"};
  CHECK_THROWS_AS(
      parse_corpus(R"({"id":"1","topics":["zz"]})" "\n", Split::Train, &vocab),
      ParseError);
}

}  // TEST_SUITE
