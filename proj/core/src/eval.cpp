#include "sgta/eval.hpp"

#include <algorithm>
#include <numeric>
#include <stdexcept>

#include "json.hpp"

namespace sgta {

using Eigen::MatrixXi;

std::map<int, double> hit_at_k(const std::vector<std::vector<int>>& rankings,
                               const std::vector<int>& truths,
                               const std::vector<int>& ks) {
  if (rankings.size() != truths.size())
    throw ConfigError("hit_at_k: rankings/truths size mismatch");
  if (rankings.empty()) throw ConfigError("hit_at_k: no examples");
  const int kmax = *std::max_element(ks.begin(), ks.end());
  std::map<int, double> out;
  for (int k : ks) out[k] = 0.0;
  for (std::size_t i = 0; i < rankings.size(); ++i) {
    if (static_cast<int>(rankings[i].size()) < kmax)
      throw ConfigError("hit_at_k: ranking shorter than k");
    for (int k : ks) {
      auto end = rankings[i].begin() + k;
      if (std::find(rankings[i].begin(), end, truths[i]) != end) out[k] += 1.0;
    }
  }
  for (int k : ks) out[k] /= static_cast<double>(rankings.size());
  return out;
}

MatrixXi bigram_counts(const Corpus& corpus) {
  const int T = static_cast<int>(corpus.vocab.size());
  MatrixXi counts = MatrixXi::Zero(T, T);
  for (const auto& s : corpus.sequences) {
    if (s.split != Split::Train) continue;
    for (std::size_t i = 0; i + 1 < s.topics.size(); ++i)
      counts(s.topics[i], s.topics[i + 1]) += 1;
  }
  return counts;
}

std::vector<int> bigram_baseline(const MatrixXi& counts,
                                 const std::vector<int>& seq) {
  if (seq.empty()) throw ConfigError("bigram_baseline: empty sequence");
  const int last = seq.back();
  std::vector<int> ids(counts.cols());
  std::iota(ids.begin(), ids.end(), 0);
  std::stable_sort(ids.begin(), ids.end(), [&](int a, int b) {
    return counts(last, a) > counts(last, b);
  });
  return ids;
}

std::string EvalReport::to_json() const {
  double prev = -1.0;
  for (const auto& [k, v] : hit) {
    if (v + 1e-12 < prev)
      throw std::logic_error("EvalReport: hit rates not monotone in k");
    prev = v;
  }
  nlohmann::json j;
  for (const auto& [k, v] : hit) j["hit"][std::to_string(k)] = v;
  for (const auto& [k, v] : baseline_hit)
    j["baseline_hit"][std::to_string(k)] = v;
  j["config"] = config_json.empty()
                    ? nlohmann::json::object()
                    : nlohmann::json::parse(config_json);
  j["seed"] = seed;
  j["wall_s"] = wall_s;
  j["ablations"] = ablations;
  j["loss_curve"] = loss_curve;
  return j.dump(2);
}

EvalReport evaluate(const SgtaModel& model, const Corpus& corpus,
                    const CoOccurrenceMatrix& g, Split split) {
  std::vector<std::vector<int>> model_ranks, base_ranks;
  std::vector<int> truths;
  MatrixXi bg = bigram_counts(corpus);
  for (const auto& s : corpus.sequences) {
    if (s.split != split || s.topics.size() < 2) continue;
    std::vector<int> prefix(s.topics.begin(), s.topics.end() - 1);
    model_ranks.push_back(predict_topk(model, g, prefix, s.target, 5));
    base_ranks.push_back(bigram_baseline(bg, prefix));
    truths.push_back(s.topics.back());
  }
  if (truths.empty()) throw ConfigError("evaluate: split has no sequences");
  EvalReport rep;
  rep.hit = hit_at_k(model_ranks, truths, {1, 3, 5});
  rep.baseline_hit = hit_at_k(base_ranks, truths, {1, 3, 5});
  rep.ablations = model.cfg.ablations.active();
  return rep;
}

}  // namespace sgta
