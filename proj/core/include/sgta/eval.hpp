#pragma once

#include <map>
#include <string>
#include <vector>

#include "sgta/corpus.hpp"
#include "sgta/model.hpp"

namespace sgta {

/// Fraction of examples whose truth appears in the top-k ranking, per k.
/// Throws ConfigError when a ranking is shorter than max(ks).
std::map<int, double> hit_at_k(
    const std::vector<std::vector<int>>& rankings,
    const std::vector<int>& truths, const std::vector<int>& ks);

/// Adjacent-pair transition counts from the train split. counts(a, b) is
/// the number of times topic b directly follows topic a.
Eigen::MatrixXi bigram_counts(const Corpus& corpus);

/// All topics ranked by transition count out of the last topic of seq;
/// ties break by ascending id.
std::vector<int> bigram_baseline(const Eigen::MatrixXi& counts,
                                 const std::vector<int>& seq);

struct EvalReport {
  std::map<int, double> hit;           // model Hit@k
  std::map<int, double> baseline_hit;  // bigram baseline Hit@k
  std::vector<double> loss_curve;
  std::vector<std::string> ablations;
  std::uint64_t seed = 0;
  double wall_s = 0.0;
  std::string config_json;  // resolved config snapshot

  std::string to_json() const;  // schema pinned; asserts hit monotonicity
};

/// Hit@{1,3,5} of model and bigram baseline on the last transition of
/// every sequence in `split`.
EvalReport evaluate(const SgtaModel& model, const Corpus& corpus,
                    const CoOccurrenceMatrix& g, Split split);

}  // namespace sgta
