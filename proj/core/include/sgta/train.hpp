#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "sgta/corpus.hpp"
#include "sgta/model.hpp"

namespace sgta {

struct TrainConfig {
  double lr = 1e-5;
  int batch_size = 16;
  int epochs = 10;
  int patience = 5;  // early stop on validation Hit@1
  std::uint64_t seed = 0;
  bool verbose = false;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
};

struct TrainResult {
  std::vector<double> loss_curve;   // mean total loss per epoch
  std::vector<double> valid_hit1;   // per epoch, empty without valid split
  int epochs_run = 0;
  int best_epoch = -1;
};

/// Adam training over all (prefix, next-topic) examples of the train
/// split. Deterministic given (model weights, corpus, config.seed).
TrainResult train(SgtaModel& model, const Corpus& corpus,
                  const CoOccurrenceMatrix& g, const TrainConfig& cfg);

/// Max relative error between analytic and central finite-difference
/// gradients of the total loss, across every trainable parameter entry.
double grad_check(const SgtaModel& model, const CoOccurrenceMatrix& g,
                  const std::vector<int>& topics, std::optional<int> target,
                  int y, double h);

}  // namespace sgta
