#pragma once

#include <string>
#include <vector>

#include "geoflow/data.hpp"
#include "geoflow/flow.hpp"
#include "geoflow/model.hpp"

namespace geoflow {

enum class Method { tar, tar_n, erm, kl_tilt };

const char* to_string(Method m);
Method method_from_string(const std::string& s);

struct TrainConfig {
  int epochs = 200;
  double gamma = 0.5;
  FlowConfig flow;
  PropagationConfig prop;
  Method method = Method::tar;
  int tar_n_k = 3;          // TAR-N shortcut fan-out
  std::uint64_t seed = 0;
  int eval_every = 10;
  bool q_warm_start = false;  // carry q across epochs instead of restarting uniform
  bool impute_grad = true;    // route imputed losses' weight into the gradient

  void validate() const;
};

struct EpochRecord {
  int epoch = 0;
  double train_loss_weighted = 0.0;
  Metrics val;
  Metrics test;
  double cumulative_gw2 = 0.0;
  double q_max = 0.0;
  double q_entropy = 0.0;
};

struct TrainReport {
  std::vector<EpochRecord> records;
  ClassifierParams final_params;
  ClassifierParams best_params;  // best validation accuracy
  int best_epoch = 0;
  double best_val_acc = 0.0;
  Metrics test_at_best_val;
  double worst_group_acc = -1.0;  // -1 when the dataset has no groups
  double wall_seconds = 0.0;
};

// Graph-blind tilting baseline: q = softmax(loss / beta).
Density kl_tilt_weights(std::span<const double> loss, double beta);

double worst_group_accuracy(const ClassifierParams& p, const FeatureMatrix& x,
                            const LabelVector& y,
                            const std::vector<std::vector<NodeId>>& groups);

// Alternating scheme: per epoch, compute per-node losses under the current
// params, pick sample weights by the configured method, then take one
// gradient-descent step on the weighted loss. Deterministic given the seed.
TrainReport train(const Dataset& ds, const TrainConfig& cfg, bool progress = false);

struct SweepCell {
  int t_in = 0;
  double beta = 0.0;
  TrainReport report;
};

// One full training run per (t_in, beta) grid cell, shared seed. Default
// grids: t_in in {1,3,5,10,30,100}, beta in {1,0.1,0.01,0.001,0}.
std::vector<SweepCell> sweep(const Dataset& ds, const TrainConfig& base_cfg,
                             const std::vector<int>& t_in_grid,
                             const std::vector<double>& beta_grid, bool progress = false);

const std::vector<int>& default_t_in_grid();
const std::vector<double>& default_beta_grid();

}  // namespace geoflow
