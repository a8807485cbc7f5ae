#pragma once

#include <optional>
#include <span>
#include <vector>

#include "geoflow/flow.hpp"
#include "geoflow/graph.hpp"

namespace geoflow {

// Row-major N x d feature matrix.
struct FeatureMatrix {
  int rows = 0;
  int cols = 0;
  std::vector<double> data;

  double& at(int r, int c) { return data[static_cast<std::size_t>(r) * cols + c]; }
  double at(int r, int c) const { return data[static_cast<std::size_t>(r) * cols + c]; }
  std::span<const double> row(int r) const {
    return {data.data() + static_cast<std::size_t>(r) * cols, static_cast<std::size_t>(cols)};
  }
  static FeatureMatrix zeros(int rows, int cols) {
    return {rows, cols, std::vector<double>(static_cast<std::size_t>(rows) * cols, 0.0)};
  }
  bool operator==(const FeatureMatrix&) const = default;
};

inline constexpr int kUnlabeled = -1;

// Per-node class index in [0, num_classes) or kUnlabeled.
struct LabelVector {
  std::vector<int> y;
  int num_classes = 0;

  int size() const { return static_cast<int>(y.size()); }
  bool is_labeled(int i) const { return y[i] != kUnlabeled; }
  bool operator==(const LabelVector&) const = default;
};

// Linear softmax head applied to (propagated) features.
struct ClassifierParams {
  int num_classes = 0;
  int dim = 0;
  std::vector<double> weight;  // num_classes x dim, row-major
  std::vector<double> bias;    // num_classes

  double& w(int c, int f) { return weight[static_cast<std::size_t>(c) * dim + f]; }
  double w(int c, int f) const { return weight[static_cast<std::size_t>(c) * dim + f]; }
  bool operator==(const ClassifierParams&) const = default;
};

struct PropagationConfig {
  int hops = 2;
  double self_loop_weight = 1.0;
};

// Glorot-style uniform(-s, s) init with s = sqrt(6/(dim+classes)), zero bias.
ClassifierParams init_params(int num_classes, int dim, std::uint64_t seed);

// hops rounds of X <- D^{-1/2} (A + sI) D^{-1/2} X. hops = 0 is the identity.
FeatureMatrix propagate_features(const FeatureMatrix& x, const WeightedGraph& g,
                                 const PropagationConfig& cfg);

// Softmax probabilities for one node's feature row.
std::vector<double> predict_proba(const ClassifierParams& p, std::span<const double> features);

// Cross-entropy for labeled nodes; unlabeled nodes get the mean of the
// labeled losses.
std::vector<double> per_node_loss(const ClassifierParams& p, const FeatureMatrix& x,
                                  const LabelVector& y);

// Gradient of sum_i q_i * loss_i. Unlabeled entries route their weight
// through the labeled mean when impute_grad is set: each labeled node's
// coefficient becomes q_i + (sum of unlabeled q) / (number labeled).
ClassifierParams weighted_loss_gradient(const ClassifierParams& p, const FeatureMatrix& x,
                                        const LabelVector& y, const Density& q,
                                        bool impute_grad = true);

ClassifierParams sgd_step(const ClassifierParams& p, const ClassifierParams& grad, double gamma);

struct Metrics {
  double acc = 0.0;
  double balanced_acc = 0.0;
  double macro_f1 = 0.0;
  std::optional<double> roc_auc;  // binary tasks only
};

Metrics evaluate(const ClassifierParams& p, const FeatureMatrix& x, const LabelVector& y_true,
                 const std::vector<NodeId>& mask);

}  // namespace geoflow
