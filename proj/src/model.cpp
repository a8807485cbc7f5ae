#include "geoflow/model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "geoflow/rng.hpp"

namespace geoflow {

namespace {

// log-sum-exp with max subtraction; also writes softmax probabilities
double softmax_inplace(std::vector<double>& logits) {
  const double hi = *std::max_element(logits.begin(), logits.end());
  double z = 0.0;
  for (double& a : logits) {
    a = std::exp(a - hi);
    z += a;
  }
  for (double& a : logits) a /= z;
  return hi + std::log(z);
}

std::vector<double> logits_for(const ClassifierParams& p, std::span<const double> feat) {
  std::vector<double> out(p.bias);
  for (int c = 0; c < p.num_classes; ++c) {
    double acc = 0.0;
    for (int f = 0; f < p.dim; ++f) acc += p.w(c, f) * feat[f];
    out[c] += acc;
  }
  return out;
}

void check_shapes(const ClassifierParams& p, const FeatureMatrix& x, const LabelVector& y) {
  require(p.dim == x.cols, ErrKind::DimensionMismatch,
          "params dim " + std::to_string(p.dim) + " vs features " + std::to_string(x.cols));
  require(y.size() == x.rows, ErrKind::DimensionMismatch,
          "labels " + std::to_string(y.size()) + " vs features rows " + std::to_string(x.rows));
  for (int i = 0; i < y.size(); ++i)
    require(y.y[i] == kUnlabeled || (y.y[i] >= 0 && y.y[i] < p.num_classes),
            ErrKind::ConfigInvalid, "label out of range at node " + std::to_string(i));
}

}  // namespace

ClassifierParams init_params(int num_classes, int dim, std::uint64_t seed) {
  require(num_classes >= 2, ErrKind::ConfigInvalid, "need at least two classes");
  require(dim >= 1, ErrKind::ConfigInvalid, "need at least one feature");
  ClassifierParams p;
  p.num_classes = num_classes;
  p.dim = dim;
  p.weight.resize(static_cast<std::size_t>(num_classes) * dim);
  p.bias.assign(num_classes, 0.0);
  const double s = std::sqrt(6.0 / (dim + num_classes));
  Rng rng(seed);
  for (double& w : p.weight) w = rng.uniform(-s, s);
  return p;
}

FeatureMatrix propagate_features(const FeatureMatrix& x, const WeightedGraph& g,
                                 const PropagationConfig& cfg) {
  require(x.rows == g.num_nodes(), ErrKind::DimensionMismatch,
          "feature rows " + std::to_string(x.rows) + " vs " + std::to_string(g.num_nodes()) + " nodes");
  require(cfg.hops >= 0, ErrKind::ConfigInvalid, "hops must be >= 0");
  require(cfg.self_loop_weight >= 0.0, ErrKind::ConfigInvalid, "self-loop weight must be >= 0");
  if (cfg.hops == 0) return x;

  const int n = x.rows;
  std::vector<double> inv_sqrt_deg(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    double d = cfg.self_loop_weight;
    for (double w : g.neighbor_weights(i)) d += w;
    inv_sqrt_deg[i] = d > 0.0 ? 1.0 / std::sqrt(d) : 0.0;  // isolated node, s = 0
  }

  FeatureMatrix cur = x;
  FeatureMatrix next = FeatureMatrix::zeros(n, x.cols);
  for (int h = 0; h < cfg.hops; ++h) {
    std::fill(next.data.begin(), next.data.end(), 0.0);
    for (int i = 0; i < n; ++i) {
      const double di = inv_sqrt_deg[i];
      const double self = cfg.self_loop_weight * di * di;
      for (int f = 0; f < x.cols; ++f) next.at(i, f) = self * cur.at(i, f);
      auto nbrs = g.neighbors(i);
      auto wts = g.neighbor_weights(i);
      for (std::size_t k = 0; k < nbrs.size(); ++k) {
        const double coef = wts[k] * di * inv_sqrt_deg[nbrs[k]];
        for (int f = 0; f < x.cols; ++f) next.at(i, f) += coef * cur.at(nbrs[k], f);
      }
    }
    std::swap(cur, next);
  }
  return cur;
}

std::vector<double> predict_proba(const ClassifierParams& p, std::span<const double> features) {
  auto logits = logits_for(p, features);
  softmax_inplace(logits);
  return logits;
}

std::vector<double> per_node_loss(const ClassifierParams& p, const FeatureMatrix& x,
                                  const LabelVector& y) {
  check_shapes(p, x, y);
  std::vector<double> loss(static_cast<std::size_t>(x.rows), 0.0);
  double labeled_sum = 0.0;
  int labeled_count = 0;
  for (int i = 0; i < x.rows; ++i) {
    if (!y.is_labeled(i)) continue;
    auto logits = logits_for(p, x.row(i));
    const double target = logits[y.y[i]];
    const double lse = softmax_inplace(logits);
    loss[i] = lse - target;  // -log softmax, via the stable log-sum-exp path
    labeled_sum += loss[i];
    ++labeled_count;
  }
  require(labeled_count > 0, ErrKind::NoLabeledNodes, "per-node loss needs a labeled node");
  const double mean = labeled_sum / labeled_count;
  for (int i = 0; i < x.rows; ++i)
    if (!y.is_labeled(i)) loss[i] = mean;
  return loss;
}

ClassifierParams weighted_loss_gradient(const ClassifierParams& p, const FeatureMatrix& x,
                                        const LabelVector& y, const Density& q,
                                        bool impute_grad) {
  check_shapes(p, x, y);
  require(q.size() == x.rows, ErrKind::DimensionMismatch, "density size vs feature rows");

  int labeled_count = 0;
  double unlabeled_mass = 0.0;
  for (int i = 0; i < x.rows; ++i) {
    if (y.is_labeled(i))
      ++labeled_count;
    else
      unlabeled_mass += q.values[i];
  }
  require(labeled_count > 0, ErrKind::NoLabeledNodes, "gradient needs a labeled node");
  const double shared = impute_grad ? unlabeled_mass / labeled_count : 0.0;

  ClassifierParams grad;
  grad.num_classes = p.num_classes;
  grad.dim = p.dim;
  grad.weight.assign(p.weight.size(), 0.0);
  grad.bias.assign(p.bias.size(), 0.0);

  for (int i = 0; i < x.rows; ++i) {
    if (!y.is_labeled(i)) continue;
    const double coef = q.values[i] + shared;
    if (coef == 0.0) continue;
    auto proba = logits_for(p, x.row(i));
    softmax_inplace(proba);
    proba[y.y[i]] -= 1.0;  // d loss / d logits
    const auto feat = x.row(i);
    for (int c = 0; c < p.num_classes; ++c) {
      const double gc = coef * proba[c];
      grad.bias[c] += gc;
      for (int f = 0; f < p.dim; ++f) grad.w(c, f) += gc * feat[f];
    }
  }
  return grad;
}

ClassifierParams sgd_step(const ClassifierParams& p, const ClassifierParams& grad, double gamma) {
  require(p.num_classes == grad.num_classes && p.dim == grad.dim, ErrKind::DimensionMismatch,
          "gradient shape vs params");
  ClassifierParams out = p;
  for (std::size_t k = 0; k < out.weight.size(); ++k) out.weight[k] -= gamma * grad.weight[k];
  for (std::size_t k = 0; k < out.bias.size(); ++k) out.bias[k] -= gamma * grad.bias[k];
  return out;
}

Metrics evaluate(const ClassifierParams& p, const FeatureMatrix& x, const LabelVector& y_true,
                 const std::vector<NodeId>& mask) {
  require(!mask.empty(), ErrKind::EmptyMask, "evaluate needs a non-empty mask");
  const int C = p.num_classes;
  std::vector<std::vector<int>> confusion(C, std::vector<int>(C, 0));
  std::vector<std::pair<double, int>> binary_scores;  // (score for class 1, true label)

  for (NodeId i : mask) {
    require(i >= 0 && i < x.rows, ErrKind::IndexOutOfRange, "mask node " + std::to_string(i));
    require(y_true.is_labeled(i), ErrKind::ConfigInvalid,
            "mask node " + std::to_string(i) + " is unlabeled");
    auto proba = predict_proba(p, x.row(i));
    const int pred = static_cast<int>(std::max_element(proba.begin(), proba.end()) - proba.begin());
    confusion[y_true.y[i]][pred] += 1;
    if (C == 2) binary_scores.emplace_back(proba[1], y_true.y[i]);
  }

  Metrics m;
  int correct = 0, total = 0;
  for (int c = 0; c < C; ++c) {
    correct += confusion[c][c];
    total += std::accumulate(confusion[c].begin(), confusion[c].end(), 0);
  }
  m.acc = static_cast<double>(correct) / total;

  // balanced accuracy and macro-F1 over classes present in the mask
  double recall_sum = 0.0, f1_sum = 0.0;
  int present = 0;
  for (int c = 0; c < C; ++c) {
    const int support = std::accumulate(confusion[c].begin(), confusion[c].end(), 0);
    if (support == 0) continue;
    ++present;
    int predicted_c = 0;
    for (int t = 0; t < C; ++t) predicted_c += confusion[t][c];
    const double recall = static_cast<double>(confusion[c][c]) / support;
    const double precision = predicted_c > 0 ? static_cast<double>(confusion[c][c]) / predicted_c : 0.0;
    recall_sum += recall;
    f1_sum += (precision + recall) > 0.0 ? 2.0 * precision * recall / (precision + recall) : 0.0;
  }
  m.balanced_acc = recall_sum / present;
  m.macro_f1 = f1_sum / present;

  if (C == 2) {
    // Mann-Whitney rank statistic; ties contribute 1/2
    std::size_t n_pos = 0, n_neg = 0;
    for (const auto& [score, label] : binary_scores) (label == 1 ? n_pos : n_neg)++;
    if (n_pos > 0 && n_neg > 0) {
      std::sort(binary_scores.begin(), binary_scores.end(),
                [](const auto& a, const auto& b) { return a.first < b.first; });
      double rank_sum = 0.0;
      std::size_t i = 0;
      double rank = 1.0;
      while (i < binary_scores.size()) {
        std::size_t j = i;
        while (j < binary_scores.size() && binary_scores[j].first == binary_scores[i].first) ++j;
        const double avg_rank = rank + 0.5 * static_cast<double>(j - i - 1);
        for (std::size_t k = i; k < j; ++k)
          if (binary_scores[k].second == 1) rank_sum += avg_rank;
        rank += static_cast<double>(j - i);
        i = j;
      }
      m.roc_auc = (rank_sum - 0.5 * static_cast<double>(n_pos) * (n_pos + 1)) /
                  (static_cast<double>(n_pos) * static_cast<double>(n_neg));
    }
  }
  return m;
}

}  // namespace geoflow
