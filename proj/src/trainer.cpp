#include "geoflow/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <iostream>
#include <limits>

#include "geoflow/log.hpp"

namespace geoflow {

const char* to_string(Method m) {
  switch (m) {
    case Method::tar: return "tar";
    case Method::tar_n: return "tar-n";
    case Method::erm: return "erm";
    case Method::kl_tilt: return "kl-tilt";
  }
  return "?";
}

Method method_from_string(const std::string& s) {
  if (s == "tar") return Method::tar;
  if (s == "tar-n") return Method::tar_n;
  if (s == "erm") return Method::erm;
  if (s == "kl-tilt") return Method::kl_tilt;
  fail(ErrKind::ConfigInvalid, "unknown method '" + s + "' (tar, tar-n, erm, kl-tilt)");
}

void TrainConfig::validate() const {
  require(epochs >= 1, ErrKind::ConfigInvalid, "epochs must be >= 1");
  require(gamma > 0.0 && std::isfinite(gamma), ErrKind::ConfigInvalid, "gamma must be > 0");
  require(eval_every >= 1, ErrKind::ConfigInvalid, "eval-every must be >= 1");
  if (method == Method::tar_n)
    require(tar_n_k >= 1, ErrKind::ConfigInvalid, "tar-n needs k >= 1");
  if (method == Method::kl_tilt)
    require(flow.beta > 0.0, ErrKind::ConfigInvalid, "kl-tilt needs beta > 0");
}

Density kl_tilt_weights(std::span<const double> loss, double beta) {
  require(beta > 0.0, ErrKind::ZeroBeta, "kl-tilt weights need beta > 0");
  double hi = -std::numeric_limits<double>::infinity();
  for (double l : loss) hi = std::max(hi, l);
  Density q;
  q.values.resize(loss.size());
  double z = 0.0;
  for (std::size_t i = 0; i < loss.size(); ++i) {
    q.values[i] = std::exp((loss[i] - hi) / beta);
    z += q.values[i];
  }
  for (double& v : q.values) v /= z;
  return q;
}

double worst_group_accuracy(const ClassifierParams& p, const FeatureMatrix& x,
                            const LabelVector& y,
                            const std::vector<std::vector<NodeId>>& groups) {
  require(!groups.empty(), ErrKind::EmptyGroup, "no groups given");
  double worst = 1.0;
  for (const auto& grp : groups) {
    require(!grp.empty(), ErrKind::EmptyGroup, "empty group in partition");
    worst = std::min(worst, evaluate(p, x, y, grp).acc);
  }
  return worst;
}

namespace {

// labels restricted to the train mask; every other node is unlabeled so the
// mean-loss imputation applies to it
LabelVector train_view(const LabelVector& full, const std::vector<NodeId>& train_mask) {
  LabelVector out;
  out.num_classes = full.num_classes;
  out.y.assign(full.y.size(), kUnlabeled);
  for (NodeId i : train_mask) out.y[i] = full.y[i];
  return out;
}

double entropy(const Density& q) {
  double h = 0.0;
  for (double v : q.values)
    if (v > 0.0) h -= v * std::log(v);
  return h;
}

}  // namespace

TrainReport train(const Dataset& ds, const TrainConfig& cfg, bool progress) {
  cfg.validate();
  ds.validate();
  const auto t0 = std::chrono::steady_clock::now();

  const FeatureMatrix z = propagate_features(ds.features, ds.graph, cfg.prop);
  const LabelVector y_train = train_view(ds.labels, ds.masks.train);

  // TAR-N runs the flow on the shortcut-augmented graph; the reconnection
  // depends only on the graph and the labeled set, so build it once
  const WeightedGraph* flow_graph = &ds.graph;
  WeightedGraph reconnected;
  if (cfg.method == Method::tar_n) {
    reconnected = reconnect_labeled(ds.graph, ds.masks.train, cfg.tar_n_k);
    flow_graph = &reconnected;
  }

  ClassifierParams params = init_params(ds.labels.num_classes, z.cols, cfg.seed);
  Density q = uniform_density(ds.graph.num_nodes());

  TrainReport report;
  report.best_val_acc = -1.0;

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const std::vector<double> loss = per_node_loss(params, z, y_train);

    double gw2 = 0.0;
    switch (cfg.method) {
      case Method::erm:
        q = uniform_density(ds.graph.num_nodes());
        break;
      case Method::kl_tilt:
        q = kl_tilt_weights(loss, cfg.flow.beta);
        break;
      case Method::tar:
      case Method::tar_n: {
        const Density q0 = cfg.q_warm_start ? q : uniform_density(ds.graph.num_nodes());
        FlowTrace trace = run_flow(q0, loss, *flow_graph, cfg.flow);
        gw2 = trace.cumulative_gw2;
        q = std::move(trace.densities.back());
        break;
      }
    }

    const ClassifierParams grad = weighted_loss_gradient(params, z, y_train, q, cfg.impute_grad);
    params = sgd_step(params, grad, cfg.gamma);

    if ((epoch + 1) % cfg.eval_every == 0 || epoch == cfg.epochs - 1) {
      EpochRecord rec;
      rec.epoch = epoch;
      rec.cumulative_gw2 = gw2;
      for (std::size_t i = 0; i < loss.size(); ++i) rec.train_loss_weighted += q.values[i] * loss[i];
      rec.q_max = *std::max_element(q.values.begin(), q.values.end());
      rec.q_entropy = entropy(q);
      if (!ds.masks.val.empty()) rec.val = evaluate(params, z, ds.labels, ds.masks.val);
      if (!ds.masks.test.empty()) rec.test = evaluate(params, z, ds.labels, ds.masks.test);
      report.records.push_back(rec);

      if (rec.val.acc > report.best_val_acc) {
        report.best_val_acc = rec.val.acc;
        report.best_epoch = epoch;
        report.best_params = params;
        report.test_at_best_val = rec.test;
      }
      if (progress)
        std::cout << "epoch=" << epoch << " train_loss=" << rec.train_loss_weighted
                  << " val_acc=" << rec.val.acc << " test_acc=" << rec.test.acc << "\n";
    }
  }

  report.final_params = params;
  if (report.best_val_acc < 0.0) {  // no validation mask: fall back to final params
    report.best_params = params;
    report.best_epoch = cfg.epochs - 1;
    report.best_val_acc = 0.0;
    if (!ds.masks.test.empty())
      report.test_at_best_val = evaluate(params, z, ds.labels, ds.masks.test);
  }
  if (ds.groups && !ds.groups->empty())
    report.worst_group_acc = worst_group_accuracy(report.best_params, z, ds.labels, *ds.groups);

  report.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return report;
}

std::vector<SweepCell> sweep(const Dataset& ds, const TrainConfig& base_cfg,
                             const std::vector<int>& t_in_grid,
                             const std::vector<double>& beta_grid, bool progress) {
  require(!t_in_grid.empty() && !beta_grid.empty(), ErrKind::ConfigInvalid,
          "sweep grids must be non-empty");
  std::vector<SweepCell> cells;
  cells.reserve(t_in_grid.size() * beta_grid.size());
  for (int t_in : t_in_grid) {
    for (double beta : beta_grid) {
      TrainConfig cfg = base_cfg;
      cfg.flow.t_in = t_in;
      cfg.flow.beta = beta;
      if (progress)
        log::info("sweep cell t_in=" + std::to_string(t_in) + " beta=" + std::to_string(beta));
      cells.push_back({t_in, beta, train(ds, cfg, false)});
    }
  }
  return cells;
}

const std::vector<int>& default_t_in_grid() {
  static const std::vector<int> grid{1, 3, 5, 10, 30, 100};
  return grid;
}

const std::vector<double>& default_beta_grid() {
  static const std::vector<double> grid{1.0, 0.1, 0.01, 0.001, 0.0};
  return grid;
}

}  // namespace geoflow
