#include "geoflow/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace geoflow {

void TwoNodeInstance::validate() const {
  require(w > 0.0 && std::isfinite(w), ErrKind::NonPositiveWeight, "edge weight must be > 0");
  for (const auto& p : {p0, p1}) {
    require(p[0] > 0.0 && p[0] < 1.0 && p[1] > 0.0 && p[1] < 1.0, ErrKind::NonPositiveDensity,
            "two-node densities must be strictly interior");
    require(std::abs(p[0] + p[1] - 1.0) <= 1e-12, ErrKind::NonPositiveDensity,
            "two-node density must sum to 1");
  }
}

double gw2_two_node_closed_form(const TwoNodeInstance& inst) {
  inst.validate();
  // donor = node whose mass decreases along the transfer
  const int donor = inst.p1[0] < inst.p0[0] ? 0 : 1;
  const double a = std::sqrt(inst.p0[donor]);
  const double b = std::sqrt(inst.p1[donor]);
  return 4.0 / inst.w * (a - b) * (a - b);
}

namespace {

// Action of a piecewise-constant velocity schedule, written in terms of the
// donor-mass path xi_0..xi_K (continuity integrated exactly within a slice):
//   J = (K / w) * sum_k (xi_k - xi_{k+1}) * log(xi_k / xi_{k+1})
// Jointly convex in the xi's, Hessian tridiagonal.
struct ChainObjective {
  double w;
  double slices;  // K

  double value(const std::vector<double>& xi) const {
    double j = 0.0;
    for (std::size_t k = 0; k + 1 < xi.size(); ++k)
      j += (xi[k] - xi[k + 1]) * (std::log(xi[k]) - std::log(xi[k + 1]));
    return j * slices / w;
  }

  // gradient w.r.t. interior points xi_1..xi_{K-1}
  void gradient(const std::vector<double>& xi, std::vector<double>& g) const {
    const std::size_t m = xi.size() - 2;
    g.assign(m, 0.0);
    for (std::size_t k = 1; k + 1 < xi.size(); ++k) {
      const double left = -(std::log(xi[k - 1]) - std::log(xi[k])) - (xi[k - 1] - xi[k]) / xi[k];
      const double right = (std::log(xi[k]) - std::log(xi[k + 1])) + (xi[k] - xi[k + 1]) / xi[k];
      g[k - 1] = (left + right) * slices / w;
    }
  }

  // tridiagonal Hessian over interior points
  void hessian(const std::vector<double>& xi, std::vector<double>& diag,
               std::vector<double>& off) const {
    const std::size_t m = xi.size() - 2;
    diag.assign(m, 0.0);
    off.assign(m > 0 ? m - 1 : 0, 0.0);
    for (std::size_t k = 1; k + 1 < xi.size(); ++k) {
      diag[k - 1] = (2.0 / xi[k] + (xi[k - 1] + xi[k + 1]) / (xi[k] * xi[k])) * slices / w;
      if (k + 2 < xi.size())
        off[k - 1] = -(1.0 / xi[k] + 1.0 / xi[k + 1]) * slices / w;
    }
  }
};

// Solve (tridiag) x = b in place via the Thomas algorithm.
void solve_tridiag(std::vector<double> diag, std::vector<double> off, std::vector<double>& b) {
  const std::size_t n = diag.size();
  for (std::size_t i = 1; i < n; ++i) {
    const double m = off[i - 1] / diag[i - 1];
    diag[i] -= m * off[i - 1];
    b[i] -= m * b[i - 1];
  }
  b[n - 1] /= diag[n - 1];
  for (std::size_t i = n - 1; i-- > 0;) b[i] = (b[i] - off[i] * b[i + 1]) / diag[i];
}

}  // namespace

double gw2_two_node_numeric(const TwoNodeInstance& inst, int time_steps) {
  inst.validate();
  require(time_steps >= 10, ErrKind::ConfigInvalid, "need at least 10 time slices");
  if (inst.p0 == inst.p1) return 0.0;

  const int donor = inst.p1[0] < inst.p0[0] ? 0 : 1;
  const double start = inst.p0[donor];
  const double end = inst.p1[donor];

  const std::size_t K = static_cast<std::size_t>(time_steps);
  ChainObjective obj{inst.w, static_cast<double>(K)};
  std::vector<double> xi(K + 1);
  for (std::size_t k = 0; k <= K; ++k)
    xi[k] = start + (end - start) * static_cast<double>(k) / static_cast<double>(K);

  std::vector<double> grad, diag, off, step;
  double value = obj.value(xi);
  for (int iter = 0; iter < 100; ++iter) {
    obj.gradient(xi, grad);
    obj.hessian(xi, diag, off);
    step = grad;
    solve_tridiag(diag, off, step);

    double decrement = 0.0;  // grad . H^{-1} grad, >= 0 by convexity
    for (std::size_t k = 0; k < grad.size(); ++k) decrement += grad[k] * step[k];
    if (decrement <= 1e-13 * (1.0 + std::abs(value))) return value;

    // Armijo backtracking, staying strictly inside (0, 1)
    double t = 1.0;
    bool moved = false;
    for (int bt = 0; bt < 60; ++bt, t *= 0.5) {
      std::vector<double> trial = xi;
      bool ok = true;
      for (std::size_t k = 1; k < K; ++k) {
        trial[k] = xi[k] - t * step[k - 1];
        if (trial[k] <= 0.0 || trial[k] >= 1.0) {
          ok = false;
          break;
        }
      }
      if (!ok) continue;
      const double trial_value = obj.value(trial);
      if (trial_value <= value - 0.25 * t * decrement) {
        xi = std::move(trial);
        value = trial_value;
        moved = true;
        break;
      }
    }
    if (!moved) return value;  // line search stalled at float resolution
  }
  fail(ErrKind::NonConvergence, "two-node action minimization did not converge");
}

Theorem1Result check_theorem1_two_node(std::array<double, 2> loss, std::array<double, 2> p,
                                       double beta, double tau, int grid) {
  require(grid >= 1000, ErrKind::ConfigInvalid, "theorem-1 grid must be >= 1000");
  require(beta > 0.0, ErrKind::ConfigInvalid, "theorem-1 check needs beta > 0");
  require(tau > 0.0, ErrKind::ConfigInvalid, "theorem-1 check needs tau > 0");
  TwoNodeInstance base{1.0, p, p};
  base.validate();

  const double floor = 1e-9;
  const double lambda = 1.0 / (2.0 * tau);

  auto objective_l = [&](double q1) {
    const double q0 = 1.0 - q1;
    return q0 * loss[0] + q1 * loss[1] - beta * (q0 * std::log(q0) + q1 * std::log(q1));
  };
  auto q1_at = [&](int c) {
    return floor + (1.0 - 2.0 * floor) * (static_cast<double>(c) + 0.5) / grid;
  };

  // one pass computes both curves, reused by both grid searches so the
  // epsilon comparison is exact
  std::vector<double> lvals(static_cast<std::size_t>(grid)), gw(static_cast<std::size_t>(grid));
  for (int c = 0; c < grid; ++c) {
    const double q1 = q1_at(c);
    lvals[c] = objective_l(q1);
    gw[c] = gw2_two_node_closed_form({1.0, p, {1.0 - q1, q1}});
  }

  int best_prox = 0;
  double best_prox_val = -std::numeric_limits<double>::infinity();
  for (int c = 0; c < grid; ++c) {
    const double v = lvals[c] - lambda * gw[c];
    if (v > best_prox_val) {
      best_prox_val = v;
      best_prox = c;
    }
  }
  const double epsilon = gw[best_prox];

  int best_ball = -1;
  double best_ball_val = -std::numeric_limits<double>::infinity();
  for (int c = 0; c < grid; ++c) {
    if (gw[c] > epsilon) continue;
    if (lvals[c] > best_ball_val) {
      best_ball_val = lvals[c];
      best_ball = c;
    }
  }

  return {q1_at(best_prox), q1_at(best_ball), epsilon};
}

std::vector<double> check_theorem2_trend(const WeightedGraph& g, std::span<const double> loss,
                                         double beta, FlowConfig cfg,
                                         const std::vector<int>& checkpoints) {
  require(connected_components(g).size() == 1, ErrKind::DisconnectedGraph,
          "theorem-2 trend needs a connected graph");
  require(beta > 0.0, ErrKind::ZeroBeta, "theorem-2 trend needs beta > 0");
  require(!checkpoints.empty(), ErrKind::ConfigInvalid, "no checkpoints");
  cfg.beta = beta;
  cfg.t_in = *std::max_element(checkpoints.begin(), checkpoints.end());

  const Density q0 = uniform_density(g.num_nodes());
  const double base = free_energy(q0, loss, beta);
  const Density gibbs = gibbs_stationary(loss, beta, g, q0);
  const double top = free_energy(gibbs, loss, beta);
  require(top - base > 1e-12, ErrKind::ConfigInvalid,
          "loss is flat: the stationary density equals the start, ratio undefined");

  const FlowTrace trace = run_flow(q0, loss, g, cfg);
  std::vector<double> ratios;
  ratios.reserve(checkpoints.size());
  for (int t : checkpoints) {
    require(t >= 0 && t <= cfg.t_in, ErrKind::ConfigInvalid, "bad checkpoint");
    ratios.push_back((trace.free_energies[static_cast<std::size_t>(t)] - base) / (top - base));
  }
  return ratios;
}

std::vector<double> finite_diff_gradient(const std::function<double(std::span<const double>)>& fn,
                                         std::span<const double> x, double eps) {
  require(eps > 0.0, ErrKind::ConfigInvalid, "eps must be > 0");
  std::vector<double> point(x.begin(), x.end());
  std::vector<double> grad(x.size());
  for (std::size_t i = 0; i < point.size(); ++i) {
    const double saved = point[i];
    point[i] = saved + eps;
    const double up = fn(point);
    point[i] = saved - eps;
    const double down = fn(point);
    point[i] = saved;
    grad[i] = (up - down) / (2.0 * eps);
  }
  return grad;
}

Density fine_step_reference(const Density& q0, std::span<const double> loss,
                            const WeightedGraph& g, double beta, double total_time, int steps) {
  require(steps >= 1, ErrKind::ConfigInvalid, "steps must be >= 1");
  require(total_time > 0.0, ErrKind::ConfigInvalid, "total_time must be > 0");
  FlowConfig cfg;
  cfg.beta = beta;
  cfg.tau = total_time / steps;
  cfg.t_in = steps;
  return run_flow(q0, loss, g, cfg).densities.back();
}

}  // namespace geoflow
