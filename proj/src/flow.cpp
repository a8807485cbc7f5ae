#include "geoflow/flow.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace geoflow {

namespace {

// Renormalization is lazy: dividing by the mass sum mixes a globally-summed
// value into every entry, so it only runs when the drift actually exceeds
// this threshold (or a clamp lost mass). Keeps far-away entries bit-exact
// under local perturbations while holding the sum-to-1 invariant well inside
// its 1e-12 tolerance.
constexpr double kRenormThreshold = 1e-13;

void check_loss(std::span<const double> loss, int n) {
  require(static_cast<int>(loss.size()) == n, ErrKind::DimensionMismatch,
          "loss length " + std::to_string(loss.size()) + " vs " + std::to_string(n) + " nodes");
  for (double l : loss)
    require(std::isfinite(l), ErrKind::NonFiniteLoss, "non-finite loss entry");
}

void check_positive(const Density& q) {
  for (double x : q.values)
    require(x > 0.0, ErrKind::NonPositiveDensity, "density entry " + std::to_string(x));
}

// Scratch buffers shared across the steps of one flow run.
struct FlowWorkspace {
  std::vector<double> log_q;
  std::vector<double> vel;
  std::vector<double> dq;
};

// Velocity, derivative and the action kernel 0.5 * sum w*xi*v^2 in one pass.
// Returns the action-kernel value (per unit time squared).
double derivative_pass(const Density& q, std::span<const double> loss,
                       const WeightedGraph& g, double beta, FlowWorkspace& ws) {
  const int n = g.num_nodes();
  const auto& eu = g.edge_u();
  const auto& ev = g.edge_v();
  const auto& ew = g.edge_w();

  if (beta != 0.0) {
    ws.log_q.resize(q.values.size());
    for (std::size_t i = 0; i < q.values.size(); ++i) ws.log_q[i] = std::log(q.values[i]);
  }
  ws.dq.assign(static_cast<std::size_t>(n), 0.0);

  double action_kernel = 0.0;
  for (std::size_t e = 0; e < eu.size(); ++e) {
    const NodeId u = eu[e], v = ev[e];
    double vel = loss[u] - loss[v];
    if (beta != 0.0) vel += beta * (ws.log_q[v] - ws.log_q[u]);
    const double xi = vel > 0.0 ? q.values[v] : q.values[u];
    const double flux = ew[e] * vel * xi;
    ws.dq[u] += flux;
    ws.dq[v] -= flux;
    action_kernel += ew[e] * xi * vel * vel;
  }
  return 0.5 * action_kernel;
}

StepResult euler_step_ws(const Density& q, std::span<const double> loss,
                         const WeightedGraph& g, const FlowConfig& cfg,
                         FlowWorkspace& ws) {
  const double action_kernel = derivative_pass(q, loss, g, cfg.beta, ws);

  // Nodes already hugging the floor are clamped after the step instead of
  // vetoing the global step size: their outflux shrinks with their own mass,
  // so one fixed tau can never lift them back above the floor and halving
  // against them would stall the whole flow. Halving is reserved for
  // interior nodes that would cross the floor within a single step.
  const double interior = 2.0 * cfg.positivity_floor;
  double tau_eff = cfg.tau;
  int shrinks = 0;
  auto admissible = [&](double t) {
    for (std::size_t i = 0; i < q.values.size(); ++i)
      if (q.values[i] >= interior && q.values[i] + t * ws.dq[i] < cfg.positivity_floor)
        return false;
    return true;
  };
  while (!admissible(tau_eff)) {
    if (++shrinks > cfg.max_step_shrinks)
      fail(ErrKind::StepShrinkExhausted,
           "positivity floor unreachable after " + std::to_string(cfg.max_step_shrinks) +
               " halvings (tau=" + std::to_string(cfg.tau) + ", beta=" + std::to_string(cfg.beta) + ")");
    tau_eff *= 0.5;
  }

  StepResult out;
  out.effective_tau = tau_eff;
  out.step_action = tau_eff * tau_eff * action_kernel;
  out.q.values.resize(q.values.size());
  for (std::size_t i = 0; i < q.values.size(); ++i)
    out.q.values[i] = q.values[i] + tau_eff * ws.dq[i];

  double sum = 0.0;
  bool clamped = false;
  for (double& x : out.q.values) {
    if (x < cfg.positivity_floor) {  // rounding guard; the tau search already enforced this
      x = cfg.positivity_floor;
      clamped = true;
    }
    sum += x;
  }
  if (clamped || std::abs(sum - 1.0) > kRenormThreshold) {
    for (double& x : out.q.values) x = std::max(x / sum, cfg.positivity_floor);
  }
  return out;
}

}  // namespace

Density uniform_density(int n) {
  require(n >= 1, ErrKind::ConfigInvalid, "density needs at least one node");
  Density d;
  d.values.assign(static_cast<std::size_t>(n), 1.0 / static_cast<double>(n));
  return d;
}

void validate_density(const Density& q, double floor) {
  require(!q.values.empty(), ErrKind::ConfigInvalid, "empty density");
  double sum = 0.0;
  for (double x : q.values) {
    require(std::isfinite(x) && x >= floor, ErrKind::NonPositiveDensity,
            "density entry " + std::to_string(x) + " below floor");
    sum += x;
  }
  require(std::abs(sum - 1.0) <= 1e-12, ErrKind::NonPositiveDensity,
          "density sums to " + std::to_string(sum));
}

void FlowConfig::validate(int num_nodes) const {
  require(beta >= 0.0 && std::isfinite(beta), ErrKind::ConfigInvalid, "beta must be >= 0");
  require(tau > 0.0 && std::isfinite(tau), ErrKind::ConfigInvalid, "tau must be > 0 and finite");
  require(t_in >= 0, ErrKind::ConfigInvalid, "t-in must be >= 0");
  require(positivity_floor > 0.0 && positivity_floor * num_nodes < 1.0, ErrKind::ConfigInvalid,
          "positivity floor must lie in (0, 1/N)");
  require(max_step_shrinks >= 0, ErrKind::ConfigInvalid, "max-step-shrinks must be >= 0");
}

VelocityField velocity(std::span<const double> loss, const Density& q,
                       const WeightedGraph& g, double beta) {
  check_loss(loss, g.num_nodes());
  check_positive(q);
  require(q.size() == g.num_nodes(), ErrKind::DimensionMismatch, "density size vs graph");

  VelocityField out;
  out.values.resize(g.num_edges());
  const auto& eu = g.edge_u();
  const auto& ev = g.edge_v();
  for (std::size_t e = 0; e < eu.size(); ++e) {
    const NodeId u = eu[e], v = ev[e];
    double vel = loss[u] - loss[v];
    if (beta != 0.0) vel += beta * (std::log(q.values[v]) - std::log(q.values[u]));
    out.values[e] = vel;
  }
  return out;
}

std::vector<double> upwind_flux(const Density& q, const VelocityField& v,
                                const WeightedGraph& g) {
  check_positive(q);
  require(v.values.size() == g.num_edges(), ErrKind::DimensionMismatch,
          "velocity field size vs edge count");
  std::vector<double> flux(g.num_edges());
  const auto& eu = g.edge_u();
  const auto& ev = g.edge_v();
  for (std::size_t e = 0; e < flux.size(); ++e) {
    const double vel = v.values[e];
    const double xi = vel > 0.0 ? q.values[ev[e]] : q.values[eu[e]];
    flux[e] = xi * vel;
  }
  return flux;
}

std::vector<double> density_derivative(const Density& q, std::span<const double> loss,
                                       const WeightedGraph& g, double beta) {
  check_loss(loss, g.num_nodes());
  check_positive(q);
  require(q.size() == g.num_nodes(), ErrKind::DimensionMismatch, "density size vs graph");
  FlowWorkspace ws;
  derivative_pass(q, loss, g, beta, ws);
  return std::move(ws.dq);
}

StepResult euler_step(const Density& q, std::span<const double> loss,
                      const WeightedGraph& g, const FlowConfig& cfg) {
  cfg.validate(g.num_nodes());
  check_loss(loss, g.num_nodes());
  check_positive(q);
  require(q.size() == g.num_nodes(), ErrKind::DimensionMismatch, "density size vs graph");
  FlowWorkspace ws;
  return euler_step_ws(q, loss, g, cfg, ws);
}

FlowTrace run_flow(const Density& q0, std::span<const double> loss,
                   const WeightedGraph& g, const FlowConfig& cfg) {
  cfg.validate(g.num_nodes());
  check_loss(loss, g.num_nodes());
  check_positive(q0);
  require(q0.size() == g.num_nodes(), ErrKind::DimensionMismatch, "density size vs graph");

  FlowTrace trace;
  trace.densities.reserve(static_cast<std::size_t>(cfg.t_in) + 1);
  trace.densities.push_back(q0);
  trace.free_energies.push_back(free_energy(q0, loss, cfg.beta));
  trace.step_actions.reserve(cfg.t_in);
  trace.effective_taus.reserve(cfg.t_in);

  FlowWorkspace ws;
  for (int t = 0; t < cfg.t_in; ++t) {
    StepResult step = euler_step_ws(trace.densities.back(), loss, g, cfg, ws);
    trace.step_actions.push_back(step.step_action);
    trace.effective_taus.push_back(step.effective_tau);
    trace.cumulative_gw2 += step.step_action;
    trace.free_energies.push_back(free_energy(step.q, loss, cfg.beta));
    trace.densities.push_back(std::move(step.q));
  }
  return trace;
}

double free_energy(const Density& q, std::span<const double> loss, double beta) {
  check_loss(loss, q.size());
  check_positive(q);
  double weighted = 0.0, entropy = 0.0;
  for (std::size_t i = 0; i < q.values.size(); ++i) {
    weighted += q.values[i] * loss[i];
    entropy -= q.values[i] * std::log(q.values[i]);
  }
  return weighted + beta * entropy;
}

Density gibbs_stationary(std::span<const double> loss, double beta,
                         const WeightedGraph& g, const Density& q0) {
  require(beta > 0.0, ErrKind::ZeroBeta,
          "stationary density degenerates to an argmax spike at beta = 0");
  check_loss(loss, g.num_nodes());
  check_positive(q0);
  require(q0.size() == g.num_nodes(), ErrKind::DimensionMismatch, "density size vs graph");

  Density out;
  out.values.assign(q0.values.size(), 0.0);
  for (const auto& comp : connected_components(g)) {
    double mass = 0.0, hi = -std::numeric_limits<double>::infinity();
    for (NodeId i : comp) {
      mass += q0.values[i];
      hi = std::max(hi, loss[i]);
    }
    double z = 0.0;
    for (NodeId i : comp) z += std::exp((loss[i] - hi) / beta);
    for (NodeId i : comp) out.values[i] = mass * std::exp((loss[i] - hi) / beta) / z;
  }
  return out;
}

}  // namespace geoflow
