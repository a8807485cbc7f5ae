#pragma once

#include <span>
#include <vector>

#include "geoflow/graph.hpp"

namespace geoflow {

// Probability vector over the nodes (the per-node sample weights).
struct Density {
  std::vector<double> values;

  int size() const { return static_cast<int>(values.size()); }
  double operator[](std::size_t i) const { return values[i]; }
  bool operator==(const Density&) const = default;
};

Density uniform_density(int n);

// Sum within 1e-12 of 1 and every entry >= floor.
void validate_density(const Density& q, double floor = 0.0);

// Per-edge transport velocities, one value per canonical undirected edge
// (oriented u < v); the reverse orientation is the negation.
struct VelocityField {
  std::vector<double> values;  // aligned with WeightedGraph::edge_u()
};

struct FlowConfig {
  double beta = 0.01;
  double tau = 0.01;
  int t_in = 10;
  double positivity_floor = 1e-12;
  int max_step_shrinks = 40;

  void validate(int num_nodes) const;
};

struct FlowTrace {
  std::vector<Density> densities;     // length t_in + 1
  std::vector<double> step_actions;   // per-step squared-distance estimates
  std::vector<double> free_energies;  // length t_in + 1
  std::vector<double> effective_taus; // length t_in
  double cumulative_gw2 = 0.0;        // sum of step_actions
};

// v_uv = loss_u - loss_v + beta*(log q_v - log q_u) on every edge.
VelocityField velocity(std::span<const double> loss, const Density& q,
                       const WeightedGraph& g, double beta);

// Upwind flux xi_uv(q) * v_uv per canonical edge; the donor node's mass is
// used as the cross-sectional area.
std::vector<double> upwind_flux(const Density& q, const VelocityField& v,
                                const WeightedGraph& g);

// dq_u/dt = sum over incident edges of w * v * xi; sums to zero.
std::vector<double> density_derivative(const Density& q, std::span<const double> loss,
                                       const WeightedGraph& g, double beta);

struct StepResult {
  Density q;
  double step_action = 0.0;
  double effective_tau = 0.0;
};

// One explicit Euler step q' = q + tau_eff * dq/dt, with tau halved (at most
// max_step_shrinks times) until all entries stay >= positivity_floor.
StepResult euler_step(const Density& q, std::span<const double> loss,
                      const WeightedGraph& g, const FlowConfig& cfg);

// t_in Euler steps from q0, recording densities, free energies, per-step
// actions and effective step sizes.
FlowTrace run_flow(const Density& q0, std::span<const double> loss,
                   const WeightedGraph& g, const FlowConfig& cfg);

// Weighted loss plus beta-weighted entropy: sum q*loss - beta * sum q log q.
double free_energy(const Density& q, std::span<const double> loss, double beta);

// Stationary density of the flow: per connected component S, the component's
// q0-mass distributed as softmax(loss_S / beta). Requires beta > 0.
Density gibbs_stationary(std::span<const double> loss, double beta,
                         const WeightedGraph& g, const Density& q0);

}  // namespace geoflow
