#pragma once

#include <array>
#include <functional>
#include <span>
#include <vector>

#include "geoflow/flow.hpp"
#include "geoflow/graph.hpp"

namespace geoflow {

// Two densities on the single-edge graph; the one geometry where the
// geometric Wasserstein distance has a closed form.
struct TwoNodeInstance {
  double w = 1.0;
  std::array<double, 2> p0{0.5, 0.5};
  std::array<double, 2> p1{0.5, 0.5};

  void validate() const;
};

// (4/w) * (sqrt(p0_donor) - sqrt(p1_donor))^2 where the donor is the node
// losing mass. Derived from the action integral with donor-side upwind
// interpolation; confirmed against gw2_two_node_numeric below.
double gw2_two_node_closed_form(const TwoNodeInstance& inst);

// Minimizes the exact action of piecewise-constant velocity schedules over
// time_steps slices (Newton on a convex chain objective). Upper-bounds the
// infimum and decreases weakly under refinement.
double gw2_two_node_numeric(const TwoNodeInstance& inst, int time_steps);

struct Theorem1Result {
  double lhs_argmax = 0.0;  // argmax of L(q) - (1/2tau) GW^2(p, q)
  double rhs_argmax = 0.0;  // argmax of L(q) subject to GW^2(p, q) <= epsilon
  double epsilon = 0.0;
};

// Grid search over q_1 on the 2-node graph: the proximal problem's argmax
// and the epsilon-ball-constrained argmax must coincide.
Theorem1Result check_theorem1_two_node(std::array<double, 2> loss, std::array<double, 2> p,
                                       double beta, double tau, int grid);

// Free-energy gain ratios (L(q(T)) - L(uniform)) / (L(gibbs) - L(uniform))
// at the given step checkpoints; approaches 1 from below on connected graphs.
std::vector<double> check_theorem2_trend(const WeightedGraph& g, std::span<const double> loss,
                                         double beta, FlowConfig cfg,
                                         const std::vector<int>& checkpoints);

// Central differences of fn around x, one coordinate at a time.
std::vector<double> finite_diff_gradient(const std::function<double(std::span<const double>)>& fn,
                                         std::span<const double> x, double eps);

// Euler integration with tau = total_time / steps; reference for
// first-order-convergence checks of the coarse stepper.
Density fine_step_reference(const Density& q0, std::span<const double> loss,
                            const WeightedGraph& g, double beta, double total_time, int steps);

}  // namespace geoflow
