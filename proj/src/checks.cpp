#include "geoflow/checks.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <set>
#include <sstream>

#include "geoflow/flow.hpp"
#include "geoflow/graph.hpp"
#include "geoflow/io.hpp"
#include "geoflow/model.hpp"
#include "geoflow/oracle.hpp"
#include "geoflow/rng.hpp"
#include "geoflow/trainer.hpp"

namespace geoflow {

namespace {

using clock_type = std::chrono::steady_clock;

double seconds_since(clock_type::time_point t0) {
  return std::chrono::duration<double>(clock_type::now() - t0).count();
}

// random connected graph: spanning tree plus a few extra edges
WeightedGraph random_graph(Rng& rng, int n, int extra_edges) {
  std::vector<EdgeTriple> edges;
  for (int v = 1; v < n; ++v)
    edges.push_back({static_cast<NodeId>(rng.uniform_index(v)), v, 1.0});
  for (int k = 0; k < extra_edges; ++k) {
    const auto i = static_cast<NodeId>(rng.uniform_index(n));
    const auto j = static_cast<NodeId>(rng.uniform_index(n));
    if (i == j) continue;
    const auto key = std::minmax(i, j);
    bool dup = false;
    for (const auto& e : edges) {
      if (std::minmax(e.i, e.j) == key) {
        dup = true;
        break;
      }
    }
    if (!dup) edges.push_back({key.first, key.second, 1.0});
  }
  return WeightedGraph::build(n, edges);
}

WeightedGraph path_graph(int n) {
  std::vector<EdgeTriple> edges;
  for (int i = 0; i + 1 < n; ++i) edges.push_back({i, i + 1, 1.0});
  return WeightedGraph::build(n, edges);
}

Density random_density(Rng& rng, int n) {
  Density q;
  q.values.resize(static_cast<std::size_t>(n));
  double sum = 0.0;
  for (double& v : q.values) {
    v = 0.05 + rng.uniform();
    sum += v;
  }
  for (double& v : q.values) v /= sum;
  return q;
}

std::vector<double> random_losses(Rng& rng, int n, double lo = 0.0, double hi = 1.0) {
  std::vector<double> loss(static_cast<std::size_t>(n));
  for (double& l : loss) l = rng.uniform(lo, hi);
  return loss;
}

double linf(std::span<const double> a, std::span<const double> b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

double total_variation(const Density& a, const Density& b) {
  double tv = 0.0;
  for (std::size_t i = 0; i < a.values.size(); ++i) tv += std::abs(a.values[i] - b.values[i]);
  return 0.5 * tv;
}

// density derivative assembled from the public velocity/flux stages, with
// the fault hook between them
std::vector<double> derivative_via_pipeline(const Density& q, std::span<const double> loss,
                                            const WeightedGraph& g, double beta, Fault fault) {
  VelocityField v = velocity(loss, q, g, beta);
  if (fault == Fault::velocity_sign && !v.values.empty()) v.values[0] = -v.values[0];
  const std::vector<double> flux = upwind_flux(q, v, g);
  std::vector<double> dq(static_cast<std::size_t>(g.num_nodes()), 0.0);
  const auto& eu = g.edge_u();
  const auto& ev = g.edge_v();
  const auto& ew = g.edge_w();
  for (std::size_t e = 0; e < flux.size(); ++e) {
    dq[eu[e]] += ew[e] * flux[e];
    dq[ev[e]] -= ew[e] * flux[e];
  }
  return dq;
}

// ---- flow group ----

CheckResult check_mass_conservation(Fault) {
  const auto t0 = clock_type::now();
  Rng rng(20240517);
  double worst = 0.0;
  for (int trial = 0; trial < 1000; ++trial) {
    const int n = 2 + static_cast<int>(rng.uniform_index(49));
    WeightedGraph g = random_graph(rng, n, n / 2);
    Density q = random_density(rng, n);
    const auto loss = random_losses(rng, n);
    const double beta = trial % 4 == 0 ? 0.0 : rng.uniform(0.0, 1.0);
    const double tau = rng.uniform(1e-3, 1e-2);

    const auto dq = density_derivative(q, loss, g, beta);
    double sum = 0.0;
    for (std::size_t i = 0; i < dq.size(); ++i) sum += q.values[i] + tau * dq[i];
    worst = std::max(worst, std::abs(sum - 1.0));

    FlowConfig cfg;
    cfg.beta = beta;
    cfg.tau = tau;
    euler_step(q, loss, g, cfg);  // API path must accept the same inputs
  }
  const double secs = seconds_since(t0);
  return {"flow/mass_conservation", worst <= 1e-12 && secs < 1.0,
          "max pre-renormalization |sum-1| = " + format_double(worst) + ", " +
              format_double(secs) + " s (budget 1 s)"};
}

CheckResult check_velocity_formula(Fault fault) {
  Rng rng(7011);
  double worst = 0.0;
  for (int trial = 0; trial < 50; ++trial) {
    const int n = 2 + static_cast<int>(rng.uniform_index(12));
    WeightedGraph g = random_graph(rng, n, n);
    Density q = random_density(rng, n);
    const auto loss = random_losses(rng, n);
    const double beta = rng.uniform(0.0, 1.0);

    VelocityField v = velocity(loss, q, g, beta);
    if (fault == Fault::velocity_sign && !v.values.empty()) v.values[0] = -v.values[0];
    const auto& eu = g.edge_u();
    const auto& ev = g.edge_v();
    for (std::size_t e = 0; e < v.values.size(); ++e) {
      const double expected = loss[eu[e]] - loss[ev[e]] +
                              beta * (std::log(q.values[ev[e]]) - std::log(q.values[eu[e]]));
      worst = std::max(worst, std::abs(v.values[e] - expected));
    }
    // flux vanishes exactly on zero-velocity edges
    VelocityField zero;
    zero.values.assign(g.num_edges(), 0.0);
    for (double f : upwind_flux(q, zero, g)) worst = std::max(worst, std::abs(f));
  }
  return {"flow/velocity_formula", worst <= 1e-14,
          "max |v - (loss_u - loss_v + beta*(log q_v - log q_u))| = " + format_double(worst)};
}

CheckResult check_gibbs_fixed_point(Fault fault) {
  const auto t0 = clock_type::now();
  WeightedGraph g = path_graph(5);
  Rng rng(4242);
  const auto loss = random_losses(rng, 5);

  FlowConfig cfg;
  cfg.beta = 0.5;
  cfg.tau = 1e-3;
  cfg.t_in = 120000;
  const FlowTrace trace = run_flow(uniform_density(5), loss, g, cfg);

  const Density gibbs = gibbs_stationary(loss, cfg.beta, g, uniform_density(5));
  const double err = linf(trace.densities.back().values, gibbs.values);

  const auto dq = derivative_via_pipeline(gibbs, loss, g, cfg.beta, fault);
  double deriv = 0.0;
  for (double d : dq) deriv = std::max(deriv, std::abs(d));

  const double secs = seconds_since(t0);
  return {"flow/gibbs_fixed_point", err <= 1e-6 && deriv <= 1e-10 && secs < 5.0,
          "Linf(final, softmax(loss/beta)) = " + format_double(err) +
              ", Linf(dq at stationary point) = " + format_double(deriv) + ", " +
              format_double(secs) + " s (budget 5 s)"};
}

CheckResult check_component_isolation(Fault) {
  // two 4-node paths; all the high losses live in the first component
  std::vector<EdgeTriple> edges;
  for (int i = 0; i + 1 < 4; ++i) {
    edges.push_back({i, i + 1, 1.0});
    edges.push_back({4 + i, 5 + i, 1.0});
  }
  WeightedGraph g = WeightedGraph::build(8, edges);
  Rng rng(99);
  std::vector<double> loss(8);
  for (int i = 0; i < 8; ++i) loss[i] = (i < 4 ? 2.0 : 0.1) + 0.05 * rng.uniform();

  FlowConfig cfg;
  cfg.beta = 0.5;
  cfg.tau = 0.01;
  cfg.t_in = 500;
  const FlowTrace trace = run_flow(uniform_density(8), loss, g, cfg);

  double worst_mass_drift = 0.0;
  for (const auto& q : trace.densities) {
    double mass_a = 0.0;
    for (int i = 0; i < 4; ++i) mass_a += q.values[i];
    worst_mass_drift = std::max(worst_mass_drift, std::abs(mass_a - 0.5));
  }

  const Density tilted = kl_tilt_weights(loss, cfg.beta);
  const double tv = total_variation(trace.densities.back(), tilted);

  return {"flow/component_isolation", worst_mass_drift <= 1e-12 && tv >= 0.1,
          "max per-component mass drift = " + format_double(worst_mass_drift) +
              ", TV(flow, kl-tilt) = " + format_double(tv) + " (needs >= 0.1)"};
}

CheckResult check_locality(Fault) {
  const auto t0 = clock_type::now();
  const int n = 10;
  WeightedGraph g = path_graph(n);
  Rng rng(31337);
  auto loss = random_losses(rng, n);
  auto perturbed = loss;
  perturbed[0] += 2.0;

  // coupling strong enough that the influence stays representable out to
  // hop 9 (per-hop attenuation ~ tau*beta), yet still well inside the
  // explicit-scheme stability range
  FlowConfig cfg;
  cfg.beta = 1.0;
  cfg.tau = 0.2;
  cfg.t_in = n - 1;
  const FlowTrace a = run_flow(uniform_density(n), loss, g, cfg);
  const FlowTrace b = run_flow(uniform_density(n), perturbed, g, cfg);

  const auto dist = hop_distance(g, {0});
  bool ok = true;
  std::string detail;
  for (int i = 1; i < n && ok; ++i) {
    for (int t = 0; t <= cfg.t_in && ok; ++t) {
      const bool same = a.densities[t].values[i] == b.densities[t].values[i];
      if (t < dist[i] && !same) {
        ok = false;
        detail = "node " + std::to_string(i) + " moved at step " + std::to_string(t) +
                 " before hop distance " + std::to_string(dist[i]);
      }
      if (t == dist[i] && same) {
        ok = false;
        detail = "node " + std::to_string(i) + " unchanged at its hop distance " +
                 std::to_string(dist[i]);
      }
    }
  }
  const double secs = seconds_since(t0);
  if (ok && secs >= 1.0) {
    ok = false;
    detail = "runtime over budget";
  }
  if (ok) detail = "influence arrives exactly at hop distance, bitwise; " + format_double(secs) + " s";
  return {"flow/locality", ok, detail};
}

CheckResult check_monotone_free_energy(Fault) {
  Rng rng(606);
  double worst_drop = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const int n = 3 + static_cast<int>(rng.uniform_index(18));
    WeightedGraph g = random_graph(rng, n, n / 2);
    const auto loss = random_losses(rng, n);
    static const double betas[] = {0.0, 0.01, 0.1, 0.5, 1.0};
    FlowConfig cfg;
    cfg.beta = betas[trial % 5];
    cfg.tau = 1e-3;
    cfg.t_in = 200;
    const FlowTrace trace = run_flow(uniform_density(n), loss, g, cfg);
    for (std::size_t t = 0; t + 1 < trace.free_energies.size(); ++t)
      worst_drop = std::max(worst_drop, trace.free_energies[t] - trace.free_energies[t + 1]);
  }
  return {"flow/monotone_free_energy", worst_drop <= 1e-10,
          "max free-energy drop per accepted step = " + format_double(worst_drop)};
}

CheckResult check_zero_t_in(Fault) {
  Rng rng(12);
  WeightedGraph g = random_graph(rng, 7, 4);
  Density q0 = random_density(rng, 7);
  const auto loss = random_losses(rng, 7);
  FlowConfig cfg;
  cfg.t_in = 0;
  const FlowTrace trace = run_flow(q0, loss, g, cfg);
  const bool ok = trace.densities.size() == 1 && trace.densities[0] == q0 &&
                  trace.cumulative_gw2 == 0.0 && trace.step_actions.empty();
  return {"flow/zero_t_in", ok, "t_in = 0 returns the input density untouched"};
}

CheckResult check_first_order_convergence(Fault) {
  WeightedGraph g = path_graph(6);
  Rng rng(2718);
  const auto loss = random_losses(rng, 6);
  const Density q0 = uniform_density(6);
  const double beta = 0.3, total = 1.0;

  const Density coarse = fine_step_reference(q0, loss, g, beta, total, 100);
  const Density mid = fine_step_reference(q0, loss, g, beta, total, 1000);
  const Density fine = fine_step_reference(q0, loss, g, beta, total, 10000);
  const double d1 = linf(coarse.values, mid.values);
  const double d2 = linf(mid.values, fine.values);
  const double ratio = d1 / d2;
  return {"flow/first_order_convergence", ratio >= 5.0 && ratio <= 20.0,
          "error ratio for 10x step refinement = " + format_double(ratio) +
              " (expected 10 within factor 2)"};
}

CheckResult check_perf_budget(Fault) {
  const int n = 10000;
  const std::size_t target_edges = 50000;
  Rng rng(555);
  std::set<std::pair<NodeId, NodeId>> seen;
  std::vector<EdgeTriple> edges;
  edges.reserve(target_edges);
  while (edges.size() < target_edges) {
    auto i = static_cast<NodeId>(rng.uniform_index(n));
    auto j = static_cast<NodeId>(rng.uniform_index(n));
    if (i == j) continue;
    const auto key = std::minmax(i, j);
    if (seen.insert({key.first, key.second}).second)
      edges.push_back({key.first, key.second, 1.0});
  }
  WeightedGraph g = WeightedGraph::build(n, edges);
  const auto loss = random_losses(rng, n);
  const Density q = uniform_density(n);
  FlowConfig cfg;
  cfg.beta = 0.01;
  cfg.tau = 1e-4;

  double best_step = 1e9;
  for (int rep = 0; rep < 3; ++rep) {
    const auto t0 = clock_type::now();
    euler_step(q, loss, g, cfg);
    best_step = std::min(best_step, seconds_since(t0));
  }

  cfg.t_in = 100;
  const auto t0 = clock_type::now();
  run_flow(q, loss, g, cfg);
  const double flow_secs = seconds_since(t0);

  return {"flow/perf_budget", best_step < 0.010 && flow_secs < 1.0,
          "euler_step on N=10000, |E|=50000: " + format_double(best_step * 1e3) +
              " ms (budget 10 ms); 100-step flow: " + format_double(flow_secs) +
              " s (budget 1 s)"};
}

CheckResult check_beta_limit(Fault) {
  Rng rng(808);
  WeightedGraph g = random_graph(rng, 10, 6);
  const auto loss = random_losses(rng, 10);

  const Density gibbs_hi = gibbs_stationary(loss, 1e6, g, uniform_density(10));
  const double gap = linf(gibbs_hi.values, uniform_density(10).values);

  FlowConfig cfg;
  cfg.beta = 1e6;
  cfg.tau = 1e-7;
  cfg.t_in = 100;
  const FlowTrace trace = run_flow(uniform_density(10), loss, g, cfg);
  double excursion = 0.0;
  for (const auto& q : trace.densities)
    excursion = std::max(excursion, linf(q.values, uniform_density(10).values));

  // total-variation distance from uniform shrinks as beta grows
  bool monotone = true;
  double prev = std::numeric_limits<double>::infinity();
  for (double beta : {0.1, 1.0, 10.0, 100.0, 1e3, 1e6}) {
    const double tv =
        total_variation(gibbs_stationary(loss, beta, g, uniform_density(10)), uniform_density(10));
    if (tv > prev + 1e-12) monotone = false;
    prev = tv;
  }

  return {"flow/beta_limit", gap <= 1e-6 && excursion <= 1e-4 && monotone,
          "Linf(gibbs(beta=1e6), uniform) = " + format_double(gap) +
              ", flow excursion = " + format_double(excursion) +
              ", TV from uniform monotone in beta: " + (monotone ? "yes" : "no")};
}

// ---- gradients group ----

CheckResult check_gradients(Fault) {
  Rng rng(1313);
  double worst = 0.0;
  for (int trial = 0; trial < 50; ++trial) {
    const int n = 4 + static_cast<int>(rng.uniform_index(17));
    const int d = 2 + static_cast<int>(rng.uniform_index(4));
    const int c = 2 + static_cast<int>(rng.uniform_index(3));

    FeatureMatrix x = FeatureMatrix::zeros(n, d);
    for (double& v : x.data) v = rng.normal();
    LabelVector y;
    y.num_classes = c;
    y.y.resize(n);
    for (int i = 0; i < n; ++i)
      y.y[i] = rng.uniform() < 0.25 ? kUnlabeled : static_cast<int>(rng.uniform_index(c));
    y.y[0] = 0;  // keep at least one label
    Density q = random_density(rng, n);
    ClassifierParams params = init_params(c, d, rng.next_u64());

    const ClassifierParams analytic = weighted_loss_gradient(params, x, y, q, true);

    std::vector<double> flat(params.weight);
    flat.insert(flat.end(), params.bias.begin(), params.bias.end());
    auto objective = [&](std::span<const double> theta) {
      ClassifierParams pp = params;
      std::copy(theta.begin(), theta.begin() + static_cast<std::ptrdiff_t>(pp.weight.size()),
                pp.weight.begin());
      std::copy(theta.begin() + static_cast<std::ptrdiff_t>(pp.weight.size()), theta.end(),
                pp.bias.begin());
      const auto loss = per_node_loss(pp, x, y);
      double obj = 0.0;
      for (int i = 0; i < n; ++i) obj += q.values[i] * loss[i];
      return obj;
    };
    const auto numeric = finite_diff_gradient(objective, flat, 1e-5);

    std::vector<double> analytic_flat(analytic.weight);
    analytic_flat.insert(analytic_flat.end(), analytic.bias.begin(), analytic.bias.end());
    double num2 = 0.0, diff2 = 0.0;
    for (std::size_t k = 0; k < numeric.size(); ++k) {
      diff2 += (analytic_flat[k] - numeric[k]) * (analytic_flat[k] - numeric[k]);
      num2 += numeric[k] * numeric[k];
    }
    worst = std::max(worst, std::sqrt(diff2) / std::max(std::sqrt(num2), 1e-12));
  }
  return {"gradients/finite_difference", worst < 1e-5,
          "max relative error over 50 instances = " + format_double(worst)};
}

// ---- theorem groups ----

CheckResult check_theorem1(Fault) {
  const auto t0 = clock_type::now();
  Rng rng(90210);
  const int grid = 10000;
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const std::array<double, 2> loss{rng.uniform(), rng.uniform()};
    const double p1 = rng.uniform(0.05, 0.95);
    const std::array<double, 2> p{1.0 - p1, p1};
    const double beta = rng.uniform(0.05, 1.0);
    const double tau = rng.uniform(0.05, 1.0);
    const auto res = check_theorem1_two_node(loss, p, beta, tau, grid);
    worst = std::max(worst, std::abs(res.lhs_argmax - res.rhs_argmax));
  }

  // tau -> 0 collapses the ball onto p
  const auto tiny = check_theorem1_two_node({0.9, 0.2}, {0.3, 0.7}, 0.4, 1e-4, grid);
  const bool shrink_ok = std::abs(tiny.lhs_argmax - 0.7) <= 0.01 && tiny.epsilon <= 1e-4;

  const double secs = seconds_since(t0);
  return {"theorem1/argmax_agreement",
          worst <= 2.0 / grid && shrink_ok && secs < 30.0,
          "max |proximal argmax - ball argmax| = " + format_double(worst) + " over 100 draws (tol " +
              format_double(2.0 / grid) + "); " + format_double(secs) + " s (budget 30 s)"};
}

CheckResult check_theorem2(Fault) {
  WeightedGraph g = path_graph(5);
  Rng rng(515);
  const auto loss = random_losses(rng, 5);
  FlowConfig cfg;
  cfg.tau = 0.05;
  const std::vector<int> checkpoints{0, 1, 3, 10, 30, 100, 1000};
  const auto ratios = check_theorem2_trend(g, loss, 0.5, cfg, checkpoints);

  bool monotone = true;
  for (std::size_t k = 0; k + 1 < ratios.size(); ++k)
    if (ratios[k + 1] < ratios[k] - 1e-10) monotone = false;
  const bool start_zero = std::abs(ratios.front()) <= 1e-12;
  const bool converged = ratios.back() >= 0.99;

  std::ostringstream detail;
  detail << "ratios:";
  for (double r : ratios) detail << ' ' << format_double(r);
  return {"theorem2/trend", monotone && start_zero && converged, detail.str()};
}

// ---- gw2 group ----

CheckResult check_gw2_agreement(Fault) {
  Rng rng(1600);
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    TwoNodeInstance inst;
    inst.w = rng.uniform(0.25, 4.0);
    const double a = rng.uniform(0.02, 0.98);
    const double b = rng.uniform(0.02, 0.98);
    inst.p0 = {a, 1.0 - a};
    inst.p1 = {b, 1.0 - b};
    const double closed = gw2_two_node_closed_form(inst);
    const double numeric = gw2_two_node_numeric(inst, 1000);
    if (closed > 1e-12)
      worst = std::max(worst, std::abs(closed - numeric) / closed);
    else
      worst = std::max(worst, std::abs(closed - numeric));
  }
  return {"gw2/closed_form_agreement", worst < 1e-3,
          "max relative error over 100 instances at 1000 slices = " + format_double(worst)};
}

CheckResult check_gw2_scaling(Fault) {
  TwoNodeInstance inst;
  inst.p0 = {0.8, 0.2};
  inst.p1 = {0.35, 0.65};
  inst.w = 1.0;
  const double base = gw2_two_node_closed_form(inst);
  inst.w = 4.0;
  const double scaled = gw2_two_node_closed_form(inst);
  const double rel = std::abs(scaled - base / 4.0) / (base / 4.0);
  return {"gw2/weight_scaling", rel <= 1e-15,
          "quadrupling w divides the distance by 4 (rel err " + format_double(rel) + ")"};
}

CheckResult check_gw2_refinement(Fault) {
  TwoNodeInstance inst;
  inst.w = 1.0;
  inst.p0 = {0.99, 0.01};
  inst.p1 = {0.01, 0.99};
  const double closed = gw2_two_node_closed_form(inst);
  const double v250 = gw2_two_node_numeric(inst, 250);
  const double v500 = gw2_two_node_numeric(inst, 500);
  const double v1000 = gw2_two_node_numeric(inst, 1000);
  const bool decreasing = v500 <= v250 + 1e-12 && v1000 <= v500 + 1e-12;
  const bool upper_bound = v250 >= closed - 1e-9 && v1000 >= closed - 1e-9;
  return {"gw2/refinement", decreasing && upper_bound,
          "K=250: " + format_double(v250) + ", K=500: " + format_double(v500) +
              ", K=1000: " + format_double(v1000) + ", closed form: " + format_double(closed)};
}

}  // namespace

Fault fault_from_string(const std::string& s) {
  if (s.empty() || s == "none") return Fault::none;
  if (s == "velocity-sign") return Fault::velocity_sign;
  fail(ErrKind::ConfigInvalid, "unknown fault '" + s + "' (none, velocity-sign)");
}

std::vector<CheckResult> run_checks(const std::string& selector, Fault fault) {
  using CheckFn = CheckResult (*)(Fault);
  struct Entry {
    const char* group;
    CheckFn fn;
  };
  static const Entry entries[] = {
      {"flow", check_mass_conservation},
      {"flow", check_velocity_formula},
      {"flow", check_gibbs_fixed_point},
      {"flow", check_component_isolation},
      {"flow", check_locality},
      {"flow", check_monotone_free_energy},
      {"flow", check_zero_t_in},
      {"flow", check_first_order_convergence},
      {"flow", check_perf_budget},
      {"flow", check_beta_limit},
      {"gradients", check_gradients},
      {"theorem1", check_theorem1},
      {"theorem2", check_theorem2},
      {"gw2", check_gw2_agreement},
      {"gw2", check_gw2_scaling},
      {"gw2", check_gw2_refinement},
  };

  bool any = false;
  std::vector<CheckResult> out;
  for (const auto& e : entries) {
    if (selector != "all" && selector != e.group) continue;
    any = true;
    out.push_back(e.fn(fault));
  }
  require(any, ErrKind::ConfigInvalid,
          "unknown check selector '" + selector +
              "' (all, flow, gradients, theorem1, theorem2, gw2)");
  return out;
}

bool all_pass(const std::vector<CheckResult>& results) {
  return std::all_of(results.begin(), results.end(), [](const auto& r) { return r.pass; });
}

}  // namespace geoflow
