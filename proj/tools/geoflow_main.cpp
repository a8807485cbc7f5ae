// geoflow: dataset generation, minimax training with graph-flow reweighting,
// flow inspection, hyperparameter sweeps, evaluation, self-checks.

#include <chrono>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "geoflow/checks.hpp"
#include "geoflow/data.hpp"
#include "geoflow/flow.hpp"
#include "geoflow/io.hpp"
#include "geoflow/log.hpp"
#include "geoflow/model.hpp"
#include "geoflow/oracle.hpp"
#include "geoflow/trainer.hpp"

namespace gf = geoflow;
using json = nlohmann::json;
namespace fs = std::filesystem;

namespace {

json metrics_json(const gf::Metrics& m) {
  json j{{"acc", m.acc}, {"balanced-acc", m.balanced_acc}, {"macro-f1", m.macro_f1}};
  if (m.roc_auc) j["roc-auc"] = *m.roc_auc;
  return j;
}

json params_json(const gf::ClassifierParams& p) {
  json weight = json::array();
  for (int c = 0; c < p.num_classes; ++c) {
    json row = json::array();
    for (int f = 0; f < p.dim; ++f) row.push_back(p.w(c, f));
    weight.push_back(std::move(row));
  }
  return json{{"num-classes", p.num_classes}, {"dim", p.dim}, {"weight", weight}, {"bias", p.bias}};
}

gf::ClassifierParams params_from_json(const json& j, const std::string& file) {
  gf::require(j.contains("num-classes") && j.contains("dim") && j.contains("weight") &&
                  j.contains("bias"),
              gf::ErrKind::SchemaMismatch, file + ": params need num-classes, dim, weight, bias");
  gf::ClassifierParams p;
  p.num_classes = j["num-classes"].get<int>();
  p.dim = j["dim"].get<int>();
  for (const auto& row : j["weight"])
    for (const auto& v : row) p.weight.push_back(v.get<double>());
  p.bias = j["bias"].get<std::vector<double>>();
  gf::require(static_cast<int>(p.weight.size()) == p.num_classes * p.dim &&
                  static_cast<int>(p.bias.size()) == p.num_classes,
              gf::ErrKind::SchemaMismatch, file + ": params shape mismatch");
  return p;
}

std::string iso_now() {
  const auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  char buf[32];
  std::strftime(buf, sizeof(buf), "%FT%TZ", std::gmtime(&t));
  return buf;
}

// Flat kebab-case run configuration: config-file values overridden by flags.
struct RunConfig {
  gf::TrainConfig train;
  std::string dataset;
  std::string out = "out";

  static const std::vector<std::string>& known_keys() {
    static const std::vector<std::string> keys{
        "dataset",          "out",
        "method",           "epochs",
        "gamma",            "t-in",
        "beta",             "tau",
        "positivity-floor", "max-step-shrinks",
        "hops",             "self-loop-weight",
        "seed",             "eval-every",
        "tar-n-k",          "q-warm-start",
        "impute-grad"};
    return keys;
  }

  void apply(const json& j) {
    for (const auto& [key, value] : j.items()) {
      const auto& keys = known_keys();
      gf::require(std::find(keys.begin(), keys.end(), key) != keys.end(),
                  gf::ErrKind::ConfigInvalid, "unknown config key '" + key + "'");
      if (key == "dataset") dataset = value.get<std::string>();
      else if (key == "out") out = value.get<std::string>();
      else if (key == "method") train.method = gf::method_from_string(value.get<std::string>());
      else if (key == "epochs") train.epochs = value.get<int>();
      else if (key == "gamma") train.gamma = value.get<double>();
      else if (key == "t-in") train.flow.t_in = value.get<int>();
      else if (key == "beta") train.flow.beta = value.get<double>();
      else if (key == "tau") train.flow.tau = value.get<double>();
      else if (key == "positivity-floor") train.flow.positivity_floor = value.get<double>();
      else if (key == "max-step-shrinks") train.flow.max_step_shrinks = value.get<int>();
      else if (key == "hops") train.prop.hops = value.get<int>();
      else if (key == "self-loop-weight") train.prop.self_loop_weight = value.get<double>();
      else if (key == "seed") train.seed = value.get<std::uint64_t>();
      else if (key == "eval-every") train.eval_every = value.get<int>();
      else if (key == "tar-n-k") train.tar_n_k = value.get<int>();
      else if (key == "q-warm-start") train.q_warm_start = value.get<bool>();
      else if (key == "impute-grad") train.impute_grad = value.get<bool>();
    }
  }

  json echo() const {
    return json{{"dataset", dataset},
                {"out", out},
                {"method", gf::to_string(train.method)},
                {"epochs", train.epochs},
                {"gamma", train.gamma},
                {"t-in", train.flow.t_in},
                {"beta", train.flow.beta},
                {"tau", train.flow.tau},
                {"positivity-floor", train.flow.positivity_floor},
                {"max-step-shrinks", train.flow.max_step_shrinks},
                {"hops", train.prop.hops},
                {"self-loop-weight", train.prop.self_loop_weight},
                {"seed", train.seed},
                {"eval-every", train.eval_every},
                {"tar-n-k", train.tar_n_k},
                {"q-warm-start", train.q_warm_start},
                {"impute-grad", train.impute_grad}};
  }
};

// Shared train/sweep/flow options; values set on the command line win over
// the config file.
struct TrainCli {
  std::string config_path;
  std::string dataset, out, method;
  int epochs = 0, t_in = 0, eval_every = 0, hops = 0, tar_n_k = 0, max_step_shrinks = 0;
  double gamma = 0, beta = 0, tau = 0, positivity_floor = 0, self_loop_weight = 0;
  std::uint64_t seed = 0;
  std::string q_warm_start, impute_grad;

  CLI::Option *o_dataset{}, *o_out{}, *o_method{}, *o_epochs{}, *o_gamma{}, *o_t_in{}, *o_beta{},
      *o_tau{}, *o_floor{}, *o_shrinks{}, *o_hops{}, *o_slw{}, *o_seed{}, *o_eval{}, *o_k{},
      *o_warm{}, *o_impute{};

  void attach(CLI::App* app) {
    app->add_option("-c,--config", config_path, "JSON config file (flat kebab-case keys)");
    o_dataset = app->add_option("--dataset", dataset, "dataset directory");
    o_out = app->add_option("--out", out, "output directory");
    o_method = app->add_option("--method", method, "tar | tar-n | erm | kl-tilt");
    o_epochs = app->add_option("--epochs", epochs, "training epochs");
    o_gamma = app->add_option("--gamma", gamma, "learning rate");
    o_t_in = app->add_option("--t-in", t_in, "inner flow steps per epoch");
    o_beta = app->add_option("--beta", beta, "entropy coefficient");
    o_tau = app->add_option("--tau", tau, "flow step size");
    o_floor = app->add_option("--positivity-floor", positivity_floor, "density floor");
    o_shrinks = app->add_option("--max-step-shrinks", max_step_shrinks, "tau halving budget");
    o_hops = app->add_option("--hops", hops, "feature propagation rounds");
    o_slw = app->add_option("--self-loop-weight", self_loop_weight, "propagation self-loop weight");
    o_seed = app->add_option("--seed", seed, "RNG seed");
    o_eval = app->add_option("--eval-every", eval_every, "record metrics every n epochs");
    o_k = app->add_option("--tar-n-k", tar_n_k, "TAR-N shortcut fan-out");
    o_warm = app->add_option("--q-warm-start", q_warm_start, "on | off: carry q across epochs");
    o_impute = app->add_option("--impute-grad", impute_grad, "on | off: imputed losses get gradient");
  }

  static bool on_off(const std::string& v, const std::string& flag) {
    if (v == "on") return true;
    if (v == "off") return false;
    gf::fail(gf::ErrKind::ConfigInvalid, flag + " expects on|off, got '" + v + "'");
  }

  RunConfig resolve() const {
    RunConfig rc;
    if (!config_path.empty()) {
      json j = json::parse(gf::read_file(config_path), nullptr, false);
      gf::require(!j.is_discarded(), gf::ErrKind::ParseError, config_path + ": invalid JSON");
      rc.apply(j);
    }
    if (o_dataset->count()) rc.dataset = dataset;
    if (o_out->count()) rc.out = out;
    if (o_method->count()) rc.train.method = gf::method_from_string(method);
    if (o_epochs->count()) rc.train.epochs = epochs;
    if (o_gamma->count()) rc.train.gamma = gamma;
    if (o_t_in->count()) rc.train.flow.t_in = t_in;
    if (o_beta->count()) rc.train.flow.beta = beta;
    if (o_tau->count()) rc.train.flow.tau = tau;
    if (o_floor->count()) rc.train.flow.positivity_floor = positivity_floor;
    if (o_shrinks->count()) rc.train.flow.max_step_shrinks = max_step_shrinks;
    if (o_hops->count()) rc.train.prop.hops = hops;
    if (o_slw->count()) rc.train.prop.self_loop_weight = self_loop_weight;
    if (o_seed->count()) rc.train.seed = seed;
    if (o_eval->count()) rc.train.eval_every = eval_every;
    if (o_k->count()) rc.train.tar_n_k = tar_n_k;
    if (o_warm->count()) rc.train.q_warm_start = on_off(q_warm_start, "--q-warm-start");
    if (o_impute->count()) rc.train.impute_grad = on_off(impute_grad, "--impute-grad");
    gf::require(!rc.dataset.empty(), gf::ErrKind::ConfigInvalid,
                "no dataset given (--dataset or config key 'dataset')");
    return rc;
  }
};

void write_train_outputs(const gf::TrainReport& report, const RunConfig& rc, bool no_timestamps) {
  fs::create_directories(rc.out);

  std::ostringstream jsonl;
  for (const auto& rec : report.records) {
    json j{{"epoch", rec.epoch},
           {"train-loss-weighted", rec.train_loss_weighted},
           {"val", metrics_json(rec.val)},
           {"test", metrics_json(rec.test)},
           {"cumulative-gw2", rec.cumulative_gw2},
           {"q-max", rec.q_max},
           {"q-entropy", rec.q_entropy}};
    jsonl << j.dump() << '\n';
  }
  gf::write_file(fs::path(rc.out) / "report.jsonl", jsonl.str());

  json summary{{"method", gf::to_string(rc.train.method)},
               {"best-epoch", report.best_epoch},
               {"best-val", report.best_val_acc},
               {"test-at-best-val", metrics_json(report.test_at_best_val)},
               {"config-echo", rc.echo()}};
  if (report.worst_group_acc >= 0.0) summary["worst-group-acc"] = report.worst_group_acc;
  if (!no_timestamps) {
    summary["run-started"] = iso_now();
    summary["wall-seconds"] = report.wall_seconds;
  }
  gf::write_file(fs::path(rc.out) / "summary.json", summary.dump(2) + "\n");
  gf::write_file(fs::path(rc.out) / "params.json", params_json(report.best_params).dump(2) + "\n");
}

int cmd_generate(const std::string& kind, std::uint64_t seed, int n, int d, int classes,
                 double shift, double spurious, double ratio, int knn, double cross_p,
                 const std::string& out) {
  gf::SyntheticGraphConfig gc{knn, cross_p};
  gf::Dataset ds;
  if (kind == "covariate") {
    ds = gf::gen_covariate_shift(seed, n, d, classes, shift, gc);
  } else if (kind == "concept") {
    gf::require(spurious >= 0.0 && spurious <= 1.0, gf::ErrKind::DegenerateConfig,
                "--spurious must lie in [0,1]");
    ds = gf::gen_concept_shift(seed, n, d, classes, spurious, gc);
  } else if (kind == "imbalance") {
    gf::require(ratio >= 1.0, gf::ErrKind::DegenerateConfig, "--ratio must be >= 1");
    ds = gf::gen_class_imbalance(seed, n, d, classes, ratio, gc);
  } else {
    gf::fail(gf::ErrKind::ConfigInvalid,
             "unknown kind '" + kind + "' (covariate, concept, imbalance)");
  }
  gf::save_dataset(ds, out);
  json meta = ds.meta;
  meta["num-nodes"] = ds.graph.num_nodes();
  meta["num-edges"] = ds.graph.num_edges();
  meta["train"] = ds.masks.train.size();
  meta["val"] = ds.masks.val.size();
  meta["test"] = ds.masks.test.size();
  std::cout << meta.dump(2) << "\n";
  return 0;
}

int cmd_train(const TrainCli& cli, bool no_timestamps) {
  const RunConfig rc = cli.resolve();
  const gf::Dataset ds = gf::load_dataset(rc.dataset);
  const gf::TrainReport report = gf::train(ds, rc.train, /*progress=*/true);
  write_train_outputs(report, rc, no_timestamps);
  std::cout << "summary: best-val=" << gf::format_double(report.best_val_acc)
            << " test-acc=" << gf::format_double(report.test_at_best_val.acc);
  if (report.worst_group_acc >= 0.0)
    std::cout << " worst-group=" << gf::format_double(report.worst_group_acc);
  std::cout << "\n";
  return 0;
}

int cmd_flow(const TrainCli& cli, const std::string& loss_file, const std::string& params_file,
             int trace_every) {
  const RunConfig rc = cli.resolve();
  const gf::Dataset ds = gf::load_dataset(rc.dataset);
  gf::require(trace_every >= 1, gf::ErrKind::ConfigInvalid, "--trace-every must be >= 1");
  gf::require(loss_file.empty() != params_file.empty(), gf::ErrKind::ConfigInvalid,
              "need exactly one loss source: --loss-file or --params");

  std::vector<double> loss;
  if (!loss_file.empty()) {
    std::istringstream in(gf::read_file(loss_file));
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      if (line.empty() || line[0] == '#') continue;
      loss.push_back(gf::parse_double(line, loss_file + " line " + std::to_string(line_no)));
    }
  } else {
    json pj = json::parse(gf::read_file(params_file), nullptr, false);
    gf::require(!pj.is_discarded(), gf::ErrKind::ParseError, params_file + ": invalid JSON");
    const auto params = params_from_json(pj, params_file);
    const auto z = gf::propagate_features(ds.features, ds.graph, rc.train.prop);
    gf::LabelVector yv;
    yv.num_classes = ds.labels.num_classes;
    yv.y.assign(ds.labels.y.size(), gf::kUnlabeled);
    for (gf::NodeId i : ds.masks.train) yv.y[i] = ds.labels.y[i];
    loss = gf::per_node_loss(params, z, yv);
  }

  const gf::FlowTrace trace =
      gf::run_flow(gf::uniform_density(ds.graph.num_nodes()), loss, ds.graph, rc.train.flow);

  fs::create_directories(rc.out);
  std::ostringstream csv;
  csv << "step,node_id,q\n";
  for (std::size_t t = 0; t < trace.densities.size(); ++t) {
    const bool last = t + 1 == trace.densities.size();
    if (t % static_cast<std::size_t>(trace_every) != 0 && !last) continue;
    for (int i = 0; i < ds.graph.num_nodes(); ++i)
      csv << t << ',' << i << ',' << gf::format_double(trace.densities[t].values[i]) << '\n';
  }
  gf::write_file(fs::path(rc.out) / "trace.csv", csv.str());

  json summary{{"cumulative-gw2", trace.cumulative_gw2},
               {"free-energies", trace.free_energies},
               {"effective-taus", trace.effective_taus}};
  gf::write_file(fs::path(rc.out) / "flow_summary.json", summary.dump(2) + "\n");
  std::cout << "cumulative-gw2=" << gf::format_double(trace.cumulative_gw2) << "\n";
  return 0;
}

int cmd_sweep(const TrainCli& cli, std::vector<int> t_in_grid, std::vector<double> beta_grid) {
  const RunConfig rc = cli.resolve();
  const gf::Dataset ds = gf::load_dataset(rc.dataset);
  if (t_in_grid.empty()) t_in_grid = gf::default_t_in_grid();
  if (beta_grid.empty()) beta_grid = gf::default_beta_grid();

  const auto cells = gf::sweep(ds, rc.train, t_in_grid, beta_grid, /*progress=*/true);

  fs::create_directories(rc.out);
  std::ostringstream csv;
  csv << "t_in,beta,val_metric,test_metric,worst_group\n";
  for (const auto& cell : cells) {
    csv << cell.t_in << ',' << gf::format_double(cell.beta) << ','
        << gf::format_double(cell.report.best_val_acc) << ','
        << gf::format_double(cell.report.test_at_best_val.acc) << ','
        << gf::format_double(cell.report.worst_group_acc) << '\n';
  }
  gf::write_file(fs::path(rc.out) / "sweep.csv", csv.str());
  std::cout << "sweep: " << cells.size() << " cells -> "
            << (fs::path(rc.out) / "sweep.csv").string() << "\n";
  return 0;
}

int cmd_eval(const std::string& dataset, const std::string& params_file, const std::string& mask,
             const gf::PropagationConfig& prop) {
  const gf::Dataset ds = gf::load_dataset(dataset);
  json pj = json::parse(gf::read_file(params_file), nullptr, false);
  gf::require(!pj.is_discarded(), gf::ErrKind::ParseError, params_file + ": invalid JSON");
  const auto params = params_from_json(pj, params_file);

  const auto z = gf::propagate_features(ds.features, ds.graph, prop);

  const std::vector<gf::NodeId>* m = &ds.masks.test;
  if (mask == "train") {
    m = &ds.masks.train;
  } else if (mask == "val") {
    m = &ds.masks.val;
  } else {
    gf::require(mask == "test", gf::ErrKind::ConfigInvalid, "--mask must be train|val|test");
  }

  json out{{"mask", mask}, {"metrics", metrics_json(gf::evaluate(params, z, ds.labels, *m))}};
  if (mask == "test" && ds.groups && !ds.groups->empty())
    out["worst-group-acc"] = gf::worst_group_accuracy(params, z, ds.labels, *ds.groups);
  std::cout << out.dump(2) << "\n";
  return 0;
}

int cmd_check(const std::string& selector, const std::string& fault_name, const std::string& out) {
  const auto results = gf::run_checks(selector, gf::fault_from_string(fault_name));
  json report;
  report["selector"] = selector;
  json items = json::array();
  for (const auto& r : results)
    items.push_back({{"name", r.name}, {"pass", r.pass}, {"details", r.details}});
  report["checks"] = std::move(items);
  const bool ok = gf::all_pass(results);
  report["all-pass"] = ok;
  const std::string text = report.dump(2) + "\n";
  if (out.empty())
    std::cout << text;
  else
    gf::write_file(out, text);
  for (const auto& r : results)
    std::cout << (r.pass ? "[PASS] " : "[FAIL] ") << r.name << "\n";
  return ok ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"geometric-Wasserstein reweighting trainer for node classification"};
  app.require_subcommand(1);
  bool no_timestamps = false;
  app.add_flag("--no-timestamps", no_timestamps,
               "omit run-started/wall-seconds for byte-identical outputs");

  // generate
  auto* gen = app.add_subcommand("generate", "write a synthetic shifted dataset");
  std::string gen_kind, gen_out = "dataset";
  std::uint64_t gen_seed = 0;
  int gen_n = 300, gen_d = 5, gen_classes = 2, gen_knn = 5;
  double gen_shift = 2.0, gen_spurious = 0.9, gen_ratio = 100.0, gen_cross = 0.01;
  gen->add_option("kind", gen_kind, "covariate | concept | imbalance")->required();
  gen->add_option("--seed", gen_seed, "RNG seed");
  gen->add_option("--n", gen_n, "nodes per group (per class for imbalance)");
  gen->add_option("--d", gen_d, "feature dimension");
  gen->add_option("--classes", gen_classes, "number of classes");
  gen->add_option("--shift", gen_shift, "covariate: nuisance-axis offset");
  gen->add_option("--spurious", gen_spurious, "concept: spurious agreement in source");
  gen->add_option("--ratio", gen_ratio, "imbalance: max/min train class ratio");
  gen->add_option("--knn", gen_knn, "mutual kNN degree");
  gen->add_option("--cross-p", gen_cross, "cross-group edge probability");
  gen->add_option("--out", gen_out, "output directory");

  // train
  auto* tr = app.add_subcommand("train", "run the minimax training loop");
  TrainCli tr_cli;
  tr_cli.attach(tr);

  // flow
  auto* fl = app.add_subcommand("flow", "run the inner density flow and dump its trace");
  TrainCli fl_cli;
  fl_cli.attach(fl);
  std::string fl_loss_file, fl_params;
  int fl_trace_every = 1;
  fl->add_option("--loss-file", fl_loss_file, "per-node losses, one per line");
  fl->add_option("--params", fl_params, "params.json to derive losses from");
  fl->add_option("--trace-every", fl_trace_every, "keep every k-th step in trace.csv");

  // sweep
  auto* sw = app.add_subcommand("sweep", "grid over t-in and beta");
  TrainCli sw_cli;
  sw_cli.attach(sw);
  std::vector<int> sw_t_in;
  std::vector<double> sw_beta;
  sw->add_option("--t-in-grid", sw_t_in, "t-in grid values")->delimiter(',');
  sw->add_option("--beta-grid", sw_beta, "beta grid values")->delimiter(',');

  // eval
  auto* ev = app.add_subcommand("eval", "evaluate saved params on a dataset mask");
  std::string ev_dataset, ev_params, ev_mask = "test";
  std::uint64_t noop_seed = 0;  // eval and check are deterministic; --seed accepted for uniformity
  gf::PropagationConfig ev_prop;
  ev->add_option("--dataset", ev_dataset, "dataset directory")->required();
  ev->add_option("--params", ev_params, "params.json")->required();
  ev->add_option("--mask", ev_mask, "train | val | test");
  ev->add_option("--hops", ev_prop.hops, "feature propagation rounds");
  ev->add_option("--self-loop-weight", ev_prop.self_loop_weight, "propagation self-loop weight");
  ev->add_option("--seed", noop_seed, "")->group("");

  // check
  auto* ck = app.add_subcommand("check", "run the oracle battery");
  std::string ck_selector = "all", ck_fault = "none", ck_out;
  ck->add_option("selector", ck_selector, "all | flow | gradients | theorem1 | theorem2 | gw2");
  ck->add_option("--fault", ck_fault, "test fixture: none | velocity-sign");
  ck->add_option("--out", ck_out, "write the JSON report here instead of stdout");
  ck->add_option("--seed", noop_seed, "")->group("");

  try {
    app.parse(argc, argv);
    if (gen->parsed())
      return cmd_generate(gen_kind, gen_seed, gen_n, gen_d, gen_classes, gen_shift, gen_spurious,
                          gen_ratio, gen_knn, gen_cross, gen_out);
    if (tr->parsed()) return cmd_train(tr_cli, no_timestamps);
    if (fl->parsed()) return cmd_flow(fl_cli, fl_loss_file, fl_params, fl_trace_every);
    if (sw->parsed()) return cmd_sweep(sw_cli, sw_t_in, sw_beta);
    if (ev->parsed()) return cmd_eval(ev_dataset, ev_params, ev_mask, ev_prop);
    if (ck->parsed()) return cmd_check(ck_selector, ck_fault, ck_out);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  } catch (const gf::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return e.exit_code();
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
  return 2;
}
