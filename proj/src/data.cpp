#include "geoflow/data.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

#include "geoflow/io.hpp"
#include "geoflow/rng.hpp"

namespace geoflow {

namespace {

using json = nlohmann::json;

// mutual kNN by Euclidean distance within each group, ties broken by index
std::vector<EdgeTriple> knn_edges(const FeatureMatrix& x, const std::vector<int>& group_of,
                                  int knn) {
  const int n = x.rows;
  std::vector<std::vector<NodeId>> lists(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    std::vector<std::pair<double, NodeId>> cand;
    for (int j = 0; j < n; ++j) {
      if (j == i || group_of[j] != group_of[i]) continue;
      double d2 = 0.0;
      for (int f = 0; f < x.cols; ++f) {
        const double diff = x.at(i, f) - x.at(j, f);
        d2 += diff * diff;
      }
      cand.emplace_back(d2, j);
    }
    const std::size_t take = std::min<std::size_t>(knn, cand.size());
    std::partial_sort(cand.begin(), cand.begin() + static_cast<std::ptrdiff_t>(take), cand.end());
    lists[i].reserve(take);
    for (std::size_t k = 0; k < take; ++k) lists[i].push_back(cand[k].second);
    std::sort(lists[i].begin(), lists[i].end());
  }
  std::vector<EdgeTriple> edges;
  for (int i = 0; i < n; ++i) {
    for (NodeId j : lists[i]) {
      if (j <= i) continue;
      if (std::binary_search(lists[j].begin(), lists[j].end(), static_cast<NodeId>(i)))
        edges.push_back({i, j, 1.0});
    }
  }
  return edges;
}

std::vector<EdgeTriple> cross_group_edges(const std::vector<int>& group_of, double p, Rng& rng) {
  std::vector<EdgeTriple> edges;
  const int n = static_cast<int>(group_of.size());
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j)
      if (group_of[i] != group_of[j] && rng.bernoulli(p)) edges.push_back({i, j, 1.0});
  return edges;
}

// Shift-style masks: the whole source group trains; the target group is
// split into an out-of-distribution validation slice (every 3rd node) and
// the test mask. Model selection therefore sees the shifted distribution,
// matching the protocol the benchmarks use.
void shift_masks(const std::vector<int>& group_of, MaskSet& masks) {
  int target_seen = 0;
  for (NodeId i = 0; i < static_cast<NodeId>(group_of.size()); ++i) {
    if (group_of[i] == 0) {
      masks.train.push_back(i);
    } else if (target_seen++ % 3 == 0) {
      masks.val.push_back(i);
    } else {
      masks.test.push_back(i);
    }
  }
}

void check_generator_args(int n_per_group, int d, int num_classes) {
  require(num_classes >= 2, ErrKind::DegenerateConfig, "need at least two classes");
  require(d >= 2, ErrKind::DegenerateConfig, "need at least two feature dims");
  require(n_per_group >= 2 * num_classes, ErrKind::DegenerateConfig,
          "need at least two nodes per class per group");
}

constexpr double kClassSep = 2.0;
constexpr double kNoiseSigma = 1.0;

double class_center(int c, int num_classes) {
  return kClassSep * (c - 0.5 * (num_classes - 1));
}

}  // namespace

void Dataset::validate() const {
  require(features.rows == graph.num_nodes(), ErrKind::SchemaMismatch,
          "feature rows vs graph nodes");
  require(labels.size() == graph.num_nodes(), ErrKind::SchemaMismatch,
          "label count vs graph nodes");
  std::set<NodeId> seen;
  auto check_mask = [&](const std::vector<NodeId>& mask, const char* name) {
    for (NodeId i : mask) {
      require(i >= 0 && i < graph.num_nodes(), ErrKind::SchemaMismatch,
              std::string(name) + " mask node out of range");
      require(seen.insert(i).second, ErrKind::SchemaMismatch,
              std::string(name) + " mask overlaps another mask at node " + std::to_string(i));
    }
  };
  check_mask(masks.train, "train");
  check_mask(masks.val, "val");
  check_mask(masks.test, "test");
  require(!masks.train.empty(), ErrKind::SchemaMismatch, "train mask is empty");
  for (NodeId i : masks.train)
    require(labels.is_labeled(i), ErrKind::SchemaMismatch,
            "train node " + std::to_string(i) + " is unlabeled");
  if (groups) {
    std::set<NodeId> test_set(masks.test.begin(), masks.test.end());
    std::set<NodeId> grouped;
    for (const auto& grp : *groups)
      for (NodeId i : grp) {
        require(test_set.count(i) == 1, ErrKind::SchemaMismatch,
                "group node " + std::to_string(i) + " not in test mask");
        require(grouped.insert(i).second, ErrKind::SchemaMismatch,
                "group partition repeats node " + std::to_string(i));
      }
    require(grouped.size() == test_set.size(), ErrKind::SchemaMismatch,
            "group partition does not cover the test mask");
  }
}

Dataset gen_covariate_shift(std::uint64_t seed, int n_per_group, int d, int num_classes,
                            double shift_magnitude, const SyntheticGraphConfig& gc) {
  check_generator_args(n_per_group, d, num_classes);
  require(std::isfinite(shift_magnitude), ErrKind::DegenerateConfig, "shift must be finite");
  Rng rng(seed);

  const int n = 2 * n_per_group;
  Dataset ds;
  ds.features = FeatureMatrix::zeros(n, d);
  ds.labels.num_classes = num_classes;
  ds.labels.y.resize(n);
  std::vector<int> group_of(n);

  for (int i = 0; i < n; ++i) {
    const int group = i < n_per_group ? 0 : 1;
    const int c = (i % n_per_group) % num_classes;  // balanced classes in both groups
    group_of[i] = group;
    ds.labels.y[i] = c;
    // axis 0 carries the class signal, axis 1 the group nuisance offset
    ds.features.at(i, 0) = class_center(c, num_classes) + kNoiseSigma * rng.normal();
    ds.features.at(i, 1) = (group == 1 ? shift_magnitude : 0.0) + kNoiseSigma * rng.normal();
    for (int f = 2; f < d; ++f) ds.features.at(i, f) = kNoiseSigma * rng.normal();
  }

  auto edges = knn_edges(ds.features, group_of, gc.knn);
  auto cross = cross_group_edges(group_of, gc.cross_group_p, rng);
  edges.insert(edges.end(), cross.begin(), cross.end());
  ds.graph = WeightedGraph::build(n, edges);

  shift_masks(group_of, ds.masks);

  // evaluation groups: test nodes by class
  std::vector<std::vector<NodeId>> groups(static_cast<std::size_t>(num_classes));
  for (NodeId i : ds.masks.test) groups[ds.labels.y[i]].push_back(i);
  ds.groups = std::move(groups);

  ds.meta = json{{"kind", "covariate"},
                 {"seed", seed},
                 {"n_per_group", n_per_group},
                 {"d", d},
                 {"classes", num_classes},
                 {"shift_magnitude", shift_magnitude},
                 {"knn", gc.knn},
                 {"cross_group_p", gc.cross_group_p}};
  ds.validate();
  return ds;
}

Dataset gen_concept_shift(std::uint64_t seed, int n_per_group, int d, int num_classes,
                          double spurious_strength, const SyntheticGraphConfig& gc) {
  check_generator_args(n_per_group, d, num_classes);
  require(spurious_strength >= 0.0 && spurious_strength <= 1.0, ErrKind::DegenerateConfig,
          "spurious strength must lie in [0,1]");
  Rng rng(seed);

  const int n = 2 * n_per_group;
  const int spurious_dim = d - 1;
  Dataset ds;
  ds.features = FeatureMatrix::zeros(n, d);
  ds.labels.num_classes = num_classes;
  ds.labels.y.resize(n);
  std::vector<int> group_of(n);
  std::vector<char> spurious_agrees(n);

  for (int i = 0; i < n; ++i) {
    const int group = i < n_per_group ? 0 : 1;
    const int c = (i % n_per_group) % num_classes;
    group_of[i] = group;
    ds.labels.y[i] = c;
    ds.features.at(i, 0) = class_center(c, num_classes) + kNoiseSigma * rng.normal();
    for (int f = 1; f < spurious_dim; ++f) ds.features.at(i, f) = kNoiseSigma * rng.normal();

    const double agree_p = group == 0 ? spurious_strength : 1.0 - spurious_strength;
    int shown = c;
    bool agrees = rng.bernoulli(agree_p);
    if (!agrees) {
      shown = static_cast<int>(rng.uniform_index(num_classes - 1));
      if (shown >= c) ++shown;
    }
    spurious_agrees[i] = agrees ? 1 : 0;
    ds.features.at(i, spurious_dim) = class_center(shown, num_classes) + 0.25 * rng.normal();
  }

  auto edges = knn_edges(ds.features, group_of, gc.knn);
  auto cross = cross_group_edges(group_of, gc.cross_group_p, rng);
  edges.insert(edges.end(), cross.begin(), cross.end());
  ds.graph = WeightedGraph::build(n, edges);

  shift_masks(group_of, ds.masks);

  // evaluation groups: spurious dim agrees with the label vs not
  std::vector<std::vector<NodeId>> groups(2);
  for (NodeId i : ds.masks.test) groups[spurious_agrees[i] ? 0 : 1].push_back(i);
  ds.groups = std::move(groups);

  ds.meta = json{{"kind", "concept"},
                 {"seed", seed},
                 {"n_per_group", n_per_group},
                 {"d", d},
                 {"classes", num_classes},
                 {"spurious_strength", spurious_strength},
                 {"knn", gc.knn},
                 {"cross_group_p", gc.cross_group_p}};
  ds.validate();
  return ds;
}

Dataset gen_class_imbalance(std::uint64_t seed, int n_per_class, int d, int num_classes,
                            double imbalance_ratio, const SyntheticGraphConfig& gc) {
  check_generator_args(2 * n_per_class, d, num_classes);
  require(imbalance_ratio >= 1.0, ErrKind::DegenerateConfig, "imbalance ratio must be >= 1");
  require(n_per_class >= 4, ErrKind::DegenerateConfig, "need at least 4 nodes per class");
  Rng rng(seed);

  const int n = n_per_class * num_classes;
  Dataset ds;
  ds.features = FeatureMatrix::zeros(n, d);
  ds.labels.num_classes = num_classes;
  ds.labels.y.resize(n);
  std::vector<int> group_of(n, 0);

  for (int i = 0; i < n; ++i) {
    const int c = i % num_classes;
    ds.labels.y[i] = c;
    ds.features.at(i, 0) = class_center(c, num_classes) + kNoiseSigma * rng.normal();
    for (int f = 1; f < d; ++f) ds.features.at(i, f) = kNoiseSigma * rng.normal();
  }

  ds.graph = WeightedGraph::build(n, knn_edges(ds.features, group_of, gc.knn));

  // per class: 50% train pool, 25% val, 25% test (deterministic pattern)
  std::vector<std::vector<NodeId>> pool(static_cast<std::size_t>(num_classes));
  std::vector<int> seen(static_cast<std::size_t>(num_classes), 0);
  for (int i = 0; i < n; ++i) {
    const int c = ds.labels.y[i];
    const int slot = seen[c]++ % 4;
    if (slot <= 1)
      pool[c].push_back(i);
    else if (slot == 2)
      ds.masks.val.push_back(i);
    else
      ds.masks.test.push_back(i);
  }

  // geometric class-count profile: count_c = floor(major * ratio^(-c/(C-1))),
  // clamped to >= 1; endpoints give max/min == ratio exactly
  const std::size_t pool_size = pool[0].size();
  const long long n_minor =
      std::max<long long>(1, static_cast<long long>(std::floor(pool_size / imbalance_ratio)));
  const long long n_major = static_cast<long long>(std::llround(n_minor * imbalance_ratio));
  require(n_major <= static_cast<long long>(pool_size), ErrKind::InsufficientSamples,
          "class pool of " + std::to_string(pool_size) + " cannot realize ratio " +
              std::to_string(imbalance_ratio));
  for (int c = 0; c < num_classes; ++c) {
    long long count;
    if (c == 0) {
      count = n_major;
    } else if (c == num_classes - 1) {
      count = n_minor;
    } else {
      const double frac = static_cast<double>(c) / (num_classes - 1);
      count = static_cast<long long>(
          std::floor(static_cast<double>(n_major) * std::pow(imbalance_ratio, -frac)));
    }
    count = std::max<long long>(1, count);
    for (long long k = 0; k < count; ++k) ds.masks.train.push_back(pool[c][k]);
  }
  std::sort(ds.masks.train.begin(), ds.masks.train.end());

  std::vector<std::vector<NodeId>> groups(static_cast<std::size_t>(num_classes));
  for (NodeId i : ds.masks.test) groups[ds.labels.y[i]].push_back(i);
  ds.groups = std::move(groups);

  ds.meta = json{{"kind", "imbalance"},
                 {"seed", seed},
                 {"n_per_class", n_per_class},
                 {"d", d},
                 {"classes", num_classes},
                 {"imbalance_ratio", imbalance_ratio},
                 {"knn", gc.knn},
                 {"cross_group_p", gc.cross_group_p}};
  ds.validate();
  return ds;
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : line) {
    if (ch == ',') {
      out.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(ch);
    }
  }
  out.push_back(cur);
  return out;
}

json require_key(const json& j, const std::string& key, const std::string& file) {
  require(j.contains(key), ErrKind::SchemaMismatch, file + ": missing key '" + key + "'");
  return j.at(key);
}

json parse_json_file(const std::filesystem::path& p) {
  const std::string text = read_file(p);
  json j = json::parse(text, nullptr, false);
  require(!j.is_discarded(), ErrKind::ParseError, p.string() + ": invalid JSON");
  return j;
}

}  // namespace

void save_dataset(const Dataset& ds, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  require(!ec, ErrKind::IoFailure, "cannot create " + dir.string());

  json graph_j;
  graph_j["num_nodes"] = ds.graph.num_nodes();
  json edges = json::array();
  for (const auto& t : ds.graph.edge_triples()) edges.push_back({t.i, t.j, t.w});
  graph_j["edges"] = std::move(edges);
  write_file(dir / "graph.json", graph_j.dump(2) + "\n");

  std::ostringstream feat;
  for (int i = 0; i < ds.features.rows; ++i) {
    for (int f = 0; f < ds.features.cols; ++f) {
      if (f) feat << ',';
      feat << format_double(ds.features.at(i, f));
    }
    feat << '\n';
  }
  write_file(dir / "features.csv", feat.str());

  std::ostringstream lab;
  lab << "node_id,label\n";
  for (int i = 0; i < ds.labels.size(); ++i) {
    lab << i << ',';
    if (ds.labels.is_labeled(i))
      lab << ds.labels.y[i];
    else
      lab << '-';
    lab << '\n';
  }
  write_file(dir / "labels.csv", lab.str());

  json masks_j{{"train", ds.masks.train}, {"val", ds.masks.val}, {"test", ds.masks.test}};
  write_file(dir / "masks.json", masks_j.dump(2) + "\n");

  json groups_j = json::array();
  if (ds.groups)
    for (const auto& grp : *ds.groups) groups_j.push_back(grp);
  write_file(dir / "groups.json", groups_j.dump(2) + "\n");

  json meta = ds.meta.is_null() ? json::object() : ds.meta;
  meta["num_classes"] = ds.labels.num_classes;
  write_file(dir / "meta.json", meta.dump(2) + "\n");
}

Dataset load_dataset(const std::filesystem::path& dir) {
  for (const char* name : {"graph.json", "features.csv", "labels.csv", "masks.json", "meta.json"})
    require(std::filesystem::exists(dir / name), ErrKind::SchemaMismatch,
            dir.string() + ": missing " + name);

  Dataset ds;
  {
    json g = parse_json_file(dir / "graph.json");
    const int n = require_key(g, "num_nodes", "graph.json").get<int>();
    std::vector<EdgeTriple> triples;
    for (const auto& e : require_key(g, "edges", "graph.json")) {
      require(e.is_array() && (e.size() == 2 || e.size() == 3), ErrKind::SchemaMismatch,
              "graph.json: edge entries must be [i, j] or [i, j, w]");
      EdgeTriple t;
      t.i = e[0].get<NodeId>();
      t.j = e[1].get<NodeId>();
      t.w = e.size() == 3 ? e[2].get<double>() : 1.0;
      triples.push_back(t);
    }
    ds.graph = WeightedGraph::build(n, triples);
  }
  {
    const std::string text = read_file(dir / "features.csv");
    std::istringstream in(text);
    std::string line;
    std::vector<double> values;
    int rows = 0, cols = -1, line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      if (line.empty()) continue;
      auto cells = split_csv_line(line);
      if (cols == -1)
        cols = static_cast<int>(cells.size());
      else
        require(static_cast<int>(cells.size()) == cols, ErrKind::ParseError,
                "features.csv row " + std::to_string(line_no) + ": expected " +
                    std::to_string(cols) + " columns, got " + std::to_string(cells.size()));
      for (const auto& cell : cells)
        values.push_back(parse_double(cell, "features.csv row " + std::to_string(line_no)));
      ++rows;
    }
    require(rows > 0, ErrKind::ParseError, "features.csv is empty");
    ds.features = {rows, cols, std::move(values)};
  }
  {
    const std::string text = read_file(dir / "labels.csv");
    std::istringstream in(text);
    std::string line;
    std::getline(in, line);
    require(line == "node_id,label", ErrKind::SchemaMismatch,
            "labels.csv: expected header 'node_id,label'");
    ds.labels.y.assign(static_cast<std::size_t>(ds.features.rows), kUnlabeled);
    int line_no = 1;
    while (std::getline(in, line)) {
      ++line_no;
      if (line.empty()) continue;
      auto cells = split_csv_line(line);
      require(cells.size() == 2, ErrKind::ParseError,
              "labels.csv row " + std::to_string(line_no) + ": expected 2 columns");
      const long long i = parse_int(cells[0], "labels.csv row " + std::to_string(line_no));
      require(i >= 0 && i < ds.features.rows, ErrKind::ParseError,
              "labels.csv row " + std::to_string(line_no) + ": node id out of range");
      if (cells[1] != "-")
        ds.labels.y[static_cast<std::size_t>(i)] =
            static_cast<int>(parse_int(cells[1], "labels.csv row " + std::to_string(line_no)));
    }
  }
  {
    json m = parse_json_file(dir / "masks.json");
    ds.masks.train = require_key(m, "train", "masks.json").get<std::vector<NodeId>>();
    ds.masks.val = require_key(m, "val", "masks.json").get<std::vector<NodeId>>();
    ds.masks.test = require_key(m, "test", "masks.json").get<std::vector<NodeId>>();
  }
  if (std::filesystem::exists(dir / "groups.json")) {
    json g = parse_json_file(dir / "groups.json");
    require(g.is_array(), ErrKind::SchemaMismatch, "groups.json: expected an array of arrays");
    std::vector<std::vector<NodeId>> groups;
    for (const auto& grp : g) groups.push_back(grp.get<std::vector<NodeId>>());
    if (!groups.empty()) ds.groups = std::move(groups);
  }
  {
    ds.meta = parse_json_file(dir / "meta.json");
    ds.labels.num_classes = require_key(ds.meta, "num_classes", "meta.json").get<int>();
    ds.meta.erase("num_classes");
  }
  ds.validate();
  return ds;
}

bool dataset_equal(const Dataset& a, const Dataset& b) {
  return a.graph == b.graph && a.features == b.features && a.labels == b.labels &&
         a.masks == b.masks && a.groups == b.groups;
}

}  // namespace geoflow
