#pragma once

#include <filesystem>
#include <optional>
#include <vector>

#include "geoflow/graph.hpp"
#include "geoflow/model.hpp"

#include <json.hpp>

namespace geoflow {

struct MaskSet {
  std::vector<NodeId> train, val, test;
  bool operator==(const MaskSet&) const = default;
};

struct Dataset {
  WeightedGraph graph;
  FeatureMatrix features;
  LabelVector labels;  // ground truth for every node
  MaskSet masks;
  std::optional<std::vector<std::vector<NodeId>>> groups;  // partition of the test mask
  nlohmann::json meta;

  void validate() const;
};

// Shared graph-construction knobs for the synthetic generators: mutual kNN
// within each group plus sparse Bernoulli cross-group edges, all weight 1.
struct SyntheticGraphConfig {
  int knn = 5;
  double cross_group_p = 0.01;
};

// Two groups (source, target) with identical class-conditional structure on
// the label-carrying axis; the target group's nuisance axis is offset by
// shift_magnitude, so P(X) moves while the Bayes rule stays fixed.
Dataset gen_covariate_shift(std::uint64_t seed, int n_per_group, int d, int num_classes,
                            double shift_magnitude,
                            const SyntheticGraphConfig& gc = {});

// Features = [causal dims | one spurious dim]. The spurious dim agrees with
// the label with probability spurious_strength in the source group and
// 1 - spurious_strength in the target group.
Dataset gen_concept_shift(std::uint64_t seed, int n_per_group, int d, int num_classes,
                          double spurious_strength,
                          const SyntheticGraphConfig& gc = {});

// Balanced Gaussian blobs with the train mask subsampled to a geometric
// class-count profile whose max/min ratio equals imbalance_ratio exactly.
// Val/test masks stay balanced.
Dataset gen_class_imbalance(std::uint64_t seed, int n_per_class, int d, int num_classes,
                            double imbalance_ratio,
                            const SyntheticGraphConfig& gc = {});

// Directory layout: graph.json, features.csv, labels.csv, masks.json,
// groups.json, meta.json. Round-trips bit-exactly.
void save_dataset(const Dataset& ds, const std::filesystem::path& dir);
Dataset load_dataset(const std::filesystem::path& dir);

bool dataset_equal(const Dataset& a, const Dataset& b);

}  // namespace geoflow
