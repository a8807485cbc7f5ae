#pragma once

#include <string>
#include <vector>

namespace geoflow {

struct CheckResult {
  std::string name;
  bool pass = false;
  std::string details;
};

// Test fixture hook: lets the CLI demonstrate that the battery really fails
// when a kernel is wrong (flips one edge velocity between the velocity and
// flux stages of the checked pipeline).
enum class Fault { none, velocity_sign };

Fault fault_from_string(const std::string& s);

// Selector: all | flow | gradients | theorem1 | theorem2 | gw2.
std::vector<CheckResult> run_checks(const std::string& selector, Fault fault = Fault::none);

bool all_pass(const std::vector<CheckResult>& results);

}  // namespace geoflow
