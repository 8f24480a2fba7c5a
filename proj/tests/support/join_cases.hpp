#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace joinaug::testing {

struct JoinCaseResult {
  std::size_t checks = 0;
  std::vector<std::string> failures;
};

/// Builds a random base/foreign pair from `case_id` and checks every join
/// variant against brute-force oracles: row count and order preserved, base
/// cells untouched, hard and nearest-neighbour matches equal to a linear
/// scan, two-way values inside the bracketing pair, pre-aggregated keys
/// unique with numeric means matching a direct average.
JoinCaseResult check_join_case(std::size_t case_id);

}  // namespace joinaug::testing
