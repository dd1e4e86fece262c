#pragma once

#include <string>
#include <vector>

namespace nrs {

struct CriterionResult {
  int id = 0;
  std::string name;
  bool pass = false;
  std::string detail;
  double seconds = 0;
};

/// Runs the full verification battery; one result per criterion.
std::vector<CriterionResult> run_acceptance(int workers = 4);

/// Prints "[PASS]/[FAIL] ..." lines; returns true iff everything passed.
bool print_acceptance(const std::vector<CriterionResult>& results);

}  // namespace nrs
