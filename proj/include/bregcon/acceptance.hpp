#pragma once

#include <string>
#include <vector>

namespace bregcon {

struct CriterionResult {
  int id = 0;
  std::string name;
  bool passed = false;  // checks hold and seconds < limit
  std::string detail;
  double seconds = 0.0;
  double limit = 0.0;
};

struct AcceptanceOptions {
  int threads = 1;
};

// Criteria 1..9; see README for what each one runs.
inline constexpr int kCriteria = 9;

const char* criterion_name(int id);
CriterionResult run_criterion(int id, const AcceptanceOptions& opts = {});

// "criterion 3 [eps-optimality]: PASS (...) 0.01s / 10s"
std::string format_result(const CriterionResult& r);

}  // namespace bregcon
