#include "bregcon/acceptance.hpp"

#include <cstdio>
#include <algorithm>
#include <cstdlib>
#include <string>
#include <vector>

int main(int argc, char** argv) {
  bregcon::AcceptanceOptions opts;
  if (const char* t = std::getenv("BREGCON_THREADS")) opts.threads = std::max(1, std::atoi(t));
  std::vector<int> ids;
  for (int i = 1; i < argc; ++i) ids.push_back(std::atoi(argv[i]));
  if (ids.empty())
    for (int i = 1; i <= bregcon::kCriteria; ++i) ids.push_back(i);
  int failed = 0;
  for (int id : ids) {
    const auto r = bregcon::run_criterion(id, opts);
    std::printf("%s\n", bregcon::format_result(r).c_str());
    std::fflush(stdout);
    if (!r.passed) ++failed;
  }
  std::printf("%d/%zu criteria passed\n", static_cast<int>(ids.size()) - failed, ids.size());
  return failed ? 1 : 0;
}
