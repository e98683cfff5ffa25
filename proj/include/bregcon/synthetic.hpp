#pragma once

#include "bregcon/data.hpp"

#include <cstdint>

namespace bregcon {

// Seven-class, 15-feature surrogate with the class proportions of the public dry-bean data
// (1322, 522, 1630, 3546, 1928, 2027, 2636). Classes overlap pairwise in a 4-d latent space;
// features are a random linear embedding plus shape-like nonlinear ratios.
Dataset drybean_surrogate(std::uint64_t seed, int n = 10000);

// Binary labels, two groups (group 1 is the 30% minority). Group 1 follows a different
// decision rule than group 0, and the group is not a feature, so a shared model favours group 0.
Dataset fairness_skew(std::uint64_t seed, int n = 4000);

}  // namespace bregcon
