#include "bregcon/synthetic.hpp"

#include <array>
#include <cmath>
#include <random>
#include <string>

namespace bregcon {

Dataset drybean_surrogate(std::uint64_t seed, int n) {
  static constexpr std::array<int, 7> kCounts{1322, 522, 1630, 3546, 1928, 2027, 2636};
  static constexpr std::array<std::array<double, 4>, 7> kMeans{{
      {1.6, 0.9, -0.4, 0.0},
      {5.0, 4.0, 3.0, 2.0},
      {2.2, 1.8, 0.4, 0.6},
      {-1.2, -0.9, 0.2, -0.3},
      {0.6, 2.6, -1.4, 1.1},
      {-0.3, 0.1, 1.6, -1.2},
      {-0.4, -1.0, 0.3, 0.5},
  }};
  static constexpr std::array<double, 7> kSpread{0.5, 0.4, 0.45, 0.45, 0.45, 0.5, 0.5};
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd;
  const int J = 7, latent = 4, linear_dims = 10, d = 15;

  Eigen::MatrixXd embed(linear_dims, latent);
  for (int i = 0; i < linear_dims; ++i)
    for (int j = 0; j < latent; ++j) embed(i, j) = nd(rng);

  const int total = 13611;
  std::vector<int> sizes(J);
  int assigned = 0;
  for (int c = 0; c < J; ++c) {
    sizes[c] = static_cast<int>(std::lround(static_cast<double>(kCounts[c]) * n / total));
    assigned += sizes[c];
  }
  sizes[3] += n - assigned;

  Dataset data;
  data.features.resize(n, d);
  data.labels.resize(n);
  int row = 0;
  for (int c = 0; c < J; ++c) {
    for (int k = 0; k < sizes[c]; ++k, ++row) {
      Eigen::Vector4d z;
      for (int j = 0; j < latent; ++j) z(j) = kMeans[c][j] + kSpread[c] * nd(rng);
      data.features.row(row).head(linear_dims) = (embed * z).transpose();
      for (int j = 0; j < linear_dims; ++j) data.features(row, j) += 0.3 * nd(rng);
      data.features(row, 10) = z(0) * z(1);
      data.features(row, 11) = std::exp(z(2) / 3.0);
      data.features(row, 12) = z(0) * z(0);
      data.features(row, 13) = std::abs(z(3));
      data.features(row, 14) = z(1) / (1.0 + std::abs(z(2)));
      data.labels(row) = c;
    }
  }
  for (int j = 0; j < d; ++j) data.feature_names.push_back("f" + std::to_string(j));
  data.class_names = {"c0", "c1", "c2", "c3", "c4", "c5", "c6"};
  data.validate();
  return data;
}

Dataset fairness_skew(std::uint64_t seed, int n) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd;
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const int d = 5;
  Dataset data;
  data.features.resize(n, d);
  data.labels.resize(n);
  Eigen::VectorXi groups(n);
  for (int i = 0; i < n; ++i) {
    const int g = unit(rng) < 0.3 ? 1 : 0;
    groups(i) = g;
    for (int j = 0; j < d; ++j) data.features(i, j) = nd(rng);
    data.features(i, 3) += g ? 0.5 : 0.0;  // weak proxy for the group
    const auto& x = data.features.row(i);
    const double margin = g == 0 ? 2.0 * x(0) + 1.5 * x(1) + 0.3 * nd(rng) : 2.0 * x(0) - 1.5 * x(1) + 0.8 * nd(rng);
    data.labels(i) = margin > 0.0 ? 1 : 0;
  }
  data.groups = groups;
  for (int j = 0; j < d; ++j) data.feature_names.push_back("x" + std::to_string(j));
  data.class_names = {"neg", "pos"};
  data.group_names = {"g0", "g1"};
  data.validate();
  return data;
}

}  // namespace bregcon
