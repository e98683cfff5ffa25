#pragma once

// Small seeded generators for the property tests.

#include <Eigen/Dense>

#include <cstdint>
#include <random>

namespace gen {

struct Rng {
  std::mt19937_64 eng;
  explicit Rng(std::uint64_t seed) : eng(seed) {}

  double uniform(double lo = 0.0, double hi = 1.0) { return std::uniform_real_distribution<double>(lo, hi)(eng); }
  double normal() { return std::normal_distribution<double>()(eng); }
  int integer(int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(eng); }

  Eigen::VectorXd vec(Eigen::Index n, double scale = 1.0) {
    Eigen::VectorXd v(n);
    for (Eigen::Index i = 0; i < n; ++i) v(i) = scale * normal();
    return v;
  }
  Eigen::MatrixXd mat(Eigen::Index r, Eigen::Index c, double scale = 1.0) {
    Eigen::MatrixXd m(r, c);
    for (Eigen::Index j = 0; j < c; ++j)
      for (Eigen::Index i = 0; i < r; ++i) m(i, j) = scale * normal();
    return m;
  }
  Eigen::VectorXi labels(Eigen::Index n, int classes) {
    Eigen::VectorXi b(n);
    for (Eigen::Index i = 0; i < n; ++i) b(i) = integer(0, classes - 1);
    // every class present
    for (int c = 0; c < classes && c < n; ++c) b(c) = c;
    return b;
  }
  // rows sum to 1, entries strictly positive
  Eigen::MatrixXd probs(Eigen::Index n, int classes) {
    Eigen::MatrixXd p(n, classes);
    for (Eigen::Index i = 0; i < n; ++i) {
      for (int j = 0; j < classes; ++j) p(i, j) = uniform(1e-4, 1.0);
      p.row(i) /= p.row(i).sum();
    }
    return p;
  }
};

inline double rel(double a, double b) { return std::abs(a - b) / std::max(1.0, std::abs(b)); }

}  // namespace gen
