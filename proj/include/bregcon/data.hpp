#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace bregcon {

class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Dataset {
  Eigen::MatrixXd features;  // n x d
  Eigen::VectorXi labels;    // 0..J-1
  std::optional<Eigen::VectorXi> groups;
  std::vector<std::string> feature_names;
  std::vector<std::string> class_names;
  std::vector<std::string> group_names;
  int imputed_cells = 0;

  Eigen::Index n() const { return features.rows(); }
  Eigen::Index d() const { return features.cols(); }
  int num_classes() const { return static_cast<int>(class_names.size()); }
  int num_groups() const { return static_cast<int>(group_names.size()); }

  Eigen::VectorXi class_counts() const;
  Eigen::VectorXi group_counts() const;
  Dataset subset(const std::vector<Eigen::Index>& rows) const;
  void validate() const;
};

struct CsvSchema {
  std::string label;
  std::optional<std::string> sensitive;
  std::vector<std::string> categorical;
  std::vector<std::string> drop;
};

// RFC-4180 record splitting; quotes may span lines.
std::vector<std::vector<std::string>> parse_csv(const std::string& text);

Dataset load_csv(const std::string& path, const CsvSchema& schema);
Dataset parse_dataset(const std::string& text, const CsvSchema& schema);

// Writes features, then label and group columns by name, so load_csv can read it back.
void write_csv(const Dataset& data, const std::string& path);

struct Split {
  Dataset train;
  Dataset test;
  std::vector<Eigen::Index> train_rows;
  std::vector<Eigen::Index> test_rows;
};

Split stratified_split(const Dataset& data, double train_fraction, std::uint64_t seed);

struct Standardizer {
  Eigen::RowVectorXd mean;
  Eigen::RowVectorXd scale;

  static Standardizer fit(const Eigen::MatrixXd& x);
  Eigen::MatrixXd apply(const Eigen::MatrixXd& x) const;
};

// Appends a constant column for the bias.
Eigen::MatrixXd design_matrix(const Eigen::MatrixXd& features);

// Binary cache layout (little endian):
//   magic "BRGCDS" u16 version
//   u64 n, u64 d, u32 classes, u32 groups (0 = none)
//   strings (u32 length + bytes): feature names, class names, group names
//   f64 features row-major, i32 labels, i32 groups if present
inline constexpr std::uint16_t kCacheVersion = 1;
void save_cache(const Dataset& data, const std::string& path);
Dataset load_cache(const std::string& path);

}  // namespace bregcon
