#include "bregcon/data.hpp"

#include "bregcon/log.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <map>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

namespace bregcon {

Eigen::VectorXi Dataset::class_counts() const {
  Eigen::VectorXi c = Eigen::VectorXi::Zero(num_classes());
  for (Eigen::Index i = 0; i < labels.size(); ++i) c(labels(i)) += 1;
  return c;
}

Eigen::VectorXi Dataset::group_counts() const {
  Eigen::VectorXi c = Eigen::VectorXi::Zero(num_groups());
  if (groups)
    for (Eigen::Index i = 0; i < groups->size(); ++i) c((*groups)(i)) += 1;
  return c;
}

Dataset Dataset::subset(const std::vector<Eigen::Index>& rows) const {
  Dataset out;
  out.feature_names = feature_names;
  out.class_names = class_names;
  out.group_names = group_names;
  out.features.resize(static_cast<Eigen::Index>(rows.size()), d());
  out.labels.resize(static_cast<Eigen::Index>(rows.size()));
  if (groups) out.groups = Eigen::VectorXi(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    const auto i = static_cast<Eigen::Index>(r);
    out.features.row(i) = features.row(rows[r]);
    out.labels(i) = labels(rows[r]);
    if (groups) (*out.groups)(i) = (*groups)(rows[r]);
  }
  return out;
}

void Dataset::validate() const {
  if (n() == 0) throw DataError("dataset is empty");
  if (labels.size() != n()) throw DataError("label count does not match rows");
  if (!features.allFinite()) throw DataError("features contain non-finite values");
  if (num_classes() < 2) throw DataError("need at least two classes");
  if (labels.minCoeff() < 0 || labels.maxCoeff() >= num_classes()) throw DataError("label out of range");
  if (groups) {
    if (groups->size() != n()) throw DataError("group count does not match rows");
    if (groups->minCoeff() < 0 || groups->maxCoeff() >= num_groups()) throw DataError("group out of range");
  }
}

// ---------------------------------------------------------------- CSV

std::vector<std::vector<std::string>> parse_csv(const std::string& text) {
  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> row;
  std::string field;
  bool quoted = false, field_started = false;
  std::size_t i = 0;
  auto end_field = [&] {
    row.push_back(std::move(field));
    field.clear();
    field_started = false;
  };
  auto end_row = [&] {
    end_field();
    if (!(row.size() == 1 && row[0].empty())) rows.push_back(std::move(row));
    row.clear();
  };
  while (i < text.size()) {
    const char c = text[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          field += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        field += c;
      }
    } else if (c == '"' && !field_started) {
      quoted = true;
      field_started = true;
    } else if (c == ',') {
      end_field();
    } else if (c == '\n' || c == '\r') {
      if (c == '\r' && i + 1 < text.size() && text[i + 1] == '\n') ++i;
      end_row();
    } else {
      field += c;
      field_started = true;
    }
    ++i;
  }
  if (quoted) throw DataError("csv: unterminated quoted field");
  if (field_started || !row.empty()) end_row();
  return rows;
}

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t");
  return s.substr(b, e - b + 1);
}

bool is_missing(const std::string& s) { return s.empty() || s == "?" || s == "NA" || s == "NaN" || s == "nan"; }

bool parse_double(const std::string& s, double& out) {
  const char* first = s.data();
  const char* last = s.data() + s.size();
  if (first != last && *first == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, last, out);
  return ec == std::errc() && ptr == last && std::isfinite(out);
}

// Numeric ordering when every value parses, else lexicographic.
std::vector<std::string> ordered_levels(const std::set<std::string>& values) {
  std::vector<std::string> out(values.begin(), values.end());
  bool numeric = true;
  for (const auto& v : out) {
    double tmp;
    numeric = numeric && parse_double(v, tmp);
  }
  if (numeric) {
    std::stable_sort(out.begin(), out.end(), [](const std::string& a, const std::string& b) {
      double x, y;
      parse_double(a, x);
      parse_double(b, y);
      return x < y;
    });
  }
  return out;
}

int column_index(const std::vector<std::string>& header, const std::string& name) {
  for (std::size_t j = 0; j < header.size(); ++j)
    if (header[j] == name) return static_cast<int>(j);
  throw DataError("csv: column '" + name + "' not found");
}

}  // namespace

Dataset parse_dataset(const std::string& text, const CsvSchema& schema) {
  auto rows = parse_csv(text);
  if (rows.empty()) throw DataError("csv: empty file");
  std::vector<std::string> header;
  for (auto& h : rows.front()) header.push_back(trim(h));
  rows.erase(rows.begin());
  if (rows.empty()) throw DataError("csv: no data rows");
  for (std::size_t r = 0; r < rows.size(); ++r)
    if (rows[r].size() != header.size())
      throw DataError("csv: row " + std::to_string(r + 2) + " has " + std::to_string(rows[r].size()) +
                      " fields, expected " + std::to_string(header.size()));

  const int label_col = column_index(header, schema.label);
  const int group_col = schema.sensitive ? column_index(header, *schema.sensitive) : -1;
  std::set<int> categorical, dropped;
  for (const auto& c : schema.categorical) categorical.insert(column_index(header, c));
  for (const auto& c : schema.drop) dropped.insert(column_index(header, c));

  const auto n = static_cast<Eigen::Index>(rows.size());
  Dataset data;

  auto map_levels = [&](int col, std::vector<std::string>& names) {
    std::set<std::string> values;
    for (std::size_t r = 0; r < rows.size(); ++r) {
      const std::string v = trim(rows[r][col]);
      if (is_missing(v))
        throw DataError("csv: missing value at row " + std::to_string(r + 2) + ", column '" + header[col] + "'");
      values.insert(v);
    }
    names = ordered_levels(values);
    std::map<std::string, int> index;
    for (std::size_t k = 0; k < names.size(); ++k) index[names[k]] = static_cast<int>(k);
    Eigen::VectorXi out(n);
    for (std::size_t r = 0; r < rows.size(); ++r) out(static_cast<Eigen::Index>(r)) = index.at(trim(rows[r][col]));
    return out;
  };
  data.labels = map_levels(label_col, data.class_names);
  if (group_col >= 0) data.groups = map_levels(group_col, data.group_names);

  std::vector<Eigen::VectorXd> columns;
  for (int col = 0; col < static_cast<int>(header.size()); ++col) {
    if (col == label_col || col == group_col || dropped.count(col)) continue;
    if (categorical.count(col)) {
      std::set<std::string> values;
      for (const auto& row : rows) {
        const std::string v = trim(row[col]);
        values.insert(is_missing(v) ? std::string("<missing>") : v);
      }
      const auto levels = ordered_levels(values);
      for (const auto& level : levels) {
        Eigen::VectorXd c(n);
        for (Eigen::Index r = 0; r < n; ++r) {
          std::string v = trim(rows[r][col]);
          if (is_missing(v)) v = "<missing>";
          c(r) = v == level ? 1.0 : 0.0;
        }
        columns.push_back(std::move(c));
        data.feature_names.push_back(header[col] + "=" + level);
      }
      continue;
    }
    Eigen::VectorXd c(n);
    std::vector<Eigen::Index> missing;
    std::vector<double> seen;
    for (Eigen::Index r = 0; r < n; ++r) {
      const std::string v = trim(rows[r][col]);
      if (is_missing(v)) {
        missing.push_back(r);
        continue;
      }
      double x;
      if (!parse_double(v, x))
        throw DataError("csv: unparseable cell at row " + std::to_string(r + 2) + ", column '" + header[col] +
                        "': '" + v + "'");
      c(r) = x;
      seen.push_back(x);
    }
    if (!missing.empty()) {
      if (seen.empty()) throw DataError("csv: column '" + header[col] + "' has no values");
      std::sort(seen.begin(), seen.end());
      const std::size_t m = seen.size();
      const double median = m % 2 ? seen[m / 2] : 0.5 * (seen[m / 2 - 1] + seen[m / 2]);
      for (auto r : missing) c(r) = median;
      data.imputed_cells += static_cast<int>(missing.size());
    }
    columns.push_back(std::move(c));
    data.feature_names.push_back(header[col]);
  }
  data.features.resize(n, static_cast<Eigen::Index>(columns.size()));
  for (std::size_t j = 0; j < columns.size(); ++j) data.features.col(static_cast<Eigen::Index>(j)) = columns[j];
  if (data.imputed_cells > 0) log_warning("imputed " + std::to_string(data.imputed_cells) + " missing cells with column medians");
  data.validate();
  return data;
}

Dataset load_csv(const std::string& path, const CsvSchema& schema) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_dataset(ss.str(), schema);
}

namespace {

std::string quote(const std::string& s) {
  if (s.find_first_of(",\"\r\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

void write_csv(const Dataset& data, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write '" + path + "'");
  for (const auto& name : data.feature_names) out << quote(name) << ',';
  out << "label";
  if (data.groups) out << ",group";
  out << '\n';
  for (Eigen::Index i = 0; i < data.n(); ++i) {
    for (Eigen::Index j = 0; j < data.d(); ++j) out << format_double(data.features(i, j)) << ',';
    out << quote(data.class_names[data.labels(i)]);
    if (data.groups) out << ',' << quote(data.group_names[(*data.groups)(i)]);
    out << '\n';
  }
}

// ---------------------------------------------------------------- split

Split stratified_split(const Dataset& data, double train_fraction, std::uint64_t seed) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) throw DataError("train fraction must lie in (0, 1)");
  std::mt19937_64 rng(seed);
  Split s;
  for (int c = 0; c < data.num_classes(); ++c) {
    std::vector<Eigen::Index> idx;
    for (Eigen::Index i = 0; i < data.n(); ++i)
      if (data.labels(i) == c) idx.push_back(i);
    if (idx.empty()) continue;
    std::shuffle(idx.begin(), idx.end(), rng);
    const auto nc = static_cast<long>(idx.size());
    long n_train = std::lround(train_fraction * static_cast<double>(nc));
    if (nc == 1) {
      log_warning("class '" + data.class_names[c] + "' has a single sample; placed in train");
      n_train = 1;
    } else {
      n_train = std::clamp(n_train, 1L, nc - 1);
    }
    s.train_rows.insert(s.train_rows.end(), idx.begin(), idx.begin() + n_train);
    s.test_rows.insert(s.test_rows.end(), idx.begin() + n_train, idx.end());
  }
  std::sort(s.train_rows.begin(), s.train_rows.end());
  std::sort(s.test_rows.begin(), s.test_rows.end());
  s.train = data.subset(s.train_rows);
  s.test = data.subset(s.test_rows);
  return s;
}

Standardizer Standardizer::fit(const Eigen::MatrixXd& x) {
  Standardizer s;
  s.mean = x.colwise().mean();
  s.scale = ((x.rowwise() - s.mean).array().square().colwise().sum() / std::max<double>(1.0, double(x.rows())))
                .sqrt()
                .matrix();
  for (Eigen::Index j = 0; j < s.scale.size(); ++j)
    if (s.scale(j) < 1e-12) s.scale(j) = 1.0;
  return s;
}

Eigen::MatrixXd Standardizer::apply(const Eigen::MatrixXd& x) const {
  return ((x.rowwise() - mean).array().rowwise() / scale.array()).matrix();
}

Eigen::MatrixXd design_matrix(const Eigen::MatrixXd& features) {
  Eigen::MatrixXd a(features.rows(), features.cols() + 1);
  a.leftCols(features.cols()) = features;
  a.col(features.cols()).setOnes();
  return a;
}

// ---------------------------------------------------------------- cache

namespace {

constexpr char kMagic[6] = {'B', 'R', 'G', 'C', 'D', 'S'};

template <typename T>
void put(std::ostream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <typename T>
T get(std::istream& in) {
  T v{};
  if (!in.read(reinterpret_cast<char*>(&v), sizeof v)) throw DataError("cache: truncated file");
  return v;
}

void put_string(std::ostream& out, const std::string& s) {
  put<std::uint32_t>(out, static_cast<std::uint32_t>(s.size()));
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string get_string(std::istream& in) {
  const auto len = get<std::uint32_t>(in);
  std::string s(len, '\0');
  if (len && !in.read(s.data(), len)) throw DataError("cache: truncated string");
  return s;
}

}  // namespace

void save_cache(const Dataset& data, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write '" + path + "'");
  out.write(kMagic, sizeof kMagic);
  put<std::uint16_t>(out, kCacheVersion);
  put<std::uint64_t>(out, static_cast<std::uint64_t>(data.n()));
  put<std::uint64_t>(out, static_cast<std::uint64_t>(data.d()));
  put<std::uint32_t>(out, static_cast<std::uint32_t>(data.num_classes()));
  put<std::uint32_t>(out, data.groups ? static_cast<std::uint32_t>(data.num_groups()) : 0u);
  for (const auto& s : data.feature_names) put_string(out, s);
  for (const auto& s : data.class_names) put_string(out, s);
  if (data.groups)
    for (const auto& s : data.group_names) put_string(out, s);
  for (Eigen::Index i = 0; i < data.n(); ++i)
    for (Eigen::Index j = 0; j < data.d(); ++j) put<double>(out, data.features(i, j));
  for (Eigen::Index i = 0; i < data.n(); ++i) put<std::int32_t>(out, data.labels(i));
  if (data.groups)
    for (Eigen::Index i = 0; i < data.n(); ++i) put<std::int32_t>(out, (*data.groups)(i));
}

Dataset load_cache(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read '" + path + "'");
  char magic[6];
  if (!in.read(magic, sizeof magic) || std::memcmp(magic, kMagic, sizeof magic) != 0)
    throw DataError("cache: bad magic");
  const auto version = get<std::uint16_t>(in);
  if (version != kCacheVersion) throw DataError("cache: unsupported version " + std::to_string(version));
  const auto n = static_cast<Eigen::Index>(get<std::uint64_t>(in));
  const auto d = static_cast<Eigen::Index>(get<std::uint64_t>(in));
  const auto classes = get<std::uint32_t>(in);
  const auto groups = get<std::uint32_t>(in);
  Dataset data;
  for (Eigen::Index j = 0; j < d; ++j) data.feature_names.push_back(get_string(in));
  for (std::uint32_t k = 0; k < classes; ++k) data.class_names.push_back(get_string(in));
  for (std::uint32_t k = 0; k < groups; ++k) data.group_names.push_back(get_string(in));
  data.features.resize(n, d);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < d; ++j) data.features(i, j) = get<double>(in);
  data.labels.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) data.labels(i) = get<std::int32_t>(in);
  if (groups) {
    Eigen::VectorXi g(n);
    for (Eigen::Index i = 0; i < n; ++i) g(i) = get<std::int32_t>(in);
    data.groups = std::move(g);
  }
  data.validate();
  return data;
}

}  // namespace bregcon
