#pragma once

#include "advest/math.hpp"

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace advest {

enum class ColumnRole { outcome, covariate };

/// n×d observations with per-column roles. Rows are observations.
class Dataset {
 public:
  Dataset() = default;
  Dataset(Mat rows, std::vector<ColumnRole> roles, std::vector<std::string> names)
      : rows_(std::move(rows)), roles_(std::move(roles)), names_(std::move(names)) {
    if (static_cast<std::size_t>(rows_.cols()) != roles_.size() ||
        roles_.size() != names_.size()) {
      throw std::invalid_argument("Dataset: column metadata does not match matrix width");
    }
  }

  /// All-outcome dataset with generated names x0, x1, ...
  static Dataset outcomes(Mat rows) {
    const auto d = static_cast<std::size_t>(rows.cols());
    std::vector<std::string> names;
    for (std::size_t j = 0; j < d; ++j) names.push_back("x" + std::to_string(j));
    return Dataset(std::move(rows), std::vector<ColumnRole>(d, ColumnRole::outcome),
                   std::move(names));
  }

  [[nodiscard]] Eigen::Index n() const { return rows_.rows(); }
  [[nodiscard]] Eigen::Index d() const { return rows_.cols(); }
  [[nodiscard]] bool empty() const { return rows_.rows() == 0; }
  [[nodiscard]] const Mat& rows() const { return rows_; }
  [[nodiscard]] auto row(Eigen::Index i) const { return rows_.row(i); }
  [[nodiscard]] double operator()(Eigen::Index i, Eigen::Index j) const { return rows_(i, j); }
  [[nodiscard]] const std::vector<ColumnRole>& roles() const { return roles_; }
  [[nodiscard]] const std::vector<std::string>& names() const { return names_; }

  [[nodiscard]] Eigen::Index column(const std::string& name) const {
    for (std::size_t j = 0; j < names_.size(); ++j) {
      if (names_[j] == name) return static_cast<Eigen::Index>(j);
    }
    throw std::out_of_range("Dataset: no column named " + name);
  }

  /// Same metadata, new rows.
  [[nodiscard]] Dataset with_rows(Mat rows) const { return Dataset(std::move(rows), roles_, names_); }

  friend bool operator==(const Dataset& a, const Dataset& b) {
    return a.roles_ == b.roles_ && a.names_ == b.names_ && a.rows_.rows() == b.rows_.rows() &&
           a.rows_.cols() == b.rows_.cols() && a.rows_ == b.rows_;
  }

 private:
  Mat rows_;
  std::vector<ColumnRole> roles_;
  std::vector<std::string> names_;
};

}  // namespace advest
