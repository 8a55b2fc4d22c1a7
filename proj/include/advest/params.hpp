#pragma once

#include "advest/math.hpp"

#include <cmath>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace advest {

/// Internal reparametrization used by the outer optimizer.
enum class ParamTransform { identity, log, atanh };

/// Named structural parameters with box bounds. Fixed constants (e.g. a
/// discount factor) are carried along but never optimized.
class ParamVector {
 public:
  struct Entry {
    std::string name;
    double value = 0.0;
    double lower = -kInf;
    double upper = kInf;
    ParamTransform transform = ParamTransform::identity;

    friend bool operator==(const Entry&, const Entry&) = default;
  };

  ParamVector() = default;

  ParamVector& add(std::string name, double value, double lower = -kInf, double upper = kInf,
                   ParamTransform transform = ParamTransform::identity) {
    for (const auto& e : entries_) {
      if (e.name == name) throw std::invalid_argument("ParamVector: duplicate name " + name);
    }
    if (fixed_.count(name)) throw std::invalid_argument("ParamVector: name already fixed " + name);
    if (!(lower <= upper)) throw std::invalid_argument("ParamVector: lower > upper for " + name);
    Entry e{std::move(name), value, lower, upper, transform};
    check_bounds(e);
    entries_.push_back(std::move(e));
    return *this;
  }

  ParamVector& fix(const std::string& name, double value) {
    for (const auto& e : entries_) {
      if (e.name == name) throw std::invalid_argument("ParamVector: cannot fix free parameter " + name);
    }
    fixed_[name] = value;
    return *this;
  }

  [[nodiscard]] std::size_t size() const { return entries_.size(); }
  [[nodiscard]] const std::vector<Entry>& entries() const { return entries_; }
  [[nodiscard]] const std::map<std::string, double>& fixed() const { return fixed_; }

  [[nodiscard]] bool has(const std::string& name) const {
    return index_of(name) >= 0 || fixed_.count(name) > 0;
  }

  [[nodiscard]] int index_of(const std::string& name) const {
    for (std::size_t i = 0; i < entries_.size(); ++i) {
      if (entries_[i].name == name) return static_cast<int>(i);
    }
    return -1;
  }

  /// Free or fixed value by name.
  [[nodiscard]] double get(const std::string& name) const {
    if (const int i = index_of(name); i >= 0) return entries_[static_cast<std::size_t>(i)].value;
    if (auto it = fixed_.find(name); it != fixed_.end()) return it->second;
    throw std::out_of_range("ParamVector: unknown parameter " + name);
  }

  [[nodiscard]] double get_or(const std::string& name, double fallback) const {
    return has(name) ? get(name) : fallback;
  }

  [[nodiscard]] double operator[](std::size_t i) const { return entries_.at(i).value; }

  void set(std::size_t i, double value) {
    entries_.at(i).value = value;
  }

  [[nodiscard]] ParamVector with(const std::string& name, double value) const {
    ParamVector out = *this;
    const int i = index_of(name);
    if (i >= 0) {
      out.entries_[static_cast<std::size_t>(i)].value = value;
    } else if (fixed_.count(name)) {
      out.fixed_[name] = value;
    } else {
      throw std::out_of_range("ParamVector: unknown parameter " + name);
    }
    return out;
  }

  [[nodiscard]] Vec values() const {
    Vec v(static_cast<Eigen::Index>(entries_.size()));
    for (std::size_t i = 0; i < entries_.size(); ++i) v(static_cast<Eigen::Index>(i)) = entries_[i].value;
    return v;
  }

  [[nodiscard]] ParamVector with_values(const Vec& v) const {
    if (static_cast<std::size_t>(v.size()) != entries_.size()) {
      throw std::invalid_argument("ParamVector: value count mismatch");
    }
    ParamVector out = *this;
    for (std::size_t i = 0; i < entries_.size(); ++i) out.entries_[i].value = v(static_cast<Eigen::Index>(i));
    return out;
  }

  [[nodiscard]] bool in_bounds() const {
    for (const auto& e : entries_) {
      if (!(e.value >= e.lower && e.value <= e.upper)) return false;
    }
    return true;
  }

  void require_in_bounds() const {
    for (const auto& e : entries_) check_bounds(e);
  }

  /// Natural-scale values → unconstrained optimizer coordinates.
  [[nodiscard]] Vec to_internal() const {
    Vec z(static_cast<Eigen::Index>(entries_.size()));
    for (std::size_t i = 0; i < entries_.size(); ++i) {
      const auto& e = entries_[i];
      double v = e.value;
      switch (e.transform) {
        case ParamTransform::identity: break;
        case ParamTransform::log: v = std::log(v); break;
        case ParamTransform::atanh: v = std::atanh(v); break;
      }
      z(static_cast<Eigen::Index>(i)) = v;
    }
    return z;
  }

  [[nodiscard]] ParamVector from_internal(const Vec& z) const {
    Vec v(z.size());
    for (std::size_t i = 0; i < entries_.size(); ++i) {
      const auto k = static_cast<Eigen::Index>(i);
      switch (entries_[i].transform) {
        case ParamTransform::identity: v(k) = z(k); break;
        case ParamTransform::log: v(k) = std::exp(z(k)); break;
        case ParamTransform::atanh: v(k) = std::tanh(z(k)); break;
      }
    }
    return with_values(v);
  }

  friend bool operator==(const ParamVector&, const ParamVector&) = default;

 private:
  static void check_bounds(const Entry& e) {
    if (!(e.value >= e.lower && e.value <= e.upper)) {
      std::ostringstream msg;
      msg << "ParamVector: " << e.name << "=" << e.value << " outside [" << e.lower << ", "
          << e.upper << "]";
      throw std::domain_error(msg.str());
    }
  }

  std::vector<Entry> entries_;
  std::map<std::string, double> fixed_;
};

}  // namespace advest
