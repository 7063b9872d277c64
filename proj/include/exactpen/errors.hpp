#pragma once

#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace exactpen {

class InvalidArgument : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A user callable (dynamics, cost, set model) produced a non-finite value.
class EvaluationError : public std::runtime_error {
 public:
  EvaluationError(const std::string& what, int index, double time)
      : std::runtime_error(format(what, index, time)), index_(index), time_(time) {}

  int index() const noexcept { return index_; }
  double time() const noexcept { return time_; }

 private:
  static std::string format(const std::string& what, int index, double time) {
    std::ostringstream os;
    os << what << " (sample " << index << ", t = " << time << ")";
    return os.str();
  }

  int index_;
  double time_;
};

/// A derivative callable required by the requested operation is missing.
class CapabilityError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// Gradient requested where the unsmoothed norm is zero.
class NondifferentiablePoint : public std::domain_error {
 public:
  NondifferentiablePoint()
      : std::domain_error(
            "penalty term is zero with eps = 0; the L^p norm is not differentiable here, "
            "use a smoothing eps > 0") {}
};

class NotFound : public std::out_of_range {
 public:
  NotFound(const std::string& key, std::vector<std::string> available)
      : std::out_of_range(format(key, available)), available_(std::move(available)) {}

  const std::vector<std::string>& available() const noexcept { return available_; }

 private:
  static std::string format(const std::string& key, const std::vector<std::string>& available) {
    std::string msg = "unknown problem id '" + key + "'; available:";
    for (const auto& a : available) msg += " " + a;
    return msg;
  }

  std::vector<std::string> available_;
};

class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& what, std::size_t line, std::size_t column)
      : std::runtime_error(what + " (line " + std::to_string(line) + ", column " +
                           std::to_string(column) + ")"),
        line_(line),
        column_(column) {}

  std::size_t line() const noexcept { return line_; }
  std::size_t column() const noexcept { return column_; }

 private:
  std::size_t line_;
  std::size_t column_;
};

}  // namespace exactpen
