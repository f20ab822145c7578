#pragma once
#include <stdexcept>
#include <string>

namespace oqc {

/// Input outside the mathematical domain of an operation (negative rate,
/// zero background noise where the bounds require it, ...).
class domain_error : public std::invalid_argument {
public:
  explicit domain_error(const std::string& what) : std::invalid_argument(what) {}
};

/// Mismatched vector lengths (user count vs. symbol count, ...).
class dimension_error : public std::invalid_argument {
public:
  explicit dimension_error(const std::string& what) : std::invalid_argument(what) {}
};

/// Problem size beyond the configured enumeration cap.
class capacity_error : public std::runtime_error {
public:
  explicit capacity_error(const std::string& what) : std::runtime_error(what) {}
};

/// Constraint set admits no feasible point.
class infeasible_error : public std::runtime_error {
public:
  explicit infeasible_error(const std::string& what) : std::runtime_error(what) {}
};

/// A numerical routine failed to reach its accuracy target.
class numeric_error : public std::runtime_error {
public:
  explicit numeric_error(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace oqc
