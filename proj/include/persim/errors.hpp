#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace persim {

class error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Argument outside the mathematical domain of an operation.
class domain_error : public error {
 public:
  using error::error;
};

/// Input that makes a statistic undefined (zero variance, empty sets, ...).
class degenerate_input_error : public error {
 public:
  using error::error;
};

/// Requested operating point finer than the score sets can resolve.
class resolution_error : public error {
 public:
  resolution_error(const std::string& what, std::uint64_t required,
                   std::uint64_t available)
      : error(what), required_count(required), available_count(available) {}
  std::uint64_t required_count;
  std::uint64_t available_count;
};

/// Search exhausted the feature budget without crossing the target.
class not_reachable_error : public error {
 public:
  not_reachable_error(const std::string& what, double best, int at_n)
      : error(what), best_metric(best), best_n(at_n) {}
  double best_metric;
  int best_n;
};

class config_error : public error {
 public:
  using error::error;
};

class io_error : public error {
 public:
  using error::error;
};

}  // namespace persim
