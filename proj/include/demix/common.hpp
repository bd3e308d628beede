#pragma once

#include <Eigen/Dense>

#include <stdexcept>
#include <string>

namespace demix {

using Index = Eigen::Index;
using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

enum class ErrorKind {
  input,
  config,
  binning,
  numeric,
  estimator,
  vertex_hunting,
};

inline const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::input: return "input_error";
    case ErrorKind::config: return "config_error";
    case ErrorKind::binning: return "binning_error";
    case ErrorKind::numeric: return "numeric_error";
    case ErrorKind::estimator: return "estimator_error";
    case ErrorKind::vertex_hunting: return "vertex_hunting_error";
  }
  return "error";
}

/// Every failure raised by the library carries a kind so front ends can map
/// it onto an exit status without parsing messages.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) {
  throw Error(kind, what);
}

}  // namespace demix
