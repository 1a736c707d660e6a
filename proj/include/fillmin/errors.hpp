#ifndef FILLMIN_ERRORS_HPP
#define FILLMIN_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace fillmin {

// Invalid input data or arguments (bad files, shape mismatches, broken
// invariants). Maps to CLI exit code 2.
using InputError = std::invalid_argument;

// An ordering / factorization method failed on valid input (eigensolver
// stalled, matrix not SPD, ...). Maps to CLI exit code 3.
class MethodError : public std::runtime_error {
 public:
  explicit MethodError(const std::string& what) : std::runtime_error(what) {}
};

class NotSpdError : public MethodError {
 public:
  NotSpdError(int pivot, double value)
      : MethodError("matrix is not positive definite: pivot " +
                    std::to_string(pivot) + " = " + std::to_string(value)),
        pivot_index(pivot),
        pivot_value(value) {}
  int pivot_index;
  double pivot_value;
};

class EigensolverError : public MethodError {
 public:
  EigensolverError(int iterations, double residual)
      : MethodError("eigensolver did not converge after " +
                    std::to_string(iterations) +
                    " iterations, best residual " + std::to_string(residual)),
        iterations(iterations),
        best_residual(residual) {}
  int iterations;
  double best_residual;
};

// Training produced a non-finite loss. Maps to CLI exit code 4.
class DivergenceError : public std::runtime_error {
 public:
  explicit DivergenceError(const std::string& what)
      : std::runtime_error(what) {}
};

}  // namespace fillmin

#endif  // FILLMIN_ERRORS_HPP
