#pragma once

#include <stdexcept>
#include <string>

namespace mbp {

enum class ErrorCode {
  EmptyNeighborhood,
  BufferInfeasible,
  NonProbabilityDemand,
  TooManyNodes,
  DomainError,
  DegenerateEps,
  UnknownKind,
  UnknownPolicy,
  NonConcaveRevenue,
  SolutionMismatch,
  InfeasibleDecision,
  Infeasible,
  Unbounded,
  SolverStall,
  NoCut,
  NotSupported,
  BadInput,
};

const char* to_string(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}
  ErrorCode code() const { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace mbp
