#pragma once

#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mbp/network.hpp"

namespace mbp {

enum class CongestionKind { InverseSqrt, InverseSqrtBuffered, Logarithmic, Linear };

CongestionKind congestion_from_string(const std::string& key);
const char* to_string(CongestionKind kind);

struct CongestionConfig {
  CongestionKind kind = CongestionKind::InverseSqrt;
  std::optional<double> c;
};

// Scale c used by the logarithmic and linear functions when none is given.
double default_scale(CongestionKind kind, int m, double alpha);

// Constants that line up a buffered node's congestion cost with an unbuffered
// one at the empty queue and at the balanced point.
struct BufferConstants {
  double eps = 0.0;
  double s = 0.0;
  double Cb = 1.0;
  double Db = 0.0;
};

// Per-node congestion cost f_j, its derivative and antiderivative, for a given
// network and fleet size. Queue lengths are mapped to (0, 1) by adding
// sqrt(K) * d_j phantom units to node j and dividing by the padded total.
class Congestion {
 public:
  Congestion(const NetworkSpec& spec, std::int64_t K, CongestionConfig cfg);
  // Normalization over an effective fleet size different from K, as used by
  // the supply-aware policy. Values above one are then allowed.
  Congestion(const NetworkSpec& spec, std::int64_t K, std::int64_t K_norm, CongestionConfig cfg);

  int m() const { return static_cast<int>(dbar_.size()); }
  CongestionKind kind() const { return kind_; }
  double scale() const { return c_; }
  double delta() const { return delta_; }
  double ktilde() const { return ktilde_; }
  const BufferConstants& constants() const { return bc_; }
  bool buffered(int j) const { return buffered_[j]; }

  double qbar(int j, std::int64_t q) const { return (static_cast<double>(q) + dbar_[j] * delta_) / ktilde_; }
  double cost(int j, std::int64_t q) const { return value(j, qbar(j, q)); }

  double value(int j, double qbar) const;
  double derivative(int j, double qbar) const;
  double antiderivative(int j, double qbar) const;

  // F(qbar) = sum_j antiderivative, whose gradient is the cost vector.
  double lyapunov(std::span<const double> qbar) const;
  std::vector<double> costs(std::span<const double> qbar) const;

 private:
  void init(const NetworkSpec& spec, std::int64_t K_norm, CongestionConfig cfg);
  void check(int j, double qbar) const;

  CongestionKind kind_;
  double c_ = 1.0;
  double sqrt_m_ = 1.0;
  double delta_ = 0.0;
  double ktilde_ = 0.0;
  bool open_upper_ = false;
  BufferConstants bc_;
  std::vector<double> dbar_;
  std::vector<bool> buffered_;
};

// Buffer constants for the inverse square root family.
BufferConstants buffer_constants(const NetworkSpec& spec, std::int64_t K);

double lyapunov(const Congestion& f, std::span<const double> qbar);

struct GrowthReport {
  bool holds = true;
  bool empty_lowest = true;   // empty queue costs at most any other queue
  bool full_highest = true;   // full buffer costs at least any other queue
  bool balanced_equal = true;
  bool boundary_outside = true;
  bool drift_dominates = true;
  std::int64_t states_checked = 0;
  std::string first_failure;
};

// Samples states (plus all corner states) and checks the growth requirements a
// congestion function needs for the drift argument.
GrowthReport growth_condition_check(const NetworkSpec& spec, std::int64_t K, const Congestion& f, double alpha,
                                    int samples, std::uint64_t seed);

}  // namespace mbp
