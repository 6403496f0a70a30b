#include "mbp/congestion.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace mbp {

CongestionKind congestion_from_string(const std::string& key) {
  if (key == "inv_sqrt") return CongestionKind::InverseSqrt;
  if (key == "inv_sqrt_buffered") return CongestionKind::InverseSqrtBuffered;
  if (key == "log") return CongestionKind::Logarithmic;
  if (key == "linear") return CongestionKind::Linear;
  throw Error(ErrorCode::UnknownKind, "congestion function '" + key + "'");
}

const char* to_string(CongestionKind kind) {
  switch (kind) {
    case CongestionKind::InverseSqrt: return "inv_sqrt";
    case CongestionKind::InverseSqrtBuffered: return "inv_sqrt_buffered";
    case CongestionKind::Logarithmic: return "log";
    case CongestionKind::Linear: return "linear";
  }
  return "?";
}

double default_scale(CongestionKind kind, int m, double alpha) {
  switch (kind) {
    case CongestionKind::Logarithmic: return std::max(8.0 * m, 2.0 / alpha);
    case CongestionKind::Linear: return 4.0 * m * m + 2.0 * m / alpha;
    default: return 1.0;
  }
}

namespace {

// Unbuffered shape h and buffered shape hb of the two families.
double h_sqrt(double x) { return -1.0 / std::sqrt(x); }
double hb_sqrt(double x) { return 1.0 / std::sqrt(1.0 - x) - 1.0 / std::sqrt(x); }
double h_log(double x) { return std::log(x); }
double hb_log(double x) { return std::log(x) - std::log1p(-x); }

template <class H, class HB>
BufferConstants line_up(double eps, double s, H h, HB hb) {
  BufferConstants bc;
  bc.eps = eps;
  bc.s = s;
  bc.Cb = (h(eps) - h(s)) / (hb(eps) - hb(s));
  bc.Db = hb(s) - h(s) / bc.Cb;
  return bc;
}

BufferConstants constants_for(CongestionKind kind, double buffer_sum, std::int64_t K) {
  if (K < 4) throw Error(ErrorCode::DegenerateEps, "fleet size below four");
  double delta = std::sqrt(static_cast<double>(K));
  double ktilde = static_cast<double>(K) + buffer_sum * delta;
  double eps = delta / ktilde;
  double s = 1.0 / buffer_sum;
  if (eps >= s) throw Error(ErrorCode::DegenerateEps, "empty-queue level reaches the balanced level");
  if (kind == CongestionKind::Logarithmic) return line_up(eps, s, h_log, hb_log);
  return line_up(eps, s, h_sqrt, hb_sqrt);
}

}  // namespace

BufferConstants buffer_constants(const NetworkSpec& spec, std::int64_t K) {
  return constants_for(CongestionKind::InverseSqrtBuffered, spec.buffer_sum(), K);
}

Congestion::Congestion(const NetworkSpec& spec, std::int64_t K, CongestionConfig cfg) : kind_(cfg.kind) {
  init(spec, K, cfg);
}

Congestion::Congestion(const NetworkSpec& spec, std::int64_t /*K*/, std::int64_t K_norm, CongestionConfig cfg)
    : kind_(cfg.kind) {
  init(spec, K_norm, cfg);
  open_upper_ = true;
}

void Congestion::init(const NetworkSpec& spec, std::int64_t K_norm, CongestionConfig cfg) {
  const int m = spec.m;
  sqrt_m_ = std::sqrt(static_cast<double>(m));
  dbar_ = spec.buffers;
  buffered_.assign(m, false);
  delta_ = std::sqrt(static_cast<double>(K_norm));
  ktilde_ = static_cast<double>(K_norm) + spec.buffer_sum() * delta_;
  switch (kind_) {
    case CongestionKind::InverseSqrt: c_ = sqrt_m_; break;
    case CongestionKind::InverseSqrtBuffered: c_ = sqrt_m_; break;
    case CongestionKind::Logarithmic:
    case CongestionKind::Linear:
      if (!cfg.c) {
        std::vector<double> phi = spec.demand.phi;
        cfg.c = default_scale(kind_, m, connectivity_alpha(spec, phi));
      }
      c_ = *cfg.c;
      break;
  }
  bool uses_buffer_shape = kind_ == CongestionKind::InverseSqrtBuffered || kind_ == CongestionKind::Logarithmic;
  if (uses_buffer_shape) {
    for (int j = 0; j < m; ++j) buffered_[j] = spec.buffered(j);
    if (std::find(buffered_.begin(), buffered_.end(), true) != buffered_.end())
      bc_ = constants_for(kind_, spec.buffer_sum(), K_norm);
  }
}

void Congestion::check(int j, double q) const {
  if (!(q > 0.0) || !std::isfinite(q)) throw Error(ErrorCode::DomainError, "normalized queue must be positive");
  if (buffered_[j]) {
    if (!(q < dbar_[j])) throw Error(ErrorCode::DomainError, "normalized queue at or above its buffer");
  } else if (!open_upper_ && !(q < 1.0)) {
    throw Error(ErrorCode::DomainError, "normalized queue at or above one");
  }
}

double Congestion::value(int j, double q) const {
  check(j, q);
  switch (kind_) {
    case CongestionKind::InverseSqrt:
    case CongestionKind::InverseSqrtBuffered:
      if (buffered_[j]) return c_ * bc_.Cb * (hb_sqrt(q / dbar_[j]) - bc_.Db);
      return c_ * h_sqrt(q);
    case CongestionKind::Logarithmic:
      if (buffered_[j]) return c_ * bc_.Cb * (hb_log(q / dbar_[j]) - bc_.Db);
      return c_ * h_log(q);
    case CongestionKind::Linear: return c_ * q / dbar_[j];
  }
  return 0.0;
}

double Congestion::derivative(int j, double q) const {
  check(j, q);
  switch (kind_) {
    case CongestionKind::InverseSqrt:
    case CongestionKind::InverseSqrtBuffered:
      if (buffered_[j]) {
        double x = q / dbar_[j];
        return c_ * bc_.Cb * 0.5 * (std::pow(1.0 - x, -1.5) + std::pow(x, -1.5)) / dbar_[j];
      }
      return c_ * 0.5 * std::pow(q, -1.5);
    case CongestionKind::Logarithmic:
      if (buffered_[j]) {
        double x = q / dbar_[j];
        return c_ * bc_.Cb * (1.0 / x + 1.0 / (1.0 - x)) / dbar_[j];
      }
      return c_ / q;
    case CongestionKind::Linear: return c_ / dbar_[j];
  }
  return 0.0;
}

double Congestion::antiderivative(int j, double q) const {
  check(j, q);
  const double d = dbar_[j];
  switch (kind_) {
    case CongestionKind::InverseSqrt:
    case CongestionKind::InverseSqrtBuffered:
      if (buffered_[j]) {
        double x = q / d;
        return c_ * bc_.Cb * (d * (-2.0 * std::sqrt(1.0 - x) - 2.0 * std::sqrt(x)) - bc_.Db * q);
      }
      return -2.0 * c_ * std::sqrt(q);
    case CongestionKind::Logarithmic:
      if (buffered_[j]) {
        double x = q / d;
        return c_ * bc_.Cb * (d * (x * std::log(x) + (1.0 - x) * std::log1p(-x)) - bc_.Db * q);
      }
      return c_ * (q * std::log(q) - q);
    case CongestionKind::Linear: return c_ * q * q / (2.0 * d);
  }
  return 0.0;
}

double Congestion::lyapunov(std::span<const double> qbar) const {
  double F = 0.0;
  for (int j = 0; j < m(); ++j) F += antiderivative(j, qbar[j]);
  return F;
}

std::vector<double> Congestion::costs(std::span<const double> qbar) const {
  std::vector<double> f(qbar.size());
  for (int j = 0; j < m(); ++j) f[j] = value(j, qbar[j]);
  return f;
}

double lyapunov(const Congestion& f, std::span<const double> qbar) { return f.lyapunov(qbar); }

// ---------------------------------------------------------------- growth check

GrowthReport growth_condition_check(const NetworkSpec& spec, std::int64_t K, const Congestion& f, double alpha,
                                    int samples, std::uint64_t seed) {
  GrowthReport rep;
  const int m = spec.m;
  const double S = spec.buffer_sum();
  const double tol = 1e-9;
  auto fail = [&](bool& flag, const std::string& why) {
    if (flag && rep.first_failure.empty()) rep.first_failure = why;
    flag = false;
    rep.holds = false;
  };

  std::vector<double> f_bal(m);
  for (int j = 0; j < m; ++j) f_bal[j] = f.value(j, spec.buffers[j] / S);
  for (int j = 1; j < m; ++j)
    if (std::abs(f_bal[j] - f_bal[0]) > tol * std::max(1.0, std::abs(f_bal[0])))
      fail(rep.balanced_equal, "balanced-point costs differ");

  std::mt19937_64 rng(seed);
  std::vector<QueueState> states;
  for (int j = 0; j < m; ++j) states.push_back(corner_state(spec, K, j));
  for (int i = 0; i < samples; ++i) states.push_back(i % 2 ? uniform_state(spec, K, rng) : boundary_state(spec, K, rng));

  for (const auto& s : states) {
    ++rep.states_checked;
    std::vector<double> qbar(m), cost(m);
    for (int j = 0; j < m; ++j) {
      qbar[j] = f.qbar(j, s.q[j]);
      cost[j] = f.value(j, qbar[j]);
    }
    bool boundary = false;
    double dev = 0.0, curv = 0.0;
    for (int j = 0; j < m; ++j) {
      bool empty = s.q[j] == 0;
      bool full = spec.buffered(j) && s.q[j] == s.cap[j];
      boundary = boundary || empty || (s.q[j] == s.cap[j]);
      for (int i = 0; i < m; ++i) {
        if (i == j) continue;
        if (empty && cost[j] > cost[i] + tol * std::max(1.0, std::abs(cost[i])))
          fail(rep.empty_lowest, "empty queue is not the cheapest");
        if (full && cost[j] < cost[i] - tol * std::max(1.0, std::abs(cost[i])))
          fail(rep.full_highest, "full buffer is not the most expensive");
      }
      dev = std::max(dev, std::abs(f_bal[j] - cost[j]));
      // Curvature over the reachable neighbours of this state.
      for (std::int64_t q = std::max<std::int64_t>(0, s.q[j] - 1); q <= std::min(s.cap[j], s.q[j] + 1); ++q)
        curv = std::max(curv, f.derivative(j, f.qbar(j, q)));
    }
    bool outside = dev > 4.0 * m;
    if (boundary && !outside) fail(rep.boundary_outside, "boundary state inside the balanced region");
    if (outside) {
      double lhs = alpha * std::max(0.0, dev - 2.0 * m);
      double rhs = curv / f.ktilde() + (boundary ? 1.0 : 0.0);
      if (lhs < rhs) fail(rep.drift_dominates, "drift does not dominate outside the balanced region");
    }
  }
  return rep;
}

}  // namespace mbp
