#include "drivercal/idm.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace drivercal::idm {

double acceleration(const Params& p, double v, double delta_v, double s,
                    const Options& opts) {
  if (!p.valid()) throw std::invalid_argument("idm: invalid parameters");
  if (!(s > 0.0)) throw std::domain_error("idm: nonpositive gap");

  double s_star = p.s0 + v * p.T + v * delta_v / (2.0 * std::sqrt(p.a * p.b));
  if (opts.clamp_desired_gap) s_star = std::max(0.0, s_star);
  const double ratio = s_star / s;
  return p.a * (1.0 - std::pow(v / p.v0, p.delta) - ratio * ratio);
}

State step(const Params& p, const State& st, double leader_velocity, double dt,
           const Options& opts) {
  if (!(dt > 0.0)) throw std::invalid_argument("idm: dt must be positive");
  const double acc =
      acceleration(p, st.velocity, st.velocity - leader_velocity, st.gap, opts);
  const double v_new = std::max(0.0, st.velocity + acc * dt);
  const double v_for_gap =
      opts.gap_update == GapUpdate::semi_implicit ? v_new : st.velocity;
  return {v_new, st.gap + (leader_velocity - v_for_gap) * dt};
}

RolloutResult rollout(const Params& p, const State& initial,
                      std::span<const double> leader_velocities, double dt,
                      const Options& opts) {
  if (leader_velocities.empty())
    throw std::invalid_argument("idm: empty leader velocity series");
  if (!(initial.gap > 0.0)) throw std::domain_error("idm: nonpositive gap");

  RolloutResult out;
  out.velocities.reserve(leader_velocities.size());
  out.gaps.reserve(leader_velocities.size());
  out.velocities.push_back(initial.velocity);
  out.gaps.push_back(initial.gap);

  State st = initial;
  for (std::size_t t = 0; t + 1 < leader_velocities.size(); ++t) {
    if (out.collided) {
      out.velocities.push_back(out.velocities.back());
      out.gaps.push_back(out.gaps.back());
      continue;
    }
    st = step(p, st, leader_velocities[t], dt, opts);
    out.velocities.push_back(st.velocity);
    out.gaps.push_back(st.gap);
    if (st.gap <= 0.0) {
      out.collided = true;
      out.collision_frame = t + 1;
    }
  }
  return out;
}

double equilibrium_gap(const Params& p, double v) {
  if (!p.valid()) throw std::invalid_argument("idm: invalid parameters");
  if (!(v >= 0.0) || v >= p.v0)
    throw std::domain_error("idm: equilibrium requires 0 <= v < v0");
  return (p.s0 + v * p.T) / std::sqrt(1.0 - std::pow(v / p.v0, p.delta));
}

}  // namespace drivercal::idm
