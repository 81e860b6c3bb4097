#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

namespace drivercal::idm {

// Intelligent Driver Model parameters.  Units: v0 m/s, s0 m, T s, a m/s^2,
// b m/s^2.  The free-flow exponent delta is conventionally fixed at 4 and is
// not calibrated.
struct Params {
  double v0 = 30.0;  // desired velocity
  double s0 = 2.0;   // jam distance
  double T = 1.5;    // desired time headway
  double a = 1.5;    // maximum acceleration
  double b = 2.0;    // comfortable deceleration
  double delta = 4.0;

  bool valid() const {
    return v0 > 0.0 && s0 >= 0.0 && T >= 0.0 && a > 0.0 && b > 0.0 && delta > 0.0;
  }
};

enum class GapUpdate {
  // gap' = gap + (v_lead - v_ego_new) * dt, using the freshly stepped ego
  // velocity.  Better behaved at dt = 0.1 s and the default.
  semi_implicit,
  // gap' = gap + (v_lead - v_ego_old) * dt, plain forward Euler.
  explicit_euler,
};

struct Options {
  // Clamp the desired-gap term at zero so a much faster leader cannot produce
  // a negative s* (which would otherwise turn the interaction term into a
  // spurious acceleration).
  bool clamp_desired_gap = true;
  GapUpdate gap_update = GapUpdate::semi_implicit;
};

// Follower state relative to its leader.  gap is bumper-to-bumper and must be
// positive whenever the state is advanced.
struct State {
  double velocity = 0.0;
  double gap = 0.0;
};

struct RolloutResult {
  std::vector<double> velocities;
  std::vector<double> gaps;
  bool collided = false;
  // Frame at which the gap first became nonpositive.  Entries from here on
  // repeat the collision-frame values.
  std::optional<std::size_t> collision_frame;

  std::size_t size() const { return velocities.size(); }
};

// IDM acceleration for a follower at velocity v with approach rate
// delta_v = v - v_leader (positive when closing) and bumper gap s.
// Throws std::domain_error when s <= 0 and std::invalid_argument on invalid
// parameters; otherwise the result is finite.
double acceleration(const Params& p, double v, double delta_v, double s,
                    const Options& opts = {});

// One forward-Euler step at resolution dt.  The new velocity is clamped at
// zero (the model does not reverse).  The returned gap may be nonpositive;
// the caller decides whether that counts as a collision.  Requires st.gap > 0.
State step(const Params& p, const State& st, double leader_velocity, double dt,
           const Options& opts = {});

// Roll the follower along a recorded leader velocity series.  Output length
// equals the leader series length; frame 0 is the initial state verbatim.
// If the gap ever drops to zero or below the trajectory freezes at the
// collision frame and `collided` is set, so downstream error measures stay
// defined.
RolloutResult rollout(const Params& p, const State& initial,
                      std::span<const double> leader_velocities, double dt,
                      const Options& opts = {});

// Equilibrium gap for steady following at velocity v (both vehicles at v,
// zero acceleration): s_e = (s0 + v*T) / sqrt(1 - (v/v0)^delta).
// Requires 0 <= v < v0.
double equilibrium_gap(const Params& p, double v);

}  // namespace drivercal::idm
