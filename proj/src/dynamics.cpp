#include "branchinfer/dynamics.hpp"

#include <cmath>
#include <string>

#include "branchinfer/parallel.hpp"

namespace branchinfer::dynamics {

namespace {

struct Segment {
  double mass;
  Vec2 com;
  double inertia;  // about its own center of mass
};

// Rest geometry of the subtree rooted at `index`, expressed in the frame of
// the chain link it hangs from.
void collect_subtree(const geometry::TreeModel& model, std::size_t index, Vec2 origin,
                     double angle, std::vector<Segment>& out) {
  const auto& link = model.links[index];
  const double a = angle + link.fork_angle;
  const double m = geometry::link_mass(link);
  const Vec2 dir{std::cos(a), std::sin(a)};
  out.push_back({m,
                 {origin.x + 0.5 * link.length * dir.x, origin.z + 0.5 * link.length * dir.z},
                 m * link.length * link.length / 12.0});
  const Vec2 tip{origin.x + link.length * dir.x, origin.z + link.length * dir.z};
  for (std::size_t child : model.children_of(index)) {
    collect_subtree(model, child, tip, a, out);
  }
}

bool finite(double v) { return std::isfinite(v); }

}  // namespace

std::vector<double> SimParams::theta() const {
  std::vector<double> out;
  out.reserve(2 * kp.size());
  for (std::size_t k = 0; k < kp.size(); ++k) {
    out.push_back(kp[k]);
    out.push_back(kd[k]);
  }
  return out;
}

SimParams SimParams::from_theta(std::span<const double> theta) {
  if (theta.empty() || theta.size() % 2 != 0) {
    throw DynamicsError("theta must hold (kp, kd) pairs");
  }
  SimParams p;
  for (std::size_t i = 0; i < theta.size(); i += 2) {
    p.kp.push_back(theta[i]);
    p.kd.push_back(theta[i + 1]);
  }
  return p;
}

void validate(const ForceProfile& profile) {
  if (profile.forces.size() < 2) throw DynamicsError("force profile needs at least 2 samples");
  if (!(profile.dt_obs > 0.0)) throw DynamicsError("dt_obs must be positive");
  if (!(profile.grasp_fraction > 0.0) || profile.grasp_fraction > 1.0) {
    throw DynamicsError("grasp_fraction must lie in (0, 1]");
  }
  for (double f : profile.forces) {
    if (!finite(f)) throw DynamicsError("force profile contains non-finite values");
  }
}

BranchChain::BranchChain(const geometry::TreeModel& model, double grasp_fraction,
                         SimOptions options)
    : grasp_fraction_(grasp_fraction), options_(options) {
  geometry::validate(model);
  if (!(grasp_fraction > 0.0) || grasp_fraction > 1.0) {
    throw DynamicsError("grasp_fraction must lie in (0, 1]");
  }
  if (!(options.dt > 0.0)) throw DynamicsError("dt must be positive");

  const auto& chain = model.chain_to_grasp;
  for (std::size_t k = 0; k < chain.size(); ++k) {
    const auto& link = model.links[chain[k]];
    std::vector<Segment> segments;
    const double m = geometry::link_mass(link);
    segments.push_back({m, {0.5 * link.length, 0.0}, m * link.length * link.length / 12.0});
    for (std::size_t child : model.children_of(chain[k])) {
      if (k + 1 < chain.size() && child == chain[k + 1]) continue;
      collect_subtree(model, child, {link.length, 0.0}, 0.0, segments);
    }

    Body body{link.length, link.fork_angle, 0.0, {0.0, 0.0}, 0.0};
    for (const auto& s : segments) {
      body.mass += s.mass;
      body.com.x += s.mass * s.com.x;
      body.com.z += s.mass * s.com.z;
    }
    body.com.x /= body.mass;
    body.com.z /= body.mass;
    for (const auto& s : segments) {
      const double dx = s.com.x - body.com.x;
      const double dz = s.com.z - body.com.z;
      body.inertia += s.inertia + s.mass * (dx * dx + dz * dz);
    }
    bodies_.push_back(body);
  }
  rest_grasp_ = rest_pose().grasp_point;
}

void BranchChain::kinematics(std::span<const double> psi, Frame& frame) const {
  const std::size_t n = bodies_.size();
  frame.angle.resize(n);
  frame.joint.resize(n);
  frame.com.resize(n);
  double angle = 0.0;
  Vec2 p{0.0, 0.0};
  for (std::size_t k = 0; k < n; ++k) {
    const Body& b = bodies_[k];
    angle += b.fork - psi[k];
    const double c = std::cos(angle);
    const double s = std::sin(angle);
    frame.angle[k] = angle;
    frame.joint[k] = p;
    frame.com[k] = {p.x + c * b.com.x - s * b.com.z, p.z + s * b.com.x + c * b.com.z};
    const double reach = (k + 1 == n) ? grasp_fraction_ * b.length : b.length;
    const Vec2 end{p.x + reach * c, p.z + reach * s};
    if (k + 1 == n) {
      frame.grasp = end;
    } else {
      p = end;
    }
  }
}

void BranchChain::torques_and_inertias(const Frame& frame, double tip_force, double* torque,
                                       double* inertia) const {
  // Suffix sums over distal bodies make both quantities O(R).
  double sum_m = 0.0, sum_mx = 0.0, sum_mz = 0.0, sum_i = 0.0, sum_mr2 = 0.0;
  const double g = options_.gravity;
  for (std::size_t k = bodies_.size(); k-- > 0;) {
    const Body& b = bodies_[k];
    const Vec2& c = frame.com[k];
    sum_m += b.mass;
    sum_mx += b.mass * c.x;
    sum_mz += b.mass * c.z;
    sum_i += b.inertia;
    sum_mr2 += b.mass * (c.x * c.x + c.z * c.z);
    const Vec2& p = frame.joint[k];
    if (torque) {
      torque[k] = tip_force * (frame.grasp.x - p.x) + g * (sum_mx - sum_m * p.x);
    }
    if (inertia) {
      inertia[k] = sum_i + sum_mr2 - 2.0 * (p.x * sum_mx + p.z * sum_mz) +
                   sum_m * (p.x * p.x + p.z * p.z);
    }
  }
}

void BranchChain::check_params(const SimParams& params, std::size_t joints) {
  if (params.kp.size() != joints || params.kd.size() != joints) {
    throw DynamicsError("expected " + std::to_string(joints) + " (kp, kd) pairs, got " +
                        std::to_string(params.kp.size()));
  }
}

RestPose BranchChain::rest_pose() const {
  Frame frame;
  const std::vector<double> zero(bodies_.size(), 0.0);
  kinematics(zero, frame);
  return {frame.angle, frame.joint, frame.grasp};
}

Vec2 BranchChain::grasp_point(std::span<const double> psi) const {
  Frame frame;
  kinematics(psi, frame);
  return frame.grasp;
}

Vec2 BranchChain::grasp_velocity(std::span<const double> psi,
                                 std::span<const double> psi_dot) const {
  Frame frame;
  kinematics(psi, frame);
  // dC/dpsi_k = (C_z - P_z, -(C_x - P_x))
  Vec2 v{0.0, 0.0};
  for (std::size_t k = 0; k < bodies_.size(); ++k) {
    v.x += (frame.grasp.z - frame.joint[k].z) * psi_dot[k];
    v.z -= (frame.grasp.x - frame.joint[k].x) * psi_dot[k];
  }
  return v;
}

std::vector<double> BranchChain::joint_torques(std::span<const double> psi,
                                               double tip_force) const {
  Frame frame;
  kinematics(psi, frame);
  std::vector<double> torque(bodies_.size());
  torques_and_inertias(frame, tip_force, torque.data(), nullptr);
  return torque;
}

std::vector<double> BranchChain::joint_inertias(std::span<const double> psi) const {
  Frame frame;
  kinematics(psi, frame);
  std::vector<double> inertia(bodies_.size());
  torques_and_inertias(frame, 0.0, nullptr, inertia.data());
  return inertia;
}

double BranchChain::energy(const JointState& state, const SimParams& params) const {
  check_params(params, joints());
  Frame frame;
  kinematics(state.psi, frame);
  std::vector<double> inertia(bodies_.size());
  torques_and_inertias(frame, 0.0, nullptr, inertia.data());
  double e = 0.0;
  for (std::size_t k = 0; k < bodies_.size(); ++k) {
    e += 0.5 * inertia[k] * state.psi_dot[k] * state.psi_dot[k];
    e += 0.5 * params.kp[k] * state.psi[k] * state.psi[k];
    e += options_.gravity * bodies_[k].mass * frame.com[k].z;
  }
  return e;
}

std::optional<JointState> BranchChain::step(const SimParams& params, const JointState& state,
                                            double tip_force, double dt) const {
  const std::size_t n = joints();
  check_params(params, n);
  if (state.psi.size() != n || state.psi_dot.size() != n) {
    throw DynamicsError("joint state size does not match the chain");
  }
  if (!(dt > 0.0)) throw DynamicsError("dt must be positive");

  Frame frame;
  kinematics(state.psi, frame);
  std::vector<double> torque(n), inertia(n);
  torques_and_inertias(frame, tip_force, torque.data(), inertia.data());

  JointState next = state;
  for (std::size_t k = 0; k < n; ++k) {
    const double accel =
        (torque[k] - params.kp[k] * state.psi[k] - params.kd[k] * state.psi_dot[k]) / inertia[k];
    next.psi_dot[k] = state.psi_dot[k] + dt * accel;
    next.psi[k] = state.psi[k] + dt * next.psi_dot[k];
    if (!finite(next.psi_dot[k]) || !finite(next.psi[k]) ||
        std::abs(next.psi[k]) > options_.psi_limit) {
      return std::nullopt;
    }
  }
  return next;
}

Trajectory BranchChain::rollout(const SimParams& params, const ForceProfile& profile) const {
  validate(profile);
  const std::size_t n = joints();
  check_params(params, n);
  if (profile.grasp_fraction != grasp_fraction_) {
    throw DynamicsError("profile grasp_fraction differs from the compiled chain");
  }
  const double ratio = profile.dt_obs / options_.dt;
  const auto substeps = static_cast<std::size_t>(std::llround(ratio));
  if (substeps < 1 || std::abs(ratio - static_cast<double>(substeps)) > 1e-9 * ratio) {
    throw DynamicsError("dt_obs must be a positive integer multiple of dt");
  }
  const double dt = options_.dt;
  const double limit = options_.psi_limit;

  Trajectory traj;
  traj.dt_obs = profile.dt_obs;
  traj.pos.reserve(profile.samples());
  traj.vel.reserve(profile.samples());

  std::vector<double> psi(n, 0.0), psi_dot(n, 0.0), torque(n), inertia(n);
  Frame frame;
  for (double force : profile.forces) {
    for (std::size_t s = 0; s < substeps; ++s) {
      kinematics(psi, frame);
      torques_and_inertias(frame, force, torque.data(), inertia.data());
      for (std::size_t k = 0; k < n; ++k) {
        psi_dot[k] += dt * (torque[k] - params.kp[k] * psi[k] - params.kd[k] * psi_dot[k]) /
                      inertia[k];
        psi[k] += dt * psi_dot[k];
        if (!(std::abs(psi[k]) <= limit) || !finite(psi_dot[k])) {
          traj.diverged = true;
          return traj;
        }
      }
    }
    kinematics(psi, frame);
    Vec2 v{0.0, 0.0};
    for (std::size_t k = 0; k < n; ++k) {
      v.x += (frame.grasp.z - frame.joint[k].z) * psi_dot[k];
      v.z -= (frame.grasp.x - frame.joint[k].x) * psi_dot[k];
    }
    traj.pos.push_back({frame.grasp.x - rest_grasp_.x, frame.grasp.z - rest_grasp_.z});
    traj.vel.push_back(v);
  }
  return traj;
}

RestPose rest_pose(const geometry::TreeModel& model, double grasp_fraction) {
  return BranchChain(model, grasp_fraction).rest_pose();
}

std::vector<double> joint_torques(const geometry::TreeModel& model, const JointState& state,
                                  double tip_force, double grasp_fraction, SimOptions options) {
  return BranchChain(model, grasp_fraction, options).joint_torques(state.psi, tip_force);
}

std::optional<JointState> step(const geometry::TreeModel& model, const SimParams& params,
                               const JointState& state, double tip_force, double dt,
                               double grasp_fraction, SimOptions options) {
  return BranchChain(model, grasp_fraction, options).step(params, state, tip_force, dt);
}

Trajectory rollout(const geometry::TreeModel& model, const SimParams& params,
                   const ForceProfile& profile, SimOptions options) {
  return BranchChain(model, profile.grasp_fraction, options).rollout(params, profile);
}

std::vector<Trajectory> batch_rollout(const geometry::TreeModel& model,
                                      std::span<const SimParams> particle_params,
                                      const ForceProfile& profile, SimOptions options) {
  if (particle_params.empty()) throw DynamicsError("batch_rollout needs at least one particle");
  const BranchChain chain(model, profile.grasp_fraction, options);
  std::vector<Trajectory> out(particle_params.size());
  parallel_for(particle_params.size(),
               [&](std::size_t i) { out[i] = chain.rollout(particle_params[i], profile); });
  return out;
}

}  // namespace branchinfer::dynamics
