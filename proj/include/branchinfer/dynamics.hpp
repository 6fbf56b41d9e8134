#pragma once

#include <cstddef>
#include <numbers>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "branchinfer/geometry.hpp"

namespace branchinfer::dynamics {

// Planar vector in the vertical x-z plane (z up).
struct Vec2 {
  double x = 0.0;
  double z = 0.0;
};

// Joint displacement from the rest angle. Positive psi rotates a branch
// downward (clockwise in x-z), which is the direction a positive tip force
// pushes it.
struct JointState {
  std::vector<double> psi;
  std::vector<double> psi_dot;

  static JointState zeros(std::size_t joints) {
    return {std::vector<double>(joints, 0.0), std::vector<double>(joints, 0.0)};
  }
};

// Per-joint PD gains. theta layout is [kp_1, kd_1, ..., kp_R, kd_R].
struct SimParams {
  std::vector<double> kp;
  std::vector<double> kd;

  std::size_t joints() const { return kp.size(); }
  std::vector<double> theta() const;
  static SimParams from_theta(std::span<const double> theta);
};

// Forces are signed, along gravity: positive pushes down.
struct ForceProfile {
  std::vector<double> forces;
  double dt_obs = 0.02;
  double grasp_fraction = 1.0;

  std::size_t samples() const { return forces.size(); }
};

// Sample i is recorded at t = (i + 1) * dt_obs, after force i has been held
// for one observation interval.
struct Trajectory {
  std::vector<Vec2> pos;
  std::vector<Vec2> vel;
  double dt_obs = 0.02;
  bool diverged = false;

  std::size_t samples() const { return pos.size(); }
};

struct SimOptions {
  double dt = 1e-3;
  double gravity = 9.81;
  double psi_limit = std::numbers::pi / 2;
};

struct RestPose {
  std::vector<double> joint_angles;  // world angle of each chain link at psi = 0
  std::vector<Vec2> joint_positions;
  Vec2 grasp_point;
};

class DynamicsError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// The grasp chain compiled for fast integration. Links off the chain are
// lumped rigidly into the chain link they hang from; each joint uses the
// composite inertia of everything distal to it at the current configuration.
class BranchChain {
 public:
  BranchChain(const geometry::TreeModel& model, double grasp_fraction,
              SimOptions options = {});

  std::size_t joints() const { return bodies_.size(); }
  const SimOptions& options() const { return options_; }
  double grasp_fraction() const { return grasp_fraction_; }

  RestPose rest_pose() const;
  Vec2 grasp_point(std::span<const double> psi) const;
  Vec2 grasp_velocity(std::span<const double> psi, std::span<const double> psi_dot) const;
  std::vector<double> joint_torques(std::span<const double> psi, double tip_force) const;
  std::vector<double> joint_inertias(std::span<const double> psi) const;

  // Kinetic (lumped) + spring + gravitational energy.
  double energy(const JointState& state, const SimParams& params) const;

  // One semi-implicit Euler step; std::nullopt signals divergence.
  std::optional<JointState> step(const SimParams& params, const JointState& state,
                                 double tip_force, double dt) const;

  Trajectory rollout(const SimParams& params, const ForceProfile& profile) const;

 private:
  struct Body {
    double length;     // chain link length
    double fork;       // rest angle relative to the previous chain link
    double mass;       // lumped mass of the link and its off-chain subtree
    Vec2 com;          // lumped center of mass, link-local frame
    double inertia;    // about the lumped center of mass
  };

  struct Frame {
    std::vector<double> angle;
    std::vector<Vec2> joint;
    std::vector<Vec2> com;
    Vec2 grasp;
  };

  void kinematics(std::span<const double> psi, Frame& frame) const;
  void torques_and_inertias(const Frame& frame, double tip_force, double* torque,
                            double* inertia) const;
  static void check_params(const SimParams& params, std::size_t joints);

  std::vector<Body> bodies_;
  double grasp_fraction_;
  SimOptions options_;
  Vec2 rest_grasp_;
};

RestPose rest_pose(const geometry::TreeModel& model, double grasp_fraction);

std::vector<double> joint_torques(const geometry::TreeModel& model, const JointState& state,
                                  double tip_force, double grasp_fraction,
                                  SimOptions options = {});

std::optional<JointState> step(const geometry::TreeModel& model, const SimParams& params,
                               const JointState& state, double tip_force, double dt,
                               double grasp_fraction = 1.0, SimOptions options = {});

Trajectory rollout(const geometry::TreeModel& model, const SimParams& params,
                   const ForceProfile& profile, SimOptions options = {});

// Element i equals rollout(model, particle_params[i], profile); evaluated
// concurrently, assembled in input order.
std::vector<Trajectory> batch_rollout(const geometry::TreeModel& model,
                                      std::span<const SimParams> particle_params,
                                      const ForceProfile& profile, SimOptions options = {});

void validate(const ForceProfile& profile);

}  // namespace branchinfer::dynamics
