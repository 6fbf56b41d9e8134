#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace branchinfer::geometry {

inline constexpr double kMinRadius = 1e-4;  // meters

class GeometryError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A cylindrical branch segment. The proximal end sits on its parent's distal
// end (or the world origin for the root); fork_angle is measured from the
// parent's axis, counterclockwise positive in the vertical x-z plane. The
// root's "parent axis" is the world horizontal.
struct BranchLink {
  double length = 1.0;
  double radius = 0.05;
  double density = 1000.0;
  double fork_angle = 0.0;
  std::optional<std::size_t> parent_index;
};

struct TreeModel {
  std::vector<BranchLink> links;
  std::vector<std::size_t> chain_to_grasp;

  std::size_t chain_length() const { return chain_to_grasp.size(); }
  std::vector<std::size_t> children_of(std::size_t index) const;
};

struct TreeSpec {
  double trunk_length = 1.0;
  double trunk_radius = 0.05;
  std::size_t levels = 1;
  std::size_t children_per_level = 2;
  // One angle per level; level 0 is the trunk's angle from horizontal. Missing
  // trailing entries repeat the last one.
  std::vector<double> fork_angles{0.0};
  double density = 900.0;
  double length_decay = 0.7;
  // Index of the child followed at each fork when building chain_to_grasp.
  std::size_t grasp_child = 0;
};

void validate(const BranchLink& link);
void validate(const TreeModel& model);
void validate(const TreeSpec& spec);

TreeModel generate_tree(const TreeSpec& spec);

// Builds a serial chain (each link the only child of the previous one).
TreeModel make_chain(const std::vector<BranchLink>& links);

double link_mass(const BranchLink& link);

// Thin-rod inertia about the proximal joint: m L^2 / 3.
double joint_inertia(const BranchLink& link);

double total_mass(const TreeModel& model);

// Rest-pose world angle of every link (prefix sum of fork angles).
std::vector<double> rest_world_angles(const TreeModel& model);

std::string export_urdf(const TreeModel& model, const std::string& name = "tree");

}  // namespace branchinfer::geometry
