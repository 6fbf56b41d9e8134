#include "branchinfer/geometry.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

namespace branchinfer::geometry {

namespace {

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

double spread_angle(double level_angle, std::size_t child, std::size_t count) {
  if (count <= 1) return level_angle;
  const double t = static_cast<double>(child) / static_cast<double>(count - 1);
  return level_angle * (1.0 - 2.0 * t);
}

}  // namespace

std::vector<std::size_t> TreeModel::children_of(std::size_t index) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < links.size(); ++i) {
    if (links[i].parent_index && *links[i].parent_index == index) out.push_back(i);
  }
  return out;
}

void validate(const BranchLink& link) {
  if (!(link.length > 0.0) || !(link.radius > 0.0) || !(link.density > 0.0)) {
    throw GeometryError("link length, radius and density must be positive");
  }
  if (!(std::abs(link.fork_angle) < std::numbers::pi / 2)) {
    throw GeometryError("fork angle must lie in (-pi/2, pi/2)");
  }
}

void validate(const TreeModel& model) {
  if (model.links.empty()) throw GeometryError("tree has no links");
  for (std::size_t i = 0; i < model.links.size(); ++i) {
    const auto& link = model.links[i];
    validate(link);
    if (i == 0) {
      if (link.parent_index) throw GeometryError("link 0 must be the root");
    } else if (!link.parent_index || *link.parent_index >= i) {
      throw GeometryError("link " + std::to_string(i) +
                          " must have a parent with a smaller index");
    }
  }
  const auto& chain = model.chain_to_grasp;
  if (chain.empty() || chain.front() != 0) {
    throw GeometryError("chain_to_grasp must start at the root");
  }
  for (std::size_t k = 1; k < chain.size(); ++k) {
    if (chain[k] >= model.links.size() || model.links[chain[k]].parent_index != chain[k - 1]) {
      throw GeometryError("chain_to_grasp is not a parent-child path");
    }
  }
  if (!model.children_of(chain.back()).empty()) {
    throw GeometryError("chain_to_grasp must end at a leaf");
  }
}

void validate(const TreeSpec& spec) {
  if (spec.levels < 1) throw GeometryError("levels must be >= 1");
  if (spec.children_per_level < 1) throw GeometryError("children_per_level must be >= 1");
  if (!(spec.length_decay > 0.0) || spec.length_decay > 1.0) {
    throw GeometryError("length_decay must lie in (0, 1]");
  }
  if (!(spec.trunk_length > 0.0) || !(spec.trunk_radius > 0.0) || !(spec.density > 0.0)) {
    throw GeometryError("trunk dimensions and density must be positive");
  }
  if (spec.fork_angles.empty()) throw GeometryError("fork_angles must not be empty");
  for (double a : spec.fork_angles) {
    if (!(std::abs(a) < std::numbers::pi / 2)) {
      throw GeometryError("fork angles must lie in (-pi/2, pi/2)");
    }
  }
  if (spec.grasp_child >= spec.children_per_level) {
    throw GeometryError("grasp_child must be < children_per_level");
  }
}

TreeModel generate_tree(const TreeSpec& spec) {
  validate(spec);
  auto angle_at = [&](std::size_t level) {
    return spec.fork_angles[std::min(level, spec.fork_angles.size() - 1)];
  };

  TreeModel model;
  model.links.push_back(BranchLink{spec.trunk_length, spec.trunk_radius, spec.density,
                                   angle_at(0), std::nullopt});
  model.chain_to_grasp.push_back(0);

  // Area preservation with equal children: c * r_child^2 = r_parent^2.
  const double radius_ratio = 1.0 / std::sqrt(static_cast<double>(spec.children_per_level));

  std::vector<std::size_t> frontier{0};
  for (std::size_t level = 1; level < spec.levels; ++level) {
    std::vector<std::size_t> next;
    for (std::size_t parent : frontier) {
      const BranchLink p = model.links[parent];
      const double r = p.radius * radius_ratio;
      if (r < kMinRadius) {
        throw GeometryError("derived radius " + fmt(r) + " m at level " +
                            std::to_string(level) + " is below the minimum");
      }
      for (std::size_t c = 0; c < spec.children_per_level; ++c) {
        const std::size_t index = model.links.size();
        model.links.push_back(BranchLink{p.length * spec.length_decay, r, spec.density,
                                         spread_angle(angle_at(level), c,
                                                      spec.children_per_level),
                                         parent});
        next.push_back(index);
        if (parent == model.chain_to_grasp.back() && c == spec.grasp_child) {
          model.chain_to_grasp.push_back(index);
        }
      }
    }
    frontier = std::move(next);
  }
  validate(model);
  return model;
}

TreeModel make_chain(const std::vector<BranchLink>& links) {
  TreeModel model;
  for (std::size_t i = 0; i < links.size(); ++i) {
    BranchLink link = links[i];
    link.parent_index = i == 0 ? std::nullopt : std::optional<std::size_t>(i - 1);
    model.links.push_back(link);
    model.chain_to_grasp.push_back(i);
  }
  validate(model);
  return model;
}

double link_mass(const BranchLink& link) {
  return link.density * std::numbers::pi * link.radius * link.radius * link.length;
}

double joint_inertia(const BranchLink& link) {
  return link_mass(link) * link.length * link.length / 3.0;
}

double total_mass(const TreeModel& model) {
  double m = 0.0;
  for (const auto& link : model.links) m += link_mass(link);
  return m;
}

std::vector<double> rest_world_angles(const TreeModel& model) {
  std::vector<double> angles(model.links.size());
  for (std::size_t i = 0; i < model.links.size(); ++i) {
    const auto& link = model.links[i];
    angles[i] = link.fork_angle + (link.parent_index ? angles[*link.parent_index] : 0.0);
  }
  return angles;
}

std::string export_urdf(const TreeModel& model, const std::string& name) {
  validate(model);
  const double half_pi = std::numbers::pi / 2;
  std::ostringstream os;
  os << "<?xml version=\"1.0\"?>\n";
  os << "<robot name=\"" << name << "\">\n";
  os << "  <link name=\"world\"/>\n";

  for (std::size_t i = 0; i < model.links.size(); ++i) {
    const auto& link = model.links[i];
    const double m = link_mass(link);
    const double r2 = link.radius * link.radius;
    const double l2 = link.length * link.length;
    // Solid cylinder about its center of mass, local x along the axis.
    const double ixx = 0.5 * m * r2;
    const double iyy = m * (3.0 * r2 + l2) / 12.0;
    const std::string half = fmt(0.5 * link.length);
    os << "  <link name=\"branch_" << i << "\">\n";
    os << "    <inertial>\n";
    os << "      <origin xyz=\"" << half << " 0 0\" rpy=\"0 0 0\"/>\n";
    os << "      <mass value=\"" << fmt(m) << "\"/>\n";
    os << "      <inertia ixx=\"" << fmt(ixx) << "\" ixy=\"0\" ixz=\"0\" iyy=\"" << fmt(iyy)
       << "\" iyz=\"0\" izz=\"" << fmt(iyy) << "\"/>\n";
    os << "    </inertial>\n";
    for (const char* tag : {"visual", "collision"}) {
      os << "    <" << tag << ">\n";
      os << "      <origin xyz=\"" << half << " 0 0\" rpy=\"0 " << fmt(half_pi) << " 0\"/>\n";
      os << "      <geometry><cylinder radius=\"" << fmt(link.radius) << "\" length=\""
         << fmt(link.length) << "\"/></geometry>\n";
      os << "    </" << tag << ">\n";
    }
    os << "  </link>\n";
  }

  // Rotation about +y by -a turns local x toward +z, i.e. counterclockwise in
  // the x-z plane. Positive joint motion about +y deflects the branch downward.
  const auto& root = model.links.front();
  os << "  <joint name=\"world_to_branch_0\" type=\"fixed\">\n";
  os << "    <parent link=\"world\"/>\n    <child link=\"branch_0\"/>\n";
  os << "    <origin xyz=\"0 0 0\" rpy=\"0 " << fmt(-root.fork_angle) << " 0\"/>\n";
  os << "  </joint>\n";
  for (std::size_t i = 1; i < model.links.size(); ++i) {
    const auto& link = model.links[i];
    const std::size_t p = *link.parent_index;
    os << "  <joint name=\"branch_" << p << "_to_" << i << "\" type=\"revolute\">\n";
    os << "    <parent link=\"branch_" << p << "\"/>\n";
    os << "    <child link=\"branch_" << i << "\"/>\n";
    os << "    <origin xyz=\"" << fmt(model.links[p].length) << " 0 0\" rpy=\"0 "
       << fmt(-link.fork_angle) << " 0\"/>\n";
    os << "    <axis xyz=\"0 1 0\"/>\n";
    os << "    <limit lower=\"" << fmt(-half_pi) << "\" upper=\"" << fmt(half_pi)
       << "\" effort=\"1000\" velocity=\"100\"/>\n";
    os << "  </joint>\n";
  }
  os << "</robot>\n";
  return os.str();
}

}  // namespace branchinfer::geometry
