#pragma once

#include <string>
#include <utility>
#include <vector>

#include "fsgen/errors.hpp"

namespace fsgen {

using Bone = std::pair<int, int>;  // (parent joint, child joint)

struct SkeletonSpec {
  int joints = 0;
  std::vector<Bone> edges;
  std::vector<std::pair<Bone, Bone>> mirror_pairs;  // (left bone, right bone)

  void validate() const;  // throws BadJointIndex
};

// Built-in presets: "toy4" (synthetic 4-joint), "ntu23", "duet15".
SkeletonSpec skeleton_preset(const std::string& name);

// Plain-text `key = value` skeleton files:
//   joints = 4
//   edges = 0-1 0-2 0-3
//   mirror_pairs = 0-2:0-3
SkeletonSpec load_skeleton(const std::string& path);
void save_skeleton(const std::string& path, const SkeletonSpec& s);

}  // namespace fsgen
