#include "fsgen/skeleton.hpp"

#include <fstream>
#include <sstream>

namespace fsgen {

void SkeletonSpec::validate() const {
  auto check = [this](int j) {
    if (j < 0 || j >= joints)
      throw BadJointIndex("joint " + std::to_string(j) + " out of range [0, " +
                          std::to_string(joints) + ")");
  };
  for (const auto& e : edges) {
    check(e.first);
    check(e.second);
  }
  for (const auto& mp : mirror_pairs) {
    check(mp.first.first);
    check(mp.first.second);
    check(mp.second.first);
    check(mp.second.second);
  }
}

SkeletonSpec skeleton_preset(const std::string& name) {
  SkeletonSpec s;
  if (name == "toy4") {
    // 0 root, 1 head, 2 left limb, 3 right limb
    s.joints = 4;
    s.edges = {{0, 1}, {0, 2}, {0, 3}};
    s.mirror_pairs = {{{0, 2}, {0, 3}}};
  } else if (name == "ntu23") {
    // 25-joint capture layout with the two hand-tip joints dropped;
    // remaining joints keep their order (thumbs become 21/22).
    s.joints = 23;
    s.edges = {{0, 1},  {1, 20},  {20, 2}, {2, 3},   {20, 4},  {4, 5},
               {5, 6},  {6, 7},   {7, 21}, {20, 8},  {8, 9},   {9, 10},
               {10, 11}, {11, 22}, {0, 12}, {12, 13}, {13, 14}, {14, 15},
               {0, 16}, {16, 17}, {17, 18}, {18, 19}};
    s.mirror_pairs = {{{20, 4}, {20, 8}}, {{4, 5}, {8, 9}},
                      {{5, 6}, {9, 10}},  {{6, 7}, {10, 11}},
                      {{7, 21}, {11, 22}}, {{0, 12}, {0, 16}},
                      {{12, 13}, {16, 17}}, {{13, 14}, {17, 18}},
                      {{14, 15}, {18, 19}}};
  } else if (name == "duet15") {
    // 0 pelvis, 1 neck, 2 head, 3-5 left arm, 6-8 right arm,
    // 9-11 left leg, 12-14 right leg
    s.joints = 15;
    s.edges = {{0, 1}, {1, 2},  {1, 3},   {3, 4},   {4, 5},   {1, 6},  {6, 7},
               {7, 8}, {0, 9},  {9, 10},  {10, 11}, {0, 12},  {12, 13},
               {13, 14}};
    s.mirror_pairs = {{{1, 3}, {1, 6}},   {{3, 4}, {6, 7}},
                      {{4, 5}, {7, 8}},   {{0, 9}, {0, 12}},
                      {{9, 10}, {12, 13}}, {{10, 11}, {13, 14}}};
  } else {
    throw BadConfig("unknown skeleton preset '" + name + "'");
  }
  s.validate();
  return s;
}

namespace {

Bone parse_bone(const std::string& tok) {
  auto dash = tok.find('-');
  if (dash == std::string::npos)
    throw BadConfig("bad bone token '" + tok + "'");
  return {std::stoi(tok.substr(0, dash)), std::stoi(tok.substr(dash + 1))};
}

}  // namespace

SkeletonSpec load_skeleton(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw BadConfig("cannot open skeleton file '" + path + "'");
  SkeletonSpec s;
  std::string line;
  while (std::getline(in, line)) {
    auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    auto eq = line.find('=');
    if (eq == std::string::npos) continue;
    std::istringstream key_s(line.substr(0, eq));
    std::string key;
    key_s >> key;
    std::istringstream val_s(line.substr(eq + 1));
    if (key == "joints") {
      val_s >> s.joints;
    } else if (key == "edges") {
      std::string tok;
      while (val_s >> tok) s.edges.push_back(parse_bone(tok));
    } else if (key == "mirror_pairs") {
      std::string tok;
      while (val_s >> tok) {
        auto colon = tok.find(':');
        if (colon == std::string::npos)
          throw BadConfig("bad mirror pair '" + tok + "'");
        s.mirror_pairs.push_back({parse_bone(tok.substr(0, colon)),
                                  parse_bone(tok.substr(colon + 1))});
      }
    } else {
      throw BadConfig("unknown skeleton key '" + key + "'");
    }
  }
  s.validate();
  return s;
}

void save_skeleton(const std::string& path, const SkeletonSpec& s) {
  std::ofstream out(path);
  if (!out) throw BadConfig("cannot write skeleton file '" + path + "'");
  out << "joints = " << s.joints << "\n";
  out << "edges =";
  for (const auto& e : s.edges) out << " " << e.first << "-" << e.second;
  out << "\nmirror_pairs =";
  for (const auto& mp : s.mirror_pairs)
    out << " " << mp.first.first << "-" << mp.first.second << ":"
        << mp.second.first << "-" << mp.second.second;
  out << "\n";
}

}  // namespace fsgen
