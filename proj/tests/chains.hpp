// Small chain documents and the bundled six-joint arm for kinematics tests.

#ifndef HOI_TESTS_CHAINS_HPP
#define HOI_TESTS_CHAINS_HPP

#include <string>

#include "hoi/kinematics.hpp"

namespace hoi::test {

// Planar arm, unit links along x, both joints about z.
inline const char* kPlanar2R = R"(<robot name="planar">
  <link name="base"/><link name="l1"/><link name="l2"/><link name="tip"/>
  <joint name="j1" type="revolute">
    <parent link="base"/><child link="l1"/>
    <axis xyz="0 0 1"/><limit lower="-3.14159" upper="3.14159"/>
  </joint>
  <joint name="j2" type="revolute">
    <parent link="l1"/><child link="l2"/>
    <origin xyz="1 0 0"/>
    <axis xyz="0 0 1"/><limit lower="-3.14159" upper="3.14159"/>
  </joint>
  <joint name="tip_joint" type="fixed">
    <parent link="l2"/><child link="tip"/>
    <origin xyz="1 0 0"/>
  </joint>
</robot>)";

inline KinematicChain arm6() {
  return load_chain(std::string(HOI_DATA_DIR) + "/fixture/arm6.urdf", {"world", "tool0", true});
}

}  // namespace hoi::test

#endif  // HOI_TESTS_CHAINS_HPP
