#pragma once

// Frozen human geometry shared by the simulator, the trainer and the service.
// Values approximate an average seated adult; the chain is
//   torso yaw/pitch/roll -> shoulder flex/abduct/rotate -> elbow -> wrist flex/deviate.
//
// World frame = table frame: origin on the table surface at the human's edge,
// x to the human's right, y away from the human (toward the robot), z up.

#include <array>

namespace reachabc::anthropometry {

inline constexpr double kTorso = 0.55;
inline constexpr double kShoulderOffset = 0.20;
inline constexpr double kUpperArm = 0.37;
inline constexpr double kForearm = 0.27;
inline constexpr double kHand = 0.08;

// Seated hip position in the table frame.
inline constexpr std::array<double, 3> kHipPosition{0.0, -0.25, -0.05};

// Symmetric limits, radians, one per joint in chain order.
inline constexpr std::array<double, 9> kJointLimit{
    1.2,  // torso yaw
    1.1,  // torso pitch
    0.5,  // torso roll
    2.5,  // shoulder flexion
    2.0,  // shoulder abduction
    1.5,  // shoulder rotation
    2.5,  // elbow
    1.2,  // wrist flexion
    0.5,  // wrist deviation
};

// Hand resting on the table edge in front of the left shoulder. Also the
// secondary posture the redundant joints are pulled toward.
inline constexpr std::array<double, 9> kRestPosture{
    0.0, 0.0, 0.0, 0.1, 0.0, 0.0, 1.2, 0.0, 0.0,
};

}  // namespace reachabc::anthropometry
