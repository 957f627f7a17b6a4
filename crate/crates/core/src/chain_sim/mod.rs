//! Analytic ground-truth robots: kinematics over a tree of revolute joints,
//! joint trajectories, and IMU synthesis.

mod kinematics;
mod spec;
mod trajectory;

pub use kinematics::{analytic_jacobian, fk, link_poses, sensor_motions, sensor_pose, synthesize_imu, JointLine, LinkState, SensorMotion, SensorReading};
pub use spec::{builtin_robot, default_mount, Joint, RobotSpec, Sensor, AXIS_TOL, BUILTIN_ROBOTS, GRAVITY};
pub use trajectory::{
    add_noise, gen_trajectory, read_jsonl, simulate, write_jsonl, NoiseModel, Sinusoid, TrajectoryMode,
    TrajectorySample, ARM_SINUSOIDS,
};
