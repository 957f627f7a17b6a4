use std::collections::BTreeMap;

use nalgebra::{DMatrix, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rigid_motion::{rodrigues, rpy_from_matrix, AngularVelocity, HomTransform};

use super::spec::RobotSpec;

/// World-frame state of one link frame.
#[derive(Debug, Clone, Copy)]
pub struct LinkState {
    pub pose: HomTransform,
    pub omega: Vector3<f64>,
    pub alpha: Vector3<f64>,
    pub acc: Vector3<f64>,
}

impl LinkState {
    fn at_rest() -> Self {
        Self { pose: HomTransform::identity(), omega: Vector3::zeros(), alpha: Vector3::zeros(), acc: Vector3::zeros() }
    }
}

/// World-frame joint axis line.
#[derive(Debug, Clone, Copy)]
pub struct JointLine {
    pub origin: Vector3<f64>,
    pub axis: Vector3<f64>,
}

/// One IMU measurement in the sensor's body frame: linear acceleration
/// (m/s²) and roll-pitch-yaw rates (rad/s).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensorReading {
    pub id: String,
    pub alpha: [f64; 3],
    pub beta: [f64; 3],
}

fn check_len(spec: &RobotSpec, v: &[f64]) -> Result<()> {
    if v.len() != spec.n_joints() {
        return Err(Error::DimensionMismatch { expected: spec.n_joints(), got: v.len() });
    }
    Ok(())
}

fn joint_rotation(axis: &Vector3<f64>, angle: f64) -> HomTransform {
    HomTransform::new(rodrigues(&AngularVelocity::body(axis * angle), 1.0), Vector3::zeros())
}

/// Walks the tree from the root, carrying pose, angular velocity and
/// acceleration, and link-origin acceleration.
fn propagate(
    spec: &RobotSpec,
    theta: &[f64],
    theta_dot: &[f64],
    theta_ddot: &[f64],
) -> Result<(BTreeMap<String, LinkState>, Vec<JointLine>)> {
    check_len(spec, theta)?;
    check_len(spec, theta_dot)?;
    check_len(spec, theta_ddot)?;
    let topo = spec.topology();
    let mut links = BTreeMap::new();
    let mut lines = vec![JointLine { origin: Vector3::zeros(), axis: Vector3::zeros() }; spec.n_joints()];
    links.insert(topo.root().to_string(), LinkState::at_rest());
    let mut queue = std::collections::VecDeque::from([topo.root().to_string()]);
    while let Some(p) = queue.pop_front() {
        let parent = links[&p];
        for c in topo.children(&p) {
            let edge = &topo.attachment(c).expect("child").edge;
            let j = spec.joint_index(edge).expect("validated joint");
            let joint = spec.joint(edge).expect("validated joint");
            let frame = parent.pose * joint.offset;
            let z = frame.rotation.matrix() * joint.axis;
            let r = frame.translation - parent.pose.translation;
            let omega = parent.omega + z * theta_dot[j];
            let alpha = parent.alpha + z * theta_ddot[j] + parent.omega.cross(&z) * theta_dot[j];
            let acc = parent.acc + parent.alpha.cross(&r) + parent.omega.cross(&parent.omega.cross(&r));
            lines[j] = JointLine { origin: frame.translation, axis: z };
            links.insert(
                c.to_string(),
                LinkState { pose: frame * joint_rotation(&joint.axis, theta[j]), omega, alpha, acc },
            );
            queue.push_back(c.to_string());
        }
    }
    Ok((links, lines))
}

/// World pose of every link frame, root included.
pub fn link_poses(spec: &RobotSpec, theta: &[f64]) -> Result<BTreeMap<String, HomTransform>> {
    let z = vec![0.0; theta.len()];
    let (links, _) = propagate(spec, theta, &z, &z)?;
    Ok(links.into_iter().map(|(n, s)| (n, s.pose)).collect())
}

/// World pose of every sensor.
pub fn fk(spec: &RobotSpec, theta: &[f64]) -> Result<BTreeMap<String, HomTransform>> {
    let links = link_poses(spec, theta)?;
    Ok(spec.sensors().iter().map(|s| (s.id.clone(), links[&s.node] * s.mount)).collect())
}

fn find_sensor<'a>(spec: &'a RobotSpec, id: &str) -> Result<&'a super::spec::Sensor> {
    spec.sensor(id).ok_or_else(|| Error::InvalidArgument(format!("unknown sensor `{id}`")))
}

pub fn sensor_pose(spec: &RobotSpec, theta: &[f64], sensor: &str) -> Result<HomTransform> {
    let s = find_sensor(spec, sensor)?;
    Ok(link_poses(spec, theta)?[&s.node] * s.mount)
}

/// 12×N Jacobian of a sensor pose: rows stack ∂n_x, ∂n_y, ∂n_z (columns of
/// the rotation) and ∂b (position). Joint `j` contributes `ω_j × ·` to the
/// rotation columns and `ω_j × (b − p_j)` to the position; joints off the
/// sensor's root path give exact zero columns.
pub fn analytic_jacobian(spec: &RobotSpec, theta: &[f64], sensor: &str) -> Result<DMatrix<f64>> {
    let s = find_sensor(spec, sensor)?;
    let z = vec![0.0; theta.len()];
    let (links, lines) = propagate(spec, theta, &z, &z)?;
    let pose = links[&s.node].pose * s.mount;
    let r = pose.rotation.matrix();
    let b = pose.translation;
    let mut jac = DMatrix::zeros(12, spec.n_joints());
    for edge in spec.topology().path_edges(&s.node) {
        let j = spec.joint_index(edge).expect("validated joint");
        let JointLine { origin, axis } = lines[j];
        for k in 0..3 {
            let col = axis.cross(&r.column(k).into_owned());
            jac.fixed_view_mut::<3, 1>(3 * k, j).copy_from(&col);
        }
        jac.fixed_view_mut::<3, 1>(9, j).copy_from(&axis.cross(&(b - origin)));
    }
    Ok(jac)
}

/// World-frame pose, angular velocity and linear acceleration of one sensor.
#[derive(Debug, Clone, Copy)]
pub struct SensorMotion {
    pub pose: HomTransform,
    pub omega: Vector3<f64>,
    pub acc: Vector3<f64>,
}

fn motion_of(links: &BTreeMap<String, LinkState>, node: &str, mount: HomTransform) -> SensorMotion {
    let link = links[node];
    let pose = link.pose * mount;
    let d = pose.translation - link.pose.translation;
    let acc = link.acc + link.alpha.cross(&d) + link.omega.cross(&link.omega.cross(&d));
    SensorMotion { pose, omega: link.omega, acc }
}

/// Motion of every sensor, keyed by sensor id.
pub fn sensor_motions(
    spec: &RobotSpec,
    theta: &[f64],
    theta_dot: &[f64],
    theta_ddot: &[f64],
) -> Result<BTreeMap<String, SensorMotion>> {
    let (links, _) = propagate(spec, theta, theta_dot, theta_ddot)?;
    Ok(spec.sensors().iter().map(|s| (s.id.clone(), motion_of(&links, &s.node, s.mount))).collect())
}

/// Body-frame IMU readings for every sensor at one joint state.
///
/// `alpha = Rᵀ(b̈ − g)` (gravity term only when `gravity` is set) and
/// `beta` holds the roll-pitch-yaw rates whose rotation over `ts` equals the
/// Rodrigues rotation of the body angular velocity over `ts`.
pub fn synthesize_imu(
    spec: &RobotSpec,
    theta: &[f64],
    theta_dot: &[f64],
    theta_ddot: &[f64],
    ts: f64,
    gravity: bool,
) -> Result<Vec<SensorReading>> {
    if !(ts > 0.0) {
        return Err(Error::InvalidArgument("sample period must be positive".into()));
    }
    let (links, _) = propagate(spec, theta, theta_dot, theta_ddot)?;
    let g = if gravity { spec.gravity } else { Vector3::zeros() };
    Ok(spec
        .sensors()
        .iter()
        .map(|s| {
            let m = motion_of(&links, &s.node, s.mount);
            let rt = m.pose.rotation.matrix().transpose();
            let alpha = rt * (m.acc - g);
            let omega_b = rt * m.omega;
            let r1 = rodrigues(&AngularVelocity::body(omega_b), ts);
            let rpy = rpy_from_matrix(&r1);
            SensorReading { id: s.id.clone(), alpha: alpha.into(), beta: rpy.map(|a| a / ts) }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::super::spec::{builtin_robot, Joint};
    use super::*;
    use crate::hetero_tree::{HeteroOutTree, ROOT};
    use crate::rigid_motion::rpy_matrix;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn one_joint(mount_x: f64) -> RobotSpec {
        let topo = HeteroOutTree::new(ROOT, [("l1", "root", "j1")]).unwrap();
        let joints = [("j1".to_string(), Joint { axis: Vector3::z(), offset: HomTransform::identity() })].into();
        let mounts = [("l1".to_string(), vec![HomTransform::from_translation(Vector3::new(mount_x, 0.0, 0.0))])].into();
        RobotSpec::new(topo, joints, mounts, Vector3::new(0.0, 0.0, -9.8)).unwrap()
    }

    #[test]
    fn zero_angle_gives_mount_pose() {
        let r = one_joint(1.0);
        let p = fk(&r, &[0.0]).unwrap();
        assert_abs_diff_eq!(p["l1/0"].translation, Vector3::new(1.0, 0.0, 0.0), epsilon = 1e-15);
    }

    #[test]
    fn quarter_turn_moves_point_to_y() {
        let r = one_joint(1.0);
        let p = sensor_pose(&r, &[std::f64::consts::FRAC_PI_2], "l1/0").unwrap();
        assert_abs_diff_eq!(p.translation, Vector3::new(0.0, 1.0, 0.0), epsilon = 1e-12);
        let j = analytic_jacobian(&r, &[0.0], "l1/0").unwrap();
        assert_abs_diff_eq!(j[(9, 0)], 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(j[(10, 0)], 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(j[(11, 0)], 0.0, epsilon = 1e-15);
    }

    #[test]
    fn dimension_mismatch() {
        let r = builtin_robot("robot2", 1).unwrap();
        assert!(matches!(fk(&r, &[0.0; 4]), Err(Error::DimensionMismatch { expected: 5, got: 4 })));
    }

    #[test]
    fn off_path_joints_do_not_move_sensor() {
        let r = builtin_robot("robot6", 2).unwrap();
        let theta = [0.3, -0.4, 0.8, 0.1, -1.2];
        let base = fk(&r, &theta).unwrap();
        // joint3 only carries link3.
        let mut moved = theta;
        moved[2] += 0.7;
        let after = fk(&r, &moved).unwrap();
        for (id, pose) in &base {
            let changed = (pose.to_matrix() - after[id].to_matrix()).amax() > 1e-12;
            assert_eq!(changed, id.starts_with("link3/"), "{id}");
        }
    }

    fn fd_jacobian(spec: &RobotSpec, theta: &[f64], sensor: &str, h: f64) -> DMatrix<f64> {
        let flat = |p: HomTransform| {
            let r = p.rotation.matrix();
            let mut v = [0.0; 12];
            for k in 0..3 {
                for i in 0..3 {
                    v[3 * k + i] = r[(i, k)];
                }
                v[9 + k] = p.translation[k];
            }
            v
        };
        let mut out = DMatrix::zeros(12, theta.len());
        for j in 0..theta.len() {
            let mut tp = theta.to_vec();
            let mut tm = theta.to_vec();
            tp[j] += h;
            tm[j] -= h;
            let (a, b) = (flat(sensor_pose(spec, &tp, sensor).unwrap()), flat(sensor_pose(spec, &tm, sensor).unwrap()));
            for i in 0..12 {
                out[(i, j)] = (a[i] - b[i]) / (2.0 * h);
            }
        }
        out
    }

    #[test]
    fn jacobian_matches_finite_differences_on_builtins() {
        for name in super::super::spec::BUILTIN_ROBOTS {
            let r = builtin_robot(name, 2).unwrap();
            let theta = [0.4, -0.9, 1.3, 0.2, -0.5];
            for s in r.sensors() {
                let a = analytic_jacobian(&r, &theta, &s.id).unwrap();
                let f = fd_jacobian(&r, &theta, &s.id, 1e-6);
                assert!((a.clone() - f).amax() < 1e-6, "{name} {}", s.id);
                let path = r.topology().path_edges(&s.node);
                for (j, e) in r.joint_labels().iter().enumerate() {
                    let zero = a.column(j).iter().all(|&v| v == 0.0);
                    assert_eq!(zero, !path.contains(&e.as_str()), "{name} {} {e}", s.id);
                }
            }
        }
    }

    #[test]
    fn static_robot_readings() {
        let r = one_joint(0.5);
        let off = synthesize_imu(&r, &[0.0], &[0.0], &[0.0], 0.01, false).unwrap();
        assert_eq!(off[0].alpha, [0.0; 3]);
        assert_eq!(off[0].beta, [0.0; 3]);
        let on = synthesize_imu(&r, &[0.0], &[0.0], &[0.0], 0.01, true).unwrap();
        assert_abs_diff_eq!(Vector3::from(on[0].alpha), Vector3::new(0.0, 0.0, 9.8), epsilon = 1e-15);
    }

    #[test]
    fn static_builtin_without_gravity_reads_exact_zero() {
        let r = builtin_robot("robot5", 3).unwrap();
        for s in synthesize_imu(&r, &[0.1, 0.2, 0.3, 0.4, 0.5], &[0.0; 5], &[0.0; 5], 0.01, false).unwrap() {
            assert_eq!(s.alpha, [0.0; 3]);
            assert_eq!(s.beta, [0.0; 3]);
        }
    }

    /// Smooth joint motion used by the time-derivative oracles.
    fn motion(t: f64) -> ([f64; 5], [f64; 5], [f64; 5]) {
        let mut th = [0.0; 5];
        let mut thd = [0.0; 5];
        let mut thdd = [0.0; 5];
        for j in 0..5 {
            let w = 0.7 + 0.3 * j as f64;
            let a = 0.8 - 0.1 * j as f64;
            th[j] = a * (w * t + j as f64).sin();
            thd[j] = a * w * (w * t + j as f64).cos();
            thdd[j] = -a * w * w * (w * t + j as f64).sin();
        }
        (th, thd, thdd)
    }

    #[test]
    fn acceleration_matches_time_finite_differences() {
        let r = builtin_robot("robot2", 2).unwrap();
        let h = 1e-3;
        for &t in &[0.3, 1.1, 2.7] {
            let (th, thd, thdd) = motion(t);
            let imu = synthesize_imu(&r, &th, &thd, &thdd, 0.01, false).unwrap();
            let p = |tt: f64| fk(&r, &motion(tt).0).unwrap();
            let (pm, p0, pp) = (p(t - h), p(t), p(t + h));
            for reading in &imu {
                let acc = (pp[&reading.id].translation - 2.0 * p0[&reading.id].translation + pm[&reading.id].translation) / (h * h);
                let body = p0[&reading.id].rotation.matrix().transpose() * acc;
                assert!((body - Vector3::from(reading.alpha)).amax() < 1e-4, "{}", reading.id);
            }
        }
    }

    #[test]
    fn rpy_rates_reproduce_body_rotation() {
        let r = builtin_robot("robot1", 1).unwrap();
        let ts = 0.01;
        let (th, thd, thdd) = motion(0.9);
        let imu = synthesize_imu(&r, &th, &thd, &thdd, ts, true).unwrap();
        let h = 1e-6;
        let p = |tt: f64| fk(&r, &motion(tt).0).unwrap();
        let (pm, p0, pp) = (p(0.9 - h), p(0.9), p(0.9 + h));
        for reading in &imu {
            // Body angular velocity from Rᵀ Ṙ by central differences.
            let rdot = (pp[&reading.id].rotation.matrix() - pm[&reading.id].rotation.matrix()) / (2.0 * h);
            let w = crate::rigid_motion::vee_skew_part(&(p0[&reading.id].rotation.matrix().transpose() * rdot));
            let r1 = rodrigues(&AngularVelocity::body(w), ts);
            let r2 = rpy_matrix(Vector3::from(reading.beta).scale(ts).into());
            assert!((r1.matrix() - r2.matrix()).amax() < 1e-8, "{}", reading.id);
        }
    }

    proptest! {
        #[test]
        fn jacobian_fd_random_configs(th in proptest::array::uniform5(-3.0f64..3.0)) {
            let r = builtin_robot("robot5", 1).unwrap();
            for s in r.sensors() {
                let a = analytic_jacobian(&r, &th, &s.id).unwrap();
                let f = fd_jacobian(&r, &th, &s.id, 1e-6);
                prop_assert!((a - f).amax() < 1e-6);
            }
        }
    }
}
