//! Per-sensor learned pose map from joint angles to an SE(3) pose, with
//! second-order time derivatives and a hand-written training loop.

mod loss;
mod net;
mod train;

use nalgebra::{Matrix3, Matrix4, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rigid_motion::{rpy_matrix, HomTransform};

pub use loss::{pose_loss, pose_loss_grad, LossForm, LossParts, LossSettings, PoseGrad};
pub use net::{OutputJet, PoseNet, DEFAULT_WIDTHS};
pub use train::{batch_gradient, mean_loss, sample_loss, sensor_dataset, train, Optimizer, SensorSample, TrainConfig, TrainReport};

pub(crate) use loss::rpy_partials;

/// How time derivatives of the pose are obtained.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DerivativeMode {
    /// Forward-mode jets through the network.
    Analytic,
    /// Central differences of the plain forward pass with step `h`.
    FiniteDifference { h: f64 },
}

impl Default for DerivativeMode {
    fn default() -> Self {
        Self::Analytic
    }
}

/// Wraps an angle into `[0, 2π)`.
pub fn wrap_angle(a: f64) -> f64 {
    let w = a.sin().atan2(a.cos());
    if w < 0.0 {
        w + std::f64::consts::TAU
    } else {
        w
    }
}

fn pose_matrix(r: &Matrix3<f64>, t: &Vector3<f64>, bottom: f64) -> Matrix4<f64> {
    let mut m = Matrix4::zeros();
    m.fixed_view_mut::<3, 3>(0, 0).copy_from(r);
    m.fixed_view_mut::<3, 1>(0, 3).copy_from(t);
    m[(3, 3)] = bottom;
    m
}

impl PoseNet {
    /// Pose of the sensor at joint angles `theta`.
    pub fn forward(&self, theta: &[f64]) -> Result<HomTransform> {
        let zeros = vec![0.0; theta.len()];
        let j = self.output_jet(theta, &zeros, &zeros)?;
        Ok(HomTransform::new(rpy_matrix(j.r), Vector3::from(j.t)))
    }

    /// Roll, pitch and yaw reported by the rotation head, each in `[0, 2π)`.
    pub fn rpy(&self, theta: &[f64]) -> Result<[f64; 3]> {
        let zeros = vec![0.0; theta.len()];
        Ok(self.output_jet(theta, &zeros, &zeros)?.r.map(wrap_angle))
    }

    /// `(T, Ṫ, T̈)` along a joint trajectory passing through `theta` with
    /// velocity `theta_dot` and acceleration `theta_ddot`.
    pub fn time_derivatives(
        &self,
        theta: &[f64],
        theta_dot: &[f64],
        theta_ddot: &[f64],
        mode: DerivativeMode,
    ) -> Result<(Matrix4<f64>, Matrix4<f64>, Matrix4<f64>)> {
        self.check_input(theta)?;
        self.check_input(theta_dot)?;
        self.check_input(theta_ddot)?;
        match mode {
            DerivativeMode::Analytic => {
                let j = self.output_jet(theta, theta_dot, theta_ddot)?;
                let (r, f, f2) = rpy_partials(j.r);
                let mut rd = Matrix3::zeros();
                let mut rdd = Matrix3::zeros();
                for k in 0..3 {
                    rd += f[k] * j.r_dot[k];
                    rdd += f[k] * j.r_ddot[k];
                    for m in 0..3 {
                        rdd += f2[k][m] * (j.r_dot[k] * j.r_dot[m]);
                    }
                }
                Ok((
                    pose_matrix(&r, &Vector3::from(j.t), 1.0),
                    pose_matrix(&rd, &Vector3::from(j.t_dot), 0.0),
                    pose_matrix(&rdd, &Vector3::from(j.t_ddot), 0.0),
                ))
            }
            DerivativeMode::FiniteDifference { h } => {
                if !(h > 0.0) {
                    return Err(Error::InvalidArgument("finite-difference step must be positive".into()));
                }
                let at = |dir: &[f64], s: f64| -> Result<Matrix4<f64>> {
                    let x: Vec<f64> = theta.iter().zip(dir).map(|(a, d)| a + s * d).collect();
                    Ok(self.forward(&x)?.to_matrix())
                };
                let t0 = at(theta_dot, 0.0)?;
                let (vp, vm) = (at(theta_dot, h)?, at(theta_dot, -h)?);
                let (ap, am) = (at(theta_ddot, h)?, at(theta_ddot, -h)?);
                let td = (vp - vm) / (2.0 * h);
                let tdd = (vp - t0 * 2.0 + vm) / (h * h) + (ap - am) / (2.0 * h);
                Ok((t0, td, tdd))
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn net() -> PoseNet {
        PoseNet::new(3, &[8, 8, 8], 11).unwrap()
    }

    #[test]
    fn forward_is_deterministic_and_valid() {
        let n = net();
        let th = [0.1, 0.5, -0.3];
        let a = n.forward(&th).unwrap();
        assert_eq!(a, n.forward(&th).unwrap());
        assert!(a.rotation.is_valid(1e-12));
        assert!(n.forward(&[0.0; 2]).is_err());
    }

    #[test]
    fn zero_net_gives_identity_rotation() {
        let n = PoseNet::zeros(2, &[4, 4, 4]).unwrap();
        let p = n.forward(&[0.7, -1.0]).unwrap();
        assert_eq!(p, HomTransform::identity());
        assert_eq!(n.rpy(&[0.7, -1.0]).unwrap(), [0.0; 3]);
    }

    #[test]
    fn rpy_is_wrapped() {
        let n = net();
        for th in [[3.0, -2.0, 1.0], [0.0; 3]] {
            for a in n.rpy(&th).unwrap() {
                assert!((0.0..std::f64::consts::TAU).contains(&a));
            }
        }
    }

    #[test]
    fn zero_rates_give_zero_derivatives() {
        let n = net();
        let (_, d, dd) = n.time_derivatives(&[0.2, 0.3, 0.4], &[0.0; 3], &[0.0; 3], DerivativeMode::Analytic).unwrap();
        assert_eq!(d, Matrix4::zeros());
        assert_eq!(dd, Matrix4::zeros());
    }

    #[test]
    fn analytic_matches_finite_difference() {
        let n = net();
        let th = [0.2, -0.6, 1.1];
        let v = [0.9, -0.3, 0.5];
        let a = [0.4, 0.7, -1.2];
        let (t, d, dd) = n.time_derivatives(&th, &v, &a, DerivativeMode::Analytic).unwrap();
        let (t2, d2, dd2) = n.time_derivatives(&th, &v, &a, DerivativeMode::FiniteDifference { h: 1e-4 }).unwrap();
        assert!((t - t2).norm() < 1e-14);
        assert!((d - d2).norm() <= 1e-4 * d.norm().max(1.0));
        assert!((dd - dd2).norm() <= 1e-4 * dd.norm().max(1.0));
    }

    #[test]
    fn velocity_is_linear_in_rate() {
        let n = net();
        let th = [0.2, -0.6, 1.1];
        let v = [0.9, -0.3, 0.5];
        let v2 = v.map(|x| 2.0 * x);
        let (_, d, _) = n.time_derivatives(&th, &v, &[0.0; 3], DerivativeMode::Analytic).unwrap();
        let (_, d2, _) = n.time_derivatives(&th, &v2, &[0.0; 3], DerivativeMode::Analytic).unwrap();
        assert!((d * 2.0 - d2).norm() < 1e-12);
    }

    #[test]
    fn bad_step_rejected() {
        let r = net().time_derivatives(&[0.0; 3], &[0.0; 3], &[0.0; 3], DerivativeMode::FiniteDifference { h: 0.0 });
        assert!(matches!(r, Err(Error::InvalidArgument(_))));
    }
}
