use nalgebra::{DMatrix, Matrix3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::chain_sim::{analytic_jacobian, sensor_pose, RobotSpec};
use crate::error::{Error, Result};
use crate::pose_net::PoseNet;
use crate::rigid_motion::HomTransform;

/// A differentiable map from joint angles to a sensor pose.
pub trait PoseMap: Sync {
    fn n_joints(&self) -> usize;

    fn pose(&self, theta: &[f64]) -> Result<HomTransform>;

    /// 12×N Jacobian: rows 0..9 are the derivatives of the three rotation
    /// columns n_x, n_y, n_z; rows 9..12 the derivative of the position.
    fn jacobian(&self, theta: &[f64]) -> Result<DMatrix<f64>>;
}

/// Ground-truth pose of one sensor of a robot.
#[derive(Debug, Clone, Copy)]
pub struct OracleSensor<'a> {
    pub spec: &'a RobotSpec,
    pub id: &'a str,
}

impl PoseMap for OracleSensor<'_> {
    fn n_joints(&self) -> usize {
        self.spec.n_joints()
    }

    fn pose(&self, theta: &[f64]) -> Result<HomTransform> {
        sensor_pose(self.spec, theta, self.id)
    }

    fn jacobian(&self, theta: &[f64]) -> Result<DMatrix<f64>> {
        analytic_jacobian(self.spec, theta, self.id)
    }
}

impl PoseMap for PoseNet {
    fn n_joints(&self) -> usize {
        PoseNet::n_joints(self)
    }

    fn pose(&self, theta: &[f64]) -> Result<HomTransform> {
        self.forward(theta)
    }

    fn jacobian(&self, theta: &[f64]) -> Result<DMatrix<f64>> {
        let n = PoseNet::n_joints(self);
        let zeros = vec![0.0; n];
        let mut jac = DMatrix::zeros(12, n);
        for j in 0..n {
            let mut dir = zeros.clone();
            dir[j] = 1.0;
            let jet = self.output_jet(theta, &dir, &zeros)?;
            let (_, f, _) = crate::pose_net::rpy_partials(jet.r);
            let mut rd = Matrix3::zeros();
            for k in 0..3 {
                rd += f[k] * jet.r_dot[k];
            }
            for c in 0..3 {
                for r in 0..3 {
                    jac[(3 * c + r, j)] = rd[(r, c)];
                }
                jac[(9 + c, j)] = jet.t_dot[c];
            }
        }
        Ok(jac)
    }
}

/// `Y · P(θ)` for a constant transform `Y`.
#[derive(Debug, Clone, Copy)]
pub struct Reposed<P> {
    pub inner: P,
    pub y: HomTransform,
}

impl<P: PoseMap> PoseMap for Reposed<P> {
    fn n_joints(&self) -> usize {
        self.inner.n_joints()
    }

    fn pose(&self, theta: &[f64]) -> Result<HomTransform> {
        Ok(self.y * self.inner.pose(theta)?)
    }

    fn jacobian(&self, theta: &[f64]) -> Result<DMatrix<f64>> {
        let mut jac = self.inner.jacobian(theta)?;
        let r = *self.y.rotation.matrix();
        for j in 0..jac.ncols() {
            for b in 0..4 {
                let v = r * jac.fixed_view::<3, 1>(3 * b, j);
                jac.fixed_view_mut::<3, 1>(3 * b, j).copy_from(&v);
            }
        }
        Ok(jac)
    }
}

/// 4×N matrix of Jacobian column norms, one row per 3-row block.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tij(pub DMatrix<f64>);

impl Tij {
    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.0
    }
}

pub fn tij<P: PoseMap + ?Sized>(map: &P, theta: &[f64]) -> Result<Tij> {
    if theta.len() != map.n_joints() {
        return Err(Error::DimensionMismatch { expected: map.n_joints(), got: theta.len() });
    }
    let jac = map.jacobian(theta)?;
    let n = jac.ncols();
    Ok(Tij(DMatrix::from_fn(4, n, |b, j| jac.fixed_view::<3, 1>(3 * b, j).norm())))
}

/// How per-configuration TIJs are combined into one 4×N matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Aggregate {
    /// Elementwise empirical variance (divisor n − 1).
    Variance,
    /// Elementwise mean.
    #[default]
    Mean,
    /// Elementwise mean of squares.
    SecondMoment,
}

pub fn tij_aggregate<P: PoseMap + ?Sized>(map: &P, thetas: &[Vec<f64>], how: Aggregate) -> Result<DMatrix<f64>> {
    let need = if how == Aggregate::Variance { 2 } else { 1 };
    if thetas.len() < need {
        return Err(Error::InvalidArgument(format!("need at least {need} configurations, got {}", thetas.len())));
    }
    let all = thetas.iter().map(|t| tij(map, t).map(|t| t.0)).collect::<Result<Vec<_>>>()?;
    let n = all.len() as f64;
    let mean = all.iter().fold(DMatrix::zeros(4, map.n_joints()), |a, m| a + m) / n;
    Ok(match how {
        Aggregate::Mean => mean,
        Aggregate::SecondMoment => all.iter().fold(DMatrix::zeros(4, map.n_joints()), |a, m| a + m.component_mul(m)) / n,
        Aggregate::Variance => {
            let ss = all.iter().fold(DMatrix::zeros(4, map.n_joints()), |a, m| {
                let d = m - &mean;
                a + d.component_mul(&d)
            });
            ss / (n - 1.0)
        }
    })
}

/// Elementwise variance of the TIJ over the given configurations.
pub fn tij_variance<P: PoseMap + ?Sized>(map: &P, thetas: &[Vec<f64>]) -> Result<DMatrix<f64>> {
    tij_aggregate(map, thetas, Aggregate::Variance)
}

/// `count` configurations drawn uniformly from `[lo, hi]^n`.
pub fn sample_configurations(n: usize, count: usize, lo: f64, hi: f64, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count).map(|_| (0..n).map(|_| rng.random_range(lo..=hi)).collect()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chain_sim::builtin_robot;
    use crate::rigid_motion::rpy_matrix;
    use nalgebra::Vector3;

    struct Constant;

    impl PoseMap for Constant {
        fn n_joints(&self) -> usize {
            3
        }
        fn pose(&self, _: &[f64]) -> Result<HomTransform> {
            Ok(HomTransform::identity())
        }
        fn jacobian(&self, _: &[f64]) -> Result<DMatrix<f64>> {
            Ok(DMatrix::zeros(12, 3))
        }
    }

    #[test]
    fn constant_map_has_zero_tij() {
        assert_eq!(tij(&Constant, &[0.1, 0.2, 0.3]).unwrap().0, DMatrix::zeros(4, 3));
        let th = sample_configurations(3, 5, -1.0, 1.0, 0);
        assert_eq!(tij_variance(&Constant, &th).unwrap(), DMatrix::zeros(4, 3));
    }

    #[test]
    fn variance_needs_two_samples() {
        assert!(tij_variance(&Constant, &[vec![0.0; 3]]).is_err());
        assert!(tij_aggregate(&Constant, &[vec![0.0; 3]], Aggregate::Mean).is_ok());
    }

    #[test]
    fn oracle_columns_vanish_exactly_off_path() {
        let spec = builtin_robot("robot2", 1).unwrap();
        let thetas = sample_configurations(5, 16, -3.0, 3.0, 4);
        for s in spec.sensors() {
            let map = OracleSensor { spec: &spec, id: &s.id };
            let path = spec.topology().path_edges(&s.node);
            let var = tij_variance(&map, &thetas).unwrap();
            let mean = tij_aggregate(&map, &thetas, Aggregate::Mean).unwrap();
            for (j, e) in spec.joint_labels().iter().enumerate() {
                let on = path.contains(&e.as_str());
                for b in 0..4 {
                    if !on {
                        assert_eq!(mean[(b, j)], 0.0);
                        assert_eq!(var[(b, j)], 0.0);
                    }
                }
                if on {
                    assert!((0..4).any(|b| mean[(b, j)] > 1e-6), "{} {e}", s.id);
                }
            }
        }
    }

    #[test]
    fn variance_ignores_sample_order() {
        let spec = builtin_robot("robot5", 1).unwrap();
        let map = OracleSensor { spec: &spec, id: &spec.sensors()[3].id };
        let mut thetas = sample_configurations(5, 10, -3.0, 3.0, 9);
        let a = tij_variance(&map, &thetas).unwrap();
        thetas.reverse();
        thetas.swap(2, 7);
        let b = tij_variance(&map, &thetas).unwrap();
        assert!((a - b).amax() < 1e-12);
    }

    #[test]
    fn invariant_under_constant_transforms() {
        let spec = builtin_robot("robot6", 1).unwrap();
        let map = OracleSensor { spec: &spec, id: &spec.sensors()[4].id };
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let th = [0.3, -1.2, 2.0, 0.5, -0.4];
        let base = tij(&map, &th).unwrap().0;
        for _ in 0..100 {
            let rpy = [rng.random_range(-3.0..3.0), rng.random_range(-1.5..1.5), rng.random_range(-3.0..3.0)];
            let t = Vector3::new(rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0));
            let y = HomTransform::new(rpy_matrix(rpy), t);
            let moved = tij(&Reposed { inner: map, y }, &th).unwrap().0;
            assert!((moved - &base).amax() < 1e-9);
        }
    }

    #[test]
    fn net_jacobian_matches_finite_differences() {
        let net = PoseNet::new(3, &[6, 6, 6], 5).unwrap();
        let th = [0.4, -0.1, 0.8];
        let jac = PoseMap::jacobian(&net, &th).unwrap();
        let h = 1e-6;
        for j in 0..3 {
            let mut p = th;
            let mut m = th;
            p[j] += h;
            m[j] -= h;
            let d = (net.forward(&p).unwrap().to_matrix() - net.forward(&m).unwrap().to_matrix()) / (2.0 * h);
            for c in 0..3 {
                for r in 0..3 {
                    assert!((d[(r, c)] - jac[(3 * c + r, j)]).abs() < 1e-7);
                }
                assert!((d[(c, 3)] - jac[(9 + c, j)]).abs() < 1e-7);
            }
        }
    }
}
