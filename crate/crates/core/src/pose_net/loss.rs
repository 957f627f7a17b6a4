use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::chain_sim::GRAVITY;
use crate::rigid_motion::{hat, rot_x, rot_y, rot_z, rpy_matrix};

/// Rotation-alignment term of the loss.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossForm {
    /// `−tr(R1ᵀR2)`.
    #[default]
    Trace,
    /// Geodesic angle `arccos((tr(R1ᵀR2) − 1)/2)`.
    Arccos,
}

/// Everything the loss needs besides the pose itself.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossSettings {
    pub ts: f64,
    pub gravity: bool,
    pub form: LossForm,
    pub rotation_weight: f64,
}

/// Loss value split into its two terms (unweighted).
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct LossParts {
    pub total: f64,
    pub accel: f64,
    pub rotation: f64,
}

/// Gradient of the loss with respect to `R`, `Ṙ` and `b̈`.
#[derive(Debug, Clone, Copy)]
pub struct PoseGrad {
    pub r: Matrix3<f64>,
    pub r_dot: Matrix3<f64>,
    pub b_ddot: Vector3<f64>,
}

/// `d^n/da^n` of an elementary rotation, n ≤ 2: R' = R·Ŝ, R'' = R·Ŝ².
fn elementary(axis: usize, a: f64, n: usize) -> Matrix3<f64> {
    let (r, e) = match axis {
        0 => (rot_x(a), Vector3::x()),
        1 => (rot_y(a), Vector3::y()),
        _ => (rot_z(a), Vector3::z()),
    };
    let s = hat(&e);
    match n {
        0 => r,
        1 => r * s,
        _ => r * s * s,
    }
}

/// R = Rz·Ry·Rx at roll-pitch-yaw `r`, with all first partials `F[k]` and
/// second partials `F2[k][m]`.
pub(crate) fn rpy_partials(r: [f64; 3]) -> (Matrix3<f64>, [Matrix3<f64>; 3], [[Matrix3<f64>; 3]; 3]) {
    let d = |order: [usize; 3]| {
        elementary(2, r[2], order[2]) * elementary(1, r[1], order[1]) * elementary(0, r[0], order[0])
    };
    let unit = |k: usize| {
        let mut o = [0; 3];
        o[k] = 1;
        o
    };
    let f = [d(unit(0)), d(unit(1)), d(unit(2))];
    let mut f2 = [[Matrix3::zeros(); 3]; 3];
    for k in 0..3 {
        for m in 0..3 {
            let mut o = unit(k);
            o[m] += 1;
            f2[k][m] = d(o);
        }
    }
    (*rpy_matrix(r).matrix(), f, f2)
}

/// sin(θ)/θ and (1 − cos θ)/θ² as functions of u = θ², with their
/// u-derivatives. Series below θ = 0.01.
fn rodrigues_coeffs(u: f64) -> (f64, f64, f64, f64) {
    if u < 1e-4 {
        (
            1.0 - u / 6.0 + u * u / 120.0,
            0.5 - u / 24.0 + u * u / 720.0,
            -1.0 / 6.0 + u / 60.0,
            -1.0 / 24.0 + u / 360.0,
        )
    } else {
        let t = u.sqrt();
        let (s, c) = t.sin_cos();
        (s / t, (1.0 - c) / u, (t * c - s) / (2.0 * t * u), (t * s - 2.0 * (1.0 - c)) / (2.0 * u * u))
    }
}

/// Rotation by the rotation vector `v`: `I + f·V + g·V²`, smooth at 0.
pub(crate) fn rodrigues_smooth(v: &Vector3<f64>) -> Matrix3<f64> {
    let (f, g, _, _) = rodrigues_coeffs(v.norm_squared());
    let w = hat(v);
    Matrix3::identity() + w * f + w * w * g
}

/// Components of `G − Gᵀ` such that `⟨G, hat(x)⟩ = x · skew_vec(G)`.
fn skew_vec(g: &Matrix3<f64>) -> Vector3<f64> {
    Vector3::new(g[(2, 1)] - g[(1, 2)], g[(0, 2)] - g[(2, 0)], g[(1, 0)] - g[(0, 1)])
}

/// Pulls `G = ∂L/∂R1` back to the rotation vector.
fn rodrigues_smooth_back(v: &Vector3<f64>, g1: &Matrix3<f64>) -> Vector3<f64> {
    let (f, g, fp, gp) = rodrigues_coeffs(v.norm_squared());
    let w = hat(v);
    let wt = w.transpose();
    let sym = g1 * wt + wt * g1;
    skew_vec(g1) * f + skew_vec(&sym) * g + v * (2.0 * (fp * g1.dot(&w) + gp * g1.dot(&(w * w))))
}

fn gravity_vec(on: bool) -> Vector3<f64> {
    if on {
        Vector3::from(GRAVITY)
    } else {
        Vector3::zeros()
    }
}

/// Per-sample loss `|α − Rᵀ(b̈ − g)| + w·rot(R1, R2)` where
/// `R1 = exp(ts·vee(RᵀṘ))` and `R2 = rpy_matrix(β·ts)`.
pub fn pose_loss(
    r: &Matrix3<f64>,
    r_dot: &Matrix3<f64>,
    b_ddot: &Vector3<f64>,
    alpha: &[f64; 3],
    beta: &[f64; 3],
    s: &LossSettings,
) -> LossParts {
    pose_loss_grad(r, r_dot, b_ddot, alpha, beta, s).0
}

pub fn pose_loss_grad(
    r: &Matrix3<f64>,
    r_dot: &Matrix3<f64>,
    b_ddot: &Vector3<f64>,
    alpha: &[f64; 3],
    beta: &[f64; 3],
    s: &LossSettings,
) -> (LossParts, PoseGrad) {
    let q = b_ddot - gravity_vec(s.gravity);
    let e = Vector3::from(*alpha) - r.transpose() * q;
    let accel = e.norm();
    let e_hat = if accel > 1e-300 { e / accel } else { Vector3::zeros() };

    let m = r.transpose() * r_dot;
    let omega = skew_vec(&m) * 0.5;
    let v = omega * s.ts;
    let r1 = rodrigues_smooth(&v);
    let r2 = *rpy_matrix(beta.map(|b| b * s.ts)).matrix();
    let tr = r1.dot(&r2);
    let (rotation, dtr) = match s.form {
        LossForm::Trace => (-tr, -1.0),
        LossForm::Arccos => {
            let c = ((tr - 1.0) / 2.0).clamp(-1.0 + 1e-12, 1.0 - 1e-12);
            (c.acos(), -0.5 / (1.0 - c * c).sqrt())
        }
    };
    let w = s.rotation_weight;

    let g_v = rodrigues_smooth_back(&v, &(r2 * (w * dtr)));
    let g_m = hat(&(g_v * (0.5 * s.ts)));
    let grad = PoseGrad {
        r: -q * e_hat.transpose() + r_dot * g_m.transpose(),
        r_dot: r * g_m,
        b_ddot: -(r * e_hat),
    };
    (LossParts { total: accel + w * rotation, accel, rotation }, grad)
}
