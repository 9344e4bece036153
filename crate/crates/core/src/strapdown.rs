//! Strapdown mechanization in 3D and the yaw-only planar reduction.
//!
//! Earth rate and transport rate are neglected. Attitude is propagated with
//! the exact rotation for the mean body rate over each step and then
//! re-orthonormalized; velocity and position use the trapezoidal rule.

use std::io::Write;

use nalgebra::{Matrix3, Vector2, Vector3};

use crate::error::{Error, Result};
use crate::types::{skew, wrap_angle, yaw_rotation, ImuSequence, NavState};

/// Above this `|C[2,0]|` the yaw angle is ill-defined.
const GIMBAL_LIMIT: f64 = 1.0 - 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct NavSolution {
    pub times: Vec<f64>,
    pub states: Vec<NavState>,
    /// Yaw per state, rad, in (−π, π].
    pub yaw: Vec<f64>,
    /// Final planar position, m.
    pub travelled_endpoint: Vector2<f64>,
}

impl NavSolution {
    fn from_states(times: Vec<f64>, states: Vec<NavState>) -> Self {
        let yaw = states.iter().map(|s| yaw_unchecked(&s.c)).collect();
        let last = states.last().map(|s| s.p).unwrap_or_else(Vector3::zeros);
        Self { times, states, yaw, travelled_endpoint: Vector2::new(last.x, last.y) }
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn planar_position(&self, k: usize) -> Vector2<f64> {
        let p = self.states[k].p;
        Vector2::new(p.x, p.y)
    }

    /// Writes `t,x,y,z,vx,vy,vz,yaw` rows.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "t,x,y,z,vx,vy,vz,yaw")?;
        for ((t, s), yaw) in self.times.iter().zip(&self.states).zip(&self.yaw) {
            writeln!(out, "{t},{},{},{},{},{},{},{yaw}", s.p.x, s.p.y, s.p.z, s.v.x, s.v.y, s.v.z)?;
        }
        Ok(())
    }
}

/// Planar initial condition for [`mechanize_2d`].
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PlanarState {
    pub p: Vector2<f64>,
    pub v: Vector2<f64>,
    pub yaw: f64,
}

/// Rotation for a body-frame rotation vector `phi` (Rodrigues).
pub fn rotation_from_vector(phi: &Vector3<f64>) -> Matrix3<f64> {
    let theta = phi.norm();
    let k = skew(phi);
    let k2 = k * k;
    let (a, b) = if theta < 1e-6 {
        let t2 = theta * theta;
        (1.0 - t2 / 6.0 + t2 * t2 / 120.0, 0.5 - t2 / 24.0 + t2 * t2 / 720.0)
    } else {
        (theta.sin() / theta, (1.0 - theta.cos()) / (theta * theta))
    };
    Matrix3::identity() + k * a + k2 * b
}

/// Nearest rotation matrix to `c` (symmetric orthogonalization, `C(CᵀC)^-½`).
pub fn orthonormalize(c: &Matrix3<f64>) -> Matrix3<f64> {
    let svd = c.svd(true, true);
    let (Some(mut u), Some(v_t)) = (svd.u, svd.v_t) else {
        return *c;
    };
    if (u * v_t).determinant() < 0.0 {
        let flipped = -u.column(2);
        u.set_column(2, &flipped);
    }
    u * v_t
}

/// Integrates `Ċ = CΩ` over `dt` for a constant body rate `w`.
pub fn propagate_attitude(c: &Matrix3<f64>, w: &Vector3<f64>, dt: f64) -> Matrix3<f64> {
    orthonormalize(&(c * rotation_from_vector(&(w * dt))))
}

fn yaw_unchecked(c: &Matrix3<f64>) -> f64 {
    wrap_angle(c[(1, 0)].atan2(c[(0, 0)]))
}

/// Heading of a body-to-navigation rotation, in (−π, π].
pub fn yaw_of(c: &Matrix3<f64>) -> Result<f64> {
    if c[(2, 0)].abs() > GIMBAL_LIMIT {
        return Err(Error::GimbalDegenerate(c[(2, 0)].abs()));
    }
    Ok(yaw_unchecked(c))
}

fn step_dt(seq: &ImuSequence, k: usize) -> Result<f64> {
    let s = seq.samples();
    let dt = s[k + 1].t - s[k].t;
    if dt <= 0.0 {
        return Err(Error::NonMonotoneTime { index: k + 1, prev: s[k].t, next: s[k + 1].t });
    }
    Ok(dt)
}

/// Full 3D mechanization from `init`; one state per input sample.
pub fn mechanize_3d(seq: &ImuSequence, init: &NavState, gravity: f64) -> Result<NavSolution> {
    seq.require_len(2)?;
    let g = Vector3::new(0.0, 0.0, gravity);
    let s = seq.samples();
    let mut states = Vec::with_capacity(s.len());
    states.push(*init);
    let mut cur = *init;
    for k in 0..s.len() - 1 {
        let dt = step_dt(seq, k)?;
        let w_mean = (s[k].w + s[k + 1].w) * 0.5;
        let c1 = propagate_attitude(&cur.c, &w_mean, dt);
        let a0 = cur.c * s[k].f + g;
        let a1 = c1 * s[k + 1].f + g;
        let v1 = cur.v + (a0 + a1) * (0.5 * dt);
        let p1 = cur.p + (cur.v + v1) * (0.5 * dt);
        cur = NavState { p: p1, v: v1, c: c1 };
        states.push(cur);
    }
    Ok(NavSolution::from_states(seq.times().collect(), states))
}

/// Planar mechanization using only `f_x`, `f_y` and `ω_z`.
pub fn mechanize_2d(seq: &ImuSequence, init: &PlanarState) -> Result<NavSolution> {
    seq.require_len(2)?;
    let s = seq.samples();
    let rot = |psi: f64, f: &Vector3<f64>| {
        let (sn, cs) = psi.sin_cos();
        Vector2::new(cs * f.x - sn * f.y, sn * f.x + cs * f.y)
    };
    let lift = |p: Vector2<f64>, v: Vector2<f64>, psi: f64| NavState {
        p: Vector3::new(p.x, p.y, 0.0),
        v: Vector3::new(v.x, v.y, 0.0),
        c: yaw_rotation(psi),
    };
    let (mut p, mut v, mut psi) = (init.p, init.v, init.yaw);
    let mut states = Vec::with_capacity(s.len());
    states.push(lift(p, v, psi));
    for k in 0..s.len() - 1 {
        let dt = step_dt(seq, k)?;
        let psi1 = psi + 0.5 * dt * (s[k].w.z + s[k + 1].w.z);
        let v1 = v + (rot(psi, &s[k].f) + rot(psi1, &s[k + 1].f)) * (0.5 * dt);
        p += (v + v1) * (0.5 * dt);
        v = v1;
        psi = psi1;
        states.push(lift(p, v, psi));
    }
    Ok(NavSolution::from_states(seq.times().collect(), states))
}
