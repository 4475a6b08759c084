//! Euclidean projections onto the primal and dual sets.

use crate::error::{check_len, Result};
use crate::linalg;
use crate::problem::{DualSet, PrimalSet};

/// Radial scaling onto `{v : ||v|| <= radius}`, in place.
///
/// After scaling, the computed norm can land an ulp above `radius`; the
/// scale is then stepped down until it does not, so that projecting a
/// projected point is the identity.
pub fn project_l2_ball_in_place(v: &mut [f64], radius: f64) {
    let n = linalg::norm(v);
    if n <= radius {
        return;
    }
    let scale = radius / n;
    v.iter_mut().for_each(|x| *x *= scale);
    while linalg::norm(v) > radius {
        v.iter_mut().for_each(|x| *x = x.next_toward_zero());
    }
}

trait NextTowardZero {
    fn next_toward_zero(self) -> Self;
}

impl NextTowardZero for f64 {
    fn next_toward_zero(self) -> f64 {
        if self > 0.0 {
            self.next_down()
        } else if self < 0.0 {
            self.next_up()
        } else {
            self
        }
    }
}

pub fn project_l2_ball(v: &[f64], radius: f64) -> Vec<f64> {
    let mut out = v.to_vec();
    project_l2_ball_in_place(&mut out, radius);
    out
}

pub fn project_linf_ball_in_place(v: &mut [f64], radius: f64) {
    v.iter_mut().for_each(|x| *x = x.clamp(-radius, radius));
}

/// Componentwise clamp to `[-radius, radius]`.
pub fn project_linf_ball(v: &[f64], radius: f64) -> Vec<f64> {
    let mut out = v.to_vec();
    project_linf_ball_in_place(&mut out, radius);
    out
}

pub fn project_box_in_place(v: &mut [f64], lo: &[f64], hi: &[f64]) -> Result<()> {
    check_len("box lower bounds", v.len(), lo.len())?;
    check_len("box upper bounds", v.len(), hi.len())?;
    for ((x, &l), &h) in v.iter_mut().zip(lo).zip(hi) {
        *x = x.max(l).min(h);
    }
    Ok(())
}

pub fn project_box(v: &[f64], lo: &[f64], hi: &[f64]) -> Result<Vec<f64>> {
    let mut out = v.to_vec();
    project_box_in_place(&mut out, lo, hi)?;
    Ok(out)
}

impl PrimalSet {
    pub fn project_in_place(&self, v: &mut [f64]) -> Result<()> {
        match self {
            PrimalSet::L2Ball { radius } => {
                project_l2_ball_in_place(v, *radius);
                Ok(())
            }
            PrimalSet::Box { lo, hi } => project_box_in_place(v, lo, hi),
        }
    }

    pub fn project(&self, v: &[f64]) -> Result<Vec<f64>> {
        let mut out = v.to_vec();
        self.project_in_place(&mut out)?;
        Ok(out)
    }
}

impl DualSet {
    pub fn project_in_place(&self, v: &mut [f64]) {
        match *self {
            DualSet::LinfBall { radius } => project_linf_ball_in_place(v, radius),
            DualSet::L2Ball { radius } => project_l2_ball_in_place(v, radius),
        }
    }

    pub fn project(&self, v: &[f64]) -> Vec<f64> {
        let mut out = v.to_vec();
        self.project_in_place(&mut out);
        out
    }
}

/// In-place form of [`dual_update`]: `y <- Proj_Y(y + s * fx)`.
pub fn dual_update_in_place(y: &mut [f64], fx: &[f64], s: f64, dual: &DualSet) -> Result<()> {
    check_len("dual_update Fx", y.len(), fx.len())?;
    for (yi, &f) in y.iter_mut().zip(fx) {
        *yi += s * f;
    }
    dual.project_in_place(y);
    Ok(())
}

/// Maximizer of `<y, Fx> - (1/(2s)) ||y - y_prev||^2` over `Y`.
///
/// Completing the square turns the objective into
/// `-(1/(2s)) ||y - (y_prev + s Fx)||^2 + const`, so the maximizer is the
/// projection of `y_prev + s Fx` onto `Y`.
pub fn dual_update(y_prev: &[f64], fx: &[f64], s: f64, dual: &DualSet) -> Result<Vec<f64>> {
    let mut y = y_prev.to_vec();
    dual_update_in_place(&mut y, fx, s, dual)?;
    Ok(y)
}

/// Value of the dual-step objective `<y, Fx> - (1/(2s)) ||y - y_prev||^2`.
pub fn dual_step_objective(y: &[f64], y_prev: &[f64], fx: &[f64], s: f64) -> f64 {
    linalg::dot(y, fx) - linalg::distance(y, y_prev).powi(2) / (2.0 * s)
}
