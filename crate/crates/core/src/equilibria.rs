//! Attainable hover equilibria and paths between them.
//!
//! A setpoint `(r_bar, alpha_bar, theta_bar)` is attainable with margin `eps`
//! when it can be held at rest with cable tension strictly above `eps`. For
//! `alpha_bar != pi/2` the admissible pitch lies in an open interval bounded
//! by `pi/2 - alpha_bar` and the limit angle [`theta_limit`]; straight above
//! the anchor only `theta_bar = 0` is admissible and the tension is a free
//! design parameter (the configured hover tension).

use std::f64::consts::{FRAC_PI_2, PI};

use rand::Rng;

use crate::plant::{ControlInputs, PlantParams};
use crate::{Error, Result};

/// Elevations within this distance of `pi/2` are treated as vertical.
pub const VERTICAL_TOL: f64 = 1e-12;

/// Boundary guard used by the governor when placing waypoints [rad].
pub const DEFAULT_BOUNDARY_MARGIN: f64 = 1e-9;

/// Interior samples per segment when certifying a [`PathSpec`].
pub const PATH_SAMPLES: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Setpoint {
    pub r_bar: f64,
    pub alpha_bar: f64,
    pub theta_bar: f64,
}

impl Setpoint {
    pub fn new(r_bar: f64, alpha_bar: f64, theta_bar: f64) -> Result<Self> {
        if !(r_bar > 0.0) {
            return Err(Error::NonPositiveRadius(r_bar));
        }
        if !(0.0..=PI).contains(&alpha_bar) {
            return Err(Error::invalid(format!(
                "alpha_bar must lie in [0, pi], got {alpha_bar}"
            )));
        }
        if is_vertical(alpha_bar) && theta_bar.abs() > VERTICAL_TOL {
            return Err(Error::invalid("a vertical setpoint requires theta_bar = 0"));
        }
        Ok(Setpoint {
            r_bar,
            alpha_bar,
            theta_bar,
        })
    }

    /// `self + s (other - self)`, componentwise.
    pub fn lerp(&self, other: &Setpoint, s: f64) -> Setpoint {
        Setpoint {
            r_bar: self.r_bar + s * (other.r_bar - self.r_bar),
            alpha_bar: self.alpha_bar + s * (other.alpha_bar - self.alpha_bar),
            theta_bar: self.theta_bar + s * (other.theta_bar - self.theta_bar),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EquilibriumData {
    pub t_bar: f64,
    pub u1_bar: f64,
}

/// Piecewise-linear chain of at most two segments. Each segment is walked
/// from its first to its second setpoint.
#[derive(Debug, Clone, PartialEq)]
pub struct PathSpec {
    pub segments: Vec<(Setpoint, Setpoint)>,
}

impl PathSpec {
    pub fn start(&self) -> Setpoint {
        self.segments[0].0
    }

    pub fn end(&self) -> Setpoint {
        self.segments[self.segments.len() - 1].1
    }
}

#[inline]
pub fn is_vertical(alpha: f64) -> bool {
    (alpha - FRAC_PI_2).abs() <= VERTICAL_TOL
}

/// Limit pitch angle `atan(eps / (m g cos a) + tan a) - a`, on the branch of
/// the arctangent that makes it vanish for `eps = 0`.
pub fn theta_limit(alpha_bar: f64, eps: f64, p: &PlantParams) -> Result<f64> {
    if !(0.0..=PI).contains(&alpha_bar) {
        return Err(Error::invalid(format!(
            "alpha_bar must lie in [0, pi], got {alpha_bar}"
        )));
    }
    if !(eps >= 0.0) {
        return Err(Error::invalid(format!("eps must be >= 0, got {eps}")));
    }
    if is_vertical(alpha_bar) {
        return Err(Error::VerticalElevation("the limit angle is singular"));
    }
    let x = eps / (p.weight() * alpha_bar.cos()) + alpha_bar.tan();
    let base = x.atan() - alpha_bar;
    // For alpha > pi/2 the sum alpha + theta lives in (pi/2, 3pi/2).
    Ok(if alpha_bar > FRAC_PI_2 { base + PI } else { base })
}

/// Open interval of admissible pitch at elevation `alpha_bar`, or `(0, 0)`
/// for the vertical singleton.
pub fn theta_interval(alpha_bar: f64, eps: f64, p: &PlantParams) -> Result<(f64, f64)> {
    if is_vertical(alpha_bar) {
        return Ok((0.0, 0.0));
    }
    let lim = theta_limit(alpha_bar, eps, p)?;
    Ok(if alpha_bar < FRAC_PI_2 {
        (lim, FRAC_PI_2 - alpha_bar)
    } else {
        (FRAC_PI_2 - alpha_bar, lim)
    })
}

/// Membership in the attainable set with strict inequalities.
pub fn is_attainable(sp: &Setpoint, eps: f64, p: &PlantParams) -> bool {
    is_attainable_with_margin(sp, eps, 0.0, p)
}

/// Membership with the open interval shrunk by `margin` on both sides.
pub fn is_attainable_with_margin(sp: &Setpoint, eps: f64, margin: f64, p: &PlantParams) -> bool {
    if !(sp.r_bar > 0.0) || !(0.0..=PI).contains(&sp.alpha_bar) || !sp.theta_bar.is_finite() {
        return false;
    }
    if is_vertical(sp.alpha_bar) {
        return sp.theta_bar.abs() <= VERTICAL_TOL;
    }
    match theta_interval(sp.alpha_bar, eps, p) {
        Ok((lo, hi)) => sp.theta_bar > lo + margin && sp.theta_bar < hi - margin,
        Err(_) => false,
    }
}

/// Equilibrium cable tension. Vertical setpoints take `hover_tension`.
pub fn equilibrium_tension(sp: &Setpoint, p: &PlantParams, hover_tension: Option<f64>) -> Result<f64> {
    if is_vertical(sp.alpha_bar) {
        return hover_tension.ok_or(Error::VerticalElevation(
            "equilibrium tension is free; configure a hover tension",
        ));
    }
    let a = sp.alpha_bar;
    Ok(p.weight() * ((a + sp.theta_bar).tan() * a.cos() - a.sin()))
}

/// Inputs holding `sp` at rest: thrust balancing weight and tension, zero
/// body torque, and a winch torque cancelling the tension.
pub fn equilibrium_inputs(sp: &Setpoint, p: &PlantParams, hover_tension: Option<f64>) -> Result<ControlInputs> {
    let eq = equilibrium(sp, p, hover_tension)?;
    Ok(ControlInputs {
        u1: eq.u1_bar,
        u2: 0.0,
        u3: -p.rho * eq.t_bar,
    })
}

pub fn equilibrium(sp: &Setpoint, p: &PlantParams, hover_tension: Option<f64>) -> Result<EquilibriumData> {
    let t_bar = equilibrium_tension(sp, p, hover_tension)?;
    if is_vertical(sp.alpha_bar) {
        return Ok(EquilibriumData {
            t_bar,
            u1_bar: t_bar + p.weight(),
        });
    }
    let phi = sp.alpha_bar + sp.theta_bar;
    let c = phi.cos();
    if c.abs() < 1e-12 {
        return Err(Error::ThrustUndefined(phi));
    }
    Ok(EquilibriumData {
        t_bar,
        u1_bar: p.weight() * sp.alpha_bar.cos() / c,
    })
}

/// Straight segment when both elevations lie on the same side of vertical,
/// otherwise two segments through `((r_from + r_to) / 2, pi/2, 0)`. Interior
/// points are sampled and certified.
pub fn interpolate_path(from: &Setpoint, to: &Setpoint, eps: f64, p: &PlantParams) -> Result<PathSpec> {
    for sp in [from, to] {
        if !is_attainable(sp, eps, p) {
            return Err(not_attainable(sp, eps));
        }
    }
    let same_side = (from.alpha_bar <= FRAC_PI_2 && to.alpha_bar <= FRAC_PI_2)
        || (from.alpha_bar >= FRAC_PI_2 && to.alpha_bar >= FRAC_PI_2);
    let segments = if same_side {
        vec![(*from, *to)]
    } else {
        let mid = Setpoint {
            r_bar: 0.5 * (from.r_bar + to.r_bar),
            alpha_bar: FRAC_PI_2,
            theta_bar: 0.0,
        };
        vec![(*from, mid), (mid, *to)]
    };
    for (a, b) in &segments {
        for i in 1..=PATH_SAMPLES {
            let s = i as f64 / (PATH_SAMPLES + 1) as f64;
            let q = a.lerp(b, s);
            if !is_attainable(&q, eps, p) {
                return Err(not_attainable(&q, eps));
            }
        }
    }
    Ok(PathSpec { segments })
}

pub(crate) fn not_attainable(sp: &Setpoint, eps: f64) -> Error {
    Error::NotAttainable {
        r: sp.r_bar,
        alpha: sp.alpha_bar,
        theta: sp.theta_bar,
        eps,
    }
}

/// Draws an attainable setpoint. The elevation is uniform on `[0, pi]`
/// (re-drawn within `1e-3` of vertical) and the pitch sits at a uniform
/// fraction in `interior` of the admissible interval.
pub fn sample_attainable<R: Rng + ?Sized>(
    rng: &mut R,
    eps: f64,
    p: &PlantParams,
    r_range: (f64, f64),
    interior: (f64, f64),
) -> Setpoint {
    loop {
        let alpha = rng.gen_range(0.0..=PI);
        if (alpha - FRAC_PI_2).abs() < 1e-3 {
            continue;
        }
        let Ok((lo, hi)) = theta_interval(alpha, eps, p) else {
            continue;
        };
        let frac = rng.gen_range(interior.0..=interior.1);
        let sp = Setpoint {
            r_bar: rng.gen_range(r_range.0..=r_range.1),
            alpha_bar: alpha,
            theta_bar: lo + frac * (hi - lo),
        };
        if is_attainable(&sp, eps, p) {
            return sp;
        }
    }
}
