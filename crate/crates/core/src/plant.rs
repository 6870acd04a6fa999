//! Taut-cable dynamics of the planar tethered UAV.
//!
//! Coordinates are polar about the ground anchor: `r` is the cable length
//! (equal to the UAV radius while taut), `alpha` the elevation from the
//! horizontal and `theta` the pitch relative to the horizon. All angles are
//! radians.

use std::f64::consts::PI;

use crate::{Error, Result};

/// Physical constants of the vehicle and winch.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlantParams {
    /// UAV mass [kg].
    pub m: f64,
    /// UAV pitch moment of inertia [kg m^2].
    pub j_uav: f64,
    /// Winch moment of inertia [kg m^2].
    pub i_winch: f64,
    /// Winch radius [m].
    pub rho: f64,
    /// Gravity [m/s^2].
    pub g: f64,
}

impl PlantParams {
    pub fn new(m: f64, j_uav: f64, i_winch: f64, rho: f64, g: f64) -> Result<Self> {
        let p = PlantParams {
            m,
            j_uav,
            i_winch,
            rho,
            g,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        for (key, v) in [
            ("m", self.m),
            ("j_uav", self.j_uav),
            ("i_winch", self.i_winch),
            ("rho", self.rho),
            ("g", self.g),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::validation(key, format!("must be finite and > 0, got {v}")));
            }
        }
        Ok(())
    }

    /// Weight `m g` [N].
    #[inline]
    pub fn weight(&self) -> f64 {
        self.m * self.g
    }
}

impl Default for PlantParams {
    /// The 2 kg vehicle on a 0.1 m winch used for the reference experiments.
    /// The winch inertia is not part of that setup; it cancels from the
    /// closed loop and only scales `u3`.
    fn default() -> Self {
        PlantParams {
            m: 2.0,
            j_uav: 0.015,
            i_winch: 0.01,
            rho: 0.1,
            g: 9.81,
        }
    }
}

/// Six-dimensional state `(r, r_dot, alpha, alpha_dot, theta, theta_dot)`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct FullState {
    pub r: f64,
    pub r_dot: f64,
    pub alpha: f64,
    pub alpha_dot: f64,
    pub theta: f64,
    pub theta_dot: f64,
}

impl FullState {
    /// Configuration with all rates zero.
    pub fn at_rest(r: f64, alpha: f64, theta: f64) -> Self {
        FullState {
            r,
            alpha,
            theta,
            ..Default::default()
        }
    }

    /// Checks the initialization invariants and wraps `theta` into `(-pi, pi]`.
    pub fn initialized(mut self) -> Result<Self> {
        if !(self.r > 0.0) {
            return Err(Error::NonPositiveRadius(self.r));
        }
        if !(0.0..=PI).contains(&self.alpha) {
            return Err(Error::invalid(format!(
                "initial elevation must lie in [0, pi], got {}",
                self.alpha
            )));
        }
        if self.to_array().iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("initial state has non-finite entries"));
        }
        self.theta = wrap_angle(self.theta);
        Ok(self)
    }

    pub fn to_array(&self) -> [f64; 6] {
        [
            self.r,
            self.r_dot,
            self.alpha,
            self.alpha_dot,
            self.theta,
            self.theta_dot,
        ]
    }

    pub fn from_array(a: [f64; 6]) -> Self {
        FullState {
            r: a[0],
            r_dot: a[1],
            alpha: a[2],
            alpha_dot: a[3],
            theta: a[4],
            theta_dot: a[5],
        }
    }
}

/// Thrust, body torque and winch torque.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ControlInputs {
    /// Total thrust [N]; propellers cannot pull, so physically `u1 >= 0`.
    pub u1: f64,
    /// Body torque [N m].
    pub u2: f64,
    /// Winch torque [N m].
    pub u3: f64,
}

/// Time derivative of a [`FullState`].
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct StateDerivative {
    pub r_dot: f64,
    pub r_ddot: f64,
    pub alpha_dot: f64,
    pub alpha_ddot: f64,
    pub theta_dot: f64,
    pub theta_ddot: f64,
}

impl StateDerivative {
    pub fn to_array(&self) -> [f64; 6] {
        [
            self.r_dot,
            self.r_ddot,
            self.alpha_dot,
            self.alpha_ddot,
            self.theta_dot,
            self.theta_ddot,
        ]
    }

    pub fn max_abs(&self) -> f64 {
        self.to_array().iter().fold(0.0, |acc, v| acc.max(v.abs()))
    }
}

/// Wraps an angle into `(-pi, pi]`.
pub fn wrap_angle(x: f64) -> f64 {
    if x > -PI && x <= PI {
        return x;
    }
    let mut y = x.rem_euclid(2.0 * PI);
    if y > PI {
        y -= 2.0 * PI;
    }
    y
}

/// Cable tension `m r alpha_dot^2 - m g sin(alpha) + u1 sin(alpha + theta) - m r_ddot`.
///
/// The value is signed: a non-positive result means the cable would go slack.
#[inline]
pub fn tension(state: &FullState, u1: f64, r_ddot: f64, p: &PlantParams) -> f64 {
    p.m * state.r * state.alpha_dot * state.alpha_dot - p.m * p.g * state.alpha.sin()
        + u1 * (state.alpha + state.theta).sin()
        - p.m * r_ddot
}

/// Right-hand side of the taut-cable model for a given tension value.
pub fn taut_rhs(state: &FullState, u: &ControlInputs, tension_value: f64, p: &PlantParams) -> Result<StateDerivative> {
    if !(state.r > 0.0) {
        return Err(Error::NonPositiveRadius(state.r));
    }
    let r = state.r;
    let r_ddot = p.rho / p.i_winch * u.u3 + p.rho * p.rho / p.i_winch * tension_value;
    let alpha_ddot = -(2.0 * state.r_dot * state.alpha_dot + p.g * state.alpha.cos()) / r
        + u.u1 * (state.alpha + state.theta).cos() / (p.m * r);
    Ok(StateDerivative {
        r_dot: state.r_dot,
        r_ddot,
        alpha_dot: state.alpha_dot,
        alpha_ddot,
        theta_dot: state.theta_dot,
        theta_ddot: u.u2 / p.j_uav,
    })
}

/// Solves the linear coupling between the winch equation and the tension
/// definition for open-loop inputs. Returns `(r_ddot, T)`.
pub fn coupled_radial(state: &FullState, u: &ControlInputs, p: &PlantParams) -> (f64, f64) {
    // T = a - m r_ddot, r_ddot = (rho u3 + rho^2 T) / I
    let a = tension(state, u.u1, 0.0, p);
    let r_ddot = (p.rho * u.u3 + p.rho * p.rho * a) / (p.i_winch + p.m * p.rho * p.rho);
    (r_ddot, a - p.m * r_ddot)
}

/// Open-loop vector field with the tension resolved algebraically.
pub fn open_loop_rhs(state: &FullState, u: &ControlInputs, p: &PlantParams) -> Result<(StateDerivative, f64)> {
    let (_, t) = coupled_radial(state, u, p);
    Ok((taut_rhs(state, u, t, p)?, t))
}

/// Kinetic plus potential energy with the winch spinning at `L_dot = r_dot`.
pub fn mechanical_energy(state: &FullState, p: &PlantParams) -> f64 {
    let winch = 0.5 * p.i_winch / (p.rho * p.rho) * state.r_dot * state.r_dot;
    let kinetic = 0.5 * p.m * state.r_dot * state.r_dot
        + 0.5 * p.m * state.r * state.r * state.alpha_dot * state.alpha_dot
        + 0.5 * p.j_uav * state.theta_dot * state.theta_dot;
    winch + kinetic + p.m * p.g * state.r * state.alpha.sin()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::FRAC_PI_2;

    fn p() -> PlantParams {
        PlantParams::default()
    }

    #[test]
    fn hover_balance_has_zero_tension() {
        let p = p();
        let s = FullState::at_rest(1.0, FRAC_PI_2, 0.0);
        assert_relative_eq!(tension(&s, p.weight(), 0.0, &p), 0.0, epsilon = 1e-12);
        assert_relative_eq!(tension(&s, p.weight() + 5.0, 0.0, &p), 5.0, epsilon = 1e-12);
    }

    #[test]
    fn centrifugal_term() {
        let p = PlantParams { m: 2.0, ..p() };
        let s = FullState {
            r: 1.0,
            alpha_dot: 1.0,
            ..Default::default()
        };
        assert_relative_eq!(tension(&s, 0.0, 0.0, &p), 2.0, epsilon = 1e-12);
    }

    #[test]
    fn unit_torque_gives_unit_pitch_acceleration() {
        let p = p();
        let s = FullState::at_rest(0.7, 1.0, 0.2);
        let u = ControlInputs {
            u1: 3.0,
            u2: p.j_uav,
            u3: -0.4,
        };
        let d = taut_rhs(&s, &u, 1.5, &p).unwrap();
        assert_relative_eq!(d.theta_ddot, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn pendulum_term() {
        let p = p();
        let s = FullState::at_rest(0.8, 0.0, 0.3);
        let d = taut_rhs(&s, &ControlInputs::default(), 0.0, &p).unwrap();
        assert_relative_eq!(d.alpha_ddot, -p.g / 0.8, epsilon = 1e-12);
    }

    #[test]
    fn rejects_non_positive_radius() {
        let s = FullState::at_rest(0.0, 1.0, 0.0);
        assert!(matches!(
            taut_rhs(&s, &ControlInputs::default(), 0.0, &p()),
            Err(Error::NonPositiveRadius(_))
        ));
    }

    #[test]
    fn coupled_solution_is_a_fixed_point() {
        let p = p();
        let s = FullState {
            r: 1.3,
            r_dot: -0.2,
            alpha: 0.9,
            alpha_dot: 0.4,
            theta: -0.3,
            theta_dot: 0.1,
        };
        let u = ControlInputs {
            u1: 25.0,
            u2: 0.01,
            u3: -0.7,
        };
        let (r_ddot, t) = coupled_radial(&s, &u, &p);
        let d = taut_rhs(&s, &u, t, &p).unwrap();
        assert!((d.r_ddot - r_ddot).abs() < 1e-12);
        assert!((tension(&s, u.u1, d.r_ddot, &p) - t).abs() < 1e-12);
    }

    #[test]
    fn wrap_angle_range() {
        assert_eq!(wrap_angle(PI), PI);
        assert_relative_eq!(wrap_angle(-PI), PI, epsilon = 1e-15);
        assert_relative_eq!(wrap_angle(3.0 * PI / 2.0), -FRAC_PI_2, epsilon = 1e-15);
        assert_relative_eq!(wrap_angle(0.25 + 4.0 * PI), 0.25, epsilon = 1e-12);
    }

    #[test]
    fn initialization_checks() {
        assert!(FullState::at_rest(-1.0, 0.5, 0.0).initialized().is_err());
        assert!(FullState::at_rest(1.0, 3.5, 0.0).initialized().is_err());
        let s = FullState::at_rest(1.0, 0.5, 7.0).initialized().unwrap();
        assert_relative_eq!(s.theta, 7.0 - 2.0 * PI, epsilon = 1e-12);
    }
}
