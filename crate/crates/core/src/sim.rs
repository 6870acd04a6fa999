//! Fixed-step RK4 integration of the closed loop with event detection.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use crate::analysis::RadialEnvelope;
use crate::control::{closed_loop_rhs, ClosedLoopEval, GainConfig};
use crate::equilibria::Setpoint;
use crate::governor::{GovernorState, Switch, WaypointPlan};
use crate::plant::{FullState, PlantParams};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum ScenarioMode {
    /// Attitude imposed instantaneously, `theta = theta_c`.
    IdealAttitude,
    /// PD inner loop tracking `theta_c`, reference applied directly.
    #[default]
    InnerNoRg,
    /// PD inner loop with the reference issued by the governor.
    InnerWithRg,
}

impl ScenarioMode {
    pub const ALL: [ScenarioMode; 3] = [
        ScenarioMode::IdealAttitude,
        ScenarioMode::InnerNoRg,
        ScenarioMode::InnerWithRg,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            ScenarioMode::IdealAttitude => "ideal-attitude",
            ScenarioMode::InnerNoRg => "inner-no-rg",
            ScenarioMode::InnerWithRg => "inner-with-rg",
        }
    }
}

impl fmt::Display for ScenarioMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ScenarioMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ScenarioMode::ALL.into_iter().find(|m| m.as_str() == s).ok_or_else(|| {
            Error::validation(
                "mode",
                format!("expected one of ideal-attitude, inner-no-rg, inner-with-rg; got `{s}`"),
            )
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimConfig {
    pub dt: f64,
    pub t_final: f64,
    pub mode: ScenarioMode,
    pub initial: FullState,
    /// Final reference.
    pub reference: Setpoint,
    /// Threshold on the six-state error norm.
    pub convergence_tol: f64,
    /// Time the error must stay below the threshold [s].
    pub convergence_dwell: f64,
    /// A tension at or below this value is a violation [N].
    pub tension_floor: f64,
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::validation("dt", format!("must be > 0, got {}", self.dt)));
        }
        if !(self.t_final > self.dt && self.t_final.is_finite()) {
            return Err(Error::validation(
                "t_final",
                format!("must exceed dt, got {}", self.t_final),
            ));
        }
        if !(self.convergence_tol > 0.0) {
            return Err(Error::validation("convergence_tol", "must be > 0"));
        }
        if !(self.convergence_dwell >= 0.0) {
            return Err(Error::validation("convergence_dwell", "must be >= 0"));
        }
        if !self.tension_floor.is_finite() {
            return Err(Error::validation("tension_floor", "must be finite"));
        }
        self.initial.initialized()?;
        Ok(())
    }

    pub fn steps(&self) -> usize {
        (self.t_final / self.dt).round() as usize
    }
}

impl Default for SimConfig {
    /// The reference manoeuvre: from rest at `(1, pi/8, pi/10)` to
    /// `(0.5, 9 pi/10, -pi/20)`.
    fn default() -> Self {
        SimConfig {
            dt: 1e-3,
            t_final: 10.0,
            mode: ScenarioMode::InnerNoRg,
            initial: FullState::at_rest(1.0, PI / 8.0, PI / 10.0),
            reference: Setpoint {
                r_bar: 0.5,
                alpha_bar: 0.9 * PI,
                theta_bar: -PI / 20.0,
            },
            convergence_tol: 1e-3,
            convergence_dwell: 0.5,
            tension_floor: 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogRow {
    pub t: f64,
    pub state: FullState,
    pub u1: f64,
    pub u2: f64,
    pub u3: f64,
    pub tension: f64,
    pub theta_c: f64,
    /// Active waypoint, -1 without governor.
    pub waypoint: i64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Events {
    pub tension_violation: Option<f64>,
    pub switches: Vec<Switch>,
    pub convergence: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrajectoryLog {
    pub rows: Vec<LogRow>,
    pub events: Events,
}

impl TrajectoryLog {
    pub fn min_tension(&self) -> f64 {
        self.rows.iter().map(|r| r.tension).fold(f64::INFINITY, f64::min)
    }

    pub fn max_tension(&self) -> f64 {
        self.rows.iter().map(|r| r.tension).fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn last(&self) -> Option<&LogRow> {
        self.rows.last()
    }
}

/// Classical RK4 step for `x' = f(t, x)`. Fails on non-finite results.
pub fn rk4_step<const N: usize, F>(x: &[f64; N], t: f64, dt: f64, mut f: F) -> Result<[f64; N]>
where
    F: FnMut(f64, &[f64; N]) -> Result<[f64; N]>,
{
    let axpy = |a: f64, d: &[f64; N]| -> [f64; N] { std::array::from_fn(|i| x[i] + a * d[i]) };
    let k1 = f(t, x)?;
    let k2 = f(t + 0.5 * dt, &axpy(0.5 * dt, &k1))?;
    let k3 = f(t + 0.5 * dt, &axpy(0.5 * dt, &k2))?;
    let k4 = f(t + dt, &axpy(dt, &k3))?;
    let out: [f64; N] = std::array::from_fn(|i| x[i] + dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]));
    if out.iter().all(|v| v.is_finite()) {
        Ok(out)
    } else {
        Err(Error::Divergence(t + dt))
    }
}

/// Euclidean norm of the six-state error to `sp`.
pub fn error_norm(state: &FullState, sp: &Setpoint) -> f64 {
    let e = [
        state.r - sp.r_bar,
        state.r_dot,
        state.alpha - sp.alpha_bar,
        state.alpha_dot,
        state.theta - sp.theta_bar,
        state.theta_dot,
    ];
    e.iter().map(|v| v * v).sum::<f64>().sqrt()
}

fn eval(
    state: &FullState,
    sp: &Setpoint,
    g: &GainConfig,
    p: &PlantParams,
    mode: ScenarioMode,
) -> Result<ClosedLoopEval> {
    closed_loop_rhs(state, sp, g, p, mode)
}

/// Integrates one scenario and records every step.
///
/// Tension violations are events, not errors: the run continues to
/// `t_final`.
pub fn run_scenario(
    cfg: &SimConfig,
    g: &GainConfig,
    p: &PlantParams,
    plan: Option<&WaypointPlan>,
) -> Result<TrajectoryLog> {
    cfg.validate()?;
    let v_max = g.lambda1 / g.k_dr;
    if cfg.initial.r_dot.abs() > v_max {
        return Err(Error::invalid(format!(
            "initial radial speed {} exceeds lambda1/k_dr = {v_max}",
            cfg.initial.r_dot
        )));
    }
    let mode = cfg.mode;
    let mut governor = match (mode, plan) {
        (ScenarioMode::InnerWithRg, Some(plan)) if !plan.is_empty() => Some((plan, GovernorState::new(plan))),
        (ScenarioMode::InnerWithRg, _) => {
            return Err(Error::invalid("inner-with-rg mode requires a non-empty waypoint plan"))
        }
        _ => None,
    };
    let ideal = mode == ScenarioMode::IdealAttitude;
    let mut state = cfg.initial.initialized()?;
    let steps = cfg.steps();
    let mut log = TrajectoryLog {
        rows: Vec::with_capacity(steps + 1),
        events: Events::default(),
    };
    let mut prev_tension: Option<f64> = None;
    let mut inside_since: Option<f64> = None;

    for k in 0..=steps {
        let t = k as f64 * cfg.dt;
        let (sp, waypoint) = match governor.as_mut() {
            Some((plan, gs)) => {
                gs.step(&state, plan, t);
                (plan.waypoints[gs.active_index].sp, gs.active_index as i64)
            }
            None => (cfg.reference, -1),
        };
        let ev = eval(&state, &sp, g, p, mode)?;
        if ideal {
            state.theta = ev.theta_c;
            state.theta_dot = ev.theta_c_dot;
        }
        log.rows.push(LogRow {
            t,
            state,
            u1: ev.inputs.u1,
            u2: ev.inputs.u2,
            u3: ev.inputs.u3,
            tension: ev.tension,
            theta_c: ev.theta_c,
            waypoint,
        });

        if log.events.tension_violation.is_none() && ev.tension <= cfg.tension_floor {
            let tv = match prev_tension {
                Some(tp) if tp > cfg.tension_floor => {
                    let frac = (tp - cfg.tension_floor) / (tp - ev.tension);
                    t - cfg.dt + frac * cfg.dt
                }
                _ => t,
            };
            log.events.tension_violation = Some(tv);
        }
        prev_tension = Some(ev.tension);

        if error_norm(&state, &cfg.reference) < cfg.convergence_tol {
            let since = *inside_since.get_or_insert(t);
            if log.events.convergence.is_none() && t - since >= cfg.convergence_dwell - 1e-9 {
                log.events.convergence = Some(since);
            }
        } else {
            inside_since = None;
            log.events.convergence = None;
        }

        if k == steps {
            break;
        }
        state = if ideal {
            let x = [state.r, state.r_dot, state.alpha, state.alpha_dot];
            let y = rk4_step(&x, t, cfg.dt, |_, y| {
                let s = FullState {
                    r: y[0],
                    r_dot: y[1],
                    alpha: y[2],
                    alpha_dot: y[3],
                    ..state
                };
                let d = eval(&s, &sp, g, p, mode)?.deriv;
                Ok([d.r_dot, d.r_ddot, d.alpha_dot, d.alpha_ddot])
            })?;
            FullState {
                r: y[0],
                r_dot: y[1],
                alpha: y[2],
                alpha_dot: y[3],
                ..state
            }
        } else {
            FullState::from_array(rk4_step(&state.to_array(), t, cfg.dt, |_, y| {
                Ok(eval(&FullState::from_array(*y), &sp, g, p, mode)?.deriv.to_array())
            })?)
        };
    }
    if let Some((_, gs)) = governor {
        log.events.switches = gs.switches;
    }
    Ok(log)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    /// Time of the first failing sample.
    pub first_failure: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MonitorReport {
    pub checks: Vec<Check>,
}

impl MonitorReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn get(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }
}

/// Post-run assertions: positive tension, radial envelope, bounded radial
/// acceleration and convergence. The radial acceleration is recovered from
/// the logged winch torque and tension.
pub fn monitor_invariants(log: &TrajectoryLog, g: &GainConfig, env: &RadialEnvelope, p: &PlantParams) -> MonitorReport {
    let first = |pred: &dyn Fn(&LogRow) -> bool| log.rows.iter().find(|r| !pred(r)).map(|r| r.t);
    let tension = log.events.tension_violation.or_else(|| first(&|r| r.tension > 0.0));
    let envelope = first(&|r| env.contains(r.state.r, 1e-6));
    let speed = first(&|r| r.state.r_dot.abs() <= env.vel_bound + 1e-9);
    let accel = first(&|r| {
        let r_ddot = p.rho / p.i_winch * r.u3 + p.rho * p.rho / p.i_winch * r.tension;
        r_ddot.abs() <= g.lambda1 * (1.0 + 1e-9) + 1e-12
    });
    let mk = |name, failure: Option<f64>| Check {
        name,
        passed: failure.is_none(),
        first_failure: failure,
    };
    MonitorReport {
        checks: vec![
            mk("tension_positive", tension),
            mk("radial_envelope", envelope),
            mk("radial_speed", speed),
            mk("radial_accel", accel),
            Check {
                name: "convergence",
                passed: log.events.convergence.is_some(),
                first_failure: None,
            },
        ],
    }
}
