//! Backtracking reference governor.
//!
//! Each waypoint carries a pair of ball radii `(dx_alpha, dx_theta)` such
//! that any state with `(a - a_bar)^2 + a_dot^2 <= dx_alpha^2` and
//! `(th - th_bar)^2 + th_dot^2 <= dx_theta^2` converges to the waypoint
//! without the cable going slack. The plan is built offline from the final
//! reference backwards so that every waypoint's equilibrium lies inside the
//! ball of the waypoint before it; online, the supervisor switches to a
//! waypoint closer to the final reference as soon as the state enters its
//! ball.
//!
//! Waypoints are parameterized by `s` in `[0, 1]`: `s = 0` is the final
//! reference and `s = 1` the start. On a two-segment path the segment next
//! to the final reference covers `[0, 1/2]`.

use crate::analysis::{GainCertificate, RadialEnvelope};
use crate::control::GainConfig;
use crate::equilibria::{
    equilibrium_tension, interpolate_path, is_attainable_with_margin, Setpoint, DEFAULT_BOUNDARY_MARGIN,
};
use crate::plant::{FullState, PlantParams};
use crate::{Error, Result};

/// Default cap on the number of generated waypoints.
pub const MAX_WAYPOINTS: usize = 10_000;

/// Step halvings tried when a candidate waypoint fails its checks.
const MAX_REFINEMENTS: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Waypoint {
    pub sp: Setpoint,
    /// Path parameter, 0 at the final reference.
    pub s: f64,
    pub dx_alpha: f64,
    pub dx_theta: f64,
    /// Equilibrium tension [N].
    pub t_bar: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WaypointPlan {
    /// Index 0 is the final reference, the last entry the start.
    pub waypoints: Vec<Waypoint>,
    /// Radii at `T_bar = eps`, a floor for every waypoint.
    pub min_radii: (f64, f64),
}

impl WaypointPlan {
    pub fn len(&self) -> usize {
        self.waypoints.len()
    }

    pub fn is_empty(&self) -> bool {
        self.waypoints.is_empty()
    }

    pub fn start_index(&self) -> usize {
        self.waypoints.len().saturating_sub(1)
    }

    pub fn final_waypoint(&self) -> &Waypoint {
        &self.waypoints[0]
    }
}

/// Bound on `|x_theta|_inf` that keeps the cable taut, `T_bar / (T_bar + C)`
/// with `C = sqrt(2) m g + m lambda1` (or `m |u3|_inf` when configured).
pub fn theta_norm_limit(t_bar: f64, g: &GainConfig, p: &PlantParams) -> f64 {
    t_bar / (t_bar + tension_sensitivity(g, p))
}

fn tension_sensitivity(g: &GainConfig, p: &PlantParams) -> f64 {
    let radial = match g.u3_inf_norm {
        Some(u3) => p.m * u3,
        None => p.m * g.lambda1,
    };
    std::f64::consts::SQRT_2 * p.weight() + radial
}

/// Ball radii for a waypoint with equilibrium tension `t_bar`.
///
/// `|x_theta|_inf` is limited to `ball_split * T_bar / (T_bar + C)` (and
/// below `theta_tilde_max`), which leaves a positive `|x_alpha|_inf` limit.
/// Both limits are mapped back to initial-condition radii through the
/// small-gain trajectory bound.
pub fn radii_for_tension(
    t_bar: f64,
    g: &GainConfig,
    p: &PlantParams,
    cert: &GainCertificate,
    env: &RadialEnvelope,
) -> Result<(f64, f64)> {
    if !(t_bar > 0.0) {
        return Err(Error::InfeasibleBall(format!(
            "equilibrium tension {t_bar} is not positive"
        )));
    }
    let (gi, go) = (cert.gamma_in, cert.gamma_out);
    let k = 1.0 - gi * go;
    if !(k > 0.0) {
        return Err(Error::SmallGainViolated(gi * go));
    }
    let d = t_bar + tension_sensitivity(g, p);
    let l_theta = (g.ball_split * t_bar / d).min(0.999 * g.theta_tilde_max);
    let e = 2.0 * p.m * env.vel_bound + p.m * env.r_max * (g.k_pa + g.k_da);
    let l_alpha = (t_bar - d * l_theta) / (e * l_theta);
    if !(l_alpha > 0.0 && l_alpha.is_finite()) {
        return Err(Error::InfeasibleBall(format!(
            "x_theta limit {l_theta} leaves no room for x_alpha (limit {l_alpha})"
        )));
    }
    let dx_alpha = k * (0.5 * l_alpha).min(0.5 * l_theta / gi);
    let dx_theta = k * (0.5 * l_theta).min(0.5 * l_alpha / go);
    Ok((dx_alpha, dx_theta))
}

pub fn ball_radii(
    sp: &Setpoint,
    g: &GainConfig,
    p: &PlantParams,
    cert: &GainCertificate,
    env: &RadialEnvelope,
) -> Result<(f64, f64)> {
    let t_bar = equilibrium_tension(sp, p, Some(g.hover_tension))?;
    radii_for_tension(t_bar, g, p, cert, env)
}

/// Radii at `T_bar = eps`.
pub fn min_radii(g: &GainConfig, p: &PlantParams, cert: &GainCertificate, env: &RadialEnvelope) -> Result<(f64, f64)> {
    radii_for_tension(g.eps, g, p, cert, env)
}

/// Radial envelope for a manoeuvre from rest at `start` to `final`. The
/// reference moves monotonically, so the only excursion beyond the two
/// endpoints is an overshoot of at most `vel_bound / k_dr`.
pub fn maneuver_envelope(start: &Setpoint, fin: &Setpoint, g: &GainConfig) -> RadialEnvelope {
    let vel_bound = g.lambda1.max(g.lambda2) / g.k_dr;
    let pad = vel_bound / g.k_dr;
    let lo = start.r_bar.min(fin.r_bar);
    RadialEnvelope {
        r_min: (lo - pad).max(0.5 * lo),
        r_max: start.r_bar.max(fin.r_bar) + pad,
        r_star: fin.r_bar,
        tau_star: 0.0,
        vel_bound,
    }
}

/// Builds the waypoint chain from `fin` back to `start`.
pub fn backtrack_plan(
    start: &Setpoint,
    fin: &Setpoint,
    g: &GainConfig,
    p: &PlantParams,
    cert: &GainCertificate,
    env: &RadialEnvelope,
) -> Result<WaypointPlan> {
    backtrack_plan_capped(start, fin, g, p, cert, env, MAX_WAYPOINTS)
}

pub fn backtrack_plan_capped(
    start: &Setpoint,
    fin: &Setpoint,
    g: &GainConfig,
    p: &PlantParams,
    cert: &GainCertificate,
    env: &RadialEnvelope,
    cap: usize,
) -> Result<WaypointPlan> {
    let (da_min, dt_min) = min_radii(g, p, cert, env)?;
    let path = interpolate_path(start, fin, g.eps, p)?;
    let n_seg = path.segments.len();
    let make = |sp: Setpoint, s: f64| -> Result<Waypoint> {
        let t_bar = equilibrium_tension(&sp, p, Some(g.hover_tension))?;
        let (dx_alpha, dx_theta) = radii_for_tension(t_bar, g, p, cert, env)?;
        Ok(Waypoint {
            sp,
            s,
            dx_alpha,
            dx_theta,
            t_bar,
        })
    };
    let mut waypoints = vec![make(*fin, 0.0)?];
    if start == fin {
        return Ok(WaypointPlan {
            waypoints,
            min_radii: (da_min, dt_min),
        });
    }
    for (seg_from_end, (seg_start, seg_end)) in path.segments.iter().rev().enumerate() {
        let global = |local: f64| (seg_from_end as f64 + local) / n_seg as f64;
        let at = |local: f64| {
            if local >= 1.0 {
                *seg_start
            } else {
                seg_end.lerp(seg_start, local)
            }
        };
        let mut local = 0.0;
        while local < 1.0 {
            if waypoints.len() >= cap {
                return Err(Error::PlanDiverged(cap));
            }
            let cur = *waypoints.last().expect("non-empty");
            let rem_alpha = (cur.sp.alpha_bar - seg_start.alpha_bar).abs();
            let rem_theta = (cur.sp.theta_bar - seg_start.theta_bar).abs();
            let frac = |radius: f64, floor: f64, rem: f64| {
                if rem > 0.0 {
                    (radius - 0.5 * floor) / rem
                } else {
                    f64::INFINITY
                }
            };
            let mut phi = 1f64
                .min(frac(cur.dx_alpha, da_min, rem_alpha))
                .min(frac(cur.dx_theta, dt_min, rem_theta));
            let mut placed = None;
            for _ in 0..=MAX_REFINEMENTS {
                let cand_local = if phi >= 1.0 { 1.0 } else { local + phi * (1.0 - local) };
                let sp = at(cand_local);
                let inside = chain_link_ok(&cur, &sp);
                let attainable = cand_local >= 1.0 || is_attainable_with_margin(&sp, g.eps, DEFAULT_BOUNDARY_MARGIN, p);
                if inside && attainable {
                    if let Ok(wp) = make(sp, global(cand_local)) {
                        placed = Some((cand_local, wp));
                        break;
                    }
                }
                phi *= 0.5;
            }
            let Some((next_local, wp)) = placed else {
                return Err(Error::InfeasibleBall(format!(
                    "could not place a waypoint after s = {}",
                    global(local)
                )));
            };
            if !(next_local > local) {
                return Err(Error::PlanDiverged(waypoints.len()));
            }
            local = next_local;
            waypoints.push(wp);
        }
    }
    Ok(WaypointPlan {
        waypoints,
        min_radii: (da_min, dt_min),
    })
}

/// Offset between consecutive equilibria lies inside the predecessor's ball.
pub fn chain_link_ok(prev: &Waypoint, next: &Setpoint) -> bool {
    (next.alpha_bar - prev.sp.alpha_bar).abs() <= prev.dx_alpha
        && (next.theta_bar - prev.sp.theta_bar).abs() <= prev.dx_theta
}

/// Index of the first consecutive pair violating the chain condition.
pub fn verify_chain(plan: &WaypointPlan) -> std::result::Result<(), usize> {
    for (k, pair) in plan.waypoints.windows(2).enumerate() {
        if !chain_link_ok(&pair[0], &pair[1].sp) || !(pair[1].s > pair[0].s) {
            return Err(k);
        }
    }
    Ok(())
}

/// Switching test for the ball of `wp`.
pub fn switch_ready(state: &FullState, wp: &Waypoint) -> bool {
    let ea = state.alpha - wp.sp.alpha_bar;
    let et = state.theta - wp.sp.theta_bar;
    ea * ea + state.alpha_dot * state.alpha_dot <= wp.dx_alpha * wp.dx_alpha
        && et * et + state.theta_dot * state.theta_dot <= wp.dx_theta * wp.dx_theta
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Switch {
    pub t: f64,
    pub from: usize,
    pub to: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GovernorState {
    pub active_index: usize,
    pub switches: Vec<Switch>,
}

impl GovernorState {
    pub fn new(plan: &WaypointPlan) -> Self {
        GovernorState {
            active_index: plan.start_index(),
            switches: Vec::new(),
        }
    }

    pub fn switch_times(&self) -> Vec<f64> {
        self.switches.iter().map(|s| s.t).collect()
    }

    /// Moves to the waypoint closest to the final reference whose ball
    /// contains `state`. Returns whether the index changed.
    pub fn step(&mut self, state: &FullState, plan: &WaypointPlan, t: f64) -> bool {
        let active = self.active_index.min(plan.start_index());
        match (0..active).find(|&j| switch_ready(state, &plan.waypoints[j])) {
            Some(j) => {
                self.switches.push(Switch { t, from: active, to: j });
                self.active_index = j;
                true
            }
            None => false,
        }
    }
}

pub fn governor_step(state: &FullState, plan: &WaypointPlan, mut gs: GovernorState, t: f64) -> GovernorState {
    gs.step(state, plan, t);
    gs
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::{small_gain_certificate, GammaOutSource};
    use std::f64::consts::{FRAC_PI_2, PI};

    fn fixture() -> (GainConfig, PlantParams, GainCertificate, RadialEnvelope) {
        let g = GainConfig::default();
        let p = PlantParams::default();
        let cert = small_gain_certificate(&g, 6.0, GammaOutSource::Configured, 0.0, 0.0, 0.4).unwrap();
        let env = maneuver_envelope(
            &Setpoint::new(1.0, PI / 8.0, PI / 10.0).unwrap(),
            &Setpoint::new(0.5, 0.9 * PI, -PI / 20.0).unwrap(),
            &g,
        );
        (g, p, cert, env)
    }

    #[test]
    fn radii_monotone_and_floored() {
        let (g, p, cert, env) = fixture();
        let mut prev = (0.0, 0.0);
        for t in [g.eps, 2.0, 5.0, 20.0, 100.0, 1e4] {
            let r = radii_for_tension(t, &g, &p, &cert, &env).unwrap();
            assert!(r.0 >= prev.0 && r.1 >= prev.1);
            assert!(r.0 > 0.0 && r.1 > 0.0);
            prev = r;
        }
        assert!((theta_norm_limit(1e9, &g, &p) - 1.0).abs() < 1e-6);
    }

    #[test]
    fn radii_rejects_non_positive_tension() {
        let (g, p, cert, env) = fixture();
        assert!(matches!(
            radii_for_tension(0.0, &g, &p, &cert, &env),
            Err(Error::InfeasibleBall(_))
        ));
    }

    #[test]
    fn zero_length_path() {
        let (g, p, cert, env) = fixture();
        let sp = Setpoint::new(0.5, 0.9 * PI, -PI / 20.0).unwrap();
        let plan = backtrack_plan(&sp, &sp, &g, &p, &cert, &env).unwrap();
        assert_eq!(plan.len(), 1);
    }

    #[test]
    fn nearby_start_reaches_in_one_hop() {
        let (g, p, cert, env) = fixture();
        let fin = Setpoint::new(0.5, 0.9 * PI, -PI / 20.0).unwrap();
        let start = Setpoint::new(0.5, 0.9 * PI - 1e-4, -PI / 20.0).unwrap();
        let plan = backtrack_plan(&start, &fin, &g, &p, &cert, &env).unwrap();
        assert_eq!(plan.len(), 2);
        assert_eq!(plan.waypoints[1].sp, start);
    }

    #[test]
    fn reference_path_passes_through_vertical() {
        let (g, p, cert, env) = fixture();
        let start = Setpoint::new(1.0, PI / 8.0, PI / 10.0).unwrap();
        let fin = Setpoint::new(0.5, 0.9 * PI, -PI / 20.0).unwrap();
        let plan = backtrack_plan(&start, &fin, &g, &p, &cert, &env).unwrap();
        verify_chain(&plan).unwrap();
        assert!(plan
            .waypoints
            .iter()
            .any(|w| w.sp.alpha_bar == FRAC_PI_2 && w.sp.theta_bar == 0.0 && w.s == 0.5));
        assert_eq!(plan.waypoints.last().unwrap().sp, start);
        for w in &plan.waypoints {
            assert!(w.dx_alpha >= plan.min_radii.0 && w.dx_theta >= plan.min_radii.1);
        }
    }

    #[test]
    fn plan_cap() {
        let (g, p, cert, env) = fixture();
        let start = Setpoint::new(1.0, PI / 8.0, PI / 10.0).unwrap();
        let fin = Setpoint::new(0.5, 0.9 * PI, -PI / 20.0).unwrap();
        assert!(matches!(
            backtrack_plan_capped(&start, &fin, &g, &p, &cert, &env, 3),
            Err(Error::PlanDiverged(3))
        ));
    }

    #[test]
    fn switching() {
        let (g, p, cert, env) = fixture();
        let sp = Setpoint::new(0.5, 0.9 * PI, -PI / 20.0).unwrap();
        let (dx_alpha, dx_theta) = ball_radii(&sp, &g, &p, &cert, &env).unwrap();
        let wp = Waypoint {
            sp,
            s: 0.0,
            dx_alpha,
            dx_theta,
            t_bar: 1.0,
        };
        let at = FullState::at_rest(0.5, sp.alpha_bar, sp.theta_bar);
        assert!(switch_ready(&at, &wp));
        let fast = FullState {
            alpha_dot: 1.01 * dx_alpha,
            ..at
        };
        assert!(!switch_ready(&fast, &wp));
    }

    #[test]
    fn supervisor_jumps_and_stays() {
        let (g, p, cert, env) = fixture();
        let start = Setpoint::new(0.5, 0.8 * PI, -PI / 40.0).unwrap();
        let fin = Setpoint::new(0.5, 0.9 * PI, -PI / 20.0).unwrap();
        let plan = backtrack_plan(&start, &fin, &g, &p, &cert, &env).unwrap();
        assert!(plan.len() > 2);
        let mut gs = GovernorState::new(&plan);
        let swinging = FullState {
            alpha_dot: 1.0,
            ..FullState::at_rest(0.5, start.alpha_bar, start.theta_bar)
        };
        assert!(!gs.step(&swinging, &plan, 0.0));
        assert_eq!(gs.active_index, plan.start_index());
        let at_final = FullState::at_rest(0.5, fin.alpha_bar, fin.theta_bar);
        let gs = governor_step(&at_final, &plan, gs, 1.0);
        assert_eq!(gs.active_index, 0);
        assert_eq!(gs.switch_times(), vec![1.0]);
    }
}
