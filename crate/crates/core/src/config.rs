//! Flat `key = value` scenario files.
//!
//! Blank lines and `#` comments are ignored. Values are numbers or products
//! and quotients of numbers and `pi`, so `pi*9/10`, `-pi/20` and `0.25` are
//! all accepted. Missing keys fall back to the reference experiment; the
//! derivative gains default to their critically damped values.
//!
//! ```text
//! mode = inner-no-rg
//! alpha_bar = pi*9/10
//! theta_bar = -pi/20
//! ```

use std::collections::HashMap;
use std::f64::consts::PI;
use std::fmt::Write as _;

use crate::analysis::{
    estimate_gamma_out, radial_envelope, small_gain_certificate, GainCertificate, GammaOutOptions, GammaOutSource,
    RadialEnvelope,
};
use crate::control::GainConfig;
use crate::equilibria::{interpolate_path, is_attainable, Setpoint};
use crate::governor::{backtrack_plan, maneuver_envelope, WaypointPlan};
use crate::plant::{FullState, PlantParams};
use crate::sim::{ScenarioMode, SimConfig};
use crate::{Error, Result};

/// Everything a run needs.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioBundle {
    pub plant: PlantParams,
    pub gains: GainConfig,
    pub sim: SimConfig,
    /// Fixed outer gain; estimated when absent.
    pub gamma_out: Option<f64>,
    /// Multiplier on the estimated outer gain.
    pub gamma_out_safety: f64,
}

impl Default for ScenarioBundle {
    fn default() -> Self {
        ScenarioBundle {
            plant: PlantParams::default(),
            gains: GainConfig::default(),
            sim: SimConfig::default(),
            gamma_out: None,
            gamma_out_safety: 1.0,
        }
    }
}

impl ScenarioBundle {
    pub fn validate(&self) -> Result<()> {
        self.plant.validate()?;
        self.gains.validate()?;
        self.sim.validate()?;
        if let Some(go) = self.gamma_out {
            if !(go >= 0.0 && go.is_finite()) {
                return Err(Error::validation("gamma_out", format!("must be >= 0, got {go}")));
            }
        }
        if !(self.gamma_out_safety >= 1.0 && self.gamma_out_safety.is_finite()) {
            return Err(Error::validation(
                "gamma_out_safety",
                format!("must be >= 1, got {}", self.gamma_out_safety),
            ));
        }
        let r = &self.sim.reference;
        Setpoint::new(r.r_bar, r.alpha_bar, r.theta_bar).map_err(|e| Error::validation("reference", e.to_string()))?;
        if !is_attainable(r, self.gains.eps, &self.plant) {
            return Err(Error::validation(
                "reference",
                format!(
                    "(r_bar, alpha_bar, theta_bar) = ({}, {}, {}) is not attainable for eps = {}",
                    r.r_bar, r.alpha_bar, r.theta_bar, self.gains.eps
                ),
            ));
        }
        Ok(())
    }

    /// Start setpoint implied by the initial configuration.
    pub fn start_setpoint(&self) -> Setpoint {
        let s = &self.sim.initial;
        Setpoint {
            r_bar: s.r,
            alpha_bar: s.alpha,
            theta_bar: s.theta,
        }
    }
}

/// Path samples per segment for the outer-gain estimate.
const GAMMA_OUT_SAMPLES: usize = 8;

impl ScenarioBundle {
    /// Radial envelope the run is monitored against. With the governor the
    /// reference radius moves from the start to the final value.
    pub fn envelope(&self) -> Result<RadialEnvelope> {
        let s = &self.sim;
        if s.mode == ScenarioMode::InnerWithRg {
            Ok(maneuver_envelope(&self.start_setpoint(), &s.reference, &self.gains))
        } else {
            radial_envelope(s.initial.r, s.initial.r_dot, s.reference.r_bar, &self.gains)
        }
    }

    /// Configured outer gain, or an estimate over the path from the start
    /// configuration to the reference.
    pub fn outer_gain(&self) -> Result<(f64, GammaOutSource)> {
        if let Some(go) = self.gamma_out {
            return Ok((go, GammaOutSource::Configured));
        }
        let path = interpolate_path(&self.start_setpoint(), &self.sim.reference, self.gains.eps, &self.plant)?;
        let points: Vec<Setpoint> = path
            .segments
            .iter()
            .flat_map(|(a, b)| (0..=GAMMA_OUT_SAMPLES).map(move |i| a.lerp(b, i as f64 / GAMMA_OUT_SAMPLES as f64)))
            .collect();
        let opts = GammaOutOptions {
            safety_factor: self.gamma_out_safety,
            ..GammaOutOptions::default()
        };
        let est = estimate_gamma_out(&points, &self.gains, &self.plant, &opts)?;
        Ok((est.gamma_out, GammaOutSource::Estimated))
    }

    /// Certificate for a direct step from the initial state to the reference.
    pub fn certify(&self) -> Result<(GainCertificate, RadialEnvelope)> {
        let env = self.envelope()?;
        let (go, source) = self.outer_gain()?;
        let (s, r) = (&self.sim.initial, &self.sim.reference);
        let xa = (s.alpha - r.alpha_bar).hypot(s.alpha_dot);
        let xt = (s.theta - r.theta_bar).hypot(s.theta_dot);
        let cert = small_gain_certificate(&self.gains, go, source, xa, xt, env.r_min)?;
        Ok((cert, env))
    }

    /// Waypoint chain from the start configuration to the reference.
    pub fn plan(&self, cert: &GainCertificate) -> Result<WaypointPlan> {
        let env = maneuver_envelope(&self.start_setpoint(), &self.sim.reference, &self.gains);
        backtrack_plan(
            &self.start_setpoint(),
            &self.sim.reference,
            &self.gains,
            &self.plant,
            cert,
            &env,
        )
    }
}

const KEYS: &[&str] = &[
    "m",
    "j_uav",
    "i_winch",
    "rho",
    "g",
    "k_pr",
    "k_dr",
    "lambda1",
    "lambda2",
    "k_pa",
    "k_da",
    "k_pt",
    "k_dt",
    "zeta",
    "eps",
    "nu",
    "theta_tilde_max",
    "hover_tension",
    "u3_inf_norm",
    "ball_split",
    "dt",
    "t_final",
    "mode",
    "r0",
    "r_dot0",
    "alpha0",
    "alpha_dot0",
    "theta0",
    "theta_dot0",
    "r_bar",
    "alpha_bar",
    "theta_bar",
    "convergence_tol",
    "convergence_dwell",
    "tension_floor",
    "gamma_out",
    "gamma_out_safety",
];

/// Evaluates `[-]factor ((*|/) factor)*` where a factor is a number or `pi`.
pub fn parse_value(text: &str) -> std::result::Result<f64, String> {
    let t = text.trim();
    let (sign, body) = match t.strip_prefix('-') {
        Some(rest) => (-1.0, rest),
        None => (1.0, t.strip_prefix('+').unwrap_or(t)),
    };
    if body.is_empty() {
        return Err(format!("empty value `{text}`"));
    }
    let factor = |f: &str| -> std::result::Result<f64, String> {
        let f = f.trim();
        if f.eq_ignore_ascii_case("pi") {
            Ok(PI)
        } else {
            f.parse::<f64>()
                .map_err(|_| format!("cannot read `{f}` as a number or `pi`"))
        }
    };
    let mut acc = 1.0;
    let mut op = '*';
    let mut start = 0;
    for (i, c) in body.char_indices().chain(std::iter::once((body.len(), '*'))) {
        if c == '*' || c == '/' {
            let v = factor(&body[start..i])?;
            acc = if op == '*' { acc * v } else { acc / v };
            op = c;
            start = i + 1;
        }
    }
    let v = sign * acc;
    if v.is_finite() {
        Ok(v)
    } else {
        Err(format!("value `{text}` is not finite"))
    }
}

/// Parses and validates a scenario document.
pub fn parse_config(text: &str) -> Result<ScenarioBundle> {
    let mut seen: HashMap<&str, (usize, &str)> = HashMap::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let Some((key, value)) = content.split_once('=') else {
            return Err(Error::Parse {
                line,
                msg: format!("expected `key = value`, got `{content}`"),
            });
        };
        let (key, value) = (key.trim(), value.trim());
        let Some(&known) = KEYS.iter().find(|k| **k == key) else {
            return Err(Error::Parse {
                line,
                msg: format!("unknown key `{key}`"),
            });
        };
        if value.is_empty() {
            return Err(Error::Parse {
                line,
                msg: format!("missing value for `{key}`"),
            });
        }
        if let Some((prev, _)) = seen.insert(known, (line, value)) {
            return Err(Error::Parse {
                line,
                msg: format!("duplicate key `{key}` (first set on line {prev})"),
            });
        }
    }

    let num = |key: &str| -> Result<Option<f64>> {
        match seen.get(key) {
            None => Ok(None),
            Some(&(line, v)) => parse_value(v).map(Some).map_err(|msg| Error::Parse { line, msg }),
        }
    };
    let d = ScenarioBundle::default();
    let or = |key: &str, default: f64| -> Result<f64> { Ok(num(key)?.unwrap_or(default)) };

    let plant = PlantParams {
        m: or("m", d.plant.m)?,
        j_uav: or("j_uav", d.plant.j_uav)?,
        i_winch: or("i_winch", d.plant.i_winch)?,
        rho: or("rho", d.plant.rho)?,
        g: or("g", d.plant.g)?,
    };
    let zeta = or("zeta", d.gains.zeta)?;
    let k_pr = or("k_pr", d.gains.k_pr)?;
    let k_pa = or("k_pa", d.gains.k_pa)?;
    let k_pt = or("k_pt", d.gains.k_pt)?;
    let eps = or("eps", d.gains.eps)?;
    let gains = GainConfig {
        k_pr,
        k_dr: or("k_dr", 2.0 * k_pr.max(0.0).sqrt())?,
        lambda1: or("lambda1", d.gains.lambda1)?,
        lambda2: or("lambda2", d.gains.lambda2)?,
        k_pa,
        k_da: or("k_da", 2.0 * zeta * k_pa.max(0.0).sqrt())?,
        k_pt,
        k_dt: or("k_dt", 2.0 * zeta * k_pt.max(0.0).sqrt())?,
        zeta,
        eps,
        nu: or("nu", d.gains.nu)?,
        theta_tilde_max: or("theta_tilde_max", d.gains.theta_tilde_max)?,
        hover_tension: or("hover_tension", GainConfig::default_hover_tension(eps))?,
        u3_inf_norm: num("u3_inf_norm")?,
        ball_split: or("ball_split", d.gains.ball_split)?,
    };
    let mode = match seen.get("mode") {
        None => d.sim.mode,
        Some(&(_, v)) => v.parse::<ScenarioMode>()?,
    };
    let sim = SimConfig {
        dt: or("dt", d.sim.dt)?,
        t_final: or("t_final", d.sim.t_final)?,
        mode,
        initial: FullState {
            r: or("r0", d.sim.initial.r)?,
            r_dot: or("r_dot0", d.sim.initial.r_dot)?,
            alpha: or("alpha0", d.sim.initial.alpha)?,
            alpha_dot: or("alpha_dot0", d.sim.initial.alpha_dot)?,
            theta: or("theta0", d.sim.initial.theta)?,
            theta_dot: or("theta_dot0", d.sim.initial.theta_dot)?,
        },
        reference: Setpoint {
            r_bar: or("r_bar", d.sim.reference.r_bar)?,
            alpha_bar: or("alpha_bar", d.sim.reference.alpha_bar)?,
            theta_bar: or("theta_bar", d.sim.reference.theta_bar)?,
        },
        convergence_tol: or("convergence_tol", d.sim.convergence_tol)?,
        convergence_dwell: or("convergence_dwell", d.sim.convergence_dwell)?,
        tension_floor: or("tension_floor", d.sim.tension_floor)?,
    };
    let bundle = ScenarioBundle {
        plant,
        gains,
        sim,
        gamma_out: num("gamma_out")?,
        gamma_out_safety: or("gamma_out_safety", d.gamma_out_safety)?,
    };
    bundle.validate()?;
    Ok(bundle)
}

/// Renders every key; `parse_config(&emit_config(b)) == b`.
pub fn emit_config(b: &ScenarioBundle) -> String {
    let mut out = String::new();
    let mut kv = |k: &str, v: f64| {
        let _ = writeln!(out, "{k} = {v:?}");
    };
    let p = &b.plant;
    kv("m", p.m);
    kv("j_uav", p.j_uav);
    kv("i_winch", p.i_winch);
    kv("rho", p.rho);
    kv("g", p.g);
    let g = &b.gains;
    kv("k_pr", g.k_pr);
    kv("k_dr", g.k_dr);
    kv("lambda1", g.lambda1);
    kv("lambda2", g.lambda2);
    kv("k_pa", g.k_pa);
    kv("k_da", g.k_da);
    kv("k_pt", g.k_pt);
    kv("k_dt", g.k_dt);
    kv("zeta", g.zeta);
    kv("eps", g.eps);
    kv("nu", g.nu);
    kv("theta_tilde_max", g.theta_tilde_max);
    kv("hover_tension", g.hover_tension);
    if let Some(u3) = g.u3_inf_norm {
        kv("u3_inf_norm", u3);
    }
    kv("ball_split", g.ball_split);
    let s = &b.sim;
    kv("dt", s.dt);
    kv("t_final", s.t_final);
    kv("r0", s.initial.r);
    kv("r_dot0", s.initial.r_dot);
    kv("alpha0", s.initial.alpha);
    kv("alpha_dot0", s.initial.alpha_dot);
    kv("theta0", s.initial.theta);
    kv("theta_dot0", s.initial.theta_dot);
    kv("r_bar", s.reference.r_bar);
    kv("alpha_bar", s.reference.alpha_bar);
    kv("theta_bar", s.reference.theta_bar);
    kv("convergence_tol", s.convergence_tol);
    kv("convergence_dwell", s.convergence_dwell);
    kv("tension_floor", s.tension_floor);
    if let Some(go) = b.gamma_out {
        kv("gamma_out", go);
    }
    kv("gamma_out_safety", b.gamma_out_safety);
    let _ = writeln!(out, "mode = {}", s.mode);
    out
}
