//! Certification quantities: the radial envelope, the ISS restriction on
//! `|r_dot / r|`, the attitude-error budget, the inner and outer asymptotic
//! gains and the small-gain test for their interconnection.

use std::f64::consts::{FRAC_PI_2, PI};

use crate::batch;
use crate::control::{commanded_attitude_rate, outer_loop, GainConfig};
use crate::equilibria::Setpoint;
use crate::plant::{FullState, PlantParams};
use crate::sim::rk4_step;
use crate::{Error, Result};

/// Bounds on the radial trajectory under the nested-saturation winch law.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RadialEnvelope {
    pub r_min: f64,
    pub r_max: f64,
    /// Extremal excursion of `r`.
    pub r_star: f64,
    /// Time of the extremum for the unsaturated loop; 0 when `r` is monotone.
    pub tau_star: f64,
    /// Bound on `|r_dot|`.
    pub vel_bound: f64,
}

impl RadialEnvelope {
    pub fn contains(&self, r: f64, tol: f64) -> bool {
        r >= self.r_min - tol && r <= self.r_max + tol
    }
}

/// Envelope of `r(t)` starting from `(r0, rdot0)` towards `r_bar`.
///
/// Requires `|rdot0| <= lambda1 / k_dr`.
pub fn radial_envelope(r0: f64, rdot0: f64, r_bar: f64, g: &GainConfig) -> Result<RadialEnvelope> {
    let v_max = g.lambda1 / g.k_dr;
    if rdot0.abs() > v_max * (1.0 + 1e-12) {
        return Err(Error::invalid(format!(
            "initial radial speed {rdot0} exceeds lambda1/k_dr = {v_max}"
        )));
    }
    let sq = g.k_pr.sqrt();
    let r_tilde = r0 - r_bar;
    let denom = g.k_pr * r_tilde + sq * rdot0;
    let tau = if denom != 0.0 { rdot0 / denom } else { 0.0 };
    let r_star = if r_tilde * rdot0 >= 0.0 {
        r0 + rdot0 / g.k_dr
    } else if tau > 0.0 {
        r_bar + (r_tilde + rdot0 / sq) * (-sq * tau).exp()
    } else {
        r0
    };
    Ok(RadialEnvelope {
        r_min: r_bar.min(r0).min(r_star),
        r_max: r_bar.max(r0).max(r_star),
        r_star,
        tau_star: tau.max(0.0),
        vel_bound: g.lambda1.max(g.lambda2) / g.k_dr,
    })
}

/// Admissible `|r_dot / r|` for the ISS property of the elevation loop,
/// `nu (k_da / 2) cos(tt) / (1 - cos(tt))` with `tt = theta_tilde_max`.
pub fn restriction_r(g: &GainConfig) -> f64 {
    let c = g.theta_tilde_max.cos();
    g.nu * 0.5 * g.k_da * c / (1.0 - c)
}

/// Largest `lambda1` keeping `|r_dot / r|` inside [`restriction_r`] when
/// the cable never gets shorter than `r_min`.
pub fn lambda1_bound(g: &GainConfig, r_min: f64) -> f64 {
    restriction_r(g) * g.k_dr * r_min
}

/// `a x^3 - b (1 - x)^2` with `a = (1 - nu)^2 zeta^2` and
/// `b = (1 + 2 (1 - nu)^2 zeta^2)^2 / 4`. The attitude budget is admissible
/// where this is positive.
pub fn theta_budget_residual(x: f64, zeta: f64, nu: f64) -> f64 {
    let (a, b) = budget_coefficients(zeta, nu);
    a * x * x * x - b * (1.0 - x) * (1.0 - x)
}

fn budget_coefficients(zeta: f64, nu: f64) -> (f64, f64) {
    let k = (1.0 - nu) * (1.0 - nu) * zeta * zeta;
    (k, 0.25 * (1.0 + 2.0 * k) * (1.0 + 2.0 * k))
}

/// Root in `(0, 1)` of [`theta_budget_residual`]: the smallest attitude-error
/// budget for which the elevation-loop Lyapunov argument closes.
pub fn theta_budget(zeta: f64, nu: f64) -> f64 {
    let (mut lo, mut hi) = (1e-12, 1.0 - 1e-12);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if theta_budget_residual(mid, zeta, nu) > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Closed-form bound `1 / (zeta sqrt(k_pt))` on the inner-loop gain.
pub fn gamma_in_bound(g: &GainConfig) -> f64 {
    1.0 / (g.zeta * g.k_pt.sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct L1Norm {
    /// Simpson estimate over the horizon.
    pub value: f64,
    /// Bound on the neglected tail beyond the horizon.
    pub tail: f64,
}

/// l1 norm of the inner-loop impulse response
/// `(cos(w s) - zeta / sqrt(1 - zeta^2) sin(w s)) exp(-q zeta s)`,
/// `q = sqrt(k_pt)`, `w = q sqrt(1 - zeta^2)`.
pub fn gamma_in_l1(g: &GainConfig, t_horizon: f64, dt: f64) -> Result<L1Norm> {
    if !(t_horizon > 0.0) || !(dt > 0.0) {
        return Err(Error::invalid(format!(
            "horizon and step must be positive, got {t_horizon} and {dt}"
        )));
    }
    let (zeta, q) = (g.zeta, g.k_pt.sqrt());
    let w = q * (1.0 - zeta * zeta).sqrt();
    let c = zeta / (1.0 - zeta * zeta).sqrt();
    let f = |s: f64| ((w * s).cos() - c * (w * s).sin()).abs() * (-q * zeta * s).exp();
    let mut n = (t_horizon / dt).ceil() as usize;
    n += n % 2;
    let h = t_horizon / n as f64;
    let mut acc = f(0.0) + f(t_horizon);
    for i in 1..n {
        acc += if i % 2 == 1 { 4.0 } else { 2.0 } * f(i as f64 * h);
    }
    Ok(L1Norm {
        value: acc * h / 3.0,
        tail: (-q * zeta * t_horizon).exp() / (q * zeta),
    })
}

/// [`gamma_in_l1`] with horizon `40 / (zeta sqrt(k_pt))` and `2e5` steps.
pub fn gamma_in_l1_default(g: &GainConfig) -> L1Norm {
    let horizon = 40.0 / (g.zeta * g.k_pt.sqrt());
    gamma_in_l1(g, horizon, horizon / 2e5).expect("positive horizon")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GammaOutSource {
    Configured,
    Estimated,
}

impl GammaOutSource {
    pub fn as_str(&self) -> &'static str {
        match self {
            GammaOutSource::Configured => "configured",
            GammaOutSource::Estimated => "estimated",
        }
    }
}

/// Outcome of the small-gain analysis for a gain set.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GainCertificate {
    pub gamma_in: f64,
    /// l1 value of the inner loop, for comparison with `gamma_in`.
    pub gamma_in_l1: f64,
    pub gamma_out: f64,
    pub gamma_out_source: GammaOutSource,
    /// Admissible `|r_dot / r|` [1/s].
    pub r_restriction: f64,
    /// Saturation bound for the supplied `r_min` [m/s^2].
    pub lambda1_max: f64,
    pub lambda1_ok: bool,
    /// Root of the attitude-budget cubic [rad].
    pub theta_budget: f64,
    pub theta_budget_ok: bool,
    /// `k_pt >= gamma_out^2 / zeta^2`.
    pub k_pt_ok: bool,
    pub small_gain_ok: bool,
    /// `(1 - gamma_in gamma_out) theta_tilde_max` [rad].
    pub init_ball: f64,
    /// Initial-error test `|x_theta0| + gamma_in |x_alpha0| < init_ball`.
    pub init_ok: bool,
    /// Bounds on `(|x_alpha|_inf, |x_theta|_inf)` for the supplied initial errors.
    pub trajectory_bound: [f64; 2],
}

impl GainCertificate {
    pub fn product(&self) -> f64 {
        self.gamma_in * self.gamma_out
    }

    /// All hypotheses hold.
    pub fn valid(&self) -> bool {
        self.small_gain_ok && self.k_pt_ok && self.lambda1_ok && self.theta_budget_ok && self.init_ok
    }
}

/// Trajectory bound `1/(1 - gi go) [[1, go], [gi, 1]] [xa0; xt0]`.
pub fn trajectory_bound(gamma_in: f64, gamma_out: f64, x_alpha0: f64, x_theta0: f64) -> [f64; 2] {
    let k = 1.0 / (1.0 - gamma_in * gamma_out);
    [
        k * (x_alpha0 + gamma_out * x_theta0),
        k * (gamma_in * x_alpha0 + x_theta0),
    ]
}

/// Small-gain certificate for the inner/outer interconnection. Fails only
/// when `gamma_in gamma_out >= 1`; the other hypotheses are reported as flags.
pub fn small_gain_certificate(
    g: &GainConfig,
    gamma_out: f64,
    source: GammaOutSource,
    x_alpha0: f64,
    x_theta0: f64,
    r_min: f64,
) -> Result<GainCertificate> {
    if !(gamma_out >= 0.0) || !gamma_out.is_finite() {
        return Err(Error::invalid(format!(
            "gamma_out must be finite and >= 0, got {gamma_out}"
        )));
    }
    let gamma_in = gamma_in_bound(g);
    let product = gamma_in * gamma_out;
    if product >= 1.0 {
        return Err(Error::SmallGainViolated(product));
    }
    let lambda1_max = lambda1_bound(g, r_min);
    let budget = theta_budget(g.zeta, g.nu);
    let init_ball = (1.0 - product) * g.theta_tilde_max;
    Ok(GainCertificate {
        gamma_in,
        gamma_in_l1: gamma_in_l1_default(g).value,
        gamma_out,
        gamma_out_source: source,
        r_restriction: restriction_r(g),
        lambda1_max,
        lambda1_ok: g.lambda1 < lambda1_max,
        theta_budget: budget,
        theta_budget_ok: g.theta_tilde_max > budget,
        k_pt_ok: g.k_pt >= gamma_out * gamma_out / (g.zeta * g.zeta),
        small_gain_ok: true,
        init_ball,
        init_ok: x_theta0 + gamma_in * x_alpha0 < init_ball,
        trajectory_bound: trajectory_bound(gamma_in, gamma_out, x_alpha0, x_theta0),
    })
}

/// Perturbation terms of the elevation error dynamics under an attitude error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorTerms {
    /// Damping perturbation `(2 r_dot / r)(1 - cos tt)`.
    pub delta: f64,
    /// Forcing `(g cos a / r)(cos tt - 1) - u_t sin(tt) / (m r)`.
    pub gamma: f64,
    /// Cable tension predicted from the attitude error.
    pub t_predicted: f64,
}

pub fn error_terms(
    state: &FullState,
    t_bar: f64,
    theta_tilde: f64,
    u_t: f64,
    u_alpha: f64,
    p: &PlantParams,
) -> ErrorTerms {
    let r = state.r;
    let (s, c) = theta_tilde.sin_cos();
    ErrorTerms {
        delta: 2.0 * state.r_dot / r * (1.0 - c),
        gamma: p.g * state.alpha.cos() / r * (c - 1.0) - u_t * s / (p.m * r),
        t_predicted: p.m * r * state.alpha_dot * state.alpha_dot + t_bar - u_t * (1.0 - c) + u_alpha * s,
    }
}

/// Elevation acceleration reconstructed from the error terms,
/// `-(k_pa a_tilde + k_da a_dot) cos(tt) - delta a_dot + gamma`.
pub fn elevation_error_accel(
    state: &FullState,
    sp: &Setpoint,
    theta_tilde: f64,
    terms: &ErrorTerms,
    g: &GainConfig,
) -> f64 {
    -(g.k_pa * (state.alpha - sp.alpha_bar) + g.k_da * state.alpha_dot) * theta_tilde.cos()
        - terms.delta * state.alpha_dot
        + terms.gamma
}

/// Settings for the empirical outer-gain estimate.
#[derive(Debug, Clone, PartialEq)]
pub struct GammaOutOptions {
    /// Attitude-error amplitude; `None` uses `theta_tilde_max`.
    pub amplitude: Option<f64>,
    pub frequencies: Vec<f64>,
    pub phases: Vec<f64>,
    pub safety_factor: f64,
    /// Time discarded before measuring the response [s].
    pub settle: f64,
    /// Periods measured after settling.
    pub periods: f64,
    /// Cap on the simulated time per run [s].
    pub max_horizon: f64,
}

impl Default for GammaOutOptions {
    fn default() -> Self {
        let n = 7;
        GammaOutOptions {
            amplitude: None,
            // 0.3 .. 300 rad/s, log spaced
            frequencies: (0..n)
                .map(|i| 0.3 * 10f64.powf(3.0 * i as f64 / (n - 1) as f64))
                .collect(),
            phases: vec![0.0, FRAC_PI_2],
            safety_factor: 1.0,
            settle: 2.0,
            periods: 4.0,
            max_horizon: 15.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GammaOutEstimate {
    /// Peak ratio times the safety factor.
    pub gamma_out: f64,
    /// Peak ratio `sup |theta_c_dot| / amplitude`.
    pub raw: f64,
    /// Index into the supplied setpoints where the peak occurred.
    pub worst_point: usize,
    pub worst_frequency: f64,
}

/// Peak `|theta_c_dot| / A` of the elevation loop at fixed radius driven by
/// `theta_tilde = A sin(w t + phi)`, over setpoints, frequencies and phases.
pub fn estimate_gamma_out(
    points: &[Setpoint],
    g: &GainConfig,
    p: &PlantParams,
    opts: &GammaOutOptions,
) -> Result<GammaOutEstimate> {
    if points.is_empty() || opts.frequencies.is_empty() || opts.phases.is_empty() {
        return Err(Error::invalid(
            "gamma_out estimate needs setpoints, frequencies and phases",
        ));
    }
    let amp = opts.amplitude.unwrap_or(g.theta_tilde_max);
    if !(amp > 0.0) {
        return Err(Error::invalid(format!("amplitude must be positive, got {amp}")));
    }
    let jobs: Vec<(usize, f64, f64)> = points
        .iter()
        .enumerate()
        .flat_map(|(i, _)| {
            opts.frequencies
                .iter()
                .flat_map(move |&w| opts.phases.iter().map(move |&ph| (i, w, ph)))
        })
        .collect();
    let results = batch::map(&jobs, |&(i, w, ph)| sinusoid_peak(&points[i], w, ph, amp, g, p, opts));
    let mut best = (0.0, 0, opts.frequencies[0]);
    for (res, &(i, w, _)) in results.into_iter().zip(&jobs) {
        let v = res?;
        if v > best.0 {
            best = (v, i, w);
        }
    }
    let raw = best.0 / amp;
    Ok(GammaOutEstimate {
        gamma_out: raw * opts.safety_factor,
        raw,
        worst_point: best.1,
        worst_frequency: best.2,
    })
}

fn sinusoid_peak(
    sp: &Setpoint,
    w: f64,
    phase: f64,
    amp: f64,
    g: &GainConfig,
    p: &PlantParams,
    opts: &GammaOutOptions,
) -> Result<f64> {
    let period = 2.0 * PI / w;
    let horizon = (opts.settle + opts.periods * period).min(opts.max_horizon);
    let dt = (period / 50.0).min(1e-3);
    let steps = (horizon / dt).ceil() as usize;
    let eval = |t: f64, x: &[f64; 2]| -> Result<([f64; 2], f64)> {
        let state = FullState {
            r: sp.r_bar,
            alpha: x[0],
            alpha_dot: x[1],
            ..Default::default()
        };
        let tt = amp * (w * t + phase).sin();
        let out = outer_loop(&state, sp, 0.0, g, p)?;
        let terms = error_terms(&state, out.t_bar, tt, out.diag.u_t, out.diag.u_alpha, p);
        let acc = elevation_error_accel(&state, sp, tt, &terms, g);
        let rate = commanded_attitude_rate(&state, sp, 0.0, 0.0, acc, &out, g, p);
        Ok(([x[1], acc], rate))
    };
    let mut x = [sp.alpha_bar, 0.0];
    let mut peak: f64 = 0.0;
    for k in 0..steps {
        let t = k as f64 * dt;
        if t >= opts.settle.min(0.5 * horizon) {
            peak = peak.max(eval(t, &x)?.1.abs());
        }
        x = rk4_step(&x, t, dt, |t, y| Ok(eval(t, y)?.0))?;
    }
    Ok(peak)
}

/// Peak steady-state amplitude of `theta_tilde` for unit sinusoidal
/// `theta_c_dot` in the attitude error loop
/// `theta_ddot = -k_pt theta_tilde - k_dt theta_dot`, over the given frequencies.
pub fn inner_error_peak_gain(g: &GainConfig, frequencies: &[f64]) -> Result<f64> {
    let runs = batch::map(frequencies, |&w| inner_error_amplitude(g, w));
    runs.into_iter().try_fold(0.0f64, |acc, r| Ok(acc.max(r?)))
}

fn inner_error_amplitude(g: &GainConfig, w: f64) -> Result<f64> {
    let (kp, kd) = (g.k_pt, g.k_dt);
    let settle = 12.0 / (g.zeta * kp.sqrt());
    let period = if w > 0.0 { 2.0 * PI / w } else { settle };
    let dt = (period / 400.0).min(1e-3);
    let horizon = settle + 3.0 * period;
    let steps = (horizon / dt).ceil() as usize;
    // x = (theta_tilde, theta_tilde_dot), input d = sin(w t) is theta_c_dot
    let f = |t: f64, x: &[f64; 2]| -> Result<[f64; 2]> {
        let (d, d_dot) = ((w * t).sin(), w * (w * t).cos());
        Ok([x[1], -kp * x[0] - kd * (x[1] + d) - d_dot])
    };
    let mut x = [0.0f64, 0.0];
    let mut peak: f64 = 0.0;
    for k in 0..steps {
        let t = k as f64 * dt;
        if t >= settle {
            peak = peak.max(x[0].abs());
        }
        x = rk4_step(&x, t, dt, f)?;
    }
    Ok(peak)
}
