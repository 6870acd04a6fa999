//! CSV logs, waypoint plans, certificate reports and attainable-set tables.

use std::fmt::Write as _;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::analysis::GainCertificate;
use crate::equilibria::{is_vertical, theta_interval};
use crate::governor::{Switch, WaypointPlan};
use crate::plant::{FullState, PlantParams};
use crate::sim::{Events, LogRow, TrajectoryLog};
use crate::{Error, Result};

pub const LOG_HEADER: &str = "t,r,r_dot,alpha,alpha_dot,theta,theta_dot,u1,u2,u3,T,theta_c,waypoint";
pub const PLAN_HEADER: &str = "index,s,r_bar,alpha_bar,theta_bar,dx_alpha,dx_theta";

/// Nine significant digits.
#[inline]
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.8e}")
}

fn io_err(path: &Path, source: std::io::Error) -> Error {
    Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

pub fn write_log<W: Write>(log: &TrajectoryLog, mut w: W) -> std::io::Result<()> {
    writeln!(w, "{LOG_HEADER}")?;
    for row in &log.rows {
        let s = &row.state;
        let vals = [
            row.t,
            s.r,
            s.r_dot,
            s.alpha,
            s.alpha_dot,
            s.theta,
            s.theta_dot,
            row.u1,
            row.u2,
            row.u3,
            row.tension,
            row.theta_c,
        ];
        for v in vals {
            write!(w, "{},", fmt_f64(v))?;
        }
        writeln!(w, "{}", row.waypoint)?;
    }
    let ev = &log.events;
    if let Some(t) = ev.tension_violation {
        writeln!(w, "# tension_violation t={t:.4}")?;
    }
    for s in &ev.switches {
        writeln!(w, "# switch t={:.4} from={} to={}", s.t, s.from, s.to)?;
    }
    if let Some(t) = ev.convergence {
        writeln!(w, "# convergence t={t:.4}")?;
    }
    Ok(())
}

/// Writes the log to `dest`, creating parent directories.
pub fn emit_log(log: &TrajectoryLog, dest: &Path) -> Result<()> {
    if let Some(dir) = dest.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    }
    let f = fs::File::create(dest).map_err(|e| io_err(dest, e))?;
    let mut w = BufWriter::new(f);
    write_log(log, &mut w).map_err(|e| io_err(dest, e))?;
    w.flush().map_err(|e| io_err(dest, e))
}

pub fn log_to_string(log: &TrajectoryLog) -> String {
    let mut buf = Vec::new();
    write_log(log, &mut buf).expect("writing to memory");
    String::from_utf8(buf).expect("ascii output")
}

/// Reads a log written by [`write_log`]. Event times come back at the
/// rendered resolution.
pub fn parse_log(text: &str) -> Result<TrajectoryLog> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.trim() == LOG_HEADER => {}
        _ => {
            return Err(Error::Parse {
                line: 1,
                msg: "missing log header".into(),
            })
        }
    }
    let mut log = TrajectoryLog::default();
    for (idx, raw) in lines {
        let line = idx + 1;
        let raw = raw.trim();
        if raw.is_empty() {
            continue;
        }
        if let Some(comment) = raw.strip_prefix('#') {
            parse_event(comment.trim(), line, &mut log.events)?;
            continue;
        }
        let fields: Vec<&str> = raw.split(',').collect();
        if fields.len() != 13 {
            return Err(Error::Parse {
                line,
                msg: format!("expected 13 fields, got {}", fields.len()),
            });
        }
        let mut v = [0.0; 12];
        for (slot, f) in v.iter_mut().zip(&fields) {
            *slot = f.trim().parse().map_err(|_| Error::Parse {
                line,
                msg: format!("bad number `{f}`"),
            })?;
        }
        let waypoint = fields[12].trim().parse().map_err(|_| Error::Parse {
            line,
            msg: format!("bad waypoint index `{}`", fields[12]),
        })?;
        log.rows.push(LogRow {
            t: v[0],
            state: FullState::from_array([v[1], v[2], v[3], v[4], v[5], v[6]]),
            u1: v[7],
            u2: v[8],
            u3: v[9],
            tension: v[10],
            theta_c: v[11],
            waypoint,
        });
    }
    Ok(log)
}

fn parse_event(comment: &str, line: usize, ev: &mut Events) -> Result<()> {
    let mut parts = comment.split_whitespace();
    let kind = parts.next().unwrap_or("");
    let mut t = None;
    let (mut from, mut to) = (None, None);
    for kv in parts {
        let bad = || Error::Parse {
            line,
            msg: format!("bad event field `{kv}`"),
        };
        let (k, v) = kv.split_once('=').ok_or_else(bad)?;
        match k {
            "t" => t = Some(v.parse::<f64>().map_err(|_| bad())?),
            "from" => from = Some(v.parse::<usize>().map_err(|_| bad())?),
            "to" => to = Some(v.parse::<usize>().map_err(|_| bad())?),
            _ => {}
        }
    }
    match (kind, t) {
        ("tension_violation", Some(t)) => ev.tension_violation = Some(t),
        ("convergence", Some(t)) => ev.convergence = Some(t),
        ("switch", Some(t)) => ev.switches.push(Switch {
            t,
            from: from.unwrap_or(0),
            to: to.unwrap_or(0),
        }),
        _ => {}
    }
    Ok(())
}

pub fn plan_to_csv(plan: &WaypointPlan) -> String {
    let mut out = String::from(PLAN_HEADER);
    out.push('\n');
    for (i, w) in plan.waypoints.iter().enumerate() {
        let _ = writeln!(
            out,
            "{i},{},{},{},{},{},{}",
            fmt_f64(w.s),
            fmt_f64(w.sp.r_bar),
            fmt_f64(w.sp.alpha_bar),
            fmt_f64(w.sp.theta_bar),
            fmt_f64(w.dx_alpha),
            fmt_f64(w.dx_theta)
        );
    }
    out
}

/// `key: value` report of a certificate.
pub fn certificate_report(cert: &GainCertificate) -> String {
    let mut out = String::new();
    let mut line = |k: &str, v: String| {
        let _ = writeln!(out, "{k}: {v}");
    };
    line("gamma_in", fmt_f64(cert.gamma_in));
    line("gamma_in_l1", fmt_f64(cert.gamma_in_l1));
    line("gamma_out", fmt_f64(cert.gamma_out));
    line("gamma_out_source", cert.gamma_out_source.as_str().into());
    line("gain_product", fmt_f64(cert.product()));
    line("small_gain_ok", cert.small_gain_ok.to_string());
    line("k_pt_ok", cert.k_pt_ok.to_string());
    line("r_restriction", fmt_f64(cert.r_restriction));
    line("lambda1_max", fmt_f64(cert.lambda1_max));
    line("lambda1_ok", cert.lambda1_ok.to_string());
    line("theta_budget", fmt_f64(cert.theta_budget));
    line("theta_budget_ok", cert.theta_budget_ok.to_string());
    line("init_ball", fmt_f64(cert.init_ball));
    line("init_ok", cert.init_ok.to_string());
    line("bound_x_alpha", fmt_f64(cert.trajectory_bound[0]));
    line("bound_x_theta", fmt_f64(cert.trajectory_bound[1]));
    line("valid", cert.valid().to_string());
    out
}

/// Admissible pitch interval on a uniform elevation grid over `[0, pi]`.
/// The vertical row, if on the grid, is the singleton `(0, 0)`.
pub fn attainable_set_sample(eps: f64, grid: usize, p: &PlantParams) -> Result<Vec<(f64, f64, f64)>> {
    if grid < 2 {
        return Err(Error::invalid(format!("grid must have at least 2 points, got {grid}")));
    }
    (0..grid)
        .map(|i| {
            let mut alpha = i as f64 * std::f64::consts::PI / (grid - 1) as f64;
            if 2 * i == grid - 1 || is_vertical(alpha) {
                alpha = std::f64::consts::FRAC_PI_2;
            }
            let (lo, hi) = theta_interval(alpha, eps, p)?;
            Ok((alpha, lo, hi))
        })
        .collect()
}

pub fn attainable_set_csv(rows: &[(f64, f64, f64)]) -> String {
    let mut out = String::from("alpha_bar,theta_min,theta_max\n");
    for (a, lo, hi) in rows {
        let _ = writeln!(out, "{},{},{}", fmt_f64(*a), fmt_f64(*lo), fmt_f64(*hi));
    }
    out
}
