//! Line-based `key=value` run configuration.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use serde::Serialize;

use crate::energy::Coupling;
use crate::error::{Error, Result};
use crate::minmax::{Regime, SolveOptions};

/// Everything a `solve` run needs. Every field has a default except `rho`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunConfig {
    pub l1: f64,
    pub l2: f64,
    pub n1: usize,
    pub n2: usize,
    pub delta1: f64,
    pub delta2: f64,
    pub rho: f64,
    pub gap_tol: f64,
    pub regime: Regime,
    pub tol: f64,
    pub seed: u64,
    pub path_nodes: usize,
    pub deform_steps: usize,
    pub theta_radius: f64,
    pub theta_samples: usize,
    pub out: String,
    /// Write `trace.jsonl`.
    pub trace: bool,
    /// Add one trace record per energy evaluation.
    pub trace_energy: bool,
}

/// Keys in emission order, grouped by block.
pub const KEYS: [(&str, &[&str]); 4] = [
    ("geometry", &["L1", "L2", "N1", "N2", "delta1", "delta2"]),
    ("coupling", &["rho", "gap_tol"]),
    (
        "solver",
        &["regime", "tol", "seed", "path_nodes", "deform_steps", "theta_radius", "theta_samples"],
    ),
    ("output", &["out", "trace", "trace_energy"]),
];

impl RunConfig {
    /// Defaults with the given coupling constant.
    pub fn with_rho(rho: f64) -> Self {
        let o = SolveOptions::default();
        RunConfig {
            l1: 2.0 * PI,
            l2: 2.0 * PI,
            n1: 32,
            n2: 32,
            delta1: 0.5,
            delta2: 0.0,
            rho,
            gap_tol: Coupling::DEFAULT_GAP_TOL,
            regime: o.regime,
            tol: o.tol,
            seed: o.seed,
            path_nodes: o.path_nodes,
            deform_steps: o.deform_steps,
            theta_radius: o.theta_radius,
            theta_samples: o.theta_samples,
            out: "out".into(),
            trace: true,
            trace_energy: o.trace_energy,
        }
    }

    pub fn solve_options(&self) -> SolveOptions {
        SolveOptions {
            regime: self.regime,
            tol: self.tol,
            seed: self.seed,
            trace_energy: self.trace_energy,
            path_nodes: self.path_nodes,
            deform_steps: self.deform_steps,
            theta_radius: self.theta_radius,
            theta_samples: self.theta_samples,
        }
    }

    /// Assign one key from its text value. Errors carry no line number.
    pub fn set(&mut self, key: &str, value: &str) -> std::result::Result<(), String> {
        let v = value.trim();
        match key {
            "L1" => self.l1 = real(v)?,
            "L2" => self.l2 = real(v)?,
            "N1" => self.n1 = integer(v)?,
            "N2" => self.n2 = integer(v)?,
            "delta1" => self.delta1 = real(v)?,
            "delta2" => self.delta2 = real(v)?,
            "rho" => self.rho = real(v)?,
            "gap_tol" => self.gap_tol = real(v)?,
            "regime" => self.regime = v.parse().map_err(|e: Error| e.to_string())?,
            "tol" => self.tol = real(v)?,
            "seed" => self.seed = v.parse().map_err(|_| format!("expected an unsigned integer, got '{v}'"))?,
            "path_nodes" => self.path_nodes = integer(v)?,
            "deform_steps" => self.deform_steps = integer(v)?,
            "theta_radius" => self.theta_radius = real(v)?,
            "theta_samples" => self.theta_samples = integer(v)?,
            "out" => {
                if v.is_empty() {
                    return Err("out must not be empty".into());
                }
                self.out = v.to_string()
            }
            "trace" => self.trace = boolean(v)?,
            "trace_energy" => self.trace_energy = boolean(v)?,
            _ => return Err(format!("unknown key '{key}'")),
        }
        Ok(())
    }

    /// The first violated invariant as `(key, message)`.
    pub fn check(&self) -> std::result::Result<(), (&'static str, String)> {
        for (key, l) in [("L1", self.l1), ("L2", self.l2)] {
            if !(l > 0.0 && l.is_finite()) {
                return Err((key, format!("side length must be positive, got {l}")));
            }
        }
        for (key, n) in [("N1", self.n1), ("N2", self.n2)] {
            if n % 2 != 0 || n < 8 {
                return Err((key, format!("resolution must be even and >= 8, got {n}")));
            }
        }
        for (key, d) in [("delta1", self.delta1), ("delta2", self.delta2)] {
            if d != 0.0 && d != 0.5 {
                return Err((key, format!("spin offset must be 0 or 0.5, got {d}")));
            }
        }
        if !(self.rho > 0.0 && self.rho.is_finite()) {
            return Err(("rho", format!("rho must be positive, got {}", self.rho)));
        }
        if !(self.gap_tol >= 0.0 && self.gap_tol.is_finite()) {
            return Err(("gap_tol", format!("gap_tol must be >= 0, got {}", self.gap_tol)));
        }
        if !(self.tol > 0.0 && self.tol.is_finite()) {
            return Err(("tol", format!("tol must be positive, got {}", self.tol)));
        }
        if self.path_nodes < 16 {
            return Err(("path_nodes", format!("path_nodes must be >= 16, got {}", self.path_nodes)));
        }
        if !(self.theta_radius > 0.0 && self.theta_radius.is_finite()) {
            return Err(("theta_radius", format!("theta_radius must be positive, got {}", self.theta_radius)));
        }
        if self.theta_samples == 0 {
            return Err(("theta_samples", "theta_samples must be positive".into()));
        }
        Ok(())
    }

    /// Every key with its value in emission order.
    pub fn entries(&self) -> Vec<(&'static str, String)> {
        let b = |x: bool| if x { "true" } else { "false" }.to_string();
        vec![
            ("L1", fmt_real(self.l1)),
            ("L2", fmt_real(self.l2)),
            ("N1", self.n1.to_string()),
            ("N2", self.n2.to_string()),
            ("delta1", fmt_real(self.delta1)),
            ("delta2", fmt_real(self.delta2)),
            ("rho", fmt_real(self.rho)),
            ("gap_tol", fmt_real(self.gap_tol)),
            ("regime", self.regime.to_string()),
            ("tol", fmt_real(self.tol)),
            ("seed", self.seed.to_string()),
            ("path_nodes", self.path_nodes.to_string()),
            ("deform_steps", self.deform_steps.to_string()),
            ("theta_radius", fmt_real(self.theta_radius)),
            ("theta_samples", self.theta_samples.to_string()),
            ("out", self.out.clone()),
            ("trace", b(self.trace)),
            ("trace_energy", b(self.trace_energy)),
        ]
    }

    /// Manifest as a sorted key-value map, for reports.
    pub fn manifest(&self) -> BTreeMap<&'static str, String> {
        self.entries().into_iter().collect()
    }
}

fn fmt_real(x: f64) -> String {
    // Debug is the shortest representation that parses back to the same value
    format!("{x:?}")
}

fn real(v: &str) -> std::result::Result<f64, String> {
    let x: f64 = v.parse().map_err(|_| format!("expected a real number, got '{v}'"))?;
    if !x.is_finite() {
        return Err(format!("expected a finite number, got '{v}'"));
    }
    Ok(x)
}

fn integer(v: &str) -> std::result::Result<usize, String> {
    v.parse().map_err(|_| format!("expected a non-negative integer, got '{v}'"))
}

fn boolean(v: &str) -> std::result::Result<bool, String> {
    match v {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        _ => Err(format!("expected true or false, got '{v}'")),
    }
}

/// Parse `key=value` lines; `#` starts a comment. `rho` is required.
///
/// Errors name the 1-based line of the offending key. A missing `rho` is
/// reported at the line past the end of the text.
pub fn parse_config(text: &str) -> Result<RunConfig> {
    let mut cfg = RunConfig::with_rho(f64::NAN);
    let mut seen: BTreeMap<String, usize> = BTreeMap::new();
    let mut n_lines = 0;
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        n_lines = line;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let (key, value) = content.split_once('=').ok_or_else(|| Error::Config {
            line,
            message: format!("expected key=value, got '{content}'"),
        })?;
        let key = key.trim();
        if let Some(first) = seen.get(key) {
            return Err(Error::Config {
                line,
                message: format!("duplicate key '{key}' (first set on line {first})"),
            });
        }
        cfg.set(key, value).map_err(|message| Error::Config { line, message })?;
        seen.insert(key.to_string(), line);
    }
    if !seen.contains_key("rho") {
        return Err(Error::Config {
            line: n_lines + 1,
            message: "missing required key 'rho'".into(),
        });
    }
    cfg.check().map_err(|(key, message)| Error::Config {
        line: seen.get(key).copied().unwrap_or(0),
        message,
    })?;
    Ok(cfg)
}

/// Emit every key explicitly, grouped by block.
pub fn emit_config(cfg: &RunConfig) -> String {
    let entries: BTreeMap<&str, String> = cfg.entries().into_iter().collect();
    let mut out = String::new();
    for (block, keys) in KEYS {
        out += &format!("# {block}\n");
        for k in keys {
            out += &format!("{k}={}\n", entries[k]);
        }
    }
    out
}
