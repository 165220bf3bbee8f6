//! Run configuration: defaults, a flat key=value file layer, command-line
//! overrides on top, and a canonical echo whose hash pins the numerical
//! inputs of a run.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use chandra_core::minimizer::{BlowupPolicy, SolveConfig};
use sha2::{Digest, Sha256};

use crate::Failure;

/// Sweep target: approach tau_c in free space or inside the external well.
#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum SweepMode {
    Free,
    Potential,
}

impl SweepMode {
    pub fn name(self) -> &'static str {
        match self {
            SweepMode::Free => "free",
            SweepMode::Potential => "potential",
        }
    }
}

/// Effective configuration of one run, after merging defaults, the config
/// file, and command-line flags (later layers win).
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub q: u32,
    pub m: f64,
    pub target_mass: f64,
    /// Absolute coupling; exclusive with `tau_frac`.
    pub tau: Option<f64>,
    /// Coupling as a fraction of tau_c; exclusive with `tau`.
    pub tau_frac: Option<f64>,
    /// External-well strength; its presence switches the well on.
    pub z: Option<f64>,
    pub s: f64,
    /// Number of attracting centers; only 1 is supported (radial solver).
    pub centers: u32,
    pub grid_n: usize,
    pub rmax: f64,
    pub mode: SweepMode,
    /// Ladder of tau_c - tau values; None selects the per-mode default.
    pub ladder: Option<Vec<f64>>,
    /// Largest-dtau points excluded from fits.
    pub fit_window: usize,
    pub exponent_tol: Option<f64>,
    pub direct_exponent_tol: Option<f64>,
    pub prefactor_tol: f64,
    pub beta: f64,
    pub scf_tol: f64,
    pub max_iter: usize,
    pub blowup: BlowupPolicy,
}

impl Default for RunConfig {
    fn default() -> Self {
        let solve = SolveConfig::default();
        Self {
            q: 2,
            m: 1.0,
            target_mass: 1.0,
            tau: None,
            tau_frac: None,
            z: None,
            s: 0.5,
            centers: 1,
            grid_n: 2048,
            rmax: 20.0,
            mode: SweepMode::Free,
            ladder: None,
            fit_window: 2,
            exponent_tol: None,
            direct_exponent_tol: None,
            prefactor_tol: 0.05,
            beta: solve.beta,
            scf_tol: solve.scf_tol,
            max_iter: solve.max_iter,
            blowup: BlowupPolicy::Auto,
        }
    }
}

fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, Failure> {
    value
        .parse()
        .map_err(|_| Failure::Usage(format!("config key `{key}`: cannot parse `{value}`")))
}

fn parse_ladder(key: &str, value: &str) -> Result<Vec<f64>, Failure> {
    let entries: Vec<f64> = value
        .split(',')
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(|t| parse(key, t))
        .collect::<Result<_, _>>()?;
    if entries.is_empty() {
        return Err(Failure::Usage(format!("config key `{key}`: empty ladder")));
    }
    Ok(entries)
}

impl RunConfig {
    /// Applies one key=value entry (config-file syntax). Unknown keys are
    /// usage errors: a typo must not silently fall back to a default.
    pub fn apply_kv(&mut self, key: &str, value: &str) -> Result<(), Failure> {
        match key {
            "q" => self.q = parse(key, value)?,
            "m" => self.m = parse(key, value)?,
            "mass" => self.target_mass = parse(key, value)?,
            "tau" => {
                self.tau = Some(parse(key, value)?);
                self.tau_frac = None;
            }
            "tau_frac" => {
                self.tau_frac = Some(parse(key, value)?);
                self.tau = None;
            }
            "z" => self.z = Some(parse(key, value)?),
            "s" => self.s = parse(key, value)?,
            "centers" => self.centers = parse(key, value)?,
            "grid_n" => self.grid_n = parse(key, value)?,
            "rmax" => self.rmax = parse(key, value)?,
            "mode" => {
                self.mode = match value {
                    "free" => SweepMode::Free,
                    "potential" => SweepMode::Potential,
                    _ => {
                        return Err(Failure::Usage(format!(
                            "config key `mode`: expected free|potential, got `{value}`"
                        )))
                    }
                }
            }
            "ladder" => self.ladder = Some(parse_ladder(key, value)?),
            "fit_window" => self.fit_window = parse(key, value)?,
            "exponent_tol" => self.exponent_tol = Some(parse(key, value)?),
            "direct_exponent_tol" => self.direct_exponent_tol = Some(parse(key, value)?),
            "prefactor_tol" => self.prefactor_tol = parse(key, value)?,
            "beta" => self.beta = parse(key, value)?,
            "scf_tol" => self.scf_tol = parse(key, value)?,
            "max_iter" => self.max_iter = parse(key, value)?,
            "blowup" => {
                self.blowup = match value {
                    "auto" => BlowupPolicy::Auto,
                    "never" => BlowupPolicy::Never,
                    "always" => BlowupPolicy::Always,
                    _ => {
                        return Err(Failure::Usage(format!(
                            "config key `blowup`: expected auto|never|always, got `{value}`"
                        )))
                    }
                }
            }
            _ => return Err(Failure::Usage(format!("unknown config key `{key}`"))),
        }
        Ok(())
    }

    /// Loads a flat key=value file ('#' comments, blank lines allowed) on
    /// top of the current values.
    pub fn apply_file(&mut self, path: &Path) -> Result<(), Failure> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Failure::Io(format!("cannot read config {}: {e}", path.display())))?;
        let mut saw_tau = false;
        let mut saw_frac = false;
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(Failure::Usage(format!(
                    "{}:{}: expected key = value, got `{line}`",
                    path.display(),
                    lineno + 1
                )));
            };
            let key = key.trim();
            saw_tau |= key == "tau";
            saw_frac |= key == "tau_frac";
            self.apply_kv(key, value.trim())?;
        }
        if saw_tau && saw_frac {
            return Err(Failure::Usage(format!(
                "{}: tau and tau_frac are mutually exclusive",
                path.display()
            )));
        }
        Ok(())
    }

    /// Range validation shared by every command.
    pub fn validate(&self) -> Result<(), Failure> {
        if self.q < 1 {
            return Err(Failure::Usage("q must be a positive integer".into()));
        }
        if !(self.m > 0.0 && self.m.is_finite()) {
            return Err(Failure::Usage(format!("m must be > 0, got {}", self.m)));
        }
        if !(self.target_mass > 0.0 && self.target_mass.is_finite()) {
            return Err(Failure::Usage(format!(
                "mass must be > 0, got {}",
                self.target_mass
            )));
        }
        if let Some(t) = self.tau {
            if !(t > 0.0 && t.is_finite()) {
                return Err(Failure::Usage(format!("tau must be > 0, got {t}")));
            }
        }
        if let Some(f) = self.tau_frac {
            if !(f > 0.0 && f.is_finite()) {
                return Err(Failure::Usage(format!("tau-frac must be > 0, got {f}")));
            }
        }
        if !(self.s > 0.0 && self.s < 0.75) {
            return Err(Failure::Usage(format!(
                "s must lie in (0, 3/4), got {}",
                self.s
            )));
        }
        if let Some(z) = self.z {
            if !(z > 0.0 && z.is_finite()) {
                return Err(Failure::Usage(format!("z must be > 0, got {z}")));
            }
        }
        if self.centers != 1 {
            return Err(Failure::Usage(format!(
                "multi-center configurations are not supported (the solver \
                 is radial); got centers = {}",
                self.centers
            )));
        }
        if self.grid_n < 16 {
            return Err(Failure::Usage(format!(
                "grid_n must be at least 16, got {}",
                self.grid_n
            )));
        }
        if !(self.rmax > 0.0 && self.rmax.is_finite()) {
            return Err(Failure::Usage(format!("rmax must be > 0, got {}", self.rmax)));
        }
        if !(self.beta > 0.0 && self.beta <= 1.0) {
            return Err(Failure::Usage(format!(
                "beta must lie in (0, 1], got {}",
                self.beta
            )));
        }
        if !(self.scf_tol > 0.0 && self.scf_tol.is_finite()) {
            return Err(Failure::Usage(format!(
                "scf_tol must be > 0, got {}",
                self.scf_tol
            )));
        }
        if self.max_iter == 0 {
            return Err(Failure::Usage("max_iter must be positive".into()));
        }
        Ok(())
    }

    /// Solver configuration with the exposed knobs applied.
    pub fn solve_config(&self) -> SolveConfig {
        SolveConfig {
            beta: self.beta,
            scf_tol: self.scf_tol,
            max_iter: self.max_iter,
            blowup: self.blowup,
            ..SolveConfig::default()
        }
    }

    /// Canonical echo of every effective value. The map (and therefore the
    /// hash below) pins all numerical inputs; output locations are kept
    /// out so identical physics hashes identically wherever it is stored.
    pub fn echo(&self) -> BTreeMap<String, String> {
        let mut map = BTreeMap::new();
        let mut put = |k: &str, v: String| {
            map.insert(k.to_string(), v);
        };
        put("q", self.q.to_string());
        put("m", self.m.to_string());
        put("mass", self.target_mass.to_string());
        if let Some(t) = self.tau {
            put("tau", t.to_string());
        }
        if let Some(f) = self.tau_frac {
            put("tau_frac", f.to_string());
        }
        if let Some(z) = self.z {
            put("z", z.to_string());
        }
        put("s", self.s.to_string());
        put("centers", self.centers.to_string());
        put("grid_n", self.grid_n.to_string());
        put("rmax", self.rmax.to_string());
        put("mode", self.mode.name().to_string());
        if let Some(l) = &self.ladder {
            let row = l.iter().map(f64::to_string).collect::<Vec<_>>().join(",");
            put("ladder", row);
        }
        put("fit_window", self.fit_window.to_string());
        if let Some(t) = self.exponent_tol {
            put("exponent_tol", t.to_string());
        }
        if let Some(t) = self.direct_exponent_tol {
            put("direct_exponent_tol", t.to_string());
        }
        put("prefactor_tol", self.prefactor_tol.to_string());
        put("beta", self.beta.to_string());
        put("scf_tol", self.scf_tol.to_string());
        put("max_iter", self.max_iter.to_string());
        put(
            "blowup",
            match self.blowup {
                BlowupPolicy::Auto => "auto",
                BlowupPolicy::Never => "never",
                BlowupPolicy::Always => "always",
            }
            .to_string(),
        );
        map
    }

    /// SHA-256 of the canonical `key=value` lines.
    pub fn hash(&self) -> String {
        let mut hasher = Sha256::new();
        for (k, v) in self.echo() {
            hasher.update(k.as_bytes());
            hasher.update(b"=");
            hasher.update(v.as_bytes());
            hasher.update(b"\n");
        }
        let digest = hasher.finalize();
        let mut hex = String::with_capacity(64);
        for byte in digest {
            let _ = write!(hex, "{byte:02x}");
        }
        hex
    }
}
