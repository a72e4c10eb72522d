//! `key = value` run configuration.
//!
//! Precedence, lowest first: built-in defaults, the config file, `--set`
//! overrides, dedicated flags.

use std::fmt::Write as _;
use std::path::PathBuf;
use std::str::FromStr;

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Algorithm {
    Pl,
    Spl,
    SvrPl,
    SarahPl,
}

impl FromStr for Algorithm {
    type Err = CliError;
    fn from_str(s: &str) -> Result<Self, CliError> {
        match s {
            "pl" => Ok(Algorithm::Pl),
            "spl" => Ok(Algorithm::Spl),
            "svrpl" => Ok(Algorithm::SvrPl),
            "sarahpl" => Ok(Algorithm::SarahPl),
            _ => Err(CliError::Usage(format!("unknown algorithm {s:?} (pl, spl, svrpl, sarahpl)"))),
        }
    }
}

impl Algorithm {
    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Pl => "pl",
            Algorithm::Spl => "spl",
            Algorithm::SvrPl => "svrpl",
            Algorithm::SarahPl => "sarahpl",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScheduleMode {
    Manual,
    SvrgFinite,
    MiniBatch,
    SarahExpectNonsmooth,
    SarahFiniteSmooth,
    SarahExpectSmooth,
    Adaptive,
}

const SCHEDULE_NAMES: [(&str, ScheduleMode); 7] = [
    ("manual", ScheduleMode::Manual),
    ("svrg-finite", ScheduleMode::SvrgFinite),
    ("minibatch", ScheduleMode::MiniBatch),
    ("sarah-expect-nonsmooth", ScheduleMode::SarahExpectNonsmooth),
    ("sarah-finite-smooth", ScheduleMode::SarahFiniteSmooth),
    ("sarah-expect-smooth", ScheduleMode::SarahExpectSmooth),
    ("adaptive", ScheduleMode::Adaptive),
];

impl FromStr for ScheduleMode {
    type Err = CliError;
    fn from_str(s: &str) -> Result<Self, CliError> {
        SCHEDULE_NAMES
            .iter()
            .find(|(n, _)| *n == s)
            .map(|(_, m)| *m)
            .ok_or_else(|| CliError::Usage(format!("unknown schedule {s:?}")))
    }
}

impl ScheduleMode {
    pub fn name(self) -> &'static str {
        SCHEDULE_NAMES.iter().find(|(_, m)| *m == self).map(|(n, _)| *n).expect("every mode is listed")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub problem: String,
    pub data: Option<PathBuf>,
    pub samples: Option<usize>,
    pub data_seed: u64,
    /// Multiplies libsvm feature values; defaults to pixel scaling `1/255`.
    pub feature_scale: f64,
    /// Raw labels mapped to `+1` and `-1`; other rows are dropped.
    pub labels: Option<(f64, f64)>,
    pub skip_header: bool,
    pub beta: Option<f64>,
    pub rho: Option<f64>,
    pub gamma: Option<f64>,
    pub cvar_beta: Option<f64>,
    pub sigma_g: Option<f64>,
    pub sigma_jac: Option<f64>,

    pub algorithm: Algorithm,
    pub schedule: ScheduleMode,
    pub penalty: Option<f64>,
    pub epochs: Option<usize>,
    pub tau: Option<usize>,
    pub iterations: Option<usize>,
    pub anchor_g: Option<usize>,
    pub anchor_j: Option<usize>,
    pub inner_g: Option<usize>,
    pub inner_j: Option<usize>,
    pub shared: bool,
    pub epsilon: Option<f64>,
    /// Estimate of `Φ(x₀) - Φ*` for gap-based horizons.
    pub gap: Option<f64>,
    pub solver_tol: f64,
    pub solver_max_iters: usize,

    pub seed: u64,
    pub repeats: usize,
    pub stride: usize,
    pub out: PathBuf,
    pub timing: bool,
    pub m_grid: Vec<f64>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            problem: "quadratic-rows".into(),
            data: None,
            samples: None,
            data_seed: 0,
            feature_scale: 1.0 / 255.0,
            labels: None,
            skip_header: false,
            beta: None,
            rho: None,
            gamma: None,
            cvar_beta: None,
            sigma_g: None,
            sigma_jac: None,
            algorithm: Algorithm::SvrPl,
            schedule: ScheduleMode::Manual,
            penalty: None,
            epochs: None,
            tau: None,
            iterations: None,
            anchor_g: None,
            anchor_j: None,
            inner_g: None,
            inner_j: None,
            shared: false,
            epsilon: None,
            gap: None,
            solver_tol: 1e-9,
            solver_max_iters: 100_000,
            seed: 0,
            repeats: 1,
            stride: 1,
            out: PathBuf::from("trace.csv"),
            timing: false,
            m_grid: Vec::new(),
        }
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T, CliError> {
    value.parse().map_err(|_| CliError::Usage(format!("bad value {value:?} for {key}")))
}

fn parse_bool(key: &str, value: &str) -> Result<bool, CliError> {
    match value {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(CliError::Usage(format!("bad value {value:?} for {key}, expected true or false"))),
    }
}

fn parse_list(key: &str, value: &str) -> Result<Vec<f64>, CliError> {
    value.split(',').map(|v| parse(key, v.trim())).collect()
}

impl RunConfig {
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), CliError> {
        let v = value.trim();
        match key.trim() {
            "problem" => self.problem = v.to_string(),
            "data" => self.data = Some(PathBuf::from(v)),
            "samples" => self.samples = Some(parse(key, v)?),
            "data_seed" => self.data_seed = parse(key, v)?,
            "feature_scale" => self.feature_scale = parse(key, v)?,
            "labels" => {
                let l = parse_list(key, v)?;
                if l.len() != 2 {
                    return Err(CliError::Usage("labels needs two values, e.g. 3,8".into()));
                }
                self.labels = Some((l[0], l[1]));
            }
            "skip_header" => self.skip_header = parse_bool(key, v)?,
            "beta" => self.beta = Some(parse(key, v)?),
            "rho" => self.rho = Some(parse(key, v)?),
            "gamma" => self.gamma = Some(parse(key, v)?),
            "cvar_beta" => self.cvar_beta = Some(parse(key, v)?),
            "sigma_g" => self.sigma_g = Some(parse(key, v)?),
            "sigma_jac" => self.sigma_jac = Some(parse(key, v)?),
            "algorithm" => self.algorithm = v.parse()?,
            "schedule" => self.schedule = v.parse()?,
            "M" => self.penalty = Some(parse(key, v)?),
            "K" => self.epochs = Some(parse(key, v)?),
            "tau" => self.tau = Some(parse(key, v)?),
            "iterations" => self.iterations = Some(parse(key, v)?),
            "anchor_g" => self.anchor_g = Some(parse(key, v)?),
            "anchor_j" => self.anchor_j = Some(parse(key, v)?),
            "inner_g" => self.inner_g = Some(parse(key, v)?),
            "inner_j" => self.inner_j = Some(parse(key, v)?),
            "shared" => self.shared = parse_bool(key, v)?,
            "epsilon" => self.epsilon = Some(parse(key, v)?),
            "gap" => self.gap = Some(parse(key, v)?),
            "solver_tol" => self.solver_tol = parse(key, v)?,
            "solver_max_iters" => self.solver_max_iters = parse(key, v)?,
            "seed" => self.seed = parse(key, v)?,
            "repeats" => self.repeats = parse(key, v)?,
            "stride" => self.stride = parse(key, v)?,
            "out" => self.out = PathBuf::from(v),
            "timing" => self.timing = parse_bool(key, v)?,
            "m_grid" => self.m_grid = parse_list(key, v)?,
            other => return Err(CliError::Usage(format!("unknown config key {other:?}"))),
        }
        Ok(())
    }

    /// Applies `key = value` lines. `#` starts a comment.
    pub fn apply_text(&mut self, text: &str) -> Result<(), CliError> {
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| CliError::Usage(format!("config line {}: expected key = value", i + 1)))?;
            self.set(k, v).map_err(|e| CliError::Usage(format!("config line {}: {e}", i + 1)))?;
        }
        Ok(())
    }

    pub fn parse_text(text: &str) -> Result<Self, CliError> {
        let mut c = RunConfig::default();
        c.apply_text(text)?;
        Ok(c)
    }

    /// Every field as `key = value`; optional fields only when set.
    pub fn serialize(&self) -> String {
        let mut s = String::new();
        let mut put = |k: &str, v: String| {
            let _ = writeln!(s, "{k} = {v}");
        };
        let path = |p: &PathBuf| p.to_string_lossy().into_owned();
        let list = |l: &[f64]| l.iter().map(|v| format!("{v:?}")).collect::<Vec<_>>().join(",");
        put("problem", self.problem.clone());
        if let Some(d) = &self.data {
            put("data", path(d));
        }
        if let Some(v) = self.samples {
            put("samples", v.to_string());
        }
        put("data_seed", self.data_seed.to_string());
        put("feature_scale", format!("{:?}", self.feature_scale));
        if let Some((a, b)) = self.labels {
            put("labels", list(&[a, b]));
        }
        put("skip_header", self.skip_header.to_string());
        for (k, v) in [
            ("beta", self.beta),
            ("rho", self.rho),
            ("gamma", self.gamma),
            ("cvar_beta", self.cvar_beta),
            ("sigma_g", self.sigma_g),
            ("sigma_jac", self.sigma_jac),
        ] {
            if let Some(v) = v {
                put(k, format!("{v:?}"));
            }
        }
        put("algorithm", self.algorithm.name().into());
        put("schedule", self.schedule.name().into());
        if let Some(v) = self.penalty {
            put("M", format!("{v:?}"));
        }
        for (k, v) in [
            ("K", self.epochs),
            ("tau", self.tau),
            ("iterations", self.iterations),
            ("anchor_g", self.anchor_g),
            ("anchor_j", self.anchor_j),
            ("inner_g", self.inner_g),
            ("inner_j", self.inner_j),
        ] {
            if let Some(v) = v {
                put(k, v.to_string());
            }
        }
        put("shared", self.shared.to_string());
        if let Some(v) = self.epsilon {
            put("epsilon", format!("{v:?}"));
        }
        if let Some(v) = self.gap {
            put("gap", format!("{v:?}"));
        }
        put("solver_tol", format!("{:?}", self.solver_tol));
        put("solver_max_iters", self.solver_max_iters.to_string());
        put("seed", self.seed.to_string());
        put("repeats", self.repeats.to_string());
        put("stride", self.stride.to_string());
        put("out", path(&self.out));
        put("timing", self.timing.to_string());
        if !self.m_grid.is_empty() {
            put("m_grid", list(&self.m_grid));
        }
        s
    }
}
