//! Pipeline configuration as flat `key = value` text.

use std::collections::BTreeMap;
use std::path::Path;
use std::str::FromStr;

use crate::evaluation::EvalConfig;
use crate::fusion::{CoTransductionConfig, GateOrientation};
use crate::graph::PropagationConfig;
use crate::objectness::{ObjectnessConfig, DEFAULT_MS_SCALES};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Smoother {
    L0,
    None,
}

impl FromStr for Smoother {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "l0" => Ok(Smoother::L0),
            "none" => Ok(Smoother::None),
            other => Err(format!("`{other}` is not one of l0, none")),
        }
    }
}

impl std::fmt::Display for Smoother {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Smoother::L0 => "l0",
            Smoother::None => "none",
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PipelineConfig {
    pub sigma_c2: f64,
    pub drop_frac: f64,
    pub n_target: usize,
    pub slic_compactness: f64,
    pub smoother: Smoother,
    pub l0_lambda: f64,
    pub l0_kappa: f64,
    pub thres: f64,
    /// Variance window length minus one.
    pub r#const: usize,
    pub max_iters: usize,
    /// Sampled objectness windows.
    pub m: usize,
    pub gamma1: f64,
    pub gamma2: f64,
    pub gate_invert: bool,
    pub p1: usize,
    pub p2: usize,
    pub alpha: f64,
    pub beta: f64,
    pub k_adaptive: f64,
    pub beta2: f64,
    pub k1: f64,
    pub k2: f64,
    pub seed: u64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            sigma_c2: 0.1,
            drop_frac: 0.3,
            n_target: 200,
            slic_compactness: 20.0,
            smoother: Smoother::L0,
            l0_lambda: 0.02,
            l0_kappa: 2.0,
            thres: 1e-4,
            r#const: 49,
            max_iters: 2000,
            m: 1000,
            gamma1: 0.8,
            gamma2: 1.6,
            gate_invert: false,
            p1: 2,
            p2: 150,
            alpha: 1.0,
            beta: 1.0,
            k_adaptive: 1.5,
            beta2: 0.3,
            k1: 0.2,
            k2: 0.01,
            seed: 7,
        }
    }
}

pub const KEYS: [&str; 23] = [
    "sigma_c2",
    "drop_frac",
    "n_target",
    "slic_compactness",
    "smoother",
    "l0_lambda",
    "l0_kappa",
    "thres",
    "const",
    "max_iters",
    "M",
    "gamma1",
    "gamma2",
    "gate_invert",
    "p1",
    "p2",
    "alpha",
    "beta",
    "k_adaptive",
    "beta2",
    "k1",
    "k2",
    "seed",
];

fn parse<T: FromStr>(key: &str, value: &str, what: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::invalid(key, format!("`{value}` is not {what}")))
}

impl PipelineConfig {
    /// Sets one key from its text value, without range checks.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let v = value.trim();
        let real = |k: &str| parse::<f64>(k, v, "a number");
        let count = |k: &str| parse::<usize>(k, v, "a non-negative integer");
        match key {
            "sigma_c2" => self.sigma_c2 = real(key)?,
            "drop_frac" => self.drop_frac = real(key)?,
            "n_target" => self.n_target = count(key)?,
            "slic_compactness" => self.slic_compactness = real(key)?,
            "smoother" => self.smoother = v.parse().map_err(|e: String| Error::invalid(key, e))?,
            "l0_lambda" => self.l0_lambda = real(key)?,
            "l0_kappa" => self.l0_kappa = real(key)?,
            "thres" => self.thres = real(key)?,
            "const" => self.r#const = count(key)?,
            "max_iters" => self.max_iters = count(key)?,
            "M" => self.m = count(key)?,
            "gamma1" => self.gamma1 = real(key)?,
            "gamma2" => self.gamma2 = real(key)?,
            "gate_invert" => self.gate_invert = parse(key, v, "true or false")?,
            "p1" => self.p1 = count(key)?,
            "p2" => self.p2 = count(key)?,
            "alpha" => self.alpha = real(key)?,
            "beta" => self.beta = real(key)?,
            "k_adaptive" => self.k_adaptive = real(key)?,
            "beta2" => self.beta2 = real(key)?,
            "k1" => self.k1 = real(key)?,
            "k2" => self.k2 = real(key)?,
            "seed" => self.seed = parse(key, v, "a non-negative integer")?,
            other => return Err(Error::UnknownKey(other.to_string())),
        }
        Ok(())
    }

    pub fn get(&self, key: &str) -> Option<String> {
        Some(match key {
            "sigma_c2" => self.sigma_c2.to_string(),
            "drop_frac" => self.drop_frac.to_string(),
            "n_target" => self.n_target.to_string(),
            "slic_compactness" => self.slic_compactness.to_string(),
            "smoother" => self.smoother.to_string(),
            "l0_lambda" => self.l0_lambda.to_string(),
            "l0_kappa" => self.l0_kappa.to_string(),
            "thres" => self.thres.to_string(),
            "const" => self.r#const.to_string(),
            "max_iters" => self.max_iters.to_string(),
            "M" => self.m.to_string(),
            "gamma1" => self.gamma1.to_string(),
            "gamma2" => self.gamma2.to_string(),
            "gate_invert" => self.gate_invert.to_string(),
            "p1" => self.p1.to_string(),
            "p2" => self.p2.to_string(),
            "alpha" => self.alpha.to_string(),
            "beta" => self.beta.to_string(),
            "k_adaptive" => self.k_adaptive.to_string(),
            "beta2" => self.beta2.to_string(),
            "k1" => self.k1.to_string(),
            "k2" => self.k2.to_string(),
            "seed" => self.seed.to_string(),
            _ => return None,
        })
    }

    /// Range checks; errors name the offending key.
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("sigma_c2", self.sigma_c2),
            ("slic_compactness", self.slic_compactness),
            ("thres", self.thres),
            ("alpha", self.alpha),
            ("beta", self.beta),
            ("k_adaptive", self.k_adaptive),
            ("beta2", self.beta2),
        ];
        for (key, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::invalid(key, format!("{v} must be > 0")));
            }
        }
        for (key, v) in [("l0_lambda", self.l0_lambda), ("gamma2", self.gamma2), ("k1", self.k1), ("k2", self.k2)] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::invalid(key, format!("{v} must be >= 0")));
            }
        }
        if !(0.0..1.0).contains(&self.drop_frac) {
            return Err(Error::invalid("drop_frac", format!("{} must be in [0, 1)", self.drop_frac)));
        }
        if !(0.0..=1.0).contains(&self.gamma1) {
            return Err(Error::invalid("gamma1", format!("{} must be in [0, 1]", self.gamma1)));
        }
        if !(self.l0_kappa.is_finite() && self.l0_kappa > 1.0) {
            return Err(Error::invalid("l0_kappa", format!("{} must be > 1", self.l0_kappa)));
        }
        if self.n_target < 4 {
            return Err(Error::invalid("n_target", format!("{} must be >= 4", self.n_target)));
        }
        if self.m < 1 {
            return Err(Error::invalid("M", "must be >= 1"));
        }
        self.propagation().validate()?;
        self.cotransduction().validate()
    }

    pub fn propagation(&self) -> PropagationConfig {
        PropagationConfig {
            thres: self.thres,
            window: self.r#const,
            max_iters: self.max_iters,
        }
    }

    pub fn cotransduction(&self) -> CoTransductionConfig {
        CoTransductionConfig {
            propagation: self.propagation(),
            p1: self.p1,
            p2: self.p2,
            alpha: self.alpha,
            beta: self.beta,
        }
    }

    pub fn objectness(&self) -> ObjectnessConfig {
        ObjectnessConfig {
            windows: self.m,
            seed: self.seed,
            gamma1: self.gamma1,
            scales: DEFAULT_MS_SCALES.to_vec(),
        }
    }

    pub fn evaluation(&self) -> EvalConfig {
        EvalConfig {
            k_adaptive: self.k_adaptive,
            beta2: self.beta2,
        }
    }

    pub fn gate(&self) -> GateOrientation {
        if self.gate_invert {
            GateOrientation::Below
        } else {
            GateOrientation::AtLeast
        }
    }

    /// Applies `key = value` lines over the current values. Blank lines and
    /// `#` comments are skipped.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| Error::ConfigSyntax {
                line: i + 1,
                reason: format!("expected key = value, got `{line}`"),
            })?;
            self.set(key.trim(), value)?;
        }
        Ok(())
    }

    pub fn parse_text(text: &str) -> Result<Self> {
        let mut cfg = PipelineConfig::default();
        cfg.apply_text(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Defaults, then the file (if any), then `key=value` overrides.
    pub fn load(path: Option<&Path>, overrides: &[String]) -> Result<Self> {
        let mut cfg = PipelineConfig::default();
        if let Some(p) = path {
            let text = std::fs::read_to_string(p).map_err(|source| Error::Io {
                path: p.to_path_buf(),
                source,
            })?;
            cfg.apply_text(&text)?;
        }
        for o in overrides {
            let (k, v) = o.split_once('=').ok_or_else(|| Error::ConfigSyntax {
                line: 0,
                reason: format!("override `{o}` is not key=value"),
            })?;
            cfg.set(k.trim(), v)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_map(&self) -> BTreeMap<String, String> {
        KEYS.iter()
            .map(|&k| (k.to_string(), self.get(k).expect("every listed key is readable")))
            .collect()
    }

    pub fn from_map(map: &BTreeMap<String, String>) -> Result<Self> {
        let mut cfg = PipelineConfig::default();
        for (k, v) in map {
            cfg.set(k, v)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// Every key on its own line, in a fixed order.
    pub fn to_text(&self) -> String {
        KEYS.iter()
            .map(|&k| format!("{k} = {}\n", self.get(k).expect("every listed key is readable")))
            .collect()
    }
}
