//! Flat key=value configuration files.
//!
//! A config file must contain exactly the solver keys plus the three
//! segmentation keys, each once; unknown keys are rejected so typos in
//! trained-parameter files fail loudly. `#` starts a comment.

use std::collections::BTreeMap;
use std::path::Path;

use crate::error::{Error, Result};
use crate::segment::MorphologyConfig;
use crate::solver::SolverConfig;

pub const CONFIG_KEYS: [&str; 14] = [
    "mu1",
    "c",
    "beta1",
    "beta2",
    "beta3",
    "gamma",
    "iterations",
    "alpha",
    "scales",
    "angles_scale2",
    "pad",
    "s",
    "t",
    "b",
];

#[derive(Debug, Clone, PartialEq)]
pub struct FullConfig {
    pub solver: SolverConfig,
    pub morph: MorphologyConfig,
}

impl Default for FullConfig {
    fn default() -> Self {
        Self {
            solver: SolverConfig::default(),
            morph: MorphologyConfig::default(),
        }
    }
}

impl FullConfig {
    /// Serializes in the canonical key order; `parse` inverts this.
    pub fn to_text(&self) -> String {
        let s = &self.solver;
        let m = &self.morph;
        format!(
            "mu1={}\nc={}\nbeta1={}\nbeta2={}\nbeta3={}\ngamma={}\niterations={}\nalpha={}\nscales={}\nangles_scale2={}\npad={}\ns={}\nt={}\nb={}\n",
            s.mu1, s.c, s.beta1, s.beta2, s.beta3, s.gamma, s.iterations, s.alpha,
            s.scales, s.angles_scale2, s.pad, m.s, m.t, m.b
        )
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut seen: BTreeMap<&str, String> = BTreeMap::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(Error::Config(format!(
                    "line {}: expected key=value, got '{raw}'",
                    lineno + 1
                )));
            };
            let key = key.trim();
            let value = value.trim();
            let Some(&canon) = CONFIG_KEYS.iter().find(|&&k| k == key) else {
                return Err(Error::Config(format!("unknown config key '{key}'")));
            };
            if seen.insert(canon, value.to_string()).is_some() {
                return Err(Error::Config(format!("duplicate config key '{key}'")));
            }
        }
        for &key in &CONFIG_KEYS {
            if !seen.contains_key(key) {
                return Err(Error::Config(format!("missing config key '{key}'")));
            }
        }
        let mut cfg = FullConfig::default();
        for (key, value) in &seen {
            apply_value(&mut cfg, key, value)?;
        }
        cfg.solver.validate()?;
        cfg.morph.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    /// Applies one `key=value` override; the key must be a known config key.
    pub fn apply_override(&mut self, spec: &str) -> Result<()> {
        let Some((key, value)) = spec.split_once('=') else {
            return Err(Error::Config(format!(
                "override must look like key=value, got '{spec}'"
            )));
        };
        let key = key.trim();
        if !CONFIG_KEYS.contains(&key) {
            return Err(Error::Config(format!("unknown config key '{key}'")));
        }
        apply_value(self, key, value.trim())?;
        self.solver.validate()?;
        self.morph.validate()
    }
}

fn apply_value(cfg: &mut FullConfig, key: &str, value: &str) -> Result<()> {
    let bad = |what: &str| Error::Config(format!("key '{key}': cannot parse '{value}' as {what}"));
    let float = |target: &mut f64| -> Result<()> {
        *target = value.parse().map_err(|_| bad("a number"))?;
        Ok(())
    };
    match key {
        "mu1" => float(&mut cfg.solver.mu1),
        "c" => float(&mut cfg.solver.c),
        "beta1" => float(&mut cfg.solver.beta1),
        "beta2" => float(&mut cfg.solver.beta2),
        "beta3" => float(&mut cfg.solver.beta3),
        "gamma" => float(&mut cfg.solver.gamma),
        "alpha" => float(&mut cfg.solver.alpha),
        "iterations" => {
            cfg.solver.iterations = value.parse().map_err(|_| bad("an integer"))?;
            Ok(())
        }
        "scales" => {
            cfg.solver.scales = value.parse().map_err(|_| bad("an integer"))?;
            Ok(())
        }
        "angles_scale2" => {
            cfg.solver.angles_scale2 = value.parse().map_err(|_| bad("an integer"))?;
            Ok(())
        }
        "pad" => {
            cfg.solver.pad = value.parse().map_err(|_| bad("an integer"))?;
            Ok(())
        }
        "s" => {
            cfg.morph.s = value.parse().map_err(|_| bad("an integer"))?;
            Ok(())
        }
        "t" => {
            cfg.morph.t = value.parse().map_err(|_| bad("an integer"))?;
            Ok(())
        }
        "b" => {
            cfg.morph.b = value.parse().map_err(|_| bad("an integer"))?;
            Ok(())
        }
        _ => unreachable!("key validated by caller"),
    }
}
