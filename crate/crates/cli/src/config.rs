//! Experiment configuration, read from TOML or JSON.

use std::fmt;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use hardi_recon::dictionary::RidgeletSpec;
use hardi_recon::io::fmt_f64;
use hardi_recon::phantom::phantom_by_name;
use hardi_recon::solver::SolverParams;

use crate::pipeline::{AnalysisParams, DictChoice, SolverMode};

/// Largest number of acquisition directions a configuration may request
/// without an explicit subset pool (the size of the reference sphere).
pub const DIRECTION_BUDGET: usize = 642;

/// A signal-to-noise ratio in dB; `inf` means noise-free.
#[derive(Clone, Copy, Debug, PartialEq, PartialOrd)]
pub struct Snr(pub f64);

impl Snr {
    pub fn db(self) -> f64 {
        self.0
    }
}

impl fmt::Display for Snr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&fmt_f64(self.0))
    }
}

impl std::str::FromStr for Snr {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> anyhow::Result<Self> {
        let t = s.trim().to_ascii_lowercase();
        if t == "inf" || t == "+inf" || t == "infinity" {
            return Ok(Snr(f64::INFINITY));
        }
        let v: f64 = t.parse().with_context(|| format!("invalid SNR '{s}'"))?;
        if !v.is_finite() {
            bail!("SNR must be finite or 'inf', got '{s}'");
        }
        Ok(Snr(v))
    }
}

impl Serialize for Snr {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        if self.0.is_finite() {
            s.serialize_f64(self.0)
        } else {
            s.serialize_str("inf")
        }
    }
}

impl<'de> Deserialize<'de> for Snr {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(v) if v == f64::INFINITY => Ok(Snr(v)),
            Raw::Num(v) if v.is_finite() => Ok(Snr(v)),
            Raw::Num(v) => Err(serde::de::Error::custom(format!("SNR {v} is not allowed"))),
            Raw::Text(t) => t.parse().map_err(serde::de::Error::custom),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub phantoms: Vec<String>,
    pub b_values: Vec<f64>,
    pub k_values: Vec<usize>,
    pub snr_db: Vec<Snr>,
    pub dictionaries: Vec<DictChoice>,
    pub modes: Vec<SolverMode>,
    pub seeds: Vec<u64>,
    pub solver: SolverParams,
    pub analysis: AnalysisParams,
    pub ridgelet: RidgeletSpec,
    /// TV-denoise the data before voxel-wise sparse coding (cs mode only).
    pub prefilter_tv: bool,
    /// When set, each K directions are a greedy subset of a spiral of this size.
    pub subset_pool: Option<usize>,
    pub out_dir: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            phantoms: vec!["phantom1".into()],
            b_values: vec![3000.0],
            k_values: vec![16],
            snr_db: vec![Snr(18.0)],
            dictionaries: vec![DictChoice::Rdg],
            modes: vec![SolverMode::Cs, SolverMode::Tv],
            seeds: vec![0],
            solver: SolverParams::default(),
            analysis: AnalysisParams::default(),
            ridgelet: RidgeletSpec::default(),
            prefilter_tv: false,
            subset_pool: None,
            out_dir: None,
        }
    }
}

/// One point of the experiment grid.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Cell {
    pub phantom: String,
    pub b: f64,
    pub k: usize,
    pub snr: Snr,
    pub dictionary: DictChoice,
    pub mode: SolverMode,
    pub seed: u64,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> anyhow::Result<Self> {
        let cfg: Self = toml::from_str(text).context("invalid TOML configuration")?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_json(text: &str) -> anyhow::Result<Self> {
        let cfg: Self = serde_json::from_str(text).context("invalid JSON configuration")?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Loads a `.toml` or `.json` file (other extensions: TOML, then JSON).
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("cannot read config {}", path.display()))?;
        let ext = path.extension().and_then(|e| e.to_str()).unwrap_or("").to_ascii_lowercase();
        let parsed = match ext.as_str() {
            "json" => Self::from_json(&text),
            "toml" => Self::from_toml(&text),
            _ => Self::from_toml(&text).or_else(|_| Self::from_json(&text)),
        };
        parsed.with_context(|| format!("in config {}", path.display()))
    }

    pub fn validate(&self) -> anyhow::Result<()> {
        let nonempty = [
            ("phantoms", self.phantoms.is_empty()),
            ("b_values", self.b_values.is_empty()),
            ("k_values", self.k_values.is_empty()),
            ("snr_db", self.snr_db.is_empty()),
            ("dictionaries", self.dictionaries.is_empty()),
            ("modes", self.modes.is_empty()),
            ("seeds", self.seeds.is_empty()),
        ];
        for (name, empty) in nonempty {
            if empty {
                bail!("config list '{name}' must not be empty");
            }
        }
        for p in &self.phantoms {
            phantom_by_name(p)?;
        }
        for &b in &self.b_values {
            if !(b.is_finite() && b >= 0.0) {
                bail!("b-value {b} must be finite and non-negative");
            }
        }
        let budget = self.subset_pool.unwrap_or(DIRECTION_BUDGET);
        for &k in &self.k_values {
            if k == 0 || k > budget {
                bail!("K = {k} outside the available direction budget 1..={budget}");
            }
        }
        for s in &self.snr_db {
            if s.0.is_nan() || s.0 == f64::NEG_INFINITY {
                bail!("SNR values must be finite or inf");
            }
        }
        self.solver.validate()?;
        self.ridgelet.validate()?;
        let a = &self.analysis;
        if !(a.rel_threshold > 0.0 && a.rel_threshold < 1.0) {
            bail!("analysis.rel_threshold must lie in (0, 1)");
        }
        if !(a.merge_angle_deg >= 0.0) {
            bail!("analysis.merge_angle_deg must be non-negative");
        }
        if a.tessellation_order > hardi_recon::sphere::MAX_ICOSPHERE_ORDER {
            bail!("analysis.tessellation_order is too large");
        }
        Ok(())
    }

    /// Full cross product, seeds varying fastest.
    pub fn cells(&self) -> Vec<Cell> {
        let mut out = Vec::new();
        for phantom in &self.phantoms {
            for &b in &self.b_values {
                for &k in &self.k_values {
                    for &snr in &self.snr_db {
                        for &dictionary in &self.dictionaries {
                            for &mode in &self.modes {
                                for &seed in &self.seeds {
                                    out.push(Cell {
                                        phantom: phantom.clone(),
                                        b,
                                        k,
                                        snr,
                                        dictionary,
                                        mode,
                                        seed,
                                    });
                                }
                            }
                        }
                    }
                }
            }
        }
        out
    }
}
