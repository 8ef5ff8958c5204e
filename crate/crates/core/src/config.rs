//! JSON run configuration. Everything is validated up front by
//! [`RunConfig::validate`]; computations only see checked values.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::oracle::GridSpec;
use crate::pps::{GaussianPointer, Observable, PpsPair};
use crate::qubit::{qubit_pps, BlochAngles};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Model {
    Generic,
    Qubit,
    SternGerlach,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AngleUnit {
    #[default]
    Rad,
    Deg,
}

impl AngleUnit {
    fn to_rad(self, x: f64) -> f64 {
        match self {
            AngleUnit::Rad => x,
            AngleUnit::Deg => x.to_radians(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AngleSpec {
    pub theta: f64,
    pub phi: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", deny_unknown_fields)]
pub enum PpsSpec {
    /// Complex amplitudes as `[re, im]` pairs; normalized on load.
    Amplitudes {
        pre: Vec<[f64; 2]>,
        post: Vec<[f64; 2]>,
    },
    /// Bloch angles. The Stern–Gerlach model takes only `pre`.
    Bloch {
        #[serde(default)]
        unit: AngleUnit,
        pre: AngleSpec,
        #[serde(default)]
        post: Option<AngleSpec>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Spacing {
    #[default]
    Log,
    Linear,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GRange {
    pub min: f64,
    pub max: f64,
    pub steps: usize,
    #[serde(default)]
    pub spacing: Spacing,
}

impl GRange {
    pub fn values(&self) -> Vec<f64> {
        if self.steps == 1 {
            return vec![self.min];
        }
        let last = (self.steps - 1) as f64;
        (0..self.steps)
            .map(|i| {
                if i + 1 == self.steps {
                    return self.max;
                }
                let t = i as f64 / last;
                match self.spacing {
                    Spacing::Linear => self.min + t * (self.max - self.min),
                    Spacing::Log => (self.min.ln() + t * (self.max / self.min).ln()).exp(),
                }
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScanSpec {
    /// Nodes on `[0, π]`, both ends included.
    pub theta_steps: usize,
    /// Nodes on `[0, 2π)`.
    pub phi_steps: usize,
}

impl Default for ScanSpec {
    fn default() -> Self {
        Self {
            theta_steps: 181,
            phi_steps: 360,
        }
    }
}

impl ScanSpec {
    /// Grid with the given angular spacing in degrees.
    pub fn with_resolution_deg(step: f64) -> Self {
        Self {
            theta_steps: (180.0 / step).round() as usize + 1,
            phi_steps: (360.0 / step).round() as usize,
        }
    }

    pub fn thetas(&self) -> Vec<f64> {
        let last = (self.theta_steps - 1) as f64;
        (0..self.theta_steps)
            .map(|i| {
                if i + 1 == self.theta_steps {
                    PI
                } else {
                    PI * i as f64 / last
                }
            })
            .collect()
    }

    pub fn phis(&self) -> Vec<f64> {
        (0..self.phi_steps)
            .map(|j| 2.0 * PI * j as f64 / self.phi_steps as f64)
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSpec {
    pub path: Option<PathBuf>,
    pub format: Format,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub model: Model,
    /// Eigenvalues of the measured observable.
    pub observable: Option<Vec<f64>>,
    pub pps: Option<PpsSpec>,
    pub delta: f64,
    pub g: Option<f64>,
    pub g_range: Option<GRange>,
    pub scan: ScanSpec,
    pub grid: GridSpec,
    /// Repetition count for the SNR and MS figures.
    pub n: u32,
    pub output: OutputSpec,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            model: Model::SternGerlach,
            observable: None,
            pps: None,
            delta: 1.0,
            g: Some(0.01),
            g_range: None,
            scan: ScanSpec::default(),
            grid: GridSpec::default(),
            n: 1,
            output: OutputSpec::default(),
        }
    }
}

fn field(name: &str, msg: impl std::fmt::Display) -> Error {
    Error::invalid(format!("config field `{name}`: {msg}"))
}

fn finite_positive(name: &str, v: f64) -> Result<()> {
    if !(v > 0.0) || !v.is_finite() {
        return Err(field(
            name,
            format!("must be a positive finite number, got {v}"),
        ));
    }
    Ok(())
}

/// A fully resolved system: observable, state pair and pointer.
#[derive(Debug, Clone)]
pub struct System {
    pub obs: Observable,
    pub pps: PpsPair,
    pub pointer: GaussianPointer,
}

/// Preselected Bloch angles for the Stern–Gerlach model.
#[derive(Debug, Clone, Copy)]
pub struct SgState {
    pub theta: f64,
    pub phi: f64,
}

impl RunConfig {
    /// Parses JSON text. Syntax and unknown-field errors carry line and column.
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: RunConfig =
            serde_json::from_str(text).map_err(|e| Error::invalid(format!("config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::invalid(format!("cannot read config {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<()> {
        finite_positive("delta", self.delta)?;
        if let Some(g) = self.g {
            if !g.is_finite() || g < 0.0 {
                return Err(field(
                    "g",
                    format!("must be finite and non-negative, got {g}"),
                ));
            }
        }
        if let Some(r) = &self.g_range {
            finite_positive("g_range.min", r.min)?;
            finite_positive("g_range.max", r.max)?;
            if r.max < r.min {
                return Err(field("g_range", "max must not be below min"));
            }
            if r.steps == 0 {
                return Err(field("g_range.steps", "must be at least 1"));
            }
        }
        if self.scan.theta_steps < 2 {
            return Err(field("scan.theta_steps", "must be at least 2"));
        }
        if self.scan.phi_steps < 1 {
            return Err(field("scan.phi_steps", "must be at least 1"));
        }
        self.grid.validate().map_err(|e| field("grid", e))?;
        if self.n == 0 {
            return Err(field("n", "must be at least 1"));
        }

        if let Some(obs) = &self.observable {
            Observable::new(obs.clone()).map_err(|e| field("observable", e))?;
        }
        let dim = self.observable.as_ref().map(Vec::len);
        match self.model {
            Model::Qubit if dim.is_some_and(|d| d != 2) => {
                return Err(field(
                    "observable",
                    "qubit model needs exactly two eigenvalues",
                ));
            }
            Model::SternGerlach if self.observable.as_ref().is_some_and(|o| o != &[1.0, -1.0]) => {
                return Err(field(
                    "observable",
                    "Stern–Gerlach model fixes the observable to [1, -1]",
                ));
            }
            _ => {}
        }
        match &self.pps {
            None => {}
            Some(PpsSpec::Amplitudes { pre, post }) => {
                if self.model == Model::SternGerlach {
                    return Err(field("pps", "Stern–Gerlach model takes Bloch angles"));
                }
                if pre.len() != post.len() {
                    return Err(field(
                        "pps",
                        format!("pre has {} amplitudes, post has {}", pre.len(), post.len()),
                    ));
                }
                if let Some(d) = dim {
                    if d != pre.len() {
                        return Err(field(
                            "pps",
                            format!("observable has {d} eigenvalues, states have {}", pre.len()),
                        ));
                    }
                }
                PpsPair::normalized(to_complex(pre), to_complex(post))
                    .map_err(|e| field("pps", e))?;
            }
            Some(PpsSpec::Bloch { unit, pre, post }) => {
                if dim.is_some_and(|d| d != 2) {
                    return Err(field("pps", "Bloch angles need a two-level observable"));
                }
                if self.model == Model::SternGerlach {
                    if post.is_some() {
                        return Err(field(
                            "pps.post",
                            "Stern–Gerlach postselection is fixed along +x",
                        ));
                    }
                } else if post.is_none() {
                    return Err(field("pps.post", "required for this model"));
                }
                bloch(*unit, pre).map_err(|e| field("pps.pre", e))?;
                if let Some(p) = post {
                    bloch(*unit, p).map_err(|e| field("pps.post", e))?;
                }
            }
        }
        Ok(())
    }

    pub fn pointer(&self) -> Result<GaussianPointer> {
        GaussianPointer::new(self.delta)
    }

    /// Single coupling value, required by point evaluations.
    pub fn coupling(&self) -> Result<f64> {
        self.g
            .ok_or_else(|| field("g", "required for this command"))
    }

    /// Coupling values for a sweep: `g_range` if present, else the single `g`.
    pub fn couplings(&self) -> Result<Vec<f64>> {
        match (&self.g_range, self.g) {
            (Some(r), _) => Ok(r.values()),
            (None, Some(g)) => Ok(vec![g]),
            (None, None) => Err(field("g_range", "required for this command")),
        }
    }

    /// Two-level eigenvalues `(a1, a2)` with `[1, -1]` as default.
    pub fn qubit_eigenvalues(&self) -> Result<(f64, f64)> {
        match self.observable.as_deref() {
            None => Ok((1.0, -1.0)),
            Some([a1, a2]) => Ok((*a1, *a2)),
            Some(o) => Err(field(
                "observable",
                format!("expected two eigenvalues, got {}", o.len()),
            )),
        }
    }

    pub fn system(&self) -> Result<System> {
        let pointer = self.pointer()?;
        let pps_spec = self
            .pps
            .as_ref()
            .ok_or_else(|| field("pps", "required for this command"))?;
        let (obs, pps) = match (self.model, pps_spec) {
            (Model::SternGerlach, PpsSpec::Bloch { unit, pre, .. }) => {
                let pre = bloch(*unit, pre)?;
                let post = BlochAngles::new(PI / 2.0, 0.0)?;
                (Observable::new(vec![1.0, -1.0])?, qubit_pps(pre, post))
            }
            (_, PpsSpec::Bloch { unit, pre, post }) => {
                let (a1, a2) = self.qubit_eigenvalues()?;
                let post = post.as_ref().ok_or_else(|| field("pps.post", "required"))?;
                (
                    Observable::new(vec![a1, a2])?,
                    qubit_pps(bloch(*unit, pre)?, bloch(*unit, post)?),
                )
            }
            (_, PpsSpec::Amplitudes { pre, post }) => {
                let obs = self
                    .observable
                    .clone()
                    .ok_or_else(|| field("observable", "required with amplitude states"))?;
                (
                    Observable::new(obs)?,
                    PpsPair::normalized(to_complex(pre), to_complex(post))?,
                )
            }
        };
        Ok(System { obs, pps, pointer })
    }

    /// Pre/post Bloch angles when both are configured.
    pub fn bloch_pair(&self) -> Option<(BlochAngles, BlochAngles)> {
        match &self.pps {
            Some(PpsSpec::Bloch {
                unit,
                pre,
                post: Some(post),
            }) => Some((bloch(*unit, pre).ok()?, bloch(*unit, post).ok()?)),
            _ => None,
        }
    }

    /// Preselected angles when the model is Stern–Gerlach.
    pub fn sg_state(&self) -> Result<SgState> {
        match (&self.model, &self.pps) {
            (Model::SternGerlach, Some(PpsSpec::Bloch { unit, pre, .. })) => {
                let a = bloch(*unit, pre)?;
                Ok(SgState {
                    theta: a.theta,
                    phi: a.phi,
                })
            }
            _ => Err(field(
                "pps",
                "Stern–Gerlach model with Bloch angles required",
            )),
        }
    }
}

fn to_complex(v: &[[f64; 2]]) -> Vec<Complex64> {
    v.iter().map(|[re, im]| Complex64::new(*re, *im)).collect()
}

fn bloch(unit: AngleUnit, a: &AngleSpec) -> Result<BlochAngles> {
    BlochAngles::wrapped(unit.to_rad(a.theta), unit.to_rad(a.phi))
}
