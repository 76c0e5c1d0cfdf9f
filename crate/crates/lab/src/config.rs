//! Experiment configuration files (JSON).

use std::path::Path;

use plap_core::exponents::ProblemParams;
use plap_core::geometry::ThetaRule;
use plap_core::probe::{ProbeMode, DEFAULT_DEPTH, DEFAULT_LAMBDA};
use plap_core::solver::{BoundaryData, Scheme, Sign, SolveConfig, SourceSpec};
use plap_core::{Extended, SpaceTimeGrid};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::LabError;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub scenario: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub params: Option<ParamsBlock>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub layers: Option<LayersBlock>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub region: Option<RegionBlock>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<GridBlock>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub solve: Option<SolveBlock>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source: Option<SourceBlock>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub probe: Option<ProbeBlock>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<String>,
    /// Only used to sample probe centres.
    #[serde(default)]
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamsBlock {
    pub p: f64,
    pub n: usize,
    pub q: Extended,
    pub r: Extended,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha_h: Option<f64>,
}

impl ParamsBlock {
    pub fn build(&self) -> Result<ProblemParams, LabError> {
        ProblemParams::new(self.p, self.n, self.q, self.r, self.alpha_h)
            .map_err(|e| LabError::Config(format!("params: {e}")))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LayersBlock {
    pub s: f64,
    pub eps: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegionBlock {
    pub resolution: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridBlock {
    pub dim: usize,
    /// One half-width per axis, or a single value for all axes.
    pub half_width: Vec<f64>,
    pub h: f64,
    pub dt: f64,
    #[serde(default)]
    pub t_start: f64,
    pub t_end: f64,
}

impl GridBlock {
    pub fn build(&self) -> Result<SpaceTimeGrid, LabError> {
        let half: Vec<f64> = match self.half_width.as_slice() {
            [w] => vec![*w; self.dim],
            ws => ws.to_vec(),
        };
        SpaceTimeGrid::new(self.dim, &half, self.h, self.dt, self.t_start, self.t_end)
            .map_err(|e| LabError::Config(format!("grid: {e}")))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialData {
    Constant { value: f64 },
    Affine { value: f64, gradient: Vec<f64> },
    /// `Π_a cos(π x_a / (2 L_a))`, zero on the boundary.
    Cosine { amplitude: f64 },
    /// `Π_a sin(π x_a)`.
    HeatMode,
    /// Source-type profile at `t_start` (needs `p > 2`, `t_start > 0`).
    Barenblatt,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum BoundaryBlock {
    HoldInitial,
    Constant { value: f64 },
    Affine { value: f64, gradient: Vec<f64> },
}

fn default_tol() -> f64 {
    1e-10
}
fn default_iters() -> usize {
    2000
}
fn one() -> usize {
    1
}
fn default_cfl() -> f64 {
    1.0
}
fn hold() -> BoundaryBlock {
    BoundaryBlock::HoldInitial
}
fn semi() -> Scheme {
    Scheme::SemiImplicit
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolveBlock {
    pub initial: InitialData,
    #[serde(default = "hold")]
    pub boundary: BoundaryBlock,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps_reg: Option<f64>,
    #[serde(default = "semi")]
    pub scheme: Scheme,
    #[serde(default = "default_tol")]
    pub newton_tol: f64,
    #[serde(default = "default_iters")]
    pub max_inner_iters: usize,
    #[serde(default = "one")]
    pub picard_sweeps: usize,
    #[serde(default = "one")]
    pub output_stride: usize,
    #[serde(default = "default_cfl")]
    pub cfl: f64,
}

fn point3(v: &[f64], what: &str) -> Result<[f64; 3], LabError> {
    if v.len() > 3 {
        return Err(LabError::Config(format!("{what}: at most 3 components")));
    }
    let mut out = [0.0; 3];
    out[..v.len()].copy_from_slice(v);
    Ok(out)
}

impl SolveBlock {
    pub fn build(&self, p: f64) -> Result<SolveConfig, LabError> {
        let boundary = match &self.boundary {
            BoundaryBlock::HoldInitial => BoundaryData::HoldInitial,
            BoundaryBlock::Constant { value } => BoundaryData::Constant(*value),
            BoundaryBlock::Affine { value, gradient } => BoundaryData::Affine {
                value: *value,
                gradient: point3(gradient, "solve.boundary.gradient")?,
            },
        };
        let mut cfg = SolveConfig::new(p).with_boundary(boundary).with_scheme(self.scheme);
        cfg.eps_reg = self.eps_reg;
        cfg.newton_tol = self.newton_tol;
        cfg.max_inner_iters = self.max_inner_iters;
        cfg.picard_sweeps = self.picard_sweeps;
        cfg.output_stride = self.output_stride;
        cfg.cfl = self.cfl;
        Ok(cfg)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum SignBlock {
    #[default]
    Positive,
    Odd,
}

impl From<SignBlock> for Sign {
    fn from(s: SignBlock) -> Self {
        match s {
            SignBlock::Positive => Sign::Positive,
            SignBlock::Odd => Sign::Odd,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SourceBlock {
    Zero,
    Constant {
        value: f64,
    },
    /// `amplitude |x - center|^{-a} |t - t_origin|^{-b}`; with `norm` set the
    /// amplitude is rescaled so that `‖f‖_{L^{q,r}}` equals it.
    SeparablePower {
        #[serde(default = "unit")]
        amplitude: f64,
        a: f64,
        b: f64,
        #[serde(default)]
        center: Vec<f64>,
        #[serde(default)]
        t_origin: f64,
        #[serde(default)]
        space_sign: SignBlock,
        #[serde(default)]
        time_sign: SignBlock,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        norm: Option<f64>,
    },
}

fn unit() -> f64 {
    1.0
}

impl SourceBlock {
    /// The source (amplitude as given) and the requested norm, if any.
    pub fn build(&self) -> Result<(SourceSpec, Option<f64>), LabError> {
        Ok(match self {
            SourceBlock::Zero => (SourceSpec::zero(), None),
            SourceBlock::Constant { value } => (SourceSpec::constant(*value), None),
            SourceBlock::SeparablePower {
                amplitude,
                a,
                b,
                center,
                t_origin,
                space_sign,
                time_sign,
                norm,
            } => (
                SourceSpec::separable_power(*amplitude, *a, *b, point3(center, "source.center")?, *t_origin)
                    .with_signs((*space_sign).into(), (*time_sign).into()),
                *norm,
            ),
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case", deny_unknown_fields)]
pub enum CenterRule {
    /// Strict spatial extrema of the final slice inside the critical zone.
    CriticalExtrema {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        margin: Option<f64>,
    },
    Points { points: Vec<CenterPoint> },
    /// Uniform draws at the final time, at least `λ` from the boundary.
    Sampled { count: usize },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CenterPoint {
    pub x: Vec<f64>,
    /// Defaults to the final time.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t: Option<f64>,
}

impl CenterPoint {
    pub fn coords(&self) -> Result<[f64; 3], LabError> {
        point3(&self.x, "probe.centers.points[].x")
    }
}

fn lambda() -> f64 {
    DEFAULT_LAMBDA
}
fn depth() -> u32 {
    DEFAULT_DEPTH
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProbeBlock {
    #[serde(default = "lambda")]
    pub lambda: f64,
    #[serde(default = "depth")]
    pub depth: u32,
    #[serde(default)]
    pub mode: ProbeMode,
    #[serde(default)]
    pub rule: ThetaRule,
    pub centers: CenterRule,
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self, LabError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            LabError::Config(format!("at `{path}`: {}", e.into_inner()))
        })
    }

    pub fn load(path: &Path) -> Result<Self, LabError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| LabError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    /// Compact JSON with the field order of the structs; the basis of
    /// [`Self::hash`].
    pub fn canonical(&self) -> String {
        serde_json::to_string(self).expect("config serialises")
    }

    /// SHA-256 of the canonical form, lower-case hex.
    pub fn hash(&self) -> String {
        Sha256::digest(self.canonical().as_bytes())
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }

    pub fn need<'a, T>(&self, block: &'a Option<T>, name: &str, sub: &str) -> Result<&'a T, LabError> {
        block
            .as_ref()
            .ok_or_else(|| LabError::Config(format!("`{name}` block is required by `{sub}`")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const FULL: &str = r#"{
        "scenario": "heat-singular",
        "params": {"p": 2.0, "n": 1, "q": "inf", "r": 3.5},
        "grid": {"dim": 1, "half_width": [0.5], "h": 0.0078125, "dt": 0.001953125, "t_end": 0.25},
        "solve": {"initial": {"kind": "cosine", "amplitude": 1.0}},
        "source": {"kind": "separable_power", "a": 0.0, "b": 0.25, "t_origin": 0.25},
        "probe": {"mode": "affine", "centers": {"rule": "critical_extrema"}},
        "seed": 7
    }"#;

    #[test]
    fn round_trip_is_lossless() {
        let c = ExperimentConfig::parse(FULL).unwrap();
        let again = ExperimentConfig::parse(&c.canonical()).unwrap();
        assert_eq!(c, again);
        assert_eq!(c.hash(), again.hash());
        assert_eq!(c.hash().len(), 64);
    }

    #[test]
    fn schema_errors_carry_paths() {
        let bad = FULL.replace("\"h\": 0.0078125", "\"h\": \"fine\"");
        let msg = ExperimentConfig::parse(&bad).unwrap_err().to_string();
        assert!(msg.contains("grid.h"), "{msg}");
        let unknown = FULL.replace("\"seed\": 7", "\"sede\": 7");
        assert!(ExperimentConfig::parse(&unknown).unwrap_err().to_string().contains("sede"));
    }

    #[test]
    fn blocks_build() {
        let c = ExperimentConfig::parse(FULL).unwrap();
        let g = c.grid.as_ref().unwrap().build().unwrap();
        assert_eq!(g.counts()[0], 129);
        assert!(c.params.as_ref().unwrap().build().unwrap().q.is_infinite());
        let (spec, norm) = c.source.as_ref().unwrap().build().unwrap();
        assert!(!spec.is_zero() && norm.is_none());
        assert!(c.need(&c.layers, "layers", "exponent").is_err());
    }
}
