//! JSON run configurations, one schema per subcommand.

use std::path::PathBuf;

use rmt_core::ensembles::Ensemble;
use rmt_core::kernels::{Gauge, Method};
use rmt_core::limits::{Direction, KIRoute, MuSchedule, PerturbationSet, Regime, ScalingRegime};
use serde::{Deserialize, Serialize};

fn default_tol() -> f64 {
    1e-10
}

fn default_bins() -> usize {
    25
}

fn contour() -> Method {
    Method::ContourQuadrature
}

fn gram() -> Method {
    Method::GramSum
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PerturbedSpec {
    #[serde(rename = "N")]
    pub n: usize,
    pub mu: f64,
    #[serde(default)]
    pub perturbations: PerturbationSet,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ValidateConfig {
    #[serde(default)]
    pub ensemble: Option<Ensemble>,
    #[serde(default)]
    pub perturbed: Option<PerturbedSpec>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LimitKind {
    I,
    II,
    III,
    #[serde(rename = "bessel")]
    Bessel,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LimitSpec {
    pub kernel: LimitKind,
    #[serde(default)]
    pub perturbations: PerturbationSet,
    #[serde(default)]
    pub kappa: u32,
    #[serde(default)]
    pub nu: i32,
    #[serde(default)]
    pub tau: Option<f64>,
    #[serde(default)]
    pub route: KIRoute,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelConfig {
    #[serde(default)]
    pub ensemble: Option<Ensemble>,
    #[serde(default)]
    pub limit: Option<LimitSpec>,
    #[serde(default = "contour")]
    pub method: Method,
    #[serde(default)]
    pub gauge: Gauge,
    #[serde(default = "default_tol")]
    pub tol: f64,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SampleConfig {
    pub ensemble: Ensemble,
    pub count: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Grid {
    pub t_min: f64,
    pub t_max: f64,
    pub points: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DensityConfig {
    pub ensemble: Ensemble,
    #[serde(default = "gram")]
    pub method: Method,
    pub grid: Grid,
    /// Spectra CSV as written by `sample`.
    #[serde(default)]
    pub samples: Option<PathBuf>,
    #[serde(default = "default_bins")]
    pub bins: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScanKind {
    HardEdge,
    Interpolate,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScanConfig {
    pub scan: ScanKind,
    #[serde(default)]
    pub regime: Option<ScalingRegime>,
    #[serde(default)]
    pub schedule: Option<MuSchedule>,
    #[serde(default, rename = "N_list")]
    pub n_list: Vec<usize>,
    #[serde(default)]
    pub perturbations: PerturbationSet,
    #[serde(default)]
    pub kappa: u32,
    #[serde(default)]
    pub nu: u32,
    #[serde(default)]
    pub tau_list: Vec<f64>,
    #[serde(default)]
    pub direction: Option<Direction>,
    pub probes: Vec<(f64, f64)>,
}

impl ScanConfig {
    pub fn regime_label(&self) -> String {
        match (self.scan, &self.regime, self.direction) {
            (ScanKind::HardEdge, Some(r), _) => format!("{:?}", r.regime),
            (ScanKind::Interpolate, _, Some(Direction::ToI)) => "to-I".into(),
            (ScanKind::Interpolate, _, Some(Direction::ToIII)) => "to-III".into(),
            _ => "unspecified".into(),
        }
    }

    pub fn ladder_len(&self) -> usize {
        match self.scan {
            ScanKind::HardEdge => self.n_list.len(),
            ScanKind::Interpolate => self.tau_list.len(),
        }
    }
}

/// Rejects non-finite numbers anywhere in a parsed document.
pub fn check_finite(v: &serde_json::Value, path: &str) -> Result<(), String> {
    match v {
        serde_json::Value::Number(n) => match n.as_f64() {
            Some(x) if x.is_finite() => Ok(()),
            _ => Err(format!("non-finite number at {path}")),
        },
        serde_json::Value::Array(a) => {
            a.iter().enumerate().try_for_each(|(i, x)| check_finite(x, &format!("{path}[{i}]")))
        }
        serde_json::Value::Object(o) => o.iter().try_for_each(|(k, x)| check_finite(x, &format!("{path}.{k}"))),
        _ => Ok(()),
    }
}

pub fn regime_of(kind: LimitKind) -> Option<Regime> {
    match kind {
        LimitKind::I => Some(Regime::I),
        LimitKind::II => Some(Regime::II),
        LimitKind::III => Some(Regime::III),
        LimitKind::Bessel => None,
    }
}
