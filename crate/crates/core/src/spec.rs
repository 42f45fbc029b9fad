//! The system description: sensors, their models and superquantizers,
//! declared assumptions and groupings. Loaded from a versioned JSON document.

use std::collections::BTreeSet;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result, Violation};
use crate::models::{ObservationModel, ParameterPoint, ParameterSpace, BETA_MIN};
use crate::quantizers::SuperQuantizer;

pub const SCHEMA_VERSION: &str = "quantlim/system-spec/v1";

/// Knowledge claims a spec may declare.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Assumption {
    /// Parameter space has nonempty interior.
    A1,
    /// Cell probabilities are differentiable in theta.
    A2,
    /// Cell probabilities are continuous in theta.
    A3,
    /// Some sensors share a statistical model (declared via an ISM grouping).
    A4,
    /// All observation subvectors are independent.
    A5,
    /// Independent subvectors, some sharing a model (declared via an Indep-ISM grouping).
    A6,
}

impl Assumption {
    pub const ALL: [Assumption; 6] = [
        Assumption::A1,
        Assumption::A2,
        Assumption::A3,
        Assumption::A4,
        Assumption::A5,
        Assumption::A6,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Assumption::A1 => "A1",
            Assumption::A2 => "A2",
            Assumption::A3 => "A3",
            Assumption::A4 => "A4",
            Assumption::A5 => "A5",
            Assumption::A6 => "A6",
        }
    }
}

impl fmt::Display for Assumption {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Assumption {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Assumption::ALL
            .into_iter()
            .find(|a| a.name().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| Error::InvalidArgument(format!("unknown assumption {s:?}")))
    }
}

/// Sensors partitioned into model groups `G_p`, each split into subgroups
/// `G_p^(m)` sharing one superquantizer. Sensor indices are 0-based.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct GroupingIsm {
    pub groups: Vec<Vec<Vec<usize>>>,
}

/// Subvectors `(sensor, l)` partitioned into model groups `A_w`, each split
/// into subgroups `A_w^(t)` sharing one vector quantizer. Both indices are 0-based.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct GroupingIndepIsm {
    pub groups: Vec<Vec<Vec<(usize, usize)>>>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Groupings {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ism: Option<GroupingIsm>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub indep_ism: Option<GroupingIndepIsm>,
}

impl Groupings {
    fn is_empty(&self) -> bool {
        self.ism.is_none() && self.indep_ism.is_none()
    }
}

/// Budget for the sampling path used when a model's coordinates are correlated.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MonteCarloConfig {
    pub seed: u64,
    pub samples: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sensor {
    pub model: ObservationModel,
    pub superquantizer: SuperQuantizer,
}

impl Sensor {
    pub fn new(model: ObservationModel, superquantizer: SuperQuantizer) -> Self {
        Self {
            model,
            superquantizer,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SearchBox {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemSpec {
    pub schema: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub dim_theta: usize,
    pub parameter_space: ParameterSpace,
    pub sensors: Vec<Sensor>,
    #[serde(default)]
    pub assumptions: BTreeSet<Assumption>,
    #[serde(default, skip_serializing_if = "Groupings::is_empty")]
    pub groupings: Groupings,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub monte_carlo: Option<MonteCarloConfig>,
    /// Default box for likelihood search and simulation studies.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub search_box: Option<SearchBox>,
}

impl SystemSpec {
    /// Spec with no declared assumptions or groupings.
    pub fn new(parameter_space: ParameterSpace, sensors: Vec<Sensor>) -> Self {
        Self {
            schema: SCHEMA_VERSION.to_string(),
            name: None,
            dim_theta: parameter_space.dim(),
            parameter_space,
            sensors,
            assumptions: BTreeSet::new(),
            groupings: Groupings::default(),
            monte_carlo: None,
            search_box: None,
        }
    }

    pub fn with_assumptions(mut self, a: impl IntoIterator<Item = Assumption>) -> Self {
        self.assumptions.extend(a);
        self
    }

    pub fn n_sensors(&self) -> usize {
        self.sensors.len()
    }

    pub fn declares(&self, a: Assumption) -> bool {
        self.assumptions.contains(&a)
    }

    pub fn sensor(&self, j: usize) -> Result<&Sensor> {
        self.sensors.get(j).ok_or(Error::UnknownSensor(j))
    }

    /// `D_u = prod_j |S_j|`, the size of the global outcome alphabet.
    pub fn global_alphabet_size(&self) -> u128 {
        self.sensors
            .iter()
            .map(|s| s.superquantizer.alphabet_size())
            .product()
    }

    pub fn check_theta(&self, theta: &ParameterPoint) -> Result<()> {
        if theta.dim() != self.dim_theta {
            return Err(Error::DimensionMismatch {
                what: "theta",
                expected: self.dim_theta,
                got: theta.dim(),
            });
        }
        if !self.parameter_space.contains(theta) {
            return Err(Error::OutsideParameterSpace(theta.0.clone()));
        }
        Ok(())
    }

    /// Every schema and semantic violation, with locations.
    pub fn violations(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        if self.schema != SCHEMA_VERSION {
            out.push(Violation::new(
                "schema",
                format!("expected {SCHEMA_VERSION:?}, got {:?}", self.schema),
            ));
        }
        if self.dim_theta == 0 {
            out.push(Violation::new("dim_theta", "must be positive"));
        }
        if self.parameter_space.dim() != self.dim_theta {
            out.push(Violation::new(
                "parameter_space",
                format!(
                    "has {} coordinates but dim_theta = {}",
                    self.parameter_space.dim(),
                    self.dim_theta
                ),
            ));
        }
        for m in self.parameter_space.check() {
            out.push(Violation::new("parameter_space", m));
        }
        if self.sensors.is_empty() {
            out.push(Violation::new("sensors", "at least one sensor is required"));
        }
        for (j, s) in self.sensors.iter().enumerate() {
            let base = format!("sensors[{j}]");
            for m in s.model.check(self.dim_theta) {
                out.push(Violation::new(format!("{base}.model"), m));
            }
            if let ObservationModel::ScalarGaussianMeanVar { var_index, .. } = s.model {
                if let Some(&lo) = self.parameter_space.lower.get(var_index) {
                    if !(lo >= BETA_MIN) {
                        out.push(Violation::new(
                            format!("parameter_space.lower[{var_index}]"),
                            format!("variance coordinate needs lower bound >= {BETA_MIN:e}, got {lo}"),
                        ));
                    }
                }
            }
            if s.superquantizer.quantizers.is_empty() {
                out.push(Violation::new(
                    format!("{base}.superquantizer"),
                    "needs at least one vector quantizer",
                ));
            }
            for (l, q) in s.superquantizer.quantizers.iter().enumerate() {
                for m in q.check() {
                    out.push(Violation::new(format!("{base}.superquantizer[{l}]"), m));
                }
            }
            let k = s.model.dim_x();
            let total = s.superquantizer.input_dim();
            if total != k {
                out.push(Violation::new(
                    format!("{base}.superquantizer"),
                    format!("partition lengths sum to {total} but the model observes {k} coordinates"),
                ));
            }
        }
        if let Some(mc) = &self.monte_carlo {
            if mc.samples == 0 {
                out.push(Violation::new("monte_carlo.samples", "must be positive"));
            }
        }
        if let Some(b) = &self.search_box {
            if b.lower.len() != self.dim_theta || b.upper.len() != self.dim_theta {
                out.push(Violation::new("search_box", "must have dim_theta bounds"));
            } else if b.lower.iter().zip(&b.upper).any(|(l, u)| !(l < u)) {
                out.push(Violation::new("search_box", "need lower < upper on every axis"));
            } else if !self.parameter_space.contains(&ParameterPoint(b.lower.clone()))
                || !self.parameter_space.contains(&ParameterPoint(b.upper.clone()))
            {
                out.push(Violation::new("search_box", "must lie inside the parameter space"));
            }
        }
        if !out.is_empty() {
            // Group checks assume a structurally sound spec.
            return out;
        }
        if self.declares(Assumption::A5) || self.declares(Assumption::A6) {
            for (j, s) in self.sensors.iter().enumerate() {
                if let Some(msg) = cross_block_dependence(s) {
                    out.push(Violation::new(format!("sensors[{j}].model"), msg));
                }
            }
        }
        if let Some(g) = &self.groupings.ism {
            if let Err(e) = crate::idqd::validate_ism(self, g) {
                out.push(Violation::new("groupings.ism", e.to_string()));
            }
        } else if self.declares(Assumption::A4) {
            out.push(Violation::new(
                "groupings.ism",
                "assumption A4 is declared but no ISM grouping is given",
            ));
        }
        if let Some(g) = &self.groupings.indep_ism {
            if let Err(e) = crate::idqd::validate_indep_ism(self, g) {
                out.push(Violation::new("groupings.indep_ism", e.to_string()));
            }
        } else if self.declares(Assumption::A6) {
            out.push(Violation::new(
                "groupings.indep_ism",
                "assumption A6 is declared but no Indep-ISM grouping is given",
            ));
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        let v = self.violations();
        if v.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidSpec(v))
        }
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        let spec: SystemSpec = serde_json::from_str(s)?;
        spec.validate()?;
        Ok(spec)
    }

    /// Canonical pretty-printed JSON; parses back to an equal spec.
    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(self).expect("spec serializes")
    }

    /// Copy with every quantizer's rectangles in canonical order. Parsing the
    /// JSON of the result gives back an equal spec.
    pub fn canonical(&self) -> Self {
        let mut out = self.clone();
        out.schema = SCHEMA_VERSION.to_string();
        for s in &mut out.sensors {
            for q in &mut s.superquantizer.quantizers {
                *q = q.canonical();
            }
        }
        out
    }
}

/// Nonzero covariance between different subvectors of one sensor contradicts
/// the independent-subvector assumption.
fn cross_block_dependence(s: &Sensor) -> Option<String> {
    let ObservationModel::GaussianLinear { covariance, .. } = &s.model else {
        return None;
    };
    let mut block = Vec::new();
    for (l, q) in s.superquantizer.quantizers.iter().enumerate() {
        block.extend(std::iter::repeat_n(l, q.dim));
    }
    for (i, row) in covariance.iter().enumerate() {
        for (j, &v) in row.iter().enumerate() {
            if block.get(i) != block.get(j) && v != 0.0 {
                return Some(format!(
                    "covariance[{i}][{j}] = {v} couples different subvectors, contradicting A5/A6"
                ));
            }
        }
    }
    None
}

/// Read and fully validate a spec file.
pub fn parse_spec(path: impl AsRef<Path>) -> Result<SystemSpec> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)
        .map_err(|e| std::io::Error::new(e.kind(), format!("{}: {e}", path.display())))?;
    SystemSpec::from_json_str(&text)
}
