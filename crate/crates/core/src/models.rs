//! Parametric observation families and their exact rectangle probabilities.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::bound;
use crate::error::{Error, Result};
use crate::normal;
use crate::quantizers::Interval;

/// Smallest admissible variance for a variance-type parameter coordinate.
pub const BETA_MIN: f64 = 1e-12;

/// A point `theta` in the parameter space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ParameterPoint(pub Vec<f64>);

impl ParameterPoint {
    pub fn new(values: Vec<f64>) -> Self {
        Self(values)
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }

    pub fn distance(&self, other: &ParameterPoint) -> f64 {
        self.0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }
}

impl From<Vec<f64>> for ParameterPoint {
    fn from(v: Vec<f64>) -> Self {
        Self(v)
    }
}

impl<const N: usize> From<[f64; N]> for ParameterPoint {
    fn from(v: [f64; N]) -> Self {
        Self(v.to_vec())
    }
}

/// Box-constrained parameter space. Coordinates listed in `open` must lie
/// strictly inside their bounds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParameterSpace {
    #[serde(with = "bound::vec")]
    pub lower: Vec<f64>,
    #[serde(with = "bound::vec")]
    pub upper: Vec<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub open: Vec<usize>,
}

impl ParameterSpace {
    pub fn unbounded(dim: usize) -> Self {
        Self {
            lower: vec![f64::NEG_INFINITY; dim],
            upper: vec![f64::INFINITY; dim],
            open: Vec::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn is_open(&self, coord: usize) -> bool {
        self.open.contains(&coord)
    }

    /// Problems with the space itself (empty interior, mismatched lengths).
    pub fn check(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.lower.len() != self.upper.len() {
            out.push(format!(
                "lower has {} entries but upper has {}",
                self.lower.len(),
                self.upper.len()
            ));
        }
        for (i, (lo, hi)) in self.lower.iter().zip(&self.upper).enumerate() {
            if lo.is_nan() || hi.is_nan() || !(lo < hi) {
                out.push(format!("coordinate {i}: need lower < upper, got [{lo}, {hi}]"));
            }
        }
        for &c in &self.open {
            if c >= self.lower.len() {
                out.push(format!("open coordinate {c} out of range"));
            }
        }
        out
    }

    pub fn contains(&self, theta: &ParameterPoint) -> bool {
        theta.dim() == self.dim()
            && theta.0.iter().enumerate().all(|(i, &v)| {
                if !v.is_finite() {
                    return false;
                }
                if self.is_open(i) {
                    self.lower[i] < v && v < self.upper[i]
                } else {
                    self.lower[i] <= v && v <= self.upper[i]
                }
            })
    }

    /// Strict interior: every coordinate strictly inside its bounds.
    pub fn is_interior(&self, theta: &ParameterPoint) -> bool {
        theta.dim() == self.dim()
            && theta
                .0
                .iter()
                .enumerate()
                .all(|(i, &v)| v.is_finite() && self.lower[i] < v && v < self.upper[i])
    }
}

/// One coordinate of an observation vector as a Gaussian whose mean and
/// variance depend on `theta`, together with their `theta`-gradients.
#[derive(Debug, Clone, PartialEq)]
pub struct Marginal {
    pub mean: f64,
    pub var: f64,
    pub dmean: Vec<f64>,
    pub dvar: Vec<f64>,
}

impl Marginal {
    /// `P(lo <= x < hi)` and its derivatives with respect to mean and variance.
    pub fn interval(&self, iv: &Interval) -> (f64, f64, f64) {
        let sd = self.var.sqrt();
        let zl = (iv.lo - self.mean) / sd;
        let zh = (iv.hi - self.mean) / sd;
        let p = normal::interval_prob(zl, zh);
        let (pl, ph) = (normal::pdf(zl), normal::pdf(zh));
        let dmean = (pl - ph) / sd;
        // d/dv Phi((c - m)/sqrt(v)) = -phi(z) z / (2v); the infinite ends contribute nothing.
        let zpl = if zl.is_finite() { pl * zl } else { 0.0 };
        let zph = if zh.is_finite() { ph * zh } else { 0.0 };
        let dvar = (zpl - zph) / (2.0 * self.var);
        (p, dmean, dvar)
    }

    /// Chain rule from (d/dmean, d/dvar) to the `theta` gradient.
    pub fn theta_grad(&self, dmean: f64, dvar: f64, out: &mut [f64]) {
        for (k, o) in out.iter_mut().enumerate() {
            *o = dmean * self.dmean[k] + dvar * self.dvar[k];
        }
    }
}

/// Observation family `P_j^theta` of one sensor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ObservationModel {
    /// Scalar `N(alpha, beta)` with `alpha = theta[mean_index]`, `beta = theta[var_index]`.
    ScalarGaussianMeanVar { mean_index: usize, var_index: usize },
    /// `N(theta[mean_indices], I)`.
    IsotropicGaussianMeanVector { mean_indices: Vec<usize> },
    /// `N(H theta, Sigma)` with fixed design `H` (K x D) and covariance `Sigma` (K x K).
    GaussianLinear {
        design: Vec<Vec<f64>>,
        covariance: Vec<Vec<f64>>,
    },
}

impl ObservationModel {
    pub fn dim_x(&self) -> usize {
        match self {
            Self::ScalarGaussianMeanVar { .. } => 1,
            Self::IsotropicGaussianMeanVector { mean_indices } => mean_indices.len(),
            Self::GaussianLinear { design, .. } => design.len(),
        }
    }

    /// Problems with the model given the parameter dimension.
    pub fn check(&self, dim_theta: usize) -> Vec<String> {
        let mut out = Vec::new();
        let idx_ok = |i: usize, name: &str, out: &mut Vec<String>| {
            if i >= dim_theta {
                out.push(format!("{name} {i} out of range for D_theta = {dim_theta}"));
            }
        };
        match self {
            Self::ScalarGaussianMeanVar {
                mean_index,
                var_index,
            } => {
                idx_ok(*mean_index, "mean_index", &mut out);
                idx_ok(*var_index, "var_index", &mut out);
                if mean_index == var_index {
                    out.push("mean_index and var_index must differ".into());
                }
            }
            Self::IsotropicGaussianMeanVector { mean_indices } => {
                if mean_indices.is_empty() {
                    out.push("mean_indices must be nonempty".into());
                }
                for &i in mean_indices {
                    idx_ok(i, "mean index", &mut out);
                }
            }
            Self::GaussianLinear { design, covariance } => {
                let k = design.len();
                if k == 0 {
                    out.push("design must have at least one row".into());
                }
                for (r, row) in design.iter().enumerate() {
                    if row.len() != dim_theta {
                        out.push(format!(
                            "design row {r} has {} columns, expected {dim_theta}",
                            row.len()
                        ));
                    }
                    if row.iter().any(|v| !v.is_finite()) {
                        out.push(format!("design row {r} has a non-finite entry"));
                    }
                }
                if covariance.len() != k || covariance.iter().any(|r| r.len() != k) {
                    out.push(format!("covariance must be {k} x {k}"));
                } else {
                    let sym = (0..k).all(|i| {
                        (0..k).all(|j| (covariance[i][j] - covariance[j][i]).abs() <= 1e-12)
                    });
                    if !sym {
                        out.push("covariance must be symmetric".into());
                    } else if self.covariance_cholesky().is_none() {
                        out.push("covariance must be positive definite".into());
                    }
                }
            }
        }
        out
    }

    pub fn has_diagonal_covariance(&self) -> bool {
        match self {
            Self::GaussianLinear { covariance, .. } => covariance.iter().enumerate().all(|(i, row)| {
                row.iter().enumerate().all(|(j, &v)| i == j || v == 0.0)
            }),
            _ => true,
        }
    }

    fn covariance_cholesky(&self) -> Option<DMatrix<f64>> {
        let Self::GaussianLinear { covariance, .. } = self else {
            return None;
        };
        let k = covariance.len();
        let m = DMatrix::from_fn(k, k, |i, j| covariance[i][j]);
        m.cholesky().map(|c| c.l())
    }

    /// Mean vector of `x` given `theta`.
    pub fn mean(&self, theta: &ParameterPoint) -> Vec<f64> {
        let t = theta.values();
        match self {
            Self::ScalarGaussianMeanVar { mean_index, .. } => vec![t[*mean_index]],
            Self::IsotropicGaussianMeanVector { mean_indices } => {
                mean_indices.iter().map(|&i| t[i]).collect()
            }
            Self::GaussianLinear { design, .. } => design
                .iter()
                .map(|row| row.iter().zip(t).map(|(h, v)| h * v).sum())
                .collect(),
        }
    }

    /// Per-coordinate Gaussian marginals; only valid when the coordinates are
    /// independent given `theta`.
    pub fn marginals(&self, theta: &ParameterPoint) -> Result<Vec<Marginal>> {
        let d = theta.dim();
        let t = theta.values();
        match self {
            Self::ScalarGaussianMeanVar {
                mean_index,
                var_index,
            } => {
                let var = t[*var_index];
                if !(var > 0.0) {
                    return Err(Error::NonPositiveVariance(var));
                }
                let mut dmean = vec![0.0; d];
                let mut dvar = vec![0.0; d];
                dmean[*mean_index] = 1.0;
                dvar[*var_index] = 1.0;
                Ok(vec![Marginal {
                    mean: t[*mean_index],
                    var,
                    dmean,
                    dvar,
                }])
            }
            Self::IsotropicGaussianMeanVector { mean_indices } => Ok(mean_indices
                .iter()
                .map(|&i| {
                    let mut dmean = vec![0.0; d];
                    dmean[i] = 1.0;
                    Marginal {
                        mean: t[i],
                        var: 1.0,
                        dmean,
                        dvar: vec![0.0; d],
                    }
                })
                .collect()),
            Self::GaussianLinear { design, covariance } => {
                if !self.has_diagonal_covariance() {
                    return Err(Error::NonDiagonalCovariance);
                }
                let mean = self.mean(theta);
                Ok(design
                    .iter()
                    .enumerate()
                    .map(|(k, row)| Marginal {
                        mean: mean[k],
                        var: covariance[k][k],
                        dmean: row.clone(),
                        dvar: vec![0.0; d],
                    })
                    .collect())
            }
        }
    }

    /// Score `d/dtheta ln f(x | theta)`; used by the Monte Carlo gradient.
    pub fn score(&self, x: &[f64], theta: &ParameterPoint) -> Result<Vec<f64>> {
        let d = theta.dim();
        match self {
            Self::GaussianLinear { design, covariance } => {
                let k = design.len();
                let mean = self.mean(theta);
                let sigma = DMatrix::from_fn(k, k, |i, j| covariance[i][j]);
                let resid = DVector::from_fn(k, |i, _| x[i] - mean[i]);
                let w = sigma
                    .cholesky()
                    .ok_or(Error::NonDiagonalCovariance)?
                    .solve(&resid);
                Ok((0..d)
                    .map(|c| (0..k).map(|r| design[r][c] * w[r]).sum())
                    .collect())
            }
            _ => {
                let mut g = vec![0.0; d];
                for (m, &xi) in self.marginals(theta)?.iter().zip(x) {
                    let r = xi - m.mean;
                    let ds_dmean = r / m.var;
                    let ds_dvar = 0.5 * (r * r / (m.var * m.var) - 1.0 / m.var);
                    for (k, gk) in g.iter_mut().enumerate() {
                        *gk += ds_dmean * m.dmean[k] + ds_dvar * m.dvar[k];
                    }
                }
                Ok(g)
            }
        }
    }

    /// Lower-triangular factor `L` with `L L^T = Cov(x)`, used for sampling.
    pub fn sampling_factor(&self, theta: &ParameterPoint) -> Result<DMatrix<f64>> {
        match self {
            Self::GaussianLinear { .. } => self
                .covariance_cholesky()
                .ok_or_else(|| Error::InvalidArgument("covariance is not positive definite".into())),
            _ => {
                let m = self.marginals(theta)?;
                Ok(DMatrix::from_fn(m.len(), m.len(), |i, j| {
                    if i == j {
                        m[i].var.sqrt()
                    } else {
                        0.0
                    }
                }))
            }
        }
    }

    /// The model of the subvector `x[offset..offset + len]`.
    pub fn sub_model(&self, offset: usize, len: usize) -> ObservationModel {
        match self {
            Self::ScalarGaussianMeanVar { .. } => self.clone(),
            Self::IsotropicGaussianMeanVector { mean_indices } => {
                Self::IsotropicGaussianMeanVector {
                    mean_indices: mean_indices[offset..offset + len].to_vec(),
                }
            }
            Self::GaussianLinear { design, covariance } => Self::GaussianLinear {
                design: design[offset..offset + len].to_vec(),
                covariance: covariance[offset..offset + len]
                    .iter()
                    .map(|r| r[offset..offset + len].to_vec())
                    .collect(),
            },
        }
    }
}

fn check_dims(model: &ObservationModel, got: usize, theta: &ParameterPoint) -> Result<()> {
    if got != model.dim_x() {
        return Err(Error::DimensionMismatch {
            what: "observation",
            expected: model.dim_x(),
            got,
        });
    }
    let need = match model {
        ObservationModel::ScalarGaussianMeanVar {
            mean_index,
            var_index,
        } => (*mean_index).max(*var_index) + 1,
        ObservationModel::IsotropicGaussianMeanVector { mean_indices } => {
            mean_indices.iter().copied().max().map_or(0, |m| m + 1)
        }
        ObservationModel::GaussianLinear { design, .. } => design.first().map_or(0, Vec::len),
    };
    if theta.dim() < need
        || matches!(model, ObservationModel::GaussianLinear { .. }) && theta.dim() != need
    {
        return Err(Error::DimensionMismatch {
            what: "theta",
            expected: need,
            got: theta.dim(),
        });
    }
    Ok(())
}

/// Density of the observation `x` under `theta`.
pub fn pdf(model: &ObservationModel, x: &[f64], theta: &ParameterPoint) -> Result<f64> {
    check_dims(model, x.len(), theta)?;
    if model.has_diagonal_covariance() {
        let m = model.marginals(theta)?;
        return Ok(m
            .iter()
            .zip(x)
            .map(|(mg, &xi)| normal::density(xi, mg.mean, mg.var))
            .product());
    }
    let k = x.len();
    let l = model.sampling_factor(theta)?;
    let mean = model.mean(theta);
    let resid = DVector::from_fn(k, |i, _| x[i] - mean[i]);
    let z = l
        .solve_lower_triangular(&resid)
        .ok_or(Error::NonDiagonalCovariance)?;
    let log_det: f64 = (0..k).map(|i| l[(i, i)].ln()).sum();
    let log_pdf = -0.5 * z.norm_squared() - log_det - 0.5 * k as f64 * (2.0 * std::f64::consts::PI).ln();
    Ok(log_pdf.exp())
}

/// Exact `P(x in rect | theta)` as a product of per-axis normal-CDF differences.
pub fn rect_prob(model: &ObservationModel, rect: &[Interval], theta: &ParameterPoint) -> Result<f64> {
    check_dims(model, rect.len(), theta)?;
    if !model.has_diagonal_covariance() {
        return Err(Error::NonDiagonalCovariance);
    }
    for iv in rect {
        if !(iv.lo < iv.hi) {
            return Err(Error::InvalidArgument(format!(
                "interval [{}, {}) is empty",
                iv.lo, iv.hi
            )));
        }
    }
    let m = model.marginals(theta)?;
    Ok(m.iter().zip(rect).map(|(mg, iv)| mg.interval(iv).0).product())
}

#[cfg(test)]
mod tests {
    use super::*;

    const INF: f64 = f64::INFINITY;

    fn scalar() -> ObservationModel {
        ObservationModel::ScalarGaussianMeanVar {
            mean_index: 0,
            var_index: 1,
        }
    }

    fn iso2() -> ObservationModel {
        ObservationModel::IsotropicGaussianMeanVector {
            mean_indices: vec![0, 1],
        }
    }

    fn iv(lo: f64, hi: f64) -> Interval {
        Interval { lo, hi }
    }

    #[test]
    fn pdf_examples() {
        let p = pdf(&scalar(), &[0.0], &[0.0, 1.0].into()).unwrap();
        assert!((p - 0.398_942_280_4).abs() < 1e-10);
        let beta = 2.7;
        let p = pdf(&scalar(), &[1.3], &[1.3, beta].into()).unwrap();
        assert!((p - 1.0 / (2.0 * std::f64::consts::PI * beta).sqrt()).abs() < 1e-15);
        let p = pdf(&iso2(), &[0.0, 0.0], &[0.0, 0.0].into()).unwrap();
        assert!((p - 0.159_154_943_1).abs() < 1e-10);
    }

    #[test]
    fn pdf_errors() {
        assert!(matches!(
            pdf(&scalar(), &[0.0, 1.0], &[0.0, 1.0].into()),
            Err(Error::DimensionMismatch { .. })
        ));
        assert!(matches!(
            pdf(&scalar(), &[0.0], &[0.0, 0.0].into()),
            Err(Error::NonPositiveVariance(_))
        ));
    }

    #[test]
    fn pdf_general_covariance_matches_diagonal_path() {
        let diag = ObservationModel::GaussianLinear {
            design: vec![vec![1.0, 0.0], vec![0.5, 2.0]],
            covariance: vec![vec![2.0, 0.0], vec![0.0, 0.5]],
        };
        let theta: ParameterPoint = [0.3, -0.2].into();
        let x = [0.1, 0.7];
        let want = pdf(&diag, &x, &theta).unwrap();
        // Same density through the Cholesky path.
        let l = diag.sampling_factor(&theta).unwrap();
        let mean = diag.mean(&theta);
        let z0 = (x[0] - mean[0]) / l[(0, 0)];
        let z1 = (x[1] - mean[1]) / l[(1, 1)];
        let got = (-0.5 * (z0 * z0 + z1 * z1)).exp()
            / (2.0 * std::f64::consts::PI * l[(0, 0)] * l[(1, 1)]);
        assert!((want - got).abs() < 1e-15);
    }

    #[test]
    fn rect_prob_examples() {
        let p = rect_prob(&scalar(), &[iv(-2.0, 2.0)], &[0.0, 1.0].into()).unwrap();
        assert!((p - 0.954_499_7).abs() < 1e-7);
        let p = rect_prob(&iso2(), &[iv(-INF, INF), iv(-INF, INF)], &[3.0, -1.0].into()).unwrap();
        assert_eq!(p, 1.0);
        let p = rect_prob(&iso2(), &[iv(-1.0, 1.0), iv(-1.0, 1.0)], &[0.0, 0.0].into()).unwrap();
        assert!((p - 0.466_064_9).abs() < 1e-7);
    }

    #[test]
    fn rect_prob_rejects_correlated_covariance() {
        let m = ObservationModel::GaussianLinear {
            design: vec![vec![1.0], vec![1.0]],
            covariance: vec![vec![1.0, 0.5], vec![0.5, 1.0]],
        };
        assert!(matches!(
            rect_prob(&m, &[iv(0.0, 1.0), iv(0.0, 1.0)], &[0.0].into()),
            Err(Error::NonDiagonalCovariance)
        ));
    }

    #[test]
    fn rectangle_and_complement_partition_sum_to_one() {
        // Complement of (-1,1)x(-2,0.5) split into four rectangles.
        let m = iso2();
        let theta: ParameterPoint = [0.4, -0.3].into();
        let inner = rect_prob(&m, &[iv(-1.0, 1.0), iv(-2.0, 0.5)], &theta).unwrap();
        let pieces = [
            [iv(-INF, -1.0), iv(-INF, INF)],
            [iv(1.0, INF), iv(-INF, INF)],
            [iv(-1.0, 1.0), iv(-INF, -2.0)],
            [iv(-1.0, 1.0), iv(0.5, INF)],
        ];
        let rest: f64 = pieces
            .iter()
            .map(|r| rect_prob(&m, r, &theta).unwrap())
            .sum();
        assert!((inner + rest - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn marginal_derivatives_match_finite_differences() {
        let m = scalar();
        let rect = iv(-0.7, 1.9);
        let theta = [0.3, 0.8];
        let mg = &m.marginals(&theta.into()).unwrap()[0];
        let (_, dmean, dvar) = mg.interval(&rect);
        let h = 1e-6;
        let f = |a: f64, b: f64| rect_prob(&m, &[rect], &[a, b].into()).unwrap();
        let fd_mean = (f(theta[0] + h, theta[1]) - f(theta[0] - h, theta[1])) / (2.0 * h);
        let fd_var = (f(theta[0], theta[1] + h) - f(theta[0], theta[1] - h)) / (2.0 * h);
        assert!((dmean - fd_mean).abs() < 1e-8);
        assert!((dvar - fd_var).abs() < 1e-8);
    }

    #[test]
    fn score_has_zero_mean_direction_for_scalar() {
        let m = scalar();
        // At x = mean the mean-score is zero and the variance-score is -1/(2 beta).
        let s = m.score(&[0.5], &[0.5, 2.0].into()).unwrap();
        assert_eq!(s[0], 0.0);
        assert!((s[1] + 0.25).abs() < 1e-15);
    }

    #[test]
    fn parameter_space_membership() {
        let space = ParameterSpace {
            lower: vec![-INF, BETA_MIN],
            upper: vec![INF, INF],
            open: vec![1],
        };
        assert!(space.check().is_empty());
        assert!(space.contains(&[0.0, 1.0].into()));
        assert!(!space.contains(&[0.0, BETA_MIN].into()));
        assert!(!space.contains(&[0.0, -1.0].into()));
        assert!(!space.contains(&[0.0].into()));
        let bad = ParameterSpace {
            lower: vec![1.0],
            upper: vec![1.0],
            open: vec![],
        };
        assert_eq!(bad.check().len(), 1);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn rect_prob_monotone_under_inclusion(
                a in -3.0f64..0.0, w in 0.01f64..3.0, grow_l in 0.0f64..2.0, grow_r in 0.0f64..2.0,
                mean in -2.0f64..2.0, var in 0.05f64..5.0,
            ) {
                let m = scalar();
                let theta: ParameterPoint = [mean, var].into();
                let small = rect_prob(&m, &[iv(a, a + w)], &theta).unwrap();
                let big = rect_prob(&m, &[iv(a - grow_l, a + w + grow_r)], &theta).unwrap();
                prop_assert!(small <= big);
            }

            #[test]
            fn scalar_pdf_symmetric_about_mean(t in 0.0f64..6.0, mean in -5.0f64..5.0, var in 0.01f64..10.0) {
                let m = scalar();
                let theta: ParameterPoint = [mean, var].into();
                let up = pdf(&m, &[mean + t], &theta).unwrap();
                let down = pdf(&m, &[mean - t], &theta).unwrap();
                prop_assert!(up >= 0.0);
                prop_assert!((up - down).abs() <= 1e-14);
            }
        }
    }
}
