//! Fisher information, inestimable-dimension limits and identifiability
//! diagnostics for distributed estimation from quantized sensor data.
//!
//! A system is described by a [`SystemSpec`]: a parameter space, and for each
//! sensor a Gaussian [`ObservationModel`] followed by a [`SuperQuantizer`].
//! From it the crate computes cell probabilities ([`cellprob`]), the Fisher
//! information and its numerical rank ([`fim`]), the IDQD limits and theorem
//! verdicts ([`idqd`]), observational-equivalence diagnostics
//! ([`identifiability`]) and a seeded maximum-likelihood harness ([`mle`]).

// Negated float comparisons are how NaN gets rejected along with bad values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bound;
pub mod cellprob;
pub mod error;
pub mod fim;
pub mod grid;
pub mod identifiability;
pub mod idqd;
pub mod mle;
pub mod models;
pub mod normal;
pub mod quantizers;
mod sampling;
pub mod spec;
pub mod synth;
pub mod systems;

pub use cellprob::{CellEntry, CellProbabilityTable, Method};
pub use error::{Error, Result, Violation};
pub use fim::{FisherReport, RankBoundCheck};
pub use grid::{Axis, ThetaGrid};
pub use identifiability::{EquivalenceTrace, PhiVector, PsiVector};
pub use idqd::{Theorem, Verdict};
pub use mle::{FitResult, QuantizedDataset};
pub use models::{ObservationModel, ParameterPoint, ParameterSpace};
pub use quantizers::{Cell, Interval, OutcomeVector, Rect, SuperQuantizer, VectorQuantizer};
pub use spec::{parse_spec, Assumption, SystemSpec};

/// Formats a float with 17 significant digits, enough to round-trip any `f64`.
pub fn fmt17(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else if x.is_nan() {
        "nan".to_string()
    } else if x > 0.0 {
        "inf".to_string()
    } else {
        "-inf".to_string()
    }
}
