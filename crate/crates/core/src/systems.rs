//! Ready-made systems: the scalar mean/variance design with one binary
//! interval quantizer, the 2-D mean design with one binary rectangle
//! quantizer, and a 1-parameter two-threshold control design.

use crate::error::Result;
use crate::models::{ObservationModel, ParameterSpace, BETA_MIN};
use crate::quantizers::{Interval, Rect, SuperQuantizer, VectorQuantizer};
use crate::spec::{Assumption, SearchBox, Sensor, SystemSpec};

/// `x ~ N(alpha, beta)`, `theta = (alpha, beta)`, `u = 1` iff `x in [a, b)`.
pub fn scalar_mean_var(a: f64, b: f64) -> Result<SystemSpec> {
    let mut spec = SystemSpec::new(
        ParameterSpace {
            lower: vec![f64::NEG_INFINITY, BETA_MIN],
            upper: vec![f64::INFINITY, f64::INFINITY],
            open: vec![1],
        },
        vec![Sensor::new(
            ObservationModel::ScalarGaussianMeanVar {
                mean_index: 0,
                var_index: 1,
            },
            SuperQuantizer::single(VectorQuantizer::binary_interval(a, b)?),
        )],
    )
    .with_assumptions([Assumption::A1, Assumption::A2, Assumption::A3]);
    spec.name = Some("scalar mean and variance, binary interval quantizer".into());
    spec.search_box = Some(SearchBox {
        lower: vec![-6.0, 0.01],
        upper: vec![6.0, 10.0],
    });
    spec.validate()?;
    Ok(spec)
}

/// `x ~ N(theta, I_2)`, `u = 1` iff `x in [a1, b1) x [a2, b2)`.
pub fn rect_mean(a1: f64, b1: f64, a2: f64, b2: f64) -> Result<SystemSpec> {
    let rect = Rect(vec![Interval::new(a1, b1), Interval::new(a2, b2)]);
    let mut spec = SystemSpec::new(
        ParameterSpace::unbounded(2),
        vec![Sensor::new(
            ObservationModel::IsotropicGaussianMeanVector {
                mean_indices: vec![0, 1],
            },
            SuperQuantizer::single(VectorQuantizer::binary_rect(rect)?),
        )],
    )
    .with_assumptions([Assumption::A1, Assumption::A2, Assumption::A3]);
    spec.name = Some("2-D mean, binary rectangle quantizer".into());
    spec.search_box = Some(SearchBox {
        lower: vec![-4.0, -4.0],
        upper: vec![4.0, 4.0],
    });
    spec.validate()?;
    Ok(spec)
}

/// Two sensors observing `N(theta, 1)` through binary thresholds `t1` and `t2`.
pub fn two_threshold(t1: f64, t2: f64) -> Result<SystemSpec> {
    let sensor = |t: f64| -> Result<Sensor> {
        Ok(Sensor::new(
            ObservationModel::IsotropicGaussianMeanVector { mean_indices: vec![0] },
            SuperQuantizer::single(VectorQuantizer::thresholds(&[t])?),
        ))
    };
    let mut spec = SystemSpec::new(ParameterSpace::unbounded(1), vec![sensor(t1)?, sensor(t2)?])
        .with_assumptions([Assumption::A1, Assumption::A2, Assumption::A3]);
    spec.name = Some("scalar mean, two binary thresholds".into());
    spec.search_box = Some(SearchBox {
        lower: vec![-3.0],
        upper: vec![3.0],
    });
    spec.validate()?;
    Ok(spec)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::idqd::idqd;

    #[test]
    fn builders_validate() {
        let s = scalar_mean_var(-2.0, 2.0).unwrap();
        assert_eq!((s.dim_theta, idqd(&s)), (2, 1));
        let s = rect_mean(-1.0, 1.0, -1.0, 1.0).unwrap();
        assert_eq!((s.dim_theta, idqd(&s)), (2, 1));
        let s = two_threshold(-0.5, 0.5).unwrap();
        assert_eq!((s.dim_theta, idqd(&s)), (1, 2));
        assert!(scalar_mean_var(2.0, -2.0).is_err());
    }
}
