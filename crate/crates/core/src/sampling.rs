use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::Result;
use crate::models::{ObservationModel, ParameterPoint};

/// Generator for one sensor: the stream id keeps sensors independent and
/// reproducible no matter which order they are evaluated in.
pub(crate) fn sensor_rng(seed: u64, sensor: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(sensor as u64);
    rng
}

/// Draws `x ~ N(mean(theta), L L^T)`.
pub(crate) struct ObservationSampler {
    mean: Vec<f64>,
    factor: DMatrix<f64>,
    z: Vec<f64>,
}

impl ObservationSampler {
    pub fn new(model: &ObservationModel, theta: &ParameterPoint) -> Result<Self> {
        let mean = model.mean(theta);
        let factor = model.sampling_factor(theta)?;
        let k = mean.len();
        Ok(Self {
            mean,
            factor,
            z: vec![0.0; k],
        })
    }

    pub fn draw(&mut self, rng: &mut ChaCha8Rng, out: &mut [f64]) {
        for z in self.z.iter_mut() {
            *z = StandardNormal.sample(rng);
        }
        for (i, (o, &m)) in out.iter_mut().zip(&self.mean).enumerate() {
            *o = m + (0..=i).map(|j| self.factor[(i, j)] * self.z[j]).sum::<f64>();
        }
    }
}
