//! Small synthetic labeled series families for examples, tests and benchmarks.

use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::data::TimeSeriesDataset;
use crate::error::{Error, Result};
use crate::rng::rng_for;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    /// Class 0 is `+1 + noise`, class 1 is `-1 + noise` at every time point.
    ClassConstant,
    /// `sin(2 pi f t / T) + noise` with `f = 1` for class 0 and `f = 2` for class 1.
    Sines,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticSpec {
    pub family: Family,
    pub n: usize,
    pub t: usize,
    pub noise: f64,
    pub seed: u64,
}

/// Generates `n` univariate series with labels alternating 0, 1, 0, ...
pub fn generate(spec: &SyntheticSpec) -> Result<TimeSeriesDataset> {
    if spec.n < 2 || spec.t == 0 {
        return Err(Error::invalid("synthetic data needs n >= 2 and t >= 1"));
    }
    let noise = Normal::new(0.0, spec.noise).map_err(|e| Error::invalid(format!("noise: {e}")))?;
    let mut rng = rng_for(spec.seed, crate::rng::tag("synthetic"));
    let labels: Vec<usize> = (0..spec.n).map(|i| i % 2).collect();
    let series: Vec<Vec<f64>> = labels
        .iter()
        .map(|&y| {
            (0..spec.t)
                .map(|t| {
                    let base = match spec.family {
                        Family::ClassConstant => 1.0 - 2.0 * y as f64,
                        Family::Sines => {
                            let f = (y + 1) as f64;
                            (2.0 * std::f64::consts::PI * f * t as f64 / spec.t as f64).sin()
                        }
                    };
                    base + noise.sample(&mut rng)
                })
                .collect()
        })
        .collect();
    TimeSeriesDataset::univariate(&series, labels)
}

pub fn class_constant(n: usize, t: usize, noise: f64, seed: u64) -> Result<TimeSeriesDataset> {
    generate(&SyntheticSpec {
        family: Family::ClassConstant,
        n,
        t,
        noise,
        seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn noiseless_class_constant() {
        let ds = class_constant(4, 3, 0.0, 0).unwrap();
        assert_eq!(ds.labels(), &[0, 1, 0, 1]);
        assert_eq!(ds.get(0, 0, 2), Some(1.0));
        assert_eq!(ds.get(1, 0, 0), Some(-1.0));
    }

    #[test]
    fn seeded() {
        let spec = SyntheticSpec {
            family: Family::Sines,
            n: 6,
            t: 20,
            noise: 0.3,
            seed: 5,
        };
        assert_eq!(generate(&spec).unwrap(), generate(&spec).unwrap());
    }
}
