//! Truncated-normal renewable production scenarios.

use alloc::format;
use alloc::vec::Vec;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::grid::{GridCase, ScenarioSet};

/// Rejections allowed per sample before falling back to clamping.
pub const MAX_REJECTIONS: usize = 1000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub count: usize,
    /// Forecast mean as a fraction of capacity, one entry per unit or a single shared entry.
    pub mean_fraction: Vec<f64>,
    /// Standard deviation as a fraction of capacity, same layout as `mean_fraction`.
    pub std_fraction: Vec<f64>,
    pub seed: u64,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig { count: 20, mean_fraction: alloc::vec![0.5], std_fraction: alloc::vec![0.2], seed: 0 }
    }
}

impl ScenarioConfig {
    pub fn uniform(count: usize, mean_fraction: f64, std_fraction: f64, seed: u64) -> Self {
        ScenarioConfig { count, mean_fraction: alloc::vec![mean_fraction], std_fraction: alloc::vec![std_fraction], seed }
    }

    fn per_unit(v: &[f64], k: usize, what: &str) -> Result<Vec<f64>, Error> {
        match v.len() {
            1 => Ok(alloc::vec![v[0]; k]),
            n if n == k => Ok(v.to_vec()),
            n => Err(Error::Config(format!("{what} has {n} entries for {k} units"))),
        }
    }

    pub fn validate(&self, units: usize) -> Result<(Vec<f64>, Vec<f64>), Error> {
        if self.count == 0 {
            return Err(Error::Config("scenario count must be at least 1".into()));
        }
        let mean = Self::per_unit(&self.mean_fraction, units, "mean_fraction")?;
        let std = Self::per_unit(&self.std_fraction, units, "std_fraction")?;
        if mean.iter().any(|m| !(0.0..=1.0).contains(m)) {
            return Err(Error::Config("mean_fraction must lie in [0, 1]".into()));
        }
        if std.iter().any(|s| !(s.is_finite() && *s >= 0.0)) {
            return Err(Error::Config("std_fraction must be nonnegative".into()));
        }
        Ok((mean, std))
    }
}

/// Draws `count` equally likely scenarios, each unit independent, from a
/// normal distribution truncated to `[0, capacity]` by rejection.
pub fn generate_scenarios(case: &GridCase, config: &ScenarioConfig) -> Result<ScenarioSet, Error> {
    let k = case.vres_units.len();
    let (mean, std) = config.validate(k)?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut realizations = alloc::vec![alloc::vec![0.0; k]; config.count];
    // Unit-major draws keep a unit's samples independent of how many units follow it.
    for (u, unit) in case.vres_units.iter().enumerate() {
        let cap = unit.capacity_mw;
        let mu = mean[u] * cap;
        let sigma = std[u] * cap;
        if sigma == 0.0 {
            for row in realizations.iter_mut() {
                row[u] = mu;
            }
            continue;
        }
        let normal = Normal::new(mu, sigma).map_err(|e| Error::Config(format!("{e}")))?;
        for row in realizations.iter_mut() {
            let mut value = None;
            for _ in 0..MAX_REJECTIONS {
                let x = normal.sample(&mut rng);
                if (0.0..=cap).contains(&x) {
                    value = Some(x);
                    break;
                }
            }
            // Clamping after the cap biases toward the bounds; only hit for extreme configs.
            row[u] = value.unwrap_or_else(|| normal.sample(&mut rng).clamp(0.0, cap));
        }
    }
    ScenarioSet::uniform(realizations)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{Bus, GridCase, VresUnit};

    fn case(caps: &[f64]) -> GridCase {
        GridCase {
            buses: alloc::vec![Bus { id: 0, name: "b".into() }],
            lines: alloc::vec![],
            conventional_units: alloc::vec![],
            vres_units: caps.iter().map(|&c| VresUnit { bus: 0, capacity_mw: c }).collect(),
            loads: alloc::vec![],
            voll: 1000.0,
            reference_bus: 0,
        }
    }

    #[test]
    fn zero_spread_gives_the_mean() {
        let s = generate_scenarios(&case(&[100.0, 40.0]), &ScenarioConfig::uniform(5, 0.3, 0.0, 1)).unwrap();
        for r in &s.realizations {
            assert_eq!(r, &alloc::vec![30.0, 12.0]);
        }
    }

    #[test]
    fn shape_and_truncation() {
        let caps: Vec<f64> = (0..14).map(|i| 50.0 + 10.0 * i as f64).collect();
        let s = generate_scenarios(&case(&caps), &ScenarioConfig::uniform(20, 0.5, 0.6, 7)).unwrap();
        assert_eq!(s.len(), 20);
        assert_eq!(s.num_units(), 14);
        for r in &s.realizations {
            for (v, c) in r.iter().zip(&caps) {
                assert!(*v >= 0.0 && v <= c);
            }
        }
    }

    #[test]
    fn seeded_generation_is_reproducible() {
        let c = case(&[80.0, 120.0]);
        let cfg = ScenarioConfig::uniform(30, 0.5, 0.2, 42);
        assert_eq!(generate_scenarios(&c, &cfg).unwrap(), generate_scenarios(&c, &cfg).unwrap());
        let other = ScenarioConfig { seed: 43, ..cfg };
        assert_ne!(generate_scenarios(&c, &other).unwrap(), generate_scenarios(&c, &ScenarioConfig::uniform(30, 0.5, 0.2, 42)).unwrap());
    }

    #[test]
    fn sample_mean_matches_truncated_normal_mean() {
        // Truncated normal on [0, 1] with mu = 0.3, sigma = 0.4 (capacity 1).
        let (mu, sigma) = (0.3f64, 0.4f64);
        let s = generate_scenarios(&case(&[1.0]), &ScenarioConfig::uniform(10_000, mu, sigma, 5)).unwrap();
        let xs: Vec<f64> = s.realizations.iter().map(|r| r[0]).collect();
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);

        let pdf = |z: f64| libm::exp(-0.5 * z * z) / libm::sqrt(2.0 * core::f64::consts::PI);
        let cdf = |z: f64| 0.5 * libm::erfc(-z / core::f64::consts::SQRT_2);
        let (a, b) = ((0.0 - mu) / sigma, (1.0 - mu) / sigma);
        let expected = mu + sigma * (pdf(a) - pdf(b)) / (cdf(b) - cdf(a));
        let se = libm::sqrt(var / n);
        assert!((mean - expected).abs() <= 3.0 * se, "mean {mean} expected {expected} se {se}");
    }

    #[test]
    fn rejects_bad_configs() {
        let c = case(&[10.0, 10.0]);
        assert!(generate_scenarios(&c, &ScenarioConfig::uniform(0, 0.5, 0.2, 0)).is_err());
        assert!(generate_scenarios(&c, &ScenarioConfig::uniform(3, 1.5, 0.2, 0)).is_err());
        let cfg = ScenarioConfig { mean_fraction: alloc::vec![0.1, 0.2, 0.3], ..ScenarioConfig::default() };
        assert!(generate_scenarios(&c, &cfg).is_err());
    }
}
