use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Compiled, Expr};
use crate::error::{Error, Result};

pub const DEFAULT_SEED: u64 = 0x5eed_f4a3;

/// Random point generator over a box, with per-variable overrides.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Sampler {
    pub lo: f64,
    pub hi: f64,
    #[serde(default)]
    pub ranges: BTreeMap<String, (f64, f64)>,
    pub seed: u64,
}

impl Default for Sampler {
    fn default() -> Self {
        Sampler {
            lo: 0.5,
            hi: 1.5,
            ranges: BTreeMap::new(),
            seed: DEFAULT_SEED,
        }
    }
}

impl Sampler {
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_range(mut self, var: &str, lo: f64, hi: f64) -> Self {
        self.ranges.insert(var.to_string(), (lo, hi));
        self
    }

    pub fn range(&self, var: &str) -> (f64, f64) {
        self.ranges.get(var).copied().unwrap_or((self.lo, self.hi))
    }

    pub fn rng(&self) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(self.seed)
    }

    pub fn draw(&self, rng: &mut impl Rng, names: &[String]) -> Vec<f64> {
        names
            .iter()
            .map(|n| {
                let (lo, hi) = self.range(n);
                if hi > lo {
                    rng.gen_range(lo..hi)
                } else {
                    lo
                }
            })
            .collect()
    }

    /// Draws `n` points at which every expression in `guards` evaluates.
    /// At most `10 n` candidates are tried.
    pub fn valid_points(&self, names: &[String], guards: &[&Expr], n: usize) -> Result<Vec<Vec<f64>>> {
        let compiled = guards
            .iter()
            .map(|g| Compiled::new(g, names))
            .collect::<Result<Vec<_>>>()?;
        let mut rng = self.rng();
        let mut out = Vec::with_capacity(n);
        for _ in 0..10 * n.max(1) {
            if out.len() == n {
                break;
            }
            let p = self.draw(&mut rng, names);
            if compiled.iter().all(|c| c.eval(&p).is_ok()) {
                out.push(p);
            }
        }
        if out.len() < n {
            return Err(Error::SamplingExhausted { found: out.len(), wanted: n });
        }
        Ok(out)
    }

    /// Largest scaled discrepancy `|a-b| / (1 + max(|a|,|b|))` over
    /// `trials` valid points.
    pub fn max_discrepancy(&self, e1: &Expr, e2: &Expr, trials: usize) -> Result<f64> {
        let mut names: Vec<String> = e1.vars().into_iter().collect();
        for v in e2.vars() {
            if !names.contains(&v) {
                names.push(v);
            }
        }
        names.sort();
        let a = Compiled::new(e1, &names)?;
        let b = Compiled::new(e2, &names)?;
        let mut rng = self.rng();
        let mut found = 0;
        let mut worst: f64 = 0.0;
        for _ in 0..10 * trials.max(1) {
            if found == trials {
                break;
            }
            let p = self.draw(&mut rng, &names);
            let (Ok(x), Ok(y)) = (a.eval(&p), b.eval(&p)) else {
                continue;
            };
            found += 1;
            worst = worst.max((x - y).abs() / (1.0 + x.abs().max(y.abs())));
        }
        if found < trials {
            return Err(Error::SamplingExhausted { found, wanted: trials });
        }
        Ok(worst)
    }

    pub fn probably_equal(&self, e1: &Expr, e2: &Expr, trials: usize, tol: f64) -> Result<bool> {
        if e1 == e2 {
            return Ok(true);
        }
        Ok(self.max_discrepancy(e1, e2, trials)? <= tol)
    }
}
