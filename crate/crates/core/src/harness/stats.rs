use serde::Serialize;
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::{Error, Result};

/// Smallest pooled count (two-sample) or expected count (one-sample) per bin.
pub const MIN_POOLED: f64 = 10.0;
pub const MIN_EXPECTED: f64 = 5.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MCEstimate {
    pub value: f64,
    pub stderr: f64,
    pub n: u64,
    pub seed: u64,
}

impl MCEstimate {
    /// Frequency of `hits` among `n` trials; sample standard deviation over √n.
    pub fn from_count(hits: u64, n: u64, seed: u64) -> Result<Self> {
        if n < 2 || hits > n {
            return Err(Error::Config(format!(
                "need n >= 2 and hits <= n, got {hits}/{n}"
            )));
        }
        let p = hits as f64 / n as f64;
        let var = p * (1.0 - p) * n as f64 / (n - 1) as f64;
        Ok(Self {
            value: p,
            stderr: (var / n as f64).sqrt(),
            n,
            seed,
        })
    }

    pub fn from_samples(xs: &[f64], seed: u64) -> Result<Self> {
        let n = xs.len();
        if n < 2 {
            return Err(Error::Config("need at least two samples".into()));
        }
        let mean = xs.iter().sum::<f64>() / n as f64;
        let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1) as f64;
        Ok(Self {
            value: mean,
            stderr: (var / n as f64).sqrt(),
            n: n as u64,
            seed,
        })
    }

    /// (value − expected) / stderr. A zero stderr gives 0 on an exact match
    /// and ±∞ otherwise.
    pub fn z_score(&self, expected: f64) -> f64 {
        let d = self.value - expected;
        if self.stderr > 0.0 {
            d / self.stderr
        } else if d == 0.0 {
            0.0
        } else {
            d.signum() * f64::INFINITY
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ChiSquare {
    pub statistic: f64,
    pub dof: usize,
    pub p_value: f64,
    /// Bins after pooling.
    pub bins: usize,
}

fn p_value(statistic: f64, dof: usize) -> f64 {
    if dof == 0 {
        return 1.0;
    }
    let dist = ChiSquared::new(dof as f64).expect("positive degrees of freedom");
    dist.sf(statistic)
}

/// Runs of consecutive bins are pooled until `weight` reaches `min`; a short
/// final run joins the previous group.
fn pool<F: Fn(usize) -> f64>(len: usize, weight: F, min: f64) -> Vec<Vec<usize>> {
    let mut groups: Vec<Vec<usize>> = Vec::new();
    let mut cur = Vec::new();
    let mut w = 0.0;
    for i in 0..len {
        cur.push(i);
        w += weight(i);
        if w >= min {
            groups.push(std::mem::take(&mut cur));
            w = 0.0;
        }
    }
    if !cur.is_empty() {
        match groups.last_mut() {
            Some(g) => g.extend(cur),
            None => groups.push(cur),
        }
    }
    groups
}

/// Two-sample chi-square test of homogeneity for counts on the same bins.
pub fn chi_square_two_sample(a: &[u64], b: &[u64]) -> Result<ChiSquare> {
    if a.len() != b.len() {
        return Err(Error::BinningMismatch(format!(
            "{} vs {} bins",
            a.len(),
            b.len()
        )));
    }
    let na: u64 = a.iter().sum();
    let nb: u64 = b.iter().sum();
    if na == 0 || nb == 0 {
        return Err(Error::BinningMismatch("an empty sample".into()));
    }
    let groups = pool(a.len(), |i| (a[i] + b[i]) as f64, MIN_POOLED);
    let (ka, kb) = (
        (nb as f64 / na as f64).sqrt(),
        (na as f64 / nb as f64).sqrt(),
    );
    let mut stat = 0.0;
    let mut used = 0;
    for g in &groups {
        let sa: u64 = g.iter().map(|&i| a[i]).sum();
        let sb: u64 = g.iter().map(|&i| b[i]).sum();
        if sa + sb == 0 {
            continue;
        }
        used += 1;
        let d = ka * sa as f64 - kb * sb as f64;
        stat += d * d / (sa + sb) as f64;
    }
    let dof = used.max(1) - 1;
    Ok(ChiSquare {
        statistic: stat,
        dof,
        p_value: p_value(stat, dof),
        bins: used,
    })
}

/// One-sample chi-square test of counts against bin probabilities that sum
/// to one.
pub fn chi_square_vs_probabilities(counts: &[u64], probs: &[f64]) -> Result<ChiSquare> {
    if counts.len() != probs.len() {
        return Err(Error::BinningMismatch(format!(
            "{} counts vs {} probabilities",
            counts.len(),
            probs.len()
        )));
    }
    let total: f64 = probs.iter().sum();
    if (total - 1.0).abs() > 1e-6 || probs.iter().any(|p| !(*p >= 0.0)) {
        return Err(Error::BinningMismatch(format!(
            "bin probabilities sum to {total}"
        )));
    }
    let n: u64 = counts.iter().sum();
    if n == 0 {
        return Err(Error::BinningMismatch("an empty sample".into()));
    }
    let nf = n as f64;
    let groups = pool(counts.len(), |i| nf * probs[i], MIN_EXPECTED);
    let mut stat = 0.0;
    let mut used = 0;
    for g in &groups {
        let o: u64 = g.iter().map(|&i| counts[i]).sum();
        let e: f64 = nf * g.iter().map(|&i| probs[i]).sum::<f64>();
        if e == 0.0 {
            if o > 0 {
                // an impossible outcome was observed
                return Ok(ChiSquare {
                    statistic: f64::INFINITY,
                    dof: groups.len() - 1,
                    p_value: 0.0,
                    bins: groups.len(),
                });
            }
            continue;
        }
        used += 1;
        stat += (o as f64 - e).powi(2) / e;
    }
    let dof = used.max(1) - 1;
    Ok(ChiSquare {
        statistic: stat,
        dof,
        p_value: p_value(stat, dof),
        bins: used,
    })
}

/// Kolmogorov distance between the empirical law of `xs` and U(0, 1).
pub fn ks_uniform(xs: &[f64]) -> f64 {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len() as f64;
    v.iter()
        .enumerate()
        .map(|(i, &x)| (x - i as f64 / n).abs().max(((i + 1) as f64 / n - x).abs()))
        .fold(0.0, f64::max)
}
