//! Posterior summarization, convergence diagnostics, per-player
//! classification, the binomial comparison with the Coricelli study, and
//! the covariate regression.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;
use statrs::distribution::{ContinuousCDF, StudentsT};
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::sampler::PosteriorSamples;

/// Moment and quantile summary of one scalar parameter.
#[derive(Debug, Clone, Serialize)]
pub struct Stats {
    pub mean: f64,
    pub sd: f64,
    pub q025: f64,
    pub q05: f64,
    pub q50: f64,
    pub q95: f64,
    pub q975: f64,
}

impl Stats {
    pub fn from_values(values: &[f64]) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::domain("cannot summarize an empty chain"));
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        let mut sorted = values.to_vec();
        sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let q = |frac: f64| quantile_sorted(&sorted, frac);
        Ok(Stats {
            mean,
            sd: var.sqrt(),
            q025: q(0.025),
            q05: q(0.05),
            q50: q(0.50),
            q95: q(0.95),
            q975: q(0.975),
        })
    }
}

/// Linear-interpolated quantile of pre-sorted data.
fn quantile_sorted(sorted: &[f64], frac: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let pos = frac * (n - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let t = pos - lo as f64;
    sorted[lo] * (1.0 - t) + sorted[hi] * t
}

/// Summaries of all shared hyperparameters plus the per-draw product
/// rho * q0.
#[derive(Debug, Clone, Serialize)]
pub struct PosteriorSummary {
    pub params: BTreeMap<String, Stats>,
}

pub fn summarize(samples: &PosteriorSamples) -> Result<PosteriorSummary> {
    if samples.draws.is_empty() {
        return Err(Error::domain("cannot summarize empty posterior samples"));
    }
    let mut params = BTreeMap::new();
    for name in ["rho", "q0", "q1", "rho_q0", "w1", "w2", "w3", "w4", "w5"] {
        let col = samples.column(name).unwrap();
        params.insert(name.to_string(), Stats::from_values(&col)?);
    }
    Ok(PosteriorSummary { params })
}

/// Gaussian kernel density estimate on `grid` with Silverman's bandwidth.
pub fn kde(values: &[f64], grid: &[f64]) -> Vec<f64> {
    let n = values.len() as f64;
    if values.is_empty() {
        return vec![0.0; grid.len()];
    }
    let mean = values.iter().sum::<f64>() / n;
    let sd = (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt();
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let iqr = quantile_sorted(&sorted, 0.75) - quantile_sorted(&sorted, 0.25);
    let spread = if iqr > 0.0 { sd.min(iqr / 1.34) } else { sd };
    let h = (0.9 * spread * n.powf(-0.2)).max(1e-9);
    let norm = 1.0 / (n * h * (2.0 * std::f64::consts::PI).sqrt());
    grid.iter()
        .map(|&x| {
            norm * values
                .iter()
                .map(|&v| (-0.5 * ((x - v) / h).powi(2)).exp())
                .sum::<f64>()
        })
        .collect()
}

/// Fraction of retained draws in which player `i` is k-step compatible
/// (phi exactly zero and convex).
pub fn player_compliance(samples: &PosteriorSamples, i: usize) -> f64 {
    let n = samples.draws.len();
    if n == 0 {
        return 0.0;
    }
    let hits = samples
        .draws
        .iter()
        .filter(|d| d.players[i].phi == 0.0 && d.players[i].theta().is_convex())
        .count();
    hits as f64 / n as f64
}

/// Per-player (compliance probability, classified flag). Classification
/// uses the strict > 1/2 rule.
pub fn classify(samples: &PosteriorSamples) -> Vec<(f64, bool)> {
    (0..samples.n_players())
        .map(|i| {
            let p = player_compliance(samples, i);
            (p, p > 0.5)
        })
        .collect()
}

/// Geweke z-score comparing the mean of the first `frac_first` of the
/// chain against the last `frac_last`, with batch-means variance
/// estimates (20 batches per segment).
pub fn geweke_z(chain: &[f64], frac_first: f64, frac_last: f64) -> Result<f64> {
    if chain.len() < 100 {
        return Err(Error::domain(format!(
            "geweke_z needs a chain of length >= 100, got {}",
            chain.len()
        )));
    }
    let n = chain.len();
    let na = ((n as f64 * frac_first) as usize).max(20);
    let nb = ((n as f64 * frac_last) as usize).max(20);
    let a = &chain[..na];
    let b = &chain[n - nb..];
    let (ma, va) = batch_means_variance(a);
    let (mb, vb) = batch_means_variance(b);
    if va == 0.0 && vb == 0.0 {
        return Err(Error::domain(
            "geweke_z: both segments have zero variance (degenerate chain)",
        ));
    }
    Ok((ma - mb) / (va + vb).sqrt())
}

/// Mean of a segment and the batch-means estimate of Var(mean).
fn batch_means_variance(seg: &[f64]) -> (f64, f64) {
    const N_BATCHES: usize = 20;
    let n = seg.len();
    let mean = seg.iter().sum::<f64>() / n as f64;
    let batch = n / N_BATCHES;
    let mut means = Vec::with_capacity(N_BATCHES);
    for b in 0..N_BATCHES {
        let s = &seg[b * batch..(b + 1) * batch];
        means.push(s.iter().sum::<f64>() / batch as f64);
    }
    let bm = means.iter().sum::<f64>() / N_BATCHES as f64;
    let bv = means.iter().map(|m| (m - bm).powi(2)).sum::<f64>() / (N_BATCHES - 1) as f64;
    (mean, bv / N_BATCHES as f64)
}

/// Log binomial pmf.
fn ln_binom_pmf(k: u64, n: u64, p: f64) -> f64 {
    if p <= 0.0 {
        return if k == 0 { 0.0 } else { f64::NEG_INFINITY };
    }
    if p >= 1.0 {
        return if k == n { 0.0 } else { f64::NEG_INFINITY };
    }
    let (kf, nf) = (k as f64, n as f64);
    ln_gamma(nf + 1.0) - ln_gamma(kf + 1.0) - ln_gamma(nf - kf + 1.0)
        + kf * p.ln()
        + (nf - kf) * (1.0 - p).ln()
}

/// Posterior-averaged probability of observing `m` k-step compatible
/// strategies out of `n`, with per-draw success probability rho * q0.
pub fn coricelli_probability(samples: &PosteriorSamples, m: u64, n: u64) -> f64 {
    if samples.draws.is_empty() {
        return 0.0;
    }
    samples
        .draws
        .iter()
        .map(|d| ln_binom_pmf(m, n, d.rho * d.q0).exp())
        .sum::<f64>()
        / samples.draws.len() as f64
}

/// Per-player posterior strategy curve with a pointwise 95% credible band.
#[derive(Debug, Clone, Serialize)]
pub struct PlayerReport {
    pub compliance: f64,
    pub classified_compliant: bool,
    pub p_grid: Vec<f64>,
    pub mean: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

/// Pointwise mean and 2.5/97.5% quantiles of the strategy curve draws for
/// player `i` over `p_grid`.
pub fn strategy_band(samples: &PosteriorSamples, i: usize, p_grid: &[f64]) -> PlayerReport {
    let n = samples.draws.len();
    let mut mean = Vec::with_capacity(p_grid.len());
    let mut lower = Vec::with_capacity(p_grid.len());
    let mut upper = Vec::with_capacity(p_grid.len());
    for &p in p_grid {
        let mut vals: Vec<f64> = samples
            .draws
            .iter()
            .map(|d| d.players[i].theta().eval(p))
            .collect();
        vals.sort_by(|a, b| a.partial_cmp(b).unwrap());
        mean.push(vals.iter().sum::<f64>() / n as f64);
        lower.push(quantile_sorted(&vals, 0.025));
        upper.push(quantile_sorted(&vals, 0.975));
    }
    let compliance = player_compliance(samples, i);
    PlayerReport {
        compliance,
        classified_compliant: compliance > 0.5,
        p_grid: p_grid.to_vec(),
        mean,
        lower,
        upper,
    }
}

/// One row of the OLS coefficient table.
#[derive(Debug, Clone, Serialize)]
pub struct Coefficient {
    pub name: String,
    pub estimate: f64,
    pub std_error: f64,
    pub t_stat: f64,
    pub p_value: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct CoefTable {
    pub coefficients: Vec<Coefficient>,
    pub residual_df: usize,
    pub r_squared: f64,
}

/// Ordinary least squares of `y` on named columns, with an intercept
/// prepended, and two-sided t-test p-values per coefficient.
///
/// A rank-deficient design is an error naming the collinear columns; no
/// column is ever dropped silently.
pub fn covariate_regression(
    y: &[f64],
    columns: &[(String, Vec<f64>)],
    // kept separate so callers can rescale the response without renaming
) -> Result<CoefTable> {
    let n = y.len();
    if n == 0 {
        return Err(Error::domain("regression requires at least one observation"));
    }
    for (name, col) in columns {
        if col.len() != n {
            return Err(Error::domain(format!(
                "column {name} has {} rows, response has {n}",
                col.len()
            )));
        }
    }
    let k = columns.len() + 1;
    if n <= k {
        return Err(Error::domain(format!(
            "need more observations ({n}) than coefficients ({k})"
        )));
    }
    let mut names = vec!["intercept".to_string()];
    names.extend(columns.iter().map(|(n, _)| n.clone()));

    let mut x = DMatrix::zeros(n, k);
    for r in 0..n {
        x[(r, 0)] = 1.0;
        for (c, (_, col)) in columns.iter().enumerate() {
            x[(r, c + 1)] = col[r];
        }
    }
    let yv = DVector::from_column_slice(y);

    // detect collinear columns by sequential orthogonalization so the
    // offending columns can be named
    let mut basis: Vec<DVector<f64>> = Vec::new();
    let mut bad: Vec<String> = Vec::new();
    for (j, name) in names.iter().enumerate() {
        let mut v: DVector<f64> = x.column(j).clone_owned();
        let orig_norm = v.norm();
        for b in &basis {
            let proj = b.dot(&v);
            v -= b * proj;
        }
        let norm = v.norm();
        if norm <= orig_norm.max(1e-300) * 1e-8 {
            bad.push(name.clone());
        } else {
            basis.push(v / norm);
        }
    }
    if !bad.is_empty() {
        return Err(Error::Collinear(bad));
    }

    let xtx = x.transpose() * &x;
    let xtx_inv = xtx
        .try_inverse()
        .ok_or_else(|| Error::Collinear(names.clone()))?;
    let beta = &xtx_inv * x.transpose() * &yv;
    let fitted = &x * &beta;
    let resid = &yv - &fitted;
    let df = n - k;
    let sigma2 = resid.dot(&resid) / df as f64;
    let ybar = y.iter().sum::<f64>() / n as f64;
    let tss: f64 = y.iter().map(|v| (v - ybar).powi(2)).sum();
    let r_squared = if tss > 0.0 {
        1.0 - resid.dot(&resid) / tss
    } else {
        1.0
    };

    let tdist = StudentsT::new(0.0, 1.0, df as f64)
        .map_err(|e| Error::domain(format!("t distribution: {e}")))?;
    let coefficients = (0..k)
        .map(|j| {
            let se = (sigma2 * xtx_inv[(j, j)]).sqrt();
            let est = beta[j];
            let (t_stat, p_value) = if se > 0.0 {
                let t = est / se;
                (t, 2.0 * (1.0 - tdist.cdf(t.abs())))
            } else if est == 0.0 {
                (0.0, 1.0)
            } else {
                (f64::INFINITY * est.signum(), 0.0)
            };
            Coefficient {
                name: names[j].clone(),
                estimate: est,
                std_error: se,
                t_stat,
                p_value,
            }
        })
        .collect();

    Ok(CoefTable {
        coefficients,
        residual_df: df,
        r_squared,
    })
}
