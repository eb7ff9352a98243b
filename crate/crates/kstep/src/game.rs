//! Structural k-step thinking model for p-beauty contests.
//!
//! A k-step player is parameterized by a scalar anchor `mu0` (her belief
//! about the mean play of purely random opponents, on the unit scale) and a
//! lower-triangular right-stochastic belief matrix describing how she thinks
//! lower-level players reason. Her optimal response is computed by iterating
//!
//! ```text
//! mu^1 = p * mu0
//! mu^(g+1) = p * sum_j omega(g, j) * mu^(j-1)
//! ```
//!
//! once per belief row, so a k-step player applies the recursion k times and
//! responds with `mu^k`. The module also resolves beauty-contest winners and
//! checks the structural bounds any k-step response must satisfy.

use crate::error::{Error, Result};

/// Row-sum tolerance for belief-matrix validation.
pub const ROW_SUM_TOL: f64 = 1e-9;

/// Lower-triangular right-stochastic belief matrix.
///
/// For a k-step player the matrix has k-1 rows of k entries each; row `g`
/// (1-indexed) may only have mass in columns 1..=g+1.
#[derive(Debug, Clone, PartialEq)]
pub struct BeliefMatrix {
    k: usize,
    rows: Vec<Vec<f64>>,
}

impl BeliefMatrix {
    /// Validates and wraps a (k-1) x k array of beliefs.
    ///
    /// Rows must sum to one within 1e-9, entries must lie in [0,1], and
    /// entries above the superdiagonal must be exactly zero. Normalization
    /// is never performed silently.
    pub fn new(rows: Vec<Vec<f64>>, k: usize) -> Result<Self> {
        if k == 0 {
            return Err(Error::domain("k must be at least 1"));
        }
        if rows.len() != k - 1 || rows.iter().any(|r| r.len() != k) {
            return Err(Error::Shape {
                k,
                rows: rows.len(),
                cols: rows.first().map_or(k, Vec::len),
            });
        }
        for (g, row) in rows.iter().enumerate() {
            for (j, &v) in row.iter().enumerate() {
                if !(0.0..=1.0).contains(&v) || !v.is_finite() {
                    return Err(Error::EntryRange {
                        row: g + 1,
                        col: j + 1,
                        value: v,
                    });
                }
                // physical row g+1 may occupy columns 1..=g+2 (1-indexed)
                if j > g + 1 && v != 0.0 {
                    return Err(Error::Structure {
                        row: g + 1,
                        col: j + 1,
                        value: v,
                    });
                }
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > ROW_SUM_TOL {
                return Err(Error::RowSum { row: g + 1, sum });
            }
        }
        Ok(BeliefMatrix { k, rows })
    }

    /// Empty matrix of a 1-step player (no belief rows).
    pub fn empty() -> Self {
        BeliefMatrix {
            k: 1,
            rows: Vec::new(),
        }
    }

    /// CH-Poisson beliefs: row g holds the Poisson(tau) pmf over levels
    /// 0..=g, truncated and renormalized.
    pub fn ch_poisson(k: usize, tau: f64) -> Result<Self> {
        if k < 2 {
            return Err(Error::domain(format!(
                "ch_poisson requires k >= 2, got {k}"
            )));
        }
        if tau <= 0.0 || tau.is_nan() {
            return Err(Error::domain(format!("tau must be positive, got {tau}")));
        }
        // f(m) = e^-tau tau^m / m!; the e^-tau factor cancels in each ratio.
        let mut pmf = vec![1.0f64; k];
        for m in 1..k {
            pmf[m] = pmf[m - 1] * tau / m as f64;
        }
        let rows = (1..k)
            .map(|g| {
                let norm: f64 = pmf[..=g].iter().sum();
                (0..k)
                    .map(|j| if j <= g { pmf[j] / norm } else { 0.0 })
                    .collect()
            })
            .collect();
        Self::new(rows, k)
    }

    /// Level-k beliefs: every row puts all mass one level below.
    pub fn level_k(k: usize) -> Result<Self> {
        if k < 2 {
            return Err(Error::domain(format!("level_k requires k >= 2, got {k}")));
        }
        let rows = (1..k)
            .map(|g| (0..k).map(|j| if j == g { 1.0 } else { 0.0 }).collect())
            .collect();
        Self::new(rows, k)
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }
}

/// A player who reasons `k` steps from anchor `mu0` under `beliefs`.
#[derive(Debug, Clone)]
pub struct KStepPlayer {
    k: usize,
    mu0: f64,
    beliefs: BeliefMatrix,
}

impl KStepPlayer {
    pub fn new(k: usize, mu0: f64, beliefs: BeliefMatrix) -> Result<Self> {
        if k == 0 {
            return Err(Error::domain("k must be at least 1"));
        }
        if !(mu0 > 0.0 && mu0 < 1.0) {
            return Err(Error::domain(format!(
                "mu0 must lie strictly inside (0,1), got {mu0}"
            )));
        }
        if beliefs.rows().len() != k - 1 {
            return Err(Error::domain(format!(
                "player with k={k} needs {} belief rows, got {}",
                k - 1,
                beliefs.rows().len()
            )));
        }
        Ok(KStepPlayer { k, mu0, beliefs })
    }

    /// 1-step player: responds `p * mu0` with no belief matrix.
    pub fn level_one(mu0: f64) -> Result<Self> {
        Self::new(1, mu0, BeliefMatrix::empty())
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn mu0(&self) -> f64 {
        self.mu0
    }

    pub fn beliefs(&self) -> &BeliefMatrix {
        &self.beliefs
    }

    /// Optimal response mu^k at game parameter `p`.
    pub fn optimal_response(&self, p: f64) -> f64 {
        // mu[h] = mu^h; mu^0 is the anchor itself.
        let mut mu = Vec::with_capacity(self.k + 1);
        mu.push(self.mu0);
        mu.push(p * self.mu0);
        for (r, row) in self.beliefs.rows().iter().enumerate() {
            // physical row r (0-indexed) yields recursion level r+2
            let s: f64 = (0..=r + 1).map(|j| row[j] * mu[j]).sum();
            mu.push(p * s);
        }
        mu[self.k]
    }

    /// Coefficients (a_1..a_k) with `optimal_response(p) = sum a_j p^j`,
    /// propagated symbolically through the recursion.
    pub fn monomial_coeffs(&self) -> Vec<f64> {
        // poly[h][d] = coefficient of p^d in mu^h
        let n = self.k + 1;
        let mut poly: Vec<Vec<f64>> = Vec::with_capacity(n);
        let mut c0 = vec![0.0; n];
        c0[0] = self.mu0;
        poly.push(c0);
        poly.push(shift(&poly[0], n));
        for (r, row) in self.beliefs.rows().iter().enumerate() {
            let mut acc = vec![0.0; n];
            for j in 0..=r + 1 {
                for d in 0..n {
                    acc[d] += row[j] * poly[j][d];
                }
            }
            poly.push(shift(&acc, n));
        }
        poly[self.k][1..].to_vec()
    }

    /// Condition iii bounds: the response lies in [p^k mu0, p mu0] (closed;
    /// the extreme belief matrices attain the endpoints).
    pub fn within_compatibility_bounds(&self, p: f64) -> bool {
        let r = self.optimal_response(p);
        let lo = p.powi(self.k as i32) * self.mu0;
        let hi = p * self.mu0;
        r >= lo - 1e-12 && r <= hi + 1e-12
    }
}

/// Multiply a polynomial by p (shift coefficients up one degree).
fn shift(c: &[f64], n: usize) -> Vec<f64> {
    let mut out = vec![0.0; n];
    out[1..n].copy_from_slice(&c[..n - 1]);
    out
}

/// Outcome of one beauty contest: target and the set of winning indices.
#[derive(Debug, Clone, PartialEq)]
pub struct GameOutcome {
    pub target: f64,
    pub winners: Vec<usize>,
}

/// Resolves a contest: target is p times the mean play; winners are all
/// players attaining the minimum distance to the target.
pub fn play_game(plays: &[f64], p: f64) -> Result<GameOutcome> {
    if plays.is_empty() {
        return Err(Error::domain("play_game requires at least one play"));
    }
    let mean = plays.iter().sum::<f64>() / plays.len() as f64;
    let target = p * mean;
    let dist: Vec<f64> = plays.iter().map(|x| (x - target).abs()).collect();
    let best = dist.iter().cloned().fold(f64::INFINITY, f64::min);
    let winners = dist
        .iter()
        .enumerate()
        .filter(|(_, &d)| d == best)
        .map(|(i, _)| i)
        .collect();
    Ok(GameOutcome { target, winners })
}
