//! The probability model: Beta observation noise, the discrete precision
//! grid, per-player priors and the shared hyperpriors.
//!
//! Responses y_i(p) on the unit scale are modeled as
//!
//! ```text
//! y_i(p) | theta_i, s_i ~ Beta(c mu_i(p), c (1 - mu_i(p)))
//! c = s_i * max(1/mu_i(p), 1/(1 - mu_i(p)))
//! ```
//!
//! with s_i on the fixed grid {1.2, 3, 21, 51, 101}, which keeps both Beta
//! shapes above 1 (unimodal noise). The strategy prior combines Beta(3/2,1)
//! on mu0, a rescaled Beta(5,5) on eta, a zero-inflated spike-and-slab on
//! phi with origin weight rho, and a two-branch uniform on nu split at the
//! convexity threshold with weight q0 (origin strategies) or q1 (others).

use rand::Rng;
use rand_distr::{Beta as BetaDist, Distribution};
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::spline::StrategyParams;

/// The five precision levels of the response model.
pub const S_LEVELS: [f64; 5] = [1.2, 3.0, 21.0, 51.0, 101.0];

/// Dirichlet concentration over the precision levels.
pub const DIRICHLET_ALPHA: [f64; 5] = [0.1, 0.25, 0.3, 0.25, 0.1];

/// Grid index of a precision level, if it is one of the five.
pub fn s_level_index(s: f64) -> Option<usize> {
    S_LEVELS.iter().position(|&l| l == s)
}

/// Shared hyperparameters governing origin, convexity and precision
/// prevalence across players.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HyperParams {
    /// Probability a strategy intersects the origin.
    pub rho: f64,
    /// Probability of convexity given an origin-intersecting strategy.
    pub q0: f64,
    /// Probability of convexity given a non-origin strategy.
    pub q1: f64,
    /// Weights over the precision grid.
    pub w: [f64; 5],
}

/// Per-player sampler state: strategy parameters plus the precision level
/// and the two latent indicators.
#[derive(Debug, Clone, Copy)]
pub struct PlayerLatent {
    pub theta: StrategyParams,
    /// Index into [`S_LEVELS`].
    pub s_index: usize,
    /// True iff phi != 0 (the slab branch).
    pub z: bool,
    /// Convexity indicator; always kept equal to `theta.is_convex()`.
    pub kappa: bool,
}

impl PlayerLatent {
    pub fn s(&self) -> f64 {
        S_LEVELS[self.s_index]
    }

    /// Bookkeeping invariants: z tracks phi and kappa tracks convexity.
    pub fn is_consistent(&self) -> bool {
        self.z == (self.theta.phi != 0.0) && self.kappa == self.theta.is_convex()
    }
}

/// Beta concentration c = s * max(1/mu, 1/(1-mu)).
pub fn concentration(mu: f64, s: f64) -> Result<f64> {
    if !(mu > 0.0 && mu < 1.0) {
        return Err(Error::domain(format!(
            "concentration requires mu strictly inside (0,1), got {mu}"
        )));
    }
    Ok(s * (1.0 / mu).max(1.0 / (1.0 - mu)))
}

/// Beta shape parameters (c mu, c (1 - mu)) for mean `mu` at precision `s`.
pub fn beta_shapes(mu: f64, s: f64) -> (f64, f64) {
    let c = s * (1.0 / mu).max(1.0 / (1.0 - mu));
    (c * mu, c * (1.0 - mu))
}

/// Log Beta(a, b) density at x.
pub fn ln_beta_pdf(x: f64, a: f64, b: f64) -> f64 {
    if x <= 0.0 || x >= 1.0 {
        return f64::NEG_INFINITY;
    }
    (a - 1.0) * x.ln() + (b - 1.0) * (1.0 - x).ln() + ln_gamma(a + b)
        - ln_gamma(a)
        - ln_gamma(b)
}

/// Log-likelihood of one player's responses (p, y) under strategy `theta`
/// and precision `s`. Responses must already be clamped inside (0,1).
pub fn log_likelihood_player(responses: &[(f64, f64)], theta: &StrategyParams, s: f64) -> f64 {
    responses
        .iter()
        .map(|&(p, y)| {
            let mu = theta.eval(p);
            let (a, b) = beta_shapes(mu, s);
            ln_beta_pdf(y, a, b)
        })
        .sum()
}

/// Slab concentration for the continuous branch of the phi prior.
fn slab_concentration(mu0: f64) -> f64 {
    2.0 * (1.0 / mu0).max(1.0 / (1.0 - mu0))
}

/// Log-density of the continuous (phi != 0) branch at `phi`, centered at
/// mu0 so that E(phi | mu0, phi != 0) = mu0.
pub fn ln_slab_pdf(phi: f64, mu0: f64) -> f64 {
    let c = slab_concentration(mu0);
    ln_beta_pdf(phi, c * mu0, c * (1.0 - mu0))
}

/// Joint log prior density of theta given the hyperparameters, with the
/// convexity indicator marginalized out (it is determined by which side of
/// the threshold nu falls on).
pub fn log_prior_theta(theta: &StrategyParams, hyper: &HyperParams) -> f64 {
    // mu0 ~ Beta(3/2, 1)
    let mut lp = ln_beta_pdf(theta.mu0, 1.5, 1.0);

    // eta ~ 0.3 + 0.4 Beta(5,5): rescaling Jacobian 1/0.4
    lp += ln_beta_pdf((theta.eta - 0.3) / 0.4, 5.0, 5.0) - 0.4f64.ln();

    // phi: point mass at zero with weight rho, slab otherwise
    if theta.phi == 0.0 {
        lp += hyper.rho.ln();
    } else {
        lp += (1.0 - hyper.rho).ln() + ln_slab_pdf(theta.phi, theta.mu0);
    }

    // nu: uniform below or above the convexity threshold; the branch
    // weight depends on whether the strategy intersects the origin.
    // nu exactly at the threshold belongs to the non-convex branch.
    let t = theta.convexity_threshold();
    let q = if theta.phi == 0.0 { hyper.q0 } else { hyper.q1 };
    if theta.nu < t {
        lp += q.ln() - t.ln();
    } else {
        lp += (1.0 - q).ln() - (1.0 - t).ln();
    }
    lp
}

/// One draw from the strategy prior given hyperparameters.
pub fn sample_prior_player<R: Rng>(hyper: &HyperParams, rng: &mut R) -> PlayerLatent {
    let mu0 = loop {
        let v = BetaDist::new(1.5, 1.0).unwrap().sample(rng);
        if v > 0.0 && v < 1.0 {
            break v;
        }
    };
    let eta = 0.3 + 0.4 * BetaDist::new(5.0, 5.0).unwrap().sample(rng);

    let (phi, z) = if rng.random::<f64>() < hyper.rho {
        (0.0, false)
    } else {
        let c = slab_concentration(mu0);
        let phi = loop {
            let v = BetaDist::new(c * mu0, c * (1.0 - mu0)).unwrap().sample(rng);
            if v > 0.0 && v < 1.0 {
                break v;
            }
        };
        (phi, true)
    };

    let t = (mu0 - phi) * eta + phi;
    let q = if z { hyper.q1 } else { hyper.q0 };
    let kappa = rng.random::<f64>() < q;
    let nu = if kappa {
        rng.random::<f64>() * t
    } else {
        t + rng.random::<f64>() * (1.0 - t)
    };

    let s_index = sample_categorical(&hyper.w, rng);
    let theta = StrategyParams { eta, phi, nu, mu0 };
    PlayerLatent {
        // recompute rather than trust kappa: nu == t lands non-convex
        kappa: theta.is_convex(),
        theta,
        s_index,
        z,
    }
}

/// One draw from the hyperpriors: rho ~ Beta(3,1), q0 ~ Beta(3,1),
/// q1 ~ Beta(1,3), w ~ Dirichlet(alpha).
pub fn sample_hyper_prior<R: Rng>(rng: &mut R) -> HyperParams {
    HyperParams {
        rho: BetaDist::new(3.0, 1.0).unwrap().sample(rng),
        q0: BetaDist::new(3.0, 1.0).unwrap().sample(rng),
        q1: BetaDist::new(1.0, 3.0).unwrap().sample(rng),
        w: sample_dirichlet(&DIRICHLET_ALPHA, rng),
    }
}

/// Dirichlet draw via normalized Gamma variates.
pub fn sample_dirichlet<R: Rng>(alpha: &[f64; 5], rng: &mut R) -> [f64; 5] {
    let mut g = [0.0f64; 5];
    for (gi, &a) in g.iter_mut().zip(alpha.iter()) {
        *gi = rand_distr::Gamma::new(a, 1.0).unwrap().sample(rng);
    }
    let sum: f64 = g.iter().sum();
    if sum == 0.0 {
        // all-zero draw is possible for tiny concentrations; fall back to
        // the heaviest component
        let mut w = [0.0; 5];
        w[2] = 1.0;
        return w;
    }
    g.map(|v| v / sum)
}

/// Categorical draw from unnormalized nonnegative weights.
pub fn sample_categorical<R: Rng>(weights: &[f64], rng: &mut R) -> usize {
    let total: f64 = weights.iter().sum();
    let mut u = rng.random::<f64>() * total;
    for (i, &w) in weights.iter().enumerate() {
        u -= w;
        if u <= 0.0 {
            return i;
        }
    }
    weights.len() - 1
}
