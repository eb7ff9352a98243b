//! Player mean-strategy curves as monotone cubic interpolants.
//!
//! A strategy is described by four numbers theta = (eta, phi, nu, mu0)
//! defining three control points in the (p, y) plane: (0, phi), (eta, nu)
//! and (1, mu0). The curve through them is a piecewise-cubic Hermite
//! interpolant with Fritsch-Carlson tangent limiting, so it is monotone
//! whenever phi <= nu <= mu0. The k-step compatibility predicates are
//! decided directly on the control points: the curve intersects the origin
//! iff phi is exactly zero, and it is convex iff the interior point lies
//! strictly below the chord from (0, phi) to (1, mu0).

use crate::error::{Error, Result};

/// Evaluations are clamped inside (0,1) by this margin so the Beta
/// likelihood stays finite.
pub const EVAL_CLAMP: f64 = 1e-6;

/// Spline control parameters of one player's mean strategy.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StrategyParams {
    /// Horizontal position of the interior control point, in [0.3, 0.7].
    pub eta: f64,
    /// Value at p = 0; exactly zero means the curve intersects the origin.
    pub phi: f64,
    /// Height of the interior control point.
    pub nu: f64,
    /// Value at p = 1, strictly inside (0, 1).
    pub mu0: f64,
}

impl StrategyParams {
    pub fn new(eta: f64, phi: f64, nu: f64, mu0: f64) -> Result<Self> {
        if !(0.3..=0.7).contains(&eta) {
            return Err(Error::domain(format!("eta must lie in [0.3,0.7], got {eta}")));
        }
        if !(0.0..=1.0).contains(&phi) {
            return Err(Error::domain(format!("phi must lie in [0,1], got {phi}")));
        }
        if !(0.0..=1.0).contains(&nu) {
            return Err(Error::domain(format!("nu must lie in [0,1], got {nu}")));
        }
        if !(mu0 > 0.0 && mu0 < 1.0) {
            return Err(Error::domain(format!(
                "mu0 must lie strictly inside (0,1), got {mu0}"
            )));
        }
        Ok(StrategyParams { eta, phi, nu, mu0 })
    }

    /// Knot tangents: one-sided secants at the endpoints, a weighted
    /// harmonic mean of adjacent secants at the interior knot (zero when
    /// the secants differ in sign), then the Fritsch-Carlson circle
    /// limiter alpha^2 + beta^2 <= 9 applied per interval.
    fn tangents(&self) -> [f64; 3] {
        let h0 = self.eta;
        let h1 = 1.0 - self.eta;
        let d0 = (self.nu - self.phi) / h0;
        let d1 = (self.mu0 - self.nu) / h1;

        let m1 = if d0 * d1 <= 0.0 {
            0.0
        } else {
            let w1 = 2.0 * h1 + h0;
            let w2 = h1 + 2.0 * h0;
            (w1 + w2) / (w1 / d0 + w2 / d1)
        };
        let mut m = [d0, m1, d1];

        for (i, d) in [d0, d1].into_iter().enumerate() {
            if d == 0.0 {
                m[i] = 0.0;
                m[i + 1] = 0.0;
            } else {
                let a = m[i] / d;
                let b = m[i + 1] / d;
                let s = a * a + b * b;
                if s > 9.0 {
                    let t = 3.0 / s.sqrt();
                    m[i] = t * a * d;
                    m[i + 1] = t * b * d;
                }
            }
        }
        m
    }

    /// Interpolant value at `p`, without clamping.
    pub fn eval_raw(&self, p: f64) -> f64 {
        let p = p.clamp(0.0, 1.0);
        let m = self.tangents();
        let (x0, y0, y1, m0, m1, h) = if p <= self.eta {
            (0.0, self.phi, self.nu, m[0], m[1], self.eta)
        } else {
            (self.eta, self.nu, self.mu0, m[1], m[2], 1.0 - self.eta)
        };
        let t = (p - x0) / h;
        let t2 = t * t;
        let t3 = t2 * t;
        let h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
        let h10 = t3 - 2.0 * t2 + t;
        let h01 = -2.0 * t3 + 3.0 * t2;
        let h11 = t3 - t2;
        h00 * y0 + h10 * h * m0 + h01 * y1 + h11 * h * m1
    }

    /// Interpolant value at `p`, clamped into [1e-6, 1-1e-6] for use as a
    /// Beta mean.
    pub fn eval(&self, p: f64) -> f64 {
        self.eval_raw(p).clamp(EVAL_CLAMP, 1.0 - EVAL_CLAMP)
    }

    /// Chord height above the interior control point: the convexity
    /// threshold T = (mu0 - phi) * eta + phi.
    pub fn convexity_threshold(&self) -> f64 {
        (self.mu0 - self.phi) * self.eta + self.phi
    }

    /// True iff the interior control point lies strictly below the chord
    /// from (0, phi) to (1, mu0).
    pub fn is_convex(&self) -> bool {
        self.nu < self.convexity_threshold()
    }

    /// True iff phi is exactly zero (set by the point-mass prior branch,
    /// never by rounding).
    pub fn intersects_origin(&self) -> bool {
        self.phi == 0.0
    }

    /// True iff phi <= nu <= mu0, the monotone-increasing configuration.
    pub fn is_monotone(&self) -> bool {
        self.phi <= self.nu && self.nu <= self.mu0
    }

    /// Both k-step compatibility criteria: through the origin and convex.
    pub fn is_kstep_compatible(&self) -> bool {
        self.intersects_origin() && self.is_convex()
    }
}
