//! Closed-form geometry of the weighted contact forms
//! `eta_a = (a1|z1|^2 + a2|z2|^2)^{-1} eta_0` on the unit 3-sphere.
//!
//! Two coordinates on the space of torus orbits are used throughout:
//!
//! * `t = |z1|^2` in `[0, 1]`, with `sigma = a1 t + a2 (1 - t)`;
//! * the cylinder coordinate
//!   `s(sigma) = -(a1/2) ln(sigma - a1) + (a2/2) ln(a2 - sigma)`,
//!   which runs from `-inf` at the circle `z1 = 0` to `+inf` at `z2 = 0`.
//!
//! Inverting `s` is done in the logistic variable `theta` with
//! `t = 1 / (1 + e^{-theta})`. In that variable `ds/dtheta` lies in
//! `[a1/2, a2/2]`, so the inversion is uniformly well conditioned and both
//! `ln t` and `ln(1 - t)` stay accurate deep in the tails.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Weight pair `(a1, a2)` of a weighted Sasakian structure.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeightedParams {
    pub a1: f64,
    pub a2: f64,
}

impl WeightedParams {
    pub fn new(a1: f64, a2: f64) -> Result<Self> {
        if !(a1.is_finite() && a2.is_finite() && a1 > 0.0 && a2 > 0.0) {
            return Err(Error::InvalidParams(format!(
                "weights must be positive and finite, got ({a1}, {a2})"
            )));
        }
        Ok(Self { a1, a2 })
    }

    /// Weights usable in the s-chart (strictly `a1 < a2`).
    pub fn ordered(a1: f64, a2: f64) -> Result<Self> {
        let p = Self::new(a1, a2)?;
        p.require_ordered()?;
        Ok(p)
    }

    pub fn require_ordered(&self) -> Result<()> {
        if self.a1 < self.a2 {
            Ok(())
        } else {
            Err(Error::InvalidParams(format!(
                "a1 < a2 required, got ({}, {})",
                self.a1, self.a2
            )))
        }
    }

    pub fn sigma(&self, t: f64) -> f64 {
        self.a1 * t + self.a2 * (1.0 - t)
    }

    /// Exponent of the decay `gtilde ~ e^{lambda s}` as `s -> -inf`.
    pub fn left_slope(&self) -> f64 {
        2.0 / self.a2
    }

    /// Exponent of the decay `gtilde ~ e^{-mu s}` as `s -> +inf`.
    pub fn right_slope(&self) -> f64 {
        2.0 / self.a1
    }

    pub fn kappa(&self) -> f64 {
        2.0 * (self.a1 + self.a2)
    }

    /// Transverse scalar curvature is positive everywhere on the round
    /// structure exactly when the larger weight is below twice the smaller.
    pub fn round_curvature_positive(&self) -> bool {
        let (lo, hi) = if self.a1 <= self.a2 {
            (self.a1, self.a2)
        } else {
            (self.a2, self.a1)
        };
        hi < 2.0 * lo
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClosedForms {
    /// Average transverse scalar curvature.
    pub r: f64,
    /// Total volume of `eta_a ^ d eta_a`.
    pub volume: f64,
    /// Integral of `R` against the same measure.
    pub total_curvature: f64,
    pub kappa: f64,
    pub lambda: f64,
    pub mu: f64,
}

pub fn closed_forms(params: &WeightedParams) -> ClosedForms {
    let WeightedParams { a1, a2 } = *params;
    let pi2 = PI * PI;
    ClosedForms {
        r: 4.0 * (a1 + a2),
        volume: 2.0 * pi2 / (a1 * a2),
        total_curvature: 8.0 * pi2 * (a1 + a2) / (a1 * a2),
        kappa: 2.0 * (a1 + a2),
        lambda: 2.0 / a2,
        mu: 2.0 / a1,
    }
}

/// `D`-homothetic rescaling `eta -> a * eta`, acting on weights as `a_i / a`.
pub fn d_homothetic(params: &WeightedParams, a: f64) -> Result<WeightedParams> {
    if !(a.is_finite() && a > 0.0) {
        return Err(Error::Argument(format!(
            "homothety factor must be positive, got {a}"
        )));
    }
    WeightedParams::new(params.a1 / a, params.a2 / a)
}

/// Round transverse profile and curvature at `t = |z1|^2`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RoundPoint {
    pub gtilde: f64,
    pub curvature: f64,
}

pub fn round_profile_and_curvature(params: &WeightedParams, t: f64) -> RoundPoint {
    let WeightedParams { a1, a2 } = *params;
    let sigma = params.sigma(t);
    let tt = t * (1.0 - t);
    let d = a1 - a2;
    RoundPoint {
        gtilde: 2.0 * tt / sigma.powi(3),
        curvature: -24.0 * d * d * tt / sigma - 16.0 * d * (2.0 * t - 1.0) + 8.0 * sigma,
    }
}

fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

fn logistic(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// A point of the orbit space resolved in every coordinate we need.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ChartPoint {
    pub s: f64,
    pub theta: f64,
    pub sigma: f64,
    /// `ln |z1|^2`
    pub ln_t: f64,
    /// `ln |z2|^2`
    pub ln_1mt: f64,
}

impl ChartPoint {
    pub fn t(&self) -> f64 {
        self.ln_t.exp()
    }

    /// `ln` of the round profile `2 sigma^{-3} t (1 - t)`, accurate in the tails.
    pub fn ln_round_gtilde(&self) -> f64 {
        std::f64::consts::LN_2 + self.ln_t + self.ln_1mt - 3.0 * self.sigma.ln()
    }
}

/// Coordinate changes between `t`, `sigma` and `s` for ordered weights.
#[derive(Clone, Copy, Debug)]
pub struct Chart {
    params: WeightedParams,
}

const BISECTION_TOL: f64 = 1e-8;
const NEWTON_TOL: f64 = 1e-13;

impl Chart {
    pub fn new(params: &WeightedParams) -> Result<Self> {
        params.require_ordered()?;
        Ok(Self { params: *params })
    }

    pub fn params(&self) -> &WeightedParams {
        &self.params
    }

    pub fn sigma_of_t(&self, t: f64) -> Result<f64> {
        if !(0.0..=1.0).contains(&t) {
            return Err(Error::Domain(format!("t = {t} outside [0, 1]")));
        }
        Ok(self.params.sigma(t))
    }

    pub fn t_of_sigma(&self, sigma: f64) -> Result<f64> {
        let WeightedParams { a1, a2 } = self.params;
        if !(a1..=a2).contains(&sigma) {
            return Err(Error::Domain(format!(
                "sigma = {sigma} outside [{a1}, {a2}]"
            )));
        }
        Ok((a2 - sigma) / (a2 - a1))
    }

    pub fn s_of_sigma(&self, sigma: f64) -> Result<f64> {
        let WeightedParams { a1, a2 } = self.params;
        if !(sigma > a1 && sigma < a2) {
            return Err(Error::Domain(format!(
                "sigma = {sigma} outside the open interval ({a1}, {a2})"
            )));
        }
        Ok(-0.5 * a1 * (sigma - a1).ln() + 0.5 * a2 * (a2 - sigma).ln())
    }

    fn s_of_theta(&self, theta: f64) -> f64 {
        let WeightedParams { a1, a2 } = self.params;
        0.5 * (a2 - a1) * (a2 - a1).ln() + 0.5 * a1 * softplus(theta) - 0.5 * a2 * softplus(-theta)
    }

    fn ds_dtheta(&self, theta: f64) -> f64 {
        let WeightedParams { a1, a2 } = self.params;
        0.5 * a1 * logistic(theta) + 0.5 * a2 * logistic(-theta)
    }

    /// Solve `s(theta) = s`: bisection down to `1e-8`, then Newton.
    fn theta_of_s(&self, s: f64) -> f64 {
        let a1 = self.params.a1;
        let f0 = self.s_of_theta(0.0) - s;
        let reach = 2.0 * f0.abs() / a1 + 1.0;
        let (mut lo, mut hi) = (-reach, reach);
        while hi - lo > BISECTION_TOL {
            let mid = 0.5 * (lo + hi);
            if self.s_of_theta(mid) < s {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let mut theta = 0.5 * (lo + hi);
        for _ in 0..20 {
            let step = (self.s_of_theta(theta) - s) / self.ds_dtheta(theta);
            theta -= step;
            if step.abs() <= NEWTON_TOL * theta.abs().max(1.0) {
                break;
            }
        }
        theta
    }

    pub fn point_at_s(&self, s: f64) -> ChartPoint {
        let theta = self.theta_of_s(s);
        let ln_t = -softplus(-theta);
        let ln_1mt = -softplus(theta);
        let sigma = self.params.a1 * ln_t.exp() + self.params.a2 * ln_1mt.exp();
        ChartPoint {
            s,
            theta,
            sigma,
            ln_t,
            ln_1mt,
        }
    }

    pub fn sigma_of_s(&self, s: f64) -> Result<f64> {
        if !s.is_finite() {
            return Err(Error::Domain(format!("s = {s} is not finite")));
        }
        Ok(self.point_at_s(s).sigma)
    }

    pub fn s_of_t(&self, t: f64) -> Result<f64> {
        if !(t > 0.0 && t < 1.0) {
            return Err(Error::Domain(format!("t = {t} outside (0, 1)")));
        }
        let theta = (t / (1.0 - t)).ln();
        Ok(self.s_of_theta(theta))
    }

    pub fn t_of_s(&self, s: f64) -> Result<f64> {
        if !s.is_finite() {
            return Err(Error::Domain(format!("s = {s} is not finite")));
        }
        Ok(self.point_at_s(s).t())
    }
}
