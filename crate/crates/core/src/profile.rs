//! The transverse profile `gtilde(s) > 0` sampled on a [`Grid`].
//!
//! A profile is stored through `w = ln gtilde`, which is what the flow
//! evolves and what the boundary slopes act on.

use crate::error::{Error, Result};
use crate::grid::{trapezoid, Ghost, Grid};
use crate::weighted::{Chart, WeightedParams};

/// Values aligned node-by-node with a grid.
pub type ScalarField = Vec<f64>;

/// Largest allowed ratio `gtilde(end) / max gtilde`.
pub const DEFAULT_DECAY_CEILING: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq)]
pub struct Profile {
    grid: Grid,
    params: WeightedParams,
    log_gtilde: Vec<f64>,
}

impl Profile {
    pub fn new(grid: Grid, params: WeightedParams, gtilde: &[f64]) -> Result<Self> {
        if let Some((i, v)) = gtilde
            .iter()
            .enumerate()
            .find(|(_, v)| !(v.is_finite() && **v > 0.0))
        {
            return Err(Error::DegenerateProfile(format!(
                "gtilde must be positive, got {v} at node {i}"
            )));
        }
        Self::from_log(grid, params, gtilde.iter().map(|v| v.ln()).collect())
    }

    /// Builds a profile from `ln gtilde` without the decay check.
    pub fn from_log(grid: Grid, params: WeightedParams, log_gtilde: Vec<f64>) -> Result<Self> {
        params.require_ordered()?;
        if log_gtilde.len() != grid.len() {
            return Err(Error::Argument(format!(
                "{} values for a grid of {} nodes",
                log_gtilde.len(),
                grid.len()
            )));
        }
        if let Some(i) = log_gtilde.iter().position(|v| !v.is_finite()) {
            return Err(Error::DegenerateProfile(format!(
                "non-finite log gtilde at node {i}"
            )));
        }
        Ok(Self {
            grid,
            params,
            log_gtilde,
        })
    }

    /// Checks that both ends have decayed below `ceiling * max gtilde`.
    pub fn check_decay(&self, ceiling: f64) -> Result<()> {
        let top = self.max_log();
        let bound = ceiling.ln();
        let n = self.grid.len();
        let left = self.log_gtilde[0] - top;
        let right = self.log_gtilde[n - 1] - top;
        if left <= bound && right <= bound {
            return Ok(());
        }
        // The tails decay like exp(lambda s) and exp(-mu s) respectively.
        let l = self.grid.half_width();
        let need_left = l + (left - bound).max(0.0) / self.lambda();
        let need_right = l + (right - bound).max(0.0) / self.mu();
        Err(Error::InsufficientDomain {
            half_width: l,
            required: need_left.max(need_right),
            reason: format!(
                "end values are {:.2e} and {:.2e} of the maximum, ceiling {ceiling:.1e}",
                left.exp(),
                right.exp()
            ),
        })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn params(&self) -> &WeightedParams {
        &self.params
    }

    /// Left log-slope `2/a2`.
    pub fn lambda(&self) -> f64 {
        self.params.left_slope()
    }

    /// Right decay rate `2/a1`.
    pub fn mu(&self) -> f64 {
        self.params.right_slope()
    }

    pub fn ghost(&self) -> Ghost {
        Ghost::Slopes {
            left: self.lambda(),
            right: self.mu(),
        }
    }

    pub fn log_values(&self) -> &[f64] {
        &self.log_gtilde
    }

    pub fn into_log_values(self) -> Vec<f64> {
        self.log_gtilde
    }

    pub fn values(&self) -> ScalarField {
        self.log_gtilde.iter().map(|w| w.exp()).collect()
    }

    pub fn max_log(&self) -> f64 {
        self.log_gtilde
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for (i, w) in self.log_gtilde.iter().enumerate() {
            if *w > self.log_gtilde[best] {
                best = i;
            }
        }
        best
    }

    /// Location of the maximum refined by a parabola through three nodes.
    pub fn peak_position(&self) -> f64 {
        let i = self.argmax();
        let h = self.grid.spacing();
        let s = self.grid.node(i);
        if i == 0 || i + 1 == self.grid.len() {
            return s;
        }
        let (a, b, c) = (
            self.log_gtilde[i - 1],
            self.log_gtilde[i],
            self.log_gtilde[i + 1],
        );
        let denom = a - 2.0 * b + c;
        if denom >= 0.0 {
            return s;
        }
        s + 0.5 * h * (a - c) / denom
    }

    /// Multiplies `gtilde` by a constant.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        if !(factor.is_finite() && factor > 0.0) {
            return Err(Error::Argument(format!(
                "scale factor must be positive, got {factor}"
            )));
        }
        let shift = factor.ln();
        Self::from_log(
            self.grid,
            self.params,
            self.log_gtilde.iter().map(|w| w + shift).collect(),
        )
    }

    /// Multiplicative Gaussian bump `1 + eps exp(-((s - center)/width)^2)`,
    /// rescaled so the total volume is unchanged. The asymptotic slopes are
    /// untouched.
    pub fn with_bump(&self, eps: f64, center: f64, width: f64) -> Result<Self> {
        if !(eps.is_finite() && eps > -1.0) {
            return Err(Error::Argument(format!(
                "bump amplitude must exceed -1, got {eps}"
            )));
        }
        if !(width.is_finite() && width > 0.0) {
            return Err(Error::Argument(format!(
                "bump width must be positive, got {width}"
            )));
        }
        let h = self.grid.spacing();
        let before = trapezoid(&self.values(), h);
        let mut w: Vec<f64> = self
            .log_gtilde
            .iter()
            .enumerate()
            .map(|(i, w)| {
                let x = (self.grid.node(i) - center) / width;
                w + (eps * (-x * x).exp()).ln_1p()
            })
            .collect();
        let after = trapezoid(&w.iter().map(|v| v.exp()).collect::<Vec<_>>(), h);
        let shift = (before / after).ln();
        w.iter_mut().for_each(|v| *v += shift);
        Self::from_log(self.grid, self.params, w)
    }

    pub fn same_grid(&self, other: &Profile) -> bool {
        self.grid == other.grid && self.params == other.params
    }
}

/// Samples the round profile `2 sigma^{-3} t (1 - t)` of `eta_a` on `grid`.
pub fn sample_round(params: &WeightedParams, grid: &Grid) -> Result<Profile> {
    let chart = Chart::new(params)?;
    let w = grid
        .nodes()
        .iter()
        .map(|&s| chart.point_at_s(s).ln_round_gtilde())
        .collect();
    let profile = Profile::from_log(*grid, *params, w)?;
    profile.check_decay(DEFAULT_DECAY_CEILING)?;
    Ok(profile)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::first_derivative;

    fn round(a1: f64, a2: f64, l: f64, n: usize) -> Profile {
        let p = WeightedParams::ordered(a1, a2).unwrap();
        sample_round(&p, &Grid::new(l, n).unwrap()).unwrap()
    }

    #[test]
    fn round_maximum() {
        // d/dt [2t(1-t)(2-t)^-3] = 0 reduces to t^2 + 2t - 2 = 0.
        let t_peak = 3f64.sqrt() - 1.0;
        let exact = 2.0 * t_peak * (1.0 - t_peak) / (2.0 - t_peak).powi(3);
        let prof = round(1.0, 2.0, 30.0, 2049);
        let top = prof.values().iter().copied().fold(0.0, f64::max);
        let h = prof.grid().spacing();
        assert!((top - exact).abs() < h * h * exact, "{top} vs {exact}");
        let p = WeightedParams::ordered(1.0, 2.0).unwrap();
        let s_peak = Chart::new(&p).unwrap().s_of_t(t_peak).unwrap();
        assert!((prof.peak_position() - s_peak).abs() < h);
    }

    #[test]
    fn end_slopes_match_asymptotics() {
        let prof = round(1.0, 2.0, 30.0, 2049);
        let h = prof.grid().spacing();
        let d = first_derivative(prof.log_values(), Ghost::Even, h);
        let n = d.len();
        // Interior one-sided information: use nodes next to the ends.
        assert!((d[2] - 1.0).abs() < 0.01);
        assert!((d[n - 3] + 2.0).abs() < 0.01);
    }

    #[test]
    fn narrow_domain_names_required_width() {
        let p = WeightedParams::ordered(1.0, 2.0).unwrap();
        let err = sample_round(&p, &Grid::new(5.0, 101).unwrap()).unwrap_err();
        assert!(err.to_string().contains("need L >="));
        match err {
            Error::InsufficientDomain { required, .. } => assert!(required > 5.0),
            e => panic!("unexpected {e}"),
        }
    }

    #[test]
    fn profile_rejects_nonpositive() {
        let p = WeightedParams::ordered(1.0, 2.0).unwrap();
        let g = Grid::new(1.0, 33).unwrap();
        let mut v = vec![1.0; 33];
        v[4] = 0.0;
        assert!(Profile::new(g, p, &v).is_err());
        assert!(Profile::new(g, p, &[1.0; 3]).is_err());
    }

    #[test]
    fn bump_preserves_volume() {
        let prof = round(2.0, 3.0, 40.0, 1025);
        let h = prof.grid().spacing();
        let b = prof.with_bump(0.3, prof.peak_position(), 3.0).unwrap();
        let v0 = trapezoid(&prof.values(), h);
        let v1 = trapezoid(&b.values(), h);
        assert!((v0 - v1).abs() < 1e-14 * v0.max(1.0));
        assert!(b.log_values()[0] - prof.log_values()[0] < 0.0);
    }
}
