//! The gradient soliton of a weighted structure.
//!
//! With `kappa = 2(a1 + a2)` the soliton is encoded by the two roots
//! `y1 = 1 - p < 1 < y2 = 1 + q` of `y = k e^{y-1}`, where `k` is fixed by
//! `p / q = a1 / a2`, and the constant `c = kappa p a2 / 2`. The profile
//! itself follows from `dy/du = y - k e^{y-1}`, `u = kappa s / c`, and
//! `gtilde = (kappa / c^2) dy/du`.
//!
//! Reconstructing `gtilde` as a difference `y - k e^{y-1}` loses all
//! precision in the tails, so the profile is integrated in the pair
//! `(y, w = ln gtilde)`:
//!
//! ```text
//! y' = c e^w,        w' = (kappa / c)(1 - y) + c e^w,
//! ```
//!
//! which is smooth and whose `w'` tends to the asymptotic slopes.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::profile::{Profile, DEFAULT_DECAY_CEILING};
use crate::weighted::WeightedParams;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RootPair {
    pub k: f64,
    pub y1: f64,
    pub y2: f64,
    pub p: f64,
    pub q: f64,
}

impl RootPair {
    pub fn ratio(&self) -> f64 {
        self.p / self.q
    }

    /// `|y - k e^{y-1}|` at both roots.
    pub fn residuals(&self) -> (f64, f64) {
        let f = |y: f64| (y - self.k * (y - 1.0).exp()).abs();
        (f(self.y1), f(self.y2))
    }
}

/// Bisection down to `1e-8` followed by Newton, for a decreasing `f` on
/// `[lo, hi]` with `f(lo) > 0 > f(hi)`.
fn decreasing_root(
    f: impl Fn(f64) -> f64,
    df: impl Fn(f64) -> f64,
    mut lo: f64,
    mut hi: f64,
) -> f64 {
    while hi - lo > 1e-8 * hi.abs().max(1.0) {
        let mid = 0.5 * (lo + hi);
        if f(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let mut x = 0.5 * (lo + hi);
    for _ in 0..50 {
        let d = df(x);
        if d == 0.0 {
            break;
        }
        let next = (x - f(x) / d).clamp(lo, hi);
        let done = (next - x).abs() <= 1e-15 * x.abs().max(1e-300);
        x = next;
        if done {
            break;
        }
    }
    x
}

/// The two solutions of `y = k e^{y-1}` for `0 < k < 1`.
///
/// Writing `y1 = 1 - p`, `y2 = 1 + q` turns the equation into
/// `p + ln(1 - p) = ln k` and `ln(1 + q) - q = ln k`; both left sides are
/// strictly decreasing, which gives well-conditioned scalar problems.
pub fn root_pair(k: f64) -> Result<RootPair> {
    if !(k > 0.0 && k < 1.0) {
        return Err(Error::Argument(format!(
            "y = k e^(y-1) has two roots only for 0 < k < 1, got k = {k}"
        )));
    }
    let target = k.ln();
    let p = decreasing_root(|p| p + (-p).ln_1p() - target, |p| -p / (1.0 - p), 0.0, 1.0);
    let mut hi: f64 = 1.0;
    while hi.ln_1p() - hi - target > 0.0 {
        hi *= 2.0;
    }
    let q = decreasing_root(|q| q.ln_1p() - q - target, |q| -q / (1.0 + q), 0.0, hi);
    Ok(RootPair {
        k,
        y1: 1.0 - p,
        y2: 1.0 + q,
        p,
        q,
    })
}

/// `p / q` as a function of `k`; increasing from 0 to 1 on `(0, 1)`.
pub fn ratio(k: f64) -> Result<f64> {
    Ok(root_pair(k)?.ratio())
}

pub fn solve_k(target_ratio: f64) -> Result<f64> {
    solve_k_in(target_ratio, 0.0, 1.0)
}

/// [`solve_k`] started from the bracket `[lo, hi] ⊂ [0, 1]`; the bracket is
/// widened towards the ends of `(0, 1)` when it does not contain the root.
pub fn solve_k_in(target_ratio: f64, lo: f64, hi: f64) -> Result<f64> {
    if !(target_ratio > 0.0 && target_ratio < 1.0) {
        return Err(Error::Argument(format!(
            "target ratio must lie in (0, 1), got {target_ratio}"
        )));
    }
    if !(0.0 <= lo && lo < hi && hi <= 1.0) {
        return Err(Error::Argument(format!("invalid bracket [{lo}, {hi}]")));
    }
    let eval = |k: f64| -> Result<f64> {
        if k <= 0.0 {
            Ok(-target_ratio)
        } else if k >= 1.0 {
            Ok(1.0 - target_ratio)
        } else {
            Ok(ratio(k)? - target_ratio)
        }
    };
    let (mut lo, mut hi) = (lo, hi);
    if eval(lo)? > 0.0 {
        lo = 0.0;
    }
    if eval(hi)? < 0.0 {
        hi = 1.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if eval(mid)? < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let k = 0.5 * (lo + hi);
    let residual = eval(k)?.abs();
    if residual > 1e-10 {
        return Err(Error::Integration(format!(
            "k bisection stalled with ratio residual {residual:e}"
        )));
    }
    Ok(k)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolitonConstants {
    pub k: f64,
    pub p: f64,
    pub q: f64,
    pub kappa: f64,
    pub c: f64,
}

impl SolitonConstants {
    /// The second expression `kappa q a1 / 2` for `c`.
    pub fn c_from_right(&self, params: &WeightedParams) -> f64 {
        0.5 * self.kappa * self.q * params.a1
    }
}

pub fn soliton_constants(params: &WeightedParams) -> Result<SolitonConstants> {
    params.require_ordered()?;
    let k = solve_k(params.a1 / params.a2)?;
    let roots = root_pair(k)?;
    let kappa = params.kappa();
    let c = 0.5 * kappa * roots.p * params.a2;
    Ok(SolitonConstants {
        k,
        p: roots.p,
        q: roots.q,
        kappa,
        c,
    })
}

#[derive(Clone, Debug)]
pub struct SolitonSolution {
    pub params: WeightedParams,
    pub roots: RootPair,
    pub kappa: f64,
    pub c: f64,
    pub profile: Profile,
    /// Coordinate where `y = 1`.
    pub shift_gauge: f64,
}

impl SolitonSolution {
    pub fn constants(&self) -> SolitonConstants {
        SolitonConstants {
            k: self.roots.k,
            p: self.roots.p,
            q: self.roots.q,
            kappa: self.kappa,
            c: self.c,
        }
    }
}

#[derive(Clone, Copy)]
struct OdeSystem {
    kappa: f64,
    c: f64,
}

impl OdeSystem {
    fn rhs(&self, [y, w]: [f64; 2]) -> [f64; 2] {
        let g = self.c * w.exp();
        [g, self.kappa / self.c * (1.0 - y) + g]
    }

    fn rk4(&self, x: [f64; 2], h: f64) -> [f64; 2] {
        let add = |a: [f64; 2], b: [f64; 2], s: f64| [a[0] + s * b[0], a[1] + s * b[1]];
        let k1 = self.rhs(x);
        let k2 = self.rhs(add(x, k1, 0.5 * h));
        let k3 = self.rhs(add(x, k2, 0.5 * h));
        let k4 = self.rhs(add(x, k3, h));
        [
            x[0] + h / 6.0 * (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0]),
            x[1] + h / 6.0 * (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1]),
        ]
    }
}

const ODE_RTOL: f64 = 1e-13;
const ODE_ATOL: f64 = 1e-14;

/// Adaptive RK4 with step doubling and local extrapolation. Visits the
/// `targets` (monotone away from the start point, all with the same sign)
/// exactly and returns the state at each.
fn integrate(system: OdeSystem, start: [f64; 2], targets: &[f64]) -> Result<Vec<[f64; 2]>> {
    let mut out = Vec::with_capacity(targets.len());
    let mut x = 0.0;
    let mut state = start;
    let mut h: f64 = 1e-3;
    for &target in targets {
        let dir = if target >= x { 1.0 } else { -1.0 };
        let mut guard = 0usize;
        while (target - x) * dir > 0.0 {
            guard += 1;
            if guard > 1_000_000 {
                return Err(Error::Integration("soliton ODE step count exceeded".into()));
            }
            let remaining = (target - x).abs();
            let step = h.min(remaining);
            let full = system.rk4(state, dir * step);
            let half = system.rk4(state, 0.5 * dir * step);
            let two = system.rk4(half, 0.5 * dir * step);
            let mut err: f64 = 0.0;
            for j in 0..2 {
                let scale = ODE_ATOL + ODE_RTOL * two[j].abs();
                err = err.max((two[j] - full[j]).abs() / 15.0 / scale);
            }
            if !err.is_finite() {
                return Err(Error::Integration(
                    "soliton ODE produced non-finite values".into(),
                ));
            }
            if err <= 1.0 {
                x = if step == remaining {
                    target
                } else {
                    x + dir * step
                };
                for j in 0..2 {
                    state[j] = two[j] + (two[j] - full[j]) / 15.0;
                }
                h = step * (0.9 * err.max(1e-10).powf(-0.2)).min(4.0);
            } else {
                h = step * (0.9 * err.powf(-0.2)).max(0.1);
            }
        }
        out.push(state);
    }
    Ok(out)
}

/// `(y, ln gtilde)` of the soliton with its gauge point moved to `shift`,
/// sampled at `nodes` (increasing).
pub fn soliton_samples(
    consts: &SolitonConstants,
    nodes: &[f64],
    shift: f64,
) -> Result<Vec<[f64; 2]>> {
    let system = OdeSystem {
        kappa: consts.kappa,
        c: consts.c,
    };
    let start = [
        1.0,
        (consts.kappa / (consts.c * consts.c) * (1.0 - consts.k)).ln(),
    ];
    let rel: Vec<f64> = nodes.iter().map(|s| s - shift).collect();
    let split = rel.partition_point(|x| *x < 0.0);
    let left_targets: Vec<f64> = rel[..split].iter().rev().copied().collect();
    let mut left = integrate(system, start, &left_targets)?;
    left.reverse();
    let right = integrate(system, start, &rel[split..])?;
    left.extend(right);
    Ok(left)
}

/// Soliton profile on `grid` with `y = 1` at `s = 0`.
pub fn soliton_profile(params: &WeightedParams, grid: &Grid) -> Result<SolitonSolution> {
    soliton_profile_shifted(params, grid, 0.0)
}

/// Soliton profile with its gauge point at `s = shift`.
pub fn soliton_profile_shifted(
    params: &WeightedParams,
    grid: &Grid,
    shift: f64,
) -> Result<SolitonSolution> {
    let consts = soliton_constants(params)?;
    let roots = root_pair(consts.k)?;
    let samples = soliton_samples(&consts, &grid.nodes(), shift)?;
    let n = samples.len();
    let tol = 1e-8;
    let (gap_left, gap_right) = (
        (samples[0][0] - roots.y1).abs(),
        (samples[n - 1][0] - roots.y2).abs(),
    );
    if gap_left > tol || gap_right > tol {
        // y approaches y1 like e^{lambda s} and y2 like e^{-mu s}.
        let l = grid.half_width();
        let need = (l + (gap_left / tol).ln().max(0.0) / params.left_slope())
            .max(l + (gap_right / tol).ln().max(0.0) / params.right_slope());
        return Err(Error::InsufficientDomain {
            half_width: l,
            required: need,
            reason: format!(
                "soliton ends are {gap_left:.1e} and {gap_right:.1e} from the limiting roots"
            ),
        });
    }
    let profile = Profile::from_log(*grid, *params, samples.iter().map(|x| x[1]).collect())?;
    profile.check_decay(DEFAULT_DECAY_CEILING)?;
    Ok(SolitonSolution {
        params: *params,
        roots,
        kappa: consts.kappa,
        c: consts.c,
        profile,
        shift_gauge: shift,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::E;

    #[test]
    fn root_pair_at_two_over_e() {
        let r = root_pair(2.0 / E).unwrap();
        assert!((r.y2 - 2.0).abs() < 1e-13);
        let (r1, r2) = r.residuals();
        assert!(r1 < 1e-13 && r2 < 1e-13);
        // Independent bisection oracle on (0, 1).
        let f = |y: f64| y - 2.0 / E * (y - 1.0).exp();
        let (mut lo, mut hi) = (1e-9, 1.0);
        for _ in 0..200 {
            let m = 0.5 * (lo + hi);
            if f(m) < 0.0 {
                lo = m
            } else {
                hi = m
            }
        }
        assert!((r.y1 - lo).abs() < 1e-12);
        assert!((r.y1 - 0.4064).abs() < 1e-4);
        assert!((r.ratio() - 0.5936).abs() < 1e-4);
    }

    #[test]
    fn root_pair_near_one() {
        let r = root_pair(0.999).unwrap();
        assert!((r.ratio() - 1.0).abs() < 0.05);
        assert!(r.p < r.q);
        assert!(root_pair(1.0).is_err());
        assert!(root_pair(0.0).is_err());
        assert!(root_pair(-0.5).is_err());
    }

    #[test]
    fn solve_k_round_trip() {
        let k = solve_k(ratio(2.0 / E).unwrap()).unwrap();
        assert!((k - 2.0 / E).abs() < 1e-9);
        let k12 = solve_k(0.5).unwrap();
        let k23 = solve_k(2.0 / 3.0).unwrap();
        assert!((ratio(k12).unwrap() - 0.5).abs() < 1e-10);
        assert!((ratio(k23).unwrap() - 2.0 / 3.0).abs() < 1e-10);
        assert!(k23 > k12);
        assert!(solve_k(1.0).is_err());
        assert!(solve_k(0.0).is_err());
    }

    #[test]
    fn constants_agree() {
        for (a1, a2) in [(1.0, 2.0), (2.0, 3.0), (1.0, 1.5), (0.3, 2.9)] {
            let p = WeightedParams::ordered(a1, a2).unwrap();
            let c = soliton_constants(&p).unwrap();
            assert!(c.c > 0.0);
            assert!((c.c - c.c_from_right(&p)).abs() < 1e-10 * c.c);
            assert!((c.kappa * c.p / c.c - 2.0 / a2).abs() < 1e-10);
            assert!((c.kappa * c.q / c.c - 2.0 / a1).abs() < 1e-10);
        }
        let c = soliton_constants(&WeightedParams::ordered(2.0, 3.0).unwrap()).unwrap();
        assert_eq!(c.kappa, 10.0);
        assert!((c.c - 7.379_599_202_291_75).abs() < 1e-9);
    }

    #[test]
    fn narrow_grid_is_rejected() {
        let p = WeightedParams::ordered(1.0, 2.0).unwrap();
        let err = soliton_profile(&p, &Grid::new(5.0, 257).unwrap()).unwrap_err();
        assert!(matches!(err, Error::InsufficientDomain { required, .. } if required > 5.0));
    }
}
