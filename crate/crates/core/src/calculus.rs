//! Discrete calculus on profiles.
//!
//! With `w = ln gtilde` and the measure `dmu = 2 pi^2 gtilde ds` the basic
//! identities used here are
//!
//! ```text
//! R          = -2 gtilde^{-1} w_ss
//! Delta_B u  =  2 gtilde^{-1} u_ss
//! |grad u|^2 =  2 gtilde^{-1} u_s^2
//! ```
//!
//! In the exponential tails `R` is a ratio of two tiny numbers, so pointwise
//! diagnostics are restricted to nodes where `gtilde` exceeds a fixed fraction
//! of its maximum. Three thresholds are used, matched to how strongly each
//! quantity amplifies round-off in `w`:
//!
//! * [`WEIGHTED_MASK`] for integrands that carry a factor of `gtilde`;
//! * [`RESOLVED_MASK`] for pointwise values of `R`, `c_local` and the defect;
//! * [`GRADIENT_MASK`] for unweighted integrands built from `R_s`;
//! * [`HARNACK_MASK`] for the Harnack quantity, which divides by `gtilde`
//!   a second time.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::grid::{
    cumulative_from_left, cumulative_from_right, first_derivative, masked_trapezoid,
    second_derivative, trapezoid, Ghost,
};
use crate::profile::{Profile, ScalarField};

pub const WEIGHTED_MASK: f64 = 1e-9;
pub const RESOLVED_MASK: f64 = 1e-6;
pub const GRADIENT_MASK: f64 = 1e-4;
pub const HARNACK_MASK: f64 = 1e-3;

const TWO_PI2: f64 = 2.0 * PI * PI;

/// Nodes where `gtilde > threshold * max gtilde`.
pub fn mask(profile: &Profile, threshold: f64) -> Vec<bool> {
    let cut = profile.max_log() + threshold.ln();
    profile.log_values().iter().map(|w| *w > cut).collect()
}

/// Fields shared by most diagnostics, computed once per profile.
#[derive(Clone, Debug)]
pub struct Fields {
    pub gtilde: ScalarField,
    pub w_s: ScalarField,
    pub w_ss: ScalarField,
    pub curvature: ScalarField,
    pub h: f64,
}

impl Fields {
    pub fn of(profile: &Profile) -> Self {
        let h = profile.grid().spacing();
        let w = profile.log_values();
        let gtilde = profile.values();
        let w_s = first_derivative(w, profile.ghost(), h);
        let w_ss = second_derivative(w, profile.ghost(), h);
        let curvature = w_ss
            .iter()
            .zip(&gtilde)
            .map(|(d2, g)| -2.0 * d2 / g)
            .collect();
        Self {
            gtilde,
            w_s,
            w_ss,
            curvature,
            h,
        }
    }

    pub fn volume(&self) -> f64 {
        TWO_PI2 * trapezoid(&self.gtilde, self.h)
    }

    /// `int R dmu`, evaluated as `-4 pi^2 int w_ss ds` so that no division by
    /// `gtilde` enters.
    pub fn total_curvature(&self) -> f64 {
        -2.0 * TWO_PI2 * trapezoid(&self.w_ss, self.h)
    }
}

/// Transverse scalar curvature `R = -2 gtilde^{-1} (ln gtilde)_ss`.
pub fn curvature(profile: &Profile) -> ScalarField {
    Fields::of(profile).curvature
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Integrals {
    pub volume: f64,
    pub total_curvature: f64,
    /// `int R ln R dmu`; `None` when `R <= 0` somewhere on the resolved region.
    pub entropy: Option<f64>,
    pub r_numeric: f64,
}

pub fn integrals(profile: &Profile) -> Integrals {
    let fields = Fields::of(profile);
    let volume = fields.volume();
    let total_curvature = fields.total_curvature();
    let keep = mask(profile, WEIGHTED_MASK);
    Integrals {
        volume,
        total_curvature,
        entropy: entropy_on(&fields, &keep),
        r_numeric: total_curvature / volume,
    }
}

/// Entropy restricted to a given node set.
pub fn entropy_on(fields: &Fields, keep: &[bool]) -> Option<f64> {
    let mut integrand = vec![0.0; keep.len()];
    for i in 0..keep.len() {
        if keep[i] {
            let r = fields.curvature[i];
            if !(r > 0.0) {
                return None;
            }
            integrand[i] = r * r.ln() * fields.gtilde[i];
        }
    }
    Some(TWO_PI2 * masked_trapezoid(&integrand, keep, fields.h))
}

#[derive(Clone, Debug)]
pub struct Potential {
    /// Derivative `f_s` of the potential with `Delta_B f = R - r`.
    pub f_s: ScalarField,
    /// `-f_s / gtilde`; NaN where `gtilde` is below the resolved mask.
    pub c_local: ScalarField,
    /// `m = f_ss - w_s f_s`, the single independent entry of the
    /// trace-free Hessian of `f`.
    pub defect_m: ScalarField,
    /// `(int 2 (m/gtilde)^2 dmu)^{1/2}` over the resolved mask.
    pub defect_norm: f64,
    /// `f_s` at the right end when integrated from the left; zero for an
    /// exactly compatible right-hand side.
    pub compatibility: f64,
    pub mask: Vec<bool>,
}

/// Potential with `r` taken as the profile's own average curvature.
pub fn potential(profile: &Profile) -> Result<Potential> {
    let fields = Fields::of(profile);
    let r = fields.total_curvature() / fields.volume();
    potential_with(profile, &fields, r)
}

/// Potential against a prescribed average `r`.
///
/// `f_s` is assembled from exact antiderivatives:
/// `1/2 int (R - r) gtilde = -[w_s] - r/2 int gtilde`, integrated from the
/// nearer end on either side of the peak of `gtilde`.
pub fn potential_with(profile: &Profile, fields: &Fields, r: f64) -> Result<Potential> {
    let n = fields.gtilde.len();
    let h = fields.h;
    let (lambda, mu) = (profile.lambda(), profile.mu());
    let dg: Vec<f64> = fields
        .gtilde
        .iter()
        .zip(&fields.w_s)
        .map(|(g, ws)| g * ws)
        .collect();
    let left = cumulative_from_left(&fields.gtilde, &dg, h);
    let right = cumulative_from_right(&fields.gtilde, &dg, h);
    let peak = profile.argmax();
    let f_s: Vec<f64> = (0..n)
        .map(|i| {
            if i <= peak {
                -(fields.w_s[i] - lambda) - 0.5 * r * left[i]
            } else {
                -(fields.w_s[i] + mu) + 0.5 * r * right[i]
            }
        })
        .collect();
    let compatibility = -(fields.w_s[n - 1] - lambda) - 0.5 * r * left[n - 1];

    let keep = mask(profile, RESOLVED_MASK);
    if !keep.iter().any(|k| *k) {
        return Err(Error::DegenerateProfile("resolved region is empty".into()));
    }
    let mut c_local = vec![f64::NAN; n];
    let mut defect_m = vec![0.0; n];
    let mut density = vec![0.0; n];
    for i in 0..n {
        let g = fields.gtilde[i];
        defect_m[i] = 0.5 * (fields.curvature[i] - r) * g - fields.w_s[i] * f_s[i];
        if keep[i] {
            c_local[i] = -f_s[i] / g;
            let m_over_g = 0.5 * (fields.curvature[i] - r) + fields.w_s[i] * c_local[i];
            density[i] = 2.0 * m_over_g * m_over_g * g;
        }
    }
    let defect_norm = (TWO_PI2 * masked_trapezoid(&density, &keep, h)).sqrt();
    Ok(Potential {
        f_s,
        c_local,
        defect_m,
        defect_norm,
        compatibility,
        mask: keep,
    })
}

/// The two closed expressions for the time derivative of the entropy.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EntropyRates {
    /// `int (R - r)^2 dmu - int |grad R|^2 / R dmu`.
    pub gradient_form: f64,
    /// `-int |grad R + R grad f|^2 / R dmu - 2 int |M|^2 dmu`.
    pub defect_form: f64,
}

pub fn entropy_rates(
    profile: &Profile,
    fields: &Fields,
    potential: &Potential,
    r: f64,
) -> Result<EntropyRates> {
    let n = fields.gtilde.len();
    let h = fields.h;
    let big = &fields.curvature;
    let r_s = first_derivative(big, Ghost::Even, h);
    let weighted = mask(profile, WEIGHTED_MASK);
    let gradient = mask(profile, GRADIENT_MASK);
    let mut a = vec![0.0; n];
    let mut b = vec![0.0; n];
    let mut c = vec![0.0; n];
    for i in 0..n {
        if weighted[i] {
            a[i] = (big[i] - r).powi(2) * fields.gtilde[i];
        }
        if gradient[i] {
            if !(big[i] > 0.0) {
                return Err(Error::NonPositiveCurvature {
                    index: i,
                    value: big[i],
                });
            }
            b[i] = 2.0 * r_s[i] * r_s[i] / big[i];
            let mixed = r_s[i] + big[i] * potential.f_s[i];
            c[i] = 2.0 * mixed * mixed / big[i];
        }
    }
    let a = TWO_PI2 * masked_trapezoid(&a, &weighted, h);
    let b = TWO_PI2 * masked_trapezoid(&b, &gradient, h);
    let c = TWO_PI2 * masked_trapezoid(&c, &gradient, h);
    Ok(EntropyRates {
        gradient_form: a - b,
        defect_form: -c - 2.0 * potential.defect_norm.powi(2),
    })
}

#[derive(Clone, Debug)]
pub struct HarnackField {
    /// `Q = Delta_B ln R + R - r`; NaN outside the evaluation mask.
    pub q: ScalarField,
    pub bound: f64,
    /// `min Q - bound` over the evaluation mask.
    pub margin: f64,
}

/// Lower bound `-r e^{rt} / (e^{rt} - 1)` for the Harnack quantity.
pub fn harnack_bound(r: f64, t: f64) -> f64 {
    // -r / (1 - e^{-rt}), written to stay finite for large rt.
    -r / -(-r * t).exp_m1()
}

pub fn harnack_field(profile: &Profile, t: f64, r: f64) -> Result<HarnackField> {
    harnack_with(profile, &Fields::of(profile), t, r)
}

pub fn harnack_with(profile: &Profile, fields: &Fields, t: f64, r: f64) -> Result<HarnackField> {
    if !(t > 0.0) {
        return Err(Error::Argument(format!(
            "Harnack time must be positive, got {t}"
        )));
    }
    let keep = mask(profile, HARNACK_MASK);
    let n = fields.gtilde.len();
    let big = &fields.curvature;
    // ln R only matters on the mask; elsewhere feed a harmless placeholder.
    let mut log_r = vec![0.0; n];
    for i in 0..n {
        if keep[i] {
            if !(big[i] > 0.0) {
                return Err(Error::NonPositiveCurvature {
                    index: i,
                    value: big[i],
                });
            }
            log_r[i] = big[i].ln();
        } else {
            log_r[i] = big[i].abs().max(f64::MIN_POSITIVE).ln();
        }
    }
    let d2 = second_derivative(&log_r, Ghost::Even, fields.h);
    let bound = harnack_bound(r, t);
    let mut q = vec![f64::NAN; n];
    let mut lowest = f64::INFINITY;
    for i in 0..n {
        // The five-point stencil must not reach outside the mask.
        let inside = (i.saturating_sub(2)..=(i + 2).min(n - 1)).all(|j| keep[j]);
        if inside {
            q[i] = 2.0 * d2[i] / fields.gtilde[i] + big[i] - r;
            lowest = lowest.min(q[i]);
        }
    }
    if !lowest.is_finite() {
        return Err(Error::DegenerateProfile("Harnack mask is empty".into()));
    }
    Ok(HarnackField {
        q,
        bound,
        margin: lowest - bound,
    })
}

/// Arc length and volume along the s-line, with cubic Hermite interpolation
/// between nodes (both running integrals come with exact derivatives).
#[derive(Clone, Debug)]
pub struct TransverseGeometry {
    nodes: Vec<f64>,
    arc: Vec<f64>,
    arc_rate: Vec<f64>,
    mass: Vec<f64>,
    mass_rate: Vec<f64>,
    h: f64,
}

fn hermite(y0: f64, y1: f64, d0: f64, d1: f64, h: f64, x: f64) -> f64 {
    let x2 = x * x;
    let x3 = x2 * x;
    (2.0 * x3 - 3.0 * x2 + 1.0) * y0
        + (x3 - 2.0 * x2 + x) * h * d0
        + (-2.0 * x3 + 3.0 * x2) * y1
        + (x3 - x2) * h * d1
}

impl TransverseGeometry {
    pub fn of(profile: &Profile) -> Self {
        let fields = Fields::of(profile);
        let h = fields.h;
        let arc_rate: Vec<f64> = fields.gtilde.iter().map(|g| (0.5 * g).sqrt()).collect();
        let d_arc: Vec<f64> = arc_rate
            .iter()
            .zip(&fields.w_s)
            .map(|(a, ws)| 0.5 * a * ws)
            .collect();
        let mass_rate: Vec<f64> = fields.gtilde.iter().map(|g| TWO_PI2 * g).collect();
        let d_mass: Vec<f64> = mass_rate
            .iter()
            .zip(&fields.w_s)
            .map(|(m, ws)| m * ws)
            .collect();
        Self {
            nodes: profile.grid().nodes(),
            arc: cumulative_from_left(&arc_rate, &d_arc, h),
            arc_rate,
            mass: cumulative_from_left(&mass_rate, &d_mass, h),
            mass_rate,
            h,
        }
    }

    fn locate(&self, s: f64) -> (usize, f64) {
        let n = self.nodes.len();
        let pos = ((s - self.nodes[0]) / self.h).clamp(0.0, (n - 1) as f64);
        let i = (pos.floor() as usize).min(n - 2);
        (i, pos - i as f64)
    }

    fn interp(&self, values: &[f64], rates: &[f64], s: f64) -> f64 {
        let (i, x) = self.locate(s);
        hermite(values[i], values[i + 1], rates[i], rates[i + 1], self.h, x)
    }

    fn clamp(&self, s: f64) -> f64 {
        s.clamp(self.nodes[0], self.nodes[self.nodes.len() - 1])
    }

    /// Arc length from the left end to `s`.
    pub fn arc_at(&self, s: f64) -> f64 {
        self.interp(&self.arc, &self.arc_rate, self.clamp(s))
    }

    /// `int 2 pi^2 gtilde ds` from the left end to `s`.
    pub fn volume_at(&self, s: f64) -> f64 {
        self.interp(&self.mass, &self.mass_rate, self.clamp(s))
    }

    pub fn distance(&self, s_a: f64, s_b: f64) -> f64 {
        (self.arc_at(s_b) - self.arc_at(s_a)).abs()
    }

    pub fn diameter(&self) -> f64 {
        self.arc[self.arc.len() - 1]
    }

    pub fn total_volume(&self) -> f64 {
        self.mass[self.mass.len() - 1]
    }

    /// Coordinate where the arc length from the left end equals `target`.
    fn s_at_arc(&self, target: f64) -> f64 {
        let n = self.nodes.len();
        if target <= 0.0 {
            return self.nodes[0];
        }
        if target >= self.arc[n - 1] {
            return self.nodes[n - 1];
        }
        let i = self.arc.partition_point(|a| *a < target).clamp(1, n - 1) - 1;
        let (mut lo, mut hi) = (0.0f64, 1.0f64);
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi);
            let v = hermite(
                self.arc[i],
                self.arc[i + 1],
                self.arc_rate[i],
                self.arc_rate[i + 1],
                self.h,
                mid,
            );
            if v < target {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        self.nodes[i] + 0.5 * (lo + hi) * self.h
    }

    /// Volume of the set of orbits within transverse distance `d` of the
    /// orbit at `s0`, clipped to the domain.
    pub fn tube_volume(&self, s0: f64, d: f64) -> Result<f64> {
        if !(d >= 0.0) {
            return Err(Error::Argument(format!(
                "radius must be non-negative, got {d}"
            )));
        }
        let centre = self.arc_at(s0);
        let lo = self.s_at_arc(centre - d);
        let hi = self.s_at_arc(centre + d);
        Ok(self.volume_at(hi) - self.volume_at(lo))
    }

    /// `min_{s0} tube_volume(s0, pi / (2 sqrt(r_max))) * r_max` over all
    /// nodes.
    pub fn volume_probe(&self, r_max: f64) -> Result<f64> {
        if !(r_max > 0.0) {
            return Err(Error::Argument(format!(
                "maximal curvature must be positive, got {r_max}"
            )));
        }
        let d = PI / (2.0 * r_max.sqrt());
        let mut lowest = f64::INFINITY;
        for &s in &self.nodes {
            lowest = lowest.min(self.tube_volume(s, d)? * r_max);
        }
        Ok(lowest)
    }
}

/// Extremes of `R` over the resolved region.
pub fn curvature_range(profile: &Profile, fields: &Fields) -> (f64, f64) {
    let keep = mask(profile, RESOLVED_MASK);
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for (r, k) in fields.curvature.iter().zip(&keep) {
        if *k {
            lo = lo.min(*r);
            hi = hi.max(*r);
        }
    }
    (lo, hi)
}
