//! The reduced normalized flow `d/dt ln gtilde = r - R` on profiles.
//!
//! The soliton is a travelling wave in the fixed s-chart, so the profile is
//! evolved in a frame that moves with velocity `v`,
//!
//! ```text
//! w_t = r + (2 / gtilde) w_ss + v w_s,
//! ```
//!
//! where `v` is chosen every step to hold the centroid of `gtilde` in place.
//! The accumulated frame displacement is [`FlowState::cumulative_shift`] and
//! a point at frame coordinate `s` sits at `s + cumulative_shift` in the
//! original chart.
//!
//! Time stepping is linearly implicit BDF2 with variable steps (implicit
//! Euler for the first step): the diffusion coefficient `2 / gtilde` is taken
//! from the extrapolated state and everything else is implicit, giving one
//! banded solve per step. With `r` frozen at its initial value the volume
//! mode is neutrally unstable under discretisation error, so the volume is
//! projected back after every step by a constant shift of `w`.

use serde::{Deserialize, Serialize};

use crate::calculus::{
    curvature_range, entropy_on, entropy_rates, harnack_with, mask, potential_with, Fields,
    TransverseGeometry, RESOLVED_MASK, WEIGHTED_MASK,
};
use crate::error::{Error, Result};
use crate::grid::{trapezoid, BandedMatrix, Grid, D1_STENCIL, D2_STENCIL};
use crate::profile::{sample_round, Profile};
use crate::soliton::{soliton_constants, soliton_profile, soliton_samples, SolitonSolution};
use crate::weighted::WeightedParams;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialData {
    Round,
    /// Round profile times `1 + eps exp(-((s - center)/width)^2)`, rescaled to
    /// the round volume. `center` defaults to the peak of the round profile.
    Bump {
        eps: f64,
        #[serde(default)]
        center: Option<f64>,
        #[serde(default = "default_bump_width")]
        width: f64,
    },
    Soliton,
}

pub fn default_bump_width() -> f64 {
    2.0
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DtControl {
    /// Largest allowed `max |Δw|` per step over the resolved region.
    pub max_change: f64,
    pub max_dt: f64,
    /// Largest ratio between consecutive steps.
    pub max_growth: f64,
}

impl Default for DtControl {
    fn default() -> Self {
        Self {
            max_change: 1e-3,
            max_dt: 1e-4,
            max_growth: 1.2,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FlowConfig {
    pub params: WeightedParams,
    pub grid: Grid,
    pub init: InitialData,
    pub dt: DtControl,
    pub t_end: f64,
    pub sample_every: usize,
    pub defect_tolerance: f64,
    /// Stop as soon as a sample meets the defect tolerance.
    pub stop_on_convergence: bool,
    /// Relaxation rate pulling the centroid back to its initial position.
    pub frame_gain: f64,
    pub max_steps: usize,
}

impl FlowConfig {
    pub fn new(params: WeightedParams, grid: Grid, init: InitialData) -> Self {
        Self {
            params,
            grid,
            init,
            dt: DtControl::default(),
            t_end: 2.0,
            sample_every: 20,
            defect_tolerance: 1e-6,
            stop_on_convergence: true,
            frame_gain: 5.0,
            max_steps: 1_000_000,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.params.require_ordered()?;
        let positive = |name: &str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::Argument(format!("{name} must be positive, got {v}")))
            }
        };
        positive("t_end", self.t_end)?;
        positive("dt.max_change", self.dt.max_change)?;
        positive("dt.max_dt", self.dt.max_dt)?;
        positive("defect_tolerance", self.defect_tolerance)?;
        if !(self.dt.max_growth >= 1.0 && self.dt.max_growth < 1.0 + 2f64.sqrt()) {
            return Err(Error::Argument(format!(
                "dt.max_growth must lie in [1, 1 + sqrt 2) for BDF2 stability, got {}",
                self.dt.max_growth
            )));
        }
        if !(self.frame_gain.is_finite() && self.frame_gain >= 0.0) {
            return Err(Error::Argument(format!(
                "frame_gain must be non-negative, got {}",
                self.frame_gain
            )));
        }
        if self.sample_every == 0 {
            return Err(Error::Argument("sample_every must be at least 1".into()));
        }
        Ok(())
    }

    /// Builds the initial profile and checks `R > 0` on the resolved region.
    pub fn initial_profile(&self) -> Result<Profile> {
        self.validate()?;
        let profile = match self.init {
            InitialData::Round => sample_round(&self.params, &self.grid)?,
            InitialData::Bump { eps, center, width } => {
                let round = sample_round(&self.params, &self.grid)?;
                let c = center.unwrap_or_else(|| round.peak_position());
                round.with_bump(eps, c, width)?
            }
            InitialData::Soliton => soliton_profile(&self.params, &self.grid)?.profile,
        };
        let fields = Fields::of(&profile);
        let keep = mask(&profile, RESOLVED_MASK);
        for (i, k) in keep.iter().enumerate() {
            if *k && !(fields.curvature[i] > 0.0) {
                return Err(Error::Precondition(format!(
                    "initial transverse curvature must be positive; R = {:.4e} at s = {:.4}",
                    fields.curvature[i],
                    profile.grid().node(i)
                )));
            }
        }
        Ok(profile)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FlowState {
    pub profile: Profile,
    pub t: f64,
    /// Average curvature, frozen at its initial value.
    pub r: f64,
    pub cumulative_shift: f64,
    pub steps: usize,
    volume: f64,
    anchor: f64,
    frame_gain: f64,
    history: Option<(Vec<f64>, f64)>,
}

fn centroid(fields: &Fields, nodes: &[f64]) -> f64 {
    let moment: Vec<f64> = nodes
        .iter()
        .zip(&fields.gtilde)
        .map(|(s, g)| s * g)
        .collect();
    trapezoid(&moment, fields.h) / trapezoid(&fields.gtilde, fields.h)
}

impl FlowState {
    pub fn new(profile: Profile, frame_gain: f64) -> Self {
        let fields = Fields::of(&profile);
        let volume = fields.volume();
        let r = fields.total_curvature() / volume;
        let anchor = centroid(&fields, &profile.grid().nodes());
        Self {
            profile,
            t: 0.0,
            r,
            cumulative_shift: 0.0,
            steps: 0,
            volume,
            anchor,
            frame_gain,
            history: None,
        }
    }

    /// Volume every step is projected back to.
    pub fn target_volume(&self) -> f64 {
        self.volume
    }

    /// Previous `ln gtilde` and the step that led from it to the current one.
    pub fn previous(&self) -> Option<(&[f64], f64)> {
        self.history.as_ref().map(|(w, dt)| (w.as_slice(), *dt))
    }

    /// Frame velocity that keeps the centroid of `gtilde` at its anchor.
    pub fn frame_velocity(&self, fields: &Fields) -> f64 {
        let nodes = self.profile.grid().nodes();
        // int s (r - R) gtilde ds with (r - R) gtilde = r gtilde + 2 w_ss.
        let drift: Vec<f64> = nodes
            .iter()
            .zip(fields.gtilde.iter().zip(&fields.w_ss))
            .map(|(s, (g, d2))| s * (self.r * g + 2.0 * d2))
            .collect();
        let mass = trapezoid(&fields.gtilde, fields.h);
        trapezoid(&drift, fields.h) / mass
            + self.frame_gain * (centroid(fields, &nodes) - self.anchor)
    }

    /// Largest `|w_t|` on the resolved region for frame velocity `v`.
    fn max_rate(&self, fields: &Fields, v: f64) -> f64 {
        let keep = mask(&self.profile, RESOLVED_MASK);
        let mut rate: f64 = 0.0;
        for i in 0..keep.len() {
            if keep[i] {
                rate = rate.max((self.r - fields.curvature[i] + v * fields.w_s[i]).abs());
            }
        }
        rate
    }

    /// Step size from the change budget, the cap and the growth limit.
    pub fn suggest_dt(&self, control: &DtControl) -> f64 {
        let fields = Fields::of(&self.profile);
        let v = self.frame_velocity(&fields);
        let rate = self.max_rate(&fields, v);
        let mut dt = control.max_dt.min(control.max_change / rate.max(1e-300));
        if let Some((_, prev)) = self.history {
            dt = dt.min(control.max_growth * prev);
        }
        dt
    }

    fn blow_up(&self, reason: impl Into<String>) -> Error {
        Error::BlowUp {
            t: self.t,
            reason: reason.into(),
            last_good: Box::new(self.clone()),
        }
    }
}

/// Adds the five-point stencil `coef` centred at `row` to the matrix with
/// the slope ghosts folded in; returns the affine part.
fn fold_row(
    matrix: &mut BandedMatrix,
    row: usize,
    coef: [f64; 5],
    h: f64,
    lambda: f64,
    mu: f64,
) -> f64 {
    let n = matrix.len() as isize;
    let mut affine = 0.0;
    for (j, c) in coef.iter().enumerate() {
        let k = row as isize + j as isize - 2;
        if k < 0 {
            let m = -k;
            matrix.add(row, m as usize, -c);
            affine += c * (-2.0 * m as f64 * h * lambda);
        } else if k > n - 1 {
            let m = k - (n - 1);
            matrix.add(row, (n - 1 - m) as usize, -c);
            affine += c * (-2.0 * m as f64 * h * mu);
        } else {
            matrix.add(row, k as usize, -c);
        }
    }
    affine
}

/// Advances the state by `dt`.
pub fn step(state: &FlowState, dt: f64) -> Result<FlowState> {
    if !(dt.is_finite() && dt > 0.0) {
        return Err(Error::Argument(format!(
            "time step must be positive, got {dt}"
        )));
    }
    let profile = &state.profile;
    let grid = *profile.grid();
    let n = grid.len();
    let h = grid.spacing();
    let w = profile.log_values();
    let fields = Fields::of(profile);
    let v = state.frame_velocity(&fields);

    // Implicit Euler on the first step, variable-step BDF2 afterwards.
    let (a0, rhs, extrapolated): (f64, Vec<f64>, Vec<f64>) = match &state.history {
        None => (
            1.0,
            w.iter().map(|x| x / dt + state.r).collect(),
            w.to_vec(),
        ),
        Some((prev, dt_prev)) => {
            let om = dt / dt_prev;
            let a0 = (1.0 + 2.0 * om) / (1.0 + om);
            let a1 = 1.0 + om;
            let a2 = om * om / (1.0 + om);
            let rhs = w
                .iter()
                .zip(prev)
                .map(|(x, p)| (a1 * x - a2 * p) / dt + state.r)
                .collect();
            let ex = w.iter().zip(prev).map(|(x, p)| x + om * (x - p)).collect();
            (a0, rhs, ex)
        }
    };

    let (lambda, mu) = (profile.lambda(), profile.mu());
    let mut matrix = BandedMatrix::zeros(n);
    let mut b = rhs;
    let (s2, s1) = (1.0 / (12.0 * h * h), 1.0 / (12.0 * h));
    for i in 0..n {
        let diffusion = 2.0 * (-extrapolated[i]).exp();
        let mut coef = [0.0; 5];
        for j in 0..5 {
            coef[j] = diffusion * D2_STENCIL[j] * s2 + v * D1_STENCIL[j] * s1;
        }
        b[i] += fold_row(&mut matrix, i, coef, h, lambda, mu);
        matrix.add(i, i, a0 / dt);
    }
    let mut next = match matrix.solve_refined(&b) {
        Some(x) => x,
        None => return Err(state.blow_up("banded solve failed")),
    };
    let volume = 2.0
        * std::f64::consts::PI.powi(2)
        * trapezoid(&next.iter().map(|x| x.exp()).collect::<Vec<_>>(), h);
    if !(volume.is_finite() && volume > 0.0) {
        return Err(state.blow_up(format!("volume became {volume}")));
    }
    let correction = (state.volume / volume).ln();
    next.iter_mut().for_each(|x| *x += correction);

    let profile = Profile::from_log(grid, *profile.params(), next)
        .map_err(|e| state.blow_up(e.to_string()))?;
    Ok(FlowState {
        profile,
        t: state.t + dt,
        r: state.r,
        cumulative_shift: state.cumulative_shift + v * dt,
        steps: state.steps + 1,
        volume: state.volume,
        anchor: state.anchor,
        frame_gain: state.frame_gain,
        history: Some((w.to_vec(), dt)),
    })
}

/// One monitor row.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MonitorSample {
    pub t: f64,
    pub r_max: f64,
    pub r_min: f64,
    pub r_numeric: f64,
    pub volume: f64,
    pub entropy: f64,
    pub entropy_rate_fd: f64,
    pub entropy_rate_formula: f64,
    pub harnack_margin: f64,
    pub defect_norm: f64,
    pub cumulative_shift: f64,
}

impl MonitorSample {
    pub const COLUMNS: [&'static str; 11] = [
        "t",
        "Rmax",
        "Rmin",
        "r_numeric",
        "volume",
        "entropy",
        "entropy_rate_fd",
        "entropy_rate_formula",
        "harnack_margin",
        "defect_norm",
        "cumulative_shift",
    ];

    pub fn values(&self) -> [f64; 11] {
        [
            self.t,
            self.r_max,
            self.r_min,
            self.r_numeric,
            self.volume,
            self.entropy,
            self.entropy_rate_fd,
            self.entropy_rate_formula,
            self.harnack_margin,
            self.defect_norm,
            self.cumulative_shift,
        ]
    }
}

/// Diagnostics recorded alongside each monitor row.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampleExtras {
    pub step: usize,
    /// The defect form of the entropy rate.
    pub entropy_rate_alt: f64,
    pub total_curvature: f64,
    /// Peak of `gtilde` in the original chart.
    pub peak_position: f64,
    /// `min_{s0} V(s0, pi / (2 sqrt(Rmax))) Rmax`.
    pub volume_probe: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct FlowMonitors {
    pub samples: Vec<MonitorSample>,
    pub extras: Vec<SampleExtras>,
}

impl FlowMonitors {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}

#[derive(Clone, Debug)]
pub struct RunOutcome {
    pub monitors: FlowMonitors,
    pub final_state: FlowState,
    pub converged: bool,
}

impl RunOutcome {
    /// `(t, peak position in the original chart)` at every sample.
    pub fn trajectory(&self) -> Vec<(f64, f64)> {
        self.monitors
            .samples
            .iter()
            .zip(&self.monitors.extras)
            .map(|(s, e)| (s.t, e.peak_position))
            .collect()
    }
}

struct PendingRate {
    index: usize,
    keep: Vec<bool>,
    before: Option<(f64, f64)>,
    at: (f64, f64),
}

fn sample(state: &FlowState) -> Result<(MonitorSample, SampleExtras, f64)> {
    let profile = &state.profile;
    let fields = Fields::of(profile);
    let volume = fields.volume();
    let total_curvature = fields.total_curvature();
    let (r_min, r_max) = curvature_range(profile, &fields);
    if !(r_min > 0.0) {
        return Err(state.blow_up(format!(
            "transverse curvature lost positivity (Rmin = {r_min:e})"
        )));
    }
    let keep = mask(profile, WEIGHTED_MASK);
    let entropy = entropy_on(&fields, &keep)
        .ok_or_else(|| state.blow_up("entropy undefined: R <= 0 on the weighted region"))?;
    let pot = potential_with(profile, &fields, state.r)?;
    let rates =
        entropy_rates(profile, &fields, &pot, state.r).map_err(|e| state.blow_up(e.to_string()))?;
    let harnack_margin = if state.t > 0.0 {
        harnack_with(profile, &fields, state.t, state.r)
            .map_err(|e| state.blow_up(e.to_string()))?
            .margin
    } else {
        f64::NAN
    };
    let volume_probe = TransverseGeometry::of(profile).volume_probe(r_max)?;
    let row = MonitorSample {
        t: state.t,
        r_max,
        r_min,
        r_numeric: total_curvature / volume,
        volume,
        entropy,
        entropy_rate_fd: f64::NAN,
        entropy_rate_formula: rates.gradient_form,
        harnack_margin,
        defect_norm: pot.defect_norm,
        cumulative_shift: state.cumulative_shift,
    };
    let extras = SampleExtras {
        step: state.steps,
        entropy_rate_alt: rates.defect_form,
        total_curvature,
        peak_position: profile.peak_position() + state.cumulative_shift,
        volume_probe,
    };
    Ok((row, extras, entropy))
}

fn entropy_with(profile: &Profile, keep: &[bool]) -> Option<f64> {
    entropy_on(&Fields::of(profile), keep)
}

/// Derivative at the middle of three points with unequal spacing.
fn three_point(t: [f64; 3], e: [f64; 3]) -> f64 {
    let (h1, h2) = (t[1] - t[0], t[2] - t[1]);
    -h2 / (h1 * (h1 + h2)) * e[0] + (h2 - h1) / (h1 * h2) * e[1] + h1 / (h2 * (h1 + h2)) * e[2]
}

pub fn run(config: &FlowConfig) -> Result<RunOutcome> {
    let initial = config.initial_profile()?;
    let mut state = FlowState::new(initial, config.frame_gain);
    let mut monitors = FlowMonitors::default();
    let mut pending: Option<PendingRate> = None;
    let mut converged = false;

    loop {
        let sampling = state.steps % config.sample_every == 0;
        if let Some(p) = pending.take() {
            let after = entropy_with(&state.profile, &p.keep);
            let rate = match (p.before, after) {
                (Some((t0, e0)), Some(e2)) => three_point([t0, p.at.0, state.t], [e0, p.at.1, e2]),
                (None, Some(e2)) => (e2 - p.at.1) / (state.t - p.at.0),
                _ => f64::NAN,
            };
            monitors.samples[p.index].entropy_rate_fd = rate;
        }
        let done = state.t >= config.t_end * (1.0 - 1e-12) || state.steps >= config.max_steps;
        if sampling || done {
            let (row, extras, entropy) = sample(&state)?;
            let keep = mask(&state.profile, WEIGHTED_MASK);
            let before = state.previous().and_then(|(w, dt)| {
                let prev =
                    Profile::from_log(*state.profile.grid(), *state.profile.params(), w.to_vec())
                        .ok()?;
                entropy_with(&prev, &keep).map(|e| (state.t - dt, e))
            });
            let hit = row.defect_norm < config.defect_tolerance;
            converged |= hit;
            monitors.samples.push(row);
            monitors.extras.push(extras);
            let stop = done || (hit && config.stop_on_convergence);
            if stop {
                // Close the series with a one-sided difference.
                let last = monitors.samples.len() - 1;
                if let Some((t0, e0)) = before {
                    monitors.samples[last].entropy_rate_fd = (entropy - e0) / (state.t - t0);
                }
                break;
            }
            pending = Some(PendingRate {
                index: monitors.samples.len() - 1,
                keep,
                before,
                at: (state.t, entropy),
            });
        }
        let dt = state
            .suggest_dt(&config.dt)
            .min(config.t_end - state.t)
            .max(1e-14);
        state = step(&state, dt)?;
    }
    Ok(RunOutcome {
        monitors,
        final_state: state,
        converged,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Alignment {
    /// `delta` with `profile(s) ≈ soliton(s + delta)`.
    pub shift: f64,
    pub linf_rel: f64,
    pub l2_rel: f64,
}

fn compare(profile: &Profile, reference_log: &[f64]) -> (f64, f64, f64) {
    let w = profile.log_values();
    let mut sq = 0.0;
    let mut diff_max: f64 = 0.0;
    let mut ref_max: f64 = 0.0;
    let mut d2 = 0.0;
    let mut r2 = 0.0;
    for (a, b) in w.iter().zip(reference_log) {
        sq += (a - b) * (a - b);
        let (ga, gb) = (a.exp(), b.exp());
        diff_max = diff_max.max((ga - gb).abs());
        ref_max = ref_max.max(gb);
        d2 += (ga - gb) * (ga - gb);
        r2 += gb * gb;
    }
    (sq, diff_max / ref_max, (d2 / r2).sqrt())
}

/// Finds the translation of the soliton closest to `profile` in the L2
/// distance of `ln gtilde` and reports relative errors of `gtilde` there.
pub fn align_and_compare(profile: &Profile, soliton: &SolitonSolution) -> Result<Alignment> {
    if !profile.same_grid(&soliton.profile) {
        return Err(Error::IncompatibleGrids);
    }
    let grid = *profile.grid();
    let n = grid.len();
    let h = grid.spacing();
    let nodes = grid.nodes();
    let consts = soliton_constants(&soliton.params)?;
    let w = profile.log_values();
    let sol = soliton.profile.log_values();

    // Coarse scan over whole-node translations on the overlap.
    let span = (n / 4) as isize;
    let mut best = (f64::INFINITY, 0isize);
    for j in -span..=span {
        let mut acc = 0.0;
        let mut count = 0usize;
        for i in 0..n as isize {
            let k = i + j;
            if k >= 0 && k < n as isize {
                let d = w[i as usize] - sol[k as usize];
                acc += d * d;
                count += 1;
            }
        }
        let score = acc / count as f64;
        if score < best.0 {
            best = (score, j);
        }
    }

    // Golden-section refinement on exact translates of the soliton.
    let objective = |delta: f64| -> Result<f64> {
        let samples = soliton_samples(&consts, &nodes, soliton.shift_gauge - delta)?;
        let reference: Vec<f64> = samples.iter().map(|x| x[1]).collect();
        Ok(compare(profile, &reference).0)
    };
    let centre = best.1 as f64 * h;
    let (mut a, mut b) = (centre - 1.5 * h, centre + 1.5 * h);
    let ratio = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = b - ratio * (b - a);
    let mut x2 = a + ratio * (b - a);
    let mut f1 = objective(x1)?;
    let mut f2 = objective(x2)?;
    while b - a > 1e-12 * h.max(1.0) {
        if f1 < f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - ratio * (b - a);
            f1 = objective(x1)?;
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + ratio * (b - a);
            f2 = objective(x2)?;
        }
    }
    let shift = 0.5 * (a + b);
    let samples = soliton_samples(&consts, &nodes, soliton.shift_gauge - shift)?;
    let reference: Vec<f64> = samples.iter().map(|x| x[1]).collect();
    let (_, linf_rel, l2_rel) = compare(profile, &reference);
    Ok(Alignment {
        shift,
        linf_rel,
        l2_rel,
    })
}

/// Least-squares drift of the peak over the final third of a converged run.
pub fn wave_speed(outcome: &RunOutcome) -> Result<f64> {
    if !outcome.converged {
        return Err(Error::Unavailable(
            "wave speed needs a converged run".into(),
        ));
    }
    let trajectory = outcome.trajectory();
    let t_final = outcome.final_state.t;
    let tail: Vec<(f64, f64)> = trajectory
        .into_iter()
        .filter(|(t, _)| *t >= 2.0 * t_final / 3.0)
        .collect();
    if tail.len() < 3 {
        return Err(Error::Unavailable(format!(
            "only {} samples in the final third of the run",
            tail.len()
        )));
    }
    let m = tail.len() as f64;
    let (st, sx) = tail
        .iter()
        .fold((0.0, 0.0), |(a, b), (t, x)| (a + t, b + x));
    let (mt, mx) = (st / m, sx / m);
    let (mut num, mut den) = (0.0, 0.0);
    for (t, x) in &tail {
        num += (t - mt) * (x - mx);
        den += (t - mt) * (t - mt);
    }
    Ok(num / den)
}
