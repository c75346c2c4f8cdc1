//! Acceptance suite: one line per criterion, non-zero exit if any fails.
//!
//! Runs as a plain binary (`harness = false`) so the verdict lines are always
//! visible in `cargo test` output.

use std::f64::consts::PI;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::ExitCode;
use std::time::Instant;

use sasaki_core::ambient::frame::contact_basis;
use sasaki_core::ambient::{
    curvature_sample, default_t_grid, geodesic, tube_areas, AmbientPoint, GeodesicState, TubeBase,
    TubeOptions,
};
use sasaki_core::calculus::{integrals, mask, potential, Fields, GRADIENT_MASK};
use sasaki_core::flow::{align_and_compare, run, wave_speed, FlowConfig, InitialData, RunOutcome};
use sasaki_core::grid::{trapezoid, Grid};
use sasaki_core::profile::sample_round;
use sasaki_core::soliton::{ratio, root_pair, soliton_profile, solve_k};
use sasaki_core::weighted::{closed_forms, round_profile_and_curvature, WeightedParams};

struct Verdict {
    passed: bool,
    lines: Vec<String>,
}

impl Verdict {
    fn new() -> Self {
        Self {
            passed: true,
            lines: Vec::new(),
        }
    }

    fn check(&mut self, ok: bool, what: impl Into<String>) {
        let what = what.into();
        self.lines
            .push(format!("{}{what}", if ok { "" } else { "FAILED " }));
        self.passed &= ok;
    }
}

fn params(a1: f64, a2: f64) -> WeightedParams {
    WeightedParams::ordered(a1, a2).expect("valid weights")
}

fn rel(a: f64, b: f64) -> f64 {
    (a / b - 1.0).abs()
}

fn closed_form_anchors() -> Verdict {
    let mut v = Verdict::new();
    let c12 = closed_forms(&params(1.0, 2.0));
    v.check(c12.r == 12.0, format!("r(1,2) = {}", c12.r));
    let e = rel(c12.volume, PI * PI);
    v.check(e < 1e-12, format!("volume(1,2) rel err {e:.2e}"));
    let at_half = round_profile_and_curvature(&params(1.0, 2.0), 0.5).curvature;
    let e = (at_half - 8.0).abs() / 8.0;
    v.check(e < 1e-12, format!("R(1/2) = {at_half:.17} rel err {e:.2e}"));
    let c23 = closed_forms(&params(2.0, 3.0));
    let e = rel(c23.total_curvature, 20.0 * PI * PI / 3.0);
    v.check(e < 1e-12, format!("total curvature(2,3) rel err {e:.2e}"));
    v
}

fn quadrature_fidelity() -> Verdict {
    let mut v = Verdict::new();
    let p = params(2.0, 3.0);
    let cf = closed_forms(&p);
    let errors = |n: usize| {
        let prof = sample_round(&p, &Grid::new(40.0, n).unwrap()).unwrap();
        let it = integrals(&prof);
        (
            rel(it.volume, cf.volume),
            rel(it.total_curvature, cf.total_curvature),
        )
    };
    let (ev, et) = errors(2049);
    v.check(ev < 1e-6, format!("volume rel err {ev:.2e} at N=2049"));
    v.check(
        et < 1e-6,
        format!("total curvature rel err {et:.2e} at N=2049"),
    );
    let (fv, ft) = errors(4097);
    let (gv, gt) = (ev / fv, et / ft);
    v.check(
        gv >= 3.5,
        format!("volume error ratio on halving h {gv:.3} ({ev:.2e} -> {fv:.2e})"),
    );
    v.check(
        gt >= 3.5,
        format!("total curvature error ratio on halving h {gt:.3} ({et:.2e} -> {ft:.2e})"),
    );
    v
}

fn soliton_solver() -> Verdict {
    let mut v = Verdict::new();
    let roots = root_pair(2.0 / std::f64::consts::E).unwrap();
    let (r1, r2) = roots.residuals();
    let e = (roots.y2 - 2.0).abs();
    v.check(
        e < 1e-13 && r1 < 1e-13 && r2 < 1e-13,
        format!("k=2/e: |y2-2| {e:.1e}, residuals {r1:.1e} {r2:.1e}"),
    );

    let ks: Vec<f64> = (1..=100).map(|i| i as f64 / 101.0).collect();
    let ratios: Vec<f64> = ks.iter().map(|&k| ratio(k).unwrap()).collect();
    let increasing = ratios.windows(2).all(|w| w[1] > w[0]);
    v.check(increasing, "ratio(k) strictly increasing on 100 points");

    for (a1, a2, half_width) in [(1.0, 2.0, 30.0), (2.0, 3.0, 40.0)] {
        let p = params(a1, a2);
        let k = solve_k(a1 / a2).unwrap();
        let e = (ratio(k).unwrap() - a1 / a2).abs();
        v.check(e < 1e-10, format!("({a1},{a2}) solve_k residual {e:.1e}"));

        let n = 4097;
        let sol = soliton_profile(&p, &Grid::new(half_width, n).unwrap()).unwrap();
        let fields = Fields::of(&sol.profile);
        let h = sol.profile.grid().spacing();
        let e = (trapezoid(&fields.gtilde, h) * a1 * a2 - 1.0).abs();
        v.check(e < 1e-6, format!("({a1},{a2}) int gtilde rel err {e:.1e}"));

        let left = rel(fields.w_s[2], 2.0 / a2);
        let right = rel(fields.w_s[n - 3], -2.0 / a1);
        v.check(
            left < 1e-2 && right < 1e-2,
            format!("({a1},{a2}) end slopes rel err {left:.1e} {right:.1e}"),
        );

        let pot = potential(&sol.profile).unwrap();
        v.check(
            pot.defect_norm < 1e-6,
            format!("({a1},{a2}) defect {:.1e} at N={n}", pot.defect_norm),
        );

        // Below 1e-4 max gtilde the second difference of ln gtilde is
        // dominated by rounding amplified by 1/gtilde, growing as h^-2; the
        // wider mask value is reported for reference only.
        let r = fields.total_curvature() / fields.volume();
        let gap_on = |keep: &[bool]| {
            (0..n).filter(|&i| keep[i]).fold(0.0f64, |acc, i| {
                let alt = r - 2.0 * sol.c * fields.w_s[i];
                acc.max((alt - fields.curvature[i]).abs() / fields.curvature[i].abs())
            })
        };
        let gap = gap_on(&mask(&sol.profile, GRADIENT_MASK));
        let wide = gap_on(&pot.mask);
        v.check(
            gap < 1e-4,
            format!(
            "({a1},{a2}) curvature forms max rel gap {gap:.1e} (on gtilde > 1e-6 max: {wide:.1e})"
        ),
        );
    }
    v
}

struct FlowRun {
    outcome: RunOutcome,
    params: WeightedParams,
    grid: Grid,
}

fn flow_run() -> FlowRun {
    let p = params(2.0, 3.0);
    let grid = Grid::new(40.0, 2049).unwrap();
    let init = InitialData::Bump {
        eps: 0.3,
        center: None,
        width: 2.0,
    };
    let outcome = run(&FlowConfig::new(p, grid, init)).expect("flow run");
    FlowRun {
        outcome,
        params: p,
        grid,
    }
}

fn flow_convergence(fr: &FlowRun) -> Verdict {
    let mut v = Verdict::new();
    let out = &fr.outcome;
    let last = out.monitors.samples.last().unwrap();
    v.check(
        out.converged && last.defect_norm < 1e-5,
        format!(
            "converged {} at t={:.4}, defect {:.2e}",
            out.converged, last.t, last.defect_norm
        ),
    );
    let sol = soliton_profile(&fr.params, &fr.grid).unwrap();
    let al = align_and_compare(&out.final_state.profile, &sol).unwrap();
    v.check(
        al.linf_rel < 1e-3,
        format!("aligned Linf rel err {:.2e}", al.linf_rel),
    );
    match wave_speed(out) {
        Ok(speed) => {
            let e = rel(speed.abs(), 2.0 * sol.c);
            v.check(
                e < 0.05,
                format!(
                    "|wave speed| {:.6} vs 2c {:.6}, rel err {e:.1e}",
                    speed.abs(),
                    2.0 * sol.c
                ),
            );
        }
        Err(err) => v.check(false, format!("wave speed unavailable: {err}")),
    }
    v
}

fn monotonicity(fr: &FlowRun) -> Verdict {
    let mut v = Verdict::new();
    let samples = &fr.outcome.monitors.samples;
    let extras = &fr.outcome.monitors.extras;

    let mut worst_rise = f64::NEG_INFINITY;
    let mut monotone = true;
    for w in samples.windows(2) {
        let rise = w[1].entropy - w[0].entropy;
        worst_rise = worst_rise.max(rise / w[0].entropy.abs());
        monotone &= rise <= 1e-8 * w[0].entropy.abs();
    }
    v.check(
        monotone,
        format!("entropy non-increasing, worst relative rise {worst_rise:.1e}"),
    );

    let drift = |f: &dyn Fn(usize) -> f64| {
        (0..samples.len())
            .map(|i| rel(f(i), f(0)))
            .fold(0.0, f64::max)
    };
    let dv = drift(&|i| samples[i].volume);
    v.check(dv < 1e-6, format!("volume drift {dv:.1e}"));
    let dt = drift(&|i| extras[i].total_curvature);
    v.check(dt < 1e-4, format!("total curvature drift {dt:.1e}"));
    let dr = drift(&|i| samples[i].r_numeric);
    v.check(dr < 1e-6, format!("r drift {dr:.1e}"));

    let t_final = samples.last().unwrap().t;
    let window: Vec<usize> = (0..samples.len())
        .filter(|&i| samples[i].t >= t_final / 20.0 && samples[i].t <= t_final / 4.0)
        .filter(|&i| samples[i].entropy_rate_fd.is_finite())
        .collect();
    let (mut fd_gap, mut alt_gap) = (0.0f64, 0.0f64);
    for &i in &window {
        let s = &samples[i];
        fd_gap = fd_gap
            .max((s.entropy_rate_fd - s.entropy_rate_formula).abs() / s.entropy_rate_formula.abs());
        alt_gap = alt_gap.max(
            (extras[i].entropy_rate_alt - s.entropy_rate_formula).abs()
                / s.entropy_rate_formula.abs(),
        );
    }
    v.check(
        !window.is_empty() && fd_gap < 1e-3,
        format!(
            "mid-run FD rate vs formula max rel gap {fd_gap:.1e} over {} samples",
            window.len()
        ),
    );
    v.check(
        !window.is_empty() && alt_gap < 1e-3,
        format!("defect form vs formula max rel gap {alt_gap:.1e}"),
    );
    v
}

fn harnack(fr: &FlowRun) -> Verdict {
    let mut v = Verdict::new();
    let late: Vec<f64> = fr
        .outcome
        .monitors
        .samples
        .iter()
        .filter(|s| s.t >= 0.01)
        .map(|s| s.harnack_margin)
        .collect();
    let worst = late.iter().copied().fold(f64::INFINITY, f64::min);
    v.check(
        !late.is_empty() && worst >= -1e-3,
        format!(
            "min margin {worst:.3e} over {} samples with t >= 0.01",
            late.len()
        ),
    );
    v
}

fn volume_lemma(fr: &FlowRun) -> Verdict {
    let mut v = Verdict::new();
    let probes: Vec<f64> = fr
        .outcome
        .monitors
        .extras
        .iter()
        .map(|e| e.volume_probe)
        .collect();
    let c0 = probes.iter().copied().fold(f64::INFINITY, f64::min);
    let ok = probes.iter().all(|p| p.is_finite()) && c0 > 0.0;
    v.check(
        ok,
        format!("empirical C0 = {c0:.6} over {} samples", probes.len()),
    );
    v
}

fn ambient_suite() -> Verdict {
    let mut v = Verdict::new();

    let round = WeightedParams::new(1.0, 1.0).unwrap();
    let ts = [PI / 8.0, PI / 4.0];
    let rep = tube_areas(
        &round,
        &TubeBase::Circle,
        &ts,
        &TubeOptions::for_base(&TubeBase::Circle),
    )
    .unwrap();
    for (i, t) in ts.iter().enumerate() {
        let exact = 2.0 * PI * PI * (2.0 * t).sin();
        let e = (rep.area[i] - exact).abs();
        v.check(
            e < 1e-4,
            format!("round circle tube t={t:.4}: area err {e:.1e}"),
        );
        if let Some(bound) = rep.weyl_bound[i] {
            let e = (rep.area[i] - bound).abs();
            v.check(
                e < 1e-4,
                format!("round circle tube t={t:.4}: |area - bound| {e:.1e}"),
            );
        } else {
            v.check(false, "round circle tube: no bound");
        }
    }

    let p12 = WeightedParams::new(1.0, 2.0).unwrap();
    let x = AmbientPoint::normalized([0.4, 0.3, -0.5, 0.6]).unwrap();
    let (j, k) = contact_basis(x.vector());
    let start = GeodesicState::new(x, (j * 0.3 + k).into())
        .unwrap()
        .unit(&p12)
        .unwrap();
    let path = geodesic(&p12, &start, 10.0, 1e-3).unwrap();
    v.check(
        path.horizontality_drift < 1e-6,
        format!(
            "(1,2) horizontality drift {:.1e} over length 10",
            path.horizontality_drift
        ),
    );

    let p23 = WeightedParams::new(2.0, 3.0).unwrap();
    let torus = TubeBase::Torus { c1: 0.6 };
    let grid = default_t_grid(&p23, &torus, 9).unwrap();
    let rep = tube_areas(&p23, &torus, &grid, &TubeOptions::for_base(&torus)).unwrap();
    let concavity = rep.worst_concavity();
    v.check(
        concavity <= 1e-3,
        format!("(2,3) torus tube max A''/max A {concavity:.2e}"),
    );

    let grid = default_t_grid(&p23, &TubeBase::Circle, 9).unwrap();
    let rep = tube_areas(
        &p23,
        &TubeBase::Circle,
        &grid,
        &TubeOptions::for_base(&TubeBase::Circle),
    )
    .unwrap();
    match rep.weyl_margin() {
        Some(m) => v.check(
            m >= 0.0,
            format!(
                "(2,3) circle tube bound margin {m:.3e} with lambda {:?}",
                rep.lambda
            ),
        ),
        None => v.check(false, "(2,3) circle tube: no bound"),
    }

    for (a1, a2) in [(1.0, 2.0), (2.0, 3.0)] {
        let p = WeightedParams::new(a1, a2).unwrap();
        let cs = curvature_sample(&p, 100, 11).unwrap();
        v.check(
            cs.reeb_plane_error < 1e-3,
            format!(
                "({a1},{a2}) Reeb-plane |K-1| max {:.1e}",
                cs.reeb_plane_error
            ),
        );
        v.check(
            cs.r_transverse_check < 1e-2,
            format!(
                "({a1},{a2}) |2K(contact)+6-R| max {:.1e}",
                cs.r_transverse_check
            ),
        );
    }
    v
}

fn defect_decay(fr: &FlowRun) -> Verdict {
    let mut v = Verdict::new();
    let samples = &fr.outcome.monitors.samples;
    let t_final = samples.last().unwrap().t;
    let pts: Vec<(f64, f64)> = samples
        .iter()
        .filter(|s| s.t >= 0.5 * t_final && s.defect_norm > 0.0)
        .map(|s| (s.t, s.defect_norm.ln()))
        .collect();
    if pts.len() < 3 {
        v.check(
            false,
            format!("only {} samples in the final half", pts.len()),
        );
        return v;
    }
    let m = pts.len() as f64;
    let (mt, my) = pts
        .iter()
        .fold((0.0, 0.0), |(a, b), (t, y)| (a + t / m, b + y / m));
    let (mut sty, mut stt, mut syy) = (0.0, 0.0, 0.0);
    for (t, y) in &pts {
        sty += (t - mt) * (y - my);
        stt += (t - mt) * (t - mt);
        syy += (y - my) * (y - my);
    }
    let slope = sty / stt;
    let r2 = sty * sty / (stt * syy);
    v.check(
        r2 > 0.99 && slope < 0.0,
        format!(
            "log defect fit over {} samples: slope {slope:.4}, R^2 {r2:.6}",
            pts.len()
        ),
    );
    v
}

type Criterion<'a> = Box<dyn Fn() -> Verdict + 'a>;

fn guarded(f: impl FnOnce() -> Verdict) -> Verdict {
    catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|e| {
        let msg = e
            .downcast_ref::<String>()
            .cloned()
            .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
            .unwrap_or_default();
        Verdict {
            passed: false,
            lines: vec![format!("panicked: {msg}")],
        }
    })
}

fn main() -> ExitCode {
    let started = Instant::now();
    let flow = catch_unwind(flow_run).ok();
    let flow = &flow;
    let with_flow = |f: fn(&FlowRun) -> Verdict| {
        move || match flow {
            Some(fr) => f(fr),
            None => Verdict {
                passed: false,
                lines: vec!["flow run failed".into()],
            },
        }
    };

    let criteria: Vec<(&str, Criterion)> = vec![
        ("closed forms", Box::new(closed_form_anchors)),
        ("quadrature fidelity", Box::new(quadrature_fidelity)),
        ("soliton solver", Box::new(soliton_solver)),
        ("flow convergence", Box::new(with_flow(flow_convergence))),
        (
            "monotonicity and conservation",
            Box::new(with_flow(monotonicity)),
        ),
        ("harnack", Box::new(with_flow(harnack))),
        ("volume lemma probe", Box::new(with_flow(volume_lemma))),
        ("ambient geometry", Box::new(ambient_suite)),
        ("defect decay", Box::new(with_flow(defect_decay))),
    ];

    let mut failed = 0;
    let mut report = Vec::new();
    for (i, (name, f)) in criteria.iter().enumerate() {
        let t0 = Instant::now();
        let verdict = guarded(f);
        let status = if verdict.passed { "PASS" } else { "FAIL" };
        report.push(format!(
            "criterion {} ({name}): {status} [{:.1}s]; {}",
            i + 1,
            t0.elapsed().as_secs_f64(),
            verdict.lines.join("; ")
        ));
        failed += usize::from(!verdict.passed);
    }
    println!();
    for line in &report {
        println!("{line}");
    }
    println!(
        "acceptance: {} of {} criteria passed in {:.1}s",
        report.len() - failed,
        report.len(),
        started.elapsed().as_secs_f64()
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
