//! Executes a resolved configuration and writes its artifacts.

use std::fs;
use std::path::Path;

use rayon::prelude::*;
use serde::Serialize;

use sasaki_core::ambient::{curvature_sample, transverse_diameter, tube_areas, TubeOptions};
use sasaki_core::calculus::{integrals, potential, Fields, TransverseGeometry};
use sasaki_core::flow::{run, wave_speed, MonitorSample};
use sasaki_core::profile::{sample_round, Profile};
use sasaki_core::soliton::soliton_profile;
use sasaki_core::weighted::closed_forms;

use crate::config::{Command, GridSpec, RunConfig};
use crate::emit::{json, sha256_hex, Csv, Manifest, ManifestEntry};
use crate::CliError;

pub const MANIFEST: &str = "manifest.json";

/// Environment variable capping the sweep worker pool.
pub const THREADS_VAR: &str = "SASAKI_THREADS";

type Artifacts = Vec<(String, Vec<u8>)>;

/// Profile table: `s, gtilde, R, f_s, c_local, m`.
pub fn profile_csv(profile: &Profile) -> Result<Vec<u8>, CliError> {
    let fields = Fields::of(profile);
    let pot = potential(profile)?;
    let mut csv = Csv::new(&["s", "gtilde", "R", "f_s", "c_local", "m"]);
    for i in 0..fields.gtilde.len() {
        csv.row(
            [
                profile.grid().node(i),
                fields.gtilde[i],
                fields.curvature[i],
                pot.f_s[i],
                pot.c_local[i],
                pot.defect_m[i],
            ]
            .map(Some),
        );
    }
    Ok(csv.into_bytes())
}

#[derive(Serialize)]
struct GeomSummary {
    a1: f64,
    a2: f64,
    r: f64,
    volume: f64,
    total_curvature: f64,
    kappa: f64,
    lambda: f64,
    mu: f64,
    transverse_diameter: f64,
    numeric: NumericSummary,
    grid: GridSpec,
}

#[derive(Serialize)]
struct NumericSummary {
    volume: f64,
    total_curvature: f64,
    r: f64,
    entropy: Option<f64>,
    transverse_diameter: f64,
}

fn geom(cfg: &RunConfig) -> Result<Artifacts, CliError> {
    let p = cfg.ordered_params()?;
    let profile = sample_round(&p, &cfg.grid()?)?;
    let cf = closed_forms(&p);
    let it = integrals(&profile);
    let summary = GeomSummary {
        a1: p.a1,
        a2: p.a2,
        r: cf.r,
        volume: cf.volume,
        total_curvature: cf.total_curvature,
        kappa: cf.kappa,
        lambda: cf.lambda,
        mu: cf.mu,
        transverse_diameter: transverse_diameter(&p),
        numeric: NumericSummary {
            volume: it.volume,
            total_curvature: it.total_curvature,
            r: it.r_numeric,
            entropy: it.entropy,
            transverse_diameter: TransverseGeometry::of(&profile).diameter(),
        },
        grid: cfg.grid,
    };
    Ok(vec![
        ("summary.json".into(), json(&summary)),
        ("profile.csv".into(), profile_csv(&profile)?),
    ])
}

#[derive(Serialize)]
struct SolitonSummary {
    a1: f64,
    a2: f64,
    k: f64,
    p: f64,
    q: f64,
    kappa: f64,
    c: f64,
    volume: f64,
    defect_norm: f64,
    grid: GridSpec,
}

fn soliton(cfg: &RunConfig) -> Result<Artifacts, CliError> {
    let p = cfg.ordered_params()?;
    let sol = soliton_profile(&p, &cfg.grid()?)?;
    let pot = potential(&sol.profile)?;
    let summary = SolitonSummary {
        a1: p.a1,
        a2: p.a2,
        k: sol.roots.k,
        p: sol.roots.p,
        q: sol.roots.q,
        kappa: sol.kappa,
        c: sol.c,
        volume: Fields::of(&sol.profile).volume(),
        defect_norm: pot.defect_norm,
        grid: cfg.grid,
    };
    Ok(vec![
        ("soliton.json".into(), json(&summary)),
        ("profile.csv".into(), profile_csv(&sol.profile)?),
    ])
}

#[derive(Serialize)]
struct FlowSummary<'a> {
    config: &'a RunConfig,
    converged: bool,
    steps: usize,
    t_final: f64,
    defect_norm_final: f64,
    /// Signed drift rate of the profile peak in the original chart.
    wave_speed: Option<f64>,
    #[serde(rename = "empirical_C0")]
    empirical_c0: f64,
}

fn flow(cfg: &RunConfig) -> Result<Artifacts, CliError> {
    let outcome = run(&cfg.flow_config()?)?;
    let mut monitors = Csv::new(&MonitorSample::COLUMNS);
    for s in &outcome.monitors.samples {
        monitors.row(s.values().map(Some));
    }
    let last = outcome.monitors.samples.last();
    let summary = FlowSummary {
        config: cfg,
        converged: outcome.converged,
        steps: outcome.final_state.steps,
        t_final: outcome.final_state.t,
        defect_norm_final: last.map_or(f64::NAN, |s| s.defect_norm),
        wave_speed: wave_speed(&outcome).ok(),
        empirical_c0: outcome
            .monitors
            .extras
            .iter()
            .map(|e| e.volume_probe)
            .fold(f64::INFINITY, f64::min),
    };
    Ok(vec![
        ("monitors.csv".into(), monitors.into_bytes()),
        (
            "final_profile.csv".into(),
            profile_csv(&outcome.final_state.profile)?,
        ),
        ("summary.json".into(), json(&summary)),
    ])
}

fn tube(cfg: &RunConfig) -> Result<Artifacts, CliError> {
    let p = cfg.params()?;
    let settings = &cfg.tube;
    let mut artifacts = Artifacts::new();
    let mut lambda = settings.lambda;
    if settings.curvature_samples > 0 {
        let sample = curvature_sample(&p, settings.curvature_samples, cfg.seed)?;
        let mut csv = Csv::new(&["x1", "x2", "x3", "x4", "plane", "K"]);
        for r in &sample.records {
            let [a, b, c, d] = r.point;
            csv.row([a, b, c, d, f64::from(r.plane.id()), r.curvature].map(Some));
        }
        artifacts.push(("curvature.csv".into(), csv.into_bytes()));
        artifacts.push((
            "curvature_summary.json".into(),
            json(&serde_json::json!({
                "k_max_estimate": sample.k_max_estimate,
                "k_max_pointwise": sample.k_max_pointwise,
                "lambda_bar": sample.lambda_bar(),
                "r_transverse_check": sample.r_transverse_check,
                "reeb_plane_error": sample.reeb_plane_error,
            })),
        ));
        lambda = lambda.or(Some(sample.lambda_bar()));
    }
    let options = TubeOptions {
        lattice: settings
            .lattice
            .unwrap_or_else(|| settings.base.default_lattice()),
        step: settings.step,
        lambda,
        curvature_samples: settings.curvature_samples,
        seed: cfg.seed,
    };
    let t = settings.t.clone().unwrap_or_default();
    let report = tube_areas(&p, &settings.base, &t, &options)?;
    let mut csv = Csv::new(&["t", "area", "second_difference", "weyl_bound"]);
    for i in 0..report.t.len() {
        csv.row([
            Some(report.t[i]),
            Some(report.area[i]),
            report.second_difference[i],
            report.weyl_bound[i],
        ]);
    }
    artifacts.push(("tube.csv".into(), csv.into_bytes()));
    artifacts.push((
        "tube_summary.json".into(),
        json(&serde_json::json!({
            "base": report.base,
            "lattice": report.lattice,
            "lambda": report.lambda,
            "base_length": report.base_length,
            "max_area": report.max_area(),
            "worst_concavity": report.worst_concavity(),
            "weyl_margin": report.weyl_margin(),
        })),
    ));
    Ok(artifacts)
}

#[derive(Serialize)]
struct SweepEntry {
    directory: String,
    command: Command,
    exit_code: i32,
    error: Option<String>,
}

fn sweep_pool() -> Result<rayon::ThreadPool, CliError> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Ok(value) = std::env::var(THREADS_VAR) {
        let n: usize = value
            .trim()
            .parse()
            .ok()
            .filter(|n| *n > 0)
            .ok_or_else(|| {
                CliError::Config(format!(
                    "{THREADS_VAR}: expected a positive integer, got {value:?}"
                ))
            })?;
        builder = builder.num_threads(n);
    }
    builder
        .build()
        .map_err(|e| CliError::Io(std::io::Error::other(e)))
}

fn sweep(cfg: &RunConfig, out: &Path) -> Result<(Artifacts, i32), CliError> {
    let pool = sweep_pool()?;
    let entries: Vec<SweepEntry> = pool.install(|| {
        cfg.runs
            .par_iter()
            .enumerate()
            .map(|(i, run)| {
                let directory = format!("run-{i:03}");
                let (exit_code, error) = match execute(run, &out.join(&directory)) {
                    Ok(code) => (code, None),
                    Err(e) => (e.exit_code(), Some(e.to_string())),
                };
                SweepEntry {
                    directory,
                    command: run.command,
                    exit_code,
                    error,
                }
            })
            .collect()
    });
    let code = entries.iter().map(|e| e.exit_code).max().unwrap_or(0);
    Ok((vec![("sweep.json".into(), json(&entries))], code))
}

/// Runs `cfg`, writes its artifacts and manifest into `out`, and returns the
/// exit code.
pub fn execute(cfg: &RunConfig, out: &Path) -> Result<i32, CliError> {
    fs::create_dir_all(out)?;
    let (artifacts, code) = match cfg.command {
        Command::Geom => (geom(cfg)?, 0),
        Command::Soliton => (soliton(cfg)?, 0),
        Command::Flow => (flow(cfg)?, 0),
        Command::Tube => (tube(cfg)?, 0),
        Command::Sweep => sweep(cfg, out)?,
    };
    let mut entries = Vec::with_capacity(artifacts.len());
    for (name, bytes) in &artifacts {
        fs::write(out.join(name), bytes)?;
        entries.push(ManifestEntry {
            name: name.clone(),
            sha256: sha256_hex(bytes),
            bytes: bytes.len(),
        });
    }
    let manifest = Manifest {
        config: cfg,
        exit_code: code,
        artifacts: entries,
    };
    fs::write(out.join(MANIFEST), json(&manifest))?;
    Ok(code)
}
