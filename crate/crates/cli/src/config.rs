//! Run configuration: strict JSON parsing and validation.

use serde::{Deserialize, Serialize};

use sasaki_core::ambient::geodesic::MAX_STEP;
use sasaki_core::ambient::{default_t_grid, focal_limit, TubeBase};
use sasaki_core::flow::{DtControl, FlowConfig, InitialData};
use sasaki_core::grid::Grid;
use sasaki_core::profile::sample_round;
use sasaki_core::soliton::soliton_profile;
use sasaki_core::weighted::WeightedParams;

use crate::CliError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Command {
    Geom,
    Soliton,
    Flow,
    Tube,
    Sweep,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    #[serde(rename = "L")]
    pub half_width: f64,
    #[serde(rename = "N")]
    pub nodes: usize,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            half_width: 40.0,
            nodes: 2049,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FlowSettings {
    pub t_end: f64,
    pub sample_every: usize,
    pub defect_tolerance: f64,
    pub stop_on_convergence: bool,
    pub frame_gain: f64,
    pub max_steps: usize,
    pub dt: DtControl,
}

impl Default for FlowSettings {
    fn default() -> Self {
        let reference = FlowConfig::new(
            WeightedParams { a1: 1.0, a2: 2.0 },
            Grid::new(40.0, 2049).expect("default grid"),
            InitialData::Round,
        );
        Self {
            t_end: reference.t_end,
            sample_every: reference.sample_every,
            defect_tolerance: reference.defect_tolerance,
            stop_on_convergence: reference.stop_on_convergence,
            frame_gain: reference.frame_gain,
            max_steps: reference.max_steps,
            dt: reference.dt,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TubeSettings {
    pub base: TubeBase,
    /// Tube distances; when absent, `points` equally spaced defaults.
    pub t: Option<Vec<f64>>,
    pub points: usize,
    pub lattice: Option<[usize; 2]>,
    pub step: f64,
    /// Curvature bound for circle tubes; sampled when absent.
    pub lambda: Option<f64>,
    /// Points in the curvature sample (0 disables it).
    pub curvature_samples: usize,
}

impl Default for TubeSettings {
    fn default() -> Self {
        Self {
            base: TubeBase::Circle,
            t: None,
            points: 9,
            lattice: None,
            step: MAX_STEP,
            lambda: None,
            curvature_samples: 500,
        }
    }
}

fn default_init() -> InitialData {
    InitialData::Round
}

/// A parsed run. After [`parse_config`] every defaulted field is filled in,
/// so serializing it gives the resolved configuration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub command: Command,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a1: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a2: Option<f64>,
    #[serde(default)]
    pub grid: GridSpec,
    #[serde(default = "default_init")]
    pub init: InitialData,
    #[serde(default)]
    pub flow: FlowSettings,
    #[serde(default)]
    pub tube: TubeSettings,
    #[serde(default)]
    pub seed: u64,
    /// Sub-runs of a sweep.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub runs: Vec<RunConfig>,
}

fn invalid(field: &str, message: impl std::fmt::Display) -> CliError {
    CliError::Config(format!("{field}: {message}"))
}

/// Input errors from the core are attributed to `field`; numerical failures
/// pass through unchanged.
fn blame(field: &'static str) -> impl Fn(sasaki_core::Error) -> CliError {
    move |e| {
        if e.is_numerical() {
            CliError::Core(e)
        } else {
            invalid(field, e)
        }
    }
}

impl RunConfig {
    pub fn params(&self) -> Result<WeightedParams, CliError> {
        let a1 = self.a1.ok_or_else(|| invalid("a1", "missing"))?;
        let a2 = self.a2.ok_or_else(|| invalid("a2", "missing"))?;
        WeightedParams::new(a1, a2).map_err(|e| invalid("a1/a2", e))
    }

    pub fn ordered_params(&self) -> Result<WeightedParams, CliError> {
        let p = self.params()?;
        p.require_ordered().map_err(|e| invalid("a1/a2", e))?;
        Ok(p)
    }

    pub fn grid(&self) -> Result<Grid, CliError> {
        Grid::new(self.grid.half_width, self.grid.nodes).map_err(|e| invalid("grid", e))
    }

    pub fn flow_config(&self) -> Result<FlowConfig, CliError> {
        let mut cfg = FlowConfig::new(self.ordered_params()?, self.grid()?, self.init);
        let s = &self.flow;
        cfg.t_end = s.t_end;
        cfg.sample_every = s.sample_every;
        cfg.defect_tolerance = s.defect_tolerance;
        cfg.stop_on_convergence = s.stop_on_convergence;
        cfg.frame_gain = s.frame_gain;
        cfg.max_steps = s.max_steps;
        cfg.dt = s.dt;
        cfg.validate().map_err(|e| invalid("flow", e))?;
        Ok(cfg)
    }

    /// Checks module preconditions and fills in derived defaults.
    fn resolve(mut self, nested: bool) -> Result<Self, CliError> {
        if self.command != Command::Sweep && !self.runs.is_empty() {
            return Err(invalid("runs", "only a sweep may list runs"));
        }
        match self.command {
            Command::Geom => {
                sample_round(&self.ordered_params()?, &self.grid()?).map_err(blame("grid"))?;
            }
            Command::Soliton => {
                soliton_profile(&self.ordered_params()?, &self.grid()?).map_err(blame("grid"))?;
            }
            Command::Flow => {
                let cfg = self.flow_config()?;
                cfg.initial_profile().map_err(blame("init"))?;
            }
            Command::Tube => self.resolve_tube()?,
            Command::Sweep => {
                if nested {
                    return Err(invalid("runs", "sweeps cannot be nested"));
                }
                if self.runs.is_empty() {
                    return Err(invalid("runs", "a sweep needs at least one run"));
                }
                let runs = std::mem::take(&mut self.runs);
                self.runs = runs
                    .into_iter()
                    .enumerate()
                    .map(|(i, run)| {
                        run.resolve(true).map_err(|e| match e {
                            CliError::Config(m) => CliError::Config(format!("runs[{i}].{m}")),
                            other => other,
                        })
                    })
                    .collect::<Result<_, _>>()?;
            }
        }
        Ok(self)
    }

    fn resolve_tube(&mut self) -> Result<(), CliError> {
        let p = self.params()?;
        let tube = &mut self.tube;
        let limit = focal_limit(&p, &tube.base).map_err(|e| invalid("tube.base", e))?;
        if !(tube.step > 0.0 && tube.step <= MAX_STEP) {
            return Err(invalid("tube.step", format!("must lie in (0, {MAX_STEP}]")));
        }
        if let Some(lambda) = tube.lambda {
            if !(lambda.is_finite() && lambda > 0.0) {
                return Err(invalid("tube.lambda", "must be positive"));
            }
        }
        if tube.curvature_samples != 0
            && tube.curvature_samples < sasaki_core::ambient::curvature::MIN_SAMPLES
        {
            return Err(invalid(
                "tube.curvature_samples",
                format!(
                    "must be 0 or at least {}",
                    sasaki_core::ambient::curvature::MIN_SAMPLES
                ),
            ));
        }
        if tube.base == TubeBase::Circle && tube.lambda.is_none() && tube.curvature_samples == 0 {
            return Err(invalid(
                "tube.lambda",
                "circle tubes need a curvature bound or a curvature sample",
            ));
        }
        let lattice = tube.lattice.unwrap_or_else(|| tube.base.default_lattice());
        if lattice.iter().any(|&n| n < 8) {
            return Err(invalid("tube.lattice", "each size must be at least 8"));
        }
        tube.lattice = Some(lattice);
        let t = match tube.t.take() {
            Some(t) => t,
            None => default_t_grid(&p, &tube.base, tube.points)
                .map_err(|e| invalid("tube.points", e))?,
        };
        if t.is_empty() {
            return Err(invalid("tube.t", "no distances given"));
        }
        if let Some(bad) = t.iter().find(|t| !(**t > 0.0 && **t < limit)) {
            return Err(invalid(
                "tube.t",
                format!("distance {bad} outside (0, {limit})"),
            ));
        }
        tube.t = Some(t);
        Ok(())
    }
}

/// Parses and validates a JSON configuration.
pub fn parse_config(text: &str) -> Result<RunConfig, CliError> {
    let mut de = serde_json::Deserializer::from_str(text);
    let raw: RunConfig = serde_path_to_error::deserialize(&mut de).map_err(|e| {
        let path = e.path().to_string();
        if path == "." {
            CliError::Config(e.inner().to_string())
        } else {
            CliError::Config(format!("{path}: {}", e.inner()))
        }
    })?;
    de.end().map_err(|e| CliError::Config(e.to_string()))?;
    raw.resolve(false)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_document_gets_defaults() {
        let cfg = parse_config(r#"{"command":"geom","a1":1,"a2":2}"#).unwrap();
        assert_eq!(cfg.grid, GridSpec::default());
        assert_eq!(cfg.init, InitialData::Round);
        assert_eq!(cfg.seed, 0);
    }

    #[test]
    fn unknown_keys_are_named() {
        let err =
            parse_config(r#"{"command":"flow","a1":2,"a2":3,"flow":{"t_ned":1}}"#).unwrap_err();
        assert!(err.to_string().contains("flow.t_ned"), "{err}");
        let err = parse_config(r#"{"command":"geom","a1":1,"a2":2,"extra":0}"#).unwrap_err();
        assert!(err.to_string().contains("extra"), "{err}");
    }

    #[test]
    fn weight_order_is_checked() {
        let err = parse_config(r#"{"command":"flow","a1":3,"a2":2}"#).unwrap_err();
        assert!(err.to_string().contains("a1 < a2 required"), "{err}");
        assert_eq!(err.exit_code(), 3);
    }

    #[test]
    fn bump_is_checked_for_positive_curvature() {
        let ok =
            parse_config(r#"{"command":"flow","a1":2,"a2":3,"init":{"type":"bump","eps":0.3}}"#);
        assert!(ok.is_ok());
        let bad = parse_config(
            r#"{"command":"flow","a1":2,"a2":3,"init":{"type":"bump","eps":-0.99,"width":0.5}}"#,
        );
        assert!(bad.unwrap_err().to_string().starts_with("init"));
    }

    #[test]
    fn tube_defaults_are_resolved() {
        let cfg = parse_config(r#"{"command":"tube","a1":1,"a2":1,"tube":{"points":4}}"#).unwrap();
        assert_eq!(cfg.tube.t.as_ref().unwrap().len(), 4);
        assert_eq!(cfg.tube.lattice, Some([256, 64]));
        let err =
            parse_config(r#"{"command":"tube","a1":1,"a2":1,"tube":{"t":[2.0]}}"#).unwrap_err();
        assert!(err.to_string().starts_with("tube.t"), "{err}");
    }

    #[test]
    fn short_domains_are_blamed_on_the_grid() {
        let err = parse_config(r#"{"command":"soliton","a1":1,"a2":2,"grid":{"L":5,"N":65}}"#)
            .unwrap_err();
        assert!(err.to_string().starts_with("grid:"), "{err}");
        let err =
            parse_config(r#"{"command":"geom","a1":1,"a2":2,"grid":{"L":40,"N":64}}"#).unwrap_err();
        assert!(err.to_string().starts_with("grid:"), "{err}");
    }

    #[test]
    fn malformed_json_is_a_config_error() {
        let err = parse_config("{\"command\": ").unwrap_err();
        assert_eq!(err.exit_code(), 3);
    }

    #[test]
    fn sweep_errors_name_the_run() {
        let err = parse_config(r#"{"command":"sweep","runs":[{"command":"geom","a1":1,"a2":2},{"command":"geom","a1":2,"a2":1}]}"#)
            .unwrap_err();
        assert!(err.to_string().starts_with("runs[1].a1/a2"), "{err}");
    }
}
