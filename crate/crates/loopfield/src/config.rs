//! Experiment configuration files.
//!
//! A config is a TOML document with the sections `[experiment]`, `[group]`,
//! `[geometry]`, `[sweep]`, `[mc]`, `[output]`, `[tolerance]` and
//! `[override]`. Unknown keys are rejected and every value is validated
//! before any computation starts.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use loopfield_core::equation::CoefficientScales;
use loopfield_core::group::GroupSpec;
use loopfield_core::sweeps::{Combination, CrossingVariant};
use serde::Deserialize;

use crate::mc::{Algorithm, Schedule};
use crate::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExperimentKind {
    VerifyDiscrete,
    ConvergeSimple,
    ConvergeCrossing,
    ConvergeMerger,
    ConvergeUnified,
    GaussLemma,
    Degenerate,
    SampleDiagnostics,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 8] = [
        ExperimentKind::VerifyDiscrete,
        ExperimentKind::ConvergeSimple,
        ExperimentKind::ConvergeCrossing,
        ExperimentKind::ConvergeMerger,
        ExperimentKind::ConvergeUnified,
        ExperimentKind::GaussLemma,
        ExperimentKind::Degenerate,
        ExperimentKind::SampleDiagnostics,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::VerifyDiscrete => "verify-discrete",
            ExperimentKind::ConvergeSimple => "converge-simple",
            ExperimentKind::ConvergeCrossing => "converge-crossing",
            ExperimentKind::ConvergeMerger => "converge-merger",
            ExperimentKind::ConvergeUnified => "converge-unified",
            ExperimentKind::GaussLemma => "gauss-lemma",
            ExperimentKind::Degenerate => "degenerate",
            ExperimentKind::SampleDiagnostics => "sample-diagnostics",
        }
    }

    /// Runtime budget in seconds.
    pub fn default_runtime(self, suite: Suite) -> f64 {
        match (self, suite) {
            (ExperimentKind::VerifyDiscrete, Suite::LoopAlgebra) => 1.0,
            (ExperimentKind::VerifyDiscrete, _) => 60.0,
            (ExperimentKind::ConvergeSimple, _) => 60.0,
            (ExperimentKind::ConvergeCrossing, _) => 300.0,
            (ExperimentKind::ConvergeMerger, _) => 120.0,
            (ExperimentKind::GaussLemma, _) => 120.0,
            (ExperimentKind::Degenerate, _) => 30.0,
            (ExperimentKind::SampleDiagnostics, _) => 900.0,
            (ExperimentKind::ConvergeUnified, _) => 900.0,
        }
    }
}

impl FromStr for ExperimentKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self, Error> {
        Self::ALL
            .iter()
            .copied()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown experiment `{s}`")))
    }
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Which part of `verify-discrete` to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Suite {
    Equation,
    LoopAlgebra,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    experiment: RawExperiment,
    #[serde(default)]
    group: RawGroup,
    #[serde(default)]
    geometry: RawGeometry,
    #[serde(default)]
    sweep: RawSweep,
    #[serde(default)]
    mc: RawMc,
    #[serde(default)]
    output: RawOutput,
    #[serde(default)]
    tolerance: RawTolerance,
    #[serde(default, rename = "override")]
    overrides: BTreeMap<String, f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawExperiment {
    name: String,
    suite: Option<String>,
    seed: Option<u64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawGroup {
    names: Option<Vec<String>>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawGeometry {
    t: Option<f64>,
    areas: Option<Vec<f64>>,
    variants: Option<Vec<String>>,
    random_loops: Option<usize>,
    random_steps: Option<Vec<usize>>,
    triple: Option<usize>,
    combination_a: Option<Vec<f64>>,
    combination_b: Option<Vec<f64>>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSweep {
    epsilon: Option<Vec<f64>>,
    mc_epsilon: Option<Vec<f64>>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawMc {
    sweeps: Option<usize>,
    plaquette_sweeps: Option<usize>,
    burn_in: Option<usize>,
    thin: Option<usize>,
    chains: Option<usize>,
    hits: Option<usize>,
    algorithm: Option<String>,
    hot_start: Option<bool>,
    blocks: Option<usize>,
    scale: Option<f64>,
    trials: Option<usize>,
    sample_log: Option<String>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawOutput {
    csv: Option<String>,
    json: Option<String>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawTolerance {
    residual: Option<f64>,
    gap: Option<f64>,
    outer: Option<f64>,
    identity: Option<f64>,
    degenerate: Option<f64>,
    sigma: Option<f64>,
    pass_rate: Option<f64>,
    slope_min: Option<f64>,
    slope_max: Option<f64>,
    runtime: Option<f64>,
}

/// Tolerances; the defaults are the acceptance thresholds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    pub residual: f64,
    pub gap: f64,
    pub outer: f64,
    pub identity: f64,
    pub degenerate: f64,
    pub sigma: f64,
    pub pass_rate: f64,
    pub slope_min: f64,
    pub slope_max: f64,
    pub runtime: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    pub suite: Suite,
    pub seed: u64,
    pub groups: Vec<GroupSpec>,
    pub t: f64,
    pub areas: [f64; 4],
    pub variants: Vec<CrossingVariant>,
    pub random_loops: usize,
    pub random_steps: (usize, usize),
    pub triple: usize,
    pub combination: Combination,
    pub epsilon: Vec<f64>,
    pub mc_epsilon: Vec<f64>,
    pub schedule: Schedule,
    pub plaquette_sweeps: usize,
    pub trials: usize,
    pub sample_log: Option<PathBuf>,
    pub csv: Option<PathBuf>,
    pub json: Option<PathBuf>,
    pub tolerance: Tolerances,
    pub scales: CoefficientScales,
}

fn bad(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}

fn check_eps(list: &[f64], key: &str) -> Result<(), Error> {
    if list.is_empty() {
        return Err(bad(format!("{key} is empty")));
    }
    if let Some(e) = list.iter().find(|e| !(e.is_finite() && **e > 0.0 && **e <= 1.0)) {
        return Err(bad(format!("{key} entry {e} is not in (0, 1]")));
    }
    Ok(())
}

fn positive(v: f64, key: &str) -> Result<f64, Error> {
    if v.is_finite() && v > 0.0 {
        Ok(v)
    } else {
        Err(bad(format!("{key} must be positive, got {v}")))
    }
}

fn resolve(base: &Path, p: Option<String>) -> Option<PathBuf> {
    p.map(|s| {
        let p = PathBuf::from(s);
        if p.is_absolute() {
            p
        } else {
            base.join(p)
        }
    })
}

impl ExperimentConfig {
    /// Reads and validates a config file; relative output paths are taken
    /// from the file's directory.
    pub fn load(path: &Path) -> Result<Self, Error> {
        let text = std::fs::read_to_string(path).map_err(|e| bad(format!("{}: {e}", path.display())))?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::parse(&text, &base)
    }

    pub fn parse(text: &str, base: &Path) -> Result<Self, Error> {
        let raw: RawConfig = toml::from_str(text).map_err(|e| bad(e.to_string()))?;
        let experiment: ExperimentKind = raw.experiment.name.parse()?;
        let suite = match raw.experiment.suite.as_deref() {
            None | Some("equation") => Suite::Equation,
            Some("loop-algebra") => Suite::LoopAlgebra,
            Some(s) => return Err(bad(format!("unknown suite `{s}`"))),
        };
        if suite == Suite::LoopAlgebra && experiment != ExperimentKind::VerifyDiscrete {
            return Err(bad("suite applies to verify-discrete only"));
        }

        let default_groups: &[&str] = match experiment {
            ExperimentKind::ConvergeSimple => &["U(1)", "U(2)"],
            ExperimentKind::ConvergeUnified => &["SU(2)"],
            ExperimentKind::SampleDiagnostics => &["U(1)", "SU(2)", "SO(3)"],
            ExperimentKind::GaussLemma => &["U(2)"],
            _ => &["U(1)"],
        };
        let names: Vec<String> =
            raw.group.names.unwrap_or_else(|| default_groups.iter().map(|s| s.to_string()).collect());
        let groups = names
            .iter()
            .map(|n| GroupSpec::parse(n).map_err(|_| bad(format!("bad group `{n}`"))))
            .collect::<Result<Vec<_>, _>>()?;
        if groups.is_empty() {
            return Err(bad("group.names is empty"));
        }
        let exact_only = matches!(
            experiment,
            ExperimentKind::VerifyDiscrete
                | ExperimentKind::ConvergeCrossing
                | ExperimentKind::ConvergeMerger
                | ExperimentKind::Degenerate
        );
        if exact_only && groups.iter().any(|g| *g != GroupSpec::u1()) {
            return Err(bad(format!("{experiment} runs on the exact U(1) backend only")));
        }
        if experiment == ExperimentKind::ConvergeUnified
            && groups.iter().any(|g| g.family == loopfield_core::group::Family::U)
        {
            return Err(bad("converge-unified needs SU(N) or SO(N)"));
        }

        let g = raw.geometry;
        let t = positive(g.t.unwrap_or(1.0), "geometry.t")?;
        let default_areas = match experiment {
            ExperimentKind::ConvergeUnified | ExperimentKind::SampleDiagnostics => [0.25, 2.5, 0.25, 2.5],
            _ => [0.25, 1.5, 0.25, 1.5],
        };
        let areas = match g.areas {
            None => default_areas,
            Some(v) if v.len() == 4 => {
                for (i, a) in v.iter().enumerate() {
                    positive(*a, &format!("geometry.areas[{i}]"))?;
                }
                [v[0], v[1], v[2], v[3]]
            }
            Some(v) => return Err(bad(format!("geometry.areas needs 4 entries, got {}", v.len()))),
        };
        let variants = g
            .variants
            .unwrap_or_else(|| vec!["standard".into(), "reversed".into()])
            .iter()
            .map(|v| match v.as_str() {
                "standard" => Ok(CrossingVariant::Standard),
                "reversed" => Ok(CrossingVariant::Reversed),
                _ => Err(bad(format!("unknown variant `{v}`"))),
            })
            .collect::<Result<Vec<_>, _>>()?;
        let random_steps = match g.random_steps.as_deref() {
            None => (6, 24),
            Some([a, b]) if 2 <= *a && a <= b => (*a, *b),
            Some(v) => return Err(bad(format!("geometry.random_steps must be [min, max] with 2 <= min <= max, got {v:?}"))),
        };
        let combination = Combination {
            a: match g.combination_a.as_deref() {
                None => [0.2, 0.2, 0.1, 0.3, 0.2],
                Some(&[a0, a1, a2, a3, a4]) => [a0, a1, a2, a3, a4],
                Some(v) => return Err(bad(format!("geometry.combination_a needs 5 entries, got {}", v.len()))),
            },
            b: match g.combination_b.as_deref() {
                None => [0.7, 0.3],
                Some(&[b0, b1]) => [b0, b1],
                Some(v) => return Err(bad(format!("geometry.combination_b needs 2 entries, got {}", v.len()))),
            },
        };
        if !combination.is_normalized() {
            return Err(bad("combination weights must each sum to 1"));
        }

        let default_eps: &[f64] = match experiment {
            ExperimentKind::VerifyDiscrete => &[0.25, 0.125],
            ExperimentKind::GaussLemma => &[0.4, 0.28, 0.2, 0.14, 0.1],
            ExperimentKind::Degenerate => &[0.25, 0.125],
            ExperimentKind::ConvergeUnified => &[0.5],
            ExperimentKind::SampleDiagnostics => &[0.5, 1.0],
            _ => &[0.25, 0.125, 0.0625],
        };
        let epsilon = raw.sweep.epsilon.unwrap_or_else(|| default_eps.to_vec());
        check_eps(&epsilon, "sweep.epsilon")?;
        let mc_epsilon = raw.sweep.mc_epsilon.unwrap_or_else(|| vec![0.5]);
        check_eps(&mc_epsilon, "sweep.mc_epsilon")?;

        let m = raw.mc;
        let d = Schedule::default();
        let algorithm = match m.algorithm.as_deref() {
            None | Some("metropolis") => Algorithm::Metropolis,
            Some("heatbath") => Algorithm::HeatBath,
            Some(a) => return Err(bad(format!("unknown algorithm `{a}`"))),
        };
        let schedule = Schedule {
            sweeps: m.sweeps.unwrap_or(d.sweeps),
            burn_in: m.burn_in,
            thin: m.thin,
            chains: m.chains.unwrap_or(d.chains),
            hits: m.hits.unwrap_or(d.hits),
            algorithm,
            hot_start: m.hot_start.unwrap_or(d.hot_start),
            blocks: m.blocks.unwrap_or(d.blocks),
            initial_scale: positive(m.scale.unwrap_or(d.initial_scale), "mc.scale")?,
        };
        if schedule.sweeps == 0 || schedule.chains == 0 || schedule.hits == 0 || schedule.blocks < 2 {
            return Err(bad("mc.sweeps, mc.chains and mc.hits must be positive and mc.blocks at least 2"));
        }
        if schedule.thin == Some(0) {
            return Err(bad("mc.thin must be positive"));
        }
        if schedule.sweeps / schedule.thin.unwrap_or(1) < schedule.blocks {
            return Err(bad("mc.sweeps must give at least one measurement per block"));
        }
        if algorithm == Algorithm::HeatBath && groups.iter().any(|g| *g != GroupSpec::u1()) {
            return Err(bad("heat bath is implemented for U(1) only"));
        }

        let tr = raw.tolerance;
        let tolerance = Tolerances {
            residual: positive(tr.residual.unwrap_or(1e-9), "tolerance.residual")?,
            gap: positive(tr.gap.unwrap_or(1e-2), "tolerance.gap")?,
            outer: positive(tr.outer.unwrap_or(1e-12), "tolerance.outer")?,
            identity: positive(tr.identity.unwrap_or(1e-6), "tolerance.identity")?,
            degenerate: positive(tr.degenerate.unwrap_or(1e-8), "tolerance.degenerate")?,
            sigma: positive(tr.sigma.unwrap_or(3.0), "tolerance.sigma")?,
            pass_rate: positive(tr.pass_rate.unwrap_or(0.95), "tolerance.pass_rate")?,
            slope_min: tr.slope_min.unwrap_or(3.5),
            slope_max: tr.slope_max.unwrap_or(4.5),
            runtime: positive(tr.runtime.unwrap_or(experiment.default_runtime(suite)), "tolerance.runtime")?,
        };
        if tolerance.slope_min > tolerance.slope_max {
            return Err(bad("tolerance.slope_min exceeds tolerance.slope_max"));
        }

        let mut scales = CoefficientScales::default();
        for (k, v) in &raw.overrides {
            if !v.is_finite() {
                return Err(bad(format!("override.{k} is not finite")));
            }
            if !scales.set(k, *v) {
                return Err(bad(format!(
                    "unknown override `{k}`; expected one of {}",
                    CoefficientScales::NAMES.join(", ")
                )));
            }
        }
        if scales != CoefficientScales::default() && experiment != ExperimentKind::VerifyDiscrete {
            return Err(bad("coefficient overrides apply to verify-discrete only"));
        }

        Ok(ExperimentConfig {
            experiment,
            suite,
            seed: raw.experiment.seed.unwrap_or(20_240_601),
            groups,
            t,
            areas,
            variants,
            random_loops: g.random_loops.unwrap_or(50),
            random_steps,
            triple: g.triple.unwrap_or(0),
            combination,
            epsilon,
            mc_epsilon,
            schedule,
            plaquette_sweeps: m.plaquette_sweeps.unwrap_or(1_000_000),
            trials: m.trials.unwrap_or(20),
            sample_log: resolve(base, m.sample_log),
            csv: resolve(base, raw.output.csv),
            json: resolve(base, raw.output.json),
            tolerance,
            scales,
        })
    }

    /// Redirects every output file into `dir`, keeping file names.
    pub fn redirect_outputs(&mut self, dir: &Path) {
        for p in [&mut self.csv, &mut self.json, &mut self.sample_log].into_iter().flatten() {
            if let Some(name) = p.file_name() {
                *p = dir.join(name);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(s: &str) -> Result<ExperimentConfig, Error> {
        ExperimentConfig::parse(s, Path::new("."))
    }

    #[test]
    fn minimal_config_gets_defaults() {
        let c = parse("[experiment]\nname = \"converge-simple\"\n").unwrap();
        assert_eq!(c.experiment, ExperimentKind::ConvergeSimple);
        assert_eq!(c.epsilon, vec![0.25, 0.125, 0.0625]);
        assert_eq!(c.groups, vec![GroupSpec::u1(), GroupSpec::u(2)]);
        assert_eq!(c.tolerance.gap, 1e-2);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(parse("[experiment]\nname = \"degenerate\"\ncolour = 1\n").is_err());
        assert!(parse("[experiment]\nname = \"degenerate\"\n[sweep]\nepsilons = [0.5]\n").is_err());
        assert!(parse("[experiment]\nname = \"degenerate\"\n[extra]\n").is_err());
    }

    #[test]
    fn malformed_epsilon_is_a_config_error() {
        for bad in ["[0.25, \"x\"]", "[]", "[-0.5]", "[2.0]", "0.25"] {
            let text = format!("[experiment]\nname = \"converge-simple\"\n[sweep]\nepsilon = {bad}\n");
            let e = parse(&text).unwrap_err();
            assert_eq!(e.exit_code(), 2, "{bad}: {e}");
        }
    }

    #[test]
    fn overrides_are_checked() {
        let c = parse("[experiment]\nname = \"verify-discrete\"\n[override]\nsplit = 1.1\n").unwrap();
        assert_eq!(c.scales.split, 1.1);
        assert!(parse("[experiment]\nname = \"verify-discrete\"\n[override]\nsplitting = 1.1\n").is_err());
        assert!(parse("[experiment]\nname = \"converge-simple\"\n[override]\nsplit = 1.1\n").is_err());
    }

    #[test]
    fn exact_experiments_refuse_nonabelian_groups() {
        assert!(parse("[experiment]\nname = \"converge-crossing\"\n[group]\nnames = [\"SU(2)\"]\n").is_err());
        assert!(parse("[experiment]\nname = \"converge-unified\"\n[group]\nnames = [\"U(2)\"]\n").is_err());
    }
}
