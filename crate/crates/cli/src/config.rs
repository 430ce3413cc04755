//! Experiment config files (TOML).

use std::path::{Path, PathBuf};

use camegrad::toy::ProblemKind;
use camegrad::{CameGradConfig, Strategy};
use serde::Deserialize;

use crate::error::{CliError, Result};

pub const DEFAULT_OUTPUT_DIR: &str = "camegrad-out";
pub const OUTPUT_ENV: &str = "CAMEGRAD_OUTPUT";
pub const DEFAULT_MAX_RUNS: usize = 256;

/// One name or a list of names. `"ablation"` expands to the ablation grid.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum NameList {
    One(String),
    Many(Vec<String>),
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum SeedList {
    One(u64),
    Many(Vec<u64>),
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainSection {
    pub eta: Option<f64>,
    pub steps: Option<usize>,
    pub seed: Option<SeedList>,
    pub weights: Option<Vec<f64>>,
    pub trace_window: Option<usize>,
    #[serde(default)]
    pub include_inter_auxiliary: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    pub rho: Option<Vec<f64>>,
    pub kappa: Option<Vec<f64>>,
    pub nu: Option<Vec<f64>>,
    pub max_runs: Option<usize>,
}

/// Config file as written on disk.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub problem: String,
    pub strategy: Option<NameList>,
    #[serde(default)]
    pub came: CameGradConfig,
    #[serde(default)]
    pub train: TrainSection,
    pub sweep: Option<SweepSection>,
    pub output_dir: Option<PathBuf>,
}

/// Sweep axes after defaults are filled in from `[came]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Sweep {
    pub rho: Vec<f64>,
    pub kappa: Vec<f64>,
    pub nu: Vec<f64>,
    pub max_runs: usize,
}

/// A checked config with every default resolved.
#[derive(Debug, Clone, PartialEq)]
pub struct Experiment {
    pub problem: ProblemKind,
    pub strategies: Vec<Strategy>,
    pub came: CameGradConfig,
    pub eta: f64,
    pub steps: usize,
    pub seeds: Vec<u64>,
    pub weights: Option<Vec<f64>>,
    pub trace_window: usize,
    pub include_inter_auxiliary: bool,
    pub sweep: Option<Sweep>,
    pub output_dir: PathBuf,
}

/// Step size and step count used when `[train]` leaves them out.
pub fn problem_defaults(problem: ProblemKind) -> (f64, usize) {
    match problem {
        ProblemKind::Conflict | ProblemKind::SharpFlat => (0.01, 2000),
        ProblemKind::Quadratic => (0.1, 200),
        ProblemKind::Mlp => (0.05, 3000),
    }
}

fn invalid(msg: impl Into<String>) -> CliError {
    CliError::Invariant(msg.into())
}

pub fn parse_strategies(names: &NameList) -> Result<Vec<Strategy>> {
    let names: Vec<&str> = match names {
        NameList::One(s) => vec![s.as_str()],
        NameList::Many(v) => v.iter().map(String::as_str).collect(),
    };
    let mut out = Vec::new();
    for name in names {
        let expanded: Vec<Strategy> = if name == "ablation" {
            Strategy::ABLATION_GRID.to_vec()
        } else {
            vec![name.parse::<Strategy>()?]
        };
        for s in expanded {
            if !out.contains(&s) {
                out.push(s);
            }
        }
    }
    if out.is_empty() {
        return Err(invalid("strategy list is empty"));
    }
    Ok(out)
}

fn axis(name: &str, values: &Option<Vec<f64>>, fallback: f64) -> Result<Vec<f64>> {
    match values {
        None => Ok(vec![fallback]),
        Some(v) if v.is_empty() => Err(invalid(format!("sweep.{name} is present but empty"))),
        Some(v) => Ok(v.clone()),
    }
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| CliError::Parse(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::parse(&text).map_err(|e| match e {
            CliError::Parse(m) => CliError::Parse(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    /// Resolves names and defaults and checks every value.
    ///
    /// The output directory is, in order of precedence, `CAMEGRAD_OUTPUT`,
    /// `output_dir` from the file, then `camegrad-out`.
    pub fn resolve(&self) -> Result<Experiment> {
        let problem: ProblemKind = self.problem.parse()?;
        let strategies = match &self.strategy {
            Some(names) => parse_strategies(names)?,
            None => vec![Strategy::Full],
        };
        self.came.validate()?;
        let (eta0, steps0) = problem_defaults(problem);
        let eta = self.train.eta.unwrap_or(eta0);
        let steps = self.train.steps.unwrap_or(steps0);
        if !(eta.is_finite() && eta > 0.0) {
            return Err(invalid(format!("train.eta must be > 0, got {eta}")));
        }
        if steps == 0 {
            return Err(invalid("train.steps must be >= 1"));
        }
        let seeds = match &self.train.seed {
            None => vec![0],
            Some(SeedList::One(s)) => vec![*s],
            Some(SeedList::Many(v)) if v.is_empty() => {
                return Err(invalid("train.seed list is empty"))
            }
            Some(SeedList::Many(v)) => v.clone(),
        };
        let trace_window = self
            .train
            .trace_window
            .unwrap_or(camegrad::diagnostics::DEFAULT_TRACE_WINDOW);
        if trace_window < 2 {
            return Err(invalid("train.trace_window must be >= 2"));
        }

        let sweep = match &self.sweep {
            None => None,
            Some(s) => {
                let sweep = Sweep {
                    rho: axis("rho", &s.rho, self.came.rho)?,
                    kappa: axis("kappa", &s.kappa, self.came.kappa)?,
                    nu: axis("nu", &s.nu, self.came.nu)?,
                    max_runs: s.max_runs.unwrap_or(DEFAULT_MAX_RUNS),
                };
                for &rho in &sweep.rho {
                    for &kappa in &sweep.kappa {
                        for &nu in &sweep.nu {
                            CameGradConfig {
                                rho,
                                kappa,
                                nu,
                                ..self.came
                            }
                            .validate()?;
                        }
                    }
                }
                Some(sweep)
            }
        };

        let output_dir = std::env::var_os(OUTPUT_ENV)
            .map(PathBuf::from)
            .or_else(|| self.output_dir.clone())
            .unwrap_or_else(|| PathBuf::from(DEFAULT_OUTPUT_DIR));

        Ok(Experiment {
            problem,
            strategies,
            came: self.came,
            eta,
            steps,
            seeds,
            weights: self.train.weights.clone(),
            trace_window,
            include_inter_auxiliary: self.train.include_inter_auxiliary,
            sweep,
            output_dir,
        })
    }
}

impl Experiment {
    pub fn train_config(
        &self,
        strategy: Strategy,
        seed: u64,
        came: CameGradConfig,
    ) -> camegrad::toy::TrainConfig {
        let mut cfg =
            camegrad::toy::TrainConfig::new(self.problem, strategy, self.eta, self.steps, seed);
        cfg.came = came;
        cfg.weights = self.weights.clone();
        cfg.trace_window = self.trace_window;
        cfg.include_inter_auxiliary = self.include_inter_auxiliary;
        cfg
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config() {
        let c = ExperimentConfig::parse("problem = \"conflict\"").unwrap();
        let e = c.resolve().unwrap();
        assert_eq!(e.strategies, vec![Strategy::Full]);
        assert_eq!((e.eta, e.steps, e.seeds.clone()), (0.01, 2000, vec![0]));
        assert_eq!(e.came, CameGradConfig::default());
        assert!(e.sweep.is_none());
    }

    #[test]
    fn full_config() {
        let text = r#"
problem = "mlp"
strategy = ["linear", "ablation"]
output_dir = "out"

[came]
rho = 0.3
kappa = 2.0
nu = 0.5
epsilon = 1e-9
sgld_sigma = 0.0

[train]
eta = 0.02
steps = 10
seed = [1, 2]

[sweep]
nu = [0.1, 0.9]
max_runs = 4
"#;
        let e = ExperimentConfig::parse(text).unwrap().resolve().unwrap();
        assert_eq!(e.problem, ProblemKind::Mlp);
        assert_eq!(e.strategies, Strategy::ABLATION_GRID.to_vec());
        assert_eq!(e.came.rho, 0.3);
        assert_eq!(e.seeds, vec![1, 2]);
        let s = e.sweep.unwrap();
        assert_eq!(
            (s.rho, s.kappa, s.nu, s.max_runs),
            (vec![0.3], vec![2.0], vec![0.1, 0.9], 4)
        );
    }

    #[test]
    fn rejections() {
        let parse = |t: &str| ExperimentConfig::parse(t);
        assert!(matches!(parse("problem = "), Err(CliError::Parse(_))));
        assert!(matches!(
            parse("problem = \"conflict\"\nbogus = 1"),
            Err(CliError::Parse(_))
        ));
        let resolve = |t: &str| parse(t).unwrap().resolve();
        assert!(matches!(
            resolve("problem = \"nope\""),
            Err(CliError::Invariant(_))
        ));
        assert!(matches!(
            resolve("problem = \"conflict\"\nstrategy = \"nope\""),
            Err(CliError::Invariant(_))
        ));
        assert!(matches!(
            resolve("problem = \"conflict\"\n[sweep]\nrho = []"),
            Err(CliError::Invariant(_))
        ));
        assert!(matches!(
            resolve("problem = \"conflict\"\n[sweep]\nrho = [1.5]"),
            Err(CliError::Invariant(_))
        ));
        assert!(matches!(
            resolve("problem = \"conflict\"\n[came]\nkappa = 0.5"),
            Err(CliError::Invariant(_))
        ));
        assert!(matches!(
            resolve("problem = \"conflict\"\n[train]\nseed = []"),
            Err(CliError::Invariant(_))
        ));
    }
}
