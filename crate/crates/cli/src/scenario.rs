//! Scenario files: schema, parsing and validation into runnable jobs.
//!
//! A scenario is one JSON object. Unknown keys are rejected everywhere and
//! every parameter is checked against the preconditions of the solver it is
//! dispatched to before anything runs.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;
use treesir_core::continuum::{ContinuousModelSpec, LatentHistory};
use treesir_core::discrete::DiscreteModelSpec;
use treesir_core::ratekit::RateKind;
use treesir_core::simulator::TruncationConfig;
use treesir_core::{RateFunction, RecoveryDistribution, TimeGrid};

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("cannot read {path}: {err}")]
    Io { path: PathBuf, err: std::io::Error },
    #[error("{path}: {err}")]
    Parse {
        path: PathBuf,
        err: serde_json::Error,
    },
    #[error("mode `{mode}` needs `{field}`")]
    Missing { mode: Mode, field: &'static str },
    #[error("solver `{solver}` is not available in mode `{mode}`")]
    SolverMode { solver: Solver, mode: Mode },
    #[error("solver `{solver}`: {reason}")]
    Unsupported { solver: String, reason: String },
    #[error(transparent)]
    Model(#[from] treesir_core::Error),
}

pub type Result<T> = std::result::Result<T, ScenarioError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    DiscreteSolve,
    Simulate,
    MasterSolve,
    KernelSolve,
    Converge,
    Stationary,
    Compare,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Solver {
    Volterra,
    ClosedForm,
    BernoulliOde,
    Dde,
    ExpRecoveryOde,
    Master,
    ClassicSir,
    ClassicMasterForm,
    LatentDde,
    DeterministicRecoveryDde,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Target {
    /// `P(τ > t)` for the centre of the tree.
    #[default]
    TimeToInfection,
    /// `S_{t,n}`: the same with per-edge rate `ε/(n+1)`.
    ExpectedSusceptible,
    /// Infection time of the root of a rooted tree (root degree `n`).
    RootInfection,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Limit {
    /// Master equation with per-edge rate `ε/(n+1)`.
    #[default]
    Master,
    /// Logistic curve with per-edge rate `c/n`, `c` the constant `eps`.
    Logistic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum History {
    #[default]
    Zero,
    Initial,
}

macro_rules! display_kebab {
    ($($t:ty),*) => {$(
        impl std::fmt::Display for $t {
            fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
                let v = serde_json::to_value(self).map_err(|_| std::fmt::Error)?;
                f.write_str(v.as_str().unwrap_or_default())
            }
        }
    )*};
}
display_kebab!(Mode, Solver, Target, Limit);

fn is_zero_rate(r: &RateFunction) -> bool {
    matches!(r.kind(), RateKind::Constant { value } if *value == 0.0)
}

fn is_never(r: &RecoveryDistribution) -> bool {
    matches!(r, RecoveryDistribution::Never)
}

fn is_default<T: Default + PartialEq>(v: &T) -> bool {
    *v == T::default()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    /// Tree degree is `n + 1`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<u32>,
    #[serde(default)]
    pub p: f64,
    pub eps: RateFunction,
    #[serde(default = "RateFunction::zero")]
    pub lambda: RateFunction,
    #[serde(default)]
    pub recovery: RecoveryDistribution,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub s0: Option<f64>,
    /// History convention of the latent delay equation.
    #[serde(default, skip_serializing_if = "is_default")]
    pub latent_history: History,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationConfig {
    pub replicas: u64,
    pub seed: u64,
    pub depth: u32,
    #[serde(default)]
    pub target: Target,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    /// Directory for `<name>.csv` and `<name>.json`; relative paths are
    /// taken from the working directory.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dir: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    pub mode: Mode,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub solver: Option<Solver>,
    pub model: ModelConfig,
    pub grid: TimeGrid,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub simulation: Option<SimulationConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_list: Option<Vec<u32>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub limit: Option<Limit>,
    #[serde(default, skip_serializing_if = "is_default")]
    pub output: OutputConfig,
}

/// A validated unit of work.
#[derive(Debug, Clone)]
pub enum Job {
    Volterra(DiscreteModelSpec),
    ClosedForm {
        n: u32,
        eps: f64,
        lambda: f64,
    },
    BernoulliOde {
        n: u32,
        eps: f64,
        lambda: f64,
    },
    Dde {
        n: u32,
        eps: f64,
        lambda: f64,
        duration: f64,
    },
    ExpRecoveryOde {
        n: u32,
        eps: f64,
        lambda: f64,
        mu: f64,
    },
    Simulate {
        spec: DiscreteModelSpec,
        sim: SimJob,
        compare: bool,
    },
    Master(ContinuousModelSpec),
    ClassicSir {
        eps: f64,
        mu: f64,
        s0: f64,
    },
    ClassicMasterForm {
        eps: f64,
        mu: f64,
        s0: f64,
    },
    LatentDde {
        eps: f64,
        latency: f64,
        s0: f64,
        history: LatentHistory,
    },
    DeterministicRecoveryDde {
        eps: f64,
        duration: f64,
        s0: f64,
    },
    Kernel(ContinuousModelSpec),
    ConvergeMaster {
        eps: RateFunction,
        lambda: RateFunction,
        recovery: RecoveryDistribution,
        p: f64,
        n_list: Vec<u32>,
    },
    ConvergeLogistic {
        c: f64,
        lambda: f64,
        n_list: Vec<u32>,
    },
    Stationary(ContinuousModelSpec),
}

#[derive(Debug, Clone)]
pub struct SimJob {
    pub trunc: TruncationConfig,
    pub replicas: u64,
    pub seed: u64,
    pub target: Target,
}

impl Scenario {
    pub fn from_json(text: &str, path: &Path) -> Result<Self> {
        serde_json::from_str(text).map_err(|err| ScenarioError::Parse {
            path: path.to_path_buf(),
            err,
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|err| ScenarioError::Io {
            path: path.to_path_buf(),
            err,
        })?;
        Self::from_json(&text, path)
    }

    /// Compact canonical JSON of the resolved scenario.
    pub fn canonical_json(&self) -> String {
        serde_json::to_string(self).expect("scenario serializes")
    }

    /// The scenario as recorded in output headers: everything except where
    /// the outputs were written.
    pub fn provenance(&self) -> Scenario {
        Scenario {
            output: OutputConfig::default(),
            ..self.clone()
        }
    }

    fn solver_or(&self, default: Solver) -> Solver {
        self.solver.unwrap_or(default)
    }

    fn require_n(&self) -> Result<u32> {
        self.model.n.ok_or(ScenarioError::Missing {
            mode: self.mode,
            field: "model.n",
        })
    }

    fn require_s0(&self) -> Result<f64> {
        self.model.s0.ok_or(ScenarioError::Missing {
            mode: self.mode,
            field: "model.s0",
        })
    }

    fn discrete_spec(&self) -> Result<DiscreteModelSpec> {
        let m = &self.model;
        let spec = DiscreteModelSpec::new(
            self.require_n()?,
            m.p,
            m.eps.clone(),
            m.lambda.clone(),
            m.recovery.clone(),
        )?;
        Ok(spec)
    }

    fn continuous_spec(&self) -> Result<ContinuousModelSpec> {
        let m = &self.model;
        let spec = ContinuousModelSpec::new(
            m.eps.clone(),
            m.recovery.clone(),
            m.lambda.clone(),
            self.require_s0()?,
        )?;
        Ok(spec)
    }

    fn unsupported(&self, solver: Solver, reason: &str) -> ScenarioError {
        ScenarioError::Unsupported {
            solver: solver.to_string(),
            reason: reason.to_string(),
        }
    }

    fn constant_eps(&self, solver: Solver) -> Result<f64> {
        self.model
            .eps
            .as_constant()
            .ok_or_else(|| self.unsupported(solver, "needs a constant `eps`"))
    }

    fn constant_lambda(&self, solver: Solver) -> Result<f64> {
        self.model
            .lambda
            .as_constant()
            .ok_or_else(|| self.unsupported(solver, "needs a constant `lambda`"))
    }

    fn require_p_zero(&self, solver: Solver) -> Result<()> {
        if self.model.p != 0.0 {
            return Err(self.unsupported(solver, "is stated for p = 0 only"));
        }
        Ok(())
    }

    fn require_no_self_infection(&self, solver: Solver) -> Result<()> {
        if !is_zero_rate(&self.model.lambda) {
            return Err(self.unsupported(solver, "has no self-infection term; set `lambda` to 0"));
        }
        Ok(())
    }

    /// Validates every precondition and returns the job to run.
    pub fn prepare(&self) -> Result<Job> {
        let grid = &self.grid;
        let wrong_mode = |solver| ScenarioError::SolverMode {
            solver,
            mode: self.mode,
        };
        match self.mode {
            Mode::DiscreteSolve => {
                let spec = self.discrete_spec()?;
                let solver = self.solver_or(Solver::Volterra);
                let n = spec.n();
                match solver {
                    Solver::Volterra => {
                        spec.check_alignment(grid)?;
                        Ok(Job::Volterra(spec))
                    }
                    Solver::ClosedForm | Solver::BernoulliOde => {
                        self.require_p_zero(solver)?;
                        if !is_never(&self.model.recovery) {
                            return Err(self.unsupported(solver, "assumes no recovery"));
                        }
                        let (eps, lambda) =
                            (self.constant_eps(solver)?, self.constant_lambda(solver)?);
                        if solver == Solver::ClosedForm {
                            if !(eps > 0.0 && lambda > 0.0) {
                                return Err(
                                    self.unsupported(solver, "needs eps > 0 and lambda > 0")
                                );
                            }
                            Ok(Job::ClosedForm { n, eps, lambda })
                        } else {
                            Ok(Job::BernoulliOde { n, eps, lambda })
                        }
                    }
                    Solver::Dde => {
                        self.require_p_zero(solver)?;
                        let RecoveryDistribution::Deterministic { duration } = self.model.recovery
                        else {
                            return Err(self.unsupported(solver, "needs deterministic recovery"));
                        };
                        if duration <= grid.horizon() {
                            grid.require_node("recovery time", duration)?;
                        }
                        Ok(Job::Dde {
                            n,
                            eps: self.constant_eps(solver)?,
                            lambda: self.constant_lambda(solver)?,
                            duration,
                        })
                    }
                    Solver::ExpRecoveryOde => {
                        self.require_p_zero(solver)?;
                        let RecoveryDistribution::Exponential { rate } = self.model.recovery else {
                            return Err(self.unsupported(solver, "needs exponential recovery"));
                        };
                        Ok(Job::ExpRecoveryOde {
                            n,
                            eps: self.constant_eps(solver)?,
                            lambda: self.constant_lambda(solver)?,
                            mu: rate,
                        })
                    }
                    other => Err(wrong_mode(other)),
                }
            }
            Mode::Simulate | Mode::Compare => {
                if let Some(s) = self.solver {
                    return Err(wrong_mode(s));
                }
                let spec = self.discrete_spec()?;
                let sim = self.simulation.as_ref().ok_or(ScenarioError::Missing {
                    mode: self.mode,
                    field: "simulation",
                })?;
                if sim.replicas < 1 {
                    return Err(treesir_core::Error::InvalidParameter {
                        name: "replicas",
                        reason: "need at least one replica".into(),
                    }
                    .into());
                }
                let compare = self.mode == Mode::Compare;
                if compare {
                    spec.check_alignment(grid)?;
                }
                Ok(Job::Simulate {
                    spec,
                    sim: SimJob {
                        trunc: TruncationConfig::new(sim.depth)?,
                        replicas: sim.replicas,
                        seed: sim.seed,
                        target: sim.target,
                    },
                    compare,
                })
            }
            Mode::MasterSolve => {
                let solver = self.solver_or(Solver::Master);
                let spec = self.continuous_spec()?;
                let s0 = spec.s0();
                match solver {
                    Solver::Master => {
                        spec.check_alignment(grid)?;
                        Ok(Job::Master(spec))
                    }
                    Solver::ClassicSir | Solver::ClassicMasterForm => {
                        self.require_no_self_infection(solver)?;
                        let mu = match self.model.recovery {
                            RecoveryDistribution::Exponential { rate } => rate,
                            RecoveryDistribution::Never => 0.0,
                            _ => return Err(self.unsupported(solver, "needs exponential recovery")),
                        };
                        let eps = self.constant_eps(solver)?;
                        if solver == Solver::ClassicSir {
                            Ok(Job::ClassicSir { eps, mu, s0 })
                        } else {
                            Ok(Job::ClassicMasterForm { eps, mu, s0 })
                        }
                    }
                    Solver::LatentDde => {
                        self.require_no_self_infection(solver)?;
                        if !is_never(&self.model.recovery) {
                            return Err(self.unsupported(solver, "assumes no recovery"));
                        }
                        let (eps, latency) = match self.model.eps.kind() {
                            RateKind::Latent { level, latency } => (*level, *latency),
                            RateKind::Constant { value } => (*value, 0.0),
                            _ => {
                                return Err(
                                    self.unsupported(solver, "needs a latent or constant `eps`")
                                )
                            }
                        };
                        if latency > 0.0 && latency <= grid.horizon() {
                            grid.require_node("latency", latency)?;
                        }
                        let history = match self.model.latent_history {
                            History::Zero => LatentHistory::Zero,
                            History::Initial => LatentHistory::Initial,
                        };
                        Ok(Job::LatentDde {
                            eps,
                            latency,
                            s0,
                            history,
                        })
                    }
                    Solver::DeterministicRecoveryDde => {
                        self.require_no_self_infection(solver)?;
                        let RecoveryDistribution::Deterministic { duration } = self.model.recovery
                        else {
                            return Err(self.unsupported(solver, "needs deterministic recovery"));
                        };
                        if duration <= grid.horizon() {
                            grid.require_node("recovery time", duration)?;
                        }
                        Ok(Job::DeterministicRecoveryDde {
                            eps: self.constant_eps(solver)?,
                            duration,
                            s0,
                        })
                    }
                    other => Err(wrong_mode(other)),
                }
            }
            Mode::KernelSolve => {
                if let Some(s) = self.solver {
                    return Err(wrong_mode(s));
                }
                let spec = self.continuous_spec()?;
                treesir_core::kernelform::system_kernels(&spec)?;
                spec.check_alignment(grid)?;
                Ok(Job::Kernel(spec))
            }
            Mode::Converge => {
                if let Some(s) = self.solver {
                    return Err(wrong_mode(s));
                }
                let n_list = self.n_list.clone().ok_or(ScenarioError::Missing {
                    mode: self.mode,
                    field: "n_list",
                })?;
                match self.limit.unwrap_or_default() {
                    Limit::Master => {
                        let m = &self.model;
                        // validates p and the grid alignment of every solve
                        let spec = DiscreteModelSpec::new(
                            1,
                            m.p,
                            m.eps.clone(),
                            m.lambda.clone(),
                            m.recovery.clone(),
                        )?;
                        spec.check_alignment(grid)?;
                        Ok(Job::ConvergeMaster {
                            eps: m.eps.clone(),
                            lambda: m.lambda.clone(),
                            recovery: m.recovery.clone(),
                            p: m.p,
                            n_list,
                        })
                    }
                    Limit::Logistic => {
                        let c = self
                            .model
                            .eps
                            .as_constant()
                            .filter(|c| *c > 0.0)
                            .ok_or_else(|| ScenarioError::Unsupported {
                                solver: "logistic limit".into(),
                                reason: "needs a positive constant `eps` (the limit c)".into(),
                            })?;
                        let lambda = self
                            .model
                            .lambda
                            .as_constant()
                            .filter(|l| *l > 0.0)
                            .ok_or_else(|| ScenarioError::Unsupported {
                                solver: "logistic limit".into(),
                                reason: "needs a positive constant `lambda`".into(),
                            })?;
                        if self.model.p != 0.0 || !is_never(&self.model.recovery) {
                            return Err(ScenarioError::Unsupported {
                                solver: "logistic limit".into(),
                                reason: "assumes p = 0 and no recovery".into(),
                            });
                        }
                        Ok(Job::ConvergeLogistic { c, lambda, n_list })
                    }
                }
            }
            Mode::Stationary => {
                if let Some(s) = self.solver {
                    return Err(wrong_mode(s));
                }
                let spec = self.continuous_spec()?;
                spec.check_alignment(grid)?;
                Ok(Job::Stationary(spec))
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<Scenario> {
        Scenario::from_json(text, Path::new("test.json"))
    }

    const BASIC: &str = r#"{
        "name": "basic",
        "mode": "discrete-solve",
        "model": {"n": 4, "eps": {"kind": "constant", "value": 1.0},
                  "lambda": {"kind": "constant", "value": 0.5}},
        "grid": {"horizon": 1.0, "step": 0.01}
    }"#;

    #[test]
    fn parses_with_defaults() {
        let s = parse(BASIC).unwrap();
        assert_eq!(s.model.p, 0.0);
        assert_eq!(s.model.recovery, RecoveryDistribution::Never);
        assert!(matches!(s.prepare().unwrap(), Job::Volterra(_)));
    }

    #[test]
    fn canonical_form_round_trips() {
        let s = parse(BASIC).unwrap();
        let again = parse(&s.canonical_json()).unwrap();
        assert_eq!(s, again);
        assert_eq!(s.canonical_json(), again.canonical_json());
    }

    #[test]
    fn unknown_keys_are_rejected_with_position() {
        let text = BASIC.replace("\"n\": 4", "\"n\": 4, \"bogus\": 1");
        let err = parse(&text).unwrap_err().to_string();
        assert!(err.contains("bogus") && err.contains("line"), "{err}");
    }

    #[test]
    fn p_one_is_rejected() {
        let text = BASIC.replace("\"n\": 4", "\"n\": 4, \"p\": 1.0");
        let err = parse(&text).unwrap().prepare().unwrap_err().to_string();
        assert!(err.contains("[0, 1)"), "{err}");
    }

    #[test]
    fn misaligned_recovery_is_rejected() {
        let text = BASIC
            .replace(
                "\"n\": 4",
                "\"n\": 4, \"recovery\": {\"kind\": \"deterministic\", \"duration\": 0.255}",
            )
            .replace(
                "\"discrete-solve\"",
                "\"discrete-solve\", \"solver\": \"dde\"",
            );
        let err = parse(&text).unwrap().prepare().unwrap_err();
        assert!(
            matches!(
                err,
                ScenarioError::Model(treesir_core::Error::GridAlignment { .. })
            ),
            "{err}"
        );
    }

    #[test]
    fn solver_must_fit_mode() {
        let text = BASIC.replace(
            "\"discrete-solve\"",
            "\"discrete-solve\", \"solver\": \"classic-sir\"",
        );
        assert!(matches!(
            parse(&text).unwrap().prepare(),
            Err(ScenarioError::SolverMode { .. })
        ));
        let missing = BASIC.replace("\"discrete-solve\"", "\"simulate\"");
        assert!(matches!(
            parse(&missing).unwrap().prepare(),
            Err(ScenarioError::Missing { .. })
        ));
    }
}
