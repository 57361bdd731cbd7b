//! Dispatch of validated jobs to the solvers and assembly of outputs.

use std::path::{Path, PathBuf};

use serde_json::json;
use thiserror::Error;
use treesir_core::continuum::{self, ContinuousModelSpec};
use treesir_core::discrete::{self, DiscreteModelSpec};
use treesir_core::grid::max_abs_diff;
use treesir_core::kernelform;
use treesir_core::simulator::{self, SimulationResult};
use treesir_core::{TimeGrid, Trajectory};

use crate::output::{trajectory_csv, Metrics, Report};
use crate::scenario::{Job, Scenario, ScenarioError, SimJob, Target};

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error("{0}")]
    Model(#[from] treesir_core::Error),
    #[error("`--seed` given but the scenario has no simulation block")]
    SeedWithoutSimulation,
    #[error("cannot write {path}: {err}")]
    Write { path: PathBuf, err: std::io::Error },
}

pub type Result<T> = std::result::Result<T, RunError>;

/// Command-line overrides of scenario fields.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub out_dir: Option<PathBuf>,
}

impl Overrides {
    pub fn apply(&self, scenario: &mut Scenario) -> Result<()> {
        if let Some(seed) = self.seed {
            match scenario.simulation.as_mut() {
                Some(sim) => sim.seed = seed,
                None => return Err(RunError::SeedWithoutSimulation),
            }
        }
        if let Some(dir) = &self.out_dir {
            scenario.output.dir = Some(dir.clone());
        }
        Ok(())
    }
}

/// CSV and report text of one run.
#[derive(Debug, Clone, PartialEq)]
pub struct Artifacts {
    pub csv: String,
    pub report: String,
    pub pass: bool,
}

/// Paths written by [`run_file`].
#[derive(Debug, Clone)]
pub struct Written {
    pub csv: PathBuf,
    pub report: PathBuf,
    pub pass: bool,
}

fn finish(
    scenario: &Scenario,
    traj: &Trajectory,
    metrics: Metrics,
    pass: bool,
    details: serde_json::Value,
) -> Artifacts {
    Artifacts {
        csv: trajectory_csv(scenario, traj),
        report: Report::new(scenario, metrics, pass, details).to_json(),
        pass,
    }
}

/// `s` with `P(τ > t) = e^{-λt} s^{n+1}` for the constant-rate oracles.
fn with_constant_rate_survival(traj: Trajectory, n: u32, lambda: f64) -> Trajectory {
    let survival = traj
        .grid()
        .times()
        .zip(traj.values("s"))
        .map(|(t, s)| (-lambda * t).exp() * s.powi(n as i32 + 1))
        .collect();
    traj.with_series("survival", survival)
}

fn simulation_series(result: &SimulationResult) -> Trajectory {
    Trajectory::new(result.grid)
        .with_series("survival_lo", result.survival_lo.clone())
        .with_series("survival_hi", result.survival_hi.clone())
        .with_series("stderr", result.stderr.clone())
}

fn run_simulation(
    scenario: &Scenario,
    spec: &DiscreteModelSpec,
    sim: &SimJob,
    compare: bool,
) -> Result<Artifacts> {
    let grid = &scenario.grid;
    let (result, reference_spec, power) = match sim.target {
        Target::TimeToInfection => (
            simulator::simulate_time_to_infection(spec, &sim.trunc, grid, sim.replicas, sim.seed)?,
            spec.clone(),
            spec.n() + 1,
        ),
        Target::ExpectedSusceptible => (
            simulator::estimate_expected_susceptible(
                spec,
                &sim.trunc,
                grid,
                sim.replicas,
                sim.seed,
            )?,
            spec.with_scaled_eps()?,
            spec.n() + 1,
        ),
        Target::RootInfection => (
            simulator::simulate_root_infection(spec, &sim.trunc, grid, sim.replicas, sim.seed)?,
            spec.clone(),
            spec.n(),
        ),
    };
    let mut traj = simulation_series(&result);
    let bracket_width = result
        .survival_hi
        .iter()
        .zip(&result.survival_lo)
        .map(|(h, l)| h - l)
        .fold(0.0, f64::max);
    let mut details = json!({
        "replicas": sim.replicas,
        "seed": sim.seed,
        "depth": sim.trunc.depth(),
        "target": sim.target,
    });
    if !compare {
        let ordered = result
            .survival_lo
            .iter()
            .zip(&result.survival_hi)
            .all(|(l, h)| l <= h);
        let metrics = Metrics {
            bracket_width: Some(bracket_width),
            ..Metrics::default()
        };
        return Ok(finish(scenario, &traj, metrics, ordered, details));
    }
    let reference = simulator::reference_survival(&reference_spec, grid, power)?;
    let cmp = result.compare(&reference);
    let z = result.z_scores(&reference);
    let mid_diff = reference
        .iter()
        .zip(result.survival_lo.iter().zip(&result.survival_hi))
        .map(|(r, (l, h))| (r - 0.5 * (l + h)).abs())
        .fold(0.0, f64::max);
    traj.push("reference", reference);
    traj.push("z", z);
    details["width_in_se"] = json!(cmp.width_in_se);
    details["bracket_below_2se"] = json!(cmp.tight);
    let metrics = Metrics {
        max_abs_diff: Some(mid_diff),
        z_max: Some(cmp.z_max),
        bracket_width: Some(cmp.bracket_width),
        orders: None,
    };
    Ok(finish(scenario, &traj, metrics, cmp.inside, details))
}

fn conservation_error(traj: &Trajectory) -> f64 {
    let (s, i, r) = (traj.values("S"), traj.values("I"), traj.values("R"));
    (0..s.len())
        .map(|k| (s[k] + i[k] + r[k] - 1.0).abs())
        .fold(0.0, f64::max)
}

fn compartments_report(scenario: &Scenario, traj: &Trajectory) -> Artifacts {
    let err = conservation_error(traj);
    let pass = err <= continuum::CONSERVATION_TOL;
    finish(
        scenario,
        traj,
        Metrics::default(),
        pass,
        json!({ "conservation_error": err }),
    )
}

fn kernel_run(
    scenario: &Scenario,
    spec: &ContinuousModelSpec,
    grid: &TimeGrid,
) -> Result<Artifacts> {
    let (infection, recovery) = kernelform::system_kernels(spec)?;
    let traj = kernelform::solve_kernel_system(spec, grid)?;
    let convolution = continuum::solve_compartments(spec, grid)?;
    let diff = ["S", "I", "R"]
        .iter()
        .map(|name| max_abs_diff(traj.values(name), convolution.values(name)))
        .fold(0.0, f64::max);
    let details = json!({
        "infection_kernel": { "atom": infection.atom, "provenance": infection.provenance },
        "recovery_kernel": { "atom": recovery.atom, "provenance": recovery.provenance },
        "conservation_error": conservation_error(&traj),
        "tolerance": KERNEL_TOLERANCE,
    });
    let metrics = Metrics {
        max_abs_diff: Some(diff),
        ..Metrics::default()
    };
    Ok(finish(
        scenario,
        &traj,
        metrics,
        diff <= KERNEL_TOLERANCE,
        details,
    ))
}

/// Agreement required between the kernel and convolution forms.
pub const KERNEL_TOLERANCE: f64 = 1e-6;

/// Residual required of the stationary root.
pub const STATIONARY_TOLERANCE: f64 = 1e-10;

fn execute_job(scenario: &Scenario, job: &Job) -> Result<Artifacts> {
    let grid = &scenario.grid;
    let plain = |traj: Trajectory| finish(scenario, &traj, Metrics::default(), true, json!({}));
    Ok(match job {
        Job::Volterra(spec) => {
            let sol = discrete::solve_s_detailed(spec, grid)?;
            let survival = discrete::survival_from_s(spec, grid, &sol.s);
            let traj = Trajectory::new(*grid)
                .with_series("s", sol.s)
                .with_series("survival", survival);
            let details = json!({
                "clamped_nodes": sol.clamped_nodes,
                "max_fixed_point_iterations": sol.max_iterations,
            });
            finish(scenario, &traj, Metrics::default(), true, details)
        }
        Job::ClosedForm { n, eps, lambda } => {
            plain(discrete::closed_form_no_recovery(*n, *eps, *lambda, grid)?)
        }
        Job::BernoulliOde { n, eps, lambda } => plain(with_constant_rate_survival(
            discrete::bernoulli_ode_solve(*n, *eps, *lambda, grid)?,
            *n,
            *lambda,
        )),
        Job::Dde {
            n,
            eps,
            lambda,
            duration,
        } => plain(with_constant_rate_survival(
            discrete::deterministic_recovery_dde_solve(*n, *eps, *lambda, *duration, grid)?,
            *n,
            *lambda,
        )),
        Job::ExpRecoveryOde { n, eps, lambda, mu } => plain(with_constant_rate_survival(
            discrete::exponential_recovery_ode_solve(*n, *eps, *lambda, *mu, grid)?,
            *n,
            *lambda,
        )),
        Job::Simulate { spec, sim, compare } => run_simulation(scenario, spec, sim, *compare)?,
        Job::Master(spec) => {
            compartments_report(scenario, &continuum::solve_compartments(spec, grid)?)
        }
        Job::ClassicSir { eps, mu, s0 } => compartments_report(
            scenario,
            &continuum::classic_sir_oracle(*eps, *mu, *s0, 1.0 - s0, grid)?,
        ),
        Job::ClassicMasterForm { eps, mu, s0 } => {
            plain(continuum::classic_master_form(*s0, *eps, *mu, grid)?)
        }
        Job::LatentDde {
            eps,
            latency,
            s0,
            history,
        } => plain(continuum::latent_model_solve(
            *eps, *latency, *s0, grid, *history,
        )?),
        Job::DeterministicRecoveryDde { eps, duration, s0 } => compartments_report(
            scenario,
            &continuum::deterministic_recovery_continuum_solve(*eps, *duration, *s0, grid)?,
        ),
        Job::Kernel(spec) => kernel_run(scenario, spec, grid)?,
        Job::ConvergeMaster {
            eps,
            lambda,
            recovery,
            p,
            n_list,
        } => {
            let (report, traj) =
                continuum::finite_n_convergence(eps, lambda, recovery, *p, grid, n_list)?;
            convergence_artifacts(scenario, &report, &traj)
        }
        Job::ConvergeLogistic { c, lambda, n_list } => {
            let (report, traj) = continuum::logistic_convergence(*c, *lambda, grid, n_list)?;
            convergence_artifacts(scenario, &report, &traj)
        }
        Job::Stationary(spec) => {
            let root = continuum::stationary_state(spec)?;
            let traj = continuum::solve_master(spec, grid)?;
            let last = *traj.values("S").last().expect("grid has nodes");
            let details = json!({
                "s_inf": root.s_inf,
                "residual": root.residual,
                "iterations": root.iterations,
                "bracket": [root.bracket.0, root.bracket.1],
                "s_at_horizon": last,
            });
            let metrics = Metrics {
                max_abs_diff: Some((last - root.s_inf).abs()),
                ..Metrics::default()
            };
            finish(
                scenario,
                &traj,
                metrics,
                root.residual <= STATIONARY_TOLERANCE,
                details,
            )
        }
    })
}

fn convergence_artifacts(
    scenario: &Scenario,
    report: &continuum::ConvergenceReport,
    traj: &Trajectory,
) -> Artifacts {
    let metrics = Metrics {
        max_abs_diff: report.distances.last().copied(),
        orders: Some(report.orders()),
        ..Metrics::default()
    };
    let details = json!({ "n_list": report.n_list, "distances": report.distances });
    finish(
        scenario,
        traj,
        metrics,
        report.strictly_decreasing(),
        details,
    )
}

/// Validates and runs `scenario`, using `threads` workers for simulation
/// (all cores for `None`).
pub fn execute(scenario: &Scenario, threads: Option<usize>) -> Result<Artifacts> {
    let job = scenario.prepare()?;
    simulator::with_threads(threads, || execute_job(scenario, &job))?
}

fn write(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|err| RunError::Write {
        path: path.to_path_buf(),
        err,
    })
}

/// Loads, runs and writes `<dir>/<name>.csv` and `<dir>/<name>.json`.
pub fn run_file(path: &Path, overrides: &Overrides, threads: Option<usize>) -> Result<Written> {
    let mut scenario = Scenario::load(path)?;
    overrides.apply(&mut scenario)?;
    let artifacts = execute(&scenario, threads)?;
    let dir = scenario
        .output
        .dir
        .clone()
        .unwrap_or_else(|| PathBuf::from("."));
    std::fs::create_dir_all(&dir).map_err(|err| RunError::Write {
        path: dir.clone(),
        err,
    })?;
    let csv = dir.join(format!("{}.csv", scenario.name));
    let report = dir.join(format!("{}.json", scenario.name));
    write(&csv, &artifacts.csv)?;
    write(&report, &artifacts.report)?;
    Ok(Written {
        csv,
        report,
        pass: artifacts.pass,
    })
}

/// Loads and validates without running any solver.
pub fn validate_file(path: &Path) -> Result<Scenario> {
    let scenario = Scenario::load(path)?;
    scenario.prepare()?;
    Ok(scenario)
}
