//! Closed-loop simulation: nonlinear plant, online identification and the
//! receding-horizon controller, driven by a [`Scenario`].
//!
//! Each tick `k` measures `y_k`, updates the estimate from
//! `(y_k, y_{k−1}, u_{k−1})`, solves for `u_{k+1}` and integrates the plant
//! over `[k·Ts, (k+1)·Ts)` holding `u_k`.

pub mod plot;
pub mod scenario;
pub mod trace;

use std::path::{Path, PathBuf};

use nalgebra::Vector4;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use thiserror::Error;

use crate::dynamics::{integrate_step, State12};
use crate::error::{OutputError, ScenarioError, SimFault};
use crate::linear_model::LinearHoverModel;
use crate::pcac::PcacController;
use crate::rls::RlsState;
use crate::Vector12;

pub use scenario::{command_trajectory, Scenario};
pub use trace::{Trace, TraceRecord};

/// Run stopped by a fault; `trace` holds every completed record.
#[derive(Debug, Error)]
#[error("simulation aborted at t = {time}: {fault}")]
pub struct Aborted {
    pub trace: Trace,
    pub time: f64,
    #[source]
    pub fault: SimFault,
}

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ScenarioError),
    #[error(transparent)]
    Aborted(Box<Aborted>),
}

pub fn run_scenario(scenario: &Scenario) -> Result<Trace, RunError> {
    scenario.validate()?;
    let ts = scenario.sample_time;
    let nominal = scenario.vehicle_params();
    let model = LinearHoverModel::new(&nominal, ts);
    let vrf = scenario
        .vrf_config()
        .map_err(|e| ScenarioError::Invalid(e.to_string()))?;
    let mut rls = RlsState::new(scenario.theta0()?, scenario.p0(), &vrf)
        .map_err(|e| ScenarioError::Invalid(e.to_string()))?;
    let config = scenario.pcac_config();
    let horizon = config.horizon;
    let mut ctrl = PcacController::new(config, model.ad)
        .map_err(|e| ScenarioError::Invalid(e.to_string()))?;
    let sigma = scenario.noise_sigma()?;
    let mut rng = ChaCha8Rng::seed_from_u64(scenario.seed);

    let mut trace = Trace {
        records: Vec::with_capacity(scenario.num_steps()),
    };
    let mut x = State12::zeros();
    let mut previous: Option<(Vector12, Vector4<f64>)> = None;

    for k in 0..scenario.num_steps() {
        let t = k as f64 * ts;
        let abort = |trace: Trace, fault: SimFault| {
            RunError::Aborted(Box::new(Aborted { trace, time: t, fault }))
        };
        let params = nominal.with_mass(scenario.mass_at_tick(k));
        ctrl.set_gravity_compensation(scenario.thrust_feedforward_at_tick(k));
        let u_dev = ctrl.state().u_current;
        let applied = ctrl.current_input();

        let noise = Vector12::from_fn(|i, _| {
            let n: f64 = StandardNormal.sample(&mut rng);
            sigma[i] * n
        });
        let y = x.0 + noise;

        let lambda = match &previous {
            Some((y_prev, u_prev)) => match rls.step(&y, y_prev, u_prev, &model.ad, &vrf) {
                Ok(info) => info.lambda,
                Err(e) => return Err(abort(trace, e.into())),
            },
            None => 1.0,
        };

        let references: Vec<Vector12> = (1..=horizon)
            .map(|i| scenario.command.reference((k + i) as f64 * ts))
            .collect();
        let out = match ctrl.compute_control(&y, &references, &rls.theta) {
            Ok(out) => out,
            Err(e) => return Err(abort(trace, e.into())),
        };

        let command = scenario.command.reference(t);
        trace.records.push(TraceRecord {
            t,
            state: x.0,
            measured: y,
            input: applied.0,
            theta: rls.theta,
            lambda,
            slack_max: out.slack_max,
            qp_iterations: out.iterations,
            qp_kkt: out.kkt_residual,
            tracking_error: x.p() - command.fixed_rows::<3>(0),
        });

        x = match integrate_step(&x, &applied, &params, ts) {
            Ok(next) => next,
            Err(e) => return Err(abort(trace, e.into())),
        };
        previous = Some((y, u_dev));
    }
    Ok(trace)
}

/// Runs one scenario per override value, in parallel. Results keep the
/// order of `values`.
pub fn sweep(
    base_toml: &str,
    param: &str,
    values: &[String],
) -> Vec<(String, Result<(Scenario, Trace), RunError>)> {
    std::thread::scope(|scope| {
        let handles: Vec<_> = values
            .iter()
            .map(|v| {
                scope.spawn(move || {
                    let result = Scenario::from_toml_str_with_override(base_toml, param, v)
                        .map_err(RunError::from)
                        .and_then(|mut s| {
                            s.name = format!("{}_{}_{}", s.name, sanitize(param), sanitize(v));
                            run_scenario(&s).map(|t| (s, t))
                        });
                    (v.clone(), result)
                })
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("sweep worker panicked"))
            .collect()
    })
}

fn sanitize(text: &str) -> String {
    text.chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '.' { c } else { '_' })
        .collect()
}

/// Writes `<name>.csv` and, unless disabled or the trace is empty, the plot
/// panels into `dir`.
pub fn emit_outputs(
    trace: &Trace,
    scenario: &Scenario,
    dir: &Path,
    plots: bool,
) -> Result<Vec<PathBuf>, OutputError> {
    std::fs::create_dir_all(dir).map_err(|e| OutputError::Write {
        path: dir.to_path_buf(),
        message: e.to_string(),
    })?;
    let csv_path = dir.join(format!("{}.csv", scenario.name));
    trace.save_csv(&csv_path)?;
    let mut written = vec![csv_path];
    if plots && !trace.is_empty() {
        written.extend(plot::write_panels(trace, scenario, dir)?);
    }
    Ok(written)
}
