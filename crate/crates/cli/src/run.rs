//! Sweep, gradient-study and oracle-only drivers.

use std::path::{Path, PathBuf};
use std::time::Instant;

use duct_pinn::network::write_checkpoint;
use duct_pinn::oracle::{self, solve_bvp_shooting, PeakEnvelope};
use duct_pinn::pinn::{pressure_field, relative_error_channels};
use duct_pinn::velocity::VelocityMethod;
use duct_pinn::{
    amplitude, oracle_velocity, relative_error, train, train_velocity_transfer, velocity_direct_field, CollocationSet,
    FieldSolution64, FrequencyCase64, NetworkParameters64, OracleError, PinnError, ProfileKind, TrainingReport,
};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::config::RunConfig;
use crate::output::{ensure_dir, frequency_label, num, opt, write_atomic, write_json, OutputError, Table};

#[derive(Debug, thiserror::Error)]
pub enum CaseError {
    #[error(transparent)]
    Pinn(#[from] PinnError),
    #[error(transparent)]
    Oracle(#[from] OracleError),
    #[error(transparent)]
    Output(#[from] OutputError),
}

pub const ERROR_TABLE_HEADER: [&str; 15] = [
    "profile",
    "frequency [Hz]",
    "dp_re",
    "dp_im",
    "du_re",
    "du_im",
    "final_loss",
    "iterations",
    "du_transfer_re",
    "du_transfer_im",
    "transfer_vs_direct_re",
    "transfer_vs_direct_im",
    "velocity_loss",
    "velocity_iterations",
    "wall_time [s]",
];

pub const ERROR_TABLE: &str = "error_table.csv";

/// Errors of one trained case against its oracle.
#[derive(Debug, Clone, Serialize)]
pub struct CaseResult {
    pub profile: ProfileKind,
    pub frequency: f64,
    pub pressure_error: (f64, f64),
    /// Direct method when computed, otherwise transfer.
    pub velocity_error: Option<(f64, f64)>,
    pub transfer_error: Option<(f64, f64)>,
    pub transfer_vs_direct: Option<(f64, f64)>,
    pub pressure_report: TrainingReport,
    pub velocity_report: Option<TrainingReport>,
    pub wall_time_seconds: f64,
}

impl CaseResult {
    fn table_row(&self) -> Vec<String> {
        let pair = |v: Option<(f64, f64)>| [opt(v.map(|p| p.0)), opt(v.map(|p| p.1))];
        let [du_re, du_im] = pair(self.velocity_error);
        let [dt_re, dt_im] = pair(self.transfer_error);
        let [ag_re, ag_im] = pair(self.transfer_vs_direct);
        vec![
            self.profile.as_str().to_string(),
            num(self.frequency),
            num(self.pressure_error.0),
            num(self.pressure_error.1),
            du_re,
            du_im,
            num(self.pressure_report.final_loss),
            self.pressure_report.iterations.to_string(),
            dt_re,
            dt_im,
            ag_re,
            ag_im,
            opt(self.velocity_report.as_ref().map(|r| r.final_loss)),
            self.velocity_report.as_ref().map(|r| r.iterations.to_string()).unwrap_or_default(),
            format!("{:.3}", self.wall_time_seconds),
        ]
    }
}

#[derive(Debug)]
pub struct SweepOutcome {
    pub results: Vec<CaseResult>,
    pub failures: Vec<(ProfileKind, f64, String)>,
    pub error_table: PathBuf,
}

fn case_stem(kind: ProfileKind, frequency: f64) -> String {
    format!("{}_{}Hz", kind.as_str(), frequency_label(frequency))
}

/// Reference solution on `n` points with `p̂'` and `û`.
pub fn reference_solution(config: &RunConfig, case: &FrequencyCase64, n: usize) -> Result<FieldSolution64, OracleError> {
    let field = if case.flow.profile.kind == ProfileKind::Constant {
        oracle::analytic_uniform(case, n)?
    } else {
        solve_bvp_shooting(case, config.oracle.steps, n)?
    };
    oracle_velocity(&field, case)
}

fn checkpoint_bytes(params: &NetworkParameters64, seed: u64) -> Result<Vec<u8>, PinnError> {
    let mut bytes = Vec::new();
    write_checkpoint(params, seed, &mut bytes)?;
    Ok(bytes)
}

/// Trains the pressure network for one case.
fn train_pressure(
    config: &RunConfig,
    case: &FrequencyCase64,
) -> Result<(NetworkParameters64, TrainingReport), CaseError> {
    let colloc = CollocationSet::random(
        config.training.collocation_points,
        case.length(),
        config.training.collocation_seed,
    )?;
    let arch = config.network.architecture().map_err(|e| PinnError::InvalidConfig(e.to_string()))?;
    Ok(train(case, arch, &colloc, &config.pressure_training(case.frequency))?)
}

fn run_case(config: &RunConfig, out: &Path, kind: ProfileKind, frequency: f64) -> Result<CaseResult, CaseError> {
    let started = Instant::now();
    let case = config.case(kind, frequency)?;
    let stem = case_stem(kind, frequency);
    let (params, pressure_report) = train_pressure(config, &case)?;
    eprintln!("[{stem}] pressure: {}", pressure_report.summary());

    let truth = reference_solution(config, &case, config.oracle.grid_points)?;
    let truth_u = truth.velocity.as_ref().expect("oracle velocity");
    let pinn = pressure_field(&params, &case, &truth.x);
    let pressure_error = relative_error(&pinn, &truth)?;

    let direct = if config.velocity.method.includes(VelocityMethod::Direct) {
        Some(velocity_direct_field(&params, &case, &truth.x)?.velocity)
    } else {
        None
    };
    let transfer = if config.velocity.method.includes(VelocityMethod::Transfer) {
        let colloc = CollocationSet::random(
            config.velocity.collocation_points,
            case.length(),
            config.velocity.collocation_seed,
        )?;
        let arch = config
            .velocity_network()
            .architecture()
            .map_err(|e| PinnError::InvalidConfig(e.to_string()))?;
        let (net, report) = train_velocity_transfer(
            &params,
            &case,
            arch,
            &colloc,
            &config.velocity_training(frequency),
            config.velocity.anchor,
        )?;
        eprintln!("[{stem}] velocity: {}", report.summary());
        Some((net, report))
    } else {
        None
    };
    let transfer_u = transfer.as_ref().map(|(net, _)| net.field(&truth.x).velocity);

    let direct_error = direct.as_ref().map(|u| relative_error_channels(u, truth_u)).transpose()?;
    let transfer_error = transfer_u.as_ref().map(|u| relative_error_channels(u, truth_u)).transpose()?;
    let transfer_vs_direct = match (&transfer_u, &direct) {
        (Some(t), Some(d)) => Some(relative_error_channels(t, d)?),
        _ => None,
    };

    let mut pressure_csv = Table::new(&["x [m]", "pinn_re [Pa]", "pinn_im [Pa]", "oracle_re [Pa]", "oracle_im [Pa]"]);
    for i in 0..truth.len() {
        pressure_csv.row([
            num(truth.x[i]),
            num(pinn.pressure[i].re),
            num(pinn.pressure[i].im),
            num(truth.pressure[i].re),
            num(truth.pressure[i].im),
        ]);
    }
    pressure_csv.write_to(&out.join("fields").join(format!("{stem}_pressure.csv")))?;

    let mut velocity_csv = Table::new(&[
        "x [m]",
        "direct_re [m/s]",
        "direct_im [m/s]",
        "transfer_re [m/s]",
        "transfer_im [m/s]",
        "oracle_re [m/s]",
        "oracle_im [m/s]",
    ]);
    let part = |v: &Option<Vec<Complex64>>, i: usize| match v {
        Some(u) => [num(u[i].re), num(u[i].im)],
        None => [String::new(), String::new()],
    };
    for i in 0..truth.len() {
        let [dre, dim] = part(&direct, i);
        let [tre, tim] = part(&transfer_u, i);
        velocity_csv.row([num(truth.x[i]), dre, dim, tre, tim, num(truth_u[i].re), num(truth_u[i].im)]);
    }
    velocity_csv.write_to(&out.join("fields").join(format!("{stem}_velocity.csv")))?;

    let checkpoints = out.join("checkpoints");
    write_atomic(
        &checkpoints.join(format!("{stem}_pressure.ckpt")),
        &checkpoint_bytes(&params, config.training.seed)?,
    )?;
    if let Some((net, _)) = &transfer {
        write_atomic(
            &checkpoints.join(format!("{stem}_velocity.ckpt")),
            &checkpoint_bytes(&net.params, config.velocity.seed)?,
        )?;
    }

    let result = CaseResult {
        profile: kind,
        frequency,
        pressure_error,
        velocity_error: direct_error.or(transfer_error),
        transfer_error,
        transfer_vs_direct,
        pressure_report,
        velocity_report: transfer.map(|(_, r)| r),
        wall_time_seconds: started.elapsed().as_secs_f64(),
    };
    write_json(&out.join("reports").join(format!("{stem}.json")), &result)?;
    Ok(result)
}

fn prepare_output(config: &RunConfig, out: &Path, subdirs: &[&str]) -> Result<(), OutputError> {
    ensure_dir(out)?;
    for d in subdirs {
        ensure_dir(&out.join(d))?;
    }
    write_atomic(&out.join("config.toml"), config.to_toml().as_bytes())
}

fn sort_key(kind: ProfileKind, frequency: f64) -> (&'static str, u64) {
    (kind.as_str(), frequency.to_bits())
}

/// Trains every (profile, frequency) case, writes field CSVs, reports and the error table.
pub fn run_sweep(config: &RunConfig) -> Result<SweepOutcome, OutputError> {
    let out = config.output_dir.clone();
    prepare_output(config, &out, &["fields", "reports", "checkpoints"])?;
    let cases: Vec<(ProfileKind, f64)> = config
        .sweep
        .profiles
        .iter()
        .flat_map(|&k| config.sweep.frequencies.iter().map(move |&f| (k, f)))
        .collect();
    let outcomes: Vec<_> = cases
        .par_iter()
        .map(|&(kind, f)| (kind, f, run_case(config, &out, kind, f)))
        .collect();

    let mut results = Vec::new();
    let mut failures = Vec::new();
    for (kind, f, outcome) in outcomes {
        match outcome {
            Ok(r) => results.push(r),
            Err(CaseError::Output(e)) => return Err(e),
            Err(e) => {
                eprintln!("[{}] failed: {e}", case_stem(kind, f));
                failures.push((kind, f, e.to_string()));
            }
        }
    }
    results.sort_by_key(|r| sort_key(r.profile, r.frequency));
    let mut table = Table::new(&ERROR_TABLE_HEADER);
    for r in &results {
        table.row(r.table_row());
    }
    let error_table = out.join(ERROR_TABLE);
    table.write_to(&error_table)?;
    Ok(SweepOutcome {
        results,
        failures,
        error_table,
    })
}

/// Uniform-versus-gradient comparison at one frequency.
#[derive(Debug, Clone, Serialize)]
pub struct GradientStudyResult {
    pub frequency: f64,
    pub uniform_temperature: f64,
    pub uniform_mach: f64,
    pub uniform_error: (f64, f64),
    pub gradient_error: (f64, f64),
    pub gradient_peaks: Vec<(f64, f64)>,
    pub gradient_envelope_increasing: bool,
    pub uniform_peaks: Vec<(f64, f64)>,
    pub uniform_envelope_spread: f64,
    pub uniform_envelope_constant: bool,
    pub uniform_report: TrainingReport,
    pub gradient_report: TrainingReport,
}

#[derive(Debug)]
pub struct GradientStudyOutcome {
    pub results: Vec<GradientStudyResult>,
    pub failures: Vec<(f64, String)>,
}

fn gradient_case(config: &RunConfig, out: &Path, frequency: f64) -> Result<GradientStudyResult, CaseError> {
    let n = config.gradient_study.amplitude_points;
    let uniform = config.uniform_case(frequency)?;
    let gradient = config.case(ProfileKind::Linear, frequency)?;
    let (pu, uniform_report) = train_pressure(config, &uniform)?;
    eprintln!("[gradient-study {frequency} Hz] uniform: {}", uniform_report.summary());
    let (pg, gradient_report) = train_pressure(config, &gradient)?;
    eprintln!("[gradient-study {frequency} Hz] gradient: {}", gradient_report.summary());

    let exact = oracle::analytic_uniform(&uniform, n)?;
    let shot = solve_bvp_shooting(&gradient, config.oracle.steps.max(n - 1), n)?;
    let grid = exact.x.clone();
    let pinn_u = pressure_field(&pu, &uniform, &grid);
    let pinn_g = pressure_field(&pg, &gradient, &grid);
    let (amp_pu, amp_exact, amp_pg, amp_shot) = (amplitude(&pinn_u), amplitude(&exact), amplitude(&pinn_g), amplitude(&shot));

    let mut csv = Table::new(&[
        "x [m]",
        "uniform_pinn [Pa^2]",
        "uniform_analytic [Pa^2]",
        "gradient_pinn [Pa^2]",
        "gradient_oracle [Pa^2]",
    ]);
    for i in 0..grid.len() {
        csv.row([num(grid[i]), num(amp_pu[i]), num(amp_exact[i]), num(amp_pg[i]), num(amp_shot[i])]);
    }
    csv.write_to(&out.join(format!("amplitude_{}Hz.csv", frequency_label(frequency))))?;

    let gradient_env = PeakEnvelope::of(&grid, &amp_pg);
    let uniform_env = PeakEnvelope::of(&grid, &amp_pu);
    let spread = uniform_env.relative_spread();
    let s = uniform.flow.sample(frequency, 0.0).map_err(PinnError::from)?;
    Ok(GradientStudyResult {
        frequency,
        uniform_temperature: s.temperature,
        uniform_mach: s.mach,
        uniform_error: relative_error(&pinn_u, &exact)?,
        gradient_error: relative_error(&pinn_g, &shot)?,
        gradient_envelope_increasing: gradient_env.is_increasing(),
        gradient_peaks: gradient_env.peaks,
        uniform_envelope_constant: !uniform_env.peaks.is_empty() && spread <= config.gradient_study.envelope_tolerance,
        uniform_peaks: uniform_env.peaks,
        uniform_envelope_spread: spread,
        uniform_report,
        gradient_report,
    })
}

pub const GRADIENT_TABLE_HEADER: [&str; 9] = [
    "frequency [Hz]",
    "uniform_dp_re",
    "uniform_dp_im",
    "gradient_dp_re",
    "gradient_dp_im",
    "gradient_envelope_increasing",
    "uniform_envelope_spread",
    "uniform_envelope_constant",
    "uniform_mach",
];

/// Trains uniform and linear-gradient networks and writes the amplitude comparison.
pub fn run_gradient_study(config: &RunConfig) -> Result<GradientStudyOutcome, OutputError> {
    let out = config.output_dir.clone();
    prepare_output(config, &out, &[])?;
    let outcomes: Vec<_> = config
        .gradient_study
        .frequencies
        .par_iter()
        .map(|&f| (f, gradient_case(config, &out, f)))
        .collect();
    let mut results = Vec::new();
    let mut failures = Vec::new();
    for (f, outcome) in outcomes {
        match outcome {
            Ok(r) => results.push(r),
            Err(CaseError::Output(e)) => return Err(e),
            Err(e) => {
                eprintln!("[gradient-study {f} Hz] failed: {e}");
                failures.push((f, e.to_string()));
            }
        }
    }
    results.sort_by_key(|r| r.frequency.to_bits());
    let mut table = Table::new(&GRADIENT_TABLE_HEADER);
    for r in &results {
        table.row([
            num(r.frequency),
            num(r.uniform_error.0),
            num(r.uniform_error.1),
            num(r.gradient_error.0),
            num(r.gradient_error.1),
            r.gradient_envelope_increasing.to_string(),
            num(r.uniform_envelope_spread),
            r.uniform_envelope_constant.to_string(),
            num(r.uniform_mach),
        ]);
    }
    table.write_to(&out.join("gradient_study.csv"))?;
    write_json(&out.join("gradient_study.json"), &results)?;
    Ok(GradientStudyOutcome { results, failures })
}

/// Writes reference fields for every sweep case without training.
pub fn run_oracle_only(config: &RunConfig) -> Result<Vec<(ProfileKind, f64, String)>, OutputError> {
    let out = config.output_dir.clone();
    prepare_output(config, &out, &["fields"])?;
    let mut failures = Vec::new();
    for &kind in &config.sweep.profiles {
        for &f in &config.sweep.frequencies {
            let stem = case_stem(kind, f);
            let field = config
                .case(kind, f)
                .map_err(CaseError::from)
                .and_then(|case| Ok(reference_solution(config, &case, config.oracle.grid_points)?));
            match field {
                Ok(field) => {
                    let mut bytes = Vec::new();
                    oracle::write_field_csv(&field, &mut bytes).expect("in-memory write");
                    write_atomic(&out.join("fields").join(format!("{stem}_oracle.csv")), &bytes)?;
                }
                Err(e) => {
                    eprintln!("[{stem}] failed: {e}");
                    failures.push((kind, f, e.to_string()));
                }
            }
        }
    }
    Ok(failures)
}
