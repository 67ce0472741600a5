use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use ldp_spectral::bench::{
    emit_csv, run_experiment, write_csv, DensityNormalization, ExperimentConfig,
};
use ldp_spectral::estim::{
    default_omega_grid, default_psd_quadrature_points, est_cov_matrix_psd, est_cov_ni, est_cov_si,
    est_cov_vector_global, est_cov_vector_ni, est_sdf_global, est_sdf_ni, est_sdf_point_si,
};
use ldp_spectral::io::{
    format_float, read_path, read_transcript_file, write_column, write_path, write_transcript,
};
use ldp_spectral::mech::{
    privatize_ni, privatize_si_cov, privatize_si_global, privatize_si_point, Aux, Transcript,
};
use ldp_spectral::model::{truncation_schedule, MechanismKind, PrivacyBudget, TruncationSchedule};
use ldp_spectral::procgen::{covs_of, sample_path, ProcessSpec, SeededRng};
use ldp_spectral::{Error, Result};

#[derive(Parser)]
#[command(
    name = "ldp-spectral",
    version,
    about = "Locally private autocovariance and spectral density estimation"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Mech {
    Ni,
    SiCov,
    SiPoint,
    SiGlobal,
}

impl From<Mech> for MechanismKind {
    fn from(m: Mech) -> Self {
        match m {
            Mech::Ni => MechanismKind::Ni,
            Mech::SiCov => MechanismKind::SiCov,
            Mech::SiPoint => MechanismKind::SiPoint,
            Mech::SiGlobal => MechanismKind::SiGlobal,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum EstimateTask {
    Cov,
    SdfPoint,
    SdfGlobal,
}

#[derive(Clone, Copy, ValueEnum)]
enum Normalization {
    Eq1,
    No2pi,
}

impl From<Normalization> for DensityNormalization {
    fn from(n: Normalization) -> Self {
        match n {
            Normalization::Eq1 => DensityNormalization::Eq1,
            Normalization::No2pi => DensityNormalization::No2pi,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Draw a Gaussian path from a built-in example process.
    Simulate {
        #[arg(long, value_parser = clap::value_parser!(u8).range(1..=3))]
        example: u8,
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, short)]
        output: Option<PathBuf>,
    },
    /// Privatize a path and write the transcript.
    Privatize {
        #[arg(long, short)]
        input: PathBuf,
        #[arg(long)]
        mech: Mech,
        #[arg(long)]
        alpha: f64,
        #[arg(long)]
        j: Option<usize>,
        #[arg(long, allow_hyphen_values = true)]
        omega: Option<f64>,
        #[arg(long = "K")]
        k: Option<usize>,
        #[arg(long)]
        tau: Option<f64>,
        #[arg(long = "tau-tilde")]
        tau_tilde: Option<f64>,
        #[arg(long, default_value_t = 0.001)]
        delta_log: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, short)]
        output: Option<PathBuf>,
    },
    /// Estimate a covariance or spectral density from a transcript.
    Estimate {
        #[arg(long, short)]
        input: PathBuf,
        /// Defaults to the task the transcript was produced for.
        #[arg(long)]
        task: Option<EstimateTask>,
        /// Lag for NI covariance estimates.
        #[arg(long)]
        j: Option<usize>,
        /// Fourier order for NI spectral estimates.
        #[arg(long)]
        m: Option<usize>,
        #[arg(long, allow_hyphen_values = true)]
        omega: Option<f64>,
        #[arg(long, default_value_t = 64)]
        grid_points: usize,
        /// Also write the first row of the PSD Toeplitz estimate (global task).
        #[arg(long)]
        cov_output: Option<PathBuf>,
        /// Order of that Toeplitz matrix; defaults to the transcript length.
        #[arg(long)]
        matrix_order: Option<usize>,
        #[arg(long, value_enum, default_value = "eq1")]
        density_normalization: Normalization,
        #[arg(long, short)]
        output: Option<PathBuf>,
    },
    /// Run a Monte Carlo experiment described by a JSON config.
    Bench {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, short)]
        output: Option<PathBuf>,
    },
}

fn sink(path: &Option<PathBuf>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn config_err(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}

fn simulate(example: u8, n: usize, seed: u64, output: &Option<PathBuf>) -> Result<()> {
    if n == 0 {
        return Err(config_err("--n must be positive"));
    }
    let covs = covs_of(&ProcessSpec::example(example, n.max(512))?)?;
    let path = sample_path(&covs, n, &mut SeededRng::new(seed, 0))?;
    match output {
        Some(p) => write_path(p, &path),
        None => write_column(io::stdout().lock(), "x", &path),
    }
}

#[allow(clippy::too_many_arguments)]
fn privatize(
    input: &Path,
    mech: Mech,
    alpha: f64,
    j: Option<usize>,
    omega: Option<f64>,
    k: Option<usize>,
    tau: Option<f64>,
    tau_tilde: Option<f64>,
    delta_log: f64,
    seed: u64,
    output: &Option<PathBuf>,
) -> Result<()> {
    let path = read_path(input)?;
    let kind = MechanismKind::from(mech);
    let budget = PrivacyBudget::new(alpha, delta_log).map_err(|e| config_err(e.to_string()))?;
    let need = |v: Option<usize>, flag: &str| {
        v.ok_or_else(|| config_err(format!("--mech {} needs {flag}", kind.as_str())))
    };
    let k_for_schedule = match mech {
        Mech::SiPoint | Mech::SiGlobal => Some(need(k, "--K")?),
        _ => None,
    };
    let theory = truncation_schedule(path.len(), &budget, kind, k_for_schedule)?;
    let sched = TruncationSchedule::custom(
        tau.unwrap_or(theory.tau),
        tau_tilde.unwrap_or(theory.tau_tilde),
        kind,
    )?;
    let mut rng = SeededRng::new(seed, 0);
    let t = match mech {
        Mech::Ni => privatize_ni(&path, &sched, alpha, &mut rng)?,
        Mech::SiCov => privatize_si_cov(&path, need(j, "--j")?, &sched, alpha, &mut rng)?,
        Mech::SiPoint => {
            let omega = omega.ok_or_else(|| config_err("--mech si-point needs --omega"))?;
            privatize_si_point(&path, omega, need(k, "--K")?, &sched, alpha, &mut rng)?
        }
        Mech::SiGlobal => privatize_si_global(&path, need(k, "--K")?, &sched, alpha, &mut rng)?,
    };
    write_transcript(sink(output)?, &t)
}

fn write_scalar(out: Box<dyn Write>, estimate: f64, task: &str, param: f64) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let io_err = |e: csv::Error| Error::Io(io::Error::other(e));
    w.write_record(["estimate", "task", "param"])
        .map_err(io_err)?;
    w.write_record([
        format_float(estimate),
        task.to_string(),
        format_float(param),
    ])
    .map_err(io_err)?;
    w.flush()?;
    Ok(())
}

fn default_task(t: &Transcript) -> EstimateTask {
    match t.aux {
        Aux::None | Aux::Cov { .. } => EstimateTask::Cov,
        Aux::Point { .. } => EstimateTask::SdfPoint,
        Aux::Global { .. } => EstimateTask::SdfGlobal,
    }
}

#[allow(clippy::too_many_arguments)]
fn estimate(
    input: &Path,
    task: Option<EstimateTask>,
    j: Option<usize>,
    m: Option<usize>,
    omega: Option<f64>,
    grid_points: usize,
    cov_output: &Option<PathBuf>,
    matrix_order: Option<usize>,
    normalization: DensityNormalization,
    output: &Option<PathBuf>,
) -> Result<()> {
    let t = read_transcript_file(input)?;
    let task = task.unwrap_or_else(|| default_task(&t));
    let scale = normalization.factor();
    let meta = t.meta;
    let sched = TruncationSchedule::custom(meta.tau, meta.tau_tilde, meta.kind)?;
    let need = |v: Option<usize>, flag: &str| {
        v.ok_or_else(|| config_err(format!("this estimate needs {flag}")))
    };
    let coeffs = match (task, &t.aux) {
        (EstimateTask::Cov, Aux::None) => {
            let j = need(j, "--j")?;
            let v = est_cov_ni(&t, j as i64, &sched, meta.alpha)?;
            return write_scalar(sink(output)?, v, "cov", j as f64);
        }
        (EstimateTask::Cov, Aux::Cov { j: tj, .. }) => {
            let v = est_cov_si(&t, *tj)?;
            return write_scalar(sink(output)?, v, "cov", *tj as f64);
        }
        (EstimateTask::SdfPoint, Aux::None) => {
            let w = omega.ok_or_else(|| config_err("this estimate needs --omega"))?;
            let v = est_sdf_ni(&t, need(m, "--m")?, &sched, meta.alpha, w)?;
            return write_scalar(sink(output)?, scale * v, "sdf_point", w);
        }
        (EstimateTask::SdfPoint, Aux::Point { omega: tw, k, .. }) => {
            let v = est_sdf_point_si(&t, *k, *tw)?;
            return write_scalar(sink(output)?, scale * v, "sdf_point", *tw);
        }
        (EstimateTask::SdfGlobal, Aux::None) => {
            est_cov_vector_ni(&t, need(m, "--m")?, &sched, meta.alpha)?
        }
        (EstimateTask::SdfGlobal, Aux::Global { k, .. }) => est_cov_vector_global(&t, *k)?,
        _ => {
            return Err(Error::Mismatch(format!(
                "a {} transcript does not support this task",
                meta.kind.as_str()
            )))
        }
    };
    let est = est_sdf_global(&coeffs, &default_omega_grid(grid_points))?;
    let mut w = csv::Writer::from_writer(sink(output)?);
    let io_err = |e: csv::Error| Error::Io(io::Error::other(e));
    w.write_record(["omega", "f_hat"]).map_err(io_err)?;
    for (om, f) in &est.grid {
        w.write_record([format_float(*om), format_float(scale * f)])
            .map_err(io_err)?;
    }
    w.flush()?;
    if let Some(p) = cov_output {
        let order = matrix_order.unwrap_or(meta.n).max(1);
        let toeplitz =
            est_cov_matrix_psd(&est, order, default_psd_quadrature_points(est.order, order))?;
        write_column(File::create(p)?, "sigma", &toeplitz.first_row)?;
    }
    Ok(())
}

fn bench(config: &Path, output: &Option<PathBuf>) -> Result<()> {
    let cfg = ExperimentConfig::from_file(config)?;
    let result = run_experiment(&cfg).map_err(|e| match e {
        Error::Config(m) => Error::Config(m),
        other => Error::Runtime(other.to_string()),
    })?;
    match output {
        Some(p) => emit_csv(&result, p),
        None => write_csv(io::stdout().lock(), &result),
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Simulate {
            example,
            n,
            seed,
            output,
        } => simulate(example, n, seed, &output),
        Command::Privatize {
            input,
            mech,
            alpha,
            j,
            omega,
            k,
            tau,
            tau_tilde,
            delta_log,
            seed,
            output,
        } => privatize(
            &input, mech, alpha, j, omega, k, tau, tau_tilde, delta_log, seed, &output,
        ),
        Command::Estimate {
            input,
            task,
            j,
            m,
            omega,
            grid_points,
            cov_output,
            matrix_order,
            density_normalization,
            output,
        } => estimate(
            &input,
            task,
            j,
            m,
            omega,
            grid_points,
            &cov_output,
            matrix_order,
            density_normalization.into(),
            &output,
        ),
        Command::Bench { config, output } => bench(&config, &output),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::Config(_) | Error::InvalidParameter(_) | Error::Parse(_) => {
                    ExitCode::from(2)
                }
                _ => ExitCode::from(3),
            }
        }
    }
}
