use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use fracspec::cauchy_solver::{solve_forced, Scenario};
use fracspec::dd_resolvent::{default_eta_sequence, ergodic_mean_signal, singularity_scan};
use fracspec::operator_spectrum::sigma_set;
use fracspec::special_fn::mittag_leffler;
use fracspec::stability_lab::{run_scenario, spectrum_csv};
use fracspec::{Error, SampledSignal};
use num_complex::Complex64;
use rayon::prelude::*;

#[derive(Parser)]
#[command(
    name = "fracspec",
    version,
    about = "Spectral and decay laboratory for fractional Cauchy problems"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Solve a scenario and write the solution as CSV.
    Solve {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Print the boundary spectrum of a scenario as `xi,reason`.
    Spectrum {
        #[arg(long)]
        config: PathBuf,
    },
    /// Scan a sampled signal for singularities of its Laplace transform on the imaginary axis.
    Scan {
        #[arg(long)]
        signal: PathBuf,
        #[arg(long, default_value_t = 0)]
        degree: u32,
        #[arg(long, allow_negative_numbers = true)]
        xi_min: f64,
        #[arg(long, allow_negative_numbers = true)]
        xi_max: f64,
        /// Number of equally spaced points, ends included.
        #[arg(long)]
        xi_steps: usize,
    },
    /// Ergodic mean diagnostic of a sampled signal at frequency `zeta`, as JSON.
    Ergodic {
        #[arg(long)]
        signal: PathBuf,
        #[arg(long, default_value_t = 0)]
        degree: u32,
        #[arg(long, allow_negative_numbers = true)]
        zeta: f64,
        /// Also write the last iterate `eta R(eta + i zeta) f`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run scenarios end to end; one output directory per scenario.
    Verify {
        #[arg(long, required = true, num_args = 1..)]
        config: Vec<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Evaluate the Mittag-Leffler function E_{alpha,beta}(re + i im).
    Ml {
        #[arg(long)]
        alpha: f64,
        #[arg(long, default_value_t = 1.0)]
        beta: f64,
        #[arg(long, allow_negative_numbers = true)]
        re: f64,
        #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
        im: f64,
    },
}

fn linspace(a: f64, b: f64, k: usize) -> Result<Vec<f64>, Error> {
    match k {
        0 => Err(Error::Domain("--xi-steps must be positive".into())),
        1 => Ok(vec![a]),
        _ => Ok((0..k).map(|i| a + (b - a) * i as f64 / (k - 1) as f64).collect()),
    }
}

fn run(cmd: Cmd) -> Result<u8, Error> {
    let mut stdout = std::io::stdout().lock();
    match cmd {
        Cmd::Solve { config, out } => {
            let sc = Scenario::from_path(&config)?;
            solve_forced(&sc)?.write_csv_path(&out)?;
        }
        Cmd::Spectrum { config } => {
            let sc = Scenario::from_path(&config)?;
            write!(stdout, "{}", spectrum_csv(&sigma_set(&sc.operator, sc.alpha)))?;
        }
        Cmd::Scan {
            signal,
            degree,
            xi_min,
            xi_max,
            xi_steps,
        } => {
            let f = SampledSignal::read_csv_path(&signal, degree)?;
            let grid = linspace(xi_min, xi_max, xi_steps)?;
            writeln!(stdout, "xi,order,fit_slope")?;
            for p in singularity_scan(&f, degree, &grid, &default_eta_sequence())? {
                writeln!(stdout, "{:.16e},{},{:.16e}", p.xi, p.order, p.fit_slope)?;
            }
        }
        Cmd::Ergodic {
            signal,
            degree,
            zeta,
            out,
        } => {
            let f = SampledSignal::read_csv_path(&signal, degree)?;
            let (last, diag) = ergodic_mean_signal(&f, degree, zeta, &default_eta_sequence())?;
            if let Some(p) = out {
                last.write_csv_path(&p)?;
            }
            let json = serde_json::to_string_pretty(&diag).map_err(|e| Error::Io(e.to_string()))?;
            writeln!(stdout, "{json}")?;
        }
        Cmd::Verify { config, out } => {
            let single = config.len() == 1;
            let codes: Vec<i32> = config
                .par_iter()
                .map(|c| {
                    let dir = if single { out.clone() } else { out.join(stem(c)) };
                    run_scenario(c, &dir)
                })
                .collect();
            let code = if codes.contains(&2) {
                2
            } else if codes.contains(&1) {
                1
            } else {
                0
            };
            return Ok(code);
        }
        Cmd::Ml { alpha, beta, re, im } => {
            let v = mittag_leffler(alpha, beta, Complex64::new(re, im))?;
            writeln!(stdout, "{:.16e},{:.16e}", v.re, v.im)?;
        }
    }
    Ok(0)
}

fn stem(p: &Path) -> String {
    p.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "scenario".into())
}

fn init_threads() -> Result<(), Error> {
    let Ok(v) = std::env::var("FRACSPEC_THREADS") else {
        return Ok(());
    };
    let n: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| Error::Config(format!("FRACSPEC_THREADS must be a positive integer, got {v:?}")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Error::Config(e.to_string()))
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    if let Err(e) = init_threads() {
        eprintln!("fracspec: {e}");
        return ExitCode::from(1);
    }
    match run(cli.cmd) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("fracspec: {e}");
            ExitCode::from(1)
        }
    }
}
