//! Command-line front end: configure a system, sweep detuning / thermal
//! occupation / delay, and emit CSV tables plus resonance and convergence
//! reports.
//!
//! Exit codes: 0 success, 2 configuration error, 3 solver failure on every
//! point, 4 partial failure (some rows failed).

use std::fs;
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};

use optoblock::error::Error;
use optoblock::liouvillian::ConvergencePolicy;
use optoblock::observables::{converge_transport_cutoffs, TransportObservable};
use optoblock::sweep::{
    self, apply_overrides, config_from_key_values, parse_key_values, OutputColumn, SweepConfig,
};

#[derive(Parser)]
#[command(
    name = "optoblock",
    version,
    about = "Nonreciprocal photon-blockade simulator for a quadratically coupled \
             optomechanical system"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sweep detuning or thermal occupation; write one CSV row per point.
    Sweep(RunArgs),
    /// Delayed correlation g2(tau) over a tau grid from one propagation.
    G2tau(RunArgs),
    /// Print dressed-ladder resonance predictions next to sweep extrema.
    Predict(ReportArgs),
    /// Certify truncation cutoffs for the configured observables.
    Converge(ReportArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Config file path, or `preset:<name>` for a shipped preset.
    #[arg(long)]
    config: String,
    /// Output CSV path (data goes only here; stdout carries the log).
    #[arg(long)]
    out: PathBuf,
    /// Worker threads for independent solves (default: all cores).
    #[arg(long)]
    threads: Option<usize>,
    /// Override a config key, e.g. --override base.n_th=1 (repeatable).
    #[arg(long = "override", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

#[derive(Args)]
struct ReportArgs {
    /// Config file path, or `preset:<name>` for a shipped preset.
    #[arg(long)]
    config: String,
    /// Optional CSV path for the report table.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads for independent solves (default: all cores).
    #[arg(long)]
    threads: Option<usize>,
    /// Override a config key, e.g. --override base.n_th=1 (repeatable).
    #[arg(long = "override", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

const EXIT_CONFIG: u8 = 2;
const EXIT_SOLVER: u8 = 3;
const EXIT_PARTIAL: u8 = 4;

fn exit_code_for(e: &Error) -> u8 {
    match e {
        Error::Config(_) | Error::InvalidParameter(_) | Error::Io(_) => EXIT_CONFIG,
        _ => EXIT_SOLVER,
    }
}

fn load_config_text(spec: &str) -> Result<String, Error> {
    if let Some(name) = spec.strip_prefix("preset:") {
        sweep::preset(name).map(str::to_string).ok_or_else(|| {
            Error::Config(format!(
                "unknown preset '{name}' (available: {})",
                sweep::preset_names().join(", ")
            ))
        })
    } else {
        fs::read_to_string(spec).map_err(Error::Io)
    }
}

fn parse_override(s: &str) -> Result<(String, String), Error> {
    let (k, v) = s
        .split_once('=')
        .ok_or_else(|| Error::Config(format!("override '{s}' is not KEY=VALUE")))?;
    Ok((k.trim().to_string(), v.trim().to_string()))
}

fn effective_config(
    config: &str,
    overrides: &[String],
) -> Result<(SweepConfig, Vec<(String, String)>), Error> {
    let text = load_config_text(config)?;
    let ov: Vec<(String, String)> =
        overrides.iter().map(|s| parse_override(s)).collect::<Result<_, _>>()?;
    let kvs = apply_overrides(parse_key_values(&text)?, &ov);
    let cfg = config_from_key_values(&kvs)?;
    Ok((cfg, kvs))
}

fn with_pool<T>(threads: Option<usize>, f: impl FnOnce() -> T + Send) -> T
where
    T: Send,
{
    match threads {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .expect("thread pool construction")
            .install(f),
        None => f(),
    }
}

fn write_out(path: &PathBuf, contents: &str) -> Result<(), Error> {
    let mut file = fs::File::create(path)?;
    file.write_all(contents.as_bytes())?;
    Ok(())
}

fn cmd_sweep(args: &RunArgs, delay: bool) -> u8 {
    let (cfg, kvs) = match effective_config(&args.config, &args.overrides) {
        Ok(v) => v,
        Err(e) => {
            eprintln!("error: {e}");
            return exit_code_for(&e);
        }
    };
    let started = Instant::now();
    println!(
        "running {} over [{}, {}] with {} points",
        match cfg.variable {
            sweep::SweepVariable::Delta => "a detuning sweep (units of G)",
            sweep::SweepVariable::ThermalPhonons => "a thermal-occupation sweep",
            sweep::SweepVariable::Tau => "a delay scan (units of 2pi/gamma_c)",
        },
        cfg.min,
        cfg.max,
        cfg.points
    );
    let stride = (cfg.points / 20).max(1);
    let progress = move |done: usize, total: usize| {
        if done % stride == 0 || done == total {
            println!("  solved {done}/{total} points");
        }
    };
    let run = || {
        if delay {
            sweep::run_g2_delay(&cfg, &kvs)
        } else {
            sweep::run_sweep_with_progress(&cfg, &kvs, Some(&progress))
        }
    };
    let result = match with_pool(args.threads, run) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e}");
            return exit_code_for(&e);
        }
    };
    if let Err(e) = write_out(&args.out, &result.to_csv_string()) {
        eprintln!("error: {e}");
        return EXIT_CONFIG;
    }
    let failed = result.n_failed();
    println!(
        "wrote {} rows to {} in {:.1}s ({} failed)",
        result.rows.len(),
        args.out.display(),
        started.elapsed().as_secs_f64(),
        failed
    );
    if failed == result.rows.len() {
        EXIT_SOLVER
    } else if failed > 0 {
        EXIT_PARTIAL
    } else {
        0
    }
}

fn cmd_predict(args: &ReportArgs) -> u8 {
    let (cfg, kvs) = match effective_config(&args.config, &args.overrides) {
        Ok(v) => v,
        Err(e) => {
            eprintln!("error: {e}");
            return exit_code_for(&e);
        }
    };
    println!("predicting resonances for pair sectors <= {}", cfg.max_pair);
    let report = match with_pool(args.threads, || sweep::predict_resonances(&cfg, &kvs)) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e}");
            return exit_code_for(&e);
        }
    };
    print!("{}", report.render());
    if let Some(out) = &args.out {
        let mut csv = String::from("kind,delta_over_g,T21,predicted,deviation\n");
        for r in &report.rows {
            csv.push_str(&format!(
                "{},{},{},{},{}\n",
                if r.extremum.is_maximum { "maximum" } else { "minimum" },
                r.extremum.sweep_value,
                r.extremum.value,
                r.predicted,
                r.deviation
            ));
        }
        if let Err(e) = write_out(out, &csv) {
            eprintln!("error: {e}");
            return EXIT_CONFIG;
        }
        println!("wrote prediction table to {}", out.display());
    }
    let failed = report.sweep.n_failed();
    if failed == report.sweep.rows.len() {
        EXIT_SOLVER
    } else if failed > 0 {
        EXIT_PARTIAL
    } else {
        0
    }
}

fn cmd_converge(args: &ReportArgs) -> u8 {
    let (cfg, _kvs) = match effective_config(&args.config, &args.overrides) {
        Ok(v) => v,
        Err(e) => {
            eprintln!("error: {e}");
            return exit_code_for(&e);
        }
    };
    // Representative operating point: the configured fixed detuning, or the
    // antibunching point sqrt(2) G for plain detuning sweeps; thermal sweeps
    // certify at their hottest point.
    let sweep_value = match cfg.variable {
        sweep::SweepVariable::Delta => cfg.base.delta_over_g.unwrap_or(std::f64::consts::SQRT_2),
        sweep::SweepVariable::ThermalPhonons => cfg.max,
        sweep::SweepVariable::Tau => 0.0,
    };
    let params = match cfg.params_at(sweep_value) {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: {e}");
            return exit_code_for(&e);
        }
    };
    let observables: Vec<TransportObservable> = cfg
        .outputs
        .iter()
        .map(|o| match o {
            OutputColumn::Scalar(obs) => *obs,
            // Delay outputs certify through the matching equal-time pair.
            OutputColumn::G2Tau21 => TransportObservable::G2Of21,
            OutputColumn::G2Tau12 => TransportObservable::G2Of12,
        })
        .collect();
    println!(
        "certifying cutoffs at Delta = {} gamma_c, n_th = {}",
        params.detuning, params.thermal_phonons
    );
    let policy = ConvergencePolicy::default();
    let report = match with_pool(args.threads, || {
        converge_transport_cutoffs(&params, &observables, &policy)
    }) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e}");
            return exit_code_for(&e);
        }
    };
    println!("cutoff_photon,cutoff_phonon,max_rel_change,values");
    for row in &report.rows {
        println!(
            "{},{},{},{:?}",
            row.cutoff_photon,
            row.cutoff_phonon,
            row.max_rel_change.map(|c| format!("{c:e}")).unwrap_or_default(),
            row.values
        );
    }
    println!(
        "certified cutoffs: photon {}, phonon {}",
        report.certified_photon, report.certified_phonon
    );
    if let Some(out) = &args.out {
        let mut csv = String::from("cutoff_photon,cutoff_phonon,max_rel_change");
        for o in &observables {
            csv.push_str(&format!(",{}", o.column()));
        }
        csv.push('\n');
        for row in &report.rows {
            csv.push_str(&format!(
                "{},{},{}",
                row.cutoff_photon,
                row.cutoff_phonon,
                row.max_rel_change.map(|c| c.to_string()).unwrap_or_default()
            ));
            for v in &row.values {
                csv.push_str(&format!(",{v}"));
            }
            csv.push('\n');
        }
        if let Err(e) = write_out(out, &csv) {
            eprintln!("error: {e}");
            return EXIT_CONFIG;
        }
        println!("wrote convergence table to {}", out.display());
    }
    0
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let code = match &cli.command {
        Command::Sweep(args) => cmd_sweep(args, false),
        Command::G2tau(args) => cmd_sweep(args, true),
        Command::Predict(args) => cmd_predict(args),
        Command::Converge(args) => cmd_converge(args),
    };
    ExitCode::from(code)
}
