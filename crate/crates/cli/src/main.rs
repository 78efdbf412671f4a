use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use esac_core::example1::{symbolic_inputs, verify_example1};
use esac_core::output::{fmt_g, format_report, write_simulation_csv, write_sweep_csv, write_trajectory_csv};
use esac_core::selftest::{run_all, SelftestOptions};
use esac_core::simulate::{example_system, monte_carlo, simulate_trajectory};
use esac_core::stability::{certify, critical_alpha};
use esac_core::{boundary_curve, parse_config, RunConfig};

const EXIT_NOT_CERTIFIED: u8 = 2;

/// Stability certification and simulation of event-triggered anytime control.
#[derive(Parser)]
#[command(name = "esac", version)]
struct Cli {
    /// Worker threads for sweeps and Monte Carlo runs.
    #[arg(long, global = true, env = "ESAC_THREADS", value_parser = clap::value_parser!(u32).range(1..))]
    threads: Option<u32>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Certify a buffered scheme and print the report (exit 2 if not certified).
    Certify(ConfigArgs),
    /// Critical open-loop growth over the rho1 grid, as CSV.
    Sweep(ConfigArgs),
    /// Monte Carlo mean of V(x_k) and trigger rate, as CSV.
    Simulate {
        #[command(flatten)]
        config: ConfigArgs,
        /// Also write the trajectory of the first run.
        #[arg(long, value_name = "FILE")]
        trajectory: Option<PathBuf>,
    },
    /// Forced three-step scenario for every scheme, checked against the composed laws.
    Example1,
    /// Run the acceptance checks.
    Selftest {
        /// Monte Carlo runs for the trajectory checks.
        #[arg(long, default_value_t = 10_000)]
        runs: usize,
        /// Base seed for the trajectory checks.
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

#[derive(Args)]
struct ConfigArgs {
    /// Configuration file of `key = value` lines.
    #[arg(short, long, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Override one key; repeatable.
    #[arg(short = 's', long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Output file; overrides the `output` key. Stdout when neither is given.
    #[arg(short, long, value_name = "FILE")]
    output: Option<PathBuf>,
}

impl ConfigArgs {
    fn load(&self) -> Result<RunConfig> {
        let text = match &self.config {
            Some(path) => fs::read_to_string(path)
                .with_context(|| format!("reading {}", path.display()))?,
            None => String::new(),
        };
        let mut cfg = parse_config(&text, &self.overrides)?;
        if let Some(out) = &self.output {
            cfg.output = Some(out.clone());
        }
        Ok(cfg)
    }
}

fn open_output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).with_context(|| format!("creating {}", p.display()))?,
        )),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn cmd_certify(args: &ConfigArgs) -> Result<ExitCode> {
    let cfg = args.load()?;
    let spec = cfg.contraction_spec()?;
    let report = certify(cfg.scheme, &spec, &cfg.channel()?, cfg.nu.as_deref())?;
    let critical = critical_alpha(&cfg.critical_alpha_config()?).ok();
    let mut out = open_output(cfg.output.as_deref())?;
    out.write_all(format_report(&cfg, &report, critical.as_ref()).as_bytes())?;
    out.flush()?;
    Ok(if report.is_certified() {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(EXIT_NOT_CERTIFIED)
    })
}

fn cmd_sweep(args: &ConfigArgs) -> Result<ExitCode> {
    let cfg = args.load()?;
    let points = boundary_curve(&cfg.sweep_spec()?)?;
    let mut out = open_output(cfg.output.as_deref())?;
    write_sweep_csv(&mut out, &points)?;
    out.flush()?;
    Ok(ExitCode::SUCCESS)
}

fn cmd_simulate(args: &ConfigArgs, trajectory: Option<&Path>) -> Result<ExitCode> {
    let cfg = args.load()?;
    let system = example_system();
    let plant = cfg.plant(&system)?;
    let scheme = cfg.scheme_config(&system)?;
    let result = monte_carlo(&plant, &scheme, cfg.horizon, cfg.runs, cfg.seed)?;
    let mut out = open_output(cfg.output.as_deref())?;
    write_simulation_csv(&mut out, &result)?;
    out.flush()?;
    if let Some(path) = trajectory {
        let t = simulate_trajectory(&plant, &scheme, cfg.horizon, cfg.seed)?;
        let mut f = open_output(Some(path))?;
        write_trajectory_csv(&mut f, &t)?;
        f.flush()?;
    }
    if result.divergent_runs > 0 {
        eprintln!(
            "warning: {} of {} runs exceeded |x| = 1e12; their last V is carried forward",
            result.divergent_runs, result.runs
        );
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_example1() -> Result<ExitCode> {
    let mut all_ok = true;
    let mut out = io::stdout().lock();
    for (got, want, ok) in verify_example1()? {
        all_ok &= ok;
        writeln!(out, "scheme {}", got.scheme)?;
        for (k, label) in symbolic_inputs(got.scheme).iter().enumerate() {
            writeln!(out, "  u{k} = {label:<20} = {}", fmt_g(got.inputs[k]))?;
        }
        for (k, b) in got.buffers.iter().enumerate() {
            let vals: Vec<String> = b.iter().map(|v| fmt_g(*v)).collect();
            writeln!(out, "  b{k} = [{}]", vals.join(", "))?;
        }
        let status = if ok { "match" } else { "MISMATCH" };
        writeln!(out, "  expected inputs and buffers: {status}")?;
        if !ok {
            writeln!(out, "  expected {:?}", want.inputs)?;
        }
    }
    Ok(if all_ok { ExitCode::SUCCESS } else { ExitCode::FAILURE })
}

fn cmd_selftest(runs: usize, seed: u64) -> Result<ExitCode> {
    if runs == 0 {
        bail!("--runs must be at least 1");
    }
    let outcomes = run_all(SelftestOptions { runs, seed });
    for o in &outcomes {
        println!("{o}");
    }
    Ok(if outcomes.iter().all(|o| o.passed) {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    })
}

fn run(cli: Cli) -> Result<ExitCode> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n as usize)
            .build_global()
            .context("configuring the thread pool")?;
    }
    match &cli.command {
        Command::Certify(args) => cmd_certify(args),
        Command::Sweep(args) => cmd_sweep(args),
        Command::Simulate { config, trajectory } => cmd_simulate(config, trajectory.as_deref()),
        Command::Example1 => cmd_example1(),
        Command::Selftest { runs, seed } => cmd_selftest(*runs, *seed),
    }
}

fn main() -> ExitCode {
    // clap's own usage errors exit 2, which is reserved for "not certified"
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::FAILURE } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
