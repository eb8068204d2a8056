// Copyright 2026 spinorder Contributors
// SPDX-License-Identifier: Apache-2.0

//! Command-line front end.
//!
//! Every subcommand is a thin orchestration of the library modules and
//! writes deterministic artifacts: identical arguments (including `--seed`)
//! produce byte-identical files. All numeric output uses twelve significant
//! digits. Failures map to process exit codes: invalid arguments or
//! unreadable files exit with 1 (after a usage message), internal numerical
//! failures exit with 2.
//!
//! Subcommands:
//!
//! * `bound` — closed-form κ, η_CI and t_m at one ξ as JSON; with
//!   `--certify` also runs the random-schedule bound certificate.
//! * `cinept` — trajectory of the hard-pulse baseline sequence.
//! * `evolve` — trajectory of a Gaussian or file-supplied pulse.
//! * `optimize` — steepest-descent pulse optimization; writes the pulse
//!   file and prints a JSON summary.
//! * `optimize-gaussian` — two-parameter Gaussian search; prints the
//!   optimum and optionally writes the pulse file.
//! * `sweep` — the ξ-sweep table as CSV (or JSON).
//! * `robustness` — the (A, σ) efficiency map with band classification.
//! * `oracle-check` — full density-matrix cross-validation of the reduced
//!   model, printing the maximum deviation and PASS/FAIL per pulse.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::dynamics::{propagate_reduced, ChainParams, ReducedState, Trajectory};
use crate::lindblad::{evolve_density, ORACLE_TOLERANCE};
use crate::optimizer::{
    self, grape_optimize, optimize_gaussian_in, random_pulse, robustness_grid, sweep_table,
    RobustnessGrid, SweepRow, A_BOX, SIGMA_BOX, TABLE_XIS,
};
use crate::pulses::PulseProgram;
use crate::{bounds, invalid, Error, Result};

/// Relaxation-optimized spin-order transfer: simulation, bounds, and pulse
/// optimization for a scalar-coupled three-spin chain.
#[derive(Debug, Parser)]
#[command(name = "spinorder", version, about)]
pub struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Print the transfer bound and hard-pulse baseline at one ξ (JSON).
    Bound(BoundArgs),
    /// Simulate the hard-pulse (concatenated INEPT) baseline sequence.
    Cinept(CineptArgs),
    /// Simulate a pulse and emit the five-variable trajectory.
    Evolve(EvolveArgs),
    /// Optimize the pulse shape by steepest descent.
    Optimize(OptimizeArgs),
    /// Optimize the two-parameter Gaussian ansatz.
    OptimizeGaussian(OptimizeGaussianArgs),
    /// Tabulate Gaussian and steepest-descent efficiencies over ξ values.
    Sweep(SweepArgs),
    /// Map Gaussian-pulse efficiency over an (A, σ) grid.
    Robustness(RobustnessArgs),
    /// Cross-validate the reduced model against the density-matrix oracle.
    OracleCheck(OracleCheckArgs),
}

#[derive(Debug, Args)]
struct GridArgs {
    /// Normalized relaxation rate ξ = k/(J√2).
    #[arg(long)]
    xi: f64,
    /// Pulse-sequence duration T in units of 1/(πJ√2).
    #[arg(long, default_value_t = 10.0)]
    horizon: f64,
    /// Number of time slices N.
    #[arg(long, default_value_t = 1000)]
    steps: usize,
}

impl GridArgs {
    fn params(&self) -> Result<ChainParams> {
        ChainParams::new(self.xi, self.horizon, self.steps)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Debug, Args)]
struct BoundArgs {
    /// Normalized relaxation rate ξ = k/(J√2).
    #[arg(long)]
    xi: f64,
    /// Also run the numerical bound certificate (requires ξ > 0).
    #[arg(long)]
    certify: bool,
    /// Number of random direction schedules for the certificate.
    #[arg(long, default_value_t = 1000)]
    trials: usize,
    /// Certificate slack above κ².
    #[arg(long, default_value_t = 1e-6)]
    tolerance: f64,
    /// Seed for the random schedules.
    #[arg(long, default_value_t = 12345)]
    seed: u64,
    /// Output file (stdout when omitted).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Output format.
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
}

#[derive(Debug, Args)]
struct CineptArgs {
    #[command(flatten)]
    grid: GridArgs,
    /// Output file (stdout when omitted).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Output format.
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
}

#[derive(Debug, Args)]
#[group(required = true, multiple = false)]
struct PulseSource {
    /// Gaussian pulse parameters as A,SIGMA.
    #[arg(long, value_parser = parse_pair, value_name = "A,SIGMA")]
    gaussian: Option<(f64, f64)>,
    /// Read the pulse from a file written by `optimize` or
    /// `optimize-gaussian`.
    #[arg(long, value_name = "FILE")]
    pulse: Option<PathBuf>,
}

impl PulseSource {
    fn load(&self, horizon: f64) -> Result<PulseProgram> {
        match (self.gaussian, &self.pulse) {
            (Some((a, sigma)), None) => PulseProgram::gaussian(a, sigma, horizon),
            (None, Some(path)) => PulseProgram::read(path),
            _ => Err(invalid("provide exactly one pulse source")),
        }
    }
}

#[derive(Debug, Args)]
struct EvolveArgs {
    #[command(flatten)]
    grid: GridArgs,
    #[command(flatten)]
    source: PulseSource,
    /// Output file (stdout when omitted).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Output format.
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
}

#[derive(Debug, Args)]
struct OptimizeArgs {
    #[command(flatten)]
    grid: GridArgs,
    /// Iteration cap for the gradient ascent.
    #[arg(long, default_value_t = 300)]
    max_iters: usize,
    /// Stop when the relative objective improvement drops below this.
    #[arg(long, default_value_t = 1e-9)]
    tol: f64,
    /// Initial Gaussian seed as A,SIGMA.
    #[arg(long, value_parser = parse_pair, value_name = "A,SIGMA", default_value = "1.0,1.4")]
    init: (f64, f64),
    /// Destination for the optimized pulse file (CSV).
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct OptimizeGaussianArgs {
    #[command(flatten)]
    grid: GridArgs,
    /// Amplitude search box LO:HI (a trailing :STEP is accepted and
    /// ignored; the search always refines 0.01 → 0.001).
    #[arg(long, value_parser = parse_box, value_name = "LO:HI")]
    a_range: Option<(f64, f64)>,
    /// Width search box LO:HI (a trailing :STEP is accepted and ignored).
    #[arg(long, value_parser = parse_box, value_name = "LO:HI")]
    sigma_range: Option<(f64, f64)>,
    /// Optional destination for the optimal Gaussian pulse file (JSON).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
#[group(id = "sweep_source", required = true, multiple = false)]
struct SweepSource {
    /// Run the canonical 21-value sweep ξ = 1.00, 0.95, …, 0.00.
    #[arg(long)]
    table1: bool,
    /// Explicit comma-separated ξ values, processed in order.
    #[arg(long, value_delimiter = ',', value_name = "XI,XI,...")]
    xis: Option<Vec<f64>>,
}

#[derive(Debug, Args)]
struct SweepArgs {
    #[command(flatten)]
    source: SweepSource,
    /// Output file (stdout when omitted).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Output format.
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
}

#[derive(Debug, Args)]
struct RobustnessArgs {
    /// Normalized relaxation rate ξ.
    #[arg(long, default_value_t = 1.0)]
    xi: f64,
    /// Amplitude grid LO:HI:STEP.
    #[arg(long, value_parser = parse_range, value_name = "LO:HI:STEP", default_value = "0.5:1.5:0.01")]
    a_range: (f64, f64, f64),
    /// Width grid LO:HI:STEP.
    #[arg(long, value_parser = parse_range, value_name = "LO:HI:STEP", default_value = "0.01:2.2:0.01")]
    sigma_range: (f64, f64, f64),
    /// Output base path; writes BASE.csv, BASE.bands.csv, BASE.legend.json.
    #[arg(long, value_name = "BASE")]
    out: PathBuf,
}

#[derive(Debug, Args)]
#[group(id = "oracle_source", required = true, multiple = false)]
struct OracleSource {
    /// Gaussian pulse parameters as A,SIGMA.
    #[arg(long, value_parser = parse_pair, value_name = "A,SIGMA")]
    gaussian: Option<(f64, f64)>,
    /// Read the pulse from a file.
    #[arg(long, value_name = "FILE")]
    pulse: Option<PathBuf>,
    /// Check the hard-pulse baseline sequence.
    #[arg(long)]
    cinept: bool,
    /// Check N seeded random piecewise pulses.
    #[arg(long, value_name = "N")]
    random: Option<usize>,
}

#[derive(Debug, Args)]
struct OracleCheckArgs {
    #[command(flatten)]
    grid: GridArgs,
    #[command(flatten)]
    source: OracleSource,
    /// Seed for `--random` pulses.
    #[arg(long, default_value_t = 12345)]
    seed: u64,
    /// Side-by-side trajectory dump (single-pulse modes only).
    #[arg(long)]
    out: Option<PathBuf>,
}

fn parse_pair(s: &str) -> std::result::Result<(f64, f64), String> {
    let parts: Vec<&str> = s.split(',').collect();
    if parts.len() != 2 {
        return Err(format!("expected two comma-separated numbers, got '{s}'"));
    }
    let a = parts[0]
        .trim()
        .parse::<f64>()
        .map_err(|e| format!("'{}': {e}", parts[0]))?;
    let b = parts[1]
        .trim()
        .parse::<f64>()
        .map_err(|e| format!("'{}': {e}", parts[1]))?;
    Ok((a, b))
}

fn parse_box(s: &str) -> std::result::Result<(f64, f64), String> {
    let parts: Vec<&str> = s.split(':').collect();
    if parts.len() != 2 && parts.len() != 3 {
        return Err(format!("expected LO:HI, got '{s}'"));
    }
    let lo = parts[0]
        .trim()
        .parse::<f64>()
        .map_err(|e| format!("'{}': {e}", parts[0]))?;
    let hi = parts[1]
        .trim()
        .parse::<f64>()
        .map_err(|e| format!("'{}': {e}", parts[1]))?;
    if parts.len() == 3 {
        parts[2]
            .trim()
            .parse::<f64>()
            .map_err(|e| format!("'{}': {e}", parts[2]))?;
    }
    Ok((lo, hi))
}

fn parse_range(s: &str) -> std::result::Result<(f64, f64, f64), String> {
    let parts: Vec<&str> = s.split(':').collect();
    if parts.len() != 3 {
        return Err(format!("expected LO:HI:STEP, got '{s}'"));
    }
    let lo = parts[0]
        .trim()
        .parse::<f64>()
        .map_err(|e| format!("'{}': {e}", parts[0]))?;
    let hi = parts[1]
        .trim()
        .parse::<f64>()
        .map_err(|e| format!("'{}': {e}", parts[1]))?;
    let step = parts[2]
        .trim()
        .parse::<f64>()
        .map_err(|e| format!("'{}': {e}", parts[2]))?;
    Ok((lo, hi, step))
}

/// Parses arguments and runs; returns the process exit code.
pub fn run() -> i32 {
    match Cli::try_parse() {
        Ok(cli) => match execute(cli.command) {
            Ok(()) => 0,
            Err(err) => {
                eprintln!("error: {err}");
                match err {
                    Error::Numerical(_) => 2,
                    Error::InvalidInput(_) | Error::Io(_) => 1,
                }
            }
        },
        Err(err) => {
            // clap renders help/version through the error path too; those
            // are successful exits, everything else is an argument error.
            let code = match err.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = err.print();
            code
        }
    }
}

fn execute(command: Command) -> Result<()> {
    match command {
        Command::Bound(args) => bound_cmd(args),
        Command::Cinept(args) => cinept_cmd(args),
        Command::Evolve(args) => evolve_cmd(args),
        Command::Optimize(args) => optimize_cmd(args),
        Command::OptimizeGaussian(args) => optimize_gaussian_cmd(args),
        Command::Sweep(args) => sweep_cmd(args),
        Command::Robustness(args) => robustness_cmd(args),
        Command::OracleCheck(args) => oracle_check_cmd(args),
    }
}

fn emit(out: &Option<PathBuf>, content: &str) -> Result<()> {
    match out {
        Some(path) => {
            fs::write(path, content)?;
            Ok(())
        }
        None => {
            print!("{content}");
            Ok(())
        }
    }
}

fn num(x: f64) -> String {
    format!("{x:.11e}")
}

fn bound_cmd(args: BoundArgs) -> Result<()> {
    let report = bounds::bound_report(args.xi)?;
    let certificate = if args.certify {
        Some(bounds::certify_bound(
            args.xi,
            args.trials,
            args.tolerance,
            args.seed,
        )?)
    } else {
        None
    };
    let content = match args.format {
        Format::Json => {
            let mut s = String::from("{\n");
            let _ = writeln!(s, "  \"xi\": {},", num(report.xi));
            let _ = writeln!(s, "  \"kappa\": {},", num(report.kappa));
            let _ = writeln!(s, "  \"eta_ci\": {},", num(report.eta_ci));
            match &certificate {
                None => {
                    let _ = writeln!(s, "  \"t_m\": {}", num(report.t_m));
                }
                Some(cert) => {
                    let _ = writeln!(s, "  \"t_m\": {},", num(report.t_m));
                    let _ = writeln!(s, "  \"certificate\": {{");
                    let _ = writeln!(
                        s,
                        "    \"kappa_squared\": {},",
                        num(cert.kappa * cert.kappa)
                    );
                    let _ = writeln!(s, "    \"attained_p3\": {},", num(cert.attained_p3));
                    let _ = writeln!(s, "    \"p2_rate\": {},", num(cert.p2_rate));
                    let _ = writeln!(s, "    \"trials\": {},", cert.trials);
                    let _ = writeln!(s, "    \"max_trial_p3\": {}", num(cert.max_trial_p3));
                    let _ = writeln!(s, "  }}");
                }
            }
            s.push_str("}\n");
            s
        }
        Format::Csv => {
            let mut s = String::from("xi,kappa,eta_ci,t_m\n");
            let _ = writeln!(
                s,
                "{},{},{},{}",
                num(report.xi),
                num(report.kappa),
                num(report.eta_ci),
                num(report.t_m)
            );
            s
        }
    };
    emit(&args.out, &content)
}

fn trajectory_content(traj: &Trajectory, format: Format) -> String {
    match format {
        Format::Csv => traj.to_csv(),
        Format::Json => {
            let column = |f: &dyn Fn(&ReducedState) -> f64| -> String {
                traj.states
                    .iter()
                    .map(|s| num(f(s)))
                    .collect::<Vec<_>>()
                    .join(", ")
            };
            let times = traj
                .times
                .iter()
                .map(|&t| num(t))
                .collect::<Vec<_>>()
                .join(", ");
            let theta3 = traj
                .theta3
                .iter()
                .map(|&t| num(t))
                .collect::<Vec<_>>()
                .join(", ");
            let mut s = String::from("{\n");
            let _ = writeln!(s, "  \"t\": [{times}],");
            let _ = writeln!(s, "  \"z1\": [{}],", column(&|st| st.z1));
            let _ = writeln!(s, "  \"x1\": [{}],", column(&|st| st.x1));
            let _ = writeln!(s, "  \"y2\": [{}],", column(&|st| st.y2));
            let _ = writeln!(s, "  \"x3\": [{}],", column(&|st| st.x3));
            let _ = writeln!(s, "  \"z3\": [{}],", column(&|st| st.z3));
            let _ = writeln!(s, "  \"theta3\": [{theta3}]");
            s.push_str("}\n");
            s
        }
    }
}

fn cinept_cmd(args: CineptArgs) -> Result<()> {
    let params = args.grid.params()?;
    let pulse = PulseProgram::cinept(params.xi, params.horizon)?;
    let traj = propagate_reduced(ReducedState::initial_order(), &pulse, &params)?;
    emit(&args.out, &trajectory_content(&traj, args.format))
}

fn evolve_cmd(args: EvolveArgs) -> Result<()> {
    let params = args.grid.params()?;
    let pulse = args.source.load(params.horizon)?;
    let traj = propagate_reduced(ReducedState::initial_order(), &pulse, &params)?;
    emit(&args.out, &trajectory_content(&traj, args.format))
}

fn optimize_cmd(args: OptimizeArgs) -> Result<()> {
    let params = args.grid.params()?;
    let (a, sigma) = args.init;
    let init = PulseProgram::gaussian(a, sigma, params.horizon)?;
    let result = grape_optimize(&params, &init, args.max_iters, args.tol)?;
    result.pulse.write(&args.out)?;
    let mut s = String::from("{\n");
    let _ = writeln!(s, "  \"xi\": {},", num(params.xi));
    let _ = writeln!(s, "  \"efficiency\": {},", num(result.efficiency));
    let _ = writeln!(s, "  \"iterations\": {},", result.iterations);
    let _ = writeln!(s, "  \"gradient_norm\": {},", num(result.gradient_norm));
    let _ = writeln!(s, "  \"converged\": {},", result.converged);
    let _ = writeln!(s, "  \"pulse_file\": \"{}\"", args.out.display());
    s.push_str("}\n");
    print!("{s}");
    Ok(())
}

fn optimize_gaussian_cmd(args: OptimizeGaussianArgs) -> Result<()> {
    let params = args.grid.params()?;
    let a_box = args.a_range.unwrap_or(A_BOX);
    let sigma_box = args.sigma_range.unwrap_or(SIGMA_BOX);
    let (a, sigma, eff) = optimize_gaussian_in(&params, a_box, sigma_box)?;
    if let Some(path) = &args.out {
        PulseProgram::gaussian(a, sigma, params.horizon)?.write(path)?;
    }
    let mut s = String::from("{\n");
    let _ = writeln!(s, "  \"xi\": {},", num(params.xi));
    let _ = writeln!(s, "  \"A\": {},", num(a));
    let _ = writeln!(s, "  \"sigma\": {},", num(sigma));
    let _ = writeln!(s, "  \"efficiency\": {}", num(eff));
    s.push_str("}\n");
    print!("{s}");
    Ok(())
}

fn sweep_rows_csv(rows: &[SweepRow]) -> String {
    let mut s = String::from("xi,A,sigma,eff_gaussian,eff_descent\n");
    for row in rows {
        let _ = writeln!(
            s,
            "{},{},{},{},{}",
            num(row.xi),
            num(row.a_opt),
            num(row.sigma_opt),
            num(row.eff_gaussian),
            num(row.eff_descent)
        );
    }
    s
}

fn sweep_rows_json(rows: &[SweepRow]) -> String {
    let mut s = String::from("[\n");
    for (i, row) in rows.iter().enumerate() {
        let sep = if i + 1 == rows.len() { "" } else { "," };
        let _ = writeln!(
            s,
            "  {{\"xi\": {}, \"A\": {}, \"sigma\": {}, \"eff_gaussian\": {}, \"eff_descent\": {}}}{sep}",
            num(row.xi),
            num(row.a_opt),
            num(row.sigma_opt),
            num(row.eff_gaussian),
            num(row.eff_descent)
        );
    }
    s.push_str("]\n");
    s
}

fn sweep_cmd(args: SweepArgs) -> Result<()> {
    let xis: Vec<f64> = if args.source.table1 {
        TABLE_XIS.to_vec()
    } else {
        args.source.xis.clone().unwrap_or_default()
    };
    let rows = sweep_table(&xis)?;
    let content = match args.format {
        Format::Csv => sweep_rows_csv(&rows),
        Format::Json => sweep_rows_json(&rows),
    };
    emit(&args.out, &content)
}

fn grid_csv<T: std::fmt::Display>(
    grid: &RobustnessGrid,
    cell: impl Fn(usize, usize) -> T,
) -> String {
    let mut s = String::from("A");
    for sigma in &grid.sigma_axis {
        let _ = write!(s, ",{}", num(*sigma));
    }
    s.push('\n');
    for (i, a) in grid.a_axis.iter().enumerate() {
        let _ = write!(s, "{}", num(*a));
        for j in 0..grid.sigma_axis.len() {
            let _ = write!(s, ",{}", cell(i, j));
        }
        s.push('\n');
    }
    s
}

fn legend_json(grid: &RobustnessGrid) -> String {
    let mut s = String::from("{\n");
    let _ = writeln!(s, "  \"xi\": {},", num(grid.xi));
    let _ = writeln!(s, "  \"bands\": [");
    let edges = optimizer::BAND_EDGES;
    for (i, (label, lo)) in edges.iter().enumerate() {
        let hi = if i == 0 {
            "null".to_string()
        } else {
            num(edges[i - 1].1)
        };
        let _ = writeln!(
            s,
            "    {{\"label\": \"{label}\", \"min\": {}, \"max\": {hi}}},",
            num(*lo)
        );
    }
    let _ = writeln!(
        s,
        "    {{\"label\": \"black\", \"min\": null, \"max\": {}}}",
        num(edges[edges.len() - 1].1)
    );
    let _ = writeln!(s, "  ]");
    s.push_str("}\n");
    s
}

fn with_suffix(base: &Path, suffix: &str) -> PathBuf {
    let mut name = base.as_os_str().to_os_string();
    name.push(suffix);
    PathBuf::from(name)
}

fn robustness_cmd(args: RobustnessArgs) -> Result<()> {
    let grid = robustness_grid(args.xi, args.a_range, args.sigma_range)?;
    fs::write(
        with_suffix(&args.out, ".csv"),
        grid_csv(&grid, |i, j| num(grid.efficiency[i][j])),
    )?;
    fs::write(
        with_suffix(&args.out, ".bands.csv"),
        grid_csv(&grid, |i, j| grid.bands[i][j]),
    )?;
    fs::write(with_suffix(&args.out, ".legend.json"), legend_json(&grid))?;
    Ok(())
}

fn side_by_side_csv(reduced: &Trajectory, oracle: &Trajectory) -> String {
    let mut s = String::from(
        "t,z1_reduced,x1_reduced,y2_reduced,x3_reduced,z3_reduced,\
         z1_oracle,x1_oracle,y2_oracle,x3_oracle,z3_oracle\n",
    );
    for ((t, r), o) in reduced
        .times
        .iter()
        .zip(&reduced.states)
        .zip(&oracle.states)
    {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{},{},{},{}",
            num(*t),
            num(r.z1),
            num(r.x1),
            num(r.y2),
            num(r.x3),
            num(r.z3),
            num(o.z1),
            num(o.x1),
            num(o.y2),
            num(o.x3),
            num(o.z3)
        );
    }
    s
}

fn max_deviation(a: &Trajectory, b: &Trajectory) -> f64 {
    a.states
        .iter()
        .zip(&b.states)
        .map(|(x, y)| (x.to_vector() - y.to_vector()).amax())
        .fold(0.0, f64::max)
}

fn oracle_check_cmd(args: OracleCheckArgs) -> Result<()> {
    let params = args.grid.params()?;
    // Random mode: many pulses, no trajectory dump.
    if let Some(n) = args.source.random {
        if args.out.is_some() {
            return Err(invalid(
                "--out is only available for single-pulse oracle checks",
            ));
        }
        if n == 0 {
            return Err(invalid("--random needs at least one pulse"));
        }
        let mut worst: f64 = 0.0;
        for i in 0..n {
            let pulse = random_pulse(1.5, params.steps, params.horizon, args.seed + i as u64)?;
            let dev = crate::lindblad::compare_reduced(&pulse, &params).inspect_err(|_| {
                println!("random[{i}] seed={}: FAIL", args.seed + i as u64);
            })?;
            println!(
                "random[{i}] seed={}: max_deviation={} PASS",
                args.seed + i as u64,
                num(dev)
            );
            worst = worst.max(dev);
        }
        println!(
            "worst over {n} pulses: {} (tolerance {})",
            num(worst),
            num(ORACLE_TOLERANCE)
        );
        return Ok(());
    }

    let (label, pulse) = if let Some(&(a, sigma)) = args.source.gaussian.as_ref() {
        (
            format!("gaussian({a},{sigma})"),
            PulseProgram::gaussian(a, sigma, params.horizon)?,
        )
    } else if let Some(path) = &args.source.pulse {
        (
            format!("file({})", path.display()),
            PulseProgram::read(path)?,
        )
    } else if args.source.cinept {
        (
            "cinept".to_string(),
            PulseProgram::cinept(params.xi, params.horizon)?,
        )
    } else {
        return Err(invalid("provide exactly one pulse source"));
    };

    let oracle = evolve_density(&pulse, &params)?;
    let reduced = propagate_reduced(ReducedState::initial_order(), &pulse, &params)?;
    let dev = max_deviation(&reduced, &oracle);
    if let Some(path) = &args.out {
        fs::write(path, side_by_side_csv(&reduced, &oracle))?;
    }
    if dev > ORACLE_TOLERANCE {
        println!("{label} xi={}: max_deviation={} FAIL", params.xi, num(dev));
        return Err(crate::numerical(format!(
            "oracle and reduced model disagree: max deviation {dev} > {ORACLE_TOLERANCE}"
        )));
    }
    println!("{label} xi={}: max_deviation={} PASS", params.xi, num(dev));
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pair_and_range_parsers() {
        assert_eq!(parse_pair("1.11,1.30").unwrap(), (1.11, 1.30));
        assert!(parse_pair("1.11").is_err());
        assert!(parse_pair("a,b").is_err());
        assert_eq!(parse_box("0.5:1.5").unwrap(), (0.5, 1.5));
        assert_eq!(parse_box("0.5:1.5:0.01").unwrap(), (0.5, 1.5));
        assert!(parse_box("0.5").is_err());
        assert_eq!(parse_range("0.5:1.5:0.01").unwrap(), (0.5, 1.5, 0.01));
        assert!(parse_range("0.5:1.5").is_err());
    }

    #[test]
    fn cli_parses_representative_command_lines() {
        Cli::try_parse_from(["spinorder", "bound", "--xi", "1"]).unwrap();
        Cli::try_parse_from([
            "spinorder",
            "evolve",
            "--xi",
            "1",
            "--gaussian",
            "1.11,1.30",
        ])
        .unwrap();
        Cli::try_parse_from(["spinorder", "sweep", "--table1"]).unwrap();
        Cli::try_parse_from(["spinorder", "sweep", "--xis", "1.0,0.5,0.0"]).unwrap();
        Cli::try_parse_from(["spinorder", "oracle-check", "--xi", "0.3", "--random", "5"]).unwrap();
    }

    #[test]
    fn cli_rejects_conflicting_or_missing_sources() {
        assert!(Cli::try_parse_from(["spinorder", "evolve", "--xi", "1"]).is_err());
        assert!(Cli::try_parse_from(["spinorder", "sweep", "--table1", "--xis", "1.0",]).is_err());
        assert!(Cli::try_parse_from([
            "spinorder",
            "evolve",
            "--xi",
            "1",
            "--gaussian",
            "1.11,1.30",
            "--pulse",
            "p.csv",
        ])
        .is_err());
    }

    #[test]
    fn suffix_paths_are_appended_not_replaced() {
        let base = PathBuf::from("maps/run1");
        assert_eq!(with_suffix(&base, ".csv"), PathBuf::from("maps/run1.csv"));
        assert_eq!(
            with_suffix(&base, ".legend.json"),
            PathBuf::from("maps/run1.legend.json")
        );
    }
}
