//! `quantlim`: IDQD verdicts, Fisher reports, level sets, equivalence traces
//! and MLE studies for a system described by a JSON spec.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Parser, Subcommand};

use quantlim_core::cellprob;
use quantlim_core::fim;
use quantlim_core::grid::{Axis, ThetaGrid};
use quantlim_core::identifiability::{self, EQUIV_TOL};
use quantlim_core::idqd;
use quantlim_core::mle::{self, FitOptions};
use quantlim_core::{parse_spec, CellProbabilityTable, OutcomeVector, ParameterPoint, SystemSpec};

#[derive(Parser)]
#[command(name = "quantlim", version, about = "Estimation limits for quantized distributed sensing")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print the IDQD, the refined limits and the theorems they trigger.
    Idqd {
        spec: PathBuf,
        /// Parameter dimension to test; defaults to the spec's dim_theta.
        #[arg(long)]
        dtheta: Option<usize>,
        /// Emit the verdict as JSON instead of a table.
        #[arg(long)]
        json: bool,
    },
    /// Fisher information report at one parameter point (JSON).
    Fim {
        spec: PathBuf,
        /// Comma-separated parameter values, e.g. 0,1.
        #[arg(long, allow_hyphen_values = true)]
        theta: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Cell probability table of every sensor (CSV).
    Table {
        spec: PathBuf,
        #[arg(long, allow_hyphen_values = true)]
        theta: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Pr(outcome | theta) of one sensor over a grid (CSV).
    Levelset {
        spec: PathBuf,
        /// Outcome symbols, 1-based and comma-separated for superquantizers.
        #[arg(long, default_value = "1")]
        outcome: String,
        /// 0-based sensor index.
        #[arg(long, default_value_t = 0)]
        sensor: usize,
        /// Axes `lo:hi:n` (closed) or `(lo:hi:n` (left-open), comma-separated.
        #[arg(long, allow_hyphen_values = true)]
        grid: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Points with the same interval probability as theta0, one per rho (CSV).
    EquivTrace {
        spec: PathBuf,
        /// alpha0,beta0
        #[arg(long, allow_hyphen_values = true)]
        theta0: String,
        /// Either lo:hi:n or a comma-separated list of values in (0, 1).
        #[arg(long, default_value = "0.02:0.98:50")]
        rhos: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Grid pairs whose global outcome distributions agree within tol (JSON).
    Scan {
        spec: PathBuf,
        #[arg(long, allow_hyphen_values = true)]
        grid: String,
        #[arg(long, default_value_t = EQUIV_TOL)]
        tol: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Sample, fit by maximum likelihood, and summarize the spread per seed (CSV).
    Simulate {
        spec: PathBuf,
        #[arg(long, allow_hyphen_values = true)]
        theta: String,
        /// Snapshots per seed.
        #[arg(long)]
        n: u64,
        /// Seeds as lo:hi (inclusive) or a comma-separated list.
        #[arg(long, default_value = "1:20")]
        seeds: String,
        #[arg(long, default_value_t = mle::N_STARTS)]
        n_starts: usize,
        #[arg(long, default_value_t = mle::GRID_POINTS)]
        grid_points: usize,
        /// Tolerance for calling tied maximizers equivalent.
        #[arg(long, default_value_t = 1e-6)]
        equiv_tol: f64,
        /// Emit the full study as JSON instead of CSV.
        #[arg(long)]
        json: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write surface and contour grids of Pr(u = 1 | theta) for a 2-parameter spec.
    Figures {
        spec: PathBuf,
        #[arg(long, default_value = ".")]
        out_dir: PathBuf,
    },
    /// Print the spec in canonical form.
    Canonical { spec: PathBuf },
}

fn parse_list(s: &str) -> anyhow::Result<Vec<f64>> {
    s.split(',')
        .map(|x| {
            let x = x.trim();
            match x {
                "inf" | "+inf" => Ok(f64::INFINITY),
                "-inf" => Ok(f64::NEG_INFINITY),
                _ => x.parse::<f64>().with_context(|| format!("'{x}' is not a number")),
            }
        })
        .collect()
}

fn parse_theta(s: &str) -> anyhow::Result<ParameterPoint> {
    Ok(ParameterPoint(parse_list(s)?))
}

fn parse_rhos(s: &str) -> anyhow::Result<Vec<f64>> {
    if s.contains(':') {
        let a: Axis = s.parse()?;
        Ok(a.values())
    } else {
        parse_list(s)
    }
}

fn parse_seeds(s: &str) -> anyhow::Result<Vec<u64>> {
    if let Some((lo, hi)) = s.split_once(':') {
        let lo: u64 = lo.trim().parse().context("bad seed range")?;
        let hi: u64 = hi.trim().parse().context("bad seed range")?;
        if hi < lo {
            bail!("empty seed range {s}");
        }
        return Ok((lo..=hi).collect());
    }
    s.split(',')
        .map(|x| x.trim().parse::<u64>().with_context(|| format!("bad seed '{x}'")))
        .collect()
}

fn parse_outcome(s: &str) -> anyhow::Result<OutcomeVector> {
    let v = s
        .split(',')
        .map(|x| x.trim().parse::<usize>().with_context(|| format!("bad outcome symbol '{x}'")))
        .collect::<anyhow::Result<Vec<_>>>()?;
    Ok(OutcomeVector(v))
}

fn emit(text: &str, out: Option<&Path>) -> anyhow::Result<()> {
    match out {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display()))?,
        None => print!("{text}"),
    }
    Ok(())
}

/// Axes for the figure grids: mean in [-6, 6] and variance in (0, 10] for an
/// interval design, otherwise the spec's search box.
fn figure_axes(spec: &SystemSpec, n: usize) -> anyhow::Result<Vec<Axis>> {
    if spec.dim_theta != 2 {
        bail!("figures need a 2-parameter spec, this one has {}", spec.dim_theta);
    }
    if let Ok(d) = identifiability::interval_design(spec) {
        let mut axes = vec![Axis::closed(0.0, 0.0, 1); 2];
        axes[d.mean_index] = Axis::closed(-6.0, 6.0, n);
        axes[d.var_index] = Axis::left_open(0.0, 10.0, n - 1);
        return Ok(axes);
    }
    let b = spec
        .search_box
        .as_ref()
        .context("figures need a search_box in the spec for non-interval designs")?;
    Ok((0..2).map(|i| Axis::closed(b.lower[i], b.upper[i], n)).collect())
}

fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Idqd { spec, dtheta, json } => {
            let s = parse_spec(&spec)?;
            let v = idqd::verdict_for_spec(&s, dtheta.unwrap_or(s.dim_theta))?;
            if json {
                println!("{}", v.to_json());
            } else {
                print!("{}", v.table());
            }
        }
        Command::Fim { spec, theta, out } => {
            let s = parse_spec(&spec)?;
            let r = fim::fim(&s, &parse_theta(&theta)?)?;
            // The bound exists only for a nonsingular matrix; null otherwise.
            let crb = fim::crb(&r)
                .ok()
                .map(|c| c.row_iter().map(|row| row.iter().copied().collect::<Vec<f64>>()).collect::<Vec<_>>());
            let mut v: serde_json::Value = serde_json::from_str(&r.to_json())?;
            v["crb"] = serde_json::to_value(crb)?;
            emit(&(serde_json::to_string_pretty(&v)? + "\n"), out.as_deref())?;
        }
        Command::Table { spec, theta, out } => {
            let s = parse_spec(&spec)?;
            let t = parse_theta(&theta)?;
            let mut text = CellProbabilityTable::csv_header(s.dim_theta) + "\n";
            for table in cellprob::tables(&s, &t)? {
                for row in table.csv_rows() {
                    text.push_str(&row);
                    text.push('\n');
                }
            }
            emit(&text, out.as_deref())?;
        }
        Command::Levelset {
            spec,
            outcome,
            sensor,
            grid,
            out,
        } => {
            let s = parse_spec(&spec)?;
            let g: ThetaGrid = grid.parse()?;
            let ls = identifiability::level_set_grid(&s, sensor, &parse_outcome(&outcome)?, &g)?;
            emit(&ls.csv(), out.as_deref())?;
        }
        Command::EquivTrace { spec, theta0, rhos, out } => {
            let s = parse_spec(&spec)?;
            let d = identifiability::interval_design(&s)?;
            let t0 = parse_theta(&theta0)?;
            let [alpha0, beta0] = t0.0[..] else {
                bail!("--theta0 needs two values (alpha0, beta0)");
            };
            let mut full = vec![0.0; s.dim_theta];
            full[d.mean_index] = alpha0;
            full[d.var_index] = beta0;
            s.check_theta(&ParameterPoint(full))?;
            let tr = identifiability::trace_example1((alpha0, beta0), &parse_rhos(&rhos)?, d.a, d.b)?;
            emit(&tr.csv(), out.as_deref())?;
        }
        Command::Scan { spec, grid, tol, out } => {
            let s = parse_spec(&spec)?;
            let g: ThetaGrid = grid.parse()?;
            let pairs = identifiability::injectivity_scan(&s, &g, tol)?;
            emit(&(serde_json::to_string_pretty(&pairs)? + "\n"), out.as_deref())?;
        }
        Command::Simulate {
            spec,
            theta,
            n,
            seeds,
            n_starts,
            grid_points,
            equiv_tol,
            json,
            out,
        } => {
            let s = parse_spec(&spec)?;
            let mut opts = FitOptions::for_spec(&s)?;
            opts.n_starts = n_starts;
            opts.grid_points = grid_points;
            let study = mle::degeneracy_study(&s, &parse_theta(&theta)?, n, &parse_seeds(&seeds)?, &opts, equiv_tol)?;
            let text = if json {
                serde_json::to_string_pretty(&study)? + "\n"
            } else {
                study.csv()
            };
            emit(&text, out.as_deref())?;
            eprintln!(
                "median spread {} over {} seeds; tied maximizers equivalent: {}",
                study.median_spread,
                study.rows.len(),
                study.all_equivalent
            );
        }
        Command::Figures { spec, out_dir } => {
            let s = parse_spec(&spec)?;
            fs::create_dir_all(&out_dir).with_context(|| format!("creating {}", out_dir.display()))?;
            let stem = spec.file_stem().and_then(|x| x.to_str()).unwrap_or("spec");
            let outcome = OutcomeVector(vec![1; s.sensors[0].superquantizer.quantizers.len()]);
            for (kind, n) in [("surface", 61), ("contour", 241)] {
                let g = ThetaGrid::new(figure_axes(&s, n)?);
                let ls = identifiability::level_set_grid(&s, 0, &outcome, &g)?;
                let path = out_dir.join(format!("{stem}_{kind}.csv"));
                emit(&ls.csv(), Some(&path))?;
                eprintln!("wrote {} ({} points)", path.display(), ls.points.len());
            }
        }
        Command::Canonical { spec } => {
            let s = parse_spec(&spec)?;
            println!("{}", s.canonical().to_json_string());
        }
    }
    Ok(())
}

fn init_threads() -> anyhow::Result<()> {
    if let Ok(v) = std::env::var("QUANTLIM_THREADS") {
        let n: usize = v
            .trim()
            .parse()
            .with_context(|| format!("QUANTLIM_THREADS must be a positive integer, got '{v}'"))?;
        if n == 0 {
            bail!("QUANTLIM_THREADS must be a positive integer, got 0");
        }
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    Ok(())
}

/// Exit status: 1 for invalid input, 2 for numerical failure.
fn exit_code(e: &anyhow::Error) -> u8 {
    match e.downcast_ref::<quantlim_core::Error>() {
        Some(core) if !core.is_validation() => 2,
        _ => 1,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match init_threads().and_then(|_| run(cli)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
