use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{Context, Result};
use eigenpinn::config::RunConfig;
use eigenpinn::oracle::{self, fd_spectrum, hydrogen_analytic_energy, infinite_well_energy, ErrorRow, StateSample};
use eigenpinn::parallel::Parallelism;
use eigenpinn::problems::{Builtin, OperatorKind, PotentialSpec, Problem};
use eigenpinn::trainer::{solve_with, Outcome, SolveReport};

use crate::csvio::{self, fmt};
use crate::plots::{thin, Chart, Series};
use crate::rundir::{self, RunWriter};
use crate::{CompareArgs, ExportArgs, OracleArgs, SolveArgs};

pub const EXIT_ERROR: u8 = 1;
pub const EXIT_CONFIG: u8 = 2;
pub const EXIT_INCOMPLETE: u8 = 3;
pub const EXIT_MISMATCH: u8 = 4;

/// An error with a specific exit status.
#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub msg: String,
}

impl std::fmt::Display for Failure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.msg)
    }
}

impl std::error::Error for Failure {}

fn fail(code: u8, msg: impl Into<String>) -> anyhow::Error {
    Failure { code, msg: msg.into() }.into()
}

pub fn load_config(path: &Path) -> Result<RunConfig> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    RunConfig::from_toml(&text).map_err(|e| fail(EXIT_CONFIG, format!("{}: {e}", path.display())))
}

/// Thread setup from `EIGENPINN_THREADS`; `1` selects the sequential path.
fn parallelism() -> Parallelism {
    let threads = std::env::var("EIGENPINN_THREADS").ok().and_then(|v| v.trim().parse::<usize>().ok());
    if threads == Some(1) || !cfg!(feature = "parallel") {
        return Parallelism::Sequential;
    }
    #[cfg(feature = "parallel")]
    if let Some(n) = threads.filter(|n| *n > 1) {
        // a second initialization in the same process is harmless
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    Parallelism::Rayon
}

pub fn solve(args: &SolveArgs, quiet: bool) -> Result<()> {
    let mut cfg = load_config(&args.config)?;
    if let Some(seed) = args.seed {
        cfg.train.rng_seed = seed;
    }
    let problem = cfg.resolve_problem()?;
    let dir = args
        .out
        .clone()
        .or_else(|| cfg.out_dir.as_ref().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from(format!("runs/{}-seed{}", problem.name, cfg.train.rng_seed)));
    let mut writer = RunWriter::create(&dir)?;
    csvio::write_text(&dir.join("config.toml"), &cfg.to_toml()?)?;
    rundir::write_problem(&dir, &problem)?;

    let par = parallelism();
    let started = Instant::now();
    let mut io_error: Option<anyhow::Error> = None;
    let result = solve_with(&problem, &cfg.net, &cfg.train, par, |row, accepted| {
        if io_error.is_some() {
            return;
        }
        let step = writer.epoch(row).and_then(|_| accepted.map_or(Ok(()), |s| writer.accept(s)));
        if let Err(e) = step {
            io_error = Some(e);
        }
        if !quiet && (row.epoch % 1000 == 0 || !row.events.is_empty()) {
            let events: Vec<&str> = row.events.iter().map(|e| e.as_str()).collect();
            eprintln!(
                "epoch {:>6}  L_DE {:.3e}  total {:.3e}  λ {:+.6}  {} {}",
                row.epoch,
                row.loss.l_de,
                row.loss.total,
                row.lambda,
                row.symmetry.as_str(),
                events.join(" ")
            );
        }
    });
    writer.flush()?;
    if let Some(e) = io_error {
        return Err(e);
    }
    let report = result.map_err(|e| fail(EXIT_ERROR, format!("training failed: {e} (partial results kept in {})", dir.display())))?;

    let reference = if args.compare || !args.no_plots {
        fd_spectrum(&problem, oracle::DEFAULT_GRID, cfg.train.target_solution_count.max(report.solutions.len()))
            .ok()
            .map(|s| s.states())
    } else {
        None
    };
    let table = match (&reference, args.compare, report.solutions.is_empty()) {
        (Some(r), true, false) => Some(oracle::compare(&problem, &report_samples(&report), r)),
        _ => None,
    };
    csvio::write_text(&dir.join("summary.txt"), &summary(&cfg, &report, table.as_deref(), started.elapsed().as_secs_f64()))?;
    if !args.no_plots {
        if let Err(e) = write_plots(&dir, &report, reference.as_deref()) {
            if !quiet {
                eprintln!("warning: plots not written: {e:#}");
            }
        }
    }
    if !quiet {
        eprintln!("{} solution(s) in {}", report.solutions.len(), dir.display());
    }
    match report.outcome {
        Outcome::Complete => Ok(()),
        _ => Err(fail(
            EXIT_INCOMPLETE,
            format!(
                "accepted {} of {} requested solutions within {} epochs",
                report.solutions.len(),
                cfg.train.target_solution_count,
                report.epochs_run()
            ),
        )),
    }
}

fn report_samples(report: &SolveReport) -> Vec<StateSample> {
    report
        .solutions
        .iter()
        .map(|s| StateSample { lambda: s.lambda, xs: s.grid.clone(), f: s.f.iter().map(|j| j.v).collect() })
        .collect()
}

fn summary(cfg: &RunConfig, report: &SolveReport, table: Option<&[ErrorRow]>, seconds: f64) -> String {
    let mut s = String::new();
    writeln!(s, "problem   {}", report.problem.name).unwrap();
    writeln!(s, "seed      {}", cfg.train.rng_seed).unwrap();
    writeln!(s, "outcome   {:?}", report.outcome).unwrap();
    writeln!(s, "epochs    {}", report.epochs_run()).unwrap();
    writeln!(s, "seconds   {seconds:.1}").unwrap();
    writeln!(s).unwrap();
    writeln!(s, "{:>3}  {:>22}  {:>7}  {:>8}  {:>6}  {:>10}", "k", "lambda", "epoch", "symmetry", "parity", "l_de").unwrap();
    for (k, a) in report.solutions.iter().enumerate() {
        writeln!(
            s,
            "{k:>3}  {:>22}  {:>7}  {:>8}  {:>6}  {:>10.3e}",
            fmt(a.lambda),
            a.epoch,
            a.symmetry.as_str(),
            a.parity.map_or("-", |p| p.as_str()),
            a.l_de
        )
        .unwrap();
    }
    if let Some(rows) = table {
        writeln!(s).unwrap();
        s.push_str(&error_table_text(rows));
    }
    s
}

fn opt(v: Option<f64>, f: impl Fn(f64) -> String) -> String {
    v.map_or_else(|| "MISSING".to_string(), f)
}

pub fn error_table_text(rows: &[ErrorRow]) -> String {
    let mut s = String::new();
    writeln!(s, "{:>5}  {:>14}  {:>14}  {:>10}  {:>12}", "state", "lambda_ref", "lambda", "eig_err_%", "function_mse").unwrap();
    for r in rows {
        writeln!(
            s,
            "{:>5}  {:>14}  {:>14}  {:>10}  {:>12}",
            r.index,
            opt(r.lambda_ref, |v| format!("{v:.8}")),
            opt(r.lambda, |v| format!("{v:.8}")),
            if r.is_missing() { "MISSING".into() } else { opt(r.eigenvalue_err_pct, |v| format!("{v:.4}")) },
            if r.is_missing() { "MISSING".into() } else { opt(r.function_mse, |v| format!("{v:.3e}")) },
        )
        .unwrap();
    }
    s
}

fn write_plots(dir: &Path, report: &SolveReport, reference: Option<&[StateSample]>) -> Result<()> {
    let pdir = dir.join("plots");
    fs::create_dir_all(&pdir)?;
    let lam: Vec<(f64, f64)> = report.trace.iter().map(|r| (r.epoch as f64, r.lambda)).collect();
    let refs = reference
        .unwrap_or(&[])
        .iter()
        .enumerate()
        .map(|(k, s)| (s.lambda, format!("oracle E{}", k + 1)))
        .collect();
    let chart = Chart {
        title: format!("{}: eigenvalue during training", report.problem.name),
        x_label: "epoch".into(),
        y_label: "λ".into(),
        series: vec![Series { label: "λ".into(), points: thin(lam, 4000), dashed: false }],
        refs,
    };
    csvio::write_text(&pdir.join("lambda.svg"), &chart.render())?;

    let de: Vec<(f64, f64)> =
        report.trace.iter().filter(|r| r.loss.l_de > 0.0).map(|r| (r.epoch as f64, r.loss.l_de.log10())).collect();
    let chart = Chart {
        title: format!("{}: residual loss", report.problem.name),
        x_label: "epoch".into(),
        y_label: "log10 L_DE".into(),
        series: vec![Series { label: "L_DE".into(), points: thin(de, 4000), dashed: false }],
        refs: vec![],
    };
    csvio::write_text(&pdir.join("loss.svg"), &chart.render())?;

    if !report.solutions.is_empty() {
        let problem = &report.problem;
        let mut series = Vec::new();
        for (k, s) in report_samples(report).iter().enumerate() {
            let unit = unit_normalized(problem, s);
            series.push(Series { label: format!("state {k}: λ = {:.5}", s.lambda), points: thin(unit, 800), dashed: false });
        }
        let chart = Chart {
            title: format!("{}: accepted eigenfunctions", problem.name),
            x_label: "x".into(),
            y_label: "f (unit norm)".into(),
            series,
            refs: vec![],
        };
        csvio::write_text(&pdir.join("eigenfunctions.svg"), &chart.render())?;
    }
    Ok(())
}

fn unit_normalized(problem: &Problem, s: &StateSample) -> Vec<(f64, f64)> {
    let n = s.xs.len();
    if n < 2 {
        return vec![];
    }
    let dx = (s.xs[n - 1] - s.xs[0]) / (n - 1) as f64;
    let norm: f64 = s.xs.iter().zip(&s.f).map(|(x, f)| f * f * problem.inner_weight(*x) * dx).sum::<f64>().sqrt();
    let k = if norm > 0.0 { norm.recip() } else { 1.0 };
    s.xs.iter().zip(&s.f).map(|(x, f)| (*x, f * k)).collect()
}

pub fn oracle(args: &OracleArgs, quiet: bool) -> Result<()> {
    let cfg = load_config(&args.config)?;
    let problem = cfg.resolve_problem()?;
    let dir = args.out.clone().unwrap_or_else(|| PathBuf::from(format!("oracle/{}", problem.name)));
    fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    let spectrum = fd_spectrum(&problem, args.grid, args.k).map_err(|e| fail(EXIT_ERROR, e.to_string()))?;
    rundir::write_problem(&dir, &problem)?;
    rundir::write_oracle_states(&dir, &spectrum.states())?;
    let analytic = analytic_levels(&problem, args.k)?;
    if let Some(levels) = &analytic {
        csvio::write_table(
            &dir.join("analytic.csv"),
            &["k", "lambda", "kind"],
            levels.iter().enumerate().map(|(k, (e, kind))| vec![k.to_string(), fmt(*e), kind.clone()]),
        )?;
    }
    if !quiet {
        println!("{:>3}  {:>22}  {:>22}", "k", "finite difference", "closed form");
        for (k, e) in spectrum.eigenvalues.iter().enumerate() {
            let a = analytic.as_ref().and_then(|l| l.get(k)).map_or("-".to_string(), |(v, _)| fmt(*v));
            println!("{k:>3}  {:>22}  {a:>22}", fmt(*e));
        }
    }
    Ok(())
}

/// Closed-form levels where the problem has them.
fn analytic_levels(problem: &Problem, k: usize) -> Result<Option<Vec<(f64, String)>>> {
    Ok(match (&problem.potential, problem.operator) {
        (PotentialSpec::FiniteWell { length, depth }, OperatorKind::Cartesian1D) => Some(
            oracle::well_bound_states(*length, *depth)?
                .iter()
                .take(k)
                .map(|s| (s.energy, format!("bound_{}", s.parity.as_str())))
                .collect(),
        ),
        (PotentialSpec::Coulomb, OperatorKind::RadialHydrogen { l }) => Some(
            (0..k as u32)
                .map(|i| Ok((hydrogen_analytic_energy(l + 1 + i)?, "hydrogen".to_string())))
                .collect::<eigenpinn::Result<Vec<_>>>()?,
        ),
        (PotentialSpec::InfiniteWellBox, OperatorKind::Cartesian1D) => {
            let width = problem.domain.x_r - problem.domain.x_l;
            Some((1..=k as u32).map(|n| (infinite_well_energy(n, width), "box".to_string())).collect())
        }
        (PotentialSpec::Harmonic, OperatorKind::Cartesian1D) => {
            Some((0..k).map(|n| (n as f64 + 0.5, "harmonic".to_string())).collect())
        }
        _ => None,
    })
}

pub fn compare(args: &CompareArgs, quiet: bool) -> Result<()> {
    let run_problem = rundir::read_problem(&args.run)?;
    let ref_problem = rundir::read_problem(&args.oracle)?;
    if run_problem != ref_problem {
        return Err(fail(
            EXIT_MISMATCH,
            format!(
                "refusing to compare: {} solves `{}` but {} describes `{}` with different settings",
                args.run.display(),
                run_problem.name,
                args.oracle.display(),
                ref_problem.name
            ),
        ));
    }
    let candidates = rundir::read_run_states(&args.run)?;
    let reference = rundir::read_reference(&args.oracle)?;
    let rows = oracle::compare(&run_problem, &candidates, &reference);
    let out = args.out.clone().unwrap_or_else(|| args.run.clone());
    fs::create_dir_all(&out)?;
    csvio::write_table(
        &out.join("compare.csv"),
        &["state", "lambda_ref", "lambda", "eig_err_pct", "function_mse", "status"],
        rows.iter().map(|r| {
            let cell = |v: Option<f64>| v.map(fmt).unwrap_or_default();
            vec![
                r.index.to_string(),
                cell(r.lambda_ref),
                cell(r.lambda),
                cell(r.eigenvalue_err_pct),
                cell(r.function_mse),
                if r.is_missing() { "MISSING" } else { "OK" }.to_string(),
            ]
        }),
    )?;
    let text = error_table_text(&rows);
    csvio::write_text(&out.join("compare.txt"), &text)?;
    if !quiet {
        print!("{text}");
    }
    let missing = rows.iter().filter(|r| r.is_missing()).count();
    if missing > 0 {
        return Err(fail(EXIT_INCOMPLETE, format!("{missing} state(s) missing")));
    }
    Ok(())
}

pub fn export(args: &ExportArgs) -> Result<()> {
    let mut cfg = match (&args.builtin, &args.config) {
        (Some(name), None) => {
            let which = Builtin::parse(name).ok_or_else(|| fail(EXIT_CONFIG, format!("unknown builtin problem `{name}`")))?;
            RunConfig::builtin(which)
        }
        (None, Some(path)) => load_config(path)?,
        _ => return Err(fail(EXIT_CONFIG, "give a builtin name or --config")),
    };
    if args.full {
        cfg.problem = Some(cfg.resolve_problem()?);
        cfg.builtin = None;
    }
    let text = cfg.to_toml()?;
    match &args.out {
        Some(path) => csvio::write_text(path, &text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}
