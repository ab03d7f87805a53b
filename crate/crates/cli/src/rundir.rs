//! Run-directory layout and the state files shared by `solve`, `oracle` and
//! `compare`.
//!
//! ```text
//! <run>/config.toml          effective configuration
//! <run>/problem.toml         resolved problem, used as the identity check
//! <run>/trace.csv            one row per epoch
//! <run>/solutions.csv        k, lambda, epoch, symmetry, parity, l_de
//! <run>/solutions/<k>.csv    x, f, f', f''
//! <run>/solutions/<k>.ckpt   network checkpoint
//! <run>/summary.txt
//! <run>/plots/*.svg
//! ```
//!
//! An oracle directory holds `problem.toml`, `spectrum.csv` (k, lambda),
//! `states/<k>.csv` (x, f) and, where a closed form exists, `analytic.csv`.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use eigenpinn::network::write_checkpoint;
use eigenpinn::oracle::StateSample;
use eigenpinn::problems::Problem;
use eigenpinn::trainer::{AcceptedSolution, TraceRow};

use crate::csvio::{self, fmt, Appender};

pub const TRACE_HEADER: [&str; 9] = ["epoch", "l_de", "l_norm", "l_orth", "l_drive", "total", "lambda", "symmetry", "event"];
pub const SOLUTION_HEADER: [&str; 4] = ["x", "f", "f'", "f''"];
pub const INDEX_HEADER: [&str; 6] = ["k", "lambda", "epoch", "symmetry", "parity", "l_de"];

pub fn write_problem(dir: &Path, problem: &Problem) -> Result<()> {
    let text = toml::to_string(problem).context("serializing the problem")?;
    csvio::write_text(&dir.join("problem.toml"), &text)
}

pub fn read_problem(dir: &Path) -> Result<Problem> {
    let path = dir.join("problem.toml");
    let text = fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
    toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

pub fn trace_record(row: &TraceRow) -> Vec<String> {
    let l = &row.loss;
    let events: Vec<&str> = row.events.iter().map(|e| e.as_str()).collect();
    vec![
        row.epoch.to_string(),
        fmt(l.l_de),
        fmt(l.l_norm),
        fmt(l.l_orth),
        fmt(l.l_drive),
        fmt(l.total),
        fmt(row.lambda),
        row.symmetry.as_str().to_string(),
        events.join("|"),
    ]
}

/// Incremental writer for a run directory. Rows are buffered; accepted
/// solutions are written in full and flush everything written so far.
pub struct RunWriter {
    pub dir: PathBuf,
    trace: Appender,
    index: Appender,
    accepted: usize,
}

impl RunWriter {
    pub fn create(dir: &Path) -> Result<Self> {
        fs::create_dir_all(dir.join("solutions")).with_context(|| format!("creating {}", dir.display()))?;
        Ok(RunWriter {
            dir: dir.to_path_buf(),
            trace: Appender::create(&dir.join("trace.csv"), &TRACE_HEADER)?,
            index: Appender::create(&dir.join("solutions.csv"), &INDEX_HEADER)?,
            accepted: 0,
        })
    }

    pub fn epoch(&mut self, row: &TraceRow) -> Result<()> {
        self.trace.row(&trace_record(row))
    }

    pub fn accept(&mut self, s: &AcceptedSolution) -> Result<()> {
        let k = self.accepted;
        let sol = self.dir.join("solutions");
        let (f, d1, d2): (Vec<f64>, Vec<f64>, Vec<f64>) =
            (s.f.iter().map(|j| j.v).collect(), s.f.iter().map(|j| j.d1).collect(), s.f.iter().map(|j| j.d2).collect());
        csvio::write_columns(&sol.join(format!("{k}.csv")), &SOLUTION_HEADER, &[&s.grid, &f, &d1, &d2])?;
        csvio::write_text(&sol.join(format!("{k}.ckpt")), &write_checkpoint(&s.net))?;
        self.index.row(&[
            k.to_string(),
            fmt(s.lambda),
            s.epoch.to_string(),
            s.symmetry.as_str().to_string(),
            s.parity.map_or("", |p| p.as_str()).to_string(),
            fmt(s.l_de),
        ])?;
        self.accepted += 1;
        self.flush()
    }

    pub fn flush(&mut self) -> Result<()> {
        self.index.flush()?;
        self.trace.flush()
    }
}

/// Accepted states of a run directory, in acceptance order.
pub fn read_run_states(dir: &Path) -> Result<Vec<StateSample>> {
    let cols = csvio::read_columns(&dir.join("solutions.csv"), &["k", "lambda"])?;
    let mut out = Vec::new();
    for (k, lambda) in cols[0].iter().zip(&cols[1]) {
        let path = dir.join("solutions").join(format!("{}.csv", *k as usize));
        let xf = csvio::read_columns(&path, &["x", "f"])?;
        out.push(StateSample { lambda: *lambda, xs: xf[0].clone(), f: xf[1].clone() });
    }
    Ok(out)
}

pub fn write_oracle_states(dir: &Path, states: &[StateSample]) -> Result<()> {
    let sdir = dir.join("states");
    fs::create_dir_all(&sdir).with_context(|| format!("creating {}", sdir.display()))?;
    csvio::write_table(
        &dir.join("spectrum.csv"),
        &["k", "lambda"],
        states.iter().enumerate().map(|(k, s)| vec![k.to_string(), fmt(s.lambda)]),
    )?;
    for (k, s) in states.iter().enumerate() {
        csvio::write_columns(&sdir.join(format!("{k}.csv")), &["x", "f"], &[&s.xs, &s.f])?;
    }
    Ok(())
}

pub fn read_oracle_states(dir: &Path) -> Result<Vec<StateSample>> {
    let cols = csvio::read_columns(&dir.join("spectrum.csv"), &["k", "lambda"])?;
    let mut out = Vec::new();
    for (k, lambda) in cols[0].iter().zip(&cols[1]) {
        let xf = csvio::read_columns(&dir.join("states").join(format!("{}.csv", *k as usize)), &["x", "f"])?;
        out.push(StateSample { lambda: *lambda, xs: xf[0].clone(), f: xf[1].clone() });
    }
    Ok(out)
}

/// Reference states from either an oracle directory or a run directory.
pub fn read_reference(dir: &Path) -> Result<Vec<StateSample>> {
    if dir.join("spectrum.csv").is_file() {
        read_oracle_states(dir)
    } else if dir.join("solutions.csv").is_file() {
        read_run_states(dir)
    } else {
        bail!("{} is neither an oracle nor a run directory", dir.display())
    }
}
