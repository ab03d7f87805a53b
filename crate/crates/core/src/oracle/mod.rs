//! Classical reference spectra: a finite-difference eigensolver for any
//! [`Problem`], closed-form single-well bound states, the analytic hydrogen
//! levels, and the error table comparing a set of states against a reference.

pub mod tridiag;
pub mod wells;

use crate::error::{contract, Result};
use crate::problems::{OperatorKind, PotentialSpec, Problem};
use crate::trainer::SolveReport;

pub use tridiag::SymTridiagonal;
pub use wells::{well_bound_states, AnalyticWellSolution};

/// Default number of interior grid points for oracle spectra.
pub const DEFAULT_GRID: usize = 4000;

#[derive(Clone, Debug, PartialEq)]
pub struct FdSpectrum {
    /// Interior nodes; the Dirichlet end points are not stored.
    pub grid: Vec<f64>,
    pub eigenvalues: Vec<f64>,
    /// One vector per eigenvalue, sampled on `grid`, with unit discrete norm
    /// `Σ v_i² w(x_i) dx = 1` under the problem's inner-product weight.
    pub eigenvectors: Vec<Vec<f64>>,
    pub dx: f64,
}

/// Central-difference Hamiltonian on `grid_points` interior nodes.
///
/// Radial problems are discretized in `u = r·R`, where the operator becomes
/// `−½u'' + (−1/r + l(l+1)/(2r²))u`; vectors are mapped back to `R`.
pub fn fd_hamiltonian(problem: &Problem, grid_points: usize) -> Result<(Vec<f64>, SymTridiagonal, f64)> {
    if grid_points < 50 {
        return Err(contract(format!("finite-difference grid needs at least 50 points, got {grid_points}")));
    }
    problem.potential.validate()?;
    problem.domain.validate()?;
    let (a, b) = (problem.domain.x_l, problem.domain.x_r);
    let h = (b - a) / (grid_points + 1) as f64;
    let grid: Vec<f64> = (1..=grid_points).map(|i| a + i as f64 * h).collect();
    let kinetic = 1.0 / (h * h);
    let diag = match problem.operator {
        OperatorKind::Cartesian1D => grid
            .iter()
            .map(|&x| Ok(kinetic + problem.potential.cell_average(x, h)?))
            .collect::<Result<Vec<_>>>()?,
        OperatorKind::RadialHydrogen { l } => {
            if !matches!(problem.potential, PotentialSpec::Coulomb) || a < 0.0 {
                return Err(contract("radial oracle needs a Coulomb potential on r >= 0"));
            }
            let ll = (l * (l + 1)) as f64;
            grid.iter().map(|&r| Ok(kinetic - 1.0 / r + ll / (2.0 * r * r))).collect::<Result<Vec<_>>>()?
        }
    };
    let off = vec![-0.5 * kinetic; grid_points - 1];
    Ok((grid, SymTridiagonal::new(diag, off)?, h))
}

pub fn fd_spectrum(problem: &Problem, grid_points: usize, k: usize) -> Result<FdSpectrum> {
    let (grid, t, h) = fd_hamiltonian(problem, grid_points)?;
    let (eigenvalues, vectors) = t.lowest(k)?;
    let eigenvectors = vectors
        .into_iter()
        .map(|u| {
            // unit Euclidean norm → unit L² norm
            let s = h.sqrt().recip();
            match problem.operator {
                OperatorKind::Cartesian1D => u.iter().map(|v| v * s).collect(),
                OperatorKind::RadialHydrogen { .. } => {
                    u.iter().zip(&grid).map(|(v, r)| v * s / r).collect()
                }
            }
        })
        .collect();
    Ok(FdSpectrum { grid, eigenvalues, eigenvectors, dx: h })
}

/// `−1/(2n²)`.
pub fn hydrogen_analytic_energy(n: u32) -> Result<f64> {
    if n == 0 {
        return Err(contract("hydrogen principal quantum number must be >= 1"));
    }
    Ok(-0.5 / (n as f64 * n as f64))
}

/// `n²π²/(2L²)` for a box of width `L`.
pub fn infinite_well_energy(n: u32, width: f64) -> f64 {
    let k = n as f64 * std::f64::consts::PI / width;
    0.5 * k * k
}

/// One eigenpair sampled on a grid.
#[derive(Clone, Debug, PartialEq)]
pub struct StateSample {
    pub lambda: f64,
    pub xs: Vec<f64>,
    pub f: Vec<f64>,
}

impl FdSpectrum {
    pub fn states(&self) -> Vec<StateSample> {
        self.eigenvalues
            .iter()
            .zip(&self.eigenvectors)
            .map(|(&lambda, v)| StateSample { lambda, xs: self.grid.clone(), f: v.clone() })
            .collect()
    }
}

impl AnalyticWellSolution {
    pub fn sample(&self, xs: &[f64]) -> StateSample {
        StateSample { lambda: self.energy, xs: xs.to_vec(), f: xs.iter().map(|&x| self.value(x)).collect() }
    }
}

/// Accepted solutions of a run as state samples, ascending in `λ`.
pub fn report_states(report: &SolveReport) -> Vec<StateSample> {
    let mut out: Vec<StateSample> = report
        .solutions
        .iter()
        .map(|s| StateSample { lambda: s.lambda, xs: s.grid.clone(), f: s.f.iter().map(|j| j.v).collect() })
        .collect();
    out.sort_by(|a, b| a.lambda.total_cmp(&b.lambda));
    out
}

#[derive(Clone, Debug, PartialEq)]
pub struct ErrorRow {
    pub index: usize,
    pub lambda_ref: Option<f64>,
    pub lambda: Option<f64>,
    /// `100·|λ − λ_ref|/|λ_ref|`.
    pub eigenvalue_err_pct: Option<f64>,
    /// Mean squared difference of the unit-normalized, sign-aligned functions
    /// on the reference grid, divided by the reference's peak magnitude.
    pub function_mse: Option<f64>,
}

impl ErrorRow {
    pub fn is_missing(&self) -> bool {
        self.lambda.is_none() || self.lambda_ref.is_none()
    }
}

fn interpolate(xs: &[f64], f: &[f64], x: f64) -> Option<f64> {
    let n = xs.len();
    if n == 0 || x < xs[0] || x > xs[n - 1] {
        return None;
    }
    let j = xs.partition_point(|&p| p <= x);
    if j == 0 {
        return Some(f[0]);
    }
    if j >= n {
        return Some(f[n - 1]);
    }
    let (x0, x1) = (xs[j - 1], xs[j]);
    let t = if x1 > x0 { (x - x0) / (x1 - x0) } else { 0.0 };
    Some(f[j - 1] + t * (f[j] - f[j - 1]))
}

/// Function error of `candidate` against `reference` on the part of the
/// reference grid that the candidate covers.
pub fn function_mse(problem: &Problem, candidate: &StateSample, reference: &StateSample) -> Option<f64> {
    let mut pairs = Vec::new();
    for (&x, &r) in reference.xs.iter().zip(&reference.f) {
        if let Some(c) = interpolate(&candidate.xs, &candidate.f, x) {
            pairs.push((x, c, r));
        }
    }
    if pairs.len() < 2 {
        return None;
    }
    let norm = |sel: fn(&(f64, f64, f64)) -> f64| {
        pairs.iter().map(|p| sel(p).powi(2) * problem.inner_weight(p.0)).sum::<f64>().sqrt()
    };
    let (nc, nr) = (norm(|p| p.1), norm(|p| p.2));
    if nc == 0.0 || nr == 0.0 {
        return None;
    }
    let overlap: f64 = pairs.iter().map(|p| p.1 * p.2 * problem.inner_weight(p.0)).sum();
    let sign = if overlap < 0.0 { -1.0 } else { 1.0 };
    // unit norm in the continuum sense: Σ v² w dx = 1
    let dx = (pairs[pairs.len() - 1].0 - pairs[0].0) / (pairs.len() - 1) as f64;
    let sc = sign / (nc * dx.sqrt());
    let sr = 1.0 / (nr * dx.sqrt());
    let peak = pairs.iter().map(|p| (p.2 * sr).abs()).fold(0.0, f64::max);
    let mse = pairs.iter().map(|p| (p.1 * sc - p.2 * sr).powi(2)).sum::<f64>() / pairs.len() as f64;
    Some(mse / peak)
}

/// Pairs states by ascending eigenvalue and tabulates the errors. Unpaired
/// states on either side produce rows with a missing half.
pub fn compare(problem: &Problem, candidates: &[StateSample], reference: &[StateSample]) -> Vec<ErrorRow> {
    let mut cand: Vec<&StateSample> = candidates.iter().collect();
    cand.sort_by(|a, b| a.lambda.total_cmp(&b.lambda));
    let mut refs: Vec<&StateSample> = reference.iter().collect();
    refs.sort_by(|a, b| a.lambda.total_cmp(&b.lambda));
    (0..cand.len().max(refs.len()))
        .map(|i| {
            let c = cand.get(i);
            let r = refs.get(i);
            let (eig, mse) = match (c, r) {
                (Some(c), Some(r)) => (
                    Some(100.0 * (c.lambda - r.lambda).abs() / r.lambda.abs()),
                    function_mse(problem, c, r),
                ),
                _ => (None, None),
            };
            ErrorRow {
                index: i + 1,
                lambda_ref: r.map(|s| s.lambda),
                lambda: c.map(|s| s.lambda),
                eigenvalue_err_pct: eig,
                function_mse: mse,
            }
        })
        .collect()
}

/// Compares a run with an FD spectrum restricted to the run's grid range.
pub fn compare_report(report: &SolveReport, spectrum: &FdSpectrum) -> Result<Vec<ErrorRow>> {
    if report.solutions.is_empty() {
        return Err(contract("comparison needs at least one accepted solution"));
    }
    Ok(compare(&report.problem, &report_states(report), &spectrum.states()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::{builtin_problem, Builtin, DomainSpec};
    use std::f64::consts::PI;

    #[test]
    fn infinite_well_levels() {
        let p = builtin_problem(Builtin::InfiniteWell);
        let s = fd_spectrum(&p, 2000, 2).unwrap();
        let e1 = PI * PI / 2.0;
        assert!((s.eigenvalues[0] - e1).abs() / e1 < 1e-3);
        assert!((s.eigenvalues[1] - 4.0 * e1).abs() / (4.0 * e1) < 1e-3);
    }

    #[test]
    fn second_order_convergence() {
        let p = builtin_problem(Builtin::InfiniteWell);
        let e1 = PI * PI / 2.0;
        let err = |n: usize| (fd_spectrum(&p, n, 1).unwrap().eigenvalues[0] - e1).abs();
        // n+1 intervals: 100 → 200
        let ratio = err(99) / err(199);
        assert!((ratio - 4.0).abs() < 0.1, "{ratio}");
    }

    #[test]
    fn hydrogen_ground_level() {
        let p = builtin_problem(Builtin::Hydrogen { l: 0 });
        let s = fd_spectrum(&p, DEFAULT_GRID, 1).unwrap();
        assert!((s.eigenvalues[0] + 0.5).abs() / 0.5 < 1e-2, "{}", s.eigenvalues[0]);
    }

    #[test]
    fn vectors_are_orthonormal() {
        let p = builtin_problem(Builtin::DoubleWell);
        let s = fd_spectrum(&p, 1500, 4).unwrap();
        for i in 0..4 {
            for j in 0..4 {
                let d: f64 = s.eigenvectors[i].iter().zip(&s.eigenvectors[j]).map(|(a, b)| a * b * s.dx).sum();
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((d - want).abs() < 1e-10, "{i} {j} {d}");
            }
        }
    }

    #[test]
    fn transcendental_and_fd_agree() {
        let states = well_bound_states(1.0, 20.0).unwrap();
        let mut p = builtin_problem(Builtin::SingleWell);
        p.domain = DomainSpec { x_l: -40.0, x_r: 40.0, no_train: vec![] };
        let fd = fd_spectrum(&p, 40_000, states.len()).unwrap();
        for (s, e) in states.iter().zip(&fd.eigenvalues) {
            assert!((s.energy - e).abs() / s.energy < 1e-4, "{} vs {e}", s.energy);
        }
    }

    #[test]
    fn self_comparison_is_zero() {
        let p = builtin_problem(Builtin::SingleWell);
        let s = fd_spectrum(&p, 600, 3).unwrap().states();
        for row in compare(&p, &s, &s) {
            assert_eq!(row.eigenvalue_err_pct, Some(0.0));
            assert!(row.function_mse.unwrap() < 1e-28);
        }
    }

    #[test]
    fn sign_flip_is_ignored_and_missing_is_marked() {
        let p = builtin_problem(Builtin::SingleWell);
        let s = fd_spectrum(&p, 600, 3).unwrap().states();
        let mut flipped = s[..2].to_vec();
        flipped[0].f.iter_mut().for_each(|v| *v = -3.0 * *v);
        let rows = compare(&p, &flipped, &s);
        assert!(rows[0].function_mse.unwrap() < 1e-28);
        assert!(rows[2].is_missing());
        assert!(!rows[1].is_missing());
    }

    #[test]
    fn hydrogen_energies() {
        assert_eq!(hydrogen_analytic_energy(1).unwrap(), -0.5);
        assert_eq!(hydrogen_analytic_energy(2).unwrap(), -0.125);
        assert!(hydrogen_analytic_energy(0).is_err());
    }
}
