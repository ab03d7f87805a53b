//! Closed-form bound states of a single centered finite well
//! (`V = 0` for `|x| < ℓ/2`, `V0` outside).

use std::f64::consts::FRAC_PI_2;

use crate::error::{contract, Result};
use crate::trainer::Parity;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AnalyticWellSolution {
    pub length: f64,
    pub depth: f64,
    pub k: f64,
    pub alpha: f64,
    pub parity: Parity,
    pub energy: f64,
    /// Interior amplitude: `ψ = c1·sin(kx + δ)` for `|x| ≤ ℓ/2`.
    pub c1: f64,
    /// Exterior amplitude: `ψ = ±c2·e^{−α(|x| − ℓ/2)}` for `|x| > ℓ/2`.
    pub c2: f64,
    pub delta: f64,
}

impl AnalyticWellSolution {
    fn build(length: f64, depth: f64, z: f64, parity: Parity) -> Self {
        let half = 0.5 * length;
        let k = z / half;
        let energy = 0.5 * k * k;
        let alpha = (2.0 * (depth - energy)).max(0.0).sqrt();
        let delta = if parity == Parity::Even { FRAC_PI_2 } else { 0.0 };
        let edge = (k * half + delta).sin();
        let inner = match parity {
            Parity::Odd => half - (k * length).sin() / (2.0 * k),
            _ => half + (k * length).sin() / (2.0 * k),
        };
        // ∫ψ² = c1²·inner + 2·(c1·edge)²/(2α)
        let c1 = (inner + edge * edge / alpha).recip().sqrt();
        AnalyticWellSolution { length, depth, k, alpha, parity, energy, c1, c2: c1 * edge, delta }
    }

    pub fn value(&self, x: f64) -> f64 {
        let half = 0.5 * self.length;
        if x.abs() <= half {
            self.c1 * (self.k * x + self.delta).sin()
        } else {
            let tail = self.c2 * (-self.alpha * (x.abs() - half)).exp();
            if x < 0.0 && self.parity == Parity::Odd {
                -tail
            } else {
                tail
            }
        }
    }

    pub fn slope(&self, x: f64) -> f64 {
        let half = 0.5 * self.length;
        if x.abs() <= half {
            self.c1 * self.k * (self.k * x + self.delta).cos()
        } else {
            let tail = self.c2 * self.alpha * (-self.alpha * (x.abs() - half)).exp();
            match (x < 0.0, self.parity == Parity::Odd) {
                (false, _) => -tail,
                (true, false) => tail,
                (true, true) => -tail,
            }
        }
    }
}

/// Bisection on a bracket where `f(lo) ≤ 0 < f(hi)`, to absolute width `tol`.
fn bisect(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64, tol: f64) -> f64 {
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if f(mid) <= 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// All bound states with `0 < E < V0`, ascending in energy.
///
/// With `z = kℓ/2` and `z0 = ℓ√(2V0)/2` the matching conditions read
/// `z·tan z = √(z0² − z²)` (even) and `−z·cot z = √(z0² − z²)` (odd).
/// Each branch of `tan`/`cot` holds at most one root, so every quarter
/// period below `z0` is bracketed separately.
pub fn well_bound_states(length: f64, depth: f64) -> Result<Vec<AnalyticWellSolution>> {
    if !(length > 0.0 && depth > 0.0 && length.is_finite() && depth.is_finite()) {
        return Err(contract("well length and depth must be positive"));
    }
    let z0 = 0.5 * length * (2.0 * depth).sqrt();
    let tol = 1e-15 * z0.max(1.0);
    let mut out = Vec::new();
    let mut j = 0usize;
    loop {
        let lo = j as f64 * FRAC_PI_2;
        if lo >= z0 {
            break;
        }
        let hi = ((j + 1) as f64 * FRAC_PI_2).min(z0);
        let parity = if j % 2 == 0 { Parity::Even } else { Parity::Odd };
        let f = |z: f64| {
            let lhs = if parity == Parity::Even { z * z.tan() } else { -z / z.tan() };
            lhs - (z0 * z0 - z * z).max(0.0).sqrt()
        };
        // f rises from ≤ 0 at the branch start to +∞ (or to lhs > 0 at z0)
        let a = lo + tol;
        let b = hi - if hi < z0 { tol } else { 0.0 };
        if a < b && f(a) <= 0.0 && f(b) > 0.0 {
            let z = bisect(f, a, b, tol);
            if z < z0 {
                out.push(AnalyticWellSolution::build(length, depth, z, parity));
            }
        }
        j += 1;
    }
    Ok(out)
}
