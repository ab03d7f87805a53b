//! Loss terms.
//!
//! The terms are written over any [`Real`] scalar so that the tape route in
//! [`crate::dualgrad`] can differentiate them directly; the training path in
//! [`crate::objective`] applies their hand-derived adjoints.

use serde::{Deserialize, Serialize};

use crate::dualgrad::Real;
use crate::error::{contract, Result};

/// Floor applied to the denominators of the legacy reciprocal losses.
pub const LEGACY_EPS: f64 = 1e-12;
/// Largest exponent the drive loss evaluates.
pub const DRIVE_EXP_CLAMP: f64 = 60.0;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LossWeights {
    pub nu_norm: f64,
    pub nu_orth: f64,
    pub nu_drive: f64,
    pub nu_f: f64,
    pub nu_lambda: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        LossWeights { nu_norm: 1.0, nu_orth: 1.0, nu_drive: 0.0, nu_f: 0.0, nu_lambda: 0.0 }
    }
}

impl LossWeights {
    pub fn validate(&self) -> Result<()> {
        let all = [self.nu_norm, self.nu_orth, self.nu_drive, self.nu_f, self.nu_lambda];
        if all.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(contract("loss weights must be finite and non-negative"));
        }
        Ok(())
    }
}

/// How the overlap with already-found eigenfunctions is penalized.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OrthoForm {
    /// `(Σ ψ_eigen·ψ)²`, in the same sum units as the norm loss.
    #[default]
    SquaredSum,
    /// `(Σ ψ_eigen·ψ·dx)²`
    Squared,
    /// `Σ ψ_eigen·ψ`, the raw dot product.
    Signed,
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct LossBreakdown {
    pub l_de: f64,
    pub l_norm: f64,
    pub l_orth: f64,
    pub l_drive: f64,
    pub l_f: f64,
    pub l_lambda: f64,
    pub total: f64,
}

impl LossBreakdown {
    pub fn assemble(
        w: &LossWeights,
        l_de: f64,
        l_norm: f64,
        l_orth: f64,
        l_drive: f64,
        l_f: f64,
        l_lambda: f64,
    ) -> Self {
        let total = l_de
            + w.nu_norm * l_norm
            + w.nu_orth * l_orth
            + w.nu_drive * l_drive
            + w.nu_f * l_f
            + w.nu_lambda * l_lambda;
        LossBreakdown { l_de, l_norm, l_orth, l_drive, l_f, l_lambda, total }
    }

    pub fn is_finite(&self) -> bool {
        [self.l_de, self.l_norm, self.l_orth, self.l_drive, self.l_f, self.l_lambda, self.total]
            .iter()
            .all(|v| v.is_finite())
    }
}

/// Mean squared residual.
pub fn l_de<T: Real>(residuals: &[T]) -> Result<T> {
    let first = residuals.first().ok_or_else(|| contract("L_DE of an empty batch"))?;
    let mut acc = first.lift(0.0);
    for &r in residuals {
        acc = acc + r * r;
    }
    Ok(acc * (1.0 / residuals.len() as f64))
}

/// `(Σ f_i² − M/(x_R − x_L))²`
pub fn l_norm<T: Real>(f_values: &[T], m: usize, x_l: f64, x_r: f64) -> Result<T> {
    if !(x_r > x_l) {
        return Err(contract("L_norm needs x_R > x_L"));
    }
    let first = f_values.first().ok_or_else(|| contract("L_norm of an empty batch"))?;
    let mut s = first.lift(0.0);
    for &f in f_values {
        s = s + f * f;
    }
    let d = s + (-(m as f64) / (x_r - x_l));
    Ok(d * d)
}

/// Overlap penalty between the current prediction and the sum of accepted
/// eigenfunctions. Both lists must be sampled at the same points.
pub fn l_orth<T: Real>(psi_eigen: &[f64], psi: &[T], dx: f64, form: OrthoForm) -> Result<T> {
    if psi_eigen.len() != psi.len() {
        return Err(contract(format!(
            "L_orth length mismatch: {} vs {}",
            psi_eigen.len(),
            psi.len()
        )));
    }
    let first = psi.first().ok_or_else(|| contract("L_orth of an empty batch"))?;
    let mut dot = first.lift(0.0);
    for (&e, &p) in psi_eigen.iter().zip(psi) {
        dot = dot + p * e;
    }
    Ok(match form {
        OrthoForm::SquaredSum => dot * dot,
        OrthoForm::Squared => {
            let o = dot * dx;
            o * o
        }
        OrthoForm::Signed => dot,
    })
}

/// `e^{−λ + c}`, with the exponent clamped at [`DRIVE_EXP_CLAMP`].
pub fn l_drive<T: Real>(lambda: T, c: f64) -> T {
    if -lambda.value() + c > DRIVE_EXP_CLAMP {
        lambda.lift(DRIVE_EXP_CLAMP.exp())
    } else {
        (-lambda + c).exp()
    }
}

/// Step schedule for the drive offset `c`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DriveSchedule {
    pub c0: f64,
    pub increment: f64,
    pub every: usize,
}

impl Default for DriveSchedule {
    fn default() -> Self {
        DriveSchedule { c0: 0.0, increment: 1.0, every: 1000 }
    }
}

impl DriveSchedule {
    pub fn schedule_c(&self, epoch: usize) -> f64 {
        if self.every == 0 {
            return self.c0;
        }
        self.c0 + self.increment * (epoch / self.every) as f64
    }
}

/// `(1/mean(f²), 1/λ²)` with floored denominators.
pub fn l_legacy<T: Real>(f_values: &[T], lambda: T) -> (T, T) {
    let one = lambda.lift(1.0);
    let mean_sq = if f_values.is_empty() {
        lambda.lift(0.0)
    } else {
        let mut s = lambda.lift(0.0);
        for &f in f_values {
            s = s + f * f;
        }
        s * (1.0 / f_values.len() as f64)
    };
    let l_f = if mean_sq.value() < LEGACY_EPS {
        lambda.lift(1.0 / LEGACY_EPS)
    } else {
        one * mean_sq.recip()
    };
    let lam_sq = lambda * lambda;
    let l_lambda = if lam_sq.value() < LEGACY_EPS {
        lambda.lift(1.0 / LEGACY_EPS)
    } else {
        lam_sq.recip()
    };
    (l_f, l_lambda)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn ground(x: f64) -> f64 {
        std::f64::consts::SQRT_2 * (PI * x).sin()
    }

    #[test]
    fn l_de_values() {
        assert_eq!(l_de(&[0.0, 0.0, 0.0]).unwrap(), 0.0);
        assert_eq!(l_de(&[1.0, -1.0]).unwrap(), 1.0);
        assert!(l_de::<f64>(&[]).is_err());
    }

    #[test]
    fn l_de_of_exact_infinite_well_state() {
        use crate::dualgrad::Jet3;
        use crate::problems::{builtin_problem, residual, Builtin};
        let p = builtin_problem(Builtin::InfiniteWell);
        let m = 200;
        let res: Vec<f64> = (0..m)
            .map(|i| {
                let x = (i as f64 + 0.5) / m as f64;
                let (s, c) = (PI * x).sin_cos();
                let f = Jet3::new(s, PI * c, -PI * PI * s);
                residual(&p, f, x, PI * PI / 2.0).unwrap()
            })
            .collect();
        assert!(l_de(&res).unwrap() < 1e-10);
    }

    #[test]
    fn l_norm_values() {
        assert_eq!(l_norm(&vec![0.0; 100], 100, 0.0, 10.0).unwrap(), 100.0);
        // Σ f² = 4 = M / (x_R − x_L)
        assert_eq!(l_norm(&[1.0, 1.0, 1.0, 1.0], 4, 0.0, 1.0).unwrap(), 0.0);
        assert!(l_norm(&[1.0], 1, 1.0, 1.0).is_err());

        let m = 1000;
        let f: Vec<f64> = (0..m).map(|i| ground((i as f64 + 0.5) / m as f64)).collect();
        assert!(l_norm(&f, m, 0.0, 1.0).unwrap() < 1e-3);
    }

    #[test]
    fn l_orth_values() {
        let m = 1000;
        let dx = 1.0 / m as f64;
        let xs: Vec<f64> = (0..m).map(|i| (i as f64 + 0.5) * dx).collect();
        let a: Vec<f64> = xs.iter().map(|&x| ground(x)).collect();
        let b: Vec<f64> = xs.iter().map(|&x| std::f64::consts::SQRT_2 * (2.0 * PI * x).sin()).collect();
        assert_eq!(l_orth(&vec![0.0; m], &a, dx, OrthoForm::Squared).unwrap(), 0.0);
        assert!((l_orth(&a, &a, dx, OrthoForm::Squared).unwrap() - 1.0).abs() < 1e-6);
        assert!(l_orth(&a, &b, dx, OrthoForm::Squared).unwrap() < 1e-6);
        assert!(l_orth(&a[..3], &b[..4], dx, OrthoForm::Squared).is_err());
        let neg: Vec<f64> = a.iter().map(|v| -v).collect();
        assert!(l_orth(&a, &neg, dx, OrthoForm::Signed).unwrap() < 0.0);
    }

    #[test]
    fn drive_values() {
        assert_eq!(l_drive(1.5, 1.5), 1.0);
        assert!((l_drive(2.0 + 2f64.ln(), 2.0) - 0.5).abs() < 1e-15);
        assert_eq!(l_drive(-100.0, 0.0), DRIVE_EXP_CLAMP.exp());
        let s = DriveSchedule { c0: 1.0, increment: 0.5, every: 100 };
        assert_eq!(s.schedule_c(0), 1.0);
        assert_eq!(s.schedule_c(99), 1.0);
        assert_eq!(s.schedule_c(250), 2.0);
        let b = LossBreakdown::assemble(&LossWeights::default(), 0.1, 0.0, 0.0, 123.0, 0.0, 0.0);
        assert_eq!(b.total, 0.1);
    }

    #[test]
    fn legacy_values() {
        let (_, l_lambda) = l_legacy(&[1.0], 1.0);
        assert_eq!(l_lambda, 1.0);
        let (l_f, _) = l_legacy(&[0.0, 0.0], 1.0);
        assert_eq!(l_f, 1e12);
        let (_, small) = l_legacy(&[1.0], 1e6);
        assert!(small < 1e-11);
    }
}
