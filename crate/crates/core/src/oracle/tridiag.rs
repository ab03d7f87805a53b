//! Symmetric tridiagonal eigenpairs: Sturm-sequence bisection for the
//! values, inverse iteration for the vectors.

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct SymTridiagonal {
    pub diag: Vec<f64>,
    /// `off[i]` couples rows `i` and `i+1`.
    pub off: Vec<f64>,
}

const MAX_BISECT: usize = 200;
const MAX_INVERSE: usize = 8;

impl SymTridiagonal {
    pub fn new(diag: Vec<f64>, off: Vec<f64>) -> Result<Self> {
        if diag.is_empty() || off.len() + 1 != diag.len() {
            return Err(crate::error::contract(format!(
                "tridiagonal shape mismatch: {} diagonal, {} off-diagonal",
                diag.len(),
                off.len()
            )));
        }
        Ok(SymTridiagonal { diag, off })
    }

    pub fn len(&self) -> usize {
        self.diag.len()
    }

    pub fn is_empty(&self) -> bool {
        self.diag.is_empty()
    }

    /// Number of eigenvalues strictly below `sigma`.
    pub fn sturm_count(&self, sigma: f64) -> usize {
        let tiny = f64::MIN_POSITIVE.sqrt();
        let mut count = 0;
        let mut q = 1.0;
        for i in 0..self.diag.len() {
            let e2 = if i == 0 { 0.0 } else { self.off[i - 1] * self.off[i - 1] };
            q = self.diag[i] - sigma - if i == 0 { 0.0 } else { e2 / q };
            if q == 0.0 {
                q = -tiny;
            }
            if q < 0.0 {
                count += 1;
            }
        }
        count
    }

    pub fn gershgorin(&self) -> (f64, f64) {
        let n = self.diag.len();
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for i in 0..n {
            let r = if i > 0 { self.off[i - 1].abs() } else { 0.0 }
                + if i + 1 < n { self.off[i].abs() } else { 0.0 };
            lo = lo.min(self.diag[i] - r);
            hi = hi.max(self.diag[i] + r);
        }
        (lo, hi)
    }

    /// The `k`-th smallest eigenvalue (0-based).
    pub fn eigenvalue(&self, k: usize) -> Result<f64> {
        if k >= self.len() {
            return Err(crate::error::contract(format!("eigenvalue {k} of a {}×{} matrix", self.len(), self.len())));
        }
        let (mut lo, mut hi) = self.gershgorin();
        let pad = 1e-12 * (lo.abs().max(hi.abs()).max(1.0));
        lo -= pad;
        hi += pad;
        for _ in 0..MAX_BISECT {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi || hi - lo <= 4.0 * f64::EPSILON * lo.abs().max(hi.abs()) {
                return Ok(mid);
            }
            if self.sturm_count(mid) > k {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        Err(Error::NoConvergence(format!(
            "bisection for eigenvalue {k} stalled after {MAX_BISECT} steps in [{lo}, {hi}]"
        )))
    }

    pub fn apply(&self, v: &[f64]) -> Vec<f64> {
        let n = self.len();
        (0..n)
            .map(|i| {
                let mut s = self.diag[i] * v[i];
                if i > 0 {
                    s += self.off[i - 1] * v[i - 1];
                }
                if i + 1 < n {
                    s += self.off[i] * v[i + 1];
                }
                s
            })
            .collect()
    }

    /// Unit eigenvector for the eigenvalue `lambda`, orthogonalized against
    /// the unit vectors in `against`.
    pub fn eigenvector(&self, lambda: f64, against: &[&[f64]]) -> Result<Vec<f64>> {
        let n = self.len();
        let scale = {
            let (lo, hi) = self.gershgorin();
            lo.abs().max(hi.abs()).max(1.0)
        };
        let lu = TridiagLu::factor(self, lambda, scale);
        let mut v: Vec<f64> = (0..n).map(|i| 1.0 + ((i * 7919) % 13) as f64 * 1e-3).collect();
        let mut residual = f64::INFINITY;
        for sweep in 0..MAX_INVERSE {
            lu.solve(&mut v);
            for u in against {
                let d = dot(&v, u);
                for (a, b) in v.iter_mut().zip(u.iter()) {
                    *a -= d * b;
                }
            }
            let norm = dot(&v, &v).sqrt();
            if !(norm.is_finite() && norm > 0.0) {
                return Err(Error::NoConvergence(format!("inverse iteration at λ = {lambda} lost the vector")));
            }
            v.iter_mut().for_each(|a| *a /= norm);
            let tv = self.apply(&v);
            residual = tv.iter().zip(&v).map(|(t, a)| (t - lambda * a).powi(2)).sum::<f64>().sqrt();
            if sweep > 0 && residual <= 1e-13 * scale {
                break;
            }
        }
        if residual > 1e-7 * scale {
            return Err(Error::NoConvergence(format!(
                "inverse iteration at λ = {lambda}: residual {residual:e} after {MAX_INVERSE} sweeps"
            )));
        }
        // deterministic sign: first significant entry positive
        let peak = v.iter().fold(0.0f64, |m, a| m.max(a.abs()));
        if let Some(first) = v.iter().find(|a| a.abs() > 1e-3 * peak) {
            if *first < 0.0 {
                v.iter_mut().for_each(|a| *a = -*a);
            }
        }
        Ok(v)
    }

    /// The `k` lowest eigenpairs, ascending.
    pub fn lowest(&self, k: usize) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
        let k = k.min(self.len());
        let values = (0..k).map(|i| self.eigenvalue(i)).collect::<Result<Vec<_>>>()?;
        let mut vectors: Vec<Vec<f64>> = Vec::with_capacity(k);
        for &lam in &values {
            let prev: Vec<&[f64]> = vectors.iter().map(|v| v.as_slice()).collect();
            let v = self.eigenvector(lam, &prev)?;
            vectors.push(v);
        }
        Ok((values, vectors))
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// LU factors of `T − σI` with partial pivoting.
struct TridiagLu {
    dl: Vec<f64>,
    d: Vec<f64>,
    du: Vec<f64>,
    du2: Vec<f64>,
    swapped: Vec<bool>,
}

impl TridiagLu {
    fn factor(t: &SymTridiagonal, sigma: f64, scale: f64) -> Self {
        let n = t.len();
        let mut dl = t.off.clone();
        let mut d: Vec<f64> = t.diag.iter().map(|a| a - sigma).collect();
        let mut du = t.off.clone();
        let mut du2 = vec![0.0; n.saturating_sub(2)];
        let mut swapped = vec![false; n.saturating_sub(1)];
        for i in 0..n.saturating_sub(1) {
            if d[i].abs() >= dl[i].abs() {
                if d[i] != 0.0 {
                    let fact = dl[i] / d[i];
                    dl[i] = fact;
                    d[i + 1] -= fact * du[i];
                }
            } else {
                let fact = d[i] / dl[i];
                d[i] = dl[i];
                dl[i] = fact;
                let temp = du[i];
                du[i] = d[i + 1];
                d[i + 1] = temp - fact * d[i + 1];
                if i + 2 < n {
                    du2[i] = du[i + 1];
                    du[i + 1] = -fact * du[i + 1];
                }
                swapped[i] = true;
            }
        }
        let floor = f64::EPSILON * scale;
        for p in d.iter_mut() {
            if p.abs() < floor {
                *p = if *p < 0.0 { -floor } else { floor };
            }
        }
        TridiagLu { dl, d, du, du2, swapped }
    }

    fn solve(&self, b: &mut [f64]) {
        let n = self.d.len();
        for i in 0..n.saturating_sub(1) {
            if self.swapped[i] {
                let temp = b[i];
                b[i] = b[i + 1];
                b[i + 1] = temp - self.dl[i] * b[i];
            } else {
                b[i + 1] -= self.dl[i] * b[i];
            }
        }
        b[n - 1] /= self.d[n - 1];
        if n > 1 {
            b[n - 2] = (b[n - 2] - self.du[n - 2] * b[n - 1]) / self.d[n - 2];
        }
        for i in (0..n.saturating_sub(2)).rev() {
            b[i] = (b[i] - self.du[i] * b[i + 1] - self.du2[i] * b[i + 2]) / self.d[i];
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    // -1, 2, -1 has eigenvalues 2 − 2cos(jπ/(n+1))
    fn laplacian(n: usize) -> SymTridiagonal {
        SymTridiagonal::new(vec![2.0; n], vec![-1.0; n - 1]).unwrap()
    }

    #[test]
    fn sturm_counts_match_closed_form() {
        let t = laplacian(20);
        for j in 1..=20 {
            let lam = 2.0 - 2.0 * (j as f64 * PI / 21.0).cos();
            assert_eq!(t.sturm_count(lam - 1e-9), j - 1);
            assert_eq!(t.sturm_count(lam + 1e-9), j);
        }
    }

    #[test]
    fn eigenpairs_of_the_discrete_laplacian() {
        let n = 50;
        let t = laplacian(n);
        let (vals, vecs) = t.lowest(5).unwrap();
        for (j, (lam, v)) in vals.iter().zip(&vecs).enumerate() {
            let exact = 2.0 - 2.0 * ((j + 1) as f64 * PI / (n + 1) as f64).cos();
            assert!((lam - exact).abs() < 1e-13, "{lam} vs {exact}");
            let tv = t.apply(v);
            let r: f64 = tv.iter().zip(v).map(|(a, b)| (a - lam * b).powi(2)).sum();
            assert!(r.sqrt() < 1e-10);
        }
        for i in 0..5 {
            for j in 0..5 {
                let d = dot(&vecs[i], &vecs[j]);
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((d - want).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn lu_solve_with_pivoting() {
        // small diagonal forces row swaps
        let t = SymTridiagonal::new(vec![1e-3, 2.0, 1e-3, 4.0], vec![3.0, -1.0, 2.0]).unwrap();
        let lu = TridiagLu::factor(&t, 0.0, 1.0);
        let x = vec![1.0, -2.0, 0.5, 3.0];
        let mut b = t.apply(&x);
        lu.solve(&mut b);
        for (a, e) in b.iter().zip(&x) {
            assert!((a - e).abs() < 1e-12);
        }
    }

    #[test]
    fn shape_errors() {
        assert!(SymTridiagonal::new(vec![1.0, 2.0], vec![]).is_err());
        assert!(laplacian(3).eigenvalue(3).is_err());
    }
}
