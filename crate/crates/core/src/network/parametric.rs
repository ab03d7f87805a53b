use serde::{Deserialize, Serialize};

use crate::dualgrad::{Jet, Real};

/// Shape of the boundary factor `g(x)` in `f = f_b + g(x)·N(x)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParametricKind {
    /// `(1 − e^{−(x−x_L)})(1 − e^{−(x−x_R)})`
    TwoSided,
    /// `1 − e^{−(x−x_R)}`
    OneSidedRight,
    /// `(1 − e^{−(x−x_L)})(1 − e^{x−x_R})`, even about 0 when `x_L = −x_R`.
    TwoSidedSymmetric,
    /// `e^{−κ(x−x_L)} − e^{−κ(x_R−x_L)}`: the one-sided factor divided by
    /// `−e^{x_R−x_L}` when `κ = 1`, so it stays bounded by 1 on the domain.
    OneSidedRightDecaying,
}

impl ParametricKind {
    pub fn is_two_sided(self) -> bool {
        matches!(self, ParametricKind::TwoSided | ParametricKind::TwoSidedSymmetric)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParametricSpec {
    pub kind: ParametricKind,
    pub x_l: f64,
    pub x_r: f64,
    pub f_b: f64,
    /// Decay rate `κ` of [`ParametricKind::OneSidedRightDecaying`].
    pub decay: f64,
}

impl ParametricSpec {
    pub fn g<T: Real>(&self, x: Jet<T>) -> Jet<T> {
        let one = Jet::lift_const(x.v, 1.0);
        // 1 − e^{−(x−a)}
        let left = |a: f64| one.sub(x.affine(-1.0, a).exp());
        // 1 − e^{x−a}
        let right_bounded = |a: f64| one.sub(x.affine(1.0, -a).exp());
        match self.kind {
            ParametricKind::TwoSided => left(self.x_l).mul(left(self.x_r)),
            ParametricKind::OneSidedRight => left(self.x_r),
            ParametricKind::TwoSidedSymmetric => left(self.x_l).mul(right_bounded(self.x_r)),
            ParametricKind::OneSidedRightDecaying => {
                let k = self.decay;
                let floor = Jet::lift_const(x.v, (-k * (self.x_r - self.x_l)).exp());
                x.affine(-k, k * self.x_l).exp().sub(floor)
            }
        }
    }

    /// `f_b + g(x)·n` with derivatives propagated through `g`.
    pub fn wrap<T: Real>(&self, n: Jet<T>, x: Jet<T>) -> Jet<T> {
        let mut f = self.g(x).mul(n);
        f.v = f.v + self.f_b;
        f
    }
}

pub fn parametric_wrap<T: Real>(spec: &ParametricSpec, n: Jet<T>, x: Jet<T>) -> Jet<T> {
    spec.wrap(n, x)
}
