//! Problem definitions: potentials, domains, boundary wraps and the
//! differential-operator residual `𝓛f − λf`.
//!
//! Natural units throughout (`ħ = m = 1`, unit Coulomb constant). Well
//! potentials are centered on `x = 0` so that eigenfunction parity is parity
//! about the origin.

use serde::{Deserialize, Serialize};

use crate::dualgrad::{Jet, Real};
use crate::error::{contract, Error, Result};
use crate::network::{ParametricKind, ParametricSpec};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum PotentialSpec {
    /// Zero on `[−ℓ/2, ℓ/2]`, `depth` elsewhere.
    FiniteWell { length: f64, depth: f64 },
    /// `well_count` wells of width `length` separated by `gap`, centered as a
    /// group.
    MultiWell { well_count: usize, length: f64, gap: f64, depth: f64 },
    /// `−1/r`.
    Coulomb,
    /// `V ≡ 0`; the boundary wrap does the confining.
    InfiniteWellBox,
    /// `x²/2`.
    Harmonic,
}

impl PotentialSpec {
    pub fn validate(&self) -> Result<()> {
        match *self {
            PotentialSpec::FiniteWell { length, depth } => {
                if !(length > 0.0 && depth > 0.0) {
                    return Err(contract("finite well needs length > 0 and depth > 0"));
                }
            }
            PotentialSpec::MultiWell { well_count, length, gap, depth } => {
                if well_count < 1 || !(length > 0.0 && depth > 0.0 && gap >= 0.0) {
                    return Err(contract(
                        "multi-well needs well_count >= 1, length > 0, gap >= 0, depth > 0",
                    ));
                }
            }
            _ => {}
        }
        Ok(())
    }

    /// Intervals where a well potential is zero.
    pub fn wells(&self) -> Vec<(f64, f64)> {
        match *self {
            PotentialSpec::FiniteWell { length, .. } => vec![(-0.5 * length, 0.5 * length)],
            PotentialSpec::MultiWell { well_count, length, gap, .. } => {
                let span = well_count as f64 * length + (well_count as f64 - 1.0) * gap;
                let left = -0.5 * span;
                (0..well_count)
                    .map(|k| {
                        let a = left + k as f64 * (length + gap);
                        (a, a + length)
                    })
                    .collect()
            }
            _ => Vec::new(),
        }
    }

    pub fn depth(&self) -> Option<f64> {
        match *self {
            PotentialSpec::FiniteWell { depth, .. } | PotentialSpec::MultiWell { depth, .. } => {
                Some(depth)
            }
            _ => None,
        }
    }

    /// Average of `V` over `[x − h/2, x + h/2]`; exact for piecewise-constant
    /// wells, the point value otherwise.
    pub fn cell_average(&self, x: f64, h: f64) -> Result<f64> {
        match self.depth() {
            Some(depth) => {
                let (a, b) = (x - 0.5 * h, x + 0.5 * h);
                let inside: f64 =
                    self.wells().iter().map(|&(l, r)| (b.min(r) - a.max(l)).max(0.0)).sum();
                Ok(depth * (1.0 - inside / h))
            }
            None => potential_eval(self, x),
        }
    }
}

pub fn potential_eval(spec: &PotentialSpec, x: f64) -> Result<f64> {
    match spec {
        PotentialSpec::FiniteWell { depth, .. } | PotentialSpec::MultiWell { depth, .. } => {
            let inside = spec.wells().iter().any(|&(l, r)| l <= x && x <= r);
            Ok(if inside { 0.0 } else { *depth })
        }
        PotentialSpec::Coulomb => {
            if x <= 0.0 {
                Err(Error::Domain { what: "Coulomb potential", at: x })
            } else {
                Ok(-1.0 / x)
            }
        }
        PotentialSpec::InfiniteWellBox => Ok(0.0),
        PotentialSpec::Harmonic => Ok(0.5 * x * x),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainSpec {
    pub x_l: f64,
    pub x_r: f64,
    #[serde(default)]
    pub no_train: Vec<(f64, f64)>,
}

impl DomainSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.x_l < self.x_r) {
            return Err(contract(format!("domain needs x_L < x_R, got [{}, {}]", self.x_l, self.x_r)));
        }
        let mut excluded = 0.0;
        for &(a, b) in &self.no_train {
            if !(a < b && a >= self.x_l && b <= self.x_r) {
                return Err(contract(format!("no-train zone [{a}, {b}] must lie inside the domain")));
            }
            excluded += b - a;
        }
        if excluded >= self.x_r - self.x_l {
            return Err(contract("no-train zones cover the whole domain"));
        }
        Ok(())
    }

    /// Disjoint, sorted intervals that may be sampled.
    pub fn trainable(&self) -> Vec<(f64, f64)> {
        let mut zones = self.no_train.clone();
        zones.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut out = Vec::new();
        let mut cursor = self.x_l;
        for (a, b) in zones {
            if a > cursor {
                out.push((cursor, a));
            }
            cursor = cursor.max(b);
        }
        if cursor < self.x_r {
            out.push((cursor, self.x_r));
        }
        out
    }

    pub fn trainable_length(&self) -> f64 {
        self.trainable().iter().map(|(a, b)| b - a).sum()
    }

    /// Nearest sampleable point.
    pub fn clamp(&self, x: f64) -> f64 {
        let mut best = x;
        let mut dist = f64::INFINITY;
        for (a, b) in self.trainable() {
            let c = x.clamp(a, b);
            if (c - x).abs() < dist {
                dist = (c - x).abs();
                best = c;
            }
        }
        best
    }

    pub fn no_train_floor(&self) -> f64 {
        self.trainable().first().map(|iv| iv.0).unwrap_or(self.x_l)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum OperatorKind {
    /// `−½ f'' + V f`
    Cartesian1D,
    /// Radial hydrogen operator for angular momentum `l`, written so that the
    /// residual is `R'' + (2/r) R' + (2(λ + 1/r) − l(l+1)/r²) R`.
    RadialHydrogen { l: u32 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Problem {
    pub name: String,
    pub potential: PotentialSpec,
    pub domain: DomainSpec,
    pub boundary: ParametricKind,
    /// Rate `κ` of the decaying one-sided boundary factor.
    #[serde(default = "unit_decay")]
    pub boundary_decay: f64,
    #[serde(default)]
    pub f_b: f64,
    pub operator: OperatorKind,
}

/// Measure under which `L_DE` averages the squared residual.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResidualMeasure {
    /// Weighted by the operator's inner product (`r²` for the radial
    /// operator, 1 for Cartesian problems).
    #[default]
    Inner,
    /// Plain average over the samples.
    Uniform,
}

fn unit_decay() -> f64 {
    1.0
}

/// `residual = a·f'' + b·f' + (c + lam·λ)·f` at one point.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ResidualCoeffs {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub lam: f64,
}

impl ResidualCoeffs {
    pub fn scaled(self, s: f64) -> Self {
        ResidualCoeffs { a: s * self.a, b: s * self.b, c: s * self.c, lam: s * self.lam }
    }

    pub fn apply<T: Real>(&self, f: Jet<T>, lambda: T) -> T {
        f.d2 * self.a + f.d1 * self.b + f.v * self.c + lambda * f.v * self.lam
    }
}

impl Problem {
    pub fn validate(&self) -> Result<()> {
        self.potential.validate()?;
        self.domain.validate()?;
        if self.boundary == ParametricKind::OneSidedRightDecaying
            && !(self.boundary_decay.is_finite() && self.boundary_decay > 0.0)
        {
            return Err(contract("boundary_decay must be positive"));
        }
        match self.operator {
            OperatorKind::Cartesian1D => {
                if matches!(self.potential, PotentialSpec::Coulomb) {
                    return Err(contract("Coulomb potential requires the radial operator"));
                }
            }
            OperatorKind::RadialHydrogen { .. } => {
                if self.domain.x_l < 0.0 {
                    return Err(contract("radial domain must start at r >= 0"));
                }
                if self.domain.no_train_floor() <= 0.0 {
                    return Err(contract("radial problem needs a no-train zone excluding r = 0"));
                }
            }
        }
        Ok(())
    }

    pub fn parametric(&self) -> ParametricSpec {
        ParametricSpec {
            kind: self.boundary,
            x_l: self.domain.x_l,
            x_r: self.domain.x_r,
            f_b: self.f_b,
            decay: self.boundary_decay,
        }
    }

    pub fn coeffs(&self, x: f64) -> Result<ResidualCoeffs> {
        match self.operator {
            OperatorKind::Cartesian1D => Ok(ResidualCoeffs {
                a: -0.5,
                b: 0.0,
                c: potential_eval(&self.potential, x)?,
                lam: -1.0,
            }),
            OperatorKind::RadialHydrogen { l } => {
                if x <= 0.0 || x < self.domain.no_train_floor() {
                    return Err(contract(format!("radial residual evaluated at r = {x} inside the no-train zone")));
                }
                let ll = (l * (l + 1)) as f64;
                Ok(ResidualCoeffs { a: 1.0, b: 2.0 / x, c: 2.0 / x - ll / (x * x), lam: 2.0 })
            }
        }
    }

    /// Weight of the inner product under which eigenfunctions are orthogonal:
    /// 1 for Cartesian problems, `r²` for the radial operator.
    pub fn inner_weight(&self, x: f64) -> f64 {
        match self.operator {
            OperatorKind::Cartesian1D => 1.0,
            OperatorKind::RadialHydrogen { .. } => x * x,
        }
    }

    /// Factor applied to the pointwise residual under
    /// [`ResidualMeasure::Inner`]: the square root of the inner weight.
    pub fn residual_scale(&self, x: f64, measure: ResidualMeasure) -> f64 {
        match measure {
            ResidualMeasure::Inner => self.inner_weight(x).sqrt(),
            ResidualMeasure::Uniform => 1.0,
        }
    }

    pub fn has_parity(&self) -> bool {
        matches!(self.operator, OperatorKind::Cartesian1D)
            && (self.domain.x_l + self.domain.x_r).abs() < 1e-12
            && self.domain.no_train.is_empty()
            && !matches!(self.potential, PotentialSpec::InfiniteWellBox)
    }
}

pub fn residual<T: Real>(problem: &Problem, f: Jet<T>, x: f64, lambda: T) -> Result<T> {
    Ok(problem.coeffs(x)?.apply(f, lambda))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Builtin {
    SingleWell,
    DoubleWell,
    Hydrogen { l: u32 },
    InfiniteWell,
    Harmonic,
}

/// Outer radius of the builtin hydrogen domain.
pub const HYDROGEN_R_MAX: f64 = 60.0;
/// Start of the trainable region of the builtin hydrogen domain.
pub const HYDROGEN_NO_TRAIN: f64 = 0.1;

impl Builtin {
    pub fn parse(name: &str) -> Option<Self> {
        match name {
            "single_well" => Some(Builtin::SingleWell),
            "double_well" => Some(Builtin::DoubleWell),
            "infinite_well" => Some(Builtin::InfiniteWell),
            "harmonic" => Some(Builtin::Harmonic),
            _ => {
                let rest = name.strip_prefix("hydrogen")?;
                let rest = rest.trim_start_matches(['_', '(']).trim_end_matches(')');
                let rest = rest.strip_prefix("l").unwrap_or(rest).trim_start_matches(['=', '_']);
                rest.parse().ok().map(|l| Builtin::Hydrogen { l })
            }
        }
    }

    pub fn name(self) -> String {
        match self {
            Builtin::SingleWell => "single_well".into(),
            Builtin::DoubleWell => "double_well".into(),
            Builtin::Hydrogen { l } => format!("hydrogen_l{l}"),
            Builtin::InfiniteWell => "infinite_well".into(),
            Builtin::Harmonic => "harmonic".into(),
        }
    }
}

/// Decay rate of the hydrogen boundary factor for angular momentum `l`:
/// `1/n` for the lowest state `n = l + 1` when `l ≤ 1`, half that above.
pub fn hydrogen_decay(l: u32) -> f64 {
    let n = (l + 1) as f64;
    if l <= 1 {
        1.0 / n
    } else {
        0.5 / n
    }
}

pub fn builtin_problem(which: Builtin) -> Problem {
    let name = which.name();
    match which {
        Builtin::SingleWell => Problem {
            name,
            potential: PotentialSpec::FiniteWell { length: 1.0, depth: 20.0 },
            domain: DomainSpec { x_l: -6.0, x_r: 6.0, no_train: vec![] },
            boundary: ParametricKind::TwoSidedSymmetric,
            boundary_decay: 1.0,
            f_b: 0.0,
            operator: OperatorKind::Cartesian1D,
        },
        Builtin::DoubleWell => Problem {
            name,
            potential: PotentialSpec::MultiWell { well_count: 2, length: 1.0, gap: 1.0, depth: 20.0 },
            domain: DomainSpec { x_l: -6.0, x_r: 6.0, no_train: vec![] },
            boundary: ParametricKind::TwoSidedSymmetric,
            boundary_decay: 1.0,
            f_b: 0.0,
            operator: OperatorKind::Cartesian1D,
        },
        Builtin::Hydrogen { l } => Problem {
            name,
            potential: PotentialSpec::Coulomb,
            domain: DomainSpec {
                x_l: 0.0,
                x_r: HYDROGEN_R_MAX,
                no_train: vec![(0.0, HYDROGEN_NO_TRAIN)],
            },
            boundary: ParametricKind::OneSidedRightDecaying,
            boundary_decay: hydrogen_decay(l),
            f_b: 0.0,
            operator: OperatorKind::RadialHydrogen { l },
        },
        Builtin::InfiniteWell => Problem {
            name,
            potential: PotentialSpec::InfiniteWellBox,
            domain: DomainSpec { x_l: 0.0, x_r: 1.0, no_train: vec![] },
            boundary: ParametricKind::TwoSided,
            boundary_decay: 1.0,
            f_b: 0.0,
            operator: OperatorKind::Cartesian1D,
        },
        Builtin::Harmonic => Problem {
            name,
            potential: PotentialSpec::Harmonic,
            domain: DomainSpec { x_l: -6.0, x_r: 6.0, no_train: vec![] },
            boundary: ParametricKind::TwoSidedSymmetric,
            boundary_decay: 1.0,
            f_b: 0.0,
            operator: OperatorKind::Cartesian1D,
        },
    }
}
