//! Differentiation engine.
//!
//! Derivatives with respect to the spatial input are carried forward as
//! [`Jet`] triples `(value, d/dx, d²/dx²)`. Derivatives with respect to the
//! network parameters are accumulated in reverse, either through the
//! analytic layer adjoints in [`crate::network::batch`] or through the
//! general-purpose scalar [`Tape`] defined here.
//!
//! Both routes share the same calculus rules: [`Jet`] is generic over any
//! [`Real`] scalar, so a jet of tape variables differentiates its own
//! second-derivative propagation.

use std::cell::RefCell;
use std::fmt;
use std::ops::{Add, AddAssign, Mul, Neg, Sub};

use crate::error::{Error, Result};

/// Scalar type the jet rules and the reference forward pass are written over.
pub trait Real:
    Copy
    + fmt::Debug
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Neg<Output = Self>
    + Add<f64, Output = Self>
    + Mul<f64, Output = Self>
{
    fn value(self) -> f64;
    /// A constant living in the same context as `self`.
    fn lift(self, c: f64) -> Self;
    fn sin(self) -> Self;
    fn cos(self) -> Self;
    fn exp(self) -> Self;
    fn recip(self) -> Self;
}

impl Real for f64 {
    #[inline]
    fn value(self) -> f64 {
        self
    }
    #[inline]
    fn lift(self, c: f64) -> Self {
        c
    }
    #[inline]
    fn sin(self) -> Self {
        f64::sin(self)
    }
    #[inline]
    fn cos(self) -> Self {
        f64::cos(self)
    }
    #[inline]
    fn exp(self) -> Self {
        f64::exp(self)
    }
    #[inline]
    fn recip(self) -> Self {
        f64::recip(self)
    }
}

/// Value with its first and second derivative with respect to `x`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Jet<T> {
    pub v: T,
    pub d1: T,
    pub d2: T,
}

pub type Jet3 = Jet<f64>;

impl Jet3 {
    /// Seed for the independent variable: `(x, 1, 0)`.
    pub fn input(x: f64) -> Self {
        Jet { v: x, d1: 1.0, d2: 0.0 }
    }

    pub fn constant(c: f64) -> Self {
        Jet { v: c, d1: 0.0, d2: 0.0 }
    }

    pub fn new(v: f64, d1: f64, d2: f64) -> Self {
        Jet { v, d1, d2 }
    }

    pub fn is_finite(&self) -> bool {
        self.v.is_finite() && self.d1.is_finite() && self.d2.is_finite()
    }
}

impl<T: Real> Jet<T> {
    pub fn lift_const(like: T, c: f64) -> Self {
        let z = like.lift(0.0);
        Jet { v: like.lift(c), d1: z, d2: z }
    }

    pub fn add(self, b: Self) -> Self {
        Jet { v: self.v + b.v, d1: self.d1 + b.d1, d2: self.d2 + b.d2 }
    }

    pub fn sub(self, b: Self) -> Self {
        Jet { v: self.v - b.v, d1: self.d1 - b.d1, d2: self.d2 - b.d2 }
    }

    pub fn mul(self, b: Self) -> Self {
        Jet {
            v: self.v * b.v,
            d1: self.d1 * b.v + self.v * b.d1,
            d2: self.d2 * b.v + self.d1 * b.d1 * 2.0 + self.v * b.d2,
        }
    }

    pub fn scale(self, c: f64) -> Self {
        Jet { v: self.v * c, d1: self.d1 * c, d2: self.d2 * c }
    }

    /// Multiplies by a scalar that carries no `x` dependence.
    pub fn scale_by(self, c: T) -> Self {
        Jet { v: self.v * c, d1: self.d1 * c, d2: self.d2 * c }
    }

    /// `w·a + b` with constant `w`, `b`.
    pub fn affine(self, w: f64, b: f64) -> Self {
        Jet { v: self.v * w + b, d1: self.d1 * w, d2: self.d2 * w }
    }

    pub fn neg(self) -> Self {
        Jet { v: -self.v, d1: -self.d1, d2: -self.d2 }
    }

    pub fn sin(self) -> Self {
        let s = self.v.sin();
        let c = self.v.cos();
        Jet { v: s, d1: c * self.d1, d2: c * self.d2 - s * self.d1 * self.d1 }
    }

    pub fn exp(self) -> Self {
        let e = self.v.exp();
        Jet { v: e, d1: e * self.d1, d2: e * (self.d2 + self.d1 * self.d1) }
    }

    /// `1/a`; fails at `a.v == 0`.
    pub fn recip(self) -> Result<Self> {
        if self.v.value() == 0.0 {
            return Err(Error::Domain { what: "reciprocal", at: self.v.value() });
        }
        let r = self.v.recip();
        let r2 = r * r;
        Ok(Jet {
            v: r,
            d1: -(r2 * self.d1),
            d2: r2 * r * self.d1 * self.d1 * 2.0 - r2 * self.d2,
        })
    }

    pub fn values(self) -> Jet3 {
        Jet { v: self.v.value(), d1: self.d1.value(), d2: self.d2.value() }
    }
}

pub fn jet_input(x: f64) -> Jet3 {
    Jet3::input(x)
}

pub fn jet_add(a: Jet3, b: Jet3) -> Jet3 {
    a.add(b)
}

pub fn jet_mul(a: Jet3, b: Jet3) -> Jet3 {
    a.mul(b)
}

pub fn jet_scale(a: Jet3, c: f64) -> Jet3 {
    a.scale(c)
}

pub fn jet_affine(a: Jet3, w: f64, b: f64) -> Jet3 {
    a.affine(w, b)
}

pub fn jet_sin(a: Jet3) -> Jet3 {
    a.sin()
}

pub fn jet_exp(a: Jet3) -> Jet3 {
    a.exp()
}

pub fn jet_recip(a: Jet3) -> Result<Jet3> {
    a.recip()
}

/// Gradient buffer aligned with a flat parameter vector.
#[derive(Clone, Debug, PartialEq)]
pub struct ParamGradients(Vec<f64>);

impl ParamGradients {
    pub fn zeros(len: usize) -> Self {
        ParamGradients(vec![0.0; len])
    }

    pub fn from_vec(v: Vec<f64>) -> Self {
        ParamGradients(v)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    pub fn accumulate(&mut self, other: &ParamGradients) {
        assert_eq!(self.0.len(), other.0.len(), "gradient buffers differ in length");
        for (a, b) in self.0.iter_mut().zip(&other.0) {
            *a += b;
        }
    }

    pub fn scale(&mut self, c: f64) {
        self.0.iter_mut().for_each(|g| *g *= c);
    }

    pub fn all_finite(&self) -> bool {
        self.0.iter().all(|g| g.is_finite())
    }
}

impl AddAssign<&ParamGradients> for ParamGradients {
    fn add_assign(&mut self, rhs: &ParamGradients) {
        self.accumulate(rhs);
    }
}

const NO_PARENT: u32 = u32::MAX;

#[derive(Clone, Copy)]
struct Node {
    a: u32,
    da: f64,
    b: u32,
    db: f64,
}

/// Reverse-mode recording of scalar operations.
#[derive(Default)]
pub struct Tape {
    nodes: RefCell<Vec<Node>>,
}

impl Tape {
    pub fn new() -> Self {
        Tape::default()
    }

    pub fn var(&self, value: f64) -> Var<'_> {
        self.push(value, Node { a: NO_PARENT, da: 0.0, b: NO_PARENT, db: 0.0 })
    }

    pub fn len(&self) -> usize {
        self.nodes.borrow().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn push(&self, value: f64, node: Node) -> Var<'_> {
        let mut nodes = self.nodes.borrow_mut();
        let idx = nodes.len();
        nodes.push(node);
        Var { tape: self, idx: idx as u32, val: value }
    }

    /// Adjoints of every recorded node with respect to `output`.
    pub fn adjoints(&self, output: Var<'_>) -> Vec<f64> {
        let nodes = self.nodes.borrow();
        let mut adj = vec![0.0; nodes.len()];
        adj[output.idx as usize] = 1.0;
        for i in (0..=output.idx as usize).rev() {
            let g = adj[i];
            if g == 0.0 {
                continue;
            }
            let n = nodes[i];
            if n.a != NO_PARENT {
                adj[n.a as usize] += g * n.da;
            }
            if n.b != NO_PARENT {
                adj[n.b as usize] += g * n.db;
            }
        }
        adj
    }
}

/// A scalar recorded on a [`Tape`].
#[derive(Clone, Copy)]
pub struct Var<'t> {
    tape: &'t Tape,
    idx: u32,
    val: f64,
}

impl fmt::Debug for Var<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Var(#{}, {})", self.idx, self.val)
    }
}

impl<'t> Var<'t> {
    fn unary(self, value: f64, d: f64) -> Var<'t> {
        self.tape.push(value, Node { a: self.idx, da: d, b: NO_PARENT, db: 0.0 })
    }

    fn binary(self, other: Var<'t>, value: f64, da: f64, db: f64) -> Var<'t> {
        debug_assert!(std::ptr::eq(self.tape, other.tape), "vars from different tapes");
        self.tape.push(value, Node { a: self.idx, da, b: other.idx, db })
    }

    pub fn index(self) -> usize {
        self.idx as usize
    }
}

impl<'t> Add for Var<'t> {
    type Output = Var<'t>;
    fn add(self, o: Var<'t>) -> Var<'t> {
        self.binary(o, self.val + o.val, 1.0, 1.0)
    }
}

impl<'t> Sub for Var<'t> {
    type Output = Var<'t>;
    fn sub(self, o: Var<'t>) -> Var<'t> {
        self.binary(o, self.val - o.val, 1.0, -1.0)
    }
}

impl<'t> Mul for Var<'t> {
    type Output = Var<'t>;
    fn mul(self, o: Var<'t>) -> Var<'t> {
        self.binary(o, self.val * o.val, o.val, self.val)
    }
}

impl<'t> Neg for Var<'t> {
    type Output = Var<'t>;
    fn neg(self) -> Var<'t> {
        self.unary(-self.val, -1.0)
    }
}

impl<'t> Add<f64> for Var<'t> {
    type Output = Var<'t>;
    fn add(self, c: f64) -> Var<'t> {
        self.unary(self.val + c, 1.0)
    }
}

impl<'t> Mul<f64> for Var<'t> {
    type Output = Var<'t>;
    fn mul(self, c: f64) -> Var<'t> {
        self.unary(self.val * c, c)
    }
}

impl Real for Var<'_> {
    fn value(self) -> f64 {
        self.val
    }
    fn lift(self, c: f64) -> Self {
        self.tape.var(c)
    }
    fn sin(self) -> Self {
        self.unary(self.val.sin(), self.val.cos())
    }
    fn cos(self) -> Self {
        self.unary(self.val.cos(), -self.val.sin())
    }
    fn exp(self) -> Self {
        let e = self.val.exp();
        self.unary(e, e)
    }
    fn recip(self) -> Self {
        let r = 1.0 / self.val;
        self.unary(r, -r * r)
    }
}

/// Evaluates `loss` with every entry of `params` recorded as a tape input and
/// returns the loss together with its exact gradient.
///
/// `epoch` is only used to label a divergence error.
pub fn grad<F>(params: &[f64], epoch: usize, loss: F) -> Result<(f64, ParamGradients)>
where
    F: for<'t> FnOnce(&[Var<'t>]) -> Result<Var<'t>>,
{
    let tape = Tape::new();
    let inputs: Vec<Var<'_>> = params.iter().map(|&p| tape.var(p)).collect();
    let out = loss(&inputs)?;
    if !out.val.is_finite() {
        return Err(Error::Divergence { epoch, loss: out.val });
    }
    let adj = tape.adjoints(out);
    let g = inputs.iter().map(|v| adj[v.index()]).collect();
    Ok((out.val, ParamGradients::from_vec(g)))
}
