//! Batched forward/backward engine used in training.
//!
//! A chunk of `m` samples is laid out as a matrix per hidden layer with one
//! row per neuron and `streams × 3 × m` columns: for each stream (the input
//! and, with symmetry, its mirror) a block of values, a block of first
//! derivatives and a block of second derivatives. Affine layers act on every
//! block with the same matrix product, and their weight adjoint
//! `Z̄·Hᵀ` sums the value and derivative contributions in one product.

use ndarray::linalg::general_mat_mul;
use ndarray::{Array1, Array2, ArrayView2, ArrayViewMut2};

use super::{EigenNet, ParametricSpec};
use crate::dualgrad::Jet3;

/// Samples per work chunk.
pub const CHUNK: usize = 100;

/// Cached activations of one chunk.
pub struct ChunkForward {
    m: usize,
    streams: usize,
    lambda: f64,
    xs: Vec<f64>,
    g: Vec<Jet3>,
    pre: Vec<Array2<f64>>,
    act: Vec<Array2<f64>>,
    cos: Vec<Array2<f64>>,
    combined: Array2<f64>,
    pub f: Vec<Jet3>,
}

impl ChunkForward {
    pub fn len(&self) -> usize {
        self.m
    }

    pub fn is_empty(&self) -> bool {
        self.m == 0
    }

    pub fn xs(&self) -> &[f64] {
        &self.xs
    }
}

#[inline]
fn col(m: usize, stream: usize, comp: usize, i: usize) -> usize {
    (stream * 3 + comp) * m + i
}

fn weight_view<'a>(p: &'a [f64], off: usize, rows: usize, cols: usize) -> ArrayView2<'a, f64> {
    ArrayView2::from_shape((rows, cols), &p[off..off + rows * cols]).expect("layout shape")
}

fn sin_jet_in_place(z: &Array2<f64>, m: usize, streams: usize) -> (Array2<f64>, Array2<f64>) {
    let rows = z.nrows();
    let mut h = Array2::<f64>::zeros(z.raw_dim());
    let mut c = Array2::<f64>::zeros((rows, streams * m));
    for j in 0..rows {
        let zr = z.row(j);
        let zr = zr.as_slice().expect("row-major");
        let mut hr = h.row_mut(j);
        let hr = hr.as_slice_mut().expect("row-major");
        let mut cr = c.row_mut(j);
        let cr = cr.as_slice_mut().expect("row-major");
        for s in 0..streams {
            for i in 0..m {
                let zv = zr[col(m, s, 0, i)];
                let z1 = zr[col(m, s, 1, i)];
                let z2 = zr[col(m, s, 2, i)];
                let (sn, cs) = zv.sin_cos();
                hr[col(m, s, 0, i)] = sn;
                hr[col(m, s, 1, i)] = cs * z1;
                hr[col(m, s, 2, i)] = cs * z2 - sn * z1 * z1;
                cr[s * m + i] = cs;
            }
        }
    }
    (h, c)
}

pub fn forward_chunk(net: &EigenNet, spec: &ParametricSpec, xs: &[f64]) -> ChunkForward {
    forward_chunk_at(net, spec, xs, net.lambda())
}

/// [`forward_chunk`] with the trunk reading `trunk_lambda` instead of the
/// network's own eigenvalue.
pub fn forward_chunk_at(net: &EigenNet, spec: &ParametricSpec, xs: &[f64], trunk_lambda: f64) -> ChunkForward {
    let m = xs.len();
    let sym = net.symmetry;
    let streams = sym.streams();
    let width = streams * 3 * m;
    let p = net.params();
    let layout = net.layout();
    let lambda = trunk_lambda;
    let scale = net.input_scale();
    let hidden = layout.hidden();

    let mut pre = Vec::with_capacity(hidden.len());
    let mut act = Vec::with_capacity(hidden.len());
    let mut cos = Vec::with_capacity(hidden.len());

    let first = &hidden[0];
    let mut z = Array2::<f64>::zeros((first.rows, width));
    for j in 0..first.rows {
        let wx = p[first.weight + 2 * j];
        let wl = p[first.weight + 2 * j + 1];
        let shift = wl * lambda + p[first.bias + j];
        let mut zr = z.row_mut(j);
        let zr = zr.as_slice_mut().expect("row-major");
        for s in 0..streams {
            let a = wx * scale * if s == 0 { 1.0 } else { -1.0 };
            for (i, &x) in xs.iter().enumerate() {
                zr[col(m, s, 0, i)] = a * x + shift;
                zr[col(m, s, 1, i)] = a;
            }
        }
    }
    let (h, c) = sin_jet_in_place(&z, m, streams);
    pre.push(z);
    act.push(h);
    cos.push(c);

    for d in &hidden[1..] {
        let w = weight_view(p, d.weight, d.rows, d.cols);
        let mut z = Array2::<f64>::zeros((d.rows, width));
        general_mat_mul(1.0, &w, act.last().unwrap(), 0.0, &mut z);
        for j in 0..d.rows {
            let b = p[d.bias + j];
            let mut zr = z.row_mut(j);
            let zr = zr.as_slice_mut().expect("row-major");
            for s in 0..streams {
                zr[col(m, s, 0, 0)..col(m, s, 0, 0) + m].iter_mut().for_each(|v| *v += b);
            }
        }
        let (h, c) = sin_jet_in_place(&z, m, streams);
        pre.push(z);
        act.push(h);
        cos.push(c);
    }

    let last = act.last().unwrap();
    let combined = if streams == 1 {
        last.clone()
    } else {
        let sign = sym.mirror_sign();
        let rows = last.nrows();
        let mut comb = Array2::<f64>::zeros((rows, 3 * m));
        for j in 0..rows {
            let lr = last.row(j);
            let lr = lr.as_slice().unwrap();
            let mut cr = comb.row_mut(j);
            let cr = cr.as_slice_mut().unwrap();
            for k in 0..3 * m {
                cr[k] = lr[k] + sign * lr[3 * m + k];
            }
        }
        comb
    };

    let out = layout.output();
    let w_out = Array1::from(p[out.weight..out.weight + out.cols].to_vec());
    let nvec = w_out.dot(&combined);
    let b_out = if sym.uses_output_bias() { p[out.bias] } else { 0.0 };

    let mut g = Vec::with_capacity(m);
    let mut f = Vec::with_capacity(m);
    for (i, &x) in xs.iter().enumerate() {
        let n = Jet3::new(nvec[i] + b_out, nvec[m + i], nvec[2 * m + i]);
        let gi = spec.g(Jet3::input(x));
        let mut fi = gi.mul(n);
        fi.v += spec.f_b;
        g.push(gi);
        f.push(fi);
    }

    ChunkForward { m, streams, lambda, xs: xs.to_vec(), g, pre, act, cos, combined, f }
}

/// Backpropagates per-sample seeds `∂L/∂f` (value, d1, d2 components).
///
/// Returns the gradient over all parameters (λ-neuron entries left at zero)
/// and the adjoint of `λ` as a network input.
pub fn backward_chunk(net: &EigenNet, fwd: &ChunkForward, seeds: &[Jet3]) -> (Vec<f64>, f64) {
    let m = fwd.m;
    assert_eq!(seeds.len(), m, "one seed per sample");
    let sym = net.symmetry;
    let streams = fwd.streams;
    let p = net.params();
    let layout = net.layout();
    let hidden = layout.hidden();
    let scale = net.input_scale();
    let mut grads = vec![0.0; layout.len];

    // Through f = f_b + g·N.
    let mut nbar = Array1::<f64>::zeros(3 * m);
    for (i, (s, g)) in seeds.iter().zip(&fwd.g).enumerate() {
        nbar[i] = s.v * g.v + s.d1 * g.d1 + s.d2 * g.d2;
        nbar[m + i] = s.d1 * g.v + 2.0 * s.d2 * g.d1;
        nbar[2 * m + i] = s.d2 * g.v;
    }

    let out = layout.output();
    let w_out_bar = fwd.combined.dot(&nbar);
    for (k, v) in w_out_bar.iter().enumerate() {
        grads[out.weight + k] += v;
    }
    if sym.uses_output_bias() {
        grads[out.bias] += nbar.slice(ndarray::s![0..m]).sum();
    }

    let rows_last = out.cols;
    let width = streams * 3 * m;
    let mut hbar = Array2::<f64>::zeros((rows_last, width));
    {
        let sign = sym.mirror_sign();
        for j in 0..rows_last {
            let w = p[out.weight + j];
            let mut hr = hbar.row_mut(j);
            let hr = hr.as_slice_mut().unwrap();
            for k in 0..3 * m {
                let v = w * nbar[k];
                hr[k] = v;
                if streams == 2 {
                    hr[3 * m + k] = sign * v;
                }
            }
        }
    }

    let mut lambda_bar = 0.0;
    for l in (0..hidden.len()).rev() {
        let d = &hidden[l];
        let z = &fwd.pre[l];
        let h = &fwd.act[l];
        let c = &fwd.cos[l];
        let mut zbar = Array2::<f64>::zeros((d.rows, width));
        for j in 0..d.rows {
            let zr = z.row(j);
            let zr = zr.as_slice().unwrap();
            let hr = h.row(j);
            let hr = hr.as_slice().unwrap();
            let cr = c.row(j);
            let cr = cr.as_slice().unwrap();
            let hb = hbar.row(j);
            let hb = hb.as_slice().unwrap();
            let mut zb = zbar.row_mut(j);
            let zb = zb.as_slice_mut().unwrap();
            for s in 0..streams {
                for i in 0..m {
                    let (iv, i1, i2) = (col(m, s, 0, i), col(m, s, 1, i), col(m, s, 2, i));
                    let sn = hr[iv];
                    let cs = cr[s * m + i];
                    let z1 = zr[i1];
                    let z2 = zr[i2];
                    let (bv, b1, b2) = (hb[iv], hb[i1], hb[i2]);
                    zb[iv] = bv * cs - b1 * sn * z1 - b2 * (sn * z2 + cs * z1 * z1);
                    zb[i1] = b1 * cs - 2.0 * b2 * sn * z1;
                    zb[i2] = b2 * cs;
                }
            }
        }

        if l > 0 {
            let prev = &fwd.act[l - 1];
            {
                let (head, _) = grads.split_at_mut(d.weight + d.weight_len());
                let mut wbar =
                    ArrayViewMut2::from_shape((d.rows, d.cols), &mut head[d.weight..]).unwrap();
                general_mat_mul(1.0, &zbar, &prev.t(), 1.0, &mut wbar);
            }
            for j in 0..d.rows {
                let zb = zbar.row(j);
                let zb = zb.as_slice().unwrap();
                let mut acc = 0.0;
                for s in 0..streams {
                    acc += zb[col(m, s, 0, 0)..col(m, s, 0, 0) + m].iter().sum::<f64>();
                }
                grads[d.bias + j] += acc;
            }
            let w = weight_view(p, d.weight, d.rows, d.cols);
            let mut next = Array2::<f64>::zeros((d.cols, width));
            general_mat_mul(1.0, &w.t(), &zbar, 0.0, &mut next);
            hbar = next;
        } else {
            for j in 0..d.rows {
                let zb = zbar.row(j);
                let zb = zb.as_slice().unwrap();
                let mut gx = 0.0;
                let mut gv = 0.0;
                for s in 0..streams {
                    let a = scale * if s == 0 { 1.0 } else { -1.0 };
                    for (i, &x) in fwd.xs.iter().enumerate() {
                        let bv = zb[col(m, s, 0, i)];
                        gx += bv * a * x + zb[col(m, s, 1, i)] * a;
                        gv += bv;
                    }
                }
                grads[d.weight + 2 * j] += gx;
                grads[d.weight + 2 * j + 1] += gv * fwd.lambda;
                grads[d.bias + j] += gv;
                lambda_bar += p[d.weight + 2 * j + 1] * gv;
            }
        }
    }
    (grads, lambda_bar)
}

/// Wrapped values `f(x)` only, without derivative columns.
pub fn values(net: &EigenNet, spec: &ParametricSpec, xs: &[f64]) -> Vec<f64> {
    let m = xs.len();
    let sym = net.symmetry;
    let streams = sym.streams();
    let p = net.params();
    let layout = net.layout();
    let lambda = net.lambda();
    let scale = net.input_scale();
    let hidden = layout.hidden();

    let first = &hidden[0];
    let mut h = Array2::<f64>::zeros((first.rows, streams * m));
    for j in 0..first.rows {
        let wx = p[first.weight + 2 * j];
        let shift = p[first.weight + 2 * j + 1] * lambda + p[first.bias + j];
        for s in 0..streams {
            let a = wx * scale * if s == 0 { 1.0 } else { -1.0 };
            for (i, &x) in xs.iter().enumerate() {
                h[[j, s * m + i]] = (a * x + shift).sin();
            }
        }
    }
    for d in &hidden[1..] {
        let w = weight_view(p, d.weight, d.rows, d.cols);
        let mut z = Array2::<f64>::zeros((d.rows, streams * m));
        general_mat_mul(1.0, &w, &h, 0.0, &mut z);
        for j in 0..d.rows {
            let b = p[d.bias + j];
            z.row_mut(j).mapv_inplace(|v| (v + b).sin());
        }
        h = z;
    }
    let out = layout.output();
    let w_out = Array1::from(p[out.weight..out.weight + out.cols].to_vec());
    let nvec = w_out.dot(&h);
    let b_out = if sym.uses_output_bias() { p[out.bias] } else { 0.0 };
    let sign = sym.mirror_sign();
    xs.iter()
        .enumerate()
        .map(|(i, &x)| {
            let mut n = nvec[i] + b_out;
            if streams == 2 {
                n += sign * nvec[m + i];
            }
            spec.f_b + spec.g(Jet3::input(x)).v * n
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::{NetConfig, ParametricKind, SymmetryMode};

    fn spec() -> ParametricSpec {
        ParametricSpec { kind: ParametricKind::TwoSidedSymmetric, x_l: -3.0, x_r: 3.0, f_b: 0.1, decay: 1.0 }
    }

    #[test]
    fn batched_forward_matches_reference() {
        for sym in [SymmetryMode::NoSymmetry, SymmetryMode::Even, SymmetryMode::Odd] {
            let cfg = NetConfig { hidden: vec![9, 7, 5], lambda_start: 0.7, input_scale: 0.8 };
            let net = EigenNet::init(cfg, sym, 5).unwrap();
            let xs = [-2.5, -1.0, 0.0, 0.3, 2.9];
            let fwd = forward_chunk(&net, &spec(), &xs);
            let vals = values(&net, &spec(), &xs);
            for (i, &x) in xs.iter().enumerate() {
                let (n, _) = net.forward(Jet3::input(x));
                let f = spec().wrap(n, Jet3::input(x));
                let got = fwd.f[i];
                for (a, b) in [(got.v, f.v), (got.d1, f.d1), (got.d2, f.d2), (vals[i], f.v)] {
                    assert!((a - b).abs() <= 1e-12 * b.abs().max(1.0), "{sym:?}: {a} vs {b}");
                }
            }
        }
    }
}
