//! Total training loss over a batch and its exact parameter gradient.
//!
//! Every loss term depends on the network only through the wrapped jets
//! `f(x_i)` and the eigenvalue `λ`. A forward sweep produces those; the term
//! adjoints `∂L/∂f(x_i)` and `∂L/∂λ` are formed here in closed form, then
//! pushed back through the network by [`crate::network::batch`].

use crate::dualgrad::{Jet3, ParamGradients};
use crate::error::{Error, Result};
use crate::losses::{LossBreakdown, LossWeights, OrthoForm, DRIVE_EXP_CLAMP, LEGACY_EPS};
use serde::{Deserialize, Serialize};

use crate::network::batch::{backward_chunk, forward_chunk_at, ChunkForward, CHUNK};
use crate::network::EigenNet;
use crate::parallel::Parallelism;
use crate::problems::{Problem, ResidualCoeffs, ResidualMeasure};

/// How the eigenvalue parameters see the trunk's λ input.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LambdaFeedback {
    /// The trunk input is a copy of λ taken before the epoch; the λ-neuron is
    /// driven only by the terms in which λ appears explicitly.
    #[default]
    Detached,
    /// Gradients also flow from the trunk input back into the λ-neuron.
    Full,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ObjectiveSettings {
    pub weights: LossWeights,
    pub ortho: OrthoForm,
    /// Current drive offset `c`.
    pub drive_c: f64,
    pub feedback: LambdaFeedback,
    pub measure: ResidualMeasure,
}

impl Default for ObjectiveSettings {
    fn default() -> Self {
        ObjectiveSettings {
            weights: LossWeights::default(),
            ortho: OrthoForm::SquaredSum,
            drive_c: 0.0,
            feedback: LambdaFeedback::Full,
            measure: ResidualMeasure::Inner,
        }
    }
}

#[derive(Clone, Debug)]
pub struct Evaluation {
    pub breakdown: LossBreakdown,
    pub grads: ParamGradients,
    pub lambda: f64,
}

struct Terms {
    breakdown: LossBreakdown,
    seeds: Vec<Jet3>,
    lambda_bar: f64,
}

/// Sample spacing used by the overlap integral.
pub fn sample_dx(problem: &Problem, m: usize) -> f64 {
    problem.domain.trainable_length() / m as f64
}

/// `ψ_eigen(x_i)·w(x_i)`, the inner-product-weighted bank sum.
pub fn weighted_bank(problem: &Problem, batch: &[f64], psi_eigen: &[f64]) -> Vec<f64> {
    batch.iter().zip(psi_eigen).map(|(&x, &p)| p * problem.inner_weight(x)).collect()
}

fn terms(
    problem: &Problem,
    coeffs: &[ResidualCoeffs],
    f: &[Jet3],
    lambda: f64,
    psi_eigen_w: Option<&[f64]>,
    settings: &ObjectiveSettings,
) -> Terms {
    let m = f.len();
    let mf = m as f64;
    let w = &settings.weights;

    let mut seeds = vec![Jet3::constant(0.0); m];
    let mut lambda_bar = 0.0;

    let mut l_de = 0.0;
    for (i, (c, fi)) in coeffs.iter().zip(f).enumerate() {
        let r = c.apply(*fi, lambda);
        l_de += r * r;
        let k = 2.0 * r / mf;
        seeds[i].v += k * (c.c + c.lam * lambda);
        seeds[i].d1 += k * c.b;
        seeds[i].d2 += k * c.a;
        lambda_bar += k * c.lam * fi.v;
    }
    l_de /= mf;

    let len = problem.domain.trainable_length();
    let s: f64 = f.iter().map(|fi| fi.v * fi.v).sum();
    let dn = s - mf / len;
    let l_norm = dn * dn;
    if w.nu_norm != 0.0 {
        for (seed, fi) in seeds.iter_mut().zip(f) {
            seed.v += w.nu_norm * 4.0 * dn * fi.v;
        }
    }

    let mut l_orth = 0.0;
    if let Some(pe) = psi_eigen_w {
        let dx = len / mf;
        let fb = problem.f_b;
        let dot: f64 = pe.iter().zip(f).map(|(e, fi)| e * (fi.v - fb)).sum();
        let scale = match settings.ortho {
            OrthoForm::SquaredSum => {
                l_orth = dot * dot;
                2.0 * dot
            }
            OrthoForm::Squared => {
                let o = dot * dx;
                l_orth = o * o;
                2.0 * o * dx
            }
            OrthoForm::Signed => {
                l_orth = dot;
                1.0
            }
        };
        if w.nu_orth != 0.0 {
            for (seed, e) in seeds.iter_mut().zip(pe) {
                seed.v += w.nu_orth * scale * e;
            }
        }
    }

    let expo = -lambda + settings.drive_c;
    let l_drive = if expo > DRIVE_EXP_CLAMP {
        DRIVE_EXP_CLAMP.exp()
    } else {
        let d = expo.exp();
        lambda_bar -= w.nu_drive * d;
        d
    };

    let mean_sq = s / mf;
    let l_f = if mean_sq < LEGACY_EPS {
        1.0 / LEGACY_EPS
    } else {
        if w.nu_f != 0.0 {
            let k = -w.nu_f / (mean_sq * mean_sq) * 2.0 / mf;
            for (seed, fi) in seeds.iter_mut().zip(f) {
                seed.v += k * fi.v;
            }
        }
        1.0 / mean_sq
    };
    let lam_sq = lambda * lambda;
    let l_lambda = if lam_sq < LEGACY_EPS {
        1.0 / LEGACY_EPS
    } else {
        lambda_bar += w.nu_lambda * (-2.0 / (lam_sq * lambda));
        1.0 / lam_sq
    };

    Terms {
        breakdown: LossBreakdown::assemble(w, l_de, l_norm, l_orth, l_drive, l_f, l_lambda),
        seeds,
        lambda_bar,
    }
}

fn forward_all(
    net: &EigenNet,
    problem: &Problem,
    batch: &[f64],
    par: Parallelism,
    trunk_lambda: f64,
    measure: ResidualMeasure,
) -> Result<(Vec<ResidualCoeffs>, Vec<ChunkForward>, Vec<Jet3>)> {
    if batch.is_empty() {
        return Err(crate::error::contract("empty batch"));
    }
    let coeffs = batch
        .iter()
        .map(|&x| Ok(problem.coeffs(x)?.scaled(problem.residual_scale(x, measure))))
        .collect::<Result<Vec<_>>>()?;
    let spec = problem.parametric();
    let chunks: Vec<&[f64]> = batch.chunks(CHUNK).collect();
    let fwd = par.map(&chunks, |xs| forward_chunk_at(net, &spec, xs, trunk_lambda));
    let f: Vec<Jet3> = fwd.iter().flat_map(|c| c.f.iter().copied()).collect();
    Ok((coeffs, fwd, f))
}

/// Loss terms without gradients.
pub fn loss_only(
    net: &EigenNet,
    problem: &Problem,
    batch: &[f64],
    psi_eigen: Option<&[f64]>,
    settings: &ObjectiveSettings,
    par: Parallelism,
) -> Result<LossBreakdown> {
    loss_with_trunk_lambda(net, problem, batch, psi_eigen, settings, par, net.lambda())
}

/// Loss terms with the trunk fed `trunk_lambda` in place of the network's
/// own eigenvalue. With [`LambdaFeedback::Detached`] this is the function
/// whose gradient [`evaluate`] returns, at `trunk_lambda = net.lambda()`.
pub fn loss_with_trunk_lambda(
    net: &EigenNet,
    problem: &Problem,
    batch: &[f64],
    psi_eigen: Option<&[f64]>,
    settings: &ObjectiveSettings,
    par: Parallelism,
    trunk_lambda: f64,
) -> Result<LossBreakdown> {
    let (coeffs, _, f) = forward_all(net, problem, batch, par, trunk_lambda, settings.measure)?;
    let pe = psi_eigen.map(|p| weighted_bank(problem, batch, p));
    Ok(terms(problem, &coeffs, &f, net.lambda(), pe.as_deref(), settings).breakdown)
}

/// Loss terms and the exact gradient with respect to every network parameter.
///
/// `psi_eigen`, when present, is the unweighted sum of accepted
/// eigenfunctions (minus `f_b`) sampled at `batch`.
pub fn evaluate(
    net: &EigenNet,
    problem: &Problem,
    batch: &[f64],
    psi_eigen: Option<&[f64]>,
    settings: &ObjectiveSettings,
    par: Parallelism,
    epoch: usize,
) -> Result<Evaluation> {
    let lambda = net.lambda();
    let (coeffs, fwd, f) = forward_all(net, problem, batch, par, lambda, settings.measure)?;
    let pe = psi_eigen.map(|p| weighted_bank(problem, batch, p));
    let t = terms(problem, &coeffs, &f, lambda, pe.as_deref(), settings);
    if !t.breakdown.is_finite() {
        return Err(Error::Divergence { epoch, loss: t.breakdown.total });
    }

    let mut work: Vec<(&ChunkForward, &[Jet3])> = Vec::with_capacity(fwd.len());
    let mut off = 0;
    for c in &fwd {
        work.push((c, &t.seeds[off..off + c.len()]));
        off += c.len();
    }
    let parts = par.map(&work, |(c, seeds)| backward_chunk(net, c, seeds));

    let mut grads = ParamGradients::zeros(net.param_count());
    let mut lambda_bar = t.lambda_bar;
    for (g, lb) in parts {
        grads.accumulate(&ParamGradients::from_vec(g));
        if settings.feedback == LambdaFeedback::Full {
            lambda_bar += lb;
        }
    }
    let lay = net.layout();
    grads.as_mut_slice()[lay.lambda_weight] += lambda_bar;
    grads.as_mut_slice()[lay.lambda_bias] += lambda_bar;
    if !grads.all_finite() {
        return Err(Error::Divergence { epoch, loss: t.breakdown.total });
    }
    Ok(Evaluation { breakdown: t.breakdown, grads, lambda })
}
