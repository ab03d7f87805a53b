//! Property suites shared by the `properties` and `acceptance` targets.
#![allow(dead_code)]

use eigenpinn::config::RunConfig;
use eigenpinn::dualgrad::{grad, Jet, Jet3, Real, Var};
use eigenpinn::losses::{l_orth, LossWeights, OrthoForm};
use eigenpinn::network::batch::values;
use eigenpinn::network::{forward_generic, forward_raw, forward_symmetric, EigenNet, NetConfig};
use eigenpinn::network::{ParametricKind, ParametricSpec, SymmetryMode};
use eigenpinn::objective::{evaluate, loss_only, LambdaFeedback, ObjectiveSettings};
use eigenpinn::oracle::{fd_hamiltonian, fd_spectrum, well_bound_states};
use eigenpinn::parallel::Parallelism;
use eigenpinn::problems::{builtin_problem, potential_eval, residual, Builtin, PotentialSpec, Problem};
use eigenpinn::trainer::{solve, solve_with, EigenBank, SymmetryPolicy, TrainConfig};
use proptest::prelude::*;
use proptest::test_runner::{Config, TestCaseError, TestRng, TestRunner};

pub type Suite = (&'static str, fn(u32) -> Result<(), String>);

/// Every invariant suite with its name. The argument is the case count.
pub const SUITES: &[Suite] = &[
    ("jets match finite differences in x", jets_match_fd),
    ("parameter gradients match finite differences per term", term_gradients_match_fd),
    ("gradient is linear in the loss", gradient_linearity),
    ("boundary identity", boundary_identity),
    ("symmetry identity", symmetry_identity),
    ("mirrored raw net equals symmetric net", mirrored_raw_matches_symmetric),
    ("loss terms are non-negative", losses_non_negative),
    ("normalized empty-bank loss is L_DE", normalized_loss_is_l_de),
    ("ortho loss ignores paired permutations", orth_permutation_invariant),
    ("bank snapshots are immutable", bank_immutable),
    ("training is deterministic and the bank only grows", training_deterministic),
    ("residual is linear in f", residual_linear),
    ("analytic well states solve the residual", analytic_residual),
    ("well potentials are even", potentials_even),
    ("Sturm count matches the bound-state count", sturm_count_matches),
    ("FD eigenvectors converge at second order", fd_residual_second_order),
    ("config round trip is a fixed point", config_round_trip),
];

pub fn run<S: Strategy>(
    cases: u32,
    strategy: S,
    test: impl Fn(S::Value) -> Result<(), TestCaseError>,
) -> Result<(), String> {
    let config = Config { cases, failure_persistence: None, ..Config::default() };
    let rng = TestRng::deterministic_rng(config.rng_algorithm);
    let mut runner = TestRunner::new_with_rng(config, rng);
    runner.run(&strategy, test).map_err(|e| e.to_string())
}

fn close(a: f64, b: f64, rel: f64, abs: f64) -> bool {
    let d = (a - b).abs();
    d <= abs || d <= rel * a.abs().max(b.abs())
}

#[derive(Clone, Debug)]
pub struct NetCase {
    pub hidden: Vec<usize>,
    pub seed: u64,
    pub symmetry: SymmetryMode,
    pub lambda: f64,
    pub lambda_weight: f64,
    pub input_scale: f64,
}

impl NetCase {
    pub fn build(&self) -> EigenNet {
        let cfg = NetConfig { hidden: self.hidden.clone(), lambda_start: 0.0, input_scale: self.input_scale };
        let mut net = EigenNet::init(cfg, self.symmetry, self.seed).unwrap();
        let lw = net.layout().lambda_weight;
        net.params_mut()[lw] = self.lambda_weight;
        net.set_lambda(self.lambda);
        net
    }
}

fn symmetry() -> impl Strategy<Value = SymmetryMode> {
    prop_oneof![Just(SymmetryMode::NoSymmetry), Just(SymmetryMode::Even), Just(SymmetryMode::Odd)]
}

pub fn net_case(max_width: usize) -> impl Strategy<Value = NetCase> {
    (
        prop::collection::vec(1..=max_width, 1..=3),
        any::<u64>(),
        symmetry(),
        -3.0..3.0f64,
        -1.0..1.0f64,
        0.5..3.0f64,
    )
        .prop_map(|(hidden, seed, symmetry, lambda, lambda_weight, input_scale)| NetCase {
            hidden,
            seed,
            symmetry,
            lambda,
            lambda_weight,
            input_scale,
        })
}

pub fn builtin() -> impl Strategy<Value = Builtin> {
    prop_oneof![
        Just(Builtin::SingleWell),
        Just(Builtin::DoubleWell),
        Just(Builtin::InfiniteWell),
        Just(Builtin::Harmonic),
        (0u32..4).prop_map(|l| Builtin::Hydrogen { l }),
    ]
}

/// Evenly spread points over the trainable region with a random phase.
pub fn batch_for(problem: &Problem, m: usize, phase: f64) -> Vec<f64> {
    let a = problem.domain.no_train_floor();
    let b = problem.domain.x_r;
    (0..m).map(|i| a + (b - a) * (i as f64 + phase) / m as f64).collect()
}

pub fn psi_for(batch: &[f64], freq: f64) -> Vec<f64> {
    batch.iter().map(|x| (freq * x).sin() + 0.3).collect()
}

/// Richardson-extrapolated central difference of the total loss in
/// parameter `i`.
pub fn fd_param(
    net: &EigenNet,
    problem: &Problem,
    batch: &[f64],
    psi: Option<&[f64]>,
    settings: &ObjectiveSettings,
    i: usize,
) -> f64 {
    let h = 1e-4 * net.params()[i].abs().max(1.0);
    let at = |d: f64| {
        let mut n = net.clone();
        n.params_mut()[i] += d;
        loss_only(&n, problem, batch, psi, settings, Parallelism::Sequential).unwrap().total
    };
    let central = |h: f64| (at(h) - at(-h)) / (2.0 * h);
    (4.0 * central(0.5 * h) - central(h)) / 3.0
}

/// Gradient agreement test used by criterion 1: relative error below 1e-5,
/// or absolute error below 1e-8.
pub fn gradient_agrees(fd: f64, an: f64) -> bool {
    close(fd, an, 1e-5, 1e-8)
}

fn jets_match_fd(cases: u32) -> Result<(), String> {
    run(cases, (net_case(8), builtin(), 0.05..0.95f64), |(case, which, t)| {
        let net = case.build();
        let problem = builtin_problem(which);
        let spec = problem.parametric();
        let (a, b) = (problem.domain.no_train_floor() + 0.01, problem.domain.x_r - 0.01);
        let x = a + t * (b - a);
        let jet = eigenpinn::trainer::sample_solution(&net, &problem, &[x])[0];
        let v = |x: f64| values(&net, &spec, &[x])[0];
        let (h1, h2) = (1e-4, 1e-3);
        let d1 = (v(x + h1) - v(x - h1)) / (2.0 * h1);
        let d2 = (v(x + h2) - 2.0 * v(x) + v(x - h2)) / (h2 * h2);
        let scale = jet.v.abs().max(jet.d1.abs()).max(jet.d2.abs()).max(1.0);
        prop_assert!((d1 - jet.d1).abs() < 1e-5 * scale, "d1 {} vs {d1}", jet.d1);
        prop_assert!((d2 - jet.d2).abs() < 1e-5 * scale, "d2 {} vs {d2}", jet.d2);
        Ok(())
    })
}

fn term_gradients_match_fd(cases: u32) -> Result<(), String> {
    let strategy = (net_case(5), builtin(), 0.0..1.0f64, 0usize..6, any::<prop::sample::Index>());
    run(cases, strategy, |(case, which, phase, term, pick)| {
        let net = case.build();
        let problem = builtin_problem(which);
        let batch = batch_for(&problem, 23, phase);
        let psi = psi_for(&batch, 0.7);
        let mut w = LossWeights { nu_norm: 0.0, nu_orth: 0.0, nu_drive: 0.0, nu_f: 0.0, nu_lambda: 0.0 };
        match term {
            1 => w.nu_norm = 1.0,
            2 => w.nu_orth = 1.0,
            3 => w.nu_drive = 1.0,
            4 => w.nu_f = 1.0,
            5 => w.nu_lambda = 1.0,
            _ => {}
        }
        let settings = ObjectiveSettings { weights: w, drive_c: 0.5, feedback: LambdaFeedback::Full, ..Default::default() };
        let e = evaluate(&net, &problem, &batch, Some(&psi), &settings, Parallelism::Sequential, 0).unwrap();
        let lay = net.layout();
        // one parameter of each class: hidden weight, hidden bias, λ-neuron
        let first = &lay.layers[0];
        let probes = [
            first.weight + pick.index(first.weight_len()),
            first.bias + pick.index(first.rows),
            lay.output().weight + pick.index(lay.output().cols),
            lay.lambda_weight,
            lay.lambda_bias,
        ];
        for i in probes {
            let fd = fd_param(&net, &problem, &batch, Some(&psi), &settings, i);
            let an = e.grads.as_slice()[i];
            prop_assert!(gradient_agrees(fd, an), "term {term} param {i}: fd {fd} vs {an}");
        }
        Ok(())
    })
}

fn jet_of<'t>(like: Var<'t>, x: f64) -> Jet<Var<'t>> {
    Jet { v: like.lift(x), d1: like.lift(1.0), d2: like.lift(0.0) }
}

fn probe_loss<'t>(
    lay: &eigenpinn::network::Layout,
    p: &[Var<'t>],
    scale: f64,
    sym: SymmetryMode,
    x: f64,
    second: bool,
) -> Var<'t> {
    let (n, lam) = forward_generic(lay, p, scale, sym, jet_of(p[0], x));
    if second {
        n.v * n.v + lam.sin()
    } else {
        n.v * n.d2 + lam * n.d1
    }
}

fn gradient_linearity(cases: u32) -> Result<(), String> {
    run(cases, (net_case(6), -2.0..2.0f64, -2.0..2.0f64, -1.0..1.0f64, -1.0..1.0f64), |(case, x1, x2, a, b)| {
        let net = case.build();
        let lay = net.layout().clone();
        let (scale, sym) = (net.input_scale(), net.symmetry);
        let (_, g1) = grad(net.params(), 0, |p| Ok(probe_loss(&lay, p, scale, sym, x1, false))).unwrap();
        let (_, g2) = grad(net.params(), 0, |p| Ok(probe_loss(&lay, p, scale, sym, x2, true))).unwrap();
        let (_, g) = grad(net.params(), 0, |p| {
            Ok(probe_loss(&lay, p, scale, sym, x1, false) * a + probe_loss(&lay, p, scale, sym, x2, true) * b)
        })
        .unwrap();
        for ((c, p), q) in g.as_slice().iter().zip(g1.as_slice()).zip(g2.as_slice()) {
            let want = a * p + b * q;
            prop_assert!(close(*c, want, 1e-12, 1e-13), "{c} vs {want}");
        }
        Ok(())
    })
}

fn boundary_identity(cases: u32) -> Result<(), String> {
    let kinds = prop_oneof![Just(ParametricKind::TwoSided), Just(ParametricKind::TwoSidedSymmetric)];
    run(cases, (net_case(10), kinds, -5.0..0.0f64, 0.5..8.0f64, -2.0..2.0f64), |(case, kind, x_l, width, f_b)| {
        let net = case.build();
        let spec = ParametricSpec { kind, x_l, x_r: x_l + width, f_b, decay: 1.0 };
        let v = values(&net, &spec, &[spec.x_l, spec.x_r]);
        prop_assert!((v[0] - f_b).abs() <= 1e-12, "f(x_L) = {}", v[0]);
        prop_assert!((v[1] - f_b).abs() <= 1e-12, "f(x_R) = {}", v[1]);
        Ok(())
    })
}

fn symmetry_identity(cases: u32) -> Result<(), String> {
    let parity = prop_oneof![Just(SymmetryMode::Even), Just(SymmetryMode::Odd)];
    run(cases, (net_case(10), parity, 0.5..8.0f64, 0.0..1.0f64, -1.0..1.0f64), |(mut case, mode, half, t, f_b)| {
        case.symmetry = mode;
        let net = case.build();
        let x = t * half;
        let sign = if mode == SymmetryMode::Even { 1.0 } else { -1.0 };
        let n = |x: f64| net.forward(Jet3::input(x)).0.v;
        let (p, m) = (n(x), n(-x));
        prop_assert!((p - sign * m).abs() <= 1e-12 * p.abs().max(1.0), "N({x}) = {p}, N(-x) = {m}");
        if mode == SymmetryMode::Even {
            let spec = ParametricSpec { kind: ParametricKind::TwoSidedSymmetric, x_l: -half, x_r: half, f_b, decay: 1.0 };
            let v = values(&net, &spec, &[x, -x]);
            prop_assert!(((v[0] - f_b) - (v[1] - f_b)).abs() <= 1e-12 * v[0].abs().max(1.0));
        }
        Ok(())
    })
}

fn mirrored_raw_matches_symmetric(cases: u32) -> Result<(), String> {
    let parity = prop_oneof![Just(SymmetryMode::Even), Just(SymmetryMode::Odd)];
    run(cases, (any::<u64>(), parity, -2.0..2.0f64, 0.5..2.0f64), |(seed, mode, x, input_scale)| {
        let width = 2;
        let sym_cfg = NetConfig { hidden: vec![width], lambda_start: 0.4, input_scale };
        let sym = EigenNet::init(sym_cfg, mode, seed).unwrap();
        let raw_cfg = NetConfig { hidden: vec![2 * width], lambda_start: 0.4, input_scale };
        let mut raw = EigenNet::zeros(raw_cfg, SymmetryMode::NoSymmetry).unwrap();
        let (sl, rl) = (sym.layout().clone(), raw.layout().clone());
        let sign = if mode == SymmetryMode::Even { 1.0 } else { -1.0 };
        let (sp, rp) = (sym.params().to_vec(), raw.params_mut());
        let (sh, rh) = (&sl.layers[0], &rl.layers[0]);
        for j in 0..width {
            for (row, mirror) in [(j, 1.0), (j + width, -1.0)] {
                rp[rh.weight + 2 * row] = mirror * sp[sh.weight + 2 * j];
                rp[rh.weight + 2 * row + 1] = sp[sh.weight + 2 * j + 1];
                rp[rh.bias + row] = sp[sh.bias + j];
            }
            rp[rl.output().weight + j] = sp[sl.output().weight + j];
            rp[rl.output().weight + j + width] = sign * sp[sl.output().weight + j];
        }
        if mode == SymmetryMode::Even {
            rp[rl.output().bias] = sp[sl.output().bias];
        }
        rp[rl.lambda_weight] = sp[sl.lambda_weight];
        rp[rl.lambda_bias] = sp[sl.lambda_bias];
        let a = forward_raw(&raw, Jet3::input(x)).0;
        let b = forward_symmetric(&sym, Jet3::input(x)).unwrap().0;
        for (p, q) in [(a.v, b.v), (a.d1, b.d1), (a.d2, b.d2)] {
            prop_assert!(close(p, q, 1e-12, 1e-14), "{p} vs {q}");
        }
        Ok(())
    })
}

fn losses_non_negative(cases: u32) -> Result<(), String> {
    let form = prop_oneof![Just(OrthoForm::SquaredSum), Just(OrthoForm::Squared)];
    let weights = (0.0..3.0f64, 0.0..3.0f64, 0.0..3.0f64, 0.0..3.0f64, 0.0..3.0f64);
    run(cases, (net_case(8), builtin(), form, weights, 0.0..1.0f64, -2.0..5.0f64), |(case, which, form, w, phase, c)| {
        let net = case.build();
        let problem = builtin_problem(which);
        let batch = batch_for(&problem, 31, phase);
        let psi = psi_for(&batch, 1.3);
        let weights = LossWeights { nu_norm: w.0, nu_orth: w.1, nu_drive: w.2, nu_f: w.3, nu_lambda: w.4 };
        let settings = ObjectiveSettings { weights, ortho: form, drive_c: c, ..Default::default() };
        let l = loss_only(&net, &problem, &batch, Some(&psi), &settings, Parallelism::Sequential).unwrap();
        for (name, v) in [
            ("l_de", l.l_de),
            ("l_norm", l.l_norm),
            ("l_orth", l.l_orth),
            ("l_drive", l.l_drive),
            ("l_f", l.l_f),
            ("l_lambda", l.l_lambda),
            ("total", l.total),
        ] {
            prop_assert!(v >= 0.0, "{name} = {v}");
        }
        Ok(())
    })
}

fn normalized_loss_is_l_de(cases: u32) -> Result<(), String> {
    let cartesian = prop_oneof![Just(Builtin::SingleWell), Just(Builtin::InfiniteWell), Just(Builtin::Harmonic)];
    run(cases, (net_case(8), cartesian, 0.0..1.0f64), |(case, which, phase)| {
        let mut net = case.build();
        let problem = builtin_problem(which);
        let batch = batch_for(&problem, 40, phase);
        // f = g·N with N affine in the output layer, so scaling that layer scales f
        let spec = problem.parametric();
        let f = values(&net, &spec, &batch);
        let s2: f64 = f.iter().map(|v| v * v).sum();
        prop_assume!(s2 > 1e-8);
        let target = batch.len() as f64 / (problem.domain.x_r - problem.domain.x_l);
        let k = (target / s2).sqrt();
        let out = net.layout().output().clone();
        for p in &mut net.params_mut()[out.weight..out.bias + out.rows] {
            *p *= k;
        }
        let settings = ObjectiveSettings::default();
        let l = loss_only(&net, &problem, &batch, None, &settings, Parallelism::Sequential).unwrap();
        prop_assert!(l.l_norm < 1e-20, "l_norm = {}", l.l_norm);
        prop_assert!(close(l.total, l.l_de, 1e-12, 1e-18), "total {} vs l_de {}", l.total, l.l_de);
        Ok(())
    })
}

fn orth_permutation_invariant(cases: u32) -> Result<(), String> {
    let pairs = prop::collection::vec((-2.0..2.0f64, -2.0..2.0f64), 1..60);
    let strategy = pairs.prop_flat_map(|p| (Just(p.clone()), Just(p).prop_shuffle()));
    run(cases, strategy, |(pairs, shuffled)| {
        for form in [OrthoForm::SquaredSum, OrthoForm::Squared, OrthoForm::Signed] {
            let eval = |p: &[(f64, f64)]| {
                let e: Vec<f64> = p.iter().map(|q| q.0).collect();
                let f: Vec<f64> = p.iter().map(|q| q.1).collect();
                l_orth(&e, &f, 0.1, form).unwrap()
            };
            let (a, b) = (eval(&pairs), eval(&shuffled));
            prop_assert!(close(a, b, 1e-12, 1e-12), "{form:?}: {a} vs {b}");
        }
        Ok(())
    })
}

fn bank_immutable(cases: u32) -> Result<(), String> {
    run(cases, (net_case(6), 1usize..5, 0.0..1.0f64), |(case, count, phase)| {
        let problem = builtin_problem(Builtin::SingleWell);
        let batch = batch_for(&problem, 25, phase);
        let mut net = case.build();
        let mut bank = EigenBank::new();
        let mut sizes = Vec::new();
        for k in 0..count {
            bank.push(net.clone(), k);
            sizes.push(bank.len());
            let before = bank.psi_eigen(&problem, &batch).unwrap();
            for p in net.params_mut() {
                *p += 0.25;
            }
            prop_assert!(bank.verify());
            prop_assert_eq!(bank.psi_eigen(&problem, &batch).unwrap(), before);
        }
        prop_assert!(sizes.windows(2).all(|w| w[1] == w[0] + 1));
        prop_assert!(bank.entries().iter().all(|e| e.net.checksum() == e.checksum));
        Ok(())
    })
}

/// Small run that accepts frequently.
pub fn quick_train(seed: u64) -> (Problem, NetConfig, TrainConfig) {
    let problem = builtin_problem(Builtin::SingleWell);
    let net = NetConfig { hidden: vec![6, 5], lambda_start: 1.0, input_scale: 2.0 };
    let train = TrainConfig {
        epochs_max: 160,
        batch_size: 50,
        patience_window: 12,
        patience_threshold: 1e3,
        de_threshold: 1e6,
        target_solution_count: 5,
        symmetry_policy: SymmetryPolicy::Alternate,
        report_points: 41,
        rng_seed: seed,
        ..TrainConfig::default()
    };
    (problem, net, train)
}

fn training_deterministic(cases: u32) -> Result<(), String> {
    run(cases, any::<u64>(), |seed| {
        let (problem, net, train) = quick_train(seed);
        let mut counts = Vec::new();
        let a = solve_with(&problem, &net, &train, Parallelism::Rayon, |_, s| counts.push(s.is_some())).unwrap();
        let b = solve(&problem, &net, &train, Parallelism::Sequential).unwrap();
        prop_assert!(!a.solutions.is_empty());
        prop_assert_eq!(a.trace.len(), b.trace.len());
        for (p, q) in a.trace.iter().zip(&b.trace) {
            prop_assert_eq!(p.loss, q.loss);
            prop_assert_eq!(p.lambda.to_bits(), q.lambda.to_bits());
            prop_assert_eq!(&p.events, &q.events);
        }
        prop_assert_eq!(a.solutions.len(), b.solutions.len());
        for (p, q) in a.solutions.iter().zip(&b.solutions) {
            prop_assert_eq!(p.net.params(), q.net.params());
            prop_assert_eq!(&p.f, &q.f);
        }
        prop_assert_eq!(counts.iter().filter(|c| **c).count(), a.solutions.len());
        // accepted epochs strictly increase
        prop_assert!(a.solutions.windows(2).all(|w| w[0].epoch < w[1].epoch));
        Ok(())
    })
}

fn residual_linear(cases: u32) -> Result<(), String> {
    let jet = (-3.0..3.0f64, -3.0..3.0f64, -3.0..3.0f64);
    run(cases, (builtin(), 0.01..0.99f64, jet, -4.0..4.0f64, -2.0..2.0f64), |(which, t, (v, d1, d2), alpha, lam)| {
        let problem = builtin_problem(which);
        let (a, b) = (problem.domain.no_train_floor(), problem.domain.x_r);
        let x = a + t * (b - a);
        let f = Jet3::new(v, d1, d2);
        let scaled = Jet3::new(alpha * v, alpha * d1, alpha * d2);
        let r1 = residual(&problem, f, x, lam).unwrap();
        let r2 = residual(&problem, scaled, x, lam).unwrap();
        prop_assert!(close(r2, alpha * r1, 1e-12, 1e-12), "{r2} vs {}", alpha * r1);
        Ok(())
    })
}

fn analytic_residual(cases: u32) -> Result<(), String> {
    run(cases, (0.5..3.0f64, 2.0..60.0f64), |(length, depth)| {
        let states = well_bound_states(length, depth).unwrap();
        let problem = Problem {
            potential: PotentialSpec::FiniteWell { length, depth },
            ..builtin_problem(Builtin::SingleWell)
        };
        for s in states {
            let xs: Vec<f64> = (0..400).map(|i| -6.0 + 12.0 * (i as f64 + 0.37) / 400.0).collect();
            let ms: f64 = xs
                .iter()
                .map(|&x| {
                    let v = s.value(x);
                    let curv = if x.abs() <= 0.5 * length { -s.k * s.k } else { s.alpha * s.alpha };
                    residual(&problem, Jet3::new(v, s.slope(x), curv * v), x, s.energy).unwrap().powi(2)
                })
                .sum::<f64>()
                / xs.len() as f64;
            prop_assert!(ms < 1e-6, "E = {}: mean square residual {ms}", s.energy);
        }
        Ok(())
    })
}

fn potentials_even(cases: u32) -> Result<(), String> {
    let single = (0.1..4.0f64, 0.1..50.0f64).prop_map(|(length, depth)| PotentialSpec::FiniteWell { length, depth });
    let multi = (1usize..5, 0.1..3.0f64, 0.0..3.0f64, 0.1..50.0f64)
        .prop_map(|(well_count, length, gap, depth)| PotentialSpec::MultiWell { well_count, length, gap, depth });
    run(cases, (prop_oneof![single, multi], 0.0..10.0f64), |(spec, x)| {
        let (a, b) = (potential_eval(&spec, x).unwrap(), potential_eval(&spec, -x).unwrap());
        prop_assert_eq!(a, b, "V({}) vs V({})", x, -x);
        Ok(())
    })
}

fn sturm_count_matches(cases: u32) -> Result<(), String> {
    run(cases, (0.5..2.0f64, 1.0..40.0f64), |(length, depth)| {
        let z0 = 0.5 * length * (2.0 * depth).sqrt();
        let gap = (z0 / std::f64::consts::FRAC_PI_2).fract();
        prop_assume!(gap > 0.03 && gap < 0.97);
        let states = well_bound_states(length, depth).unwrap();
        let half = 0.5 * length + 25.0;
        let problem = Problem {
            potential: PotentialSpec::FiniteWell { length, depth },
            domain: eigenpinn::problems::DomainSpec { x_l: -half, x_r: half, no_train: vec![] },
            ..builtin_problem(Builtin::SingleWell)
        };
        let (_, t, _) = fd_hamiltonian(&problem, 8000).unwrap();
        prop_assert_eq!(t.sturm_count(depth), states.len());
        Ok(())
    })
}

/// Mean square of the continuous operator applied to FD eigenvectors, with a
/// fourth-order stencil standing in for the exact second derivative.
pub fn fd_operator_residual(problem: &Problem, grid: usize, k: usize) -> f64 {
    let s = fd_spectrum(problem, grid, k + 1).unwrap();
    let (v, lam, h) = (&s.eigenvectors[k], s.eigenvalues[k], s.dx);
    let at = |i: isize| if i < 0 || i as usize >= v.len() { 0.0 } else { v[i as usize] };
    let n = v.len() as isize;
    let total: f64 = (2..n - 2)
        .map(|i| {
            let d2 = (-at(i - 2) + 16.0 * at(i - 1) - 30.0 * at(i) + 16.0 * at(i + 1) - at(i + 2)) / (12.0 * h * h);
            let x = s.grid[i as usize];
            let d1 = (at(i - 2) - 8.0 * at(i - 1) + 8.0 * at(i + 1) - at(i + 2)) / (12.0 * h);
            residual(problem, Jet3::new(at(i), d1, d2), x, lam).unwrap().powi(2)
        })
        .sum();
    total / (n - 4) as f64
}

fn fd_residual_second_order(cases: u32) -> Result<(), String> {
    let smooth = prop_oneof![Just(Builtin::InfiniteWell), Just(Builtin::Harmonic)];
    run(cases, (smooth, 0usize..4, 200usize..400), |(which, k, grid)| {
        let problem = builtin_problem(which);
        let coarse = fd_operator_residual(&problem, grid, k);
        let fine = fd_operator_residual(&problem, 2 * grid + 1, k);
        // residual ∝ h², its mean square ∝ h⁴
        let order = (coarse / fine).log2() / 2.0;
        prop_assert!((order - 2.0).abs() < 0.15, "order {order} ({coarse:e} → {fine:e})");
        Ok(())
    })
}

pub fn run_config() -> impl Strategy<Value = RunConfig> {
    let train = (
        1e-5..1e-1f64,
        1usize..100_000,
        2usize..2000,
        0.0..2.0f64,
        1e-8..10.0f64,
        2usize..5000,
        any::<u64>(),
        prop::option::of(symmetry()),
        prop_oneof![Just(SymmetryPolicy::SwitchOnFalse), Just(SymmetryPolicy::Alternate), Just(SymmetryPolicy::Fixed)],
        (0.0..5.0f64, 0.0..5.0f64, 0.0..1.0f64),
    );
    let net = (prop::collection::vec(1usize..80, 1..4), -5.0..5.0f64, 0.1..30.0f64);
    (builtin(), any::<bool>(), prop::option::of("[a-z]{1,8}(/[a-z]{1,8})?"), net, train).prop_map(
        |(which, inline, out_dir, (hidden, lambda_start, input_scale), t)| {
            let mut cfg = RunConfig::builtin(which);
            if inline {
                cfg.builtin = None;
                cfg.problem = Some(builtin_problem(which));
            }
            cfg.out_dir = out_dir;
            cfg.net = NetConfig { hidden, lambda_start, input_scale };
            let tr = &mut cfg.train;
            tr.learning_rate = t.0;
            tr.epochs_max = t.1;
            tr.batch_size = t.2;
            tr.perturbation_sigma = t.3;
            tr.de_threshold = t.4;
            tr.patience_window = t.5;
            tr.rng_seed = t.6;
            tr.initial_symmetry = t.7;
            tr.symmetry_policy = t.8;
            tr.weights.nu_norm = t.9 .0;
            tr.weights.nu_orth = t.9 .1;
            tr.weights.nu_drive = t.9 .2;
            cfg
        },
    )
}

fn config_round_trip(cases: u32) -> Result<(), String> {
    run(cases, run_config(), |cfg| {
        let text = cfg.to_toml().unwrap();
        let back = RunConfig::from_toml(&text).map_err(|e| TestCaseError::fail(format!("{e}\n{text}")))?;
        prop_assert_eq!(&back, &cfg);
        prop_assert_eq!(back.to_toml().unwrap(), text);
        Ok(())
    })
}
