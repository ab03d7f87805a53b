//! Training loop: perturbed sampling, Adam updates, patience-based
//! recognition of converged eigenpairs, the bank of accepted
//! eigenfunctions, and symmetry switching on false convergence.

use std::collections::VecDeque;
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::dualgrad::{Jet3, ParamGradients};
use crate::error::{contract, Error, Result};
use crate::losses::{DriveSchedule, LossBreakdown, LossWeights, OrthoForm};
use crate::network::batch::{forward_chunk, values};
use crate::network::{EigenNet, NetConfig, SymmetryMode};
use crate::objective::{evaluate, LambdaFeedback, ObjectiveSettings};
use crate::parallel::Parallelism;
use crate::problems::{Problem, ResidualMeasure};

/// What the trainer does with the symmetry mode of a parity-embedded network.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SymmetryPolicy {
    /// Switch even ↔ odd only on false convergence.
    #[default]
    SwitchOnFalse,
    /// Also switch after every accepted solution.
    Alternate,
    /// Never switch.
    Fixed,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub epochs_max: usize,
    pub batch_size: usize,
    /// Standard deviation of the sample jitter, as a fraction of the grid spacing.
    pub perturbation_sigma: f64,
    pub de_threshold: f64,
    pub patience_window: usize,
    pub patience_threshold: f64,
    pub patience_statistic: PatienceStatistic,
    pub de_statistic: DeStatistic,
    pub target_solution_count: usize,
    pub rng_seed: u64,
    /// `None` picks even for parity-symmetric problems and no symmetry otherwise.
    pub initial_symmetry: Option<SymmetryMode>,
    pub symmetry_policy: SymmetryPolicy,
    pub weights: LossWeights,
    pub ortho_form: OrthoForm,
    pub drive: DriveSchedule,
    pub lambda_feedback: LambdaFeedback,
    pub residual_measure: ResidualMeasure,
    /// On false convergence without parity, λ restarts at
    /// `last + step·|last|` above the last accepted eigenvalue.
    pub lambda_reinit_step: f64,
    /// Points on which accepted eigenfunctions are reported.
    pub report_points: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 8e-3,
            epochs_max: 50_000,
            batch_size: 400,
            perturbation_sigma: 0.3,
            de_threshold: 1e-3,
            patience_window: 500,
            patience_threshold: 1e-6,
            patience_statistic: PatienceStatistic::Signed,
            de_statistic: DeStatistic::WindowMedian,
            target_solution_count: 4,
            rng_seed: 0,
            initial_symmetry: None,
            symmetry_policy: SymmetryPolicy::SwitchOnFalse,
            weights: LossWeights::default(),
            ortho_form: OrthoForm::SquaredSum,
            drive: DriveSchedule::default(),
            lambda_feedback: LambdaFeedback::Detached,
            residual_measure: ResidualMeasure::Inner,
            lambda_reinit_step: 0.5,
            report_points: 1001,
        }
    }
}

impl TrainConfig {
    /// Loss settings in effect at `epoch`.
    pub fn objective_settings(&self, epoch: usize) -> ObjectiveSettings {
        ObjectiveSettings {
            weights: self.weights,
            ortho: self.ortho_form,
            drive_c: self.drive.schedule_c(epoch),
            feedback: self.lambda_feedback,
            measure: self.residual_measure,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0) {
            return Err(contract("learning_rate must be positive"));
        }
        if self.patience_window < 2 {
            return Err(contract("patience_window must be at least 2"));
        }
        if !(self.de_threshold > 0.0 && self.patience_threshold > 0.0) {
            return Err(contract("thresholds must be positive"));
        }
        if self.batch_size < 2 {
            return Err(contract("batch_size must be at least 2"));
        }
        if !(self.perturbation_sigma >= 0.0) {
            return Err(contract("perturbation_sigma must be non-negative"));
        }
        if self.report_points < 2 {
            return Err(contract("report_points must be at least 2"));
        }
        self.weights.validate()
    }
}

/// Uniform grid of `m` points over the trainable part of the domain, each
/// jittered by Gaussian noise of standard deviation `sigma·dx` and clamped
/// back into the trainable region.
pub fn sample_batch(problem: &Problem, m: usize, sigma: f64, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let domain = &problem.domain;
    let intervals = domain.trainable();
    let total: f64 = intervals.iter().map(|(a, b)| b - a).sum();
    let dx = total / (m.max(2) - 1) as f64;
    let noise = if sigma > 0.0 { Normal::new(0.0, sigma * dx).ok() } else { None };
    (0..m)
        .map(|i| {
            let mut t = (i as f64 * dx).min(total);
            let mut x = intervals.last().map(|iv| iv.1).unwrap_or(domain.x_r);
            for &(a, b) in &intervals {
                if t <= b - a {
                    x = a + t;
                    break;
                }
                t -= b - a;
            }
            match &noise {
                Some(n) => domain.clamp(x + n.sample(rng)),
                None => x,
            }
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct AdamState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub step: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl AdamState {
    pub fn new(len: usize) -> Self {
        AdamState { m: vec![0.0; len], v: vec![0.0; len], step: 0, beta1: 0.9, beta2: 0.999, epsilon: 1e-8 }
    }
}

pub fn adam_step(params: &mut [f64], grads: &ParamGradients, state: &mut AdamState, lr: f64) -> Result<()> {
    let g = grads.as_slice();
    if params.len() != g.len() || state.m.len() != g.len() {
        return Err(contract("Adam buffers are not aligned with the parameters"));
    }
    if let Some(i) = g.iter().position(|v| !v.is_finite()) {
        return Err(contract(format!("non-finite gradient at parameter {i}: {}", g[i])));
    }
    state.step += 1;
    let (b1, b2) = (state.beta1, state.beta2);
    let c1 = 1.0 - b1.powi(state.step as i32);
    let c2 = 1.0 - b2.powi(state.step as i32);
    for (((p, &gi), m), v) in params.iter_mut().zip(g).zip(&mut state.m).zip(&mut state.v) {
        *m = b1 * *m + (1.0 - b1) * gi;
        *v = b2 * *v + (1.0 - b2) * gi * gi;
        let mhat = *m / c1;
        let vhat = *v / c2;
        *p -= lr * mhat / (vhat.sqrt() + state.epsilon);
    }
    Ok(())
}

/// Which successive-difference statistic the patience monitor averages.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PatienceStatistic {
    /// Mean of `L_DE(t) − L_DE(t−1)`; triggers when its magnitude is small.
    #[default]
    Signed,
    /// Mean of `|L_DE(t) − L_DE(t−1)|`.
    Absolute,
}

/// Rolling mean of successive `L_DE` differences over a fixed window.
#[derive(Clone, Debug)]
pub struct PatienceMonitor {
    window: usize,
    threshold: f64,
    statistic: PatienceStatistic,
    diffs: VecDeque<f64>,
    values: VecDeque<f64>,
    last: Option<f64>,
}

impl PatienceMonitor {
    pub fn new(window: usize, threshold: f64) -> Self {
        PatienceMonitor::with_statistic(window, threshold, PatienceStatistic::Signed)
    }

    pub fn with_statistic(window: usize, threshold: f64, statistic: PatienceStatistic) -> Self {
        PatienceMonitor {
            window,
            threshold,
            statistic,
            diffs: VecDeque::with_capacity(window),
            values: VecDeque::with_capacity(window),
            last: None,
        }
    }

    pub fn push(&mut self, l_de: f64) {
        if self.values.len() == self.window {
            self.values.pop_front();
        }
        self.values.push_back(l_de);
        if let Some(prev) = self.last {
            if self.diffs.len() == self.window {
                self.diffs.pop_front();
            }
            let d = l_de - prev;
            self.diffs.push_back(match self.statistic {
                PatienceStatistic::Signed => d,
                PatienceStatistic::Absolute => d.abs(),
            });
        }
        self.last = Some(l_de);
    }

    /// Arithmetic mean of the buffered differences.
    pub fn mean(&self) -> Option<f64> {
        if self.diffs.is_empty() {
            None
        } else {
            Some(self.diffs.iter().sum::<f64>() / self.diffs.len() as f64)
        }
    }

    /// Median of the buffered `L_DE` values.
    pub fn median(&self) -> Option<f64> {
        if self.values.is_empty() {
            return None;
        }
        let mut v: Vec<f64> = self.values.iter().copied().collect();
        v.sort_by(f64::total_cmp);
        let n = v.len();
        Some(if n % 2 == 1 { v[n / 2] } else { 0.5 * (v[n / 2 - 1] + v[n / 2]) })
    }

    /// The value compared against the `L_DE` threshold.
    pub fn de_level(&self, current: f64, statistic: DeStatistic) -> f64 {
        match statistic {
            DeStatistic::Current => current,
            DeStatistic::WindowMedian => self.median().unwrap_or(current),
        }
    }

    pub fn is_full(&self) -> bool {
        self.diffs.len() == self.window
    }

    pub fn triggered(&self) -> bool {
        self.is_full() && self.mean().is_some_and(|m| m.abs() < self.threshold)
    }

    pub fn reset(&mut self) {
        self.diffs.clear();
        self.values.clear();
        self.last = None;
    }
}

/// Which `L_DE` the recognition threshold is applied to.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DeStatistic {
    /// The loss of the current batch.
    Current,
    /// The median over the patience window.
    #[default]
    WindowMedian,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Recognition {
    Continue,
    Accept,
    FalseConvergence,
}

pub fn recognize(monitor: &PatienceMonitor, l_de: f64, de_threshold: f64) -> Recognition {
    if !monitor.triggered() {
        Recognition::Continue
    } else if l_de < de_threshold {
        Recognition::Accept
    } else {
        Recognition::FalseConvergence
    }
}

#[derive(Clone, Debug)]
pub struct BankEntry {
    pub net: Arc<EigenNet>,
    pub lambda: f64,
    pub epoch: usize,
    pub checksum: u64,
}

/// Frozen snapshots of accepted eigenfunctions.
#[derive(Clone, Debug, Default)]
pub struct EigenBank {
    entries: Vec<BankEntry>,
}

impl EigenBank {
    pub fn new() -> Self {
        EigenBank::default()
    }

    pub fn push(&mut self, net: EigenNet, epoch: usize) {
        let checksum = net.checksum();
        let lambda = net.lambda();
        self.entries.push(BankEntry { net: Arc::new(net), lambda, epoch, checksum });
    }

    pub fn entries(&self) -> &[BankEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// `Σ (f_k(x) − f_b)` over all snapshots, or `None` for an empty bank.
    pub fn psi_eigen(&self, problem: &Problem, xs: &[f64]) -> Option<Vec<f64>> {
        if self.entries.is_empty() {
            return None;
        }
        let spec = problem.parametric();
        let mut sum = vec![0.0; xs.len()];
        for e in &self.entries {
            for (s, f) in sum.iter_mut().zip(values(&e.net, &spec, xs)) {
                *s += f - spec.f_b;
            }
        }
        Some(sum)
    }

    /// True when no snapshot has changed since insertion.
    pub fn verify(&self) -> bool {
        self.entries.iter().all(|e| e.net.checksum() == e.checksum)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Event {
    Accept,
    OrthoAdded,
    SwitchSymmetry,
    FalseConvergence,
    ReinitLambda,
}

impl Event {
    pub fn as_str(self) -> &'static str {
        match self {
            Event::Accept => "ACCEPT",
            Event::OrthoAdded => "ORTHO_ADDED",
            Event::SwitchSymmetry => "SWITCH_SYMMETRY",
            Event::FalseConvergence => "FALSE_CONVERGENCE",
            Event::ReinitLambda => "REINIT_LAMBDA",
        }
    }
}

#[derive(Clone, Debug)]
pub struct TraceRow {
    pub epoch: usize,
    pub loss: LossBreakdown,
    pub lambda: f64,
    pub symmetry: SymmetryMode,
    pub events: Vec<Event>,
    /// Smallest point of the epoch's training batch.
    pub batch_min: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Parity {
    Even,
    Odd,
    Mixed,
}

impl Parity {
    pub fn as_str(self) -> &'static str {
        match self {
            Parity::Even => "even",
            Parity::Odd => "odd",
            Parity::Mixed => "mixed",
        }
    }
}

#[derive(Clone, Debug)]
pub struct AcceptedSolution {
    pub lambda: f64,
    pub epoch: usize,
    pub symmetry: SymmetryMode,
    pub parity: Option<Parity>,
    /// `L_DE` on the training batch at acceptance.
    pub l_de: f64,
    pub grid: Vec<f64>,
    pub f: Vec<Jet3>,
    pub net: EigenNet,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Outcome {
    /// `target_solution_count` solutions accepted.
    Complete,
    /// Some, but not all, requested solutions accepted.
    Partial,
    /// No solution accepted within `epochs_max`.
    NoConvergence,
}

#[derive(Clone, Debug)]
pub struct SolveReport {
    pub problem: Problem,
    pub solutions: Vec<AcceptedSolution>,
    pub trace: Vec<TraceRow>,
    pub outcome: Outcome,
}

impl SolveReport {
    pub fn epochs_run(&self) -> usize {
        self.trace.len()
    }

    pub fn events(&self) -> impl Iterator<Item = (usize, Event)> + '_ {
        self.trace.iter().flat_map(|r| r.events.iter().map(move |e| (r.epoch, *e)))
    }

    pub fn count(&self, event: Event) -> usize {
        self.events().filter(|(_, e)| *e == event).count()
    }
}

/// Evenly spaced points covering the trainable part of the domain.
pub fn report_grid(problem: &Problem, points: usize) -> Vec<f64> {
    let (a, b) = (problem.domain.no_train_floor(), problem.domain.x_r);
    let (a, b) = if problem.domain.no_train.is_empty() { (problem.domain.x_l, b) } else { (a, b) };
    (0..points).map(|i| a + (b - a) * i as f64 / (points - 1) as f64).collect()
}

/// Wrapped jets of `net` on arbitrary points.
pub fn sample_solution(net: &EigenNet, problem: &Problem, xs: &[f64]) -> Vec<Jet3> {
    let spec = problem.parametric();
    xs.chunks(crate::network::batch::CHUNK)
        .flat_map(|c| forward_chunk(net, &spec, c).f)
        .collect()
}

fn measured_parity(problem: &Problem, net: &EigenNet) -> Option<Parity> {
    if !problem.has_parity() {
        return None;
    }
    let spec = problem.parametric();
    let xs: Vec<f64> = report_grid(problem, 401);
    let mirrored: Vec<f64> = xs.iter().map(|x| -x).collect();
    let a = values(net, &spec, &xs);
    let b = values(net, &spec, &mirrored);
    let num: f64 = a.iter().zip(&b).map(|(p, q)| p * q).sum();
    let den: f64 = a.iter().map(|p| p * p).sum();
    if den == 0.0 {
        return Some(Parity::Mixed);
    }
    let r = num / den;
    Some(if r > 0.9 {
        Parity::Even
    } else if r < -0.9 {
        Parity::Odd
    } else {
        Parity::Mixed
    })
}

/// Runs the eigensolver loop until `target_solution_count` solutions are
/// accepted or `epochs_max` epochs have run.
pub fn solve(
    problem: &Problem,
    net_config: &NetConfig,
    train: &TrainConfig,
    par: Parallelism,
) -> Result<SolveReport> {
    solve_with(problem, net_config, train, par, |_, _| {})
}

/// [`solve`] with a callback invoked after every epoch, handed the solution
/// accepted in that epoch if there was one.
pub fn solve_with<F>(
    problem: &Problem,
    net_config: &NetConfig,
    train: &TrainConfig,
    par: Parallelism,
    mut on_epoch: F,
) -> Result<SolveReport>
where
    F: FnMut(&TraceRow, Option<&AcceptedSolution>),
{
    problem.validate()?;
    train.validate()?;
    let mut report = SolveReport {
        problem: problem.clone(),
        solutions: Vec::new(),
        trace: Vec::new(),
        outcome: Outcome::Complete,
    };
    if train.target_solution_count == 0 {
        return Ok(report);
    }

    let parity = problem.has_parity();
    let initial = train.initial_symmetry.unwrap_or(if parity {
        SymmetryMode::Even
    } else {
        SymmetryMode::NoSymmetry
    });
    let mut net = EigenNet::init(net_config.clone(), initial, train.rng_seed)?;
    let mut rng = ChaCha8Rng::seed_from_u64(train.rng_seed ^ 0x9e37_79b9_7f4a_7c15);
    let mut adam = AdamState::new(net.param_count());
    let mut monitor =
        PatienceMonitor::with_statistic(train.patience_window, train.patience_threshold, train.patience_statistic);
    let mut bank = EigenBank::new();
    let grid = report_grid(problem, train.report_points);

    for epoch in 0..train.epochs_max {
        let batch = sample_batch(problem, train.batch_size, train.perturbation_sigma, &mut rng);
        let psi = bank.psi_eigen(problem, &batch);
        let settings = train.objective_settings(epoch);
        let eval = match evaluate(&net, problem, &batch, psi.as_deref(), &settings, par, epoch) {
            Ok(e) => e,
            Err(Error::Divergence { loss, .. }) => return Err(Error::Divergence { epoch, loss }),
            Err(e) => return Err(e),
        };
        let l_de = eval.breakdown.l_de;
        monitor.push(l_de);
        let level = monitor.de_level(l_de, train.de_statistic);
        let mut decision = recognize(&monitor, level, train.de_threshold);
        // the snapshot waits for an epoch at or below the window's typical level
        if decision == Recognition::Accept && l_de > level {
            decision = Recognition::Continue;
        }

        let mut row = TraceRow {
            epoch,
            loss: eval.breakdown,
            lambda: eval.lambda,
            symmetry: net.symmetry,
            events: Vec::new(),
            batch_min: batch.iter().copied().fold(f64::INFINITY, f64::min),
        };
        let snapshot = (decision == Recognition::Accept).then(|| net.clone());

        adam_step(net.params_mut(), &eval.grads, &mut adam, train.learning_rate)
            .map_err(|e| match e {
                Error::Contract(msg) => Error::Contract(format!("epoch {epoch}: {msg}")),
                other => other,
            })?;

        match decision {
            Recognition::Continue => {}
            Recognition::Accept => {
                let snap = snapshot.expect("snapshot taken on accept");
                let f = sample_solution(&snap, problem, &grid);
                report.solutions.push(AcceptedSolution {
                    lambda: snap.lambda(),
                    epoch,
                    symmetry: snap.symmetry,
                    parity: match snap.symmetry {
                        SymmetryMode::Even => Some(Parity::Even),
                        SymmetryMode::Odd => Some(Parity::Odd),
                        SymmetryMode::NoSymmetry => measured_parity(problem, &snap),
                    },
                    l_de: level,
                    grid: grid.clone(),
                    f,
                    net: snap.clone(),
                });
                bank.push(snap, epoch);
                row.events.push(Event::Accept);
                row.events.push(Event::OrthoAdded);
                monitor.reset();
                if train.symmetry_policy == SymmetryPolicy::Alternate
                    && net.symmetry != SymmetryMode::NoSymmetry
                {
                    net.symmetry = net.symmetry.flipped();
                    row.events.push(Event::SwitchSymmetry);
                }
            }
            Recognition::FalseConvergence => {
                row.events.push(Event::FalseConvergence);
                monitor.reset();
                if net.symmetry != SymmetryMode::NoSymmetry {
                    if train.symmetry_policy != SymmetryPolicy::Fixed {
                        net.symmetry = net.symmetry.flipped();
                        row.events.push(Event::SwitchSymmetry);
                    }
                } else if !parity || train.symmetry_policy != SymmetryPolicy::Fixed {
                    let base = bank.entries().last().map(|e| e.lambda).unwrap_or(net.lambda());
                    net.set_lambda(base + train.lambda_reinit_step * base.abs().max(1e-3));
                    row.events.push(Event::ReinitLambda);
                }
            }
        }

        let accepted = row.events.contains(&Event::Accept).then(|| report.solutions.last()).flatten();
        on_epoch(&row, accepted);
        report.trace.push(row);
        if report.solutions.len() >= train.target_solution_count {
            break;
        }
    }

    report.outcome = if report.solutions.len() >= train.target_solution_count {
        Outcome::Complete
    } else if report.solutions.is_empty() {
        Outcome::NoConvergence
    } else {
        Outcome::Partial
    };
    Ok(report)
}
