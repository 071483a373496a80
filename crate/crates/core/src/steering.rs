//! Approximate steering on the circle diffeomorphism group.
//!
//! The planner produces a budget-independent sequence of moves and keeps the
//! best prefix seen so far, so a larger budget can only lower the error.
//!
//! Phase 1 repeatedly fits a field `v` whose time-1 flow carries the current
//! map onto the target (Gauss–Newton on the Fourier coefficients of `v`),
//! writes `v` over the family fields and right-normed brackets of them, and
//! appends one flow step per family coefficient and one commutator primitive
//! per bracket coefficient. Phase 2 greedily appends single family steps with
//! durations on the grid `±ε·2^j`.

use std::f64::consts::TAU;
use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::bracket_closure::{closure, spanning_test, FieldFamily, LieWord};
use crate::error::{Error, Result};
use crate::flows::{apply_step, apply_word_traced, CircleDiffeo, FlowStep, FlowWord, Integrator};
use crate::par;
use crate::trig_fields::{TrigEval, TrigPoly};

/// Largest mode the log fit and the spanning certificate look at.
pub const MAX_FIT_MODE: usize = 24;
/// Largest bracket coefficient realized by a single commutator primitive.
pub const PRIMITIVE_STEP: f64 = 0.1;
const MAX_SWEEPS: usize = 200;
const GN_ITERATIONS: usize = 12;

/// Sup-distance between lifts on a shared grid, minimized over `2πk` shifts.
pub fn diffeo_distance(phi: &CircleDiffeo, psi: &CircleDiffeo) -> Result<f64> {
    if phi.grid_size() != psi.grid_size() {
        return Err(Error::GridMismatch(phi.grid_size(), psi.grid_size()));
    }
    Ok(lift_distance(phi.lift(), psi.lift()))
}

fn lift_distance(a: &[f64], b: &[f64]) -> f64 {
    let (lo, hi) = a.iter().zip(b).fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), (x, y)| {
        let d = x - y;
        (lo.min(d), hi.max(d))
    });
    // max |d - 2πk| is convex in k and smallest near the midrange.
    let k0 = ((lo + hi) / 2.0 / TAU).round();
    [k0 - 1.0, k0, k0 + 1.0]
        .iter()
        .map(|k| (hi - k * TAU).abs().max((lo - k * TAU).abs()))
        .fold(f64::INFINITY, f64::min)
}

fn default_primitive_depth() -> usize {
    2
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SteeringProblem {
    #[serde(default = "FieldFamily::low_mode_generators")]
    pub family: FieldFamily<TrigPoly>,
    pub target: CircleDiffeo,
    /// Starting map; the identity on the target's grid when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub start: Option<CircleDiffeo>,
    pub epsilon: f64,
    pub budget: usize,
    #[serde(default = "default_primitive_depth")]
    pub primitive_depth: usize,
}

impl SteeringProblem {
    pub fn new(target: CircleDiffeo, epsilon: f64, budget: usize) -> Self {
        SteeringProblem {
            family: FieldFamily::low_mode_generators(),
            target,
            start: None,
            epsilon,
            budget,
            primitive_depth: default_primitive_depth(),
        }
    }

    pub fn start(&self) -> CircleDiffeo {
        self.start.clone().unwrap_or_else(|| CircleDiffeo::identity(self.target.grid_size()))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SteeringResult {
    pub word: FlowWord,
    pub achieved_error: f64,
    pub iterations: usize,
    pub converged: bool,
}

impl SteeringResult {
    /// `BudgetExhausted` unless the goal was met.
    pub fn require_converged(self, epsilon: f64) -> Result<SteeringResult> {
        if self.converged {
            Ok(self)
        } else {
            Err(Error::BudgetExhausted { achieved: self.achieved_error, epsilon })
        }
    }
}

/// Distance to `target` after each prefix of `word` applied to `start`; entry 0 is the empty prefix.
pub fn trajectory(word: &FlowWord, start: &CircleDiffeo, target: &CircleDiffeo) -> Result<Vec<f64>> {
    let mut out = vec![diffeo_distance(start, target)?];
    for phi in apply_word_traced(word, start, &Integrator::default())? {
        out.push(diffeo_distance(&phi, target)?);
    }
    Ok(out)
}

/// CSV `step,error` of a trajectory.
pub fn trajectory_csv(errors: &[f64]) -> String {
    let mut out = String::from("step,error\n");
    for (i, e) in errors.iter().enumerate() {
        let _ = writeln!(out, "{i},{e}");
    }
    out
}

/// Highest Fourier mode of `d` with amplitude above `threshold` (0 if none).
fn mode_content(d: &[f64], threshold: f64) -> usize {
    let m = d.len();
    let mut top = 0;
    for k in 1..m.div_ceil(2) {
        let (mut a, mut b) = (0.0, 0.0);
        for (i, x) in d.iter().enumerate() {
            let (s, c) = (k as f64 * TAU * i as f64 / m as f64).sin_cos();
            a += x * c;
            b += x * s;
        }
        if 2.0 * a.hypot(b) / m as f64 > threshold {
            top = k;
        }
    }
    top
}

/// Target samples shifted by the `2πk` that best matches `cur`.
fn aligned(cur: &[f64], target: &[f64]) -> Vec<f64> {
    let mean = cur.iter().zip(target).map(|(c, t)| c - t).sum::<f64>() / cur.len() as f64;
    let k = (mean / TAU).round();
    target.iter().map(|t| t + k * TAU).collect()
}

fn basis_row(theta: f64, k: usize) -> Vec<f64> {
    let mut row = vec![1.0];
    for n in 1..=k {
        let (s, c) = (n as f64 * theta).sin_cos();
        row.push(c);
        row.push(s);
    }
    row
}

fn lstsq(a: &DMatrix<f64>, b: &DVector<f64>) -> DVector<f64> {
    let svd = a.clone().svd(true, true);
    let smax = svd.singular_values.max();
    if smax == 0.0 {
        return DVector::zeros(a.ncols());
    }
    svd.solve(b, 1e-10 * smax).unwrap_or_else(|_| DVector::zeros(a.ncols()))
}

/// Coefficients (modes `0..=k`) of a field whose time-1 flow maps `cur[i]` to `target[i]`.
fn fit_log(cur: &[f64], target: &[f64], k: usize, integ: &Integrator) -> Result<Vec<f64>> {
    let n = 2 * k + 1;
    let m = cur.len();
    // Initial guess: displacement sampled at the midpoint of each path.
    let a = DMatrix::from_fn(m, n, |i, j| basis_row((cur[i] + target[i]) / 2.0, k)[j]);
    let b = DVector::from_fn(m, |i, _| target[i] - cur[i]);
    let mut p: Vec<f64> = lstsq(&a, &b).iter().copied().collect();

    let model = |p: &[f64]| -> Result<Vec<f64>> {
        let ev = TrigEval::from_dense(p);
        par::try_map(cur, |&x| integ.flow(&ev, 1.0, x))
    };
    let sq = |g: &[f64]| g.iter().zip(target).map(|(x, y)| (x - y) * (x - y)).sum::<f64>();
    let mut g = model(&p)?;
    let mut cost = sq(&g);
    for _ in 0..GN_ITERATIONS {
        let h: Vec<f64> = p.iter().map(|x| 1e-6 * x.abs().max(1.0)).collect();
        let cols = par::map_range(n, |j| {
            let mut q = p.clone();
            q[j] += h[j];
            model(&q)
        })
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
        let jac = DMatrix::from_fn(m, n, |i, j| (cols[j][i] - g[i]) / h[j]);
        let r = DVector::from_fn(m, |i, _| target[i] - g[i]);
        let delta = lstsq(&jac, &r);
        let mut step = 1.0;
        let mut improved = false;
        for _ in 0..6 {
            let q: Vec<f64> = p.iter().zip(delta.iter()).map(|(x, d)| x + step * d).collect();
            let gq = model(&q)?;
            let cq = sq(&gq);
            if cq < cost {
                p = q;
                g = gq;
                cost = cq;
                improved = true;
                break;
            }
            step /= 2.0;
        }
        if !improved || delta.amax() * step < 1e-13 {
            break;
        }
    }
    Ok(p)
}

/// A column of the decomposition: a family field or a bracket of family fields.
struct Column {
    word: LieWord,
    dense: Vec<f64>,
}

/// Family fields (level 0) and right-normed brackets of nesting `1..=depth`, restricted to modes `<= k`.
fn columns(family: &FieldFamily<TrigPoly>, depth: usize, k: usize) -> Vec<Vec<Column>> {
    let seeds = family.fields();
    let mut levels: Vec<Vec<(LieWord, TrigPoly)>> =
        vec![seeds.iter().enumerate().map(|(i, f)| (LieWord::Seed(i), f.clone())).collect()];
    for d in 1..=depth {
        let mut next = Vec::new();
        for (w, f) in &levels[d - 1] {
            for (j, s) in seeds.iter().enumerate() {
                if let LieWord::Seed(i) = w {
                    if *i >= j {
                        continue;
                    }
                }
                let b = f.bracket(s);
                if !b.is_zero() {
                    next.push((LieWord::bracket(w, &LieWord::Seed(j)), b));
                }
            }
        }
        levels.push(next);
    }
    levels
        .into_iter()
        .map(|lvl| {
            lvl.into_iter()
                .filter(|(_, f)| f.degree() <= k)
                .map(|(word, f)| Column { word, dense: f.dense_f64(k) })
                .collect()
        })
        .collect()
}

/// Indices of the first linearly independent columns, in enumeration order.
fn independent(lvl: &[Column]) -> Vec<usize> {
    let mut basis: Vec<Vec<f64>> = Vec::new();
    let mut keep = Vec::new();
    for (j, col) in lvl.iter().enumerate() {
        let mut r = col.dense.clone();
        for b in &basis {
            let dot: f64 = r.iter().zip(b).map(|(x, y)| x * y).sum();
            r.iter_mut().zip(b).for_each(|(x, y)| *x -= dot * y);
        }
        let norm = r.iter().map(|x| x * x).sum::<f64>().sqrt();
        let scale = col.dense.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-9 * scale.max(1e-300) {
            basis.push(r.iter().map(|x| x / norm).collect());
            keep.push(j);
        }
    }
    keep
}

/// Writes `v` level by level: each level absorbs what the cheaper levels could not.
fn decompose(v: &[f64], levels: &[Vec<Column>], drop_below: f64) -> Vec<(LieWord, f64)> {
    let mut rest = DVector::from_column_slice(v);
    let mut out = Vec::new();
    for lvl in levels {
        if lvl.is_empty() || rest.amax() <= drop_below {
            continue;
        }
        let idx = independent(lvl);
        let a = DMatrix::from_fn(v.len(), idx.len(), |i, j| lvl[idx[j]].dense[i]);
        let c = lstsq(&a, &rest);
        for (j, &col) in idx.iter().enumerate() {
            if c[j].abs() > drop_below {
                out.push((lvl[col].word.clone(), c[j]));
                rest -= DVector::from_column_slice(&lvl[col].dense) * c[j];
            }
        }
    }
    out
}

/// Steps approximating `e^{c·W}`.
///
/// A bracket `[X, Y]` is realized as two commutator primitives, the second
/// with `X, Y` replaced by `−X, −Y`: both carry `s²[X, Y]` while their
/// third-order terms cancel. A negative coefficient gives the exact inverse
/// word, which for a single primitive is the primitive with `X` and `Y`
/// swapped; nested primitives then cancel their even-order errors too.
fn realize(w: &LieWord, c: f64, family: &FieldFamily<TrigPoly>) -> Vec<FlowStep> {
    match w {
        LieWord::Seed(i) => vec![FlowStep::labeled(&family.labels()[*i], family.fields()[*i].clone(), c)],
        LieWord::Bracket(..) if c < 0.0 => FlowWord::new(realize(w, -c, family)).inverse().steps,
        LieWord::Bracket(x, y) => {
            let s = (c / 2.0).sqrt();
            let mut out = Vec::new();
            for sign in [1.0, -1.0] {
                out.extend(realize(y, -sign * s, family));
                out.extend(realize(x, -sign * s, family));
                out.extend(realize(y, sign * s, family));
                out.extend(realize(x, sign * s, family));
            }
            out
        }
    }
}

/// Best-prefix bookkeeping shared by both phases.
struct Tracker<'a> {
    target: &'a [f64],
    epsilon: f64,
    budget: usize,
    word: FlowWord,
    current: CircleDiffeo,
    error: f64,
    best_len: usize,
    best_error: f64,
    halted: bool,
}

impl Tracker<'_> {
    /// Appends one step; false once the budget is hit or the goal is met.
    fn push(&mut self, step: FlowStep, integ: &Integrator) -> Result<bool> {
        if self.halted {
            return Ok(false);
        }
        if self.word.len() + 1 > self.budget {
            self.halted = true;
            return Ok(false);
        }
        self.current = apply_step(&step, &self.current, integ)?;
        self.word.push(step);
        self.error = lift_distance(self.current.lift(), self.target);
        if self.error < self.best_error {
            self.best_error = self.error;
            self.best_len = self.word.len();
        }
        if self.best_error <= self.epsilon {
            self.halted = true;
        }
        Ok(!self.halted)
    }

    fn rewind_to_best(&mut self, start: &CircleDiffeo, integ: &Integrator) -> Result<()> {
        if self.word.len() == self.best_len {
            return Ok(());
        }
        self.word.steps.truncate(self.best_len);
        self.current = apply_word_traced(&self.word, start, integ)?.pop().unwrap_or_else(|| start.clone());
        self.error = self.best_error;
        Ok(())
    }
}

/// Plans a flow word from the problem's start towards its target.
///
/// Returns `converged = false` with the best word found when the budget runs
/// out; [`SteeringResult::require_converged`] turns that into an error.
pub fn steer(problem: &SteeringProblem) -> Result<SteeringResult> {
    if !(problem.epsilon > 0.0 && problem.epsilon.is_finite()) {
        return Err(Error::InvalidArgument(format!("epsilon must be positive, got {}", problem.epsilon)));
    }
    let start = problem.start();
    let target = &problem.target;
    if start.grid_size() != target.grid_size() {
        return Err(Error::GridMismatch(start.grid_size(), target.grid_size()));
    }
    let integ = Integrator::default();
    let eps = problem.epsilon;
    let family = &problem.family;

    // Precondition: the closure must span every mode the target moves.
    let d0: Vec<f64> = {
        let t = aligned(start.lift(), target.lift());
        t.iter().zip(start.lift()).map(|(t, s)| t - s).collect()
    };
    let content = mode_content(&d0, eps / 8.0).min(MAX_FIT_MODE);
    let cap = content.max(family.max_seed_mode());
    let cert_depth = (2 * cap + 2).max(problem.primitive_depth + 1);
    let report = closure(family, cert_depth, cap)?;
    if !spanning_test(&report, content) {
        return Err(Error::NotBracketGenerating { modes: content, depth: cert_depth });
    }

    let init_error = lift_distance(start.lift(), target.lift());
    let mut tr = Tracker {
        target: target.lift(),
        epsilon: eps,
        budget: problem.budget,
        word: FlowWord::default(),
        current: start.clone(),
        error: init_error,
        best_len: 0,
        best_error: init_error,
        halted: init_error <= eps,
    };
    let mut iterations = 0;

    // Phase 1.
    let seed_mode = family.max_seed_mode();
    // Brackets of nesting d have mode at most (d + 1) times the largest seed mode.
    let reach = cap.min(seed_mode * (problem.primitive_depth + 1)).max(seed_mode);
    let mut damping = 1.0;
    for _ in 0..MAX_SWEEPS {
        if tr.halted || damping < 1.0 / 16.0 {
            break;
        }
        iterations += 1;
        let before = tr.best_error;
        let t = aligned(tr.current.lift(), target.lift());
        let d: Vec<f64> = t.iter().zip(tr.current.lift()).map(|(t, c)| t - c).collect();
        let k = mode_content(&d, eps / 8.0).clamp(seed_mode, reach);
        let v = fit_log(tr.current.lift(), &t, k, &integ)?;
        let levels = columns(family, problem.primitive_depth, k);
        let coeffs = decompose(&v, &levels, eps * 1e-3);
        let mut steps = Vec::new();
        for (w, c) in coeffs.iter().filter(|(w, _)| matches!(w, LieWord::Seed(_))) {
            steps.extend(realize(w, damping * c, family));
        }
        for (w, c) in coeffs.iter().filter(|(w, _)| !matches!(w, LieWord::Seed(_))) {
            let c = damping * c;
            let pieces = (c.abs() / PRIMITIVE_STEP).ceil().max(1.0) as usize;
            for _ in 0..pieces {
                steps.extend(realize(w, c / pieces as f64, family));
            }
        }
        for s in steps {
            if !tr.push(s, &integ)? {
                break;
            }
        }
        if tr.halted {
            break;
        }
        tr.rewind_to_best(&start, &integ)?;
        if tr.best_error >= 0.9 * before {
            damping /= 2.0;
        }
    }

    // Phase 2.
    let mut durations = Vec::new();
    for j in -4..=12 {
        let t = eps * 2f64.powi(j);
        if t <= 4.0 {
            durations.push(t);
            durations.push(-t);
        }
    }
    tr.rewind_to_best(&start, &integ)?;
    while !tr.halted {
        let n = family.len() * durations.len();
        let scores = par::map_range(n, |idx| {
            let step = FlowStep::new(family.fields()[idx / durations.len()].clone(), durations[idx % durations.len()]);
            apply_step(&step, &tr.current, &integ)
                .map(|phi| lift_distance(phi.lift(), target.lift()))
                .unwrap_or(f64::NAN)
        });
        let Some(best) = par::argmin(&scores) else { break };
        if scores[best] >= tr.error {
            break;
        }
        iterations += 1;
        let i = best / durations.len();
        let step = FlowStep::labeled(&family.labels()[i], family.fields()[i].clone(), durations[best % durations.len()]);
        tr.push(step, &integ)?;
    }

    let mut word = tr.word;
    word.steps.truncate(tr.best_len);
    let achieved_error = match apply_word_traced(&word, &start, &integ)?.pop() {
        Some(phi) => diffeo_distance(&phi, target)?,
        None => diffeo_distance(&start, target)?,
    };
    Ok(SteeringResult { word, achieved_error, iterations, converged: achieved_error <= eps })
}
