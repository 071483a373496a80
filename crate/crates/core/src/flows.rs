//! Flows of circle vector fields acting on sampled circle diffeomorphisms.
//!
//! A diffeomorphism is stored as its lift `φ̃` sampled at `θᵢ = 2πi/m`. Flow
//! words are applied step by step in list order; each step post-composes the
//! current map with the time-`t` flow of one field, `φ ↦ e^{tX} ∘ φ`.

use std::f64::consts::TAU;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::bracket_closure::FieldFamily;
use crate::error::{Error, Result};
use crate::par;
use crate::trig_fields::{Mode, TrigEval, TrigPoly};

pub const DEFAULT_GRID: usize = 256;
pub const DEFAULT_RTOL: f64 = 1e-10;

/// Adaptive Dormand–Prince 5(4) integrator for `dθ/ds = v(θ)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Integrator {
    pub rtol: f64,
    pub atol: f64,
    pub max_steps: usize,
}

impl Default for Integrator {
    fn default() -> Self {
        Integrator::with_tolerance(DEFAULT_RTOL)
    }
}

// Dormand–Prince tableau (the field is autonomous, so the nodes are not needed).
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
// Fifth-order weights minus embedded fourth-order weights.
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

impl Integrator {
    pub fn with_tolerance(rtol: f64) -> Self {
        Integrator { rtol, atol: rtol, max_steps: 1_000_000 }
    }

    /// Solves `dθ/ds = v(θ)`, `θ(0) = theta0` up to `s = t` (either sign). Returns the unwrapped lift.
    pub fn flow(&self, v: &TrigEval, t: f64, theta0: f64) -> Result<f64> {
        if !t.is_finite() || !theta0.is_finite() {
            return Err(Error::InvalidArgument(format!("non-finite flow input t = {t}, θ0 = {theta0}")));
        }
        if t == 0.0 || v.is_zero() {
            return Ok(theta0);
        }
        let dir = t.signum();
        let span = t.abs();
        let mut s = 0.0f64;
        let mut y = theta0;
        let mut h = span.min(0.05);
        let h_min = 1e-14 * span.max(1.0);
        let mut k = [0.0f64; 7];
        k[0] = v.eval(y);
        for _ in 0..self.max_steps {
            if s >= span {
                return Ok(y);
            }
            let last = s + h >= span;
            if last {
                h = span - s;
            }
            let hs = dir * h;
            for i in 1..7 {
                let mut acc = 0.0;
                for j in 0..i {
                    acc += A[i][j] * k[j];
                }
                k[i] = v.eval(y + hs * acc);
            }
            // Row 6 of A holds the fifth-order weights (FSAL).
            let mut incr = 0.0;
            let mut err = 0.0;
            for i in 0..7 {
                if i < 6 {
                    incr += A[6][i] * k[i];
                }
                err += E[i] * k[i];
            }
            let y_new = y + hs * incr;
            let scale = self.atol + self.rtol * y.abs().max(y_new.abs());
            let ratio = (hs * err).abs() / scale;
            if ratio <= 1.0 {
                s = if last { span } else { s + h };
                y = y_new;
                k[0] = k[6];
            }
            let factor = if ratio == 0.0 { 5.0 } else { (0.9 * ratio.powf(-0.2)).clamp(0.2, 5.0) };
            h *= factor;
            if h < h_min && s < span {
                return Err(Error::IntegrationFailure { t: dir * s, reason: format!("step size underflow ({h:.3e})") });
            }
        }
        Err(Error::IntegrationFailure { t: dir * s, reason: "step limit reached".into() })
    }
}

/// Time-`t` flow of `v` from `theta0` at the default tolerance.
pub fn integrate_flow(v: &TrigPoly, t: f64, theta0: f64) -> Result<f64> {
    Integrator::default().flow(&TrigEval::new(v), t, theta0)
}

/// Orientation-preserving circle diffeomorphism sampled on a uniform grid.
///
/// Invariants: samples strictly increase and the wrap-around gap
/// `lift[0] + 2π − lift[m-1]` is positive, so the periodic extension
/// `φ̃(θ + 2π) = φ̃(θ) + 2π` is strictly increasing too.
#[derive(Clone, Debug, PartialEq)]
pub struct CircleDiffeo {
    lift: Vec<f64>,
}

impl CircleDiffeo {
    pub fn from_lift(lift: Vec<f64>) -> Result<Self> {
        validate_lift(&lift)?;
        Ok(CircleDiffeo { lift })
    }

    pub fn identity(m: usize) -> Self {
        CircleDiffeo { lift: (0..m).map(|i| grid_theta(m, i)).collect() }
    }

    pub fn rotation(m: usize, angle: f64) -> Self {
        CircleDiffeo { lift: (0..m).map(|i| grid_theta(m, i) + angle).collect() }
    }

    pub fn grid_size(&self) -> usize {
        self.lift.len()
    }

    pub fn lift(&self) -> &[f64] {
        &self.lift
    }

    pub fn theta(&self, i: usize) -> f64 {
        grid_theta(self.lift.len(), i)
    }

    /// Displacement `φ̃(θᵢ) − θᵢ` on the grid.
    pub fn displacement(&self) -> Vec<f64> {
        self.lift.iter().enumerate().map(|(i, y)| y - self.theta(i)).collect()
    }

    /// Monotone cubic (Fritsch–Carlson, harmonic-mean slopes) interpolation of the lift.
    pub fn eval(&self, theta: f64) -> f64 {
        let m = self.lift.len();
        let h = TAU / m as f64;
        let wraps = (theta / TAU).floor();
        let x = theta - wraps * TAU;
        let i = ((x / h).floor() as usize).min(m - 1);
        let y = |j: isize| -> f64 {
            let q = j.rem_euclid(m as isize) as usize;
            let shift = (j - q as isize) / m as isize;
            self.lift[q] + shift as f64 * TAU
        };
        let ii = i as isize;
        let (y0, y1) = (y(ii), y(ii + 1));
        let slope = |j: isize| -> f64 {
            let dl = (y(j) - y(j - 1)) / h;
            let dr = (y(j + 1) - y(j)) / h;
            2.0 * dl * dr / (dl + dr)
        };
        let (m0, m1) = (slope(ii), slope(ii + 1));
        let s = (x - i as f64 * h) / h;
        let (s2, s3) = (s * s, s * s * s);
        let h00 = 2.0 * s3 - 3.0 * s2 + 1.0;
        let h10 = s3 - 2.0 * s2 + s;
        let h01 = -2.0 * s3 + 3.0 * s2;
        let h11 = s3 - s2;
        h00 * y0 + h10 * h * m0 + h01 * y1 + h11 * h * m1 + wraps * TAU
    }

    /// `self ∘ inner`, sampled on `inner`'s grid.
    pub fn compose(&self, inner: &CircleDiffeo) -> Result<CircleDiffeo> {
        CircleDiffeo::from_lift(inner.lift.iter().map(|&x| self.eval(x)).collect())
    }

    /// CSV with header `theta,lift`, one row per grid sample.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("theta,lift\n");
        for (i, y) in self.lift.iter().enumerate() {
            let _ = writeln!(out, "{},{}", self.theta(i), y);
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut rows = Vec::new();
        for (n, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || (n == 0 && line.starts_with("theta")) {
                continue;
            }
            let mut cols = line.split(',');
            let parse = |c: Option<&str>| -> Result<f64> {
                c.and_then(|s| s.trim().parse().ok())
                    .ok_or_else(|| Error::InvalidArgument(format!("bad CSV row {}: `{line}`", n + 1)))
            };
            let th = parse(cols.next())?;
            let y = parse(cols.next())?;
            rows.push((th, y));
        }
        let m = rows.len();
        for (i, (th, _)) in rows.iter().enumerate() {
            if (th - grid_theta(m, i)).abs() > 1e-9 {
                return Err(Error::InvalidArgument(format!("row {i}: θ = {th} is off the uniform {m}-point grid")));
            }
        }
        CircleDiffeo::from_lift(rows.into_iter().map(|r| r.1).collect())
    }
}

#[derive(Serialize, Deserialize)]
struct DiffeoRepr {
    grid_size: usize,
    lift_values: Vec<f64>,
}

impl Serialize for CircleDiffeo {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        DiffeoRepr { grid_size: self.lift.len(), lift_values: self.lift.clone() }.serialize(s)
    }
}

impl<'de> Deserialize<'de> for CircleDiffeo {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let r = DiffeoRepr::deserialize(d)?;
        if r.grid_size != r.lift_values.len() {
            return Err(D::Error::custom("grid_size does not match the number of lift values"));
        }
        CircleDiffeo::from_lift(r.lift_values).map_err(D::Error::custom)
    }
}

pub fn grid_theta(m: usize, i: usize) -> f64 {
    TAU * i as f64 / m as f64
}

fn validate_lift(lift: &[f64]) -> Result<()> {
    if lift.is_empty() {
        return Err(Error::NotADiffeomorphism("empty grid".into()));
    }
    if let Some(i) = lift.iter().position(|x| !x.is_finite()) {
        return Err(Error::NotADiffeomorphism(format!("sample {i} is not finite")));
    }
    if let Some(i) = lift.windows(2).position(|w| w[1] <= w[0]) {
        return Err(Error::NotADiffeomorphism(format!("lift not increasing at sample {i}")));
    }
    if lift[lift.len() - 1] >= lift[0] + TAU {
        return Err(Error::NotADiffeomorphism("wrap-around gap is not positive".into()));
    }
    Ok(())
}

/// One step `e^{tX}` of a flow word.
#[derive(Clone, Debug, PartialEq)]
pub struct FlowStep {
    pub label: Option<String>,
    pub field: TrigPoly,
    pub duration: f64,
}

impl FlowStep {
    pub fn new(field: TrigPoly, duration: f64) -> Self {
        FlowStep { label: None, field, duration }
    }

    pub fn labeled(label: &str, field: TrigPoly, duration: f64) -> Self {
        FlowStep { label: Some(label.to_string()), field, duration }
    }
}

/// Finite sequence of flow steps, applied in list order.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct FlowWord {
    pub steps: Vec<FlowStep>,
}

impl FlowWord {
    pub fn new(steps: Vec<FlowStep>) -> Self {
        FlowWord { steps }
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn concat(&self, other: &FlowWord) -> FlowWord {
        FlowWord { steps: self.steps.iter().chain(&other.steps).cloned().collect() }
    }

    pub fn push(&mut self, step: FlowStep) {
        self.steps.push(step);
    }

    /// Word undoing `self`: reversed order, negated durations.
    pub fn inverse(&self) -> FlowWord {
        FlowWord {
            steps: self
                .steps
                .iter()
                .rev()
                .map(|s| FlowStep { label: s.label.clone(), field: s.field.clone(), duration: -s.duration })
                .collect(),
        }
    }

    pub fn to_spec(&self) -> Vec<StepSpec> {
        self.steps
            .iter()
            .map(|s| StepSpec {
                field: match &s.label {
                    Some(l) => FieldRef::Label(l.clone()),
                    None => FieldRef::Inline(s.field.clone()),
                },
                t: s.duration,
            })
            .collect()
    }

    /// Resolves a parsed word; labels are looked up in `family` first, then as basis labels (`one`, `cos2`, ...).
    pub fn from_spec(spec: &[StepSpec], family: Option<&FieldFamily<TrigPoly>>) -> Result<FlowWord> {
        let steps = spec
            .iter()
            .map(|s| {
                if !s.t.is_finite() {
                    return Err(Error::InvalidArgument(format!("non-finite duration {}", s.t)));
                }
                Ok(match &s.field {
                    FieldRef::Inline(f) => FlowStep::new(f.clone(), s.t),
                    FieldRef::Label(l) => FlowStep::labeled(l, resolve_label(l, family)?, s.t),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(FlowWord { steps })
    }
}

pub fn resolve_label(label: &str, family: Option<&FieldFamily<TrigPoly>>) -> Result<TrigPoly> {
    if let Some(f) = family.and_then(|fam| fam.get(label)) {
        return Ok(f.clone());
    }
    Mode::from_label(label).map(TrigPoly::basis).ok_or_else(|| Error::UnknownLabel(label.to_string()))
}

/// Field reference in the JSON word format.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum FieldRef {
    Label(String),
    Inline(TrigPoly),
}

/// JSON entry `{"field": <label or inline field>, "t": <duration>}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepSpec {
    pub field: FieldRef,
    pub t: f64,
}

impl Serialize for FlowWord {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.to_spec().serialize(s)
    }
}

impl<'de> Deserialize<'de> for FlowWord {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let spec = Vec::<StepSpec>::deserialize(d)?;
        FlowWord::from_spec(&spec, None).map_err(serde::de::Error::custom)
    }
}

/// Applies `word` to `phi`, returning the map after every step (the last entry is the result).
pub fn apply_word_traced(word: &FlowWord, phi: &CircleDiffeo, integrator: &Integrator) -> Result<Vec<CircleDiffeo>> {
    let mut current = phi.clone();
    let mut trace = Vec::with_capacity(word.len());
    for (n, step) in word.steps.iter().enumerate() {
        current = apply_step(step, &current, integrator).map_err(|e| match e {
            Error::NotADiffeomorphism(why) => {
                Error::NotADiffeomorphism(format!("after step {n}: {why} (integration tolerance breached)"))
            }
            other => other,
        })?;
        trace.push(current.clone());
    }
    Ok(trace)
}

/// Post-composes `phi` with the flow of one step.
pub fn apply_step(step: &FlowStep, phi: &CircleDiffeo, integrator: &Integrator) -> Result<CircleDiffeo> {
    let ev = TrigEval::new(&step.field);
    let t = step.duration;
    let lift = par::try_map(phi.lift(), |&x| integrator.flow(&ev, t, x))?;
    CircleDiffeo::from_lift(lift)
}

/// `word` applied to `phi` at the default tolerance.
pub fn apply_word(word: &FlowWord, phi: &CircleDiffeo) -> Result<CircleDiffeo> {
    apply_word_with(word, phi, &Integrator::default())
}

pub fn apply_word_with(word: &FlowWord, phi: &CircleDiffeo, integrator: &Integrator) -> Result<CircleDiffeo> {
    Ok(apply_word_traced(word, phi, integrator)?.pop().unwrap_or_else(|| phi.clone()))
}

/// `((e^{−tY}∘e^{−tX}∘e^{tY}∘e^{tX})(θ) − θ)/t²`, with the factors applied
/// left to right (`e^{−tY}` first). Tends to `[X, Y](θ)` as `t → 0`.
pub fn commutator_flow_residual(x: &TrigPoly, y: &TrigPoly, theta: f64, t: f64) -> Result<f64> {
    commutator_flow_residual_with(x, y, theta, t, &Integrator::default())
}

pub fn commutator_flow_residual_with(
    x: &TrigPoly,
    y: &TrigPoly,
    theta: f64,
    t: f64,
    integrator: &Integrator,
) -> Result<f64> {
    if t == 0.0 || !t.is_finite() {
        return Err(Error::InvalidArgument(format!("residual needs a finite nonzero t, got {t}")));
    }
    let (ex, ey) = (TrigEval::new(x), TrigEval::new(y));
    let mut p = theta;
    p = integrator.flow(&ey, -t, p)?;
    p = integrator.flow(&ex, -t, p)?;
    p = integrator.flow(&ey, t, p)?;
    p = integrator.flow(&ex, t, p)?;
    Ok((p - theta) / (t * t))
}

/// The 4-step word whose net effect approximates `e^{s²[X, Y]}`.
pub fn commutator_word(x: &FlowStep, y: &FlowStep, s: f64) -> FlowWord {
    let step = |f: &FlowStep, d: f64| FlowStep { label: f.label.clone(), field: f.field.clone(), duration: d };
    FlowWord::new(vec![step(y, -s), step(x, -s), step(y, s), step(x, s)])
}
