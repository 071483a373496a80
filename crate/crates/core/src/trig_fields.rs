//! Truncated Fourier vector fields `v(θ)∂θ` on the circle with exact coefficients.
//!
//! The bracket follows the circle-group convention
//! `[v∂θ, w∂θ] = (v′w − w′v)∂θ`, which is the negative of the usual
//! commutator of vector fields.

use std::fmt;
use std::ops::{Add, Neg, Sub};

use num_traits::Zero;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::linalg::SparseVec;
use crate::rational::{format_q, parse_q, to_f64, Q};

/// Which trigonometric factor a basis field carries.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Kind {
    Cos,
    Sin,
}

/// Basis field `cos nθ ∂θ` or `sin nθ ∂θ`; `Mode { n: 0, kind: Cos }` is `∂θ`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Mode {
    pub n: usize,
    pub kind: Kind,
}

impl Mode {
    pub const CONST: Mode = Mode { n: 0, kind: Kind::Cos };

    pub fn cos(n: usize) -> Self {
        Mode { n, kind: Kind::Cos }
    }

    pub fn sin(n: usize) -> Self {
        assert!(n > 0, "sin 0θ is the zero field");
        Mode { n, kind: Kind::Sin }
    }

    /// All `2N + 1` basis fields with mode at most `n`.
    pub fn all_up_to(n: usize) -> Vec<Mode> {
        let mut out = vec![Mode::CONST];
        for k in 1..=n {
            out.push(Mode::cos(k));
            out.push(Mode::sin(k));
        }
        out
    }

    pub fn label(&self) -> String {
        match (self.n, self.kind) {
            (0, _) => "one".to_string(),
            (n, Kind::Cos) => format!("cos{n}"),
            (n, Kind::Sin) => format!("sin{n}"),
        }
    }

    /// Inverse of [`Mode::label`]; `cos0` is accepted as a synonym for `one`.
    pub fn from_label(label: &str) -> Option<Mode> {
        if label == "one" || label == "const" || label == "cos0" {
            return Some(Mode::CONST);
        }
        if let Some(n) = label.strip_prefix("cos") {
            return n.parse().ok().filter(|&n: &usize| n > 0).map(Mode::cos);
        }
        if let Some(n) = label.strip_prefix("sin") {
            return n.parse().ok().filter(|&n: &usize| n > 0).map(Mode::sin);
        }
        None
    }
}

/// A trigonometric polynomial vector field `(c0 + Σ aₙ cos nθ + Σ bₙ sin nθ)∂θ`.
///
/// `cos[n - 1]` and `sin[n - 1]` hold the mode-`n` coefficients. Trailing zero
/// modes are allowed; equality compares after zero-extension.
#[derive(Clone, Debug)]
pub struct TrigPoly {
    c0: Q,
    cos: Vec<Q>,
    sin: Vec<Q>,
}

impl TrigPoly {
    pub fn new(c0: Q, cos: Vec<Q>, sin: Vec<Q>) -> Result<Self> {
        if cos.len() != sin.len() {
            return Err(Error::InvalidArgument(format!(
                "cos/sin coefficient arrays differ in length ({} vs {})",
                cos.len(),
                sin.len()
            )));
        }
        Ok(TrigPoly { c0, cos, sin })
    }

    pub fn zero() -> Self {
        TrigPoly { c0: Q::zero(), cos: vec![], sin: vec![] }
    }

    pub fn constant(c: Q) -> Self {
        TrigPoly { c0: c, cos: vec![], sin: vec![] }
    }

    /// The unit basis field for `mode`.
    pub fn basis(mode: Mode) -> Self {
        let mut p = TrigPoly::with_max_mode(mode.n);
        p.set(mode, Q::from_integer(1.into()));
        p
    }

    pub fn cos_mode(n: usize) -> Self {
        Self::basis(Mode::cos(n))
    }

    pub fn sin_mode(n: usize) -> Self {
        Self::basis(Mode::sin(n))
    }

    pub fn with_max_mode(n: usize) -> Self {
        TrigPoly { c0: Q::zero(), cos: vec![Q::zero(); n], sin: vec![Q::zero(); n] }
    }

    /// Length of the coefficient arrays (not necessarily the highest nonzero mode).
    pub fn max_mode(&self) -> usize {
        self.cos.len()
    }

    /// Highest mode with a nonzero coefficient; 0 for constants and the zero field.
    pub fn degree(&self) -> usize {
        (1..=self.max_mode())
            .rev()
            .find(|&n| !self.cos[n - 1].is_zero() || !self.sin[n - 1].is_zero())
            .unwrap_or(0)
    }

    pub fn is_zero(&self) -> bool {
        self.c0.is_zero() && self.cos.iter().chain(&self.sin).all(Zero::is_zero)
    }

    pub fn c0(&self) -> &Q {
        &self.c0
    }

    pub fn cos_coeffs(&self) -> &[Q] {
        &self.cos
    }

    pub fn sin_coeffs(&self) -> &[Q] {
        &self.sin
    }

    /// Coefficient of a basis field; zero beyond `max_mode`.
    pub fn coeff(&self, mode: Mode) -> Q {
        match (mode.n, mode.kind) {
            (0, Kind::Cos) => self.c0.clone(),
            (0, Kind::Sin) => Q::zero(),
            (n, Kind::Cos) => self.cos.get(n - 1).cloned().unwrap_or_else(Q::zero),
            (n, Kind::Sin) => self.sin.get(n - 1).cloned().unwrap_or_else(Q::zero),
        }
    }

    fn set(&mut self, mode: Mode, value: Q) {
        if mode.n > self.max_mode() {
            self.cos.resize(mode.n, Q::zero());
            self.sin.resize(mode.n, Q::zero());
        }
        match (mode.n, mode.kind) {
            (0, Kind::Cos) => self.c0 = value,
            (0, Kind::Sin) => {}
            (n, Kind::Cos) => self.cos[n - 1] = value,
            (n, Kind::Sin) => self.sin[n - 1] = value,
        }
    }

    /// Drops trailing zero modes.
    pub fn trimmed(&self) -> Self {
        let d = self.degree();
        TrigPoly { c0: self.c0.clone(), cos: self.cos[..d].to_vec(), sin: self.sin[..d].to_vec() }
    }

    pub fn scale(&self, c: &Q) -> Self {
        TrigPoly {
            c0: &self.c0 * c,
            cos: self.cos.iter().map(|x| x * c).collect(),
            sin: self.sin.iter().map(|x| x * c).collect(),
        }
    }

    /// θ-derivative of the coefficient function.
    pub fn derivative(&self) -> Self {
        let n = self.max_mode();
        let mut out = TrigPoly::with_max_mode(n);
        for k in 1..=n {
            let kq = Q::from_integer(k.into());
            out.cos[k - 1] = &self.sin[k - 1] * &kq;
            out.sin[k - 1] = -(&self.cos[k - 1] * &kq);
        }
        out
    }

    /// Pointwise product of the coefficient functions, expanded by product-to-sum.
    pub fn product(&self, other: &Self) -> Self {
        let (na, nb) = (self.max_mode(), other.max_mode());
        let n = na + nb;
        let mut cos = vec![Q::zero(); n + 1];
        let mut sin = vec![Q::zero(); n + 1];
        let half = Q::new(1.into(), 2.into());
        // cos and sin coefficient of mode k as seen by the product rule; k = 0 gives (c0, 0).
        let ca = |p: &TrigPoly, k: usize| if k == 0 { p.c0.clone() } else { p.cos[k - 1].clone() };
        let sa = |p: &TrigPoly, k: usize| if k == 0 { Q::zero() } else { p.sin[k - 1].clone() };
        // Accumulate c·cos(mθ) and c·sin(mθ) for signed m.
        let mut add_cos = |m: i64, c: &Q| cos[m.unsigned_abs() as usize] += c;
        for i in 0..=na {
            let (ai, bi) = (ca(self, i), sa(self, i));
            for j in 0..=nb {
                let (aj, bj) = (ca(other, j), sa(other, j));
                let (ii, jj) = (i as i64, j as i64);
                if !ai.is_zero() && !aj.is_zero() {
                    let c = &ai * &aj * &half;
                    add_cos(ii - jj, &c);
                    add_cos(ii + jj, &c);
                }
                if !bi.is_zero() && !bj.is_zero() {
                    let c = &bi * &bj * &half;
                    add_cos(ii - jj, &c);
                    add_cos(ii + jj, &(-c));
                }
            }
        }
        let mut add_sin = |m: i64, c: &Q| {
            if m > 0 {
                sin[m as usize] += c;
            } else if m < 0 {
                sin[(-m) as usize] -= c;
            }
        };
        for i in 0..=na {
            let (ai, bi) = (ca(self, i), sa(self, i));
            for j in 0..=nb {
                let (aj, bj) = (ca(other, j), sa(other, j));
                let (ii, jj) = (i as i64, j as i64);
                // sin i · cos j = ½[sin(i+j) + sin(i−j)]
                if !bi.is_zero() && !aj.is_zero() {
                    let c = &bi * &aj * &half;
                    add_sin(ii + jj, &c);
                    add_sin(ii - jj, &c);
                }
                // cos i · sin j = ½[sin(i+j) − sin(i−j)]
                if !ai.is_zero() && !bj.is_zero() {
                    let c = &ai * &bj * &half;
                    add_sin(ii + jj, &c);
                    add_sin(ii - jj, &(-c));
                }
            }
        }
        let c0 = cos[0].clone();
        TrigPoly { c0, cos: cos[1..].to_vec(), sin: sin[1..].to_vec() }
    }

    /// Lie bracket `(v′w − w′v)∂θ`.
    pub fn bracket(&self, other: &Self) -> Self {
        let a = self.derivative().product(other);
        let b = other.derivative().product(self);
        &a - &b
    }

    /// Coefficient function value `c0 + Σ aₙ cos nθ + Σ bₙ sin nθ`.
    pub fn evaluate(&self, theta: f64) -> f64 {
        TrigEval::new(self).eval(theta)
    }

    /// Nonzero coefficients keyed by basis field.
    pub fn to_sparse(&self) -> SparseVec<Mode> {
        let mut out = SparseVec::new();
        if !self.c0.is_zero() {
            out.insert(Mode::CONST, self.c0.clone());
        }
        for k in 1..=self.max_mode() {
            if !self.cos[k - 1].is_zero() {
                out.insert(Mode::cos(k), self.cos[k - 1].clone());
            }
            if !self.sin[k - 1].is_zero() {
                out.insert(Mode::sin(k), self.sin[k - 1].clone());
            }
        }
        out
    }

    pub fn from_sparse(v: &SparseVec<Mode>) -> Self {
        let mut p = TrigPoly::zero();
        for (m, c) in v {
            p.set(*m, c.clone());
        }
        p
    }

    /// Coefficients as floats, in basis order `one, cos1, sin1, cos2, ...` up to mode `n`.
    pub fn dense_f64(&self, n: usize) -> Vec<f64> {
        Mode::all_up_to(n).iter().map(|m| to_f64(&self.coeff(*m))).collect()
    }
}

impl PartialEq for TrigPoly {
    fn eq(&self, other: &Self) -> bool {
        if self.c0 != other.c0 {
            return false;
        }
        let n = self.max_mode().max(other.max_mode());
        (1..=n).all(|k| {
            self.coeff(Mode::cos(k)) == other.coeff(Mode::cos(k))
                && self.coeff(Mode::sin(k)) == other.coeff(Mode::sin(k))
        })
    }
}

impl Eq for TrigPoly {}

impl<'a> Add for &'a TrigPoly {
    type Output = TrigPoly;
    fn add(self, rhs: &'a TrigPoly) -> TrigPoly {
        let n = self.max_mode().max(rhs.max_mode());
        let mut out = TrigPoly::with_max_mode(n);
        out.c0 = &self.c0 + &rhs.c0;
        for k in 1..=n {
            out.cos[k - 1] = self.coeff(Mode::cos(k)) + rhs.coeff(Mode::cos(k));
            out.sin[k - 1] = self.coeff(Mode::sin(k)) + rhs.coeff(Mode::sin(k));
        }
        out
    }
}

impl<'a> Sub for &'a TrigPoly {
    type Output = TrigPoly;
    fn sub(self, rhs: &'a TrigPoly) -> TrigPoly {
        self + &(-rhs)
    }
}

impl Neg for &TrigPoly {
    type Output = TrigPoly;
    fn neg(self) -> TrigPoly {
        TrigPoly {
            c0: -&self.c0,
            cos: self.cos.iter().map(|x| -x).collect(),
            sin: self.sin.iter().map(|x| -x).collect(),
        }
    }
}

impl fmt::Display for TrigPoly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let terms: Vec<String> = self
            .to_sparse()
            .iter()
            .map(|(m, c)| {
                let trig = if m.kind == Kind::Cos { "cos" } else { "sin" };
                match m.n {
                    0 => format_q(c),
                    1 => format!("{}·{trig}θ", format_q(c)),
                    n => format!("{}·{trig}{n}θ", format_q(c)),
                }
            })
            .collect();
        if terms.is_empty() {
            write!(f, "0·∂θ")
        } else {
            write!(f, "({})∂θ", terms.join(" + "))
        }
    }
}

#[derive(Serialize, Deserialize)]
struct TrigPolyRepr {
    c0: String,
    cos: Vec<String>,
    sin: Vec<String>,
}

impl Serialize for TrigPoly {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        TrigPolyRepr {
            c0: format_q(&self.c0),
            cos: self.cos.iter().map(format_q).collect(),
            sin: self.sin.iter().map(format_q).collect(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for TrigPoly {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let r = TrigPolyRepr::deserialize(d)?;
        let parse = |s: &String| parse_q(s).map_err(D::Error::custom);
        let c0 = parse(&r.c0)?;
        let cos = r.cos.iter().map(parse).collect::<std::result::Result<Vec<_>, _>>()?;
        let sin = r.sin.iter().map(parse).collect::<std::result::Result<Vec<_>, _>>()?;
        TrigPoly::new(c0, cos, sin).map_err(D::Error::custom)
    }
}

/// Floating-point evaluator for a [`TrigPoly`], used on integration hot paths.
#[derive(Clone, Debug)]
pub struct TrigEval {
    c0: f64,
    cos: Vec<f64>,
    sin: Vec<f64>,
}

impl TrigEval {
    pub fn new(p: &TrigPoly) -> Self {
        let t = p.trimmed();
        TrigEval {
            c0: to_f64(&t.c0),
            cos: t.cos.iter().map(to_f64).collect(),
            sin: t.sin.iter().map(to_f64).collect(),
        }
    }

    /// Evaluator for float coefficients in basis order `one, cos1, sin1, cos2, ...`.
    pub fn from_dense(coeffs: &[f64]) -> Self {
        let c0 = coeffs.first().copied().unwrap_or(0.0);
        let rest = coeffs.get(1..).unwrap_or(&[]);
        let mut cos: Vec<f64> = rest.iter().step_by(2).copied().collect();
        let mut sin: Vec<f64> = rest.iter().skip(1).step_by(2).copied().collect();
        sin.resize(cos.len(), 0.0);
        while cos.last() == Some(&0.0) && sin.last() == Some(&0.0) {
            cos.pop();
            sin.pop();
        }
        TrigEval { c0, cos, sin }
    }

    pub fn eval(&self, theta: f64) -> f64 {
        let (s1, c1) = theta.sin_cos();
        let (mut ck, mut sk) = (1.0f64, 0.0f64);
        let mut acc = self.c0;
        for (a, b) in self.cos.iter().zip(&self.sin) {
            // Angle addition: (cos, sin)((k+1)θ) from (cos, sin)(kθ).
            let c_next = ck * c1 - sk * s1;
            let s_next = sk * c1 + ck * s1;
            ck = c_next;
            sk = s_next;
            acc += a * ck + b * sk;
        }
        acc
    }

    pub fn is_zero(&self) -> bool {
        self.c0 == 0.0 && self.cos.is_empty()
    }
}
