//! Polynomial vector fields on Rⁿ with rational coefficients.

use std::collections::BTreeMap;

use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::SparseVec;
use crate::rational::{format_q, parse_q, Q};

/// Exponent vector of a monomial.
pub type Monomial = Vec<u32>;

/// Sparse multivariate polynomial in a fixed number of variables.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Polynomial {
    nvars: usize,
    terms: BTreeMap<Monomial, Q>,
}

impl Polynomial {
    pub fn zero(nvars: usize) -> Self {
        Polynomial { nvars, terms: BTreeMap::new() }
    }

    pub fn constant(nvars: usize, c: Q) -> Self {
        let mut p = Self::zero(nvars);
        p.add_term(vec![0; nvars], c);
        p
    }

    /// The coordinate function `x_i`.
    pub fn var(nvars: usize, i: usize) -> Self {
        let mut e = vec![0; nvars];
        e[i] = 1;
        let mut p = Self::zero(nvars);
        p.add_term(e, Q::one());
        p
    }

    pub fn nvars(&self) -> usize {
        self.nvars
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> &BTreeMap<Monomial, Q> {
        &self.terms
    }

    pub fn add_term(&mut self, exps: Monomial, c: Q) {
        assert_eq!(exps.len(), self.nvars, "monomial arity");
        if c.is_zero() {
            return;
        }
        let e = self.terms.entry(exps.clone()).or_insert_with(Q::zero);
        *e += c;
        if e.is_zero() {
            self.terms.remove(&exps);
        }
    }

    pub fn total_degree(&self) -> u32 {
        self.terms.keys().map(|e| e.iter().sum()).max().unwrap_or(0)
    }

    pub fn add(&self, other: &Self) -> Self {
        let mut out = self.clone();
        for (e, c) in &other.terms {
            out.add_term(e.clone(), c.clone());
        }
        out
    }

    pub fn scale(&self, c: &Q) -> Self {
        let mut out = Self::zero(self.nvars);
        for (e, x) in &self.terms {
            out.add_term(e.clone(), x * c);
        }
        out
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.scale(&-Q::one()))
    }

    pub fn mul(&self, other: &Self) -> Self {
        let mut out = Self::zero(self.nvars);
        for (ea, ca) in &self.terms {
            for (eb, cb) in &other.terms {
                let e: Monomial = ea.iter().zip(eb).map(|(a, b)| a + b).collect();
                out.add_term(e, ca * cb);
            }
        }
        out
    }

    /// ∂/∂x_i.
    pub fn partial(&self, i: usize) -> Self {
        let mut out = Self::zero(self.nvars);
        for (e, c) in &self.terms {
            if e[i] == 0 {
                continue;
            }
            let mut d = e.clone();
            d[i] -= 1;
            out.add_term(d, c * Q::from_integer(e[i].into()));
        }
        out
    }

    pub fn eval(&self, x: &[Q]) -> Q {
        let mut acc = Q::zero();
        for (e, c) in &self.terms {
            let mut t = c.clone();
            for (xi, &k) in x.iter().zip(e) {
                for _ in 0..k {
                    t *= xi;
                }
            }
            acc += t;
        }
        acc
    }
}

/// Vector field `Σ Pᵢ(x) ∂/∂xᵢ` on Rⁿ.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PolyField {
    dim: usize,
    components: Vec<Polynomial>,
}

impl PolyField {
    pub fn new(components: Vec<Polynomial>) -> Result<Self> {
        let dim = components.len();
        if dim == 0 {
            return Err(Error::InvalidArgument("polynomial field needs at least one component".into()));
        }
        for p in &components {
            if p.nvars() != dim {
                return Err(Error::DimensionMismatch { expected: dim, got: p.nvars() });
            }
        }
        Ok(PolyField { dim, components })
    }

    pub fn zero(dim: usize) -> Self {
        PolyField { dim, components: vec![Polynomial::zero(dim); dim] }
    }

    /// Constant coordinate field `∂/∂x_i`.
    pub fn coordinate(dim: usize, i: usize) -> Self {
        let mut f = Self::zero(dim);
        f.components[i] = Polynomial::constant(dim, Q::one());
        f
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn components(&self) -> &[Polynomial] {
        &self.components
    }

    pub fn is_zero(&self) -> bool {
        self.components.iter().all(Polynomial::is_zero)
    }

    pub fn add(&self, other: &Self) -> Self {
        PolyField {
            dim: self.dim,
            components: self.components.iter().zip(&other.components).map(|(a, b)| a.add(b)).collect(),
        }
    }

    pub fn scale(&self, c: &Q) -> Self {
        PolyField { dim: self.dim, components: self.components.iter().map(|p| p.scale(c)).collect() }
    }

    /// Bracket with the circle-group sign: component i is
    /// `Σⱼ (∂ⱼXᵢ·Yⱼ − ∂ⱼYᵢ·Xⱼ)`, the negative of the usual `[X, Y]`.
    pub fn bracket(&self, other: &Self) -> Self {
        assert_eq!(self.dim, other.dim, "bracket of fields on different spaces");
        let n = self.dim;
        let components = (0..n)
            .map(|i| {
                let mut acc = Polynomial::zero(n);
                for j in 0..n {
                    acc = acc.add(&self.components[i].partial(j).mul(&other.components[j]));
                    acc = acc.sub(&other.components[i].partial(j).mul(&self.components[j]));
                }
                acc
            })
            .collect();
        PolyField { dim: n, components }
    }

    pub fn eval(&self, x: &[Q]) -> Result<Vec<Q>> {
        if x.len() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, got: x.len() });
        }
        Ok(self.components.iter().map(|p| p.eval(x)).collect())
    }

    /// Coordinates keyed by (component, monomial).
    pub fn to_sparse(&self) -> SparseVec<(usize, Monomial)> {
        let mut out = SparseVec::new();
        for (i, p) in self.components.iter().enumerate() {
            for (e, c) in p.terms() {
                out.insert((i, e.clone()), c.clone());
            }
        }
        out
    }

    pub fn from_sparse(dim: usize, v: &SparseVec<(usize, Monomial)>) -> Self {
        let mut f = Self::zero(dim);
        for ((i, e), c) in v {
            f.components[*i].add_term(e.clone(), c.clone());
        }
        f
    }
}

/// JSON form: `{"dim": n, "components": [[{"exp": [..], "coef": "p/q"}, ...], ...]}`.
#[derive(Serialize, Deserialize)]
pub struct PolyFieldRepr {
    pub dim: usize,
    pub components: Vec<Vec<TermRepr>>,
}

#[derive(Serialize, Deserialize)]
pub struct TermRepr {
    pub exp: Vec<u32>,
    pub coef: String,
}

impl Serialize for PolyField {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        PolyFieldRepr {
            dim: self.dim,
            components: self
                .components
                .iter()
                .map(|p| p.terms().iter().map(|(e, c)| TermRepr { exp: e.clone(), coef: format_q(c) }).collect())
                .collect(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for PolyField {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let r = PolyFieldRepr::deserialize(d)?;
        let mut comps = Vec::with_capacity(r.components.len());
        for terms in &r.components {
            let mut p = Polynomial::zero(r.dim);
            for t in terms {
                if t.exp.len() != r.dim {
                    return Err(D::Error::custom("monomial arity differs from dim"));
                }
                p.add_term(t.exp.clone(), parse_q(&t.coef).map_err(D::Error::custom)?);
            }
            comps.push(p);
        }
        if comps.len() != r.dim {
            return Err(D::Error::custom("component count differs from dim"));
        }
        PolyField::new(comps).map_err(D::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::qi;

    /// X₂ = ∂y + x∂z on R³.
    fn heisenberg_y() -> PolyField {
        let mut f = PolyField::coordinate(3, 1);
        f.components[2] = Polynomial::var(3, 0);
        f
    }

    #[test]
    fn heisenberg_bracket_is_minus_dz() {
        let x1 = PolyField::coordinate(3, 0);
        let b = x1.bracket(&heisenberg_y());
        assert_eq!(b, PolyField::coordinate(3, 2).scale(&qi(-1)));
    }

    #[test]
    fn matches_circle_convention_in_one_dimension() {
        // v = x, w = x²: v′w − w′v = x² − 2x² = −x².
        let v = PolyField::new(vec![Polynomial::var(1, 0)]).unwrap();
        let w = PolyField::new(vec![Polynomial::var(1, 0).mul(&Polynomial::var(1, 0))]).unwrap();
        let b = v.bracket(&w);
        assert_eq!(b.eval(&[qi(3)]).unwrap(), vec![qi(-9)]);
    }

    #[test]
    fn eval_dimension_checked() {
        assert!(heisenberg_y().eval(&[qi(1)]).is_err());
    }

    #[test]
    fn json_roundtrip() {
        let f = heisenberg_y();
        let s = serde_json::to_string(&f).unwrap();
        let back: PolyField = serde_json::from_str(&s).unwrap();
        assert_eq!(back, f);
    }
}
