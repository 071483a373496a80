//! Iterated Lie-bracket closure of a field family and the bracket-generating test.
//!
//! The closure works on spans, not individual fields. With `S₁` the span of the
//! seeds and `C_k` the span of every bracket `[A, B]` of basis elements whose
//! grades (bracket word lengths) sum to at most `k`, round `k` produces
//!
//! ```text
//! S_k = S_{k-1} + (C_k ∩ V_cap)
//! ```
//!
//! where `V_cap` is the subspace of fields of level at most the cap (Fourier
//! mode for circle fields). Brackets that leave `V_cap` are discarded as fields,
//! but exact combinations of them that land back inside `V_cap` are kept: that
//! keeps `S_k` independent of basis choices and monotone in the cap.

use std::cmp::Reverse;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, Echelon, SparseVec};
use crate::par;
use crate::poly_field::{Monomial, PolyField};
use crate::rational::Q;
use crate::trig_fields::{Mode, TrigPoly};

/// Element of a Lie algebra with exact coordinates.
pub trait LieElement: Clone + Send + Sync {
    type Key: Ord + Clone + Send + Sync + fmt::Debug;

    fn lie_bracket(&self, other: &Self) -> Self;
    fn coordinates(&self) -> SparseVec<Self::Key>;
    /// Builds an element of the same ambient space as `self` from coordinates.
    fn with_coordinates(&self, v: &SparseVec<Self::Key>) -> Self;
    /// Truncation level of a coordinate (Fourier mode, polynomial degree).
    fn level(key: &Self::Key) -> usize;
}

impl LieElement for TrigPoly {
    type Key = Mode;

    fn lie_bracket(&self, other: &Self) -> Self {
        self.bracket(other)
    }
    fn coordinates(&self) -> SparseVec<Mode> {
        self.to_sparse()
    }
    fn with_coordinates(&self, v: &SparseVec<Mode>) -> Self {
        TrigPoly::from_sparse(v)
    }
    fn level(key: &Mode) -> usize {
        key.n
    }
}

impl LieElement for PolyField {
    type Key = (usize, Monomial);

    fn lie_bracket(&self, other: &Self) -> Self {
        self.bracket(other)
    }
    fn coordinates(&self) -> SparseVec<Self::Key> {
        self.to_sparse()
    }
    fn with_coordinates(&self, v: &SparseVec<Self::Key>) -> Self {
        PolyField::from_sparse(self.dim(), v)
    }
    fn level(key: &Self::Key) -> usize {
        key.1.iter().sum::<u32>() as usize
    }
}

/// Labeled, ordered, nonempty family of fields.
#[derive(Clone, Debug, PartialEq)]
pub struct FieldFamily<F> {
    labels: Vec<String>,
    fields: Vec<F>,
}

impl<F> FieldFamily<F> {
    pub fn new(entries: Vec<(String, F)>) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::EmptyFamily);
        }
        let mut seen = BTreeSet::new();
        for (l, _) in &entries {
            if !seen.insert(l.clone()) {
                return Err(Error::DuplicateLabel(l.clone()));
            }
        }
        let (labels, fields) = entries.into_iter().unzip();
        Ok(FieldFamily { labels, fields })
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn fields(&self) -> &[F] {
        &self.fields
    }

    pub fn len(&self) -> usize {
        self.fields.len()
    }

    pub fn is_empty(&self) -> bool {
        self.fields.is_empty()
    }

    pub fn get(&self, label: &str) -> Option<&F> {
        self.labels.iter().position(|l| l == label).map(|i| &self.fields[i])
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &F)> {
        self.labels.iter().map(String::as_str).zip(&self.fields)
    }
}

impl FieldFamily<TrigPoly> {
    /// `{cos θ∂θ, sin θ∂θ, cos 2θ∂θ, sin 2θ∂θ}` with labels `cos1, sin1, cos2, sin2`.
    pub fn low_mode_generators() -> Self {
        Self::from_modes(&[Mode::cos(1), Mode::sin(1), Mode::cos(2), Mode::sin(2)])
    }

    /// Family of unit basis fields labeled by [`Mode::label`].
    pub fn from_modes(modes: &[Mode]) -> Self {
        Self::new(modes.iter().map(|m| (m.label(), TrigPoly::basis(*m))).collect()).expect("distinct modes")
    }

    pub fn max_seed_mode(&self) -> usize {
        self.fields.iter().map(TrigPoly::degree).max().unwrap_or(0)
    }
}

#[derive(Serialize, Deserialize)]
struct FamilyEntry<F> {
    label: String,
    field: F,
}

impl<F: Serialize + Clone> Serialize for FieldFamily<F> {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let entries: Vec<FamilyEntry<F>> =
            self.iter().map(|(l, f)| FamilyEntry { label: l.to_string(), field: f.clone() }).collect();
        entries.serialize(s)
    }
}

impl<'de, F: Deserialize<'de>> Deserialize<'de> for FieldFamily<F> {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let entries = Vec::<FamilyEntry<F>>::deserialize(d)?;
        FieldFamily::new(entries.into_iter().map(|e| (e.label, e.field)).collect()).map_err(D::Error::custom)
    }
}

/// Bracket word over the seeds of a family.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LieWord {
    Seed(usize),
    Bracket(Box<LieWord>, Box<LieWord>),
}

impl LieWord {
    pub fn bracket(a: &LieWord, b: &LieWord) -> LieWord {
        LieWord::Bracket(Box::new(a.clone()), Box::new(b.clone()))
    }

    /// Number of seed occurrences.
    pub fn len(&self) -> usize {
        match self {
            LieWord::Seed(_) => 1,
            LieWord::Bracket(a, b) => a.len() + b.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Bracket nesting depth; seeds have depth 0.
    pub fn nesting(&self) -> usize {
        match self {
            LieWord::Seed(_) => 0,
            LieWord::Bracket(a, b) => 1 + a.nesting().max(b.nesting()),
        }
    }

    pub fn render(&self, labels: &[String]) -> String {
        match self {
            LieWord::Seed(i) => labels.get(*i).cloned().unwrap_or_else(|| format!("#{i}")),
            LieWord::Bracket(a, b) => format!("[{},{}]", a.render(labels), b.render(labels)),
        }
    }

    pub fn evaluate<F: LieElement>(&self, seeds: &[F]) -> F {
        match self {
            LieWord::Seed(i) => seeds[*i].clone(),
            LieWord::Bracket(a, b) => a.evaluate(seeds).lie_bracket(&b.evaluate(seeds)),
        }
    }
}

/// One generated field with the exact bracket combination that produced it.
#[derive(Clone, Debug, PartialEq)]
pub struct Generated<F> {
    pub field: F,
    pub grade: usize,
    pub terms: Vec<(Q, LieWord)>,
}

/// Output of the generic closure engine.
#[derive(Clone, Debug)]
pub struct LieClosure<F> {
    pub generated: Vec<Generated<F>>,
    /// Rank after depth 1, 2, ... (index 0 is depth 1).
    pub rank_by_depth: Vec<usize>,
    pub depth_used: usize,
    pub fixed_point: bool,
}

impl<F: LieElement> LieClosure<F> {
    pub fn rank(&self) -> usize {
        self.generated.len()
    }
}

type OverflowKey<K> = (Reverse<usize>, K);

/// Working state of the closure: the kept span and every raw bracket seen.
#[derive(Clone)]
struct ClosureState<F: LieElement> {
    cap: Option<usize>,
    span: Echelon<F::Key>,
    generated: Vec<Generated<F>>,
    /// All brackets computed so far, high levels ordered first so that rows
    /// with a low pivot span (all brackets) ∩ V_cap.
    overflow: Echelon<OverflowKey<F::Key>>,
    /// Word expansion of each overflow insertion, by insertion index.
    overflow_words: Vec<Vec<(Q, LieWord)>>,
}

impl<F: LieElement> ClosureState<F> {
    fn within(&self, v: &SparseVec<F::Key>) -> bool {
        self.cap.is_none_or(|c| v.keys().all(|k| F::level(k) <= c))
    }

    fn keyed(v: &SparseVec<F::Key>) -> SparseVec<OverflowKey<F::Key>> {
        v.iter().map(|(k, x)| ((Reverse(F::level(k)), k.clone()), x.clone())).collect()
    }

    fn unkeyed(v: &SparseVec<OverflowKey<F::Key>>) -> SparseVec<F::Key> {
        v.iter().map(|((_, k), x)| (k.clone(), x.clone())).collect()
    }

    /// Brackets `pairs` of generated fields and returns the fields that enlarge the span.
    /// The span is updated; `generated` is not.
    fn round(&mut self, pairs: &[(usize, usize)], grade: usize) -> Vec<Generated<F>> {
        let generated = &self.generated;
        let brackets: Vec<(F, SparseVec<F::Key>)> = par::map(pairs, |&(a, b)| {
            let f = generated[a].field.lie_bracket(&generated[b].field);
            let v = f.coordinates();
            (f, v)
        });
        let mut fresh = Vec::new();
        for (&(a, b), (f, v)) in pairs.iter().zip(brackets) {
            let terms = combine_words(&self.generated[a].terms, &self.generated[b].terms);
            self.overflow.insert(&Self::keyed(&v));
            self.overflow_words.push(terms.clone());
            if v.is_empty() || !self.within(&v) {
                continue;
            }
            if self.span.insert(&v) {
                fresh.push(Generated { field: f, grade, terms });
            }
        }
        if let Some(c) = self.cap {
            let template = self.generated[0].field.clone();
            let low: Vec<(SparseVec<F::Key>, SparseVec<usize>)> = self
                .overflow
                .rows()
                .filter(|(p, _, _)| p.0 .0 <= c)
                .map(|(_, r, prov)| (Self::unkeyed(r), prov.clone()))
                .collect();
            for (v, prov) in low {
                if self.span.insert(&v) {
                    let terms = self.expand(&prov);
                    fresh.push(Generated { field: template.with_coordinates(&v), grade, terms });
                }
            }
        }
        fresh
    }

    fn expand(&self, prov: &SparseVec<usize>) -> Vec<(Q, LieWord)> {
        let mut acc: BTreeMap<LieWord, Q> = BTreeMap::new();
        for (i, c) in prov {
            for (cw, w) in &self.overflow_words[*i] {
                *acc.entry(w.clone()).or_insert_with(Q::zero) += c * cw;
            }
        }
        acc.into_iter().filter(|(_, c)| !c.is_zero()).map(|(w, c)| (c, w)).collect()
    }

    fn pairs_where(&self, keep: impl Fn(usize, usize) -> bool) -> Vec<(usize, usize)> {
        let n = self.generated.len();
        (0..n).flat_map(|a| ((a + 1)..n).map(move |b| (a, b))).filter(|&(a, b)| keep(a, b)).collect()
    }
}

/// Iterated-bracket closure of `seeds` up to word length `max_depth`.
///
/// `cap` bounds the coordinate level of kept fields (`None` keeps all). Pairs
/// are visited in generation order (seeds first, in family order), and new
/// fields are appended in discovery order, so the output is deterministic.
/// When a round adds nothing, every remaining pair is bracketed once on a
/// scratch copy; if that adds nothing either the span is a fixed point.
pub fn lie_closure<F: LieElement>(seeds: &[F], max_depth: usize, cap: Option<usize>) -> Result<LieClosure<F>> {
    if seeds.is_empty() {
        return Err(Error::EmptyFamily);
    }
    if max_depth == 0 {
        return Err(Error::InvalidArgument("max_depth must be at least 1".into()));
    }
    let mut st = ClosureState {
        cap,
        span: Echelon::new(),
        generated: Vec::new(),
        overflow: Echelon::new(),
        overflow_words: Vec::new(),
    };
    for (i, s) in seeds.iter().enumerate() {
        let v = s.coordinates();
        if !st.within(&v) {
            return Err(Error::InvalidArgument(format!("seed #{i} exceeds the mode cap")));
        }
        if st.span.insert(&v) {
            st.generated.push(Generated { field: s.clone(), grade: 1, terms: vec![(Q::one(), LieWord::Seed(i))] });
        }
    }
    if st.generated.is_empty() {
        // Only zero seeds: the algebra is trivial.
        return Ok(LieClosure { generated: vec![], rank_by_depth: vec![0], depth_used: 1, fixed_point: true });
    }

    let mut done: BTreeSet<(usize, usize)> = BTreeSet::new();
    let mut rank_by_depth = vec![st.generated.len()];
    let mut depth_used = 1;
    let mut fixed_point = false;

    for depth in 2..=max_depth {
        let pairs = st.pairs_where(|a, b| {
            st.generated[a].grade + st.generated[b].grade <= depth && !done.contains(&(a, b))
        });
        done.extend(pairs.iter().copied());
        let fresh = st.round(&pairs, depth);
        let added = !fresh.is_empty();
        st.generated.extend(fresh);
        rank_by_depth.push(st.generated.len());
        if added {
            depth_used = depth;
            continue;
        }
        let rest = st.pairs_where(|a, b| !done.contains(&(a, b)));
        let mut probe = st.clone();
        if probe.round(&rest, depth + 1).is_empty() {
            fixed_point = true;
            break;
        }
    }
    if !fixed_point && rank_by_depth.len() == 1 {
        // max_depth == 1: check closure of the seeds directly.
        let rest = st.pairs_where(|_, _| true);
        let mut probe = st.clone();
        fixed_point = probe.round(&rest, 2).is_empty();
    }

    Ok(LieClosure { generated: st.generated, rank_by_depth, depth_used, fixed_point })
}

/// Expands `[Σ aᵢ wᵢ, Σ bⱼ uⱼ]` into `Σ aᵢbⱼ [wᵢ, uⱼ]`.
fn combine_words(a: &[(Q, LieWord)], b: &[(Q, LieWord)]) -> Vec<(Q, LieWord)> {
    let mut out = Vec::with_capacity(a.len() * b.len());
    for (ca, wa) in a {
        for (cb, wb) in b {
            out.push((ca * cb, LieWord::bracket(wa, wb)));
        }
    }
    out
}

/// One term `coef · word` of a generated field.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TermEntry {
    #[serde(with = "crate::rational::serde_q")]
    pub coef: Q,
    pub word: LieWord,
    pub display: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeneratedEntry {
    pub field: TrigPoly,
    pub grade: usize,
    pub terms: Vec<TermEntry>,
}

/// Result of [`closure`] on a circle family.
///
/// `spanning` refers to the truncation at `mode_cap`: it certifies that every
/// basis field of mode at most `mode_cap` lies in the computed span, which is
/// a finite surrogate for density of the full bracket algebra.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClosureReport {
    pub labels: Vec<String>,
    pub max_depth: usize,
    pub mode_cap: usize,
    pub depth_used: usize,
    pub fixed_point: bool,
    pub rank: usize,
    pub rank_by_depth: Vec<usize>,
    pub spanned_modes: Vec<usize>,
    pub spanning: bool,
    pub generated: Vec<GeneratedEntry>,
    pub note: String,
}

const TRUNCATION_NOTE: &str =
    "spanning is decided on the truncation to modes <= mode_cap; it is a finite surrogate, not a density proof";

impl ClosureReport {
    fn span(&self) -> Echelon<Mode> {
        let mut e = Echelon::new();
        for g in &self.generated {
            e.insert(&g.field.to_sparse());
        }
        e
    }

    /// Generated fields whose derivation is a single bracket word with unit coefficient.
    pub fn raw_words(&self) -> Vec<(LieWord, TrigPoly)> {
        self.generated
            .iter()
            .filter(|g| g.terms.len() == 1 && g.terms[0].coef.is_one())
            .map(|g| (g.terms[0].word.clone(), g.field.clone()))
            .collect()
    }
}

/// Closure of a circle family under brackets, keeping fields of mode at most `max_mode_cap`.
pub fn closure(family: &FieldFamily<TrigPoly>, max_depth: usize, max_mode_cap: usize) -> Result<ClosureReport> {
    if family.max_seed_mode() > max_mode_cap {
        return Err(Error::InvalidArgument(format!(
            "mode cap {max_mode_cap} is below the largest seed mode {}",
            family.max_seed_mode()
        )));
    }
    let lc = lie_closure(family.fields(), max_depth, Some(max_mode_cap))?;
    let coords: Vec<_> = lc.generated.iter().map(|g| g.field.to_sparse()).collect();
    let rank = linalg::sparse_rank(&coords);
    debug_assert_eq!(rank, lc.generated.len());
    let labels = family.labels().to_vec();
    let generated = lc
        .generated
        .iter()
        .map(|g| GeneratedEntry {
            field: g.field.trimmed(),
            grade: g.grade,
            terms: g
                .terms
                .iter()
                .map(|(c, w)| TermEntry { coef: c.clone(), word: w.clone(), display: w.render(&labels) })
                .collect(),
        })
        .collect();
    let mut report = ClosureReport {
        labels,
        max_depth,
        mode_cap: max_mode_cap,
        depth_used: lc.depth_used,
        fixed_point: lc.fixed_point,
        rank,
        rank_by_depth: lc.rank_by_depth,
        spanned_modes: vec![],
        spanning: false,
        generated,
        note: TRUNCATION_NOTE.to_string(),
    };
    let span = report.span();
    report.spanned_modes = (0..=max_mode_cap)
        .filter(|&k| {
            let modes = if k == 0 { vec![Mode::CONST] } else { vec![Mode::cos(k), Mode::sin(k)] };
            modes.iter().all(|m| span.contains(&TrigPoly::basis(*m).to_sparse()))
        })
        .collect();
    report.spanning = spanning_test(&report, max_mode_cap);
    Ok(report)
}

/// True iff the generated span contains every basis field of mode `0..=n`.
///
/// Always false when `n` exceeds the cap the report was computed with, since
/// the truncated closure cannot certify modes it never kept.
pub fn spanning_test(report: &ClosureReport, n: usize) -> bool {
    if n > report.mode_cap {
        return false;
    }
    let span = report.span();
    Mode::all_up_to(n).iter().all(|m| span.contains(&TrigPoly::basis(*m).to_sparse()))
}

/// Rank of the bracket closure of a polynomial family evaluated at `x`.
pub fn lie_rank_at_point(family: &FieldFamily<PolyField>, x: &[Q], max_depth: usize) -> Result<usize> {
    let n = family.fields()[0].dim();
    for f in family.fields() {
        if f.dim() != n {
            return Err(Error::DimensionMismatch { expected: n, got: f.dim() });
        }
    }
    if x.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: x.len() });
    }
    let lc = lie_closure(family.fields(), max_depth, None)?;
    let rows = lc.generated.iter().map(|g| g.field.eval(x)).collect::<Result<Vec<_>>>()?;
    Ok(linalg::bareiss_rank(&rows))
}

/// [`lie_rank_at_point`] at a floating-point location, converted exactly.
pub fn lie_rank_at_f64(family: &FieldFamily<PolyField>, x: &[f64], max_depth: usize) -> Result<usize> {
    let xq = x.iter().map(|&v| crate::rational::from_f64(v)).collect::<Result<Vec<_>>>()?;
    lie_rank_at_point(family, &xq, max_depth)
}
