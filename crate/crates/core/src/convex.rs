//! Finite-dimensional convex analysis: gauges of polytopes, symmetrization,
//! separation of finite sets, the nested-cone extremal point and the
//! Mackey–Cauchy diagnostic.
//!
//! A [`ConvexBody`] is `{x : ⟨hᵢ, x⟩ ≤ 1 ∀i}`, so it always contains 0 in its
//! interior and its gauge is `max(0, maxᵢ ⟨hᵢ, x⟩)`.

use std::sync::OnceLock;

use itertools::Itertools;
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::par;

/// Degeneracy and intersection tolerance.
pub const TOL: f64 = 1e-12;
const FEAS_TOL: f64 = 1e-9;
/// Half-width of the auxiliary box used to detect unbounded bodies.
const BOX_R: f64 = 1e6;

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

fn axpy(a: &[f64], t: f64, d: &[f64]) -> Vec<f64> {
    a.iter().zip(d).map(|(x, y)| x + t * y).collect()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
    a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol * (1.0 + x.abs().max(y.abs())))
}

fn check_dim(expected: usize, x: &[f64]) -> Result<()> {
    if x.len() != expected {
        return Err(Error::DimensionMismatch { expected, got: x.len() });
    }
    Ok(())
}

/// Bounded polytope `{x : ⟨hᵢ, x⟩ ≤ 1}` with its vertex list.
#[derive(Clone, Debug)]
pub struct ConvexBody {
    dim: usize,
    halfspaces: Vec<Vec<f64>>,
    /// Enumerated on first use for bodies known to be bounded.
    vertices: OnceLock<Vec<Vec<f64>>>,
}

impl PartialEq for ConvexBody {
    fn eq(&self, other: &Self) -> bool {
        self.dim == other.dim && self.halfspaces == other.halfspaces && self.vertices() == other.vertices()
    }
}

impl ConvexBody {
    /// Builds the body and enumerates its vertices; fails if it is unbounded.
    pub fn new(dim: usize, halfspaces: Vec<Vec<f64>>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidArgument("dimension must be positive".into()));
        }
        for h in &halfspaces {
            check_dim(dim, h)?;
            if h.iter().any(|x| !x.is_finite()) {
                return Err(Error::InvalidArgument("non-finite halfspace normal".into()));
            }
        }
        let vertices = OnceLock::from(enumerate_vertices(dim, &halfspaces)?);
        Ok(ConvexBody { dim, halfspaces, vertices })
    }

    /// Like [`ConvexBody::new`], checking `vertices` against the enumerated ones.
    pub fn with_vertices(dim: usize, halfspaces: Vec<Vec<f64>>, vertices: Vec<Vec<f64>>) -> Result<Self> {
        let body = ConvexBody::new(dim, halfspaces)?;
        for v in &vertices {
            check_dim(dim, v)?;
        }
        let covered = |a: &[Vec<f64>], b: &[Vec<f64>]| a.iter().all(|v| b.iter().any(|w| close(v, w, FEAS_TOL)));
        if !covered(&vertices, body.vertices()) || !covered(body.vertices(), &vertices) {
            return Err(Error::InconsistentVertices(format!(
                "{} given, {} implied by the halfspaces",
                vertices.len(),
                body.vertices().len()
            )));
        }
        Ok(ConvexBody { vertices: OnceLock::from(vertices), ..body })
    }

    /// Axis-aligned box `∏[loᵢ, hiᵢ]` with `loᵢ < 0 < hiᵢ`.
    pub fn axis_box(lo: &[f64], hi: &[f64]) -> Result<Self> {
        check_dim(lo.len(), hi)?;
        let n = lo.len();
        let mut hs = Vec::with_capacity(2 * n);
        for i in 0..n {
            if !(lo[i] < 0.0 && hi[i] > 0.0) {
                return Err(Error::InvalidArgument(format!("box must contain 0 in its interior (axis {i})")));
            }
            let mut up = vec![0.0; n];
            up[i] = 1.0 / hi[i];
            let mut down = vec![0.0; n];
            down[i] = 1.0 / lo[i];
            hs.push(up);
            hs.push(down);
        }
        ConvexBody::new(n, hs)
    }

    /// The cube `[−1, 1]ⁿ`.
    pub fn unit_box(n: usize) -> Self {
        ConvexBody::axis_box(&vec![-1.0; n], &vec![1.0; n]).expect("unit box")
    }

    /// `{x : Σ|xᵢ| ≤ 1}`.
    pub fn cross_polytope(n: usize) -> Self {
        let hs = (0..1usize << n)
            .map(|mask| (0..n).map(|i| if mask >> i & 1 == 1 { -1.0 } else { 1.0 }).collect())
            .collect();
        ConvexBody::new(n, hs).expect("cross-polytope")
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn halfspaces(&self) -> &[Vec<f64>] {
        &self.halfspaces
    }

    pub fn vertices(&self) -> &[Vec<f64>] {
        self.vertices.get_or_init(|| enumerate_vertices(self.dim, &self.halfspaces).expect("bounded body"))
    }

    /// `inf{t > 0 : x ∈ tD}`.
    pub fn minkowski(&self, x: &[f64]) -> Result<f64> {
        check_dim(self.dim, x)?;
        Ok(self.gauge(x))
    }

    fn gauge(&self, x: &[f64]) -> f64 {
        self.halfspaces.iter().map(|h| dot(h, x)).fold(0.0, f64::max)
    }

    /// Closed-set membership, `P_D(x) ≤ 1`.
    pub fn contains(&self, x: &[f64]) -> Result<bool> {
        Ok(self.minkowski(x)? <= 1.0 + TOL)
    }

    /// `D ∩ −D`, as the concatenated halfspace list.
    pub fn symmetrize(&self) -> ConvexBody {
        let mut hs = self.halfspaces.clone();
        for h in &self.halfspaces {
            let neg: Vec<f64> = h.iter().map(|x| -x).collect();
            if !hs.iter().any(|g| close(g, &neg, TOL)) {
                hs.push(neg);
            }
        }
        // A subset of a bounded body is bounded.
        ConvexBody { dim: self.dim, halfspaces: hs, vertices: OnceLock::new() }
    }

    pub fn is_symmetric(&self) -> bool {
        self.vertices().iter().all(|v| {
            let neg: Vec<f64> = v.iter().map(|x| -x).collect();
            self.gauge(&neg) <= 1.0 + FEAS_TOL
        })
    }

    /// `λD` for `λ > 0`.
    pub fn scaled(&self, lambda: f64) -> Result<ConvexBody> {
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(Error::InvalidArgument(format!("scale must be positive, got {lambda}")));
        }
        Ok(ConvexBody {
            dim: self.dim,
            halfspaces: self.halfspaces.iter().map(|h| h.iter().map(|x| x / lambda).collect()).collect(),
            vertices: match self.vertices.get() {
                Some(vs) => OnceLock::from(vs.iter().map(|v| v.iter().map(|x| x * lambda).collect()).collect::<Vec<_>>()),
                None => OnceLock::new(),
            },
        })
    }

    /// Same point set as `other`, compared through the vertex lists.
    pub fn same_set(&self, other: &ConvexBody) -> bool {
        self.dim == other.dim
            && self.vertices().iter().all(|v| other.vertices().iter().any(|w| close(v, w, FEAS_TOL)))
            && other.vertices().iter().all(|v| self.vertices().iter().any(|w| close(v, w, FEAS_TOL)))
    }
}

/// Gaussian elimination with full pivoting; `None` when the pivots span more
/// than twelve orders of magnitude.
fn solve_square(a: &[&Vec<f64>], b: &[f64]) -> Option<Vec<f64>> {
    let n = b.len();
    let mut m: Vec<f64> = Vec::with_capacity(n * (n + 1));
    for (row, rhs) in a.iter().zip(b) {
        m.extend_from_slice(&row[..n]);
        m.push(*rhs);
    }
    let w = n + 1;
    let mut cols: Vec<usize> = (0..n).collect();
    let (mut big, mut small) = (0.0f64, f64::INFINITY);
    for k in 0..n {
        let (mut pr, mut pc, mut pv) = (k, k, 0.0);
        for i in k..n {
            for j in k..n {
                let v = m[i * w + j].abs();
                if v > pv {
                    (pr, pc, pv) = (i, j, v);
                }
            }
        }
        if pv == 0.0 {
            return None;
        }
        big = big.max(pv);
        small = small.min(pv);
        if pr != k {
            for j in 0..w {
                m.swap(k * w + j, pr * w + j);
            }
        }
        if pc != k {
            for i in 0..n {
                m.swap(i * w + k, i * w + pc);
            }
            cols.swap(k, pc);
        }
        for i in k + 1..n {
            let f = m[i * w + k] / m[k * w + k];
            for j in k..w {
                m[i * w + j] -= f * m[k * w + j];
            }
        }
    }
    if small <= 1e-12 * big {
        return None;
    }
    let mut y = vec![0.0; n];
    for k in (0..n).rev() {
        let tail: f64 = (k + 1..n).map(|j| m[k * w + j] * y[j]).sum();
        y[k] = (m[k * w + n] - tail) / m[k * w + k];
    }
    let mut x = vec![0.0; n];
    for (k, &c) in cols.iter().enumerate() {
        x[c] = y[k];
    }
    Some(x)
}

/// Vertices of `{⟨hᵢ, x⟩ ≤ 1}` intersected with a large box; a vertex on the
/// box means the body itself is unbounded.
fn enumerate_vertices(dim: usize, hs: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    let mut rows: Vec<(Vec<f64>, f64)> = hs.iter().map(|h| (h.clone(), 1.0)).collect();
    for i in 0..dim {
        for s in [1.0, -1.0] {
            let mut e = vec![0.0; dim];
            e[i] = s;
            rows.push((e, BOX_R));
        }
    }
    let normals: Vec<&Vec<f64>> = rows.iter().map(|r| &r.0).collect();
    let combos: Vec<Vec<usize>> = (0..rows.len()).combinations(dim).collect();
    let found = par::map(&combos, |idx| {
        let a: Vec<&Vec<f64>> = idx.iter().map(|&i| normals[i]).collect();
        let b: Vec<f64> = idx.iter().map(|&i| rows[i].1).collect();
        let x = solve_square(&a, &b)?;
        rows.iter().all(|(h, c)| dot(h, &x) <= c + FEAS_TOL * c.max(1.0)).then_some(x)
    });
    let mut verts: Vec<Vec<f64>> = Vec::new();
    for x in found.into_iter().flatten() {
        if x.iter().any(|c| c.abs() >= BOX_R * (1.0 - 1e-9)) {
            return Err(Error::Unbounded);
        }
        if !verts.iter().any(|v| close(v, &x, FEAS_TOL)) {
            verts.push(x);
        }
    }
    verts.sort_by(|a, b| a.partial_cmp(b).expect("finite vertices"));
    Ok(verts)
}

#[derive(Serialize, Deserialize)]
struct BodyRepr {
    dim: usize,
    halfspaces: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    vertices: Option<Vec<Vec<f64>>>,
}

impl Serialize for ConvexBody {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        BodyRepr { dim: self.dim, halfspaces: self.halfspaces.clone(), vertices: Some(self.vertices().to_vec()) }
            .serialize(s)
    }
}

impl<'de> Deserialize<'de> for ConvexBody {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let r = BodyRepr::deserialize(d)?;
        match r.vertices {
            Some(v) => ConvexBody::with_vertices(r.dim, r.halfspaces, v),
            None => ConvexBody::new(r.dim, r.halfspaces),
        }
        .map_err(serde::de::Error::custom)
    }
}

/// Parses a point cloud, one point per line, comma-separated; a non-numeric first line is skipped as a header.
pub fn points_from_csv(text: &str) -> Result<Vec<Vec<f64>>> {
    let mut pts = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let row: std::result::Result<Vec<f64>, _> = line.split(',').map(|c| c.trim().parse::<f64>()).collect();
        match row {
            Ok(r) => pts.push(r),
            Err(_) if n == 0 => continue,
            Err(_) => return Err(Error::InvalidArgument(format!("bad point on line {}: `{line}`", n + 1))),
        }
    }
    if let Some(first) = pts.first() {
        let d = first.len();
        for p in &pts {
            check_dim(d, p)?;
        }
    }
    Ok(pts)
}

pub fn points_to_csv(points: &[Vec<f64>]) -> String {
    let mut out = String::new();
    for p in points {
        out.push_str(&p.iter().map(|x| x.to_string()).join(","));
        out.push('\n');
    }
    out
}

/// The second set of a separation problem.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Region {
    Body(ConvexBody),
    Hull(Vec<Vec<f64>>),
}

impl Region {
    /// Finite set whose convex hull is the region.
    pub fn generators(&self) -> &[Vec<f64>] {
        match self {
            Region::Body(b) => b.vertices(),
            Region::Hull(p) => p,
        }
    }
}

/// `ℓ(x) ≤ α < β ≤ ℓ(y)` for `x` in the first set and `y` in the second.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeparationCertificate {
    pub functional: Vec<f64>,
    pub alpha: f64,
    pub beta: f64,
    pub distance: f64,
}

impl SeparationCertificate {
    pub fn eval(&self, x: &[f64]) -> f64 {
        dot(&self.functional, x)
    }
}

/// Minimum-norm point of the convex hull of `pts` (Wolfe's algorithm).
pub fn min_norm_point(pts: &[Vec<f64>]) -> Vec<f64> {
    let scale = pts.iter().map(|p| dot(p, p)).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
    let start = (0..pts.len())
        .min_by(|&i, &j| dot(&pts[i], &pts[i]).total_cmp(&dot(&pts[j], &pts[j])))
        .expect("nonempty point set");
    let mut set = vec![start];
    let mut lam = vec![1.0];
    let combo = |set: &[usize], lam: &[f64]| {
        let mut x = vec![0.0; pts[0].len()];
        for (&i, &l) in set.iter().zip(lam) {
            x = axpy(&x, l, &pts[i]);
        }
        x
    };
    for _ in 0..10_000 {
        let x = combo(&set, &lam);
        let j = (0..pts.len()).min_by(|&a, &b| dot(&x, &pts[a]).total_cmp(&dot(&x, &pts[b]))).unwrap();
        if dot(&x, &x) - dot(&x, &pts[j]) <= 1e-14 * scale || set.contains(&j) {
            return x;
        }
        set.push(j);
        lam.push(0.0);
        loop {
            let mu = affine_min(pts, &set);
            if mu.iter().all(|&m| m > 1e-15) {
                lam = mu;
                break;
            }
            let mut theta = 1.0f64;
            for (l, m) in lam.iter().zip(&mu) {
                if *m <= 1e-15 && l - m > 0.0 {
                    theta = theta.min(l / (l - m));
                }
            }
            for (l, m) in lam.iter_mut().zip(&mu) {
                *l = (1.0 - theta) * *l + theta * m;
            }
            let keep: Vec<bool> = lam.iter().map(|&l| l > 1e-15).collect();
            if !keep.iter().any(|&k| k) {
                break;
            }
            set = set.iter().zip(&keep).filter(|(_, k)| **k).map(|(s, _)| *s).collect();
            lam = lam.iter().zip(&keep).filter(|(_, k)| **k).map(|(l, _)| *l).collect();
            let total: f64 = lam.iter().sum();
            lam.iter_mut().for_each(|l| *l /= total);
        }
    }
    combo(&set, &lam)
}

/// Weights (summing to 1) of the minimum-norm point of the affine hull of `pts[set]`.
fn affine_min(pts: &[Vec<f64>], set: &[usize]) -> Vec<f64> {
    let k = set.len();
    let kkt = DMatrix::from_fn(k + 1, k + 1, |i, j| match (i < k, j < k) {
        (true, true) => dot(&pts[set[i]], &pts[set[j]]),
        (false, false) => 0.0,
        _ => 1.0,
    });
    let mut rhs = DVector::zeros(k + 1);
    rhs[k] = 1.0;
    let svd = kkt.svd(true, true);
    let tol = 1e-13 * svd.singular_values.max();
    let sol = svd.solve(&rhs, tol).expect("svd solve");
    sol.iter().take(k).copied().collect()
}

/// Separates the finite set `a` from `b` through the closest pair of their hulls.
pub fn separate(a: &[Vec<f64>], b: &Region) -> Result<SeparationCertificate> {
    let gens = b.generators();
    if a.is_empty() || gens.is_empty() {
        return Err(Error::InvalidArgument("separation needs two nonempty sets".into()));
    }
    let n = a[0].len();
    for p in a.iter().chain(gens) {
        check_dim(n, p)?;
    }
    let diffs: Vec<Vec<f64>> = a.iter().cartesian_product(gens).map(|(x, y)| sub(y, x)).collect();
    let w = min_norm_point(&diffs);
    let distance = norm(&w);
    if distance <= TOL {
        return Err(Error::SetsIntersect(distance));
    }
    let functional: Vec<f64> = w.iter().map(|x| x / distance).collect();
    let alpha = a.iter().map(|x| dot(&functional, x)).fold(f64::NEG_INFINITY, f64::max);
    let beta = gens.iter().map(|y| dot(&functional, y)).fold(f64::INFINITY, f64::min);
    if alpha >= beta {
        return Err(Error::SetsIntersect(distance));
    }
    Ok(SeparationCertificate { functional, alpha, beta, distance })
}

/// `center + radius·D`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GaugeBall {
    pub center: Vec<f64>,
    pub radius: f64,
}

/// The neighbourhood `{apex + t(x − apex) : x ∈ int(center + radius·D), 0 < t < 1} ∪ {apex}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Neighborhood {
    pub apex: Vec<f64>,
    pub center: Vec<f64>,
    pub radius: f64,
    pub epsilon: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConeIterate {
    pub point: Vec<f64>,
    /// Gauge diameter of the cone at this point truncated by `ℓ = ℓ(a₁) + d`.
    pub diameter: f64,
}

/// Output of [`cone_extremal_point`]; the cones are translates of
/// `{a₁ + t(x − a₁) : x ∈ base, t ≥ 0}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConeResult {
    pub vertex: Vec<f64>,
    pub seed: Vec<f64>,
    pub x0: Vec<f64>,
    pub alpha: f64,
    pub functional: Vec<f64>,
    pub axis: Vec<f64>,
    pub base: GaugeBall,
    pub level: f64,
    pub neighborhood: Neighborhood,
    pub iterates: Vec<ConeIterate>,
    pub gauge: ConvexBody,
}

/// Feasible `t` for `⟨hᵢ, p − apex⟩ ≤ t(⟨hᵢ, dir⟩ + ρ)` within `[lo, hi]`.
fn ray_interval(gauge: &ConvexBody, p: &[f64], apex: &[f64], dir: &[f64], rho: f64, lo: f64, hi: f64) -> (f64, f64, bool) {
    let rel = sub(p, apex);
    let (mut lo, mut hi) = (lo, hi);
    let mut ok = true;
    let scale = 1.0 + norm(&rel);
    for h in gauge.halfspaces() {
        let c = dot(h, &rel);
        let g = dot(h, dir) + rho;
        if g.abs() <= TOL {
            ok &= c <= TOL * scale;
        } else if g > 0.0 {
            lo = lo.max(c / g);
        } else {
            hi = hi.min(c / g);
        }
    }
    (lo, hi, ok)
}

impl ConeResult {
    fn dir(&self) -> Vec<f64> {
        sub(&self.base.center, &self.seed)
    }

    /// Membership in the cone with vertex `apex` (closed).
    pub fn in_cone_at(&self, apex: &[f64], p: &[f64]) -> bool {
        let (lo, hi, ok) = ray_interval(&self.gauge, p, apex, &self.dir(), self.base.radius, 0.0, f64::INFINITY);
        ok && lo <= hi * (1.0 + TOL) + TOL
    }

    /// Membership in `C_{a*}`.
    pub fn in_cone(&self, p: &[f64]) -> bool {
        self.in_cone_at(&self.vertex, p)
    }

    /// Membership in `B₁`'s carrier, the truncated cone `{a₁ + t(x − a₁) : x ∈ base, 0 ≤ t ≤ 1}`.
    pub fn in_truncated_cone(&self, p: &[f64]) -> bool {
        let (lo, hi, ok) = ray_interval(&self.gauge, p, &self.seed, &self.dir(), self.base.radius, 0.0, 1.0);
        ok && lo <= hi * (1.0 + TOL) + TOL
    }

    /// Membership in `U` (open away from its apex).
    pub fn in_neighborhood(&self, p: &[f64]) -> bool {
        let u = &self.neighborhood;
        if p == u.apex.as_slice() {
            return true;
        }
        let dir = sub(&u.center, &u.apex);
        let rel = sub(p, &u.apex);
        let (mut lo, mut hi) = (0.0f64, 1.0f64);
        for h in self.gauge.halfspaces() {
            let c = dot(h, &rel);
            let g = dot(h, &dir) + u.radius;
            if g == 0.0 {
                if c >= 0.0 {
                    return false;
                }
            } else if g > 0.0 {
                lo = lo.max(c / g);
            } else {
                hi = hi.min(c / g);
            }
        }
        lo < hi
    }
}

/// Diameter in `P_D` of a finite set's hull.
fn gauge_diameter(gauge: &ConvexBody, pts: &[Vec<f64>]) -> f64 {
    let mut best = 0.0f64;
    for (i, p) in pts.iter().enumerate() {
        for q in &pts[i + 1..] {
            best = best.max(gauge.gauge(&sub(p, q))).max(gauge.gauge(&sub(q, p)));
        }
    }
    best
}

/// Finite version of the nested-cone construction: returns `a* ∈ B`, a cone
/// with vertex `a*` and a neighbourhood `U` with `U ∩ C_{a*} ∩ B = {a*}`.
pub fn cone_extremal_point(b: &[Vec<f64>], a1: &[f64], x0: &[f64], d: &ConvexBody) -> Result<ConeResult> {
    let n = d.dim();
    check_dim(n, a1)?;
    check_dim(n, x0)?;
    for p in b {
        check_dim(n, p)?;
    }
    if !d.is_symmetric() {
        return Err(Error::NotSymmetric);
    }
    let mut pts: Vec<Vec<f64>> = Vec::with_capacity(b.len());
    for p in b {
        if !pts.contains(p) {
            pts.push(p.clone());
        }
    }
    if !pts.iter().any(|p| p.as_slice() == a1) {
        return Err(Error::InvalidSeed("a1 is not a point of B".into()));
    }
    let dist = pts.iter().map(|p| d.gauge(&sub(p, x0))).fold(f64::INFINITY, f64::min);
    if dist <= TOL {
        return Err(Error::InvalidSeed("x0 lies in B".into()));
    }
    let alpha = dist / 2.0;
    let base = GaugeBall { center: x0.to_vec(), radius: alpha / 4.0 };
    let base_vertices: Vec<Vec<f64>> = d.vertices().iter().map(|v| axpy(x0, alpha / 4.0, v)).collect();
    let sep = separate(&[a1.to_vec()], &Region::Hull(base_vertices.clone()))?;
    let ell = sep.functional.clone();
    let to_x0 = sub(x0, a1);
    let axis: Vec<f64> = to_x0.iter().map(|x| x / dot(&ell, &to_x0)).collect();

    let mut result = ConeResult {
        vertex: a1.to_vec(),
        seed: a1.to_vec(),
        x0: x0.to_vec(),
        alpha,
        functional: ell.clone(),
        axis: axis.clone(),
        base,
        level: 0.0,
        neighborhood: Neighborhood { apex: a1.to_vec(), center: x0.to_vec(), radius: alpha / 3.0, epsilon: 0.0 },
        iterates: vec![],
        gauge: d.clone(),
    };

    let l = |p: &[f64]| dot(&ell, p);
    let b1: Vec<&Vec<f64>> = pts.iter().filter(|p| result.in_truncated_cone(p)).collect();
    let level = b1.iter().map(|p| l(p) - l(a1)).fold(0.0, f64::max);
    result.level = level;
    let top = l(a1) + level;
    // Vertices of the cone at `apex` truncated by ℓ = top.
    let truncated = |apex: &[f64]| -> Vec<Vec<f64>> {
        let h = top - l(apex);
        let mut v = vec![apex.to_vec()];
        for w in &base_vertices {
            let dir = sub(w, a1);
            v.push(axpy(apex, h / l(&dir), &dir));
        }
        v
    };

    let mut current = a1.to_vec();
    let mut members: Vec<&Vec<f64>> = b1;
    result.iterates.push(ConeIterate { point: current.clone(), diameter: gauge_diameter(d, &truncated(&current)) });
    loop {
        let mut best: Option<(&Vec<f64>, f64)> = None;
        for p in &members {
            let gain = l(p) - l(&current);
            if gain <= 0.0 || p.as_slice() == current.as_slice() {
                continue;
            }
            best = match best {
                Some((q, g)) if g > gain || (g == gain && q.as_slice() <= p.as_slice()) => Some((q, g)),
                _ => Some((p, gain)),
            };
        }
        let Some((next, _)) = best else { break };
        current = next.clone();
        members.retain(|p| result.in_cone_at(&current, p));
        result.iterates.push(ConeIterate { point: current.clone(), diameter: gauge_diameter(d, &truncated(&current)) });
    }
    result.vertex = current;

    // ε: largest dyadic ≤ α/12 with ε·P_D(e) < α/12, which gives both
    // (int S̄_{α/3} + εe) ⊂ S̄_{α/2} and S̄_{α/4} ⊂ int S̄_{α/3} + εe.
    let pe = d.gauge(&axis);
    let mut eps = 2f64.powi((alpha / 12.0).log2().floor() as i32);
    while eps * pe >= alpha / 12.0 {
        eps /= 2.0;
    }
    result.neighborhood = Neighborhood { apex: a1.to_vec(), center: axpy(x0, eps, &axis), radius: alpha / 3.0, epsilon: eps };
    Ok(result)
}

/// Output of [`mackey_cauchy_diagnostic`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MackeyReport {
    pub is_cauchy_prefix: bool,
    /// `μᵢⱼ = P_M(xᵢ − xⱼ)`.
    pub mu: Vec<Vec<f64>>,
    /// `max_{i,j ≥ k} μᵢⱼ` for each `k`.
    pub tail_max: Vec<f64>,
    pub max_mu: f64,
}

/// Pairwise gauges of a finite prefix; it passes when the tail maxima strictly
/// decrease until they reach 0.
pub fn mackey_cauchy_diagnostic(prefix: &[Vec<f64>], m: &ConvexBody) -> Result<MackeyReport> {
    if !m.is_symmetric() {
        return Err(Error::NotSymmetric);
    }
    for x in prefix {
        check_dim(m.dim(), x)?;
    }
    let k = prefix.len();
    let mu: Vec<Vec<f64>> = par::map_range(k, |i| (0..k).map(|j| m.gauge(&sub(&prefix[i], &prefix[j]))).collect());
    let mut tail_max = vec![0.0; k];
    for s in (0..k).rev() {
        let own = (s..k).map(|j| mu[s][j].max(mu[j][s])).fold(0.0, f64::max);
        tail_max[s] = if s + 1 < k { own.max(tail_max[s + 1]) } else { own };
    }
    let is_cauchy_prefix = tail_max.windows(2).all(|w| w[1] < w[0] || (w[0] == 0.0 && w[1] == 0.0));
    let max_mu = tail_max.first().copied().unwrap_or(0.0);
    Ok(MackeyReport { is_cauchy_prefix, mu, tail_max, max_mu })
}
