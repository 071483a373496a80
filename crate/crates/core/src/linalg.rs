//! Exact linear algebra over sparse rational vectors.
//!
//! Vectors are `BTreeMap<K, Q>` with no stored zeros. The column order is the
//! key order, so the leading entry of a vector is its smallest key.

use std::collections::BTreeMap;

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Zero};

use crate::rational::Q;

pub type SparseVec<K> = BTreeMap<K, Q>;

/// `dst += c * src`, dropping entries that cancel.
pub fn axpy<K: Ord + Clone>(dst: &mut SparseVec<K>, c: &Q, src: &SparseVec<K>) {
    if c.is_zero() {
        return;
    }
    for (k, v) in src {
        let entry = dst.entry(k.clone()).or_insert_with(Q::zero);
        *entry += c * v;
        if entry.is_zero() {
            dst.remove(k);
        }
    }
}

pub fn scaled<K: Ord + Clone>(v: &SparseVec<K>, c: &Q) -> SparseVec<K> {
    if c.is_zero() {
        return SparseVec::new();
    }
    v.iter().map(|(k, x)| (k.clone(), x * c)).collect()
}

/// Row-echelon basis of a subspace, built incrementally.
///
/// Each stored row has its leading entry normalized to one, and pivots are
/// distinct. Every row also carries a provenance vector recording it as a
/// combination of the inserted inputs, indexed by insertion order.
#[derive(Clone, Debug)]
pub struct Echelon<K: Ord + Clone> {
    rows: BTreeMap<K, (SparseVec<K>, SparseVec<usize>)>,
    inserted: usize,
}

impl<K: Ord + Clone> Default for Echelon<K> {
    fn default() -> Self {
        Self::new()
    }
}

impl<K: Ord + Clone> Echelon<K> {
    pub fn new() -> Self {
        Echelon { rows: BTreeMap::new(), inserted: 0 }
    }

    pub fn rank(&self) -> usize {
        self.rows.len()
    }

    /// Reduces `v` against the basis. Returns the residual and its provenance
    /// relative to the basis rows (provenance of `v` itself is not included).
    fn reduce_tracked(&self, v: &SparseVec<K>) -> (SparseVec<K>, SparseVec<usize>) {
        let mut r = v.clone();
        let mut prov = SparseVec::new();
        for (pivot, (row, row_prov)) in &self.rows {
            if let Some(c) = r.get(pivot).cloned() {
                let neg = -c;
                axpy(&mut r, &neg, row);
                axpy(&mut prov, &neg, row_prov);
            }
        }
        (r, prov)
    }

    pub fn reduce(&self, v: &SparseVec<K>) -> SparseVec<K> {
        self.reduce_tracked(v).0
    }

    pub fn contains(&self, v: &SparseVec<K>) -> bool {
        self.reduce(v).is_empty()
    }

    /// Inserts `v`; returns true when it was independent of the current rows.
    pub fn insert(&mut self, v: &SparseVec<K>) -> bool {
        let id = self.inserted;
        self.inserted += 1;
        let (mut r, mut prov) = self.reduce_tracked(v);
        if r.is_empty() {
            return false;
        }
        prov.insert(id, Q::one());
        let (lead, lead_val) = r.iter().next().map(|(k, x)| (k.clone(), x.clone())).unwrap();
        let inv = lead_val.recip();
        r = scaled(&r, &inv);
        prov = scaled(&prov, &inv);
        self.rows.insert(lead, (r, prov));
        true
    }

    /// Rows as `(pivot, row, provenance)` in pivot order.
    pub fn rows(&self) -> impl Iterator<Item = (&K, &SparseVec<K>, &SparseVec<usize>)> {
        self.rows.iter().map(|(k, (r, p))| (k, r, p))
    }
}

/// Rank of a rational matrix by fraction-free (Bareiss) elimination.
///
/// Each row is scaled to integers first, so all elimination arithmetic is in `BigInt`.
pub fn bareiss_rank(rows: &[Vec<Q>]) -> usize {
    if rows.is_empty() {
        return 0;
    }
    let ncols = rows[0].len();
    let mut m: Vec<Vec<BigInt>> = rows
        .iter()
        .map(|row| {
            assert_eq!(row.len(), ncols, "ragged matrix");
            let l = row.iter().fold(BigInt::one(), |acc, x| acc.lcm(x.denom()));
            row.iter().map(|x| (x * Q::from_integer(l.clone())).to_integer()).collect()
        })
        .collect();
    let nrows = m.len();
    let mut rank = 0;
    let mut prev = BigInt::one();
    for col in 0..ncols {
        if rank == nrows {
            break;
        }
        let Some(p) = (rank..nrows).find(|&i| !m[i][col].is_zero()) else {
            continue;
        };
        m.swap(rank, p);
        for i in (rank + 1)..nrows {
            for j in (col + 1)..ncols {
                let v = &m[rank][col] * &m[i][j] - &m[i][col] * &m[rank][j];
                m[i][j] = v / &prev;
            }
            m[i][col] = BigInt::zero();
        }
        prev = m[rank][col].clone();
        rank += 1;
    }
    rank
}

/// Dense coordinate rows of sparse vectors over the union of their keys.
pub fn dense_rows<K: Ord + Clone>(vs: &[SparseVec<K>]) -> Vec<Vec<Q>> {
    let keys: std::collections::BTreeSet<K> = vs.iter().flat_map(|v| v.keys().cloned()).collect();
    vs.iter()
        .map(|v| keys.iter().map(|k| v.get(k).cloned().unwrap_or_else(Q::zero)).collect())
        .collect()
}

pub fn sparse_rank<K: Ord + Clone>(vs: &[SparseVec<K>]) -> usize {
    bareiss_rank(&dense_rows(vs))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::{q, qi};

    fn sv(entries: &[(u32, Q)]) -> SparseVec<u32> {
        entries.iter().filter(|(_, v)| !v.is_zero()).cloned().collect()
    }

    #[test]
    fn bareiss_matches_known_ranks() {
        let m = vec![
            vec![qi(1), qi(2), qi(3)],
            vec![qi(2), qi(4), qi(6)],
            vec![qi(1), qi(0), q(1, 2)],
        ];
        assert_eq!(bareiss_rank(&m), 2);
        let id = vec![vec![qi(1), qi(0)], vec![qi(0), qi(1)]];
        assert_eq!(bareiss_rank(&id), 2);
        assert_eq!(bareiss_rank(&[vec![qi(0), qi(0)]]), 0);
    }

    #[test]
    fn echelon_tracks_provenance() {
        let mut e = Echelon::new();
        let a = sv(&[(0, qi(1)), (1, qi(1))]);
        let b = sv(&[(0, qi(1)), (1, qi(-1))]);
        assert!(e.insert(&a));
        assert!(e.insert(&b));
        assert!(!e.insert(&sv(&[(1, qi(5))])));
        // Every row equals the recorded combination of inputs.
        let inputs = [a, b];
        for (_, row, prov) in e.rows() {
            let mut acc = SparseVec::new();
            for (i, c) in prov {
                axpy(&mut acc, c, &inputs[*i]);
            }
            assert_eq!(&acc, row);
        }
    }

    #[test]
    fn echelon_and_bareiss_agree() {
        let vs: Vec<SparseVec<u32>> = vec![
            sv(&[(0, qi(2)), (3, q(1, 3))]),
            sv(&[(1, qi(1))]),
            sv(&[(0, qi(4)), (1, qi(2)), (3, q(2, 3))]),
            sv(&[(2, qi(7))]),
        ];
        let mut e = Echelon::new();
        for v in &vs {
            e.insert(v);
        }
        assert_eq!(e.rank(), sparse_rank(&vs));
        assert_eq!(e.rank(), 3);
    }
}
