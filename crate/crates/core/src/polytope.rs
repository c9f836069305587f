//! Facets of the coherent polytope `C(E) = conv(columns of V)` and Dutch books.
//!
//! A facet corresponds to a maximally-0 vector in the row span of `V̄`:
//! a payout vector `b = V̄ᵀ(a, -c) ≥ 0` whose zero set is maximal. The
//! corresponding inequality `a·p ≥ c` holds for every coherent `p`.

use rayon::prelude::*;

use crate::credence::{Consistency, CredenceBase, COHERENCE_TOL};
use crate::error::{Error, Result};
use crate::linalg::{self, Matrix};
use crate::projection;
use crate::solver::SolverConfig;
use crate::Dissimilarity;

pub use crate::linalg::{rref, Rref};

/// Entries at or below this count as zero in payout vectors.
pub const ZERO_TOL: f64 = 1e-9;
/// Per-entry tolerance when deduplicating normalised payouts.
pub const DEDUP_TOL: f64 = 1e-8;
/// Largest atom count accepted by [`enumerate_facets`].
pub const MAX_FACET_ATOMS: usize = 12;

/// A nonnegative vector in the row span of `V̄` whose first nonzero entry
/// is 1.
#[derive(Clone, Debug, PartialEq)]
pub struct PayoutVector(Vec<f64>);

impl PayoutVector {
    /// Scales `b ≥ 0` so its first nonzero entry is 1, snapping tiny entries
    /// to zero. Returns `None` for the zero vector.
    pub fn normalize(b: &[f64]) -> Option<Self> {
        let lead = b.iter().copied().find(|v| v.abs() > ZERO_TOL)?;
        Some(Self(b.iter().map(|&v| if v.abs() <= ZERO_TOL { 0.0 } else { v / lead }).collect()))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    /// Indices of zero entries.
    pub fn zero_set(&self) -> Vec<usize> {
        zero_set(&self.0)
    }
}

fn zero_set(b: &[f64]) -> Vec<usize> {
    b.iter().enumerate().filter(|(_, v)| v.abs() <= ZERO_TOL).map(|(j, _)| j).collect()
}

/// The inequality `a·p ≥ c`, tight exactly on one facet of `C(E)`.
#[derive(Clone, Debug, PartialEq)]
pub struct FacetInequality {
    pub a: Vec<f64>,
    pub c: f64,
    /// `V̄ᵀ(a, -c)`.
    pub payout: PayoutVector,
}

impl FacetInequality {
    /// `c - a·p`; positive when `p` violates the inequality.
    pub fn violation(&self, p: &[f64]) -> f64 {
        self.c - linalg::dot(&self.a, p)
    }

    /// The inequality as a bet over the extended events `(E₁…E_n, Ω)`.
    pub fn as_bet(&self) -> Vec<f64> {
        let mut a = self.a.clone();
        a.push(-self.c);
        a
    }
}

/// A bet that pays `V̄ᵀa ≥ 0` in every atom but costs `a·q̄ < 0`.
#[derive(Clone, Debug, PartialEq)]
pub struct BetCertificate {
    /// Stakes on `(E₁…E_n, Ω)`.
    pub a: Vec<f64>,
    pub payouts: Vec<f64>,
    pub cost: f64,
}

impl BetCertificate {
    fn new(base: &CredenceBase, a: Vec<f64>) -> Self {
        let payouts = base
            .extended_matrix()
            .tr_mul_vec(&a)
            .into_iter()
            .map(|v| if v.abs() <= ZERO_TOL { 0.0 } else { v })
            .collect();
        let cost = linalg::dot(&a, &base.extended_credences());
        Self { a, payouts, cost }
    }

    /// Nonnegative payouts and strictly negative cost.
    pub fn is_valid(&self) -> bool {
        self.payouts.iter().all(|&v| v >= -1e-12) && self.cost < -1e-9
    }
}

/// True iff `b`, a nonnegative vector in the row span of `vbar`, is
/// maximally 0: the columns of `vbar` on its zero set have rank one less
/// than `vbar` itself.
pub fn is_maximally_zero(b: &[f64], vbar: &Matrix) -> Result<bool> {
    if b.len() != vbar.ncols() {
        return Err(Error::Dimension(format!("vector has {} entries, matrix has {} columns", b.len(), vbar.ncols())));
    }
    if linalg::row_combination(vbar, b).is_none() {
        return Err(Error::Invalid("vector is outside the row span".into()));
    }
    if b.iter().any(|&v| v < -ZERO_TOL) {
        return Err(Error::Invalid("vector has negative entries".into()));
    }
    if b.iter().all(|v| v.abs() <= ZERO_TOL) {
        return Ok(false);
    }
    let z = zero_set(b);
    Ok(!z.is_empty() && vbar.select_columns(&z).rank() + 1 == vbar.rank())
}

fn combinations(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut idx: Vec<usize> = (0..k).collect();
    if k > n {
        return out;
    }
    loop {
        out.push(idx.clone());
        let Some(i) = (0..k).rev().find(|&i| idx[i] != i + n - k) else { break };
        idx[i] += 1;
        for j in i + 1..k {
            idx[j] = idx[j - 1] + 1;
        }
    }
    out
}

/// All facets of `conv(columns of v)`, for `v` whose extension `V̄` has full
/// row rank.
pub fn facets_of_matrix(v: &Matrix) -> Result<Vec<FacetInequality>> {
    let (n, big_n) = (v.nrows(), v.ncols());
    if big_n > MAX_FACET_ATOMS {
        return Err(Error::TooLarge(format!("facet enumeration over {big_n} atoms (limit {MAX_FACET_ATOMS})")));
    }
    let mut rows: Vec<Vec<f64>> = v.rows_iter().map(<[f64]>::to_vec).collect();
    rows.push(vec![1.0; big_n]);
    let vbar = Matrix::from_rows(&rows);
    let rank = vbar.rank();
    if rank != n + 1 {
        return Err(Error::RankDeficient { rank, expected: n + 1 });
    }
    let vbar_t = vbar.transpose();
    let candidates: Vec<Option<PayoutVector>> = combinations(big_n, n)
        .into_par_iter()
        .map(|subset| {
            let m = vbar_t.select_rows(&subset);
            let a = linalg::null_vector(&m)?;
            let b = vbar_t.mul_vec(&a);
            let scale = b.iter().fold(0.0f64, |s, x| s.max(x.abs()));
            let tol = ZERO_TOL * scale.max(1.0);
            let b = if b.iter().all(|&x| x >= -tol) {
                b
            } else if b.iter().all(|&x| x <= tol) {
                b.iter().map(|x| -x).collect()
            } else {
                return None;
            };
            let b: Vec<f64> = b.iter().map(|x| x / scale).collect();
            PayoutVector::normalize(&b)
        })
        .collect();
    let mut payouts: Vec<PayoutVector> = Vec::new();
    for p in candidates.into_iter().flatten() {
        let dup = payouts.iter().any(|q| q.0.iter().zip(&p.0).all(|(x, y)| (x - y).abs() <= DEDUP_TOL));
        if !dup {
            payouts.push(p);
        }
    }
    payouts
        .into_iter()
        .map(|payout| {
            let coeffs = linalg::row_combination(&vbar, payout.as_slice())
                .ok_or_else(|| Error::Invalid("payout left the row span".into()))?;
            let c = -coeffs[n];
            Ok(FacetInequality { a: coeffs[..n].to_vec(), c, payout })
        })
        .collect()
}

/// Facets of `C(E)` for a base with full-rank `V̄`.
pub fn enumerate_facets(base: &CredenceBase) -> Result<Vec<FacetInequality>> {
    facets_of_matrix(base.matrix())
}

/// `true` when `p` satisfies every inequality within `margin`.
pub fn satisfies_all(facets: &[FacetInequality], p: &[f64], margin: f64) -> bool {
    facets.iter().all(|f| f.violation(p) <= margin)
}

/// A Dutch book against the base, or `None` when it is coherent.
///
/// Linearly inconsistent credences give a bet with zero payouts. Otherwise
/// the bet comes from the facet the credences violate most; for bases too
/// large to enumerate, from the direction to the nearest coherent point.
pub fn dutch_book(base: &CredenceBase) -> Option<BetCertificate> {
    let n = base.n();
    let reduction = base.reduce_full_rank();
    if reduction.consistency == Consistency::Inconsistent {
        let a = reduction.dependency.expect("inconsistent reductions carry a dependency");
        return Some(BetCertificate::new(base, a));
    }
    if base.coherence_check(COHERENCE_TOL).coherent {
        return None;
    }
    let reduced = &reduction.base;
    let q = reduced.credences();
    // stakes over the reduced extended events
    let stakes: Vec<f64> = match enumerate_facets(reduced) {
        Ok(facets) => {
            let worst = facets
                .iter()
                .max_by(|x, y| x.violation(q).total_cmp(&y.violation(q)))
                .expect("a full-rank polytope has facets");
            worst.as_bet()
        }
        Err(_) => {
            let unit = reduced.with_weights(&vec![1.0; reduced.n()]).ok()?;
            let r = projection::project(&unit, &Dissimilarity::Squared, &SolverConfig::default()).ok()?;
            let d: Vec<f64> = q.iter().zip(&r.p_star).map(|(a, b)| a - b).collect();
            let v = reduced.matrix();
            let top = (0..reduced.num_atoms())
                .map(|j| (0..reduced.n()).map(|i| d[i] * v[(i, j)]).sum::<f64>())
                .fold(f64::NEG_INFINITY, f64::max);
            let mut a: Vec<f64> = d.iter().map(|x| -x).collect();
            a.push(top);
            a
        }
    };
    let mut a = vec![0.0; n + 1];
    for (k, &i) in reduction.kept.iter().enumerate() {
        a[i] = stakes[k];
    }
    a[n] = stakes[reduction.kept.len()];
    let bet = BetCertificate::new(base, a);
    bet.is_valid().then_some(bet)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn weather() -> Matrix {
        Matrix::from_rows(&[[1.0, 1.0, 0.0, 0.0], [1.0, 0.0, 1.0, 0.0], [1.0, 0.0, 0.0, 0.0]])
    }

    /// Rescales an inequality so it can be compared with a hand-written one.
    fn same_inequality(f: &FacetInequality, a: &[f64], c: f64) -> bool {
        let mut lhs = f.a.clone();
        lhs.push(f.c);
        let mut rhs = a.to_vec();
        rhs.push(c);
        let k = lhs.iter().zip(&rhs).find(|(_, r)| r.abs() > 0.0).map(|(l, r)| l / r).unwrap();
        k > 0.0 && lhs.iter().zip(&rhs).all(|(l, r)| (l - k * r).abs() < 1e-9)
    }

    #[test]
    fn tetrahedron_facets() {
        let facets = facets_of_matrix(&weather()).unwrap();
        assert_eq!(facets.len(), 4);
        let want: [(&[f64], f64); 4] = [
            (&[0.0, 0.0, 1.0], 0.0),
            (&[1.0, 0.0, -1.0], 0.0),
            (&[0.0, 1.0, -1.0], 0.0),
            (&[-1.0, -1.0, 1.0], -1.0),
        ];
        for (a, c) in want {
            assert_eq!(facets.iter().filter(|f| same_inequality(f, a, c)).count(), 1, "{a:?} >= {c}");
        }
    }

    #[test]
    fn interval_facets() {
        let facets = facets_of_matrix(&Matrix::from_rows(&[[1.0, 0.0]])).unwrap();
        assert_eq!(facets.len(), 2);
        assert!(facets.iter().any(|f| same_inequality(f, &[1.0], 0.0)));
        assert!(facets.iter().any(|f| same_inequality(f, &[-1.0], -1.0)));
    }

    #[test]
    fn maximally_zero() {
        let mut rows: Vec<Vec<f64>> = weather().rows_iter().map(<[f64]>::to_vec).collect();
        rows.push(vec![1.0; 4]);
        let vbar = Matrix::from_rows(&rows);
        // p₃ ≥ 0 pays on atom 1 only
        assert!(is_maximally_zero(&[1.0, 0.0, 0.0, 0.0], &vbar).unwrap());
        assert!(!is_maximally_zero(&[1.0; 4], &vbar).unwrap());
        // sum of the payouts of p₃ ≥ 0 and p₁ ≥ p₃
        assert!(!is_maximally_zero(&[1.0, 1.0, 0.0, 0.0], &vbar).unwrap());
        let outside = Matrix::from_rows(&[[1.0, 1.0, 0.0], [1.0, 1.0, 1.0]]);
        assert!(is_maximally_zero(&[1.0, 0.0, 0.0], &outside).is_err());
    }

    #[test]
    fn rank_deficient_rejected() {
        let v = Matrix::from_rows(&[[1.0, 0.0], [0.0, 1.0]]);
        assert!(matches!(facets_of_matrix(&v), Err(Error::RankDeficient { .. })));
    }

    #[test]
    fn dutch_books() {
        let rep = CredenceBase::from_matrix(&[[1.0, 0.0], [1.0, 0.0]], &[0.4, 0.6], None).unwrap();
        let bet = dutch_book(&rep).unwrap();
        assert_eq!(bet.a, vec![1.0, -1.0, 0.0]);
        assert_eq!(bet.payouts, vec![0.0, 0.0]);
        assert!((bet.cost + 0.2).abs() < 1e-12);

        let rows: Vec<Vec<f64>> = weather().rows_iter().map(<[f64]>::to_vec).collect();
        let fig = CredenceBase::from_matrix(&rows, &[0.5, 0.6, 0.7], None).unwrap();
        let bet = dutch_book(&fig).unwrap();
        assert!(bet.is_valid());
        // p₁ ≥ p₃ is the violated facet: stake +1 on E₁, -1 on E₃
        let k = bet.a[0];
        assert!(k > 0.0);
        let scaled: Vec<f64> = bet.a.iter().map(|x| x / k).collect();
        assert!(scaled.iter().zip(&[1.0, 0.0, -1.0, 0.0]).all(|(x, y)| (x - y).abs() < 1e-9));

        let coherent = fig.with_credences(&[0.5, 0.6, 0.3]).unwrap();
        assert!(dutch_book(&coherent).is_none());
    }
}
