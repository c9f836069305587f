#![allow(dead_code)]

use coherence::credence::CredenceBase;
use coherence::linalg::Matrix;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Rows are neither empty nor the sure event.
pub fn random_rows(rng: &mut impl Rng, n: usize, atoms: usize) -> Vec<Vec<f64>> {
    (0..n)
        .map(|_| loop {
            let row: Vec<f64> = (0..atoms).map(|_| if rng.gen_bool(0.5) { 1.0 } else { 0.0 }).collect();
            let ones = row.iter().filter(|&&x| x == 1.0).count();
            if ones > 0 && ones < atoms {
                break row;
            }
        })
        .collect()
}

/// As [`random_rows`], with pairwise distinct columns.
pub fn random_distinct_rows(rng: &mut impl Rng, n: usize, atoms: usize) -> Vec<Vec<f64>> {
    assert!(n < usize::BITS as usize && 1usize << n >= atoms, "{n} rows cannot separate {atoms} atoms");
    loop {
        let rows = random_rows(rng, n, atoms);
        let m = Matrix::from_rows(&rows);
        let cols: Vec<Vec<f64>> = (0..atoms).map(|j| m.column(j)).collect();
        let distinct = (0..atoms).all(|a| (a + 1..atoms).all(|b| cols[a] != cols[b]));
        if distinct {
            return rows;
        }
    }
}

/// A simplex point with every entry at least `floor / len`.
pub fn random_simplex(rng: &mut impl Rng, len: usize, floor: f64) -> Vec<f64> {
    let raw: Vec<f64> = (0..len).map(|_| floor + rng.gen::<f64>()).collect();
    let s: f64 = raw.iter().sum();
    raw.into_iter().map(|x| x / s).collect()
}

pub fn random_credences(rng: &mut impl Rng, n: usize, lo: f64, hi: f64) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(lo..hi)).collect()
}

pub fn coherent_base(rows: &[Vec<f64>], pi: &[f64]) -> CredenceBase {
    let q = Matrix::from_rows(rows).mul_vec(pi);
    CredenceBase::from_matrix(rows, &q, None).unwrap()
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).fold(0.0f64, |m, (x, y)| m.max((x - y).abs()))
}

/// Fewest rows whose columns can tell `atoms` atoms apart.
pub fn rows_to_separate(atoms: usize) -> usize {
    (usize::BITS - (atoms - 1).leading_zeros()) as usize
}
