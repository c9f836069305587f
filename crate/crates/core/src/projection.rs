//! The nearest coherent credences `p*(q)` and the incoherence `L*(q)`.

use crate::credence::{CredenceBase, ProbabilityVector, COHERENCE_TOL};
use crate::dissimilarity::{logit, sigmoid, Dissimilarity};
use crate::error::{Error, Result};
use crate::linalg::{self, Matrix};
use crate::solver::{self, Objective, SolverConfig};

#[derive(Clone, Debug)]
pub struct ProjectionResult {
    /// `p* = V π*`.
    pub p_star: Vec<f64>,
    pub pi_star: ProbabilityVector,
    /// `L*(q)`, possibly `+∞`.
    pub incoherence: f64,
    pub converged: bool,
    pub iterations: usize,
    pub gap_estimate: f64,
}

/// Values closer than this to 0 or 1 are moved inwards before evaluating
/// derivatives, keeping gradients finite on the boundary.
const GRAD_EPS: f64 = 1e-12;
/// Infinite partial derivatives (credences of exactly 0 or 1) are capped.
const GRAD_CAP: f64 = 1e12;

/// `π ↦ Σᵢ wᵢ ℓ((Vπ)ᵢ, qᵢ)`.
pub struct LossObjective<'a> {
    pub matrix: &'a Matrix,
    pub credences: &'a [f64],
    pub weights: &'a [f64],
    pub spec: &'a Dissimilarity,
}

impl<'a> LossObjective<'a> {
    pub fn for_base(base: &'a CredenceBase, spec: &'a Dissimilarity) -> Self {
        Self { matrix: base.matrix(), credences: base.credences(), weights: base.weights(), spec }
    }

    /// The loss of an arbitrary vector `p` of event probabilities.
    pub fn loss_of(&self, p: &[f64]) -> f64 {
        p.iter()
            .zip(self.credences)
            .zip(self.weights)
            .map(|((&p, &q), &w)| w * self.spec.eval(p.clamp(0.0, 1.0), q))
            .sum()
    }
}

impl Objective for LossObjective<'_> {
    fn value(&self, pi: &[f64]) -> f64 {
        self.loss_of(&self.matrix.mul_vec(pi))
    }

    fn gradient(&self, pi: &[f64], grad: &mut [f64]) {
        let p = self.matrix.mul_vec(pi);
        let dp: Vec<f64> = p
            .iter()
            .zip(self.credences)
            .zip(self.weights)
            .map(|((&p, &q), &w)| {
                let d = self.spec.d_dp(p.clamp(GRAD_EPS, 1.0 - GRAD_EPS), q);
                w * if d.is_nan() { 0.0 } else { d.clamp(-GRAD_CAP, GRAD_CAP) }
            })
            .collect();
        grad.copy_from_slice(&self.matrix.tr_mul_vec(&dp));
    }
}

/// Columns of `matrix` consistent with every credence of exactly 0 or 1.
pub(crate) fn allowed_columns(matrix: &Matrix, credences: &[f64]) -> Vec<usize> {
    (0..matrix.ncols())
        .filter(|&j| {
            credences.iter().enumerate().all(|(i, &q)| {
                (q != 0.0 || matrix[(i, j)] == 0.0) && (q != 1.0 || matrix[(i, j)] == 1.0)
            })
        })
        .collect()
}

/// Starting points tried when the uniform distribution has infinite loss.
fn fallback_starts(base: &CredenceBase) -> Vec<Vec<f64>> {
    let n_atoms = base.num_atoms();
    let mut starts = Vec::new();
    let allowed = allowed_columns(base.matrix(), base.credences());
    if !allowed.is_empty() {
        let mut s = vec![0.0; n_atoms];
        for &j in &allowed {
            s[j] = 1.0 / allowed.len() as f64;
        }
        starts.push(s);
    }
    let fit = linalg::nnls(&base.extended_matrix(), &base.extended_credences());
    let total: f64 = fit.iter().sum();
    if total > 0.0 {
        starts.push(fit.iter().map(|v| v / total).collect());
    }
    starts
}

/// Minimises `Σᵢ wᵢ ℓ(pᵢ, qᵢ)` over coherent `p`.
pub fn project(base: &CredenceBase, spec: &Dissimilarity, config: &SolverConfig) -> Result<ProjectionResult> {
    if spec.is_half() {
        return Err(Error::HalfDissimilarity(if *spec == Dissimilarity::HalfF { "half-f" } else { "half-fo" }));
    }
    if *spec == Dissimilarity::ExactMatch {
        return Ok(project_exact(base));
    }
    let objective = LossObjective::for_base(base, spec);
    let out = solver::minimize_from(&objective, base.num_atoms(), None, config, &fallback_starts(base))?;
    let p_star = base.matrix().mul_vec(out.argmin.as_slice());
    Ok(ProjectionResult {
        p_star,
        pi_star: out.argmin,
        incoherence: out.objective_value.max(0.0),
        converged: out.converged,
        iterations: out.iterations,
        gap_estimate: out.gap_estimate,
    })
}

fn project_exact(base: &CredenceBase) -> ProjectionResult {
    let verdict = base.coherence_check(COHERENCE_TOL);
    match verdict.witness {
        Some(pi) if verdict.coherent => ProjectionResult {
            p_star: base.credences().to_vec(),
            pi_star: pi,
            incoherence: 0.0,
            converged: true,
            iterations: 0,
            gap_estimate: 0.0,
        },
        _ => {
            let pi = ProbabilityVector::uniform(base.num_atoms());
            ProjectionResult {
                p_star: base.matrix().mul_vec(pi.as_slice()),
                pi_star: pi,
                incoherence: f64::INFINITY,
                converged: false,
                iterations: 0,
                gap_estimate: f64::INFINITY,
            }
        }
    }
}

/// `L*` under the squared dissimilarity, unweighted.
pub fn squared_incoherence(base: &CredenceBase) -> f64 {
    let unit = base.with_weights(&vec![1.0; base.n()]).expect("unit weights are valid");
    project(&unit, &Dissimilarity::Squared, &SolverConfig::default())
        .map(|r| r.incoherence)
        .unwrap_or(f64::INFINITY)
}

fn check_interior(q: &[f64]) -> Result<()> {
    if q.is_empty() {
        return Err(Error::NoEvents);
    }
    match q.iter().position(|&v| !(v > 0.0 && v < 1.0)) {
        Some(index) => Err(Error::CredenceOutOfRange { index, value: q[index] }),
        None => Ok(()),
    }
}

/// Common value of `n` estimates of one event: the geometric mean of odds
/// under `f`, the arithmetic mean under `fᵒ`.
pub fn closed_form_repetition(q: &[f64], spec: &Dissimilarity) -> Result<f64> {
    if q.is_empty() {
        return Err(Error::NoEvents);
    }
    if let Some(index) = q.iter().position(|v| !(0.0..=1.0).contains(v)) {
        return Err(Error::CredenceOutOfRange { index, value: q[index] });
    }
    match spec {
        Dissimilarity::BinaryKl => {
            let zero = q.contains(&0.0);
            let one = q.contains(&1.0);
            match (zero, one) {
                (true, true) => Err(Error::Invalid("estimates 0 and 1 make every value infinitely incoherent".into())),
                (true, false) => Ok(0.0),
                (false, true) => Ok(1.0),
                (false, false) => Ok(sigmoid(q.iter().map(|&v| logit(v)).sum::<f64>() / q.len() as f64)),
            }
        }
        Dissimilarity::TransposedKl => Ok(q.iter().sum::<f64>() / q.len() as f64),
        other => Err(Error::Invalid(format!("no closed form for repetition under {}", other.name()))),
    }
}

const ROOT_TOL: f64 = 1e-12;

/// Finds `x` with `g(x) = 0` for decreasing `g`, expanding `[lo, hi]` first.
pub(crate) fn bisect_decreasing(g: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> Result<f64> {
    let mut expansions = 0;
    while g(lo) < 0.0 || g(hi) > 0.0 {
        if expansions > 60 {
            return Err(Error::RootFinding("could not bracket the root".into()));
        }
        if g(lo) < 0.0 {
            lo = 2.0 * lo - hi;
        }
        if g(hi) > 0.0 {
            hi = 2.0 * hi - lo;
        }
        expansions += 1;
    }
    for _ in 0..300 {
        let mid = 0.5 * (lo + hi);
        if hi - lo <= ROOT_TOL * (1.0 + mid.abs()) {
            break;
        }
        if g(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// The smaller root of `λp² − (1+λ)p + q = 0`, which lies in `[0, 1]`.
fn fo_partition_value(lambda: f64, q: f64) -> f64 {
    let b = 1.0 + lambda;
    let s = (b * b - 4.0 * lambda * q).max(0.0).sqrt();
    if lambda == 0.0 {
        q
    } else if b >= 0.0 {
        2.0 * q / (b + s)
    } else {
        (b - s) / (2.0 * lambda)
    }
}

/// Nearest coherent assignment for events forming a partition: a constant
/// logit shift under `f`, a common multiplier under `fᵒ`.
pub fn closed_form_partition(q: &[f64], spec: &Dissimilarity) -> Result<Vec<f64>> {
    check_interior(q)?;
    match spec {
        Dissimilarity::BinaryKl => {
            let logits: Vec<f64> = q.iter().map(|&v| logit(v)).collect();
            let total = |c: f64| logits.iter().map(|&l| sigmoid(l + c)).sum::<f64>() - 1.0;
            let c = bisect_decreasing(|c| -total(c), -1.0, 1.0)?;
            Ok(logits.iter().map(|&l| sigmoid(l + c)).collect())
        }
        Dissimilarity::TransposedKl => {
            let total = |l: f64| q.iter().map(|&v| fo_partition_value(l, v)).sum::<f64>() - 1.0;
            let lambda = bisect_decreasing(total, -1.0, 1.0)?;
            Ok(q.iter().map(|&v| fo_partition_value(lambda, v)).collect())
        }
        other => Err(Error::Invalid(format!("no closed form for a partition under {}", other.name()))),
    }
}

/// `(p*_E, L*)` for an event `E` and its complement.
pub fn closed_form_complement_pair(q_e: f64, q_ec: f64, spec: &Dissimilarity) -> Result<(f64, f64)> {
    match spec {
        Dissimilarity::Squared => {
            for (index, value) in [(0, q_e), (1, q_ec)] {
                if !(0.0..=1.0).contains(&value) {
                    return Err(Error::CredenceOutOfRange { index, value });
                }
            }
            let gap = q_e + q_ec - 1.0;
            Ok(((q_e + 1.0 - q_ec) / 2.0, gap * gap))
        }
        Dissimilarity::BinaryKl => {
            check_interior(&[q_e, q_ec])?;
            let odds = (q_e * (1.0 - q_ec) / ((1.0 - q_e) * q_ec)).sqrt();
            let p = odds / (1.0 + odds);
            let l = ((1.0 - p) * (1.0 - p) / ((1.0 - q_e) * q_ec)).ln();
            Ok((p, l.max(0.0)))
        }
        Dissimilarity::TransposedKl => {
            check_interior(&[q_e, q_ec])?;
            let p = (q_e + 1.0 - q_ec) / 2.0;
            let l = spec.eval(p, q_e) + spec.eval(1.0 - p, q_ec);
            Ok((p, l))
        }
        other => Err(Error::Invalid(format!("no closed form for a complement pair under {}", other.name()))),
    }
}

/// `∇_q L*(q)`: the partial derivatives `wᵢ ∂ℓ(p*ᵢ, qᵢ)/∂qᵢ`.
pub fn incoherence_gradient(base: &CredenceBase, spec: &Dissimilarity, config: &SolverConfig) -> Result<Vec<f64>> {
    check_interior(base.credences())?;
    let r = project(base, spec, config)?;
    if !r.converged {
        return Err(Error::NoConvergence(format!("projection stopped after {} iterations", r.iterations)));
    }
    Ok(r.p_star
        .iter()
        .zip(base.credences())
        .zip(base.weights())
        .map(|((&p, &q), &w)| w * spec.d_dq(p, q))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn base(rows: &[&[f64]], q: &[f64]) -> CredenceBase {
        CredenceBase::from_matrix(rows, q, None).unwrap()
    }

    fn cfg() -> SolverConfig {
        SolverConfig::default()
    }

    #[test]
    fn coherent_input_is_fixed() {
        let b = base(&[&[1., 1., 0., 0.], &[1., 1., 1., 0.]], &[0.5, 0.9]);
        for spec in [Dissimilarity::BinaryKl, Dissimilarity::TransposedKl, Dissimilarity::Squared] {
            let r = project(&b, &spec, &cfg()).unwrap();
            assert!(r.converged);
            assert!(r.incoherence < 1e-12);
            assert!((r.p_star[0] - 0.5).abs() < 1e-7 && (r.p_star[1] - 0.9).abs() < 1e-7);
        }
    }

    #[test]
    fn repetition_matches_closed_form() {
        let b = base(&[&[1., 0.], &[1., 0.], &[1., 0.]], &[0.1, 0.3, 0.5]);
        let f = project(&b, &Dissimilarity::BinaryKl, &cfg()).unwrap();
        let want = closed_form_repetition(&[0.1, 0.3, 0.5], &Dissimilarity::BinaryKl).unwrap();
        assert!(f.p_star.iter().all(|p| (p - want).abs() < 1e-8));
        let odds = (1.0 / 9.0 * 3.0 / 7.0f64).cbrt();
        assert!((want - odds / (1.0 + odds)).abs() < 1e-14);
        let fo = project(&b, &Dissimilarity::TransposedKl, &cfg()).unwrap();
        assert!(fo.p_star.iter().all(|p| (p - 0.3).abs() < 1e-8));
    }

    #[test]
    fn partition_closed_forms() {
        let q = [0.1, 0.6, 0.99];
        let id: [&[f64]; 3] = [&[1., 0., 0.], &[0., 1., 0.], &[0., 0., 1.]];
        let b = base(&id, &q);
        for spec in [Dissimilarity::BinaryKl, Dissimilarity::TransposedKl] {
            let closed = closed_form_partition(&q, &spec).unwrap();
            assert!((closed.iter().sum::<f64>() - 1.0).abs() < 1e-10);
            let num = project(&b, &spec, &cfg()).unwrap();
            for (a, c) in num.p_star.iter().zip(&closed) {
                assert!((a - c).abs() < 1e-7, "{spec:?}: {:?} vs {closed:?}", num.p_star);
            }
        }
        let same = closed_form_partition(&[0.2, 0.3, 0.5], &Dissimilarity::BinaryKl).unwrap();
        assert!((same[1] - 0.3).abs() < 1e-10);
    }

    #[test]
    fn complement_pair_forms() {
        let (p, l) = closed_form_complement_pair(0.7, 0.7, &Dissimilarity::Squared).unwrap();
        assert!((p - 0.5).abs() < 1e-15 && (l - 0.16).abs() < 1e-15);
        for spec in [Dissimilarity::Squared, Dissimilarity::BinaryKl, Dissimilarity::TransposedKl] {
            let (p, l) = closed_form_complement_pair(0.35, 0.65, &spec).unwrap();
            assert!((p - 0.35).abs() < 1e-12 && l.abs() < 1e-12);
            let b = base(&[&[1., 0.], &[0., 1.]], &[0.8, 0.45]);
            let (p, l) = closed_form_complement_pair(0.8, 0.45, &spec).unwrap();
            let r = project(&b, &spec, &cfg()).unwrap();
            assert!((r.p_star[0] - p).abs() < 1e-8 && (r.incoherence - l).abs() < 1e-10);
        }
    }

    #[test]
    fn boundary_credences_use_allowed_atoms() {
        // q₁ = 0 rules out the first atom; uniform start has infinite f loss
        let b = base(&[&[1., 0., 0.], &[0., 1., 1.]], &[0.0, 0.7]);
        let r = project(&b, &Dissimilarity::BinaryKl, &cfg()).unwrap();
        assert!(r.converged);
        assert!(r.p_star[0].abs() < 1e-12 && (r.p_star[1] - 1.0).abs() < 1e-9);
        assert!((r.incoherence - Dissimilarity::BinaryKl.eval(1.0, 0.7)).abs() < 1e-9);
    }

    #[test]
    fn exact_match() {
        let ok = base(&[&[1., 0.]], &[0.4]);
        let r = project(&ok, &Dissimilarity::ExactMatch, &cfg()).unwrap();
        assert_eq!((r.incoherence, r.converged), (0.0, true));
        let bad = base(&[&[1., 0.], &[1., 0.]], &[0.1, 0.3]);
        let r = project(&bad, &Dissimilarity::ExactMatch, &cfg()).unwrap();
        assert_eq!((r.incoherence, r.converged), (f64::INFINITY, false));
    }

    #[test]
    fn half_variants_rejected() {
        let b = base(&[&[1., 0.]], &[0.4]);
        assert!(matches!(project(&b, &Dissimilarity::HalfF, &cfg()), Err(Error::HalfDissimilarity(_))));
    }

    #[test]
    fn gradient_of_coherent_input_vanishes() {
        let b = base(&[&[1., 1., 0.], &[0., 1., 1.]], &[0.5, 0.6]);
        let g = incoherence_gradient(&b, &Dissimilarity::BinaryKl, &cfg()).unwrap();
        assert!(g.iter().all(|v| v.abs() < 1e-6));
    }
}
