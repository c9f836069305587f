//! Merging individually coherent experts with content-invariant losses.
//!
//! Each expert is summarised by the events whose probability its credences
//! pin down (the inferable set `I`), the maximally-0 members of that set (the
//! positive basis `B`) and the implied belief `Q` on them. A merged belief
//! `π` over the common refinement of all experts' atoms minimises the sum of
//! per-expert disagreements.

use crate::credence::{Atom, AtomSpace, CredenceBase, EventVector, ProbabilityVector, COHERENCE_TOL};
use crate::dissimilarity::Dissimilarity;
use crate::error::{Error, Result};
use crate::linalg::{self, Matrix};
use crate::projection::{allowed_columns, LossObjective};
use crate::solver::{self, SolverConfig};

/// Largest `n + 1` for which the inferable set is enumerated.
pub const MAX_INFERABLE_BITS: usize = 22;
/// Default node budget of the exact-cover search.
pub const COVER_BUDGET: usize = 1_000_000;

/// A coherent expert together with its inferable events.
#[derive(Clone, Debug)]
pub struct ExpertReport {
    base: CredenceBase,
    reduced: CredenceBase,
    /// `None` when `I` is too large to list.
    inferable: Option<Vec<(EventVector, f64)>>,
    basis: Vec<(EventVector, f64)>,
}

impl ExpertReport {
    pub fn new(base: CredenceBase) -> Result<Self> {
        if !base.coherence_check(COHERENCE_TOL).coherent {
            return Err(Error::Incoherent);
        }
        let reduced = base.reduce_full_rank().base;
        let big_n = reduced.num_atoms();
        let rank = reduced.n() + 1;
        let (inferable, basis) = if rank == big_n {
            // every 0/1 vector is inferable; the atoms form the basis
            let pi = implied_atoms(&reduced)?;
            let basis = (0..big_n).map(|j| (EventVector::unit(big_n, j), pi[j])).collect();
            let inferable = (rank <= MAX_INFERABLE_BITS).then(|| {
                (0..1u64 << big_n)
                    .map(|m| {
                        let e = EventVector::new((0..big_n).map(|j| m >> j & 1 == 1).collect());
                        let q = e.prob(&pi).clamp(0.0, 1.0);
                        (e, q)
                    })
                    .collect()
            });
            (inferable, basis)
        } else {
            if rank > MAX_INFERABLE_BITS {
                return Err(Error::TooLarge(format!("inferable set of an expert with {} independent events", rank - 1)));
            }
            let inferable = enumerate_inferable(&reduced);
            let events: Vec<EventVector> = inferable.iter().map(|(e, _)| e.clone()).collect();
            let basis = positive_basis(&events)
                .into_iter()
                .map(|b| {
                    let q = inferable.iter().find(|(e, _)| *e == b).map(|(_, q)| *q).expect("basis drawn from I");
                    (b, q)
                })
                .collect();
            (Some(inferable), basis)
        };
        let mut basis: Vec<(EventVector, f64)> = basis;
        basis.sort_by(|a, b| a.0.cmp(&b.0));
        Ok(Self { base, reduced, inferable, basis })
    }

    pub fn base(&self) -> &CredenceBase {
        &self.base
    }

    /// The base with dependent events removed.
    pub fn reduced(&self) -> &CredenceBase {
        &self.reduced
    }

    /// `I` with the implied belief of each element.
    pub fn inferable(&self) -> Result<&[(EventVector, f64)]> {
        self.inferable
            .as_deref()
            .ok_or_else(|| Error::TooLarge("inferable set too large to enumerate".into()))
    }

    /// `B` with the implied belief of each element.
    pub fn basis(&self) -> &[(EventVector, f64)] {
        &self.basis
    }

    /// `Q(event)`, the implied belief of an inferable event.
    pub fn implied(&self, event: &EventVector) -> Result<f64> {
        crate::credence::implied_belief_full_rank(&self.reduced, event)
    }
}

/// Atom probabilities of a coherent base whose `V̄` is square and invertible.
fn implied_atoms(reduced: &CredenceBase) -> Result<Vec<f64>> {
    let n = reduced.num_atoms();
    (0..n).map(|j| crate::credence::implied_belief_full_rank(reduced, &EventVector::unit(n, j))).collect()
}

/// `I` via the row-reduced augmented matrix `[V̄ | q̄]`: every element is
/// `Rᵀv` for `v ∈ {0,1}^{n+1}` and its implied belief is `v·r`, where `r`
/// is the reduced credence column.
fn enumerate_inferable(reduced: &CredenceBase) -> Vec<(EventVector, f64)> {
    let vbar = reduced.extended_matrix();
    let qbar = reduced.extended_credences();
    let (m, big_n) = (vbar.nrows(), vbar.ncols());
    let mut aug = Matrix::zeros(m, big_n + 1);
    for i in 0..m {
        for j in 0..big_n {
            aug[(i, j)] = vbar[(i, j)];
        }
        aug[(i, big_n)] = qbar[i];
    }
    let red = linalg::rref(&aug);
    let mut out = Vec::new();
    for mask in 0..1u64 << m {
        let mut e = vec![0.0; big_n];
        let mut q = 0.0;
        for k in 0..m {
            if mask >> k & 1 == 1 {
                for (j, x) in e.iter_mut().enumerate() {
                    *x += red.matrix[(k, j)];
                }
                q += red.matrix[(k, big_n)];
            }
        }
        if e.iter().all(|&x| x.abs() <= 1e-9 || (x - 1.0).abs() <= 1e-9) {
            let bits = EventVector::new(e.iter().map(|&x| x > 0.5).collect());
            out.push((bits, q.clamp(0.0, 1.0)));
        }
    }
    out.sort_by(|a, b| a.0.cmp(&b.0));
    out
}

/// The inferable set `I = rowspan(V̄) ∩ {0,1}^N` of a full-rank base.
pub fn inferable_set(report: &ExpertReport) -> Result<Vec<EventVector>> {
    Ok(report.inferable()?.iter().map(|(e, _)| e.clone()).collect())
}

/// Nonzero elements of `events` whose zero set is not strictly contained in
/// that of another nonzero element.
pub fn positive_basis(events: &[EventVector]) -> Vec<EventVector> {
    let nonzero: Vec<&EventVector> = events.iter().filter(|e| !e.is_zero()).collect();
    let subset = |a: &EventVector, b: &EventVector| a.bits().iter().zip(b.bits()).all(|(&x, &y)| !x || y);
    let mut out: Vec<EventVector> = nonzero
        .iter()
        .filter(|b| !nonzero.iter().any(|c| c != *b && subset(c, b)))
        .map(|b| (*b).clone())
        .collect();
    out.sort();
    out.dedup();
    out
}

/// All subsets of `basis` whose elements sum to the all-ones vector, as
/// sorted index lists in lexicographic order.
pub fn exact_covers(basis: &[EventVector], budget: usize) -> Result<Vec<Vec<usize>>> {
    let Some(len) = basis.first().map(EventVector::len) else {
        return Ok(Vec::new());
    };
    let mut covers = Vec::new();
    let mut covered = vec![false; len];
    let mut chosen = Vec::new();
    let mut nodes = 0usize;
    cover_search(basis, &mut covered, &mut chosen, &mut covers, &mut nodes, budget)?;
    for c in covers.iter_mut() {
        c.sort_unstable();
    }
    covers.sort();
    Ok(covers)
}

fn cover_search(
    basis: &[EventVector],
    covered: &mut [bool],
    chosen: &mut Vec<usize>,
    covers: &mut Vec<Vec<usize>>,
    nodes: &mut usize,
    budget: usize,
) -> Result<()> {
    *nodes += 1;
    if *nodes > budget {
        return Err(Error::TooLarge(format!("exact-cover search exceeded {budget} nodes")));
    }
    let Some(first) = covered.iter().position(|&c| !c) else {
        covers.push(chosen.clone());
        return Ok(());
    };
    for (k, b) in basis.iter().enumerate() {
        if !b.contains(first) || b.bits().iter().zip(covered.iter()).any(|(&x, &c)| x && c) {
            continue;
        }
        for (c, &x) in covered.iter_mut().zip(b.bits()) {
            *c |= x;
        }
        chosen.push(k);
        cover_search(basis, covered, chosen, covers, nodes, budget)?;
        chosen.pop();
        for (c, &x) in covered.iter_mut().zip(b.bits()) {
            if x {
                *c = false;
            }
        }
    }
    Ok(())
}

/// Which events each expert's disagreement sums over.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SummationSet {
    /// The stated events, summed without normalisation.
    StatedEvents,
    /// `I` without the impossible and sure events, averaged.
    FullI,
    /// `B`, averaged.
    BasisB,
    /// Every exact cover of the sure event by `B`, averaged over the `M`
    /// terms; requires a half-dissimilarity.
    AsymmetricBasis,
}

#[derive(Clone, Debug, PartialEq)]
pub struct AggregationMethod {
    pub summation: SummationSet,
    pub spec: Dissimilarity,
}

impl AggregationMethod {
    pub fn new(summation: SummationSet, spec: Dissimilarity) -> Result<Self> {
        let m = Self { summation, spec };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        let half = self.spec.is_half();
        match (self.summation, half) {
            (SummationSet::AsymmetricBasis, true) => Ok(()),
            (SummationSet::AsymmetricBasis, false) => Err(Error::Invalid(format!(
                "the asymmetric basis method needs half-f or half-fo, not {}",
                self.spec.name()
            ))),
            (_, true) => Err(Error::HalfDissimilarity(if self.spec == Dissimilarity::HalfF {
                "half-f"
            } else {
                "half-fo"
            })),
            (_, false) => Ok(()),
        }
    }
}

/// Terms `(event over the expert's atoms, Q, coefficient)` of one expert's
/// disagreement.
fn terms(report: &ExpertReport, summation: SummationSet) -> Result<Vec<(EventVector, f64, f64)>> {
    Ok(match summation {
        SummationSet::StatedEvents => {
            let b = &report.base;
            (0..b.n()).map(|i| (b.event(i), b.credences()[i], b.weights()[i])).collect()
        }
        SummationSet::FullI => {
            let s: Vec<&(EventVector, f64)> =
                report.inferable()?.iter().filter(|(e, _)| !e.is_zero() && !e.is_sure()).collect();
            let k = s.len() as f64;
            s.into_iter().map(|(e, q)| (e.clone(), *q, 1.0 / k)).collect()
        }
        SummationSet::BasisB => {
            let k = report.basis.len() as f64;
            report.basis.iter().map(|(e, q)| (e.clone(), *q, 1.0 / k)).collect()
        }
        SummationSet::AsymmetricBasis => {
            let events: Vec<EventVector> = report.basis.iter().map(|(e, _)| e.clone()).collect();
            let covers = exact_covers(&events, COVER_BUDGET)?;
            let mut count = vec![0usize; events.len()];
            for c in &covers {
                for &k in c {
                    count[k] += 1;
                }
            }
            let m: usize = count.iter().sum();
            report
                .basis
                .iter()
                .zip(&count)
                .filter(|(_, &c)| c > 0)
                .map(|((e, q), &c)| (e.clone(), *q, c as f64 / m as f64))
                .collect()
        }
    })
}

/// For each atom of `joint`, the index of the expert atom containing it.
fn atom_map(report: &ExpertReport, joint: &AtomSpace) -> Result<Vec<usize>> {
    let own = report.base.atoms();
    joint
        .atoms()
        .iter()
        .map(|a| {
            let outcome = a.outcomes.first().ok_or_else(|| Error::Invalid("atom without outcomes".into()))?;
            own.atom_of(outcome)
                .ok_or_else(|| Error::UnknownOutcome { event: format!("atom {}", a.label), outcome: outcome.clone() })
        })
        .collect()
}

fn lift(e: &EventVector, map: &[usize]) -> Vec<f64> {
    map.iter().map(|&k| if e.contains(k) { 1.0 } else { 0.0 }).collect()
}

/// `Dᵢ(π)`: disagreement between an expert and a distribution `pi` over the
/// atoms of `joint` (a refinement of the expert's atoms).
pub fn disagreement(report: &ExpertReport, joint: &AtomSpace, pi: &[f64], method: &AggregationMethod) -> Result<f64> {
    method.validate()?;
    if pi.len() != joint.len() {
        return Err(Error::Dimension(format!("{} probabilities for {} atoms", pi.len(), joint.len())));
    }
    let map = atom_map(report, joint)?;
    Ok(terms(report, method.summation)?
        .iter()
        .map(|(e, q, c)| c * method.spec.eval(linalg::dot(&lift(e, &map), pi).clamp(0.0, 1.0), *q))
        .sum())
}

/// The common refinement of the experts' atoms. All experts must describe
/// the same set of ground outcomes.
pub fn joint_atom_space(experts: &[ExpertReport]) -> Result<AtomSpace> {
    let first = experts.first().ok_or(Error::NoEvents)?;
    let ground: Vec<&str> = first.base.atoms().outcomes().collect();
    for (i, e) in experts.iter().enumerate().skip(1) {
        let mut theirs: Vec<&str> = e.base.atoms().outcomes().collect();
        let mut ours = ground.clone();
        theirs.sort_unstable();
        ours.sort_unstable();
        if theirs != ours {
            return Err(Error::Invalid(format!("expert {} describes different outcomes than expert 1", i + 1)));
        }
    }
    let mut patterns: Vec<Vec<usize>> = Vec::new();
    let mut atoms: Vec<Atom> = Vec::new();
    for o in ground {
        let pat: Vec<usize> = experts.iter().map(|e| e.base.atoms().atom_of(o).expect("checked above")).collect();
        match patterns.iter().position(|p| *p == pat) {
            Some(k) => atoms[k].outcomes.push(o.to_string()),
            None => {
                patterns.push(pat);
                atoms.push(Atom { label: String::new(), outcomes: vec![o.to_string()] });
            }
        }
    }
    for a in atoms.iter_mut() {
        a.label = a.outcomes.join("|");
    }
    AtomSpace::new(atoms)
}

#[derive(Clone, Debug)]
pub struct AggregationResult {
    pub atoms: AtomSpace,
    pub pi_star: ProbabilityVector,
    /// `Dᵢ(π*)` per expert.
    pub disagreements: Vec<f64>,
    pub total_loss: f64,
    pub converged: bool,
    pub iterations: usize,
}

impl AggregationResult {
    /// Merged probability of a set of ground outcomes.
    pub fn belief<S: AsRef<str>>(&self, outcomes: &[S]) -> Result<f64> {
        let mut hit = vec![false; self.atoms.len()];
        for o in outcomes {
            let j = self.atoms.atom_of(o.as_ref()).ok_or_else(|| Error::UnknownOutcome {
                event: "query".into(),
                outcome: o.as_ref().to_string(),
            })?;
            hit[j] = true;
        }
        Ok(EventVector::new(hit).prob(self.pi_star.as_slice()))
    }

    /// Merged probability of an event over the joint atoms.
    pub fn event_belief(&self, event: &EventVector) -> f64 {
        event.prob(self.pi_star.as_slice())
    }
}

/// Minimises `Σᵢ Dᵢ(π)` over distributions on the joint atom space.
pub fn aggregate(experts: &[ExpertReport], method: &AggregationMethod, config: &SolverConfig) -> Result<AggregationResult> {
    method.validate()?;
    let atoms = joint_atom_space(experts)?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut q = Vec::new();
    let mut coef = Vec::new();
    for e in experts {
        let map = atom_map(e, &atoms)?;
        for (ev, qi, c) in terms(e, method.summation)? {
            rows.push(lift(&ev, &map));
            q.push(qi);
            coef.push(c);
        }
    }
    let matrix = Matrix::from_rows(&rows);
    let objective = LossObjective { matrix: &matrix, credences: &q, weights: &coef, spec: &method.spec };
    let n_atoms = atoms.len();
    let allowed = allowed_columns(&matrix, &q);
    let mut starts = Vec::new();
    if !allowed.is_empty() {
        let mut s = vec![0.0; n_atoms];
        for &j in &allowed {
            s[j] = 1.0 / allowed.len() as f64;
        }
        starts.push(s);
    }
    let out = solver::minimize_from(&objective, n_atoms, None, config, &starts)?;
    let disagreements = experts
        .iter()
        .map(|e| disagreement(e, &atoms, out.argmin.as_slice(), method))
        .collect::<Result<Vec<_>>>()?;
    Ok(AggregationResult {
        atoms,
        pi_star: out.argmin,
        disagreements,
        total_loss: out.objective_value,
        converged: out.converged,
        iterations: out.iterations,
    })
}
