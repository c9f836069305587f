//! Convex minimisation over the probability simplex.
//!
//! Projected gradient descent with an exact sort-based Euclidean projection,
//! Barzilai-Borwein trial steps and Armijo backtracking. Extra linear
//! equalities `Aπ = b` are handled by projecting with Dykstra's algorithm
//! onto `{π ≥ 0} ∩ {Aπ = b, Σπ = 1}`.

use crate::credence::ProbabilityVector;
use crate::error::{Error, Result};
use crate::linalg::{self, Matrix};

/// A convex function of `π` with a gradient oracle. `value` may return
/// `+∞`; `gradient` is only called where `value` is finite.
pub trait Objective {
    fn value(&self, pi: &[f64]) -> f64;
    fn gradient(&self, pi: &[f64], grad: &mut [f64]);
}

/// An [`Objective`] built from two closures.
pub struct FnObjective<V, G> {
    pub value: V,
    pub gradient: G,
}

impl<V, G> Objective for FnObjective<V, G>
where
    V: Fn(&[f64]) -> f64,
    G: Fn(&[f64], &mut [f64]),
{
    fn value(&self, pi: &[f64]) -> f64 {
        (self.value)(pi)
    }

    fn gradient(&self, pi: &[f64], grad: &mut [f64]) {
        (self.gradient)(pi, grad)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StepRule {
    BacktrackingLineSearch,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SolverConfig {
    /// Bound on the unit-step gradient mapping at a declared optimum.
    pub tolerance: f64,
    pub max_iterations: usize,
    pub step_rule: StepRule,
    /// Extra runs from deterministic non-uniform starts.
    pub restarts: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self { tolerance: 1e-9, max_iterations: 100_000, step_rule: StepRule::BacktrackingLineSearch, restarts: 0 }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tolerance > 0.0) {
            return Err(Error::Invalid(format!("tolerance {} must be positive", self.tolerance)));
        }
        if self.max_iterations == 0 {
            return Err(Error::Invalid("max_iterations must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct SolveOutcome {
    pub argmin: ProbabilityVector,
    pub objective_value: f64,
    pub converged: bool,
    pub iterations: usize,
    /// Frank-Wolfe duality gap `∇f·π - minⱼ ∇f_j` at the returned point
    /// (upper bound on suboptimality when there are no extra equalities).
    pub gap_estimate: f64,
    /// Objective after each accepted step, starting with the initial value.
    pub history: Vec<f64>,
}

/// Extra constraints `Aπ = b` on top of the simplex.
#[derive(Clone, Debug)]
pub struct LinearEqualities {
    pub a: Matrix,
    pub b: Vec<f64>,
}

/// Euclidean projection onto `{x ≥ 0, Σx = 1}`.
pub fn project_simplex(v: &[f64]) -> Vec<f64> {
    let mut u = v.to_vec();
    u.sort_unstable_by(|a, b| b.total_cmp(a));
    let mut cum = 0.0;
    let mut theta = 0.0;
    for (k, &x) in u.iter().enumerate() {
        cum += x;
        let t = (cum - 1.0) / (k + 1) as f64;
        if x - t > 0.0 {
            theta = t;
        }
    }
    v.iter().map(|&x| (x - theta).max(0.0)).collect()
}

/// Projection onto the simplex intersected with an affine subspace.
struct AffineSimplex {
    /// Independent rows of `[A; 1ᵀ]`.
    rows: Matrix,
    rhs: Vec<f64>,
    /// `(Ā Āᵀ)⁻¹`, row by row.
    gram_inv: Vec<Vec<f64>>,
}

const DYKSTRA_MAX: usize = 20_000;
const DYKSTRA_TOL: f64 = 1e-13;

impl AffineSimplex {
    fn new(eq: &LinearEqualities, n: usize) -> Result<Self> {
        if eq.a.ncols() != n || eq.a.nrows() != eq.b.len() {
            return Err(Error::Dimension(format!(
                "equality system is {}x{} with {} right-hand sides for {n} atoms",
                eq.a.nrows(),
                eq.a.ncols(),
                eq.b.len()
            )));
        }
        let mut all: Vec<Vec<f64>> = vec![vec![1.0; n]];
        let mut rhs_all = vec![1.0];
        for i in 0..eq.a.nrows() {
            all.push(eq.a.row(i).to_vec());
            rhs_all.push(eq.b[i]);
        }
        let mut rows: Vec<Vec<f64>> = Vec::new();
        let mut rhs = Vec::new();
        for (r, &b) in all.iter().zip(&rhs_all) {
            let consistent = if rows.is_empty() {
                None
            } else {
                linalg::row_combination(&Matrix::from_rows(&rows), r)
            };
            match consistent {
                None => {
                    rows.push(r.clone());
                    rhs.push(b);
                }
                Some(c) => {
                    if (linalg::dot(&c, &rhs) - b).abs() > 1e-9 * (1.0 + b.abs()) {
                        return Err(Error::Infeasible("equalities are linearly inconsistent".into()));
                    }
                }
            }
        }
        let rows = Matrix::from_rows(&rows);
        let m = rows.nrows();
        let mut gram = Matrix::zeros(m, m);
        for i in 0..m {
            for j in 0..m {
                gram[(i, j)] = linalg::dot(rows.row(i), rows.row(j));
            }
        }
        let mut gram_inv = Vec::with_capacity(m);
        for k in 0..m {
            let mut e = vec![0.0; m];
            e[k] = 1.0;
            gram_inv.push(
                linalg::row_combination(&gram, &e)
                    .ok_or_else(|| Error::Infeasible("singular equality system".into()))?,
            );
        }
        Ok(Self { rows, rhs, gram_inv })
    }

    fn residual(&self, x: &[f64]) -> f64 {
        self.rows.mul_vec(x).iter().zip(&self.rhs).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()))
    }

    fn project_affine(&self, x: &[f64]) -> Vec<f64> {
        let r: Vec<f64> = self.rows.mul_vec(x).iter().zip(&self.rhs).map(|(a, b)| a - b).collect();
        let lambda: Vec<f64> = self.gram_inv.iter().map(|g| linalg::dot(g, &r)).collect();
        let corr = self.rows.tr_mul_vec(&lambda);
        x.iter().zip(&corr).map(|(a, c)| a - c).collect()
    }

    /// Dykstra's alternating projection between the affine set and the
    /// nonnegative orthant.
    fn project(&self, v: &[f64]) -> Vec<f64> {
        let n = v.len();
        let mut x = v.to_vec();
        let mut incr = vec![0.0; n];
        for _ in 0..DYKSTRA_MAX {
            let y = self.project_affine(&x);
            let shifted: Vec<f64> = y.iter().zip(&incr).map(|(a, b)| a + b).collect();
            let next: Vec<f64> = shifted.iter().map(|&s| s.max(0.0)).collect();
            incr = shifted.iter().zip(&next).map(|(s, x)| s - x).collect();
            let moved = x.iter().zip(&next).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
            x = next;
            if moved <= DYKSTRA_TOL && self.residual(&x) <= 1e-11 {
                break;
            }
        }
        x
    }

    /// A feasible point, or an error when `{π ≥ 0, Āπ = b̄}` is empty.
    fn feasible_point(&self) -> Result<Vec<f64>> {
        let x = linalg::nnls(&self.rows, &self.rhs);
        if self.residual(&x) > 1e-8 {
            return Err(Error::Infeasible("no probability vector satisfies the equalities".into()));
        }
        Ok(self.project(&x))
    }
}

enum Feasible {
    Simplex,
    Affine(AffineSimplex),
}

impl Feasible {
    fn project(&self, v: &[f64]) -> Vec<f64> {
        match self {
            Self::Simplex => project_simplex(v),
            Self::Affine(a) => a.project(v),
        }
    }
}

/// Minimises `objective` over the simplex (and `equalities`, if given),
/// starting from the uniform distribution or, under extra equalities, from a
/// feasible point found by NNLS.
pub fn minimize_on_simplex<O: Objective + ?Sized>(
    objective: &O,
    n: usize,
    equalities: Option<&LinearEqualities>,
    config: &SolverConfig,
) -> Result<SolveOutcome> {
    minimize_from(objective, n, equalities, config, &[])
}

/// As [`minimize_on_simplex`], trying `fallback_starts` in order whenever
/// the default start has an infinite objective.
pub fn minimize_from<O: Objective + ?Sized>(
    objective: &O,
    n: usize,
    equalities: Option<&LinearEqualities>,
    config: &SolverConfig,
    fallback_starts: &[Vec<f64>],
) -> Result<SolveOutcome> {
    config.validate()?;
    if n == 0 {
        return Err(Error::Invalid("cannot optimise over an empty simplex".into()));
    }
    let feasible = match equalities {
        None => Feasible::Simplex,
        Some(eq) => Feasible::Affine(AffineSimplex::new(eq, n)?),
    };
    let default_start = match &feasible {
        Feasible::Simplex => vec![1.0 / n as f64; n],
        Feasible::Affine(a) => {
            let uniform = vec![1.0 / n as f64; n];
            if a.residual(&uniform) <= 1e-12 {
                uniform
            } else {
                a.feasible_point()?
            }
        }
    };
    let mut starts = vec![default_start];
    starts.extend(fallback_starts.iter().map(|s| feasible.project(s)));
    let Some(start) = starts.into_iter().find(|s| objective.value(s).is_finite()) else {
        let pi = ProbabilityVector::uniform(n);
        return Ok(SolveOutcome {
            argmin: pi,
            objective_value: f64::INFINITY,
            converged: false,
            iterations: 0,
            gap_estimate: f64::INFINITY,
            history: vec![f64::INFINITY],
        });
    };
    let mut best = descend(objective, &feasible, start.clone(), config);
    for r in 0..config.restarts {
        // pull the start towards one vertex, then back into the feasible set
        let k = r % n;
        let mut s: Vec<f64> = start.iter().map(|&x| 0.5 * x).collect();
        s[k] += 0.5;
        let s = feasible.project(&s);
        if !objective.value(&s).is_finite() {
            continue;
        }
        let other = descend(objective, &feasible, s, config);
        let agree = (other.objective_value - best.objective_value).abs()
            <= 10.0 * config.tolerance * (1.0 + best.objective_value.abs());
        let converged = best.converged && other.converged && agree;
        let iterations = best.iterations + other.iterations;
        if other.objective_value < best.objective_value {
            best = other;
        }
        best.converged = converged;
        best.iterations = iterations;
    }
    Ok(best)
}

/// One descent over the simplex from `start`, projected onto the simplex
/// first. No restarts.
pub fn minimize_at<O: Objective + ?Sized>(objective: &O, start: &[f64], config: &SolverConfig) -> Result<SolveOutcome> {
    config.validate()?;
    if start.is_empty() {
        return Err(Error::Invalid("cannot optimise over an empty simplex".into()));
    }
    let start = project_simplex(start);
    if !objective.value(&start).is_finite() {
        return Err(Error::Infeasible("objective is infinite at the start".into()));
    }
    Ok(descend(objective, &Feasible::Simplex, start, config))
}

const ARMIJO: f64 = 1e-4;
const MAX_HALVINGS: usize = 80;

/// `g·(y - x)` with `g` shifted by its mean over the coordinates where `x`
/// or `y` is positive. Feasible directions sum to zero, so the shift is exact
/// in theory; centering on the moving coordinates keeps rounding in `Σy`
/// from swamping the product.
fn directional(g: &[f64], y: &[f64], x: &[f64]) -> f64 {
    let active = |i: usize| x[i] > 0.0 || y[i] > 0.0;
    let (sum, count) = (0..g.len()).filter(|&i| active(i)).fold((0.0, 0usize), |(s, c), i| (s + g[i], c + 1));
    let mean = if count > 0 { sum / count as f64 } else { 0.0 };
    (0..g.len()).filter(|&i| active(i)).map(|i| (g[i] - mean) * (y[i] - x[i])).sum()
}

/// `g` shifted by its mean over the support of `x`. Both feasible sets are
/// invariant under adding a constant to every coordinate, and the shift keeps
/// large common gradient components from swamping the step in rounding.
fn centered(g: &[f64], x: &[f64]) -> Vec<f64> {
    let (sum, count) = g.iter().zip(x).filter(|(_, &xi)| xi > 0.0).fold((0.0, 0usize), |(s, c), (gi, _)| (s + gi, c + 1));
    let shift = if count > 0 { sum / count as f64 } else { 0.0 };
    g.iter().map(|gi| gi - shift).collect()
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0f64, |m, (x, y)| m.max((x - y).abs()))
}

fn descend<O: Objective + ?Sized>(objective: &O, feasible: &Feasible, start: Vec<f64>, config: &SolverConfig) -> SolveOutcome {
    let n = start.len();
    let mut x = start;
    let mut fx = objective.value(&x);
    let mut g = vec![0.0; n];
    objective.gradient(&x, &mut g);
    let mut history = vec![fx];
    let mut prev: Option<(Vec<f64>, Vec<f64>)> = None;
    let mut converged = false;
    let mut iterations = 0;
    let mut step = 1.0;
    while iterations < config.max_iterations {
        let d = centered(&g, &x);
        let trial: Vec<f64> = x.iter().zip(&d).map(|(a, b)| a - b).collect();
        if max_abs_diff(&x, &feasible.project(&trial)) <= config.tolerance {
            converged = true;
            break;
        }
        iterations += 1;
        if let Some((px, pg)) = &prev {
            let s: Vec<f64> = x.iter().zip(px).map(|(a, b)| a - b).collect();
            let y: Vec<f64> = g.iter().zip(pg).map(|(a, b)| a - b).collect();
            let sy = linalg::dot(&s, &y);
            if sy > 0.0 {
                step = (linalg::dot(&s, &s) / sy).clamp(1e-12, 1e12);
            }
        } else {
            let dmax = d.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            step = if dmax > 0.0 { 1.0 / dmax } else { 1.0 };
        }
        let mut accepted = None;
        for _ in 0..MAX_HALVINGS {
            let trial: Vec<f64> = x.iter().zip(&d).map(|(a, b)| a - step * b).collect();
            let y = feasible.project(&trial);
            let fy = objective.value(&y);
            if fy.is_finite() {
                let decrease = directional(&g, &y, &x);
                let mut gy = vec![0.0; n];
                objective.gradient(&y, &mut gy);
                // convexity: ∇f(y)·(y - x) ≤ 0 implies f(y) ≤ f(x), robust
                // where objective values are dominated by rounding
                let certified = gy.iter().all(|v| v.is_finite()) && directional(&gy, &y, &x) <= 0.0;
                if fy <= fx + ARMIJO * decrease || certified {
                    accepted = Some((y, fy.min(fx), gy));
                    break;
                }
            }
            step *= 0.5;
        }
        let moved = accepted.as_ref().is_some_and(|(y, _, _)| max_abs_diff(&x, y) > 0.0);
        if !moved {
            // a collapsed BB step gets one retry from the gradient scale
            if prev.is_none() {
                break;
            }
            prev = None;
            continue;
        }
        let (y, fy, gy) = accepted.expect("moved implies accepted");
        prev = Some((std::mem::replace(&mut x, y), std::mem::replace(&mut g, gy)));
        fx = fy;
        history.push(fx);
    }
    if !converged {
        let trial: Vec<f64> = x.iter().zip(centered(&g, &x)).map(|(a, b)| a - b).collect();
        converged = max_abs_diff(&x, &feasible.project(&trial)) <= config.tolerance;
    }
    let gmin = g.iter().cloned().fold(f64::INFINITY, f64::min);
    let gap_estimate = (linalg::dot(&g, &x) - gmin).max(0.0);
    SolveOutcome {
        argmin: ProbabilityVector::from_numeric(x),
        objective_value: fx,
        converged,
        iterations,
        gap_estimate,
        history,
    }
}

/// `Σ π ln π`, the negative entropy, with gradient clipped away from `π = 0`.
pub struct NegativeEntropy;

impl Objective for NegativeEntropy {
    fn value(&self, pi: &[f64]) -> f64 {
        pi.iter().map(|&p| if p > 0.0 { p * p.ln() } else { 0.0 }).sum()
    }

    fn gradient(&self, pi: &[f64], grad: &mut [f64]) {
        for (g, &p) in grad.iter_mut().zip(pi) {
            *g = p.max(1e-300).ln() + 1.0;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn simplex_projection() {
        assert_eq!(project_simplex(&[0.2, 0.3, 0.5]), vec![0.2, 0.3, 0.5]);
        assert_eq!(project_simplex(&[2.0, 0.0]), vec![1.0, 0.0]);
        let p = project_simplex(&[0.5, 0.5, 0.5, -3.0]);
        assert!((p[0] - 1.0 / 3.0).abs() < 1e-15 && p[3] == 0.0);
    }

    #[test]
    fn quadratic_to_uniform() {
        let n = 5;
        let obj = FnObjective {
            value: |x: &[f64]| x.iter().map(|v| (v - 0.2) * (v - 0.2)).sum::<f64>(),
            gradient: |x: &[f64], g: &mut [f64]| {
                for (gi, v) in g.iter_mut().zip(x) {
                    *gi = 2.0 * (v - 0.2);
                }
            },
        };
        let out = minimize_on_simplex(&obj, n, None, &SolverConfig::default()).unwrap();
        assert!(out.converged);
        assert!(out.argmin.as_slice().iter().all(|v| (v - 0.2).abs() < 1e-12));
    }

    #[test]
    fn max_entropy_is_uniform() {
        let out = minimize_on_simplex(&NegativeEntropy, 6, None, &SolverConfig::default()).unwrap();
        assert!(out.converged);
        assert!((out.objective_value + 6f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn off_centre_quadratic_hits_boundary() {
        let target = [0.9, 0.6, -0.2];
        let obj = FnObjective {
            value: |x: &[f64]| x.iter().zip(&target).map(|(v, t)| (v - t) * (v - t)).sum::<f64>(),
            gradient: |x: &[f64], g: &mut [f64]| {
                for ((gi, v), t) in g.iter_mut().zip(x).zip(&target) {
                    *gi = 2.0 * (v - t);
                }
            },
        };
        let cfg = SolverConfig { restarts: 3, ..Default::default() };
        let out = minimize_on_simplex(&obj, 3, None, &cfg).unwrap();
        assert!(out.converged);
        let want = project_simplex(&target);
        assert!(max_abs_diff(out.argmin.as_slice(), &want) < 1e-9);
        assert!(out.history.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn entropy_under_constraint() {
        // π₁ + π₂ = 0.5 over four atoms: uniform is optimal
        let eq = LinearEqualities { a: Matrix::from_rows(&[[1.0, 1.0, 0.0, 0.0]]), b: vec![0.5] };
        let out = minimize_on_simplex(&NegativeEntropy, 4, Some(&eq), &SolverConfig::default()).unwrap();
        assert!(out.converged);
        assert!((out.objective_value + 4f64.ln()).abs() < 1e-10);

        let eq = LinearEqualities { a: Matrix::from_rows(&[[1.0, 0.0, 0.0]]), b: vec![0.7] };
        let out = minimize_on_simplex(&NegativeEntropy, 3, Some(&eq), &SolverConfig::default()).unwrap();
        let pi = out.argmin.as_slice();
        assert!((pi[0] - 0.7).abs() < 1e-10 && (pi[1] - 0.15).abs() < 1e-9);
    }

    #[test]
    fn infeasible_equalities() {
        let eq = LinearEqualities { a: Matrix::from_rows(&[[1.0, 0.0]]), b: vec![1.5] };
        let err = minimize_on_simplex(&NegativeEntropy, 2, Some(&eq), &SolverConfig::default()).unwrap_err();
        assert!(matches!(err, Error::Infeasible(_)));
    }

    #[test]
    fn infinite_everywhere_is_reported() {
        let obj = FnObjective { value: |_: &[f64]| f64::INFINITY, gradient: |_: &[f64], _: &mut [f64]| {} };
        let out = minimize_on_simplex(&obj, 3, None, &SolverConfig::default()).unwrap();
        assert!(!out.converged);
        assert_eq!(out.objective_value, f64::INFINITY);
    }
}
