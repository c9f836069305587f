use std::fmt::Write as _;
use std::path::Path;

use coherence::aggregation::AggregationMethod;
use coherence::ngram::{contexts, TrigramCounts};
use coherence::projection::closed_form_complement_pair;
use coherence::{
    aggregate, dutch_book, enumerate_facets, evaluate_accuracy, incoherence_term, load_corpus, predict_masked,
    probe_loss, project, CredenceBase, Dissimilarity, Error, EvalOptions,
};
use serde_json::{json, Value};

use crate::args::{Cli, Command, GridValue, Method, Scenario};
use crate::problem::Problem;

#[derive(Debug)]
pub enum CliError {
    /// Bad input; exit status 2.
    Validation(String),
    /// The solver stopped early; exit status 3. `output` is still printed.
    NoConvergence { output: String, message: String },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) => 2,
            CliError::NoConvergence { .. } => 3,
        }
    }
}

type Outcome = Result<String, CliError>;

fn invalid(e: impl std::fmt::Display) -> CliError {
    CliError::Validation(e.to_string())
}

fn core_error(e: Error) -> CliError {
    match e {
        Error::NoConvergence(m) => CliError::NoConvergence { output: String::new(), message: m },
        other => invalid(other),
    }
}

fn load(path: &Path) -> Result<Problem, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| invalid(format!("{}: {e}", path.display())))?;
    Problem::parse(&text).map_err(|e| invalid(format!("{}:{}: {}", path.display(), e.line, e.message)))
}

fn located<T>(path: &Path, r: Result<T, crate::problem::Located>) -> Result<T, CliError> {
    r.map_err(|e| invalid(format!("{}:{}: {}", path.display(), e.line, e.message)))
}

fn render(v: &Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("json values serialize");
    s.push('\n');
    s
}

fn finish(v: Value, converged: bool, what: &str) -> Outcome {
    let output = render(&v);
    if converged {
        Ok(output)
    } else {
        Err(CliError::NoConvergence { output, message: format!("{what} did not converge") })
    }
}

fn labels(base: &CredenceBase) -> Vec<String> {
    base.atoms().labels().map(str::to_string).collect()
}

pub fn run(cli: &Cli) -> Outcome {
    match &cli.command {
        Command::Check { path, tol } => check(path, *tol),
        Command::Project { path, loss, solver, clamp } => project_cmd(path, loss, &solver.config(), *clamp),
        Command::Facets { path } => facets(path),
        Command::Dutchbook { path } => dutchbook(path),
        Command::Aggregate { path, method, loss, solver } => {
            let spec = loss.clone().unwrap_or_else(|| method.default_loss());
            aggregate_cmd(path, *method, spec, &solver.config())
        }
        Command::ProbeLoss { path, decisiveness, loss, mix_weight, solver } => {
            let problem = load(path)?;
            let pc = located(path, problem.probe())?;
            let config = solver.config();
            let incoherence = incoherence_term(&pc, loss, &config).map_err(core_error)?;
            let total = probe_loss(&pc, loss, decisiveness, *mix_weight, &config).map_err(core_error)?;
            Ok(render(&json!({
                "loss": loss.name(),
                "mix_weight": mix_weight,
                "incoherence": incoherence,
                "total": total,
            })))
        }
        Command::Grid { scenario, step, value } => grid(*scenario, *step, *value),
        Command::Masked { corpus, word, mask, evaluate, method, loss, mask_position, word_length, holdout, solver } => {
            let spec = loss.clone().unwrap_or_else(|| method.default_loss());
            let agg = AggregationMethod::new(method.summation(), spec).map_err(invalid)?;
            let corpus = load_corpus(corpus).map_err(|e| invalid(format!("{}: {e}", corpus.display())))?;
            if corpus.dropped() > 0 {
                eprintln!("warning: skipped {} corpus line(s) that are not lowercase words", corpus.dropped());
            }
            let config = solver.config();
            if *evaluate {
                let options = EvalOptions { word_length: *word_length, mask_position: *mask_position, holdout: *holdout };
                let acc = evaluate_accuracy(&corpus, &agg, &config, options).map_err(core_error)?;
                return Ok(render(&json!({
                    "method": method.name(),
                    "loss": agg.spec.name(),
                    "evaluated": acc.evaluated,
                    "correct": acc.correct,
                    "skipped": acc.skipped,
                    "top1_accuracy": acc.top1_accuracy,
                })));
            }
            let word = word.as_deref().expect("clap requires --word without --evaluate");
            let mask = mask.expect("clap ties --mask to --word");
            let (prefix, _, suffix) = contexts(word, mask).map_err(invalid)?;
            let exclude = holdout.then_some(word);
            let (h1, h2) = TrigramCounts::new(&corpus).heuristics(prefix, suffix, exclude).map_err(invalid)?;
            let pred = predict_masked(&h1, &h2, &agg, &config).map_err(core_error)?;
            let mut out = String::from("letter,q1,q2,p_star\n");
            for (i, l) in pred.letters.iter().enumerate() {
                writeln!(out, "{l},{},{},{}", pred.q1[i], pred.q2[i], pred.p_star[i]).expect("string write");
            }
            Ok(out)
        }
    }
}

fn check(path: &Path, tol: f64) -> Outcome {
    if !(tol > 0.0) {
        return Err(invalid(format!("tolerance {tol} must be positive")));
    }
    let problem = load(path)?;
    let base = located(path, problem.base())?;
    let verdict = base.coherence_check(tol);
    Ok(render(&json!({
        "verdict": if verdict.coherent { "coherent" } else { "incoherent" },
        "residual": verdict.residual,
        "atoms": labels(&base),
        "witness": verdict.witness.map(|w| w.into_vec()),
    })))
}

fn project_cmd(path: &Path, spec: &Dissimilarity, config: &coherence::SolverConfig, clamp: Option<f64>) -> Outcome {
    let problem = load(path)?;
    let mut base = located(path, problem.base())?;
    if let Some(eps) = clamp {
        if !(eps > 0.0 && eps < 0.5) {
            return Err(invalid(format!("clamp {eps} must lie in (0, 0.5)")));
        }
        let q: Vec<f64> = base.credences().iter().map(|q| q.clamp(eps, 1.0 - eps)).collect();
        base = base.with_credences(&q).map_err(invalid)?;
    }
    let r = project(&base, spec, config).map_err(core_error)?;
    finish(
        json!({
            "loss": spec.name(),
            "events": base.names(),
            "p_star": r.p_star,
            "atoms": labels(&base),
            "pi_star": r.pi_star.as_slice(),
            "incoherence": r.incoherence,
            "converged": r.converged,
            "iterations": r.iterations,
            "gap_estimate": r.gap_estimate,
        }),
        r.converged,
        "projection",
    )
}

fn facets(path: &Path) -> Outcome {
    let problem = load(path)?;
    let base = located(path, problem.base())?;
    let facets = enumerate_facets(&base).map_err(invalid)?;
    let list: Vec<Value> =
        facets.iter().map(|f| json!({ "a": f.a, "c": f.c, "payout": f.payout.as_slice() })).collect();
    Ok(render(&json!({ "events": base.names(), "atoms": labels(&base), "facets": list })))
}

fn dutchbook(path: &Path) -> Outcome {
    let problem = load(path)?;
    let base = located(path, problem.base())?;
    let v = match dutch_book(&base) {
        None => json!({ "verdict": "coherent" }),
        Some(c) => {
            let mut events: Vec<String> = base.names().to_vec();
            events.push("sure".into());
            json!({
                "verdict": "incoherent",
                "events": events,
                "stakes": c.a,
                "atoms": labels(&base),
                "payouts": c.payouts,
                "cost": c.cost,
            })
        }
    };
    Ok(render(&v))
}

fn aggregate_cmd(path: &Path, method: Method, spec: Dissimilarity, config: &coherence::SolverConfig) -> Outcome {
    let problem = load(path)?;
    let experts = located(path, problem.experts())?;
    let agg = AggregationMethod::new(method.summation(), spec).map_err(invalid)?;
    let r = aggregate(&experts, &agg, config).map_err(core_error)?;
    let mut per_expert = Vec::new();
    for (e, d) in experts.iter().zip(&r.disagreements) {
        let base = e.base();
        let mut beliefs = Vec::new();
        for i in 0..base.n() {
            let merged = r.belief(&base.event_outcomes(i)).map_err(invalid)?;
            beliefs.push(json!({ "name": base.names()[i], "stated": base.credences()[i], "merged": merged }));
        }
        per_expert.push(json!({ "disagreement": d, "beliefs": beliefs }));
    }
    let mut queries = Vec::new();
    for (name, outcomes) in problem.queries() {
        let value = r.belief(&outcomes).map_err(|e| invalid(format!("query `{name}`: {e}")))?;
        queries.push(json!({ "name": name, "value": value }));
    }
    finish(
        json!({
            "method": method.name(),
            "loss": agg.spec.name(),
            "atoms": r.atoms.labels().collect::<Vec<_>>(),
            "pi": r.pi_star.as_slice(),
            "queries": queries,
            "experts": per_expert,
            "total_loss": r.total_loss,
            "converged": r.converged,
            "iterations": r.iterations,
        }),
        r.converged,
        "aggregation",
    )
}

/// `(p*_E, L*)` for one grid point. Boundary points, where the closed form
/// is undefined, go through the general projection.
fn pair_point(q1: f64, q2: f64, spec: &Dissimilarity) -> (f64, f64) {
    if let Ok(v) = closed_form_complement_pair(q1, q2, spec) {
        return v;
    }
    let base = CredenceBase::from_matrix(&[[1.0, 0.0], [0.0, 1.0]], &[q1, q2], None).expect("grid credences lie in [0, 1]");
    match project(&base, spec, &coherence::SolverConfig::default()) {
        Ok(r) => (r.p_star[0], r.incoherence),
        Err(_) => (f64::NAN, f64::INFINITY),
    }
}

fn grid(scenario: Scenario, step: f64, value: GridValue) -> Outcome {
    let k = (1.0 / step).round();
    if !(step > 0.0 && step <= 1.0) || (k * step - 1.0).abs() > 1e-9 || k > 10_000.0 {
        return Err(invalid(format!("step {step} must divide 1 into at most 10000 parts")));
    }
    let k = k as usize;
    let spec = match scenario {
        Scenario::PairF => Dissimilarity::BinaryKl,
        Scenario::PairFo => Dissimilarity::TransposedKl,
    };
    let mut out = String::from("q1,q2,value\n");
    for i in 0..=k {
        for j in 0..=k {
            let (q1, q2) = (i as f64 / k as f64, j as f64 / k as f64);
            let (p, l) = pair_point(q1, q2, &spec);
            let v = match value {
                GridValue::Loss => l,
                GridValue::P => p,
            };
            writeln!(out, "{q1},{q2},{v}").expect("string write");
        }
    }
    Ok(out)
}
