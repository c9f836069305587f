//! Measuring and repairing incoherent probability estimates.

pub mod aggregation;
pub mod credence;
pub mod dissimilarity;
pub mod elicitation;
pub mod error;
pub mod linalg;
pub mod ngram;
pub mod polytope;
pub mod projection;
pub mod solver;

pub use credence::{
    Atom, AtomSpace, CoherenceVerdict, Consistency, CredenceBase, EventVector, NamedEvent, ProbabilityVector,
    Reduction,
};
pub use dissimilarity::{Dissimilarity, DissimilaritySpec, ScoreReport, ScoringRule};
pub use error::{Error, Result};
pub use polytope::{dutch_book, enumerate_facets, BetCertificate, FacetInequality, PayoutVector};
pub use projection::{project, ProjectionResult};
pub use solver::{SolveOutcome, SolverConfig};
pub use aggregation::{aggregate, AggregationMethod, AggregationResult, ExpertReport, SummationSet};
pub use elicitation::{decisiveness_term, incoherence_term, probe_loss, DecisivenessKind, Direction, ProbeCredences};
pub use ngram::{build_heuristics, evaluate_accuracy, load_corpus, predict_masked, Accuracy, Corpus, EvalOptions, MaskedPrediction, NgramHeuristic};
