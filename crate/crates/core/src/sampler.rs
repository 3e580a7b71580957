//! The top-level sampling loop: stochastic CDCL(T) and CCSS alternate, each
//! guiding the other, and every model is mapped back to the original
//! variables, verified on the syntax tree and deduplicated.

use std::collections::HashSet;
use std::thread;
use std::time::{Duration, Instant};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::ccss::{Ccss, CcssError, SearchParams};
use crate::cdclt::{self, fix_partial_assignment, CdclError, CdclLimits, SolveOutcome, UnderApproximation};
use crate::model::Model;
use crate::preprocess::{equation_solving, model_convert, PreprocessError};
use crate::smtlib::{Ast, Problem};

#[derive(Debug, thiserror::Error)]
pub enum SamplerError {
    #[error("unsat")]
    UnsatFormula,
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("sample failed verification against the input formula")]
    InvalidSample,
    #[error(transparent)]
    Preprocess(#[from] PreprocessError),
    #[error(transparent)]
    Cdcl(#[from] CdclError),
    #[error(transparent)]
    Ccss(#[from] CcssError),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunConfig {
    /// Number of distinct samples wanted.
    pub k: usize,
    pub time_limit: Duration,
    pub seed: u64,
    pub fix_probability: f64,
    pub search: SearchParams,
    pub cdcl: CdclLimits,
    /// Loop iterations allowed instead of the wall clock. When set, the
    /// time limit is ignored and runs are reproducible.
    pub iteration_budget: Option<u64>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            k: 100,
            time_limit: Duration::from_secs(900),
            seed: 0,
            fix_probability: 0.5,
            search: SearchParams::default(),
            cdcl: CdclLimits::default(),
            iteration_budget: None,
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<(), SamplerError> {
        if self.k == 0 {
            return Err(SamplerError::InvalidConfig("k must be at least 1".into()));
        }
        if self.iteration_budget.is_none() && self.time_limit.is_zero() {
            return Err(SamplerError::InvalidConfig("time limit must be positive".into()));
        }
        if !(0.0..=1.0).contains(&self.fix_probability) {
            return Err(SamplerError::InvalidConfig("fix probability must lie in [0, 1]".into()));
        }
        if self.search.window == 0 {
            return Err(SamplerError::InvalidConfig("window must be positive".into()));
        }
        Ok(())
    }
}

/// Distinct verified models over the declared variables, in the order they
/// were found.
#[derive(Debug, Clone, Default)]
pub struct SampleSet {
    samples: Vec<Model>,
    seen: HashSet<Model>,
}

impl SampleSet {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds `m` unless an identical sample is already present.
    pub fn insert(&mut self, m: Model) -> bool {
        if self.seen.contains(&m) {
            return false;
        }
        self.seen.insert(m.clone());
        self.samples.push(m);
        true
    }

    pub fn contains(&self, m: &Model) -> bool {
        self.seen.contains(m)
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn samples(&self) -> &[Model] {
        &self.samples
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Model> {
        self.samples.iter()
    }

    pub fn into_samples(self) -> Vec<Model> {
        self.samples
    }
}

impl<'a> IntoIterator for &'a SampleSet {
    type Item = &'a Model;
    type IntoIter = std::slice::Iter<'a, Model>;

    fn into_iter(self) -> Self::IntoIter {
        self.samples.iter()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    TargetReached,
    TimeLimit,
    IterationBudget,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RunStats {
    pub iterations: u64,
    pub cdclt_models: u64,
    pub ccss_models: u64,
    pub duplicates: u64,
    pub stop: StopReason,
}

#[derive(Debug, Clone)]
pub struct SampleRun {
    pub samples: SampleSet,
    pub stats: RunStats,
}

/// Evaluates the asserted formulas of `ast` under `m`.
pub fn verify_sample(m: &Model, ast: &Ast) -> bool {
    m.int_values.len() == ast.int_vars().len() && m.bool_values.len() == ast.bool_vars().len() && ast.satisfied_by(m)
}

pub fn highdiv_sample(problem: &Problem, cfg: &RunConfig) -> Result<SampleSet, SamplerError> {
    run_instance(problem, cfg, 0).map(|r| r.samples)
}

/// One seeded sampling run. `instance` selects an independent random stream
/// so parallel runs with the same seed do not repeat each other.
pub fn run_instance(problem: &Problem, cfg: &RunConfig, instance: u64) -> Result<SampleRun, SamplerError> {
    cfg.validate()?;
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(instance);

    let (f_hat, subst) = match equation_solving(&problem.cnf) {
        Ok(r) => r,
        Err(PreprocessError::InconsistentEquality(_)) => return Err(SamplerError::UnsatFormula),
        Err(e) => return Err(e.into()),
    };
    let (ni, nb) = (problem.num_declared_ints(), problem.num_declared_bools());
    let mut samples = SampleSet::new();
    let mut duplicates = 0u64;
    let mut accept = |m_hat: &Model, samples: &mut SampleSet| -> Result<(), SamplerError> {
        let m = model_convert(m_hat, &subst, &problem.cnf)?.project(ni, nb);
        if !verify_sample(&m, &problem.ast) {
            return Err(SamplerError::InvalidSample);
        }
        if !samples.insert(m) {
            duplicates += 1;
        }
        Ok(())
    };

    let ccss = Ccss::new(&f_hat, cfg.search);
    let mut under = UnderApproximation::exact(&f_hat);
    let (mut iterations, mut cdclt_models, mut ccss_models) = (0u64, 0u64, 0u64);
    let stop = loop {
        if samples.len() >= cfg.k {
            break StopReason::TargetReached;
        }
        match cfg.iteration_budget {
            Some(budget) if iterations >= budget => break StopReason::IterationBudget,
            None if start.elapsed() >= cfg.time_limit => break StopReason::TimeLimit,
            _ => {}
        }
        iterations += 1;

        let m_cdclt = match cdclt::solve(&under, &mut rng, cfg.cdcl)? {
            SolveOutcome::Sat(m) => {
                cdclt_models += 1;
                accept(&m, &mut samples)?;
                if samples.len() >= cfg.k {
                    break StopReason::TargetReached;
                }
                Some(m)
            }
            SolveOutcome::Unsat if under.fixed_values.is_empty() => return Err(SamplerError::UnsatFormula),
            SolveOutcome::Unsat => {
                under = UnderApproximation::exact(&f_hat);
                None
            }
            SolveOutcome::Unknown => None,
        };

        if let Some(m_ls) = ccss.search(m_cdclt.as_ref(), &mut rng)? {
            ccss_models += 1;
            accept(&m_ls, &mut samples)?;
            under = fix_partial_assignment(&f_hat, &m_ls, cfg.fix_probability, &mut rng);
        }
    };
    Ok(SampleRun { samples, stats: RunStats { iterations, cdclt_models, ccss_models, duplicates, stop } })
}

/// Runs `instances` independent streams on scoped threads and merges their
/// samples by (instance, local index), keeping at most `k`.
pub fn highdiv_sample_parallel(problem: &Problem, cfg: &RunConfig, instances: usize) -> Result<SampleSet, SamplerError> {
    cfg.validate()?;
    let runs: Vec<Result<SampleRun, SamplerError>> = thread::scope(|s| {
        let handles: Vec<_> = (0..instances.max(1) as u64)
            .map(|i| s.spawn(move || run_instance(problem, cfg, i)))
            .collect();
        handles.into_iter().map(|h| h.join().expect("sampler thread panicked")).collect()
    });
    let mut merged = SampleSet::new();
    for run in runs {
        for m in run?.samples.into_samples() {
            if merged.len() == cfg.k {
                break;
            }
            merged.insert(m);
        }
    }
    Ok(merged)
}
