//! Seeded training loop tying problems to optimizers.
//!
//! [`run`] draws `θ₀` and the per-epoch batch order from the run seed on two
//! independent ChaCha streams, so every algorithm started from the same
//! config sees the same starting point and the same batches. Divergence
//! (a non-finite loss, gradient, or parameter) ends the run early with the
//! trace flagged; it is a result, not an error.

use std::collections::hash_map::DefaultHasher;
use std::hash::{Hash, Hasher};
use std::path::PathBuf;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::math::Vector;
use crate::optim::{Algorithm, HyperParams, OptimError, Optimizer};
use crate::problems::{
    load_idx, Batch, Dataset, Init, LogisticRegression, MinibatchSampler, Mlp, Problem,
    ProblemError, Quadratic, Rosenbrock,
};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error(transparent)]
    Problem(#[from] ProblemError),
    #[error(transparent)]
    Optim(#[from] OptimError),
    #[error("invalid run configuration: {0}")]
    Config(String),
}

/// Learning-rate schedule `ε_k`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Schedule {
    Constant,
    /// `ε / (1 + k · decay)` with `k` the global step index.
    InverseTime {
        decay: f64,
    },
    /// `ε · factor^⌊epoch / every⌋`.
    Step {
        factor: f64,
        every: usize,
    },
}

impl Schedule {
    pub fn rate(&self, base: f64, step: u64, epoch: usize) -> f64 {
        match *self {
            Schedule::Constant => base,
            Schedule::InverseTime { decay } => base / (1.0 + step as f64 * decay),
            Schedule::Step { factor, every } => base * factor.powi((epoch / every) as i32),
        }
    }

    fn validate(&self) -> Result<(), HarnessError> {
        match *self {
            Schedule::Constant => Ok(()),
            Schedule::InverseTime { decay } if decay > 0.0 && decay.is_finite() => Ok(()),
            Schedule::Step { factor, every } if factor > 0.0 && factor.is_finite() && every > 0 => {
                Ok(())
            }
            other => Err(HarnessError::Config(format!(
                "schedule parameters must be positive: {other:?}"
            ))),
        }
    }
}

/// Which trace entries are kept.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Granularity {
    #[default]
    Step,
    /// The last step of each epoch.
    Epoch,
}

/// Loss level that defines steps-to-threshold.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Threshold {
    Absolute(f64),
    /// A fraction of the loss recorded at step 0.
    FractionOfInitial(f64),
}

/// IDX files backing the MLP problem.
#[derive(Debug, Clone, PartialEq)]
pub struct IdxPaths {
    pub train_images: PathBuf,
    pub train_labels: PathBuf,
    pub test_images: Option<PathBuf>,
    pub test_labels: Option<PathBuf>,
}

/// A buildable problem description.
#[derive(Debug, Clone, PartialEq)]
pub enum ProblemSpec {
    Quadratic {
        dim: usize,
        condition: f64,
    },
    Rosenbrock,
    Logreg {
        examples: usize,
        features: usize,
        seed: u64,
    },
    Mlp {
        hidden: usize,
        seed: u64,
        data: Option<IdxPaths>,
    },
}

impl ProblemSpec {
    pub fn name(&self) -> &'static str {
        match self {
            ProblemSpec::Quadratic { .. } => "quadratic",
            ProblemSpec::Rosenbrock => "rosenbrock",
            ProblemSpec::Logreg { .. } => "logreg",
            ProblemSpec::Mlp { .. } => "mlp",
        }
    }

    /// The built-in problem `name` with its default sizes.
    pub fn builtin(name: &str) -> Option<Self> {
        Some(match name {
            "quadratic" => ProblemSpec::Quadratic {
                dim: 10,
                condition: 100.0,
            },
            "rosenbrock" => ProblemSpec::Rosenbrock,
            "logreg" => ProblemSpec::Logreg {
                examples: 2000,
                features: 20,
                seed: 0,
            },
            "mlp" => ProblemSpec::Mlp {
                hidden: 16,
                seed: 0,
                data: None,
            },
            _ => return None,
        })
    }

    pub const BUILTIN_NAMES: [&'static str; 4] = ["quadratic", "rosenbrock", "logreg", "mlp"];

    pub fn build(&self) -> Result<Box<dyn Problem>, ProblemError> {
        Ok(match self {
            ProblemSpec::Quadratic { dim, condition } => {
                Box::new(Quadratic::new(*dim, *condition)?)
            }
            ProblemSpec::Rosenbrock => Box::new(Rosenbrock),
            ProblemSpec::Logreg {
                examples,
                features,
                seed,
            } => Box::new(LogisticRegression::synthetic(*examples, *features, *seed)?),
            ProblemSpec::Mlp {
                hidden,
                seed,
                data: None,
            } => Box::new(Mlp::synthetic(*hidden, *seed)?),
            ProblemSpec::Mlp {
                hidden,
                data: Some(paths),
                ..
            } => {
                let train = Dataset::from_idx(
                    &load_idx(&paths.train_images)?,
                    &load_idx(&paths.train_labels)?,
                )?;
                let test = match (&paths.test_images, &paths.test_labels) {
                    (Some(images), Some(labels)) => {
                        Some(Dataset::from_idx(&load_idx(images)?, &load_idx(labels)?)?)
                    }
                    (None, None) => None,
                    _ => {
                        return Err(ProblemError::DatasetAbsent(
                            "test images and test labels must be given together".into(),
                        ))
                    }
                };
                Box::new(Mlp::new(train, test, *hidden)?)
            }
        })
    }
}

/// Everything needed to reproduce one training run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    /// Display name; defaults to the algorithm name.
    pub label: String,
    pub algorithm: Algorithm,
    pub hyper: HyperParams,
    pub schedule: Schedule,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub problem: ProblemSpec,
    pub granularity: Granularity,
    /// `None` uses the problem's default initialisation.
    pub init: Option<Init>,
    pub threshold: Option<Threshold>,
}

pub const DEFAULT_EPOCHS: usize = 50;
pub const DEFAULT_BATCH_SIZE: usize = 128;

impl RunConfig {
    /// Defaults: the algorithm's default hyperparameters, constant schedule,
    /// 50 epochs, batches of 128, seed 0, per-step trace.
    pub fn new(algorithm: Algorithm, problem: ProblemSpec) -> Self {
        Self {
            label: algorithm.name().to_string(),
            algorithm,
            hyper: HyperParams::defaults_for(algorithm),
            schedule: Schedule::Constant,
            epochs: DEFAULT_EPOCHS,
            batch_size: DEFAULT_BATCH_SIZE,
            seed: 0,
            problem,
            granularity: Granularity::Step,
            init: None,
            threshold: None,
        }
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        if self.epochs == 0 {
            return Err(HarnessError::Config("epochs must be at least 1".into()));
        }
        if self.batch_size == 0 {
            return Err(HarnessError::Config("batch_size must be at least 1".into()));
        }
        self.hyper.validate()?;
        self.schedule.validate()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRecord {
    pub step: u64,
    pub epoch: usize,
    /// Minibatch loss at the parameters the step started from.
    pub loss: f64,
    pub grad_norm: f64,
    pub update_norm: f64,
    /// Seconds since the run started.
    pub wall_s: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    pub label: String,
    pub algorithm: Algorithm,
    pub records: Vec<TraceRecord>,
    /// Steps actually taken.
    pub steps: u64,
    pub diverged: bool,
    /// Full training-set loss at the final (last finite) parameters.
    pub final_loss: f64,
    pub final_grad_norm: f64,
    /// End-of-training loss on the held-out split.
    pub test_loss: Option<f64>,
    pub steps_to_threshold: Option<u64>,
    pub total_wall_s: f64,
    pub final_theta: Vector,
    /// Hash of `θ₀` and the first epoch's batches.
    pub start_fingerprint: u64,
}

impl Trace {
    /// Final loss on the held-out split if there is one, else on training
    /// data.
    pub fn reported_loss(&self) -> f64 {
        self.test_loss.unwrap_or(self.final_loss)
    }
}

/// `ε_k` for `config` at global step `step` in epoch `epoch`.
pub fn lr_schedule(config: &RunConfig, step: u64, epoch: usize) -> f64 {
    config.schedule.rate(config.hyper.epsilon, step, epoch)
}

const INIT_STREAM: u64 = 0;
const BATCH_STREAM: u64 = 1;

fn rng_stream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// `θ₀` for `config` on `problem`.
pub fn initial_theta(config: &RunConfig, problem: &dyn Problem) -> Result<Vector, HarnessError> {
    let init = config.init.unwrap_or_else(|| problem.default_init());
    Ok(init
        .draw(problem.dim(), &mut rng_stream(config.seed, INIT_STREAM))
        .map_err(ProblemError::from)?)
}

fn fingerprint(theta: &Vector, batches: &[Batch]) -> u64 {
    let mut h = DefaultHasher::new();
    for v in theta {
        v.to_bits().hash(&mut h);
    }
    batches.hash(&mut h);
    h.finish()
}

/// Builds the configured problem and runs it.
pub fn run(config: &RunConfig) -> Result<Trace, HarnessError> {
    let problem = config.problem.build()?;
    run_on(config, problem.as_ref())
}

/// Runs `config` against an already built problem; `config.problem` is
/// ignored.
pub fn run_on(config: &RunConfig, problem: &dyn Problem) -> Result<Trace, HarnessError> {
    config.validate()?;
    let started = Instant::now();
    let mut theta = initial_theta(config, problem)?;
    let mut optimizer = Optimizer::new(config.algorithm, config.hyper, problem.dim())?;
    let sampler = problem
        .train_size()
        .map(|n| MinibatchSampler::new(n, config.batch_size))
        .transpose()?;
    let mut batch_rng = rng_stream(config.seed, BATCH_STREAM);

    let mut records = Vec::new();
    let mut step = 0u64;
    let mut diverged = false;
    let mut threshold = None;
    let mut steps_to_threshold = None;
    let mut start_fingerprint = 0;

    'epochs: for epoch in 0..config.epochs {
        let batches = match &sampler {
            Some(s) => s.epoch(&mut batch_rng),
            None => vec![problem.full_batch()],
        };
        if epoch == 0 {
            start_fingerprint = fingerprint(&theta, &batches);
        }
        let mut last = None;
        for batch in &batches {
            let loss = problem.loss(&theta, batch)?;
            if !loss.is_finite() {
                diverged = true;
                break 'epochs;
            }
            let level = *threshold.get_or_insert(match config.threshold {
                Some(Threshold::Absolute(t)) => t,
                Some(Threshold::FractionOfInitial(f)) => f * loss,
                None => f64::NEG_INFINITY,
            });
            if steps_to_threshold.is_none() && loss < level {
                steps_to_threshold = Some(step);
            }

            let lr = lr_schedule(config, step, epoch);
            let previous = theta.clone();
            let report = match optimizer.step_with(&mut theta, lr, |p| problem.grad(p, batch)) {
                Ok(report) => report,
                Err(OptimError::NonFiniteGradient { .. } | OptimError::NonFiniteInterim { .. }) => {
                    theta = previous;
                    diverged = true;
                    break 'epochs;
                }
                Err(OptimError::Evaluation(e)) => match e.downcast::<ProblemError>() {
                    Ok(e) => return Err((*e).into()),
                    Err(e) => return Err(OptimError::Evaluation(e).into()),
                },
                Err(e) => return Err(e.into()),
            };
            if !theta.is_finite() || !report.update_norm.is_finite() {
                theta = previous;
                diverged = true;
                break 'epochs;
            }
            let record = TraceRecord {
                step,
                epoch,
                loss,
                grad_norm: report.grad_norm,
                update_norm: report.update_norm,
                wall_s: started.elapsed().as_secs_f64(),
            };
            match config.granularity {
                Granularity::Step => records.push(record),
                Granularity::Epoch => last = Some(record),
            }
            step += 1;
        }
        records.extend(last);
    }

    let full = problem.full_batch();
    let final_loss = problem.loss(&theta, &full)?;
    let final_grad_norm = problem.grad(&theta, &full)?.l2_norm();
    let test_loss = problem.test_loss(&theta).transpose()?;
    Ok(Trace {
        label: config.label.clone(),
        algorithm: config.algorithm,
        records,
        steps: step,
        diverged,
        final_loss,
        final_grad_norm,
        test_loss,
        steps_to_threshold,
        total_wall_s: started.elapsed().as_secs_f64(),
        final_theta: theta,
        start_fingerprint,
    })
}

/// One line of a comparison table.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub label: String,
    pub algorithm: Algorithm,
    pub final_loss: Option<f64>,
    /// End-of-training held-out loss.
    pub test_loss: Option<f64>,
    pub steps_to_threshold: Option<u64>,
    pub wall_s: Option<f64>,
    pub diverged: bool,
    pub error: Option<String>,
}

impl SummaryRow {
    pub fn from_trace(trace: &Trace) -> Self {
        Self {
            label: trace.label.clone(),
            algorithm: trace.algorithm,
            final_loss: Some(trace.final_loss),
            test_loss: trace.test_loss,
            steps_to_threshold: trace.steps_to_threshold,
            wall_s: Some(trace.total_wall_s),
            diverged: trace.diverged,
            error: None,
        }
    }

    fn failed(config: &RunConfig, error: &HarnessError) -> Self {
        Self {
            label: config.label.clone(),
            algorithm: config.algorithm,
            final_loss: None,
            test_loss: None,
            steps_to_threshold: None,
            wall_s: None,
            diverged: false,
            error: Some(error.to_string()),
        }
    }
}

/// Runs every config, one thread each, and returns their traces in input
/// order.
pub fn run_all(configs: &[RunConfig]) -> Vec<Result<Trace, HarnessError>> {
    std::thread::scope(|scope| {
        let handles: Vec<_> = configs
            .iter()
            .map(|config| scope.spawn(move || run(config)))
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("run thread panicked"))
            .collect()
    })
}

/// One summary row per config, in input order. A failing run only affects
/// its own row.
pub fn compare(configs: &[RunConfig]) -> Vec<SummaryRow> {
    configs
        .iter()
        .zip(run_all(configs))
        .map(|(config, result)| match result {
            Ok(trace) => SummaryRow::from_trace(&trace),
            Err(e) => SummaryRow::failed(config, &e),
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quadratic(dim: usize, condition: f64) -> ProblemSpec {
        ProblemSpec::Quadratic { dim, condition }
    }

    #[test]
    fn schedules() {
        assert_eq!(Schedule::Constant.rate(0.3, 12345, 7), 0.3);
        let inv = Schedule::InverseTime { decay: 0.01 };
        assert!((inv.rate(0.1, 100, 0) - 0.05).abs() < 1e-17);
        let step = Schedule::Step {
            factor: 0.5,
            every: 10,
        };
        assert_eq!(step.rate(0.2, 0, 25), 0.2 * 0.25);
        assert_eq!(step.rate(0.2, 0, 9), 0.2);
        assert!(Schedule::Step {
            factor: 0.5,
            every: 0
        }
        .validate()
        .is_err());
        assert!(Schedule::InverseTime { decay: -1.0 }.validate().is_err());
    }

    #[test]
    fn sgd_descends_on_quadratic() {
        let mut c = RunConfig::new(Algorithm::Sgd, quadratic(2, 10.0));
        c.epochs = 100;
        c.init = Some(Init::Constant(1.0));
        let t = run(&c).unwrap();
        assert_eq!(t.steps, 100);
        assert!(t.final_loss < t.records[0].loss);
    }

    #[test]
    fn same_seed_same_trace() {
        let mut c = RunConfig::new(Algorithm::Adam, ProblemSpec::builtin("logreg").unwrap());
        c.epochs = 3;
        let a = run(&c).unwrap();
        let b = run(&c).unwrap();
        let strip = |t: &Trace| {
            t.records
                .iter()
                .map(|r| {
                    (
                        r.step,
                        r.epoch,
                        r.loss.to_bits(),
                        r.grad_norm.to_bits(),
                        r.update_norm.to_bits(),
                    )
                })
                .collect::<Vec<_>>()
        };
        assert_eq!(strip(&a), strip(&b));
        assert_eq!(a.final_theta, b.final_theta);
    }

    #[test]
    fn steps_to_half_loss_on_unit_quadratic() {
        let mut c = RunConfig::new(Algorithm::Sgd, quadratic(1, 1.0));
        c.init = Some(Init::Constant(1.0));
        c.epochs = 100;
        c.threshold = Some(Threshold::FractionOfInitial(0.5));
        let t = run(&c).unwrap();
        // θ_k = 0.99ᵏ and the loss halves once θ² < ½.
        let expected = ((0.5f64).sqrt().ln() / 0.99f64.ln()).ceil() as u64;
        assert_eq!(expected, 35);
        assert_eq!(t.steps_to_threshold, Some(expected));
    }

    #[test]
    fn divergence_is_contained() {
        let mut c = RunConfig::new(Algorithm::Sgd, ProblemSpec::Rosenbrock);
        c.hyper.epsilon = 1e6;
        c.epochs = 100;
        let t = run(&c).unwrap();
        assert!(t.diverged);
        assert!(t.steps < 100);
        assert!((t.records.len() as u64) == t.steps);
        assert!(t
            .records
            .iter()
            .all(|r| r.loss.is_finite() && r.update_norm.is_finite()));
        assert!(t.final_theta.is_finite());
    }

    #[test]
    fn epoch_granularity_keeps_one_record_per_epoch() {
        let mut c = RunConfig::new(Algorithm::RmsProp, ProblemSpec::builtin("logreg").unwrap());
        c.epochs = 4;
        c.granularity = Granularity::Epoch;
        let t = run(&c).unwrap();
        assert_eq!(t.records.len(), 4);
        assert_eq!(t.steps, 4 * (1500 / 128) as u64);
        assert!(t.records.windows(2).all(|w| w[0].step < w[1].step));
    }

    #[test]
    fn wall_clock_is_monotone() {
        let mut c = RunConfig::new(Algorithm::Momentum, ProblemSpec::builtin("mlp").unwrap());
        c.epochs = 2;
        let t = run(&c).unwrap();
        assert!(t.records.windows(2).all(|w| w[0].wall_s <= w[1].wall_s));
        assert!(t.total_wall_s >= t.records.last().unwrap().wall_s);
    }

    #[test]
    fn shared_start_across_algorithms() {
        let configs: Vec<_> = Algorithm::ALL
            .iter()
            .map(|&a| {
                let mut c = RunConfig::new(a, ProblemSpec::builtin("mlp").unwrap());
                c.epochs = 1;
                c.seed = 9;
                c
            })
            .collect();
        let traces: Vec<_> = run_all(&configs).into_iter().map(Result::unwrap).collect();
        assert!(traces
            .windows(2)
            .all(|w| w[0].start_fingerprint == w[1].start_fingerprint));
        let mut other = configs[0].clone();
        other.seed = 10;
        assert_ne!(
            run(&other).unwrap().start_fingerprint,
            traces[0].start_fingerprint
        );
    }

    #[test]
    fn compare_keeps_order_and_isolates_errors() {
        let good = RunConfig::new(Algorithm::Sgd, quadratic(3, 10.0));
        let mut bad = RunConfig::new(Algorithm::Adam, ProblemSpec::builtin("logreg").unwrap());
        bad.batch_size = 10_000;
        let rows = compare(&[good.clone(), bad, good]);
        assert_eq!(rows.len(), 3);
        assert!(rows[0].error.is_none() && rows[2].error.is_none());
        assert!(rows[1].error.as_deref().unwrap().contains("batch size"));
        assert_eq!(rows[0].final_loss, rows[2].final_loss);
    }

    #[test]
    fn adam_reaches_small_gradient_on_quadratic() {
        let mut c = RunConfig::new(Algorithm::Adam, ProblemSpec::builtin("quadratic").unwrap());
        c.epochs = 5000;
        let t = run(&c).unwrap();
        assert_eq!(t.steps, 5000);
        assert!(t.final_grad_norm < 1e-3, "{}", t.final_grad_norm);
    }

    #[test]
    fn sgd_and_adam_on_logreg() {
        let configs: Vec<_> = [(Algorithm::Sgd, 0.01), (Algorithm::Adam, 0.001)]
            .into_iter()
            .map(|(a, lr)| {
                let mut c = RunConfig::new(a, ProblemSpec::builtin("logreg").unwrap());
                c.hyper.epsilon = lr;
                c.epochs = 30;
                c
            })
            .collect();
        let rows = compare(&configs);
        assert_eq!(rows.len(), 2);
        for row in rows {
            assert!(row.final_loss.unwrap().is_finite());
            assert!(row.test_loss.unwrap().is_finite());
        }
    }

    #[test]
    fn singleton_compare_matches_run() {
        let mut c = RunConfig::new(Algorithm::AdaGrad, quadratic(4, 10.0));
        c.epochs = 20;
        let rows = compare(std::slice::from_ref(&c));
        let t = run(&c).unwrap();
        assert_eq!(rows.len(), 1);
        assert_eq!(rows[0].final_loss, Some(t.final_loss));
        assert_eq!(rows[0].steps_to_threshold, t.steps_to_threshold);
        assert_eq!(rows[0].diverged, t.diverged);
    }

    #[test]
    fn invalid_configs_rejected() {
        let mut c = RunConfig::new(Algorithm::Sgd, quadratic(2, 1.0));
        c.epochs = 0;
        assert!(run(&c).is_err());
        let mut c = RunConfig::new(Algorithm::Sgd, quadratic(2, 1.0));
        c.batch_size = 0;
        assert!(run(&c).is_err());
        let c = RunConfig::new(Algorithm::Sgd, quadratic(0, 1.0));
        assert!(matches!(run(&c), Err(HarnessError::Problem(_))));
    }

    #[test]
    fn missing_idx_files_fail_cleanly() {
        let spec = ProblemSpec::Mlp {
            hidden: 4,
            seed: 0,
            data: Some(IdxPaths {
                train_images: "/nonexistent/images.idx".into(),
                train_labels: "/nonexistent/labels.idx".into(),
                test_images: None,
                test_labels: None,
            }),
        };
        assert!(matches!(spec.build(), Err(ProblemError::Idx(_))));
    }
}
