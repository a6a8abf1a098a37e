//! Command-line front end: config parsing, CSV output, and the three
//! subcommands.
//!
//! Exit codes: 0 on success (a diverged run is still a success), 2 for bad
//! input (config, arguments, unknown names, failed gradient check), 3 for
//! I/O failures.

use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use serde::Deserialize;
use thiserror::Error;

use crate::harness::{
    self, Granularity, HarnessError, IdxPaths, ProblemSpec, RunConfig, Schedule, SummaryRow,
    Threshold, Trace,
};
use crate::optim::{Algorithm, HyperParam, HyperParams};
use crate::problems::{
    random_grad_check_report, GradCheckReport, IdxError, Init, ProblemError, DEFAULT_FD_STEP,
};

/// Environment variable that overrides the seed of every run.
pub const SEED_ENV: &str = "GRADKIT_SEED";
pub const TRACE_HEADER: [&str; 6] = [
    "step",
    "epoch",
    "loss",
    "grad_norm",
    "update_norm",
    "wall_s",
];
pub const SUMMARY_HEADER: [&str; 6] = [
    "algorithm",
    "final_loss",
    "test_loss",
    "steps_to_threshold",
    "wall_s",
    "diverged",
];
/// Gradient checks pass below this relative error.
pub const GRADCHECK_TOLERANCE: f64 = 1e-5;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Input(String),
    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: io::Error,
    },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Input(_) => 2,
            CliError::Io { .. } => 3,
        }
    }

    fn io(context: impl Into<String>, source: io::Error) -> Self {
        CliError::Io {
            context: context.into(),
            source,
        }
    }
}

impl From<HarnessError> for CliError {
    fn from(e: HarnessError) -> Self {
        match e {
            HarnessError::Problem(e) => e.into(),
            other => CliError::Input(other.to_string()),
        }
    }
}

impl From<ProblemError> for CliError {
    fn from(e: ProblemError) -> Self {
        match e {
            ProblemError::Idx(IdxError::Io(source)) => CliError::io("reading IDX data", source),
            other => CliError::Input(other.to_string()),
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    problem: ProblemSection,
    #[serde(default)]
    run: RunSection,
    #[serde(default)]
    optimizer: toml::Table,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ProblemSection {
    kind: String,
    dim: Option<usize>,
    condition: Option<f64>,
    examples: Option<usize>,
    features: Option<usize>,
    hidden: Option<usize>,
    seed: Option<u64>,
    train_images: Option<PathBuf>,
    train_labels: Option<PathBuf>,
    test_images: Option<PathBuf>,
    test_labels: Option<PathBuf>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RunSection {
    epochs: Option<usize>,
    batch_size: Option<usize>,
    seed: Option<u64>,
    schedule: Option<String>,
    decay: Option<f64>,
    factor: Option<f64>,
    every: Option<usize>,
    granularity: Option<String>,
    init: Option<String>,
    init_scale: Option<f64>,
    init_value: Option<f64>,
    threshold: Option<f64>,
    threshold_fraction: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct OptimizerSection {
    algorithm: Option<String>,
    epsilon: Option<f64>,
    alpha: Option<f64>,
    rho: Option<f64>,
    rho1: Option<f64>,
    rho2: Option<f64>,
    delta: Option<f64>,
}

fn input(msg: impl Into<String>) -> CliError {
    CliError::Input(msg.into())
}

/// Rejects keys in `given` that the chosen variant does not read.
fn only(
    section: &str,
    kind: &str,
    given: &[(&str, bool)],
    allowed: &[&str],
) -> Result<(), CliError> {
    match given.iter().find(|(k, set)| *set && !allowed.contains(k)) {
        Some((key, _)) => Err(input(format!(
            "[{section}] key `{key}` does not apply to {kind}"
        ))),
        None => Ok(()),
    }
}

fn problem_spec(p: ProblemSection) -> Result<ProblemSpec, CliError> {
    let given = [
        ("dim", p.dim.is_some()),
        ("condition", p.condition.is_some()),
        ("examples", p.examples.is_some()),
        ("features", p.features.is_some()),
        ("hidden", p.hidden.is_some()),
        ("seed", p.seed.is_some()),
        ("train_images", p.train_images.is_some()),
        ("train_labels", p.train_labels.is_some()),
        ("test_images", p.test_images.is_some()),
        ("test_labels", p.test_labels.is_some()),
    ];
    let defaults = ProblemSpec::builtin(&p.kind).ok_or_else(|| {
        input(format!(
            "unknown problem kind `{}` (expected one of {})",
            p.kind,
            ProblemSpec::BUILTIN_NAMES.join(", ")
        ))
    })?;
    let kind = p.kind.as_str();
    Ok(match defaults {
        ProblemSpec::Quadratic { dim, condition } => {
            only("problem", kind, &given, &["dim", "condition"])?;
            ProblemSpec::Quadratic {
                dim: p.dim.unwrap_or(dim),
                condition: p.condition.unwrap_or(condition),
            }
        }
        ProblemSpec::Rosenbrock => {
            only("problem", kind, &given, &[])?;
            ProblemSpec::Rosenbrock
        }
        ProblemSpec::Logreg {
            examples,
            features,
            seed,
        } => {
            only("problem", kind, &given, &["examples", "features", "seed"])?;
            ProblemSpec::Logreg {
                examples: p.examples.unwrap_or(examples),
                features: p.features.unwrap_or(features),
                seed: p.seed.unwrap_or(seed),
            }
        }
        ProblemSpec::Mlp { hidden, seed, .. } => {
            only(
                "problem",
                kind,
                &given,
                &[
                    "hidden",
                    "seed",
                    "train_images",
                    "train_labels",
                    "test_images",
                    "test_labels",
                ],
            )?;
            let data = match (p.train_images, p.train_labels) {
                (Some(train_images), Some(train_labels)) => Some(IdxPaths {
                    train_images,
                    train_labels,
                    test_images: p.test_images,
                    test_labels: p.test_labels,
                }),
                (None, None) if p.test_images.is_none() && p.test_labels.is_none() => None,
                _ => {
                    return Err(input(
                        "[problem] train_images and train_labels must be given together",
                    ))
                }
            };
            ProblemSpec::Mlp {
                hidden: p.hidden.unwrap_or(hidden),
                seed: p.seed.unwrap_or(seed),
                data,
            }
        }
    })
}

/// Settings shared by every optimizer block.
struct RunSettings {
    epochs: usize,
    batch_size: usize,
    seed: u64,
    schedule: Schedule,
    granularity: Granularity,
    init: Option<Init>,
    threshold: Option<Threshold>,
}

fn run_settings(r: RunSection, seed_override: Option<u64>) -> Result<RunSettings, CliError> {
    let schedule_name = r.schedule.as_deref().unwrap_or("constant");
    let given = [
        ("decay", r.decay.is_some()),
        ("factor", r.factor.is_some()),
        ("every", r.every.is_some()),
    ];
    let schedule = match schedule_name {
        "constant" => {
            only("run", "a constant schedule", &given, &[])?;
            Schedule::Constant
        }
        "inverse-t" => {
            only("run", "an inverse-t schedule", &given, &["decay"])?;
            Schedule::InverseTime {
                decay: r
                    .decay
                    .ok_or_else(|| input("[run] inverse-t schedule needs `decay`"))?,
            }
        }
        "step" => {
            only("run", "a step schedule", &given, &["factor", "every"])?;
            Schedule::Step {
                factor: r
                    .factor
                    .ok_or_else(|| input("[run] step schedule needs `factor`"))?,
                every: r
                    .every
                    .ok_or_else(|| input("[run] step schedule needs `every`"))?,
            }
        }
        other => {
            return Err(input(format!(
                "[run] unknown schedule `{other}` (expected constant, inverse-t or step)"
            )))
        }
    };
    let granularity = match r.granularity.as_deref().unwrap_or("step") {
        "step" => Granularity::Step,
        "epoch" => Granularity::Epoch,
        other => {
            return Err(input(format!(
                "[run] unknown granularity `{other}` (expected step or epoch)"
            )))
        }
    };
    let init = match (r.init.as_deref(), r.init_scale, r.init_value) {
        (None, None, None) => None,
        (Some("uniform"), scale, None) => Some(Init::Uniform(scale.unwrap_or(0.05))),
        (Some("zeros"), None, None) => Some(Init::Zeros),
        (Some("constant"), None, Some(v)) => Some(Init::Constant(v)),
        (Some("constant"), None, None) => {
            return Err(input("[run] constant init needs `init_value`"))
        }
        (Some(other @ ("uniform" | "zeros" | "constant")), _, _) => {
            return Err(input(format!(
                "[run] init_scale / init_value do not apply to {other} init"
            )))
        }
        (Some(other), _, _) => {
            return Err(input(format!(
                "[run] unknown init `{other}` (expected uniform, zeros or constant)"
            )))
        }
        (None, _, _) => return Err(input("[run] init_scale / init_value need `init`")),
    };
    if let Init::Uniform(s) = init.unwrap_or(Init::Zeros) {
        if !(s > 0.0 && s.is_finite()) {
            return Err(input(format!("[run] init_scale must be positive, got {s}")));
        }
    }
    let threshold = match (r.threshold, r.threshold_fraction) {
        (Some(_), Some(_)) => {
            return Err(input(
                "[run] give either `threshold` or `threshold_fraction`",
            ))
        }
        (Some(t), None) => Some(Threshold::Absolute(t)),
        (None, Some(f)) => Some(Threshold::FractionOfInitial(f)),
        (None, None) => None,
    };
    Ok(RunSettings {
        epochs: r.epochs.unwrap_or(harness::DEFAULT_EPOCHS),
        batch_size: r.batch_size.unwrap_or(harness::DEFAULT_BATCH_SIZE),
        seed: seed_override.or(r.seed).unwrap_or(0),
        schedule,
        granularity,
        init,
        threshold,
    })
}

fn hyper_params(
    label: &str,
    section: OptimizerSection,
) -> Result<(Algorithm, HyperParams), CliError> {
    let name = section.algorithm.as_deref().unwrap_or(label);
    let algorithm: Algorithm = name
        .parse()
        .map_err(|e| input(format!("[optimizer.{label}]: {e}")))?;
    let mut hyper = HyperParams::defaults_for(algorithm);
    let given = [
        (HyperParam::Epsilon, section.epsilon, &mut hyper.epsilon),
        (HyperParam::Alpha, section.alpha, &mut hyper.alpha),
        (HyperParam::Rho, section.rho, &mut hyper.rho),
        (HyperParam::Rho1, section.rho1, &mut hyper.rho1),
        (HyperParam::Rho2, section.rho2, &mut hyper.rho2),
        (HyperParam::Delta, section.delta, &mut hyper.delta),
    ];
    for (param, value, slot) in given {
        if let Some(v) = value {
            if !algorithm.uses().contains(&param) {
                return Err(input(format!(
                    "[optimizer.{label}] {algorithm} does not use `{}`",
                    param.name()
                )));
            }
            *slot = v;
        }
    }
    hyper
        .validate()
        .map_err(|e| input(format!("[optimizer.{label}]: {e}")))?;
    Ok((algorithm, hyper))
}

/// Parses a config document into one [`RunConfig`] per optimizer block, in
/// file order. `seed_override` replaces the `[run]` seed.
pub fn parse_config(text: &str, seed_override: Option<u64>) -> Result<Vec<RunConfig>, CliError> {
    let file: ConfigFile =
        toml::from_str(text).map_err(|e| input(format!("invalid config: {e}")))?;
    let problem = problem_spec(file.problem)?;
    let settings = run_settings(file.run, seed_override)?;
    if file.optimizer.is_empty() {
        return Err(input("config has no [optimizer.<name>] blocks"));
    }
    let mut configs = Vec::with_capacity(file.optimizer.len());
    for (label, value) in file.optimizer {
        let section: OptimizerSection = value
            .try_into()
            .map_err(|e| input(format!("[optimizer.{label}]: {e}")))?;
        let (algorithm, hyper) = hyper_params(&label, section)?;
        let config = RunConfig {
            label,
            algorithm,
            hyper,
            schedule: settings.schedule,
            epochs: settings.epochs,
            batch_size: settings.batch_size,
            seed: settings.seed,
            problem: problem.clone(),
            granularity: settings.granularity,
            init: settings.init,
            threshold: settings.threshold,
        };
        config.validate()?;
        configs.push(config);
    }
    Ok(configs)
}

/// Reads [`SEED_ENV`].
pub fn seed_from_env() -> Result<Option<u64>, CliError> {
    match std::env::var(SEED_ENV) {
        Ok(v) => v.trim().parse().map(Some).map_err(|_| {
            input(format!(
                "{SEED_ENV}=`{v}` is not an unsigned 64-bit integer"
            ))
        }),
        Err(std::env::VarError::NotPresent) => Ok(None),
        Err(e) => Err(input(format!("{SEED_ENV}: {e}"))),
    }
}

fn float(v: f64) -> String {
    format!("{v:e}")
}

fn csv_error(context: &str, e: csv::Error) -> CliError {
    match e.into_kind() {
        csv::ErrorKind::Io(source) => CliError::io(context, source),
        other => CliError::io(context, io::Error::other(format!("{other:?}"))),
    }
}

/// Writes one trace as CSV. Without `timing` the `wall_s` column is left
/// empty so the output depends only on config and seed.
pub fn write_trace_csv<W: io::Write>(
    out: W,
    trace: &Trace,
    timing: bool,
) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(TRACE_HEADER)?;
    for r in &trace.records {
        w.write_record([
            r.step.to_string(),
            r.epoch.to_string(),
            float(r.loss),
            float(r.grad_norm),
            float(r.update_norm),
            if timing {
                float(r.wall_s)
            } else {
                String::new()
            },
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Writes the comparison summary as CSV. Missing values are empty fields.
pub fn write_summary_csv<W: io::Write>(
    out: W,
    rows: &[SummaryRow],
    timing: bool,
) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(SUMMARY_HEADER)?;
    for row in rows {
        w.write_record([
            row.label.clone(),
            row.final_loss.map(float).unwrap_or_default(),
            row.test_loss.map(float).unwrap_or_default(),
            row.steps_to_threshold
                .map(|k| k.to_string())
                .unwrap_or_default(),
            row.wall_s.filter(|_| timing).map(float).unwrap_or_default(),
            row.diverged.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Plain-text rendering of the summary.
pub fn summary_table(rows: &[SummaryRow], timing: bool) -> String {
    let cell = |v: Option<f64>| v.map_or_else(|| "-".to_string(), |v| format!("{v:.6e}"));
    let lines: Vec<[String; 6]> = rows
        .iter()
        .map(|r| {
            [
                r.label.clone(),
                cell(r.final_loss),
                cell(r.test_loss),
                r.steps_to_threshold
                    .map_or_else(|| "-".into(), |k| k.to_string()),
                if timing {
                    r.wall_s.map_or_else(|| "-".into(), |s| format!("{s:.3}"))
                } else {
                    "-".into()
                },
                if r.diverged {
                    "yes".into()
                } else {
                    "no".into()
                },
            ]
        })
        .collect();
    let mut widths = SUMMARY_HEADER.map(|h| h.chars().count());
    for line in &lines {
        for (w, c) in widths.iter_mut().zip(line) {
            *w = (*w).max(c.chars().count());
        }
    }
    let mut out = String::new();
    let mut push = |cells: &[String]| {
        let padded: Vec<String> = cells
            .iter()
            .zip(widths)
            .map(|(c, w)| format!("{c}{}", " ".repeat(w - c.chars().count())))
            .collect();
        let _ = writeln!(out, "{}", padded.join("  ").trim_end());
    };
    push(&SUMMARY_HEADER.map(String::from));
    for line in &lines {
        push(line);
    }
    out.push_str("test_loss is measured at the end of training.\n");
    out
}

/// Trace file name for a run label.
pub fn trace_file_name(label: &str) -> String {
    format!("trace_{label}.csv")
}

/// Runs every optimizer block of the config at `config_path` and writes
/// `trace_<name>.csv`, `summary.csv` and `summary.txt` into `out_dir`.
pub fn cmd_run(
    config_path: &Path,
    out_dir: &Path,
    timing: bool,
) -> Result<Vec<SummaryRow>, CliError> {
    let text = fs::read_to_string(config_path)
        .map_err(|e| CliError::io(format!("reading {}", config_path.display()), e))?;
    let configs = parse_config(&text, seed_from_env()?)?;
    // Surface data and size problems before spending time on any run.
    configs[0].problem.build()?;
    let traces = harness::run_all(&configs)
        .into_iter()
        .collect::<Result<Vec<_>, _>>()?;

    fs::create_dir_all(out_dir)
        .map_err(|e| CliError::io(format!("creating {}", out_dir.display()), e))?;
    for trace in &traces {
        let path = out_dir.join(trace_file_name(&trace.label));
        let file = fs::File::create(&path)
            .map_err(|e| CliError::io(format!("writing {}", path.display()), e))?;
        write_trace_csv(io::BufWriter::new(file), trace, timing)
            .map_err(|e| csv_error(&format!("writing {}", path.display()), e))?;
    }
    let rows: Vec<SummaryRow> = traces.iter().map(SummaryRow::from_trace).collect();
    let path = out_dir.join("summary.csv");
    let file = fs::File::create(&path)
        .map_err(|e| CliError::io(format!("writing {}", path.display()), e))?;
    write_summary_csv(io::BufWriter::new(file), &rows, timing)
        .map_err(|e| csv_error(&format!("writing {}", path.display()), e))?;
    let path = out_dir.join("summary.txt");
    fs::write(&path, summary_table(&rows, timing))
        .map_err(|e| CliError::io(format!("writing {}", path.display()), e))?;
    Ok(rows)
}

/// Worst gradient errors of the built-in problem `name` over `trials`
/// random points.
pub fn cmd_gradcheck(name: &str, trials: usize, seed: u64) -> Result<GradCheckReport, CliError> {
    let spec = ProblemSpec::builtin(name).ok_or_else(|| {
        input(format!(
            "unknown problem `{name}` (expected one of {})",
            ProblemSpec::BUILTIN_NAMES.join(", ")
        ))
    })?;
    if trials == 0 {
        return Err(input("--trials must be at least 1"));
    }
    let problem = spec.build()?;
    Ok(random_grad_check_report(
        problem.as_ref(),
        trials,
        seed,
        DEFAULT_FD_STEP,
    )?)
}

fn short(v: f64) -> String {
    if v != 0.0 && v.abs() < 1e-3 {
        format!("{v:e}")
    } else {
        v.to_string()
    }
}

/// One line per algorithm with its default hyperparameters, then the
/// built-in problems.
pub fn list_text() -> String {
    let mut out = String::from("algorithms:\n");
    for a in Algorithm::ALL {
        let hyper = HyperParams::defaults_for(a);
        let params: Vec<String> = a
            .uses()
            .iter()
            .map(|&p| format!("{}={}", p.name(), short(hyper.get(p))))
            .collect();
        let _ = writeln!(out, "  {:<9} {}", a.name(), params.join(" "));
    }
    out.push_str("problems:\n");
    for name in ProblemSpec::BUILTIN_NAMES {
        let detail = match ProblemSpec::builtin(name).expect("builtin") {
            ProblemSpec::Quadratic { dim, condition } => format!("dim={dim} condition={condition}"),
            ProblemSpec::Rosenbrock => "dim=2".into(),
            ProblemSpec::Logreg {
                examples,
                features,
                seed,
            } => format!("examples={examples} features={features} seed={seed}"),
            ProblemSpec::Mlp { hidden, seed, .. } => format!("hidden={hidden} seed={seed}"),
        };
        let _ = writeln!(out, "  {name:<10} {detail}");
    }
    out
}
