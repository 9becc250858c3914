//! Runs an experiment spec over every (optimizer, sweep point, seed) and
//! writes per-run, aggregate and report CSVs.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use d2p2_core::{Dataset, EpochMetrics, Objective, OptimizerConfig, Trainer, Variant};
use rayon::prelude::*;

use crate::config::{DatasetSource, ExperimentSpec, ObjectiveKind, SweepAxis};
use crate::data::{generate_synthetic, load_csv, split_train_test};
use crate::error::{HarnessError, Result};

pub const METRICS_HEADER: &str = "# d2p2-metrics v1";
pub const METRICS_COLUMNS: &str = "seed,epoch,step,train_loss,test_accuracy,epsilon,sigma_eps_k,wall_ms";
pub const AGGREGATE_COLUMNS: &str = "variant,sweep_axis,sweep_value,epoch,step,seeds,\
train_loss_mean,train_loss_min,train_loss_max,\
test_accuracy_mean,test_accuracy_min,test_accuracy_max,\
epsilon_mean,epsilon_min,epsilon_max,sigma_eps_k";
pub const REPORT_COLUMNS: &str = "variant,sweep_axis,sweep_value,final_test_accuracy_mean,final_epsilon_mean";

/// Environment variable capping how many runs execute at once.
pub const THREADS_ENV: &str = "D2P2_THREADS";

#[derive(Debug, Clone, PartialEq)]
pub struct MetricsRow {
    pub seed: u64,
    pub epoch: usize,
    pub step: u64,
    pub train_loss: f64,
    pub test_accuracy: Option<f64>,
    pub epsilon: f64,
    pub sigma_eps_k: f64,
    pub wall_ms: u64,
}

impl MetricsRow {
    fn from_epoch(seed: u64, m: EpochMetrics, wall_ms: u64) -> Self {
        Self {
            seed,
            epoch: m.epoch,
            step: m.step,
            train_loss: m.train_loss,
            test_accuracy: m.test_accuracy,
            epsilon: m.epsilon,
            sigma_eps_k: m.sigma_eps_k,
            wall_ms,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub variant: Variant,
    pub sweep_value: Option<f64>,
    pub seed: u64,
    pub rows: Vec<MetricsRow>,
    pub note: Option<String>,
}

/// `(mean, min, max)` over seeds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Spread {
    pub mean: f64,
    pub min: f64,
    pub max: f64,
}

impl Spread {
    fn of(values: &[f64]) -> Self {
        let min = values.iter().copied().fold(f64::INFINITY, f64::min);
        let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        // Seed-independent columns (epsilon) must not pick up summation error.
        let mean = if min == max { min } else { values.iter().sum::<f64>() / values.len() as f64 };
        Self { mean, min, max }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AggregateRow {
    pub variant: Variant,
    pub sweep_axis: Option<SweepAxis>,
    pub sweep_value: Option<f64>,
    pub epoch: usize,
    pub step: u64,
    pub seeds: usize,
    pub train_loss: Spread,
    pub test_accuracy: Option<Spread>,
    pub epsilon: Spread,
    pub sigma_eps_k: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub variant: Variant,
    pub sweep_axis: Option<SweepAxis>,
    pub sweep_value: Option<f64>,
    pub final_accuracy: Option<f64>,
    pub final_epsilon: f64,
}

#[derive(Debug)]
pub struct RunSummary {
    pub run_files: Vec<PathBuf>,
    pub aggregate_file: PathBuf,
    pub report_file: PathBuf,
    pub runs: Vec<RunOutput>,
    pub aggregates: Vec<AggregateRow>,
    pub report: Vec<ReportRow>,
}

/// Objective plus train/test split for a spec.
pub fn prepare(spec: &ExperimentSpec) -> Result<(Objective, Dataset, Dataset)> {
    let (train, test) = match &spec.dataset {
        DatasetSource::Synthetic { n, n_test, d_feat, separation } => {
            let all = generate_synthetic(n + n_test, *d_feat, *separation, spec.data_seed)?;
            if *n == 0 || *n_test == 0 {
                return Err(HarnessError::Spec("synthetic train and test sizes must be positive".into()));
            }
            let train_idx: Vec<usize> = (0..*n).collect();
            let test_idx: Vec<usize> = (*n..n + n_test).collect();
            (all.select(&train_idx)?, all.select(&test_idx)?)
        }
        DatasetSource::Csv { path, test_fraction } => split_train_test(&load_csv(path)?, *test_fraction, spec.data_seed)?,
    };
    let width = train.width();
    let obj = match spec.objective {
        ObjectiveKind::Logistic => Objective::Logistic { dim: width },
        ObjectiveKind::Quadratic => Objective::quadratic(vec![0.0; width]),
        ObjectiveKind::Mlp => {
            let classes = train
                .num_classes()
                .ok_or_else(|| HarnessError::Spec("mlp objective needs integer class labels".into()))?;
            Objective::mlp(width, spec.hidden, classes)
        }
    };
    obj.validate()?;
    Ok((obj, train, test))
}

fn run_label(variant: Variant, sweep: Option<(SweepAxis, f64)>, seed: u64) -> String {
    match sweep {
        Some((axis, v)) => format!("{variant}_{axis}{v}_seed{seed}"),
        None => format!("{variant}_seed{seed}"),
    }
}

/// Trains one configuration and collects per-epoch rows.
pub fn run_one(cfg: OptimizerConfig, obj: &Objective, train: &Dataset, test: &Dataset, wall_time: bool) -> Result<(Vec<MetricsRow>, Option<String>)> {
    let seed = cfg.seed;
    let epochs = cfg.epochs;
    let mut trainer = Trainer::new(cfg, obj, train)?;
    let note = trainer.step_size_note();
    let mut rows = Vec::with_capacity(epochs);
    for _ in 0..epochs {
        let start = Instant::now();
        trainer.run_epoch()?;
        let wall_ms = if wall_time { start.elapsed().as_millis() as u64 } else { 0 };
        rows.push(MetricsRow::from_epoch(seed, trainer.evaluate(test)?, wall_ms));
    }
    Ok((rows, note))
}

fn thread_count() -> Option<usize> {
    std::env::var(THREADS_ENV).ok().and_then(|v| v.trim().parse::<usize>().ok()).filter(|&n| n > 0)
}

/// Runs every (optimizer, sweep point, seed) combination in spec order.
pub fn execute(spec: &ExperimentSpec) -> Result<Vec<RunOutput>> {
    spec.validate()?;
    let (obj, train, test) = prepare(spec)?;
    let axis = spec.sweep.as_ref().map(|s| s.axis);
    let mut jobs = Vec::new();
    for &variant in &spec.optimizers {
        for point in spec.sweep_points() {
            for &seed in &spec.seeds {
                jobs.push((variant, point, seed));
            }
        }
    }
    let work = |&(variant, point, seed): &(Variant, Option<f64>, u64)| -> Result<RunOutput> {
        let mut cfg = OptimizerConfig { variant, seed, ..spec.base.clone() };
        if let (Some(axis), Some(v)) = (axis, point) {
            axis.apply(&mut cfg, v);
        }
        let label = run_label(variant, axis.zip(point), seed);
        let (rows, note) = run_one(cfg, &obj, &train, &test, spec.record_wall_time)
            .map_err(|e| HarnessError::Run { run: label, source: Box::new(e) })?;
        Ok(RunOutput { variant, sweep_value: point, seed, rows, note })
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(thread_count().unwrap_or(0))
        .build()
        .map_err(|e| HarnessError::Spec(format!("cannot start worker pool: {e}")))?;
    pool.install(|| jobs.par_iter().map(work).collect())
}

/// Per-epoch mean/min/max across seeds for every (optimizer, sweep point).
pub fn aggregate(spec: &ExperimentSpec, runs: &[RunOutput]) -> Vec<AggregateRow> {
    let axis = spec.sweep.as_ref().map(|s| s.axis);
    let mut out = Vec::new();
    for &variant in &spec.optimizers {
        for point in spec.sweep_points() {
            let group: Vec<&RunOutput> = runs.iter().filter(|r| r.variant == variant && r.sweep_value == point).collect();
            let Some(first) = group.first() else { continue };
            for (e, head) in first.rows.iter().enumerate() {
                let col = |f: &dyn Fn(&MetricsRow) -> f64| -> Vec<f64> { group.iter().map(|r| f(&r.rows[e])).collect() };
                let acc: Option<Vec<f64>> = group.iter().map(|r| r.rows[e].test_accuracy).collect();
                out.push(AggregateRow {
                    variant,
                    sweep_axis: axis,
                    sweep_value: point,
                    epoch: head.epoch,
                    step: head.step,
                    seeds: group.len(),
                    train_loss: Spread::of(&col(&|m| m.train_loss)),
                    test_accuracy: acc.map(|a| Spread::of(&a)),
                    epsilon: Spread::of(&col(&|m| m.epsilon)),
                    sigma_eps_k: head.sigma_eps_k,
                });
            }
        }
    }
    out
}

/// Final-epoch accuracy and privacy loss per (optimizer, sweep point).
pub fn sweep_report(aggregates: &[AggregateRow]) -> Vec<ReportRow> {
    let mut out: Vec<ReportRow> = Vec::new();
    for row in aggregates {
        let entry = ReportRow {
            variant: row.variant,
            sweep_axis: row.sweep_axis,
            sweep_value: row.sweep_value,
            final_accuracy: row.test_accuracy.map(|s| s.mean),
            final_epsilon: row.epsilon.mean,
        };
        match out.last_mut() {
            Some(last) if last.variant == row.variant && last.sweep_value == row.sweep_value => *last = entry,
            _ => out.push(entry),
        }
    }
    out
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(String::new, |x| x.to_string())
}

fn axis_name(axis: Option<SweepAxis>) -> &'static str {
    axis.map_or("none", SweepAxis::name)
}

pub fn metrics_csv(rows: &[MetricsRow]) -> String {
    let mut s = format!("{METRICS_HEADER}\n{METRICS_COLUMNS}\n");
    for r in rows {
        let acc = r.test_accuracy.map_or_else(|| "NaN".to_string(), |a| a.to_string());
        let _ = writeln!(s, "{},{},{},{},{},{},{},{}", r.seed, r.epoch, r.step, r.train_loss, acc, r.epsilon, r.sigma_eps_k, r.wall_ms);
    }
    s
}

pub fn aggregate_csv(rows: &[AggregateRow]) -> String {
    let mut s = format!("{METRICS_HEADER}\n{AGGREGATE_COLUMNS}\n");
    for r in rows {
        let acc = r.test_accuracy.map_or_else(|| "NaN,NaN,NaN".to_string(), |a| format!("{},{},{}", a.mean, a.min, a.max));
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            r.variant,
            axis_name(r.sweep_axis),
            opt(r.sweep_value),
            r.epoch,
            r.step,
            r.seeds,
            r.train_loss.mean,
            r.train_loss.min,
            r.train_loss.max,
            acc,
            r.epsilon.mean,
            r.epsilon.min,
            r.epsilon.max,
            r.sigma_eps_k
        );
    }
    s
}

pub fn report_csv(rows: &[ReportRow]) -> String {
    let mut s = format!("{METRICS_HEADER}\n{REPORT_COLUMNS}\n");
    for r in rows {
        let acc = r.final_accuracy.map_or_else(|| "NaN".to_string(), |a| a.to_string());
        let _ = writeln!(s, "{},{},{},{},{}", r.variant, axis_name(r.sweep_axis), opt(r.sweep_value), acc, r.final_epsilon);
    }
    s
}

fn write(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| HarnessError::io(path, e))
}

/// Executes the spec and writes `runs/*.csv`, `aggregate.csv` and `report.csv` under `spec.out`.
pub fn run(spec: &ExperimentSpec) -> Result<RunSummary> {
    let runs = execute(spec)?;
    let run_dir = spec.out.join("runs");
    std::fs::create_dir_all(&run_dir).map_err(|e| HarnessError::io(&run_dir, e))?;
    let axis = spec.sweep.as_ref().map(|s| s.axis);
    let mut run_files = Vec::with_capacity(runs.len());
    for r in &runs {
        let path = run_dir.join(format!("{}.csv", run_label(r.variant, axis.zip(r.sweep_value), r.seed)));
        write(&path, &metrics_csv(&r.rows))?;
        run_files.push(path);
    }
    let aggregates = aggregate(spec, &runs);
    let report = sweep_report(&aggregates);
    let aggregate_file = spec.out.join("aggregate.csv");
    write(&aggregate_file, &aggregate_csv(&aggregates))?;
    let report_file = spec.out.join("report.csv");
    write(&report_file, &report_csv(&report))?;
    Ok(RunSummary { run_files, aggregate_file, report_file, runs, aggregates, report })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(seed: u64, epoch: usize, loss: f64, acc: f64, eps: f64) -> MetricsRow {
        MetricsRow { seed, epoch, step: epoch as u64 * 10, train_loss: loss, test_accuracy: Some(acc), epsilon: eps, sigma_eps_k: 1.0, wall_ms: 0 }
    }

    #[test]
    fn aggregate_is_exact_order_statistics() {
        let spec = ExperimentSpec { seeds: vec![0, 1, 2], ..Default::default() };
        let runs: Vec<RunOutput> = [(0, 0.5, 0.7), (1, 0.25, 0.9), (2, 1.0, 0.8)]
            .into_iter()
            .map(|(seed, loss, acc)| RunOutput {
                variant: Variant::D2p2,
                sweep_value: None,
                seed,
                rows: vec![row(seed, 1, loss, acc, 0.3), row(seed, 2, loss / 2.0, acc, 0.4)],
                note: None,
            })
            .collect();
        let agg = aggregate(&spec, &runs);
        assert_eq!(agg.len(), 2);
        assert_eq!(agg[0].train_loss, Spread { mean: 1.75 / 3.0, min: 0.25, max: 1.0 });
        assert_eq!(agg[0].test_accuracy.unwrap().min, 0.7);
        assert_eq!(agg[0].test_accuracy.unwrap().max, 0.9);
        let rep = sweep_report(&agg);
        assert_eq!(rep.len(), 1);
        assert_eq!(rep[0].final_epsilon, 0.4);
    }

    #[test]
    fn csv_shapes() {
        let text = metrics_csv(&[row(3, 1, 0.5, 0.75, f64::INFINITY)]);
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines, vec![METRICS_HEADER, METRICS_COLUMNS, "3,1,10,0.5,0.75,inf,1,0"]);
    }
}
