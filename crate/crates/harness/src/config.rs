//! Experiment specification and its flat `key = value` config format.
//!
//! ```text
//! # comments start with '#'
//! optimizer = d2p2,dp2
//! dataset = synthetic
//! epochs = 20
//! sigma_eps = 3.0
//! seeds = 0,1,2,3,4
//! ```
//!
//! Command-line flags are applied through the same [`ExperimentSpec::set`]
//! after the file, so they override file values.

use std::fmt;
use std::path::{Path, PathBuf};

use d2p2_core::optimizer::BatchSampling;
use d2p2_core::{ClipMode, OptimizerConfig, ProjectionMode, ScheduleMode, Variant};

use crate::error::{HarnessError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ObjectiveKind {
    Logistic,
    Mlp,
    Quadratic,
}

#[derive(Debug, Clone, PartialEq)]
pub enum DatasetSource {
    Synthetic { n: usize, n_test: usize, d_feat: usize, separation: f64 },
    Csv { path: PathBuf, test_fraction: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepAxis {
    SigmaEps,
    BatchSize,
    ReductionRate,
}

impl SweepAxis {
    pub fn name(self) -> &'static str {
        match self {
            SweepAxis::SigmaEps => "sigma_eps",
            SweepAxis::BatchSize => "batch_size",
            SweepAxis::ReductionRate => "reduction_rate",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s.trim().replace('-', "_").as_str() {
            "sigma_eps" => Ok(SweepAxis::SigmaEps),
            "batch_size" | "batch" => Ok(SweepAxis::BatchSize),
            "reduction_rate" => Ok(SweepAxis::ReductionRate),
            other => Err(HarnessError::Spec(format!("unknown sweep axis '{other}' (expected sigma_eps|batch_size|reduction_rate)"))),
        }
    }

    /// Writes `value` into the matching knob of `cfg`.
    pub fn apply(self, cfg: &mut OptimizerConfig, value: f64) {
        match self {
            SweepAxis::SigmaEps => cfg.sigma_eps = value,
            SweepAxis::BatchSize => cfg.batch_size = value as usize,
            SweepAxis::ReductionRate => cfg.reduction_rate = value,
        }
    }
}

impl fmt::Display for SweepAxis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sweep {
    pub axis: SweepAxis,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSpec {
    pub optimizers: Vec<Variant>,
    /// Template for every run; `seed` and the swept knob are overwritten per run.
    pub base: OptimizerConfig,
    pub objective: ObjectiveKind,
    pub hidden: usize,
    pub dataset: DatasetSource,
    pub data_seed: u64,
    pub seeds: Vec<u64>,
    pub out: PathBuf,
    pub sweep: Option<Sweep>,
    /// Record per-epoch wall-clock time; off keeps output byte-reproducible.
    pub record_wall_time: bool,
}

impl Default for ExperimentSpec {
    fn default() -> Self {
        Self {
            optimizers: vec![Variant::D2p2],
            base: OptimizerConfig::default(),
            objective: ObjectiveKind::Logistic,
            hidden: 32,
            dataset: DatasetSource::Synthetic { n: 4000, n_test: 1000, d_feat: 50, separation: 4.0 },
            data_seed: 0,
            seeds: vec![0, 1, 2, 3, 4],
            out: PathBuf::from("d2p2-out"),
            sweep: None,
            record_wall_time: false,
        }
    }
}

fn parse_num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value.trim().parse().map_err(|_| HarnessError::Spec(format!("{key}: cannot parse '{value}'")))
}

fn parse_list<T: std::str::FromStr>(key: &str, value: &str) -> Result<Vec<T>> {
    value.split(',').filter(|s| !s.trim().is_empty()).map(|s| parse_num(key, s)).collect()
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value.trim() {
        "true" | "1" | "yes" | "on" => Ok(true),
        "false" | "0" | "no" | "off" => Ok(false),
        other => Err(HarnessError::Spec(format!("{key}: expected a boolean, got '{other}'"))),
    }
}

impl ExperimentSpec {
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
        let mut spec = Self::default();
        spec.apply_text(&text, &path.display().to_string())?;
        Ok(spec)
    }

    /// Applies `key = value` lines on top of the current values.
    pub fn apply_text(&mut self, text: &str, source_name: &str) -> Result<()> {
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let parse_err = |message: String| HarnessError::Parse { source_name: source_name.to_string(), line: i + 1, message };
            let (key, value) = line.split_once('=').ok_or_else(|| parse_err("expected 'key = value'".into()))?;
            self.set(key.trim(), value.trim()).map_err(|e| parse_err(e.to_string()))?;
        }
        Ok(())
    }

    /// Sets one knob by name. Dashes in `key` are treated as underscores.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let key = key.trim().trim_start_matches("--").replace('-', "_");
        let b = &mut self.base;
        match key.as_str() {
            "optimizer" | "optimizers" => {
                self.optimizers = value.split(',').map(|v| v.parse::<Variant>()).collect::<d2p2_core::Result<_>>()?;
            }
            "dataset" => self.set_dataset(value)?,
            "objective" => {
                self.objective = match value {
                    "logistic" => ObjectiveKind::Logistic,
                    "mlp" => ObjectiveKind::Mlp,
                    "quadratic" => ObjectiveKind::Quadratic,
                    other => return Err(HarnessError::Spec(format!("unknown objective '{other}'"))),
                }
            }
            "hidden" => self.hidden = parse_num(&key, value)?,
            "epochs" => b.epochs = parse_num(&key, value)?,
            "batch_size" => b.batch_size = parse_num(&key, value)?,
            "lr" | "alpha" => b.alpha = parse_num(&key, value)?,
            "sigma_eps" => b.sigma_eps = parse_num(&key, value)?,
            "gamma" => b.clip.gamma = parse_num(&key, value)?,
            "clip_scale" => b.clip.scale = parse_num(&key, value)?,
            "clip_mode" => {
                b.clip.mode = match value {
                    "automatic" => ClipMode::Automatic,
                    "threshold" => ClipMode::Threshold,
                    other => return Err(HarnessError::Spec(format!("unknown clip mode '{other}'"))),
                }
            }
            "reduction_rate" => b.reduction_rate = parse_num(&key, value)?,
            "sigma_a" => b.sigma_a = parse_num(&key, value)?,
            "delta" => b.delta = parse_num(&key, value)?,
            "projection" => {
                b.projection_override = match value {
                    "gaussian" => Some(ProjectionMode::Gaussian),
                    "identity" => Some(ProjectionMode::Identity),
                    "default" => None,
                    other => return Err(HarnessError::Spec(format!("unknown projection mode '{other}'"))),
                }
            }
            "schedule" => {
                b.schedule_override = match value {
                    "static" => Some(ScheduleMode::Static),
                    "dynamic" => Some(ScheduleMode::Dynamic),
                    "default" => None,
                    other => return Err(HarnessError::Spec(format!("unknown noise schedule '{other}'"))),
                }
            }
            "layerwise" => b.layerwise_projection = parse_bool(&key, value)?,
            "sampling" => {
                b.sampling = match value {
                    "uniform" => BatchSampling::Uniform,
                    "partition" => BatchSampling::Partition,
                    other => return Err(HarnessError::Spec(format!("unknown sampling mode '{other}'"))),
                }
            }
            "eval_subset" => b.eval_subset = parse_num(&key, value)?,
            "seeds" => self.seeds = parse_list(&key, value)?,
            "data_seed" => self.data_seed = parse_num(&key, value)?,
            "out" => self.out = PathBuf::from(value),
            "n" | "n_train" => *self.synthetic_mut(&key)?.0 = parse_num(&key, value)?,
            "n_test" => *self.synthetic_mut(&key)?.1 = parse_num(&key, value)?,
            "d_feat" => *self.synthetic_mut(&key)?.2 = parse_num(&key, value)?,
            "separation" => *self.synthetic_mut(&key)?.3 = parse_num(&key, value)?,
            "test_fraction" => match &mut self.dataset {
                DatasetSource::Csv { test_fraction, .. } => *test_fraction = parse_num(&key, value)?,
                _ => return Err(HarnessError::Spec("test_fraction applies to csv datasets only".into())),
            },
            "sweep_axis" | "axis" => {
                let axis = SweepAxis::parse(value)?;
                let values = self.sweep.take().map(|s| s.values).unwrap_or_default();
                self.sweep = Some(Sweep { axis, values });
            }
            "sweep_values" | "values" => {
                let values = parse_list(&key, value)?;
                match &mut self.sweep {
                    Some(s) => s.values = values,
                    None => self.sweep = Some(Sweep { axis: SweepAxis::SigmaEps, values }),
                }
            }
            "wall_time" => self.record_wall_time = parse_bool(&key, value)?,
            other => return Err(HarnessError::Spec(format!("unknown key '{other}'"))),
        }
        Ok(())
    }

    fn set_dataset(&mut self, value: &str) -> Result<()> {
        if value == "synthetic" {
            if !matches!(self.dataset, DatasetSource::Synthetic { .. }) {
                self.dataset = Self::default().dataset;
            }
        } else if let Some(path) = value.strip_prefix("csv:") {
            self.dataset = DatasetSource::Csv { path: PathBuf::from(path), test_fraction: 0.2 };
        } else {
            return Err(HarnessError::Spec(format!("dataset must be 'synthetic' or 'csv:<path>', got '{value}'")));
        }
        Ok(())
    }

    fn synthetic_mut(&mut self, key: &str) -> Result<(&mut usize, &mut usize, &mut usize, &mut f64)> {
        match &mut self.dataset {
            DatasetSource::Synthetic { n, n_test, d_feat, separation } => Ok((n, n_test, d_feat, separation)),
            _ => Err(HarnessError::Spec(format!("{key} applies to the synthetic dataset only"))),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.seeds.is_empty() {
            return Err(HarnessError::Spec("seed list must be nonempty".into()));
        }
        if self.optimizers.is_empty() {
            return Err(HarnessError::Spec("optimizer list must be nonempty".into()));
        }
        if self.base.epochs == 0 {
            return Err(HarnessError::Spec("epochs must be positive".into()));
        }
        if self.objective == ObjectiveKind::Mlp && self.hidden == 0 {
            return Err(HarnessError::Spec("mlp hidden width must be positive".into()));
        }
        if let Some(sweep) = &self.sweep {
            if sweep.values.is_empty() {
                return Err(HarnessError::Spec(format!("sweep over {} has no values", sweep.axis)));
            }
            for &v in &sweep.values {
                let ok = match sweep.axis {
                    SweepAxis::SigmaEps => v.is_finite() && v > 0.0,
                    SweepAxis::BatchSize => v >= 1.0 && v.fract() == 0.0,
                    SweepAxis::ReductionRate => v > 0.0 && v < 1.0,
                };
                if !ok {
                    return Err(HarnessError::Spec(format!("sweep value {v} is not valid for {}", sweep.axis)));
                }
            }
        }
        for &variant in &self.optimizers {
            OptimizerConfig { variant, ..self.base.clone() }.validate()?;
        }
        Ok(())
    }

    /// Sweep points as `(value, label)`; a single unlabeled point without a sweep.
    pub fn sweep_points(&self) -> Vec<Option<f64>> {
        match &self.sweep {
            Some(s) => s.values.iter().map(|&v| Some(v)).collect(),
            None => vec![None],
        }
    }
}
