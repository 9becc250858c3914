//! The training loop and its variants.
//!
//! One step draws a minibatch, clips each per-sample gradient, averages,
//! optionally down-projects with a fresh Gaussian matrix, adds noise in the
//! reduced space, lifts back up and takes a plain gradient step:
//!
//! ```text
//! g~ = A ( (1/sqrt(p)) A^T g + eps_k ),   x <- x - alpha g~
//! ```
//!
//! | variant | projection | noise schedule | clipping |
//! |---------|------------|----------------|----------|
//! | d2p2    | gaussian   | dynamic        | on       |
//! | d2p     | identity   | dynamic        | on       |
//! | dp2     | gaussian   | static         | on       |
//! | dpsgd   | identity   | static         | on       |
//! | sgd     | identity   | none           | off      |

use std::fmt;
use std::str::FromStr;

use rand::seq::{index, SliceRandom};
use rand::Rng;

use crate::accountant::{MechanismParams, PrivacyLedger};
use crate::clip::{self, ClipConfig};
use crate::error::{config, Error, Result};
use crate::model::{Dataset, Objective, ParamVector};
use crate::noise::{NoiseSchedule, ScheduleMode};
use crate::project::{reduced_dim, sample_operator, ProjectionMode, ProjectionOperator};
use crate::rng::{keyed_stream, keyed_stream_with_lane, Purpose};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Variant {
    D2p2,
    D2p,
    Dp2,
    Dpsgd,
    Sgd,
}

impl Variant {
    pub const ALL: [Variant; 5] = [Variant::D2p2, Variant::D2p, Variant::Dp2, Variant::Dpsgd, Variant::Sgd];

    pub fn name(self) -> &'static str {
        match self {
            Variant::D2p2 => "d2p2",
            Variant::D2p => "d2p",
            Variant::Dp2 => "dp2",
            Variant::Dpsgd => "dpsgd",
            Variant::Sgd => "sgd",
        }
    }

    pub fn is_private(self) -> bool {
        self != Variant::Sgd
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Variant::ALL
            .into_iter()
            .find(|v| v.name().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| Error::Config(format!("unknown optimizer variant '{s}' (expected d2p2|d2p|dp2|dpsgd|sgd)")))
    }
}

/// How minibatches are drawn.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum BatchSampling {
    /// Fresh uniform sample without replacement every step.
    #[default]
    Uniform,
    /// Shuffle once per epoch into `floor(n/B)` batches, then pick one uniformly each step.
    Partition,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerConfig {
    pub variant: Variant,
    pub alpha: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub clip: ClipConfig,
    pub sigma_eps: f64,
    /// Fraction of dimensions removed by the projection, in `[0, 1)`.
    pub reduction_rate: f64,
    pub sigma_a: f64,
    pub seed: u64,
    pub delta: f64,
    pub projection_override: Option<ProjectionMode>,
    pub schedule_override: Option<ScheduleMode>,
    /// Project each parameter block separately instead of the whole vector.
    pub layerwise_projection: bool,
    pub sampling: BatchSampling,
    /// Number of leading training rows used for the reported training loss.
    pub eval_subset: usize,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            variant: Variant::D2p2,
            alpha: 0.01,
            epochs: 40,
            batch_size: 256,
            clip: ClipConfig::default(),
            sigma_eps: 3.0,
            reduction_rate: 0.7,
            sigma_a: 1.0,
            seed: 0,
            delta: 1e-5,
            projection_override: None,
            schedule_override: None,
            layerwise_projection: false,
            sampling: BatchSampling::Uniform,
            eval_subset: 1000,
        }
    }
}

/// Resolved per-step pipeline.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Pipeline {
    pub projection: ProjectionMode,
    /// `None` means no noise is added.
    pub schedule: Option<ScheduleMode>,
    pub clip: bool,
}

/// Resolves a variant and its overrides into a pipeline.
///
/// d2p forces identity projection, dp2 forces the static schedule, dpsgd
/// forces both and sgd forces everything off; an override that contradicts a
/// forced component is rejected.
pub fn variant_dispatch(cfg: &OptimizerConfig) -> Result<Pipeline> {
    use ProjectionMode::*;
    use ScheduleMode::*;
    let (proj, sched) = (cfg.projection_override, cfg.schedule_override);
    let conflict = |what: &str| config(format!("variant {} cannot take override {what}", cfg.variant));
    let pipeline = match cfg.variant {
        Variant::Sgd => {
            if proj.is_some() || sched.is_some() {
                return conflict("(sgd has no private pipeline)");
            }
            Pipeline { projection: Identity, schedule: None, clip: false }
        }
        Variant::D2p2 => Pipeline { projection: proj.unwrap_or(Gaussian), schedule: Some(sched.unwrap_or(Dynamic)), clip: true },
        Variant::D2p => {
            if proj == Some(Gaussian) {
                return conflict("projection=gaussian");
            }
            Pipeline { projection: Identity, schedule: Some(sched.unwrap_or(Dynamic)), clip: true }
        }
        Variant::Dp2 => {
            if sched == Some(Dynamic) {
                return conflict("schedule=dynamic");
            }
            Pipeline { projection: proj.unwrap_or(Gaussian), schedule: Some(Static), clip: true }
        }
        Variant::Dpsgd => {
            if proj == Some(Gaussian) || sched == Some(Dynamic) {
                return conflict(if proj == Some(Gaussian) { "projection=gaussian" } else { "schedule=dynamic" });
            }
            Pipeline { projection: Identity, schedule: Some(Static), clip: true }
        }
    };
    Ok(pipeline)
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha.is_finite() && self.alpha > 0.0) {
            return config(format!("step size must be positive, got {}", self.alpha));
        }
        if self.batch_size == 0 {
            return config("batch size must be positive");
        }
        if !(self.sigma_eps.is_finite() && self.sigma_eps >= 0.0) {
            return config(format!("sigma_eps must be nonnegative, got {}", self.sigma_eps));
        }
        if !(0.0..1.0).contains(&self.reduction_rate) {
            return config(format!("reduction rate must lie in [0, 1), got {}", self.reduction_rate));
        }
        if !(self.sigma_a.is_finite() && self.sigma_a > 0.0) {
            return config(format!("sigma_A must be positive, got {}", self.sigma_a));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return config(format!("delta must lie in (0, 1), got {}", self.delta));
        }
        self.clip.validate()?;
        variant_dispatch(self)?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainState {
    pub x: ParamVector,
    /// Steps taken so far.
    pub k: u64,
    /// Completed epochs.
    pub epoch: usize,
    /// `None` for the non-private baseline.
    pub ledger: Option<PrivacyLedger>,
}

/// Per-epoch metrics.
#[derive(Debug, Clone, PartialEq)]
pub struct EpochMetrics {
    pub epoch: usize,
    pub step: u64,
    pub train_loss: f64,
    /// `None` for objectives without a classification head.
    pub test_accuracy: Option<f64>,
    /// `+inf` for the non-private baseline or when no order is admissible.
    pub epsilon: f64,
    /// Noise standard deviation used at the epoch's last step.
    pub sigma_eps_k: f64,
}

pub type MetricsSeries = Vec<EpochMetrics>;

/// Drives training for one configuration over one dataset.
#[derive(Debug)]
pub struct Trainer<'a> {
    cfg: OptimizerConfig,
    pipeline: Pipeline,
    obj: &'a Objective,
    data: &'a Dataset,
    mechanism: Option<MechanismParams>,
    steps_per_epoch: usize,
    eval_rows: Vec<usize>,
    epoch_order: Option<(usize, Vec<usize>)>,
    state: TrainState,
}

impl<'a> Trainer<'a> {
    pub fn new(cfg: OptimizerConfig, obj: &'a Objective, data: &'a Dataset) -> Result<Self> {
        let x = obj.init_params(&mut keyed_stream(cfg.seed, Purpose::Init, 0));
        Self::with_initial(cfg, obj, data, x)
    }

    /// Starts from an explicit iterate instead of the default initialization.
    pub fn with_initial(cfg: OptimizerConfig, obj: &'a Objective, data: &'a Dataset, x: ParamVector) -> Result<Self> {
        cfg.validate()?;
        obj.validate()?;
        obj.check_compatible(&x, data)?;
        let pipeline = variant_dispatch(&cfg)?;
        if cfg.batch_size > data.len() {
            return config(format!("batch size {} exceeds dataset size {}", cfg.batch_size, data.len()));
        }
        let mechanism = match pipeline.schedule {
            Some(mode) => Some(MechanismParams::new(data.len() as u64, cfg.batch_size as u64, cfg.sigma_eps, mode, cfg.delta)?),
            None => None,
        };
        let steps_per_epoch = data.len() / cfg.batch_size;
        let eval_rows = (0..data.len().min(cfg.eval_subset.max(1))).collect();
        let state = TrainState { x, k: 0, epoch: 0, ledger: mechanism.map(|_| PrivacyLedger::new()) };
        Ok(Self { cfg, pipeline, obj, data, mechanism, steps_per_epoch, eval_rows, epoch_order: None, state })
    }

    pub fn state(&self) -> &TrainState {
        &self.state
    }

    pub fn pipeline(&self) -> Pipeline {
        self.pipeline
    }

    pub fn config(&self) -> &OptimizerConfig {
        &self.cfg
    }

    pub fn steps_per_epoch(&self) -> usize {
        self.steps_per_epoch
    }

    fn schedule(&self) -> Option<NoiseSchedule> {
        self.pipeline.schedule.map(|mode| NoiseSchedule { sigma_eps: self.cfg.sigma_eps, mode })
    }

    fn draw_batch(&mut self, k: u64) -> Vec<usize> {
        let (n, b, seed) = (self.data.len(), self.cfg.batch_size, self.cfg.seed);
        let mut rng = keyed_stream(seed, Purpose::Sampling, k);
        match self.cfg.sampling {
            BatchSampling::Uniform => index::sample(&mut rng, n, b).into_vec(),
            BatchSampling::Partition => {
                let epoch = ((k - 1) / self.steps_per_epoch as u64) as usize;
                if self.epoch_order.as_ref().is_none_or(|(e, _)| *e != epoch) {
                    let mut order: Vec<usize> = (0..n).collect();
                    order.shuffle(&mut keyed_stream(seed, Purpose::Shuffle, epoch as u64));
                    self.epoch_order = Some((epoch, order));
                }
                let j = rng.random_range(0..self.steps_per_epoch);
                let order = &self.epoch_order.as_ref().expect("set above").1;
                order[j * b..(j + 1) * b].to_vec()
            }
        }
    }

    /// Projects, perturbs and lifts the averaged gradient.
    fn privatize(&self, g: &[f64], k: u64) -> Result<Vec<f64>> {
        let Some(schedule) = self.schedule() else {
            return Ok(g.to_vec());
        };
        let seed = self.cfg.seed;
        let mut noise_rng = keyed_stream(seed, Purpose::Noise, k);
        match self.pipeline.projection {
            ProjectionMode::Identity => {
                let op = ProjectionOperator::identity(g.len());
                let mut r = op.project_down(g)?;
                let eps = schedule.sample(k, r.len(), &mut noise_rng)?;
                r.iter_mut().zip(eps).for_each(|(a, e)| *a += e);
                op.project_up(&r)
            }
            ProjectionMode::Gaussian => {
                let blocks = if self.cfg.layerwise_projection { self.obj.segments() } else { std::iter::once(0..g.len()).collect() };
                let mut out = Vec::with_capacity(g.len());
                for (lane, block) in blocks.into_iter().enumerate() {
                    let d = block.len();
                    let p = reduced_dim(d, self.cfg.reduction_rate)?;
                    let mut proj_rng = keyed_stream_with_lane(seed, Purpose::Projection, k, lane as u64);
                    let op = sample_operator(d, p, self.cfg.sigma_a, &mut proj_rng)?;
                    let mut r = op.project_down(&g[block])?;
                    let eps = schedule.sample(k, p, &mut noise_rng)?;
                    r.iter_mut().zip(eps).for_each(|(a, e)| *a += e);
                    out.extend(op.project_up(&r)?);
                }
                Ok(out)
            }
        }
    }

    /// Takes one optimizer step.
    pub fn step(&mut self) -> Result<()> {
        let k = self.state.k + 1;
        let batch = self.draw_batch(k);
        let x = &self.state.x;
        let g = if self.pipeline.clip {
            let grads = batch.iter().map(|&i| self.obj.per_sample_gradient(x, self.data, i)).collect::<Result<Vec<_>>>();
            let grads = grads.map_err(|e| with_step(e, k))?;
            clip::clip_batch(&grads, &self.cfg.clip).map_err(|e| with_step(e, k))?
        } else {
            self.obj.mean_gradient(x, self.data, &batch).map_err(|e| with_step(e, k))?
        };
        let update = self.privatize(&g, k)?;
        let alpha = self.cfg.alpha;
        let next: Vec<f64> = x.as_slice().iter().zip(&update).map(|(xi, u)| xi - alpha * u).collect();
        if let Some(bad) = next.iter().position(|v| !v.is_finite()) {
            return Err(Error::Numeric(format!("step {k}: update produced a non-finite parameter at coordinate {bad}")));
        }
        if let (Some(ledger), Some(mech)) = (self.state.ledger.as_mut(), self.mechanism.as_ref()) {
            ledger.accumulate_step(mech, k)?;
        }
        self.state.x = ParamVector::new(next)?;
        self.state.k = k;
        Ok(())
    }

    /// Runs `floor(n/B)` steps.
    pub fn run_epoch(&mut self) -> Result<()> {
        for _ in 0..self.steps_per_epoch {
            self.step()?;
        }
        self.state.epoch += 1;
        Ok(())
    }

    /// Current privacy loss, `+inf` when not private or no order is admissible.
    pub fn epsilon(&self) -> Result<f64> {
        match &self.state.ledger {
            None => Ok(f64::INFINITY),
            Some(ledger) => match ledger.epsilon_at_delta(self.cfg.delta) {
                Ok(c) => Ok(c.epsilon),
                Err(Error::NoAdmissibleOrder) => Ok(f64::INFINITY),
                Err(e) => Err(e),
            },
        }
    }

    pub fn evaluate(&self, test: &Dataset) -> Result<EpochMetrics> {
        let sigma_eps_k = match self.schedule() {
            Some(s) => s.std_at(self.state.k.max(1))?,
            None => 0.0,
        };
        Ok(EpochMetrics {
            epoch: self.state.epoch,
            step: self.state.k,
            train_loss: self.obj.mean_loss(&self.state.x, self.data, &self.eval_rows)?,
            test_accuracy: self.obj.accuracy(&self.state.x, test)?,
            epsilon: self.epsilon()?,
            sigma_eps_k,
        })
    }

    /// Step-size advice: `alpha <= 1/(2L)` when a smoothness constant is known.
    pub fn step_size_note(&self) -> Option<String> {
        let lipschitz = match self.obj {
            Objective::Quadratic { curvature, .. } => *curvature,
            Objective::Logistic { .. } => {
                (0..self.data.len()).map(|i| self.data.row(i).iter().map(|a| a * a).sum::<f64>()).fold(0.0, f64::max) / 4.0
            }
            _ => return Some("smoothness constant unknown for this objective; alpha <= 1/(2L) not checked".into()),
        };
        let limit = 1.0 / (2.0 * lipschitz);
        (self.cfg.alpha > limit).then(|| format!("alpha = {} exceeds 1/(2L) = {limit:.4}", self.cfg.alpha))
    }
}

fn with_step(e: Error, k: u64) -> Error {
    match e {
        Error::Numeric(what) => Error::Numeric(format!("step {k}: {what}")),
        other => other,
    }
}

/// Trains for `cfg.epochs` epochs and reports metrics after each one.
pub fn train(cfg: &OptimizerConfig, obj: &Objective, train_data: &Dataset, test_data: &Dataset) -> Result<MetricsSeries> {
    let mut trainer = Trainer::new(cfg.clone(), obj, train_data)?;
    let mut series = Vec::with_capacity(cfg.epochs);
    for _ in 0..cfg.epochs {
        trainer.run_epoch()?;
        series.push(trainer.evaluate(test_data)?);
    }
    Ok(series)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::accountant::epsilon_after;

    fn one_dim_quadratic() -> (Objective, Dataset) {
        (Objective::quadratic(vec![0.0]), Dataset::new(vec![0.0], 1, vec![0.0], None).unwrap())
    }

    #[test]
    fn dispatch_table() {
        let pipe = |variant| variant_dispatch(&OptimizerConfig { variant, ..Default::default() }).unwrap();
        assert_eq!(pipe(Variant::D2p2), Pipeline { projection: ProjectionMode::Gaussian, schedule: Some(ScheduleMode::Dynamic), clip: true });
        assert_eq!(pipe(Variant::D2p), Pipeline { projection: ProjectionMode::Identity, schedule: Some(ScheduleMode::Dynamic), clip: true });
        assert_eq!(pipe(Variant::Dp2), Pipeline { projection: ProjectionMode::Gaussian, schedule: Some(ScheduleMode::Static), clip: true });
        assert_eq!(pipe(Variant::Dpsgd), Pipeline { projection: ProjectionMode::Identity, schedule: Some(ScheduleMode::Static), clip: true });
        assert_eq!(pipe(Variant::Sgd), Pipeline { projection: ProjectionMode::Identity, schedule: None, clip: false });
    }

    #[test]
    fn contradictory_overrides_rejected() {
        let bad = [
            (Variant::D2p, Some(ProjectionMode::Gaussian), None),
            (Variant::Dp2, None, Some(ScheduleMode::Dynamic)),
            (Variant::Dpsgd, Some(ProjectionMode::Gaussian), None),
            (Variant::Sgd, Some(ProjectionMode::Identity), None),
        ];
        for (variant, projection_override, schedule_override) in bad {
            let cfg = OptimizerConfig { variant, projection_override, schedule_override, ..Default::default() };
            assert!(matches!(variant_dispatch(&cfg), Err(Error::Config(_))), "{variant}");
        }
        let ok = OptimizerConfig { variant: Variant::Dp2, projection_override: Some(ProjectionMode::Identity), ..Default::default() };
        assert_eq!(variant_dispatch(&ok).unwrap().projection, ProjectionMode::Identity);
    }

    #[test]
    fn variant_parsing() {
        assert_eq!("D2P2".parse::<Variant>().unwrap(), Variant::D2p2);
        assert!("adam".parse::<Variant>().is_err());
    }

    #[test]
    fn hand_traced_step() {
        let (obj, data) = one_dim_quadratic();
        let cfg = OptimizerConfig {
            variant: Variant::D2p,
            alpha: 0.1,
            batch_size: 1,
            clip: ClipConfig::new(0.0, 1.0).unwrap(),
            sigma_eps: 0.0,
            ..Default::default()
        };
        // n = 1 violates the sampling-ratio guard, so drive the step without a ledger.
        let mut t = Trainer {
            cfg: cfg.clone(),
            pipeline: variant_dispatch(&cfg).unwrap(),
            obj: &obj,
            data: &data,
            mechanism: None,
            steps_per_epoch: 1,
            eval_rows: vec![0],
            epoch_order: None,
            state: TrainState { x: ParamVector::new(vec![1.0]).unwrap(), k: 0, epoch: 0, ledger: None },
        };
        t.step().unwrap();
        assert!((t.state().x.as_slice()[0] - 0.9).abs() < 1e-15);
    }

    fn blobs(n: usize, d: usize, seed: u64) -> Dataset {
        use rand_distr::{Distribution, StandardNormal};
        let mut rng = keyed_stream(seed, Purpose::Data, 0);
        let mut features = Vec::with_capacity(n * d);
        let mut labels = Vec::with_capacity(n);
        for i in 0..n {
            let y = (i % 2) as f64;
            for j in 0..d {
                let z: f64 = StandardNormal.sample(&mut rng);
                features.push(z + if j == 0 { 4.0 * y - 2.0 } else { 0.0 });
            }
            labels.push(y);
        }
        Dataset::new(features, d, labels, Some(2)).unwrap()
    }

    #[test]
    fn zero_gradients_and_zero_noise_leave_x() {
        let data = Dataset::new(vec![0.0; 400], 4, vec![0.0; 100], None).unwrap();
        let obj = Objective::Constant { dim: 4, value: 1.0 };
        let x0 = ParamVector::new(vec![0.5, -1.0, 2.0, 0.0]).unwrap();
        for variant in Variant::ALL {
            let cfg = OptimizerConfig { variant, batch_size: 5, sigma_eps: 0.0, epochs: 1, ..Default::default() };
            let mut t = Trainer::with_initial(cfg, &obj, &data, x0.clone()).unwrap();
            t.run_epoch().unwrap();
            assert_eq!(t.state().x, x0, "{variant}");
        }
    }

    #[test]
    fn ledger_tracks_steps() {
        let data = blobs(400, 5, 1);
        let obj = Objective::Logistic { dim: 5 };
        let cfg = OptimizerConfig { variant: Variant::D2p2, batch_size: 20, ..Default::default() };
        let mut t = Trainer::new(cfg, &obj, &data).unwrap();
        for _ in 0..7 {
            t.step().unwrap();
            assert_eq!(t.state().k, t.state().ledger.as_ref().unwrap().steps_done());
        }
    }

    #[test]
    fn dpsgd_epsilon_matches_accountant() {
        let data = blobs(1000, 3, 2);
        let obj = Objective::Logistic { dim: 3 };
        let cfg = OptimizerConfig { variant: Variant::Dpsgd, batch_size: 50, epochs: 3, sigma_eps: 5.0, ..Default::default() };
        let series = train(&cfg, &obj, &data, &data).unwrap();
        let mech = MechanismParams::new(1000, 50, 5.0, ScheduleMode::Static, cfg.delta).unwrap();
        for m in &series {
            assert_eq!(m.epsilon, epsilon_after(&mech, m.step).unwrap());
        }
        assert_eq!(series.last().unwrap().step, 60);
    }

    #[test]
    fn deterministic_per_seed() {
        let data = blobs(600, 4, 3);
        let obj = Objective::mlp(4, 5, 2);
        for sampling in [BatchSampling::Uniform, BatchSampling::Partition] {
            let cfg = OptimizerConfig { batch_size: 30, epochs: 2, sampling, layerwise_projection: true, ..Default::default() };
            assert_eq!(train(&cfg, &obj, &data, &data).unwrap(), train(&cfg, &obj, &data, &data).unwrap());
        }
    }

    #[test]
    fn noisy_update_differs_from_clean() {
        let data = blobs(400, 3, 4);
        let obj = Objective::Logistic { dim: 3 };
        let base = OptimizerConfig { variant: Variant::Dpsgd, batch_size: 20, ..Default::default() };
        let mut clean = Trainer::new(OptimizerConfig { sigma_eps: 0.0, ..base.clone() }, &obj, &data).unwrap();
        let mut noisy = Trainer::new(base, &obj, &data).unwrap();
        clean.step().unwrap();
        noisy.step().unwrap();
        assert_ne!(clean.state().x, noisy.state().x);
    }

    #[test]
    fn rejects_oversized_batch_and_high_ratio() {
        let data = blobs(100, 2, 5);
        let obj = Objective::Logistic { dim: 2 };
        let too_big = OptimizerConfig { batch_size: 101, ..Default::default() };
        assert!(Trainer::new(too_big, &obj, &data).is_err());
        let ratio = OptimizerConfig { batch_size: 10, ..Default::default() };
        assert!(Trainer::new(ratio, &obj, &data).is_err());
        let sgd = OptimizerConfig { variant: Variant::Sgd, batch_size: 10, ..Default::default() };
        assert!(Trainer::new(sgd, &obj, &data).is_ok());
    }

    #[test]
    fn divergence_aborts_with_step() {
        let data = Dataset::new(vec![1e150; 40], 1, vec![0.0; 40], None).unwrap();
        let obj = Objective::quadratic(vec![0.0]);
        let cfg = OptimizerConfig { variant: Variant::Sgd, batch_size: 2, alpha: 1e160, ..Default::default() };
        let mut t = Trainer::new(cfg, &obj, &data).unwrap();
        match t.step() {
            Err(Error::Numeric(msg)) => assert!(msg.contains("step 1"), "{msg}"),
            other => panic!("expected numeric error, got {other:?}"),
        }
    }

    #[test]
    fn clipped_mean_is_below_scale() {
        let data = blobs(500, 6, 6);
        let obj = Objective::Logistic { dim: 6 };
        let x = ParamVector::new(vec![0.3; 6]).unwrap();
        let cfg = ClipConfig::default();
        for start in 0..20 {
            let grads: Vec<Vec<f64>> = (start * 25..(start + 1) * 25).map(|i| obj.per_sample_gradient(&x, &data, i).unwrap()).collect();
            assert!(clip::l2_norm(&clip::clip_batch(&grads, &cfg).unwrap()) < cfg.scale);
        }
    }
}
