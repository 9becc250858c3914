//! Trainable objectives with per-sample loss and gradient evaluation.
//!
//! Parameters live in one flat vector. The MLP layout is layer-major with
//! weights before biases: `W1 (hidden x inputs)`, `b1`, `W2 (classes x hidden)`, `b2`,
//! each weight matrix stored row-major.

use std::ops::Range;

use rand::Rng;

use crate::error::{config, Error, Result};

/// A flat model-parameter point.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamVector(Vec<f64>);

impl ParamVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return config("parameter vector must have positive dimension");
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numeric("parameter vector has non-finite entries".into()));
        }
        Ok(Self(values))
    }

    pub fn zeros(dim: usize) -> Self {
        Self(vec![0.0; dim.max(1)])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

/// Row-major feature matrix with one label per row.
///
/// `num_classes` is `Some(c)` for classification data (labels are integers in
/// `0..c`) and `None` for regression-style data.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    features: Vec<f64>,
    width: usize,
    labels: Vec<f64>,
    num_classes: Option<usize>,
}

impl Dataset {
    pub fn new(features: Vec<f64>, width: usize, labels: Vec<f64>, num_classes: Option<usize>) -> Result<Self> {
        let n = labels.len();
        if n == 0 {
            return config("dataset must contain at least one sample");
        }
        if features.len() != n * width {
            return config(format!(
                "feature buffer has {} values, expected {} rows x {} columns",
                features.len(),
                n,
                width
            ));
        }
        if let Some(c) = num_classes {
            if c < 2 {
                return config("classification data needs at least two classes");
            }
            if let Some(bad) = labels.iter().find(|&&l| l < 0.0 || l.fract() != 0.0 || l >= c as f64) {
                return config(format!("label {bad} outside 0..{c}"));
            }
        }
        Ok(Self { features, width, labels, num_classes })
    }

    /// Builds a dataset from rows, checking that all rows share one width.
    pub fn from_rows(rows: &[Vec<f64>], labels: Vec<f64>, num_classes: Option<usize>) -> Result<Self> {
        let width = rows.first().map_or(0, Vec::len);
        if let Some((i, r)) = rows.iter().enumerate().find(|(_, r)| r.len() != width) {
            return config(format!("row {i} has width {}, expected {width}", r.len()));
        }
        if rows.len() != labels.len() {
            return config("row count and label count differ");
        }
        Self::new(rows.concat(), width, labels, num_classes)
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn num_classes(&self) -> Option<usize> {
        self.num_classes
    }

    pub fn row(&self, idx: usize) -> &[f64] {
        &self.features[idx * self.width..(idx + 1) * self.width]
    }

    pub fn label(&self, idx: usize) -> f64 {
        self.labels[idx]
    }

    pub fn labels(&self) -> &[f64] {
        &self.labels
    }

    /// Copies the given rows, in order, into a new dataset.
    pub fn select(&self, indices: &[usize]) -> Result<Self> {
        let mut features = Vec::with_capacity(indices.len() * self.width);
        let mut labels = Vec::with_capacity(indices.len());
        for &i in indices {
            features.extend_from_slice(self.row(i));
            labels.push(self.labels[i]);
        }
        Self::new(features, self.width, labels, self.num_classes)
    }
}

/// Per-sample objective `f(x, s)`.
#[derive(Debug, Clone, PartialEq)]
pub enum Objective {
    /// `f(x,s) = (curvature/2) * ||x - (center + a_s)||^2` where `a_s` is the
    /// sample's feature row (its offset from the shared center).
    Quadratic { center: Vec<f64>, curvature: f64 },
    /// Binary logistic regression without bias, labels in {0,1}.
    Logistic { dim: usize },
    /// One tanh hidden layer with a softmax cross-entropy head.
    Mlp { inputs: usize, hidden: usize, classes: usize },
    /// Constant objective, used for oracle checks.
    Constant { dim: usize, value: f64 },
}

impl Objective {
    pub fn quadratic(center: Vec<f64>) -> Self {
        Objective::Quadratic { center, curvature: 1.0 }
    }

    pub fn mlp(inputs: usize, hidden: usize, classes: usize) -> Self {
        Objective::Mlp { inputs, hidden, classes }
    }

    /// Flattened parameter count.
    pub fn dim(&self) -> usize {
        match self {
            Objective::Quadratic { center, .. } => center.len(),
            Objective::Logistic { dim } | Objective::Constant { dim, .. } => *dim,
            Objective::Mlp { inputs, hidden, classes } => hidden * inputs + hidden + classes * hidden + classes,
        }
    }

    /// Contiguous parameter blocks, one per layer tensor.
    pub fn segments(&self) -> Vec<Range<usize>> {
        match self {
            Objective::Mlp { inputs, hidden, classes } => {
                let w1 = hidden * inputs;
                let b1 = w1 + hidden;
                let w2 = b1 + classes * hidden;
                vec![0..w1, w1..b1, b1..w2, w2..w2 + classes]
            }
            _ => std::iter::once(0..self.dim()).collect(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Objective::Quadratic { center, curvature } => {
                if center.is_empty() {
                    return config("quadratic center must be nonempty");
                }
                if !(curvature.is_finite() && *curvature > 0.0) {
                    return config("quadratic curvature must be positive");
                }
            }
            Objective::Logistic { dim } | Objective::Constant { dim, .. } => {
                if *dim == 0 {
                    return config("objective dimension must be positive");
                }
            }
            Objective::Mlp { inputs, hidden, classes } => {
                if *inputs == 0 || *hidden == 0 || *classes < 2 {
                    return config("mlp needs inputs >= 1, hidden >= 1, classes >= 2");
                }
            }
        }
        Ok(())
    }

    /// Checks that `x` and `data` fit this objective.
    pub fn check_compatible(&self, x: &ParamVector, data: &Dataset) -> Result<()> {
        if x.dim() != self.dim() {
            return config(format!("parameter dimension {} does not match objective dimension {}", x.dim(), self.dim()));
        }
        let want_width = match self {
            Objective::Quadratic { center, .. } => Some(center.len()),
            Objective::Logistic { dim } => Some(*dim),
            Objective::Mlp { inputs, .. } => Some(*inputs),
            Objective::Constant { .. } => None,
        };
        if let Some(w) = want_width {
            if data.width() != w {
                return config(format!("dataset width {} does not match objective input width {w}", data.width()));
            }
        }
        match self {
            Objective::Logistic { .. } if data.labels().iter().any(|&l| l != 0.0 && l != 1.0) => {
                config("logistic regression labels must be 0 or 1")
            }
            Objective::Mlp { classes, .. } if data.labels().iter().any(|&l| l < 0.0 || l.fract() != 0.0 || l >= *classes as f64) => {
                config(format!("mlp labels must be class indices in 0..{classes}"))
            }
            _ => Ok(()),
        }
    }

    fn check_index(data: &Dataset, idx: usize) -> Result<()> {
        if idx >= data.len() {
            return config(format!("sample index {idx} out of range for dataset of {} rows", data.len()));
        }
        Ok(())
    }

    /// Loss of a single sample.
    pub fn loss(&self, x: &ParamVector, data: &Dataset, idx: usize) -> Result<f64> {
        self.check_compatible(x, data)?;
        Self::check_index(data, idx)?;
        let value = self.loss_unchecked(x.as_slice(), data.row(idx), data.label(idx));
        finite(value, "loss")
    }

    /// Exact gradient of the loss of a single sample.
    pub fn per_sample_gradient(&self, x: &ParamVector, data: &Dataset, idx: usize) -> Result<Vec<f64>> {
        self.check_compatible(x, data)?;
        Self::check_index(data, idx)?;
        let mut grad = vec![0.0; self.dim()];
        self.gradient_into(x.as_slice(), data.row(idx), data.label(idx), &mut grad);
        if grad.iter().any(|g| !g.is_finite()) {
            return Err(Error::Numeric(format!("gradient of sample {idx}")));
        }
        Ok(grad)
    }

    /// Central-difference gradient estimate, one coordinate at a time.
    pub fn finite_diff_gradient(&self, x: &ParamVector, data: &Dataset, idx: usize, h: f64) -> Result<Vec<f64>> {
        self.finite_diff_coordinates(x, data, idx, h, 0..self.dim())
    }

    /// Central differences restricted to the listed coordinates.
    pub fn finite_diff_coordinates(
        &self,
        x: &ParamVector,
        data: &Dataset,
        idx: usize,
        h: f64,
        coords: impl IntoIterator<Item = usize>,
    ) -> Result<Vec<f64>> {
        if !(h > 0.0 && h.is_finite()) {
            return config("finite-difference step must be positive");
        }
        self.check_compatible(x, data)?;
        Self::check_index(data, idx)?;
        let mut probe = x.as_slice().to_vec();
        let (row, label) = (data.row(idx), data.label(idx));
        coords
            .into_iter()
            .map(|i| {
                if i >= probe.len() {
                    return config(format!("coordinate {i} out of range"));
                }
                let orig = probe[i];
                probe[i] = orig + h;
                let up = self.loss_unchecked(&probe, row, label);
                probe[i] = orig - h;
                let down = self.loss_unchecked(&probe, row, label);
                probe[i] = orig;
                finite((up - down) / (2.0 * h), "finite difference")
            })
            .collect()
    }

    /// Mean of the per-sample gradients over every row, reduced in index order.
    pub fn full_gradient(&self, x: &ParamVector, data: &Dataset) -> Result<Vec<f64>> {
        let idx: Vec<usize> = (0..data.len()).collect();
        self.mean_gradient(x, data, &idx)
    }

    pub fn mean_gradient(&self, x: &ParamVector, data: &Dataset, indices: &[usize]) -> Result<Vec<f64>> {
        self.check_compatible(x, data)?;
        if indices.is_empty() {
            return config("cannot average over an empty index set");
        }
        let mut acc = vec![0.0; self.dim()];
        let mut grad = vec![0.0; self.dim()];
        for &i in indices {
            Self::check_index(data, i)?;
            grad.iter_mut().for_each(|g| *g = 0.0);
            self.gradient_into(x.as_slice(), data.row(i), data.label(i), &mut grad);
            acc.iter_mut().zip(&grad).for_each(|(a, g)| *a += g);
        }
        let inv = 1.0 / indices.len() as f64;
        acc.iter_mut().for_each(|a| *a *= inv);
        if acc.iter().any(|g| !g.is_finite()) {
            return Err(Error::Numeric("mean gradient".into()));
        }
        Ok(acc)
    }

    /// Mean loss over the listed rows.
    pub fn mean_loss(&self, x: &ParamVector, data: &Dataset, indices: &[usize]) -> Result<f64> {
        self.check_compatible(x, data)?;
        if indices.is_empty() {
            return config("cannot average over an empty index set");
        }
        let mut total = 0.0;
        for &i in indices {
            Self::check_index(data, i)?;
            total += self.loss_unchecked(x.as_slice(), data.row(i), data.label(i));
        }
        finite(total / indices.len() as f64, "mean loss")
    }

    /// Mean loss over the whole dataset, `f(x)`.
    pub fn full_loss(&self, x: &ParamVector, data: &Dataset) -> Result<f64> {
        let idx: Vec<usize> = (0..data.len()).collect();
        self.mean_loss(x, data, &idx)
    }

    /// Fraction of rows whose predicted class matches the label.
    /// Returns `None` for objectives without a classification head.
    pub fn accuracy(&self, x: &ParamVector, data: &Dataset) -> Result<Option<f64>> {
        self.check_compatible(x, data)?;
        if !matches!(self, Objective::Logistic { .. } | Objective::Mlp { .. }) {
            return Ok(None);
        }
        let predict = |row: &[f64]| -> f64 {
            match self {
                Objective::Logistic { .. } => f64::from(u8::from(dot(x.as_slice(), row) >= 0.0)),
                _ => argmax(&self.mlp_forward(x.as_slice(), row).1) as f64,
            }
        };
        let hits = (0..data.len()).filter(|&i| predict(data.row(i)) == data.label(i)).count();
        Ok(Some(hits as f64 / data.len() as f64))
    }

    /// Initial iterate: zeros for convex objectives, fan-in scaled uniform
    /// weights (zero biases) for the MLP.
    pub fn init_params<R: Rng + ?Sized>(&self, rng: &mut R) -> ParamVector {
        match self {
            Objective::Mlp { inputs, hidden, classes } => {
                let mut values = vec![0.0; self.dim()];
                let seg = self.segments();
                let b1 = 1.0 / (*inputs as f64).sqrt();
                for v in &mut values[seg[0].clone()] {
                    *v = rng.random_range(-b1..b1);
                }
                let b2 = 1.0 / (*hidden as f64).sqrt();
                for v in &mut values[seg[2].clone()] {
                    *v = rng.random_range(-b2..b2);
                }
                debug_assert_eq!(seg[3].len(), *classes);
                ParamVector(values)
            }
            _ => ParamVector::zeros(self.dim()),
        }
    }

    fn loss_unchecked(&self, x: &[f64], row: &[f64], label: f64) -> f64 {
        match self {
            Objective::Quadratic { center, curvature } => {
                let sq: f64 = x.iter().zip(center).zip(row).map(|((xi, ci), ai)| (xi - ci - ai).powi(2)).sum();
                0.5 * curvature * sq
            }
            Objective::Logistic { .. } => {
                let z = dot(x, row);
                softplus(z) - label * z
            }
            Objective::Mlp { .. } => {
                let logits = self.mlp_forward(x, row).1;
                log_sum_exp(&logits) - logits[label as usize]
            }
            Objective::Constant { value, .. } => *value,
        }
    }

    /// Adds the gradient of one sample into `out` (which the caller zeroes).
    fn gradient_into(&self, x: &[f64], row: &[f64], label: f64, out: &mut [f64]) {
        match self {
            Objective::Quadratic { center, curvature } => {
                for (((o, xi), ci), ai) in out.iter_mut().zip(x).zip(center).zip(row) {
                    *o += curvature * (xi - ci - ai);
                }
            }
            Objective::Logistic { .. } => {
                let r = sigmoid(dot(x, row)) - label;
                out.iter_mut().zip(row).for_each(|(o, a)| *o += r * a);
            }
            Objective::Mlp { inputs, hidden, classes } => {
                let (h, logits) = self.mlp_forward(x, row);
                let seg = self.segments();
                let lse = log_sum_exp(&logits);
                let dz2: Vec<f64> = logits
                    .iter()
                    .enumerate()
                    .map(|(c, &z)| (z - lse).exp() - if c == label as usize { 1.0 } else { 0.0 })
                    .collect();
                let w2 = &x[seg[2].clone()];
                let mut dz1 = vec![0.0; *hidden];
                for c in 0..*classes {
                    let w2_row = &w2[c * hidden..(c + 1) * hidden];
                    let g_row = &mut out[seg[2].start + c * hidden..seg[2].start + (c + 1) * hidden];
                    for j in 0..*hidden {
                        g_row[j] += dz2[c] * h[j];
                        dz1[j] += dz2[c] * w2_row[j];
                    }
                    out[seg[3].start + c] += dz2[c];
                }
                for j in 0..*hidden {
                    dz1[j] *= 1.0 - h[j] * h[j];
                    let g_row = &mut out[j * inputs..(j + 1) * inputs];
                    g_row.iter_mut().zip(row).for_each(|(g, a)| *g += dz1[j] * a);
                    out[seg[1].start + j] += dz1[j];
                }
            }
            Objective::Constant { .. } => {}
        }
    }

    /// Returns the hidden activations and output logits.
    fn mlp_forward(&self, x: &[f64], row: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let Objective::Mlp { inputs, hidden, classes } = self else {
            unreachable!("mlp_forward on non-mlp objective")
        };
        let seg = self.segments();
        let (w1, b1, w2, b2) = (&x[seg[0].clone()], &x[seg[1].clone()], &x[seg[2].clone()], &x[seg[3].clone()]);
        let h: Vec<f64> = (0..*hidden).map(|j| (dot(&w1[j * inputs..(j + 1) * inputs], row) + b1[j]).tanh()).collect();
        let logits = (0..*classes).map(|c| dot(&w2[c * hidden..(c + 1) * hidden], &h) + b2[c]).collect();
        (h, logits)
    }
}

fn finite(v: f64, what: &str) -> Result<f64> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::Numeric(what.to_string()))
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `ln(1 + e^z)` without overflow.
fn softplus(z: f64) -> f64 {
    z.max(0.0) + (-z.abs()).exp().ln_1p()
}

fn log_sum_exp(v: &[f64]) -> f64 {
    let m = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    m + v.iter().map(|z| (z - m).exp()).sum::<f64>().ln()
}

fn argmax(v: &[f64]) -> usize {
    v.iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |best, (i, &z)| if z > best.1 { (i, z) } else { best })
        .0
}
