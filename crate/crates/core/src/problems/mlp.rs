use rand::Rng;

use crate::math::Vector;

use super::{
    check_batch, check_theta, gaussian_blobs, invalid, Batch, Dataset, Problem, ProblemError,
};

pub const MLP_EXAMPLES: usize = 600;
pub const MLP_FEATURES: usize = 8;
pub const MLP_CLASSES: usize = 3;
pub const MLP_SEPARATION: f64 = 1.5;

/// Pre-activations closer than this to zero count as sitting on a ReLU kink.
pub const KINK_MARGIN: f64 = 1e-3;

/// One hidden ReLU layer, softmax output, mean categorical cross-entropy.
///
/// Parameters are laid out as `W₁` (hidden × features, row-major), `b₁`,
/// `W₂` (classes × hidden, row-major), `b₂`. The ReLU derivative at exactly
/// zero is taken as 0.
#[derive(Debug, Clone)]
pub struct Mlp {
    train: Dataset,
    test: Option<Dataset>,
    hidden: usize,
    classes: usize,
}

struct Layout {
    d: usize,
    h: usize,
    c: usize,
}

impl Layout {
    fn w1(&self) -> usize {
        0
    }
    fn b1(&self) -> usize {
        self.h * self.d
    }
    fn w2(&self) -> usize {
        self.b1() + self.h
    }
    fn b2(&self) -> usize {
        self.w2() + self.c * self.h
    }
    fn len(&self) -> usize {
        self.b2() + self.c
    }
}

impl Mlp {
    /// Balanced synthetic blobs ([`MLP_EXAMPLES`] examples, [`MLP_FEATURES`]
    /// features, [`MLP_CLASSES`] classes), split 75/25.
    pub fn synthetic(hidden: usize, seed: u64) -> Result<Self, ProblemError> {
        let data = gaussian_blobs(
            MLP_EXAMPLES,
            MLP_FEATURES,
            MLP_CLASSES,
            MLP_SEPARATION,
            seed,
        )?;
        let (train, test) = data.split(super::logreg::TRAIN_FRACTION, seed.wrapping_add(1));
        Self::new(train, Some(test), hidden)
    }

    /// Wraps existing data; the class count is inferred from the labels.
    pub fn new(train: Dataset, test: Option<Dataset>, hidden: usize) -> Result<Self, ProblemError> {
        if hidden == 0 {
            return Err(invalid("mlp", "hidden_units must be at least 1"));
        }
        if train.is_empty() {
            return Err(ProblemError::DatasetAbsent("empty training set".into()));
        }
        let labels_ok = |d: &Dataset| {
            d.targets()
                .iter()
                .all(|&t| t >= 0.0 && t.fract() == 0.0 && t.is_finite())
        };
        if !labels_ok(&train) || test.as_ref().is_some_and(|t| !labels_ok(t)) {
            return Err(invalid("mlp", "labels must be non-negative integers"));
        }
        if test
            .as_ref()
            .is_some_and(|t| t.n_features() != train.n_features())
        {
            return Err(invalid("mlp", "train and test feature counts differ"));
        }
        let test = test.filter(|t| !t.is_empty());
        let classes = train
            .n_classes()
            .max(test.as_ref().map_or(0, Dataset::n_classes))
            .max(2);
        Ok(Self {
            train,
            test,
            hidden,
            classes,
        })
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn hidden(&self) -> usize {
        self.hidden
    }

    fn layout(&self) -> Layout {
        Layout {
            d: self.train.n_features(),
            h: self.hidden,
            c: self.classes,
        }
    }

    fn hidden_pre(&self, theta: &[f64], x: &[f64], out: &mut [f64]) {
        let l = self.layout();
        for (k, z) in out.iter_mut().enumerate() {
            let row = &theta[l.w1() + k * l.d..l.w1() + (k + 1) * l.d];
            *z = row.iter().zip(x).map(|(w, xi)| w * xi).sum::<f64>() + theta[l.b1() + k];
        }
    }

    /// Per-example loss; fills `act` with the ReLU outputs and `probs` with
    /// the softmax.
    fn forward(
        &self,
        theta: &[f64],
        x: &[f64],
        label: usize,
        act: &mut [f64],
        probs: &mut [f64],
    ) -> f64 {
        let l = self.layout();
        self.hidden_pre(theta, x, act);
        act.iter_mut().for_each(|z| *z = z.max(0.0));
        for (c, p) in probs.iter_mut().enumerate() {
            let row = &theta[l.w2() + c * l.h..l.w2() + (c + 1) * l.h];
            *p = row.iter().zip(act.iter()).map(|(w, a)| w * a).sum::<f64>() + theta[l.b2() + c];
        }
        let max = probs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let sum: f64 = probs.iter().map(|z| (z - max).exp()).sum();
        let log_norm = max + sum.ln();
        let loss = log_norm - probs[label];
        probs.iter_mut().for_each(|z| *z = (*z - log_norm).exp());
        loss
    }

    fn mean_loss(&self, data: &Dataset, theta: &Vector, indices: &[usize]) -> f64 {
        let mut act = vec![0.0; self.hidden];
        let mut probs = vec![0.0; self.classes];
        let total: f64 = indices
            .iter()
            .map(|&i| {
                self.forward(
                    theta.as_slice(),
                    data.row(i),
                    data.target(i) as usize,
                    &mut act,
                    &mut probs,
                )
            })
            .sum();
        total / indices.len() as f64
    }

    fn check_labels(&self, data: &Dataset, batch: &Batch) -> Result<(), ProblemError> {
        match batch
            .indices()
            .iter()
            .find(|&&i| data.target(i) as usize >= self.classes)
        {
            Some(&i) => Err(invalid(
                "mlp",
                format!("label of example {i} exceeds class count"),
            )),
            None => Ok(()),
        }
    }
}

impl Problem for Mlp {
    fn name(&self) -> &str {
        "mlp"
    }

    fn dim(&self) -> usize {
        self.layout().len()
    }

    fn train_size(&self) -> Option<usize> {
        Some(self.train.len())
    }

    fn loss(&self, theta: &Vector, batch: &Batch) -> Result<f64, ProblemError> {
        check_theta(theta, self.dim())?;
        check_batch(batch, self.train.len())?;
        self.check_labels(&self.train, batch)?;
        Ok(self.mean_loss(&self.train, theta, batch.indices()))
    }

    fn grad(&self, theta: &Vector, batch: &Batch) -> Result<Vector, ProblemError> {
        check_theta(theta, self.dim())?;
        check_batch(batch, self.train.len())?;
        self.check_labels(&self.train, batch)?;
        let l = self.layout();
        let w = theta.as_slice();
        let mut grad = vec![0.0; l.len()];
        let mut pre = vec![0.0; l.h];
        let mut act = vec![0.0; l.h];
        let mut probs = vec![0.0; l.c];
        let mut d_hidden = vec![0.0; l.h];
        for &i in batch.indices() {
            let x = self.train.row(i);
            let label = self.train.target(i) as usize;
            self.hidden_pre(w, x, &mut pre);
            self.forward(w, x, label, &mut act, &mut probs);
            // dL/dz₂ = softmax − one-hot
            probs[label] -= 1.0;
            d_hidden.iter_mut().for_each(|v| *v = 0.0);
            for (c, &dz) in probs.iter().enumerate() {
                let row = l.w2() + c * l.h;
                for k in 0..l.h {
                    grad[row + k] += dz * act[k];
                    d_hidden[k] += w[row + k] * dz;
                }
                grad[l.b2() + c] += dz;
            }
            for k in 0..l.h {
                if pre[k] <= 0.0 {
                    continue;
                }
                let dz = d_hidden[k];
                let row = l.w1() + k * l.d;
                for (j, xj) in x.iter().enumerate() {
                    grad[row + j] += dz * xj;
                }
                grad[l.b1() + k] += dz;
            }
        }
        let m = batch.len() as f64;
        grad.iter_mut().for_each(|g| *g /= m);
        Ok(Vector::new(grad)?)
    }

    fn test_loss(&self, theta: &Vector) -> Option<Result<f64, ProblemError>> {
        let test = self.test.as_ref()?;
        let all = Batch::all(test.len());
        Some(
            check_theta(theta, self.dim())
                .and_then(|_| self.check_labels(test, &all))
                .map(|_| self.mean_loss(test, theta, all.indices())),
        )
    }

    /// True when every hidden pre-activation on the batch is at least
    /// [`KINK_MARGIN`] away from zero.
    fn is_smooth_at(&self, theta: &Vector, batch: &Batch) -> bool {
        let mut pre = vec![0.0; self.hidden];
        batch.indices().iter().all(|&i| {
            self.hidden_pre(theta.as_slice(), self.train.row(i), &mut pre);
            pre.iter().all(|z| z.abs() > KINK_MARGIN)
        })
    }

    /// Each layer uniform in `±1/√fan_in`.
    fn check_point(&self, rng: &mut dyn rand::RngCore) -> Vector {
        let l = self.layout();
        let first = 1.0 / (l.d as f64).sqrt();
        let second = 1.0 / (l.h as f64).sqrt();
        let values = (0..l.len())
            .map(|i| {
                let s = if i < l.w2() { first } else { second };
                rng.random_range(-s..=s)
            })
            .collect();
        Vector::new(values).expect("mlp has parameters")
    }
}
