//! Two-layer perceptron: affine → batch norm → ReLU → dropout → affine,
//! softmax cross-entropy, AdamW with decoupled weight decay.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::features::{Ablation, FeatureTable, Standardizer};
use super::metrics::metrics_from_predictions;
use super::split::stratified_split_lenient;
use crate::bucketing::RoleLabel;
use crate::error::{Error, Result};

pub const N_CLASSES: usize = RoleLabel::COUNT;
const BN_EPS: f64 = 1e-5;
const BN_MOMENTUM: f64 = 0.1;
const ADAM_BETA1: f64 = 0.9;
const ADAM_BETA2: f64 = 0.999;
const ADAM_EPS: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClassifierConfig {
    pub hidden_width: usize,
    pub dropout: f64,
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub max_epochs: usize,
    pub patience: usize,
    pub val_fraction: f64,
    pub test_fraction: f64,
    pub batch_size: usize,
    pub class_weighting: bool,
    /// Derived from the root seed, not read from the config file.
    #[serde(skip)]
    pub seed: u64,
    pub use_hier: bool,
    pub use_walk: bool,
}

impl Default for ClassifierConfig {
    fn default() -> Self {
        Self {
            hidden_width: 128,
            dropout: 0.3,
            learning_rate: 1e-3,
            weight_decay: 0.2,
            max_epochs: 2000,
            patience: 10,
            val_fraction: 0.1,
            test_fraction: 0.2,
            batch_size: 32,
            class_weighting: false,
            seed: 0,
            use_hier: true,
            use_walk: true,
        }
    }
}

impl ClassifierConfig {
    pub fn ablation(&self) -> Ablation {
        Ablation {
            use_hier: self.use_hier,
            use_walk: self.use_walk,
        }
    }

    pub fn with_ablation(mut self, a: Ablation) -> Self {
        self.use_hier = a.use_hier;
        self.use_walk = a.use_walk;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(format!("classifier.{m}")));
        if self.hidden_width == 0 || self.batch_size == 0 || self.max_epochs == 0 || self.patience == 0 {
            return bad("hidden_width, batch_size, max_epochs and patience must be positive");
        }
        if self.patience >= self.max_epochs {
            return bad("patience must be smaller than max_epochs");
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return bad("dropout must lie in [0, 1)");
        }
        if !(self.learning_rate > 0.0) || !(self.weight_decay >= 0.0) {
            return bad("learning_rate must be positive and weight_decay non-negative");
        }
        for (name, f) in [("val_fraction", self.val_fraction), ("test_fraction", self.test_fraction)] {
            if !(f > 0.0 && f < 1.0) {
                return bad(&format!("{name} must lie in (0, 1)"));
            }
        }
        Ok(())
    }
}

/// Network weights plus batch-norm running statistics. Matrices are row-major
/// with one row per output unit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    pub d_in: usize,
    pub hidden: usize,
    pub n_classes: usize,
    pub w1: Vec<f64>,
    pub b1: Vec<f64>,
    pub gamma: Vec<f64>,
    pub beta: Vec<f64>,
    pub running_mean: Vec<f64>,
    pub running_var: Vec<f64>,
    pub w2: Vec<f64>,
    pub b2: Vec<f64>,
}

#[derive(Debug, Clone)]
struct Grads {
    w1: Vec<f64>,
    b1: Vec<f64>,
    gamma: Vec<f64>,
    beta: Vec<f64>,
    w2: Vec<f64>,
    b2: Vec<f64>,
}

impl Mlp {
    /// Uniform `±1/sqrt(fan_in)` initialisation for affine layers; γ = 1, β = 0.
    pub fn init(d_in: usize, hidden: usize, n_classes: usize, rng: &mut impl Rng) -> Self {
        let mut uniform = |n: usize, fan_in: usize| -> Vec<f64> {
            let b = 1.0 / (fan_in.max(1) as f64).sqrt();
            (0..n).map(|_| rng.random_range(-b..b)).collect()
        };
        Self {
            d_in,
            hidden,
            n_classes,
            w1: uniform(hidden * d_in, d_in),
            b1: uniform(hidden, d_in),
            gamma: vec![1.0; hidden],
            beta: vec![0.0; hidden],
            running_mean: vec![0.0; hidden],
            running_var: vec![1.0; hidden],
            w2: uniform(n_classes * hidden, hidden),
            b2: uniform(n_classes, hidden),
        }
    }

    fn params_mut(&mut self) -> [&mut Vec<f64>; 6] {
        [
            &mut self.w1,
            &mut self.b1,
            &mut self.gamma,
            &mut self.beta,
            &mut self.w2,
            &mut self.b2,
        ]
    }

    fn affine1(&self, x: &[f64]) -> Vec<f64> {
        (0..self.hidden)
            .map(|j| {
                let w = &self.w1[j * self.d_in..(j + 1) * self.d_in];
                self.b1[j] + w.iter().zip(x).map(|(a, b)| a * b).sum::<f64>()
            })
            .collect()
    }

    fn affine2(&self, a: &[f64]) -> Vec<f64> {
        (0..self.n_classes)
            .map(|c| {
                let w = &self.w2[c * self.hidden..(c + 1) * self.hidden];
                self.b2[c] + w.iter().zip(a).map(|(p, q)| p * q).sum::<f64>()
            })
            .collect()
    }

    /// Inference-mode logits: batch norm uses running statistics, no dropout.
    pub fn logits(&self, x: &[f64]) -> Vec<f64> {
        let h = self.affine1(x);
        let a: Vec<f64> = (0..self.hidden)
            .map(|j| {
                let xhat = (h[j] - self.running_mean[j]) / (self.running_var[j] + BN_EPS).sqrt();
                (self.gamma[j] * xhat + self.beta[j]).max(0.0)
            })
            .collect();
        self.affine2(&a)
    }

    /// Training-mode pass over one batch. Returns the weighted mean loss and
    /// gradients, and updates running statistics when `update_stats` is set.
    fn train_batch(
        &mut self,
        xs: &[&[f64]],
        ys: &[usize],
        weights: &[f64],
        masks: Option<&[Vec<f64>]>,
        update_stats: bool,
    ) -> (f64, Grads) {
        let b = xs.len();
        let bf = b as f64;
        let hd = self.hidden;
        let hs: Vec<Vec<f64>> = xs.iter().map(|x| self.affine1(x)).collect();

        let mut mu = vec![0.0; hd];
        let mut var = vec![0.0; hd];
        for h in &hs {
            mu.iter_mut().zip(h).for_each(|(m, v)| *m += v / bf);
        }
        for h in &hs {
            for j in 0..hd {
                var[j] += (h[j] - mu[j]).powi(2) / bf;
            }
        }
        let inv_std: Vec<f64> = var.iter().map(|v| 1.0 / (v + BN_EPS).sqrt()).collect();
        let xhat: Vec<Vec<f64>> = hs
            .iter()
            .map(|h| (0..hd).map(|j| (h[j] - mu[j]) * inv_std[j]).collect())
            .collect();
        let ys_pre: Vec<Vec<f64>> = xhat
            .iter()
            .map(|xh| (0..hd).map(|j| self.gamma[j] * xh[j] + self.beta[j]).collect())
            .collect();
        let acts: Vec<Vec<f64>> = ys_pre
            .iter()
            .enumerate()
            .map(|(i, y)| {
                (0..hd)
                    .map(|j| y[j].max(0.0) * masks.map_or(1.0, |m| m[i][j]))
                    .collect()
            })
            .collect();

        let wsum: f64 = weights.iter().sum();
        let mut loss = 0.0;
        let mut g = Grads {
            w1: vec![0.0; self.w1.len()],
            b1: vec![0.0; hd],
            gamma: vec![0.0; hd],
            beta: vec![0.0; hd],
            w2: vec![0.0; self.w2.len()],
            b2: vec![0.0; self.n_classes],
        };
        let mut dy = vec![vec![0.0; hd]; b];
        for i in 0..b {
            let logits = self.affine2(&acts[i]);
            let p = softmax(&logits);
            loss += weights[i] * -p[ys[i]].max(f64::MIN_POSITIVE).ln();
            let scale = weights[i] / wsum;
            for c in 0..self.n_classes {
                let dl = (p[c] - f64::from(u8::from(c == ys[i]))) * scale;
                g.b2[c] += dl;
                let row = c * hd;
                for j in 0..hd {
                    g.w2[row + j] += dl * acts[i][j];
                    let da = dl * self.w2[row + j] * masks.map_or(1.0, |m| m[i][j]);
                    if ys_pre[i][j] > 0.0 {
                        dy[i][j] += da;
                    }
                }
            }
        }
        loss /= wsum;

        for j in 0..hd {
            let mut sum_dxhat = 0.0;
            let mut sum_dxhat_xhat = 0.0;
            for i in 0..b {
                g.gamma[j] += dy[i][j] * xhat[i][j];
                g.beta[j] += dy[i][j];
                let dxh = dy[i][j] * self.gamma[j];
                sum_dxhat += dxh;
                sum_dxhat_xhat += dxh * xhat[i][j];
            }
            for i in 0..b {
                let dxh = dy[i][j] * self.gamma[j];
                let dh = inv_std[j] / bf * (bf * dxh - sum_dxhat - xhat[i][j] * sum_dxhat_xhat);
                g.b1[j] += dh;
                let row = &mut g.w1[j * self.d_in..(j + 1) * self.d_in];
                row.iter_mut().zip(xs[i]).for_each(|(w, x)| *w += dh * x);
            }
        }

        if update_stats {
            let unbiased = if b > 1 { bf / (bf - 1.0) } else { 1.0 };
            for j in 0..hd {
                self.running_mean[j] = (1.0 - BN_MOMENTUM) * self.running_mean[j] + BN_MOMENTUM * mu[j];
                self.running_var[j] =
                    (1.0 - BN_MOMENTUM) * self.running_var[j] + BN_MOMENTUM * var[j] * unbiased;
            }
        }
        (loss, g)
    }
}

pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let m = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = logits.iter().map(|l| (l - m).exp()).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|x| x / s).collect()
}

pub fn cross_entropy(logits: &[f64], label: usize) -> f64 {
    let m = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = m + logits.iter().map(|l| (l - m).exp()).sum::<f64>().ln();
    lse - logits[label]
}

struct AdamW {
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
    t: i32,
}

impl AdamW {
    fn new(model: &mut Mlp) -> Self {
        let shapes: Vec<usize> = model.params_mut().iter().map(|p| p.len()).collect();
        Self {
            m: shapes.iter().map(|&n| vec![0.0; n]).collect(),
            v: shapes.iter().map(|&n| vec![0.0; n]).collect(),
            t: 0,
        }
    }

    fn step(&mut self, model: &mut Mlp, g: &Grads, lr: f64, wd: f64) {
        self.t += 1;
        let bc1 = 1.0 - ADAM_BETA1.powi(self.t);
        let bc2 = 1.0 - ADAM_BETA2.powi(self.t);
        let grads = [&g.w1, &g.b1, &g.gamma, &g.beta, &g.w2, &g.b2];
        for (k, p) in model.params_mut().into_iter().enumerate() {
            let (m, v) = (&mut self.m[k], &mut self.v[k]);
            for i in 0..p.len() {
                let gi = grads[k][i];
                p[i] *= 1.0 - lr * wd;
                m[i] = ADAM_BETA1 * m[i] + (1.0 - ADAM_BETA1) * gi;
                v[i] = ADAM_BETA2 * v[i] + (1.0 - ADAM_BETA2) * gi * gi;
                p[i] -= lr * (m[i] / bc1) / ((v[i] / bc2).sqrt() + ADAM_EPS);
            }
        }
    }
}

/// Everything needed to score new rows: feature layout, scaling, and weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoleModel {
    pub columns: Vec<String>,
    pub ablation: Ablation,
    pub standardizer: Standardizer,
    pub mlp: Mlp,
    pub train_nodes: Vec<String>,
    pub test_nodes: Vec<String>,
}

impl RoleModel {
    fn check_layout(&self, table: &FeatureTable) -> Result<()> {
        if table.columns != self.columns {
            return Err(Error::MisalignedInputs(format!(
                "feature layout has {} columns, model expects {}",
                table.dim(),
                self.columns.len()
            )));
        }
        Ok(())
    }

    pub fn predict_proba(&self, table: &FeatureTable) -> Result<Vec<Vec<f64>>> {
        self.check_layout(table)?;
        Ok(table
            .matrix
            .rows()
            .map(|r| softmax(&self.mlp.logits(&self.standardizer.transform_row(r))))
            .collect())
    }

    pub fn predict(&self, table: &FeatureTable) -> Result<Vec<usize>> {
        Ok(self.predict_proba(table)?.iter().map(|p| argmax(p)).collect())
    }

    /// Mean cross-entropy of the given rows.
    pub fn loss(&self, table: &FeatureTable, labels: &[usize]) -> Result<f64> {
        self.check_layout(table)?;
        let n = labels.len().max(1) as f64;
        Ok(table
            .matrix
            .rows()
            .zip(labels)
            .map(|(r, &y)| cross_entropy(&self.mlp.logits(&self.standardizer.transform_row(r)), y))
            .sum::<f64>()
            / n)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

/// First index of the maximum, so ties resolve to the lower class id.
pub fn argmax(p: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in p.iter().enumerate() {
        if x > p[best] {
            best = i;
        }
    }
    best
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ClassifierEpoch {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
    pub val_macro_f1: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainedClassifier {
    pub model: RoleModel,
    pub trace: Vec<ClassifierEpoch>,
    pub best_epoch: usize,
}

fn batches(order: &[usize], size: usize) -> Vec<&[usize]> {
    let mut out: Vec<&[usize]> = order.chunks(size).collect();
    // a batch of one has no batch statistics; fold it into its predecessor
    if out.len() > 1 && out.last().is_some_and(|b| b.len() == 1) {
        out.pop();
        let start = (out.len() - 1) * size;
        *out.last_mut().unwrap() = &order[start..];
    }
    out
}

/// Trains on every row of `table` (the training split). A stratified
/// `val_fraction` of it is held out to pick the checkpoint with the best
/// validation macro-F1, ties going to lower validation loss.
pub fn train_classifier(
    table: &FeatureTable,
    labels: &[usize],
    config: &ClassifierConfig,
) -> Result<TrainedClassifier> {
    config.validate()?;
    if table.len() != labels.len() {
        return Err(Error::MisalignedInputs(format!(
            "{} feature rows for {} labels",
            table.len(),
            labels.len()
        )));
    }
    if let Some(&bad) = labels.iter().find(|&&y| y >= N_CLASSES) {
        return Err(Error::Parse(format!("label index {bad} out of range")));
    }
    let mut present = [false; N_CLASSES];
    labels.iter().for_each(|&y| present[y] = true);
    if present.iter().filter(|&&p| p).count() < 2 {
        return Err(Error::SingleClassTrain);
    }

    let standardizer = Standardizer::fit(table);
    let xs: Vec<Vec<f64>> = table.matrix.rows().map(|r| standardizer.transform_row(r)).collect();

    let inner = stratified_split_lenient(labels, config.val_fraction, config.seed ^ 0x5e_ed0f_5a11)?;
    let (fit_idx, val_idx) = if inner.test.is_empty() {
        log::warn!("validation carve-out is empty; early stopping monitors the training rows");
        (inner.train.clone(), inner.train)
    } else {
        (inner.train, inner.test)
    };

    let mut counts = [0usize; N_CLASSES];
    fit_idx.iter().for_each(|&i| counts[labels[i]] += 1);
    let n_present = counts.iter().filter(|&&c| c > 0).count() as f64;
    let class_weight: Vec<f64> = counts
        .iter()
        .map(|&c| {
            if config.class_weighting && c > 0 {
                fit_idx.len() as f64 / (n_present * c as f64)
            } else {
                1.0
            }
        })
        .collect();

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut mlp = Mlp::init(table.dim(), config.hidden_width, N_CLASSES, &mut rng);
    rng.set_stream(1);
    let mut opt = AdamW::new(&mut mlp);
    let keep = 1.0 - config.dropout;

    let val_metrics = |m: &Mlp| -> (f64, f64) {
        let mut loss = 0.0;
        let mut pred = Vec::with_capacity(val_idx.len());
        for &i in &val_idx {
            let l = m.logits(&xs[i]);
            loss += cross_entropy(&l, labels[i]);
            pred.push(argmax(&l));
        }
        let truth: Vec<usize> = val_idx.iter().map(|&i| labels[i]).collect();
        let f1 = metrics_from_predictions(&truth, &pred, N_CLASSES).map_or(0.0, |m| m.macro_avg.f1);
        (f1, loss / val_idx.len() as f64)
    };

    let mut best = (mlp.clone(), f64::NEG_INFINITY, f64::INFINITY, 0usize);
    let mut since_best = 0;
    let mut trace = Vec::new();
    let mut order = fit_idx.clone();
    for epoch in 1..=config.max_epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for batch in batches(&order, config.batch_size) {
            let bx: Vec<&[f64]> = batch.iter().map(|&i| xs[i].as_slice()).collect();
            let by: Vec<usize> = batch.iter().map(|&i| labels[i]).collect();
            let bw: Vec<f64> = by.iter().map(|&y| class_weight[y]).collect();
            let masks: Option<Vec<Vec<f64>>> = (config.dropout > 0.0).then(|| {
                (0..batch.len())
                    .map(|_| {
                        (0..config.hidden_width)
                            .map(|_| if rng.random::<f64>() < keep { 1.0 / keep } else { 0.0 })
                            .collect()
                    })
                    .collect()
            });
            let (loss, g) = mlp.train_batch(&bx, &by, &bw, masks.as_deref(), true);
            opt.step(&mut mlp, &g, config.learning_rate, config.weight_decay);
            epoch_loss += loss * batch.len() as f64;
        }
        let (f1, vloss) = val_metrics(&mlp);
        if !vloss.is_finite() || !epoch_loss.is_finite() {
            return Err(Error::NonFinite(format!("classifier loss at epoch {epoch}")));
        }
        trace.push(ClassifierEpoch {
            epoch,
            train_loss: epoch_loss / fit_idx.len() as f64,
            val_loss: vloss,
            val_macro_f1: f1,
        });
        if f1 > best.1 || (f1 == best.1 && vloss < best.2) {
            best = (mlp.clone(), f1, vloss, epoch);
            since_best = 0;
        } else {
            since_best += 1;
            if since_best >= config.patience {
                break;
            }
        }
    }

    Ok(TrainedClassifier {
        model: RoleModel {
            columns: table.columns.clone(),
            ablation: config.ablation(),
            standardizer,
            mlp: best.0,
            train_nodes: table.nodes().to_vec(),
            test_nodes: Vec::new(),
        },
        trace,
        best_epoch: best.3,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::io::NodeMatrix;

    fn table(rows: &[Vec<f64>]) -> FeatureTable {
        let d = rows[0].len();
        let nodes = (0..rows.len()).map(|i| format!("n{i}")).collect();
        FeatureTable {
            columns: (0..d).map(|k| format!("x{k}")).collect(),
            matrix: NodeMatrix::new(nodes, d, rows.concat()).unwrap(),
        }
    }

    #[test]
    fn uniform_logits_cost_ln4() {
        assert!((cross_entropy(&[0.3; 4], 2) - 4f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn analytic_gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut mlp = Mlp::init(3, 5, 4, &mut rng);
        mlp.gamma.iter_mut().for_each(|g| *g = rng.random_range(0.5..1.5));
        let xs: Vec<Vec<f64>> = (0..6).map(|_| (0..3).map(|_| rng.random_range(-2.0..2.0)).collect()).collect();
        let bx: Vec<&[f64]> = xs.iter().map(Vec::as_slice).collect();
        let ys = [0, 1, 2, 3, 1, 0];
        let ws = [1.0, 2.0, 1.0, 0.5, 1.0, 1.0];
        let (_, g) = mlp.train_batch(&bx, &ys, &ws, None, false);
        let analytic = [g.w1, g.b1, g.gamma, g.beta, g.w2, g.b2];
        let h = 1e-6;
        for k in 0..6 {
            for i in 0..analytic[k].len() {
                let mut plus = mlp.clone();
                plus.params_mut()[k][i] += h;
                let mut minus = mlp.clone();
                minus.params_mut()[k][i] -= h;
                let fd = (plus.train_batch(&bx, &ys, &ws, None, false).0
                    - minus.train_batch(&bx, &ys, &ws, None, false).0)
                    / (2.0 * h);
                let a = analytic[k][i];
                assert!((fd - a).abs() <= 1e-6 + 1e-4 * a.abs(), "param {k}[{i}]: fd {fd} analytic {a}");
            }
        }
    }

    fn separable(n: usize, seed: u64) -> (FeatureTable, Vec<usize>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        for i in 0..n {
            let y = i % 2;
            let shift = if y == 0 { -1.0 } else { 1.0 };
            rows.push(vec![shift + rng.random_range(-0.5..0.5), rng.random_range(-1.0..1.0)]);
            labels.push(y);
        }
        (table(&rows), labels)
    }

    #[test]
    fn fits_separable_data() {
        let (t, y) = separable(60, 1);
        let cfg = ClassifierConfig {
            max_epochs: 200,
            patience: 199,
            dropout: 0.0,
            ..Default::default()
        };
        let trained = train_classifier(&t, &y, &cfg).unwrap();
        let pred = trained.model.predict(&t).unwrap();
        let acc = pred.iter().zip(&y).filter(|(p, q)| p == q).count() as f64 / y.len() as f64;
        assert_eq!(acc, 1.0);
        assert!(trained.model.loss(&t, &y).unwrap() <= 4f64.ln() + 0.5);
    }

    #[test]
    fn deterministic_without_dropout() {
        let (t, y) = separable(40, 2);
        let cfg = ClassifierConfig {
            max_epochs: 30,
            dropout: 0.0,
            ..Default::default()
        };
        let a = train_classifier(&t, &y, &cfg).unwrap();
        let b = train_classifier(&t, &y, &cfg).unwrap();
        assert_eq!(a.trace, b.trace);
        assert_eq!(a.model, b.model);
    }

    #[test]
    fn inference_ignores_batch_composition() {
        let (t, y) = separable(40, 3);
        let cfg = ClassifierConfig {
            max_epochs: 20,
            ..Default::default()
        };
        let m = train_classifier(&t, &y, &cfg).unwrap().model;
        let all = m.predict_proba(&t).unwrap();
        let one = m.predict_proba(&t.select(&[7])).unwrap();
        assert_eq!(all[7], one[0]);
    }

    #[test]
    fn rejects_single_class_and_bad_layout() {
        let (t, _) = separable(10, 4);
        assert!(matches!(
            train_classifier(&t, &[1; 10], &ClassifierConfig::default()),
            Err(Error::SingleClassTrain)
        ));
        let (t, y) = separable(20, 4);
        let cfg = ClassifierConfig {
            max_epochs: 5,
            patience: 2,
            ..Default::default()
        };
        let m = train_classifier(&t, &y, &cfg).unwrap().model;
        let wide = table(&[vec![0.0; 3]]);
        assert!(matches!(m.predict(&wide), Err(Error::MisalignedInputs(_))));
    }

    #[test]
    fn model_json_round_trip() {
        let (t, y) = separable(20, 6);
        let cfg = ClassifierConfig {
            max_epochs: 5,
            patience: 2,
            ..Default::default()
        };
        let m = train_classifier(&t, &y, &cfg).unwrap().model;
        assert_eq!(RoleModel::from_json(&m.to_json().unwrap()).unwrap(), m);
    }

    #[test]
    fn trailing_singleton_batch_is_merged() {
        let order: Vec<usize> = (0..65).collect();
        let b = batches(&order, 32);
        assert_eq!(b.iter().map(|x| x.len()).collect::<Vec<_>>(), vec![32, 33]);
        assert_eq!(batches(&order[..1], 32).len(), 1);
    }
}
