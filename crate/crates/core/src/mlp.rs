//! Fully connected feedforward networks trained by backpropagation and
//! mini-batch SGD: two-class classifiers (MSE or cross-entropy loss) and
//! autoencoders for one-class verification.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::channel::FeatureVector;
use crate::error::{Error, Result};
use crate::features::{db_row, db_rows, labels, Standardizer};
use crate::geometry::RegionLabel;
use crate::textfmt::{TextReader, TextWriter};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Identity,
    Sigmoid,
    Tanh,
}

impl Activation {
    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Identity => z,
            Activation::Sigmoid => sigmoid(z),
            Activation::Tanh => z.tanh(),
        }
    }

    /// Derivative expressed through the output `y = psi(z)`.
    fn slope(self, y: f64) -> f64 {
        match self {
            Activation::Identity => 1.0,
            Activation::Sigmoid => y * (1.0 - y),
            Activation::Tanh => 1.0 - y * y,
        }
    }

    fn name(self) -> &'static str {
        match self {
            Activation::Identity => "identity",
            Activation::Sigmoid => "sigmoid",
            Activation::Tanh => "tanh",
        }
    }

    fn parse(s: &str) -> Result<Self> {
        match s {
            "identity" => Ok(Activation::Identity),
            "sigmoid" => Ok(Activation::Sigmoid),
            "tanh" => Ok(Activation::Tanh),
            other => Err(Error::Data(format!("unknown activation '{other}'"))),
        }
    }
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Loss {
    Mse,
    CrossEntropy,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MlpConfig {
    /// Neurons per layer, input first.
    pub sizes: Vec<usize>,
    /// One activation per entry of `sizes`; the first (input) is identity.
    pub activations: Vec<Activation>,
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
}

impl Default for MlpConfig {
    fn default() -> Self {
        Self::classifier(1, &[5, 5])
    }
}

impl MlpConfig {
    /// Sigmoid hidden layers and a single sigmoid output.
    pub fn classifier(n_in: usize, hidden: &[usize]) -> Self {
        let mut sizes = vec![n_in];
        sizes.extend_from_slice(hidden);
        sizes.push(1);
        let mut activations = vec![Activation::Identity];
        activations.extend(std::iter::repeat_n(Activation::Sigmoid, hidden.len() + 1));
        Self { sizes, activations, learning_rate: 0.05, epochs: 50, batch_size: 32, seed: 0 }
    }

    /// Sigmoid hidden layers, except a linear central (narrowest) layer, and
    /// a linear output layer.
    pub fn autoencoder(sizes: Vec<usize>) -> Self {
        let n = sizes.len();
        let central = (1..n.saturating_sub(1)).min_by_key(|&i| sizes[i]).unwrap_or(0);
        let activations = (0..n)
            .map(|i| if i == 0 || i == n - 1 || i == central { Activation::Identity } else { Activation::Sigmoid })
            .collect();
        Self { sizes, activations, learning_rate: 0.05, epochs: 50, batch_size: 32, seed: 0 }
    }

    /// Default autoencoder shape for `n` inputs: the 7-6-3-2-3-6-7 stack
    /// for ten or more inputs, a narrower one otherwise.
    pub fn default_autoencoder(n: usize) -> Self {
        let sizes = if n >= 10 {
            vec![n, 7, 6, 3, 2, 3, 6, 7, n]
        } else {
            let code = (n / 2).max(1);
            let mid = n.saturating_sub(1);
            if mid > code {
                vec![n, mid, code, mid, n]
            } else {
                vec![n, code, n]
            }
        };
        Self::autoencoder(sizes)
    }

    pub fn validate(&self) -> Result<()> {
        if self.sizes.len() < 2 || self.sizes.contains(&0) {
            return Err(Error::InvalidConfig(format!("layer sizes must be >= 1 with at least two layers, got {:?}", self.sizes)));
        }
        if self.activations.len() != self.sizes.len() {
            return Err(Error::InvalidConfig(format!(
                "{} activations for {} layers",
                self.activations.len(),
                self.sizes.len()
            )));
        }
        if self.activations[0] != Activation::Identity {
            return Err(Error::InvalidConfig("input layer activation must be identity".into()));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::InvalidConfig("learning rate must be positive".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::InvalidConfig("batch size must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub n_in: usize,
    pub n_out: usize,
    /// `n_out x n_in`, row-major.
    pub w: Vec<f64>,
    pub b: Vec<f64>,
    pub activation: Activation,
}

impl Layer {
    fn forward(&self, x: &[f64], z: &mut [f64], y: &mut [f64]) {
        for o in 0..self.n_out {
            let row = &self.w[o * self.n_in..(o + 1) * self.n_in];
            let s: f64 = row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>() + self.b[o];
            z[o] = s;
            y[o] = self.activation.apply(s);
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MlpKind {
    Classifier(Loss),
    Autoencoder,
}

/// A trained network together with its input standardization.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    pub layers: Vec<Layer>,
    pub standardizer: Standardizer,
    pub kind: MlpKind,
    /// Full training-set loss before training and after each epoch.
    pub loss_trace: Vec<f64>,
}

/// Network parameters with Glorot-uniform weights and zero biases.
pub fn init_layers<R: Rng + ?Sized>(config: &MlpConfig, rng: &mut R) -> Result<Vec<Layer>> {
    config.validate()?;
    Ok(config
        .sizes
        .windows(2)
        .enumerate()
        .map(|(l, w)| {
            let (n_in, n_out) = (w[0], w[1]);
            let limit = (6.0 / (n_in + n_out) as f64).sqrt();
            Layer {
                n_in,
                n_out,
                w: (0..n_in * n_out).map(|_| rng.random_range(-limit..=limit)).collect(),
                b: vec![0.0; n_out],
                activation: config.activations[l + 1],
            }
        })
        .collect())
}

/// Forward pass on an already standardized input.
pub fn forward_raw(layers: &[Layer], x: &[f64]) -> Vec<f64> {
    let mut cur = x.to_vec();
    for l in layers {
        let mut z = vec![0.0; l.n_out];
        let mut y = vec![0.0; l.n_out];
        l.forward(&cur, &mut z, &mut y);
        cur = y;
    }
    cur
}

fn sample_loss(loss: Loss, z_out: &[f64], y_out: &[f64], t: &[f64]) -> f64 {
    match loss {
        Loss::Mse => y_out.iter().zip(t).map(|(y, t)| (y - t) * (y - t)).sum::<f64>() / y_out.len() as f64,
        Loss::CrossEntropy => z_out.iter().zip(t).map(|(z, t)| t * softplus(-z) + (1.0 - t) * softplus(*z)).sum(),
    }
}

/// Mean loss over a dataset of standardized inputs and targets.
pub fn loss_raw(layers: &[Layer], loss: Loss, xs: &[Vec<f64>], ts: &[Vec<f64>]) -> f64 {
    let mut ws = Workspace::new(layers);
    let total: f64 = xs
        .iter()
        .zip(ts)
        .map(|(x, t)| {
            ws.forward(layers, x);
            let last = layers.len() - 1;
            sample_loss(loss, &ws.z[last], &ws.y[last + 1], t)
        })
        .sum();
    total / xs.len() as f64
}

struct Workspace {
    /// Pre-activations per layer.
    z: Vec<Vec<f64>>,
    /// Outputs per layer, `y[0]` being the input.
    y: Vec<Vec<f64>>,
    delta: Vec<Vec<f64>>,
}

impl Workspace {
    fn new(layers: &[Layer]) -> Self {
        let mut y = vec![vec![0.0; layers[0].n_in]];
        y.extend(layers.iter().map(|l| vec![0.0; l.n_out]));
        Self {
            z: layers.iter().map(|l| vec![0.0; l.n_out]).collect(),
            y,
            delta: layers.iter().map(|l| vec![0.0; l.n_out]).collect(),
        }
    }

    fn forward(&mut self, layers: &[Layer], x: &[f64]) {
        self.y[0].copy_from_slice(x);
        for (l, layer) in layers.iter().enumerate() {
            let (head, tail) = self.y.split_at_mut(l + 1);
            layer.forward(&head[l], &mut self.z[l], &mut tail[0]);
        }
    }

    /// Accumulates `weight * dLoss/dparams` for one sample into `grads`
    /// (laid out as in [`flatten`]) and returns the sample loss.
    fn backward(&mut self, layers: &[Layer], loss: Loss, t: &[f64], weight: f64, grads: &mut [f64]) -> f64 {
        let last = layers.len() - 1;
        let out = &self.y[last + 1];
        let value = sample_loss(loss, &self.z[last], out, t);
        let act = layers[last].activation;
        for k in 0..out.len() {
            self.delta[last][k] = match loss {
                Loss::Mse => 2.0 * (out[k] - t[k]) / out.len() as f64 * act.slope(out[k]),
                Loss::CrossEntropy => out[k] - t[k],
            };
        }
        let mut offsets = Vec::with_capacity(layers.len());
        let mut off = 0;
        for l in layers {
            offsets.push(off);
            off += l.w.len() + l.b.len();
        }
        for l in (0..layers.len()).rev() {
            let layer = &layers[l];
            let base = offsets[l];
            let input = &self.y[l];
            for o in 0..layer.n_out {
                let d = weight * self.delta[l][o];
                let row = &mut grads[base + o * layer.n_in..base + (o + 1) * layer.n_in];
                for (g, v) in row.iter_mut().zip(input) {
                    *g += d * v;
                }
                grads[base + layer.w.len() + o] += d;
            }
            if l > 0 {
                let prev_act = layers[l - 1].activation;
                let (before, after) = self.delta.split_at_mut(l);
                for i in 0..layer.n_in {
                    let s: f64 = (0..layer.n_out).map(|o| layer.w[o * layer.n_in + i] * after[0][o]).sum();
                    before[l - 1][i] = s * prev_act.slope(self.y[l][i]);
                }
            }
        }
        value
    }
}

/// Parameters in the order `w_0, b_0, w_1, b_1, ...`.
pub fn flatten(layers: &[Layer]) -> Vec<f64> {
    layers.iter().flat_map(|l| l.w.iter().chain(&l.b).copied()).collect()
}

pub fn unflatten(layers: &mut [Layer], params: &[f64]) {
    let mut off = 0;
    for l in layers {
        let nw = l.w.len();
        l.w.copy_from_slice(&params[off..off + nw]);
        off += nw;
        let nb = l.b.len();
        l.b.copy_from_slice(&params[off..off + nb]);
        off += nb;
    }
}

/// Mean loss and its gradient over a batch, by backpropagation.
pub fn gradient_raw(layers: &[Layer], loss: Loss, xs: &[Vec<f64>], ts: &[Vec<f64>]) -> (f64, Vec<f64>) {
    let mut grads = vec![0.0; layers.iter().map(|l| l.w.len() + l.b.len()).sum()];
    let mut ws = Workspace::new(layers);
    let w = 1.0 / xs.len() as f64;
    let mut total = 0.0;
    for (x, t) in xs.iter().zip(ts) {
        ws.forward(layers, x);
        total += ws.backward(layers, loss, t, w, &mut grads);
    }
    (total * w, grads)
}

/// Mini-batch SGD on standardized inputs. Returns the trained layers and
/// the loss trace (initial loss, then one entry per epoch).
pub fn fit_raw(config: &MlpConfig, loss: Loss, xs: &[Vec<f64>], ts: &[Vec<f64>]) -> Result<(Vec<Layer>, Vec<f64>)> {
    config.validate()?;
    if xs.is_empty() {
        return Err(Error::EmptyClass("no training samples".into()));
    }
    let n_in = config.sizes[0];
    let n_out = *config.sizes.last().expect("validated");
    if let Some(x) = xs.iter().find(|x| x.len() != n_in) {
        return Err(Error::DimensionMismatch { expected: n_in, found: x.len() });
    }
    if let Some(t) = ts.iter().find(|t| t.len() != n_out) {
        return Err(Error::DimensionMismatch { expected: n_out, found: t.len() });
    }
    if loss == Loss::CrossEntropy && *config.activations.last().expect("validated") != Activation::Sigmoid {
        return Err(Error::InvalidConfig("cross-entropy loss needs a sigmoid output layer".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut layers = init_layers(config, &mut rng)?;
    let mut trace = vec![loss_raw(&layers, loss, xs, ts)];
    if !trace[0].is_finite() {
        return Err(Error::Divergence { epoch: 0, trace });
    }
    let n_params = flatten(&layers).len();
    let mut grads = vec![0.0; n_params];
    let mut params = flatten(&layers);
    let mut order: Vec<usize> = (0..xs.len()).collect();
    let mut ws = Workspace::new(&layers);
    for epoch in 1..=config.epochs {
        order.shuffle(&mut rng);
        for batch in order.chunks(config.batch_size) {
            grads.iter_mut().for_each(|g| *g = 0.0);
            let w = 1.0 / batch.len() as f64;
            for &i in batch {
                ws.forward(&layers, &xs[i]);
                ws.backward(&layers, loss, &ts[i], w, &mut grads);
            }
            for (p, g) in params.iter_mut().zip(&grads) {
                *p -= config.learning_rate * g;
            }
            unflatten(&mut layers, &params);
        }
        let value = loss_raw(&layers, loss, xs, ts);
        trace.push(value);
        if !value.is_finite() {
            return Err(Error::Divergence { epoch, trace });
        }
    }
    Ok((layers, trace))
}

fn class_target(label: RegionLabel) -> f64 {
    match label {
        RegionLabel::H0 => 0.0,
        RegionLabel::H1 => 1.0,
    }
}

fn train_classifier(config: &MlpConfig, data: &[FeatureVector], loss: Loss) -> Result<Mlp> {
    let ls = labels(data)?;
    if !ls.contains(&RegionLabel::H0) || !ls.contains(&RegionLabel::H1) {
        return Err(Error::EmptyClass("two-class training needs both labels".into()));
    }
    if *config.sizes.last().unwrap_or(&0) != 1 {
        return Err(Error::InvalidConfig("classifier must have a single output".into()));
    }
    let rows = db_rows(data);
    let standardizer = Standardizer::fit(&rows)?;
    let xs: Vec<Vec<f64>> = rows.iter().map(|r| standardizer.transform(r)).collect::<Result<_>>()?;
    let ts: Vec<Vec<f64>> = ls.iter().map(|&l| vec![class_target(l)]).collect();
    let (layers, loss_trace) = fit_raw(config, loss, &xs, &ts)?;
    Ok(Mlp { layers, standardizer, kind: MlpKind::Classifier(loss), loss_trace })
}

/// Two-class network trained on the mean squared error against {0, 1}
/// targets (H0 -> 0, H1 -> 1).
pub fn train_mse(config: &MlpConfig, data: &[FeatureVector]) -> Result<Mlp> {
    train_classifier(config, data, Loss::Mse)
}

/// Two-class network trained on the binary cross-entropy.
pub fn train_ce(config: &MlpConfig, data: &[FeatureVector]) -> Result<Mlp> {
    train_classifier(config, data, Loss::CrossEntropy)
}

/// Autoencoder trained to reconstruct standardized H0 inputs.
pub fn train_autoencoder(config: &MlpConfig, data_h0: &[FeatureVector]) -> Result<Mlp> {
    config.validate()?;
    let n = config.sizes[0];
    if *config.sizes.last().expect("validated") != n {
        return Err(Error::InvalidConfig("autoencoder output size must equal its input size".into()));
    }
    let code = config.sizes.iter().copied().min().expect("validated");
    if code >= n {
        return Err(Error::InvalidConfig(format!("autoencoder needs a bottleneck narrower than {n} inputs")));
    }
    if data_h0.iter().any(|v| v.label == Some(RegionLabel::H1)) {
        return Err(Error::Data("autoencoder training data contains H1 rows".into()));
    }
    if data_h0.is_empty() {
        return Err(Error::EmptyClass("no H0 training samples".into()));
    }
    let rows = db_rows(data_h0);
    let standardizer = Standardizer::fit(&rows)?;
    let xs: Vec<Vec<f64>> = rows.iter().map(|r| standardizer.transform(r)).collect::<Result<_>>()?;
    let (layers, loss_trace) = fit_raw(config, Loss::Mse, &xs, &xs)?;
    Ok(Mlp { layers, standardizer, kind: MlpKind::Autoencoder, loss_trace })
}

impl Mlp {
    pub fn n_inputs(&self) -> usize {
        self.layers[0].n_in
    }

    fn standardized(&self, a: &FeatureVector) -> Result<Vec<f64>> {
        if a.len() != self.n_inputs() {
            return Err(Error::DimensionMismatch { expected: self.n_inputs(), found: a.len() });
        }
        self.standardizer.transform(&db_row(a))
    }

    /// Network output for one observation.
    pub fn forward(&self, a: &FeatureVector) -> Result<Vec<f64>> {
        Ok(forward_raw(&self.layers, &self.standardized(a)?))
    }

    /// Soft output `t~(a)` of a classifier, or the reconstruction error of
    /// an autoencoder. Larger values favor H1 in both cases.
    pub fn score(&self, a: &FeatureVector) -> Result<f64> {
        match self.kind {
            MlpKind::Classifier(_) => Ok(self.forward(a)?[0]),
            MlpKind::Autoencoder => self.reconstruction_error(a),
        }
    }

    /// `(1/N) sum_n (x_n - y_n)^2` in standardized dB units.
    pub fn reconstruction_error(&self, a: &FeatureVector) -> Result<f64> {
        let x = self.standardized(a)?;
        let y = forward_raw(&self.layers, &x);
        Ok(x.iter().zip(&y).map(|(u, v)| (u - v) * (u - v)).sum::<f64>() / x.len() as f64)
    }

    pub fn to_text(&self) -> String {
        let mut w = TextWriter::default();
        let kind = match self.kind {
            MlpKind::Classifier(Loss::Mse) => "mse",
            MlpKind::Classifier(Loss::CrossEntropy) => "ce",
            MlpKind::Autoencoder => "autoencoder",
        };
        w.words("irlv-mlp", &["1", kind]);
        let mut sizes = vec![self.n_inputs()];
        sizes.extend(self.layers.iter().map(|l| l.n_out));
        w.ints("sizes", &sizes);
        let mut acts = vec!["identity"];
        acts.extend(self.layers.iter().map(|l| l.activation.name()));
        w.words("activations", &acts);
        w.reals("mean", &self.standardizer.mean);
        w.reals("scale", &self.standardizer.scale);
        for l in &self.layers {
            w.reals("w", &l.w);
            w.reals("b", &l.b);
        }
        w.ints("trace", &[self.loss_trace.len()]);
        w.reals("values", &self.loss_trace);
        w.finish()
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut r = TextReader::new(text);
        let head = r.expect("irlv-mlp")?;
        if head.len() != 2 || head[0] != "1" {
            return Err(Error::Data("unsupported network file version".into()));
        }
        let kind = match head[1] {
            "mse" => MlpKind::Classifier(Loss::Mse),
            "ce" => MlpKind::Classifier(Loss::CrossEntropy),
            "autoencoder" => MlpKind::Autoencoder,
            other => return Err(Error::Data(format!("unknown network kind '{other}'"))),
        };
        let sizes: Vec<usize> = r.parse("sizes", None)?;
        let acts = r.expect("activations")?;
        if acts.len() != sizes.len() || sizes.len() < 2 {
            return Err(Error::Data("inconsistent network header".into()));
        }
        let acts: Vec<Activation> = acts.iter().map(|a| Activation::parse(a)).collect::<Result<_>>()?;
        let standardizer = Standardizer { mean: r.reals("mean", sizes[0])?, scale: r.reals("scale", sizes[0])? };
        let mut layers = Vec::new();
        for (l, w) in sizes.windows(2).enumerate() {
            layers.push(Layer {
                n_in: w[0],
                n_out: w[1],
                w: r.reals("w", w[0] * w[1])?,
                b: r.reals("b", w[1])?,
                activation: acts[l + 1],
            });
        }
        let n: usize = r.one("trace")?;
        let loss_trace = r.reals("values", n)?;
        Ok(Self { layers, standardizer, kind, loss_trace })
    }
}

/// Classifier decision: `H1` iff `t~(a) > lambda`.
pub fn classify(model: &Mlp, a: &FeatureVector, lambda: f64) -> Result<RegionLabel> {
    Ok(if model.score(a)? > lambda { RegionLabel::H1 } else { RegionLabel::H0 })
}

/// Autoencoder novelty score (reconstruction error).
pub fn ae_score(model: &Mlp, a: &FeatureVector) -> Result<f64> {
    model.reconstruction_error(a)
}

/// Autoencoder decision: `H1` iff the reconstruction error is `>= lambda`.
pub fn ae_decide(score: f64, lambda: f64) -> RegionLabel {
    if score >= lambda {
        RegionLabel::H1
    } else {
        RegionLabel::H0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fv(a: &[f64], label: RegionLabel) -> FeatureVector {
        FeatureVector::new(a.to_vec()).unwrap().with_label(label)
    }

    fn rel_err(a: &[f64], b: &[f64]) -> f64 {
        let diff: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt();
        let norm = a.iter().map(|x| x * x).sum::<f64>().sqrt().max(b.iter().map(|x| x * x).sum::<f64>().sqrt());
        diff / norm.max(1e-300)
    }

    fn numeric_gradient(layers: &[Layer], loss: Loss, xs: &[Vec<f64>], ts: &[Vec<f64>]) -> Vec<f64> {
        let p0 = flatten(layers);
        let mut work = layers.to_vec();
        let h = 1e-5;
        (0..p0.len())
            .map(|k| {
                let mut p = p0.clone();
                p[k] = p0[k] + h;
                unflatten(&mut work, &p);
                let up = loss_raw(&work, loss, xs, ts);
                p[k] = p0[k] - h;
                unflatten(&mut work, &p);
                let down = loss_raw(&work, loss, xs, ts);
                (up - down) / (2.0 * h)
            })
            .collect()
    }

    #[test]
    fn zero_network_outputs_one_half() {
        let cfg = MlpConfig::classifier(3, &[4]);
        let mut layers = init_layers(&cfg, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        let zeros = vec![0.0; flatten(&layers).len()];
        unflatten(&mut layers, &zeros);
        assert_eq!(forward_raw(&layers, &[1.0, -2.0, 3.0]), vec![0.5]);
    }

    #[test]
    fn identity_layer_is_identity() {
        let layers = vec![Layer { n_in: 2, n_out: 2, w: vec![1.0, 0.0, 0.0, 1.0], b: vec![0.0, 0.0], activation: Activation::Identity }];
        assert_eq!(forward_raw(&layers, &[0.3, -7.0]), vec![0.3, -7.0]);
    }

    #[test]
    fn tiny_network_by_hand() {
        // Hidden: z1 = 0.5*1 - 1*2 + 0.1 = -1.4, z2 = 2*1 + 0.25*2 - 0.3 = 2.2.
        // Output: z = 1.5*s(-1.4) - 0.75*s(2.2) + 0.2.
        let layers = vec![
            Layer { n_in: 2, n_out: 2, w: vec![0.5, -1.0, 2.0, 0.25], b: vec![0.1, -0.3], activation: Activation::Sigmoid },
            Layer { n_in: 2, n_out: 1, w: vec![1.5, -0.75], b: vec![0.2], activation: Activation::Sigmoid },
        ];
        let out = forward_raw(&layers, &[1.0, 2.0])[0];
        // s(-1.4) = 0.197816111441418, s(2.2) = 0.900249510880496,
        // z = -0.178462965998109, s(z) = 0.455502296583198
        assert!((out - 0.455_502_296_583_198_5).abs() < 1e-12, "{out}");
    }

    #[test]
    fn gradients_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let acts = [Activation::Sigmoid, Activation::Tanh, Activation::Identity];
        for case in 0..20 {
            let n_in = rng.random_range(1..5);
            let depth = rng.random_range(1..4);
            let mut sizes = vec![n_in];
            let mut activations = vec![Activation::Identity];
            for _ in 0..depth {
                sizes.push(rng.random_range(1..6));
                activations.push(acts[rng.random_range(0..3)]);
            }
            let mode = case % 3;
            let (loss, n_out) = match mode {
                0 => (Loss::CrossEntropy, 1),
                1 => (Loss::Mse, 1),
                _ => (Loss::Mse, n_in),
            };
            sizes.push(n_out);
            activations.push(if mode == 2 { Activation::Identity } else { Activation::Sigmoid });
            let cfg = MlpConfig { sizes, activations, ..MlpConfig::default() };
            let layers = init_layers(&cfg, &mut rng).unwrap();
            let xs: Vec<Vec<f64>> = (0..7).map(|_| (0..n_in).map(|_| rng.random_range(-2.0..2.0)).collect()).collect();
            let ts: Vec<Vec<f64>> = if mode == 2 {
                xs.clone()
            } else {
                (0..7).map(|_| vec![f64::from(rng.random_range(0..2u8))]).collect()
            };
            let (_, analytic) = gradient_raw(&layers, loss, &xs, &ts);
            let numeric = numeric_gradient(&layers, loss, &xs, &ts);
            let err = rel_err(&analytic, &numeric);
            assert!(err <= 1e-5, "case {case}: relative error {err}");
        }
    }

    #[test]
    fn full_batch_descent_is_monotone() {
        let xs: Vec<Vec<f64>> = (0..40).map(|k| vec![(k as f64 - 20.0) / 10.0]).collect();
        let ts: Vec<Vec<f64>> = xs.iter().map(|x| vec![if x[0] > 0.3 { 1.0 } else { 0.0 }]).collect();
        let cfg = MlpConfig { learning_rate: 0.1, epochs: 200, batch_size: 40, ..MlpConfig::classifier(1, &[3]) };
        let (_, trace) = fit_raw(&cfg, Loss::CrossEntropy, &xs, &ts).unwrap();
        for w in trace.windows(2) {
            assert!(w[1] <= w[0] + 1e-12);
        }
    }

    #[test]
    fn separable_toy_set_is_learned() {
        let data: Vec<FeatureVector> = (1..=40)
            .map(|k| {
                let a = k as f64;
                fv(&[a], if k <= 20 { RegionLabel::H0 } else { RegionLabel::H1 })
            })
            .collect();
        for train in [train_ce, train_mse] {
            let cfg = MlpConfig { epochs: 400, learning_rate: 0.5, batch_size: 8, ..MlpConfig::classifier(1, &[3]) };
            let m = train(&cfg, &data).unwrap();
            let correct = data.iter().filter(|v| classify(&m, v, 0.5).unwrap() == v.label.unwrap()).count();
            assert_eq!(correct, data.len());
            assert!(m.loss_trace.last().unwrap() <= &m.loss_trace[0]);
        }
    }

    #[test]
    fn single_point_is_memorized() {
        let xs = vec![vec![0.7, -0.2]];
        let ts = vec![vec![0.3]];
        let cfg = MlpConfig {
            sizes: vec![2, 3, 1],
            activations: vec![Activation::Identity, Activation::Sigmoid, Activation::Identity],
            learning_rate: 0.1,
            epochs: 2000,
            batch_size: 1,
            seed: 3,
        };
        let (_, trace) = fit_raw(&cfg, Loss::Mse, &xs, &ts).unwrap();
        assert!(*trace.last().unwrap() < 1e-4);
    }

    #[test]
    fn cross_entropy_of_certain_predictions_vanishes() {
        let layers = vec![Layer { n_in: 1, n_out: 1, w: vec![100.0], b: vec![0.0], activation: Activation::Sigmoid }];
        let v = loss_raw(&layers, Loss::CrossEntropy, &[vec![1.0], vec![-1.0]], &[vec![1.0], vec![0.0]]);
        assert!(v < 1e-40);
    }

    #[test]
    fn thresholds() {
        let data = vec![fv(&[1.0], RegionLabel::H0), fv(&[10.0], RegionLabel::H1)];
        let m = train_ce(&MlpConfig { epochs: 1, ..MlpConfig::classifier(1, &[2]) }, &data).unwrap();
        for v in &data {
            assert_eq!(classify(&m, v, 1.0).unwrap(), RegionLabel::H0);
            assert_eq!(classify(&m, v, -0.1).unwrap(), RegionLabel::H1);
        }
        let mut zero = m.clone();
        for l in &mut zero.layers {
            l.w.iter_mut().chain(l.b.iter_mut()).for_each(|w| *w = 0.0);
        }
        assert_eq!(classify(&zero, &data[0], 0.5).unwrap(), RegionLabel::H0);
    }

    #[test]
    fn divergence_is_reported() {
        let xs: Vec<Vec<f64>> = (0..10).map(|k| vec![k as f64]).collect();
        let cfg = MlpConfig {
            sizes: vec![1, 1],
            activations: vec![Activation::Identity, Activation::Identity],
            learning_rate: 10.0,
            epochs: 200,
            batch_size: 10,
            seed: 0,
        };
        assert!(matches!(fit_raw(&cfg, Loss::Mse, &xs, &xs), Err(Error::Divergence { .. })));
    }

    #[test]
    fn autoencoder_on_constant_data() {
        let data: Vec<FeatureVector> = (0..50).map(|_| fv(&[3.0, 5.0, 7.0], RegionLabel::H0)).collect();
        let cfg = MlpConfig { epochs: 300, ..MlpConfig::default_autoencoder(3) };
        let m = train_autoencoder(&cfg, &data).unwrap();
        assert!(ae_score(&m, &data[0]).unwrap() < 1e-6);
        assert_eq!(ae_decide(0.0, 0.0), RegionLabel::H1);
    }

    #[test]
    fn autoencoder_shape_rules() {
        assert_eq!(MlpConfig::default_autoencoder(10).sizes, vec![10, 7, 6, 3, 2, 3, 6, 7, 10]);
        let cfg = MlpConfig::default_autoencoder(10);
        assert_eq!(cfg.activations[4], Activation::Identity);
        assert_eq!(cfg.activations[8], Activation::Identity);
        assert_eq!(cfg.activations[3], Activation::Sigmoid);
        let data = vec![fv(&[1.0, 2.0], RegionLabel::H0)];
        assert!(train_autoencoder(&MlpConfig::autoencoder(vec![2, 3, 2]), &data).is_err());
        let mixed = vec![fv(&[1.0, 2.0], RegionLabel::H1)];
        assert!(train_autoencoder(&MlpConfig::default_autoencoder(2), &mixed).is_err());
    }

    #[test]
    fn text_round_trip() {
        let data: Vec<FeatureVector> =
            (1..30).map(|k| fv(&[k as f64, (k * k) as f64], if k < 15 { RegionLabel::H0 } else { RegionLabel::H1 })).collect();
        let m = train_ce(&MlpConfig { epochs: 3, ..MlpConfig::classifier(2, &[5, 5]) }, &data).unwrap();
        let back = Mlp::from_text(&m.to_text()).unwrap();
        assert_eq!(back, m);
        assert!(Mlp::from_text("irlv-mlp 2 ce\n").is_err());
    }

    #[test]
    fn deterministic_given_seed() {
        let data: Vec<FeatureVector> =
            (1..30).map(|k| fv(&[k as f64], if k < 15 { RegionLabel::H0 } else { RegionLabel::H1 })).collect();
        let cfg = MlpConfig { epochs: 5, seed: 9, ..MlpConfig::classifier(1, &[4]) };
        assert_eq!(train_ce(&cfg, &data).unwrap(), train_ce(&cfg, &data).unwrap());
    }

    #[test]
    fn affine_input_rescaling_keeps_decisions() {
        let base: Vec<(f64, RegionLabel)> =
            (1..60).map(|k| (40.0 + k as f64 * 0.7, if k < 30 { RegionLabel::H0 } else { RegionLabel::H1 })).collect();
        let a: Vec<FeatureVector> = base.iter().map(|&(db, l)| fv(&[10f64.powf(db / 10.0)], l)).collect();
        let b: Vec<FeatureVector> = base.iter().map(|&(db, l)| fv(&[10f64.powf((2.0 * db + 5.0) / 10.0)], l)).collect();
        let cfg = MlpConfig { epochs: 20, ..MlpConfig::classifier(1, &[3]) };
        let (ma, mb) = (train_ce(&cfg, &a).unwrap(), train_ce(&cfg, &b).unwrap());
        for (u, v) in a.iter().zip(&b) {
            assert_eq!(classify(&ma, u, 0.5).unwrap(), classify(&mb, v, 0.5).unwrap());
            assert!((ma.score(u).unwrap() - mb.score(v).unwrap()).abs() < 1e-9);
        }
    }
}
