//! Behavior-cloning baseline: a small fully-connected network that maps
//! sector gaps and speed to a lane action.

use std::path::Path;
use std::time::{Duration, Instant};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::NumericState;
use crate::fsutil::write_atomic;
use crate::ingest::{encode_features, StateActionPair, FEATURE_COUNT};
use crate::policy::{decide, Decision, LaneAction, PolicyConfig, PolicyError};
use crate::sim::EgoPolicy;

pub const LAYER_SIZES: [usize; 4] = [FEATURE_COUNT, 128, 128, 3];
const PARAMS_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum DilError {
    #[error("input contains a non-finite value")]
    NonFiniteInput,
    #[error("no training pairs")]
    EmptyDataset,
    #[error("invalid training config: {0}")]
    BadConfig(&'static str),
    #[error("invalid parameter file: {0}")]
    BadParams(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// Fully-connected layer; `weights[i * outputs + j]` connects input i to output j.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    pub inputs: usize,
    pub outputs: usize,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Layer {
    fn zeros(inputs: usize, outputs: usize) -> Self {
        Self {
            inputs,
            outputs,
            weights: vec![0.0; inputs * outputs],
            bias: vec![0.0; outputs],
        }
    }

    fn affine(&self, x: &[f64], out: &mut Vec<f64>) {
        out.clear();
        out.extend_from_slice(&self.bias);
        for (i, &xi) in x.iter().enumerate() {
            if xi == 0.0 {
                continue;
            }
            let row = &self.weights[i * self.outputs..(i + 1) * self.outputs];
            for (o, w) in out.iter_mut().zip(row) {
                *o += xi * w;
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpParams {
    pub layers: Vec<Layer>,
}

impl MlpParams {
    pub fn zeros() -> Self {
        Self {
            layers: LAYER_SIZES
                .windows(2)
                .map(|w| Layer::zeros(w[0], w[1]))
                .collect(),
        }
    }

    /// Weights uniform in ±sqrt(6 / fan_in), biases zero.
    pub fn init(seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut p = Self::zeros();
        for l in &mut p.layers {
            let r = (6.0 / l.inputs as f64).sqrt();
            for w in &mut l.weights {
                *w = rng.gen_range(-r..=r);
            }
        }
        p
    }

    pub fn validate(&self) -> Result<(), DilError> {
        let shapes: Vec<(usize, usize)> =
            self.layers.iter().map(|l| (l.inputs, l.outputs)).collect();
        let want: Vec<(usize, usize)> = LAYER_SIZES.windows(2).map(|w| (w[0], w[1])).collect();
        if shapes != want {
            return Err(DilError::BadParams(format!(
                "layer shapes {shapes:?}, expected {want:?}"
            )));
        }
        for l in &self.layers {
            if l.weights.len() != l.inputs * l.outputs || l.bias.len() != l.outputs {
                return Err(DilError::BadParams(
                    "weight or bias length does not match shape".into(),
                ));
            }
            if l.weights.iter().chain(&l.bias).any(|v| !v.is_finite()) {
                return Err(DilError::BadParams("non-finite parameter".into()));
            }
        }
        Ok(())
    }

    pub fn param_count(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.weights.len() + l.bias.len())
            .sum()
    }

    /// All parameters in layer order, weights before biases.
    pub fn flat(&self) -> Vec<f64> {
        self.layers
            .iter()
            .flat_map(|l| l.weights.iter().chain(&l.bias).copied())
            .collect()
    }

    pub fn get(&self, k: usize) -> f64 {
        *self.locate(k)
    }

    pub fn set(&mut self, k: usize, v: f64) {
        *self.locate_mut(k) = v;
    }

    fn locate(&self, mut k: usize) -> &f64 {
        for l in &self.layers {
            if k < l.weights.len() {
                return &l.weights[k];
            }
            k -= l.weights.len();
            if k < l.bias.len() {
                return &l.bias[k];
            }
            k -= l.bias.len();
        }
        panic!("parameter index out of range");
    }

    fn locate_mut(&mut self, mut k: usize) -> &mut f64 {
        for l in &mut self.layers {
            if k < l.weights.len() {
                return &mut l.weights[k];
            }
            k -= l.weights.len();
            if k < l.bias.len() {
                return &mut l.bias[k];
            }
            k -= l.bias.len();
        }
        panic!("parameter index out of range");
    }
}

#[derive(Serialize, Deserialize)]
struct ParamsFile {
    version: u32,
    shape: Vec<usize>,
    layers: Vec<Layer>,
}

pub fn save_params(path: &Path, p: &MlpParams) -> Result<(), DilError> {
    let file = ParamsFile {
        version: PARAMS_VERSION,
        shape: LAYER_SIZES.to_vec(),
        layers: p.layers.clone(),
    };
    let json = serde_json::to_vec(&file).expect("params serialize");
    write_atomic(path, &json).map_err(|e| io_error(path, e))
}

pub fn load_params(path: &Path) -> Result<MlpParams, DilError> {
    let text = std::fs::read(path).map_err(|e| io_error(path, e))?;
    let file: ParamsFile =
        serde_json::from_slice(&text).map_err(|e| DilError::BadParams(e.to_string()))?;
    if file.version != PARAMS_VERSION {
        return Err(DilError::BadParams(format!(
            "unsupported version {}",
            file.version
        )));
    }
    if file.shape != LAYER_SIZES {
        return Err(DilError::BadParams(format!("shape {:?}", file.shape)));
    }
    let p = MlpParams {
        layers: file.layers,
    };
    p.validate()?;
    Ok(p)
}

fn io_error(path: &Path, source: std::io::Error) -> DilError {
    DilError::Io {
        path: path.display().to_string(),
        source,
    }
}

/// Activations kept for backpropagation.
#[derive(Debug, Default)]
struct Tape {
    h1: Vec<f64>,
    h2: Vec<f64>,
    z: Vec<f64>,
    p: Vec<f64>,
}

fn relu(v: &mut [f64]) {
    for x in v {
        *x = x.max(0.0);
    }
}

fn softmax(z: &[f64], out: &mut Vec<f64>) {
    let m = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    out.clear();
    out.extend(z.iter().map(|v| (v - m).exp()));
    let s: f64 = out.iter().sum();
    for v in out.iter_mut() {
        *v /= s;
    }
}

fn run(p: &MlpParams, x: &[f64], t: &mut Tape) {
    p.layers[0].affine(x, &mut t.h1);
    relu(&mut t.h1);
    p.layers[1].affine(&t.h1, &mut t.h2);
    relu(&mut t.h2);
    p.layers[2].affine(&t.h2, &mut t.z);
    softmax(&t.z, &mut t.p);
}

/// Class probabilities ordered (LK, LLC, RLC).
pub fn forward(p: &MlpParams, x: &[f64; FEATURE_COUNT]) -> Result<[f64; 3], DilError> {
    if x.iter().any(|v| !v.is_finite()) {
        return Err(DilError::NonFiniteInput);
    }
    let mut t = Tape::default();
    run(p, x, &mut t);
    Ok([t.p[0], t.p[1], t.p[2]])
}

/// Mean squared difference over the three components.
pub fn mse_loss(probs: &[f64; 3], label: &[f64; 3]) -> f64 {
    probs
        .iter()
        .zip(label)
        .map(|(p, y)| (p - y).powi(2))
        .sum::<f64>()
        / 3.0
}

pub fn batch_loss(p: &MlpParams, batch: &[StateActionPair]) -> f64 {
    let mut t = Tape::default();
    batch
        .iter()
        .map(|s| {
            run(p, &s.features, &mut t);
            mse_loss(&[t.p[0], t.p[1], t.p[2]], &s.one_hot())
        })
        .sum::<f64>()
        / batch.len() as f64
}

/// Gradient of the batch-mean loss, shaped like the parameters; also returns the loss.
pub fn gradients(p: &MlpParams, batch: &[StateActionPair]) -> (MlpParams, f64) {
    let mut g = MlpParams::zeros();
    let mut t = Tape::default();
    let scale = 1.0 / batch.len() as f64;
    let mut loss = 0.0;
    let mut d2 = vec![0.0; LAYER_SIZES[2]];
    let mut d1 = vec![0.0; LAYER_SIZES[1]];
    for s in batch {
        run(p, &s.features, &mut t);
        let y = s.one_hot();
        loss += mse_loss(&[t.p[0], t.p[1], t.p[2]], &y);
        // through the loss and softmax
        let dp: Vec<f64> = (0..3)
            .map(|k| 2.0 * (t.p[k] - y[k]) / 3.0 * scale)
            .collect();
        let dot: f64 = (0..3).map(|k| dp[k] * t.p[k]).sum();
        let dz: Vec<f64> = (0..3).map(|k| t.p[k] * (dp[k] - dot)).collect();

        backprop_layer(&p.layers[2], &mut g.layers[2], &t.h2, &dz, Some(&mut d2));
        for (d, h) in d2.iter_mut().zip(&t.h2) {
            if *h <= 0.0 {
                *d = 0.0;
            }
        }
        backprop_layer(&p.layers[1], &mut g.layers[1], &t.h1, &d2, Some(&mut d1));
        for (d, h) in d1.iter_mut().zip(&t.h1) {
            if *h <= 0.0 {
                *d = 0.0;
            }
        }
        backprop_layer(&p.layers[0], &mut g.layers[0], &s.features, &d1, None);
    }
    (g, loss * scale)
}

/// Accumulates weight and bias gradients; writes the input gradient if asked.
fn backprop_layer(l: &Layer, g: &mut Layer, x: &[f64], dout: &[f64], dx: Option<&mut Vec<f64>>) {
    for (gb, d) in g.bias.iter_mut().zip(dout) {
        *gb += d;
    }
    for (i, &xi) in x.iter().enumerate() {
        if xi == 0.0 {
            continue;
        }
        let row = &mut g.weights[i * l.outputs..(i + 1) * l.outputs];
        for (gw, d) in row.iter_mut().zip(dout) {
            *gw += xi * d;
        }
    }
    if let Some(dx) = dx {
        for (i, v) in dx.iter_mut().enumerate() {
            let row = &l.weights[i * l.outputs..(i + 1) * l.outputs];
            *v = row.iter().zip(dout).map(|(w, d)| w * d).sum();
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_eps: f64,
    /// Stop after this many epochs without a lower training loss; 0 disables.
    pub patience: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-4,
            batch_size: 256,
            epochs: 50,
            seed: 0,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_eps: 1e-8,
            patience: 5,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), DilError> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(DilError::BadConfig("learning rate must be positive"));
        }
        if self.batch_size == 0 {
            return Err(DilError::BadConfig("batch size must be at least 1"));
        }
        if !((0.0..1.0).contains(&self.adam_beta1)
            && (0.0..1.0).contains(&self.adam_beta2)
            && self.adam_eps > 0.0)
        {
            return Err(DilError::BadConfig(
                "Adam betas must lie in [0, 1) and eps be positive",
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    /// Mean sample loss of each epoch that ran.
    pub epoch_losses: Vec<f64>,
    pub wall_time: Duration,
    pub stopped_early: bool,
}

struct Adam {
    m: Vec<f64>,
    v: Vec<f64>,
    step: i32,
}

impl Adam {
    fn new(n: usize) -> Self {
        Self {
            m: vec![0.0; n],
            v: vec![0.0; n],
            step: 0,
        }
    }

    fn update(&mut self, p: &mut MlpParams, g: &MlpParams, cfg: &TrainConfig) {
        self.step += 1;
        let (b1, b2) = (cfg.adam_beta1, cfg.adam_beta2);
        let c1 = 1.0 - b1.powi(self.step);
        let c2 = 1.0 - b2.powi(self.step);
        let mut k = 0;
        for (pl, gl) in p.layers.iter_mut().zip(&g.layers) {
            let params = pl.weights.iter_mut().chain(pl.bias.iter_mut());
            let grads = gl.weights.iter().chain(&gl.bias);
            for (w, gr) in params.zip(grads) {
                self.m[k] = b1 * self.m[k] + (1.0 - b1) * gr;
                self.v[k] = b2 * self.v[k] + (1.0 - b2) * gr * gr;
                let m_hat = self.m[k] / c1;
                let v_hat = self.v[k] / c2;
                *w -= cfg.learning_rate * m_hat / (v_hat.sqrt() + cfg.adam_eps);
                k += 1;
            }
        }
    }
}

/// Mini-batch Adam from a seeded initialization, reshuffled every epoch.
pub fn train(
    pairs: &[StateActionPair],
    cfg: &TrainConfig,
) -> Result<(MlpParams, TrainReport), DilError> {
    cfg.validate()?;
    if pairs.is_empty() {
        return Err(DilError::EmptyDataset);
    }
    if pairs
        .iter()
        .any(|p| p.features.iter().any(|v| !v.is_finite()))
    {
        return Err(DilError::NonFiniteInput);
    }
    let start = Instant::now();
    let mut params = MlpParams::init(cfg.seed);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(1));
    let mut adam = Adam::new(params.param_count());
    let mut order: Vec<usize> = (0..pairs.len()).collect();
    let mut losses = Vec::with_capacity(cfg.epochs);
    let mut best = f64::INFINITY;
    let mut stale = 0;
    let mut stopped_early = false;
    let mut batch = Vec::with_capacity(cfg.batch_size);
    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for chunk in order.chunks(cfg.batch_size) {
            batch.clear();
            batch.extend(chunk.iter().map(|&i| pairs[i]));
            let (g, loss) = gradients(&params, &batch);
            total += loss * chunk.len() as f64;
            adam.update(&mut params, &g, cfg);
        }
        let mean = total / pairs.len() as f64;
        log::debug!("epoch {epoch}: loss {mean:.6}");
        losses.push(mean);
        if mean < best {
            best = mean;
            stale = 0;
        } else {
            stale += 1;
            if cfg.patience > 0 && stale >= cfg.patience {
                stopped_early = true;
                break;
            }
        }
    }
    Ok((
        params,
        TrainReport {
            epoch_losses: losses,
            wall_time: start.elapsed(),
            stopped_early,
        },
    ))
}

pub fn write_loss_csv(path: &Path, report: &TrainReport) -> Result<(), DilError> {
    let mut out = String::from("epoch,loss\n");
    for (i, l) in report.epoch_losses.iter().enumerate() {
        out.push_str(&format!("{},{l}\n", i + 1));
    }
    write_atomic(path, out.as_bytes()).map_err(|e| io_error(path, e))
}

/// Most probable action; any tie for the top goes to LK.
pub fn argmax_action(probs: &[f64; 3]) -> LaneAction {
    let top = probs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let winners: Vec<usize> = (0..3).filter(|&k| probs[k] == top).collect();
    match winners.as_slice() {
        [k] => LaneAction::ALL[*k],
        _ => LaneAction::LK,
    }
}

pub fn dil_action(
    p: &MlpParams,
    ns: &NumericState,
    cfg: &PolicyConfig,
    v_max: f64,
) -> Result<LaneAction, DilError> {
    let x = encode_features(ns, &cfg.thresholds, v_max);
    Ok(argmax_action(&forward(p, &x)?))
}

/// Lane actions from the network, longitudinal control from the shared phase law.
#[derive(Debug, Clone)]
pub struct DilPolicy {
    pub params: MlpParams,
    pub control: PolicyConfig,
    pub v_max: f64,
}

impl DilPolicy {
    pub fn new(params: MlpParams, control: PolicyConfig) -> Self {
        Self {
            params,
            control,
            v_max: crate::ingest::ExtractConfig::default().v_max,
        }
    }
}

impl EgoPolicy for DilPolicy {
    fn decide(&self, ns: &NumericState) -> Result<Decision, PolicyError> {
        let mut d = decide(ns, &self.control)?;
        d.lane_action =
            dil_action(&self.params, ns, &self.control, self.v_max).unwrap_or(LaneAction::LK);
        Ok(d)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pair(features: [f64; 9], label: LaneAction) -> StateActionPair {
        StateActionPair { features, label }
    }

    #[test]
    fn shapes() {
        let p = MlpParams::init(1);
        p.validate().unwrap();
        let widths: Vec<usize> = p.layers.iter().map(|l| l.outputs).collect();
        assert_eq!(widths, vec![128, 128, 3]);
        assert_eq!(
            p.param_count(),
            9 * 128 + 128 + 128 * 128 + 128 + 128 * 3 + 3
        );
        assert_eq!(p.flat().len(), p.param_count());
    }

    #[test]
    fn zero_params_give_uniform_probabilities() {
        let probs = forward(&MlpParams::zeros(), &[0.3; 9]).unwrap();
        for v in probs {
            assert!((v - 1.0 / 3.0).abs() < 1e-15);
        }
        let mut x = [0.5; 9];
        x[2] = f64::NAN;
        assert!(matches!(
            forward(&MlpParams::zeros(), &x),
            Err(DilError::NonFiniteInput)
        ));
    }

    #[test]
    fn loss_values() {
        assert_eq!(mse_loss(&[0.0, 1.0, 0.0], &[0.0, 1.0, 0.0]), 0.0);
        let u = 1.0 / 3.0;
        assert!((mse_loss(&[u, u, u], &[1.0, 0.0, 0.0]) - 2.0 / 9.0).abs() < 1e-15);
        let p = MlpParams::init(4);
        let s = pair(
            [0.2, 0.4, 1.0, 1.0, 0.9, 1.0, 0.1, 1.0, 0.6],
            LaneAction::RLC,
        );
        assert_eq!(batch_loss(&p, &[s]), batch_loss(&p, &[s, s]));
    }

    #[test]
    fn argmax_and_ties() {
        assert_eq!(argmax_action(&[0.1, 0.7, 0.2]), LaneAction::LLC);
        assert_eq!(argmax_action(&[0.1, 0.2, 0.7]), LaneAction::RLC);
        assert_eq!(argmax_action(&[0.4, 0.4, 0.2]), LaneAction::LK);
        assert_eq!(argmax_action(&[0.2, 0.4, 0.4]), LaneAction::LK);
    }

    #[test]
    fn zero_epochs_return_the_initialization() {
        let cfg = TrainConfig {
            epochs: 0,
            ..TrainConfig::default()
        };
        let (p, r) = train(&[pair([1.0; 9], LaneAction::LK)], &cfg).unwrap();
        assert_eq!(p, MlpParams::init(cfg.seed));
        assert!(r.epoch_losses.is_empty());
        assert!(matches!(train(&[], &cfg), Err(DilError::EmptyDataset)));
    }

    #[test]
    fn params_file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("params.json");
        let p = MlpParams::init(9);
        save_params(&path, &p).unwrap();
        assert_eq!(load_params(&path).unwrap(), p);
        std::fs::write(&path, "{\"version\":1,\"shape\":[9,3],\"layers\":[]}").unwrap();
        assert!(matches!(load_params(&path), Err(DilError::BadParams(_))));
    }
}
