//! Word-level LSTM language model with exact backpropagation through time,
//! trained on positive data while unmodelling negative data.

mod checkpoint;
mod gradcheck;
mod loss;
mod params;
mod train;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::corpus::{Fingerprint, Sentence, TokenId, START_ID};
use crate::error::{Error, Result};
use crate::rng::{stream_rng, RngState, INIT_STREAM, TRAIN_STREAM};

pub use checkpoint::{CHECKPOINT_MAGIC, CHECKPOINT_VERSION};
pub use gradcheck::{
    compare_gradients, finite_difference_check, GradCheckReport, GRADCHECK_ABS_FLOOR,
};
pub use loss::{
    combined_loss, negative_loss, positive_loss, unlikelihood_term, unlikelihood_term_derivative,
    validate_floor, TokenLosses, DEFAULT_UNLIKELIHOOD_FLOOR,
};
pub use params::{LayerParams, Params, TensorView};
pub use train::{learning_rate_for_epoch, train_epoch, EpochStats, NegativeSource};

pub const INIT_RANGE: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LmConfig {
    pub embedding_dim: usize,
    pub hidden_units: usize,
    pub num_layers: usize,
    /// Output projection shares the embedding matrix; needs
    /// `embedding_dim == hidden_units`.
    pub tie_embeddings: bool,
    /// Keep probability for dropout on non-recurrent connections.
    pub dropout_keep: f64,
}

impl Default for LmConfig {
    fn default() -> Self {
        LmConfig {
            embedding_dim: 64,
            hidden_units: 64,
            num_layers: 1,
            tie_embeddings: false,
            dropout_keep: 1.0,
        }
    }
}

impl LmConfig {
    pub fn validate(&self) -> Result<()> {
        if self.embedding_dim == 0 || self.hidden_units == 0 || self.num_layers == 0 {
            return Err(Error::InvalidArgument(
                "embedding_dim, hidden_units and num_layers must be >= 1".into(),
            ));
        }
        if !(self.dropout_keep > 0.0 && self.dropout_keep <= 1.0) {
            return Err(Error::InvalidArgument(format!(
                "dropout_keep must be in (0, 1], got {}",
                self.dropout_keep
            )));
        }
        if self.tie_embeddings && self.embedding_dim != self.hidden_units {
            return Err(Error::InvalidArgument(
                "tied embeddings need embedding_dim == hidden_units".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    /// Weight of the negative-data term.
    pub alpha: f64,
    pub learning_rate: f64,
    /// Multiplicative learning-rate decay applied once per epoch after the hold.
    pub lr_decay: f64,
    /// Epochs trained at the initial learning rate before decay starts.
    pub lr_hold_epochs: usize,
    pub grad_clip_norm: f64,
    pub epochs: usize,
    /// Positive sentences per update.
    pub batch_size: usize,
    /// Truncation length for backpropagation through time, in tokens.
    pub bptt_len: usize,
    pub unlikelihood_floor: f64,
    /// Carry recurrent state across consecutive positive sentences.
    pub carry_state: bool,
    /// Cap on generated negative sentence length.
    pub max_negative_len: usize,
    pub negative_state: NegativeState,
}

/// Recurrent state each negative sentence starts from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum NegativeState {
    /// A zero state, independent of the positive stream.
    #[default]
    Zero,
    /// The (non-differentiated) positive-stream state at the start of the
    /// paired positive sentence, i.e. after the sentence that seeded the
    /// negative. Negatives beyond the positive batch start from zero.
    Paired,
}

impl std::str::FromStr for NegativeState {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "zero" => Ok(NegativeState::Zero),
            "paired" => Ok(NegativeState::Paired),
            other => Err(Error::InvalidArgument(format!(
                "unknown negative state `{other}`"
            ))),
        }
    }
}

impl std::fmt::Display for NegativeState {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            NegativeState::Zero => "zero",
            NegativeState::Paired => "paired",
        })
    }
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            alpha: 0.0,
            learning_rate: 1.0,
            lr_decay: 0.5,
            lr_hold_epochs: 4,
            grad_clip_norm: 5.0,
            epochs: 10,
            batch_size: 20,
            bptt_len: 35,
            unlikelihood_floor: DEFAULT_UNLIKELIHOOD_FLOOR,
            carry_state: true,
            max_negative_len: crate::ngram::DEFAULT_MAX_LEN,
            negative_state: NegativeState::Zero,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidArgument(m));
        if !(self.alpha >= 0.0 && self.alpha.is_finite()) {
            return bad(format!("alpha must be >= 0, got {}", self.alpha));
        }
        if !(self.learning_rate > 0.0) {
            return bad(format!(
                "learning_rate must be > 0, got {}",
                self.learning_rate
            ));
        }
        if !(self.lr_decay > 0.0) {
            return bad(format!("lr_decay must be > 0, got {}", self.lr_decay));
        }
        if !(self.grad_clip_norm > 0.0) {
            return bad(format!(
                "grad_clip_norm must be > 0, got {}",
                self.grad_clip_norm
            ));
        }
        if self.batch_size == 0 || self.bptt_len == 0 || self.max_negative_len == 0 {
            return bad("batch_size, bptt_len and max_negative_len must be >= 1".into());
        }
        validate_floor(self.unlikelihood_floor)
    }
}

/// Hidden and cell vectors for every layer.
#[derive(Debug, Clone, PartialEq)]
pub struct RecurrentState {
    h: Vec<Vec<f64>>,
    c: Vec<Vec<f64>>,
}

impl RecurrentState {
    pub fn zeros(config: &LmConfig) -> Self {
        let z = vec![vec![0.0; config.hidden_units]; config.num_layers];
        RecurrentState { h: z.clone(), c: z }
    }

    pub fn hidden(&self, layer: usize) -> &[f64] {
        &self.h[layer]
    }
}

/// Model weights plus the bookkeeping needed to resume training.
#[derive(Debug, Clone, PartialEq)]
pub struct NeuralLm {
    config: LmConfig,
    vocab_size: usize,
    vocab_fingerprint: Fingerprint,
    params: Params,
    /// Position of the training random stream.
    rng: RngState,
    step_count: u64,
}

struct LayerTrace {
    input: Vec<f64>,
    h_prev: Vec<f64>,
    c_prev: Vec<f64>,
    /// Activated gates laid out as input, forget, candidate, output.
    gates: Vec<f64>,
    tanh_c: Vec<f64>,
}

struct StepTrace {
    input: TokenId,
    target: TokenId,
    layers: Vec<LayerTrace>,
    /// Dropout masks: site 0 is the embedding output, site `l + 1` the
    /// output of layer `l`.
    masks: Vec<Vec<f64>>,
    top: Vec<f64>,
    probs: Vec<f64>,
    /// Cross entropy of `target`, from the log-sum-exp form.
    loss: f64,
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

/// Input/target pairs for one sentence, starting from the start boundary.
fn sentence_steps(sentence: &Sentence) -> impl Iterator<Item = (TokenId, TokenId)> + '_ {
    std::iter::once(START_ID)
        .chain(sentence.body().iter().copied())
        .zip(sentence.ids().iter().copied())
}

impl NeuralLm {
    /// Weights drawn uniformly from `[-0.05, 0.05]`; deterministic in `seed`.
    pub fn init(
        config: LmConfig,
        vocab_size: usize,
        vocab_fingerprint: Fingerprint,
        seed: u64,
    ) -> Result<Self> {
        config.validate()?;
        if vocab_size < 3 {
            return Err(Error::InvalidArgument("vocabulary too small".into()));
        }
        let mut params = Params::zeros(&config, vocab_size);
        let mut rng = stream_rng(seed, INIT_STREAM);
        for t in params.tensors_mut() {
            for w in t.data.iter_mut() {
                *w = rng.gen_range(-INIT_RANGE..=INIT_RANGE);
            }
        }
        Ok(NeuralLm {
            config,
            vocab_size,
            vocab_fingerprint,
            params,
            rng: RngState::new(seed, TRAIN_STREAM),
            step_count: 0,
        })
    }

    pub fn config(&self) -> &LmConfig {
        &self.config
    }

    pub fn vocab_size(&self) -> usize {
        self.vocab_size
    }

    pub fn vocab_fingerprint(&self) -> Fingerprint {
        self.vocab_fingerprint
    }

    pub fn params(&self) -> &Params {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut Params {
        &mut self.params
    }

    pub fn rng_state(&self) -> RngState {
        self.rng
    }

    pub fn rng_seed(&self) -> u64 {
        self.rng.seed
    }

    pub fn step_count(&self) -> u64 {
        self.step_count
    }

    pub fn zero_state(&self) -> RecurrentState {
        RecurrentState::zeros(&self.config)
    }

    pub fn check_fingerprint(&self, other: Fingerprint) -> Result<()> {
        if other != self.vocab_fingerprint {
            return Err(Error::VocabMismatch {
                expected: self.vocab_fingerprint.to_string(),
                found: other.to_string(),
            });
        }
        Ok(())
    }

    fn sample_masks(&self, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
        let keep = self.config.dropout_keep;
        let scale = 1.0 / keep;
        let mut dims = vec![self.config.embedding_dim];
        dims.extend(std::iter::repeat_n(self.config.hidden_units, self.config.num_layers));
        dims.into_iter()
            .map(|d| {
                (0..d)
                    .map(|_| if rng.gen::<f64>() < keep { scale } else { 0.0 })
                    .collect()
            })
            .collect()
    }

    /// One time step. Advances `state` and returns everything backward needs.
    fn step(
        &self,
        input: TokenId,
        target: TokenId,
        state: &mut RecurrentState,
        masks: Vec<Vec<f64>>,
    ) -> StepTrace {
        let e = self.config.embedding_dim;
        let hsz = self.config.hidden_units;
        let v = self.vocab_size;
        let p = &self.params;

        let mut x = p.embedding[input as usize * e..(input as usize + 1) * e].to_vec();
        if let Some(m) = masks.first() {
            x.iter_mut().zip(m).for_each(|(xi, mi)| *xi *= mi);
        }

        let mut layers = Vec::with_capacity(self.config.num_layers);
        for (l, lp) in p.layers.iter().enumerate() {
            let in_dim = lp.input_dim;
            let width = in_dim + hsz;
            let h_prev = std::mem::take(&mut state.h[l]);
            let c_prev = std::mem::take(&mut state.c[l]);
            let mut gates = lp.bias.clone();
            for (r, g) in gates.iter_mut().enumerate() {
                let row = &lp.weight[r * width..(r + 1) * width];
                *g += dot(&row[..in_dim], &x) + dot(&row[in_dim..], &h_prev);
            }
            for (r, g) in gates.iter_mut().enumerate() {
                *g = if (2 * hsz..3 * hsz).contains(&r) {
                    g.tanh()
                } else {
                    sigmoid(*g)
                };
            }
            let mut c = vec![0.0; hsz];
            let mut tanh_c = vec![0.0; hsz];
            let mut h = vec![0.0; hsz];
            for j in 0..hsz {
                let (i, f, g, o) = (
                    gates[j],
                    gates[hsz + j],
                    gates[2 * hsz + j],
                    gates[3 * hsz + j],
                );
                c[j] = f * c_prev[j] + i * g;
                tanh_c[j] = c[j].tanh();
                h[j] = o * tanh_c[j];
            }
            let mut next_x = h.clone();
            if let Some(m) = masks.get(l + 1) {
                next_x.iter_mut().zip(m).for_each(|(xi, mi)| *xi *= mi);
            }
            state.h[l] = h;
            state.c[l] = c;
            layers.push(LayerTrace {
                input: std::mem::replace(&mut x, next_x),
                h_prev,
                c_prev,
                gates,
                tanh_c,
            });
        }

        let top = x;
        let mut logits = p.output_bias.clone();
        match &p.output_weight {
            Some(w) => {
                for (j, &hj) in top.iter().enumerate() {
                    axpy(hj, &w[j * v..(j + 1) * v], &mut logits);
                }
            }
            None => {
                for (k, z) in logits.iter_mut().enumerate() {
                    *z += dot(&p.embedding[k * e..(k + 1) * e], &top);
                }
            }
        }
        let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let target_logit = logits[target as usize];
        let mut sum = 0.0;
        for z in logits.iter_mut() {
            *z = (*z - max).exp();
            sum += *z;
        }
        for z in logits.iter_mut() {
            *z /= sum;
        }
        let loss = (max + sum.ln() - target_logit).max(0.0);

        StepTrace {
            input,
            target,
            layers,
            masks,
            top,
            probs: logits,
            loss,
        }
    }

    /// Per-token losses for one sentence, conditioning from the start
    /// boundary and continuing from `state`, which is advanced in place.
    pub fn forward_token_losses(
        &self,
        sentence: &Sentence,
        state: &mut RecurrentState,
    ) -> TokenLosses {
        let losses = sentence_steps(sentence)
            .map(|(input, target)| self.step(input, target, state, Vec::new()).loss)
            .collect();
        TokenLosses::from_vec_unchecked(losses)
    }

    /// Next-token distribution after feeding `history` (from the start
    /// boundary) into `state`.
    pub fn next_token_probs(&self, history: &[TokenId], state: &mut RecurrentState) -> Vec<f64> {
        let mut input = START_ID;
        for &tok in history {
            self.step(input, tok, state, Vec::new());
            input = tok;
        }
        let mut probe = state.clone();
        self.step(input, 0, &mut probe, Vec::new()).probs
    }

    /// Forward + backward over one truncated segment. `coef` maps a step's
    /// token loss to dL/d(loss) for that step.
    fn segment(
        &self,
        steps: &[(TokenId, TokenId)],
        state: &mut RecurrentState,
        mut dropout: Option<&mut ChaCha8Rng>,
        grads: &mut Params,
        coef: impl Fn(f64) -> f64,
    ) -> Vec<f64> {
        let mut traces = Vec::with_capacity(steps.len());
        let mut losses = Vec::with_capacity(steps.len());
        for &(input, target) in steps {
            let masks = match dropout.as_deref_mut() {
                Some(rng) if self.config.dropout_keep < 1.0 => self.sample_masks(rng),
                _ => Vec::new(),
            };
            let trace = self.step(input, target, state, masks);
            losses.push(trace.loss);
            traces.push(trace);
        }
        let coefs: Vec<f64> = losses.iter().map(|&l| coef(l)).collect();
        self.backward(&traces, &coefs, grads);
        losses
    }

    fn backward(&self, traces: &[StepTrace], coefs: &[f64], grads: &mut Params) {
        let e = self.config.embedding_dim;
        let hsz = self.config.hidden_units;
        let v = self.vocab_size;
        let n_layers = self.config.num_layers;
        let p = &self.params;

        let mut dh_next = vec![vec![0.0; hsz]; n_layers];
        let mut dc_next = vec![vec![0.0; hsz]; n_layers];
        let mut dz = vec![0.0; v];

        for (trace, &coef) in traces.iter().zip(coefs).rev() {
            let top_dim = trace.top.len();
            let mut dx = vec![0.0; top_dim];
            if coef != 0.0 {
                for (k, d) in dz.iter_mut().enumerate() {
                    *d = coef * trace.probs[k];
                }
                dz[trace.target as usize] -= coef;
                axpy(1.0, &dz, &mut grads.output_bias);
                match (&p.output_weight, &mut grads.output_weight) {
                    (Some(w), Some(gw)) => {
                        for j in 0..top_dim {
                            axpy(trace.top[j], &dz, &mut gw[j * v..(j + 1) * v]);
                            dx[j] = dot(&w[j * v..(j + 1) * v], &dz);
                        }
                    }
                    _ => {
                        for (k, &dzk) in dz.iter().enumerate() {
                            axpy(dzk, &trace.top, &mut grads.embedding[k * e..(k + 1) * e]);
                            axpy(dzk, &p.embedding[k * e..(k + 1) * e], &mut dx);
                        }
                    }
                }
            }

            for l in (0..n_layers).rev() {
                let lt = &trace.layers[l];
                let lp = &p.layers[l];
                let in_dim = lp.input_dim;
                let width = in_dim + hsz;

                let mut dh = dx;
                if let Some(m) = trace.masks.get(l + 1) {
                    dh.iter_mut().zip(m).for_each(|(d, mi)| *d *= mi);
                }
                axpy(1.0, &dh_next[l], &mut dh);

                let mut da = vec![0.0; 4 * hsz];
                let mut dc_prev = vec![0.0; hsz];
                for j in 0..hsz {
                    let (i, f, g, o) = (
                        lt.gates[j],
                        lt.gates[hsz + j],
                        lt.gates[2 * hsz + j],
                        lt.gates[3 * hsz + j],
                    );
                    let tc = lt.tanh_c[j];
                    let dc = dc_next[l][j] + dh[j] * o * (1.0 - tc * tc);
                    da[j] = dc * g * i * (1.0 - i);
                    da[hsz + j] = dc * lt.c_prev[j] * f * (1.0 - f);
                    da[2 * hsz + j] = dc * i * (1.0 - g * g);
                    da[3 * hsz + j] = dh[j] * tc * o * (1.0 - o);
                    dc_prev[j] = dc * f;
                }

                let gl = &mut grads.layers[l];
                axpy(1.0, &da, &mut gl.bias);
                let mut d_in = vec![0.0; in_dim];
                let mut dh_prev = vec![0.0; hsz];
                for (r, &dar) in da.iter().enumerate() {
                    if dar == 0.0 {
                        continue;
                    }
                    let grow = &mut gl.weight[r * width..(r + 1) * width];
                    axpy(dar, &lt.input, &mut grow[..in_dim]);
                    axpy(dar, &lt.h_prev, &mut grow[in_dim..]);
                    let row = &lp.weight[r * width..(r + 1) * width];
                    axpy(dar, &row[..in_dim], &mut d_in);
                    axpy(dar, &row[in_dim..], &mut dh_prev);
                }
                dh_next[l] = dh_prev;
                dc_next[l] = dc_prev;
                dx = d_in;
            }

            if let Some(m) = trace.masks.first() {
                dx.iter_mut().zip(m).for_each(|(d, mi)| *d *= mi);
            }
            let row = trace.input as usize;
            axpy(1.0, &dx, &mut grads.embedding[row * e..(row + 1) * e]);
        }
    }

    /// Exact gradients of the combined loss for a positive batch (one
    /// stream from a zero state) and a negative batch (each sentence from
    /// the state chosen by `negative_state`), truncated every `bptt_len`
    /// tokens. State carried into a sentence (from the previous positive
    /// sentence, or a paired start) is treated as a constant, so the result
    /// is the exact gradient only when `carry_state` is off.
    pub fn gradients(
        &self,
        positive: &[Sentence],
        negative: &[Sentence],
        cfg: &TrainConfig,
    ) -> Result<BatchGradients> {
        let mut state = self.zero_state();
        self.batch_gradients(positive, negative, cfg, &mut state, None)
    }

    pub(crate) fn batch_gradients(
        &self,
        positive: &[Sentence],
        negative: &[Sentence],
        cfg: &TrainConfig,
        pos_state: &mut RecurrentState,
        mut dropout: Option<&mut ChaCha8Rng>,
    ) -> Result<BatchGradients> {
        let mut grads = Params::zeros(&self.config, self.vocab_size);
        let chunk = cfg.bptt_len.max(1);

        let mut pos_losses = Vec::new();
        let mut starts = Vec::with_capacity(positive.len());
        for sentence in positive {
            if !cfg.carry_state {
                *pos_state = self.zero_state();
            }
            if cfg.negative_state == NegativeState::Paired {
                starts.push(pos_state.clone());
            }
            let steps: Vec<_> = sentence_steps(sentence).collect();
            for seg in steps.chunks(chunk) {
                let l = self.segment(seg, pos_state, dropout.as_deref_mut(), &mut grads, |_| 1.0);
                pos_losses.extend(l);
            }
        }

        let mut neg_losses = Vec::new();
        if cfg.alpha != 0.0 {
            let floor = cfg.unlikelihood_floor;
            let alpha = cfg.alpha;
            for (k, sentence) in negative.iter().enumerate() {
                let mut state = starts.get(k).cloned().unwrap_or_else(|| self.zero_state());
                let steps: Vec<_> = sentence_steps(sentence).collect();
                for seg in steps.chunks(chunk) {
                    let l =
                        self.segment(seg, &mut state, dropout.as_deref_mut(), &mut grads, |l| {
                            alpha * unlikelihood_term_derivative(l, floor)
                        });
                    neg_losses.extend(l);
                }
            }
        }

        for t in grads.tensors() {
            if t.data.iter().any(|g| !g.is_finite()) {
                return Err(Error::NonFiniteGradient(t.name));
            }
        }
        let positive = TokenLosses::from_vec_unchecked(pos_losses);
        let negative = TokenLosses::from_vec_unchecked(neg_losses);
        let combined = combined_loss(&positive, &negative, cfg.alpha, cfg.unlikelihood_floor);
        Ok(BatchGradients {
            grads,
            positive,
            negative,
            combined_loss: combined,
        })
    }

    /// Loss value matching [`NeuralLm::gradients`], without backward.
    pub fn batch_loss(
        &self,
        positive: &[Sentence],
        negative: &[Sentence],
        cfg: &TrainConfig,
    ) -> f64 {
        let mut state = self.zero_state();
        let mut pos = TokenLosses::default();
        let mut starts = Vec::with_capacity(positive.len());
        for s in positive {
            if !cfg.carry_state {
                state = self.zero_state();
            }
            if cfg.negative_state == NegativeState::Paired {
                starts.push(state.clone());
            }
            pos.extend(&self.forward_token_losses(s, &mut state));
        }
        let mut neg = TokenLosses::default();
        if cfg.alpha != 0.0 {
            for (k, s) in negative.iter().enumerate() {
                let mut start = starts.get(k).cloned().unwrap_or_else(|| self.zero_state());
                neg.extend(&self.forward_token_losses(s, &mut start));
            }
        }
        combined_loss(&pos, &neg, cfg.alpha, cfg.unlikelihood_floor)
    }

    pub(crate) fn apply_update(&mut self, grads: &Params, learning_rate: f64) {
        self.params.add_scaled(-learning_rate, grads);
        self.step_count += 1;
    }

    pub(crate) fn set_rng_state(&mut self, rng: RngState) {
        self.rng = rng;
    }
}

#[derive(Debug, Clone)]
pub struct BatchGradients {
    pub grads: Params,
    pub positive: TokenLosses,
    pub negative: TokenLosses,
    pub combined_loss: f64,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{Fingerprint, END_ID};

    fn sentence(ids: &[TokenId]) -> Sentence {
        Sentence::from_ids_unchecked(ids.to_vec())
    }

    fn tiny(seed: u64) -> NeuralLm {
        let cfg = LmConfig {
            embedding_dim: 4,
            hidden_units: 5,
            num_layers: 1,
            tie_embeddings: false,
            dropout_keep: 1.0,
        };
        NeuralLm::init(cfg, 7, Fingerprint(0), seed).unwrap()
    }

    #[test]
    fn init_is_deterministic_and_bounded() {
        let a = tiny(3);
        let b = tiny(3);
        let c = tiny(4);
        assert_eq!(a, b);
        assert_ne!(a.params(), c.params());
        for t in a.params().tensors() {
            assert!(t.data.iter().all(|w| w.abs() <= INIT_RANGE));
        }
    }

    #[test]
    fn output_projection_shape() {
        let cfg = LmConfig {
            embedding_dim: 32,
            hidden_units: 64,
            ..LmConfig::default()
        };
        let m = NeuralLm::init(cfg, 100, Fingerprint(0), 1).unwrap();
        let out = m
            .params()
            .tensors()
            .into_iter()
            .find(|t| t.name == "output.weight")
            .unwrap();
        assert_eq!(out.dims, vec![64, 100]);
    }

    #[test]
    fn invalid_configs_are_rejected() {
        let mut cfg = LmConfig::default();
        cfg.dropout_keep = 0.0;
        assert!(cfg.validate().is_err());
        let cfg = LmConfig {
            tie_embeddings: true,
            embedding_dim: 8,
            hidden_units: 16,
            ..LmConfig::default()
        };
        assert!(cfg.validate().is_err());
        let mut t = TrainConfig::default();
        t.alpha = -1.0;
        assert!(t.validate().is_err());
        t.alpha = 1.0;
        t.unlikelihood_floor = 0.5;
        assert!(t.validate().is_err());
    }

    #[test]
    fn uniform_softmax_gives_ln_v() {
        let cfg = LmConfig {
            embedding_dim: 3,
            hidden_units: 4,
            ..LmConfig::default()
        };
        let mut m = NeuralLm::init(cfg, 10, Fingerprint(0), 9).unwrap();
        m.params_mut().zero_output();
        let s = sentence(&[3, 4, 5, 9, END_ID]);
        let losses = m.forward_token_losses(&s, &mut m.zero_state());
        assert_eq!(losses.len(), s.len());
        for &l in losses.as_slice() {
            assert!((l - 10f64.ln()).abs() < 1e-12);
        }
    }

    #[test]
    fn probabilities_sum_to_one() {
        let m = tiny(2);
        let p = m.next_token_probs(&[3, 4], &mut m.zero_state());
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn batch_loss_matches_gradient_pass() {
        let m = tiny(5);
        let pos = vec![sentence(&[3, 4, END_ID]), sentence(&[5, 6, 3, END_ID])];
        let neg = vec![sentence(&[6, 6, END_ID])];
        let cfg = TrainConfig {
            alpha: 1.5,
            bptt_len: 100,
            ..TrainConfig::default()
        };
        let g = m.gradients(&pos, &neg, &cfg).unwrap();
        assert!((g.combined_loss - m.batch_loss(&pos, &neg, &cfg)).abs() < 1e-12);
        assert_eq!(g.positive.len(), 7);
        assert_eq!(g.negative.len(), 3);
    }

    #[test]
    fn alpha_zero_ignores_negatives() {
        let m = tiny(6);
        let pos = vec![sentence(&[3, 4, END_ID])];
        let neg = vec![sentence(&[6, 5, END_ID])];
        let cfg = TrainConfig::default();
        let with = m.gradients(&pos, &neg, &cfg).unwrap();
        let without = m.gradients(&pos, &[], &cfg).unwrap();
        assert_eq!(with.grads, without.grads);
        assert!(with.negative.is_empty());
    }

    #[test]
    fn gradients_are_linear_in_alpha() {
        let m = tiny(7);
        let pos = vec![sentence(&[3, 4, 5, END_ID])];
        let neg = vec![sentence(&[5, 4, END_ID]), sentence(&[6, END_ID])];
        let at = |alpha: f64| {
            let cfg = TrainConfig {
                alpha,
                ..TrainConfig::default()
            };
            m.gradients(&pos, &neg, &cfg).unwrap().grads
        };
        let (g0, g1, g2) = (at(0.0), at(1.0), at(2.0));
        for ((t0, t1), t2) in g0.tensors().iter().zip(g1.tensors()).zip(g2.tensors()) {
            for k in 0..t0.data.len() {
                let lhs = t2.data[k] - t0.data[k];
                let rhs = 2.0 * (t1.data[k] - t0.data[k]);
                assert!((lhs - rhs).abs() < 1e-10, "{}[{k}]", t0.name);
            }
        }
    }

    #[test]
    fn non_finite_gradient_names_the_tensor() {
        let mut m = tiny(8);
        m.params_mut().output_bias[3] = f64::NAN;
        let pos = vec![sentence(&[3, END_ID])];
        let err = m.gradients(&pos, &[], &TrainConfig::default()).unwrap_err();
        assert!(matches!(err, Error::NonFiniteGradient(_)), "{err}");
    }
}
