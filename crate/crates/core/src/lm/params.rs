use super::LmConfig;

/// Weights of one LSTM layer. `weight` is `4H x (input_dim + H)` row-major
/// over the concatenated `[input; h_prev]`, gate rows ordered input,
/// forget, candidate, output.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerParams {
    pub input_dim: usize,
    pub hidden: usize,
    pub weight: Vec<f64>,
    pub bias: Vec<f64>,
}

/// All model tensors. Also used as the gradient container.
#[derive(Debug, Clone, PartialEq)]
pub struct Params {
    pub vocab_size: usize,
    pub embedding_dim: usize,
    /// `V x E` row-major.
    pub embedding: Vec<f64>,
    pub layers: Vec<LayerParams>,
    /// `H x V` row-major; `None` when tied to the embedding.
    pub output_weight: Option<Vec<f64>>,
    pub output_bias: Vec<f64>,
}

pub struct TensorView<'a> {
    pub name: String,
    pub dims: Vec<usize>,
    pub data: &'a [f64],
}

pub struct TensorViewMut<'a> {
    pub name: String,
    pub dims: Vec<usize>,
    pub data: &'a mut [f64],
}

impl Params {
    pub fn zeros(config: &LmConfig, vocab_size: usize) -> Self {
        let h = config.hidden_units;
        let layers = (0..config.num_layers)
            .map(|l| {
                let input_dim = if l == 0 { config.embedding_dim } else { h };
                LayerParams {
                    input_dim,
                    hidden: h,
                    weight: vec![0.0; 4 * h * (input_dim + h)],
                    bias: vec![0.0; 4 * h],
                }
            })
            .collect();
        Params {
            vocab_size,
            embedding_dim: config.embedding_dim,
            embedding: vec![0.0; vocab_size * config.embedding_dim],
            layers,
            output_weight: (!config.tie_embeddings).then(|| vec![0.0; h * vocab_size]),
            output_bias: vec![0.0; vocab_size],
        }
    }

    /// Tensors in canonical order (also the initialisation and checkpoint
    /// order).
    pub fn tensors(&self) -> Vec<TensorView<'_>> {
        let mut out = vec![TensorView {
            name: "embedding".into(),
            dims: vec![self.vocab_size, self.embedding_dim],
            data: &self.embedding,
        }];
        for (l, lp) in self.layers.iter().enumerate() {
            out.push(TensorView {
                name: format!("lstm.{l}.weight"),
                dims: vec![4 * lp.hidden, lp.input_dim + lp.hidden],
                data: &lp.weight,
            });
            out.push(TensorView {
                name: format!("lstm.{l}.bias"),
                dims: vec![4 * lp.hidden],
                data: &lp.bias,
            });
        }
        if let Some(w) = &self.output_weight {
            let h = self.layers.last().map_or(0, |l| l.hidden);
            out.push(TensorView {
                name: "output.weight".into(),
                dims: vec![h, self.vocab_size],
                data: w,
            });
        }
        out.push(TensorView {
            name: "output.bias".into(),
            dims: vec![self.vocab_size],
            data: &self.output_bias,
        });
        out
    }

    pub fn tensors_mut(&mut self) -> Vec<TensorViewMut<'_>> {
        let h = self.layers.last().map_or(0, |l| l.hidden);
        let mut out = vec![TensorViewMut {
            name: "embedding".into(),
            dims: vec![self.vocab_size, self.embedding_dim],
            data: &mut self.embedding,
        }];
        for (l, lp) in self.layers.iter_mut().enumerate() {
            out.push(TensorViewMut {
                name: format!("lstm.{l}.weight"),
                dims: vec![4 * lp.hidden, lp.input_dim + lp.hidden],
                data: &mut lp.weight,
            });
            out.push(TensorViewMut {
                name: format!("lstm.{l}.bias"),
                dims: vec![4 * lp.hidden],
                data: &mut lp.bias,
            });
        }
        if let Some(w) = &mut self.output_weight {
            out.push(TensorViewMut {
                name: "output.weight".into(),
                dims: vec![h, self.vocab_size],
                data: w,
            });
        }
        out.push(TensorViewMut {
            name: "output.bias".into(),
            dims: vec![self.vocab_size],
            data: &mut self.output_bias,
        });
        out
    }

    pub fn parameter_count(&self) -> usize {
        self.tensors().iter().map(|t| t.data.len()).sum()
    }

    /// `self += scale * other`.
    pub fn add_scaled(&mut self, scale: f64, other: &Params) {
        for (dst, src) in self.tensors_mut().into_iter().zip(other.tensors()) {
            for (d, s) in dst.data.iter_mut().zip(src.data) {
                *d += scale * s;
            }
        }
    }

    pub fn scale(&mut self, factor: f64) {
        for t in self.tensors_mut() {
            t.data.iter_mut().for_each(|x| *x *= factor);
        }
    }

    pub fn l2_norm(&self) -> f64 {
        self.tensors()
            .iter()
            .flat_map(|t| t.data.iter())
            .map(|x| x * x)
            .sum::<f64>()
            .sqrt()
    }

    /// Zeroes the output projection and bias, making the softmax uniform.
    pub fn zero_output(&mut self) {
        if let Some(w) = &mut self.output_weight {
            w.iter_mut().for_each(|x| *x = 0.0);
        } else {
            self.embedding.iter_mut().for_each(|x| *x = 0.0);
        }
        self.output_bias.iter_mut().for_each(|x| *x = 0.0);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tensor_shapes_match_data() {
        let cfg = LmConfig {
            embedding_dim: 3,
            hidden_units: 4,
            num_layers: 2,
            tie_embeddings: false,
            dropout_keep: 1.0,
        };
        let p = Params::zeros(&cfg, 11);
        let names: Vec<String> = p.tensors().into_iter().map(|t| t.name).collect();
        assert_eq!(
            names,
            [
                "embedding",
                "lstm.0.weight",
                "lstm.0.bias",
                "lstm.1.weight",
                "lstm.1.bias",
                "output.weight",
                "output.bias"
            ]
        );
        for t in p.tensors() {
            assert_eq!(t.dims.iter().product::<usize>(), t.data.len(), "{}", t.name);
        }
        assert_eq!(p.tensors()[3].dims, vec![16, 8]);
    }

    #[test]
    fn tied_model_has_no_output_weight() {
        let cfg = LmConfig {
            embedding_dim: 4,
            hidden_units: 4,
            tie_embeddings: true,
            ..LmConfig::default()
        };
        let p = Params::zeros(&cfg, 5);
        assert!(p.tensors().iter().all(|t| t.name != "output.weight"));
    }
}
