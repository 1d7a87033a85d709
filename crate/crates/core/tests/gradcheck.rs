use antimodel::corpus::{Fingerprint, Sentence};
use antimodel::lm::{
    compare_gradients, finite_difference_check, LmConfig, NegativeState, NeuralLm, TrainConfig,
};

const V: usize = 7;

fn sentence(ids: &[u32]) -> Sentence {
    let mut ids = ids.to_vec();
    ids.push(2);
    Sentence::new(ids, V).unwrap()
}

fn data() -> (Vec<Sentence>, Vec<Sentence>) {
    let pos = vec![sentence(&[3, 4, 5]), sentence(&[6, 3, 3, 4])];
    let neg = vec![sentence(&[5, 5, 6]), sentence(&[4, 0])];
    (pos, neg)
}

fn model(cfg: LmConfig, seed: u64) -> NeuralLm {
    let mut m = NeuralLm::init(cfg, V, Fingerprint(1), seed).unwrap();
    // Larger weights than the default init so every gate is exercised away
    // from its linear regime.
    m.params_mut().scale(8.0);
    m
}

fn small(layers: usize, tied: bool) -> LmConfig {
    LmConfig {
        embedding_dim: 5,
        hidden_units: 5,
        num_layers: layers,
        tie_embeddings: tied,
        dropout_keep: 1.0,
    }
}

/// Sentences start from a zero state and fit in one truncation window, so
/// backpropagation is exact.
fn alpha(a: f64) -> TrainConfig {
    TrainConfig {
        alpha: a,
        carry_state: false,
        bptt_len: 100,
        ..TrainConfig::default()
    }
}

#[test]
fn both_loss_terms_pass() {
    let (pos, neg) = data();
    let r =
        finite_difference_check(&model(small(1, false), 3), &pos, &neg, &alpha(1.0), 1e-5).unwrap();
    assert!(r.max_relative_error < 1e-4, "{r:?}");
    assert_eq!(
        r.parameters_checked,
        model(small(1, false), 3).params().parameter_count()
    );
}

#[test]
fn stacked_tied_model_passes() {
    let (pos, neg) = data();
    let r =
        finite_difference_check(&model(small(2, true), 9), &pos, &neg, &alpha(4.0), 1e-4).unwrap();
    assert!(r.max_relative_error < 1e-4, "{r:?}");
}

#[test]
fn truncation_changes_gradients_but_not_loss() {
    let (pos, neg) = data();
    let m = model(small(1, false), 5);
    let full = alpha(1.0);
    let short = TrainConfig {
        bptt_len: 2,
        ..full.clone()
    };
    let a = m.gradients(&pos, &neg, &full).unwrap();
    let b = m.gradients(&pos, &neg, &short).unwrap();
    assert_eq!(a.combined_loss, b.combined_loss);
    assert_ne!(a.grads, b.grads);
}

#[test]
fn paired_state_changes_only_negative_losses() {
    let (pos, neg) = data();
    let m = model(small(1, false), 4);
    let carried = TrainConfig {
        carry_state: true,
        ..alpha(2.0)
    };
    let paired = TrainConfig {
        negative_state: NegativeState::Paired,
        ..carried.clone()
    };
    let a = m.gradients(&pos, &neg, &carried).unwrap();
    let b = m.gradients(&pos, &neg, &paired).unwrap();
    assert_eq!(a.positive, b.positive);
    // The first negative pairs with the first positive, which starts from zero.
    let first = neg[0].len();
    assert_eq!(
        a.negative.as_slice()[..first],
        b.negative.as_slice()[..first]
    );
    assert_ne!(
        a.negative.as_slice()[first..],
        b.negative.as_slice()[first..]
    );
}

#[test]
fn corrupted_gate_gradient_is_caught() {
    let (pos, neg) = data();
    let m = model(small(1, false), 3);
    let cfg = alpha(1.0);
    let mut grads = m.gradients(&pos, &neg, &cfg).unwrap().grads;
    // Swap the forget-gate and candidate rows of the first layer.
    let h = 5;
    let width = 5 + h;
    let w = &mut grads.layers[0].weight;
    for j in 0..h * width {
        w.swap(h * width + j, 2 * h * width + j);
    }
    let r = compare_gradients(&m, &pos, &neg, &cfg, 1e-5, &grads).unwrap();
    assert!(r.max_relative_error > 1e-2, "{r:?}");
    assert_eq!(r.worst_tensor, "lstm.0.weight");
}

#[test]
fn invalid_steps_are_rejected() {
    let (pos, neg) = data();
    let m = model(small(1, false), 3);
    for step in [0.0, -1e-5, f64::NAN, f64::INFINITY] {
        assert!(finite_difference_check(&m, &pos, &neg, &alpha(1.0), step).is_err());
    }
}
