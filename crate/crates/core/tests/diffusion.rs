use doclayout::commands::train_model;
use doclayout::diffusion::{
    loss, loss_terms, noise_batch, train, DenoiserParams, LayoutModel, NoiseSchedule, SampleOptions,
    ScheduleKind, TrainConfig,
};
use doclayout::synth::ToyGrammar;
use doclayout::tokens::Vocabulary;
use doclayout::layout::ClassSchema;
use ndarray::Array1;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const DRAWS: usize = 10_000;

fn moments(v: &Array1<f64>) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.sum() / n;
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var)
}

/// Asserts sample moments of `DRAWS` normals against `(mean, var)` with
/// 3-sigma Monte-Carlo bands.
fn assert_moments(v: &Array1<f64>, mean: f64, var: f64, what: &str) {
    let (m, s2) = moments(v);
    let n = v.len() as f64;
    assert!((m - mean).abs() <= 3.0 * (var / n).sqrt(), "{what}: mean {m} vs {mean}");
    assert!((s2 - var).abs() <= 3.0 * var * (2.0 / (n - 1.0)).sqrt(), "{what}: var {s2} vs {var}");
}

#[test]
fn closed_form_forward_moments() {
    for kind in [ScheduleKind::Sqrt, ScheduleKind::Linear] {
        let sched = NoiseSchedule::new(kind, 2000).unwrap();
        let x0 = 0.8;
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for t in [1, 1000, 2000] {
            let ab = sched.alpha_bar(t);
            let xt = sched.q_sample(Array1::from_elem(DRAWS, x0).view(), t, &mut rng).unwrap();
            assert_moments(&xt, ab.sqrt() * x0, 1.0 - ab, &format!("{kind:?} t={t}"));
        }
    }
}

#[test]
fn iterated_forward_matches_closed_form() {
    let sched = NoiseSchedule::new(ScheduleKind::Sqrt, 2000).unwrap();
    let x0 = -1.3;
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut x = Array1::from_elem(DRAWS, x0);
    for t in 1..=2000 {
        x = sched.q_step(x.view(), t, &mut rng).unwrap();
        if [1, 1000, 2000].contains(&t) {
            let ab = sched.alpha_bar(t);
            assert_moments(&x, ab.sqrt() * x0, 1.0 - ab, &format!("iterated t={t}"));
            let direct = sched.q_sample(Array1::from_elem(DRAWS, x0).view(), t, &mut rng).unwrap();
            let ((m1, v1), (m2, v2)) = (moments(&x), moments(&direct));
            let var = 1.0 - ab;
            assert!((m1 - m2).abs() <= 3.0 * (2.0 * var / DRAWS as f64).sqrt());
            assert!((v1 - v2).abs() <= 3.0 * var * (4.0 / DRAWS as f64).sqrt());
        }
    }
}

#[test]
fn tiny_noise_leaves_signal_in_place() {
    let sched = NoiseSchedule::new(ScheduleKind::Linear, 1_000_000).unwrap();
    let x0 = Array1::linspace(-2.0, 2.0, 101);
    let xt = sched.q_sample(x0.view(), 1, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
    let bound = 6.0 * (1.0 - sched.alpha_bar(1)).sqrt() + 2.0 * (1.0 - sched.alpha_bar(1).sqrt());
    assert!(xt.iter().zip(&x0).all(|(a, b)| (a - b).abs() < bound));
    assert!(bound < 2e-3);
}

#[test]
fn schedule_invariants() {
    for steps in [1, 2, 10, 500, 2000] {
        for kind in [ScheduleKind::Sqrt, ScheduleKind::Linear] {
            let s = NoiseSchedule::new(kind, steps).unwrap();
            for t in 1..=steps {
                assert!(s.beta(t) > 0.0 && s.beta(t) < 1.0);
                assert!(s.alpha_bar(t) < s.alpha_bar(t - 1));
            }
            if steps >= 500 {
                assert!(s.alpha_bar(steps) < 0.01, "{kind:?} {steps}");
            }
            if kind == ScheduleKind::Linear {
                assert!((2..=steps).all(|t| s.beta(t) >= s.beta(t - 1)));
            }
        }
    }
    let s = NoiseSchedule::new(ScheduleKind::Sqrt, 10).unwrap();
    assert!(s.q_sample(Array1::zeros(3).view(), 11, &mut ChaCha8Rng::seed_from_u64(0)).is_err());
    assert!(s.q_sample(Array1::zeros(3).view(), 0, &mut ChaCha8Rng::seed_from_u64(0)).is_err());
    assert!(s.posterior_coeffs(1).is_err());
}

/// Mean and variance of `q(x_{t-1} | x_t, x0)` from the product of the two
/// Gaussian factors `q(x_t | x_{t-1})` and `q(x_{t-1} | x0)`.
fn bayes_posterior(s: &NoiseSchedule, x0: f64, xt: f64, t: usize) -> (f64, f64) {
    let (beta, ab_prev) = (s.beta(t), s.alpha_bar(t - 1));
    let precision = (1.0 - beta) / beta + 1.0 / (1.0 - ab_prev);
    let weighted = (1.0 - beta).sqrt() * xt / beta + ab_prev.sqrt() * x0 / (1.0 - ab_prev);
    (weighted / precision, 1.0 / precision)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn posterior_matches_bayes_oracle(x0 in -3.0f64..3.0, xt in -4.0f64..4.0, frac in 0.0f64..1.0, sqrt in any::<bool>()) {
        let kind = if sqrt { ScheduleKind::Sqrt } else { ScheduleKind::Linear };
        let s = NoiseSchedule::new(kind, 2000).unwrap();
        let t = 2 + (frac * 1998.0) as usize;
        let mu = s.posterior_mean(Array1::from_elem(1, xt).view(), Array1::from_elem(1, x0).view(), t).unwrap()[0];
        let (m, v) = bayes_posterior(&s, x0, xt, t);
        prop_assert!((mu - m).abs() < 1e-12, "t={} {} vs {}", t, mu, m);
        prop_assert!((s.posterior_variance(t).unwrap() - v).abs() < 1e-12);
        let (c0, ct) = s.posterior_coeffs(t).unwrap();
        prop_assert!(c0 >= 0.0 && ct >= 0.0);
    }
}

#[test]
fn two_step_schedule_posterior() {
    // With T = 2 the posterior at t = 2 only involves beta_1 and beta_2.
    let s = NoiseSchedule::new(ScheduleKind::Linear, 2).unwrap();
    let (m, v) = bayes_posterior(&s, 0.5, -0.25, 2);
    let mu = s.posterior_mean(Array1::from_elem(1, -0.25).view(), Array1::from_elem(1, 0.5).view(), 2).unwrap()[0];
    assert!((mu - m).abs() < 1e-12);
    assert!((s.posterior_variance(2).unwrap() - v).abs() < 1e-12);
    assert_eq!(s.posterior_variance(1).unwrap(), 0.0);
}

fn tiny_config() -> TrainConfig {
    TrainConfig {
        batch_size: 4,
        max_steps: 5,
        diffusion_steps: 20,
        d: 8,
        width: 16,
        layers: 1,
        heads: 2,
        max_len: 42,
        ..TrainConfig::default()
    }
}

fn toy_tokens(n: usize) -> (Vocabulary, Vec<Vec<u32>>) {
    let corpus = ToyGrammar::default().corpus(n, 3);
    let (vocab, _, rows) = doclayout::commands::tokenize_corpus(&corpus, 32, Some(42)).unwrap();
    (vocab, rows)
}

fn init_params(vocab: usize, seed: u64) -> DenoiserParams<f64> {
    DenoiserParams::init(tiny_config().model_config(vocab), &mut ChaCha8Rng::seed_from_u64(seed)).unwrap()
}

#[test]
fn round_inverts_embed_at_init() {
    let (vocab, rows) = toy_tokens(8);
    let p = init_params(vocab.size(), 4);
    let x = p.embed(&rows).unwrap();
    assert_eq!(p.round(&x.view()), rows.concat());
    let mut every: Vec<u32> = (0..vocab.size() as u32).collect();
    every.resize(42, vocab.pad());
    let all = p.embed(&[every.clone()]).unwrap();
    assert_eq!(p.round(&all.view()), every);
}

#[test]
fn pad_only_sequence_embeds_to_pad_rows() {
    let (vocab, _) = toy_tokens(1);
    let p = init_params(vocab.size(), 5);
    let x = p.embed(&[vec![vocab.pad(); 42]]).unwrap();
    for row in x.rows() {
        assert_eq!(row, p.embedding.row(vocab.pad() as usize));
    }
    assert!(p.embed(&[vec![vocab.size() as u32]]).is_err());
}

#[test]
fn oracle_prediction_leaves_only_prior_and_rounding() {
    let (vocab, rows) = toy_tokens(6);
    let p = init_params(vocab.size(), 6);
    let sched = NoiseSchedule::new(ScheduleKind::Sqrt, 20).unwrap();
    let nb = noise_batch(&p, &rows, &sched, &mut ChaCha8Rng::seed_from_u64(7)).unwrap();
    let target = nb.target(42);
    let terms = loss_terms(&p, &nb, &target.view(), &sched);
    let prior = sched.alpha_bar(20) * nb.x0.iter().map(|v| v * v).sum::<f64>() / nb.x0.len() as f64;
    assert!((terms.mse_term - prior).abs() < 1e-12, "{} vs {prior}", terms.mse_term);
    assert!((terms.loss - terms.mse_term - terms.round_term).abs() < 1e-12);
}

#[test]
fn loss_is_finite_and_positive_at_init() {
    let (vocab, rows) = toy_tokens(16);
    for seed in 0..3 {
        let p = init_params(vocab.size(), seed);
        let sched = NoiseSchedule::new(ScheduleKind::Sqrt, 2000).unwrap();
        let l = loss(&p, &rows, &sched, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
        assert!(l.loss.is_finite() && l.loss > 0.0);
        assert!(l.mse_term > 0.0 && l.round_term >= 0.0);
    }
    let p = init_params(vocab.size(), 0);
    let sched = NoiseSchedule::new(ScheduleKind::Sqrt, 20).unwrap();
    assert!(loss(&p, &[], &sched, &mut ChaCha8Rng::seed_from_u64(0)).is_err());
}

#[test]
fn training_is_deterministic() {
    let (vocab, rows) = toy_tokens(16);
    let a = train(&rows, vocab.size(), &tiny_config()).unwrap();
    let b = train(&rows, vocab.size(), &tiny_config()).unwrap();
    assert_eq!(a.log.len(), 5);
    let bits = |log: &[doclayout::diffusion::LossRow]| log.iter().map(|r| r.loss.to_bits()).collect::<Vec<_>>();
    assert_eq!(bits(&a.log), bits(&b.log));
    assert_eq!(a.params, b.params);
    let c = train(&rows, vocab.size(), &TrainConfig { seed: 1, ..tiny_config() }).unwrap();
    assert_ne!(bits(&a.log), bits(&c.log));
}

#[test]
fn zero_steps_returns_initialization() {
    let (vocab, rows) = toy_tokens(4);
    let cfg = TrainConfig { max_steps: 0, ..tiny_config() };
    let out = train(&rows, vocab.size(), &cfg).unwrap();
    assert!(out.log.is_empty());
    let init = DenoiserParams::<f32>::init(cfg.model_config(vocab.size()), &mut ChaCha8Rng::seed_from_u64(cfg.seed)).unwrap();
    assert_eq!(out.params, init);
}

#[test]
fn bad_configs_are_rejected() {
    let (vocab, rows) = toy_tokens(4);
    for cfg in [
        TrainConfig { lr: 0.0, ..tiny_config() },
        TrainConfig { diffusion_steps: 0, ..tiny_config() },
        TrainConfig { d: 4, ..tiny_config() },
        TrainConfig { max_len: 40, ..tiny_config() },
    ] {
        assert!(train(&rows, vocab.size(), &cfg).is_err());
    }
    assert!(train(&[], vocab.size(), &tiny_config()).is_err());
}

fn untrained_model() -> LayoutModel {
    let corpus = ToyGrammar::default().corpus(8, 0);
    train_model(&corpus, 32, None, &TrainConfig { max_steps: 2, ..tiny_config() }, |_| {}).unwrap().0
}

#[test]
fn sampling_zero_layouts() {
    let out = untrained_model().sample(0, 1, SampleOptions::default()).unwrap();
    assert!(out.layouts.is_empty() && out.sequences.is_empty());
    assert_eq!(out.validity_rate(), 0.0);
}

#[test]
fn untrained_sampling_is_robust() {
    let m = untrained_model();
    let out = m.sample(20, 3, SampleOptions { batch: 7, clamp: false }).unwrap();
    assert_eq!(out.layouts.len(), 20);
    let v = out.validity_rate();
    assert!((0.0..=1.0).contains(&v));
    for (seq, l) in out.sequences.iter().zip(&out.layouts) {
        assert_eq!(seq.len(), m.params.cfg.max_len);
        assert!(seq.iter().all(|&t| (t as usize) < m.vocab.size()));
        for e in l.elements() {
            assert!(e.w >= 1 && e.h >= 1);
            assert!(e.right() <= l.page().width as u64 && e.bottom() <= l.page().height as u64);
            assert!(e.class_id < l.num_classes());
        }
    }
    // Sequence i depends only on (seed, i), not on batching.
    let again = m.sample(20, 3, SampleOptions { batch: 64, clamp: false }).unwrap();
    assert_eq!(out.sequences, again.sequences);
}

#[test]
fn checkpoint_round_trip() {
    let m = untrained_model();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("model.json");
    m.save(&path).unwrap();
    let back = LayoutModel::load(&path).unwrap();
    assert_eq!(back.params, m.params);
    assert_eq!(back.schedule, m.schedule);
    assert_eq!(back.vocab, m.vocab);
    assert_eq!(back.schema, m.schema);
    assert_eq!(back.train, m.train);
    let opts = SampleOptions::default();
    assert_eq!(back.sample(5, 9, opts).unwrap().sequences, m.sample(5, 9, opts).unwrap().sequences);
}

#[test]
fn corrupt_checkpoints_are_format_errors() {
    let m = untrained_model();
    let text = m.to_json().unwrap();
    let mut v: serde_json::Value = serde_json::from_str(&text).unwrap();
    v["tensors"][0]["shape"][0] = serde_json::json!(999);
    assert!(matches!(LayoutModel::from_json(&v.to_string()), Err(doclayout::Error::Format(_))));
    v = serde_json::from_str(&text).unwrap();
    v["format"] = serde_json::json!("something-else");
    assert!(matches!(LayoutModel::from_json(&v.to_string()), Err(doclayout::Error::Format(_))));
    assert!(LayoutModel::from_json("{").is_err());
}

#[test]
fn toy_schema_vocabulary_size() {
    let vocab = Vocabulary::for_schema(32, &ClassSchema::toy()).unwrap();
    assert_eq!(vocab.size(), 32 + 3 + 3);
}
