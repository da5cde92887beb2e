//! Randomized invariants.

use proptest::prelude::*;

use endocrine::data::{split_dataset, split_words, DialoguePair, HormoneVector, Tone, Vocab, N_HORMONES};
use endocrine::eval::{hormone_metrics, nearest_tone};
use endocrine::infer::{session_step, SessionState};
use endocrine::tensor::{Rng, Tensor};
use endocrine::train::{clip_gradients, cosine_warm_restart_lr};

fn unit_vector() -> impl Strategy<Value = [f64; N_HORMONES]> {
    prop::array::uniform6(0.0..=1.0f64)
}

proptest! {
    #[test]
    fn session_state_stays_inside_input_bounds(lambda in 0.0..=1.0f64, preds in prop::collection::vec(unit_vector(), 1..12)) {
        let mut state = SessionState::new(lambda).unwrap();
        let mut lo = state.current.0;
        let mut hi = state.current.0;
        for p in &preds {
            for i in 0..N_HORMONES {
                lo[i] = lo[i].min(p[i]);
                hi[i] = hi[i].max(p[i]);
            }
            state = session_step(&state, &HormoneVector(*p));
            for i in 0..N_HORMONES {
                prop_assert!(state.current.0[i] >= lo[i] - 1e-15 && state.current.0[i] <= hi[i] + 1e-15);
            }
        }
        prop_assert_eq!(state.turn_count, preds.len());
    }

    #[test]
    fn softmax_rows_are_distributions(rows in 1usize..5, cols in 1usize..7, seed in any::<u64>(), scale in 0.1..50.0f64) {
        let mut rng = Rng::new(seed);
        let x = Tensor::new(&[rows, cols], (0..rows * cols).map(|_| scale * rng.normal()).collect()).unwrap();
        let y = x.softmax(1).unwrap().to_vec();
        for r in y.chunks(cols) {
            prop_assert!(r.iter().all(|&v| (0.0..=1.0).contains(&v)));
            prop_assert!((r.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn clipped_norm_never_exceeds_cap(values in prop::collection::vec(-100.0..100.0f64, 1..20), cap in 0.01..10.0f64) {
        let p = Tensor::parameter(&[values.len()], vec![0.0; values.len()]).unwrap();
        p.set_grad(Some(values.clone()));
        let before = clip_gradients(std::slice::from_ref(&p), cap);
        let after = p.grad().unwrap().iter().map(|g| g * g).sum::<f64>().sqrt();
        prop_assert!(after <= cap * (1.0 + 1e-12));
        prop_assert!((before - values.iter().map(|g| g * g).sum::<f64>().sqrt()).abs() < 1e-9);
        if before <= cap {
            prop_assert_eq!(p.grad().unwrap(), values);
        }
    }

    #[test]
    fn learning_rate_stays_in_range(epoch in 0usize..500, t0 in 1usize..20, t_mult in 1usize..4) {
        let lr = cosine_warm_restart_lr(epoch, t0, t_mult, 1e-4, 1e-6);
        prop_assert!((1e-6..=1e-4).contains(&lr));
    }

    #[test]
    fn tone_profiles_are_their_own_nearest_tone(tone in prop::sample::select(Tone::ALL.to_vec()), noise in prop::array::uniform6(-0.04..0.04f64)) {
        let mut v = tone.hormones().0;
        for i in 0..N_HORMONES {
            v[i] += noise[i];
        }
        prop_assert_eq!(nearest_tone(&HormoneVector(v)), tone);
    }

    #[test]
    fn metrics_are_bounded(n in 1usize..10, seed in any::<u64>()) {
        let mut rng = Rng::new(seed);
        let preds: Vec<f64> = (0..n * 6).map(|_| rng.uniform()).collect();
        let targets: Vec<f64> = (0..n * 6).map(|_| rng.uniform()).collect();
        for (mse, mae, acc) in hormone_metrics(&preds, &targets, 6, 0.15).unwrap() {
            prop_assert!((0.0..=1.0).contains(&mse) && (0.0..=1.0).contains(&mae) && (0.0..=1.0).contains(&acc));
            prop_assert!(mse <= mae + 1e-15, "errors in [0,1] square to something smaller");
        }
    }

    #[test]
    fn split_is_a_stratified_partition(per_tone in prop::array::uniform5(1usize..30), seed in any::<u64>()) {
        let mut pairs = Vec::new();
        for (tone, &n) in Tone::ALL.iter().zip(&per_tone) {
            for i in 0..n {
                pairs.push(DialoguePair::new(format!("{} {i}", tone.name()), "ok", *tone).unwrap());
            }
        }
        let (train, val) = split_dataset(&pairs, 0.8, &mut Rng::new(seed)).unwrap();
        prop_assert_eq!(train.len() + val.len(), pairs.len());
        prop_assert_eq!(train.len(), (0.8 * pairs.len() as f64).round() as usize);
        for (tone, &n) in Tone::ALL.iter().zip(&per_tone) {
            let got = train.iter().filter(|p| p.tone == *tone).count() as f64;
            prop_assert!((got - 0.8 * n as f64).abs() <= 1.0, "{} train {} of {}", tone.name(), got, n);
        }
        let mut all: Vec<String> = train.iter().chain(&val).map(|p| p.input.clone()).collect();
        all.sort();
        all.dedup();
        prop_assert_eq!(all.len(), pairs.len());
    }

    #[test]
    fn known_words_round_trip(words in prop::collection::vec("[a-z]{1,8}", 1..10)) {
        let text = words.join(" ");
        let vocab = Vocab::build([text.as_str()]);
        let (ids, mask) = vocab.tokenize(&text, 16);
        prop_assert_eq!(ids.len(), 16);
        let kept = words.len().min(15);
        prop_assert_eq!(mask.iter().filter(|&&m| m == 1).count(), kept + 1);
        prop_assert_eq!(vocab.detokenize(&ids), words[..kept].join(" "));
        prop_assert_eq!(split_words(&text).len(), words.len());
    }
}
