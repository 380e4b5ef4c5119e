use rand::Rng;
use seginr::decode::{parallel_decode, streaming_decode, DecodeConfig, DecodeMode, StopRule};
use seginr::net::{ModelConfig, ModelParams};
use seginr::numerics::{rng_from_seed, SeededRng};
use seginr::TokenSequence;

/// A tiny random model whose end-class bias is pushed by a random amount so
/// that decoded durations vary between 0 and beyond `i_max`.
fn random_model(rng: &mut SeededRng) -> ModelParams {
    let mut model = ModelParams::init(ModelConfig::tiny(), rng).unwrap();
    let end = model.vocab().end_id();
    let bias = model.params().find("head.bias").unwrap().offset;
    model.values_mut()[bias + end] += rng.gen_range(-2.0..4.0);
    model
}

fn random_input(model: &ModelParams, rng: &mut SeededRng) -> TokenSequence {
    let len = rng.gen_range(1..=8);
    let v = model.vocab().input_size();
    TokenSequence::new(
        (0..len).map(|_| rng.gen_range(0..v)).collect(),
        model.vocab(),
    )
    .unwrap()
}

#[test]
fn streaming_and_parallel_agree() {
    let mut rng = rng_from_seed(2024);
    let taus = [0.0, 0.3, 0.5, 0.9, 1.1];
    let (mut truncated, mut empty, mut other) = (0, 0, 0);
    for trial in 0..200 {
        let model = random_model(&mut rng);
        let x = random_input(&model, &mut rng);
        let rule = if trial % 2 == 0 {
            StopRule::Threshold(taus[(trial / 2) % taus.len()])
        } else {
            StopRule::Argmax
        };
        let cfg = DecodeConfig {
            mode: DecodeMode::Streaming,
            rule,
            i_max: rng.gen_range(1..=20),
        };
        let s = streaming_decode(&x, &model, &cfg).unwrap();
        let p = parallel_decode(&x, &model, &cfg).unwrap();
        assert_eq!(s.output, p.output, "trial {trial}");
        assert_eq!(s.durations, p.durations, "trial {trial}");
        assert_eq!(s.truncated, p.truncated, "trial {trial}");
        for (&d, &t) in s.durations.iter().zip(&s.truncated) {
            match (d, t) {
                (_, true) => truncated += 1,
                (0, false) => empty += 1,
                _ => other += 1,
            }
        }
    }
    assert!(
        truncated > 0 && empty > 0 && other > 0,
        "{truncated} {empty} {other}"
    );
}

#[test]
fn raising_tau_never_shortens_segments() {
    let mut rng = rng_from_seed(77);
    for _ in 0..40 {
        let model = random_model(&mut rng);
        let x = random_input(&model, &mut rng);
        let mut prev: Option<Vec<usize>> = None;
        for tau in [0.0, 0.1, 0.3, 0.5, 0.7, 0.9, 1.0, 1.1] {
            let cfg = DecodeConfig {
                mode: DecodeMode::Parallel,
                rule: StopRule::Threshold(tau),
                i_max: 20,
            };
            let d = parallel_decode(&x, &model, &cfg).unwrap().durations;
            if let Some(p) = &prev {
                assert!(
                    p.iter().zip(&d).all(|(a, b)| a <= b),
                    "{p:?} -> {d:?} at tau {tau}"
                );
            }
            prev = Some(d);
        }
    }
}

#[test]
fn parallel_waste_is_grid_minus_durations() {
    let mut rng = rng_from_seed(8);
    for _ in 0..100 {
        let model = random_model(&mut rng);
        let x = random_input(&model, &mut rng);
        let i_max = rng.gen_range(1..=20);
        let cfg = DecodeConfig {
            mode: DecodeMode::Parallel,
            rule: StopRule::Threshold(0.5),
            i_max,
        };
        let r = parallel_decode(&x, &model, &cfg).unwrap();
        let expected: usize = r.durations.iter().map(|d| i_max - d).sum();
        assert_eq!(r.wasted, expected);
        assert_eq!(r.output.len(), r.durations.iter().sum::<usize>());
    }
}
