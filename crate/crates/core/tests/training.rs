use lenvae::model::HyperParams;
use lenvae::textpipe::{build_vocab, generate_toy_corpus, normalize, TokenizedSentence, ToyGrammar, Vocabulary};
use lenvae::training::{evaluate_loss, train, Checkpoint, TrainConfig};
use lenvae::Error;

fn toy(size: usize) -> (Vec<TokenizedSentence>, Vocabulary) {
    let corpus = generate_toy_corpus(&ToyGrammar::default(), size, 7);
    let tokens: Vec<Vec<String>> = corpus.iter().map(|s| normalize(s)).collect();
    let vocab = build_vocab(&tokens, 100).unwrap();
    let sentences = corpus.iter().map(|s| TokenizedSentence::from_text(s, &vocab)).collect();
    (sentences, vocab)
}

fn config(steps: usize) -> TrainConfig {
    TrainConfig {
        steps,
        anneal_horizon: (steps / 2).max(1),
        batch_size: 16,
        seed: 5,
        ..TrainConfig::default()
    }
}

#[test]
fn two_hundred_steps_lower_the_eval_loss() {
    let (sentences, vocab) = toy(1000);
    let hp = HyperParams::desk(vocab.len());
    let before = train(&sentences, &vocab, hp.clone(), &config(0), None).unwrap();
    let after = train(&sentences, &vocab, hp, &config(200), None).unwrap();
    let held = &sentences[..200];
    let l0 = evaluate_loss(&before.model, &before.params, held, 1.0, 9).unwrap();
    let l1 = evaluate_loss(&after.model, &after.params, held, 1.0, 9).unwrap();
    assert!(l1.total < l0.total, "{} !< {}", l1.total, l0.total);
}

#[test]
fn identical_runs_give_identical_metrics_and_parameters() {
    let (sentences, vocab) = toy(300);
    let hp = HyperParams::desk(vocab.len());
    let a = train(&sentences, &vocab, hp.clone(), &config(40), None).unwrap();
    let b = train(&sentences, &vocab, hp.clone(), &config(40), None).unwrap();
    assert_eq!(a.metrics.to_csv(), b.metrics.to_csv());
    assert_eq!(a.params, b.params);
    let c = train(&sentences, &vocab, hp, &TrainConfig { seed: 6, ..config(40) }, None).unwrap();
    assert_ne!(a.metrics.to_csv(), c.metrics.to_csv());
}

#[test]
fn kl_tracks_the_annealing_weight() {
    let (sentences, vocab) = toy(1000);
    let out = train(&sentences, &vocab, HyperParams::desk(vocab.len()), &config(400), None).unwrap();
    let recs = out.metrics.records();
    let mean_kl = |r: &[lenvae::training::MetricsRecord]| r.iter().map(|r| r.kl).sum::<f64>() / r.len() as f64;
    assert_eq!(recs[0].kl_weight, 0.0);
    assert!(recs[0].kl < 0.05, "{}", recs[0].kl);
    let low_weight = mean_kl(&recs[10..60]);
    let full_weight = mean_kl(&recs[300..]);
    assert!(low_weight > 10.0 * recs[0].kl.max(0.01), "KL under low weight {low_weight}");
    assert!(low_weight > 5.0 * full_weight, "{low_weight} vs {full_weight}");
    assert!(recs.windows(2).all(|w| w[1].kl_weight >= w[0].kl_weight));
}

#[test]
fn checkpoints_are_written_at_the_interval() {
    let (sentences, vocab) = toy(200);
    let dir = tempfile::tempdir().unwrap();
    let cfg = TrainConfig {
        checkpoint_interval: 10,
        ..config(25)
    };
    let out = train(&sentences, &vocab, HyperParams::desk(vocab.len()), &cfg, Some(dir.path())).unwrap();
    assert_eq!(out.checkpoints.len(), 2);
    let ck = Checkpoint::load(&out.checkpoints[1]).unwrap();
    assert_eq!(ck.step, 20);
    assert_eq!(ck.vocab, vocab);
    ck.model_with_length_control().unwrap();
}

#[test]
fn diverging_run_aborts_with_a_named_component() {
    let (sentences, vocab) = toy(100);
    let mut cfg = config(10);
    cfg.adam.learning_rate = f64::INFINITY;
    match train(&sentences, &vocab, HyperParams::desk(vocab.len()), &cfg, None) {
        Err(Error::NonFinite(msg)) => assert!(msg.contains("step"), "{msg}"),
        other => panic!("expected a non-finite abort, got {:?}", other.map(|o| o.metrics.records().len())),
    }
}

#[test]
fn invalid_configs_are_rejected() {
    let (sentences, vocab) = toy(50);
    let hp = HyperParams::desk(vocab.len());
    for bad in [
        TrainConfig { word_drop: 1.2, ..config(10) },
        TrainConfig { anneal_horizon: 11, ..config(10) },
        TrainConfig { batch_size: 0, ..config(10) },
    ] {
        assert!(matches!(train(&sentences, &vocab, hp.clone(), &bad, None), Err(Error::Config(_))));
    }
    assert!(train(&[], &vocab, hp, &config(10), None).is_err());
}
