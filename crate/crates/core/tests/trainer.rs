use upn_core::datagen::noise::noise_clip;
use upn_core::datagen::{synthesize_mixture, MixtureSpec, SegmentType, Split, ToyCorpus};
use upn_core::dsp::{AnalysisConfig, FeatureExtractor};
use upn_core::embedder::SpeakerEmbedding;
use upn_core::net::{NetConfig, NetParams};
use upn_core::optim::Adam;
use upn_core::trainer::{batch_loss, train, train_step, SegmentData, TrainConfig};

fn segments(n: usize, dur: f64) -> Vec<SegmentData<f32>> {
    let corpus = ToyCorpus::new(4, 21);
    let ex = FeatureExtractor::<f64>::new(AnalysisConfig::default()).unwrap();
    let kinds = [SegmentType::Overlapping, SegmentType::Alternating, SegmentType::Single];
    (0..n)
        .map(|k| {
            let s = k % 4;
            let dur_k = if kinds[k % 3] == SegmentType::Alternating { dur.max(6.5) } else { dur };
            let t = vec![corpus.utterance(s, k, dur_k).unwrap()];
            let i = vec![corpus.utterance((s + 1) % 4, k, dur_k).unwrap()];
            let spec = MixtureSpec::sample(kinds[k % 3], dur_k, k as u64);
            let triple = synthesize_mixture(&t, &i, &[noise_clip(k % 5, dur_k, 3)], &spec).unwrap();
            let mut e = vec![0.1f64; 32];
            e[s] = 1.0;
            let norm = e.iter().map(|v| v * v).sum::<f64>().sqrt();
            let z = SpeakerEmbedding::new(e.iter().map(|v| v / norm).collect()).unwrap();
            SegmentData::prepare(format!("seg{k:02}"), Split::Train, &triple, &[z], &ex).unwrap()
        })
        .collect()
}

fn small_net() -> NetConfig {
    NetConfig {
        conv_channels: 64,
        gru_layers: 1,
        gru_hidden: 256,
        ..Default::default()
    }
}

#[test]
fn overfits_four_examples() {
    let data = segments(4, 1.5);
    let cfg = TrainConfig {
        batch_size: 1,
        seq_frames: 30,
        min_run: 20,
        learning_rate: 5e-3,
        net: small_net(),
        ..Default::default()
    };
    let examples: Vec<_> = data.iter().enumerate().map(|(i, d)| d.draw(30, 20, i as u64).unwrap()).collect();
    let mut params = NetParams::<f32>::init(cfg.net, 5).unwrap();
    let mut adam = Adam::new(cfg.learning_rate as f32, 0.9, 0.999);
    let mut epoch_loss = Vec::new();
    for _ in 0..50 {
        let mut sum = 0.0;
        for ex in &examples {
            sum += train_step(&mut params, &mut adam, std::slice::from_ref(ex), &cfg).unwrap().total;
        }
        epoch_loss.push(sum / examples.len() as f64);
    }
    let first = epoch_loss[0];
    let last = batch_loss(&params, &examples, &cfg.loss(), false).unwrap().0.total;
    assert!(first / last >= 10.0, "loss {first} -> {last}");
}

#[test]
fn epochs_mix_both_flag_regimes() {
    let data = segments(60, 1.2);
    let cfg = TrainConfig {
        batch_size: 30,
        seq_frames: 100,
        min_run: 20,
        epochs: 3,
        net: NetConfig {
            conv_channels: 4,
            gru_layers: 1,
            gru_hidden: 4,
            ..Default::default()
        },
        ..Default::default()
    };
    let out = train(&data, &cfg).unwrap();
    let train_records: Vec<_> = out.log.iter().filter(|r| r.split == Split::Train).collect();
    assert_eq!(train_records.len(), 3);
    for r in train_records {
        assert!((0.3..=0.7).contains(&r.q_fraction), "epoch {} q fraction {}", r.epoch, r.q_fraction);
    }
}
