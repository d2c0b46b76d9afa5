use rand::Rng;

use super::*;
use crate::conditioning::ConditionVector;
use crate::postproc::EnhancerOutput;

fn small_config(h: usize, layers: usize, cond: usize) -> NetConfig {
    NetConfig {
        cond_dim: cond,
        conv_channels: 6,
        gru_layers: layers,
        gru_hidden: h,
        ..NetConfig::default()
    }
}

fn random_inputs(n: usize, cond: usize, seed: u64) -> (Vec<FrameFeatures<f64>>, Vec<ConditionVector<f64>>) {
    let mut rng = crate::rng::rng(seed);
    let feats = (0..n)
        .map(|_| {
            let v: Vec<f64> = (0..FEATURE_DIM)
                .map(|i| match i {
                    0..=31 => rng.random::<f64>() * 50.0,
                    66 => rng.random_range(-60.0..40.0),
                    67 => rng.random_range(-10.0..10.0),
                    _ => rng.random::<f64>(),
                })
                .collect();
            FrameFeatures::from_slice(&v).unwrap()
        })
        .collect();
    let conds = (0..n)
        .map(|_| ConditionVector {
            values: (0..cond).map(|_| rng.random_range(-0.5..0.5)).collect(),
        })
        .collect();
    (feats, conds)
}

#[test]
fn zero_network_outputs_one_half() {
    let p = NetParams::<f64>::zeros(small_config(8, 2, 5)).unwrap();
    let (f, c) = random_inputs(7, 5, 1);
    let out = forward_sequence(&p, &f, &c).unwrap();
    assert_eq!(out.len(), 7);
    for o in out {
        assert!(o.gains.iter().chain(&o.strengths).all(|&v| v == 0.5));
        assert_eq!(o.vad, 0.5);
    }
}

#[test]
fn chunked_streaming_matches_whole_sequence() {
    let p = NetParams::<f32>::init(small_config(16, 3, 9), 3).unwrap();
    let (f, c) = random_inputs(100, 9, 2);
    let (f, c): (Vec<FrameFeatures<f32>>, Vec<ConditionVector<f32>>) = (
        f.iter().map(|x| x.cast()).collect(),
        c.iter()
            .map(|x| ConditionVector {
                values: crate::scalar::cast_slice(&x.values),
            })
            .collect(),
    );
    let mut whole_state = NetState::new(p.config);
    let mut whole = forward(&p, &f, &c, &mut whole_state).unwrap();
    whole.extend(whole_state.flush(&p));
    let mut state = NetState::new(p.config);
    let mut chunked = Vec::new();
    for k in 0..10 {
        chunked.extend(forward(&p, &f[k * 10..(k + 1) * 10], &c[k * 10..(k + 1) * 10], &mut state).unwrap());
    }
    assert_eq!(state.pending(), NET_LOOKAHEAD);
    chunked.extend(state.flush(&p));
    assert_eq!(whole.len(), 100);
    assert_eq!(whole, chunked);
    assert_eq!(whole, forward_sequence(&p, &f, &c).unwrap());
    let mut s = StreamingNet::new(p.clone());
    let mut one = Vec::new();
    for (x, q) in f.iter().zip(&c) {
        one.extend(s.push(x, q).unwrap());
    }
    one.extend(s.flush());
    assert_eq!(one, whole);
}

#[test]
fn short_sequences_and_shape_errors() {
    let p = NetParams::<f64>::init(small_config(4, 1, 3), 1).unwrap();
    for n in 0..4 {
        let (f, c) = random_inputs(n, 3, 9);
        let mut st = NetState::new(p.config);
        let mut out = forward(&p, &f, &c, &mut st).unwrap();
        out.extend(st.flush(&p));
        assert_eq!(out, forward_sequence(&p, &f, &c).unwrap());
        assert_eq!(out.len(), n);
    }
    let (f, c) = random_inputs(3, 4, 9);
    assert!(forward_sequence(&p, &f, &c).is_err());
    let ok = vec![ConditionVector::zeros(3); 2];
    assert!(forward_sequence(&p, &f, &ok).is_err());
}

#[test]
fn lookahead_is_two_frames() {
    let p = NetParams::<f64>::init(small_config(8, 2, 4), 11).unwrap();
    let (f, c) = random_inputs(20, 4, 12);
    let base = forward_sequence(&p, &f, &c).unwrap();
    for t in [3usize, 10, 19] {
        let mut f2 = f.clone();
        f2[t].band_mag[5] += 10.0;
        f2[t].pitch_corr = 0.01;
        let out = forward_sequence(&p, &f2, &c).unwrap();
        for s in 0..20 {
            let changed = out[s] != base[s];
            assert_eq!(changed, s + NET_LOOKAHEAD >= t, "feature change at {t}, output {s}");
        }
        let mut c2 = c.clone();
        c2[t].values[1] += 0.3;
        let out = forward_sequence(&p, &f, &c2).unwrap();
        for s in 0..20 {
            assert_eq!(out[s] != base[s], s >= t);
        }
    }
}

fn loss_of(p: &NetParams<f64>, f: &[FrameFeatures<f64>], c: &[ConditionVector<f64>], w: &[EnhancerOutput<f64>]) -> f64 {
    forward_sequence(p, f, c)
        .unwrap()
        .iter()
        .zip(w)
        .map(|(o, w)| {
            o.gains.iter().zip(&w.gains).map(|(a, b)| a * b).sum::<f64>()
                + o.strengths.iter().zip(&w.strengths).map(|(a, b)| a * b).sum::<f64>()
                + o.vad * w.vad
        })
        .sum()
}

fn random_output_grads(n: usize, seed: u64) -> Vec<EnhancerOutput<f64>> {
    let mut rng = crate::rng::rng(seed);
    (0..n)
        .map(|_| EnhancerOutput {
            gains: std::array::from_fn(|_| rng.random_range(-1.0..1.0)),
            strengths: std::array::from_fn(|_| rng.random_range(-1.0..1.0)),
            vad: rng.random_range(-1.0..1.0),
        })
        .collect()
}

/// Relative error between analytic and central-difference gradients over a
/// random subset of every tensor.
pub(crate) fn gradient_check_error(seed: u64) -> f64 {
    let mut rng = crate::rng::rng(seed);
    let cfg = NetConfig {
        cond_dim: rng.random_range(1..6),
        conv_channels: rng.random_range(2..7),
        gru_layers: rng.random_range(1..4),
        gru_hidden: 8,
        ..NetConfig::default()
    };
    let p = NetParams::<f64>::init(cfg, seed).unwrap();
    let (f, c) = random_inputs(12, cfg.cond_dim, seed + 1);
    let w = random_output_grads(12, seed + 2);
    let cache = forward_cached(&p, &f, &c).unwrap();
    let g = backward(&p, &cache, &w).unwrap();
    let h = 1e-6;
    let mut num = Vec::new();
    let mut ana = Vec::new();
    let n_tensors = p.named().len();
    for ti in 0..n_tensors {
        let len = p.named()[ti].1.data.len();
        for _ in 0..4 {
            let k = rng.random_range(0..len);
            let mut q = p.clone();
            q.tensors_mut()[ti].data[k] += h;
            let up = loss_of(&q, &f, &c, &w);
            q.tensors_mut()[ti].data[k] -= 2.0 * h;
            let down = loss_of(&q, &f, &c, &w);
            num.push((up - down) / (2.0 * h));
            ana.push(g.named()[ti].1.data[k]);
        }
    }
    let diff: f64 = num.iter().zip(&ana).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
    let scale: f64 = ana.iter().map(|a| a * a).sum::<f64>().sqrt();
    diff / scale
}

#[test]
fn backward_matches_finite_differences() {
    for seed in 0..20 {
        let e = gradient_check_error(seed);
        assert!(e < 1e-4, "seed {seed}: relative error {e}");
    }
}

#[test]
fn zero_output_gradient_gives_zero_parameter_gradient() {
    let p = NetParams::<f64>::init(small_config(8, 2, 3), 5).unwrap();
    let (f, c) = random_inputs(9, 3, 6);
    let cache = forward_cached(&p, &f, &c).unwrap();
    let zero = vec![EnhancerOutput::uniform(0.0, 0.0, 0.0); 9];
    let g = backward(&p, &cache, &zero).unwrap();
    assert!(g.named().iter().all(|(_, t)| t.data.iter().all(|&v| v == 0.0)));
    let mut w = random_output_grads(9, 7);
    w.iter_mut().for_each(|o| o.vad = 0.0);
    let g = backward(&p, &cache, &w).unwrap();
    assert!(g.vad_w.data.iter().chain(&g.vad_b.data).all(|&v| v == 0.0));
    assert!(g.gain_w.data.iter().any(|&v| v != 0.0));
    assert!(backward(&p, &cache, &w[..3]).is_err());
}

#[test]
fn checkpoint_round_trip_and_rejections() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.ckpt");
    let p = NetParams::<f32>::init(small_config(8, 3, 5), 21).unwrap();
    save_params(&p, &path).unwrap();
    let q = load_params(&path).unwrap();
    assert_eq!(p, q);
    let bytes = std::fs::read(&path).unwrap();
    std::fs::write(&path, &bytes[..bytes.len() - 3]).unwrap();
    let err = load_params(&path).unwrap_err().to_string();
    assert!(err.contains("vad.bias"), "{err}");
    let mut bad = bytes.clone();
    bad[0] = b'X';
    std::fs::write(&path, &bad).unwrap();
    assert!(load_params(&path).is_err());
    // a tensor with the wrong shape is named in the error
    let mut wrong = NetParams::<f32>::init(small_config(8, 3, 5), 21).unwrap();
    wrong.gain_b = Tensor::zeros(&[31]);
    save_params(&wrong, &path).unwrap();
    let err = load_params(&path).unwrap_err().to_string();
    assert!(err.contains("gain.bias"), "{err}");
}

#[test]
fn outputs_stay_in_open_unit_interval() {
    let mut p = NetParams::<f64>::init(small_config(8, 2, 3), 2).unwrap();
    for t in p.tensors_mut() {
        t.data.iter_mut().for_each(|v| *v *= 3.0);
    }
    let (f, c) = random_inputs(30, 3, 4);
    for o in forward_sequence(&p, &f, &c).unwrap() {
        assert!(o.is_valid());
        assert!(o.gains.iter().all(|&g| g > 0.0 && g < 1.0));
    }
}
