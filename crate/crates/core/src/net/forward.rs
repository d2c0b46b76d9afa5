use std::collections::VecDeque;

use crate::conditioning::ConditionVector;
use crate::dsp::FrameFeatures;
use crate::error::{Error, Result};
use crate::postproc::EnhancerOutput;
use crate::scalar::{dot, sigmoid, Real};

use super::{normalize_features, GruParams, NetConfig, NetParams, Tensor};

/// `out[o] = tanh(b[o] + sum_k W[o][k] . taps[k])`
pub(super) fn conv_frame<T: Real>(w: &Tensor<T>, b: &Tensor<T>, taps: [&[T]; 3], out: &mut [T]) {
    let in_dim = w.dims[2];
    for (o, y) in out.iter_mut().enumerate() {
        let row = &w.data[o * 3 * in_dim..(o + 1) * 3 * in_dim];
        let mut acc = b.data[o];
        for (k, x) in taps.iter().enumerate() {
            acc += dot(&row[k * in_dim..(k + 1) * in_dim], x);
        }
        *y = acc.tanh();
    }
}

/// Gate activations of one GRU step, kept for the backward pass.
#[derive(Clone, Debug)]
pub(super) struct GruScratch<T> {
    pub r: Vec<T>,
    pub z: Vec<T>,
    pub n: Vec<T>,
    /// `W_hn h + b_hn`, before the reset gate is applied
    pub hn: Vec<T>,
}

impl<T: Real> GruScratch<T> {
    pub fn new(h: usize) -> Self {
        Self {
            r: vec![T::zero(); h],
            z: vec![T::zero(); h],
            n: vec![T::zero(); h],
            hn: vec![T::zero(); h],
        }
    }
}

pub(super) fn gru_step<T: Real>(
    p: &GruParams<T>,
    x: &[T],
    h_prev: &[T],
    h_out: &mut [T],
    s: &mut GruScratch<T>,
) {
    let hd = h_prev.len();
    let in_dim = x.len();
    let wi = |j: usize| dot(&p.w_ih.data[j * in_dim..(j + 1) * in_dim], x) + p.b_ih.data[j];
    let wh = |j: usize| dot(&p.w_hh.data[j * hd..(j + 1) * hd], h_prev) + p.b_hh.data[j];
    for j in 0..hd {
        s.r[j] = sigmoid(wi(j) + wh(j));
        s.z[j] = sigmoid(wi(hd + j) + wh(hd + j));
        s.hn[j] = wh(2 * hd + j);
        s.n[j] = (wi(2 * hd + j) + s.r[j] * s.hn[j]).tanh();
        h_out[j] = (T::one() - s.z[j]) * s.n[j] + s.z[j] * h_prev[j];
    }
}

fn head<T: Real>(w: &Tensor<T>, b: &Tensor<T>, h: &[T], out: &mut [T]) {
    let hd = h.len();
    for (i, y) in out.iter_mut().enumerate() {
        *y = sigmoid(dot(&w.data[i * hd..(i + 1) * hd], h) + b.data[i]);
    }
}

pub(super) fn heads<T: Real>(p: &NetParams<T>, h: &[T]) -> EnhancerOutput<T> {
    let mut out = EnhancerOutput::uniform(T::zero(), T::zero(), T::zero());
    head(&p.gain_w, &p.gain_b, h, &mut out.gains);
    head(&p.strength_w, &p.strength_b, h, &mut out.strengths);
    let mut v = [T::zero()];
    head(&p.vad_w, &p.vad_b, h, &mut v);
    out.vad = v[0];
    out
}

fn check_shapes<T: Real>(
    cfg: &NetConfig,
    features: &[FrameFeatures<T>],
    conditions: &[ConditionVector<T>],
) -> Result<()> {
    if features.len() != conditions.len() {
        return Err(Error::contract(format!(
            "{} feature frames but {} condition vectors",
            features.len(),
            conditions.len()
        )));
    }
    if let Some(c) = conditions.iter().find(|c| c.len() != cfg.cond_dim) {
        return Err(Error::contract(format!(
            "condition vector has {} values, network expects {}",
            c.len(),
            cfg.cond_dim
        )));
    }
    Ok(())
}

/// Per-stream network state: GRU hidden vectors and the convolution windows.
#[derive(Clone, Debug)]
pub struct NetState<T = f32> {
    config: NetConfig,
    /// normalised inputs `x_{k-2}, x_{k-1}, x_k`
    x_win: [Vec<T>; 3],
    /// conv1 outputs `a1_{k-3}, a1_{k-2}, a1_{k-1}`
    a1_win: [Vec<T>; 3],
    pending: VecDeque<ConditionVector<T>>,
    steps: usize,
    received: usize,
    hidden: Vec<Vec<T>>,
    a2: Vec<T>,
    u: Vec<T>,
    h_next: Vec<T>,
    scratch: GruScratch<T>,
}

impl<T: Real> NetState<T> {
    pub fn new(config: NetConfig) -> Self {
        let (f, c, h) = (config.feat_dim, config.conv_channels, config.gru_hidden);
        Self {
            config,
            x_win: std::array::from_fn(|_| vec![T::zero(); f]),
            a1_win: std::array::from_fn(|_| vec![T::zero(); c]),
            pending: VecDeque::new(),
            steps: 0,
            received: 0,
            hidden: vec![vec![T::zero(); h]; config.gru_layers],
            a2: vec![T::zero(); c],
            u: vec![T::zero(); c + config.cond_dim],
            h_next: vec![T::zero(); h],
            scratch: GruScratch::new(h),
        }
    }

    pub fn reset(&mut self) {
        *self = Self::new(self.config);
    }

    pub fn hidden(&self) -> &[Vec<T>] {
        &self.hidden
    }

    /// Frames pushed whose outputs are still waiting for look-ahead.
    pub fn pending(&self) -> usize {
        self.pending.len()
    }

    fn step(&mut self, p: &NetParams<T>, x: Option<Vec<T>>) -> Option<EnhancerOutput<T>> {
        let k = self.steps as isize;
        self.steps += 1;
        self.x_win.rotate_left(1);
        match x {
            Some(v) => self.x_win[2] = v,
            None => self.x_win[2].iter_mut().for_each(|v| *v = T::zero()),
        }
        self.a1_win.rotate_left(1);
        let i = k - 1;
        if i >= 0 && (i as usize) < self.received {
            let [a, b, c] = &self.x_win;
            conv_frame(&p.conv1_w, &p.conv1_b, [a, b, c], &mut self.a1_win[2]);
        } else {
            self.a1_win[2].iter_mut().for_each(|v| *v = T::zero());
        }
        let j = k - 2;
        if j < 0 || j as usize >= self.received {
            return None;
        }
        let [a, b, c] = &self.a1_win;
        conv_frame(&p.conv2_w, &p.conv2_b, [a, b, c], &mut self.a2);
        let cond = self.pending.pop_front().expect("condition queued for every frame");
        let c = self.config.conv_channels;
        self.u[..c].copy_from_slice(&self.a2);
        self.u[c..].copy_from_slice(&cond.values);
        for (l, g) in p.gru.iter().enumerate() {
            let input: &[T] = if l == 0 { &self.u } else { &self.hidden[l - 1] };
            gru_step(g, input, &self.hidden[l], &mut self.h_next, &mut self.scratch);
            std::mem::swap(&mut self.hidden[l], &mut self.h_next);
        }
        Some(heads(p, &self.hidden[self.config.gru_layers - 1]))
    }

    /// Consumes one frame; returns the output for the frame two steps back
    /// once it is available.
    pub fn push(
        &mut self,
        params: &NetParams<T>,
        features: &FrameFeatures<T>,
        condition: &ConditionVector<T>,
    ) -> Result<Option<EnhancerOutput<T>>> {
        if params.config != self.config {
            return Err(Error::contract("network state was built for a different config"));
        }
        check_shapes(&self.config, std::slice::from_ref(features), std::slice::from_ref(condition))?;
        if self.steps > self.received {
            return Err(Error::contract("stream already flushed; reset the state first"));
        }
        self.received += 1;
        self.pending.push_back(condition.clone());
        Ok(self.step(params, Some(normalize_features(features))))
    }

    /// Ends the stream, emitting the outputs still held back by look-ahead.
    pub fn flush(&mut self, params: &NetParams<T>) -> Vec<EnhancerOutput<T>> {
        let mut out = Vec::new();
        while !self.pending.is_empty() {
            if let Some(o) = self.step(params, None) {
                out.push(o);
            }
        }
        out
    }
}

/// Streaming forward: feeds a chunk through `state` and returns every output
/// that became available. Call [`NetState::flush`] at the end of the stream.
pub fn forward<T: Real>(
    params: &NetParams<T>,
    features: &[FrameFeatures<T>],
    conditions: &[ConditionVector<T>],
    state: &mut NetState<T>,
) -> Result<Vec<EnhancerOutput<T>>> {
    check_shapes(&params.config, features, conditions)?;
    let mut out = Vec::with_capacity(features.len());
    for (f, c) in features.iter().zip(conditions) {
        if let Some(o) = state.push(params, f, c)? {
            out.push(o);
        }
    }
    Ok(out)
}

/// Row `t` of an `n x dim` buffer, or `None` in the zero padding.
pub(super) fn row(t: isize, n: usize, dim: usize) -> Option<std::ops::Range<usize>> {
    (t >= 0 && (t as usize) < n).then(|| t as usize * dim..(t as usize + 1) * dim)
}

/// Activations of a whole-sequence forward pass.
#[derive(Clone, Debug)]
pub struct ForwardCache<T = f32> {
    pub(super) n: usize,
    pub(super) x: Vec<T>,
    pub(super) a1: Vec<T>,
    pub(super) u: Vec<T>,
    /// per layer `(n + 1) x H`; row 0 is the initial state
    pub(super) h: Vec<Vec<T>>,
    pub(super) r: Vec<Vec<T>>,
    pub(super) z: Vec<Vec<T>>,
    pub(super) cand: Vec<Vec<T>>,
    pub(super) hn: Vec<Vec<T>>,
    pub outputs: Vec<EnhancerOutput<T>>,
}

/// Whole-sequence forward from a zero state, including the end-of-stream
/// padding. Produces exactly the outputs of a streaming run plus flush.
pub fn forward_cached<T: Real>(
    params: &NetParams<T>,
    features: &[FrameFeatures<T>],
    conditions: &[ConditionVector<T>],
) -> Result<ForwardCache<T>> {
    let cfg = params.config;
    check_shapes(&cfg, features, conditions)?;
    let n = features.len();
    let (f, c, hd) = (cfg.feat_dim, cfg.conv_channels, cfg.gru_hidden);
    let i0 = c + cfg.cond_dim;
    let mut x = Vec::with_capacity(n * f);
    for feat in features {
        x.extend(normalize_features(feat));
    }
    let zf = vec![T::zero(); f];
    let zc = vec![T::zero(); c];
    let mut a1 = vec![T::zero(); n * c];
    for t in 0..n as isize {
        let get = |s: isize| row(s, n, f).map_or(zf.as_slice(), |r| &x[r]);
        let taps = [get(t - 1), get(t), get(t + 1)];
        conv_frame(&params.conv1_w, &params.conv1_b, taps, &mut a1[t as usize * c..(t as usize + 1) * c]);
    }
    let mut u = vec![T::zero(); n * i0];
    for t in 0..n as isize {
        let get = |s: isize| row(s, n, c).map_or(zc.as_slice(), |r| &a1[r]);
        let taps = [get(t - 1), get(t), get(t + 1)];
        let row = &mut u[t as usize * i0..(t as usize + 1) * i0];
        conv_frame(&params.conv2_w, &params.conv2_b, taps, &mut row[..c]);
        row[c..].copy_from_slice(&conditions[t as usize].values);
    }
    let layers = cfg.gru_layers;
    let mut h = vec![vec![T::zero(); (n + 1) * hd]; layers];
    let mut r = vec![vec![T::zero(); n * hd]; layers];
    let mut z = r.clone();
    let mut cand = r.clone();
    let mut hn = r.clone();
    let mut s = GruScratch::new(hd);
    for l in 0..layers {
        let (below, rest) = h.split_at_mut(l);
        let hl = &mut rest[0];
        for t in 0..n {
            let input: &[T] = if l == 0 {
                &u[t * i0..(t + 1) * i0]
            } else {
                &below[l - 1][(t + 1) * hd..(t + 2) * hd]
            };
            let (prev, next) = hl.split_at_mut((t + 1) * hd);
            gru_step(&params.gru[l], input, &prev[t * hd..], &mut next[..hd], &mut s);
            let span = t * hd..(t + 1) * hd;
            r[l][span.clone()].copy_from_slice(&s.r);
            z[l][span.clone()].copy_from_slice(&s.z);
            cand[l][span.clone()].copy_from_slice(&s.n);
            hn[l][span].copy_from_slice(&s.hn);
        }
    }
    let top = &h[layers - 1];
    let outputs = (0..n)
        .map(|t| heads(params, &top[(t + 1) * hd..(t + 2) * hd]))
        .collect();
    Ok(ForwardCache {
        n,
        x,
        a1,
        u,
        h,
        r,
        z,
        cand,
        hn,
        outputs,
    })
}

/// Offline inference over a complete sequence.
pub fn forward_sequence<T: Real>(
    params: &NetParams<T>,
    features: &[FrameFeatures<T>],
    conditions: &[ConditionVector<T>],
) -> Result<Vec<EnhancerOutput<T>>> {
    Ok(forward_cached(params, features, conditions)?.outputs)
}

/// Convenience wrapper owning both the parameters and a stream state.
#[derive(Clone, Debug)]
pub struct StreamingNet<T: Real = f32> {
    pub params: NetParams<T>,
    pub state: NetState<T>,
}

impl<T: Real> StreamingNet<T> {
    pub fn new(params: NetParams<T>) -> Self {
        let state = NetState::new(params.config);
        Self { params, state }
    }

    pub fn push(
        &mut self,
        features: &FrameFeatures<T>,
        condition: &ConditionVector<T>,
    ) -> Result<Option<EnhancerOutput<T>>> {
        self.state.push(&self.params, features, condition)
    }

    pub fn flush(&mut self) -> Vec<EnhancerOutput<T>> {
        self.state.flush(&self.params)
    }

    pub fn reset(&mut self) {
        self.state.reset();
    }
}
