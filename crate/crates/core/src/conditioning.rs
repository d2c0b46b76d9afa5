//! Frame-wise personalization control.
//!
//! Each frame carries a flag `q_t`. With `q_t = 1` the enhancer sees the
//! speaker embedding with a trailing 1; with `q_t = 0` it sees an all-zero
//! vector of the same length, so nothing about the enrolled speaker leaks into
//! non-personalized frames.

use std::path::Path;

use rand::Rng as _;

use crate::embedder::SpeakerEmbedding;
use crate::error::{Error, Result};
use crate::rng;
use crate::scalar::Real;

pub const DEFAULT_MIN_RUN: usize = 200;

#[derive(Clone, Debug, PartialEq)]
pub struct ConditionVector<T = f64> {
    pub values: Vec<T>,
}

impl<T: Real> ConditionVector<T> {
    pub fn zeros(dim: usize) -> Self {
        Self {
            values: vec![T::zero(); dim],
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn flag(&self) -> bool {
        self.values.last().is_some_and(|&v| v == T::one())
    }
}

/// `Concat(z, 1)` when the flag is set, `0^(D+1)` otherwise.
pub fn make_condition<T: Real>(z: &SpeakerEmbedding<T>, q: bool) -> ConditionVector<T> {
    if q {
        let mut values = Vec::with_capacity(z.dim() + 1);
        values.extend_from_slice(z.values());
        values.push(T::one());
        ConditionVector { values }
    } else {
        ConditionVector::zeros(z.dim() + 1)
    }
}

pub fn make_conditions<T: Real>(
    z: &SpeakerEmbedding<T>,
    schedule: &FlagSchedule,
) -> Vec<ConditionVector<T>> {
    // the two possible vectors are built once and cloned
    let on = make_condition(z, true);
    let off = make_condition(z, false);
    schedule
        .q
        .iter()
        .map(|&q| if q { on.clone() } else { off.clone() })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ScheduleKind {
    Personalized,
    NonPersonalized,
    Alternating,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FlagSchedule {
    pub q: Vec<bool>,
}

impl FlagSchedule {
    pub fn constant(n_frames: usize, q: bool) -> Self {
        Self {
            q: vec![q; n_frames],
        }
    }

    pub fn n_frames(&self) -> usize {
        self.q.len()
    }

    pub fn switches(&self) -> usize {
        self.q.windows(2).filter(|w| w[0] != w[1]).count()
    }

    /// Lengths of the constant runs, in order.
    pub fn runs(&self) -> Vec<usize> {
        let mut runs = Vec::new();
        let mut len = 0;
        for (i, &q) in self.q.iter().enumerate() {
            if i > 0 && q != self.q[i - 1] {
                runs.push(len);
                len = 0;
            }
            len += 1;
        }
        if len > 0 {
            runs.push(len);
        }
        runs
    }

    pub fn kind(&self) -> ScheduleKind {
        match (self.switches(), self.q.first()) {
            (0, Some(true)) => ScheduleKind::Personalized,
            (0, _) => ScheduleKind::NonPersonalized,
            _ => ScheduleKind::Alternating,
        }
    }

    /// Training-time constraints: at most two switches, every run at least `min_run` frames.
    pub fn satisfies_training_constraints(&self, min_run: usize) -> bool {
        self.switches() <= 2 && self.runs().iter().all(|&r| r >= min_run)
    }

    pub fn personalized_fraction(&self) -> f64 {
        if self.q.is_empty() {
            return 0.0;
        }
        self.q.iter().filter(|&&q| q).count() as f64 / self.q.len() as f64
    }

    /// Parses the `start_frame<TAB>q` schedule format and expands it to
    /// `n_frames`. Returns the schedule and whether entries past the end were
    /// dropped.
    pub fn parse(text: &str, n_frames: usize) -> Result<(Self, bool)> {
        let mut entries: Vec<(usize, bool)> = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim_end_matches('\r');
            if line.trim().is_empty() {
                continue;
            }
            let bad = |why: &str| Error::contract(format!("schedule line {}: {why}", lineno + 1));
            let (start, q) = line.split_once('\t').ok_or_else(|| bad("expected start<TAB>q"))?;
            let start: usize = start.trim().parse().map_err(|_| bad("bad start frame"))?;
            let q = match q.trim() {
                "0" => false,
                "1" => true,
                _ => return Err(bad("q must be 0 or 1")),
            };
            if entries.is_empty() && start != 0 {
                return Err(bad("first entry must start at frame 0"));
            }
            if let Some(&(prev, _)) = entries.last() {
                if start <= prev {
                    return Err(bad("start frames must increase"));
                }
            }
            entries.push((start, q));
        }
        if entries.is_empty() {
            return Err(Error::contract("schedule file is empty"));
        }
        let truncated = entries.iter().any(|&(s, _)| s >= n_frames && n_frames > 0);
        let mut q = vec![false; n_frames];
        for (i, &(start, flag)) in entries.iter().enumerate() {
            let end = entries.get(i + 1).map_or(n_frames, |e| e.0).min(n_frames);
            for v in q.iter_mut().take(end).skip(start.min(n_frames)) {
                *v = flag;
            }
        }
        Ok((Self { q }, truncated))
    }

    pub fn read(path: impl AsRef<Path>, n_frames: usize) -> Result<(Self, bool)> {
        Self::parse(&std::fs::read_to_string(path)?, n_frames)
    }

    /// Run-length encoding in the schedule file format.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (i, &q) in self.q.iter().enumerate() {
            if i == 0 || q != self.q[i - 1] {
                out.push_str(&format!("{i}\t{}\n", q as u8));
            }
        }
        out
    }
}

/// Draws a training schedule: all-on, all-off or alternating (one or two
/// switches) with equal probability. Runs never drop below `min_run`; when no
/// switch fits, the alternating draw falls back to a constant schedule.
pub fn sample_schedule(n_frames: usize, min_run: usize, seed: u64) -> Result<FlagSchedule> {
    if min_run == 0 || n_frames < min_run {
        return Err(Error::contract(format!(
            "n_frames {n_frames} shorter than min_run {min_run}"
        )));
    }
    let mut rng = rng::stream(seed, "flag-schedule");
    let option = rng.random_range(0..3u32);
    let max_switches = match n_frames / min_run {
        0 | 1 => 0,
        2 => 1,
        _ => 2,
    };
    if option < 2 || max_switches == 0 {
        let q = if option < 2 { option == 0 } else { rng.random::<bool>() };
        return Ok(FlagSchedule::constant(n_frames, q));
    }
    let switches = if max_switches == 2 {
        rng.random_range(1..=2usize)
    } else {
        1
    };
    let first = rng.random::<bool>();
    // Uniform over run-length compositions: place `switches` bars among
    // `slack + switches` slots (stars and bars).
    let slack = n_frames - (switches + 1) * min_run;
    let mut bars = rand::seq::index::sample(&mut rng, slack + switches, switches).into_vec();
    bars.sort_unstable();
    let mut runs = Vec::with_capacity(switches + 1);
    let mut prev = 0usize;
    for (i, &b) in bars.iter().enumerate() {
        // stars before this bar = b - i
        let stars = b - i;
        runs.push(min_run + stars - prev);
        prev = stars;
    }
    runs.push(min_run + slack - prev);
    let mut q = Vec::with_capacity(n_frames);
    let mut v = first;
    for r in runs {
        q.extend(std::iter::repeat_n(v, r));
        v = !v;
    }
    Ok(FlagSchedule { q })
}

/// Frame `t` takes the personalized target iff `q_t = 1`.
pub fn select_targets<X: Clone>(
    personalized: &[X],
    non_personalized: &[X],
    schedule: &FlagSchedule,
) -> Result<Vec<X>> {
    if personalized.len() != non_personalized.len() || personalized.len() != schedule.n_frames() {
        return Err(Error::contract(format!(
            "select_targets: {} personalized, {} non-personalized, {} flags",
            personalized.len(),
            non_personalized.len(),
            schedule.n_frames()
        )));
    }
    Ok(schedule
        .q
        .iter()
        .zip(personalized.iter().zip(non_personalized))
        .map(|(&q, (p, n))| if q { p.clone() } else { n.clone() })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn condition_branches() {
        let z = SpeakerEmbedding::new(vec![0.6, 0.8]).unwrap();
        assert_eq!(make_condition(&z, false).values, vec![0.0, 0.0, 0.0]);
        assert_eq!(make_condition(&z, true).values, vec![0.6, 0.8, 1.0]);
        let on = make_condition(&z, true);
        let off = make_condition(&z, false);
        for i in 0..3 {
            assert_ne!(on.values[i], off.values[i]);
        }
    }

    #[test]
    fn schedule_at_min_run_never_switches() {
        for seed in 0..300 {
            let s = sample_schedule(200, 200, seed).unwrap();
            assert_eq!(s.switches(), 0);
            assert_eq!(s.n_frames(), 200);
        }
        assert!(sample_schedule(199, 200, 0).is_err());
    }

    #[test]
    fn schedules_respect_run_lengths() {
        for seed in 0..2000 {
            let s = sample_schedule(2000, 200, seed).unwrap();
            assert!(s.satisfies_training_constraints(200), "seed {seed}: {:?}", s.runs());
            assert_eq!(s.runs().iter().sum::<usize>(), 2000);
        }
        // short sequences only fit one switch
        for seed in 0..500 {
            let s = sample_schedule(500, 200, seed).unwrap();
            assert!(s.switches() <= 1 && s.satisfies_training_constraints(200));
        }
    }

    #[test]
    fn sampler_is_seed_deterministic() {
        assert_eq!(sample_schedule(2000, 200, 42).unwrap(), sample_schedule(2000, 200, 42).unwrap());
    }

    #[test]
    fn two_switch_layout_is_value_flip_value() {
        let s = (0..200)
            .map(|seed| sample_schedule(2000, 200, seed).unwrap())
            .find(|s| s.switches() == 2)
            .expect("some two-switch draw");
        let runs = s.runs();
        assert_eq!(runs.len(), 3);
        assert_eq!(s.q[0], s.q[1999]);
    }

    #[test]
    fn target_selection() {
        let p: Vec<u32> = (0..1000).collect();
        let n: Vec<u32> = (0..1000).map(|v| v + 10_000).collect();
        let all_on = FlagSchedule::constant(1000, true);
        assert_eq!(select_targets(&p, &n, &all_on).unwrap(), p);
        assert_eq!(select_targets(&p, &n, &FlagSchedule::constant(1000, false)).unwrap(), n);
        let mut s = FlagSchedule::constant(1000, true);
        s.q[500..].iter_mut().for_each(|q| *q = false);
        let out = select_targets(&p, &n, &s).unwrap();
        assert_eq!(out[499], 499);
        assert_eq!(out[500], 10_500);
        assert!(select_targets(&p[..10], &n, &s).is_err());
    }

    #[test]
    fn selection_is_frame_local() {
        let p: Vec<u32> = (0..50).collect();
        let n: Vec<u32> = (100..150).collect();
        let base = FlagSchedule::constant(50, false);
        let a = select_targets(&p, &n, &base).unwrap();
        for t in 0..50 {
            let mut s = base.clone();
            s.q[t] = true;
            let b = select_targets(&p, &n, &s).unwrap();
            for i in 0..50 {
                assert_eq!(a[i] == b[i], i != t);
            }
        }
    }

    #[test]
    fn schedule_file_format() {
        let (s, trunc) = FlagSchedule::parse("0\t0\n500\t1\n", 1000).unwrap();
        assert!(!trunc);
        assert!(!s.q[499] && s.q[500] && s.q[999]);
        assert_eq!(s.to_text(), "0\t0\n500\t1\n");
        let (s, trunc) = FlagSchedule::parse("0\t1\n1200\t0\n", 1000).unwrap();
        assert!(trunc);
        assert!(s.q.iter().all(|&q| q));
        assert!(FlagSchedule::parse("10\t1\n", 100).is_err());
        assert!(FlagSchedule::parse("0\t2\n", 100).is_err());
        assert!(FlagSchedule::parse("0\t1\n0\t0\n", 100).is_err());
        assert!(FlagSchedule::parse("", 100).is_err());
    }
}
