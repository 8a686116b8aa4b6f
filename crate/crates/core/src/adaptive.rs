//! Adaptive noise cancellation.
//!
//! A transversal filter `w` predicts the noise in the primary channel `d(n)`
//! from a reference `x(n)`; the residual `e(n) = d(n) - y(n)` is the speech
//! estimate. Every optimizer shares the output/error computation and differs
//! only in the weight update:
//!
//! ```text
//! LMS    w <- w + mu e x
//! NLMS   w <- w + alpha / (c + |x|^2) e x
//! RLS    K = P x / (gamma + x' P x);  w <- w + K e;  P <- (P - K x' P) / gamma,  P(0) = I / c
//! AFA    w <- (1/n) sum_k w_k + 1/(n gamma) sum_k e_k x_k
//! ANLMS  w <- (1/n) sum_k w_k + 1/(n gamma) sum_k mu / (c + |x_k|^2) e_k x_k
//! ```
//!
//! The averaged rules keep running sums, so each step is O(order).

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scalar::{dot, energy, Real};
use crate::signal::AudioBuffer;
use crate::vad::VadDecision;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    Lms,
    Nlms,
    Rls,
    Afa,
    Anlms,
}

impl Algorithm {
    pub const ALL: [Algorithm; 5] = [
        Algorithm::Lms,
        Algorithm::Nlms,
        Algorithm::Rls,
        Algorithm::Afa,
        Algorithm::Anlms,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Algorithm::Lms => "lms",
            Algorithm::Nlms => "nlms",
            Algorithm::Rls => "rls",
            Algorithm::Afa => "afa",
            Algorithm::Anlms => "anlms",
        }
    }
}

impl std::fmt::Display for Algorithm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Algorithm {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Algorithm::ALL
            .into_iter()
            .find(|a| a.as_str() == s.to_ascii_lowercase())
            .ok_or_else(|| format!("unknown adaptive algorithm `{s}` (expected lms|nlms|rls|afa|anlms)"))
    }
}

/// Weight-update parameters. Fields an algorithm does not use are ignored.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptimizerParams {
    pub algorithm: Algorithm,
    /// Number of taps.
    pub order: usize,
    /// Step size (LMS, ANLMS).
    pub mu: f64,
    /// Normalized step size (NLMS).
    pub alpha: f64,
    /// Regularizer (NLMS, ANLMS) or inverse initial scale of `P` (RLS).
    pub c: f64,
    /// Forgetting factor (RLS) or averaging constant (AFA, ANLMS).
    pub gamma: f64,
}

impl OptimizerParams {
    /// Published settings for each rule. ANLMS has no published step size; it
    /// borrows the LMS/NLMS value of 0.09.
    pub fn defaults(algorithm: Algorithm) -> Self {
        let base = Self {
            algorithm,
            order: 1,
            mu: 0.09,
            alpha: 0.09,
            c: 0.01,
            gamma: 1.0,
        };
        match algorithm {
            Algorithm::Lms => Self { order: 46, ..base },
            Algorithm::Nlms => Self { order: 70, ..base },
            Algorithm::Rls => Self {
                order: 80,
                c: 0.99,
                gamma: 0.95,
                ..base
            },
            Algorithm::Afa => Self {
                order: 450,
                gamma: 0.5,
                ..base
            },
            Algorithm::Anlms => Self {
                order: 200,
                gamma: 0.05,
                ..base
            },
        }
    }

    pub fn with_order(self, order: usize) -> Self {
        Self { order, ..self }
    }

    pub fn validate(&self) -> Result<(), AdaptiveError> {
        let bad = |what: &str| Err(AdaptiveError::InvalidParams(format!("{}: {what}", self.algorithm)));
        if self.order == 0 {
            return bad("order must be at least 1");
        }
        let positive = |v: f64| v.is_finite() && v > 0.0;
        match self.algorithm {
            Algorithm::Lms if !positive(self.mu) => bad("mu must be positive"),
            Algorithm::Nlms if !(positive(self.alpha) && self.alpha < 2.0) => bad("alpha must lie in (0, 2)"),
            Algorithm::Nlms | Algorithm::Anlms if !(self.c.is_finite() && self.c >= 0.0) => {
                bad("c must be non-negative")
            }
            Algorithm::Anlms if !positive(self.mu) => bad("mu must be positive"),
            Algorithm::Rls if !positive(self.c) => bad("c must be positive"),
            Algorithm::Rls if !(positive(self.gamma) && self.gamma <= 1.0) => bad("gamma must lie in (0, 1]"),
            Algorithm::Afa | Algorithm::Anlms if !positive(self.gamma) => bad("gamma must be positive"),
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Error)]
pub enum AdaptiveError {
    #[error("invalid optimizer parameters: {0}")]
    InvalidParams(String),
    #[error("{algorithm} diverged at step {step}: non-finite weights")]
    Divergence { algorithm: Algorithm, step: u64 },
    #[error("filter state has order {state}, parameters ask for {params}")]
    OrderMismatch { state: usize, params: usize },
    #[error("VAD marked every frame as speech; a noise template needs leading noise-only audio (try a longer lead-in)")]
    NoUnvoicedFrames,
    #[error("reference has {reference} samples at {reference_rate} Hz, primary has {primary} at {primary_rate} Hz")]
    ReferenceMismatch {
        primary: usize,
        primary_rate: u32,
        reference: usize,
        reference_rate: u32,
    },
    #[error("VAD decision does not cover the input signal")]
    VadMismatch,
}

/// One sample through the canceller.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AncIo<T> {
    pub x: T,
    pub d: T,
    pub y: T,
    pub e: T,
}

/// Weights plus optimizer memory.
#[derive(Debug, Clone, PartialEq)]
pub struct AdaptiveFilterState<T> {
    algorithm: Algorithm,
    w: Vec<T>,
    /// Reference history written twice so `hist[head..head + order]` is always
    /// a contiguous most-recent-first window.
    hist: Vec<T>,
    head: usize,
    n: u64,
    /// Row-major `order x order` inverse correlation matrix (RLS only).
    p: Vec<T>,
    w_sum: Vec<T>,
    u_sum: Vec<T>,
    // scratch for P x
    px: Vec<T>,
}

pub fn init_state<T: Real>(params: &OptimizerParams) -> Result<AdaptiveFilterState<T>, AdaptiveError> {
    params.validate()?;
    let order = params.order;
    let zeros = || vec![T::zero(); order];
    let (p, px) = if params.algorithm == Algorithm::Rls {
        let mut p = vec![T::zero(); order * order];
        let diag = T::one() / T::lit(params.c);
        for i in 0..order {
            p[i * order + i] = diag;
        }
        (p, zeros())
    } else {
        (Vec::new(), Vec::new())
    };
    let (w_sum, u_sum) = match params.algorithm {
        Algorithm::Afa | Algorithm::Anlms => (zeros(), zeros()),
        _ => (Vec::new(), Vec::new()),
    };
    Ok(AdaptiveFilterState {
        algorithm: params.algorithm,
        w: zeros(),
        hist: vec![T::zero(); 2 * order],
        head: 0,
        n: 0,
        p,
        w_sum,
        u_sum,
        px,
    })
}

impl<T: Real> AdaptiveFilterState<T> {
    pub fn new(params: &OptimizerParams) -> Result<Self, AdaptiveError> {
        init_state(params)
    }

    pub fn algorithm(&self) -> Algorithm {
        self.algorithm
    }

    pub fn order(&self) -> usize {
        self.w.len()
    }

    pub fn weights(&self) -> &[T] {
        &self.w
    }

    /// Last `order` reference samples, most recent first.
    pub fn x_hist(&self) -> &[T] {
        &self.hist[self.head..self.head + self.w.len()]
    }

    /// Number of updates performed so far.
    pub fn steps(&self) -> u64 {
        self.n
    }

    /// RLS inverse correlation matrix, row-major; empty for other rules.
    pub fn p_matrix(&self) -> &[T] {
        &self.p
    }

    pub fn weight_sum(&self) -> &[T] {
        &self.w_sum
    }

    pub fn update_sum(&self) -> &[T] {
        &self.u_sum
    }

    fn push_reference(&mut self, x: T) {
        let order = self.w.len();
        self.head = if self.head == 0 { order - 1 } else { self.head - 1 };
        self.hist[self.head] = x;
        self.hist[self.head + order] = x;
    }

    /// Shifts `x` into the history, filters, and updates the weights.
    pub fn step(&mut self, params: &OptimizerParams, x: T, d: T) -> Result<AncIo<T>, AdaptiveError> {
        let order = self.w.len();
        if params.order != order || params.algorithm != self.algorithm {
            return Err(AdaptiveError::OrderMismatch {
                state: order,
                params: params.order,
            });
        }
        self.push_reference(x);
        self.n += 1;
        let (head, n) = (self.head, self.n);
        let xh = &self.hist[head..head + order];
        let y = dot(&self.w, xh);
        let e = d - y;

        match params.algorithm {
            Algorithm::Lms => {
                let g = T::lit(params.mu) * e;
                for (w, &xv) in self.w.iter_mut().zip(xh) {
                    *w = *w + g * xv;
                }
            }
            Algorithm::Nlms => {
                let g = T::lit(params.alpha) / (T::lit(params.c) + energy(xh)) * e;
                for (w, &xv) in self.w.iter_mut().zip(xh) {
                    *w = *w + g * xv;
                }
            }
            Algorithm::Rls => {
                // With a silent reference the update is a pure 1/gamma inflation
                // of P, which overflows over long pauses; hold P instead.
                if energy(xh) > T::zero() {
                    let gamma = T::lit(params.gamma);
                    let p = &mut self.p;
                    for (i, px) in self.px.iter_mut().enumerate() {
                        *px = dot(&p[i * order..(i + 1) * order], xh);
                    }
                    let denom = gamma + dot(xh, &self.px);
                    let ge = e / denom;
                    for (w, &pxi) in self.w.iter_mut().zip(&self.px) {
                        *w = *w + pxi * ge;
                    }
                    for i in 0..order {
                        let ki = self.px[i] / denom;
                        for j in i..order {
                            let v = (p[i * order + j] - ki * self.px[j]) / gamma;
                            p[i * order + j] = v;
                            p[j * order + i] = v;
                        }
                    }
                }
            }
            Algorithm::Afa | Algorithm::Anlms => {
                let g = if params.algorithm == Algorithm::Afa {
                    e
                } else {
                    T::lit(params.mu) / (T::lit(params.c) + energy(xh)) * e
                };
                let nf = T::lit(n as f64);
                let inv_n = T::one() / nf;
                let inv_ng = T::one() / (nf * T::lit(params.gamma));
                for (((w, ws), us), &x) in self.w.iter_mut().zip(&mut self.w_sum).zip(&mut self.u_sum).zip(xh) {
                    *ws = *ws + *w;
                    *us = *us + g * x;
                    *w = *ws * inv_n + *us * inv_ng;
                }
            }
        }

        if !e.is_finite() || self.w.iter().any(|w| !w.is_finite()) {
            return Err(AdaptiveError::Divergence {
                algorithm: params.algorithm,
                step: n,
            });
        }
        Ok(AncIo { x, d, y, e })
    }
}

/// Free-function form of [`AdaptiveFilterState::step`].
pub fn filter_step<T: Real>(
    state: &mut AdaptiveFilterState<T>,
    params: &OptimizerParams,
    x: T,
    d: T,
) -> Result<AncIo<T>, AdaptiveError> {
    state.step(params, x, d)
}

/// Where the canceller's reference input comes from.
#[derive(Debug, Clone, Copy)]
pub enum NoiseReference<'a, T> {
    /// A second, noise-only pickup of equal length and rate.
    External(&'a AudioBuffer<T>),
    /// Samples of VAD-unvoiced frames of the noisy input itself, gathered as
    /// each frame completes and replayed circularly.
    VadTemplate(&'a VadDecision),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReferenceMode {
    VadReference,
    ExternalReference,
}

/// Circular replay buffer over the unvoiced parts of the input.
struct NoiseTemplate<'a, T> {
    source: &'a [T],
    vad: &'a VadDecision,
    samples: Vec<T>,
    next_frame: usize,
    appended_to: usize,
    cursor: usize,
}

impl<'a, T: Real> NoiseTemplate<'a, T> {
    fn new(source: &'a [T], vad: &'a VadDecision) -> Self {
        Self {
            source,
            vad,
            samples: Vec::new(),
            next_frame: 0,
            appended_to: 0,
            cursor: 0,
        }
    }

    /// Absorbs every frame that has fully arrived by sample `n`.
    fn absorb(&mut self, n: usize) {
        while self.next_frame < self.vad.len() {
            let k = self.next_frame;
            let (start, end) = self.vad.frame_span(k, self.source.len());
            if end > n + 1 && end < self.source.len() {
                break;
            }
            if end > n + 1 {
                // the final, possibly padded frame completes with the signal
                break;
            }
            if !self.vad.flags[k] {
                let from = start.max(self.appended_to);
                if from < end {
                    self.samples.extend_from_slice(&self.source[from..end]);
                    self.appended_to = end;
                }
            }
            self.next_frame += 1;
        }
    }

    fn next(&mut self) -> T {
        if self.samples.is_empty() {
            return T::zero();
        }
        let v = self.samples[self.cursor % self.samples.len()];
        self.cursor += 1;
        v
    }
}

/// Runs the canceller over `noisy` and returns the error signal `e(n)`.
pub fn denoise_adaptive<T: Real>(
    noisy: &AudioBuffer<T>,
    params: &OptimizerParams,
    reference: NoiseReference<'_, T>,
) -> Result<AudioBuffer<T>, AdaptiveError> {
    let mut state = init_state::<T>(params)?;
    let d = noisy.samples();
    let mut out = Vec::with_capacity(d.len());
    match reference {
        NoiseReference::External(r) => {
            if r.len() != noisy.len() || r.sample_rate() != noisy.sample_rate() {
                return Err(AdaptiveError::ReferenceMismatch {
                    primary: noisy.len(),
                    primary_rate: noisy.sample_rate(),
                    reference: r.len(),
                    reference_rate: r.sample_rate(),
                });
            }
            for (&x, &dn) in r.samples().iter().zip(d) {
                out.push(state.step(params, x, dn)?.e);
            }
        }
        NoiseReference::VadTemplate(vad) => {
            if vad.is_empty() && !d.is_empty() {
                return Err(AdaptiveError::VadMismatch);
            }
            let expected = crate::signal::frame_signal(noisy, vad.frame_len, vad.hop)
                .map(|f| f.len())
                .map_err(|_| AdaptiveError::VadMismatch)?;
            if expected != vad.len() {
                return Err(AdaptiveError::VadMismatch);
            }
            if !d.is_empty() && vad.voiced_count() == vad.len() {
                return Err(AdaptiveError::NoUnvoicedFrames);
            }
            let mut template = NoiseTemplate::new(d, vad);
            for (n, &dn) in d.iter().enumerate() {
                template.absorb(n);
                let x = template.next();
                out.push(state.step(params, x, dn)?.e);
            }
        }
    }
    Ok(AudioBuffer::from_trusted(out, noisy.sample_rate()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn unit(algorithm: Algorithm) -> OptimizerParams {
        OptimizerParams::defaults(algorithm).with_order(1)
    }

    #[test]
    fn default_orders() {
        let orders: Vec<usize> = Algorithm::ALL.iter().map(|&a| OptimizerParams::defaults(a).order).collect();
        assert_eq!(orders, vec![46, 70, 80, 450, 200]);
        let lms = init_state::<f64>(&OptimizerParams::defaults(Algorithm::Lms)).unwrap();
        assert_eq!(lms.weights(), &[0.0; 46][..]);
        let afa = init_state::<f64>(&OptimizerParams::defaults(Algorithm::Afa)).unwrap();
        assert_eq!(afa.weights().len(), 450);
        assert!(afa.weight_sum().iter().chain(afa.update_sum()).all(|&v| v == 0.0));
    }

    #[test]
    fn rls_initial_p() {
        let s = init_state::<f64>(&OptimizerParams::defaults(Algorithm::Rls)).unwrap();
        let p = s.p_matrix();
        assert!((p[0] - 1.01010).abs() < 1e-5);
        assert!((p[81] - 1.0 / 0.99).abs() < 1e-15);
        assert_eq!(p[1], 0.0);
    }

    #[test]
    fn zero_state_passes_desired_through() {
        for a in Algorithm::ALL {
            let params = OptimizerParams::defaults(a);
            let mut s = init_state::<f64>(&params).unwrap();
            let io = s.step(&params, 0.0, 0.7).unwrap();
            assert_eq!(io.y, 0.0);
            assert_eq!(io.e, 0.7);
        }
    }

    #[test]
    fn history_is_most_recent_first() {
        let params = OptimizerParams::defaults(Algorithm::Lms).with_order(3);
        let mut s = init_state::<f64>(&params).unwrap();
        for x in [1.0, 2.0, 3.0, 4.0] {
            s.step(&params, x, 0.0).unwrap();
        }
        assert_eq!(s.x_hist(), &[4.0, 3.0, 2.0]);
        assert_eq!(s.steps(), 4);
    }

    #[test]
    fn lms_one_step() {
        let p = unit(Algorithm::Lms);
        let mut s = init_state::<f64>(&p).unwrap();
        let io = s.step(&p, 1.0, 1.0).unwrap();
        assert_eq!(io.e, 1.0);
        assert!((s.weights()[0] - 0.09).abs() < 1e-15);
    }

    #[test]
    fn nlms_one_step() {
        let p = unit(Algorithm::Nlms);
        let mut s = init_state::<f64>(&p).unwrap();
        s.step(&p, 1.0, 1.0).unwrap();
        assert!((s.weights()[0] - 0.089109).abs() < 1e-6);
    }

    #[test]
    fn rls_one_step() {
        let p = unit(Algorithm::Rls);
        let mut s = init_state::<f64>(&p).unwrap();
        s.step(&p, 1.0, 1.0).unwrap();
        let k = (1.0 / 0.99) / (0.95 + 1.0 / 0.99);
        assert!((s.weights()[0] - k).abs() < 1e-15);
        assert!((k - 0.515331).abs() < 1e-6);
    }

    #[test]
    fn rls_holds_p_on_silent_reference() {
        let p = OptimizerParams::defaults(Algorithm::Rls).with_order(4);
        let mut s = init_state::<f64>(&p).unwrap();
        for _ in 0..100_000 {
            s.step(&p, 0.0, 0.1).unwrap();
        }
        assert!((s.p_matrix()[0] - 1.0 / 0.99).abs() < 1e-15);
    }

    #[test]
    fn mismatched_params_rejected() {
        let p = unit(Algorithm::Lms);
        let mut s = init_state::<f64>(&p).unwrap();
        assert!(matches!(
            s.step(&p.with_order(2), 0.0, 0.0),
            Err(AdaptiveError::OrderMismatch { .. })
        ));
        assert!(matches!(
            init_state::<f64>(&p.with_order(0)),
            Err(AdaptiveError::InvalidParams(_))
        ));
        let mut bad = unit(Algorithm::Rls);
        bad.gamma = 1.5;
        assert!(init_state::<f64>(&bad).is_err());
    }

    #[test]
    fn divergence_reported_with_step() {
        let mut p = unit(Algorithm::Lms);
        p.mu = 10.0;
        let mut s = init_state::<f64>(&p).unwrap();
        let mut err = None;
        for _ in 0..10_000 {
            if let Err(e) = s.step(&p, 1.0, 1.0) {
                err = Some(e);
                break;
            }
        }
        match err {
            Some(AdaptiveError::Divergence { algorithm, step }) => {
                assert_eq!(algorithm, Algorithm::Lms);
                assert!(step > 1);
            }
            other => panic!("expected divergence, got {other:?}"),
        }
    }

    fn vad_with(flags: Vec<bool>, frame_len: usize, hop: usize) -> VadDecision {
        let n = flags.len();
        VadDecision {
            flags,
            threshold_trace: vec![0.0; n],
            feature_trace: vec![0.0; n],
            frame_len,
            hop,
        }
    }

    #[test]
    fn template_collects_unvoiced_samples_once() {
        let src: Vec<f64> = (0..12).map(|i| i as f64).collect();
        // frames of 4 with hop 2: starts 0,2,4,6,8
        let vad = vad_with(vec![false, false, true, true, false], 4, 2);
        let mut t = NoiseTemplate::new(&src, &vad);
        t.absorb(2);
        assert!(t.samples.is_empty());
        t.absorb(3);
        assert_eq!(t.samples, vec![0.0, 1.0, 2.0, 3.0]);
        t.absorb(5);
        assert_eq!(t.samples, vec![0.0, 1.0, 2.0, 3.0, 4.0, 5.0]);
        t.absorb(11);
        assert_eq!(t.samples, vec![0.0, 1.0, 2.0, 3.0, 4.0, 5.0, 8.0, 9.0, 10.0, 11.0]);
        assert_eq!(t.next(), 0.0);
        assert_eq!(t.next(), 1.0);
    }

    #[test]
    fn all_zero_input_gives_zero_output() {
        let noisy = AudioBuffer::new(vec![0.0f64; 4000], 8000).unwrap();
        let vad = crate::vad::detect(&noisy, &crate::vad::VadParams::default()).unwrap();
        for a in Algorithm::ALL {
            let y = denoise_adaptive(&noisy, &OptimizerParams::defaults(a), NoiseReference::VadTemplate(&vad)).unwrap();
            assert!(y.samples().iter().all(|&v| v == 0.0), "{a}");
        }
    }

    #[test]
    fn all_voiced_vad_is_an_error() {
        let noisy = AudioBuffer::new(vec![0.1f64; 400], 8000).unwrap();
        let vad = vad_with(vec![true; 4], 160, 80);
        assert!(matches!(
            denoise_adaptive(&noisy, &unit(Algorithm::Nlms), NoiseReference::VadTemplate(&vad)),
            Err(AdaptiveError::NoUnvoicedFrames)
        ));
    }

    #[test]
    fn reference_must_match() {
        let noisy = AudioBuffer::new(vec![0.1f64; 400], 8000).unwrap();
        let r = AudioBuffer::new(vec![0.1f64; 399], 8000).unwrap();
        assert!(matches!(
            denoise_adaptive(&noisy, &unit(Algorithm::Nlms), NoiseReference::External(&r)),
            Err(AdaptiveError::ReferenceMismatch { .. })
        ));
    }

    #[test]
    fn identical_runs_are_bit_identical() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let x: Vec<f64> = (0..4000).map(|_| rng.random_range(-0.3..0.3)).collect();
        let d: Vec<f64> = x.iter().map(|v| 0.5 * v + 0.01).collect();
        let r = AudioBuffer::new(x, 8000).unwrap();
        let noisy = AudioBuffer::new(d, 8000).unwrap();
        for a in Algorithm::ALL {
            let p = OptimizerParams::defaults(a);
            let y1 = denoise_adaptive(&noisy, &p, NoiseReference::External(&r)).unwrap();
            let y2 = denoise_adaptive(&noisy, &p, NoiseReference::External(&r)).unwrap();
            assert_eq!(y1, y2);
        }
    }
}
