//! Forward-backward MAP decoder over the channel drift.
//!
//! The transition metric is
//! `gamma_i(m', m, D) = P(D_i = D) * R(Y[n i + m' .. n (i+1) + m] | C_i(D))`,
//! the forward/backward metrics are the usual recursions
//! `alpha_i(m) = sum_{m', D} alpha_{i-1}(m') gamma_{i-1}(m', m, D)` and its
//! mirror, each row renormalized as it is computed, and the posterior is
//! `L_i(D) ∝ sum_{m', m} alpha_i(m') gamma_i(m', m, D) beta_{i+1}(m)`,
//! renormalized per row.
//!
//! Two storage schedules are provided.  *Global* materializes every gamma
//! slab before the forward/backward passes (which are independent and may
//! run concurrently).  *Local* recomputes gamma per index, holding only a
//! ring of `S` slabs: a forward pass folds gamma into alpha, then a
//! backward pass recomputes gamma, folds it into beta and emits the
//! posterior row in the same sweep.  All schedules and engines accumulate
//! in a fixed order and are bitwise identical.

use std::time::{Duration, Instant};

use rayon::prelude::*;

use crate::bits::Bit;
use crate::channel::{ChannelParams, DriftBounds, StateSpace};
use crate::codebook::Codebook;
use crate::lattice::lattice_batch;
use crate::numeric::{pairwise_sum, Precision, Real};
use crate::{Error, Result};

const PRIOR_ROW_TOL: f64 = 1e-9;
const BOUNDARY_ROW_TOL: f64 = 1e-12;

/// Per-symbol prior probabilities `P(D_i = D)`, an `N x q` table.
#[derive(Debug, Clone)]
pub struct Priors {
    msg_len: usize,
    alphabet: usize,
    probs: Vec<f64>,
}

impl Priors {
    pub fn uniform(msg_len: usize, alphabet: usize) -> Self {
        Self { msg_len, alphabet, probs: vec![1.0 / alphabet as f64; msg_len * alphabet] }
    }

    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let msg_len = rows.len();
        let alphabet = rows.first().map_or(0, Vec::len);
        let mut probs = Vec::with_capacity(msg_len * alphabet);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != alphabet {
                return Err(Error::DimensionMismatch(format!("prior row {i} has {} entries, expected {alphabet}", row.len())));
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > PRIOR_ROW_TOL || row.iter().any(|&p| p < 0.0) {
                return Err(Error::InvalidParams(format!("prior row {i} is not a distribution (sum {sum})")));
            }
            probs.extend_from_slice(row);
        }
        Ok(Self { msg_len, alphabet, probs })
    }

    pub fn msg_len(&self) -> usize {
        self.msg_len
    }
    pub fn alphabet(&self) -> usize {
        self.alphabet
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.probs[i * self.alphabet..(i + 1) * self.alphabet]
    }

    pub fn get(&self, i: usize, d: usize) -> f64 {
        self.probs[i * self.alphabet + d]
    }
}

/// Prior distributions of the frame-boundary drifts, `alpha_0` and `beta_N`.
#[derive(Debug, Clone)]
pub struct BoundaryPriors {
    alpha0: Vec<f64>,
    beta_end: Vec<f64>,
}

impl BoundaryPriors {
    /// Default policy: point mass at drift 0 for the start, point mass at
    /// the observed end drift `rho - tau` for the end.
    pub fn point_mass(rho: usize, tau: usize, frame: DriftBounds) -> Result<Self> {
        let end_drift = rho as i64 - tau as i64;
        if !frame.contains(end_drift) {
            return Err(Error::DriftOutOfRange { drift: end_drift, lo: frame.m_minus(), hi: frame.m_plus() });
        }
        let mut alpha0 = vec![0.0; frame.size()];
        let mut beta_end = vec![0.0; frame.size()];
        alpha0[frame.index_of(0)] = 1.0;
        beta_end[frame.index_of(end_drift)] = 1.0;
        Ok(Self { alpha0, beta_end })
    }

    /// Caller-supplied boundary distributions over the frame state space.
    pub fn custom(alpha0: Vec<f64>, beta_end: Vec<f64>, frame: DriftBounds) -> Result<Self> {
        for (name, row) in [("alpha0", &alpha0), ("betaN", &beta_end)] {
            if row.len() != frame.size() {
                return Err(Error::DimensionMismatch(format!("{name} has {} entries, expected M_tau = {}", row.len(), frame.size())));
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > BOUNDARY_ROW_TOL || row.iter().any(|&p| p < 0.0) {
                return Err(Error::InvalidParams(format!("{name} is not a distribution (sum {sum})")));
            }
        }
        Ok(Self { alpha0, beta_end })
    }

    pub fn alpha0(&self) -> &[f64] {
        &self.alpha0
    }
    pub fn beta_end(&self) -> &[f64] {
        &self.beta_end
    }
}

/// Convenience wrapper matching the default boundary policy.
pub fn boundary_priors(rho: usize, tau: usize, frame: DriftBounds) -> Result<BoundaryPriors> {
    BoundaryPriors::point_mass(rho, tau, frame)
}

/// Transition metrics for one frame index: `M_tau x M_n x q`, symbol
/// index innermost, drift change next, initial drift outermost.
#[derive(Debug, Clone)]
pub struct GammaSlab {
    m_tau: usize,
    m_n: usize,
    alphabet: usize,
    data: Vec<f64>,
}

impl GammaSlab {
    fn zeros(m_tau: usize, m_n: usize, alphabet: usize) -> Self {
        Self { m_tau, m_n, alphabet, data: vec![0.0; m_tau * m_n * alphabet] }
    }

    #[inline]
    pub fn get(&self, from_idx: usize, change_idx: usize, symbol: usize) -> f64 {
        self.data[(from_idx * self.m_n + change_idx) * self.alphabet + symbol]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    /// `(M_tau, M_n, q)` shape.
    pub fn dims(&self) -> (usize, usize, usize) {
        (self.m_tau, self.m_n, self.alphabet)
    }

    pub fn bytes(&self) -> usize {
        self.data.len() * std::mem::size_of::<f64>()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum StorageMode {
    Global,
    Local,
}

impl std::str::FromStr for StorageMode {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "global" => Ok(StorageMode::Global),
            "local" => Ok(StorageMode::Local),
            other => Err(format!("unknown storage mode {other:?}")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Engine {
    Serial,
    Parallel { workers: usize },
}

/// Knobs for one decode call.
#[derive(Debug, Clone, Copy)]
pub struct DecodeOptions {
    pub storage: StorageMode,
    pub engine: Engine,
    /// Row-normalize alpha/beta as they are computed.  Disabling is a
    /// diagnostic mode for small instances (lambda-constancy checks).
    pub normalize: bool,
    /// Restrict lattice passes to the drift corridor.
    pub banded: bool,
    pub lattice_precision: Precision,
    /// Accumulation width for alpha/beta/L.
    pub fba_precision: Precision,
    /// Ring size `S` for local storage.
    pub pipeline_depth: usize,
}

impl Default for DecodeOptions {
    fn default() -> Self {
        Self {
            storage: StorageMode::Global,
            engine: Engine::Serial,
            normalize: true,
            banded: true,
            lattice_precision: Precision::Single,
            fba_precision: Precision::Double,
            pipeline_depth: 4,
        }
    }
}

/// Alpha/beta rows and whatever gamma slabs the schedule retained.
#[derive(Debug)]
pub struct MetricStore {
    pub mode: StorageMode,
    /// Global: all `N` slabs in index order.  Local: the final ring
    /// contents (at most `S` slabs).
    pub gamma: Vec<GammaSlab>,
    /// `(N + 1) x M_tau`, row-major.
    pub alpha: Vec<f64>,
    pub beta: Vec<f64>,
    m_tau: usize,
}

impl MetricStore {
    pub fn alpha_row(&self, i: usize) -> &[f64] {
        &self.alpha[i * self.m_tau..(i + 1) * self.m_tau]
    }
    pub fn beta_row(&self, i: usize) -> &[f64] {
        &self.beta[i * self.m_tau..(i + 1) * self.m_tau]
    }
    pub fn gamma_bytes(&self) -> usize {
        self.gamma.iter().map(GammaSlab::bytes).sum()
    }
}

/// Posterior symbol probabilities `L_i(D)`, each row summing to 1.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct Posteriors {
    msg_len: usize,
    alphabet: usize,
    l: Vec<f64>,
}

impl Posteriors {
    pub fn msg_len(&self) -> usize {
        self.msg_len
    }
    pub fn alphabet(&self) -> usize {
        self.alphabet
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.l[i * self.alphabet..(i + 1) * self.alphabet]
    }

    /// Hard decision: most likely symbol per position.
    pub fn argmax(&self, i: usize) -> usize {
        let row = self.row(i);
        let mut best = 0;
        for d in 1..row.len() {
            if row[d] > row[best] {
                best = d;
            }
        }
        best
    }

    pub fn decide(&self) -> Vec<usize> {
        (0..self.msg_len).map(|i| self.argmax(i)).collect()
    }

    pub(crate) fn from_rows(msg_len: usize, alphabet: usize, l: Vec<f64>) -> Self {
        Self { msg_len, alphabet, l }
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct PhaseTimings {
    pub gamma: Duration,
    pub alpha_beta: Duration,
    pub posterior: Duration,
    pub total: Duration,
}

#[derive(Debug)]
pub struct DecodeOutput {
    pub posteriors: Posteriors,
    pub store: MetricStore,
    pub timings: PhaseTimings,
}

/// Transition metric slab for frame index `i`.
///
/// One banded lattice pass per `(m', D)` covers every drift change `m - m'`
/// at once; entries outside the combined frame/symbol bounds, or whose
/// received window is unavailable, are 0.
pub fn compute_gamma_index(
    i: usize,
    received: &[Bit],
    cb: &Codebook,
    priors: &Priors,
    space: &StateSpace,
    params: &ChannelParams,
    banded: bool,
    precision: Precision,
) -> GammaSlab {
    let m_tau = space.frame.size();
    let m_n = space.symbol.size();
    let q = cb.alphabet();
    let mut slab = GammaSlab::zeros(m_tau, m_n, q);
    let row_len = m_n * q;
    let rows: Vec<&mut [f64]> = slab.data.chunks_mut(row_len).collect();
    for (mi, row) in rows.into_iter().enumerate() {
        gamma_row(i, mi, row, received, cb, priors, space, params, banded, precision);
    }
    slab
}

/// Parallel variant: rows (initial drifts) computed by the worker pool.
/// Entries are written to disjoint slots, so the result is bitwise equal
/// to the serial variant.
pub fn compute_gamma_index_par(
    i: usize,
    received: &[Bit],
    cb: &Codebook,
    priors: &Priors,
    space: &StateSpace,
    params: &ChannelParams,
    banded: bool,
    precision: Precision,
) -> GammaSlab {
    let m_tau = space.frame.size();
    let m_n = space.symbol.size();
    let q = cb.alphabet();
    let mut slab = GammaSlab::zeros(m_tau, m_n, q);
    slab.data.par_chunks_mut(m_n * q).enumerate().for_each(|(mi, row)| {
        gamma_row(i, mi, row, received, cb, priors, space, params, banded, precision);
    });
    slab
}

#[allow(clippy::too_many_arguments)]
fn gamma_row(
    i: usize,
    from_idx: usize,
    row: &mut [f64],
    received: &[Bit],
    cb: &Codebook,
    priors: &Priors,
    space: &StateSpace,
    params: &ChannelParams,
    banded: bool,
    precision: Precision,
) {
    let n = cb.word_len();
    let q = cb.alphabet();
    let rho = received.len() as i64;
    let from_drift = space.frame.drift_at(from_idx);
    let start = (n * i) as i64 + from_drift;
    if start < 0 || start > rho {
        return; // state unreachable at this index; row stays 0
    }
    let end = (start + n as i64 + space.symbol.m_plus()).min(rho);
    let window = &received[start as usize..end.max(start) as usize];
    for d in 0..q {
        let x = cb.word_bits(i, d);
        let batch = lattice_batch(&x, window, space.symbol, params, banded, precision)
            .expect("window bounded by n + m_plus by construction");
        let prior = priors.get(i, d);
        for (di, change) in space.symbol.iter().enumerate() {
            let to_drift = from_drift + change;
            if space.frame.contains(to_drift) {
                row[di * q + d] = prior * batch.value(change);
            }
        }
    }
}

// Fixed-order accumulation helpers.  Terms are gathered in ascending
// (m', D) order (alpha/beta) or ascending (m', m) order (L) and reduced
// by a fixed-shape pairwise tree in the accumulation precision.

fn alpha_entry<T: Real>(to_idx: usize, prev: &[f64], gamma: &GammaSlab, space: &StateSpace) -> f64 {
    let q = gamma.alphabet;
    let to_drift = space.frame.drift_at(to_idx);
    let mut terms: Vec<T> = Vec::with_capacity(space.symbol.size() * q);
    for (mi, from_drift) in space.frame.iter().enumerate() {
        let change = to_drift - from_drift;
        if !space.symbol.contains(change) {
            continue;
        }
        let di = space.symbol.index_of(change);
        let a = T::from_f64(prev[mi]);
        for d in 0..q {
            terms.push(a * T::from_f64(gamma.get(mi, di, d)));
        }
    }
    pairwise_sum(&terms).to_f64()
}

fn beta_entry<T: Real>(at_idx: usize, next: &[f64], gamma: &GammaSlab, space: &StateSpace) -> f64 {
    let q = gamma.alphabet;
    let at_drift = space.frame.drift_at(at_idx);
    let mut terms: Vec<T> = Vec::with_capacity(space.symbol.size() * q);
    for (mi, to_drift) in space.frame.iter().enumerate() {
        let change = to_drift - at_drift;
        if !space.symbol.contains(change) {
            continue;
        }
        let di = space.symbol.index_of(change);
        let b = T::from_f64(next[mi]);
        for d in 0..q {
            terms.push(b * T::from_f64(gamma.get(at_idx, di, d)));
        }
    }
    pairwise_sum(&terms).to_f64()
}

fn posterior_entry<T: Real>(d: usize, alpha_i: &[f64], beta_next: &[f64], gamma: &GammaSlab, space: &StateSpace) -> f64 {
    let mut terms: Vec<T> = Vec::with_capacity(space.frame.size() * space.symbol.size());
    for (mi, from_drift) in space.frame.iter().enumerate() {
        let a = T::from_f64(alpha_i[mi]);
        for (di, change) in space.symbol.iter().enumerate() {
            let to_drift = from_drift + change;
            if !space.frame.contains(to_drift) {
                continue;
            }
            let ti = space.frame.index_of(to_drift);
            terms.push(a * T::from_f64(gamma.get(mi, di, d)) * T::from_f64(beta_next[ti]));
        }
    }
    pairwise_sum(&terms).to_f64()
}

/// Row-normalize in precision `T`; an all-zero row is an underflow error.
fn normalize_row<T: Real>(row: &mut [f64], index: usize, apply: bool) -> Result<()> {
    let terms: Vec<T> = row.iter().map(|&v| T::from_f64(v)).collect();
    let sum = pairwise_sum(&terms);
    if !(sum.to_f64() > 0.0) {
        return Err(Error::DecoderUnderflow(index));
    }
    if apply {
        for (slot, t) in row.iter_mut().zip(terms) {
            *slot = (t / sum).to_f64();
        }
    }
    Ok(())
}

struct Ctx<'a> {
    received: &'a [Bit],
    cb: &'a Codebook,
    priors: &'a Priors,
    boundary: &'a BoundaryPriors,
    space: &'a StateSpace,
    params: &'a ChannelParams,
    opts: DecodeOptions,
}

impl<'a> Ctx<'a> {
    fn gamma(&self, i: usize, parallel: bool) -> GammaSlab {
        if parallel {
            compute_gamma_index_par(i, self.received, self.cb, self.priors, self.space, self.params, self.opts.banded, self.opts.lattice_precision)
        } else {
            compute_gamma_index(i, self.received, self.cb, self.priors, self.space, self.params, self.opts.banded, self.opts.lattice_precision)
        }
    }

    fn alpha_row<T: Real>(&self, prev: &[f64], gamma: &GammaSlab, parallel: bool) -> Vec<f64> {
        let m_tau = self.space.frame.size();
        if parallel {
            (0..m_tau).into_par_iter().map(|m| alpha_entry::<T>(m, prev, gamma, self.space)).collect()
        } else {
            (0..m_tau).map(|m| alpha_entry::<T>(m, prev, gamma, self.space)).collect()
        }
    }

    fn beta_row<T: Real>(&self, next: &[f64], gamma: &GammaSlab, parallel: bool) -> Vec<f64> {
        let m_tau = self.space.frame.size();
        if parallel {
            (0..m_tau).into_par_iter().map(|m| beta_entry::<T>(m, next, gamma, self.space)).collect()
        } else {
            (0..m_tau).map(|m| beta_entry::<T>(m, next, gamma, self.space)).collect()
        }
    }

    fn posterior_row<T: Real>(&self, alpha_i: &[f64], beta_next: &[f64], gamma: &GammaSlab, parallel: bool) -> Result<Vec<f64>> {
        let q = self.cb.alphabet();
        let mut row: Vec<f64> = if parallel {
            (0..q).into_par_iter().map(|d| posterior_entry::<T>(d, alpha_i, beta_next, gamma, self.space)).collect()
        } else {
            (0..q).map(|d| posterior_entry::<T>(d, alpha_i, beta_next, gamma, self.space)).collect()
        };
        // L rows are always renormalized; this plays the role of the
        // global 1/lambda constant in the unnormalized recursion.
        normalize_row::<T>(&mut row, usize::MAX, true)?;
        Ok(row)
    }
}

fn run<T: Real>(ctx: &Ctx) -> Result<DecodeOutput> {
    let parallel = matches!(ctx.opts.engine, Engine::Parallel { .. });
    match ctx.opts.storage {
        StorageMode::Global => run_global::<T>(ctx, parallel),
        StorageMode::Local => run_local::<T>(ctx, parallel),
    }
}

fn run_global<T: Real>(ctx: &Ctx, parallel: bool) -> Result<DecodeOutput> {
    let n_sym = ctx.cb.msg_len();
    let m_tau = ctx.space.frame.size();
    let q = ctx.cb.alphabet();
    let t0 = Instant::now();

    let gammas: Vec<GammaSlab> = if parallel {
        (0..n_sym).into_par_iter().map(|i| ctx.gamma(i, false)).collect()
    } else {
        (0..n_sym).map(|i| ctx.gamma(i, false)).collect()
    };
    let t_gamma = t0.elapsed();

    let t1 = Instant::now();
    let forward = || -> Result<Vec<f64>> {
        let mut alpha = vec![0.0; (n_sym + 1) * m_tau];
        alpha[..m_tau].copy_from_slice(ctx.boundary.alpha0());
        for i in 1..=n_sym {
            let prev = alpha[(i - 1) * m_tau..i * m_tau].to_vec();
            let mut row = ctx.alpha_row::<T>(&prev, &gammas[i - 1], parallel);
            normalize_row::<T>(&mut row, i, ctx.opts.normalize)?;
            alpha[i * m_tau..(i + 1) * m_tau].copy_from_slice(&row);
        }
        Ok(alpha)
    };
    let backward = || -> Result<Vec<f64>> {
        let mut beta = vec![0.0; (n_sym + 1) * m_tau];
        beta[n_sym * m_tau..].copy_from_slice(ctx.boundary.beta_end());
        for i in (0..n_sym).rev() {
            let next = beta[(i + 1) * m_tau..(i + 2) * m_tau].to_vec();
            let mut row = ctx.beta_row::<T>(&next, &gammas[i], parallel);
            normalize_row::<T>(&mut row, i, ctx.opts.normalize)?;
            beta[i * m_tau..(i + 1) * m_tau].copy_from_slice(&row);
        }
        Ok(beta)
    };
    // Forward and backward chains are independent; run them concurrently
    // on the parallel engine.
    let (alpha, beta) = if parallel {
        let (a, b) = rayon::join(forward, backward);
        (a?, b?)
    } else {
        (forward()?, backward()?)
    };
    let t_ab = t1.elapsed();

    let t2 = Instant::now();
    let store = MetricStore { mode: StorageMode::Global, gamma: gammas, alpha, beta, m_tau };
    let rows: Vec<Vec<f64>> = if parallel {
        (0..n_sym)
            .into_par_iter()
            .map(|i| ctx.posterior_row::<T>(store.alpha_row(i), store.beta_row(i + 1), &store.gamma[i], false))
            .collect::<Result<_>>()?
    } else {
        (0..n_sym)
            .map(|i| ctx.posterior_row::<T>(store.alpha_row(i), store.beta_row(i + 1), &store.gamma[i], false))
            .collect::<Result<_>>()?
    };
    let l: Vec<f64> = rows.into_iter().flatten().collect();
    let t_l = t2.elapsed();

    Ok(DecodeOutput {
        posteriors: Posteriors::from_rows(n_sym, q, l),
        store,
        timings: PhaseTimings { gamma: t_gamma, alpha_beta: t_ab, posterior: t_l, total: t0.elapsed() },
    })
}

fn run_local<T: Real>(ctx: &Ctx, parallel: bool) -> Result<DecodeOutput> {
    let n_sym = ctx.cb.msg_len();
    let m_tau = ctx.space.frame.size();
    let q = ctx.cb.alphabet();
    let depth = ctx.opts.pipeline_depth.max(1);
    let t0 = Instant::now();
    let mut t_gamma = Duration::ZERO;
    let mut t_ab = Duration::ZERO;
    let mut t_l = Duration::ZERO;

    let compute_chunk = |indices: &[usize], t_gamma: &mut Duration| -> Vec<GammaSlab> {
        let tg = Instant::now();
        let slabs: Vec<GammaSlab> = if parallel {
            indices.par_iter().map(|&i| ctx.gamma(i, true)).collect()
        } else {
            indices.iter().map(|&i| ctx.gamma(i, false)).collect()
        };
        *t_gamma += tg.elapsed();
        slabs
    };

    // Pass 1: forward.  Up to `depth` gamma slabs in flight; alpha folds
    // strictly ordered.
    let mut alpha = vec![0.0; (n_sym + 1) * m_tau];
    alpha[..m_tau].copy_from_slice(ctx.boundary.alpha0());
    let mut ring: Vec<GammaSlab> = Vec::new();
    let mut start = 0;
    while start < n_sym {
        let indices: Vec<usize> = (start..(start + depth).min(n_sym)).collect();
        ring = compute_chunk(&indices, &mut t_gamma);
        let tf = Instant::now();
        for (k, &i) in indices.iter().enumerate() {
            let prev = alpha[i * m_tau..(i + 1) * m_tau].to_vec();
            let mut row = ctx.alpha_row::<T>(&prev, &ring[k], parallel);
            normalize_row::<T>(&mut row, i + 1, ctx.opts.normalize)?;
            alpha[(i + 1) * m_tau..(i + 2) * m_tau].copy_from_slice(&row);
        }
        t_ab += tf.elapsed();
        start += depth;
    }

    // Pass 2: backward, recomputing gamma and emitting the posterior row
    // in the same sweep.
    let mut beta = vec![0.0; (n_sym + 1) * m_tau];
    beta[n_sym * m_tau..].copy_from_slice(ctx.boundary.beta_end());
    let mut l = vec![0.0; n_sym * q];
    let mut end = n_sym;
    while end > 0 {
        let chunk_lo = end.saturating_sub(depth);
        let indices: Vec<usize> = (chunk_lo..end).rev().collect();
        ring = compute_chunk(&indices, &mut t_gamma);
        for (k, &i) in indices.iter().enumerate() {
            let tb = Instant::now();
            let next = beta[(i + 1) * m_tau..(i + 2) * m_tau].to_vec();
            let mut row = ctx.beta_row::<T>(&next, &ring[k], parallel);
            normalize_row::<T>(&mut row, i, ctx.opts.normalize)?;
            beta[i * m_tau..(i + 1) * m_tau].copy_from_slice(&row);
            t_ab += tb.elapsed();

            let tl = Instant::now();
            let alpha_i = alpha[i * m_tau..(i + 1) * m_tau].to_vec();
            let next = beta[(i + 1) * m_tau..(i + 2) * m_tau].to_vec();
            let post = ctx.posterior_row::<T>(&alpha_i, &next, &ring[k], parallel)?;
            l[i * q..(i + 1) * q].copy_from_slice(&post);
            t_l += tl.elapsed();
        }
        end = chunk_lo;
    }

    Ok(DecodeOutput {
        posteriors: Posteriors::from_rows(n_sym, q, l),
        store: MetricStore { mode: StorageMode::Local, gamma: ring, alpha, beta, m_tau },
        timings: PhaseTimings { gamma: t_gamma, alpha_beta: t_ab, posterior: t_l, total: t0.elapsed() },
    })
}

/// Decode one frame with the default point-mass boundary priors.
pub fn decode(
    received: &[Bit],
    cb: &Codebook,
    priors: &Priors,
    space: &StateSpace,
    params: &ChannelParams,
    opts: DecodeOptions,
) -> Result<DecodeOutput> {
    let boundary = BoundaryPriors::point_mass(received.len(), cb.frame_len(), space.frame)?;
    decode_with_boundary(received, cb, priors, &boundary, space, params, opts)
}

/// Decode with caller-supplied boundary priors.
pub fn decode_with_boundary(
    received: &[Bit],
    cb: &Codebook,
    priors: &Priors,
    boundary: &BoundaryPriors,
    space: &StateSpace,
    params: &ChannelParams,
    opts: DecodeOptions,
) -> Result<DecodeOutput> {
    if priors.msg_len() != cb.msg_len() || priors.alphabet() != cb.alphabet() {
        return Err(Error::DimensionMismatch(format!(
            "priors {}x{} do not match codebook {}x{}",
            priors.msg_len(),
            priors.alphabet(),
            cb.msg_len(),
            cb.alphabet()
        )));
    }
    let ctx = Ctx { received, cb, priors, boundary, space, params, opts };
    let dispatch = || match opts.fba_precision {
        Precision::Double => run::<f64>(&ctx),
        Precision::Single => run::<f32>(&ctx),
    };
    match opts.engine {
        Engine::Serial => dispatch(),
        Engine::Parallel { workers } => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(workers)
                .build()
                .map_err(|e| Error::Config(format!("cannot build worker pool: {e}")))?;
            pool.install(dispatch)
        }
    }
}

/// Global-storage driver.
pub fn decode_global(
    received: &[Bit],
    cb: &Codebook,
    priors: &Priors,
    space: &StateSpace,
    params: &ChannelParams,
    mut opts: DecodeOptions,
) -> Result<DecodeOutput> {
    opts.storage = StorageMode::Global;
    decode(received, cb, priors, space, params, opts)
}

/// Reduced-memory driver: gamma recomputed per pass, ring of `S` slabs.
pub fn decode_local(
    received: &[Bit],
    cb: &Codebook,
    priors: &Priors,
    space: &StateSpace,
    params: &ChannelParams,
    mut opts: DecodeOptions,
) -> Result<DecodeOutput> {
    opts.storage = StorageMode::Local;
    decode(received, cb, priors, space, params, opts)
}

/// Single-worker reference path; the bitwise baseline for the parallel
/// drivers.
pub fn decode_serial(
    received: &[Bit],
    cb: &Codebook,
    priors: &Priors,
    space: &StateSpace,
    params: &ChannelParams,
    mut opts: DecodeOptions,
) -> Result<DecodeOutput> {
    opts.engine = Engine::Serial;
    decode(received, cb, priors, space, params, opts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{setup_rng, transmit};
    use crate::codebook::{CodebookMode, Message};

    fn params(pi: f64, pd: f64, ps: f64) -> ChannelParams {
        ChannelParams::new(pi, pd, ps).unwrap()
    }

    fn space(sym: (i64, i64), frame: (i64, i64)) -> StateSpace {
        StateSpace::new(DriftBounds::new(sym.0, sym.1).unwrap(), DriftBounds::new(frame.0, frame.1).unwrap()).unwrap()
    }

    fn double_opts() -> DecodeOptions {
        DecodeOptions { lattice_precision: Precision::Double, ..DecodeOptions::default() }
    }

    #[test]
    fn boundary_point_masses() {
        let frame = DriftBounds::new(-2, 2).unwrap();
        let b = boundary_priors(10, 10, frame).unwrap();
        assert_eq!(b.alpha0()[frame.index_of(0)], 1.0);
        assert_eq!(b.beta_end()[frame.index_of(0)], 1.0);

        let b = boundary_priors(11, 10, frame).unwrap();
        assert_eq!(b.beta_end()[frame.index_of(1)], 1.0);

        match boundary_priors(13, 10, frame) {
            Err(Error::DriftOutOfRange { drift: 3, .. }) => {}
            other => panic!("expected DriftOutOfRange, got {other:?}"),
        }
    }

    #[test]
    fn noiseless_decode_is_exact() {
        let cb = Codebook::from_words(2, 2, 2, CodebookMode::Invariant, vec![0b00, 0b11, 0b00, 0b11]).unwrap();
        let msg = Message::new(vec![1, 0]);
        let frame = cb.encode(&msg).unwrap();
        let sp = space((0, 0), (0, 0));
        let out = decode(&frame, &cb, &Priors::uniform(2, 2), &sp, &params(0.0, 0.0, 0.0), double_opts()).unwrap();
        assert_eq!(out.posteriors.decide(), vec![1, 0]);
        for i in 0..2 {
            assert!((out.posteriors.row(i)[msg.symbols[i]] - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn single_symbol_matches_direct_bayes() {
        let cb = Codebook::from_words(1, 2, 4, CodebookMode::Varying, vec![0b00, 0b01, 0b10, 0b11]).unwrap();
        let c = params(0.05, 0.05, 0.02);
        let sp = space((-2, 2), (-2, 2));
        let received = vec![1u8, 1, 0];
        let opts = DecodeOptions { banded: false, ..double_opts() };
        let out = decode(&received, &cb, &Priors::uniform(1, 4), &sp, &c, opts).unwrap();
        // Direct Bayes with the full receiver metric; symbol/frame bounds
        // coincide here so no trajectory truncation applies.
        let likes: Vec<f64> =
            (0..4).map(|d| crate::lattice::receiver(&received, &cb.word_bits(0, d), &c) * 0.25).collect();
        let total: f64 = likes.iter().sum();
        for d in 0..4 {
            assert!((out.posteriors.row(0)[d] - likes[d] / total).abs() < 1e-9, "symbol {d}");
        }
    }

    #[test]
    fn prior_point_mass_forces_posterior() {
        let cb = Codebook::from_words(2, 2, 2, CodebookMode::Invariant, vec![0b00, 0b11, 0b00, 0b11]).unwrap();
        let c = params(0.05, 0.05, 0.1);
        let sp = space((-2, 2), (-2, 2));
        let mut rng = setup_rng(3);
        let frame = cb.encode(&Message::new(vec![0, 1])).unwrap();
        let received = transmit(&frame, &c, &mut rng);
        if !sp.frame.contains(received.len() as i64 - 4) {
            return; // astronomically unlikely with these parameters
        }
        let priors = Priors::from_rows(vec![vec![0.0, 1.0], vec![0.5, 0.5]]).unwrap();
        let out = decode(&received, &cb, &priors, &sp, &c, double_opts()).unwrap();
        assert!((out.posteriors.row(0)[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn posterior_rows_are_distributions() {
        let mut rng = setup_rng(17);
        let cb = Codebook::random(4, 3, 4, &mut rng).unwrap();
        let c = params(0.02, 0.02, 0.05);
        let sp = space((-2, 2), (-3, 3));
        let frame = cb.encode(&Message::random(4, 4, &mut rng)).unwrap();
        let received = transmit(&frame, &c, &mut rng);
        if !sp.frame.contains(received.len() as i64 - frame.len() as i64) {
            return;
        }
        let out = decode(&received, &cb, &Priors::uniform(4, 4), &sp, &c, DecodeOptions::default()).unwrap();
        for i in 0..4 {
            let row = out.posteriors.row(i);
            let sum: f64 = row.iter().sum();
            assert!((sum - 1.0).abs() < 1e-9);
            assert!(row.iter().all(|&p| (0.0..=1.0 + 1e-12).contains(&p)));
        }
    }

    #[test]
    fn schedules_and_engines_bitwise_identical() {
        let mut rng = setup_rng(23);
        let cb = Codebook::random(6, 4, 8, &mut rng).unwrap();
        let c = params(0.03, 0.03, 0.01);
        let sp = space((-2, 2), (-4, 4));
        let frame = cb.encode(&Message::random(6, 8, &mut rng)).unwrap();
        let received = transmit(&frame, &c, &mut rng);
        if !sp.frame.contains(received.len() as i64 - frame.len() as i64) {
            return;
        }
        let priors = Priors::uniform(6, 8);
        let base = DecodeOptions::default();
        let reference = decode_serial(&received, &cb, &priors, &sp, &c, base).unwrap();
        let variants = [
            DecodeOptions { storage: StorageMode::Local, ..base },
            DecodeOptions { engine: Engine::Parallel { workers: 2 }, ..base },
            DecodeOptions { storage: StorageMode::Local, engine: Engine::Parallel { workers: 3 }, ..base },
            DecodeOptions { storage: StorageMode::Local, pipeline_depth: 2, ..base },
        ];
        for (k, opts) in variants.iter().enumerate() {
            let out = decode(&received, &cb, &priors, &sp, &c, *opts).unwrap();
            assert_eq!(out.posteriors, reference.posteriors, "variant {k} differs");
        }
    }

    #[test]
    fn lambda_product_constant_without_normalization() {
        let mut rng = setup_rng(31);
        let cb = Codebook::random(3, 3, 4, &mut rng).unwrap();
        let c = params(0.05, 0.05, 0.05);
        let sp = space((-2, 2), (-2, 2));
        let frame = cb.encode(&Message::random(3, 4, &mut rng)).unwrap();
        let received = transmit(&frame, &c, &mut rng);
        if !sp.frame.contains(received.len() as i64 - frame.len() as i64) {
            return;
        }
        let opts = DecodeOptions { normalize: false, ..double_opts() };
        let out = decode(&received, &cb, &Priors::uniform(3, 4), &sp, &c, opts).unwrap();
        let lambda: Vec<f64> = (0..=3)
            .map(|i| out.store.alpha_row(i).iter().zip(out.store.beta_row(i)).map(|(a, b)| a * b).sum())
            .collect();
        for &l in &lambda[1..] {
            assert!((l - lambda[0]).abs() <= 1e-10 * lambda[0].abs(), "lambda drifted: {lambda:?}");
        }
    }

    #[test]
    fn local_gamma_footprint_is_ring_sized() {
        let mut rng = setup_rng(41);
        let cb = Codebook::random(10, 3, 4, &mut rng).unwrap();
        let c = params(0.01, 0.01, 0.0);
        let sp = space((-1, 1), (-2, 2));
        let frame = cb.encode(&Message::random(10, 4, &mut rng)).unwrap();
        let received = transmit(&frame, &c, &mut rng);
        if !sp.frame.contains(received.len() as i64 - frame.len() as i64) {
            return;
        }
        let priors = Priors::uniform(10, 4);
        let g = decode_global(&received, &cb, &priors, &sp, &c, DecodeOptions::default()).unwrap();
        let l = decode_local(&received, &cb, &priors, &sp, &c, DecodeOptions::default()).unwrap();
        assert_eq!(g.store.gamma.len(), 10);
        // The local ring never holds more than S slabs (the final ring may
        // hold fewer when N is not a multiple of S).
        assert!(!l.store.gamma.is_empty() && l.store.gamma.len() <= 4, "ring held {}", l.store.gamma.len());
        assert_eq!(l.store.gamma[0].bytes(), g.store.gamma[0].bytes());
    }

    #[test]
    fn underflow_reported_when_state_space_inconsistent() {
        // Noiseless channel but received does not match any codeword.
        let cb = Codebook::from_words(1, 2, 2, CodebookMode::Varying, vec![0b00, 0b11]).unwrap();
        let sp = space((0, 0), (0, 0));
        let out = decode(&[0, 1], &cb, &Priors::uniform(1, 2), &sp, &params(0.0, 0.0, 0.0), double_opts());
        assert!(matches!(out, Err(Error::DecoderUnderflow(_))), "got {out:?}");
    }
}
