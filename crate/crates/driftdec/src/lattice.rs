//! Receiver metric `R(y|x)` by banded lattice recursion, batched over all
//! drift endpoints.
//!
//! The lattice has `n + 1` rows (transmitted bits) and `mu + 1` columns
//! (received bits).  A horizontal step is an insertion with weight
//! `pi / 2`, a vertical step a deletion with weight `pd`, and a diagonal
//! step a transmission with weight `q_metric`.  For `i < n`:
//!
//! `F[i][j] = (pi/2) F[i][j-1] + pd F[i-1][j] + Q(y[j-1]|x[i-1]) F[i-1][j-1]`
//!
//! with `F[0][0] = 1` and zero outside.  The last row omits the insertion
//! term, since the channel cannot end a bit's events with an insertion:
//!
//! `F[n][j] = pd F[n-1][j] + Q(y[j-1]|x[n-1]) F[n-1][j-1]`
//!
//! The last row then holds `R` for every subsequence length at once, so a
//! single pass over the largest window serves all drift endpoints.  When
//! banded, the computation is restricted to a corridor `m_minus <= j - i
//! <= m_plus` around the main diagonal; cells outside are treated as 0.

use crate::bits::Bit;
use crate::channel::{q_metric, ChannelParams, DriftBounds};
use crate::numeric::{Precision, Real};
use crate::{Error, Result};

/// Receiver metrics for one codeword against every drift change in the
/// symbol state space.
#[derive(Debug, Clone)]
pub struct ReceiverBatch {
    bounds: DriftBounds,
    /// Indexed by drift change `m - m_minus`; entries under an invalid
    /// mask are 0.
    values: Vec<f64>,
    valid: Vec<bool>,
}

impl ReceiverBatch {
    pub fn bounds(&self) -> DriftBounds {
        self.bounds
    }

    pub fn value(&self, drift_change: i64) -> f64 {
        self.values[self.bounds.index_of(drift_change)]
    }

    pub fn is_valid(&self, drift_change: i64) -> bool {
        self.valid[self.bounds.index_of(drift_change)]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

/// Mask of drift endpoints whose window `n + m` fits in `window_len`
/// available received bits.
pub fn edge_truncate(word_len: usize, window_len: usize, bounds: DriftBounds) -> Vec<bool> {
    bounds
        .iter()
        .map(|m| {
            let col = word_len as i64 + m;
            col >= 0 && col <= window_len as i64
        })
        .collect()
}

/// Last lattice row over `y`, in precision `T`.  `corridor` is
/// `Some(bounds)` for the banded variant.
fn last_row<T: Real>(x: &[Bit], y: &[Bit], corridor: Option<DriftBounds>, params: &ChannelParams) -> Vec<T> {
    let n = x.len();
    let mu = y.len();
    let half_pi = T::from_f64(params.pi() * 0.5);
    let pd = T::from_f64(params.pd());

    let col_range = |i: usize| -> (usize, usize) {
        match corridor {
            None => (0, mu),
            Some(b) => {
                let lo = (i as i64 + b.m_minus()).max(0) as usize;
                let hi = (i as i64 + b.m_plus()).min(mu as i64);
                if hi < lo as i64 {
                    (1, 0) // empty
                } else {
                    (lo, hi as usize)
                }
            }
        }
    };

    let mut prev = vec![T::ZERO; mu + 1];
    let mut cur = vec![T::ZERO; mu + 1];

    // Row 0: only insertions.
    let (lo, hi) = col_range(0);
    if lo == 0 {
        prev[0] = T::ONE;
        for j in 1..=hi {
            prev[j] = half_pi * prev[j - 1];
        }
    }
    if n == 0 {
        return prev;
    }

    for i in 1..=n {
        let last = i == n;
        let xi = x[i - 1];
        let qm = [T::from_f64(q_metric(0, xi, params)), T::from_f64(q_metric(1, xi, params))];
        for v in cur.iter_mut() {
            *v = T::ZERO;
        }
        let (lo, hi) = col_range(i);
        for j in lo..=hi.min(mu) {
            let mut v = pd * prev[j];
            if j > 0 {
                v = v + qm[y[j - 1] as usize] * prev[j - 1];
                if !last {
                    v = v + half_pi * cur[j - 1];
                }
            }
            cur[j] = v;
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev
}

/// Batched receiver metric: one lattice pass over `y_window` returning
/// `R(y[..n+m] | x)` for every drift change `m` in `bounds`.
pub fn lattice_batch(
    x: &[Bit],
    y_window: &[Bit],
    bounds: DriftBounds,
    params: &ChannelParams,
    banded: bool,
    precision: Precision,
) -> Result<ReceiverBatch> {
    let n = x.len();
    let mu = y_window.len();
    if mu as i64 > n as i64 + bounds.m_plus() {
        return Err(Error::DimensionMismatch(format!(
            "window of {mu} bits exceeds n + m_plus = {}",
            n as i64 + bounds.m_plus()
        )));
    }
    let corridor = banded.then_some(bounds);
    let row: Vec<f64> = match precision {
        Precision::Single => last_row::<f32>(x, y_window, corridor, params).into_iter().map(f64::from).collect(),
        Precision::Double => last_row::<f64>(x, y_window, corridor, params),
    };
    let valid = edge_truncate(n, mu, bounds);
    let values = bounds
        .iter()
        .zip(valid.iter())
        .map(|(m, &ok)| if ok { row[(n as i64 + m) as usize] } else { 0.0 })
        .collect();
    Ok(ReceiverBatch { bounds, values, valid })
}

/// Scalar receiver metric `R(y|x)` over the full (unbanded) lattice in
/// double precision.  Used by oracles and boundary computations.
pub fn receiver(y: &[Bit], x: &[Bit], params: &ChannelParams) -> f64 {
    let row = last_row::<f64>(x, y, None, params);
    row[y.len()]
}
