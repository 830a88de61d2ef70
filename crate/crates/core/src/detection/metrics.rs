//! Branch probabilities of the auxiliary channel law, memoized per receive pattern.

use std::collections::HashMap;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, Mutex};

use rayon::prelude::*;

use super::orthant::{orthant_probability, OrthantQuery, OrthantSettings};
use super::trellis::Trellis;
use crate::error::{Error, Result};
use crate::frontend::OneBit;

/// Default floor for branch probabilities that underflow.
pub const DEFAULT_PROB_FLOOR: f64 = 1e-300;

/// Receive pattern of one branch window packed two bits per sample, oldest first.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct WindowKey(pub u64);

impl WindowKey {
    pub fn pack(samples: &[OneBit]) -> Self {
        Self(samples.iter().fold(0u64, |acc, s| (acc << 2) | s.0 as u64))
    }

    pub fn unpack(self, len: usize) -> Vec<OneBit> {
        (0..len).map(|i| OneBit(((self.0 >> (2 * (len - 1 - i))) & 3) as u8)).collect()
    }

    /// Pattern seen after rotating every sample by minus a quarter turn.
    pub fn rotate_back(self, len: usize) -> Self {
        let rot = self
            .unpack(len)
            .into_iter()
            .map(|s| {
                // (a + jb)(-j) = b - ja
                let re_neg = s.0 >> 1 & 1;
                let im_neg = 1 - (s.0 & 1);
                OneBit(re_neg | im_neg << 1)
            })
            .collect::<Vec<_>>();
        Self::pack(&rot)
    }
}

/// Memoized `ln W(y_window | branch)` for one noise level.
pub struct BranchMetrics<'a> {
    pub trellis: &'a Trellis,
    pub n0: f64,
    pub settings: OrthantSettings,
    pub floor: f64,
    cov: Vec<Vec<f64>>,
    sub_cov: Vec<Vec<f64>>,
    by_pattern: Mutex<HashMap<WindowKey, Arc<Vec<f64>>>>,
    by_branch: Mutex<HashMap<(usize, WindowKey), f64>>,
    underflow: AtomicBool,
}

impl<'a> BranchMetrics<'a> {
    pub fn new(trellis: &'a Trellis, n0: f64, settings: OrthantSettings, floor: f64) -> Result<Self> {
        if !(n0 > 0.0) {
            return Err(Error::InvalidConfig(format!("noise density must be positive, got {n0}")));
        }
        if trellis.window_len() > 32 {
            return Err(Error::Dimension("branch window longer than 32 samples".into()));
        }
        let cov = trellis.real_cov(n0);
        let keep = 2 * trellis.oversampling * trellis.aux_memory;
        let sub_cov = cov[..keep].iter().map(|r| r[..keep].to_vec()).collect();
        Ok(Self {
            trellis,
            n0,
            settings,
            floor,
            cov,
            sub_cov,
            by_pattern: Mutex::new(HashMap::new()),
            by_branch: Mutex::new(HashMap::new()),
            underflow: AtomicBool::new(false),
        })
    }

    /// True once any probability was floored.
    pub fn underflowed(&self) -> bool {
        self.underflow.load(Ordering::Relaxed)
    }

    /// Distinct receive patterns evaluated so far.
    pub fn cached_patterns(&self) -> usize {
        self.by_pattern.lock().expect("metric cache poisoned").len()
    }

    /// `ln W` for every branch given the window ending at the current symbol.
    pub fn log_probs(&self, window: &[OneBit]) -> Result<Arc<Vec<f64>>> {
        let key = WindowKey::pack(window);
        if let Some(v) = self.by_pattern.lock().expect("metric cache poisoned").get(&key) {
            return Ok(v.clone());
        }
        let values = (0..self.trellis.branches.len())
            .into_par_iter()
            .map(|b| self.canonical(b, key).map(f64::ln))
            .collect::<Result<Vec<_>>>()?;
        let values = Arc::new(values);
        self.by_pattern
            .lock()
            .expect("metric cache poisoned")
            .entry(key)
            .or_insert_with(|| values.clone());
        Ok(values)
    }

    /// Reduce the branch to its quarter-turn representative before evaluating.
    fn canonical(&self, b: usize, key: WindowKey) -> Result<f64> {
        let (mut b, mut key) = (b, key);
        if let Some(q) = self.trellis.quarter_turn {
            let span = self.trellis.layout.n_branches() / self.trellis.layout.p as usize;
            let len = self.trellis.window_len();
            while b / span >= q as usize {
                b -= q as usize * span;
                key = key.rotate_back(len);
            }
        }
        if let Some(&v) = self.by_branch.lock().expect("metric cache poisoned").get(&(b, key)) {
            return Ok(v);
        }
        let window = key.unpack(self.trellis.window_len());
        let v = self.auxiliary_channel_prob(&window, b)?;
        self.by_branch.lock().expect("metric cache poisoned").insert((b, key), v);
        Ok(v)
    }

    /// `W(y_k | y_{k-N..k-1}, branch)` as a ratio of orthant probabilities, floored.
    pub fn auxiliary_channel_prob(&self, window: &[OneBit], b: usize) -> Result<f64> {
        let n = self.trellis.window_len();
        if window.len() != n {
            return Err(Error::LengthMismatch { left: window.len(), right: n });
        }
        let mean: Vec<f64> = self.trellis.branches[b]
            .mean
            .iter()
            .flat_map(|m| [m.re, m.im])
            .collect();
        let positive: Vec<bool> = window.iter().flat_map(|s| [s.0 & 1 == 0, s.0 & 2 == 0]).collect();
        let num = orthant_probability(
            &OrthantQuery { mean: mean.clone(), cov: self.cov.clone(), positive: positive.clone() },
            &self.settings,
        )?
        .value;
        let keep = self.sub_cov.len();
        let den = if keep == 0 {
            1.0
        } else {
            orthant_probability(
                &OrthantQuery {
                    mean: mean[..keep].to_vec(),
                    cov: self.sub_cov.clone(),
                    positive: positive[..keep].to_vec(),
                },
                &self.settings,
            )?
            .value
        };
        let w = if den > self.floor { num / den } else { 0.0 };
        if w < self.floor || !w.is_finite() {
            self.underflow.store(true, Ordering::Relaxed);
            Ok(self.floor)
        } else {
            Ok(w.min(1.0))
        }
    }
}
