//! Running per-bin sums.
//!
//! Every estimator in the crate is a ratio of two segment sums per bin (noisy
//! indicator and noisy response for the private stream, count and response for
//! the raw stream, or a single value for the univariate stream). Keeping the
//! cumulative sums at each retained time index turns any segment sum into one
//! subtraction.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Which time indices keep a snapshot of the cumulative sums, and therefore
/// which split points a detector may scan.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScanPolicy {
    /// Every index is retained; every split `1..t` is scanned.
    #[default]
    Full,
    /// For each level `k`, only the largest multiple of `2^k` below `t` is a
    /// candidate split. Memory is `O(N_h log t)`.
    Dyadic,
}

/// Cumulative sums over `1..=t` of two per-bin channels `a` and `b`.
#[derive(Debug, Clone)]
pub struct PrefixState {
    width: usize,
    policy: ScanPolicy,
    t: u64,
    // Cumulative sums at the current time.
    a: Vec<f64>,
    b: Vec<f64>,
    // Full: `a` then `b` for indices 0..=t, contiguous.
    history: Vec<f64>,
    // Dyadic: snapshots at the retained indices.
    snapshots: BTreeMap<u64, (Vec<f64>, Vec<f64>)>,
}

/// Borrowed cumulative sums at one index.
#[derive(Debug, Clone, Copy)]
pub struct Cumulative<'a> {
    pub a: &'a [f64],
    pub b: &'a [f64],
}

/// Sums over the half-open index range `(from, to]`.
#[derive(Debug, Clone, Copy)]
pub struct Segment<'a> {
    lo: Cumulative<'a>,
    hi: Cumulative<'a>,
    len: u64,
}

impl Segment<'_> {
    pub fn len(&self) -> u64 {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn sum_a(&self, bin: usize) -> f64 {
        self.hi.a[bin] - self.lo.a[bin]
    }

    pub fn sum_b(&self, bin: usize) -> f64 {
        self.hi.b[bin] - self.lo.b[bin]
    }

    pub fn width(&self) -> usize {
        self.hi.a.len()
    }
}

impl PrefixState {
    pub fn new(width: usize, policy: ScanPolicy) -> Result<Self> {
        if width == 0 {
            return Err(invalid("prefix state needs at least one bin"));
        }
        let mut state = Self {
            width,
            policy,
            t: 0,
            a: vec![0.0; width],
            b: vec![0.0; width],
            history: Vec::new(),
            snapshots: BTreeMap::new(),
        };
        state.record();
        Ok(state)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn policy(&self) -> ScanPolicy {
        self.policy
    }

    /// Number of observations absorbed so far.
    pub fn time(&self) -> u64 {
        self.t
    }

    /// Drops all observations; the next push must carry time index 1.
    pub fn reset(&mut self) {
        self.t = 0;
        self.a.iter_mut().for_each(|v| *v = 0.0);
        self.b.iter_mut().for_each(|v| *v = 0.0);
        self.history.clear();
        self.snapshots.clear();
        self.record();
    }

    fn check_next(&self, time_index: u64) -> Result<()> {
        if time_index != self.t + 1 {
            return Err(Error::Sequencing { expected: self.t + 1, got: time_index });
        }
        Ok(())
    }

    /// Adds dense per-bin increments for time `time_index`.
    pub fn push(&mut self, time_index: u64, a: &[f64], b: &[f64]) -> Result<()> {
        self.check_next(time_index)?;
        for got in [a.len(), b.len()] {
            if got != self.width {
                return Err(Error::DimensionMismatch { expected: self.width, got });
            }
        }
        self.a.iter_mut().zip(a).for_each(|(acc, v)| *acc += v);
        self.b.iter_mut().zip(b).for_each(|(acc, v)| *acc += v);
        self.t = time_index;
        self.record();
        Ok(())
    }

    /// Adds `(1, value)` to a single bin and nothing elsewhere.
    pub fn push_one_hot(&mut self, time_index: u64, bin: usize, value: f64) -> Result<()> {
        self.check_next(time_index)?;
        if bin >= self.width {
            return Err(invalid(format!("bin {bin} out of range for width {}", self.width)));
        }
        self.a[bin] += 1.0;
        self.b[bin] += value;
        self.t = time_index;
        self.record();
        Ok(())
    }

    fn record(&mut self) {
        match self.policy {
            ScanPolicy::Full => {
                self.history.extend_from_slice(&self.a);
                self.history.extend_from_slice(&self.b);
            }
            ScanPolicy::Dyadic => {
                let t = self.t;
                self.snapshots.insert(t, (self.a.clone(), self.b.clone()));
                // Keep 0, and for each level the largest multiples of 2^k at
                // or below t and t - 1: the latter are the splits scanned at t,
                // the former the ones scanned at t + 1.
                self.snapshots.retain(|&s, _| s == 0 || s == t || is_dyadic_anchor(s, t) || is_dyadic_anchor(s, t + 1));
            }
        }
    }

    /// Whether index `i` has a snapshot.
    pub fn is_retained(&self, i: u64) -> bool {
        match self.policy {
            ScanPolicy::Full => i <= self.t,
            ScanPolicy::Dyadic => self.snapshots.contains_key(&i),
        }
    }

    /// Cumulative sums over `1..=i`.
    pub fn cumulative(&self, i: u64) -> Result<Cumulative<'_>> {
        if i == self.t {
            return Ok(Cumulative { a: &self.a, b: &self.b });
        }
        match self.policy {
            ScanPolicy::Full if i < self.t => {
                let start = i as usize * 2 * self.width;
                let row = &self.history[start..start + 2 * self.width];
                let (a, b) = row.split_at(self.width);
                Ok(Cumulative { a, b })
            }
            ScanPolicy::Dyadic => self.snapshots.get(&i).map(|(a, b)| Cumulative { a, b }).ok_or(Error::NotRetained(i)),
            _ => Err(Error::NotRetained(i)),
        }
    }

    /// Sums over indices `from + 1 ..= to`.
    pub fn segment(&self, from: u64, to: u64) -> Result<Segment<'_>> {
        if from > to {
            return Err(invalid(format!("empty segment ({from}, {to}]")));
        }
        if to > self.t {
            return Err(Error::NotRetained(to));
        }
        Ok(Segment { lo: self.cumulative(from)?, hi: self.cumulative(to)?, len: to - from })
    }

    /// Split points `s` in `1..t` scanned at the current time.
    pub fn candidate_splits(&self) -> Vec<u64> {
        candidate_splits(self.policy, self.t)
    }

    /// Number of retained snapshots (including index 0).
    pub fn retained_len(&self) -> usize {
        match self.policy {
            ScanPolicy::Full => self.t as usize + 1,
            ScanPolicy::Dyadic => self.snapshots.len(),
        }
    }
}

/// `s` is the largest multiple of some `2^k` strictly below `t`.
fn is_dyadic_anchor(s: u64, t: u64) -> bool {
    if s == 0 || s >= t {
        return false;
    }
    let k = s.trailing_zeros();
    // Any level j <= k has s as a multiple; s is the anchor for level j iff
    // s + 2^j >= t. The loosest test is the largest level, k.
    k < 64 && s.saturating_add(1u64 << k) >= t
}

/// Split points scanned at time `t` under `policy`, in increasing order.
pub fn candidate_splits(policy: ScanPolicy, t: u64) -> Vec<u64> {
    if t < 2 {
        return Vec::new();
    }
    match policy {
        ScanPolicy::Full => (1..t).collect(),
        ScanPolicy::Dyadic => {
            let mut out = Vec::new();
            let mut k = 0u32;
            while k < 64 && (1u64 << k) < t {
                let step = 1u64 << k;
                let s = (t - 1) / step * step;
                if out.last() != Some(&s) {
                    out.push(s);
                }
                k += 1;
            }
            out.reverse();
            out
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_push_equals_observation() {
        let mut st = PrefixState::new(3, ScanPolicy::Full).unwrap();
        st.push(1, &[1.0, 2.0, 3.0], &[0.5, 0.0, -1.0]).unwrap();
        let c = st.cumulative(1).unwrap();
        assert_eq!(c.a, &[1.0, 2.0, 3.0]);
        assert_eq!(c.b, &[0.5, 0.0, -1.0]);
        st.push(2, &[1.0, 1.0, 1.0], &[1.0, 1.0, 1.0]).unwrap();
        let c = st.cumulative(2).unwrap();
        assert_eq!(c.a, &[2.0, 3.0, 4.0]);
        assert_eq!(c.b, &[1.5, 1.0, 0.0]);
    }

    #[test]
    fn out_of_order_is_rejected() {
        let mut st = PrefixState::new(1, ScanPolicy::Full).unwrap();
        assert_eq!(st.push(2, &[1.0], &[1.0]), Err(Error::Sequencing { expected: 1, got: 2 }));
        st.push(1, &[1.0], &[1.0]).unwrap();
        assert!(st.push(1, &[1.0], &[1.0]).is_err());
        assert!(st.push(2, &[1.0, 2.0], &[1.0]).is_err());
    }

    #[test]
    fn segment_sums_match_brute_force() {
        let mut st = PrefixState::new(2, ScanPolicy::Full).unwrap();
        let rows: Vec<([f64; 2], [f64; 2])> = (1..=100)
            .map(|i| ([i as f64 * 0.37 % 1.0, (i * i) as f64 % 7.0], [(i as f64).sin(), 1.0 / i as f64]))
            .collect();
        for (i, (a, b)) in rows.iter().enumerate() {
            st.push(i as u64 + 1, a, b).unwrap();
        }
        let seg = st.segment(40, 100).unwrap();
        assert_eq!(seg.len(), 60);
        for j in 0..2 {
            let ba: f64 = rows[40..100].iter().map(|r| r.0[j]).sum();
            let bb: f64 = rows[40..100].iter().map(|r| r.1[j]).sum();
            assert!((seg.sum_a(j) - ba).abs() < 1e-9);
            assert!((seg.sum_b(j) - bb).abs() < 1e-9);
        }
    }

    #[test]
    fn dyadic_candidates() {
        assert_eq!(candidate_splits(ScanPolicy::Dyadic, 2), vec![1]);
        assert_eq!(candidate_splits(ScanPolicy::Dyadic, 9), vec![8]);
        assert_eq!(candidate_splits(ScanPolicy::Dyadic, 10), vec![8, 9]);
        assert_eq!(candidate_splits(ScanPolicy::Dyadic, 13), vec![8, 12]);
        assert_eq!(candidate_splits(ScanPolicy::Full, 4), vec![1, 2, 3]);
        assert!(candidate_splits(ScanPolicy::Full, 1).is_empty());
    }

    #[test]
    fn dyadic_retains_every_candidate_and_little_else() {
        let mut st = PrefixState::new(1, ScanPolicy::Dyadic).unwrap();
        let mut full = PrefixState::new(1, ScanPolicy::Full).unwrap();
        for t in 1..=5000u64 {
            let v = [(t as f64).cos()];
            st.push(t, &[1.0], &v).unwrap();
            full.push(t, &[1.0], &v).unwrap();
            for s in st.candidate_splits() {
                let d = st.segment(s, t).unwrap();
                let f = full.segment(s, t).unwrap();
                assert_eq!(d.sum_b(0), f.sum_b(0));
            }
            assert!(st.retained_len() <= 2 * (64 - t.leading_zeros()) as usize + 3);
        }
        assert!(matches!(st.cumulative(3), Err(Error::NotRetained(3))));
    }

    #[test]
    fn reset_restarts_time() {
        let mut st = PrefixState::new(1, ScanPolicy::Dyadic).unwrap();
        st.push(1, &[1.0], &[2.0]).unwrap();
        st.reset();
        assert_eq!(st.time(), 0);
        st.push(1, &[1.0], &[3.0]).unwrap();
        assert_eq!(st.cumulative(1).unwrap().b, &[3.0]);
    }
}
