//! Address novelty and address-cluster novelty of transaction sequences.
//!
//! Both metrics are plotted against the position of the transaction in the
//! sequence, smoothed with a simple moving average whose window is 1% of the
//! series length.

use alloc::vec::Vec;

use hashbrown::HashSet;

use crate::chain::TxRecord;
use crate::clustering::ClusterBuilder;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum NoveltyKind {
    Address,
    Cluster,
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct NoveltyPoint {
    /// Position of the transaction in the analysed sequence.
    pub ordinal: u64,
    pub raw: f64,
    pub sma: f64,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct NoveltySeries {
    pub kind: NoveltyKind,
    pub points: Vec<NoveltyPoint>,
}

impl NoveltySeries {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn raw_values(&self) -> impl Iterator<Item = f64> + '_ {
        self.points.iter().map(|p| p.raw)
    }

    /// At most `max_points` evenly spaced points, always keeping the last one.
    pub fn downsample(&self, max_points: usize) -> NoveltySeries {
        let n = self.points.len();
        if max_points == 0 {
            return NoveltySeries {
                kind: self.kind,
                points: Vec::new(),
            };
        }
        if n <= max_points {
            return self.clone();
        }
        let points = (0..max_points)
            .map(|i| {
                let idx = if max_points == 1 {
                    n - 1
                } else {
                    i * (n - 1) / (max_points - 1)
                };
                self.points[idx]
            })
            .collect();
        NoveltySeries {
            kind: self.kind,
            points,
        }
    }
}

/// Window length for a series of `total_n` points: `max(1, ceil(total_n / 100))`.
pub fn sma_window(total_n: usize) -> usize {
    total_n.div_ceil(100).max(1)
}

/// Recomputes the moving average of `series` over a window sized for
/// `total_n` points. Points before the first full window average over the
/// points seen so far.
pub fn sma(series: &NoveltySeries, total_n: usize) -> NoveltySeries {
    let mut out = series.clone();
    let raw: Vec<f64> = series.raw_values().collect();
    for (p, v) in out.points.iter_mut().zip(moving_average(&raw, sma_window(total_n))) {
        p.sma = v;
    }
    out
}

/// Trailing mean over `window` values. The running sum is rebuilt from
/// scratch once per window so rounding error does not accumulate over long
/// series.
pub fn moving_average(values: &[f64], window: usize) -> Vec<f64> {
    let w = window.max(1);
    let mut out = Vec::with_capacity(values.len());
    let mut sum = 0.0;
    for i in 0..values.len() {
        sum += values[i];
        if i >= w {
            sum -= values[i - w];
        }
        let lo = (i + 1).saturating_sub(w);
        if (i + 1) % w == 0 {
            sum = values[lo..=i].iter().sum();
        }
        out.push(sum / (i + 1 - lo) as f64);
    }
    out
}

fn finish(kind: NoveltyKind, points: Vec<NoveltyPoint>) -> NoveltySeries {
    let series = NoveltySeries { kind, points };
    let n = series.len();
    sma(&series, n)
}

/// Outputs paying a new address divided by address-bearing outputs, per
/// transaction.
///
/// An address is new if no earlier transaction of the sequence mentioned it,
/// as an input or as an output, so a transaction paying a fresh address twice
/// scores both outputs. Outputs without an address are left out of the
/// denominator; transactions with no address-bearing output get no point.
pub fn address_novelty<'a, I>(txs: I) -> NoveltySeries
where
    I: IntoIterator<Item = &'a TxRecord>,
{
    let mut seen: HashSet<&'a str> = HashSet::new();
    let mut points = Vec::new();
    for (pos, tx) in txs.into_iter().enumerate() {
        let mut denominator = 0u64;
        let mut numerator = 0u64;
        for a in tx.output_addresses() {
            denominator += 1;
            if !seen.contains(a.as_str()) {
                numerator += 1;
            }
        }
        seen.extend(tx.output_addresses().map(|a| a.as_str()));
        seen.extend(tx.inputs.iter().map(|a| a.as_str()));
        if denominator == 0 {
            continue;
        }
        points.push(NoveltyPoint {
            ordinal: pos as u64,
            raw: numerator as f64 / denominator as f64,
            sma: 0.0,
        });
    }
    finish(NoveltyKind::Address, points)
}

/// 1 when a transaction merges two or more clusters that are all trivial,
/// 0 otherwise. Only transactions spending at least two distinct addresses
/// get a point.
pub fn cluster_novelty<'a, I>(txs: I) -> NoveltySeries
where
    I: IntoIterator<Item = &'a TxRecord>,
{
    let mut builder = ClusterBuilder::new();
    let mut points = Vec::new();
    for (pos, tx) in txs.into_iter().enumerate() {
        let effect = builder.absorb(tx);
        if effect.distinct_inputs < 2 {
            continue;
        }
        let novel = effect.merged() && effect.all_spanned_trivial;
        points.push(NoveltyPoint {
            ordinal: pos as u64,
            raw: if novel { 1.0 } else { 0.0 },
            sma: 0.0,
        });
    }
    finish(NoveltyKind::Cluster, points)
}
