//! Switching-regret accounting.
//!
//! All sums run left to right in round order (per segment), and the cumulative
//! figure is the left-to-right sum of the per-segment figures, so a report is a
//! pure function of its inputs down to the last bit.

use std::collections::BTreeMap;

use crate::{dot, Error, Result};

/// A piecewise-constant comparator sequence `u_1..u_T`.
///
/// Rounds are 0-based here: segment `k` covers `starts[k] .. starts[k+1]` (the last
/// one runs to the horizon).
#[derive(Debug, Clone, PartialEq)]
pub struct SwitchingComparator {
    starts: Vec<usize>,
    anchors: Vec<Vec<f64>>,
    horizon: usize,
}

impl SwitchingComparator {
    pub fn new(starts: Vec<usize>, anchors: Vec<Vec<f64>>, horizon: usize) -> Result<Self> {
        if starts.is_empty() || starts[0] != 0 {
            return Err(Error::contract("first segment must start at round 0"));
        }
        if starts.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::contract("segment starts must be strictly increasing"));
        }
        if *starts.last().unwrap() >= horizon {
            return Err(Error::contract("segment start beyond the horizon"));
        }
        if anchors.len() != starts.len() {
            return Err(Error::contract(format!(
                "{} anchors for {} segments",
                anchors.len(),
                starts.len()
            )));
        }
        let d = anchors[0].len();
        if anchors.iter().any(|a| a.len() != d) {
            return Err(Error::contract("anchors differ in dimension"));
        }
        Ok(Self {
            starts,
            anchors,
            horizon,
        })
    }

    /// A single fixed comparator over the whole horizon.
    pub fn fixed(anchor: Vec<f64>, horizon: usize) -> Result<Self> {
        Self::new(vec![0], vec![anchor], horizon)
    }

    /// Number of segments `S`.
    pub fn num_segments(&self) -> usize {
        self.starts.len()
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn starts(&self) -> &[usize] {
        &self.starts
    }

    pub fn anchors(&self) -> &[Vec<f64>] {
        &self.anchors
    }

    /// Half-open round range of segment `k`.
    pub fn segment(&self, k: usize) -> std::ops::Range<usize> {
        let end = self.starts.get(k + 1).copied().unwrap_or(self.horizon);
        self.starts[k]..end
    }

    pub fn segment_of(&self, t: usize) -> usize {
        self.starts.partition_point(|&s| s <= t) - 1
    }

    pub fn anchor_at(&self, t: usize) -> &[f64] {
        &self.anchors[self.segment_of(t)]
    }

    /// The same partition with every anchor multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            starts: self.starts.clone(),
            anchors: self
                .anchors
                .iter()
                .map(|a| a.iter().map(|v| v * factor).collect())
                .collect(),
            horizon: self.horizon,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegretReport {
    pub cumulative_regret: f64,
    pub per_segment_regret: Vec<f64>,
    /// `l_t . x_t - l_t . u_t` for each round.
    pub per_round: Vec<f64>,
}

impl RegretReport {
    /// Running sum of the per-round regret up to and including round `t` (0-based).
    pub fn cumulative_at(&self, t: usize) -> f64 {
        self.per_round[..=t].iter().sum()
    }
}

/// Switching regret of a realized loss trace against `comparator`.
pub fn compute_regret(
    realized: &[f64],
    losses: &[Vec<f64>],
    comparator: &SwitchingComparator,
) -> Result<RegretReport> {
    let horizon = comparator.horizon();
    if realized.len() != horizon || losses.len() != horizon {
        return Err(Error::contract(format!(
            "trace length {} / loss length {} do not match horizon {}",
            realized.len(),
            losses.len(),
            horizon
        )));
    }
    let mut per_round = Vec::with_capacity(horizon);
    let mut per_segment = Vec::with_capacity(comparator.num_segments());
    for (k, anchor) in comparator.anchors().iter().enumerate() {
        let mut seg = 0.0;
        for t in comparator.segment(k) {
            if losses[t].len() != anchor.len() {
                return Err(Error::contract(format!(
                    "loss at round {t} has dimension {}, comparator {}",
                    losses[t].len(),
                    anchor.len()
                )));
            }
            let r = realized[t] - dot(&losses[t], anchor);
            per_round.push(r);
            seg += r;
        }
        per_segment.push(seg);
    }
    let cumulative_regret = per_segment.iter().sum();
    Ok(RegretReport {
        cumulative_regret,
        per_segment_regret: per_segment,
        per_round,
    })
}

/// What happened in one simulated round.
#[derive(Debug, Clone, PartialEq)]
pub struct RoundRecord {
    /// 0-based round index.
    pub t: usize,
    pub action: Vec<f64>,
    /// `l_t . x_t` as returned by the environment.
    pub realized_loss: f64,
    pub rho: Option<bool>,
    pub xi: Option<bool>,
    pub chosen: Option<usize>,
    /// Largest meta weight after the update.
    pub p_max: f64,
    pub diagnostics: BTreeMap<&'static str, f64>,
}

impl RoundRecord {
    pub fn new(t: usize, action: Vec<f64>, realized_loss: f64) -> Self {
        Self {
            t,
            action,
            realized_loss,
            rho: None,
            xi: None,
            chosen: None,
            p_max: f64::NAN,
            diagnostics: BTreeMap::new(),
        }
    }
}
