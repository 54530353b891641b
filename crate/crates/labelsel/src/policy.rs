//! Supervision schedules: how many labelled samples are active at each epoch.
//!
//! Five policy kinds cover the usual shapes: a constant (naive) schedule,
//! linear and stepped ramps, a late jump, and a late-starting ramp. Ramps
//! compute `n0 + floor(((n - n0) * i) / (ef - e0))` with the product taken
//! before the floor; the floor-first reading collapses to a flat line
//! whenever `n - n0 < ef - e0`, so the product-first form is the one that
//! actually produces a ramp. The two agree at every epoch whenever
//! `ef - e0` divides `n - n0`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::curriculum::OrderedSelection;

#[derive(Debug, Error)]
pub enum PolicyError {
    #[error("invalid policy spec: {0}")]
    InvalidSpec(String),
    #[error("epoch {epoch} is out of range (schedule has {len} epochs)")]
    EpochOutOfRange { epoch: usize, len: usize },
    #[error("schedule wants {count} active samples but the ordering has {available}")]
    ScheduleExceedsSelection { count: usize, available: usize },
    #[error("malformed schedule CSV: {0}")]
    MalformedCsv(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PolicyKind {
    /// All `n` labels from epoch 0 (requires `n0 == n`).
    Naive,
    /// Linear ramp from `n0` to `n` over `[e0, ef)`.
    Linear,
    /// Ramp in chunks of `m` labels.
    Step,
    /// `n0` before `e0`, `n` from `e0` on (requires `ef == e0`).
    LateJump,
    /// Linear ramp that starts after a delay; same formula as `Linear`.
    LateLinear,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PolicySpec {
    pub kind: PolicyKind,
    /// Total labelled count.
    pub n: usize,
    /// Initial labelled count.
    pub n0: usize,
    /// Total epochs; the schedule has this many slots.
    pub e: usize,
    /// First epoch of the injection window.
    pub e0: usize,
    /// Epoch at which the full set is active.
    pub ef: usize,
    /// Step chunk size (step kind only).
    pub m: usize,
}

impl PolicySpec {
    pub fn validate(&self) -> Result<(), PolicyError> {
        let err = |msg: String| Err(PolicyError::InvalidSpec(msg));
        if self.e0 > self.ef || self.ef > self.e {
            return err(format!("need 0 <= e0 <= ef <= e, got e0={} ef={} e={}", self.e0, self.ef, self.e));
        }
        if self.n0 > self.n {
            return err(format!("need n0 <= n, got n0={} n={}", self.n0, self.n));
        }
        if self.m < 1 {
            return err("m must be at least 1".to_string());
        }
        if self.kind == PolicyKind::Naive && self.n0 != self.n {
            return err(format!("naive policy requires n0 == n, got n0={} n={}", self.n0, self.n));
        }
        if self.kind == PolicyKind::LateJump && self.ef != self.e0 {
            return err(format!("late-jump requires ef == e0, got e0={} ef={}", self.e0, self.ef));
        }
        Ok(())
    }
}

/// Per-epoch active labelled counts; monotone non-decreasing, `n0` before
/// `e0`, `n` from `ef` on.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SupervisionSchedule {
    pub counts: Vec<usize>,
}

pub fn build_schedule(spec: &PolicySpec) -> Result<SupervisionSchedule, PolicyError> {
    spec.validate()?;
    let counts = (0..spec.e).map(|epoch| count_at(spec, epoch)).collect();
    Ok(SupervisionSchedule { counts })
}

fn count_at(spec: &PolicySpec, epoch: usize) -> usize {
    if epoch < spec.e0 {
        return spec.n0;
    }
    if epoch >= spec.ef {
        return spec.n;
    }
    // Inside the window: e0 <= epoch < ef, so ef - e0 >= 1.
    let i = (epoch - spec.e0) as u128;
    let span = (spec.ef - spec.e0) as u128;
    let delta = (spec.n - spec.n0) as u128;
    let increment = match spec.kind {
        PolicyKind::Naive => 0, // n0 == n, so any branch yields n
        PolicyKind::Linear | PolicyKind::LateLinear => (delta * i) / span,
        PolicyKind::Step => {
            let m = spec.m as u128;
            ((delta * i) / (span * m)) * m
        }
        PolicyKind::LateJump => 0, // window is empty (ef == e0)
    };
    (spec.n0 + increment as usize).clamp(spec.n0, spec.n)
}

pub fn active_count(s: &SupervisionSchedule, epoch: usize) -> Result<usize, PolicyError> {
    s.counts
        .get(epoch)
        .copied()
        .ok_or(PolicyError::EpochOutOfRange { epoch, len: s.counts.len() })
}

/// First `active_count(s, epoch)` entries of the ordering; prefixes are
/// nested across epochs because the ordering is fixed.
pub fn active_prefix<'a>(
    ord: &'a OrderedSelection,
    s: &SupervisionSchedule,
    epoch: usize,
) -> Result<&'a [usize], PolicyError> {
    let count = active_count(s, epoch)?;
    if count > ord.order.len() {
        return Err(PolicyError::ScheduleExceedsSelection { count, available: ord.order.len() });
    }
    Ok(&ord.order[..count])
}

/// `epoch,count` CSV body, one row per epoch.
pub fn schedule_to_csv(s: &SupervisionSchedule) -> String {
    let mut out = String::from("epoch,count\n");
    for (epoch, count) in s.counts.iter().enumerate() {
        out.push_str(&format!("{epoch},{count}\n"));
    }
    out
}

pub fn parse_schedule_csv(text: &str) -> Result<SupervisionSchedule, PolicyError> {
    let mut lines = text.lines().map(str::trim).filter(|l| !l.is_empty() && !l.starts_with('#'));
    match lines.next() {
        Some("epoch,count") => {}
        other => {
            return Err(PolicyError::MalformedCsv(format!(
                "expected header `epoch,count`, got {other:?}"
            )))
        }
    }
    let mut counts = Vec::new();
    for (i, line) in lines.enumerate() {
        let mut parts = line.split(',');
        let epoch: usize = parts
            .next()
            .and_then(|p| p.trim().parse().ok())
            .ok_or_else(|| PolicyError::MalformedCsv(format!("bad epoch on line {line:?}")))?;
        let count: usize = parts
            .next()
            .and_then(|p| p.trim().parse().ok())
            .ok_or_else(|| PolicyError::MalformedCsv(format!("bad count on line {line:?}")))?;
        if parts.next().is_some() {
            return Err(PolicyError::MalformedCsv(format!("too many fields on line {line:?}")));
        }
        if epoch != i {
            return Err(PolicyError::MalformedCsv(format!("expected epoch {i}, got {epoch}")));
        }
        counts.push(count);
    }
    Ok(SupervisionSchedule { counts })
}
