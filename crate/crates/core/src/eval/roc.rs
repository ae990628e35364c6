//! Setup (b): the statistic is computed once per test image against the whole
//! candidate set, and forged images are separated from genuine ones by an
//! empirical ROC curve.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::analyst::Examination;
use crate::triangle::StatisticKind;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RocPoint {
    pub p_fa: f64,
    pub p_d: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RocReport {
    pub statistic_kind: StatisticKind,
    pub h0_values: Vec<f64>,
    pub h1_values: Vec<f64>,
    /// From (0, 0) to (1, 1), non-decreasing in both coordinates.
    pub curve: Vec<RocPoint>,
    pub p_fa_target: f64,
    pub p_d_at_target: f64,
    pub auc: f64,
}

/// Empirical ROC sweeping the threshold over every observed value.
///
/// `V` decides H1 above the threshold and `L` below it; both are mapped onto a
/// common "larger is more forged" axis first.
pub fn roc_curve(h0: &[f64], h1: &[f64], kind: StatisticKind) -> Result<Vec<RocPoint>> {
    if h0.is_empty() || h1.is_empty() {
        return Err(Error::param("the ROC needs at least one H0 and one H1 value"));
    }
    if h0.iter().chain(h1).any(|v| !v.is_finite()) {
        return Err(Error::param("ROC inputs must be finite"));
    }
    let mut e0: Vec<f64> = h0.iter().map(|&v| kind.evidence(v)).collect();
    let mut e1: Vec<f64> = h1.iter().map(|&v| kind.evidence(v)).collect();
    e0.sort_by(|a, b| b.total_cmp(a));
    e1.sort_by(|a, b| b.total_cmp(a));
    let mut thresholds: Vec<f64> = e0.iter().chain(&e1).copied().collect();
    thresholds.sort_by(|a, b| b.total_cmp(a));
    thresholds.dedup();

    let (n0, n1) = (e0.len() as f64, e1.len() as f64);
    let mut curve = vec![RocPoint { p_fa: 0.0, p_d: 0.0 }];
    let (mut i0, mut i1) = (0, 0);
    for t in thresholds {
        while i0 < e0.len() && e0[i0] >= t {
            i0 += 1;
        }
        while i1 < e1.len() && e1[i1] >= t {
            i1 += 1;
        }
        curve.push(RocPoint {
            p_fa: i0 as f64 / n0,
            p_d: i1 as f64 / n1,
        });
    }
    Ok(curve)
}

/// Detection rate at a false-alarm level, linearly interpolated between points.
pub fn pd_at(curve: &[RocPoint], p_fa: f64) -> f64 {
    let Some(i) = curve.iter().rposition(|p| p.p_fa <= p_fa) else {
        return 0.0;
    };
    let a = curve[i];
    match curve.get(i + 1) {
        Some(b) if b.p_fa > a.p_fa => a.p_d + (p_fa - a.p_fa) / (b.p_fa - a.p_fa) * (b.p_d - a.p_d),
        _ => a.p_d,
    }
}

/// Trapezoidal area under the curve.
pub fn auc(curve: &[RocPoint]) -> f64 {
    curve
        .windows(2)
        .map(|w| (w[1].p_fa - w[0].p_fa) * 0.5 * (w[0].p_d + w[1].p_d))
        .sum()
}

pub fn roc_report(h0: &[f64], h1: &[f64], kind: StatisticKind, p_fa_target: f64) -> Result<RocReport> {
    if !(p_fa_target > 0.0 && p_fa_target < 1.0) {
        return Err(Error::param(format!(
            "p_fa target must be in (0, 1), got {p_fa_target}"
        )));
    }
    let curve = roc_curve(h0, h1, kind)?;
    Ok(RocReport {
        statistic_kind: kind,
        h0_values: h0.to_vec(),
        h1_values: h1.to_vec(),
        p_d_at_target: pd_at(&curve, p_fa_target),
        auc: auc(&curve),
        curve,
        p_fa_target,
    })
}

/// One ROC per statistic, forged examinations against genuine ones.
pub fn roc_setup_b(
    h1: &[Examination],
    h0: &[Examination],
    kinds: &[StatisticKind],
    p_fa_target: f64,
) -> Result<Vec<RocReport>> {
    if h1.is_empty() || h0.is_empty() {
        return Err(Error::param("setup (b) needs forged and genuine test images"));
    }
    kinds
        .iter()
        .map(|&kind| {
            let values =
                |set: &[Examination]| -> Vec<f64> { set.iter().map(|e| kind.value_of(&e.statistics)).collect() };
            roc_report(&values(h0), &values(h1), kind, p_fa_target)
        })
        .collect()
}
