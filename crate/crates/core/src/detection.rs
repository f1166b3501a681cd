//! Residuals, vector-valued alarms and the neighbour-unanimity decision.
//!
//! Each local unit `j` thresholds the norm of its received error `e~^c_j`
//! and, when above threshold, broadcasts the lagged aggregate error
//! `d_j(k-1) = e~^c_j(k) - F^c_j e~^c_j(k-1)` as its alarm. A node decides
//! it is under attack once every monitor (every node its state reaches)
//! raises an alarm. The decision latches.

use std::ops::Range;

use crate::numerics::{pseudo_inverse, rank};
use crate::{Error, Matrix, Result, Vector};

/// Computes the received error of the distributed observer from the
/// measured output.
#[derive(Debug, Clone, PartialEq)]
pub struct ResidualGenerator {
    c: Matrix,
    c_left_inverse: Option<Matrix>,
    pub fc: Matrix,
}

impl ResidualGenerator {
    pub fn new(c: &Matrix, fc: &Matrix) -> Self {
        let c_left_inverse = (rank(c) == c.ncols()).then(|| pseudo_inverse(c));
        Self {
            c: c.clone(),
            c_left_inverse,
            fc: fc.clone(),
        }
    }

    /// Output residual `y~ - C x^c`.
    pub fn residual(&self, y: &Vector, xhat_c: &Vector) -> Vector {
        y - &self.c * xhat_c
    }

    /// `e~^c = x - x~ - x^c`. Exact when `C` has full column rank; otherwise
    /// approximated by `x^d - x^c`, which differs by the vanishing UIO error.
    pub fn received_error(&self, y: &Vector, xhat_c: &Vector, xhat_d: &Vector) -> Vector {
        match &self.c_left_inverse {
            Some(left) => left * self.residual(y, xhat_c),
            None => xhat_d - xhat_c,
        }
    }
}

/// Lagged aggregate error `d(k-1) = e(k) - F^c e(k-1)`; `None` until two
/// samples exist.
pub fn compute_d(current: &Vector, previous: Option<&Vector>, fc: &Matrix) -> Option<Vector> {
    previous.map(|prev| current - fc * prev)
}

#[derive(Debug, Clone, PartialEq)]
pub struct AlarmSignal {
    pub origin: usize,
    pub step: usize,
    /// Zero, or the aggregate error of the previous step.
    pub delta: Vector,
}

impl AlarmSignal {
    pub fn silent(origin: usize, step: usize, dim: usize) -> Self {
        Self {
            origin,
            step,
            delta: Vector::zeros(dim),
        }
    }

    pub fn is_raised(&self) -> bool {
        self.delta.iter().any(|&x| x != 0.0)
    }
}

/// Alarm of node `origin`: `d^-` if `||e~^c|| > theta`, zero otherwise.
pub fn emit_alarm(
    origin: usize,
    step: usize,
    error_norm: f64,
    threshold: f64,
    lagged_d: Option<&Vector>,
    dim: usize,
) -> AlarmSignal {
    match lagged_d {
        Some(d) if error_norm > threshold => AlarmSignal {
            origin,
            step,
            delta: d.clone(),
        },
        _ => AlarmSignal::silent(origin, step, dim),
    }
}

/// `true` iff every monitor delivered a raised alarm. An empty monitor set
/// never decides.
pub fn decide_attack(monitors: &[usize], alarms: &[AlarmSignal]) -> Result<bool> {
    if monitors.is_empty() {
        return Ok(false);
    }
    let mut all = true;
    for &j in monitors {
        let alarm = alarms
            .iter()
            .find(|a| a.origin == j)
            .ok_or_else(|| Error::Protocol(format!("no alarm received from node {}", j + 1)))?;
        all &= alarm.is_raised();
    }
    Ok(all)
}

/// Latching decision state of one node.
#[derive(Debug, Clone, PartialEq)]
pub struct DetectionState {
    pub node: usize,
    pub monitors: Vec<usize>,
    pub decided_at: Option<usize>,
}

impl DetectionState {
    pub fn new(node: usize, monitors: Vec<usize>) -> Self {
        Self {
            node,
            monitors,
            decided_at: None,
        }
    }

    pub fn is_decided(&self) -> bool {
        self.decided_at.is_some()
    }

    /// Feed this step's alarms; returns whether the node is (now or
    /// previously) decided.
    pub fn update(&mut self, step: usize, alarms: &[AlarmSignal]) -> Result<bool> {
        let now = decide_attack(&self.monitors, alarms)?;
        if now && self.decided_at.is_none() {
            self.decided_at = Some(step);
        }
        Ok(self.is_decided())
    }
}

/// Threshold calibration rule: `theta = factor * max ||e~^c|| + floor` over
/// the window of an attack-free run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThresholdPolicy {
    pub safety_factor: f64,
    pub floor: f64,
    pub window_start: usize,
}

impl Default for ThresholdPolicy {
    fn default() -> Self {
        Self {
            safety_factor: 2.0,
            floor: 1e-6,
            window_start: 10,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Calibration {
    pub thresholds: Vec<f64>,
    pub warnings: Vec<String>,
}

/// `error_norms[node][step]` from an attack-free run.
pub fn calibrate_thresholds(error_norms: &[Vec<f64>], window: Range<usize>, policy: &ThresholdPolicy) -> Calibration {
    let mut warnings = Vec::new();
    let horizon = error_norms.iter().map(Vec::len).min().unwrap_or(0);
    let end = window.end.min(horizon);
    if window.end > horizon {
        warnings.push(format!(
            "calibration window ends at {} but the run has only {horizon} steps",
            window.end
        ));
    }
    if window.start >= end {
        warnings.push(format!(
            "calibration window {}..{end} is empty; thresholds fall back to the floor",
            window.start
        ));
    }
    let thresholds = error_norms
        .iter()
        .enumerate()
        .map(|(node, norms)| {
            let slice = if window.start < end { &norms[window.start..end] } else { &[][..] };
            let peak = slice.iter().copied().fold(0.0, f64::max);
            if slice.len() >= 2 && peak > policy.floor {
                let last = slice[slice.len() - 1];
                if last >= slice[slice.len() - 2] && last == peak {
                    warnings.push(format!(
                        "node {}: received error still growing at the end of the calibration window; horizon shorter than the transient",
                        node + 1
                    ));
                }
            }
            policy.safety_factor * peak + policy.floor
        })
        .collect();
    Calibration { thresholds, warnings }
}
