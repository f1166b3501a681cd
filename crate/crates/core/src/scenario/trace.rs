//! Per-step, per-node log of a closed-loop run, and its CSV form.

use std::io::Write;

use crate::accommodation::{AccommodationPhase, RankRegime};
use crate::{Error, Result, Vector};

/// Everything observed at node `node` during step `step`.
#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord {
    pub step: usize,
    pub node: usize,
    pub x: Vector,
    /// Attacker model state `x~` (zero for unattacked nodes).
    pub x_tilde: Vector,
    /// Measurement seen by the local unit, `C x - gamma`.
    pub y_meas: Vector,
    pub xhat_d: Vector,
    pub xhat_c: Vector,
    /// True attacked distributed error `x - x~ - x^c`.
    pub eps_tilde_c: Vector,
    /// Distributed error as computed by the local unit.
    pub received_error: Vector,
    /// Norm of `received_error`, the thresholded quantity.
    pub error_norm: f64,
    /// `||y - C x^c||`.
    pub residual_norm: f64,
    pub threshold: f64,
    pub alarm: bool,
    pub delta: Vector,
    pub decided: bool,
    /// Commanded input.
    pub u: Vector,
    /// Input reaching the plant.
    pub u_applied: Vector,
    pub eta: Vector,
    pub eta_hat: Vector,
    pub xhat_tilde: Vector,
    /// Estimate broadcast to the neighbours' controllers.
    pub shared_estimate: Vector,
    pub phase: AccommodationPhase,
    pub regime: RankRegime,
}

impl StepRecord {
    /// True decentralized error `x - x^d`.
    pub fn eps_d(&self) -> Vector {
        &self.x - &self.xhat_d
    }

    /// True attacked decentralized error `x - x~ - x^d`.
    pub fn eps_tilde_d(&self) -> Vector {
        &self.x - &self.x_tilde - &self.xhat_d
    }
}

/// Column order of [`Trace::write_csv`].
pub const CSV_COLUMNS: &[&str] = &[
    "step",
    "node",
    "x",
    "x_tilde",
    "y_meas",
    "xhat_d",
    "xhat_c",
    "eps_tilde_c",
    "received_error",
    "error_norm",
    "residual_norm",
    "threshold",
    "alarm",
    "delta",
    "decided",
    "u",
    "u_applied",
    "eta",
    "eta_hat",
    "xhat_tilde",
    "shared_estimate",
    "phase",
    "regime",
];

#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    pub nodes: usize,
    /// Step-major: all nodes of step 0, then step 1, ...
    pub records: Vec<StepRecord>,
}

fn float(x: f64) -> String {
    format!("{x:.16e}")
}

fn vector(v: &Vector) -> String {
    v.iter().map(|&x| float(x)).collect::<Vec<_>>().join(";")
}

impl Trace {
    pub fn new(nodes: usize) -> Self {
        Self {
            nodes,
            records: Vec::new(),
        }
    }

    pub fn horizon(&self) -> usize {
        self.records.len().checked_div(self.nodes).unwrap_or(0)
    }

    pub fn record(&self, step: usize, node: usize) -> &StepRecord {
        &self.records[step * self.nodes + node]
    }

    pub fn node(&self, node: usize) -> impl Iterator<Item = &StepRecord> + '_ {
        self.records.iter().filter(move |r| r.node == node)
    }

    /// First step at which `node` decided it is attacked.
    pub fn decision_step(&self, node: usize) -> Option<usize> {
        self.node(node).find(|r| r.decided).map(|r| r.step)
    }

    pub fn alarm_count(&self) -> usize {
        self.records.iter().filter(|r| r.alarm).count()
    }

    /// Fixed columns; vectors as `;`-separated entries, floats with 17
    /// significant digits, nodes 1-based.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let io = |e: csv::Error| Error::Io {
            path: "trace".into(),
            source: std::io::Error::other(e),
        };
        let mut w = csv::Writer::from_writer(out);
        w.write_record(CSV_COLUMNS).map_err(io)?;
        for r in &self.records {
            w.write_record([
                r.step.to_string(),
                (r.node + 1).to_string(),
                vector(&r.x),
                vector(&r.x_tilde),
                vector(&r.y_meas),
                vector(&r.xhat_d),
                vector(&r.xhat_c),
                vector(&r.eps_tilde_c),
                vector(&r.received_error),
                float(r.error_norm),
                float(r.residual_norm),
                float(r.threshold),
                u8::from(r.alarm).to_string(),
                vector(&r.delta),
                u8::from(r.decided).to_string(),
                vector(&r.u),
                vector(&r.u_applied),
                vector(&r.eta),
                vector(&r.eta_hat),
                vector(&r.xhat_tilde),
                vector(&r.shared_estimate),
                r.phase.as_str().to_string(),
                r.regime.as_str().to_string(),
            ])
            .map_err(io)?;
        }
        w.flush().map_err(|e| Error::Io {
            path: "trace".into(),
            source: e,
        })
    }

    pub fn to_csv_string(&self) -> Result<String> {
        let mut buf = Vec::new();
        self.write_csv(&mut buf)?;
        Ok(String::from_utf8(buf).expect("csv output is utf-8"))
    }
}
