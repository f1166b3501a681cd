//! Forward reconstruction of the non-interacting attacker state.
//!
//! The alarms carry no information along the kernel of the outbound
//! interconnection, so that component is rebuilt by running the attacker
//! model on the reconstructed input from zero at detection.

use crate::numerics::ProjectionPair;
use crate::{Matrix, Vector};

#[derive(Debug, Clone, PartialEq)]
pub struct ForwardModel {
    a: Matrix,
    b: Matrix,
    interacting: Matrix,
    kernel: Matrix,
    enabled: bool,
    pub state: Vector,
}

impl ForwardModel {
    pub fn new(a: &Matrix, b: &Matrix, projection: &ProjectionPair) -> Self {
        Self {
            a: a.clone(),
            b: b.clone(),
            interacting: projection.interacting_projector(),
            kernel: projection.kernel_projector(),
            enabled: !projection.is_full_rank(),
            state: Vector::zeros(a.nrows()),
        }
    }

    /// `false` when the kernel is trivial and the model is a no-op.
    pub fn is_enabled(&self) -> bool {
        self.enabled
    }

    pub fn reset(&mut self) {
        self.state.fill(0.0);
    }

    /// Interacting part from the LS estimate, kernel part from the model.
    pub fn combine(&self, ls_estimate: &Vector) -> Vector {
        if !self.enabled {
            return ls_estimate.clone();
        }
        &self.interacting * ls_estimate + &self.kernel * &self.state
    }

    pub fn advance(&mut self, eta_hat: &Vector) {
        if self.enabled {
            self.state = &self.a * &self.state + &self.b * eta_hat;
        }
    }
}
