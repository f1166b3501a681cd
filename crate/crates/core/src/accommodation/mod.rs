//! Attack accommodation: attacker-state estimation, input reconstruction and
//! the compensating control law.

mod forward;
mod ls;
mod reconstruction;

pub use forward::ForwardModel;
pub use ls::LsEstimator;
pub use reconstruction::{
    check_zero_condition, invariant_zeros, pencil_normal_rank, relative_degree, toeplitz, window_matrix,
    InputReconstructor, Reconstruction,
};

use crate::detection::AlarmSignal;
use crate::model::Topology;
use crate::numerics::pseudo_inverse;
use crate::{Matrix, Result, Vector};

/// Whether the stacked outbound interconnection has full column rank.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RankRegime {
    Full,
    Low,
}

impl RankRegime {
    pub fn as_str(self) -> &'static str {
        match self {
            RankRegime::Full => "full",
            RankRegime::Low => "low",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AccommodationPhase {
    /// No decision yet.
    Inactive,
    /// Decided; the reconstruction window is still filling.
    WarmingUp,
    Active,
    /// Another decided node shares the alarm origins' neighbourhoods.
    Refused,
    /// Decided, but the attacker model is not reconstructible.
    Unavailable,
}

impl AccommodationPhase {
    pub fn as_str(self) -> &'static str {
        match self {
            AccommodationPhase::Inactive => "inactive",
            AccommodationPhase::WarmingUp => "warming_up",
            AccommodationPhase::Active => "active",
            AccommodationPhase::Refused => "refused",
            AccommodationPhase::Unavailable => "unavailable",
        }
    }

    /// Only an active accommodation feeds the control law.
    pub fn is_active(self) -> bool {
        self == AccommodationPhase::Active
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AccommodationState {
    pub phase: AccommodationPhase,
    /// Raw least-squares output.
    pub ls_estimate: Vector,
    /// Lagged attacker-state estimate (LS combined with the forward model).
    pub xhat_tilde: Vector,
    pub eta_hat: Vector,
    pub started_at: Option<usize>,
}

impl AccommodationState {
    pub fn inactive(n: usize, m: usize) -> Self {
        Self {
            phase: AccommodationPhase::Inactive,
            ls_estimate: Vector::zeros(n),
            xhat_tilde: Vector::zeros(n),
            eta_hat: Vector::zeros(m),
            started_at: None,
        }
    }

    /// State correction entering the control law (zero unless active).
    pub fn applied_state(&self) -> Vector {
        if self.phase.is_active() {
            self.xhat_tilde.clone()
        } else {
            Vector::zeros(self.xhat_tilde.len())
        }
    }

    /// Input correction entering the control law (zero unless active).
    pub fn applied_input(&self) -> Vector {
        if self.phase.is_active() {
            self.eta_hat.clone()
        } else {
            Vector::zeros(self.eta_hat.len())
        }
    }
}

/// Per-node accommodation pipeline.
#[derive(Debug, Clone)]
pub struct Accommodator {
    pub ls: LsEstimator,
    /// `Err` holds the reason reconstruction is impossible for this node.
    pub reconstructor: std::result::Result<InputReconstructor, String>,
    pub forward: ForwardModel,
    pub state: AccommodationState,
}

impl Accommodator {
    pub fn new(
        ls: LsEstimator,
        reconstructor: std::result::Result<InputReconstructor, String>,
        forward: ForwardModel,
        input_dim: usize,
    ) -> Self {
        let n = ls.projection.state_dim();
        Self {
            ls,
            reconstructor,
            forward,
            state: AccommodationState::inactive(n, input_dim),
        }
    }

    pub fn regime(&self) -> RankRegime {
        self.ls.regime
    }

    /// Run one decided tick on the received alarms.
    pub fn update(&mut self, step: usize, alarms: &[AlarmSignal]) -> Result<&AccommodationState> {
        match self.state.phase {
            AccommodationPhase::Refused | AccommodationPhase::Unavailable => return Ok(&self.state),
            AccommodationPhase::Inactive => {
                self.state.started_at = Some(step);
                self.forward.reset();
                match &mut self.reconstructor {
                    Ok(rec) => {
                        rec.reset();
                        self.state.phase = AccommodationPhase::WarmingUp;
                    }
                    Err(_) => {
                        self.state.phase = AccommodationPhase::Unavailable;
                        return Ok(&self.state);
                    }
                }
            }
            AccommodationPhase::WarmingUp | AccommodationPhase::Active => {}
        }
        let ls_estimate = self.ls.estimate(alarms)?;
        let rec = self.reconstructor.as_mut().expect("reconstructor checked on activation");
        rec.push(&ls_estimate);
        let reconstruction = rec.estimate();
        self.state.xhat_tilde = self.forward.combine(&ls_estimate);
        self.state.ls_estimate = ls_estimate;
        self.state.eta_hat = reconstruction.eta;
        self.state.phase = if reconstruction.ready {
            AccommodationPhase::Active
        } else {
            AccommodationPhase::WarmingUp
        };
        Ok(&self.state)
    }

    /// Propagate the forward model with this tick's input estimate.
    pub fn advance(&mut self) {
        if matches!(self.state.phase, AccommodationPhase::WarmingUp | AccommodationPhase::Active) {
            self.forward.advance(&self.state.eta_hat);
        }
    }

    /// Permanently disable accommodation and clear its outputs.
    pub fn refuse(&mut self) {
        let started_at = self.state.started_at;
        self.state = AccommodationState::inactive(self.state.xhat_tilde.len(), self.state.eta_hat.len());
        self.state.phase = AccommodationPhase::Refused;
        self.state.started_at = started_at;
    }
}

/// `true` if a node other than `i` has decided inside the neighbourhood of
/// any alarm origin of `i`, which breaks the single-source alarm model.
pub fn overlapping_decision(topology: &Topology, i: usize, decided: &[bool]) -> bool {
    topology.monitors(i).into_iter().any(|j| {
        topology
            .neighbors(j)
            .iter()
            .chain(std::iter::once(&j))
            .any(|&l| l != i && decided.get(l).copied().unwrap_or(false))
    })
}

/// Neighbour decoupling gain `K_ij = -B_i^+ A_ij`.
pub fn neighbor_decoupling_gain(b: &Matrix, a_ij: &Matrix) -> Matrix {
    -(pseudo_inverse(b) * a_ij)
}

/// `u_i = K_i (x^d_i + x~^-) + sum_j K_ij x^d_j - eta^`.
pub fn accommodated_control<'a>(
    gain: &Matrix,
    xhat_d: &Vector,
    xhat_tilde: &Vector,
    neighbors: impl IntoIterator<Item = (&'a Matrix, &'a Vector)>,
    eta_hat: &Vector,
) -> Vector {
    let mut u = gain * (xhat_d + xhat_tilde) - eta_hat;
    for (k_ij, x_j) in neighbors {
        u += k_ij * x_j;
    }
    u
}
