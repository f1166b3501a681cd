//! Least-squares attacker-state estimate from the neighbours' alarms.

use nalgebra::Cholesky;

use super::RankRegime;
use crate::detection::AlarmSignal;
use crate::model::Topology;
use crate::numerics::{kernel_and_projection, pseudo_inverse, vstack, ProjectionPair};
use crate::{Error, Matrix, Result, Vector};

/// Solves `min sum_j ||delta_j - A_ji x||^2` over the alarm origins `j`.
#[derive(Debug, Clone)]
pub struct LsEstimator {
    pub origins: Vec<usize>,
    /// Stacked outbound couplings `A_ji`, one block per origin.
    pub stack: Matrix,
    pub regime: RankRegime,
    pub projection: ProjectionPair,
    normal: Option<Cholesky<f64, nalgebra::Dyn>>,
    stack_pinv: Matrix,
}

impl LsEstimator {
    /// Estimator for node `i` of the network.
    pub fn for_node(topology: &Topology, i: usize, n: usize) -> Result<Self> {
        let (origins, blocks): (Vec<usize>, Vec<Matrix>) =
            topology.outbound(i).into_iter().map(|(j, a)| (j, a.clone())).unzip();
        Self::from_blocks(origins, &blocks, n)
    }

    pub fn from_blocks(origins: Vec<usize>, blocks: &[Matrix], n: usize) -> Result<Self> {
        if origins.len() != blocks.len() {
            return Err(Error::dimension(
                "least squares",
                format!("{} origins for {} coupling blocks", origins.len(), blocks.len()),
            ));
        }
        if let Some(b) = blocks.iter().find(|b| b.ncols() != n) {
            return Err(Error::dimension(
                "least squares",
                format!("coupling block has {} columns, expected {n}", b.ncols()),
            ));
        }
        let refs: Vec<&Matrix> = blocks.iter().collect();
        let stack = vstack(&refs, n);
        let projection = kernel_and_projection(&stack, n)?;
        let regime = if projection.is_full_rank() {
            RankRegime::Full
        } else {
            RankRegime::Low
        };
        let normal = match regime {
            RankRegime::Full => (stack.transpose() * &stack).cholesky(),
            RankRegime::Low => None,
        };
        Ok(Self {
            origins,
            stack_pinv: pseudo_inverse(&stack),
            stack,
            regime,
            projection,
            normal,
        })
    }

    /// Checks a regime declared in configuration against the detected one.
    pub fn with_declared_regime(self, declared: RankRegime) -> Result<Self> {
        if declared == RankRegime::Full && self.normal.is_none() {
            return Err(Error::Regime(format!(
                "full rank declared but the normal matrix is singular (rank {} < {})",
                self.projection.projection.nrows(),
                self.projection.state_dim()
            )));
        }
        if declared != self.regime {
            return Err(Error::Regime(format!(
                "{} rank declared but the stacked coupling matrix is {} rank",
                declared.as_str(),
                self.regime.as_str()
            )));
        }
        Ok(self)
    }

    /// Projected (interacting) coordinates of a state vector.
    pub fn project(&self, x: &Vector) -> Vector {
        &self.projection.projection * x
    }

    /// LS estimate of the lagged attacker state from this step's alarms.
    pub fn estimate(&self, alarms: &[AlarmSignal]) -> Result<Vector> {
        let rows = self.stack.nrows();
        let mut stacked = Vector::zeros(rows);
        let mut offset = 0;
        for &j in &self.origins {
            let alarm = alarms
                .iter()
                .find(|a| a.origin == j)
                .ok_or_else(|| Error::Protocol(format!("no alarm received from node {}", j + 1)))?;
            let len = alarm.delta.len();
            if offset + len > rows {
                return Err(Error::Protocol(format!(
                    "alarm from node {} has dimension {len}, exceeding the coupling block",
                    j + 1
                )));
            }
            stacked.rows_mut(offset, len).copy_from(&alarm.delta);
            offset += len;
        }
        if offset != rows {
            return Err(Error::Protocol(format!(
                "alarms cover {offset} of {rows} stacked rows"
            )));
        }
        Ok(match &self.normal {
            Some(chol) => chol.solve(&(self.stack.transpose() * stacked)),
            None => &self.stack_pinv * stacked,
        })
    }
}
