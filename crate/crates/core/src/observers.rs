//! Per-node observer pair: a decentralized unknown input observer that is
//! blind to neighbour states, and a distributed observer that uses the
//! neighbours' decentralized estimates.

use crate::model::{Subsystem, Topology};
use crate::numerics::{observer_gain, pseudo_inverse, rank, spectral_radius};
use crate::{Error, Matrix, Result, Vector};

/// Tolerance for the algebraic identities of a UIO design.
const DESIGN_TOL: f64 = 1e-9;

/// Full-order UIO
///
/// ```text
/// z+   = F z + T B u + (K1 + K2) y
/// x^d  = z + H y
/// ```
///
/// with `H C E = E`, `T = I - H C`, `F = T A - K1 C`, `K2 = F H`.
#[derive(Debug, Clone, PartialEq)]
pub struct UioDesign {
    pub f: Matrix,
    pub t: Matrix,
    pub h: Matrix,
    pub k1: Matrix,
    pub k2: Matrix,
    /// Unknown-input distribution: horizontal stack of inbound `A_ij`.
    pub e: Matrix,
    tb: Matrix,
    gain_y: Matrix,
}

pub fn design_uio(subsystem: &Subsystem, unknown_inputs: &Matrix, rho: f64) -> Result<UioDesign> {
    let (a, b, c) = (&subsystem.a, &subsystem.b, &subsystem.c);
    let n = subsystem.state_dim();
    if unknown_inputs.nrows() != n {
        return Err(Error::dimension(
            format!("uio of subsystem {}", subsystem.index + 1),
            format!("E has {} rows, state dimension is {n}", unknown_inputs.nrows()),
        ));
    }
    let ce = c * unknown_inputs;
    let rank_e = rank(unknown_inputs);
    let rank_ce = rank(&ce);
    if rank_ce < rank_e {
        return Err(Error::UioNonexistence { rank_ce, rank_e });
    }
    let h = if unknown_inputs.ncols() == 0 {
        Matrix::zeros(n, c.nrows())
    } else {
        unknown_inputs * pseudo_inverse(&ce)
    };
    let t = Matrix::identity(n, n) - &h * c;
    let ta = &t * a;
    let k1 = observer_gain(&ta, c, rho)?;
    let f = &ta - &k1 * c;
    let k2 = &f * &h;
    let design = UioDesign {
        tb: &t * b,
        gain_y: &k1 + &k2,
        f,
        t,
        h,
        k1,
        k2,
        e: unknown_inputs.clone(),
    };
    design.verify(c, rho)?;
    Ok(design)
}

impl UioDesign {
    fn verify(&self, c: &Matrix, rho: f64) -> Result<()> {
        let scale = self.e.amax().max(1.0);
        let decoupling = (&self.h * c * &self.e - &self.e).amax();
        if decoupling > DESIGN_TOL * scale {
            return Err(Error::UioNonexistence {
                rank_ce: rank(&(c * &self.e)),
                rank_e: rank(&self.e),
            });
        }
        let radius = spectral_radius(&self.f);
        if radius >= 1.0 || radius > rho * (1.0 + crate::numerics::GAIN_RTOL) + 1e-12 {
            return Err(Error::GainTarget {
                achieved: radius,
                target: rho,
            });
        }
        Ok(())
    }

    /// `z(0) = T x^(0)`, so that `x^d(0)` agrees with `x^(0)` up to `H y(0)`.
    pub fn initial_state(&self, initial_estimate: &Vector) -> Vector {
        &self.t * initial_estimate
    }

    pub fn estimate(&self, z: &Vector, y: &Vector) -> Vector {
        z + &self.h * y
    }

    pub fn step(&self, z: &Vector, u: &Vector, y: &Vector) -> Vector {
        &self.f * z + &self.tb * u + &self.gain_y * y
    }
}

/// Distributed observer
///
/// ```text
/// x^c+ = A x^c + B u + L (y - C x^c) + sum_j A_ij x^d_j
/// ```
#[derive(Debug, Clone, PartialEq)]
pub struct DistributedObserver {
    pub a: Matrix,
    pub b: Matrix,
    pub c: Matrix,
    pub l: Matrix,
    /// `F^c = A - L C`.
    pub fc: Matrix,
    inbound: Vec<(usize, Matrix)>,
}

pub fn design_distributed(subsystem: &Subsystem, topology: &Topology, rho: f64) -> Result<DistributedObserver> {
    let l = observer_gain(&subsystem.a, &subsystem.c, rho)?;
    let fc = &subsystem.a - &l * &subsystem.c;
    Ok(DistributedObserver {
        a: subsystem.a.clone(),
        b: subsystem.b.clone(),
        c: subsystem.c.clone(),
        l,
        fc,
        inbound: topology
            .inbound(subsystem.index)
            .map(|(j, m)| (j, m.clone()))
            .collect(),
    })
}

impl DistributedObserver {
    pub fn neighbors(&self) -> impl Iterator<Item = usize> + '_ {
        self.inbound.iter().map(|(j, _)| *j)
    }

    /// One step; `received(j)` returns the decentralized estimate sent by `j`.
    pub fn step<'a>(
        &self,
        xc: &Vector,
        u: &Vector,
        y: &Vector,
        received: impl Fn(usize) -> Option<&'a Vector>,
    ) -> Result<Vector> {
        let mut next = &self.a * xc + &self.b * u + &self.l * (y - &self.c * xc);
        for (j, a_ij) in &self.inbound {
            let est = received(*j)
                .ok_or_else(|| Error::Protocol(format!("missing decentralized estimate from node {}", j + 1)))?;
            if est.len() != a_ij.ncols() {
                return Err(Error::Protocol(format!(
                    "estimate from node {} has {} entries, expected {}",
                    j + 1,
                    est.len(),
                    a_ij.ncols()
                )));
            }
            next += a_ij * est;
        }
        Ok(next)
    }
}

/// Runtime state of one node's observer pair.
#[derive(Debug, Clone, PartialEq)]
pub struct ObserverState {
    pub z: Vector,
    pub xhat_d: Vector,
    pub xhat_c: Vector,
}
