//! Offline synthesis of every gain and estimator a scenario needs.

use crate::accommodation::{neighbor_decoupling_gain, ForwardModel, InputReconstructor, LsEstimator};
use crate::detection::ResidualGenerator;
use crate::numerics::{placed_gain, spectral_radius, stabilizing_gain};
use crate::observers::{design_distributed, design_uio, DistributedObserver, UioDesign};
use crate::{Error, Matrix, Result};

use super::config::ScenarioConfig;

#[derive(Debug, Clone)]
pub struct NodeDesign {
    /// `u = K x`, so the local closed loop is `A + B K`.
    pub controller: Matrix,
    /// `(j, K_ij)` over the neighbours.
    pub decoupling: Vec<(usize, Matrix)>,
    pub uio: UioDesign,
    pub observer: DistributedObserver,
    pub residual: ResidualGenerator,
    pub ls: LsEstimator,
    pub reconstructor: std::result::Result<InputReconstructor, String>,
    pub forward: ForwardModel,
    /// `rho(A + B K)`.
    pub controller_radius: f64,
}

impl NodeDesign {
    pub fn uio_radius(&self) -> f64 {
        spectral_radius(&self.uio.f)
    }

    pub fn observer_radius(&self) -> f64 {
        spectral_radius(&self.observer.fc)
    }
}

#[derive(Debug, Clone)]
pub struct Designs {
    pub nodes: Vec<NodeDesign>,
    /// Spectral radius of the interconnected state-feedback loop.
    pub network_radius: f64,
}

impl Designs {
    /// Synthesize all designs. Failures at attacked nodes surface here;
    /// reconstruction failures elsewhere are kept and reported only if that
    /// node ever decides it is attacked.
    pub fn synthesize(cfg: &ScenarioConfig) -> Result<Self> {
        let topo = &cfg.topology;
        let mut nodes = Vec::with_capacity(cfg.len());
        for (i, sub) in cfg.subsystems.iter().enumerate() {
            let n = sub.state_dim();
            let feedback = match &cfg.design.controller_poles {
                Some(poles) => placed_gain(&sub.a, &sub.b, poles)?,
                None => stabilizing_gain(&sub.a, &sub.b, cfg.design.controller_rho)?,
            };
            let controller = -feedback;
            let decoupling = topo
                .inbound(i)
                .map(|(j, a_ij)| (j, neighbor_decoupling_gain(&sub.b, a_ij)))
                .collect();
            let uio = design_uio(sub, &topo.inbound_stack(i, n), cfg.design.uio_rho)?;
            let observer = design_distributed(sub, topo, cfg.design.observer_rho)?;
            let residual = ResidualGenerator::new(&sub.c, &observer.fc);
            let mut ls = LsEstimator::for_node(topo, i, n)?;
            let attacked = cfg.attack_on(i).is_some();
            if attacked && cfg.accommodation.enabled {
                if let Some(declared) = cfg.accommodation.regime {
                    ls = ls.with_declared_regime(declared)?;
                }
            }
            let reconstructor = InputReconstructor::build(&sub.a, &sub.b, &ls.projection, cfg.accommodation.window);
            let reconstructor = match reconstructor {
                Err(e) if attacked && cfg.accommodation.enabled => return Err(e),
                Err(e @ Error::Config { .. }) => return Err(e),
                other => other.map_err(|e| e.to_string()),
            };
            let forward = ForwardModel::new(&sub.a, &sub.b, &ls.projection);
            nodes.push(NodeDesign {
                controller_radius: spectral_radius(&(&sub.a + &sub.b * &controller)),
                controller,
                decoupling,
                uio,
                observer,
                residual,
                ls,
                reconstructor,
                forward,
            });
        }
        let network_radius = spectral_radius(&network_closed_loop(cfg, &nodes));
        Ok(Self { nodes, network_radius })
    }
}

/// Global matrix with blocks `A_i + B_i K_i` and `A_ij + B_i K_ij`.
pub fn network_closed_loop(cfg: &ScenarioConfig, nodes: &[NodeDesign]) -> Matrix {
    let offsets: Vec<usize> = cfg
        .subsystems
        .iter()
        .scan(0, |acc, s| {
            let start = *acc;
            *acc += s.state_dim();
            Some(start)
        })
        .collect();
    let total: usize = cfg.subsystems.iter().map(|s| s.state_dim()).sum();
    let mut out = Matrix::zeros(total, total);
    for (i, (sub, node)) in cfg.subsystems.iter().zip(nodes).enumerate() {
        let n = sub.state_dim();
        out.view_mut((offsets[i], offsets[i]), (n, n))
            .copy_from(&(&sub.a + &sub.b * &node.controller));
        for ((j, a_ij), (_, k_ij)) in cfg.topology.inbound(i).zip(&node.decoupling) {
            let nj = a_ij.ncols();
            out.view_mut((offsets[i], offsets[j]), (n, nj))
                .copy_from(&(a_ij + &sub.b * k_ij));
        }
    }
    out
}
