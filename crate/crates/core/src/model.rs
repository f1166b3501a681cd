//! Interconnected plant, network topology and the covert attacker.

use serde::{Deserialize, Serialize};

use crate::numerics::vstack;
use crate::{Error, Matrix, Result, Vector};

/// One node of the network: `x+ = A x + B u + sum_j A_ij x_j`, `y = C x`.
#[derive(Debug, Clone, PartialEq)]
pub struct Subsystem {
    pub index: usize,
    pub a: Matrix,
    pub b: Matrix,
    pub c: Matrix,
    pub x: Vector,
}

impl Subsystem {
    pub fn new(index: usize, a: Matrix, b: Matrix, c: Matrix, x0: Vector) -> Result<Self> {
        let path = format!("subsystems[{index}]");
        let n = a.nrows();
        if n == 0 || a.ncols() != n {
            return Err(Error::dimension(
                format!("{path}.a"),
                format!("A must be square and non-empty, got {}x{}", a.nrows(), a.ncols()),
            ));
        }
        if b.nrows() != n || b.ncols() == 0 {
            return Err(Error::dimension(
                format!("{path}.b"),
                format!("B must be {n}xm with m >= 1, got {}x{}", b.nrows(), b.ncols()),
            ));
        }
        if c.ncols() != n || c.nrows() == 0 {
            return Err(Error::dimension(
                format!("{path}.c"),
                format!("C must be px{n} with p >= 1, got {}x{}", c.nrows(), c.ncols()),
            ));
        }
        if x0.len() != n {
            return Err(Error::dimension(
                format!("{path}.x0"),
                format!("initial state has {} entries, expected {n}", x0.len()),
            ));
        }
        Ok(Self { index, a, b, c, x: x0 })
    }

    pub fn state_dim(&self) -> usize {
        self.a.nrows()
    }

    pub fn input_dim(&self) -> usize {
        self.b.ncols()
    }

    pub fn output_dim(&self) -> usize {
        self.c.nrows()
    }

    /// True (unattacked) output `C x`.
    pub fn output(&self) -> Vector {
        &self.c * &self.x
    }
}

/// Directed neighbour sets with their interconnection matrices.
///
/// `neighbors(i)` lists the nodes `j` whose state enters node `i` through
/// `A_ij`. Indices are zero-based.
#[derive(Debug, Clone, PartialEq)]
pub struct Topology {
    neighbors: Vec<Vec<usize>>,
    couplings: Vec<Vec<Matrix>>,
}

impl Topology {
    /// `couplings[i][k]` is `A_ij` for `j = neighbors[i][k]`; `dims[i]` is `n_i`.
    pub fn new(neighbors: Vec<Vec<usize>>, couplings: Vec<Vec<Matrix>>, dims: &[usize]) -> Result<Self> {
        let count = dims.len();
        if neighbors.len() != count || couplings.len() != count {
            return Err(Error::config(
                "topology",
                format!(
                    "{} neighbour sets and {} coupling lists for {count} subsystems",
                    neighbors.len(),
                    couplings.len()
                ),
            ));
        }
        for (i, (set, blocks)) in neighbors.iter().zip(&couplings).enumerate() {
            if set.len() != blocks.len() {
                return Err(Error::config(
                    format!("topology.neighbors[{i}]"),
                    "neighbour list and coupling list differ in length",
                ));
            }
            for (k, (&j, block)) in set.iter().zip(blocks).enumerate() {
                if j >= count {
                    return Err(Error::config(
                        format!("topology.neighbors[{i}][{k}]"),
                        format!("neighbour index {} out of range 1..={count}", j + 1),
                    ));
                }
                if j == i {
                    return Err(Error::config(
                        format!("topology.neighbors[{i}][{k}]"),
                        format!("self-loop on subsystem {}", i + 1),
                    ));
                }
                if set[..k].contains(&j) {
                    return Err(Error::config(
                        format!("topology.neighbors[{i}][{k}]"),
                        format!("duplicate neighbour {}", j + 1),
                    ));
                }
                if block.shape() != (dims[i], dims[j]) {
                    return Err(Error::dimension(
                        format!("coupling ({}, {})", i + 1, j + 1),
                        format!(
                            "A_ij must be {}x{}, got {}x{}",
                            dims[i],
                            dims[j],
                            block.nrows(),
                            block.ncols()
                        ),
                    ));
                }
            }
        }
        Ok(Self { neighbors, couplings })
    }

    pub fn len(&self) -> usize {
        self.neighbors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.neighbors.is_empty()
    }

    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.neighbors[i]
    }

    /// Inbound couplings `(j, A_ij)` of node `i`.
    pub fn inbound(&self, i: usize) -> impl Iterator<Item = (usize, &Matrix)> {
        self.neighbors[i].iter().copied().zip(self.couplings[i].iter())
    }

    pub fn coupling(&self, i: usize, j: usize) -> Option<&Matrix> {
        self.neighbors[i]
            .iter()
            .position(|&k| k == j)
            .map(|k| &self.couplings[i][k])
    }

    /// Nodes physically influenced by `i`, i.e. `{j : i in N_j}`, ascending.
    pub fn monitors(&self, i: usize) -> Vec<usize> {
        (0..self.len())
            .filter(|&j| self.neighbors[j].contains(&i))
            .collect()
    }

    /// Outbound couplings `(j, A_ji)` over the monitors of `i`.
    pub fn outbound(&self, i: usize) -> Vec<(usize, &Matrix)> {
        self.monitors(i)
            .into_iter()
            .map(|j| (j, self.coupling(j, i).expect("monitor has coupling")))
            .collect()
    }

    /// Aggregate outbound matrix: vertical stack of `A_ji` over the monitors.
    pub fn aggregate_outbound(&self, i: usize, n_i: usize) -> Matrix {
        let blocks: Vec<&Matrix> = self.outbound(i).into_iter().map(|(_, m)| m).collect();
        vstack(&blocks, n_i)
    }

    /// Horizontal stack of inbound `A_ij`, the unknown-input matrix of node `i`.
    pub fn inbound_stack(&self, i: usize, n_i: usize) -> Matrix {
        let blocks: Vec<&Matrix> = self.couplings[i].iter().collect();
        crate::numerics::hstack(&blocks, n_i)
    }

    pub fn is_symmetric(&self) -> bool {
        (0..self.len()).all(|i| self.neighbors[i].iter().all(|&j| self.neighbors[j].contains(&i)))
    }

    /// Copy with the directed edge `j -> i` (`j` in `N_i`) removed.
    pub fn without_edge(&self, i: usize, j: usize) -> Self {
        let mut out = self.clone();
        if let Some(k) = out.neighbors[i].iter().position(|&x| x == j) {
            out.neighbors[i].remove(k);
            out.couplings[i].remove(k);
        }
        out
    }
}

/// Advance every subsystem simultaneously from the pre-step states.
pub fn step_plant(subsystems: &[Subsystem], topology: &Topology, inputs: &[Vector]) -> Result<Vec<Vector>> {
    if inputs.len() != subsystems.len() || topology.len() != subsystems.len() {
        return Err(Error::dimension(
            "step_plant",
            format!(
                "{} subsystems, {} inputs, topology over {} nodes",
                subsystems.len(),
                inputs.len(),
                topology.len()
            ),
        ));
    }
    subsystems
        .iter()
        .enumerate()
        .map(|(i, s)| {
            if inputs[i].len() != s.input_dim() {
                return Err(Error::dimension(
                    format!("input of subsystem {}", i + 1),
                    format!("expected {} entries, got {}", s.input_dim(), inputs[i].len()),
                ));
            }
            let mut next = &s.a * &s.x + &s.b * &inputs[i];
            for (j, a_ij) in topology.inbound(i) {
                next += a_ij * &subsystems[j].x;
            }
            Ok(next)
        })
        .collect()
}

/// Injected-input profile, evaluated at the offset from the attack onset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InjectionSignal {
    /// Steady offset from the onset on.
    Constant { value: Vec<f64> },
    /// Zero until `at` steps after onset, then `value`.
    Step { value: Vec<f64>, at: usize },
    /// Piecewise-constant value; each segment starts `from` steps after onset.
    Piecewise { segments: Vec<Segment> },
    /// `offset + amplitude * sin(2 pi t / period + phase)`.
    Sinusoid {
        amplitude: Vec<f64>,
        period: f64,
        #[serde(default)]
        phase: f64,
        #[serde(default)]
        offset: Option<Vec<f64>>,
    },
    /// Arbitrary sample table; the last row is held.
    Table { values: Vec<Vec<f64>> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Segment {
    pub from: usize,
    pub value: Vec<f64>,
}

impl InjectionSignal {
    pub fn constant(value: &[f64]) -> Self {
        InjectionSignal::Constant { value: value.to_vec() }
    }

    pub fn validate(&self, m: usize) -> std::result::Result<(), String> {
        let check = |v: &[f64], what: &str| {
            if v.len() != m {
                Err(format!("{what} has {} entries, input dimension is {m}", v.len()))
            } else if v.iter().any(|x| !x.is_finite()) {
                Err(format!("{what} is not finite"))
            } else {
                Ok(())
            }
        };
        match self {
            InjectionSignal::Constant { value } | InjectionSignal::Step { value, .. } => check(value, "value"),
            InjectionSignal::Piecewise { segments } => {
                if segments.windows(2).any(|w| w[1].from <= w[0].from) {
                    return Err("segments must start at increasing offsets".into());
                }
                segments.iter().try_for_each(|s| check(&s.value, "segment value"))
            }
            InjectionSignal::Sinusoid {
                amplitude,
                period,
                offset,
                ..
            } => {
                if !(*period > 0.0) {
                    return Err("period must be positive".into());
                }
                check(amplitude, "amplitude")?;
                offset.as_deref().map_or(Ok(()), |o| check(o, "offset"))
            }
            InjectionSignal::Table { values } => {
                if values.is_empty() {
                    return Err("table is empty".into());
                }
                values.iter().try_for_each(|v| check(v, "table row"))
            }
        }
    }

    /// Value `offset` steps after the onset.
    pub fn eval(&self, offset: usize, m: usize) -> Vector {
        match self {
            InjectionSignal::Constant { value } => Vector::from_column_slice(value),
            InjectionSignal::Step { value, at } => {
                if offset >= *at {
                    Vector::from_column_slice(value)
                } else {
                    Vector::zeros(m)
                }
            }
            InjectionSignal::Piecewise { segments } => segments
                .iter()
                .rev()
                .find(|s| s.from <= offset)
                .map(|s| Vector::from_column_slice(&s.value))
                .unwrap_or_else(|| Vector::zeros(m)),
            InjectionSignal::Sinusoid {
                amplitude,
                period,
                phase,
                offset: bias,
            } => {
                let angle = 2.0 * std::f64::consts::PI * offset as f64 / period + phase;
                let mut v = Vector::from_column_slice(amplitude) * angle.sin();
                if let Some(b) = bias {
                    v += Vector::from_column_slice(b);
                }
                v
            }
            InjectionSignal::Table { values } => {
                let row = &values[offset.min(values.len() - 1)];
                Vector::from_column_slice(row)
            }
        }
    }
}

/// Outcome of one attacker step.
#[derive(Debug, Clone, PartialEq)]
pub struct AttackStep {
    /// Input actually reaching the plant, `u + eta`.
    pub applied_input: Vector,
    pub eta: Vector,
    /// Output-masking signal `C~ x~` at the current step.
    pub gamma: Vector,
    pub next_state: Vector,
}

/// Covert attacker: an internal copy of the target model driven by `eta`,
/// whose output is subtracted from the measurements.
#[derive(Debug, Clone, PartialEq)]
pub struct AttackerState {
    pub target: usize,
    pub a: Matrix,
    pub b: Matrix,
    pub c: Matrix,
    pub state: Vector,
    pub onset: usize,
    pub signal: InjectionSignal,
}

impl AttackerState {
    /// Attacker with perfect model knowledge and a zero internal state.
    pub fn covert(target: &Subsystem, onset: usize, signal: InjectionSignal) -> Self {
        Self {
            target: target.index,
            a: target.a.clone(),
            b: target.b.clone(),
            c: target.c.clone(),
            state: Vector::zeros(target.state_dim()),
            onset,
            signal,
        }
    }

    pub fn input_dim(&self) -> usize {
        self.b.ncols()
    }

    pub fn eta(&self, k: usize) -> Vector {
        if k < self.onset {
            Vector::zeros(self.input_dim())
        } else {
            self.signal.eval(k - self.onset, self.input_dim())
        }
    }

    pub fn gamma(&self) -> Vector {
        &self.c * &self.state
    }

    /// Transform the commanded input at step `k` and advance the internal model.
    pub fn step(&mut self, k: usize, u: &Vector) -> AttackStep {
        let gamma = self.gamma();
        if k < self.onset {
            self.state.fill(0.0);
            return AttackStep {
                applied_input: u.clone(),
                eta: Vector::zeros(self.input_dim()),
                gamma,
                next_state: self.state.clone(),
            };
        }
        let eta = self.eta(k);
        let next_state = &self.a * &self.state + &self.b * &eta;
        self.state = next_state.clone();
        AttackStep {
            applied_input: u + &eta,
            eta,
            gamma,
            next_state,
        }
    }
}

/// Measurement received by the local unit, `C x - gamma`.
pub fn measured_output(subsystem: &Subsystem, attacker: Option<&AttackerState>) -> Vector {
    match attacker {
        Some(att) => subsystem.output() - att.gamma(),
        None => subsystem.output(),
    }
}
