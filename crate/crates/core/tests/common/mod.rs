//! Independent oracles shared by the integration, property and acceptance
//! suites. Nothing here calls into the library's numerics; every reference
//! value is rebuilt from the raw matrices and the logged trace.
#![allow(dead_code)]

pub mod criteria;
pub mod props;

use covsim_core::scenario::{load_scenario, ScenarioConfig, Trace};
use covsim_core::{Matrix, Vector};

pub const VICTIM: usize = 2;
pub const ONSET: usize = 20;

pub fn section5(name: &str) -> ScenarioConfig {
    load_scenario(name).expect("shipped scenario loads")
}

/// Copy of a scenario with a nonzero initial plant state, so that every
/// observer error has a transient to follow.
pub fn with_transient(mut cfg: ScenarioConfig) -> ScenarioConfig {
    for (i, sub) in cfg.subsystems.iter_mut().enumerate() {
        let s = i as f64 + 1.0;
        sub.x = Vector::from_fn(sub.state_dim(), |r, _| if r % 2 == 0 { 0.5 * s } else { -0.3 * s });
    }
    cfg
}

/// `x(0..K)` of one node.
pub fn series(trace: &Trace, node: usize, field: impl Fn(&covsim_core::scenario::StepRecord) -> Vector) -> Vec<Vector> {
    trace.node(node).map(field).collect()
}

/// One synchronous network step from the stacked global matrices
/// `x+ = AA x + BB u`.
pub fn global_step(cfg: &ScenarioConfig, states: &[Vector], inputs: &[Vector]) -> Vec<Vector> {
    let dims: Vec<usize> = cfg.subsystems.iter().map(|s| s.state_dim()).collect();
    let ins: Vec<usize> = cfg.subsystems.iter().map(|s| s.input_dim()).collect();
    let off = |d: &[usize], i: usize| d[..i].iter().sum::<usize>();
    let (nx, nu) = (dims.iter().sum::<usize>(), ins.iter().sum::<usize>());
    let mut aa = Matrix::zeros(nx, nx);
    let mut bb = Matrix::zeros(nx, nu);
    for (i, sub) in cfg.subsystems.iter().enumerate() {
        for r in 0..dims[i] {
            for c in 0..dims[i] {
                aa[(off(&dims, i) + r, off(&dims, i) + c)] = sub.a[(r, c)];
            }
            for c in 0..ins[i] {
                bb[(off(&dims, i) + r, off(&ins, i) + c)] = sub.b[(r, c)];
            }
        }
        for &j in cfg.topology.neighbors(i) {
            let a_ij = cfg.topology.coupling(i, j).unwrap();
            for r in 0..dims[i] {
                for c in 0..dims[j] {
                    aa[(off(&dims, i) + r, off(&dims, j) + c)] = a_ij[(r, c)];
                }
            }
        }
    }
    let mut x = Vector::zeros(nx);
    for (i, s) in states.iter().enumerate() {
        x.rows_mut(off(&dims, i), dims[i]).copy_from(s);
    }
    let mut u = Vector::zeros(nu);
    for (i, s) in inputs.iter().enumerate() {
        u.rows_mut(off(&ins, i), ins[i]).copy_from(s);
    }
    let next = aa * x + bb * u;
    (0..dims.len())
        .map(|i| next.rows(off(&dims, i), dims[i]).into_owned())
        .collect()
}

/// Outputs of an unattacked copy of `node` driven by the logged commanded
/// input and the logged neighbour states.
pub fn local_twin_outputs(cfg: &ScenarioConfig, trace: &Trace, node: usize) -> Vec<Vector> {
    let sub = &cfg.subsystems[node];
    let mut x = sub.x.clone();
    let mut out = Vec::with_capacity(trace.horizon());
    for k in 0..trace.horizon() {
        out.push(&sub.c * &x);
        let rec = trace.record(k, node);
        let mut next = &sub.a * &x + &sub.b * &rec.u;
        for &j in cfg.topology.neighbors(node) {
            next += cfg.topology.coupling(node, j).unwrap() * &trace.record(k, j).x;
        }
        x = next;
    }
    out
}

/// Brute-force reconstruction over the whole horizon: simulate the
/// attacker model from zero at `onset` under the logged `eta`, stack every
/// output `m x~(t)` for `t` in `onset+1..K`, and solve for all inputs at
/// once by a minimum-norm least-squares solve. Returns `eta(onset..K-1)`.
pub fn full_horizon_inversion(a: &Matrix, b: &Matrix, m: &Matrix, etas: &[Vector], onset: usize) -> Vec<Vector> {
    let (n, inputs, p) = (a.nrows(), b.ncols(), m.nrows());
    let steps = etas.len() - onset;
    let mut x = Vector::zeros(n);
    let mut outputs = Vec::with_capacity(steps);
    for eta in &etas[onset..] {
        x = a * &x + b * eta;
        outputs.push(m * &x);
    }
    // Row block t (output at onset + t + 1) sees inputs tau <= t through
    // m a^(t - tau) b.
    let mut markov = Vec::with_capacity(steps);
    let mut power = Matrix::identity(n, n);
    for _ in 0..steps {
        markov.push(m * &power * b);
        power = a * power;
    }
    let mut big = Matrix::zeros(steps * p, steps * inputs);
    let mut rhs = Vector::zeros(steps * p);
    for t in 0..steps {
        rhs.rows_mut(t * p, p).copy_from(&outputs[t]);
        for tau in 0..=t {
            big.view_mut((t * p, tau * inputs), (p, inputs)).copy_from(&markov[t - tau]);
        }
    }
    let solution = big.svd(true, true).solve(&rhs, 1e-12).expect("svd solve");
    (0..steps)
        .map(|t| solution.rows(t * inputs, inputs).into_owned())
        .collect()
}

/// `max_k ||e(k+1) - F e(k)||` over a sequence.
pub fn recursion_residual(errors: &[Vector], f: &Matrix) -> f64 {
    errors
        .windows(2)
        .map(|w| (&w[1] - f * &w[0]).amax())
        .fold(0.0, f64::max)
}

/// Residual of the attacked distributed-error recursion at `node`, driven
/// by the neighbours' true decentralized errors.
pub fn distributed_recursion_residual(cfg: &ScenarioConfig, trace: &Trace, node: usize, fc: &Matrix) -> f64 {
    let mut worst: f64 = 0.0;
    for k in 0..trace.horizon() - 1 {
        let now = trace.record(k, node);
        let next = trace.record(k + 1, node);
        let mut predicted = fc * &now.eps_tilde_c;
        for &j in cfg.topology.neighbors(node) {
            predicted += cfg.topology.coupling(node, j).unwrap() * trace.record(k, j).eps_d();
        }
        worst = worst.max((&next.eps_tilde_c - predicted).amax());
    }
    worst
}

/// First step at which the lagged attacker-state estimate at `node` is
/// within `tol` of the truth.
pub fn time_to_accuracy(trace: &Trace, node: usize, tol: f64) -> Option<usize> {
    (1..trace.horizon()).find(|&k| {
        let rec = trace.record(k, node);
        rec.phase != covsim_core::accommodation::AccommodationPhase::Inactive
            && (&rec.xhat_tilde - &trace.record(k - 1, node).x_tilde).norm() < tol
    })
}
