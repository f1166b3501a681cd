//! Property bodies shared by the proptest suite and the acceptance runner.
//! Each `check_*` takes generated inputs and fails with a
//! `TestCaseError` describing the violated invariant.

use covsim_core::accommodation::{InputReconstructor, LsEstimator};
use covsim_core::detection::{decide_attack, AlarmSignal};
use covsim_core::model::{measured_output, step_plant, AttackerState, InjectionSignal, Subsystem, Topology};
use covsim_core::numerics::{kernel_and_projection, pseudo_inverse, rank, spectral_radius, stabilizing_gain};
use covsim_core::scenario::{simulate, Designs, RunOptions, ScenarioConfig};
use covsim_core::{Matrix, Vector};
use proptest::prelude::*;
use proptest::test_runner::TestCaseError;

pub type CaseResult = Result<(), TestCaseError>;

fn fail(msg: String) -> CaseResult {
    Err(TestCaseError::fail(msg))
}

pub fn matrix(rows: usize, cols: usize, bound: f64) -> impl Strategy<Value = Matrix> {
    proptest::collection::vec(-bound..bound, rows * cols).prop_map(move |v| Matrix::from_row_slice(rows, cols, &v))
}

pub fn vector(len: usize, bound: f64) -> impl Strategy<Value = Vector> {
    proptest::collection::vec(-bound..bound, len).prop_map(Vector::from_vec)
}

/// Random matrix of bounded shape and prescribed (generic) rank.
pub fn ranked_matrix() -> impl Strategy<Value = Matrix> {
    (1usize..7, 1usize..7)
        .prop_flat_map(|(r, c)| (Just(r), Just(c), 0..=r.min(c)))
        .prop_flat_map(|(r, c, k)| (matrix(r, k, 2.0), matrix(k, c, 2.0)))
        .prop_map(|(l, rt)| l * rt)
}

/// Stack of `n` columns with rank strictly below `n`.
pub fn deficient_stack() -> impl Strategy<Value = Matrix> {
    (2usize..6)
        .prop_flat_map(|n| (Just(n), 1usize..9, 0..n))
        .prop_flat_map(|(n, rows, k)| (matrix(rows, k, 1.0), matrix(k, n, 1.0)))
        .prop_map(|(l, r)| l * r)
}

pub fn check_penrose(m: &Matrix) -> CaseResult {
    let p = pseudo_inverse(m);
    let scale = m.amax().max(1.0) * p.amax().max(1.0);
    let tol = 1e-9 * scale * scale;
    let checks = [
        ("A A+ A = A", (m * &p * m - m).amax()),
        ("A+ A A+ = A+", (&p * m * &p - &p).amax()),
        ("A A+ symmetric", (m * &p - (m * &p).transpose()).amax()),
        ("A+ A symmetric", (&p * m - (&p * m).transpose()).amax()),
    ];
    for (name, err) in checks {
        if err > tol {
            return fail(format!("{name}: error {err:e} for {m}"));
        }
    }
    Ok(())
}

pub fn check_projection(stack: &Matrix) -> CaseResult {
    let n = stack.ncols();
    let pair = kernel_and_projection(stack, n).map_err(|e| TestCaseError::fail(e.to_string()))?;
    let p = &pair.projection;
    let g = pair.kernel_dim();
    if rank(stack) != n - g {
        return fail(format!("rank {} != n - g = {}", rank(stack), n - g));
    }
    let orth = (p * p.transpose() - Matrix::identity(n - g, n - g)).amax();
    let split = (pair.interacting_projector() + pair.kernel_projector() - Matrix::identity(n, n)).amax();
    let kernel = (stack * &pair.kernel).amax();
    let cross = (p * &pair.kernel).amax();
    if orth > 1e-10 || split > 1e-10 || cross > 1e-10 || kernel > 1e-10 * stack.amax().max(1.0) {
        return fail(format!("orth {orth:e} split {split:e} cross {cross:e} kernel {kernel:e}"));
    }
    Ok(())
}

pub fn check_gain(a: &Matrix, b: &Matrix, rho: f64) -> CaseResult {
    let k = stabilizing_gain(a, b, rho).map_err(|e| TestCaseError::fail(format!("generic pair rejected: {e}")))?;
    let achieved = spectral_radius(&(a - b * k));
    if achieved > rho * (1.0 + 1e-9) + 1e-12 {
        return fail(format!("rho(A - BK) = {achieved} > {rho}"));
    }
    Ok(())
}

pub fn check_ls_min_norm(stack: &Matrix, v: &Vector) -> CaseResult {
    let n = stack.ncols();
    let ls = LsEstimator::from_blocks(vec![0], std::slice::from_ref(stack), n).map_err(|e| TestCaseError::fail(e.to_string()))?;
    let alarm = AlarmSignal {
        origin: 0,
        step: 0,
        delta: stack * v,
    };
    let est = ls.estimate(&[alarm]).map_err(|e| TestCaseError::fail(e.to_string()))?;
    let pair = &ls.projection;
    let kernel_part = (pair.kernel.transpose() * &est).amax();
    let projected = (&pair.projection * (&est - v)).amax();
    let scale = v.amax().max(1.0);
    if kernel_part > 1e-10 * scale || projected > 1e-8 * scale {
        return fail(format!("kernel component {kernel_part:e}, projected error {projected:e}"));
    }
    Ok(())
}

/// Losing alarms can never make a node decide.
pub fn check_alarm_monotonicity(raised: &[bool], dropped: &[bool]) -> CaseResult {
    let monitors: Vec<usize> = (0..raised.len()).collect();
    let alarm = |j: usize, on: bool| {
        if on {
            AlarmSignal {
                origin: j,
                step: 0,
                delta: Vector::from_element(2, 1.0),
            }
        } else {
            AlarmSignal::silent(j, 0, 2)
        }
    };
    let full: Vec<AlarmSignal> = raised.iter().enumerate().map(|(j, &r)| alarm(j, r)).collect();
    let lossy: Vec<AlarmSignal> = raised
        .iter()
        .zip(dropped)
        .enumerate()
        .map(|(j, (&r, &d))| alarm(j, r && !d))
        .collect();
    let with_loss = decide_attack(&monitors, &lossy).unwrap();
    let without = decide_attack(&monitors, &full).unwrap();
    if with_loss && !without {
        return fail("dropping links created a decision".into());
    }
    Ok(())
}

/// Scenario-level form: dropped links never create or advance a decision.
pub fn check_link_loss_monotonicity(
    cfg: &ScenarioConfig,
    designs: &Designs,
    thresholds: &[f64],
    dropped: &[(usize, usize)],
) -> CaseResult {
    let base = simulate(cfg, designs, thresholds, &RunOptions::default()).unwrap();
    let options = RunOptions {
        dropped_links: dropped.to_vec(),
        ..RunOptions::default()
    };
    let lossy = simulate(cfg, designs, thresholds, &options).unwrap();
    for i in 0..cfg.len() {
        match (lossy.decision_step(i), base.decision_step(i)) {
            (Some(k), None) => return fail(format!("node {} decides at {k} only with lost links", i + 1)),
            (Some(k), Some(k0)) if k < k0 => {
                return fail(format!("node {} decides at {k} < {k0} with lost links", i + 1))
            }
            _ => {}
        }
    }
    Ok(())
}

/// Measured outputs of an attacked node equal those of an unattacked copy
/// under the same commanded input and neighbour drive.
#[allow(clippy::too_many_arguments)]
pub fn check_covertness(a: &Matrix, b: &Matrix, c: &Matrix, x0: &Vector, inputs: &[Vector], drive: &[Vector], etas: &[f64], onset: usize) -> CaseResult {
    let mut plant = Subsystem::new(0, a.clone(), b.clone(), c.clone(), x0.clone()).unwrap();
    let m = b.ncols();
    let table: Vec<Vec<f64>> = etas.iter().map(|&e| vec![e; m]).collect();
    let mut attacker = AttackerState::covert(&plant, onset, InjectionSignal::Table { values: table });
    let mut twin = x0.clone();
    for (k, (u, w)) in inputs.iter().zip(drive).enumerate() {
        let y = measured_output(&plant, Some(&attacker));
        let y_twin = c * &twin;
        let scale = y_twin.amax().max(1.0);
        if (&y - &y_twin).amax() > 1e-10 * scale {
            return fail(format!("step {k}: outputs differ by {:e}", (&y - &y_twin).amax()));
        }
        let step = attacker.step(k, u);
        plant.x = a * &plant.x + b * &step.applied_input + w;
        twin = a * &twin + b * u + w;
    }
    Ok(())
}

/// One step of the network update equals the global block-matrix oracle.
pub fn check_global_step(cfg: &ScenarioConfig, states: &[Vector], inputs: &[Vector]) -> CaseResult {
    let mut subs = cfg.subsystems.clone();
    for (s, x) in subs.iter_mut().zip(states) {
        s.x = x.clone();
    }
    let got = step_plant(&subs, &cfg.topology, inputs).unwrap();
    let want = super::global_step(cfg, states, inputs);
    for (i, (g, w)) in got.iter().zip(&want).enumerate() {
        if (g - w).amax() > 1e-12 * w.amax().max(1.0) {
            return fail(format!("node {} differs by {:e}", i + 1, (g - w).amax()));
        }
    }
    Ok(())
}

/// With frozen (open-loop) inputs, the attack-induced deviation is linear
/// in the injected signal.
pub fn check_linearity(topology: &Topology, subs: &[Subsystem], eta: f64, steps: usize) -> CaseResult {
    let run = |scale: f64| {
        let mut s = subs.to_vec();
        let mut att = AttackerState::covert(&s[0], 0, InjectionSignal::constant(&vec![eta * scale; s[0].input_dim()]));
        for k in 0..steps {
            let mut inputs: Vec<Vector> = s.iter().map(|x| Vector::from_element(x.input_dim(), 0.1)).collect();
            inputs[0] = att.step(k, &inputs[0]).applied_input;
            let next = step_plant(&s, topology, &inputs).unwrap();
            for (x, n) in s.iter_mut().zip(next) {
                x.x = n;
            }
        }
        s.into_iter().map(|x| x.x).collect::<Vec<_>>()
    };
    let (nominal, single, double) = (run(0.0), run(1.0), run(2.0));
    for i in 0..subs.len() {
        let d1 = &single[i] - &nominal[i];
        let d2 = &double[i] - &nominal[i];
        if (&d2 - &d1 * 2.0).amax() > 1e-9 * d2.amax().max(1.0) {
            return fail(format!("node {} deviation not linear", i + 1));
        }
    }
    Ok(())
}

/// `eta^(k) = eta(k - r0 - 1)` once the window is full, for any input.
pub fn check_delay_law(a: &Matrix, b: &Matrix, stack: &Matrix, etas: &[f64]) -> CaseResult {
    let n = a.nrows();
    let pair = kernel_and_projection(stack, n).unwrap();
    let mut rec = InputReconstructor::build(a, b, &pair, None).map_err(|e| TestCaseError::fail(e.to_string()))?;
    let delay = rec.delay();
    let mut x = Vector::zeros(n);
    for (k, &eta) in etas.iter().enumerate() {
        // Feeding x~(k) plays the role of the LS sample of step k + 1.
        rec.push(&x);
        let out = rec.estimate();
        if out.ready {
            let want = etas[k + 1 - delay];
            if (out.eta[0] - want).abs() > 1e-8 * want.abs().max(1.0) {
                return fail(format!("step {k}: eta^ = {}, eta(k - {delay}) = {want}", out.eta[0]));
            }
        }
        x = a * &x + b * eta;
    }
    Ok(())
}
