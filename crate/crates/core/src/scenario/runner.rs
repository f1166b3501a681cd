//! Deterministic closed-loop runner.
//!
//! One tick `k`, for all nodes synchronously:
//!
//! 1. read `y~(k)`, form `x^d(k) = z(k) + H y~(k)`;
//! 2. compute the received distributed error, its lagged aggregate error
//!    and the alarm;
//! 3. exchange estimates and alarms;
//! 4. update the latching decisions;
//! 5. from the tick after a decision, run LS, input reconstruction and the
//!    forward model;
//! 6. form the control law from the exchanged estimates;
//! 7. let the attacker transform the input;
//! 8. step the plant, 9. the observers, 10. the forward models.

use crate::accommodation::{accommodated_control, overlapping_decision, Accommodator};
use crate::detection::{calibrate_thresholds, compute_d, emit_alarm, AlarmSignal, Calibration, DetectionState};
use crate::model::{measured_output, step_plant, AttackerState, Subsystem};
use crate::{Result, Vector};

use super::config::{ScenarioConfig, Thresholds};
use super::design::Designs;
use super::trace::{StepRecord, Trace};

#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunOptions {
    /// Communication links `(receiver, origin)` whose alarms are lost; a
    /// lost alarm arrives silent.
    pub dropped_links: Vec<(usize, usize)>,
    /// Calibrate even if the scenario lists explicit thresholds.
    pub force_calibration: bool,
}

#[derive(Debug, Clone)]
pub struct ScenarioRun {
    pub config: ScenarioConfig,
    pub designs: Designs,
    pub thresholds: Vec<f64>,
    pub warnings: Vec<String>,
    pub trace: Trace,
}

/// Synthesize, calibrate and run.
pub fn run(config: &ScenarioConfig) -> Result<ScenarioRun> {
    run_with(config, &RunOptions::default())
}

pub fn run_with(config: &ScenarioConfig, options: &RunOptions) -> Result<ScenarioRun> {
    let designs = Designs::synthesize(config)?;
    let (thresholds, warnings) = resolve_thresholds(config, &designs, options)?;
    let trace = simulate(config, &designs, &thresholds, options)?;
    Ok(ScenarioRun {
        config: config.clone(),
        designs,
        thresholds,
        warnings,
        trace,
    })
}

/// Thresholds in effect for a run; infinite when detection is disabled.
pub fn resolve_thresholds(
    config: &ScenarioConfig,
    designs: &Designs,
    options: &RunOptions,
) -> Result<(Vec<f64>, Vec<String>)> {
    if !config.detection.enabled {
        return Ok((vec![f64::INFINITY; config.len()], Vec::new()));
    }
    match (&config.detection.thresholds, options.force_calibration) {
        (Thresholds::Explicit(t), false) => Ok((t.clone(), Vec::new())),
        _ => {
            let cal = calibrate(config, designs)?;
            Ok((cal.thresholds, cal.warnings))
        }
    }
}

/// Calibrate on an attack-free twin over `[calibration_start, first onset)`.
pub fn calibrate(config: &ScenarioConfig, designs: &Designs) -> Result<Calibration> {
    let twin = config.attack_free();
    let silent = vec![f64::INFINITY; config.len()];
    let trace = simulate(&twin, designs, &silent, &RunOptions::default())?;
    let norms: Vec<Vec<f64>> = (0..config.len())
        .map(|i| trace.node(i).map(|r| r.error_norm).collect())
        .collect();
    let policy = config.detection.policy;
    Ok(calibrate_thresholds(
        &norms,
        policy.window_start..config.first_onset(),
        &policy,
    ))
}

struct NodeRuntime {
    z: Vector,
    xhat_c: Vector,
    prev_error: Option<Vector>,
    detection: DetectionState,
    accommodator: Accommodator,
}

/// Run the closed loop with fixed designs and thresholds.
pub fn simulate(config: &ScenarioConfig, designs: &Designs, thresholds: &[f64], options: &RunOptions) -> Result<Trace> {
    let n_nodes = config.len();
    let topo = &config.topology;
    let mut plant: Vec<Subsystem> = config.subsystems.clone();
    let mut attackers: Vec<Option<AttackerState>> = (0..n_nodes)
        .map(|i| {
            config
                .attack_on(i)
                .map(|a| AttackerState::covert(&plant[i], a.onset, a.signal.clone()))
        })
        .collect();
    let mut nodes: Vec<NodeRuntime> = designs
        .nodes
        .iter()
        .enumerate()
        .map(|(i, d)| NodeRuntime {
            z: d.uio.initial_state(&config.initial_estimates[i]),
            xhat_c: config.initial_estimates[i].clone(),
            prev_error: None,
            detection: DetectionState::new(i, topo.monitors(i)),
            accommodator: Accommodator::new(
                d.ls.clone(),
                d.reconstructor.clone(),
                d.forward.clone(),
                plant[i].input_dim(),
            ),
        })
        .collect();

    let mut trace = Trace::new(n_nodes);
    trace.records.reserve(config.horizon * n_nodes);
    for k in 0..config.horizon {
        // 1-2: local estimates, errors and alarms.
        let mut y = Vec::with_capacity(n_nodes);
        let mut xhat_d = Vec::with_capacity(n_nodes);
        let mut errors = Vec::with_capacity(n_nodes);
        let mut alarms = Vec::with_capacity(n_nodes);
        for i in 0..n_nodes {
            let d = &designs.nodes[i];
            let node = &nodes[i];
            let yi = measured_output(&plant[i], attackers[i].as_ref());
            let xd = d.uio.estimate(&node.z, &yi);
            let err = d.residual.received_error(&yi, &node.xhat_c, &xd);
            let lagged = compute_d(&err, node.prev_error.as_ref(), &d.observer.fc);
            alarms.push(emit_alarm(
                i,
                k,
                err.norm(),
                thresholds[i],
                lagged.as_ref(),
                plant[i].state_dim(),
            ));
            y.push(yi);
            xhat_d.push(xd);
            errors.push(err);
        }

        // 3-4: exchange and decide.
        let received: Vec<Vec<AlarmSignal>> = (0..n_nodes)
            .map(|i| {
                alarms
                    .iter()
                    .map(|a| {
                        if options.dropped_links.contains(&(i, a.origin)) {
                            AlarmSignal::silent(a.origin, a.step, a.delta.len())
                        } else {
                            a.clone()
                        }
                    })
                    .collect()
            })
            .collect();
        for (i, node) in nodes.iter_mut().enumerate() {
            node.detection.update(k, &received[i])?;
        }
        let decided: Vec<bool> = nodes.iter().map(|n| n.detection.is_decided()).collect();

        // 5: accommodation, starting the tick after the decision.
        if config.accommodation.enabled {
            for (i, node) in nodes.iter_mut().enumerate() {
                let Some(at) = node.detection.decided_at else { continue };
                if k <= at {
                    continue;
                }
                if overlapping_decision(topo, i, &decided) {
                    node.accommodator.refuse();
                } else {
                    node.accommodator.update(k, &received[i])?;
                }
            }
        }

        // 6: control from the exchanged estimates.
        let shared: Vec<Vector> = (0..n_nodes)
            .map(|i| {
                let corrected = config.accommodation.share_corrected_estimate;
                if corrected {
                    &xhat_d[i] + nodes[i].accommodator.state.applied_state()
                } else {
                    xhat_d[i].clone()
                }
            })
            .collect();
        let mut u = Vec::with_capacity(n_nodes);
        for i in 0..n_nodes {
            let d = &designs.nodes[i];
            let acc = &nodes[i].accommodator.state;
            let neighbor_terms = d.decoupling.iter().map(|(j, k_ij)| (k_ij, &shared[*j]));
            u.push(accommodated_control(
                &d.controller,
                &xhat_d[i],
                &acc.applied_state(),
                neighbor_terms,
                &acc.applied_input(),
            ));
        }

        // 7: attack, then log the tick.
        let mut applied = Vec::with_capacity(n_nodes);
        for i in 0..n_nodes {
            let x_tilde = attackers[i]
                .as_ref()
                .map_or_else(|| Vector::zeros(plant[i].state_dim()), |a| a.state.clone());
            let (u_applied, eta) = match attackers[i].as_mut() {
                Some(att) => {
                    let s = att.step(k, &u[i]);
                    (s.applied_input, s.eta)
                }
                None => (u[i].clone(), Vector::zeros(plant[i].input_dim())),
            };
            let node = &nodes[i];
            let acc = &node.accommodator.state;
            let eps_tilde_c = &plant[i].x - &x_tilde - &node.xhat_c;
            trace.records.push(StepRecord {
                step: k,
                node: i,
                x: plant[i].x.clone(),
                x_tilde,
                y_meas: y[i].clone(),
                xhat_d: xhat_d[i].clone(),
                xhat_c: node.xhat_c.clone(),
                eps_tilde_c,
                received_error: errors[i].clone(),
                error_norm: errors[i].norm(),
                residual_norm: designs.nodes[i].residual.residual(&y[i], &node.xhat_c).norm(),
                threshold: thresholds[i],
                alarm: alarms[i].is_raised(),
                delta: alarms[i].delta.clone(),
                decided: decided[i],
                u: u[i].clone(),
                u_applied: u_applied.clone(),
                eta,
                eta_hat: acc.eta_hat.clone(),
                xhat_tilde: acc.xhat_tilde.clone(),
                shared_estimate: shared[i].clone(),
                phase: acc.phase,
                regime: node.accommodator.regime(),
            });
            applied.push(u_applied);
        }

        // 8-10: advance plant, observers and forward models.
        let next = step_plant(&plant, topo, &applied)?;
        for (i, node) in nodes.iter_mut().enumerate() {
            let d = &designs.nodes[i];
            node.z = d.uio.step(&node.z, &u[i], &y[i]);
            node.xhat_c = d.observer.step(&node.xhat_c, &u[i], &y[i], |j| xhat_d.get(j))?;
            node.accommodator.advance();
            node.prev_error = Some(errors[i].clone());
        }
        for (sub, x) in plant.iter_mut().zip(next) {
            sub.x = x;
        }
    }
    Ok(trace)
}
