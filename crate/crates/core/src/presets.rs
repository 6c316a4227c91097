//! Bundled plants, expert controllers and run configurations for the two
//! reference scenarios: a second-order circuit and the roll channel of a
//! variable-wingspan aircraft in its two wing states.

use crate::error::Result;
use crate::learner::{LearnConfig, UpdateRule};
use crate::metrics::{analyze_response, CostWeights, MetricConventions, PerfIndicators, PerfTargets, SettleConvention};
use crate::policy::{ClampLimits, SamplingConfig, TrainConfig};
use crate::sim::{closed_loop_step, ControllerParams, Plant, SimConfig, TransferFunction};

/// Expert gains for the circuit.
pub const CIRCUIT_EXPERT: [f64; 3] = [32.17, 18.6, 12.36];
pub const CIRCUIT_EXPERT_FILTER: f64 = 11320.0;
/// Reference response of the expert: overshoot, steady-state error, rise
/// and settling time.
pub const CIRCUIT_TARGETS: [f64; 4] = [0.0055, 0.01, 0.034, 0.021];
pub const WEIGHTS: [f64; 4] = [0.6, 0.3, 0.2, 0.3];
pub const ALPHA: f64 = 0.1;
pub const MAX_ITERATIONS: usize = 100;
/// Derivative filter of the untuned starting controllers.
pub const START_FILTER: f64 = 100.0;

/// Circuit cost threshold: 5% above what the expert itself scores against
/// the reference response under [`circuit_conventions`].
pub const CIRCUIT_COST_THRESHOLD: f64 = 0.0092;

/// Wingspan expert: the best ITAE controller for the retracted wing inside
/// the gain box `[0.1, 100]^3`, rounded.
pub const WINGSPAN_EXPERT: [f64; 3] = [100.0, 6.3, 10.0];
pub const WINGSPAN_EXPERT_FILTER: f64 = 100.0;
pub const WINGSPAN_COST_THRESHOLD: f64 = 0.05;
/// Integral-heavy start that drives the extended-wing loop unstable.
pub const WINGSPAN_START: [f64; 3] = [3.0, 150.0, 0.5];

/// Named starting controllers.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Start {
    /// `(90, 3, 1)`.
    CaseAText,
    /// `(90, 10, 10)`.
    CaseAFigure,
    /// `(10, 1, 1)`.
    Random,
    /// [`WINGSPAN_START`].
    Wingspan,
}

impl Start {
    pub const ALL: [Start; 4] = [Start::CaseAText, Start::CaseAFigure, Start::Random, Start::Wingspan];

    pub fn name(&self) -> &'static str {
        match self {
            Start::CaseAText => "case-a-text",
            Start::CaseAFigure => "case-a-figure",
            Start::Random => "random",
            Start::Wingspan => "wingspan",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|s| s.name() == name)
    }

    pub fn gains(&self) -> [f64; 3] {
        match self {
            Start::CaseAText => [90.0, 3.0, 1.0],
            Start::CaseAFigure => [90.0, 10.0, 10.0],
            Start::Random => [10.0, 1.0, 1.0],
            Start::Wingspan => WINGSPAN_START,
        }
    }

    pub fn params(&self) -> ControllerParams {
        let [a, b, c] = self.gains();
        ControllerParams {
            theta1: a,
            theta2: b,
            theta3: c,
            filter_n: START_FILTER,
        }
    }
}

pub fn circuit_tf() -> TransferFunction {
    TransferFunction::new(vec![8.0], vec![1.0, 0.878, 21.5]).expect("valid circuit")
}

/// Roll channel, wing retracted.
pub fn wingspan_a_tf() -> TransferFunction {
    TransferFunction::new(vec![0.069, 8.41, 0.91], vec![1.0, 25.14, 161.8, 16.75, 1.28]).expect("valid wingspan A")
}

/// Roll channel, wing extended. Open-loop unstable.
pub fn wingspan_b_tf() -> TransferFunction {
    TransferFunction::new(vec![0.8, 9.40, 1.04], vec![1.0, 25.01, 159.8, 17.17, -0.46]).expect("valid wingspan B")
}

/// `1/(s+1)`; with the derivative gain at zero the loop is a plain PI.
pub fn first_order_tf() -> TransferFunction {
    TransferFunction::new(vec![1.0], vec![1.0, 1.0]).expect("valid first-order plant")
}

pub fn circuit_expert() -> ControllerParams {
    let [a, b, c] = CIRCUIT_EXPERT;
    ControllerParams {
        theta1: a,
        theta2: b,
        theta3: c,
        filter_n: CIRCUIT_EXPERT_FILTER,
    }
}

pub fn wingspan_expert() -> ControllerParams {
    let [a, b, c] = WINGSPAN_EXPERT;
    ControllerParams {
        theta1: a,
        theta2: b,
        theta3: c,
        filter_n: WINGSPAN_EXPERT_FILTER,
    }
}

pub fn weights() -> CostWeights {
    let [a, b, c, d] = WEIGHTS;
    CostWeights { a, b, c, d }
}

/// First entry into the ±5% band as settling time.
pub fn circuit_conventions() -> MetricConventions {
    MetricConventions {
        settle: SettleConvention::FirstEntry,
        ..Default::default()
    }
}

pub fn wingspan_conventions() -> MetricConventions {
    circuit_conventions()
}

/// The integral action needs about ten seconds to remove the last percent
/// of error, so shorter horizons overstate overshoot.
pub fn circuit_sim() -> SimConfig {
    SimConfig::new(1e-4, 10.0)
}

pub fn wingspan_sim() -> SimConfig {
    SimConfig::new(1e-3, 20.0)
}

pub fn circuit_sampling(seed: u64) -> SamplingConfig {
    SamplingConfig {
        samples: 1500,
        seed,
        ..Default::default()
    }
}

pub fn wingspan_sampling(seed: u64) -> SamplingConfig {
    circuit_sampling(seed)
}

pub fn training(seed: u64) -> TrainConfig {
    TrainConfig {
        seed,
        ..Default::default()
    }
}

fn base_config(targets: PerfTargets, sim: SimConfig, conventions: MetricConventions, lower: f64, seed: u64) -> LearnConfig {
    LearnConfig {
        max_iterations: MAX_ITERATIONS,
        alpha: ALPHA,
        weights: weights(),
        targets,
        limits: ClampLimits {
            max_increment: [20.0; 3],
            gain_box: Some([(lower, 1000.0); 3]),
        },
        sim,
        conventions,
        setpoint: 1.0,
        update: UpdateRule::ExpertEstimate,
        output_scale: [1.0; 3],
        reconstructed_filter: None,
        seed,
    }
}

/// Learning configuration for the circuit. Reconstructed controllers adopt
/// the expert's derivative filter.
pub fn circuit_learning(seed: u64) -> LearnConfig {
    let targets = PerfTargets {
        indicators: PerfIndicators::from_array(CIRCUIT_TARGETS),
        cost_threshold: CIRCUIT_COST_THRESHOLD,
        overshoot_gate: None,
    };
    LearnConfig {
        reconstructed_filter: Some(CIRCUIT_EXPERT_FILTER),
        ..base_config(targets, circuit_sim(), circuit_conventions(), 0.1, seed)
    }
}

/// Response of the wingspan expert on the retracted wing; used as the
/// reference for both wing states.
pub fn wingspan_targets() -> Result<PerfIndicators> {
    let plant = Plant::from_tf(&wingspan_a_tf());
    let traj = closed_loop_step(&plant, &wingspan_expert(), 1.0, &wingspan_sim())?;
    Ok(analyze_response(&traj, 1.0, &wingspan_conventions())?.indicators)
}

pub fn wingspan_learning(seed: u64) -> Result<LearnConfig> {
    let targets = PerfTargets {
        indicators: wingspan_targets()?,
        cost_threshold: WINGSPAN_COST_THRESHOLD,
        overshoot_gate: None,
    };
    Ok(base_config(targets, wingspan_sim(), wingspan_conventions(), 0.01, seed))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::compute_cost;

    #[test]
    fn starts_round_trip_by_name() {
        for s in Start::ALL {
            assert_eq!(Start::from_name(s.name()), Some(s));
        }
        assert_eq!(Start::from_name("nope"), None);
    }

    #[test]
    fn circuit_threshold_is_five_percent_above_the_expert() {
        let plant = Plant::from_tf(&circuit_tf());
        let traj = closed_loop_step(&plant, &circuit_expert(), 1.0, &circuit_sim()).unwrap();
        let ind = analyze_response(&traj, 1.0, &circuit_conventions()).unwrap().indicators;
        let cost = compute_cost(&ind, &PerfIndicators::from_array(CIRCUIT_TARGETS), &weights());
        assert!((CIRCUIT_COST_THRESHOLD / cost - 1.05).abs() < 0.01, "expert cost {cost}");
    }

    #[test]
    fn configs_validate_and_contain_starts() {
        let a = circuit_learning(0);
        a.validate().unwrap();
        for s in [Start::CaseAText, Start::CaseAFigure, Start::Random] {
            assert!(a.limits.contains(s.gains()));
        }
        let b = wingspan_learning(0).unwrap();
        b.validate().unwrap();
        assert!(b.limits.contains(WINGSPAN_START));
    }

    #[test]
    fn pi_loop_on_first_order_plant_tracks() {
        let plant = Plant::from_tf(&first_order_tf());
        let pi = ControllerParams::new(2.0, 1.0, 0.0, 100.0).unwrap();
        let traj = closed_loop_step(&plant, &pi, 1.0, &SimConfig::new(1e-3, 40.0)).unwrap();
        assert!((traj.y.last().unwrap() - 1.0).abs() < 1e-4);
    }

    #[test]
    fn wingspan_b_is_open_loop_unstable() {
        let den = wingspan_b_tf().denominator().to_vec();
        // a negative constant term with positive leading coefficient forces a real root in (0, inf)
        assert!(den[0] > 0.0 && *den.last().unwrap() < 0.0);
    }
}
