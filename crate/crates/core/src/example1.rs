//! The three-step worked scenario: `N_max = 3`, `eta = 2`, buffer of three
//! slots, availabilities `N = [3, 0, 2]`, no dropouts, state always above the
//! threshold, no disturbance, benchmark plant from `x0 = 20`.
//!
//! [`simulate_example1`] runs the actual schemes on the scripted
//! environment; [`expected_example1`] evaluates the closed-form buffer
//! contents by composing the plant and the laws directly. The two must agree
//! bit for bit.

use crate::error::Result;
use crate::markov::ChannelModel;
use crate::schemes::{Controller, Gamma, Scheme, StepEnv};
use crate::simulate::{example_law, example_plant, example_system, simulate_scripted, SchemeConfig, EXAMPLE_RHO1};

pub const N_MAX: usize = 3;
pub const ETA: usize = 2;
pub const LAMBDA: usize = 3;
pub const AVAILABILITY: [usize; 3] = [3, 0, 2];
/// Fine-law contraction used for the scenario.
pub const C2: f64 = 0.45;

#[derive(Debug, Clone, PartialEq)]
pub struct Example1Trace {
    pub scheme: Scheme,
    pub inputs: Vec<f64>,
    pub buffers: Vec<Vec<f64>>,
}

fn script() -> Vec<StepEnv> {
    AVAILABILITY
        .iter()
        .map(|&n| StepEnv::new(Gamma::Delivered, n).expect("delivery admits any N"))
        .collect()
}

pub fn simulate_example1(scheme: Scheme) -> Result<Example1Trace> {
    let sys = example_system();
    let plant = sys.plant.clone().with_noise_std(0.0)?;
    let kappa2 = scheme.uses_fine_law().then(|| sys.kappa2(C2, ETA)).transpose()?;
    let controller = Controller::new(scheme, sys.kappa1(), kappa2, LAMBDA)?;
    let config = SchemeConfig::new(controller.clone(), ChannelModel::uniform(1.0, N_MAX)?, 1.0)?;

    // replay step by step to capture the buffer after each step
    let trajectory = simulate_scripted(&plant, &config, &script())?;
    let predict = |x: &f64, u: &f64| plant.nominal(*x, *u);
    let mut buffer = controller.empty_buffer();
    let mut buffers = Vec::new();
    for (step, env) in trajectory.steps.iter().zip(script()) {
        let (_, next) = controller.step(buffer, &step.x, env, &predict);
        buffers.push(next.values().to_vec());
        buffer = next;
    }
    Ok(Example1Trace { scheme, inputs: trajectory.inputs(), buffers })
}

/// Inputs of the forced scenario written in terms of the laws.
pub fn symbolic_inputs(scheme: Scheme) -> [&'static str; 3] {
    match scheme {
        Scheme::A1 => ["k1(x0)", "k1(f(x0, k1(x0)))", "k1(x2)"],
        Scheme::A2 => ["k2(x0)", "k1(f(x0, k2(x0)))", "k2(x2)"],
        Scheme::B1 => ["k1(x0)", "0", "k1(x2)"],
        Scheme::B2 => ["k2(x0)", "0", "k2(x2)"],
    }
}

pub fn expected_example1(scheme: Scheme) -> Example1Trace {
    let f = |x: f64, u: f64| example_plant(x, u, 0.0);
    let k1 = |x: f64| example_law(EXAMPLE_RHO1, x);
    let k2 = |x: f64| example_law(C2, x);
    let x0 = example_system().plant.x0;
    let zero = vec![0.0; LAMBDA];

    let (inputs, buffers) = match scheme {
        Scheme::A1 => {
            let x0_hat1 = f(x0, k1(x0));
            let x0_hat2 = f(x0_hat1, k1(x0_hat1));
            let u0 = k1(x0);
            let x1 = f(x0, u0);
            let u1 = k1(x0_hat1);
            let x2 = f(x1, u1);
            let u2 = k1(x2);
            (
                vec![u0, u1, u2],
                vec![
                    vec![k1(x0), k1(x0_hat1), k1(x0_hat2)],
                    vec![k1(x0_hat1), k1(x0_hat2), 0.0],
                    vec![k1(x2), k1(f(x2, k1(x2))), 0.0],
                ],
            )
        }
        Scheme::A2 => {
            let u0 = k2(x0);
            let x1 = f(x0, u0);
            let u1 = k1(f(x0, k2(x0)));
            let x2 = f(x1, u1);
            let u2 = k2(x2);
            (
                vec![u0, u1, u2],
                vec![
                    vec![k2(x0), k1(f(x0, k2(x0))), 0.0],
                    vec![k1(f(x0, k2(x0))), 0.0, 0.0],
                    vec![k2(x2), 0.0, 0.0],
                ],
            )
        }
        Scheme::B1 | Scheme::B2 => {
            let law = |x: f64| if scheme == Scheme::B1 { k1(x) } else { k2(x) };
            let u0 = law(x0);
            let x1 = f(x0, u0);
            let x2 = f(x1, 0.0);
            (vec![u0, 0.0, law(x2)], vec![zero.clone(), zero.clone(), zero])
        }
    };
    Example1Trace { scheme, inputs, buffers }
}

/// Simulated and expected traces for every scheme, with exact equality.
pub fn verify_example1() -> Result<Vec<(Example1Trace, Example1Trace, bool)>> {
    [Scheme::A1, Scheme::A2, Scheme::B1, Scheme::B2]
        .into_iter()
        .map(|s| {
            let got = simulate_example1(s)?;
            let want = expected_example1(s);
            let ok = got == want;
            Ok((got, want, ok))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_schemes_match_exactly() {
        for (got, want, ok) in verify_example1().unwrap() {
            assert!(ok, "{:?}\n{got:?}\n{want:?}", got.scheme);
        }
    }

    #[test]
    fn state_stays_above_threshold() {
        // the scenario needs |x_k| > d for k = 0, 1, 2
        let a2 = expected_example1(Scheme::A2);
        assert!(a2.inputs.iter().all(|u| u.is_finite()));
        let x1 = example_plant(20.0, a2.inputs[0], 0.0);
        assert!(x1.abs() > 1.0);
    }
}
