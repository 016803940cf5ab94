//! Seeded comparison of the analytic gradients against central finite
//! differences of the forward computation.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::engine::{forward_state, AngleParams, CircuitSpec};
use crate::error::Result;
use crate::gradients::{batch_loss, expectation_grad_angles, finite_difference_grad, model_grad};
use crate::observable::{expectation, grad_expectation_b, HermitianParams, Observable, ObservableLayout};

pub const FD_STEP: f64 = 1e-5;
pub const OBSERVABLE_TOL: f64 = 1e-6;
pub const ANGLE_TOL: f64 = 1e-6;
pub const MODEL_TOL: f64 = 1e-5;

const N_QUBITS: usize = 4;
const N_LAYERS: usize = 2;
const BATCH: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Component {
    Observable,
    Angles,
    Model,
}

impl Component {
    pub fn name(&self) -> &'static str {
        match self {
            Component::Observable => "observable",
            Component::Angles => "angles",
            Component::Model => "model",
        }
    }

    pub fn tolerance(&self) -> f64 {
        match self {
            Component::Observable => OBSERVABLE_TOL,
            Component::Angles => ANGLE_TOL,
            Component::Model => MODEL_TOL,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradcheckReport {
    pub trials: usize,
    pub max_observable_error: f64,
    pub max_angle_error: f64,
    pub max_model_error: f64,
}

impl GradcheckReport {
    pub fn error(&self, component: Component) -> f64 {
        match component {
            Component::Observable => self.max_observable_error,
            Component::Angles => self.max_angle_error,
            Component::Model => self.max_model_error,
        }
    }

    /// Components whose worst error is at or above tolerance. NaN counts as a
    /// failure, hence the negated comparison.
    #[allow(clippy::neg_cmp_op_on_partial_ord)]
    pub fn failures(&self) -> Vec<Component> {
        [Component::Observable, Component::Angles, Component::Model]
            .into_iter()
            .filter(|c| !(self.error(*c) < c.tolerance()))
            .collect()
    }
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn random_params(rng: &mut ChaCha8Rng, dim: usize) -> HermitianParams {
    let flat: Vec<f64> = (0..dim * dim).map(|_| rng.random_range(-1.0..1.0)).collect();
    HermitianParams::from_flat(dim, &flat).expect("dim² values")
}

fn random_angles(rng: &mut ChaCha8Rng, spec: &CircuitSpec) -> AngleParams {
    AngleParams((0..spec.n_angles()).map(|_| rng.random_range(-PI..PI)).collect())
}

fn random_features(rng: &mut ChaCha8Rng) -> Vec<f64> {
    vec![rng.random_range(-1.5..2.5), rng.random_range(-1.0..1.5)]
}

/// Runs `trials` random 4-qubit, 2-layer instances. `corrupt` perturbs the
/// analytic observable gradient so callers can confirm failures are caught.
pub fn run_gradcheck(trials: usize, seed: u64, corrupt: bool) -> Result<GradcheckReport> {
    let spec = CircuitSpec::new(N_QUBITS, N_LAYERS);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut report = GradcheckReport {
        trials,
        max_observable_error: 0.0,
        max_angle_error: 0.0,
        max_model_error: 0.0,
    };

    for _ in 0..trials {
        let angles = random_angles(&mut rng, &spec);
        let x = random_features(&mut rng);
        let state = forward_state(&x, &angles, &spec)?;

        // Observable gradient: one full 16×16 observable and one local 2×2.
        let target = rng.random_range(0..N_QUBITS);
        for layout in [
            ObservableLayout::FullHermitian { n_qubits: N_QUBITS },
            ObservableLayout::LocalSingleQubit { target },
        ] {
            let params = random_params(&mut rng, layout.dim());
            let mut analytic = grad_expectation_b(&state, &layout)?.to_flat();
            if corrupt {
                analytic[0] += 1e-3;
            }
            let dim = params.dim();
            let numeric = finite_difference_grad(
                |p| {
                    let b = HermitianParams::from_flat(dim, p).expect("same shape");
                    expectation(&state, &b, &layout).expect("compatible layout")
                },
                &params.to_flat(),
                FD_STEP,
            )?;
            report.max_observable_error = report.max_observable_error.max(max_abs_diff(&analytic, &numeric));
        }

        // Angle gradient by parameter shift.
        let layout = ObservableLayout::LocalSingleQubit { target: rng.random_range(0..N_QUBITS) };
        let params = random_params(&mut rng, 2);
        let shift = expectation_grad_angles(&x, &angles, &spec, &params, &layout)?;
        let numeric = finite_difference_grad(
            |a| {
                let s = forward_state(&x, &AngleParams(a.to_vec()), &spec).expect("valid circuit");
                expectation(&s, &params, &layout).expect("compatible layout")
            },
            angles.as_slice(),
            FD_STEP,
        )?;
        report.max_angle_error = report.max_angle_error.max(max_abs_diff(&shift, &numeric));

        // Whole model over a batch: angles and both class observables jointly.
        let observables: Vec<Observable> = (0..2)
            .map(|k| {
                Observable::new(ObservableLayout::LocalSingleQubit { target: k }, random_params(&mut rng, 2))
            })
            .collect::<Result<_>>()?;
        let samples: Vec<(Vec<f64>, usize)> =
            (0..BATCH).map(|_| (random_features(&mut rng), rng.random_range(0..2))).collect();
        let batch: Vec<(&[f64], usize)> = samples.iter().map(|(x, l)| (x.as_slice(), *l)).collect();
        let (_, bundle) = model_grad(&batch, &angles, &spec, &observables)?;

        let mut point = angles.0.clone();
        for o in &observables {
            point.extend(o.params.to_flat());
        }
        let n_angles = angles.len();
        let numeric = finite_difference_grad(
            |p| {
                let a = AngleParams(p[..n_angles].to_vec());
                let obs: Vec<Observable> = observables
                    .iter()
                    .enumerate()
                    .map(|(k, o)| Observable {
                        layout: o.layout,
                        params: HermitianParams::from_flat(2, &p[n_angles + 4 * k..n_angles + 4 * (k + 1)])
                            .expect("four values"),
                    })
                    .collect();
                batch_loss(&batch, &a, &spec, &obs).expect("valid model")
            },
            &point,
            FD_STEP,
        )?;
        report.max_model_error = report.max_model_error.max(max_abs_diff(&bundle.to_flat(), &numeric));
    }
    Ok(report)
}
