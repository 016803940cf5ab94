//! Gradient assembly: parameter-shift for rotation angles, the analytic
//! observable gradient, and the chain rule through softmax cross-entropy.

use std::f64::consts::FRAC_PI_2;

use crate::engine::{apply_variational, encode, forward_state, AngleParams, CircuitSpec, StateVector};
use crate::error::{Error, Result};
use crate::observable::{expectation, grad_expectation_b, HermitianParams, Observable, ObservableLayout};

/// Gradient of a scalar loss with respect to every trainable parameter.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientBundle {
    pub d_angles: Vec<f64>,
    /// One entry per class observable, shaped like its parameters.
    pub d_observables: Vec<HermitianParams>,
}

impl GradientBundle {
    pub fn zeros(n_angles: usize, observables: &[Observable]) -> Self {
        GradientBundle {
            d_angles: vec![0.0; n_angles],
            d_observables: observables
                .iter()
                .map(|o| HermitianParams::zeros(o.params.dim()))
                .collect(),
        }
    }

    /// Angles first, then each observable's `d ++ a ++ c`.
    pub fn to_flat(&self) -> Vec<f64> {
        let mut out = self.d_angles.clone();
        for g in &self.d_observables {
            out.extend(g.to_flat());
        }
        out
    }

    pub fn is_finite(&self) -> bool {
        self.d_angles.iter().all(|v| v.is_finite()) && self.d_observables.iter().all(|g| g.is_finite())
    }
}

/// Per-class expectations `(⟨B_1⟩, …, ⟨B_K⟩)` for one input.
pub fn class_expectations(
    x: &[f64],
    angles: &AngleParams,
    spec: &CircuitSpec,
    observables: &[Observable],
) -> Result<Vec<f64>> {
    let state = forward_state(x, angles, spec)?;
    observables.iter().map(|o| o.expectation(&state)).collect()
}

/// Parameter-shift derivatives of every observable's expectation with respect
/// to every angle, as `[angle][observable]`. Each angle drives exactly one
/// Pauli rotation, so the ±π/2 shift rule is exact.
fn shift_gradients(
    encoded: &StateVector,
    angles: &AngleParams,
    spec: &CircuitSpec,
    observables: &[(&HermitianParams, &ObservableLayout)],
) -> Result<Vec<Vec<f64>>> {
    let mut shifted = angles.clone();
    let eval = |shifted: &AngleParams| -> Result<Vec<f64>> {
        let mut state = encoded.clone();
        apply_variational(&mut state, shifted, spec)?;
        observables.iter().map(|(p, l)| expectation(&state, p, l)).collect()
    };
    let mut out = Vec::with_capacity(angles.len());
    for m in 0..angles.len() {
        let theta = angles.0[m];
        shifted.0[m] = theta + FRAC_PI_2;
        let plus = eval(&shifted)?;
        shifted.0[m] = theta - FRAC_PI_2;
        let minus = eval(&shifted)?;
        shifted.0[m] = theta;
        out.push(plus.iter().zip(&minus).map(|(p, q)| 0.5 * (p - q)).collect());
    }
    Ok(out)
}

/// `∂⟨B⟩/∂θ_m = [E(θ_m + π/2) − E(θ_m − π/2)] / 2` for every angle.
pub fn expectation_grad_angles(
    x: &[f64],
    angles: &AngleParams,
    spec: &CircuitSpec,
    params: &HermitianParams,
    layout: &ObservableLayout,
) -> Result<Vec<f64>> {
    angles.check(spec)?;
    let encoded = encode(x, spec)?;
    let grads = shift_gradients(&encoded, angles, spec, &[(params, layout)])?;
    Ok(grads.into_iter().map(|g| g[0]).collect())
}

/// Central differences `[f(p + h·e_m) − f(p − h·e_m)] / 2h`.
pub fn finite_difference_grad<F>(mut f: F, point: &[f64], h: f64) -> Result<Vec<f64>>
where
    F: FnMut(&[f64]) -> f64,
{
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::validation(format!("step size must be positive, got {h}")));
    }
    let mut p = point.to_vec();
    let mut out = Vec::with_capacity(p.len());
    for m in 0..p.len() {
        let orig = p[m];
        p[m] = orig + h;
        let fp = f(&p);
        p[m] = orig - h;
        let fm = f(&p);
        p[m] = orig;
        if !fp.is_finite() || !fm.is_finite() {
            return Err(Error::numerical(format!("non-finite function value at component {m}")));
        }
        out.push((fp - fm) / (2.0 * h));
    }
    Ok(out)
}

/// Softmax cross-entropy with the expectations as logits.
/// Returns the loss and `softmax(expectations) − one_hot(label)`.
pub fn loss_and_grad(expectations: &[f64], label: usize) -> Result<(f64, Vec<f64>)> {
    if expectations.len() < 2 {
        return Err(Error::validation(format!(
            "need at least two classes, got {}",
            expectations.len()
        )));
    }
    if label >= expectations.len() {
        return Err(Error::validation(format!(
            "label {label} out of range for {} classes",
            expectations.len()
        )));
    }
    let max = expectations.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = expectations.iter().map(|e| (e - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    let log_sum_exp = max + sum.ln();
    let loss = log_sum_exp - expectations[label];
    let mut grad: Vec<f64> = exps.iter().map(|e| e / sum).collect();
    grad[label] -= 1.0;
    Ok((loss, grad))
}

/// Mean loss over a batch, without gradients.
pub fn batch_loss(
    batch: &[(&[f64], usize)],
    angles: &AngleParams,
    spec: &CircuitSpec,
    observables: &[Observable],
) -> Result<f64> {
    if batch.is_empty() {
        return Err(Error::validation("empty batch"));
    }
    let mut total = 0.0;
    for &(x, label) in batch {
        let logits = class_expectations(x, angles, spec, observables)?;
        total += loss_and_grad(&logits, label)?.0;
    }
    Ok(total / batch.len() as f64)
}

/// Mean loss and gradient over a batch, summed in batch order.
pub fn model_grad(
    batch: &[(&[f64], usize)],
    angles: &AngleParams,
    spec: &CircuitSpec,
    observables: &[Observable],
) -> Result<(f64, GradientBundle)> {
    if batch.is_empty() {
        return Err(Error::validation("empty batch"));
    }
    angles.check(spec)?;
    let pairs: Vec<(&HermitianParams, &ObservableLayout)> =
        observables.iter().map(|o| (&o.params, &o.layout)).collect();
    let mut bundle = GradientBundle::zeros(angles.len(), observables);
    let mut total_loss = 0.0;

    for &(x, label) in batch {
        let encoded = encode(x, spec)?;
        let mut state = encoded.clone();
        apply_variational(&mut state, angles, spec)?;
        let logits = pairs
            .iter()
            .map(|(p, l)| expectation(&state, p, l))
            .collect::<Result<Vec<f64>>>()?;
        let (loss, d_logits) = loss_and_grad(&logits, label)?;
        total_loss += loss;

        for (k, (_, layout)) in pairs.iter().enumerate() {
            let g = grad_expectation_b(&state, layout)?.to_flat();
            let mut acc = bundle.d_observables[k].to_flat();
            for (a, gi) in acc.iter_mut().zip(g) {
                *a += d_logits[k] * gi;
            }
            bundle.d_observables[k].set_flat(&acc)?;
        }

        let shifts = shift_gradients(&encoded, angles, spec, &pairs)?;
        for (d, per_obs) in bundle.d_angles.iter_mut().zip(shifts) {
            *d += per_obs.iter().zip(&d_logits).map(|(g, dl)| g * dl).sum::<f64>();
        }
    }

    let scale = 1.0 / batch.len() as f64;
    bundle.d_angles.iter_mut().for_each(|v| *v *= scale);
    for g in &mut bundle.d_observables {
        let flat: Vec<f64> = g.to_flat().into_iter().map(|v| v * scale).collect();
        g.set_flat(&flat)?;
    }
    Ok((total_loss * scale, bundle))
}
