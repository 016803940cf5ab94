mod common;

use common::central_diff;
use qmeasure::engine::{forward_state, AngleParams, CircuitSpec};
use qmeasure::gradients::{
    batch_loss, expectation_grad_angles, finite_difference_grad, loss_and_grad, model_grad, GradientBundle,
};
use qmeasure::observable::{expectation, HermitianParams, Observable, ObservableLayout};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn spec() -> CircuitSpec {
    CircuitSpec::new(4, 2)
}

fn random_angles(rng: &mut ChaCha8Rng) -> AngleParams {
    AngleParams((0..24).map(|_| rng.random_range(-3.2..3.2)).collect())
}

fn random_local(rng: &mut ChaCha8Rng, target: usize) -> Observable {
    let flat: Vec<f64> = (0..4).map(|_| rng.random_range(-1.5..1.5)).collect();
    Observable::new(
        ObservableLayout::LocalSingleQubit { target },
        HermitianParams::from_flat(2, &flat).unwrap(),
    )
    .unwrap()
}

fn random_features(rng: &mut ChaCha8Rng) -> Vec<f64> {
    vec![rng.random_range(-1.5..2.5), rng.random_range(-1.0..1.5)]
}

fn random_batch(rng: &mut ChaCha8Rng, n: usize) -> Vec<(Vec<f64>, usize)> {
    (0..n).map(|_| (random_features(rng), rng.random_range(0..2))).collect()
}

fn borrow(samples: &[(Vec<f64>, usize)]) -> Vec<(&[f64], usize)> {
    samples.iter().map(|(x, l)| (x.as_slice(), *l)).collect()
}

#[test]
fn parameter_shift_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(20);
    let spec = spec();
    for trial in 0..100 {
        let angles = random_angles(&mut rng);
        let x = random_features(&mut rng);
        let target = rng.random_range(0..4);
        let obs = random_local(&mut rng, target);
        let shift = expectation_grad_angles(&x, &angles, &spec, &obs.params, &obs.layout).unwrap();
        let numeric = central_diff(
            |a| {
                let s = forward_state(&x, &AngleParams(a.to_vec()), &spec).unwrap();
                expectation(&s, &obs.params, &obs.layout).unwrap()
            },
            angles.as_slice(),
            1e-5,
        );
        for (m, (a, n)) in shift.iter().zip(&numeric).enumerate() {
            assert!((a - n).abs() < 1e-6, "trial {trial} angle {m}: {a} vs {n}");
        }
    }
}

#[test]
fn library_fd_agrees_with_parameter_shift() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let spec = spec();
    let angles = random_angles(&mut rng);
    let x = random_features(&mut rng);
    let obs = random_local(&mut rng, 1);
    let fd = finite_difference_grad(
        |a| {
            let s = forward_state(&x, &AngleParams(a.to_vec()), &spec).unwrap();
            expectation(&s, &obs.params, &obs.layout).unwrap()
        },
        angles.as_slice(),
        1e-5,
    )
    .unwrap();
    let shift = expectation_grad_angles(&x, &angles, &spec, &obs.params, &obs.layout).unwrap();
    for (a, b) in fd.iter().zip(&shift) {
        assert!((a - b).abs() < 1e-6);
    }
}

#[test]
fn loss_gradient_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(22);
    for _ in 0..50 {
        let k = rng.random_range(2..6);
        let logits: Vec<f64> = (0..k).map(|_| rng.random_range(-4.0..4.0)).collect();
        let label = rng.random_range(0..k);
        let (_, grad) = loss_and_grad(&logits, label).unwrap();
        let numeric = central_diff(|v| loss_and_grad(v, label).unwrap().0, &logits, 1e-5);
        for (a, n) in grad.iter().zip(&numeric) {
            assert!((a - n).abs() < 1e-8);
        }
    }
}

fn model_point(angles: &AngleParams, observables: &[Observable]) -> Vec<f64> {
    let mut p = angles.0.clone();
    for o in observables {
        p.extend(o.params.to_flat());
    }
    p
}

fn unpack(p: &[f64], template: &[Observable]) -> (AngleParams, Vec<Observable>) {
    let angles = AngleParams(p[..24].to_vec());
    let obs = template
        .iter()
        .enumerate()
        .map(|(k, o)| Observable {
            layout: o.layout,
            params: HermitianParams::from_flat(2, &p[24 + 4 * k..28 + 4 * k]).unwrap(),
        })
        .collect();
    (angles, obs)
}

#[test]
fn whole_model_gradient_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    let spec = spec();
    for trial in 0..20 {
        let angles = random_angles(&mut rng);
        let observables = vec![random_local(&mut rng, 0), random_local(&mut rng, 1)];
        let samples = random_batch(&mut rng, 4);
        let batch = borrow(&samples);
        let (loss, bundle) = model_grad(&batch, &angles, &spec, &observables).unwrap();
        assert!((loss - batch_loss(&batch, &angles, &spec, &observables).unwrap()).abs() < 1e-14);
        let numeric = central_diff(
            |p| {
                let (a, o) = unpack(p, &observables);
                batch_loss(&batch, &a, &spec, &o).unwrap()
            },
            &model_point(&angles, &observables),
            1e-5,
        );
        for (i, (a, n)) in bundle.to_flat().iter().zip(&numeric).enumerate() {
            assert!((a - n).abs() < 1e-5, "trial {trial} component {i}: {a} vs {n}");
        }
    }
}

#[test]
fn duplicated_sample_gives_single_sample_bundle() {
    let mut rng = ChaCha8Rng::seed_from_u64(24);
    let spec = spec();
    let angles = random_angles(&mut rng);
    let observables = vec![random_local(&mut rng, 0), random_local(&mut rng, 1)];
    let x = random_features(&mut rng);
    let (l1, g1) = model_grad(&[(&x, 1)], &angles, &spec, &observables).unwrap();
    let (l2, g2) = model_grad(&[(&x, 1), (&x, 1)], &angles, &spec, &observables).unwrap();
    assert_eq!(l1, l2);
    assert_eq!(g1, g2);
}

#[test]
fn balanced_labels_on_tied_logits_give_zero_gradient() {
    // Equal observables make softmax (½, ½); one sample of each label then
    // cancels every gradient term.
    let mut rng = ChaCha8Rng::seed_from_u64(25);
    let spec = spec();
    let angles = random_angles(&mut rng);
    let obs = |k| {
        Observable::new(
            ObservableLayout::LocalSingleQubit { target: k },
            HermitianParams::from_parts(vec![0.7, 0.7], vec![0.0], vec![0.0]).unwrap(),
        )
        .unwrap()
    };
    let observables = vec![obs(0), obs(1)];
    let x = random_features(&mut rng);
    let (_, bundle) = model_grad(&[(&x, 0), (&x, 1)], &angles, &spec, &observables).unwrap();
    assert!(bundle.to_flat().iter().all(|g| g.abs() < 1e-12), "{:?}", bundle.to_flat());
}

#[test]
fn identical_batches_give_bit_identical_bundles() {
    let mut rng = ChaCha8Rng::seed_from_u64(26);
    let spec = spec();
    let angles = random_angles(&mut rng);
    let observables = vec![random_local(&mut rng, 0), random_local(&mut rng, 1)];
    let samples = random_batch(&mut rng, 20);
    let batch = borrow(&samples);
    let (la, a) = model_grad(&batch, &angles, &spec, &observables).unwrap();
    let (lb, b) = model_grad(&batch, &angles, &spec, &observables).unwrap();
    assert_eq!(la.to_bits(), lb.to_bits());
    let bits = |g: &GradientBundle| g.to_flat().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
    assert_eq!(bits(&a), bits(&b));
}

#[test]
fn concatenated_batch_is_weighted_mean() {
    let mut rng = ChaCha8Rng::seed_from_u64(27);
    let spec = spec();
    let angles = random_angles(&mut rng);
    let observables = vec![random_local(&mut rng, 0), random_local(&mut rng, 1)];
    let first = random_batch(&mut rng, 3);
    let second = random_batch(&mut rng, 5);
    let both: Vec<_> = first.iter().chain(&second).cloned().collect();
    let (_, ga) = model_grad(&borrow(&first), &angles, &spec, &observables).unwrap();
    let (_, gb) = model_grad(&borrow(&second), &angles, &spec, &observables).unwrap();
    let (_, gc) = model_grad(&borrow(&both), &angles, &spec, &observables).unwrap();
    for ((a, b), c) in ga.to_flat().iter().zip(gb.to_flat()).zip(gc.to_flat()) {
        let weighted = (3.0 * a + 5.0 * b) / 8.0;
        assert!((weighted - c).abs() < 1e-12);
    }
}
