//! Dense reference implementations used as test oracles. Nothing here calls
//! the strided simulator; matrices are built by Kronecker products with qubit 0
//! as the leftmost (most significant) factor.

#![allow(dead_code)]

use num_complex::Complex64;
use rand::Rng;

pub type Dense = Vec<Vec<Complex64>>;

pub fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

pub fn identity(n: usize) -> Dense {
    (0..n)
        .map(|i| (0..n).map(|j| if i == j { c(1.0, 0.0) } else { c(0.0, 0.0) }).collect())
        .collect()
}

pub fn kron(a: &Dense, b: &Dense) -> Dense {
    let (ra, rb) = (a.len(), b.len());
    let mut out = vec![vec![c(0.0, 0.0); ra * rb]; ra * rb];
    for i in 0..ra {
        for j in 0..ra {
            for k in 0..rb {
                for l in 0..rb {
                    out[i * rb + k][j * rb + l] = a[i][j] * b[k][l];
                }
            }
        }
    }
    out
}

pub fn add(a: &Dense, b: &Dense) -> Dense {
    a.iter()
        .zip(b)
        .map(|(r, s)| r.iter().zip(s).map(|(x, y)| x + y).collect())
        .collect()
}

pub fn matmul(a: &Dense, b: &Dense) -> Dense {
    let n = a.len();
    let m = b[0].len();
    (0..n)
        .map(|i| (0..m).map(|j| (0..b.len()).map(|k| a[i][k] * b[k][j]).sum()).collect())
        .collect()
}

pub fn matvec(a: &Dense, v: &[Complex64]) -> Vec<Complex64> {
    a.iter().map(|row| row.iter().zip(v).map(|(x, y)| x * y).sum()).collect()
}

pub fn dagger(a: &Dense) -> Dense {
    let n = a.len();
    (0..n).map(|i| (0..n).map(|j| a[j][i].conj()).collect()).collect()
}

/// `I ⊗ … ⊗ gate ⊗ … ⊗ I` with `gate` in position `target`.
pub fn embed(gate: &Dense, target: usize, n_qubits: usize) -> Dense {
    let mut out = vec![vec![c(1.0, 0.0)]];
    for q in 0..n_qubits {
        out = kron(&out, if q == target { gate } else { &I2 });
    }
    out
}

static I2: std::sync::LazyLock<Dense> = std::sync::LazyLock::new(|| identity(2));

pub fn pauli_x() -> Dense {
    vec![vec![c(0.0, 0.0), c(1.0, 0.0)], vec![c(1.0, 0.0), c(0.0, 0.0)]]
}

pub fn pauli_z() -> Dense {
    vec![vec![c(1.0, 0.0), c(0.0, 0.0)], vec![c(0.0, 0.0), c(-1.0, 0.0)]]
}

/// `|0⟩⟨0|_c ⊗ I + |1⟩⟨1|_c ⊗ X_t`.
pub fn cnot(control: usize, target: usize, n_qubits: usize) -> Dense {
    let p0 = vec![vec![c(1.0, 0.0), c(0.0, 0.0)], vec![c(0.0, 0.0), c(0.0, 0.0)]];
    let p1 = vec![vec![c(0.0, 0.0), c(0.0, 0.0)], vec![c(0.0, 0.0), c(1.0, 0.0)]];
    let x = pauli_x();
    let mut a = vec![vec![c(1.0, 0.0)]];
    let mut b = vec![vec![c(1.0, 0.0)]];
    for q in 0..n_qubits {
        let (fa, fb) = if q == control {
            (&p0, &p1)
        } else if q == target {
            (&*I2, &x)
        } else {
            (&*I2, &*I2)
        };
        a = kron(&a, fa);
        b = kron(&b, fb);
    }
    add(&a, &b)
}

/// `exp(-iθY/2)` written out directly.
pub fn ry(theta: f64) -> Dense {
    let (s, co) = (theta / 2.0).sin_cos();
    vec![vec![c(co, 0.0), c(-s, 0.0)], vec![c(s, 0.0), c(co, 0.0)]]
}

/// `exp(-iθZ/2)` written out directly.
pub fn rz(theta: f64) -> Dense {
    let (s, co) = (theta / 2.0).sin_cos();
    vec![vec![c(co, -s), c(0.0, 0.0)], vec![c(0.0, 0.0), c(co, s)]]
}

pub fn random_complex<R: Rng>(rng: &mut R) -> Complex64 {
    c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
}

pub fn random_state<R: Rng>(rng: &mut R, n_qubits: usize) -> Vec<Complex64> {
    let v: Vec<Complex64> = (0..1 << n_qubits).map(|_| random_complex(rng)).collect();
    let norm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    v.into_iter().map(|z| z / norm).collect()
}

/// Random 2×2 unitary by Gram–Schmidt on two random complex columns.
pub fn random_unitary<R: Rng>(rng: &mut R) -> Dense {
    let u0 = [random_complex(rng), random_complex(rng)];
    let n0 = (u0[0].norm_sqr() + u0[1].norm_sqr()).sqrt();
    let u0 = [u0[0] / n0, u0[1] / n0];
    let v = [random_complex(rng), random_complex(rng)];
    let proj = u0[0].conj() * v[0] + u0[1].conj() * v[1];
    let w = [v[0] - proj * u0[0], v[1] - proj * u0[1]];
    let n1 = (w[0].norm_sqr() + w[1].norm_sqr()).sqrt();
    let u1 = [w[0] / n1, w[1] / n1];
    vec![vec![u0[0], u1[0]], vec![u0[1], u1[1]]]
}

/// Dense Hermitian matrix from the `(d, a, c)` parameterization, built
/// independently of the library's `materialize`.
pub fn dense_hermitian(d: &[f64], a: &[f64], cc: &[f64]) -> Dense {
    let n = d.len();
    let mut m = vec![vec![c(0.0, 0.0); n]; n];
    let mut k = 0;
    for i in 0..n {
        m[i][i] = c(d[i], 0.0);
        for j in i + 1..n {
            m[i][j] = c(a[k], cc[k]);
            m[j][i] = c(a[k], -cc[k]);
            k += 1;
        }
    }
    m
}

/// `ψ† M ψ`.
pub fn quadratic_form(m: &Dense, psi: &[Complex64]) -> Complex64 {
    let m_psi = matvec(m, psi);
    psi.iter().zip(&m_psi).map(|(p, q)| p.conj() * q).sum()
}

pub fn max_diff(a: &[Complex64], b: &[Complex64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

/// Central differences, kept separate from the library's version.
pub fn central_diff<F: FnMut(&[f64]) -> f64>(mut f: F, x: &[f64], h: f64) -> Vec<f64> {
    let mut p = x.to_vec();
    (0..x.len())
        .map(|i| {
            p[i] = x[i] + h;
            let up = f(&p);
            p[i] = x[i] - h;
            let down = f(&p);
            p[i] = x[i];
            (up - down) / (2.0 * h)
        })
        .collect()
}

pub fn gate2(m: &Dense) -> qmeasure::engine::Gate2x2 {
    qmeasure::engine::Gate2x2([[m[0][0], m[0][1]], [m[1][0], m[1][1]]])
}
