//! Trainable Hermitian observables.
//!
//! An `N × N` Hermitian matrix is carried as `N²` unconstrained reals: the
//! diagonal `d`, and the real and imaginary parts `a`, `c` of the strict upper
//! triangle, so that `B[i][j] = a_ij + i·c_ij` and `B[j][i] = a_ij − i·c_ij`.
//! Off-diagonal entries are stored row-major over `i < j`:
//! `(0,1), (0,2), …, (0,N−1), (1,2), …`.

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::engine::{StateVector, MAX_QUBITS};
use crate::error::{Error, Result};

/// Scale applied to standard-normal draws in [`init_observable`].
pub const INIT_SCALE: f64 = 0.1;

pub const JACOBI_TOL: f64 = 1e-12;
pub const JACOBI_MAX_SWEEPS: usize = 100;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawParams")]
pub struct HermitianParams {
    dim: usize,
    d: Vec<f64>,
    a: Vec<f64>,
    c: Vec<f64>,
}

#[derive(Deserialize)]
struct RawParams {
    dim: usize,
    d: Vec<f64>,
    a: Vec<f64>,
    c: Vec<f64>,
}

impl TryFrom<RawParams> for HermitianParams {
    type Error = Error;

    fn try_from(raw: RawParams) -> Result<Self> {
        let params = HermitianParams::from_parts(raw.d, raw.a, raw.c)?;
        if params.dim != raw.dim {
            return Err(Error::validation(format!(
                "declared dim {} does not match {} diagonal entries",
                raw.dim, params.dim
            )));
        }
        Ok(params)
    }
}

fn n_pairs(dim: usize) -> usize {
    dim * (dim - 1) / 2
}

impl HermitianParams {
    pub fn zeros(dim: usize) -> Self {
        HermitianParams {
            dim,
            d: vec![0.0; dim],
            a: vec![0.0; n_pairs(dim)],
            c: vec![0.0; n_pairs(dim)],
        }
    }

    pub fn from_parts(d: Vec<f64>, a: Vec<f64>, c: Vec<f64>) -> Result<Self> {
        let dim = d.len();
        if dim == 0 || !dim.is_power_of_two() {
            return Err(Error::validation(format!("dimension {dim} is not a power of two")));
        }
        if a.len() != n_pairs(dim) || c.len() != n_pairs(dim) {
            return Err(Error::validation(format!(
                "dimension {dim} needs {} off-diagonal pairs, got a={} c={}",
                n_pairs(dim),
                a.len(),
                c.len()
            )));
        }
        if d.iter().chain(&a).chain(&c).any(|v| !v.is_finite()) {
            return Err(Error::validation("non-finite observable parameter"));
        }
        Ok(HermitianParams { dim, d, a, c })
    }

    pub fn pauli_z() -> Self {
        HermitianParams { dim: 2, d: vec![1.0, -1.0], a: vec![0.0], c: vec![0.0] }
    }

    pub fn identity(dim: usize) -> Self {
        let mut p = Self::zeros(dim);
        p.d.fill(1.0);
        p
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn d(&self) -> &[f64] {
        &self.d
    }

    pub fn a(&self) -> &[f64] {
        &self.a
    }

    pub fn c(&self) -> &[f64] {
        &self.c
    }

    /// Always `dim²`.
    pub fn n_params(&self) -> usize {
        self.d.len() + self.a.len() + self.c.len()
    }

    /// Position of pair `(i, j)`, `i < j`, in `a` and `c`.
    pub fn pair_index(&self, i: usize, j: usize) -> usize {
        debug_assert!(i < j && j < self.dim);
        i * self.dim - i * (i + 1) / 2 + (j - i - 1)
    }

    /// Parameters flattened as `d ++ a ++ c`.
    pub fn to_flat(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.n_params());
        out.extend_from_slice(&self.d);
        out.extend_from_slice(&self.a);
        out.extend_from_slice(&self.c);
        out
    }

    pub fn set_flat(&mut self, flat: &[f64]) -> Result<()> {
        if flat.len() != self.n_params() {
            return Err(Error::validation(format!(
                "expected {} flat parameters, got {}",
                self.n_params(),
                flat.len()
            )));
        }
        let (d, rest) = flat.split_at(self.dim);
        let (a, c) = rest.split_at(self.a.len());
        self.d.copy_from_slice(d);
        self.a.copy_from_slice(a);
        self.c.copy_from_slice(c);
        Ok(())
    }

    pub fn from_flat(dim: usize, flat: &[f64]) -> Result<Self> {
        let mut p = Self::zeros(dim);
        p.set_flat(flat)?;
        Ok(p)
    }

    pub fn is_finite(&self) -> bool {
        self.d.iter().chain(&self.a).chain(&self.c).all(|v| v.is_finite())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ObservableLayout {
    /// A `2^n × 2^n` matrix over the whole register.
    FullHermitian { n_qubits: usize },
    /// A 2×2 matrix on one qubit, identity elsewhere.
    LocalSingleQubit { target: usize },
}

impl ObservableLayout {
    pub fn dim(&self) -> usize {
        match *self {
            ObservableLayout::FullHermitian { n_qubits } => 1 << n_qubits,
            ObservableLayout::LocalSingleQubit { .. } => 2,
        }
    }

    fn check_state(&self, state: &StateVector) -> Result<()> {
        match *self {
            ObservableLayout::FullHermitian { n_qubits } if n_qubits != state.n_qubits() => {
                Err(Error::validation(format!(
                    "full observable over {n_qubits} qubits applied to a {}-qubit state",
                    state.n_qubits()
                )))
            }
            ObservableLayout::LocalSingleQubit { target } if target >= state.n_qubits() => {
                Err(Error::validation(format!(
                    "local observable on qubit {target} applied to a {}-qubit state",
                    state.n_qubits()
                )))
            }
            _ => Ok(()),
        }
    }

    fn check_params(&self, params: &HermitianParams) -> Result<()> {
        if params.dim() != self.dim() {
            return Err(Error::validation(format!(
                "layout needs a {0}x{0} observable, params have dim {1}",
                self.dim(),
                params.dim()
            )));
        }
        Ok(())
    }
}

/// Layout and parameters together; this is the on-disk JSON form:
/// `{"layout": {...}, "dim": N, "d": [...], "a": [...], "c": [...]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Observable {
    pub layout: ObservableLayout,
    #[serde(flatten)]
    pub params: HermitianParams,
}

impl Observable {
    pub fn new(layout: ObservableLayout, params: HermitianParams) -> Result<Self> {
        if let ObservableLayout::FullHermitian { n_qubits } = layout {
            if n_qubits == 0 || n_qubits > MAX_QUBITS {
                return Err(Error::config(format!("observable qubit count {n_qubits} out of range")));
            }
        }
        layout.check_params(&params)?;
        Ok(Observable { layout, params })
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let obs: Observable = serde_json::from_str(text)?;
        Observable::new(obs.layout, obs.params)
    }

    pub fn expectation(&self, state: &StateVector) -> Result<f64> {
        expectation(state, &self.params, &self.layout)
    }
}

/// Dense Hermitian matrix, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct HermitianMatrix {
    dim: usize,
    data: Vec<Complex64>,
}

impl HermitianMatrix {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        self.data[i * self.dim + j]
    }

    pub fn data(&self) -> &[Complex64] {
        &self.data
    }

    pub fn trace(&self) -> f64 {
        (0..self.dim).map(|i| self.get(i, i).re).sum()
    }

    pub fn is_hermitian(&self) -> bool {
        (0..self.dim).all(|i| (0..self.dim).all(|j| self.get(i, j) == self.get(j, i).conj()))
    }
}

pub fn materialize(params: &HermitianParams) -> HermitianMatrix {
    let n = params.dim;
    let mut data = vec![Complex64::new(0.0, 0.0); n * n];
    for i in 0..n {
        data[i * n + i] = Complex64::new(params.d[i], 0.0);
        for j in i + 1..n {
            let k = params.pair_index(i, j);
            let upper = Complex64::new(params.a[k], params.c[k]);
            data[i * n + j] = upper;
            data[j * n + i] = upper.conj();
        }
    }
    HermitianMatrix { dim: n, data }
}

/// `G[i][j] = ⟨Ψ|E_ij|Ψ⟩` over the observable's index space, row-major.
///
/// For a full observable this is `conj(ψ_i)·ψ_j`; for a local one the other
/// qubits are summed out, leaving the 2×2 reduced form.
fn indicator_expectations(state: &StateVector, layout: &ObservableLayout) -> Vec<Complex64> {
    let psi = state.amplitudes();
    match *layout {
        ObservableLayout::FullHermitian { .. } => {
            let n = psi.len();
            let mut g = Vec::with_capacity(n * n);
            for pi in psi {
                for pj in psi {
                    g.push(pi.conj() * pj);
                }
            }
            g
        }
        ObservableLayout::LocalSingleQubit { target } => {
            let stride = 1usize << (state.n_qubits() - 1 - target);
            let mut g = [Complex64::new(0.0, 0.0); 4];
            for block in psi.chunks_exact(stride << 1) {
                let (lo, hi) = block.split_at(stride);
                for (p0, p1) in lo.iter().zip(hi) {
                    g[0] += p0.conj() * p0;
                    g[1] += p0.conj() * p1;
                    g[2] += p1.conj() * p0;
                    g[3] += p1.conj() * p1;
                }
            }
            g.to_vec()
        }
    }
}

/// `⟨Ψ|B|Ψ⟩` before the imaginary part is dropped.
pub fn expectation_raw(
    state: &StateVector,
    params: &HermitianParams,
    layout: &ObservableLayout,
) -> Result<Complex64> {
    layout.check_state(state)?;
    layout.check_params(params)?;
    let b = materialize(params);
    match layout {
        ObservableLayout::FullHermitian { .. } => {
            let psi = state.amplitudes();
            let n = b.dim;
            let mut acc = Complex64::new(0.0, 0.0);
            for i in 0..n {
                let row = &b.data[i * n..(i + 1) * n];
                let b_psi: Complex64 = row.iter().zip(psi).map(|(bij, pj)| bij * pj).sum();
                acc += psi[i].conj() * b_psi;
            }
            Ok(acc)
        }
        ObservableLayout::LocalSingleQubit { .. } => {
            let g = indicator_expectations(state, layout);
            Ok(b.data.iter().zip(&g).map(|(bij, gij)| bij * gij).sum())
        }
    }
}

pub fn expectation(state: &StateVector, params: &HermitianParams, layout: &ObservableLayout) -> Result<f64> {
    Ok(expectation_raw(state, params, layout)?.re)
}

/// Gradient of `⟨Ψ|B|Ψ⟩` with respect to the real parameters, in
/// [`HermitianParams`] shape. Built from `∂⟨B⟩/∂b_kℓ = conj(ψ_k)·ψ_ℓ`:
/// `∂/∂d_k = |ψ_k|²`, `∂/∂a_kℓ = 2·Re(conj(ψ_k)ψ_ℓ)`, `∂/∂c_kℓ = −2·Im(conj(ψ_k)ψ_ℓ)`.
///
/// The expectation is linear in the parameters, so the result does not depend
/// on the current observable.
pub fn grad_expectation_b(state: &StateVector, layout: &ObservableLayout) -> Result<HermitianParams> {
    layout.check_state(state)?;
    let n = layout.dim();
    let g = indicator_expectations(state, layout);
    let mut grad = HermitianParams::zeros(n);
    for i in 0..n {
        grad.d[i] = g[i * n + i].re;
        for j in i + 1..n {
            let k = grad.pair_index(i, j);
            grad.a[k] = 2.0 * g[i * n + j].re;
            grad.c[k] = -2.0 * g[i * n + j].im;
        }
    }
    Ok(grad)
}

/// Eigenvalues in ascending order.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Spectrum {
    pub eigenvalues: Vec<f64>,
}

impl Spectrum {
    pub fn min(&self) -> f64 {
        self.eigenvalues[0]
    }

    pub fn max(&self) -> f64 {
        self.eigenvalues[self.eigenvalues.len() - 1]
    }

    pub fn spread(&self) -> f64 {
        self.max() - self.min()
    }
}

/// Spectrum of the observable matrix. Two-dimensional observables use the
/// closed form; larger ones go through [`eigh`].
pub fn spectrum(params: &HermitianParams) -> Result<Spectrum> {
    if params.dim == 1 {
        return Ok(Spectrum { eigenvalues: vec![params.d[0]] });
    }
    if params.dim == 2 {
        let mean = 0.5 * (params.d[0] + params.d[1]);
        let half_gap = 0.5 * (params.d[0] - params.d[1]);
        let radius = half_gap.hypot(params.a[0].hypot(params.c[0]));
        return Ok(Spectrum { eigenvalues: vec![mean - radius, mean + radius] });
    }
    Ok(eigh(&materialize(params))?.0)
}

/// Cyclic Jacobi eigendecomposition of a Hermitian matrix.
///
/// Returns the ascending spectrum and the eigenvectors as columns of a
/// row-major unitary `V`, so that `A = V·diag(λ)·V†`.
pub fn eigh(matrix: &HermitianMatrix) -> Result<(Spectrum, Vec<Complex64>)> {
    let n = matrix.dim;
    let mut a = matrix.data.clone();
    let mut v = vec![Complex64::new(0.0, 0.0); n * n];
    for i in 0..n {
        v[i * n + i] = Complex64::new(1.0, 0.0);
    }

    let off_norm = |a: &[Complex64]| -> f64 {
        let mut s = 0.0;
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    s += a[i * n + j].norm_sqr();
                }
            }
        }
        s.sqrt()
    };
    let scale = matrix.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt().max(1.0);
    let threshold = JACOBI_TOL * scale;

    let mut sweeps = 0;
    let mut off = off_norm(&a);
    while off >= threshold {
        if sweeps == JACOBI_MAX_SWEEPS {
            return Err(Error::numerical(format!(
                "Jacobi eigensolver did not converge: {n}x{n} matrix, {sweeps} sweeps, \
                 off-diagonal norm {off:.3e} (threshold {threshold:.3e})"
            )));
        }
        for p in 0..n {
            for q in p + 1..n {
                rotate(&mut a, &mut v, n, p, q);
            }
        }
        sweeps += 1;
        off = off_norm(&a);
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[i * n + i].re.total_cmp(&a[j * n + j].re));
    let eigenvalues = order.iter().map(|&i| a[i * n + i].re).collect();
    let mut vectors = vec![Complex64::new(0.0, 0.0); n * n];
    for (col, &src) in order.iter().enumerate() {
        for row in 0..n {
            vectors[row * n + col] = v[row * n + src];
        }
    }
    Ok((Spectrum { eigenvalues }, vectors))
}

/// One Jacobi rotation annihilating `a[p][q]`: a phase on column `q` makes the
/// pivot real, then a real plane rotation diagonalizes the 2×2 block.
fn rotate(a: &mut [Complex64], v: &mut [Complex64], n: usize, p: usize, q: usize) {
    let apq = a[p * n + q];
    let mag = apq.norm();
    if mag == 0.0 {
        return;
    }
    let phase = apq / mag;
    let app = a[p * n + p].re;
    let aqq = a[q * n + q].re;
    let theta = 0.5 * (2.0 * mag).atan2(aqq - app);
    let (s, c) = theta.sin_cos();

    // R = [[c, s], [-s·e^{-iφ}, c·e^{-iφ}]] on the (p, q) plane.
    let r_pp = Complex64::new(c, 0.0);
    let r_pq = Complex64::new(s, 0.0);
    let r_qp = -phase.conj() * s;
    let r_qq = phase.conj() * c;

    // A ← A·R, V ← V·R
    for m in [&mut *a, &mut *v] {
        for row in 0..n {
            let xp = m[row * n + p];
            let xq = m[row * n + q];
            m[row * n + p] = xp * r_pp + xq * r_qp;
            m[row * n + q] = xp * r_pq + xq * r_qq;
        }
    }
    // A ← R†·A
    for col in 0..n {
        let xp = a[p * n + col];
        let xq = a[q * n + col];
        a[p * n + col] = r_pp.conj() * xp + r_qp.conj() * xq;
        a[q * n + col] = r_pq.conj() * xp + r_qq.conj() * xq;
    }
    a[p * n + q] = Complex64::new(0.0, 0.0);
    a[q * n + p] = Complex64::new(0.0, 0.0);
    a[p * n + p].im = 0.0;
    a[q * n + q].im = 0.0;
}

/// Random observable with every real parameter drawn from `0.1·N(0, 1)`,
/// using ChaCha8 seeded from `seed`.
pub fn init_observable(layout: &ObservableLayout, seed: u64) -> HermitianParams {
    let dim = layout.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let flat: Vec<f64> = (0..dim * dim)
        .map(|_| {
            let z: f64 = StandardNormal.sample(&mut rng);
            INIT_SCALE * z
        })
        .collect();
    HermitianParams::from_flat(dim, &flat).expect("flat length is dim²")
}
