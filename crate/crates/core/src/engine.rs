//! Statevector simulation of the encoding and variational circuits.
//!
//! Qubit 0 is the most significant bit of the amplitude index: for `n` qubits,
//! qubit `q` corresponds to bit `1 << (n - 1 - q)`. The dense test oracles use
//! the same convention, so `|10⟩` with `n = 2` is amplitude index 2.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type ComplexScalar = Complex64;

pub const MAX_QUBITS: usize = 20;

const UNITARY_TOL: f64 = 1e-10;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

/// A 2×2 complex matrix in row-major order.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Gate2x2(pub [[Complex64; 2]; 2]);

impl Gate2x2 {
    pub const IDENTITY: Gate2x2 = Gate2x2([[ONE, ZERO], [ZERO, ONE]]);
    pub const PAULI_X: Gate2x2 = Gate2x2([[ZERO, ONE], [ONE, ZERO]]);

    /// `RY(θ) = exp(-iθY/2)`.
    pub fn ry(theta: f64) -> Self {
        let (s, c) = (theta / 2.0).sin_cos();
        Gate2x2([
            [Complex64::new(c, 0.0), Complex64::new(-s, 0.0)],
            [Complex64::new(s, 0.0), Complex64::new(c, 0.0)],
        ])
    }

    /// `RZ(θ) = exp(-iθZ/2)`.
    pub fn rz(theta: f64) -> Self {
        let (s, c) = (theta / 2.0).sin_cos();
        Gate2x2([
            [Complex64::new(c, -s), ZERO],
            [ZERO, Complex64::new(c, s)],
        ])
    }

    pub fn dagger(&self) -> Self {
        let m = &self.0;
        Gate2x2([[m[0][0].conj(), m[1][0].conj()], [m[0][1].conj(), m[1][1].conj()]])
    }

    pub fn matmul(&self, other: &Gate2x2) -> Self {
        let (a, b) = (&self.0, &other.0);
        let mut out = [[ZERO; 2]; 2];
        for (i, row) in out.iter_mut().enumerate() {
            for (j, cell) in row.iter_mut().enumerate() {
                *cell = a[i][0] * b[0][j] + a[i][1] * b[1][j];
            }
        }
        Gate2x2(out)
    }

    /// Largest entrywise deviation of `G†G` from the identity.
    pub fn unitarity_error(&self) -> f64 {
        let p = self.dagger().matmul(self);
        let mut err: f64 = 0.0;
        for i in 0..2 {
            for j in 0..2 {
                let target = if i == j { ONE } else { ZERO };
                err = err.max((p.0[i][j] - target).norm());
            }
        }
        err
    }

    pub fn is_unitary(&self) -> bool {
        self.unitarity_error() < UNITARY_TOL
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    n_qubits: usize,
    amplitudes: Vec<Complex64>,
}

impl StateVector {
    /// `|0⟩^⊗n`.
    pub fn ground_state(n_qubits: usize) -> Result<Self> {
        check_qubit_count(n_qubits)?;
        let mut amplitudes = vec![ZERO; 1 << n_qubits];
        amplitudes[0] = ONE;
        Ok(StateVector { n_qubits, amplitudes })
    }

    /// Wraps raw amplitudes. The length must be a power of two; normalization is
    /// the caller's responsibility.
    pub fn from_amplitudes(amplitudes: Vec<Complex64>) -> Result<Self> {
        let len = amplitudes.len();
        if len < 2 || !len.is_power_of_two() {
            return Err(Error::validation(format!(
                "amplitude count {len} is not a power of two >= 2"
            )));
        }
        let n_qubits = len.trailing_zeros() as usize;
        check_qubit_count(n_qubits)?;
        if amplitudes.iter().any(|a| !a.re.is_finite() || !a.im.is_finite()) {
            return Err(Error::validation("non-finite amplitude"));
        }
        Ok(StateVector { n_qubits, amplitudes })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    pub fn into_amplitudes(self) -> Vec<Complex64> {
        self.amplitudes
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum()
    }

    /// `⟨self|other⟩`.
    pub fn inner(&self, other: &StateVector) -> Complex64 {
        self.amplitudes
            .iter()
            .zip(&other.amplitudes)
            .map(|(a, b)| a.conj() * b)
            .sum()
    }

    pub fn probabilities(&self) -> Vec<f64> {
        self.amplitudes.iter().map(|a| a.norm_sqr()).collect()
    }

    fn check_qubit(&self, q: usize) -> Result<()> {
        if q >= self.n_qubits {
            return Err(Error::Index { index: q, n_qubits: self.n_qubits });
        }
        Ok(())
    }

    /// Applies `I ⊗ … ⊗ gate ⊗ … ⊗ I` with `gate` acting on `target`.
    pub fn apply_single_qubit_gate(&mut self, gate: &Gate2x2, target: usize) -> Result<()> {
        self.check_qubit(target)?;
        if !gate.is_unitary() {
            return Err(Error::validation(format!(
                "gate is not unitary (deviation {:.3e})",
                gate.unitarity_error()
            )));
        }
        self.apply_gate_unchecked(gate, target);
        Ok(())
    }

    pub(crate) fn apply_gate_unchecked(&mut self, gate: &Gate2x2, target: usize) {
        let stride = 1usize << (self.n_qubits - 1 - target);
        let [[g00, g01], [g10, g11]] = gate.0;
        for block in self.amplitudes.chunks_exact_mut(stride << 1) {
            let (lo, hi) = block.split_at_mut(stride);
            for (a0, a1) in lo.iter_mut().zip(hi.iter_mut()) {
                let (x0, x1) = (*a0, *a1);
                *a0 = g00 * x0 + g01 * x1;
                *a1 = g10 * x0 + g11 * x1;
            }
        }
    }

    /// Flips `target` on every basis state whose `control` bit is set.
    pub fn apply_cnot(&mut self, control: usize, target: usize) -> Result<()> {
        self.check_qubit(control)?;
        self.check_qubit(target)?;
        if control == target {
            return Err(Error::validation(format!(
                "CNOT control and target are both qubit {control}"
            )));
        }
        self.apply_cnot_unchecked(control, target);
        Ok(())
    }

    pub(crate) fn apply_cnot_unchecked(&mut self, control: usize, target: usize) {
        let cbit = 1usize << (self.n_qubits - 1 - control);
        let tbit = 1usize << (self.n_qubits - 1 - target);
        for i in 0..self.amplitudes.len() {
            if i & cbit != 0 && i & tbit == 0 {
                self.amplitudes.swap(i, i | tbit);
            }
        }
    }
}

fn check_qubit_count(n_qubits: usize) -> Result<()> {
    if n_qubits == 0 || n_qubits > MAX_QUBITS {
        return Err(Error::config(format!(
            "qubit count {n_qubits} outside 1..={MAX_QUBITS}"
        )));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Encoding {
    /// One `RY(feature)` per qubit, features tiled cyclically.
    #[default]
    AngleY,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Entangler {
    /// CNOT(q, q+1 mod n) for every qubit. Two qubits get a single CNOT(0, 1),
    /// one qubit gets none.
    #[default]
    CnotRing,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CircuitSpec {
    pub n_qubits: usize,
    pub n_layers: usize,
    #[serde(default)]
    pub encoding: Encoding,
    #[serde(default)]
    pub entangler: Entangler,
}

impl Default for CircuitSpec {
    fn default() -> Self {
        CircuitSpec::new(4, 2)
    }
}

impl CircuitSpec {
    pub const ANGLES_PER_ROTATION: usize = 3;

    pub fn new(n_qubits: usize, n_layers: usize) -> Self {
        CircuitSpec {
            n_qubits,
            n_layers,
            encoding: Encoding::AngleY,
            entangler: Entangler::CnotRing,
        }
    }

    pub fn validate(&self) -> Result<()> {
        check_qubit_count(self.n_qubits)?;
        if self.n_layers == 0 {
            return Err(Error::config("circuit needs at least one layer"));
        }
        Ok(())
    }

    pub fn n_angles(&self) -> usize {
        self.n_layers * self.n_qubits * Self::ANGLES_PER_ROTATION
    }

    /// Flat index of rotation component `k` (0 = first RZ, 1 = RY, 2 = last RZ)
    /// on `qubit` in `layer`.
    pub fn angle_index(&self, layer: usize, qubit: usize, k: usize) -> usize {
        (layer * self.n_qubits + qubit) * Self::ANGLES_PER_ROTATION + k
    }

    pub fn entangling_pairs(&self) -> Vec<(usize, usize)> {
        match (self.entangler, self.n_qubits) {
            (_, 1) => Vec::new(),
            (_, 2) => vec![(0, 1)],
            (Entangler::CnotRing, n) => (0..n).map(|q| (q, (q + 1) % n)).collect(),
        }
    }
}

/// Rotation angles Θ, laid out as `[layer][qubit][α, β, γ]` for the
/// per-qubit rotation `RZ(γ)·RY(β)·RZ(α)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct AngleParams(pub Vec<f64>);

impl AngleParams {
    pub fn zeros(spec: &CircuitSpec) -> Self {
        AngleParams(vec![0.0; spec.n_angles()])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn check(&self, spec: &CircuitSpec) -> Result<()> {
        if self.0.len() != spec.n_angles() {
            return Err(Error::validation(format!(
                "expected {} angles for {} qubits x {} layers, got {}",
                spec.n_angles(),
                spec.n_qubits,
                spec.n_layers,
                self.0.len()
            )));
        }
        if self.0.iter().any(|a| !a.is_finite()) {
            return Err(Error::validation("non-finite rotation angle"));
        }
        Ok(())
    }
}

/// `U(x)|0⟩^⊗n`: qubit `q` is rotated by `RY(x[q mod len(x)])`.
pub fn encode(x: &[f64], spec: &CircuitSpec) -> Result<StateVector> {
    spec.validate()?;
    if x.is_empty() {
        return Err(Error::validation("empty feature vector"));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::validation("non-finite feature"));
    }
    let mut state = StateVector::ground_state(spec.n_qubits)?;
    match spec.encoding {
        Encoding::AngleY => {
            for q in 0..spec.n_qubits {
                state.apply_gate_unchecked(&Gate2x2::ry(x[q % x.len()]), q);
            }
        }
    }
    Ok(state)
}

/// Applies `W(Θ) = V_M ⋯ V_1` in place.
pub fn apply_variational(state: &mut StateVector, angles: &AngleParams, spec: &CircuitSpec) -> Result<()> {
    spec.validate()?;
    angles.check(spec)?;
    if state.n_qubits() != spec.n_qubits {
        return Err(Error::validation(format!(
            "state has {} qubits, circuit expects {}",
            state.n_qubits(),
            spec.n_qubits
        )));
    }
    let pairs = spec.entangling_pairs();
    for layer in 0..spec.n_layers {
        for &(c, t) in &pairs {
            state.apply_cnot_unchecked(c, t);
        }
        for q in 0..spec.n_qubits {
            let base = spec.angle_index(layer, q, 0);
            let [alpha, beta, gamma] = [angles.0[base], angles.0[base + 1], angles.0[base + 2]];
            state.apply_gate_unchecked(&Gate2x2::rz(alpha), q);
            state.apply_gate_unchecked(&Gate2x2::ry(beta), q);
            state.apply_gate_unchecked(&Gate2x2::rz(gamma), q);
        }
    }
    Ok(())
}

/// `|Ψ⟩ = W(Θ) U(x) |0⟩^⊗n`.
pub fn forward_state(x: &[f64], angles: &AngleParams, spec: &CircuitSpec) -> Result<StateVector> {
    let mut state = encode(x, spec)?;
    apply_variational(&mut state, angles, spec)?;
    Ok(state)
}
