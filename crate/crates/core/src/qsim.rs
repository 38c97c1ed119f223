//! Exact statevector simulation of small qubit registers.
//!
//! Qubit 0 is the most significant bit of the basis index, so for a
//! 4-qubit register the basis state `|q0 q1 q2 q3>` has index
//! `q0*8 + q1*4 + q2*2 + q3`.

use num_complex::Complex64;

use crate::error::{invalid, Result};

pub const MAX_QUBITS: usize = 8;
/// Qubits in the 2x2 quanvolution kernel.
pub const KERNEL_QUBITS: usize = 4;

/// Tolerance used by [`StateVector::is_normalized`].
pub const NORM_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    qubits: usize,
    amplitudes: Vec<Complex64>,
}

impl StateVector {
    /// The all-zero ground state `|0...0>`.
    pub fn ground(qubits: usize) -> Result<Self> {
        if !(1..=MAX_QUBITS).contains(&qubits) {
            return invalid(format!("qubit count must be in 1..={MAX_QUBITS}, got {qubits}"));
        }
        let mut amplitudes = vec![Complex64::new(0.0, 0.0); 1 << qubits];
        amplitudes[0] = Complex64::new(1.0, 0.0);
        Ok(Self { qubits, amplitudes })
    }

    pub fn qubits(&self) -> usize {
        self.qubits
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum()
    }

    pub fn is_normalized(&self) -> bool {
        (self.norm_sqr() - 1.0).abs() < NORM_TOLERANCE
    }

    fn mask(&self, qubit: usize) -> Result<usize> {
        if qubit >= self.qubits {
            return invalid(format!("qubit {qubit} out of range for {}-qubit register", self.qubits));
        }
        Ok(1 << (self.qubits - 1 - qubit))
    }

    /// Applies `RY(theta) = [[cos t/2, -sin t/2], [sin t/2, cos t/2]]`.
    pub fn apply_ry(&mut self, qubit: usize, theta: f64) -> Result<()> {
        let bit = self.mask(qubit)?;
        if !theta.is_finite() {
            return invalid("rotation angle must be finite");
        }
        let (s, c) = (theta / 2.0).sin_cos();
        for i in 0..self.amplitudes.len() {
            if i & bit == 0 {
                let j = i | bit;
                let a0 = self.amplitudes[i];
                let a1 = self.amplitudes[j];
                self.amplitudes[i] = a0 * c - a1 * s;
                self.amplitudes[j] = a0 * s + a1 * c;
            }
        }
        Ok(())
    }

    /// Applies `RZ(phi) = diag(e^{-i phi/2}, e^{+i phi/2})`.
    pub fn apply_rz(&mut self, qubit: usize, phi: f64) -> Result<()> {
        let bit = self.mask(qubit)?;
        if !phi.is_finite() {
            return invalid("rotation angle must be finite");
        }
        let low = Complex64::from_polar(1.0, -phi / 2.0);
        let high = Complex64::from_polar(1.0, phi / 2.0);
        for (i, amp) in self.amplitudes.iter_mut().enumerate() {
            *amp *= if i & bit == 0 { low } else { high };
        }
        Ok(())
    }

    pub fn apply_cnot(&mut self, control: usize, target: usize) -> Result<()> {
        if control == target {
            return invalid(format!("CNOT control and target are both qubit {control}"));
        }
        let cbit = self.mask(control)?;
        let tbit = self.mask(target)?;
        for i in 0..self.amplitudes.len() {
            if i & cbit != 0 && i & tbit == 0 {
                self.amplitudes.swap(i, i | tbit);
            }
        }
        Ok(())
    }

    /// Pauli-Z expectation value of one qubit, in `[-1, 1]`.
    pub fn expect_z(&self, qubit: usize) -> Result<f64> {
        let bit = self.mask(qubit)?;
        let z = self
            .amplitudes
            .iter()
            .enumerate()
            .map(|(i, a)| if i & bit == 0 { a.norm_sqr() } else { -a.norm_sqr() })
            .sum::<f64>();
        Ok(z.clamp(-1.0, 1.0))
    }
}

/// CNOT wiring between the kernel qubits.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum Entanglement {
    /// `0->1, 1->2, 2->3`
    #[default]
    Chain,
    /// Chain plus `3->0`.
    Ring,
}

/// How the measured register is reduced to feature values.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum Readout {
    /// Arithmetic mean of the per-qubit `<Z>`: one output channel.
    #[default]
    MeanZ,
    /// Every qubit's `<Z>`: one output channel per qubit.
    PerQubitZ,
}

impl Readout {
    pub fn channels(self) -> usize {
        match self {
            Readout::MeanZ => 1,
            Readout::PerQubitZ => KERNEL_QUBITS,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CircuitConfig {
    pub entanglement: Entanglement,
    pub readout: Readout,
    /// Multiplier applied to every encoded angle.
    pub angle_scale: f64,
}

impl Default for CircuitConfig {
    fn default() -> Self {
        Self { entanglement: Entanglement::Chain, readout: Readout::MeanZ, angle_scale: 1.0 }
    }
}

impl CircuitConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.angle_scale.is_finite() && self.angle_scale > 0.0) {
            return invalid(format!("angle_scale must be positive, got {}", self.angle_scale));
        }
        Ok(())
    }

    pub fn cnot_pairs(&self) -> &'static [(usize, usize)] {
        match self.entanglement {
            Entanglement::Chain => &[(0, 1), (1, 2), (2, 3)],
            Entanglement::Ring => &[(0, 1), (1, 2), (2, 3), (3, 0)],
        }
    }
}

/// Runs the fixed 4-qubit kernel circuit on one encoded patch.
///
/// `angles[n] = (ry, rz)` for qubit `n`. Returns one value for
/// [`Readout::MeanZ`] or four for [`Readout::PerQubitZ`].
pub fn run_patch_circuit(angles: &[(f64, f64)], config: &CircuitConfig) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(KERNEL_QUBITS);
    run_patch_circuit_into(angles, config, &mut out)?;
    Ok(out)
}

pub(crate) fn run_patch_circuit_into(
    angles: &[(f64, f64)],
    config: &CircuitConfig,
    out: &mut Vec<f64>,
) -> Result<()> {
    if angles.len() != KERNEL_QUBITS {
        return invalid(format!("expected {KERNEL_QUBITS} angle pairs, got {}", angles.len()));
    }
    config.validate()?;
    let mut state = StateVector::ground(KERNEL_QUBITS)?;
    for (q, &(ry, rz)) in angles.iter().enumerate() {
        state.apply_ry(q, ry * config.angle_scale)?;
        state.apply_rz(q, rz * config.angle_scale)?;
    }
    for &(c, t) in config.cnot_pairs() {
        state.apply_cnot(c, t)?;
    }
    out.clear();
    match config.readout {
        Readout::MeanZ => {
            let mut sum = 0.0;
            for q in 0..KERNEL_QUBITS {
                sum += state.expect_z(q)?;
            }
            out.push(sum / KERNEL_QUBITS as f64);
        }
        Readout::PerQubitZ => {
            for q in 0..KERNEL_QUBITS {
                out.push(state.expect_z(q)?);
            }
        }
    }
    Ok(())
}
