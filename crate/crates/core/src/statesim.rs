//! Dense statevector simulator.
//!
//! Amplitude order: qubit 0 is the most significant bit of the basis index,
//! so for `n` qubits the bit for qubit `q` sits at position `n - 1 - q`.

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};

use crate::error::{Error, Result};

/// Upper bound on register width. 2^20 amplitudes is 16 MiB.
pub const MAX_QUBITS: usize = 20;

/// Single- and two-qubit gates with concrete angles (radians).
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Gate {
    H {
        target: usize,
    },
    /// `diag(e^{-iθ/2}, e^{iθ/2})`
    Rz {
        target: usize,
        angle: f64,
    },
    /// `[[cos θ/2, -sin θ/2], [sin θ/2, cos θ/2]]`
    Ry {
        target: usize,
        angle: f64,
    },
    /// `Rz(θ)` on `target` when `control` is 1.
    Crz {
        control: usize,
        target: usize,
        angle: f64,
    },
}

impl Gate {
    pub fn target(&self) -> usize {
        match *self {
            Gate::H { target }
            | Gate::Rz { target, .. }
            | Gate::Ry { target, .. }
            | Gate::Crz { target, .. } => target,
        }
    }

    pub fn control(&self) -> Option<usize> {
        match *self {
            Gate::Crz { control, .. } => Some(control),
            _ => None,
        }
    }

    /// The inverse gate: negated angle, H is self-inverse.
    pub fn adjoint(&self) -> Gate {
        match *self {
            Gate::H { target } => Gate::H { target },
            Gate::Rz { target, angle } => Gate::Rz {
                target,
                angle: -angle,
            },
            Gate::Ry { target, angle } => Gate::Ry {
                target,
                angle: -angle,
            },
            Gate::Crz {
                control,
                target,
                angle,
            } => Gate::Crz {
                control,
                target,
                angle: -angle,
            },
        }
    }

    /// The 2x2 matrix acting on the target qubit (row-major).
    pub fn target_matrix(&self) -> [[Complex64; 2]; 2] {
        match *self {
            Gate::H { .. } => {
                let s = Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
                [[s, s], [s, -s]]
            }
            Gate::Rz { angle, .. } | Gate::Crz { angle, .. } => {
                let half = angle / 2.0;
                let zero = Complex64::new(0.0, 0.0);
                [
                    [Complex64::from_polar(1.0, -half), zero],
                    [zero, Complex64::from_polar(1.0, half)],
                ]
            }
            Gate::Ry { angle, .. } => {
                let (s, c) = (angle / 2.0).sin_cos();
                [
                    [Complex64::new(c, 0.0), Complex64::new(-s, 0.0)],
                    [Complex64::new(s, 0.0), Complex64::new(c, 0.0)],
                ]
            }
        }
    }

    fn validate(&self, n_qubits: usize) -> Result<()> {
        let target = self.target();
        if target >= n_qubits {
            return Err(Error::QubitIndex {
                index: target,
                n_qubits,
            });
        }
        if let Some(control) = self.control() {
            if control >= n_qubits {
                return Err(Error::QubitIndex {
                    index: control,
                    n_qubits,
                });
            }
            if control == target {
                return Err(Error::ControlIsTarget(control));
            }
        }
        Ok(())
    }
}

/// A pure state of `n_qubits` qubits as a dense amplitude vector.
#[derive(Debug, Clone, PartialEq)]
pub struct State {
    n_qubits: usize,
    amplitudes: Vec<Complex64>,
}

impl State {
    /// `|0…0⟩` on `n_qubits` qubits.
    pub fn zero(n_qubits: usize) -> Result<Self> {
        if n_qubits == 0 || n_qubits > MAX_QUBITS {
            return Err(Error::QubitCount(n_qubits));
        }
        let mut amplitudes = vec![Complex64::new(0.0, 0.0); 1 << n_qubits];
        amplitudes[0] = Complex64::new(1.0, 0.0);
        Ok(State {
            n_qubits,
            amplitudes,
        })
    }

    /// Builds a state from raw amplitudes. The length must be a power of two;
    /// normalization is the caller's responsibility.
    pub fn from_amplitudes(amplitudes: Vec<Complex64>) -> Result<Self> {
        let len = amplitudes.len();
        if len < 2 || !len.is_power_of_two() {
            return Err(Error::InvalidArgument(format!(
                "amplitude vector length {len} is not a power of two >= 2"
            )));
        }
        let n_qubits = len.trailing_zeros() as usize;
        if n_qubits > MAX_QUBITS {
            return Err(Error::QubitCount(n_qubits));
        }
        Ok(State {
            n_qubits,
            amplitudes,
        })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum()
    }

    #[inline]
    fn mask(&self, qubit: usize) -> usize {
        1 << (self.n_qubits - 1 - qubit)
    }

    /// Applies `gate` in place.
    pub fn apply(&mut self, gate: &Gate) -> Result<()> {
        gate.validate(self.n_qubits)?;
        let [[m00, m01], [m10, m11]] = gate.target_matrix();
        let tmask = self.mask(gate.target());
        let cmask = gate.control().map(|c| self.mask(c));
        match gate {
            Gate::Rz { .. } | Gate::Crz { .. } => {
                // diagonal: no pairing needed
                for (idx, amp) in self.amplitudes.iter_mut().enumerate() {
                    if let Some(cm) = cmask {
                        if idx & cm == 0 {
                            continue;
                        }
                    }
                    *amp *= if idx & tmask == 0 { m00 } else { m11 };
                }
            }
            Gate::H { .. } | Gate::Ry { .. } => {
                for i0 in 0..self.amplitudes.len() {
                    if i0 & tmask != 0 {
                        continue;
                    }
                    let i1 = i0 | tmask;
                    let a0 = self.amplitudes[i0];
                    let a1 = self.amplitudes[i1];
                    self.amplitudes[i0] = m00 * a0 + m01 * a1;
                    self.amplitudes[i1] = m10 * a0 + m11 * a1;
                }
            }
        }
        Ok(())
    }

    /// Consuming variant of [`State::apply`].
    pub fn applied(mut self, gate: &Gate) -> Result<Self> {
        self.apply(gate)?;
        Ok(self)
    }

    pub fn apply_all<'a>(&mut self, gates: impl IntoIterator<Item = &'a Gate>) -> Result<()> {
        for g in gates {
            self.apply(g)?;
        }
        Ok(())
    }

    /// `⟨self|other⟩ = Σ conj(a_k) b_k`.
    pub fn inner(&self, other: &State) -> Result<Complex64> {
        if self.n_qubits != other.n_qubits {
            return Err(Error::dim(
                "state qubit count",
                self.n_qubits,
                other.n_qubits,
            ));
        }
        Ok(self
            .amplitudes
            .iter()
            .zip(&other.amplitudes)
            .map(|(a, b)| a.conj() * b)
            .sum())
    }

    /// Probability of measuring the all-zeros outcome.
    pub fn zero_probability(&self) -> f64 {
        self.amplitudes[0].norm_sqr()
    }

    /// Marginal probability of measuring `qubit` in `|0⟩`.
    pub fn qubit_zero_probability(&self, qubit: usize) -> Result<f64> {
        if qubit >= self.n_qubits {
            return Err(Error::QubitIndex {
                index: qubit,
                n_qubits: self.n_qubits,
            });
        }
        let mask = self.mask(qubit);
        Ok(self
            .amplitudes
            .iter()
            .enumerate()
            .filter(|(i, _)| i & mask == 0)
            .map(|(_, a)| a.norm_sqr())
            .sum())
    }

    /// Finite-shot estimate of [`State::zero_probability`].
    pub fn sample_zero_probability(&self, shots: u64, seed: u64) -> Result<f64> {
        sample_probability(self.zero_probability(), shots, seed)
    }
}

/// Functional form of [`State::zero`].
pub fn new_zero_state(n_qubits: usize) -> Result<State> {
    State::zero(n_qubits)
}

/// Returns a new state with `gate` applied.
pub fn apply_gate(state: &State, gate: &Gate) -> Result<State> {
    state.clone().applied(gate)
}

pub fn inner_product(a: &State, b: &State) -> Result<Complex64> {
    a.inner(b)
}

pub fn zero_probability(state: &State) -> f64 {
    state.zero_probability()
}

pub fn sample_zero_probability(state: &State, shots: u64, seed: u64) -> Result<f64> {
    state.sample_zero_probability(shots, seed)
}

/// Draws `k ~ Binomial(shots, p)` from a seeded ChaCha8 stream and returns
/// `k / shots`.
pub fn sample_probability(p: f64, shots: u64, seed: u64) -> Result<f64> {
    if shots == 0 {
        return Err(Error::InvalidArgument("shots must be >= 1".into()));
    }
    // rounding can push p a hair outside [0, 1]
    let p = p.clamp(0.0, 1.0);
    let dist = Binomial::new(shots, p)
        .map_err(|e| Error::InvalidArgument(format!("binomial({shots}, {p}): {e}")))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let k = dist.sample(&mut rng);
    Ok(k as f64 / shots as f64)
}
