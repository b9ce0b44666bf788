//! Fidelity kernels `κ(x, x') = |⟨Φ(x)|Φ(x')⟩|²`, Gram matrices, ideal
//! kernels and kernel-target alignment.
//!
//! Two physical estimators are provided. The Loschmidt echo runs
//! `U(x')` then `U(x)†` and reads the all-zeros probability. The swap test
//! prepares both embeddings on separate registers and reads an ancilla.

use rayon::prelude::*;

use crate::circuit::{self, AngleSource, AnsatzSpec, Circuit, Instruction};
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::statesim::{self, State};

/// An ansatz together with a concrete parameter vector.
#[derive(Debug, Clone, Copy)]
pub struct Embedding<'a> {
    spec: &'a AnsatzSpec,
    theta: &'a [f64],
    feature_scale: f64,
}

impl<'a> Embedding<'a> {
    pub fn new(spec: &'a AnsatzSpec, theta: &'a [f64], feature_scale: f64) -> Result<Self> {
        if theta.len() != spec.param_count() {
            return Err(Error::dim(
                "parameter vector length",
                spec.param_count(),
                theta.len(),
            ));
        }
        if !feature_scale.is_finite() {
            return Err(Error::InvalidArgument(
                "feature_scale must be finite".into(),
            ));
        }
        Ok(Embedding {
            spec,
            theta,
            feature_scale,
        })
    }

    pub fn spec(&self) -> &AnsatzSpec {
        self.spec
    }

    pub fn theta(&self) -> &[f64] {
        self.theta
    }

    fn check_point(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.spec.n_qubits {
            return Err(Error::dim(
                "feature vector length",
                self.spec.n_qubits,
                x.len(),
            ));
        }
        Ok(())
    }

    /// `U(x, θ)|0⟩`.
    pub fn state(&self, x: &[f64]) -> Result<State> {
        self.check_point(x)?;
        let bound = circuit::build_ansatz(self.spec).bind(x, self.theta, self.feature_scale)?;
        let mut s = State::zero(self.spec.n_qubits)?;
        s.apply_all(&bound.to_gates()?)?;
        Ok(s)
    }

    /// Bound echo circuit for the pair.
    pub fn echo(&self, x: &[f64], x_prime: &[f64]) -> Result<Circuit> {
        circuit::echo_circuit(self.spec, x, x_prime, self.theta, self.feature_scale)
    }

    /// Kernel value via the Loschmidt echo: simulate the echo circuit and
    /// read the all-zeros probability.
    pub fn value(&self, x: &[f64], x_prime: &[f64]) -> Result<f64> {
        let echo = self.echo(x, x_prime)?;
        let mut s = State::zero(self.spec.n_qubits)?;
        s.apply_all(&echo.to_gates()?)?;
        Ok(s.zero_probability())
    }

    /// Gram matrix over `points`. Each embedding state is prepared once and
    /// the upper triangle is filled from pairwise overlaps; the diagonal is
    /// exactly 1.
    pub fn matrix(&self, points: &[Vec<f64>]) -> Result<KernelMatrix> {
        let states = self.states(points)?;
        let n = states.len();
        let upper: Vec<Vec<f64>> = (0..n)
            .into_par_iter()
            .map(|i| {
                (i + 1..n)
                    .map(|j| fidelity(&states[i], &states[j]))
                    .collect()
            })
            .collect();
        let mut m = Matrix::identity(n);
        for (i, row) in upper.iter().enumerate() {
            for (k, &v) in row.iter().enumerate() {
                let j = i + 1 + k;
                m[(i, j)] = v;
                m[(j, i)] = v;
            }
        }
        Ok(KernelMatrix(m))
    }

    /// Rectangular block `K[i][j] = κ(rows[i], cols[j])`.
    pub fn cross(&self, rows: &[Vec<f64>], cols: &[Vec<f64>]) -> Result<Matrix> {
        let row_states = self.states(rows)?;
        let col_states = self.states(cols)?;
        let data: Vec<f64> = row_states
            .par_iter()
            .flat_map_iter(|r| col_states.iter().map(move |c| fidelity(r, c)))
            .collect();
        Matrix::from_vec(rows.len(), cols.len(), data)
    }

    fn states(&self, points: &[Vec<f64>]) -> Result<Vec<State>> {
        points.par_iter().map(|x| self.state(x)).collect()
    }

    /// Finite-shot Loschmidt echo estimate.
    pub fn loschmidt_estimate(
        &self,
        x: &[f64],
        x_prime: &[f64],
        shots: u64,
        seed: u64,
    ) -> Result<f64> {
        let echo = self.echo(x, x_prime)?;
        let mut s = State::zero(self.spec.n_qubits)?;
        s.apply_all(&echo.to_gates()?)?;
        s.sample_zero_probability(shots, seed)
    }

    /// The `(2n+1)`-qubit swap-test circuit. Qubit 0 is the ancilla, qubits
    /// `1..=n` hold `U(x)|0⟩` and `n+1..=2n` hold `U(x')|0⟩`.
    pub fn swap_test_circuit(&self, x: &[f64], x_prime: &[f64]) -> Result<Circuit> {
        self.check_point(x)?;
        self.check_point(x_prime)?;
        let n = self.spec.n_qubits;
        let ansatz = circuit::build_ansatz(self.spec);
        let left = ansatz.bind(x, self.theta, self.feature_scale)?;
        let right = ansatz.bind(x_prime, self.theta, self.feature_scale)?;
        let mut c = Circuit::new(2 * n + 1, 0, 0);
        c.extend(shift_qubits(&left, 1))?;
        c.extend(shift_qubits(&right, n + 1))?;
        c.push(Instruction::h(0))?;
        for q in 0..n {
            c.extend(controlled_swap(0, 1 + q, n + 1 + q))?;
        }
        c.push(Instruction::h(0))?;
        Ok(c)
    }

    /// Exact probability of reading the swap-test ancilla as 0.
    pub fn swap_test_probability(&self, x: &[f64], x_prime: &[f64]) -> Result<f64> {
        let c = self.swap_test_circuit(x, x_prime)?;
        let mut s = State::zero(c.n_qubits())?;
        s.apply_all(&c.to_gates()?)?;
        s.qubit_zero_probability(0)
    }

    /// Kernel value recovered from the exact swap-test ancilla probability,
    /// `2·P(0) − 1` clamped to `[0, 1]`.
    pub fn swap_test_value(&self, x: &[f64], x_prime: &[f64]) -> Result<f64> {
        Ok(swap_to_kernel(self.swap_test_probability(x, x_prime)?))
    }

    /// Finite-shot swap-test kernel estimate.
    pub fn swap_test_estimate(
        &self,
        x: &[f64],
        x_prime: &[f64],
        shots: u64,
        seed: u64,
    ) -> Result<f64> {
        let p = self.swap_test_probability(x, x_prime)?;
        Ok(swap_to_kernel(statesim::sample_probability(
            p, shots, seed,
        )?))
    }
}

fn swap_to_kernel(p_zero: f64) -> f64 {
    (2.0 * p_zero - 1.0).clamp(0.0, 1.0)
}

fn fidelity(a: &State, b: &State) -> f64 {
    a.inner(b)
        .expect("states share a register width")
        .norm_sqr()
}

fn shift_qubits(c: &Circuit, offset: usize) -> Vec<Instruction> {
    c.gates()
        .iter()
        .map(|g| Instruction {
            target: g.target + offset,
            control: g.control.map(|q| q + offset),
            ..*g
        })
        .collect()
}

/// Controlled phase `diag(1, 1, 1, e^{iφ})`, exact up to a global phase.
fn controlled_phase(control: usize, target: usize, phi: f64) -> [Instruction; 2] {
    [
        Instruction::crz(control, target, AngleSource::Const(phi)),
        Instruction::rz(control, AngleSource::Const(phi / 2.0)),
    ]
}

fn cnot(control: usize, target: usize) -> Vec<Instruction> {
    let mut g = vec![Instruction::h(target)];
    g.extend(controlled_phase(control, target, std::f64::consts::PI));
    g.push(Instruction::h(target));
    g
}

fn toffoli(c1: usize, c2: usize, target: usize) -> Vec<Instruction> {
    use std::f64::consts::FRAC_PI_2;
    let mut g = vec![Instruction::h(target)];
    g.extend(controlled_phase(c2, target, FRAC_PI_2));
    g.extend(cnot(c1, c2));
    g.extend(controlled_phase(c2, target, -FRAC_PI_2));
    g.extend(cnot(c1, c2));
    g.extend(controlled_phase(c1, target, FRAC_PI_2));
    g.push(Instruction::h(target));
    g
}

/// Fredkin gate on `(control, a, b)` in the H/RZ/CRZ gate set.
pub fn controlled_swap(control: usize, a: usize, b: usize) -> Vec<Instruction> {
    let mut g = cnot(b, a);
    g.extend(toffoli(control, a, b));
    g.extend(cnot(b, a));
    g
}

/// Symmetric Gram matrix of kernel values with unit diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelMatrix(Matrix);

impl KernelMatrix {
    /// Wraps a square matrix, checking symmetry (1e-12), unit diagonal
    /// (1e-10) and entry range.
    pub fn from_matrix(m: Matrix) -> Result<Self> {
        if m.rows() != m.cols() {
            return Err(Error::dim("kernel matrix columns", m.rows(), m.cols()));
        }
        if m.max_asymmetry() > 1e-12 {
            return Err(Error::InvalidArgument(
                "kernel matrix is not symmetric".into(),
            ));
        }
        for i in 0..m.rows() {
            if (m[(i, i)] - 1.0).abs() > 1e-10 {
                return Err(Error::InvalidArgument(format!(
                    "kernel diagonal entry {i} is {} (expected 1)",
                    m[(i, i)]
                )));
            }
        }
        if m.as_slice().iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument(
                "kernel matrix has non-finite entries".into(),
            ));
        }
        Ok(KernelMatrix(m))
    }

    /// Wraps a square matrix without checking kernel invariants.
    pub fn from_matrix_unchecked(m: Matrix) -> Result<Self> {
        if m.rows() != m.cols() {
            return Err(Error::dim("kernel matrix columns", m.rows(), m.cols()));
        }
        Ok(KernelMatrix(m))
    }

    pub fn n(&self) -> usize {
        self.0.rows()
    }

    pub fn matrix(&self) -> &Matrix {
        &self.0
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.0[(i, j)]
    }

    /// Sub-matrix on the given indices.
    pub fn select(&self, idx: &[usize]) -> KernelMatrix {
        let mut m = Matrix::zeros(idx.len(), idx.len());
        for (a, &i) in idx.iter().enumerate() {
            for (b, &j) in idx.iter().enumerate() {
                m[(a, b)] = self.0[(i, j)];
            }
        }
        KernelMatrix(m)
    }

    /// CSV with an `n=<int>` header line followed by `n` comma-separated rows.
    pub fn to_csv(&self) -> String {
        let mut out = format!("n={}\n", self.n());
        for i in 0..self.n() {
            let row: Vec<String> = self.0.row(i).iter().map(|v| v.to_string()).collect();
            out.push_str(&row.join(","));
            out.push('\n');
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let parse_err = |line: usize, msg: String| Error::Parse {
            path: "<kernel csv>".into(),
            line,
            msg,
        };
        let mut lines = text.lines();
        let n: usize = lines
            .next()
            .and_then(|h| h.trim().strip_prefix("n="))
            .and_then(|v| v.parse().ok())
            .ok_or_else(|| parse_err(1, "expected `n=<int>` header".into()))?;
        let mut data = Vec::with_capacity(n * n);
        for (k, line) in lines.enumerate().take(n) {
            let row: Vec<f64> = line
                .split(',')
                .map(|v| v.trim().parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| parse_err(k + 2, e.to_string()))?;
            if row.len() != n {
                return Err(parse_err(
                    k + 2,
                    format!("expected {n} values, got {}", row.len()),
                ));
            }
            data.extend(row);
        }
        if data.len() != n * n {
            return Err(parse_err(n + 1, "too few rows".into()));
        }
        KernelMatrix::from_matrix(Matrix::from_vec(n, n, data)?)
    }
}

/// `K_ideal[i][j] = +1` for same labels, `-1` otherwise.
#[derive(Debug, Clone, PartialEq)]
pub struct IdealKernel(Matrix);

impl IdealKernel {
    pub fn n(&self) -> usize {
        self.0.rows()
    }

    pub fn matrix(&self) -> &Matrix {
        &self.0
    }

    pub fn into_kernel(self) -> KernelMatrix {
        KernelMatrix(self.0)
    }
}

pub fn ideal_kernel<L: PartialEq>(labels: &[L]) -> IdealKernel {
    let n = labels.len();
    let mut m = Matrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            m[(i, j)] = if labels[i] == labels[j] { 1.0 } else { -1.0 };
        }
    }
    IdealKernel(m)
}

/// Kernel-target alignment
/// `Σ K_ideal[i][j]·K[i][j] / (n · sqrt(Σ K[i][j]²))`.
pub fn target_alignment<L: PartialEq>(k: &KernelMatrix, labels: &[L]) -> Result<f64> {
    let n = k.n();
    if labels.len() != n {
        return Err(Error::dim("label count", n, labels.len()));
    }
    if n < 2 {
        return Err(Error::InvalidArgument(
            "alignment needs at least two samples".into(),
        ));
    }
    let mut inner = 0.0;
    let mut norm_sq = 0.0;
    for i in 0..n {
        for j in 0..n {
            let v = k.get(i, j);
            inner += if labels[i] == labels[j] { v } else { -v };
            norm_sq += v * v;
        }
    }
    if norm_sq == 0.0 {
        return Err(Error::DegenerateKernel);
    }
    Ok(inner / (n as f64 * norm_sq.sqrt()))
}

pub fn kernel_value(
    spec: &AnsatzSpec,
    theta: &[f64],
    x: &[f64],
    x_prime: &[f64],
    feature_scale: f64,
) -> Result<f64> {
    Embedding::new(spec, theta, feature_scale)?.value(x, x_prime)
}

pub fn kernel_matrix(
    spec: &AnsatzSpec,
    theta: &[f64],
    points: &[Vec<f64>],
    feature_scale: f64,
) -> Result<KernelMatrix> {
    Embedding::new(spec, theta, feature_scale)?.matrix(points)
}
