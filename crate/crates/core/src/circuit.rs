//! Parametric circuit IR and the three embedding-kernel ansatz layouts.
//!
//! Angles are stored as [`AngleSource`]s so a single template can be bound to
//! any `(x, θ)` pair. Adjoints negate the source instead of taking a matrix
//! dagger.
//!
//! # Text dump
//!
//! [`Circuit::dump`] writes one gate per line:
//!
//! ```text
//! # qek-circuit v1 qubits=2 features=2 params=4
//! H 0
//! RZ 0 x0
//! RY 1 p1
//! CRZ 1,0 p2
//! RZ 1 -x3
//! RY 0 c:0.5
//! ```
//!
//! The first field is the gate kind, the second the target qubit followed by
//! `,control` for CRZ, the third the angle source: `xI` / `-xI` for feature
//! slot `I`, `pI` / `-pI` for parameter `I`, and `c:<radians>` for a constant
//! (shortest round-trip float formatting). H has no angle field.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::statesim::Gate;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum GateKind {
    H,
    Rz,
    Ry,
    Crz,
}

impl GateKind {
    pub fn is_two_qubit(self) -> bool {
        matches!(self, GateKind::Crz)
    }

    pub fn has_angle(self) -> bool {
        !matches!(self, GateKind::H)
    }

    fn mnemonic(self) -> &'static str {
        match self {
            GateKind::H => "H",
            GateKind::Rz => "RZ",
            GateKind::Ry => "RY",
            GateKind::Crz => "CRZ",
        }
    }
}

/// Where a rotation angle comes from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AngleSource {
    Feature(usize),
    Param(usize),
    Const(f64),
    NegFeature(usize),
    NegParam(usize),
}

impl AngleSource {
    pub fn negated(self) -> Self {
        match self {
            AngleSource::Feature(i) => AngleSource::NegFeature(i),
            AngleSource::NegFeature(i) => AngleSource::Feature(i),
            AngleSource::Param(i) => AngleSource::NegParam(i),
            AngleSource::NegParam(i) => AngleSource::Param(i),
            AngleSource::Const(v) => AngleSource::Const(-v),
        }
    }

    pub fn is_feature(self) -> bool {
        matches!(self, AngleSource::Feature(_) | AngleSource::NegFeature(_))
    }

    pub fn param_index(self) -> Option<usize> {
        match self {
            AngleSource::Param(i) | AngleSource::NegParam(i) => Some(i),
            _ => None,
        }
    }

    pub fn feature_index(self) -> Option<usize> {
        match self {
            AngleSource::Feature(i) | AngleSource::NegFeature(i) => Some(i),
            _ => None,
        }
    }

    fn resolve(self, x: &[f64], theta: &[f64], feature_scale: f64) -> f64 {
        match self {
            AngleSource::Feature(i) => feature_scale * x[i],
            AngleSource::NegFeature(i) => -(feature_scale * x[i]),
            AngleSource::Param(i) => theta[i],
            AngleSource::NegParam(i) => -theta[i],
            AngleSource::Const(v) => v,
        }
    }
}

impl fmt::Display for AngleSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AngleSource::Feature(i) => write!(f, "x{i}"),
            AngleSource::NegFeature(i) => write!(f, "-x{i}"),
            AngleSource::Param(i) => write!(f, "p{i}"),
            AngleSource::NegParam(i) => write!(f, "-p{i}"),
            AngleSource::Const(v) => write!(f, "c:{v}"),
        }
    }
}

impl FromStr for AngleSource {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidArgument(format!("bad angle source `{s}`"));
        if let Some(v) = s.strip_prefix("c:") {
            return v.parse().map(AngleSource::Const).map_err(|_| bad());
        }
        let (neg, rest) = match s.strip_prefix('-') {
            Some(r) => (true, r),
            None => (false, s),
        };
        let (tag, idx) = rest.split_at(1.min(rest.len()));
        let idx: usize = idx.parse().map_err(|_| bad())?;
        Ok(match (tag, neg) {
            ("x", false) => AngleSource::Feature(idx),
            ("x", true) => AngleSource::NegFeature(idx),
            ("p", false) => AngleSource::Param(idx),
            ("p", true) => AngleSource::NegParam(idx),
            _ => return Err(bad()),
        })
    }
}

/// One gate in a parametric circuit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Instruction {
    pub kind: GateKind,
    pub target: usize,
    pub control: Option<usize>,
    pub angle: Option<AngleSource>,
}

impl Instruction {
    pub fn h(target: usize) -> Self {
        Instruction {
            kind: GateKind::H,
            target,
            control: None,
            angle: None,
        }
    }

    pub fn rz(target: usize, angle: AngleSource) -> Self {
        Instruction {
            kind: GateKind::Rz,
            target,
            control: None,
            angle: Some(angle),
        }
    }

    pub fn ry(target: usize, angle: AngleSource) -> Self {
        Instruction {
            kind: GateKind::Ry,
            target,
            control: None,
            angle: Some(angle),
        }
    }

    pub fn crz(control: usize, target: usize, angle: AngleSource) -> Self {
        Instruction {
            kind: GateKind::Crz,
            target,
            control: Some(control),
            angle: Some(angle),
        }
    }

    pub fn adjoint(&self) -> Self {
        Instruction {
            angle: self.angle.map(AngleSource::negated),
            ..*self
        }
    }

    fn is_feature_dependent(&self) -> bool {
        self.angle.is_some_and(AngleSource::is_feature)
    }

    /// True when `other` is this gate's exact inverse.
    fn cancels(&self, other: &Instruction) -> bool {
        if self.kind != other.kind || self.target != other.target || self.control != other.control {
            return false;
        }
        match (self.angle, other.angle) {
            (None, None) => true,
            (Some(AngleSource::Const(a)), Some(AngleSource::Const(b))) => a == -b,
            (Some(a), Some(b)) => a.negated() == b,
            _ => false,
        }
    }

    /// Same gate shape with a source that could be this gate's mirror in an
    /// echo circuit (features may live in different slots on either side).
    fn mirrors(&self, other: &Instruction) -> bool {
        if self.kind != other.kind || self.target != other.target || self.control != other.control {
            return false;
        }
        match (self.angle, other.angle) {
            (None, None) => true,
            (Some(AngleSource::Const(_)), Some(AngleSource::Const(_))) => true,
            (Some(AngleSource::Feature(_)), Some(AngleSource::NegFeature(_)))
            | (Some(AngleSource::NegFeature(_)), Some(AngleSource::Feature(_))) => true,
            (Some(a), Some(b)) => a.negated() == b,
            _ => false,
        }
    }
}

impl fmt::Display for Instruction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {}", self.kind.mnemonic(), self.target)?;
        if let Some(c) = self.control {
            write!(f, ",{c}")?;
        }
        if let Some(a) = self.angle {
            write!(f, " {a}")?;
        }
        Ok(())
    }
}

impl FromStr for Instruction {
    type Err = Error;

    fn from_str(line: &str) -> Result<Self> {
        let bad = |why: &str| Error::InvalidArgument(format!("bad gate line `{line}`: {why}"));
        let mut parts = line.split_whitespace();
        let kind = match parts.next() {
            Some("H") => GateKind::H,
            Some("RZ") => GateKind::Rz,
            Some("RY") => GateKind::Ry,
            Some("CRZ") => GateKind::Crz,
            _ => return Err(bad("unknown kind")),
        };
        let qubits = parts.next().ok_or_else(|| bad("missing qubit"))?;
        let (target, control) = match qubits.split_once(',') {
            Some((t, c)) => (t, Some(c.parse().map_err(|_| bad("control"))?)),
            None => (qubits, None),
        };
        let target = target.parse().map_err(|_| bad("target"))?;
        let angle = parts.next().map(str::parse).transpose()?;
        if parts.next().is_some() {
            return Err(bad("trailing fields"));
        }
        if kind.is_two_qubit() != control.is_some() || kind.has_angle() != angle.is_some() {
            return Err(bad("field count does not match gate kind"));
        }
        Ok(Instruction {
            kind,
            target,
            control,
            angle,
        })
    }
}

/// An ordered gate list over `n_qubits` wires with `n_features` feature slots
/// and `n_params` trainable parameter slots.
#[derive(Debug, Clone, PartialEq)]
pub struct Circuit {
    n_qubits: usize,
    n_features: usize,
    n_params: usize,
    gates: Vec<Instruction>,
}

impl Circuit {
    pub fn new(n_qubits: usize, n_features: usize, n_params: usize) -> Self {
        Circuit {
            n_qubits,
            n_features,
            n_params,
            gates: Vec::new(),
        }
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn n_params(&self) -> usize {
        self.n_params
    }

    pub fn gates(&self) -> &[Instruction] {
        &self.gates
    }

    pub fn len(&self) -> usize {
        self.gates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gates.is_empty()
    }

    pub fn push(&mut self, gate: Instruction) -> Result<()> {
        for q in std::iter::once(gate.target).chain(gate.control) {
            if q >= self.n_qubits {
                return Err(Error::QubitIndex {
                    index: q,
                    n_qubits: self.n_qubits,
                });
            }
        }
        if gate.control == Some(gate.target) {
            return Err(Error::ControlIsTarget(gate.target));
        }
        match gate.angle {
            Some(AngleSource::Feature(i) | AngleSource::NegFeature(i)) if i >= self.n_features => {
                return Err(Error::InvalidArgument(format!(
                    "feature slot {i} >= {}",
                    self.n_features
                )))
            }
            Some(AngleSource::Param(i) | AngleSource::NegParam(i)) if i >= self.n_params => {
                return Err(Error::InvalidArgument(format!(
                    "parameter slot {i} >= {}",
                    self.n_params
                )))
            }
            _ => {}
        }
        self.gates.push(gate);
        Ok(())
    }

    pub fn extend(&mut self, gates: impl IntoIterator<Item = Instruction>) -> Result<()> {
        gates.into_iter().try_for_each(|g| self.push(g))
    }

    /// Resolves every angle source to a constant.
    pub fn bind(&self, x: &[f64], theta: &[f64], feature_scale: f64) -> Result<Circuit> {
        if x.len() != self.n_features {
            return Err(Error::dim(
                "feature vector length",
                self.n_features,
                x.len(),
            ));
        }
        if theta.len() != self.n_params {
            return Err(Error::dim(
                "parameter vector length",
                self.n_params,
                theta.len(),
            ));
        }
        let gates = self
            .gates
            .iter()
            .map(|g| Instruction {
                angle: g
                    .angle
                    .map(|a| AngleSource::Const(a.resolve(x, theta, feature_scale))),
                ..*g
            })
            .collect();
        Ok(Circuit {
            n_qubits: self.n_qubits,
            n_features: 0,
            n_params: 0,
            gates,
        })
    }

    /// Reversed gate order with every angle negated.
    pub fn adjoint(&self) -> Circuit {
        Circuit {
            gates: self.gates.iter().rev().map(Instruction::adjoint).collect(),
            ..*self
        }
    }

    /// Concatenates `other` after `self`. Slot counts take the larger of the
    /// two.
    pub fn then(mut self, other: &Circuit) -> Result<Circuit> {
        if self.n_qubits != other.n_qubits {
            return Err(Error::dim(
                "circuit qubit count",
                self.n_qubits,
                other.n_qubits,
            ));
        }
        self.n_features = self.n_features.max(other.n_features);
        self.n_params = self.n_params.max(other.n_params);
        self.gates.extend_from_slice(&other.gates);
        Ok(self)
    }

    fn with_feature_offset(&self, offset: usize) -> Circuit {
        let shift = |a: AngleSource| match a {
            AngleSource::Feature(i) => AngleSource::Feature(i + offset),
            AngleSource::NegFeature(i) => AngleSource::NegFeature(i + offset),
            other => other,
        };
        Circuit {
            n_features: self.n_features + offset,
            gates: self
                .gates
                .iter()
                .map(|g| Instruction {
                    angle: g.angle.map(shift),
                    ..*g
                })
                .collect(),
            ..*self
        }
    }

    /// Concrete simulator gates. Fails if any source is not a constant.
    pub fn to_gates(&self) -> Result<Vec<Gate>> {
        self.gates
            .iter()
            .map(|g| {
                let angle = match g.angle {
                    None => 0.0,
                    Some(AngleSource::Const(v)) => v,
                    Some(other) => return Err(Error::Unbound(other.to_string())),
                };
                Ok(match g.kind {
                    GateKind::H => Gate::H { target: g.target },
                    GateKind::Rz => Gate::Rz {
                        target: g.target,
                        angle,
                    },
                    GateKind::Ry => Gate::Ry {
                        target: g.target,
                        angle,
                    },
                    GateKind::Crz => Gate::Crz {
                        control: g.control.expect("CRZ carries a control"),
                        target: g.target,
                        angle,
                    },
                })
            })
            .collect()
    }

    pub fn count_gates(&self) -> GateCounts {
        let two = self.gates.iter().filter(|g| g.kind.is_two_qubit()).count();
        GateCounts {
            one_qubit: self.gates.len() - two,
            two_qubit: two,
        }
    }

    pub fn dump(&self) -> String {
        let mut out = format!(
            "# qek-circuit v1 qubits={} features={} params={}\n",
            self.n_qubits, self.n_features, self.n_params
        );
        for g in &self.gates {
            out.push_str(&g.to_string());
            out.push('\n');
        }
        out
    }

    pub fn parse_dump(text: &str) -> Result<Circuit> {
        let mut lines = text.lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::InvalidArgument("empty circuit dump".into()))?;
        let fields: Vec<&str> = header.split_whitespace().collect();
        let field = |key: &str| -> Result<usize> {
            fields
                .iter()
                .find_map(|f| f.strip_prefix(key)?.strip_prefix('='))
                .and_then(|v| v.parse().ok())
                .ok_or_else(|| Error::InvalidArgument(format!("dump header missing `{key}`")))
        };
        if fields.get(1) != Some(&"qek-circuit") || fields.get(2) != Some(&"v1") {
            return Err(Error::InvalidArgument(format!(
                "bad dump header `{header}`"
            )));
        }
        let mut circuit = Circuit::new(field("qubits")?, field("features")?, field("params")?);
        for line in lines.filter(|l| !l.trim().is_empty()) {
            circuit.push(line.parse()?)?;
        }
        Ok(circuit)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct GateCounts {
    pub one_qubit: usize,
    pub two_qubit: usize,
}

impl GateCounts {
    pub fn total(&self) -> usize {
        self.one_qubit + self.two_qubit
    }
}

/// Placement of the feature layers relative to the trainable layers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Architecture {
    /// `(F P_1)(F P_2)…(F P_L)`
    DataFirst,
    /// `(P_1 F)(P_2 F)…(P_L F)`
    DataLast,
    /// `F (P_1 F)(P_2 F)…(P_L F)`
    DataWeaved,
}

impl Architecture {
    pub const ALL: [Architecture; 3] = [
        Architecture::DataFirst,
        Architecture::DataLast,
        Architecture::DataWeaved,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Architecture::DataFirst => "data-first",
            Architecture::DataLast => "data-last",
            Architecture::DataWeaved => "data-weaved",
        }
    }
}

impl fmt::Display for Architecture {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Architecture {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "data-first" | "first" | "df" => Ok(Architecture::DataFirst),
            "data-last" | "last" | "dl" => Ok(Architecture::DataLast),
            "data-weaved" | "weaved" | "dw" => Ok(Architecture::DataWeaved),
            _ => Err(Error::InvalidArgument(format!(
                "unknown architecture `{s}` (expected data-first, data-last or data-weaved)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct AnsatzSpec {
    pub arch: Architecture,
    pub n_qubits: usize,
    pub n_layers: usize,
}

impl AnsatzSpec {
    pub fn new(arch: Architecture, n_qubits: usize, n_layers: usize) -> Result<Self> {
        if n_qubits == 0 || n_qubits > crate::statesim::MAX_QUBITS {
            return Err(Error::QubitCount(n_qubits));
        }
        Ok(AnsatzSpec {
            arch,
            n_qubits,
            n_layers,
        })
    }

    /// `2 · n_qubits · L`: one RY and one ring CRZ slot per qubit per layer.
    /// On a single qubit the ring is empty, so every second slot is unused.
    pub fn param_count(&self) -> usize {
        2 * self.n_qubits * self.n_layers
    }

    pub fn feature_layer_count(&self) -> usize {
        match self.arch {
            Architecture::DataWeaved => self.n_layers + 1,
            _ => self.n_layers,
        }
    }

    pub fn build(&self) -> Circuit {
        build_ansatz(self)
    }
}

/// H on every wire, then `RZ(x_q)` on every wire.
pub fn feature_layer(n_qubits: usize) -> Vec<Instruction> {
    (0..n_qubits)
        .map(Instruction::h)
        .chain((0..n_qubits).map(|q| Instruction::rz(q, AngleSource::Feature(q))))
        .collect()
}

/// `RY(θ_{base+q})` on every wire, then a CRZ ring `q → (q+1) mod n` with
/// angles `θ_{base+n+q}`, where `base = 2 · n_qubits · layer_index`.
pub fn param_layer(n_qubits: usize, layer_index: usize) -> Vec<Instruction> {
    let base = 2 * n_qubits * layer_index;
    let rotations = (0..n_qubits).map(|q| Instruction::ry(q, AngleSource::Param(base + q)));
    let ring = (0..n_qubits).filter(|_| n_qubits > 1).map(|q| {
        Instruction::crz(
            q,
            (q + 1) % n_qubits,
            AngleSource::Param(base + n_qubits + q),
        )
    });
    rotations.chain(ring).collect()
}

pub fn build_ansatz(spec: &AnsatzSpec) -> Circuit {
    let n = spec.n_qubits;
    let mut gates = Vec::new();
    if spec.arch == Architecture::DataWeaved {
        gates.extend(feature_layer(n));
    }
    for layer in 0..spec.n_layers {
        match spec.arch {
            Architecture::DataFirst => {
                gates.extend(feature_layer(n));
                gates.extend(param_layer(n, layer));
            }
            Architecture::DataLast | Architecture::DataWeaved => {
                gates.extend(param_layer(n, layer));
                gates.extend(feature_layer(n));
            }
        }
    }
    Circuit {
        n_qubits: n,
        n_features: n,
        n_params: spec.param_count(),
        gates,
    }
}

pub fn bind(circuit: &Circuit, x: &[f64], theta: &[f64], feature_scale: f64) -> Result<Circuit> {
    circuit.bind(x, theta, feature_scale)
}

pub fn adjoint(circuit: &Circuit) -> Circuit {
    circuit.adjoint()
}

pub fn count_gates(circuit: &Circuit) -> GateCounts {
    circuit.count_gates()
}

/// Unbound Loschmidt echo `U(x', θ)` followed by `U(x, θ)†`.
///
/// Feature slots `0..n` hold `x'` and slots `n..2n` hold `x`, so binding with
/// `[x', x]` yields [`echo_circuit`].
pub fn echo_template(spec: &AnsatzSpec) -> Circuit {
    let ansatz = build_ansatz(spec);
    let mirrored = ansatz.adjoint().with_feature_offset(spec.n_qubits);
    ansatz.then(&mirrored).expect("same register width")
}

/// Bound echo circuit whose all-zeros probability is `|⟨Φ(x)|Φ(x')⟩|²`.
pub fn echo_circuit(
    spec: &AnsatzSpec,
    x: &[f64],
    x_prime: &[f64],
    theta: &[f64],
    feature_scale: f64,
) -> Result<Circuit> {
    let n = spec.n_qubits;
    if x.len() != n {
        return Err(Error::dim("feature vector length", n, x.len()));
    }
    if x_prime.len() != n {
        return Err(Error::dim("feature vector length", n, x_prime.len()));
    }
    let slots: Vec<f64> = x_prime.iter().chain(x).copied().collect();
    echo_template(spec).bind(&slots, theta, feature_scale)
}

/// Cancels mirrored gate pairs at the junction of an echo circuit.
///
/// Starting from the middle, gate pairs `(g, g†)` are removed while `g` does
/// not depend on a feature and its partner is its exact inverse. Returns the
/// simplified circuit and the number of gates removed.
pub fn erase_redundant(echo: &Circuit) -> Result<(Circuit, usize)> {
    let gates = echo.gates();
    if !gates.len().is_multiple_of(2) {
        return Err(Error::MalformedEcho(format!(
            "odd gate count {}",
            gates.len()
        )));
    }
    let half = gates.len() / 2;
    for k in 0..half {
        let (left, right) = (&gates[half - 1 - k], &gates[half + k]);
        if !left.mirrors(right) {
            return Err(Error::MalformedEcho(format!(
                "gate {} (`{left}`) is not mirrored by gate {} (`{right}`)",
                half - 1 - k,
                half + k
            )));
        }
    }
    let mut peeled = 0;
    while peeled < half {
        let (left, right) = (&gates[half - 1 - peeled], &gates[half + peeled]);
        if left.is_feature_dependent() || !left.cancels(right) {
            break;
        }
        peeled += 1;
    }
    let kept = gates[..half - peeled]
        .iter()
        .chain(&gates[half + peeled..])
        .copied()
        .collect();
    Ok((
        Circuit {
            gates: kept,
            ..*echo
        },
        2 * peeled,
    ))
}
