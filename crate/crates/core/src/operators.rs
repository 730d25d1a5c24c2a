//! The composite search operators, each "phase oracle, then diffusion on a
//! suffix", both as direct state transforms and as gate sequences.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::circuit::{Gate, GateSequence, Shortcut};
use crate::error::{Error, Result};
use crate::oracle::MarkedOracle;
use crate::planner::IdgsPlan;
use crate::state::PureState;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OperatorKind {
    /// Grover iterate on the full register.
    G,
    /// Local Grover iterate: diffusion on the last `n − q` qubits.
    G1,
    /// Grover iterate on a node register.
    G2,
    /// Local Grover iterate on a node register, diffusion on `n − p − k`.
    G3,
    /// Generalised global iterate on a node register.
    G4,
    /// Generalised global iterate on the full register.
    Gg,
    /// Long's iterate, θ = φ = ω.
    L,
}

/// `[(1 − e^{iθ})|φ_s⟩⟨φ_s| − I_s]` on the last `suffix_width` qubits,
/// preceded by the phase oracle `U_f^φ`.
#[derive(Clone, Debug, PartialEq)]
pub struct SearchOperator {
    kind: OperatorKind,
    oracle: MarkedOracle,
    suffix_width: usize,
    theta: f64,
    phi: f64,
}

impl SearchOperator {
    pub fn g(oracle: MarkedOracle) -> Result<Self> {
        Self::full(OperatorKind::G, oracle, PI, PI)
    }

    pub fn g2(oracle: MarkedOracle) -> Result<Self> {
        Self::full(OperatorKind::G2, oracle, PI, PI)
    }

    /// Local iterate leaving the first `q` qubits to the oracle only.
    pub fn g1(oracle: MarkedOracle, q: usize) -> Result<Self> {
        Self::local(OperatorKind::G1, oracle, q)
    }

    pub fn g3(oracle: MarkedOracle, p: usize) -> Result<Self> {
        Self::local(OperatorKind::G3, oracle, p)
    }

    pub fn g4(oracle: MarkedOracle, theta: f64, phi: f64) -> Result<Self> {
        Self::full(OperatorKind::G4, oracle, theta, phi)
    }

    pub fn gg(oracle: MarkedOracle, theta: f64, phi: f64) -> Result<Self> {
        Self::full(OperatorKind::Gg, oracle, theta, phi)
    }

    pub fn l(oracle: MarkedOracle, omega: f64) -> Result<Self> {
        Self::full(OperatorKind::L, oracle, omega, omega)
    }

    fn full(kind: OperatorKind, oracle: MarkedOracle, theta: f64, phi: f64) -> Result<Self> {
        if oracle.width() == 0 {
            return Err(Error::Parameter("operator on a zero-width register".into()));
        }
        check_angle(theta)?;
        check_angle(phi)?;
        Ok(Self {
            kind,
            suffix_width: oracle.width(),
            oracle,
            theta,
            phi,
        })
    }

    fn local(kind: OperatorKind, oracle: MarkedOracle, prefix: usize) -> Result<Self> {
        let w = oracle.width();
        if prefix == 0 || prefix >= w {
            return Err(Error::OutOfRange {
                what: "local diffusion prefix width",
                value: prefix as i64,
                allowed: format!("1..{w}"),
            });
        }
        Ok(Self {
            kind,
            suffix_width: w - prefix,
            oracle,
            theta: PI,
            phi: PI,
        })
    }

    pub fn kind(&self) -> OperatorKind {
        self.kind
    }

    pub fn oracle(&self) -> &MarkedOracle {
        &self.oracle
    }

    pub fn width(&self) -> usize {
        self.oracle.width()
    }

    pub fn suffix_width(&self) -> usize {
        self.suffix_width
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn phi(&self) -> f64 {
        self.phi
    }

    pub fn apply(&self, state: &mut PureState) -> Result<()> {
        if state.num_qubits() != self.width() {
            return Err(Error::WidthMismatch {
                expected: self.width(),
                found: state.num_qubits(),
            });
        }
        state.apply_phase_to_indices(self.oracle.marked_indices(), self.phi);
        state.apply_suffix_diffusion(self.suffix_width, self.theta)
    }

    pub fn apply_times(&self, state: &mut PureState, times: u64) -> Result<()> {
        for _ in 0..times {
            self.apply(state)?;
        }
        Ok(())
    }

    /// Gate form: X-conjugated multi-controlled U(φ) per marked string, then
    /// `H X MCU(θ) X H` on the suffix. The compiled diffusion equals the
    /// semantic one times −1, a global phase.
    pub fn compile(&self) -> Result<GateSequence> {
        let mut seq = GateSequence::new(self.width());
        append_phase_oracle(&mut seq, &self.oracle, self.phi)?;
        append_diffusion(&mut seq, self.suffix_width, self.theta)?;
        Ok(seq)
    }
}

fn check_angle(x: f64) -> Result<()> {
    if !x.is_finite() {
        return Err(Error::NumericDomain {
            what: "operator angle",
            value: x,
        });
    }
    Ok(())
}

/// `U_f^φ` as gates; an empty marked set contributes nothing.
pub fn append_phase_oracle(seq: &mut GateSequence, oracle: &MarkedOracle, phi: f64) -> Result<()> {
    let w = oracle.width();
    if seq.width() != w {
        return Err(Error::WidthMismatch {
            expected: seq.width(),
            found: w,
        });
    }
    for t in oracle.marked_set() {
        let zeros: Vec<usize> = (0..w).filter(|&j| !t.bit(j)).collect();
        let mut gates: Vec<Gate> = zeros.iter().map(|&j| Gate::X(j)).collect();
        gates.push(Gate::Mcu {
            qubits: (0..w).collect(),
            theta: phi,
        });
        gates.extend(zeros.iter().map(|&j| Gate::X(j)));
        seq.push_segment(
            gates,
            Shortcut::Phase {
                indices: vec![t.index()],
                phase: phi,
            },
        )?;
    }
    Ok(())
}

/// `H^⊗s X^⊗s MCU(θ) X^⊗s H^⊗s` on the last `s` qubits of `seq`.
pub fn append_diffusion(seq: &mut GateSequence, s: usize, theta: f64) -> Result<()> {
    let w = seq.width();
    if s == 0 || s > w {
        return Err(Error::OutOfRange {
            what: "diffusion suffix width",
            value: s as i64,
            allowed: format!("1..={w}"),
        });
    }
    let qubits: Vec<usize> = (w - s..w).collect();
    let mut gates: Vec<Gate> = Vec::with_capacity(4 * s + 1);
    gates.extend(qubits.iter().map(|&q| Gate::H(q)));
    gates.extend(qubits.iter().map(|&q| Gate::X(q)));
    gates.push(Gate::Mcu {
        qubits: qubits.clone(),
        theta,
    });
    gates.extend(qubits.iter().map(|&q| Gate::X(q)));
    gates.extend(qubits.iter().map(|&q| Gate::H(q)));
    seq.push_segment(gates, Shortcut::Diffusion { suffix: s, theta })
}

/// Hadamard on every qubit: `|0…0⟩ → |φ⟩`.
pub fn hadamard_layer(width: usize) -> Result<GateSequence> {
    let mut seq = GateSequence::new(width);
    for q in 0..width {
        seq.push(Gate::H(q))?;
    }
    Ok(seq)
}

/// Stage-1 circuit of one node from `|0^{n−k}⟩`: H layer, `G2^{p1}`,
/// `G3^{p2}`, `G4(θ, φ)`.
pub fn stage1_circuit(plan: &IdgsPlan, f_i: &MarkedOracle) -> Result<GateSequence> {
    let ops = stage1_operators(plan, f_i)?;
    let mut seq = hadamard_layer(plan.node_width())?;
    for (op, times) in &ops {
        let c = op.compile()?;
        for _ in 0..*times {
            seq.append(&c)?;
        }
    }
    Ok(seq)
}

/// The three stage-1 operators with their repetition counts.
pub fn stage1_operators(plan: &IdgsPlan, f_i: &MarkedOracle) -> Result<[(SearchOperator, u64); 3]> {
    if f_i.width() != plan.node_width() {
        return Err(Error::WidthMismatch {
            expected: plan.node_width(),
            found: f_i.width(),
        });
    }
    Ok([
        (SearchOperator::g2(f_i.clone())?, plan.p1),
        (SearchOperator::g3(f_i.clone(), plan.p)?, plan.p2),
        (SearchOperator::g4(f_i.clone(), plan.theta, plan.phi)?, 1),
    ])
}

/// Long's search circuit from `|0^m⟩`: H layer then `L^{iterations}`.
pub fn long_circuit(oracle: &MarkedOracle, omega: f64, iterations: u64) -> Result<GateSequence> {
    let l = SearchOperator::l(oracle.clone(), omega)?.compile()?;
    let mut seq = hadamard_layer(oracle.width())?;
    for _ in 0..iterations {
        seq.append(&l)?;
    }
    Ok(seq)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bits::BitString;
    use approx::assert_abs_diff_eq;

    fn oracle(s: &str) -> MarkedOracle {
        let t = BitString::parse(s).unwrap();
        MarkedOracle::marked(t.width(), t).unwrap()
    }

    #[test]
    fn two_qubit_grover_is_exact() {
        let g = SearchOperator::g(oracle("11")).unwrap();
        let mut s = PureState::uniform(2).unwrap();
        g.apply(&mut s).unwrap();
        assert_abs_diff_eq!(s.probability(3), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn two_qubit_grover_circuit() {
        let g = SearchOperator::g(oracle("11")).unwrap();
        let c = g.compile().unwrap();
        assert_eq!(c.len(), 10);
        let u = c.unitary().unwrap();
        for j in 0..4 {
            let mut s = PureState::basis(2, j).unwrap();
            g.apply(&mut s).unwrap();
            for i in 0..4 {
                // compiled diffusion carries an overall −1
                assert_abs_diff_eq!((u[j][i] + s.amplitude(i)).norm(), 0.0, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn compiled_oracle_phases_only_the_target() {
        let f = oracle("01100");
        let mut seq = GateSequence::new(5);
        append_phase_oracle(&mut seq, &f, PI).unwrap();
        let u = seq.unitary().unwrap();
        for j in 0..32 {
            let expected = if j == 12 { -1.0 } else { 1.0 };
            assert_abs_diff_eq!(u[j][j].re, expected, epsilon = 1e-12);
            assert_abs_diff_eq!(u[j][j].im, 0.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn zero_angle_diffusion_is_minus_identity() {
        let mut seq = GateSequence::new(3);
        append_diffusion(&mut seq, 3, 0.0).unwrap();
        let u = seq.unitary().unwrap();
        for (j, col) in u.iter().enumerate() {
            for (i, a) in col.iter().enumerate() {
                let expected = if i == j { 1.0 } else { 0.0 };
                assert_abs_diff_eq!(a.norm(), expected, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn long_on_empty_oracle_is_a_global_phase() {
        let l = SearchOperator::l(MarkedOracle::empty(3), 1.234).unwrap();
        let start = PureState::uniform(3).unwrap();
        let mut s = start.clone();
        l.apply(&mut s).unwrap();
        assert_abs_diff_eq!(s.fidelity(&start), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn empty_oracle_compiles_to_diffusion_only() {
        let l = SearchOperator::l(MarkedOracle::empty(3), 1.0).unwrap();
        assert_eq!(l.compile().unwrap().len(), 13);
    }

    #[test]
    fn local_operator_validates_prefix() {
        assert!(SearchOperator::g1(oracle("0110"), 4).is_err());
        assert!(SearchOperator::g3(oracle("0110"), 0).is_err());
        assert_eq!(SearchOperator::g3(oracle("0110"), 2).unwrap().suffix_width(), 2);
        assert!(SearchOperator::g4(oracle("01"), f64::NAN, 0.0).is_err());
    }

    #[test]
    fn segments_reproduce_their_gates() {
        let op = SearchOperator::g4(oracle("0110"), 2.0, 0.7).unwrap();
        let c = op.compile().unwrap();
        assert_eq!(c.segments().len(), 2);
        let mut by_gates = PureState::uniform(4).unwrap();
        c.apply_pure(&mut by_gates).unwrap();
        let mut by_shortcut = PureState::uniform(4).unwrap();
        for seg in c.segments() {
            seg.shortcut.apply(&mut by_shortcut).unwrap();
        }
        assert_abs_diff_eq!(by_gates.fidelity(&by_shortcut), 1.0, epsilon = 1e-12);
    }
}
