//! Boolean-function oracles with an explicit marked set, their subfunctions,
//! and the gate-level construction of a subfunction phase oracle from a
//! bit-flip oracle.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::bits::{low_mask, BitString};
use crate::circuit::{Gate, GateSequence};
use crate::error::{Error, Result};

/// `f : {0,1}^width -> {0,1}` given by its marked set.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct MarkedOracle {
    width: usize,
    marked: BTreeSet<BitString>,
}

impl MarkedOracle {
    /// Oracle marking exactly `target`.
    pub fn marked(width: usize, target: BitString) -> Result<Self> {
        if target.width() != width {
            return Err(Error::WidthMismatch {
                expected: width,
                found: target.width(),
            });
        }
        Ok(Self {
            width,
            marked: BTreeSet::from([target]),
        })
    }

    /// Identically-zero function.
    pub fn empty(width: usize) -> Self {
        Self {
            width,
            marked: BTreeSet::new(),
        }
    }

    pub fn from_marked_set(width: usize, marked: impl IntoIterator<Item = BitString>) -> Result<Self> {
        let marked: BTreeSet<_> = marked.into_iter().collect();
        if let Some(bad) = marked.iter().find(|b| b.width() != width) {
            return Err(Error::WidthMismatch {
                expected: width,
                found: bad.width(),
            });
        }
        Ok(Self { width, marked })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn marked_set(&self) -> &BTreeSet<BitString> {
        &self.marked
    }

    /// The single marked string, if there is exactly one.
    pub fn target(&self) -> Option<BitString> {
        if self.marked.len() == 1 {
            self.marked.iter().next().copied()
        } else {
            None
        }
    }

    pub fn marked_indices(&self) -> impl Iterator<Item = usize> + '_ {
        self.marked.iter().map(|b| b.index())
    }

    /// Classical query `f(x)`.
    pub fn eval(&self, x: &BitString) -> Result<bool> {
        if x.width() != self.width {
            return Err(Error::WidthMismatch {
                expected: self.width,
                found: x.width(),
            });
        }
        Ok(self.marked.contains(x))
    }

    /// `f_i(x) = f(x ∥ i)` on `width - k` bits.
    pub fn subfunction(&self, id: &SubfunctionId) -> Result<MarkedOracle> {
        let k = id.k();
        if k >= self.width {
            return Err(Error::OutOfRange {
                what: "subfunction suffix width k",
                value: k as i64,
                allowed: format!("0..{}", self.width),
            });
        }
        let mask = low_mask(k);
        let width = self.width - k;
        let marked = self
            .marked
            .iter()
            .filter(|t| t.value() & mask == id.i().value())
            .map(|t| BitString::new(width, t.value() >> k).expect("fits"))
            .collect();
        Ok(MarkedOracle { width, marked })
    }

    /// `f_{i,x}(y) = f_i(x ∥ y)` on `width - p` bits.
    pub fn restrict_prefix(&self, prefix: &BitString) -> Result<MarkedOracle> {
        let p = prefix.width();
        if p >= self.width {
            return Err(Error::WidthMismatch {
                expected: self.width - 1,
                found: p,
            });
        }
        let width = self.width - p;
        let marked = self
            .marked
            .iter()
            .filter(|t| t.prefix(p) == *prefix)
            .map(|t| t.suffix(width))
            .collect();
        Ok(MarkedOracle { width, marked })
    }
}

/// Names the subfunction owned by one node: the trailing `k` input bits are
/// fixed to `i`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SubfunctionId {
    k: usize,
    i: BitString,
}

impl SubfunctionId {
    pub fn new(i: BitString) -> Self {
        Self { k: i.width(), i }
    }

    pub fn parse(k: usize, i: &str) -> Result<Self> {
        let i = BitString::parse(i)?;
        if i.width() != k {
            return Err(Error::WidthMismatch {
                expected: k,
                found: i.width(),
            });
        }
        Ok(Self { k, i })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn i(&self) -> BitString {
        self.i
    }

    /// All `2^k` ids in increasing order of `i`.
    pub fn all(k: usize) -> impl Iterator<Item = SubfunctionId> {
        BitString::all(k).map(SubfunctionId::new)
    }
}

/// A bit-flip oracle `|x>|b> -> |x>|b ⊕ f(x)>` on `n + 1` qubits, the last
/// qubit being the ancilla.
#[derive(Clone, Debug, PartialEq)]
pub struct BitFlipOracle {
    n: usize,
    gates: GateSequence,
}

impl BitFlipOracle {
    /// Wrap a gate sequence claimed to implement a bit-flip oracle on `n`
    /// input bits.
    pub fn from_gates(n: usize, gates: GateSequence) -> Result<Self> {
        if n == 0 || gates.width() != n + 1 {
            return Err(Error::WidthMismatch {
                expected: n + 1,
                found: gates.width(),
            });
        }
        Ok(Self { n, gates })
    }

    /// Compile `f`: for each marked string, X-conjugate the zero positions
    /// around a multi-controlled X (H · MCZ · H) on the ancilla.
    pub fn compile(f: &MarkedOracle) -> Result<Self> {
        let n = f.width();
        let anc = n;
        let mut gates = GateSequence::new(n + 1);
        for t in f.marked_set() {
            let zeros: Vec<usize> = (0..n).filter(|&j| !t.bit(j)).collect();
            for &j in &zeros {
                gates.push(Gate::X(j))?;
            }
            gates.push(Gate::H(anc))?;
            gates.push(Gate::Mcu {
                qubits: (0..=n).collect(),
                theta: std::f64::consts::PI,
            })?;
            gates.push(Gate::H(anc))?;
            for &j in &zeros {
                gates.push(Gate::X(j))?;
            }
        }
        Ok(Self { n, gates })
    }

    pub fn input_width(&self) -> usize {
        self.n
    }

    pub fn gates(&self) -> &GateSequence {
        &self.gates
    }
}

/// Gate form of `U_{f_i}^α` built from the bit-flip oracle for `f`.
///
/// Register layout on `n + 1` qubits: `x` (n - k), then the k-register that
/// holds `i`, then the ancilla. Acting on `|x>|0^k>|0>` the sequence yields
/// `e^{iα f_i(x)}|x>|0^k>|0>`: X gates load `i`, the oracle writes
/// `f(x ∥ i)` to the ancilla, `diag(1, e^{iα})` on the ancilla kicks the
/// phase, the oracle uncomputes, and the same X gates unload `i`.
pub fn synthesize_subfunction_phase_oracle(
    bit_oracle: &BitFlipOracle,
    id: &SubfunctionId,
    alpha: f64,
) -> Result<GateSequence> {
    let n = bit_oracle.input_width();
    let k = id.k();
    if k >= n {
        return Err(Error::OutOfRange {
            what: "subfunction suffix width k",
            value: k as i64,
            allowed: format!("0..{n}"),
        });
    }
    let load: Vec<usize> = (0..k).filter(|&j| id.i().bit(j)).map(|j| n - k + j).collect();
    let mut seq = GateSequence::new(n + 1);
    for &q in &load {
        seq.push(Gate::X(q))?;
    }
    seq.append(bit_oracle.gates())?;
    seq.push(Gate::Phase(n, alpha))?;
    seq.append(bit_oracle.gates())?;
    for &q in &load {
        seq.push(Gate::X(q))?;
    }
    Ok(seq)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn b(s: &str) -> BitString {
        BitString::parse(s).unwrap()
    }

    fn id(s: &str) -> SubfunctionId {
        SubfunctionId::new(b(s))
    }

    #[test]
    fn marked_oracle_eval() {
        let f = MarkedOracle::marked(5, b("01100")).unwrap();
        assert!(f.eval(&b("01100")).unwrap());
        assert!(!f.eval(&b("00000")).unwrap());
        let f = MarkedOracle::marked(12, b("111000001111")).unwrap();
        assert!(f.eval(&b("111000001111")).unwrap());
        let f = MarkedOracle::marked(1, b("0")).unwrap();
        assert!(f.eval(&b("0")).unwrap());
        assert!(!f.eval(&b("1")).unwrap());
        assert!(MarkedOracle::marked(4, b("01100")).is_err());
        assert!(f.eval(&b("00")).is_err());
    }

    #[test]
    fn five_qubit_subfunctions() {
        let f = MarkedOracle::marked(5, b("01100")).unwrap();
        let f0 = f.subfunction(&id("0")).unwrap();
        assert_eq!(f0.target(), Some(b("0110")));
        let f1 = f.subfunction(&id("1")).unwrap();
        assert_eq!(f1.width(), 4);
        assert!(f1.marked_set().is_empty());

        let f001 = f0.restrict_prefix(&b("01")).unwrap();
        assert_eq!(f001.target(), Some(b("10")));
        assert!(f001.eval(&b("10")).unwrap());
        let f110 = f1.restrict_prefix(&b("10")).unwrap();
        assert!(f110.marked_set().is_empty());
        assert!(!f110.eval(&b("10")).unwrap());
    }

    #[test]
    fn twelve_qubit_subfunctions() {
        let f = MarkedOracle::marked(12, b("111000001111")).unwrap();
        let f1 = f.subfunction(&id("1")).unwrap();
        assert_eq!(f1.target(), Some(b("11100000111")));
        let f1111 = f1.restrict_prefix(&b("111")).unwrap();
        assert_eq!(f1111.target(), Some(b("00000111")));
        assert!(f.subfunction(&id("0")).unwrap().marked_set().is_empty());
    }

    #[test]
    fn subfunction_width_checked() {
        let f = MarkedOracle::marked(3, b("010")).unwrap();
        assert!(f.subfunction(&id("010")).is_err());
        assert!(f.restrict_prefix(&b("010")).is_err());
        assert!(SubfunctionId::parse(2, "1").is_err());
    }

    #[test]
    fn bit_flip_oracle_width_checked() {
        assert!(BitFlipOracle::from_gates(3, GateSequence::new(3)).is_err());
        assert!(BitFlipOracle::from_gates(3, GateSequence::new(4)).is_ok());
    }
}
