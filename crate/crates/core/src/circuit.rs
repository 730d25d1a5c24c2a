//! Elementary-gate form of operators, used for noise insertion and for
//! dumping circuits as text.
//!
//! Qubit `q` is position `q` of an MSB-first bit string. The text format is
//! one gate per line, `NAME q0 [q1 ...] [angle]`; gates that take an angle
//! always carry it as the last token. Lines starting with `#` are comments,
//! and a leading `# width N` comment fixes the register width.

use std::fmt::Write as _;
use std::ops::Range;

use crate::error::{Error, Result};
use crate::state::{Matrix2, MixedState, PureState, C64};

#[derive(Clone, Debug, PartialEq)]
pub enum Gate {
    H(usize),
    X(usize),
    Z(usize),
    T(usize),
    Tdg(usize),
    Rx(usize, f64),
    Rz(usize, f64),
    /// `diag(1, e^{iθ})`.
    Phase(usize, f64),
    Cnot { control: usize, target: usize },
    /// `diag(1, ..., 1, e^{iθ})` over the listed qubits: the phase fires when
    /// all of them are 1. With one qubit this is [`Gate::Phase`].
    Mcu { qubits: Vec<usize>, theta: f64 },
}

impl Gate {
    pub fn name(&self) -> &'static str {
        match self {
            Gate::H(_) => "H",
            Gate::X(_) => "X",
            Gate::Z(_) => "Z",
            Gate::T(_) => "T",
            Gate::Tdg(_) => "TDG",
            Gate::Rx(..) => "RX",
            Gate::Rz(..) => "RZ",
            Gate::Phase(..) => "U1",
            Gate::Cnot { .. } => "CNOT",
            Gate::Mcu { .. } => "MCU",
        }
    }

    /// Qubits the gate acts on, in order.
    pub fn qubits(&self) -> Vec<usize> {
        match self {
            Gate::H(q)
            | Gate::X(q)
            | Gate::Z(q)
            | Gate::T(q)
            | Gate::Tdg(q)
            | Gate::Rx(q, _)
            | Gate::Rz(q, _)
            | Gate::Phase(q, _) => vec![*q],
            Gate::Cnot { control, target } => vec![*control, *target],
            Gate::Mcu { qubits, .. } => qubits.clone(),
        }
    }

    fn angle(&self) -> Option<f64> {
        match self {
            Gate::Rx(_, a) | Gate::Rz(_, a) | Gate::Phase(_, a) => Some(*a),
            Gate::Mcu { theta, .. } => Some(*theta),
            _ => None,
        }
    }

    /// Matrix of a single-qubit gate.
    pub fn matrix(&self) -> Option<Matrix2> {
        let z = C64::new(0.0, 0.0);
        let o = C64::new(1.0, 0.0);
        let h = C64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
        Some(match self {
            Gate::H(_) => [[h, h], [h, -h]],
            Gate::X(_) => [[z, o], [o, z]],
            Gate::Z(_) => [[o, z], [z, -o]],
            Gate::T(_) => [[o, z], [z, C64::from_polar(1.0, std::f64::consts::FRAC_PI_4)]],
            Gate::Tdg(_) => [[o, z], [z, C64::from_polar(1.0, -std::f64::consts::FRAC_PI_4)]],
            Gate::Rx(_, a) => {
                let c = C64::new((a / 2.0).cos(), 0.0);
                let s = C64::new(0.0, -(a / 2.0).sin());
                [[c, s], [s, c]]
            }
            Gate::Rz(_, a) => [
                [C64::from_polar(1.0, -a / 2.0), z],
                [z, C64::from_polar(1.0, a / 2.0)],
            ],
            Gate::Phase(_, a) => [[o, z], [z, C64::from_polar(1.0, *a)]],
            Gate::Cnot { .. } | Gate::Mcu { .. } => return None,
        })
    }

    pub fn apply_pure(&self, state: &mut PureState) -> Result<()> {
        match self {
            Gate::Cnot { control, target } => {
                let m = state.num_qubits();
                check_distinct(m, &[*control, *target])?;
                let c = 1usize << (m - 1 - control);
                let t = 1usize << (m - 1 - target);
                swap_on_control(state.amps_mut(), c, t);
                Ok(())
            }
            Gate::Mcu { qubits, theta } => state.apply_controlled_phase(qubits, *theta),
            g => state.apply_single_qubit(g.qubits()[0], &g.matrix().expect("single-qubit gate")),
        }
    }

    pub fn apply_mixed(&self, rho: &mut MixedState) -> Result<()> {
        match self {
            Gate::Cnot { control, target } => {
                let m = rho.num_qubits();
                check_distinct(m, &[*control, *target])?;
                let c = 1usize << (m - 1 - control);
                let t = 1usize << (m - 1 - target);
                let entries = rho.entries_mut();
                swap_on_control(entries, c << m, t << m);
                swap_on_control(entries, c, t);
                Ok(())
            }
            Gate::Mcu { qubits, theta } => rho.apply_controlled_phase(qubits, *theta),
            g => rho.apply_single_qubit(g.qubits()[0], &g.matrix().expect("single-qubit gate")),
        }
    }
}

fn swap_on_control(v: &mut [C64], cmask: usize, tmask: usize) {
    for i in 0..v.len() {
        if i & cmask != 0 && i & tmask == 0 {
            v.swap(i, i | tmask);
        }
    }
}

fn check_distinct(m: usize, qubits: &[usize]) -> Result<()> {
    for (j, &q) in qubits.iter().enumerate() {
        if q >= m {
            return Err(Error::OutOfRange {
                what: "qubit index",
                value: q as i64,
                allowed: format!("0..{m}"),
            });
        }
        if qubits[..j].contains(&q) {
            return Err(Error::Parameter(format!("qubit {q} repeated in one gate")));
        }
    }
    Ok(())
}

/// A semantic operator equal (up to global phase) to a run of gates.
/// Trajectory simulation takes the shortcut when no noise event lands in
/// the run.
#[derive(Clone, Debug, PartialEq)]
pub enum Shortcut {
    /// Phase the listed basis indices by `e^{i phase}`.
    Phase { indices: Vec<usize>, phase: f64 },
    /// `(1 - e^{iθ})|φ_s><φ_s| - I` on the last `suffix` qubits.
    Diffusion { suffix: usize, theta: f64 },
}

impl Shortcut {
    pub fn apply(&self, state: &mut PureState) -> Result<()> {
        match self {
            Shortcut::Phase { indices, phase } => {
                state.apply_phase_to_indices(indices.iter().copied(), *phase);
                Ok(())
            }
            Shortcut::Diffusion { suffix, theta } => state.apply_suffix_diffusion(*suffix, *theta),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Segment {
    pub range: Range<usize>,
    pub shortcut: Shortcut,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GateSequence {
    width: usize,
    gates: Vec<Gate>,
    segments: Vec<Segment>,
}

impl GateSequence {
    pub fn new(width: usize) -> Self {
        Self {
            width,
            gates: Vec::new(),
            segments: Vec::new(),
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn gates(&self) -> &[Gate] {
        &self.gates
    }

    pub fn len(&self) -> usize {
        self.gates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gates.is_empty()
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    /// Number of (gate, touched qubit) pairs: the noise sites.
    pub fn noise_sites(&self) -> usize {
        self.gates.iter().map(|g| g.qubits().len()).sum()
    }

    pub fn push(&mut self, gate: Gate) -> Result<()> {
        let qubits = gate.qubits();
        if qubits.is_empty() {
            return Err(Error::Parameter("gate acts on no qubits".into()));
        }
        check_distinct(self.width, &qubits)?;
        self.gates.push(gate);
        Ok(())
    }

    /// Append `gates` as one run that `shortcut` reproduces.
    pub(crate) fn push_segment(&mut self, gates: Vec<Gate>, shortcut: Shortcut) -> Result<()> {
        let start = self.gates.len();
        for g in gates {
            self.push(g)?;
        }
        let end = self.gates.len();
        if end > start {
            self.segments.push(Segment {
                range: start..end,
                shortcut,
            });
        }
        Ok(())
    }

    pub fn append(&mut self, other: &GateSequence) -> Result<()> {
        if other.width != self.width {
            return Err(Error::WidthMismatch {
                expected: self.width,
                found: other.width,
            });
        }
        let offset = self.gates.len();
        self.gates.extend(other.gates.iter().cloned());
        self.segments.extend(other.segments.iter().map(|s| Segment {
            range: s.range.start + offset..s.range.end + offset,
            shortcut: s.shortcut.clone(),
        }));
        Ok(())
    }

    pub fn apply_pure(&self, state: &mut PureState) -> Result<()> {
        self.check_width(state.num_qubits())?;
        for g in &self.gates {
            g.apply_pure(state)?;
        }
        Ok(())
    }

    pub fn apply_mixed(&self, rho: &mut MixedState) -> Result<()> {
        self.check_width(rho.num_qubits())?;
        for g in &self.gates {
            g.apply_mixed(rho)?;
        }
        Ok(())
    }

    fn check_width(&self, m: usize) -> Result<()> {
        if m != self.width {
            return Err(Error::WidthMismatch {
                expected: self.width,
                found: m,
            });
        }
        Ok(())
    }

    /// Dense unitary, column `j` = image of basis state `j`. Width ≤ 10.
    pub fn unitary(&self) -> Result<Vec<Vec<C64>>> {
        if self.width > 10 {
            return Err(Error::Capacity {
                what: "dense unitary",
                requested: self.width,
                max: 10,
            });
        }
        (0..1usize << self.width)
            .map(|j| {
                let mut s = PureState::basis(self.width, j)?;
                self.apply_pure(&mut s)?;
                Ok(s.amplitudes().to_vec())
            })
            .collect()
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("# width {}\n", self.width);
        for g in &self.gates {
            out.push_str(g.name());
            for q in g.qubits() {
                write!(out, " {q}").unwrap();
            }
            if let Some(a) = g.angle() {
                write!(out, " {a:?}").unwrap();
            }
            out.push('\n');
        }
        out
    }

    /// Parse the text format. Without a `# width` header the width is one
    /// more than the largest qubit index.
    pub fn parse_text(text: &str) -> Result<Self> {
        let mut width = None;
        let mut gates = Vec::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(comment) = line.strip_prefix('#') {
                let mut it = comment.split_whitespace();
                if it.next() == Some("width") {
                    width = Some(parse_num::<usize>(it.next().unwrap_or(""), lineno)?);
                }
                continue;
            }
            gates.push(parse_gate(line, lineno)?);
        }
        let width = match width {
            Some(w) => w,
            None => gates
                .iter()
                .flat_map(|g| g.qubits())
                .max()
                .map_or(0, |q| q + 1),
        };
        let mut seq = GateSequence::new(width);
        for g in gates {
            seq.push(g)?;
        }
        Ok(seq)
    }
}

fn parse_num<T: std::str::FromStr>(tok: &str, lineno: usize) -> Result<T> {
    tok.parse()
        .map_err(|_| Error::Parameter(format!("line {}: bad number {tok:?}", lineno + 1)))
}

fn parse_gate(line: &str, lineno: usize) -> Result<Gate> {
    let toks: Vec<&str> = line.split_whitespace().collect();
    let (name, args) = toks.split_first().expect("non-empty line");
    let bad = || Error::Parameter(format!("line {}: malformed gate {line:?}", lineno + 1));
    let q = |i: usize| -> Result<usize> { parse_num(args.get(i).ok_or_else(bad)?, lineno) };
    let angle = || -> Result<f64> { parse_num(args.last().ok_or_else(bad)?, lineno) };
    let arity = |n: usize| if args.len() == n { Ok(()) } else { Err(bad()) };
    Ok(match name.to_ascii_uppercase().as_str() {
        "H" => { arity(1)?; Gate::H(q(0)?) }
        "X" => { arity(1)?; Gate::X(q(0)?) }
        "Z" => { arity(1)?; Gate::Z(q(0)?) }
        "T" => { arity(1)?; Gate::T(q(0)?) }
        "TDG" => { arity(1)?; Gate::Tdg(q(0)?) }
        "RX" => { arity(2)?; Gate::Rx(q(0)?, angle()?) }
        "RZ" => { arity(2)?; Gate::Rz(q(0)?, angle()?) }
        "U1" => { arity(2)?; Gate::Phase(q(0)?, angle()?) }
        "CNOT" => { arity(2)?; Gate::Cnot { control: q(0)?, target: q(1)? } }
        "MCU" => {
            if args.len() < 2 {
                return Err(bad());
            }
            let qubits = (0..args.len() - 1).map(q).collect::<Result<Vec<_>>>()?;
            Gate::Mcu { qubits, theta: angle()? }
        }
        _ => return Err(bad()),
    })
}
