//! Single-qubit Kraus channels and noisy execution of gate sequences.
//!
//! Noise is placed after every gate on every qubit the gate touches; a
//! multi-controlled phase counts once per touched qubit. Two backends are
//! available: exact density-matrix evolution, and quantum trajectories that
//! sample one Kraus branch per noise site on a pure state.

use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bits::BitString;
use crate::circuit::GateSequence;
use crate::error::{Error, Result};
use crate::operators::{long_circuit, stage1_circuit};
use crate::oracle::{MarkedOracle, SubfunctionId};
use crate::planner::{long_params, IdgsPlan};
use crate::state::{apply_matrix_on_bit, bit_of, Matrix2, MixedState, PrefixDistribution, PureState, C64};

/// Widest circuit that [`Backend::Auto`] sends to the density-matrix
/// backend.
pub const AUTO_DENSITY_MAX_WIDTH: usize = 10;

/// Fewest trajectories accepted for an estimate.
pub const MIN_TRAJECTORIES: usize = 100;

const ZERO: C64 = C64::new(0.0, 0.0);
const ONE: C64 = C64::new(1.0, 0.0);

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ChannelKind {
    AmplitudeDamping,
    PhaseDamping,
    Custom,
}

#[derive(Clone, Debug, PartialEq)]
pub struct KrausChannel {
    kind: ChannelKind,
    gamma: Option<f64>,
    kraus: Vec<Matrix2>,
}

impl KrausChannel {
    /// `E0 = diag(1, √(1−γ))`, `E1 = [[0, √γ], [0, 0]]`.
    pub fn amplitude_damping(gamma: f64) -> Result<Self> {
        check_gamma(gamma)?;
        let a = (1.0 - gamma).sqrt();
        let b = gamma.sqrt();
        Ok(Self {
            kind: ChannelKind::AmplitudeDamping,
            gamma: Some(gamma),
            kraus: vec![
                [[ONE, ZERO], [ZERO, C64::new(a, 0.0)]],
                [[ZERO, C64::new(b, 0.0)], [ZERO, ZERO]],
            ],
        })
    }

    /// `E0 = diag(1, √(1−γ))`, `E1 = diag(0, √γ)`.
    pub fn phase_damping(gamma: f64) -> Result<Self> {
        check_gamma(gamma)?;
        let a = (1.0 - gamma).sqrt();
        let b = gamma.sqrt();
        Ok(Self {
            kind: ChannelKind::PhaseDamping,
            gamma: Some(gamma),
            kraus: vec![
                [[ONE, ZERO], [ZERO, C64::new(a, 0.0)]],
                [[ZERO, ZERO], [ZERO, C64::new(b, 0.0)]],
            ],
        })
    }

    /// Arbitrary Kraus set; must satisfy `Σ E†E = I` within 1e-12.
    pub fn custom(kraus: Vec<Matrix2>) -> Result<Self> {
        if kraus.is_empty() {
            return Err(Error::Parameter("a channel needs at least one Kraus operator".into()));
        }
        let ch = Self {
            kind: ChannelKind::Custom,
            gamma: None,
            kraus,
        };
        let defect = ch.completeness_defect();
        if defect > 1e-12 {
            return Err(Error::Parameter(format!(
                "Kraus operators are not trace preserving: max |Σ E†E − I| = {defect:.3e}"
            )));
        }
        Ok(ch)
    }

    pub fn kind(&self) -> ChannelKind {
        self.kind
    }

    pub fn gamma(&self) -> Option<f64> {
        self.gamma
    }

    pub fn kraus(&self) -> &[Matrix2] {
        &self.kraus
    }

    /// `max |Σ_k E_k† E_k − I|` entry-wise.
    pub fn completeness_defect(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..2 {
            for j in 0..2 {
                let mut s = ZERO;
                for e in &self.kraus {
                    for r in 0..2 {
                        s += e[r][i].conj() * e[r][j];
                    }
                }
                let id = if i == j { ONE } else { ZERO };
                worst = worst.max((s - id).norm());
            }
        }
        worst
    }

    /// `S = Σ E ⊗ conj(E)`, indexed `S[(r'<<1)|c'][(r<<1)|c]`.
    pub fn superoperator(&self) -> [[C64; 4]; 4] {
        let mut s = [[ZERO; 4]; 4];
        for e in &self.kraus {
            for (out, row) in s.iter_mut().enumerate() {
                let (rp, cp) = (out >> 1, out & 1);
                for (inp, x) in row.iter_mut().enumerate() {
                    let (r, c) = (inp >> 1, inp & 1);
                    *x += e[rp][r] * e[cp][c].conj();
                }
            }
        }
        s
    }

    pub fn is_identity(&self) -> bool {
        self.kraus.iter().all(|e| is_scaled_identity(e).is_some())
    }

    /// The channel as a state-independent mixture `Σ p_j U_j ρ U_j†`, when
    /// every Kraus operator is proportional to a unitary. Phase damping is
    /// the mixture `{(1−λ) I, λ Z}` with `λ = (1 − √(1−γ))/2`.
    pub fn unitary_mixture(&self) -> Option<Vec<(f64, Matrix2)>> {
        if self.kind == ChannelKind::PhaseDamping {
            let g = self.gamma.expect("phase damping carries gamma");
            let lam = (1.0 - (1.0 - g).sqrt()) / 2.0;
            let z = [[ONE, ZERO], [ZERO, -ONE]];
            return Some(vec![(1.0 - lam, identity()), (lam, z)]);
        }
        let mut out = Vec::with_capacity(self.kraus.len());
        for e in &self.kraus {
            // E = c·U with U unitary iff E†E = |c|² I.
            let mut g = [[ZERO; 2]; 2];
            for (i, gi) in g.iter_mut().enumerate() {
                for (j, gij) in gi.iter_mut().enumerate() {
                    *gij = e[0][i].conj() * e[0][j] + e[1][i].conj() * e[1][j];
                }
            }
            let w = g[0][0].re;
            if (g[1][1].re - w).abs() > 1e-12 || g[0][1].norm() > 1e-12 {
                return None;
            }
            if w <= 1e-15 {
                continue;
            }
            let c = w.sqrt();
            out.push((w, e.map(|row| row.map(|x| x / c))));
        }
        Some(out)
    }
}

fn identity() -> Matrix2 {
    [[ONE, ZERO], [ZERO, ONE]]
}

fn is_scaled_identity(e: &Matrix2) -> Option<C64> {
    if e[0][1].norm() < 1e-15 && e[1][0].norm() < 1e-15 && (e[0][0] - e[1][1]).norm() < 1e-15 {
        Some(e[0][0])
    } else {
        None
    }
}

fn check_gamma(gamma: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&gamma) {
        return Err(Error::NumericDomain {
            what: "damping coefficient gamma",
            value: gamma,
        });
    }
    Ok(())
}

/// Noise model selection for one run.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Backend {
    DensityMatrix,
    Trajectories,
    /// Density matrix up to [`AUTO_DENSITY_MAX_WIDTH`] qubits, trajectories
    /// above.
    #[default]
    Auto,
}

impl Backend {
    pub fn resolve(self, width: usize) -> Backend {
        match self {
            Backend::Auto if width <= AUTO_DENSITY_MAX_WIDTH => Backend::DensityMatrix,
            Backend::Auto => Backend::Trajectories,
            b => b,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Backend::DensityMatrix => "density-matrix",
            Backend::Trajectories => "trajectories",
            Backend::Auto => "auto",
        }
    }
}

/// A damping channel applied after every gate, plus backend choice.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    pub channel: ChannelKind,
    pub gamma: f64,
    #[serde(default)]
    pub backend: Backend,
    #[serde(default = "default_trajectories")]
    pub trajectories: usize,
}

pub fn default_trajectories() -> usize {
    4000
}

impl NoiseSpec {
    pub fn new(channel: ChannelKind, gamma: f64) -> Self {
        Self {
            channel,
            gamma,
            backend: Backend::Auto,
            trajectories: default_trajectories(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.build_channel()?;
        if self.backend != Backend::DensityMatrix && self.trajectories < MIN_TRAJECTORIES {
            return Err(Error::OutOfRange {
                what: "trajectory count",
                value: self.trajectories as i64,
                allowed: format!(">= {MIN_TRAJECTORIES}"),
            });
        }
        Ok(())
    }

    pub fn build_channel(&self) -> Result<KrausChannel> {
        match self.channel {
            ChannelKind::AmplitudeDamping => KrausChannel::amplitude_damping(self.gamma),
            ChannelKind::PhaseDamping => KrausChannel::phase_damping(self.gamma),
            ChannelKind::Custom => Err(Error::Unsupported(
                "custom channels are only available through the library API".into(),
            )),
        }
    }
}

/// `ρ → Σ E ρ E†` on one qubit.
pub fn apply_channel(rho: &mut MixedState, ch: &KrausChannel, qubit: usize) -> Result<()> {
    rho.apply_superoperator(qubit, &ch.superoperator())
}

/// Evolve `rho` through `circuit` with `ch` after every gate on every
/// touched qubit.
pub fn evolve_density(circuit: &GateSequence, ch: &KrausChannel, rho: &mut MixedState) -> Result<()> {
    if rho.num_qubits() != circuit.width() {
        return Err(Error::WidthMismatch {
            expected: circuit.width(),
            found: rho.num_qubits(),
        });
    }
    let skip = ch.is_identity();
    let s = ch.superoperator();
    for g in circuit.gates() {
        g.apply_mixed(rho)?;
        if !skip {
            for q in g.qubits() {
                rho.apply_superoperator(q, &s)?;
            }
        }
    }
    Ok(())
}

/// Final density matrix of `circuit` run from `|0…0⟩` under noise.
pub fn noisy_density(circuit: &GateSequence, ch: &KrausChannel) -> Result<MixedState> {
    let mut rho = MixedState::zero(circuit.width()).map_err(|e| match e {
        Error::Capacity { requested, max, .. } => Error::Capacity {
            what: "density-matrix backend (use the trajectories backend)",
            requested,
            max,
        },
        other => other,
    })?;
    evolve_density(circuit, ch, &mut rho)?;
    Ok(rho)
}

/// One quantum trajectory of `circuit` from `|0…0⟩`.
///
/// Mixed-unitary channels draw exactly one uniform per noise site, in site
/// order and independent of the state, so runs that share a generator see
/// nested error sets as γ grows. Gate runs with a shortcut and no error
/// inside are applied through the shortcut.
pub fn run_trajectory<R: Rng + ?Sized>(circuit: &GateSequence, ch: &KrausChannel, rng: &mut R) -> Result<PureState> {
    let mut state = PureState::basis(circuit.width(), 0)?;
    if ch.is_identity() {
        apply_with_shortcuts(circuit, &mut state, &HashMap::new())?;
        return Ok(state);
    }
    match ch.unitary_mixture() {
        Some(mix) => {
            let errors = sample_mixture_errors(circuit, &mix, rng);
            apply_with_shortcuts(circuit, &mut state, &errors)?;
        }
        None => {
            for g in circuit.gates() {
                g.apply_pure(&mut state)?;
                for q in g.qubits() {
                    apply_kraus_branch(&mut state, ch, q, rng);
                }
            }
        }
    }
    Ok(state)
}

type ErrorMap = HashMap<usize, Vec<(usize, Matrix2)>>;

fn sample_mixture_errors<R: Rng + ?Sized>(circuit: &GateSequence, mix: &[(f64, Matrix2)], rng: &mut R) -> ErrorMap {
    let mut errors: ErrorMap = HashMap::new();
    for (gi, g) in circuit.gates().iter().enumerate() {
        for q in g.qubits() {
            let u: f64 = rng.gen();
            let mut acc = 0.0;
            let mut chosen = mix.len() - 1;
            for (j, (p, _)) in mix.iter().enumerate() {
                acc += p;
                if u < acc {
                    chosen = j;
                    break;
                }
            }
            let m = mix[chosen].1;
            if is_scaled_identity(&m).is_none() {
                errors.entry(gi).or_default().push((q, m));
            }
        }
    }
    errors
}

fn apply_with_shortcuts(circuit: &GateSequence, state: &mut PureState, errors: &ErrorMap) -> Result<()> {
    let m = state.num_qubits();
    let segments = circuit.segments();
    let gates = circuit.gates();
    let mut next_seg = 0;
    let mut gi = 0;
    while gi < gates.len() {
        while next_seg < segments.len() && segments[next_seg].range.start < gi {
            next_seg += 1;
        }
        if next_seg < segments.len() && segments[next_seg].range.start == gi {
            let seg = &segments[next_seg];
            if !seg.range.clone().any(|i| errors.contains_key(&i)) {
                seg.shortcut.apply(state)?;
                gi = seg.range.end;
                next_seg += 1;
                continue;
            }
        }
        gates[gi].apply_pure(state)?;
        if let Some(errs) = errors.get(&gi) {
            for (q, u) in errs {
                apply_matrix_on_bit(state.amps_mut(), bit_of(m, *q), u);
            }
        }
        gi += 1;
    }
    Ok(())
}

/// Sample one Kraus branch on `qubit` with Born probabilities and
/// renormalise.
fn apply_kraus_branch<R: Rng + ?Sized>(state: &mut PureState, ch: &KrausChannel, qubit: usize, rng: &mut R) {
    let m = state.num_qubits();
    let bit = bit_of(m, qubit);
    // reduced density matrix of the qubit
    let stride = 1usize << bit;
    let (mut r00, mut r11, mut r01) = (0.0, 0.0, ZERO);
    for chunk in state.amplitudes().chunks_exact(stride << 1) {
        let (lo, hi) = chunk.split_at(stride);
        for (a0, a1) in lo.iter().zip(hi) {
            r00 += a0.norm_sqr();
            r11 += a1.norm_sqr();
            r01 += a0 * a1.conj();
        }
    }
    let rho = [[C64::new(r00, 0.0), r01], [r01.conj(), C64::new(r11, 0.0)]];
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    let kraus = ch.kraus();
    let mut chosen = kraus.len() - 1;
    for (j, e) in kraus.iter().enumerate() {
        // Tr(E ρ E†)
        let mut p = 0.0;
        for r in 0..2 {
            for a in 0..2 {
                for b in 0..2 {
                    p += (e[r][a] * rho[a][b] * e[r][b].conj()).re;
                }
            }
        }
        acc += p;
        if u < acc {
            chosen = j;
            break;
        }
    }
    apply_matrix_on_bit(state.amps_mut(), bit, &kraus[chosen]);
    state.renormalize();
}

/// A success probability with its estimation error.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoisyEstimate {
    pub success: f64,
    /// Standard error of the mean; 0 for the exact backend.
    pub stderr: f64,
    pub backend: Backend,
}

/// Probability that measuring the first `prefix.width()` qubits of the
/// noisy output of `circuit` (run from `|0…0⟩`) yields `prefix`.
pub fn run_noisy(
    circuit: &GateSequence,
    ch: &KrausChannel,
    backend: Backend,
    trajectories: usize,
    prefix: &BitString,
    seed: u64,
) -> Result<NoisyEstimate> {
    let p = prefix.width();
    if p == 0 || p > circuit.width() {
        return Err(Error::WidthMismatch {
            expected: circuit.width(),
            found: p,
        });
    }
    match backend.resolve(circuit.width()) {
        Backend::DensityMatrix => {
            let rho = noisy_density(circuit, ch)?;
            Ok(NoisyEstimate {
                success: rho.prefix_distribution(p)?.prob(prefix),
                stderr: 0.0,
                backend: Backend::DensityMatrix,
            })
        }
        _ => {
            if trajectories < MIN_TRAJECTORIES {
                return Err(Error::OutOfRange {
                    what: "trajectory count",
                    value: trajectories as i64,
                    allowed: format!(">= {MIN_TRAJECTORIES}"),
                });
            }
            let samples: Vec<f64> = (0..trajectories as u64)
                .into_par_iter()
                .map(|t| {
                    let mut rng = trajectory_rng(seed, t);
                    let psi = run_trajectory(circuit, ch, &mut rng)?;
                    Ok(psi.prefix_distribution(p)?.prob(prefix))
                })
                .collect::<Result<_>>()?;
            let (mean, stderr) = mean_and_stderr(&samples);
            Ok(NoisyEstimate {
                success: mean,
                stderr,
                backend: Backend::Trajectories,
            })
        }
    }
}

/// Generator for trajectory `t` of a run seeded with `seed`.
pub fn trajectory_rng(seed: u64, t: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(t);
    rng
}

fn mean_and_stderr(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Overall IDGS success as the product of the two stage success rates.
pub fn combined_success(p1_bar: f64, p2_bar: f64) -> Result<f64> {
    for (what, v) in [("p1_bar", p1_bar), ("p2_bar", p2_bar)] {
        if !(0.0..=1.0).contains(&v) {
            return Err(Error::NumericDomain { what, value: v });
        }
    }
    Ok(p1_bar * p2_bar)
}

/// Noisy IDGS success, scored at the target node only.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct IdgsNoisyEstimate {
    pub stage1: NoisyEstimate,
    pub stage2: NoisyEstimate,
    pub combined: f64,
    pub combined_stderr: f64,
}

/// Stage 1 is scored as recovering the target prefix at the target node;
/// stage 2 as recovering the target suffix from the correctly restricted
/// subfunction. Stage 2 draws from `seed + 1`.
pub fn idgs_noisy_success(f: &MarkedOracle, plan: &IdgsPlan, spec: &NoiseSpec, seed: u64) -> Result<IdgsNoisyEstimate> {
    let target = f
        .target()
        .ok_or_else(|| Error::Parameter("noisy scoring needs a single target".into()))?;
    let ch = spec.build_channel()?;
    let id = SubfunctionId::new(target.suffix(plan.k));
    let f_i = f.subfunction(&id)?;
    let body = target.prefix(plan.node_width());
    let c1 = stage1_circuit(plan, &f_i)?;
    let s1 = run_noisy(&c1, &ch, spec.backend, spec.trajectories, &body.prefix(plan.p), seed)?;
    let f_ix = f_i.restrict_prefix(&body.prefix(plan.p))?;
    let c2 = long_circuit(&f_ix, plan.stage2.omega, plan.stage2.iterations)?;
    let s2 = run_noisy(
        &c2,
        &ch,
        spec.backend,
        spec.trajectories,
        &body.suffix(plan.block_width()),
        seed.wrapping_add(1),
    )?;
    let combined = combined_success(s1.success.clamp(0.0, 1.0), s2.success.clamp(0.0, 1.0))?;
    let combined_stderr = ((s2.success * s1.stderr).powi(2) + (s1.success * s2.stderr).powi(2)).sqrt();
    Ok(IdgsNoisyEstimate {
        stage1: s1,
        stage2: s2,
        combined,
        combined_stderr,
    })
}

/// Noisy success of Long's search on the full register.
pub fn long_noisy_success(f: &MarkedOracle, spec: &NoiseSpec, seed: u64) -> Result<NoisyEstimate> {
    let target = f
        .target()
        .ok_or_else(|| Error::Parameter("noisy scoring needs a single target".into()))?;
    let ch = spec.build_channel()?;
    let params = long_params(f.width())?;
    let c = long_circuit(f, params.omega, params.iterations)?;
    run_noisy(&c, &ch, spec.backend, spec.trajectories, &target, seed)
}

/// Exact-or-sampled output distribution of the first `p` qubits for one
/// noisy shot: the density-matrix backend returns the exact distribution,
/// the trajectory backend the distribution of a single sampled trajectory.
pub fn noisy_shot_distribution<R: Rng + ?Sized>(
    circuit: &GateSequence,
    ch: &KrausChannel,
    backend: Backend,
    p: usize,
    rng: &mut R,
) -> Result<PrefixDistribution> {
    match backend.resolve(circuit.width()) {
        Backend::DensityMatrix => noisy_density(circuit, ch)?.prefix_distribution(p),
        _ => run_trajectory(circuit, ch, rng)?.prefix_distribution(p),
    }
}
