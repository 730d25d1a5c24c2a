//! The search procedures as drivers over states and operators: Long's exact
//! Grover search, GRK partial search, exact partial search, and the two
//! IDGS stages run by one node.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::bits::BitString;
use crate::error::{Error, Result};
use crate::operators::{stage1_operators, SearchOperator};
use crate::oracle::MarkedOracle;
use crate::planner::{grk_params, idgs_plan, long_params, IdgsPlan};
use crate::state::{PrefixDistribution, PureState};

#[derive(Clone, Debug, PartialEq)]
pub struct StageResult {
    /// The sampled measurement outcome.
    pub measured: BitString,
    /// State just before measurement.
    pub final_state: PureState,
    /// Exact probability of the target outcome, or of the measured outcome
    /// when the oracle marks nothing.
    pub success_prob: f64,
}

fn finish(state: PureState, oracle: &MarkedOracle, p: usize, seed: u64) -> Result<StageResult> {
    let dist = state.prefix_distribution(p)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let measured = dist.sample_one(&mut rng);
    let success_prob = success_of(&dist, oracle, measured);
    Ok(StageResult {
        measured,
        final_state: state,
        success_prob,
    })
}

fn success_of(dist: &PrefixDistribution, oracle: &MarkedOracle, measured: BitString) -> f64 {
    match oracle.target() {
        Some(t) => dist.prob(&t.prefix(dist.p)),
        None => dist.prob(&measured),
    }
}

fn require_single_target(oracle: &MarkedOracle) -> Result<BitString> {
    oracle.target().ok_or_else(|| {
        Error::Parameter(format!(
            "search needs exactly one marked string, oracle marks {}",
            oracle.marked_set().len()
        ))
    })
}

/// Long's search: `L(ω)` applied `J + 1` times to the uniform state, then a
/// full-width measurement. Runs on an empty oracle too, where `L` is a
/// global phase and the outcome is uniform.
pub fn run_long(f: &MarkedOracle, seed: u64) -> Result<StageResult> {
    if f.marked_set().len() > 1 {
        require_single_target(f)?;
    }
    let params = long_params(f.width())?;
    let mut state = PureState::uniform(f.width())?;
    SearchOperator::l(f.clone(), params.omega)?.apply_times(&mut state, params.iterations)?;
    finish(state, f, f.width(), seed)
}

/// State after `G^{j1} G1^{j2}` (the first two GRK steps).
pub fn grk_partial_state(f: &MarkedOracle, q: usize, j1: u64, j2: u64) -> Result<PureState> {
    let mut state = PureState::uniform(f.width())?;
    SearchOperator::g(f.clone())?.apply_times(&mut state, j1)?;
    SearchOperator::g1(f.clone(), q)?.apply_times(&mut state, j2)?;
    Ok(state)
}

/// GRK partial search: `G^{j1}`, `G1^{j2}`, one more `G`, then measure the
/// first `q` qubits. The iteration counts are asymptotic, so the success
/// probability is close to but not exactly 1.
pub fn run_grk(f: &MarkedOracle, q: usize, seed: u64) -> Result<StageResult> {
    require_single_target(f)?;
    let params = grk_params(f.width(), q)?;
    let mut state = grk_partial_state(f, q, params.j1, params.j2)?;
    SearchOperator::g(f.clone())?.apply(&mut state)?;
    finish(state, f, q, seed)
}

/// Exact partial search: like GRK but the last iterate is the generalised
/// `G_g(θ, φ)` with phases solved so every non-target block cancels.
pub fn run_exact_partial(f: &MarkedOracle, q: usize) -> Result<StageResult> {
    require_single_target(f)?;
    let plan = idgs_plan(f.width(), 0, q)?;
    let mut state = PureState::uniform(f.width())?;
    SearchOperator::g(f.clone())?.apply_times(&mut state, plan.p1)?;
    SearchOperator::g1(f.clone(), q)?.apply_times(&mut state, plan.p2)?;
    SearchOperator::gg(f.clone(), plan.theta, plan.phi)?.apply(&mut state)?;
    finish(state, f, q, 0)
}

/// Stage-1 state of one node before measurement.
pub fn stage1_state(f_i: &MarkedOracle, plan: &IdgsPlan) -> Result<PureState> {
    let mut state = PureState::uniform(plan.node_width())?;
    for (op, times) in stage1_operators(plan, f_i)? {
        op.apply_times(&mut state, times)?;
    }
    Ok(state)
}

/// IDGS stage 1 on subfunction `f_i`: `G2^{p1}`, `G3^{p2}`, `G4(θ, φ)`,
/// then measure the first `p` qubits. The target node obtains the target's
/// prefix with certainty; other nodes see a uniform prefix.
pub fn idgs_stage1(f_i: &MarkedOracle, plan: &IdgsPlan, seed: u64) -> Result<StageResult> {
    if f_i.marked_set().len() > 1 {
        require_single_target(f_i)?;
    }
    let state = stage1_state(f_i, plan)?;
    finish(state, f_i, plan.p, seed)
}

/// IDGS stage 2: Long's search on the prefix-restricted subfunction.
pub fn idgs_stage2(f_restricted: &MarkedOracle, seed: u64) -> Result<StageResult> {
    run_long(f_restricted, seed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn oracle(s: &str) -> MarkedOracle {
        let t = BitString::parse(s).unwrap();
        MarkedOracle::marked(t.width(), t).unwrap()
    }

    #[test]
    fn long_is_exact() {
        assert_abs_diff_eq!(run_long(&oracle("01100"), 1).unwrap().success_prob, 1.0, epsilon = 1e-9);
        let r = run_long(&oracle("10"), 1).unwrap();
        assert_abs_diff_eq!(r.success_prob, 1.0, epsilon = 1e-9);
        assert_eq!(r.measured.to_string(), "10");
        for m in 1..=10 {
            for t in [0u64, (1 << m) - 1, 5 % (1 << m)] {
                let f = MarkedOracle::marked(m, BitString::new(m, t).unwrap()).unwrap();
                assert_abs_diff_eq!(run_long(&f, 0).unwrap().success_prob, 1.0, epsilon = 1e-9);
            }
        }
    }

    #[test]
    fn long_on_empty_oracle_is_uniform() {
        let r = run_long(&MarkedOracle::empty(3), 7).unwrap();
        assert_abs_diff_eq!(r.success_prob, 0.125, epsilon = 1e-12);
    }

    #[test]
    fn grk_is_nearly_exact_at_twelve_qubits() {
        let r = run_grk(&oracle("101100111010"), 2, 3).unwrap();
        assert!(r.success_prob >= 0.99, "{}", r.success_prob);
        assert!(run_grk(&oracle("1011"), 4, 0).is_err());
    }

    #[test]
    fn exact_partial_search() {
        for t in 0..64 {
            let f = MarkedOracle::marked(6, BitString::new(6, t).unwrap()).unwrap();
            let r = run_exact_partial(&f, 2).unwrap();
            assert_abs_diff_eq!(r.success_prob, 1.0, epsilon = 1e-9);
            assert_eq!(r.measured, f.target().unwrap().prefix(2));
        }
    }

    #[test]
    fn five_qubit_stages() {
        let f = oracle("01100");
        let plan = idgs_plan(5, 1, 2).unwrap();
        let f0 = f.subfunction(&crate::oracle::SubfunctionId::parse(1, "0").unwrap()).unwrap();
        let s1 = idgs_stage1(&f0, &plan, 0).unwrap();
        assert_eq!(s1.measured.to_string(), "01");
        assert_abs_diff_eq!(s1.success_prob, 1.0, epsilon = 1e-9);

        let f1 = f.subfunction(&crate::oracle::SubfunctionId::parse(1, "1").unwrap()).unwrap();
        let s1 = idgs_stage1(&f1, &plan, 0).unwrap();
        let dist = s1.final_state.prefix_distribution(2).unwrap();
        for q in dist.probs {
            assert_abs_diff_eq!(q, 0.25, epsilon = 1e-9);
        }

        let f001 = f0.restrict_prefix(&BitString::parse("01").unwrap()).unwrap();
        let s2 = idgs_stage2(&f001, 0).unwrap();
        assert_eq!(s2.measured.to_string(), "10");
        assert_abs_diff_eq!(s2.success_prob, 1.0, epsilon = 1e-9);
    }
}
