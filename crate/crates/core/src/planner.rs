//! Derived run parameters: iteration counts, rotation angles, the exact
//! final-phase solution and its feasibility check.
//!
//! Throughout, `w` is the width of the register being searched (n - k for a
//! node, n for plain partial search) and `s = w - p` is the width of one
//! block.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance used when clamping cosines that overshoot ±1 by rounding.
const COS_SLACK: f64 = 1e-12;

/// Widest register the planner accepts. Beyond this the f64 closed forms
/// lose the precision the exactness claims rely on.
pub const MAX_PLAN_WIDTH: usize = 40;

/// `⌊x⌉`, rounding half away from zero.
pub fn round_half_away(x: f64) -> i64 {
    x.round() as i64
}

/// `arcsin(2^{-m/2})`, the initial overlap angle of a marked item in an
/// m-qubit uniform superposition.
pub fn overlap_angle(m: usize) -> f64 {
    (2f64.powf(-(m as f64) / 2.0)).asin()
}

/// Parameters of Long's exact Grover variant on an m-qubit register.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LongParams {
    pub m: usize,
    #[serde(rename = "J")]
    pub j: u64,
    pub iterations: u64,
    pub omega: f64,
    pub lambda: f64,
}

/// Long's parameters with the smallest valid iteration exponent
/// `J = max(0, ⌈π/(4λ) − 3/2⌉)`.
///
/// The textbook count `⌊(π/2 − λ)/(2λ)⌋` is one larger at m = 2 and would
/// give ω ≈ 1.33 where ω = π is the natural answer; any J at or above the
/// minimum is exact, so the minimum is used.
pub fn long_params(m: usize) -> Result<LongParams> {
    check_width("Long register width", m)?;
    let lambda = overlap_angle(m);
    let j = ((PI / (4.0 * lambda) - 1.5).ceil()).max(0.0) as u64;
    let omega = long_omega(lambda, j)?;
    Ok(LongParams {
        m,
        j,
        iterations: j + 1,
        omega,
        lambda,
    })
}

/// `ω = 2 arcsin(sin(π/(4J+6)) / sin λ)` for a chosen J.
pub fn long_omega(lambda: f64, j: u64) -> Result<f64> {
    let arg = clamp_unit("Long arcsin argument", (PI / (4.0 * j as f64 + 6.0)).sin() / lambda.sin())?;
    // arcsin is square-root sensitive at 1; a last-ulp shortfall there (as at
    // m = 2, where the argument is exactly 1) would otherwise cost ~1e-8 rad.
    if 1.0 - arg < 1e-14 {
        return Ok(PI);
    }
    Ok(2.0 * arg.asin())
}

/// The textbook Grover iteration count `⌊(π/2 − λ)/(2λ)⌋`.
pub fn grover_floor_iterations(m: usize) -> u64 {
    let lambda = overlap_angle(m);
    ((FRAC_PI_2 - lambda) / (2.0 * lambda)).floor().max(0.0) as u64
}

/// `α_q = (√2^q / 2) arctan(√(3·2^q − 4) / (2^q − 2))`, with the limit
/// value `π/(2√2)` at q = 1 where the formula divides by zero.
pub fn alpha(q: usize) -> f64 {
    if q == 1 {
        return PI / (2.0 * 2f64.sqrt());
    }
    let x = 2f64.powi(q as i32);
    x.sqrt() / 2.0 * ((3.0 * x - 4.0).sqrt() / (x - 2.0)).atan()
}

/// `β_q = arcsin √(2^q / (4(2^q − 1)))`; equals π/4 at q = 1.
pub fn beta(q: usize) -> f64 {
    let x = 2f64.powi(q as i32);
    clamp_unit("beta arcsin argument", (x / (4.0 * (x - 1.0))).sqrt())
        .expect("argument ≤ 1 for q ≥ 1")
        .asin()
}

/// `f(x) = π/4 + (β − α)/√x` evaluated at a real block count `x = 2^q`.
/// Increasing for x ≥ 16, which is what makes stage 1 the deeper stage.
pub fn depth_ratio_function(x: f64) -> f64 {
    let eta = (x.sqrt() / (4.0 * (x - 1.0)).sqrt()).asin();
    let gamma_over_sqrt = 0.5 * ((3.0 * x - 4.0).sqrt() / (x - 2.0)).atan();
    FRAC_PI_4 + eta / x.sqrt() - gamma_over_sqrt
}

/// Asymptotic partial-search iteration counts.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GrkParams {
    pub n: usize,
    pub q: usize,
    pub alpha_q: f64,
    pub beta_q: f64,
    pub j1: u64,
    pub j2: u64,
}

pub fn grk_params(n: usize, q: usize) -> Result<GrkParams> {
    check_width("register width", n)?;
    if q == 0 || q >= n {
        return Err(Error::OutOfRange {
            what: "partial-search prefix width q",
            value: q as i64,
            allowed: format!("1..{n}"),
        });
    }
    let (j1, j2) = iteration_counts(n, q)?;
    Ok(GrkParams {
        n,
        q,
        alpha_q: alpha(q),
        beta_q: beta(q),
        j1,
        j2,
    })
}

/// `(⌊π/4·√2^w − α_p √2^{w−p}⌉, ⌊β_p √2^{w−p}⌉)`: the global and local
/// iteration counts for recovering a p-bit prefix of a w-bit register.
pub fn iteration_counts(w: usize, p: usize) -> Result<(u64, u64)> {
    if p == 0 || p >= w {
        return Err(Error::OutOfRange {
            what: "prefix width",
            value: p as i64,
            allowed: format!("1..{w}"),
        });
    }
    let sw = 2f64.powf(w as f64 / 2.0);
    let ss = 2f64.powf((w - p) as f64 / 2.0);
    let j1 = round_half_away(FRAC_PI_4 * sw - alpha(p) * ss);
    let j2 = round_half_away(beta(p) * ss);
    if j1 < 0 {
        return Err(Error::Parameter(format!(
            "global iteration count rounds to {j1} < 0 for width {w}, prefix {p}; the register is too small for this prefix"
        )));
    }
    Ok((j1 as u64, j2 as u64))
}

/// Which of the two mirror-image phase solutions to return.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Branch {
    /// θ > 0, with φ carrying the sign of a_t.
    #[default]
    Positive,
    /// The negated pair (−θ, −φ).
    Mirrored,
}

/// Final-phase pair making every non-target block amplitude vanish.
///
/// Requires `(E − 2^{w−1}F)² ≤ a_t²`. Returns `(θ, φ)` with
/// `cos θ = (2^{2w−1}F² − 2^w EF + E² − a_t²) / (E² − 2^w EF − a_t²)`,
/// `cos φ = (2^{w−1}F − E) / a_t` and `a_t sin φ sin θ > 0`.
pub fn solve_phases(e: f64, f: f64, a_t: f64, width: usize, branch: Branch) -> Result<(f64, f64)> {
    let half = 2f64.powi(width as i32 - 1);
    let full = 2.0 * half;
    if a_t.abs() < 1e-300 {
        return Err(Error::NumericDomain {
            what: "target amplitude a_t",
            value: a_t,
        });
    }
    let lhs = (e - half * f).powi(2);
    let rhs = a_t * a_t;
    if lhs > rhs * (1.0 + 1e-12) {
        return Err(Error::Infeasible {
            width,
            e,
            f,
            a_t,
            lhs,
            rhs,
        });
    }
    let den = e * e - full * e * f - a_t * a_t;
    if den.abs() < 1e-300 {
        return Err(Error::NumericDomain {
            what: "cos(theta) denominator",
            value: den,
        });
    }
    let cos_theta = (2.0 * half * half * f * f - full * e * f + e * e - a_t * a_t) / den;
    let cos_phi = (half * f - e) / a_t;
    let theta = clamp_unit("cos(theta)", cos_theta)?.acos();
    let phi = clamp_unit("cos(phi)", cos_phi)?.acos().copysign(a_t);
    Ok(match branch {
        Branch::Positive => (theta, phi),
        Branch::Mirrored => (-theta, -phi),
    })
}

/// Residual of the non-target block amplitude after the final operator,
/// `|(1 − e^{iθ})(a_t e^{iφ} + E)/2^w − F|`.
pub fn cancellation_residual(e: f64, f: f64, a_t: f64, width: usize, theta: f64, phi: f64) -> f64 {
    use num_complex::Complex64;
    let one = Complex64::new(1.0, 0.0);
    let z = (one - Complex64::from_polar(1.0, theta)) * (Complex64::from_polar(a_t, phi) + e)
        / 2f64.powi(width as i32)
        - f;
    z.norm()
}

/// Every parameter of one IDGS run on an n-bit function split across 2^k
/// nodes, each recovering a p-bit prefix in stage 1.
///
/// `k = 0` is allowed and describes exact partial search on the whole
/// register (a single node).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IdgsPlan {
    pub n: usize,
    pub k: usize,
    pub p: usize,
    pub p1: u64,
    pub p2: u64,
    pub theta1: f64,
    pub theta_prime: f64,
    pub gamma_p: f64,
    pub eta_p: f64,
    pub a_t: f64,
    pub a_nt: f64,
    #[serde(rename = "E")]
    pub e: f64,
    #[serde(rename = "F")]
    pub f: f64,
    pub theta: f64,
    pub phi: f64,
    pub branch: Branch,
    pub stage2: LongParams,
}

impl IdgsPlan {
    /// Node register width `n − k`.
    pub fn node_width(&self) -> usize {
        self.n - self.k
    }

    /// Stage-2 register width `n − p − k`.
    pub fn block_width(&self) -> usize {
        self.n - self.p - self.k
    }

    /// Amplitude of every basis state in a non-target block after stage 1's
    /// first two steps.
    pub fn non_target_block_amplitude(&self) -> f64 {
        self.f
    }

    /// `a_t² + a_nt² + (2^p − 1)·2^s·F²`, which must be 1.
    pub fn normalization(&self) -> f64 {
        let blocks = 2f64.powi(self.p as i32) - 1.0;
        let block = 2f64.powi(self.block_width() as i32);
        self.a_t * self.a_t + self.a_nt * self.a_nt + blocks * block * self.f * self.f
    }

    pub fn cancellation_residual(&self) -> f64 {
        cancellation_residual(self.e, self.f, self.a_t, self.node_width(), self.theta, self.phi)
    }

    /// Oracle queries one node makes in stage 1 (`p1 + p2 + 1`).
    pub fn stage1_queries(&self) -> u64 {
        self.p1 + self.p2 + 1
    }
}

pub fn idgs_plan(n: usize, k: usize, p: usize) -> Result<IdgsPlan> {
    idgs_plan_with_branch(n, k, p, Branch::Positive)
}

pub fn idgs_plan_with_branch(n: usize, k: usize, p: usize, branch: Branch) -> Result<IdgsPlan> {
    check_width("register width n", n)?;
    if p == 0 {
        return Err(Error::OutOfRange {
            what: "prefix width p",
            value: 0,
            allowed: "p ≥ 1".into(),
        });
    }
    if p + k >= n {
        return Err(Error::Parameter(format!(
            "need p + k < n, got p = {p}, k = {k}, n = {n}"
        )));
    }
    let w = n - k;
    let s = w - p;
    let (p1, p2) = iteration_counts(w, p)?;
    let BlockAmplitudes { a_t, a_nt, e, f } = block_amplitudes(w, p, p1, p2);
    let (theta, phi) = solve_phases(e, f, a_t, w, branch)?;
    Ok(IdgsPlan {
        n,
        k,
        p,
        p1,
        p2,
        theta1: overlap_angle(w),
        theta_prime: overlap_angle(s),
        gamma_p: alpha(p),
        eta_p: beta(p),
        a_t,
        a_nt,
        e,
        f,
        theta,
        phi,
        branch,
        stage2: long_params(s)?,
    })
}

/// Closed-form amplitudes after `G^{j1}` then the local iterate `j2` times
/// on a w-bit register with p-bit blocks (single target).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BlockAmplitudes {
    /// Amplitude of the target.
    pub a_t: f64,
    /// Total amplitude spread evenly over the rest of the target block.
    pub a_nt: f64,
    /// `√(2^s − 1)·a_nt + (2^w − 2^s)·F`, the non-target-block weight seen
    /// by a global diffusion.
    pub e: f64,
    /// Amplitude of each basis state outside the target block.
    pub f: f64,
}

pub fn block_amplitudes(w: usize, p: usize, j1: u64, j2: u64) -> BlockAmplitudes {
    let s = w - p;
    let big_w = 2f64.powi(w as i32);
    let big_s = 2f64.powi(s as i32);
    let g = (2.0 * j1 as f64 + 1.0) * overlap_angle(w);
    let l = 2.0 * j2 as f64 * overlap_angle(s);
    let ratio = (big_s - 1.0).sqrt() / (big_w - 1.0).sqrt();
    let a_t = g.sin() * l.cos() + ratio * g.cos() * l.sin();
    let a_nt = -g.sin() * l.sin() + ratio * g.cos() * l.cos();
    let e = (big_s - 1.0).sqrt() * a_nt + (big_w - big_s) * g.cos() / (big_w - 1.0).sqrt();
    let f = g.cos() / (big_w - 1.0).sqrt();
    BlockAmplitudes { a_t, a_nt, e, f }
}

fn check_width(what: &'static str, m: usize) -> Result<()> {
    if m == 0 || m > MAX_PLAN_WIDTH {
        return Err(Error::OutOfRange {
            what,
            value: m as i64,
            allowed: format!("1..={MAX_PLAN_WIDTH}"),
        });
    }
    Ok(())
}

fn clamp_unit(what: &'static str, x: f64) -> Result<f64> {
    if !x.is_finite() || x.abs() > 1.0 + COS_SLACK {
        return Err(Error::NumericDomain { what, value: x });
    }
    Ok(x.clamp(-1.0, 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn long_params_small_registers() {
        let l2 = long_params(2).unwrap();
        assert_eq!((l2.j, l2.iterations), (0, 1));
        assert_abs_diff_eq!(l2.omega, PI, epsilon = 1e-12);
        let l5 = long_params(5).unwrap();
        assert_eq!((l5.j, l5.iterations), (3, 4));
        assert_abs_diff_eq!(l5.omega, 2.7648, epsilon = 1e-4);
        let l4 = long_params(4).unwrap();
        assert_eq!(l4.iterations, 3);
        assert_abs_diff_eq!(l4.omega, 2.195, epsilon = 1e-3);
        assert_eq!(long_params(8).unwrap().iterations, 13);
    }

    #[test]
    fn grk_angles() {
        assert_abs_diff_eq!(alpha(2), 2f64.sqrt().atan(), epsilon = 1e-12);
        assert_abs_diff_eq!(alpha(2), 0.9553, epsilon = 1e-4);
        assert_abs_diff_eq!(beta(2), 0.6155, epsilon = 1e-4);
        assert_abs_diff_eq!(beta(1), FRAC_PI_4, epsilon = 1e-12);
        assert!(grk_params(4, 4).is_err());
        assert!(grk_params(4, 0).is_err());
        let g = grk_params(4, 2).unwrap();
        assert_eq!((g.j1, g.j2), (1, 1));
    }

    #[test]
    fn alpha_beta_angle_identity() {
        for q in 2..=12 {
            let x = 2f64.powi(q);
            let b = beta(q as usize);
            let lhs = (2.0 * alpha(q as usize) / x.sqrt()).tan();
            let rhs = 2.0 * x.sqrt() * (2.0 * b).sin() / (x - 4.0 * b.sin().powi(2));
            assert_abs_diff_eq!(lhs, rhs, epsilon = 1e-12);
        }
    }

    #[test]
    fn five_qubit_plan() {
        let plan = idgs_plan(5, 1, 2).unwrap();
        assert_eq!((plan.p1, plan.p2), (1, 1));
        assert_abs_diff_eq!(plan.theta1, 0.25f64.asin(), epsilon = 1e-15);
        assert_abs_diff_eq!(plan.theta_prime, 0.5f64.asin(), epsilon = 1e-15);
        assert_abs_diff_eq!(plan.e, 1.5, epsilon = 1e-12);
        assert_abs_diff_eq!(plan.f, 0.1875, epsilon = 1e-12);
        assert_abs_diff_eq!(plan.a_t, 0.625, epsilon = 1e-12);
        assert_abs_diff_eq!(plan.theta, 2.3520, epsilon = 1e-3);
        assert_abs_diff_eq!(plan.phi, FRAC_PI_2, epsilon = 1e-9);
        assert_abs_diff_eq!(plan.normalization(), 1.0, epsilon = 1e-12);
        assert!(plan.cancellation_residual() < 1e-12);
        assert_eq!(plan.stage2.iterations, 1);
    }

    #[test]
    fn twelve_qubit_plan() {
        let plan = idgs_plan(12, 1, 3).unwrap();
        assert_eq!((plan.p1, plan.p2), (21, 9));
        assert_abs_diff_eq!(plan.theta, 3.0962, epsilon = 1e-3);
        assert_abs_diff_eq!(plan.phi, 0.5911, epsilon = 1e-3);
        assert!(plan.cancellation_residual() < 1e-10);
        assert_eq!(plan.stage2.iterations, 13);
    }

    #[test]
    fn mirrored_branch_also_cancels() {
        let plan = idgs_plan_with_branch(12, 1, 3, Branch::Mirrored).unwrap();
        assert!(plan.theta < 0.0 && plan.phi < 0.0);
        assert!(plan.cancellation_residual() < 1e-10);
    }

    #[test]
    fn infeasible_plan_reports_diagnostics() {
        match idgs_plan(4, 1, 2) {
            Err(Error::Infeasible { e, f, a_t, lhs, rhs, .. }) => {
                assert!(lhs > rhs);
                assert!(e.is_finite() && f.is_finite() && a_t.is_finite());
            }
            other => panic!("expected infeasible, got {other:?}"),
        }
    }

    #[test]
    fn plan_dimension_checks() {
        assert!(idgs_plan(5, 1, 4).is_err());
        assert!(idgs_plan(5, 1, 0).is_err());
        assert!(idgs_plan(0, 0, 1).is_err());
    }

    #[test]
    fn depth_ratio_function_minimum() {
        assert!(depth_ratio_function(16.0) >= 0.699 - 1e-3);
        assert_abs_diff_eq!(
            depth_ratio_function(16.0),
            FRAC_PI_4 + (beta(4) - alpha(4)) / 4.0,
            epsilon = 1e-12
        );
    }

    #[test]
    fn rounding_is_half_away_from_zero() {
        assert_eq!(round_half_away(2.5), 3);
        assert_eq!(round_half_away(-2.5), -3);
        assert_eq!(round_half_away(1.2309), 1);
    }
}
