//! Replica-symmetric theory of minimum-norm sparse reconstruction.
//!
//! The reconstruction limit of recovering a density-`rho` sparse signal from
//! `alpha * N` random linear measurements by minimizing an Lp norm is a sharp
//! phase boundary `alpha_c(rho)` in the large-system limit. This module
//! provides:
//!
//! * the scalar thresholding functions `x_star` and their potentials
//!   ([`scalar_potential`]) that the free energy is built from,
//! * the self-consistency equation for the successful-reconstruction branch
//!   of the L1 norm ([`l1_successful_chi_hat`]) and the resulting boundary
//!   ([`critical_alpha`], [`critical_rho`], [`threshold_curve`]),
//! * the worst-case sufficient-condition bound for L1
//!   ([`worst_case_l1_alpha`]),
//! * the free-energy evaluation, saddle-point solver and replica-symmetry
//!   stability check in the [`saddle`] submodule.
//!
//! L0 and L2 have closed thresholds: `alpha_c = rho` and `alpha_c = 1`.

mod saddle;

pub use saddle::{
    at_stability, predicted_mse, rs_free_energy, rs_free_energy_with_rule, solve_rs_saddle,
    SaddleOptions,
};

use crate::numerics::{self, gaussian_pdf, q_function, NumericsError};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ReplicaError {
    #[error("no solution: {0}")]
    NoSolution(String),
    #[error("failed to converge: {reason}; last residuals {residuals:?}")]
    ConvergenceFailure { reason: String, residuals: Vec<f64> },
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error(transparent)]
    Numerics(#[from] NumericsError),
}

/// Which reconstruction norm an operation targets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PNorm {
    L0,
    L1,
    L2,
}

impl PNorm {
    pub fn all() -> [PNorm; 3] {
        [PNorm::L0, PNorm::L1, PNorm::L2]
    }
}

impl std::fmt::Display for PNorm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            PNorm::L0 => write!(f, "L0"),
            PNorm::L1 => write!(f, "L1"),
            PNorm::L2 => write!(f, "L2"),
        }
    }
}

/// The six replica-symmetric order parameters in the zero-temperature
/// scaling.
///
/// On the successful branch (perfect reconstruction) the conjugates `q_hat`
/// and `m_hat` diverge; they are stored as `f64::INFINITY` there, with
/// `chi = 0` and the finite `chi_hat` carrying the rescaled information.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RsOrderParams {
    /// Self-overlap of the reconstruction, `N^{-1} E |x_hat|^2`.
    pub q: f64,
    /// Zero-temperature susceptibility.
    pub chi: f64,
    /// Overlap with the true signal, `N^{-1} E x0 . x_hat`.
    pub m: f64,
    /// Conjugate of `q`; `+inf` on the successful branch.
    pub q_hat: f64,
    /// Conjugate of `chi`.
    pub chi_hat: f64,
    /// Conjugate of `m`; `+inf` on the successful branch.
    pub m_hat: f64,
}

impl RsOrderParams {
    /// Starting point aimed at the failure branch (imperfect reconstruction).
    pub fn failure_start(alpha: f64, rho: f64) -> Self {
        let q = 1.0;
        let m = 0.25 * rho;
        let chi = 1.0;
        RsOrderParams {
            q,
            chi,
            m,
            q_hat: alpha / chi,
            chi_hat: alpha * (q - 2.0 * m + rho),
            m_hat: alpha / chi,
        }
    }

    /// Starting point aimed at the successful branch `q = m = rho`.
    pub fn successful_start(rho: f64) -> Self {
        RsOrderParams {
            q: rho,
            chi: 0.0,
            m: rho,
            q_hat: f64::INFINITY,
            chi_hat: 1.0,
            m_hat: f64::INFINITY,
        }
    }

    pub fn is_successful_branch(&self) -> bool {
        self.q_hat.is_infinite() || self.m_hat.is_infinite()
    }
}

/// How a threshold curve was produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CurveMethod {
    Replica,
    WorstCase,
}

/// A sampled phase-boundary curve `rho -> alpha_c(rho)`.
///
/// Grid points where the method has no solution are recorded in `gaps`
/// rather than silently dropped.
#[derive(Debug, Clone)]
pub struct ThresholdCurve {
    pub p: PNorm,
    pub method: CurveMethod,
    /// `(rho, alpha_c)` pairs, sorted by `rho`.
    pub points: Vec<(f64, f64)>,
    /// `(rho, reason)` for grid points that produced no value.
    pub gaps: Vec<(f64, String)>,
}

/// Outcome of the replica-symmetry stability check.
#[derive(Debug, Clone)]
pub struct PhaseVerdict {
    pub rs_stable: bool,
    /// Left-hand side of the stability condition; stable iff `<= 1`.
    pub at_condition_lhs: f64,
    pub note: Option<String>,
}

impl PhaseVerdict {
    fn from_lhs(lhs: f64, note: Option<String>) -> Self {
        PhaseVerdict { rs_stable: lhs <= 1.0, at_condition_lhs: lhs, note }
    }
}

/// Scalar minimizer `x*(h; q_hat) = argmin_x { (q_hat/2) x^2 - h x + |x|^p }`.
///
/// L0 is a hard threshold at `|h| = sqrt(2 q_hat)`, L1 a soft threshold at
/// `|h| = 1`, L2 a linear shrinkage. Odd in `h` for every norm.
///
/// Panics if `q_hat <= 0` (the quadratic term must be confining).
pub fn x_star(p: PNorm, h: f64, q_hat: f64) -> f64 {
    assert!(q_hat > 0.0, "x_star needs q_hat > 0");
    match p {
        PNorm::L0 => {
            if h * h > 2.0 * q_hat {
                h / q_hat
            } else {
                0.0
            }
        }
        PNorm::L1 => {
            if h.abs() > 1.0 {
                (h - h.signum()) / q_hat
            } else {
                0.0
            }
        }
        PNorm::L2 => h / (q_hat + 2.0),
    }
}

/// Minimized scalar objective `min_x { (q_hat/2) x^2 - h x + |x|^p }`
/// (with `|x|^0` read as the indicator of `x != 0`).
///
/// Panics if `q_hat <= 0`.
pub fn scalar_potential(p: PNorm, h: f64, q_hat: f64) -> f64 {
    assert!(q_hat > 0.0, "scalar_potential needs q_hat > 0");
    match p {
        PNorm::L0 => {
            let active = -h * h / (2.0 * q_hat) + 1.0;
            if active < 0.0 {
                active
            } else {
                0.0
            }
        }
        PNorm::L1 => {
            let a = h.abs();
            if a > 1.0 {
                -(a - 1.0) * (a - 1.0) / (2.0 * q_hat)
            } else {
                0.0
            }
        }
        PNorm::L2 => -h * h / (2.0 * (q_hat + 2.0)),
    }
}

/// Residual of the successful-branch self-consistency for L1 at fixed
/// `alpha`: `g(chi_hat) - chi_hat`, where `g` maps `chi_hat` through the
/// closed-form Gaussian integrals of the saddle equations. Written in a
/// form that avoids cancelling the two large terms at large `chi_hat`.
fn l1_chi_hat_residual(chi_hat: f64, alpha: f64, rho: f64) -> f64 {
    let u = chi_hat.sqrt().recip();
    let tail_mix = 2.0 * (1.0 - rho) * q_function(u) + rho;
    let pdf_term = 2.0 * (1.0 - rho) * chi_hat.sqrt() * gaussian_pdf(u);
    (chi_hat * (tail_mix - alpha) + tail_mix - pdf_term) / alpha
}

/// The fixed-point map `g` for the successful-branch `chi_hat` of L1:
/// `g(x) = [2(1-rho)((x+1) Q(x^{-1/2}) - sqrt(x) pdf(x^{-1/2})) + rho (x+1)] / alpha`.
fn l1_chi_hat_map(chi_hat: f64, alpha: f64, rho: f64) -> f64 {
    let u = chi_hat.sqrt().recip();
    let zero_part = 2.0 * (1.0 - rho)
        * ((chi_hat + 1.0) * q_function(u) - chi_hat.sqrt() * gaussian_pdf(u));
    (zero_part + rho * (chi_hat + 1.0)) / alpha
}

/// Residual whose root in `chi_hat` is the critical point of L1: the
/// self-consistency equation with the marginal-stability value of `alpha`
/// substituted in. Increasing in `chi_hat`.
fn l1_critical_residual(chi_hat: f64, rho: f64) -> f64 {
    let u = chi_hat.sqrt().recip();
    2.0 * (1.0 - rho) * (gaussian_pdf(u) / u - q_function(u)) - rho
}

/// `chi_hat` at the L1 critical point for the given density.
fn l1_critical_chi_hat(rho: f64) -> Result<f64, ReplicaError> {
    // Log-spaced bracket, starting at [1e-8, 1e8]. The residual is -rho at
    // the lower end and increasing, but for densities within ~1e-4 of the
    // endpoints the root escapes the initial bracket, so widen it in
    // log-space until the sign change is captured.
    let mut exponent = 8.0f64;
    loop {
        let result = numerics::find_root(
            |s| l1_critical_residual(s.exp(), rho),
            (-exponent) * std::f64::consts::LN_10,
            exponent * std::f64::consts::LN_10,
            1e-14,
        );
        match result {
            Ok(root_log) => return Ok(root_log.exp()),
            Err(NumericsError::NoBracket { .. }) if exponent < 64.0 => exponent *= 2.0,
            Err(e) => {
                return Err(ReplicaError::ConvergenceFailure {
                    reason: format!("critical-point bracket failed for rho = {rho}: {e}"),
                    residuals: vec![],
                })
            }
        }
    }
}

/// Solve the successful-branch self-consistency equation for L1, returning
/// the `chi_hat` of the stable (smaller) root.
///
/// Exists only above the critical compression rate for this density;
/// below it the equation has no positive root and `NoSolution` is returned.
pub fn l1_successful_chi_hat(alpha: f64, rho: f64) -> Result<f64, ReplicaError> {
    assert!(rho > 0.0 && rho < 1.0, "rho must lie in (0,1)");
    assert!(alpha > 0.0 && alpha <= 1.0, "alpha must lie in (0,1]");

    // The residual g(x) - x is rho/alpha > 0 at x -> 0 and opens upward for
    // large x; the stable branch is the smaller of the two roots that exist
    // above threshold. Bracket it with the double root of the critical
    // point, where the residual is non-positive exactly when alpha is above
    // the critical rate.
    let chi_hat_c = l1_critical_chi_hat(rho)?;
    if chi_hat_c > 1e8 {
        // Approaching the dense limit the root escapes the supported
        // bracket and the equation degenerates.
        return Err(ReplicaError::NoSolution(format!(
            "successful-branch chi_hat exceeds the search bracket at rho = {rho}"
        )));
    }
    let at_c = l1_chi_hat_residual(chi_hat_c, alpha, rho);
    if at_c > 0.0 {
        return Err(ReplicaError::NoSolution(format!(
            "no successful branch at alpha = {alpha}, rho = {rho} (at or below the critical rate)"
        )));
    }
    if at_c == 0.0 {
        return Ok(chi_hat_c);
    }
    let root = numerics::find_root(
        |x| l1_chi_hat_residual(x, alpha, rho),
        1e-12,
        chi_hat_c,
        1e-15,
    )?;
    Ok(root)
}

/// Critical compression rate `alpha_c(rho)` for the given norm.
///
/// L0: `rho` (information-theoretic optimum). L2: 1 (no compression).
/// L1: marginal stability of the successful branch, solved by
/// root-finding the reduced scalar equation in `chi_hat`.
pub fn critical_alpha(p: PNorm, rho: f64) -> Result<f64, ReplicaError> {
    assert!(rho > 0.0 && rho < 1.0, "rho must lie in (0,1)");
    match p {
        PNorm::L0 => Ok(rho),
        PNorm::L2 => Ok(1.0),
        PNorm::L1 => {
            let chi_hat = l1_critical_chi_hat(rho)?;
            let u = chi_hat.sqrt().recip();
            Ok(2.0 * (1.0 - rho) * q_function(u) + rho)
        }
    }
}

/// Critical density `rho_c(alpha)`: the inverse of [`critical_alpha`]
/// along `rho`, using its monotonicity.
pub fn critical_rho(p: PNorm, alpha: f64) -> Result<f64, ReplicaError> {
    assert!(alpha > 0.0 && alpha < 1.0, "alpha must lie in (0,1)");
    match p {
        PNorm::L0 => Ok(alpha),
        PNorm::L2 => Err(ReplicaError::NoSolution(
            "the L2 norm reconstructs no density below alpha = 1".to_string(),
        )),
        PNorm::L1 => {
            let f = |rho: f64| critical_alpha(PNorm::L1, rho).unwrap() - alpha;
            let root = numerics::find_root(f, 1e-12, 1.0 - 1e-12, 1e-12)?;
            Ok(root)
        }
    }
}

/// Asymptotic worst-case sufficient bound for L1 reconstruction: the
/// smallest compression rate at which the pair of sufficient conditions
/// (an entropy-versus-concentration inequality and a positivity constraint
/// on its concentration margin) both hold.
///
/// The search is capped at `alpha = 10`; densities whose bound would lie
/// beyond the cap report `NoSolution`.
pub fn worst_case_l1_alpha(rho: f64) -> Result<f64, ReplicaError> {
    assert!(rho > 0.0 && rho < 1.0, "rho must lie in (0,1)");
    const CAP: f64 = 10.0;
    let c = 2.0f64.powf(0.25) - 1.0;

    // The margin constraint 2^{1/4} - 1 - sqrt(2 rho / alpha) > 0 bounds
    // alpha away from zero.
    let alpha_min = 2.0 * rho / (c * c);
    if alpha_min >= CAP {
        return Err(ReplicaError::NoSolution(format!(
            "margin constraint needs alpha > {alpha_min:.3}, beyond the cap {CAP}"
        )));
    }

    // Entropy-versus-concentration expression; negative means the failure
    // probability vanishes. Strictly decreasing in alpha on the allowed
    // region, from a positive value at alpha_min.
    let w = |alpha: f64| {
        let margin = c - (2.0 * rho / alpha).sqrt();
        2.0 * rho * (1.0 / (2.0 * rho)).ln() + 2.0 * rho - 0.5 * alpha * margin * margin
    };
    let lo = alpha_min * (1.0 + 1e-9);
    if w(CAP) >= 0.0 {
        return Err(ReplicaError::NoSolution(format!(
            "bound does not close below the cap {CAP} at rho = {rho}"
        )));
    }
    if w(lo) <= 0.0 {
        // Degenerate: already negative at the edge of the allowed region.
        return Ok(lo);
    }
    let root = numerics::find_root(w, lo, CAP, 1e-12)?;
    Ok(root)
}

/// Map a critical-rate computation over a density grid, recording gaps.
///
/// `rho_grid` must be sorted ascending with all entries in (0,1).
pub fn threshold_curve(p: PNorm, rho_grid: &[f64], method: CurveMethod) -> ThresholdCurve {
    assert!(
        rho_grid.windows(2).all(|w| w[0] < w[1]),
        "rho grid must be strictly increasing"
    );
    assert!(
        rho_grid.iter().all(|&r| r > 0.0 && r < 1.0),
        "rho grid entries must lie in (0,1)"
    );
    let mut points = Vec::with_capacity(rho_grid.len());
    let mut gaps = Vec::new();
    for &rho in rho_grid {
        let result = match method {
            CurveMethod::Replica => critical_alpha(p, rho),
            CurveMethod::WorstCase => worst_case_l1_alpha(rho),
        };
        match result {
            Ok(alpha) => points.push((rho, alpha)),
            Err(e) => gaps.push((rho, e.to_string())),
        }
    }
    ThresholdCurve { p, method, points, gaps }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    /// 1-D brute-force minimizer of the scalar objective: coarse grid plus
    /// local refinement, independent of the closed forms.
    fn potential_oracle(p: PNorm, h: f64, q_hat: f64) -> (f64, f64) {
        let cost = |x: f64| -> f64 {
            let norm_term = match p {
                PNorm::L0 => {
                    if x == 0.0 {
                        0.0
                    } else {
                        1.0
                    }
                }
                PNorm::L1 => x.abs(),
                PNorm::L2 => x * x,
            };
            0.5 * q_hat * x * x - h * x + norm_term
        };
        let span = (h.abs() / q_hat + h.abs() + 2.0).max(4.0);
        let mut best_x = 0.0f64;
        let mut best = cost(0.0);
        let coarse = 200_001usize;
        for i in 0..coarse {
            let x = -span + 2.0 * span * (i as f64) / ((coarse - 1) as f64);
            let c = cost(x);
            if c < best {
                best = c;
                best_x = x;
            }
        }
        // Local refinement around the best grid point (plus the origin,
        // which is always a candidate for the thresholding norms).
        let mut width = 2.0 * span / ((coarse - 1) as f64);
        for _ in 0..60 {
            let mut local_best = best;
            let mut local_x = best_x;
            for i in 0..41 {
                let x = best_x - width + 2.0 * width * (i as f64) / 40.0;
                let c = cost(x);
                if c < local_best {
                    local_best = c;
                    local_x = x;
                }
            }
            best = local_best;
            best_x = local_x;
            width /= 8.0;
        }
        if cost(0.0) <= best {
            (cost(0.0), 0.0)
        } else {
            (best, best_x)
        }
    }

    fn lcg(state: &mut u64) -> f64 {
        *state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        (*state >> 11) as f64 / (1u64 << 53) as f64
    }

    #[test]
    fn x_star_spec_points() {
        assert_relative_eq!(x_star(PNorm::L1, 2.0, 1.0), 1.0);
        assert_eq!(x_star(PNorm::L1, 0.5, 1.0), 0.0);
        assert_eq!(x_star(PNorm::L0, 0.0, 3.7), 0.0);
        assert_relative_eq!(x_star(PNorm::L2, 3.0, 0.5), 1.2);
    }

    #[test]
    fn x_star_odd_in_h() {
        let mut state = 7u64;
        for _ in 0..500 {
            let h = 12.0 * (lcg(&mut state) - 0.5);
            let q_hat = 0.05 + 6.0 * lcg(&mut state);
            for p in PNorm::all() {
                let plus = x_star(p, h, q_hat);
                let minus = x_star(p, -h, q_hat);
                assert_eq!(plus, -minus, "p = {p}, h = {h}, q_hat = {q_hat}");
            }
        }
    }

    #[test]
    #[should_panic(expected = "q_hat > 0")]
    fn x_star_rejects_nonpositive_q_hat() {
        x_star(PNorm::L1, 1.0, 0.0);
    }

    #[test]
    fn potential_spec_points() {
        assert_eq!(scalar_potential(PNorm::L1, 0.0, 1.0), 0.0);
        // (Q/2)x^2 - 3x + |x| at Q=2: minimum -1 at x = 1.
        assert_relative_eq!(scalar_potential(PNorm::L1, 3.0, 2.0), -1.0);
        let (oracle, _) = potential_oracle(PNorm::L1, 3.0, 2.0);
        assert_relative_eq!(oracle, -1.0, epsilon = 1e-8);
    }

    #[test]
    fn potential_matches_brute_force_oracle() {
        let mut state = 42u64;
        for p in PNorm::all() {
            for _ in 0..100 {
                let h = 10.0 * (lcg(&mut state) - 0.5);
                let q_hat = 0.1 + 5.0 * lcg(&mut state);
                let (oracle, oracle_x) = potential_oracle(p, h, q_hat);
                let closed = scalar_potential(p, h, q_hat);
                assert!(
                    (closed - oracle).abs() <= 1e-8,
                    "p = {p}, h = {h}, q_hat = {q_hat}: {closed} vs {oracle}"
                );
                // The minimizer itself agrees wherever it is unique. Skip a
                // small neighbourhood of the thresholds, where the argmin
                // (not the value) is discontinuous or two-valued.
                let threshold_gap = match p {
                    PNorm::L0 => (h.abs() - (2.0 * q_hat).sqrt()).abs(),
                    PNorm::L1 => (h.abs() - 1.0).abs(),
                    PNorm::L2 => 1.0,
                };
                if threshold_gap > 1e-3 {
                    assert!(
                        (x_star(p, h, q_hat) - oracle_x).abs() <= 1e-6,
                        "minimizer mismatch: p = {p}, h = {h}, q_hat = {q_hat}"
                    );
                }
            }
        }
    }

    #[test]
    fn l0_potential_jump_location() {
        let q_hat = 1.0f64;
        let h0 = (2.0 * q_hat).sqrt();
        // Just above the threshold the active branch wins and the minimizer
        // jumps away from zero; just below it stays at zero.
        let above = h0 * 1.0001;
        let below = h0 * 0.9999;
        let (_, x_above) = potential_oracle(PNorm::L0, above, q_hat);
        let (_, x_below) = potential_oracle(PNorm::L0, below, q_hat);
        assert!(x_below == 0.0);
        assert!((x_above - above / q_hat).abs() <= 1e-6);
        assert!(scalar_potential(PNorm::L0, above, q_hat) < 0.0);
        assert_eq!(scalar_potential(PNorm::L0, below, q_hat), 0.0);
    }

    #[test]
    fn potential_gradient_is_minus_x_star() {
        // -d(potential)/dh = x_star away from the thresholds.
        let mut state = 99u64;
        for p in PNorm::all() {
            for _ in 0..200 {
                let h = 8.0 * (lcg(&mut state) - 0.5);
                let q_hat = 0.2 + 4.0 * lcg(&mut state);
                let threshold_gap = match p {
                    PNorm::L0 => (h.abs() - (2.0 * q_hat).sqrt()).abs(),
                    PNorm::L1 => (h.abs() - 1.0).abs(),
                    PNorm::L2 => 1.0,
                };
                if threshold_gap < 1e-3 {
                    continue;
                }
                let dh = 1e-6;
                let fd = -(scalar_potential(p, h + dh, q_hat)
                    - scalar_potential(p, h - dh, q_hat))
                    / (2.0 * dh);
                assert!(
                    (fd - x_star(p, h, q_hat)).abs() <= 1e-6,
                    "p = {p}, h = {h}, q_hat = {q_hat}"
                );
            }
        }
    }

    #[test]
    fn l1_critical_point_reference_values() {
        // Reference points for the L1 boundary.
        let a = critical_alpha(PNorm::L1, 0.5).unwrap();
        assert_relative_eq!(a, 0.83129, epsilon = 1e-4);
        let a = critical_alpha(PNorm::L1, 0.19284).unwrap();
        assert_relative_eq!(a, 0.5, epsilon = 1e-4);
    }

    #[test]
    fn degenerate_norm_thresholds() {
        assert_eq!(critical_alpha(PNorm::L0, 0.3).unwrap(), 0.3);
        assert_eq!(critical_alpha(PNorm::L2, 0.3).unwrap(), 1.0);
        assert_eq!(critical_rho(PNorm::L0, 0.7).unwrap(), 0.7);
        assert!(matches!(
            critical_rho(PNorm::L2, 0.9),
            Err(ReplicaError::NoSolution(_))
        ));
    }

    #[test]
    fn critical_rho_reference_and_round_trip() {
        let r = critical_rho(PNorm::L1, 0.5).unwrap();
        assert_relative_eq!(r, 0.19284, epsilon = 1e-4);
        let r = critical_rho(PNorm::L1, 0.83129).unwrap();
        assert_relative_eq!(r, 0.5, epsilon = 1e-4);

        for rho in [0.05, 0.2, 0.5, 0.8, 0.95] {
            let alpha = critical_alpha(PNorm::L1, rho).unwrap();
            let back = critical_rho(PNorm::L1, alpha).unwrap();
            assert_relative_eq!(back, rho, epsilon = 1e-6);
        }
    }

    #[test]
    fn l1_boundary_between_diagonal_and_one() {
        let mut rho = 0.01;
        while rho < 0.995 {
            let alpha = critical_alpha(PNorm::L1, rho).unwrap();
            assert!(alpha > rho && alpha < 1.0, "rho = {rho}, alpha = {alpha}");
            rho += 0.01;
        }
        assert!(critical_alpha(PNorm::L1, 0.999).unwrap() > 0.999);
        assert!(critical_alpha(PNorm::L1, 1e-4).unwrap() < 0.01);
    }

    #[test]
    fn l1_chi_hat_matches_damped_fixed_point_oracle() {
        // Independent route to the same root: damped fixed-point iteration
        // of the self-consistency map.
        let (alpha, rho) = (0.99, 0.5);
        let solved = l1_successful_chi_hat(alpha, rho).unwrap();

        let mut x = 0.1f64;
        for _ in 0..200_000 {
            let next = 0.5 * x + 0.5 * l1_chi_hat_map(x, alpha, rho);
            if (next - x).abs() <= 1e-13 {
                x = next;
                break;
            }
            x = next;
        }
        assert_relative_eq!(solved, x, epsilon = 1e-10);
        // Residual of the returned root.
        assert!(l1_chi_hat_residual(solved, alpha, rho).abs() <= 1e-12);
    }

    #[test]
    fn l1_chi_hat_at_threshold_consistency() {
        // Just above the critical rate the solution exists and satisfies the
        // marginal-stability relation to first order.
        let rho = 0.5;
        let alpha_c = critical_alpha(PNorm::L1, rho).unwrap();
        let chi_hat = l1_successful_chi_hat(alpha_c + 1e-9, rho).unwrap();
        let u = chi_hat.sqrt().recip();
        let boundary = 2.0 * (1.0 - rho) * q_function(u) + rho;
        assert_relative_eq!(boundary, 0.83129, epsilon = 1e-4);
    }

    #[test]
    fn l1_chi_hat_no_solution_cases() {
        // Below the critical rate there is no successful branch.
        assert!(matches!(
            l1_successful_chi_hat(0.5, 0.5),
            Err(ReplicaError::NoSolution(_))
        ));
        // Dense limit: the self-consistency map degenerates to x -> x + 1.
        assert!(matches!(
            l1_successful_chi_hat(1.0, 1.0 - 1e-12),
            Err(ReplicaError::NoSolution(_))
        ));
    }

    #[test]
    fn worst_case_bound_properties() {
        // Any returned value respects the margin constraint.
        for rho in [0.001, 0.003, 0.005, 0.008] {
            let alpha = worst_case_l1_alpha(rho).unwrap();
            let c = 2.0f64.powf(0.25) - 1.0;
            assert!(alpha > 2.0 * rho / (c * c), "rho = {rho}");
        }
        // Far too dense for the bound to close below the cap.
        assert!(matches!(
            worst_case_l1_alpha(0.1),
            Err(ReplicaError::NoSolution(_))
        ));
    }

    #[test]
    fn worst_case_bound_matches_grid_scan_oracle() {
        let rho = 0.005;
        let alpha = worst_case_l1_alpha(rho).unwrap();

        // Fine scan over alpha at step 1e-5: first alpha where both
        // inequalities hold.
        let c = 2.0f64.powf(0.25) - 1.0;
        let mut scan = None;
        let mut a = 1e-5f64;
        while a <= 10.0 {
            let margin = c - (2.0 * rho / a).sqrt();
            let w = 2.0 * rho * (1.0 / (2.0 * rho)).ln() + 2.0 * rho - 0.5 * a * margin * margin;
            if margin > 0.0 && w < 0.0 {
                scan = Some(a);
                break;
            }
            a += 1e-5;
        }
        let scan = scan.expect("scan oracle found no boundary");
        assert!((alpha - scan).abs() <= 2e-5, "root {alpha} vs scan {scan}");
    }

    #[test]
    fn worst_case_dominates_replica_boundary() {
        let mut rho = 0.0005;
        while rho < 0.012 {
            if let Ok(worst) = worst_case_l1_alpha(rho) {
                let typical = critical_alpha(PNorm::L1, rho).unwrap();
                assert!(
                    worst > typical,
                    "rho = {rho}: worst {worst} <= typical {typical}"
                );
            }
            rho += 0.0005;
        }
    }

    #[test]
    fn threshold_curves_shape() {
        let grid: Vec<f64> = (1..100).map(|i| i as f64 / 100.0).collect();
        let l0 = threshold_curve(PNorm::L0, &grid, CurveMethod::Replica);
        let l1 = threshold_curve(PNorm::L1, &grid, CurveMethod::Replica);
        let l2 = threshold_curve(PNorm::L2, &grid, CurveMethod::Replica);
        assert!(l0.gaps.is_empty() && l1.gaps.is_empty() && l2.gaps.is_empty());
        assert_eq!(l1.points.len(), 99);

        for ((rho0, a0), ((_, a1), (_, a2))) in
            l0.points.iter().zip(l1.points.iter().zip(&l2.points))
        {
            assert_eq!(a0, rho0);
            assert_eq!(*a2, 1.0);
            assert!(a0 < a1 && a1 < a2);
        }
        // L1 curve is monotone increasing over the grid.
        for w in l1.points.windows(2) {
            assert!(w[0].1 < w[1].1);
        }
    }

    #[test]
    fn worst_case_curve_records_gaps() {
        let grid = [0.001, 0.005, 0.05, 0.2];
        let curve = threshold_curve(PNorm::L1, &grid, CurveMethod::WorstCase);
        assert_eq!(curve.points.len() + curve.gaps.len(), 4);
        assert!(curve.points.iter().any(|&(r, _)| r == 0.001));
        assert!(curve.gaps.iter().any(|(r, _)| *r == 0.2));
    }
}
