//! Replica-symmetric free energy, its saddle points, and local stability.
//!
//! The free energy is a six-variable extremization whose stationary points
//! split into a successful branch (perfect reconstruction, `q = m = rho`,
//! diverging conjugates) and a failure branch (all parameters finite,
//! positive reconstruction error). The failure branch is solved here by a
//! damped fixed-point iteration on stationarity equations that are
//! discretized with the same Gaussian quadrature rule used to evaluate the
//! free energy, so converged outputs are exact stationary points of the
//! evaluated objective. The successful branch is handled in rescaled
//! variables where the conjugates have been taken to infinity analytically.

use super::{PNorm, PhaseVerdict, ReplicaError, RsOrderParams};
use crate::numerics::{gaussian_quadrature, q_function, QuadratureRule};
use std::sync::OnceLock;

/// Options for [`solve_rs_saddle`].
#[derive(Debug, Clone)]
pub struct SaddleOptions {
    pub max_iterations: usize,
    /// Mixing weight of the new iterate; the map can oscillate near the
    /// transition, so updates are damped.
    pub damping: f64,
    /// Stop when successive iterates agree to this max-norm.
    pub iterate_tol: f64,
    /// Required max-norm of the stationarity residuals at the fixed point.
    pub residual_tol: f64,
    /// Order of the Gaussian quadrature used for the potential integrals.
    pub quadrature_order: usize,
}

impl Default for SaddleOptions {
    fn default() -> Self {
        SaddleOptions {
            max_iterations: 10_000,
            damping: 0.5,
            iterate_tol: 1e-13,
            residual_tol: 1e-10,
            quadrature_order: DEFAULT_QUADRATURE_ORDER,
        }
    }
}

pub(crate) const DEFAULT_QUADRATURE_ORDER: usize = 200;

fn default_rule() -> &'static QuadratureRule {
    static RULE: OnceLock<QuadratureRule> = OnceLock::new();
    RULE.get_or_init(|| gaussian_quadrature(DEFAULT_QUADRATURE_ORDER).expect("default rule"))
}

fn rule_for_order(order: usize) -> Result<std::borrow::Cow<'static, QuadratureRule>, ReplicaError> {
    if order == DEFAULT_QUADRATURE_ORDER {
        Ok(std::borrow::Cow::Borrowed(default_rule()))
    } else {
        Ok(std::borrow::Cow::Owned(gaussian_quadrature(order)?))
    }
}

/// Predicted mean square error per element, `q - 2 m + rho`.
///
/// Zero exactly when the reconstruction typically matches the signal
/// (`q = m = rho`).
pub fn predicted_mse(params: &RsOrderParams, rho: f64) -> f64 {
    params.q - 2.0 * params.m + rho
}

/// Evaluate the replica-symmetric free-energy objective at the given order
/// parameters (no extremization), using the default quadrature rule for the
/// two Gaussian integrals of the scalar potential.
pub fn rs_free_energy(
    p: PNorm,
    alpha: f64,
    rho: f64,
    params: &RsOrderParams,
) -> Result<f64, ReplicaError> {
    rs_free_energy_with_rule(p, alpha, rho, params, default_rule())
}

/// [`rs_free_energy`] with an explicit quadrature rule.
pub fn rs_free_energy_with_rule(
    p: PNorm,
    alpha: f64,
    rho: f64,
    params: &RsOrderParams,
    rule: &QuadratureRule,
) -> Result<f64, ReplicaError> {
    let RsOrderParams { q, chi, m, q_hat, chi_hat, m_hat } = *params;
    for (name, v) in [
        ("q", q),
        ("chi", chi),
        ("m", m),
        ("q_hat", q_hat),
        ("chi_hat", chi_hat),
        ("m_hat", m_hat),
    ] {
        if !v.is_finite() {
            return Err(ReplicaError::InvalidParams(format!("{name} = {v} is not finite")));
        }
    }
    if chi <= 0.0 || q_hat <= 0.0 || chi_hat < 0.0 {
        return Err(ReplicaError::InvalidParams(format!(
            "need chi > 0, q_hat > 0, chi_hat >= 0 (got chi = {chi}, q_hat = {q_hat}, chi_hat = {chi_hat})"
        )));
    }

    let mse = q - 2.0 * m + rho;
    let sqrt_v0 = chi_hat.sqrt();
    let sqrt_v1 = (chi_hat + m_hat * m_hat).sqrt();
    let zero_part = rule.integrate(|z| super::scalar_potential(p, sqrt_v0 * z, q_hat));
    let signal_part = rule.integrate(|z| super::scalar_potential(p, sqrt_v1 * z, q_hat));

    Ok(alpha * mse / (2.0 * chi) + m_hat * m - 0.5 * q_hat * q + 0.5 * chi_hat * chi
        + (1.0 - rho) * zero_part
        + rho * signal_part)
}

/// Quadrature-discretized integrals entering the stationarity equations.
///
/// `second_moment(v)` is `E x*(sqrt(v) z)^2`; `response(v)` is
/// `E x*(sqrt(v) z) z / sqrt(v)`, the average derivative of the minimizer
/// with respect to its field.
struct PotentialMoments<'a> {
    p: PNorm,
    q_hat: f64,
    rule: &'a QuadratureRule,
}

impl PotentialMoments<'_> {
    fn second_moment(&self, v: f64) -> f64 {
        let s = v.max(1e-300).sqrt();
        self.rule.integrate(|z| {
            let x = super::x_star(self.p, s * z, self.q_hat);
            x * x
        })
    }

    fn response(&self, v: f64) -> f64 {
        let s = v.max(1e-300).sqrt();
        self.rule.integrate(|z| super::x_star(self.p, s * z, self.q_hat) * z) / s
    }
}

/// Solve the saddle-point equations of the free energy.
///
/// The branch is chosen by the starting point: a start with infinite
/// conjugates (see [`RsOrderParams::successful_start`]) requests the
/// successful branch, which is solved in rescaled variables; a finite start
/// runs the damped fixed-point iteration for the failure branch. A failure
/// iteration that collapses onto perfect reconstruction hands over to the
/// successful-branch path.
pub fn solve_rs_saddle(
    p: PNorm,
    alpha: f64,
    rho: f64,
    init: &RsOrderParams,
    opts: &SaddleOptions,
) -> Result<RsOrderParams, ReplicaError> {
    assert!(alpha > 0.0, "alpha must be positive");
    assert!(rho > 0.0 && rho < 1.0, "rho must lie in (0,1)");

    if init.is_successful_branch() {
        return solve_successful_branch(p, alpha, rho, init, opts);
    }
    solve_failure_branch(p, alpha, rho, init, opts)
}

/// Successful branch in rescaled variables: `q = m = rho`, `chi -> 0`,
/// `q_hat = m_hat -> inf`, with `chi_hat` finite and branch-specific.
fn solve_successful_branch(
    p: PNorm,
    alpha: f64,
    rho: f64,
    init: &RsOrderParams,
    opts: &SaddleOptions,
) -> Result<RsOrderParams, ReplicaError> {
    let chi_hat = match p {
        PNorm::L1 => {
            // Damped fixed-point iteration of the self-consistency map; this
            // is deliberately a different route to the root than the
            // bracketing solver in `l1_successful_chi_hat`.
            let mut x = if init.chi_hat.is_finite() && init.chi_hat > 0.0 {
                init.chi_hat
            } else {
                1.0
            };
            let mut converged = false;
            for _ in 0..opts.max_iterations {
                let next = (1.0 - opts.damping) * x
                    + opts.damping * super::l1_chi_hat_map(x, alpha, rho);
                let delta = (next - x).abs();
                x = next;
                if !x.is_finite() || x > 1e12 {
                    return Err(ReplicaError::ConvergenceFailure {
                        reason: format!(
                            "successful-branch iteration diverged at alpha = {alpha}, rho = {rho}; \
                             no successful solution below the critical rate"
                        ),
                        residuals: vec![x],
                    });
                }
                if delta <= opts.iterate_tol * (1.0 + x.abs()) {
                    converged = true;
                    break;
                }
            }
            if !converged {
                return Err(ReplicaError::ConvergenceFailure {
                    reason: "successful-branch chi_hat iteration hit the iteration cap".into(),
                    residuals: vec![x],
                });
            }
            x
        }
        PNorm::L2 => {
            if alpha <= 1.0 {
                return Err(ReplicaError::ConvergenceFailure {
                    reason: format!(
                        "the L2 successful solution exists only for alpha > 1 (got {alpha})"
                    ),
                    residuals: vec![],
                });
            }
            // Large-system limit of the rescaled chi stationarity.
            4.0 * rho / (alpha - 1.0)
        }
        PNorm::L0 => {
            return Err(ReplicaError::ConvergenceFailure {
                reason: "the L0 successful solution has a diverging chi_hat and is unstable \
                         against replica-symmetry breaking; it has no finite representation here"
                    .into(),
                residuals: vec![],
            });
        }
    };

    Ok(RsOrderParams {
        q: rho,
        chi: 0.0,
        m: rho,
        q_hat: f64::INFINITY,
        chi_hat,
        m_hat: f64::INFINITY,
    })
}

fn solve_failure_branch(
    p: PNorm,
    alpha: f64,
    rho: f64,
    init: &RsOrderParams,
    opts: &SaddleOptions,
) -> Result<RsOrderParams, ReplicaError> {
    let rule = rule_for_order(opts.quadrature_order)?;
    let d = opts.damping;

    let mut q = init.q.max(1e-6);
    let mut m = init.m;
    let mut chi = init.chi.max(1e-9);
    let mut chi_hat = init.chi_hat.max(1e-12);

    let mut last_residuals = vec![f64::NAN; 4];
    for _ in 0..opts.max_iterations {
        let q_hat = alpha / chi;
        let m_hat = alpha / chi;
        let moments = PotentialMoments { p, q_hat, rule: &rule };
        let v0 = chi_hat;
        let v1 = chi_hat + m_hat * m_hat;

        let q_next = (1.0 - rho) * moments.second_moment(v0) + rho * moments.second_moment(v1);
        let m_next = rho * m_hat * moments.response(v1);
        let chi_next = (1.0 - rho) * moments.response(v0) + rho * moments.response(v1);
        let mse = q_next - 2.0 * m_next + rho;
        let chi_hat_next = (alpha * mse / (chi_next * chi_next)).max(1e-14);

        last_residuals = vec![
            q_next - q,
            m_next - m,
            chi_next - chi,
            chi_hat_next - chi_hat,
        ];

        q = (1.0 - d) * q + d * q_next;
        m = (1.0 - d) * m + d * m_next;
        chi = (1.0 - d) * chi + d * chi_next;
        chi_hat = (1.0 - d) * chi_hat + d * chi_hat_next;

        if !(q.is_finite() && m.is_finite() && chi.is_finite() && chi_hat.is_finite()) {
            return Err(ReplicaError::ConvergenceFailure {
                reason: format!("failure-branch iteration left the finite domain at alpha = {alpha}, rho = {rho}"),
                residuals: last_residuals,
            });
        }

        // Collapse onto perfect reconstruction: hand over to the rescaled
        // successful-branch treatment.
        if chi < 1e-9 || mse.abs() < 1e-13 {
            let start = RsOrderParams::successful_start(rho);
            return solve_successful_branch(p, alpha, rho, &start, opts);
        }

        let delta = last_residuals
            .iter()
            .map(|r| r.abs())
            .fold(0.0f64, f64::max);
        let scale = 1.0 + q.abs().max(chi_hat.abs());
        if delta <= opts.iterate_tol * scale {
            break;
        }
    }

    // Polish and verify: at a true fixed point the (undamped) update maps
    // the iterate to itself within the residual tolerance.
    let q_hat = alpha / chi;
    let m_hat = alpha / chi;
    let moments = PotentialMoments { p, q_hat, rule: &rule };
    let v0 = chi_hat;
    let v1 = chi_hat + m_hat * m_hat;
    let q_res = (1.0 - rho) * moments.second_moment(v0) + rho * moments.second_moment(v1) - q;
    let m_res = rho * m_hat * moments.response(v1) - m;
    let chi_res = (1.0 - rho) * moments.response(v0) + rho * moments.response(v1) - chi;
    let mse = q - 2.0 * m + rho;
    let chi_hat_res = alpha * mse / (chi * chi) - chi_hat;
    let residuals = vec![q_res, m_res, chi_res, chi_hat_res];
    let worst = residuals.iter().map(|r| r.abs()).fold(0.0f64, f64::max);
    if worst > opts.residual_tol * (1.0 + q.abs().max(chi_hat.abs())) {
        return Err(ReplicaError::ConvergenceFailure {
            reason: format!(
                "failure-branch iteration did not reach residual tolerance at alpha = {alpha}, rho = {rho} (worst {worst:e})"
            ),
            residuals,
        });
    }

    Ok(RsOrderParams { q, chi, m, q_hat, chi_hat, m_hat })
}

/// Local stability of the replica-symmetric saddle against
/// replica-symmetry-breaking perturbations (de Almeida-Thouless criterion).
///
/// Evaluates the stability expression
/// `(alpha/chi^2) * [(1-rho) E (dx*/dh)^2 + rho E (dx*/dh at the signal field)^2]`
/// using the closed piecewise-constant derivative of the scalar minimizer;
/// the saddle is stable iff the value does not exceed 1. On the successful
/// branch (infinite conjugates) the finite limit is taken using
/// `chi * q_hat -> alpha`.
///
/// The L0 minimizer is discontinuous, which makes the derivative integral
/// divergent; its verdict is categorically unstable.
pub fn at_stability(
    p: PNorm,
    alpha: f64,
    rho: f64,
    params: &RsOrderParams,
) -> Result<PhaseVerdict, ReplicaError> {
    for (name, v) in [("q", params.q), ("chi", params.chi), ("m", params.m), ("chi_hat", params.chi_hat)] {
        if !v.is_finite() {
            return Err(ReplicaError::InvalidParams(format!("{name} = {v} is not finite")));
        }
    }
    if params.chi_hat < 0.0 {
        return Err(ReplicaError::InvalidParams("chi_hat must be nonnegative".into()));
    }

    if p == PNorm::L0 {
        return Ok(PhaseVerdict::from_lhs(
            f64::INFINITY,
            Some(
                "the hard-threshold minimizer is discontinuous, so the squared-derivative \
                 integral diverges; the replica-symmetric saddle is always unstable"
                    .to_string(),
            ),
        ));
    }

    let successful = params.is_successful_branch();
    let lhs = match p {
        PNorm::L1 => {
            // dx*/dh = 1/q_hat on the active set, 0 elsewhere; the active
            // probabilities are Gaussian tails at the soft threshold.
            let chi_hat = params.chi_hat;
            if chi_hat <= 0.0 {
                // Nothing is active: the stability expression vanishes.
                0.0
            } else if successful {
                // (alpha/chi^2)(1/q_hat^2) -> 1/alpha, and the signal field
                // is infinitely strong so its tail probability is 1/2.
                (2.0 * (1.0 - rho) * q_function(chi_hat.sqrt().recip()) + rho) / alpha
            } else {
                let v1 = chi_hat + params.m_hat * params.m_hat;
                let tails = 2.0 * (1.0 - rho) * q_function(chi_hat.sqrt().recip())
                    + 2.0 * rho * q_function(v1.sqrt().recip());
                alpha / (params.chi * params.q_hat).powi(2) * tails
            }
        }
        PNorm::L2 => {
            // dx*/dh = 1/(q_hat + 2) everywhere.
            if successful {
                // chi (q_hat + 2) -> alpha in the limit.
                1.0 / alpha
            } else {
                alpha / (params.chi * (params.q_hat + 2.0)).powi(2)
            }
        }
        PNorm::L0 => unreachable!(),
    };
    Ok(PhaseVerdict::from_lhs(lhs, None))
}
