//! Basis pursuit: minimize `||x||_1` subject to `F x = y`.
//!
//! The equality-constrained L1 problem is solved as a linear program on the
//! split variables `x = u - v`, `u, v >= 0`, by a dense revised simplex
//! method with an explicit basis inverse: a phase-1 artificial start
//! followed by largest-coefficient pricing, with Bland's rule engaged once
//! a degeneracy counter trips. Problem sizes here are desk scale
//! (`N <= 64`), where dense pivoting is simple and accurate.
//!
//! A combinatorial oracle ([`brute_force_l1_min`]) enumerates the vertices
//! of the feasible polytope for tiny `N` and is used to cross-validate the
//! simplex throughout the test suite.

use crate::linalg::{dot, least_squares, min_qr_diagonal, norm2, norm_inf, Matrix};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum LpError {
    #[error("brute-force enumeration supports at most {max} columns, got {n}")]
    TooLarge { n: usize, max: usize },
    #[error("row count {p} exceeds column count {n}")]
    TooManyRows { p: usize, n: usize },
}

/// Termination status of a solve.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolverStatus {
    Optimal,
    Infeasible,
    IterationLimit,
    Degenerate,
}

impl std::fmt::Display for SolverStatus {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            SolverStatus::Optimal => "optimal",
            SolverStatus::Infeasible => "infeasible",
            SolverStatus::IterationLimit => "iteration_limit",
            SolverStatus::Degenerate => "degenerate",
        };
        write!(f, "{s}")
    }
}

impl std::str::FromStr for SolverStatus {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "optimal" => Ok(SolverStatus::Optimal),
            "infeasible" => Ok(SolverStatus::Infeasible),
            "iteration_limit" => Ok(SolverStatus::IterationLimit),
            "degenerate" => Ok(SolverStatus::Degenerate),
            other => Err(format!("unknown solver status {other:?}")),
        }
    }
}

/// Result of an L1-minimization solve.
#[derive(Debug, Clone)]
pub struct LpSolution {
    pub x_hat: Vec<f64>,
    /// Achieved `sum_i |x_hat_i|`, recomputed from `x_hat`.
    pub objective: f64,
    pub status: SolverStatus,
    /// Simplex pivots performed (subsets examined, for the oracle).
    pub iterations: usize,
    /// `||F x_hat - y||_inf` against the original data.
    pub residual: f64,
    /// Smallest reduced cost over nonbasic columns in the final basis;
    /// `Some` only on optimal termination, where it certifies dual
    /// feasibility (`>= -pivot_tol`).
    pub dual_margin: Option<f64>,
}

/// Tolerances and limits for [`basis_pursuit`].
#[derive(Debug, Clone)]
pub struct LpOptions {
    pub feasibility_tol: f64,
    pub optimality_tol: f64,
    /// Entries smaller than this never pivot.
    pub pivot_tol: f64,
    /// Pivot cap; defaults to `50 (N + P)` when `None`.
    pub max_pivots: Option<usize>,
}

impl Default for LpOptions {
    fn default() -> Self {
        LpOptions {
            feasibility_tol: 1e-9,
            optimality_tol: 1e-9,
            pivot_tol: 1e-11,
            max_pivots: None,
        }
    }
}

pub const DEFAULT_SUCCESS_TOL: f64 = 1e-4;

/// Relative-error success criterion:
/// `||x_hat - x0||_2 / max(1, ||x0||_2) <= tol`.
///
/// The default tolerance is [`DEFAULT_SUCCESS_TOL`]; vertex solutions make
/// successes and failures sharply separated, so the verdict is insensitive
/// to the exact value over several orders of magnitude.
pub fn reconstruction_success(x_hat: &[f64], x0: &[f64], tol: f64) -> bool {
    assert_eq!(x_hat.len(), x0.len());
    assert!(tol > 0.0);
    let diff: f64 = x_hat
        .iter()
        .zip(x0)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt();
    diff / norm2(x0).max(1.0) <= tol
}

/// Working state of the revised simplex: the constraint data after row
/// sign normalization, the basis, and an explicit basis inverse.
struct Simplex<'a> {
    f: &'a Matrix,
    /// Per-row sign making the right-hand side nonnegative.
    flip: Vec<f64>,
    b: Vec<f64>,
    n: usize,
    p: usize,
    /// Basis column indices; `2n + i` are the artificials.
    basis: Vec<usize>,
    in_basis: Vec<bool>,
    /// Dense `p x p` basis inverse, row-major.
    b_inv: Vec<f64>,
    pivot_tol: f64,
    pivots: usize,
    bland: bool,
    stalled: usize,
    last_objective: f64,
}

impl<'a> Simplex<'a> {
    fn new(f: &'a Matrix, y: &[f64], pivot_tol: f64) -> Self {
        let p = f.rows();
        let n = f.cols();
        let flip: Vec<f64> = y.iter().map(|&v| if v < 0.0 { -1.0 } else { 1.0 }).collect();
        let b: Vec<f64> = y.iter().zip(&flip).map(|(&v, &s)| s * v).collect();
        let mut b_inv = vec![0.0; p * p];
        for i in 0..p {
            b_inv[i * p + i] = 1.0;
        }
        let mut in_basis = vec![false; 2 * n + p];
        for slot in in_basis.iter_mut().skip(2 * n) {
            *slot = true;
        }
        Simplex {
            f,
            flip,
            b,
            n,
            p,
            basis: (0..p).map(|i| 2 * n + i).collect(),
            in_basis,
            b_inv,
            pivot_tol,
            pivots: 0,
            bland: false,
            stalled: 0,
            last_objective: f64::INFINITY,
        }
    }

    /// Entry `i` of column `j` (after row normalization).
    #[inline]
    fn column_entry(&self, i: usize, j: usize) -> f64 {
        if j < self.n {
            self.flip[i] * self.f.get(i, j)
        } else if j < 2 * self.n {
            -self.flip[i] * self.f.get(i, j - self.n)
        } else if j - 2 * self.n == i {
            1.0
        } else {
            0.0
        }
    }

    fn basic_values(&self) -> Vec<f64> {
        (0..self.p)
            .map(|i| dot(&self.b_inv[i * self.p..(i + 1) * self.p], &self.b))
            .collect()
    }

    /// One simplex phase. `cost(j)` gives the cost of column `j`;
    /// `artificials_allowed` keeps the phase-1 columns eligible.
    fn run_phase(
        &mut self,
        cost: impl Fn(usize) -> f64,
        artificials_allowed: bool,
        max_pivots: usize,
    ) -> PhaseOutcome {
        let two_n = 2 * self.n;
        loop {
            if self.pivots >= max_pivots {
                return PhaseOutcome::IterationLimit;
            }
            let xb = self.basic_values();
            let objective: f64 = self
                .basis
                .iter()
                .zip(&xb)
                .map(|(&j, &v)| cost(j) * v)
                .sum();

            // Degeneracy counter: engage Bland's rule when the objective
            // stops moving pivot after pivot.
            if objective < self.last_objective - 1e-13 * (1.0 + objective.abs()) {
                self.stalled = 0;
            } else {
                self.stalled += 1;
                if self.stalled > self.n + self.p {
                    self.bland = true;
                }
            }
            self.last_objective = objective;

            // Simplex multipliers pi = c_B^T B^{-1}.
            let mut pi = vec![0.0f64; self.p];
            for (i, &bj) in self.basis.iter().enumerate() {
                let cb = cost(bj);
                if cb != 0.0 {
                    for (pi_k, inv) in
                        pi.iter_mut().zip(&self.b_inv[i * self.p..(i + 1) * self.p])
                    {
                        *pi_k += cb * inv;
                    }
                }
            }
            // t = F^T (flip .* pi) prices all structural columns at once.
            let flipped: Vec<f64> = pi.iter().zip(&self.flip).map(|(&a, &s)| a * s).collect();
            let t = self.f.transpose_matvec(&flipped);

            // Entering column: most negative reduced cost, or the first
            // negative one under Bland's rule.
            let mut entering = None;
            let mut best = -self.pivot_tol;
            let mut min_reduced = f64::INFINITY;
            let candidates = if artificials_allowed { two_n + self.p } else { two_n };
            for j in 0..candidates {
                if self.in_basis[j] {
                    continue;
                }
                let d = if j < self.n {
                    cost(j) - t[j]
                } else if j < two_n {
                    cost(j) + t[j - self.n]
                } else {
                    cost(j) - pi[j - two_n]
                };
                min_reduced = min_reduced.min(d);
                if d < best {
                    entering = Some(j);
                    if self.bland {
                        break;
                    }
                    best = d;
                }
            }
            let Some(q) = entering else {
                return PhaseOutcome::Optimal(if min_reduced.is_finite() {
                    min_reduced
                } else {
                    0.0
                });
            };

            // Transform the entering column through the basis inverse.
            let a_q: Vec<f64> = (0..self.p).map(|i| self.column_entry(i, q)).collect();
            let w: Vec<f64> = (0..self.p)
                .map(|i| dot(&self.b_inv[i * self.p..(i + 1) * self.p], &a_q))
                .collect();

            // Ratio test. Ties go to the largest pivot entry for stability,
            // or to the smallest basis index under Bland's rule.
            let mut leave: Option<usize> = None;
            let mut best_ratio = f64::INFINITY;
            for i in 0..self.p {
                if w[i] > self.pivot_tol {
                    let ratio = xb[i].max(0.0) / w[i];
                    let better = match leave {
                        None => true,
                        Some(r) => {
                            if (ratio - best_ratio).abs() <= 1e-12 * (1.0 + best_ratio.abs()) {
                                if self.bland {
                                    self.basis[i] < self.basis[r]
                                } else {
                                    w[i] > w[r]
                                }
                            } else {
                                ratio < best_ratio
                            }
                        }
                    };
                    if better {
                        leave = Some(i);
                        best_ratio = ratio;
                    }
                }
            }
            let Some(r) = leave else {
                // The objective is bounded below by zero, so an unbounded
                // ray can only arise from numerical breakdown.
                return PhaseOutcome::Degenerate;
            };

            self.pivot(r, q, &w);
        }
    }

    fn pivot(&mut self, r: usize, q: usize, w: &[f64]) {
        let p = self.p;
        let wr = w[r];
        for k in 0..p {
            self.b_inv[r * p + k] /= wr;
        }
        let row_r: Vec<f64> = self.b_inv[r * p..(r + 1) * p].to_vec();
        for i in 0..p {
            if i != r {
                let factor = w[i];
                if factor != 0.0 {
                    for (a, &b) in self.b_inv[i * p..(i + 1) * p].iter_mut().zip(&row_r) {
                        *a -= factor * b;
                    }
                }
            }
        }
        self.in_basis[self.basis[r]] = false;
        self.in_basis[q] = true;
        self.basis[r] = q;
        self.pivots += 1;
    }

    /// Pivot out basic artificials after phase 1 (degenerate pivots).
    /// Returns false if some artificial cannot be removed, which signals a
    /// rank-deficient row set.
    fn drive_out_artificials(&mut self) -> bool {
        for r in 0..self.p {
            if self.basis[r] < 2 * self.n {
                continue;
            }
            let mut replaced = false;
            for j in 0..2 * self.n {
                if self.in_basis[j] {
                    continue;
                }
                let a_j: Vec<f64> = (0..self.p).map(|i| self.column_entry(i, j)).collect();
                let w_r = dot(&self.b_inv[r * self.p..(r + 1) * self.p], &a_j);
                if w_r.abs() > 1e3 * self.pivot_tol {
                    let w: Vec<f64> = (0..self.p)
                        .map(|i| dot(&self.b_inv[i * self.p..(i + 1) * self.p], &a_j))
                        .collect();
                    self.pivot(r, j, &w);
                    replaced = true;
                    break;
                }
            }
            if !replaced {
                return false;
            }
        }
        true
    }
}

enum PhaseOutcome {
    /// Optimal with the smallest reduced cost seen in the final pricing pass.
    Optimal(f64),
    IterationLimit,
    Degenerate,
}

/// Solve `min ||x||_1  s.t.  F x = y` by the revised simplex method on the
/// split formulation.
///
/// Returns a vertex minimizer; on `Optimal` the feasibility residual is at
/// most `opts.feasibility_tol` and the basic solution has been re-solved
/// against the original data to remove accumulated pivot drift.
pub fn basis_pursuit(f: &Matrix, y: &[f64], opts: &LpOptions) -> Result<LpSolution, LpError> {
    let p = f.rows();
    let n = f.cols();
    assert_eq!(y.len(), p);
    if p > n {
        return Err(LpError::TooManyRows { p, n });
    }
    let max_pivots = opts.max_pivots.unwrap_or(50 * (n + p));

    let mut simplex = Simplex::new(f, y, opts.pivot_tol);

    // Phase 1: minimize the artificial mass.
    let two_n = 2 * n;
    let outcome = simplex.run_phase(|j| if j >= two_n { 1.0 } else { 0.0 }, true, max_pivots);
    match outcome {
        PhaseOutcome::Optimal(_) => {}
        PhaseOutcome::IterationLimit => {
            return Ok(finish(f, y, &simplex, SolverStatus::IterationLimit, None))
        }
        PhaseOutcome::Degenerate => {
            return Ok(finish(f, y, &simplex, SolverStatus::Degenerate, None))
        }
    }
    let artificial_mass: f64 = simplex
        .basis
        .iter()
        .zip(simplex.basic_values())
        .filter(|(&j, _)| j >= two_n)
        .map(|(_, v)| v.max(0.0))
        .sum();
    if artificial_mass > opts.feasibility_tol || !simplex.drive_out_artificials() {
        // Nonzero artificial mass means y is outside the column span; a
        // stuck artificial means a rank-deficient row set.
        return Ok(LpSolution {
            x_hat: vec![0.0; n],
            objective: 0.0,
            status: SolverStatus::Infeasible,
            iterations: simplex.pivots,
            residual: norm_inf(y),
            dual_margin: None,
        });
    }

    // Phase 2: minimize the split L1 objective over structural columns.
    simplex.last_objective = f64::INFINITY;
    simplex.stalled = 0;
    let outcome = simplex.run_phase(|j| if j < two_n { 1.0 } else { 0.0 }, false, max_pivots);
    let (status, margin) = match outcome {
        PhaseOutcome::Optimal(m) => (SolverStatus::Optimal, Some(m)),
        PhaseOutcome::IterationLimit => (SolverStatus::IterationLimit, None),
        PhaseOutcome::Degenerate => (SolverStatus::Degenerate, None),
    };

    let mut solution = finish(f, y, &simplex, status, margin);
    if solution.status == SolverStatus::Optimal {
        polish(f, y, &mut solution, opts);
        if solution.residual > opts.feasibility_tol {
            solution.status = SolverStatus::Degenerate;
            solution.dual_margin = None;
        }
    }
    Ok(solution)
}

fn finish(
    f: &Matrix,
    y: &[f64],
    simplex: &Simplex,
    status: SolverStatus,
    dual_margin: Option<f64>,
) -> LpSolution {
    let xb = simplex.basic_values();
    let mut x = vec![0.0f64; simplex.n];
    for (&j, &v) in simplex.basis.iter().zip(&xb) {
        if j < simplex.n {
            x[j] += v;
        } else if j < 2 * simplex.n {
            x[j - simplex.n] -= v;
        }
    }
    let mut solution = solution_from_x(f, y, x, simplex.pivots, status);
    solution.dual_margin = dual_margin;
    solution
}

fn solution_from_x(
    f: &Matrix,
    y: &[f64],
    x_hat: Vec<f64>,
    iterations: usize,
    status: SolverStatus,
) -> LpSolution {
    let fx = f.matvec(&x_hat);
    let residual = fx
        .iter()
        .zip(y)
        .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
    let objective = x_hat.iter().map(|v| v.abs()).sum();
    LpSolution {
        x_hat,
        objective,
        status,
        iterations,
        residual,
        dual_margin: None,
    }
}

/// Re-solve the basic system on the final support against the original
/// data, removing drift accumulated in the basis inverse.
fn polish(f: &Matrix, y: &[f64], solution: &mut LpSolution, opts: &LpOptions) {
    let support: Vec<usize> = solution
        .x_hat
        .iter()
        .enumerate()
        .filter(|(_, v)| v.abs() > opts.pivot_tol)
        .map(|(j, _)| j)
        .collect();
    if support.is_empty() || support.len() > f.rows() {
        return;
    }
    let f_s = f.select_columns(&support);
    if min_qr_diagonal(&f_s) <= 1e-12 {
        return;
    }
    let (x_s, _) = least_squares(&f_s, y);
    let mut polished = vec![0.0f64; f.cols()];
    for (&j, &v) in support.iter().zip(&x_s) {
        polished[j] = v;
    }
    let refined = solution_from_x(f, y, polished, solution.iterations, solution.status);
    if refined.residual <= solution.residual.max(opts.feasibility_tol) {
        solution.x_hat = refined.x_hat;
        solution.objective = refined.objective;
        solution.residual = refined.residual;
    }
}

/// Exhaustive vertex enumeration for tiny systems: every column subset of
/// size at most `P` whose least-squares solution reproduces `y` is a
/// candidate vertex; the minimum-L1 candidate is the LP optimum.
///
/// Ties keep the first candidate in subset-mask order.
pub fn brute_force_l1_min(f: &Matrix, y: &[f64]) -> Result<LpSolution, LpError> {
    const MAX_N: usize = 14;
    let p = f.rows();
    let n = f.cols();
    assert_eq!(y.len(), p);
    if n > MAX_N {
        return Err(LpError::TooLarge { n, max: MAX_N });
    }
    if p > n {
        return Err(LpError::TooManyRows { p, n });
    }

    let mut best: Option<(f64, Vec<f64>)> = None;
    let mut examined = 0usize;
    for mask in 0u32..(1u32 << n) {
        let size = mask.count_ones() as usize;
        if size > p {
            continue;
        }
        examined += 1;
        let support: Vec<usize> = (0..n).filter(|&j| mask & (1 << j) != 0).collect();

        let candidate = if support.is_empty() {
            if norm2(y) <= 1e-10 {
                Some(vec![0.0; n])
            } else {
                None
            }
        } else {
            let f_s = f.select_columns(&support);
            if min_qr_diagonal(&f_s) <= 1e-10 {
                None
            } else {
                let (x_s, residual) = least_squares(&f_s, y);
                if residual <= 1e-10 {
                    let mut x = vec![0.0; n];
                    for (&j, &v) in support.iter().zip(&x_s) {
                        x[j] = v;
                    }
                    Some(x)
                } else {
                    None
                }
            }
        };
        if let Some(x) = candidate {
            let obj: f64 = x.iter().map(|v| v.abs()).sum();
            let better = match &best {
                None => true,
                Some((best_obj, _)) => obj < best_obj - 1e-12,
            };
            if better {
                best = Some((obj, x));
            }
        }
    }

    match best {
        Some((_, x)) => Ok(solution_from_x(f, y, x, examined, SolverStatus::Optimal)),
        None => Ok(LpSolution {
            x_hat: vec![0.0; n],
            objective: 0.0,
            status: SolverStatus::Infeasible,
            iterations: examined,
            residual: norm_inf(y),
            dual_margin: None,
        }),
    }
}
