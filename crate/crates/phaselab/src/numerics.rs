//! Shared numerical kernels: Gaussian tail function, Gaussian quadrature,
//! bracketed root finding and polynomial least squares.
//!
//! Everything here is pure and reentrant; all arithmetic is `f64`.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum NumericsError {
    #[error("no sign change over [{lo}, {hi}]: f(lo) = {f_lo:e}, f(hi) = {f_hi:e}")]
    NoBracket { lo: f64, hi: f64, f_lo: f64, f_hi: f64 },
    #[error("function evaluated to a non-finite value at x = {x}")]
    NonFinite { x: f64 },
    #[error("quadrature order must be at least 2 (got {0})")]
    OrderTooSmall(usize),
    #[error("least-squares system is rank deficient (pivot {pivot:e} at column {col})")]
    RankDeficient { col: usize, pivot: f64 },
    #[error("need at least degree + 1 points (got {points} for degree {degree})")]
    TooFewPoints { points: usize, degree: usize },
}

/// Density of the standard Gaussian measure, `exp(-z^2/2) / sqrt(2*pi)`.
#[inline]
pub fn gaussian_pdf(z: f64) -> f64 {
    (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// Upper-tail probability of the standard Gaussian, `Q(x) = P(Z > x)`.
///
/// Evaluated as `erfc(x / sqrt(2)) / 2`; relative error is at the level of
/// the underlying `erfc` (a few ulps), far below 1e-12 on finite inputs.
#[inline]
pub fn q_function(x: f64) -> f64 {
    0.5 * libm::erfc(x / std::f64::consts::SQRT_2)
}

/// A quadrature rule for the standard Gaussian measure
/// `Dz = exp(-z^2/2) dz / sqrt(2*pi)`.
///
/// `sum_i weights[i] * f(nodes[i])` approximates `integral f(z) Dz`, exactly
/// for polynomials of degree `<= 2*order - 1`.
#[derive(Debug, Clone)]
pub struct QuadratureRule {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl QuadratureRule {
    pub fn order(&self) -> usize {
        self.nodes.len()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Integrate `f` against the Gaussian measure.
    pub fn integrate(&self, mut f: impl FnMut(f64) -> f64) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&z, &w)| w * f(z))
            .sum()
    }
}

/// Build an `order`-point Gauss-Hermite rule rescaled to the standard
/// Gaussian measure.
///
/// Nodes and weights come from the Golub-Welsch algorithm: the nodes are the
/// eigenvalues of the symmetric tridiagonal Jacobi matrix of the Hermite
/// recurrence, and each weight is the squared first component of the
/// corresponding eigenvector times the zeroth moment.
pub fn gaussian_quadrature(order: usize) -> Result<QuadratureRule, NumericsError> {
    if order < 2 {
        return Err(NumericsError::OrderTooSmall(order));
    }

    // Jacobi matrix for physicists' Hermite polynomials (weight exp(-x^2)):
    // zero diagonal, off-diagonal sqrt((i+1)/2).
    let mut diag = vec![0.0f64; order];
    let mut off = vec![0.0f64; order];
    for (i, o) in off.iter_mut().take(order - 1).enumerate() {
        *o = (((i + 1) as f64) / 2.0).sqrt();
    }

    let first = tridiag_eigen_first_components(&mut diag, &mut off);

    // Convert to the Gaussian measure: z = sqrt(2) x, w = mu0 * q0^2 / sqrt(pi)
    // with mu0 = integral exp(-x^2) dx = sqrt(pi), so the weights are q0^2.
    let mut pairs: Vec<(f64, f64)> = diag
        .iter()
        .zip(&first)
        .map(|(&x, &q0)| (std::f64::consts::SQRT_2 * x, q0 * q0))
        .collect();
    pairs.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());

    Ok(QuadratureRule {
        nodes: pairs.iter().map(|p| p.0).collect(),
        weights: pairs.iter().map(|p| p.1).collect(),
    })
}

/// Implicit-shift QL iteration for a symmetric tridiagonal matrix.
///
/// On return `diag` holds the eigenvalues (unsorted) and the returned vector
/// holds the first component of each eigenvector. `off[order-1]` is scratch.
fn tridiag_eigen_first_components(diag: &mut [f64], off: &mut [f64]) -> Vec<f64> {
    let n = diag.len();
    let mut first = vec![0.0f64; n];
    first[0] = 1.0;
    off[n - 1] = 0.0;

    for l in 0..n {
        let mut iter = 0;
        loop {
            // Find the first small off-diagonal element at or after l.
            let mut m = l;
            while m + 1 < n {
                let dd = diag[m].abs() + diag[m + 1].abs();
                if off[m].abs() <= f64::EPSILON * dd {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            iter += 1;
            assert!(iter <= 50, "tridiagonal QL failed to converge");

            // Wilkinson-style shift from the leading 2x2 block at l.
            let mut g = (diag[l + 1] - diag[l]) / (2.0 * off[l]);
            let mut r = g.hypot(1.0);
            g = diag[m] - diag[l] + off[l] / (g + r.copysign(g));
            let (mut s, mut c) = (1.0f64, 1.0f64);
            let mut p = 0.0f64;

            for i in (l..m).rev() {
                let mut f = s * off[i];
                let b = c * off[i];
                r = f.hypot(g);
                off[i + 1] = r;
                if r == 0.0 {
                    diag[i + 1] -= p;
                    off[m] = 0.0;
                    break;
                }
                s = f / r;
                c = g / r;
                g = diag[i + 1] - p;
                r = (diag[i] - g) * s + 2.0 * c * b;
                p = s * r;
                diag[i + 1] = g + p;
                g = c * r - b;

                // Rotate the tracked first components of eigenvectors i, i+1.
                f = first[i + 1];
                first[i + 1] = s * first[i] + c * f;
                first[i] = c * first[i] - s * f;
            }
            if r == 0.0 && m > l + 1 {
                continue;
            }
            diag[l] -= p;
            off[l] = g;
            off[m] = 0.0;
        }
    }
    first
}

/// Find a root of `f` inside the bracket `[lo, hi]` by Brent's method.
///
/// Requires a sign change over the bracket; converges to within `tol` in
/// bracket width (bisection is the fallback step, so convergence is
/// guaranteed). Non-finite function values abort with an error.
pub fn find_root(
    mut f: impl FnMut(f64) -> f64,
    lo: f64,
    hi: f64,
    tol: f64,
) -> Result<f64, NumericsError> {
    assert!(lo < hi, "invalid bracket: lo >= hi");
    assert!(tol > 0.0, "tolerance must be positive");

    let mut a = lo;
    let mut b = hi;
    let mut fa = f(a);
    let mut fb = f(b);
    if !fa.is_finite() {
        return Err(NumericsError::NonFinite { x: a });
    }
    if !fb.is_finite() {
        return Err(NumericsError::NonFinite { x: b });
    }
    if fa == 0.0 {
        return Ok(a);
    }
    if fb == 0.0 {
        return Ok(b);
    }
    if fa.signum() == fb.signum() {
        return Err(NumericsError::NoBracket { lo, hi, f_lo: fa, f_hi: fb });
    }

    let mut c = a;
    let mut fc = fa;
    let mut d = b - a;
    let mut e = b - a;

    for _ in 0..200 {
        if fb.signum() == fc.signum() {
            c = a;
            fc = fa;
            d = b - a;
            e = d;
        }
        if fc.abs() < fb.abs() {
            a = b;
            b = c;
            c = a;
            fa = fb;
            fb = fc;
            fc = fa;
        }
        let tol1 = 2.0 * f64::EPSILON * b.abs() + 0.5 * tol;
        let xm = 0.5 * (c - b);
        if xm.abs() <= tol1 || fb == 0.0 {
            return Ok(b);
        }
        if e.abs() >= tol1 && fa.abs() > fb.abs() {
            // Inverse quadratic interpolation (secant when only two points).
            let s = fb / fa;
            let (mut p, mut q) = if a == c {
                (2.0 * xm * s, 1.0 - s)
            } else {
                let q = fa / fc;
                let r = fb / fc;
                (
                    s * (2.0 * xm * q * (q - r) - (b - a) * (r - 1.0)),
                    (q - 1.0) * (r - 1.0) * (s - 1.0),
                )
            };
            if p > 0.0 {
                q = -q;
            }
            p = p.abs();
            let min1 = 3.0 * xm * q - (tol1 * q).abs();
            let min2 = (e * q).abs();
            if 2.0 * p < min1.min(min2) {
                e = d;
                d = p / q;
            } else {
                d = xm;
                e = d;
            }
        } else {
            d = xm;
            e = d;
        }
        a = b;
        fa = fb;
        if d.abs() > tol1 {
            b += d;
        } else {
            b += tol1.copysign(xm);
        }
        fb = f(b);
        if !fb.is_finite() {
            return Err(NumericsError::NonFinite { x: b });
        }
        if fb == 0.0 {
            return Ok(b);
        }
    }
    Ok(b)
}

/// Least-squares polynomial fit: coefficients `c[0..=degree]` minimizing
/// `sum_j (ys[j] - sum_k c[k] xs[j]^k)^2`.
///
/// Solved by Householder QR on the Vandermonde matrix so that exact
/// polynomial data is recovered to near machine precision. `c[0]` is the
/// fitted value at `x = 0`, which is the infinite-size extrapolation when
/// `x` is an inverse system size.
pub fn fit_polynomial(
    xs: &[f64],
    ys: &[f64],
    degree: usize,
) -> Result<Vec<f64>, NumericsError> {
    assert_eq!(xs.len(), ys.len(), "xs and ys must have equal length");
    let m = xs.len();
    let n = degree + 1;
    if m < n {
        return Err(NumericsError::TooFewPoints { points: m, degree });
    }

    // Column-major Vandermonde.
    let mut a = vec![0.0f64; m * n];
    for (j, &x) in xs.iter().enumerate() {
        let mut pow = 1.0;
        for k in 0..n {
            a[k * m + j] = pow;
            pow *= x;
        }
    }
    let mut rhs = ys.to_vec();

    // Householder QR, applying reflectors to the right-hand side as we go.
    for k in 0..n {
        let col = &a[k * m + k..(k + 1) * m];
        let norm = col.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm <= 1e-13 * (m as f64).sqrt() {
            return Err(NumericsError::RankDeficient { col: k, pivot: norm });
        }
        let alpha = -norm.copysign(a[k * m + k]);
        let mut v = col.to_vec();
        v[0] -= alpha;
        let vnorm2: f64 = v.iter().map(|x| x * x).sum();
        if vnorm2 > 0.0 {
            for col_j in k..n {
                let dot: f64 = v
                    .iter()
                    .enumerate()
                    .map(|(i, &vi)| vi * a[col_j * m + k + i])
                    .sum();
                let scale = 2.0 * dot / vnorm2;
                for (i, &vi) in v.iter().enumerate() {
                    a[col_j * m + k + i] -= scale * vi;
                }
            }
            let dot: f64 = v.iter().enumerate().map(|(i, &vi)| vi * rhs[k + i]).sum();
            let scale = 2.0 * dot / vnorm2;
            for (i, &vi) in v.iter().enumerate() {
                rhs[k + i] -= scale * vi;
            }
        }
        a[k * m + k] = alpha;
    }

    // Back substitution on the upper-triangular factor.
    let mut coeffs = vec![0.0f64; n];
    for k in (0..n).rev() {
        let mut s = rhs[k];
        for j in k + 1..n {
            s -= a[j * m + k] * coeffs[j];
        }
        let r_kk = a[k * m + k];
        if r_kk.abs() <= 1e-13 {
            return Err(NumericsError::RankDeficient { col: k, pivot: r_kk });
        }
        coeffs[k] = s / r_kk;
    }
    Ok(coeffs)
}
