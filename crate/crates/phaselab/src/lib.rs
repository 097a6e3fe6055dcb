//! Phase boundaries of sparse-signal reconstruction.
//!
//! This crate computes the critical compression rate `alpha_c(rho)` above
//! which minimum-norm reconstruction of a sparse vector from random linear
//! measurements typically succeeds, for the L0, L1 and L2 norms, and
//! validates the L1 boundary by Monte Carlo experiment:
//!
//! * [`replica`] — the theory: scalar thresholding potentials, the
//!   replica-symmetric free energy and its saddle points, threshold curves,
//!   stability analysis and the worst-case L1 bound.
//! * [`numerics`] — shared kernels: Gaussian tail function, Gaussian
//!   quadrature, bracketed root finding, polynomial least squares.
//! * [`ensembles`] — samplers for sparse signals and random measurement
//!   matrices (i.i.d. Gaussian and row-orthogonal).
//! * [`lp`] — a dense simplex solver for basis pursuit
//!   (min ||x||_1 s.t. Fx = y) plus a brute-force oracle.
//! * [`experiment`] — seeded, resumable Monte Carlo sweeps that locate the
//!   empirical transition and extrapolate it to infinite system size.
//! * [`plot`] — static SVG rendering of the threshold diagram and the
//!   finite-size extrapolation figure.

pub mod ensembles;
pub mod experiment;
pub mod linalg;
pub mod lp;
pub mod numerics;
pub mod plot;
pub mod replica;

pub use ensembles::{MatrixEnsemble, NonzeroLaw, ProblemInstance, SignalPrior, SupportMode};
pub use lp::{LpSolution, SolverStatus};
pub use replica::{PNorm, PhaseVerdict, RsOrderParams, ThresholdCurve};
