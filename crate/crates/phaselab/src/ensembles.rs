//! Samplers for problem instances: sparse signals, random compression
//! matrices, and the composed triple `(F, x0, y = F x0)`.
//!
//! Reproducibility contract: every sampler is a pure function of an
//! explicit 64-bit seed. Randomness comes from the ChaCha8 stream cipher
//! (`rand_chacha::ChaCha8Rng`), which exposes 2^64 independent streams;
//! matrix and signal draws of one instance use separate streams of the
//! instance seed. Seeds for individual trials are derived from a master
//! seed with the splitmix64 finalizer (see [`derive_seed`]), so any trial
//! can be regenerated in isolation.

use crate::linalg::{householder_qr_thin, Matrix};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use std::io::{BufRead, Write};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum EnsembleError {
    #[error("density must lie in (0, 1], got {0}")]
    InvalidDensity(f64),
    #[error("row count {p} exceeds dimension {n}")]
    TooManyRows { p: usize, n: usize },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Distribution of the non-zero signal entries. Both laws have unit second
/// moment, which fixes the signal power scale.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NonzeroLaw {
    StandardGaussian,
    PlusMinusOne,
}

/// How the sparse support is drawn: independently per entry, or as a
/// uniformly random support of exactly `round(rho * n)` indices.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SupportMode {
    Bernoulli,
    FixedCount,
}

/// Prior of the sparse signal: each entry is zero with probability
/// `1 - rho`, otherwise drawn from `nonzero_law`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SignalPrior {
    pub rho: f64,
    pub nonzero_law: NonzeroLaw,
    pub support_mode: SupportMode,
}

impl SignalPrior {
    pub fn new(
        rho: f64,
        nonzero_law: NonzeroLaw,
        support_mode: SupportMode,
    ) -> Result<Self, EnsembleError> {
        if !(rho > 0.0 && rho <= 1.0) {
            return Err(EnsembleError::InvalidDensity(rho));
        }
        Ok(SignalPrior { rho, nonzero_law, support_mode })
    }

    /// Gaussian non-zeros on a Bernoulli support; the default choice.
    pub fn gaussian(rho: f64) -> Result<Self, EnsembleError> {
        SignalPrior::new(rho, NonzeroLaw::StandardGaussian, SupportMode::Bernoulli)
    }
}

/// The two compression-matrix ensembles.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MatrixEnsemble {
    /// i.i.d. Gaussian entries with mean zero and variance `1/N`.
    IidGaussian,
    /// First `P` rows of a Haar-uniform `N x N` orthogonal matrix.
    RowOrthogonal,
}

impl std::fmt::Display for MatrixEnsemble {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            MatrixEnsemble::IidGaussian => write!(f, "iid_gaussian"),
            MatrixEnsemble::RowOrthogonal => write!(f, "row_orthogonal"),
        }
    }
}

/// One sampled reconstruction problem. `y` is stored as computed, not
/// recomputed on access.
#[derive(Debug, Clone, PartialEq)]
pub struct ProblemInstance {
    pub f: Matrix,
    pub x0: Vec<f64>,
    pub y: Vec<f64>,
    pub seed: u64,
    pub ensemble: MatrixEnsemble,
    pub prior: SignalPrior,
}

const STREAM_MATRIX: u64 = 0;
const STREAM_SIGNAL: u64 = 1;

fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derive a child seed from a master seed and a list of integer labels by
/// chaining the splitmix64 finalizer. Pure and stable across platforms.
pub fn derive_seed(master: u64, labels: &[u64]) -> u64 {
    let mut state = mix64(master);
    for &label in labels {
        state = mix64(state ^ mix64(label));
    }
    state
}

fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn draw_nonzero(law: NonzeroLaw, rng: &mut ChaCha8Rng) -> f64 {
    match law {
        NonzeroLaw::StandardGaussian => rng.sample(StandardNormal),
        NonzeroLaw::PlusMinusOne => {
            if rng.random::<bool>() {
                1.0
            } else {
                -1.0
            }
        }
    }
}

/// Sample a length-`n` sparse signal from the prior.
pub fn sample_signal(
    n: usize,
    prior: &SignalPrior,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<f64>, EnsembleError> {
    if !(prior.rho > 0.0 && prior.rho <= 1.0) {
        return Err(EnsembleError::InvalidDensity(prior.rho));
    }
    assert!(n >= 1);
    let mut x = vec![0.0f64; n];
    match prior.support_mode {
        SupportMode::Bernoulli => {
            for xi in x.iter_mut() {
                if rng.random::<f64>() < prior.rho {
                    *xi = draw_nonzero(prior.nonzero_law, rng);
                }
            }
        }
        SupportMode::FixedCount => {
            let k = ((prior.rho * n as f64).round() as usize).min(n);
            // Partial Fisher-Yates for a uniform k-subset.
            let mut indices: Vec<usize> = (0..n).collect();
            for i in 0..k {
                let j = i + rng.random_range(0..(n - i));
                indices.swap(i, j);
            }
            for &idx in &indices[..k] {
                x[idx] = draw_nonzero(prior.nonzero_law, rng);
            }
        }
    }
    Ok(x)
}

/// Sample a `p_rows x n` compression matrix from the ensemble.
pub fn sample_matrix(
    ensemble: MatrixEnsemble,
    p_rows: usize,
    n: usize,
    rng: &mut ChaCha8Rng,
) -> Result<Matrix, EnsembleError> {
    assert!(p_rows >= 1 && n >= 1);
    if p_rows > n {
        return Err(EnsembleError::TooManyRows { p: p_rows, n });
    }
    match ensemble {
        MatrixEnsemble::IidGaussian => {
            // Variance 1/n keeps ||y|| on the scale of ||x0||.
            let scale = (n as f64).sqrt().recip();
            let mut f = Matrix::zeros(p_rows, n);
            for i in 0..p_rows {
                for v in f.row_mut(i) {
                    *v = scale * rng.sample::<f64, _>(StandardNormal);
                }
            }
            Ok(f)
        }
        MatrixEnsemble::RowOrthogonal => {
            // Orthonormalize the columns of an n x p Gaussian matrix; with
            // the sign correction in the QR this is a Haar draw, and its
            // transpose has orthonormal rows.
            let mut g = Matrix::zeros(n, p_rows);
            for i in 0..n {
                for v in g.row_mut(i) {
                    *v = rng.sample::<f64, _>(StandardNormal);
                }
            }
            let (q, _) = householder_qr_thin(&g);
            Ok(q.transpose())
        }
    }
}

/// Build a full problem instance deterministically from its seed.
///
/// The matrix and the signal are drawn from separate ChaCha8 streams of the
/// same seed, so each can be regenerated independently.
pub fn make_instance(
    ensemble: MatrixEnsemble,
    n: usize,
    p_rows: usize,
    prior: &SignalPrior,
    seed: u64,
) -> Result<ProblemInstance, EnsembleError> {
    let mut matrix_rng = stream_rng(seed, STREAM_MATRIX);
    let f = sample_matrix(ensemble, p_rows, n, &mut matrix_rng)?;
    let mut signal_rng = stream_rng(seed, STREAM_SIGNAL);
    let x0 = sample_signal(n, prior, &mut signal_rng)?;
    let y = f.matvec(&x0);
    Ok(ProblemInstance { f, x0, y, seed, ensemble, prior: *prior })
}

fn law_name(law: NonzeroLaw) -> &'static str {
    match law {
        NonzeroLaw::StandardGaussian => "standard_gaussian",
        NonzeroLaw::PlusMinusOne => "plus_minus_one",
    }
}

fn support_name(mode: SupportMode) -> &'static str {
    match mode {
        SupportMode::Bernoulli => "bernoulli",
        SupportMode::FixedCount => "fixed_count",
    }
}

impl ProblemInstance {
    /// Write the instance in the columnar text format: a key-value header
    /// (dimensions, ensemble, prior, seed) followed by the matrix rows,
    /// the signal and the measurement vector.
    pub fn write_text(&self, w: &mut impl Write) -> std::io::Result<()> {
        let p = self.f.rows();
        let n = self.f.cols();
        writeln!(w, "phaselab-instance v1")?;
        writeln!(w, "n {n}")?;
        writeln!(w, "p {p}")?;
        writeln!(w, "ensemble {}", self.ensemble)?;
        writeln!(w, "prior_rho {}", self.prior.rho)?;
        writeln!(w, "prior_law {}", law_name(self.prior.nonzero_law))?;
        writeln!(w, "prior_support {}", support_name(self.prior.support_mode))?;
        writeln!(w, "seed {}", self.seed)?;
        writeln!(w, "F")?;
        for i in 0..p {
            let row: Vec<String> = self.f.row(i).iter().map(|v| format!("{v}")).collect();
            writeln!(w, "{}", row.join(" "))?;
        }
        writeln!(w, "x0")?;
        let x0: Vec<String> = self.x0.iter().map(|v| format!("{v}")).collect();
        writeln!(w, "{}", x0.join(" "))?;
        writeln!(w, "y")?;
        let y: Vec<String> = self.y.iter().map(|v| format!("{v}")).collect();
        writeln!(w, "{}", y.join(" "))?;
        Ok(())
    }

    /// Parse an instance from the text format written by [`Self::write_text`].
    pub fn read_text(r: &mut impl BufRead) -> Result<ProblemInstance, EnsembleError> {
        let mut lines = Vec::new();
        for line in r.lines() {
            lines.push(line?);
        }
        let mut reader = LineCursor { lines: &lines, cursor: 0 };

        let magic = reader.next("header")?;
        if magic != "phaselab-instance v1" {
            return Err(EnsembleError::Parse {
                line: 1,
                message: format!("unknown header {magic:?}"),
            });
        }

        let (ln, v) = reader.field("n")?;
        let n = parse_usize(ln, &v)?;
        let (ln, v) = reader.field("p")?;
        let p = parse_usize(ln, &v)?;
        let (ln, v) = reader.field("ensemble")?;
        let ensemble = match v.as_str() {
            "iid_gaussian" => MatrixEnsemble::IidGaussian,
            "row_orthogonal" => MatrixEnsemble::RowOrthogonal,
            other => {
                return Err(EnsembleError::Parse {
                    line: ln,
                    message: format!("unknown ensemble {other:?}"),
                })
            }
        };
        let (ln, v) = reader.field("prior_rho")?;
        let rho = parse_f64(ln, &v)?;
        let (ln, v) = reader.field("prior_law")?;
        let law = match v.as_str() {
            "standard_gaussian" => NonzeroLaw::StandardGaussian,
            "plus_minus_one" => NonzeroLaw::PlusMinusOne,
            other => {
                return Err(EnsembleError::Parse {
                    line: ln,
                    message: format!("unknown law {other:?}"),
                })
            }
        };
        let (ln, v) = reader.field("prior_support")?;
        let support = match v.as_str() {
            "bernoulli" => SupportMode::Bernoulli,
            "fixed_count" => SupportMode::FixedCount,
            other => {
                return Err(EnsembleError::Parse {
                    line: ln,
                    message: format!("unknown support mode {other:?}"),
                })
            }
        };
        let (ln, v) = reader.field("seed")?;
        let seed = v.parse::<u64>().map_err(|e| EnsembleError::Parse {
            line: ln,
            message: format!("bad seed {v:?}: {e}"),
        })?;

        reader.expect_section("F")?;
        let mut rows = Vec::with_capacity(p);
        for _ in 0..p {
            let line_no = reader.cursor + 1;
            let line = reader.next("matrix row")?;
            rows.push(parse_row(line_no, &line, n)?);
        }
        reader.expect_section("x0")?;
        let line_no = reader.cursor + 1;
        let line = reader.next("x0 values")?;
        let x0 = parse_row(line_no, &line, n)?;
        reader.expect_section("y")?;
        let line_no = reader.cursor + 1;
        let line = reader.next("y values")?;
        let y = parse_row(line_no, &line, p)?;

        let prior = SignalPrior::new(rho, law, support)?;
        Ok(ProblemInstance {
            f: Matrix::from_rows(rows),
            x0,
            y,
            seed,
            ensemble,
            prior,
        })
    }
}

struct LineCursor<'a> {
    lines: &'a [String],
    cursor: usize,
}

impl LineCursor<'_> {
    fn next(&mut self, expect: &str) -> Result<String, EnsembleError> {
        let line = self.lines.get(self.cursor).ok_or(EnsembleError::Parse {
            line: self.cursor + 1,
            message: format!("unexpected end of file, expected {expect}"),
        })?;
        self.cursor += 1;
        Ok(line.clone())
    }

    fn field(&mut self, key: &str) -> Result<(usize, String), EnsembleError> {
        let line_no = self.cursor + 1;
        let line = self.next(key)?;
        line.strip_prefix(&format!("{key} "))
            .map(|v| (line_no, v.to_string()))
            .ok_or(EnsembleError::Parse {
                line: line_no,
                message: format!("expected key {key:?}, got {line:?}"),
            })
    }

    fn expect_section(&mut self, name: &str) -> Result<(), EnsembleError> {
        let line_no = self.cursor + 1;
        let line = self.next(name)?;
        if line != name {
            return Err(EnsembleError::Parse {
                line: line_no,
                message: format!("expected section {name:?}, got {line:?}"),
            });
        }
        Ok(())
    }
}

fn parse_f64(line_no: usize, s: &str) -> Result<f64, EnsembleError> {
    s.parse::<f64>().map_err(|e| EnsembleError::Parse {
        line: line_no,
        message: format!("bad float {s:?}: {e}"),
    })
}

fn parse_usize(line_no: usize, s: &str) -> Result<usize, EnsembleError> {
    s.parse::<usize>().map_err(|e| EnsembleError::Parse {
        line: line_no,
        message: format!("bad integer {s:?}: {e}"),
    })
}

fn parse_row(line_no: usize, line: &str, want: usize) -> Result<Vec<f64>, EnsembleError> {
    let vals: Result<Vec<f64>, _> = line
        .split_whitespace()
        .map(|s| parse_f64(line_no, s))
        .collect();
    let vals = vals?;
    if vals.len() != want {
        return Err(EnsembleError::Parse {
            line: line_no,
            message: format!("expected {want} values, got {}", vals.len()),
        });
    }
    Ok(vals)
}
