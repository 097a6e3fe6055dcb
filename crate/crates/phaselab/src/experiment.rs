//! Monte Carlo estimation of the empirical reconstruction transition.
//!
//! A sweep fixes the signal density and, for each system size `N`, runs
//! seeded reconstruction trials over a window of measurement counts `P`
//! around the predicted transition. The empirical critical compression
//! rate `alpha_c(rho, N)` is the 50% crossing of the success probability,
//! linearly interpolated between adjacent `P`; the infinite-size limit is
//! a quadratic extrapolation in `1/N`.
//!
//! Every trial's seed is a pure function of `(master_seed, n, p_rows,
//! trial_index)`, so results are independent of worker count and
//! scheduling, sweeps are resumable, and any single trial can be replayed
//! in isolation.

use crate::ensembles::{
    derive_seed, make_instance, EnsembleError, MatrixEnsemble, NonzeroLaw, SignalPrior,
    SupportMode,
};
use crate::lp::{basis_pursuit, reconstruction_success, LpError, LpOptions, SolverStatus};
use crate::numerics::{fit_polynomial, NumericsError};
use crate::replica::{critical_alpha, PNorm, ReplicaError};
use rayon::prelude::*;
use std::collections::{BTreeMap, BTreeSet};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("invalid sweep config: {0}")]
    InvalidConfig(String),
    #[error("no pair of row counts brackets the 50% crossing at n = {n}")]
    NoBracket { n: usize },
    #[error("need at least {need} distinct sizes for extrapolation, got {got}")]
    TooFewSizes { need: usize, got: usize },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Ensemble(#[from] EnsembleError),
    #[error(transparent)]
    Numerics(#[from] NumericsError),
    #[error(transparent)]
    Replica(#[from] ReplicaError),
    #[error(transparent)]
    Lp(#[from] LpError),
}

/// Compression-rate window that the default `P` grid spans around the
/// theoretical transition. The window reaches further below than above:
/// at desk-scale sizes the finite-size transition is wide (its width
/// shrinks like `1/sqrt(N)`), and the 50% crossing sits above the
/// infinite-size threshold, so a symmetric window can fail to put the
/// smallest tested `P` below the crossing.
pub const ALPHA_WINDOW_BELOW: f64 = 0.25;
pub const ALPHA_WINDOW_ABOVE: f64 = 0.15;

/// Full description of a sweep; a deterministic function of this value
/// produces the complete trial set.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepConfig {
    pub rho: f64,
    pub n_values: Vec<usize>,
    /// Row counts tested per entry of `n_values`.
    pub p_lists: Vec<Vec<usize>>,
    pub trials_per_point: usize,
    pub ensemble: MatrixEnsemble,
    pub prior: SignalPrior,
    pub master_seed: u64,
    pub success_tol: f64,
}

impl SweepConfig {
    /// Build a config whose `P` grid covers all integer row counts in the
    /// window `[alpha_c - below, min(1, alpha_c + above)] * N` around the
    /// theoretical L1 transition, with the upper edge rounded outward so
    /// the sweep always brackets the crossing.
    pub fn around_l1_transition(
        rho: f64,
        n_values: Vec<usize>,
        trials_per_point: usize,
        ensemble: MatrixEnsemble,
        prior: SignalPrior,
        master_seed: u64,
    ) -> Result<Self, ExperimentError> {
        if trials_per_point < 100 {
            return Err(ExperimentError::InvalidConfig(format!(
                "crossing estimation needs at least 100 trials per point, got {trials_per_point}"
            )));
        }
        let alpha_c = critical_alpha(PNorm::L1, rho)?;
        let lo = (alpha_c - ALPHA_WINDOW_BELOW).max(0.0);
        let hi = (alpha_c + ALPHA_WINDOW_ABOVE).min(1.0);
        let p_lists = n_values
            .iter()
            .map(|&n| {
                let p_lo = ((lo * n as f64).ceil() as usize).max(1);
                let p_hi = ((hi * n as f64).ceil() as usize).min(n);
                (p_lo..=p_hi).collect()
            })
            .collect();
        let config = SweepConfig {
            rho,
            n_values,
            p_lists,
            trials_per_point,
            ensemble,
            prior,
            master_seed,
            success_tol: crate::lp::DEFAULT_SUCCESS_TOL,
        };
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<(), ExperimentError> {
        if !(self.rho > 0.0 && self.rho < 1.0) {
            return Err(ExperimentError::InvalidConfig(format!(
                "rho must lie in (0,1), got {}",
                self.rho
            )));
        }
        if self.n_values.is_empty() || self.n_values.len() != self.p_lists.len() {
            return Err(ExperimentError::InvalidConfig(
                "n_values and p_lists must be non-empty and aligned".into(),
            ));
        }
        for (&n, ps) in self.n_values.iter().zip(&self.p_lists) {
            if ps.is_empty() {
                return Err(ExperimentError::InvalidConfig(format!("empty P list for n = {n}")));
            }
            if ps.iter().any(|&p| p == 0 || p > n) {
                return Err(ExperimentError::InvalidConfig(format!(
                    "P values for n = {n} must lie in [1, {n}]"
                )));
            }
        }
        if self.trials_per_point == 0 {
            return Err(ExperimentError::InvalidConfig("trials_per_point must be positive".into()));
        }
        if !(self.success_tol > 0.0) {
            return Err(ExperimentError::InvalidConfig("success_tol must be positive".into()));
        }
        if (self.prior.rho - self.rho).abs() > 1e-12 {
            return Err(ExperimentError::InvalidConfig(
                "prior density must match the sweep density".into(),
            ));
        }
        Ok(())
    }

    /// Flat key-value rendering (one `key value` pair per line).
    pub fn to_kv(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("rho {}\n", self.rho));
        let ns: Vec<String> = self.n_values.iter().map(|n| n.to_string()).collect();
        out.push_str(&format!("n_list {}\n", ns.join(",")));
        for (&n, ps) in self.n_values.iter().zip(&self.p_lists) {
            let ps: Vec<String> = ps.iter().map(|p| p.to_string()).collect();
            out.push_str(&format!("p_list.{n} {}\n", ps.join(",")));
        }
        out.push_str(&format!("trials {}\n", self.trials_per_point));
        out.push_str(&format!("ensemble {}\n", self.ensemble));
        let law = match self.prior.nonzero_law {
            NonzeroLaw::StandardGaussian => "standard_gaussian",
            NonzeroLaw::PlusMinusOne => "plus_minus_one",
        };
        out.push_str(&format!("prior_law {law}\n"));
        let support = match self.prior.support_mode {
            SupportMode::Bernoulli => "bernoulli",
            SupportMode::FixedCount => "fixed_count",
        };
        out.push_str(&format!("support {support}\n"));
        out.push_str(&format!("seed {}\n", self.master_seed));
        out.push_str(&format!("success_tol {}\n", self.success_tol));
        out
    }

    /// Parse the key-value rendering produced by [`Self::to_kv`].
    pub fn from_kv(text: &str) -> Result<Self, ExperimentError> {
        let mut map = BTreeMap::new();
        for (idx, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once(' ').ok_or(ExperimentError::Parse {
                line: idx + 1,
                message: format!("expected 'key value', got {line:?}"),
            })?;
            map.insert(key.to_string(), (idx + 1, value.trim().to_string()));
        }
        let take = |key: &str| -> Result<(usize, String), ExperimentError> {
            map.get(key).cloned().ok_or(ExperimentError::Parse {
                line: 0,
                message: format!("missing key {key:?}"),
            })
        };

        let (ln, v) = take("rho")?;
        let rho: f64 = v.parse().map_err(|e| ExperimentError::Parse {
            line: ln,
            message: format!("bad rho: {e}"),
        })?;
        let (ln, v) = take("n_list")?;
        let n_values: Vec<usize> = v
            .split(',')
            .map(|s| {
                s.trim().parse().map_err(|e| ExperimentError::Parse {
                    line: ln,
                    message: format!("bad n {s:?}: {e}"),
                })
            })
            .collect::<Result<_, _>>()?;
        let mut p_lists = Vec::with_capacity(n_values.len());
        for &n in &n_values {
            let (ln, v) = take(&format!("p_list.{n}"))?;
            let ps: Vec<usize> = v
                .split(',')
                .map(|s| {
                    s.trim().parse().map_err(|e| ExperimentError::Parse {
                        line: ln,
                        message: format!("bad p {s:?}: {e}"),
                    })
                })
                .collect::<Result<_, _>>()?;
            p_lists.push(ps);
        }
        let (ln, v) = take("trials")?;
        let trials_per_point: usize = v.parse().map_err(|e| ExperimentError::Parse {
            line: ln,
            message: format!("bad trials: {e}"),
        })?;
        let (ln, v) = take("ensemble")?;
        let ensemble = match v.as_str() {
            "iid_gaussian" => MatrixEnsemble::IidGaussian,
            "row_orthogonal" => MatrixEnsemble::RowOrthogonal,
            other => {
                return Err(ExperimentError::Parse {
                    line: ln,
                    message: format!("unknown ensemble {other:?}"),
                })
            }
        };
        let (ln, v) = take("prior_law")?;
        let law = match v.as_str() {
            "standard_gaussian" => NonzeroLaw::StandardGaussian,
            "plus_minus_one" => NonzeroLaw::PlusMinusOne,
            other => {
                return Err(ExperimentError::Parse {
                    line: ln,
                    message: format!("unknown prior law {other:?}"),
                })
            }
        };
        let (ln, v) = take("support")?;
        let support = match v.as_str() {
            "bernoulli" => SupportMode::Bernoulli,
            "fixed_count" => SupportMode::FixedCount,
            other => {
                return Err(ExperimentError::Parse {
                    line: ln,
                    message: format!("unknown support mode {other:?}"),
                })
            }
        };
        let (ln, v) = take("seed")?;
        let master_seed: u64 = v.parse().map_err(|e| ExperimentError::Parse {
            line: ln,
            message: format!("bad seed: {e}"),
        })?;
        let (ln, v) = take("success_tol")?;
        let success_tol: f64 = v.parse().map_err(|e| ExperimentError::Parse {
            line: ln,
            message: format!("bad success_tol: {e}"),
        })?;

        let prior = SignalPrior::new(rho, law, support)?;
        let config = SweepConfig {
            rho,
            n_values,
            p_lists,
            trials_per_point,
            ensemble,
            prior,
            master_seed,
            success_tol,
        };
        config.validate()?;
        Ok(config)
    }
}

/// Outcome of a single reconstruction trial.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialRecord {
    pub n: usize,
    pub p_rows: usize,
    pub trial_index: usize,
    pub seed: u64,
    pub success: bool,
    pub objective: f64,
    pub residual: f64,
    pub solver_status: SolverStatus,
}

impl TrialRecord {
    pub fn key(&self) -> (usize, usize, usize) {
        (self.n, self.p_rows, self.trial_index)
    }
}

/// Success counts behind one point of the crossing estimate.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SuccessCount {
    pub p_rows: usize,
    pub successes: usize,
    pub trials: usize,
}

/// Empirical critical compression rate at one system size, with the
/// interpolation table it came from.
#[derive(Debug, Clone)]
pub struct CriticalPointEstimate {
    pub rho: f64,
    pub n: usize,
    pub alpha_c_n: f64,
    /// Binomial noise of the bracketing points propagated through the
    /// linear interpolation.
    pub stderr: f64,
    pub points: Vec<SuccessCount>,
}

fn run_one_trial(config: &SweepConfig, n: usize, p_rows: usize, trial_index: usize) -> TrialRecord {
    let seed = derive_seed(config.master_seed, &[n as u64, p_rows as u64, trial_index as u64]);
    let trial = (|| -> Result<(bool, f64, f64, SolverStatus), ExperimentError> {
        let inst = make_instance(config.ensemble, n, p_rows, &config.prior, seed)?;
        let sol = basis_pursuit(&inst.f, &inst.y, &LpOptions::default())?;
        let success = sol.status == SolverStatus::Optimal
            && reconstruction_success(&sol.x_hat, &inst.x0, config.success_tol);
        Ok((success, sol.objective, sol.residual, sol.status))
    })();
    match trial {
        Ok((success, objective, residual, solver_status)) => TrialRecord {
            n,
            p_rows,
            trial_index,
            seed,
            success,
            objective,
            residual,
            solver_status,
        },
        // Per-trial failures are recorded, never abort the sweep.
        Err(_) => TrialRecord {
            n,
            p_rows,
            trial_index,
            seed,
            success: false,
            objective: f64::NAN,
            residual: f64::NAN,
            solver_status: SolverStatus::Degenerate,
        },
    }
}

fn all_keys(config: &SweepConfig) -> Vec<(usize, usize, usize)> {
    let mut keys = Vec::new();
    for (&n, ps) in config.n_values.iter().zip(&config.p_lists) {
        for &p in ps {
            for t in 0..config.trials_per_point {
                keys.push((n, p, t));
            }
        }
    }
    keys
}

/// Run every trial of the sweep on the current rayon pool.
///
/// The record list is a deterministic function of the config: trials are
/// keyed by `(n, p_rows, trial_index)` and seeded independently, so worker
/// count and scheduling cannot change the result.
pub fn run_trials(config: &SweepConfig) -> Result<Vec<TrialRecord>, ExperimentError> {
    config.validate()?;
    let keys = all_keys(config);
    Ok(keys
        .into_par_iter()
        .map(|(n, p, t)| run_one_trial(config, n, p, t))
        .collect())
}

/// [`run_trials`] with resume support: records already present in the
/// trials file are kept, only missing keys are computed, and the merged,
/// canonically ordered file is rewritten atomically.
pub fn run_trials_resumable(
    config: &SweepConfig,
    trials_path: &Path,
) -> Result<Vec<TrialRecord>, ExperimentError> {
    config.validate()?;
    let existing: BTreeMap<(usize, usize, usize), TrialRecord> = if trials_path.exists() {
        let file = std::fs::File::open(trials_path)?;
        read_trials_csv(&mut BufReader::new(file))?
            .into_iter()
            .map(|r| (r.key(), r))
            .collect()
    } else {
        BTreeMap::new()
    };

    let keys = all_keys(config);
    let records: Vec<TrialRecord> = keys
        .into_par_iter()
        .map(|(n, p, t)| match existing.get(&(n, p, t)) {
            Some(r) => r.clone(),
            None => run_one_trial(config, n, p, t),
        })
        .collect();

    // Stale records the config no longer asks for are dropped; the merge
    // is persisted atomically so interruption cannot corrupt progress.
    let tmp = trials_path.with_extension("csv.tmp");
    {
        let file = std::fs::File::create(&tmp)?;
        let mut w = BufWriter::new(file);
        write_trials_csv(&mut w, &records)?;
        w.flush()?;
    }
    std::fs::rename(&tmp, trials_path)?;
    Ok(records)
}

pub const TRIALS_CSV_HEADER: &str = "n,p_rows,trial_index,seed,success,objective,residual,status";
pub const ESTIMATES_CSV_HEADER: &str = "rho,n,alpha_c_n,stderr,trials_total";

pub fn write_trials_csv(w: &mut impl Write, records: &[TrialRecord]) -> std::io::Result<()> {
    writeln!(w, "{TRIALS_CSV_HEADER}")?;
    for r in records {
        writeln!(
            w,
            "{},{},{},{},{},{},{},{}",
            r.n,
            r.p_rows,
            r.trial_index,
            r.seed,
            u8::from(r.success),
            r.objective,
            r.residual,
            r.solver_status
        )?;
    }
    Ok(())
}

/// Parse a trials CSV. A malformed final line (an interrupted append) is
/// dropped; malformed interior lines are errors.
pub fn read_trials_csv(r: &mut impl BufRead) -> Result<Vec<TrialRecord>, ExperimentError> {
    let mut lines = Vec::new();
    for line in r.lines() {
        lines.push(line?);
    }
    while lines.last().is_some_and(|l| l.trim().is_empty()) {
        lines.pop();
    }
    if lines.is_empty() {
        return Ok(Vec::new());
    }
    if lines[0] != TRIALS_CSV_HEADER {
        return Err(ExperimentError::Parse {
            line: 1,
            message: format!("expected header {TRIALS_CSV_HEADER:?}, got {:?}", lines[0]),
        });
    }
    let mut records = Vec::with_capacity(lines.len() - 1);
    let last = lines.len() - 1;
    for (idx, line) in lines.iter().enumerate().skip(1) {
        match parse_trial_line(idx + 1, line) {
            Ok(record) => records.push(record),
            Err(_) if idx == last => break, // truncated tail from an interrupted run
            Err(e) => return Err(e),
        }
    }
    Ok(records)
}

fn parse_trial_line(line_no: usize, line: &str) -> Result<TrialRecord, ExperimentError> {
    let parts: Vec<&str> = line.split(',').collect();
    if parts.len() != 8 {
        return Err(ExperimentError::Parse {
            line: line_no,
            message: format!("expected 8 fields, got {}", parts.len()),
        });
    }
    let bad = |field: &str, what: &str| ExperimentError::Parse {
        line: line_no,
        message: format!("bad {what} {field:?}"),
    };
    Ok(TrialRecord {
        n: parts[0].parse().map_err(|_| bad(parts[0], "n"))?,
        p_rows: parts[1].parse().map_err(|_| bad(parts[1], "p_rows"))?,
        trial_index: parts[2].parse().map_err(|_| bad(parts[2], "trial_index"))?,
        seed: parts[3].parse().map_err(|_| bad(parts[3], "seed"))?,
        success: match parts[4] {
            "0" => false,
            "1" => true,
            other => return Err(bad(other, "success flag")),
        },
        objective: parts[5].parse().map_err(|_| bad(parts[5], "objective"))?,
        residual: parts[6].parse().map_err(|_| bad(parts[6], "residual"))?,
        solver_status: parts[7].parse().map_err(|_| bad(parts[7], "status"))?,
    })
}

pub fn write_estimates_csv(
    w: &mut impl Write,
    estimates: &[CriticalPointEstimate],
) -> std::io::Result<()> {
    writeln!(w, "{ESTIMATES_CSV_HEADER}")?;
    for e in estimates {
        let trials_total: usize = e.points.iter().map(|p| p.trials).sum();
        writeln!(w, "{},{},{},{},{}", e.rho, e.n, e.alpha_c_n, e.stderr, trials_total)?;
    }
    Ok(())
}

/// Parse an estimates CSV into `(rho, n, alpha_c_n, stderr, trials_total)`
/// tuples (the interpolation tables are not persisted).
pub fn read_estimates_csv(
    r: &mut impl BufRead,
) -> Result<Vec<(f64, usize, f64, f64, usize)>, ExperimentError> {
    let mut rows = Vec::new();
    for (idx, line) in r.lines().enumerate() {
        let line = line?;
        if idx == 0 {
            if line != ESTIMATES_CSV_HEADER {
                return Err(ExperimentError::Parse {
                    line: 1,
                    message: format!("expected header {ESTIMATES_CSV_HEADER:?}, got {line:?}"),
                });
            }
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        let parts: Vec<&str> = line.split(',').collect();
        if parts.len() != 5 {
            return Err(ExperimentError::Parse {
                line: idx + 1,
                message: format!("expected 5 fields, got {}", parts.len()),
            });
        }
        let bad = |what: &str| ExperimentError::Parse {
            line: idx + 1,
            message: format!("bad {what}"),
        };
        rows.push((
            parts[0].parse().map_err(|_| bad("rho"))?,
            parts[1].parse().map_err(|_| bad("n"))?,
            parts[2].parse().map_err(|_| bad("alpha_c_n"))?,
            parts[3].parse().map_err(|_| bad("stderr"))?,
            parts[4].parse().map_err(|_| bad("trials_total"))?,
        ));
    }
    Ok(rows)
}

/// Estimate the empirical critical compression rate at one system size as
/// the 50% crossing of the success probability in `alpha = P/N`.
///
/// The crossing is interpolated linearly between the highest `P` whose
/// success probability is below one half and the next tested `P`; the
/// standard error propagates the binomial noise of those two points.
pub fn estimate_critical_alpha(
    records: &[TrialRecord],
    rho: f64,
    n: usize,
) -> Result<CriticalPointEstimate, ExperimentError> {
    let mut by_p: BTreeMap<usize, (usize, usize)> = BTreeMap::new();
    for r in records.iter().filter(|r| r.n == n) {
        let entry = by_p.entry(r.p_rows).or_insert((0, 0));
        entry.0 += usize::from(r.success);
        entry.1 += 1;
    }
    let points: Vec<SuccessCount> = by_p
        .into_iter()
        .map(|(p_rows, (successes, trials))| SuccessCount { p_rows, successes, trials })
        .collect();
    if points.len() < 2 {
        return Err(ExperimentError::NoBracket { n });
    }
    let prob = |pt: &SuccessCount| -> f64 { pt.successes as f64 / pt.trials as f64 };
    let first = prob(&points[0]);
    let last = prob(&points[points.len() - 1]);
    if !(first < 0.5 && last > 0.5) {
        return Err(ExperimentError::NoBracket { n });
    }
    // Highest P still below one half; the next point is at or above it.
    let k = points
        .iter()
        .rposition(|pt| prob(pt) < 0.5)
        .expect("first point is below 0.5");
    if k + 1 >= points.len() {
        return Err(ExperimentError::NoBracket { n });
    }
    let (lo, hi) = (&points[k], &points[k + 1]);
    let (p1, p2) = (prob(lo), prob(hi));
    let (a1, a2) = (lo.p_rows as f64 / n as f64, hi.p_rows as f64 / n as f64);
    let gap = p2 - p1;
    let alpha_c_n = a1 + (0.5 - p1) * (a2 - a1) / gap;

    // d(alpha)/d(p1) = (0.5 - p2) (a2-a1) / gap^2,
    // d(alpha)/d(p2) = -(0.5 - p1) (a2-a1) / gap^2.
    let se = |pt: &SuccessCount| -> f64 {
        let p = prob(pt);
        (p * (1.0 - p) / pt.trials as f64).sqrt()
    };
    let dal1 = (0.5 - p2) * (a2 - a1) / (gap * gap);
    let dal2 = -(0.5 - p1) * (a2 - a1) / (gap * gap);
    let stderr = ((dal1 * se(lo)).powi(2) + (dal2 * se(hi)).powi(2)).sqrt();

    if !(alpha_c_n > rho && alpha_c_n <= 1.0) {
        return Err(ExperimentError::InvalidConfig(format!(
            "crossing estimate {alpha_c_n} at n = {n} falls outside ({rho}, 1]"
        )));
    }
    Ok(CriticalPointEstimate { rho, n, alpha_c_n, stderr, points })
}

/// Quadratic extrapolation of `alpha_c(rho, N)` to `N -> infinity`:
/// fit `c0 + c1/N + c2/N^2` by least squares and return `c0`.
pub fn extrapolate_to_infinite_n(
    estimates: &[CriticalPointEstimate],
) -> Result<f64, ExperimentError> {
    let distinct: BTreeSet<usize> = estimates.iter().map(|e| e.n).collect();
    if distinct.len() < 4 {
        return Err(ExperimentError::TooFewSizes { need: 4, got: distinct.len() });
    }
    let xs: Vec<f64> = estimates.iter().map(|e| 1.0 / e.n as f64).collect();
    let ys: Vec<f64> = estimates.iter().map(|e| e.alpha_c_n).collect();
    let coeffs = fit_polynomial(&xs, &ys, 2)?;
    Ok(coeffs[0])
}
