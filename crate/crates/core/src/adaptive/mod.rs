//! Adaptive selection of face constraints from pair eigenproblems.

pub mod extract;
pub mod lobpcg;
pub mod pair;

use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::constraints::append_glob_rows;
use crate::linalg::{LinalgError, DEFAULT_PINV_DROP_TOL, DEFAULT_QR_RANK_TOL};
use crate::precond::{BddcLevel, PrecondError};
use lobpcg::{dense_pencil, lobpcg, LobpcgOptions, LobpcgResult, Pencil};
use pair::PairProblem;

#[derive(Debug, Error)]
pub enum AdaptiveError {
    #[error("eigensolver subspace degenerated twice")]
    Breakdown,
    #[error("pair ({s}, {t}): null space of B is not in the null space of A (zᵀA z = {value:e}); initial constraints do not prevent relative rigid body motions")]
    RigidModeLeak { s: usize, t: usize, value: f64 },
    #[error("pair ({s}, {t}): {source}")]
    Pair { s: usize, t: usize, source: Box<AdaptiveError> },
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error(transparent)]
    Precond(#[from] PrecondError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdaptiveConfig {
    /// Target for each level's indicator.
    pub tau: f64,
    pub max_vectors: usize,
    pub max_iters: usize,
    pub tol: f64,
    pub pinv_tol: f64,
    pub qr_tol: f64,
    /// Drop the entries of adaptive rows on dofs shared with other
    /// substructures. When off, each row spans the whole common interface of
    /// its pair.
    pub edge_zeroing: bool,
    /// Re-solve each modified pair with its stored constraints to measure the
    /// indicator actually achieved.
    pub recheck: bool,
    pub seed: u64,
}

impl Default for AdaptiveConfig {
    fn default() -> Self {
        Self {
            tau: 2.0,
            max_vectors: 10,
            max_iters: 15,
            tol: 1e-5,
            pinv_tol: DEFAULT_PINV_DROP_TOL,
            qr_tol: DEFAULT_QR_RANK_TOL,
            edge_zeroing: true,
            recheck: false,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairReport {
    pub s: usize,
    pub t: usize,
    pub omega: f64,
    pub eigenvalues: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    /// Every computed eigenvalue exceeded τ.
    pub capped: bool,
    pub added: usize,
    /// Largest relative `|c^s + c^t|` on the shared dofs before edge zeroing.
    pub asymmetry: f64,
    /// Pair maximum eigenvalue with the stored constraints added.
    pub recheck: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelAdaptReport {
    pub level: usize,
    pub pairs: Vec<PairReport>,
    /// `ω̃_i = max ω^{st}`.
    pub omega: f64,
    pub added: usize,
}

impl LevelAdaptReport {
    /// Per-pair audit: `pair,s,t,omega,iterations,added,converged,recheck`.
    pub fn pair_csv(&self) -> String {
        let mut out = String::from("pair,s,t,omega,iterations,added,converged,recheck\n");
        for (i, p) in self.pairs.iter().enumerate() {
            let re = p.recheck.map(|v| format!("{v:.6e}")).unwrap_or_default();
            writeln!(out, "{},{},{},{:.6e},{},{},{},{}", i, p.s, p.t, p.omega, p.iterations, p.added, p.converged, re).unwrap();
        }
        out
    }

    /// Pairs whose indicator (rechecked when available) exceeds `tau`:
    /// possible after edge zeroing or when the vector budget ran out.
    pub fn above(&self, tau: f64) -> Vec<(usize, usize)> {
        self.pairs.iter().filter(|p| p.recheck.unwrap_or(p.omega) > tau).map(|p| (p.s, p.t)).collect()
    }
}

/// `ω̃ = Π ω̃_i`.
pub fn condition_indicator(per_level: &[f64]) -> f64 {
    per_level.iter().product()
}

/// Dimension of the eigensolver space, below which the pencil is solved
/// densely.
const DENSE_LIMIT: usize = 64;

/// Largest eigenpairs of a pair pencil: LOBPCG with the pair preconditioner,
/// or a dense solve for small pairs.
pub fn solve_pair(pair: &PairProblem, cfg: &AdaptiveConfig, seed: u64) -> Result<LobpcgResult, AdaptiveError> {
    let a = |x: &[f64]| pair.a_apply(x);
    let b = |x: &[f64]| pair.b_apply(x);
    let m = |x: &[f64]| pair.m_apply(x);
    let q = |x: &[f64]| pair.constrain(x);
    let pencil = Pencil { n: pair.n(), a: &a, b: &b, precond: Some(&m), project: Some(&q) };

    // the null space of B must carry no energy of A
    let scale = pair.stiffness_scale();
    for j in 0..pair.null.ncols() {
        let z: Vec<f64> = pair.null.column(j).iter().copied().collect();
        let az = crate::linalg::dot(&z, &pair.a_apply(&z));
        if az > 1e2 * pair::NULL_TOL * scale {
            return Err(AdaptiveError::RigidModeLeak { s: pair.s, t: pair.t, value: az });
        }
    }

    let n_eff = pair.n().saturating_sub(pair.d.nrows() + pair.null.ncols());
    if n_eff <= DENSE_LIMIT.max(4 * cfg.max_vectors) {
        let u = pair.dense_space();
        return dense_pencil(&pencil, &u, cfg.max_vectors);
    }
    lobpcg(&pencil, LobpcgOptions { block: cfg.max_vectors, max_iters: cfg.max_iters, tol: cfg.tol, seed })
}

/// Pair result before merging.
struct PairOutcome {
    report: PairReport,
    rows: Vec<(usize, Vec<usize>, nalgebra::DMatrix<f64>)>,
}

fn process_pair(level: &BddcLevel, idx: usize, cfg: &AdaptiveConfig) -> Result<PairOutcome, AdaptiveError> {
    let p = &level.interface.pairs[idx];
    let pair = PairProblem::build(level, p.s, p.t, cfg.pinv_tol)?;
    let seed = cfg.seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(idx as u64 + 1);
    let res = solve_pair(&pair, cfg, seed)?;
    let (k, omega, capped) = extract::select_count(&res.values, cfg.tau);
    let rows = extract::constraint_rows(&pair, &res.vectors, k);
    let asymmetry = extract::antisymmetry(&pair, &rows);
    let recheck = if cfg.recheck && k > 0 {
        let stored = if cfg.edge_zeroing { extract::edge_zeroed(&pair, &rows) } else { rows.clone() };
        let mut p2 = PairProblem::build(level, p.s, p.t, cfg.pinv_tol)?;
        p2.add_jump_rows(&stored, cfg.pinv_tol)?;
        let r2 = solve_pair(&p2, &AdaptiveConfig { max_vectors: 1, ..*cfg }, seed)?;
        Some(r2.values.first().copied().unwrap_or(0.0))
    } else {
        None
    };
    let rows = if k == 0 {
        Vec::new()
    } else if cfg.edge_zeroing {
        extract::face_rows(&pair, &rows)
    } else {
        vec![extract::closure_rows(&pair, &rows, p.faces[0])]
    };
    Ok(PairOutcome {
        report: PairReport {
            s: p.s,
            t: p.t,
            omega,
            eigenvalues: res.values,
            iterations: res.iterations,
            converged: res.converged,
            capped,
            added: 0,
            asymmetry,
            recheck,
        },
        rows,
    })
}

/// Solves every pair eigenproblem of the level, appends the selected face
/// constraints (in pair order) and rebuilds the constrained problems.
pub fn adapt_level(level: &mut BddcLevel, cfg: &AdaptiveConfig) -> Result<LevelAdaptReport, AdaptiveError> {
    let n_pairs = level.interface.pairs.len();
    let outcomes: Vec<Result<PairOutcome, AdaptiveError>> =
        (0..n_pairs).into_par_iter().map(|i| process_pair(level, i, cfg)).collect();
    let mut reports = Vec::with_capacity(n_pairs);
    let mut added_total = 0;
    for (i, o) in outcomes.into_iter().enumerate() {
        let p = &level.interface.pairs[i];
        let mut o = o.map_err(|e| AdaptiveError::Pair { s: p.s, t: p.t, source: Box::new(e) })?;
        for (g, dofs, rows) in &o.rows {
            o.report.added += append_glob_rows(&mut level.coarse, &level.interface, *g, dofs, rows, cfg.qr_tol);
        }
        added_total += o.report.added;
        reports.push(o.report);
    }
    if added_total > 0 {
        level.rebuild_constrained()?;
    }
    let omega = reports.iter().map(|r| r.omega).fold(0.0, f64::max);
    Ok(LevelAdaptReport { level: level.index, pairs: reports, omega, added: added_total })
}
