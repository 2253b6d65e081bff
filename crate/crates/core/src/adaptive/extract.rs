//! Turning pair eigenvectors into coarse dof rows.

use nalgebra::{DMatrix, DVector};

use super::pair::PairProblem;

/// Number of constraints `k` (smallest with `λ_{k+1} ≤ τ`, capped at the
/// number of computed values), the pair indicator `ω^{st}` and whether the
/// cap was hit. When capped, `ω^{st}` is the last computed value.
pub fn select_count(values: &[f64], tau: f64) -> (usize, f64, bool) {
    match values.iter().position(|&v| v <= tau) {
        Some(k) => (k, values[k].max(0.0), false),
        None => (values.len(), values.last().copied().unwrap_or(0.0), !values.is_empty()),
    }
}

/// Rows `c_ℓ = w_ℓᵀ A` for the first `k` eigenvectors.
pub fn constraint_rows(pair: &PairProblem, vectors: &DMatrix<f64>, k: usize) -> DMatrix<f64> {
    let mut rows = DMatrix::zeros(k, pair.n());
    for l in 0..k {
        let w: Vec<f64> = vectors.column(l).iter().copied().collect();
        rows.set_row(l, &DVector::from_vec(pair.a_apply(&w)).transpose());
    }
    rows
}

/// Largest `|c^s + c^t|` over the shared dofs, relative to the row size.
pub fn antisymmetry(pair: &PairProblem, rows: &DMatrix<f64>) -> f64 {
    let mut worst: f64 = 0.0;
    for i in 0..rows.nrows() {
        let scale = rows.row(i).amax();
        if scale == 0.0 {
            continue;
        }
        for sd in &pair.shared {
            worst = worst.max((rows[(i, sd.ps)] + rows[(i, pair.n_s + sd.pt)]).abs() / scale);
        }
    }
    worst
}

/// Columns `pos` of `rows` as `(level dofs, rows)`, ordered by level dof.
fn s_block(pair: &PairProblem, rows: &DMatrix<f64>, pos: &[usize]) -> (Vec<usize>, DMatrix<f64>) {
    let mut cols: Vec<(usize, usize)> = pos.iter().map(|&p| (pair.s_dof(p), p)).collect();
    cols.sort_unstable();
    let m = DMatrix::from_fn(rows.nrows(), cols.len(), |i, j| rows[(i, cols[j].1)]);
    (cols.into_iter().map(|(d, _)| d).collect(), m)
}

/// The `s` halves of `rows` split by face glob: `(glob, level dofs, rows over
/// those dofs)`. Entries at dofs shared with other substructures are dropped.
pub fn face_rows(pair: &PairProblem, rows: &DMatrix<f64>) -> Vec<(usize, Vec<usize>, DMatrix<f64>)> {
    pair.face_positions()
        .into_iter()
        .map(|(g, pos)| {
            let (dofs, m) = s_block(pair, rows, &pos);
            (g, dofs, m)
        })
        .collect()
}

/// The `s` halves of `rows` over every dof common to `s` and `t`, attached to
/// the pair's first face glob.
pub fn closure_rows(pair: &PairProblem, rows: &DMatrix<f64>, glob: usize) -> (usize, Vec<usize>, DMatrix<f64>) {
    let pos: Vec<usize> = pair.shared.iter().map(|sd| sd.ps).collect();
    let (dofs, m) = s_block(pair, rows, &pos);
    (glob, dofs, m)
}

/// Jump-form rows over the pair space keeping only face entries, i.e. what
/// the pair sees of the stored constraints after edge zeroing.
pub fn edge_zeroed(pair: &PairProblem, rows: &DMatrix<f64>) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(rows.nrows(), pair.n());
    let faces = pair.face_positions();
    for (_, pos) in &faces {
        for &p in pos {
            let sd = pair.shared.iter().find(|sd| sd.ps == p).unwrap();
            for i in 0..rows.nrows() {
                out[(i, sd.ps)] = rows[(i, sd.ps)];
                out[(i, pair.n_s + sd.pt)] = -rows[(i, sd.ps)];
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn counts() {
        assert_eq!(select_count(&[5.0, 3.0, 1.5, 1.0], 2.0), (2, 1.5, false));
        assert_eq!(select_count(&[1.5, 1.0], 2.0), (0, 1.5, false));
        assert_eq!(select_count(&[5.0, 3.0], 2.0), (2, 3.0, true));
        assert_eq!(select_count(&[5.0, 3.0], f64::INFINITY), (0, 5.0, false));
        assert_eq!(select_count(&[], 2.0), (0, 0.0, false));
    }
}
