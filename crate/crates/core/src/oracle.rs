//! Dense brute-force counterparts of the BDDC operators for small problems:
//! explicit `E`, `P`, `W̃` bases, exact level bounds and spectra.

use nalgebra::{DMatrix, DVector};

use crate::krylov::Operator;
use crate::linalg::{dense_cholesky, dense_sym_eig};
use crate::precond::BddcLevel;

/// Explicit matrices of one level over the broken space `W = Π_s W^s`
/// (local vectors concatenated in subdomain order).
#[derive(Debug, Clone)]
pub struct DenseLevel {
    pub offsets: Vec<usize>,
    /// Block diagonal of local Neumann matrices.
    pub k: DMatrix<f64>,
    /// Restriction `U → W`.
    pub r: DMatrix<f64>,
    /// Weighted averaging `W → U`.
    pub e: DMatrix<f64>,
    /// Projection onto functions vanishing on the interface, `W → W`.
    pub p: DMatrix<f64>,
    /// Jumps of coarse dofs; `W̃` is its null space.
    pub jumps: DMatrix<f64>,
    /// Local coarse constraints `C^s` stacked block diagonally; `W̃_Δ` is its
    /// null space.
    pub c: DMatrix<f64>,
    /// Coarse basis functions spanning `W̃_Π`.
    pub coarse_basis: DMatrix<f64>,
}

impl DenseLevel {
    pub fn n_w(&self) -> usize {
        *self.offsets.last().unwrap()
    }

    /// `R E`, the averaging projection on `W`.
    pub fn e_hat(&self) -> DMatrix<f64> {
        &self.r * &self.e
    }

    /// Orthonormal basis of `W̃`.
    pub fn w_tilde(&self) -> DMatrix<f64> {
        null_space(&self.jumps, 1e-10)
    }

    /// Orthonormal basis of `W̃_Δ`.
    pub fn w_delta(&self) -> DMatrix<f64> {
        null_space(&self.c, 1e-10)
    }
}

pub fn dense_level(level: &BddcLevel) -> DenseLevel {
    let n = level.problem.n_dofs;
    let mut offsets = vec![0];
    for s in &level.subs {
        offsets.push(offsets.last().unwrap() + s.n_local());
    }
    let nw = *offsets.last().unwrap();
    let mut k = DMatrix::zeros(nw, nw);
    let mut r = DMatrix::zeros(nw, n);
    let mut e = DMatrix::zeros(n, nw);
    let mut p = DMatrix::zeros(nw, nw);
    let nc_total: usize = level.constrained.iter().map(|c| c.n_coarse()).sum();
    let mut c = DMatrix::zeros(nc_total, nw);
    let mut coarse_basis = DMatrix::zeros(nw, level.n_coarse());
    let mut row = 0;
    for (s, sub) in level.subs.iter().enumerate() {
        let o = offsets[s];
        let nl = sub.n_local();
        k.view_mut((o, o), (nl, nl)).copy_from(&sub.k.to_dense());
        for l in 0..nl {
            r[(o + l, sub.dofs[l])] = 1.0;
            e[(sub.dofs[l], o + l)] = level.weight_at(s, l);
        }
        // P = I − H(·|Γ)
        for l in 0..nl {
            p[(o + l, o + l)] = 1.0;
        }
        let ng = sub.n_interface();
        let mut unit = vec![0.0; ng];
        for j in 0..ng {
            unit[j] = 1.0;
            let h = sub.harmonic_extension(&unit);
            let col = o + sub.interface[j];
            for l in 0..nl {
                p[(o + l, col)] -= h[l];
            }
            unit[j] = 0.0;
        }
        let cs = &level.constrained[s];
        for i in 0..cs.n_coarse() {
            for l in 0..nl {
                c[(row + i, o + l)] = cs.c[(i, l)];
            }
            for l in 0..nl {
                coarse_basis[(o + l, cs.coarse[i])] = cs.psi[(l, i)];
            }
        }
        row += cs.n_coarse();
    }
    // coarse dof jumps against the first sharing substructure
    let mut jump_rows: Vec<DVector<f64>> = Vec::new();
    for (id, cd) in level.coarse.iter().enumerate() {
        let value_row = |s: usize| {
            let cs = &level.constrained[s];
            let i = cs.coarse.binary_search(&id).unwrap();
            let mut v = DVector::zeros(nw);
            for l in 0..level.subs[s].n_local() {
                v[offsets[s] + l] = cs.c[(i, l)];
            }
            v
        };
        let first = value_row(cd.subdomains[0]);
        for &s in &cd.subdomains[1..] {
            jump_rows.push(value_row(s) - &first);
        }
    }
    let mut jumps = DMatrix::zeros(jump_rows.len(), nw);
    for (i, v) in jump_rows.iter().enumerate() {
        jumps.set_row(i, &v.transpose());
    }
    DenseLevel { offsets, k, r, e, p, jumps, c, coarse_basis }
}

/// Orthonormal basis of the null space of `m`; `rel_tol` applies to the
/// eigenvalues of `mᵀm`.
pub fn null_space(m: &DMatrix<f64>, rel_tol: f64) -> DMatrix<f64> {
    let n = m.ncols();
    if m.nrows() == 0 {
        return DMatrix::identity(n, n);
    }
    let g = m.transpose() * m;
    let eig = dense_sym_eig(&g);
    let top = eig.values[0].max(0.0);
    let keep: Vec<usize> = (0..n).filter(|&i| eig.values[i] <= rel_tol * top).collect();
    DMatrix::from_fn(n, keep.len(), |i, j| eig.vectors[(i, keep[j])])
}

/// Eigenvalues (descending) and vectors of `A x = λ B x` with `B` SPD.
pub fn generalized_eig(a: &DMatrix<f64>, b: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let l = dense_cholesky(b).expect("pencil matrix B is not positive definite").l();
    let linv = l.clone().try_inverse().expect("singular Cholesky factor");
    let c = &linv * a * linv.transpose();
    let c = (&c + c.transpose()) * 0.5;
    let eig = dense_sym_eig(&c);
    let vecs = linv.transpose() * &eig.vectors;
    (eig.values.iter().copied().collect(), vecs)
}

/// `ω = sup_{w ∈ W̃} ‖(I−P) E w‖²_a / ‖w‖²_a`, computed densely.
pub fn exact_level_bound(level: &BddcLevel) -> f64 {
    let d = dense_level(level);
    let z = d.w_tilde();
    let nw = d.n_w();
    let g = (DMatrix::<f64>::identity(nw, nw) - &d.p) * d.e_hat();
    let gz = &g * &z;
    let num = gz.transpose() * &d.k * &gz;
    let den = z.transpose() * &d.k * &z;
    let (vals, _) = generalized_eig(&((&num + num.transpose()) * 0.5), &((&den + den.transpose()) * 0.5));
    vals[0]
}

/// Dense matrix of a linear operator, column by column.
pub fn dense_operator(op: &dyn Operator) -> DMatrix<f64> {
    let n = op.dim();
    let mut m = DMatrix::zeros(n, n);
    let mut e = vec![0.0; n];
    for j in 0..n {
        e[j] = 1.0;
        m.set_column(j, &DVector::from_vec(op.apply(&e)));
        e[j] = 0.0;
    }
    m
}

/// Eigenvalues of `M A` (ascending) for SPD `A`, via `Lᵀ M L` with `A = L Lᵀ`.
pub fn preconditioned_spectrum(m: &DMatrix<f64>, a: &DMatrix<f64>) -> Vec<f64> {
    let l = dense_cholesky(a).expect("A is not positive definite").l();
    let t = l.transpose() * m * &l;
    let t = (&t + t.transpose()) * 0.5;
    let mut v: Vec<f64> = dense_sym_eig(&t).values.iter().copied().collect();
    v.reverse();
    v
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constraints::ConstraintPolicy;
    use crate::mesh::{assemble, build_cube_mesh, poisson_dirichlet_bc, Formulation, MaterialField};
    use crate::partition::partition_box;
    use crate::precond::LevelOptions;

    fn level(n: usize, k: [usize; 3], policy: ConstraintPolicy) -> BddcLevel {
        let m = build_cube_mesh(n);
        let p = assemble(&m, &MaterialField::uniform(m.n_elements(), 1.0, 0.3), Formulation::Poisson, &poisson_dirichlet_bc(&m))
            .unwrap()
            .level;
        BddcLevel::prepare(1, p, partition_box([n; 3], k).unwrap(), LevelOptions { policy, ..Default::default() }).unwrap()
    }

    #[test]
    fn saturated_bound_is_one() {
        let l = level(4, [2, 2, 2], ConstraintPolicy::Saturated);
        assert!((exact_level_bound(&l) - 1.0).abs() < 1e-8);
    }

    #[test]
    fn bound_at_least_one() {
        let l = level(4, [2, 1, 1], ConstraintPolicy::Corners);
        assert!(exact_level_bound(&l) >= 1.0 - 1e-10);
    }

    #[test]
    fn generalized_eig_diag() {
        let a = DMatrix::from_diagonal(&DVector::from_vec(vec![4.0, 2.0]));
        let b = DMatrix::from_diagonal(&DVector::from_vec(vec![2.0, 1.0]));
        let (v, _) = generalized_eig(&a, &b);
        assert!((v[0] - 2.0).abs() < 1e-12 && (v[1] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn null_space_dimension() {
        let l = level(4, [2, 2, 2], ConstraintPolicy::CornersEdges);
        let d = dense_level(&l);
        let z = d.w_tilde();
        assert!((&d.jumps * &z).amax() < 1e-10);
        assert_eq!(z.ncols(), d.n_w() - d.jumps.nrows());
    }

    #[test]
    fn two_level_spectrum_within_bound() {
        use crate::precond::Hierarchy;
        let l = level(8, [2, 2, 2], ConstraintPolicy::CornersEdges);
        let omega = exact_level_bound(&l);
        let a = l.problem.matrix.to_dense();
        let top = l.coarse_problem();
        let h = Hierarchy::new(vec![l], top).unwrap();
        let m = dense_operator(&h);
        let spec = preconditioned_spectrum(&m, &a);
        assert!(spec[0] >= 1.0 - 1e-8, "{}", spec[0]);
        assert!(*spec.last().unwrap() <= omega * (1.0 + 1e-6), "{} > {omega}", spec.last().unwrap());
    }
}
