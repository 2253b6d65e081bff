//! Per-substructure kernels: interior/interface split, interior solves, Schur
//! complement action, harmonic extension, averaging weights and the
//! constrained Neumann problems defining the coarse basis.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::constraints::CoarseDof;
use crate::level::{assemble_blocks, ElementBlock, LevelProblem};
use crate::linalg::{CsrMatrix, LinalgError, SaddleSolver, SparseLdl, SymSparseMatrix};
use crate::partition::Interface;

#[derive(Debug, Error)]
pub enum SubstructureError {
    #[error("subdomain {sub}: interior block is not positive definite ({source})")]
    SingularInterior { sub: usize, source: LinalgError },
    #[error("subdomain {sub}: constrained Neumann problem is singular; constraints do not remove its rigid body modes ({source})")]
    SingularConstrained { sub: usize, source: LinalgError },
    #[error("zero diagonal entry at interface dof {dof}")]
    ZeroDiagonal { dof: usize },
    #[error("subdomain {0} has no elements")]
    Empty(usize),
}

/// Local data of one substructure. Local dofs are the level dofs touched by
/// the substructure's elements, in increasing order.
#[derive(Debug, Clone)]
pub struct Substructure {
    pub id: usize,
    pub dofs: Vec<usize>,
    /// Local indices of interface dofs (`Γ^s`).
    pub interface: Vec<usize>,
    /// Local indices of interior dofs.
    pub interior: Vec<usize>,
    /// Local Neumann matrix.
    pub k: SymSparseMatrix,
    kii: Option<SparseLdl>,
    k_ig: CsrMatrix,
    k_gg: CsrMatrix,
}

impl Substructure {
    pub fn build(
        problem: &LevelProblem,
        iface: &Interface,
        id: usize,
        elements: &[usize],
    ) -> Result<Self, SubstructureError> {
        if elements.is_empty() {
            return Err(SubstructureError::Empty(id));
        }
        let mut dofs: Vec<usize> =
            elements.iter().flat_map(|&e| problem.elements[e].dofs.iter().flatten().copied()).collect();
        dofs.sort_unstable();
        dofs.dedup();
        let local = |d: usize| dofs.binary_search(&d).unwrap();
        let blocks: Vec<ElementBlock> = elements
            .iter()
            .map(|&e| {
                let el = &problem.elements[e];
                ElementBlock {
                    nodes: Vec::new(),
                    dofs: el.dofs.iter().map(|d| d.map(local)).collect(),
                    matrix: el.matrix.clone(),
                }
            })
            .collect();
        let k = assemble_blocks(dofs.len(), &blocks);
        let (interface, interior): (Vec<usize>, Vec<usize>) =
            (0..dofs.len()).partition(|&l| iface.is_interface_node(problem.dof_node[dofs[l]]));
        let kii = if interior.is_empty() {
            None
        } else {
            Some(
                SparseLdl::factor_spd(&k.principal(&interior))
                    .map_err(|source| SubstructureError::SingularInterior { sub: id, source })?,
            )
        };
        let k_ig = k.csr().submatrix(&interior, &interface);
        let k_gg = k.csr().submatrix(&interface, &interface);
        Ok(Self { id, dofs, interface, interior, k, kii, k_ig, k_gg })
    }

    pub fn n_local(&self) -> usize {
        self.dofs.len()
    }

    pub fn n_interface(&self) -> usize {
        self.interface.len()
    }

    pub fn local_of(&self, dof: usize) -> Option<usize> {
        self.dofs.binary_search(&dof).ok()
    }

    /// Level dofs of `Γ^s`, in interface order.
    pub fn interface_dofs(&self) -> Vec<usize> {
        self.interface.iter().map(|&l| self.dofs[l]).collect()
    }

    /// `K_II⁻¹ r` for `r` over interior positions.
    pub fn interior_solve(&self, r: &[f64]) -> Vec<f64> {
        match &self.kii {
            Some(f) => f.solve(r),
            None => Vec::new(),
        }
    }

    /// `S^s x = (K_ΓΓ − K_ΓI K_II⁻¹ K_IΓ) x` for `x` over interface positions.
    pub fn schur_apply(&self, x: &[f64]) -> Vec<f64> {
        let mut y = self.k_gg.mul_vec(x);
        if self.kii.is_some() {
            let t = self.interior_solve(&self.k_ig.mul_vec(x));
            let mut corr = vec![0.0; x.len()];
            self.k_ig.tr_mul_vec_add(&t, &mut corr);
            for (a, b) in y.iter_mut().zip(corr) {
                *a -= b;
            }
        }
        y
    }

    /// Local vector with interface values `x` and interior `−K_II⁻¹ K_IΓ x`.
    pub fn harmonic_extension(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n_local()];
        for (&l, &v) in self.interface.iter().zip(x) {
            out[l] = v;
        }
        if self.kii.is_some() {
            let t = self.interior_solve(&self.k_ig.mul_vec(x));
            for (&l, v) in self.interior.iter().zip(t) {
                out[l] = -v;
            }
        }
        out
    }

    /// Dense Schur complement (small problems and tests only).
    pub fn dense_schur(&self) -> DMatrix<f64> {
        let n = self.n_interface();
        let mut s = DMatrix::zeros(n, n);
        let mut e = vec![0.0; n];
        for j in 0..n {
            e[j] = 1.0;
            s.set_column(j, &DVector::from_vec(self.schur_apply(&e)));
            e[j] = 0.0;
        }
        (&s + s.transpose()) * 0.5
    }
}

/// How interface values of neighbouring substructures are averaged.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Weighting {
    /// Proportional to the diagonal of the substructure matrices.
    Stiffness,
    /// `1 / multiplicity`.
    Multiplicity,
}

impl std::str::FromStr for Weighting {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "stiffness" => Ok(Self::Stiffness),
            "multiplicity" => Ok(Self::Multiplicity),
            _ => Err(format!("unknown weighting '{s}'")),
        }
    }
}

/// Averaging weights per substructure and interface position; they sum to
/// one over the substructures sharing a dof.
pub fn averaging_weights(
    n_dofs: usize,
    subs: &[Substructure],
    kind: Weighting,
) -> Result<Vec<Vec<f64>>, SubstructureError> {
    let own: Vec<Vec<f64>> = subs
        .iter()
        .map(|s| {
            let diag = s.k.diag();
            s.interface.iter().map(|&l| if kind == Weighting::Stiffness { diag[l] } else { 1.0 }).collect()
        })
        .collect();
    let mut total = vec![0.0; n_dofs];
    for (s, w) in subs.iter().zip(&own) {
        for (&l, &v) in s.interface.iter().zip(w) {
            total[s.dofs[l]] += v;
        }
    }
    subs.iter()
        .zip(own)
        .map(|(s, w)| {
            s.interface
                .iter()
                .zip(w)
                .map(|(&l, v)| {
                    let t = total[s.dofs[l]];
                    if t <= 0.0 {
                        Err(SubstructureError::ZeroDiagonal { dof: s.dofs[l] })
                    } else {
                        Ok(v / t)
                    }
                })
                .collect()
        })
        .collect()
}

/// Constrained Neumann problem of one substructure and its coarse basis.
#[derive(Debug, Clone)]
pub struct ConstrainedSub {
    /// Level coarse dof ids of the rows of `c`, increasing.
    pub coarse: Vec<usize>,
    /// `C^s` over local dofs (zero on interior columns).
    pub c: DMatrix<f64>,
    pub saddle: SaddleSolver,
    /// Energy-minimal functions with unit coarse values, `n_local × n_c`.
    pub psi: DMatrix<f64>,
    /// Lagrange multiplier block of the coarse basis problem.
    pub mu: DMatrix<f64>,
    /// `Ψᵀ K Ψ`.
    pub coarse_matrix: DMatrix<f64>,
}

impl ConstrainedSub {
    pub fn build(sub: &Substructure, coarse: &[CoarseDof]) -> Result<Self, SubstructureError> {
        let ids: Vec<usize> = (0..coarse.len()).filter(|&c| coarse[c].subdomains.binary_search(&sub.id).is_ok()).collect();
        let mut c = DMatrix::zeros(ids.len(), sub.n_local());
        for (r, &id) in ids.iter().enumerate() {
            for &(d, w) in &coarse[id].support {
                let l = sub.local_of(d).expect("coarse dof support outside its substructure");
                c[(r, l)] = w;
            }
        }
        let saddle =
            SaddleSolver::new(&sub.k, &c).map_err(|source| SubstructureError::SingularConstrained { sub: sub.id, source })?;
        let (psi, mu) = saddle.unit_responses();
        let mut kpsi = DMatrix::zeros(sub.n_local(), ids.len());
        for j in 0..ids.len() {
            let col: Vec<f64> = psi.column(j).iter().copied().collect();
            kpsi.set_column(j, &DVector::from_vec(sub.k.mul_vec(&col)));
        }
        let cm = psi.transpose() * kpsi;
        let coarse_matrix = (&cm + cm.transpose()) * 0.5;
        Ok(Self { coarse: ids, c, saddle, psi, mu, coarse_matrix })
    }

    pub fn n_coarse(&self) -> usize {
        self.coarse.len()
    }
}
