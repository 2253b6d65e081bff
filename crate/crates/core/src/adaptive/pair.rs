//! Generalized eigenproblem of one face-adjacent pair on the concatenated
//! interface space `Γ^s ⊎ Γ^t`.

use nalgebra::{DMatrix, DVector};

use super::AdaptiveError;
use crate::linalg::{dense_sym_eig, pseudoinverse_psd};
use crate::partition::GlobKind;
use crate::precond::BddcLevel;
use crate::substructure::Weighting;

/// Relative `B` Rayleigh quotient (to the largest local diagonal) below which
/// a projected rigid mode counts as null. Soft non-rigid modes under high
/// contrast sit near 1e-9, genuine null vectors at rounding level.
pub const NULL_TOL: f64 = 1e-12;

/// A dof of `Γ^{st}`: positions in the two interfaces and the pair-local
/// averaging weights.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SharedDof {
    pub dof: usize,
    pub ps: usize,
    pub pt: usize,
    pub ws: f64,
    pub wt: f64,
}

/// Operators `A = Π(I−E)ᵀS(I−E)Π`, `B = ΠSΠ` and the pair preconditioner.
/// Vectors are `[x^s; x^t]` over interface positions of `s` then `t`.
pub struct PairProblem<'a> {
    pub s: usize,
    pub t: usize,
    level: &'a BddcLevel,
    pub n_s: usize,
    pub n_t: usize,
    pub shared: Vec<SharedDof>,
    /// Jump rows `[c^s, −c^t]` of the coarse dofs common to `s` and `t`.
    pub d: DMatrix<f64>,
    ddt_inv: DMatrix<f64>,
    /// Orthonormal basis of the part of `null B` inside the range of `Π`.
    pub null: DMatrix<f64>,
    psi: DMatrix<f64>,
    coarse_pinv: DMatrix<f64>,
}

impl<'a> PairProblem<'a> {
    pub fn build(level: &'a BddcLevel, s: usize, t: usize, pinv_tol: f64) -> Result<Self, AdaptiveError> {
        let (ss, st) = (&level.subs[s], &level.subs[t]);
        let (n_s, n_t) = (ss.n_interface(), st.n_interface());
        let gs = ss.interface_dofs();
        let gt = st.interface_dofs();
        let (ds, dt) = (ss.k.diag(), st.k.diag());
        let mut shared = Vec::new();
        let (mut i, mut j) = (0, 0);
        while i < gs.len() && j < gt.len() {
            match gs[i].cmp(&gt[j]) {
                std::cmp::Ordering::Less => i += 1,
                std::cmp::Ordering::Greater => j += 1,
                std::cmp::Ordering::Equal => {
                    let (a, b) = match level.options.weighting {
                        Weighting::Stiffness => (ds[ss.interface[i]], dt[st.interface[j]]),
                        Weighting::Multiplicity => (1.0, 1.0),
                    };
                    shared.push(SharedDof { dof: gs[i], ps: i, pt: j, ws: a / (a + b), wt: b / (a + b) });
                    i += 1;
                    j += 1;
                }
            }
        }

        let (cs, ct) = (&level.constrained[s], &level.constrained[t]);
        let common: Vec<(usize, usize)> = cs
            .coarse
            .iter()
            .enumerate()
            .filter_map(|(a, id)| ct.coarse.binary_search(id).ok().map(|b| (a, b)))
            .collect();
        let n = n_s + n_t;
        let mut d = DMatrix::zeros(common.len(), n);
        for (r, &(a, b)) in common.iter().enumerate() {
            for (p, &l) in ss.interface.iter().enumerate() {
                d[(r, p)] = cs.c[(a, l)];
            }
            for (p, &l) in st.interface.iter().enumerate() {
                d[(r, n_s + p)] = -ct.c[(b, l)];
            }
        }

        // pair coarse space: union of the two local coarse spaces
        let mut ids: Vec<usize> = cs.coarse.iter().chain(&ct.coarse).copied().collect();
        ids.sort_unstable();
        ids.dedup();
        let mut psi = DMatrix::zeros(n, ids.len());
        let mut coarse = DMatrix::zeros(ids.len(), ids.len());
        for (sub, con, off) in [(ss, cs, 0), (st, ct, n_s)] {
            let map: Vec<usize> = con.coarse.iter().map(|c| ids.binary_search(c).unwrap()).collect();
            for (a, &ga) in map.iter().enumerate() {
                for (p, &l) in sub.interface.iter().enumerate() {
                    psi[(off + p, ga)] = con.psi[(l, a)];
                }
                for (b, &gb) in map.iter().enumerate() {
                    coarse[(ga, gb)] += con.coarse_matrix[(a, b)];
                }
            }
        }
        let coarse_pinv = if ids.is_empty() { coarse } else { pseudoinverse_psd(&coarse, pinv_tol)? };

        let mut pair = Self {
            s,
            t,
            level,
            n_s,
            n_t,
            shared,
            d,
            ddt_inv: DMatrix::zeros(0, 0),
            null: DMatrix::zeros(n, 0),
            psi,
            coarse_pinv,
        };
        pair.refresh_projection(pinv_tol)?;
        Ok(pair)
    }

    pub fn n(&self) -> usize {
        self.n_s + self.n_t
    }

    /// Adds jump rows (over the pair space) to `D` and recomputes `Π` and the
    /// null basis.
    pub fn add_jump_rows(&mut self, rows: &DMatrix<f64>, pinv_tol: f64) -> Result<(), AdaptiveError> {
        let mut d = DMatrix::zeros(self.d.nrows() + rows.nrows(), self.n());
        d.rows_mut(0, self.d.nrows()).copy_from(&self.d);
        d.rows_mut(self.d.nrows(), rows.nrows()).copy_from(rows);
        // unit rows keep the relative pseudoinverse cut independent of scale
        for i in self.d.nrows()..d.nrows() {
            let nrm = d.row(i).norm();
            if nrm > 0.0 {
                d.row_mut(i).scale_mut(1.0 / nrm);
            }
        }
        self.d = d;
        self.refresh_projection(pinv_tol)
    }

    fn refresh_projection(&mut self, pinv_tol: f64) -> Result<(), AdaptiveError> {
        let ddt = &self.d * self.d.transpose();
        self.ddt_inv = if ddt.nrows() == 0 { ddt } else { pseudoinverse_psd(&ddt, pinv_tol)? };
        self.null = DMatrix::zeros(self.n(), 0);
        self.null = self.null_basis();
        Ok(())
    }

    /// Rigid modes of either substructure, projected by `Π`, filtered by
    /// their `B` Rayleigh quotient.
    fn null_basis(&self) -> DMatrix<f64> {
        let rig = &self.level.problem.rigid;
        let m = rig.ncols();
        let n = self.n();
        if m == 0 {
            return DMatrix::zeros(n, 0);
        }
        let mut cand = DMatrix::zeros(n, 2 * m);
        for (off, sub, c0) in [(0, &self.level.subs[self.s], 0), (self.n_s, &self.level.subs[self.t], m)] {
            for (p, d) in sub.interface_dofs().into_iter().enumerate() {
                for j in 0..m {
                    cand[(off + p, c0 + j)] = rig[(d, j)];
                }
            }
        }
        for j in 0..2 * m {
            let col: Vec<f64> = cand.column(j).iter().copied().collect();
            cand.set_column(j, &DVector::from_vec(self.project(&col)));
        }
        let (q, r) = crate::linalg::reduced_qr_rows(&cand.transpose(), 1e-8);
        if r == 0 {
            return DMatrix::zeros(n, 0);
        }
        let v = q.transpose();
        let bv = self.apply_cols(&v, |x| self.b_apply(x));
        let g = v.transpose() * &bv;
        let g = (&g + g.transpose()) * 0.5;
        let scale = self.stiffness_scale();
        let eig = dense_sym_eig(&g);
        let keep: Vec<usize> = (0..r).filter(|&i| eig.values[i] <= NULL_TOL * scale).collect();
        let y = DMatrix::from_fn(r, keep.len(), |i, j| eig.vectors[(i, keep[j])]);
        v * y
    }

    /// Largest diagonal entry of the two local matrices (operator scale).
    pub fn stiffness_scale(&self) -> f64 {
        let a = self.level.subs[self.s].k.diag().into_iter().fold(0.0, f64::max);
        let b = self.level.subs[self.t].k.diag().into_iter().fold(0.0, f64::max);
        a.max(b)
    }

    fn apply_cols(&self, v: &DMatrix<f64>, f: impl Fn(&[f64]) -> Vec<f64>) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(v.nrows(), v.ncols());
        for j in 0..v.ncols() {
            let col: Vec<f64> = v.column(j).iter().copied().collect();
            out.set_column(j, &DVector::from_vec(f(&col)));
        }
        out
    }

    /// `Π x = x − Dᵀ(DDᵀ)⁻¹D x`.
    pub fn project(&self, x: &[f64]) -> Vec<f64> {
        if self.d.nrows() == 0 {
            return x.to_vec();
        }
        let xv = DVector::from_column_slice(x);
        let y = self.d.tr_mul(&(&self.ddt_inv * (&self.d * &xv)));
        (xv - y).iter().copied().collect()
    }

    /// Projection onto the range of `Π` with the null basis removed.
    pub fn constrain(&self, x: &[f64]) -> Vec<f64> {
        let mut y = self.project(x);
        if self.null.ncols() > 0 {
            let c = self.null.tr_mul(&DVector::from_column_slice(&y));
            let corr = &self.null * c;
            for (a, b) in y.iter_mut().zip(corr.iter()) {
                *a -= b;
            }
        }
        y
    }

    /// `S = blockdiag(S^s, S^t)`.
    pub fn s_apply(&self, x: &[f64]) -> Vec<f64> {
        let mut y = self.level.subs[self.s].schur_apply(&x[..self.n_s]);
        y.extend(self.level.subs[self.t].schur_apply(&x[self.n_s..]));
        y
    }

    /// `(I − E) x`: pair-local averaging on `Γ^{st}`, zero elsewhere.
    pub fn jump(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n()];
        for sd in &self.shared {
            let diff = x[sd.ps] - x[self.n_s + sd.pt];
            y[sd.ps] = sd.wt * diff;
            y[self.n_s + sd.pt] = -sd.ws * diff;
        }
        y
    }

    /// `(I − E)ᵀ y`.
    pub fn jump_t(&self, y: &[f64]) -> Vec<f64> {
        let mut x = vec![0.0; self.n()];
        for sd in &self.shared {
            let (a, b) = (y[sd.ps], y[self.n_s + sd.pt]);
            x[sd.ps] = sd.wt * a - sd.ws * b;
            x[self.n_s + sd.pt] = -sd.wt * a + sd.ws * b;
        }
        x
    }

    pub fn a_apply(&self, x: &[f64]) -> Vec<f64> {
        let px = self.project(x);
        let sj = self.s_apply(&self.jump(&px));
        self.project(&self.jump_t(&sj))
    }

    pub fn b_apply(&self, x: &[f64]) -> Vec<f64> {
        let px = self.project(x);
        self.project(&self.s_apply(&px))
    }

    /// `Π [constrained local solves + Ψ(ΨᵀSΨ)⁺Ψᵀ] Π x`.
    pub fn m_apply(&self, x: &[f64]) -> Vec<f64> {
        let px = self.project(x);
        let mut y = Vec::with_capacity(self.n());
        for (sub, off, len) in [(self.s, 0, self.n_s), (self.t, self.n_s, self.n_t)] {
            let su = &self.level.subs[sub];
            let mut f = vec![0.0; su.n_local()];
            for (p, &l) in su.interface.iter().enumerate() {
                f[l] = px[off + p];
            }
            let w = self.level.constrained[sub].saddle.solve_homogeneous(&f);
            y.extend(su.interface.iter().map(|&l| w[l]));
            debug_assert_eq!(su.interface.len(), len);
        }
        if self.psi.ncols() > 0 {
            let g = self.psi.tr_mul(&DVector::from_column_slice(&px));
            let v = &self.psi * (&self.coarse_pinv * g);
            for (a, b) in y.iter_mut().zip(v.iter()) {
                *a += b;
            }
        }
        self.project(&y)
    }

    /// Dense `Π`, `A`, `B` (small pairs and tests).
    pub fn dense(&self) -> (DMatrix<f64>, DMatrix<f64>, DMatrix<f64>) {
        let id = DMatrix::identity(self.n(), self.n());
        let pi = self.apply_cols(&id, |x| self.project(x));
        let a = self.apply_cols(&id, |x| self.a_apply(x));
        let b = self.apply_cols(&id, |x| self.b_apply(x));
        (pi, (&a + a.transpose()) * 0.5, (&b + b.transpose()) * 0.5)
    }

    /// Orthonormal basis of the space the eigensolver works in (range of
    /// `Π` minus the null basis), computed densely.
    pub fn dense_space(&self) -> DMatrix<f64> {
        let id = DMatrix::identity(self.n(), self.n());
        let q = self.apply_cols(&id, |x| self.constrain(x));
        let q = (&q + q.transpose()) * 0.5;
        let eig = dense_sym_eig(&q);
        let keep: Vec<usize> = (0..self.n()).filter(|&i| eig.values[i] > 0.5).collect();
        DMatrix::from_fn(self.n(), keep.len(), |i, j| eig.vectors[(i, keep[j])])
    }

    /// Eigenvalues (descending) and vectors of the pencil from dense
    /// matrices.
    pub fn dense_eig(&self) -> (Vec<f64>, DMatrix<f64>) {
        let u = self.dense_space();
        if u.ncols() == 0 {
            return (Vec::new(), u);
        }
        let (_, a, b) = self.dense();
        let au = u.transpose() * &a * &u;
        let bu = u.transpose() * &b * &u;
        let (vals, vecs) = crate::oracle::generalized_eig(&((&au + au.transpose()) * 0.5), &((&bu + bu.transpose()) * 0.5));
        (vals, u * vecs)
    }

    /// For each face glob of the pair: the glob id and the positions in the
    /// `s` interface of its dofs (increasing level dof order).
    pub fn face_positions(&self) -> Vec<(usize, Vec<usize>)> {
        let iface = &self.level.interface;
        let mut out: Vec<(usize, Vec<usize>)> = Vec::new();
        for sd in &self.shared {
            let node = self.level.problem.dof_node[sd.dof];
            let g = iface.node_glob[node].unwrap();
            if iface.globs[g].kind != GlobKind::Face {
                continue;
            }
            match out.iter_mut().find(|(gg, _)| *gg == g) {
                Some((_, v)) => v.push(sd.ps),
                None => out.push((g, vec![sd.ps])),
            }
        }
        out.sort_by_key(|(g, _)| *g);
        out
    }

    /// Level dof at position `p` of the `s` interface.
    pub fn s_dof(&self, p: usize) -> usize {
        let su = &self.level.subs[self.s];
        su.dofs[su.interface[p]]
    }
}
