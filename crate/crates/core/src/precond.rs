//! Multilevel BDDC: per-level setup, coarse problem formation and the
//! recursive preconditioner application.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use thiserror::Error;

use crate::constraints::{initial_constraints, order_by_glob, CoarseDof, ConstraintKind, ConstraintPolicy};
use crate::level::{ElementBlock, LevelProblem, Node};
use crate::linalg::{LinalgError, SparseLdl};
use crate::partition::{
    classify_interface, coarsen, saturate_corners, select_corners, Decomposition, GlobKind, Interface, PartitionError,
};
use crate::substructure::{averaging_weights, ConstrainedSub, Substructure, SubstructureError, Weighting};

#[derive(Debug, Error)]
pub enum PrecondError {
    #[error("level {level}: {source}")]
    Partition { level: usize, source: PartitionError },
    #[error("level {level}: {source}")]
    Substructure { level: usize, source: SubstructureError },
    #[error("top level problem is not positive definite: {0}")]
    TopSolve(LinalgError),
    #[error("hierarchy needs at least two levels, got {0}")]
    TooFewLevels(usize),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LevelOptions {
    pub policy: ConstraintPolicy,
    pub weighting: Weighting,
    pub edge_include_corners: bool,
}

impl Default for LevelOptions {
    fn default() -> Self {
        Self { policy: ConstraintPolicy::CornersEdges, weighting: Weighting::Stiffness, edge_include_corners: false }
    }
}

/// One BDDC level: decomposition, substructures, coarse dofs and the
/// constrained problems built from them.
#[derive(Debug, Clone)]
pub struct BddcLevel {
    /// 1-based level index.
    pub index: usize,
    pub problem: LevelProblem,
    pub decomposition: Decomposition,
    pub interface: Interface,
    pub coarse: Vec<CoarseDof>,
    pub subs: Vec<Substructure>,
    pub weights: Vec<Vec<f64>>,
    pub constrained: Vec<ConstrainedSub>,
    pub options: LevelOptions,
}

impl BddcLevel {
    /// Classifies the interface, selects corners, builds substructures and the
    /// initial constraints.
    pub fn prepare(
        index: usize,
        problem: LevelProblem,
        decomposition: Decomposition,
        options: LevelOptions,
    ) -> Result<Self, PrecondError> {
        let mut interface = classify_interface(&problem, &decomposition);
        if options.policy == ConstraintPolicy::Saturated {
            saturate_corners(&mut interface);
        } else if decomposition.n_sub > 1 {
            select_corners(&problem, &mut interface).map_err(|source| PrecondError::Partition { level: index, source })?;
        }
        let mut coarse = initial_constraints(&problem, &interface, options.policy, options.edge_include_corners);
        order_by_glob(&mut coarse);
        let members = decomposition.members();
        let subs = members
            .par_iter()
            .enumerate()
            .map(|(s, els)| Substructure::build(&problem, &interface, s, els))
            .collect::<Result<Vec<_>, _>>()
            .map_err(|source| PrecondError::Substructure { level: index, source })?;
        let weights = averaging_weights(problem.n_dofs, &subs, options.weighting)
            .map_err(|source| PrecondError::Substructure { level: index, source })?;
        let mut level = Self {
            index,
            problem,
            decomposition,
            interface,
            coarse,
            subs,
            weights,
            constrained: Vec::new(),
            options,
        };
        level.rebuild_constrained()?;
        Ok(level)
    }

    /// Refactors the constrained Neumann problems after the coarse dofs
    /// changed.
    pub fn rebuild_constrained(&mut self) -> Result<(), PrecondError> {
        order_by_glob(&mut self.coarse);
        let coarse = &self.coarse;
        self.constrained = self
            .subs
            .par_iter()
            .map(|s| ConstrainedSub::build(s, coarse))
            .collect::<Result<Vec<_>, _>>()
            .map_err(|source| PrecondError::Substructure { level: self.index, source })?;
        Ok(())
    }

    pub fn n_sub(&self) -> usize {
        self.subs.len()
    }

    pub fn n_coarse(&self) -> usize {
        self.coarse.len()
    }

    /// Number of interface dofs `n_Γ`.
    pub fn n_interface_dofs(&self) -> usize {
        self.interface.interface_nodes().iter().map(|&n| self.problem.nodes[n].dofs.len()).sum()
    }

    pub fn count_coarse(&self, kind: ConstraintKind) -> usize {
        self.coarse.iter().filter(|c| c.kind == kind).count()
    }

    /// Weight of substructure `s` at local dof `l` (one on interior dofs).
    pub fn weight_at(&self, s: usize, local: usize) -> f64 {
        match self.subs[s].interface.binary_search(&local) {
            Ok(p) => self.weights[s][p],
            Err(_) => 1.0,
        }
    }

    /// The next level: substructures become elements carrying their coarse
    /// matrices, globs with coarse dofs become nodes.
    pub fn coarse_problem(&self) -> LevelProblem {
        let nc = self.n_coarse();
        let mut glob_node: Vec<Option<usize>> = vec![None; self.interface.globs.len()];
        let mut nodes: Vec<Node> = Vec::new();
        for (id, c) in self.coarse.iter().enumerate() {
            let n = *glob_node[c.glob].get_or_insert_with(|| {
                let g = &self.interface.globs[c.glob];
                let mut coord = [0.0; 3];
                for &v in &g.nodes {
                    for a in 0..3 {
                        coord[a] += self.problem.nodes[v].coord[a] / g.nodes.len() as f64;
                    }
                }
                nodes.push(Node { dofs: Vec::new(), comps: Vec::new(), coord });
                nodes.len() - 1
            });
            nodes[n].dofs.push(id);
            nodes[n].comps.push(match c.kind {
                ConstraintKind::Adaptive => None,
                _ => c.comp,
            });
        }
        let elements = self
            .constrained
            .iter()
            .map(|cs| {
                let mut en: Vec<usize> = cs.coarse.iter().map(|&c| glob_node[self.coarse[c].glob].unwrap()).collect();
                en.dedup();
                ElementBlock {
                    nodes: en,
                    dofs: cs.coarse.iter().map(|&c| Some(c)).collect(),
                    matrix: Arc::new(cs.coarse_matrix.clone()),
                }
            })
            .collect();
        let m = self.problem.n_modes();
        let rigid = DMatrix::from_fn(nc, m, |c, j| {
            self.coarse[c].support.iter().map(|&(d, w)| w * self.problem.rigid[(d, j)]).sum()
        });
        LevelProblem::new(nc, elements, nodes, rigid)
    }

    /// Number of face globs.
    pub fn n_faces(&self) -> usize {
        self.interface.count(GlobKind::Face)
    }
}

/// Exact solver for the top level.
#[derive(Debug, Clone)]
pub struct TopLevel {
    pub problem: LevelProblem,
    factor: Option<SparseLdl>,
}

impl TopLevel {
    pub fn new(problem: LevelProblem) -> Result<Self, PrecondError> {
        let factor =
            if problem.n_dofs == 0 { None } else { Some(SparseLdl::factor_spd(&problem.matrix).map_err(PrecondError::TopSolve)?) };
        Ok(Self { problem, factor })
    }

    pub fn solve(&self, r: &[f64]) -> Vec<f64> {
        match &self.factor {
            Some(f) => f.solve(r),
            None => Vec::new(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Hierarchy {
    pub levels: Vec<BddcLevel>,
    pub top: TopLevel,
}

impl Hierarchy {
    pub fn new(levels: Vec<BddcLevel>, top_problem: LevelProblem) -> Result<Self, PrecondError> {
        Ok(Self { levels, top: TopLevel::new(top_problem)? })
    }

    /// Number of levels `L` (the top level counts).
    pub fn n_levels(&self) -> usize {
        self.levels.len() + 1
    }

    pub fn dim(&self) -> usize {
        self.levels.first().map_or(self.top.problem.n_dofs, |l| l.problem.n_dofs)
    }

    /// One application of the preconditioner to a level-1 residual.
    pub fn apply(&self, r: &[f64]) -> Vec<f64> {
        self.apply_level(0, r)
    }

    fn apply_level(&self, i: usize, r: &[f64]) -> Vec<f64> {
        let Some(level) = self.levels.get(i) else {
            return self.top.solve(r);
        };
        let n = level.problem.n_dofs;
        assert_eq!(r.len(), n, "residual length does not match level {}", level.index);

        // interior pre-correction
        let interior: Vec<Vec<f64>> = level
            .subs
            .par_iter()
            .map(|s| {
                let ri: Vec<f64> = s.interior.iter().map(|&l| r[s.dofs[l]]).collect();
                s.interior_solve(&ri)
            })
            .collect();
        let mut u0 = vec![0.0; n];
        for (s, ui) in level.subs.iter().zip(&interior) {
            for (&l, &v) in s.interior.iter().zip(ui) {
                u0[s.dofs[l]] = v;
            }
        }
        let au0 = level.problem.matrix.mul_vec(&u0);
        let rb: Vec<f64> = r.iter().zip(&au0).map(|(a, b)| a - b).collect();

        // substructure corrections and coarse residual
        let local: Vec<(Vec<f64>, DVector<f64>)> = level
            .subs
            .par_iter()
            .zip(&level.constrained)
            .zip(&level.weights)
            .map(|((s, cs), w)| {
                let mut f = vec![0.0; s.n_local()];
                for (p, &l) in s.interface.iter().enumerate() {
                    f[l] = w[p] * rb[s.dofs[l]];
                }
                let wd = cs.saddle.solve_homogeneous(&f);
                let rc = cs.psi.tr_mul(&DVector::from_vec(f));
                (wd, rc)
            })
            .collect();
        let mut rc = vec![0.0; level.n_coarse()];
        for (cs, (_, v)) in level.constrained.iter().zip(&local) {
            for (&c, &x) in cs.coarse.iter().zip(v.iter()) {
                rc[c] += x;
            }
        }
        let uc = self.apply_level(i + 1, &rc);

        // averaging of the corrections
        let parts: Vec<Vec<f64>> = level
            .subs
            .par_iter()
            .zip(&level.constrained)
            .zip(&level.weights)
            .zip(&local)
            .map(|(((s, cs), w), (wd, _))| {
                let ucl = DVector::from_iterator(cs.n_coarse(), cs.coarse.iter().map(|&c| uc[c]));
                let v = &cs.psi * ucl;
                s.interface.iter().enumerate().map(|(p, &l)| w[p] * (wd[l] + v[l])).collect()
            })
            .collect();
        let mut u = vec![0.0; n];
        for (s, part) in level.subs.iter().zip(&parts) {
            for (&l, &v) in s.interface.iter().zip(part) {
                u[s.dofs[l]] += v;
            }
        }

        // interior post-correction
        let ext: Vec<Vec<f64>> = level
            .subs
            .par_iter()
            .map(|s| {
                let x: Vec<f64> = s.interface.iter().map(|&l| u[s.dofs[l]]).collect();
                s.harmonic_extension(&x)
            })
            .collect();
        for (s, e) in level.subs.iter().zip(&ext) {
            for &l in &s.interior {
                let d = s.dofs[l];
                u[d] = u0[d] + e[l];
            }
        }
        u
    }
}

/// Per-level subdomain partitioning for [`build_hierarchy`].
#[derive(Debug, Clone)]
pub enum LevelPartition {
    Given(Decomposition),
    /// Partition the level's element graph into this many parts (regular
    /// coarsening is used when the previous level was a regular grid).
    Parts(usize),
}

/// Builds an `L = partitions.len() + 1` level hierarchy. `hook` runs on each
/// level after its initial setup and before its coarse problem is formed
/// (the adaptive constraint selection plugs in here).
pub fn build_hierarchy<E>(
    problem: LevelProblem,
    partitions: &[LevelPartition],
    options: LevelOptions,
    mut hook: impl FnMut(&mut BddcLevel) -> Result<(), E>,
) -> Result<Hierarchy, E>
where
    E: From<PrecondError>,
{
    if partitions.is_empty() {
        return Err(PrecondError::TooFewLevels(1).into());
    }
    let mut levels: Vec<BddcLevel> = Vec::new();
    let mut current = problem;
    for (i, part) in partitions.iter().enumerate() {
        let dec = match part {
            LevelPartition::Given(d) => d.clone(),
            LevelPartition::Parts(p) => match levels.last() {
                Some(prev) => coarsen(&prev.decomposition, &current, *p),
                None => crate::partition::partition_graph(&current.element_adjacency(), *p),
            },
        };
        let mut level = BddcLevel::prepare(i + 1, current, dec, options)?;
        hook(&mut level)?;
        current = level.coarse_problem();
        levels.push(level);
    }
    Ok(Hierarchy::new(levels, current)?)
}

/// Hierarchy without adaptive constraints.
pub fn build_plain(
    problem: LevelProblem,
    partitions: &[LevelPartition],
    options: LevelOptions,
) -> Result<Hierarchy, PrecondError> {
    build_hierarchy(problem, partitions, options, |_| Ok::<(), PrecondError>(()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{dot, SymSparseMatrix};
    use crate::mesh::{assemble, build_cube_mesh, poisson_dirichlet_bc, Formulation, MaterialField};
    use crate::partition::partition_regular;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn poisson(n: usize) -> LevelProblem {
        let m = build_cube_mesh(n);
        assemble(&m, &MaterialField::uniform(m.n_elements(), 1.0, 0.3), Formulation::Poisson, &poisson_dirichlet_bc(&m))
            .unwrap()
            .level
    }

    fn rand_vec(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
        (0..n).map(|_| rng.random::<f64>() - 0.5).collect()
    }

    #[test]
    fn symmetric_and_positive() {
        let p = poisson(8);
        let h = build_plain(p, &[LevelPartition::Given(partition_regular(8, 2).unwrap())], LevelOptions::default())
            .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..10 {
            let a = rand_vec(&mut rng, h.dim());
            let b = rand_vec(&mut rng, h.dim());
            let ma = h.apply(&a);
            let mb = h.apply(&b);
            assert!((dot(&ma, &b) - dot(&a, &mb)).abs() < 1e-10 * dot(&ma, &a).abs().max(1.0));
            assert!(dot(&ma, &a) > 0.0);
        }
        assert!(h.apply(&vec![0.0; h.dim()]).iter().all(|&v| v == 0.0));
    }

    #[test]
    fn single_subdomain_is_exact() {
        let p = poisson(4);
        let a: SymSparseMatrix = p.matrix.clone();
        let h = build_plain(p, &[LevelPartition::Given(Decomposition::trivial(64))], LevelOptions::default()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x = rand_vec(&mut rng, h.dim());
        let y = h.apply(&a.mul_vec(&x));
        for (u, v) in x.iter().zip(&y) {
            assert!((u - v).abs() < 1e-10);
        }
    }

    #[test]
    fn saturated_is_exact() {
        let p = poisson(4);
        let a = p.matrix.clone();
        let opts = LevelOptions { policy: ConstraintPolicy::Saturated, ..Default::default() };
        let h = build_plain(p, &[LevelPartition::Given(partition_regular(4, 2).unwrap())], opts).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let x = rand_vec(&mut rng, h.dim());
        let y = h.apply(&a.mul_vec(&x));
        for (u, v) in x.iter().zip(&y) {
            assert!((u - v).abs() < 1e-9);
        }
    }

    #[test]
    fn three_levels_shrink() {
        let p = poisson(8);
        let parts = [LevelPartition::Given(partition_regular(8, 2).unwrap()), LevelPartition::Parts(2)];
        let h = build_plain(p, &parts, LevelOptions::default()).unwrap();
        assert_eq!(h.n_levels(), 3);
        let d1 = h.levels[0].problem.n_dofs;
        let d2 = h.levels[1].problem.n_dofs;
        let d3 = h.top.problem.n_dofs;
        assert!(d1 > d2 && d2 > d3 && d3 > 0);
        assert_eq!(h.levels[1].n_sub(), 2);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let a = rand_vec(&mut rng, d1);
        let b = rand_vec(&mut rng, d1);
        assert!((dot(&h.apply(&a), &b) - dot(&a, &h.apply(&b))).abs() < 1e-10);
    }
}
