//! Coarse degrees of freedom: corner values, glob averages and adaptive rows.

use std::str::FromStr;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::level::LevelProblem;
use crate::linalg::reduced_qr_rows_abs;
use crate::partition::{GlobKind, Interface};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ConstraintKind {
    Corner,
    Edge,
    Face,
    Adaptive,
}

/// One coarse functional: a weighted sum of level dofs of one glob, shared by
/// the glob's subdomains.
#[derive(Debug, Clone, PartialEq)]
pub struct CoarseDof {
    pub kind: ConstraintKind,
    pub glob: usize,
    pub subdomains: Vec<usize>,
    /// `(level dof, weight)`, dofs increasing.
    pub support: Vec<(usize, f64)>,
    /// Displacement component for corner values and averages.
    pub comp: Option<u8>,
}

impl CoarseDof {
    pub fn eval(&self, u: &[f64]) -> f64 {
        self.support.iter().map(|&(d, w)| w * u[d]).sum()
    }
}

/// Which globs carry a priori constraints.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConstraintPolicy {
    Corners,
    CornersEdges,
    CornersEdgesFaces,
    /// Every interface dof is a corner value.
    Saturated,
}

impl FromStr for ConstraintPolicy {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "corners" => Ok(Self::Corners),
            "corners_edges" => Ok(Self::CornersEdges),
            "corners_edges_faces" => Ok(Self::CornersEdgesFaces),
            "saturated" => Ok(Self::Saturated),
            _ => Err(format!("unknown constraint policy '{s}'")),
        }
    }
}

impl ConstraintPolicy {
    pub fn name(self) -> &'static str {
        match self {
            Self::Corners => "corners",
            Self::CornersEdges => "corners_edges",
            Self::CornersEdgesFaces => "corners_edges_faces",
            Self::Saturated => "saturated",
        }
    }
}

/// Dofs of `nodes` grouped by component; untagged dofs go into their own group
/// each.
fn component_groups(problem: &LevelProblem, nodes: &[usize]) -> Vec<(Option<u8>, Vec<usize>)> {
    let mut groups: Vec<(Option<u8>, Vec<usize>)> = Vec::new();
    for &n in nodes {
        let node = &problem.nodes[n];
        for (&d, &c) in node.dofs.iter().zip(&node.comps) {
            if c.is_none() {
                continue;
            }
            match groups.iter_mut().find(|(gc, _)| *gc == c) {
                Some((_, list)) => list.push(d),
                None => groups.push((c, vec![d])),
            }
        }
    }
    groups.sort_by_key(|(c, _)| *c);
    for (_, l) in groups.iter_mut() {
        l.sort_unstable();
    }
    groups
}

/// Corner values and the averages selected by `policy`, in glob order.
/// With `edge_include_corners` the corner nodes taken out of an edge are
/// included in its average.
pub fn initial_constraints(
    problem: &LevelProblem,
    iface: &Interface,
    policy: ConstraintPolicy,
    edge_include_corners: bool,
) -> Vec<CoarseDof> {
    let mut out = Vec::new();
    for (g, glob) in iface.globs.iter().enumerate() {
        match glob.kind {
            GlobKind::Corner => {
                for &n in &glob.nodes {
                    let node = &problem.nodes[n];
                    for (&d, &c) in node.dofs.iter().zip(&node.comps) {
                        out.push(CoarseDof {
                            kind: ConstraintKind::Corner,
                            glob: g,
                            subdomains: glob.subdomains.clone(),
                            support: vec![(d, 1.0)],
                            comp: c,
                        });
                    }
                }
            }
            GlobKind::Edge | GlobKind::Face => {
                let wanted = match glob.kind {
                    GlobKind::Edge => policy != ConstraintPolicy::Corners,
                    _ => policy == ConstraintPolicy::CornersEdgesFaces,
                };
                if !wanted {
                    continue;
                }
                let mut nodes = glob.nodes.clone();
                if edge_include_corners && glob.kind == GlobKind::Edge {
                    nodes.extend(&glob.promoted);
                }
                let kind = if glob.kind == GlobKind::Edge { ConstraintKind::Edge } else { ConstraintKind::Face };
                for (comp, dofs) in component_groups(problem, &nodes) {
                    let w = 1.0 / (dofs.len() as f64).sqrt();
                    out.push(CoarseDof {
                        kind,
                        glob: g,
                        subdomains: glob.subdomains.clone(),
                        support: dofs.into_iter().map(|d| (d, w)).collect(),
                        comp,
                    });
                }
            }
        }
    }
    out
}

/// Appends candidate rows for glob `glob` after orthogonalizing them against
/// the rows the glob already carries and against each other; rows whose
/// remaining norm falls below `rel_tol` times the largest candidate norm are
/// dropped. `dofs` lists the level dofs indexing the columns of `rows`.
/// Returns the number of rows added.
pub fn append_glob_rows(
    coarse: &mut Vec<CoarseDof>,
    iface: &Interface,
    glob: usize,
    dofs: &[usize],
    rows: &DMatrix<f64>,
    rel_tol: f64,
) -> usize {
    let max_norm = (0..rows.nrows()).map(|i| rows.row(i).norm()).fold(0.0, f64::max);
    if max_norm == 0.0 {
        return 0;
    }
    let col_of = |d: usize| dofs.binary_search(&d).ok();
    let existing: Vec<DMatrix<f64>> = coarse
        .iter()
        .filter(|c| c.glob == glob)
        .map(|c| {
            let mut r = DMatrix::zeros(1, dofs.len());
            for &(d, w) in &c.support {
                if let Some(j) = col_of(d) {
                    r[(0, j)] = w;
                }
            }
            let nrm = r.norm();
            if nrm > 0.0 {
                r /= nrm;
            }
            r
        })
        .collect();
    let mut work = rows.clone();
    for _ in 0..2 {
        for e in &existing {
            for i in 0..work.nrows() {
                let c = e.row(0).dot(&work.row(i));
                let upd = work.row(i) - e.row(0) * c;
                work.set_row(i, &upd);
            }
        }
    }
    let (q, r) = reduced_qr_rows_abs(&work, rel_tol * max_norm);
    let subs = iface.globs[glob].subdomains.clone();
    for i in 0..r {
        let support: Vec<(usize, f64)> =
            dofs.iter().enumerate().filter(|(j, _)| q[(i, *j)] != 0.0).map(|(j, &d)| (d, q[(i, j)])).collect();
        coarse.push(CoarseDof { kind: ConstraintKind::Adaptive, glob, subdomains: subs.clone(), support, comp: None });
    }
    r
}

/// Sorts coarse dofs by glob, keeping creation order within a glob.
pub fn order_by_glob(coarse: &mut [CoarseDof]) {
    coarse.sort_by_key(|c| c.glob);
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{assemble, build_cube_mesh, BoundarySpec, Formulation, MaterialField};
    use crate::partition::{classify_interface, partition_regular, select_corners};

    fn setup(form: Formulation) -> (LevelProblem, Interface) {
        let m = build_cube_mesh(4);
        let p = assemble(&m, &MaterialField::uniform(64, 1.0, 0.3), form, &BoundarySpec::default()).unwrap().level;
        let mut i = classify_interface(&p, &partition_regular(4, 2).unwrap());
        select_corners(&p, &mut i).unwrap();
        (p, i)
    }

    #[test]
    fn policy_counts() {
        let (p, i) = setup(Formulation::Poisson);
        let corners = i.count(GlobKind::Corner);
        let edges = i.count(GlobKind::Edge);
        let faces = i.count(GlobKind::Face);
        assert_eq!(initial_constraints(&p, &i, ConstraintPolicy::Corners, false).len(), corners);
        assert_eq!(initial_constraints(&p, &i, ConstraintPolicy::CornersEdges, false).len(), corners + edges);
        assert_eq!(
            initial_constraints(&p, &i, ConstraintPolicy::CornersEdgesFaces, false).len(),
            corners + edges + faces
        );
    }

    #[test]
    fn averages_are_normalized() {
        let (p, i) = setup(Formulation::Elasticity);
        for c in initial_constraints(&p, &i, ConstraintPolicy::CornersEdgesFaces, false) {
            let n: f64 = c.support.iter().map(|(_, w)| w * w).sum();
            assert!((n - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn dependent_rows_are_dropped() {
        let (p, i) = setup(Formulation::Poisson);
        let mut coarse = initial_constraints(&p, &i, ConstraintPolicy::CornersEdgesFaces, false);
        let g = i.globs.iter().position(|g| g.kind == GlobKind::Face).unwrap();
        let dofs: Vec<usize> = i.globs[g].nodes.iter().flat_map(|&n| p.nodes[n].dofs.clone()).collect();
        let nd = dofs.len();
        // the face average again, plus one new direction twice
        let mut rows = DMatrix::zeros(3, nd);
        rows.row_mut(0).fill(2.0);
        rows[(1, 0)] = 1.0;
        rows[(2, 0)] = 3.0;
        let before = coarse.len();
        assert_eq!(append_glob_rows(&mut coarse, &i, g, &dofs, &rows, 1e-10), 1);
        assert_eq!(coarse.len(), before + 1);
        let new = coarse.last().unwrap();
        let sum: f64 = new.support.iter().map(|(_, w)| w).sum();
        assert!(sum.abs() < 1e-12);
    }
}
