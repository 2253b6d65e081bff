//! One level of the hierarchy viewed as a finite-element problem: elements
//! with dense matrices over global dofs, and nodes grouping dofs.
//!
//! Level 1 elements are hexahedra; on level `i + 1` the elements are the
//! level-`i` substructures with their coarse matrices and the nodes are the
//! level-`i` globs carrying coarse dofs.

use std::sync::Arc;

use nalgebra::DMatrix;

use crate::linalg::{CsrMatrix, SymSparseMatrix};

/// A group of dofs located at one point (a mesh node, or a coarse glob).
#[derive(Debug, Clone, PartialEq)]
pub struct Node {
    pub dofs: Vec<usize>,
    /// Displacement component of each dof, when it has one.
    pub comps: Vec<Option<u8>>,
    pub coord: [f64; 3],
}

#[derive(Debug, Clone)]
pub struct ElementBlock {
    pub nodes: Vec<usize>,
    /// Global dof of each row of `matrix`; `None` marks eliminated dofs.
    pub dofs: Vec<Option<usize>>,
    pub matrix: Arc<DMatrix<f64>>,
}

#[derive(Debug, Clone)]
pub struct LevelProblem {
    pub n_dofs: usize,
    pub elements: Vec<ElementBlock>,
    pub nodes: Vec<Node>,
    /// Rigid body modes (or constants) evaluated on this level's dofs.
    pub rigid: DMatrix<f64>,
    pub matrix: SymSparseMatrix,
    pub dof_node: Vec<usize>,
}

impl LevelProblem {
    pub fn new(n_dofs: usize, elements: Vec<ElementBlock>, nodes: Vec<Node>, rigid: DMatrix<f64>) -> Self {
        let matrix = assemble_blocks(n_dofs, &elements);
        let mut dof_node = vec![usize::MAX; n_dofs];
        for (i, nd) in nodes.iter().enumerate() {
            for &d in &nd.dofs {
                dof_node[d] = i;
            }
        }
        Self { n_dofs, elements, nodes, rigid, matrix, dof_node }
    }

    pub fn n_elements(&self) -> usize {
        self.elements.len()
    }

    /// Node → elements incidence, elements in increasing order.
    pub fn node_elements(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.nodes.len()];
        for (e, el) in self.elements.iter().enumerate() {
            for &n in &el.nodes {
                if out[n].last() != Some(&e) {
                    out[n].push(e);
                }
            }
        }
        out
    }

    /// Elements are adjacent when they share a node.
    pub fn element_adjacency(&self) -> Vec<Vec<usize>> {
        let ne = self.node_elements();
        let mut adj = vec![Vec::new(); self.elements.len()];
        for list in &ne {
            for &a in list {
                for &b in list {
                    if a != b {
                        adj[a].push(b);
                    }
                }
            }
        }
        for l in adj.iter_mut() {
            l.sort_unstable();
            l.dedup();
        }
        adj
    }

    /// Number of rigid modes carried by this level.
    pub fn n_modes(&self) -> usize {
        self.rigid.ncols()
    }
}

/// Assembles element blocks into a symmetric sparse matrix, summing
/// contributions in element order.
pub fn assemble_blocks(n: usize, elements: &[ElementBlock]) -> SymSparseMatrix {
    // dof → elements incidence
    let mut counts = vec![0usize; n + 1];
    for el in elements {
        for d in el.dofs.iter().flatten() {
            counts[d + 1] += 1;
        }
    }
    for i in 0..n {
        counts[i + 1] += counts[i];
    }
    let mut next = counts.clone();
    let mut inc = vec![0usize; counts[n]];
    for (e, el) in elements.iter().enumerate() {
        for d in el.dofs.iter().flatten() {
            inc[next[*d]] = e;
            next[*d] += 1;
        }
    }
    // row patterns
    let mut marker = vec![usize::MAX; n];
    let mut indptr = Vec::with_capacity(n + 1);
    let mut indices = Vec::new();
    indptr.push(0);
    for i in 0..n {
        let start = indices.len();
        for &e in &inc[counts[i]..counts[i + 1]] {
            for d in elements[e].dofs.iter().flatten() {
                if marker[*d] != i {
                    marker[*d] = i;
                    indices.push(*d);
                }
            }
        }
        indices[start..].sort_unstable();
        indptr.push(indices.len());
    }
    let mut values = vec![0.0; indices.len()];
    for el in elements {
        let k = &el.matrix;
        for (a, da) in el.dofs.iter().enumerate() {
            let Some(i) = *da else { continue };
            let row = &indices[indptr[i]..indptr[i + 1]];
            for (b, db) in el.dofs.iter().enumerate() {
                let Some(j) = *db else { continue };
                let v = k[(a, b)];
                if v != 0.0 {
                    let pos = row.binary_search(&j).unwrap();
                    values[indptr[i] + pos] += v;
                }
            }
        }
    }
    SymSparseMatrix::from_csr_unchecked(CsrMatrix::from_raw(n, n, indptr, indices, values))
}
