//! Decomposition of a level into substructures, interface classification into
//! globs, face-adjacent pairs and corner selection.

use std::collections::{BTreeMap, VecDeque};
use std::fmt::Write as _;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::level::LevelProblem;
use crate::linalg::numerical_rank;

#[derive(Debug, Error)]
pub enum PartitionError {
    #[error("{n} elements per axis are not divisible by {k} subdomains per axis")]
    NotDivisible { n: usize, k: usize },
    #[error("pair ({s}, {t}) has no candidate nodes that remove its relative rigid body modes (rank {rank} < {needed})")]
    InsufficientCandidates { s: usize, t: usize, rank: usize, needed: usize },
    #[error("invalid partition: {0}")]
    Invalid(String),
}

/// Element → subdomain assignment of one level.
#[derive(Debug, Clone, PartialEq)]
pub struct Decomposition {
    pub n_sub: usize,
    pub element_sub: Vec<usize>,
    /// Subdomains per axis when the decomposition is a regular box grid of a
    /// structured grid of `elements_per_axis` elements.
    pub regular: Option<RegularGrid>,
    /// Subdomains created by splitting disconnected parts.
    pub split_parts: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RegularGrid {
    pub elements_per_axis: [usize; 3],
    pub subs_per_axis: [usize; 3],
}

impl Decomposition {
    pub fn members(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.n_sub];
        for (e, &s) in self.element_sub.iter().enumerate() {
            out[s].push(e);
        }
        out
    }

    /// Single subdomain containing every element.
    pub fn trivial(n_elements: usize) -> Self {
        Self { n_sub: 1, element_sub: vec![0; n_elements], regular: None, split_parts: 0 }
    }
}

/// Regular `k × k × k` partition of an `n³` element grid (x fastest).
pub fn partition_regular(n: usize, k: usize) -> Result<Decomposition, PartitionError> {
    partition_box([n; 3], [k; 3])
}

/// Regular box partition of an `n[0] × n[1] × n[2]` element grid.
pub fn partition_box(n: [usize; 3], k: [usize; 3]) -> Result<Decomposition, PartitionError> {
    for a in 0..3 {
        if k[a] == 0 || n[a] % k[a] != 0 {
            return Err(PartitionError::NotDivisible { n: n[a], k: k[a] });
        }
    }
    let h = [n[0] / k[0], n[1] / k[1], n[2] / k[2]];
    let mut element_sub = Vec::with_capacity(n[0] * n[1] * n[2]);
    for z in 0..n[2] {
        for y in 0..n[1] {
            for x in 0..n[0] {
                element_sub.push(x / h[0] + k[0] * (y / h[1] + k[1] * (z / h[2])));
            }
        }
    }
    Ok(Decomposition {
        n_sub: k[0] * k[1] * k[2],
        element_sub,
        regular: Some(RegularGrid { elements_per_axis: n, subs_per_axis: k }),
        split_parts: 0,
    })
}

/// Partition of a graph into `parts` connected, balanced parts by recursive
/// bisection (greedy growing from a pseudo-peripheral vertex followed by
/// Fiduccia–Mattheyses refinement). Parts found disconnected are split.
pub fn partition_graph(adj: &[Vec<usize>], parts: usize) -> Decomposition {
    let n = adj.len();
    let parts = parts.clamp(1, n.max(1));
    let mut part = vec![0usize; n];
    let all: Vec<usize> = (0..n).collect();
    let mut next_id = 0;
    bisect_recursive(adj, &all, parts, &mut part, &mut next_id);
    let (part, n_sub, split) = split_disconnected(adj, &part);
    Decomposition { n_sub, element_sub: part, regular: None, split_parts: split }
}

fn bisect_recursive(adj: &[Vec<usize>], verts: &[usize], parts: usize, out: &mut [usize], next_id: &mut usize) {
    if parts <= 1 || verts.len() <= 1 {
        for &v in verts {
            out[v] = *next_id;
        }
        *next_id += 1;
        return;
    }
    let p1 = parts / 2;
    let target = (verts.len() * p1 + parts / 2) / parts;
    let side = bisect(adj, verts, target.max(1));
    let a: Vec<usize> = verts.iter().zip(&side).filter(|(_, &s)| !s).map(|(&v, _)| v).collect();
    let b: Vec<usize> = verts.iter().zip(&side).filter(|(_, &s)| s).map(|(&v, _)| v).collect();
    bisect_recursive(adj, &a, p1, out, next_id);
    bisect_recursive(adj, &b, parts - p1, out, next_id);
}

/// Splits `verts` into a part of size `target` (false) and the rest (true).
fn bisect(adj: &[Vec<usize>], verts: &[usize], target: usize) -> Vec<bool> {
    let m = verts.len();
    let mut local = vec![usize::MAX; adj.len()];
    for (i, &v) in verts.iter().enumerate() {
        local[v] = i;
    }
    let ladj: Vec<Vec<usize>> = verts
        .iter()
        .map(|&v| adj[v].iter().filter_map(|&w| (local[w] != usize::MAX).then(|| local[w])).collect())
        .collect();

    // pseudo-peripheral start: repeated BFS from the farthest vertex
    let bfs_far = |start: usize| -> usize {
        let mut dist = vec![usize::MAX; m];
        let mut q = VecDeque::from([start]);
        dist[start] = 0;
        let mut last = start;
        while let Some(v) = q.pop_front() {
            last = v;
            for &w in &ladj[v] {
                if dist[w] == usize::MAX {
                    dist[w] = dist[v] + 1;
                    q.push_back(w);
                }
            }
        }
        last
    };
    let start = bfs_far(bfs_far(0));

    // greedy growing: add the frontier vertex with most edges into the region
    let mut in_a = vec![false; m];
    let mut gain = vec![0i64; m];
    let mut size = 0;
    let mut frontier: std::collections::BTreeSet<(i64, usize)> = std::collections::BTreeSet::new();
    let mut seen = vec![false; m];
    let add = |v: usize, in_a: &mut Vec<bool>, frontier: &mut std::collections::BTreeSet<(i64, usize)>, gain: &mut Vec<i64>, seen: &mut Vec<bool>| {
        in_a[v] = true;
        for &w in &ladj[v] {
            if in_a[w] {
                continue;
            }
            if seen[w] {
                frontier.remove(&(-gain[w], w));
            }
            seen[w] = true;
            gain[w] += 1;
            frontier.insert((-gain[w], w));
        }
    };
    seen[start] = true;
    add(start, &mut in_a, &mut frontier, &mut gain, &mut seen);
    size += 1;
    while size < target {
        let v = match frontier.pop_first() {
            Some((_, v)) => v,
            // disconnected remainder: restart from the lowest unassigned vertex
            None => match (0..m).find(|&v| !in_a[v]) {
                Some(v) => v,
                None => break,
            },
        };
        if in_a[v] {
            continue;
        }
        add(v, &mut in_a, &mut frontier, &mut gain, &mut seen);
        size += 1;
    }

    fm_refine(&ladj, &mut in_a, target);
    in_a.iter().map(|&a| !a).collect()
}

/// Boundary Fiduccia–Mattheyses passes keeping `|A|` within 10% of target.
fn fm_refine(adj: &[Vec<usize>], in_a: &mut [bool], target: usize) {
    let m = adj.len();
    let slack = target / 10;
    let cut = |in_a: &[bool]| -> usize {
        (0..m).map(|v| adj[v].iter().filter(|&&w| in_a[w] != in_a[v]).count()).sum::<usize>() / 2
    };
    for _pass in 0..8 {
        let mut locked = vec![false; m];
        let mut size_a = in_a.iter().filter(|&&a| a).count();
        let start_cut = cut(in_a);
        let mut best_cut = start_cut;
        let mut moves: Vec<usize> = Vec::new();
        let mut best_len = 0;
        let mut cur_cut = start_cut as i64;
        for _ in 0..m.min(256) {
            let mut best: Option<(i64, usize)> = None;
            for v in 0..m {
                if locked[v] {
                    continue;
                }
                let ext = adj[v].iter().filter(|&&w| in_a[w] != in_a[v]).count() as i64;
                if ext == 0 {
                    continue;
                }
                let int = adj[v].len() as i64 - ext;
                let g = ext - int;
                let new_size = if in_a[v] { size_a - 1 } else { size_a + 1 };
                if new_size == 0 || new_size == m || new_size + slack < target || new_size > target + slack {
                    continue;
                }
                if best.map_or(true, |(bg, bv)| g > bg || (g == bg && v < bv)) {
                    best = Some((g, v));
                }
            }
            let Some((g, v)) = best else { break };
            locked[v] = true;
            in_a[v] = !in_a[v];
            size_a = if in_a[v] { size_a + 1 } else { size_a - 1 };
            cur_cut -= g;
            moves.push(v);
            if (cur_cut as usize) < best_cut || (cur_cut as usize == best_cut && size_a == target) {
                best_cut = cur_cut as usize;
                best_len = moves.len();
            }
        }
        for &v in moves[best_len..].iter().rev() {
            in_a[v] = !in_a[v];
        }
        if best_cut >= start_cut {
            break;
        }
    }
}

/// Relabels parts so each is connected; returns `(labels, count, extra)`.
fn split_disconnected(adj: &[Vec<usize>], part: &[usize]) -> (Vec<usize>, usize, usize) {
    let n = part.len();
    let mut label = vec![usize::MAX; n];
    let mut count = 0;
    let mut per_part: BTreeMap<usize, usize> = BTreeMap::new();
    for v in 0..n {
        if label[v] != usize::MAX {
            continue;
        }
        *per_part.entry(part[v]).or_default() += 1;
        let mut q = VecDeque::from([v]);
        label[v] = count;
        while let Some(x) = q.pop_front() {
            for &w in &adj[x] {
                if label[w] == usize::MAX && part[w] == part[x] {
                    label[w] = count;
                    q.push_back(w);
                }
            }
        }
        count += 1;
    }
    let extra = per_part.values().map(|&c| c - 1).sum();
    (label, count, extra)
}

/// Coarsens a decomposition for the next level: level-`i` subdomains become
/// elements. Regular grids are coarsened regularly when divisible, otherwise
/// the subdomain adjacency graph is partitioned.
pub fn coarsen(prev: &Decomposition, next_problem: &LevelProblem, parts: usize) -> Decomposition {
    if let Some(g) = prev.regular {
        let k = g.subs_per_axis;
        // most cube-like box grid dividing the previous one
        let mut best: Option<([usize; 3], usize)> = None;
        for a in (1..=k[0]).filter(|a| k[0] % a == 0) {
            for b in (1..=k[1]).filter(|b| k[1] % b == 0) {
                if parts % (a * b) != 0 {
                    continue;
                }
                let c = parts / (a * b);
                if c == 0 || k[2] % c != 0 {
                    continue;
                }
                let spread = a.max(b).max(c) - a.min(b).min(c);
                if best.map_or(true, |(_, s)| spread < s) {
                    best = Some(([a, b, c], spread));
                }
            }
        }
        if let Some((split, _)) = best {
            if let Ok(d) = partition_box(k, split) {
                return d;
            }
        }
    }
    partition_graph(&next_problem.element_adjacency(), parts)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GlobKind {
    Corner,
    Edge,
    Face,
}

impl GlobKind {
    pub fn name(self) -> &'static str {
        match self {
            GlobKind::Corner => "corner",
            GlobKind::Edge => "edge",
            GlobKind::Face => "face",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Glob {
    pub kind: GlobKind,
    pub nodes: Vec<usize>,
    pub subdomains: Vec<usize>,
    /// Single node split off a larger group by connectivity (audit flag).
    pub degraded: bool,
    /// Corner nodes that were selected out of this glob.
    pub promoted: Vec<usize>,
}

/// Face-adjacent pair `s < t` with the face globs they share.
#[derive(Debug, Clone, PartialEq)]
pub struct Pair {
    pub s: usize,
    pub t: usize,
    pub faces: Vec<usize>,
}

#[derive(Debug, Clone)]
pub struct Interface {
    pub globs: Vec<Glob>,
    /// Glob containing each node (`None` for interior or dof-free nodes).
    pub node_glob: Vec<Option<usize>>,
    /// Sorted subdomains touching each node.
    pub node_subs: Vec<Vec<usize>>,
    pub pairs: Vec<Pair>,
}

impl Interface {
    pub fn is_interface_node(&self, node: usize) -> bool {
        self.node_glob[node].is_some()
    }

    pub fn count(&self, kind: GlobKind) -> usize {
        self.globs.iter().filter(|g| g.kind == kind).count()
    }

    /// Number of face globs, `n_f`.
    pub fn n_faces(&self) -> usize {
        self.count(GlobKind::Face)
    }

    pub fn interface_nodes(&self) -> Vec<usize> {
        (0..self.node_glob.len()).filter(|&n| self.node_glob[n].is_some()).collect()
    }

    /// Nodes shared by both `s` and `t` (their common interface closure).
    pub fn pair_closure(&self, s: usize, t: usize) -> Vec<usize> {
        (0..self.node_subs.len())
            .filter(|&n| self.node_glob[n].is_some() && self.node_subs[n].contains(&s) && self.node_subs[n].contains(&t))
            .collect()
    }

    /// Glob report: `glob,kind,size,subdomains,degraded`.
    pub fn glob_csv(&self) -> String {
        let mut s = String::from("glob,kind,size,subdomains,degraded\n");
        for (i, g) in self.globs.iter().enumerate() {
            let subs: Vec<String> = g.subdomains.iter().map(|v| v.to_string()).collect();
            writeln!(s, "{},{},{},{},{}", i, g.kind.name(), g.nodes.len(), subs.join(" "), g.degraded).unwrap();
        }
        s
    }

    /// Removes `node` from its glob and makes it a corner glob of its own.
    fn promote(&mut self, node: usize) {
        let g = self.node_glob[node].expect("promoting a non-interface node");
        if self.globs[g].kind == GlobKind::Corner {
            return;
        }
        self.globs[g].nodes.retain(|&v| v != node);
        self.globs[g].promoted.push(node);
        let id = self.globs.len();
        self.globs.push(Glob {
            kind: GlobKind::Corner,
            nodes: vec![node],
            subdomains: self.node_subs[node].clone(),
            degraded: false,
            promoted: Vec::new(),
        });
        self.node_glob[node] = Some(id);
    }

    /// Drops globs emptied by promotion and renumbers deterministically.
    fn compact(&mut self) {
        let mut order: Vec<usize> = (0..self.globs.len()).filter(|&g| !self.globs[g].nodes.is_empty()).collect();
        order.sort_by_key(|&g| (self.globs[g].nodes[0], self.globs[g].kind));
        let mut new_id = vec![usize::MAX; self.globs.len()];
        let mut globs = Vec::with_capacity(order.len());
        for (i, &g) in order.iter().enumerate() {
            new_id[g] = i;
            globs.push(self.globs[g].clone());
        }
        for v in self.node_glob.iter_mut().flatten() {
            *v = new_id[*v];
        }
        self.globs = globs;
        self.pairs = enumerate_pairs(&self.globs);
    }
}

/// Groups interface nodes by sharing set and splits groups into connected
/// components (nodes connected through a common element). Sets of size two
/// are faces, larger sets edges, and single nodes shared by more than two
/// subdomains corners.
pub fn classify_interface(problem: &LevelProblem, dec: &Decomposition) -> Interface {
    let n_nodes = problem.nodes.len();
    let node_elems = problem.node_elements();
    let mut node_subs: Vec<Vec<usize>> = node_elems
        .iter()
        .map(|els| {
            let mut s: Vec<usize> = els.iter().map(|&e| dec.element_sub[e]).collect();
            s.sort_unstable();
            s.dedup();
            s
        })
        .collect();
    for (n, subs) in node_subs.iter_mut().enumerate() {
        if problem.nodes[n].dofs.is_empty() {
            subs.clear();
        }
    }
    let mut groups: BTreeMap<&[usize], Vec<usize>> = BTreeMap::new();
    for n in 0..n_nodes {
        if node_subs[n].len() >= 2 {
            groups.entry(node_subs[n].as_slice()).or_default().push(n);
        }
    }
    let mut globs = Vec::new();
    let mut node_glob = vec![None; n_nodes];
    let mut comp = vec![usize::MAX; n_nodes];
    for (subs, nodes) in &groups {
        let mut member = std::collections::HashSet::with_capacity(nodes.len());
        member.extend(nodes.iter().copied());
        let mut components: Vec<Vec<usize>> = Vec::new();
        for &start in nodes {
            if comp[start] != usize::MAX {
                continue;
            }
            let id = components.len();
            let mut list = vec![start];
            comp[start] = id;
            let mut q = VecDeque::from([start]);
            while let Some(v) = q.pop_front() {
                for &e in &node_elems[v] {
                    for &w in &problem.elements[e].nodes {
                        if comp[w] == usize::MAX && member.contains(&w) {
                            comp[w] = id;
                            list.push(w);
                            q.push_back(w);
                        }
                    }
                }
            }
            list.sort_unstable();
            components.push(list);
        }
        let split = components.len() > 1;
        for list in components {
            let kind = if subs.len() == 2 {
                GlobKind::Face
            } else if list.len() == 1 {
                GlobKind::Corner
            } else {
                GlobKind::Edge
            };
            let degraded = kind == GlobKind::Corner && split;
            globs.push(Glob { kind, nodes: list, subdomains: subs.to_vec(), degraded, promoted: Vec::new() });
        }
    }
    globs.sort_by_key(|g| (g.nodes[0], g.kind));
    for (i, g) in globs.iter().enumerate() {
        for &n in &g.nodes {
            node_glob[n] = Some(i);
        }
    }
    let pairs = enumerate_pairs(&globs);
    Interface { globs, node_glob, node_subs, pairs }
}

/// One entry per face-adjacent pair, sorted lexicographically.
pub fn enumerate_pairs(globs: &[Glob]) -> Vec<Pair> {
    let mut map: BTreeMap<(usize, usize), Vec<usize>> = BTreeMap::new();
    for (i, g) in globs.iter().enumerate() {
        if g.kind == GlobKind::Face {
            map.entry((g.subdomains[0], g.subdomains[1])).or_default().push(i);
        }
    }
    map.into_iter().map(|((s, t), faces)| Pair { s, t, faces }).collect()
}

/// Rigid-mode rows at the dofs of `nodes`.
fn mode_rows(problem: &LevelProblem, nodes: &[usize]) -> DMatrix<f64> {
    let dofs: Vec<usize> = nodes.iter().flat_map(|&n| problem.nodes[n].dofs.iter().copied()).collect();
    DMatrix::from_fn(dofs.len(), problem.n_modes(), |i, j| problem.rigid[(dofs[i], j)])
}

const RANK_TOL: f64 = 1e-8;

fn dist2(a: [f64; 3], b: [f64; 3]) -> f64 {
    (0..3).map(|c| (a[c] - b[c]).powi(2)).sum()
}

/// Selects corner nodes so that, for every pair, the rigid modes evaluated at
/// the corners on the pair's common interface have full rank. Existing
/// corners are kept; new ones are taken greedily (edge nodes before face
/// nodes) maximizing the distance to the corners already chosen.
pub fn select_corners(problem: &LevelProblem, iface: &mut Interface) -> Result<Vec<usize>, PartitionError> {
    let needed = problem.n_modes();
    let pairs = iface.pairs.clone();
    for p in &pairs {
        let closure = iface.pair_closure(p.s, p.t);
        let full_rank = numerical_rank(&mode_rows(problem, &closure), RANK_TOL);
        if full_rank < needed {
            return Err(PartitionError::InsufficientCandidates { s: p.s, t: p.t, rank: full_rank, needed });
        }
        let is_corner = |iface: &Interface, n: usize| iface.globs[iface.node_glob[n].unwrap()].kind == GlobKind::Corner;
        let mut chosen: Vec<usize> = closure.iter().copied().filter(|&n| is_corner(iface, n)).collect();
        let mut rank = numerical_rank(&mode_rows(problem, &chosen), RANK_TOL);
        while rank < needed {
            let centroid = {
                let mut c = [0.0; 3];
                for &n in &closure {
                    for a in 0..3 {
                        c[a] += problem.nodes[n].coord[a] / closure.len() as f64;
                    }
                }
                c
            };
            let score = |n: usize| -> f64 {
                let x = problem.nodes[n].coord;
                if chosen.is_empty() {
                    dist2(x, centroid)
                } else {
                    chosen.iter().map(|&c| dist2(x, problem.nodes[c].coord)).fold(f64::INFINITY, f64::min)
                }
            };
            let mut cands: Vec<(u8, f64, usize)> = closure
                .iter()
                .copied()
                .filter(|&n| !chosen.contains(&n))
                .map(|n| {
                    let tier = if iface.globs[iface.node_glob[n].unwrap()].kind == GlobKind::Face { 1 } else { 0 };
                    (tier, -score(n), n)
                })
                .collect();
            cands.sort_by(|a, b| a.0.cmp(&b.0).then(a.1.total_cmp(&b.1)).then(a.2.cmp(&b.2)));
            let mut accepted = false;
            for &(_, _, n) in &cands {
                let mut trial = chosen.clone();
                trial.push(n);
                let r = numerical_rank(&mode_rows(problem, &trial), RANK_TOL);
                if r > rank {
                    chosen.push(n);
                    rank = r;
                    iface.promote(n);
                    accepted = true;
                    break;
                }
            }
            if !accepted {
                return Err(PartitionError::InsufficientCandidates { s: p.s, t: p.t, rank, needed });
            }
        }
    }
    iface.compact();
    Ok((0..iface.node_glob.len())
        .filter(|&n| iface.node_glob[n].is_some_and(|g| iface.globs[g].kind == GlobKind::Corner))
        .collect())
}

/// Makes every interface node a corner (the saturated coarse space).
pub fn saturate_corners(iface: &mut Interface) {
    for n in iface.interface_nodes() {
        iface.promote(n);
    }
    iface.compact();
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{assemble, build_cube_mesh, BoundarySpec, Formulation, MaterialField};

    fn free_problem(n: usize, form: Formulation) -> LevelProblem {
        let m = build_cube_mesh(n);
        assemble(&m, &MaterialField::uniform(m.n_elements(), 1.0, 0.3), form, &BoundarySpec::default())
            .unwrap()
            .level
    }

    #[test]
    fn regular_counts() {
        let d = partition_regular(4, 2).unwrap();
        assert_eq!(d.n_sub, 8);
        assert!(d.members().iter().all(|m| m.len() == 8));
        assert_eq!(partition_regular(4, 1).unwrap().n_sub, 1);
        assert!(matches!(partition_regular(6, 4), Err(PartitionError::NotDivisible { .. })));
    }

    #[test]
    fn glob_counts() {
        let p = free_problem(4, Formulation::Poisson);
        let i = classify_interface(&p, &partition_box([4; 3], [2, 1, 1]).unwrap());
        assert_eq!((i.count(GlobKind::Face), i.count(GlobKind::Edge), i.count(GlobKind::Corner)), (1, 0, 0));
        let i = classify_interface(&p, &partition_box([4; 3], [2, 2, 1]).unwrap());
        assert_eq!((i.count(GlobKind::Face), i.count(GlobKind::Edge), i.count(GlobKind::Corner)), (4, 1, 0));
        let i = classify_interface(&p, &partition_regular(4, 2).unwrap());
        assert_eq!((i.count(GlobKind::Face), i.count(GlobKind::Edge), i.count(GlobKind::Corner)), (12, 6, 1));
        assert_eq!(i.pairs.len(), 12);
        assert_eq!(i.pairs[0].s, 0);
    }

    #[test]
    fn path_graph_bisection() {
        let adj = vec![vec![1], vec![0, 2], vec![1, 3], vec![2]];
        let d = partition_graph(&adj, 2);
        assert_eq!(d.n_sub, 2);
        assert_eq!(d.element_sub[0], d.element_sub[1]);
        assert_eq!(d.element_sub[2], d.element_sub[3]);
        assert_ne!(d.element_sub[0], d.element_sub[2]);
    }

    #[test]
    fn identity_partition() {
        let adj = vec![vec![1], vec![0, 2], vec![1]];
        let d = partition_graph(&adj, 3);
        let mut s = d.element_sub.clone();
        s.sort_unstable();
        assert_eq!(s, vec![0, 1, 2]);
    }

    #[test]
    fn elasticity_corners_have_full_rank() {
        let p = free_problem(4, Formulation::Elasticity);
        let mut i = classify_interface(&p, &partition_regular(4, 2).unwrap());
        select_corners(&p, &mut i).unwrap();
        for pair in &i.pairs {
            let corners: Vec<usize> = i
                .pair_closure(pair.s, pair.t)
                .into_iter()
                .filter(|&n| i.globs[i.node_glob[n].unwrap()].kind == GlobKind::Corner)
                .collect();
            assert_eq!(numerical_rank(&mode_rows(&p, &corners), RANK_TOL), 6);
        }
        assert_eq!(i.n_faces(), 12);
    }

    #[test]
    fn colinear_interface_rejected() {
        // only the interface nodes on the line z = 0 carry dofs: colinear
        let m = build_cube_mesh(2);
        let mut p = assemble(&m, &MaterialField::uniform(8, 1.0, 0.3), Formulation::Elasticity, &BoundarySpec::default())
            .unwrap()
            .level;
        for node in p.nodes.iter_mut() {
            let c = node.coord;
            if (c[0] - 0.5).abs() < 1e-12 && c[2] != 0.0 {
                node.dofs.clear();
                node.comps.clear();
            }
        }
        let mut i = classify_interface(&p, &partition_box([2; 3], [2, 1, 1]).unwrap());
        assert!(matches!(select_corners(&p, &mut i), Err(PartitionError::InsufficientCandidates { .. })));
    }
}
