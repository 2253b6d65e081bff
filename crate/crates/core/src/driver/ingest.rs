//! Assembled-matrix input: Matrix Market matrix and right-hand side, a
//! dof-to-subdomain partition and optional dof coordinates.
//!
//! Partition file: one line per dof. A single id assigns the dof to one
//! subdomain; the dofs coupled to a higher-numbered subdomain are then shared
//! with it. A line with several ids gives the full sharing set directly.
//!
//! Coordinates file: one line per dof, `x y z` or `x y z comp`. Dofs with
//! equal coordinates form a node. Without coordinates every dof is its own
//! node and glob classification is purely algebraic.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;
use std::path::Path;
use std::sync::Arc;

use nalgebra::DMatrix;
use thiserror::Error;

use crate::level::{ElementBlock, LevelProblem, Node};
use crate::linalg::{mm, LinalgError, SymSparseMatrix};
use crate::mesh::{geometric_rigid_modes, Formulation, ProblemSystem};
use crate::partition::{classify_interface, Decomposition};

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("{file}: {source}")]
    Format { file: String, source: LinalgError },
    #[error("{file}: line {line}: {msg}")]
    Parse { file: String, line: usize, msg: String },
    #[error("partition mismatch: {0}")]
    PartitionMismatch(String),
    #[error("elasticity input needs a coordinates file with components")]
    MissingCoordinates,
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Problem read from files together with its level-1 decomposition.
#[derive(Debug, Clone)]
pub struct Ingested {
    pub system: ProblemSystem,
    pub decomposition: Decomposition,
}

fn read_lines(path: &Path) -> Result<Vec<String>, IngestError> {
    let text = std::fs::read_to_string(path)?;
    Ok(text.lines().map(str::to_string).collect())
}

/// Sharing set of every dof.
pub fn parse_partition(text: &str, matrix: &SymSparseMatrix, file: &str) -> Result<Vec<Vec<usize>>, IngestError> {
    let n = matrix.n();
    let mut sets = Vec::with_capacity(n);
    for (i, l) in text.lines().enumerate() {
        let l = l.trim();
        if l.starts_with('#') {
            continue;
        }
        if l.is_empty() {
            return Err(IngestError::PartitionMismatch(format!("dof {} has no subdomain (line {})", sets.len(), i + 1)));
        }
        let mut ids = Vec::new();
        for tok in l.split_whitespace() {
            ids.push(tok.parse::<usize>().map_err(|_| IngestError::Parse {
                file: file.into(),
                line: i + 1,
                msg: format!("bad subdomain id '{tok}'"),
            })?);
        }
        ids.sort_unstable();
        ids.dedup();
        sets.push(ids);
    }
    if sets.len() != n {
        return Err(IngestError::PartitionMismatch(format!("{} dofs in the matrix, {} in the partition", n, sets.len())));
    }
    if sets.iter().all(|s| s.len() == 1) {
        // owners only: share each dof with the higher-numbered owners it couples to
        let owner: Vec<usize> = sets.iter().map(|s| s[0]).collect();
        for i in 0..n {
            let (cols, _) = matrix.row(i);
            for &j in cols {
                if owner[j] > owner[i] {
                    sets[i].push(owner[j]);
                }
            }
            sets[i].sort_unstable();
            sets[i].dedup();
        }
    }
    let n_sub = sets.iter().flat_map(|s| s.iter()).max().map_or(0, |m| m + 1);
    let mut used = vec![false; n_sub];
    for s in &sets {
        for &id in s {
            used[id] = true;
        }
    }
    if let Some(id) = used.iter().position(|u| !u) {
        return Err(IngestError::PartitionMismatch(format!("subdomain {id} owns no dof")));
    }
    Ok(sets)
}

fn intersect(a: &[usize], b: &[usize]) -> Vec<usize> {
    a.iter().copied().filter(|x| b.binary_search(x).is_ok()).collect()
}

/// Splits `matrix` into per-subdomain pieces. An off-diagonal entry is shared
/// equally by the subdomains containing both dofs; a diagonal entry is split
/// in proportion to the off-diagonal magnitude each subdomain received, which
/// keeps diagonally dominant matrices diagonally dominant piece by piece.
/// Each piece becomes a group of 1×1 and 2×2 element blocks.
fn split_blocks(
    matrix: &SymSparseMatrix,
    sets: &[Vec<usize>],
    dof_node: &[usize],
) -> Result<(Vec<ElementBlock>, Vec<usize>), IngestError> {
    let n = matrix.n();
    let mut offdiag: Vec<HashMap<usize, f64>> = vec![HashMap::new(); n];
    let mut elements = Vec::new();
    let mut element_sub = Vec::new();
    for i in 0..n {
        let (cols, vals) = matrix.row(i);
        for (&j, &v) in cols.iter().zip(vals) {
            if j <= i || v == 0.0 {
                continue;
            }
            let common = intersect(&sets[i], &sets[j]);
            if common.is_empty() {
                return Err(IngestError::PartitionMismatch(format!(
                    "dofs {i} and {j} are coupled but share no subdomain"
                )));
            }
            let share = v / common.len() as f64;
            for &s in &common {
                *offdiag[i].entry(s).or_default() += share.abs();
                *offdiag[j].entry(s).or_default() += share.abs();
                let nodes = if dof_node[i] == dof_node[j] { vec![dof_node[i]] } else { vec![dof_node[i], dof_node[j]] };
                elements.push(ElementBlock {
                    nodes,
                    dofs: vec![Some(i), Some(j)],
                    matrix: Arc::new(DMatrix::from_row_slice(2, 2, &[0.0, share, share, 0.0])),
                });
                element_sub.push(s);
            }
        }
    }
    for i in 0..n {
        let a = matrix.get(i, i);
        let total: f64 = sets[i].iter().map(|s| offdiag[i].get(s).copied().unwrap_or(0.0)).sum();
        for &s in &sets[i] {
            let w = if total > 0.0 {
                offdiag[i].get(&s).copied().unwrap_or(0.0) / total
            } else {
                1.0 / sets[i].len() as f64
            };
            elements.push(ElementBlock {
                nodes: vec![dof_node[i]],
                dofs: vec![Some(i)],
                matrix: Arc::new(DMatrix::from_element(1, 1, a * w)),
            });
            element_sub.push(s);
        }
    }
    Ok((elements, element_sub))
}

/// Groups dofs into nodes by coordinates (and sharing set), or one node per
/// dof without coordinates.
fn build_nodes(
    n: usize,
    coords: Option<&[([f64; 3], Option<u8>)]>,
    sets: &[Vec<usize>],
    form: Formulation,
) -> Result<(Vec<Node>, Vec<usize>), IngestError> {
    let mut nodes: Vec<Node> = Vec::new();
    let mut dof_node = vec![0; n];
    match coords {
        None => {
            if form == Formulation::Elasticity {
                return Err(IngestError::MissingCoordinates);
            }
            for i in 0..n {
                dof_node[i] = i;
                nodes.push(Node { dofs: vec![i], comps: vec![Some(0)], coord: [0.0; 3] });
            }
        }
        Some(c) => {
            let mut key_node: BTreeMap<([u64; 3], &[usize]), usize> = BTreeMap::new();
            for i in 0..n {
                let (x, comp) = c[i];
                let comp = match (form, comp) {
                    (Formulation::Poisson, _) => Some(0),
                    (Formulation::Elasticity, Some(k)) => Some(k),
                    (Formulation::Elasticity, None) => return Err(IngestError::MissingCoordinates),
                };
                let key = ([x[0].to_bits(), x[1].to_bits(), x[2].to_bits()], sets[i].as_slice());
                let id = *key_node.entry(key).or_insert_with(|| {
                    nodes.push(Node { dofs: Vec::new(), comps: Vec::new(), coord: x });
                    nodes.len() - 1
                });
                nodes[id].dofs.push(i);
                nodes[id].comps.push(comp);
                dof_node[i] = id;
            }
        }
    }
    Ok((nodes, dof_node))
}

fn parse_coords(text: &str, n: usize, file: &str) -> Result<Vec<([f64; 3], Option<u8>)>, IngestError> {
    let mut out = Vec::with_capacity(n);
    for (i, l) in text.lines().enumerate() {
        let l = l.trim();
        if l.is_empty() || l.starts_with('#') {
            continue;
        }
        let bad = |msg: &str| IngestError::Parse { file: file.into(), line: i + 1, msg: msg.into() };
        let t: Vec<&str> = l.split_whitespace().collect();
        if t.len() != 3 && t.len() != 4 {
            return Err(bad("expected 'x y z' or 'x y z comp'"));
        }
        let mut x = [0.0; 3];
        for a in 0..3 {
            x[a] = t[a].parse().map_err(|_| bad("bad coordinate"))?;
        }
        let comp = match t.get(3) {
            Some(c) => Some(c.parse::<u8>().ok().filter(|&c| c < 3).ok_or_else(|| bad("component must be 0, 1 or 2"))?),
            None => None,
        };
        out.push((x, comp));
    }
    if out.len() != n {
        return Err(IngestError::Parse {
            file: file.into(),
            line: 0,
            msg: format!("{} coordinate lines for {} dofs", out.len(), n),
        });
    }
    Ok(out)
}

/// Builds the level-1 problem from an assembled matrix and a partition.
pub fn ingest_parts(
    matrix: SymSparseMatrix,
    rhs: Vec<f64>,
    sets: Vec<Vec<usize>>,
    coords: Option<Vec<([f64; 3], Option<u8>)>>,
    form: Formulation,
) -> Result<Ingested, IngestError> {
    let n = matrix.n();
    if rhs.len() != n {
        return Err(IngestError::Format {
            file: "rhs".into(),
            source: LinalgError::DimensionMismatch { expected: n, got: rhs.len() },
        });
    }
    let (nodes, dof_node) = build_nodes(n, coords.as_deref(), &sets, form)?;
    let (elements, element_sub) = split_blocks(&matrix, &sets, &dof_node)?;
    let rigid = geometric_rigid_modes(&nodes, n, form);
    let n_sub = sets.iter().flat_map(|s| s.iter()).max().map_or(0, |m| m + 1);
    let level = LevelProblem::new(n, elements, nodes, rigid);
    let system = ProblemSystem {
        formulation: form,
        level,
        rhs,
        free_index: (0..n).map(Some).collect(),
        prescribed: vec![0.0; n],
    };
    Ok(Ingested { system, decomposition: Decomposition { n_sub, element_sub, regular: None, split_parts: 0 } })
}

/// Reads the four input files.
pub fn ingest_external(
    matrix: &Path,
    rhs: &Path,
    partition: &Path,
    coords: Option<&Path>,
    form: Formulation,
) -> Result<Ingested, IngestError> {
    let name = |p: &Path| p.display().to_string();
    let a = mm::read_sym_matrix(std::fs::File::open(matrix)?)
        .map_err(|source| IngestError::Format { file: name(matrix), source })?;
    let b = mm::read_vector(std::fs::File::open(rhs)?).map_err(|source| IngestError::Format { file: name(rhs), source })?;
    let sets = parse_partition(&read_lines(partition)?.join("\n"), &a, &name(partition))?;
    let c = match coords {
        Some(p) => Some(parse_coords(&std::fs::read_to_string(p)?, a.n(), &name(p))?),
        None => None,
    };
    ingest_parts(a, b, sets, c, form)
}

/// Writes `matrix.mtx`, `rhs.mtx`, `partition.txt` (sharing sets) and
/// `coords.txt` for a level-1 problem and its decomposition.
pub fn export_external(dir: &Path, system: &ProblemSystem, dec: &Decomposition) -> Result<(), IngestError> {
    std::fs::create_dir_all(dir)?;
    let level = &system.level;
    fn wrap(file: &'static str) -> impl Fn(LinalgError) -> IngestError {
        move |source| IngestError::Format { file: file.into(), source }
    }
    mm::write_sym_matrix(&level.matrix, std::fs::File::create(dir.join("matrix.mtx"))?).map_err(wrap("matrix.mtx"))?;
    mm::write_vector(&system.rhs, std::fs::File::create(dir.join("rhs.mtx"))?).map_err(wrap("rhs.mtx"))?;
    let iface = classify_interface(level, dec);
    let mut part = String::new();
    let mut coords = String::new();
    for d in 0..level.n_dofs {
        let node = level.dof_node[d];
        let ids: Vec<String> = iface.node_subs[node].iter().map(|s| s.to_string()).collect();
        writeln!(part, "{}", ids.join(" ")).unwrap();
        let nd = &level.nodes[node];
        let k = nd.dofs.iter().position(|&x| x == d).unwrap();
        let c = nd.coord;
        match nd.comps[k] {
            Some(comp) => writeln!(coords, "{:.16e} {:.16e} {:.16e} {}", c[0], c[1], c[2], comp).unwrap(),
            None => writeln!(coords, "{:.16e} {:.16e} {:.16e}", c[0], c[1], c[2]).unwrap(),
        }
    }
    std::fs::write(dir.join("partition.txt"), part)?;
    std::fs::write(dir.join("coords.txt"), coords)?;
    Ok(())
}
