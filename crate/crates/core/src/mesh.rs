//! Structured hexahedral meshes, trilinear element matrices, benchmark
//! materials and Dirichlet elimination.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;
use std::sync::Arc;

use nalgebra::{DMatrix, Matrix3, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::level::{ElementBlock, LevelProblem, Node};

#[derive(Debug, Error)]
pub enum MeshError {
    #[error("element {element} has nonpositive Jacobian {det:e}")]
    DegenerateElement { element: usize, det: f64 },
    #[error("every degree of freedom is fixed")]
    EmptyFreeSet,
    #[error("bar layout does not fit a mesh with {n} elements per axis: {reason}")]
    ResolutionTooCoarse { n: usize, reason: String },
    #[error("invalid material for element {element}: {reason}")]
    InvalidMaterial { element: usize, reason: String },
    #[error("size mismatch: {0}")]
    SizeMismatch(String),
    #[error("mesh format error at line {line}: {msg}")]
    Format { line: usize, msg: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Formulation {
    Poisson,
    Elasticity,
}

impl Formulation {
    pub fn name(self) -> &'static str {
        match self {
            Formulation::Poisson => "poisson",
            Formulation::Elasticity => "elasticity",
        }
    }

    pub fn dofs_per_node(self) -> usize {
        match self {
            Formulation::Poisson => 1,
            Formulation::Elasticity => 3,
        }
    }

    /// Dimension of the kernel of a floating substructure.
    pub fn rigid_mode_count(self) -> usize {
        match self {
            Formulation::Poisson => 1,
            Formulation::Elasticity => 6,
        }
    }
}

impl std::str::FromStr for Formulation {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "poisson" => Ok(Formulation::Poisson),
            "elasticity" => Ok(Formulation::Elasticity),
            _ => Err(format!("unknown formulation '{s}'")),
        }
    }
}

/// Hexahedral mesh. Local node order of an element is
/// (0,0,0),(1,0,0),(1,1,0),(0,1,0),(0,0,1),(1,0,1),(1,1,1),(0,1,1).
#[derive(Debug, Clone, PartialEq)]
pub struct Mesh {
    pub coords: Vec<[f64; 3]>,
    pub elements: Vec<[usize; 8]>,
    /// Elements per axis for meshes produced by [`build_cube_mesh`].
    pub grid: Option<usize>,
}

impl Mesh {
    pub fn n_nodes(&self) -> usize {
        self.coords.len()
    }

    pub fn n_elements(&self) -> usize {
        self.elements.len()
    }

    pub fn element_coords(&self, e: usize) -> [[f64; 3]; 8] {
        let mut x = [[0.0; 3]; 8];
        for (a, &node) in self.elements[e].iter().enumerate() {
            x[a] = self.coords[node];
        }
        x
    }

    /// Element-major grid position `(i, j, k)` of element `e` on a cube mesh.
    pub fn element_ijk(&self, e: usize) -> Option<[usize; 3]> {
        let n = self.grid?;
        Some([e % n, (e / n) % n, e / (n * n)])
    }
}

/// Uniform mesh of the unit cube with `n` elements per axis; nodes are
/// numbered lexicographically with x fastest.
pub fn build_cube_mesh(n: usize) -> Mesh {
    assert!(n >= 1, "need at least one element per axis");
    let m = n + 1;
    let h = 1.0 / n as f64;
    let mut coords = Vec::with_capacity(m * m * m);
    for k in 0..m {
        for j in 0..m {
            for i in 0..m {
                coords.push([i as f64 * h, j as f64 * h, k as f64 * h]);
            }
        }
    }
    let id = |i: usize, j: usize, k: usize| i + m * (j + m * k);
    let mut elements = Vec::with_capacity(n * n * n);
    for k in 0..n {
        for j in 0..n {
            for i in 0..n {
                elements.push([
                    id(i, j, k),
                    id(i + 1, j, k),
                    id(i + 1, j + 1, k),
                    id(i, j + 1, k),
                    id(i, j, k + 1),
                    id(i + 1, j, k + 1),
                    id(i + 1, j + 1, k + 1),
                    id(i, j + 1, k + 1),
                ]);
            }
        }
    }
    Mesh { coords, elements, grid: Some(n) }
}

/// Young's modulus (or conductivity) and Poisson ratio of one element.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Material {
    pub e: f64,
    pub nu: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MaterialField {
    pub per_element: Vec<Material>,
}

impl MaterialField {
    pub fn uniform(n_elements: usize, e: f64, nu: f64) -> Self {
        Self { per_element: vec![Material { e, nu }; n_elements] }
    }

    pub fn scaled(&self, alpha: f64) -> Self {
        Self { per_element: self.per_element.iter().map(|m| Material { e: m.e * alpha, nu: m.nu }).collect() }
    }

    fn validate(&self, n_elements: usize) -> Result<(), MeshError> {
        if self.per_element.len() != n_elements {
            return Err(MeshError::SizeMismatch(format!(
                "{} materials for {} elements",
                self.per_element.len(),
                n_elements
            )));
        }
        for (element, m) in self.per_element.iter().enumerate() {
            if !(m.e > 0.0) {
                return Err(MeshError::InvalidMaterial { element, reason: format!("E = {}", m.e) });
            }
            if !(0.0..0.5).contains(&m.nu) {
                return Err(MeshError::InvalidMaterial { element, reason: format!("nu = {}", m.nu) });
            }
        }
        Ok(())
    }
}

pub const STIFF_MODULUS: f64 = 2.1e11;

/// Layout of the horizontal stiff bars running along x.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BarsSpec {
    /// Bars are placed on a `p × p` grid of (y, z) positions; `n_bars = p²`.
    pub n_bars: usize,
    /// Ratio `E_stiff / E_soft`.
    pub contrast: f64,
    /// Bar side in elements; `None` picks `max(1, n / 8)`.
    pub width: Option<usize>,
    pub nu_soft: f64,
    pub nu_stiff: f64,
    /// Widen the central bar to twice the width of the others.
    pub variable: bool,
}

impl BarsSpec {
    pub fn nine_bars(contrast: f64) -> Self {
        Self { n_bars: 9, contrast, width: None, nu_soft: 0.3, nu_stiff: 0.3, variable: false }
    }

    pub fn variable_bars(contrast: f64) -> Self {
        Self { n_bars: 9, contrast, width: None, nu_soft: 0.45, nu_stiff: 0.3, variable: true }
    }
}

/// Rectangles `((y_lo, y_hi), (z_lo, z_hi))` in element indices, one per bar.
fn bar_rectangles(n: usize, spec: &BarsSpec) -> Result<Vec<[(usize, usize); 2]>, MeshError> {
    let coarse = |reason: String| MeshError::ResolutionTooCoarse { n, reason };
    let p = (spec.n_bars as f64).sqrt().round() as usize;
    if p * p != spec.n_bars || p == 0 {
        return Err(coarse(format!("{} bars do not form a square grid", spec.n_bars)));
    }
    let w = spec.width.unwrap_or((n / 8).max(1));
    if w == 0 {
        return Err(coarse("zero bar width".into()));
    }
    let range = |i: usize, width: usize| -> Result<(usize, usize), MeshError> {
        let center = n as f64 * (i + 1) as f64 / (p + 1) as f64;
        let lo = (center - width as f64 / 2.0).round();
        if lo < 1.0 || lo as usize + width >= n {
            return Err(coarse(format!("bar of width {width} does not fit inside the cube")));
        }
        Ok((lo as usize, lo as usize + width))
    };
    let mut bars = Vec::with_capacity(p * p);
    for b in 0..p {
        for a in 0..p {
            let central = spec.variable && p % 2 == 1 && a == p / 2 && b == p / 2;
            let width = if central { 2 * w } else { w };
            bars.push([range(a, width)?, range(b, width)?]);
        }
    }
    // bars must be separated by at least one soft element
    let apart = |x: (usize, usize), y: (usize, usize)| x.1 < y.0 || y.1 < x.0;
    for i in 0..bars.len() {
        for j in i + 1..bars.len() {
            if !apart(bars[i][0], bars[j][0]) && !apart(bars[i][1], bars[j][1]) {
                return Err(coarse("neighbouring bars touch".into()));
            }
        }
    }
    Ok(bars)
}

/// Per-element material of the bars benchmark: stiff bars at
/// [`STIFF_MODULUS`], background at `STIFF_MODULUS / contrast`.
pub fn bars_material(mesh: &Mesh, spec: &BarsSpec) -> Result<MaterialField, MeshError> {
    let n = mesh.grid.ok_or_else(|| MeshError::ResolutionTooCoarse {
        n: 0,
        reason: "bars need a structured cube mesh".into(),
    })?;
    let bars = bar_rectangles(n, spec)?;
    let stiff = Material { e: STIFF_MODULUS, nu: spec.nu_stiff };
    let soft = Material { e: STIFF_MODULUS / spec.contrast, nu: spec.nu_soft };
    let per_element = (0..mesh.n_elements())
        .map(|e| {
            let [_, j, k] = mesh.element_ijk(e).unwrap();
            let hit = bars.iter().any(|[y, z]| j >= y.0 && j < y.1 && k >= z.0 && k < z.1);
            if hit {
                stiff
            } else {
                soft
            }
        })
        .collect();
    Ok(MaterialField { per_element })
}

// Reference node signs in local element order.
const NODE_SIGNS: [[f64; 3]; 8] = [
    [-1.0, -1.0, -1.0],
    [1.0, -1.0, -1.0],
    [1.0, 1.0, -1.0],
    [-1.0, 1.0, -1.0],
    [-1.0, -1.0, 1.0],
    [1.0, -1.0, 1.0],
    [1.0, 1.0, 1.0],
    [-1.0, 1.0, 1.0],
];

/// Physical gradients of the 8 shape functions and `det J` at a point.
fn shape_gradients(x: &[[f64; 3]; 8], xi: [f64; 3]) -> ([[f64; 3]; 8], f64) {
    let mut dref = [[0.0; 3]; 8];
    for (a, s) in NODE_SIGNS.iter().enumerate() {
        let f = [1.0 + s[0] * xi[0], 1.0 + s[1] * xi[1], 1.0 + s[2] * xi[2]];
        dref[a] = [s[0] * f[1] * f[2] / 8.0, f[0] * s[1] * f[2] / 8.0, f[0] * f[1] * s[2] / 8.0];
    }
    let mut jac = Matrix3::zeros();
    for a in 0..8 {
        for r in 0..3 {
            for c in 0..3 {
                jac[(r, c)] += dref[a][r] * x[a][c];
            }
        }
    }
    let det = jac.determinant();
    let jinv = jac.try_inverse().unwrap_or_else(Matrix3::zeros);
    let mut grad = [[0.0; 3]; 8];
    for a in 0..8 {
        let g = jinv * Vector3::new(dref[a][0], dref[a][1], dref[a][2]);
        grad[a] = [g[0], g[1], g[2]];
    }
    (grad, det)
}

fn gauss_points() -> impl Iterator<Item = [f64; 3]> {
    let g = 1.0 / 3f64.sqrt();
    (0..8).map(move |q| {
        [
            if q & 1 == 0 { -g } else { g },
            if q & 2 == 0 { -g } else { g },
            if q & 4 == 0 { -g } else { g },
        ]
    })
}

/// Element stiffness by 2×2×2 Gauss quadrature: 8×8 for Poisson, 24×24
/// (node-major, x/y/z per node) for elasticity.
pub fn element_stiffness(x: &[[f64; 3]; 8], mat: Material, form: Formulation) -> Result<DMatrix<f64>, MeshError> {
    let d = form.dofs_per_node();
    let mut k = DMatrix::zeros(8 * d, 8 * d);
    let (lambda, mu) = {
        let (e, nu) = (mat.e, mat.nu);
        (e * nu / ((1.0 + nu) * (1.0 - 2.0 * nu)), e / (2.0 * (1.0 + nu)))
    };
    for xi in gauss_points() {
        let (g, det) = shape_gradients(x, xi);
        if !(det > 0.0) {
            return Err(MeshError::DegenerateElement { element: usize::MAX, det });
        }
        match form {
            Formulation::Poisson => {
                for a in 0..8 {
                    for b in 0..8 {
                        let dotg = g[a][0] * g[b][0] + g[a][1] * g[b][1] + g[a][2] * g[b][2];
                        k[(a, b)] += mat.e * dotg * det;
                    }
                }
            }
            Formulation::Elasticity => {
                // K_ab[i][j] = λ ∂_i N_a ∂_j N_b + μ (δ_ij ∇N_a·∇N_b + ∂_j N_a ∂_i N_b)
                for a in 0..8 {
                    for b in 0..8 {
                        let dotg = g[a][0] * g[b][0] + g[a][1] * g[b][1] + g[a][2] * g[b][2];
                        for i in 0..3 {
                            for j in 0..3 {
                                let mut v = lambda * g[a][i] * g[b][j] + mu * g[a][j] * g[b][i];
                                if i == j {
                                    v += mu * dotg;
                                }
                                k[(3 * a + i, 3 * b + j)] += v * det;
                            }
                        }
                    }
                }
            }
        }
    }
    Ok((&k + k.transpose()) * 0.5)
}

/// Consistent nodal load of a constant body force (volume / 8 per node for
/// parallelepipeds), exact under 2×2×2 quadrature.
fn element_body_load(x: &[[f64; 3]; 8]) -> [f64; 8] {
    let mut out = [0.0; 8];
    for xi in gauss_points() {
        let (_, det) = shape_gradients(x, xi);
        for (a, s) in NODE_SIGNS.iter().enumerate() {
            let n = (1.0 + s[0] * xi[0]) * (1.0 + s[1] * xi[1]) * (1.0 + s[2] * xi[2]) / 8.0;
            out[a] += n * det;
        }
    }
    out
}

/// Dirichlet data and loads.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct BoundarySpec {
    /// `(node, component, prescribed value)`.
    pub fixed: Vec<(usize, usize, f64)>,
    /// Concentrated nodal loads `(node, component, value)`.
    pub loads: Vec<(usize, usize, f64)>,
    /// Constant body force density per component (length = dofs per node).
    pub body_force: Option<Vec<f64>>,
}

/// Elasticity under self weight, fixed along the vertical edge `x = y = 0`.
/// The nodes of the adjacent column `x = 0, y = h` are fixed as well so the
/// rotation about the edge is suppressed.
pub fn gravity_edge_bc(mesh: &Mesh) -> BoundarySpec {
    let h = mesh.grid.map(|n| 1.0 / n as f64).unwrap_or(0.0);
    let tol = 1e-12;
    let mut fixed = Vec::new();
    for (node, c) in mesh.coords.iter().enumerate() {
        if c[0].abs() < tol && c[1] <= h + tol {
            for comp in 0..3 {
                fixed.push((node, comp, 0.0));
            }
        }
    }
    BoundarySpec { fixed, loads: Vec::new(), body_force: Some(vec![0.0, 0.0, -1.0]) }
}

/// Poisson with homogeneous Dirichlet data on the whole cube surface and a
/// unit source.
pub fn poisson_dirichlet_bc(mesh: &Mesh) -> BoundarySpec {
    let tol = 1e-12;
    let fixed = mesh
        .coords
        .iter()
        .enumerate()
        .filter(|(_, c)| c.iter().any(|&v| v.abs() < tol || (v - 1.0).abs() < tol))
        .map(|(node, _)| (node, 0, 0.0))
        .collect();
    BoundarySpec { fixed, loads: Vec::new(), body_force: Some(vec![1.0]) }
}

/// Assembled system on the free dofs, together with the level-1 element data
/// used by the substructuring code.
#[derive(Debug, Clone)]
pub struct ProblemSystem {
    pub formulation: Formulation,
    pub level: LevelProblem,
    pub rhs: Vec<f64>,
    /// Full dof `node * d + comp` → free dof index.
    pub free_index: Vec<Option<usize>>,
    /// Prescribed values on the full dof numbering (zero on free dofs).
    pub prescribed: Vec<f64>,
}

impl ProblemSystem {
    pub fn n_free(&self) -> usize {
        self.level.n_dofs
    }

    /// Expands a free-dof vector to the full numbering, inserting prescribed
    /// values.
    pub fn expand(&self, u: &[f64]) -> Vec<f64> {
        let mut out = self.prescribed.clone();
        for (full, idx) in self.free_index.iter().enumerate() {
            if let Some(i) = idx {
                out[full] = u[*i];
            }
        }
        out
    }
}

type ElementKey = (u64, u64, [u64; 21]);

fn element_key(x: &[[f64; 3]; 8], m: Material) -> ElementKey {
    let mut rel = [0u64; 21];
    for a in 1..8 {
        for c in 0..3 {
            rel[3 * (a - 1) + c] = (x[a][c] - x[0][c]).to_bits();
        }
    }
    (m.e.to_bits(), m.nu.to_bits(), rel)
}

/// Assembles the free-dof system; fixed dofs are removed symmetrically and
/// their prescribed values moved to the right-hand side.
pub fn assemble(
    mesh: &Mesh,
    material: &MaterialField,
    form: Formulation,
    bc: &BoundarySpec,
) -> Result<ProblemSystem, MeshError> {
    material.validate(mesh.n_elements())?;
    let d = form.dofs_per_node();
    let n_full = mesh.n_nodes() * d;
    for &(node, comp, _) in bc.fixed.iter().chain(&bc.loads) {
        if node >= mesh.n_nodes() || comp >= d {
            return Err(MeshError::SizeMismatch(format!("boundary entry ({node}, {comp}) out of range")));
        }
    }
    let mut prescribed = vec![0.0; n_full];
    let mut is_fixed = vec![false; n_full];
    for &(node, comp, v) in &bc.fixed {
        is_fixed[node * d + comp] = true;
        prescribed[node * d + comp] = v;
    }
    let mut free_index = vec![None; n_full];
    let mut count = 0;
    for i in 0..n_full {
        if !is_fixed[i] {
            free_index[i] = Some(count);
            count += 1;
        }
    }
    if count == 0 {
        return Err(MeshError::EmptyFreeSet);
    }

    let mut cache: HashMap<ElementKey, Arc<DMatrix<f64>>> = HashMap::new();
    let mut elements = Vec::with_capacity(mesh.n_elements());
    let mut full_rhs = vec![0.0; n_full];
    let mut load_cache: HashMap<[u64; 21], [f64; 8]> = HashMap::new();
    for e in 0..mesh.n_elements() {
        let x = mesh.element_coords(e);
        let key = element_key(&x, material.per_element[e]);
        let k = match cache.get(&key) {
            Some(k) => k.clone(),
            None => {
                let k = Arc::new(element_stiffness(&x, material.per_element[e], form).map_err(|err| match err {
                    MeshError::DegenerateElement { det, .. } => MeshError::DegenerateElement { element: e, det },
                    other => other,
                })?);
                cache.insert(key, k.clone());
                k
            }
        };
        if let Some(bf) = &bc.body_force {
            let w = *load_cache.entry(key.2).or_insert_with(|| element_body_load(&x));
            for (a, &node) in mesh.elements[e].iter().enumerate() {
                for c in 0..d {
                    full_rhs[node * d + c] += w[a] * bf[c];
                }
            }
        }
        let nodes: Vec<usize> = mesh.elements[e].to_vec();
        let dofs: Vec<Option<usize>> =
            nodes.iter().flat_map(|&node| (0..d).map(move |c| node * d + c)).map(|g| free_index[g]).collect();
        // move prescribed values to the right-hand side
        let full: Vec<usize> = nodes.iter().flat_map(|&node| (0..d).map(move |c| node * d + c)).collect();
        if full.iter().any(|&g| is_fixed[g] && prescribed[g] != 0.0) {
            for (a, &ga) in full.iter().enumerate() {
                if is_fixed[ga] {
                    continue;
                }
                for (b, &gb) in full.iter().enumerate() {
                    if is_fixed[gb] {
                        full_rhs[ga] -= k[(a, b)] * prescribed[gb];
                    }
                }
            }
        }
        elements.push(ElementBlock { nodes, dofs, matrix: k });
    }
    for &(node, comp, v) in &bc.loads {
        full_rhs[node * d + comp] += v;
    }
    let rhs: Vec<f64> = (0..n_full).filter(|&i| !is_fixed[i]).map(|i| full_rhs[i]).collect();

    let nodes: Vec<Node> = (0..mesh.n_nodes())
        .map(|node| {
            let mut dofs = Vec::new();
            let mut comps = Vec::new();
            for c in 0..d {
                if let Some(i) = free_index[node * d + c] {
                    dofs.push(i);
                    comps.push(Some(c as u8));
                }
            }
            Node { dofs, comps, coord: mesh.coords[node] }
        })
        .collect();
    let rigid = geometric_rigid_modes(&nodes, count, form);
    let level = LevelProblem::new(count, elements, nodes, rigid);
    Ok(ProblemSystem { formulation: form, level, rhs, free_index, prescribed })
}

/// Rigid body modes (translations, then rotations about the centroid)
/// restricted to the free dofs; the constant vector for Poisson.
pub fn geometric_rigid_modes(nodes: &[Node], n_dofs: usize, form: Formulation) -> DMatrix<f64> {
    let m = form.rigid_mode_count();
    let mut r = DMatrix::zeros(n_dofs, m);
    let mut centroid = [0.0; 3];
    for nd in nodes {
        for c in 0..3 {
            centroid[c] += nd.coord[c] / nodes.len().max(1) as f64;
        }
    }
    for nd in nodes {
        let p = [nd.coord[0] - centroid[0], nd.coord[1] - centroid[1], nd.coord[2] - centroid[2]];
        for (&dof, comp) in nd.dofs.iter().zip(&nd.comps) {
            let Some(c) = comp else { continue };
            let c = *c as usize;
            match form {
                Formulation::Poisson => r[(dof, 0)] = 1.0,
                Formulation::Elasticity => {
                    r[(dof, c)] = 1.0;
                    // rotations about z, x, y
                    let rot = [[-p[1], p[0], 0.0], [0.0, -p[2], p[1]], [p[2], 0.0, -p[0]]];
                    for (q, v) in rot.iter().enumerate() {
                        r[(dof, 3 + q)] = v[c];
                    }
                }
            }
        }
    }
    r
}

/// Writes the plain-text mesh format:
/// header `nodes N elements M dofs_per_node d`, N coordinate lines, M
/// connectivity lines, then optional `[materials]`, `[fixed]` and `[loads]`
/// sections.
pub fn write_mesh(
    path: &Path,
    mesh: &Mesh,
    form: Formulation,
    material: Option<&MaterialField>,
    bc: &BoundarySpec,
) -> Result<(), MeshError> {
    let mut s = String::new();
    writeln!(s, "nodes {} elements {} dofs_per_node {}", mesh.n_nodes(), mesh.n_elements(), form.dofs_per_node())
        .unwrap();
    for c in &mesh.coords {
        writeln!(s, "{:.16e} {:.16e} {:.16e}", c[0], c[1], c[2]).unwrap();
    }
    for e in &mesh.elements {
        let line: Vec<String> = e.iter().map(|v| v.to_string()).collect();
        writeln!(s, "{}", line.join(" ")).unwrap();
    }
    if let Some(m) = material {
        writeln!(s, "[materials]").unwrap();
        for mat in &m.per_element {
            writeln!(s, "{:.16e} {:.16e}", mat.e, mat.nu).unwrap();
        }
    }
    if !bc.fixed.is_empty() {
        writeln!(s, "[fixed]").unwrap();
        for &(node, comp, v) in &bc.fixed {
            writeln!(s, "{node} {comp} {v:.16e}").unwrap();
        }
    }
    if !bc.loads.is_empty() {
        writeln!(s, "[loads]").unwrap();
        for &(node, comp, v) in &bc.loads {
            writeln!(s, "{node} {comp} {v:.16e}").unwrap();
        }
    }
    if let Some(bf) = &bc.body_force {
        writeln!(s, "[body_force]").unwrap();
        let vals: Vec<String> = bf.iter().map(|v| format!("{v:.16e}")).collect();
        writeln!(s, "{}", vals.join(" ")).unwrap();
    }
    std::fs::write(path, s)?;
    Ok(())
}

/// Mesh file contents.
#[derive(Debug, Clone)]
pub struct MeshFile {
    pub mesh: Mesh,
    pub formulation: Formulation,
    pub material: Option<MaterialField>,
    pub bc: BoundarySpec,
}

pub fn read_mesh(path: &Path) -> Result<MeshFile, MeshError> {
    let text = std::fs::read_to_string(path)?;
    parse_mesh(&text)
}

pub fn parse_mesh(text: &str) -> Result<MeshFile, MeshError> {
    let err = |line: usize, msg: &str| MeshError::Format { line, msg: msg.to_string() };
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
        .peekable();
    let (hl, header) = lines.next().ok_or_else(|| err(1, "empty mesh file"))?;
    let tok: Vec<&str> = header.split_whitespace().collect();
    if tok.len() != 6 || tok[0] != "nodes" || tok[2] != "elements" || tok[4] != "dofs_per_node" {
        return Err(err(hl, "expected 'nodes N elements M dofs_per_node d'"));
    }
    let num = |s: &str, line: usize| s.parse::<usize>().map_err(|_| err(line, "bad integer"));
    let (nn, ne, d) = (num(tok[1], hl)?, num(tok[3], hl)?, num(tok[5], hl)?);
    let formulation = match d {
        1 => Formulation::Poisson,
        3 => Formulation::Elasticity,
        _ => return Err(err(hl, "dofs_per_node must be 1 or 3")),
    };
    let float = |s: &str, line: usize| s.parse::<f64>().map_err(|_| err(line, "bad number"));
    let mut coords = Vec::with_capacity(nn);
    for _ in 0..nn {
        let (ln, l) = lines.next().ok_or_else(|| err(0, "truncated coordinates"))?;
        let v: Vec<&str> = l.split_whitespace().collect();
        if v.len() != 3 {
            return Err(err(ln, "expected 3 coordinates"));
        }
        coords.push([float(v[0], ln)?, float(v[1], ln)?, float(v[2], ln)?]);
    }
    let mut elements = Vec::with_capacity(ne);
    for _ in 0..ne {
        let (ln, l) = lines.next().ok_or_else(|| err(0, "truncated connectivity"))?;
        let v: Vec<&str> = l.split_whitespace().collect();
        if v.len() != 8 {
            return Err(err(ln, "expected 8 node indices"));
        }
        let mut e = [0usize; 8];
        for a in 0..8 {
            e[a] = num(v[a], ln)?;
            if e[a] >= nn {
                return Err(err(ln, "node index out of range"));
            }
        }
        elements.push(e);
    }
    let mut material = None;
    let mut bc = BoundarySpec::default();
    while let Some((ln, l)) = lines.next() {
        match l {
            "[materials]" => {
                let mut per_element = Vec::with_capacity(ne);
                for _ in 0..ne {
                    let (ln, l) = lines.next().ok_or_else(|| err(ln, "truncated materials"))?;
                    let v: Vec<&str> = l.split_whitespace().collect();
                    if v.len() != 2 {
                        return Err(err(ln, "expected 'E nu'"));
                    }
                    per_element.push(Material { e: float(v[0], ln)?, nu: float(v[1], ln)? });
                }
                material = Some(MaterialField { per_element });
            }
            "[fixed]" | "[loads]" => {
                let target = if l == "[fixed]" { &mut bc.fixed } else { &mut bc.loads };
                while let Some(&(ln, l)) = lines.peek() {
                    if l.starts_with('[') {
                        break;
                    }
                    lines.next();
                    let v: Vec<&str> = l.split_whitespace().collect();
                    if v.len() != 3 {
                        return Err(err(ln, "expected 'node component value'"));
                    }
                    target.push((num(v[0], ln)?, num(v[1], ln)?, float(v[2], ln)?));
                }
            }
            "[body_force]" => {
                let (ln, l) = lines.next().ok_or_else(|| err(ln, "missing body force values"))?;
                let v: Result<Vec<f64>, _> = l.split_whitespace().map(|s| float(s, ln)).collect();
                let v = v?;
                if v.len() != d {
                    return Err(err(ln, "body force needs one value per component"));
                }
                bc.body_force = Some(v);
            }
            _ => return Err(err(ln, "unknown section")),
        }
    }
    Ok(MeshFile { mesh: Mesh { coords, elements, grid: None }, formulation, material, bc })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::dense_sym_eig;

    fn unit_element() -> [[f64; 3]; 8] {
        let m = build_cube_mesh(1);
        m.element_coords(0)
    }

    #[test]
    fn cube_counts() {
        let m = build_cube_mesh(1);
        assert_eq!((m.n_nodes(), m.n_elements()), (8, 1));
        let m = build_cube_mesh(2);
        assert_eq!((m.n_nodes(), m.n_elements()), (27, 8));
        let m = build_cube_mesh(4);
        assert_eq!((m.n_nodes(), m.n_elements()), (125, 64));
    }

    #[test]
    fn poisson_unit_element() {
        let k = element_stiffness(&unit_element(), Material { e: 1.0, nu: 0.0 }, Formulation::Poisson).unwrap();
        for a in 0..8 {
            assert!((k[(a, a)] - 1.0 / 3.0).abs() < 1e-14);
            let row: f64 = (0..8).map(|b| k[(a, b)]).sum();
            assert!(row.abs() < 1e-14);
        }
    }

    #[test]
    fn elasticity_element_has_six_rigid_modes() {
        let mut x = unit_element();
        x[6][0] += 0.1;
        x[2][2] -= 0.05;
        let k = element_stiffness(&x, Material { e: 1.0, nu: 0.3 }, Formulation::Elasticity).unwrap();
        let eig = dense_sym_eig(&k);
        let top = eig.values[0];
        let zeros = eig.values.iter().filter(|&&v| v.abs() < 1e-10 * top).count();
        assert_eq!(zeros, 6);
    }

    #[test]
    fn inverted_element_rejected() {
        let mut x = unit_element();
        x.swap(0, 1);
        x.swap(3, 2);
        x.swap(4, 5);
        x.swap(7, 6);
        assert!(matches!(
            element_stiffness(&x, Material { e: 1.0, nu: 0.3 }, Formulation::Poisson),
            Err(MeshError::DegenerateElement { .. })
        ));
    }

    #[test]
    fn single_element_poisson_has_no_free_dofs() {
        let m = build_cube_mesh(1);
        let r = assemble(&m, &MaterialField::uniform(1, 1.0, 0.0), Formulation::Poisson, &poisson_dirichlet_bc(&m));
        assert!(matches!(r, Err(MeshError::EmptyFreeSet)));
    }

    #[test]
    fn one_free_dof_poisson() {
        let m = build_cube_mesh(2);
        let p = assemble(&m, &MaterialField::uniform(8, 1.0, 0.0), Formulation::Poisson, &poisson_dirichlet_bc(&m))
            .unwrap();
        assert_eq!(p.n_free(), 1);
        let a = p.level.matrix.get(0, 0);
        // the centre node collects 8 element diagonals of 1/3 scaled by h = 1/2
        assert!((a - 8.0 * (1.0 / 3.0) * 0.5).abs() < 1e-14);
        assert!((p.rhs[0] - 8.0 * 0.125 / 8.0).abs() < 1e-15);
    }

    #[test]
    fn bar_counts() {
        let m = build_cube_mesh(8);
        let f = bars_material(&m, &BarsSpec::nine_bars(1e6)).unwrap();
        let stiff = f.per_element.iter().filter(|x| x.e == STIFF_MODULUS).count();
        assert_eq!(stiff, 9 * 8);
        let u = bars_material(&m, &BarsSpec::nine_bars(1.0)).unwrap();
        assert!(u.per_element.iter().all(|x| *x == u.per_element[0]));
        assert!(bars_material(&build_cube_mesh(4), &BarsSpec::nine_bars(1e6)).is_err());
    }

    #[test]
    fn variable_bars_have_one_wide_bar() {
        let m = build_cube_mesh(16);
        let f = bars_material(&m, &BarsSpec::variable_bars(1e6)).unwrap();
        let stiff = f.per_element.iter().filter(|x| x.e == STIFF_MODULUS).count();
        // eight bars of 2×2 plus the central one of 4×4, each 16 long
        assert_eq!(stiff, (8 * 4 + 16) * 16);
    }

    #[test]
    fn mesh_file_round_trip() {
        let m = build_cube_mesh(2);
        let mat = bars_material(&build_cube_mesh(8), &BarsSpec::nine_bars(3.0)).unwrap();
        let mat = MaterialField { per_element: mat.per_element[..8].to_vec() };
        let bc = gravity_edge_bc(&m);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cube.mesh");
        write_mesh(&path, &m, Formulation::Elasticity, Some(&mat), &bc).unwrap();
        let back = read_mesh(&path).unwrap();
        assert_eq!(back.mesh.coords, m.coords);
        assert_eq!(back.mesh.elements, m.elements);
        assert_eq!(back.material.unwrap(), mat);
        assert_eq!(back.bc, bc);
    }
}
