//! End-to-end runs: problem generation or ingestion, hierarchy setup with
//! optional adaptive constraints, PCG, and reports.

pub mod config;
pub mod ingest;
pub mod report;

use std::path::Path;
use std::time::Instant;

use thiserror::Error;

use crate::adaptive::{adapt_level, condition_indicator, AdaptiveError, LevelAdaptReport};
use crate::constraints::ConstraintKind;
use crate::krylov::{pcg, KrylovError, PcgResult};
use crate::mesh::{
    assemble, bars_material, build_cube_mesh, gravity_edge_bc, poisson_dirichlet_bc, read_mesh, BarsSpec, BoundarySpec,
    Formulation, MaterialField, Mesh, MeshError, ProblemSystem,
};
use crate::partition::{partition_graph, partition_regular, Decomposition};
use crate::precond::{build_hierarchy, Hierarchy, LevelOptions, LevelPartition, PrecondError};
pub use config::{ConfigError, ProblemSource, RunConfig};
pub use ingest::{export_external, ingest_external, IngestError};
pub use report::{ConstraintCounts, SolveReport};

#[derive(Debug, Error)]
pub enum RunError {
    #[error("config: {0}")]
    Config(#[from] ConfigError),
    #[error("problem generation: {0}")]
    Mesh(#[from] MeshError),
    #[error("ingestion: {0}")]
    Ingest(#[from] IngestError),
    #[error("setup: {0}")]
    Setup(#[from] PrecondError),
    #[error("adaptive setup: {0}")]
    Adaptive(#[from] AdaptiveError),
    #[error("PCG: {0}")]
    Krylov(#[from] KrylovError),
    #[error("thread pool: {0}")]
    Pool(String),
    #[error("report: {0}")]
    Io(#[from] std::io::Error),
}

/// A level-1 problem with an optional fixed level-1 decomposition.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub system: ProblemSystem,
    pub level1: Option<Decomposition>,
    /// Elements per axis of structured meshes.
    pub grid: Option<usize>,
}

/// Mesh, material and boundary data of a generated cube problem.
pub fn generate_mesh(cfg: &RunConfig) -> Result<Option<(Mesh, MaterialField, Formulation, BoundarySpec)>, RunError> {
    Ok(match &cfg.source {
        ProblemSource::Cube { n } => {
            let mesh = build_cube_mesh(*n);
            let mat = MaterialField::uniform(mesh.n_elements(), 1.0, 0.3);
            let bc = match cfg.formulation {
                Formulation::Poisson => poisson_dirichlet_bc(&mesh),
                Formulation::Elasticity => gravity_edge_bc(&mesh),
            };
            Some((mesh, mat, cfg.formulation, bc))
        }
        ProblemSource::Bars { n, contrast, variable } => {
            let mesh = build_cube_mesh(*n);
            let spec = if *variable { BarsSpec::variable_bars(*contrast) } else { BarsSpec::nine_bars(*contrast) };
            let mat = bars_material(&mesh, &spec)?;
            let bc = gravity_edge_bc(&mesh);
            Some((mesh, mat, Formulation::Elasticity, bc))
        }
        ProblemSource::MeshFile { path } => {
            let mf = read_mesh(path)?;
            let mat = mf.material.unwrap_or_else(|| MaterialField::uniform(mf.mesh.n_elements(), 1.0, 0.3));
            Some((mf.mesh, mat, mf.formulation, mf.bc))
        }
        ProblemSource::External { .. } => None,
    })
}

/// Builds the level-1 problem described by `cfg`.
pub fn prepare_problem(cfg: &RunConfig) -> Result<Prepared, RunError> {
    if let ProblemSource::External { matrix, rhs, partition, coords } = &cfg.source {
        let ing = ingest_external(matrix, rhs, partition, coords.as_deref(), cfg.formulation)?;
        return Ok(Prepared { system: ing.system, level1: Some(ing.decomposition), grid: None });
    }
    let (mesh, mat, form, bc) = generate_mesh(cfg)?.expect("generated source");
    Ok(Prepared { system: assemble(&mesh, &mat, form, &bc)?, level1: None, grid: mesh.grid })
}

/// Level-1 decomposition of a generated problem: a regular box split when
/// the count is a cube dividing the grid, otherwise graph partitioning.
pub fn level1_partition(prep: &Prepared, parts: usize) -> Decomposition {
    if let Some(n) = prep.grid {
        let k = (parts as f64).cbrt().round() as usize;
        if k * k * k == parts {
            if let Ok(d) = partition_regular(n, k) {
                return d;
            }
        }
    }
    partition_graph(&prep.system.level.element_adjacency(), parts)
}

fn level_partitions(cfg: &RunConfig, prep: &Prepared) -> Vec<LevelPartition> {
    let mut counts = cfg.subdomains.iter().copied();
    let mut out = Vec::new();
    match &prep.level1 {
        Some(d) => {
            out.push(LevelPartition::Given(d.clone()));
            if cfg.subdomains.len() == cfg.levels - 1 {
                counts.next();
            }
        }
        None => out.push(LevelPartition::Given(level1_partition(prep, counts.next().unwrap_or(1)))),
    }
    out.extend(counts.map(LevelPartition::Parts));
    out
}

/// Hierarchy and per-level adaptive reports.
pub struct Setup {
    pub hierarchy: Hierarchy,
    pub adapt: Vec<LevelAdaptReport>,
}

/// Builds the (adaptive) multilevel hierarchy for a prepared problem.
pub fn setup_hierarchy(cfg: &RunConfig, prep: &Prepared) -> Result<Setup, RunError> {
    let opts = LevelOptions {
        policy: cfg.policy,
        weighting: cfg.weighting,
        edge_include_corners: cfg.edge_include_corners,
    };
    let parts = level_partitions(cfg, prep);
    let mut adapt = Vec::new();
    let adaptive = cfg.adaptive.filter(|a| a.tau.is_finite());
    let hierarchy = build_hierarchy(prep.system.level.clone(), &parts, opts, |level| {
        if let Some(mut a) = adaptive {
            if level.n_sub() > 1 {
                a.seed = cfg.seed.wrapping_add(level.index as u64);
                adapt.push(adapt_level(level, &a)?);
            }
        }
        Ok::<(), RunError>(())
    })?;
    Ok(Setup { hierarchy, adapt })
}

fn round3(t: f64) -> f64 {
    (t * 1000.0).round() / 1000.0
}

/// Summary of a hierarchy and a PCG run.
pub fn summarize(cfg: &RunConfig, setup: &Setup, res: &PcgResult, times: [f64; 2]) -> SolveReport {
    let h = &setup.hierarchy;
    let counts = h
        .levels
        .iter()
        .map(|l| ConstraintCounts {
            corner: l.count_coarse(ConstraintKind::Corner),
            edge: l.count_coarse(ConstraintKind::Edge),
            face: l.count_coarse(ConstraintKind::Face),
            adaptive: l.count_coarse(ConstraintKind::Adaptive),
        })
        .collect();
    let adaptive = cfg.adaptive_active();
    let omega_levels: Vec<f64> = setup.adapt.iter().map(|r| r.omega).collect();
    SolveReport {
        problem: cfg.label(),
        levels: h.n_levels(),
        subdomains: h.levels.iter().map(|l| l.n_sub()).collect(),
        n: h.dim(),
        n_gamma: h.levels[0].n_interface_dofs(),
        n_f: h.levels.iter().map(|l| l.n_faces()).collect(),
        coarse_dofs: h.levels.iter().map(|l| l.n_coarse()).collect(),
        constraints: counts,
        iterations: res.iterations,
        cond: res.cond,
        converged: res.converged,
        final_residual: *res.residuals.last().unwrap_or(&0.0),
        omega_levels: adaptive.then(|| omega_levels.clone()),
        omega: adaptive.then(|| condition_indicator(&omega_levels)),
        added: adaptive.then(|| setup.adapt.iter().map(|r| r.added).collect()),
        capped: adaptive.then(|| setup.adapt.iter().any(|r| r.pairs.iter().any(|p| p.capped))),
        setup_time: round3(times[0]),
        pcg_time: round3(times[1]),
        solve_time: round3(times[0] + times[1]),
    }
}

/// Everything a run produces.
pub struct RunOutput {
    pub report: SolveReport,
    pub setup: Setup,
    pub pcg: PcgResult,
    pub system: ProblemSystem,
}

fn run_inner(cfg: &RunConfig) -> Result<RunOutput, RunError> {
    cfg.validate()?;
    let t0 = Instant::now();
    let prep = prepare_problem(cfg)?;
    let setup = setup_hierarchy(cfg, &prep)?;
    let t_setup = t0.elapsed().as_secs_f64();
    let t1 = Instant::now();
    let res = pcg(&prep.system.level.matrix, &setup.hierarchy, &prep.system.rhs, cfg.pcg)?;
    let t_pcg = t1.elapsed().as_secs_f64();
    let report = summarize(cfg, &setup, &res, [t_setup, t_pcg]);
    if let Some(dir) = &cfg.output {
        write_outputs(dir, &report, &setup, &res)?;
    }
    Ok(RunOutput { report, setup, pcg: res, system: prep.system })
}

/// Runs `f` on a pool of `threads` workers (0 = rayon default).
pub fn with_pool<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> Result<T, RunError> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| RunError::Pool(e.to_string()))?;
    Ok(pool.install(f))
}

/// Full pipeline: generate or ingest, set up, adapt, solve, report.
pub fn run(cfg: &RunConfig) -> Result<RunOutput, RunError> {
    with_pool(cfg.threads, || run_inner(cfg))?
}

/// Writes `report.csv`, `report.json`, `residuals.csv` and, for adaptive
/// runs, `pairs_level{i}.csv`.
pub fn write_outputs(dir: &Path, report: &SolveReport, setup: &Setup, res: &PcgResult) -> Result<(), RunError> {
    std::fs::create_dir_all(dir)?;
    report::emit_report(report, report::Format::Csv, &dir.join("report.csv"))?;
    report::emit_report(report, report::Format::Json, &dir.join("report.json"))?;
    std::fs::write(dir.join("residuals.csv"), res.history_csv())?;
    for r in &setup.adapt {
        std::fs::write(dir.join(format!("pairs_level{}.csv", r.level)), r.pair_csv())?;
    }
    for l in &setup.hierarchy.levels {
        std::fs::write(dir.join(format!("globs_level{}.csv", l.index)), l.interface.glob_csv())?;
    }
    Ok(())
}

fn write_mm(path: &Path, f: impl FnOnce(std::fs::File) -> Result<(), crate::linalg::LinalgError>) -> Result<(), RunError> {
    f(std::fs::File::create(path)?).map_err(|e| RunError::Io(std::io::Error::other(e.to_string())))
}

/// Debug dump of every substructure's constraint matrix `C`, coarse basis
/// `Ψ` and averaging weights as `level{i}_sub{s}_{C,psi,weights}.mtx`.
pub fn dump_hierarchy(dir: &Path, h: &Hierarchy) -> Result<(), RunError> {
    use crate::linalg::mm;
    std::fs::create_dir_all(dir)?;
    for l in &h.levels {
        for (s, c) in l.constrained.iter().enumerate() {
            let stem = format!("level{}_sub{}", l.index, s);
            write_mm(&dir.join(format!("{stem}_C.mtx")), |f| mm::write_dense(&c.c, f))?;
            write_mm(&dir.join(format!("{stem}_psi.mtx")), |f| mm::write_dense(&c.psi, f))?;
            write_mm(&dir.join(format!("{stem}_weights.mtx")), |f| mm::write_vector(&l.weights[s], f))?;
        }
    }
    Ok(())
}
