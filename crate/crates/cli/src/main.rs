use std::path::{Path, PathBuf};
use std::process::ExitCode;

use ambddc::driver::{self, report, RunConfig};
use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "ambddc", version, about = "Adaptive multilevel BDDC solver")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a generated problem as a mesh file or as external input files.
    Generate(GenerateArgs),
    /// Set up the preconditioner, run PCG and print the report.
    Solve(SolveArgs),
    /// Run the adaptive setup only and print per-pair eigenproblem results.
    AdaptAudit(ConfigArgs),
    /// Collect report.json files (or directories holding one) into a CSV table.
    Report(ReportArgs),
}

/// Run configuration. Later sources override earlier ones: the config file,
/// then `--set`, then the named flags.
#[derive(Args, Default)]
struct ConfigArgs {
    /// Flat `key = value` config file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Any config key as `key=value`; may repeat.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// cube | bars | variable_bars | mesh | external
    #[arg(long)]
    problem: Option<String>,
    #[arg(long)]
    n: Option<String>,
    /// poisson | elasticity
    #[arg(long)]
    formulation: Option<String>,
    #[arg(long)]
    contrast: Option<String>,
    /// Mesh file read when problem = mesh.
    #[arg(long)]
    mesh: Option<String>,
    #[arg(long)]
    matrix: Option<String>,
    #[arg(long)]
    rhs: Option<String>,
    #[arg(long)]
    partition: Option<String>,
    #[arg(long)]
    coords: Option<String>,
    #[arg(long)]
    levels: Option<String>,
    /// Subdomain counts per level, e.g. 64/8.
    #[arg(long)]
    subdomains: Option<String>,
    /// corners | corners_edges | corners_edges_faces | saturated
    #[arg(long)]
    policy: Option<String>,
    /// stiffness | multiplicity
    #[arg(long)]
    weighting: Option<String>,
    #[arg(long)]
    edge_include_corners: Option<String>,
    #[arg(long)]
    adaptive: Option<String>,
    #[arg(long)]
    tau: Option<String>,
    #[arg(long)]
    lobpcg_vectors: Option<String>,
    #[arg(long)]
    lobpcg_iters: Option<String>,
    #[arg(long)]
    lobpcg_tol: Option<String>,
    #[arg(long)]
    edge_zeroing: Option<String>,
    #[arg(long)]
    recheck: Option<String>,
    #[arg(long)]
    rtol: Option<String>,
    #[arg(long)]
    max_iters: Option<String>,
    #[arg(long)]
    preconditioned_norm: Option<String>,
    #[arg(long)]
    seed: Option<String>,
    #[arg(long)]
    threads: Option<String>,
    /// Directory for report files.
    #[arg(long)]
    output: Option<String>,
}

impl ConfigArgs {
    fn flags(&self) -> Vec<(&'static str, &Option<String>)> {
        vec![
            ("problem", &self.problem),
            ("n", &self.n),
            ("formulation", &self.formulation),
            ("contrast", &self.contrast),
            ("mesh", &self.mesh),
            ("matrix", &self.matrix),
            ("rhs", &self.rhs),
            ("partition", &self.partition),
            ("coords", &self.coords),
            ("levels", &self.levels),
            ("subdomains", &self.subdomains),
            ("policy", &self.policy),
            ("weighting", &self.weighting),
            ("edge_include_corners", &self.edge_include_corners),
            ("adaptive", &self.adaptive),
            ("tau", &self.tau),
            ("lobpcg_vectors", &self.lobpcg_vectors),
            ("lobpcg_iters", &self.lobpcg_iters),
            ("lobpcg_tol", &self.lobpcg_tol),
            ("edge_zeroing", &self.edge_zeroing),
            ("recheck", &self.recheck),
            ("rtol", &self.rtol),
            ("max_iters", &self.max_iters),
            ("preconditioned_norm", &self.preconditioned_norm),
            ("seed", &self.seed),
            ("threads", &self.threads),
            ("output", &self.output),
        ]
    }

    fn load(&self) -> Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(p) => RunConfig::from_file(p).with_context(|| format!("reading {}", p.display()))?,
            None => RunConfig::default(),
        };
        for kv in &self.set {
            let Some((k, v)) = kv.split_once('=') else { bail!("--set expects key=value, got '{kv}'") };
            cfg.set(k.trim(), v.trim())?;
        }
        for (k, v) in self.flags() {
            if let Some(v) = v {
                cfg.set(k, v)?;
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Args)]
struct GenerateArgs {
    #[command(flatten)]
    config: ConfigArgs,
    /// Write the mesh, material and boundary data to this file.
    #[arg(long, value_name = "FILE")]
    write_mesh: Option<PathBuf>,
    /// Write matrix.mtx, rhs.mtx, partition.txt and coords.txt here, using the
    /// level-1 subdomain count.
    #[arg(long, value_name = "DIR")]
    export: Option<PathBuf>,
}

#[derive(Args)]
struct SolveArgs {
    #[command(flatten)]
    config: ConfigArgs,
    /// Print the report as JSON instead of CSV.
    #[arg(long)]
    json: bool,
    /// Dump C, Ψ and weights of every substructure as Matrix Market files.
    #[arg(long, value_name = "DIR")]
    dump: Option<PathBuf>,
}

#[derive(Args)]
struct ReportArgs {
    /// report.json files or directories containing one.
    #[arg(required = true)]
    inputs: Vec<PathBuf>,
}

fn generate(args: &GenerateArgs) -> Result<ExitCode> {
    let cfg = args.config.load()?;
    if args.write_mesh.is_none() && args.export.is_none() {
        bail!("nothing to do: pass --write-mesh and/or --export");
    }
    if let Some(path) = &args.write_mesh {
        let Some((mesh, mat, form, bc)) = driver::generate_mesh(&cfg)? else {
            bail!("--write-mesh needs a generated problem");
        };
        ambddc::mesh::write_mesh(path, &mesh, form, Some(&mat), &bc)?;
        eprintln!("wrote {} ({} elements)", path.display(), mesh.n_elements());
    }
    if let Some(dir) = &args.export {
        let prep = driver::prepare_problem(&cfg)?;
        let dec = match &prep.level1 {
            Some(d) => d.clone(),
            None => driver::level1_partition(&prep, cfg.subdomains[0]),
        };
        driver::export_external(dir, &prep.system, &dec)?;
        eprintln!("wrote {} dofs, {} subdomains to {}", prep.system.level.n_dofs, dec.n_sub, dir.display());
    }
    Ok(ExitCode::SUCCESS)
}

fn solve(args: &SolveArgs) -> Result<ExitCode> {
    let cfg = args.config.load()?;
    let out = driver::run(&cfg)?;
    if let Some(dir) = &args.dump {
        driver::dump_hierarchy(dir, &out.setup.hierarchy)?;
    }
    if args.json {
        println!("{}", out.report.to_json());
    } else {
        print!("{}", out.report.to_csv());
    }
    if out.report.converged {
        Ok(ExitCode::SUCCESS)
    } else {
        eprintln!("PCG stopped after {} iterations without reaching rtol", out.report.iterations);
        Ok(ExitCode::from(2))
    }
}

fn adapt_audit(args: &ConfigArgs) -> Result<ExitCode> {
    let mut cfg = args.load()?;
    if cfg.adaptive.is_none() {
        cfg.set("adaptive", "true")?;
    }
    let setup = driver::with_pool(cfg.threads, || {
        let prep = driver::prepare_problem(&cfg)?;
        driver::setup_hierarchy(&cfg, &prep)
    })??;
    for r in &setup.adapt {
        println!("# level {}: omega {:.4}, added {}", r.level, r.omega, r.added);
        print!("{}", r.pair_csv());
        if let Some(dir) = &cfg.output {
            std::fs::create_dir_all(dir)?;
            std::fs::write(dir.join(format!("pairs_level{}.csv", r.level)), r.pair_csv())?;
        }
    }
    let omegas: Vec<f64> = setup.adapt.iter().map(|r| r.omega).collect();
    println!("# omega product {:.4}", ambddc::adaptive::condition_indicator(&omegas));
    Ok(ExitCode::SUCCESS)
}

fn read_report(path: &Path) -> Result<report::SolveReport> {
    let file = if path.is_dir() { path.join("report.json") } else { path.to_path_buf() };
    let text = std::fs::read_to_string(&file).with_context(|| format!("reading {}", file.display()))?;
    report::SolveReport::from_json(&text).with_context(|| format!("parsing {}", file.display()))
}

fn collect(args: &ReportArgs) -> Result<ExitCode> {
    let reports = args.inputs.iter().map(|p| read_report(p)).collect::<Result<Vec<_>>>()?;
    print!("{}", report::table(&reports));
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Generate(a) => generate(a),
        Command::Solve(a) => solve(a),
        Command::AdaptAudit(a) => adapt_audit(a),
        Command::Report(a) => collect(a),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
