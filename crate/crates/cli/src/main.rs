use std::path::PathBuf;
use std::process::ExitCode;

use adini::dofs::Variant;
use adini::experiment::{run_experiment, Driver, ExperimentConfig};
use adini::lemmas::verify_all;
use adini::mesh::Mesh;
use adini::problems::ProblemKind;
use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "adini", version, about = "Adini elements for the biharmonic equation on rectangular meshes with hanging nodes")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run a convergence experiment and print the table.
    Run(RunArgs),
    /// Check a mesh file against the one-hanging-node mesh condition.
    CheckMesh {
        #[arg(long = "in")]
        input: PathBuf,
    },
    /// Run the element, constraint and transfer property suites.
    VerifyLemmas {
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Print the checks as JSON instead of a table.
        #[arg(long)]
        json: bool,
    },
}

#[derive(Args)]
struct RunArgs {
    /// JSON configuration; flags given on the command line override it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// biquartic_square, disk_fictitious, lshape_clamped, cusp_domain or lshape_mixed
    #[arg(long)]
    problem: Option<ProblemKind>,
    /// averaging or hard
    #[arg(long)]
    variant: Option<Variant>,
    /// uniform, variant1, variant2, boundary-local or adaptive
    #[arg(long)]
    driver: Option<Driver>,
    #[arg(long)]
    theta: Option<f64>,
    #[arg(long)]
    max_ndof: Option<usize>,
    #[arg(long)]
    max_levels: Option<usize>,
    /// Uniform refinements before the local step of the second variant.
    #[arg(long)]
    switch_level: Option<usize>,
    /// Rows in the tail slope fit.
    #[arg(long)]
    tail_window: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Write zeros in the seconds column for reproducible output.
    #[arg(long)]
    no_timing: bool,
    /// Also write per-element indicator tables.
    #[arg(long)]
    write_indicators: bool,
}

fn config(a: RunArgs) -> anyhow::Result<ExperimentConfig> {
    let mut cfg = match &a.config {
        Some(p) => {
            let s = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            ExperimentConfig::from_json(&s)?
        }
        None => {
            let (Some(problem), Some(driver)) = (a.problem, a.driver) else {
                bail!("--problem and --driver are required without --config");
            };
            ExperimentConfig::new(problem, a.variant.unwrap_or(Variant::Averaging), driver)
        }
    };
    if let Some(p) = a.problem {
        cfg.problem = p;
    }
    if let Some(v) = a.variant {
        cfg.variant = v;
    }
    if let Some(d) = a.driver {
        cfg.driver = d;
    }
    if let Some(t) = a.theta {
        cfg.theta = t;
    }
    if a.max_ndof.is_some() {
        cfg.max_ndof = a.max_ndof;
    }
    if a.max_levels.is_some() {
        cfg.max_levels = a.max_levels;
    }
    if let Some(s) = a.switch_level {
        cfg.switch_level = s;
    }
    if let Some(w) = a.tail_window {
        cfg.tail_window = w;
    }
    if a.out.is_some() {
        cfg.out = a.out;
    }
    if a.no_timing {
        cfg.timing = false;
    }
    if a.write_indicators {
        cfg.write_indicators = true;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(a: RunArgs) -> anyhow::Result<ExitCode> {
    let cfg = config(a)?;
    let res = run_experiment(&cfg)?;
    print!("{}", res.csv());
    for (name, fit) in [("tail", res.summary.tail), ("all", res.summary.all)] {
        if let Some(f) = fit {
            println!("# slope ({name}, {} rows): {:.4} +- {:.4}", f.rows, f.slope, f.stderr);
        }
    }
    if let Some(dir) = &cfg.out {
        eprintln!("wrote {}", dir.display());
    }
    Ok(ExitCode::SUCCESS)
}

fn check_mesh(path: PathBuf) -> anyhow::Result<ExitCode> {
    let mesh = Mesh::load(&path).with_context(|| format!("loading {}", path.display()))?;
    let irregular = mesh.vertices().iter().filter(|v| v.is_irregular()).count();
    println!(
        "elements {}, vertices {}, irregular vertices {}, area {:.12}",
        mesh.n_elements(),
        mesh.vertices().len(),
        irregular,
        mesh.area()
    );
    let violations = mesh.check_mesh_condition();
    for v in &violations {
        println!("violation: {v}");
    }
    if violations.is_empty() {
        println!("mesh condition: ok");
        Ok(ExitCode::SUCCESS)
    } else {
        println!("mesh condition: {} violations", violations.len());
        Ok(ExitCode::FAILURE)
    }
}

fn verify(seed: u64, json: bool) -> anyhow::Result<ExitCode> {
    let checks = verify_all(seed);
    if json {
        println!("{}", serde_json::to_string_pretty(&checks)?);
    } else {
        for c in &checks {
            println!(
                "{}  {:<24} {:<66} {:>11.3e}  {}",
                if c.pass { "PASS" } else { "FAIL" },
                c.suite,
                c.name,
                c.value,
                c.bound
            );
        }
    }
    let failed = checks.iter().filter(|c| !c.pass).count();
    eprintln!("{} checks, {failed} failed", checks.len());
    Ok(if failed == 0 { ExitCode::SUCCESS } else { ExitCode::FAILURE })
}

fn main() -> anyhow::Result<ExitCode> {
    match Cli::parse().cmd {
        Cmd::Run(a) => run(a),
        Cmd::CheckMesh { input } => check_mesh(input),
        Cmd::VerifyLemmas { seed, json } => verify(seed, json),
    }
}
