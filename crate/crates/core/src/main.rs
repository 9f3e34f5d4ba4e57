use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use poro_homog::error::{Error, Phase, Result};
use poro_homog::linsolve::SolverConfig;
use poro_homog::macro_biot::{RegimeParameters, Viscosity};
use poro_homog::microcell::{build_cell, GeometrySpec, VoxelCell};
use poro_homog::toolkit::criteria::Level;
use poro_homog::toolkit::{run_scenario, solve_cells, verify, CampaignParams, Scenario, Which};

#[derive(Parser)]
#[command(name = "poro-homog", version, about = "Periodic cell problems and homogenized thermo-poroelastic columns")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a voxel cell file.
    Geometry {
        #[command(subcommand)]
        shape: Shape,
        #[command(flatten)]
        common: GeometryArgs,
    },
    /// Solve cell problems and write coefficients.json plus kernel CSVs.
    SolveCells(SolveCellsArgs),
    /// Run a macroscale column scenario.
    Macro {
        scenario: PathBuf,
        #[arg(long, default_value = "run")]
        out: PathBuf,
    },
    /// Run the acceptance checks and write a JSON report.
    Verify {
        #[arg(long, value_enum, default_value = "quick")]
        level: Level,
        /// Directory of voxel fixtures to validate.
        #[arg(long)]
        fixtures: Option<PathBuf>,
        #[arg(long, default_value = "verify_report.json")]
        report: PathBuf,
    },
}

#[derive(Args)]
struct GeometryArgs {
    /// Voxels per edge.
    #[arg(long, global = true, default_value_t = 32)]
    n: usize,
    #[arg(long, short, global = true, default_value = "cell.vox")]
    out: PathBuf,
}

#[derive(Subcommand)]
enum Shape {
    /// Fluid slab normal to axis 1, 2 or 3.
    Laminate {
        #[arg(long, default_value_t = 1)]
        axis: usize,
        /// Fluid volume fraction.
        #[arg(long)]
        fluid: f64,
    },
    /// Fluid slit open along axis 1, 2 or 3.
    Channel {
        #[arg(long, default_value_t = 1)]
        axis: usize,
        #[arg(long)]
        width: f64,
    },
    /// Ball of one phase in the other.
    Sphere {
        #[arg(long)]
        r: f64,
        #[arg(long, value_delimiter = ',', default_values_t = [0.5, 0.5, 0.5])]
        center: Vec<f64>,
        #[arg(long, value_parser = parse_phase, default_value = "fluid")]
        phase: Phase,
    },
}

#[derive(Args)]
struct SolveCellsArgs {
    cell: PathBuf,
    /// JSON file with regime parameters; flags below override it.
    #[arg(long)]
    params: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "all")]
    which: WhichArg,
    #[arg(long)]
    tau0: Option<f64>,
    /// Fluid viscosity limit, a number or "inf".
    #[arg(long)]
    mu1: Option<String>,
    #[arg(long)]
    lambda0: Option<f64>,
    #[arg(long)]
    eta0: Option<f64>,
    #[arg(long, default_value_t = 1e-9)]
    tolerance: f64,
    #[arg(long, default_value = "coefficients")]
    out: PathBuf,
}

#[derive(Clone, Copy, clap::ValueEnum)]
enum WhichArg {
    Elastic,
    Thermal,
    Flow,
    All,
}

fn parse_phase(s: &str) -> std::result::Result<Phase, String> {
    match s {
        "fluid" => Ok(Phase::Fluid),
        "solid" => Ok(Phase::Solid),
        _ => Err(format!("phase must be fluid or solid, got {s}")),
    }
}

fn axis(a: usize) -> Result<usize> {
    if (1..=3).contains(&a) {
        Ok(a - 1)
    } else {
        Err(Error::Geometry(format!("axis must be 1, 2 or 3, got {a}")))
    }
}

fn describe(cell: &VoxelCell) -> String {
    format!(
        "n={} m={} fluid {:?} solid {:?} fingerprint {}",
        cell.n(),
        cell.porosity(),
        cell.connectivity(Phase::Fluid),
        cell.connectivity(Phase::Solid),
        cell.fingerprint()
    )
}

fn geometry(shape: Shape, common: GeometryArgs) -> Result<()> {
    let n = common.n;
    let spec = match shape {
        Shape::Laminate { axis: a, fluid } => GeometrySpec::laminate(axis(a)?, fluid, n),
        Shape::Channel { axis: a, width } => GeometrySpec::channel(axis(a)?, width, n),
        Shape::Sphere { r, center, phase } => {
            let c: [f64; 3] = center
                .try_into()
                .map_err(|_| Error::Geometry("sphere center needs three coordinates".into()))?;
            GeometrySpec::sphere(c, r, phase, n)
        }
    };
    let cell = build_cell(&spec)?;
    cell.write(&common.out)?;
    println!("wrote {}: {}", common.out.display(), describe(&cell));
    Ok(())
}

fn write_json(path: &Path, value: &impl serde::Serialize) -> Result<()> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    std::fs::write(path, s)?;
    Ok(())
}

fn solve(args: SolveCellsArgs) -> Result<i32> {
    let cell = VoxelCell::read(&args.cell)?;
    let mut regime: RegimeParameters = match &args.params {
        Some(p) => serde_json::from_str(&std::fs::read_to_string(p)?)?,
        None => RegimeParameters::default(),
    };
    if let Some(v) = args.tau0 {
        regime.tau0 = v;
    }
    if let Some(v) = &args.mu1 {
        regime.mu1 = serde_json::from_value::<Viscosity>(match v.parse::<f64>() {
            Ok(x) => serde_json::json!(x),
            Err(_) => serde_json::json!(v),
        })?;
    }
    if let Some(v) = args.lambda0 {
        regime.lambda0 = v;
    }
    if let Some(v) = args.eta0 {
        regime.eta0 = v;
    }
    let which = match args.which {
        WhichArg::Elastic => Which::Elastic,
        WhichArg::Thermal => Which::Thermal,
        WhichArg::Flow => Which::Flow,
        WhichArg::All => Which::All,
    };
    let params = CampaignParams {
        regime,
        solver: SolverConfig::with_tolerance(args.tolerance),
        which,
    };
    let outcome = solve_cells(&cell, &params)?;
    let path = outcome.coefficients.write(&args.out)?;
    write_json(&args.out.join("manifest.json"), &outcome.manifest())?;
    println!("{}: {}", args.cell.display(), describe(&cell));
    for (family, status) in &outcome.coefficients.set.provenance.families {
        println!("  {family}: {}", serde_json::to_string(status)?);
    }
    println!("wrote {}", path.display());
    if let Some(e) = &outcome.failure {
        eprintln!("error: {e}");
    }
    Ok(outcome.exit_code())
}

fn run_macro(scenario: &Path, out: &Path) -> Result<()> {
    let s = Scenario::load(scenario)?;
    let result = run_scenario(&s)?;
    std::fs::create_dir_all(out)?;
    std::fs::write(out.join("run.csv"), &result.csv)?;
    write_json(&out.join("manifest.json"), &result.manifest)?;
    let e = &result.manifest.energy;
    println!(
        "regime {} ({}), {} steps, energy {:.6e} -> {:.6e}, wrote {}",
        result.manifest.regime,
        result.manifest.thermal_closure,
        result.manifest.steps,
        e[0],
        e[e.len() - 1],
        out.display()
    );
    Ok(())
}

fn run_verify(level: Level, fixtures: Option<&Path>, report: &Path) -> Result<i32> {
    let r = verify(level, fixtures, |c| println!("{}", c.line()))?;
    for f in &r.fixtures {
        match &f.error {
            None => println!("fixture ok   {}", f.path.display()),
            Some(e) => println!("FIXTURE ERROR {}: {e}", f.path.display()),
        }
    }
    write_json(report, &r)?;
    println!("wrote {}", report.display());
    Ok(r.exit_code())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Geometry { shape, common } => geometry(shape, common).map(|_| 0),
        Command::SolveCells(args) => solve(args),
        Command::Macro { scenario, out } => run_macro(&scenario, &out).map(|_| 0),
        Command::Verify { level, fixtures, report } => run_verify(level, fixtures.as_deref(), &report),
    };
    match result {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
