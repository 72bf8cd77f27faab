//! `vcadc`: compiles JSON design graphs into voxel stacks, FEA meshes,
//! per-segment STL meshes and slice previews.

mod error;
mod job;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use vcad_core::dither::Mode;
use vcad_core::fea::DEFAULT_ELEMENT_CAP;
use vcad_core::voxel::Axis;
use vcad_core::workers;

use crate::error::CliError;
use crate::job::{design_hash, load_design, region_array, Card, Job, JobManifest, Mesher};

#[derive(Parser)]
#[command(name = "vcadc", version, about = "Compile multi-material implicit designs")]
struct Cli {
    /// Worker threads; defaults to the number of cores.
    #[arg(long, global = true, env = "VCADC_WORKERS")]
    workers: Option<usize>,
    /// Log progress (repeat for more detail).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Dither {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// `prob` draws materials by fraction, `thresh` takes the largest.
    #[arg(long, default_value = "prob")]
    mode: Mode,
}

#[derive(Subcommand)]
enum Command {
    /// Slice the design into a stack of RGBA PNG layers.
    CompileStack {
        design: PathBuf,
        /// Voxel size in mm, either one value or `x,y,z`.
        #[arg(long)]
        res: String,
        /// `auto` or `x0,y0,z0,x1,y1,z1`.
        #[arg(long, default_value = "auto")]
        region: String,
        #[command(flatten)]
        dither: Dither,
        #[arg(long)]
        out: PathBuf,
    },
    /// Write an Abaqus INP mesh with one element set per material.
    ExportFea {
        design: PathBuf,
        #[arg(long, conflicts_with_all = ["tets", "min_cell", "max_cell", "sizing"], required_unless_present = "tets")]
        bricks: bool,
        #[arg(long, requires_all = ["min_cell", "max_cell"])]
        tets: bool,
        /// Brick edge length, mm.
        #[arg(long, required_if_eq("bricks", "true"))]
        res: Option<f64>,
        #[arg(long)]
        min_cell: Option<f64>,
        #[arg(long)]
        max_cell: Option<f64>,
        /// Element size as an expression of heterogeneity `h`.
        #[arg(long)]
        sizing: Option<String>,
        /// Material card as `name=E,nu` (MPa). Repeatable.
        #[arg(long = "card", value_parser = parse_card)]
        cards: Vec<Card>,
        #[arg(long, default_value_t = DEFAULT_ELEMENT_CAP)]
        max_elements: u64,
        #[command(flatten)]
        dither: Dither,
        #[arg(long)]
        out: PathBuf,
    },
    /// Write one STL per fraction range of a reference material.
    ExportMesh {
        design: PathBuf,
        #[arg(long)]
        segments: usize,
        #[arg(long)]
        ref_material: String,
        #[arg(long)]
        res: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Render one axis-aligned slice to PNG.
    Preview {
        design: PathBuf,
        #[arg(long, default_value = "z")]
        axis: Axis,
        #[arg(long, allow_hyphen_values = true)]
        at: f64,
        #[arg(long)]
        res: f64,
        #[arg(long, default_value = "auto")]
        region: String,
        #[command(flatten)]
        dither: Dither,
        #[arg(long)]
        out: PathBuf,
    },
    /// Repeat the job recorded in a job manifest.
    Rerun {
        manifest: PathBuf,
        /// Write to a different location than the recorded one.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn parse_card(s: &str) -> Result<Card, String> {
    let bad = || format!("expected name=E,nu, got '{s}'");
    let (name, rest) = s.split_once('=').ok_or_else(bad)?;
    let (e, nu) = rest.split_once(',').ok_or_else(bad)?;
    Ok(Card {
        name: name.trim().to_string(),
        youngs_modulus: e.trim().parse().map_err(|_| bad())?,
        poisson_ratio: nu.trim().parse().map_err(|_| bad())?,
    })
}

fn parse_numbers<const N: usize>(flag: &str, s: &str) -> Result<[f64; N], CliError> {
    let v: Vec<f64> = s
        .split(',')
        .map(|p| p.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|e| CliError::parse(format!("{flag} '{s}': {e}")))?;
    v.try_into().map_err(|v: Vec<f64>| CliError::parse(format!("{flag} '{s}': expected {N} numbers, got {}", v.len())))
}

fn resolution3(s: &str) -> Result<[f64; 3], CliError> {
    if s.contains(',') {
        parse_numbers::<3>("--res", s)
    } else {
        parse_numbers::<1>("--res", s).map(|[r]| [r; 3])
    }
}

fn region(s: &str, design: &vcad_core::design::Design) -> Result<[f64; 6], CliError> {
    if s.eq_ignore_ascii_case("auto") {
        Ok(region_array(&design.root.bounds()?))
    } else {
        parse_numbers::<6>("--region", s)
    }
}

/// Absolute path so the manifest can be rerun from anywhere.
fn absolute(p: &Path) -> Result<PathBuf, CliError> {
    std::path::absolute(p).map_err(|e| CliError::parse(format!("{}: {e}", p.display())))
}

fn run(cli: Cli) -> Result<(), CliError> {
    let worker_count = match cli.workers {
        Some(0) | None => workers::available(),
        Some(n) => n,
    };
    let (manifest, design) = match cli.command {
        Command::Rerun { manifest, out } => {
            let mut m = JobManifest::read(&manifest)?;
            let design = load_design(m.job.design())?;
            let hash = design_hash(m.job.design())?;
            if hash != m.design_sha256 {
                log::warn!("{} changed since the manifest was written; outputs will differ", m.job.design().display());
                m.design_sha256 = hash;
            }
            if let Some(out) = out {
                m.job.set_out(absolute(&out)?);
            }
            m.workers = worker_count;
            m.vcadc_version = env!("CARGO_PKG_VERSION").to_string();
            (m, design)
        }
        command => {
            let path = match &command {
                Command::CompileStack { design, .. }
                | Command::ExportFea { design, .. }
                | Command::ExportMesh { design, .. }
                | Command::Preview { design, .. } => absolute(design)?,
                Command::Rerun { .. } => unreachable!(),
            };
            let design = load_design(&path)?;
            let design_sha256 = design_hash(&path)?;
            let job = resolve(command, path, &design)?;
            let m = JobManifest { vcadc_version: env!("CARGO_PKG_VERSION").to_string(), design_sha256, workers: worker_count, job };
            (m, design)
        }
    };
    manifest.job.validate(&design)?;
    let summary = manifest.job.execute(&design, worker_count)?;
    let path = manifest.write()?;
    println!("{summary}");
    log::info!("job manifest: {}", path.display());
    Ok(())
}

fn resolve(command: Command, design_path: PathBuf, design: &vcad_core::design::Design) -> Result<Job, CliError> {
    Ok(match command {
        Command::CompileStack { res, region: r, dither, out, .. } => Job::CompileStack {
            design: design_path,
            resolution: resolution3(&res)?,
            region: region(&r, design)?,
            seed: dither.seed,
            mode: dither.mode,
            out: absolute(&out)?,
        },
        Command::ExportFea { bricks, res, min_cell, max_cell, sizing, cards, max_elements, dither, out, .. } => {
            let mesher = if bricks {
                Mesher::Bricks { resolution: res.expect("clap requires --res with --bricks") }
            } else {
                let (min_cell, max_cell) = (min_cell.expect("clap requires --min-cell"), max_cell.expect("clap requires --max-cell"));
                if min_cell > max_cell {
                    return Err(CliError::parse(format!("--min-cell {min_cell} is larger than --max-cell {max_cell}")));
                }
                Mesher::Tets { min_cell, max_cell, sizing }
            };
            Job::ExportFea {
                design: design_path,
                mesher,
                seed: dither.seed,
                mode: dither.mode,
                element_cap: max_elements,
                cards,
                out: absolute(&out)?,
            }
        }
        Command::ExportMesh { segments, ref_material, res, out, .. } => Job::ExportMesh {
            design: design_path,
            segments,
            reference_material: ref_material,
            resolution: res,
            out: absolute(&out)?,
        },
        Command::Preview { axis, at, res, region: r, dither, out, .. } => Job::Preview {
            design: design_path,
            axis,
            at,
            resolution: res,
            region: region(&r, design)?,
            seed: dither.seed,
            mode: dither.mode,
            out: absolute(&out)?,
        },
        Command::Rerun { .. } => unreachable!("handled by the caller"),
    })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).format_timestamp(None).init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("vcadc: {e}");
            ExitCode::from(e.code)
        }
    }
}
