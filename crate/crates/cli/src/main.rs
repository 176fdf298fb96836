//! `lensdist`: render distortion fields, verify model properties, convert
//! between coefficient forms and run synthetic calibration comparisons.
//!
//! Exit codes: 0 success, 2 input error, 3 I/O error, 4 numerical failure
//! (fit non-convergence under `--strict`). `LENSDIST_THREADS` caps the
//! worker threads used inside fits (0 or unset means automatic).

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

const CATALOG_HELP: &str = "\
Catalog spaces (for --named, --family, --families); join with `+` for sums:
  rri1..rri7       radially symmetric odd terms r^2, r^4, ... times p
  rri_extra2       the r^4 and r^6 RRI terms only
  decentering      Brown-Conrady decentering pair
  thin_prism       thin prism pair
  radial_quad      degree-2 radial homogeneous terms
  tangential_quad  degree-2 tangential homogeneous terms
  conj_quad        conj(z)^2 pair
  weng             decentering + thin_prism
  matlab           decentering + rri3
  opencv_prism4    OpenCV quartic thin prism (s1..s4)
  full_quad        every degree-2 monomial
  full_cubic       every degree-3 monomial
Nonlinear family for fit/bench: sym_quad_cubic (10 parameters).
`--families table2` selects the 11 standard comparison rows.";

#[derive(Parser, Debug)]
#[command(
    name = "lensdist",
    version,
    about = "Polynomial lens distortion models",
    after_help = CATALOG_HELP
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Draw the action of a model on a circle or grid of points as SVG.
    Render(RenderArgs),
    /// Report reflection symmetry of a model, or the class of a space.
    Verify(VerifyArgs),
    /// Rewrite a model file in real-matrix or complex-coefficient form.
    Convert(ConvertArgs),
    /// Fit one family to a scene's observations.
    Fit(FitArgs),
    /// Fit several families and tabulate their rms errors.
    Bench(BenchArgs),
    /// rms of the (cos φ : sin φ) quadratic family plus RRI over φ in [0, π).
    Sweep(SweepArgs),
    /// Sample the sphere of degree-two irreducible models.
    Sphere(SphereArgs),
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum Shape {
    Circle,
    Grid,
}

#[derive(Args, Debug)]
struct RenderArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long, value_enum, default_value = "circle")]
    shape: Shape,
    #[arg(long)]
    out: PathBuf,
    /// Circle radius.
    #[arg(long, default_value_t = 1.0)]
    radius: f64,
    /// Half side of the grid square.
    #[arg(long, default_value_t = 1.0)]
    extent: f64,
    /// Points on the circle, or points per grid side (default 64 / 11).
    #[arg(long)]
    count: Option<usize>,
    /// Also write the samples as `x,y,xd,yd` CSV.
    #[arg(long)]
    field_csv: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct VerifyArgs {
    #[arg(long, conflicts_with_all = ["space", "named"], required_unless_present_any = ["space", "named"])]
    model: Option<PathBuf>,
    #[arg(long, conflicts_with = "named")]
    space: Option<PathBuf>,
    /// Catalog space name, e.g. `decentering+rri3`.
    #[arg(long)]
    named: Option<String>,
    #[arg(long)]
    json: bool,
    #[arg(long, default_value_t = 1e-10)]
    tol: f64,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum Form {
    Real,
    Complex,
}

#[derive(Args, Debug)]
struct ConvertArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long, value_enum)]
    to: Form,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct SceneArgs {
    #[arg(long)]
    scene: PathBuf,
    /// Observations CSV (`view,point,u,v`); synthesized from the scene when
    /// absent.
    #[arg(long)]
    obs: Option<PathBuf>,
    /// Noise seed; overrides the scene's seed when given.
    #[arg(long)]
    seed: Option<u64>,
    /// Refine poses jointly with the distortion instead of freezing them.
    #[arg(long)]
    refine_poses: bool,
}

#[derive(Args, Debug)]
struct FitArgs {
    #[command(flatten)]
    scene: SceneArgs,
    #[arg(long)]
    family: String,
    /// Exit with code 4 if the fit does not converge.
    #[arg(long)]
    strict: bool,
    /// Report JSON; printed to stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Write the observations used for the fit.
    #[arg(long)]
    obs_out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct BenchArgs {
    #[command(flatten)]
    scene: SceneArgs,
    /// Comma-separated family names, or `table2` for the standard rows.
    #[arg(long)]
    families: String,
    #[arg(long)]
    strict: bool,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct SweepArgs {
    #[command(flatten)]
    scene: SceneArgs,
    #[arg(long)]
    steps: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct SphereArgs {
    /// Points on the symmetric circle; the generic grid uses about as many.
    #[arg(long)]
    samples: usize,
    #[arg(long)]
    out: PathBuf,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = commands::init_threads().and_then(|_| match cli.command {
        Command::Render(a) => commands::render(a),
        Command::Verify(a) => commands::verify(a),
        Command::Convert(a) => commands::convert(a),
        Command::Fit(a) => commands::fit(a),
        Command::Bench(a) => commands::bench(a),
        Command::Sweep(a) => commands::sweep(a),
        Command::Sphere(a) => commands::sphere(a),
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("lensdist: {}", e.message);
            ExitCode::from(e.code)
        }
    }
}
