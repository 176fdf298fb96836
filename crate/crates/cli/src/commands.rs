use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use lensdist::calib::{self, Family, FitOptions, FitReport, Observations, Scene};
use lensdist::io::{self, Representation};
use lensdist::symmetry;
use lensdist::warp;
use lensdist::{DistortionFunction, Error};
use serde::Serialize;

use crate::{BenchArgs, ConvertArgs, FitArgs, Form, RenderArgs, SceneArgs, Shape, SphereArgs, SweepArgs, VerifyArgs};

pub struct CliError {
    pub code: u8,
    pub message: String,
}

type CliResult<T> = Result<T, CliError>;

fn input(message: impl Into<String>) -> CliError {
    CliError { code: 2, message: message.into() }
}

fn io_error(message: impl Into<String>) -> CliError {
    CliError { code: 3, message: message.into() }
}

fn numerical(message: impl Into<String>) -> CliError {
    CliError { code: 4, message: message.into() }
}

/// Maps library errors onto exit codes.
fn lib(e: Error) -> CliError {
    match e {
        Error::Io(_) => io_error(e.to_string()),
        Error::NoConvergence { .. } | Error::SingularJacobian { .. } => numerical(e.to_string()),
        _ => input(e.to_string()),
    }
}

pub fn init_threads() -> CliResult<()> {
    let Ok(raw) = std::env::var("LENSDIST_THREADS") else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .map_err(|_| input(format!("LENSDIST_THREADS must be a non-negative integer, got {raw:?}")))?;
    if n > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| input(e.to_string()))?;
    }
    Ok(())
}

fn read_text(path: &Path) -> CliResult<String> {
    fs::read_to_string(path).map_err(|e| input(format!("cannot read {}: {e}", path.display())))
}

/// Fails early when the output directory does not exist.
fn check_out(path: &Path) -> CliResult<()> {
    match path.parent() {
        Some(dir) if !dir.as_os_str().is_empty() && !dir.is_dir() => Err(io_error(format!(
            "output directory {} does not exist",
            dir.display()
        ))),
        _ => Ok(()),
    }
}

fn write_out(path: &Path, bytes: &[u8]) -> CliResult<()> {
    fs::write(path, bytes).map_err(|e| io_error(format!("cannot write {}: {e}", path.display())))
}

fn read_model(path: &Path) -> CliResult<DistortionFunction> {
    io::parse_model(&read_text(path)?).map_err(|e| input(format!("{}: {e}", path.display())))
}

pub fn render(a: RenderArgs) -> CliResult<()> {
    check_out(&a.out)?;
    if let Some(p) = &a.field_csv {
        check_out(p)?;
    }
    let f = read_model(&a.model)?;
    let points = match a.shape {
        Shape::Circle => warp::circle_points(a.radius, a.count.unwrap_or(64)),
        Shape::Grid => warp::grid_points(a.extent, a.count.unwrap_or(11)),
    }
    .map_err(lib)?;
    let samples = warp::sample_field(&f, &points);
    let title = a.model.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    write_out(&a.out, lensdist::svg::render_field(&samples, &title).as_bytes())?;
    if let Some(p) = &a.field_csv {
        let mut buf = Vec::new();
        io::write_field_csv(&mut buf, &samples).map_err(lib)?;
        write_out(p, &buf)?;
    }
    Ok(())
}

pub fn verify(a: VerifyArgs) -> CliResult<()> {
    if a.tol.is_nan() || a.tol <= 0.0 {
        return Err(input("--tol must be positive"));
    }
    if let Some(path) = &a.model {
        let f = read_model(path)?;
        let report = symmetry::reflection_symmetry(&f, a.tol).map_err(lib)?;
        if a.json {
            print!("{}", io::to_json(&report));
        } else {
            println!("{report}");
            println!("rotation_invariant: {}", symmetry::is_rotation_invariant(&f, a.tol));
            println!(
                "radial_tangential_span: {}",
                symmetry::in_radial_tangential_span(&f, a.tol)
            );
        }
        return Ok(());
    }
    let space = match (&a.space, &a.named) {
        (Some(path), _) => io::parse_space(&read_text(path)?).map_err(|e| input(format!("{}: {e}", path.display())))?,
        (None, Some(name)) => lensdist::families::named_space(name).map_err(lib)?,
        (None, None) => return Err(input("one of --model, --space or --named is required")),
    };
    let report = symmetry::classify(&space, a.tol).map_err(lib)?;
    if a.json {
        print!("{}", io::to_json(&report));
    } else {
        println!("label: {}", space.label());
        println!("{report}");
    }
    Ok(())
}

pub fn convert(a: ConvertArgs) -> CliResult<()> {
    check_out(&a.out)?;
    let f = read_model(&a.input)?;
    let repr = match a.to {
        Form::Real => Representation::Real,
        Form::Complex => Representation::Complex,
    };
    write_out(&a.out, io::model_to_json(&f, repr).as_bytes())
}

fn load_problem(s: &SceneArgs) -> CliResult<(Scene, Observations, FitOptions)> {
    let mut scene = io::parse_scene(&read_text(&s.scene)?)
        .map_err(|e| input(format!("{}: {e}", s.scene.display())))?;
    if let Some(seed) = s.seed {
        scene.seed = seed;
    }
    let obs = match &s.obs {
        Some(path) => {
            let file = fs::File::open(path).map_err(|e| input(format!("cannot read {}: {e}", path.display())))?;
            let obs = io::read_observations_csv(file).map_err(|e| input(format!("{}: {e}", path.display())))?;
            obs.validate(&scene).map_err(lib)?;
            obs
        }
        None => calib::synthesize(&scene).map_err(lib)?,
    };
    let opts = FitOptions {
        refine_poses: s.refine_poses,
        ..FitOptions::default()
    };
    Ok((scene, obs, opts))
}

fn parse_families(list: &str) -> CliResult<Vec<Family>> {
    let names: Vec<&str> = if list.trim() == "table2" {
        calib::TABLE2_FAMILIES.to_vec()
    } else {
        list.split(',').map(str::trim).filter(|s| !s.is_empty()).collect()
    };
    if names.is_empty() {
        return Err(input("no families given"));
    }
    names.iter().map(|n| Family::from_name(n).map_err(lib)).collect()
}

#[derive(Serialize)]
struct FitDoc<'a> {
    format: &'static str,
    version: u32,
    seed: u64,
    #[serde(flatten)]
    report: &'a FitReport,
}

pub fn fit(a: FitArgs) -> CliResult<()> {
    if let Some(p) = &a.out {
        check_out(p)?;
    }
    if let Some(p) = &a.obs_out {
        check_out(p)?;
    }
    let family = Family::from_name(&a.family).map_err(lib)?;
    let (scene, obs, opts) = load_problem(&a.scene)?;
    let report = calib::fit(&scene, &obs, &family, &opts).map_err(lib)?;
    let doc = io::to_json(&FitDoc {
        format: "lensdist-fit",
        version: io::VERSION,
        seed: scene.seed,
        report: &report,
    });
    match &a.out {
        Some(p) => write_out(p, doc.as_bytes())?,
        None => print!("{doc}"),
    }
    if let Some(p) = &a.obs_out {
        let mut buf = Vec::new();
        io::write_observations_csv(&mut buf, &obs).map_err(lib)?;
        write_out(p, &buf)?;
    }
    if !report.converged {
        let msg = format!("fit of {} did not converge after {} iterations", report.label, report.iterations);
        if a.strict {
            return Err(numerical(msg));
        }
        eprintln!("lensdist: warning: {msg}");
    }
    Ok(())
}

#[derive(Serialize)]
struct BenchDoc<'a> {
    format: &'static str,
    version: u32,
    seed: u64,
    refine_poses: bool,
    rows: &'a [calib::CompareRow],
}

fn yes_no(b: bool) -> &'static str {
    if b {
        "Y"
    } else {
        "N"
    }
}

fn bench_table(rows: &[calib::CompareRow]) -> String {
    let width = rows.iter().map(|r| r.label.len()).max().unwrap_or(0).max("model".len());
    let mut out = String::new();
    let _ = writeln!(out, "{:<width$}  {:>3}  {:>6}  {:>3}  {:>3}  {:>10}", "model", "NP", "Linear", "RRI", "RSF", "rms [px]");
    for r in rows {
        let _ = writeln!(
            out,
            "{:<width$}  {:>3}  {:>6}  {:>3}  {:>3}  {:>10.6}",
            r.label,
            r.params,
            yes_no(r.linear),
            yes_no(r.rri),
            yes_no(r.rsf),
            r.rms_px
        );
    }
    out
}

pub fn bench(a: BenchArgs) -> CliResult<()> {
    check_out(&a.out)?;
    let families = parse_families(&a.families)?;
    let (scene, obs, opts) = load_problem(&a.scene)?;
    let rows = calib::compare(&scene, &obs, &families, &opts).map_err(lib)?;
    write_out(
        &a.out,
        io::to_json(&BenchDoc {
            format: "lensdist-bench",
            version: io::VERSION,
            seed: scene.seed,
            refine_poses: opts.refine_poses,
            rows: &rows,
        })
        .as_bytes(),
    )?;
    print!("{}", bench_table(&rows));
    if let Some(r) = rows.iter().find(|r| !r.converged) {
        let msg = format!("fit of {} did not converge", r.label);
        if a.strict {
            return Err(numerical(msg));
        }
        eprintln!("lensdist: warning: {msg}");
    }
    Ok(())
}

pub fn sweep(a: SweepArgs) -> CliResult<()> {
    check_out(&a.out)?;
    if a.steps == 0 {
        return Err(input("--steps must be at least 1"));
    }
    let (scene, obs, opts) = load_problem(&a.scene)?;
    let phis = calib::sweep_angles(a.steps).map_err(lib)?;
    let rows = calib::sweep_pq(&scene, &obs, &phis, &opts).map_err(lib)?;
    let mut out = String::from("phi,rms\n");
    for (phi, rms) in rows {
        let _ = writeln!(out, "{},{}", io::fmt_f64(phi), io::fmt_f64(rms));
    }
    write_out(&a.out, out.as_bytes())
}

pub fn sphere(a: SphereArgs) -> CliResult<()> {
    check_out(&a.out)?;
    let samples = symmetry::sphere_samples(a.samples).map_err(lib)?;
    let mut out = String::from("mu_re,mu_im,nu_re,nu_im,x,y,z,p,q,tag\n");
    for s in samples {
        let (p, q) = s
            .pq
            .map(|(p, q)| (io::fmt_f64(p), io::fmt_f64(q)))
            .unwrap_or_default();
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{}",
            io::fmt_f64(s.mu.re),
            io::fmt_f64(s.mu.im),
            io::fmt_f64(s.nu.re),
            io::fmt_f64(s.nu.im),
            io::fmt_f64(s.xyz[0]),
            io::fmt_f64(s.xyz[1]),
            io::fmt_f64(s.xyz[2]),
            p,
            q,
            s.tag
        );
    }
    write_out(&a.out, out.as_bytes())
}
