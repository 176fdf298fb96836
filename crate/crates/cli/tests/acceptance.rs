//! Acceptance suite: one line per criterion, non-zero exit if any fails.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use lensdist::calib::{self, Family, FitOptions, Scene};
use lensdist::families::{
    cubic_sym, decentering, irreducible_subspace, named_space, opencv_prism, pq_family, quad_sym,
    space_sum, thin_prism, IrreducibleSpec,
};
use lensdist::poly::{self, from_real, rotate_coeffs, to_real, vn_basis, vn_rotation_matrix};
use lensdist::symmetry::{self, Axis};
use lensdist::warp::{self, InversionConfig};
use lensdist::{ComplexPoly, DistortionFunction, ModelSpace, MonomialKey, Point2};
use nalgebra::DVector;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within(elapsed: Duration, limit_s: f64) -> Result<(), String> {
    ensure(elapsed.as_secs_f64() < limit_s, || {
        format!("took {:.2} s, limit {limit_s} s", elapsed.as_secs_f64())
    })
}

fn random_poly(rng: &mut ChaCha8Rng, max_degree: u32) -> ComplexPoly {
    let mut p = ComplexPoly::zero();
    for _ in 0..rng.random_range(1..=10) {
        let n = rng.random_range(2..=max_degree);
        let l = rng.random_range(0..=n);
        let c = Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
        p.add_term(MonomialKey::new(n - l, l).unwrap(), c);
    }
    p
}

fn disc_point(rng: &mut ChaCha8Rng, radius: f64) -> Point2 {
    let r = radius * rng.random::<f64>().sqrt();
    let a = rng.random_range(0.0..2.0 * PI);
    Point2::new(r * a.cos(), r * a.sin())
}

fn representation_equivalence() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let (mut worst_coeff, mut worst_eval) = (0.0f64, 0.0f64);
    for _ in 0..1000 {
        let f = random_poly(&mut rng, 7);
        let real = to_real(&f);
        worst_coeff = worst_coeff.max(from_real(&real).max_abs_diff(&f));
        for _ in 0..10 {
            let p = disc_point(&mut rng, 1.0);
            let a = Point2::from_complex(f.eval(p.to_complex()));
            worst_eval = worst_eval.max((a - real.eval(p)).norm());
        }
    }
    ensure(worst_coeff < 1e-12, || format!("round trip error {worst_coeff:.2e}"))?;
    ensure(worst_eval < 1e-10, || format!("evaluation mismatch {worst_eval:.2e}"))?;
    within(start.elapsed(), 5.0)?;
    Ok(format!(
        "1000 polynomials: coefficient error {worst_coeff:.1e}, evaluation error {worst_eval:.1e}, {:.2} s",
        start.elapsed().as_secs_f64()
    ))
}

fn rotation_machinery() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst = 0.0f64;
    for n in 1..=7 {
        for _ in 0..100 {
            let theta = rng.random_range(-PI..PI);
            let p = disc_point(&mut rng, 1.0);
            let rp = Point2::from_complex(Complex64::from_polar(1.0, theta) * p.to_complex());
            let lhs = DVector::from_vec(vn_basis(n, rp));
            let rhs = vn_rotation_matrix(n, theta) * DVector::from_vec(vn_basis(n, p));
            worst = worst.max((lhs - rhs).amax());
        }
    }
    ensure(worst < 1e-10, || format!("V_n identity error {worst:.2e}"))?;

    for _ in 0..100 {
        let theta = rng.random_range(-PI..PI);
        let g: Vec<Complex64> = (0..3)
            .map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
            .collect();
        let f = ComplexPoly::from_terms([((2, 0), g[0]), ((1, 1), g[1]), ((0, 2), g[2])]).unwrap();
        let r = rotate_coeffs(&f, theta);
        let want = [
            Complex64::from_polar(1.0, theta) * g[0],
            Complex64::from_polar(1.0, -theta) * g[1],
            Complex64::from_polar(1.0, -3.0 * theta) * g[2],
        ];
        let got = [r.coeff(2, 0), r.coeff(1, 1), r.coeff(0, 2)];
        ensure(r.len() == 3, || "rotation changed the support".into())?;
        for (a, b) in got.iter().zip(want) {
            ensure((a - b).norm() <= 4.0 * f64::EPSILON, || format!("degree-2 map off by {:.2e}", (a - b).norm()))?;
        }
    }
    Ok(format!("V_n(R) identity n=1..7 worst {worst:.1e}; degree-2 phases (e^iθ, e^-iθ, e^-3iθ) match"))
}

fn winding_classification() -> Outcome {
    // rows of the published table, keyed by winding number, as (k, l)
    let published: &[(i32, &[(u32, u32)])] = &[
        (-6, &[(0, 5)]),
        (-5, &[(0, 4)]),
        (-4, &[(0, 3), (1, 4)]),
        (-3, &[(0, 2), (1, 3)]),
        (-2, &[(1, 2), (2, 3)]),
        (-1, &[(1, 1), (2, 2)]),
        (0, &[(2, 1), (3, 2)]),
        (1, &[(2, 0), (3, 1)]),
        (2, &[(3, 0), (4, 1)]),
        (3, &[(4, 0)]),
        (4, &[(5, 0)]),
    ];
    let table = poly::winding_table(5).map_err(|e| e.to_string())?;
    let mut placed = 0;
    ensure(table.len() == published.len(), || format!("{} winding classes, expected 11", table.len()))?;
    for (m, cells) in published {
        let got: Vec<(u32, u32)> = table
            .get(m)
            .map(|v| v.iter().map(|k| (k.k(), k.l())).collect())
            .unwrap_or_default();
        ensure(got == *cells, || format!("m = {m}: got {got:?}, expected {cells:?}"))?;
        placed += cells.len();
    }
    ensure(placed == 18, || format!("{placed} placements"))?;
    Ok("18 monomials of degrees 2..5 in 11 winding classes match the table".into())
}

/// Dyadic value `n / 2^20` with `|n| < 2^20`; products by small integers
/// and their sums stay exact.
fn dyadic(rng: &mut ChaCha8Rng) -> f64 {
    rng.random_range(-(1i64 << 20)..(1i64 << 20)) as f64 / (1u64 << 20) as f64
}

fn model_identifications() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..100 {
        let (s1, s2, u1, u2) = (dyadic(&mut rng), dyadic(&mut rng), dyadic(&mut rng), dyadic(&mut rng));
        let d = pq_family(3.0, 1.0, s1, -s2).map_err(|e| e.to_string())?;
        ensure(d.real_form() == decentering(s1, s2).real_form(), || {
            format!("decentering({s1}, {s2}) differs from pq_family(3, 1, s1, -s2)")
        })?;
        let t = pq_family(1.0, 1.0, u1, -u2).map_err(|e| e.to_string())?;
        ensure(t.real_form() == thin_prism(u1, u2).real_form(), || {
            format!("thin_prism({u1}, {u2}) differs from pq_family(1, 1, u1, -u2)")
        })?;
    }
    Ok("decentering = (3:1) and thin prism = (1:1) members, entrywise exact on 100 pairs".into())
}

fn reflection_verifier() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst = 0.0f64;
    for case in 0..500 {
        let theta = rng.random_range(0.0..PI);
        let mut u = || rng.random_range(-1.0..1.0);
        let (f, period) = match case % 3 {
            0 => (quad_sym(theta, u(), u(), u()), PI),
            // cubic terms have even windings only, so θ and θ + π/2 are both axes
            1 => (cubic_sym(theta, u(), u(), u(), u()), PI / 2.0),
            _ => (quad_sym(theta, u(), u(), u()).sum(&cubic_sym(theta, u(), u(), u(), u())), PI),
        };
        let r = symmetry::reflection_symmetry(&f, 1e-10).map_err(|e| e.to_string())?;
        let Some(Axis::Angle(a)) = r.axis else {
            return Err(format!("case {case}: no axis recovered ({r:?})"));
        };
        let d = (a - theta).rem_euclid(period);
        worst = worst.max(d.min(period - d));
    }
    ensure(worst < 1e-8, || format!("axis error {worst:.2e}"))?;

    let counter = DistortionFunction::from_poly(
        ComplexPoly::from_terms([((3, 0), Complex64::new(1.0, 0.0)), ((1, 2), Complex64::new(0.0, 1.0))]).unwrap(),
    );
    ensure(symmetry::pairwise_conditions(&counter, 1e-10).unwrap(), || "z^3 + i z zb^2 fails pairwise".into())?;
    ensure(!symmetry::reflection_symmetry(&counter, 1e-10).unwrap().symmetric, || {
        "z^3 + i z zb^2 reported symmetric".into()
    })?;
    ensure(!symmetry::reflection_symmetry(&opencv_prism(1.0, 1.0, 2.0, 3.0), 1e-10).unwrap().symmetric, || {
        "opencv_prism(1,1,2,3) reported symmetric".into()
    })?;
    ensure(symmetry::reflection_symmetry(&opencv_prism(1.0, 1.0, 2.0, 2.0), 1e-10).unwrap().symmetric, || {
        "opencv_prism(1,1,2,2) reported asymmetric".into()
    })?;
    within(start.elapsed(), 5.0)?;
    Ok(format!(
        "500 axes recovered (worst {worst:.1e}); counterexample separated; prism pair correct; {:.2} s",
        start.elapsed().as_secs_f64()
    ))
}

fn isotropy_structure() -> Outcome {
    let tol = 1e-10;
    let classify = |s: &ModelSpace| symmetry::classify(s, tol).map_err(|e| e.to_string());
    let rsf_names = [
        "decentering",
        "thin_prism",
        "radial_quad",
        "tangential_quad",
        "conj_quad",
        "rri1",
        "rri3",
        "rri5",
        "matlab",
        "radial_quad+rri3",
        "thin_prism+rri3",
    ];
    for name in rsf_names {
        let c = classify(&named_space(name).map_err(|e| e.to_string())?)?;
        ensure(c.isotropic && c.rsf, || format!("{name}: {c:?}"))?;
    }
    let weng = classify(&named_space("weng").unwrap())?;
    let (structural, _) = symmetry::structural_rsf(&named_space("weng").unwrap());
    ensure(weng.isotropic && !weng.rsf && weng.rsf_structural == Some(structural), || {
        format!("weng: {weng:?}")
    })?;
    let prism = classify(&named_space("opencv_prism4").unwrap())?;
    ensure(prism.isotropic && !prism.rsf, || format!("opencv_prism4: {prism:?}"))?;

    let z = |k, l, re: f64, im: f64| ComplexPoly::monomial(k, l, Complex64::new(re, im)).unwrap();
    let rri2 = named_space("rri2").unwrap();
    let good = irreducible_subspace(&IrreducibleSpec::new(1, z(2, 0, 1.0, 0.0), z(1, 1, 2.0, 0.0)).unwrap()).unwrap();
    let c = classify(&space_sum(&good, &rri2))?;
    ensure(c.isotropic && c.rsf, || format!("M_1[z^2, 2 z zb] + rri2: {c:?}"))?;
    let twisted = &z(1, 1, 2.0, 0.0) * Complex64::from_polar(1.0, 0.3);
    let bad = irreducible_subspace(&IrreducibleSpec::new(1, z(2, 0, 1.0, 0.0), twisted).unwrap()).unwrap();
    let c = classify(&space_sum(&bad, &rri2))?;
    ensure(c.isotropic && !c.rsf, || format!("twisted pair: {c:?}"))?;

    let line = ModelSpace::new("z2", vec![DistortionFunction::from_poly(z(2, 0, 1.0, 0.0))]).unwrap();
    ensure(!symmetry::is_isotropic(&line, tol), || "span{z^2} reported isotropic".into())?;
    Ok(format!(
        "{} catalog spaces isotropic+rsf; weng/opencv_prism4 isotropic, not rsf; twist flips rsf; span{{z^2}} rejected",
        rsf_names.len()
    ))
}

fn warp_inversion() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let cfg = InversionConfig::default();
    let (mut worst_rt, mut worst_jac) = (0.0f64, 0.0f64);
    for _ in 0..100 {
        let raw = random_poly(&mut rng, 5);
        let norm = raw.terms().map(|(_, c)| c.norm_sqr()).sum::<f64>().sqrt();
        let scale = rng.random_range(0.0..=0.05) / norm;
        let f = DistortionFunction::from_poly(&raw * scale);
        for i in 0..100 {
            let p = disc_point(&mut rng, 0.8);
            let q = warp::invert(&f, p, &cfg).map_err(|e| format!("inversion at {p:?}: {e}"))?;
            worst_rt = worst_rt.max((f.distort(q) - p).norm());
            if i % 10 == 0 {
                let j = warp::jacobian(&f, p);
                let h = 1e-6;
                for (col, e) in [(0, Point2::new(h, 0.0)), (1, Point2::new(0.0, h))] {
                    let d = f.distort(p + e) - f.distort(p - e);
                    let fd = nalgebra::Vector2::new(d.x, d.y) / (2.0 * h);
                    let rel = (j.column(col) - fd).norm() / j.column(col).norm();
                    worst_jac = worst_jac.max(rel);
                }
            }
        }
    }
    ensure(worst_rt < 1e-9, || format!("round trip error {worst_rt:.2e}"))?;
    ensure(worst_jac < 1e-5, || format!("jacobian relative error {worst_jac:.2e}"))?;
    Ok(format!(
        "10000 round trips worst {worst_rt:.1e}; jacobian vs central differences worst {worst_jac:.1e}"
    ))
}

fn synthetic_calibration() -> Outcome {
    let start = Instant::now();
    let scene = Scene::default_scene();
    let obs = calib::synthesize(&scene).map_err(|e| e.to_string())?;
    let opts = FitOptions::default();
    let fit = |name: &str| {
        calib::fit(&scene, &obs, &Family::from_name(name).unwrap(), &opts).map_err(|e| e.to_string())
    };
    let r = fit("matlab")?;
    ensure((0.18..=0.22).contains(&r.rms_px), || format!("rms {:.4} px", r.rms_px))?;
    let truth = [0.02, -0.01, 0.08, -0.02, 0.005];
    let mut worst_z = 0.0f64;
    for ((c, se), t) in r.coefficients.iter().zip(&r.std_errors).zip(truth) {
        worst_z = worst_z.max((c - t).abs() / se);
    }
    ensure(worst_z <= 3.0, || format!("coefficient {worst_z:.2} standard errors from truth"))?;

    let chain = ["rri1", "rri2", "rri3", "rri3+decentering"];
    let mut rms = Vec::new();
    for name in chain {
        rms.push(fit(name)?.rms_px);
    }
    ensure(rms.windows(2).all(|w| w[1] <= w[0]), || format!("chain rms {rms:?}"))?;
    within(start.elapsed(), 60.0)?;
    Ok(format!(
        "rms {:.4} px, worst |z| {worst_z:.2}, chain rms {}, {:.2} s",
        r.rms_px,
        rms.iter().map(|v| format!("{v:.4}")).collect::<Vec<_>>().join(" >= "),
        start.elapsed().as_secs_f64()
    ))
}

fn phi_sweep() -> Outcome {
    let scene = Scene::rri_dominant_scene();
    let obs = calib::synthesize(&scene).map_err(|e| e.to_string())?;
    let phis = calib::sweep_angles(32).map_err(|e| e.to_string())?;
    let rows = calib::sweep_pq(&scene, &obs, &phis, &FitOptions::default()).map_err(|e| e.to_string())?;
    let (idx, (phi, rms)) = rows
        .iter()
        .enumerate()
        .min_by(|a, b| a.1 .1.total_cmp(&b.1 .1))
        .expect("32 rows");
    ensure([0, 1, 31].contains(&idx), || format!("minimum at step {idx} (phi {phi:.4})"))?;
    let max = rows.iter().map(|r| r.1).fold(0.0, f64::max);
    Ok(format!("minimum at step {idx} of 32 (phi {phi:.4}, rms {rms:.4} px; max {max:.4} px)"))
}

fn data(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("data").join(name)
}

fn cli_determinism() -> Outcome {
    let dir = tempfile::TempDir::new().map_err(|e| e.to_string())?;
    let s = |p: &Path| p.to_str().unwrap().to_string();
    let scene = s(&data("default_scene.json"));
    let jobs: Vec<(&str, Vec<String>)> = vec![
        ("svg", vec!["render".into(), "--model".into(), s(&data("rri_cubic.json")), "--shape".into(), "grid".into()]),
        ("csv", vec!["sphere".into(), "--samples".into(), "32".into()]),
        ("csv", vec!["sweep".into(), "--scene".into(), scene.clone(), "--steps".into(), "8".into()]),
        ("json", vec!["bench".into(), "--scene".into(), scene.clone(), "--families".into(), "table2".into()]),
        ("json", vec!["fit".into(), "--scene".into(), scene.clone(), "--family".into(), "matlab".into(), "--refine-poses".into(), "--seed".into(), "3".into()]),
        ("json", vec!["convert".into(), "--in".into(), s(&data("decentering.json")), "--to".into(), "complex".into()]),
    ];
    let mut compared = 0;
    for (i, (ext, args)) in jobs.iter().enumerate() {
        let mut outputs = Vec::new();
        for rep in 0..2 {
            let out = dir.path().join(format!("{i}_{rep}.{ext}"));
            let status = Command::new(env!("CARGO_BIN_EXE_lensdist"))
                .args(args)
                .arg("--out")
                .arg(&out)
                .output()
                .map_err(|e| e.to_string())?;
            ensure(status.status.success(), || {
                format!("{} failed: {}", args[0], String::from_utf8_lossy(&status.stderr))
            })?;
            outputs.push(std::fs::read(&out).map_err(|e| e.to_string())?);
        }
        ensure(outputs[0] == outputs[1], || format!("{} output differs between runs", args[0]))?;
        compared += 1;
    }
    let verify = || {
        Command::new(env!("CARGO_BIN_EXE_lensdist"))
            .args(["verify", "--named", "weng", "--json"])
            .output()
            .map(|o| o.stdout)
            .map_err(|e| e.to_string())
    };
    ensure(verify()? == verify()?, || "verify output differs between runs".into())?;
    Ok(format!("{} subcommands byte-identical across repeated runs", compared + 1))
}

fn main() {
    let criteria: [Criterion; 10] = [
        ("representation equivalence", representation_equivalence),
        ("rotation machinery", rotation_machinery),
        ("winding classification", winding_classification),
        ("model identifications", model_identifications),
        ("reflection-symmetry verifier", reflection_verifier),
        ("isotropy and normal-form structure", isotropy_structure),
        ("warp and inversion", warp_inversion),
        ("synthetic calibration", synthetic_calibration),
        ("phi sweep", phi_sweep),
        ("determinism", cli_determinism),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        match run() {
            Ok(detail) => println!("acceptance {:>2} PASS  {name}: {detail}", i + 1),
            Err(why) => {
                failed += 1;
                println!("acceptance {:>2} FAIL  {name}: {why}", i + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
