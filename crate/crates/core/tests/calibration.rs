use lensdist::calib::{self, lm, Family, FitOptions, Pose, Scene};
use lensdist::families::{decentering, rri};
use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn four_pose_scene(sigma: f64) -> Scene {
    let mut s = Scene::default_scene();
    s.poses.truncate(4);
    s.noise_sigma = sigma;
    s
}

#[test]
fn noise_statistics_match_sigma() {
    let scene = four_pose_scene(0.2);
    let noisy = calib::synthesize(&scene).unwrap();
    let exact = calib::synthesize(&Scene { noise_sigma: 0.0, ..scene.clone() }).unwrap();
    assert_eq!(noisy.len(), 4 * 54);
    let comps: Vec<f64> = noisy
        .items
        .iter()
        .zip(&exact.items)
        .flat_map(|(a, b)| [a.pixel.x - b.pixel.x, a.pixel.y - b.pixel.y])
        .collect();
    let mean = comps.iter().sum::<f64>() / comps.len() as f64;
    let std = (comps.iter().map(|c| (c - mean).powi(2)).sum::<f64>() / (comps.len() - 1) as f64).sqrt();
    assert!((std - 0.2).abs() < 0.02, "std {std}");
}

#[test]
fn zero_noise_truth_in_family_is_recovered() {
    let scene = Scene { noise_sigma: 0.0, ..Scene::default_scene() };
    let obs = calib::synthesize(&scene).unwrap();
    let r = calib::fit(&scene, &obs, &Family::from_name("matlab").unwrap(), &FitOptions::default()).unwrap();
    let want = [0.02, -0.01, 0.08, -0.02, 0.005];
    assert!(r.rms_px < 1e-7, "rms {}", r.rms_px);
    for (c, w) in r.coefficients.iter().zip(want) {
        assert!((c - w).abs() < 1e-6, "{c} vs {w}");
    }
}

#[test]
fn fits_are_bit_reproducible() {
    let scene = Scene::default_scene();
    let obs = calib::synthesize(&scene).unwrap();
    let opts = FitOptions { refine_poses: true, ..Default::default() };
    let fam = Family::from_name("decentering+rri2").unwrap();
    let a = calib::fit(&scene, &obs, &fam, &opts).unwrap();
    let b = calib::fit(&scene, &calib::synthesize(&scene).unwrap(), &fam, &opts).unwrap();
    assert_eq!(a, b);
}

#[test]
fn central_and_forward_jacobians_agree() {
    let scene = four_pose_scene(0.2);
    let obs = calib::synthesize(&scene).unwrap();
    let fam = Family::SymQuadCubic;
    let poses = scene.poses.clone();
    let np = fam.num_params();
    let f = |x: &DVector<f64>| {
        let ps: Vec<Pose> = (0..poses.len())
            .map(|v| {
                let s = &x.as_slice()[np + 6 * v..np + 6 * v + 6];
                Pose::new([s[0], s[1], s[2]], [s[3], s[4], s[5]])
            })
            .collect();
        calib::residuals(&scene, &obs, &fam, &x.as_slice()[..np], Some(&ps))
    };
    let mut x = vec![0.4, 0.01, -0.02, 0.005, 0.08, 0.003, -0.004, 0.002, -0.02, 0.005];
    for p in &poses {
        x.extend(p.rotation);
        x.extend(p.translation);
    }
    let x = DVector::from_vec(x);
    let rows = 2 * obs.len();
    let central = lm::central_jacobian(&f, &x, rows, 1e-6).unwrap();
    let forward = lm::forward_jacobian(&f, &x, rows, 1e-7).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..40 {
        let r = rng.random_range(0..rows);
        let (c, fw) = (central.row(r), forward.row(r));
        let rel = (c - fw).norm() / c.norm().max(1e-12);
        assert!(rel < 1e-4, "row {r}: relative error {rel}");
    }
}

#[test]
fn nested_families_never_increase_rms() {
    let scene = Scene::default_scene();
    let obs = calib::synthesize(&scene).unwrap();
    let chain = ["rri1", "rri2", "rri3", "rri3+decentering"];
    for refine_poses in [false, true] {
        let mut prev: Option<calib::FitReport> = None;
        let mut geometry = scene.clone();
        for name in chain {
            let fam = Family::from_name(name).unwrap();
            let init = prev.as_ref().map(|p| {
                let mut v = p.coefficients.clone();
                v.resize(fam.num_params(), 0.0);
                v
            });
            let opts = FitOptions { refine_poses, init, ..Default::default() };
            let r = calib::fit(&geometry, &obs, &fam, &opts).unwrap();
            assert!(r.converged);
            if let Some(p) = &prev {
                assert!(r.rms_px <= p.rms_px + 1e-9, "{name}: {} > {}", r.rms_px, p.rms_px);
            }
            geometry.poses = r.poses.clone();
            prev = Some(r);
        }
    }
}

#[test]
fn fixed_seed_gives_identical_observations_and_seed_matters() {
    let scene = Scene::default_scene();
    let a = calib::synthesize(&scene).unwrap();
    assert_eq!(a, calib::synthesize(&scene).unwrap());
    let b = calib::synthesize(&Scene { seed: 1, ..scene.clone() }).unwrap();
    assert_ne!(a, b);
    let truth = decentering(0.02, -0.01).sum(&rri(&[0.08, -0.02, 0.005]).unwrap());
    assert_eq!(scene.truth, truth);
}
