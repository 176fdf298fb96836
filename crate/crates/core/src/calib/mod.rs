//! Synthetic planar-target calibration: scene generation, projection,
//! bundle-adjustment fits of candidate distortion families and the
//! comparison table and `(p:q)` sweep built on top of them.
//!
//! The projection pipeline is normalized pinhole, then `F = id + G`, then
//! intrinsics; the distortion center is the principal point.

pub mod lm;

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector, Rotation3, Vector3};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::families::{
    cubic_sym, decentering, named_space, pq_space, quad_sym, rri, space_sum, DistortionFunction,
    ModelSpace,
};
use crate::linalg;
use crate::poly::Point2;
use crate::symmetry;

pub use lm::LmOptions;

/// Name of the shared-axis quadratic and cubic family in [`Family::from_name`].
pub const SYM_QUAD_CUBIC: &str = "sym_quad_cubic";

/// The eleven rows of the model comparison table, nested where possible.
pub const TABLE2_FAMILIES: &[&str] = &[
    "rri1",
    "rri2",
    "rri3",
    "rri4",
    "rri5",
    "decentering+rri3",
    "thin_prism+rri3",
    "radial_quad+rri3",
    "decentering+thin_prism+rri3",
    SYM_QUAD_CUBIC,
    "full_quad+full_cubic+rri_extra2",
];

/// Classification tolerance used for the comparison table.
const CLASSIFY_TOL: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Intrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
}

impl Intrinsics {
    pub fn new(fx: f64, fy: f64, cx: f64, cy: f64) -> Result<Self> {
        let i = Self { fx, fy, cx, cy };
        i.validate()?;
        Ok(i)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.fx > 0.0 && self.fy > 0.0 && self.cx.is_finite() && self.cy.is_finite()) {
            return Err(Error::InvalidArgument("focal lengths must be positive".into()));
        }
        Ok(())
    }

    fn to_pixel(self, p: Point2) -> Point2 {
        Point2::new(self.fx * p.x + self.cx, self.fy * p.y + self.cy)
    }
}

/// Target-to-camera transform `X ↦ R X + t` with `R` given as axis-angle.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Pose {
    pub rotation: [f64; 3],
    pub translation: [f64; 3],
}

impl Pose {
    pub fn new(rotation: [f64; 3], translation: [f64; 3]) -> Self {
        Self { rotation, translation }
    }

    pub fn identity() -> Self {
        Self::new([0.0; 3], [0.0; 3])
    }

    pub fn transform(&self, x: Vector3<f64>) -> Vector3<f64> {
        let r = Rotation3::new(Vector3::from(self.rotation));
        r * x + Vector3::from(self.translation)
    }

    fn from_slice(v: &[f64]) -> Self {
        Self::new([v[0], v[1], v[2]], [v[3], v[4], v[5]])
    }

    fn write_to(&self, out: &mut [f64]) {
        out[..3].copy_from_slice(&self.rotation);
        out[3..6].copy_from_slice(&self.translation);
    }
}

/// Planar `rows × cols` grid in the `z = 0` plane, centered on the origin.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Target {
    pub rows: usize,
    pub cols: usize,
    pub spacing: f64,
}

impl Target {
    /// Row-major points.
    pub fn points(&self) -> Vec<Vector3<f64>> {
        let ox = 0.5 * (self.cols as f64 - 1.0) * self.spacing;
        let oy = 0.5 * (self.rows as f64 - 1.0) * self.spacing;
        let mut out = Vec::with_capacity(self.rows * self.cols);
        for r in 0..self.rows {
            for c in 0..self.cols {
                out.push(Vector3::new(
                    c as f64 * self.spacing - ox,
                    r as f64 * self.spacing - oy,
                    0.0,
                ));
            }
        }
        out
    }

    pub fn len(&self) -> usize {
        self.rows * self.cols
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Clone, Debug)]
pub struct Scene {
    pub target: Target,
    pub poses: Vec<Pose>,
    pub intrinsics: Intrinsics,
    pub truth: DistortionFunction,
    pub noise_sigma: f64,
    pub seed: u64,
}

/// Frame size the default scene is designed for.
pub const DEFAULT_FRAME: (f64, f64) = (1280.0, 720.0);

impl Scene {
    /// 9×6 target with 0.1 spacing seen from 8 tilted poses at depth near 1,
    /// `fx = fy = 800` on a 1280×720 frame, σ = 0.2 px, truth
    /// `decentering(0.02, −0.01) + rri([0.08, −0.02, 0.005])`.
    pub fn default_scene() -> Self {
        let truth = decentering(0.02, -0.01).sum(&rri(&[0.08, -0.02, 0.005]).expect("valid rri"));
        Self {
            target: Target {
                rows: 6,
                cols: 9,
                spacing: 0.1,
            },
            poses: default_poses(),
            intrinsics: Intrinsics {
                fx: 800.0,
                fy: 800.0,
                cx: 640.0,
                cy: 360.0,
            },
            truth,
            noise_sigma: 0.2,
            seed: 0,
        }
    }

    /// Default geometry with a truth dominated by radial terms: RRI plus a
    /// small radial quadratic component.
    pub fn rri_dominant_scene() -> Self {
        let truth = rri(&[0.08, -0.02, 0.005])
            .expect("valid rri")
            .sum(&crate::families::radial_hom(2, &[0.01, 0.005]).expect("valid block"));
        Self {
            truth,
            ..Self::default_scene()
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.intrinsics.validate()?;
        if self.poses.len() < 4 {
            return Err(Error::InvalidArgument(format!(
                "scene needs at least 4 poses, got {}",
                self.poses.len()
            )));
        }
        if self.target.len() < 12 {
            return Err(Error::InvalidArgument(format!(
                "target needs at least 12 points, got {}",
                self.target.len()
            )));
        }
        if !(self.target.spacing > 0.0 && self.target.spacing.is_finite()) {
            return Err(Error::InvalidArgument("target spacing must be positive".into()));
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return Err(Error::InvalidArgument("noise sigma must be non-negative".into()));
        }
        let pts = self.target.points();
        for pose in &self.poses {
            if pose.rotation.iter().chain(&pose.translation).any(|v| !v.is_finite()) {
                return Err(Error::InvalidArgument("pose entries must be finite".into()));
            }
            for x in &pts {
                let z = pose.transform(*x).z;
                if z <= 0.0 {
                    return Err(Error::NonPositiveDepth(z));
                }
            }
        }
        Ok(())
    }
}

fn default_poses() -> Vec<Pose> {
    vec![
        Pose::new([0.0, 0.0, 0.0], [0.0, 0.0, 1.0]),
        Pose::new([0.3, 0.0, 0.05], [0.05, -0.03, 1.05]),
        Pose::new([-0.3, 0.0, -0.05], [-0.05, 0.03, 1.05]),
        Pose::new([0.0, 0.3, 0.1], [0.08, 0.0, 1.1]),
        Pose::new([0.0, -0.3, -0.1], [-0.08, 0.0, 1.1]),
        Pose::new([0.2, 0.2, 0.3], [0.1, 0.05, 1.2]),
        Pose::new([-0.2, 0.25, -0.3], [-0.1, 0.05, 1.15]),
        Pose::new([0.25, -0.2, 0.2], [0.0, -0.05, 1.0]),
    ]
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub view: usize,
    pub point: usize,
    pub pixel: Point2,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Observations {
    pub items: Vec<Observation>,
}

impl Observations {
    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn validate(&self, scene: &Scene) -> Result<()> {
        if self.items.is_empty() {
            return Err(Error::InvalidArgument("no observations".into()));
        }
        for o in &self.items {
            if o.view >= scene.poses.len() || o.point >= scene.target.len() {
                return Err(Error::InvalidArgument(format!(
                    "observation ({}, {}) is outside the scene",
                    o.view, o.point
                )));
            }
            if !o.pixel.is_finite() {
                return Err(Error::InvalidArgument("observation is not finite".into()));
            }
        }
        Ok(())
    }
}

fn normalized(pose: &Pose, x: Vector3<f64>) -> Result<Point2> {
    let c = pose.transform(x);
    if c.z <= 0.0 {
        return Err(Error::NonPositiveDepth(c.z));
    }
    Ok(Point2::new(c.x / c.z, c.y / c.z))
}

/// Pixel position of the target point `x` seen from `pose`.
pub fn project(intr: &Intrinsics, pose: &Pose, f: &DistortionFunction, x: Vector3<f64>) -> Result<Point2> {
    Ok(intr.to_pixel(f.distort(normalized(pose, x)?)))
}

/// Projections of every target point in every view plus seeded Gaussian
/// noise, view-major then point order.
pub fn synthesize(scene: &Scene) -> Result<Observations> {
    scene.validate()?;
    let noise = Normal::new(0.0, scene.noise_sigma)
        .map_err(|e| Error::InvalidArgument(e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(scene.seed);
    let pts = scene.target.points();
    let mut items = Vec::with_capacity(pts.len() * scene.poses.len());
    for (view, pose) in scene.poses.iter().enumerate() {
        for (point, x) in pts.iter().enumerate() {
            let p = project(&scene.intrinsics, pose, &scene.truth, *x)?;
            let (du, dv) = if scene.noise_sigma > 0.0 {
                (noise.sample(&mut rng), noise.sample(&mut rng))
            } else {
                (0.0, 0.0)
            };
            items.push(Observation {
                view,
                point,
                pixel: Point2::new(p.x + du, p.y + dv),
            });
        }
    }
    Ok(Observations { items })
}

/// A family of candidate distortion models.
#[derive(Clone, Debug)]
pub enum Family {
    /// Real span of a basis; parameters are the span coordinates.
    Linear(ModelSpace),
    /// Quadratic and cubic reflection-symmetric terms sharing one axis,
    /// plus the degree 5 and 7 RRI terms. Parameters are
    /// `[θ, a, b, c, d, e, f, g, α₂, α₃]`.
    SymQuadCubic,
}

impl Family {
    pub fn from_name(name: &str) -> Result<Self> {
        if name.trim() == SYM_QUAD_CUBIC {
            Ok(Family::SymQuadCubic)
        } else {
            Ok(Family::Linear(named_space(name)?))
        }
    }

    pub fn label(&self) -> &str {
        match self {
            Family::Linear(s) => s.label(),
            Family::SymQuadCubic => SYM_QUAD_CUBIC,
        }
    }

    pub fn num_params(&self) -> usize {
        match self {
            Family::Linear(s) => s.dimension(),
            Family::SymQuadCubic => 10,
        }
    }

    pub fn is_linear(&self) -> bool {
        matches!(self, Family::Linear(_))
    }

    pub fn distortion(&self, params: &[f64]) -> Result<DistortionFunction> {
        if params.len() != self.num_params() {
            return Err(Error::InvalidArgument(format!(
                "{} expects {} parameters, got {}",
                self.label(),
                self.num_params(),
                params.len()
            )));
        }
        match self {
            Family::Linear(s) => s.member(params),
            Family::SymQuadCubic => Ok(sym_member(params[0], &params[1..])),
        }
    }
}

/// `params = [a, b, c, d, e, f, g, α₂, α₃]` at axis `theta`.
fn sym_member(theta: f64, p: &[f64]) -> DistortionFunction {
    quad_sym(theta, p[0], p[1], p[2])
        .sum(&cubic_sym(theta, p[3], p[4], p[5], p[6]))
        .sum(&rri(&[0.0, p[7], p[8]]).expect("three coefficients"))
}

fn sym_basis(theta: f64) -> Vec<DistortionFunction> {
    (0..9)
        .map(|i| {
            let mut p = [0.0; 9];
            p[i] = 1.0;
            sym_member(theta, &p)
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitOptions {
    /// Refine all poses jointly with the distortion; otherwise they stay at
    /// the scene values.
    pub refine_poses: bool,
    /// Solve linear families with frozen poses by one least-squares solve.
    pub linear_fast_path: bool,
    /// Starting coefficients; defaults to zero (or a grid search over the
    /// axis for the symmetric family).
    pub init: Option<Vec<f64>>,
    pub lm: LmOptions,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            refine_poses: false,
            linear_fast_path: true,
            init: None,
            lm: LmOptions::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub label: String,
    pub rms_px: f64,
    pub coefficients: Vec<f64>,
    pub std_errors: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub per_view_rms: Vec<f64>,
    /// Final poses; equal to the scene poses unless refined.
    pub poses: Vec<Pose>,
}

struct Problem<'a> {
    scene: &'a Scene,
    obs: &'a Observations,
    points: Vec<Vector3<f64>>,
    /// Normalized projections under the scene poses.
    frozen: Vec<Point2>,
}

impl<'a> Problem<'a> {
    fn new(scene: &'a Scene, obs: &'a Observations) -> Result<Self> {
        scene.validate()?;
        obs.validate(scene)?;
        let points = scene.target.points();
        let frozen = obs
            .items
            .iter()
            .map(|o| normalized(&scene.poses[o.view], points[o.point]))
            .collect::<Result<_>>()?;
        Ok(Self {
            scene,
            obs,
            points,
            frozen,
        })
    }

    fn residuals(&self, f: &DistortionFunction, poses: Option<&[Pose]>) -> Result<DVector<f64>> {
        let intr = &self.scene.intrinsics;
        let mut r = DVector::zeros(2 * self.obs.len());
        for (i, o) in self.obs.items.iter().enumerate() {
            let n = match poses {
                Some(p) => normalized(&p[o.view], self.points[o.point])?,
                None => self.frozen[i],
            };
            let px = intr.to_pixel(f.distort(n));
            r[2 * i] = o.pixel.x - px.x;
            r[2 * i + 1] = o.pixel.y - px.y;
        }
        Ok(r)
    }

    /// Least squares over a fixed basis with frozen poses. Returns the
    /// coefficients, the design matrix and the residuals.
    fn linear_solve(&self, basis: &[DistortionFunction]) -> (DVector<f64>, DMatrix<f64>, DVector<f64>) {
        let intr = &self.scene.intrinsics;
        let rows = 2 * self.obs.len();
        let mut a = DMatrix::zeros(rows, basis.len());
        let mut b = DVector::zeros(rows);
        for (i, o) in self.obs.items.iter().enumerate() {
            let n = self.frozen[i];
            let base = intr.to_pixel(n);
            b[2 * i] = o.pixel.x - base.x;
            b[2 * i + 1] = o.pixel.y - base.y;
            for (j, g) in basis.iter().enumerate() {
                let d = g.displacement(n);
                a[(2 * i, j)] = intr.fx * d.x;
                a[(2 * i + 1, j)] = intr.fy * d.y;
            }
        }
        let x = linalg::lstsq(&a, &b, 1e-10);
        let r = &b - &a * &x;
        (x, a, r)
    }

    fn per_view_rms(&self, r: &DVector<f64>) -> Vec<f64> {
        let views = self.scene.poses.len();
        let mut sum = vec![0.0; views];
        let mut count = vec![0usize; views];
        for (i, o) in self.obs.items.iter().enumerate() {
            sum[o.view] += r[2 * i].powi(2) + r[2 * i + 1].powi(2);
            count[o.view] += 2;
        }
        sum.iter()
            .zip(&count)
            .map(|(s, c)| if *c == 0 { 0.0 } else { (s / *c as f64).sqrt() })
            .collect()
    }
}

fn rms(r: &DVector<f64>) -> f64 {
    if r.is_empty() {
        0.0
    } else {
        (r.norm_squared() / r.len() as f64).sqrt()
    }
}

/// `sqrt(diag(σ̂² (JᵀJ)⁺))` for the first `count` parameters.
fn std_errors(j: &DMatrix<f64>, r: &DVector<f64>, count: usize) -> Vec<f64> {
    let dof = r.len().saturating_sub(j.ncols()).max(1);
    let s2 = r.norm_squared() / dof as f64;
    let cov = linalg::pinv_symmetric(&(j.transpose() * j), 1e-10) * s2;
    (0..count).map(|i| cov[(i, i)].max(0.0).sqrt()).collect()
}

/// Bundle-adjustment fit of `family` to `obs`, starting from the scene
/// poses.
pub fn fit(scene: &Scene, obs: &Observations, family: &Family, opts: &FitOptions) -> Result<FitReport> {
    let problem = Problem::new(scene, obs)?;
    let np = family.num_params();
    if let Some(init) = &opts.init {
        if init.len() != np {
            return Err(Error::InvalidArgument(format!(
                "init has {} values, {} expects {np}",
                init.len(),
                family.label()
            )));
        }
    }

    let mut iterations = 0;
    let mut converged = true;
    let mut coeffs: Vec<f64>;
    let mut frozen_fit = None;

    match family {
        Family::Linear(space) if opts.linear_fast_path || opts.init.is_none() => {
            let (x, a, r) = problem.linear_solve(space.basis());
            coeffs = x.iter().copied().collect();
            iterations = 1;
            if opts.linear_fast_path && !opts.refine_poses {
                frozen_fit = Some((a, r));
            }
        }
        Family::Linear(_) => coeffs = opts.init.clone().expect("checked above"),
        Family::SymQuadCubic => {
            coeffs = match &opts.init {
                Some(v) => v.clone(),
                None => sym_grid_init(&problem),
            };
        }
    }

    if !opts.linear_fast_path && family.is_linear() && opts.init.is_none() {
        // generic path starts from zero so it is a genuine comparison
        coeffs = vec![0.0; np];
        iterations = 0;
    }

    let mut poses = scene.poses.clone();
    let (residuals, jacobian) = match frozen_fit {
        Some((a, r)) => (r, a),
        None => {
            let nv = scene.poses.len();
            let total = np + if opts.refine_poses { 6 * nv } else { 0 };
            let mut x0 = DVector::zeros(total);
            x0.as_mut_slice()[..np].copy_from_slice(&coeffs);
            if opts.refine_poses {
                for (v, p) in scene.poses.iter().enumerate() {
                    p.write_to(&mut x0.as_mut_slice()[np + 6 * v..np + 6 * v + 6]);
                }
            }
            let refine = opts.refine_poses;
            let eval = |x: &DVector<f64>| -> Result<DVector<f64>> {
                let f = family.distortion(&x.as_slice()[..np])?;
                if refine {
                    let ps: Vec<Pose> = (0..nv)
                        .map(|v| Pose::from_slice(&x.as_slice()[np + 6 * v..np + 6 * v + 6]))
                        .collect();
                    problem.residuals(&f, Some(&ps))
                } else {
                    problem.residuals(&f, None)
                }
            };
            let res = lm::levenberg_marquardt(&eval, x0, &opts.lm)?;
            iterations += res.iterations;
            converged = res.converged;
            coeffs = res.x.as_slice()[..np].to_vec();
            if refine {
                poses = (0..nv)
                    .map(|v| Pose::from_slice(&res.x.as_slice()[np + 6 * v..np + 6 * v + 6]))
                    .collect();
            }
            (res.residuals, res.jacobian)
        }
    };

    if matches!(family, Family::SymQuadCubic) {
        coeffs[0] = symmetry::normalize_axis(coeffs[0]);
    }

    Ok(FitReport {
        label: family.label().to_string(),
        rms_px: rms(&residuals),
        std_errors: std_errors(&jacobian, &residuals, np),
        coefficients: coeffs,
        iterations,
        converged,
        per_view_rms: problem.per_view_rms(&residuals),
        poses,
    })
}

/// Stacked `measured − projected` pixel residuals for `params` of `family`,
/// under `poses` or the scene poses.
pub fn residuals(
    scene: &Scene,
    obs: &Observations,
    family: &Family,
    params: &[f64],
    poses: Option<&[Pose]>,
) -> Result<DVector<f64>> {
    let problem = Problem::new(scene, obs)?;
    problem.residuals(&family.distortion(params)?, poses)
}

/// Best linear fit over a grid of axis angles, as `[θ, a, …, α₃]`.
fn sym_grid_init(problem: &Problem) -> Vec<f64> {
    const STEPS: usize = 12;
    let mut best: Option<(f64, Vec<f64>)> = None;
    for s in 0..STEPS {
        let theta = PI * s as f64 / STEPS as f64;
        let (x, _, r) = problem.linear_solve(&sym_basis(theta));
        let cost = r.norm_squared();
        if best.as_ref().is_none_or(|(c, _)| cost < *c) {
            let mut v = vec![theta];
            v.extend(x.iter());
            best = Some((cost, v));
        }
    }
    best.expect("nonempty grid").1
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CompareRow {
    pub label: String,
    pub params: usize,
    pub linear: bool,
    pub rri: bool,
    pub rsf: bool,
    pub rms_px: f64,
    pub converged: bool,
}

/// Linear / rotation-invariant / reflection-symmetric flags of a family.
pub fn family_properties(family: &Family) -> Result<(bool, bool, bool)> {
    match family {
        Family::Linear(space) => {
            let c = symmetry::classify(space, CLASSIFY_TOL)?;
            Ok((true, c.rotation_invariant, c.rsf))
        }
        // every member is symmetric about its own axis; the quadratic part
        // is not rotation invariant
        Family::SymQuadCubic => Ok((false, false, true)),
    }
}

/// One fit per family, rows in input order.
pub fn compare(scene: &Scene, obs: &Observations, families: &[Family], opts: &FitOptions) -> Result<Vec<CompareRow>> {
    families
        .iter()
        .map(|fam| {
            let report = fit(scene, obs, fam, opts)?;
            let (linear, rri, rsf) = family_properties(fam)?;
            Ok(CompareRow {
                label: fam.label().to_string(),
                params: fam.num_params(),
                linear,
                rri,
                rsf,
                rms_px: report.rms_px,
                converged: report.converged,
            })
        })
        .collect()
}

/// `(p:q) = (cos φ : sin φ)` quadratic family plus three RRI terms.
pub fn pq_rri_family(phi: f64) -> Result<Family> {
    let space = space_sum(&pq_space(phi.cos(), phi.sin())?, &named_space("rri3")?);
    Ok(Family::Linear(space.with_label(format!("pq({phi})+rri3"))))
}

/// `φ_j = jπ/N` for `j = 0..N`.
pub fn sweep_angles(steps: usize) -> Result<Vec<f64>> {
    if steps == 0 {
        return Err(Error::InvalidArgument("sweep needs at least one step".into()));
    }
    Ok((0..steps).map(|j| PI * j as f64 / steps as f64).collect())
}

/// rms of the [`pq_rri_family`] fit for each angle.
pub fn sweep_pq(scene: &Scene, obs: &Observations, phis: &[f64], opts: &FitOptions) -> Result<Vec<(f64, f64)>> {
    if phis.is_empty() {
        return Err(Error::InvalidArgument("no sweep angles".into()));
    }
    phis.iter()
        .map(|&phi| Ok((phi, fit(scene, obs, &pq_rri_family(phi)?, opts)?.rms_px)))
        .collect()
}
