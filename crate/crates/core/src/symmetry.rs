//! Algebraic checks for rotation invariance, isotropy and reflection
//! symmetry, the pointwise radial/tangential split, and the sphere picture
//! of the degree-two irreducible models.
//!
//! A function is symmetric about the axis `{a e^{iθ}}` when
//! `G(T p) = T G(p)` for the reflection `T: z ↦ e^{2iθ} z̄`. On coefficients
//! this reads `γ_kl = e^{−2iθm} γ̄_kl` with `m = k − l − 1`, so every nonzero
//! coefficient has phase `−mθ` modulo `π`.

use std::f64::consts::PI;
use std::fmt;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::ser::SerializeStruct;
use serde::{Serialize, Serializer};

use crate::error::{Error, Result};
use crate::families::{radial_hom, tangential_hom, DistortionFunction, ModelSpace};
use crate::linalg;
use crate::poly::{ComplexPoly, MonomialKey, Point2};

/// Seed of the random combinations drawn by [`classify`].
pub const CLASSIFY_SEED: u64 = 0x6c65_6e73;

/// Number of random members sampled by [`classify`].
pub const CLASSIFY_SAMPLES: usize = 50;

/// Angles used to confirm closure under finite rotations.
pub const CONFIRM_ANGLES: [f64; 3] = [PI / 7.0, PI / 3.0, 2.0];

/// Relative cut used for phase and rank decisions in the structural test.
const STRUCT_REL_TOL: f64 = 1e-9;

/// Symmetry axis of a reflection-symmetric function.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Axis {
    /// Every axis works (rotation-invariant real coefficients, or zero).
    Any,
    /// Axis angle in `[0, π)`.
    Angle(f64),
}

#[derive(Clone, Debug, PartialEq)]
pub struct SymmetryReport {
    pub symmetric: bool,
    pub axis: Option<Axis>,
    pub pairwise_ok: bool,
    pub residual: f64,
}

impl Serialize for SymmetryReport {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let mut st = s.serialize_struct("SymmetryReport", 4)?;
        st.serialize_field("symmetric", &self.symmetric)?;
        match self.axis {
            Some(Axis::Angle(a)) => st.serialize_field("axis", &a)?,
            Some(Axis::Any) => st.serialize_field("axis", "any")?,
            None => st.serialize_field("axis", &Option::<f64>::None)?,
        }
        st.serialize_field("pairwise_ok", &self.pairwise_ok)?;
        st.serialize_field("residual", &self.residual)?;
        st.end()
    }
}

impl fmt::Display for SymmetryReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let axis = match self.axis {
            Some(Axis::Angle(a)) => format!("{a:.12}"),
            Some(Axis::Any) => "any".into(),
            None => "none".into(),
        };
        write!(
            f,
            "symmetric: {}\naxis: {}\npairwise_ok: {}\nresidual: {:.3e}",
            self.symmetric, axis, self.pairwise_ok, self.residual
        )
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ClassReport {
    pub dimension: usize,
    pub isotropic: bool,
    pub rotation_invariant: bool,
    pub rsf: bool,
    /// Every sampled member passed the reflection check.
    pub rsf_sampled: bool,
    /// Normal-form test; only meaningful for isotropic spaces.
    pub rsf_structural: Option<bool>,
    pub isotropy_residual: f64,
    pub details: String,
}

impl fmt::Display for ClassReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "dimension: {}", self.dimension)?;
        writeln!(f, "isotropic: {}", self.isotropic)?;
        writeln!(f, "rotation_invariant: {}", self.rotation_invariant)?;
        writeln!(f, "rsf: {}", self.rsf)?;
        writeln!(f, "isotropy_residual: {:.3e}", self.isotropy_residual)?;
        write!(f, "details: {}", self.details)
    }
}

fn check_tol(tol: f64) -> Result<()> {
    if tol > 0.0 && tol.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("tolerance must be positive, got {tol}")))
    }
}

/// Reduces an axis angle to `[0, π)`.
pub fn normalize_axis(theta: f64) -> f64 {
    let r = theta.rem_euclid(PI);
    if r >= PI {
        0.0
    } else {
        r
    }
}

/// Distance between two axes, modulo `π`.
pub fn axis_distance(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(PI);
    d.min(PI - d)
}

/// Largest violation of `γ_kl = e^{−2iθm} γ̄_kl` over the terms of `f`.
pub fn axis_residual(f: &ComplexPoly, theta: f64) -> f64 {
    f.terms()
        .map(|(key, g)| {
            let phase = Complex64::from_polar(1.0, -2.0 * theta * key.winding() as f64);
            (g - phase * g.conj()).norm()
        })
        .fold(0.0, f64::max)
}

/// Full reflection-symmetry check with axis recovery.
///
/// Candidate axes come from the nonzero-winding term of smallest `|m|`
/// (largest magnitude on ties): its phase fixes `θ` up to multiples of
/// `π/|m|`. Each candidate is then tested against every coefficient.
pub fn reflection_symmetry(f: &DistortionFunction, tol: f64) -> Result<SymmetryReport> {
    check_tol(tol)?;
    let poly = f.poly();
    let pairwise_ok = pairwise_conditions(f, tol)?;
    if poly.is_zero() {
        return Ok(SymmetryReport {
            symmetric: true,
            axis: Some(Axis::Any),
            pairwise_ok,
            residual: 0.0,
        });
    }

    let pivot = poly
        .terms()
        .filter(|(k, _)| k.winding() != 0)
        .min_by(|(ka, ga), (kb, gb)| {
            ka.winding()
                .abs()
                .cmp(&kb.winding().abs())
                .then(gb.norm().total_cmp(&ga.norm()))
        });

    let Some((key, gamma)) = pivot else {
        // only invariant monomials: symmetric about every axis iff real
        let residual = poly.terms().map(|(_, g)| g.im.abs()).fold(0.0, f64::max);
        let symmetric = residual < tol;
        return Ok(SymmetryReport {
            symmetric,
            axis: symmetric.then_some(Axis::Any),
            pairwise_ok,
            residual,
        });
    };

    let m = key.winding();
    let mut best = (f64::INFINITY, 0.0);
    for j in 0..2 * m.abs() {
        let theta = normalize_axis((j as f64 * PI - gamma.arg()) / m as f64);
        let r = axis_residual(poly, theta);
        if r < best.0 {
            best = (r, theta);
        }
    }
    let (residual, theta) = best;
    let symmetric = residual < tol;
    Ok(SymmetryReport {
        symmetric,
        axis: symmetric.then_some(Axis::Angle(theta)),
        pairwise_ok: pairwise_ok || symmetric,
        residual,
    })
}

/// Necessary conditions `Im[γ_kl^{m′} γ̄_{k′l′}^{m}] = 0` over all pairs of
/// terms, compared relative to the magnitude of the product. They are not
/// sufficient in general.
pub fn pairwise_conditions(f: &DistortionFunction, tol: f64) -> Result<bool> {
    check_tol(tol)?;
    let terms: Vec<(MonomialKey, Complex64)> = f.poly().terms().collect();
    for (i, (ki, gi)) in terms.iter().enumerate() {
        for (kj, gj) in &terms[i + 1..] {
            let (mi, mj) = (ki.winding() as f64, kj.winding() as f64);
            // arg of γ_i^{m_j} · conj(γ_j)^{m_i}
            let phase = mj * gi.arg() - mi * gj.arg();
            if phase.sin().abs() >= tol {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

/// True iff every term with `|γ| > tol` has winding number 0.
pub fn is_rotation_invariant(f: &DistortionFunction, tol: f64) -> bool {
    f.poly()
        .terms()
        .all(|(k, g)| g.norm() <= tol || k.winding() == 0)
}

fn span_residuals(
    space: &ModelSpace,
    image: impl Fn(&ComplexPoly) -> ComplexPoly,
) -> f64 {
    let polys: Vec<&ComplexPoly> = space.basis().iter().map(|b| b.poly()).collect();
    let keys = linalg::key_union(polys.iter().copied());
    let a = linalg::coord_matrix(&polys, &keys);
    polys
        .iter()
        .map(|p| {
            let v = linalg::complex_coords(&image(p), &keys);
            let scale = linalg::complex_coords(p, &keys).norm();
            linalg::span_residual(&a, &v) / scale
        })
        .fold(0.0, f64::max)
}

/// Image of `f` under the infinitesimal rotation: `γ_kl ↦ i m γ_kl`.
pub fn rotation_generator(f: &ComplexPoly) -> ComplexPoly {
    f.map_coeffs(|k, g| g * Complex64::new(0.0, k.winding() as f64))
}

/// Worst relative residual of the rotated basis functions against the span.
pub fn isotropy_residual(space: &ModelSpace, theta: f64) -> f64 {
    span_residuals(space, |p| p.rotate(theta))
}

/// Worst relative residual of the generator images against the span.
pub fn generator_residual(space: &ModelSpace) -> f64 {
    span_residuals(space, rotation_generator)
}

/// Closure of the span under coordinate rotations, via the generator test
/// plus confirmation at the angles in [`CONFIRM_ANGLES`].
pub fn is_isotropic(space: &ModelSpace, tol: f64) -> bool {
    isotropy_worst(space) < tol
}

fn isotropy_worst(space: &ModelSpace) -> f64 {
    CONFIRM_ANGLES
        .iter()
        .map(|t| isotropy_residual(space, *t))
        .fold(generator_residual(space), f64::max)
}

/// Whether the coefficients of `p` are a common complex multiple of a real
/// vector; returns that common phase (mod π) when they are.
fn common_phase(p: &ComplexPoly) -> Option<Option<f64>> {
    let scale = p.max_abs();
    if scale == 0.0 {
        return Some(None);
    }
    let (_, lead) = p
        .terms()
        .max_by(|a, b| a.1.norm().total_cmp(&b.1.norm()))
        .expect("nonzero polynomial");
    let phase = lead.arg();
    let unit = Complex64::from_polar(1.0, -phase);
    let ok = p.terms().all(|(_, g)| (g * unit).im.abs() <= STRUCT_REL_TOL * scale);
    ok.then_some(Some(phase))
}

/// Normal-form test for isotropic spaces: the span must be one irreducible
/// `{γf + γ̄g}` with real `f`, `g` (up to a common phase) plus real
/// combinations of invariant monomials.
pub fn structural_rsf(space: &ModelSpace) -> (bool, String) {
    let polys: Vec<&ComplexPoly> = space.basis().iter().map(|b| b.poly()).collect();
    let overall = polys.iter().map(|p| p.max_abs()).fold(0.0, f64::max);

    for p in &polys {
        let inv = p.filter_winding(|m| m == 0);
        if inv.terms().any(|(_, g)| g.im.abs() > STRUCT_REL_TOL * overall) {
            return (false, "invariant part has non-real coefficients".into());
        }
    }

    let mut windings: Vec<i32> = polys
        .iter()
        .flat_map(|p| p.keys().map(|k| k.winding().abs()))
        .filter(|m| *m != 0)
        .collect();
    windings.sort_unstable();
    windings.dedup();

    let mut pairs = Vec::new();
    for m in windings {
        let parts: Vec<ComplexPoly> = polys
            .iter()
            .map(|p| p.filter_winding(|w| w.abs() == m))
            .collect();
        let refs: Vec<&ComplexPoly> = parts.iter().collect();
        let keys = linalg::key_union(refs.iter().copied());
        let r = linalg::rank(&linalg::coord_matrix(&refs, &keys), STRUCT_REL_TOL);
        if r > 0 {
            pairs.push((m, r, parts));
        }
    }

    match pairs.len() {
        0 => (true, "invariant monomials only".into()),
        1 => {
            let (m, r, parts) = pairs.pop().expect("one pair");
            if r != 2 {
                return (
                    false,
                    format!("winding ±{m} component has dimension {r}, not a single irreducible pair"),
                );
            }
            let h = parts
                .into_iter()
                .max_by(|a, b| a.max_abs().total_cmp(&b.max_abs()))
                .expect("nonempty basis");
            let f = h.filter_winding(|w| w == m);
            let g = h.filter_winding(|w| w == -m);
            match (common_phase(&f), common_phase(&g)) {
                (Some(Some(pf)), Some(Some(pg))) => {
                    if (pf + pg).sin().abs() <= STRUCT_REL_TOL {
                        (true, format!("M_{m}[f,g] with real f, g plus invariant part"))
                    } else {
                        (false, format!("M_{m}[f,g]: f and g phases do not pair"))
                    }
                }
                (Some(_), Some(_)) => (true, format!("M_{m}[f,g] with one side zero")),
                _ => (false, format!("M_{m}[f,g]: f or g is not a multiple of a real polynomial")),
            }
        }
        n => (false, format!("{n} distinct nonzero winding pairs")),
    }
}

/// Aggregated properties of a linear model.
pub fn classify(space: &ModelSpace, tol: f64) -> Result<ClassReport> {
    check_tol(tol)?;
    let isotropy_residual = if space.dimension() == 0 { 0.0 } else { isotropy_worst(space) };
    let isotropic = isotropy_residual < tol;
    let rotation_invariant = space
        .basis()
        .iter()
        .all(|b| is_rotation_invariant(b, tol));

    let mut rng = ChaCha8Rng::seed_from_u64(CLASSIFY_SEED);
    let mut rsf_sampled = true;
    for b in space.basis() {
        rsf_sampled &= reflection_symmetry(b, tol)?.symmetric;
    }
    for _ in 0..CLASSIFY_SAMPLES {
        if !rsf_sampled || space.dimension() == 0 {
            break;
        }
        let coeffs: Vec<f64> = (0..space.dimension())
            .map(|_| StandardNormal.sample(&mut rng))
            .collect();
        let member = space.member(&coeffs)?;
        let t = tol * member.poly().max_abs().max(1.0);
        rsf_sampled &= reflection_symmetry(&member, t)?.symmetric;
    }

    let (rsf_structural, details) = if isotropic {
        let (ok, why) = structural_rsf(space);
        (Some(ok), why)
    } else {
        (None, "not isotropic; rsf from sampling only".to_string())
    };
    let rsf = rsf_sampled && rsf_structural.unwrap_or(true);
    Ok(ClassReport {
        dimension: space.dimension(),
        isotropic,
        rotation_invariant,
        rsf,
        rsf_sampled,
        rsf_structural,
        isotropy_residual,
        details,
    })
}

/// Pointwise split `G(p) = p·g_r + (−y, x)·g_t`.
pub fn radial_tangential_at(f: &DistortionFunction, p: Point2) -> Result<(f64, f64)> {
    let r2 = p.x * p.x + p.y * p.y;
    if r2 == 0.0 {
        return Err(Error::OriginPoint);
    }
    let d = f.displacement(p);
    Ok(((p.x * d.x + p.y * d.y) / r2, (p.x * d.y - p.y * d.x) / r2))
}

/// Membership in the radial ⊕ tangential polynomial span: no `z̄ⁿ` terms.
pub fn in_radial_tangential_span(f: &DistortionFunction, tol: f64) -> bool {
    f.poly().terms().all(|(k, g)| k.k() > 0 || g.norm() < tol)
}

/// Same question answered by projecting every real block onto the
/// homogeneous radial and tangential bases of its degree.
pub fn in_radial_tangential_span_rank(f: &DistortionFunction, tol: f64) -> Result<bool> {
    for (n, block) in f.real_form().blocks() {
        let mut cols = Vec::with_capacity(2 * n as usize);
        for i in 0..n as usize {
            let mut w = vec![0.0; n as usize];
            w[i] = 1.0;
            cols.push(radial_hom(n, &w)?);
            cols.push(tangential_hom(n, &w)?);
        }
        let len = 2 * (n as usize + 1);
        let a = DMatrix::from_fn(len, cols.len(), |r, c| {
            cols[c].real_form().block(n).expect("homogeneous block")[(r % 2, r / 2)]
        });
        let b = nalgebra::DVector::from_fn(len, |r, _| block[(r % 2, r / 2)]);
        if linalg::span_residual(&a, &b) >= tol {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Embedding `(μ:ν) ↦ (2μν̄, |μ|² − |ν|²)` of the complex projective line
/// onto the unit sphere.
pub fn sphere_coords(mu: Complex64, nu: Complex64) -> Result<[f64; 3]> {
    let n2 = mu.norm_sqr() + nu.norm_sqr();
    if n2 == 0.0 || !n2.is_finite() {
        return Err(Error::InvalidArgument("(mu:nu) must not be (0:0)".into()));
    }
    let s = n2.sqrt();
    let (mu, nu) = (mu / s, nu / s);
    let w = mu * nu.conj() * 2.0;
    Ok([w.re, w.im, mu.norm_sqr() - nu.norm_sqr()])
}

/// One sampled point of the sphere of degree-two irreducible models.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SphereSample {
    pub mu: Complex64,
    pub nu: Complex64,
    pub xyz: [f64; 3],
    /// `(p, q)` of the quadratic family for real `(μ:ν) = (r:s)`:
    /// `p = r + s`, `q = s − r`.
    pub pq: Option<(f64, f64)>,
    pub tag: &'static str,
}

/// Samples for the sphere picture: a latitude/longitude grid (`generic`),
/// the real circle of reflection-symmetric models (`rsf`), and the marked
/// radial, tangential, decentering and thin prism models.
pub fn sphere_samples(samples: usize) -> Result<Vec<SphereSample>> {
    if samples == 0 {
        return Err(Error::InvalidArgument("need at least one sample".into()));
    }
    let mut out = Vec::new();
    let mut push = |mu: Complex64, nu: Complex64, tag: &'static str| -> Result<()> {
        let xyz = sphere_coords(mu, nu)?;
        let pq = (mu.im == 0.0 && nu.im == 0.0).then_some((mu.re + nu.re, nu.re - mu.re));
        out.push(SphereSample { mu, nu, xyz, pq, tag });
        Ok(())
    };
    let c = |re: f64| Complex64::new(re, 0.0);
    push(c(1.0), c(1.0), "radial")?;
    push(c(1.0), c(-1.0), "tangential")?;
    push(c(1.0), c(2.0), "decentering")?;
    push(c(0.0), c(1.0), "thin_prism")?;
    for i in 0..samples {
        let t = PI * i as f64 / samples as f64;
        push(c(t.cos()), c(t.sin()), "rsf")?;
    }
    let rings = ((samples as f64).sqrt().ceil() as usize).max(1);
    for i in 0..rings {
        let polar = PI * (i as f64 + 0.5) / rings as f64;
        for j in 0..rings {
            let az = 2.0 * PI * j as f64 / rings as f64;
            push(
                c((polar / 2.0).cos()),
                Complex64::from_polar((polar / 2.0).sin(), -az),
                "generic",
            )?;
        }
    }
    Ok(out)
}
