//! Forward application, analytic Jacobians and Newton inversion of
//! distortion maps, plus the circle and grid point sets used for figures.

use std::f64::consts::PI;

use nalgebra::{Matrix2, Vector2};
use num_complex::Complex64;
#[cfg(feature = "parallel")]
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::families::DistortionFunction;
use crate::poly::Point2;

/// Newton iterates whose Jacobian determinant falls to this value or below
/// have left the region around the center where `F` is a local
/// diffeomorphism.
pub const MIN_JACOBIAN_DET: f64 = 1e-14;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct InversionConfig {
    pub max_iter: usize,
    /// Stop (and fail unless the residual is met) once steps are this small
    /// relative to the iterate.
    pub step_tol: f64,
    pub residual_tol: f64,
    /// Initial Newton step fraction in `(0, 1]`; halved while the residual
    /// grows.
    pub damping: f64,
}

impl Default for InversionConfig {
    fn default() -> Self {
        Self {
            max_iter: 50,
            step_tol: 1e-15,
            residual_tol: 1e-12,
            damping: 1.0,
        }
    }
}

impl InversionConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_iter == 0 {
            return Err(Error::InvalidArgument("max_iter must be at least 1".into()));
        }
        if !(self.step_tol > 0.0 && self.residual_tol > 0.0) {
            return Err(Error::InvalidArgument("tolerances must be positive".into()));
        }
        if !(self.damping > 0.0 && self.damping <= 1.0) {
            return Err(Error::InvalidArgument(format!(
                "damping must lie in (0, 1], got {}",
                self.damping
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FieldSample {
    pub source: Point2,
    pub displaced: Point2,
}

/// `F(p) = p + G(p)` for every point, order preserved.
pub fn apply(f: &DistortionFunction, points: &[Point2]) -> Vec<Point2> {
    #[cfg(feature = "parallel")]
    {
        if points.len() >= 4096 {
            return points.par_iter().map(|p| f.distort(*p)).collect();
        }
    }
    points.iter().map(|p| f.distort(*p)).collect()
}

/// Analytic Jacobian of `F = id + G`.
pub fn jacobian(f: &DistortionFunction, p: Point2) -> Matrix2<f64> {
    let z = p.to_complex();
    let zb = z.conj();
    let mut dx = Complex64::new(0.0, 0.0);
    let mut dy = Complex64::new(0.0, 0.0);
    for (key, g) in f.poly().terms() {
        let (k, l) = (key.k(), key.l());
        // ∂_z and ∂_z̄ of z^k z̄^l
        let dz = if k > 0 {
            z.powu(k - 1) * zb.powu(l) * k as f64
        } else {
            Complex64::new(0.0, 0.0)
        };
        let dzb = if l > 0 {
            z.powu(k) * zb.powu(l - 1) * l as f64
        } else {
            Complex64::new(0.0, 0.0)
        };
        // ∂_x = ∂_z + ∂_z̄, ∂_y = i(∂_z − ∂_z̄)
        dx += g * (dz + dzb);
        dy += g * Complex64::i() * (dz - dzb);
    }
    Matrix2::new(1.0 + dx.re, dy.re, dx.im, 1.0 + dy.im)
}

/// Solves `F(q) = target` by damped Newton from `q₀ = target`.
pub fn invert(f: &DistortionFunction, target: Point2, cfg: &InversionConfig) -> Result<Point2> {
    cfg.validate()?;
    let t = Vector2::new(target.x, target.y);
    let residual = |q: &Vector2<f64>| {
        let d = f.distort(Point2::new(q.x, q.y));
        Vector2::new(d.x, d.y) - t
    };
    let mut q = t;
    let mut r = residual(&q);
    for iteration in 0..cfg.max_iter {
        if r.norm() < cfg.residual_tol {
            return Ok(Point2::new(q.x, q.y));
        }
        let j = jacobian(f, Point2::new(q.x, q.y));
        let det = j.determinant();
        if det <= MIN_JACOBIAN_DET {
            return Err(Error::SingularJacobian { iteration, det });
        }
        let step = j.try_inverse().ok_or(Error::SingularJacobian { iteration, det })? * r;
        let mut lambda = cfg.damping;
        let (mut q_next, mut r_next) = (q - step * lambda, residual(&(q - step * lambda)));
        while r_next.norm() > r.norm() && lambda > 1e-6 {
            lambda *= 0.5;
            q_next = q - step * lambda;
            r_next = residual(&q_next);
        }
        let moved = (q_next - q).norm();
        q = q_next;
        r = r_next;
        if moved <= cfg.step_tol * q.norm().max(1.0) && r.norm() >= cfg.residual_tol {
            return Err(Error::NoConvergence {
                iterations: iteration + 1,
                residual: r.norm(),
            });
        }
    }
    if r.norm() < cfg.residual_tol {
        Ok(Point2::new(q.x, q.y))
    } else {
        Err(Error::NoConvergence {
            iterations: cfg.max_iter,
            residual: r.norm(),
        })
    }
}

/// `count` points on the circle of `radius`, angle ascending from `(r, 0)`.
pub fn circle_points(radius: f64, count: usize) -> Result<Vec<Point2>> {
    if count < 3 {
        return Err(Error::InvalidArgument("a circle needs at least 3 points".into()));
    }
    if !(radius > 0.0 && radius.is_finite()) {
        return Err(Error::InvalidArgument(format!("radius must be positive, got {radius}")));
    }
    Ok((0..count)
        .map(|j| {
            let (s, c) = (2.0 * PI * j as f64 / count as f64).sin_cos();
            Point2::new(radius * c, radius * s)
        })
        .collect())
}

/// Square grid over `[−e, e]²`, row-major with `y` ascending, then `x`.
pub fn grid_points(half_extent: f64, per_side: usize) -> Result<Vec<Point2>> {
    if per_side < 2 {
        return Err(Error::InvalidArgument("a grid needs at least 2 points per side".into()));
    }
    if !(half_extent > 0.0 && half_extent.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "extent must be positive, got {half_extent}"
        )));
    }
    let step = 2.0 * half_extent / (per_side - 1) as f64;
    let coord = |i: usize| {
        if 2 * i + 1 == per_side {
            0.0
        } else {
            -half_extent + step * i as f64
        }
    };
    let mut out = Vec::with_capacity(per_side * per_side);
    for row in 0..per_side {
        for col in 0..per_side {
            out.push(Point2::new(coord(col), coord(row)));
        }
    }
    Ok(out)
}

pub fn sample_field(f: &DistortionFunction, points: &[Point2]) -> Vec<FieldSample> {
    points
        .iter()
        .zip(apply(f, points))
        .map(|(s, d)| FieldSample {
            source: *s,
            displaced: d,
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::families::{decentering, rri};

    fn close(a: Point2, b: Point2, tol: f64) -> bool {
        (a - b).norm() < tol
    }

    #[test]
    fn apply_examples() {
        let pts = [Point2::new(0.3, -0.2), Point2::new(1.0, 2.0)];
        assert_eq!(apply(&DistortionFunction::zero(), &pts), pts.to_vec());
        let out = apply(&rri(&[0.1]).unwrap(), &[Point2::new(1.0, 0.0)]);
        assert!(close(out[0], Point2::new(1.1, 0.0), 1e-15));
        let out = apply(&decentering(0.01, 0.0), &[Point2::new(1.0, 1.0)]);
        assert!(close(out[0], Point2::new(1.04, 1.02), 1e-15));
    }

    #[test]
    fn jacobian_examples() {
        let f = decentering(0.3, -0.7).sum(&rri(&[0.2, 0.1]).unwrap());
        assert_eq!(jacobian(&f, Point2::ORIGIN), Matrix2::identity());
        let k = 0.4;
        let r = 0.7;
        let j = jacobian(&rri(&[k]).unwrap(), Point2::new(r, 0.0));
        let want = Matrix2::new(1.0 + 3.0 * k * r * r, 0.0, 0.0, 1.0 + k * r * r);
        assert!((j - want).abs().max() < 1e-14);
    }

    #[test]
    fn invert_examples() {
        let cfg = InversionConfig::default();
        let t = Point2::new(0.2, -0.6);
        assert_eq!(invert(&DistortionFunction::zero(), t, &cfg).unwrap(), t);

        let f = rri(&[0.05]).unwrap();
        let target = f.distort(Point2::new(0.5, 0.5));
        let q = invert(&f, target, &cfg).unwrap();
        assert!(close(q, Point2::new(0.5, 0.5), 1e-9));

        let err = invert(&rri(&[-3.0]).unwrap(), Point2::new(1.0, 0.0), &cfg).unwrap_err();
        assert!(matches!(
            err,
            Error::NoConvergence { .. } | Error::SingularJacobian { .. }
        ));
    }

    #[test]
    fn invert_rejects_bad_config() {
        let f = DistortionFunction::zero();
        for cfg in [
            InversionConfig { max_iter: 0, ..Default::default() },
            InversionConfig { damping: 0.0, ..Default::default() },
            InversionConfig { damping: 1.5, ..Default::default() },
            InversionConfig { residual_tol: 0.0, ..Default::default() },
        ] {
            assert!(invert(&f, Point2::ORIGIN, &cfg).is_err());
        }
    }

    #[test]
    fn circle_and_grid() {
        let c = circle_points(1.0, 4).unwrap();
        let want = [(1.0, 0.0), (0.0, 1.0), (-1.0, 0.0), (0.0, -1.0)];
        for (p, (x, y)) in c.iter().zip(want) {
            assert!(close(*p, Point2::new(x, y), 1e-15));
        }
        let g = grid_points(1.0, 2).unwrap();
        assert_eq!(
            g,
            vec![
                Point2::new(-1.0, -1.0),
                Point2::new(1.0, -1.0),
                Point2::new(-1.0, 1.0),
                Point2::new(1.0, 1.0)
            ]
        );
        assert!(grid_points(1.0, 3).unwrap().contains(&Point2::ORIGIN));
        assert!(circle_points(1.0, 2).is_err());
        assert!(grid_points(1.0, 1).is_err());
        assert!(grid_points(-1.0, 3).is_err());
    }

    #[test]
    fn field_samples() {
        let p = [Point2::new(0.1, 0.2)];
        let s = sample_field(&DistortionFunction::zero(), &p);
        assert_eq!(s.len(), 1);
        assert_eq!(s[0].displaced, s[0].source);
        let s = sample_field(&rri(&[0.1]).unwrap(), &circle_points(1.0, 8).unwrap());
        for x in s {
            assert!((x.displaced.norm() - 1.1).abs() < 1e-14);
        }
    }
}
