//! Polynomial displacement functions in complex and real-matrix form.
//!
//! A displacement is written either as a single complex polynomial
//!
//! ```text
//! Δz = f(z, z̄) = Σ γ_kl z^k z̄^l,   k + l ≥ 2
//! ```
//!
//! or as one real `2 × (n+1)` matrix per homogeneous degree `n`, acting on
//! `v_n(x, y) = (xⁿ, xⁿ⁻¹y, …, yⁿ)`. Conversions between the two forms
//! expand `z = x + iy` (and back, `x = (z+z̄)/2`, `y = (z−z̄)/2i`) with exact
//! binomial coefficients.
//!
//! Coordinate rotations act on the complex form by a phase per monomial,
//! `γ_kl ↦ e^{iθ(k−l−1)} γ_kl`, and on the real form by `M ↦ Rᵀ M V_n(R)`.

use std::collections::BTreeMap;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use nalgebra::{DMatrix, Matrix2, Matrix2xX};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Highest homogeneous degree accepted anywhere in the library.
pub const MAX_DEGREE: u32 = 16;

/// Default absolute tolerance for coefficient comparisons.
pub const DEFAULT_TOL: f64 = 1e-10;

/// Exponent pair `(k, l)` of the monomial `z^k z̄^l`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct MonomialKey {
    k: u32,
    l: u32,
}

impl MonomialKey {
    pub fn new(k: u32, l: u32) -> Result<Self> {
        let degree = k + l;
        if degree < 2 {
            return Err(Error::InvalidMonomial { k, l });
        }
        if degree > MAX_DEGREE {
            return Err(Error::DegreeTooHigh(degree));
        }
        Ok(Self { k, l })
    }

    pub fn k(self) -> u32 {
        self.k
    }

    pub fn l(self) -> u32 {
        self.l
    }

    pub fn degree(self) -> u32 {
        self.k + self.l
    }

    /// Phase exponent picked up under a coordinate rotation, `k − l − 1`.
    pub fn winding(self) -> i32 {
        self.k as i32 - self.l as i32 - 1
    }
}

// Degree first, then by power of z̄, so degree 2 lists z², zz̄, z̄².
impl Ord for MonomialKey {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        (self.degree(), self.l).cmp(&(other.degree(), other.l))
    }
}

impl PartialOrd for MonomialKey {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for MonomialKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let part = |f: &mut fmt::Formatter<'_>, sym: &str, e: u32| match e {
            0 => Ok(()),
            1 => write!(f, "{sym}"),
            _ => write!(f, "{sym}^{e}"),
        };
        part(f, "z", self.k)?;
        if self.k > 0 && self.l > 0 {
            write!(f, " ")?;
        }
        part(f, "zb", self.l)
    }
}

/// Winding number `k − l − 1` of a monomial.
pub fn winding_number(key: MonomialKey) -> i32 {
    key.winding()
}

/// A point of the normalized image plane.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Point2 {
    pub x: f64,
    pub y: f64,
}

impl Point2 {
    pub const ORIGIN: Point2 = Point2 { x: 0.0, y: 0.0 };

    pub fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn to_complex(self) -> Complex64 {
        Complex64::new(self.x, self.y)
    }

    pub fn from_complex(z: Complex64) -> Self {
        Self { x: z.re, y: z.im }
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

impl Add for Point2 {
    type Output = Point2;
    fn add(self, rhs: Point2) -> Point2 {
        Point2::new(self.x + rhs.x, self.y + rhs.y)
    }
}

impl Sub for Point2 {
    type Output = Point2;
    fn sub(self, rhs: Point2) -> Point2 {
        Point2::new(self.x - rhs.x, self.y - rhs.y)
    }
}

/// Plane rotation angle in radians. `θ` and `θ + 2π` act identically.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct RotationAngle(pub f64);

impl RotationAngle {
    pub fn radians(self) -> f64 {
        self.0
    }

    /// Rotation matrix `R_θ`.
    pub fn matrix(self) -> Matrix2<f64> {
        let (s, c) = self.0.sin_cos();
        Matrix2::new(c, -s, s, c)
    }
}

impl From<f64> for RotationAngle {
    fn from(theta: f64) -> Self {
        RotationAngle(theta)
    }
}

/// Sparse complex polynomial `Σ γ_kl z^k z̄^l` with no stored zero terms.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ComplexPoly {
    terms: BTreeMap<MonomialKey, Complex64>,
}

impl ComplexPoly {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn monomial(k: u32, l: u32, coeff: Complex64) -> Result<Self> {
        let mut p = Self::zero();
        p.add_term(MonomialKey::new(k, l)?, coeff);
        Ok(p)
    }

    pub fn from_terms<I>(terms: I) -> Result<Self>
    where
        I: IntoIterator<Item = ((u32, u32), Complex64)>,
    {
        let mut p = Self::zero();
        for ((k, l), c) in terms {
            p.add_term(MonomialKey::new(k, l)?, c);
        }
        Ok(p)
    }

    /// Adds `coeff` to the coefficient of `key`, dropping the term if it
    /// becomes exactly zero.
    pub fn add_term(&mut self, key: MonomialKey, coeff: Complex64) {
        let entry = self.terms.entry(key).or_insert(Complex64::new(0.0, 0.0));
        *entry += coeff;
        if *entry == Complex64::new(0.0, 0.0) {
            self.terms.remove(&key);
        }
    }

    pub fn coeff(&self, k: u32, l: u32) -> Complex64 {
        self.terms
            .get(&MonomialKey { k, l })
            .copied()
            .unwrap_or_default()
    }

    pub fn terms(&self) -> impl Iterator<Item = (MonomialKey, Complex64)> + '_ {
        self.terms.iter().map(|(k, c)| (*k, *c))
    }

    pub fn keys(&self) -> impl Iterator<Item = MonomialKey> + '_ {
        self.terms.keys().copied()
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    /// Highest `k + l` over stored terms, 0 for the zero polynomial.
    pub fn degree(&self) -> u32 {
        self.terms.keys().map(|k| k.degree()).max().unwrap_or(0)
    }

    /// Largest coefficient magnitude.
    pub fn max_abs(&self) -> f64 {
        self.terms.values().map(|c| c.norm()).fold(0.0, f64::max)
    }

    pub fn eval(&self, z: Complex64) -> Complex64 {
        eval_complex(self, z)
    }

    pub fn rotate(&self, theta: impl Into<RotationAngle>) -> Self {
        rotate_coeffs(self, theta)
    }

    /// Keeps only the terms whose winding number satisfies `keep`.
    pub fn filter_winding(&self, keep: impl Fn(i32) -> bool) -> Self {
        Self {
            terms: self
                .terms
                .iter()
                .filter(|(k, _)| keep(k.winding()))
                .map(|(k, c)| (*k, *c))
                .collect(),
        }
    }

    /// Applies `op` to every coefficient, pruning exact zeros.
    pub fn map_coeffs(&self, op: impl Fn(MonomialKey, Complex64) -> Complex64) -> Self {
        let mut out = Self::zero();
        for (k, c) in self.terms() {
            out.add_term(k, op(k, c));
        }
        out
    }

    /// Maximum coefficient difference against `other`.
    pub fn max_abs_diff(&self, other: &ComplexPoly) -> f64 {
        (self - other).max_abs()
    }

    pub fn approx_eq(&self, other: &ComplexPoly, tol: f64) -> bool {
        self.max_abs_diff(other) <= tol
    }

    pub fn to_real(&self) -> RealPolyModel {
        to_real(self)
    }
}

impl fmt::Display for ComplexPoly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_zero() {
            return write!(f, "0");
        }
        for (i, (key, c)) in self.terms().enumerate() {
            if i > 0 {
                write!(f, " + ")?;
            }
            write!(f, "({} {:+}i) {}", c.re, c.im, key)?;
        }
        Ok(())
    }
}

impl Add for &ComplexPoly {
    type Output = ComplexPoly;
    fn add(self, rhs: &ComplexPoly) -> ComplexPoly {
        let mut out = self.clone();
        for (k, c) in rhs.terms() {
            out.add_term(k, c);
        }
        out
    }
}

impl Sub for &ComplexPoly {
    type Output = ComplexPoly;
    fn sub(self, rhs: &ComplexPoly) -> ComplexPoly {
        let mut out = self.clone();
        for (k, c) in rhs.terms() {
            out.add_term(k, -c);
        }
        out
    }
}

impl Neg for &ComplexPoly {
    type Output = ComplexPoly;
    fn neg(self) -> ComplexPoly {
        self.map_coeffs(|_, c| -c)
    }
}

impl Mul<Complex64> for &ComplexPoly {
    type Output = ComplexPoly;
    fn mul(self, rhs: Complex64) -> ComplexPoly {
        self.map_coeffs(|_, c| c * rhs)
    }
}

impl Mul<f64> for &ComplexPoly {
    type Output = ComplexPoly;
    fn mul(self, rhs: f64) -> ComplexPoly {
        self.map_coeffs(|_, c| c * rhs)
    }
}

/// Evaluates `Σ γ_kl z^k z̄^l`.
pub fn eval_complex(f: &ComplexPoly, z: Complex64) -> Complex64 {
    let n = f.degree() as usize;
    if n == 0 {
        return Complex64::new(0.0, 0.0);
    }
    let zb = z.conj();
    let mut zp = vec![Complex64::new(1.0, 0.0); n + 1];
    let mut zbp = vec![Complex64::new(1.0, 0.0); n + 1];
    for i in 1..=n {
        zp[i] = zp[i - 1] * z;
        zbp[i] = zbp[i - 1] * zb;
    }
    f.terms()
        .map(|(key, c)| c * zp[key.k as usize] * zbp[key.l as usize])
        .sum()
}

/// Real form: one `2 × (n+1)` matrix per homogeneous degree `n ≥ 2`.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct RealPolyModel {
    blocks: BTreeMap<u32, Matrix2xX<f64>>,
}

impl RealPolyModel {
    pub fn new() -> Self {
        Self::default()
    }

    /// Inserts (replacing) the block of degree `n`.
    pub fn set_block(&mut self, degree: u32, block: Matrix2xX<f64>) -> Result<()> {
        check_degree(degree)?;
        if block.ncols() != degree as usize + 1 {
            return Err(Error::BlockShape {
                degree,
                expected: degree as usize + 1,
                rows: 2,
                cols: block.ncols(),
            });
        }
        self.blocks.insert(degree, block);
        Ok(())
    }

    pub fn with_block(mut self, degree: u32, block: Matrix2xX<f64>) -> Result<Self> {
        self.set_block(degree, block)?;
        Ok(self)
    }

    /// Builds a block from its two rows `w₀`, `w₁`.
    pub fn from_rows(degree: u32, w0: &[f64], w1: &[f64]) -> Result<Self> {
        if w0.len() != w1.len() {
            return Err(Error::BlockShape {
                degree,
                expected: degree as usize + 1,
                rows: 2,
                cols: w0.len().max(w1.len()),
            });
        }
        let block = Matrix2xX::from_fn(w0.len(), |r, c| if r == 0 { w0[c] } else { w1[c] });
        Self::new().with_block(degree, block)
    }

    pub fn block(&self, degree: u32) -> Option<&Matrix2xX<f64>> {
        self.blocks.get(&degree)
    }

    pub fn blocks(&self) -> impl Iterator<Item = (u32, &Matrix2xX<f64>)> {
        self.blocks.iter().map(|(d, m)| (*d, m))
    }

    pub fn degrees(&self) -> impl Iterator<Item = u32> + '_ {
        self.blocks.keys().copied()
    }

    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }

    /// `Σ_n M_n v_n(p)`.
    pub fn eval(&self, p: Point2) -> Point2 {
        let mut out = Point2::ORIGIN;
        for (n, m) in self.blocks() {
            let v = vn_basis(n, p);
            for (j, vj) in v.iter().enumerate() {
                out.x += m[(0, j)] * vj;
                out.y += m[(1, j)] * vj;
            }
        }
        out
    }

    /// Largest entrywise difference, treating missing blocks as zero.
    pub fn max_abs_diff(&self, other: &RealPolyModel) -> f64 {
        let mut worst = 0.0f64;
        let degrees: std::collections::BTreeSet<u32> =
            self.degrees().chain(other.degrees()).collect();
        for n in degrees {
            let cols = n as usize + 1;
            let zero = Matrix2xX::zeros(cols);
            let a = self.block(n).unwrap_or(&zero);
            let b = other.block(n).unwrap_or(&zero);
            worst = worst.max((a - b).amax());
        }
        worst
    }

    pub fn approx_eq(&self, other: &RealPolyModel, tol: f64) -> bool {
        self.max_abs_diff(other) <= tol
    }

    pub fn transform(&self, theta: impl Into<RotationAngle>) -> RealPolyModel {
        transform_matrix_model(self, theta)
    }

    pub fn to_complex(&self) -> ComplexPoly {
        from_real(self)
    }
}

fn check_degree(degree: u32) -> Result<()> {
    if degree < 2 {
        return Err(Error::InvalidDegree(degree));
    }
    if degree > MAX_DEGREE {
        return Err(Error::DegreeTooHigh(degree));
    }
    Ok(())
}

pub(crate) fn binomial(n: u32, k: u32) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    let mut acc = 1u64;
    for i in 0..k as u64 {
        acc = acc * (n as u64 - i) / (i + 1);
    }
    acc as f64
}

/// `i^e` for nonnegative `e`.
fn i_pow(e: u32) -> Complex64 {
    match e % 4 {
        0 => Complex64::new(1.0, 0.0),
        1 => Complex64::new(0.0, 1.0),
        2 => Complex64::new(-1.0, 0.0),
        _ => Complex64::new(0.0, -1.0),
    }
}

/// Coefficients of `z^k z̄^l` in the basis `x^{n−j} y^j`, `j = 0..=n`.
fn monomial_in_xy(k: u32, l: u32) -> Vec<Complex64> {
    let n = (k + l) as usize;
    let mut out = vec![Complex64::new(0.0, 0.0); n + 1];
    for a in 0..=k {
        // z^k = Σ C(k,a) x^{k−a} (iy)^a
        let za = i_pow(a) * binomial(k, a);
        for b in 0..=l {
            // z̄^l = Σ C(l,b) x^{l−b} (−iy)^b
            let zb = i_pow(3 * b) * binomial(l, b);
            out[(a + b) as usize] += za * zb;
        }
    }
    out
}

/// Expands the complex polynomial into per-degree real blocks.
pub fn to_real(f: &ComplexPoly) -> RealPolyModel {
    let mut per_degree: BTreeMap<u32, Vec<Complex64>> = BTreeMap::new();
    for (key, gamma) in f.terms() {
        let n = key.degree();
        let acc = per_degree
            .entry(n)
            .or_insert_with(|| vec![Complex64::new(0.0, 0.0); n as usize + 1]);
        for (j, c) in monomial_in_xy(key.k, key.l).into_iter().enumerate() {
            acc[j] += gamma * c;
        }
    }
    let mut out = RealPolyModel::new();
    for (n, coeffs) in per_degree {
        let block = Matrix2xX::from_fn(coeffs.len(), |r, c| {
            if r == 0 {
                coeffs[c].re
            } else {
                coeffs[c].im
            }
        });
        out.blocks.insert(n, block);
    }
    out
}

/// Recovers the complex polynomial from the real blocks via
/// `x = (z+z̄)/2`, `y = (z−z̄)/(2i)`.
pub fn from_real(m: &RealPolyModel) -> ComplexPoly {
    let mut out = ComplexPoly::zero();
    for (n, block) in m.blocks() {
        let scale = 0.5f64.powi(n as i32);
        let mut gammas = vec![Complex64::new(0.0, 0.0); n as usize + 1];
        // Σ|contribution| per coefficient, to recognise cancellation residue
        let mut mass = vec![0.0f64; n as usize + 1];
        for j in 0..=n {
            let c = Complex64::new(block[(0, j as usize)], block[(1, j as usize)]);
            if c == Complex64::new(0.0, 0.0) {
                continue;
            }
            // x^{n−j} y^j = 2^{−n} (−i)^j (z+z̄)^{n−j} (z−z̄)^j
            let pref = c * i_pow(3 * j) * scale;
            let p = n - j;
            for s in 0..=p {
                for t in 0..=j {
                    let sign = if t % 2 == 0 { 1.0 } else { -1.0 };
                    let w = binomial(p, s) * binomial(j, t) * sign;
                    gammas[(s + t) as usize] += pref * w;
                    mass[(s + t) as usize] += pref.norm() * w.abs();
                }
            }
        }
        for (l, mut g) in gammas.into_iter().enumerate() {
            let floor = 8.0 * f64::EPSILON * mass[l];
            if g.re.abs() <= floor {
                g.re = 0.0;
            }
            if g.im.abs() <= floor {
                g.im = 0.0;
            }
            let key = MonomialKey {
                k: n - l as u32,
                l: l as u32,
            };
            out.add_term(key, g);
        }
    }
    out
}

/// Coefficient map of a coordinate rotation: `γ_kl ↦ e^{iθ(k−l−1)} γ_kl`.
pub fn rotate_coeffs(f: &ComplexPoly, theta: impl Into<RotationAngle>) -> ComplexPoly {
    let theta = theta.into().radians();
    f.map_coeffs(|key, c| c * Complex64::from_polar(1.0, theta * key.winding() as f64))
}

/// `v_n(p) = (xⁿ, xⁿ⁻¹y, …, yⁿ)`.
pub fn vn_basis(n: u32, p: Point2) -> Vec<f64> {
    (0..=n)
        .map(|j| p.x.powi((n - j) as i32) * p.y.powi(j as i32))
        .collect()
}

/// Matrix `V_n(R_θ)` with `v_n(R_θ p) = V_n(R_θ) v_n(p)`.
///
/// Row `i` expands `(x cosθ − y sinθ)^{n−i} (x sinθ + y cosθ)^i`; column `j`
/// holds the coefficient of `x^{n−j} y^j`.
pub fn vn_rotation_matrix(n: u32, theta: impl Into<RotationAngle>) -> DMatrix<f64> {
    let (s, c) = theta.into().radians().sin_cos();
    let size = n as usize + 1;
    let mut v = DMatrix::zeros(size, size);
    for i in 0..=n {
        let a = n - i;
        // (c x − s y)^a, indexed by power of y
        let left: Vec<f64> = (0..=a)
            .map(|t| binomial(a, t) * c.powi((a - t) as i32) * (-s).powi(t as i32))
            .collect();
        // (s x + c y)^i
        let right: Vec<f64> = (0..=i)
            .map(|t| binomial(i, t) * s.powi((i - t) as i32) * c.powi(t as i32))
            .collect();
        for (p, lv) in left.iter().enumerate() {
            for (q, rv) in right.iter().enumerate() {
                v[(i as usize, p + q)] += lv * rv;
            }
        }
    }
    v
}

/// `M ↦ R_θᵀ M V_n(R_θ)` applied to every block.
pub fn transform_matrix_model(m: &RealPolyModel, theta: impl Into<RotationAngle>) -> RealPolyModel {
    let theta = theta.into();
    let rt = theta.matrix().transpose();
    let mut out = RealPolyModel::new();
    for (n, block) in m.blocks() {
        let v = vn_rotation_matrix(n, theta);
        let rotated = rt * block * v;
        out.blocks.insert(n, Matrix2xX::from_iterator(block.ncols(), rotated.iter().copied()));
    }
    out
}

/// All monomials `z^k z̄^l` of degree `n`, in increasing `l`.
pub fn monomials_of_degree(n: u32) -> Result<Vec<MonomialKey>> {
    (0..=n).map(|l| MonomialKey::new(n - l, l)).collect()
}

/// Monomials of degrees `2..=max_degree` grouped by winding number, each
/// group ordered by degree.
pub fn winding_table(max_degree: u32) -> Result<BTreeMap<i32, Vec<MonomialKey>>> {
    let mut table: BTreeMap<i32, Vec<MonomialKey>> = BTreeMap::new();
    for n in 2..=max_degree {
        for key in monomials_of_degree(n)? {
            table.entry(key.winding()).or_default().push(key);
        }
    }
    Ok(table)
}
