//! Named distortion functions and linear model spaces.
//!
//! Functions are built in whichever form the model is usually written in
//! (radial/tangential banded matrices, decentering and thin prism in real
//! form; invariant monomials and symmetric parameterizations in complex
//! form) and carry both representations.
//!
//! The symmetric parameterizations [`quad_sym`] and [`cubic_sym`] take the
//! mirror axis angle `θ` directly: every coefficient has the form
//! `γ_kl = a_kl e^{−imθ}` with real `a_kl`.

use nalgebra::{DMatrix, Matrix2xX};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg;
use crate::poly::{self, ComplexPoly, MonomialKey, Point2, RealPolyModel};

/// Minimum `σ_min / σ_max` for a basis to count as independent.
pub const INDEPENDENCE_RATIO: f64 = 1e-9;

/// A displacement function `G`; the distortion itself is `F = id + G`.
#[derive(Clone, Debug, PartialEq)]
pub struct DistortionFunction {
    poly: ComplexPoly,
    real: RealPolyModel,
}

impl DistortionFunction {
    pub fn zero() -> Self {
        Self::from_poly(ComplexPoly::zero())
    }

    pub fn from_poly(poly: ComplexPoly) -> Self {
        let real = poly::to_real(&poly);
        Self { poly, real }
    }

    /// Keeps `real` as given and derives the complex form from it.
    pub fn from_real(real: RealPolyModel) -> Self {
        let poly = poly::from_real(&real);
        Self { poly, real }
    }

    pub fn poly(&self) -> &ComplexPoly {
        &self.poly
    }

    pub fn real_form(&self) -> &RealPolyModel {
        &self.real
    }

    pub fn is_zero(&self) -> bool {
        self.poly.is_zero()
    }

    /// `G(p)`.
    pub fn displacement(&self, p: Point2) -> Point2 {
        Point2::from_complex(self.poly.eval(p.to_complex()))
    }

    /// `F(p) = p + G(p)`.
    pub fn distort(&self, p: Point2) -> Point2 {
        p + self.displacement(p)
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self::from_poly(&self.poly * s)
    }

    pub fn sum(&self, other: &DistortionFunction) -> Self {
        Self::from_poly(&self.poly + &other.poly)
    }

    /// `Σ c_i f_i`. Panics if the lengths differ.
    pub fn linear_combination(funcs: &[DistortionFunction], coeffs: &[f64]) -> Self {
        assert_eq!(funcs.len(), coeffs.len(), "one coefficient per function");
        let mut acc = ComplexPoly::zero();
        for (f, c) in funcs.iter().zip(coeffs) {
            if *c != 0.0 {
                acc = &acc + &(f.poly() * *c);
            }
        }
        Self::from_poly(acc)
    }
}

/// A linear model: the real span of an independent list of functions.
#[derive(Clone, Debug)]
pub struct ModelSpace {
    label: String,
    basis: Vec<DistortionFunction>,
}

impl ModelSpace {
    pub fn new(label: impl Into<String>, basis: Vec<DistortionFunction>) -> Result<Self> {
        let label = label.into();
        let ratio = real_singular_ratio(&basis);
        if ratio <= INDEPENDENCE_RATIO {
            return Err(Error::DependentBasis { label, ratio });
        }
        Ok(Self { label, basis })
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    pub fn basis(&self) -> &[DistortionFunction] {
        &self.basis
    }

    pub fn dimension(&self) -> usize {
        self.basis.len()
    }

    /// The member `Σ c_i b_i`.
    pub fn member(&self, coeffs: &[f64]) -> Result<DistortionFunction> {
        if coeffs.len() != self.dimension() {
            return Err(Error::InvalidArgument(format!(
                "{} coefficients given for a {}-dimensional space",
                coeffs.len(),
                self.dimension()
            )));
        }
        Ok(DistortionFunction::linear_combination(&self.basis, coeffs))
    }

    /// Least-squares coordinates of `f` in this basis and the residual norm
    /// of the complex coefficients left outside the span.
    pub fn coordinates_of(&self, f: &DistortionFunction) -> (Vec<f64>, f64) {
        let polys: Vec<&ComplexPoly> = self
            .basis
            .iter()
            .map(|b| b.poly())
            .chain(std::iter::once(f.poly()))
            .collect();
        let keys = linalg::key_union(polys.iter().copied());
        let a = linalg::coord_matrix(&polys[..polys.len() - 1], &keys);
        let b = linalg::complex_coords(f.poly(), &keys);
        let x = linalg::lstsq(&a, &b, 1e-12);
        let residual = (&b - &a * &x).norm();
        (x.iter().copied().collect(), residual)
    }
}

/// `σ_min / σ_max` of the stacked real coefficient vectors.
fn real_singular_ratio(basis: &[DistortionFunction]) -> f64 {
    let mut degrees: Vec<u32> = basis.iter().flat_map(|f| f.real_form().degrees()).collect();
    degrees.sort_unstable();
    degrees.dedup();
    let cols: Vec<_> = basis
        .iter()
        .map(|f| linalg::real_coords(f.real_form(), &degrees))
        .collect();
    if cols.is_empty() {
        return 1.0;
    }
    let rows = cols[0].len();
    let m = DMatrix::from_fn(rows, cols.len(), |r, c| cols[c][r]);
    linalg::singular_ratio(&m)
}

fn block(degree: u32, w0: &[f64], w1: &[f64]) -> DistortionFunction {
    let m = Matrix2xX::from_fn(w0.len(), |r, c| if r == 0 { w0[c] } else { w1[c] });
    DistortionFunction::from_real(
        RealPolyModel::new()
            .with_block(degree, m)
            .expect("constructors build well-shaped blocks"),
    )
}

fn cx(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn polar(r: f64, phase: f64) -> Complex64 {
    Complex64::from_polar(1.0, phase) * r
}

fn poly_of(terms: &[((u32, u32), Complex64)]) -> ComplexPoly {
    ComplexPoly::from_terms(terms.iter().copied()).expect("constructors use valid monomials")
}

/// Radial rotationally invariant model `(x, y)·Σ α_j r^{2j}`, i.e.
/// `Σ α_j z^{j+1} z̄^j`.
pub fn rri(alphas: &[f64]) -> Result<DistortionFunction> {
    if alphas.is_empty() {
        return Err(Error::InvalidArgument("rri needs at least one coefficient".into()));
    }
    let mut p = ComplexPoly::zero();
    for (j, a) in alphas.iter().enumerate() {
        let j = j as u32 + 1;
        p.add_term(MonomialKey::new(j + 1, j)?, cx(*a, 0.0));
    }
    Ok(DistortionFunction::from_poly(p))
}

fn check_hom(n: u32, w: &[f64]) -> Result<()> {
    if n < 2 {
        return Err(Error::InvalidDegree(n));
    }
    if w.len() != n as usize {
        return Err(Error::InvalidArgument(format!(
            "degree {n} needs {n} weights, got {}",
            w.len()
        )));
    }
    Ok(())
}

/// Homogeneous radial displacement `(x, y)·wᵀ v_{n−1}`.
pub fn radial_hom(n: u32, w: &[f64]) -> Result<DistortionFunction> {
    check_hom(n, w)?;
    let mut w0 = w.to_vec();
    w0.push(0.0);
    let mut w1 = vec![0.0];
    w1.extend_from_slice(w);
    if n > poly::MAX_DEGREE {
        return Err(Error::DegreeTooHigh(n));
    }
    Ok(block(n, &w0, &w1))
}

/// Homogeneous tangential displacement `(−y, x)·wᵀ v_{n−1}`.
pub fn tangential_hom(n: u32, w: &[f64]) -> Result<DistortionFunction> {
    check_hom(n, w)?;
    let mut w0 = vec![0.0];
    w0.extend(w.iter().map(|v| -v));
    let mut w1 = w.to_vec();
    w1.push(0.0);
    if n > poly::MAX_DEGREE {
        return Err(Error::DegreeTooHigh(n));
    }
    Ok(block(n, &w0, &w1))
}

/// Decentering distortion:
/// `Δx = s1(3x²+y²) + 2 s2 xy`, `Δy = 2 s1 xy + s2(x²+3y²)`.
pub fn decentering(s1: f64, s2: f64) -> DistortionFunction {
    block(2, &[3.0 * s1, 2.0 * s2, s1], &[s2, 2.0 * s1, 3.0 * s2])
}

/// Thin prism distortion `Δ = (u1, u2)·(x² + y²)`.
pub fn thin_prism(u1: f64, u2: f64) -> DistortionFunction {
    block(2, &[u1, 0.0, u1], &[u2, 0.0, u2])
}

/// The one-parameter family of reflection-symmetric isotropic quadratic
/// models, `p·[[t1,−t2,0],[0,t1,−t2]] + q·[[0,t2,t1],[−t2,−t1,0]]`.
pub fn pq_family(p: f64, q: f64, t1: f64, t2: f64) -> Result<DistortionFunction> {
    if p == 0.0 && q == 0.0 {
        return Err(Error::InvalidArgument("(p:q) must not be (0:0)".into()));
    }
    Ok(block(
        2,
        &[p * t1, p * -t2 + q * t2, q * t1],
        &[q * -t2, p * t1 + q * -t1, p * -t2],
    ))
}

/// The two-dimensional space `{pq_family(p, q, t1, t2)}`.
pub fn pq_space(p: f64, q: f64) -> Result<ModelSpace> {
    ModelSpace::new(
        format!("pq({p}:{q})"),
        vec![pq_family(p, q, 1.0, 0.0)?, pq_family(p, q, 0.0, 1.0)?],
    )
}

/// `(t1 + i t2) z̄²`.
pub fn conj_quad(t1: f64, t2: f64) -> DistortionFunction {
    DistortionFunction::from_poly(poly_of(&[((0, 2), cx(t1, t2))]))
}

/// Quadratic function symmetric about the axis at angle `theta`: a radial
/// term (`a`), a tangential term (`b`) and a `z̄²` term (`c`).
pub fn quad_sym(theta: f64, a: f64, b: f64, c: f64) -> DistortionFunction {
    DistortionFunction::from_poly(poly_of(&[
        ((2, 0), polar(0.5 * (a - b), -theta)),
        ((1, 1), polar(0.5 * (a + b), theta)),
        ((0, 2), polar(c, 3.0 * theta)),
    ]))
}

/// Cubic function symmetric about the axis at angle `theta`: the invariant
/// radial term (`d`), a radial (`e`), a tangential (`f`) and a `z̄³` term
/// (`g`).
pub fn cubic_sym(theta: f64, d: f64, e: f64, f: f64, g: f64) -> DistortionFunction {
    DistortionFunction::from_poly(poly_of(&[
        ((3, 0), polar(0.5 * (e - f), -2.0 * theta)),
        ((2, 1), cx(d, 0.0)),
        ((1, 2), polar(0.5 * (e + f), 2.0 * theta)),
        ((0, 3), polar(g, 4.0 * theta)),
    ]))
}

/// Quartic thin-prism part of the common 12-coefficient camera model:
/// `Δx = s1 r² + s2 r⁴`, `Δy = s3 r² + s4 r⁴`.
pub fn opencv_prism(s1: f64, s2: f64, s3: f64, s4: f64) -> DistortionFunction {
    DistortionFunction::from_poly(poly_of(&[((1, 1), cx(s1, s3)), ((2, 2), cx(s2, s4))]))
}

/// Data for one irreducible two-dimensional invariant subspace
/// `{γ f + γ̄ g : γ ∈ ℂ}` with `f` of winding `m` and `g` of winding `−m`.
#[derive(Clone, Debug)]
pub struct IrreducibleSpec {
    m: i32,
    f_plus: ComplexPoly,
    g_minus: ComplexPoly,
}

impl IrreducibleSpec {
    pub fn new(m: i32, f_plus: ComplexPoly, g_minus: ComplexPoly) -> Result<Self> {
        if m == 0 {
            return Err(Error::InvalidArgument("winding number must be nonzero".into()));
        }
        if f_plus.is_zero() && g_minus.is_zero() {
            return Err(Error::InvalidArgument("f and g are both zero".into()));
        }
        for (name, p, want) in [("f", &f_plus, m), ("g", &g_minus, -m)] {
            if let Some(bad) = p.keys().find(|k| k.winding() != want) {
                return Err(Error::InvalidArgument(format!(
                    "{name} contains {bad} with winding {} (expected {want})",
                    bad.winding()
                )));
            }
        }
        Ok(Self { m, f_plus, g_minus })
    }

    pub fn m(&self) -> i32 {
        self.m
    }

    pub fn f(&self) -> &ComplexPoly {
        &self.f_plus
    }

    pub fn g(&self) -> &ComplexPoly {
        &self.g_minus
    }
}

/// Basis `{f + g, i(f − g)}`: the members for `γ = 1` and `γ = i`.
pub fn irreducible_subspace(spec: &IrreducibleSpec) -> Result<ModelSpace> {
    let first = spec.f() + spec.g();
    let second = &(spec.f() - spec.g()) * cx(0.0, 1.0);
    ModelSpace::new(
        format!("M_{}[{}, {}]", spec.m, spec.f(), spec.g()),
        vec![
            DistortionFunction::from_poly(first),
            DistortionFunction::from_poly(second),
        ],
    )
}

/// Span of `a ∪ b`, keeping earlier basis vectors and dropping any that
/// would make the basis dependent.
pub fn space_sum(a: &ModelSpace, b: &ModelSpace) -> ModelSpace {
    let mut basis: Vec<DistortionFunction> = Vec::new();
    for f in a.basis().iter().chain(b.basis()) {
        basis.push(f.clone());
        if real_singular_ratio(&basis) <= INDEPENDENCE_RATIO {
            basis.pop();
        }
    }
    ModelSpace {
        label: format!("{}+{}", a.label(), b.label()),
        basis,
    }
}

/// Names accepted by [`named_space`]. `rriN` accepts `N` from 1 to 7.
pub const CATALOG: &[&str] = &[
    "rri1",
    "rri2",
    "rri3",
    "rri4",
    "rri5",
    "rri_extra2",
    "decentering",
    "thin_prism",
    "radial_quad",
    "tangential_quad",
    "conj_quad",
    "weng",
    "matlab",
    "opencv_prism4",
    "full_quad",
    "full_cubic",
];

fn unit(i: usize, n: usize) -> Vec<f64> {
    let mut v = vec![0.0; n];
    v[i] = 1.0;
    v
}

fn monomial_space(label: &str, keys: &[(u32, u32)]) -> Result<ModelSpace> {
    let mut basis = Vec::new();
    for &(k, l) in keys {
        basis.push(DistortionFunction::from_poly(ComplexPoly::monomial(k, l, cx(1.0, 0.0))?));
        basis.push(DistortionFunction::from_poly(ComplexPoly::monomial(k, l, cx(0.0, 1.0))?));
    }
    ModelSpace::new(label, basis)
}

fn base_space(name: &str) -> Result<ModelSpace> {
    let pair = |label: &str, make: &dyn Fn(f64, f64) -> DistortionFunction| {
        ModelSpace::new(label, vec![make(1.0, 0.0), make(0.0, 1.0)])
    };
    match name {
        "decentering" => pair(name, &decentering),
        "thin_prism" => pair(name, &thin_prism),
        "conj_quad" => pair(name, &conj_quad),
        "radial_quad" => ModelSpace::new(
            name,
            vec![radial_hom(2, &[1.0, 0.0])?, radial_hom(2, &[0.0, 1.0])?],
        ),
        "tangential_quad" => ModelSpace::new(
            name,
            vec![tangential_hom(2, &[1.0, 0.0])?, tangential_hom(2, &[0.0, 1.0])?],
        ),
        "weng" => Ok(space_sum(&base_space("decentering")?, &base_space("thin_prism")?)
            .with_label(name)),
        "matlab" => {
            Ok(space_sum(&base_space("decentering")?, &base_space("rri3")?).with_label(name))
        }
        "opencv_prism4" => ModelSpace::new(
            name,
            (0..4)
                .map(|i| {
                    let s = unit(i, 4);
                    opencv_prism(s[0], s[1], s[2], s[3])
                })
                .collect(),
        ),
        "rri_extra2" => ModelSpace::new(
            name,
            vec![rri(&[0.0, 1.0, 0.0])?, rri(&[0.0, 0.0, 1.0])?],
        ),
        "full_quad" => monomial_space(name, &[(2, 0), (1, 1), (0, 2)]),
        "full_cubic" => monomial_space(name, &[(3, 0), (2, 1), (1, 2), (0, 3)]),
        _ => {
            if let Some(n) = name.strip_prefix("rri").and_then(|s| s.parse::<usize>().ok()) {
                if (1..=7).contains(&n) {
                    let basis = (0..n).map(|i| rri(&unit(i, n))).collect::<Result<_>>()?;
                    return ModelSpace::new(name, basis);
                }
            }
            Err(Error::UnknownModel(name.to_string()))
        }
    }
}

/// Looks up a catalog space. Names may be joined with `+` to form the sum
/// of several spaces, e.g. `decentering+rri3`.
pub fn named_space(name: &str) -> Result<ModelSpace> {
    let mut parts = name.split('+').map(str::trim);
    let first = parts.next().filter(|s| !s.is_empty());
    let mut acc = base_space(first.ok_or_else(|| Error::UnknownModel(name.to_string()))?)?;
    for part in parts {
        acc = space_sum(&acc, &base_space(part)?);
    }
    Ok(acc.with_label(name))
}
