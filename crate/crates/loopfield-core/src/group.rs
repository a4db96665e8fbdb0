//! Compact matrix groups U(N), SU(N), SO(N) for N <= 3.
//!
//! Elements are stored as 3x3 complex matrices padded with the identity, so
//! every operation is allocation free. The Lie algebra carries the inner
//! product `<X, Y> = kappa Re Tr(X^* Y)` with `kappa = beta N / 2`.

use alloc::vec::Vec;
use core::fmt;

use nalgebra::Matrix3;
use num_complex::Complex64;
#[cfg(not(test))]
#[allow(unused_imports)]
use num_traits::Float;
use rand::Rng;
use rand_distr::StandardNormal;

pub type C64 = Complex64;
pub type Mat = Matrix3<C64>;

pub const MAX_N: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Family {
    U,
    SU,
    SO,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct GroupSpec {
    pub family: Family,
    pub n: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum GroupError {
    UnsupportedSize(usize),
    ShapeMismatch,
    Parse,
}

impl fmt::Display for GroupError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GroupError::UnsupportedSize(n) => write!(f, "unsupported matrix size {n}"),
            GroupError::ShapeMismatch => write!(f, "group elements of different size"),
            GroupError::Parse => write!(f, "unrecognized group name"),
        }
    }
}

impl GroupSpec {
    pub fn new(family: Family, n: usize) -> Result<Self, GroupError> {
        let ok = match family {
            Family::U => (1..=MAX_N).contains(&n),
            Family::SU | Family::SO => (2..=MAX_N).contains(&n),
        };
        if ok {
            Ok(GroupSpec { family, n })
        } else {
            Err(GroupError::UnsupportedSize(n))
        }
    }

    pub fn u1() -> Self {
        GroupSpec { family: Family::U, n: 1 }
    }

    pub fn u(n: usize) -> Self {
        GroupSpec { family: Family::U, n }
    }

    pub fn su(n: usize) -> Self {
        GroupSpec { family: Family::SU, n }
    }

    pub fn so(n: usize) -> Self {
        GroupSpec { family: Family::SO, n }
    }

    /// Parses names like `U1`, `U(2)`, `su2`, `SO(3)`.
    pub fn parse(s: &str) -> Result<Self, GroupError> {
        let t: alloc::string::String = s
            .chars()
            .filter(|c| !c.is_whitespace() && *c != '(' && *c != ')')
            .collect::<alloc::string::String>()
            .to_ascii_uppercase();
        let (family, rest) = if let Some(r) = t.strip_prefix("SU") {
            (Family::SU, r)
        } else if let Some(r) = t.strip_prefix("SO") {
            (Family::SO, r)
        } else if let Some(r) = t.strip_prefix('U') {
            (Family::U, r)
        } else {
            return Err(GroupError::Parse);
        };
        let n: usize = rest.parse().map_err(|_| GroupError::Parse)?;
        GroupSpec::new(family, n)
    }

    pub fn beta(&self) -> f64 {
        match self.family {
            Family::SO => 1.0,
            _ => 2.0,
        }
    }

    pub fn gamma(&self) -> f64 {
        match self.family {
            Family::SU => 1.0,
            _ => 0.0,
        }
    }

    pub fn n_f64(&self) -> f64 {
        self.n as f64
    }

    /// Scale of the inner product, `beta N / 2`.
    pub fn kappa(&self) -> f64 {
        self.beta() * self.n_f64() / 2.0
    }

    pub fn algebra_dim(&self) -> usize {
        let n = self.n;
        match self.family {
            Family::U => n * n,
            Family::SU => n * n - 1,
            Family::SO => n * (n - 1) / 2,
        }
    }

    /// Coefficient of the twisting terms, `(2 - beta) / (beta N)`.
    pub fn twist_coefficient(&self) -> f64 {
        (2.0 - self.beta()) / (self.beta() * self.n_f64())
    }

    pub fn is_abelian(&self) -> bool {
        self.family == Family::U && self.n == 1
    }
}

impl fmt::Display for GroupSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self.family {
            Family::U => "U",
            Family::SU => "SU",
            Family::SO => "SO",
        };
        write!(f, "{}({})", name, self.n)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GroupElement {
    n: usize,
    m: Mat,
}

impl GroupElement {
    pub fn identity(spec: GroupSpec) -> Self {
        GroupElement { n: spec.n, m: Mat::identity() }
    }

    /// Wraps a padded matrix. The block outside the leading `n x n` corner is
    /// reset to the identity.
    pub fn from_matrix(n: usize, m: Mat) -> Self {
        let mut out = Mat::identity();
        for i in 0..n {
            for j in 0..n {
                out[(i, j)] = m[(i, j)];
            }
        }
        GroupElement { n, m: out }
    }

    pub fn from_angle(theta: f64) -> Self {
        let mut m = Mat::identity();
        m[(0, 0)] = C64::from_polar(1.0, theta);
        GroupElement { n: 1, m }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn matrix(&self) -> &Mat {
        &self.m
    }

    pub fn mul(&self, other: &GroupElement) -> GroupElement {
        debug_assert_eq!(self.n, other.n);
        GroupElement { n: self.n, m: self.m * other.m }
    }

    pub fn try_mul(&self, other: &GroupElement) -> Result<GroupElement, GroupError> {
        if self.n != other.n {
            return Err(GroupError::ShapeMismatch);
        }
        Ok(self.mul(other))
    }

    pub fn inverse(&self) -> GroupElement {
        GroupElement { n: self.n, m: self.m.adjoint() }
    }

    pub fn trace(&self) -> C64 {
        (0..self.n).map(|i| self.m[(i, i)]).sum()
    }

    pub fn trace_normalized(&self) -> C64 {
        self.trace() / self.n as f64
    }

    pub fn det(&self) -> C64 {
        self.m.determinant()
    }

    /// `max |Q Q^* - I|` over the leading block.
    pub fn unitarity_defect(&self) -> f64 {
        let p = self.m * self.m.adjoint();
        let mut worst: f64 = 0.0;
        for i in 0..MAX_N {
            for j in 0..MAX_N {
                let target = if i == j { C64::new(1.0, 0.0) } else { C64::new(0.0, 0.0) };
                worst = worst.max((p[(i, j)] - target).norm());
            }
        }
        worst
    }

    pub fn is_member(&self, spec: GroupSpec, tol: f64) -> bool {
        if self.n != spec.n || self.unitarity_defect() > tol {
            return false;
        }
        match spec.family {
            Family::U => true,
            Family::SU => (self.det() - C64::new(1.0, 0.0)).norm() <= tol,
            Family::SO => {
                let real = (0..self.n)
                    .all(|i| (0..self.n).all(|j| self.m[(i, j)].im.abs() <= tol));
                real && (self.det() - C64::new(1.0, 0.0)).norm() <= tol
            }
        }
    }

    /// Projects back onto the group by Gram-Schmidt on the columns.
    pub fn reorthonormalize(&self, spec: GroupSpec) -> GroupElement {
        let mut cols = [[C64::new(0.0, 0.0); MAX_N]; MAX_N];
        for (j, col) in cols.iter_mut().enumerate().take(self.n) {
            for (i, c) in col.iter_mut().enumerate().take(self.n) {
                *c = if spec.family == Family::SO {
                    C64::new(self.m[(i, j)].re, 0.0)
                } else {
                    self.m[(i, j)]
                };
            }
        }
        let m = gram_schmidt(self.n, cols);
        let g = GroupElement::from_matrix(self.n, m);
        fix_determinant(spec, g)
    }
}

fn gram_schmidt(n: usize, mut cols: [[C64; MAX_N]; MAX_N]) -> Mat {
    for j in 0..n {
        // Two projection passes keep the columns orthogonal to rounding.
        for _ in 0..2 {
            for k in 0..j {
                let mut dot = C64::new(0.0, 0.0);
                for i in 0..n {
                    dot += cols[k][i].conj() * cols[j][i];
                }
                let prev = cols[k];
                for i in 0..n {
                    cols[j][i] -= dot * prev[i];
                }
            }
        }
        let norm = (0..n).map(|i| cols[j][i].norm_sqr()).sum::<f64>().sqrt();
        for i in 0..n {
            cols[j][i] /= norm;
        }
    }
    let mut m = Mat::identity();
    for j in 0..n {
        for i in 0..n {
            m[(i, j)] = cols[j][i];
        }
    }
    m
}

fn fix_determinant(spec: GroupSpec, g: GroupElement) -> GroupElement {
    match spec.family {
        Family::U => g,
        Family::SU => {
            let d = g.det();
            let root = C64::from_polar(1.0, -d.arg() / spec.n_f64());
            let mut m = g.m;
            for i in 0..spec.n {
                for j in 0..spec.n {
                    m[(i, j)] *= root;
                }
            }
            GroupElement { n: spec.n, m }
        }
        Family::SO => {
            if g.det().re < 0.0 {
                let mut m = g.m;
                for i in 0..spec.n {
                    m[(i, 0)] = -m[(i, 0)];
                }
                GroupElement { n: spec.n, m }
            } else {
                g
            }
        }
    }
}

/// Haar-distributed sample: Gram-Schmidt of a Ginibre matrix, followed by a
/// determinant fix for SU and SO.
pub fn haar_sample<R: Rng + ?Sized>(spec: GroupSpec, rng: &mut R) -> GroupElement {
    let n = spec.n;
    let mut cols = [[C64::new(0.0, 0.0); MAX_N]; MAX_N];
    for col in cols.iter_mut().take(n) {
        for c in col.iter_mut().take(n) {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = if spec.family == Family::SO { 0.0 } else { rng.sample(StandardNormal) };
            *c = C64::new(re, im);
        }
    }
    let g = GroupElement { n, m: gram_schmidt(n, cols) };
    fix_determinant(spec, g)
}

/// Coordinates of a Lie algebra element in the orthonormal frame of [`lie_basis`].
#[derive(Debug, Clone, PartialEq)]
pub struct LieVector {
    pub coords: Vec<f64>,
}

impl LieVector {
    pub fn zero(spec: GroupSpec) -> Self {
        LieVector { coords: alloc::vec![0.0; spec.algebra_dim()] }
    }

    pub fn to_matrix(&self, spec: GroupSpec) -> Mat {
        let basis = lie_basis(spec);
        let mut m = Mat::zeros();
        for (c, l) in self.coords.iter().zip(basis.iter()) {
            m += l * C64::new(*c, 0.0);
        }
        m
    }

    pub fn scaled(&self, s: f64) -> Self {
        LieVector { coords: self.coords.iter().map(|c| c * s).collect() }
    }
}

pub fn inner_product(spec: GroupSpec, x: &Mat, y: &Mat) -> f64 {
    spec.kappa() * (x.adjoint() * y).trace().re
}

/// Orthonormal basis of the Lie algebra, each matrix padded with zeros.
pub fn lie_basis(spec: GroupSpec) -> Vec<Mat> {
    let n = spec.n;
    let kappa = spec.kappa();
    let i = C64::new(0.0, 1.0);
    let one = C64::new(1.0, 0.0);
    let off = 1.0 / (2.0 * kappa).sqrt();
    let mut out = Vec::with_capacity(spec.algebra_dim());
    for j in 0..n {
        for k in (j + 1)..n {
            let mut a = Mat::zeros();
            a[(j, k)] = one * off;
            a[(k, j)] = -one * off;
            out.push(a);
            if spec.family != Family::SO {
                let mut s = Mat::zeros();
                s[(j, k)] = i * off;
                s[(k, j)] = i * off;
                out.push(s);
            }
        }
    }
    match spec.family {
        Family::U => {
            for j in 0..n {
                let mut d = Mat::zeros();
                d[(j, j)] = i / kappa.sqrt();
                out.push(d);
            }
        }
        Family::SU => {
            for k in 1..n {
                let kf = k as f64;
                let scale = 1.0 / (kappa * (kf + kf * kf)).sqrt();
                let mut d = Mat::zeros();
                for j in 0..k {
                    d[(j, j)] = i * scale;
                }
                d[(k, k)] = -i * kf * scale;
                out.push(d);
            }
        }
        Family::SO => {}
    }
    out
}

/// `c` with `sum_j L_j^2 = c I` in the standard representation.
pub fn casimir_standard(spec: GroupSpec) -> f64 {
    let n = spec.n_f64();
    match spec.family {
        Family::U => -1.0,
        Family::SU => -1.0 + 1.0 / (n * n),
        Family::SO => -1.0 + 1.0 / n,
    }
}

/// Matrix exponential by scaling and squaring with a Taylor kernel.
pub fn expm(a: &Mat) -> Mat {
    let norm = a.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let mut squarings = 0u32;
    let mut scale = 1.0;
    while norm * scale > 0.25 {
        scale *= 0.5;
        squarings += 1;
    }
    let x = a * C64::new(scale, 0.0);
    let mut term = Mat::identity();
    let mut sum = Mat::identity();
    for k in 1..=18 {
        term = term * x * C64::new(1.0 / k as f64, 0.0);
        sum += term;
    }
    for _ in 0..squarings {
        sum = sum * sum;
    }
    sum
}

pub fn exp_map(spec: GroupSpec, a: &LieVector) -> GroupElement {
    exp_matrix(spec, &a.to_matrix(spec))
}

/// Exponential of an algebra matrix already expressed in padded form.
pub fn exp_matrix(spec: GroupSpec, a: &Mat) -> GroupElement {
    GroupElement::from_matrix(spec.n, expm(a))
}

pub fn gaussian_lie_sample<R: Rng + ?Sized>(spec: GroupSpec, rng: &mut R, sigma: f64) -> LieVector {
    let coords = (0..spec.algebra_dim())
        .map(|_| sigma * rng.sample::<f64, _>(StandardNormal))
        .collect();
    LieVector { coords }
}

/// Central difference of `t -> f(e^{tX} a)` at `t = 0`.
pub fn directional_derivative<F>(spec: GroupSpec, f: F, x: &Mat, a: &GroupElement, h: f64) -> C64
where
    F: Fn(&GroupElement) -> C64,
{
    let plus = exp_matrix(spec, &(x * C64::new(h, 0.0))).mul(a);
    let minus = exp_matrix(spec, &(x * C64::new(-h, 0.0))).mul(a);
    (f(&plus) - f(&minus)) / (2.0 * h)
}

/// Richardson-extrapolated directional derivative, `(4 D(h/2) - D(h)) / 3`.
pub fn directional_derivative_richardson<F>(
    spec: GroupSpec,
    f: F,
    x: &Mat,
    a: &GroupElement,
    h: f64,
) -> C64
where
    F: Fn(&GroupElement) -> C64,
{
    let d1 = directional_derivative(spec, &f, x, a, h);
    let d2 = directional_derivative(spec, &f, x, a, h / 2.0);
    (d2 * 4.0 - d1) / 3.0
}

/// Laplacian `sum_j L_j^2 f` at `a` by second central differences.
pub fn laplacian<F>(spec: GroupSpec, f: F, a: &GroupElement, h: f64) -> f64
where
    F: Fn(&GroupElement) -> f64,
{
    let f0 = f(a);
    lie_basis(spec)
        .iter()
        .map(|l| {
            let p = exp_matrix(spec, &(l * C64::new(h, 0.0))).mul(a);
            let m = exp_matrix(spec, &(l * C64::new(-h, 0.0))).mul(a);
            (f(&p) - 2.0 * f0 + f(&m)) / (h * h)
        })
        .sum()
}

/// Eigenvalue angles of an element of U(2) or SU(2) via the characteristic polynomial.
pub fn eigen_angles_2(g: &GroupElement) -> (f64, f64) {
    let tr = g.trace();
    let det = g.det();
    let disc = (tr * tr - det * 4.0).sqrt();
    let l1 = (tr + disc) / 2.0;
    let l2 = (tr - disc) / 2.0;
    (l1.arg(), l2.arg())
}
