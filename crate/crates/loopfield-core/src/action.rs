//! Wilson action, character coefficients and heat kernels.
//!
//! Class-function integrals are reduced to the maximal torus and evaluated by
//! the periodic trapezoid rule with node doubling until two successive
//! resolutions agree.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::f64::consts::PI;
#[cfg(not(test))]
#[allow(unused_imports)]
use num_traits::Float;
use core::fmt;

use num_complex::Complex64;

use crate::group::{Family, GroupElement, GroupSpec, Mat, C64};

pub const QUAD_TOL: f64 = 1e-11;
const MIN_NODES: usize = 64;
const MAX_NODES_1D: usize = 1 << 22;
const MAX_NODES_2D: usize = 1 << 11;

#[derive(Debug, Clone, PartialEq)]
pub enum ActionError {
    NotConverged { nodes: usize },
    Unsupported(GroupSpec),
    UnsupportedIrrep,
    CutoffExceeded { t: f64 },
    BadParameter(String),
}

impl fmt::Display for ActionError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ActionError::NotConverged { nodes } => write!(f, "quadrature did not converge with {nodes} nodes"),
            ActionError::Unsupported(s) => write!(f, "no torus quadrature for {s}"),
            ActionError::UnsupportedIrrep => write!(f, "irrep not supported for this group"),
            ActionError::CutoffExceeded { t } => write!(f, "heat kernel cutoff budget exceeded at t = {t}"),
            ActionError::BadParameter(s) => write!(f, "bad parameter: {s}"),
        }
    }
}

/// Mean of a `2 pi`-periodic function over one period.
pub fn periodic_mean<F: Fn(f64) -> f64>(f: F, tol: f64) -> Result<f64, ActionError> {
    let mut n = MIN_NODES;
    let mut prev = trapezoid(&f, n);
    while n < MAX_NODES_1D {
        n *= 2;
        // Reuse the previous nodes: the new mean is the average of old and odd nodes.
        let h = 2.0 * PI / n as f64;
        let odd: f64 = (0..n / 2).map(|i| f((2 * i + 1) as f64 * h)).sum::<f64>() / (n / 2) as f64;
        let cur = 0.5 * (prev + odd);
        if (cur - prev).abs() <= tol * cur.abs().max(1.0) {
            return Ok(cur);
        }
        prev = cur;
    }
    Err(ActionError::NotConverged { nodes: n })
}

fn trapezoid<F: Fn(f64) -> f64>(f: &F, n: usize) -> f64 {
    let h = 2.0 * PI / n as f64;
    (0..n).map(|i| f(i as f64 * h)).sum::<f64>() / n as f64
}

/// Mean of a doubly periodic function over the 2-torus.
pub fn periodic_mean_2d<F: Fn(f64, f64) -> f64>(f: F, tol: f64) -> Result<f64, ActionError> {
    let grid = |n: usize| -> f64 {
        let h = 2.0 * PI / n as f64;
        let mut s = 0.0;
        for i in 0..n {
            for j in 0..n {
                s += f(i as f64 * h, j as f64 * h);
            }
        }
        s / (n * n) as f64
    };
    let mut n = 32;
    let mut prev = grid(n);
    while n < MAX_NODES_2D {
        n *= 2;
        let cur = grid(n);
        if (cur - prev).abs() <= tol * cur.abs().max(1.0) {
            return Ok(cur);
        }
        prev = cur;
    }
    Err(ActionError::NotConverged { nodes: n * n })
}

/// Maximal-torus parametrization of the groups with exact quadrature.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Torus {
    U1,
    SU2,
    SO3,
    U2,
}

impl Torus {
    pub fn for_spec(spec: GroupSpec) -> Result<Torus, ActionError> {
        match (spec.family, spec.n) {
            (Family::U, 1) => Ok(Torus::U1),
            (Family::SU, 2) => Ok(Torus::SU2),
            (Family::SO, 3) => Ok(Torus::SO3),
            (Family::U, 2) => Ok(Torus::U2),
            _ => Err(ActionError::Unsupported(spec)),
        }
    }

    pub fn spec(self) -> GroupSpec {
        match self {
            Torus::U1 => GroupSpec::u1(),
            Torus::SU2 => GroupSpec::su(2),
            Torus::SO3 => GroupSpec::so(3),
            Torus::U2 => GroupSpec::u(2),
        }
    }

    pub fn rank(self) -> usize {
        match self {
            Torus::U2 => 2,
            _ => 1,
        }
    }

    /// Haar average of a class function given on torus angles.
    pub fn average<F: Fn(&[f64]) -> f64>(self, f: F, tol: f64) -> Result<f64, ActionError> {
        match self {
            Torus::U1 => periodic_mean(|t| f(&[t]), tol),
            Torus::SU2 => periodic_mean(|p| 2.0 * p.sin().powi(2) * f(&[p]), tol),
            Torus::SO3 => periodic_mean(|p| (1.0 - p.cos()) * f(&[p]), tol),
            Torus::U2 => periodic_mean_2d(
                |a, b| {
                    let v = (C64::from_polar(1.0, a) - C64::from_polar(1.0, b)).norm_sqr();
                    0.5 * v * f(&[a, b])
                },
                tol,
            ),
        }
    }

    /// `Tr Q` for the torus element with the given angles.
    pub fn trace(self, angles: &[f64]) -> C64 {
        match self {
            Torus::U1 => C64::from_polar(1.0, angles[0]),
            Torus::SU2 => C64::new(2.0 * angles[0].cos(), 0.0),
            Torus::SO3 => C64::new(1.0 + 2.0 * angles[0].cos(), 0.0),
            Torus::U2 => C64::from_polar(1.0, angles[0]) + C64::from_polar(1.0, angles[1]),
        }
    }

    /// `Tr Q^m` for the torus element.
    pub fn power_trace(self, angles: &[f64], m: i32) -> C64 {
        let mf = m as f64;
        match self {
            Torus::U1 => C64::from_polar(1.0, mf * angles[0]),
            Torus::SU2 => C64::new(2.0 * (mf * angles[0]).cos(), 0.0),
            Torus::SO3 => C64::new(1.0 + 2.0 * (mf * angles[0]).cos(), 0.0),
            Torus::U2 => C64::from_polar(1.0, mf * angles[0]) + C64::from_polar(1.0, mf * angles[1]),
        }
    }

    pub fn element(self, angles: &[f64]) -> GroupElement {
        let mut m = Mat::identity();
        match self {
            Torus::U1 => m[(0, 0)] = C64::from_polar(1.0, angles[0]),
            Torus::SU2 => {
                m[(0, 0)] = C64::from_polar(1.0, angles[0]);
                m[(1, 1)] = C64::from_polar(1.0, -angles[0]);
            }
            Torus::SO3 => {
                let (s, c) = angles[0].sin_cos();
                m[(0, 0)] = C64::new(c, 0.0);
                m[(0, 1)] = C64::new(-s, 0.0);
                m[(1, 0)] = C64::new(s, 0.0);
                m[(1, 1)] = C64::new(c, 0.0);
            }
            Torus::U2 => {
                m[(0, 0)] = C64::from_polar(1.0, angles[0]);
                m[(1, 1)] = C64::from_polar(1.0, angles[1]);
            }
        }
        GroupElement::from_matrix(self.spec().n, m)
    }
}

/// Lattice spacing and group. The single-plaquette weight is
/// `exp(-(beta N / (2 eps^2)) Re Tr(I - Q))`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ActionParams {
    pub epsilon: f64,
    pub spec: GroupSpec,
}

impl ActionParams {
    pub fn new(spec: GroupSpec, epsilon: f64) -> Result<Self, ActionError> {
        if !(epsilon > 0.0) || !epsilon.is_finite() {
            return Err(ActionError::BadParameter(format!("epsilon = {epsilon}")));
        }
        Ok(ActionParams { epsilon, spec })
    }

    /// `beta N / (2 eps^2)`.
    pub fn coupling(&self) -> f64 {
        self.spec.kappa() / (self.epsilon * self.epsilon)
    }

    /// Logarithm of the unnormalized plaquette weight given `Re Tr Q`.
    pub fn log_weight(&self, re_trace: f64) -> f64 {
        self.coupling() * (re_trace - self.spec.n_f64())
    }

    pub fn weight(&self, re_trace: f64) -> f64 {
        self.log_weight(re_trace).exp()
    }
}

pub fn partition_z(params: &ActionParams) -> Result<f64, ActionError> {
    let torus = Torus::for_spec(params.spec)?;
    torus.average(|a| params.weight(torus.trace(a).re), QUAD_TOL)
}

/// Normalized single-plaquette density at `q`.
pub fn wilson_density(params: &ActionParams, z: f64, q: &GroupElement) -> f64 {
    params.weight(q.trace().re) / z
}

/// `int f S^eps dQ` for a class function given on torus angles.
pub fn class_expectation<F: Fn(&[f64]) -> f64>(params: &ActionParams, f: F) -> Result<f64, ActionError> {
    let torus = Torus::for_spec(params.spec)?;
    let z = partition_z(params)?;
    let num = torus.average(|a| f(a) * params.weight(torus.trace(a).re), QUAD_TOL)?;
    Ok(num / z)
}

/// Irreducible representations on the supported ladders.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Irrep {
    U1(i32),
    /// Spin `j`, stored as `2j`.
    SU2(u32),
    SO3(u32),
    /// Highest weight `(l1, l2)` with `l1 >= l2`.
    U2(i32, i32),
}

impl Irrep {
    pub fn standard(torus: Torus) -> Irrep {
        match torus {
            Torus::U1 => Irrep::U1(1),
            Torus::SU2 => Irrep::SU2(1),
            Torus::SO3 => Irrep::SO3(1),
            Torus::U2 => Irrep::U2(1, 0),
        }
    }

    pub fn trivial(torus: Torus) -> Irrep {
        match torus {
            Torus::U1 => Irrep::U1(0),
            Torus::SU2 => Irrep::SU2(0),
            Torus::SO3 => Irrep::SO3(0),
            Torus::U2 => Irrep::U2(0, 0),
        }
    }

    pub fn dim(self) -> f64 {
        match self {
            Irrep::U1(_) => 1.0,
            Irrep::SU2(tj) => (tj + 1) as f64,
            Irrep::SO3(l) => (2 * l + 1) as f64,
            Irrep::U2(a, b) => (a - b + 1) as f64,
        }
    }

    /// Casimir constant under the group's inner product.
    pub fn casimir(self) -> f64 {
        match self {
            Irrep::U1(n) => -((n * n) as f64),
            Irrep::SU2(tj) => {
                let j = tj as f64 / 2.0;
                -j * (j + 1.0)
            }
            Irrep::SO3(l) => {
                let l = l as f64;
                -l * (l + 1.0) / 3.0
            }
            Irrep::U2(a, b) => {
                let (a, b) = (a as f64, b as f64);
                -(a * (a + 1.0) + b * (b - 1.0)) / 2.0
            }
        }
    }

    /// Character on torus angles.
    pub fn character(self, angles: &[f64]) -> C64 {
        match self {
            Irrep::U1(n) => C64::from_polar(1.0, n as f64 * angles[0]),
            Irrep::SU2(tj) => {
                let p = angles[0];
                let s = p.sin();
                if s.abs() < 1e-12 {
                    let sign = if p.cos() > 0.0 || tj % 2 == 0 { 1.0 } else { -1.0 };
                    C64::new(sign * (tj + 1) as f64, 0.0)
                } else {
                    C64::new(((tj + 1) as f64 * p).sin() / s, 0.0)
                }
            }
            Irrep::SO3(l) => {
                let p = angles[0];
                let s = (p / 2.0).sin();
                if s.abs() < 1e-12 {
                    C64::new((2 * l + 1) as f64, 0.0)
                } else {
                    C64::new(((2 * l + 1) as f64 * p / 2.0).sin() / s, 0.0)
                }
            }
            Irrep::U2(a, b) => {
                let z1 = C64::from_polar(1.0, angles[0]);
                let z2 = C64::from_polar(1.0, angles[1]);
                let den = z1 - z2;
                if den.norm() < 1e-9 {
                    // Confluent limit: (a - b + 1) z^(a+b).
                    return C64::from_polar((a - b + 1) as f64, (a + b) as f64 * angles[0]);
                }
                (z1.powi(a + 1) * z2.powi(b) - z2.powi(a + 1) * z1.powi(b)) / den
            }
        }
    }

    /// `Vandermonde density * character`, regular on the whole torus.
    fn weighted_character(self, angles: &[f64]) -> f64 {
        match self {
            Irrep::U1(n) => (n as f64 * angles[0]).cos(),
            Irrep::SU2(tj) => {
                let p = angles[0];
                2.0 * p.sin() * ((tj + 1) as f64 * p).sin()
            }
            Irrep::SO3(l) => {
                let p = angles[0];
                let l = l as f64;
                (l * p).cos() - ((l + 1.0) * p).cos()
            }
            Irrep::U2(a, b) => {
                let z1 = C64::from_polar(1.0, angles[0]);
                let z2 = C64::from_polar(1.0, angles[1]);
                let num = z1.powi(a + 1) * z2.powi(b) - z2.powi(a + 1) * z1.powi(b);
                0.5 * ((z1 - z2) * num.conj()).re
            }
        }
    }

    pub fn label(self) -> String {
        match self {
            Irrep::U1(n) => format!("{n}"),
            Irrep::SU2(tj) => {
                if tj % 2 == 0 {
                    format!("{}", tj / 2)
                } else {
                    format!("{tj}/2")
                }
            }
            Irrep::SO3(l) => format!("{l}"),
            Irrep::U2(a, b) => format!("({a},{b})"),
        }
    }

    pub fn parse_label(torus: Torus, s: &str) -> Option<Irrep> {
        match torus {
            Torus::U1 => s.parse().ok().map(Irrep::U1),
            Torus::SO3 => s.parse().ok().map(Irrep::SO3),
            Torus::SU2 => match s.split_once('/') {
                Some((num, "2")) => num.parse().ok().map(Irrep::SU2),
                Some(_) => None,
                None => s.parse::<u32>().ok().map(|j| Irrep::SU2(2 * j)),
            },
            Torus::U2 => {
                let inner = s.strip_prefix('(')?.strip_suffix(')')?;
                let (a, b) = inner.split_once(',')?;
                Some(Irrep::U2(a.trim().parse().ok()?, b.trim().parse().ok()?))
            }
        }
    }
}

/// Fourier coefficients `g_m = mean(exp(c (cos t - 1)) cos(m t))` used by the
/// Toeplitz formula for U(2).
fn u2_fourier(params: &ActionParams, m: i32) -> Result<f64, ActionError> {
    let c = params.coupling();
    let mf = m as f64;
    periodic_mean(|t| (c * (t.cos() - 1.0)).exp() * (mf * t).cos(), QUAD_TOL * 1e-3)
}

/// `a_tau(eps) = (1/d_tau) int chi_tau(Q^-1) S^eps(Q) dQ`.
pub fn char_coefficient(label: Irrep, params: &ActionParams) -> Result<f64, ActionError> {
    let torus = Torus::for_spec(params.spec)?;
    let ok = matches!(
        (torus, label),
        (Torus::U1, Irrep::U1(_)) | (Torus::SU2, Irrep::SU2(_)) | (Torus::SO3, Irrep::SO3(_)) | (Torus::U2, Irrep::U2(_, _))
    );
    if !ok {
        return Err(ActionError::UnsupportedIrrep);
    }
    if let Irrep::U2(a, b) = label {
        if a < b {
            return Err(ActionError::UnsupportedIrrep);
        }
        let g = |m: i32| u2_fourier(params, m);
        let num = g(a)? * g(b)? - g(a + 1)? * g(b - 1)?;
        let z = g(0)? * g(0)? - g(1)? * g(1)?;
        return Ok(num / (z * label.dim()));
    }
    let z = partition_z(params)?;
    let num = periodic_mean(|x| label.weighted_character(&[x]) * params.weight(torus.trace(&[x]).re), QUAD_TOL)?;
    Ok(num / (z * label.dim()))
}

/// Same coefficient by direct torus quadrature of `chi` times the density, for U(2).
pub fn char_coefficient_torus_u2(label: Irrep, params: &ActionParams) -> Result<f64, ActionError> {
    if Torus::for_spec(params.spec)? != Torus::U2 {
        return Err(ActionError::Unsupported(params.spec));
    }
    let z = partition_z(params)?;
    let num = periodic_mean_2d(
        |a, b| label.weighted_character(&[a, b]) * params.weight(a.cos() + b.cos()),
        QUAD_TOL,
    )?;
    Ok(num / (z * label.dim()))
}

/// `a_std(eps) = int tr(Q) S^eps(Q) dQ`.
pub fn std_coefficient(params: &ActionParams) -> Result<f64, ActionError> {
    let torus = Torus::for_spec(params.spec)?;
    char_coefficient(Irrep::standard(torus), params)
}

/// `int tr(Q^2) S^eps(Q) dQ` by direct quadrature.
pub fn second_moment(params: &ActionParams) -> Result<f64, ActionError> {
    let torus = Torus::for_spec(params.spec)?;
    let n = params.spec.n_f64();
    class_expectation(params, |a| torus.power_trace(a, 2).re / n)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CharRecord {
    pub label: Irrep,
    pub dim: f64,
    pub casimir: f64,
    pub coeff: f64,
}

/// Character coefficients of `S^eps` (or of its `power`-fold convolution).
#[derive(Debug, Clone, PartialEq)]
pub struct CharCoeffTable {
    pub spec: GroupSpec,
    pub epsilon: f64,
    pub power: u64,
    pub cutoff: u32,
    pub records: Vec<CharRecord>,
}

pub fn ladder(torus: Torus, cutoff: u32) -> Vec<Irrep> {
    let c = cutoff as i32;
    match torus {
        Torus::U1 => (-c..=c).map(Irrep::U1).collect(),
        Torus::SU2 => (0..=cutoff).map(Irrep::SU2).collect(),
        Torus::SO3 => (0..=cutoff).map(Irrep::SO3).collect(),
        Torus::U2 => {
            let mut v = Vec::new();
            for a in -c..=c {
                for b in -c..=a {
                    v.push(Irrep::U2(a, b));
                }
            }
            v
        }
    }
}

impl CharCoeffTable {
    pub fn build(params: &ActionParams, cutoff: u32) -> Result<Self, ActionError> {
        let torus = Torus::for_spec(params.spec)?;
        let records = ladder(torus, cutoff)
            .into_iter()
            .map(|label| {
                Ok(CharRecord { label, dim: label.dim(), casimir: label.casimir(), coeff: char_coefficient(label, params)? })
            })
            .collect::<Result<Vec<_>, ActionError>>()?;
        Ok(CharCoeffTable { spec: params.spec, epsilon: params.epsilon, power: 1, cutoff, records })
    }

    pub fn coeff(&self, label: Irrep) -> Option<f64> {
        self.records.iter().find(|r| r.label == label).map(|r| r.coeff)
    }

    /// Truncated `sum_tau d_tau a_tau chi_tau` at torus angles.
    pub fn density(&self, angles: &[f64]) -> f64 {
        self.records.iter().map(|r| r.dim * r.coeff * r.label.character(angles).re).sum()
    }

    pub fn to_cache_text(&self) -> String {
        let mut s = format!("# {} eps={} power={} cutoff={}\n", self.spec, self.epsilon, self.power, self.cutoff);
        for r in &self.records {
            s.push_str(&format!("{} {} {} {}\n", r.label.label(), r.dim, r.casimir, r.coeff));
        }
        s
    }

    pub fn from_cache_text(text: &str) -> Result<Self, ActionError> {
        let bad = |m: &str| ActionError::BadParameter(String::from(m));
        let mut lines = text.lines();
        let header = lines.next().ok_or_else(|| bad("empty cache"))?;
        let fields: Vec<&str> = header.trim_start_matches('#').split_whitespace().collect();
        if fields.len() != 4 {
            return Err(bad("cache header"));
        }
        let spec = GroupSpec::parse(fields[0]).map_err(|_| bad("cache group"))?;
        let value = |f: &str, key: &str| -> Result<String, ActionError> {
            f.strip_prefix(key).map(String::from).ok_or_else(|| bad("cache header key"))
        };
        let epsilon: f64 = value(fields[1], "eps=")?.parse().map_err(|_| bad("eps"))?;
        let power: u64 = value(fields[2], "power=")?.parse().map_err(|_| bad("power"))?;
        let cutoff: u32 = value(fields[3], "cutoff=")?.parse().map_err(|_| bad("cutoff"))?;
        let torus = Torus::for_spec(spec)?;
        let mut records = Vec::new();
        for line in lines.filter(|l| !l.trim().is_empty()) {
            let p: Vec<&str> = line.split_whitespace().collect();
            if p.len() != 4 {
                return Err(bad("cache record"));
            }
            let label = Irrep::parse_label(torus, p[0]).ok_or_else(|| bad("cache label"))?;
            let num = |s: &str| s.parse::<f64>().map_err(|_| bad("cache number"));
            records.push(CharRecord { label, dim: num(p[1])?, casimir: num(p[2])?, coeff: num(p[3])? });
        }
        Ok(CharCoeffTable { spec, epsilon, power, cutoff, records })
    }
}

/// Coefficients of the `k`-fold convolution power.
pub fn convolution_power(table: &CharCoeffTable, k: u64) -> CharCoeffTable {
    let mut out = table.clone();
    out.power = table.power * k;
    for r in out.records.iter_mut() {
        r.coeff = r.coeff.powi(k as i32);
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HeatKernelValue {
    pub value: f64,
    pub tail_bound: f64,
    pub terms: usize,
}

const HEAT_TAIL: f64 = 1e-12;
const HEAT_MAX_SHELL: i32 = 20_000;

/// Truncated `sum_tau d_tau exp(c_tau t / 2) chi_tau(Q)` with a tail bound.
///
/// Shells of the ladder are added until the bound `sum d_tau^2 exp(c_tau t/2)`
/// of the next shell, extended geometrically, falls below `1e-12`.
pub fn heat_kernel_eval(torus: Torus, angles: &[f64], t: f64) -> Result<HeatKernelValue, ActionError> {
    if !(t > 0.0) {
        return Err(ActionError::BadParameter(format!("t = {t}")));
    }
    let shell = |m: i32| -> Vec<Irrep> {
        match torus {
            Torus::U1 => {
                if m == 0 {
                    alloc::vec![Irrep::U1(0)]
                } else {
                    alloc::vec![Irrep::U1(m), Irrep::U1(-m)]
                }
            }
            Torus::SU2 => alloc::vec![Irrep::SU2(m as u32)],
            Torus::SO3 => alloc::vec![Irrep::SO3(m as u32)],
            Torus::U2 => {
                let mut v = Vec::new();
                for a in -m..=m {
                    for b in -m..=a {
                        if a.abs() == m || b.abs() == m {
                            v.push(Irrep::U2(a, b));
                        }
                    }
                }
                v
            }
        }
    };
    let bound = |m: i32| -> f64 { shell(m).iter().map(|r| r.dim() * r.dim() * (r.casimir() * t / 2.0).exp()).sum() };
    let mut value = 0.0;
    let mut terms = 0;
    let mut m = 0;
    loop {
        for r in shell(m) {
            value += r.dim() * (r.casimir() * t / 2.0).exp() * r.character(angles).re;
            terms += 1;
        }
        let next = bound(m + 1);
        let after = bound(m + 2);
        if next > 0.0 || after > 0.0 {
            let ratio = if next > 0.0 { after / next } else { 0.0 };
            if ratio < 1.0 {
                let tail = next / (1.0 - ratio);
                if tail < HEAT_TAIL {
                    return Ok(HeatKernelValue { value, tail_bound: tail, terms });
                }
            }
        } else {
            return Ok(HeatKernelValue { value, tail_bound: 0.0, terms });
        }
        m += 1;
        if m > HEAT_MAX_SHELL {
            return Err(ActionError::CutoffExceeded { t });
        }
    }
}

/// Wrapped Gaussian form of the U(1) heat kernel.
pub fn u1_heat_kernel_wrapped(theta: f64, t: f64) -> f64 {
    let kmax = (10.0 + 8.0 * t.sqrt()) as i32;
    let mut s = 0.0;
    for k in -kmax..=kmax {
        let d = theta - 2.0 * PI * k as f64;
        s += (-d * d / (2.0 * t)).exp();
    }
    (2.0 * PI / t).sqrt() * s
}

/// Derivative in `theta` of the wrapped Gaussian heat kernel.
pub fn u1_heat_kernel_wrapped_derivative(theta: f64, t: f64) -> f64 {
    let kmax = (10.0 + 8.0 * t.sqrt()) as i32;
    let mut s = 0.0;
    for k in -kmax..=kmax {
        let d = theta - 2.0 * PI * k as f64;
        s += -d / t * (-d * d / (2.0 * t)).exp();
    }
    (2.0 * PI / t).sqrt() * s
}

#[derive(Debug, Clone, PartialEq)]
pub struct GaussianRow {
    pub epsilon: f64,
    pub integral: f64,
    pub predicted: f64,
    pub error: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GaussianReport {
    pub laplacian_declared: f64,
    pub laplacian_numeric: f64,
    pub rows: Vec<GaussianRow>,
    pub slope: f64,
}

/// Least-squares slope of `log y` against `log x`.
pub fn loglog_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let num: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let den: f64 = lx.iter().map(|x| (x - mx) * (x - mx)).sum();
    num / den
}

/// Compares `int f S^eps` with `(eps^2/2) Delta f(I)` over a list of spacings.
///
/// `f` is a class function vanishing at the identity, supplied both on torus
/// angles (for quadrature) and on group elements (for the numerical Laplacian).
pub fn gaussian_lemma_check<F, G>(
    spec: GroupSpec,
    f_angles: F,
    f_group: G,
    laplacian_at_identity: f64,
    eps_list: &[f64],
) -> Result<GaussianReport, ActionError>
where
    F: Fn(&[f64]) -> f64,
    G: Fn(&GroupElement) -> f64,
{
    let id = GroupElement::identity(spec);
    let numeric = crate::group::laplacian(spec, &f_group, &id, 1e-3);
    let mut rows = Vec::with_capacity(eps_list.len());
    for &eps in eps_list {
        let params = ActionParams::new(spec, eps)?;
        let integral = class_expectation(&params, &f_angles)?;
        let predicted = eps * eps / 2.0 * laplacian_at_identity;
        rows.push(GaussianRow { epsilon: eps, integral, predicted, error: (integral - predicted).abs() });
    }
    let xs: Vec<f64> = rows.iter().map(|r| r.epsilon).collect();
    let ys: Vec<f64> = rows.iter().map(|r| r.error.max(1e-300)).collect();
    let slope = loglog_slope(&xs, &ys);
    Ok(GaussianReport { laplacian_declared: laplacian_at_identity, laplacian_numeric: numeric, rows, slope })
}

#[derive(Debug, Clone, PartialEq)]
pub struct J1Row {
    pub epsilon: f64,
    pub steps: u64,
    pub lhs: Complex64,
    pub rhs: Complex64,
    pub gap: f64,
}

/// U(1) density of the `k`-fold convolution of `S^eps` by its character sum.
fn u1_convolution_density(coeffs: &[f64], k: u64, theta: f64) -> f64 {
    let mut s = coeffs[0].powi(k as i32);
    for (n, a) in coeffs.iter().enumerate().skip(1) {
        let ak = a.powi(k as i32);
        if ak < 1e-18 {
            break;
        }
        s += 2.0 * ak * (n as f64 * theta).cos();
    }
    s
}

/// Left side of the second convergence lemma on U(1), with `a1 = e^{i alpha}`,
/// `a2 = e^{i gamma}`, by quadrature over `Q`.
pub fn lemma_j1_lhs(epsilon: f64, steps: u64, alpha: f64, gamma: f64) -> Result<Complex64, ActionError> {
    let params = ActionParams::new(GroupSpec::u1(), epsilon)?;
    let z = partition_z(&params)?;
    let mut coeffs = Vec::new();
    for n in 0..4096 {
        let a = char_coefficient(Irrep::U1(n), &params)?;
        coeffs.push(a);
        if a.powi(steps as i32) < 1e-18 {
            break;
        }
    }
    let integrand = |theta: f64, part: u8| -> f64 {
        // tr((Q - Q^-1) a1) = 2 i sin(theta) e^{i alpha}
        let f = C64::new(0.0, 2.0 * theta.sin()) * C64::from_polar(1.0, alpha);
        let sk = u1_convolution_density(&coeffs, steps, theta + gamma);
        let s = params.weight(theta.cos()) / z;
        let v = f * sk * s;
        if part == 0 {
            v.re
        } else {
            v.im
        }
    };
    let re = periodic_mean(|t| integrand(t, 0), QUAD_TOL)?;
    let im = periodic_mean(|t| integrand(t, 1), QUAD_TOL)?;
    Ok(C64::new(re, im) / (2.0 * epsilon * epsilon))
}

/// Right side: `L tr(a1) * L p_t(a2)` with `L p_t` by central differences of
/// heat-kernel evaluations.
pub fn lemma_j1_rhs(t: f64, alpha: f64, gamma: f64) -> Result<Complex64, ActionError> {
    let h = 1e-4;
    let p = |g: f64| heat_kernel_eval(Torus::U1, &[g], t).map(|v| v.value);
    let dp = (p(gamma + h)? - p(gamma - h)?) / (2.0 * h);
    let dp2 = (p(gamma + h / 2.0)? - p(gamma - h / 2.0)?) / h;
    let d = (4.0 * dp2 - dp) / 3.0;
    // L tr(a1) = i e^{i alpha}
    Ok(C64::new(0.0, 1.0) * C64::from_polar(1.0, alpha) * d)
}

pub fn lemma_j1_check(t: f64, alpha: f64, gamma: f64, eps_list: &[f64]) -> Result<Vec<J1Row>, ActionError> {
    let rhs = lemma_j1_rhs(t, alpha, gamma)?;
    eps_list
        .iter()
        .map(|&eps| {
            let steps = (t / (eps * eps)).round().max(1.0) as u64;
            let lhs = lemma_j1_lhs(eps, steps, alpha, gamma)?;
            Ok(J1Row { epsilon: eps, steps, lhs, rhs, gap: (lhs - rhs).norm() })
        })
        .collect()
}
