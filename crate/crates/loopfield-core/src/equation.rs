//! Term-by-term assembly of the single-location master loop equation and its
//! exact U(1) evaluation.
//!
//! The equation is written as `LHS = RHS` with the deformation terms on the
//! left:
//!
//! ```text
//! (1/2eps^2)(sum D- - sum D+) = C E W + sum S+ - sum S-
//!     - tw (sum T- - sum T+) + (gamma/2eps^2)(sum E+ - sum E-) + mergers
//! ```
//!
//! with `tw = (2-beta)/(beta N)` and
//! `C = 1 - tw - (gamma/N^2)(1 + same - opposite)`, where `same` and
//! `opposite` count the other occurrences of the bond in the same component.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

#[cfg(not(test))]
#[allow(unused_imports)]
use num_traits::Float;

use crate::driver::{u1_expectation_string, DriverError, U1Table};
use crate::group::{Family, GroupSpec};
use crate::loops::{
    expansion_sets, lift_deformations, lift_merge, lift_unary, Loop, LoopError, LoopString, Side, StringOp,
};

/// Multipliers on each coefficient family; all ones for the true equation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoefficientScales {
    pub deformation_minus: f64,
    pub deformation_plus: f64,
    pub split: f64,
    pub twist: f64,
    pub merger: f64,
    pub expansion: f64,
    pub constant: f64,
}

impl Default for CoefficientScales {
    fn default() -> Self {
        CoefficientScales {
            deformation_minus: 1.0,
            deformation_plus: 1.0,
            split: 1.0,
            twist: 1.0,
            merger: 1.0,
            expansion: 1.0,
            constant: 1.0,
        }
    }
}

impl CoefficientScales {
    /// Names accepted by [`CoefficientScales::set`].
    pub const NAMES: [&'static str; 7] =
        ["deformation_minus", "deformation_plus", "split", "twist", "merger", "expansion", "constant"];

    pub fn set(&mut self, name: &str, value: f64) -> bool {
        let slot = match name {
            "deformation_minus" => &mut self.deformation_minus,
            "deformation_plus" => &mut self.deformation_plus,
            "split" => &mut self.split,
            "twist" => &mut self.twist,
            "merger" => &mut self.merger,
            "expansion" => &mut self.expansion,
            "constant" => &mut self.constant,
            _ => return false,
        };
        *slot = value;
        true
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EquationKind {
    /// Single loop, `U(N)`.
    UnitarySingle,
    /// Several loops, `U(N)`.
    UnitaryString,
    /// `SU(N)` or `SO(N)`.
    Unified,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EquationSpec {
    pub group: GroupSpec,
    pub subject: LoopString,
    pub component: usize,
    pub location: usize,
    pub epsilon: f64,
    pub scales: CoefficientScales,
}

impl EquationSpec {
    pub fn new(group: GroupSpec, subject: LoopString, component: usize, location: usize, epsilon: f64) -> Self {
        EquationSpec { group, subject, component, location, epsilon, scales: CoefficientScales::default() }
    }

    pub fn single(group: GroupSpec, l: Loop, location: usize, epsilon: f64) -> Self {
        Self::new(group, LoopString::single(l), 0, location, epsilon)
    }

    pub fn kind(&self) -> EquationKind {
        match self.group.family {
            Family::U if self.subject.len() == 1 => EquationKind::UnitarySingle,
            Family::U => EquationKind::UnitaryString,
            _ => EquationKind::Unified,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum TermTag {
    DeformationMinus(Side),
    DeformationPlus(Side),
    Constant,
    SplitPlus,
    SplitMinus,
    TwistMinus,
    TwistPlus,
    ExpansionPlus(Side),
    ExpansionMinus(Side),
    MergerPlus,
    MergerMinus,
    MergerSelf,
}

impl TermTag {
    pub fn name(&self) -> &'static str {
        match self {
            TermTag::DeformationMinus(Side::Left) => "deformation-minus-left",
            TermTag::DeformationMinus(Side::Right) => "deformation-minus-right",
            TermTag::DeformationPlus(Side::Left) => "deformation-plus-left",
            TermTag::DeformationPlus(Side::Right) => "deformation-plus-right",
            TermTag::Constant => "constant",
            TermTag::SplitPlus => "split-plus",
            TermTag::SplitMinus => "split-minus",
            TermTag::TwistMinus => "twist-minus",
            TermTag::TwistPlus => "twist-plus",
            TermTag::ExpansionPlus(Side::Left) => "expansion-plus-left",
            TermTag::ExpansionPlus(Side::Right) => "expansion-plus-right",
            TermTag::ExpansionMinus(Side::Left) => "expansion-minus-left",
            TermTag::ExpansionMinus(Side::Right) => "expansion-minus-right",
            TermTag::MergerPlus => "merger-plus",
            TermTag::MergerMinus => "merger-minus",
            TermTag::MergerSelf => "merger-self",
        }
    }

    pub fn is_lhs(&self) -> bool {
        matches!(self, TermTag::DeformationMinus(_) | TermTag::DeformationPlus(_))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Term {
    pub tag: TermTag,
    pub coeff: f64,
    pub string: LoopString,
}

/// The constant in front of `E W` on the right side.
pub fn constant_coefficient(group: GroupSpec, same: usize, opposite: usize) -> f64 {
    let n2 = group.n_f64() * group.n_f64();
    1.0 - group.twist_coefficient() - group.gamma() / n2 * (1.0 + same as f64 - opposite as f64)
}

/// Enumerates all terms at the fixed component and location.
pub fn assemble(spec: &EquationSpec) -> Result<Vec<Term>, LoopError> {
    let s = &spec.subject;
    let k = spec.component;
    let x = spec.location;
    let l = s.loops.get(k).ok_or(LoopError::LocationOutOfRange(k))?;
    let e = l.bond(x)?;
    let g = spec.group;
    let sc = spec.scales;
    let half_inv = 1.0 / (2.0 * spec.epsilon * spec.epsilon);
    let n2 = g.n_f64() * g.n_f64();
    let tw = g.twist_coefficient();
    let gamma = g.gamma();
    let so = g.family == Family::SO;
    let mut terms = Vec::new();

    let (minus, plus) = lift_deformations(s, k, x)?;
    for (side, st) in minus {
        terms.push(Term { tag: TermTag::DeformationMinus(side), coeff: sc.deformation_minus * half_inv, string: st });
    }
    for (side, st) in plus {
        terms.push(Term { tag: TermTag::DeformationPlus(side), coeff: -sc.deformation_plus * half_inv, string: st });
    }

    let mut same = 0;
    let mut opposite = 0;
    for (y, same_dir) in l.occurrences(e) {
        if y == x {
            continue;
        }
        if same_dir {
            same += 1;
            terms.push(Term { tag: TermTag::SplitPlus, coeff: sc.split, string: lift_unary(s, k, StringOp::SplitPositive, x, y)? });
            if tw != 0.0 {
                terms.push(Term { tag: TermTag::TwistMinus, coeff: -tw * sc.twist, string: lift_unary(s, k, StringOp::TwistNegative, x, y)? });
            }
        } else {
            opposite += 1;
            terms.push(Term { tag: TermTag::SplitMinus, coeff: -sc.split, string: lift_unary(s, k, StringOp::SplitNegative, x, y)? });
            if tw != 0.0 {
                terms.push(Term { tag: TermTag::TwistPlus, coeff: tw * sc.twist, string: lift_unary(s, k, StringOp::TwistPositive, x, y)? });
            }
        }
    }

    if gamma != 0.0 {
        let (eplus, eminus) = expansion_sets(l, x)?;
        let sides = [Side::Left, Side::Right];
        for (i, st) in eplus.into_iter().enumerate() {
            let mut loops = s.loops.clone();
            loops.push(st.loops[1].clone());
            terms.push(Term {
                tag: TermTag::ExpansionPlus(sides[i]),
                coeff: gamma * half_inv * sc.expansion,
                string: LoopString::new(loops),
            });
        }
        for (i, st) in eminus.into_iter().enumerate() {
            let mut loops = s.loops.clone();
            loops.push(st.loops[1].clone());
            terms.push(Term {
                tag: TermTag::ExpansionMinus(sides[i]),
                coeff: -gamma * half_inv * sc.expansion,
                string: LoopString::new(loops),
            });
        }
    }

    for (j, other) in s.loops.iter().enumerate() {
        if j == k {
            continue;
        }
        for (y, same_dir) in other.occurrences(e) {
            let m = sc.merger / n2;
            if same_dir {
                terms.push(Term { tag: TermTag::MergerPlus, coeff: m, string: lift_merge(s, k, x, j, y, true)? });
                if gamma != 0.0 {
                    terms.push(Term { tag: TermTag::MergerSelf, coeff: -gamma * m, string: s.clone() });
                }
                if so {
                    terms.push(Term { tag: TermTag::MergerMinus, coeff: -m, string: lift_merge(s, k, x, j, y, false)? });
                }
            } else {
                terms.push(Term { tag: TermTag::MergerMinus, coeff: -m, string: lift_merge(s, k, x, j, y, false)? });
                if gamma != 0.0 {
                    terms.push(Term { tag: TermTag::MergerSelf, coeff: gamma * m, string: s.clone() });
                }
                if so {
                    terms.push(Term { tag: TermTag::MergerPlus, coeff: m, string: lift_merge(s, k, x, j, y, true)? });
                }
            }
        }
    }

    terms.push(Term {
        tag: TermTag::Constant,
        coeff: constant_coefficient(g, same, opposite) * sc.constant,
        string: s.clone(),
    });
    Ok(terms)
}

#[derive(Debug, Clone, PartialEq)]
pub struct TermValue {
    pub term: Term,
    pub value: f64,
    pub sigma: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EquationReport {
    pub terms: Vec<TermValue>,
    pub lhs: f64,
    pub lhs_sigma: f64,
    pub rhs: f64,
    pub rhs_sigma: f64,
    pub residual: f64,
    pub residual_sigma: f64,
    pub epsilon: f64,
    pub seed: Option<u64>,
    pub backend: String,
}

impl EquationReport {
    /// Builds the sums; side sigmas add term sigmas in quadrature and the
    /// residual sigma is supplied by the backend (it may use correlations).
    pub fn from_values(terms: Vec<TermValue>, residual_sigma: f64, epsilon: f64, seed: Option<u64>, backend: &str) -> Self {
        let mut lhs = 0.0;
        let mut rhs = 0.0;
        let mut lv = 0.0;
        let mut rv = 0.0;
        for t in &terms {
            let c = t.term.coeff;
            if t.term.tag.is_lhs() {
                lhs += c * t.value;
                lv += (c * t.sigma) * (c * t.sigma);
            } else {
                rhs += c * t.value;
                rv += (c * t.sigma) * (c * t.sigma);
            }
        }
        EquationReport {
            terms,
            lhs,
            lhs_sigma: lv.sqrt(),
            rhs,
            rhs_sigma: rv.sqrt(),
            residual: lhs - rhs,
            residual_sigma,
            epsilon,
            seed,
            backend: String::from(backend),
        }
    }
}

/// Exact U(1) expectations with a cache keyed by the sorted string.
#[derive(Debug, Clone)]
pub struct ExactU1 {
    pub table: U1Table,
    cache: BTreeMap<Vec<Loop>, f64>,
}

impl ExactU1 {
    pub fn new(epsilon: f64) -> Result<Self, DriverError> {
        Ok(ExactU1 { table: U1Table::new(epsilon, 16)?, cache: BTreeMap::new() })
    }

    pub fn epsilon(&self) -> f64 {
        self.table.epsilon
    }

    pub fn expectation(&mut self, s: &LoopString) -> Result<f64, DriverError> {
        let mut key: Vec<Loop> = s.without_trivial().loops;
        key.sort();
        if let Some(v) = self.cache.get(&key) {
            return Ok(*v);
        }
        let v = u1_expectation_string(s, &self.table)?;
        self.cache.insert(key, v);
        Ok(v)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum EquationError {
    Loop(LoopError),
    Driver(DriverError),
    Domain(GroupSpec),
}

impl fmt::Display for EquationError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EquationError::Loop(e) => write!(f, "{e}"),
            EquationError::Driver(e) => write!(f, "{e}"),
            EquationError::Domain(g) => write!(f, "backend cannot evaluate {g}"),
        }
    }
}

impl From<LoopError> for EquationError {
    fn from(e: LoopError) -> Self {
        EquationError::Loop(e)
    }
}

impl From<DriverError> for EquationError {
    fn from(e: DriverError) -> Self {
        EquationError::Driver(e)
    }
}

/// Exact evaluation; every sigma is zero.
pub fn evaluate_exact(spec: &EquationSpec, backend: &mut ExactU1) -> Result<EquationReport, EquationError> {
    if spec.group != GroupSpec::u1() {
        return Err(EquationError::Domain(spec.group));
    }
    let terms = assemble(spec)?;
    let mut values = Vec::with_capacity(terms.len());
    for t in terms {
        let v = backend.expectation(&t.string)?;
        values.push(TermValue { term: t, value: v, sigma: 0.0 });
    }
    Ok(EquationReport::from_values(values, 0.0, spec.epsilon, None, "exact-u1"))
}

/// `(1/2eps^2)(sum D- - sum D+)` at one location, from any expectation oracle.
pub fn deformation_sum<F>(s: &LoopString, component: usize, location: usize, epsilon: f64, mut expect: F) -> Result<f64, EquationError>
where
    F: FnMut(&LoopString) -> Result<f64, EquationError>,
{
    let (minus, plus) = lift_deformations(s, component, location)?;
    let mut acc = 0.0;
    for (_, st) in minus {
        acc += expect(&st)?;
    }
    for (_, st) in plus {
        acc -= expect(&st)?;
    }
    Ok(acc / (2.0 * epsilon * epsilon))
}

/// Terms of an equation with a given tag.
pub fn terms_with<'a>(terms: &'a [Term], pred: impl Fn(&TermTag) -> bool + 'a) -> impl Iterator<Item = &'a Term> + 'a {
    terms.iter().filter(move |t| pred(&t.tag))
}

pub fn count_tags(terms: &[Term]) -> Vec<(TermTag, usize)> {
    let mut m: BTreeMap<TermTag, usize> = BTreeMap::new();
    for t in terms {
        *m.entry(t.tag).or_default() += 1;
    }
    m.into_iter().collect()
}

pub fn single_side_tags() -> Vec<TermTag> {
    vec![
        TermTag::DeformationMinus(Side::Left),
        TermTag::DeformationMinus(Side::Right),
        TermTag::DeformationPlus(Side::Left),
        TermTag::DeformationPlus(Side::Right),
    ]
}
