//! Lattice spacing sweeps towards the continuum loop equations.

use alloc::collections::{BTreeMap, BTreeSet, VecDeque};
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

#[cfg(not(test))]
#[allow(unused_imports)]
use num_traits::Float;

use crate::action::ActionParams;
use crate::driver::{
    area_derivative_u1, build_graph, correction_term_im, correction_term_im_quadrature, make_lattice_approximation,
    merger_pair, simple_loop_area_derivative, simple_loop_expectation, single_face_expectation, three_face_loop,
    u1_expectation_continuum, u1_split_face_factor, unbounded_face_loop, DerivativeMethod, DriverError, Eval,
    LoopFamily, PlanarLoopGraph, SingleFaceValues,
};
use crate::equation::{deformation_sum, EquationError, ExactU1};
use crate::group::GroupSpec;
use crate::loops::{compatible_triples, lift_deformations, merge_positive, split_positive, Bond, Dir, Loop, LoopString, Side, TripleKind};

/// `true` when every gap is strictly smaller than the previous one.
pub fn strictly_decreasing(gaps: &[f64]) -> bool {
    gaps.windows(2).all(|w| w[1] < w[0])
}

/// `log2(gap_{i-1} / gap_i)` for each row after the first.
pub fn rates(gaps: &[f64]) -> Vec<Option<f64>> {
    let mut out = vec![None];
    for w in gaps.windows(2) {
        out.push(if w[0] > 0.0 && w[1] > 0.0 { Some((w[0] / w[1]).log2()) } else { None });
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimpleRow {
    pub epsilon: f64,
    pub deformation: f64,
    pub target: f64,
    pub gap: f64,
    pub outer_minus: f64,
    pub outer_plus: f64,
    pub wilson_discrete: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimpleReport {
    pub group: GroupSpec,
    pub t: f64,
    pub rows: Vec<SimpleRow>,
}

impl SimpleReport {
    pub fn gaps(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.gap).collect()
    }

    pub fn max_outer_defect(&self) -> f64 {
        self.rows.iter().map(|r| (r.outer_minus - r.outer_plus).abs()).fold(0.0, f64::max)
    }
}

/// Expectation oracle for single-loop strings: exact for U(1), single-face
/// integrals for other groups.
enum SimpleOracle {
    U1(ExactU1),
    Face(SingleFaceValues),
}

impl SimpleOracle {
    fn new(group: GroupSpec, epsilon: f64) -> Result<Self, DriverError> {
        if group == GroupSpec::u1() {
            Ok(SimpleOracle::U1(ExactU1::new(epsilon)?))
        } else {
            Ok(SimpleOracle::Face(SingleFaceValues::new(&ActionParams::new(group, epsilon)?)?))
        }
    }

    fn eval(&mut self, s: &LoopString) -> Result<f64, EquationError> {
        match self {
            SimpleOracle::U1(b) => Ok(b.expectation(s)?),
            SimpleOracle::Face(v) => {
                let s = s.without_trivial();
                match s.loops.len() {
                    0 => Ok(1.0),
                    1 => Ok(single_face_expectation(&s.loops[0], v)?),
                    _ => Err(EquationError::Driver(DriverError::UnsupportedPattern)),
                }
            }
        }
    }
}

/// Deformation sum of a square loop of area `t` at its first bond, against
/// `-2 d/dt E W_l`.
pub fn convergence_simple(group: GroupSpec, t: f64, eps_list: &[f64]) -> Result<SimpleReport, EquationError> {
    let target = -2.0 * simple_loop_area_derivative(group, t, DerivativeMethod::Analytic);
    let mut rows = Vec::new();
    for &eps in eps_list {
        let ll = make_lattice_approximation(LoopFamily::Rectangle { t }, eps)?;
        let s = LoopString::single(ll.lp.clone());
        let mut oracle = SimpleOracle::new(group, eps)?;
        let x = 0;
        let d = deformation_sum(&s, 0, x, eps, |st| oracle.eval(st))?;
        let e = ll.lp.bond(x)?;
        let outer = outer_side(&ll.lp, e);
        let (minus, plus) = lift_deformations(&s, 0, x)?;
        let pick = |v: &Vec<(Side, LoopString)>| v.iter().find(|(sd, _)| *sd == outer).map(|(_, st)| st.clone());
        let om = pick(&minus).ok_or(EquationError::Driver(DriverError::UnsupportedPattern))?;
        let op = pick(&plus).ok_or(EquationError::Driver(DriverError::UnsupportedPattern))?;
        let outer_minus = oracle.eval(&om)?;
        let outer_plus = oracle.eval(&op)?;
        let wilson_discrete = simple_loop_expectation(group, t, Eval::Discrete(eps))?;
        rows.push(SimpleRow { epsilon: eps, deformation: d, target, gap: (d - target).abs(), outer_minus, outer_plus, wilson_discrete });
    }
    Ok(SimpleReport { group, t, rows })
}

fn outer_side(l: &Loop, e: Bond) -> Side {
    if crate::driver::side_is_inside(l, e, Side::Left) {
        Side::Right
    } else {
        Side::Left
    }
}

/// Weights of the general linear combination of crossing equations:
/// `b1 (g) + b2 (g underline) - a0 E W - a1 (g1) - a2 (g1 underline) - a3 (g2) - a4 (g2 underline)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Combination {
    pub a: [f64; 5],
    pub b: [f64; 2],
}

impl Combination {
    /// `(g) - (g1)/2 - (g2)/2`.
    pub fn standard() -> Self {
        Combination { a: [0.0, 0.5, 0.0, 0.5, 0.0], b: [1.0, 0.0] }
    }

    pub fn is_normalized(&self) -> bool {
        (self.a.iter().sum::<f64>() - 1.0).abs() < 1e-12 && (self.b.iter().sum::<f64>() - 1.0).abs() < 1e-12
    }
}

/// Orientation of the second traversal of the crossing edge.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CrossingVariant {
    /// `e e1 A e4^-1 e e2 B e3^-1`.
    Standard,
    /// `e e1 A e4^-1 e^-1 e2 B e3^-1`.
    Reversed,
}

impl CrossingVariant {
    /// Sign of the alternating sum in the limit of `(g) - (g1)/2 - (g2)/2`.
    pub fn sign(self) -> f64 {
        match self {
            CrossingVariant::Standard => 1.0,
            CrossingVariant::Reversed => -1.0,
        }
    }

    pub fn family(self, t: [f64; 4]) -> LoopFamily {
        match self {
            CrossingVariant::Standard => LoopFamily::FigureEight { t },
            CrossingVariant::Reversed => LoopFamily::FigureEightReversed { t },
        }
    }
}

/// Continuum quantities of the crossing loop.
#[derive(Debug, Clone, PartialEq)]
pub struct CrossingContinuum {
    pub variant: CrossingVariant,
    pub faces: [(f64, i32); 4],
    pub wilson: f64,
    pub wilson_split: f64,
    pub derivatives: [f64; 4],
    pub derivatives_fd: [f64; 4],
    pub alternating: f64,
    pub im: [f64; 4],
    pub im_quadrature: [f64; 4],
}

impl CrossingContinuum {
    pub fn new(variant: CrossingVariant, faces: [(f64, i32); 4], wilson_split: f64) -> Result<Self, DriverError> {
        let mut derivatives = [0.0; 4];
        let mut derivatives_fd = [0.0; 4];
        let mut im = [0.0; 4];
        let mut im_quadrature = [0.0; 4];
        for i in 0..4 {
            derivatives[i] = area_derivative_u1(&faces, i, DerivativeMethod::Analytic)?;
            derivatives_fd[i] = area_derivative_u1(&faces, i, DerivativeMethod::FiniteDifference)?;
            im[i] = correction_term_im(&faces, i + 1)?;
            im_quadrature[i] = correction_term_im_quadrature(&faces, i + 1)?;
        }
        let d = derivatives;
        Ok(CrossingContinuum {
            variant,
            faces,
            wilson: u1_expectation_continuum(&faces),
            wilson_split,
            derivatives,
            derivatives_fd,
            alternating: d[0] - d[1] + d[2] - d[3],
            im,
            im_quadrature,
        })
    }

    /// Limit of the deformation sum at the crossing bond: `2 Alt + I1 + I3`,
    /// or `-2 Alt + I2 + I4` when reversed.
    pub fn center_limit(&self) -> f64 {
        match self.variant {
            CrossingVariant::Standard => 2.0 * self.alternating + self.im[0] + self.im[2],
            CrossingVariant::Reversed => -2.0 * self.alternating + self.im[1] + self.im[3],
        }
    }

    /// Limit at a bond of `e1`: `2(d1 - d4) E W + 2 I1`, or
    /// `2(d4 - d1) E W + 2 I4` when reversed.
    pub fn near_limit(&self) -> f64 {
        let d = &self.derivatives;
        match self.variant {
            CrossingVariant::Standard => 2.0 * (d[0] - d[3]) + 2.0 * self.im[0],
            CrossingVariant::Reversed => 2.0 * (d[3] - d[0]) + 2.0 * self.im[3],
        }
    }

    /// Limit at a bond of `e3`: `2(d3 - d2) E W + 2 I3`, or
    /// `2(d2 - d3) E W + 2 I2` when reversed.
    pub fn far_limit(&self) -> f64 {
        let d = &self.derivatives;
        match self.variant {
            CrossingVariant::Standard => 2.0 * (d[2] - d[1]) + 2.0 * self.im[2],
            CrossingVariant::Reversed => 2.0 * (d[1] - d[2]) + 2.0 * self.im[1],
        }
    }

    /// Residuals of the three continuum identities and of the final equation.
    pub fn identity_residuals(&self) -> [f64; 4] {
        let split = self.variant.sign() * self.wilson_split;
        [
            self.center_limit() - (split + self.wilson),
            self.near_limit() - self.wilson,
            self.far_limit() - self.wilson,
            self.alternating - self.wilson_split,
        ]
    }

    pub fn max_fd_defect(&self) -> f64 {
        (0..4).map(|i| (self.derivatives[i] - self.derivatives_fd[i]).abs()).fold(0.0, f64::max)
    }

    pub fn max_im_defect(&self) -> f64 {
        (0..4).map(|i| (self.im[i] - self.im_quadrature[i]).abs()).fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CrossingRow {
    pub epsilon: f64,
    pub triples: usize,
    pub wilson: f64,
    pub wilson_split: f64,
    pub d_center: f64,
    pub d_near: f64,
    pub d_far: f64,
    /// Standard combination on the first compatible triple.
    pub combination: f64,
    pub gap: f64,
    /// Largest gap over every compatible triple of both kinds.
    pub max_triple_gap: f64,
    /// Largest spread of the combination across triples.
    pub triple_spread: f64,
    pub general: f64,
    pub general_gap: f64,
    pub gap_center: f64,
    pub gap_near: f64,
    pub gap_far: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CrossingReport {
    pub variant: CrossingVariant,
    pub areas: [f64; 4],
    pub general: Combination,
    pub continuum: CrossingContinuum,
    pub rows: Vec<CrossingRow>,
}

impl CrossingReport {
    pub fn column(&self, f: impl Fn(&CrossingRow) -> f64) -> Vec<f64> {
        self.rows.iter().map(f).collect()
    }
}

/// Evaluates the crossing combinations on the lattice figure eight. Gaps are
/// measured against `sign * (d1 - d2 + d3 - d4) E W`.
pub fn convergence_crossing(
    variant: CrossingVariant,
    areas: [f64; 4],
    eps_list: &[f64],
    general: Combination,
) -> Result<CrossingReport, EquationError> {
    let mut continuum: Option<CrossingContinuum> = None;
    let mut rows = Vec::new();
    for &eps in eps_list {
        let ll = make_lattice_approximation(variant.family(areas), eps)?;
        let al = ll.annotated.clone().ok_or(EquationError::Driver(DriverError::UnsupportedPattern))?;
        let mut be = ExactU1::new(eps)?;
        let s = LoopString::single(al.lp.clone());
        let wilson = be.expectation(&s)?;
        let (l1, l2) = al.lobes()?;
        let lobes = LoopString::new(vec![l1, l2]);
        let wilson_split = be.expectation(&lobes)?;
        if continuum.is_none() {
            let w = &ll.approx.windings;
            let faces = [(areas[0], w[0]), (areas[1], w[1]), (areas[2], w[2]), (areas[3], w[3])];
            let g = build_graph(&lobes, eps)?;
            let split_cont = u1_expectation_continuum(&g.area_windings());
            continuum = Some(CrossingContinuum::new(variant, faces, split_cont)?);
        }
        let cont = continuum.as_ref().ok_or(EquationError::Driver(DriverError::UnsupportedPattern))?;
        let alt = variant.sign() * cont.alternating;

        let mut memo: BTreeMap<usize, f64> = BTreeMap::new();
        let mut d_at = |x: usize, be: &mut ExactU1| -> Result<f64, EquationError> {
            if let Some(v) = memo.get(&x) {
                return Ok(*v);
            }
            let v = deformation_sum(&s, 0, x, eps, |st| Ok(be.expectation(st)?))?;
            memo.insert(x, v);
            Ok(v)
        };

        let triples = compatible_triples(&al);
        let mut first: Option<(f64, f64, f64, f64)> = None;
        let mut max_gap: f64 = 0.0;
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for tr in &triples {
            let dc = d_at(tr.center, &mut be)?;
            let dn = d_at(tr.near, &mut be)?;
            let df = d_at(tr.far, &mut be)?;
            let comb = dc - 0.5 * dn - 0.5 * df;
            max_gap = max_gap.max((comb - alt).abs());
            lo = lo.min(comb);
            hi = hi.max(comb);
            if first.is_none() && tr.kind == TripleKind::First {
                first = Some((dc, dn, df, comb));
            }
        }
        let (d_center, d_near, d_far, combination) =
            first.ok_or(EquationError::Driver(DriverError::UnsupportedPattern))?;

        let ann = &al.ann;
        let pick_first = |v: &Vec<usize>| v.first().copied();
        let pick_last = |v: &Vec<usize>| v.last().copied();
        let locs = [
            pick_first(&ann.e_first),
            pick_first(&ann.e_second),
            pick_first(&ann.e1),
            pick_first(&ann.e2),
            pick_last(&ann.e3_inv),
            pick_last(&ann.e4_inv),
        ];
        let mut d = [0.0; 6];
        for (i, l) in locs.iter().enumerate() {
            let x = l.ok_or(EquationError::Driver(DriverError::UnsupportedPattern))?;
            d[i] = d_at(x, &mut be)?;
        }
        let g = general;
        let gen = g.b[0] * d[0] + g.b[1] * d[1] - g.a[0] * wilson - g.a[1] * d[2] - g.a[2] * d[3] - g.a[3] * d[4] - g.a[4] * d[5];

        rows.push(CrossingRow {
            epsilon: eps,
            triples: triples.len(),
            wilson,
            wilson_split,
            d_center,
            d_near,
            d_far,
            combination,
            gap: (combination - alt).abs(),
            max_triple_gap: max_gap,
            triple_spread: hi - lo,
            general: gen,
            general_gap: (gen - alt).abs(),
            gap_center: (d_center - cont.center_limit()).abs(),
            gap_near: (d_near - cont.near_limit()).abs(),
            gap_far: (d_far - cont.far_limit()).abs(),
        });
    }
    let continuum = continuum.ok_or(EquationError::Driver(DriverError::Infeasible(String::from("empty eps list"))))?;
    Ok(CrossingReport { variant, areas, general, continuum, rows })
}

#[derive(Debug, Clone, PartialEq)]
pub struct MergerRow {
    pub epsilon: f64,
    pub wilson: f64,
    pub merged: f64,
    pub d_center: f64,
    pub combination: f64,
    pub gap: f64,
    pub general: f64,
    pub general_gap: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MergerReport {
    pub faces: [(f64, i32); 4],
    pub alternating: f64,
    pub merged_continuum: f64,
    pub rows: Vec<MergerRow>,
}

fn location_of(l: &Loop, b: Bond) -> Result<usize, EquationError> {
    l.occurrences(b)
        .iter()
        .find(|o| o.1)
        .map(|o| o.0)
        .ok_or(EquationError::Driver(DriverError::UnsupportedPattern))
}

/// Two loops sharing the crossing edge; `N = 1`.
pub fn convergence_merger(eps_list: &[f64], general: Combination) -> Result<MergerReport, EquationError> {
    let mut rows = Vec::new();
    let mut cont: Option<([(f64, i32); 4], f64, f64)> = None;
    for &eps in eps_list {
        let n = (1.0 / eps).round() as i32;
        let (s, witnesses) = merger_pair(n)?;
        let graph = build_graph(&s, eps)?;
        if cont.is_none() {
            let mut faces = [(0.0, 0); 4];
            for (i, c) in witnesses.iter().enumerate() {
                faces[i] = match graph.face_containing(*c) {
                    Some(f) => (graph.faces[f].area, graph.faces[f].winding),
                    None => (1.0, 0),
                };
            }
            let d: Vec<f64> = (0..4)
                .map(|i| area_derivative_u1(&faces, i, DerivativeMethod::Analytic))
                .collect::<Result<_, _>>()?;
            let alt = d[0] - d[1] + d[2] - d[3];
            cont = Some((faces, alt, 0.0));
        }
        let mut be = ExactU1::new(eps)?;
        let (l1, l2) = (&s.loops[0], &s.loops[1]);
        let center = Bond::new(0, -1, Dir::U);
        let xc1 = location_of(l1, center)?;
        let xc2 = location_of(l2, center)?;
        // The shared edge has two bonds; the near bond follows it.
        let next = |l: &Loop, x: usize| (x + 2) % l.len();
        let prev = |l: &Loop, x: usize| (x + l.len() - 1) % l.len();
        let (xn1, xf1) = (next(l1, xc1), prev(l1, xc1));
        let (xn2, xf2) = (next(l2, xc2), prev(l2, xc2));
        let mut d = |k: usize, x: usize| deformation_sum(&s, k, x, eps, |st| Ok(be.expectation(st)?));
        let dc1 = d(0, xc1)?;
        let dc2 = d(1, xc2)?;
        let dn1 = d(0, xn1)?;
        let dn2 = d(1, xn2)?;
        let df1 = d(0, xf1)?;
        let df2 = d(1, xf2)?;
        let wilson = be.expectation(&s)?;
        let merged_loop = merge_positive(l1, xc1, l2, xc2)?;
        let merged = be.expectation(&LoopString::single(merged_loop.clone()))?;
        let c = cont.as_mut().ok_or(EquationError::Driver(DriverError::UnsupportedPattern))?;
        if c.2 == 0.0 {
            c.2 = u1_expectation_continuum(&build_graph(&LoopString::single(merged_loop), eps)?.area_windings());
        }
        let alt = &c.1;
        let comb = dc1 - 0.5 * dn1 - 0.5 * df1;
        let g = general;
        let gen = g.b[0] * dc1 + g.b[1] * dc2 - g.a[0] * wilson - g.a[1] * dn1 - g.a[2] * dn2 - g.a[3] * df1 - g.a[4] * df2;
        rows.push(MergerRow {
            epsilon: eps,
            wilson,
            merged,
            d_center: dc1,
            combination: comb,
            gap: (comb - *alt).abs(),
            general: gen,
            general_gap: (gen - *alt).abs(),
        });
    }
    let (faces, alternating, merged_continuum) =
        cont.ok_or(EquationError::Driver(DriverError::Infeasible(String::from("empty eps list"))))?;
    Ok(MergerReport { faces, alternating, merged_continuum, rows })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DegenerateCase {
    ThreeFace,
    UnboundedFace,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DegenerateReport {
    pub case: DegenerateCase,
    /// `(t1, n), (t2, n2), (t3, n), (t4, n4)` after the auxiliary-edge surgery.
    pub faces: [(f64, i32); 4],
    pub t4_bounded: bool,
    pub merged_area: f64,
    pub wilson: f64,
    pub wilson_surgery: f64,
    pub wilson_split: f64,
    pub d_s: f64,
    pub d1: f64,
    pub d3: f64,
    pub d2: f64,
    pub d4: f64,
    /// `(2 d_s - d2 - d4) E W - E W_{l1} W_{l2}` (or without `d4`).
    pub identity: f64,
    /// `(d1 - d2 + d3 - d4) E W - E W_{l1} W_{l2}` on the refined graph.
    pub four_face_identity: f64,
}

/// Splits the cells of one face along extra walls; returns the component
/// containing `seed` and the rest.
pub fn split_face(graph: &PlanarLoopGraph, face: usize, walls: &[Bond], seed: (i32, i32)) -> (Vec<(i32, i32)>, Vec<(i32, i32)>) {
    let cells: BTreeSet<(i32, i32)> = graph.faces[face].cells.iter().copied().collect();
    let blocked: BTreeSet<Bond> = walls.iter().map(|b| b.positive().0).collect();
    let wall = |a: (i32, i32), b: (i32, i32)| -> bool {
        let bond = if a.0 == b.0 {
            Bond::new(a.0, a.1.max(b.1), Dir::R)
        } else {
            Bond::new(a.0.max(b.0), a.1, Dir::U)
        };
        blocked.contains(&bond) || graph.edges.binary_search(&bond).is_ok()
    };
    let mut seen = BTreeSet::new();
    let mut queue = VecDeque::new();
    seen.insert(seed);
    queue.push_back(seed);
    while let Some(c) = queue.pop_front() {
        for (dx, dy) in [(1, 0), (-1, 0), (0, 1), (0, -1)] {
            let nb = (c.0 + dx, c.1 + dy);
            if cells.contains(&nb) && !seen.contains(&nb) && !wall(c, nb) {
                seen.insert(nb);
                queue.push_back(nb);
            }
        }
    }
    let rest = cells.difference(&seen).copied().collect();
    (seen.into_iter().collect(), rest)
}

/// Auxiliary-edge surgery on the degenerate crossings, evaluated in the
/// continuum with `p_s = p_{t1} * p_{t3}`.
pub fn degenerate_checks(case: DegenerateCase, epsilon: f64) -> Result<DegenerateReport, EquationError> {
    let (lp, center, witnesses, walls, seed): (Loop, Bond, Vec<(i32, i32)>, Vec<Bond>, (i32, i32)) = match case {
        DegenerateCase::ThreeFace => {
            let (l, w) = three_face_loop()?;
            let walls = vec![Bond::new(3, 0, Dir::R), Bond::new(4, 0, Dir::R)];
            (l, Bond::new(0, -1, Dir::U), w.to_vec(), walls, (-1, 1))
        }
        DegenerateCase::UnboundedFace => {
            let (l, w) = unbounded_face_loop()?;
            let walls = vec![Bond::new(0, -4, Dir::U), Bond::new(0, -3, Dir::U)];
            (l, Bond::new(-1, 0, Dir::R), w.to_vec(), walls, (-1, -3))
        }
    };
    let s = LoopString::single(lp.clone());
    let graph = build_graph(&s, epsilon)?;
    let face_of = |c: (i32, i32)| graph.face_containing(c).ok_or(EquationError::Driver(DriverError::UnsupportedPattern));
    let (f2, merged, f4) = match case {
        DegenerateCase::ThreeFace => (face_of(witnesses[0])?, face_of(witnesses[2])?, Some(face_of(witnesses[1])?)),
        DegenerateCase::UnboundedFace => (face_of(witnesses[0])?, face_of(witnesses[1])?, None),
    };
    let (top, bottom) = split_face(&graph, merged, &walls, seed);
    if top.is_empty() || bottom.is_empty() {
        return Err(EquationError::Driver(DriverError::Infeasible(String::from("auxiliary edge does not split the face"))));
    }
    let e2 = epsilon * epsilon;
    let ns = graph.faces[merged].winding;
    let t1 = top.len() as f64 * e2;
    let t3 = bottom.len() as f64 * e2;
    let t2 = graph.faces[f2].area;
    let n2 = graph.faces[f2].winding;
    let (t4, n4) = match f4 {
        Some(f) => (graph.faces[f].area, graph.faces[f].winding),
        None => (1.0, 0),
    };
    // Other faces (none in these configurations) would multiply in unchanged.
    let faces = [(t1, ns), (t2, n2), (t3, ns), (t4, n4)];
    let wilson = u1_expectation_continuum(&graph.area_windings());
    let others: f64 = u1_expectation_continuum(&[(t2, n2), (t4, n4)]);
    let wilson_surgery = others * u1_split_face_factor(ns, t1, t3)?;

    let xs: Vec<usize> = lp.occurrences(center).iter().filter(|o| o.1).map(|o| o.0).collect();
    if xs.len() != 2 {
        return Err(EquationError::Driver(DriverError::UnsupportedPattern));
    }
    let (l1, l2) = split_positive(&lp, xs[0], xs[1])?;
    let split_graph = build_graph(&LoopString::new(vec![l1, l2]), epsilon)?;
    let wilson_split = u1_expectation_continuum(&split_graph.area_windings());

    let merged_faces = [(t1 + t3, ns), (t2, n2), (t4, n4)];
    let d_s = area_derivative_u1(&merged_faces, 0, DerivativeMethod::Analytic)?;
    let d1 = area_derivative_u1(&faces, 0, DerivativeMethod::Analytic)?;
    let d2 = area_derivative_u1(&faces, 1, DerivativeMethod::Analytic)?;
    let d3 = area_derivative_u1(&faces, 2, DerivativeMethod::Analytic)?;
    let d4 = if f4.is_some() { area_derivative_u1(&faces, 3, DerivativeMethod::Analytic)? } else { 0.0 };
    let identity = match case {
        DegenerateCase::ThreeFace => 2.0 * d_s - d2 - d4 - wilson_split,
        DegenerateCase::UnboundedFace => 2.0 * d_s - d2 - wilson_split,
    };
    Ok(DegenerateReport {
        case,
        faces,
        t4_bounded: f4.is_some(),
        merged_area: t1 + t3,
        wilson,
        wilson_surgery,
        wilson_split,
        d_s,
        d1,
        d3,
        d2,
        d4,
        identity,
        four_face_identity: d1 - d2 + d3 - d4 - wilson_split,
    })
}

/// Text summary used by reports.
pub fn describe_faces(faces: &[(f64, i32)]) -> String {
    let parts: Vec<String> = faces.iter().map(|(t, n)| format!("{t}:{n}")).collect();
    parts.join(" ")
}
