//! Exact Wilson-loop expectations through Driver's formula.
//!
//! Lattice loops are turned into planar graphs whose bounded faces carry a
//! plaquette count and a winding number. For U(1) the expectation factorizes
//! over faces; for every group a simple loop reduces to one area variable.

use alloc::collections::{BTreeMap, BTreeSet, VecDeque};
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;
use core::fmt;

#[cfg(not(test))]
#[allow(unused_imports)]
use num_traits::Float;

use crate::action::{
    char_coefficient, periodic_mean, second_moment, std_coefficient, u1_heat_kernel_wrapped,
    u1_heat_kernel_wrapped_derivative, ActionError, ActionParams, Irrep, QUAD_TOL,
};
use crate::group::{casimir_standard, GroupSpec};
use crate::loops::{push_run, AnnotatedLoop, Bond, Dir, Loop, LoopError, LoopString, Side};

#[derive(Debug, Clone, PartialEq)]
pub enum DriverError {
    Loop(LoopError),
    Action(ActionError),
    Nonabelian(GroupSpec),
    EmptyLoop,
    UnboundedFace(usize),
    NoSuchFace(usize),
    InconsistentWinding((i32, i32)),
    WindingTooLarge(i32),
    NotIntegral { t: f64, epsilon: f64 },
    Infeasible(String),
    UnsupportedPattern,
}

impl fmt::Display for DriverError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DriverError::Loop(e) => write!(f, "loop error: {e}"),
            DriverError::Action(e) => write!(f, "action error: {e}"),
            DriverError::Nonabelian(s) => write!(f, "exact face-product evaluation needs U(1), got {s}"),
            DriverError::EmptyLoop => write!(f, "empty loop"),
            DriverError::UnboundedFace(i) => write!(f, "face {i} is unbounded"),
            DriverError::NoSuchFace(i) => write!(f, "no face {i}"),
            DriverError::InconsistentWinding(c) => write!(f, "winding not constant on the face containing cell {c:?}"),
            DriverError::WindingTooLarge(n) => write!(f, "winding {n} exceeds the coefficient table"),
            DriverError::NotIntegral { t, epsilon } => write!(f, "t = {t} is not a multiple of eps^2 = {}", epsilon * epsilon),
            DriverError::Infeasible(s) => write!(f, "geometry infeasible: {s}"),
            DriverError::UnsupportedPattern => write!(f, "loop is not reducible to single-face integrals"),
        }
    }
}

impl From<LoopError> for DriverError {
    fn from(e: LoopError) -> Self {
        DriverError::Loop(e)
    }
}

impl From<ActionError> for DriverError {
    fn from(e: ActionError) -> Self {
        DriverError::Action(e)
    }
}

/// Winding number of every cell with non-zero winding, keyed by lower-left corner.
///
/// Uses the upward vertical ray from the cell centre: a leftward bond above
/// the cell counts `+1`, a rightward one `-1`.
pub fn winding_field(s: &LoopString) -> BTreeMap<(i32, i32), i32> {
    let mut columns: BTreeMap<i32, BTreeMap<i32, i32>> = BTreeMap::new();
    for l in &s.loops {
        for b in l.word() {
            match b.dir {
                Dir::R => *columns.entry(b.x).or_default().entry(b.y).or_default() -= 1,
                Dir::L => *columns.entry(b.x - 1).or_default().entry(b.y).or_default() += 1,
                _ => {}
            }
        }
    }
    let mut out = BTreeMap::new();
    for (x, col) in columns {
        let ys: Vec<(i32, i32)> = col.into_iter().rev().collect();
        let mut acc = 0;
        for i in 0..ys.len() {
            acc += ys[i].1;
            if acc != 0 && i + 1 < ys.len() {
                for yc in ys[i + 1].0..ys[i].0 {
                    out.insert((x, yc), acc);
                }
            }
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct Face {
    pub id: usize,
    pub cells: Vec<(i32, i32)>,
    pub plaquettes: u64,
    pub area: f64,
    pub winding: i32,
    /// Positively oriented bonds separating this face from its neighbours.
    pub boundary: Vec<Bond>,
}

/// Planar graph of a lattice loop or string.
#[derive(Debug, Clone, PartialEq)]
pub struct PlanarLoopGraph {
    pub epsilon: f64,
    pub vertices: Vec<(i32, i32)>,
    pub edges: Vec<Bond>,
    pub faces: Vec<Face>,
    pub components: usize,
}

impl PlanarLoopGraph {
    /// `V - E + F` with the unbounded face counted.
    pub fn euler_characteristic(&self) -> i64 {
        self.vertices.len() as i64 - self.edges.len() as i64 + self.faces.len() as i64 + 1
    }

    pub fn face_containing(&self, cell: (i32, i32)) -> Option<usize> {
        self.faces.iter().position(|f| f.cells.binary_search(&cell).is_ok())
    }

    /// `(area, winding)` of every bounded face.
    pub fn area_windings(&self) -> Vec<(f64, i32)> {
        self.faces.iter().map(|f| (f.area, f.winding)).collect()
    }

    /// JSON-like dump with keys `epsilon`, `vertices`, `edges`, `components`,
    /// `euler`, and `faces` (each with `id`, `plaquettes`, `area`, `winding`,
    /// `boundary`).
    pub fn dump(&self) -> String {
        let mut s = String::new();
        s.push_str("{\n");
        s.push_str(&format!("  \"epsilon\": {},\n", self.epsilon));
        s.push_str(&format!("  \"vertices\": {},\n", self.vertices.len()));
        s.push_str(&format!("  \"edges\": {},\n", self.edges.len()));
        s.push_str(&format!("  \"components\": {},\n", self.components));
        s.push_str(&format!("  \"euler\": {},\n", self.euler_characteristic()));
        s.push_str("  \"faces\": [\n");
        for (i, f) in self.faces.iter().enumerate() {
            let bnd: Vec<String> = f.boundary.iter().map(|b| format!("\"{},{}{}\"", b.x, b.y, b.dir.letter())).collect();
            s.push_str(&format!(
                "    {{\"id\": {}, \"plaquettes\": {}, \"area\": {}, \"winding\": {}, \"boundary\": [{}]}}{}\n",
                f.id,
                f.plaquettes,
                f.area,
                f.winding,
                bnd.join(", "),
                if i + 1 == self.faces.len() { "" } else { "," }
            ));
        }
        s.push_str("  ]\n}\n");
        s
    }
}

/// Faces by flood fill over unit cells, windings from [`winding_field`].
pub fn build_graph(s: &LoopString, epsilon: f64) -> Result<PlanarLoopGraph, DriverError> {
    let s = s.without_trivial();
    if s.is_empty() {
        return Err(DriverError::EmptyLoop);
    }
    let mut edges: BTreeSet<Bond> = BTreeSet::new();
    let mut vertices: BTreeSet<(i32, i32)> = BTreeSet::new();
    for l in &s.loops {
        for b in l.word() {
            edges.insert(b.positive().0);
            vertices.insert(b.start());
        }
    }
    let x0 = vertices.iter().map(|v| v.0).min().unwrap_or(0) - 1;
    let x1 = vertices.iter().map(|v| v.0).max().unwrap_or(0) + 1;
    let y0 = vertices.iter().map(|v| v.1).min().unwrap_or(0) - 1;
    let y1 = vertices.iter().map(|v| v.1).max().unwrap_or(0) + 1;
    let w = (x1 - x0) as usize;
    let h = (y1 - y0) as usize;
    let idx = |x: i32, y: i32| (x - x0) as usize * h + (y - y0) as usize;
    let mut label = vec![usize::MAX; w * h];
    let wall_between = |a: (i32, i32), b: (i32, i32)| -> bool {
        let bond = if a.0 == b.0 {
            Bond::new(a.0, a.1.max(b.1), Dir::R)
        } else {
            Bond::new(a.0.max(b.0), a.1, Dir::U)
        };
        edges.contains(&bond)
    };
    let mut regions: Vec<Vec<(i32, i32)>> = Vec::new();
    for x in x0..x1 {
        for y in y0..y1 {
            if label[idx(x, y)] != usize::MAX {
                continue;
            }
            let id = regions.len();
            let mut cells = Vec::new();
            let mut queue = VecDeque::new();
            label[idx(x, y)] = id;
            queue.push_back((x, y));
            while let Some(c) = queue.pop_front() {
                cells.push(c);
                for (dx, dy) in [(1, 0), (-1, 0), (0, 1), (0, -1)] {
                    let n = (c.0 + dx, c.1 + dy);
                    if n.0 < x0 || n.0 >= x1 || n.1 < y0 || n.1 >= y1 {
                        continue;
                    }
                    if label[idx(n.0, n.1)] != usize::MAX || wall_between(c, n) {
                        continue;
                    }
                    label[idx(n.0, n.1)] = id;
                    queue.push_back(n);
                }
            }
            cells.sort_unstable();
            regions.push(cells);
        }
    }
    // Region 0 contains the corner cell (x0, y0), which lies outside every loop.
    let windings = winding_field(&s);
    let mut faces = Vec::new();
    for cells in regions.into_iter().skip(1) {
        let wind = windings.get(&cells[0]).copied().unwrap_or(0);
        for c in &cells {
            if windings.get(c).copied().unwrap_or(0) != wind {
                return Err(DriverError::InconsistentWinding(*c));
            }
        }
        let mut boundary = BTreeSet::new();
        for &(cx, cy) in &cells {
            for b in [
                Bond::new(cx, cy, Dir::R),
                Bond::new(cx, cy + 1, Dir::R),
                Bond::new(cx, cy, Dir::U),
                Bond::new(cx + 1, cy, Dir::U),
            ] {
                if edges.contains(&b) {
                    boundary.insert(b);
                }
            }
        }
        let plaquettes = cells.len() as u64;
        faces.push(Face {
            id: faces.len(),
            cells,
            plaquettes,
            area: plaquettes as f64 * epsilon * epsilon,
            winding: wind,
            boundary: boundary.into_iter().collect(),
        });
    }
    let components = count_components(&vertices, &edges);
    Ok(PlanarLoopGraph {
        epsilon,
        vertices: vertices.into_iter().collect(),
        edges: edges.into_iter().collect(),
        faces,
        components,
    })
}

fn count_components(vertices: &BTreeSet<(i32, i32)>, edges: &BTreeSet<Bond>) -> usize {
    let mut adj: BTreeMap<(i32, i32), Vec<(i32, i32)>> = BTreeMap::new();
    for e in edges {
        adj.entry(e.start()).or_default().push(e.end());
        adj.entry(e.end()).or_default().push(e.start());
    }
    let mut seen: BTreeSet<(i32, i32)> = BTreeSet::new();
    let mut count = 0;
    for v in vertices {
        if seen.contains(v) {
            continue;
        }
        count += 1;
        let mut stack = vec![*v];
        seen.insert(*v);
        while let Some(u) = stack.pop() {
            for n in adj.get(&u).map(|a| a.as_slice()).unwrap_or(&[]) {
                if seen.insert(*n) {
                    stack.push(*n);
                }
            }
        }
    }
    count
}

/// U(1) character coefficients `a_n(eps)` for `0 <= n <= max_n`.
#[derive(Debug, Clone, PartialEq)]
pub struct U1Table {
    pub epsilon: f64,
    coeffs: Vec<f64>,
}

impl U1Table {
    pub fn new(epsilon: f64, max_n: u32) -> Result<Self, DriverError> {
        let params = ActionParams::new(GroupSpec::u1(), epsilon)?;
        let coeffs = (0..=max_n as i32)
            .map(|n| char_coefficient(Irrep::U1(n), &params))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(U1Table { epsilon, coeffs })
    }

    pub fn coeff(&self, n: i32) -> Result<f64, DriverError> {
        self.coeffs.get(n.unsigned_abs() as usize).copied().ok_or(DriverError::WindingTooLarge(n))
    }

    pub fn max_n(&self) -> u32 {
        self.coeffs.len() as u32 - 1
    }
}

/// `prod over cells of a_{n(cell)}(eps)` for a U(1) string.
pub fn u1_expectation_string(s: &LoopString, table: &U1Table) -> Result<f64, DriverError> {
    let mut log = 0.0;
    for (_, n) in winding_field(s) {
        log += table.coeff(n)?.ln();
    }
    Ok(log.exp())
}

/// `prod_F a_{n_F}(eps)^{t_F / eps^2}`.
pub fn u1_expectation_discrete(graph: &PlanarLoopGraph, table: &U1Table) -> Result<f64, DriverError> {
    let mut log = 0.0;
    for f in &graph.faces {
        log += f.plaquettes as f64 * table.coeff(f.winding)?.ln();
    }
    Ok(log.exp())
}

/// `prod_F exp(-n_F^2 t_F / 2)` over `(area, winding)` pairs.
pub fn u1_expectation_continuum(faces: &[(f64, i32)]) -> f64 {
    let s: f64 = faces.iter().map(|&(t, n)| (n * n) as f64 * t).sum();
    (-s / 2.0).exp()
}

/// How to evaluate an expectation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Eval {
    Discrete(f64),
    Continuum,
}

/// Number of plaquettes `t / eps^2`, required to be an integer.
pub fn plaquette_count(t: f64, epsilon: f64) -> Result<u64, DriverError> {
    let k = t / (epsilon * epsilon);
    let r = k.round();
    if (k - r).abs() > 1e-9 * k.max(1.0) || r < 0.0 {
        return Err(DriverError::NotIntegral { t, epsilon });
    }
    Ok(r as u64)
}

/// Expectation of a simple loop of area `t`.
pub fn simple_loop_expectation(spec: GroupSpec, t: f64, eval: Eval) -> Result<f64, DriverError> {
    match eval {
        Eval::Continuum => Ok((casimir_standard(spec) * t / 2.0).exp()),
        Eval::Discrete(eps) => {
            let k = plaquette_count(t, eps)?;
            let a = std_coefficient(&ActionParams::new(spec, eps)?)?;
            Ok(a.powi(k as i32))
        }
    }
}

/// Single-face integrals for loops whose winding field is one of: a simple
/// region of winding `+-1`; a region of winding `+-1` with one cell of winding
/// `+-2` inside it; two regions of opposite winding (a figure eight).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SingleFaceValues {
    pub a_std: f64,
    pub m2: f64,
}

impl SingleFaceValues {
    pub fn new(params: &ActionParams) -> Result<Self, DriverError> {
        Ok(SingleFaceValues { a_std: std_coefficient(params)?, m2: second_moment(params)? })
    }
}

pub fn single_face_expectation(l: &Loop, v: &SingleFaceValues) -> Result<f64, DriverError> {
    if l.is_trivial() {
        return Ok(1.0);
    }
    let field = winding_field(&LoopString::single(l.clone()));
    let mut count = [0u64; 5];
    for n in field.values() {
        if n.unsigned_abs() > 2 {
            return Err(DriverError::UnsupportedPattern);
        }
        count[(n + 2) as usize] += 1;
    }
    let (m2n, m1n, p1, p2) = (count[0], count[1], count[3], count[4]);
    let perimeter = l.len() as u64;
    let a = v.a_std;
    let single_region = |cells: u64| cells > 0 && is_simple_boundary(l);
    if p2 + m2n == 0 && (p1 == 0 || m1n == 0) && single_region(p1 + m1n) {
        return Ok(a.powi((p1 + m1n) as i32));
    }
    if (p2 == 1 && m1n == 0 && m2n == 0) || (m2n == 1 && p1 == 0 && p2 == 0) {
        // One doubly wound cell inside a simple region: the loop traverses one
        // plaquette twice, so W = tr(h g^2) with h, g independent.
        let rest = p1 + m1n;
        if perimeter == 4 + boundary_length(&field) {
            return Ok(a.powi(rest as i32) * v.m2);
        }
        return Err(DriverError::UnsupportedPattern);
    }
    let len = l.len() as u64;
    let blen = boundary_length(&field);
    if p2 + m2n == 0 && p1 > 0 && m1n > 0 && (len == blen || len == blen + 2) {
        // Two lobes of opposite orientation.
        return Ok(a.powi((p1 + m1n) as i32));
    }
    Err(DriverError::UnsupportedPattern)
}

fn is_simple_boundary(l: &Loop) -> bool {
    let mut seen = BTreeSet::new();
    l.word().iter().all(|b| seen.insert(b.start()))
}

fn boundary_length(field: &BTreeMap<(i32, i32), i32>) -> u64 {
    let mut len = 0;
    for &(x, y) in field.keys() {
        for n in [(x + 1, y), (x - 1, y), (x, y + 1), (x, y - 1)] {
            if !field.contains_key(&n) {
                len += 1;
            }
        }
    }
    len
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DerivativeMethod {
    Analytic,
    FiniteDifference,
}

/// Central difference of `f` in coordinate `i` with step `1e-4 * t_i`.
pub fn finite_difference<F: Fn(&[f64]) -> f64>(f: F, areas: &[f64], i: usize) -> f64 {
    let h = 1e-4 * areas[i];
    let mut up = areas.to_vec();
    let mut dn = areas.to_vec();
    up[i] += h;
    dn[i] -= h;
    (f(&up) - f(&dn)) / (2.0 * h)
}

/// `d/dt_i` of the continuum U(1) expectation.
pub fn area_derivative_u1(faces: &[(f64, i32)], i: usize, method: DerivativeMethod) -> Result<f64, DriverError> {
    let &(_, n) = faces.get(i).ok_or(DriverError::NoSuchFace(i))?;
    match method {
        DerivativeMethod::Analytic => Ok(-((n * n) as f64) / 2.0 * u1_expectation_continuum(faces)),
        DerivativeMethod::FiniteDifference => {
            let areas: Vec<f64> = faces.iter().map(|f| f.0).collect();
            let wind: Vec<i32> = faces.iter().map(|f| f.1).collect();
            Ok(finite_difference(
                |a| {
                    let v: Vec<(f64, i32)> = a.iter().copied().zip(wind.iter().copied()).collect();
                    u1_expectation_continuum(&v)
                },
                &areas,
                i,
            ))
        }
    }
}

/// Continuum area derivative of a simple loop, `c_std/2 exp(c_std t/2)`.
pub fn simple_loop_area_derivative(spec: GroupSpec, t: f64, method: DerivativeMethod) -> f64 {
    match method {
        DerivativeMethod::Analytic => {
            let c = casimir_standard(spec);
            c / 2.0 * (c * t / 2.0).exp()
        }
        DerivativeMethod::FiniteDifference => finite_difference(
            |a| simple_loop_expectation(spec, a[0], Eval::Continuum).unwrap_or(f64::NAN),
            &[t],
            0,
        ),
    }
}

/// Sign with which the variable `b_m` enters the loop trace times the sign
/// with which it enters the holonomy of face `m`.
const IM_SIGNS: [f64; 4] = [1.0, 1.0, -1.0, -1.0];

/// The correction integral `I_m` (`m` in `1..=4`) for U(1) crossing faces
/// `(t_k, n_k)`, by Fourier reduction: `I_m = s_m n_m E W`.
pub fn correction_term_im(faces: &[(f64, i32); 4], m: usize) -> Result<f64, DriverError> {
    if !(1..=4).contains(&m) {
        return Err(DriverError::NoSuchFace(m));
    }
    Ok(IM_SIGNS[m - 1] * faces[m - 1].1 as f64 * u1_expectation_continuum(faces))
}

/// Same integral by 1D quadrature of each face factor against the wrapped
/// Gaussian heat kernel, with the derivative falling on face `m`.
pub fn correction_term_im_quadrature(faces: &[(f64, i32); 4], m: usize) -> Result<f64, DriverError> {
    if !(1..=4).contains(&m) {
        return Err(DriverError::NoSuchFace(m));
    }
    let mut prod = 1.0;
    for (k, &(t, n)) in faces.iter().enumerate() {
        let nf = n as f64;
        let v = if k + 1 == m {
            // Re[ i int e^{i n phi} p_t'(phi) ] = -int sin(n phi) p_t'(phi)
            -periodic_mean(|p| (nf * p).sin() * u1_heat_kernel_wrapped_derivative(wrap(p), t), QUAD_TOL)?
        } else {
            periodic_mean(|p| (nf * p).cos() * u1_heat_kernel_wrapped(wrap(p), t), QUAD_TOL)?
        };
        prod *= v;
    }
    Ok(IM_SIGNS[m - 1] * prod)
}

fn wrap(p: f64) -> f64 {
    if p > PI {
        p - 2.0 * PI
    } else {
        p
    }
}

/// Face holonomy expectation `int e^{i n phi} (p_{t1} * p_{t3})(phi)` by
/// nested quadrature of the convolution.
pub fn u1_split_face_factor(n: i32, t1: f64, t3: f64) -> Result<f64, DriverError> {
    let nf = n as f64;
    let conv = |phi: f64| -> f64 {
        periodic_mean(|psi| u1_heat_kernel_wrapped(wrap(psi), t1) * u1_heat_kernel_wrapped(phi - psi, t3), 1e-12)
            .unwrap_or(f64::NAN)
    };
    Ok(periodic_mean(|phi| (nf * phi).cos() * conv(phi), 1e-10)?)
}

/// Axis-aligned rectangle `[x, x+w] x [y, y+h]`, counter-clockwise from `(x, y)`.
pub fn rectangle_path(x: i32, y: i32, w: i32, h: i32) -> Vec<Bond> {
    let mut path = Vec::new();
    let mut pos = (x, y);
    push_run(&mut path, &mut pos, Dir::R, w);
    push_run(&mut path, &mut pos, Dir::U, h);
    push_run(&mut path, &mut pos, Dir::L, w);
    push_run(&mut path, &mut pos, Dir::D, h);
    path
}

/// Integer side lengths of the crossing loop, in lattice units.
///
/// The tiny edge runs from `(0,-1)` to `(0,1)`. Face `F1` is the
/// `x1 x h1` box above it to the west, `F3` the `x3 x h3` box below it to the
/// east; `F2` and `F4` are the rest of the two lobes, trimmed by corner cuts
/// of one row and `cut_a`, `cut_b` cells.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FigureEightGeometry {
    pub n: i32,
    pub x1: i32,
    pub h1: i32,
    pub x3: i32,
    pub h3: i32,
    pub xa: i32,
    pub ya: i32,
    pub cut_a: i32,
    pub xb: i32,
    pub yb: i32,
    pub cut_b: i32,
    /// Crossing edge traversed as `e` then `e^-1`; `F1` and `F3` then border it.
    pub reversed: bool,
}

/// Raw segments of a crossing loop `e e1 A e4^-1 e e2 B e3^-1`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CrossingSegments {
    pub e: Vec<Bond>,
    pub e1: Vec<Bond>,
    pub a: Vec<Bond>,
    pub e4_inv: Vec<Bond>,
    pub e2: Vec<Bond>,
    pub b: Vec<Bond>,
    pub e3_inv: Vec<Bond>,
}

impl CrossingSegments {
    pub fn annotated(&self) -> Result<AnnotatedLoop, DriverError> {
        Ok(AnnotatedLoop::from_segments(&self.e, &self.e1, &self.a, &self.e4_inv, &self.e2, &self.b, &self.e3_inv)?)
    }

    pub fn annotated_reversed(&self) -> Result<AnnotatedLoop, DriverError> {
        Ok(AnnotatedLoop::from_segments_reversed(&self.e, &self.e1, &self.a, &self.e4_inv, &self.e2, &self.b, &self.e3_inv)?)
    }
}

fn divisor_pair(cells: i64) -> Option<(i32, i32)> {
    if cells <= 0 {
        return None;
    }
    let mut best = None;
    let mut d = 1;
    while d * d <= cells {
        if cells % d == 0 {
            best = Some(((cells / d) as i32, d as i32));
        }
        d += 1;
    }
    best
}

/// Near-square `(x, h)` with `x (h + off) = cells` and `h >= 1`.
fn offset_pair(cells: i64, off: i64) -> Option<(i32, i32)> {
    let mut best: Option<(i64, i32, i32)> = None;
    for x in 1..=cells {
        if cells % x != 0 || cells / x - off < 1 {
            continue;
        }
        let h = cells / x - off;
        let score = (x - h).abs();
        if best.is_none_or(|b| score < b.0) {
            best = Some((score, x as i32, h as i32));
        }
    }
    best.map(|b| (b.1, b.2))
}

fn cells_of(t: f64, n: i32) -> Result<i64, DriverError> {
    let k = t * (n as f64) * (n as f64);
    let r = k.round();
    if (k - r).abs() > 1e-9 * k.max(1.0) {
        return Err(DriverError::Infeasible(format!("area {t} is not a multiple of 1/{}", n * n)));
    }
    Ok(r as i64)
}

impl FigureEightGeometry {
    /// Face plaquette counts `(F1, F2, F3, F4)`.
    pub fn cells(&self) -> [i64; 4] {
        let (x1, h1, x3, h3) = (self.x1 as i64, self.h1 as i64, self.x3 as i64, self.h3 as i64);
        let (xa, ya, xb, yb) = (self.xa as i64, self.ya as i64, self.xb as i64, self.yb as i64);
        let f2 = (xa + x3) * (ya + 1 + h1) - x3 * (2 + h1) - x1 * h1 - x3 * h3 - self.cut_a as i64;
        let f4 = (x1 + xb) * (yb + 1 + h3) - x1 * (2 + h3) - x1 * h1 - x3 * h3 - self.cut_b as i64;
        if self.reversed {
            [x1 * (h1 + 2), f2 - 2 * x1, x3 * (h3 + 2), f4 - 2 * x3]
        } else {
            [x1 * h1, f2, x3 * h3, f4]
        }
    }

    pub fn areas(&self) -> [f64; 4] {
        let e2 = 1.0 / (self.n as f64 * self.n as f64);
        self.cells().map(|c| c as f64 * e2)
    }

    /// Integer geometry realizing the areas exactly at `eps = 1/n`.
    pub fn search(t: [f64; 4], n: i32) -> Result<Self, DriverError> {
        Self::search_with(t, n, false)
    }

    pub fn search_with(t: [f64; 4], n: i32, reversed: bool) -> Result<Self, DriverError> {
        let c = [cells_of(t[0], n)?, cells_of(t[1], n)?, cells_of(t[2], n)?, cells_of(t[3], n)?];
        let pair = |cells: i64| if reversed { offset_pair(cells, 2) } else { divisor_pair(cells) };
        let (x1, h1) = pair(c[0]).ok_or_else(|| DriverError::Infeasible(format!("F1 = {} cells at n = {n}", c[0])))?;
        let (x3, h3) = pair(c[2]).ok_or_else(|| DriverError::Infeasible(format!("F3 = {} cells at n = {n}", c[2])))?;
        let (extra_a, extra_b) = if reversed { (2 * x1 as i64, 2 * x3 as i64) } else { (0, 0) };
        let inner = x1 as i64 * h1 as i64 + x3 as i64 * h3 as i64;
        let (xa, ya, cut_a) = Self::fit_lobe(c[1] + extra_a, x3, 2 + h1, inner, x1 + 1, h3 + 2, 1 + h1)
            .ok_or_else(|| DriverError::Infeasible(format!("F2 = {} cells at n = {n}", c[1])))?;
        let (xb, yb, cut_b) = Self::fit_lobe(c[3] + extra_b, x1, 2 + h3, inner, x3 + 1, h1 + 2, 1 + h3)
            .ok_or_else(|| DriverError::Infeasible(format!("F4 = {} cells at n = {n}", c[3])))?;
        Ok(FigureEightGeometry { n, x1, h1, x3, h3, xa, ya, cut_a, xb, yb, cut_b, reversed })
    }

    /// Smallest near-square `(X, Y, cut)` with
    /// `(X + other)(Y + offset) - other * notch - inner - cut = target`.
    fn fit_lobe(target: i64, other: i32, notch: i32, inner: i64, x_min: i32, y_min: i32, offset: i32) -> Option<(i32, i32, i32)> {
        let mut best: Option<(i64, i32, i32, i32)> = None;
        let limit = 4 * (target as f64).sqrt() as i32 + 8 + x_min + y_min;
        for x in x_min..=limit {
            for y in y_min..=limit {
                let base = (x + other) as i64 * (y + offset) as i64 - other as i64 * notch as i64 - inner;
                let cut = base - target;
                if cut < 0 || cut >= x as i64 {
                    continue;
                }
                let score = ((x + other) - (y + offset)).abs() as i64 * 4 + cut;
                if best.is_none_or(|b| score < b.0) {
                    best = Some((score, x, y, cut as i32));
                }
            }
        }
        best.map(|b| (b.1, b.2, b.3))
    }

    pub fn segments(&self) -> CrossingSegments {
        let g = self;
        let c1 = (-g.x1, 1 + g.h1);
        let c2 = (g.x3, -1 - g.h3);
        let mut e = Vec::new();
        push_run(&mut e, &mut (0, -1), Dir::U, 2);

        let mut e1 = Vec::new();
        let mut pos = (0, 1);
        push_run(&mut e1, &mut pos, Dir::U, g.h1);
        push_run(&mut e1, &mut pos, Dir::L, g.x1);

        let mut e2 = Vec::new();
        if g.reversed {
            let mut pos = (0, -1);
            push_run(&mut e2, &mut pos, Dir::L, g.x1);
            push_run(&mut e2, &mut pos, Dir::U, g.h1 + 2);
        } else {
            let mut pos = (0, 1);
            push_run(&mut e2, &mut pos, Dir::L, g.x1);
            push_run(&mut e2, &mut pos, Dir::U, g.h1);
        }

        let mut a = Vec::new();
        let mut pos = c1;
        push_run(&mut a, &mut pos, Dir::L, g.xa - g.x1);
        if g.cut_a > 0 {
            push_run(&mut a, &mut pos, Dir::D, c1.1 + g.ya - 1);
            push_run(&mut a, &mut pos, Dir::R, g.cut_a);
            push_run(&mut a, &mut pos, Dir::D, 1);
        } else {
            push_run(&mut a, &mut pos, Dir::D, c1.1 + g.ya);
        }
        let k = g.x3 - pos.0;
        push_run(&mut a, &mut pos, Dir::R, k);
        let k = c2.1 - pos.1;
        push_run(&mut a, &mut pos, Dir::U, k);

        let mut e4_inv = Vec::new();
        let mut pos = c2;
        push_run(&mut e4_inv, &mut pos, Dir::U, if g.reversed { g.h3 + 2 } else { g.h3 });
        push_run(&mut e4_inv, &mut pos, Dir::L, g.x3);

        let mut b = Vec::new();
        let mut pos = c1;
        push_run(&mut b, &mut pos, Dir::U, g.yb - c1.1);
        if g.cut_b > 0 {
            let k = g.xb - g.cut_b - pos.0;
            push_run(&mut b, &mut pos, Dir::R, k);
            push_run(&mut b, &mut pos, Dir::D, 1);
            push_run(&mut b, &mut pos, Dir::R, g.cut_b);
        } else {
            let k = g.xb - pos.0;
            push_run(&mut b, &mut pos, Dir::R, k);
        }
        let k = pos.1 - c2.1;
        push_run(&mut b, &mut pos, Dir::D, k);
        let k = pos.0 - c2.0;
        push_run(&mut b, &mut pos, Dir::L, k);

        let mut e3_inv = Vec::new();
        let mut pos = c2;
        push_run(&mut e3_inv, &mut pos, Dir::L, g.x3);
        push_run(&mut e3_inv, &mut pos, Dir::U, g.h3);

        CrossingSegments { e, e1, a, e4_inv, e2, b, e3_inv }
    }

    /// Cells known to lie in `F1..F4`.
    pub fn witness_cells(&self) -> [(i32, i32); 4] {
        if self.reversed {
            [(-1, 0), (-self.x1 - 1, 0), (0, 0), (self.x3, 0)]
        } else {
            [(-1, 1), (-1, 0), (0, -2), (0, 0)]
        }
    }
}

/// Continuum family of a lattice approximation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LoopFamily {
    Rectangle { t: f64 },
    FigureEight { t: [f64; 4] },
    /// Figure eight whose crossing edge is traversed as `e` and `e^-1`.
    FigureEightReversed { t: [f64; 4] },
}

/// Correspondence between continuum faces and lattice faces.
#[derive(Debug, Clone, PartialEq)]
pub struct LatticeApproximation {
    pub epsilon: f64,
    pub target_areas: Vec<f64>,
    pub lattice_areas: Vec<f64>,
    /// `j_eps`: continuum face `i` to graph face id.
    pub face_map: Vec<usize>,
    pub windings: Vec<i32>,
    /// Number of bonds in the crossing edge (zero for simple loops).
    pub crossing_bonds: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LatticeLoop {
    pub lp: Loop,
    pub annotated: Option<AnnotatedLoop>,
    pub segments: Option<CrossingSegments>,
    pub graph: PlanarLoopGraph,
    pub approx: LatticeApproximation,
}

pub fn make_lattice_approximation(family: LoopFamily, epsilon: f64) -> Result<LatticeLoop, DriverError> {
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(DriverError::Infeasible(format!("eps = {epsilon}")));
    }
    let inverse = || {
        let n = (1.0 / epsilon).round() as i32;
        if ((1.0 / epsilon) - n as f64).abs() > 1e-9 || n < 1 {
            return Err(DriverError::Infeasible(format!("1/eps = {} is not an integer", 1.0 / epsilon)));
        }
        Ok(n)
    };
    match family {
        LoopFamily::Rectangle { t } => {
            let side = t.sqrt() / epsilon;
            let m = side.round() as i32;
            if m < 1 || (side - m as f64).abs() > 1e-9 {
                return Err(DriverError::Infeasible(format!("square of area {t} at eps = {epsilon}")));
            }
            let lp = Loop::make_loop(&rectangle_path(0, 0, m, m))?;
            let graph = build_graph(&LoopString::single(lp.clone()), epsilon)?;
            let approx = LatticeApproximation {
                epsilon,
                target_areas: vec![t],
                lattice_areas: vec![graph.faces[0].area],
                face_map: vec![0],
                windings: vec![graph.faces[0].winding],
                crossing_bonds: 0,
            };
            Ok(LatticeLoop { lp, annotated: None, segments: None, graph, approx })
        }
        LoopFamily::FigureEight { t } => {
            let geom = FigureEightGeometry::search(t, inverse()?)?;
            figure_eight_from_geometry(&geom, t.to_vec())
        }
        LoopFamily::FigureEightReversed { t } => {
            let geom = FigureEightGeometry::search_with(t, inverse()?, true)?;
            figure_eight_from_geometry(&geom, t.to_vec())
        }
    }
}

pub fn figure_eight_from_geometry(geom: &FigureEightGeometry, target: Vec<f64>) -> Result<LatticeLoop, DriverError> {
    let epsilon = 1.0 / geom.n as f64;
    let segments = geom.segments();
    let annotated = if geom.reversed { segments.annotated_reversed()? } else { segments.annotated()? };
    let lp = annotated.lp.clone();
    let graph = build_graph(&LoopString::single(lp.clone()), epsilon)?;
    let mut face_map = Vec::with_capacity(4);
    for cell in geom.witness_cells() {
        face_map.push(graph.face_containing(cell).ok_or_else(|| DriverError::Infeasible(format!("no face at {cell:?}")))?);
    }
    let lattice_areas = face_map.iter().map(|&i| graph.faces[i].area).collect();
    let windings = face_map.iter().map(|&i| graph.faces[i].winding).collect();
    let approx = LatticeApproximation {
        epsilon,
        target_areas: target,
        lattice_areas,
        face_map,
        windings,
        crossing_bonds: segments.e.len(),
    };
    Ok(LatticeLoop { lp, annotated: Some(annotated), segments: Some(segments), graph, approx })
}

/// Two counter-clockwise loops sharing the vertical segment from `(0,-1)` to
/// `(0,1)`, traversed upward by both. `n` must be even and at least 4.
///
/// Returns the string and the face witnesses `F1..F4` around the crossing
/// (the last one is the unbounded face).
pub fn merger_pair(n: i32) -> Result<(LoopString, [(i32, i32); 4]), DriverError> {
    if n < 4 || n % 2 != 0 {
        return Err(DriverError::Infeasible(format!("merger family needs even n >= 4, got {n}")));
    }
    let h = n / 2;
    let l1 = Loop::make_loop(&rectangle_path(-n, -h + 1, n, n))?;
    let mut p = Vec::new();
    let mut pos = (-h, -n);
    push_run(&mut p, &mut pos, Dir::R, n);
    push_run(&mut p, &mut pos, Dir::U, n - 1);
    push_run(&mut p, &mut pos, Dir::L, h);
    push_run(&mut p, &mut pos, Dir::U, 2);
    push_run(&mut p, &mut pos, Dir::L, h);
    push_run(&mut p, &mut pos, Dir::D, n + 1);
    let l2 = Loop::make_loop(&p)?;
    Ok((LoopString::new(vec![l1, l2]), [(-1, 1), (-1, 0), (0, -2), (0, 0)]))
}

/// A crossing whose vertex touches only three faces: an outer loop with an
/// inner bigon and a clockwise lobe. Faces: bigon `F2`, lobe `F4`, and the
/// merged face that the auxiliary edge splits into `F1` and `F3`.
pub fn three_face_loop() -> Result<(Loop, [(i32, i32); 3]), DriverError> {
    let mut p = Vec::new();
    let mut pos = (0, -1);
    push_run(&mut p, &mut pos, Dir::U, 2);
    push_run(&mut p, &mut pos, Dir::R, 3);
    push_run(&mut p, &mut pos, Dir::D, 2);
    push_run(&mut p, &mut pos, Dir::L, 3);
    push_run(&mut p, &mut pos, Dir::U, 2);
    push_run(&mut p, &mut pos, Dir::L, 5);
    push_run(&mut p, &mut pos, Dir::D, 5);
    push_run(&mut p, &mut pos, Dir::R, 10);
    push_run(&mut p, &mut pos, Dir::U, 8);
    push_run(&mut p, &mut pos, Dir::L, 8);
    push_run(&mut p, &mut pos, Dir::D, 5);
    push_run(&mut p, &mut pos, Dir::R, 3);
    let lp = Loop::make_loop(&p)?;
    // bigon, lobe, merged
    Ok((lp, [(-1, 0), (0, 0), (-4, 0)]))
}

/// A crossing with an unbounded adjacent face: a teardrop below the tiny
/// horizontal edge and an outer loop around it. Faces: teardrop `F2`, merged
/// `F1 u F3`; `F4` is unbounded.
pub fn unbounded_face_loop() -> Result<(Loop, [(i32, i32); 2]), DriverError> {
    let mut p = Vec::new();
    let mut pos = (-1, 0);
    push_run(&mut p, &mut pos, Dir::R, 2);
    push_run(&mut p, &mut pos, Dir::D, 2);
    push_run(&mut p, &mut pos, Dir::L, 2);
    push_run(&mut p, &mut pos, Dir::U, 2);
    push_run(&mut p, &mut pos, Dir::R, 2);
    push_run(&mut p, &mut pos, Dir::R, 2);
    push_run(&mut p, &mut pos, Dir::D, 4);
    push_run(&mut p, &mut pos, Dir::L, 6);
    push_run(&mut p, &mut pos, Dir::U, 4);
    push_run(&mut p, &mut pos, Dir::R, 2);
    let lp = Loop::make_loop(&p)?;
    Ok((lp, [(0, -1), (-2, -1)]))
}

/// Cell on the given side of a bond of a loop, and whether it is inside
/// (non-zero winding).
pub fn side_is_inside(l: &Loop, e: Bond, side: Side) -> bool {
    let field = winding_field(&LoopString::single(l.clone()));
    field.contains_key(&e.cell(side))
}
