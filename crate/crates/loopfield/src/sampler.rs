//! Finite-box lattice configurations, local updates and Wilson-loop
//! observables.

use std::sync::Arc;

use loopfield_core::action::ActionParams;
use loopfield_core::group::{exp_map, gaussian_lie_sample, haar_sample, GroupElement, GroupSpec, Mat, C64};
use loopfield_core::loops::{Bond, Dir, Loop, LoopString, Plaquette};
use rand::Rng;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SamplerError {
    #[error("bond {0:?} is outside the box")]
    BondOutside(Bond),
    #[error("loop leaves the box: {0}")]
    LoopOutside(String),
    #[error("box must have positive width and height")]
    EmptyBox,
    #[error("element has the wrong size for {0}")]
    Shape(GroupSpec),
}

/// A reference to a positively oriented bond and whether it is traversed
/// backwards.
pub type Step = (usize, bool);

/// Rectangle of vertices `[x0, x0 + width] x [y0, y0 + height]` in lattice
/// units.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LatticeBox {
    pub x0: i32,
    pub y0: i32,
    pub width: usize,
    pub height: usize,
}

impl LatticeBox {
    pub fn new(x0: i32, y0: i32, width: usize, height: usize) -> Result<Self, SamplerError> {
        if width == 0 || height == 0 {
            return Err(SamplerError::EmptyBox);
        }
        Ok(LatticeBox { x0, y0, width, height })
    }

    /// Smallest box keeping every loop at least `max(4, diameter)` cells from
    /// the boundary, where the diameter is taken over `subject`.
    pub fn around<'a>(subject: impl IntoIterator<Item = &'a Loop>, all: impl IntoIterator<Item = &'a Loop>) -> Result<Self, SamplerError> {
        let mut diameter = 0;
        for l in subject {
            if let Some((x0, y0, x1, y1)) = l.bounding_box() {
                diameter = diameter.max(x1 - x0).max(y1 - y0);
            }
        }
        let margin = diameter.max(4);
        let mut bb: Option<(i32, i32, i32, i32)> = None;
        for l in all {
            if let Some((x0, y0, x1, y1)) = l.bounding_box() {
                bb = Some(match bb {
                    None => (x0, y0, x1, y1),
                    Some((a, b, c, d)) => (a.min(x0), b.min(y0), c.max(x1), d.max(y1)),
                });
            }
        }
        let (x0, y0, x1, y1) = bb.unwrap_or((0, 0, 1, 1));
        Self::new(x0 - margin, y0 - margin, (x1 - x0 + 2 * margin) as usize, (y1 - y0 + 2 * margin) as usize)
    }

    pub fn single_plaquette() -> Self {
        LatticeBox { x0: 0, y0: 0, width: 1, height: 1 }
    }

    pub fn n_vertices(&self) -> usize {
        (self.width + 1) * (self.height + 1)
    }

    pub fn n_bonds(&self) -> usize {
        self.width * (self.height + 1) + (self.width + 1) * self.height
    }

    pub fn n_plaquettes(&self) -> usize {
        self.width * self.height
    }

    pub fn vertex_index(&self, x: i32, y: i32) -> Option<usize> {
        let (i, j) = (x - self.x0, y - self.y0);
        if i < 0 || j < 0 || i > self.width as i32 || j > self.height as i32 {
            return None;
        }
        Some(j as usize * (self.width + 1) + i as usize)
    }

    /// Index of the positive bond underlying `b`, horizontal bonds first,
    /// each family in row-major order.
    pub fn bond_index(&self, b: Bond) -> Option<Step> {
        let (p, forwards) = b.positive();
        let backwards = !forwards;
        let (i, j) = (p.x - self.x0, p.y - self.y0);
        if i < 0 || j < 0 {
            return None;
        }
        let (i, j) = (i as usize, j as usize);
        match p.dir {
            Dir::R if i < self.width && j <= self.height => Some((j * self.width + i, backwards)),
            Dir::U if i <= self.width && j < self.height => {
                Some((self.width * (self.height + 1) + j * (self.width + 1) + i, backwards))
            }
            _ => None,
        }
    }

    /// Positive bonds in index order.
    pub fn bonds(&self) -> Vec<Bond> {
        let mut out = Vec::with_capacity(self.n_bonds());
        for j in 0..=self.height {
            for i in 0..self.width {
                out.push(Bond::new(self.x0 + i as i32, self.y0 + j as i32, Dir::R));
            }
        }
        for j in 0..self.height {
            for i in 0..=self.width {
                out.push(Bond::new(self.x0 + i as i32, self.y0 + j as i32, Dir::U));
            }
        }
        out
    }

    /// Plaquettes ordered lexicographically by their smallest corner.
    pub fn plaquettes(&self) -> Vec<Plaquette> {
        let mut out = Vec::with_capacity(self.n_plaquettes());
        for i in 0..self.width {
            for j in 0..self.height {
                out.push(Plaquette { x: self.x0 + i as i32, y: self.y0 + j as i32 });
            }
        }
        out
    }

    pub fn compile(&self, l: &Loop) -> Result<CompiledLoop, SamplerError> {
        let steps = l
            .word()
            .iter()
            .map(|b| self.bond_index(*b).ok_or_else(|| SamplerError::LoopOutside(l.to_text())))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(CompiledLoop { steps })
    }

    pub fn compile_string(&self, s: &LoopString) -> Result<Vec<CompiledLoop>, SamplerError> {
        s.without_trivial().loops.iter().map(|l| self.compile(l)).collect()
    }
}

/// Plaquette words and, per bond, the staples closing each adjacent
/// plaquette after the bond.
#[derive(Debug, Clone, PartialEq)]
pub struct Topology {
    pub lattice: LatticeBox,
    pub plaquettes: Vec<[Step; 4]>,
    pub staples: Vec<Vec<(usize, [Step; 3])>>,
    /// Start and end vertex of each positive bond.
    pub ends: Vec<(usize, usize)>,
}

impl Topology {
    pub fn new(lattice: LatticeBox) -> Self {
        let bonds = lattice.bonds();
        let ends = bonds
            .iter()
            .map(|b| {
                let (s, e) = (b.start(), b.end());
                (lattice.vertex_index(s.0, s.1).unwrap_or(0), lattice.vertex_index(e.0, e.1).unwrap_or(0))
            })
            .collect();
        let mut plaquettes = Vec::with_capacity(lattice.n_plaquettes());
        let mut staples = vec![Vec::new(); bonds.len()];
        for (pi, p) in lattice.plaquettes().iter().enumerate() {
            let w = p.word();
            let steps: [Step; 4] = core::array::from_fn(|k| lattice.bond_index(w[k]).unwrap_or((0, false)));
            for k in 0..4 {
                let (e, back) = steps[k];
                // Read the plaquette so that `e` is traversed forwards.
                let st: [Step; 3] = if !back {
                    core::array::from_fn(|m| steps[(k + 1 + m) % 4])
                } else {
                    core::array::from_fn(|m| {
                        let (b, inv) = steps[(k + 3 - m) % 4];
                        (b, !inv)
                    })
                };
                staples[e].push((pi, st));
            }
            plaquettes.push(steps);
        }
        Topology { lattice, plaquettes, staples, ends }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompiledLoop {
    pub steps: Vec<Step>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Start {
    Cold,
    Hot,
}

/// Symmetric pool of near-identity proposals `X` and `X^-1`.
#[derive(Debug, Clone)]
pub struct ProposalPool {
    pub scale: f64,
    moves: Vec<Mat>,
}

impl ProposalPool {
    pub const PAIRS: usize = 128;

    pub fn new<R: Rng + ?Sized>(spec: GroupSpec, scale: f64, rng: &mut R) -> Self {
        let mut p = ProposalPool { scale, moves: Vec::with_capacity(2 * Self::PAIRS) };
        for _ in 0..Self::PAIRS {
            let x = exp_map(spec, &gaussian_lie_sample(spec, rng, scale));
            p.moves.push(*x.matrix());
            p.moves.push(x.matrix().adjoint());
        }
        p
    }

    /// Redraws `k` pairs; the pool stays closed under inversion.
    pub fn refresh<R: Rng + ?Sized>(&mut self, spec: GroupSpec, k: usize, rng: &mut R) {
        for _ in 0..k {
            let i = rng.gen_range(0..Self::PAIRS);
            let x = exp_map(spec, &gaussian_lie_sample(spec, rng, self.scale));
            self.moves[2 * i] = *x.matrix();
            self.moves[2 * i + 1] = x.matrix().adjoint();
        }
    }

    fn pick<R: Rng + ?Sized>(&self, rng: &mut R) -> &Mat {
        &self.moves[rng.gen_range(0..self.moves.len())]
    }
}

#[derive(Debug, Clone)]
pub struct LatticeConfiguration {
    pub params: ActionParams,
    pub topology: Arc<Topology>,
    links: Vec<Mat>,
}

fn adjoint_if(m: &Mat, inv: bool) -> Mat {
    if inv {
        m.adjoint()
    } else {
        *m
    }
}

/// `Re Tr(A B)` over the leading `n x n` block.
fn re_trace_product(a: &Mat, b: &Mat, n: usize) -> f64 {
    let mut s = 0.0;
    for i in 0..n {
        for k in 0..n {
            s += (a[(i, k)] * b[(k, i)]).re;
        }
    }
    s
}

fn trace_n(m: &Mat, n: usize) -> C64 {
    (0..n).map(|i| m[(i, i)]).sum()
}

impl LatticeConfiguration {
    pub fn new<R: Rng + ?Sized>(lattice: LatticeBox, params: ActionParams, start: Start, rng: &mut R) -> Self {
        Self::with_topology(Arc::new(Topology::new(lattice)), params, start, rng)
    }

    pub fn with_topology<R: Rng + ?Sized>(topology: Arc<Topology>, params: ActionParams, start: Start, rng: &mut R) -> Self {
        let n = topology.lattice.n_bonds();
        let links = match start {
            Start::Cold => vec![Mat::identity(); n],
            Start::Hot => (0..n).map(|_| *haar_sample(params.spec, rng).matrix()).collect(),
        };
        LatticeConfiguration { params, topology, links }
    }

    pub fn spec(&self) -> GroupSpec {
        self.params.spec
    }

    pub fn lattice(&self) -> &LatticeBox {
        &self.topology.lattice
    }

    pub fn link(&self, e: usize) -> GroupElement {
        GroupElement::from_matrix(self.spec().n, self.links[e])
    }

    /// `Q_b` for any oriented bond, with `Q_{e^-1} = Q_e^-1`.
    pub fn bond_variable(&self, b: Bond) -> Result<GroupElement, SamplerError> {
        let (e, inv) = self.lattice().bond_index(b).ok_or(SamplerError::BondOutside(b))?;
        Ok(GroupElement::from_matrix(self.spec().n, adjoint_if(&self.links[e], inv)))
    }

    pub fn set_link(&mut self, e: usize, q: &GroupElement) -> Result<(), SamplerError> {
        if q.n() != self.spec().n {
            return Err(SamplerError::Shape(self.spec()));
        }
        self.links[e] = *q.matrix();
        Ok(())
    }

    fn product(&self, steps: &[Step]) -> Mat {
        let mut m = Mat::identity();
        for (e, inv) in steps {
            m *= adjoint_if(&self.links[*e], *inv);
        }
        m
    }

    pub fn plaquette_holonomy(&self, p: usize) -> GroupElement {
        GroupElement::from_matrix(self.spec().n, self.product(&self.topology.plaquettes[p]))
    }

    /// Logarithm of the unnormalized density, summed over every plaquette.
    pub fn action(&self) -> f64 {
        let n = self.spec().n;
        self.topology
            .plaquettes
            .iter()
            .map(|p| self.params.log_weight(trace_n(&self.product(p), n).re))
            .sum()
    }

    fn staple_sum(&self, e: usize) -> Mat {
        let mut s = Mat::zeros();
        for (_, st) in &self.topology.staples[e] {
            s += self.product(st);
        }
        s
    }

    /// Change of [`LatticeConfiguration::action`] when `Q_e` is replaced,
    /// computed from the plaquettes containing `e` only.
    pub fn local_action_delta(&self, e: usize, q_new: &GroupElement) -> Result<f64, SamplerError> {
        if e >= self.links.len() {
            return Err(SamplerError::BondOutside(Bond::new(i32::MIN, i32::MIN, Dir::R)));
        }
        let n = self.spec().n;
        let mut d = 0.0;
        for (_, st) in &self.topology.staples[e] {
            let s = self.product(st);
            d += self.params.log_weight(re_trace_product(q_new.matrix(), &s, n))
                - self.params.log_weight(re_trace_product(&self.links[e], &s, n));
        }
        Ok(d)
    }

    /// Single Metropolis proposal on bond `e`; returns whether it was
    /// accepted.
    pub fn metropolis_update<R: Rng + ?Sized>(&mut self, e: usize, pool: &ProposalPool, rng: &mut R) -> bool {
        let n = self.spec().n;
        let s = self.staple_sum(e);
        let cand = pool.pick(rng) * self.links[e];
        let d = self.params.coupling() * (re_trace_product(&cand, &s, n) - re_trace_product(&self.links[e], &s, n));
        if d >= 0.0 || rng.gen::<f64>() < d.exp() {
            self.links[e] = cand;
            true
        } else {
            false
        }
    }

    pub fn n_links(&self) -> usize {
        self.links.len()
    }

    /// One Metropolis pass over every bond with `hits` proposals each;
    /// returns the acceptance rate.
    pub fn sweep_metropolis<R: Rng + ?Sized>(&mut self, pool: &ProposalPool, hits: usize, rng: &mut R) -> f64 {
        let n = self.spec().n;
        let c = self.params.coupling();
        let mut accepted = 0usize;
        let mut tried = 0usize;
        for e in 0..self.links.len() {
            let s = self.staple_sum(e);
            let mut cur = re_trace_product(&self.links[e], &s, n);
            for _ in 0..hits.max(1) {
                let cand = pool.pick(rng) * self.links[e];
                let new = re_trace_product(&cand, &s, n);
                let d = c * (new - cur);
                tried += 1;
                if d >= 0.0 || rng.gen::<f64>() < d.exp() {
                    self.links[e] = cand;
                    cur = new;
                    accepted += 1;
                }
            }
        }
        if tried == 0 {
            0.0
        } else {
            accepted as f64 / tried as f64
        }
    }

    /// Exact conditional resampling of every bond (U(1) only).
    pub fn sweep_heatbath_u1<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Result<(), SamplerError> {
        if self.spec() != GroupSpec::u1() {
            return Err(SamplerError::Shape(self.spec()));
        }
        let c = self.params.coupling();
        for e in 0..self.links.len() {
            let s = self.staple_sum(e)[(0, 0)];
            let k = c * s.norm();
            let phi = von_mises(k, rng) - s.arg();
            self.links[e] = *GroupElement::from_angle(phi).matrix();
        }
        Ok(())
    }

    /// Projects every link back onto the group.
    pub fn reunitarize(&mut self) {
        let spec = self.spec();
        for m in self.links.iter_mut() {
            *m = *GroupElement::from_matrix(spec.n, *m).reorthonormalize(spec).matrix();
        }
    }

    /// `Re W_l` for a compiled loop.
    pub fn wilson(&self, l: &CompiledLoop) -> f64 {
        self.wilson_complex(l).re
    }

    pub fn wilson_complex(&self, l: &CompiledLoop) -> C64 {
        let n = self.spec().n;
        trace_n(&self.product(&l.steps), n) / n as f64
    }

    /// `Re` of the product of the component Wilson loops.
    pub fn wilson_string(&self, s: &[CompiledLoop]) -> f64 {
        let mut w = C64::new(1.0, 0.0);
        for l in s {
            w *= self.wilson_complex(l);
        }
        w.re
    }

    pub fn mean_plaquette(&self) -> f64 {
        let n = self.spec().n;
        let total: f64 = self.topology.plaquettes.iter().map(|p| trace_n(&self.product(p), n).re / n as f64).sum();
        total / self.topology.plaquettes.len().max(1) as f64
    }

    /// `Q_e -> g_{u(e)} Q_e g_{v(e)}^-1` with `g` indexed by vertex.
    pub fn gauge_transform(&self, g: &[GroupElement]) -> LatticeConfiguration {
        let mut out = self.clone();
        for (e, (u, v)) in self.topology.ends.iter().enumerate() {
            out.links[e] = g[*u].matrix() * self.links[e] * g[*v].matrix().adjoint();
        }
        out
    }
}

/// Best-Fisher sampler for the von Mises density `exp(k cos x)` on `(-pi, pi]`.
pub fn von_mises<R: Rng + ?Sized>(k: f64, rng: &mut R) -> f64 {
    use std::f64::consts::PI;
    if k < 1e-9 {
        return rng.gen_range(-PI..PI);
    }
    let tau = 1.0 + (1.0 + 4.0 * k * k).sqrt();
    let rho = (tau - (2.0 * tau).sqrt()) / (2.0 * k);
    let r = (1.0 + rho * rho) / (2.0 * rho);
    loop {
        let u1: f64 = rng.gen();
        let u2: f64 = rng.gen();
        let u3: f64 = rng.gen();
        let z = (PI * u1).cos();
        let f = (1.0 + r * z) / (r + z);
        let c = k * (r - f);
        if c * (2.0 - c) - u2 > 0.0 || (c / u2).ln() + 1.0 - c >= 0.0 {
            let x = f.clamp(-1.0, 1.0).acos();
            return if u3 < 0.5 { -x } else { x };
        }
    }
}
