//! Multi-chain Monte Carlo runs and shared-randomness evaluation of master
//! loop equations.

use std::collections::BTreeMap;
use std::sync::Arc;

use loopfield_core::action::ActionParams;
use loopfield_core::driver::{make_lattice_approximation, LoopFamily};
use loopfield_core::equation::{assemble, EquationReport, EquationSpec, Term, TermTag, TermValue};
use loopfield_core::group::GroupSpec;
use loopfield_core::loops::{compatible_triples, twist_negative, Loop, LoopString, Triple};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::sampler::{CompiledLoop, LatticeBox, LatticeConfiguration, ProposalPool, Start, Topology};
use crate::stats::{tau_int, Accumulator, Estimate};
use crate::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Algorithm {
    Metropolis,
    HeatBath,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Schedule {
    /// Measured sweeps per chain after burn-in.
    pub sweeps: usize,
    /// `None`: ten autocorrelation times from a pilot run.
    pub burn_in: Option<usize>,
    /// `None`: one autocorrelation time.
    pub thin: Option<usize>,
    pub chains: usize,
    pub hits: usize,
    pub algorithm: Algorithm,
    pub hot_start: bool,
    pub blocks: usize,
    pub initial_scale: f64,
}

impl Default for Schedule {
    fn default() -> Self {
        Schedule {
            sweeps: 10_000,
            burn_in: None,
            thin: None,
            chains: 2,
            hits: 4,
            algorithm: Algorithm::Metropolis,
            hot_start: true,
            blocks: 32,
            initial_scale: 0.5,
        }
    }
}

/// Observables measured on every kept configuration, and linear functionals
/// of them accumulated sample by sample.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ObservableSet {
    pub strings: Vec<LoopString>,
    pub functionals: Vec<Vec<(usize, f64)>>,
    index: BTreeMap<Vec<Loop>, usize>,
}

impl ObservableSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, s: &LoopString) -> usize {
        let mut key = s.without_trivial().loops;
        key.sort();
        if let Some(i) = self.index.get(&key) {
            return *i;
        }
        let i = self.strings.len();
        self.strings.push(s.without_trivial());
        self.index.insert(key, i);
        i
    }

    pub fn add_functional(&mut self, f: Vec<(usize, f64)>) -> usize {
        self.functionals.push(f);
        self.functionals.len() - 1
    }

    pub fn loops(&self) -> impl Iterator<Item = &Loop> {
        self.strings.iter().flat_map(|s| s.loops.iter())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LogRow {
    pub chain: usize,
    pub sweep: usize,
    pub observable_id: usize,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct McRun {
    pub observables: Vec<Estimate>,
    pub functionals: Vec<Estimate>,
    pub acceptance: f64,
    pub scale: f64,
    pub burn_in: usize,
    pub thin: usize,
    pub pilot_tau: f64,
    pub log: Vec<LogRow>,
}

struct ChainResult {
    obs: Vec<Accumulator>,
    fun: Vec<Accumulator>,
    acceptance: f64,
    scale: f64,
    burn_in: usize,
    thin: usize,
    pilot_tau: f64,
    log: Vec<LogRow>,
}

/// Worker count from `LOOPFIELD_THREADS`, defaulting to the available cores.
pub fn thread_count() -> usize {
    std::env::var("LOOPFIELD_THREADS")
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
        .filter(|n| *n > 0)
        .unwrap_or_else(|| std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1))
}

/// Chain `k` draws from stream `k` of a ChaCha generator keyed by the master
/// seed.
pub fn chain_rng(seed: u64, chain: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(chain as u64);
    rng
}

struct Chain {
    config: LatticeConfiguration,
    pool: Option<ProposalPool>,
    rng: ChaCha8Rng,
    hits: usize,
    sweeps_done: usize,
}

impl Chain {
    fn sweep(&mut self) -> f64 {
        self.sweeps_done += 1;
        let acc = match &self.pool {
            Some(pool) => self.config.sweep_metropolis(pool, self.hits, &mut self.rng),
            None => {
                // Heat bath only exists for U(1); the caller checked.
                let _ = self.config.sweep_heatbath_u1(&mut self.rng);
                1.0
            }
        };
        if let Some(pool) = &mut self.pool {
            pool.refresh(self.config.spec(), 4, &mut self.rng);
        }
        if self.sweeps_done.is_multiple_of(200) {
            self.config.reunitarize();
        }
        acc
    }

    /// Multiplicative scale adaptation towards 50% acceptance.
    fn tune(&mut self, sweeps: usize) -> f64 {
        let spec = self.config.spec();
        let mut last = 0.0;
        let mut window = 0.0;
        for i in 0..sweeps {
            let a = self.sweep();
            window += a;
            if (i + 1) % 10 == 0 {
                let mean = window / 10.0;
                window = 0.0;
                last = mean;
                if let Some(pool) = &self.pool {
                    let scale = (pool.scale * (2.0 * (mean - 0.5)).exp()).clamp(1e-3, 6.0);
                    self.pool = Some(ProposalPool::new(spec, scale, &mut self.rng));
                }
            }
        }
        last
    }
}

fn run_chain(
    topology: &Arc<Topology>,
    params: ActionParams,
    compiled: &[Vec<CompiledLoop>],
    set: &ObservableSet,
    schedule: &Schedule,
    seed: u64,
    chain: usize,
    log: bool,
) -> ChainResult {
    let mut rng = chain_rng(seed, chain);
    let start = if schedule.hot_start { Start::Hot } else { Start::Cold };
    let config = LatticeConfiguration::with_topology(topology.clone(), params, start, &mut rng);
    let pool = match schedule.algorithm {
        Algorithm::Metropolis => Some(ProposalPool::new(params.spec, schedule.initial_scale, &mut rng)),
        Algorithm::HeatBath => None,
    };
    let mut ch = Chain { config, pool, rng, hits: schedule.hits, sweeps_done: 0 };

    // Tuning happens before any measurement and is never resumed.
    let tune_sweeps = if ch.pool.is_some() { 200 } else { 0 };
    ch.tune(tune_sweeps);
    let (burn_in, thin, pilot_tau) = match (schedule.burn_in, schedule.thin) {
        (Some(b), Some(t)) => (b, t.max(1), f64::NAN),
        (b, t) => {
            let mut series = Vec::with_capacity(1000);
            for _ in 0..1000 {
                ch.sweep();
                series.push(ch.config.mean_plaquette());
            }
            let tau = tau_int(&series);
            (b.unwrap_or((10.0 * tau).ceil() as usize), t.unwrap_or(tau.ceil() as usize).max(1), tau)
        }
    };
    for _ in 0..burn_in {
        ch.sweep();
    }

    let n_meas = schedule.sweeps / thin;
    let block = (n_meas / schedule.blocks.max(1)).max(1);
    let mut obs = vec![Accumulator::new(block); compiled.len()];
    let mut fun = vec![Accumulator::new(block); set.functionals.len()];
    let mut values = vec![0.0; compiled.len()];
    let mut acc_sum = 0.0;
    let mut rows = Vec::new();
    for m in 0..n_meas {
        for _ in 0..thin {
            acc_sum += ch.sweep();
        }
        for (i, c) in compiled.iter().enumerate() {
            values[i] = ch.config.wilson_string(c);
            obs[i].push(values[i]);
            if log {
                rows.push(LogRow { chain, sweep: (m + 1) * thin, observable_id: i, value: values[i] });
            }
        }
        for (f, acc) in set.functionals.iter().zip(fun.iter_mut()) {
            acc.push(f.iter().map(|(i, c)| c * values[*i]).sum());
        }
    }
    let total = (n_meas * thin).max(1) as f64;
    ChainResult {
        obs,
        fun,
        acceptance: acc_sum / total,
        scale: ch.pool.as_ref().map(|p| p.scale).unwrap_or(0.0),
        burn_in,
        thin,
        pilot_tau,
        log: rows,
    }
}

/// Runs `schedule.chains` independent chains and merges their accumulators in
/// chain order.
pub fn run(
    lattice: LatticeBox,
    params: ActionParams,
    set: &ObservableSet,
    schedule: &Schedule,
    seed: u64,
    log: bool,
) -> Result<McRun, Error> {
    if schedule.algorithm == Algorithm::HeatBath && params.spec != GroupSpec::u1() {
        return Err(Error::Config(format!("heat bath needs U(1), got {}", params.spec)));
    }
    let topology = Arc::new(Topology::new(lattice));
    let compiled: Vec<Vec<CompiledLoop>> =
        set.strings.iter().map(|s| lattice.compile_string(s)).collect::<Result<_, _>>()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(thread_count())
        .build()
        .map_err(|e| Error::Config(e.to_string()))?;
    let results: Vec<ChainResult> = pool.install(|| {
        (0..schedule.chains.max(1))
            .into_par_iter()
            .map(|k| run_chain(&topology, params, &compiled, set, schedule, seed, k, log))
            .collect()
    });
    let mut it = results.into_iter();
    let first = it.next().ok_or_else(|| Error::Config("no chains".into()))?;
    let nch = schedule.chains.max(1) as f64;
    let mut obs = first.obs;
    let mut fun = first.fun;
    let mut acceptance = first.acceptance;
    let mut log_rows = first.log;
    for r in it {
        for (a, b) in obs.iter_mut().zip(&r.obs) {
            a.merge(b);
        }
        for (a, b) in fun.iter_mut().zip(&r.fun) {
            a.merge(b);
        }
        acceptance += r.acceptance;
        log_rows.extend(r.log);
    }
    Ok(McRun {
        observables: obs.iter().map(Accumulator::estimate).collect(),
        functionals: fun.iter().map(Accumulator::estimate).collect(),
        acceptance: acceptance / nch,
        scale: first.scale,
        burn_in: first.burn_in,
        thin: first.thin,
        pilot_tau: first.pilot_tau,
        log: log_rows,
    })
}

/// Several equations on one sample stream, plus named linear combinations of
/// their residuals.
#[derive(Debug, Clone, PartialEq)]
pub struct McEvaluation {
    pub reports: Vec<EquationReport>,
    pub combinations: Vec<Estimate>,
    pub extra: Vec<Estimate>,
    pub run: McRun,
    pub lattice: LatticeBox,
}

fn side_sign(t: &Term) -> f64 {
    if t.tag.is_lhs() {
        1.0
    } else {
        -1.0
    }
}

/// Evaluates every equation with shared randomness. `combinations` weight
/// the equation residuals; `extra` functionals are given directly on strings.
pub fn evaluate_mc(
    specs: &[EquationSpec],
    combinations: &[Vec<(usize, f64)>],
    extra: &[Vec<(LoopString, f64)>],
    schedule: &Schedule,
    seed: u64,
) -> Result<McEvaluation, Error> {
    let first = specs.first().ok_or_else(|| Error::Config("no equations".into()))?;
    let (group, eps) = (first.group, first.epsilon);
    if specs.iter().any(|s| s.group != group || s.epsilon != eps) {
        return Err(Error::Config("equations must share group and spacing".into()));
    }
    let mut set = ObservableSet::new();
    let mut assembled: Vec<Vec<(Term, usize)>> = Vec::new();
    let mut residual_fun = Vec::new();
    for s in specs {
        let terms = assemble(s)?;
        let mut with_idx = Vec::new();
        let mut f: Vec<(usize, f64)> = Vec::new();
        for t in terms {
            let i = set.insert(&t.string);
            f.push((i, side_sign(&t) * t.coeff));
            with_idx.push((t, i));
        }
        residual_fun.push(set.add_functional(f));
        assembled.push(with_idx);
    }
    let mut combo_fun = Vec::new();
    for c in combinations {
        let mut f = Vec::new();
        for (k, w) in c {
            let idx = residual_fun.get(*k).ok_or_else(|| Error::Config(format!("no equation {k}")))?;
            f.extend(set.functionals[*idx].iter().map(|(i, c)| (*i, c * w)));
        }
        combo_fun.push(set.add_functional(f));
    }
    let mut extra_fun = Vec::new();
    for e in extra {
        let f = e.iter().map(|(s, w)| (set.insert(s), *w)).collect();
        extra_fun.push(set.add_functional(f));
    }
    let subjects: Vec<&Loop> = specs.iter().flat_map(|s| s.subject.loops.iter()).collect();
    let lattice = LatticeBox::around(subjects.iter().copied(), set.loops())?;
    let params = ActionParams::new(group, eps)?;
    let run = run(lattice, params, &set, schedule, seed, false)?;

    let mut reports = Vec::new();
    for (terms, rf) in assembled.into_iter().zip(&residual_fun) {
        let values = terms
            .into_iter()
            .map(|(t, i)| {
                let e = run.observables[i];
                TermValue { term: t, value: e.mean, sigma: e.sigma }
            })
            .collect();
        let mut r = EquationReport::from_values(values, run.functionals[*rf].sigma, eps, Some(seed), "mc");
        r.residual = run.functionals[*rf].mean;
        reports.push(r);
    }
    Ok(McEvaluation {
        reports,
        combinations: combo_fun.iter().map(|i| run.functionals[*i]).collect(),
        extra: extra_fun.iter().map(|i| run.functionals[*i]).collect(),
        run,
        lattice,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct UnifiedRow {
    pub epsilon: f64,
    pub triple: Triple,
    pub reports: Vec<EquationReport>,
    /// Center residual minus half of each of the near and far residuals.
    pub combination: Estimate,
    /// Discrete deformation combination minus the continuum right side
    /// `E W_{l1} W_{l2} - tw E W_{l1 l2^-1} - (gamma/N^2) E W_l`.
    pub continuum_gap: Estimate,
    pub deformation: Estimate,
    pub continuum_rhs: Estimate,
    pub acceptance: f64,
}

/// The crossing combination for `SU(N)`/`SO(N)` on the lattice figure eight,
/// one shared-randomness run per spacing.
pub fn convergence_unified(
    group: GroupSpec,
    areas: [f64; 4],
    eps_list: &[f64],
    triple_index: usize,
    schedule: &Schedule,
    seed: u64,
) -> Result<Vec<UnifiedRow>, Error> {
    let mut rows = Vec::new();
    for &eps in eps_list {
        let ll = make_lattice_approximation(LoopFamily::FigureEight { t: areas }, eps)?;
        let al = ll.annotated.ok_or_else(|| Error::Config("figure eight without annotation".into()))?;
        let triples = compatible_triples(&al);
        let tr = *triples
            .get(triple_index)
            .ok_or_else(|| Error::Config(format!("triple {triple_index} of {}", triples.len())))?;
        let specs: Vec<EquationSpec> =
            [tr.center, tr.near, tr.far].iter().map(|x| EquationSpec::single(group, al.lp.clone(), *x, eps)).collect();
        let (l1, l2) = al.lobes()?;
        let (x, y) = (al.ann.e_first[0], al.ann.e_second[0]);
        let twisted = twist_negative(&al.lp, x.min(y), x.max(y))?;
        let tw = group.twist_coefficient();
        let gn = group.gamma() / (group.n_f64() * group.n_f64());
        let rhs = vec![
            (LoopString::new(vec![l1, l2]), 1.0),
            (LoopString::single(twisted), -tw),
            (LoopString::single(al.lp.clone()), -gn),
        ];
        // Deformation part of the combination, as a functional on strings.
        let mut deform: Vec<(LoopString, f64)> = Vec::new();
        for (s, w) in specs.iter().zip([1.0, -0.5, -0.5]) {
            for t in assemble(s)? {
                if t.tag.is_lhs() {
                    deform.push((t.string, w * t.coeff));
                }
            }
        }
        let mut gap = deform.clone();
        gap.extend(rhs.iter().map(|(s, c)| (s.clone(), -c)));
        let ev = evaluate_mc(&specs, &[vec![(0, 1.0), (1, -0.5), (2, -0.5)]], &[gap, deform, rhs], schedule, seed)?;
        rows.push(UnifiedRow {
            epsilon: eps,
            triple: tr,
            combination: ev.combinations[0],
            continuum_gap: ev.extra[0],
            deformation: ev.extra[1],
            continuum_rhs: ev.extra[2],
            acceptance: ev.run.acceptance,
            reports: ev.reports,
        });
    }
    Ok(rows)
}

/// Whether a tag belongs to the expansion family.
pub fn is_expansion(tag: &TermTag) -> bool {
    matches!(tag, TermTag::ExpansionPlus(_) | TermTag::ExpansionMinus(_))
}
