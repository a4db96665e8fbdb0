//! Sampler diagnostics: plaquette-angle histograms, detailed balance and
//! gauge invariance.

use std::f64::consts::PI;

use loopfield_core::action::{partition_z, wilson_density, ActionParams};
use loopfield_core::group::{haar_sample, Family, GroupElement, GroupSpec, Mat, C64};
use loopfield_core::loops::Loop;
use rand::Rng;
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::mc::chain_rng;
use crate::sampler::{LatticeBox, LatticeConfiguration, ProposalPool, Start};
use crate::stats::{tau_int, Accumulator};
use crate::Error;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChiSquareTest {
    pub statistic: f64,
    pub dof: usize,
    pub p_value: f64,
    pub samples: usize,
}

impl ChiSquareTest {
    fn new(statistic: f64, dof: usize, samples: usize) -> Result<Self, Error> {
        let dist = ChiSquared::new(dof.max(1) as f64).map_err(|e| Error::Computation(e.to_string()))?;
        Ok(ChiSquareTest { statistic, dof, p_value: 1.0 - dist.cdf(statistic), samples })
    }

    pub fn passes(&self, level: f64) -> bool {
        self.p_value > level
    }
}

fn angle_bin(theta: f64, bins: usize) -> usize {
    let u = (theta + PI) / (2.0 * PI);
    ((u * bins as f64).floor() as usize).min(bins - 1)
}

fn plaquette_angle(c: &LatticeConfiguration) -> f64 {
    c.plaquette_holonomy(0).matrix()[(0, 0)].arg()
}

/// Probability of each angle bin under the single-plaquette U(1) density,
/// by composite Simpson quadrature.
pub fn u1_bin_probabilities(params: &ActionParams, bins: usize) -> Result<Vec<f64>, Error> {
    let z = partition_z(params)?;
    let dens = |t: f64| wilson_density(params, z, &GroupElement::from_angle(t)) / (2.0 * PI);
    let m = 64;
    Ok((0..bins)
        .map(|b| {
            let a = -PI + 2.0 * PI * b as f64 / bins as f64;
            let h = 2.0 * PI / (bins * m) as f64;
            let mut s = dens(a) + dens(a + h * m as f64);
            for k in 1..m {
                s += dens(a + h * k as f64) * if k % 2 == 1 { 4.0 } else { 2.0 };
            }
            s * h / 3.0
        })
        .collect())
}

/// Metropolis on a one-plaquette U(1) box: chi-square of the thinned
/// plaquette-angle histogram against the exact bin probabilities.
pub fn u1_histogram_test(epsilon: f64, samples: usize, bins: usize, seed: u64) -> Result<ChiSquareTest, Error> {
    let params = ActionParams::new(GroupSpec::u1(), epsilon)?;
    let mut rng = chain_rng(seed, 0);
    let mut c = LatticeConfiguration::new(LatticeBox::single_plaquette(), params, Start::Hot, &mut rng);
    let pool = ProposalPool::new(GroupSpec::u1(), 2.0 * epsilon, &mut rng);
    let mut pilot = Vec::with_capacity(2000);
    for _ in 0..2000 {
        c.sweep_metropolis(&pool, 1, &mut rng);
        pilot.push(plaquette_angle(&c).cos());
    }
    let thin = (4.0 * tau_int(&pilot)).ceil().max(1.0) as usize;
    let mut counts = vec![0usize; bins];
    for _ in 0..samples {
        for _ in 0..thin {
            c.sweep_metropolis(&pool, 1, &mut rng);
        }
        counts[angle_bin(plaquette_angle(&c), bins)] += 1;
    }
    let probs = u1_bin_probabilities(&params, bins)?;
    let n = samples as f64;
    let stat: f64 = counts.iter().zip(&probs).map(|(o, p)| (*o as f64 - n * p).powi(2) / (n * p)).sum();
    ChiSquareTest::new(stat, bins - 1, samples)
}

/// Random-scan single-bond Metropolis on a one-plaquette U(1) box. Every
/// `stride`-th transition between angle bins is counted and the symmetric
/// statistic `sum_{i<j} (N_ij - N_ji)^2 / (N_ij + N_ji)` is compared with a
/// chi-square law, one degree of freedom per visited pair.
pub fn u1_detailed_balance_test(
    epsilon: f64,
    transitions: usize,
    bins: usize,
    stride: usize,
    seed: u64,
) -> Result<ChiSquareTest, Error> {
    let params = ActionParams::new(GroupSpec::u1(), epsilon)?;
    let mut rng = chain_rng(seed, 0);
    let mut c = LatticeConfiguration::new(LatticeBox::single_plaquette(), params, Start::Hot, &mut rng);
    let pool = ProposalPool::new(GroupSpec::u1(), 2.0 * epsilon, &mut rng);
    for _ in 0..1000 {
        c.sweep_metropolis(&pool, 1, &mut rng);
    }
    let mut n = vec![vec![0usize; bins]; bins];
    let nl = c.n_links();
    for _ in 0..transitions {
        for _ in 0..stride.saturating_sub(1) {
            let e = rng.gen_range(0..nl);
            c.metropolis_update(e, &pool, &mut rng);
        }
        let before = angle_bin(plaquette_angle(&c), bins);
        let e = rng.gen_range(0..nl);
        c.metropolis_update(e, &pool, &mut rng);
        let after = angle_bin(plaquette_angle(&c), bins);
        n[before][after] += 1;
    }
    let mut stat = 0.0;
    let mut dof = 0;
    for i in 0..bins {
        for j in i + 1..bins {
            let tot = n[i][j] + n[j][i];
            if tot > 0 {
                stat += (n[i][j] as f64 - n[j][i] as f64).powi(2) / tot as f64;
                dof += 1;
            }
        }
    }
    ChiSquareTest::new(stat, dof, transitions)
}

/// Random element of the diagonal sign subgroup of `G`; conjugating by such
/// elements only flips signs, so it is exact in floating point.
pub fn sign_element<R: Rng + ?Sized>(spec: GroupSpec, rng: &mut R) -> GroupElement {
    let mut signs: Vec<f64> = (0..spec.n).map(|_| if rng.gen::<bool>() { 1.0 } else { -1.0 }).collect();
    if spec.family != Family::U && signs.iter().product::<f64>() < 0.0 {
        if spec.n.is_multiple_of(2) {
            // -I is the only non-trivial sign matrix with det 1 in SU(2).
            let flip = signs[0];
            signs.iter_mut().for_each(|s| *s = flip);
        } else {
            signs[spec.n - 1] *= -1.0;
        }
    }
    let mut m = Mat::identity();
    for (i, s) in signs.iter().enumerate() {
        m[(i, i)] = C64::new(*s, 0.0);
    }
    GroupElement::from_matrix(spec.n, m)
}

#[derive(Debug, Clone, PartialEq)]
pub struct GaugeCheck {
    pub samples: usize,
    pub loops: usize,
    /// Every Wilson loop and every accumulated estimate agree bit for bit
    /// under random sign gauge transforms.
    pub bit_identical: bool,
    /// Largest `|W - W'|` under Haar-random gauge transforms.
    pub haar_deviation: f64,
    /// Largest plaquette-trace change under Haar-random gauge transforms.
    pub plaquette_deviation: f64,
}

/// Runs a short chain and compares every Wilson loop before and after gauge
/// transforms applied to each sample.
pub fn gauge_invariance_check(
    spec: GroupSpec,
    epsilon: f64,
    loops: &[Loop],
    samples: usize,
    seed: u64,
) -> Result<GaugeCheck, Error> {
    let params = ActionParams::new(spec, epsilon)?;
    let lattice = LatticeBox::around(loops.iter(), loops.iter())?;
    let compiled = loops.iter().map(|l| lattice.compile(l)).collect::<Result<Vec<_>, _>>()?;
    let mut rng = chain_rng(seed, 0);
    let mut c = LatticeConfiguration::new(lattice, params, Start::Hot, &mut rng);
    let pool = ProposalPool::new(spec, epsilon, &mut rng);
    let mut plain = vec![Accumulator::new(4); compiled.len()];
    let mut gauged = plain.clone();
    let mut bits = true;
    let mut haar_dev: f64 = 0.0;
    let mut plaq_dev: f64 = 0.0;
    for _ in 0..samples {
        c.sweep_metropolis(&pool, 2, &mut rng);
        let g: Vec<GroupElement> = (0..lattice.n_vertices()).map(|_| sign_element(spec, &mut rng)).collect();
        let cg = c.gauge_transform(&g);
        let h: Vec<GroupElement> = (0..lattice.n_vertices()).map(|_| haar_sample(spec, &mut rng)).collect();
        let ch = c.gauge_transform(&h);
        for (k, l) in compiled.iter().enumerate() {
            let (w, wg) = (c.wilson(l), cg.wilson(l));
            bits &= w.to_bits() == wg.to_bits();
            plain[k].push(w);
            gauged[k].push(wg);
            haar_dev = haar_dev.max((c.wilson_complex(l) - ch.wilson_complex(l)).norm());
        }
        for p in 0..lattice.n_plaquettes() {
            let d = (c.plaquette_holonomy(p).trace() - ch.plaquette_holonomy(p).trace()).norm();
            plaq_dev = plaq_dev.max(d);
        }
    }
    bits &= plain.iter().zip(&gauged).all(|(a, b)| {
        let (x, y) = (a.estimate(), b.estimate());
        x.mean.to_bits() == y.mean.to_bits() && x.sigma.to_bits() == y.sigma.to_bits()
    });
    Ok(GaugeCheck {
        samples,
        loops: loops.len(),
        bit_identical: bits,
        haar_deviation: haar_dev,
        plaquette_deviation: plaq_dev,
    })
}
