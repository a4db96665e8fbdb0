use std::f64::consts::PI;

use loopfield_core::action::*;
use loopfield_core::group::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const GROUPS: [GroupSpec; 4] = [
    GroupSpec { family: Family::U, n: 1 },
    GroupSpec { family: Family::SU, n: 2 },
    GroupSpec { family: Family::SO, n: 3 },
    GroupSpec { family: Family::U, n: 2 },
];

fn trapezoid(f: impl Fn(f64) -> f64, nodes: usize) -> f64 {
    let h = 2.0 * PI / nodes as f64;
    (0..nodes).map(|i| f(i as f64 * h)).sum::<f64>() / nodes as f64
}

/// Modified Bessel function of the first kind by its power series.
fn bessel_i(n: u32, x: f64) -> f64 {
    let mut term = (x / 2.0).powi(n as i32);
    for k in 1..=n {
        term /= k as f64;
    }
    let mut sum = term;
    for k in 1..200 {
        term *= (x / 2.0) * (x / 2.0) / (k as f64 * (k + n) as f64);
        sum += term;
        if term < 1e-18 * sum {
            break;
        }
    }
    sum
}

#[test]
fn partition_function_limits_and_resolution() {
    let p = ActionParams::new(GroupSpec::u1(), 1e3).unwrap();
    assert!((partition_z(&p).unwrap() - 1.0).abs() < 1e-6);
    let p = ActionParams::new(GroupSpec::u1(), 0.5).unwrap();
    let z = partition_z(&p).unwrap();
    let f = |t: f64| (4.0 * t.cos() - 4.0).exp();
    let coarse = trapezoid(f, 10_000);
    let fine = trapezoid(f, 20_000);
    assert!((coarse - fine).abs() < 1e-10);
    assert!((z - fine).abs() < 1e-10);
    assert!((z - bessel_i(0, 4.0) * (-4.0f64).exp()).abs() < 1e-12);
}

#[test]
fn su2_partition_function_matches_haar_monte_carlo() {
    let p = ActionParams::new(GroupSpec::su(2), 0.7).unwrap();
    let z = partition_z(&p).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let n = 400_000;
    let xs: Vec<f64> = (0..n).map(|_| p.weight(haar_sample(p.spec, &mut rng).trace().re)).collect();
    let m = xs.iter().sum::<f64>() / n as f64;
    let v = xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n as f64 - 1.0);
    let s = (v / n as f64).sqrt();
    assert!((m - z).abs() <= 3.0 * s, "quadrature {z}, MC {m} +- {s}");
}

#[test]
fn density_is_normalized_symmetric_and_class() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for spec in GROUPS {
        let torus = Torus::for_spec(spec).unwrap();
        for eps in [0.05, 0.2, 0.5, 1.0] {
            let p = ActionParams::new(spec, eps).unwrap();
            let z = partition_z(&p).unwrap();
            // Independent check with a fixed fine grid.
            let total = match torus {
                Torus::U2 => {
                    let m = 1024;
                    let mut s = 0.0;
                    for i in 0..m {
                        for j in 0..m {
                            let (a, b) = (2.0 * PI * i as f64 / m as f64, 2.0 * PI * j as f64 / m as f64);
                            let vd = 0.5 * (C64::from_polar(1.0, a) - C64::from_polar(1.0, b)).norm_sqr();
                            s += vd * wilson_density(&p, z, &torus.element(&[a, b]));
                        }
                    }
                    s / (m * m) as f64
                }
                _ => {
                    let meas = |x: f64| match torus {
                        Torus::SU2 => 2.0 * x.sin().powi(2),
                        Torus::SO3 => 1.0 - x.cos(),
                        _ => 1.0,
                    };
                    trapezoid(|x| meas(x) * wilson_density(&p, z, &torus.element(&[x])), 1 << 16)
                }
            };
            assert!((total - 1.0).abs() < 1e-10, "{spec} eps {eps}: {total}");
            for _ in 0..20 {
                let a = haar_sample(spec, &mut rng);
                let b = haar_sample(spec, &mut rng);
                let s = wilson_density(&p, z, &b);
                assert!((s - wilson_density(&p, z, &b.inverse())).abs() <= 1e-12 * s.max(1.0));
                let conj = a.mul(&b).mul(&a.inverse());
                assert!((s - wilson_density(&p, z, &conj)).abs() <= 1e-10 * s.max(1.0));
            }
            let id = wilson_density(&p, z, &GroupElement::identity(spec));
            assert!((id - 1.0 / z).abs() <= 1e-12 / z);
        }
    }
}

#[test]
fn u1_coefficient_is_bessel_ratio() {
    let p = ActionParams::new(GroupSpec::u1(), 0.5).unwrap();
    let a1 = char_coefficient(Irrep::U1(1), &p).unwrap();
    let z = partition_z(&p).unwrap();
    let f = |t: f64| t.cos() * (4.0 * t.cos() - 4.0).exp();
    let q1 = trapezoid(f, 10_000) / z;
    let q2 = trapezoid(f, 20_000) / z;
    assert!((q1 - q2).abs() < 1e-10);
    assert!((a1 - q2).abs() < 1e-10);
    for n in 0..6 {
        let a = char_coefficient(Irrep::U1(n), &p).unwrap();
        let b = bessel_i(n as u32, 4.0) / bessel_i(0, 4.0);
        assert!((a - b).abs() < 1e-11, "n={n}: {a} vs {b}");
    }
}

#[test]
fn u2_toeplitz_matches_torus_quadrature() {
    for eps in [0.4, 0.7, 1.0] {
        let p = ActionParams::new(GroupSpec::u(2), eps).unwrap();
        for label in [Irrep::U2(0, 0), Irrep::U2(1, 0), Irrep::U2(1, 1), Irrep::U2(2, -1), Irrep::U2(0, -2)] {
            let a = char_coefficient(label, &p).unwrap();
            let b = char_coefficient_torus_u2(label, &p).unwrap();
            assert!((a - b).abs() < 1e-9, "{label:?} eps {eps}: {a} vs {b}");
        }
    }
}

#[test]
fn ladders_are_bounded_and_monotone() {
    for spec in GROUPS {
        let torus = Torus::for_spec(spec).unwrap();
        for eps in [0.3, 0.6, 1.0] {
            if torus == Torus::U2 && eps > 0.6 {
                continue;
            }
            let p = ActionParams::new(spec, eps).unwrap();
            let t = CharCoeffTable::build(&p, 4).unwrap();
            assert_eq!(t.coeff(Irrep::trivial(torus)).map(|a| (a - 1.0).abs() < 1e-10), Some(true));
            let mut recs = t.records.clone();
            recs.sort_by(|a, b| b.casimir.partial_cmp(&a.casimir).unwrap());
            for r in &recs {
                assert!(r.coeff > 0.0 && r.coeff <= 1.0 + 1e-12, "{spec} {:?}: {}", r.label, r.coeff);
            }
            for w in recs.windows(2) {
                if w[1].casimir < w[0].casimir - 1e-12 {
                    assert!(w[1].coeff < w[0].coeff, "{spec} eps {eps}: {:?} vs {:?}", w[0], w[1]);
                }
            }
        }
    }
}

#[test]
fn u2_casimir_order_breaks_at_coarse_spacing() {
    // Across unrelated U(2) irreps the ordering by |c| is not preserved at eps = 1.
    let p = ActionParams::new(GroupSpec::u(2), 1.0).unwrap();
    let a = char_coefficient(Irrep::U2(3, 3), &p).unwrap();
    let b = char_coefficient(Irrep::U2(-1, -4), &p).unwrap();
    assert_eq!(Irrep::U2(3, 3).casimir(), -9.0);
    assert_eq!(Irrep::U2(-1, -4).casimir(), -10.0);
    assert!(a < b);
    // Along each ladder direction the order holds.
    for dir in [(1, 1), (1, 0), (0, -1), (1, -1)] {
        let mut prev = 1.0 + 1e-12;
        for k in 0..5 {
            let c = char_coefficient(Irrep::U2(k * dir.0, k * dir.1), &p).unwrap();
            assert!(c <= prev);
            prev = c;
        }
    }
}

#[test]
fn coefficients_approach_heat_kernel_with_one_constant() {
    let mut worst: f64 = 0.0;
    for spec in GROUPS {
        for eps in [0.4, 0.2, 0.1] {
            let p = ActionParams::new(spec, eps).unwrap();
            let t = CharCoeffTable::build(&p, 2).unwrap();
            for r in &t.records {
                if r.casimir == 0.0 {
                    continue;
                }
                let d = (r.coeff - (r.casimir * eps * eps / 2.0).exp()).abs();
                worst = worst.max(d / (r.casimir * r.casimir * eps.powi(4)));
            }
        }
    }
    assert!(worst < 0.5, "module constant {worst}");
    // U(2) standard coefficient against e^{-eps^2/2}.
    let mut ratios = Vec::new();
    for eps in [0.4, 0.2, 0.1] {
        let p = ActionParams::new(GroupSpec::u(2), eps).unwrap();
        let a = std_coefficient(&p).unwrap();
        ratios.push((a - (-eps * eps / 2.0f64).exp()).abs() / eps.powi(4));
    }
    for r in &ratios {
        assert!(*r <= worst + 1e-12);
    }
}

#[test]
fn convolution_power_against_direct_convolution() {
    let p = ActionParams::new(GroupSpec::u1(), 0.5).unwrap();
    let table = CharCoeffTable::build(&p, 40).unwrap();
    assert_eq!(convolution_power(&table, 1), table);
    let z = partition_z(&p).unwrap();
    let m = 256;
    let grid: Vec<f64> = (0..m).map(|i| 2.0 * PI * i as f64 / m as f64).collect();
    let s: Vec<f64> = grid.iter().map(|&x| p.weight(x.cos()) / z).collect();
    let mut conv = s.clone();
    for _ in 1..4 {
        let mut next = vec![0.0; m];
        for (i, out) in next.iter_mut().enumerate() {
            *out = (0..m).map(|j| conv[j] * s[(i + m - j) % m]).sum::<f64>() / m as f64;
        }
        conv = next;
    }
    let t4 = convolution_power(&table, 4);
    for (i, &x) in grid.iter().enumerate() {
        assert!((t4.density(&[x]) - conv[i]).abs() < 1e-8, "theta {x}");
    }
}

#[test]
fn convolution_powers_converge_to_heat_kernel_coefficient() {
    let t = 1.0;
    let mut gaps = Vec::new();
    for eps in [0.5, 0.25, 0.125, 0.0625] {
        let p = ActionParams::new(GroupSpec::u(2), eps).unwrap();
        let k = (t / (eps * eps)).round() as i32;
        let a = std_coefficient(&p).unwrap();
        gaps.push((a.powi(k) - (-t / 2.0f64).exp()).abs());
    }
    for w in gaps.windows(2) {
        let r = w[0] / w[1];
        assert!(r > 3.0 && r < 5.0, "{gaps:?}");
    }
}

#[test]
fn spectral_sum_reproduces_density() {
    for (spec, cutoff) in [(GroupSpec::u1(), 40u32), (GroupSpec::su(2), 80)] {
        let p = ActionParams::new(spec, 0.5).unwrap();
        let torus = Torus::for_spec(spec).unwrap();
        let z = partition_z(&p).unwrap();
        let table = CharCoeffTable::build(&p, cutoff).unwrap();
        for x in [0.0, 0.3, 1.1, 2.0, 3.0] {
            let direct = wilson_density(&p, z, &torus.element(&[x]));
            assert!((table.density(&[x]) - direct).abs() < 1e-9 * direct.max(1.0), "{spec} at {x}");
        }
    }
}

#[test]
fn cache_text_round_trip_u1() {
    let p = ActionParams::new(GroupSpec::u1(), 0.5).unwrap();
    let t = CharCoeffTable::build(&p, 8).unwrap();
    let text = t.to_cache_text();
    let back = CharCoeffTable::from_cache_text(&text).unwrap();
    assert_eq!(back, t);
    assert_eq!(back.to_cache_text(), text);
}

#[test]
fn heat_kernel_checks() {
    let hk = |x: f64, t: f64| heat_kernel_eval(Torus::U1, &[x], t).unwrap();
    let total = periodic_mean(|x| hk(x, 1.0).value, 1e-12).unwrap();
    assert!((total - 1.0).abs() < 1e-10);
    for x in [0.0, 0.5, 1.5, 3.0, -2.2] {
        let v = hk(x, 1.0);
        assert!(v.tail_bound < 1e-12);
        assert!((v.value - u1_heat_kernel_wrapped(x, 1.0)).abs() < 1e-10);
    }
    // Semigroup on U(1) by quadrature convolution.
    for x in [0.2, 1.7] {
        let conv = periodic_mean(|y| hk(y, 0.4).value * hk(x - y, 0.7).value, 1e-12).unwrap();
        assert!((conv - hk(x, 1.1).value).abs() < 1e-9);
    }
    for torus in [Torus::SU2, Torus::SO3, Torus::U2] {
        let angles: Vec<f64> = (0..torus.rank()).map(|i| 0.4 + i as f64).collect();
        let v = heat_kernel_eval(torus, &angles, 0.5).unwrap();
        assert!(v.tail_bound < 1e-12 && v.value.is_finite());
        let total = torus.average(|a| heat_kernel_eval(torus, a, 0.5).unwrap().value, 1e-10).unwrap();
        assert!((total - 1.0).abs() < 1e-9, "{torus:?}: {total}");
    }
    assert!(matches!(heat_kernel_eval(Torus::U1, &[0.0], 1e-12), Err(ActionError::CutoffExceeded { .. })));
}

#[test]
fn gaussian_lemma_slopes_on_u2() {
    let u2 = GroupSpec::u(2);
    let torus = Torus::U2;
    let eps = [0.4, 0.28, 0.2, 0.14, 0.1];
    let zero = gaussian_lemma_check(u2, |_| 0.0, |_| 0.0, 0.0, &eps).unwrap();
    assert!(zero.rows.iter().all(|r| r.error == 0.0));

    // Re tr(I - Q), Laplacian 1 at the identity.
    let f1 = gaussian_lemma_check(
        u2,
        |a| 1.0 - torus.trace(a).re / 2.0,
        |g| 1.0 - g.trace_normalized().re,
        1.0,
        &eps,
    )
    .unwrap();
    assert!((f1.laplacian_numeric - 1.0).abs() < 1e-5);
    assert!(f1.slope >= 3.5 && f1.slope <= 4.5, "slope {}", f1.slope);

    // |tr Q - 1|^2, Laplacian 1/2 at the identity.
    let f2 = gaussian_lemma_check(
        u2,
        |a| (torus.trace(a) / 2.0 - 1.0).norm_sqr(),
        |g| (g.trace_normalized() - 1.0).norm_sqr(),
        0.5,
        &eps,
    )
    .unwrap();
    assert!((f2.laplacian_numeric - 0.5).abs() < 1e-5);
    assert!(f2.slope >= 3.5 && f2.slope <= 4.5, "slope {}", f2.slope);
}

#[test]
fn first_convergence_lemma_on_u1() {
    // f(Q) = tr((Q - Q^-1) a1) chi(Q a2); the limit is L tr(a1) L chi(a2) = -a1 a2.
    let (alpha, gamma) = (0.9, -0.4);
    let target = -C64::from_polar(1.0, alpha + gamma);
    let mut gaps = Vec::new();
    for eps in [0.4, 0.2, 0.1] {
        let p = ActionParams::new(GroupSpec::u1(), eps).unwrap();
        let z = partition_z(&p).unwrap();
        let f = |x: f64| {
            let q = C64::from_polar(1.0, x);
            (q - q.conj()) * C64::from_polar(1.0, alpha) * q * C64::from_polar(1.0, gamma)
        };
        let re = periodic_mean(|x| f(x).re * p.weight(x.cos()) / z, QUAD_TOL).unwrap();
        let im = periodic_mean(|x| f(x).im * p.weight(x.cos()) / z, QUAD_TOL).unwrap();
        gaps.push((C64::new(re, im) / (2.0 * eps * eps) - target).norm());
    }
    assert!(gaps.windows(2).all(|w| w[1] < w[0]), "{gaps:?}");
    assert!(gaps[2] < 0.05);
}

#[test]
fn second_convergence_lemma_on_u1() {
    let rows = lemma_j1_check(1.0, 0.8, 1.3, &[0.4, 0.2, 0.1]).unwrap();
    for w in rows.windows(2) {
        assert!(w[1].gap < w[0].gap, "{rows:?}");
    }
    for r in &rows {
        assert!((r.steps as f64 * r.epsilon * r.epsilon - 1.0).abs() <= r.epsilon);
    }
    // a1 = a2 = I: both sides vanish.
    let rows = lemma_j1_check(1.0, 0.0, 0.0, &[0.4, 0.2]).unwrap();
    for r in &rows {
        assert!(r.lhs.norm() < 1e-10 && r.rhs.norm() < 1e-8, "{r:?}");
    }
    // Right side against the wrapped-Gaussian derivative.
    let rhs = lemma_j1_rhs(1.0, 0.8, 1.3).unwrap();
    let want = C64::new(0.0, 1.0) * C64::from_polar(1.0, 0.8) * u1_heat_kernel_wrapped_derivative(1.3, 1.0);
    assert!((rhs - want).norm() < 1e-8);
}
