use loopfield_core::group::*;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn specs() -> Vec<GroupSpec> {
    vec![
        GroupSpec::u1(),
        GroupSpec::u(2),
        GroupSpec::u(3),
        GroupSpec::su(2),
        GroupSpec::su(3),
        GroupSpec::so(2),
        GroupSpec::so(3),
    ]
}

fn block_max(m: &Mat, n: usize, f: impl Fn(usize, usize, C64) -> f64) -> f64 {
    let mut worst: f64 = 0.0;
    for i in 0..n {
        for j in 0..n {
            worst = worst.max(f(i, j, m[(i, j)]));
        }
    }
    worst
}

/// Mean and standard error.
fn mean_sigma(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    let v = xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1.0);
    (m, (v / n).sqrt())
}

#[test]
fn closure_over_ten_thousand_inputs() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for spec in specs() {
        for _ in 0..10_000 / 7 + 1 {
            let a = haar_sample(spec, &mut rng);
            let b = haar_sample(spec, &mut rng);
            let x = gaussian_lie_sample(spec, &mut rng, 1.0);
            assert!(a.mul(&b).is_member(spec, 1e-12));
            assert!(a.inverse().is_member(spec, 1e-12));
            assert!(exp_map(spec, &x).is_member(spec, 1e-12));
            let c = a.mul(&a.inverse()).trace_normalized();
            assert!((c - C64::new(1.0, 0.0)).norm() < 1e-12);
        }
    }
}

proptest! {
    #[test]
    fn exp_of_opposite_vectors_cancel(seed in any::<u64>(), which in 0usize..7, scale in 0.01f64..3.0) {
        let spec = specs()[which];
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = gaussian_lie_sample(spec, &mut rng, scale);
        let p = exp_map(spec, &x).mul(&exp_map(spec, &x.scaled(-1.0)));
        let d = block_max(p.matrix(), spec.n, |i, j, z| (z - if i == j { C64::new(1.0, 0.0) } else { C64::new(0.0, 0.0) }).norm());
        prop_assert!(d < 1e-12);
    }

    #[test]
    fn identity_is_neutral(seed in any::<u64>(), which in 0usize..7) {
        let spec = specs()[which];
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let q = haar_sample(spec, &mut rng);
        let id = GroupElement::identity(spec);
        prop_assert_eq!(id.mul(&q), q);
        prop_assert_eq!(q.mul(&id), q);
        prop_assert_eq!(id.inverse(), id);
    }
}

#[test]
fn bases_are_orthonormal_and_span() {
    for spec in specs() {
        let basis = lie_basis(spec);
        assert_eq!(basis.len(), spec.algebra_dim(), "{spec}");
        for (i, x) in basis.iter().enumerate() {
            let skew = block_max(&(x + x.adjoint()), spec.n, |_, _, z| z.norm());
            assert!(skew < 1e-15, "{spec}: not skew-Hermitian");
            if spec.family != Family::U {
                assert!(x.trace().norm() < 1e-15, "{spec}: not traceless");
            }
            if spec.family == Family::SO {
                assert!(block_max(x, spec.n, |_, _, z| z.im.abs()) == 0.0);
            }
            for (j, y) in basis.iter().enumerate() {
                let g = inner_product(spec, x, y);
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((g - want).abs() < 1e-12, "{spec} <L{i},L{j}> = {g}");
            }
        }
    }
    let n = |s: GroupSpec| s.algebra_dim();
    assert_eq!(n(GroupSpec::u1()), 1);
    assert_eq!(n(GroupSpec::su(2)), 3);
    assert_eq!(n(GroupSpec::so(3)), 3);
    assert_eq!(n(GroupSpec::u(3)), 9);
}

#[test]
fn casimir_sum_over_basis() {
    for spec in specs() {
        let mut s = Mat::zeros();
        for l in lie_basis(spec) {
            s += l * l;
        }
        let c = casimir_standard(spec);
        let d = block_max(&s, spec.n, |i, j, z| (z - if i == j { C64::new(c, 0.0) } else { C64::new(0.0, 0.0) }).norm());
        assert!(d < 1e-10, "{spec}: {d}");
    }
    assert_eq!(casimir_standard(GroupSpec::u(2)), -1.0);
    assert_eq!(casimir_standard(GroupSpec::u(3)), -1.0);
    assert!((casimir_standard(GroupSpec::su(2)) + 0.75).abs() < 1e-15);
    assert!((casimir_standard(GroupSpec::so(3)) + 2.0 / 3.0).abs() < 1e-15);
}

#[test]
fn haar_moments_su2_and_u1() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let n = 1_000_000;
    let su2 = GroupSpec::su(2);
    let mut re = Vec::with_capacity(n);
    let mut sq = Vec::with_capacity(n);
    for _ in 0..n {
        let q = haar_sample(su2, &mut rng);
        re.push(q.trace_normalized().re);
        sq.push(q.trace().norm_sqr());
    }
    let (m, s) = mean_sigma(&re);
    assert!(m.abs() <= 3.0 * s, "Re tr mean {m} +- {s}");
    let (m, s) = mean_sigma(&sq);
    assert!((m - 1.0).abs() <= 3.0 * s, "|Tr|^2 mean {m} +- {s}");

    let u1 = GroupSpec::u1();
    let mut chi = Vec::with_capacity(n);
    for _ in 0..n {
        chi.push(haar_sample(u1, &mut rng).trace().re);
    }
    let (m, s) = mean_sigma(&chi);
    assert!(m.abs() <= 3.0 * s, "chi_1 mean {m} +- {s}");
}

#[test]
fn u1_angles_are_uniform_by_kolmogorov_smirnov() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let n = 20_000;
    let mut xs: Vec<f64> = (0..n).map(|_| haar_sample(GroupSpec::u1(), &mut rng).trace().arg()).collect();
    xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let pi = std::f64::consts::PI;
    let mut d: f64 = 0.0;
    for (i, x) in xs.iter().enumerate() {
        let f = (x + pi) / (2.0 * pi);
        d = d.max((f - i as f64 / n as f64).abs()).max(((i + 1) as f64 / n as f64 - f).abs());
    }
    // Asymptotic 1% critical value.
    assert!(d * (n as f64).sqrt() < 1.628, "KS statistic {d}");
}

#[test]
fn exp_map_basics() {
    for spec in specs() {
        let z = exp_map(spec, &LieVector::zero(spec));
        assert_eq!(z, GroupElement::identity(spec));
    }
    let u1 = GroupSpec::u1();
    let l = lie_basis(u1)[0];
    assert!((inner_product(u1, &l, &l) - 1.0).abs() < 1e-15);
    for theta in [0.3, -1.2, 2.5] {
        let g = exp_map(u1, &LieVector { coords: vec![theta] });
        assert!((g.trace().arg() - theta).abs() < 1e-13);
    }
}

#[test]
fn gaussian_lie_samples_reproduce_casimir() {
    for (spec, seed) in [(GroupSpec::u(2), 1u64), (GroupSpec::su(2), 2)] {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let basis = lie_basis(spec);
        let n = 1_000_000;
        let mut diag = vec![Vec::with_capacity(n); spec.n];
        let mut off = Vec::with_capacity(n);
        let mut coord0 = Vec::with_capacity(n);
        for _ in 0..n {
            let x = gaussian_lie_sample(spec, &mut rng, 1.0);
            coord0.push(x.coords[0]);
            let mut a = Mat::zeros();
            for (c, l) in x.coords.iter().zip(&basis) {
                a += l * C64::new(*c, 0.0);
            }
            let a2 = a * a;
            for (i, d) in diag.iter_mut().enumerate() {
                d.push(a2[(i, i)].re);
            }
            off.push(a2[(0, 1)].re);
        }
        let c = casimir_standard(spec);
        for d in &diag {
            let (m, s) = mean_sigma(d);
            assert!((m - c).abs() <= 3.0 * s, "{spec}: diagonal {m} +- {s}, want {c}");
        }
        let (m, s) = mean_sigma(&off);
        assert!(m.abs() <= 3.0 * s, "{spec}: off-diagonal {m} +- {s}");
        let (m, s) = mean_sigma(&coord0);
        assert!(m.abs() <= 3.0 * s);
    }
}

#[test]
fn derivative_of_trace_and_constants() {
    let spec = GroupSpec::u(2);
    let id = GroupElement::identity(spec);
    for l in lie_basis(spec) {
        let d = directional_derivative(spec, |g: &GroupElement| g.trace_normalized(), &l, &id, 1e-5);
        let want = l.trace() / 2.0;
        assert!((d - want).norm() < 1e-9);
        let c = directional_derivative(spec, |_: &GroupElement| C64::new(3.0, 0.0), &l, &id, 1e-5);
        assert_eq!(c, C64::new(0.0, 0.0));
    }
    let su = GroupSpec::su(2);
    for l in lie_basis(su) {
        let d = directional_derivative(su, |g: &GroupElement| g.trace_normalized(), &l, &GroupElement::identity(su), 1e-5);
        assert!(d.norm() < 1e-9);
    }
    // U(1): L chi(a) = i chi(a) for the unit-norm generator.
    let u1 = GroupSpec::u1();
    let l = lie_basis(u1)[0];
    let a = GroupElement::from_angle(0.7);
    let d = directional_derivative(u1, |g: &GroupElement| g.trace(), &l, &a, 1e-5);
    assert!((d - C64::new(0.0, 1.0) * a.trace()).norm() < 1e-9);
}

#[test]
fn central_difference_error_ratio_is_four() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for spec in [GroupSpec::u(2), GroupSpec::su(2), GroupSpec::so(3)] {
        let a = haar_sample(spec, &mut rng);
        let x = lie_basis(spec)[rng.gen_range(0..spec.algebra_dim())];
        let f = |g: &GroupElement| g.mul(g).trace();
        let exact = (x * a.matrix() * a.matrix()).trace() * 2.0;
        let h = 1e-2;
        let e1 = (directional_derivative(spec, f, &x, &a, h) - exact).norm();
        let e2 = (directional_derivative(spec, f, &x, &a, h / 2.0) - exact).norm();
        let ratio = e1 / e2;
        assert!((ratio - 4.0).abs() < 0.05, "{spec}: ratio {ratio}");
        let r = directional_derivative_richardson(spec, f, &x, &a, h);
        assert!((r - exact).norm() < e2 / 100.0);
    }
}
