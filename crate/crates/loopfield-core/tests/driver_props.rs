use std::collections::BTreeMap;
use std::f64::consts::PI;

use loopfield_core::action::{partition_z, periodic_mean, u1_heat_kernel_wrapped, wilson_density, ActionParams, Torus};
use loopfield_core::driver::*;
use loopfield_core::group::GroupSpec;
use loopfield_core::loops::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const AREAS: [f64; 4] = [0.25, 1.5, 0.25, 1.5];

fn graph(l: &Loop, eps: f64) -> PlanarLoopGraph {
    build_graph(&LoopString::single(l.clone()), eps).unwrap()
}

/// The same loop on a lattice twice as fine.
fn refine(l: &Loop) -> Loop {
    let mut path = Vec::new();
    let start = l.word()[0].start();
    let mut pos = (2 * start.0, 2 * start.1);
    for b in l.word() {
        push_run(&mut path, &mut pos, b.dir, 2);
    }
    Loop::make_loop(&path).unwrap()
}

/// Net signed multiplicity of every positively oriented bond.
fn multiplicities(s: &LoopString) -> BTreeMap<Bond, i32> {
    let mut m = BTreeMap::new();
    for l in &s.loops {
        for b in l.word() {
            let (p, fwd) = b.positive();
            *m.entry(p).or_insert(0) += if fwd { 1 } else { -1 };
        }
    }
    m
}

#[test]
fn graph_examples_and_euler_relation() {
    let p = Loop::make_loop(&rectangle_path(0, 0, 1, 1)).unwrap();
    let g = graph(&p, 0.25);
    assert_eq!(g.faces.len(), 1);
    assert_eq!((g.faces[0].area, g.faces[0].winding), (0.0625, 1));
    assert_eq!(g.euler_characteristic(), 2);
    assert_eq!(graph(&p.inverse(), 0.25).faces[0].winding, -1);

    for family in [LoopFamily::FigureEight { t: AREAS }, LoopFamily::FigureEightReversed { t: AREAS }] {
        for eps in [0.25, 0.125, 0.0625] {
            let ll = make_lattice_approximation(family, eps).unwrap();
            assert_eq!(ll.graph.euler_characteristic(), 2);
            assert_eq!(ll.graph.faces.len(), 4);
            assert_eq!(ll.approx.windings, vec![0, 1, 0, -1]);
            let mut seen = ll.approx.face_map.clone();
            seen.sort();
            seen.dedup();
            assert_eq!(seen.len(), 4);
            for (i, &t) in AREAS.iter().enumerate() {
                assert!((ll.approx.lattice_areas[i] - t).abs() < 1e-12, "{family:?} eps {eps}");
                let f = &ll.graph.faces[ll.approx.face_map[i]];
                assert_eq!(f.plaquettes as f64 * eps * eps, f.area);
            }
            assert_eq!(ll.approx.crossing_bonds, 2);
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(41);
    for _ in 0..200 {
        let steps = rng.gen_range(4..40);
        let l = random_loop(&mut rng, steps);
        let g = graph(&l, 0.5);
        assert_eq!(g.euler_characteristic(), 2, "{l}");
        assert!(g.faces.iter().all(|f| f.area > 0.0));
    }
}

#[test]
fn windings_jump_by_bond_multiplicity() {
    let mut rng = ChaCha8Rng::seed_from_u64(43);
    for _ in 0..200 {
        let steps = rng.gen_range(4..40);
        let s = LoopString::single(random_loop(&mut rng, steps));
        let field = winding_field(&s);
        let w = |c: (i32, i32)| field.get(&c).copied().unwrap_or(0);
        for (b, m) in multiplicities(&s) {
            let left = w(b.cell(Side::Left));
            let right = w(b.cell(Side::Right));
            assert_eq!(left - right, m, "{b:?}");
        }
    }
}

#[test]
fn doubled_loop_doubles_windings() {
    let mut rng = ChaCha8Rng::seed_from_u64(47);
    for _ in 0..100 {
        let steps = rng.gen_range(4..30);
        let l = random_loop(&mut rng, steps);
        let mut twice = l.word().to_vec();
        twice.extend_from_slice(l.word());
        let d = Loop::make_loop(&twice).unwrap();
        let single = winding_field(&LoopString::single(l.clone()));
        let double = winding_field(&LoopString::single(d));
        assert_eq!(single.len(), double.len());
        for (c, n) in single {
            assert_eq!(double[&c], 2 * n);
        }
    }
}

#[test]
fn u1_backends_on_simple_and_trivial_loops() {
    let eps = 0.25;
    let table = U1Table::new(eps, 4).unwrap();
    let l = Loop::make_loop(&rectangle_path(0, 0, 4, 4)).unwrap();
    let g = graph(&l, eps);
    let d = u1_expectation_discrete(&g, &table).unwrap();
    assert!((d - table.coeff(1).unwrap().powi(16)).abs() < 1e-15);
    assert!((u1_expectation_continuum(&g.area_windings()) - (-0.5f64).exp()).abs() < 1e-15);
    assert_eq!(u1_expectation_string(&LoopString::new(vec![]), &table).unwrap(), 1.0);
    assert_eq!(u1_expectation_continuum(&[]), 1.0);
    assert!((u1_expectation_string(&LoopString::single(l), &table).unwrap() - d).abs() < 1e-15);

    let ll = make_lattice_approximation(LoopFamily::Rectangle { t: 1.0 }, 0.25).unwrap();
    assert_eq!(ll.lp.len(), 16);
    assert_eq!(ll.graph.faces[0].plaquettes, 16);
}

#[test]
fn figure_eight_continuum_against_face_quadrature() {
    let faces = make_lattice_approximation(LoopFamily::FigureEight { t: AREAS }, 0.25).unwrap().graph.area_windings();
    let want = u1_expectation_continuum(&faces);
    let lobes: f64 = AREAS[1] + AREAS[3];
    assert!((want - (-lobes / 2.0).exp()).abs() < 1e-15);
    let mut prod = 1.0;
    for &(t, n) in &faces {
        prod *= periodic_mean(|x| (n as f64 * x).cos() * u1_heat_kernel_wrapped(if x > PI { x - 2.0 * PI } else { x }, t), 1e-13)
            .unwrap();
    }
    assert!((prod - want).abs() < 1e-10);
}

/// `int prod_F e^{i n_F theta_F} S_{k_F}(theta_F)` on a grid, with `S_k` the
/// k-fold circular convolution of the Wilson density.
fn brute_force(faces: &[(u64, i32)], eps: f64, m: usize) -> f64 {
    let p = ActionParams::new(GroupSpec::u1(), eps).unwrap();
    let z = partition_z(&p).unwrap();
    let grid: Vec<f64> = (0..m).map(|i| 2.0 * PI * i as f64 / m as f64).collect();
    let s: Vec<f64> = grid.iter().map(|&x| wilson_density(&p, z, &Torus::U1.element(&[x]))).collect();
    let power = |k: u64| {
        let mut cur = s.clone();
        for _ in 1..k {
            let mut next = vec![0.0; m];
            for (i, out) in next.iter_mut().enumerate() {
                *out = (0..m).map(|j| cur[j] * s[(i + m - j) % m]).sum::<f64>() / m as f64;
            }
            cur = next;
        }
        cur
    };
    let dens: Vec<Vec<f64>> = faces.iter().map(|f| power(f.0)).collect();
    let mut total = 0.0;
    let mut idx = vec![0usize; faces.len()];
    loop {
        let mut phase = 0.0;
        let mut w = 1.0;
        for (k, &i) in idx.iter().enumerate() {
            phase += faces[k].1 as f64 * grid[i];
            w *= dens[k][i];
        }
        total += phase.cos() * w;
        let mut k = 0;
        loop {
            if k == idx.len() {
                return total / (m as f64).powi(faces.len() as i32);
            }
            idx[k] += 1;
            if idx[k] < m {
                break;
            }
            idx[k] = 0;
            k += 1;
        }
    }
}

#[test]
fn u1_discrete_matches_nested_circle_quadrature() {
    let eps = 0.5;
    let table = U1Table::new(eps, 4).unwrap();
    let mut cases = vec![Loop::make_loop(&rectangle_path(0, 0, 2, 1)).unwrap()];
    // Square with a clockwise inner square traversed in the same word: windings 1 and 2.
    let mut p = rectangle_path(0, 0, 3, 3);
    p.extend(rectangle_path(0, 0, 1, 1));
    cases.push(Loop::make_loop(&p).unwrap());
    // Figure eight with two lobes of opposite orientation.
    cases.push(Loop::parse("(0,0):ULLDRRURRDLL").unwrap());
    // Three faces: windings 1, 2 and an inner hole.
    let mut p = rectangle_path(0, 0, 4, 4);
    p.extend(rectangle_path(0, 0, 2, 2));
    cases.push(Loop::make_loop(&p).unwrap());
    for l in &cases {
        let g = graph(l, eps);
        assert!(g.faces.len() <= 3);
        let faces: Vec<(u64, i32)> = g.faces.iter().map(|f| (f.plaquettes, f.winding)).collect();
        let exact = u1_expectation_discrete(&g, &table).unwrap();
        let grid = if faces.len() == 3 { 48 } else { 96 };
        let brute = brute_force(&faces, eps, grid);
        assert!((exact - brute).abs() < 1e-8, "{l}: {exact} vs {brute} ({faces:?})");
    }
}

#[test]
fn refinement_leaves_continuum_values_unchanged() {
    let mut rng = ChaCha8Rng::seed_from_u64(53);
    for _ in 0..50 {
        let steps = rng.gen_range(4..30);
        let l = random_loop(&mut rng, steps);
        let coarse = graph(&l, 0.5);
        let fine = graph(&refine(&l), 0.25);
        let a = u1_expectation_continuum(&coarse.area_windings());
        let b = u1_expectation_continuum(&fine.area_windings());
        assert!((a - b).abs() < 1e-12, "{l}");
        assert_eq!(coarse.faces.len(), fine.faces.len());
        // Discrete backend: same faces, plaquette counts scale by 4 at fixed area.
        for (f, g) in coarse.faces.iter().zip(&fine.faces) {
            assert_eq!((f.area, f.winding), (g.area, g.winding));
            assert_eq!(4 * f.plaquettes, g.plaquettes);
        }
    }
    // Starting the word at a different bond changes nothing.
    let l = make_lattice_approximation(LoopFamily::FigureEight { t: AREAS }, 0.125).unwrap().lp;
    let table = U1Table::new(0.125, 4).unwrap();
    let v = u1_expectation_discrete(&graph(&l, 0.125), &table).unwrap();
    for k in [1, 7, 20] {
        let r = Loop::make_loop(&l.rotated_at(k)).unwrap();
        assert_eq!(u1_expectation_discrete(&graph(&r, 0.125), &table).unwrap(), v);
    }
}

#[test]
fn simple_loop_closed_forms() {
    let t = 0.64;
    let u = simple_loop_expectation(GroupSpec::u(2), t, Eval::Continuum).unwrap();
    assert!((u - (-t / 2.0f64).exp()).abs() < 1e-15);
    let su = simple_loop_expectation(GroupSpec::su(2), t, Eval::Continuum).unwrap();
    assert!((su - (-3.0 * t / 8.0f64).exp()).abs() < 1e-15);
    let so = simple_loop_expectation(GroupSpec::so(3), t, Eval::Continuum).unwrap();
    assert!((so - (-t / 3.0f64).exp()).abs() < 1e-15);
    for spec in [GroupSpec::u1(), GroupSpec::u(2), GroupSpec::su(2), GroupSpec::so(3)] {
        let mut gaps = Vec::new();
        for eps in [0.4, 0.2, 0.1, 0.05] {
            let d = simple_loop_expectation(spec, t, Eval::Discrete(eps)).unwrap();
            let c = simple_loop_expectation(spec, t, Eval::Continuum).unwrap();
            gaps.push((d - c).abs());
        }
        assert!(gaps.windows(2).all(|w| w[1] < w[0]), "{spec}: {gaps:?}");
    }
    assert!(matches!(simple_loop_expectation(GroupSpec::u1(), 0.3, Eval::Discrete(0.25)), Err(DriverError::NotIntegral { .. })));
}

#[test]
fn area_derivatives_analytic_vs_finite_difference() {
    let mut rng = ChaCha8Rng::seed_from_u64(59);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let steps = rng.gen_range(4..30);
        let l = random_loop(&mut rng, steps);
        let faces = graph(&l, 0.25).area_windings();
        for i in 0..faces.len() {
            let a = area_derivative_u1(&faces, i, DerivativeMethod::Analytic).unwrap();
            let f = area_derivative_u1(&faces, i, DerivativeMethod::FiniteDifference).unwrap();
            worst = worst.max((a - f).abs());
        }
    }
    assert!(worst < 1e-6, "{worst}");
    for spec in [GroupSpec::u(2), GroupSpec::su(2)] {
        let a = simple_loop_area_derivative(spec, 1.0, DerivativeMethod::Analytic);
        let f = simple_loop_area_derivative(spec, 1.0, DerivativeMethod::FiniteDifference);
        assert!((a - f).abs() < 1e-6);
    }
    let a = simple_loop_area_derivative(GroupSpec::u1(), 1.0, DerivativeMethod::Analytic);
    assert!((a + (-0.5f64).exp() / 2.0).abs() < 1e-15);
    assert!(matches!(area_derivative_u1(&[(1.0, 1)], 3, DerivativeMethod::Analytic), Err(DriverError::NoSuchFace(3))));
}

#[test]
fn figure_eight_discrete_values_converge() {
    for family in [LoopFamily::FigureEight { t: AREAS }, LoopFamily::FigureEightReversed { t: AREAS }] {
        let mut gaps = Vec::new();
        for eps in [0.25, 0.125, 0.0625] {
            let ll = make_lattice_approximation(family, eps).unwrap();
            let table = U1Table::new(eps, 4).unwrap();
            let d = u1_expectation_discrete(&ll.graph, &table).unwrap();
            gaps.push((d - u1_expectation_continuum(&ll.graph.area_windings())).abs());
        }
        assert!(gaps.windows(2).all(|w| w[1] < w[0]), "{family:?}: {gaps:?}");
    }
}

#[test]
fn infeasible_geometry_is_reported() {
    assert!(matches!(
        make_lattice_approximation(LoopFamily::Rectangle { t: 0.3 }, 0.25),
        Err(DriverError::Infeasible(_))
    ));
    assert!(make_lattice_approximation(LoopFamily::FigureEight { t: [0.5; 4] }, 0.25).is_err());
    assert!(make_lattice_approximation(LoopFamily::FigureEight { t: AREAS }, 0.3).is_err());
}

#[test]
fn graph_dump_lists_faces() {
    let ll = make_lattice_approximation(LoopFamily::FigureEight { t: AREAS }, 0.25).unwrap();
    let text = ll.graph.dump();
    let v: Vec<&str> = text.lines().filter(|l| l.contains("\"winding\"")).collect();
    assert_eq!(v.len(), 4);
    assert!(text.contains("\"euler\": 2"));
}
