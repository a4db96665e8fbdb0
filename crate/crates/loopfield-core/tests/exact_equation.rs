use loopfield_core::driver::{make_lattice_approximation, rectangle_path, single_face_expectation, LoopFamily, SingleFaceValues};
use loopfield_core::equation::{assemble, evaluate_exact, EquationSpec, ExactU1};
use loopfield_core::action::{class_expectation, ActionParams, Torus};
use loopfield_core::group::GroupSpec;
use loopfield_core::loops::{Loop, LoopString};

#[test]
fn figure_eight_residual_is_exact() {
    for eps in [0.25, 0.125] {
        let ll = make_lattice_approximation(LoopFamily::FigureEight { t: [0.25, 1.5, 0.25, 1.5] }, eps).unwrap();
        let mut be = ExactU1::new(eps).unwrap();
        for x in 0..ll.lp.len() {
            let spec = EquationSpec::single(GroupSpec::u1(), ll.lp.clone(), x, eps);
            let r = evaluate_exact(&spec, &mut be).unwrap();
            assert!(r.residual.abs() < 1e-9, "eps {eps} x {x}: {}", r.residual);
        }
    }
}

#[test]
fn single_plaquette_nonabelian_identity() {
    for spec in [GroupSpec::u(2), GroupSpec::su(2), GroupSpec::so(3)] {
        for eps in [0.5, 1.0] {
            let p = ActionParams::new(spec, eps).unwrap();
            let v = SingleFaceValues::new(&p).unwrap();
            let torus = Torus::for_spec(spec).unwrap();
            let n = spec.n_f64();
            // E[W_p W_p] for one plaquette; distinct plaquettes are independent.
            let self_pair = class_expectation(&p, |a| (torus.trace(a).re / n).powi(2)).unwrap();
            let l = Loop::make_loop(&rectangle_path(0, 0, 1, 1)).unwrap();
            let eq = EquationSpec::single(spec, l.clone(), 0, eps);
            let terms = assemble(&eq).unwrap();
            let mut lhs = 0.0;
            let mut rhs = 0.0;
            for t in &terms {
                let val = match t.string.len() {
                    1 => single_face_expectation(&t.string.loops[0], &v).unwrap(),
                    2 => {
                        let q = &t.string.loops[1];
                        if *q == l || *q == l.inverse() {
                            self_pair
                        } else {
                            v.a_std * v.a_std
                        }
                    }
                    _ => unreachable!(),
                };
                if t.tag.is_lhs() {
                    lhs += t.coeff * val
                } else {
                    rhs += t.coeff * val
                }
            }
            assert!((lhs - rhs).abs() < 1e-9, "{spec} eps {eps}: {lhs} vs {rhs}");
            let has_expansions = terms.iter().any(|t| t.string.len() == 2);
            assert_eq!(has_expansions, spec == GroupSpec::su(2));
        }
    }
}

#[test]
fn random_loops_and_strings_are_exact() {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
    let mut worst: f64 = 0.0;
    for trial in 0..200 {
        let eps = [0.5, 0.25, 1.0][trial % 3];
        let mut be = ExactU1::new(eps).unwrap();
        let l1 = loopfield_core::loops::random_loop(&mut rng, 6 + trial % 20);
        let s = if trial % 2 == 0 {
            LoopString::single(l1)
        } else {
            let l2 = loopfield_core::loops::random_loop(&mut rng, 6 + trial % 13);
            LoopString::new(vec![l1, l2])
        };
        let k = rng.gen_range(0..s.len());
        let x = rng.gen_range(0..s.loops[k].len());
        let spec = EquationSpec::new(GroupSpec::u1(), s.clone(), k, x, eps);
        let r = evaluate_exact(&spec, &mut be).unwrap();
        worst = worst.max(r.residual.abs());
        assert!(r.residual.abs() < 1e-9, "trial {trial} {} k={k} x={x}: {} terms {:?}", s, r.residual,
            r.terms.iter().map(|t| (t.term.tag, t.term.coeff, t.value)).collect::<Vec<_>>());
    }
    println!("worst {worst:e}");
}
