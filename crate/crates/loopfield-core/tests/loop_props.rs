use loopfield_core::driver::{build_graph, make_lattice_approximation, merger_pair, rectangle_path, side_is_inside, LoopFamily};
use loopfield_core::loops::*;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn lp(text: &str) -> Loop {
    Loop::parse(text).unwrap()
}

fn cat(parts: &[&[Bond]]) -> Vec<Bond> {
    parts.iter().flat_map(|p| p.iter().copied()).collect()
}

fn is_valid(l: &Loop) -> bool {
    if l.is_trivial() {
        return true;
    }
    check_closed_path(l.word()).is_ok()
        && reduce_cyclic(l.word()).len() == l.len()
        && Loop::make_loop(l.word()).as_ref() == Ok(l)
}

/// `sum_F n_F t_F` in plaquette units.
fn signed_cells(l: &Loop) -> i64 {
    let g = build_graph(&LoopString::single(l.clone()), 1.0).unwrap();
    g.faces.iter().map(|f| f.winding as i64 * f.plaquettes as i64).sum()
}

fn same_orientation_pairs(l: &Loop) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    for (x, b) in l.word().iter().enumerate() {
        for (y, same) in l.occurrences(*b) {
            if same && y > x {
                out.push((x, y));
            }
        }
    }
    out
}

fn opposite_pairs(l: &Loop) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    for (x, b) in l.word().iter().enumerate() {
        for (y, same) in l.occurrences(*b) {
            if !same {
                out.push((x, y));
            }
        }
    }
    out
}

proptest! {
    #[test]
    fn canonicalization_is_idempotent(seed in any::<u64>(), steps in 4usize..40, rot in 0usize..1000) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let l = random_loop(&mut rng, steps);
        prop_assert_eq!(Loop::make_loop(l.word()).unwrap(), l.clone());
        let r = l.rotated_at(rot % l.len());
        prop_assert_eq!(Loop::make_loop(&r).unwrap(), l.clone());
        prop_assert!(is_valid(&l));
    }

    #[test]
    fn text_round_trip_is_exact(seed in any::<u64>(), steps in 1usize..40) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let l = random_loop(&mut rng, steps);
        let text = l.to_text();
        let back = Loop::parse(&text).unwrap();
        prop_assert_eq!(back.word(), l.word());
        prop_assert_eq!(back.to_text(), text);
    }

    #[test]
    fn operations_are_stable_under_input_rotation(seed in any::<u64>(), steps in 4usize..30, rot in 0usize..1000) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let l = random_loop(&mut rng, steps);
        let again = Loop::make_loop(&l.rotated_at(rot % l.len())).unwrap();
        for x in 0..l.len() {
            prop_assert_eq!(deformation_sets(&l, x).unwrap(), deformation_sets(&again, x).unwrap());
        }
        for (x, y) in same_orientation_pairs(&l) {
            prop_assert_eq!(split_positive(&l, x, y).unwrap(), split_positive(&again, x, y).unwrap());
        }
    }
}

#[test]
fn split_merge_duality_on_random_loops() {
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    let mut checked = 0;
    while checked < 1000 {
        let steps = rng.gen_range(8..60);
        let l = random_loop(&mut rng, steps);
        let pairs = same_orientation_pairs(&l);
        if pairs.is_empty() {
            continue;
        }
        let (x, y) = pairs[rng.gen_range(0..pairs.len())];
        let (first, second) = split_positive(&l, x, y).unwrap();
        assert!(is_valid(&first) && is_valid(&second));
        // first = e c a starts at raw index 0, second = b e ends at its last raw index.
        let w = l.word();
        let n = w.len();
        let first_raw: Vec<Bond> = core::iter::once(w[x]).chain((y + 1..x + n).map(|i| w[i % n])).collect();
        let second_raw: Vec<Bond> = (x + 1..=y).map(|i| w[i]).collect();
        let (f, off_f) = Loop::from_reduced_path(&first_raw).unwrap();
        let (s, off_s) = Loop::from_reduced_path(&second_raw).unwrap();
        assert_eq!((&f, &s), (&first, &second));
        let xf = (first.len() - off_f) % first.len();
        let ys = (second_raw.len() - 1 + second.len() - off_s) % second.len();
        assert_eq!(merge_positive(&first, xf, &second, ys).unwrap(), l);
        checked += 1;
    }
}

#[test]
fn random_operation_outputs_are_loops() {
    let mut rng = ChaCha8Rng::seed_from_u64(29);
    for _ in 0..300 {
        let steps = rng.gen_range(4..50);
        let l = random_loop(&mut rng, steps);
        for x in 0..l.len() {
            let (minus, plus) = deformation_sets(&l, x).unwrap();
            assert_eq!((minus.len(), plus.len()), (2, 2));
            for d in minus.iter().chain(&plus) {
                assert!(is_valid(&d.result), "{l} at {x}");
            }
            let (ep, em) = expansion_sets(&l, x).unwrap();
            for st in ep.iter().chain(&em) {
                assert_eq!(st.loops[0], l);
                assert_eq!(st.loops[1].len(), 4);
            }
        }
        for (x, y) in same_orientation_pairs(&l) {
            let (a, b) = split_positive(&l, x, y).unwrap();
            assert!(is_valid(&a) && is_valid(&b));
            assert!(is_valid(&twist_negative(&l, x, y).unwrap()));
            assert!(is_valid(&twist_negative(&l, y, x).unwrap()));
        }
        for (x, y) in opposite_pairs(&l) {
            let (a, b) = split_negative(&l, x, y).unwrap();
            assert!(is_valid(&a) && is_valid(&b));
            assert!(is_valid(&twist_positive(&l, x, y).unwrap()));
        }
        let other = random_loop(&mut rng, 12);
        for x in 0..l.len() {
            for y in other.occurrences(l.word()[x]).into_iter().map(|o| o.0) {
                assert!(is_valid(&merge_positive(&l, x, &other, y).unwrap()));
                assert!(is_valid(&merge_negative(&l, x, &other, y).unwrap()));
            }
        }
    }
}

#[test]
fn deformation_area_bookkeeping_on_rectangles() {
    for (w, h) in [(4, 4), (3, 5), (1, 2)] {
        let l = Loop::make_loop(&rectangle_path(0, 0, w, h)).unwrap();
        let t = (w * h) as i64;
        for x in 0..l.len() {
            let e = l.word()[x];
            let (minus, plus) = deformation_sets(&l, x).unwrap();
            for d in &minus {
                let inside = side_is_inside(&l, e, d.side);
                let want = if inside { t - 1 } else { t + 1 };
                if d.result.is_trivial() {
                    assert_eq!(want, 0);
                    continue;
                }
                assert_eq!(signed_cells(&d.result), want, "{l} at {x}, inside {inside}");
                let g = build_graph(&LoopString::single(d.result.clone()), 1.0).unwrap();
                assert!(g.faces.iter().all(|f| f.winding == 1));
            }
            for d in &plus {
                let inside = side_is_inside(&l, e, d.side);
                let want = if inside { t + 1 } else { t - 1 };
                assert_eq!(signed_cells(&d.result), want, "{l} at {x}, inside {inside}");
                assert_eq!(d.result.len(), l.len() + 4);
            }
        }
    }
}

#[test]
fn erasure_and_rotation_examples() {
    // a e e^-1 b -> a b
    let raw = parse_path("(0,0):RUDULD").unwrap();
    let l = Loop::make_loop(&raw).unwrap();
    assert_eq!(l, lp("(0,0):RULD"));
    // a e b e c and b e c a e are the same loop.
    let s = parse_path("(0,0):ULLDRRURRDLL").unwrap();
    let l = Loop::make_loop(&s).unwrap();
    for k in 0..s.len() {
        let rot: Vec<Bond> = (0..s.len()).map(|i| s[(i + k) % s.len()]).collect();
        assert_eq!(Loop::make_loop(&rot).unwrap(), l);
    }
    let p = lp("(0,0):RULD");
    assert_eq!(p.len(), 4);
    for k in 0..4 {
        assert_eq!(Loop::make_loop(&p.rotated_at(k)).unwrap(), p);
    }
    assert_eq!(Loop::make_loop(&parse_path("(0,0):RLUD").unwrap()), Err(LoopError::ErasesToEmpty));
    assert_eq!(Loop::make_loop(&parse_path("(0,0):RUL").unwrap()), Err(LoopError::NotClosed));
    assert!(Loop::make_loop(&[Bond::new(0, 0, Dir::R), Bond::new(5, 5, Dir::L)]).is_err());
}

/// Figure-eight `e b e c` through the bond from (0,0) to (0,1): `b` closes a
/// counter-clockwise lobe to the west, `c` a clockwise lobe to the east.
fn eight() -> (Loop, usize, usize) {
    let l = lp("(0,0):ULLDRRURRDLL");
    let e = Bond::new(0, 0, Dir::U);
    let occ = l.occurrences(e);
    assert_eq!(occ.len(), 2);
    assert!(occ.iter().all(|o| o.1));
    (l, occ[0].0, occ[1].0)
}

/// Locations of the stick bond `(0,0) -> (0,1)` and its inverse.
fn stick(l: &Loop) -> (usize, usize) {
    let e = Bond::new(0, 0, Dir::U);
    let occ = l.occurrences(e);
    let x = occ.iter().find(|o| o.1).unwrap().0;
    let y = occ.iter().find(|o| !o.1).unwrap().0;
    (x, y)
}

#[test]
fn split_examples() {
    let (l, x, y) = eight();
    let (p, q) = split_positive(&l, x, y).unwrap();
    let mut got = [p, q];
    got.sort();
    let mut want = [lp("(0,0):ULLDRR"), lp("(0,0):URRDLL")];
    want.sort();
    assert_eq!(got, want);
    assert_eq!(split_positive(&l, x, x), Err(LoopError::LocationMismatch));

    // a e b e^-1 c -> (a c, b): two squares joined by a one-bond stick.
    let l = lp("(0,0):UURDLDRDLU");
    let (x, y) = stick(&l);
    let (ac, b) = split_negative(&l, x, y).unwrap();
    assert_eq!(ac, lp("(0,0):RDLU"));
    assert_eq!(b, lp("(0,1):URDL"));
}

#[test]
fn merger_examples() {
    let l = lp("(0,0):RULD");
    let e = Bond::new(1, 0, Dir::U);
    let x = l.occurrences(e)[0].0;
    let rect = lp("(0,0):RRULLD");

    // Opposite orientation: (a e b, c e^-1 d) gives a e c^-1 d^-1 e b and a d c b.
    let m = lp("(1,0):RULD");
    let y = m.occurrences(e.inverse())[0].0;
    assert_eq!(merge_negative(&l, x, &m, y).unwrap(), rect);
    let pos = merge_positive(&l, x, &m, y).unwrap();
    assert_eq!(pos.len(), 8);
    assert_eq!(pos.occurrences(e).iter().filter(|o| o.1).count(), 2);

    // Same orientation: (a e b, c e d) gives a e d c e b and a c^-1 d^-1 b.
    let m = m.inverse();
    let y = m.occurrences(e)[0].0;
    assert!(m.occurrences(e)[0].1);
    assert_eq!(merge_negative(&l, x, &m, y).unwrap(), rect);
    let pos = merge_positive(&l, x, &m, y).unwrap();
    assert_eq!(pos.occurrences(e).iter().filter(|o| o.1).count(), 2);
    assert_eq!(signed_cells(&pos), 0);

    assert_eq!(merge_positive(&l, x, &lp("(5,5):RULD"), 0), Err(LoopError::LocationMismatch));
}

#[test]
fn merging_with_a_plaquette_is_a_deformation() {
    let l = Loop::make_loop(&rectangle_path(0, 0, 3, 2)).unwrap();
    for x in 0..l.len() {
        let e = l.word()[x];
        let (minus, plus) = deformation_sets(&l, x).unwrap();
        for (i, side) in [Side::Left, Side::Right].into_iter().enumerate() {
            let p = Loop::make_loop(&e.plaquette_word(side)).unwrap();
            let y = p.occurrences(e)[0].0;
            let want = merge_negative(&l, x, &p, y).unwrap();
            assert_eq!(minus[i].result, want);
            let pi = p.inverse();
            let y = pi.occurrences(e.inverse())[0].0;
            assert_eq!(plus[i].result, merge_positive(&l, x, &pi, y).unwrap());
        }
    }
}

#[test]
fn twist_examples() {
    let (l, x, y) = eight();
    // a e b e c -> a b^-1 c: the west lobe reversed, glued to the east lobe.
    // Which lobe plays `b` depends on the order of the two locations.
    let t = twist_negative(&l, x, y).unwrap();
    let u = twist_negative(&l, y, x).unwrap();
    assert!(t.occurrences(Bond::new(0, 0, Dir::U)).is_empty());
    let rect = lp("(-2,0):RRRRULLLLD");
    let mut got = [t.clone(), u.clone()];
    got.sort();
    let mut want = [rect.clone(), rect.inverse()];
    want.sort();
    assert_eq!(got, want);
    assert_eq!(signed_cells(&t) + signed_cells(&u), 0);
    assert_eq!(signed_cells(&l), 0);
    // a e b e^-1 c -> a e b^-1 e^-1 c.
    let l = lp("(0,0):UURDLDRDLU");
    let (x, y) = stick(&l);
    let t = twist_positive(&l, x, y).unwrap();
    assert_eq!(t, lp("(0,0):URULDDRDLU"));
    assert_eq!(twist_positive(&l, x, x), Err(LoopError::LocationMismatch));
}

#[test]
fn expansion_examples() {
    let l = Loop::make_loop(&rectangle_path(0, 0, 2, 2)).unwrap();
    let e = l.word()[0];
    let (plus, minus) = expansion_sets(&l, 0).unwrap();
    assert_eq!((plus.len(), minus.len()), (2, 2));
    for st in &minus {
        assert_eq!(st.loops[0], l);
        assert!(st.loops[1].occurrences(e).iter().any(|o| o.1));
    }
    for st in &plus {
        assert!(st.loops[1].occurrences(e).iter().any(|o| !o.1));
    }
}

#[test]
fn string_lifts() {
    let (l, x, y) = eight();
    let other = lp("(10,10):RULD");
    let s = LoopString::new(vec![other.clone(), l.clone()]);
    let split = lift_unary(&s, 1, StringOp::SplitPositive, x, y).unwrap();
    assert_eq!(split.len(), 3);
    assert_eq!(split.loops[0], other);
    let (minus, _) = lift_deformations(&s, 1, 0).unwrap();
    for (_, st) in minus {
        assert_eq!(st.loops[0], other);
    }
}

#[test]
fn lattice_figure_eight_lobes_and_remerge() {
    for eps in [0.25, 0.125] {
        let ll = make_lattice_approximation(LoopFamily::FigureEight { t: [0.25, 1.5, 0.25, 1.5] }, eps).unwrap();
        let segs = ll.segments.unwrap();
        let an = ll.annotated.unwrap();
        let (l1, l2) = an.lobes().unwrap();
        let a = Loop::make_loop(&cat(&[&segs.e, &segs.e1, &segs.a, &segs.e4_inv])).unwrap();
        let b = Loop::make_loop(&cat(&[&segs.e, &segs.e2, &segs.b, &segs.e3_inv])).unwrap();
        let mut got = [l1.clone(), l2.clone()];
        got.sort();
        let mut want = [a, b];
        want.sort();
        assert_eq!(got, want);
        // Re-merging at the shared edge gives back (e3)^-1 e e2 B (e4)^-1 e e1 A.
        let (x, y) = (an.ann.e_first[0], an.ann.e_second[0]);
        let (p, q) = split_positive(&an.lp, x, y).unwrap();
        let e = an.lp.word()[x];
        let once = |l: &Loop| {
            let occ: Vec<usize> = l.occurrences(e).into_iter().filter(|o| o.1).map(|o| o.0).collect();
            assert_eq!(occ.len(), 1);
            occ[0]
        };
        let (xp, yq) = (once(&p), once(&q));
        assert_eq!(merge_positive(&p, xp, &q, yq).unwrap(), an.lp);
        let l = Loop::make_loop(&cat(&[&segs.e, &segs.e1, &segs.a, &segs.e4_inv, &segs.e, &segs.e2, &segs.b, &segs.e3_inv])).unwrap();
        assert_eq!(l, an.lp);
    }
}

#[test]
fn merging_two_loops_through_a_shared_edge() {
    // (e X, e Y) -> e Y e X for the two loops that share the segment (0,-1) -> (0,1).
    let (s, _) = merger_pair(4).unwrap();
    let e = Bond::new(0, -1, Dir::U);
    let (l1, l2) = (&s.loops[0], &s.loops[1]);
    let x = l1.occurrences(e)[0].0;
    let y = l2.occurrences(e)[0].0;
    let mut want = vec![e];
    want.extend_from_slice(&l2.rotated_at(y)[1..]);
    want.push(e);
    want.extend_from_slice(&l1.rotated_at(x)[1..]);
    let merged = merge_positive(l1, x, l2, y).unwrap();
    assert_eq!(merged, Loop::make_loop(&want).unwrap());
    assert_eq!(signed_cells(&merged), signed_cells(l1) + signed_cells(l2));
    let lifted = lift_merge(&s, 0, x, 1, y, true).unwrap();
    assert_eq!(lifted.loops, vec![merged]);
}

#[test]
fn compatible_triple_counts_and_adjacency() {
    for eps in [0.25, 0.125, 0.0625] {
        for family in [LoopFamily::FigureEight { t: [0.25, 1.5, 0.25, 1.5] }, LoopFamily::FigureEightReversed { t: [0.25, 1.5, 0.25, 1.5] }] {
            let an = make_lattice_approximation(family, eps).unwrap().annotated.unwrap();
            let a = &an.ann;
            let triples = compatible_triples(&an);
            let want = a.e_first.len() * a.e1.len() * a.e3_inv.len() + a.e_second.len() * a.e2.len() * a.e4_inv.len();
            assert_eq!(triples.len(), want);
            if a.e1.len() == a.e3_inv.len() && a.e2.len() == a.e4_inv.len() && a.e1.len() == a.e2.len() {
                let k = a.e1.len();
                assert_eq!(triples.len(), a.e_first.len() * 2 * k * k);
            }
            let n = an.lp.len();
            for t in &triples {
                let (c, near, far) = match t.kind {
                    TripleKind::First => (&a.e_first, &a.e1, &a.e3_inv),
                    TripleKind::Second => (&a.e_second, &a.e2, &a.e4_inv),
                };
                assert!(c.contains(&t.center) && near.contains(&t.near) && far.contains(&t.far));
                // far edge ends where the center edge begins, near edge starts where it ends.
                assert_eq!((*far.last().unwrap() + 1) % n, c[0]);
                assert_eq!((*c.last().unwrap() + 1) % n, near[0]);
            }
        }
    }
}

#[test]
fn single_bond_crossing_edge_is_its_own_center() {
    let seg = |t: &str| parse_path(t).unwrap();
    let e = seg("(0,0):U");
    let al = AnnotatedLoop::from_segments(
        &e,
        &seg("(0,1):L"),
        &seg("(-1,1):LDR"),
        &seg("(-1,0):R"),
        &seg("(0,1):R"),
        &seg("(1,1):RDL"),
        &seg("(1,0):L"),
    )
    .unwrap();
    assert_eq!(al.lp, eight().0);
    let triples = compatible_triples(&al);
    assert_eq!(triples.len(), 2);
    for t in &triples {
        assert_eq!(al.lp.word()[t.center], e[0]);
    }
    assert_ne!(triples[0].center, triples[1].center);
}
