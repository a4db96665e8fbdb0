//! Golden fixtures: loop-operation cases built from explicit segment words,
//! loop-graph dumps and character-coefficient caches.

use std::fs;
use std::path::{Path, PathBuf};

use loopfield_core::action::{ActionParams, CharCoeffTable};
use loopfield_core::driver::{make_lattice_approximation, merger_pair, LoopFamily};
use loopfield_core::loops::{
    deformation_sets, expansion_sets, invert_word, merge_negative, merge_positive, path_from_moves, split_negative,
    split_positive, twist_negative, twist_positive, Bond, Loop, LoopString,
};

use crate::Error;

/// One surgery applied to concrete loops, with the output predicted by the
/// segment formula and the output of the loop-algebra routine.
#[derive(Debug, Clone, PartialEq)]
pub struct LoopOpCase {
    pub name: String,
    pub op: String,
    pub inputs: Vec<String>,
    pub locations: Vec<usize>,
    pub expected: Vec<String>,
    pub actual: Vec<String>,
}

impl LoopOpCase {
    pub fn matches(&self) -> bool {
        self.expected == self.actual
    }

    pub fn line(&self) -> String {
        let locs: Vec<String> = self.locations.iter().map(|x| x.to_string()).collect();
        format!(
            "{}\t{}\t{}\t{}\t{}",
            self.name,
            self.op,
            self.inputs.join(";"),
            locs.join(","),
            self.expected.join(";")
        )
    }
}

fn seg(start: (i32, i32), moves: &str) -> Result<Vec<Bond>, Error> {
    path_from_moves(start, moves).ok_or_else(|| Error::Computation(format!("bad moves {moves}")))
}

fn cat(parts: &[&[Bond]]) -> Vec<Bond> {
    parts.iter().flat_map(|p| p.iter().copied()).collect()
}

/// A loop given as consecutive segments, with the canonical location of the
/// first bond of each segment.
struct Segmented {
    lp: Loop,
    starts: Vec<usize>,
}

fn segmented(parts: &[&[Bond]]) -> Result<Segmented, Error> {
    let raw = cat(parts);
    let (lp, offset) = Loop::from_reduced_path(&raw)?;
    let n = raw.len();
    let mut starts = Vec::with_capacity(parts.len());
    let mut i = 0;
    for p in parts {
        starts.push((i + n - offset) % n);
        i += p.len();
    }
    Ok(Segmented { lp, starts })
}

fn text(parts: &[&[Bond]]) -> Result<String, Error> {
    Ok(Loop::make_loop(&cat(parts))?.to_text())
}

fn sorted(mut v: Vec<String>) -> Vec<String> {
    v.sort();
    v
}

fn string_text(s: &LoopString) -> String {
    let mut parts: Vec<String> = s.loops.iter().map(Loop::to_text).collect();
    parts.sort();
    parts.join(" ")
}

fn case(name: &str, op: &str, inputs: &[&Loop], locations: &[usize], expected: Vec<String>, actual: Vec<String>) -> LoopOpCase {
    LoopOpCase {
        name: name.into(),
        op: op.into(),
        inputs: inputs.iter().map(|l| l.to_text()).collect(),
        locations: locations.to_vec(),
        expected: sorted(expected),
        actual: sorted(actual),
    }
}

/// The fixture set: every surgery on hand-built loops plus the lattice
/// figure eight and merger pair.
pub fn loop_op_cases() -> Result<Vec<LoopOpCase>, Error> {
    let mut out = Vec::new();

    // Figure eight a e b e c.
    let a = seg((1, 0), "L")?;
    let e = seg((0, 0), "U")?;
    let b = seg((0, 1), "LLDRR")?;
    let c = seg((0, 1), "RRDL")?;
    let eight = segmented(&[&a, &e, &b, &e, &c])?;
    let (x, y) = (eight.starts[1], eight.starts[3]);
    let (l1, l2) = split_positive(&eight.lp, x.min(y), x.max(y))?;
    out.push(case(
        "eight",
        "split+",
        &[&eight.lp],
        &[x, y],
        vec![text(&[&a, &e, &c])?, text(&[&b, &e])?],
        vec![l1.to_text(), l2.to_text()],
    ));
    let tw = twist_negative(&eight.lp, x, y)?;
    out.push(case(
        "eight",
        "twist-",
        &[&eight.lp],
        &[x, y],
        vec![text(&[&a, &invert_word(&b), &c])?],
        vec![tw.to_text()],
    ));

    // Lollipop a e b e^-1 c.
    let a = seg((0, -1), "U")?;
    let e = seg((0, 0), "U")?;
    let b = seg((0, 1), "URDL")?;
    let einv = seg((0, 1), "D")?;
    let c = seg((0, 0), "RDL")?;
    let stick = segmented(&[&a, &e, &b, &einv, &c])?;
    let (x, y) = (stick.starts[1], stick.starts[3]);
    let (s1, s2) = split_negative(&stick.lp, x, y)?;
    out.push(case(
        "lollipop",
        "split-",
        &[&stick.lp],
        &[x, y],
        vec![text(&[&a, &c])?, text(&[&b])?],
        vec![s1.to_text(), s2.to_text()],
    ));
    let tp = twist_positive(&stick.lp, x, y)?;
    out.push(case(
        "lollipop",
        "twist+",
        &[&stick.lp],
        &[x, y],
        vec![text(&[&a, &e, &invert_word(&b), &einv, &c])?],
        vec![tp.to_text()],
    ));

    // Mergers of l = a e b with c e d and with c e^-1 d.
    let a = seg((0, 0), "R")?;
    let e = seg((1, 0), "U")?;
    let b = seg((1, 1), "LD")?;
    let l = segmented(&[&a, &e, &b])?;
    let x = l.starts[1];
    let c = seg((2, 0), "L")?;
    let d = seg((1, 1), "RD")?;
    let same = segmented(&[&c, &e, &d])?;
    let y = same.starts[1];
    out.push(case(
        "squares-same",
        "merge+",
        &[&l.lp, &same.lp],
        &[x, y],
        vec![text(&[&a, &e, &d, &c, &e, &b])?],
        vec![merge_positive(&l.lp, x, &same.lp, y)?.to_text()],
    ));
    out.push(case(
        "squares-same",
        "merge-",
        &[&l.lp, &same.lp],
        &[x, y],
        vec![text(&[&a, &invert_word(&c), &invert_word(&d), &b])?],
        vec![merge_negative(&l.lp, x, &same.lp, y)?.to_text()],
    ));
    let c = seg((1, 0), "RUL")?;
    let einv = seg((1, 1), "D")?;
    let d: Vec<Bond> = Vec::new();
    let opp = segmented(&[&c, &einv, &d])?;
    let y = opp.starts[1];
    out.push(case(
        "squares-opposite",
        "merge+",
        &[&l.lp, &opp.lp],
        &[x, y],
        vec![text(&[&a, &e, &invert_word(&c), &invert_word(&d), &e, &b])?],
        vec![merge_positive(&l.lp, x, &opp.lp, y)?.to_text()],
    ));
    out.push(case(
        "squares-opposite",
        "merge-",
        &[&l.lp, &opp.lp],
        &[x, y],
        vec![text(&[&a, &d, &c, &b])?],
        vec![merge_negative(&l.lp, x, &opp.lp, y)?.to_text()],
    ));

    // Deformations and expansions of a 2 x 1 rectangle at its second bond.
    let a = seg((0, 0), "R")?;
    let e = seg((1, 0), "R")?;
    let b = seg((2, 0), "ULLD")?;
    let rect = segmented(&[&a, &e, &b])?;
    let x = rect.starts[1];
    let through_e = [seg((2, 0), "ULD")?, seg((2, 0), "DLU")?];
    let back = seg((2, 0), "L")?;
    let through_einv = [seg((1, 0), "URD")?, seg((1, 0), "DRU")?];
    let minus: Vec<String> =
        through_e.iter().map(|d| text(&[&a, &invert_word(d), &b])).collect::<Result<_, _>>()?;
    let plus: Vec<String> =
        through_einv.iter().map(|d| text(&[&a, &e, &invert_word(d), &e, &b])).collect::<Result<_, _>>()?;
    let (dm, dp) = deformation_sets(&rect.lp, x)?;
    out.push(case(
        "rectangle",
        "deform-",
        &[&rect.lp],
        &[x],
        minus,
        dm.iter().map(|d| d.result.to_text()).collect(),
    ));
    out.push(case(
        "rectangle",
        "deform+",
        &[&rect.lp],
        &[x],
        plus,
        dp.iter().map(|d| d.result.to_text()).collect(),
    ));
    let with = |p: Vec<Bond>| -> Result<String, Error> {
        Ok(string_text(&LoopString::new(vec![rect.lp.clone(), Loop::make_loop(&p)?])))
    };
    let (ep, em) = expansion_sets(&rect.lp, x)?;
    out.push(case(
        "rectangle",
        "expand+",
        &[&rect.lp],
        &[x],
        through_einv.iter().map(|d| with(cat(&[&back, d]))).collect::<Result<_, _>>()?,
        ep.iter().map(string_text).collect(),
    ));
    out.push(case(
        "rectangle",
        "expand-",
        &[&rect.lp],
        &[x],
        through_e.iter().map(|d| with(cat(&[&e, d]))).collect::<Result<_, _>>()?,
        em.iter().map(string_text).collect(),
    ));

    // Lattice figure eight: the positive split returns the two lobes.
    for eps in [0.25, 0.125] {
        let ll = make_lattice_approximation(LoopFamily::FigureEight { t: [0.25, 1.5, 0.25, 1.5] }, eps)?;
        let al = ll.annotated.ok_or_else(|| Error::Computation("figure eight without annotation".into()))?;
        let w = al.lp.word();
        let pick = |ix: &[usize]| -> Vec<Bond> { ix.iter().map(|i| w[*i]).collect() };
        let ann = &al.ann;
        let l1 = cat(&[&pick(&ann.e_first), &pick(&ann.e1), &pick(&ann.a), &pick(&ann.e4_inv)]);
        let l2 = cat(&[&pick(&ann.e_second), &pick(&ann.e2), &pick(&ann.b), &pick(&ann.e3_inv)]);
        let (x, y) = (ann.e_first[0], ann.e_second[0]);
        let (p, q) = split_positive(&al.lp, x.min(y), x.max(y))?;
        out.push(case(
            &format!("lattice-eight-{eps}"),
            "split+",
            &[&al.lp],
            &[x, y],
            vec![Loop::make_loop(&l1)?.to_text(), Loop::make_loop(&l2)?.to_text()],
            vec![p.to_text(), q.to_text()],
        ));
    }

    // Two loops crossing at a shared edge, merged positively.
    let (pair, _) = merger_pair(4)?;
    let (lx, ly) = (&pair.loops[0], &pair.loops[1]);
    let shared = lx
        .word()
        .iter()
        .enumerate()
        .find_map(|(i, bd)| ly.occurrences(*bd).into_iter().find(|o| o.1).map(|o| (i, o.0)))
        .ok_or_else(|| Error::Computation("merger pair shares no bond".into()))?;
    let rx = lx.rotated_at(shared.0);
    let ry = ly.rotated_at(shared.1);
    out.push(case(
        "merger-pair",
        "merge+",
        &[lx, ly],
        &[shared.0, shared.1],
        vec![text(&[&rx[..1], &ry[1..], &ry[..1], &rx[1..]])?],
        vec![merge_positive(lx, shared.0, ly, shared.1)?.to_text()],
    ));
    Ok(out)
}

/// Tab-separated loop-operation fixture.
pub fn loop_ops_text(cases: &[LoopOpCase]) -> String {
    let mut s = String::from("name\top\tinputs\tlocations\texpected\n");
    for c in cases {
        s.push_str(&c.line());
        s.push('\n');
    }
    s
}

/// Graph dumps of the canonical figure eight.
pub fn graphs_text() -> Result<String, Error> {
    let mut s = String::new();
    for eps in [0.25, 0.125] {
        let ll = make_lattice_approximation(LoopFamily::FigureEight { t: [0.25, 1.5, 0.25, 1.5] }, eps)?;
        s.push_str(&format!("# figure eight, eps = {eps}, loop {}\n", ll.lp.to_text()));
        s.push_str(&ll.graph.dump());
        s.push('\n');
    }
    Ok(s)
}

/// Character-coefficient cache for U(1) at `eps = 0.5`, checked to
/// round-trip exactly.
pub fn char_table_text() -> Result<String, Error> {
    let p = ActionParams::new(loopfield_core::group::GroupSpec::u1(), 0.5)?;
    let t = CharCoeffTable::build(&p, 16)?;
    let text = t.to_cache_text();
    let back = CharCoeffTable::from_cache_text(&text)?;
    if back != t || back.to_cache_text() != text {
        return Err(Error::Certification("character table does not round-trip".into()));
    }
    Ok(text)
}

pub const FIXTURE_KINDS: [&str; 3] = ["loop-ops", "graphs", "char-tables"];

/// Writes one fixture kind into `dir`.
pub fn emit(kind: &str, dir: &Path) -> Result<PathBuf, Error> {
    let (name, body) = match kind {
        "loop-ops" => ("loop-ops.tsv", loop_ops_text(&loop_op_cases()?)),
        "graphs" => ("graphs.txt", graphs_text()?),
        "char-tables" => ("char-table-u1-0.5.txt", char_table_text()?),
        _ => return Err(Error::Config(format!("unknown fixture kind `{kind}`; expected one of {}", FIXTURE_KINDS.join(", ")))),
    };
    fs::create_dir_all(dir)?;
    let path = dir.join(name);
    fs::write(&path, body)?;
    Ok(path)
}
