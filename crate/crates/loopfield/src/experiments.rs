//! The named experiments: each returns report rows and PASS/FAIL clauses.

use std::path::Path;
use std::time::Instant;

use loopfield_core::action::{gaussian_lemma_check, lemma_j1_check, std_coefficient, ActionParams, Torus};
use loopfield_core::driver::{make_lattice_approximation, LoopFamily};
use loopfield_core::equation::{assemble, evaluate_exact, EquationReport, EquationSpec, ExactU1, TermTag};
use loopfield_core::group::{Family, GroupSpec};
use loopfield_core::loops::{compatible_triples, random_loop, Loop, LoopString};
use loopfield_core::sweeps::{
    convergence_crossing, convergence_merger, Combination, convergence_simple, degenerate_checks, rates, strictly_decreasing,
    CrossingVariant, DegenerateCase,
};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::config::{ExperimentConfig, ExperimentKind, Suite};
use crate::diagnostics::{gauge_invariance_check, u1_detailed_balance_test, u1_histogram_test};
use crate::fixtures::loop_op_cases;
use crate::mc::{self, evaluate_mc, is_expansion, McEvaluation, ObservableSet, Schedule};
use crate::report::{write_csv, write_json, write_log, Clause, Outcome, Row};
use crate::sampler::LatticeBox;
use crate::Error;

fn fmt_list(xs: &[f64]) -> String {
    let parts: Vec<String> = xs.iter().map(|x| format!("{x:.3e}")).collect();
    format!("[{}]", parts.join(", "))
}

fn max_abs(xs: impl IntoIterator<Item = f64>) -> f64 {
    xs.into_iter().fold(0.0, |m, x| m.max(x.abs()))
}

struct Ctx {
    name: &'static str,
    rows: Vec<Row>,
    clauses: Vec<Clause>,
}

impl Ctx {
    fn new(kind: ExperimentKind) -> Self {
        Ctx { name: kind.name(), rows: Vec::new(), clauses: Vec::new() }
    }

    fn row(&self, group: GroupSpec, eps: Option<f64>, triple: &str, term: &str) -> Row {
        Row::new(self.name, &group.to_string(), eps, triple, term)
    }

    fn clause(&mut self, criterion: u8, name: impl Into<String>, passed: bool, detail: impl Into<String>) {
        self.clauses.push(Clause::new(criterion, name, passed, detail));
    }

    fn runtime(&mut self, criterion: u8, start: Instant, limit: f64) {
        let s = start.elapsed().as_secs_f64();
        self.clause(criterion, format!("runtime < {limit} s"), s < limit, format!("{s:.2} s"));
    }
}

/// Runs the configured experiment and writes its reports.
pub fn run(cfg: &ExperimentConfig) -> Result<Outcome, Error> {
    let start = Instant::now();
    let mut ctx = Ctx::new(cfg.experiment);
    let log = match cfg.experiment {
        ExperimentKind::VerifyDiscrete => match cfg.suite {
            Suite::Equation => verify_discrete(cfg, &mut ctx, start)?,
            Suite::LoopAlgebra => loop_algebra(cfg, &mut ctx, start)?,
        },
        ExperimentKind::ConvergeSimple => converge_simple(cfg, &mut ctx, start)?,
        ExperimentKind::ConvergeCrossing => converge_crossing(cfg, &mut ctx, start)?,
        ExperimentKind::ConvergeMerger => converge_merger(cfg, &mut ctx, start)?,
        ExperimentKind::ConvergeUnified => converge_unified(cfg, &mut ctx, start)?,
        ExperimentKind::GaussLemma => gauss_lemma(cfg, &mut ctx, start)?,
        ExperimentKind::Degenerate => degenerate(cfg, &mut ctx, start)?,
        ExperimentKind::SampleDiagnostics => sample_diagnostics(cfg, &mut ctx, start)?,
    };
    let out = Outcome {
        experiment: ctx.name.to_string(),
        rows: ctx.rows,
        clauses: ctx.clauses,
        seconds: start.elapsed().as_secs_f64(),
    };
    if let Some(p) = &cfg.csv {
        write_csv(p, &out.rows)?;
    }
    if let Some(p) = &cfg.json {
        write_json(p, &out.rows)?;
    }
    if let (Some(p), Some(rows)) = (&cfg.sample_log, log) {
        write_log(p, &rows)?;
    }
    Ok(out)
}

type Log = Option<Vec<mc::LogRow>>;

fn equation_rows(ctx: &mut Ctx, group: GroupSpec, id: &str, r: &EquationReport) {
    let eps = Some(r.epsilon);
    for t in &r.terms {
        let row = ctx.row(group, eps, id, t.term.tag.name()).value(t.value).sigma(t.sigma).target(t.term.coeff);
        ctx.rows.push(row);
    }
    let row = ctx.row(group, eps, id, "equation").value(r.lhs).target(r.rhs).residual(r.residual, r.residual_sigma);
    ctx.rows.push(row);
}

fn verify_discrete(cfg: &ExperimentConfig, ctx: &mut Ctx, start: Instant) -> Result<Log, Error> {
    let g = GroupSpec::u1();
    let tol = cfg.tolerance.residual;
    let mut eight: Vec<f64> = Vec::new();
    for &eps in &cfg.epsilon {
        let ll = make_lattice_approximation(LoopFamily::FigureEight { t: cfg.areas }, eps)?;
        let mut be = ExactU1::new(eps)?;
        let mut worst: f64 = 0.0;
        for x in 0..ll.lp.len() {
            let mut spec = EquationSpec::single(g, ll.lp.clone(), x, eps);
            spec.scales = cfg.scales;
            let r = evaluate_exact(&spec, &mut be)?;
            worst = worst.max(r.residual.abs());
            let row = ctx.row(g, Some(eps), &format!("eight:{x}"), "equation").value(r.lhs).target(r.rhs).residual(r.residual, 0.0);
            ctx.rows.push(row);
        }
        eight.push(worst);
    }
    ctx.clause(
        2,
        format!("figure-eight residual < {tol:e} at every bond"),
        eight.iter().all(|r| *r < tol),
        format!("max |residual| per eps {}", fmt_list(&eight)),
    );

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut worst: f64 = 0.0;
    let mut tables: Vec<ExactU1> = cfg.epsilon.iter().map(|e| ExactU1::new(*e)).collect::<Result<_, _>>()?;
    for i in 0..cfg.random_loops {
        let k = i % cfg.epsilon.len();
        let eps = cfg.epsilon[k];
        let steps = rng.gen_range(cfg.random_steps.0..=cfg.random_steps.1);
        let l = random_loop(&mut rng, steps);
        let x = rng.gen_range(0..l.len());
        let mut spec = EquationSpec::single(g, l.clone(), x, eps);
        spec.scales = cfg.scales;
        let r = evaluate_exact(&spec, &mut tables[k])?;
        worst = worst.max(r.residual.abs());
        let row = ctx.row(g, Some(eps), &format!("random:{i}:{x}"), "equation").value(r.lhs).target(r.rhs).residual(r.residual, 0.0);
        ctx.rows.push(row);
    }
    ctx.clause(
        2,
        format!("{} random loops residual < {tol:e}", cfg.random_loops),
        worst < tol,
        format!("max |residual| {worst:.3e}"),
    );
    ctx.runtime(2, start, cfg.tolerance.runtime);
    Ok(None)
}

fn loop_algebra(cfg: &ExperimentConfig, ctx: &mut Ctx, start: Instant) -> Result<Log, Error> {
    let cases = loop_op_cases()?;
    let ok = cases.iter().filter(|c| c.matches()).count();
    for c in &cases {
        let row = ctx.row(GroupSpec::u1(), None, &c.name, &c.op).value(if c.matches() { 1.0 } else { 0.0 });
        ctx.rows.push(row);
    }
    let bad: Vec<String> = cases.iter().filter(|c| !c.matches()).map(|c| format!("{} {}", c.name, c.op)).collect();
    ctx.clause(
        1,
        "loop operations match the segment formulas",
        ok == cases.len() && !cases.is_empty(),
        if bad.is_empty() { format!("{ok}/{} cases", cases.len()) } else { format!("mismatch: {}", bad.join(", ")) },
    );
    ctx.runtime(1, start, cfg.tolerance.runtime);
    Ok(None)
}

fn converge_simple(cfg: &ExperimentConfig, ctx: &mut Ctx, start: Instant) -> Result<Log, Error> {
    for &g in &cfg.groups {
        let r = convergence_simple(g, cfg.t, &cfg.epsilon)?;
        let gaps = r.gaps();
        for (row, rate) in r.rows.iter().zip(rates(&gaps)) {
            let eps = Some(row.epsilon);
            let line = ctx.row(g, eps, "", "deformation").value(row.deformation).target(row.target).gap(row.gap).rate(rate);
            ctx.rows.push(line);
            let outer = ctx.row(g, eps, "", "outer").value(row.outer_minus).target(row.outer_plus).residual(row.outer_minus - row.outer_plus, 0.0);
            ctx.rows.push(outer);
        }
        let last = *gaps.last().unwrap_or(&f64::INFINITY);
        ctx.clause(3, format!("{g} gap strictly decreasing"), strictly_decreasing(&gaps), fmt_list(&gaps));
        ctx.clause(3, format!("{g} final gap < {:e}", cfg.tolerance.gap), last < cfg.tolerance.gap, format!("{last:.3e}"));
        let outer = r.max_outer_defect();
        ctx.clause(
            3,
            format!("{g} outer deformations cancel to {:e}", cfg.tolerance.outer),
            outer < cfg.tolerance.outer,
            format!("{outer:.3e}"),
        );
    }
    ctx.runtime(3, start, cfg.tolerance.runtime);
    Ok(None)
}

fn converge_crossing(cfg: &ExperimentConfig, ctx: &mut Ctx, start: Instant) -> Result<Log, Error> {
    let g = GroupSpec::u1();
    let tol = cfg.tolerance.gap;
    let mut alts = Vec::new();
    let std_comb = Combination::standard();
    ctx.clause(
        4,
        "two distinct (a,b) choices",
        cfg.combination != std_comb && cfg.combination.is_normalized(),
        format!("standard a = {:?}, b = {:?}; configured a = {:?}, b = {:?}", std_comb.a, std_comb.b, cfg.combination.a, cfg.combination.b),
    );
    for &v in &cfg.variants {
        let r = convergence_crossing(v, cfg.areas, &cfg.epsilon, cfg.combination)?;
        let tag = match v {
            CrossingVariant::Standard => "standard",
            CrossingVariant::Reversed => "reversed",
        };
        let alt = v.sign() * r.continuum.alternating;
        alts.push((v, r.continuum.alternating));
        let gaps = r.column(|x| x.gap);
        let gen = r.column(|x| x.general_gap);
        let gap_rates = rates(&gaps);
        for (row, rate) in r.rows.iter().zip(gap_rates) {
            let eps = Some(row.epsilon);
            let id = format!("{tag}:first");
            let c = ctx.row(g, eps, &id, "combination").value(row.combination).target(alt).gap(row.gap).rate(rate);
            ctx.rows.push(c);
            let c = ctx.row(g, eps, &id, "general").value(row.general).target(alt).gap(row.general_gap);
            ctx.rows.push(c);
            let cont = &r.continuum;
            for (term, val, target, gap) in [
                ("center", row.d_center, cont.center_limit(), row.gap_center),
                ("near", row.d_near, cont.near_limit(), row.gap_near),
                ("far", row.d_far, cont.far_limit(), row.gap_far),
            ] {
                let c = ctx.row(g, eps, &id, term).value(val).target(target).gap(gap);
                ctx.rows.push(c);
            }
            let c = ctx.row(g, eps, &format!("{tag}:all({})", row.triples), "triple_spread").value(row.triple_spread).gap(row.max_triple_gap);
            ctx.rows.push(c);
        }
        let last = *gaps.last().unwrap_or(&f64::INFINITY);
        let last_gen = *gen.last().unwrap_or(&f64::INFINITY);
        ctx.clause(4, format!("{tag} combination gap strictly decreasing"), strictly_decreasing(&gaps), fmt_list(&gaps));
        ctx.clause(4, format!("{tag} combination final gap < {tol:e}"), last < tol, format!("{last:.3e}"));
        ctx.clause(4, format!("{tag} (a,b) combination gap strictly decreasing"), strictly_decreasing(&gen), fmt_list(&gen));
        ctx.clause(4, format!("{tag} (a,b) combination final gap < {tol:e}"), last_gen < tol, format!("{last_gen:.3e}"));
        let fin = r.rows.last();
        let worst_triple = fin.map(|x| x.max_triple_gap).unwrap_or(f64::INFINITY);
        ctx.clause(
            4,
            format!("{tag} every compatible triple within {tol:e} at the finest eps"),
            worst_triple < tol,
            format!("{} triples, worst gap {worst_triple:.3e}, spread {:.3e}", fin.map(|x| x.triples).unwrap_or(0), fin.map(|x| x.triple_spread).unwrap_or(f64::NAN)),
        );

        // Splitting sign on the first crossing bond.
        let eps0 = cfg.epsilon[0];
        let ll = make_lattice_approximation(v.family(cfg.areas), eps0)?;
        let al = ll.annotated.ok_or_else(|| Error::Computation("figure eight without annotation".into()))?;
        let terms = assemble(&EquationSpec::single(g, al.lp.clone(), al.ann.e_first[0], eps0))?;
        let want = match v {
            CrossingVariant::Standard => (TermTag::SplitPlus, 1.0),
            CrossingVariant::Reversed => (TermTag::SplitMinus, -1.0),
        };
        let splits: Vec<_> = terms.iter().filter(|t| matches!(t.tag, TermTag::SplitPlus | TermTag::SplitMinus)).collect();
        let sign_ok = splits.len() == 1 && splits[0].tag == want.0 && splits[0].coeff == want.1;
        ctx.clause(
            4,
            format!("{tag} splitting term sign"),
            sign_ok,
            splits.iter().map(|t| format!("{} {}", t.tag.name(), t.coeff)).collect::<Vec<_>>().join(", "),
        );

        let ids = r.continuum.identity_residuals();
        let worst = max_abs(ids[..3].iter().copied());
        ctx.clause(
            5,
            format!("{tag} correction-term identities to {:e}", cfg.tolerance.identity),
            worst < cfg.tolerance.identity,
            format!("residuals {}", fmt_list(&ids[..3])),
        );
        let fd = r.continuum.max_fd_defect();
        let im = r.continuum.max_im_defect();
        ctx.clause(
            5,
            format!("{tag} area derivatives and I_m cross-checked to {:e}", cfg.tolerance.identity),
            fd < cfg.tolerance.identity && im < cfg.tolerance.identity,
            format!("finite differences {fd:.3e}, I_m quadrature {im:.3e}"),
        );
        for (name, col) in [
            ("center", r.column(|x| x.gap_center)),
            ("near", r.column(|x| x.gap_near)),
            ("far", r.column(|x| x.gap_far)),
        ] {
            // The reversed loop has winding zero on both sides of the center
            // bond, so that sweep is identically zero.
            let vanishing = col.iter().all(|x| *x < 1e-12);
            ctx.clause(
                5,
                format!("{tag} {name} equation gap decreasing"),
                strictly_decreasing(&col) || vanishing,
                fmt_list(&col),
            );
        }
        for (i, (x, y)) in r.continuum.im.iter().zip(&r.continuum.im_quadrature).enumerate() {
            let c = ctx.row(g, None, tag, &format!("I_{}", i + 1)).value(*x).target(*y).gap((x - y).abs());
            ctx.rows.push(c);
        }
    }
    if alts.len() == 2 {
        let d = (alts[0].1 - alts[1].1).abs();
        ctx.clause(4, "both orientations share the limit up to sign", d < 1e-12, format!("|difference| {d:.3e}"));
    }
    let secs = start.elapsed().as_secs_f64();
    ctx.clause(5, "runtime < 120 s", secs < 120.0, format!("{secs:.2} s"));
    ctx.runtime(4, start, cfg.tolerance.runtime);
    Ok(None)
}

fn converge_merger(cfg: &ExperimentConfig, ctx: &mut Ctx, start: Instant) -> Result<Log, Error> {
    let g = GroupSpec::u1();
    let r = convergence_merger(&cfg.epsilon, cfg.combination)?;
    let target = r.alternating - r.merged_continuum;
    let gaps: Vec<f64> = r.rows.iter().map(|x| x.gap).collect();
    let gen: Vec<f64> = r.rows.iter().map(|x| x.general_gap).collect();
    for (row, rate) in r.rows.iter().zip(rates(&gaps)) {
        let eps = Some(row.epsilon);
        let c = ctx.row(g, eps, "pair", "combination").value(row.combination).target(r.alternating).gap(row.gap).rate(rate);
        ctx.rows.push(c);
        let c = ctx.row(g, eps, "pair", "general").value(row.general).target(r.alternating).gap(row.general_gap);
        ctx.rows.push(c);
        let c = ctx.row(g, eps, "pair", "merged").value(row.merged).target(r.merged_continuum);
        ctx.rows.push(c);
    }
    let tol = cfg.tolerance.gap;
    let last = *gaps.last().unwrap_or(&f64::INFINITY);
    let last_gen = *gen.last().unwrap_or(&f64::INFINITY);
    ctx.clause(6, "merger gap strictly decreasing", strictly_decreasing(&gaps), fmt_list(&gaps));
    ctx.clause(6, format!("merger final gap < {tol:e}"), last < tol, format!("{last:.3e}"));
    ctx.clause(6, "(a,b) merger gap strictly decreasing", strictly_decreasing(&gen), fmt_list(&gen));
    ctx.clause(6, format!("(a,b) merger final gap < {tol:e}"), last_gen < tol, format!("{last_gen:.3e}"));
    ctx.clause(
        6,
        format!("continuum identity to {:e}", cfg.tolerance.identity),
        target.abs() < cfg.tolerance.identity,
        format!("(d1 - d2 + d3 - d4) E W = {:.6}, E W_l12 = {:.6}", r.alternating, r.merged_continuum),
    );
    ctx.runtime(6, start, cfg.tolerance.runtime);
    Ok(None)
}

fn gauss_lemma(cfg: &ExperimentConfig, ctx: &mut Ctx, start: Instant) -> Result<Log, Error> {
    let g = *cfg.groups.first().ok_or_else(|| Error::Config("no group".into()))?;
    if g != GroupSpec::u(2) {
        return Err(Error::Config("gauss-lemma test functions are defined on U(2)".into()));
    }
    let torus = Torus::U2;
    let f1 = gaussian_lemma_check(g, |a| 1.0 - torus.trace(a).re / 2.0, |q| 1.0 - q.trace_normalized().re, 1.0, &cfg.epsilon)?;
    let f2 = gaussian_lemma_check(
        g,
        |a| (torus.trace(a) / 2.0 - 1.0).norm_sqr(),
        |q| (q.trace_normalized() - 1.0).norm_sqr(),
        0.5,
        &cfg.epsilon,
    )?;
    let (lo, hi) = (cfg.tolerance.slope_min, cfg.tolerance.slope_max);
    for (name, rep) in [("re_tr(I-Q)", &f1), ("|trQ/2-1|^2", &f2)] {
        for row in &rep.rows {
            let c = ctx.row(g, Some(row.epsilon), name, "integral").value(row.integral).target(row.predicted).gap(row.error);
            ctx.rows.push(c);
        }
        let c = ctx.row(g, None, name, "slope").value(rep.slope);
        ctx.rows.push(c);
        ctx.clause(7, format!("{name} residual slope in [{lo}, {hi}]"), rep.slope >= lo && rep.slope <= hi, format!("slope {:.3}", rep.slope));
    }
    let j = lemma_j1_check(1.0, 0.8, 1.3, &[0.4, 0.2, 0.1])?;
    let gaps: Vec<f64> = j.iter().map(|r| r.gap).collect();
    for r in &j {
        let c = ctx.row(GroupSpec::u1(), Some(r.epsilon), "J1", "lhs").value(r.lhs.re).target(r.rhs.re).gap(r.gap);
        ctx.rows.push(c);
    }
    ctx.clause(7, "U(1) J-lemma gap decreasing over eps {0.4, 0.2, 0.1}", strictly_decreasing(&gaps), fmt_list(&gaps));
    ctx.runtime(7, start, cfg.tolerance.runtime);
    Ok(None)
}

fn degenerate(cfg: &ExperimentConfig, ctx: &mut Ctx, start: Instant) -> Result<Log, Error> {
    let g = GroupSpec::u1();
    let tol = cfg.tolerance.degenerate;
    for case in [DegenerateCase::ThreeFace, DegenerateCase::UnboundedFace] {
        let name = match case {
            DegenerateCase::ThreeFace => "three-face",
            DegenerateCase::UnboundedFace => "unbounded-face",
        };
        let mut worst: f64 = 0.0;
        let mut d4: f64 = 0.0;
        let mut surgery: f64 = 0.0;
        for &eps in &cfg.epsilon {
            let r = degenerate_checks(case, eps)?;
            worst = worst.max(r.identity.abs()).max(r.four_face_identity.abs());
            surgery = surgery.max((r.wilson - r.wilson_surgery).abs());
            if case == DegenerateCase::UnboundedFace {
                d4 = d4.max(r.d4.abs());
            }
            let c = ctx.row(g, Some(eps), name, "identity").residual(r.identity, 0.0).value(r.wilson_split);
            ctx.rows.push(c);
            let c = ctx.row(g, Some(eps), name, "four_face_identity").residual(r.four_face_identity, 0.0);
            ctx.rows.push(c);
        }
        ctx.clause(10, format!("{name} identities to {tol:e}"), worst < tol, format!("max |residual| {worst:.3e}"));
        ctx.clause(10, format!("{name} surgery preserves E W"), surgery < 1e-12, format!("{surgery:.3e}"));
        if case == DegenerateCase::UnboundedFace {
            ctx.clause(10, "unbounded face has zero area derivative", d4 == 0.0, format!("{d4:e}"));
        }
    }
    ctx.runtime(10, start, cfg.tolerance.runtime);
    Ok(None)
}

fn mc_equation_rows(ctx: &mut Ctx, group: GroupSpec, id: &str, ev: &McEvaluation) {
    for r in &ev.reports {
        equation_rows(ctx, group, id, r);
    }
}

fn z_clause(ctx: &mut Ctx, criterion: u8, name: String, value: f64, sigma: f64, z: f64) {
    let score = if sigma > 0.0 { value.abs() / sigma } else if value == 0.0 { 0.0 } else { f64::INFINITY };
    ctx.clause(criterion, name, score <= z, format!("residual {value:.3e} +- {sigma:.3e} (z = {score:.2})"));
}

fn sample_diagnostics(cfg: &ExperimentConfig, ctx: &mut Ctx, start: Instant) -> Result<Log, Error> {
    let z = cfg.tolerance.sigma;
    let plaquette = Loop::parse("(0,0):RULD")?;
    let mut set = ObservableSet::new();
    set.insert(&LoopString::single(plaquette.clone()));
    let plaq_schedule = Schedule { sweeps: cfg.plaquette_sweeps, ..cfg.schedule.clone() };
    let mut log = None;
    for (gi, &g) in cfg.groups.iter().enumerate() {
        for (ei, &eps) in cfg.epsilon.iter().enumerate() {
            let params = ActionParams::new(g, eps)?;
            let target = std_coefficient(&params)?;
            let want_log = cfg.sample_log.is_some() && log.is_none();
            let seed = cfg.seed.wrapping_add((gi * 16 + ei) as u64);
            let run = mc::run(LatticeBox::single_plaquette(), params, &set, &plaq_schedule, seed, want_log)?;
            if want_log {
                log = Some(run.log.clone());
            }
            let e = run.observables[0];
            let c = ctx
                .row(g, Some(eps), "plaquette", "W_p")
                .value(e.mean)
                .sigma(e.sigma)
                .target(target)
                .residual(e.mean - target, e.sigma);
            ctx.rows.push(c);
            z_clause(ctx, 8, format!("{g} eps = {eps}: <W_p> = a_std within {z} sigma"), e.mean - target, e.sigma, z);
            let acc_ok = g.family == Family::U && eps >= 1.0 || (0.4..=0.6).contains(&run.acceptance);
            ctx.rows.push(ctx.row(g, Some(eps), "plaquette", "acceptance").value(run.acceptance));
            if !acc_ok {
                ctx.clause(8, format!("{g} eps = {eps}: acceptance after tuning"), false, format!("{:.3}", run.acceptance));
            }
        }
    }

    let eps = cfg.mc_epsilon[0];
    // Unified equation for SU(2) on a rectangle.
    let su2 = GroupSpec::su(2);
    let rect = make_lattice_approximation(LoopFamily::Rectangle { t: cfg.t }, eps)?;
    let spec = EquationSpec::single(su2, rect.lp.clone(), 0, eps);
    let ev = evaluate_mc(&[spec], &[], &[], &cfg.schedule, cfg.seed ^ 0x5eed_0001)?;
    mc_equation_rows(ctx, su2, "rectangle:0", &ev);
    let r = &ev.reports[0];
    z_clause(ctx, 8, format!("SU(2) rectangle equation residual within {z} sigma"), r.residual, r.residual_sigma, z);

    // Single-location equation for SO(3) at the crossing bond.
    let so3 = GroupSpec::so(3);
    let ll = make_lattice_approximation(LoopFamily::FigureEight { t: cfg.areas }, eps)?;
    let al = ll.annotated.ok_or_else(|| Error::Computation("figure eight without annotation".into()))?;
    let x = compatible_triples(&al).first().map(|t| t.center).ok_or_else(|| Error::Computation("no triple".into()))?;
    let spec = EquationSpec::single(so3, al.lp.clone(), x, eps);
    let expansions: Vec<(LoopString, f64)> = assemble(&spec)?
        .into_iter()
        .filter(|t| is_expansion(&t.tag))
        .map(|t| (t.string, t.coeff))
        .collect();
    let ev = evaluate_mc(&[spec], &[], &[expansions], &cfg.schedule, cfg.seed ^ 0x5eed_0002)?;
    mc_equation_rows(ctx, so3, "eight:center", &ev);
    let r = &ev.reports[0];
    z_clause(ctx, 8, format!("SO(3) figure-eight equation residual within {z} sigma"), r.residual, r.residual_sigma, z);
    let ex = ev.extra[0];
    ctx.rows.push(ctx.row(so3, Some(eps), "eight:center", "expansion_pair").value(ex.mean).sigma(ex.sigma));
    let tw = r.terms.iter().filter(|t| matches!(t.term.tag, TermTag::TwistMinus | TermTag::TwistPlus)).count();
    ctx.clause(8, "SO(3) twist term present, no expansions", tw > 0 && r.terms.iter().all(|t| !is_expansion(&t.term.tag)), format!("{tw} twist terms"));

    // Randomized equations on one stream per group.
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x5eed_0003);
    let loops: Vec<Loop> = (0..cfg.trials)
        .map(|_| {
            let steps = rng.gen_range(4..=10);
            random_loop(&mut rng, steps)
        })
        .collect();
    for (k, g) in [su2, so3].into_iter().enumerate() {
        let specs: Vec<EquationSpec> =
            loops.iter().map(|l| EquationSpec::single(g, l.clone(), rng.gen_range(0..l.len()), eps)).collect();
        let ev = evaluate_mc(&specs, &[], &[], &cfg.schedule, cfg.seed ^ (0x5eed_0010 + k as u64))?;
        let mut pass = 0;
        for (i, r) in ev.reports.iter().enumerate() {
            let score = r.residual.abs() / r.residual_sigma.max(f64::MIN_POSITIVE);
            pass += usize::from(score <= z);
            let c = ctx.row(g, Some(eps), &format!("random:{i}:{}", specs[i].location), "equation").residual(r.residual, r.residual_sigma);
            ctx.rows.push(c);
        }
        let rate = pass as f64 / ev.reports.len().max(1) as f64;
        ctx.clause(
            8,
            format!("{g} random equations within {z} sigma in >= {:.0}% of trials", 100.0 * cfg.tolerance.pass_rate),
            rate >= cfg.tolerance.pass_rate,
            format!("{pass}/{}", ev.reports.len()),
        );
    }

    // Gauge invariance.
    for g in &cfg.groups {
        let gc = gauge_invariance_check(*g, eps, &loops, 50, cfg.seed ^ 0x5eed_0020)?;
        ctx.clause(
            8,
            format!("{g} sign gauge transforms leave every sample and estimate bit-identical"),
            gc.bit_identical,
            format!("{} samples x {} loops", gc.samples, gc.loops),
        );
        ctx.clause(
            8,
            format!("{g} Haar gauge transforms change Wilson loops by < 1e-12"),
            gc.haar_deviation < 1e-12 && gc.plaquette_deviation < 1e-12,
            format!("loops {:.2e}, plaquettes {:.2e}", gc.haar_deviation, gc.plaquette_deviation),
        );
    }

    // Detailed balance and plaquette histogram for U(1).
    let db = u1_detailed_balance_test(0.5, 400_000, 12, 10, cfg.seed ^ 0x5eed_0030)?;
    ctx.rows.push(ctx.row(GroupSpec::u1(), Some(0.5), "plaquette", "detailed_balance_chi2").value(db.statistic).target(db.dof as f64));
    ctx.clause(8, "U(1) detailed-balance chi-square at 1%", db.passes(0.01), format!("chi2 {:.2} on {} dof, p = {:.3}", db.statistic, db.dof, db.p_value));
    let h = u1_histogram_test(0.5, 200_000, 24, cfg.seed ^ 0x5eed_0031)?;
    ctx.rows.push(ctx.row(GroupSpec::u1(), Some(0.5), "plaquette", "histogram_chi2").value(h.statistic).target(h.dof as f64));
    ctx.clause(8, "U(1) plaquette-angle histogram chi-square at 1%", h.passes(0.01), format!("chi2 {:.2} on {} dof, p = {:.3}", h.statistic, h.dof, h.p_value));

    ctx.runtime(8, start, cfg.tolerance.runtime);
    Ok(log)
}

fn converge_unified(cfg: &ExperimentConfig, ctx: &mut Ctx, start: Instant) -> Result<Log, Error> {
    let z = cfg.tolerance.sigma;
    for &g in &cfg.groups {
        let rows = mc::convergence_unified(g, cfg.areas, &cfg.epsilon, cfg.triple, &cfg.schedule, cfg.seed)?;
        for row in &rows {
            let id = format!("triple:{}/{}/{}", row.triple.center, row.triple.near, row.triple.far);
            for (name, r) in ["center", "near", "far"].iter().zip(&row.reports) {
                equation_rows(ctx, g, &format!("{id}:{name}"), r);
            }
            let c = ctx.row(g, Some(row.epsilon), &id, "combination").residual(row.combination.mean, row.combination.sigma);
            ctx.rows.push(c);
            let c = ctx
                .row(g, Some(row.epsilon), &id, "continuum_rhs")
                .value(row.deformation.mean)
                .sigma(row.deformation.sigma)
                .target(row.continuum_rhs.mean)
                .residual(row.continuum_gap.mean, row.continuum_gap.sigma)
                .gap(row.continuum_gap.mean.abs());
            ctx.rows.push(c);
            z_clause(
                ctx,
                9,
                format!("{g} eps = {}: combined residual within {z} sigma", row.epsilon),
                row.combination.mean,
                row.combination.sigma,
                z,
            );

            // Coefficient audit on the center equation.
            let terms = &row.reports[0].terms;
            let tw: Vec<f64> = terms
                .iter()
                .filter(|t| matches!(t.term.tag, TermTag::TwistMinus | TermTag::TwistPlus))
                .map(|t| t.term.coeff)
                .collect();
            let want_tw = -g.twist_coefficient();
            let tw_ok = if want_tw == 0.0 { tw.iter().all(|c| *c == 0.0) } else { !tw.is_empty() && tw.iter().all(|c| c.abs() == want_tw.abs()) };
            let has_exp = terms.iter().any(|t| is_expansion(&t.term.tag));
            let gamma_ok = has_exp == (g.family == Family::SU);
            ctx.clause(
                9,
                format!("{g} coefficient audit"),
                tw_ok && gamma_ok,
                format!("twist coefficients {tw:?} (expected magnitude {:.4}), expansions present: {has_exp}", want_tw.abs()),
            );
        }
    }
    ctx.runtime(9, start, cfg.tolerance.runtime);
    Ok(None)
}

/// Loads, runs and reports one config.
pub fn run_file(path: &Path) -> Result<Outcome, Error> {
    let cfg = ExperimentConfig::load(path)?;
    run(&cfg)
}

/// Configs committed with the repository, by file name.
pub const DEFAULT_CONFIGS: [(&str, &str); 10] = [
    ("loop-algebra.toml", include_str!("../../../configs/loop-algebra.toml")),
    ("verify-discrete.toml", include_str!("../../../configs/verify-discrete.toml")),
    ("converge-simple.toml", include_str!("../../../configs/converge-simple.toml")),
    ("converge-crossing.toml", include_str!("../../../configs/converge-crossing.toml")),
    ("converge-merger.toml", include_str!("../../../configs/converge-merger.toml")),
    ("gauss-lemma.toml", include_str!("../../../configs/gauss-lemma.toml")),
    ("sample-diagnostics.toml", include_str!("../../../configs/sample-diagnostics.toml")),
    ("converge-unified.toml", include_str!("../../../configs/converge-unified.toml")),
    ("degenerate.toml", include_str!("../../../configs/degenerate.toml")),
    ("negative-control.toml", include_str!("../../../configs/negative-control.toml")),
];

/// The exact-backend experiments from the committed configs, with report
/// files suppressed.
pub fn selftest() -> Result<Vec<Outcome>, Error> {
    let mut out = Vec::new();
    for (name, text) in DEFAULT_CONFIGS {
        let mut cfg = ExperimentConfig::parse(text, Path::new("."))?;
        let exact = !matches!(cfg.experiment, ExperimentKind::SampleDiagnostics | ExperimentKind::ConvergeUnified);
        if !exact || name == "negative-control.toml" {
            continue;
        }
        cfg.csv = None;
        cfg.json = None;
        cfg.sample_log = None;
        out.push(run(&cfg)?);
    }
    Ok(out)
}
