//! Acceptance suite. Each criterion prints one line with its tolerance,
//! elapsed time and time budget; the process fails if any criterion does.

use std::collections::BTreeSet;
use std::process::ExitCode;
use std::sync::Arc;
use std::time::{Duration, Instant};

use glutos::atlas::{build_cj, check_thcharts, JContext, DEFAULT_OBJECT_BOUND};
use glutos::axioms::{fixture_candidates, Clause, G5Form};
use glutos::closure::{check_proofs, oracle, tsub_closure, tsub_rules, Element};
use glutos::fincat::{ArrowId, FinCategory, ObjId};
use glutos::fixtures;
use glutos::glue::{
    check_local_pullback, enumerate_mgluons, equivalence_relation, random_set_instance, sheaf_gluon_colimit, sheaf_to_gluon,
    validate_gluon, Gluon, SetSquare, SheafGluon,
};
use glutos::sheafkit::{
    enumerate_presheaves, enumerate_sheaves, find_iso, pullback_presheaf, sheaf_hom_set, sheafify, sheafify_map, yoneda_embed,
    NatTrans, Presheaf, SheafError,
};
use glutos::site::{check_operator_laws, Coverage, Pretopology};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        if !$cond {
            return Err(format!($($msg)+));
        }
    };
}

struct Criterion {
    id: usize,
    name: &'static str,
    tolerance: &'static str,
    budget: Duration,
    run: fn() -> Outcome,
}

/// Natural isomorphism checked from the definition: bijective components
/// commuting with every restriction.
fn is_natural_iso(t: &NatTrans, f: &Presheaf, g: &Presheaf) -> bool {
    let c = f.base();
    let bijective = c.objects().all(|x| {
        let comp = &t.components[x];
        let image: BTreeSet<usize> = comp.iter().copied().collect();
        comp.len() == f.size(x) && f.size(x) == g.size(x) && image.len() == comp.len()
    });
    bijective
        && c.arrow_ids().all(|a| {
            let (s, d) = (c.src(a), c.dst(a));
            (0..f.size(d)).all(|e| t.components[s][f.restrict(a, e)] == g.restrict(a, t.components[d][e]))
        })
}

fn c1_operator_algebra() -> Outcome {
    let mut n = 0;
    for (name, p) in fixtures::operator_fixtures() {
        for (law, holds) in check_operator_laws(&p).map_err(|e| e.to_string())? {
            ensure!(holds, "{law} fails on {name}");
            n += 1;
        }
    }
    Ok(format!("{n} identities on arrow, disc2, chain3"))
}

/// Values of a finite-set function, read from its name.
fn values(c: &FinCategory, a: ArrowId) -> Vec<usize> {
    c.arrow_name(a).split(':').nth(1).unwrap_or("").chars().map(|ch| ch.to_digit(10).unwrap() as usize).collect()
}

/// Whether `(a, b)` is an equivalence relation of sets of size at most
/// `n` whose composable pairs still fit in the bound.
fn set_eqrel_oracle(c: &FinCategory, a: ArrowId, b: ArrowId, n: usize) -> bool {
    let x: usize = c.object_name(c.dst(a)).parse().unwrap();
    let rel: Vec<(usize, usize)> = values(c, a).into_iter().zip(values(c, b)).collect();
    let distinct: BTreeSet<(usize, usize)> = rel.iter().copied().collect();
    let has = |p: (usize, usize)| distinct.contains(&p);
    let composable: usize = rel.iter().map(|&(_, j)| rel.iter().filter(|q| q.0 == j).count()).sum();
    distinct.len() == rel.len()
        && (0..x).all(|i| has((i, i)))
        && rel.iter().all(|&(i, j)| has((j, i)))
        && rel.iter().all(|&(i, j)| rel.iter().filter(|q| q.0 == j).all(|&(_, k)| has((i, k))))
        && composable <= n
}

fn c2_gluon_degeneracy() -> Outcome {
    let mut pairs = 0;
    let cats: Vec<(&str, FinCategory)> = vec![
        ("terminal", FinCategory::terminal()),
        ("arrow", fixtures::arrow_poset()),
        ("disc2", fixtures::disc2()),
        ("chain3", fixtures::chain3()),
        ("sets<=3", FinCategory::finite_sets(3)),
    ];
    for (name, c) in &cats {
        for u in c.objects() {
            for x in c.objects() {
                for &a in c.hom(u, x) {
                    for &b in c.hom(u, x) {
                        let g = Gluon::single(c, a, b).map_err(|e| e.to_string())?;
                        let gluon = validate_gluon(c, &g).is_valid();
                        let eqrel = equivalence_relation(c, a, b).is_ok();
                        ensure!(gluon == eqrel, "{name}: ({}, {}) gluon {gluon}, eqrel {eqrel}", c.arrow_name(a), c.arrow_name(b));
                        if *name == "sets<=3" {
                            ensure!(eqrel == set_eqrel_oracle(c, a, b, 3), "oracle disagrees on ({}, {})", c.arrow_name(a), c.arrow_name(b));
                        }
                        pairs += 1;
                    }
                }
            }
        }
    }
    Ok(format!("{pairs} parallel pairs over {} fixtures", cats.len()))
}

/// Section bound for sheafifying glued presheaves. Three copies of the top
/// of disc2 glued along the bottom have 3 * 3 sections over the top.
const GLUE_BOUND: usize = 9;

fn c3_gluing_effectivity() -> Outcome {
    let bound = GLUE_BOUND;
    let mut glued = 0;
    for (name, p) in [("disc2", fixtures::disc2_site()), ("chain3", fixtures::chain3_site())] {
        let c = p.base();
        let y = yoneda_embed(&p, bound).map_err(|e| e.to_string())?;
        let tests: Vec<Presheaf> = c.objects().map(|x| y.sheaf(x).clone()).collect();
        for m in enumerate_mgluons(&p, 3) {
            let g = m.to_gluon(c).map_err(|e| e.to_string())?;
            ensure!(validate_gluon(c, &g).is_valid(), "{name}: invalid M-gluon {:?}", m.pieces);
            let sg = SheafGluon::from_yoneda(&y, &g);
            let col = sheaf_gluon_colimit(&p, &sg, bound, &tests).map_err(|e| format!("{name} {:?}: {e}", m.pieces))?;
            ensure!(col.legs_mono, "{name} {:?}: legs not mono", m.pieces);
            // Effectivity by counting: U_ij(X) is in bijection with pairs of
            // sections of U_i, U_j with equal images in the colimit.
            let n = g.len();
            for i in 0..n {
                for j in 0..n {
                    for x in c.objects() {
                        let (li, lj) = (&col.legs[i].components[x], &col.legs[j].components[x]);
                        let pairs: BTreeSet<(usize, usize)> = (0..sg.u1[i].size(x))
                            .flat_map(|a| (0..sg.u1[j].size(x)).map(move |b| (a, b)))
                            .filter(|&(a, b)| li[a] == lj[b])
                            .collect();
                        let over: BTreeSet<(usize, usize)> = (0..sg.u2[i][j].size(x))
                            .map(|z| (sg.d0[i][j].components[x][z], sg.d1[i][j].components[x][z]))
                            .collect();
                        ensure!(
                            over == pairs && over.len() == sg.u2[i][j].size(x),
                            "{name} {:?}: overlap ({i}, {j}) is not the pullback at {}",
                            m.pieces,
                            c.object_name(x)
                        );
                    }
                }
            }
            ensure!(col.stable_along > 0, "{name} {:?}: stability not checked", m.pieces);
            glued += 1;
        }
    }
    Ok(format!("{glued} clopen M-gluons glued in sheaves (bound {bound})"))
}

/// Direct pullback test: `P` maps bijectively onto `X x_Z Y`.
fn pullback_oracle(sq: &SetSquare) -> bool {
    let expected: BTreeSet<(usize, usize)> = (0..sq.f.dom)
        .flat_map(|x| (0..sq.g.dom).map(move |y| (x, y)))
        .filter(|&(x, y)| sq.f.map[x] == sq.g.map[y])
        .collect();
    let image: Vec<(usize, usize)> = (0..sq.px.dom).map(|p| (sq.px.map[p], sq.py.map[p])).collect();
    let distinct: BTreeSet<(usize, usize)> = image.iter().copied().collect();
    distinct.len() == image.len() && distinct == expected
}

fn c4_local_pullback() -> Outcome {
    let trials = 256;
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let (mut yes, mut no) = (0, 0);
    for t in 0..trials {
        let (sq, [xs, ys, zs]) = random_set_instance(&mut rng);
        let r = check_local_pullback(&sq, &xs, &ys, &zs).map_err(|e| e.to_string())?;
        let direct = pullback_oracle(&sq);
        ensure!(r.direct == direct, "trial {t}: built-in direct test disagrees with oracle");
        ensure!(r.local == direct, "trial {t}: local {} vs direct {direct}", r.local);
        if direct {
            yes += 1;
        } else {
            no += 1;
        }
    }
    ensure!(yes > 0 && no > 0, "degenerate sample: {yes} pullbacks, {no} non-pullbacks");
    Ok(format!("{trials} instances, seed 0: {yes} pullbacks, {no} non-pullbacks, all agree"))
}

fn c5_nglu_round_trip() -> Outcome {
    let mut n = 0;
    for (name, p) in [("disc2", fixtures::disc2_site()), ("chain3", fixtures::chain3_site())] {
        for f in enumerate_sheaves(&p, 3) {
            let r = sheaf_to_gluon(&p, &f).map_err(|e| format!("{name} {:?}: {e}", f.sizes()))?;
            ensure!(is_natural_iso(&r.iso, &r.sections, &f), "{name} {:?}: witness is not a natural iso", f.sizes());
            n += 1;
        }
    }
    Ok(format!("{n} sheaves with sections <= 3 realized up to iso"))
}

fn c6_subcanonical_closure() -> Outcome {
    let sp = tsub_closure(&fixtures::arrow_site(), 2, 8).map_err(|e| e.to_string())?;
    ensure!(sp.state.depth <= 8, "arrow: depth {}", sp.state.depth);
    for &y in &sp.yoneda.objects {
        let s = &sp.fragment.sheaves[y];
        ensure!(s.sizes().iter().all(|&k| k == 1), "arrow: image {:?} is not terminal", s.sizes());
    }
    ensure!(!sp.yprime_fully_faithful(), "arrow: Y' fully faithful on a non-subcanonical site");
    let sp = tsub_closure(&fixtures::disc2_site(), 2, 8).map_err(|e| e.to_string())?;
    ensure!(sp.state.depth <= 8, "disc2: depth {}", sp.state.depth);
    ensure!(sp.yprime_fully_faithful(), "disc2: Y' not fully faithful");
    let (c, d) = (sp.site.base(), &*sp.category);
    for a in c.objects() {
        for b in c.objects() {
            let image: BTreeSet<ArrowId> = c.hom(a, b).iter().map(|&f| sp.yprime.arrows[f]).collect();
            let target: BTreeSet<ArrowId> = d.hom(sp.yprime.objects[a], sp.yprime.objects[b]).iter().copied().collect();
            ensure!(image.len() == c.hom(a, b).len() && image == target, "disc2: hom({a}, {b}) not bijective");
        }
    }
    Ok("arrow: fixpoint at depth 0, both images terminal; disc2: Y' bijective on all 16 hom-sets".into())
}

fn c7_covering_reflection() -> Outcome {
    let mut checked = 0;
    for (name, p) in [("arrow", fixtures::arrow_site()), ("disc2", fixtures::disc2_site())] {
        let sp = tsub_closure(&p, 2, 8).map_err(|e| e.to_string())?;
        let v = sp.reflects_coverings_check();
        ensure!(v.passed(), "{name}: {}", v.line(sp.ambient()));
        checked += v.checked;
    }
    Ok(format!("{checked} open sinks at fixpoint"))
}

fn c8_proof_metrics() -> Outcome {
    let rules = tsub_rules();
    let mut elements = 0;
    for (name, p) in [
        ("terminal", fixtures::terminal_site()),
        ("arrow", fixtures::arrow_site()),
        ("disc2", fixtures::disc2_site()),
        ("chain3", fixtures::chain3_site()),
    ] {
        let sp = tsub_closure(&p, 2, 8).map_err(|e| e.to_string())?;
        let bad = check_proofs(&rules, &sp.fragment, &sp.state).map_err(|e| e.to_string())?;
        ensure!(bad.is_none(), "{name}: proof of element {bad:?} does not replay");
        let m = sp.metrics();
        let plain = oracle::plain(&sp);
        ensure!(plain == m.plain, "{name}: plain opens differ from the oracle");
        let amb = sp.ambient();
        let opens = sp.state.opens();
        let open_h = |u: ArrowId| oracle::height(&sp, &plain, u, 8);
        let images: BTreeSet<ObjId> = sp.yoneda.objects.iter().copied().collect();
        let obj_h = |x: ObjId| -> Option<usize> {
            if images.contains(&x) {
                return Some(0);
            }
            images.iter().flat_map(|&t| amb.hom(x, t).iter().copied()).filter(|f| opens.contains(f)).filter_map(open_h).min()
        };
        for (i, e) in sp.state.elements().iter().enumerate() {
            let em = sp.proof_metrics(e, &m).map_err(|e| e.to_string())?;
            ensure!(em.proof_length <= sp.state.len(), "{name}: element {i} has an unbounded proof");
            let (height, biheight) = match e {
                Element::Object(x) => (obj_h(*x), None),
                Element::Arrow(f) if opens.contains(f) => (open_h(*f), open_h(*f).zip(obj_h(amb.dst(*f)))),
                Element::Arrow(f) => (None, obj_h(amb.src(*f)).zip(obj_h(amb.dst(*f)))),
                Element::Covering(_) => (None, None),
            };
            ensure!(em.height == height, "{name}: height of {} is {:?}, oracle {height:?}", e.name(amb), em.height);
            ensure!(em.biheight == biheight, "{name}: biheight of {} is {:?}, oracle {biheight:?}", e.name(amb), em.biheight);
            elements += 1;
        }
    }
    Ok(format!("{elements} derived elements, heights and biheights agree with path search"))
}

fn c9_atlases() -> Outcome {
    let ctx = JContext::inclusion(fixtures::sets_site(1), fixtures::sets_site(3));
    ctx.ensure_valid().map_err(|e| e.to_string())?;
    let cj = build_cj(&ctx, DEFAULT_OBJECT_BOUND).map_err(|e| e.to_string())?;
    let d = ctx.d.base().clone();
    let carriers: Vec<ObjId> = cj.objects.iter().map(|o| o.0).collect();
    ensure!(carriers == d.objects().collect::<Vec<_>>(), "objects do not biject with sets of size <= 3: {carriers:?}");
    ensure!(cj.category.n_arrows() == d.n_arrows(), "{} admissible arrows, {} functions", cj.category.n_arrows(), d.n_arrows());
    ensure!(cj.factors(&ctx), "J != J' J_C");
    let r = check_thcharts(&ctx, &cj, 3, 2, &|s| fixtures::jointly_surjective(&d, s)).map_err(|e| e.to_string())?;
    for v in &r.nearly {
        ensure!(v.passed(), "{}", v.line(&cj.category));
    }
    let th3 = r.universality.map_err(|e| e.to_string())?;
    ensure!(th3.len() == 4, "{} universality clauses", th3.len());
    for v in &th3 {
        ensure!(v.passed(), "{}", v.line(&cj.category));
    }
    Ok(format!("{} objects, {} arrows; four universality clauses pass at bound 3", carriers.len(), cj.category.n_arrows()))
}

fn c10_axiom_implications() -> Outcome {
    let mut n = 0;
    for (name, g) in fixture_candidates() {
        let strong = g.g5_passes(G5Form::Strong);
        let weak = g.g5_passes(G5Form::Weak);
        ensure!(!strong || weak, "{name}: strong G5 without weak G5");
        if strong && g.passes(&Clause::G4) {
            ensure!(g.check(Clause::G5P).passed(), "{name}: strong G5 and G4 without G5P");
        }
        n += 1;
    }
    let sites: Vec<(&str, Pretopology)> = vec![
        ("terminal", fixtures::terminal_site()),
        ("arrow", fixtures::arrow_site()),
        ("disc2", fixtures::disc2_site()),
        ("chain3", fixtures::chain3_site()),
        ("point", fixtures::point_site()),
        ("sets<=2", fixtures::sets_site(2)),
        ("disc2-minimal", Pretopology::minimal(Arc::new(fixtures::disc2()))),
    ];
    for (name, p) in &sites {
        let q = p.completed();
        ensure!(q.opens() == p.opens(), "{name}: PT4 completion changes the clopen arrows");
        ensure!(p.is_coarser_than(&q), "{name}: completion drops coverings");
    }
    Ok(format!("{n} axiom candidates, {} presites completed", sites.len()))
}

fn c11_sheaf_universe() -> Outcome {
    let bound = 4;
    let (mut idem, mut prods, mut pbs, mut beyond, mut limits) = (0, 0, 0, 0, 0);
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for (name, p) in [("arrow", fixtures::arrow_site()), ("disc2", fixtures::disc2_site()), ("chain3", fixtures::chain3_site())] {
        let base = p.base_arc().clone();
        let small = enumerate_presheaves(&base, 2, None);
        let sheafified: Vec<Option<glutos::sheafkit::Sheafified>> = small
            .iter()
            .map(|f| match sheafify(f, &p, bound) {
                Ok(a) => Ok(Some(a)),
                Err(SheafError::BoundExceeded(_)) => Ok(None),
                Err(e) => Err(e.to_string()),
            })
            .collect::<Result<_, _>>()?;
        for (f, a) in small.iter().zip(&sheafified) {
            let Some(a) = a else {
                beyond += 1;
                continue;
            };
            ensure!(a.sheaf.is_sheaf(&p), "{name}: sheafification of {:?} is not a sheaf", f.sizes());
            let aa = sheafify(&a.sheaf, &p, bound).map_err(|e| e.to_string())?;
            ensure!(is_natural_iso(&aa.unit, &a.sheaf, &aa.sheaf), "{name}: not idempotent at {:?}", f.sizes());
            idem += 1;
        }
        // Binary products and pullbacks on a seeded sample.
        for _ in 0..40 {
            let (i, j, k) = (rng.gen_range(0..small.len()), rng.gen_range(0..small.len()), rng.gen_range(0..small.len()));
            let (Some(ai), Some(aj), Some(ak)) = (&sheafified[i], &sheafified[j], &sheafified[k]) else {
                beyond += 1;
                continue;
            };
            let prod = small[i].product(&small[j]);
            if let Ok(ap) = sheafify(&prod, &p, bound) {
                ensure!(find_iso(&ap.sheaf, &ai.sheaf.product(&aj.sheaf)).is_some(), "{name}: a(PxQ) != aP x aQ");
                prods += 1;
            } else {
                beyond += 1;
            }
            let alphas = sheaf_hom_set(&small[i], &small[k]);
            let betas = sheaf_hom_set(&small[j], &small[k]);
            let (Some(alpha), Some(beta)) = (alphas.first(), betas.last()) else { continue };
            let (pb, _, _) = pullback_presheaf(&small[i], &small[j], alpha, beta);
            let Ok(apb) = sheafify(&pb, &p, bound) else {
                beyond += 1;
                continue;
            };
            let (Some(aa), Some(ab)) = (sheafify_map(alpha, ai, ak), sheafify_map(beta, aj, ak)) else {
                return Err(format!("{name}: sheafified maps not unique"));
            };
            let (shb, _, _) = pullback_presheaf(&ai.sheaf, &aj.sheaf, &aa, &ab);
            ensure!(find_iso(&apb.sheaf, &shb).is_some(), "{name}: a(P x_R Q) != aP x_aR aQ");
            pbs += 1;
        }
    }
    // Yoneda preserves the pullbacks and terminal objects the site has.
    for (name, p) in [("disc2", fixtures::disc2_site()), ("chain3", fixtures::chain3_site()), ("point", fixtures::point_site())] {
        let c = p.base();
        let y = yoneda_embed(&p, bound).map_err(|e| e.to_string())?;
        if let Some(t) = c.terminal_object() {
            ensure!(y.sheaf(t).sizes().iter().all(|&k| k == 1), "{name}: y(terminal) is not terminal");
            limits += 1;
        }
        for f in c.arrow_ids() {
            for g in c.arrows_into(c.dst(f)) {
                let Some(span) = c.pullback(f, g) else { continue };
                let (pb, _, _) = pullback_presheaf(y.sheaf(c.src(f)), y.sheaf(c.src(g)), &y.arrows[f], &y.arrows[g]);
                ensure!(find_iso(y.sheaf(span.apex), &pb).is_some(), "{name}: y does not preserve the pullback of {}, {}", c.arrow_name(f), c.arrow_name(g));
                limits += 1;
            }
        }
    }
    Ok(format!(
        "bound {bound}: {idem} idempotence, {prods} product, {pbs} pullback checks ({beyond} beyond bound); {limits} limits preserved by y"
    ))
}

const CRITERIA: [Criterion; 11] = [
    Criterion { id: 1, name: "operator algebra", tolerance: "exact", budget: Duration::from_secs(1), run: c1_operator_algebra },
    Criterion { id: 2, name: "gluon degeneracy", tolerance: "exact", budget: Duration::from_secs(1), run: c2_gluon_degeneracy },
    Criterion { id: 3, name: "gluing effectivity", tolerance: "exact", budget: Duration::from_secs(5), run: c3_gluing_effectivity },
    Criterion { id: 4, name: "local pullback criterion", tolerance: "exact agreement", budget: Duration::from_secs(30), run: c4_local_pullback },
    Criterion { id: 5, name: "nglu round trip", tolerance: "exact iso witness", budget: Duration::from_secs(60), run: c5_nglu_round_trip },
    Criterion { id: 6, name: "subcanonical closure", tolerance: "exact", budget: Duration::from_secs(60), run: c6_subcanonical_closure },
    Criterion { id: 7, name: "covering reflection", tolerance: "exact", budget: Duration::from_secs(30), run: c7_covering_reflection },
    Criterion { id: 8, name: "proof metrics", tolerance: "exact", budget: Duration::from_secs(60), run: c8_proof_metrics },
    Criterion { id: 9, name: "atlases", tolerance: "exact", budget: Duration::from_secs(60), run: c9_atlases },
    Criterion { id: 10, name: "axiom implications", tolerance: "exact", budget: Duration::from_secs(10), run: c10_axiom_implications },
    Criterion { id: 11, name: "sheaf-universe sanity", tolerance: "exact", budget: Duration::from_secs(30), run: c11_sheaf_universe },
];

fn main() -> ExitCode {
    let filter: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut failed = 0;
    for c in CRITERIA.iter().filter(|c| filter.is_empty() || filter.contains(&c.id)) {
        let start = Instant::now();
        let result = std::panic::catch_unwind(c.run).unwrap_or_else(|_| Err("panicked".into()));
        let elapsed = start.elapsed();
        let (ok, detail) = match result {
            Ok(d) if elapsed <= c.budget => (true, d),
            Ok(d) => (false, format!("{d}; over budget")),
            Err(e) => (false, e),
        };
        failed += usize::from(!ok);
        println!(
            "{} criterion {:>2} {:<26} tolerance {:<18} {:>8.3} s / {:>3} s  {}",
            if ok { "PASS" } else { "FAIL" },
            c.id,
            c.name,
            c.tolerance,
            elapsed.as_secs_f64(),
            c.budget.as_secs(),
            detail
        );
    }
    println!("acceptance: {failed} of {} criteria failed", CRITERIA.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
