//! Charts and atlases: for a functor `J: C -> D` between presites, objects
//! of `D` equipped with classes of atlases by objects of `C` form a new
//! presite `C_J` through which `J` factors.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use serde_json::{json, Value};
use thiserror::Error;

use crate::axioms::{check_factorization, check_nearly_glutos, check_universal_th3, AxiomError, Scale, Status, Verdict, Witness};
use crate::fincat::{ArrowId, Diagram, DiagramData, EffectiveEpi, FinCategory, ObjId, RawCategory, Sink};
use crate::site::{sinks_from, Coverage, Pretopology};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AtlasError {
    #[error("charts do not cover {0}")]
    NotACovering(String),
    #[error("chart {0} does not start at an image of J")]
    NotAChart(String),
    #[error("overlap of charts {0} and {1} has no presentation by clopens")]
    NoOverlapPresentation(usize, usize),
    #[error("no pullback of {0} along {1}")]
    MissingPullback(String, String),
    #[error("more than {0} objects with atlas classes")]
    BoundExceeded(usize),
    #[error("premise failed: {0}")]
    PremiseFailed(String),
    #[error(transparent)]
    Axiom(#[from] AxiomError),
}

/// A functor between presites, to be used for charts.
#[derive(Debug, Clone)]
pub struct JContext {
    pub c: Pretopology,
    pub d: Pretopology,
    pub j: Diagram,
}

impl JContext {
    pub fn new(c: Pretopology, d: Pretopology, j: Diagram) -> Self {
        JContext { c, d, j }
    }

    /// Inclusion of the skeleton of smaller finite-set sites.
    pub fn inclusion(c: Pretopology, d: Pretopology) -> Self {
        let (cc, dd) = (c.base(), d.base());
        let objects = cc.objects().map(|x| dd.obj(cc.object_name(x)).expect("object of the larger site")).collect();
        let arrows = cc.arrow_ids().map(|f| dd.arrow(cc.arrow_name(f)).expect("arrow of the larger site")).collect();
        let j = Diagram::new(cc.clone(), objects, arrows, dd).expect("inclusion is a functor");
        JContext { c, d, j }
    }

    pub fn identity(c: Pretopology) -> Self {
        let base = c.base();
        let j = Diagram::new(base.clone(), base.objects().collect(), base.arrow_ids().collect(), base).expect("identity");
        JContext { c: c.clone(), d: c, j }
    }

    fn image(&self, s: &Sink) -> Sink {
        Sink { apex: self.j.objects[s.apex], legs: s.legs.iter().map(|&u| self.j.arrows[u]).collect() }
    }

    /// Objects of `C` sent to `x`.
    pub fn preimages(&self, x: ObjId) -> Vec<ObjId> {
        self.c.base().objects().filter(|&u| self.j.objects[u] == x).collect()
    }

    /// Continuity, faithfulness and covering reflection of `J`, and the
    /// M-, subcanonical and factorization properties of both sites.
    pub fn premises(&self) -> Vec<Verdict> {
        let (c, d) = (self.c.base(), self.d.base());
        let check = |id: &str, failure: Option<String>| {
            let mut v = Verdict { axiom: id.into(), status: Status::Pass, clause: None, witness: None, checked: 1, out_of_bound: 0, bound: None };
            if let Some(note) = failure {
                v.status = Status::Fail;
                v.witness = Some(Witness { note, ..Default::default() });
            }
            v
        };
        let mut out = Vec::new();
        out.push(check("J.continuous", self.c.coverings().iter().find(|s| !self.d.covers(&self.image(s))).map(|s| s.display(c))));
        let unfaithful = c.objects().flat_map(|a| c.objects().map(move |b| (a, b))).find(|&(a, b)| {
            let imgs: BTreeSet<ArrowId> = c.hom(a, b).iter().map(|&f| self.j.arrows[f]).collect();
            imgs.len() != c.hom(a, b).len()
        });
        out.push(check("J.faithful", unfaithful.map(|(a, b)| format!("{} -> {}", c.object_name(a), c.object_name(b)))));
        let mut unreflected = None;
        'rc: for x in c.objects() {
            let into: Vec<ArrowId> = c.arrows_into(x).filter(|&u| self.c.is_open(u)).collect();
            for s in sinks_from(x, &into) {
                if self.d.covers(&self.image(&s)) && !self.c.covers(&s) {
                    unreflected = Some(s.display(c));
                    break 'rc;
                }
            }
        }
        out.push(check("J.reflects-coverings", unreflected));
        for (name, p, base) in [("C", &self.c, c), ("D", &self.d, d)] {
            let non_mono = p.coverings().iter().flat_map(|s| s.legs.iter()).find(|&&u| !base.is_mono(u));
            out.push(check(&format!("{name}.M-presite"), non_mono.map(|&u| base.arrow_name(u).to_string())));
            let bad = p.subcanonical_witness().filter(|(_, v)| !matches!(v, EffectiveEpi::Inapplicable { .. }));
            out.push(check(&format!("{name}.subcanonical"), bad.map(|(s, _)| s.display(base))));
            let mut f = check_factorization(p);
            f.axiom = format!("{name}.DG");
            out.push(f);
        }
        out
    }

    pub fn ensure_valid(&self) -> Result<(), AtlasError> {
        match self.premises().into_iter().find(|v| !v.passed()) {
            None => Ok(()),
            Some(v) => Err(AtlasError::PremiseFailed(format!("{}: {}", v.axiom, v.witness.map(|w| w.note).unwrap_or_default()))),
        }
    }
}

/// Presentation of an overlap `JU_i x_X JU_j` as `J` of two clopens out of
/// one object of `C`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Overlap {
    pub w: ObjId,
    pub left: ArrowId,
    pub right: ArrowId,
}

/// A validated atlas: charts from images of `J` covering `carrier`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct JAtlas {
    pub carrier: ObjId,
    /// Charts in leg order, each with the object of `C` it starts at.
    pub charts: Vec<(ObjId, ArrowId)>,
    pub overlaps: BTreeMap<(usize, usize), Overlap>,
}

impl JAtlas {
    pub fn sink(&self) -> Sink {
        Sink { apex: self.carrier, legs: self.charts.iter().map(|c| c.1).collect() }
    }
}

fn is_pullback(d: &FinCategory, f: ArrowId, g: ArrowId, p1: ArrowId, p2: ArrowId) -> bool {
    d.comp(f, p1) == d.comp(g, p2) && d.is_limit_cone(&DiagramData::cospan(d, f, g), d.src(p1), &[p1, p2, d.comp(f, p1)])
}

/// Checks that `charts` covers its apex and that every overlap is `J` of
/// a pair of clopens.
pub fn validate_atlas(ctx: &JContext, charts: &Sink) -> Result<JAtlas, AtlasError> {
    let (c, d) = (ctx.c.base(), ctx.d.base());
    if !ctx.d.covers(charts) {
        return Err(AtlasError::NotACovering(d.object_name(charts.apex).to_string()));
    }
    let mut legs = Vec::new();
    for &u in &charts.legs {
        let pre = ctx.preimages(d.src(u));
        let Some(&ui) = pre.first() else { return Err(AtlasError::NotAChart(d.arrow_name(u).to_string())) };
        legs.push((ui, u));
    }
    let mut overlaps = BTreeMap::new();
    for (i, &(ui, u)) in legs.iter().enumerate() {
        for (k, &(uj, v)) in legs.iter().enumerate() {
            let found = c.objects().find_map(|w| {
                c.hom(w, ui).iter().filter(|&&a| ctx.c.is_open(a)).find_map(|&a| {
                    c.hom(w, uj)
                        .iter()
                        .filter(|&&b| ctx.c.is_open(b))
                        .find(|&&b| is_pullback(d, u, v, ctx.j.arrows[a], ctx.j.arrows[b]))
                        .map(|&b| Overlap { w, left: a, right: b })
                })
            });
            overlaps.insert((i, k), found.ok_or(AtlasError::NoOverlapPresentation(i, k))?);
        }
    }
    Ok(JAtlas { carrier: charts.apex, charts: legs, overlaps })
}

/// Two atlases are compatible when their union is an atlas.
pub fn compatible(ctx: &JContext, a: &Sink, b: &Sink) -> bool {
    a.apex == b.apex && validate_atlas(ctx, &Sink { apex: a.apex, legs: a.legs.union(&b.legs).copied().collect() }).is_ok()
}

/// Compatibility classes of atlases on one object.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AtlasClass {
    pub carrier: ObjId,
    pub members: Vec<Sink>,
    /// Union of all members.
    pub representative: Sink,
}

/// All atlases on `x` (as sinks), in sink order.
pub fn atlases_on(ctx: &JContext, x: ObjId) -> Vec<Sink> {
    let d = ctx.d.base();
    let images: BTreeSet<ObjId> = ctx.j.objects.iter().copied().collect();
    let candidates: Vec<ArrowId> = d.arrows_into(x).filter(|&u| images.contains(&d.src(u))).collect();
    sinks_from(x, &candidates).into_iter().filter(|s| validate_atlas(ctx, s).is_ok()).collect()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EquivalenceReport {
    pub reflexive: bool,
    pub symmetric: bool,
    pub transitive: bool,
}

impl EquivalenceReport {
    pub fn holds(&self) -> bool {
        self.reflexive && self.symmetric && self.transitive
    }
}

/// Exhaustive check that compatibility is an equivalence on a list of
/// atlases.
pub fn compatibility_laws(ctx: &JContext, atlases: &[Sink]) -> EquivalenceReport {
    let n = atlases.len();
    let rel: Vec<Vec<bool>> = (0..n).map(|i| (0..n).map(|k| compatible(ctx, &atlases[i], &atlases[k])).collect()).collect();
    EquivalenceReport {
        reflexive: (0..n).all(|i| rel[i][i]),
        symmetric: (0..n).all(|i| (0..n).all(|k| rel[i][k] == rel[k][i])),
        transitive: (0..n).all(|i| (0..n).all(|k| (0..n).all(|l| !(rel[i][k] && rel[k][l]) || rel[i][l]))),
    }
}

/// Classes of mutually compatible atlases on `x`.
pub fn atlas_classes(ctx: &JContext, x: ObjId) -> Vec<AtlasClass> {
    let mut classes: Vec<AtlasClass> = Vec::new();
    for a in atlases_on(ctx, x) {
        match classes.iter_mut().find(|cl| compatible(ctx, &cl.members[0], &a)) {
            Some(cl) => {
                cl.representative.legs.extend(a.legs.iter().copied());
                cl.members.push(a);
            }
            None => classes.push(AtlasClass { carrier: x, representative: a.clone(), members: vec![a] }),
        }
    }
    classes
}

/// Presentation of the pullback of chart `v` along `f u` as `J w` with
/// `w` clopen.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Admission {
    pub w_obj: ObjId,
    pub w: ArrowId,
    pub f: ArrowId,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Admissibility {
    /// Per chart pair (source chart, target chart), when found.
    pub presentations: BTreeMap<(ArrowId, ArrowId), Admission>,
    /// The first chart pair without a presentation.
    pub failure: Option<(ArrowId, ArrowId)>,
}

impl Admissibility {
    pub fn admissible(&self) -> bool {
        self.failure.is_none()
    }

    /// All presented restrictions are themselves clopen in `C`.
    pub fn is_j_clopen(&self, ctx: &JContext) -> bool {
        self.admissible() && self.presentations.values().all(|a| ctx.c.is_open(a.f))
    }
}

/// Whether `f: X -> Y` is admissible for atlases `a` on `X` and `b` on `Y`.
pub fn is_admissible(ctx: &JContext, f: ArrowId, a: &Sink, b: &Sink) -> Result<Admissibility, AtlasError> {
    let (c, d) = (ctx.c.base(), ctx.d.base());
    let mut presentations = BTreeMap::new();
    for &u in &a.legs {
        let fu = d.comp(f, u);
        for &v in &b.legs {
            if d.pullback(v, fu).is_none() {
                return Err(AtlasError::MissingPullback(d.arrow_name(v).into(), d.arrow_name(fu).into()));
            }
            let mut found: Option<Admission> = None;
            for ui in ctx.preimages(d.src(u)) {
                for vk in ctx.preimages(d.src(v)) {
                    for wo in c.objects() {
                        for &w in c.hom(wo, ui).iter().filter(|&&w| ctx.c.is_open(w)) {
                            for &g in c.hom(wo, vk) {
                                if !is_pullback(d, v, fu, ctx.j.arrows[g], ctx.j.arrows[w]) {
                                    continue;
                                }
                                let better = found.as_ref().is_none_or(|old| !ctx.c.is_open(old.f) && ctx.c.is_open(g));
                                if better {
                                    found = Some(Admission { w_obj: wo, w, f: g });
                                }
                            }
                        }
                    }
                }
            }
            match found {
                Some(p) => {
                    presentations.insert((u, v), p);
                }
                None => return Ok(Admissibility { presentations, failure: Some((u, v)) }),
            }
        }
    }
    Ok(Admissibility { presentations, failure: None })
}

/// The presite of objects with atlas classes and the two functors
/// `J_C: C -> C_J` and `J': C_J -> D`.
#[derive(Debug, Clone)]
pub struct CjPresite {
    pub category: Arc<FinCategory>,
    pub pretopology: Pretopology,
    /// `(X, class)` for every object.
    pub objects: Vec<(ObjId, AtlasClass)>,
    /// Underlying arrow of `D` for every arrow.
    pub arrows: Vec<ArrowId>,
    pub j_c: Diagram,
    pub j_prime: Diagram,
    pub j_clopen: BTreeSet<ArrowId>,
}

impl CjPresite {
    /// `J = J' J_C` on objects and arrows.
    pub fn factors(&self, ctx: &JContext) -> bool {
        let c = ctx.c.base();
        c.objects().all(|x| self.j_prime.objects[self.j_c.objects[x]] == ctx.j.objects[x])
            && c.arrow_ids().all(|f| self.j_prime.arrows[self.j_c.arrows[f]] == ctx.j.arrows[f])
    }

    pub fn to_json(&self, d: &FinCategory) -> Value {
        let c = &*self.category;
        json!({
            "objects": self.objects.iter().enumerate().map(|(i, (x, cl))| json!({
                "name": c.object_name(i),
                "carrier": d.object_name(*x),
                "atlas": cl.representative.legs.iter().map(|&u| d.arrow_name(u)).collect::<Vec<_>>(),
                "class_size": cl.members.len(),
            })).collect::<Vec<_>>(),
            "arrows": c.arrow_ids().map(|f| json!({
                "name": c.arrow_name(f),
                "src": c.object_name(c.src(f)),
                "dst": c.object_name(c.dst(f)),
                "j_clopen": self.j_clopen.contains(&f),
            })).collect::<Vec<_>>(),
            "coverings": self.pretopology.coverings().iter().map(|s| s.display(c)).collect::<Vec<_>>(),
            "without_atlas": d.objects().filter(|x| self.objects.iter().all(|o| o.0 != *x)).map(|x| d.object_name(x)).collect::<Vec<_>>(),
        })
    }
}

pub const DEFAULT_OBJECT_BOUND: usize = 200;

pub fn build_cj(ctx: &JContext, object_bound: usize) -> Result<CjPresite, AtlasError> {
    let (c, d) = (ctx.c.base(), ctx.d.base());
    let per_object: Vec<Vec<AtlasClass>> = std::thread::scope(|s| {
        let handles: Vec<_> = d.objects().map(|x| s.spawn(move || atlas_classes(ctx, x))).collect();
        handles.into_iter().map(|h| h.join().expect("atlas enumeration panicked")).collect()
    });
    let objects: Vec<(ObjId, AtlasClass)> =
        per_object.into_iter().enumerate().flat_map(|(x, cls)| cls.into_iter().map(move |cl| (x, cl))).collect();
    if objects.len() > object_bound {
        return Err(AtlasError::BoundExceeded(object_bound));
    }
    let name = |i: usize| {
        let (x, cl) = &objects[i];
        let k = objects[..i].iter().filter(|(y, _)| y == x).count();
        let _ = cl;
        if objects.iter().filter(|(y, _)| y == x).count() == 1 {
            d.object_name(*x).to_string()
        } else {
            format!("{}[{k}]", d.object_name(*x))
        }
    };
    let names: Vec<String> = (0..objects.len()).map(name).collect();
    let mut raw = RawCategory::new();
    for n in &names {
        raw.object(n.clone());
    }
    let mut arrows: Vec<(usize, usize, ArrowId, Admissibility)> = Vec::new();
    for (i, (x, a)) in objects.iter().enumerate() {
        for (k, (y, b)) in objects.iter().enumerate() {
            for &f in d.hom(*x, *y) {
                let adm = is_admissible(ctx, f, &a.representative, &b.representative)?;
                if adm.admissible() {
                    arrows.push((i, k, f, adm));
                }
            }
        }
    }
    let arrow_name = |i: usize, k: usize, f: ArrowId| format!("{}:{}>{}", d.arrow_name(f), names[i], names[k]);
    let mut index: BTreeMap<(usize, usize, ArrowId), String> = BTreeMap::new();
    for (i, k, f, _) in &arrows {
        let n = arrow_name(*i, *k, *f);
        raw.arrow(n.clone(), names[*i].clone(), names[*k].clone());
        index.insert((*i, *k, *f), n);
    }
    for (i, (x, _)) in objects.iter().enumerate() {
        let id = index
            .get(&(i, i, d.id(*x)))
            .ok_or_else(|| AtlasError::PremiseFailed(format!("identity of {} is not admissible", names[i])))?;
        raw.identities.insert(names[i].clone(), id.clone());
    }
    for (i, k, f, _) in &arrows {
        for (k2, l, g, _) in &arrows {
            if k2 != k {
                continue;
            }
            let gf = index
                .get(&(*i, *l, d.comp(*g, *f)))
                .ok_or_else(|| AtlasError::PremiseFailed("admissible arrows are not closed under composition".into()))?;
            raw.compose(index[&(*k, *l, *g)].clone(), index[&(*i, *k, *f)].clone(), gf.clone());
        }
    }
    let category = Arc::new(raw.build().map_err(|e| AtlasError::PremiseFailed(e.to_string()))?);
    let underlying: Vec<ArrowId> = category
        .arrow_ids()
        .map(|a| {
            let n = category.arrow_name(a);
            *index.iter().find(|(_, v)| v.as_str() == n).map(|((_, _, f), _)| f).expect("named arrow")
        })
        .collect();
    let adm_of: BTreeMap<&str, &Admissibility> = arrows.iter().map(|(i, k, f, adm)| (index[&(*i, *k, *f)].as_str(), adm)).collect();
    let j_clopen: BTreeSet<ArrowId> = category
        .arrow_ids()
        .filter(|&a| category.is_mono(a) && adm_of[category.arrow_name(a)].is_j_clopen(ctx))
        .collect();
    let mut coverings = Vec::new();
    for x in category.objects() {
        let into: Vec<ArrowId> = category.arrows_into(x).filter(|a| j_clopen.contains(a)).collect();
        for s in sinks_from(x, &into) {
            let img = Sink { apex: objects[x].0, legs: s.legs.iter().map(|&a| underlying[a]).collect() };
            if ctx.d.covers(&img) {
                coverings.push(s);
            }
        }
    }
    let pretopology = Pretopology::new(category.clone(), coverings);
    let j_prime = Diagram::new(category.as_ref().clone(), objects.iter().map(|o| o.0).collect(), underlying.clone(), d)
        .map_err(|e| AtlasError::PremiseFailed(e.to_string()))?;
    // J_C sends X to (JX, [{id}]).
    let mut jc_objects = Vec::new();
    for x in c.objects() {
        let jx = ctx.j.objects[x];
        let identity = Sink::singleton(d, d.id(jx));
        let found = objects.iter().position(|(y, cl)| *y == jx && compatible(ctx, &cl.representative, &identity));
        jc_objects.push(found.ok_or_else(|| AtlasError::PremiseFailed(format!("no identity atlas on {}", d.object_name(jx))))?);
    }
    let mut jc_arrows = Vec::new();
    for f in c.arrow_ids() {
        let key = (jc_objects[c.src(f)], jc_objects[c.dst(f)], ctx.j.arrows[f]);
        let n = index.get(&key).ok_or_else(|| AtlasError::PremiseFailed(format!("J({}) is not admissible", c.arrow_name(f))))?;
        jc_arrows.push(category.arrow(n).expect("named arrow"));
    }
    let j_c = Diagram::new(c.clone(), jc_objects, jc_arrows, &category).map_err(|e| AtlasError::PremiseFailed(e.to_string()))?;
    Ok(CjPresite { category, pretopology, objects, arrows: underlying, j_c, j_prime, j_clopen })
}

/// Verdicts of the charts completion: the nearly-glutos suite on `C_J`
/// and, when its premises hold, the universality criterion for `J_C`.
#[derive(Debug, Clone)]
pub struct ChartsVerdicts {
    pub nearly: Vec<Verdict>,
    pub universality: Result<Vec<Verdict>, AxiomError>,
}

impl ChartsVerdicts {
    pub fn all_pass(&self) -> bool {
        self.nearly.iter().all(Verdict::passed) && self.universality.as_ref().is_ok_and(|v| v.iter().all(Verdict::passed))
    }
}

/// `d_epi` decides epi sinks of `D`; a sink of `C_J` is epi when its
/// image in `D` is.
pub fn check_thcharts(
    ctx: &JContext,
    cj: &CjPresite,
    bound: usize,
    max_index: usize,
    d_epi: &dyn Fn(&Sink) -> bool,
) -> Result<ChartsVerdicts, AtlasError> {
    let epi = |s: &Sink| d_epi(&Sink { apex: cj.j_prime.objects[s.apex], legs: s.legs.iter().map(|&a| cj.arrows[a]).collect() });
    let nearly = check_nearly_glutos(&cj.pretopology, Scale::AtBound(bound), max_index, &epi)?;
    let universality = check_universal_th3(&cj.j_c, &ctx.c, &cj.pretopology, &nearly, true);
    Ok(ChartsVerdicts { nearly, universality })
}
