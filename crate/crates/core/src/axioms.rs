//! Axiom suites for cloposes, precloposes, O-topologies, glutos structures and
//! nearly-glutos structures, morphism conditions and the universality criterion for
//! arrows from a presite into a nearly glutos.
//!
//! Every check enumerates instances of a clause and reports the first
//! failing one as a replayable witness. Over a bounded carrier (a sheaf
//! fragment) instances whose limits or colimits fall outside the bound are
//! counted separately instead of failing.

use std::collections::BTreeSet;
use std::fmt;
use std::sync::Arc;

use serde::Serialize;
use serde_json::{json, Value};
use thiserror::Error;

use crate::fincat::{ArrowId, Diagram, DiagramData, EffectiveEpi, FinCategory, ObjId, Sink};
use crate::glue::{enumerate_mgluons, equivalence_relation, gluon_colimit, induced_eqrel, EquivalenceRelation, GlueError};
use crate::sheafkit::{yoneda_embed, SheafError, SheafFragment};
use crate::site::{sinks_from, CloposStructure, Coverage, Pretopology};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AxiomError {
    #[error("not an M-presite: covering leg {0} is not mono")]
    NotMPresite(String),
    #[error("pretopology is not subcanonical at {0}")]
    NotSubcanonical(String),
    #[error("premise failed: {0}")]
    PremiseFailed(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Status {
    Pass,
    Fail,
    ProxyPass,
    Inapplicable,
}

impl Status {
    /// Proxy passes count only when allowed.
    pub fn is_pass(self, allow_proxy: bool) -> bool {
        self == Status::Pass || (allow_proxy && self == Status::ProxyPass)
    }
}

impl fmt::Display for Status {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Status::Pass => "pass",
            Status::Fail => "fail",
            Status::ProxyPass => "proxy-pass",
            Status::Inapplicable => "inapplicable",
        })
    }
}

/// Whether missing limits are failures or artifacts of a bound.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scale {
    Exact,
    AtBound(usize),
}

/// Objects, arrows and sinks naming one instance of a clause.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Witness {
    pub objects: Vec<ObjId>,
    pub arrows: Vec<ArrowId>,
    pub note: String,
}

impl Witness {
    fn arrows(arrows: Vec<ArrowId>) -> Self {
        Witness { arrows, ..Default::default() }
    }

    fn objects(objects: Vec<ObjId>) -> Self {
        Witness { objects, ..Default::default() }
    }

    fn with_note(mut self, note: String) -> Self {
        self.note = note;
        self
    }

    pub fn to_json(&self, c: &FinCategory) -> Value {
        json!({
            "objects": self.objects.iter().map(|&x| c.object_name(x)).collect::<Vec<_>>(),
            "arrows": self.arrows.iter().map(|&f| c.arrow_name(f)).collect::<Vec<_>>(),
            "note": self.note,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Verdict {
    pub axiom: String,
    pub status: Status,
    /// Clause identifier to replay the witness with.
    pub clause: Option<Clause>,
    pub witness: Option<Witness>,
    pub checked: usize,
    pub out_of_bound: usize,
    pub bound: Option<usize>,
}

impl Verdict {
    fn new(axiom: impl Into<String>, status: Status) -> Self {
        Verdict { axiom: axiom.into(), status, clause: None, witness: None, checked: 0, out_of_bound: 0, bound: None }
    }

    pub fn passed(&self) -> bool {
        self.status == Status::Pass
    }

    pub fn bound_note(&self) -> String {
        match self.bound {
            None => "exact".into(),
            Some(n) => format!("certified at bound {n}, {} instances out of bound", self.out_of_bound),
        }
    }

    pub fn to_json(&self, c: &FinCategory) -> Value {
        json!({
            "axiom": self.axiom,
            "status": self.status,
            "witness": self.witness.as_ref().map(|w| w.to_json(c)),
            "checked": self.checked,
            "bound": self.bound,
            "out_of_bound": self.out_of_bound,
        })
    }

    pub fn line(&self, c: &FinCategory) -> String {
        let mut s = format!("{:<24} {:<12} {} instances, {}", self.axiom, self.status.to_string(), self.checked, self.bound_note());
        if let Some(w) = &self.witness {
            let objs: Vec<&str> = w.objects.iter().map(|&x| c.object_name(x)).collect();
            let arrs: Vec<&str> = w.arrows.iter().map(|&f| c.arrow_name(f)).collect();
            s += &format!("\n    witness: objects [{}] arrows [{}] {}", objs.join(", "), arrs.join(", "), w.note);
        }
        s
    }
}

/// Clauses of the glutos axioms, each checked instance by instance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Clause {
    G1Iso,
    G1Pullbackable,
    G1Composition,
    G1Pullback,
    G2,
    G4aCoproducts,
    G4aDisjoint,
    G4aUniversal,
    G4aInjections,
    G4b,
    G5a,
    G5b,
    G5cWeak,
    G5cStrong,
    G5P,
    G6,
    G9,
}

impl Clause {
    pub fn id(self) -> &'static str {
        match self {
            Clause::G1Iso => "G1.iso",
            Clause::G1Pullbackable => "G1.pullbackable",
            Clause::G1Composition => "G1.composition",
            Clause::G1Pullback => "G1.pullback",
            Clause::G2 => "G2",
            Clause::G4aCoproducts => "G4a.coproducts",
            Clause::G4aDisjoint => "G4a.disjoint",
            Clause::G4aUniversal => "G4a.universal",
            Clause::G4aInjections => "G4a.open-injections",
            Clause::G4b => "G4b",
            Clause::G5a => "G5a",
            Clause::G5b => "G5b",
            Clause::G5cWeak => "G5c",
            Clause::G5cStrong => "G5cu",
            Clause::G5P => "G5P",
            Clause::G6 => "G6",
            Clause::G9 => "G9",
        }
    }

    pub const G1: [Clause; 4] = [Clause::G1Iso, Clause::G1Pullbackable, Clause::G1Composition, Clause::G1Pullback];
    pub const G4: [Clause; 5] =
        [Clause::G4aCoproducts, Clause::G4aDisjoint, Clause::G4aUniversal, Clause::G4aInjections, Clause::G4b];
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum G5Form {
    /// Only finitely locally O-coequalizable open equivalence relations.
    Weak,
    /// All open equivalence relations.
    Strong,
}

impl G5Form {
    fn clause(self) -> Clause {
        match self {
            G5Form::Weak => Clause::G5cWeak,
            G5Form::Strong => Clause::G5cStrong,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Outcome {
    Holds,
    Fails(String),
    OutOfBound,
}

/// A category with a class of open arrows, to be tested against the
/// glutos axioms.
#[derive(Debug, Clone)]
pub struct GlutosCandidate {
    pub base: Arc<FinCategory>,
    pub opens: BTreeSet<ArrowId>,
    pub scale: Scale,
}

impl GlutosCandidate {
    pub fn new(base: Arc<FinCategory>, opens: impl IntoIterator<Item = ArrowId>, scale: Scale) -> Self {
        GlutosCandidate { base, opens: opens.into_iter().collect(), scale }
    }

    pub fn all_open(base: Arc<FinCategory>, scale: Scale) -> Self {
        let opens: Vec<ArrowId> = base.arrow_ids().collect();
        Self::new(base, opens, scale)
    }

    /// Opens are the clopen arrows of a presite.
    pub fn from_site(p: &Pretopology) -> Self {
        Self::new(p.base_arc().clone(), p.opens().iter().copied(), Scale::Exact)
    }

    /// Bounded universe of finite sets: sheaves on the one-point site.
    pub fn topos_fragment(bound: usize) -> Self {
        let frag = SheafFragment::enumerate(&crate::fixtures::terminal_site(), bound);
        Self::all_open(frag.category.clone(), Scale::AtBound(bound))
    }

    pub fn is_open(&self, f: ArrowId) -> bool {
        self.opens.contains(&f)
    }

    pub fn clopos(&self) -> CloposStructure {
        CloposStructure::new(self.base.clone(), self.opens.iter().copied())
    }

    fn c(&self) -> &FinCategory {
        &self.base
    }

    fn missing(&self, what: String) -> Outcome {
        match self.scale {
            Scale::Exact => Outcome::Fails(what),
            Scale::AtBound(_) => Outcome::OutOfBound,
        }
    }

    fn open_into(&self, x: ObjId) -> Vec<ArrowId> {
        self.c().arrows_into(x).filter(|&f| self.is_open(f)).collect()
    }

    fn open_epi(&self, f: ArrowId) -> bool {
        self.is_open(f) && self.c().is_epi(f)
    }

    /// Every instance of a clause, in a canonical order.
    pub fn instances(&self, clause: Clause) -> Vec<Witness> {
        let c = self.c();
        let pairs = || c.objects().flat_map(move |x| c.objects().map(move |y| vec![x, y]));
        let opens = || self.opens.iter().copied();
        match clause {
            Clause::G1Iso => c.arrow_ids().map(|f| Witness::arrows(vec![f])).collect(),
            Clause::G1Pullbackable | Clause::G5a => opens().map(|f| Witness::arrows(vec![f])).collect(),
            Clause::G1Composition => opens()
                .flat_map(|f| opens().filter(move |&g| c.src(g) == c.dst(f)).map(move |g| Witness::arrows(vec![g, f])))
                .collect(),
            Clause::G1Pullback => {
                opens().flat_map(|f| c.arrows_into(c.dst(f)).map(move |g| Witness::arrows(vec![f, g]))).collect()
            }
            Clause::G2 => opens()
                .flat_map(|f| c.arrows_into(c.src(f)).map(move |g| Witness::arrows(vec![f, g])))
                .filter(|w| self.is_open(c.comp(w.arrows[0], w.arrows[1])))
                .collect(),
            Clause::G4aCoproducts => std::iter::once(Witness::objects(vec![])).chain(pairs().map(Witness::objects)).collect(),
            Clause::G4aDisjoint | Clause::G4aInjections => pairs().map(Witness::objects).collect(),
            Clause::G4aUniversal => {
                let mut out = Vec::new();
                if let Some(w) = c.colimit_of(&DiagramData::discrete(&[])) {
                    out.extend(c.arrows_into(w.apex).map(|g| Witness { objects: vec![], arrows: vec![g], note: String::new() }));
                }
                for xy in pairs() {
                    if let Some(w) = c.colimit_of(&DiagramData::discrete(&xy)) {
                        out.extend(c.arrows_into(w.apex).map(|g| Witness { objects: xy.clone(), arrows: vec![g], note: String::new() }));
                    }
                }
                out
            }
            Clause::G4b => {
                let mut out: Vec<Witness> = c.objects().map(|x| Witness::objects(vec![x])).collect();
                for x in c.objects() {
                    let into = self.open_into(x);
                    for &a in &into {
                        for &b in &into {
                            out.push(Witness::arrows(vec![a, b]));
                        }
                    }
                }
                out
            }
            Clause::G5b => opens()
                .filter(|&p| c.is_epi(p))
                .flat_map(|p| c.arrows_from(c.dst(p)).map(move |f| Witness::arrows(vec![f, p])))
                .filter(|w| self.is_open(c.comp(w.arrows[0], w.arrows[1])))
                .collect(),
            Clause::G5cWeak | Clause::G5cStrong => {
                let mut out = Vec::new();
                for u in opens() {
                    for &v in c.hom(c.src(u), c.dst(u)) {
                        if self.is_open(v) && equivalence_relation(c, u, v).is_ok() {
                            out.push(Witness::arrows(vec![u, v]));
                        }
                    }
                }
                out
            }
            Clause::G5P => {
                let mut out = Vec::new();
                for r in opens().filter(|&r| self.open_epi(r)) {
                    for g in c.arrows_from(c.dst(r)) {
                        for f in c.arrows_into(c.dst(g)) {
                            out.push(Witness::arrows(vec![r, g, f]));
                        }
                    }
                }
                out
            }
            Clause::G6 => {
                let mut out = vec![Witness::default().with_note("tau_O is a pretopology".into())];
                for x in c.objects() {
                    for s in sinks_from(x, &self.open_into(x)) {
                        if c.is_epi_family(&s) {
                            out.push(Witness { objects: vec![x], arrows: s.legs.into_iter().collect(), note: String::new() });
                        }
                    }
                }
                out
            }
            Clause::G9 => c.arrow_ids().filter(|&u| !self.is_open(u)).map(|u| Witness::arrows(vec![u])).collect(),
        }
    }

    fn test(&self, clause: Clause, w: &Witness) -> Outcome {
        let c = self.c();
        let a = &w.arrows;
        let fails = |cond: bool, msg: &str| if cond { Outcome::Fails(msg.to_string()) } else { Outcome::Holds };
        match clause {
            Clause::G1Iso => fails(c.is_iso(a[0]) && !self.is_open(a[0]), "iso is not open"),
            Clause::G1Pullbackable => {
                if c.is_pullbackable(a[0]) {
                    Outcome::Holds
                } else {
                    self.missing("open arrow is not pullbackable".into())
                }
            }
            Clause::G1Composition => fails(!self.is_open(c.comp(a[0], a[1])), "composite of opens is not open"),
            Clause::G1Pullback => match c.pullback(a[0], a[1]) {
                Some(sp) => fails(!self.is_open(sp.p2), "pullback of an open arrow is not open"),
                None => Outcome::Holds,
            },
            Clause::G2 => fails(!self.is_open(a[1]), "g is not open although fg and f are"),
            Clause::G4aCoproducts => match c.colimit_of(&DiagramData::discrete(&w.objects)) {
                Some(_) => Outcome::Holds,
                None => self.missing("no coproduct".into()),
            },
            Clause::G4aDisjoint => {
                let Some(cp) = c.colimit_of(&DiagramData::discrete(&w.objects)) else { return Outcome::Holds };
                if !cp.legs.iter().all(|&i| c.is_mono(i)) {
                    return Outcome::Fails("coproduct injection is not mono".into());
                }
                match c.pullback(cp.legs[0], cp.legs[1]) {
                    Some(sp) if c.is_initial(sp.apex) => Outcome::Holds,
                    Some(sp) => Outcome::Fails(format!("injections meet in {}, which is not initial", c.object_name(sp.apex))),
                    None => self.missing("injections have no pullback".into()),
                }
            }
            Clause::G4aUniversal => {
                let g = a[0];
                let Some(cp) = c.colimit_of(&DiagramData::discrete(&w.objects)) else { return Outcome::Holds };
                let mut nodes = Vec::new();
                let mut legs = Vec::new();
                for &i in &cp.legs {
                    match c.pullback(i, g) {
                        Some(sp) => {
                            nodes.push(sp.apex);
                            legs.push(sp.p2);
                        }
                        None => return self.missing("injection has no pullback".into()),
                    }
                }
                fails(
                    !c.is_colimit_cocone(&DiagramData::discrete(&nodes), c.src(g), &legs),
                    "pulled-back injections do not form a coproduct",
                )
            }
            Clause::G4aInjections => match c.colimit_of(&DiagramData::discrete(&w.objects)) {
                Some(cp) => fails(!cp.legs.iter().all(|&i| self.is_open(i)), "coproduct injection is not open"),
                None => Outcome::Holds,
            },
            Clause::G4b => {
                let (srcs, target) = if a.is_empty() {
                    (vec![], w.objects[0])
                } else {
                    (a.iter().map(|&u| c.src(u)).collect::<Vec<_>>(), c.dst(a[0]))
                };
                let Some(cp) = c.colimit_of(&DiagramData::discrete(&srcs)) else {
                    return self.missing("no coproduct".into());
                };
                let m = c.hom(cp.apex, target).iter().copied().find(|&m| (0..a.len()).all(|k| c.comp(m, cp.legs[k]) == a[k]));
                match m {
                    Some(m) => fails(!self.is_open(m), "colimit arrow is not open"),
                    None => Outcome::Fails("no colimit arrow".into()),
                }
            }
            Clause::G5a => {
                if !c.is_epi(a[0]) {
                    return Outcome::Holds;
                }
                match c.is_effective_epi_family(&Sink::singleton(c, a[0]), false) {
                    EffectiveEpi::Effective => Outcome::Holds,
                    EffectiveEpi::NotEffective { .. } => Outcome::Fails("open epi is not effective".into()),
                    EffectiveEpi::Inapplicable { .. } => self.missing("kernel pair missing".into()),
                }
            }
            Clause::G5b => fails(!self.is_open(a[0]), "f is not open although fp and p are"),
            Clause::G5cWeak | Clause::G5cStrong => {
                let Ok(e) = equivalence_relation(c, a[0], a[1]) else { return Outcome::Holds };
                if clause == Clause::G5cWeak && !self.finitely_locally_coequalizable(&e) {
                    return Outcome::Holds;
                }
                self.universal_open_coequalizer(&e)
            }
            Clause::G5P => {
                let (r, g, f) = (a[0], a[1], a[2]);
                match c.pullback(f, c.comp(g, r)) {
                    Some(_) => fails(c.pullback(f, g).is_none(), "no pullback of f along g"),
                    None => Outcome::Holds,
                }
            }
            Clause::G6 => {
                if a.is_empty() {
                    let tau = self.tau_o();
                    return match tau.validate().violations.first() {
                        None => Outcome::Holds,
                        Some(v) => match self.scale {
                            Scale::Exact => Outcome::Fails(v.describe(c)),
                            Scale::AtBound(_) => Outcome::OutOfBound,
                        },
                    };
                }
                let s = Sink { apex: w.objects[0], legs: a.iter().copied().collect() };
                match c.is_effective_epi_family(&s, true) {
                    EffectiveEpi::Effective => Outcome::Holds,
                    EffectiveEpi::NotEffective { .. } => Outcome::Fails("open epi sink is not universal effective".into()),
                    EffectiveEpi::Inapplicable { .. } => self.missing("pullback missing".into()),
                }
            }
            Clause::G9 => {
                let u = a[0];
                let legs: Vec<ArrowId> =
                    self.open_into(c.src(u)).into_iter().filter(|&v| self.is_open(c.comp(u, v))).collect();
                fails(
                    c.is_epi_family(&Sink { apex: c.src(u), legs: legs.into_iter().collect() }),
                    "arrow is locally open for tau_O but not open",
                )
            }
        }
    }

    /// Open sinks with an open epi refinement; for finite sinks these are
    /// the open epi sinks.
    pub fn tau_o(&self) -> Pretopology {
        let c = self.c();
        let mut cov = Vec::new();
        for x in c.objects() {
            cov.extend(sinks_from(x, &self.open_into(x)).into_iter().filter(|s| c.is_epi_family(s)));
        }
        Pretopology::new(self.base.clone(), cov)
    }

    fn is_o_coequalizable(&self, d0: ArrowId, d1: ArrowId) -> bool {
        let c = self.c();
        c.arrows_from(c.dst(d0)).any(|q| self.is_open(q) && c.comp(q, d0) == c.comp(q, d1))
    }

    /// An open epi family whose induced relations are O-coequalizable. Such
    /// families are closed upwards, so the largest candidate decides.
    pub fn finitely_locally_coequalizable(&self, e: &EquivalenceRelation) -> bool {
        let c = self.c();
        let x = c.dst(e.d0);
        let good: BTreeSet<ArrowId> = self
            .open_into(x)
            .into_iter()
            .filter(|&w| induced_eqrel(c, w, e).is_ok_and(|r| self.is_o_coequalizable(r.d0, r.d1)))
            .collect();
        c.is_epi_family(&Sink { apex: x, legs: good })
    }

    fn universal_open_coequalizer(&self, e: &EquivalenceRelation) -> Outcome {
        let c = self.c();
        let (u, v) = (e.d0, e.d1);
        let Some(cq) = c.colimit_of(&DiagramData::parallel(c, u, v)) else {
            return self.missing("no coequalizer".into());
        };
        let q = cq.legs[1];
        if !self.is_open(q) {
            return Outcome::Fails("coequalizer is not open".into());
        }
        if !c.is_limit_cone(&DiagramData::cospan(c, q, q), c.src(u), &[u, v, c.comp(q, u)]) {
            return Outcome::Fails("relation is not the kernel pair of its coequalizer".into());
        }
        for g in c.arrows_into(cq.apex).collect::<Vec<_>>() {
            let (Some(px), Some(pu)) = (c.pullback(q, g), c.pullback(c.comp(q, u), g)) else {
                return self.missing("pullback along the coequalizer missing".into());
            };
            let lift = |d: ArrowId| {
                c.hom(pu.apex, px.apex)
                    .iter()
                    .copied()
                    .find(|&h| c.comp(px.p1, h) == c.comp(d, pu.p1) && c.comp(px.p2, h) == pu.p2)
            };
            let (Some(u2), Some(v2)) = (lift(u), lift(v)) else {
                return Outcome::Fails(format!("pulled-back relation along {} does not lift", c.arrow_name(g)));
            };
            let legs = [c.comp(px.p2, u2), px.p2];
            if !c.is_colimit_cocone(&DiagramData::parallel(c, u2, v2), c.src(g), &legs) {
                return Outcome::Fails(format!("coequalizer is not stable along {}", c.arrow_name(g)));
            }
        }
        Outcome::Holds
    }

    /// Runs one clause over all its instances.
    pub fn check(&self, clause: Clause) -> Verdict {
        let mut v = Verdict::new(clause.id(), Status::Pass);
        v.clause = Some(clause);
        if let Scale::AtBound(n) = self.scale {
            v.bound = Some(n);
        }
        for w in self.instances(clause) {
            v.checked += 1;
            match self.test(clause, &w) {
                Outcome::Holds => {}
                Outcome::OutOfBound => v.out_of_bound += 1,
                Outcome::Fails(msg) => {
                    v.status = Status::Fail;
                    v.witness = Some(w.with_note(msg));
                    return v;
                }
            }
        }
        v
    }

    /// Re-runs the witness of a failed verdict; true when it fails again.
    pub fn replay(&self, v: &Verdict) -> bool {
        match (v.clause, &v.witness) {
            (Some(cl), Some(w)) => matches!(self.test(cl, w), Outcome::Fails(_)),
            _ => false,
        }
    }

    fn check_group(&self, id: &str, clauses: &[Clause]) -> Verdict {
        let mut total = Verdict::new(id, Status::Pass);
        total.bound = match self.scale {
            Scale::AtBound(n) => Some(n),
            Scale::Exact => None,
        };
        for &cl in clauses {
            let v = self.check(cl);
            total.checked += v.checked;
            total.out_of_bound += v.out_of_bound;
            if !v.passed() {
                total.status = Status::Fail;
                total.clause = v.clause;
                total.witness = v.witness.map(|w| {
                    let note = format!("{}: {}", cl.id(), w.note);
                    w.with_note(note)
                });
                break;
            }
        }
        total
    }

    pub fn passes(&self, clauses: &[Clause]) -> bool {
        clauses.iter().all(|&cl| self.check(cl).passed())
    }

    pub fn g5_passes(&self, form: G5Form) -> bool {
        self.passes(&[Clause::G5a, Clause::G5b, form.clause()])
    }
}

/// (G1) on a clopos structure.
pub fn check_clopos(c: &CloposStructure) -> Verdict {
    GlutosCandidate::new(c.base.clone(), c.opens.iter().copied(), Scale::Exact).check_group("G1", &Clause::G1)
}

/// Isos open, opens closed under composition, and open fillers for every
/// commutative square with right leg open.
pub fn check_preclopos(base: &Arc<FinCategory>, opens: &BTreeSet<ArrowId>) -> Verdict {
    let c = &**base;
    let mut v = Verdict::new("qp", Status::Pass);
    let fail = |w: Witness, v: &mut Verdict| {
        v.status = Status::Fail;
        v.witness = Some(w);
    };
    for f in c.arrow_ids() {
        v.checked += 1;
        if c.is_iso(f) && !opens.contains(&f) {
            fail(Witness::arrows(vec![f]).with_note("iso is not open".into()), &mut v);
            return v;
        }
    }
    for &f in opens {
        for &g in opens {
            v.checked += 1;
            if c.src(g) == c.dst(f) && !opens.contains(&c.comp(g, f)) {
                fail(Witness::arrows(vec![g, f]).with_note("composite of opens is not open".into()), &mut v);
                return v;
            }
        }
    }
    for &u in opens {
        let x = c.dst(u);
        for f in c.arrows_into(x) {
            for z in c.objects() {
                for &alpha in c.hom(z, c.src(u)) {
                    for &beta in c.hom(z, c.src(f)) {
                        if c.comp(u, alpha) != c.comp(f, beta) {
                            continue;
                        }
                        v.checked += 1;
                        if !has_open_filler(c, opens, alpha, beta, u, f) {
                            fail(Witness::arrows(vec![alpha, beta, u, f]).with_note("square has no open filler".into()), &mut v);
                            return v;
                        }
                    }
                }
            }
        }
    }
    v
}

fn has_open_filler(c: &FinCategory, opens: &BTreeSet<ArrowId>, alpha: ArrowId, beta: ArrowId, u: ArrowId, f: ArrowId) -> bool {
    let (z, uo, y) = (c.src(alpha), c.src(u), c.src(f));
    c.objects().any(|w| {
        c.hom(w, y).iter().any(|&vv| {
            opens.contains(&vv)
                && c.hom(z, w).iter().any(|&k| {
                    c.comp(vv, k) == beta
                        && c.hom(w, uo).iter().any(|&h| c.comp(h, k) == alpha && c.comp(u, h) == c.comp(f, vv))
                })
        })
    })
}

/// A sieve generated by open arrows: its members are the arrows that
/// factor through some generator.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct OSieve {
    pub apex: ObjId,
    pub members: BTreeSet<ArrowId>,
    pub generators: BTreeSet<ArrowId>,
}

impl OSieve {
    pub fn generated(c: &FinCategory, apex: ObjId, generators: impl IntoIterator<Item = ArrowId>) -> Self {
        let generators: BTreeSet<ArrowId> = generators.into_iter().collect();
        let members = c.arrows_into(apex).filter(|&f| generators.iter().any(|&u| c.factors_through(f, u))).collect();
        OSieve { apex, members, generators }
    }

    pub fn maximal(c: &FinCategory, x: ObjId) -> Self {
        Self::generated(c, x, [c.id(x)])
    }

    /// Recognizes a set of arrows into `apex` as an O-sieve: it must be
    /// generated by its own open members.
    pub fn recognize(c: &FinCategory, opens: &BTreeSet<ArrowId>, apex: ObjId, members: &BTreeSet<ArrowId>) -> Option<Self> {
        let gens: Vec<ArrowId> = members.iter().copied().filter(|f| opens.contains(f)).collect();
        let s = Self::generated(c, apex, gens);
        (s.members == *members).then_some(s)
    }

    /// `f^*R = {g : f g ∈ R}`.
    pub fn pullback_members(&self, c: &FinCategory, f: ArrowId) -> BTreeSet<ArrowId> {
        c.arrows_into(c.src(f)).filter(|&g| self.members.contains(&c.comp(f, g))).collect()
    }
}

/// (GT1)–(GT3) for a family of sieves on a preclopos.
pub fn check_o_topology(c: &FinCategory, opens: &BTreeSet<ArrowId>, family: &[OSieve]) -> Result<Vec<Verdict>, AxiomError> {
    let tau: BTreeSet<(ObjId, BTreeSet<ArrowId>)> = family.iter().map(|s| (s.apex, s.members.clone())).collect();
    for s in family {
        if OSieve::recognize(c, opens, s.apex, &s.members).is_none() {
            return Err(AxiomError::PremiseFailed(format!("sieve on {} is not O-generated", c.object_name(s.apex))));
        }
    }
    let has = |x: ObjId, m: &BTreeSet<ArrowId>| tau.contains(&(x, m.clone()));
    let mut gt1 = Verdict::new("GT1", Status::Pass);
    for x in c.objects() {
        gt1.checked += 1;
        if !has(x, &OSieve::maximal(c, x).members) {
            gt1.status = Status::Fail;
            gt1.witness = Some(Witness::objects(vec![x]).with_note("maximal sieve missing".into()));
            break;
        }
    }
    let mut gt2 = Verdict::new("GT2", Status::Pass);
    'gt2: for r in family {
        for f in c.arrows_into(r.apex) {
            gt2.checked += 1;
            let pulled = r.pullback_members(c, f);
            if OSieve::recognize(c, opens, c.src(f), &pulled).is_none() || !has(c.src(f), &pulled) {
                gt2.status = Status::Fail;
                gt2.witness = Some(Witness {
                    objects: vec![r.apex],
                    arrows: std::iter::once(f).chain(r.generators.iter().copied()).collect(),
                    note: "pullback sieve missing".into(),
                });
                break 'gt2;
            }
        }
    }
    let mut gt3 = Verdict::new("GT3", Status::Pass);
    'gt3: for x in c.objects() {
        let candidates = o_sieves_on(c, opens, x);
        for r in family.iter().filter(|r| r.apex == x) {
            for r2 in &candidates {
                gt3.checked += 1;
                let local = r.members.iter().all(|&v| has(c.src(v), &r2.pullback_members(c, v)));
                if local && !has(x, &r2.members) {
                    gt3.status = Status::Fail;
                    gt3.witness = Some(Witness {
                        objects: vec![x],
                        arrows: r2.generators.iter().copied().collect(),
                        note: "locally covering sieve is missing".into(),
                    });
                    break 'gt3;
                }
            }
        }
    }
    Ok(vec![gt1, gt2, gt3])
}

/// All O-sieves on `x`, deduplicated by members.
pub fn o_sieves_on(c: &FinCategory, opens: &BTreeSet<ArrowId>, x: ObjId) -> Vec<OSieve> {
    let into: Vec<ArrowId> = c.arrows_into(x).filter(|f| opens.contains(f)).collect();
    let mut seen = BTreeSet::new();
    let mut out = Vec::new();
    for s in sinks_from(x, &into) {
        let sv = OSieve::generated(c, x, s.legs);
        if seen.insert(sv.members.clone()) {
            out.push(sv);
        }
    }
    out
}

/// Sieves generated by the coverings of a presite.
pub fn sieves_of_coverings(p: &Pretopology) -> Vec<OSieve> {
    let c = p.base();
    let mut seen = BTreeSet::new();
    let mut out = Vec::new();
    for s in p.coverings() {
        let sv = OSieve::generated(c, s.apex, s.legs.iter().copied());
        if seen.insert((sv.apex, sv.members.clone())) {
            out.push(sv);
        }
    }
    out
}

/// Glutos suite: (G1), (G2), (G4), (G5) in the requested form, (G5P) and
/// the presite-level (G6), (G9). Clauses run concurrently; the result is
/// sorted by axiom id.
pub fn check_glutos_suite(g: &GlutosCandidate, form: G5Form) -> Vec<Verdict> {
    let groups: Vec<(&str, Vec<Clause>)> = vec![
        ("G1", Clause::G1.to_vec()),
        ("G2", vec![Clause::G2]),
        ("G4a.coproducts", vec![Clause::G4aCoproducts]),
        ("G4a.disjoint", vec![Clause::G4aDisjoint]),
        ("G4a.universal", vec![Clause::G4aUniversal]),
        ("G4a.open-injections", vec![Clause::G4aInjections]),
        ("G4b", vec![Clause::G4b]),
        ("G5a", vec![Clause::G5a]),
        ("G5b", vec![Clause::G5b]),
        (form.clause().id(), vec![form.clause()]),
        ("G5P", vec![Clause::G5P]),
        ("G6", vec![Clause::G6]),
        ("G9", vec![Clause::G9]),
    ];
    let mut out: Vec<Verdict> = std::thread::scope(|s| {
        let handles: Vec<_> = groups.iter().map(|(id, cls)| s.spawn(move || g.check_group(id, cls))).collect();
        handles.into_iter().map(|h| h.join().expect("axiom check panicked")).collect()
    });
    out.sort_by(|a, b| a.axiom.cmp(&b.axiom));
    out
}

/// Nearly-glutos conditions (NG1)–(NG3) and gluing of clopen M-gluons with
/// at most `max_index` pieces. `is_epi` decides epi sinks of the carrier.
pub fn check_nearly_glutos(
    p: &Pretopology,
    scale: Scale,
    max_index: usize,
    is_epi: &dyn Fn(&Sink) -> bool,
) -> Result<Vec<Verdict>, AxiomError> {
    let c = p.base();
    for s in p.coverings() {
        if let Some(&u) = s.legs.iter().find(|&&u| !c.is_mono(u)) {
            return Err(AxiomError::NotMPresite(c.arrow_name(u).to_string()));
        }
    }
    if let Some((s, v)) = p.subcanonical_witness() {
        let inapplicable = matches!(v, EffectiveEpi::Inapplicable { .. });
        if !(inapplicable && matches!(scale, Scale::AtBound(_))) {
            return Err(AxiomError::NotSubcanonical(s.display(c)));
        }
    }
    let bound = match scale {
        Scale::AtBound(n) => Some(n),
        Scale::Exact => None,
    };
    let mk = |id: &str| {
        let mut v = Verdict::new(id, Status::Pass);
        v.bound = bound;
        v
    };
    let open_into = |x: ObjId| -> Vec<ArrowId> { c.arrows_into(x).filter(|&f| p.is_open(f)).collect() };

    // Finite carriers have finitely many clopen subobjects; `checked`
    // counts them.
    let mut ng1 = mk("NG1");
    ng1.checked = c.objects().map(|x| clopen_subobjects(c, &open_into(x)).len()).sum();

    let mut ng2 = check_factorization(p);
    ng2.bound = bound;
    let mut ng3 = mk("NG3");
    'ng3: for x in c.objects() {
        for s in sinks_from(x, &open_into(x)) {
            if !is_epi(&s) {
                continue;
            }
            ng3.checked += 1;
            if !p.covers(&s) {
                ng3.status = Status::Fail;
                ng3.witness = Some(Witness { objects: vec![x], arrows: s.legs.iter().copied().collect(), note: "epi sink of clopens is not a covering".into() });
                break 'ng3;
            }
        }
    }

    let mut g45 = mk("G4U+5");
    for mg in enumerate_mgluons(p, max_index) {
        let g = mg.to_gluon(c).expect("enumerated gluon is well formed");
        g45.checked += 1;
        match gluon_colimit(&g, p) {
            Ok(_) => {}
            Err(GlueError::NoCoproduct(_) | GlueError::NoCoequalizer | GlueError::MissingPullback(_))
                if bound.is_some() =>
            {
                g45.out_of_bound += 1
            }
            Err(e) => {
                g45.status = Status::Fail;
                g45.witness = Some(Witness { objects: mg.pieces.clone(), arrows: mg.arrows(), note: e.to_string() });
                break;
            }
        }
    }
    Ok(vec![ng1, ng2, ng3, g45])
}

/// Epi sinks of a presite as seen in its sheaves: a sink is epi when its
/// Yoneda image is epi in the fragment of sheaves with at most `bound`
/// sections per object.
pub fn yoneda_epi(p: &Pretopology, bound: usize) -> Result<impl Fn(&Sink) -> bool, SheafError> {
    let frag = SheafFragment::enumerate(p, bound);
    let y = yoneda_embed(p, bound)?;
    let f = frag
        .yoneda_functor(&y)
        .ok_or_else(|| SheafError::BoundExceeded(bound))?;
    Ok(move |s: &Sink| {
        let image = Sink { apex: f.objects[s.apex], legs: s.legs.iter().map(|&u| f.arrows[u]).collect() };
        frag.is_epi_sink(&image)
    })
}

/// Every sink of clopens factors as a covering followed by one clopen
/// arrow.
pub fn check_factorization(p: &Pretopology) -> Verdict {
    let c = p.base();
    let mut v = Verdict::new("NG2", Status::Pass);
    for x in c.objects() {
        let into: Vec<ArrowId> = c.arrows_into(x).filter(|&f| p.is_open(f)).collect();
        for s in sinks_from(x, &into) {
            v.checked += 1;
            let factors = into.iter().any(|&m| {
                let lifted: Option<BTreeSet<ArrowId>> = s
                    .legs
                    .iter()
                    .map(|&u| c.hom(c.src(u), c.src(m)).iter().copied().find(|&h| c.comp(m, h) == u))
                    .collect();
                lifted.is_some_and(|legs| p.covers(&Sink { apex: c.src(m), legs }))
            });
            if !factors {
                v.status = Status::Fail;
                v.witness = Some(Witness { objects: vec![x], arrows: s.legs.iter().copied().collect(), note: "no covering-then-clopen factorization".into() });
                return v;
            }
        }
    }
    v
}

/// Clopen monos into one object up to isomorphism over it.
pub fn clopen_subobjects(c: &FinCategory, opens_into: &[ArrowId]) -> Vec<ArrowId> {
    let mut reps: Vec<ArrowId> = Vec::new();
    for &u in opens_into.iter().filter(|&&u| c.is_mono(u)) {
        let same = reps.iter().any(|&r| {
            c.hom(c.src(u), c.src(r)).iter().any(|&i| c.is_iso(i) && c.comp(r, i) == u)
        });
        if !same {
            reps.push(u);
        }
    }
    reps
}

/// (MG1) exactly and a finite proxy for (MG2): on each slice of opens the
/// functor preserves open epi families and binary coproducts.
pub fn check_morphism(f: &Diagram, src: &GlutosCandidate, dst: &GlutosCandidate) -> Vec<Verdict> {
    let c = src.c();
    let d = dst.c();
    let mut mg1 = Verdict::new("MG1", Status::Pass);
    'mg1: for &u in &src.opens {
        mg1.checked += 1;
        if !dst.is_open(f.arrows[u]) {
            mg1.status = Status::Fail;
            mg1.witness = Some(Witness::arrows(vec![u]).with_note("image of an open arrow is not open".into()));
            break;
        }
        for g in c.arrows_into(c.dst(u)) {
            let Some(sp) = c.pullback(u, g) else { continue };
            mg1.checked += 1;
            let (fu, fg, f1, f2) = (f.arrows[u], f.arrows[g], f.arrows[sp.p1], f.arrows[sp.p2]);
            if !d.is_limit_cone(&DiagramData::cospan(d, fu, fg), d.src(f1), &[f1, f2, d.comp(fu, f1)]) {
                mg1.status = Status::Fail;
                mg1.witness = Some(Witness::arrows(vec![u, g]).with_note("pullback of an open arrow is not preserved".into()));
                break 'mg1;
            }
        }
    }
    let mut mg2 = Verdict::new("MG2", Status::ProxyPass);
    if let Scale::AtBound(n) = src.scale {
        mg2.bound = Some(n);
    }
    'mg2: for x in c.objects() {
        let into: Vec<ArrowId> = c.arrows_into(x).filter(|&u| src.is_open(u)).collect();
        for s in sinks_from(x, &into) {
            if !c.is_epi_family(&s) {
                continue;
            }
            mg2.checked += 1;
            let image = Sink { apex: f.objects[x], legs: s.legs.iter().map(|&u| f.arrows[u]).collect() };
            if !d.is_epi_family(&image) {
                // A truncated source can see epi families that are not epi
                // once the missing objects are added back.
                if let Scale::AtBound(_) = src.scale {
                    mg2.out_of_bound += 1;
                    continue;
                }
                mg2.status = Status::Fail;
                mg2.witness = Some(Witness { objects: vec![x], arrows: s.legs.iter().copied().collect(), note: "epi family not preserved".into() });
                break 'mg2;
            }
        }
        for &a in &into {
            for &b in &into {
                let Some(cp) = c.colimit_of(&DiagramData::discrete(&[c.src(a), c.src(b)])) else { continue };
                mg2.checked += 1;
                let (i0, i1) = (f.arrows[cp.legs[0]], f.arrows[cp.legs[1]]);
                let nodes = [d.src(i0), d.src(i1)];
                if matches!(dst.scale, Scale::AtBound(_)) && d.colimit_of(&DiagramData::discrete(&nodes)).is_none() {
                    mg2.out_of_bound += 1;
                    continue;
                }
                if !d.is_colimit_cocone(&DiagramData::discrete(&nodes), f.objects[cp.apex], &[i0, i1]) {
                    mg2.status = Status::Fail;
                    mg2.witness = Some(Witness::arrows(vec![a, b]).with_note("coproduct over the slice not preserved".into()));
                    break 'mg2;
                }
            }
        }
    }
    vec![mg1, mg2]
}

pub fn identity_functor(c: &FinCategory) -> Diagram {
    Diagram::new(c.clone(), c.objects().collect(), c.arrow_ids().collect(), c).expect("identity is a functor")
}

/// The universality criterion for a continuous functor from an M-presite
/// with subcanonical pretopology into a nearly glutos: full faithfulness,
/// reflection of coverings, local reflection of clopens, and a covering of
/// every object by images. `d_verdicts` is the nearly-glutos suite of `d`.
pub fn check_universal_th3(
    y: &Diagram,
    c_site: &Pretopology,
    d_site: &Pretopology,
    d_verdicts: &[Verdict],
    allow_inapplicable: bool,
) -> Result<Vec<Verdict>, AxiomError> {
    let c = c_site.base();
    let d = d_site.base();
    if let Some(s) = c_site.coverings().iter().find(|s| s.legs.iter().any(|&u| !c.is_mono(u))) {
        return Err(AxiomError::PremiseFailed(format!("source is not an M-presite at {}", s.display(c))));
    }
    if let Some((s, v)) = c_site.subcanonical_witness() {
        if !(allow_inapplicable && matches!(v, EffectiveEpi::Inapplicable { .. })) {
            return Err(AxiomError::PremiseFailed(format!("source is not subcanonical at {}", s.display(c))));
        }
    }
    if let Some(v) = d_verdicts.iter().find(|v| !v.passed()) {
        return Err(AxiomError::PremiseFailed(format!("target fails {}", v.axiom)));
    }
    let image = |s: &Sink| Sink { apex: y.objects[s.apex], legs: s.legs.iter().map(|&u| y.arrows[u]).collect() };
    if let Some(s) = c_site.coverings().iter().find(|s| !d_site.covers(&image(s))) {
        return Err(AxiomError::PremiseFailed(format!("functor is not continuous at {}", s.display(c))));
    }

    let mut ff = Verdict::new("fully-faithful", Status::Pass);
    'ff: for a in c.objects() {
        for b in c.objects() {
            ff.checked += 1;
            let mut imgs: Vec<ArrowId> = c.hom(a, b).iter().map(|&f| y.arrows[f]).collect();
            imgs.sort_unstable();
            imgs.dedup();
            let target = d.hom(y.objects[a], y.objects[b]);
            if imgs.len() != c.hom(a, b).len() || imgs.len() != target.len() {
                ff.status = Status::Fail;
                ff.witness = Some(Witness::objects(vec![a, b]).with_note("hom-set map is not a bijection".into()));
                break 'ff;
            }
        }
    }
    let mut rc = Verdict::new("reflects-coverings", Status::Pass);
    'rc: for x in c.objects() {
        let into: Vec<ArrowId> = c.arrows_into(x).filter(|&u| c_site.is_open(u)).collect();
        for s in sinks_from(x, &into) {
            rc.checked += 1;
            if d_site.covers(&image(&s)) && !c_site.covers(&s) {
                rc.status = Status::Fail;
                rc.witness = Some(Witness { objects: vec![x], arrows: s.legs.into_iter().collect(), note: "image covers but the sink does not".into() });
                break 'rc;
            }
        }
    }
    let mut lr = Verdict::new("locally-reflects-clopens", Status::Pass);
    for u in c.arrow_ids() {
        lr.checked += 1;
        if d_site.is_open(y.arrows[u]) && !c_site.is_locally(u, |g| c_site.is_open(g)) {
            lr.status = Status::Fail;
            lr.witness = Some(Witness::arrows(vec![u]).with_note("image is clopen but the arrow is not locally clopen".into()));
            break;
        }
    }
    let mut cov = Verdict::new("covered-by-image", Status::Pass);
    let images: BTreeSet<ObjId> = y.objects.iter().copied().collect();
    for x in d.objects() {
        cov.checked += 1;
        let legs: BTreeSet<ArrowId> =
            d.arrows_into(x).filter(|&u| images.contains(&d.src(u)) && d_site.is_open(u)).collect();
        if !d_site.covers(&Sink { apex: x, legs }) {
            cov.status = Status::Fail;
            cov.witness = Some(Witness::objects(vec![x]).with_note("no covering by objects of the source".into()));
            break;
        }
    }
    Ok(vec![ff, rc, lr, cov])
}

/// Named candidates used by the test suites and the command-line tool.
pub fn fixture_candidates() -> Vec<(&'static str, GlutosCandidate)> {
    use crate::fixtures;
    vec![
        ("terminal", GlutosCandidate::from_site(&fixtures::terminal_site())),
        ("arrow", GlutosCandidate::from_site(&fixtures::arrow_site())),
        ("disc2", GlutosCandidate::from_site(&fixtures::disc2_site())),
        ("chain3", GlutosCandidate::from_site(&fixtures::chain3_site())),
        ("disc2-isos", GlutosCandidate::new(Arc::new(fixtures::disc2()), isos(&fixtures::disc2()), Scale::Exact)),
        ("sets2", GlutosCandidate::all_open(Arc::new(FinCategory::finite_sets(2)), Scale::AtBound(2))),
        ("topos2", GlutosCandidate::topos_fragment(2)),
    ]
}

fn isos(c: &FinCategory) -> Vec<ArrowId> {
    c.arrow_ids().filter(|&f| c.is_iso(f)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fincat::RawCategory;
    use crate::fixtures;

    fn status(vs: &[Verdict], id: &str) -> Status {
        vs.iter().find(|v| v.axiom == id).unwrap_or_else(|| panic!("no verdict {id}")).status
    }

    #[test]
    fn clopos_examples() {
        let c = Arc::new(fixtures::disc2());
        assert!(check_clopos(&CloposStructure::isos_only(c.clone())).passed());
        let p = fixtures::disc2_site();
        assert!(check_clopos(&p.clopen_arrows().unwrap()).passed());
        // Drop B->l: it is the pullback of r->T along l->T.
        let mut opens = p.opens().clone();
        opens.remove(&c.arrow("B->l").unwrap());
        let v = check_clopos(&CloposStructure::new(c.clone(), opens.clone()));
        assert_eq!(v.status, Status::Fail);
        let cand = GlutosCandidate::new(c, opens, Scale::Exact);
        assert!(cand.replay(&v));
    }

    #[test]
    fn preclopos_examples() {
        let p = fixtures::disc2_site();
        let cl = p.clopen_arrows().unwrap();
        assert!(check_preclopos(&cl.base, &cl.opens).passed());
        let all: BTreeSet<ArrowId> = cl.base.arrow_ids().collect();
        assert!(check_preclopos(&cl.base, &all).passed());
    }

    fn square_category(with_filler: bool) -> Arc<FinCategory> {
        let mut raw = RawCategory::new();
        for o in ["Z", "U", "Y", "X"] {
            raw.object_with_identity(o, format!("id_{o}"));
        }
        raw.arrow("alpha", "Z", "U").arrow("beta", "Z", "Y").arrow("u", "U", "X").arrow("f", "Y", "X").arrow("e", "Z", "X");
        raw.compose("u", "alpha", "e").compose("f", "beta", "e");
        if with_filler {
            raw.object_with_identity("V", "id_V");
            raw.arrow("z", "Z", "V").arrow("a", "V", "U").arrow("v", "V", "Y").arrow("d", "V", "X");
            raw.compose("a", "z", "alpha").compose("v", "z", "beta").compose("u", "a", "d").compose("f", "v", "d");
            raw.compose("d", "z", "e");
        }
        Arc::new(raw.build().unwrap())
    }

    #[test]
    fn preclopos_square_without_filler_fails() {
        let good = square_category(true);
        let opens: BTreeSet<ArrowId> = ["id_Z", "id_U", "id_Y", "id_X", "id_V", "u", "v"].iter().map(|n| good.arrow(n).unwrap()).collect();
        let v = check_preclopos(&good, &opens);
        assert!(v.passed(), "{}", v.line(&good));
        let bad = square_category(false);
        let opens: BTreeSet<ArrowId> = ["id_Z", "id_U", "id_Y", "id_X", "u"].iter().map(|n| bad.arrow(n).unwrap()).collect();
        let v = check_preclopos(&bad, &opens);
        assert_eq!(v.status, Status::Fail);
        assert_eq!(v.witness.unwrap().arrows.len(), 4);
    }

    #[test]
    fn o_topology_examples() {
        let p = fixtures::disc2_site();
        let c = p.base();
        let opens = p.opens().clone();
        let maximal: Vec<OSieve> = c.objects().map(|x| OSieve::maximal(c, x)).collect();
        assert!(check_o_topology(c, &opens, &maximal).unwrap().iter().all(|v| v.passed()));
        let from_cov = sieves_of_coverings(&p);
        assert!(check_o_topology(c, &opens, &from_cov).unwrap().iter().all(|v| v.passed()));
        let t = c.obj("T").unwrap();
        let mut broken = maximal.clone();
        broken.push(OSieve::generated(c, t, [c.arrow("l->T").unwrap()]));
        let vs = check_o_topology(c, &opens, &broken).unwrap();
        assert_eq!(vs[1].status, Status::Fail);
    }

    #[test]
    fn o_sieve_membership_matches_generators() {
        let p = fixtures::chain3_site();
        let c = p.base();
        for x in c.objects() {
            for s in o_sieves_on(c, p.opens(), x) {
                for f in c.arrows_into(x) {
                    let via = s.generators.iter().any(|&u| c.hom(c.src(f), c.src(u)).iter().any(|&h| c.comp(u, h) == f));
                    assert_eq!(s.members.contains(&f), via);
                }
            }
        }
    }

    #[test]
    fn topos_fragment_passes() {
        let g = GlutosCandidate::topos_fragment(2);
        for v in check_glutos_suite(&g, G5Form::Strong) {
            assert!(v.passed(), "{}", v.line(&g.base));
        }
    }

    #[test]
    fn terminal_passes_degenerately() {
        let g = GlutosCandidate::from_site(&fixtures::terminal_site());
        assert!(check_glutos_suite(&g, G5Form::Strong).iter().all(|v| v.passed()));
    }

    #[test]
    fn frame_fails_disjointness() {
        let g = GlutosCandidate::all_open(Arc::new(fixtures::disc2()), Scale::Exact);
        let vs = check_glutos_suite(&g, G5Form::Weak);
        assert_eq!(status(&vs, "G4a.disjoint"), Status::Fail);
        let v = vs.iter().find(|v| v.axiom == "G4a.disjoint").unwrap();
        assert!(g.replay(v));
    }

    #[test]
    fn failures_replay_on_all_fixtures() {
        for (name, g) in fixture_candidates() {
            for form in [G5Form::Weak, G5Form::Strong] {
                for v in check_glutos_suite(&g, form) {
                    if v.status == Status::Fail {
                        assert!(g.replay(&v), "{name}: {}", v.line(&g.base));
                    }
                }
            }
        }
    }

    #[test]
    fn nearly_glutos_on_frame() {
        let p = fixtures::disc2_site();
        let epi = yoneda_epi(&p, 2).unwrap();
        let vs = check_nearly_glutos(&p, Scale::Exact, 2, &epi).unwrap();
        for id in ["NG1", "NG2", "NG3"] {
            assert_eq!(status(&vs, id), Status::Pass, "{id}");
        }
        // Two copies of the top glued along the bottom leave the frame.
        assert_eq!(status(&vs, "G4U+5"), Status::Fail);
    }

    #[test]
    fn nearly_glutos_premises() {
        let p = fixtures::arrow_site();
        let c = p.base_arc().clone();
        assert!(matches!(check_nearly_glutos(&p, Scale::Exact, 2, &|s| c.is_epi_family(s)), Err(AxiomError::NotSubcanonical(_))));
        // Without an empty covering the empty family on the point has no
        // covering-then-clopen factorization.
        let t = fixtures::terminal_site();
        let vs = check_nearly_glutos(&t, Scale::Exact, 2, &yoneda_epi(&t, 2).unwrap()).unwrap();
        assert_eq!(status(&vs, "NG2"), Status::Fail);
        assert!(vs[2].passed() && vs[3].passed());
        let s = fixtures::sets_site(2);
        let vs = check_nearly_glutos(&s, Scale::AtBound(2), 2, &|k| fixtures::jointly_surjective(s.base(), k)).unwrap();
        for v in &vs {
            assert!(v.passed(), "{}", v.line(s.base()));
        }
    }

    #[test]
    fn morphism_examples() {
        let g = GlutosCandidate::from_site(&fixtures::disc2_site());
        let id = identity_functor(&g.base);
        assert!(check_morphism(&id, &g, &g).iter().all(|v| v.status.is_pass(true)));
        // Source functor of a slice of opens in the topos fragment.
        let t = GlutosCandidate::topos_fragment(2);
        let c = &t.base;
        let x = c.objects().last().unwrap();
        let over: Vec<ArrowId> = c.arrows_into(x).collect();
        let (slice, (objs, arrows)) = c.slice(&over);
        let d0 = Diagram::new(slice.clone(), objs, arrows, c).unwrap();
        let src = GlutosCandidate::all_open(Arc::new(slice), Scale::AtBound(2));
        let vs = check_morphism(&d0, &src, &t);
        assert!(vs.iter().all(|v| v.status.is_pass(true)), "{:?}", vs);
        // Shrinking the target opens breaks MG1.
        let isos_only = GlutosCandidate::new(g.base.clone(), isos(&g.base), Scale::Exact);
        assert_eq!(check_morphism(&id, &g, &isos_only)[0].status, Status::Fail);
    }

    #[test]
    fn universality_examples() {
        let p = fixtures::sets_site(2);
        let c = p.base_arc().clone();
        let nv = check_nearly_glutos(&p, Scale::AtBound(2), 2, &|k| fixtures::jointly_surjective(&c, k)).unwrap();
        let id = identity_functor(&c);
        assert!(check_universal_th3(&id, &p, &p, &nv, true).unwrap().iter().all(|v| v.passed()));
        let a = fixtures::arrow_site();
        let ida = identity_functor(a.base());
        assert!(matches!(check_universal_th3(&ida, &a, &a, &[], false), Err(AxiomError::PremiseFailed(_))));
    }

    #[test]
    fn yoneda_into_fragment_is_universal() {
        let p = fixtures::disc2_site();
        let frag = SheafFragment::enumerate(&p, 2);
        let y = yoneda_embed(&p, 2).unwrap();
        let functor = frag.yoneda_functor(&y).unwrap();
        let d = frag.mono_site();
        let nv = check_nearly_glutos(&d, Scale::AtBound(2), 2, &|s| frag.is_epi_sink(s)).unwrap();
        for v in &nv {
            assert!(v.passed(), "{}", v.line(&frag.category));
        }
        let vs = check_universal_th3(&functor, &p, &d, &nv, false).unwrap();
        for v in &vs {
            assert!(v.passed(), "{}", v.line(&frag.category));
        }
    }

    #[test]
    fn g5_and_g5p_implications() {
        for (name, g) in fixture_candidates() {
            let strong = g.g5_passes(G5Form::Strong);
            let weak = g.g5_passes(G5Form::Weak);
            assert!(!strong || weak, "{name}");
            if strong && g.passes(&Clause::G4) {
                assert!(g.check(Clause::G5P).passed(), "{name}");
            }
        }
    }

    #[test]
    fn tau_o_is_subcanonical_on_passing_fixtures() {
        for (name, g) in fixture_candidates() {
            let vs = check_glutos_suite(&g, G5Form::Weak);
            if vs.iter().all(|v| v.passed()) && g.scale == Scale::Exact {
                let tau = g.tau_o();
                assert!(tau.validate().is_valid(), "{name}");
                assert!(tau.is_subcanonical(), "{name}");
            }
        }
    }
}
