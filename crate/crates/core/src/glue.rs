//! Gluing: Γ-shapes, gluons and their colimits, equivalence relations and
//! their inverse images, the local pullback criterion in finite sets,
//! M-gluons, and realization of frame sheaves as étale spaces.

use std::collections::BTreeMap;
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fincat::{ArrowId, DiagramData, FinCategory, ObjId, RawCategory, Span};
use crate::sheafkit::{
    find_iso, pair_into_pullback, pullback_presheaf, sheaf_hom_set, sheafify, NatTrans, Presheaf, SheafError,
    YonedaEmbedding,
};
use crate::site::{Coverage, Pretopology};
use crate::WorkspaceError;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GlueError {
    #[error("invalid gluon: {0}")]
    InvalidGluon(String),
    #[error("arrow {0} is not clopen")]
    NotClopen(String),
    #[error("no coproduct of {0}")]
    NoCoproduct(String),
    #[error("no coequalizer of the gluing relation")]
    NoCoequalizer,
    #[error("colimit leg {0} is not clopen")]
    LegNotClopen(usize),
    #[error("overlap ({0}, {1}) is not the pullback of the colimit legs")]
    EffectivityFailure(usize, usize),
    #[error("colimit is not stable under pullback along {0}")]
    NotUniversal(String),
    #[error("missing pullback: {0}")]
    MissingPullback(String),
    #[error("precondition fails: {0}")]
    PreconditionSquareNotPullback(String),
    #[error("induced pair is not an equivalence relation: {0:?}")]
    InducedNotEquivalence(EqRelFailure),
    #[error("not a frame: {0}")]
    NotAFrame(String),
    #[error("not a sheaf for the covering {0}")]
    NotASheaf(String),
    #[error(transparent)]
    Sheaf(#[from] SheafError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GammaVariant {
    /// Words of length 1 and 2 with two distinct projections per pair.
    Full,
    /// Nonempty monomials of bounded degree in commuting idempotents.
    Monoidal { degree: usize },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GammaShape {
    pub index: Vec<String>,
    pub variant: GammaVariant,
}

impl GammaShape {
    pub fn new(index: &[&str], variant: GammaVariant) -> Self {
        GammaShape { index: index.iter().map(|s| s.to_string()).collect(), variant }
    }

    /// Objects as index words, in construction order.
    pub fn words(&self) -> Vec<Vec<usize>> {
        let n = self.index.len();
        match self.variant {
            GammaVariant::Full => {
                let mut w: Vec<Vec<usize>> = (0..n).map(|i| vec![i]).collect();
                for i in 0..n {
                    for j in 0..n {
                        w.push(vec![i, j]);
                    }
                }
                w
            }
            GammaVariant::Monoidal { degree } => {
                let mut w: Vec<Vec<usize>> = Vec::new();
                for k in 1..=degree.min(n) {
                    w.extend(subsets_of_size(n, k));
                }
                w
            }
        }
    }

    pub fn word_name(&self, w: &[usize]) -> String {
        word_name(&self.index, w)
    }

    pub fn build(&self) -> FinCategory {
        let words = self.words();
        let names: Vec<String> = words.iter().map(|w| self.word_name(w)).collect();
        match self.variant {
            GammaVariant::Full => {
                let mut raw = RawCategory::new();
                for nm in &names {
                    raw.object_with_identity(nm.clone(), format!("id_{nm}"));
                }
                for w in words.iter().filter(|w| w.len() == 2) {
                    let nm = self.word_name(w);
                    raw.arrow(format!("d0^{nm}"), nm.clone(), self.index[w[0]].clone());
                    raw.arrow(format!("d1^{nm}"), nm.clone(), self.index[w[1]].clone());
                }
                raw.build().expect("gamma shape is a category")
            }
            GammaVariant::Monoidal { .. } => {
                let refs: Vec<&str> = names.iter().map(|s| s.as_str()).collect();
                FinCategory::from_preorder(&refs, |x, y| words[y].iter().all(|v| words[x].contains(v)))
                    .expect("gamma shape is a preorder")
            }
        }
    }
}

pub fn build_gamma(index: &[&str], variant: GammaVariant) -> FinCategory {
    GammaShape::new(index, variant).build()
}

fn word_name(index: &[String], w: &[usize]) -> String {
    let parts: Vec<&str> = w.iter().map(|&i| index[i].as_str()).collect();
    if index.iter().all(|s| s.chars().count() == 1) {
        parts.concat()
    } else {
        parts.join(".")
    }
}

fn subsets_of_size(n: usize, k: usize) -> Vec<Vec<usize>> {
    fn go(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            cur.push(i);
            go(i + 1, n, k, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    go(0, n, k, &mut Vec::new(), &mut out);
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Triple {
    pub obj: ObjId,
    pub p0: ArrowId,
    pub p: ArrowId,
    pub p1: ArrowId,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Certificates {
    /// `tau[i][j]: U_ij -> U_ji`.
    pub tau: Vec<Vec<ArrowId>>,
    /// `s[i]: U_i -> U_ii`.
    pub s: Vec<ArrowId>,
    pub triples: BTreeMap<(usize, usize, usize), Triple>,
}

/// A diagram on the full Γ-shape in a carrier category.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Gluon {
    pub index: Vec<String>,
    pub u1: Vec<ObjId>,
    pub u2: Vec<Vec<ObjId>>,
    pub d0: Vec<Vec<ArrowId>>,
    pub d1: Vec<Vec<ArrowId>>,
    pub certificates: Option<Certificates>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum GluonViolation {
    Gd1(usize, usize),
    Gd2(usize, usize),
    Gd3(usize),
    Gd4(usize, usize, usize),
}

impl GluonViolation {
    pub fn axiom(&self) -> &'static str {
        match self {
            GluonViolation::Gd1(..) => "GD1",
            GluonViolation::Gd2(..) => "GD2",
            GluonViolation::Gd3(..) => "GD3",
            GluonViolation::Gd4(..) => "GD4",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GluonVerdict {
    pub violations: Vec<GluonViolation>,
    pub certificates: Option<Certificates>,
}

impl GluonVerdict {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

impl Gluon {
    /// Checks that every arrow has the right endpoints.
    pub fn new(
        c: &FinCategory,
        index: Vec<String>,
        u1: Vec<ObjId>,
        u2: Vec<Vec<ObjId>>,
        d0: Vec<Vec<ArrowId>>,
        d1: Vec<Vec<ArrowId>>,
    ) -> Result<Self, GlueError> {
        let n = u1.len();
        if index.len() != n || u2.len() != n || d0.len() != n || d1.len() != n {
            return Err(GlueError::InvalidGluon("sizes do not match the index set".into()));
        }
        for i in 0..n {
            for j in 0..n {
                let (a, b) = (d0[i][j], d1[i][j]);
                if c.src(a) != u2[i][j] || c.dst(a) != u1[i] || c.src(b) != u2[i][j] || c.dst(b) != u1[j] {
                    return Err(GlueError::InvalidGluon(format!(
                        "projections of {} have the wrong endpoints",
                        word_name(&index, &[i, j])
                    )));
                }
            }
        }
        Ok(Gluon { index, u1, u2, d0, d1, certificates: None })
    }

    /// One-index gluon from a parallel pair `d0, d1: U -> X`.
    pub fn single(c: &FinCategory, d0: ArrowId, d1: ArrowId) -> Result<Self, GlueError> {
        Gluon::new(c, vec!["i".into()], vec![c.dst(d0)], vec![vec![c.src(d0)]], vec![vec![d0]], vec![vec![d1]])
    }

    /// Canonical gluon of a family of pullbackable arrows into one object:
    /// overlaps are pullbacks with their projections.
    pub fn from_family(c: &FinCategory, legs: &[ArrowId]) -> Result<Self, GlueError> {
        let n = legs.len();
        let mut u2 = vec![vec![0; n]; n];
        let mut d0 = vec![vec![0; n]; n];
        let mut d1 = vec![vec![0; n]; n];
        for i in 0..n {
            for j in 0..n {
                let sp = c
                    .pullback(legs[i], legs[j])
                    .ok_or_else(|| GlueError::MissingPullback(format!("{}, {}", c.arrow_name(legs[i]), c.arrow_name(legs[j]))))?;
                u2[i][j] = sp.apex;
                d0[i][j] = sp.p1;
                d1[i][j] = sp.p2;
            }
        }
        let index = (0..n).map(|i| (i + 1).to_string()).collect();
        Gluon::new(c, index, legs.iter().map(|&u| c.src(u)).collect(), u2, d0, d1)
    }

    pub fn len(&self) -> usize {
        self.u1.len()
    }

    pub fn is_empty(&self) -> bool {
        self.u1.is_empty()
    }

    /// The Γ-diagram with nodes `U_i` followed by `U_ij` in row order.
    pub fn diagram_data(&self) -> DiagramData {
        let n = self.len();
        let mut nodes = self.u1.clone();
        let mut edges = Vec::new();
        for i in 0..n {
            for j in 0..n {
                let k = nodes.len();
                nodes.push(self.u2[i][j]);
                edges.push((k, i, self.d0[i][j]));
                edges.push((k, j, self.d1[i][j]));
            }
        }
        DiagramData { nodes, edges }
    }

    pub fn arrows(&self) -> Vec<ArrowId> {
        self.d0.iter().chain(&self.d1).flatten().copied().collect()
    }
}

fn is_pullback_square(c: &FinCategory, f: ArrowId, g: ArrowId, p1: ArrowId, p2: ArrowId) -> bool {
    c.src(p1) == c.src(p2)
        && c.compose(f, p1).is_some()
        && c.compose(g, p2).is_some()
        && c.comp(f, p1) == c.comp(g, p2)
        && c.is_limit_cone(&DiagramData::cospan(c, f, g), c.src(p1), &[p1, p2, c.comp(f, p1)])
}

/// Checks the cocycle conditions, using given certificates when present
/// and searching for them otherwise.
pub fn validate_gluon(c: &FinCategory, g: &Gluon) -> GluonVerdict {
    let n = g.len();
    let mut violations = Vec::new();
    for i in 0..n {
        for j in 0..n {
            if !c.is_jointly_monic(&[g.d0[i][j], g.d1[i][j]]) {
                violations.push(GluonViolation::Gd1(i, j));
            }
        }
    }
    let given = g.certificates.as_ref();
    let mut tau = vec![vec![0; n]; n];
    for i in 0..n {
        for j in 0..n {
            let ok = |t: ArrowId| {
                c.src(t) == g.u2[i][j]
                    && c.dst(t) == g.u2[j][i]
                    && c.comp(g.d0[j][i], t) == g.d1[i][j]
                    && c.comp(g.d1[j][i], t) == g.d0[i][j]
            };
            let found = match given {
                Some(cert) => Some(cert.tau[i][j]).filter(|&t| ok(t)),
                None => c.hom(g.u2[i][j], g.u2[j][i]).iter().copied().find(|&t| ok(t)),
            };
            match found {
                Some(t) => tau[i][j] = t,
                None => violations.push(GluonViolation::Gd2(i, j)),
            }
        }
    }
    let mut s = vec![0; n];
    for i in 0..n {
        let ok = |x: ArrowId| {
            c.src(x) == g.u1[i]
                && c.dst(x) == g.u2[i][i]
                && c.comp(g.d0[i][i], x) == c.id(g.u1[i])
                && c.comp(g.d1[i][i], x) == c.id(g.u1[i])
        };
        let found = match given {
            Some(cert) => Some(cert.s[i]).filter(|&x| ok(x)),
            None => c.hom(g.u1[i], g.u2[i][i]).iter().copied().find(|&x| ok(x)),
        };
        match found {
            Some(x) => s[i] = x,
            None => violations.push(GluonViolation::Gd3(i)),
        }
    }
    let mut triples = BTreeMap::new();
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                let found = match given {
                    Some(cert) => cert.triples.get(&(i, j, k)).copied().filter(|t| triple_ok(c, g, i, j, k, t)),
                    None => find_triple(c, g, i, j, k),
                };
                match found {
                    Some(t) => {
                        triples.insert((i, j, k), t);
                    }
                    None => violations.push(GluonViolation::Gd4(i, j, k)),
                }
            }
        }
    }
    let certificates = violations.is_empty().then_some(Certificates { tau, s, triples });
    GluonVerdict { violations, certificates }
}

fn triple_ok(c: &FinCategory, g: &Gluon, i: usize, j: usize, k: usize, t: &Triple) -> bool {
    let ends = |a: ArrowId, dst: ObjId| c.src(a) == t.obj && c.dst(a) == dst;
    ends(t.p0, g.u2[i][j])
        && ends(t.p, g.u2[i][k])
        && ends(t.p1, g.u2[j][k])
        && is_pullback_square(c, g.d0[i][j], g.d0[i][k], t.p0, t.p)
        && is_pullback_square(c, g.d1[i][j], g.d0[j][k], t.p0, t.p1)
        && is_pullback_square(c, g.d1[i][k], g.d1[j][k], t.p, t.p1)
}

fn find_triple(c: &FinCategory, g: &Gluon, i: usize, j: usize, k: usize) -> Option<Triple> {
    let sp = c.pullback(g.d1[i][j], g.d0[j][k])?;
    c.hom(sp.apex, g.u2[i][k]).iter().find_map(|&p| {
        let t = Triple { obj: sp.apex, p0: sp.p1, p, p1: sp.p2 };
        triple_ok(c, g, i, j, k, &t).then_some(t)
    })
}

/// An equivalence relation `d0, d1: U -> X` with its witnesses.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EquivalenceRelation {
    pub d0: ArrowId,
    pub d1: ArrowId,
    /// `X -> U` with `d0 r = d1 r = id`.
    pub refl: ArrowId,
    /// `U -> U` swapping `d0` and `d1`.
    pub sym: ArrowId,
    /// Pullback of `d1` and `d0`.
    pub composable: Span,
    /// `t` with `d0 t = d0 p1`, `d1 t = d1 p2`.
    pub trans: ArrowId,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EqRelFailure {
    NotParallel,
    NotJointlyMonic,
    NotReflexive,
    NotSymmetric,
    NoComposablePairs,
    NotTransitive,
}

/// Checks a parallel pair against the definition by witness arrows.
pub fn equivalence_relation(c: &FinCategory, d0: ArrowId, d1: ArrowId) -> Result<EquivalenceRelation, EqRelFailure> {
    let (u, x) = (c.src(d0), c.dst(d0));
    if c.src(d1) != u || c.dst(d1) != x {
        return Err(EqRelFailure::NotParallel);
    }
    if !c.is_jointly_monic(&[d0, d1]) {
        return Err(EqRelFailure::NotJointlyMonic);
    }
    let refl = *c
        .hom(x, u)
        .iter()
        .find(|&&r| c.comp(d0, r) == c.id(x) && c.comp(d1, r) == c.id(x))
        .ok_or(EqRelFailure::NotReflexive)?;
    let sym = *c
        .hom(u, u)
        .iter()
        .find(|&&s| c.comp(d0, s) == d1 && c.comp(d1, s) == d0)
        .ok_or(EqRelFailure::NotSymmetric)?;
    let composable = c.pullback(d1, d0).ok_or(EqRelFailure::NoComposablePairs)?;
    let trans = *c
        .hom(composable.apex, u)
        .iter()
        .find(|&&t| c.comp(d0, t) == c.comp(d0, composable.p1) && c.comp(d1, t) == c.comp(d1, composable.p2))
        .ok_or(EqRelFailure::NotTransitive)?;
    Ok(EquivalenceRelation { d0, d1, refl, sym, composable, trans })
}

/// Inverse image of an equivalence relation along `f: X' -> X`, built
/// from three pullbacks.
pub fn induced_eqrel(c: &FinCategory, f: ArrowId, e: &EquivalenceRelation) -> Result<EquivalenceRelation, GlueError> {
    let missing = |a: ArrowId, b: ArrowId| GlueError::MissingPullback(format!("{}, {}", c.arrow_name(a), c.arrow_name(b)));
    let left = c.pullback(f, e.d0).ok_or_else(|| missing(f, e.d0))?;
    let right = c.pullback(e.d1, f).ok_or_else(|| missing(e.d1, f))?;
    let top = c.pullback(left.p2, right.p1).ok_or_else(|| missing(left.p2, right.p1))?;
    let d0 = c.comp(left.p1, top.p1);
    let d1 = c.comp(right.p2, top.p2);
    equivalence_relation(c, d0, d1).map_err(GlueError::InducedNotEquivalence)
}

/// Colimit of a gluon in its carrier with the checks that make it a
/// well-behaved gluing.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GluonColimit {
    pub apex: ObjId,
    pub legs: Vec<ArrowId>,
    /// `∐U_i` and `∐U_ij`.
    pub coproducts: (ObjId, ObjId),
    /// Arrows along which stability was verified.
    pub stable_along: usize,
}

/// Coequalizes `∐U_ij ⇉ ∐U_i`, then checks clopen legs, effectivity of
/// every overlap and stability of the colimit under pullback.
pub fn gluon_colimit(g: &Gluon, p: &Pretopology) -> Result<GluonColimit, GlueError> {
    let c = p.base();
    let verdict = validate_gluon(c, g);
    if let Some(v) = verdict.violations.first() {
        return Err(GlueError::InvalidGluon(format!("{} fails", v.axiom())));
    }
    if let Some(&a) = g.arrows().iter().find(|&&a| !p.is_open(a)) {
        return Err(GlueError::NotClopen(c.arrow_name(a).to_string()));
    }
    let n = g.len();
    let s1 = c
        .colimit_of(&DiagramData::discrete(&g.u1))
        .ok_or_else(|| GlueError::NoCoproduct("the pieces".into()))?;
    let flat: Vec<ObjId> = g.u2.iter().flatten().copied().collect();
    let s2 = c.colimit_of(&DiagramData::discrete(&flat)).ok_or_else(|| GlueError::NoCoproduct("the overlaps".into()))?;
    let induced = |d: &Vec<Vec<ArrowId>>, side: usize| {
        c.hom(s2.apex, s1.apex).iter().copied().find(|&h| {
            (0..n).all(|i| {
                (0..n).all(|j| {
                    let target = if side == 0 { i } else { j };
                    c.comp(h, s2.legs[i * n + j]) == c.comp(s1.legs[target], d[i][j])
                })
            })
        })
    };
    let big0 = induced(&g.d0, 0).ok_or(GlueError::NoCoequalizer)?;
    let big1 = induced(&g.d1, 1).ok_or(GlueError::NoCoequalizer)?;
    let q = c.colimit_of(&DiagramData::parallel(c, big0, big1)).ok_or(GlueError::NoCoequalizer)?;
    let coeq = q.legs[1];
    let legs: Vec<ArrowId> = (0..n).map(|i| c.comp(coeq, s1.legs[i])).collect();
    let data = g.diagram_data();
    let mut cocone = legs.clone();
    for i in 0..n {
        for j in 0..n {
            cocone.push(c.comp(legs[i], g.d0[i][j]));
        }
    }
    if n > 0 && !c.is_colimit_cocone(&data, q.apex, &cocone) {
        return Err(GlueError::NoCoequalizer);
    }
    if let Some(i) = (0..n).find(|&i| !p.is_open(legs[i])) {
        return Err(GlueError::LegNotClopen(i));
    }
    for i in 0..n {
        for j in 0..n {
            if !is_pullback_square(c, legs[i], legs[j], g.d0[i][j], g.d1[i][j]) {
                return Err(GlueError::EffectivityFailure(i, j));
            }
        }
    }
    let mut stable_along = 0;
    for y in c.arrows_into(q.apex).collect::<Vec<_>>() {
        check_stable(c, g, &legs, y)?;
        stable_along += 1;
    }
    Ok(GluonColimit { apex: q.apex, legs, coproducts: (s1.apex, s2.apex), stable_along })
}

fn check_stable(c: &FinCategory, g: &Gluon, legs: &[ArrowId], y: ArrowId) -> Result<(), GlueError> {
    let n = g.len();
    let name = || c.arrow_name(y).to_string();
    let pb = |a: ArrowId| c.pullback(a, y).ok_or_else(|| GlueError::MissingPullback(format!("{}, {}", c.arrow_name(a), c.arrow_name(y))));
    let v1: Vec<Span> = legs.iter().map(|&u| pb(u)).collect::<Result<_, _>>()?;
    let mut data = DiagramData { nodes: v1.iter().map(|s| s.apex).collect(), edges: Vec::new() };
    let mut cocone: Vec<ArrowId> = v1.iter().map(|s| s.p2).collect();
    for i in 0..n {
        for j in 0..n {
            let sp = pb(c.comp(legs[i], g.d0[i][j]))?;
            let k = data.nodes.len();
            data.nodes.push(sp.apex);
            for (t, d) in [(i, g.d0[i][j]), (j, g.d1[i][j])] {
                let h = c
                    .hom(sp.apex, v1[t].apex)
                    .iter()
                    .copied()
                    .find(|&h| c.comp(v1[t].p1, h) == c.comp(d, sp.p1) && c.comp(v1[t].p2, h) == sp.p2)
                    .ok_or_else(|| GlueError::NotUniversal(name()))?;
                data.edges.push((k, t, h));
            }
            cocone.push(sp.p2);
        }
    }
    if n == 0 {
        return if c.is_initial(c.src(y)) { Ok(()) } else { Err(GlueError::NotUniversal(name())) };
    }
    if c.is_colimit_cocone(&data, c.src(y), &cocone) {
        Ok(())
    } else {
        Err(GlueError::NotUniversal(name()))
    }
}

/// A gluon in a category of sheaves.
#[derive(Debug, Clone)]
pub struct SheafGluon {
    pub u1: Vec<Presheaf>,
    pub u2: Vec<Vec<Presheaf>>,
    pub d0: Vec<Vec<NatTrans>>,
    pub d1: Vec<Vec<NatTrans>>,
}

impl SheafGluon {
    /// Image of a gluon under the sheafified Yoneda functor.
    pub fn from_yoneda(y: &YonedaEmbedding, g: &Gluon) -> Self {
        let n = g.len();
        SheafGluon {
            u1: g.u1.iter().map(|&x| y.sheaf(x).clone()).collect(),
            u2: (0..n).map(|i| (0..n).map(|j| y.sheaf(g.u2[i][j]).clone()).collect()).collect(),
            d0: (0..n).map(|i| (0..n).map(|j| y.arrows[g.d0[i][j]].clone()).collect()).collect(),
            d1: (0..n).map(|i| (0..n).map(|j| y.arrows[g.d1[i][j]].clone()).collect()).collect(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct SheafColimit {
    pub colimit: Presheaf,
    pub legs: Vec<NatTrans>,
    pub legs_mono: bool,
    /// Transformations along which stability was verified.
    pub stable_along: usize,
}

// Pointwise colimit: glue the sections of the pieces along the overlaps.
fn pointwise_glue(base: &Arc<FinCategory>, g: &SheafGluon) -> (Presheaf, Vec<NatTrans>) {
    let c = &**base;
    let n = g.u1.len();
    let mut class: Vec<Vec<Vec<usize>>> = Vec::new();
    let mut sizes = Vec::new();
    for x in c.objects() {
        let offsets: Vec<usize> = g.u1.iter().scan(0, |acc, p| {
            let o = *acc;
            *acc += p.size(x);
            Some(o)
        }).collect();
        let total: usize = g.u1.iter().map(|p| p.size(x)).sum();
        let mut uf: Vec<usize> = (0..total).collect();
        fn find(uf: &mut [usize], i: usize) -> usize {
            let mut r = i;
            while uf[r] != r {
                r = uf[r];
            }
            uf[i] = r;
            r
        }
        for i in 0..n {
            for j in 0..n {
                for z in 0..g.u2[i][j].size(x) {
                    let a = offsets[i] + g.d0[i][j].components[x][z];
                    let b = offsets[j] + g.d1[i][j].components[x][z];
                    let (ra, rb) = (find(&mut uf, a), find(&mut uf, b));
                    uf[ra.max(rb)] = ra.min(rb);
                }
            }
        }
        let mut ids: BTreeMap<usize, usize> = BTreeMap::new();
        let mut per_piece = Vec::with_capacity(n);
        for i in 0..n {
            let v: Vec<usize> = (0..g.u1[i].size(x))
                .map(|e| {
                    let r = find(&mut uf, offsets[i] + e);
                    let next = ids.len();
                    *ids.entry(r).or_insert(next)
                })
                .collect();
            per_piece.push(v);
        }
        // Renumber classes in order of first appearance.
        sizes.push(ids.len());
        class.push(per_piece);
    }
    let restrict = c
        .arrow_ids()
        .map(|f| {
            let (d, s) = (c.dst(f), c.src(f));
            let mut r = vec![usize::MAX; sizes[d]];
            for i in 0..n {
                for e in 0..g.u1[i].size(d) {
                    r[class[d][i][e]] = class[s][i][g.u1[i].restrict(f, e)];
                }
            }
            r
        })
        .collect();
    let p = Presheaf::new(base.clone(), sizes, restrict).expect("pointwise colimit is functorial");
    let legs = (0..n)
        .map(|i| NatTrans { components: c.objects().map(|x| class[x][i].clone()).collect() })
        .collect();
    (p, legs)
}

fn is_componentwise_injective(t: &NatTrans) -> bool {
    t.components.iter().all(|comp| {
        let mut v = comp.clone();
        v.sort();
        v.dedup();
        v.len() == comp.len()
    })
}

/// Colimit of a sheaf gluon: pointwise gluing followed by sheafification.
/// Checks mono legs, effectivity of every overlap, and stability under
/// pullback along every transformation from each sheaf in `tests`.
pub fn sheaf_gluon_colimit(
    site: &Pretopology,
    g: &SheafGluon,
    bound: usize,
    tests: &[Presheaf],
) -> Result<SheafColimit, GlueError> {
    let n = g.u1.len();
    let (colimit, legs) = glue_and_sheafify(site, g, bound)?;
    let legs_mono = legs.iter().all(is_componentwise_injective);
    for i in 0..n {
        for j in 0..n {
            let (pb, p1, p2) = pullback_presheaf(&g.u1[i], &g.u1[j], &legs[i], &legs[j]);
            let cmp = pair_into_pullback(&p1, &p2, &g.d0[i][j], &g.d1[i][j]);
            if !cmp.is_some_and(|m| m.is_iso(&g.u2[i][j], &pb)) {
                return Err(GlueError::EffectivityFailure(i, j));
            }
        }
    }
    let mut stable_along = 0;
    for (ti, y) in tests.iter().enumerate() {
        for (k, h) in sheaf_hom_set(y, &colimit).into_iter().enumerate() {
            let bad = || GlueError::NotUniversal(format!("test sheaf {ti}, map {k}"));
            let v1: Vec<(Presheaf, NatTrans, NatTrans)> =
                (0..n).map(|i| pullback_presheaf(&g.u1[i], y, &legs[i], &h)).collect();
            let mut u2 = vec![Vec::new(); n];
            let mut d0 = vec![Vec::new(); n];
            let mut d1 = vec![Vec::new(); n];
            for i in 0..n {
                for j in 0..n {
                    let via = legs[i].after(&g.d0[i][j]);
                    let (p, a, b) = pullback_presheaf(&g.u2[i][j], y, &via, &h);
                    let e0 = pair_into_pullback(&v1[i].1, &v1[i].2, &g.d0[i][j].after(&a), &b).ok_or_else(bad)?;
                    let e1 = pair_into_pullback(&v1[j].1, &v1[j].2, &g.d1[i][j].after(&a), &b).ok_or_else(bad)?;
                    u2[i].push(p);
                    d0[i].push(e0);
                    d1[i].push(e1);
                }
            }
            let pulled = SheafGluon { u1: v1.iter().map(|v| v.0.clone()).collect(), u2, d0, d1 };
            let (q, qlegs) = glue_and_sheafify(site, &pulled, bound)?;
            // The comparison q -> y is determined by the second projections.
            let cmp = sheaf_hom_set(&q, y)
                .into_iter()
                .filter(|m| (0..n).all(|i| m.after(&qlegs[i]) == v1[i].2))
                .collect::<Vec<_>>();
            if cmp.len() != 1 || !cmp[0].is_iso(&q, y) {
                return Err(bad());
            }
            stable_along += 1;
        }
    }
    Ok(SheafColimit { colimit, legs, legs_mono, stable_along })
}

fn glue_and_sheafify(site: &Pretopology, g: &SheafGluon, bound: usize) -> Result<(Presheaf, Vec<NatTrans>), GlueError> {
    let (p, legs) = pointwise_glue(site.base_arc(), g);
    let a = sheafify(&p, site, bound)?;
    let legs = legs.iter().map(|l| a.unit.after(l)).collect();
    Ok((a.sheaf, legs))
}

/// A gluon on the degree-2 monoidal shape: pieces `U_i` and, for `i < j`,
/// an overlap with arrows to `U_i` and `U_j`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MGluon {
    pub index: Vec<String>,
    pub pieces: Vec<ObjId>,
    pub overlaps: BTreeMap<(usize, usize), (ObjId, ArrowId, ArrowId)>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum MGluonViolation {
    NotMono(ArrowId),
    BadOverlap(usize, usize),
    NoTripleOverlap(usize, usize, usize),
}

/// Degree-3 continuation: for `i < j < k`, an object with arrows to the
/// overlaps `ij`, `ik`, `jk`.
pub type TripleOverlaps = BTreeMap<(usize, usize, usize), (ObjId, [ArrowId; 3])>;

impl MGluon {
    fn overlap(&self, i: usize, j: usize) -> (ObjId, ArrowId, ArrowId) {
        if i < j {
            self.overlaps[&(i, j)]
        } else {
            let (o, a, b) = self.overlaps[&(j, i)];
            (o, b, a)
        }
    }

    /// The same data on the full shape: `U_ii = U_i` with identity
    /// projections and `U_ji = U_ij` with the projections swapped.
    pub fn to_gluon(&self, c: &FinCategory) -> Result<Gluon, GlueError> {
        let n = self.pieces.len();
        let mut u2 = vec![vec![0; n]; n];
        let mut d0 = vec![vec![0; n]; n];
        let mut d1 = vec![vec![0; n]; n];
        for i in 0..n {
            for j in 0..n {
                let (o, a, b) = if i == j {
                    let x = self.pieces[i];
                    (x, c.id(x), c.id(x))
                } else {
                    self.overlap(i, j)
                };
                u2[i][j] = o;
                d0[i][j] = a;
                d1[i][j] = b;
            }
        }
        Gluon::new(c, self.index.clone(), self.pieces.clone(), u2, d0, d1)
    }

    pub fn arrows(&self) -> Vec<ArrowId> {
        self.overlaps.values().flat_map(|&(_, a, b)| [a, b]).collect()
    }
}

/// Mono values on the degree-2 shape and a continuation to degree 3 that
/// sends the pullback squares of the shape to pullbacks.
pub fn validate_mgluon(c: &FinCategory, g: &MGluon) -> Result<TripleOverlaps, MGluonViolation> {
    let n = g.pieces.len();
    for i in 0..n {
        for j in i + 1..n {
            let Some(&(o, a, b)) = g.overlaps.get(&(i, j)) else {
                return Err(MGluonViolation::BadOverlap(i, j));
            };
            if c.src(a) != o || c.src(b) != o || c.dst(a) != g.pieces[i] || c.dst(b) != g.pieces[j] {
                return Err(MGluonViolation::BadOverlap(i, j));
            }
        }
    }
    if let Some(a) = g.arrows().into_iter().find(|&a| !c.is_mono(a)) {
        return Err(MGluonViolation::NotMono(a));
    }
    let mut out = BTreeMap::new();
    for i in 0..n {
        for j in i + 1..n {
            for k in j + 1..n {
                let (ij, ik, jk) = (g.overlaps[&(i, j)], g.overlaps[&(i, k)], g.overlaps[&(j, k)]);
                let found = c.pullback(ij.2, jk.1).and_then(|sp| {
                    c.hom(sp.apex, ik.0).iter().copied().find_map(|m| {
                        let ok = is_pullback_square(c, ij.1, ik.1, sp.p1, m) && is_pullback_square(c, ik.2, jk.2, m, sp.p2);
                        ok.then_some((sp.apex, [sp.p1, m, sp.p2]))
                    })
                });
                match found {
                    Some(t) => {
                        out.insert((i, j, k), t);
                    }
                    None => return Err(MGluonViolation::NoTripleOverlap(i, j, k)),
                }
            }
        }
    }
    Ok(out)
}

/// Every M-gluon with at most `max_index` pieces whose arrows are clopen
/// mono arrows of `p`, up to nothing: all labelings are listed.
pub fn enumerate_mgluons(p: &Pretopology, max_index: usize) -> Vec<MGluon> {
    let c = p.base();
    let monos: Vec<ArrowId> = p.opens().iter().copied().filter(|&a| c.is_mono(a)).collect();
    let mut out = Vec::new();
    for n in 1..=max_index {
        let index: Vec<String> = (1..=n).map(|i| i.to_string()).collect();
        let pairs: Vec<(usize, usize)> = (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).collect();
        let mut pieces = vec![0; n];
        loop {
            // Overlap choices per pair: spans of clopen monos into both pieces.
            let choices: Vec<Vec<(ObjId, ArrowId, ArrowId)>> = pairs
                .iter()
                .map(|&(i, j)| {
                    let mut v = Vec::new();
                    for &a in monos.iter().filter(|&&a| c.dst(a) == pieces[i]) {
                        for &b in monos.iter().filter(|&&b| c.dst(b) == pieces[j] && c.src(b) == c.src(a)) {
                            v.push((c.src(a), a, b));
                        }
                    }
                    v
                })
                .collect();
            let mut pick = vec![0; pairs.len()];
            if choices.iter().all(|v| !v.is_empty()) {
                loop {
                    let overlaps = pairs.iter().zip(&pick).enumerate().map(|(q, (&pr, &k))| (pr, choices[q][k])).collect();
                    let g = MGluon { index: index.clone(), pieces: pieces.clone(), overlaps };
                    if validate_mgluon(c, &g).is_ok() {
                        out.push(g);
                    }
                    if !advance(&mut pick, &choices.iter().map(|v| v.len()).collect::<Vec<_>>()) {
                        break;
                    }
                }
            }
            if !advance(&mut pieces, &vec![c.n_objects(); n]) {
                break;
            }
        }
    }
    out
}

fn advance(v: &mut [usize], radix: &[usize]) -> bool {
    for (x, &r) in v.iter_mut().zip(radix) {
        *x += 1;
        if *x < r {
            return true;
        }
        *x = 0;
    }
    false
}

/// A function between finite sets `{0..dom}` and `{0..cod}`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SetMap {
    pub dom: usize,
    pub cod: usize,
    pub map: Vec<usize>,
}

impl SetMap {
    pub fn new(cod: usize, map: Vec<usize>) -> Self {
        assert!(map.iter().all(|&v| v < cod));
        SetMap { dom: map.len(), cod, map }
    }

    pub fn apply(&self, x: usize) -> usize {
        self.map[x]
    }
}

/// A commuting square `f px = g py` with `f: X -> Z`, `g: Y -> Z`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SetSquare {
    pub f: SetMap,
    pub g: SetMap,
    pub px: SetMap,
    pub py: SetMap,
}

impl SetSquare {
    pub fn commutes(&self) -> bool {
        self.px.cod == self.f.dom
            && self.py.cod == self.g.dom
            && self.f.cod == self.g.cod
            && self.px.dom == self.py.dom
            && (0..self.px.dom).all(|p| self.f.apply(self.px.apply(p)) == self.g.apply(self.py.apply(p)))
    }

    /// `P -> X ×_Z Y` is a bijection.
    pub fn is_pullback(&self) -> bool {
        let mut pairs: Vec<(usize, usize)> = (0..self.px.dom).map(|p| (self.px.apply(p), self.py.apply(p))).collect();
        let want = (0..self.f.dom)
            .flat_map(|x| (0..self.g.dom).map(move |y| (x, y)))
            .filter(|&(x, y)| self.f.apply(x) == self.g.apply(y))
            .count();
        pairs.sort();
        pairs.dedup();
        self.commutes() && pairs.len() == self.px.dom && pairs.len() == want
    }
}

fn jointly_surjective(cod: usize, family: &[SetMap]) -> bool {
    (0..cod).all(|t| family.iter().any(|m| m.cod == cod && m.map.contains(&t)))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LocalPullbackReport {
    /// Every ceiling square is a pullback.
    pub local: bool,
    /// The square itself is a pullback.
    pub direct: bool,
    pub ceilings: usize,
}

/// Tests a commuting square of finite sets locally over covering families
/// of `X`, `Y`, `Z` (jointly surjective, hence universal effective epi)
/// and compares with the direct test.
pub fn check_local_pullback(
    sq: &SetSquare,
    xs: &[SetMap],
    ys: &[SetMap],
    zs: &[SetMap],
) -> Result<LocalPullbackReport, GlueError> {
    if !sq.commutes() {
        return Err(GlueError::PreconditionSquareNotPullback("square does not commute".into()));
    }
    for (name, cod, fam) in [("X", sq.f.dom, xs), ("Y", sq.g.dom, ys), ("Z", sq.f.cod, zs)] {
        if !jointly_surjective(cod, fam) {
            return Err(GlueError::PreconditionSquareNotPullback(format!("cover of {name} is not jointly surjective")));
        }
    }
    let mut local = true;
    let mut ceilings = 0;
    for xi in xs {
        for zk in zs {
            // X_ik = X_i ×_Z Z_k and Y_kj = Z_k ×_Z Y_j, as pairs.
            let xik: Vec<(usize, usize)> = (0..xi.dom)
                .flat_map(|a| (0..zk.dom).map(move |c| (a, c)))
                .filter(|&(a, c)| sq.f.apply(xi.apply(a)) == zk.apply(c))
                .collect();
            for yj in ys {
                let ykj: Vec<(usize, usize)> = (0..zk.dom)
                    .flat_map(|c| (0..yj.dom).map(move |b| (c, b)))
                    .filter(|&(c, b)| zk.apply(c) == sq.g.apply(yj.apply(b)))
                    .collect();
                // P_ikj: elements of P over chosen points of X_i, Z_k, Y_j.
                let mut pikj = Vec::new();
                for p in 0..sq.px.dom {
                    for &(a, c) in &xik {
                        for &(c2, b) in &ykj {
                            if c == c2 && xi.apply(a) == sq.px.apply(p) && yj.apply(b) == sq.py.apply(p) {
                                pikj.push((p, a, c, b));
                            }
                        }
                    }
                }
                let mut pairs: Vec<((usize, usize), (usize, usize))> =
                    pikj.iter().map(|&(_, a, c, b)| ((a, c), (c, b))).collect();
                pairs.sort();
                pairs.dedup();
                let want = xik.iter().flat_map(|&l| ykj.iter().map(move |&r| (l, r))).filter(|(l, r)| l.1 == r.0).count();
                local &= pairs.len() == pikj.len() && pairs.len() == want;
                ceilings += 1;
            }
        }
    }
    Ok(LocalPullbackReport { local, direct: sq.is_pullback(), ceilings })
}

fn random_map(rng: &mut impl Rng, dom: usize, cod: usize) -> SetMap {
    SetMap::new(cod, (0..dom).map(|_| rng.gen_range(0..cod)).collect())
}

fn random_cover(rng: &mut impl Rng, cod: usize) -> Vec<SetMap> {
    loop {
        let legs = rng.gen_range(1..=2);
        let fam: Vec<SetMap> = (0..legs)
            .map(|_| {
                let dom = rng.gen_range(0..=3);
                random_map(rng, dom, cod)
            })
            .collect();
        if jointly_surjective(cod, &fam) {
            return fam;
        }
    }
}

/// A random commuting square of sets with at most 3 elements on `X`, `Y`,
/// `Z`, with covering families of at most two maps each.
pub fn random_set_instance(rng: &mut impl Rng) -> (SetSquare, [Vec<SetMap>; 3]) {
    let (nx, ny, nz) = (rng.gen_range(1..=3), rng.gen_range(1..=3), rng.gen_range(1..=3));
    let f = random_map(rng, nx, nz);
    let g = random_map(rng, ny, nz);
    let mut fibre: Vec<(usize, usize)> =
        (0..nx).flat_map(|x| (0..ny).map(move |y| (x, y))).filter(|&(x, y)| f.map[x] == g.map[y]).collect();
    // Either the pullback in shuffled order, or a random multiset of it.
    let chosen: Vec<(usize, usize)> = if rng.gen_bool(0.5) || fibre.is_empty() {
        fibre.shuffle(rng);
        fibre
    } else {
        (0..rng.gen_range(0..=fibre.len() + 1)).map(|_| fibre[rng.gen_range(0..fibre.len())]).collect()
    };
    let px = SetMap::new(nx, chosen.iter().map(|q| q.0).collect());
    let py = SetMap::new(ny, chosen.iter().map(|q| q.1).collect());
    let covers = [random_cover(rng, nx), random_cover(rng, ny), random_cover(rng, nz)];
    (SetSquare { f, g, px, py }, covers)
}

/// A finite distributive lattice with its points (join-irreducibles).
#[derive(Debug, Clone)]
pub struct Frame {
    pub site: Pretopology,
    leq: Vec<Vec<bool>>,
    pub points: Vec<ObjId>,
}

impl Frame {
    pub fn new(site: &Pretopology) -> Result<Self, GlueError> {
        let c = site.base();
        if !c.is_thin() {
            return Err(GlueError::NotAFrame("category is not thin".into()));
        }
        let n = c.n_objects();
        let leq: Vec<Vec<bool>> = (0..n).map(|x| (0..n).map(|y| !c.hom(x, y).is_empty()).collect()).collect();
        let frame = Frame { site: site.clone(), leq, points: Vec::new() };
        let mut points = Vec::new();
        for x in c.objects() {
            for y in c.objects() {
                if frame.meet(x, y).is_none() || frame.join(&[x, y]).is_none() {
                    return Err(GlueError::NotAFrame("missing meet or join".into()));
                }
            }
            let below: Vec<ObjId> = c.objects().filter(|&y| y != x && frame.leq[y][x]).collect();
            if frame.join(&below) != Some(x) {
                points.push(x);
            }
        }
        for x in c.objects() {
            for y in c.objects() {
                for z in c.objects() {
                    let lhs = frame.meet(x, frame.join(&[y, z]).unwrap()).unwrap();
                    let rhs = frame.join(&[frame.meet(x, y).unwrap(), frame.meet(x, z).unwrap()]).unwrap();
                    if lhs != rhs {
                        return Err(GlueError::NotAFrame("lattice is not distributive".into()));
                    }
                }
            }
        }
        Ok(Frame { points, ..frame })
    }

    pub fn leq(&self, x: ObjId, y: ObjId) -> bool {
        self.leq[x][y]
    }

    pub fn meet(&self, x: ObjId, y: ObjId) -> Option<ObjId> {
        let n = self.leq.len();
        let lower: Vec<ObjId> = (0..n).filter(|&z| self.leq[z][x] && self.leq[z][y]).collect();
        lower.iter().copied().find(|&z| lower.iter().all(|&w| self.leq[w][z]))
    }

    pub fn join(&self, xs: &[ObjId]) -> Option<ObjId> {
        let n = self.leq.len();
        let upper: Vec<ObjId> = (0..n).filter(|&z| xs.iter().all(|&x| self.leq[x][z])).collect();
        upper.iter().copied().find(|&z| upper.iter().all(|&w| self.leq[z][w]))
    }

    /// Indices into `points` of the points below `u`.
    pub fn points_of(&self, u: ObjId) -> Vec<usize> {
        (0..self.points.len()).filter(|&p| self.leq[self.points[p]][u]).collect()
    }

    fn arrow(&self, x: ObjId, y: ObjId) -> ArrowId {
        self.site.base().hom(x, y)[0]
    }

    // A set of points is open when it is the set of points below its join.
    fn is_open_points(&self, s: &[usize]) -> bool {
        let objs: Vec<ObjId> = s.iter().map(|&p| self.points[p]).collect();
        let j = self.join(&objs).expect("frame has joins");
        let mut want = self.points_of(j);
        let mut got = s.to_vec();
        want.sort();
        got.sort();
        got == want
    }
}

/// A finite space over the points of a frame, with all its open sets.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EtaleSpace {
    /// Point of the base under each element.
    pub over: Vec<usize>,
    /// Open subsets as sorted element lists.
    pub opens: Vec<Vec<usize>>,
}

impl EtaleSpace {
    /// Glues the open subspaces `charts[i]` along `overlaps[i][j]` (a
    /// common open below both) and gives the quotient topology.
    pub fn glue(frame: &Frame, charts: &[ObjId], overlaps: &[Vec<ObjId>]) -> (Self, Vec<Vec<usize>>) {
        let n = charts.len();
        let mut elems: Vec<(usize, usize)> = Vec::new();
        for (i, &u) in charts.iter().enumerate() {
            for p in frame.points_of(u) {
                elems.push((i, p));
            }
        }
        let mut cls: Vec<usize> = (0..elems.len()).collect();
        for a in 0..elems.len() {
            for b in 0..a {
                let ((i, p), (j, q)) = (elems[a], elems[b]);
                if p == q && frame.leq(frame.points[p], overlaps[i][j]) {
                    let (ra, rb) = (cls[a], cls[b]);
                    let lo = ra.min(rb);
                    for c in cls.iter_mut() {
                        if *c == ra || *c == rb {
                            *c = lo;
                        }
                    }
                }
            }
        }
        let mut ids: BTreeMap<usize, usize> = BTreeMap::new();
        for &c in &cls {
            let next = ids.len();
            ids.entry(c).or_insert(next);
        }
        let m = ids.len();
        let mut over = vec![0; m];
        let mut chart_maps: Vec<Vec<usize>> = vec![Vec::new(); n];
        for (a, &(i, p)) in elems.iter().enumerate() {
            let e = ids[&cls[a]];
            over[e] = p;
            chart_maps[i].push(e);
        }
        let mut opens = Vec::new();
        for mask in 0u64..(1u64 << m) {
            let set: Vec<usize> = (0..m).filter(|&e| mask >> e & 1 == 1).collect();
            let ok = (0..n).all(|i| {
                let pts: Vec<usize> = frame
                    .points_of(charts[i])
                    .into_iter()
                    .zip(&chart_maps[i])
                    .filter(|(_, e)| set.contains(e))
                    .map(|(p, _)| p)
                    .collect();
                frame.is_open_points(&pts)
            });
            if ok {
                opens.push(set);
            }
        }
        (EtaleSpace { over, opens }, chart_maps)
    }

    /// Continuous sections over `u`, each listed by its value at the points
    /// of `u` in order.
    pub fn sections(&self, frame: &Frame, u: ObjId) -> Vec<Vec<usize>> {
        let pts = frame.points_of(u);
        let fibres: Vec<Vec<usize>> = pts.iter().map(|&p| (0..self.over.len()).filter(|&e| self.over[e] == p).collect()).collect();
        let mut out = Vec::new();
        let mut pick = vec![0; pts.len()];
        if fibres.iter().any(|f| f.is_empty()) {
            return out;
        }
        loop {
            let s: Vec<usize> = pick.iter().zip(&fibres).map(|(&k, f)| f[k]).collect();
            let continuous = self.opens.iter().all(|v| {
                let pre: Vec<usize> = pts.iter().zip(&s).filter(|(_, e)| v.contains(e)).map(|(&p, _)| p).collect();
                frame.is_open_points(&pre)
            });
            if continuous {
                out.push(s);
            }
            if !advance(&mut pick, &fibres.iter().map(|f| f.len()).collect::<Vec<_>>()) {
                break;
            }
        }
        out
    }

    /// The presheaf `u ↦ continuous sections over u`.
    pub fn sections_sheaf(&self, frame: &Frame) -> Presheaf {
        let c = frame.site.base_arc().clone();
        let secs: Vec<Vec<Vec<usize>>> = c.objects().map(|u| self.sections(frame, u)).collect();
        let restrict = c
            .arrow_ids()
            .map(|f| {
                let (w, u) = (c.src(f), c.dst(f));
                let (pu, pw) = (frame.points_of(u), frame.points_of(w));
                secs[u]
                    .iter()
                    .map(|s| {
                        let r: Vec<usize> = pw.iter().map(|p| s[pu.iter().position(|q| q == p).expect("point below")]).collect();
                        secs[w].iter().position(|t| *t == r).expect("restriction is a section")
                    })
                    .collect()
            })
            .collect();
        Presheaf::new(c, secs.iter().map(|s| s.len()).collect(), restrict).expect("sections form a presheaf")
    }
}

/// Realization of a frame sheaf by gluing open pieces.
#[derive(Debug, Clone)]
pub struct Realization {
    /// Pairs `(u, x)` with `x` a section over `u`.
    pub index: Vec<(ObjId, usize)>,
    /// `meets[i][j]` indexes the meet of two index elements.
    pub meets: Vec<Vec<usize>>,
    pub gluon: MGluon,
    pub space: EtaleSpace,
    pub sections: Presheaf,
    /// Isomorphism from the sections sheaf to the input.
    pub iso: NatTrans,
}

pub fn sheaf_to_gluon(site: &Pretopology, f: &Presheaf) -> Result<Realization, GlueError> {
    let frame = Frame::new(site)?;
    let c = site.base();
    if let Some(s) = f.sheaf_violation(site) {
        return Err(GlueError::NotASheaf(s.display(c)));
    }
    let index: Vec<(ObjId, usize)> = c.objects().flat_map(|u| (0..f.size(u)).map(move |x| (u, x))).collect();
    let restrict = |from: ObjId, to: ObjId, x: usize| f.restrict(frame.arrow(to, from), x);
    let n = index.len();
    let mut meets = vec![vec![0; n]; n];
    for a in 0..n {
        for b in 0..n {
            let ((u, x), (v, y)) = (index[a], index[b]);
            let uv = frame.meet(u, v).expect("frame meet");
            let agree: Vec<ObjId> = c
                .objects()
                .filter(|&w| frame.leq(w, uv) && restrict(u, w, x) == restrict(v, w, y))
                .collect();
            let w = frame.join(&agree).expect("frame join");
            if restrict(u, w, x) != restrict(v, w, y) {
                return Err(GlueError::NotASheaf(format!("sections disagree on {}", c.object_name(w))));
            }
            let z = restrict(u, w, x);
            meets[a][b] = index.iter().position(|&e| e == (w, z)).expect("meet is an index element");
        }
    }
    let names: Vec<String> = index.iter().map(|&(u, x)| format!("{}:{}", c.object_name(u), f.label(u, x))).collect();
    let mut overlaps = BTreeMap::new();
    for a in 0..n {
        for b in a + 1..n {
            let w = index[meets[a][b]].0;
            overlaps.insert((a, b), (w, frame.arrow(w, index[a].0), frame.arrow(w, index[b].0)));
        }
    }
    let gluon = MGluon { index: names, pieces: index.iter().map(|e| e.0).collect(), overlaps };
    validate_mgluon(c, &gluon).map_err(|v| GlueError::InvalidGluon(format!("{v:?}")))?;
    let charts: Vec<ObjId> = gluon.pieces.clone();
    let ov: Vec<Vec<ObjId>> = (0..n).map(|a| (0..n).map(|b| index[meets[a][b]].0).collect()).collect();
    let (space, _) = EtaleSpace::glue(&frame, &charts, &ov);
    let sections = space.sections_sheaf(&frame);
    let iso = find_iso(&sections, f).ok_or_else(|| GlueError::NotASheaf("sections of the glued space differ".into()))?;
    Ok(Realization { index, meets, gluon, space, sections, iso })
}

/// Gluon file: pieces, overlaps and projections named in a carrier.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawGluon {
    pub index: Vec<String>,
    pub variant: GammaVariant,
    /// Word to object name.
    pub objects: BTreeMap<String, String>,
    /// `d0^w` / `d1^w` (full) or `w>i` (monoidal) to arrow name.
    pub arrows: BTreeMap<String, String>,
}

pub enum LoadedGluon {
    Full(Gluon),
    Monoidal(MGluon),
}

impl RawGluon {
    pub fn resolve(&self, c: &FinCategory) -> Result<LoadedGluon, WorkspaceError> {
        let obj = |w: &str| {
            let name = self.objects.get(w).ok_or_else(|| WorkspaceError::Validation(format!("no object for word `{w}`")))?;
            c.obj(name).ok_or_else(|| WorkspaceError::UnresolvedName(name.clone()))
        };
        let arr = |k: &str| {
            let name = self.arrows.get(k).ok_or_else(|| WorkspaceError::Validation(format!("no arrow for `{k}`")))?;
            c.arrow(name).ok_or_else(|| WorkspaceError::UnresolvedName(name.clone()))
        };
        let n = self.index.len();
        let w = |ix: &[usize]| word_name(&self.index, ix);
        let pieces = (0..n).map(|i| obj(&w(&[i]))).collect::<Result<Vec<_>, _>>()?;
        match self.variant {
            GammaVariant::Full => {
                let mut u2 = vec![vec![0; n]; n];
                let mut d0 = vec![vec![0; n]; n];
                let mut d1 = vec![vec![0; n]; n];
                for i in 0..n {
                    for j in 0..n {
                        let ij = w(&[i, j]);
                        u2[i][j] = obj(&ij)?;
                        d0[i][j] = arr(&format!("d0^{ij}"))?;
                        d1[i][j] = arr(&format!("d1^{ij}"))?;
                    }
                }
                Gluon::new(c, self.index.clone(), pieces, u2, d0, d1)
                    .map(LoadedGluon::Full)
                    .map_err(|e| WorkspaceError::Validation(e.to_string()))
            }
            GammaVariant::Monoidal { .. } => {
                let mut overlaps = BTreeMap::new();
                for i in 0..n {
                    for j in i + 1..n {
                        let ij = w(&[i, j]);
                        let a = arr(&format!("{ij}>{}", w(&[i])))?;
                        let b = arr(&format!("{ij}>{}", w(&[j])))?;
                        overlaps.insert((i, j), (obj(&ij)?, a, b));
                    }
                }
                Ok(LoadedGluon::Monoidal(MGluon { index: self.index.clone(), pieces, overlaps }))
            }
        }
    }
}
