//! Inference-rule saturation inside a bounded sheaf fragment, and the
//! universal subcanonical presite of a presite computed by it.
//!
//! Elements are objects, arrows and coverings of the ambient fragment.
//! Rules only select ambient data; every derived element records the rule
//! and premises that produced it, so derivations replay.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use serde_json::{json, Value};
use thiserror::Error;

use crate::axioms::{Status, Verdict, Witness};
use crate::fincat::{ArrowId, Diagram, FinCategory, ObjId, RawCategory, Sink};
use crate::sheafkit::{pair_into_pullback, pullback_presheaf, yoneda_embed, SheafError, SheafFragment};
use crate::site::{refines, sinks_from, Coverage, Pretopology};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ClosureError {
    #[error("no fixpoint within depth {depth}: {frontier} elements still derivable")]
    DepthBoundHit { depth: usize, frontier: usize },
    #[error("a needed pullback exceeds the fragment bound {0}")]
    BoundExceeded(usize),
    #[error("element is not derived")]
    NotDerived,
    #[error(transparent)]
    Sheaf(#[from] SheafError),
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Element {
    Object(ObjId),
    Arrow(ArrowId),
    Covering(Sink),
}

impl Element {
    pub fn name(&self, c: &FinCategory) -> String {
        match self {
            Element::Object(x) => c.object_name(*x).to_string(),
            Element::Arrow(f) => c.arrow_name(*f).to_string(),
            Element::Covering(s) => s.display(c),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Derivation {
    pub rule: &'static str,
    /// Indices of the premises in the state.
    pub premises: Vec<usize>,
    pub round: usize,
}

/// A set of ambient elements, each either an axiom or derived by a rule
/// from earlier elements.
#[derive(Debug, Clone, Default)]
pub struct ClosureState {
    elements: Vec<Element>,
    index: BTreeMap<Element, usize>,
    proofs: Vec<Option<Derivation>>,
    /// Rounds that produced new elements.
    pub depth: usize,
}

impl ClosureState {
    pub fn from_axioms(axioms: impl IntoIterator<Item = Element>) -> Self {
        let mut st = ClosureState::default();
        for e in axioms {
            st.insert(e, None);
        }
        st
    }

    fn insert(&mut self, e: Element, proof: Option<Derivation>) -> bool {
        if self.index.contains_key(&e) {
            return false;
        }
        self.index.insert(e.clone(), self.elements.len());
        self.elements.push(e);
        self.proofs.push(proof);
        true
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn elements(&self) -> &[Element] {
        &self.elements
    }

    pub fn contains(&self, e: &Element) -> bool {
        self.index.contains_key(e)
    }

    pub fn position(&self, e: &Element) -> Option<usize> {
        self.index.get(e).copied()
    }

    pub fn proof(&self, i: usize) -> Option<&Derivation> {
        self.proofs[i].as_ref()
    }

    pub fn is_axiom(&self, i: usize) -> bool {
        self.proofs[i].is_none()
    }

    pub fn has_object(&self, x: ObjId) -> bool {
        self.contains(&Element::Object(x))
    }

    pub fn has_arrow(&self, f: ArrowId) -> bool {
        self.contains(&Element::Arrow(f))
    }

    pub fn objects(&self) -> impl Iterator<Item = ObjId> + '_ {
        self.index.keys().filter_map(|e| if let Element::Object(x) = e { Some(*x) } else { None })
    }

    pub fn arrows(&self) -> impl Iterator<Item = ArrowId> + '_ {
        self.index.keys().filter_map(|e| if let Element::Arrow(f) = e { Some(*f) } else { None })
    }

    pub fn coverings(&self) -> impl Iterator<Item = &Sink> + '_ {
        self.index.keys().filter_map(|e| if let Element::Covering(s) = e { Some(s) } else { None })
    }

    /// Legs of the coverings.
    pub fn opens(&self) -> BTreeSet<ArrowId> {
        self.coverings().flat_map(|s| s.legs.iter().copied()).collect()
    }

    pub fn element_set(&self) -> BTreeSet<Element> {
        self.index.keys().cloned().collect()
    }

    /// Length of the longest chain of derivations ending at element `i`.
    pub fn proof_length(&self, i: usize) -> usize {
        let mut memo = vec![None; self.len()];
        self.proof_length_memo(i, &mut memo)
    }

    fn proof_length_memo(&self, i: usize, memo: &mut Vec<Option<usize>>) -> usize {
        if let Some(n) = memo[i] {
            return n;
        }
        let n = match &self.proofs[i] {
            None => 0,
            Some(d) => 1 + d.premises.iter().map(|&p| self.proof_length_memo(p, memo)).max().unwrap_or(0),
        };
        memo[i] = Some(n);
        n
    }
}

/// An instance: premises (all in the state) and a conclusion.
pub type Instance = (Vec<Element>, Element);

pub trait InferenceRule: Sync {
    fn id(&self) -> &'static str;
    /// All instances whose premises lie in `st`.
    fn instances(&self, amb: &SheafFragment, st: &ClosureState) -> Result<Vec<Instance>, ClosureError>;
}

// Pullback in the fragment, refusing pullbacks that do not fit the bound.
fn ambient_pullback(amb: &SheafFragment, f: ArrowId, g: ArrowId) -> Result<(ObjId, ArrowId, ArrowId), ClosureError> {
    let c = &*amb.category;
    let (p, _, _) = pullback_presheaf(&amb.sheaves[c.src(f)], &amb.sheaves[c.src(g)], &amb.arrows[f], &amb.arrows[g]);
    if p.max_size() > amb.bound {
        return Err(ClosureError::BoundExceeded(amb.bound));
    }
    let sp = c.pullback(f, g).ok_or(ClosureError::BoundExceeded(amb.bound))?;
    Ok((sp.apex, sp.p1, sp.p2))
}

/// Whether the commutative square `f u = v k` is a pullback of sheaves.
pub fn is_sheaf_pullback(amb: &SheafFragment, f: ArrowId, v: ArrowId, u: ArrowId, k: ArrowId) -> bool {
    let c = &*amb.category;
    if c.comp(f, u) != c.comp(v, k) {
        return false;
    }
    let (p, p1, p2) = pullback_presheaf(&amb.sheaves[c.src(f)], &amb.sheaves[c.src(v)], &amb.arrows[f], &amb.arrows[v]);
    pair_into_pullback(&p1, &p2, &amb.arrows[u], &amb.arrows[k]).is_some_and(|t| t.is_iso(&amb.sheaves[c.src(u)], &p))
}

pub struct IdentityRule;
pub struct CompositionRule;
pub struct IsoRule;
pub struct PullbackRule;
pub struct CoveringPullbackRule;
pub struct CoveringCompositionRule;
pub struct RefinementRule;
pub struct GlueRule;

impl InferenceRule for IdentityRule {
    fn id(&self) -> &'static str {
        "Id"
    }

    fn instances(&self, amb: &SheafFragment, st: &ClosureState) -> Result<Vec<Instance>, ClosureError> {
        let c = &*amb.category;
        Ok(st.objects().map(|x| (vec![Element::Object(x)], Element::Arrow(c.id(x)))).collect())
    }
}

impl InferenceRule for CompositionRule {
    fn id(&self) -> &'static str {
        "C"
    }

    fn instances(&self, amb: &SheafFragment, st: &ClosureState) -> Result<Vec<Instance>, ClosureError> {
        let c = &*amb.category;
        let arrows: Vec<ArrowId> = st.arrows().collect();
        let mut out = Vec::new();
        for &f in &arrows {
            for &g in arrows.iter().filter(|&&g| c.src(g) == c.dst(f)) {
                out.push((vec![Element::Arrow(f), Element::Arrow(g)], Element::Arrow(c.comp(g, f))));
            }
        }
        Ok(out)
    }
}

impl InferenceRule for IsoRule {
    fn id(&self) -> &'static str {
        "PT1"
    }

    fn instances(&self, amb: &SheafFragment, st: &ClosureState) -> Result<Vec<Instance>, ClosureError> {
        let c = &*amb.category;
        Ok(st
            .arrows()
            .filter_map(|f| {
                let inv = c.inverse(f)?;
                st.has_arrow(inv)
                    .then(|| (vec![Element::Arrow(f), Element::Arrow(inv)], Element::Covering(Sink::singleton(c, f))))
            })
            .collect())
    }
}

impl InferenceRule for PullbackRule {
    fn id(&self) -> &'static str {
        "PB"
    }

    // Pullback objects and projections of open legs along derived arrows.
    fn instances(&self, amb: &SheafFragment, st: &ClosureState) -> Result<Vec<Instance>, ClosureError> {
        let c = &*amb.category;
        let mut out = Vec::new();
        for s in st.coverings() {
            for g in c.arrows_into(s.apex).filter(|&g| st.has_arrow(g)) {
                for &u in &s.legs {
                    let (p, p1, p2) = ambient_pullback(amb, u, g)?;
                    let prem = vec![Element::Covering(s.clone()), Element::Arrow(g)];
                    out.push((prem.clone(), Element::Object(p)));
                    out.push((prem.clone(), Element::Arrow(p1)));
                    out.push((prem, Element::Arrow(p2)));
                }
            }
        }
        Ok(out)
    }
}

impl InferenceRule for CoveringPullbackRule {
    fn id(&self) -> &'static str {
        "PT2"
    }

    fn instances(&self, amb: &SheafFragment, st: &ClosureState) -> Result<Vec<Instance>, ClosureError> {
        let c = &*amb.category;
        let mut out = Vec::new();
        for s in st.coverings() {
            for g in c.arrows_into(s.apex).filter(|&g| st.has_arrow(g)) {
                let mut legs = BTreeSet::new();
                for &u in &s.legs {
                    legs.insert(ambient_pullback(amb, u, g)?.2);
                }
                if legs.iter().all(|&l| st.has_arrow(l)) {
                    let mut prem = vec![Element::Covering(s.clone()), Element::Arrow(g)];
                    prem.extend(legs.iter().map(|&l| Element::Arrow(l)));
                    out.push((prem, Element::Covering(Sink { apex: c.src(g), legs })));
                }
            }
        }
        Ok(out)
    }
}

impl InferenceRule for CoveringCompositionRule {
    fn id(&self) -> &'static str {
        "PT3"
    }

    // Composites with inclusion-minimal local coverings; larger local
    // choices are reached by refinement.
    fn instances(&self, amb: &SheafFragment, st: &ClosureState) -> Result<Vec<Instance>, ClosureError> {
        let c = &*amb.category;
        let mut by_apex: BTreeMap<ObjId, Vec<&Sink>> = BTreeMap::new();
        for s in st.coverings() {
            by_apex.entry(s.apex).or_default().push(s);
        }
        let minimal: BTreeMap<ObjId, Vec<&Sink>> = by_apex
            .iter()
            .map(|(&x, all)| {
                let keep = all
                    .iter()
                    .copied()
                    .filter(|v| !all.iter().any(|w| w.legs.len() < v.legs.len() && w.legs.is_subset(&v.legs)))
                    .collect();
                (x, keep)
            })
            .collect();
        let mut out = Vec::new();
        for s in st.coverings() {
            let legs: Vec<ArrowId> = s.legs.iter().copied().collect();
            let choices: Vec<&Vec<&Sink>> = match legs.iter().map(|&u| minimal.get(&c.src(u))).collect::<Option<_>>() {
                Some(ch) => ch,
                None => continue,
            };
            let mut idx = vec![0usize; legs.len()];
            'product: loop {
                let mut prem = vec![Element::Covering(s.clone())];
                let mut comp = BTreeSet::new();
                for (k, &u) in legs.iter().enumerate() {
                    let local = choices[k][idx[k]];
                    prem.push(Element::Covering(local.clone()));
                    comp.extend(local.legs.iter().map(|&w| c.comp(u, w)));
                }
                if comp.iter().all(|&l| st.has_arrow(l)) {
                    prem.extend(comp.iter().map(|&l| Element::Arrow(l)));
                    out.push((prem, Element::Covering(Sink { apex: s.apex, legs: comp })));
                }
                let mut k = 0;
                loop {
                    if k == legs.len() {
                        break 'product;
                    }
                    idx[k] += 1;
                    if idx[k] < choices[k].len() {
                        break;
                    }
                    idx[k] = 0;
                    k += 1;
                }
            }
        }
        Ok(out)
    }
}

impl InferenceRule for RefinementRule {
    fn id(&self) -> &'static str {
        "PT4"
    }

    fn instances(&self, amb: &SheafFragment, st: &ClosureState) -> Result<Vec<Instance>, ClosureError> {
        let c = &*amb.category;
        let opens = st.opens();
        let mut out = Vec::new();
        let apexes: BTreeSet<ObjId> = st.coverings().map(|s| s.apex).collect();
        for x in apexes {
            let covs: Vec<&Sink> = st.coverings().filter(|s| s.apex == x).collect();
            let cand: Vec<ArrowId> = opens.iter().copied().filter(|&f| c.dst(f) == x && st.has_arrow(f)).collect();
            for s in sinks_from(x, &cand) {
                if let Some(t) = covs.iter().find(|t| refines(c, &s, t)) {
                    let mut prem = vec![Element::Covering((*t).clone())];
                    prem.extend(s.legs.iter().map(|&l| Element::Arrow(l)));
                    out.push((prem, Element::Covering(s)));
                }
            }
        }
        Ok(out)
    }
}

impl InferenceRule for GlueRule {
    fn id(&self) -> &'static str {
        "S"
    }

    // An ambient arrow whose restrictions along a covering are derived.
    fn instances(&self, amb: &SheafFragment, st: &ClosureState) -> Result<Vec<Instance>, ClosureError> {
        let c = &*amb.category;
        let mut out = Vec::new();
        for s in st.coverings() {
            for f in c.arrows_from(s.apex).filter(|&f| st.has_object(c.dst(f))) {
                if s.legs.iter().all(|&u| st.has_arrow(c.comp(f, u))) {
                    let mut prem = vec![Element::Covering(s.clone()), Element::Object(c.dst(f))];
                    prem.extend(s.legs.iter().map(|&u| Element::Arrow(c.comp(f, u))));
                    out.push((prem, Element::Arrow(f)));
                }
            }
        }
        Ok(out)
    }
}

/// Composition, identities, isos, pullbacks of opens, covering pullback,
/// covering composition, refinement and gluing.
pub fn tsub_rules() -> Vec<Box<dyn InferenceRule>> {
    vec![
        Box::new(IdentityRule),
        Box::new(CompositionRule),
        Box::new(IsoRule),
        Box::new(PullbackRule),
        Box::new(CoveringPullbackRule),
        Box::new(CoveringCompositionRule),
        Box::new(RefinementRule),
        Box::new(GlueRule),
    ]
}

// New conclusions of one round, in rule order then instance order.
fn round(rules: &[Box<dyn InferenceRule>], amb: &SheafFragment, st: &ClosureState) -> Result<Vec<(&'static str, Instance)>, ClosureError> {
    let per_rule: Vec<Result<Vec<Instance>, ClosureError>> = std::thread::scope(|s| {
        let handles: Vec<_> = rules.iter().map(|r| s.spawn(move || r.instances(amb, st))).collect();
        handles.into_iter().map(|h| h.join().expect("rule matcher panicked")).collect()
    });
    let mut seen = BTreeSet::new();
    let mut out = Vec::new();
    for (r, inst) in rules.iter().zip(per_rule) {
        for (prem, concl) in inst? {
            if !st.contains(&concl) && seen.insert(concl.clone()) {
                out.push((r.id(), (prem, concl)));
            }
        }
    }
    Ok(out)
}

/// Least fixpoint of the rules over `state`, within `depth` rounds.
pub fn saturate(rules: &[Box<dyn InferenceRule>], amb: &SheafFragment, state: &ClosureState, depth: usize) -> Result<ClosureState, ClosureError> {
    let mut st = state.clone();
    loop {
        let new = round(rules, amb, &st)?;
        if new.is_empty() {
            return Ok(st);
        }
        if st.depth == depth {
            return Err(ClosureError::DepthBoundHit { depth, frontier: new.len() });
        }
        st.depth += 1;
        for (rule, (prem, concl)) in new {
            let premises = prem.iter().map(|p| st.position(p).expect("premise in state")).collect();
            st.insert(concl, Some(Derivation { rule, premises, round: st.depth }));
        }
    }
}

/// Replays every derivation: the rule, run on exactly the recorded
/// premises, must yield the conclusion. Returns the first element that
/// does not replay.
pub fn check_proofs(rules: &[Box<dyn InferenceRule>], amb: &SheafFragment, st: &ClosureState) -> Result<Option<usize>, ClosureError> {
    for i in 0..st.len() {
        let Some(d) = st.proof(i) else { continue };
        if d.premises.iter().any(|&p| p >= i) {
            return Ok(Some(i));
        }
        let local = ClosureState::from_axioms(d.premises.iter().map(|&p| st.elements()[p].clone()));
        let rule = rules.iter().find(|r| r.id() == d.rule).expect("known rule");
        let concl = &st.elements()[i];
        if !rule.instances(amb, &local)?.iter().any(|(_, c)| c == concl) {
            return Ok(Some(i));
        }
    }
    Ok(None)
}

/// Whether no rule instance over `elements` has a conclusion outside it.
pub fn is_closed(rules: &[Box<dyn InferenceRule>], amb: &SheafFragment, elements: &BTreeSet<Element>) -> Result<bool, ClosureError> {
    let st = ClosureState::from_axioms(elements.iter().cloned());
    Ok(round(rules, amb, &st)?.is_empty())
}

/// The closure of the Yoneda image of a presite inside its bounded sheaf
/// fragment, with the induced presite and the arrow from the original one.
#[derive(Debug, Clone)]
pub struct SubPresite {
    pub site: Pretopology,
    pub fragment: SheafFragment,
    /// Yoneda functor into the fragment.
    pub yoneda: Diagram,
    pub state: ClosureState,
    /// The derived subcategory, objects and arrows in ambient id order.
    pub category: Arc<FinCategory>,
    pub pretopology: Pretopology,
    pub objects: Vec<ObjId>,
    pub arrows: Vec<ArrowId>,
    /// The Yoneda functor corestricted to the derived subcategory.
    pub yprime: Diagram,
}

pub fn tsub_closure(p: &Pretopology, bound: usize, depth: usize) -> Result<SubPresite, ClosureError> {
    let fragment = SheafFragment::enumerate(p, bound);
    let y = yoneda_embed(p, bound)?;
    let yoneda = fragment.yoneda_functor(&y).ok_or(ClosureError::BoundExceeded(bound))?;
    let c = p.base();
    let image = |s: &Sink| Sink { apex: yoneda.objects[s.apex], legs: s.legs.iter().map(|&u| yoneda.arrows[u]).collect() };
    let mut axioms: Vec<Element> = c.objects().map(|x| Element::Object(yoneda.objects[x])).collect();
    axioms.extend(c.arrow_ids().map(|f| Element::Arrow(yoneda.arrows[f])));
    axioms.extend(p.coverings().iter().map(|s| Element::Covering(image(s))));
    let start = ClosureState::from_axioms(axioms);
    let state = saturate(&tsub_rules(), &fragment, &start, depth)?;
    Ok(SubPresite::build(p.clone(), fragment, yoneda, state))
}

impl SubPresite {
    fn build(site: Pretopology, fragment: SheafFragment, yoneda: Diagram, state: ClosureState) -> Self {
        let amb = &*fragment.category;
        let objects: Vec<ObjId> = state.objects().collect();
        let arrows: Vec<ArrowId> = state.arrows().collect();
        let mut raw = RawCategory::new();
        for &x in &objects {
            raw.object(amb.object_name(x));
            raw.identities.insert(amb.object_name(x).to_string(), amb.arrow_name(amb.id(x)).to_string());
        }
        for &f in &arrows {
            raw.arrow(amb.arrow_name(f), amb.object_name(amb.src(f)), amb.object_name(amb.dst(f)));
        }
        for &f in &arrows {
            for &g in arrows.iter().filter(|&&g| amb.src(g) == amb.dst(f)) {
                raw.compose(amb.arrow_name(g), amb.arrow_name(f), amb.arrow_name(amb.comp(g, f)));
            }
        }
        let category = Arc::new(raw.build().expect("derived elements form a subcategory"));
        let obj_of: BTreeMap<ObjId, ObjId> = objects.iter().enumerate().map(|(i, &x)| (x, i)).collect();
        let arr_of: BTreeMap<ArrowId, ArrowId> = arrows.iter().enumerate().map(|(i, &f)| (f, i)).collect();
        let coverings: Vec<Sink> = state
            .coverings()
            .map(|s| Sink { apex: obj_of[&s.apex], legs: s.legs.iter().map(|l| arr_of[l]).collect() })
            .collect();
        let pretopology = Pretopology::new(category.clone(), coverings);
        let c = site.base();
        let yprime = Diagram::new(
            c.clone(),
            c.objects().map(|x| obj_of[&yoneda.objects[x]]).collect(),
            c.arrow_ids().map(|f| arr_of[&yoneda.arrows[f]]).collect(),
            &category,
        )
        .expect("Yoneda corestricts to the closure");
        SubPresite { site, fragment, yoneda, state, category, pretopology, objects, arrows, yprime }
    }

    pub fn ambient(&self) -> &FinCategory {
        &self.fragment.category
    }

    /// Subobject ids of ambient objects in the closure.
    pub fn local_object(&self, x: ObjId) -> Option<ObjId> {
        self.objects.iter().position(|&y| y == x)
    }

    pub fn local_arrow(&self, f: ArrowId) -> Option<ArrowId> {
        self.arrows.binary_search(&f).ok()
    }

    /// Every ambient arrow between derived objects is derived.
    pub fn is_full(&self) -> bool {
        let amb = self.ambient();
        self.objects.iter().all(|&x| self.objects.iter().all(|&y| amb.hom(x, y).iter().all(|&f| self.state.has_arrow(f))))
    }

    pub fn yprime_injective_on_objects(&self) -> bool {
        let set: BTreeSet<ObjId> = self.yprime.objects.iter().copied().collect();
        set.len() == self.yprime.objects.len()
    }

    /// Hom-set maps of Y' that are bijections.
    pub fn yprime_fully_faithful(&self) -> bool {
        let c = self.site.base();
        let d = &*self.category;
        c.objects().all(|a| {
            c.objects().all(|b| {
                let imgs: BTreeSet<ArrowId> = c.hom(a, b).iter().map(|&f| self.yprime.arrows[f]).collect();
                imgs.len() == c.hom(a, b).len() && imgs.len() == d.hom(self.yprime.objects[a], self.yprime.objects[b]).len()
            })
        })
    }

    pub fn yprime_faithful(&self) -> bool {
        let c = self.site.base();
        c.objects().all(|a| {
            c.objects().all(|b| {
                let imgs: BTreeSet<ArrowId> = c.hom(a, b).iter().map(|&f| self.yprime.arrows[f]).collect();
                imgs.len() == c.hom(a, b).len()
            })
        })
    }

    fn image_objects(&self) -> BTreeSet<ObjId> {
        self.yoneda.objects.iter().copied().collect()
    }

    /// Plain opens: pullbacks of images of opens of the original presite
    /// along derived arrows into Yoneda images.
    pub fn plain_opens(&self) -> BTreeSet<ArrowId> {
        let amb = self.ambient();
        let c = self.site.base();
        let opens = self.state.opens();
        opens
            .iter()
            .copied()
            .filter(|&u| {
                let x = amb.dst(u);
                c.objects().any(|y| {
                    let ty = self.yoneda.objects[y];
                    amb.hom(x, ty).iter().filter(|&&f| self.state.has_arrow(f)).any(|&f| {
                        c.arrows_into(y).filter(|v| self.site.is_open(*v)).any(|v| {
                            let tv = self.yoneda.arrows[v];
                            amb.hom(amb.src(u), amb.src(tv)).iter().any(|&k| is_sheaf_pullback(&self.fragment, f, tv, u, k))
                        })
                    })
                })
            })
            .collect()
    }

    /// Heights of opens: the fewest plain factors of a decomposition.
    pub fn open_heights(&self) -> BTreeMap<ArrowId, usize> {
        let amb = self.ambient();
        let opens = self.state.opens();
        let plain = self.plain_opens();
        let mut h: BTreeMap<ArrowId, usize> = plain.iter().map(|&u| (u, 1)).collect();
        loop {
            let mut changed = false;
            for &u in &opens {
                for &a in plain.iter().filter(|&&a| amb.dst(a) == amb.dst(u)) {
                    for &b in opens.iter().filter(|&&b| amb.src(b) == amb.src(u) && amb.dst(b) == amb.src(a)) {
                        if amb.comp(a, b) != u {
                            continue;
                        }
                        if let Some(&hb) = h.get(&b) {
                            if h.get(&u).is_none_or(|&hu| hb + 1 < hu) {
                                h.insert(u, hb + 1);
                                changed = true;
                            }
                        }
                    }
                }
            }
            if !changed {
                return h;
            }
        }
    }

    /// Heights of objects: zero on Yoneda images, otherwise the least
    /// height of a tail.
    pub fn object_heights(&self, open_heights: &BTreeMap<ArrowId, usize>) -> BTreeMap<ObjId, usize> {
        let amb = self.ambient();
        let images = self.image_objects();
        self.objects
            .iter()
            .filter_map(|&x| {
                if images.contains(&x) {
                    return Some((x, 0));
                }
                images
                    .iter()
                    .flat_map(|&t| amb.hom(x, t).iter())
                    .filter_map(|f| open_heights.get(f))
                    .min()
                    .map(|&n| (x, n))
            })
            .collect()
    }

    pub fn metrics(&self) -> Metrics {
        let open_heights = self.open_heights();
        let object_heights = self.object_heights(&open_heights);
        let plain = self.plain_opens();
        Metrics { plain, open_heights, object_heights }
    }

    /// Height data of one derived element.
    pub fn proof_metrics(&self, e: &Element, m: &Metrics) -> Result<ElementMetrics, ClosureError> {
        let i = self.state.position(e).ok_or(ClosureError::NotDerived)?;
        let amb = self.ambient();
        let opens = self.state.opens();
        let mut out = ElementMetrics { proof_length: self.state.proof_length(i), ..Default::default() };
        match e {
            Element::Object(x) => {
                out.height = m.object_heights.get(x).copied();
                out.tail = self.tail(*x, m);
            }
            Element::Arrow(f) => {
                out.plain = m.plain.contains(f);
                out.semiplain = m.open_heights.contains_key(f);
                if opens.contains(f) {
                    out.height = m.open_heights.get(f).copied();
                    out.biheight = out.height.zip(m.object_heights.get(&amb.dst(*f)).copied());
                } else {
                    out.biheight = m.object_heights.get(&amb.src(*f)).copied().zip(m.object_heights.get(&amb.dst(*f)).copied());
                }
            }
            Element::Covering(_) => {}
        }
        Ok(out)
    }

    /// A tail of least height, if any.
    pub fn tail(&self, x: ObjId, m: &Metrics) -> Option<ArrowId> {
        let amb = self.ambient();
        self.image_objects()
            .iter()
            .flat_map(|&t| amb.hom(x, t).iter().copied())
            .filter(|f| m.open_heights.contains_key(f))
            .min_by_key(|f| m.open_heights[f])
    }

    /// Tails, semiplainness of opens, fullness and transport of
    /// topological generators along tails.
    pub fn structure_report(&self) -> Vec<Verdict> {
        let amb = self.ambient();
        let m = self.metrics();
        let mk = |id: &str| Verdict { axiom: id.into(), status: Status::Pass, clause: None, witness: None, checked: 0, out_of_bound: 0, bound: Some(self.fragment.bound) };
        let fail = |v: &mut Verdict, w: Witness| {
            v.status = Status::Fail;
            v.witness.get_or_insert(w);
        };
        let mut tails = mk("tails");
        for &x in &self.objects {
            tails.checked += 1;
            if self.tail(x, &m).is_none() && m.object_heights.get(&x) != Some(&0) {
                fail(&mut tails, Witness { objects: vec![x], arrows: vec![], note: "object without a tail".into() });
            }
        }
        let mut semi = mk("semiplain-opens");
        for u in self.state.opens() {
            semi.checked += 1;
            if !m.open_heights.contains_key(&u) {
                fail(&mut semi, Witness { objects: vec![], arrows: vec![u], note: "open arrow is not semiplain".into() });
            }
        }
        let mut full = mk("full");
        full.checked = self.objects.len() * self.objects.len();
        if !self.is_full() {
            fail(&mut full, Witness { note: "ambient arrow between derived objects is not derived".into(), ..Default::default() });
        }
        let mut gens = mk("generator-transport");
        let c = self.site.base();
        let coverings: Vec<&Sink> = self.state.coverings().collect();
        let images = self.image_objects();
        for u in self.state.opens() {
            let x = amb.dst(u);
            let Some(f) = self.tail(x, &m).or_else(|| images.contains(&x).then(|| amb.id(x))) else { continue };
            gens.checked += 1;
            let target = amb.dst(f);
            let from_image_opens = |w: ArrowId| {
                c.arrow_ids().any(|g| self.site.is_open(g) && self.yoneda.arrows[g] == w && self.yoneda.objects[c.dst(g)] == target)
            };
            let ok = coverings.iter().any(|s| {
                s.apex == amb.src(u)
                    && s.legs.iter().all(|&v| images.contains(&amb.src(v)) && from_image_opens(amb.comp(f, amb.comp(u, v))))
            });
            if !ok {
                fail(&mut gens, Witness { objects: vec![], arrows: vec![u, f], note: "no covering by images over the tail".into() });
            }
        }
        vec![tails, semi, full, gens]
    }

    /// Coverings of the closure are exactly its epi families of opens.
    pub fn reflects_coverings_check(&self) -> Verdict {
        let amb = self.ambient();
        let opens = self.state.opens();
        let covs: BTreeSet<&Sink> = self.state.coverings().collect();
        let mut v = Verdict { axiom: "reflects-coverings".into(), status: Status::Pass, clause: None, witness: None, checked: 0, out_of_bound: 0, bound: Some(self.fragment.bound) };
        for &x in &self.objects {
            let into: Vec<ArrowId> = opens.iter().copied().filter(|&u| amb.dst(u) == x).collect();
            for s in sinks_from(x, &into) {
                v.checked += 1;
                if covs.contains(&s) != self.fragment.is_epi_sink(&s) {
                    v.status = Status::Fail;
                    let note = if covs.contains(&s) { "covering is not epi" } else { "epi family is not a covering" };
                    v.witness = Some(Witness { objects: vec![x], arrows: s.legs.into_iter().collect(), note: note.into() });
                    return v;
                }
            }
        }
        v
    }

    pub fn to_json(&self) -> Value {
        let amb = self.ambient();
        let m = self.metrics();
        let els = self.state.elements();
        let elements: Vec<Value> = els
            .iter()
            .enumerate()
            .map(|(i, e)| {
                let em = self.proof_metrics(e, &m).expect("element of the state");
                let kind = match e {
                    Element::Object(_) => "object",
                    Element::Arrow(_) => "arrow",
                    Element::Covering(_) => "covering",
                };
                json!({
                    "id": i,
                    "kind": kind,
                    "name": e.name(amb),
                    "rule": self.state.proof(i).map_or("axiom", |d| d.rule),
                    "premises": self.state.proof(i).map_or(vec![], |d| d.premises.clone()),
                    "height": em.height,
                    "biheight": em.biheight.map(|(a, b)| vec![a, b]),
                    "tail": em.tail.map(|t| amb.arrow_name(t).to_string()),
                })
            })
            .collect();
        json!({
            "depth": self.state.depth,
            "objects": self.objects.len(),
            "arrows": self.arrows.len(),
            "coverings": self.pretopology.coverings().len(),
            "elements": elements,
        })
    }
}

#[derive(Debug, Clone, Default)]
pub struct Metrics {
    pub plain: BTreeSet<ArrowId>,
    pub open_heights: BTreeMap<ArrowId, usize>,
    pub object_heights: BTreeMap<ObjId, usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ElementMetrics {
    pub proof_length: usize,
    pub height: Option<usize>,
    pub biheight: Option<(usize, usize)>,
    pub tail: Option<ArrowId>,
    pub plain: bool,
    pub semiplain: bool,
}

/// For an ambient arrow `f` between Yoneda images, a covering of the
/// source in the original presite along which `f` is locally an image.
pub fn lem0_covering(p: &Pretopology, yoneda: &Diagram, amb: &FinCategory, x: ObjId, x2: ObjId, f: ArrowId) -> Option<(Sink, Vec<ArrowId>)> {
    let c = p.base();
    p.coverings_of(x).find_map(|s| {
        let lifts: Option<Vec<ArrowId>> = s
            .legs
            .iter()
            .map(|&v| c.hom(c.src(v), x2).iter().copied().find(|&fv| amb.comp(f, yoneda.arrows[v]) == yoneda.arrows[fv]))
            .collect();
        lifts.map(|l| (s.clone(), l))
    })
}

/// Brute-force recomputation of heights: plainness from the definition of
/// a pullback cone, heights from enumerating paths of plain factors.
pub mod oracle {
    use super::*;

    fn is_pullback_by_cones(amb: &FinCategory, f: ArrowId, v: ArrowId, u: ArrowId, k: ArrowId) -> bool {
        if amb.comp(f, u) != amb.comp(v, k) {
            return false;
        }
        let (x, vv, uu) = (amb.src(f), amb.src(v), amb.src(u));
        amb.objects().all(|w| {
            amb.hom(w, x).iter().all(|&a| {
                amb.hom(w, vv).iter().filter(|&&b| amb.comp(f, a) == amb.comp(v, b)).all(|&b| {
                    amb.hom(w, uu).iter().filter(|&&m| amb.comp(u, m) == a && amb.comp(k, m) == b).count() == 1
                })
            })
        })
    }

    pub fn plain(sp: &SubPresite) -> BTreeSet<ArrowId> {
        let amb = sp.ambient();
        let c = sp.site.base();
        let mut out = BTreeSet::new();
        for u in sp.state.opens() {
            'search: for f in sp.state.arrows().filter(|&f| amb.src(f) == amb.dst(u)) {
                for v in c.arrow_ids().filter(|&v| sp.site.is_open(v)) {
                    let tv = sp.yoneda.arrows[v];
                    if amb.dst(tv) != amb.dst(f) {
                        continue;
                    }
                    for &k in amb.hom(amb.src(u), amb.src(tv)) {
                        if is_pullback_by_cones(amb, f, tv, u, k) {
                            out.insert(u);
                            break 'search;
                        }
                    }
                }
            }
        }
        out
    }

    /// Least number of plain factors of `u` among paths of length at most
    /// `max`.
    pub fn height(sp: &SubPresite, plain: &BTreeSet<ArrowId>, u: ArrowId, max: usize) -> Option<usize> {
        let amb = sp.ambient();
        fn reach(amb: &FinCategory, plain: &BTreeSet<ArrowId>, acc: ArrowId, target: ArrowId, left: usize) -> bool {
            if acc == target {
                return true;
            }
            left > 0
                && plain
                    .iter()
                    .filter(|&&a| amb.src(a) == amb.dst(acc))
                    .any(|&a| reach(amb, plain, amb.comp(a, acc), target, left - 1))
        }
        (1..=max).find(|&n| {
            plain.iter().filter(|&&a| amb.src(a) == amb.src(u)).any(|&a| reach(amb, plain, a, u, n - 1))
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    #[test]
    fn empty_rule_set_leaves_state() {
        let p = fixtures::disc2_site();
        let frag = SheafFragment::enumerate(&p, 1);
        let st = ClosureState::from_axioms([Element::Object(0)]);
        let out = saturate(&[], &frag, &st, 3).unwrap();
        assert_eq!(out.element_set(), st.element_set());
        assert_eq!(out.depth, 0);
    }

    #[test]
    fn terminal_closure_is_image() {
        let sp = tsub_closure(&fixtures::terminal_site(), 2, 8).unwrap();
        assert_eq!(sp.state.depth, 0);
        assert_eq!(sp.objects.len(), 1);
        assert!(sp.yprime_fully_faithful());
    }

    #[test]
    fn frame_closure_is_fully_faithful() {
        let sp = tsub_closure(&fixtures::disc2_site(), 2, 8).unwrap();
        assert!(sp.yprime_fully_faithful());
        assert!(sp.yprime_injective_on_objects());
        assert_eq!(sp.objects.len(), 4);
        for v in sp.structure_report() {
            assert!(v.passed(), "{}", v.line(sp.ambient()));
        }
    }

    #[test]
    fn arrow_site_collapses() {
        let sp = tsub_closure(&fixtures::arrow_site(), 2, 8).unwrap();
        let amb = sp.ambient();
        let t = amb.terminal_object().unwrap();
        assert!(sp.yoneda.objects.iter().all(|&x| amb.isomorphic(x, t)));
        assert!(!sp.yprime_fully_faithful());
    }

    #[test]
    fn glue_rule_alone_derives_restricted_arrows() {
        let p = fixtures::arrow_site();
        let sp = tsub_closure(&p, 2, 8).unwrap();
        let amb = sp.ambient();
        let c = p.base();
        let y = &sp.yoneda;
        let mut axioms: Vec<Element> = c.objects().map(|x| Element::Object(y.objects[x])).collect();
        axioms.extend(c.arrow_ids().map(|f| Element::Arrow(y.arrows[f])));
        axioms.extend(p.coverings().iter().map(|s| Element::Covering(Sink { apex: y.objects[s.apex], legs: s.legs.iter().map(|&u| y.arrows[u]).collect() })));
        let st = ClosureState::from_axioms(axioms);
        let rules: Vec<Box<dyn InferenceRule>> = vec![Box::new(GlueRule)];
        let out = saturate(&rules, &sp.fragment, &st, 4).unwrap();
        // Every derived arrow has all its restrictions along some covering.
        for i in 0..out.len() {
            if let (Some(d), Element::Arrow(f)) = (out.proof(i), &out.elements()[i]) {
                assert_eq!(d.rule, "S");
                assert!(out.coverings().any(|s| s.apex == amb.src(*f) && s.legs.iter().all(|&u| out.has_arrow(amb.comp(*f, u)))));
            }
        }
    }

    #[test]
    fn saturation_is_idempotent_and_proofs_replay() {
        for p in [fixtures::disc2_site(), fixtures::arrow_site(), fixtures::chain3_site()] {
            let sp = tsub_closure(&p, 2, 8).unwrap();
            let rules = tsub_rules();
            let again = saturate(&rules, &sp.fragment, &sp.state, 8).unwrap();
            assert_eq!(again.element_set(), sp.state.element_set());
            assert_eq!(check_proofs(&rules, &sp.fragment, &sp.state).unwrap(), None);
            assert!(is_closed(&rules, &sp.fragment, &sp.state.element_set()).unwrap());
        }
    }

    #[test]
    fn deleted_elements_are_rederived() {
        let sp = tsub_closure(&fixtures::arrow_site(), 2, 8).unwrap();
        let rules = tsub_rules();
        let all = sp.state.element_set();
        for i in (0..sp.state.len()).filter(|&i| !sp.state.is_axiom(i)) {
            let e = &sp.state.elements()[i];
            let rest = ClosureState::from_axioms(all.iter().filter(|&x| x != e).cloned());
            let out = saturate(&rules, &sp.fragment, &rest, 8).unwrap();
            assert!(out.contains(e));
        }
    }

    #[test]
    fn closure_system_intersection() {
        let p = fixtures::disc2_site();
        let sp = tsub_closure(&p, 2, 8).unwrap();
        let rules = tsub_rules();
        // Closure of the whole fragment's objects and identities.
        let amb = sp.ambient();
        let mut everything: Vec<Element> = amb.objects().map(Element::Object).collect();
        everything.extend(sp.state.coverings().cloned().map(Element::Covering));
        let big = saturate(&rules, &sp.fragment, &ClosureState::from_axioms(everything), 8).unwrap();
        let meet: BTreeSet<Element> = big.element_set().intersection(&sp.state.element_set()).cloned().collect();
        assert!(is_closed(&rules, &sp.fragment, &meet).unwrap());
    }

    #[test]
    fn heights_on_images() {
        let sp = tsub_closure(&fixtures::disc2_site(), 2, 8).unwrap();
        let m = sp.metrics();
        for &x in &sp.yoneda.objects {
            let em = sp.proof_metrics(&Element::Object(x), &m).unwrap();
            assert_eq!(em.height, Some(0));
        }
        // Images of opens are plain, of height one.
        let c = sp.site.base();
        for v in c.arrow_ids().filter(|&v| sp.site.is_open(v)) {
            let em = sp.proof_metrics(&Element::Arrow(sp.yoneda.arrows[v]), &m).unwrap();
            assert!(em.plain);
            assert_eq!(em.height, Some(1));
        }
        assert_eq!(sp.proof_metrics(&Element::Object(usize::MAX), &m), Err(ClosureError::NotDerived));
    }

    #[test]
    fn heights_match_oracle() {
        for p in [fixtures::disc2_site(), fixtures::arrow_site(), fixtures::chain3_site()] {
            let sp = tsub_closure(&p, 2, 8).unwrap();
            let m = sp.metrics();
            let plain = oracle::plain(&sp);
            assert_eq!(plain, m.plain);
            for u in sp.state.opens() {
                assert_eq!(oracle::height(&sp, &plain, u, 6), m.open_heights.get(&u).copied());
            }
        }
    }

    #[test]
    fn reflects_coverings_on_frame() {
        let sp = tsub_closure(&fixtures::disc2_site(), 2, 8).unwrap();
        let v = sp.reflects_coverings_check();
        assert!(v.passed(), "{}", v.line(sp.ambient()));
        let amb = sp.ambient();
        let c = sp.site.base();
        let y = |n: &str| sp.yoneda.arrows[c.arrow(n).unwrap()];
        let t = sp.yoneda.objects[c.obj("T").unwrap()];
        let s = Sink { apex: t, legs: [y("l->T"), y("r->T")].into() };
        assert!(sp.fragment.is_epi_sink(&s) && sp.state.contains(&Element::Covering(s)));
        let bottom = sp.yoneda.objects[c.obj("B").unwrap()];
        let s = Sink { apex: t, legs: amb.hom(bottom, t).iter().copied().collect() };
        assert!(!sp.fragment.is_epi_sink(&s) && !sp.state.contains(&Element::Covering(s)));
    }

    #[test]
    fn lem0_coverings_exist() {
        for p in [fixtures::disc2_site(), fixtures::arrow_site()] {
            let sp = tsub_closure(&p, 2, 8).unwrap();
            let c = p.base();
            let amb = sp.ambient();
            for x in c.objects() {
                for x2 in c.objects() {
                    for &f in amb.hom(sp.yoneda.objects[x], sp.yoneda.objects[x2]) {
                        assert!(lem0_covering(&p, &sp.yoneda, amb, x, x2, f).is_some());
                    }
                }
            }
        }
    }
}
