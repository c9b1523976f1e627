//! Pretopologies on finite categories: axiom checks, clopen arrows,
//! induced pretopologies, subcanonicity, locality and the M/L/SG operators.

use std::collections::BTreeSet;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fincat::{ArrowId, Diagram, EffectiveEpi, FinCategory, FincatError, ObjId, RawCategory, Sink};
use crate::WorkspaceError;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SiteError {
    #[error("not a pretopology: {0}")]
    NotAPretopology(String),
    #[error("not a frame: {0}")]
    NotAFrame(String),
    #[error(transparent)]
    Fincat(#[from] FincatError),
}

/// Anything that can answer covering membership over a finite category.
pub trait Coverage {
    fn base(&self) -> &FinCategory;
    fn covers(&self, s: &Sink) -> bool;
    fn is_open(&self, f: ArrowId) -> bool;
}

/// A set of covering sinks over a finite category. Opens (legs of
/// coverings) are cached on construction.
#[derive(Debug, Clone)]
pub struct Pretopology {
    base: Arc<FinCategory>,
    coverings: BTreeSet<Sink>,
    opens: BTreeSet<ArrowId>,
}

impl PartialEq for Pretopology {
    fn eq(&self, other: &Self) -> bool {
        self.coverings == other.coverings && *self.base == *other.base
    }
}

impl Eq for Pretopology {}

impl Coverage for Pretopology {
    fn base(&self) -> &FinCategory {
        &self.base
    }

    fn covers(&self, s: &Sink) -> bool {
        self.coverings.contains(s)
    }

    fn is_open(&self, f: ArrowId) -> bool {
        self.opens.contains(&f)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Operator {
    M,
    L,
    SG,
}

impl fmt::Display for Operator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Operator::M => "M",
            Operator::L => "L",
            Operator::SG => "SG",
        })
    }
}

/// One failed pretopology axiom with its counterexample.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PtViolation {
    NotPullbackable { covering: Sink, leg: ArrowId },
    /// PT1: an iso whose singleton is not a covering.
    Iso { iso: ArrowId },
    /// PT2: pulling `covering` back along `along` leaves the coverings.
    Pullback { covering: Sink, along: ArrowId, pulled: Option<Sink> },
    /// PT3: composing `covering` with `locals` leaves the coverings.
    Composite { covering: Sink, locals: Vec<Sink>, composite: Sink },
    /// PT3 on legs: a composite leg that is not open.
    CompositeLeg { covering: Sink, local: Sink, leg: ArrowId },
    /// PT4: an open sink with a covering refinement that is not a covering.
    Refinement { sink: Sink, refinement: Sink },
}

impl PtViolation {
    pub fn axiom(&self) -> &'static str {
        match self {
            PtViolation::NotPullbackable { .. } => "legs",
            PtViolation::Iso { .. } => "PT1",
            PtViolation::Pullback { .. } => "PT2",
            PtViolation::Composite { .. } | PtViolation::CompositeLeg { .. } => "PT3",
            PtViolation::Refinement { .. } => "PT4",
        }
    }

    pub fn describe(&self, c: &FinCategory) -> String {
        match self {
            PtViolation::NotPullbackable { covering, leg } => {
                format!("leg {} of {} is not pullbackable", c.arrow_name(*leg), covering.display(c))
            }
            PtViolation::Iso { iso } => format!("iso {} is not a singleton covering", c.arrow_name(*iso)),
            PtViolation::Pullback { covering, along, pulled } => format!(
                "pullback of {} along {} is {}",
                covering.display(c),
                c.arrow_name(*along),
                pulled.as_ref().map_or("missing".to_string(), |s| format!("{} (not a covering)", s.display(c)))
            ),
            PtViolation::Composite { covering, composite, .. } => {
                format!("composite {} of {} with local coverings is not a covering", composite.display(c), covering.display(c))
            }
            PtViolation::CompositeLeg { covering, local, leg } => format!(
                "composite leg {} of {} with {} is not open",
                c.arrow_name(*leg),
                covering.display(c),
                local.display(c)
            ),
            PtViolation::Refinement { sink, refinement } => {
                format!("{} is refined by covering {} but is not a covering", sink.display(c), refinement.display(c))
            }
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PretopologyReport {
    pub violations: Vec<PtViolation>,
}

impl PretopologyReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn violates(&self, axiom: &str) -> bool {
        self.violations.iter().any(|v| v.axiom() == axiom)
    }
}

/// A refinement of `refined` by `refining`: every leg of `refining` factors
/// through some leg of `refined`. Entries are (refining leg, refined leg,
/// factoring arrow).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Refinement {
    pub refined: Sink,
    pub refining: Sink,
    pub witness: Vec<(ArrowId, ArrowId, ArrowId)>,
}

impl Refinement {
    pub fn find(c: &FinCategory, refined: &Sink, refining: &Sink) -> Option<Self> {
        if refined.apex != refining.apex {
            return None;
        }
        let mut witness = Vec::with_capacity(refining.legs.len());
        for &t in &refining.legs {
            let hit = refined.legs.iter().find_map(|&s| {
                c.hom(c.src(t), c.src(s)).iter().find(|&&h| c.comp(s, h) == t).map(|&h| (t, s, h))
            })?;
            witness.push(hit);
        }
        Some(Refinement { refined: refined.clone(), refining: refining.clone(), witness })
    }

    pub fn verify(&self, c: &FinCategory) -> bool {
        self.witness.len() == self.refining.legs.len()
            && self.witness.iter().all(|&(t, s, h)| {
                self.refining.legs.contains(&t) && self.refined.legs.contains(&s) && c.compose(s, h) == Some(t)
            })
    }
}

pub fn refines(c: &FinCategory, refined: &Sink, refining: &Sink) -> bool {
    refined.apex == refining.apex && refining.legs.iter().all(|&t| refined.legs.iter().any(|&s| c.factors_through(t, s)))
}

/// Opens of a clopos, with the (G1) check.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CloposStructure {
    pub base: Arc<FinCategory>,
    pub opens: BTreeSet<ArrowId>,
}

/// A failed clause of (G1).
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum G1Violation {
    MissingIso(ArrowId),
    NotPullbackable(ArrowId),
    NotComposed { g: ArrowId, f: ArrowId },
    NotPulledBack { open: ArrowId, along: ArrowId, pulled: ArrowId },
}

impl G1Violation {
    pub fn describe(&self, c: &FinCategory) -> String {
        match *self {
            G1Violation::MissingIso(f) => format!("iso {} is not open", c.arrow_name(f)),
            G1Violation::NotPullbackable(f) => format!("open {} is not pullbackable", c.arrow_name(f)),
            G1Violation::NotComposed { g, f } => {
                format!("{} ∘ {} is not open", c.arrow_name(g), c.arrow_name(f))
            }
            G1Violation::NotPulledBack { open, along, pulled } => format!(
                "pullback {} of open {} along {} is not open",
                c.arrow_name(pulled),
                c.arrow_name(open),
                c.arrow_name(along)
            ),
        }
    }
}

impl CloposStructure {
    pub fn new(base: Arc<FinCategory>, opens: impl IntoIterator<Item = ArrowId>) -> Self {
        CloposStructure { base, opens: opens.into_iter().collect() }
    }

    pub fn isos_only(base: Arc<FinCategory>) -> Self {
        let opens: Vec<ArrowId> = base.arrow_ids().filter(|&f| base.is_iso(f)).collect();
        Self::new(base, opens)
    }

    pub fn all_arrows(base: Arc<FinCategory>) -> Self {
        let opens: Vec<ArrowId> = base.arrow_ids().collect();
        Self::new(base, opens)
    }

    pub fn is_open(&self, f: ArrowId) -> bool {
        self.opens.contains(&f)
    }

    /// All violated (G1) clauses.
    pub fn g1_violations(&self) -> Vec<G1Violation> {
        let c = &*self.base;
        let mut out = Vec::new();
        for f in c.arrow_ids() {
            if c.is_iso(f) && !self.is_open(f) {
                out.push(G1Violation::MissingIso(f));
            }
        }
        for &f in &self.opens {
            if !c.is_pullbackable(f) {
                out.push(G1Violation::NotPullbackable(f));
                continue;
            }
            for g in c.arrows_into(c.dst(f)) {
                if let Some(sp) = c.pullback(f, g) {
                    if !self.is_open(sp.p2) {
                        out.push(G1Violation::NotPulledBack { open: f, along: g, pulled: sp.p2 });
                    }
                }
            }
            for &g in &self.opens {
                if c.src(g) == c.dst(f) && !self.is_open(c.comp(g, f)) {
                    out.push(G1Violation::NotComposed { g, f });
                }
            }
        }
        out
    }
}

// All sinks on `apex` with legs drawn from `allowed` (arrows into `apex`).
pub(crate) fn sinks_from(apex: ObjId, allowed: &[ArrowId]) -> Vec<Sink> {
    assert!(allowed.len() < 24, "too many candidate legs ({}) for sink enumeration", allowed.len());
    (0u32..1 << allowed.len())
        .map(|mask| Sink {
            apex,
            legs: allowed.iter().enumerate().filter(|(i, _)| mask >> i & 1 == 1).map(|(_, &a)| a).collect(),
        })
        .collect()
}

impl Pretopology {
    pub fn new(base: Arc<FinCategory>, coverings: impl IntoIterator<Item = Sink>) -> Self {
        let coverings: BTreeSet<Sink> = coverings.into_iter().collect();
        let opens = coverings.iter().flat_map(|s| s.legs.iter().copied()).collect();
        Pretopology { base, coverings, opens }
    }

    pub fn base_arc(&self) -> &Arc<FinCategory> {
        &self.base
    }

    pub fn coverings(&self) -> &BTreeSet<Sink> {
        &self.coverings
    }

    pub fn coverings_of(&self, x: ObjId) -> impl Iterator<Item = &Sink> {
        self.coverings.range(Sink::empty(x)..).take_while(move |s| s.apex == x)
    }

    /// O_τ: the legs of all coverings.
    pub fn opens(&self) -> &BTreeSet<ArrowId> {
        &self.opens
    }

    /// Iso singletons, completed.
    pub fn minimal(base: Arc<FinCategory>) -> Self {
        let isos: Vec<Sink> = base.arrow_ids().filter(|&f| base.is_iso(f)).map(|f| Sink::singleton(&base, f)).collect();
        Pretopology::new(base, isos).completed()
    }

    /// On a thin category with all joins: a sink covers its apex iff the
    /// join of the leg domains is the apex. The empty sink covers the bottom.
    pub fn join_coverings(base: Arc<FinCategory>) -> Result<Self, SiteError> {
        if !base.is_thin() {
            return Err(SiteError::NotAFrame("category is not thin".into()));
        }
        let mut coverings = Vec::new();
        for x in base.objects() {
            let into: Vec<ArrowId> = base.arrows_into(x).collect();
            for s in sinks_from(x, &into) {
                let doms: Vec<ObjId> = s.legs.iter().map(|&u| base.src(u)).collect();
                let join = join_of(&base, &doms)
                    .ok_or_else(|| SiteError::NotAFrame(format!("no join below {}", base.object_name(x))))?;
                if join == x {
                    coverings.push(s);
                }
            }
        }
        Ok(Pretopology::new(base, coverings))
    }

    /// Closure of `generators` together with iso singletons under PT2, PT3
    /// and PT4.
    pub fn generated(base: Arc<FinCategory>, generators: impl IntoIterator<Item = Sink>) -> Self {
        let c = base.clone();
        let mut cov: BTreeSet<Sink> = generators.into_iter().collect();
        cov.extend(c.arrow_ids().filter(|&f| c.is_iso(f)).map(|f| Sink::singleton(&c, f)));
        loop {
            let before = cov.len();
            let snapshot: Vec<Sink> = cov.iter().cloned().collect();
            for s in &snapshot {
                for g in c.arrows_into(s.apex) {
                    if let Ok(p) = c.pullback_sink(s, g) {
                        cov.insert(p);
                    }
                }
            }
            let p = Pretopology::new(base.clone(), cov.iter().cloned());
            for s in &snapshot {
                for comp in p.composites(s, false) {
                    cov.insert(comp.1);
                }
            }
            cov = Pretopology::new(base.clone(), cov).completed().coverings;
            if cov.len() == before {
                break;
            }
        }
        Pretopology::new(base, cov)
    }

    /// PT4 completion: every open sink with a refinement in τ.
    pub fn completed(&self) -> Self {
        let c = &*self.base;
        let mut out = BTreeSet::new();
        for x in c.objects() {
            let covs: Vec<&Sink> = self.coverings_of(x).collect();
            if covs.is_empty() {
                continue;
            }
            let cand: Vec<ArrowId> = c.arrows_into(x).filter(|f| self.opens.contains(f)).collect();
            for s in sinks_from(x, &cand) {
                if covs.iter().any(|t| refines(c, &s, t)) {
                    out.insert(s);
                }
            }
        }
        Pretopology::new(self.base.clone(), out)
    }

    // Composites of `s` with local coverings, one per choice of covering of
    // each leg domain. With `minimal_only`, choices range over
    // inclusion-minimal coverings.
    fn composites(&self, s: &Sink, minimal_only: bool) -> Vec<(Vec<Sink>, Sink)> {
        let c = &*self.base;
        let legs: Vec<ArrowId> = s.legs.iter().copied().collect();
        let choices: Vec<Vec<&Sink>> = legs
            .iter()
            .map(|&u| {
                let all: Vec<&Sink> = self.coverings_of(c.src(u)).collect();
                if minimal_only {
                    all.iter()
                        .copied()
                        .filter(|v| !all.iter().any(|w| w.legs.len() < v.legs.len() && w.legs.is_subset(&v.legs)))
                        .collect()
                } else {
                    all
                }
            })
            .collect();
        if choices.iter().any(|ch| ch.is_empty()) {
            return Vec::new();
        }
        let mut out = Vec::new();
        let mut idx = vec![0usize; legs.len()];
        loop {
            let locals: Vec<Sink> = idx.iter().zip(&choices).map(|(&i, ch)| ch[i].clone()).collect();
            let mut comp = BTreeSet::new();
            for (&u, v) in legs.iter().zip(&locals) {
                comp.extend(v.legs.iter().map(|&w| c.comp(u, w)));
            }
            out.push((locals, Sink { apex: s.apex, legs: comp }));
            let mut k = 0;
            loop {
                if k == legs.len() {
                    return out;
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

    /// Checks PT1–PT4 and pullbackability of legs. PT3 is checked on
    /// inclusion-minimal local coverings plus openness of every composite
    /// leg, which together with PT4 is equivalent to the full condition.
    pub fn validate(&self) -> PretopologyReport {
        let c = &*self.base;
        let mut v = Vec::new();
        for s in &self.coverings {
            for &u in &s.legs {
                if !c.is_pullbackable(u) {
                    v.push(PtViolation::NotPullbackable { covering: s.clone(), leg: u });
                }
            }
        }
        for f in c.arrow_ids() {
            if c.is_iso(f) && !self.covers(&Sink::singleton(c, f)) {
                v.push(PtViolation::Iso { iso: f });
            }
        }
        for s in &self.coverings {
            for g in c.arrows_into(s.apex) {
                match c.pullback_sink(s, g) {
                    Ok(p) if self.covers(&p) => {}
                    Ok(p) => v.push(PtViolation::Pullback { covering: s.clone(), along: g, pulled: Some(p) }),
                    Err(_) => v.push(PtViolation::Pullback { covering: s.clone(), along: g, pulled: None }),
                }
            }
        }
        for s in &self.coverings {
            for (locals, comp) in self.composites(s, true) {
                if !self.covers(&comp) {
                    v.push(PtViolation::Composite { covering: s.clone(), locals, composite: comp });
                }
            }
            for &u in &s.legs {
                for local in self.coverings_of(c.src(u)) {
                    for &w in &local.legs {
                        let leg = c.comp(u, w);
                        if !self.is_open(leg) {
                            v.push(PtViolation::CompositeLeg { covering: s.clone(), local: local.clone(), leg });
                        }
                    }
                }
            }
        }
        for x in c.objects() {
            let covs: Vec<&Sink> = self.coverings_of(x).collect();
            let cand: Vec<ArrowId> = c.arrows_into(x).filter(|f| self.opens.contains(f)).collect();
            for s in sinks_from(x, &cand) {
                if self.covers(&s) {
                    continue;
                }
                if let Some(t) = covs.iter().find(|t| refines(c, &s, t)) {
                    v.push(PtViolation::Refinement { sink: s, refinement: (*t).clone() });
                }
            }
        }
        PretopologyReport { violations: v }
    }

    pub fn ensure_valid(&self) -> Result<(), SiteError> {
        let r = self.validate();
        match r.violations.first() {
            None => Ok(()),
            Some(first) => Err(SiteError::NotAPretopology(first.describe(&self.base))),
        }
    }

    /// O_τ as a clopos structure; errors if τ is invalid.
    pub fn clopen_arrows(&self) -> Result<CloposStructure, SiteError> {
        self.ensure_valid()?;
        Ok(CloposStructure { base: self.base.clone(), opens: self.opens.clone() })
    }

    /// `None` when subcanonical, otherwise the first failing covering.
    /// Coverings that stay coverings after dropping a leg contain a smaller
    /// covering, so they are effective when it is and are skipped.
    pub fn subcanonical_witness(&self) -> Option<(Sink, EffectiveEpi)> {
        let shrinks = |s: &Sink| {
            s.legs.iter().any(|u| {
                let mut t = s.clone();
                t.legs.remove(u);
                self.coverings.contains(&t)
            })
        };
        self.coverings.iter().filter(|s| !shrinks(s)).find_map(|s| {
            let v = self.base.is_effective_epi_family(s, true);
            (!v.is_effective()).then(|| (s.clone(), v))
        })
    }

    pub fn is_subcanonical(&self) -> bool {
        self.subcanonical_witness().is_none()
    }

    /// Some covering `{u_i}` of the source of `f` has every `f ∘ u_i`
    /// satisfying `pred`.
    pub fn is_locally(&self, f: ArrowId, pred: impl Fn(ArrowId) -> bool) -> bool {
        let c = &*self.base;
        self.coverings_of(c.src(f)).any(|s| s.legs.iter().all(|&u| pred(c.comp(f, u))))
    }

    pub fn apply(&self, op: Operator) -> Result<Pretopology, SiteError> {
        let out = match op {
            Operator::M => self.op_m(),
            Operator::L => self.op_l(),
            Operator::SG => self.op_sg(),
        };
        out.ensure_valid()?;
        Ok(out)
    }

    /// Applies operators left to right, e.g. `[L, M]` is `M(L τ)`.
    pub fn apply_all(&self, ops: &[Operator]) -> Result<Pretopology, SiteError> {
        let mut p = self.clone();
        for &op in ops {
            p = p.apply(op)?;
        }
        Ok(p)
    }

    fn op_m(&self) -> Pretopology {
        let c = &*self.base;
        let monos = self.coverings.iter().filter(|s| s.legs.iter().all(|&u| c.is_mono(u))).cloned();
        Pretopology::new(self.base.clone(), monos).completed()
    }

    fn op_l(&self) -> Pretopology {
        let c = &*self.base;
        let mut out = Vec::new();
        for x in c.objects() {
            let covs: Vec<&Sink> = self.coverings_of(x).collect();
            if covs.is_empty() {
                continue;
            }
            let cand: Vec<ArrowId> = c
                .arrows_into(x)
                .filter(|&f| c.is_pullbackable(f) && self.is_locally(f, |g| self.is_open(g)))
                .collect();
            for s in sinks_from(x, &cand) {
                if covs.iter().any(|t| refines(c, &s, t)) {
                    out.push(s);
                }
            }
        }
        Pretopology::new(self.base.clone(), out).completed()
    }

    fn op_sg(&self) -> Pretopology {
        let lm = self.op_m().op_l();
        let both = lm.coverings.intersection(&self.coverings).cloned();
        Pretopology::new(self.base.clone(), both).completed()
    }

    pub fn intersection(&self, other: &Pretopology) -> Pretopology {
        Pretopology::new(self.base.clone(), self.coverings.intersection(&other.coverings).cloned())
    }

    /// Whether every covering of `self` is a covering of `other`.
    pub fn is_coarser_than(&self, other: &Pretopology) -> bool {
        self.coverings.is_subset(&other.coverings)
    }

    pub fn from_json(s: &str) -> Result<Self, WorkspaceError> {
        let raw: RawPresite = serde_json::from_str(s).map_err(|e| WorkspaceError::Syntax(e.to_string()))?;
        Pretopology::from_raw(&raw)
    }

    pub fn from_raw(raw: &RawPresite) -> Result<Self, WorkspaceError> {
        let c = Arc::new(raw.category.build().map_err(|e| WorkspaceError::Validation(e.to_string()))?);
        let sinks = raw_sinks(&c, &raw.coverings)?;
        let p = if raw.generate { Pretopology::generated(c, sinks) } else { Pretopology::new(c, sinks) };
        p.ensure_valid().map_err(|e| WorkspaceError::Validation(e.to_string()))?;
        Ok(p)
    }

    pub fn to_raw(&self) -> RawPresite {
        let c = &*self.base;
        RawPresite {
            category: c.to_raw(),
            coverings: self
                .coverings
                .iter()
                .map(|s| RawSink {
                    apex: c.object_name(s.apex).to_string(),
                    legs: s.legs.iter().map(|&u| c.arrow_name(u).to_string()).collect(),
                })
                .collect(),
            generate: false,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_raw()).expect("presite serializes")
    }
}

pub(crate) fn raw_sinks(c: &FinCategory, raw: &[RawSink]) -> Result<Vec<Sink>, WorkspaceError> {
    raw.iter()
        .map(|rs| {
            let apex = c.obj(&rs.apex).ok_or_else(|| WorkspaceError::UnresolvedName(rs.apex.clone()))?;
            let legs = rs
                .legs
                .iter()
                .map(|l| c.arrow(l).ok_or_else(|| WorkspaceError::UnresolvedName(l.clone())))
                .collect::<Result<Vec<_>, _>>()?;
            Sink::new(c, apex, legs).map_err(|e| WorkspaceError::Validation(e.to_string()))
        })
        .collect()
}

fn join_of(c: &FinCategory, xs: &[ObjId]) -> Option<ObjId> {
    let upper: Vec<ObjId> = c.objects().filter(|&y| xs.iter().all(|&x| !c.hom(x, y).is_empty())).collect();
    upper.iter().copied().find(|&j| upper.iter().all(|&y| !c.hom(j, y).is_empty()))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawSink {
    pub apex: String,
    pub legs: Vec<String>,
}

/// Presite file: a category plus covering sinks. With `generate`, the
/// listed sinks are closed under the pretopology axioms on load.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawPresite {
    pub category: RawCategory,
    pub coverings: Vec<RawSink>,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub generate: bool,
}

/// Pretopology on the source of `f` whose coverings are the sinks sent to
/// coverings of `target`.
pub fn induce_pretopology(f: &Diagram, target: &Pretopology) -> Result<Pretopology, SiteError> {
    let c = Arc::new(f.shape.clone());
    let mut cov = Vec::new();
    for x in c.objects() {
        let into: Vec<ArrowId> = c.arrows_into(x).collect();
        for s in sinks_from(x, &into) {
            let image = Sink { apex: f.objects[x], legs: s.legs.iter().map(|&u| f.arrows[u]).collect() };
            if target.covers(&image) {
                cov.push(s);
            }
        }
    }
    let p = Pretopology::new(c, cov);
    p.ensure_valid()?;
    Ok(p)
}

/// The nine operator identities, as (name, left side, right side); each
/// side lists operators in application order.
pub const OPERATOR_LAWS: [(&str, &[Operator], &[Operator]); 9] = {
    use Operator::*;
    [
        ("M M = M", &[M, M], &[M]),
        ("SG SG = SG", &[SG, SG], &[SG]),
        ("L L = L", &[L, L], &[L]),
        ("(ML)^2 = ML", &[L, M, L, M], &[L, M]),
        ("(LM)^2 = LM", &[M, L, M, L], &[M, L]),
        ("SG L = LML", &[L, SG], &[L, M, L]),
        ("L SG = LM", &[SG, L], &[M, L]),
        ("SG M = M", &[M, SG], &[M]),
        ("M SG = M", &[SG, M], &[M]),
    ]
};

/// Evaluates every operator law; returns (name, holds).
pub fn check_operator_laws(p: &Pretopology) -> Result<Vec<(&'static str, bool)>, SiteError> {
    OPERATOR_LAWS
        .iter()
        .map(|&(name, lhs, rhs)| Ok((name, p.apply_all(lhs)? == p.apply_all(rhs)?)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    fn all_sinks(c: &FinCategory, x: ObjId) -> Vec<Sink> {
        let into: Vec<ArrowId> = c.arrows_into(x).collect();
        sinks_from(x, &into)
    }

    #[test]
    fn join_coverings_validate() {
        for p in [fixtures::disc2_site(), fixtures::chain3_site(), fixtures::point_site()] {
            let r = p.validate();
            assert!(r.is_valid(), "{:?}", r.violations.iter().map(|v| v.describe(p.base())).collect::<Vec<_>>());
        }
    }

    #[test]
    fn join_coverings_by_brute_force() {
        // Independent check on disc2: a sink covers iff the union of the
        // leg-domain point sets is the apex point set.
        let p = fixtures::disc2_site();
        let c = p.base();
        let mask = |x: ObjId| [0u8, 1, 2, 3][x];
        for x in c.objects() {
            for s in all_sinks(c, x) {
                let union = s.legs.iter().fold(0, |m, &u| m | mask(c.src(u)));
                assert_eq!(p.covers(&s), union == mask(x), "{}", s.display(c));
            }
        }
    }

    #[test]
    fn removing_a_refinement_breaks_pt4() {
        let p = fixtures::disc2_site();
        let c = p.base_arc().clone();
        let a = |n| c.arrow(n).unwrap();
        let drop = Sink::new(&c, c.obj("T").unwrap(), [a("l->T"), a("r->T"), a("B->T")]).unwrap();
        let q = Pretopology::new(c, p.coverings().iter().filter(|s| **s != drop).cloned());
        let r = q.validate();
        assert!(r.violates("PT4"));
        assert!(r.violations.iter().any(|v| matches!(v, PtViolation::Refinement { sink, .. } if *sink == drop)));
    }

    #[test]
    fn arrow_site_validates() {
        let p = fixtures::arrow_site();
        assert!(p.validate().is_valid());
        let c = p.base();
        let b = c.obj("b").unwrap();
        assert!(p.covers(&Sink::singleton(c, c.arrow("a->b").unwrap())));
        assert_eq!(p.coverings_of(b).count(), 3);
    }

    #[test]
    fn opens_examples() {
        let t = fixtures::terminal_site();
        assert_eq!(t.clopen_arrows().unwrap().opens, BTreeSet::from([0]));
        let d = fixtures::disc2_site();
        assert_eq!(d.opens().len(), d.base().n_arrows());
        assert!(d.clopen_arrows().unwrap().g1_violations().is_empty());
        let a = fixtures::arrow_site();
        assert_eq!(a.opens().len(), 3);
    }

    #[test]
    fn g1_detects_missing_pullback() {
        let c = Arc::new(fixtures::disc2());
        let a = |n| c.arrow(n).unwrap();
        let opens: Vec<ArrowId> = c.arrow_ids().filter(|&f| f != a("B->r")).collect();
        let v = CloposStructure::new(c.clone(), opens).g1_violations();
        assert!(v.iter().any(|x| matches!(x, G1Violation::NotPulledBack { pulled, .. } if *pulled == a("B->r"))));
    }

    #[test]
    fn induced_along_identity_is_same() {
        let p = fixtures::disc2_site();
        let c = p.base();
        let id = Diagram::new(c.clone(), c.objects().collect(), c.arrow_ids().collect(), c).unwrap();
        assert_eq!(induce_pretopology(&id, &p).unwrap(), p);
    }

    #[test]
    fn induced_along_chain_inclusion() {
        let p = fixtures::disc2_site();
        let d = p.base();
        let sub = fixtures::point_frame();
        let (b, t) = (d.obj("B").unwrap(), d.obj("T").unwrap());
        let arrows: Vec<ArrowId> = sub
            .arrow_ids()
            .map(|f| {
                let img = |x| if x == 0 { b } else { t };
                d.hom(img(sub.src(f)), img(sub.dst(f)))[0]
            })
            .collect();
        let inc = Diagram::new(sub.clone(), vec![b, t], arrows, d).unwrap();
        let q = induce_pretopology(&inc, &p).unwrap();
        let top = sub.obj("1").unwrap();
        for s in all_sinks(&sub, top) {
            let joined = s.legs.iter().any(|&u| sub.src(u) == top);
            assert_eq!(q.covers(&s), joined);
        }
    }

    #[test]
    fn induced_along_source_functor_of_open_slice() {
        let p = fixtures::disc2_site();
        let d = p.base();
        let t = d.obj("T").unwrap();
        let opens: Vec<ArrowId> = d.arrows_into(t).filter(|f| p.is_open(*f)).collect();
        let (slice, src) = d.slice(&opens);
        let src = Diagram::new(slice, src.0, src.1, d).unwrap();
        let q = induce_pretopology(&src, &p).unwrap();
        assert!(q.validate().is_valid());
    }

    #[test]
    fn subcanonical_examples() {
        assert!(fixtures::disc2_site().is_subcanonical());
        assert!(fixtures::terminal_site().is_subcanonical());
        let a = fixtures::arrow_site();
        let (s, v) = a.subcanonical_witness().unwrap();
        assert_eq!(s, Sink::singleton(a.base(), a.base().arrow("a->b").unwrap()));
        assert!(matches!(v, EffectiveEpi::NotEffective { along: None }));
    }

    #[test]
    fn locality_examples() {
        let p = fixtures::disc2_site();
        let c = p.base();
        let f = c.arrow("l->T").unwrap();
        assert!(p.is_locally(f, |g| p.is_open(g)));
        let bt = c.arrow("B->T").unwrap();
        assert!(p.is_locally(bt, |g| p.is_open(g) && c.is_mono(g)));
        assert!(!p.is_locally(f, |_| false));
    }

    #[test]
    fn m_on_poset_site_is_identity() {
        for (_, p) in fixtures::operator_fixtures() {
            assert_eq!(p.apply(Operator::M).unwrap(), p);
        }
    }

    #[test]
    fn l_on_arrow_site_matches_enumeration() {
        // Oracle: sinks of pullbackable locally-open arrows with a
        // refinement in τ, enumerated directly over all sinks.
        let p = fixtures::arrow_site();
        let c = p.base();
        let l = p.apply(Operator::L).unwrap();
        for x in c.objects() {
            for s in all_sinks(c, x) {
                let legs_ok = s.legs.iter().all(|&f| {
                    c.is_pullbackable(f)
                        && p.coverings_of(c.src(f)).any(|v| v.legs.iter().all(|&u| p.is_open(c.comp(f, u))))
                });
                let refined = p.coverings_of(x).any(|t| {
                    t.legs.iter().all(|&w| s.legs.iter().any(|&u| c.hom(c.src(w), c.src(u)).iter().any(|&h| c.comp(u, h) == w)))
                });
                assert_eq!(l.covers(&s), legs_ok && refined, "{}", s.display(c));
            }
        }
    }

    #[test]
    fn inclusion_chain_and_laws() {
        for (name, p) in fixtures::operator_fixtures() {
            let m = p.apply(Operator::M).unwrap();
            let sg = p.apply(Operator::SG).unwrap();
            let l = p.apply(Operator::L).unwrap();
            assert!(m.is_coarser_than(&sg) && sg.is_coarser_than(&p) && p.is_coarser_than(&l), "{name}");
            for (law, ok) in check_operator_laws(&p).unwrap() {
                assert!(ok, "{name}: {law}");
            }
        }
    }

    #[test]
    fn completion_preserves_opens() {
        for (_, p) in fixtures::operator_fixtures() {
            let raw = Pretopology::new(p.base_arc().clone(), p.coverings().iter().filter(|s| s.legs.len() <= 1).cloned());
            let done = raw.completed();
            assert_eq!(done.opens(), raw.opens());
        }
    }

    #[test]
    fn intersection_completed_validates() {
        let c = Arc::new(fixtures::disc2());
        let joins = Pretopology::join_coverings(c.clone()).unwrap();
        let minimal = Pretopology::minimal(c.clone());
        let both = joins.intersection(&minimal).completed();
        assert!(both.validate().is_valid());
    }

    #[test]
    fn refinement_witness_verifies() {
        let p = fixtures::disc2_site();
        let c = p.base();
        let a = |n| c.arrow(n).unwrap();
        let t = c.obj("T").unwrap();
        let coarse = Sink::new(c, t, [a("id_T")]).unwrap();
        let fine = Sink::new(c, t, [a("l->T"), a("r->T")]).unwrap();
        let r = Refinement::find(c, &coarse, &fine).unwrap();
        assert!(r.verify(c));
        assert!(Refinement::find(c, &fine, &coarse).is_none());
    }

    #[test]
    fn presite_json_round_trip() {
        let p = fixtures::arrow_site();
        let s = p.to_json();
        let back = Pretopology::from_json(&s).unwrap();
        assert_eq!(back, p);
        assert_eq!(back.to_json(), s);
    }
}
