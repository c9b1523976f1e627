//! Finite categories given by explicit composition tables, with brute-force
//! limits and colimits, arrow classification and effective-epi testing.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::sync::Mutex;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub type ObjId = usize;
pub type ArrowId = usize;

/// Default bound on the number of arrows in a diagram shape.
pub const DEFAULT_SHAPE_BOUND: usize = 64;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawArrow {
    pub id: String,
    pub src: String,
    pub dst: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawCompose {
    pub g: String,
    pub f: String,
    pub gf: String,
}

/// Unvalidated category description, as read from JSON.
///
/// Composites involving an identity may be omitted; every other composable
/// pair must be listed.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawCategory {
    pub objects: Vec<String>,
    pub arrows: Vec<RawArrow>,
    #[serde(default)]
    pub compose: Vec<RawCompose>,
    pub identities: BTreeMap<String, String>,
}

impl RawCategory {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn object(&mut self, name: impl Into<String>) -> &mut Self {
        self.objects.push(name.into());
        self
    }

    pub fn arrow(
        &mut self,
        id: impl Into<String>,
        src: impl Into<String>,
        dst: impl Into<String>,
    ) -> &mut Self {
        self.arrows.push(RawArrow { id: id.into(), src: src.into(), dst: dst.into() });
        self
    }

    /// Declares `obj` together with an identity arrow named `id`.
    pub fn object_with_identity(&mut self, obj: impl Into<String>, id: impl Into<String>) -> &mut Self {
        let obj = obj.into();
        let id = id.into();
        self.objects.push(obj.clone());
        self.arrows.push(RawArrow { id: id.clone(), src: obj.clone(), dst: obj.clone() });
        self.identities.insert(obj, id);
        self
    }

    pub fn compose(
        &mut self,
        g: impl Into<String>,
        f: impl Into<String>,
        gf: impl Into<String>,
    ) -> &mut Self {
        self.compose.push(RawCompose { g: g.into(), f: f.into(), gf: gf.into() });
        self
    }

    pub fn build(&self) -> Result<FinCategory, InvalidCategory> {
        validate_category(self)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CategoryError {
    #[error("duplicate object `{0}`")]
    DuplicateObject(String),
    #[error("duplicate arrow `{0}`")]
    DuplicateArrow(String),
    #[error("arrow `{arrow}` has undeclared endpoint `{object}`")]
    DanglingArrow { arrow: String, object: String },
    #[error("unknown arrow `{0}`")]
    UnknownArrow(String),
    #[error("unknown object `{0}`")]
    UnknownObject(String),
    #[error("`{g}` ∘ `{f}` is not composable")]
    NotComposable { g: String, f: String },
    #[error("composite `{g}` ∘ `{f}` listed twice with different values")]
    ConflictingComposite { g: String, f: String },
    #[error("composite `{g}` ∘ `{f}` = `{gf}` has the wrong endpoints")]
    BadComposite { g: String, f: String, gf: String },
    #[error("missing composite `{g}` ∘ `{f}`")]
    MissingComposite { g: String, f: String },
    #[error("composition is not associative on (`{h}`, `{g}`, `{f}`)")]
    NonAssociative { h: String, g: String, f: String },
    #[error("bad identity at object `{0}`")]
    BadIdentity(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("invalid category: {}", .0.iter().map(|e| e.to_string()).collect::<Vec<_>>().join("; "))]
pub struct InvalidCategory(pub Vec<CategoryError>);

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FincatError {
    #[error("diagram shape has {size} arrows, bound is {bound}")]
    ShapeTooLarge { size: usize, bound: usize },
    #[error("unknown arrow id {0}")]
    UnknownArrow(ArrowId),
    #[error("diagram is not a functor: {0}")]
    NotAFunctor(String),
    #[error("leg `{0}` does not target the apex")]
    BadSink(String),
    #[error("missing pullback of ({0}, {1})")]
    MissingPullback(ArrowId, ArrowId),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Arrow {
    pub name: String,
    pub src: ObjId,
    pub dst: ObjId,
}

/// A pullback square `apex --p1--> A --f--> C <--g-- B <--p2-- apex`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Span {
    pub apex: ObjId,
    pub p1: ArrowId,
    pub p2: ArrowId,
}

#[derive(Default)]
struct PullbackCache(Mutex<HashMap<(ArrowId, ArrowId), Option<Span>>>);

impl Clone for PullbackCache {
    fn clone(&self) -> Self {
        Self::default()
    }
}

impl fmt::Debug for PullbackCache {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("PullbackCache")
    }
}

/// A validated finite category. Immutable; object and arrow ids are dense
/// indices in declaration order.
#[derive(Debug, Clone)]
pub struct FinCategory {
    objects: Vec<String>,
    arrows: Vec<Arrow>,
    identities: Vec<ArrowId>,
    comp: Vec<Option<ArrowId>>,
    hom: Vec<Vec<ArrowId>>,
    obj_index: HashMap<String, ObjId>,
    arrow_index: HashMap<String, ArrowId>,
    explicit: Vec<(ArrowId, ArrowId)>,
    pullbacks: PullbackCache,
}

impl PartialEq for FinCategory {
    fn eq(&self, other: &Self) -> bool {
        self.objects == other.objects
            && self.arrows == other.arrows
            && self.identities == other.identities
            && self.comp == other.comp
    }
}

impl Eq for FinCategory {}

pub fn validate_category(raw: &RawCategory) -> Result<FinCategory, InvalidCategory> {
    let mut errs = Vec::new();
    let mut obj_index = HashMap::new();
    for (i, o) in raw.objects.iter().enumerate() {
        if obj_index.insert(o.clone(), i).is_some() {
            errs.push(CategoryError::DuplicateObject(o.clone()));
        }
    }
    let mut arrow_index = HashMap::new();
    let mut arrows = Vec::with_capacity(raw.arrows.len());
    for (i, a) in raw.arrows.iter().enumerate() {
        if arrow_index.insert(a.id.clone(), i).is_some() {
            errs.push(CategoryError::DuplicateArrow(a.id.clone()));
        }
        let ends: Vec<ObjId> = [&a.src, &a.dst]
            .iter()
            .filter_map(|o| match obj_index.get(*o) {
                Some(&x) => Some(x),
                None => {
                    errs.push(CategoryError::DanglingArrow { arrow: a.id.clone(), object: (*o).clone() });
                    None
                }
            })
            .collect();
        if ends.len() == 2 {
            arrows.push(Arrow { name: a.id.clone(), src: ends[0], dst: ends[1] });
        }
    }
    if !errs.is_empty() {
        return Err(InvalidCategory(errs));
    }

    let n_obj = raw.objects.len();
    let n = arrows.len();
    let mut identities = vec![usize::MAX; n_obj];
    for (o, id) in &raw.identities {
        let Some(&x) = obj_index.get(o) else {
            errs.push(CategoryError::UnknownObject(o.clone()));
            continue;
        };
        match arrow_index.get(id) {
            Some(&a) if arrows[a].src == x && arrows[a].dst == x => identities[x] = a,
            Some(_) => errs.push(CategoryError::BadIdentity(o.clone())),
            None => errs.push(CategoryError::UnknownArrow(id.clone())),
        }
    }
    for (x, &id) in identities.iter().enumerate() {
        if id == usize::MAX && !raw.identities.contains_key(&raw.objects[x]) {
            errs.push(CategoryError::BadIdentity(raw.objects[x].clone()));
        }
    }
    if !errs.is_empty() {
        return Err(InvalidCategory(errs));
    }

    let mut comp: Vec<Option<ArrowId>> = vec![None; n * n];
    let mut explicit = Vec::new();
    for e in &raw.compose {
        let look = |s: &String| arrow_index.get(s).copied();
        let (Some(g), Some(f), Some(gf)) = (look(&e.g), look(&e.f), look(&e.gf)) else {
            for s in [&e.g, &e.f, &e.gf] {
                if !arrow_index.contains_key(s) {
                    errs.push(CategoryError::UnknownArrow(s.clone()));
                }
            }
            continue;
        };
        if arrows[f].dst != arrows[g].src {
            errs.push(CategoryError::NotComposable { g: e.g.clone(), f: e.f.clone() });
            continue;
        }
        if arrows[gf].src != arrows[f].src || arrows[gf].dst != arrows[g].dst {
            errs.push(CategoryError::BadComposite { g: e.g.clone(), f: e.f.clone(), gf: e.gf.clone() });
            continue;
        }
        match comp[g * n + f] {
            Some(prev) if prev != gf => {
                errs.push(CategoryError::ConflictingComposite { g: e.g.clone(), f: e.f.clone() })
            }
            Some(_) => {}
            None => {
                comp[g * n + f] = Some(gf);
                explicit.push((g, f));
            }
        }
    }
    // Identity laws: fill implicit entries, reject contradicting explicit ones.
    for (f, a) in arrows.iter().enumerate() {
        for (slot, bad_obj) in [(identities[a.dst] * n + f, a.dst), (f * n + identities[a.src], a.src)] {
            match comp[slot] {
                None => comp[slot] = Some(f),
                Some(x) if x != f => errs.push(CategoryError::BadIdentity(raw.objects[bad_obj].clone())),
                Some(_) => {}
            }
        }
    }
    for (f, af) in arrows.iter().enumerate() {
        for (g, ag) in arrows.iter().enumerate() {
            if af.dst == ag.src && comp[g * n + f].is_none() {
                errs.push(CategoryError::MissingComposite { g: ag.name.clone(), f: af.name.clone() });
            }
        }
    }
    if !errs.is_empty() {
        return Err(InvalidCategory(errs));
    }

    let mut hom = vec![Vec::new(); n_obj * n_obj];
    for (i, a) in arrows.iter().enumerate() {
        hom[a.src * n_obj + a.dst].push(i);
    }
    let cat = FinCategory {
        objects: raw.objects.clone(),
        arrows,
        identities,
        comp,
        hom,
        obj_index,
        arrow_index,
        explicit,
        pullbacks: PullbackCache::default(),
    };
    if let Some((h, g, f)) = cat.first_non_associative() {
        return Err(InvalidCategory(vec![CategoryError::NonAssociative {
            h: cat.arrows[h].name.clone(),
            g: cat.arrows[g].name.clone(),
            f: cat.arrows[f].name.clone(),
        }]));
    }
    Ok(cat)
}

impl FinCategory {
    pub fn from_json(s: &str) -> Result<Self, crate::WorkspaceError> {
        let raw: RawCategory = serde_json::from_str(s).map_err(|e| crate::WorkspaceError::Syntax(e.to_string()))?;
        validate_category(&raw).map_err(|e| crate::WorkspaceError::Validation(e.to_string()))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_raw()).expect("category serializes")
    }

    pub fn to_raw(&self) -> RawCategory {
        RawCategory {
            objects: self.objects.clone(),
            arrows: self
                .arrows
                .iter()
                .map(|a| RawArrow {
                    id: a.name.clone(),
                    src: self.objects[a.src].clone(),
                    dst: self.objects[a.dst].clone(),
                })
                .collect(),
            compose: self
                .explicit
                .iter()
                .map(|&(g, f)| RawCompose {
                    g: self.arrows[g].name.clone(),
                    f: self.arrows[f].name.clone(),
                    gf: self.arrows[self.comp(g, f)].name.clone(),
                })
                .collect(),
            identities: self
                .identities
                .iter()
                .enumerate()
                .map(|(x, &i)| (self.objects[x].clone(), self.arrows[i].name.clone()))
                .collect(),
        }
    }

    /// The terminal category: one object `*`, one arrow `id`.
    pub fn terminal() -> Self {
        let mut raw = RawCategory::new();
        raw.object_with_identity("*", "id");
        raw.build().expect("terminal category is valid")
    }

    /// Thin category of a preorder. Identities are named `id_x` and the
    /// other arrows `x->y`.
    pub fn from_preorder(names: &[&str], leq: impl Fn(usize, usize) -> bool) -> Result<Self, InvalidCategory> {
        let n = names.len();
        let arrow_name = |x: usize, y: usize| {
            if x == y {
                format!("id_{}", names[x])
            } else {
                format!("{}->{}", names[x], names[y])
            }
        };
        let mut raw = RawCategory::new();
        for &x in names {
            raw.object(x);
        }
        for x in 0..n {
            for y in 0..n {
                if leq(x, y) {
                    raw.arrow(arrow_name(x, y), names[x], names[y]);
                }
            }
            raw.identities.insert(names[x].to_string(), arrow_name(x, x));
        }
        for x in 0..n {
            for y in 0..n {
                for z in 0..n {
                    if x != y && y != z && leq(x, y) && leq(y, z) {
                        raw.compose(arrow_name(y, z), arrow_name(x, y), arrow_name(x, z));
                    }
                }
            }
        }
        raw.build()
    }

    /// Skeleton of finite sets `{0, .., k-1}` for `k <= max`, with all
    /// functions. Objects are named by cardinality; a function `m -> n` is
    /// named `m>n:` followed by its image list, e.g. `2>3:20`.
    pub fn finite_sets(max: usize) -> Self {
        let mut raw = RawCategory::new();
        let mut funcs: Vec<(usize, usize, Vec<usize>)> = Vec::new();
        for m in 0..=max {
            raw.object(m.to_string());
        }
        for m in 0..=max {
            for n in 0..=max {
                for f in all_functions(m, n) {
                    raw.arrow(function_name(m, n, &f), m.to_string(), n.to_string());
                    funcs.push((m, n, f));
                }
            }
            raw.identities.insert(m.to_string(), function_name(m, m, &(0..m).collect::<Vec<_>>()));
        }
        for (m, n, f) in &funcs {
            for (n2, p, g) in &funcs {
                if n2 != n {
                    continue;
                }
                let gf: Vec<usize> = f.iter().map(|&i| g[i]).collect();
                raw.compose(function_name(*n, *p, g), function_name(*m, *n, f), function_name(*m, *p, &gf));
            }
        }
        raw.build().expect("finite sets form a category")
    }

    pub fn opposite(&self) -> Self {
        let n = self.arrows.len();
        let mut comp = vec![None; n * n];
        for g in 0..n {
            for f in 0..n {
                comp[f * n + g] = self.comp[g * n + f];
            }
        }
        let no = self.objects.len();
        let mut hom = vec![Vec::new(); no * no];
        for x in 0..no {
            for y in 0..no {
                hom[x * no + y] = self.hom[y * no + x].clone();
            }
        }
        FinCategory {
            objects: self.objects.clone(),
            arrows: self
                .arrows
                .iter()
                .map(|a| Arrow { name: a.name.clone(), src: a.dst, dst: a.src })
                .collect(),
            identities: self.identities.clone(),
            comp,
            hom,
            obj_index: self.obj_index.clone(),
            arrow_index: self.arrow_index.clone(),
            explicit: self.explicit.iter().map(|&(g, f)| (f, g)).collect(),
            pullbacks: PullbackCache::default(),
        }
    }

    /// Full subcategory of the slice over a common target on the arrows
    /// `over`, with the source functor's object and arrow maps.
    pub fn slice(&self, over: &[ArrowId]) -> (FinCategory, (Vec<ObjId>, Vec<ArrowId>)) {
        let mut raw = RawCategory::new();
        let mut tri = Vec::new();
        for &u in over {
            raw.object(self.arrow_name(u));
        }
        for &u in over {
            for &v in over {
                for &h in self.hom(self.src(u), self.src(v)) {
                    if self.comp(v, h) == u {
                        let name = format!("{}:{}=>{}", self.arrow_name(h), self.arrow_name(u), self.arrow_name(v));
                        raw.arrow(name.clone(), self.arrow_name(u), self.arrow_name(v));
                        if u == v && self.is_identity(h) {
                            raw.identities.insert(self.arrow_name(u).to_string(), name.clone());
                        }
                        tri.push((u, v, h, name));
                    }
                }
            }
        }
        for (u, v, h, n1) in &tri {
            for (v2, w, k, n2) in &tri {
                if v2 == v && !self.is_identity(*h) && !self.is_identity(*k) {
                    let kh = self.comp(*k, *h);
                    let name = &tri.iter().find(|t| t.0 == *u && t.1 == *w && t.2 == kh).expect("composite triangle").3;
                    raw.compose(n2.clone(), n1.clone(), name.clone());
                }
            }
        }
        let slice = raw.build().expect("slice of a valid category");
        let objs = over.iter().map(|&u| self.src(u)).collect();
        let arrows = tri.iter().map(|t| t.2).collect();
        (slice, (objs, arrows))
    }

    pub fn n_objects(&self) -> usize {
        self.objects.len()
    }

    pub fn n_arrows(&self) -> usize {
        self.arrows.len()
    }

    pub fn objects(&self) -> std::ops::Range<ObjId> {
        0..self.objects.len()
    }

    pub fn arrow_ids(&self) -> std::ops::Range<ArrowId> {
        0..self.arrows.len()
    }

    pub fn object_name(&self, x: ObjId) -> &str {
        &self.objects[x]
    }

    pub fn arrow_name(&self, f: ArrowId) -> &str {
        &self.arrows[f].name
    }

    pub fn obj(&self, name: &str) -> Option<ObjId> {
        self.obj_index.get(name).copied()
    }

    pub fn arrow(&self, name: &str) -> Option<ArrowId> {
        self.arrow_index.get(name).copied()
    }

    pub fn src(&self, f: ArrowId) -> ObjId {
        self.arrows[f].src
    }

    pub fn dst(&self, f: ArrowId) -> ObjId {
        self.arrows[f].dst
    }

    pub fn id(&self, x: ObjId) -> ArrowId {
        self.identities[x]
    }

    pub fn is_identity(&self, f: ArrowId) -> bool {
        self.identities[self.src(f)] == f
    }

    /// `g ∘ f`, if composable.
    pub fn compose(&self, g: ArrowId, f: ArrowId) -> Option<ArrowId> {
        self.comp[g * self.arrows.len() + f]
    }

    /// `g ∘ f`; panics if not composable.
    pub fn comp(&self, g: ArrowId, f: ArrowId) -> ArrowId {
        self.compose(g, f)
            .unwrap_or_else(|| panic!("{} ∘ {} is not composable", self.arrow_name(g), self.arrow_name(f)))
    }

    pub fn hom(&self, x: ObjId, y: ObjId) -> &[ArrowId] {
        &self.hom[x * self.objects.len() + y]
    }

    pub fn arrows_into(&self, y: ObjId) -> impl Iterator<Item = ArrowId> + '_ {
        self.objects().flat_map(move |x| self.hom(x, y).iter().copied())
    }

    pub fn arrows_from(&self, x: ObjId) -> impl Iterator<Item = ArrowId> + '_ {
        self.objects().flat_map(move |y| self.hom(x, y).iter().copied())
    }

    pub fn is_thin(&self) -> bool {
        self.hom.iter().all(|h| h.len() <= 1)
    }

    /// Whether `g` factors through `f`, i.e. `g = f ∘ h` for some `h`.
    pub fn factors_through(&self, g: ArrowId, f: ArrowId) -> bool {
        self.dst(g) == self.dst(f) && self.hom(self.src(g), self.src(f)).iter().any(|&h| self.comp(f, h) == g)
    }

    fn first_non_associative(&self) -> Option<(ArrowId, ArrowId, ArrowId)> {
        for f in self.arrow_ids() {
            for g in self.arrows_from(self.dst(f)) {
                let gf = self.comp(g, f);
                for h in self.arrows_from(self.dst(g)) {
                    if self.comp(h, gf) != self.comp(self.comp(h, g), f) {
                        return Some((h, g, f));
                    }
                }
            }
        }
        None
    }

    pub fn check_arrow(&self, f: ArrowId) -> Result<(), FincatError> {
        if f < self.arrows.len() {
            Ok(())
        } else {
            Err(FincatError::UnknownArrow(f))
        }
    }

    pub fn is_iso(&self, f: ArrowId) -> bool {
        self.inverse(f).is_some()
    }

    pub fn inverse(&self, f: ArrowId) -> Option<ArrowId> {
        let (a, b) = (self.src(f), self.dst(f));
        self.hom(b, a)
            .iter()
            .copied()
            .find(|&g| self.comp(f, g) == self.id(b) && self.comp(g, f) == self.id(a))
    }

    pub fn isomorphic(&self, x: ObjId, y: ObjId) -> bool {
        self.hom(x, y).iter().any(|&f| self.is_iso(f))
    }

    pub fn is_mono(&self, f: ArrowId) -> bool {
        self.is_jointly_monic(&[f])
    }

    pub fn is_epi(&self, f: ArrowId) -> bool {
        let b = self.dst(f);
        self.objects().all(|z| {
            let h = self.hom(b, z);
            h.iter().enumerate().all(|(i, &g1)| {
                h[i + 1..].iter().all(|&g2| self.comp(g1, f) != self.comp(g2, f))
            })
        })
    }

    /// Arrows with a common source are jointly monic when no two distinct
    /// arrows into that source are identified by all of them.
    pub fn is_jointly_monic(&self, fs: &[ArrowId]) -> bool {
        let Some(&f0) = fs.first() else { return true };
        let a = self.src(f0);
        debug_assert!(fs.iter().all(|&f| self.src(f) == a));
        self.objects().all(|z| {
            let h = self.hom(z, a);
            h.iter().enumerate().all(|(i, &g1)| {
                h[i + 1..].iter().all(|&g2| fs.iter().any(|&f| self.comp(f, g1) != self.comp(f, g2)))
            })
        })
    }

    pub fn classify_arrow(&self, f: ArrowId) -> Result<ArrowClass, FincatError> {
        self.check_arrow(f)?;
        let (a, b) = (self.src(f), self.dst(f));
        let split_epi = self.hom(b, a).iter().any(|&g| self.comp(f, g) == self.id(b));
        Ok(ArrowClass { mono: self.is_mono(f), epi: self.is_epi(f), iso: self.is_iso(f), split_epi })
    }

    /// Canonical pullback of the cospan `f`, `g`, memoized.
    pub fn pullback(&self, f: ArrowId, g: ArrowId) -> Option<Span> {
        if self.dst(f) != self.dst(g) {
            return None;
        }
        if let Some(hit) = self.pullbacks.0.lock().expect("cache lock").get(&(f, g)) {
            return *hit;
        }
        let data = DiagramData::cospan(self, f, g);
        let span = search(self, &data, Dir::Limit, false).map(|w| Span { apex: w.apex, p1: w.legs[0], p2: w.legs[1] });
        self.pullbacks.0.lock().expect("cache lock").insert((f, g), span);
        span
    }

    pub fn pullback_or_err(&self, f: ArrowId, g: ArrowId) -> Result<Span, FincatError> {
        self.pullback(f, g).ok_or(FincatError::MissingPullback(f, g))
    }

    /// Pullback exists along every arrow into the target.
    pub fn is_pullbackable(&self, f: ArrowId) -> bool {
        self.arrows_into(self.dst(f)).all(|g| self.pullback(f, g).is_some())
    }

    /// Whether `(apex, legs)` is a limit cone over `d`.
    pub fn is_limit_cone(&self, d: &DiagramData, apex: ObjId, legs: &[ArrowId]) -> bool {
        let counts = cone_counts(self, d, Dir::Limit);
        is_universal(self, d, Dir::Limit, &counts, apex, legs)
    }

    pub fn is_colimit_cocone(&self, d: &DiagramData, apex: ObjId, legs: &[ArrowId]) -> bool {
        let counts = cone_counts(self, d, Dir::Colimit);
        is_universal(self, d, Dir::Colimit, &counts, apex, legs)
    }

    pub fn limit_of(&self, d: &DiagramData) -> Option<ConeWitness> {
        search(self, d, Dir::Limit, true)
    }

    pub fn colimit_of(&self, d: &DiagramData) -> Option<ConeWitness> {
        search(self, d, Dir::Colimit, true)
    }

    pub fn terminal_object(&self) -> Option<ObjId> {
        self.objects().find(|&t| self.objects().all(|x| self.hom(x, t).len() == 1))
    }

    pub fn initial_object(&self) -> Option<ObjId> {
        self.objects().find(|&t| self.objects().all(|x| self.hom(t, x).len() == 1))
    }

    pub fn is_initial(&self, x: ObjId) -> bool {
        self.objects().all(|y| self.hom(x, y).len() == 1)
    }

    /// Effective-epi test for a sink; see [`EffectiveEpi`].
    pub fn is_effective_epi_family(&self, s: &Sink, universal: bool) -> EffectiveEpi {
        match self.effective_at(s) {
            Ok(false) => return EffectiveEpi::NotEffective { along: None },
            Err(FincatError::MissingPullback(a, b)) => return EffectiveEpi::Inapplicable { missing: (a, b) },
            Err(_) => unreachable!(),
            Ok(true) => {}
        }
        if universal {
            for g in self.arrows_into(s.apex).collect::<Vec<_>>() {
                let pulled = match self.pullback_sink(s, g) {
                    Ok(p) => p,
                    Err(FincatError::MissingPullback(a, b)) => return EffectiveEpi::Inapplicable { missing: (a, b) },
                    Err(_) => unreachable!(),
                };
                match self.effective_at(&pulled) {
                    Ok(true) => {}
                    Ok(false) => return EffectiveEpi::NotEffective { along: Some(g) },
                    Err(FincatError::MissingPullback(a, b)) => return EffectiveEpi::Inapplicable { missing: (a, b) },
                    Err(_) => unreachable!(),
                }
            }
        }
        EffectiveEpi::Effective
    }

    /// Pulls every leg of `s` back along `g`, giving a sink on `src(g)`.
    pub fn pullback_sink(&self, s: &Sink, g: ArrowId) -> Result<Sink, FincatError> {
        let mut legs = BTreeSet::new();
        for &u in &s.legs {
            legs.insert(self.pullback_or_err(u, g)?.p2);
        }
        Ok(Sink { apex: self.src(g), legs })
    }

    /// Legs-with-pairwise-pullbacks diagram of a sink, with the induced
    /// cocone legs into the apex.
    pub fn kernel_diagram(&self, s: &Sink) -> Result<(DiagramData, Vec<ArrowId>), FincatError> {
        let legs: Vec<ArrowId> = s.legs.iter().copied().collect();
        let mut d = DiagramData { nodes: legs.iter().map(|&u| self.src(u)).collect(), edges: Vec::new() };
        let mut cocone = legs.clone();
        for i in 0..legs.len() {
            for j in i..legs.len() {
                let sp = self.pullback_or_err(legs[i], legs[j])?;
                let k = d.nodes.len();
                d.nodes.push(sp.apex);
                d.edges.push((k, i, sp.p1));
                d.edges.push((k, j, sp.p2));
                cocone.push(self.comp(legs[i], sp.p1));
            }
        }
        Ok((d, cocone))
    }

    fn effective_at(&self, s: &Sink) -> Result<bool, FincatError> {
        let (d, cocone) = self.kernel_diagram(s)?;
        Ok(self.is_colimit_cocone(&d, s.apex, &cocone))
    }

    /// Whether the family of legs is an epi family: maps out of the apex are
    /// determined by their composites with the legs.
    pub fn is_epi_family(&self, s: &Sink) -> bool {
        self.objects().all(|z| {
            let h = self.hom(s.apex, z);
            h.iter().enumerate().all(|(i, &g1)| {
                h[i + 1..].iter().all(|&g2| s.legs.iter().any(|&u| self.comp(g1, u) != self.comp(g2, u)))
            })
        })
    }
}

fn all_functions(m: usize, n: usize) -> Vec<Vec<usize>> {
    let mut out = vec![Vec::new()];
    for _ in 0..m {
        out = out
            .into_iter()
            .flat_map(|f| {
                (0..n).map(move |v| {
                    let mut g = f.clone();
                    g.push(v);
                    g
                })
            })
            .collect();
    }
    out
}

fn function_name(m: usize, n: usize, f: &[usize]) -> String {
    let img: String = f.iter().map(|v| v.to_string()).collect();
    format!("{m}>{n}:{img}")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct ArrowClass {
    pub mono: bool,
    pub epi: bool,
    pub iso: bool,
    pub split_epi: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EffectiveEpi {
    Effective,
    /// `along` is the arrow whose pullback broke effectivity, if any.
    NotEffective { along: Option<ArrowId> },
    Inapplicable { missing: (ArrowId, ArrowId) },
}

impl EffectiveEpi {
    pub fn is_effective(self) -> bool {
        self == EffectiveEpi::Effective
    }
}

/// A sink: arrows sharing a target.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Sink {
    pub apex: ObjId,
    pub legs: BTreeSet<ArrowId>,
}

impl Sink {
    pub fn new(c: &FinCategory, apex: ObjId, legs: impl IntoIterator<Item = ArrowId>) -> Result<Self, FincatError> {
        let legs: BTreeSet<ArrowId> = legs.into_iter().collect();
        for &u in &legs {
            c.check_arrow(u)?;
            if c.dst(u) != apex {
                return Err(FincatError::BadSink(c.arrow_name(u).to_string()));
            }
        }
        Ok(Sink { apex, legs })
    }

    pub fn singleton(c: &FinCategory, f: ArrowId) -> Self {
        Sink { apex: c.dst(f), legs: BTreeSet::from([f]) }
    }

    pub fn empty(apex: ObjId) -> Self {
        Sink { apex, legs: BTreeSet::new() }
    }

    pub fn display(&self, c: &FinCategory) -> String {
        let legs: Vec<&str> = self.legs.iter().map(|&u| c.arrow_name(u)).collect();
        format!("{}{{{}}}", c.object_name(self.apex), legs.join(", "))
    }
}

/// Diagram as target objects per node plus arrows between nodes. Edge
/// `(j, k, a)` has `a: nodes[j] -> nodes[k]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DiagramData {
    pub nodes: Vec<ObjId>,
    pub edges: Vec<(usize, usize, ArrowId)>,
}

impl DiagramData {
    pub fn cospan(c: &FinCategory, f: ArrowId, g: ArrowId) -> Self {
        DiagramData { nodes: vec![c.src(f), c.src(g), c.dst(f)], edges: vec![(0, 2, f), (1, 2, g)] }
    }

    pub fn span(c: &FinCategory, f: ArrowId, g: ArrowId) -> Self {
        DiagramData { nodes: vec![c.dst(f), c.dst(g), c.src(f)], edges: vec![(2, 0, f), (2, 1, g)] }
    }

    pub fn parallel(c: &FinCategory, f: ArrowId, g: ArrowId) -> Self {
        DiagramData { nodes: vec![c.src(f), c.dst(f)], edges: vec![(0, 1, f), (0, 1, g)] }
    }

    pub fn discrete(objs: &[ObjId]) -> Self {
        DiagramData { nodes: objs.to_vec(), edges: Vec::new() }
    }
}

/// A functor from a finite shape category into a target category.
#[derive(Debug, Clone)]
pub struct Diagram {
    pub shape: FinCategory,
    pub objects: Vec<ObjId>,
    pub arrows: Vec<ArrowId>,
}

impl Diagram {
    /// Checks functoriality exhaustively.
    pub fn new(shape: FinCategory, objects: Vec<ObjId>, arrows: Vec<ArrowId>, c: &FinCategory) -> Result<Self, FincatError> {
        if objects.len() != shape.n_objects() || arrows.len() != shape.n_arrows() {
            return Err(FincatError::NotAFunctor("map sizes do not match the shape".into()));
        }
        for a in shape.arrow_ids() {
            let fa = arrows[a];
            c.check_arrow(fa)?;
            if c.src(fa) != objects[shape.src(a)] || c.dst(fa) != objects[shape.dst(a)] {
                return Err(FincatError::NotAFunctor(format!("arrow {} lands on the wrong objects", shape.arrow_name(a))));
            }
        }
        for x in shape.objects() {
            if arrows[shape.id(x)] != c.id(objects[x]) {
                return Err(FincatError::NotAFunctor(format!("identity of {} not preserved", shape.object_name(x))));
            }
        }
        for f in shape.arrow_ids() {
            for g in shape.arrows_from(shape.dst(f)) {
                if arrows[shape.comp(g, f)] != c.comp(arrows[g], arrows[f]) {
                    return Err(FincatError::NotAFunctor(format!(
                        "composite {} ∘ {} not preserved",
                        shape.arrow_name(g),
                        shape.arrow_name(f)
                    )));
                }
            }
        }
        Ok(Diagram { shape, objects, arrows })
    }

    pub fn data(&self) -> DiagramData {
        DiagramData {
            nodes: self.objects.clone(),
            edges: self
                .shape
                .arrow_ids()
                .filter(|&a| !self.shape.is_identity(a))
                .map(|a| (self.shape.src(a), self.shape.dst(a), self.arrows[a]))
                .collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ConeKind {
    Limit,
    Colimit,
}

/// A competing cone together with its unique mediating arrow.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Mediator {
    pub apex: ObjId,
    pub legs: Vec<ArrowId>,
    pub via: ArrowId,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConeWitness {
    pub apex: ObjId,
    pub legs: Vec<ArrowId>,
    pub kind: ConeKind,
    pub mediators: Vec<Mediator>,
}

pub fn finite_limit(d: &Diagram, c: &FinCategory, bound: usize) -> Result<Option<ConeWitness>, FincatError> {
    check_shape(d, bound)?;
    Ok(c.limit_of(&d.data()))
}

pub fn finite_colimit(d: &Diagram, c: &FinCategory, bound: usize) -> Result<Option<ConeWitness>, FincatError> {
    check_shape(d, bound)?;
    Ok(c.colimit_of(&d.data()))
}

fn check_shape(d: &Diagram, bound: usize) -> Result<(), FincatError> {
    if d.shape.n_arrows() > bound {
        Err(FincatError::ShapeTooLarge { size: d.shape.n_arrows(), bound })
    } else {
        Ok(())
    }
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Dir {
    Limit,
    Colimit,
}

impl Dir {
    fn hom<'a>(self, c: &'a FinCategory, x: ObjId, y: ObjId) -> &'a [ArrowId] {
        match self {
            Dir::Limit => c.hom(x, y),
            Dir::Colimit => c.hom(y, x),
        }
    }

    // Composition in the category where cones live.
    fn comp(self, c: &FinCategory, g: ArrowId, f: ArrowId) -> ArrowId {
        match self {
            Dir::Limit => c.comp(g, f),
            Dir::Colimit => c.comp(f, g),
        }
    }

    fn edges(self, d: &DiagramData) -> Vec<(usize, usize, ArrowId)> {
        match self {
            Dir::Limit => d.edges.clone(),
            Dir::Colimit => d.edges.iter().map(|&(j, k, a)| (k, j, a)).collect(),
        }
    }
}

// Enumerates all cones with the given apex, calling `visit` on each leg tuple.
fn for_each_cone(c: &FinCategory, d: &DiagramData, dir: Dir, apex: ObjId, visit: &mut dyn FnMut(&[ArrowId])) {
    let edges = dir.edges(d);
    let n = d.nodes.len();
    // Assignment order: prefer nodes whose leg is forced by an assigned node.
    let mut order = Vec::with_capacity(n);
    let mut placed = vec![false; n];
    while order.len() < n {
        let next = (0..n)
            .find(|&k| !placed[k] && edges.iter().any(|&(j, kk, _)| kk == k && placed[j]))
            .or_else(|| (0..n).find(|&k| !placed[k]))
            .expect("a node remains");
        placed[next] = true;
        order.push(next);
    }
    let mut legs = vec![usize::MAX; n];
    let mut assigned = vec![false; n];
    fn rec(
        c: &FinCategory,
        d: &DiagramData,
        dir: Dir,
        edges: &[(usize, usize, ArrowId)],
        order: &[usize],
        pos: usize,
        apex: ObjId,
        legs: &mut Vec<ArrowId>,
        assigned: &mut Vec<bool>,
        visit: &mut dyn FnMut(&[ArrowId]),
    ) {
        if pos == order.len() {
            visit(legs);
            return;
        }
        let k = order[pos];
        let forced = edges
            .iter()
            .find(|&&(j, kk, _)| kk == k && assigned[j])
            .map(|&(j, _, a)| dir.comp(c, a, legs[j]));
        let consistent = |l: ArrowId, legs: &Vec<ArrowId>, assigned: &Vec<bool>| {
            edges.iter().all(|&(j, kk, a)| {
                if j == k && kk == k {
                    dir.comp(c, a, l) == l
                } else if kk == k && assigned[j] {
                    dir.comp(c, a, legs[j]) == l
                } else if j == k && assigned[kk] {
                    dir.comp(c, a, l) == legs[kk]
                } else {
                    true
                }
            })
        };
        let candidates: Vec<ArrowId> = match forced {
            Some(l) => vec![l],
            None => dir.hom(c, apex, d.nodes[k]).to_vec(),
        };
        for l in candidates {
            if consistent(l, legs, assigned) {
                legs[k] = l;
                assigned[k] = true;
                rec(c, d, dir, edges, order, pos + 1, apex, legs, assigned, visit);
                assigned[k] = false;
            }
        }
    }
    rec(c, d, dir, &edges, &order, 0, apex, &mut legs, &mut assigned, visit);
}

fn cone_counts(c: &FinCategory, d: &DiagramData, dir: Dir) -> Vec<usize> {
    c.objects()
        .map(|q| {
            let mut n = 0;
            for_each_cone(c, d, dir, q, &mut |_| n += 1);
            n
        })
        .collect()
}

// A cone is universal iff precomposition hom(Q, P) -> cones(Q) is a
// bijection for every Q. The images are always cones, so it suffices to
// compare cardinalities and check injectivity.
fn is_universal(c: &FinCategory, d: &DiagramData, dir: Dir, counts: &[usize], apex: ObjId, legs: &[ArrowId]) -> bool {
    let mut seen = std::collections::HashSet::new();
    c.objects().all(|q| {
        let h = dir.hom(c, q, apex);
        if h.len() != counts[q] {
            return false;
        }
        seen.clear();
        h.iter().all(|&m| seen.insert(legs.iter().map(|&l| dir.comp(c, l, m)).collect::<Vec<_>>()))
    }) && legs.len() == d.nodes.len()
}

fn search(c: &FinCategory, d: &DiagramData, dir: Dir, record: bool) -> Option<ConeWitness> {
    let counts = cone_counts(c, d, dir);
    for p in c.objects() {
        // Cardinality filter depends only on the apex.
        if c.objects().any(|q| dir.hom(c, q, p).len() != counts[q]) {
            continue;
        }
        let mut found = None;
        for_each_cone(c, d, dir, p, &mut |legs| {
            if found.is_none() && is_universal(c, d, dir, &counts, p, legs) {
                found = Some(legs.to_vec());
            }
        });
        if let Some(legs) = found {
            let mut mediators = Vec::new();
            if record {
                for q in c.objects() {
                    for &m in dir.hom(c, q, p) {
                        mediators.push(Mediator { apex: q, legs: legs.iter().map(|&l| dir.comp(c, l, m)).collect(), via: m });
                    }
                }
            }
            let kind = if dir == Dir::Limit { ConeKind::Limit } else { ConeKind::Colimit };
            return Some(ConeWitness { apex: p, legs, kind, mediators });
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    #[test]
    fn terminal_validates() {
        let t = FinCategory::terminal();
        assert_eq!(t.n_objects(), 1);
        assert_eq!(t.n_arrows(), 1);
    }

    #[test]
    fn arrow_poset_validates() {
        let c = fixtures::arrow_poset();
        assert_eq!(c.n_arrows(), 3);
        assert!(c.is_thin());
    }

    #[test]
    fn perturbed_chain_is_non_associative() {
        // Walking 3-chain 0 -f-> 1 -g-> 2 -h-> 3 with two parallel arrows
        // 0 -> 3 (hgf and k); flip one composite so the triple disagrees.
        let mut raw = RawCategory::new();
        for o in ["0", "1", "2", "3"] {
            raw.object_with_identity(o, format!("id{o}"));
        }
        raw.arrow("f", "0", "1").arrow("g", "1", "2").arrow("h", "2", "3");
        raw.arrow("gf", "0", "2").arrow("hg", "1", "3").arrow("x", "0", "3").arrow("y", "0", "3");
        raw.compose("g", "f", "gf").compose("h", "g", "hg");
        raw.compose("h", "gf", "x").compose("hg", "f", "x");
        assert!(raw.build().is_ok());
        raw.compose.pop();
        raw.compose("hg", "f", "y");
        let err = raw.build().unwrap_err();
        assert!(matches!(err.0[0], CategoryError::NonAssociative { .. }), "{err}");
    }

    #[test]
    fn missing_composite_and_bad_identity() {
        let mut raw = RawCategory::new();
        raw.object_with_identity("a", "ia").object_with_identity("b", "ib").object_with_identity("c", "ic");
        raw.arrow("f", "a", "b").arrow("g", "b", "c").arrow("gf", "a", "c");
        let err = raw.build().unwrap_err();
        assert!(err.0.contains(&CategoryError::MissingComposite { g: "g".into(), f: "f".into() }));

        raw.compose("g", "f", "gf").compose("ib", "f", "gf");
        let err = raw.build().unwrap_err();
        assert!(err.0.iter().any(|e| matches!(e, CategoryError::BadComposite { .. })));

        let mut raw = RawCategory::new();
        raw.object("a").arrow("e", "a", "a");
        raw.identities.insert("a".into(), "e".into());
        raw.arrow("t", "a", "a").compose("t", "t", "t").compose("e", "t", "e");
        let err = raw.build().unwrap_err();
        assert!(err.0.contains(&CategoryError::BadIdentity("a".into())));
    }

    #[test]
    fn json_round_trip_is_bit_exact() {
        let c = fixtures::disc2();
        let s = c.to_json();
        let back = FinCategory::from_json(&s).unwrap();
        assert_eq!(back, c);
        assert_eq!(back.to_json(), s);
    }

    #[test]
    fn finite_sets_counts() {
        assert_eq!(FinCategory::finite_sets(3).n_arrows(), 60);
        assert_eq!(FinCategory::finite_sets(1).n_arrows(), 3);
    }

    #[test]
    fn limits_examples() {
        let c = fixtures::disc2();
        let o = |n| c.obj(n).unwrap();
        let a = |n| c.arrow(n).unwrap();
        let pb = c.pullback(a("l->T"), a("r->T")).unwrap();
        assert_eq!(pb.apex, o("B"));

        let f = a("l->T");
        let pb = c.pullback(f, c.id(o("T"))).unwrap();
        assert_eq!((pb.apex, pb.p1, pb.p2), (o("l"), c.id(o("l")), f));

        let t = FinCategory::terminal();
        let w = t.limit_of(&DiagramData::discrete(&[0, 0])).unwrap();
        assert_eq!(w.apex, 0);
        assert_eq!(w.kind, ConeKind::Limit);
    }

    #[test]
    fn colimit_examples() {
        let c = fixtures::disc2();
        let a = |n| c.arrow(n).unwrap();
        let w = c.colimit_of(&DiagramData::span(&c, a("B->l"), a("B->r"))).unwrap();
        assert_eq!(w.apex, c.obj("T").unwrap());
        assert_eq!(w.kind, ConeKind::Colimit);

        let x = c.obj("l").unwrap();
        let w = c.colimit_of(&DiagramData::parallel(&c, c.id(x), c.id(x))).unwrap();
        assert_eq!(w.apex, x);

        let ch = fixtures::chain3();
        let w = ch.colimit_of(&DiagramData::discrete(&[])).unwrap();
        assert_eq!(w.apex, ch.obj("0").unwrap());
    }

    #[test]
    fn witness_records_every_competitor() {
        let c = fixtures::disc2();
        let a = |n| c.arrow(n).unwrap();
        let d = DiagramData::cospan(&c, a("l->T"), a("r->T"));
        let w = c.limit_of(&d).unwrap();
        // Only the bottom element maps below both l and r.
        assert_eq!(w.mediators.len(), 1);
        for m in &w.mediators {
            for (j, &l) in w.legs.iter().enumerate() {
                assert_eq!(c.comp(l, m.via), m.legs[j]);
            }
        }
    }

    #[test]
    fn shape_bound_enforced() {
        let c = fixtures::disc2();
        let shape = FinCategory::from_preorder(&["p", "q"], |x, y| x <= y).unwrap();
        let ids = vec![c.id(0), c.id(0), c.id(0)];
        let d = Diagram::new(shape, vec![0, 0], ids, &c).unwrap();
        assert!(matches!(finite_limit(&d, &c, 2), Err(FincatError::ShapeTooLarge { size: 3, bound: 2 })));
        assert!(finite_limit(&d, &c, DEFAULT_SHAPE_BOUND).unwrap().is_some());
    }

    #[test]
    fn classification_examples() {
        let c = fixtures::arrow_poset();
        let f = c.arrow("a->b").unwrap();
        let k = c.classify_arrow(f).unwrap();
        assert!(k.mono && k.epi && !k.iso && !k.split_epi);
        let k = c.classify_arrow(c.id(0)).unwrap();
        assert!(k.mono && k.epi && k.iso && k.split_epi);

        // In a poset every arrow is both mono and epi.
        let d = fixtures::disc2();
        let k = d.classify_arrow(d.arrow("l->T").unwrap()).unwrap();
        assert!(k.mono && k.epi && !k.iso);
        assert!(matches!(d.classify_arrow(999), Err(FincatError::UnknownArrow(999))));
    }

    #[test]
    fn classification_in_sets() {
        let s = FinCategory::finite_sets(3);
        let surj = s.arrow("3>2:010").unwrap();
        let inj = s.arrow("2>3:20").unwrap();
        let k = s.classify_arrow(surj).unwrap();
        assert!(k.epi && k.split_epi && !k.mono);
        let k = s.classify_arrow(inj).unwrap();
        assert!(k.mono && !k.epi);
        assert!(s.is_jointly_monic(&[s.arrow("2>1:00").unwrap(), s.arrow("2>2:01").unwrap()]));
        assert!(!s.is_jointly_monic(&[s.arrow("2>1:00").unwrap()]));
    }

    #[test]
    fn effective_epi_examples() {
        let c = fixtures::disc2();
        let a = |n| c.arrow(n).unwrap();
        let s = Sink::new(&c, c.obj("T").unwrap(), [a("l->T"), a("r->T")]).unwrap();
        assert_eq!(c.is_effective_epi_family(&s, true), EffectiveEpi::Effective);

        let x = c.obj("l").unwrap();
        let s = Sink::singleton(&c, c.id(x));
        assert!(c.is_effective_epi_family(&s, true).is_effective());

        let p = fixtures::arrow_poset();
        let s = Sink::singleton(&p, p.arrow("a->b").unwrap());
        assert_eq!(p.is_effective_epi_family(&s, false), EffectiveEpi::NotEffective { along: None });
    }

    #[test]
    fn effective_epi_in_sets() {
        let s = FinCategory::finite_sets(3);
        let two = s.obj("2").unwrap();
        let points = Sink::new(&s, two, [s.arrow("1>2:0").unwrap(), s.arrow("1>2:1").unwrap()]).unwrap();
        assert!(s.is_effective_epi_family(&points, false).is_effective());
        // The kernel pair of 3 -> 2 has five elements.
        let surj = Sink::singleton(&s, s.arrow("3>2:011").unwrap());
        assert!(matches!(s.is_effective_epi_family(&surj, false), EffectiveEpi::Inapplicable { .. }));
        let not = Sink::singleton(&s, s.arrow("1>2:0").unwrap());
        assert!(!s.is_effective_epi_family(&not, false).is_effective());
    }

    #[test]
    fn missing_pullback_is_inapplicable() {
        // Two arrows into a sink with no common source candidates.
        let mut raw = RawCategory::new();
        raw.object_with_identity("a", "ia").object_with_identity("b", "ib").object_with_identity("c", "ic");
        raw.arrow("f", "a", "c").arrow("g", "b", "c");
        let c = raw.build().unwrap();
        let s = Sink::new(&c, 2, [c.arrow("f").unwrap(), c.arrow("g").unwrap()]).unwrap();
        assert!(matches!(c.is_effective_epi_family(&s, false), EffectiveEpi::Inapplicable { .. }));
    }
}
