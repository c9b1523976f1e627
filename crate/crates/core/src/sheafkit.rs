//! Finite-set-valued presheaves and sheaves on finite sites: sheaf
//! condition, sheafification, representables, natural transformations,
//! epi families and bounded enumeration of sheaf universes.

use std::collections::{BTreeMap, HashMap};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fincat::{ArrowId, Diagram, FinCategory, ObjId, RawCategory, Sink};
use crate::site::{sinks_from, Coverage, Pretopology};
use crate::WorkspaceError;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SheafError {
    #[error("section sets exceed the bound {0}")]
    BoundExceeded(usize),
    #[error("not functorial: {0}")]
    NotFunctorial(String),
    #[error("not a sheaf for the covering {0}")]
    NotASheaf(String),
    #[error("sheafification did not converge")]
    NotConverged,
}

/// A presheaf of finite sets. `restrict[f]` maps `F(dst f)` to `F(src f)`.
#[derive(Debug, Clone)]
pub struct Presheaf {
    base: Arc<FinCategory>,
    sizes: Vec<usize>,
    restrict: Vec<Vec<usize>>,
    labels: Vec<Vec<String>>,
}

impl PartialEq for Presheaf {
    fn eq(&self, other: &Self) -> bool {
        self.sizes == other.sizes && self.restrict == other.restrict
    }
}

impl Eq for Presheaf {}

fn default_labels(sizes: &[usize]) -> Vec<Vec<String>> {
    sizes.iter().map(|&n| (0..n).map(|i| i.to_string()).collect()).collect()
}

impl Presheaf {
    pub fn new(base: Arc<FinCategory>, sizes: Vec<usize>, restrict: Vec<Vec<usize>>) -> Result<Self, SheafError> {
        let labels = default_labels(&sizes);
        let p = Presheaf { base, sizes, restrict, labels };
        p.check_functorial()?;
        Ok(p)
    }

    pub fn with_labels(mut self, labels: Vec<Vec<String>>) -> Self {
        assert!(labels.iter().zip(&self.sizes).all(|(l, &n)| l.len() == n));
        self.labels = labels;
        self
    }

    fn check_functorial(&self) -> Result<(), SheafError> {
        let c = &*self.base;
        if self.sizes.len() != c.n_objects() || self.restrict.len() != c.n_arrows() {
            return Err(SheafError::NotFunctorial("data sizes do not match the base".into()));
        }
        for f in c.arrow_ids() {
            let r = &self.restrict[f];
            if r.len() != self.sizes[c.dst(f)] || r.iter().any(|&v| v >= self.sizes[c.src(f)]) {
                return Err(SheafError::NotFunctorial(format!("restriction along {} is not a function", c.arrow_name(f))));
            }
            if c.is_identity(f) && r.iter().enumerate().any(|(i, &v)| i != v) {
                return Err(SheafError::NotFunctorial(format!("identity {} not preserved", c.arrow_name(f))));
            }
        }
        for f in c.arrow_ids() {
            for g in c.arrows_from(c.dst(f)) {
                let gf = c.comp(g, f);
                if (0..self.sizes[c.dst(g)]).any(|x| self.restrict[gf][x] != self.restrict[f][self.restrict[g][x]]) {
                    return Err(SheafError::NotFunctorial(format!(
                        "composite {} ∘ {} not preserved",
                        c.arrow_name(g),
                        c.arrow_name(f)
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn base(&self) -> &Arc<FinCategory> {
        &self.base
    }

    pub fn size(&self, x: ObjId) -> usize {
        self.sizes[x]
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn label(&self, x: ObjId, i: usize) -> &str {
        &self.labels[x][i]
    }

    /// Restriction of section `s` of `F(dst f)` along `f`.
    pub fn restrict(&self, f: ArrowId, s: usize) -> usize {
        self.restrict[f][s]
    }

    pub fn max_size(&self) -> usize {
        self.sizes.iter().copied().max().unwrap_or(0)
    }

    pub fn terminal(base: Arc<FinCategory>) -> Self {
        let sizes = vec![1; base.n_objects()];
        let restrict = vec![vec![0]; base.n_arrows()];
        Presheaf::new(base, sizes, restrict).expect("terminal presheaf")
    }

    pub fn empty(base: Arc<FinCategory>) -> Self {
        let sizes = vec![0; base.n_objects()];
        let restrict = vec![Vec::new(); base.n_arrows()];
        Presheaf::new(base, sizes, restrict).expect("empty presheaf")
    }

    /// `Hom(-, x)`, sections labelled by arrow names.
    pub fn representable(base: Arc<FinCategory>, x: ObjId) -> Self {
        let c = &*base;
        let homs: Vec<&[ArrowId]> = c.objects().map(|y| c.hom(y, x)).collect();
        let sizes = homs.iter().map(|h| h.len()).collect();
        let restrict = c
            .arrow_ids()
            .map(|f| {
                homs[c.dst(f)]
                    .iter()
                    .map(|&g| {
                        let gf = c.comp(g, f);
                        homs[c.src(f)].iter().position(|&h| h == gf).expect("composite in hom")
                    })
                    .collect()
            })
            .collect();
        let labels = homs.iter().map(|h| h.iter().map(|&g| c.arrow_name(g).to_string()).collect()).collect();
        Presheaf { base, sizes, restrict, labels }
    }

    /// Matching families for a sink, as tuples indexed by the legs in
    /// order. Compatibility is tested on every pairwise pullback.
    pub fn matching_families(&self, s: &Sink) -> Vec<Vec<usize>> {
        let c = &*self.base;
        let legs: Vec<ArrowId> = s.legs.iter().copied().collect();
        let mut pairs = Vec::new();
        for i in 0..legs.len() {
            for j in i..legs.len() {
                match c.pullback(legs[i], legs[j]) {
                    Some(sp) => pairs.push((i, j, sp.p1, sp.p2)),
                    None => return Vec::new(),
                }
            }
        }
        let mut out = Vec::new();
        let mut cur = Vec::with_capacity(legs.len());
        fn rec(
            p: &Presheaf,
            legs: &[ArrowId],
            pairs: &[(usize, usize, ArrowId, ArrowId)],
            cur: &mut Vec<usize>,
            out: &mut Vec<Vec<usize>>,
        ) {
            let k = cur.len();
            if k == legs.len() {
                out.push(cur.clone());
                return;
            }
            for x in 0..p.sizes[p.base.src(legs[k])] {
                cur.push(x);
                let ok = pairs
                    .iter()
                    .filter(|&&(i, j, _, _)| j == k && i <= k)
                    .all(|&(i, j, p1, p2)| p.restrict[p1][cur[i]] == p.restrict[p2][cur[j]]);
                if ok {
                    rec(p, legs, pairs, cur, out);
                }
                cur.pop();
            }
        }
        rec(self, &legs, &pairs, &mut cur, &mut out);
        out
    }

    fn family_of(&self, s: &Sink, x: usize) -> Vec<usize> {
        s.legs.iter().map(|&u| self.restrict[u][x]).collect()
    }

    /// Whether sections over the apex correspond bijectively to matching
    /// families over `s`.
    pub fn satisfies_sheaf_condition(&self, s: &Sink) -> bool {
        let fams = self.matching_families(s);
        if fams.len() != self.sizes[s.apex] {
            return false;
        }
        let mut seen: Vec<Vec<usize>> = (0..self.sizes[s.apex]).map(|x| self.family_of(s, x)).collect();
        seen.sort();
        seen.dedup();
        seen.len() == fams.len()
    }

    /// `None` if `self` is a sheaf on `site`, otherwise a failing covering.
    pub fn sheaf_violation(&self, site: &Pretopology) -> Option<Sink> {
        site.coverings().iter().find(|s| !self.satisfies_sheaf_condition(s)).cloned()
    }

    pub fn is_sheaf(&self, site: &Pretopology) -> bool {
        self.sheaf_violation(site).is_none()
    }

    pub fn product(&self, other: &Presheaf) -> Presheaf {
        let c = &*self.base;
        let sizes: Vec<usize> = c.objects().map(|x| self.sizes[x] * other.sizes[x]).collect();
        let restrict = c
            .arrow_ids()
            .map(|f| {
                let (d, s) = (c.dst(f), c.src(f));
                (0..sizes[d])
                    .map(|k| {
                        let (a, b) = (k / other.sizes[d], k % other.sizes[d]);
                        self.restrict[f][a] * other.sizes[s] + other.restrict[f][b]
                    })
                    .collect()
            })
            .collect();
        Presheaf::new(self.base.clone(), sizes, restrict).expect("product of presheaves")
    }

    pub fn from_json(base: Arc<FinCategory>, s: &str) -> Result<Self, WorkspaceError> {
        let raw: RawPresheaf = serde_json::from_str(s).map_err(|e| WorkspaceError::Syntax(e.to_string()))?;
        Presheaf::from_raw(base, &raw)
    }

    pub fn from_raw(base: Arc<FinCategory>, raw: &RawPresheaf) -> Result<Self, WorkspaceError> {
        let c = &*base;
        let mut labels = vec![Vec::new(); c.n_objects()];
        for (o, elems) in &raw.sections {
            let x = c.obj(o).ok_or_else(|| WorkspaceError::UnresolvedName(o.clone()))?;
            labels[x] = elems.clone();
        }
        let sizes: Vec<usize> = labels.iter().map(|l| l.len()).collect();
        let mut restrict = Vec::with_capacity(c.n_arrows());
        for f in c.arrow_ids() {
            let (d, s) = (c.dst(f), c.src(f));
            let table = raw.restrictions.get(c.arrow_name(f));
            let mut r = Vec::with_capacity(sizes[d]);
            for (i, e) in labels[d].iter().enumerate() {
                let img = match table.and_then(|t| t.get(e)) {
                    Some(v) => labels[s].iter().position(|l| l == v).ok_or_else(|| WorkspaceError::UnresolvedName(v.clone()))?,
                    None if c.is_identity(f) => i,
                    None => {
                        return Err(WorkspaceError::Validation(format!(
                            "no restriction of `{e}` along `{}`",
                            c.arrow_name(f)
                        )))
                    }
                };
                r.push(img);
            }
            restrict.push(r);
        }
        let p = Presheaf { base: base.clone(), sizes, restrict, labels };
        p.check_functorial().map_err(|e| WorkspaceError::Validation(e.to_string()))?;
        Ok(p)
    }

    pub fn to_raw(&self) -> RawPresheaf {
        let c = &*self.base;
        RawPresheaf {
            sections: c.objects().map(|x| (c.object_name(x).to_string(), self.labels[x].clone())).collect(),
            restrictions: c
                .arrow_ids()
                .filter(|&f| !c.is_identity(f))
                .map(|f| {
                    let table = (0..self.sizes[c.dst(f)])
                        .map(|i| (self.labels[c.dst(f)][i].clone(), self.labels[c.src(f)][self.restrict[f][i]].clone()))
                        .collect();
                    (c.arrow_name(f).to_string(), table)
                })
                .collect(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_raw()).expect("presheaf serializes")
    }
}

/// Sheaf file: sections per object and restriction tables per arrow.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawPresheaf {
    pub sections: BTreeMap<String, Vec<String>>,
    pub restrictions: BTreeMap<String, BTreeMap<String, String>>,
}

/// A natural transformation given by its components.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NatTrans {
    pub components: Vec<Vec<usize>>,
}

impl NatTrans {
    pub fn identity(p: &Presheaf) -> Self {
        NatTrans { components: p.sizes.iter().map(|&n| (0..n).collect()).collect() }
    }

    /// `self ∘ other`.
    pub fn after(&self, other: &NatTrans) -> NatTrans {
        NatTrans {
            components: self
                .components
                .iter()
                .zip(&other.components)
                .map(|(a, b)| b.iter().map(|&x| a[x]).collect())
                .collect(),
        }
    }

    pub fn is_natural(&self, f_: &Presheaf, g_: &Presheaf) -> bool {
        let c = &*f_.base;
        self.components.len() == c.n_objects()
            && c.objects().all(|x| self.components[x].len() == f_.sizes[x] && self.components[x].iter().all(|&v| v < g_.sizes[x]))
            && c.arrow_ids().all(|f| {
                let (d, s) = (c.dst(f), c.src(f));
                (0..f_.sizes[d]).all(|x| g_.restrict[f][self.components[d][x]] == self.components[s][f_.restrict[f][x]])
            })
    }

    pub fn is_iso(&self, f_: &Presheaf, g_: &Presheaf) -> bool {
        self.components.iter().enumerate().all(|(x, comp)| {
            let mut seen = vec![false; g_.sizes[x]];
            comp.len() == g_.sizes[x] && comp.iter().all(|&v| !std::mem::replace(&mut seen[v], true))
        }) && f_.sizes == g_.sizes
    }
}

/// All natural transformations `f_ -> g_`, in lexicographic order.
pub fn sheaf_hom_set(f_: &Presheaf, g_: &Presheaf) -> Vec<NatTrans> {
    hom_search(f_, g_, false)
}

/// Some natural isomorphism, if the presheaves are isomorphic.
pub fn find_iso(f_: &Presheaf, g_: &Presheaf) -> Option<NatTrans> {
    if f_.sizes != g_.sizes {
        return None;
    }
    hom_search(f_, g_, true).into_iter().next()
}

fn hom_search(f_: &Presheaf, g_: &Presheaf, bijective: bool) -> Vec<NatTrans> {
    let c = &*f_.base;
    let n = c.n_objects();
    let mut comps: Vec<Option<Vec<usize>>> = vec![None; n];
    let mut out = Vec::new();
    fn rec(
        c: &FinCategory,
        f_: &Presheaf,
        g_: &Presheaf,
        bijective: bool,
        x: usize,
        comps: &mut Vec<Option<Vec<usize>>>,
        out: &mut Vec<NatTrans>,
    ) {
        if x == c.n_objects() {
            out.push(NatTrans { components: comps.iter().map(|v| v.clone().expect("assigned")).collect() });
            return;
        }
        let (m, k) = (f_.sizes[x], g_.sizes[x]);
        if m > 0 && k == 0 {
            return;
        }
        let total = k.checked_pow(m as u32).expect("component count fits");
        let mut cur = vec![0usize; m];
        'outer: for code in 0..total.max(1) {
            if m == 0 && code > 0 {
                break;
            }
            let mut v = code;
            for slot in cur.iter_mut() {
                *slot = v % k.max(1);
                v /= k.max(1);
            }
            if bijective {
                let mut seen = vec![false; k];
                for &y in &cur {
                    if std::mem::replace(&mut seen[y], true) {
                        continue 'outer;
                    }
                }
            }
            comps[x] = Some(cur.clone());
            // Naturality against every arrow between assigned objects.
            let ok = (0..=x).all(|y| {
                [(x, y), (y, x)].iter().all(|&(a, b)| {
                    let (ca, cb) = (comps[a].as_ref().unwrap(), comps[b].as_ref().unwrap());
                    c.hom(a, b).iter().all(|&f| {
                        (0..f_.sizes[b]).all(|s| g_.restrict[f][cb[s]] == ca[f_.restrict[f][s]])
                    })
                })
            });
            if ok {
                rec(c, f_, g_, bijective, x + 1, comps, out);
            }
            comps[x] = None;
        }
    }
    rec(c, f_, g_, bijective, 0, &mut comps, &mut out);
    out
}

/// A sheaf with its unit map from the presheaf it came from.
#[derive(Debug, Clone)]
pub struct Sheafified {
    pub sheaf: Presheaf,
    pub unit: NatTrans,
}

// One plus-construction step: sections over X are matching families over
// coverings of X, identified when they agree on a common refinement.
fn plus(p: &Presheaf, site: &Pretopology) -> Result<(Presheaf, NatTrans), SheafError> {
    let c = &*p.base;
    let mut classes: Vec<HashMap<(usize, Vec<usize>), usize>> = Vec::with_capacity(c.n_objects());
    let mut reps: Vec<Vec<(usize, Vec<usize>)>> = Vec::with_capacity(c.n_objects());
    let covs: Vec<Vec<&Sink>> = c.objects().map(|x| site.coverings_of(x).collect()).collect();
    for x in c.objects() {
        let mut elems: Vec<(usize, Vec<usize>)> = Vec::new();
        for (si, s) in covs[x].iter().enumerate() {
            for fam in p.matching_families(s) {
                elems.push((si, fam));
            }
        }
        let mut uf: Vec<usize> = (0..elems.len()).collect();
        fn find(uf: &mut [usize], i: usize) -> usize {
            let mut r = i;
            while uf[r] != r {
                r = uf[r];
            }
            uf[i] = r;
            r
        }
        for r in &covs[x] {
            let mut bucket: HashMap<Vec<usize>, usize> = HashMap::new();
            for (ei, (si, fam)) in elems.iter().enumerate() {
                if let Some(restricted) = transport(p, covs[x][*si], fam, r, c.id(x)) {
                    match bucket.get(&restricted) {
                        Some(&other) => {
                            let (a, b) = (find(&mut uf, ei), find(&mut uf, other));
                            uf[a.max(b)] = a.min(b);
                        }
                        None => {
                            bucket.insert(restricted, ei);
                        }
                    }
                }
            }
        }
        let mut class_of_root: HashMap<usize, usize> = HashMap::new();
        let mut map = HashMap::new();
        let mut rep = Vec::new();
        for ei in 0..elems.len() {
            let root = find(&mut uf, ei);
            let next = class_of_root.len();
            let cls = *class_of_root.entry(root).or_insert(next);
            if cls == rep.len() {
                rep.push(elems[ei].clone());
            }
            map.insert(elems[ei].clone(), cls);
        }
        classes.push(map);
        reps.push(rep);
    }
    let sizes: Vec<usize> = reps.iter().map(|r| r.len()).collect();
    let mut restrict = Vec::with_capacity(c.n_arrows());
    for f in c.arrow_ids() {
        let (d, s) = (c.dst(f), c.src(f));
        let mut r = Vec::with_capacity(sizes[d]);
        for (si, fam) in &reps[d] {
            let cover = covs[d][*si];
            let pulled = c.pullback_sink(cover, f).map_err(|_| SheafError::NotConverged)?;
            let pi = covs[s].iter().position(|t| **t == pulled).ok_or(SheafError::NotConverged)?;
            let moved = transport(p, cover, fam, &pulled, f).ok_or(SheafError::NotConverged)?;
            r.push(*classes[s].get(&(pi, moved)).ok_or(SheafError::NotConverged)?);
        }
        restrict.push(r);
    }
    let sheaf = Presheaf::new(p.base.clone(), sizes, restrict)?;
    let mut unit = Vec::with_capacity(c.n_objects());
    for x in c.objects() {
        let s0 = covs[x].first().ok_or(SheafError::NotConverged)?;
        let comp = (0..p.sizes[x])
            .map(|e| classes[x].get(&(0, p.family_of(s0, e))).copied().ok_or(SheafError::NotConverged))
            .collect::<Result<Vec<_>, _>>()?;
        unit.push(comp);
    }
    Ok((sheaf, NatTrans { components: unit }))
}

// Moves a matching family on `from` (over X) to the sink `to` over Y,
// along `f: Y -> X`: each leg w of `to` has `f ∘ w = u ∘ h` for a leg u.
fn transport(p: &Presheaf, from: &Sink, fam: &[usize], to: &Sink, f: ArrowId) -> Option<Vec<usize>> {
    let c = &*p.base;
    let legs: Vec<ArrowId> = from.legs.iter().copied().collect();
    to.legs
        .iter()
        .map(|&w| {
            let fw = c.comp(f, w);
            legs.iter().enumerate().find_map(|(i, &u)| {
                c.hom(c.src(w), c.src(u)).iter().find(|&&h| c.comp(u, h) == fw).map(|&h| p.restrict[h][fam[i]])
            })
        })
        .collect()
}

/// Sheafification by iterated plus construction; reports the bound if a
/// section set outgrows it.
pub fn sheafify(p: &Presheaf, site: &Pretopology, bound: usize) -> Result<Sheafified, SheafError> {
    let mut cur = p.clone();
    let mut unit = NatTrans::identity(p);
    for _ in 0..4 {
        if cur.max_size() > bound {
            return Err(SheafError::BoundExceeded(bound));
        }
        if cur.is_sheaf(site) {
            return Ok(Sheafified { sheaf: cur, unit });
        }
        let (next, eta) = plus(&cur, site)?;
        unit = eta.after(&unit);
        cur = next;
    }
    Err(SheafError::NotConverged)
}

/// The map `a(alpha): aP -> aQ`, found as the unique transformation with
/// `a(alpha) ∘ unit_P = unit_Q ∘ alpha`.
pub fn sheafify_map(alpha: &NatTrans, ap: &Sheafified, aq: &Sheafified) -> Option<NatTrans> {
    let target = aq.unit.after(alpha);
    let mut hits = sheaf_hom_set(&ap.sheaf, &aq.sheaf).into_iter().filter(|b| b.after(&ap.unit) == target);
    let first = hits.next()?;
    hits.next().is_none().then_some(first)
}

/// Joint local surjectivity: every section of the common target lifts
/// locally through some leg.
pub fn is_epi_family_sh(legs: &[(&Presheaf, &NatTrans)], target: &Presheaf, site: &Pretopology) -> bool {
    let c = site.base();
    c.objects().all(|x| {
        (0..target.sizes[x]).all(|s| {
            site.coverings_of(x).any(|cov| {
                cov.legs.iter().all(|&u| {
                    let v = target.restrict[u][s];
                    let y = c.src(u);
                    legs.iter().any(|(_, a)| a.components[y].contains(&v))
                })
            })
        })
    })
}

/// Categorical epi-family test against every sheaf of a fragment.
pub fn is_epi_family_categorical(legs: &[(&Presheaf, &NatTrans)], target: &Presheaf, test: &[Presheaf]) -> bool {
    test.iter().all(|h| {
        let homs = sheaf_hom_set(target, h);
        homs.iter().enumerate().all(|(i, b)| {
            homs[i + 1..].iter().all(|g| legs.iter().any(|(_, a)| b.after(a) != g.after(a)))
        })
    })
}

/// Sheafified representable functor, with the images of arrows.
#[derive(Debug, Clone)]
pub struct YonedaEmbedding {
    pub site: Pretopology,
    pub objects: Vec<Sheafified>,
    /// `arrows[f]` is `y(f): y(src f) -> y(dst f)`.
    pub arrows: Vec<NatTrans>,
}

pub fn yoneda_embed(site: &Pretopology, bound: usize) -> Result<YonedaEmbedding, SheafError> {
    let c = site.base_arc().clone();
    let objects = c
        .objects()
        .map(|x| sheafify(&Presheaf::representable(c.clone(), x), site, bound))
        .collect::<Result<Vec<_>, _>>()?;
    let arrows = c
        .arrow_ids()
        .map(|f| {
            let (a, b) = (c.src(f), c.dst(f));
            // Postcomposition Hom(-, a) -> Hom(-, b).
            let post = NatTrans {
                components: c
                    .objects()
                    .map(|y| c.hom(y, a).iter().map(|&g| position(c.hom(y, b), c.comp(f, g))).collect())
                    .collect(),
            };
            sheafify_map(&post, &objects[a], &objects[b]).ok_or(SheafError::NotConverged)
        })
        .collect::<Result<Vec<_>, _>>()?;
    let y = YonedaEmbedding { site: site.clone(), objects, arrows };
    debug_assert!(y.is_functorial());
    Ok(y)
}

fn position(h: &[ArrowId], f: ArrowId) -> usize {
    h.iter().position(|&g| g == f).expect("arrow in hom-set")
}

impl YonedaEmbedding {
    pub fn sheaf(&self, x: ObjId) -> &Presheaf {
        &self.objects[x].sheaf
    }

    pub fn is_functorial(&self) -> bool {
        let c = self.site.base();
        c.objects().all(|x| self.arrows[c.id(x)] == NatTrans::identity(self.sheaf(x)))
            && c.arrow_ids().all(|f| {
                c.arrows_from(c.dst(f)).all(|g| self.arrows[c.comp(g, f)] == self.arrows[g].after(&self.arrows[f]))
            })
    }

    /// Hom-set sizes agree and the arrow map is injective on each hom-set.
    pub fn is_fully_faithful(&self) -> bool {
        let c = self.site.base();
        c.objects().all(|a| {
            c.objects().all(|b| {
                let homs = sheaf_hom_set(self.sheaf(a), self.sheaf(b));
                let mut imgs: Vec<&NatTrans> = c.hom(a, b).iter().map(|&f| &self.arrows[f]).collect();
                imgs.sort();
                imgs.dedup();
                imgs.len() == c.hom(a, b).len() && homs.len() == imgs.len()
            })
        })
    }
}

/// Pointwise pullback of `alpha: A -> C` and `beta: B -> C`, with its
/// projections.
pub fn pullback_presheaf(a: &Presheaf, b: &Presheaf, alpha: &NatTrans, beta: &NatTrans) -> (Presheaf, NatTrans, NatTrans) {
    let c = &*a.base;
    let pairs: Vec<Vec<(usize, usize)>> = c
        .objects()
        .map(|x| {
            let mut v = Vec::new();
            for i in 0..a.sizes[x] {
                for j in 0..b.sizes[x] {
                    if alpha.components[x][i] == beta.components[x][j] {
                        v.push((i, j));
                    }
                }
            }
            v
        })
        .collect();
    let sizes = pairs.iter().map(|v| v.len()).collect();
    let restrict = c
        .arrow_ids()
        .map(|f| {
            let (d, s) = (c.dst(f), c.src(f));
            pairs[d]
                .iter()
                .map(|&(i, j)| {
                    let t = (a.restrict[f][i], b.restrict[f][j]);
                    pairs[s].iter().position(|&q| q == t).expect("pullback is closed under restriction")
                })
                .collect()
        })
        .collect();
    let p = Presheaf::new(a.base.clone(), sizes, restrict).expect("pullback presheaf");
    let p1 = NatTrans { components: pairs.iter().map(|v| v.iter().map(|q| q.0).collect()).collect() };
    let p2 = NatTrans { components: pairs.iter().map(|v| v.iter().map(|q| q.1).collect()).collect() };
    (p, p1, p2)
}

/// Comparison map into a pointwise pullback induced by two legs.
pub fn pair_into_pullback(p1: &NatTrans, p2: &NatTrans, l1: &NatTrans, l2: &NatTrans) -> Option<NatTrans> {
    let components = l1
        .components
        .iter()
        .zip(&l2.components)
        .enumerate()
        .map(|(x, (c1, c2))| {
            c1.iter()
                .zip(c2)
                .map(|(&i, &j)| (0..p1.components[x].len()).find(|&k| p1.components[x][k] == i && p2.components[x][k] == j))
                .collect::<Option<Vec<_>>>()
        })
        .collect::<Option<Vec<_>>>()?;
    Some(NatTrans { components })
}

/// Enumerates presheaves with all section sets of size at most `max`,
/// keeping those accepted by `keep`. Sheaf-condition pruning is applied
/// per covering as soon as its data is fixed when `site` is given.
pub fn enumerate_presheaves(base: &Arc<FinCategory>, max: usize, site: Option<&Pretopology>) -> Vec<Presheaf> {
    let c = &**base;
    let n = c.n_objects();
    // Arrows by the last object (in id order) they touch, non-composite first.
    let mut by_obj: Vec<Vec<ArrowId>> = vec![Vec::new(); n];
    let factor_count = |a: ArrowId| {
        c.arrow_ids()
            .filter(|&h| !c.is_identity(h) && h != a && c.src(h) == c.src(a))
            .flat_map(|h| c.arrows_from(c.dst(h)).map(move |g| (g, h)))
            .filter(|&(g, h)| !c.is_identity(g) && g != a && c.comp(g, h) == a)
            .count()
    };
    for a in c.arrow_ids() {
        by_obj[c.src(a).max(c.dst(a))].push(a);
    }
    for list in &mut by_obj {
        list.sort_by_key(|&a| (factor_count(a), a));
    }
    let coverings: Vec<Vec<Sink>> = match site {
        None => vec![Vec::new(); n],
        Some(p) => {
            let mut v = vec![Vec::new(); n];
            for s in p.coverings() {
                let mut last = s.apex;
                for &u in &s.legs {
                    last = last.max(c.src(u));
                }
                for &u in &s.legs {
                    for &w in &s.legs {
                        if let Some(sp) = c.pullback(u, w) {
                            last = last.max(sp.apex);
                        }
                    }
                }
                v[last].push(s.clone());
            }
            v
        }
    };
    let mut st = EnumState {
        c,
        sizes: vec![0; n],
        restrict: vec![Vec::new(); c.n_arrows()],
        assigned: vec![false; c.n_arrows()],
        out: Vec::new(),
        base: base.clone(),
    };
    enum_object(&mut st, &by_obj, &coverings, max, 0);
    st.out
}

struct EnumState<'a> {
    c: &'a FinCategory,
    base: Arc<FinCategory>,
    sizes: Vec<usize>,
    restrict: Vec<Vec<usize>>,
    assigned: Vec<bool>,
    out: Vec<Presheaf>,
}

fn enum_object(st: &mut EnumState, by_obj: &[Vec<ArrowId>], coverings: &[Vec<Sink>], max: usize, x: usize) {
    if x == st.c.n_objects() {
        let p = Presheaf::new(st.base.clone(), st.sizes.clone(), st.restrict.clone()).expect("enumerated presheaf is functorial");
        st.out.push(p);
        return;
    }
    for k in 0..=max {
        st.sizes[x] = k;
        enum_arrow(st, by_obj, coverings, max, x, 0);
    }
}

fn enum_arrow(st: &mut EnumState, by_obj: &[Vec<ArrowId>], coverings: &[Vec<Sink>], max: usize, x: usize, i: usize) {
    let c = st.c;
    if i == by_obj[x].len() {
        // All data on objects 0..=x fixed: check the coverings that live there.
        let partial = PartialSheaf { c, sizes: &st.sizes, restrict: &st.restrict };
        if coverings[x].iter().all(|s| partial.sheaf_condition(s)) {
            enum_object(st, by_obj, coverings, max, x + 1);
        }
        return;
    }
    let a = by_obj[x][i];
    let (d, s) = (c.dst(a), c.src(a));
    let (m, k) = (st.sizes[d], st.sizes[s]);
    let forced: Option<Vec<usize>> = if c.is_identity(a) {
        Some((0..m).collect())
    } else {
        c.arrow_ids()
            .filter(|&h| st.assigned[h] && c.src(h) == s && h != a)
            .flat_map(|h| c.arrows_from(c.dst(h)).map(move |g| (g, h)))
            .find(|&(g, h)| st.assigned[g] && g != a && c.comp(g, h) == a)
            .map(|(g, h)| (0..m).map(|v| st.restrict[h][st.restrict[g][v]]).collect())
    };
    let candidates: Vec<Vec<usize>> = match forced {
        Some(f) => vec![f],
        None => {
            if m > 0 && k == 0 {
                return;
            }
            let total = k.pow(m as u32);
            (0..total.max(1))
                .filter(|&code| m > 0 || code == 0)
                .map(|code| {
                    let mut v = code;
                    (0..m)
                        .map(|_| {
                            let r = v % k;
                            v /= k;
                            r
                        })
                        .collect()
                })
                .collect()
        }
    };
    for cand in candidates {
        st.restrict[a] = cand;
        st.assigned[a] = true;
        if composites_consistent(st, a) {
            enum_arrow(st, by_obj, coverings, max, x, i + 1);
        }
        st.assigned[a] = false;
    }
    st.restrict[a] = Vec::new();
}

// Every composite among assigned arrows that involves `a` is respected.
fn composites_consistent(st: &EnumState, a: ArrowId) -> bool {
    let c = st.c;
    c.arrow_ids().filter(|&f| st.assigned[f]).all(|f| {
        c.arrows_from(c.dst(f)).filter(|&g| st.assigned[g]).all(|g| {
            let gf = c.comp(g, f);
            (g != a && f != a && gf != a)
                || !st.assigned[gf]
                || (0..st.sizes[c.dst(g)]).all(|v| st.restrict[gf][v] == st.restrict[f][st.restrict[g][v]])
        })
    })
}

struct PartialSheaf<'a> {
    c: &'a FinCategory,
    sizes: &'a [usize],
    restrict: &'a [Vec<usize>],
}

impl PartialSheaf<'_> {
    fn sheaf_condition(&self, s: &Sink) -> bool {
        let c = self.c;
        let legs: Vec<ArrowId> = s.legs.iter().copied().collect();
        let mut pairs = Vec::new();
        for i in 0..legs.len() {
            for j in i..legs.len() {
                match c.pullback(legs[i], legs[j]) {
                    Some(sp) => pairs.push((i, j, sp.p1, sp.p2)),
                    None => return false,
                }
            }
        }
        let mut count = 0usize;
        let mut cur = Vec::new();
        fn rec(ps: &PartialSheaf, legs: &[ArrowId], pairs: &[(usize, usize, ArrowId, ArrowId)], cur: &mut Vec<usize>, count: &mut usize) {
            let k = cur.len();
            if k == legs.len() {
                *count += 1;
                return;
            }
            for x in 0..ps.sizes[ps.c.src(legs[k])] {
                cur.push(x);
                if pairs
                    .iter()
                    .filter(|&&(_, j, _, _)| j == k)
                    .all(|&(i, j, p1, p2)| ps.restrict[p1][cur[i]] == ps.restrict[p2][cur[j]])
                {
                    rec(ps, legs, pairs, cur, count);
                }
                cur.pop();
            }
        }
        rec(self, &legs, &pairs, &mut cur, &mut count);
        if count != self.sizes[s.apex] {
            return false;
        }
        let mut fams: Vec<Vec<usize>> =
            (0..self.sizes[s.apex]).map(|x| legs.iter().map(|&u| self.restrict[u][x]).collect()).collect();
        fams.sort();
        fams.dedup();
        fams.len() == count
    }
}

/// Sheaves with all section sets of size at most `bound`, one per
/// isomorphism class.
pub fn enumerate_sheaves(site: &Pretopology, bound: usize) -> Vec<Presheaf> {
    let all = enumerate_presheaves(site.base_arc(), bound, Some(site));
    dedup_iso(all.into_iter().filter(|p| p.is_sheaf(site)).collect())
}

pub fn dedup_iso(all: Vec<Presheaf>) -> Vec<Presheaf> {
    let mut out: Vec<Presheaf> = Vec::new();
    for p in all {
        if !out.iter().any(|q| find_iso(q, &p).is_some()) {
            out.push(p);
        }
    }
    out
}

/// A bounded sheaf universe: sheaves up to isomorphism with all
/// transformations between them, as a finite category.
#[derive(Debug, Clone)]
pub struct SheafFragment {
    pub site: Pretopology,
    pub bound: usize,
    pub sheaves: Vec<Presheaf>,
    pub category: Arc<FinCategory>,
    /// `arrows[f]` is the transformation underlying arrow `f` of `category`.
    pub arrows: Vec<NatTrans>,
}

impl SheafFragment {
    /// All sheaves within the bound.
    pub fn enumerate(site: &Pretopology, bound: usize) -> Self {
        Self::from_sheaves(site, bound, enumerate_sheaves(site, bound))
    }

    pub fn from_sheaves(site: &Pretopology, bound: usize, sheaves: Vec<Presheaf>) -> Self {
        let mut raw = RawCategory::new();
        let mut arrows = Vec::new();
        let mut index: HashMap<(usize, usize, NatTrans), String> = HashMap::new();
        for (i, _) in sheaves.iter().enumerate() {
            raw.object(format!("F{i}"));
        }
        for (i, a) in sheaves.iter().enumerate() {
            for (j, b) in sheaves.iter().enumerate() {
                for (k, t) in sheaf_hom_set(a, b).into_iter().enumerate() {
                    let name = format!("F{i}>F{j}#{k}");
                    raw.arrow(name.clone(), format!("F{i}"), format!("F{j}"));
                    if i == j && t == NatTrans::identity(a) {
                        raw.identities.insert(format!("F{i}"), name.clone());
                    }
                    index.insert((i, j, t.clone()), name);
                    arrows.push((i, j, t));
                }
            }
        }
        for (i, j, f) in &arrows {
            for (j2, k, g) in &arrows {
                if j2 == j {
                    let gf = g.after(f);
                    raw.compose(index[&(*j, *k, g.clone())].clone(), index[&(*i, *j, f.clone())].clone(), index[&(*i, *k, gf)].clone());
                }
            }
        }
        let category = Arc::new(raw.build().expect("sheaf fragment is a category"));
        SheafFragment { site: site.clone(), bound, sheaves, category, arrows: arrows.into_iter().map(|t| t.2).collect() }
    }

    /// Object of the fragment isomorphic to `p`.
    pub fn locate(&self, p: &Presheaf) -> Option<ObjId> {
        self.sheaves.iter().position(|q| find_iso(q, p).is_some())
    }

    /// Arrow of the fragment between located objects matching `t` up to the
    /// chosen isomorphisms.
    pub fn locate_arrow(&self, src: &Presheaf, dst: &Presheaf, t: &NatTrans) -> Option<ArrowId> {
        let (i, j) = (self.locate(src)?, self.locate(dst)?);
        let si = find_iso(&self.sheaves[i], src)?;
        let dj = find_iso(dst, &self.sheaves[j])?;
        let moved = dj.after(t).after(&si);
        self.category.hom(i, j).iter().copied().find(|&f| self.arrows[f] == moved)
    }

    /// Componentwise injective transformations are the monos of sheaves.
    pub fn is_mono(&self, f: ArrowId) -> bool {
        self.arrows[f].components.iter().all(|comp| {
            let mut v = comp.clone();
            v.sort_unstable();
            v.dedup();
            v.len() == comp.len()
        })
    }

    /// Whether the legs of `s` are jointly locally surjective.
    pub fn is_epi_sink(&self, s: &Sink) -> bool {
        let legs: Vec<(&Presheaf, &NatTrans)> =
            s.legs.iter().map(|&u| (&self.sheaves[self.category.src(u)], &self.arrows[u])).collect();
        is_epi_family_sh(&legs, &self.sheaves[s.apex], &self.site)
    }

    /// Pretopology of jointly epi families of monos.
    pub fn mono_site(&self) -> Pretopology {
        let c = &*self.category;
        let mut coverings = Vec::new();
        for x in c.objects() {
            let monos: Vec<ArrowId> = c.arrows_into(x).filter(|&f| self.is_mono(f)).collect();
            coverings.extend(sinks_from(x, &monos).into_iter().filter(|s| self.is_epi_sink(s)));
        }
        Pretopology::new(self.category.clone(), coverings)
    }

    /// Object and arrow maps of the sheafified Yoneda functor into the
    /// fragment, if every image lies within it.
    pub fn yoneda_functor(&self, y: &YonedaEmbedding) -> Option<Diagram> {
        let c = y.site.base();
        let objects: Vec<ObjId> = c.objects().map(|x| self.locate(y.sheaf(x))).collect::<Option<_>>()?;
        let arrows: Vec<ArrowId> = c
            .arrow_ids()
            .map(|f| self.locate_arrow(y.sheaf(c.src(f)), y.sheaf(c.dst(f)), &y.arrows[f]))
            .collect::<Option<_>>()?;
        Diagram::new(c.clone(), objects, arrows, &self.category).ok()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    #[test]
    fn representables_on_disc2() {
        let site = fixtures::disc2_site();
        let c = site.base_arc().clone();
        let top = Presheaf::representable(c.clone(), c.obj("T").unwrap());
        assert!(top.sizes().iter().all(|&n| n == 1));
        let y = yoneda_embed(&site, 3).unwrap();
        assert!(y.is_functorial());
        assert!(y.sheaf(c.obj("T").unwrap()).sizes().iter().all(|&n| n == 1));
    }

    #[test]
    fn arrow_site_representables_collapse() {
        let site = fixtures::arrow_site();
        let y = yoneda_embed(&site, 3).unwrap();
        let t = Presheaf::terminal(site.base_arc().clone());
        assert!(find_iso(y.sheaf(0), y.sheaf(1)).is_some());
        assert!(find_iso(y.sheaf(0), &t).is_some());
        assert!(!y.is_fully_faithful());
    }

    #[test]
    fn terminal_category_yoneda() {
        let site = fixtures::terminal_site();
        let y = yoneda_embed(&site, 1).unwrap();
        assert_eq!(y.sheaf(0).sizes(), &[1]);
    }

    #[test]
    fn sheaf_is_fixed_by_sheafification() {
        let site = fixtures::disc2_site();
        for f in enumerate_sheaves(&site, 2) {
            let a = sheafify(&f, &site, 2).unwrap();
            assert!(a.unit.is_iso(&f, &a.sheaf));
        }
    }

    #[test]
    fn arrow_site_sheafification_forces_b() {
        let site = fixtures::arrow_site();
        let c = site.base_arc().clone();
        // P(b) = 2, P(a) = 1.
        let (a, b) = (c.obj("a").unwrap(), c.obj("b").unwrap());
        let mut sizes = vec![0; 2];
        sizes[a] = 1;
        sizes[b] = 2;
        let restrict = c.arrow_ids().map(|f| if c.is_identity(f) { (0..sizes[c.dst(f)]).collect() } else { vec![0, 0] }).collect();
        let p = Presheaf::new(c.clone(), sizes, restrict).unwrap();
        let s = sheafify(&p, &site, 3).unwrap();
        assert_eq!(s.sheaf.size(b), 1);
        assert!(s.unit.is_natural(&p, &s.sheaf));
    }

    #[test]
    fn disc2_sheafification_of_big_bottom() {
        let site = fixtures::disc2_site();
        let c = site.base_arc().clone();
        let bot = c.obj("B").unwrap();
        let mut sizes = vec![1; 4];
        sizes[bot] = 2;
        let restrict = c
            .arrow_ids()
            .map(|f| if c.is_identity(f) { (0..sizes[c.dst(f)]).collect() } else { vec![0; sizes[c.dst(f)]] })
            .collect();
        let p = Presheaf::new(c, sizes, restrict).unwrap();
        let s = sheafify(&p, &site, 3).unwrap();
        assert_eq!(s.sheaf.size(bot), 1);
    }

    #[test]
    fn bound_is_reported() {
        let site = fixtures::disc2_site();
        let c = site.base_arc().clone();
        let p = Presheaf::representable(c, 0).product(&Presheaf::terminal(site.base_arc().clone()));
        let big = p.product(&p);
        assert!(matches!(sheafify(&big, &site, 0), Err(SheafError::BoundExceeded(0))));
    }

    #[test]
    fn hom_set_examples() {
        let site = fixtures::disc2_site();
        let c = site.base_arc().clone();
        let y = yoneda_embed(&site, 3).unwrap();
        let t = Presheaf::terminal(c.clone());
        let (l, r) = (c.obj("l").unwrap(), c.obj("r").unwrap());
        for g in enumerate_sheaves(&site, 2) {
            assert_eq!(sheaf_hom_set(&g, &t).len(), 1);
            assert_eq!(sheaf_hom_set(y.sheaf(l), &g).len(), g.size(l));
        }
        assert!(sheaf_hom_set(y.sheaf(l), y.sheaf(r)).is_empty());
    }

    #[test]
    fn epi_family_examples() {
        let site = fixtures::disc2_site();
        let c = site.base_arc().clone();
        let y = yoneda_embed(&site, 3).unwrap();
        let a = |n| c.arrow(n).unwrap();
        let (l, r, t) = (c.obj("l").unwrap(), c.obj("r").unwrap(), c.obj("T").unwrap());
        let legs = [(y.sheaf(l), &y.arrows[a("l->T")]), (y.sheaf(r), &y.arrows[a("r->T")])];
        assert!(is_epi_family_sh(&legs, y.sheaf(t), &site));
        let id = NatTrans::identity(y.sheaf(t));
        assert!(is_epi_family_sh(&[(y.sheaf(t), &id)], y.sheaf(t), &site));
        let b = c.obj("B").unwrap();
        let from_empty = sheaf_hom_set(y.sheaf(b), y.sheaf(t)).remove(0);
        assert!(!is_epi_family_sh(&[(y.sheaf(b), &from_empty)], y.sheaf(t), &site));
    }

    #[test]
    fn epi_family_agrees_with_categorical_definition() {
        let site = fixtures::disc2_site();
        let sheaves = enumerate_sheaves(&site, 2);
        for g in &sheaves {
            for f in &sheaves {
                for alpha in sheaf_hom_set(f, g) {
                    let legs = [(f, &alpha)];
                    assert_eq!(
                        is_epi_family_sh(&legs, g, &site),
                        is_epi_family_categorical(&legs, g, &sheaves),
                    );
                }
            }
        }
    }

    #[test]
    fn disc2_sheaves_are_pairs_of_sets() {
        // Oracle: a sheaf on disc2 is determined by F(l), F(r) with
        // F(T) = F(l) x F(r) and F(B) = 1.
        let site = fixtures::disc2_site();
        let sheaves = enumerate_sheaves(&site, 3);
        let c = site.base();
        let (l, r) = (c.obj("l").unwrap(), c.obj("r").unwrap());
        let mut got: Vec<(usize, usize)> = sheaves.iter().map(|f| (f.size(l), f.size(r))).collect();
        got.sort();
        let mut want = Vec::new();
        for a in 0..=3 {
            for b in 0..=3 {
                if a * b <= 3 {
                    want.push((a, b));
                }
            }
        }
        assert_eq!(got, want);
    }

    #[test]
    fn chain3_sheaves_are_maps_up_to_iso() {
        // Oracle: sheaves on 0 < u < 1 are maps F(1) -> F(u) up to
        // isomorphism, F(0) = 1. Count orbits by fibre-size multisets.
        let site = fixtures::chain3_site();
        let sheaves = enumerate_sheaves(&site, 3);
        let mut want = 0;
        for k in 0..=3usize {
            for m in 0..=3usize {
                // maps m -> k up to iso of both sides: multisets of k fibre
                // sizes summing to m.
                let mut parts = Vec::new();
                fn go(k: usize, m: usize, maxp: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
                    if k == 0 {
                        if m == 0 {
                            out.push(cur.clone());
                        }
                        return;
                    }
                    for p in (0..=m.min(maxp)).rev() {
                        cur.push(p);
                        go(k - 1, m - p, p, cur, out);
                        cur.pop();
                    }
                }
                go(k, m, m, &mut Vec::new(), &mut parts);
                want += parts.len();
            }
        }
        assert_eq!(sheaves.len(), want);
    }

    #[test]
    fn fragment_is_a_category() {
        let site = fixtures::disc2_site();
        let frag = SheafFragment::enumerate(&site, 2);
        assert_eq!(frag.category.n_objects(), frag.sheaves.len());
    }

    #[test]
    fn presheaf_json_round_trip() {
        let site = fixtures::disc2_site();
        let c = site.base_arc().clone();
        let p = Presheaf::representable(c.clone(), c.obj("l").unwrap());
        let s = p.to_json();
        let back = Presheaf::from_json(c, &s).unwrap();
        assert_eq!(back, p);
        assert_eq!(back.to_json(), s);
    }
}
