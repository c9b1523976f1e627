//! Workspace bundles: named presites, sheaves, gluons and functors read
//! from JSON files, on top of the built-in fixtures.

use std::collections::BTreeMap;
use std::path::Path;
use std::sync::Arc;

use glutos::fincat::{Diagram, FinCategory, RawCategory};
use glutos::glue::{LoadedGluon, RawGluon};
use glutos::sheafkit::{Presheaf, RawPresheaf};
use glutos::site::{Coverage, Pretopology, RawPresite, RawSink};
use glutos::{fixtures, WorkspaceError};
use serde::Deserialize;

/// A category given inline or by name from the `categories` table.
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
enum CategoryRef {
    Named(String),
    Inline(RawCategory),
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct PresiteEntry {
    category: CategoryRef,
    #[serde(default)]
    coverings: Vec<RawSink>,
    #[serde(default)]
    generate: bool,
}

#[derive(Debug, Clone, Deserialize)]
struct SheafEntry {
    site: String,
    #[serde(flatten)]
    sheaf: RawPresheaf,
}

#[derive(Debug, Clone, Deserialize)]
struct GluonEntry {
    site: String,
    #[serde(flatten)]
    gluon: RawGluon,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct FunctorEntry {
    source: String,
    target: String,
    objects: BTreeMap<String, String>,
    arrows: BTreeMap<String, String>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct Bundle {
    #[serde(default)]
    categories: BTreeMap<String, RawCategory>,
    #[serde(default)]
    presites: BTreeMap<String, PresiteEntry>,
    #[serde(default)]
    sheaves: BTreeMap<String, SheafEntry>,
    #[serde(default)]
    gluons: BTreeMap<String, GluonEntry>,
    #[serde(default)]
    functors: BTreeMap<String, FunctorEntry>,
}

pub struct Functor {
    pub source: String,
    pub target: String,
    pub diagram: Diagram,
}

pub struct Workspace {
    pub presites: BTreeMap<String, Pretopology>,
    pub sheaves: BTreeMap<String, (String, Presheaf)>,
    pub gluons: BTreeMap<String, (String, LoadedGluon)>,
    pub functors: BTreeMap<String, Functor>,
}

pub fn builtin_presites() -> BTreeMap<String, Pretopology> {
    let mut m = BTreeMap::new();
    m.insert("terminal".into(), fixtures::terminal_site());
    m.insert("arrow".into(), fixtures::arrow_site());
    m.insert("disc2".into(), fixtures::disc2_site());
    m.insert("chain3".into(), fixtures::chain3_site());
    m.insert("point".into(), fixtures::point_site());
    for n in 1..=3 {
        m.insert(format!("sets{n}"), fixtures::sets_site(n));
    }
    m
}

fn look<'a>(table: &'a BTreeMap<String, String>, key: &str) -> Result<&'a String, WorkspaceError> {
    table.get(key).ok_or_else(|| WorkspaceError::Validation(format!("no image for `{key}`")))
}

fn in_file(path: &str, what: &str, e: WorkspaceError) -> WorkspaceError {
    let tag = |s: String| format!("{path}: {what}: {s}");
    match e {
        WorkspaceError::Syntax(s) => WorkspaceError::Syntax(tag(s)),
        WorkspaceError::Validation(s) => WorkspaceError::Validation(tag(s)),
        WorkspaceError::UnresolvedName(s) => WorkspaceError::UnresolvedName(format!("{s} (in {path}: {what})")),
    }
}

impl Workspace {
    pub fn builtin() -> Self {
        Workspace { presites: builtin_presites(), sheaves: BTreeMap::new(), gluons: BTreeMap::new(), functors: BTreeMap::new() }
    }

    pub fn presite(&self, name: &str) -> Result<&Pretopology, WorkspaceError> {
        self.presites.get(name).ok_or_else(|| WorkspaceError::UnresolvedName(name.into()))
    }

    /// Adds one bundle given as text; `path` is used in error messages.
    pub fn load_str(&mut self, path: &str, text: &str) -> Result<(), WorkspaceError> {
        let bundle: Bundle = serde_json::from_str(text)
            .map_err(|e| WorkspaceError::Syntax(format!("{path}:{}:{}: {e}", e.line(), e.column())))?;
        for (name, entry) in &bundle.presites {
            let what = format!("presite `{name}`");
            if self.presites.contains_key(name) {
                return Err(in_file(path, &what, WorkspaceError::Validation("name already defined".into())));
            }
            let category = match &entry.category {
                CategoryRef::Inline(raw) => raw.clone(),
                CategoryRef::Named(c) => bundle
                    .categories
                    .get(c)
                    .cloned()
                    .ok_or_else(|| in_file(path, &what, WorkspaceError::UnresolvedName(c.clone())))?,
            };
            let raw = RawPresite { category, coverings: entry.coverings.clone(), generate: entry.generate };
            let p = Pretopology::from_raw(&raw).map_err(|e| in_file(path, &what, e))?;
            self.presites.insert(name.clone(), p);
        }
        for (name, entry) in &bundle.sheaves {
            let what = format!("sheaf `{name}`");
            let site = self.presite(&entry.site).map_err(|e| in_file(path, &what, e))?;
            let f = Presheaf::from_raw(site.base_arc().clone(), &entry.sheaf).map_err(|e| in_file(path, &what, e))?;
            self.sheaves.insert(name.clone(), (entry.site.clone(), f));
        }
        for (name, entry) in &bundle.gluons {
            let what = format!("gluon `{name}`");
            let site = self.presite(&entry.site).map_err(|e| in_file(path, &what, e))?;
            let g = entry.gluon.resolve(site.base()).map_err(|e| in_file(path, &what, e))?;
            self.gluons.insert(name.clone(), (entry.site.clone(), g));
        }
        for (name, entry) in &bundle.functors {
            let what = format!("functor `{name}`");
            let f = self.functor(entry).map_err(|e| in_file(path, &what, e))?;
            self.functors.insert(name.clone(), f);
        }
        Ok(())
    }

    fn functor(&self, entry: &FunctorEntry) -> Result<Functor, WorkspaceError> {
        let (c, d): (&Arc<FinCategory>, &Arc<FinCategory>) =
            (self.presite(&entry.source)?.base_arc(), self.presite(&entry.target)?.base_arc());
        let objects = c
            .objects()
            .map(|x| {
                let y = look(&entry.objects, c.object_name(x))?;
                d.obj(y).ok_or_else(|| WorkspaceError::UnresolvedName(y.clone()))
            })
            .collect::<Result<Vec<_>, _>>()?;
        let arrows = c
            .arrow_ids()
            .map(|f| {
                let name = c.arrow_name(f);
                let g = match entry.arrows.get(name) {
                    Some(g) => g.clone(),
                    // Identities may be left implicit.
                    None if c.id(c.src(f)) == f => d.arrow_name(d.id(objects[c.src(f)])).to_string(),
                    None => look(&entry.arrows, name)?.clone(),
                };
                d.arrow(&g).ok_or(WorkspaceError::UnresolvedName(g))
            })
            .collect::<Result<Vec<_>, _>>()?;
        let diagram = Diagram::new((**c).clone(), objects, arrows, d).map_err(|e| WorkspaceError::Validation(e.to_string()))?;
        Ok(Functor { source: entry.source.clone(), target: entry.target.clone(), diagram })
    }
}

/// Reads the built-in fixtures plus every bundle in `paths`, in order.
pub fn parse_workspace(paths: &[impl AsRef<Path>]) -> Result<Workspace, WorkspaceError> {
    let mut ws = Workspace::builtin();
    for p in paths {
        let p = p.as_ref();
        let text = std::fs::read_to_string(p).map_err(|e| WorkspaceError::Syntax(format!("{}: {e}", p.display())))?;
        ws.load_str(&p.display().to_string(), &text)?;
    }
    Ok(ws)
}

#[cfg(test)]
mod tests {
    use super::*;

    const BUNDLE: &str = r#"{
        "categories": {
            "two": {
                "objects": ["a", "b"],
                "arrows": [{"id": "1a", "src": "a", "dst": "a"}, {"id": "1b", "src": "b", "dst": "b"}, {"id": "f", "src": "a", "dst": "b"}],
                "identities": {"a": "1a", "b": "1b"}
            }
        },
        "presites": {
            "mine": {"category": "two", "coverings": [], "generate": true}
        },
        "sheaves": {
            "pt": {"site": "mine", "sections": {"a": ["*"], "b": ["*"]}, "restrictions": {"f": {"*": "*"}}}
        },
        "functors": {
            "incl": {"source": "point", "target": "disc2", "objects": {"0": "B", "1": "l"}, "arrows": {"0->1": "B->l"}}
        }
    }"#;

    #[test]
    fn bundle_loads() {
        let mut ws = Workspace::builtin();
        ws.load_str("bundle.json", BUNDLE).unwrap();
        assert_eq!(ws.presite("mine").unwrap().base().n_objects(), 2);
        assert!(ws.sheaves.contains_key("pt"));
        assert_eq!(ws.functors["incl"].target, "disc2");
        for name in ["terminal", "arrow", "disc2", "chain3"] {
            assert!(ws.presite(name).is_ok());
        }
    }

    #[test]
    fn dangling_arrow_target_is_a_validation_error() {
        let text = r#"{"presites": {"bad": {"category": {
            "objects": ["a"],
            "arrows": [{"id": "1a", "src": "a", "dst": "a"}, {"id": "g", "src": "a", "dst": "nowhere"}],
            "identities": {"a": "1a"}
        }}}}"#;
        let err = Workspace::builtin().load_str("bad.json", text).err().unwrap();
        assert!(matches!(err, WorkspaceError::Validation(_)), "{err:?}");
    }

    #[test]
    fn missing_category_name_is_unresolved() {
        let text = r#"{"presites": {"p": {"category": "ghost"}}}"#;
        let err = Workspace::builtin().load_str("p.json", text).err().unwrap();
        assert!(matches!(err, WorkspaceError::UnresolvedName(ref s) if s.starts_with("ghost")), "{err:?}");
    }

    #[test]
    fn syntax_errors_carry_line_and_column() {
        let err = Workspace::builtin().load_str("s.json", "{\n  \"presites\": [,]\n}").err().unwrap();
        match err {
            WorkspaceError::Syntax(s) => assert!(s.starts_with("s.json:2:"), "{s}"),
            e => panic!("{e:?}"),
        }
    }
}
