use std::collections::{BTreeMap, HashMap};
use std::path::Path;
use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};

use super::PolicyError;
use crate::ontology::is_declared;
use crate::ontology::vocab::{DUA_PUBLIC_HEALTH, SYN_PATIENT};
use crate::query::{Query, QueryForm};
use crate::store::Namespaces;
use crate::trust::PenaltyKind;

pub const PLACEHOLDERS: &[&str] = &[
    "userLabel",
    "custodianLabel",
    "categoryIri",
    "categoryList",
    "purposeIri",
];

/// Whose obligation a policy checks: the requesting side or the custodian.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PolicyScope {
    Recipient,
    Custodian,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct PolicyTemplate {
    pub id: String,
    pub order: u32,
    pub description: String,
    pub scope: PolicyScope,
    pub failure_penalty: Option<PenaltyKind>,
    #[serde(skip)]
    pub query_template: String,
}

/// Raw values for a template's placeholders.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct PolicyParams {
    pub user_label: String,
    pub custodian_label: String,
    pub category_iri: String,
    /// Category IRIs for `{{categoryList}}`; rendered in lexical order.
    pub category_list: Vec<String>,
    pub purpose_iri: String,
}

impl PolicyParams {
    /// Stand-in values used to check a template at registration.
    pub fn sample() -> Self {
        PolicyParams {
            user_label: "sample_user".into(),
            custodian_label: "SampleCustodian".into(),
            category_iri: SYN_PATIENT.into(),
            category_list: vec![SYN_PATIENT.into()],
            purpose_iri: DUA_PUBLIC_HEALTH.into(),
        }
    }

    fn substitutions(&self, ns: &Namespaces) -> Result<BTreeMap<&'static str, String>, PolicyError> {
        let label = |name: &str, v: &str| {
            if v.is_empty() {
                Err(PolicyError::Substitution(format!("{name} is empty")))
            } else {
                Ok(escape_string(v))
            }
        };
        let iri = |name: &str, v: &str| {
            if v.is_empty() {
                return Err(PolicyError::Substitution(format!("{name} is empty")));
            }
            crate::store::Term::iri(v).map_err(|e| PolicyError::Substitution(format!("{name}: {e}")))?;
            Ok(ns.compact(v).unwrap_or_else(|| format!("<{v}>")))
        };
        let mut list: Vec<&String> = self.category_list.iter().collect();
        list.sort();
        list.dedup();
        let rendered = list
            .iter()
            .map(|c| iri("categoryList", c).map(|c| format!("STR({c})")))
            .collect::<Result<Vec<_>, _>>()?;
        let mut m = BTreeMap::new();
        m.insert("userLabel", label("userLabel", &self.user_label)?);
        m.insert("custodianLabel", label("custodianLabel", &self.custodian_label)?);
        m.insert("categoryIri", iri("categoryIri", &self.category_iri)?);
        m.insert("purposeIri", iri("purposeIri", &self.purpose_iri)?);
        if !rendered.is_empty() {
            m.insert("categoryList", rendered.join(", "));
        }
        Ok(m)
    }
}

fn escape_string(v: &str) -> String {
    let mut out = String::with_capacity(v.len());
    for c in v.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\r' => out.push_str("\\r"),
            '\t' => out.push_str("\\t"),
            c => out.push(c),
        }
    }
    out
}

/// Placeholder names in order of appearance, with their byte spans.
fn placeholders(text: &str) -> Vec<(usize, usize, &str)> {
    let mut out = Vec::new();
    let mut rest = 0;
    while let Some(start) = text[rest..].find("{{").map(|i| i + rest) {
        let Some(end) = text[start + 2..].find("}}").map(|i| i + start + 2) else {
            break;
        };
        out.push((start, end + 2, &text[start + 2..end]));
        rest = end + 2;
    }
    out
}

impl PolicyTemplate {
    pub fn placeholders(&self) -> Vec<&str> {
        let mut names: Vec<&str> = placeholders(&self.query_template)
            .into_iter()
            .map(|(_, _, n)| n)
            .collect();
        names.sort();
        names.dedup();
        names
    }

    /// Query text with every placeholder replaced.
    pub fn instantiate(&self, params: &PolicyParams, ns: &Namespaces) -> Result<String, PolicyError> {
        let subs = params.substitutions(ns)?;
        let text = &self.query_template;
        let mut out = String::with_capacity(text.len() + 64);
        let mut last = 0;
        for (start, end, name) in placeholders(text) {
            let value = subs.get(name).ok_or_else(|| {
                if PLACEHOLDERS.contains(&name) {
                    PolicyError::Substitution(format!("no value for {{{{{name}}}}}"))
                } else {
                    PolicyError::Substitution(format!("unknown placeholder {{{{{name}}}}}"))
                }
            })?;
            out.push_str(&text[last..start]);
            out.push_str(value);
            last = end;
        }
        out.push_str(&text[last..]);
        Ok(out)
    }

    /// Instantiates and parses; the result is always an ASK query.
    pub fn compile(&self, params: &PolicyParams, ns: &Namespaces) -> Result<Query, PolicyError> {
        let text = self.instantiate(params, ns)?;
        let q = Query::parse_with(&text, ns).map_err(|e| PolicyError::Template {
            id: self.id.clone(),
            message: e.to_string(),
        })?;
        if q.form != QueryForm::Ask {
            return Err(PolicyError::Template {
                id: self.id.clone(),
                message: format!("expected an ASK query, got {}", q.form),
            });
        }
        Ok(q)
    }

    /// Reads `<stem>.json` metadata and its `<stem>.rq` query.
    pub fn load(sidecar: &Path) -> Result<PolicyTemplate, PolicyError> {
        let io = |e: std::io::Error| PolicyError::Io(format!("{}: {e}", sidecar.display()));
        let meta = std::fs::read_to_string(sidecar).map_err(io)?;
        let query = std::fs::read_to_string(sidecar.with_extension("rq")).map_err(io)?;
        PolicyTemplate::from_parts(&meta, &query)
    }

    pub fn from_parts(sidecar_json: &str, query: &str) -> Result<PolicyTemplate, PolicyError> {
        let mut t: PolicyTemplate =
            serde_json::from_str(sidecar_json).map_err(|e| PolicyError::Io(format!("policy metadata: {e}")))?;
        t.query_template = query.to_string();
        Ok(t)
    }
}

const BUILTIN: &[(&str, &str)] = &[
    (
        include_str!("../../policies/dua-exists.json"),
        include_str!("../../policies/dua-exists.rq"),
    ),
    (
        include_str!("../../policies/requested-data-in-dua.json"),
        include_str!("../../policies/requested-data-in-dua.rq"),
    ),
    (
        include_str!("../../policies/custodian-has-category.json"),
        include_str!("../../policies/custodian-has-category.rq"),
    ),
    (
        include_str!("../../policies/purpose-permitted.json"),
        include_str!("../../policies/purpose-permitted.rq"),
    ),
];

/// Ordered set of policy templates.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PolicyRegistry {
    policies: Vec<PolicyTemplate>,
    namespaces: Namespaces,
    compiled: QueryCache,
}

const QUERY_CACHE_CAPACITY: usize = 4096;

/// Parsed queries by policy id and parameters. Requests repeat the same few
/// parameter sets, and parsing dominates evaluation on small graphs. Cleared
/// wholesale when full; clones start empty.
#[derive(Debug, Default)]
struct QueryCache(Mutex<HashMap<(String, PolicyParams), Arc<Query>>>);

impl Clone for QueryCache {
    fn clone(&self) -> Self {
        QueryCache::default()
    }
}

impl PartialEq for QueryCache {
    fn eq(&self, _: &Self) -> bool {
        true
    }
}

impl Eq for QueryCache {}

impl Default for PolicyRegistry {
    fn default() -> Self {
        PolicyRegistry::builtin()
    }
}

impl PolicyRegistry {
    pub fn empty() -> Self {
        PolicyRegistry {
            policies: Vec::new(),
            namespaces: Namespaces::default(),
            compiled: QueryCache::default(),
        }
    }

    /// The four shipped policies.
    pub fn builtin() -> Self {
        let mut reg = PolicyRegistry::empty();
        for (meta, query) in BUILTIN {
            let t = PolicyTemplate::from_parts(meta, query).expect("builtin metadata is valid");
            reg.register(t).expect("builtin policies are valid");
        }
        reg
    }

    /// Every `*.json` sidecar in `dir` with its `.rq` query.
    pub fn from_dir(dir: &Path) -> Result<Self, PolicyError> {
        let mut reg = PolicyRegistry::empty();
        let entries = std::fs::read_dir(dir).map_err(|e| PolicyError::Io(format!("{}: {e}", dir.display())))?;
        let mut sidecars: Vec<_> = entries
            .filter_map(Result::ok)
            .map(|e| e.path())
            .filter(|p| p.extension().is_some_and(|x| x == "json"))
            .collect();
        sidecars.sort();
        for p in sidecars {
            reg.register(PolicyTemplate::load(&p)?)?;
        }
        Ok(reg)
    }

    /// Adds a template after checking it compiles and names only declared
    /// vocabulary.
    pub fn register(&mut self, t: PolicyTemplate) -> Result<(), PolicyError> {
        if self.policies.iter().any(|p| p.id == t.id) {
            return Err(PolicyError::Duplicate(t.id));
        }
        if let Some(bad) = t.placeholders().into_iter().find(|n| !PLACEHOLDERS.contains(n)) {
            return Err(PolicyError::Template {
                id: t.id.clone(),
                message: format!("unknown placeholder {{{{{bad}}}}}"),
            });
        }
        let q = t.compile(&PolicyParams::sample(), &self.namespaces)?;
        if let Some(iri) = q.iris().into_iter().find(|i| !is_declared(i)) {
            return Err(PolicyError::Undeclared { id: t.id.clone(), iri });
        }
        let at = self.policies.partition_point(|p| (p.order, &p.id) <= (t.order, &t.id));
        self.policies.insert(at, t);
        Ok(())
    }

    pub fn policies(&self) -> &[PolicyTemplate] {
        &self.policies
    }

    pub fn get(&self, id: &str) -> Option<&PolicyTemplate> {
        self.policies.iter().find(|p| p.id == id)
    }

    pub fn namespaces(&self) -> &Namespaces {
        &self.namespaces
    }

    /// [`PolicyTemplate::compile`], memoized.
    pub(crate) fn compiled(&self, t: &PolicyTemplate, params: &PolicyParams) -> Result<Arc<Query>, PolicyError> {
        let key = (t.id.clone(), params.clone());
        if let Some(q) = self.compiled.0.lock().expect("cache lock").get(&key) {
            return Ok(q.clone());
        }
        let q = Arc::new(t.compile(params, &self.namespaces)?);
        let mut cache = self.compiled.0.lock().expect("cache lock");
        if cache.len() >= QUERY_CACHE_CAPACITY {
            cache.clear();
        }
        cache.insert(key, q.clone());
        Ok(q)
    }
}
