use std::fmt;

use crate::data::schema::{AttrId, Schema, ValueId};
use crate::error::{Error, Result};

/// One conjunct: the row's value for `attr` must lie in `values`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Clause {
    attr: AttrId,
    values: Vec<ValueId>,
}

impl Clause {
    pub fn attr(&self) -> AttrId {
        self.attr
    }

    /// Sorted, deduplicated value subset.
    pub fn values(&self) -> &[ValueId] {
        &self.values
    }

    #[inline]
    pub fn admits(&self, value: u32) -> bool {
        self.values.binary_search(&ValueId(value)).is_ok()
    }
}

/// A conjunction of per-attribute value-subset predicates.
///
/// The empty query (no clauses) is satisfied by every row. Clauses are kept
/// sorted by attribute so structurally equal queries compare equal.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash)]
pub struct Query {
    clauses: Vec<Clause>,
}

impl Query {
    pub fn empty() -> Self {
        Self::default()
    }

    pub fn single(attr: AttrId, values: &[ValueId]) -> Result<Self> {
        Self::empty().with(attr, values)
    }

    /// Adds the clause `attr ∈ values`. The attribute must not already be
    /// constrained and the subset must be non-empty.
    pub fn with(mut self, attr: AttrId, values: &[ValueId]) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::param(format!(
                "clause on attribute {attr} has an empty value subset"
            )));
        }
        let pos = match self.clauses.binary_search_by_key(&attr, |c| c.attr) {
            Ok(_) => {
                return Err(Error::param(format!(
                    "attribute {attr} is already constrained"
                )))
            }
            Err(pos) => pos,
        };
        let mut values = values.to_vec();
        values.sort_unstable();
        values.dedup();
        self.clauses.insert(pos, Clause { attr, values });
        Ok(self)
    }

    /// Conjunction of two queries. Clauses on a shared attribute are
    /// intersected; an empty intersection yields an unsatisfiable clause.
    pub fn and(&self, other: &Query) -> Query {
        let mut out = self.clauses.clone();
        for c in &other.clauses {
            match out.binary_search_by_key(&c.attr, |x| x.attr) {
                Ok(i) => {
                    let mine = &out[i].values;
                    let both = mine
                        .iter()
                        .copied()
                        .filter(|v| c.values.binary_search(v).is_ok())
                        .collect();
                    out[i].values = both;
                }
                Err(i) => out.insert(i, c.clone()),
            }
        }
        Query { clauses: out }
    }

    pub fn clauses(&self) -> &[Clause] {
        &self.clauses
    }

    pub fn is_empty(&self) -> bool {
        self.clauses.is_empty()
    }

    pub fn constrains(&self, attr: AttrId) -> bool {
        self.clauses.iter().any(|c| c.attr == attr)
    }

    pub fn clause(&self, attr: AttrId) -> Option<&Clause> {
        self.clauses.iter().find(|c| c.attr == attr)
    }

    #[inline]
    pub fn matches(&self, tuple: &[u32]) -> bool {
        self.clauses
            .iter()
            .all(|c| tuple.get(c.attr.0 as usize).is_some_and(|&v| c.admits(v)))
    }

    /// Checks every clause against the schema, naming the first bad one.
    pub fn validate(&self, schema: &Schema) -> Result<()> {
        for c in &self.clauses {
            let attr = schema.attribute(c.attr).ok_or_else(|| Error::Domain {
                clause: format!("{}=...", c.attr),
                reason: format!("unknown attribute {}", c.attr),
            })?;
            if let Some(bad) = c.values.iter().find(|v| v.0 as usize >= attr.len()) {
                return Err(Error::Domain {
                    clause: format!("{}=#{}", attr.name(), bad.0),
                    reason: format!("value #{} is not in the domain of `{}`", bad.0, attr.name()),
                });
            }
        }
        Ok(())
    }

    /// Parses `Attr=v1|v2; Other=w`. An empty string or `*` is the empty query.
    pub fn parse(schema: &Schema, text: &str) -> Result<Self> {
        let text = text.trim();
        let mut q = Query::empty();
        if text.is_empty() || text == "*" {
            return Ok(q);
        }
        for part in text.split(';').map(str::trim).filter(|p| !p.is_empty()) {
            let (name, vals) = part.split_once('=').ok_or_else(|| Error::Domain {
                clause: part.to_string(),
                reason: "expected `attribute=value[|value...]`".into(),
            })?;
            let attr = schema.attr_id(name.trim())?;
            let ids = vals
                .split('|')
                .map(|v| schema.value_id(attr, v.trim()))
                .collect::<Result<Vec<_>>>()?;
            q = q.with(attr, &ids).map_err(|e| Error::Domain {
                clause: part.to_string(),
                reason: e.to_string(),
            })?;
        }
        Ok(q)
    }

    pub fn display<'a>(&'a self, schema: &'a Schema) -> QueryDisplay<'a> {
        QueryDisplay {
            query: self,
            schema,
        }
    }
}

pub struct QueryDisplay<'a> {
    query: &'a Query,
    schema: &'a Schema,
}

impl fmt::Display for QueryDisplay<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.query.is_empty() {
            return f.write_str("*");
        }
        for (i, c) in self.query.clauses.iter().enumerate() {
            if i > 0 {
                f.write_str("; ")?;
            }
            let attr = self.schema.attribute(c.attr);
            write!(f, "{}=", attr.map_or("?", |a| a.name()))?;
            for (j, v) in c.values.iter().enumerate() {
                if j > 0 {
                    f.write_str("|")?;
                }
                f.write_str(attr.and_then(|a| a.label(*v)).unwrap_or("?"))?;
            }
        }
        Ok(())
    }
}
