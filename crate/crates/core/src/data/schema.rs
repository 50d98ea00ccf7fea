use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Index of an attribute within a [`Schema`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct AttrId(pub u16);

/// Index of a value within one attribute's domain.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ValueId(pub u32);

impl fmt::Display for AttrId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{}", self.0)
    }
}

#[derive(Clone, Debug)]
pub struct Attribute {
    name: String,
    values: Vec<String>,
    lookup: HashMap<String, ValueId>,
}

impl Attribute {
    pub fn new(name: impl Into<String>, values: Vec<String>) -> Result<Self> {
        let name = name.into();
        if values.is_empty() {
            return Err(Error::param(format!(
                "attribute `{name}` has an empty domain"
            )));
        }
        let mut lookup = HashMap::with_capacity(values.len());
        for (i, v) in values.iter().enumerate() {
            if lookup.insert(v.clone(), ValueId(i as u32)).is_some() {
                return Err(Error::param(format!(
                    "attribute `{name}` lists value `{v}` twice"
                )));
            }
        }
        Ok(Self {
            name,
            values,
            lookup,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn values(&self) -> &[String] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn value_id(&self, label: &str) -> Option<ValueId> {
        self.lookup.get(label).copied()
    }

    pub fn label(&self, id: ValueId) -> Option<&str> {
        self.values.get(id.0 as usize).map(String::as_str)
    }

    pub fn ids(&self) -> impl Iterator<Item = ValueId> + '_ {
        (0..self.values.len() as u32).map(ValueId)
    }
}

/// Public metadata of a dataset: attribute names and their finite domains.
///
/// This is everything an analyst is allowed to know without querying.
#[derive(Clone, Debug)]
pub struct Schema {
    attributes: Vec<Attribute>,
}

impl Schema {
    pub fn new(attributes: Vec<Attribute>) -> Result<Self> {
        if attributes.is_empty() {
            return Err(Error::param("a schema needs at least one attribute"));
        }
        if attributes.len() > u16::MAX as usize {
            return Err(Error::param("too many attributes"));
        }
        for (i, a) in attributes.iter().enumerate() {
            if attributes[..i].iter().any(|b| b.name == a.name) {
                return Err(Error::param(format!("duplicate attribute `{}`", a.name)));
            }
        }
        Ok(Self { attributes })
    }

    pub fn attributes(&self) -> &[Attribute] {
        &self.attributes
    }

    pub fn len(&self) -> usize {
        self.attributes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.attributes.is_empty()
    }

    pub fn attribute(&self, id: AttrId) -> Option<&Attribute> {
        self.attributes.get(id.0 as usize)
    }

    pub fn attr_id(&self, name: &str) -> Result<AttrId> {
        self.attributes
            .iter()
            .position(|a| a.name == name)
            .map(|i| AttrId(i as u16))
            .ok_or_else(|| Error::Domain {
                clause: name.to_string(),
                reason: format!("unknown attribute `{name}`"),
            })
    }

    /// Resolves `attribute=value` to ids, naming the clause on failure.
    pub fn value_id(&self, attr: AttrId, label: &str) -> Result<ValueId> {
        let a = self.attribute(attr).ok_or_else(|| Error::Domain {
            clause: format!("{attr}={label}"),
            reason: format!("unknown attribute {attr}"),
        })?;
        a.value_id(label).ok_or_else(|| Error::Domain {
            clause: format!("{}={label}", a.name),
            reason: format!("`{label}` is not in the domain of `{}`", a.name),
        })
    }

    pub fn value_ids(&self, attr: AttrId, labels: &[&str]) -> Result<Vec<ValueId>> {
        labels.iter().map(|l| self.value_id(attr, l)).collect()
    }

    pub fn label(&self, attr: AttrId, value: ValueId) -> Option<&str> {
        self.attribute(attr).and_then(|a| a.label(value))
    }
}
