//! Path-tracking accessors over `serde_json::Value`, so schema violations
//! name the offending field (`issues[3].fields.created`).

use serde_json::Value;

use super::TrackerError;
use crate::clock::{parse_timestamp, Timestamp};

pub(super) struct Node<'a> {
    pub value: &'a Value,
    path: String,
}

pub(super) fn parse_body(body: &str) -> Result<Value, TrackerError> {
    serde_json::from_str(body).map_err(|e| TrackerError::malformed("$", format!("invalid JSON: {e}")))
}

impl<'a> Node<'a> {
    pub fn root(value: &'a Value) -> Self {
        Node {
            value,
            path: String::new(),
        }
    }

    fn child_path(&self, name: &str) -> String {
        if self.path.is_empty() {
            name.to_string()
        } else {
            format!("{}.{name}", self.path)
        }
    }

    pub fn path(&self) -> &str {
        if self.path.is_empty() {
            "$"
        } else {
            &self.path
        }
    }

    pub fn field(&self, name: &str) -> Result<Node<'a>, TrackerError> {
        self.opt_field(name)
            .ok_or_else(|| TrackerError::malformed(self.child_path(name), "missing required field"))
    }

    /// Absent and `null` are both `None`.
    pub fn opt_field(&self, name: &str) -> Option<Node<'a>> {
        self.value.get(name).filter(|v| !v.is_null()).map(|v| Node {
            value: v,
            path: self.child_path(name),
        })
    }

    pub fn str(&self) -> Result<&'a str, TrackerError> {
        self.value
            .as_str()
            .ok_or_else(|| TrackerError::malformed(self.path(), "expected a string"))
    }

    pub fn u64(&self) -> Result<u64, TrackerError> {
        self.value
            .as_u64()
            .ok_or_else(|| TrackerError::malformed(self.path(), "expected a nonnegative integer"))
    }

    pub fn bool(&self) -> Result<bool, TrackerError> {
        self.value
            .as_bool()
            .ok_or_else(|| TrackerError::malformed(self.path(), "expected a boolean"))
    }

    pub fn timestamp(&self) -> Result<Timestamp, TrackerError> {
        let raw = self.str()?;
        parse_timestamp(raw).ok_or_else(|| TrackerError::malformed(self.path(), format!("bad timestamp {raw:?}")))
    }

    pub fn array(&self) -> Result<Vec<Node<'a>>, TrackerError> {
        let items = self
            .value
            .as_array()
            .ok_or_else(|| TrackerError::malformed(self.path(), "expected an array"))?;
        Ok(items
            .iter()
            .enumerate()
            .map(|(i, v)| Node {
                value: v,
                path: format!("{}[{i}]", self.path),
            })
            .collect())
    }
}
