//! Column layout of a tabular dataset.

use std::collections::HashSet;

use crate::error::{Error, Result};

/// How a raw attribute is typed and later encoded.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AttributeKind {
    /// Numeric; z-scored against training statistics.
    Continuous,
    /// String-valued; one-hot encoded with a trailing unknown column.
    Categorical,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Attribute {
    pub name: String,
    pub kind: AttributeKind,
}

impl Attribute {
    pub fn continuous(name: &str) -> Self {
        Self {
            name: name.to_owned(),
            kind: AttributeKind::Continuous,
        }
    }

    pub fn categorical(name: &str) -> Self {
        Self {
            name: name.to_owned(),
            kind: AttributeKind::Categorical,
        }
    }
}

/// Names the id and label columns and orders the attributes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DatasetSchema {
    pub id_column: String,
    pub label_column: String,
    pub attributes: Vec<Attribute>,
}

impl DatasetSchema {
    /// Validates column-name uniqueness across id, label, and attributes.
    pub fn new(id_column: &str, label_column: &str, attributes: Vec<Attribute>) -> Result<Self> {
        let mut seen = HashSet::new();
        for name in [id_column, label_column]
            .into_iter()
            .chain(attributes.iter().map(|a| a.name.as_str()))
        {
            if !seen.insert(name.to_owned()) {
                return Err(Error::Schema(format!("duplicate column name {name:?}")));
            }
        }
        if attributes.is_empty() {
            return Err(Error::Schema("schema has no attributes".into()));
        }
        Ok(Self {
            id_column: id_column.to_owned(),
            label_column: label_column.to_owned(),
            attributes,
        })
    }

    /// Census-style income table: 11 attributes, 6 continuous and 5
    /// categorical, interleaved so each third of the attribute list carries
    /// both kinds.
    pub fn adult_like() -> Self {
        Self::new(
            "id",
            "label",
            vec![
                Attribute::continuous("age"),
                Attribute::categorical("workclass"),
                Attribute::continuous("hours_per_week"),
                Attribute::categorical("education"),
                Attribute::continuous("capital_gain"),
                Attribute::categorical("occupation"),
                Attribute::continuous("capital_loss"),
                Attribute::categorical("marital_status"),
                Attribute::continuous("education_num"),
                Attribute::categorical("relationship"),
                Attribute::continuous("final_weight"),
            ],
        )
        .expect("static schema")
    }

    /// Click-log-style table: 21 attributes, 14 continuous and 7 categorical.
    pub fn avazu_like() -> Self {
        Self::new(
            "id",
            "label",
            vec![
                Attribute::continuous("c01"),
                Attribute::continuous("c02"),
                Attribute::categorical("banner_pos"),
                Attribute::continuous("c03"),
                Attribute::continuous("c04"),
                Attribute::categorical("site_category"),
                Attribute::continuous("c05"),
                Attribute::continuous("c06"),
                Attribute::continuous("c07"),
                Attribute::categorical("app_category"),
                Attribute::continuous("c08"),
                Attribute::continuous("c09"),
                Attribute::categorical("device_type"),
                Attribute::continuous("c10"),
                Attribute::continuous("c11"),
                Attribute::categorical("device_conn"),
                Attribute::continuous("c12"),
                Attribute::categorical("hour_bucket"),
                Attribute::continuous("c13"),
                Attribute::categorical("day_of_week"),
                Attribute::continuous("c14"),
            ],
        )
        .expect("static schema")
    }

    /// Looks up a bundled schema by name.
    pub fn named(name: &str) -> Option<Self> {
        match name {
            "adult_like" => Some(Self::adult_like()),
            "avazu_like" => Some(Self::avazu_like()),
            _ => None,
        }
    }
}
