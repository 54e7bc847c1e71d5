//! JSON documents for instances and leaf functions.
//!
//! Real numbers are stored as decimal strings using the shortest
//! representation that parses back to the identical `f64`, so a
//! serialize/deserialize round trip is exact.

use std::collections::BTreeMap;
use std::fmt;

use serde::de::{self, Visitor};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::{ExponentPair, Instance, Lattice, LatticeParts, SimpleFunction, Weight};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Decimal(pub f64);

impl Serialize for Decimal {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&format!("{:?}", self.0))
    }
}

impl<'de> Deserialize<'de> for Decimal {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        struct DecimalVisitor;

        impl Visitor<'_> for DecimalVisitor {
            type Value = Decimal;

            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("a decimal string or number")
            }

            fn visit_str<E: de::Error>(self, v: &str) -> Result<Decimal, E> {
                v.trim()
                    .parse::<f64>()
                    .map(Decimal)
                    .map_err(|_| E::custom(format!("invalid decimal {v:?}")))
            }

            fn visit_f64<E: de::Error>(self, v: f64) -> Result<Decimal, E> {
                Ok(Decimal(v))
            }

            fn visit_u64<E: de::Error>(self, v: u64) -> Result<Decimal, E> {
                Ok(Decimal(v as f64))
            }

            fn visit_i64<E: de::Error>(self, v: i64) -> Result<Decimal, E> {
                Ok(Decimal(v as f64))
            }
        }

        d.deserialize_any(DecimalVisitor)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstanceDocument {
    pub p: Decimal,
    pub q: Decimal,
    pub generations: Vec<Vec<u64>>,
    #[serde(default)]
    pub parent: BTreeMap<u64, u64>,
    pub mu: BTreeMap<u64, Decimal>,
    pub nu: BTreeMap<u64, Decimal>,
    #[serde(default)]
    pub alpha: BTreeMap<u64, Decimal>,
}

/// Leaf function document; omitted leaves are zero.
pub type FunctionDocument = BTreeMap<u64, Decimal>;

fn leaf_values(lattice: &Lattice, map: &BTreeMap<u64, Decimal>, what: &str, require_all: bool) -> Result<Vec<f64>> {
    let mut values = vec![0.0; lattice.num_leaves()];
    let mut seen = 0;
    for (&label, &Decimal(v)) in map {
        let cell = lattice.cell(label)?;
        let pos = lattice
            .leaf_position(cell)
            .ok_or_else(|| Error::InvalidParameter(format!("{what}: cell {label} is not a leaf")))?;
        values[pos] = v;
        seen += 1;
    }
    if require_all && seen != lattice.num_leaves() {
        return Err(Error::InvalidParameter(format!(
            "{what}: expected a mass for each of the {} leaves, found {seen}",
            lattice.num_leaves()
        )));
    }
    Ok(values)
}

impl Instance {
    pub fn from_document(doc: &InstanceDocument) -> Result<Self> {
        let exponents = ExponentPair::new(doc.p.0, doc.q.0)?;
        let parts = LatticeParts::from_parent(doc.generations.clone(), doc.parent.clone());
        let lattice = Lattice::from_parts(&parts)?;
        let mu = Weight::new(&lattice, leaf_values(&lattice, &doc.mu, "mu", true)?)?;
        let nu = Weight::new(&lattice, leaf_values(&lattice, &doc.nu, "nu", true)?)?;
        let mut alpha = vec![0.0; lattice.len()];
        for (&label, &Decimal(a)) in &doc.alpha {
            alpha[lattice.cell(label)?.index()] = a;
        }
        Instance::new(lattice, mu, nu, alpha, exponents)
    }

    pub fn to_document(&self) -> InstanceDocument {
        let l = self.lattice();
        let parts = l.to_parts();
        let leaf_map = |w: &Weight| {
            l.leaves()
                .iter()
                .zip(w.leaf_masses())
                .map(|(&c, &m)| (l.label(c), Decimal(m)))
                .collect()
        };
        InstanceDocument {
            p: Decimal(self.exponents().p()),
            q: Decimal(self.exponents().q()),
            generations: parts.generations,
            parent: parts.parent,
            mu: leaf_map(self.mu()),
            nu: leaf_map(self.nu()),
            alpha: l
                .cells()
                .filter(|&c| self.alpha_of(c) != 0.0)
                .map(|c| (l.label(c), Decimal(self.alpha_of(c))))
                .collect(),
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: InstanceDocument = serde_json::from_str(text)?;
        Self::from_document(&doc)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_document()).expect("instance document serializes")
    }
}

impl SimpleFunction {
    pub fn from_document(lattice: &Lattice, doc: &FunctionDocument) -> Result<Self> {
        SimpleFunction::new(lattice, leaf_values(lattice, doc, "function", false)?)
    }

    pub fn to_document(&self, lattice: &Lattice) -> FunctionDocument {
        lattice
            .leaves()
            .iter()
            .zip(self.values())
            .map(|(&c, &v)| (lattice.label(c), Decimal(v)))
            .collect()
    }

    pub fn from_json(lattice: &Lattice, text: &str) -> Result<Self> {
        let doc: FunctionDocument = serde_json::from_str(text)?;
        Self::from_document(lattice, &doc)
    }

    pub fn to_json(&self, lattice: &Lattice) -> String {
        serde_json::to_string_pretty(&self.to_document(lattice)).expect("function document serializes")
    }
}
