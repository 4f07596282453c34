//! The 36 knot classes with at most eight crossings, each with a seed grid
//! diagram realising its crossing number.
//!
//! The registry order fixes [`ClassLabel::index`]. Seeds live in
//! `data/knots36.json`.

use std::fmt;
use std::str::FromStr;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::grid::{GridDiagram, GridError};

pub const CLASS_NAMES: [&str; 36] = [
    "0_1", "3_1", "4_1", "5_1", "5_2", "6_1", "6_2", "6_3", "7_1", "7_2", "7_3", "7_4", "7_5",
    "7_6", "7_7", "8_1", "8_2", "8_3", "8_4", "8_5", "8_6", "8_7", "8_8", "8_9", "8_10", "8_11",
    "8_12", "8_13", "8_14", "8_15", "8_16", "8_17", "8_18", "8_19", "8_20", "8_21",
];

pub const NUM_CLASSES: usize = CLASS_NAMES.len();

const BUILTIN_TABLE: &str = include_str!("../data/knots36.json");

/// Index of a knot class in the registry.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ClassLabel(usize);

impl ClassLabel {
    pub const UNKNOT: ClassLabel = ClassLabel(0);

    pub fn from_index(index: usize) -> Result<Self, TableError> {
        if index < NUM_CLASSES {
            Ok(ClassLabel(index))
        } else {
            Err(TableError::UnknownLabel(index.to_string()))
        }
    }

    pub fn index(self) -> usize {
        self.0
    }

    pub fn name(self) -> &'static str {
        CLASS_NAMES[self.0]
    }

    /// Crossing number encoded in the name (`k` of `k_j`).
    pub fn crossing_number(self) -> usize {
        self.name()
            .split('_')
            .next()
            .and_then(|k| k.parse().ok())
            .expect("class names have the form k_j")
    }

    pub fn all() -> impl Iterator<Item = ClassLabel> {
        (0..NUM_CLASSES).map(ClassLabel)
    }
}

impl fmt::Display for ClassLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ClassLabel {
    type Err = TableError;

    fn from_str(s: &str) -> Result<Self, TableError> {
        CLASS_NAMES
            .iter()
            .position(|&n| n == s)
            .map(ClassLabel)
            .ok_or_else(|| TableError::UnknownLabel(s.to_string()))
    }
}

/// Parses a comma-separated class list; `all` selects every class and
/// `first:K` the first `K` classes in registry order.
pub fn parse_class_list(spec: &str) -> Result<Vec<ClassLabel>, TableError> {
    let spec = spec.trim();
    if spec == "all" {
        return Ok(ClassLabel::all().collect());
    }
    if let Some(k) = spec.strip_prefix("first:") {
        let k: usize = k
            .parse()
            .map_err(|_| TableError::UnknownLabel(spec.to_string()))?;
        if k == 0 || k > NUM_CLASSES {
            return Err(TableError::UnknownLabel(spec.to_string()));
        }
        return Ok((0..k).map(ClassLabel).collect());
    }
    spec.split(',').map(|s| s.trim().parse()).collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TableError {
    #[error("unknown knot class '{0}'")]
    UnknownLabel(String),
    #[error("malformed knot table: {0}")]
    Malformed(String),
    #[error("seed for {name} is invalid: {source}")]
    InvalidSeed { name: String, source: GridError },
    #[error("table entry {position} is {found}, expected {expected}")]
    WrongOrder {
        position: usize,
        found: String,
        expected: String,
    },
    #[error("seed for {name} has {found} crossings, expected {expected}")]
    CrossingCount {
        name: String,
        found: usize,
        expected: usize,
    },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct TableEntry {
    name: String,
    x: Vec<usize>,
    o: Vec<usize>,
    source: String,
}

#[derive(Debug, Clone)]
pub struct ClassEntry {
    pub label: ClassLabel,
    pub seed: GridDiagram,
    pub source: String,
}

/// Ordered class registry.
#[derive(Debug, Clone)]
pub struct ClassRegistry {
    entries: Vec<ClassEntry>,
}

impl ClassRegistry {
    /// The table shipped with the crate. Panics only if the embedded data is
    /// corrupt, which the test suite rules out.
    pub fn builtin() -> &'static ClassRegistry {
        static REGISTRY: OnceLock<ClassRegistry> = OnceLock::new();
        REGISTRY.get_or_init(|| {
            ClassRegistry::from_json(BUILTIN_TABLE).expect("embedded knot table is valid")
        })
    }

    /// Loads a table in the `knots36.json` format and runs [`Self::self_test`].
    pub fn from_json(text: &str) -> Result<Self, TableError> {
        let raw: Vec<TableEntry> =
            serde_json::from_str(text).map_err(|e| TableError::Malformed(e.to_string()))?;
        if raw.len() != NUM_CLASSES {
            return Err(TableError::Malformed(format!(
                "expected {NUM_CLASSES} entries, found {}",
                raw.len()
            )));
        }
        let mut entries = Vec::with_capacity(raw.len());
        for (position, e) in raw.into_iter().enumerate() {
            if e.name != CLASS_NAMES[position] {
                return Err(TableError::WrongOrder {
                    position,
                    found: e.name,
                    expected: CLASS_NAMES[position].to_string(),
                });
            }
            let seed = GridDiagram::new(e.x, e.o).map_err(|source| TableError::InvalidSeed {
                name: e.name.clone(),
                source,
            })?;
            entries.push(ClassEntry {
                label: ClassLabel(position),
                seed,
                source: e.source,
            });
        }
        let registry = ClassRegistry { entries };
        registry.self_test()?;
        Ok(registry)
    }

    /// Structural checks: each seed's crossing count equals the class's
    /// crossing number (0 for the unknot).
    pub fn self_test(&self) -> Result<(), TableError> {
        for e in &self.entries {
            let expected = e.label.crossing_number();
            let found = e.seed.crossing_count();
            if found != expected {
                return Err(TableError::CrossingCount {
                    name: e.label.name().to_string(),
                    found,
                    expected,
                });
            }
        }
        Ok(())
    }

    pub fn seed(&self, label: ClassLabel) -> &GridDiagram {
        &self.entries[label.index()].seed
    }

    pub fn seed_by_name(&self, name: &str) -> Result<&GridDiagram, TableError> {
        Ok(self.seed(name.parse()?))
    }

    pub fn entries(&self) -> &[ClassEntry] {
        &self.entries
    }

    /// Largest seed size among `classes`.
    pub fn max_seed_size(&self, classes: &[ClassLabel]) -> usize {
        classes.iter().map(|&c| self.seed(c).n()).max().unwrap_or(2)
    }
}
