use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, IoContext, Result};

/// Common semantic group of a raw dataset label.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Category {
    Vehicle,
    Person,
    TwoWheeler,
    Obstacle,
    Other,
}

impl Category {
    pub const ALL: [Category; 5] = [Category::Vehicle, Category::Person, Category::TwoWheeler, Category::Obstacle, Category::Other];

    pub fn as_str(&self) -> &'static str {
        match self {
            Category::Vehicle => "vehicle",
            Category::Person => "person",
            Category::TwoWheeler => "two_wheeler",
            Category::Obstacle => "obstacle",
            Category::Other => "other",
        }
    }
}

impl std::fmt::Display for Category {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// What to do with labels the table does not list.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UnmappedPolicy {
    Error,
    #[default]
    Other,
}

/// Raw label to category table. Lookups normalize case, whitespace and `-`/`.`
/// separators, so `Traffic Cone`, `traffic-cone` and `traffic_cone` agree.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaxonomyMap {
    pub name: String,
    pub entries: BTreeMap<String, Category>,
    #[serde(default)]
    pub policy: UnmappedPolicy,
}

const DEFAULT_ENTRIES: &[(Category, &[&str])] = &[
    (
        Category::Vehicle,
        &[
            "car", "truck", "bus", "van", "suv", "trailer", "vehicle", "pickup_truck", "box_truck", "school_bus",
            "articulated_bus", "construction_vehicle", "emergency_vehicle", "police_car", "ambulance", "vehicular_trailer",
            "semi_truck", "other_vehicle",
        ],
    ),
    (Category::Person, &["pedestrian", "person", "rider", "child", "adult", "construction_worker", "police_officer", "cyclist", "motorcyclist"]),
    (Category::TwoWheeler, &["bicycle", "motorcycle", "bike", "motorbike", "scooter", "moped", "two_wheeler", "wheeled_rider"]),
    (
        Category::Obstacle,
        &["traffic_cone", "cone", "barrier", "sign", "traffic_sign", "bollard", "construction_barrel", "pole", "debris", "pushable_pullable", "obstacle"],
    ),
    (Category::Other, &["train", "tram", "animal", "dog", "other", "unknown", "misc"]),
];

fn normalize(label: &str) -> String {
    label.trim().to_lowercase().split(|c: char| c.is_whitespace() || c == '-' || c == '.').filter(|s| !s.is_empty()).collect::<Vec<_>>().join("_")
}

impl TaxonomyMap {
    pub fn new(name: impl Into<String>, policy: UnmappedPolicy) -> Self {
        TaxonomyMap { name: name.into(), entries: BTreeMap::new(), policy }
    }

    /// Built-in table covering the labels of common driving datasets.
    pub fn builtin() -> Self {
        let mut t = Self::new("default", UnmappedPolicy::Other);
        for (cat, labels) in DEFAULT_ENTRIES {
            for l in *labels {
                t.insert(l, *cat);
            }
        }
        t
    }

    pub fn with_policy(mut self, policy: UnmappedPolicy) -> Self {
        self.policy = policy;
        self
    }

    pub fn insert(&mut self, raw: &str, category: Category) {
        self.entries.insert(normalize(raw), category);
    }

    /// Reads a table from JSON: `{"name": .., "entries": {label: category}, "policy": ..}`.
    pub fn from_json_file(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).at(path)?;
        let raw: TaxonomyMap = serde_json::from_slice(&bytes)?;
        let mut t = Self::new(raw.name, raw.policy);
        for (k, v) in raw.entries {
            t.insert(&k, v);
        }
        Ok(t)
    }

    pub fn map_label(&self, raw: &str) -> Result<Category> {
        let key = normalize(raw);
        if let Some(c) = self.entries.get(&key) {
            return Ok(*c);
        }
        // dotted hierarchies such as `vehicle.car` or `human.pedestrian.adult`
        if let Some(c) = key.split('_').rev().find_map(|part| self.entries.get(part)) {
            if raw.contains('.') {
                return Ok(*c);
            }
        }
        match self.policy {
            UnmappedPolicy::Other => Ok(Category::Other),
            UnmappedPolicy::Error => Err(Error::UnmappedLabel(raw.to_string())),
        }
    }
}

impl Default for TaxonomyMap {
    fn default() -> Self {
        Self::builtin()
    }
}

pub fn map_label(raw: &str, taxonomy: &TaxonomyMap) -> Result<Category> {
    taxonomy.map_label(raw)
}
