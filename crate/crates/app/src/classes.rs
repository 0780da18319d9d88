//! Class names of the 19-category driving scheme and raw label remapping.

use std::collections::BTreeMap;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// Names indexed by class id; 0 is free space (or unlabeled on input).
pub const DEFAULT_CLASS_NAMES: [&str; 20] = [
    "free",
    "car",
    "bicycle",
    "motorcycle",
    "truck",
    "other-vehicle",
    "person",
    "bicyclist",
    "motorcyclist",
    "road",
    "parking",
    "sidewalk",
    "other-ground",
    "building",
    "fence",
    "vegetation",
    "trunk",
    "terrain",
    "pole",
    "traffic-sign",
];

#[derive(Clone, Debug, PartialEq)]
pub struct ClassNames {
    names: Vec<String>,
}

impl ClassNames {
    /// Default names for `0..=num_classes`, then `overrides` (id as a
    /// decimal string to name).
    pub fn new(num_classes: u16, overrides: &BTreeMap<String, String>) -> anyhow::Result<Self> {
        let mut names: Vec<String> = (0..=num_classes as usize)
            .map(|i| {
                DEFAULT_CLASS_NAMES
                    .get(i)
                    .map_or_else(|| format!("class-{i}"), |s| s.to_string())
            })
            .collect();
        for (id, name) in overrides {
            let i: usize = id
                .parse()
                .map_err(|_| anyhow::anyhow!("class id '{id}' is not a number"))?;
            let slot = names
                .get_mut(i)
                .ok_or_else(|| anyhow::anyhow!("class id {i} outside 0..={num_classes}"))?;
            *slot = name.clone();
        }
        Ok(Self { names })
    }

    pub fn name(&self, class: u16) -> &str {
        self.names.get(class as usize).map_or("?", String::as_str)
    }
}

/// How raw per-point label words map to class ids. The lower 16 bits of a
/// label word carry the raw semantic id.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LabelMap {
    /// Raw ids already are class ids.
    #[default]
    Identity,
    /// The public benchmark's raw ids (10 = car, 40 = road, ...) collapsed
    /// onto the 19 evaluation classes; moving variants join their static
    /// class, ignored ids become 0.
    SemanticKitti,
}

impl LabelMap {
    pub fn apply(self, raw: u16) -> u16 {
        match self {
            LabelMap::Identity => raw,
            LabelMap::SemanticKitti => match raw {
                10 | 252 => 1,
                11 => 2,
                15 => 3,
                18 | 258 => 4,
                13 | 16 | 20 | 256 | 257 | 259 => 5,
                30 | 254 => 6,
                31 | 253 => 7,
                32 | 255 => 8,
                40 | 60 => 9,
                44 => 10,
                48 => 11,
                49 => 12,
                50 => 13,
                51 => 14,
                70 => 15,
                71 => 16,
                72 => 17,
                80 => 18,
                81 => 19,
                _ => 0,
            },
        }
    }
}

impl FromStr for LabelMap {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "identity" => Ok(LabelMap::Identity),
            "semantic-kitti" => Ok(LabelMap::SemanticKitti),
            _ => Err(format!(
                "unknown label map '{s}', expected identity|semantic-kitti"
            )),
        }
    }
}
