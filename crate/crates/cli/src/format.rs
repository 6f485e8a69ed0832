//! JSON file formats for instances, solutions and run logs.
//!
//! Exact rationals are written as JSON integers when integral and as
//! `"p/q"` strings otherwise. Plain decimal numbers are accepted on input.

use std::collections::BTreeSet;
use std::path::Path;

use binpack3d_core::domain::{default_bin_count, Affinities, BinSpec, CategoryPair, ComTarget, InstanceParts, Item};
use binpack3d_core::{Instance, InstanceError, Objectives, Orientation, PackingSolution, Placement, Rational, RelPos};
use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum FormatError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Json {
        path: String,
        #[source]
        source: serde_json::Error,
    },
    #[error(transparent)]
    Instance(#[from] InstanceError),
    #[error("{0}")]
    Invalid(String),
}

/// A rational stored exactly in JSON.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct Exact(pub Rational);

impl Serialize for Exact {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        if self.0.is_integer() {
            s.serialize_i64(i64::try_from(self.0.to_integer()).map_err(serde::ser::Error::custom)?)
        } else {
            s.serialize_str(&self.0.to_string())
        }
    }
}

impl<'de> Deserialize<'de> for Exact {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        match serde_json::Value::deserialize(d)? {
            serde_json::Value::Number(n) => parse_rational(&n.to_string()).map(Exact).map_err(D::Error::custom),
            serde_json::Value::String(s) => parse_rational(&s).map(Exact).map_err(D::Error::custom),
            other => Err(D::Error::custom(format!("expected a number or \"p/q\", got {other}"))),
        }
    }
}

/// Parses `"p/q"`, an integer, or a decimal such as `1.5` or `2.5e-1`.
pub fn parse_rational(s: &str) -> Result<Rational, String> {
    let s = s.trim();
    if s.contains('/') {
        return s.parse::<Rational>().map_err(|e| format!("bad rational {s:?}: {e}"));
    }
    let bad = || format!("bad number {s:?}");
    let (mantissa, exp) = match s.find(['e', 'E']) {
        Some(at) => (&s[..at], s[at + 1..].parse::<i32>().map_err(|_| bad())?),
        None => (s, 0),
    };
    let (int, frac) = mantissa.split_once('.').unwrap_or((mantissa, ""));
    let digits = format!("{int}{frac}");
    let value: i128 = digits.parse().map_err(|_| bad())?;
    let scale = exp - frac.len() as i32;
    if scale.unsigned_abs() > 30 {
        return Err(bad());
    }
    let ten = Rational::from_integer(10).pow(scale);
    Ok(Rational::from_integer(value) * ten)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BinRecord {
    #[serde(rename = "L")]
    pub length: u32,
    #[serde(rename = "W")]
    pub width: u32,
    #[serde(rename = "H")]
    pub height: u32,
    #[serde(rename = "M", default, skip_serializing_if = "Option::is_none")]
    pub max_weight: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<u32>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ItemRecord {
    pub id: usize,
    pub l: u32,
    pub w: u32,
    pub h: u32,
    pub mu: u32,
    pub category: u32,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AffinityRecord {
    #[serde(default)]
    pub positive: Vec<[u32; 2]>,
    #[serde(default)]
    pub negative: Vec<[u32; 2]>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RelposRecord {
    #[serde(default)]
    pub avoid: Vec<(usize, usize, u8)>,
    #[serde(default)]
    pub favour: Vec<(usize, usize, u8)>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstanceFile {
    pub bin: BinRecord,
    pub items: Vec<ItemRecord>,
    #[serde(default)]
    pub affinities: AffinityRecord,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eta: Option<Exact>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub com_target: Option<[Exact; 2]>,
    #[serde(default)]
    pub relpos: RelposRecord,
}

impl InstanceFile {
    pub fn from_instance(instance: &Instance) -> Self {
        let parts = instance.parts();
        let pairs = |set: &BTreeSet<CategoryPair>| set.iter().map(|p| [p.first(), p.second()]).collect();
        let entries =
            |set: &BTreeSet<(usize, usize, RelPos)>| set.iter().map(|&(i, k, q)| (i, k, q.index())).collect();
        InstanceFile {
            bin: BinRecord {
                length: parts.bin.length,
                width: parts.bin.width,
                height: parts.bin.height,
                max_weight: parts.bin.max_weight,
                n: Some(parts.bin.count),
            },
            items: parts
                .items
                .iter()
                .map(|it| ItemRecord {
                    id: it.index,
                    l: it.length,
                    w: it.width,
                    h: it.height,
                    mu: it.weight,
                    category: it.category,
                })
                .collect(),
            affinities: AffinityRecord {
                positive: pairs(&parts.affinities.positive),
                negative: pairs(&parts.affinities.negative),
            },
            eta: parts.eta.map(Exact),
            com_target: parts.com_target.map(|t| [Exact(t.x), Exact(t.y)]),
            relpos: RelposRecord {
                avoid: entries(&parts.relpos_avoid),
                favour: entries(&parts.relpos_favour),
            },
        }
    }

    pub fn to_instance(&self) -> Result<Instance, FormatError> {
        let items: Vec<Item> = self
            .items
            .iter()
            .enumerate()
            .map(|(pos, r)| {
                if r.id != pos {
                    return Err(FormatError::Invalid(format!(
                        "item ids must be 0, 1, 2, ... in order; found id {} at position {pos}",
                        r.id
                    )));
                }
                Ok(Item {
                    index: r.id,
                    length: r.l,
                    width: r.w,
                    height: r.h,
                    weight: r.mu,
                    category: r.category,
                })
            })
            .collect::<Result<_, _>>()?;
        let b = &self.bin;
        let count = b
            .n
            .unwrap_or_else(|| default_bin_count(&items, b.length, b.width, b.height, b.max_weight));
        let mut parts = InstanceParts::new(
            items,
            BinSpec {
                length: b.length,
                width: b.width,
                height: b.height,
                max_weight: b.max_weight,
                count,
            },
        );
        let pairs = |v: &[[u32; 2]]| v.iter().map(|&[a, b]| CategoryPair::new(a, b)).collect();
        parts.affinities = Affinities {
            positive: pairs(&self.affinities.positive),
            negative: pairs(&self.affinities.negative),
        };
        parts.eta = self.eta.map(|e| e.0);
        parts.com_target = self.com_target.map(|[x, y]| ComTarget { x: x.0, y: y.0 });
        let entries = |v: &[(usize, usize, u8)]| -> Result<BTreeSet<(usize, usize, RelPos)>, FormatError> {
            v.iter()
                .map(|&(i, k, q)| Ok((i, k, RelPos::from_index(q)?)))
                .collect()
        };
        parts.relpos_avoid = entries(&self.relpos.avoid)?;
        parts.relpos_favour = entries(&self.relpos.favour)?;
        Ok(Instance::new(parts)?)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlacementRecord {
    pub item: usize,
    pub bin: u32,
    pub k: u8,
    pub x: u32,
    pub y: u32,
    pub z: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObjectivesRecord {
    pub o1: u32,
    pub o2: Exact,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub o3: Option<Exact>,
}

/// Energies of repeated runs on one instance under one time limit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunLog {
    pub instance: String,
    pub backend: String,
    pub time_limit_s: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub iterations: Option<u64>,
    /// One entry per run in seed order; `null` for runs without a feasible packing.
    pub energies: Vec<Option<Exact>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolutionFile {
    pub placements: Vec<PlacementRecord>,
    pub objectives: ObjectivesRecord,
    pub energy: Exact,
    pub solver: String,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub elapsed_s: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub run_log: Option<RunLog>,
}

impl SolutionFile {
    pub fn new(solution: &PackingSolution, energy: Rational, solver: &str, seed: u64) -> Self {
        SolutionFile {
            placements: solution.placements.iter().map(placement_record).collect(),
            objectives: ObjectivesRecord {
                o1: solution.objectives.o1,
                o2: Exact(solution.objectives.o2),
                o3: solution.objectives.o3.map(Exact),
            },
            energy: Exact(energy),
            solver: solver.to_string(),
            seed,
            elapsed_s: None,
            run_log: None,
        }
    }

    /// Placements as domain values. Orientation indices are checked here;
    /// everything else is left to the validator.
    pub fn placements(&self) -> Result<Vec<Placement>, FormatError> {
        self.placements
            .iter()
            .map(|r| {
                Ok(Placement {
                    item: r.item,
                    bin: r.bin,
                    orientation: Orientation::new(r.k)?,
                    x: r.x,
                    y: r.y,
                    z: r.z,
                })
            })
            .collect()
    }

    pub fn objectives(&self) -> Objectives {
        Objectives {
            o1: self.objectives.o1,
            o2: self.objectives.o2.0,
            o3: self.objectives.o3.map(|e| e.0),
        }
    }
}

fn placement_record(p: &Placement) -> PlacementRecord {
    PlacementRecord {
        item: p.item,
        bin: p.bin,
        k: p.orientation.index(),
        x: p.x,
        y: p.y,
        z: p.z,
    }
}

/// Anything `stats` accepts: a solution with a run log, one run log, or a
/// list of run logs.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum RunLogSource {
    Solution(Box<SolutionFile>),
    One(RunLog),
    Many(Vec<RunLog>),
}

impl RunLogSource {
    pub fn into_logs(self) -> Vec<RunLog> {
        match self {
            RunLogSource::Solution(s) => s.run_log.into_iter().collect(),
            RunLogSource::One(l) => vec![l],
            RunLogSource::Many(v) => v,
        }
    }
}

/// Pretty JSON with a trailing newline.
pub fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("file records always serialize");
    s.push('\n');
    s
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, FormatError> {
    let shown = path.display().to_string();
    let text = std::fs::read_to_string(path).map_err(|source| FormatError::Io {
        path: shown.clone(),
        source,
    })?;
    serde_json::from_str(&text).map_err(|source| FormatError::Json { path: shown, source })
}

pub fn read_instance(path: &Path) -> Result<Instance, FormatError> {
    read_json::<InstanceFile>(path)?.to_instance()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rationals_parse_in_every_spelling() {
        assert_eq!(parse_rational("3/2").unwrap(), Rational::new(3, 2));
        assert_eq!(parse_rational("1.5").unwrap(), Rational::new(3, 2));
        assert_eq!(parse_rational("2.5e-1").unwrap(), Rational::new(1, 4));
        assert_eq!(parse_rational("-4").unwrap(), Rational::from_integer(-4));
        assert!(parse_rational("abc").is_err());
    }

    #[test]
    fn exact_values_round_trip() {
        for r in [Rational::new(3, 4), Rational::from_integer(2), Rational::new(-7, 3)] {
            let text = serde_json::to_string(&Exact(r)).unwrap();
            assert_eq!(serde_json::from_str::<Exact>(&text).unwrap(), Exact(r));
        }
        assert_eq!(serde_json::to_string(&Exact(Rational::from_integer(5))).unwrap(), "5");
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let text = r#"{"bin": {"L": 2, "W": 2, "H": 2}, "items": [], "colour": 1}"#;
        assert!(serde_json::from_str::<InstanceFile>(text).is_err());
        let text = r#"{"bin": {"L": 2, "W": 2, "H": 2, "depth": 3}, "items": []}"#;
        assert!(serde_json::from_str::<InstanceFile>(text).is_err());
    }

    #[test]
    fn minimal_instance_takes_defaults() {
        let text = r#"{"bin": {"L": 2, "W": 2, "H": 2},
                       "items": [{"id": 0, "l": 1, "w": 1, "h": 1, "mu": 1, "category": 0}]}"#;
        let file: InstanceFile = serde_json::from_str(text).unwrap();
        let inst = file.to_instance().unwrap();
        // ceil(1/8) + 1
        assert_eq!(inst.bin().count, 2);
        assert!(inst.affinities().is_empty());
    }

    #[test]
    fn item_ids_must_be_in_order() {
        let text = r#"{"bin": {"L": 2, "W": 2, "H": 2},
                       "items": [{"id": 1, "l": 1, "w": 1, "h": 1, "mu": 1, "category": 0}]}"#;
        let file: InstanceFile = serde_json::from_str(text).unwrap();
        assert!(matches!(file.to_instance(), Err(FormatError::Invalid(_))));
    }
}
