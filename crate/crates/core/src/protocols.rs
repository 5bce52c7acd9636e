//! Three-level protocol label space: Local → ACR → General.

use std::collections::HashMap;
use std::fmt;
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::corpus::Order;

#[derive(Debug, thiserror::Error)]
pub enum HierarchyError {
    #[error("label `{label}` maps to undeclared {level} label `{target}`")]
    DanglingMapping {
        label: String,
        level: Level,
        target: String,
    },
    #[error("duplicate {level} label `{label}`")]
    DuplicateLabel { level: Level, label: String },
    #[error("ACR label `{acr}` maps to both `{first}` and `{second}`")]
    NonTotalMapping {
        acr: String,
        first: String,
        second: String,
    },
    #[error("unknown {level} label `{label}`")]
    UnknownLabel { level: Level, label: String },
    #[error("cannot map from {from} to finer level {to}")]
    LevelOrderViolation { from: Level, to: Level },
    #[error("unknown level `{0}`")]
    UnknownLevel(String),
    #[error("hierarchy is empty")]
    Empty,
    #[error("malformed hierarchy row {row}: {reason}")]
    MalformedRow { row: usize, reason: String },
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

/// Label granularity, ordered fine to coarse.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Level {
    Local,
    Acr,
    General,
}

impl Level {
    pub const ALL: [Level; 3] = [Level::Local, Level::Acr, Level::General];

    pub fn as_str(self) -> &'static str {
        match self {
            Level::Local => "local",
            Level::Acr => "acr",
            Level::General => "general",
        }
    }
}

impl fmt::Display for Level {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Level {
    type Err = HierarchyError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "local" => Ok(Level::Local),
            "acr" => Ok(Level::Acr),
            "general" => Ok(Level::General),
            _ => Err(HierarchyError::UnknownLevel(s.to_string())),
        }
    }
}

/// One row of the hierarchy CSV.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HierarchyRow {
    pub local: String,
    pub acr: String,
    pub general: String,
}

impl HierarchyRow {
    pub fn new(
        local: impl Into<String>,
        acr: impl Into<String>,
        general: impl Into<String>,
    ) -> Self {
        Self {
            local: local.into(),
            acr: acr.into(),
            general: general.into(),
        }
    }
}

/// Validated label hierarchy. Label lists are in first-appearance order of
/// the source rows; both maps are total and surjective.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProtocolHierarchy {
    local_labels: Vec<String>,
    acr_labels: Vec<String>,
    general_labels: Vec<String>,
    // index maps: local idx -> acr idx, acr idx -> general idx
    local_to_acr: Vec<usize>,
    acr_to_general: Vec<usize>,
    index: [HashMap<String, usize>; 3],
}

impl ProtocolHierarchy {
    /// Build from explicit label lists and maps; every label referenced by a
    /// map must be declared, and every coarse label must be hit.
    pub fn new(
        local_labels: Vec<String>,
        acr_labels: Vec<String>,
        general_labels: Vec<String>,
        local_to_acr: &[(String, String)],
        acr_to_general: &[(String, String)],
    ) -> Result<Self, HierarchyError> {
        let index = [
            index_labels(&local_labels, Level::Local)?,
            index_labels(&acr_labels, Level::Acr)?,
            index_labels(&general_labels, Level::General)?,
        ];
        if local_labels.is_empty() {
            return Err(HierarchyError::Empty);
        }
        let l2a = build_map(&index[0], &index[1], local_to_acr, Level::Local, Level::Acr)?;
        let a2g = build_map(
            &index[1],
            &index[2],
            acr_to_general,
            Level::Acr,
            Level::General,
        )?;

        let h = Self {
            local_labels,
            acr_labels,
            general_labels,
            local_to_acr: l2a,
            acr_to_general: a2g,
            index,
        };
        h.check_surjective()?;
        Ok(h)
    }

    /// Build from `local,acr,general` rows. Coarse labels are declared by first
    /// appearance; the same ACR label must always carry the same General label.
    pub fn from_rows(rows: &[HierarchyRow]) -> Result<Self, HierarchyError> {
        let mut local = Vec::new();
        let mut acr = Vec::new();
        let mut general = Vec::new();
        let mut l2a = Vec::new();
        let mut a2g: Vec<(String, String)> = Vec::new();
        let mut acr_parent: HashMap<&str, &str> = HashMap::new();
        for row in rows {
            local.push(row.local.clone());
            l2a.push((row.local.clone(), row.acr.clone()));
            match acr_parent.get(row.acr.as_str()) {
                Some(&g) if g != row.general => {
                    return Err(HierarchyError::NonTotalMapping {
                        acr: row.acr.clone(),
                        first: g.to_string(),
                        second: row.general.clone(),
                    })
                }
                Some(_) => {}
                None => {
                    acr_parent.insert(&row.acr, &row.general);
                    acr.push(row.acr.clone());
                    a2g.push((row.acr.clone(), row.general.clone()));
                    if !general.contains(&row.general) {
                        general.push(row.general.clone());
                    }
                }
            }
        }
        Self::new(local, acr, general, &l2a, &a2g)
    }

    pub fn rows(&self) -> Vec<HierarchyRow> {
        self.local_labels
            .iter()
            .enumerate()
            .map(|(i, l)| {
                let a = self.local_to_acr[i];
                HierarchyRow::new(
                    l.clone(),
                    self.acr_labels[a].clone(),
                    self.general_labels[self.acr_to_general[a]].clone(),
                )
            })
            .collect()
    }

    pub fn labels(&self, level: Level) -> &[String] {
        match level {
            Level::Local => &self.local_labels,
            Level::Acr => &self.acr_labels,
            Level::General => &self.general_labels,
        }
    }

    pub fn index_of(&self, level: Level, label: &str) -> Option<usize> {
        self.index[level as usize].get(label).copied()
    }

    /// Map a label index at `from` to its index at the equal-or-coarser `to`.
    pub fn coarsen_index(
        &self,
        idx: usize,
        from: Level,
        to: Level,
    ) -> Result<usize, HierarchyError> {
        if to < from {
            return Err(HierarchyError::LevelOrderViolation { from, to });
        }
        let mut level = from;
        let mut idx = idx;
        while level < to {
            (idx, level) = match level {
                Level::Local => (self.local_to_acr[idx], Level::Acr),
                Level::Acr => (self.acr_to_general[idx], Level::General),
                Level::General => unreachable!(),
            };
        }
        Ok(idx)
    }

    pub fn coarsen(&self, label: &str, from: Level, to: Level) -> Result<&str, HierarchyError> {
        if to < from {
            return Err(HierarchyError::LevelOrderViolation { from, to });
        }
        let idx = self
            .index_of(from, label)
            .ok_or_else(|| HierarchyError::UnknownLabel {
                level: from,
                label: label.to_string(),
            })?;
        let out = self.coarsen_index(idx, from, to)?;
        Ok(&self.labels(to)[out])
    }

    fn check_surjective(&self) -> Result<(), HierarchyError> {
        let mut hit = vec![false; self.acr_labels.len()];
        self.local_to_acr.iter().for_each(|&a| hit[a] = true);
        if let Some(i) = hit.iter().position(|h| !h) {
            return Err(HierarchyError::DanglingMapping {
                label: self.acr_labels[i].clone(),
                level: Level::Local,
                target: "(no local label maps here)".to_string(),
            });
        }
        let mut hit = vec![false; self.general_labels.len()];
        self.acr_to_general.iter().for_each(|&g| hit[g] = true);
        if let Some(i) = hit.iter().position(|h| !h) {
            return Err(HierarchyError::DanglingMapping {
                label: self.general_labels[i].clone(),
                level: Level::Acr,
                target: "(no ACR label maps here)".to_string(),
            });
        }
        Ok(())
    }
}

fn index_labels(labels: &[String], level: Level) -> Result<HashMap<String, usize>, HierarchyError> {
    let mut map = HashMap::with_capacity(labels.len());
    for (i, l) in labels.iter().enumerate() {
        if l.is_empty() {
            return Err(HierarchyError::MalformedRow {
                row: i + 1,
                reason: format!("empty {level} label"),
            });
        }
        if map.insert(l.clone(), i).is_some() {
            return Err(HierarchyError::DuplicateLabel {
                level,
                label: l.clone(),
            });
        }
    }
    Ok(map)
}

fn build_map(
    from: &HashMap<String, usize>,
    to: &HashMap<String, usize>,
    pairs: &[(String, String)],
    from_level: Level,
    to_level: Level,
) -> Result<Vec<usize>, HierarchyError> {
    let mut out: Vec<Option<usize>> = vec![None; from.len()];
    for (src, dst) in pairs {
        let s = *from.get(src).ok_or_else(|| HierarchyError::UnknownLabel {
            level: from_level,
            label: src.clone(),
        })?;
        let d = *to.get(dst).ok_or_else(|| HierarchyError::DanglingMapping {
            label: src.clone(),
            level: to_level,
            target: dst.clone(),
        })?;
        match out[s] {
            Some(prev) if prev != d => {
                return Err(HierarchyError::DuplicateLabel {
                    level: from_level,
                    label: src.clone(),
                })
            }
            _ => out[s] = Some(d),
        }
    }
    out.into_iter()
        .enumerate()
        .map(|(i, m)| {
            m.ok_or_else(|| {
                let label = from
                    .iter()
                    .find(|(_, &v)| v == i)
                    .map(|(k, _)| k.clone())
                    .unwrap_or_default();
                HierarchyError::NonTotalMapping {
                    acr: label,
                    first: "(unmapped)".to_string(),
                    second: to_level.to_string(),
                }
            })
        })
        .collect()
}

/// Load a hierarchy CSV with header `local,acr,general`.
pub fn load_hierarchy(path: impl AsRef<Path>) -> Result<ProtocolHierarchy, HierarchyError> {
    read_hierarchy(File::open(path)?)
}

pub fn read_hierarchy<R: Read>(reader: R) -> Result<ProtocolHierarchy, HierarchyError> {
    let mut rdr = csv::ReaderBuilder::new().flexible(true).from_reader(reader);
    let headers = rdr.headers()?.clone();
    let expected = ["local", "acr", "general"];
    if headers.iter().map(str::trim).ne(expected) {
        return Err(HierarchyError::MalformedRow {
            row: 1,
            reason: format!(
                "expected header `local,acr,general`, found `{}`",
                headers.iter().collect::<Vec<_>>().join(",")
            ),
        });
    }
    let mut rows = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let row = rec.position().map_or(i + 2, |p| p.line() as usize);
        if rec.len() != 3 {
            return Err(HierarchyError::MalformedRow {
                row,
                reason: format!("expected 3 fields, found {}", rec.len()),
            });
        }
        rows.push(HierarchyRow::new(&rec[0], &rec[1], &rec[2]));
    }
    ProtocolHierarchy::from_rows(&rows)
}

pub fn write_hierarchy<W: Write>(
    writer: W,
    hierarchy: &ProtocolHierarchy,
) -> Result<(), HierarchyError> {
    let mut wtr = csv::Writer::from_writer(writer);
    wtr.write_record(["local", "acr", "general"])?;
    for r in hierarchy.rows() {
        wtr.write_record([&r.local, &r.acr, &r.general])?;
    }
    wtr.flush()?;
    Ok(())
}

/// Replace each order's Local protocol with its label at `level`.
pub fn relabel_dataset(
    orders: &[Order],
    hierarchy: &ProtocolHierarchy,
    level: Level,
) -> Result<Vec<Order>, HierarchyError> {
    orders
        .iter()
        .map(|o| {
            let protocol = hierarchy
                .coarsen(&o.protocol, Level::Local, level)?
                .to_string();
            Ok(Order {
                protocol,
                ..o.clone()
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::collections::BTreeSet;

    const DEMO: &str = "local,acr,general\n\
        lumbar spine without contrast,lumbar spine,spine\n\
        lumbar spine with and without contrast,lumbar spine,spine\n\
        brain without contrast,head,head\n";

    #[test]
    fn chain_hierarchy() {
        let h = read_hierarchy(DEMO.as_bytes()).unwrap();
        assert_eq!(h.labels(Level::Local).len(), 3);
        assert_eq!(h.labels(Level::Acr), &["lumbar spine", "head"]);
        assert_eq!(h.labels(Level::General), &["spine", "head"]);
    }

    #[test]
    fn coarsen_composes_maps() {
        let h = read_hierarchy(DEMO.as_bytes()).unwrap();
        let x = "lumbar spine without contrast";
        assert_eq!(h.coarsen(x, Level::Local, Level::Local).unwrap(), x);
        let acr = h.coarsen(x, Level::Local, Level::Acr).unwrap();
        assert_eq!(acr, "lumbar spine");
        assert_eq!(
            h.coarsen(x, Level::Local, Level::General).unwrap(),
            h.coarsen(acr, Level::Acr, Level::General).unwrap()
        );
        assert!(matches!(
            h.coarsen("spine", Level::General, Level::Local),
            Err(HierarchyError::LevelOrderViolation { .. })
        ));
        assert!(matches!(
            h.coarsen("nope", Level::Local, Level::Acr),
            Err(HierarchyError::UnknownLabel { .. })
        ));
    }

    #[test]
    fn duplicate_local_label() {
        let text = "local,acr,general\na,x,g\na,y,g\n";
        assert!(matches!(
            read_hierarchy(text.as_bytes()),
            Err(HierarchyError::DuplicateLabel {
                level: Level::Local,
                ..
            })
        ));
    }

    #[test]
    fn acr_with_two_generals_is_non_total() {
        let text = "local,acr,general\na,x,g\nb,x,h\n";
        assert!(matches!(
            read_hierarchy(text.as_bytes()),
            Err(HierarchyError::NonTotalMapping { .. })
        ));
    }

    #[test]
    fn dangling_acr_reference() {
        let err = ProtocolHierarchy::new(
            vec!["a".into()],
            vec!["x".into()],
            vec!["g".into()],
            &[("a".into(), "undeclared".into())],
            &[("x".into(), "g".into())],
        )
        .unwrap_err();
        assert!(matches!(err, HierarchyError::DanglingMapping { .. }));
    }

    #[test]
    fn dead_coarse_label_rejected() {
        let err = ProtocolHierarchy::new(
            vec!["a".into()],
            vec!["x".into(), "y".into()],
            vec!["g".into()],
            &[("a".into(), "x".into())],
            &[("x".into(), "g".into()), ("y".into(), "g".into())],
        )
        .unwrap_err();
        assert!(matches!(err, HierarchyError::DanglingMapping { .. }));
    }

    #[test]
    fn relabel() {
        let h = read_hierarchy(DEMO.as_bytes()).unwrap();
        let orders = vec![
            Order::new("1", "a", "b", "lumbar spine without contrast"),
            Order::new("2", "c", "d", "lumbar spine with and without contrast"),
            Order::new("3", "e", "f", "brain without contrast"),
        ];
        assert_eq!(relabel_dataset(&orders, &h, Level::Local).unwrap(), orders);
        let acr = relabel_dataset(&orders, &h, Level::Acr).unwrap();
        let before: BTreeSet<_> = orders.iter().map(|o| &o.protocol).collect();
        let after: BTreeSet<_> = acr.iter().map(|o| &o.protocol).collect();
        assert_eq!(before.len(), 3);
        assert_eq!(after.len(), 2);
        assert_eq!(acr[1].id, "2");
        assert_eq!(acr[1].indication, "c");

        let bad = vec![Order::new("9", "", "", "mystery")];
        assert!(matches!(
            relabel_dataset(&bad, &h, Level::Acr),
            Err(HierarchyError::UnknownLabel { .. })
        ));
    }

    #[test]
    fn level_parsing() {
        assert_eq!("ACR".parse::<Level>().unwrap(), Level::Acr);
        assert!(matches!(
            "bogus".parse::<Level>(),
            Err(HierarchyError::UnknownLevel(_))
        ));
    }

    fn arb_hierarchy() -> impl Strategy<Value = ProtocolHierarchy> {
        (1usize..5, 1usize..6, 1usize..30)
            .prop_flat_map(|(n_gen, extra_acr, extra_local)| {
                let n_acr = n_gen + extra_acr;
                let n_local = n_acr + extra_local;
                (
                    Just((n_gen, n_acr, n_local)),
                    prop::collection::vec(0..n_gen, n_acr - n_gen),
                    prop::collection::vec(0..n_acr, n_local - n_acr),
                )
            })
            .prop_map(|((n_gen, n_acr, n_local), acr_extra, local_extra)| {
                // first n_gen ACR labels cover each General once, the rest are random; same for local.
                let a2g: Vec<usize> = (0..n_gen).chain(acr_extra).collect();
                let l2a: Vec<usize> = (0..n_acr).chain(local_extra).collect();
                let rows: Vec<HierarchyRow> = (0..n_local)
                    .map(|l| {
                        HierarchyRow::new(
                            format!("l{l}"),
                            format!("a{}", l2a[l]),
                            format!("g{}", a2g[l2a[l]]),
                        )
                    })
                    .collect();
                ProtocolHierarchy::from_rows(&rows).unwrap()
            })
    }

    proptest! {
        #[test]
        fn composition_consistent(h in arb_hierarchy()) {
            for l in h.labels(Level::Local) {
                let direct = h.coarsen(l, Level::Local, Level::General).unwrap();
                let via = h.coarsen(h.coarsen(l, Level::Local, Level::Acr).unwrap(), Level::Acr, Level::General).unwrap();
                prop_assert_eq!(direct, via);
            }
            prop_assert!(h.labels(Level::Acr).len() <= h.labels(Level::Local).len());
            prop_assert!(h.labels(Level::General).len() <= h.labels(Level::Acr).len());
        }

        #[test]
        fn csv_round_trip(h in arb_hierarchy()) {
            let mut buf = Vec::new();
            write_hierarchy(&mut buf, &h).unwrap();
            prop_assert_eq!(read_hierarchy(buf.as_slice()).unwrap(), h);
        }
    }
}
