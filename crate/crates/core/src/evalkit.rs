//! Evaluation metrics and the tables behind the accuracy, percentile,
//! delta-histogram and threshold-sweep figures.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::Order;
use crate::neural::MlpModel;
use crate::protocols::{relabel_dataset, HierarchyError, Level, ProtocolHierarchy};
use crate::router::{compute_delta, normalize_scores, rank_indices, rank_of, RouterError};

#[derive(Debug, thiserror::Error)]
pub enum EvalError {
    #[error("label space mismatch: {0}")]
    LabelSpaceMismatch(String),
    #[error("k = {k} outside [1, {n}]")]
    InvalidK { k: usize, n: usize },
    #[error("rank {rank} outside [1, {n}] (n must be at least 2)")]
    InvalidRank { rank: usize, n: usize },
    #[error("bin edges must be strictly increasing and cover [{low}, {high}]")]
    BadBinEdges { low: f64, high: f64 },
    #[error("thresholds must be sorted ascending")]
    UnsortedThresholds,
    #[error("no evaluation records")]
    EmptyRecords,
    #[error(transparent)]
    Router(#[from] RouterError),
    #[error(transparent)]
    Hierarchy(#[from] HierarchyError),
    #[error(transparent)]
    Neural(#[from] crate::neural::NeuralError),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
    #[error("bad number `{0}` in report file")]
    BadNumber(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

/// Outcome of scoring one test order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRecord {
    pub order_id: String,
    pub true_index: usize,
    pub logits: Vec<f64>,
    pub normalized: Vec<f64>,
    pub delta: f64,
    /// 1 = top-scored.
    pub rank: usize,
    pub percentile: f64,
}

impl EvalRecord {
    pub fn new(
        order_id: impl Into<String>,
        true_index: usize,
        logits: Vec<f64>,
    ) -> Result<Self, EvalError> {
        let normalized = normalize_scores(&logits)?;
        let n = logits.len();
        if true_index >= n {
            return Err(EvalError::LabelSpaceMismatch(format!(
                "true index {true_index} with {n} outputs"
            )));
        }
        let delta = compute_delta(&normalized)?;
        let rank = rank_of(&logits, true_index);
        let percentile = percentile_of_rank(rank, n)?;
        Ok(Self {
            order_id: order_id.into(),
            true_index,
            logits,
            normalized,
            delta,
            rank,
            percentile,
        })
    }

    pub fn n_classes(&self) -> usize {
        self.logits.len()
    }

    /// Index of the top-ranked class.
    pub fn predicted(&self) -> usize {
        rank_indices(&self.logits)[0]
    }

    pub fn is_top1(&self) -> bool {
        self.rank == 1
    }
}

/// Run `model` over `test_orders` (Local labels), relabeled to `level`.
pub fn evaluate(
    model: &MlpModel,
    test_orders: &[Order],
    hierarchy: &ProtocolHierarchy,
    level: Level,
) -> Result<Vec<EvalRecord>, EvalError> {
    if model.level != level || model.labels.as_slice() != hierarchy.labels(level) {
        return Err(EvalError::LabelSpaceMismatch(format!(
            "model has {} {} labels, hierarchy level {} has {}",
            model.labels.len(),
            model.level,
            level,
            hierarchy.labels(level).len()
        )));
    }
    let relabeled = relabel_dataset(test_orders, hierarchy, level)?;
    let normalizer = model.normalizer();
    let features: Vec<_> = relabeled
        .iter()
        .map(|o| model.vocabulary.encode_with(o, &normalizer).0)
        .collect();
    let logits = model.infer(&features)?;
    relabeled
        .iter()
        .zip(logits.iter_rows())
        .map(|(o, row)| {
            let truth = hierarchy
                .index_of(level, &o.protocol)
                .expect("relabeled to this level");
            EvalRecord::new(
                o.id.clone(),
                truth,
                row.iter().map(|&v| f64::from(v)).collect(),
            )
        })
        .collect()
}

pub fn top_k_accuracy(records: &[EvalRecord], k: usize) -> Result<f64, EvalError> {
    let n = records.first().ok_or(EvalError::EmptyRecords)?.n_classes();
    if k == 0 || k > n {
        return Err(EvalError::InvalidK { k, n });
    }
    Ok(records.iter().filter(|r| r.rank <= k).count() as f64 / records.len() as f64)
}

/// `100 · (n − rank) / (n − 1)`: rank 1 is the 100th percentile.
pub fn percentile_of_rank(rank: usize, n: usize) -> Result<f64, EvalError> {
    if n < 2 || rank == 0 || rank > n {
        return Err(EvalError::InvalidRank { rank, n });
    }
    Ok(100.0 * (n - rank) as f64 / (n - 1) as f64)
}

/// Top-1 accuracy after mapping both prediction and truth from `from` to the
/// coarser level `to`.
pub fn coarse_top1_accuracy(
    records: &[EvalRecord],
    hierarchy: &ProtocolHierarchy,
    from: Level,
    to: Level,
) -> Result<f64, EvalError> {
    if records.is_empty() {
        return Err(EvalError::EmptyRecords);
    }
    let mut correct = 0usize;
    for r in records {
        let pred = hierarchy.coarsen_index(r.predicted(), from, to)?;
        let truth = hierarchy.coarsen_index(r.true_index, from, to)?;
        correct += usize::from(pred == truth);
    }
    Ok(correct as f64 / records.len() as f64)
}

/// `m[truth][predicted]` counts.
pub fn confusion_matrix(records: &[EvalRecord]) -> Result<Vec<Vec<usize>>, EvalError> {
    let n = records.first().ok_or(EvalError::EmptyRecords)?.n_classes();
    let mut m = vec![vec![0usize; n]; n];
    for r in records {
        m[r.true_index][r.predicted()] += 1;
    }
    Ok(m)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairConfusion {
    pub pair: [usize; 2],
    /// Errors between the two members, both directions.
    pub within_pair: usize,
    /// Largest two-way error count between a member and any protocol outside the pair.
    pub max_unrelated: usize,
}

impl PairConfusion {
    /// `None` when nothing outside the pair is confused with it.
    pub fn ratio(&self) -> Option<f64> {
        (self.max_unrelated > 0).then(|| self.within_pair as f64 / self.max_unrelated as f64)
    }

    pub fn dominated_by_pair(&self) -> bool {
        self.within_pair > self.max_unrelated
    }
}

/// Confusion between lateral pair members against confusion with everything else.
pub fn lateral_confusion(
    records: &[EvalRecord],
    pairs: &[[usize; 2]],
) -> Result<Vec<PairConfusion>, EvalError> {
    let m = confusion_matrix(records)?;
    let n = m.len();
    let two_way = |a: usize, b: usize| m[a][b] + m[b][a];
    pairs
        .iter()
        .map(|&[a, b]| {
            if a >= n || b >= n || a == b {
                return Err(EvalError::LabelSpaceMismatch(format!(
                    "bad pair ({a}, {b}) for {n} classes"
                )));
            }
            let max_unrelated = (0..n)
                .filter(|&c| c != a && c != b)
                .map(|c| two_way(a, c).max(two_way(b, c)))
                .max()
                .unwrap_or(0);
            Ok(PairConfusion {
                pair: [a, b],
                within_pair: two_way(a, b),
                max_unrelated,
            })
        })
        .collect()
}

fn check_edges(edges: &[f64], low: f64, high: f64) -> Result<(), EvalError> {
    let ok = edges.len() >= 2
        && edges.windows(2).all(|w| w[0] < w[1])
        && edges[0] <= low
        && *edges.last().expect("len >= 2") >= high;
    if ok {
        Ok(())
    } else {
        Err(EvalError::BadBinEdges { low, high })
    }
}

/// Bin index for `v`: bins are `[e_i, e_{i+1})`, the last bin also takes its
/// right edge.
fn bin_of(edges: &[f64], v: f64) -> Option<usize> {
    let last = edges.len() - 2;
    if v < edges[0] || v > edges[last + 1] {
        return None;
    }
    let i = edges.partition_point(|&e| e <= v).saturating_sub(1);
    Some(i.min(last))
}

pub fn uniform_edges(low: f64, high: f64, bins: usize) -> Vec<f64> {
    (0..=bins)
        .map(|i| low + (high - low) * i as f64 / bins as f64)
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistBin {
    pub bin_low: f64,
    pub bin_high: f64,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeltaBin {
    pub bin_low: f64,
    pub bin_high: f64,
    pub ap_plus: usize,
    pub ap_minus: usize,
}

pub fn percentile_histogram(
    records: &[EvalRecord],
    edges: &[f64],
) -> Result<Vec<HistBin>, EvalError> {
    check_edges(edges, 0.0, 100.0)?;
    let mut counts = vec![0usize; edges.len() - 1];
    for r in records {
        counts[bin_of(edges, r.percentile).expect("percentile within edges")] += 1;
    }
    Ok(edges
        .windows(2)
        .zip(counts)
        .map(|(w, count)| HistBin {
            bin_low: w[0],
            bin_high: w[1],
            count,
        })
        .collect())
}

/// Delta histograms split by whether the top recommendation was correct
/// (AP+) or not (AP−).
pub fn delta_histograms(records: &[EvalRecord], edges: &[f64]) -> Result<Vec<DeltaBin>, EvalError> {
    check_edges(edges, 0.0, 1.0)?;
    let mut bins: Vec<DeltaBin> = edges
        .windows(2)
        .map(|w| DeltaBin {
            bin_low: w[0],
            bin_high: w[1],
            ap_plus: 0,
            ap_minus: 0,
        })
        .collect();
    for r in records {
        let b = &mut bins[bin_of(edges, r.delta).expect("delta within [0, 1]")];
        if r.is_top1() {
            b.ap_plus += 1;
        } else {
            b.ap_minus += 1;
        }
    }
    Ok(bins)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub threshold: f64,
    pub ap_fraction: f64,
    /// Top-1 accuracy among AP-routed orders; `None` when none are routed.
    pub ap_accuracy: Option<f64>,
    /// Top-k hit rate among CDS-routed orders; `None` when none are routed.
    pub cds_hit_rate: Option<f64>,
}

pub fn threshold_sweep(
    records: &[EvalRecord],
    thresholds: &[f64],
    k: usize,
) -> Result<Vec<SweepRow>, EvalError> {
    if records.is_empty() {
        return Err(EvalError::EmptyRecords);
    }
    if thresholds.windows(2).any(|w| w[0] > w[1]) || thresholds.iter().any(|t| t.is_nan()) {
        return Err(EvalError::UnsortedThresholds);
    }
    let n = records[0].n_classes();
    if k == 0 || k > n {
        return Err(EvalError::InvalidK { k, n });
    }
    let total = records.len() as f64;
    Ok(thresholds
        .iter()
        .map(|&t| {
            let (mut ap, mut ap_ok, mut cds, mut cds_ok) = (0usize, 0usize, 0usize, 0usize);
            for r in records {
                if r.delta >= t {
                    ap += 1;
                    ap_ok += usize::from(r.rank == 1);
                } else {
                    cds += 1;
                    cds_ok += usize::from(r.rank <= k);
                }
            }
            SweepRow {
                threshold: t,
                ap_fraction: ap as f64 / total,
                ap_accuracy: (ap > 0).then(|| ap_ok as f64 / ap as f64),
                cds_hit_rate: (cds > 0).then(|| cds_ok as f64 / cds as f64),
            }
        })
        .collect())
}

/// 50 log-spaced thresholds from 1e-4 to 1.
pub fn default_threshold_grid() -> Vec<f64> {
    (0..50)
        .map(|i| 10f64.powf(-4.0 + 4.0 * i as f64 / 49.0))
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReportOptions {
    /// CDS list length used for the sweep's hit rate.
    pub k: usize,
    pub delta_edges: Vec<f64>,
    pub percentile_edges: Vec<f64>,
    pub thresholds: Vec<f64>,
}

impl Default for ReportOptions {
    fn default() -> Self {
        Self {
            k: crate::router::DEFAULT_K,
            delta_edges: uniform_edges(0.0, 1.0, 50),
            percentile_edges: uniform_edges(0.0, 100.0, 20),
            thresholds: default_threshold_grid(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AccuracyAtK {
    pub k: usize,
    pub accuracy: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub record_count: usize,
    pub accuracy_by_k: Vec<AccuracyAtK>,
    pub percentile_hist: Vec<HistBin>,
    pub delta_hist: Vec<DeltaBin>,
    pub threshold_sweep: Vec<SweepRow>,
}

impl EvalReport {
    /// Aggregate records. An empty record list yields an empty report.
    pub fn build(records: &[EvalRecord], options: &ReportOptions) -> Result<Self, EvalError> {
        let Some(first) = records.first() else {
            return Ok(Self::default());
        };
        let n = first.n_classes();
        let accuracy_by_k = (1..=n)
            .map(|k| top_k_accuracy(records, k).map(|accuracy| AccuracyAtK { k, accuracy }))
            .collect::<Result<_, _>>()?;
        Ok(Self {
            record_count: records.len(),
            accuracy_by_k,
            percentile_hist: percentile_histogram(records, &options.percentile_edges)?,
            delta_hist: delta_histograms(records, &options.delta_edges)?,
            threshold_sweep: threshold_sweep(records, &options.thresholds, options.k.min(n))?,
        })
    }

    pub fn accuracy_at(&self, k: usize) -> Option<f64> {
        self.accuracy_by_k
            .iter()
            .find(|a| a.k == k)
            .map(|a| a.accuracy)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Csv,
    Json,
    Both,
}

pub const ACCURACY_CSV: &str = "accuracy_by_k.csv";
pub const PERCENTILE_CSV: &str = "percentile_hist.csv";
pub const DELTA_CSV: &str = "delta_hist.csv";
pub const SWEEP_CSV: &str = "threshold_sweep.csv";
pub const REPORT_JSON: &str = "report.json";

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn write_csv(
    path: &Path,
    header: &[&str],
    rows: impl Iterator<Item = Vec<String>>,
) -> Result<(), EvalError> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(header)?;
    for row in rows {
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// Write the report into `dir`; returns the files written. Floats are
/// written in shortest round-trip form.
pub fn emit_report(
    report: &EvalReport,
    dir: impl AsRef<Path>,
    format: ReportFormat,
) -> Result<Vec<String>, EvalError> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    if matches!(format, ReportFormat::Csv | ReportFormat::Both) {
        write_csv(
            &dir.join(ACCURACY_CSV),
            &["k", "accuracy"],
            report
                .accuracy_by_k
                .iter()
                .map(|a| vec![a.k.to_string(), a.accuracy.to_string()]),
        )?;
        write_csv(
            &dir.join(PERCENTILE_CSV),
            &["bin_low", "bin_high", "count"],
            report.percentile_hist.iter().map(|b| {
                vec![
                    b.bin_low.to_string(),
                    b.bin_high.to_string(),
                    b.count.to_string(),
                ]
            }),
        )?;
        write_csv(
            &dir.join(DELTA_CSV),
            &["bin_low", "bin_high", "ap_plus", "ap_minus"],
            report.delta_hist.iter().map(|b| {
                vec![
                    b.bin_low.to_string(),
                    b.bin_high.to_string(),
                    b.ap_plus.to_string(),
                    b.ap_minus.to_string(),
                ]
            }),
        )?;
        write_threshold_sweep(&report.threshold_sweep, dir.join(SWEEP_CSV))?;
        written.extend([ACCURACY_CSV, PERCENTILE_CSV, DELTA_CSV, SWEEP_CSV].map(String::from));
    }
    if matches!(format, ReportFormat::Json | ReportFormat::Both) {
        let mut json = serde_json::to_vec_pretty(report)?;
        json.push(b'\n');
        fs::write(dir.join(REPORT_JSON), json)?;
        written.push(REPORT_JSON.to_string());
    }
    Ok(written)
}

pub fn write_threshold_sweep(rows: &[SweepRow], path: impl AsRef<Path>) -> Result<(), EvalError> {
    write_csv(
        path.as_ref(),
        &["threshold", "ap_fraction", "ap_accuracy", "cds_hit_rate"],
        rows.iter().map(|r| {
            vec![
                r.threshold.to_string(),
                r.ap_fraction.to_string(),
                opt(r.ap_accuracy),
                opt(r.cds_hit_rate),
            ]
        }),
    )
}

fn parse_opt(s: &str) -> Result<Option<f64>, EvalError> {
    if s.is_empty() {
        return Ok(None);
    }
    s.parse::<f64>()
        .map(Some)
        .map_err(|_| EvalError::BadNumber(s.to_string()))
}

/// Read a `threshold_sweep.csv` written by [`emit_report`].
pub fn read_threshold_sweep(path: impl AsRef<Path>) -> Result<Vec<SweepRow>, EvalError> {
    let mut rdr = csv::Reader::from_path(path)?;
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let num = |i: usize| parse_opt(rec.get(i).unwrap_or(""));
        rows.push(SweepRow {
            threshold: num(0)?.unwrap_or(f64::NAN),
            ap_fraction: num(1)?.unwrap_or(f64::NAN),
            ap_accuracy: num(2)?,
            cds_hit_rate: num(3)?,
        });
    }
    Ok(rows)
}

pub fn read_accuracy_by_k(path: impl AsRef<Path>) -> Result<Vec<AccuracyAtK>, EvalError> {
    let mut rdr = csv::Reader::from_path(path)?;
    Ok(rdr.deserialize().collect::<Result<_, _>>()?)
}

pub fn read_delta_hist(path: impl AsRef<Path>) -> Result<Vec<DeltaBin>, EvalError> {
    let mut rdr = csv::Reader::from_path(path)?;
    Ok(rdr.deserialize().collect::<Result<_, _>>()?)
}

pub fn read_percentile_hist(path: impl AsRef<Path>) -> Result<Vec<HistBin>, EvalError> {
    let mut rdr = csv::Reader::from_path(path)?;
    Ok(rdr.deserialize().collect::<Result<_, _>>()?)
}
