//! File plumbing shared by the pipeline stages: atomic writes, CSV and JSON
//! helpers, the on-disk graph store and the run manifest.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use chrono::NaiveDate;
use ndarray::Array2;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::graph::{GraphKind, GraphSequence, GraphSnapshot, Provenance};
use crate::market_data::{PricePanel, TradingCalendar};
use crate::{Error, Result};

pub const MANIFEST_FILE: &str = "manifest.json";
const TMP_SUFFIX: &str = ".tmp";

/// Writes `bytes` to a temporary sibling and renames it over `path`, creating
/// parent directories as needed.
pub fn write_atomic(path: impl AsRef<Path>, bytes: &[u8]) -> Result<()> {
    let path = path.as_ref();
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let mut name = path.file_name().map(|n| n.to_os_string()).unwrap_or_default();
    name.push(TMP_SUFFIX);
    let tmp = path.with_file_name(name);
    let mut f = fs::File::create(&tmp).map_err(|e| Error::io(&tmp, e))?;
    f.write_all(bytes).map_err(|e| Error::io(&tmp, e))?;
    f.sync_all().map_err(|e| Error::io(&tmp, e))?;
    drop(f);
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

/// Pretty JSON with a trailing newline.
pub fn write_json<S: Serialize + ?Sized>(path: impl AsRef<Path>, value: &S) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| Error::Data(format!("json: {e}")))?;
    text.push('\n');
    write_atomic(path, text.as_bytes())
}

pub fn read_json<D: for<'de> Deserialize<'de>>(path: impl AsRef<Path>) -> Result<D> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Data(format!("{}: {e}", path.display())))
}

/// Header plus records, all as strings.
pub fn write_csv<I, R, S>(path: impl AsRef<Path>, header: &[&str], records: I) -> Result<()>
where
    I: IntoIterator<Item = R>,
    R: IntoIterator<Item = S>,
    S: AsRef<[u8]>,
{
    let path = path.as_ref();
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).map_err(|e| Error::csv(path, e))?;
    for r in records {
        w.write_record(r).map_err(|e| Error::csv(path, e))?;
    }
    let bytes = w.into_inner().map_err(|e| Error::io(path, e.into_error()))?;
    write_atomic(path, &bytes)
}

/// Shortest representation that parses back to the same value.
pub fn num(x: f64) -> String {
    x.to_string()
}

/// Empty field for a missing value.
pub fn opt_num(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

/// Digest of a price panel's universe, calendar and every price bit pattern.
pub fn panel_fingerprint(panel: &PricePanel<f64>) -> String {
    let mut h = Sha256::new();
    for a in panel.assets() {
        h.update(format!("{}|{}|{}|{}\n", a.ticker, a.asset_class, a.first_date, a.last_date));
    }
    for d in panel.calendar().dates() {
        h.update(d.to_string());
    }
    for i in 0..panel.n_assets() {
        for p in panel.series(i) {
            h.update(p.map_or(u64::MAX, f64::to_bits).to_le_bytes());
        }
    }
    hex::encode(h.finalize())
}

/// Side file describing one stored graph (or the absence of one).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GraphRecord {
    pub date: NaiveDate,
    pub day: usize,
    pub learned: bool,
    pub kind: Option<GraphKind>,
    pub nodes: Vec<usize>,
    pub tickers: Vec<String>,
    pub n_edges: usize,
    pub provenance: Option<Provenance<f64>>,
}

fn graph_stem(dir: &Path, date: NaiveDate) -> (PathBuf, PathBuf) {
    (dir.join(format!("{date}.csv")), dir.join(format!("{date}.json")))
}

/// Writes one recompute day: `<date>.csv` with every nonzero upper-triangle
/// weight and `<date>.json` with nodes and solver statistics. A day without a
/// graph gets only the JSON, marked as not learned.
pub fn write_graph(dir: &Path, day: usize, date: NaiveDate, graph: Option<&GraphSnapshot<f64>>) -> Result<()> {
    let (csv_path, json_path) = graph_stem(dir, date);
    let Some(g) = graph else {
        return write_json(
            &json_path,
            &GraphRecord {
                date,
                day,
                learned: false,
                kind: None,
                nodes: Vec::new(),
                tickers: Vec::new(),
                n_edges: 0,
                provenance: None,
            },
        );
    };
    let n = g.n_nodes();
    let mut rows = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            let w = g.adjacency[[i, j]];
            if w != 0.0 {
                rows.push([g.tickers[i].clone(), g.tickers[j].clone(), num(w)]);
            }
        }
    }
    let n_edges = rows.len();
    write_csv(&csv_path, &["ticker_i", "ticker_j", "weight"], rows)?;
    write_json(
        &json_path,
        &GraphRecord {
            date,
            day,
            learned: true,
            kind: Some(g.kind),
            nodes: g.nodes.clone(),
            tickers: g.tickers.clone(),
            n_edges,
            provenance: Some(g.provenance.clone()),
        },
    )
}

pub fn graph_exists(dir: &Path, date: NaiveDate) -> bool {
    graph_stem(dir, date).1.exists()
}

#[derive(Deserialize)]
struct EdgeRow {
    ticker_i: String,
    ticker_j: String,
    weight: f64,
}

pub fn read_graph(dir: &Path, date: NaiveDate) -> Result<(usize, Option<GraphSnapshot<f64>>)> {
    let (csv_path, json_path) = graph_stem(dir, date);
    let rec: GraphRecord = read_json(&json_path)?;
    if !rec.learned {
        return Ok((rec.day, None));
    }
    let n = rec.nodes.len();
    let pos: BTreeMap<&str, usize> = rec.tickers.iter().enumerate().map(|(k, t)| (t.as_str(), k)).collect();
    let mut adjacency = Array2::zeros((n, n));
    let mut reader = csv::Reader::from_path(&csv_path).map_err(|e| Error::csv(&csv_path, e))?;
    for row in reader.deserialize::<EdgeRow>() {
        let row = row.map_err(|e| Error::csv(&csv_path, e))?;
        let (Some(&i), Some(&j)) = (pos.get(row.ticker_i.as_str()), pos.get(row.ticker_j.as_str())) else {
            return Err(Error::Data(format!("{}: edge names an unknown ticker", csv_path.display())));
        };
        adjacency[[i, j]] = row.weight;
        adjacency[[j, i]] = row.weight;
    }
    let g = GraphSnapshot {
        date,
        nodes: rec.nodes,
        tickers: rec.tickers,
        adjacency,
        kind: rec.kind.unwrap_or(GraphKind::Ensemble),
        provenance: rec.provenance.unwrap_or_default(),
    };
    Ok((rec.day, Some(g)))
}

/// Loads every stored day of `dir` whose date is on `calendar`.
pub fn read_graph_sequence(dir: &Path, calendar: &TradingCalendar, stride: usize) -> Result<GraphSequence<f64>> {
    let mut graphs = BTreeMap::new();
    if dir.is_dir() {
        let mut dates = Vec::new();
        for entry in fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
            let name = entry.map_err(|e| Error::io(dir, e))?.file_name();
            let name = name.to_string_lossy();
            if let Some(stem) = name.strip_suffix(".json") {
                if let Ok(d) = stem.parse::<NaiveDate>() {
                    dates.push(d);
                }
            }
        }
        dates.sort();
        for date in dates {
            if calendar.index_of(date).is_none() {
                continue;
            }
            let (day, g) = read_graph(dir, date)?;
            graphs.insert(day, g.map(Arc::new));
        }
    }
    Ok(GraphSequence {
        stride: stride.max(1),
        graphs,
    })
}

/// Writes every day of `seq` not already on disk (or every day when
/// `overwrite`). Returns the number of files pairs written.
pub fn write_graph_sequence(dir: &Path, seq: &GraphSequence<f64>, calendar: &TradingCalendar, overwrite: bool) -> Result<usize> {
    let mut written = 0;
    for (&day, g) in &seq.graphs {
        let date = calendar.date(day);
        if !overwrite && graph_exists(dir, date) {
            continue;
        }
        write_graph(dir, day, date, g.as_deref())?;
        written += 1;
    }
    Ok(written)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub path: String,
    pub bytes: u64,
    pub sha256: String,
}

/// Inventory of an output tree. Paths are relative with `/` separators and
/// sorted; each stage lists the files under its top-level directory.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunManifest {
    pub config_hash: String,
    pub code_version: String,
    pub seed: u64,
    pub stages: BTreeMap<String, Vec<String>>,
    pub files: Vec<ManifestEntry>,
}

impl RunManifest {
    /// Hash of the manifest's own canonical JSON.
    pub fn digest(&self) -> String {
        hex::encode(Sha256::digest(serde_json::to_vec(self).expect("manifest serializes")))
    }
}

fn collect_files(root: &Path, dir: &Path, out: &mut Vec<PathBuf>) -> Result<()> {
    for entry in fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
        let entry = entry.map_err(|e| Error::io(dir, e))?;
        let path = entry.path();
        let ty = entry.file_type().map_err(|e| Error::io(&path, e))?;
        if ty.is_dir() {
            collect_files(root, &path, out)?;
        } else {
            let rel = path.strip_prefix(root).expect("walk stays under root").to_path_buf();
            let name = rel.to_string_lossy();
            if name != MANIFEST_FILE && !name.ends_with(TMP_SUFFIX) {
                out.push(rel);
            }
        }
    }
    Ok(())
}

fn rel_string(p: &Path) -> String {
    p.components().map(|c| c.as_os_str().to_string_lossy().into_owned()).collect::<Vec<_>>().join("/")
}

/// Scans `root` and lists every file except the manifest itself.
pub fn build_manifest(root: &Path, config_hash: &str, seed: u64) -> Result<RunManifest> {
    let mut paths = Vec::new();
    if root.is_dir() {
        collect_files(root, root, &mut paths)?;
    }
    let mut files: Vec<ManifestEntry> = paths
        .iter()
        .map(|rel| {
            let full = root.join(rel);
            let bytes = fs::read(&full).map_err(|e| Error::io(&full, e))?;
            Ok(ManifestEntry {
                path: rel_string(rel),
                bytes: bytes.len() as u64,
                sha256: hex::encode(Sha256::digest(&bytes)),
            })
        })
        .collect::<Result<_>>()?;
    files.sort_by(|a, b| a.path.cmp(&b.path));
    let mut stages: BTreeMap<String, Vec<String>> = BTreeMap::new();
    for f in &files {
        let stage = f.path.split('/').next().filter(|_| f.path.contains('/')).unwrap_or(".");
        stages.entry(stage.to_string()).or_default().push(f.path.clone());
    }
    Ok(RunManifest {
        config_hash: config_hash.to_string(),
        code_version: env!("CARGO_PKG_VERSION").to_string(),
        seed,
        stages,
        files,
    })
}

pub fn write_manifest(root: &Path, config_hash: &str, seed: u64) -> Result<RunManifest> {
    let m = build_manifest(root, config_hash, seed)?;
    write_json(root.join(MANIFEST_FILE), &m)?;
    Ok(m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{GraphHyperParams, SolverReport};

    fn graph(date: NaiveDate) -> GraphSnapshot<f64> {
        let mut a = Array2::zeros((3, 3));
        for (i, j, w) in [(0, 1, 0.1 + 0.2), (1, 2, 1e-17), (0, 2, std::f64::consts::PI)] {
            a[[i, j]] = w;
            a[[j, i]] = w;
        }
        GraphSnapshot {
            date,
            nodes: vec![0, 2, 5],
            tickers: vec!["A".into(), "C".into(), "F".into()],
            adjacency: a,
            kind: GraphKind::Ensemble,
            provenance: Provenance {
                lookbacks: vec![63, 126],
                hyper: Some(GraphHyperParams { alpha: 0.5, beta: 1.0 }),
                reports: vec![SolverReport {
                    iterations: 12,
                    objective: -1.25,
                    kkt_residual: 3e-9,
                    converged: true,
                    wall_time: Default::default(),
                }],
            },
        }
    }

    #[test]
    fn atomic_write_leaves_no_temp_file() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a/b/c.txt");
        write_atomic(&p, b"one").unwrap();
        write_atomic(&p, b"two").unwrap();
        assert_eq!(fs::read(&p).unwrap(), b"two");
        let names: Vec<_> = fs::read_dir(p.parent().unwrap()).unwrap().map(|e| e.unwrap().file_name()).collect();
        assert_eq!(names.len(), 1);
    }

    #[test]
    fn graphs_round_trip_bit_exactly() {
        let dir = tempfile::tempdir().unwrap();
        let cal = TradingCalendar::business_days("2020-01-01".parse().unwrap(), 10);
        let g = graph(cal.date(4));
        write_graph(dir.path(), 4, cal.date(4), Some(&g)).unwrap();
        write_graph(dir.path(), 8, cal.date(8), None).unwrap();
        let seq = read_graph_sequence(dir.path(), &cal, 4).unwrap();
        assert_eq!(seq.graphs.len(), 2);
        assert_eq!(**seq.graphs[&4].as_ref().unwrap(), g);
        assert!(seq.graphs[&8].is_none());
        assert!(seq.at(9).is_none());
    }

    #[test]
    fn sequence_writes_skip_existing_days() {
        let dir = tempfile::tempdir().unwrap();
        let cal = TradingCalendar::business_days("2020-01-01".parse().unwrap(), 10);
        let mut seq = GraphSequence::<f64> {
            stride: 2,
            graphs: BTreeMap::new(),
        };
        seq.graphs.insert(2, Some(Arc::new(graph(cal.date(2)))));
        seq.graphs.insert(4, None);
        assert_eq!(write_graph_sequence(dir.path(), &seq, &cal, false).unwrap(), 2);
        assert_eq!(write_graph_sequence(dir.path(), &seq, &cal, false).unwrap(), 0);
        assert_eq!(write_graph_sequence(dir.path(), &seq, &cal, true).unwrap(), 2);
    }

    #[test]
    fn manifest_lists_every_file_once() {
        let dir = tempfile::tempdir().unwrap();
        write_atomic(dir.path().join("x/one.csv"), b"1").unwrap();
        write_atomic(dir.path().join("x/y/two.csv"), b"22").unwrap();
        write_atomic(dir.path().join("top.json"), b"{}").unwrap();
        let m = write_manifest(dir.path(), "h", 1).unwrap();
        let paths: Vec<&str> = m.files.iter().map(|f| f.path.as_str()).collect();
        assert_eq!(paths, ["top.json", "x/one.csv", "x/y/two.csv"]);
        assert_eq!(m.stages["x"].len(), 2);
        assert_eq!(m.stages["."], vec!["top.json"]);
        assert_eq!(m.files[2].bytes, 2);
        let again = write_manifest(dir.path(), "h", 1).unwrap();
        assert_eq!(again.digest(), m.digest());
    }
}
