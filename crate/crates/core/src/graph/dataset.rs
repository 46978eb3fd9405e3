//! Dataset container directory: `manifest.json` plus the edge, feature,
//! label and split files it references.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::{Graph, GraphError, SplitSpec};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub num_nodes: usize,
    pub num_features: usize,
    pub num_classes: usize,
    pub feature_file: String,
    pub edge_file: String,
    pub label_file: String,
    pub split_dir: String,
}

#[derive(Debug, Serialize, Deserialize)]
struct SplitFile {
    train: Vec<usize>,
    val: Vec<usize>,
    test: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub graph: Graph,
    /// Sorted by seed.
    pub splits: Vec<SplitSpec>,
}

impl Dataset {
    pub fn split(&self, seed: u64) -> Option<&SplitSpec> {
        self.splits.iter().find(|s| s.seed == seed)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FeatureFormat {
    /// Row-major little-endian `f32`.
    Binary,
    Tsv,
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> GraphError + '_ {
    move |source| GraphError::Io { path: path.to_path_buf(), source }
}

fn read_text(path: &Path) -> Result<String, GraphError> {
    fs::read_to_string(path).map_err(io_err(path))
}

fn parse_err(path: &Path, line: usize, msg: impl Into<String>) -> GraphError {
    GraphError::Parse { path: path.to_path_buf(), line, msg: msg.into() }
}

/// Reads an `rows x cols` real matrix. `.tsv` files hold one whitespace
/// separated row per line; anything else is read as row-major little-endian
/// `f32`. When `cols` is `None` the width is inferred.
pub fn read_dense_matrix(path: &Path, rows: usize, cols: Option<usize>) -> Result<DMatrix<f64>, GraphError> {
    let is_tsv = path.extension().is_some_and(|e| e == "tsv");
    let m = if is_tsv {
        let text = read_text(path)?;
        let mut data = Vec::new();
        let mut width = cols;
        let mut nrows = 0;
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let row: Vec<f64> = line
                .split_whitespace()
                .map(|t| t.parse::<f64>().map_err(|e| parse_err(path, i + 1, e.to_string())))
                .collect::<Result<_, _>>()?;
            match width {
                Some(w) if w != row.len() => {
                    return Err(GraphError::DimensionMismatch {
                        what: "matrix columns",
                        expected: w,
                        found: row.len(),
                    })
                }
                None => width = Some(row.len()),
                _ => {}
            }
            data.extend(row);
            nrows += 1;
        }
        if nrows != rows {
            return Err(GraphError::DimensionMismatch { what: "matrix rows", expected: rows, found: nrows });
        }
        DMatrix::from_row_slice(rows, width.unwrap_or(0), &data)
    } else {
        let bytes = fs::read(path).map_err(io_err(path))?;
        if bytes.len() % 4 != 0 {
            return Err(parse_err(path, 0, "length is not a multiple of 4 bytes"));
        }
        let values: Vec<f64> = bytes
            .chunks_exact(4)
            .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64)
            .collect();
        let width = match cols {
            Some(c) => c,
            None if rows > 0 && values.len() % rows == 0 => values.len() / rows,
            None => {
                return Err(GraphError::DimensionMismatch {
                    what: "matrix rows (value count not divisible)",
                    expected: rows,
                    found: values.len(),
                })
            }
        };
        if values.len() != rows * width {
            return Err(GraphError::DimensionMismatch {
                what: "matrix values",
                expected: rows * width,
                found: values.len(),
            });
        }
        DMatrix::from_row_slice(rows, width, &values)
    };
    if let Some(p) = m.iter().position(|x| !x.is_finite()) {
        return Err(GraphError::NonFinite { row: p % rows.max(1), col: p / rows.max(1) });
    }
    Ok(m)
}

fn read_edges(path: &Path) -> Result<Vec<(usize, usize)>, GraphError> {
    let text = read_text(path)?;
    let mut edges = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let mut it = line.split('\t').map(str::trim);
        let mut next = || -> Result<usize, GraphError> {
            it.next()
                .ok_or_else(|| parse_err(path, i + 1, "expected two node indices"))?
                .parse()
                .map_err(|e: std::num::ParseIntError| parse_err(path, i + 1, e.to_string()))
        };
        let (u, v) = (next()?, next()?);
        edges.push((u, v));
    }
    Ok(edges)
}

fn read_labels(path: &Path, num_classes: usize) -> Result<Vec<Option<usize>>, GraphError> {
    let text = read_text(path)?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, line)| {
            let v: i64 = line.trim().parse().map_err(|e: std::num::ParseIntError| parse_err(path, i + 1, e.to_string()))?;
            match v {
                -1 => Ok(None),
                c if c >= 0 && (c as usize) < num_classes => Ok(Some(c as usize)),
                c => Err(GraphError::UnknownClass { node: i, class: c, num_classes }),
            }
        })
        .collect()
}

fn read_splits(dir: &Path, num_nodes: usize) -> Result<Vec<SplitSpec>, GraphError> {
    let mut splits = Vec::new();
    if !dir.exists() {
        return Ok(splits);
    }
    for entry in fs::read_dir(dir).map_err(io_err(dir))? {
        let path = entry.map_err(io_err(dir))?.path();
        let Some(seed) = path
            .file_name()
            .and_then(|n| n.to_str())
            .and_then(|n| n.strip_prefix("seed_"))
            .and_then(|n| n.strip_suffix(".json"))
            .and_then(|n| n.parse::<u64>().ok())
        else {
            continue;
        };
        let file: SplitFile = serde_json::from_str(&read_text(&path)?)
            .map_err(|source| GraphError::Json { path: path.clone(), source })?;
        splits.push(SplitSpec::new(seed, file.train, file.val, file.test, num_nodes)?);
    }
    splits.sort_by_key(|s| s.seed);
    Ok(splits)
}

/// Loads and validates a dataset directory.
pub fn load_dataset(dir: &Path) -> Result<Dataset, GraphError> {
    let manifest_path = dir.join("manifest.json");
    let manifest: Manifest = serde_json::from_str(&read_text(&manifest_path)?)
        .map_err(|source| GraphError::Json { path: manifest_path, source })?;
    let n = manifest.num_nodes;

    let edges = read_edges(&dir.join(&manifest.edge_file))?;
    let features = read_dense_matrix(&dir.join(&manifest.feature_file), n, Some(manifest.num_features))?;
    let labels = read_labels(&dir.join(&manifest.label_file), manifest.num_classes)?;
    if labels.len() != n {
        return Err(GraphError::DimensionMismatch { what: "label lines", expected: n, found: labels.len() });
    }
    let graph = Graph::new(n, edges, features, labels, manifest.num_classes)?;
    let splits = read_splits(&dir.join(&manifest.split_dir), n)?;
    Ok(Dataset { graph, splits })
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), GraphError> {
    let mut f = fs::File::create(path).map_err(io_err(path))?;
    f.write_all(bytes).map_err(io_err(path))
}

/// Writes a row-major matrix in the binary `f32` convention.
pub(crate) fn write_matrix_bin(path: &Path, m: &DMatrix<f64>) -> Result<(), GraphError> {
    let mut bytes = Vec::with_capacity(m.len() * 4);
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            bytes.extend_from_slice(&(m[(i, j)] as f32).to_le_bytes());
        }
    }
    write_file(path, &bytes)
}

/// Writes a dataset directory that [`load_dataset`] reads back.
///
/// The binary feature format stores `f32`, so features that are not exactly
/// representable lose precision on the round trip; TSV keeps full precision.
pub fn save_dataset(dir: &Path, data: &Dataset, format: FeatureFormat) -> Result<(), GraphError> {
    let g = &data.graph;
    let feature_file = match format {
        FeatureFormat::Binary => "features.bin",
        FeatureFormat::Tsv => "features.tsv",
    };
    let manifest = Manifest {
        num_nodes: g.num_nodes(),
        num_features: g.num_features(),
        num_classes: g.num_classes(),
        feature_file: feature_file.into(),
        edge_file: "edges.tsv".into(),
        label_file: "labels.tsv".into(),
        split_dir: "splits".into(),
    };
    fs::create_dir_all(dir.join(&manifest.split_dir)).map_err(io_err(dir))?;
    let manifest_json = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    write_file(&dir.join("manifest.json"), manifest_json.as_bytes())?;

    let edges: String = g.edges().iter().map(|(u, v)| format!("{u}\t{v}\n")).collect();
    write_file(&dir.join(&manifest.edge_file), edges.as_bytes())?;

    let feature_path = dir.join(&manifest.feature_file);
    match format {
        FeatureFormat::Binary => write_matrix_bin(&feature_path, g.features())?,
        FeatureFormat::Tsv => {
            let f = g.features();
            let text: String = (0..f.nrows())
                .map(|i| {
                    let row: Vec<String> = f.row(i).iter().map(|x| format!("{x:?}")).collect();
                    row.join("\t") + "\n"
                })
                .collect();
            write_file(&feature_path, text.as_bytes())?;
        }
    }

    let labels: String = g
        .labels()
        .iter()
        .map(|l| match l {
            Some(c) => format!("{c}\n"),
            None => "-1\n".to_string(),
        })
        .collect();
    write_file(&dir.join(&manifest.label_file), labels.as_bytes())?;

    for split in &data.splits {
        let file = SplitFile { train: split.train.clone(), val: split.val.clone(), test: split.test.clone() };
        let path: PathBuf = dir.join(&manifest.split_dir).join(format!("seed_{}.json", split.seed));
        write_file(&path, serde_json::to_string(&file).expect("split serializes").as_bytes())?;
    }
    Ok(())
}
