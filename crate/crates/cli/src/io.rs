//! Plain-text formats: point CSVs, truth and center sidecars, edge lists.

use std::collections::{BTreeSet, HashMap};
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use robclust_core::{Centroids, DMatrix, DataSet};

use crate::error::CliError;

fn read(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

fn write(path: &Path, text: &str) -> Result<(), CliError> {
    fs::write(path, text).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

fn parse_err(path: &Path, line: usize, msg: impl std::fmt::Display) -> CliError {
    CliError::Data(format!("{}:{line}: {msg}", path.display()))
}

fn is_comment_or_blank(line: &str) -> bool {
    let t = line.trim();
    t.is_empty() || t.starts_with('#')
}

/// Comma-separated rows of numbers. A first row whose first token is not a
/// number is taken as a header. With `label_column`, the last column holds
/// integer cluster labels and becomes the truth labels.
pub fn load_csv(path: &Path, label_column: bool) -> Result<DataSet, CliError> {
    let text = read(path)?;
    let mut values = Vec::new();
    let mut labels = Vec::new();
    let mut width = None;
    let mut first = true;
    for (i, line) in text.lines().enumerate() {
        let lineno = i + 1;
        if is_comment_or_blank(line) {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if first {
            first = false;
            if fields[0].parse::<f64>().is_err() {
                continue;
            }
        }
        match width {
            None => width = Some(fields.len()),
            Some(w) if w != fields.len() => {
                return Err(parse_err(
                    path,
                    lineno,
                    format!("expected {w} fields, found {}", fields.len()),
                ));
            }
            _ => {}
        }
        let (features, label) = if label_column {
            if fields.len() < 2 {
                return Err(parse_err(
                    path,
                    lineno,
                    "need at least one feature besides the label",
                ));
            }
            let (f, l) = fields.split_at(fields.len() - 1);
            (f, Some(l[0]))
        } else {
            (&fields[..], None)
        };
        for f in features {
            let v: f64 = f
                .parse()
                .map_err(|_| parse_err(path, lineno, format!("not a number: {f:?}")))?;
            values.push(v);
        }
        if let Some(l) = label {
            labels.push(
                l.parse::<usize>()
                    .map_err(|_| parse_err(path, lineno, format!("bad label {l:?}")))?,
            );
        }
    }
    let Some(w) = width else {
        return Err(CliError::Data(format!("{}: no data rows", path.display())));
    };
    let dim = if label_column { w - 1 } else { w };
    let n = values.len() / dim;
    let x = DataSet::from_row_slice(n, dim, &values)
        .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    if label_column {
        x.with_truth_labels(labels).map_err(CliError::from)
    } else {
        Ok(x)
    }
}

/// Writes points as CSV with an `x0,x1,…` header.
pub fn write_csv(path: &Path, x: &DataSet) -> Result<(), CliError> {
    let mut out = String::new();
    let header: Vec<String> = (0..x.dim()).map(|j| format!("x{j}")).collect();
    out.push_str(&header.join(","));
    out.push('\n');
    for row in x.x().row_iter() {
        let cells: Vec<String> = row.iter().map(|v| format!("{v:?}")).collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    write(path, &out)
}

/// `data.csv` → `data.truth.csv`.
pub fn sidecar(path: &Path, kind: &str) -> PathBuf {
    let stem = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    path.with_file_name(format!("{stem}.{kind}.csv"))
}

/// Truth labels and outlier flags, one `label,outlier` row per point.
#[derive(Debug, Clone, PartialEq)]
pub struct Truth {
    pub labels: Vec<usize>,
    pub outliers: Vec<bool>,
}

pub fn write_truth(path: &Path, truth: &Truth) -> Result<(), CliError> {
    let mut out = String::from("label,outlier\n");
    for (l, o) in truth.labels.iter().zip(&truth.outliers) {
        let _ = writeln!(out, "{l},{}", u8::from(*o));
    }
    write(path, &out)
}

pub fn load_truth(path: &Path) -> Result<Truth, CliError> {
    let text = read(path)?;
    let mut truth = Truth {
        labels: Vec::new(),
        outliers: Vec::new(),
    };
    for (i, line) in text.lines().enumerate() {
        if is_comment_or_blank(line) || (i == 0 && line.trim_start().starts_with("label")) {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != 2 {
            return Err(parse_err(path, i + 1, "expected label,outlier"));
        }
        let label = fields[0]
            .parse()
            .map_err(|_| parse_err(path, i + 1, format!("bad label {:?}", fields[0])))?;
        let outlier = match fields[1] {
            "0" | "false" => false,
            "1" | "true" => true,
            other => return Err(parse_err(path, i + 1, format!("bad outlier flag {other:?}"))),
        };
        truth.labels.push(label);
        truth.outliers.push(outlier);
    }
    Ok(truth)
}

/// Centers as CSV, one center per row.
pub fn write_centers(path: &Path, centers: &Centroids) -> Result<(), CliError> {
    let m = centers.matrix();
    let mut out = String::new();
    for c in 0..m.ncols() {
        let cells: Vec<String> = m.column(c).iter().map(|v| format!("{v:?}")).collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    write(path, &out)
}

pub fn load_centers(path: &Path) -> Result<Centroids, CliError> {
    let x = load_csv(path, false)?;
    Centroids::new(x.x().transpose()).map_err(CliError::from)
}

/// Undirected graph read from an edge list.
#[derive(Debug, Clone, PartialEq)]
pub struct Graph {
    pub adjacency: DMatrix<f64>,
    /// Node name for every index.
    pub names: Vec<String>,
}

/// Whitespace-separated node pairs, `#` comments. When every id is a
/// non-negative integer the ids are used as indices; otherwise ids get dense
/// indices in first-seen order. Self-loops are dropped and duplicate edges
/// collapse with a warning.
pub fn load_edgelist(path: &Path) -> Result<Graph, CliError> {
    let text = read(path)?;
    let mut pairs = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let content = line.split('#').next().unwrap_or("");
        let tokens: Vec<&str> = content.split_whitespace().collect();
        match tokens.len() {
            0 => continue,
            2 => pairs.push((tokens[0].to_string(), tokens[1].to_string(), i + 1)),
            n => {
                return Err(parse_err(
                    path,
                    i + 1,
                    format!("expected 2 node ids, found {n} tokens"),
                ))
            }
        }
    }
    if pairs.is_empty() {
        return Err(CliError::Data(format!("{}: no edges", path.display())));
    }

    let numeric = pairs
        .iter()
        .all(|(a, b, _)| a.parse::<usize>().is_ok() && b.parse::<usize>().is_ok());
    let mut names: Vec<String> = Vec::new();
    let mut index: HashMap<String, usize> = HashMap::new();
    let mut edges = Vec::with_capacity(pairs.len());
    for (a, b, line) in &pairs {
        let mut id = |s: &str| -> usize {
            if numeric {
                s.parse().expect("checked numeric")
            } else {
                *index.entry(s.to_string()).or_insert_with(|| {
                    names.push(s.to_string());
                    names.len() - 1
                })
            }
        };
        let (i, j) = (id(a), id(b));
        edges.push((i, j, *line));
    }
    let n = if numeric {
        let n = edges.iter().map(|&(i, j, _)| i.max(j)).max().expect("non-empty") + 1;
        names = (0..n).map(|i| i.to_string()).collect();
        n
    } else {
        names.len()
    };

    let mut adjacency = DMatrix::zeros(n, n);
    let mut seen = BTreeSet::new();
    for (i, j, line) in edges {
        if i == j {
            log::warn!("{}:{line}: dropping self-loop on {}", path.display(), names[i]);
            continue;
        }
        if !seen.insert((i.min(j), i.max(j))) {
            log::warn!(
                "{}:{line}: duplicate edge {} {}",
                path.display(),
                names[i],
                names[j]
            );
            continue;
        }
        adjacency[(i, j)] = 1.0;
        adjacency[(j, i)] = 1.0;
    }
    Ok(Graph { adjacency, names })
}
