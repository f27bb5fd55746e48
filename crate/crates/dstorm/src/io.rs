//! Plain-text import and export.
//!
//! Matrices are one row per line with space-separated decimals. Blank lines
//! and lines starting with `#` are skipped. Graphs travel as their 0/1
//! adjacency matrix in the same format. Datasets are delimited text with one
//! sample per row, features first and the label (0/1 or -1/1) last.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use dstorm_core::linalg::Matrix;
use dstorm_core::problems::Dataset;
use dstorm_core::topology::Graph;

use crate::error::{HarnessError, Result};

/// Formats with the shortest representation that parses back to the same
/// bits.
pub fn format_matrix(m: &Matrix) -> String {
    let mut out = String::new();
    for row in m.row_iter() {
        for (j, v) in row.iter().enumerate() {
            if j > 0 {
                out.push(' ');
            }
            write!(out, "{v}").unwrap();
        }
        out.push('\n');
    }
    out
}

pub fn parse_matrix(text: &str) -> Result<Matrix, String> {
    let mut rows = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let row = line
            .split_whitespace()
            .map(|tok| tok.parse::<f64>().map_err(|e| format!("line {}: {tok:?}: {e}", lineno + 1)))
            .collect::<Result<Vec<f64>, String>>()?;
        rows.push(row);
    }
    if rows.is_empty() {
        return Err("no rows".into());
    }
    Matrix::from_rows(&rows).map_err(|e| e.to_string())
}

pub fn write_matrix(path: &Path, m: &Matrix) -> Result<()> {
    fs::write(path, format_matrix(m)).map_err(|e| HarnessError::io(path, e))
}

pub fn read_matrix(path: &Path) -> Result<Matrix> {
    let text = fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
    parse_matrix(&text).map_err(|m| HarnessError::parse(path, m))
}

pub fn adjacency(g: &Graph) -> Matrix {
    let n = g.n_agents();
    let mut a = Matrix::zeros(n, n);
    for (i, j) in g.edges() {
        a[(i, j)] = 1.0;
        a[(j, i)] = 1.0;
    }
    a
}

/// Reads a symmetric 0/1 adjacency matrix with an empty diagonal.
pub fn graph_from_adjacency(a: &Matrix) -> Result<Graph, String> {
    let n = a.rows();
    if a.cols() != n {
        return Err(format!("adjacency matrix is {}x{}", n, a.cols()));
    }
    let mut edges = Vec::new();
    for i in 0..n {
        if a[(i, i)] != 0.0 {
            return Err(format!("self-loop at node {i}"));
        }
        for j in (i + 1)..n {
            let (v, w) = (a[(i, j)], a[(j, i)]);
            if v != w {
                return Err(format!("adjacency is not symmetric at ({i}, {j})"));
            }
            if v == 1.0 {
                edges.push((i, j));
            } else if v != 0.0 {
                return Err(format!("entry ({i}, {j}) = {v} is not 0 or 1"));
            }
        }
    }
    Graph::from_edges(n, edges).map_err(|e| e.to_string())
}

pub fn write_graph(path: &Path, g: &Graph) -> Result<()> {
    write_matrix(path, &adjacency(g))
}

pub fn read_graph(path: &Path) -> Result<Graph> {
    let a = read_matrix(path)?;
    graph_from_adjacency(&a).map_err(|m| HarnessError::parse(path, m))
}

pub fn read_dataset(path: &Path, delimiter: u8) -> Result<Dataset> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .delimiter(delimiter)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| HarnessError::parse(path, e))?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut labels = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| HarnessError::parse(path, e))?;
        let mut vals = rec
            .iter()
            .map(|t| t.parse::<f64>().map_err(|e| HarnessError::parse(path, format!("row {}: {t:?}: {e}", i + 1))))
            .collect::<Result<Vec<f64>>>()?;
        if vals.len() < 2 {
            return Err(HarnessError::parse(path, format!("row {} needs features and a label", i + 1)));
        }
        labels.push(vals.pop().unwrap());
        rows.push(vals);
    }
    if rows.is_empty() {
        return Err(HarnessError::parse(path, "no samples"));
    }
    let features = Matrix::from_rows(&rows).map_err(|e| HarnessError::parse(path, e))?;
    Dataset::new(features, labels).map_err(|e| HarnessError::parse(path, e))
}

/// Labels are written as 0/1.
pub fn write_dataset(path: &Path, data: &Dataset, delimiter: u8) -> Result<()> {
    let mut w =
        csv::WriterBuilder::new().delimiter(delimiter).from_path(path).map_err(|e| HarnessError::parse(path, e))?;
    for (row, label) in data.features.row_iter().zip(&data.labels) {
        let fields = row.iter().chain(std::iter::once(label)).map(|v| v.to_string());
        w.write_record(fields).map_err(|e| HarnessError::parse(path, e))?;
    }
    w.flush().map_err(|e| HarnessError::io(path, e))
}
