//! File formats: tree edge lists, data tables, reports, DOT export and the
//! run manifest.

mod dot;
mod manifest;

pub use dot::{export_dot, EffectMode};
pub use manifest::{sha256_hex, RunManifest};

use std::collections::HashSet;
use std::path::{Path, PathBuf};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::selection::{CpRow, EffectReport};
use crate::tree::Tree;

pub fn serialize_dvector<S: Serializer>(
    v: &DVector<f64>,
    s: S,
) -> std::result::Result<S::Ok, S::Error> {
    s.collect_seq(v.iter())
}

/// Fixed 17-significant-digit scientific notation; parses back exactly.
pub fn format_float(v: f64) -> String {
    format!("{v:.16e}")
}

fn parse_error(path: &Path, line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line,
        message: message.into(),
    }
}

/// Canonical edge list `parent,child,weight`, rows ordered by child in the
/// tree's topological numbering.
pub fn tree_to_csv(tree: &Tree) -> String {
    let mut out = String::from("parent,child,weight\n");
    for e in tree.edges() {
        out.push_str(&format!(
            "{},{},{}\n",
            tree.label(e.parent),
            tree.label(e.child),
            format_float(e.weight)
        ));
    }
    out
}

/// Parses an edge list. Nodes are `labels` when given (every edge label
/// must be among them), otherwise the labels in order of first appearance.
/// `path` is only used in error messages.
pub fn parse_tree_csv(text: &str, path: &Path, labels: Option<&[String]>) -> Result<Tree> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let header = reader
        .headers()
        .map_err(|e| parse_error(path, 1, e.to_string()))?
        .clone();
    if header.iter().collect::<Vec<_>>() != ["parent", "child", "weight"] {
        return Err(parse_error(path, 1, "expected header parent,child,weight"));
    }
    let mut edges = Vec::new();
    let mut seen: Vec<String> = Vec::new();
    let mut known = HashSet::new();
    for record in reader.records() {
        let record = record.map_err(|e| {
            let line = e.position().map(|p| p.line() as usize).unwrap_or(0);
            parse_error(path, line, e.to_string())
        })?;
        let line = record.position().map(|p| p.line() as usize).unwrap_or(0);
        let (parent, child) = (record[0].to_string(), record[1].to_string());
        if parent.is_empty() || child.is_empty() {
            return Err(parse_error(path, line, "empty node label"));
        }
        let weight: f64 = record[2]
            .parse()
            .map_err(|_| parse_error(path, line, format!("invalid weight `{}`", &record[2])))?;
        for l in [&parent, &child] {
            if known.insert(l.clone()) {
                seen.push(l.clone());
            }
        }
        edges.push((parent, child, weight));
    }
    let nodes = match labels {
        Some(ls) => {
            if let Some(l) = seen.iter().find(|l| !ls.contains(l)) {
                return Err(Error::LabelMismatch(format!(
                    "edge label `{l}` is not a data column"
                )));
            }
            ls.to_vec()
        }
        None => seen,
    };
    Tree::from_labeled_edges(nodes, &edges)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeDocument {
    pub nodes: Vec<String>,
    pub edges: Vec<TreeEdgeRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeEdgeRecord {
    pub parent: String,
    pub child: String,
    pub weight: f64,
}

pub fn tree_to_json(tree: &Tree) -> String {
    let doc = TreeDocument {
        nodes: tree.labels().to_vec(),
        edges: tree
            .edges()
            .iter()
            .map(|e| TreeEdgeRecord {
                parent: tree.label(e.parent).to_string(),
                child: tree.label(e.child).to_string(),
                weight: e.weight,
            })
            .collect(),
    };
    serde_json::to_string_pretty(&doc).expect("tree document serializes") + "\n"
}

pub fn parse_tree_json(text: &str) -> Result<Tree> {
    let doc: TreeDocument = serde_json::from_str(text)?;
    let edges: Vec<_> = doc
        .edges
        .into_iter()
        .map(|e| (e.parent, e.child, e.weight))
        .collect();
    Tree::from_labeled_edges(doc.nodes, &edges)
}

/// Reads a tree from `.json` or CSV edge-list files.
pub fn read_tree(path: &Path, labels: Option<&[String]>) -> Result<Tree> {
    let text = std::fs::read_to_string(path)?;
    if path.extension().is_some_and(|e| e == "json") {
        let tree = parse_tree_json(&text)?;
        if let Some(ls) = labels {
            let have: HashSet<&String> = tree.labels().iter().collect();
            if have != ls.iter().collect() {
                return Err(Error::LabelMismatch(
                    "tree nodes differ from data columns".into(),
                ));
            }
        }
        Ok(tree)
    } else {
        parse_tree_csv(&text, path, labels)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DataTable {
    pub columns: Vec<String>,
    pub values: DMatrix<f64>,
}

fn is_missing(cell: &str) -> bool {
    cell.is_empty() || cell.eq_ignore_ascii_case("na") || cell.eq_ignore_ascii_case("nan")
}

/// Numeric CSV with a header row. Empty, `NA` and `NaN` cells are missing.
pub fn parse_data_csv(text: &str, path: &Path) -> Result<DataTable> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let columns: Vec<String> = reader
        .headers()
        .map_err(|e| parse_error(path, 1, e.to_string()))?
        .iter()
        .map(str::to_string)
        .collect();
    let mut unique = HashSet::new();
    if let Some(dup) = columns.iter().find(|c| !unique.insert(*c)) {
        return Err(parse_error(path, 1, format!("duplicate column `{dup}`")));
    }
    let mut data = Vec::new();
    let mut rows = 0;
    for record in reader.records() {
        let record = record.map_err(|e| {
            let line = e.position().map(|p| p.line() as usize).unwrap_or(0);
            parse_error(path, line, e.to_string())
        })?;
        let line = record.position().map(|p| p.line() as usize).unwrap_or(0);
        rows += 1;
        for (cell, column) in record.iter().zip(&columns) {
            if is_missing(cell) {
                return Err(Error::MissingValues {
                    row: rows,
                    column: column.clone(),
                });
            }
            let v: f64 = cell.parse().map_err(|_| {
                parse_error(
                    path,
                    line,
                    format!("invalid number `{cell}` in column `{column}`"),
                )
            })?;
            data.push(v);
        }
    }
    Ok(DataTable {
        values: DMatrix::from_row_slice(rows, columns.len(), &data),
        columns,
    })
}

pub fn read_data_csv(path: &Path) -> Result<DataTable> {
    parse_data_csv(&std::fs::read_to_string(path)?, path)
}

impl DataTable {
    pub fn column(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }

    /// Predictor names: every column except `response`.
    pub fn predictors(&self, response: &str) -> Result<Vec<String>> {
        if self.column(response).is_none() {
            return Err(Error::LabelMismatch(format!(
                "response column `{response}` not found"
            )));
        }
        Ok(self
            .columns
            .iter()
            .filter(|c| *c != response)
            .cloned()
            .collect())
    }

    /// Splits into `X` with columns in tree node order and `y`.
    pub fn design(&self, response: &str, tree: &Tree) -> Result<(DMatrix<f64>, DVector<f64>)> {
        let predictors = self.predictors(response)?;
        if predictors.len() != tree.node_count() {
            return Err(Error::LabelMismatch(format!(
                "{} predictor columns, tree has {} nodes",
                predictors.len(),
                tree.node_count()
            )));
        }
        let cols = tree
            .labels()
            .iter()
            .map(|l| {
                self.column(l).filter(|_| l != response).ok_or_else(|| {
                    Error::LabelMismatch(format!("tree node `{l}` has no data column"))
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let x = crate::linalg::select_columns(&self.values, &cols);
        let y = self
            .values
            .column(self.column(response).unwrap())
            .into_owned();
        Ok((x, y))
    }
}

/// Centers every column and divides by its sample standard deviation.
pub fn standardize(x: &DMatrix<f64>) -> Result<(DMatrix<f64>, Vec<f64>, Vec<f64>)> {
    let (means, sds) = crate::selection::column_moments(x);
    if let Some((index, &value)) = sds.iter().enumerate().find(|(_, s)| !(**s > 0.0)) {
        return Err(Error::NonpositiveSd { index, value });
    }
    let z = DMatrix::from_fn(x.nrows(), x.ncols(), |i, j| (x[(i, j)] - means[j]) / sds[j]);
    Ok((z, means, sds))
}

pub fn cp_table_csv(rows: &[CpRow]) -> String {
    let mut out = String::from("alpha,lambda,df,rss,cp\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            format_float(r.alpha),
            format_float(r.lambda),
            format_float(r.df),
            format_float(r.rss),
            format_float(r.cp)
        ));
    }
    out
}

pub fn effect_report_csv(report: &EffectReport) -> String {
    let mut out = String::from("node,level,role,direct,total,direct_active,total_active\n");
    for r in &report.rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            r.label,
            r.level,
            r.role,
            format_float(r.direct),
            format_float(r.total),
            r.direct_active,
            r.total_active
        ));
    }
    out
}

/// Reads an effect report written by [`effect_report_csv`]. Rows are
/// matched to tree nodes by label.
pub fn parse_effect_report_csv(
    text: &str,
    path: &Path,
    tree: &Tree,
    active_tol: f64,
) -> Result<EffectReport> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let header: Vec<String> = reader
        .headers()
        .map_err(|e| parse_error(path, 1, e.to_string()))?
        .iter()
        .map(str::to_string)
        .collect();
    let find = |name: &str| {
        header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| parse_error(path, 1, format!("missing column `{name}`")))
    };
    let (node, direct, total) = (find("node")?, find("direct")?, find("total")?);
    let mut values = vec![None; tree.node_count()];
    for record in reader.records() {
        let record = record.map_err(|e| {
            let line = e.position().map(|p| p.line() as usize).unwrap_or(0);
            parse_error(path, line, e.to_string())
        })?;
        let line = record.position().map(|p| p.line() as usize).unwrap_or(0);
        let j = tree.index_of(&record[node]).ok_or_else(|| {
            Error::LabelMismatch(format!("effect row `{}` is not a tree node", &record[node]))
        })?;
        let num = |k: usize| -> Result<f64> {
            record[k]
                .parse()
                .map_err(|_| parse_error(path, line, format!("invalid number `{}`", &record[k])))
        };
        values[j] = Some((num(direct)?, num(total)?));
    }
    let mut beta = DVector::zeros(tree.node_count());
    for (j, v) in values.iter().enumerate() {
        let (d, _) = v.ok_or_else(|| {
            Error::LabelMismatch(format!("no effect row for `{}`", tree.label(j)))
        })?;
        beta[j] = d;
    }
    let mut report = crate::selection::effect_report(tree, &tree.influence(), &beta, active_tol)?;
    for (row, v) in report.rows.iter_mut().zip(&values) {
        let total = v.expect("checked above").1;
        row.total = total;
        row.total_active = total.abs() > active_tol;
    }
    Ok(report)
}

/// Writes `contents` to `dir/name`, creating `dir` if needed.
pub fn write_output(dir: &Path, name: &str, contents: &str) -> Result<PathBuf> {
    std::fs::create_dir_all(dir)?;
    let path = dir.join(name);
    std::fs::write(&path, contents)?;
    Ok(path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tree::make_binary_tree;

    #[test]
    fn tree_csv_round_trip() {
        let tree = make_binary_tree(3, 0.75).unwrap();
        let text = tree_to_csv(&tree);
        assert_eq!(text.lines().count(), 7);
        let back = parse_tree_csv(&text, Path::new("t.csv"), None).unwrap();
        assert_eq!(tree_to_csv(&back), text);
        assert_eq!(back.labels(), tree.labels());
    }

    #[test]
    fn single_level_tree_has_no_edges() {
        let tree = make_binary_tree(1, 1.0).unwrap();
        assert_eq!(tree_to_csv(&tree), "parent,child,weight\n");
        let labels = vec!["X1".to_string()];
        let back = parse_tree_csv(&tree_to_csv(&tree), Path::new("t"), Some(&labels)).unwrap();
        assert_eq!(back.node_count(), 1);
    }

    #[test]
    fn tree_json_round_trip() {
        let tree = make_binary_tree(2, 2.0).unwrap();
        let text = tree_to_json(&tree);
        assert_eq!(tree_to_json(&parse_tree_json(&text).unwrap()), text);
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        let text = "parent,child,weight\nX1,X2,1\nX1,X3,abc\n";
        match parse_tree_csv(text, Path::new("edges.csv"), None) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
        let short = "parent,child,weight\nX1,X2\n";
        assert!(matches!(
            parse_tree_csv(short, Path::new("e"), None),
            Err(Error::Parse { line: 2, .. })
        ));
        assert!(matches!(
            parse_tree_csv("a,b\n", Path::new("e"), None),
            Err(Error::Parse { line: 1, .. })
        ));
    }

    #[test]
    fn floats_reparse_exactly() {
        for v in [0.1, -1.0 / 3.0, 1e-300, 123456.789, f64::MIN_POSITIVE] {
            let back: f64 = format_float(v).parse().unwrap();
            assert!((back - v).abs() <= 1e-12 * v.abs());
        }
    }

    #[test]
    fn data_design_follows_tree_order() {
        let text = "y,X3,X1,X2\n1,3,1,2\n2,6,2,4\n";
        let table = parse_data_csv(text, Path::new("d")).unwrap();
        let tree = make_binary_tree(2, 1.0).unwrap();
        let (x, y) = table.design("y", &tree).unwrap();
        assert_eq!(
            x.row(0).iter().copied().collect::<Vec<_>>(),
            vec![1.0, 2.0, 3.0]
        );
        assert_eq!(y, DVector::from_vec(vec![1.0, 2.0]));
        assert!(matches!(
            table.design("z", &tree),
            Err(Error::LabelMismatch(_))
        ));
    }

    #[test]
    fn missing_cells_are_reported() {
        let text = "y,X1\n1,2\n3,NA\n";
        match parse_data_csv(text, Path::new("d")) {
            Err(Error::MissingValues { row, column }) => {
                assert_eq!((row, column.as_str()), (2, "X1"))
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn standardized_columns() {
        let x = DMatrix::from_row_slice(3, 2, &[1.0, 10.0, 2.0, 20.0, 3.0, 60.0]);
        let (z, _, _) = standardize(&x).unwrap();
        for j in 0..2 {
            let c = z.column(j);
            assert!(c.mean().abs() < 1e-12);
            assert!((c.norm_squared() / 2.0 - 1.0).abs() < 1e-12);
        }
        let flat = DMatrix::from_element(3, 1, 1.0);
        assert!(standardize(&flat).is_err());
    }
}
