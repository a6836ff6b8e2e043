//! Dataset manifests: a JSON document naming the response and covariate
//! files, all headerless CSV.
//!
//! ```json
//! {
//!   "n": 3,
//!   "response": { "kind": "categorical", "file": "y.csv" },
//!   "covariates": [
//!     { "name": "age", "kind": "numeric", "file": "age.csv" },
//!     { "name": "curve", "kind": "functional", "grid_file": "grid.csv", "values_file": "curves.csv" },
//!     { "name": "net", "kind": "graph", "graph_kind": "binary", "edges_file": "edges.csv", "n_vertices": 10 }
//!   ]
//! }
//! ```
//!
//! Relative paths resolve against the manifest's directory. Nominal and
//! categorical levels are coded in order of first appearance.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use etree_core::dataset::{DataError, Violation};
use etree_core::{Adjacency, Covariate, CovariateData, Dataset, GraphKind, Response};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum LoadError {
    #[error("{}: {source}", .path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{}: {message}", .path.display())]
    Manifest { path: PathBuf, message: String },
    #[error("{what}{}: {message}", row_suffix(.row))]
    Entry { what: String, row: Option<usize>, message: String },
    #[error("{}", join(.0))]
    Invalid(Vec<Violation>),
    #[error("manifest has no response")]
    MissingResponse,
}

fn row_suffix(row: &Option<usize>) -> String {
    row.map(|r| format!(", row {r}")).unwrap_or_default()
}

fn join(violations: &[Violation]) -> String {
    violations.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; ")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub n: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub response: Option<ResponseEntry>,
    pub covariates: Vec<CovariateEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ResponseEntry {
    pub kind: String,
    pub file: PathBuf,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CovariateEntry {
    pub name: String,
    pub kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub file: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid_file: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub values_file: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub graph_kind: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub files: Option<Vec<PathBuf>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub edges_file: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_vertices: Option<usize>,
}

/// Columns read from a manifest whose response may be absent.
#[derive(Debug, Clone, PartialEq)]
pub struct Observations {
    pub n: usize,
    pub response: Option<Response>,
    pub covariates: Vec<Covariate>,
}

impl Observations {
    pub fn into_dataset(self) -> Result<Dataset, LoadError> {
        let response = self.response.ok_or(LoadError::MissingResponse)?;
        Dataset::new(response, self.covariates).map_err(invalid)
    }
}

fn invalid(e: DataError) -> LoadError {
    match e {
        DataError::Invalid(v) => LoadError::Invalid(v),
        other => LoadError::Entry { what: "dataset".into(), row: None, message: other.to_string() },
    }
}

/// Loads and validates a training dataset.
pub fn load_dataset(manifest: &Path) -> Result<Dataset, LoadError> {
    load_observations(manifest)?.into_dataset()
}

/// Loads and validates covariates; the response is read when present.
pub fn load_observations(manifest: &Path) -> Result<Observations, LoadError> {
    let text = fs::read_to_string(manifest).map_err(|source| LoadError::Io { path: manifest.into(), source })?;
    let parsed: Manifest = serde_json::from_str(&text)
        .map_err(|e| LoadError::Manifest { path: manifest.into(), message: e.to_string() })?;
    let base = manifest.parent().unwrap_or(Path::new("."));
    let n = parsed.n;

    let response = parsed.response.as_ref().map(|r| read_response(base, r, n)).transpose()?;
    let covariates = parsed
        .covariates
        .iter()
        .map(|entry| read_covariate(base, entry, n))
        .collect::<Result<Vec<_>, _>>()?;

    // a stand-in response lets covariate-only manifests share validation
    let probe = Response::Numeric { values: vec![0.0; n] };
    let checked = Dataset::new(response.clone().unwrap_or(probe), covariates).map_err(invalid)?;
    Ok(Observations { n, response, covariates: checked.covariates })
}

struct Source<'a> {
    what: String,
    base: &'a Path,
}

impl Source<'_> {
    fn err(&self, row: Option<usize>, message: impl Into<String>) -> LoadError {
        LoadError::Entry { what: self.what.clone(), row, message: message.into() }
    }

    fn field<'p>(&self, value: &'p Option<PathBuf>, field: &str) -> Result<&'p PathBuf, LoadError> {
        value.as_ref().ok_or_else(|| self.err(None, format!("missing `{field}`")))
    }

    fn rows(&self, file: &Path) -> Result<Vec<Vec<String>>, LoadError> {
        let path = self.base.join(file);
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(false)
            .flexible(true)
            .trim(csv::Trim::All)
            .from_path(&path)
            .map_err(|e| self.err(None, format!("{}: {e}", path.display())))?;
        reader
            .records()
            .enumerate()
            .map(|(row, rec)| {
                rec.map(|r| r.iter().map(String::from).collect())
                    .map_err(|e| self.err(Some(row), format!("{}: {e}", path.display())))
            })
            .collect()
    }

    fn column(&self, file: &Path, n: usize) -> Result<Vec<String>, LoadError> {
        let rows = self.rows(file)?;
        if rows.len() != n {
            return Err(self.err(None, format!("{} rows, expected n = {n}", rows.len())));
        }
        rows.into_iter()
            .enumerate()
            .map(|(row, mut fields)| {
                if fields.len() != 1 {
                    return Err(self.err(Some(row), format!("{} fields, expected 1", fields.len())));
                }
                Ok(fields.pop().unwrap_or_default())
            })
            .collect()
    }

    fn real(&self, s: &str, row: usize) -> Result<f64, LoadError> {
        s.parse::<f64>().map_err(|_| self.err(Some(row), format!("`{s}` is not a number")))
    }

    fn reals(&self, fields: &[String], row: usize) -> Result<Vec<f64>, LoadError> {
        fields.iter().map(|s| self.real(s, row)).collect()
    }
}

/// Codes labels by first appearance.
fn encode_levels(labels: Vec<String>) -> (Vec<String>, Vec<u32>) {
    let mut levels: Vec<String> = Vec::new();
    let mut index: BTreeMap<String, u32> = BTreeMap::new();
    let codes = labels
        .into_iter()
        .map(|l| {
            *index.entry(l.clone()).or_insert_with(|| {
                levels.push(l);
                (levels.len() - 1) as u32
            })
        })
        .collect();
    (levels, codes)
}

fn read_response(base: &Path, entry: &ResponseEntry, n: usize) -> Result<Response, LoadError> {
    let src = Source { what: "response".into(), base };
    let labels = src.column(&entry.file, n)?;
    match entry.kind.as_str() {
        "numeric" => {
            let values = labels.iter().enumerate().map(|(row, s)| src.real(s, row)).collect::<Result<_, _>>()?;
            Ok(Response::Numeric { values })
        }
        "categorical" => {
            let (levels, codes) = encode_levels(labels);
            Ok(Response::Categorical { levels, codes })
        }
        other => Err(src.err(None, format!("unknown response kind `{other}`"))),
    }
}

fn read_covariate(base: &Path, entry: &CovariateEntry, n: usize) -> Result<Covariate, LoadError> {
    let src = Source { what: format!("covariate `{}`", entry.name), base };
    let name = entry.name.clone();
    match entry.kind.as_str() {
        "numeric" => {
            let raw = src.column(src.field(&entry.file, "file")?, n)?;
            let values = raw.iter().enumerate().map(|(row, s)| src.real(s, row)).collect::<Result<_, _>>()?;
            Ok(Covariate::numeric(name, values))
        }
        "nominal" => {
            let (levels, codes) = encode_levels(src.column(src.field(&entry.file, "file")?, n)?);
            Ok(Covariate::nominal(name, levels, codes))
        }
        "functional" => {
            let grid_rows = src.rows(src.field(&entry.grid_file, "grid_file")?)?;
            if grid_rows.len() != 1 {
                return Err(src.err(None, format!("grid file has {} rows, expected 1", grid_rows.len())));
            }
            let grid = src.reals(&grid_rows[0], 0)?;
            let rows = src.rows(src.field(&entry.values_file, "values_file")?)?;
            if rows.len() != n {
                return Err(src.err(None, format!("{} curves, expected n = {n}", rows.len())));
            }
            let curves = rows.iter().enumerate().map(|(row, f)| src.reals(f, row)).collect::<Result<_, _>>()?;
            Ok(Covariate::functional(name, grid, curves))
        }
        "graph" => {
            let kind = match entry.graph_kind.as_deref() {
                Some("binary") => GraphKind::Binary,
                Some("weighted") => GraphKind::Weighted,
                Some(other) => return Err(src.err(None, format!("unknown graph kind `{other}`"))),
                None => return Err(src.err(None, "missing `graph_kind`")),
            };
            let graphs = match (&entry.files, &entry.edges_file) {
                (Some(files), None) => {
                    if files.len() != n {
                        return Err(src.err(None, format!("{} adjacency files, expected n = {n}", files.len())));
                    }
                    files
                        .iter()
                        .enumerate()
                        .map(|(row, f)| {
                            let rows = src
                                .rows(f)
                                .map_err(|e| src.err(Some(row), e.to_string()))?
                                .iter()
                                .map(|r| src.reals(r, row))
                                .collect::<Result<Vec<_>, _>>()?;
                            Adjacency::from_rows(&rows).map_err(|e| src.err(Some(row), e.to_string()))
                        })
                        .collect::<Result<Vec<_>, _>>()?
                }
                (None, Some(edges)) => {
                    let v = entry.n_vertices.ok_or_else(|| src.err(None, "edge lists need `n_vertices`"))?;
                    read_edge_list(&src, edges, n, v)?
                }
                _ => return Err(src.err(None, "give exactly one of `files` and `edges_file`")),
            };
            Ok(Covariate::graph(name, kind, graphs))
        }
        other => Err(src.err(None, format!("unknown covariate kind `{other}`"))),
    }
}

fn read_edge_list(src: &Source<'_>, file: &Path, n: usize, v: usize) -> Result<Vec<Adjacency>, LoadError> {
    let mut graphs = vec![Adjacency::empty(v); n];
    for (line, fields) in src.rows(file)?.iter().enumerate() {
        if fields.len() != 4 {
            return Err(src.err(None, format!("edge line {line}: {} fields, expected 4", fields.len())));
        }
        let index = |s: &str, bound: usize, what: &str| -> Result<usize, LoadError> {
            s.parse::<usize>()
                .ok()
                .filter(|&i| i < bound)
                .ok_or_else(|| src.err(None, format!("edge line {line}: {what} `{s}` out of range 0..{bound}")))
        };
        let row = index(&fields[0], n, "observation")?;
        let a = index(&fields[1], v, "vertex")?;
        let b = index(&fields[2], v, "vertex")?;
        let w = src.real(&fields[3], row)?;
        if a == b {
            return Err(src.err(Some(row), format!("edge line {line}: self-loop at vertex {a}")));
        }
        let g = &mut graphs[row];
        let current = g.get(a, b);
        if current != 0.0 && current != w {
            return Err(src.err(Some(row), format!("edge line {line}: conflicting weights for ({a}, {b})")));
        }
        g.set_edge(a, b, w);
    }
    Ok(graphs)
}

fn write_lines(path: &Path, lines: impl IntoIterator<Item = String>) -> std::io::Result<()> {
    let mut text = String::new();
    for l in lines {
        text.push_str(&l);
        text.push('\n');
    }
    fs::write(path, text)
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n', '\r']) || s.trim() != s {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

fn reals_line(values: &[f64]) -> String {
    values.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(",")
}

/// Writes `dataset` as `manifest.json` plus CSV files into `dir`. Reals use
/// the shortest representation that parses back to the same bits.
pub fn save_dataset(dataset: &Dataset, dir: &Path) -> Result<PathBuf, LoadError> {
    let io = |path: &Path| {
        let path = path.to_path_buf();
        move |source| LoadError::Io { path, source }
    };
    fs::create_dir_all(dir).map_err(io(dir))?;
    let put = |name: &str, lines: Vec<String>| -> Result<PathBuf, LoadError> {
        let path = dir.join(name);
        write_lines(&path, lines).map_err(io(&path))?;
        Ok(PathBuf::from(name))
    };

    let response = match &dataset.response {
        Response::Numeric { values } => ResponseEntry {
            kind: "numeric".into(),
            file: put("response.csv", values.iter().map(|v| v.to_string()).collect())?,
        },
        Response::Categorical { levels, codes } => ResponseEntry {
            kind: "categorical".into(),
            file: put("response.csv", codes.iter().map(|&c| csv_field(&levels[c as usize])).collect())?,
        },
    };

    let mut covariates = Vec::new();
    for (j, cov) in dataset.covariates.iter().enumerate() {
        let mut entry = CovariateEntry { name: cov.name.clone(), kind: cov.kind_name().into(), ..Default::default() };
        match &cov.data {
            CovariateData::Numeric { values } => {
                entry.file = Some(put(&format!("x{j}.csv"), values.iter().map(|v| v.to_string()).collect())?);
            }
            CovariateData::Nominal { levels, codes } => {
                entry.file =
                    Some(put(&format!("x{j}.csv"), codes.iter().map(|&c| csv_field(&levels[c as usize])).collect())?);
            }
            CovariateData::Functional(col) => {
                entry.grid_file = Some(put(&format!("x{j}_grid.csv"), vec![reals_line(&col.grid)])?);
                entry.values_file =
                    Some(put(&format!("x{j}_values.csv"), col.curves.iter().map(|c| reals_line(c)).collect())?);
            }
            CovariateData::Graph(col) => {
                let mut lines = Vec::new();
                for (row, g) in col.graphs.iter().enumerate() {
                    for a in 0..g.n_vertices() {
                        for b in (a + 1)..g.n_vertices() {
                            let w = g.get(a, b);
                            if w != 0.0 {
                                lines.push(format!("{row},{a},{b},{w}"));
                            }
                        }
                    }
                }
                entry.graph_kind = Some(match col.kind {
                    GraphKind::Binary => "binary".into(),
                    GraphKind::Weighted => "weighted".into(),
                });
                entry.n_vertices = col.n_vertices();
                entry.edges_file = Some(put(&format!("x{j}_edges.csv"), lines)?);
            }
        }
        covariates.push(entry);
    }

    let manifest = Manifest { n: dataset.n, response: Some(response), covariates };
    let path = dir.join("manifest.json");
    let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    fs::write(&path, text).map_err(io(&path))?;
    Ok(path)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn levels_follow_first_appearance() {
        let (levels, codes) = encode_levels(["b", "a", "b", "c"].map(String::from).to_vec());
        assert_eq!(levels, ["b", "a", "c"]);
        assert_eq!(codes, [0, 1, 0, 2]);
    }

    #[test]
    fn quoting_only_when_needed() {
        assert_eq!(csv_field("plain"), "plain");
        assert_eq!(csv_field("a,b"), "\"a,b\"");
        assert_eq!(csv_field("say \"hi\""), "\"say \"\"hi\"\"\"");
    }
}
