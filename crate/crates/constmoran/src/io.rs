//! Edge-list and values-table readers, and the joined [`Dataset`].

use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use constmoran_core::graph::{build_grid_queen, row_normalize_with, IsolatedSites, LabeledAdjacency};
use constmoran_core::stats::average_ranks;
use constmoran_core::{AdjacencyList, Error as CoreError, Field, SpatialWeights};

#[derive(Debug, thiserror::Error)]
pub enum DataError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Csv { path: PathBuf, source: csv::Error },
    #[error("edge list line {line}: expected two identifiers, found {found}")]
    EdgeArity { line: usize, found: usize },
    #[error("values file has no variable columns")]
    NoVariables,
    #[error("values file has no rows")]
    NoRows,
    #[error("duplicate site id `{0}`")]
    DuplicateSite(String),
    #[error("row {row}, column `{column}`: cannot parse `{value}` as a number")]
    NotNumeric { row: usize, column: String, value: String },
    #[error("adjacency references site `{0}` that is not in the values file")]
    UnknownSite(String),
    #[error("site `{0}` has no neighbours (pass --allow-isolated to keep it)")]
    IsolatedSite(String),
    #[error("grid mode expects site ids 0..{n}, got `{id}`")]
    BadGridId { id: String, n: usize },
    #[error("grid {rows}x{cols} needs {expected} sites, values file has {actual}")]
    GridSize {
        rows: usize,
        cols: usize,
        expected: usize,
        actual: usize,
    },
    #[error("invalid grid spec `{0}`, expected ROWSxCOLS")]
    GridSpec(String),
    #[error("unknown variable `{0}`")]
    UnknownVariable(String),
    #[error(transparent)]
    Core(#[from] CoreError),
}

pub type Result<T> = std::result::Result<T, DataError>;

/// `ROWSxCOLS` grid dimensions.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GridSpec {
    pub rows: usize,
    pub cols: usize,
}

impl FromStr for GridSpec {
    type Err = DataError;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || DataError::GridSpec(s.to_string());
        let (r, c) = s.split_once(['x', 'X']).ok_or_else(bad)?;
        Ok(GridSpec {
            rows: r.trim().parse().map_err(|_| bad())?,
            cols: c.trim().parse().map_err(|_| bad())?,
        })
    }
}

/// Where the spatial structure comes from.
#[derive(Debug, Clone, PartialEq)]
pub enum Topology {
    Grid(GridSpec),
    Adjacency(PathBuf),
}

fn read_to_string(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|source| DataError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Parses an edge list: two identifiers per line, separated by a comma,
/// tab, semicolon or whitespace. Blank lines and `#` comments are skipped.
pub fn parse_edge_list(text: &str) -> Result<LabeledAdjacency> {
    let mut pairs = Vec::new();
    for (k, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = if line.contains(',') {
            line.split(',').map(str::trim).collect()
        } else if line.contains(';') {
            line.split(';').map(str::trim).collect()
        } else {
            line.split_whitespace().collect()
        };
        if fields.len() != 2 || fields.iter().any(|f| f.is_empty()) {
            return Err(DataError::EdgeArity {
                line: k + 1,
                found: fields.iter().filter(|f| !f.is_empty()).count(),
            });
        }
        pairs.push((fields[0].to_string(), fields[1].to_string()));
    }
    Ok(AdjacencyList::from_labeled_edges(pairs)?)
}

pub fn load_adjacency(path: &Path) -> Result<LabeledAdjacency> {
    parse_edge_list(&read_to_string(path)?)
}

/// Site ids plus named numeric columns, in file order.
#[derive(Debug, Clone, PartialEq)]
pub struct ValuesTable {
    pub site_ids: Vec<String>,
    pub columns: Vec<(String, Vec<f64>)>,
}

/// Reads a header-bearing CSV whose first column holds site ids.
pub fn parse_values<R: std::io::Read>(reader: R, path: &Path) -> Result<ValuesTable> {
    let csv_err = |source| DataError::Csv {
        path: path.to_path_buf(),
        source,
    };
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(reader);
    let headers = rdr.headers().map_err(csv_err)?.clone();
    if headers.len() < 2 {
        return Err(DataError::NoVariables);
    }
    let names: Vec<String> = headers.iter().skip(1).map(str::to_string).collect();
    let mut site_ids = Vec::new();
    let mut seen = HashMap::new();
    let mut data: Vec<Vec<f64>> = vec![Vec::new(); names.len()];
    for (row, record) in rdr.records().enumerate() {
        let record = record.map_err(csv_err)?;
        let id = record.get(0).unwrap_or_default().to_string();
        if seen.insert(id.clone(), row).is_some() {
            return Err(DataError::DuplicateSite(id));
        }
        for (k, name) in names.iter().enumerate() {
            let cell = record.get(k + 1).unwrap_or_default();
            let v: f64 = cell.parse().map_err(|_| DataError::NotNumeric {
                row: row + 1,
                column: name.clone(),
                value: cell.to_string(),
            })?;
            if !v.is_finite() {
                return Err(DataError::NotNumeric {
                    row: row + 1,
                    column: name.clone(),
                    value: cell.to_string(),
                });
            }
            data[k].push(v);
        }
        site_ids.push(id);
    }
    if site_ids.is_empty() {
        return Err(DataError::NoRows);
    }
    Ok(ValuesTable {
        site_ids,
        columns: names.into_iter().zip(data).collect(),
    })
}

pub fn load_values(path: &Path) -> Result<ValuesTable> {
    let file = fs::File::open(path).map_err(|source| DataError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_values(file, path)
}

/// Values joined with their spatial structure; row `i` of every variable
/// belongs to `site_ids[i]`, which is site `i` of `adjacency`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub site_ids: Vec<String>,
    pub variables: Vec<(String, Vec<f64>)>,
    pub adjacency: AdjacencyList,
    pub grid: Option<GridSpec>,
}

impl Dataset {
    /// Joins a values table with an explicit adjacency. Adjacency ids must
    /// all appear in the table.
    pub fn from_adjacency(table: ValuesTable, labeled: &LabeledAdjacency) -> Result<Self> {
        let index: HashMap<&str, usize> = table
            .site_ids
            .iter()
            .enumerate()
            .map(|(i, id)| (id.as_str(), i))
            .collect();
        let map = labeled
            .labels
            .iter()
            .map(|l| index.get(l.as_str()).copied().ok_or_else(|| DataError::UnknownSite(l.clone())))
            .collect::<Result<Vec<_>>>()?;
        let adjacency = AdjacencyList::new(
            table.site_ids.len(),
            labeled.adjacency.edges().iter().map(|&(a, b)| (map[a], map[b])),
        )?;
        Ok(Dataset {
            site_ids: table.site_ids,
            variables: table.columns,
            adjacency,
            grid: None,
        })
    }

    /// Joins a values table whose site ids are row-major cell indices with
    /// a queen-contiguity grid. Rows are reordered into index order.
    pub fn from_grid(table: ValuesTable, grid: GridSpec) -> Result<Self> {
        let n = grid.rows * grid.cols;
        if table.site_ids.len() != n {
            return Err(DataError::GridSize {
                rows: grid.rows,
                cols: grid.cols,
                expected: n,
                actual: table.site_ids.len(),
            });
        }
        let mut order = vec![usize::MAX; n];
        for (row, id) in table.site_ids.iter().enumerate() {
            let bad = || DataError::BadGridId { id: id.clone(), n };
            let cell: usize = id.parse().map_err(|_| bad())?;
            if cell >= n || order[cell] != usize::MAX {
                return Err(bad());
            }
            order[cell] = row;
        }
        let adjacency = build_grid_queen(grid.rows, grid.cols)?;
        Ok(Dataset {
            site_ids: order.iter().map(|&r| table.site_ids[r].clone()).collect(),
            variables: table
                .columns
                .into_iter()
                .map(|(name, v)| (name, order.iter().map(|&r| v[r]).collect()))
                .collect(),
            adjacency,
            grid: Some(grid),
        })
    }

    pub fn n_sites(&self) -> usize {
        self.site_ids.len()
    }

    pub fn variable_names(&self) -> impl Iterator<Item = &str> {
        self.variables.iter().map(|(n, _)| n.as_str())
    }

    /// The named variable, optionally replaced by its average ranks.
    pub fn field(&self, name: &str, rank: bool) -> Result<Field> {
        let (_, values) = self
            .variables
            .iter()
            .find(|(n, _)| n == name)
            .ok_or_else(|| DataError::UnknownVariable(name.to_string()))?;
        let values = if rank { average_ranks(values) } else { values.clone() };
        Ok(Field::named(values, name)?)
    }

    pub fn weights(&self, isolated: IsolatedSites) -> Result<SpatialWeights> {
        row_normalize_with(&self.adjacency, isolated).map_err(|e| match e {
            CoreError::IsolatedSite(i) => DataError::IsolatedSite(self.site_ids[i].clone()),
            other => other.into(),
        })
    }
}

pub fn load_dataset(values: &Path, topology: &Topology) -> Result<Dataset> {
    let table = load_values(values)?;
    match topology {
        Topology::Grid(grid) => Dataset::from_grid(table, *grid),
        Topology::Adjacency(path) => Dataset::from_adjacency(table, &load_adjacency(path)?),
    }
}

/// Writes a single field as `site_id,<name>` CSV with row-major ids.
pub fn field_csv(field: &Field, column: &str) -> String {
    let mut out = format!("site_id,{column}\n");
    for (i, v) in field.values().iter().enumerate() {
        out.push_str(&format!("{i},{v:?}\n"));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table(text: &str) -> Result<ValuesTable> {
        parse_values(text.as_bytes(), Path::new("test.csv"))
    }

    #[test]
    fn edge_list_formats() {
        let l = parse_edge_list("# comment\nA,B\nB\tA\n\nB C\n").unwrap();
        assert_eq!(l.labels, ["A", "B", "C"]);
        assert_eq!(l.adjacency.edges().len(), 2);
        assert!(matches!(parse_edge_list("# nothing\n"), Err(DataError::Core(CoreError::EmptyAdjacency))));
        assert!(matches!(parse_edge_list("A,A\n"), Err(DataError::Core(CoreError::SelfLoop(_)))));
        assert!(matches!(parse_edge_list("A,B,C\n"), Err(DataError::EdgeArity { line: 1, found: 3 })));
    }

    #[test]
    fn values_table_errors() {
        let t = table("site_id,a,b\nx,1,2\ny,3,4.5\n").unwrap();
        assert_eq!(t.site_ids, ["x", "y"]);
        assert_eq!(t.columns[1], ("b".to_string(), vec![2.0, 4.5]));
        assert!(matches!(table("site_id,a\nx,1\nx,2\n"), Err(DataError::DuplicateSite(_))));
        assert!(matches!(table("site_id,a\nx,one\n"), Err(DataError::NotNumeric { row: 1, .. })));
        assert!(matches!(table("site_id\nx\n"), Err(DataError::NoVariables)));
        assert!(matches!(table("site_id,a\n"), Err(DataError::NoRows)));
    }

    #[test]
    fn join_with_adjacency() {
        let t = table("site_id,v\nC,3\nA,1\nB,2\n").unwrap();
        let adj = parse_edge_list("A,B\nB,C\n").unwrap();
        let d = Dataset::from_adjacency(t.clone(), &adj).unwrap();
        assert_eq!(d.n_sites(), 3);
        // Dataset keeps file order: C=0, A=1, B=2.
        assert!(d.adjacency.contains(1, 2));
        assert!(d.adjacency.contains(2, 0));
        assert!(!d.adjacency.contains(0, 1));

        let unknown = parse_edge_list("A,Z\n").unwrap();
        assert!(matches!(Dataset::from_adjacency(t.clone(), &unknown), Err(DataError::UnknownSite(z)) if z == "Z"));

        let partial = parse_edge_list("A,B\n").unwrap();
        let d = Dataset::from_adjacency(t, &partial).unwrap();
        assert!(matches!(d.weights(IsolatedSites::Reject), Err(DataError::IsolatedSite(c)) if c == "C"));
        assert!(d.weights(IsolatedSites::Allow).is_ok());
    }

    #[test]
    fn join_with_grid() {
        let t = table("site_id,v\n3,30\n0,0\n2,20\n1,10\n").unwrap();
        let d = Dataset::from_grid(t, "2x2".parse().unwrap()).unwrap();
        assert_eq!(d.field("v", false).unwrap().values(), &[0.0, 10.0, 20.0, 30.0]);
        assert_eq!(d.field("v", true).unwrap().values(), &[1.0, 2.0, 3.0, 4.0]);
        assert!(matches!(d.field("w", false), Err(DataError::UnknownVariable(_))));

        let t = table("site_id,v\n0,1\n0,2\n2,3\n3,4\n").unwrap_err();
        assert!(matches!(t, DataError::DuplicateSite(_)));
        let t = table("site_id,v\n0,1\n1,2\n7,3\n3,4\n").unwrap();
        assert!(matches!(Dataset::from_grid(t, GridSpec { rows: 2, cols: 2 }), Err(DataError::BadGridId { .. })));
        assert!("3by4".parse::<GridSpec>().is_err());
    }
}
