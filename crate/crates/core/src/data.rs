//! Observation tables, CSV ingestion, splitting and fold assignment.

use std::path::Path;

use ndarray::{Array2, Axis};
use rand::seq::SliceRandom;

use crate::error::{Error, Result};
use crate::rng;

/// How the outcome column is interpreted.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum OutcomeKind {
    /// Outcome coded as -1 / +1.
    Binary,
    /// Real outcome known to lie in `[k0, k1]`.
    Bounded { k0: f64, k1: f64 },
    /// Real outcome with no declared range. Only usable by estimators that need no bounds.
    Unbounded,
}

impl OutcomeKind {
    pub fn bounded(k0: f64, k1: f64) -> Result<Self> {
        if !(k0.is_finite() && k1.is_finite() && k0 < k1) {
            return Err(Error::arg(format!("outcome range requires k0 < k1, got [{k0}, {k1}]")));
        }
        Ok(OutcomeKind::Bounded { k0, k1 })
    }
}

/// Validated rows of `(X, Z, A, Y)`. Immutable once built.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservationTable {
    x: Array2<f64>,
    z: Vec<f64>,
    a: Vec<f64>,
    y: Vec<f64>,
    outcome: OutcomeKind,
}

fn is_sign(v: f64) -> bool {
    v == 1.0 || v == -1.0
}

impl ObservationTable {
    pub fn new(x: Array2<f64>, z: Vec<f64>, a: Vec<f64>, y: Vec<f64>, outcome: OutcomeKind) -> Result<Self> {
        let n = x.nrows();
        if n == 0 || x.ncols() == 0 {
            return Err(Error::Schema("table needs at least one row and one covariate".into()));
        }
        if z.len() != n || a.len() != n || y.len() != n {
            return Err(Error::Schema(format!(
                "column lengths differ: x has {n} rows, z {}, a {}, y {}",
                z.len(),
                a.len(),
                y.len()
            )));
        }
        for (i, row) in x.axis_iter(Axis(0)).enumerate() {
            if row.iter().any(|v| !v.is_finite()) {
                return Err(Error::Domain { row: i, message: "non-finite covariate".into() });
            }
        }
        for i in 0..n {
            if !is_sign(z[i]) {
                return Err(Error::Domain { row: i, message: format!("instrument must be -1 or +1, got {}", z[i]) });
            }
            if !is_sign(a[i]) {
                return Err(Error::Domain { row: i, message: format!("treatment must be -1 or +1, got {}", a[i]) });
            }
            let ok = match outcome {
                OutcomeKind::Binary => is_sign(y[i]),
                OutcomeKind::Bounded { k0, k1 } => y[i] >= k0 && y[i] <= k1,
                OutcomeKind::Unbounded => y[i].is_finite(),
            };
            if !ok {
                return Err(Error::Domain {
                    row: i,
                    message: format!("outcome {} is outside the declared kind {:?}", y[i], outcome),
                });
            }
        }
        if let OutcomeKind::Bounded { k0, k1 } = outcome {
            OutcomeKind::bounded(k0, k1)?;
        }
        Ok(ObservationTable { x, z, a, y, outcome })
    }

    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    pub fn d(&self) -> usize {
        self.x.ncols()
    }

    pub fn x(&self) -> &Array2<f64> {
        &self.x
    }

    pub fn z(&self) -> &[f64] {
        &self.z
    }

    pub fn a(&self) -> &[f64] {
        &self.a
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn outcome(&self) -> OutcomeKind {
        self.outcome
    }

    /// Rows in the given order (duplicates allowed).
    pub fn subset(&self, rows: &[usize]) -> ObservationTable {
        ObservationTable {
            x: self.x.select(Axis(0), rows),
            z: rows.iter().map(|&i| self.z[i]).collect(),
            a: rows.iter().map(|&i| self.a[i]).collect(),
            y: rows.iter().map(|&i| self.y[i]).collect(),
            outcome: self.outcome,
        }
    }

    /// Row indices whose instrument equals `z`.
    pub fn arm_rows(&self, z: f64) -> Vec<usize> {
        (0..self.n()).filter(|&i| self.z[i] == z).collect()
    }
}

/// Column mapping for CSV ingestion.
#[derive(Debug, Clone, Default)]
pub struct Schema {
    /// Covariate columns in order. Empty means every column not used for z, a, y.
    pub x_cols: Vec<String>,
    pub z_col: String,
    pub a_col: String,
    pub y_col: String,
    /// Remap 0/1 coded instrument and treatment (and a binary outcome) to -1/+1.
    pub remap_binary: bool,
    /// Columns never used as covariates when `x_cols` is empty.
    pub exclude: Vec<String>,
}

impl Schema {
    pub fn standard() -> Self {
        Schema {
            x_cols: Vec::new(),
            z_col: "z".into(),
            a_col: "a".into(),
            y_col: "y".into(),
            remap_binary: false,
            exclude: Vec::new(),
        }
    }

    /// Covariate column indices within `headers`.
    fn covariates(&self, headers: &[String]) -> Result<Vec<usize>> {
        let xi: Vec<usize> = if self.x_cols.is_empty() {
            let skip =
                |h: &String| *h == self.z_col || *h == self.a_col || *h == self.y_col || self.exclude.contains(h);
            (0..headers.len()).filter(|&c| !skip(&headers[c])).collect()
        } else {
            self.x_cols.iter().map(|c| find_column(headers, c)).collect::<Result<_>>()?
        };
        if xi.is_empty() {
            return Err(Error::Schema("no covariate columns".into()));
        }
        Ok(xi)
    }
}

fn find_column(headers: &[String], name: &str) -> Result<usize> {
    headers.iter().position(|h| h == name).ok_or_else(|| Error::Schema(format!("missing column `{name}`")))
}

fn open_csv(path: &Path) -> Result<(csv::Reader<std::fs::File>, Vec<String>)> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(file);
    let headers = rdr.headers()?.iter().map(str::to_string).collect();
    Ok((rdr, headers))
}

/// Covariate matrix only, for applying a rule to rows that may lack `z`, `a` or `y`.
pub fn load_covariates(path: impl AsRef<Path>, schema: &Schema) -> Result<Array2<f64>> {
    let (mut rdr, headers) = open_csv(path.as_ref())?;
    let xi = schema.covariates(&headers)?;
    let mut xs = Vec::new();
    let mut n = 0;
    for (row, rec) in rdr.records().enumerate() {
        let rec = rec?;
        for &c in &xi {
            xs.push(parse_cell(rec.get(c).unwrap_or(""), row, &headers[c])?);
        }
        n += 1;
    }
    if n == 0 {
        return Err(Error::Schema("no data rows".into()));
    }
    Array2::from_shape_vec((n, xi.len()), xs).map_err(|e| Error::Schema(e.to_string()))
}

/// One named numeric column.
pub fn load_column(path: impl AsRef<Path>, name: &str) -> Result<Vec<f64>> {
    let (mut rdr, headers) = open_csv(path.as_ref())?;
    let c = find_column(&headers, name)?;
    rdr.records().enumerate().map(|(row, rec)| parse_cell(rec?.get(c).unwrap_or(""), row, name)).collect()
}

fn parse_cell(raw: &str, row: usize, column: &str) -> Result<f64> {
    let s = raw.trim();
    if s.is_empty() || s.eq_ignore_ascii_case("na") || s.eq_ignore_ascii_case("nan") {
        return Err(Error::Parse { row, column: column.into(), message: "missing value".into() });
    }
    s.parse::<f64>().map_err(|_| Error::Parse { row, column: column.into(), message: format!("`{s}` is not a number") })
}

fn remap(v: f64) -> f64 {
    if v == 0.0 {
        -1.0
    } else {
        v
    }
}

/// Read a CSV with a header row. Row numbers in errors are 0-based data rows.
pub fn load_csv(path: impl AsRef<Path>, schema: &Schema, outcome: OutcomeKind) -> Result<ObservationTable> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_csv(file, schema, outcome)
}

pub fn read_csv<R: std::io::Read>(reader: R, schema: &Schema, outcome: OutcomeKind) -> Result<ObservationTable> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(reader);
    let headers: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    let zi = find_column(&headers, &schema.z_col)?;
    let ai = find_column(&headers, &schema.a_col)?;
    let yi = find_column(&headers, &schema.y_col)?;
    let xi = schema.covariates(&headers)?;

    let (mut xs, mut z, mut a, mut y) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
    for (row, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let cell = |c: usize| parse_cell(rec.get(c).unwrap_or(""), row, &headers[c]);
        for &c in &xi {
            xs.push(cell(c)?);
        }
        let (mut zv, mut av, mut yv) = (cell(zi)?, cell(ai)?, cell(yi)?);
        if schema.remap_binary {
            zv = remap(zv);
            av = remap(av);
            if outcome == OutcomeKind::Binary {
                yv = remap(yv);
            }
        }
        z.push(zv);
        a.push(av);
        y.push(yv);
    }
    let n = z.len();
    let x = Array2::from_shape_vec((n, xi.len()), xs).map_err(|e| Error::Schema(e.to_string()))?;
    ObservationTable::new(x, z, a, y, outcome)
}

/// Write the table with columns `x1..xd,z,a,y`. Floats use the shortest exact representation.
pub fn write_csv(table: &ObservationTable, path: impl AsRef<Path>) -> Result<()> {
    write_csv_with(table, &[], path)
}

/// [`write_csv`] followed by extra named columns, one value per row.
pub fn write_csv_with(table: &ObservationTable, extra: &[(&str, &[f64])], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    if extra.iter().any(|(_, v)| v.len() != table.n()) {
        return Err(Error::arg("extra columns must have one value per row"));
    }
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = csv::Writer::from_writer(file);
    let mut header: Vec<String> = (1..=table.d()).map(|j| format!("x{j}")).collect();
    header.extend(["z", "a", "y"].map(String::from));
    header.extend(extra.iter().map(|(name, _)| name.to_string()));
    w.write_record(&header)?;
    for i in 0..table.n() {
        let mut rec: Vec<String> = table.x.row(i).iter().map(|v| v.to_string()).collect();
        rec.push(table.z[i].to_string());
        rec.push(table.a[i].to_string());
        rec.push(table.y[i].to_string());
        rec.extend(extra.iter().map(|(_, v)| v[i].to_string()));
        w.write_record(&rec)?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

fn shuffled_rows(n: usize, seed: u64, label: u64) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut rng::stream(seed, label));
    idx
}

/// Random train/test partition. Returns the row indices of each side in ascending order.
pub fn split_indices(n: usize, test_fraction: f64, seed: u64) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(Error::arg(format!("test fraction must lie in (0,1), got {test_fraction}")));
    }
    if n < 2 {
        return Err(Error::arg("splitting needs at least two rows"));
    }
    let n_test = ((n as f64) * test_fraction).round() as usize;
    let idx = shuffled_rows(n, seed, rng::label::SPLIT);
    let mut test = idx[..n_test].to_vec();
    let mut train = idx[n_test..].to_vec();
    test.sort_unstable();
    train.sort_unstable();
    Ok((train, test))
}

pub fn split(table: &ObservationTable, test_fraction: f64, seed: u64) -> Result<(ObservationTable, ObservationTable)> {
    let (train, test) = split_indices(table.n(), test_fraction, seed)?;
    Ok((table.subset(&train), table.subset(&test)))
}

/// Fold index for every row; fold sizes differ by at most one.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FoldAssignment {
    pub fold_of: Vec<usize>,
    pub k: usize,
}

impl FoldAssignment {
    pub fn rows_in(&self, fold: usize) -> Vec<usize> {
        (0..self.fold_of.len()).filter(|&i| self.fold_of[i] == fold).collect()
    }

    pub fn rows_outside(&self, fold: usize) -> Vec<usize> {
        (0..self.fold_of.len()).filter(|&i| self.fold_of[i] != fold).collect()
    }
}

pub fn make_folds_n(n: usize, k: usize, seed: u64) -> Result<FoldAssignment> {
    if k < 2 || k > n {
        return Err(Error::arg(format!("fold count must satisfy 2 <= k <= n, got k={k}, n={n}")));
    }
    let idx = shuffled_rows(n, seed, rng::label::FOLDS);
    let mut fold_of = vec![0; n];
    for (pos, &row) in idx.iter().enumerate() {
        fold_of[row] = pos % k;
    }
    Ok(FoldAssignment { fold_of, k })
}

pub fn make_folds(table: &ObservationTable, k: usize, seed: u64) -> Result<FoldAssignment> {
    make_folds_n(table.n(), k, seed)
}
