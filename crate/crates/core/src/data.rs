//! Data model shared by all estimators: ordinal responses, encoded
//! predictors and model configuration, plus CSV ingestion and validation.

use std::collections::BTreeSet;
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Categories observed fewer times than this trigger a "sparse category"
/// warning.
pub const SPARSE_CATEGORY_FREQUENCY: usize = 5;

/// N×R matrix of ordinal category codes, coded `1..=cats[r]`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OrdinalDataset {
    n: usize,
    r: usize,
    /// Row-major codes.
    codes: Vec<u32>,
    cats: Vec<u32>,
    var_names: Vec<String>,
}

impl OrdinalDataset {
    /// Builds a dataset from rows of codes and declared category counts.
    ///
    /// Checks shape and code ranges only; whether every category is observed
    /// is left to [`validate`] / [`OrdinalDataset::require_all_observed`].
    pub fn new(rows: Vec<Vec<u32>>, cats: Vec<u32>, var_names: Vec<String>) -> Result<Self> {
        let n = rows.len();
        let r = cats.len();
        if n < 2 {
            return Err(Error::Validation(format!("need at least 2 rows, got {n}")));
        }
        if r == 0 {
            return Err(Error::Validation("need at least one variable".into()));
        }
        if var_names.len() != r {
            return Err(Error::Dimension(format!(
                "{} variable names for {} variables",
                var_names.len(),
                r
            )));
        }
        if let Some(j) = cats.iter().position(|&c| c < 2) {
            return Err(Error::Validation(format!(
                "variable {} declares {} categories; at least 2 are required",
                var_names[j], cats[j]
            )));
        }
        let mut codes = Vec::with_capacity(n * r);
        for (i, row) in rows.into_iter().enumerate() {
            if row.len() != r {
                return Err(Error::Dimension(format!(
                    "row {} has {} values, expected {}",
                    i + 1,
                    row.len(),
                    r
                )));
            }
            for (j, &y) in row.iter().enumerate() {
                if y < 1 || y > cats[j] {
                    return Err(Error::Domain(format!(
                        "code {y} at row {}, variable {} outside 1..={}",
                        i + 1,
                        var_names[j],
                        cats[j]
                    )));
                }
            }
            codes.extend(row);
        }
        Ok(Self {
            n,
            r,
            codes,
            cats,
            var_names,
        })
    }

    /// Builds a dataset taking `cats[r]` as the largest observed code.
    pub fn from_rows(rows: Vec<Vec<u32>>, var_names: Vec<String>) -> Result<Self> {
        let r = var_names.len();
        let mut cats = vec![0u32; r];
        for row in &rows {
            for (c, &y) in cats.iter_mut().zip(row) {
                *c = (*c).max(y);
            }
        }
        Self::new(rows, cats, var_names)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn r(&self) -> usize {
        self.r
    }

    #[inline]
    pub fn get(&self, i: usize, r: usize) -> u32 {
        self.codes[i * self.r + r]
    }

    pub fn cats(&self) -> &[u32] {
        &self.cats
    }

    pub fn var_names(&self) -> &[String] {
        &self.var_names
    }

    pub fn column(&self, r: usize) -> Vec<u32> {
        (0..self.n).map(|i| self.get(i, r)).collect()
    }

    pub fn row(&self, i: usize) -> &[u32] {
        &self.codes[i * self.r..(i + 1) * self.r]
    }

    /// Per-variable category frequencies; `freq[r][c - 1]` counts code `c`.
    pub fn frequencies(&self) -> Vec<Vec<usize>> {
        let mut freq: Vec<Vec<usize>> = self.cats.iter().map(|&c| vec![0; c as usize]).collect();
        for i in 0..self.n {
            for (r, f) in freq.iter_mut().enumerate() {
                f[self.get(i, r) as usize - 1] += 1;
            }
        }
        freq
    }

    /// Errors if any declared category of any variable is unobserved;
    /// thresholds of empty categories are not identified.
    pub fn require_all_observed(&self) -> Result<()> {
        let report = validate(self);
        let gaps: Vec<String> = report
            .variables
            .iter()
            .flat_map(|v| {
                v.unobserved
                    .iter()
                    .map(move |c| format!("variable {}: category {c} unobserved", v.name))
            })
            .collect();
        if gaps.is_empty() {
            Ok(())
        } else {
            Err(Error::Validation(gaps.join("; ")))
        }
    }

    /// Subset of rows, in the given order.
    pub fn select_rows(&self, rows: &[usize]) -> Result<Self> {
        let data = rows.iter().map(|&i| self.row(i).to_vec()).collect();
        Self::new(data, self.cats.clone(), self.var_names.clone())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariableSummary {
    pub name: String,
    pub cats: u32,
    pub frequencies: Vec<usize>,
    pub unobserved: Vec<u32>,
}

/// Report-only summary of an ordinal dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub n: usize,
    pub r: usize,
    pub variables: Vec<VariableSummary>,
    pub warnings: Vec<String>,
}

impl ValidationReport {
    pub fn has_gaps(&self) -> bool {
        self.variables.iter().any(|v| !v.unobserved.is_empty())
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "N = {}, R = {}", self.n, self.r)?;
        for v in &self.variables {
            let freqs: Vec<String> = v.frequencies.iter().map(|x| x.to_string()).collect();
            writeln!(f, "  {} (C = {}): {}", v.name, v.cats, freqs.join(" "))?;
        }
        for w in &self.warnings {
            writeln!(f, "warning: {w}")?;
        }
        Ok(())
    }
}

/// Frequencies, unobserved categories and sparse-category warnings.
pub fn validate(ds: &OrdinalDataset) -> ValidationReport {
    let mut warnings = Vec::new();
    let variables = ds
        .frequencies()
        .into_iter()
        .enumerate()
        .map(|(r, frequencies)| {
            let name = ds.var_names[r].clone();
            let mut unobserved = Vec::new();
            for (k, &f) in frequencies.iter().enumerate() {
                let c = k as u32 + 1;
                if f == 0 {
                    unobserved.push(c);
                    warnings.push(format!("{name}: category {c} unobserved"));
                } else if f < SPARSE_CATEGORY_FREQUENCY {
                    warnings.push(format!("{name}: sparse category {c} (frequency {f})"));
                }
            }
            VariableSummary {
                name,
                cats: ds.cats[r],
                frequencies,
                unobserved,
            }
        })
        .collect();
    ValidationReport {
        n: ds.n,
        r: ds.r,
        variables,
        warnings,
    }
}

#[derive(Deserialize)]
struct CatsSidecar {
    cats: Vec<u32>,
}

/// Reads a wide-format response CSV (header row of variable names, integer
/// codes in the body).
///
/// Category counts are taken from `sidecar` (`{"cats": [...]}`) when given,
/// otherwise from the largest observed code. Datasets with unobserved
/// categories are rejected; see [`recode`].
pub fn load_ordinal(path: &Path, sidecar: Option<&Path>) -> Result<OrdinalDataset> {
    let ds = read_ordinal(path, sidecar)?;
    ds.require_all_observed()?;
    Ok(ds)
}

/// [`load_ordinal`] without the check for unobserved categories.
pub fn read_ordinal(path: &Path, sidecar: Option<&Path>) -> Result<OrdinalDataset> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path)?;
    let names: Vec<String> = reader.headers()?.iter().map(str::to_string).collect();
    if names.is_empty() || names.iter().all(String::is_empty) {
        return Err(Error::EmptyInput(format!("{} has no header", path.display())));
    }
    let mut rows = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record?;
        let row_no = i + 1;
        if record.len() != names.len() {
            return Err(Error::Parse {
                row: row_no,
                col: record.len().min(names.len()) + 1,
                msg: format!("expected {} fields, found {}", names.len(), record.len()),
            });
        }
        let mut row = Vec::with_capacity(names.len());
        for (j, cell) in record.iter().enumerate() {
            let value: i64 = cell.parse().map_err(|_| Error::Parse {
                row: row_no,
                col: j + 1,
                msg: format!("{cell:?} is not an integer category code"),
            })?;
            if value < 1 {
                return Err(Error::Domain(format!(
                    "code {value} at row {row_no}, column {} is below 1",
                    j + 1
                )));
            }
            let value = u32::try_from(value)
                .map_err(|_| Error::Domain(format!("code {value} at row {row_no} is too large")))?;
            row.push(value);
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::EmptyInput(format!("{} has no data rows", path.display())));
    }
    let ds = match sidecar {
        Some(p) => {
            let side: CatsSidecar = serde_json::from_reader(BufReader::new(File::open(p)?))?;
            if side.cats.len() != names.len() {
                return Err(Error::Dimension(format!(
                    "sidecar declares {} variables, CSV has {}",
                    side.cats.len(),
                    names.len()
                )));
            }
            OrdinalDataset::new(rows, side.cats, names)?
        }
        None => OrdinalDataset::from_rows(rows, names)?,
    };
    Ok(ds)
}

/// Writes the dataset in the format read by [`load_ordinal`].
pub fn save_ordinal(ds: &OrdinalDataset, path: &Path) -> Result<()> {
    let mut out = Vec::new();
    write_ordinal(ds, &mut out)?;
    write_atomic(path, &out)
}

/// Writes `bytes` to a temporary file next to `path` and renames it into
/// place, so readers never observe a partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| Error::Io(e.error))?;
    Ok(())
}

pub fn write_ordinal<W: Write>(ds: &OrdinalDataset, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(&ds.var_names)?;
    for i in 0..ds.n {
        w.write_record(ds.row(i).iter().map(|y| y.to_string()))?;
    }
    w.flush()?;
    Ok(())
}

/// Collapses unobserved categories so every variable uses codes `1..=k`
/// contiguously. Returns the recoded dataset and, per variable, the
/// `(old, new)` code map.
pub fn recode(ds: &OrdinalDataset) -> Result<(OrdinalDataset, Vec<Vec<(u32, u32)>>)> {
    let freq = ds.frequencies();
    let maps: Vec<Vec<u32>> = freq
        .iter()
        .map(|f| {
            let mut next = 0;
            f.iter()
                .map(|&count| {
                    if count > 0 {
                        next += 1;
                    }
                    next
                })
                .collect()
        })
        .collect();
    let rows = (0..ds.n)
        .map(|i| {
            ds.row(i)
                .iter()
                .zip(&maps)
                .map(|(&y, m)| m[y as usize - 1])
                .collect()
        })
        .collect();
    let recoded = OrdinalDataset::from_rows(rows, ds.var_names.clone())?;
    let table = freq
        .iter()
        .zip(&maps)
        .map(|(f, m)| {
            f.iter()
                .enumerate()
                .filter(|(_, &count)| count > 0)
                .map(|(k, _)| (k as u32 + 1, m[k]))
                .collect()
        })
        .collect();
    Ok((recoded, table))
}

/// How an encoded predictor column came about.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ColumnKind {
    /// Standardized numeric column.
    Numeric { mean: f64, sd: f64 },
    /// Zero-one indicator of `level` for categorical `variable`.
    Dummy {
        variable: String,
        level: String,
        reference: String,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictorColumn {
    pub name: String,
    #[serde(flatten)]
    pub kind: ColumnKind,
    /// Observed range of the encoded values.
    pub min: f64,
    pub max: f64,
}

/// Encoded N×P design matrix (no intercept column).
#[derive(Debug, Clone, PartialEq)]
pub struct PredictorMatrix {
    values: DMatrix<f64>,
    columns: Vec<PredictorColumn>,
}

impl PredictorMatrix {
    pub fn n(&self) -> usize {
        self.values.nrows()
    }

    pub fn p(&self) -> usize {
        self.values.ncols()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn columns(&self) -> &[PredictorColumn] {
        &self.columns
    }

    pub fn column_names(&self) -> Vec<String> {
        self.columns.iter().map(|c| c.name.clone()).collect()
    }

    /// All columns whose name, or whose categorical source variable, is in
    /// `names`.
    pub fn drop_columns(&self, names: &[String]) -> Result<Self> {
        let keep: Vec<usize> = self
            .columns
            .iter()
            .enumerate()
            .filter(|(_, c)| {
                let source = match &c.kind {
                    ColumnKind::Dummy { variable, .. } => Some(variable),
                    ColumnKind::Numeric { .. } => None,
                };
                !names.contains(&c.name) && !source.is_some_and(|v| names.contains(v))
            })
            .map(|(j, _)| j)
            .collect();
        if keep.is_empty() {
            return Err(Error::EmptyDesign(format!(
                "dropping {names:?} removes every predictor column"
            )));
        }
        let values = self.values.select_columns(&keep);
        let columns = keep.iter().map(|&j| self.columns[j].clone()).collect();
        Ok(Self { values, columns })
    }

    /// Standardizes every column of a raw numeric matrix.
    pub fn from_numeric(values: &DMatrix<f64>, names: &[String]) -> Result<Self> {
        let raw: Vec<RawColumn> = names
            .iter()
            .enumerate()
            .map(|(j, name)| RawColumn {
                name: name.clone(),
                values: RawValues::Numeric(values.column(j).iter().copied().collect()),
            })
            .collect();
        encode_predictors(&raw)
    }

    /// Subset of rows, in the given order.
    pub fn select_rows(&self, rows: &[usize]) -> Self {
        Self {
            values: self.values.select_rows(rows),
            columns: self.columns.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum RawValues {
    Numeric(Vec<f64>),
    Categorical { levels: Vec<String>, reference: String },
}

/// One column of an unencoded predictor table.
#[derive(Debug, Clone, PartialEq)]
pub struct RawColumn {
    pub name: String,
    pub values: RawValues,
}

/// Standardizes numeric columns (mean 0, sample standard deviation 1) and
/// expands each categorical column into zero-one dummies for every level but
/// the reference. Dummy columns follow the sorted order of the levels.
pub fn encode_predictors(raw: &[RawColumn]) -> Result<PredictorMatrix> {
    let n = match raw.first() {
        None => return Err(Error::EmptyDesign("no predictor columns".into())),
        Some(col) => match &col.values {
            RawValues::Numeric(v) => v.len(),
            RawValues::Categorical { levels, .. } => levels.len(),
        },
    };
    if n < 2 {
        return Err(Error::Validation(format!("need at least 2 rows, got {n}")));
    }
    let mut blocks: Vec<Vec<f64>> = Vec::new();
    let mut columns = Vec::new();
    for col in raw {
        match &col.values {
            RawValues::Numeric(v) => {
                if v.len() != n {
                    return Err(Error::Dimension(format!(
                        "column {} has {} rows, expected {n}",
                        col.name,
                        v.len()
                    )));
                }
                let mean = v.iter().sum::<f64>() / n as f64;
                let ss: f64 = v.iter().map(|x| (x - mean).powi(2)).sum();
                let sd = (ss / (n - 1) as f64).sqrt();
                if !(sd > 0.0) || !sd.is_finite() {
                    return Err(Error::DegenerateColumn(format!(
                        "numeric column {} is constant",
                        col.name
                    )));
                }
                let z: Vec<f64> = v.iter().map(|x| (x - mean) / sd).collect();
                let (min, max) = min_max(&z);
                blocks.push(z);
                columns.push(PredictorColumn {
                    name: col.name.clone(),
                    kind: ColumnKind::Numeric { mean, sd },
                    min,
                    max,
                });
            }
            RawValues::Categorical { levels, reference } => {
                if levels.len() != n {
                    return Err(Error::Dimension(format!(
                        "column {} has {} rows, expected {n}",
                        col.name,
                        levels.len()
                    )));
                }
                let distinct: BTreeSet<&String> = levels.iter().collect();
                if distinct.len() < 2 {
                    return Err(Error::DegenerateColumn(format!(
                        "categorical column {} has a single level",
                        col.name
                    )));
                }
                if !distinct.contains(reference) {
                    return Err(Error::Validation(format!(
                        "reference level {reference:?} does not occur in column {}",
                        col.name
                    )));
                }
                for level in distinct.into_iter().filter(|l| *l != reference) {
                    let z: Vec<f64> = levels
                        .iter()
                        .map(|x| if x == level { 1.0 } else { 0.0 })
                        .collect();
                    blocks.push(z);
                    columns.push(PredictorColumn {
                        name: format!("{}:{}", col.name, level),
                        kind: ColumnKind::Dummy {
                            variable: col.name.clone(),
                            level: level.clone(),
                            reference: reference.clone(),
                        },
                        min: 0.0,
                        max: 1.0,
                    });
                }
            }
        }
    }
    let values = DMatrix::from_fn(n, blocks.len(), |i, j| blocks[j][i]);
    Ok(PredictorMatrix { values, columns })
}

fn min_max(v: &[f64]) -> (f64, f64) {
    v.iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| {
            (lo.min(x), hi.max(x))
        })
}

/// Reads a predictor CSV: a header row of names, a `types` row with
/// `numeric` or `categorical:<reference>` per column, then data rows.
pub fn load_predictors(path: &Path) -> Result<PredictorMatrix> {
    let file = File::open(path)?;
    let mut lines = BufReader::new(file).lines();
    let header = lines
        .next()
        .transpose()?
        .ok_or_else(|| Error::EmptyInput(format!("{} is empty", path.display())))?;
    let types = lines
        .next()
        .transpose()?
        .ok_or_else(|| Error::EmptyInput(format!("{} has no types line", path.display())))?;
    let names: Vec<String> = split_line(&header);
    let types: Vec<String> = split_line(&types);
    if types.len() != names.len() {
        return Err(Error::Parse {
            row: 0,
            col: types.len().min(names.len()) + 1,
            msg: "types line does not match header".into(),
        });
    }
    enum Kind {
        Numeric,
        Categorical(String),
    }
    let kinds = types
        .iter()
        .enumerate()
        .map(|(j, t)| {
            if t == "numeric" {
                Ok(Kind::Numeric)
            } else if let Some(reference) = t.strip_prefix("categorical:") {
                Ok(Kind::Categorical(reference.to_string()))
            } else {
                Err(Error::Parse {
                    row: 0,
                    col: j + 1,
                    msg: format!("unknown column type {t:?}"),
                })
            }
        })
        .collect::<Result<Vec<_>>>()?;
    let mut cells: Vec<Vec<String>> = vec![Vec::new(); names.len()];
    let mut row_no = 0;
    for line in lines {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        row_no += 1;
        let fields = split_line(&line);
        if fields.len() != names.len() {
            return Err(Error::Parse {
                row: row_no,
                col: fields.len().min(names.len()) + 1,
                msg: format!("expected {} fields, found {}", names.len(), fields.len()),
            });
        }
        for (j, f) in fields.into_iter().enumerate() {
            if f.is_empty() {
                return Err(Error::Parse {
                    row: row_no,
                    col: j + 1,
                    msg: "missing value".into(),
                });
            }
            cells[j].push(f);
        }
    }
    if row_no == 0 {
        return Err(Error::EmptyInput(format!("{} has no data rows", path.display())));
    }
    let raw = names
        .into_iter()
        .zip(kinds)
        .zip(cells)
        .enumerate()
        .map(|(j, ((name, kind), values))| {
            let values = match kind {
                Kind::Numeric => RawValues::Numeric(
                    values
                        .iter()
                        .enumerate()
                        .map(|(i, s)| {
                            s.parse::<f64>()
                                .ok()
                                .filter(|x| x.is_finite())
                                .ok_or_else(|| Error::Parse {
                                    row: i + 1,
                                    col: j + 1,
                                    msg: format!("{s:?} is not a number"),
                                })
                        })
                        .collect::<Result<Vec<_>>>()?,
                ),
                Kind::Categorical(reference) => RawValues::Categorical {
                    levels: values,
                    reference,
                },
            };
            Ok(RawColumn { name, values })
        })
        .collect::<Result<Vec<_>>>()?;
    encode_predictors(&raw)
}

fn split_line(line: &str) -> Vec<String> {
    line.split(',').map(|s| s.trim().to_string()).collect()
}

/// Response process assumed for the variables.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    Dominance,
    Proximity,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Clpca,
    Clrrr,
    Clmdu,
    Clrmdu,
}

impl ModelKind {
    pub fn new(family: Family, restricted: bool) -> Self {
        match (family, restricted) {
            (Family::Dominance, false) => ModelKind::Clpca,
            (Family::Dominance, true) => ModelKind::Clrrr,
            (Family::Proximity, false) => ModelKind::Clmdu,
            (Family::Proximity, true) => ModelKind::Clrmdu,
        }
    }

    pub fn family(self) -> Family {
        match self {
            ModelKind::Clpca | ModelKind::Clrrr => Family::Dominance,
            ModelKind::Clmdu | ModelKind::Clrmdu => Family::Proximity,
        }
    }

    pub fn restricted(self) -> bool {
        matches!(self, ModelKind::Clrrr | ModelKind::Clrmdu)
    }

    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Clpca => "clpca",
            ModelKind::Clrrr => "clrrr",
            ModelKind::Clmdu => "clmdu",
            ModelKind::Clrmdu => "clrmdu",
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "clpca" => Ok(ModelKind::Clpca),
            "clrrr" => Ok(ModelKind::Clrrr),
            "clmdu" => Ok(ModelKind::Clmdu),
            "clrmdu" => Ok(ModelKind::Clrmdu),
            other => Err(Error::Config(format!("unknown model {other:?}"))),
        }
    }
}

/// Resolved estimation settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub model: ModelKind,
    pub family: Family,
    pub restricted: bool,
    pub dims: usize,
    /// Relative decrease of the observed NLL below which the outer loop stops.
    pub tol_outer: f64,
    /// Relative decrease of the majorization function below which the
    /// SMACOF inner loop stops.
    pub tol_inner: f64,
    pub max_outer: usize,
    pub max_inner: usize,
    pub n_starts: usize,
    pub seed: u64,
}

impl ModelConfig {
    /// Default settings for `model` in `dims` dimensions.
    pub fn new(model: ModelKind, dims: usize) -> Self {
        let n_starts = match model.family() {
            Family::Dominance => 1,
            Family::Proximity => 10,
        };
        Self {
            model,
            family: model.family(),
            restricted: model.restricted(),
            dims,
            tol_outer: 1e-6,
            tol_inner: 1e-8,
            max_outer: 1000,
            max_inner: 64,
            n_starts,
            seed: 0,
        }
    }

    pub fn with_dims(&self, dims: usize) -> Self {
        Self {
            dims,
            ..self.clone()
        }
    }

    /// Checks the settings against a dataset of `n` rows, `r` variables and
    /// (for restricted models) `p` predictor columns.
    pub fn check(&self, n: usize, r: usize, p: Option<usize>) -> Result<()> {
        if ModelKind::new(self.family, self.restricted) != self.model {
            return Err(Error::Config(format!(
                "model {} inconsistent with family {:?} / restricted {}",
                self.model, self.family, self.restricted
            )));
        }
        if self.dims < 1 {
            return Err(Error::Dimension("dims must be at least 1".into()));
        }
        if !(self.tol_outer > 0.0) || !(self.tol_inner > 0.0) {
            return Err(Error::Config("tolerances must be positive".into()));
        }
        if self.max_outer < 1 || self.max_inner < 1 || self.n_starts < 1 {
            return Err(Error::Config(
                "iteration caps and start count must be at least 1".into(),
            ));
        }
        match (self.restricted, p) {
            (true, None) => {
                return Err(Error::Config(format!(
                    "model {} requires predictors",
                    self.model
                )))
            }
            (false, Some(_)) => {
                return Err(Error::Config(format!(
                    "model {} does not take predictors",
                    self.model
                )))
            }
            _ => {}
        }
        if self.family == Family::Dominance {
            let limit = match p {
                Some(p) => p.min(r),
                None => n.min(r),
            };
            if self.dims > limit {
                return Err(Error::Dimension(format!(
                    "dims {} exceeds {limit} for {}",
                    self.dims, self.model
                )));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write_tmp(contents: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(contents.as_bytes()).unwrap();
        f
    }

    #[test]
    fn loads_small_csv() {
        let f = write_tmp("a,b\n1,1\n2,1\n2,2\n");
        let ds = load_ordinal(f.path(), None).unwrap();
        assert_eq!((ds.n(), ds.r()), (3, 2));
        assert_eq!(ds.cats(), &[2, 2]);
        assert_eq!(ds.column(0), vec![1, 2, 2]);
        assert_eq!(ds.column(1), vec![1, 1, 2]);
    }

    #[test]
    fn rejects_gap() {
        let f = write_tmp("a\n1\n3\n3\n");
        let err = load_ordinal(f.path(), None).unwrap_err();
        assert!(err.to_string().contains("category 2 unobserved"), "{err}");
    }

    #[test]
    fn parse_and_domain_errors() {
        let f = write_tmp("a,b\n1,2\n1,x\n");
        match load_ordinal(f.path(), None).unwrap_err() {
            Error::Parse { row, col, .. } => assert_eq!((row, col), (2, 2)),
            e => panic!("unexpected {e}"),
        }
        let f = write_tmp("a,b\n1,2\n0,1\n");
        assert!(matches!(load_ordinal(f.path(), None), Err(Error::Domain(_))));
        let f = write_tmp("");
        assert!(matches!(load_ordinal(f.path(), None), Err(Error::EmptyInput(_))));
        let f = write_tmp("a,b\n");
        assert!(matches!(load_ordinal(f.path(), None), Err(Error::EmptyInput(_))));
        let f = write_tmp("a,b\n1,\n2,1\n");
        assert!(matches!(load_ordinal(f.path(), None), Err(Error::Parse { .. })));
    }

    #[test]
    fn sidecar_declares_cats() {
        let f = write_tmp("a\n1\n2\n3\n");
        let side = write_tmp(r#"{"cats":[5]}"#);
        // categories 4 and 5 are declared but unobserved
        let err = load_ordinal(f.path(), Some(side.path())).unwrap_err();
        assert!(err.to_string().contains("category 4 unobserved"));
        let side = write_tmp(r#"{"cats":[3]}"#);
        let ds = load_ordinal(f.path(), Some(side.path())).unwrap();
        assert_eq!(ds.cats(), &[3]);
    }

    #[test]
    fn issp_shape_is_accepted() {
        let cats = [5u32, 8, 4, 4];
        let rows: Vec<Vec<u32>> = (0..1063)
            .map(|i| cats.iter().map(|&c| (i as u32 % c) + 1).collect())
            .collect();
        let names = ["MEAT", "RECYCLE", "AVOID", "OUT"].map(String::from).to_vec();
        let ds = OrdinalDataset::from_rows(rows, names).unwrap();
        assert_eq!((ds.n(), ds.r()), (1063, 4));
        assert_eq!(ds.cats(), &cats);
        ds.require_all_observed().unwrap();
    }

    #[test]
    fn report_warnings() {
        let names = vec!["a".to_string()];
        let balanced: Vec<Vec<u32>> = (0..20).map(|i| vec![i % 2 + 1]).collect();
        let report = validate(&OrdinalDataset::from_rows(balanced, names.clone()).unwrap());
        assert!(report.warnings.is_empty());
        assert_eq!(report.variables[0].frequencies, vec![10, 10]);

        let mut sparse: Vec<Vec<u32>> = (0..20).map(|_| vec![1]).collect();
        sparse.push(vec![2]);
        let report = validate(&OrdinalDataset::from_rows(sparse, names.clone()).unwrap());
        assert_eq!(report.warnings.len(), 1);
        assert!(report.warnings[0].contains("sparse category"));

        let rows: Vec<Vec<u32>> = (0..40).map(|i| vec![i % 4 + 1]).collect();
        let report = validate(&OrdinalDataset::new(rows, vec![5], names).unwrap());
        assert!(report.warnings.iter().any(|w| w.contains("category 5 unobserved")));
        assert!(report.has_gaps());
    }

    #[test]
    fn recode_collapses_gaps() {
        let rows = vec![vec![1, 5], vec![3, 2], vec![3, 5]];
        let ds = OrdinalDataset::from_rows(rows, vec!["a".into(), "b".into()]).unwrap();
        let (rec, maps) = recode(&ds).unwrap();
        assert_eq!(rec.cats(), &[2, 2]);
        assert_eq!(rec.column(0), vec![1, 2, 2]);
        assert_eq!(rec.column(1), vec![2, 1, 2]);
        assert_eq!(maps[1], vec![(2, 1), (5, 2)]);
        rec.require_all_observed().unwrap();
    }

    #[test]
    fn save_load_round_trip() {
        let rows = vec![vec![1, 3], vec![2, 2], vec![2, 1]];
        let ds = OrdinalDataset::from_rows(rows, vec!["x".into(), "y".into()]).unwrap();
        let f = tempfile::NamedTempFile::new().unwrap();
        save_ordinal(&ds, f.path()).unwrap();
        assert_eq!(load_ordinal(f.path(), None).unwrap(), ds);
    }

    #[test]
    fn standardizes_numeric() {
        let raw = vec![RawColumn {
            name: "age".into(),
            values: RawValues::Numeric(vec![20.0, 30.0, 40.0]),
        }];
        let x = encode_predictors(&raw).unwrap();
        let col: Vec<f64> = x.matrix().column(0).iter().copied().collect();
        // sample sd of {20, 30, 40} is 10
        for (got, want) in col.iter().zip([-1.0, 0.0, 1.0]) {
            assert!((got - want).abs() < 1e-15);
        }
        assert_eq!(x.columns()[0].kind, ColumnKind::Numeric { mean: 30.0, sd: 10.0 });
    }

    #[test]
    fn dummy_coding() {
        let countries: Vec<String> = (0..26).map(|i| format!("C{:02}", i % 13)).collect();
        let raw = vec![
            RawColumn {
                name: "country".into(),
                values: RawValues::Categorical {
                    levels: countries,
                    reference: "C07".into(),
                },
            },
            RawColumn {
                name: "gender".into(),
                values: RawValues::Categorical {
                    levels: (0..26)
                        .map(|i| if i % 3 == 0 { "female" } else { "male" }.to_string())
                        .collect(),
                    reference: "male".into(),
                },
            },
        ];
        let x = encode_predictors(&raw).unwrap();
        assert_eq!(x.p(), 13);
        assert!(x.column_names().iter().all(|n| n != "country:C07"));
        assert_eq!(x.column_names()[12], "gender:female");
        assert_eq!(x.matrix()[(0, 12)], 1.0);
        assert_eq!(x.matrix()[(1, 12)], 0.0);
        for i in 0..26 {
            let country_sum: f64 = (0..12).map(|j| x.matrix()[(i, j)]).sum();
            assert!(country_sum <= 1.0);
        }
    }

    #[test]
    fn degenerate_columns() {
        let constant = vec![RawColumn {
            name: "c".into(),
            values: RawValues::Numeric(vec![1.0; 4]),
        }];
        assert!(matches!(
            encode_predictors(&constant),
            Err(Error::DegenerateColumn(_))
        ));
        let single = vec![RawColumn {
            name: "g".into(),
            values: RawValues::Categorical {
                levels: vec!["a".into(); 4],
                reference: "a".into(),
            },
        }];
        assert!(matches!(
            encode_predictors(&single),
            Err(Error::DegenerateColumn(_))
        ));
    }

    #[test]
    fn loads_predictor_csv() {
        let f = write_tmp("age,gender\nnumeric,categorical:male\n20,male\n30,female\n40,male\n");
        let x = load_predictors(f.path()).unwrap();
        assert_eq!(x.column_names(), vec!["age", "gender:female"]);
        assert_eq!(x.matrix()[(1, 1)], 1.0);
        let dropped = x.drop_columns(&["gender".into()]).unwrap();
        assert_eq!(dropped.column_names(), vec!["age"]);
        assert!(matches!(
            x.drop_columns(&["gender".into(), "age".into()]),
            Err(Error::EmptyDesign(_))
        ));
    }

    #[test]
    fn config_checks() {
        let cfg = ModelConfig::new(ModelKind::Clpca, 3);
        assert!(cfg.check(10, 4, None).is_ok());
        assert!(matches!(cfg.check(10, 2, None), Err(Error::Dimension(_))));
        let cfg = ModelConfig::new(ModelKind::Clrrr, 2);
        assert!(matches!(cfg.check(10, 4, None), Err(Error::Config(_))));
        assert!(cfg.check(10, 4, Some(5)).is_ok());
        let cfg = ModelConfig::new(ModelKind::Clmdu, 5);
        assert!(cfg.check(10, 4, None).is_ok());
        assert_eq!(cfg.n_starts, 10);
    }

    proptest::proptest! {
        #[test]
        fn standardized_moments(values in proptest::collection::vec(-1e3f64..1e3, 3..60)) {
            let spread = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
                - values.iter().cloned().fold(f64::INFINITY, f64::min);
            proptest::prop_assume!(spread > 1e-3);
            let raw = vec![RawColumn { name: "x".into(), values: RawValues::Numeric(values) }];
            let x = encode_predictors(&raw).unwrap();
            let col = x.matrix().column(0);
            let n = col.len() as f64;
            let mean = col.sum() / n;
            let sd = (col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
            proptest::prop_assert!(mean.abs() < 1e-12);
            proptest::prop_assert!((sd - 1.0).abs() < 1e-12);
        }

        #[test]
        fn csv_round_trip(rows in proptest::collection::vec(proptest::collection::vec(1u32..6, 3), 2..30)) {
            proptest::prop_assume!((0..3).all(|r| rows.iter().any(|row| row[r] > 1)));
            let ds = OrdinalDataset::from_rows(rows, vec!["a".into(), "b".into(), "c".into()]).unwrap();
            let mut buf = Vec::new();
            write_ordinal(&ds, &mut buf).unwrap();
            let f = write_tmp(std::str::from_utf8(&buf).unwrap());
            let side = write_tmp(&serde_json::json!({"cats": ds.cats()}).to_string());
            // gaps are legal here, so compare through the unchecked constructor
            let mut rdr = csv::Reader::from_path(f.path()).unwrap();
            let back: Vec<Vec<u32>> = rdr.records().map(|r| r.unwrap().iter().map(|c| c.parse().unwrap()).collect()).collect();
            let again = OrdinalDataset::new(back, ds.cats().to_vec(), ds.var_names().to_vec()).unwrap();
            proptest::prop_assert_eq!(&again, &ds);
            if !validate(&ds).has_gaps() {
                proptest::prop_assert_eq!(load_ordinal(f.path(), Some(side.path())).unwrap(), ds);
            }
        }
    }
}
