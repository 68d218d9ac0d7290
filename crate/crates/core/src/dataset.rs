//! Schemas, categorical microdata tables, marginal totals and their file formats.
//!
//! All downstream math works on dense category codes `0..m`; labels only
//! appear at the file boundary.

use std::collections::{BTreeSet, HashMap};
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VariableKind {
    Ordinal,
    Categorical,
}

/// One variable: its name and ordered labels. The label position is its code.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct VariableSpec {
    name: String,
    labels: Vec<String>,
    kind: VariableKind,
}

impl VariableSpec {
    pub fn new(
        name: impl Into<String>,
        labels: Vec<String>,
        kind: VariableKind,
    ) -> Result<Self> {
        let name = name.into();
        if name.is_empty() {
            return Err(Error::Schema("variable name must be non-empty".into()));
        }
        if labels.is_empty() {
            return Err(Error::Schema(format!("variable {name} has no labels")));
        }
        let mut seen = BTreeSet::new();
        for label in &labels {
            if label.is_empty() {
                return Err(Error::Schema(format!("variable {name} has an empty label")));
            }
            if !seen.insert(label.as_str()) {
                return Err(Error::Schema(format!(
                    "variable {name} repeats label `{label}`"
                )));
            }
        }
        Ok(VariableSpec { name, labels, kind })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn kind(&self) -> VariableKind {
        self.kind
    }

    pub fn cardinality(&self) -> usize {
        self.labels.len()
    }

    pub fn code_of(&self, label: &str) -> Option<u32> {
        self.labels.iter().position(|l| l == label).map(|p| p as u32)
    }

    pub fn label_of(&self, code: u32) -> Option<&str> {
        self.labels.get(code as usize).map(String::as_str)
    }

    /// Same variable with labels reordered: new position `perm[old_code]`.
    pub fn permuted(&self, perm: &[u32]) -> Result<Self> {
        check_permutation(perm, self.cardinality())?;
        let mut labels = vec![String::new(); self.labels.len()];
        for (old, &new) in perm.iter().enumerate() {
            labels[new as usize] = self.labels[old].clone();
        }
        VariableSpec::new(self.name.clone(), labels, self.kind)
    }
}

fn check_permutation(perm: &[u32], m: usize) -> Result<()> {
    if perm.len() != m {
        return Err(Error::DimensionMismatch {
            expected: m,
            got: perm.len(),
        });
    }
    let mut hit = vec![false; m];
    for &p in perm {
        match hit.get_mut(p as usize) {
            Some(h) if !*h => *h = true,
            _ => return Err(Error::invalid("recoding is not a permutation")),
        }
    }
    Ok(())
}

#[derive(Serialize, Deserialize)]
struct VariableDef {
    kind: VariableKind,
    labels: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Schema {
    variables: Vec<VariableSpec>,
}

impl Schema {
    pub fn new(variables: Vec<VariableSpec>) -> Result<Self> {
        if variables.is_empty() {
            return Err(Error::Schema("schema needs at least one variable".into()));
        }
        let mut seen = BTreeSet::new();
        for v in &variables {
            if !seen.insert(v.name.as_str()) {
                return Err(Error::Schema(format!("duplicate variable {}", v.name)));
            }
        }
        Ok(Schema { variables })
    }

    /// Parses the JSON schema format: an object mapping each variable name to
    /// `{"kind": "ordinal"|"categorical", "labels": [...]}`. Key order is the
    /// variable order.
    pub fn from_json_str(text: &str) -> Result<Self> {
        let map: serde_json::Map<String, serde_json::Value> = serde_json::from_str(text)?;
        let mut variables = Vec::with_capacity(map.len());
        for (name, value) in map {
            let def: VariableDef = serde_json::from_value(value)?;
            variables.push(VariableSpec::new(name, def.labels, def.kind)?);
        }
        Schema::new(variables)
    }

    pub fn from_json_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Schema::from_json_str(&text)
    }

    pub fn to_json_string(&self) -> String {
        let mut map = serde_json::Map::new();
        for v in &self.variables {
            let def = VariableDef {
                kind: v.kind,
                labels: v.labels.clone(),
            };
            map.insert(v.name.clone(), serde_json::to_value(def).expect("plain data"));
        }
        serde_json::to_string_pretty(&serde_json::Value::Object(map)).expect("plain data")
    }

    /// Derives a schema from the distinct values of every column of a
    /// microdata CSV. Columns whose values all parse as numbers become
    /// ordinal and are ordered numerically; the rest are categorical with
    /// lexicographic label order.
    pub fn infer_from_csv(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        Schema::infer_from_reader(file)
    }

    pub fn infer_from_reader<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let headers: Vec<String> = rdr.headers()?.iter().map(str::to_owned).collect();
        let mut distinct: Vec<BTreeSet<String>> = vec![BTreeSet::new(); headers.len()];
        for record in rdr.records() {
            let record = record?;
            for (set, cell) in distinct.iter_mut().zip(record.iter()) {
                set.insert(cell.to_owned());
            }
        }
        let variables = headers
            .into_iter()
            .zip(distinct)
            .map(|(name, labels)| {
                let mut labels: Vec<String> = labels.into_iter().collect();
                let numeric: Option<Vec<f64>> =
                    labels.iter().map(|l| l.parse::<f64>().ok()).collect();
                let kind = match numeric {
                    Some(_) => {
                        labels.sort_by(|a, b| {
                            let (x, y) = (a.parse::<f64>().unwrap(), b.parse::<f64>().unwrap());
                            x.total_cmp(&y)
                        });
                        VariableKind::Ordinal
                    }
                    None => VariableKind::Categorical,
                };
                VariableSpec::new(name, labels, kind)
            })
            .collect::<Result<Vec<_>>>()?;
        Schema::new(variables)
    }

    pub fn variables(&self) -> &[VariableSpec] {
        &self.variables
    }

    pub fn variable(&self, index: usize) -> &VariableSpec {
        &self.variables[index]
    }

    pub fn len(&self) -> usize {
        self.variables.len()
    }

    pub fn is_empty(&self) -> bool {
        self.variables.is_empty()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.variables.iter().position(|v| v.name == name)
    }

    pub fn cardinalities(&self) -> Vec<usize> {
        self.variables.iter().map(VariableSpec::cardinality).collect()
    }

    /// Name of the first variable on which two schemas disagree, if any.
    pub fn first_mismatch(&self, other: &Schema) -> Option<String> {
        let n = self.len().max(other.len());
        for i in 0..n {
            match (self.variables.get(i), other.variables.get(i)) {
                (Some(a), Some(b)) if a == b => {}
                (Some(a), _) => return Some(a.name.clone()),
                (None, Some(b)) => return Some(b.name.clone()),
                (None, None) => unreachable!(),
            }
        }
        None
    }

    pub fn ensure_same(&self, other: &Schema) -> Result<()> {
        match self.first_mismatch(other) {
            Some(name) => Err(Error::SchemaMismatch(name)),
            None => Ok(()),
        }
    }

    pub(crate) fn with_variable(&self, index: usize, spec: VariableSpec) -> Schema {
        let mut variables = self.variables.clone();
        variables[index] = spec;
        Schema { variables }
    }
}

/// Row-major table of category codes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MicroTable {
    schema: Schema,
    codes: Vec<u32>,
}

impl MicroTable {
    pub fn new(schema: Schema, rows: Vec<Vec<u32>>) -> Result<Self> {
        let d = schema.len();
        let mut codes = Vec::with_capacity(rows.len() * d);
        for row in rows {
            if row.len() != d {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    got: row.len(),
                });
            }
            codes.extend(row);
        }
        MicroTable::from_flat(schema, codes)
    }

    /// Builds a table from row-major codes.
    pub fn from_flat(schema: Schema, codes: Vec<u32>) -> Result<Self> {
        let d = schema.len();
        if !codes.len().is_multiple_of(d) {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: codes.len() % d,
            });
        }
        let cards = schema.cardinalities();
        for row in codes.chunks_exact(d) {
            for (i, (&code, &m)) in row.iter().zip(&cards).enumerate() {
                if code as usize >= m {
                    return Err(Error::CodeOutOfRange {
                        variable: schema.variable(i).name.clone(),
                        code,
                        cardinality: m,
                    });
                }
            }
        }
        Ok(MicroTable { schema, codes })
    }

    pub fn empty(schema: Schema) -> Self {
        MicroTable {
            schema,
            codes: Vec::new(),
        }
    }

    pub fn schema(&self) -> &Schema {
        &self.schema
    }

    pub fn n_rows(&self) -> usize {
        self.codes.len() / self.schema.len()
    }

    pub fn n_vars(&self) -> usize {
        self.schema.len()
    }

    pub fn is_empty(&self) -> bool {
        self.codes.is_empty()
    }

    pub fn row(&self, j: usize) -> &[u32] {
        let d = self.n_vars();
        &self.codes[j * d..(j + 1) * d]
    }

    pub fn rows(&self) -> std::slice::ChunksExact<'_, u32> {
        self.codes.chunks_exact(self.n_vars())
    }

    pub fn codes(&self) -> &[u32] {
        &self.codes
    }

    pub fn column(&self, i: usize) -> Vec<u32> {
        self.rows().map(|r| r[i]).collect()
    }

    pub fn to_rows(&self) -> Vec<Vec<u32>> {
        self.rows().map(<[u32]>::to_vec).collect()
    }

    /// Rows at `indices`, in the given order.
    pub fn select_rows(&self, indices: &[usize]) -> MicroTable {
        let mut codes = Vec::with_capacity(indices.len() * self.n_vars());
        for &j in indices {
            codes.extend_from_slice(self.row(j));
        }
        MicroTable {
            schema: self.schema.clone(),
            codes,
        }
    }

    /// Concatenates rows of tables sharing a schema.
    pub fn concat(&self, other: &MicroTable) -> Result<MicroTable> {
        self.schema.ensure_same(&other.schema)?;
        let mut codes = self.codes.clone();
        codes.extend_from_slice(&other.codes);
        Ok(MicroTable {
            schema: self.schema.clone(),
            codes,
        })
    }

    /// Applies a bijective recoding to variable `var`: old code `c` becomes
    /// `perm[c]`, and the schema labels move with their codes.
    pub fn recode(&self, var: usize, perm: &[u32]) -> Result<MicroTable> {
        let spec = self.schema.variable(var).permuted(perm)?;
        let d = self.n_vars();
        let mut codes = self.codes.clone();
        for row in codes.chunks_exact_mut(d) {
            row[var] = perm[row[var] as usize];
        }
        Ok(MicroTable {
            schema: self.schema.with_variable(var, spec),
            codes,
        })
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(writer);
        wtr.write_record(self.schema.variables.iter().map(|v| v.name.as_str()))?;
        for row in self.rows() {
            wtr.write_record(row.iter().enumerate().map(|(i, &c)| {
                self.schema.variables[i].labels[c as usize].as_str()
            }))?;
        }
        wtr.flush().map_err(|e| Error::io("<csv writer>", e))?;
        Ok(())
    }

    pub fn save_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_csv(std::io::BufWriter::new(file))
    }
}

/// Reads microdata from a CSV file, mapping labels to codes through `schema`.
pub fn load_micro_csv(path: impl AsRef<Path>, schema: &Schema) -> Result<MicroTable> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_micro_csv(file, schema)
}

pub fn read_micro_csv<R: Read>(reader: R, schema: &Schema) -> Result<MicroTable> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers()?.clone();
    let columns = schema
        .variables
        .iter()
        .map(|v| {
            headers
                .iter()
                .position(|h| h == v.name)
                .ok_or_else(|| Error::MissingColumn(v.name.clone()))
        })
        .collect::<Result<Vec<_>>>()?;
    // Per-variable label lookup; schemas like AGEP carry ~100 labels.
    let lookups: Vec<HashMap<&str, u32>> = schema
        .variables
        .iter()
        .map(|v| {
            v.labels
                .iter()
                .enumerate()
                .map(|(c, l)| (l.as_str(), c as u32))
                .collect()
        })
        .collect();

    let mut codes = Vec::new();
    for record in rdr.records() {
        let record = record?;
        let line = record.position().map(|p| p.line() as usize).unwrap_or(0);
        for (i, &col) in columns.iter().enumerate() {
            let token = record.get(col).unwrap_or("");
            let code = lookups[i].get(token).copied().ok_or_else(|| Error::UnknownLabel {
                variable: schema.variables[i].name.clone(),
                row: line,
                token: token.to_owned(),
            })?;
            codes.push(code);
        }
    }
    Ok(MicroTable {
        schema: schema.clone(),
        codes,
    })
}

/// Per-variable category counts, aligned with a schema.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MarginalTable {
    schema: Schema,
    counts: Vec<Vec<u64>>,
}

impl MarginalTable {
    pub fn new(schema: Schema, counts: Vec<Vec<u64>>) -> Result<Self> {
        if counts.len() != schema.len() {
            return Err(Error::DimensionMismatch {
                expected: schema.len(),
                got: counts.len(),
            });
        }
        for (v, c) in schema.variables.iter().zip(&counts) {
            if c.len() != v.cardinality() {
                return Err(Error::DimensionMismatch {
                    expected: v.cardinality(),
                    got: c.len(),
                });
            }
            if c.iter().all(|&x| x == 0) {
                return Err(Error::AllZeroMarginal(v.name.clone()));
            }
        }
        Ok(MarginalTable { schema, counts })
    }

    pub fn schema(&self) -> &Schema {
        &self.schema
    }

    pub fn counts(&self, var: usize) -> &[u64] {
        &self.counts[var]
    }

    pub fn all_counts(&self) -> &[Vec<u64>] {
        &self.counts
    }

    pub fn total(&self, var: usize) -> u64 {
        self.counts[var].iter().sum()
    }

    pub fn frequencies(&self, var: usize) -> Vec<f64> {
        let total = self.total(var) as f64;
        self.counts[var].iter().map(|&c| c as f64 / total).collect()
    }

    /// Same marginals after recoding variable `var` (old code `c` → `perm[c]`).
    pub fn recode(&self, var: usize, perm: &[u32]) -> Result<MarginalTable> {
        let spec = self.schema.variable(var).permuted(perm)?;
        let mut counts = self.counts.clone();
        let mut recoded = vec![0; perm.len()];
        for (old, &new) in perm.iter().enumerate() {
            recoded[new as usize] = self.counts[var][old];
        }
        counts[var] = recoded;
        Ok(MarginalTable {
            schema: self.schema.with_variable(var, spec),
            counts,
        })
    }

    /// Writes `variable,label,count` rows, zero counts included.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(writer);
        wtr.write_record(["variable", "label", "count"])?;
        for (v, counts) in self.schema.variables.iter().zip(&self.counts) {
            for (label, count) in v.labels.iter().zip(counts) {
                wtr.write_record([v.name.as_str(), label.as_str(), &count.to_string()])?;
            }
        }
        wtr.flush().map_err(|e| Error::io("<csv writer>", e))?;
        Ok(())
    }

    pub fn save_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_csv(std::io::BufWriter::new(file))
    }
}

/// Reads a `variable,label,count` CSV. Categories absent from the file get 0.
pub fn load_marginals_csv(path: impl AsRef<Path>, schema: &Schema) -> Result<MarginalTable> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_marginals_csv(file, schema)
}

pub fn read_marginals_csv<R: Read>(reader: R, schema: &Schema) -> Result<MarginalTable> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers()?.clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::MissingColumn(name.to_owned()))
    };
    let (var_col, label_col, count_col) = (col("variable")?, col("label")?, col("count")?);

    let mut counts: Vec<Vec<Option<u64>>> = schema
        .variables
        .iter()
        .map(|v| vec![None; v.cardinality()])
        .collect();
    for record in rdr.records() {
        let record = record?;
        let name = record.get(var_col).unwrap_or("");
        let label = record.get(label_col).unwrap_or("");
        let raw = record.get(count_col).unwrap_or("");
        let var = schema
            .index_of(name)
            .ok_or_else(|| Error::UnknownVariable(name.to_owned()))?;
        let spec = schema.variable(var);
        let code = spec.code_of(label).ok_or_else(|| Error::UnknownLabel {
            variable: name.to_owned(),
            row: record.position().map(|p| p.line() as usize).unwrap_or(0),
            token: label.to_owned(),
        })?;
        let count = match raw.parse::<i128>() {
            Ok(c) if c < 0 => {
                return Err(Error::NegativeCount {
                    variable: name.to_owned(),
                    label: label.to_owned(),
                    count: raw.to_owned(),
                })
            }
            Ok(c) if c <= u64::MAX as i128 => c as u64,
            _ => {
                return Err(Error::InvalidCount {
                    variable: name.to_owned(),
                    label: label.to_owned(),
                    count: raw.to_owned(),
                })
            }
        };
        let slot = &mut counts[var][code as usize];
        if slot.is_some() {
            return Err(Error::invalid(format!("duplicate marginal row for {name}={label}")));
        }
        *slot = Some(count);
    }
    let counts = counts
        .into_iter()
        .map(|c| c.into_iter().map(|x| x.unwrap_or(0)).collect())
        .collect();
    MarginalTable::new(schema.clone(), counts)
}

/// Random partition into parts of `⌊fraction·N⌋` and the remaining rows.
/// Each part keeps the original relative row order.
pub fn split(table: &MicroTable, fraction: f64, seed: u64) -> Result<(MicroTable, MicroTable)> {
    let n = table.n_rows();
    if n < 2 {
        return Err(Error::TooFewRows { needed: 2, got: n });
    }
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::invalid(format!("split fraction {fraction} not in (0,1)")));
    }
    let k = (fraction * n as f64).floor() as usize;
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng::stream(seed, rng::substream::SPLIT));
    let (first, second) = order.split_at_mut(k);
    first.sort_unstable();
    second.sort_unstable();
    Ok((table.select_rows(first), table.select_rows(second)))
}

/// Category counts of every variable.
pub fn marginals_of(table: &MicroTable) -> Result<MarginalTable> {
    if table.is_empty() {
        return Err(Error::EmptyTable);
    }
    let mut counts: Vec<Vec<u64>> = table
        .schema
        .cardinalities()
        .into_iter()
        .map(|m| vec![0; m])
        .collect();
    for row in table.rows() {
        for (c, &code) in counts.iter_mut().zip(row) {
            c[code as usize] += 1;
        }
    }
    MarginalTable::new(table.schema.clone(), counts)
}
