//! Copula normalization for categorical data.
//!
//! Each variable is pushed through its empirical CDF, which casts a sample
//! into the unit hypercube. Generated points are mapped back onto a target
//! population through the pseudo-inverse of the target marginal CDF. The
//! discrete ECDFs are relaxed to piecewise-linear CDFs so that a point of the
//! hypercube can land anywhere inside a cell, not only on the knot lattice of
//! the source marginals.

use std::collections::BTreeMap;
use std::io::{BufRead, Write};

use rand::Rng;
use rayon::prelude::*;

use crate::dataset::{MarginalTable, MicroTable, Schema, VariableKind, VariableSpec};
use crate::error::{Error, Result};
use crate::rng;

/// Multiplicity-weighted step ECDF over the observed codes of one variable.
///
/// `cumprobs[k]` is the fraction of observations `<= values[k]`. Codes with
/// zero mass never appear, so `cumprobs` is strictly increasing and ends at 1.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalMarginal {
    values: Vec<u32>,
    cumprobs: Vec<f64>,
}

impl EmpiricalMarginal {
    /// Builds the ECDF from counts indexed by code. Zero-count codes are dropped.
    pub fn from_counts(counts: &[u64]) -> Result<Self> {
        let total: u64 = counts.iter().sum();
        if total == 0 {
            return Err(Error::EmptyTable);
        }
        let mut values = Vec::new();
        let mut cumprobs = Vec::new();
        let mut cum = 0u64;
        for (code, &c) in counts.iter().enumerate() {
            if c == 0 {
                continue;
            }
            cum += c;
            values.push(code as u32);
            cumprobs.push(cum as f64 / total as f64);
        }
        Ok(EmpiricalMarginal { values, cumprobs })
    }

    pub fn values(&self) -> &[u32] {
        &self.values
    }

    pub fn cumprobs(&self) -> &[f64] {
        &self.cumprobs
    }

    /// Number of distinct observed codes.
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Step-function value at `code`: mass of observations `<= code`.
    pub fn evaluate(&self, code: u32) -> f64 {
        match self.values.partition_point(|&v| v <= code) {
            0 => 0.0,
            k => self.cumprobs[k - 1],
        }
    }

    /// Cell index (0-based) of an observed code.
    pub fn cell_of(&self, code: u32) -> Option<usize> {
        self.values.binary_search(&code).ok()
    }

    /// The half-open interval `(F(x_{k-1}), F(x_k)]` covered by cell `k`.
    pub fn interval(&self, cell: usize) -> Option<(f64, f64)> {
        let hi = *self.cumprobs.get(cell)?;
        let lo = if cell == 0 { 0.0 } else { self.cumprobs[cell - 1] };
        Some((lo, hi))
    }

    /// Index of the first knot with cumprob `>= u`.
    fn cell_for(&self, u: f64) -> usize {
        self.cumprobs
            .partition_point(|&p| p < u)
            .min(self.cumprobs.len() - 1)
    }

    /// `min { x_j : F(x_j) >= u }` for `u` in `(0, 1]`.
    pub fn pseudo_inverse(&self, u: f64) -> Result<u32> {
        if !(u > 0.0 && u <= 1.0) {
            return Err(Error::invalid(format!("pseudo-inverse argument {u} not in (0,1]")));
        }
        Ok(self.values[self.cell_for(u)])
    }

    /// Uniform draw from the ECDF interval of `cell` (0-based).
    ///
    /// This is a draw of the relaxed CDF evaluated at a point placed uniformly
    /// on the cell's linear segment, i.e. a sample from the copula extended
    /// over the relaxed marginal, conditional on the cell.
    pub fn jitter_sample<R: Rng + ?Sized>(&self, cell: usize, rng: &mut R) -> Result<f64> {
        let (lo, hi) = self.interval(cell).ok_or_else(|| {
            Error::invalid(format!("cell {cell} out of range for {} cells", self.len()))
        })?;
        let r: f64 = rng.random();
        let u = hi - r * (hi - lo);
        Ok(if u <= lo { hi } else { u })
    }

    /// Piecewise-linear relaxation anchored one code below the first observed value.
    pub fn relaxed(&self) -> RelaxedEcdf {
        let anchor = self.values[0] as f64 - 1.0;
        let knots: Vec<(f64, f64)> = self
            .values
            .iter()
            .zip(&self.cumprobs)
            .map(|(&v, &p)| (v as f64, p))
            .collect();
        RelaxedEcdf::new(anchor, &knots).expect("ECDF knots are strictly increasing")
    }
}

/// ECDF of a column of codes.
pub fn fit_ecdf(column: &[u32]) -> Result<EmpiricalMarginal> {
    if column.is_empty() {
        return Err(Error::EmptyTable);
    }
    let mut counts: BTreeMap<u32, u64> = BTreeMap::new();
    for &c in column {
        *counts.entry(c).or_default() += 1;
    }
    let n = column.len() as f64;
    let mut cum = 0u64;
    let (values, cumprobs) = counts
        .into_iter()
        .map(|(v, c)| {
            cum += c;
            (v, cum as f64 / n)
        })
        .unzip();
    Ok(EmpiricalMarginal { values, cumprobs })
}

/// ECDFs of every variable of a marginal table.
pub fn marginal_ecdfs(marginals: &MarginalTable) -> Result<Vec<EmpiricalMarginal>> {
    marginals
        .all_counts()
        .iter()
        .map(|c| EmpiricalMarginal::from_counts(c))
        .collect()
}

/// Continuous piecewise-linear CDF through `(anchor, 0)` and the ECDF knots.
#[derive(Debug, Clone, PartialEq)]
pub struct RelaxedEcdf {
    xs: Vec<f64>,
    ps: Vec<f64>,
}

impl RelaxedEcdf {
    /// `knots` are `(position, cumprob)` pairs, strictly increasing in both
    /// coordinates, last cumprob 1, first position above `anchor`.
    pub fn new(anchor: f64, knots: &[(f64, f64)]) -> Result<Self> {
        let mut xs = Vec::with_capacity(knots.len() + 1);
        let mut ps = Vec::with_capacity(knots.len() + 1);
        xs.push(anchor);
        ps.push(0.0);
        for &(x, p) in knots {
            if !(x > *xs.last().unwrap() && p > *ps.last().unwrap() && p <= 1.0) {
                return Err(Error::invalid("relaxed ECDF knots must increase strictly"));
            }
            xs.push(x);
            ps.push(p);
        }
        if knots.is_empty() || *ps.last().unwrap() != 1.0 {
            return Err(Error::invalid("relaxed ECDF must end at probability 1"));
        }
        Ok(RelaxedEcdf { xs, ps })
    }

    pub fn anchor(&self) -> f64 {
        self.xs[0]
    }

    /// Linear interpolation between bracketing knots; 0 left of the anchor
    /// and 1 right of the last knot.
    pub fn evaluate(&self, x: f64) -> f64 {
        let last = self.xs.len() - 1;
        if x <= self.xs[0] {
            return 0.0;
        }
        if x >= self.xs[last] {
            return 1.0;
        }
        let k = self.xs.partition_point(|&v| v < x);
        if self.xs[k] == x {
            return self.ps[k];
        }
        let (x0, x1) = (self.xs[k - 1], self.xs[k]);
        let (p0, p1) = (self.ps[k - 1], self.ps[k]);
        p0 + (p1 - p0) * (x - x0) / (x1 - x0)
    }

    /// Position where the relaxed CDF reaches `p`.
    pub fn quantile(&self, p: f64) -> f64 {
        let p = p.clamp(0.0, 1.0);
        let k = self.ps.partition_point(|&v| v < p);
        if k == 0 {
            return self.xs[0];
        }
        let (x0, x1) = (self.xs[k - 1], self.xs[k]);
        let (p0, p1) = (self.ps[k - 1], self.ps[k]);
        x0 + (x1 - x0) * (p - p0) / (p1 - p0)
    }
}

/// Data cast into the unit hypercube, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalizedTable {
    schema: Schema,
    values: Vec<f64>,
}

impl NormalizedTable {
    pub fn new(schema: Schema, values: Vec<f64>) -> Result<Self> {
        let d = schema.len();
        if !values.len().is_multiple_of(d) {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: values.len() % d,
            });
        }
        if let Some(bad) = values.iter().find(|&&u| !(u > 0.0 && u <= 1.0)) {
            return Err(Error::invalid(format!("normalized value {bad} not in (0,1]")));
        }
        Ok(NormalizedTable { schema, values })
    }

    pub fn schema(&self) -> &Schema {
        &self.schema
    }

    pub fn n_rows(&self) -> usize {
        self.values.len() / self.schema.len()
    }

    pub fn n_vars(&self) -> usize {
        self.schema.len()
    }

    pub fn row(&self, j: usize) -> &[f64] {
        let d = self.n_vars();
        &self.values[j * d..(j + 1) * d]
    }

    pub fn rows(&self) -> std::slice::ChunksExact<'_, f64> {
        self.values.chunks_exact(self.n_vars())
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// CSV with a header of variable names and one row per record.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(writer);
        wtr.write_record(self.schema.variables().iter().map(VariableSpec::name))?;
        for row in self.rows() {
            wtr.write_record(row.iter().map(|u| u.to_string()))?;
        }
        wtr.flush().map_err(|e| Error::io("<csv writer>", e))?;
        Ok(())
    }

    /// Reads values in `(0,1]`. A header row is accepted if its first field
    /// does not parse as a number.
    pub fn read_csv<R: BufRead>(reader: R, schema: &Schema) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(false)
            .trim(csv::Trim::All)
            .from_reader(reader);
        let d = schema.len();
        let mut values = Vec::new();
        for (i, record) in rdr.records().enumerate() {
            let record = record?;
            if i == 0 && record.get(0).is_some_and(|f| f.parse::<f64>().is_err()) {
                continue;
            }
            if record.len() != d {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    got: record.len(),
                });
            }
            for field in record.iter() {
                let u: f64 = field
                    .parse()
                    .map_err(|_| Error::invalid(format!("not a number: `{field}`")))?;
                values.push(u);
            }
        }
        NormalizedTable::new(schema.clone(), values)
    }
}

/// Replaces every code by its ECDF value. Returns the fitted ECDFs too.
pub fn normalize(table: &MicroTable) -> Result<(NormalizedTable, Vec<EmpiricalMarginal>)> {
    if table.is_empty() {
        return Err(Error::EmptyTable);
    }
    let ecdfs = (0..table.n_vars())
        .map(|i| fit_ecdf(&table.column(i)))
        .collect::<Result<Vec<_>>>()?;
    let values = table
        .rows()
        .flat_map(|row| row.iter().zip(&ecdfs).map(|(&c, f)| f.evaluate(c)))
        .collect();
    Ok((
        NormalizedTable {
            schema: table.schema().clone(),
            values,
        },
        ecdfs,
    ))
}

/// Componentwise pseudo-inverse against the target ECDFs.
pub fn denormalize(normalized: &NormalizedTable, targets: &[EmpiricalMarginal]) -> Result<MicroTable> {
    if targets.len() != normalized.n_vars() {
        return Err(Error::DimensionMismatch {
            expected: normalized.n_vars(),
            got: targets.len(),
        });
    }
    let codes = normalized
        .rows()
        .flat_map(|row| row.iter().zip(targets).map(|(&u, f)| f.pseudo_inverse(u)))
        .collect::<Result<Vec<_>>>()?;
    MicroTable::from_flat(normalized.schema.clone(), codes)
}

/// Recodes normalized values to the dense cell index of the ECDF interval
/// they fall into. The schema labels are the cells' ECDF levels, so this is a
/// monotone relabeling of the normalized data into a categorical table.
pub fn cell_table(normalized: &NormalizedTable, ecdfs: &[EmpiricalMarginal]) -> Result<MicroTable> {
    if ecdfs.len() != normalized.n_vars() {
        return Err(Error::DimensionMismatch {
            expected: normalized.n_vars(),
            got: ecdfs.len(),
        });
    }
    let schema = cell_schema(normalized.schema(), ecdfs)?;
    let codes = normalized
        .rows()
        .flat_map(|row| row.iter().zip(ecdfs).map(|(&u, f)| f.cell_for(u) as u32))
        .collect();
    MicroTable::from_flat(schema, codes)
}

fn cell_schema(schema: &Schema, ecdfs: &[EmpiricalMarginal]) -> Result<Schema> {
    let variables = schema
        .variables()
        .iter()
        .zip(ecdfs)
        .map(|(v, f)| {
            let labels = f.cumprobs.iter().map(|p| p.to_string()).collect();
            VariableSpec::new(v.name(), labels, VariableKind::Ordinal)
        })
        .collect::<Result<Vec<_>>>()?;
    Schema::new(variables)
}

/// Places every cell of a cell table uniformly inside its ECDF interval.
/// Row `j` draws from substream `j` of a seed derived from `seed`.
pub fn jitter_cells(
    cells: &MicroTable,
    ecdfs: &[EmpiricalMarginal],
    schema: &Schema,
    seed: u64,
) -> Result<NormalizedTable> {
    let d = cells.n_vars();
    if ecdfs.len() != d || schema.len() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: ecdfs.len(),
        });
    }
    let base = rng::derive_seed(seed, rng::substream::JITTER);
    let rows: Vec<Vec<f64>> = (0..cells.n_rows())
        .into_par_iter()
        .map(|j| {
            let mut r = rng::stream(base, j as u64);
            cells
                .row(j)
                .iter()
                .zip(ecdfs)
                .map(|(&k, f)| f.jitter_sample(k as usize, &mut r))
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<_>>()?;
    NormalizedTable::new(schema.clone(), rows.concat())
}
