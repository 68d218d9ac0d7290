//! Accuracy, diversity and feasibility metrics for synthetic populations.
//!
//! SRMSE compares relative frequencies of variable combinations between a
//! reference and a synthetic table, projected over every subset of `n`
//! variables. Sampled zeros, structural zeros, precision and recall work on
//! distinct combinations after dropping excluded variables.

use std::collections::{BTreeMap, HashSet};
use std::fmt::Write as _;
use std::io::Write;

use itertools::Itertools;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{MicroTable, Schema, VariableKind};
use crate::error::{Error, Result};

pub const MAX_PROJECTION: usize = 5;

/// Relative frequencies of the combinations of a variable subset that occur
/// in a table. Combinations are keyed by their mixed-radix index.
#[derive(Debug, Clone, PartialEq)]
pub struct FrequencyMap {
    subset: Vec<usize>,
    cards: Vec<usize>,
    freqs: BTreeMap<u128, f64>,
}

impl FrequencyMap {
    pub fn of(table: &MicroTable, subset: &[usize]) -> Result<Self> {
        if subset.is_empty() {
            return Err(Error::EmptyProjection);
        }
        if table.is_empty() {
            return Err(Error::EmptyTable);
        }
        if let Some(&bad) = subset.iter().find(|&&i| i >= table.n_vars()) {
            return Err(Error::invalid(format!("variable index {bad} out of range")));
        }
        let all = table.schema().cardinalities();
        let cards: Vec<usize> = subset.iter().map(|&i| all[i]).collect();
        let mut counts: BTreeMap<u128, u64> = BTreeMap::new();
        for row in table.rows() {
            let key = subset
                .iter()
                .zip(&cards)
                .fold(0u128, |acc, (&i, &m)| acc * m as u128 + row[i] as u128);
            *counts.entry(key).or_default() += 1;
        }
        let n = table.n_rows() as f64;
        Ok(FrequencyMap {
            subset: subset.to_vec(),
            cards,
            freqs: counts.into_iter().map(|(k, c)| (k, c as f64 / n)).collect(),
        })
    }

    pub fn subset(&self) -> &[usize] {
        &self.subset
    }

    /// Number of cells of the full Cartesian product.
    pub fn n_cells(&self) -> f64 {
        self.cards.iter().map(|&m| m as f64).product()
    }

    /// Frequency of a combination given as codes of the subset variables.
    pub fn get(&self, codes: &[u32]) -> f64 {
        let key = codes
            .iter()
            .zip(&self.cards)
            .fold(0u128, |acc, (&c, &m)| acc * m as u128 + c as u128);
        self.freqs.get(&key).copied().unwrap_or(0.0)
    }

    pub fn len(&self) -> usize {
        self.freqs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.freqs.is_empty()
    }
}

/// `sqrt(M * sum (pi - pi_hat)^2)` over the Cartesian product of the subset
/// categories, `M` the product of their counts.
pub fn srmse(reference: &MicroTable, synthetic: &MicroTable, subset: &[usize]) -> Result<f64> {
    reference.schema().ensure_same(synthetic.schema())?;
    let a = FrequencyMap::of(reference, subset)?;
    let b = FrequencyMap::of(synthetic, subset)?;
    let keys: BTreeMap<u128, ()> = a.freqs.keys().chain(b.freqs.keys()).map(|&k| (k, ())).collect();
    let sum: f64 = keys
        .keys()
        .map(|k| {
            let diff = a.freqs.get(k).copied().unwrap_or(0.0) - b.freqs.get(k).copied().unwrap_or(0.0);
            diff * diff
        })
        .sum();
    Ok((a.n_cells() * sum).sqrt())
}

/// Mean SRMSE over all variable subsets of size `n`.
pub fn srmse_projected(reference: &MicroTable, synthetic: &MicroTable, n: usize) -> Result<f64> {
    let d = reference.n_vars();
    if n == 0 || n > d {
        return Err(Error::invalid(format!("projection size {n} not in 1..={d}")));
    }
    let subsets: Vec<Vec<usize>> = (0..d).combinations(n).collect();
    let values = subsets
        .par_iter()
        .map(|s| srmse(reference, synthetic, s))
        .collect::<Result<Vec<f64>>>()?;
    Ok(values.iter().sum::<f64>() / values.len() as f64)
}

/// Ordinal variables with more than 20 categories (age-like variables),
/// which would otherwise flood zero counts with sparsity artifacts.
pub fn default_exclusions(schema: &Schema) -> Vec<usize> {
    schema
        .variables()
        .iter()
        .enumerate()
        .filter(|(_, v)| v.kind() == VariableKind::Ordinal && v.cardinality() > 20)
        .map(|(i, _)| i)
        .collect()
}

fn kept_variables(schema: &Schema, exclude: &[usize]) -> Result<Vec<usize>> {
    let kept: Vec<usize> = (0..schema.len()).filter(|i| !exclude.contains(i)).collect();
    if kept.is_empty() {
        return Err(Error::EmptyProjection);
    }
    Ok(kept)
}

fn distinct(table: &MicroTable, kept: &[usize]) -> HashSet<Vec<u32>> {
    table
        .rows()
        .map(|r| kept.iter().map(|&i| r[i]).collect())
        .collect()
}

fn same_schemas(tables: &[&MicroTable]) -> Result<()> {
    for t in &tables[1..] {
        tables[0].schema().ensure_same(t.schema())?;
    }
    Ok(())
}

/// Distinct synthetic combinations seen in the reference but not in training.
pub fn sampled_zeros(
    train: &MicroTable,
    reference: &MicroTable,
    synthetic: &MicroTable,
    exclude: &[usize],
) -> Result<usize> {
    same_schemas(&[train, reference, synthetic])?;
    let kept = kept_variables(train.schema(), exclude)?;
    let tr = distinct(train, &kept);
    let rf = distinct(reference, &kept);
    Ok(distinct(synthetic, &kept)
        .iter()
        .filter(|c| rf.contains(*c) && !tr.contains(*c))
        .count())
}

/// Distinct synthetic combinations absent from the population.
pub fn structural_zeros(
    synthetic: &MicroTable,
    population: &MicroTable,
    exclude: &[usize],
) -> Result<usize> {
    same_schemas(&[synthetic, population])?;
    let kept = kept_variables(synthetic.schema(), exclude)?;
    let pop = distinct(population, &kept);
    Ok(distinct(synthetic, &kept)
        .iter()
        .filter(|c| !pop.contains(*c))
        .count())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Coverage {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    /// Set when the synthetic table has no rows, so precision is undefined
    /// and reported as 0.
    pub synthetic_empty: bool,
}

/// Precision, recall and F1 of the synthetic distinct combinations against
/// those of the population.
pub fn precision_recall_f1(
    synthetic: &MicroTable,
    population: &MicroTable,
    exclude: &[usize],
) -> Result<Coverage> {
    same_schemas(&[synthetic, population])?;
    let kept = kept_variables(synthetic.schema(), exclude)?;
    let pop = distinct(population, &kept);
    let syn = distinct(synthetic, &kept);
    let hit = syn.iter().filter(|c| pop.contains(*c)).count() as f64;
    let precision = if syn.is_empty() { 0.0 } else { hit / syn.len() as f64 };
    let recall = if pop.is_empty() { 0.0 } else { hit / pop.len() as f64 };
    Ok(Coverage {
        precision,
        recall,
        f1: f1_score(precision, recall),
        synthetic_empty: syn.is_empty(),
    })
}

pub fn f1_score(precision: f64, recall: f64) -> f64 {
    if precision > 0.0 && recall > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        0.0
    }
}

/// Aligned category frequencies of one variable in each table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarginalSeries {
    pub variable: String,
    pub labels: Vec<String>,
    pub reference: Vec<f64>,
    pub training: Option<Vec<f64>>,
    pub synthetic: Vec<f64>,
}

fn column_frequencies(table: &MicroTable, var: usize) -> Vec<f64> {
    let m = table.schema().variable(var).cardinality();
    let mut counts = vec![0usize; m];
    for r in table.rows() {
        counts[r[var] as usize] += 1;
    }
    let n = table.n_rows().max(1) as f64;
    counts.into_iter().map(|c| c as f64 / n).collect()
}

pub fn marginal_report(
    reference: &MicroTable,
    train: Option<&MicroTable>,
    synthetic: &MicroTable,
) -> Result<Vec<MarginalSeries>> {
    same_schemas(&[reference, synthetic])?;
    if let Some(t) = train {
        reference.schema().ensure_same(t.schema())?;
    }
    Ok(reference
        .schema()
        .variables()
        .iter()
        .enumerate()
        .map(|(i, v)| MarginalSeries {
            variable: v.name().to_owned(),
            labels: v.labels().to_vec(),
            reference: column_frequencies(reference, i),
            training: train.map(|t| column_frequencies(t, i)),
            synthetic: column_frequencies(synthetic, i),
        })
        .collect())
}

/// Tidy `variable,category,series,frequency` rows for external plotting.
pub fn write_marginal_csv<W: Write>(series: &[MarginalSeries], writer: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    wtr.write_record(["variable", "category", "series", "frequency"])?;
    for s in series {
        let mut columns = vec![("reference", &s.reference)];
        if let Some(t) = &s.training {
            columns.push(("training", t));
        }
        columns.push(("synthetic", &s.synthetic));
        for (name, freqs) in columns {
            for (label, f) in s.labels.iter().zip(freqs.iter()) {
                wtr.write_record([s.variable.as_str(), label, name, &f.to_string()])?;
            }
        }
    }
    wtr.flush().map_err(|e| Error::io("<csv writer>", e))?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub method: String,
    pub srmse_by_n: BTreeMap<usize, f64>,
    pub sampled_zeros: Option<usize>,
    pub structural_zeros: usize,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub marginal_series: Vec<MarginalSeries>,
    #[serde(default)]
    pub warnings: Vec<String>,
}

impl EvaluationReport {
    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(self).expect("plain data")
    }

    /// Fixed-layout text summary.
    pub fn summary_table(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{:<18}{}", "method", self.method);
        for (n, v) in &self.srmse_by_n {
            let _ = writeln!(out, "{:<18}{:.4}", format!("srmse_{n}"), v);
        }
        let sz = self
            .sampled_zeros
            .map_or_else(|| "-".to_owned(), |v| v.to_string());
        let _ = writeln!(out, "{:<18}{}", "sampled_zeros", sz);
        let _ = writeln!(out, "{:<18}{}", "structural_zeros", self.structural_zeros);
        let _ = writeln!(out, "{:<18}{:.4}", "precision", self.precision);
        let _ = writeln!(out, "{:<18}{:.4}", "recall", self.recall);
        let _ = writeln!(out, "{:<18}{:.4}", "f1", self.f1);
        for w in &self.warnings {
            let _ = writeln!(out, "warning: {w}");
        }
        out
    }
}

/// Tables and options for a full evaluation.
#[derive(Debug, Clone, Copy)]
pub struct EvaluationInput<'a> {
    pub reference: &'a MicroTable,
    pub training: Option<&'a MicroTable>,
    pub synthetic: &'a MicroTable,
    /// Table treated as the complete population for structural zeros and
    /// coverage. Defaults to reference plus training rows.
    pub population: Option<&'a MicroTable>,
    pub exclude: &'a [usize],
    pub max_n: usize,
}

pub fn evaluate(method: &str, input: EvaluationInput<'_>) -> Result<EvaluationReport> {
    let EvaluationInput {
        reference,
        training,
        synthetic,
        population,
        exclude,
        max_n,
    } = input;
    same_schemas(&[reference, synthetic])?;
    let max_n = max_n.min(reference.n_vars()).max(1);
    let srmse_by_n = (1..=max_n)
        .map(|n| Ok((n, srmse_projected(reference, synthetic, n)?)))
        .collect::<Result<BTreeMap<_, _>>>()?;
    let owned_population;
    let population = match (population, training) {
        (Some(p), _) => p,
        (None, Some(t)) => {
            owned_population = reference.concat(t)?;
            &owned_population
        }
        (None, None) => reference,
    };
    let sampled = training
        .map(|t| sampled_zeros(t, reference, synthetic, exclude))
        .transpose()?;
    let coverage = precision_recall_f1(synthetic, population, exclude)?;
    Ok(EvaluationReport {
        method: method.to_owned(),
        srmse_by_n,
        sampled_zeros: sampled,
        structural_zeros: structural_zeros(synthetic, population, exclude)?,
        precision: coverage.precision,
        recall: coverage.recall,
        f1: coverage.f1,
        marginal_series: marginal_report(reference, training, synthetic)?,
        warnings: Vec::new(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::VariableSpec;

    fn schema(cards: &[usize]) -> Schema {
        Schema::new(
            cards
                .iter()
                .enumerate()
                .map(|(i, &m)| {
                    VariableSpec::new(
                        format!("V{i}"),
                        (0..m).map(|c| c.to_string()).collect(),
                        VariableKind::Categorical,
                    )
                    .unwrap()
                })
                .collect(),
        )
        .unwrap()
    }

    fn table(cards: &[usize], rows: &[&[u32]]) -> MicroTable {
        MicroTable::new(schema(cards), rows.iter().map(|r| r.to_vec()).collect()).unwrap()
    }

    fn binary(ones: usize, n: usize) -> MicroTable {
        MicroTable::new(
            schema(&[2]),
            (0..n).map(|j| vec![u32::from(j < ones)]).collect(),
        )
        .unwrap()
    }

    #[test]
    fn srmse_hand_cases() {
        let r = binary(5, 10);
        assert_eq!(srmse(&r, &r, &[0]).unwrap(), 0.0);
        // ref (0.5,0.5) vs syn (0.6,0.4)
        let s = binary(4, 10);
        assert!((srmse(&r, &s, &[0]).unwrap() - 0.2).abs() < 1e-15);
        assert_eq!(srmse(&binary(0, 3), &binary(3, 3), &[0]).unwrap(), 2.0);
        assert!(srmse(&r, &s, &[]).is_err());
    }

    #[test]
    fn projected_cases() {
        let a = table(&[2, 3], &[&[0, 1], &[1, 2], &[1, 1]]);
        let b = table(&[2, 3], &[&[0, 0], &[1, 2]]);
        assert_eq!(srmse_projected(&a, &a, 1).unwrap(), 0.0);
        assert_eq!(srmse_projected(&a, &b, 2).unwrap(), srmse(&a, &b, &[0, 1]).unwrap());
        assert!(srmse_projected(&a, &b, 3).is_err());
        assert!(srmse_projected(&a, &b, 0).is_err());
        let expected = (srmse(&a, &b, &[0]).unwrap() + srmse(&a, &b, &[1]).unwrap()) / 2.0;
        assert!((srmse_projected(&a, &b, 1).unwrap() - expected).abs() < 1e-15);
    }

    #[test]
    fn three_binary_pairs_brute_force() {
        let a = table(&[2, 2, 2], &[&[0, 0, 0], &[0, 1, 1], &[1, 1, 0], &[1, 1, 1]]);
        let b = table(&[2, 2, 2], &[&[0, 0, 1], &[1, 1, 1], &[1, 0, 0]]);
        let mut total = 0.0;
        for (i, j) in [(0, 1), (0, 2), (1, 2)] {
            let mut sum = 0.0;
            for x in 0..2u32 {
                for y in 0..2u32 {
                    let fa = a.rows().filter(|r| r[i] == x && r[j] == y).count() as f64 / 4.0;
                    let fb = b.rows().filter(|r| r[i] == x && r[j] == y).count() as f64 / 3.0;
                    sum += (fa - fb).powi(2);
                }
            }
            total += (4.0 * sum).sqrt();
        }
        assert!((srmse_projected(&a, &b, 2).unwrap() - total / 3.0).abs() < 1e-12);
    }

    // A, B, C, D encoded as single-variable codes 0..4
    fn set(codes: &[u32]) -> MicroTable {
        table(&[4], &codes.iter().map(std::slice::from_ref).collect::<Vec<_>>())
    }

    #[test]
    fn zero_counts() {
        assert_eq!(sampled_zeros(&set(&[0]), &set(&[0, 1]), &set(&[1, 2]), &[]).unwrap(), 1);
        assert_eq!(sampled_zeros(&set(&[0, 1]), &set(&[0, 1, 2]), &set(&[0, 1]), &[]).unwrap(), 0);
        assert!(matches!(
            sampled_zeros(&set(&[0]), &set(&[0]), &set(&[0]), &[0]),
            Err(Error::EmptyProjection)
        ));
        assert_eq!(structural_zeros(&set(&[1, 2, 3]), &set(&[0, 1, 2]), &[]).unwrap(), 1);
        assert_eq!(structural_zeros(&set(&[1, 2]), &set(&[0, 1, 2]), &[]).unwrap(), 0);
        assert_eq!(structural_zeros(&MicroTable::empty(schema(&[4])), &set(&[0]), &[]).unwrap(), 0);
    }

    #[test]
    fn coverage_cases() {
        let c = precision_recall_f1(&set(&[1, 2, 3]), &set(&[0, 1, 2]), &[]).unwrap();
        assert_eq!((c.precision, c.recall, c.f1), (2.0 / 3.0, 2.0 / 3.0, 2.0 / 3.0));
        let c = precision_recall_f1(&set(&[2, 0, 1, 1]), &set(&[0, 1, 2]), &[]).unwrap();
        assert_eq!((c.precision, c.recall, c.f1), (1.0, 1.0, 1.0));
        let c = precision_recall_f1(&MicroTable::empty(schema(&[4])), &set(&[0]), &[]).unwrap();
        assert!(c.synthetic_empty);
        assert_eq!(c.f1, 0.0);
    }

    #[test]
    fn exclusion_projects_before_counting() {
        let train = table(&[2, 3], &[&[0, 0]]);
        let reference = table(&[2, 3], &[&[0, 1], &[1, 2]]);
        let syn = table(&[2, 3], &[&[0, 2], &[1, 1]]);
        assert_eq!(sampled_zeros(&train, &reference, &syn, &[]).unwrap(), 0);
        assert_eq!(sampled_zeros(&train, &reference, &syn, &[1]).unwrap(), 1);
    }

    #[test]
    fn default_exclusion_targets_wide_ordinals() {
        let s = Schema::new(vec![
            VariableSpec::new("AGEP", (0..100).map(|a| a.to_string()).collect(), VariableKind::Ordinal).unwrap(),
            VariableSpec::new("NP", (1..8).map(|a| a.to_string()).collect(), VariableKind::Ordinal).unwrap(),
            VariableSpec::new("RAC", (0..30).map(|a| a.to_string()).collect(), VariableKind::Categorical).unwrap(),
        ])
        .unwrap();
        assert_eq!(default_exclusions(&s), vec![0]);
    }

    #[test]
    fn marginal_series_counts() {
        let reference = table(&[3], &[&[0], &[2], &[2]]);
        let train = table(&[3], &[&[1], &[1], &[0]]);
        let syn = table(&[3], &[&[0], &[2], &[2]]);
        let r = marginal_report(&reference, Some(&train), &syn).unwrap();
        assert_eq!(r[0].reference, vec![1.0 / 3.0, 0.0, 2.0 / 3.0]);
        assert_eq!(r[0].training.as_ref().unwrap(), &vec![1.0 / 3.0, 2.0 / 3.0, 0.0]);
        assert_eq!(r[0].reference, r[0].synthetic);
        let mut buf = Vec::new();
        write_marginal_csv(&r, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 10);
        assert!(text.starts_with("variable,category,series,frequency\nV0,0,reference,"));
    }

    #[test]
    fn report_json_field_names() {
        let a = table(&[2, 2], &[&[0, 1], &[1, 1]]);
        let report = evaluate(
            "bn",
            EvaluationInput {
                reference: &a,
                training: Some(&a),
                synthetic: &a,
                population: None,
                exclude: &[],
                max_n: 5,
            },
        )
        .unwrap();
        let v: serde_json::Value = serde_json::from_str(&report.to_json_string()).unwrap();
        for key in [
            "srmse_by_n",
            "sampled_zeros",
            "structural_zeros",
            "precision",
            "recall",
            "f1",
            "marginal_series",
        ] {
            assert!(v.get(key).is_some(), "{key}");
        }
        assert_eq!(report.srmse_by_n.len(), 2);
        assert_eq!(report.f1, 1.0);
    }
}
