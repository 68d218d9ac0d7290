//! Iterative proportional fitting over the full joint contingency table,
//! followed by multinomial allocation of a synthetic population.

use std::io::Write;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;

use crate::dataset::{MarginalTable, MicroTable, Schema};
use crate::error::{Error, Result};

pub const DEFAULT_CELL_BUDGET: u128 = 100_000_000;
/// Convergence tolerance as a fraction of the total target mass.
pub const DEFAULT_RELATIVE_TOL: f64 = 1e-8;
pub const DEFAULT_MAX_ITER: usize = 1000;

/// Dense d-dimensional table of nonnegative weights, row-major over codes.
#[derive(Debug, Clone, PartialEq)]
pub struct ContingencyTable {
    schema: Schema,
    shape: Vec<usize>,
    strides: Vec<usize>,
    cells: Vec<f64>,
}

impl ContingencyTable {
    fn zeros(schema: &Schema, budget: u128) -> Result<Self> {
        let shape = schema.cardinalities();
        let cells: u128 = shape.iter().map(|&m| m as u128).product();
        if cells > budget {
            return Err(Error::Capacity { cells, budget });
        }
        let mut strides = vec![1; shape.len()];
        for i in (0..shape.len().saturating_sub(1)).rev() {
            strides[i] = strides[i + 1] * shape[i + 1];
        }
        Ok(ContingencyTable {
            schema: schema.clone(),
            shape,
            strides,
            cells: vec![0.0; cells as usize],
        })
    }

    pub fn schema(&self) -> &Schema {
        &self.schema
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn cells(&self) -> &[f64] {
        &self.cells
    }

    pub fn index_of(&self, codes: &[u32]) -> usize {
        codes
            .iter()
            .zip(&self.strides)
            .map(|(&c, &s)| c as usize * s)
            .sum()
    }

    pub fn codes_of(&self, mut index: usize) -> Vec<u32> {
        self.strides
            .iter()
            .map(|&s| {
                let c = index / s;
                index %= s;
                c as u32
            })
            .collect()
    }

    pub fn get(&self, codes: &[u32]) -> f64 {
        self.cells[self.index_of(codes)]
    }

    pub fn total(&self) -> f64 {
        self.cells.iter().sum()
    }

    /// Sums over every axis but `var`.
    pub fn axis_sums(&self, var: usize) -> Vec<f64> {
        let (m, s) = (self.shape[var], self.strides[var]);
        let mut sums = vec![0.0; m];
        for (idx, &v) in self.cells.iter().enumerate() {
            sums[(idx / s) % m] += v;
        }
        sums
    }

    /// Writes nonzero cells as `<variables...>,value`, one label column per variable.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(writer);
        let mut header: Vec<&str> = self.schema.variables().iter().map(|v| v.name()).collect();
        header.push("value");
        wtr.write_record(&header)?;
        for (idx, &v) in self.cells.iter().enumerate() {
            if v == 0.0 {
                continue;
            }
            let codes = self.codes_of(idx);
            let mut record: Vec<String> = codes
                .iter()
                .enumerate()
                .map(|(i, &c)| self.schema.variable(i).labels()[c as usize].clone())
                .collect();
            record.push(v.to_string());
            wtr.write_record(&record)?;
        }
        wtr.flush().map_err(|e| Error::io("<csv writer>", e))?;
        Ok(())
    }
}

/// Seed table of observed combination counts.
pub fn build_seed(table: &MicroTable) -> Result<ContingencyTable> {
    build_seed_with_budget(table, DEFAULT_CELL_BUDGET)
}

pub fn build_seed_with_budget(table: &MicroTable, budget: u128) -> Result<ContingencyTable> {
    if table.is_empty() {
        return Err(Error::EmptyTable);
    }
    let mut ct = ContingencyTable::zeros(table.schema(), budget)?;
    for row in table.rows() {
        let idx = ct.index_of(row);
        ct.cells[idx] += 1.0;
    }
    Ok(ct)
}

/// Target mass that no scaling can reach because the seed has no support
/// for the category.
#[derive(Debug, Clone, PartialEq)]
pub struct UnreachableMass {
    pub variable: String,
    pub label: String,
    pub mass: f64,
}

#[derive(Debug, Clone)]
pub struct IpfFit {
    pub table: ContingencyTable,
    pub cycles: usize,
    pub converged: bool,
    /// Largest absolute gap between a fitted axis sum and its target.
    pub max_deviation: f64,
    pub unreachable: Vec<UnreachableMass>,
}

impl IpfFit {
    pub fn warnings(&self) -> Vec<String> {
        self.unreachable
            .iter()
            .map(|u| {
                format!(
                    "ipf: target category {}={} has no seed support; unreachable mass {}",
                    u.variable, u.label, u.mass
                )
            })
            .collect()
    }
}

/// Cyclic proportional scaling of `seed` towards every one-way target.
///
/// Targets whose totals differ across variables are rescaled to the first
/// variable's total. Iteration stops once every axis sum is within `tol`
/// (absolute) of its target, when a full cycle no longer changes the maximum
/// deviation, or after `max_iter` cycles. Zero seed cells stay zero.
pub fn fit(
    seed: &ContingencyTable,
    targets: &MarginalTable,
    tol: f64,
    max_iter: usize,
) -> Result<IpfFit> {
    seed.schema.ensure_same(targets.schema())?;
    if !(tol > 0.0) {
        return Err(Error::invalid(format!("tolerance {tol} must be positive")));
    }
    let d = seed.shape.len();
    let total = targets.total(0) as f64;
    let goal: Vec<Vec<f64>> = (0..d)
        .map(|i| {
            let scale = total / targets.total(i) as f64;
            targets.counts(i).iter().map(|&c| c as f64 * scale).collect()
        })
        .collect();

    let mut table = seed.clone();
    let mut unreachable = Vec::new();
    for (i, g) in goal.iter().enumerate() {
        let sums = table.axis_sums(i);
        for (k, (&s, &t)) in sums.iter().zip(g).enumerate() {
            if s == 0.0 && t > 0.0 {
                let v = table.schema.variable(i);
                unreachable.push(UnreachableMass {
                    variable: v.name().to_owned(),
                    label: v.labels()[k].clone(),
                    mass: t,
                });
            }
        }
    }

    let deviation = |t: &ContingencyTable| {
        (0..d)
            .flat_map(|i| {
                t.axis_sums(i)
                    .into_iter()
                    .zip(&goal[i])
                    .map(|(s, g)| (s - g).abs())
                    .collect::<Vec<_>>()
            })
            .fold(0.0, f64::max)
    };

    let mut dev = deviation(&table);
    let mut cycles = 0;
    while dev >= tol && cycles < max_iter {
        for (i, g) in goal.iter().enumerate() {
            let sums = table.axis_sums(i);
            let factors: Vec<f64> = sums
                .iter()
                .zip(g)
                .map(|(&s, &t)| if s > 0.0 { t / s } else { 0.0 })
                .collect();
            let (m, s) = (table.shape[i], table.strides[i]);
            for (idx, v) in table.cells.iter_mut().enumerate() {
                if *v != 0.0 {
                    *v *= factors[(idx / s) % m];
                }
            }
        }
        cycles += 1;
        let next = deviation(&table);
        let stalled = (dev - next).abs() <= f64::EPSILON * total.max(1.0);
        dev = next;
        if stalled {
            break;
        }
    }
    Ok(IpfFit {
        table,
        cycles,
        converged: dev < tol,
        max_deviation: dev,
        unreachable,
    })
}

/// `n` i.i.d. rows drawn with probability proportional to the fitted cells.
pub fn allocate<R: Rng + ?Sized>(fitted: &ContingencyTable, n: usize, rng: &mut R) -> Result<MicroTable> {
    let support: Vec<(usize, f64)> = fitted
        .cells
        .iter()
        .copied()
        .enumerate()
        .filter(|&(_, v)| v > 0.0)
        .collect();
    if support.is_empty() {
        return Err(Error::invalid("cannot allocate from an all-zero table"));
    }
    let dist = WeightedIndex::new(support.iter().map(|&(_, v)| v))
        .map_err(|e| Error::invalid(format!("bad fitted weights: {e}")))?;
    let mut codes = Vec::with_capacity(n * fitted.shape.len());
    for _ in 0..n {
        codes.extend(fitted.codes_of(support[dist.sample(rng)].0));
    }
    MicroTable::from_flat(fitted.schema.clone(), codes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{marginals_of, VariableKind, VariableSpec};
    use crate::rng;

    fn schema(cards: &[usize]) -> Schema {
        Schema::new(
            cards
                .iter()
                .enumerate()
                .map(|(i, &m)| {
                    VariableSpec::new(
                        format!("V{i}"),
                        (0..m).map(|c| format!("c{c}")).collect(),
                        VariableKind::Categorical,
                    )
                    .unwrap()
                })
                .collect(),
        )
        .unwrap()
    }

    fn two_by_two(a: u32, b: u32, c: u32, dd: u32) -> MicroTable {
        let mut rows = Vec::new();
        for (cell, k) in [([0, 0], a), ([0, 1], b), ([1, 0], c), ([1, 1], dd)] {
            rows.extend(std::iter::repeat_n(cell.to_vec(), k as usize));
        }
        MicroTable::new(schema(&[2, 2]), rows).unwrap()
    }

    /// Plain two-way raking written independently of the library routine.
    fn reference_ipf(mut t: [[f64; 2]; 2], rows: [f64; 2], cols: [f64; 2], tol: f64) -> [[f64; 2]; 2] {
        for _ in 0..100_000 {
            for r in 0..2 {
                let s = t[r][0] + t[r][1];
                for c in 0..2 {
                    t[r][c] *= rows[r] / s;
                }
            }
            for c in 0..2 {
                let s = t[0][c] + t[1][c];
                for r in 0..2 {
                    t[r][c] *= cols[c] / s;
                }
            }
            let dev = (0..2)
                .map(|r| (t[r][0] + t[r][1] - rows[r]).abs())
                .chain((0..2).map(|c| (t[0][c] + t[1][c] - cols[c]).abs()))
                .fold(0.0, f64::max);
            if dev < tol {
                break;
            }
        }
        t
    }

    #[test]
    fn seed_counts() {
        let t = MicroTable::new(schema(&[2, 2]), vec![vec![0, 0], vec![0, 0], vec![1, 1]]).unwrap();
        let s = build_seed(&t).unwrap();
        assert_eq!(s.get(&[0, 0]), 2.0);
        assert_eq!(s.get(&[1, 1]), 1.0);
        assert_eq!(s.get(&[0, 1]), 0.0);
        assert_eq!(s.total(), 3.0);
        assert!(matches!(build_seed(&MicroTable::empty(schema(&[2]))), Err(Error::EmptyTable)));
    }

    #[test]
    fn capacity_guard() {
        // 100*2*9*6*6*7*7*4*4*3 = 152,409,600 cells
        let big = schema(&[100, 2, 9, 6, 6, 7, 7, 4, 4, 3]);
        let t = MicroTable::new(big, vec![vec![0; 10]]).unwrap();
        assert!(matches!(build_seed(&t), Err(Error::Capacity { .. })));
        let small = MicroTable::new(schema(&[4, 4]), vec![vec![0, 0]]).unwrap();
        assert!(matches!(build_seed_with_budget(&small, 15), Err(Error::Capacity { cells: 16, budget: 15 })));
        assert!(build_seed_with_budget(&small, 16).is_ok());
    }

    #[test]
    fn fixed_point() {
        let t = two_by_two(1, 2, 3, 4);
        let seed = build_seed(&t).unwrap();
        let targets = marginals_of(&t).unwrap();
        let f = fit(&seed, &targets, 1e-10, 1000).unwrap();
        assert_eq!(f.table.cells(), seed.cells());
        assert_eq!(f.cycles, 0);
        assert!(f.converged);
    }

    #[test]
    fn two_by_two_against_reference() {
        let seed = build_seed(&two_by_two(1, 2, 3, 4)).unwrap();
        let targets = MarginalTable::new(schema(&[2, 2]), vec![vec![5, 5], vec![5, 5]]).unwrap();
        let f = fit(&seed, &targets, 1e-10, 1000).unwrap();
        assert!(f.converged);
        assert!(f.max_deviation < 1e-10);
        let r = reference_ipf([[1.0, 2.0], [3.0, 4.0]], [5.0, 5.0], [5.0, 5.0], 1e-12);
        for a in 0..2u32 {
            for b in 0..2u32 {
                assert!((f.table.get(&[a, b]) - r[a as usize][b as usize]).abs() < 1e-9);
            }
        }
        let c = f.table.cells();
        let ratio = c[0] * c[3] / (c[1] * c[2]);
        assert!((ratio - 2.0 / 3.0).abs() < 1e-8);
    }

    #[test]
    fn zero_support_is_reported() {
        let seed = build_seed(&two_by_two(3, 2, 0, 0)).unwrap();
        let targets = MarginalTable::new(schema(&[2, 2]), vec![vec![6, 4], vec![5, 5]]).unwrap();
        let f = fit(&seed, &targets, 1e-8, 1000).unwrap();
        assert_eq!(f.unreachable.len(), 1);
        assert_eq!(f.unreachable[0].variable, "V0");
        assert_eq!(f.unreachable[0].label, "c1");
        assert_eq!(f.unreachable[0].mass, 4.0);
        assert!(!f.converged);
        assert!(f.warnings()[0].contains("V0=c1"));
        assert_eq!(f.table.get(&[1, 0]), 0.0);
    }

    #[test]
    fn zero_cells_stay_zero_and_deviation_shrinks() {
        let mut r = rng::stream(2, 0);
        let rows: Vec<Vec<u32>> = (0..200)
            .map(|_| vec![r.random_range(0..3), r.random_range(0..2), r.random_range(0..3)])
            .filter(|row| !(row[0] == 2 && row[2] == 0))
            .collect();
        let t = MicroTable::new(schema(&[3, 2, 3]), rows).unwrap();
        let seed = build_seed(&t).unwrap();
        let targets = MarginalTable::new(
            schema(&[3, 2, 3]),
            vec![vec![30, 40, 30], vec![55, 45], vec![20, 50, 30]],
        )
        .unwrap();
        let mut last = f64::INFINITY;
        for cycles in 1..15 {
            let f = fit(&seed, &targets, 1e-300, cycles).unwrap();
            assert!(f.max_deviation <= last + 1e-12);
            last = f.max_deviation;
        }
        let f = fit(&seed, &targets, 1e-8, 1000).unwrap();
        assert!(f.converged);
        for (s, v) in seed.cells().iter().zip(f.table.cells()) {
            if *s == 0.0 {
                assert_eq!(*v, 0.0);
            }
        }
    }

    #[test]
    fn unequal_totals_are_rescaled() {
        let seed = build_seed(&two_by_two(1, 2, 3, 4)).unwrap();
        let targets = MarginalTable::new(schema(&[2, 2]), vec![vec![5, 5], vec![1, 1]]).unwrap();
        let f = fit(&seed, &targets, 1e-10, 1000).unwrap();
        assert!(f.converged);
        assert!((f.table.total() - 10.0).abs() < 1e-9);
        assert!((f.table.axis_sums(1)[0] - 5.0).abs() < 1e-9);
    }

    #[test]
    fn allocation() {
        let single = build_seed(&two_by_two(0, 0, 5, 0)).unwrap();
        let t = allocate(&single, 100, &mut rng::stream(1, 0)).unwrap();
        assert!(t.rows().all(|r| r == [1, 0]));
        assert_eq!(allocate(&single, 0, &mut rng::stream(1, 0)).unwrap().n_rows(), 0);

        let pair = build_seed(&two_by_two(3, 0, 0, 3)).unwrap();
        let t = allocate(&pair, 100_000, &mut rng::stream(2, 0)).unwrap();
        let f = t.rows().filter(|r| r == &[0, 0]).count() as f64 / 1e5;
        assert!((f - 0.5).abs() < 0.005);
        assert_eq!(t, allocate(&pair, 100_000, &mut rng::stream(2, 0)).unwrap());

        let mut zero = pair.clone();
        zero.cells.fill(0.0);
        assert!(allocate(&zero, 1, &mut rng::stream(2, 0)).is_err());
    }

    #[test]
    fn csv_lists_nonzero_cells() {
        let seed = build_seed(&two_by_two(1, 0, 0, 2)).unwrap();
        let mut buf = Vec::new();
        seed.write_csv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "V0,V1,value\nc0,c0,1\nc1,c1,2\n");
    }
}
