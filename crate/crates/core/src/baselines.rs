//! Independent-marginal baseline: every column is drawn on its own.

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;

use crate::dataset::{MarginalTable, MicroTable};
use crate::error::{Error, Result};

/// `n` rows whose columns are i.i.d. draws from their own marginal.
pub fn sample_independent<R: Rng + ?Sized>(
    marginals: &MarginalTable,
    n: usize,
    rng: &mut R,
) -> Result<MicroTable> {
    let dists = marginals
        .all_counts()
        .iter()
        .map(|c| WeightedIndex::new(c).map_err(|e| Error::invalid(format!("bad marginal: {e}"))))
        .collect::<Result<Vec<_>>>()?;
    let mut codes = Vec::with_capacity(n * dists.len());
    for _ in 0..n {
        codes.extend(dists.iter().map(|d| d.sample(rng) as u32));
    }
    MicroTable::from_flat(marginals.schema().clone(), codes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{marginals_of, Schema, VariableKind, VariableSpec};
    use crate::rng;

    fn binary_pair() -> MarginalTable {
        let vars = ["A", "B"]
            .iter()
            .map(|n| VariableSpec::new(*n, vec!["0".into(), "1".into()], VariableKind::Categorical).unwrap())
            .collect();
        MarginalTable::new(Schema::new(vars).unwrap(), vec![vec![50, 50], vec![50, 50]]).unwrap()
    }

    #[test]
    fn degenerate_marginals() {
        let vars = vec![
            VariableSpec::new("A", vec!["x".into(), "y".into()], VariableKind::Categorical).unwrap(),
        ];
        let m = MarginalTable::new(Schema::new(vars).unwrap(), vec![vec![0, 7]]).unwrap();
        let t = sample_independent(&m, 50, &mut rng::stream(0, 0)).unwrap();
        assert!(t.rows().all(|r| r == [1]));
    }

    #[test]
    fn product_measure() {
        let n = 100_000;
        let t = sample_independent(&binary_pair(), n, &mut rng::stream(1, 0)).unwrap();
        let mut cells = [0usize; 4];
        for r in t.rows() {
            cells[(r[0] * 2 + r[1]) as usize] += 1;
        }
        // 3 sigma for p = 0.25 at n = 1e5 is 0.0041
        for c in cells {
            assert!((c as f64 / n as f64 - 0.25).abs() < 0.0041, "{cells:?}");
        }
        let m = marginals_of(&t).unwrap();
        for i in 0..2 {
            assert!((m.frequencies(i)[0] - 0.5).abs() < 0.0047);
        }
        // plug-in mutual information of the two columns
        let mut mi = 0.0;
        for a in 0..2 {
            for b in 0..2 {
                let pab = cells[a * 2 + b] as f64 / n as f64;
                mi += pab * (pab / (m.frequencies(0)[a] * m.frequencies(1)[b])).ln();
            }
        }
        assert!(mi <= 0.01);
    }
}
