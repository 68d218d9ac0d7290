//! Discrete Bayesian networks: MDL-scored structure search over variable
//! orderings, multinomial CPT estimation and ancestral sampling.

use std::collections::{BTreeSet, HashMap};

use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{MicroTable, Schema, VariableKind, VariableSpec};
use crate::error::{Error, Result};
use crate::rng;

pub const DEFAULT_MAX_PARENTS: usize = 3;
pub const DEFAULT_RESTARTS: usize = 10;
/// Additive smoothing used when fitting a network for sampling.
pub const DEFAULT_SAMPLING_ALPHA: f64 = 0.1;

/// Parent sets of a directed acyclic graph, one node per schema variable.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Dag {
    parents: Vec<Vec<usize>>,
}

impl Dag {
    pub fn new(parents: Vec<Vec<usize>>) -> Result<Self> {
        let d = parents.len();
        let mut sorted = Vec::with_capacity(d);
        for (i, ps) in parents.into_iter().enumerate() {
            let set: BTreeSet<usize> = ps.iter().copied().collect();
            if set.len() != ps.len() {
                return Err(Error::invalid(format!("node {i} lists a parent twice")));
            }
            if set.iter().any(|&p| p >= d || p == i) {
                return Err(Error::invalid(format!("node {i} has an invalid parent")));
            }
            sorted.push(set.into_iter().collect());
        }
        let dag = Dag { parents: sorted };
        if dag.try_topological_order().is_none() {
            return Err(Error::invalid("graph has a cycle"));
        }
        Ok(dag)
    }

    pub fn empty(d: usize) -> Self {
        Dag {
            parents: vec![Vec::new(); d],
        }
    }

    pub fn n_nodes(&self) -> usize {
        self.parents.len()
    }

    /// Parents of `node`, ascending.
    pub fn parents(&self, node: usize) -> &[usize] {
        &self.parents[node]
    }

    pub fn max_in_degree(&self) -> usize {
        self.parents.iter().map(Vec::len).max().unwrap_or(0)
    }

    /// Directed edges `(parent, child)`.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        self.parents
            .iter()
            .enumerate()
            .flat_map(|(c, ps)| ps.iter().map(move |&p| (p, c)))
            .collect()
    }

    /// Undirected edges as `(low, high)` pairs.
    pub fn skeleton(&self) -> BTreeSet<(usize, usize)> {
        self.edges()
            .into_iter()
            .map(|(a, b)| (a.min(b), a.max(b)))
            .collect()
    }

    /// Kahn's algorithm, lowest ready index first.
    pub fn topological_order(&self) -> Vec<usize> {
        self.try_topological_order().expect("validated acyclic")
    }

    fn try_topological_order(&self) -> Option<Vec<usize>> {
        let d = self.n_nodes();
        let mut indegree: Vec<usize> = self.parents.iter().map(Vec::len).collect();
        let mut children = vec![Vec::new(); d];
        for (p, c) in self.edges() {
            children[p].push(c);
        }
        let mut ready: BTreeSet<usize> = (0..d).filter(|&i| indegree[i] == 0).collect();
        let mut order = Vec::with_capacity(d);
        while let Some(i) = ready.pop_first() {
            order.push(i);
            for &c in &children[i] {
                indegree[c] -= 1;
                if indegree[c] == 0 {
                    ready.insert(c);
                }
            }
        }
        (order.len() == d).then_some(order)
    }
}

/// Mixed-radix index of the parents' codes in `row`, last parent fastest.
fn config_index(row: &[u32], parents: &[usize], cards: &[usize]) -> usize {
    parents
        .iter()
        .fold(0, |acc, &p| acc * cards[p] + row[p] as usize)
}

fn check_family(data: &MicroTable, node: usize, parents: &[usize]) -> Result<()> {
    let d = data.n_vars();
    if node >= d {
        return Err(Error::invalid(format!("node {node} out of range for {d} variables")));
    }
    if parents.iter().any(|&p| p >= d || p == node) {
        return Err(Error::invalid(format!("invalid parent set for node {node}")));
    }
    if data.is_empty() {
        return Err(Error::EmptyTable);
    }
    Ok(())
}

/// MDL score of one family: maximized log-likelihood of `node` given
/// `parents` minus `(ln N / 2) * q * (m - 1)`, with `q` the number of parent
/// configurations and `m` the node's category count. Higher is better.
pub fn family_score_mdl(data: &MicroTable, node: usize, parents: &[usize]) -> Result<f64> {
    check_family(data, node, parents)?;
    let cards = data.schema().cardinalities();
    let m = cards[node];
    let mut counts: HashMap<usize, Vec<u64>> = HashMap::new();
    for row in data.rows() {
        let cfg = config_index(row, parents, &cards);
        counts.entry(cfg).or_insert_with(|| vec![0; m])[row[node] as usize] += 1;
    }
    // Sum in configuration order so the score does not depend on hash order.
    let mut configs: Vec<_> = counts.into_iter().collect();
    configs.sort_unstable_by_key(|(cfg, _)| *cfg);
    let mut loglik = 0.0;
    for (_, row_counts) in &configs {
        let total: u64 = row_counts.iter().sum();
        let total = total as f64;
        for &c in row_counts.iter().filter(|&&c| c > 0) {
            let c = c as f64;
            loglik += c * (c / total).ln();
        }
    }
    let q: f64 = parents.iter().map(|&p| cards[p] as f64).product();
    let n = data.n_rows() as f64;
    Ok(loglik - 0.5 * n.ln() * q * (m as f64 - 1.0))
}

/// Sum of family scores over all nodes.
pub fn network_score(data: &MicroTable, dag: &Dag) -> Result<f64> {
    (0..dag.n_nodes())
        .map(|i| family_score_mdl(data, i, dag.parents(i)))
        .sum()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SearchOptions {
    pub max_parents: usize,
    pub restarts: usize,
    pub seed: u64,
}

impl Default for SearchOptions {
    fn default() -> Self {
        SearchOptions {
            max_parents: DEFAULT_MAX_PARENTS,
            restarts: DEFAULT_RESTARTS,
            seed: 0,
        }
    }
}

struct FamilyScorer<'a> {
    data: &'a MicroTable,
    max_parents: usize,
    cache: HashMap<(usize, Vec<usize>), f64>,
}

impl<'a> FamilyScorer<'a> {
    fn score(&mut self, node: usize, parents: &[usize]) -> f64 {
        let mut key = parents.to_vec();
        key.sort_unstable();
        if let Some(&s) = self.cache.get(&(node, key.clone())) {
            return s;
        }
        let s = family_score_mdl(self.data, node, &key).expect("family validated by caller");
        self.cache.insert((node, key), s);
        s
    }

    /// Greedy forward selection of parents among `candidates`; ties go to the
    /// lowest variable index.
    fn best_parents(&mut self, node: usize, candidates: &[usize]) -> (Vec<usize>, f64) {
        let mut chosen: Vec<usize> = Vec::new();
        let mut best = self.score(node, &chosen);
        let mut pool: Vec<usize> = candidates.to_vec();
        pool.sort_unstable();
        while chosen.len() < self.max_parents {
            let mut pick: Option<(usize, f64)> = None;
            for &c in pool.iter().filter(|c| !chosen.contains(c)) {
                let mut trial = chosen.clone();
                trial.push(c);
                let s = self.score(node, &trial);
                if s > best && pick.is_none_or(|(_, ps)| s > ps) {
                    pick = Some((c, s));
                }
            }
            match pick {
                Some((c, s)) => {
                    chosen.push(c);
                    best = s;
                }
                None => break,
            }
        }
        chosen.sort_unstable();
        (chosen, best)
    }

    /// Best families for every position of `order`.
    fn evaluate(&mut self, order: &[usize]) -> (Vec<Vec<usize>>, Vec<f64>) {
        let d = order.len();
        let mut parents = vec![Vec::new(); d];
        let mut scores = vec![0.0; d];
        for (pos, &node) in order.iter().enumerate() {
            let (ps, s) = self.best_parents(node, &order[..pos]);
            parents[node] = ps;
            scores[node] = s;
        }
        (parents, scores)
    }
}

/// Learns a DAG by ordering search with `DEFAULT_RESTARTS` seeded restarts.
pub fn learn_structure(data: &MicroTable, max_parents: usize, seed: u64) -> Result<Dag> {
    learn_structure_with(
        data,
        &SearchOptions {
            max_parents,
            seed,
            ..SearchOptions::default()
        },
    )
}

/// Ordering-based search. Each restart starts from a seeded random ordering
/// and hill-climbs over adjacent transpositions; for a given ordering every
/// node takes the best parent set among its predecessors. The best-scoring
/// network over all restarts wins, earlier restarts winning ties.
pub fn learn_structure_with(data: &MicroTable, opts: &SearchOptions) -> Result<Dag> {
    if data.is_empty() {
        return Err(Error::EmptyTable);
    }
    let d = data.n_vars();
    if opts.max_parents == 0 || d == 1 {
        return Ok(Dag::empty(d));
    }
    let restarts = opts.restarts.max(1);
    let base = rng::derive_seed(opts.seed, rng::substream::STRUCTURE);
    let results: Vec<(Vec<Vec<usize>>, f64)> = (0..restarts)
        .into_par_iter()
        .map(|r| {
            let mut order: Vec<usize> = (0..d).collect();
            order.shuffle(&mut rng::stream(base, r as u64));
            let mut scorer = FamilyScorer {
                data,
                max_parents: opts.max_parents,
                cache: HashMap::new(),
            };
            hill_climb(&mut scorer, order)
        })
        .collect();
    let mut best = 0;
    for (i, (_, s)) in results.iter().enumerate() {
        if *s > results[best].1 {
            best = i;
        }
    }
    Dag::new(results[best].0.clone())
}

fn hill_climb(scorer: &mut FamilyScorer<'_>, mut order: Vec<usize>) -> (Vec<Vec<usize>>, f64) {
    let (mut parents, mut scores) = scorer.evaluate(&order);
    let mut total: f64 = scores.iter().sum();
    loop {
        let mut best_move: Option<(usize, f64, [(Vec<usize>, f64); 2])> = None;
        for pos in 0..order.len() - 1 {
            // swapping positions pos, pos+1 only changes those two families
            let (a, b) = (order[pos], order[pos + 1]);
            let mut preds: Vec<usize> = order[..pos].to_vec();
            let fam_b = scorer.best_parents(b, &preds);
            preds.push(b);
            let fam_a = scorer.best_parents(a, &preds);
            let new_total = total - scores[a] - scores[b] + fam_a.1 + fam_b.1;
            let threshold = best_move.as_ref().map_or(total, |m| m.1);
            if new_total > threshold + 1e-9 * threshold.abs().max(1.0) {
                best_move = Some((pos, new_total, [fam_a, fam_b]));
            }
        }
        match best_move {
            Some((pos, new_total, [fam_a, fam_b])) => {
                let (a, b) = (order[pos], order[pos + 1]);
                order.swap(pos, pos + 1);
                parents[a] = fam_a.0;
                scores[a] = fam_a.1;
                parents[b] = fam_b.0;
                scores[b] = fam_b.1;
                total = new_total;
            }
            None => return (parents, total),
        }
    }
}

/// Conditional probability table of one node, rows indexed by parent
/// configuration in mixed-radix order (last parent varies fastest).
#[derive(Debug, Clone, PartialEq)]
pub struct Cpt {
    parents: Vec<usize>,
    parent_cards: Vec<usize>,
    card: usize,
    probs: Vec<f64>,
    unseen_configs: usize,
}

impl Cpt {
    pub fn parents(&self) -> &[usize] {
        &self.parents
    }

    pub fn cardinality(&self) -> usize {
        self.card
    }

    pub fn n_configs(&self) -> usize {
        self.probs.len() / self.card
    }

    pub fn row(&self, config: usize) -> &[f64] {
        &self.probs[config * self.card..(config + 1) * self.card]
    }

    /// Parent configurations with no training rows. When fitted with
    /// `alpha = 0` these rows were filled uniformly.
    pub fn unseen_configs(&self) -> usize {
        self.unseen_configs
    }

    pub fn prob(&self, row: &[u32], node: usize) -> f64 {
        let cfg = self
            .parents
            .iter()
            .zip(&self.parent_cards)
            .fold(0, |acc, (&p, &m)| acc * m + row[p] as usize);
        self.row(cfg)[row[node] as usize]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BayesNet {
    schema: Schema,
    dag: Dag,
    cpts: Vec<Cpt>,
}

/// Estimates CPTs as `(count + alpha) / (row_total + alpha * m)`.
/// Parent configurations unseen in the data get a uniform row.
pub fn fit_parameters(data: &MicroTable, dag: &Dag, alpha: f64) -> Result<BayesNet> {
    if dag.n_nodes() != data.n_vars() {
        return Err(Error::DimensionMismatch {
            expected: data.n_vars(),
            got: dag.n_nodes(),
        });
    }
    if !(alpha >= 0.0 && alpha.is_finite()) {
        return Err(Error::invalid(format!("smoothing alpha {alpha} must be finite and >= 0")));
    }
    let cards = data.schema().cardinalities();
    let cpts = (0..dag.n_nodes())
        .map(|node| {
            let parents = dag.parents(node).to_vec();
            let parent_cards: Vec<usize> = parents.iter().map(|&p| cards[p]).collect();
            let q: usize = parent_cards.iter().product();
            let m = cards[node];
            let mut counts = vec![0u64; q * m];
            for row in data.rows() {
                counts[config_index(row, &parents, &cards) * m + row[node] as usize] += 1;
            }
            let mut probs = vec![0.0; q * m];
            let mut unseen = 0;
            for cfg in 0..q {
                let c = &counts[cfg * m..(cfg + 1) * m];
                let total: u64 = c.iter().sum();
                let out = &mut probs[cfg * m..(cfg + 1) * m];
                if total == 0 {
                    unseen += 1;
                    out.fill(1.0 / m as f64);
                    continue;
                }
                let denom = total as f64 + alpha * m as f64;
                for (o, &k) in out.iter_mut().zip(c) {
                    *o = (k as f64 + alpha) / denom;
                }
            }
            Cpt {
                parents,
                parent_cards,
                card: m,
                probs,
                unseen_configs: unseen,
            }
        })
        .collect();
    Ok(BayesNet {
        schema: data.schema().clone(),
        dag: dag.clone(),
        cpts,
    })
}

impl BayesNet {
    pub fn schema(&self) -> &Schema {
        &self.schema
    }

    pub fn dag(&self) -> &Dag {
        &self.dag
    }

    pub fn cpt(&self, node: usize) -> &Cpt {
        &self.cpts[node]
    }

    /// Joint probability of a full row: the product of node conditionals.
    pub fn joint_prob(&self, row: &[u32]) -> f64 {
        self.cpts
            .iter()
            .enumerate()
            .map(|(i, cpt)| cpt.prob(row, i))
            .product()
    }

    /// Ancestral sampling in topological order.
    pub fn sample<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> MicroTable {
        let d = self.dag.n_nodes();
        let order = self.dag.topological_order();
        let cumulative: Vec<Vec<f64>> = self
            .cpts
            .iter()
            .map(|cpt| {
                let mut cum = Vec::with_capacity(cpt.probs.len());
                for row in cpt.probs.chunks_exact(cpt.card) {
                    let mut acc = 0.0;
                    cum.extend(row.iter().map(|p| {
                        acc += p;
                        acc
                    }));
                }
                cum
            })
            .collect();
        let mut codes = vec![0u32; n * d];
        for row in codes.chunks_exact_mut(d) {
            for &node in &order {
                let cpt = &self.cpts[node];
                let cfg = cpt
                    .parents
                    .iter()
                    .zip(&cpt.parent_cards)
                    .fold(0, |acc, (&p, &m)| acc * m + row[p] as usize);
                let cum = &cumulative[node][cfg * cpt.card..(cfg + 1) * cpt.card];
                let u: f64 = rng.random();
                // last category also absorbs rounding shortfall of the cumulative sum
                let k = cum.partition_point(|&c| c <= u).min(cpt.card - 1);
                row[node] = k as u32;
            }
        }
        MicroTable::from_flat(self.schema.clone(), codes).expect("sampled codes are in range")
    }

    pub fn to_json_string(&self) -> String {
        let doc = NetworkDoc {
            nodes: self
                .cpts
                .iter()
                .enumerate()
                .map(|(i, cpt)| {
                    let v = self.schema.variable(i);
                    NodeDoc {
                        name: v.name().to_owned(),
                        kind: v.kind(),
                        labels: v.labels().to_vec(),
                        parents: cpt.parents.clone(),
                        cpt: cpt.probs.chunks_exact(cpt.card).map(<[f64]>::to_vec).collect(),
                    }
                })
                .collect(),
        };
        serde_json::to_string_pretty(&doc).expect("plain data")
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        let doc: NetworkDoc = serde_json::from_str(text)?;
        let variables = doc
            .nodes
            .iter()
            .map(|n| VariableSpec::new(n.name.clone(), n.labels.clone(), n.kind))
            .collect::<Result<Vec<_>>>()?;
        let schema = Schema::new(variables)?;
        let dag = Dag::new(doc.nodes.iter().map(|n| n.parents.clone()).collect())?;
        let cards = schema.cardinalities();
        let cpts = doc
            .nodes
            .into_iter()
            .enumerate()
            .map(|(i, n)| {
                let parents = dag.parents(i).to_vec();
                if parents != n.parents {
                    return Err(Error::invalid(format!("parents of {} must be ascending", n.name)));
                }
                let parent_cards: Vec<usize> = parents.iter().map(|&p| cards[p]).collect();
                let q: usize = parent_cards.iter().product();
                if n.cpt.len() != q || n.cpt.iter().any(|r| r.len() != cards[i]) {
                    return Err(Error::invalid(format!("CPT of {} has the wrong shape", n.name)));
                }
                for r in &n.cpt {
                    let s: f64 = r.iter().sum();
                    if r.iter().any(|&p| !(p >= 0.0)) || (s - 1.0).abs() > 1e-9 {
                        return Err(Error::invalid(format!("CPT row of {} is not a distribution", n.name)));
                    }
                }
                Ok(Cpt {
                    parents,
                    parent_cards,
                    card: cards[i],
                    probs: n.cpt.concat(),
                    unseen_configs: 0,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(BayesNet { schema, dag, cpts })
    }
}

#[derive(Serialize, Deserialize)]
struct NetworkDoc {
    nodes: Vec<NodeDoc>,
}

#[derive(Serialize, Deserialize)]
struct NodeDoc {
    name: String,
    kind: VariableKind,
    labels: Vec<String>,
    parents: Vec<usize>,
    cpt: Vec<Vec<f64>>,
}

#[cfg(test)]
mod tests {
    use super::*;

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

    fn draw<R: Rng>(probs: &[f64], rng: &mut R) -> u32 {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        for (k, p) in probs.iter().enumerate() {
            acc += p;
            if u < acc {
                return k as u32;
            }
        }
        probs.len() as u32 - 1
    }

    fn independent_binary(n: usize, seed: u64) -> MicroTable {
        let mut r = rng::stream(seed, 99);
        let rows = (0..n).map(|_| vec![draw(&[0.5, 0.5], &mut r), draw(&[0.5, 0.5], &mut r)]).collect();
        MicroTable::new(schema(&[2, 2]), rows).unwrap()
    }

    /// A -> B -> C over three categories each.
    pub(crate) fn chain_data(n: usize, seed: u64) -> MicroTable {
        let mut r = rng::stream(seed, 77);
        let follow = |prev: u32| -> [f64; 3] {
            let mut p = [0.05; 3];
            p[prev as usize] = 0.9;
            p
        };
        let rows = (0..n)
            .map(|_| {
                let a = draw(&[0.3, 0.4, 0.3], &mut r);
                let b = draw(&follow(a), &mut r);
                let c = draw(&follow(b), &mut r);
                vec![a, b, c]
            })
            .collect();
        MicroTable::new(schema(&[3, 3, 3]), rows).unwrap()
    }

    #[test]
    fn dag_validation_and_order() {
        assert!(Dag::new(vec![vec![1], vec![0]]).is_err());
        assert!(Dag::new(vec![vec![0]]).is_err());
        assert!(Dag::new(vec![vec![5]]).is_err());
        let dag = Dag::new(vec![vec![2], vec![0, 2], vec![]]).unwrap();
        assert_eq!(dag.topological_order(), vec![2, 0, 1]);
        assert_eq!(dag.skeleton(), [(0, 1), (0, 2), (1, 2)].into_iter().collect());
    }

    #[test]
    fn empty_parent_score_formula() {
        let t = MicroTable::new(
            schema(&[4]),
            [0, 0, 1, 1, 2, 2, 2, 2, 3, 3].iter().map(|&c| vec![c]).collect(),
        )
        .unwrap();
        let n = 10.0f64;
        let expected = 2.0 * (2.0f64 / n).ln() * 3.0 + 4.0 * (4.0f64 / n).ln() - 0.5 * n.ln() * 3.0;
        assert!((family_score_mdl(&t, 0, &[]).unwrap() - expected).abs() < 1e-12);
        assert!(family_score_mdl(&t, 3, &[]).is_err());
        assert!(family_score_mdl(&t, 0, &[0]).is_err());
    }

    #[test]
    fn independence_prefers_no_parent() {
        let wins = (0..100)
            .filter(|&s| {
                let t = independent_binary(4000, s);
                family_score_mdl(&t, 1, &[]).unwrap() > family_score_mdl(&t, 1, &[0]).unwrap()
            })
            .count();
        assert!(wins >= 99, "{wins}");
    }

    #[test]
    fn copy_prefers_parent() {
        let mut r = rng::stream(5, 0);
        let rows = (0..1000)
            .map(|_| {
                let x = draw(&[0.5, 0.5], &mut r);
                vec![x, x]
            })
            .collect();
        let t = MicroTable::new(schema(&[2, 2]), rows).unwrap();
        assert!(family_score_mdl(&t, 1, &[0]).unwrap() > family_score_mdl(&t, 1, &[]).unwrap());
    }

    #[test]
    fn structure_examples() {
        let t = independent_binary(4000, 1);
        assert_eq!(learn_structure(&t, 3, 1).unwrap(), Dag::empty(2));
        let chain = chain_data(5000, 2);
        let dag = learn_structure(&chain, 3, 2).unwrap();
        assert_eq!(dag.skeleton(), [(0, 1), (1, 2)].into_iter().collect());
        assert_eq!(learn_structure(&chain, 0, 2).unwrap(), Dag::empty(3));
        assert_eq!(learn_structure(&chain, 3, 9).unwrap(), learn_structure(&chain, 3, 9).unwrap());
        assert!(learn_structure(&MicroTable::empty(schema(&[2])), 3, 0).is_err());
    }

    fn all_dags(d: usize, max_parents: usize) -> Vec<Dag> {
        let pairs: Vec<(usize, usize)> = (0..d)
            .flat_map(|a| (0..d).filter(move |&b| b != a).map(move |b| (a, b)))
            .collect();
        (0u32..1 << pairs.len())
            .filter_map(|mask| {
                let mut parents = vec![Vec::new(); d];
                for (bit, &(p, c)) in pairs.iter().enumerate() {
                    if mask >> bit & 1 == 1 {
                        parents[c].push(p);
                    }
                }
                if parents.iter().any(|p| p.len() > max_parents) {
                    return None;
                }
                Dag::new(parents).ok()
            })
            .collect()
    }

    #[test]
    fn greedy_between_empty_and_exhaustive_optimum() {
        for seed in 0..8 {
            let cards = [2 + seed as usize % 2, 3, 2];
            let mut r = rng::stream(seed, 1);
            let rows = (0..300)
                .map(|_| {
                    let a = draw(&vec![1.0 / cards[0] as f64; cards[0]], &mut r);
                    let b = if a == 0 { draw(&[0.7, 0.2, 0.1], &mut r) } else { draw(&[0.1, 0.3, 0.6], &mut r) };
                    let c = draw(if b == 2 { &[0.8, 0.2] } else { &[0.3, 0.7] }, &mut r);
                    vec![a, b, c]
                })
                .collect();
            let t = MicroTable::new(schema(&cards), rows).unwrap();
            let dags = all_dags(3, 2);
            assert_eq!(dags.len(), 25);
            let optimum = dags
                .iter()
                .map(|g| network_score(&t, g).unwrap())
                .fold(f64::NEG_INFINITY, f64::max);
            let learned = network_score(&t, &learn_structure(&t, 2, seed).unwrap()).unwrap();
            let empty = network_score(&t, &Dag::empty(3)).unwrap();
            assert!(learned >= empty - 1e-9);
            assert!(learned <= optimum + 1e-9);
        }
    }

    #[test]
    fn mle_and_smoothing() {
        let t = MicroTable::new(
            schema(&[4]),
            [0, 0, 1, 1, 2, 2, 2, 2, 3, 3].iter().map(|&c| vec![c]).collect(),
        )
        .unwrap();
        let bn = fit_parameters(&t, &Dag::empty(1), 0.0).unwrap();
        assert_eq!(bn.cpt(0).row(0), &[0.2, 0.2, 0.4, 0.2]);
        let bn = fit_parameters(&t, &Dag::empty(1), 1e9).unwrap();
        assert!(bn.cpt(0).row(0).iter().all(|p| (p - 0.25).abs() < 1e-6));

        let t = MicroTable::new(schema(&[2, 4]), vec![vec![0, 1], vec![0, 2]]).unwrap();
        let dag = Dag::new(vec![vec![], vec![0]]).unwrap();
        let bn = fit_parameters(&t, &dag, 1.0).unwrap();
        assert_eq!(bn.cpt(1).row(1), &[0.25; 4]);
        let bn0 = fit_parameters(&t, &dag, 0.0).unwrap();
        assert_eq!(bn0.cpt(1).unseen_configs(), 1);
        assert_eq!(bn0.cpt(1).row(1), &[0.25; 4]);
        for cpt in &bn.cpts {
            for cfg in 0..cpt.n_configs() {
                assert!((cpt.row(cfg).iter().sum::<f64>() - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn sampling_edgeless_uniform() {
        let t = independent_binary(1000, 3);
        let bn = fit_parameters(&t, &Dag::empty(2), 1e12).unwrap();
        let s = bn.sample(100_000, &mut rng::stream(4, 0));
        for i in 0..2 {
            let ones = s.column(i).iter().filter(|&&c| c == 1).count() as f64 / 1e5;
            assert!((ones - 0.5).abs() < 0.005);
        }
    }

    #[test]
    fn sampling_deterministic_cpt() {
        let t = MicroTable::new(schema(&[3, 2]), vec![vec![2, 1]; 5]).unwrap();
        let bn = fit_parameters(&t, &Dag::new(vec![vec![], vec![0]]).unwrap(), 0.0).unwrap();
        let s = bn.sample(500, &mut rng::stream(1, 1));
        assert!(s.rows().all(|r| r == [2, 1]));
        let same = bn.sample(500, &mut rng::stream(1, 1));
        assert_eq!(s, same);
        assert_eq!(bn.sample(0, &mut rng::stream(1, 1)).n_rows(), 0);
    }

    #[test]
    fn sampling_matches_chain_product() {
        let data = chain_data(3000, 8);
        let dag = Dag::new(vec![vec![], vec![0], vec![1]]).unwrap();
        let bn = fit_parameters(&data, &dag, DEFAULT_SAMPLING_ALPHA).unwrap();
        let n = 100_000;
        let s = bn.sample(n, &mut rng::stream(8, 8));
        let mut counts = vec![0usize; 27];
        for r in s.rows() {
            counts[(r[0] * 9 + r[1] * 3 + r[2]) as usize] += 1;
        }
        // Pearson chi-square, 26 dof; 0.01 critical value is 45.64
        let mut chi2 = 0.0;
        for a in 0..3u32 {
            for b in 0..3u32 {
                for c in 0..3u32 {
                    let row = [a, b, c];
                    let p = bn.cpt(0).prob(&row, 0) * bn.cpt(1).prob(&row, 1) * bn.cpt(2).prob(&row, 2);
                    assert!((p - bn.joint_prob(&row)).abs() < 1e-15);
                    let e = p * n as f64;
                    let o = counts[(a * 9 + b * 3 + c) as usize] as f64;
                    chi2 += (o - e).powi(2) / e;
                    let sigma = (p * (1.0 - p) / n as f64).sqrt();
                    assert!((o / n as f64 - p).abs() <= 3.0 * sigma + 1e-4);
                }
            }
        }
        assert!(chi2 < 45.64, "{chi2}");
    }

    #[test]
    fn decomposable_score() {
        let data = chain_data(500, 3);
        let dag = Dag::new(vec![vec![], vec![0], vec![0, 1]]).unwrap();
        let total = network_score(&data, &dag).unwrap();
        let parts: f64 = (0..3).map(|i| family_score_mdl(&data, i, dag.parents(i)).unwrap()).sum();
        assert_eq!(total, parts);
    }

    #[test]
    fn json_round_trip() {
        let data = chain_data(500, 4);
        let dag = Dag::new(vec![vec![], vec![0], vec![1]]).unwrap();
        let bn = fit_parameters(&data, &dag, 0.1).unwrap();
        let back = BayesNet::from_json_str(&bn.to_json_string()).unwrap();
        assert_eq!(back.dag(), bn.dag());
        assert_eq!(back.schema(), bn.schema());
        for i in 0..3 {
            assert_eq!(back.cpt(i).probs, bn.cpt(i).probs);
        }
    }
}
