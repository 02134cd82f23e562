//! Monomial basis vectors `m(x, w)` for the Lasserre and cluster hierarchies,
//! and the pair-product table linking moment-matrix entries to moments.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use crate::error::{Result, SsosError};
use crate::poly::MultiIndex;

/// How noise-only and noise-carrying monomials interact with the cluster
/// support rule.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum NoiseCoupling {
    /// Pure-noise monomials are always kept; mixed monomials may carry the
    /// noise variables owned by the clusters their x-support touches.
    #[default]
    Dense,
    /// Noise variables behave as members of their owning cluster, so pure
    /// noise monomials are subject to the same cluster/edge rule.
    ClusterLocal,
}

/// Disjoint clusters of x-variables, the cluster interaction graph, and the
/// noise variables owned by each cluster. Noise variables owned by no
/// cluster are global.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClusterStructure {
    pub partition: Vec<Vec<usize>>,
    pub edges: Vec<(usize, usize)>,
    pub noise_assignment: Vec<Vec<usize>>,
}

impl ClusterStructure {
    /// One cluster holding every x-variable; all noise variables global.
    pub fn single(n_x: usize) -> Self {
        ClusterStructure {
            partition: vec![(0..n_x).collect()],
            edges: Vec::new(),
            noise_assignment: vec![Vec::new()],
        }
    }

    pub fn n_clusters(&self) -> usize {
        self.partition.len()
    }

    /// Checks coverage of the x-block and the validity of edges and noise
    /// ownership. Edges are normalized to `(lo, hi)` and deduplicated.
    pub fn validate(&self, n_x: usize, n_w: usize) -> Result<()> {
        let mut seen = vec![false; n_x];
        for (c, members) in self.partition.iter().enumerate() {
            if members.is_empty() {
                return Err(SsosError::Structure(format!("cluster {c} is empty")));
            }
            for &v in members {
                if v >= n_x {
                    return Err(SsosError::Structure(format!(
                        "cluster {c} references x-variable {v} but n_x = {n_x}"
                    )));
                }
                if seen[v] {
                    return Err(SsosError::Structure(format!(
                        "x-variable {v} appears in more than one cluster"
                    )));
                }
                seen[v] = true;
            }
        }
        if let Some(v) = seen.iter().position(|s| !s) {
            return Err(SsosError::Structure(format!(
                "x-variable {v} is not covered by any cluster"
            )));
        }
        let k = self.partition.len();
        for &(a, b) in &self.edges {
            if a >= k || b >= k || a == b {
                return Err(SsosError::Structure(format!(
                    "invalid cluster edge ({a}, {b})"
                )));
            }
        }
        if self.noise_assignment.len() > k {
            return Err(SsosError::Structure(
                "noise assignment lists more clusters than the partition".into(),
            ));
        }
        let mut owned = BTreeSet::new();
        for ws in &self.noise_assignment {
            for &w in ws {
                if w >= n_w {
                    return Err(SsosError::Structure(format!(
                        "noise variable {w} out of range (n_w = {n_w})"
                    )));
                }
                if !owned.insert(w) {
                    return Err(SsosError::Structure(format!(
                        "noise variable {w} owned by more than one cluster"
                    )));
                }
            }
        }
        Ok(())
    }

    fn edge_set(&self) -> BTreeSet<(usize, usize)> {
        self.edges
            .iter()
            .map(|&(a, b)| (a.min(b), a.max(b)))
            .collect()
    }
}

/// Level of the cluster hierarchy: body order `b`, per-variable degree `t`
/// and a total-degree cap (defaults to `b * t`).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClusterLevel {
    pub body_order: u32,
    pub max_var_degree: u32,
    pub max_total_degree: u32,
    pub coupling: NoiseCoupling,
}

impl ClusterLevel {
    pub fn new(body_order: u32, max_var_degree: u32) -> Self {
        ClusterLevel {
            body_order,
            max_var_degree,
            max_total_degree: body_order * max_var_degree,
            coupling: NoiseCoupling::Dense,
        }
    }

    pub fn with_total_degree(mut self, s: u32) -> Self {
        self.max_total_degree = s;
        self
    }

    pub fn with_coupling(mut self, coupling: NoiseCoupling) -> Self {
        self.coupling = coupling;
        self
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum BasisKind {
    Lasserre {
        degree: u32,
    },
    Cluster {
        level: ClusterLevel,
        structure: ClusterStructure,
    },
}

/// Ordered list of monomials; entry 0 is always the constant.
#[derive(Clone, Debug)]
pub struct MonomialBasis {
    n_x: usize,
    n_w: usize,
    entries: Vec<MultiIndex>,
    kind: BasisKind,
    index: HashMap<MultiIndex, usize>,
}

impl MonomialBasis {
    fn from_entries(n_x: usize, n_w: usize, mut entries: Vec<MultiIndex>, kind: BasisKind) -> Self {
        entries.sort();
        entries.dedup();
        let index = entries
            .iter()
            .enumerate()
            .map(|(i, a)| (a.clone(), i))
            .collect();
        MonomialBasis {
            n_x,
            n_w,
            entries,
            kind,
            index,
        }
    }

    pub fn n_x(&self) -> usize {
        self.n_x
    }

    pub fn n_w(&self) -> usize {
        self.n_w
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[MultiIndex] {
        &self.entries
    }

    pub fn kind(&self) -> &BasisKind {
        &self.kind
    }

    pub fn position(&self, alpha: &MultiIndex) -> Option<usize> {
        self.index.get(alpha).copied()
    }

    /// Highest total degree among the entries.
    pub fn max_degree(&self) -> u32 {
        self.entries
            .iter()
            .map(MultiIndex::degree)
            .max()
            .unwrap_or(0)
    }

    /// Evaluates every basis monomial at `point`.
    pub fn evaluate(&self, point: &[f64]) -> Vec<f64> {
        self.entries
            .iter()
            .map(|a| a.monomial_value(point))
            .collect()
    }

    /// One multi-index per line, exponents separated by spaces.
    pub fn dump(&self) -> String {
        let mut s = String::new();
        for a in &self.entries {
            let line: Vec<String> = a.exponents().iter().map(u32::to_string).collect();
            s.push_str(&line.join(" "));
            s.push('\n');
        }
        s
    }
}

/// All exponent vectors of length `n` with total degree exactly `deg`.
fn compositions(n: usize, deg: u32, out: &mut Vec<MultiIndex>) {
    fn rec(pos: usize, left: u32, cur: &mut Vec<u32>, out: &mut Vec<MultiIndex>) {
        if pos + 1 == cur.len() {
            cur[pos] = left;
            out.push(MultiIndex::new(cur.clone()));
            return;
        }
        for e in (0..=left).rev() {
            cur[pos] = e;
            rec(pos + 1, left - e, cur, out);
        }
        cur[pos] = 0;
    }
    if n == 0 {
        if deg == 0 {
            out.push(MultiIndex::new(Vec::new()));
        }
        return;
    }
    let mut cur = vec![0; n];
    rec(0, deg, &mut cur, out);
}

/// Every monomial of total degree at most `s` in `n_x + n_w` variables.
pub fn lasserre_basis(n_x: usize, n_w: usize, s: u32) -> MonomialBasis {
    let mut entries = Vec::new();
    for deg in 0..=s {
        compositions(n_x + n_w, deg, &mut entries);
    }
    MonomialBasis::from_entries(n_x, n_w, entries, BasisKind::Lasserre { degree: s })
}

/// `C(n, k)` in floating point-free integer arithmetic.
pub fn binomial(n: u64, k: u64) -> u64 {
    let k = k.min(n.saturating_sub(k));
    (0..k).fold(1u64, |acc, i| acc * (n - i) / (i + 1))
}

/// Cluster-hierarchy basis: monomials with body order at most `b`, every
/// exponent at most `t`, total degree within the cap, and a support that fits
/// inside one cluster or one edge-connected pair of clusters.
pub fn cluster_basis(
    n_x: usize,
    n_w: usize,
    cs: &ClusterStructure,
    level: ClusterLevel,
) -> Result<MonomialBasis> {
    if level.body_order < 1 || level.max_var_degree < 1 {
        return Err(SsosError::Parameter(
            "cluster level needs body order >= 1 and per-variable degree >= 1".into(),
        ));
    }
    cs.validate(n_x, n_w)?;
    let filter = SupportFilter::new(n_x, n_w, cs, level.coupling);
    let full = lasserre_basis(n_x, n_w, level.max_total_degree);
    let entries: Vec<MultiIndex> = full
        .entries
        .into_iter()
        .filter(|a| {
            a.body_order() as u32 <= level.body_order
                && a.max_degree() <= level.max_var_degree
                && filter.admits(a)
        })
        .collect();
    Ok(MonomialBasis::from_entries(
        n_x,
        n_w,
        entries,
        BasisKind::Cluster {
            level,
            structure: cs.clone(),
        },
    ))
}

/// The cluster support rule, usable on its own to audit a basis.
pub struct SupportFilter {
    n_x: usize,
    x_cluster: Vec<usize>,
    w_cluster: Vec<Option<usize>>,
    edges: BTreeSet<(usize, usize)>,
    coupling: NoiseCoupling,
}

impl SupportFilter {
    pub fn new(n_x: usize, n_w: usize, cs: &ClusterStructure, coupling: NoiseCoupling) -> Self {
        let mut x_cluster = vec![0; n_x];
        for (c, members) in cs.partition.iter().enumerate() {
            for &v in members {
                x_cluster[v] = c;
            }
        }
        let mut w_cluster = vec![None; n_w];
        for (c, ws) in cs.noise_assignment.iter().enumerate() {
            for &w in ws {
                w_cluster[w] = Some(c);
            }
        }
        SupportFilter {
            n_x,
            x_cluster,
            w_cluster,
            edges: cs.edge_set(),
            coupling,
        }
    }

    pub fn admits(&self, alpha: &MultiIndex) -> bool {
        let mut touched = BTreeSet::new();
        let mut has_x = false;
        for v in alpha.support() {
            if v < self.n_x {
                has_x = true;
                touched.insert(self.x_cluster[v]);
            } else if let Some(c) = self.w_cluster[v - self.n_x] {
                touched.insert(c);
            }
        }
        if !has_x && self.coupling == NoiseCoupling::Dense {
            return true;
        }
        match touched.len() {
            0 | 1 => true,
            2 => {
                let mut it = touched.iter();
                let (a, b) = (*it.next().unwrap(), *it.next().unwrap());
                self.edges.contains(&(a, b))
            }
            _ => false,
        }
    }
}

/// Pairwise sums of basis entries. `groups` maps each distinct product to
/// the upper-triangular positions `(i, j)`, `i <= j`, that produce it, in
/// lexicographic order; the first position is the representative.
#[derive(Clone, Debug)]
pub struct ProductTable {
    size: usize,
    table: Vec<MultiIndex>,
    groups: BTreeMap<MultiIndex, Vec<(usize, usize)>>,
}

impl ProductTable {
    pub fn get(&self, i: usize, j: usize) -> &MultiIndex {
        &self.table[i * self.size + j]
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn n_distinct(&self) -> usize {
        self.groups.len()
    }

    pub fn groups(&self) -> &BTreeMap<MultiIndex, Vec<(usize, usize)>> {
        &self.groups
    }

    pub fn positions(&self, alpha: &MultiIndex) -> Option<&[(usize, usize)]> {
        self.groups.get(alpha).map(Vec::as_slice)
    }

    pub fn representative(&self, alpha: &MultiIndex) -> Option<(usize, usize)> {
        self.groups.get(alpha).map(|v| v[0])
    }

    pub fn contains(&self, alpha: &MultiIndex) -> bool {
        self.groups.contains_key(alpha)
    }
}

pub fn product_index_table(basis: &MonomialBasis) -> ProductTable {
    let a = basis.len();
    let mut table = Vec::with_capacity(a * a);
    for i in 0..a {
        for j in 0..a {
            table.push(&basis.entries[i] + &basis.entries[j]);
        }
    }
    let mut groups: BTreeMap<MultiIndex, Vec<(usize, usize)>> = BTreeMap::new();
    for i in 0..a {
        for j in i..a {
            groups
                .entry(table[i * a + j].clone())
                .or_default()
                .push((i, j));
        }
    }
    ProductTable {
        size: a,
        table,
        groups,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lasserre_sizes() {
        assert_eq!(lasserre_basis(1, 1, 2).len(), 6);
        assert_eq!(lasserre_basis(1, 1, 4).len(), 15);
        assert_eq!(lasserre_basis(10, 1, 2).len(), 78);
        assert_eq!(lasserre_basis(3, 0, 0).len(), 1);
    }

    #[test]
    fn lasserre_size_formula_exhaustive() {
        for n_x in 0..=6 {
            for n_w in 0..=6 - n_x {
                for s in 0..=6u32 {
                    let b = lasserre_basis(n_x, n_w, s);
                    assert_eq!(
                        b.len() as u64,
                        binomial((n_x + n_w) as u64 + s as u64, s as u64),
                        "n_x={n_x} n_w={n_w} s={s}"
                    );
                }
            }
        }
    }

    #[test]
    fn basis_invariants() {
        let b = lasserre_basis(2, 1, 3);
        assert!(b.entries()[0].is_zero());
        for w in b.entries().windows(2) {
            assert!(w[0] < w[1]);
        }
        assert!(b.entries().iter().all(|a| a.degree() <= 3));
    }

    #[test]
    fn product_counts() {
        let t = product_index_table(&lasserre_basis(1, 1, 2));
        assert_eq!(t.n_distinct(), 15);
        assert_eq!(t.n_distinct() as u64, binomial(6, 4));
        let t = product_index_table(&lasserre_basis(1, 0, 1));
        assert_eq!(t.n_distinct(), 3);
    }

    #[test]
    fn product_table_symmetry() {
        let b = lasserre_basis(2, 1, 2);
        let t = product_index_table(&b);
        assert!(t.get(0, 0).is_zero());
        for i in 0..b.len() {
            assert_eq!(t.get(0, i), &b.entries()[i]);
            for j in 0..b.len() {
                assert_eq!(t.get(i, j), t.get(j, i));
            }
        }
    }

    #[test]
    fn single_cluster_reproduces_lasserre() {
        for (n_x, n_w, s) in [(2, 1, 2), (3, 0, 3), (1, 2, 4)] {
            let cs = ClusterStructure::single(n_x);
            let level = ClusterLevel::new(s, s).with_total_degree(s);
            let cb = cluster_basis(n_x, n_w, &cs, level).unwrap();
            let lb = lasserre_basis(n_x, n_w, s);
            assert_eq!(cb.entries(), lb.entries());
        }
    }

    #[test]
    fn body_order_two_degree_two_excludes_fourth_powers() {
        let cs = ClusterStructure::single(3);
        let cb = cluster_basis(3, 0, &cs, ClusterLevel::new(2, 2)).unwrap();
        let x0x1sq = MultiIndex::new(vec![2, 2, 0]);
        assert!(cb.position(&x0x1sq).is_some());
        assert!(cb.position(&MultiIndex::new(vec![4, 0, 0])).is_none());
        assert!(cb.position(&MultiIndex::new(vec![1, 1, 1])).is_none());
        let lb = lasserre_basis(3, 0, 4);
        assert!(cb.len() < lb.len());
    }

    fn ring_singletons(n: usize, dim: usize) -> ClusterStructure {
        ClusterStructure {
            partition: (0..n).map(|i| (i * dim..(i + 1) * dim).collect()).collect(),
            edges: (0..n).map(|i| (i, (i + 1) % n)).collect(),
            noise_assignment: (0..n).map(|i| vec![i]).collect(),
        }
    }

    #[test]
    fn snl_two_dimensional_ring_reduction() {
        let cs = ring_singletons(9, 2);
        let level = ClusterLevel::new(2, 2).with_total_degree(2);
        let dense = cluster_basis(18, 9, &cs, level).unwrap();
        let full = lasserre_basis(18, 9, 2);
        assert_eq!(full.len(), 406);
        assert!(dense.len() < full.len());
        assert!(full.len() as f64 / dense.len() as f64 >= 2.0);

        let local =
            cluster_basis(18, 9, &cs, level.with_coupling(NoiseCoupling::ClusterLocal)).unwrap();
        assert_eq!(local.len(), 163);
    }

    #[test]
    fn every_cluster_entry_passes_filters() {
        let cs = ring_singletons(5, 1);
        let level = ClusterLevel::new(2, 2);
        let b = cluster_basis(5, 5, &cs, level).unwrap();
        let f = SupportFilter::new(5, 5, &cs, level.coupling);
        for a in lasserre_basis(5, 5, 4).entries() {
            let expect = a.body_order() <= 2 && a.max_degree() <= 2 && f.admits(a);
            assert_eq!(b.position(a).is_some(), expect, "{a}");
        }
    }

    #[test]
    fn invalid_partitions_rejected() {
        let overlapping = ClusterStructure {
            partition: vec![vec![0, 1], vec![1]],
            edges: vec![],
            noise_assignment: vec![],
        };
        assert!(cluster_basis(2, 0, &overlapping, ClusterLevel::new(2, 1)).is_err());
        let missing = ClusterStructure {
            partition: vec![vec![0]],
            edges: vec![],
            noise_assignment: vec![],
        };
        assert!(cluster_basis(2, 0, &missing, ClusterLevel::new(2, 1)).is_err());
        let bad_edge = ClusterStructure {
            partition: vec![vec![0], vec![1]],
            edges: vec![(0, 2)],
            noise_assignment: vec![],
        };
        assert!(cluster_basis(2, 0, &bad_edge, ClusterLevel::new(2, 1)).is_err());
    }

    #[test]
    fn dump_lines() {
        let b = lasserre_basis(10, 1, 2);
        assert_eq!(b.dump().lines().count(), 78);
        assert_eq!(b.dump().lines().next().unwrap(), "0 0 0 0 0 0 0 0 0 0 0");
    }
}
