//! Sensor network localization: random instances, their quartic potentials
//! under linear uniform distance noise, clustering, and the S-SOS pipeline.
//!
//! Variable layout: sensor `i`, coordinate `c` is x-variable `i * dim + c`;
//! noise variable `k` follows the whole x-block.

use std::collections::{BTreeSet, VecDeque};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::basis::{
    cluster_basis, lasserre_basis, product_index_table, ClusterLevel, ClusterStructure,
    MonomialBasis,
};
use crate::error::{Result, SsosError};
use crate::extract::{extract_moments, mahalanobis};
use crate::kmeans::kmeans;
use crate::noise::NoiseDistribution;
use crate::poly::{MultiIndex, Polynomial};
use crate::sdp::{assemble_dual, HardConstraintSet};
use crate::solver::{solve, SolveStatus, SolverOptions};

const MAX_ATTEMPTS: usize = 100;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AnchorMode {
    /// Anchors enter through sensor-anchor distance penalties.
    Soft,
    /// No anchors; `n_hard` sensors are pinned at their true positions.
    Hard { n_hard: usize },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SnlProblemType {
    /// Spatial dimension.
    pub dim: usize,
    pub n_sensors: usize,
    /// Ignored in hard mode.
    pub n_anchors: usize,
    pub radius: f64,
    pub epsilon: f64,
    pub anchor_mode: AnchorMode,
    pub n_clusters: usize,
    /// Number of noise variables; `None` means one per cluster.
    pub noise_dim: Option<usize>,
    pub seed: u64,
}

impl SnlProblemType {
    /// Soft anchors, `dim + 1` of them, one cluster, one noise variable.
    pub fn new(dim: usize, n_sensors: usize, radius: f64, epsilon: f64, seed: u64) -> Self {
        SnlProblemType {
            dim,
            n_sensors,
            n_anchors: dim + 1,
            radius,
            epsilon,
            anchor_mode: AnchorMode::Soft,
            n_clusters: 1,
            noise_dim: None,
            seed,
        }
    }

    pub fn noise_dim(&self) -> usize {
        self.noise_dim.unwrap_or(self.n_clusters)
    }

    pub fn n_x(&self) -> usize {
        self.dim * self.n_sensors
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(SsosError::Parameter(m));
        if self.dim == 0 || self.n_sensors == 0 {
            return bad("need at least one sensor in at least one dimension".into());
        }
        if !self.radius.is_finite() || self.radius <= 0.0 {
            return bad(format!(
                "sensing radius must be positive, got {}",
                self.radius
            ));
        }
        if !self.epsilon.is_finite() || self.epsilon < 0.0 {
            return bad(format!(
                "noise scale must be non-negative, got {}",
                self.epsilon
            ));
        }
        if self.n_clusters == 0 || self.n_clusters > self.n_sensors {
            return bad(format!(
                "cluster count {} outside 1..={}",
                self.n_clusters, self.n_sensors
            ));
        }
        if self.noise_dim() == 0 {
            return bad("need at least one noise variable".into());
        }
        match self.anchor_mode {
            AnchorMode::Soft if self.n_anchors == 0 => bad("soft mode needs anchors".into()),
            AnchorMode::Hard { n_hard } if n_hard == 0 || n_hard >= self.n_sensors => {
                bad(format!("hard mode needs 1 <= N_H < N, got N_H = {n_hard}"))
            }
            _ => Ok(()),
        }
    }
}

/// Observed sensor-sensor distance; `i < j`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SensorEdge {
    pub i: usize,
    pub j: usize,
    pub distance: f64,
    pub noise: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnchorEdge {
    pub sensor: usize,
    pub anchor: usize,
    pub distance: f64,
    pub noise: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SnlInstance {
    pub problem: SnlProblemType,
    pub sensors: Vec<Vec<f64>>,
    pub anchors: Vec<Vec<f64>>,
    pub sensor_edges: Vec<SensorEdge>,
    pub anchor_edges: Vec<AnchorEdge>,
    /// Clusters of sensor indices with ring edges. In one-per-cluster noise
    /// wiring cluster `c` owns noise variable `c`.
    pub clusters: ClusterStructure,
    pub hard_sensors: Vec<usize>,
}

fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(u, v)| (u - v) * (u - v))
        .sum::<f64>()
        .sqrt()
}

fn uniform_point(dim: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    (0..dim).map(|_| rng.random_range(-1.0..=1.0)).collect()
}

/// Samples an instance, resampling until every sensor is reachable from an
/// anchored or pinned sensor through observed edges.
pub fn generate_instance(t: &SnlProblemType) -> Result<SnlInstance> {
    t.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(t.seed);
    for _ in 0..MAX_ATTEMPTS {
        let sensors: Vec<Vec<f64>> = (0..t.n_sensors)
            .map(|_| uniform_point(t.dim, &mut rng))
            .collect();
        let anchors: Vec<Vec<f64>> = match t.anchor_mode {
            AnchorMode::Soft => (0..t.n_anchors)
                .map(|_| uniform_point(t.dim, &mut rng))
                .collect(),
            AnchorMode::Hard { .. } => Vec::new(),
        };
        let hard_sensors = match t.anchor_mode {
            AnchorMode::Soft => Vec::new(),
            AnchorMode::Hard { n_hard } => {
                let mut order: Vec<usize> = (0..t.n_sensors).collect();
                order.shuffle(&mut rng);
                let mut h = order[..n_hard].to_vec();
                h.sort_unstable();
                h
            }
        };
        let mut sensor_edges = Vec::new();
        for i in 0..t.n_sensors {
            for j in i + 1..t.n_sensors {
                let d = distance(&sensors[i], &sensors[j]);
                if d <= t.radius {
                    sensor_edges.push(SensorEdge {
                        i,
                        j,
                        distance: d,
                        noise: 0,
                    });
                }
            }
        }
        let mut anchor_edges = Vec::new();
        for (sensor, x) in sensors.iter().enumerate() {
            for (anchor, a) in anchors.iter().enumerate() {
                let d = distance(x, a);
                if d <= t.radius {
                    anchor_edges.push(AnchorEdge {
                        sensor,
                        anchor,
                        distance: d,
                        noise: 0,
                    });
                }
            }
        }
        let roots: Vec<usize> = match t.anchor_mode {
            AnchorMode::Soft => anchor_edges.iter().map(|e| e.sensor).collect(),
            AnchorMode::Hard { .. } => hard_sensors.clone(),
        };
        if !connected(t.n_sensors, &sensor_edges, &roots) {
            continue;
        }
        let clusters = kmeans_partition(&sensors, t.n_clusters, t.seed)?;
        let mut inst = SnlInstance {
            problem: t.clone(),
            sensors,
            anchors,
            sensor_edges,
            anchor_edges,
            clusters,
            hard_sensors,
        };
        inst.wire_noise();
        return Ok(inst);
    }
    Err(SsosError::Generation(format!(
        "no connected instance after {MAX_ATTEMPTS} attempts (radius {})",
        t.radius
    )))
}

fn connected(n: usize, edges: &[SensorEdge], roots: &[usize]) -> bool {
    let mut adj = vec![Vec::new(); n];
    for e in edges {
        adj[e.i].push(e.j);
        adj[e.j].push(e.i);
    }
    let mut seen = vec![false; n];
    let mut queue: VecDeque<usize> = VecDeque::new();
    for &r in roots {
        if !seen[r] {
            seen[r] = true;
            queue.push_back(r);
        }
    }
    while let Some(v) = queue.pop_front() {
        for &u in &adj[v] {
            if !seen[u] {
                seen[u] = true;
                queue.push_back(u);
            }
        }
    }
    seen.iter().all(|&s| s)
}

/// k-means clusters of sensor positions, relabelled so that consecutive
/// labels are ring neighbours: ordered by coordinate in one dimension and by
/// polar angle about the mean centroid otherwise. Cluster `c` owns noise
/// variable `c`.
pub fn kmeans_partition(
    positions: &[Vec<f64>],
    n_clusters: usize,
    seed: u64,
) -> Result<ClusterStructure> {
    if n_clusters == 1 {
        if positions.is_empty() {
            return Err(SsosError::Parameter("no positions to cluster".into()));
        }
        return Ok(ClusterStructure {
            partition: vec![(0..positions.len()).collect()],
            edges: Vec::new(),
            noise_assignment: vec![vec![0]],
        });
    }
    let km = kmeans(positions, n_clusters, seed)?;
    let dim = positions[0].len();
    let key = |c: &[f64]| -> f64 {
        if dim == 1 {
            c[0]
        } else {
            let k = km.centroids.len() as f64;
            let mx = km.centroids.iter().map(|v| v[0]).sum::<f64>() / k;
            let my = km.centroids.iter().map(|v| v[1]).sum::<f64>() / k;
            (c[1] - my).atan2(c[0] - mx)
        }
    };
    let mut order: Vec<usize> = (0..n_clusters).collect();
    order.sort_by(|&a, &b| key(&km.centroids[a]).total_cmp(&key(&km.centroids[b])));
    let mut relabel = vec![0; n_clusters];
    for (new, &old) in order.iter().enumerate() {
        relabel[old] = new;
    }
    let mut partition = vec![Vec::new(); n_clusters];
    for (i, &l) in km.labels.iter().enumerate() {
        partition[relabel[l]].push(i);
    }
    let edges: BTreeSet<(usize, usize)> = (0..n_clusters)
        .map(|c| {
            let d = (c + 1) % n_clusters;
            (c.min(d), c.max(d))
        })
        .collect();
    Ok(ClusterStructure {
        partition,
        edges: edges.into_iter().collect(),
        noise_assignment: (0..n_clusters).map(|c| vec![c]).collect(),
    })
}

impl SnlInstance {
    pub fn n_x(&self) -> usize {
        self.problem.n_x()
    }

    pub fn n_noise(&self) -> usize {
        self.problem.noise_dim()
    }

    /// Cluster index of each sensor.
    pub fn sensor_cluster(&self) -> Vec<usize> {
        let mut out = vec![0; self.problem.n_sensors];
        for (c, members) in self.clusters.partition.iter().enumerate() {
            for &s in members {
                out[s] = c;
            }
        }
        out
    }

    fn per_cluster_noise(&self) -> bool {
        self.n_noise() == self.clusters.n_clusters()
    }

    /// One noise variable per cluster: an edge takes the variable of its
    /// lower-indexed sensor's cluster. Otherwise noise variables are dealt
    /// round-robin over sensor edges, then anchor edges.
    fn wire_noise(&mut self) {
        let d = self.n_noise();
        if self.per_cluster_noise() {
            let cl = self.sensor_cluster();
            for e in &mut self.sensor_edges {
                e.noise = cl[e.i];
            }
            for e in &mut self.anchor_edges {
                e.noise = cl[e.sensor];
            }
        } else {
            let n_ss = self.sensor_edges.len();
            for (k, e) in self.sensor_edges.iter_mut().enumerate() {
                e.noise = k % d;
            }
            for (k, e) in self.anchor_edges.iter_mut().enumerate() {
                e.noise = (n_ss + k) % d;
            }
        }
    }

    /// Ground-truth positions flattened in variable order.
    pub fn truth(&self) -> Vec<f64> {
        self.sensors.iter().flatten().copied().collect()
    }

    /// Every coordinate of each pinned sensor fixed at its true value.
    pub fn hard_constraints(&self) -> Result<HardConstraintSet> {
        let dim = self.problem.dim;
        HardConstraintSet::from_pins(
            self.hard_sensors
                .iter()
                .flat_map(|&s| (0..dim).map(move |c| (s * dim + c, self.sensors[s][c]))),
        )
    }

    /// The sensor clusters lifted to x-variables. Noise ownership follows the
    /// wiring; round-robin noise stays global.
    pub fn variable_structure(&self) -> ClusterStructure {
        let dim = self.problem.dim;
        let partition = self
            .clusters
            .partition
            .iter()
            .map(|members| {
                let mut v: Vec<usize> = members
                    .iter()
                    .flat_map(|&s| (0..dim).map(move |c| s * dim + c))
                    .collect();
                v.sort_unstable();
                v
            })
            .collect();
        let noise_assignment = if self.per_cluster_noise() {
            self.clusters.noise_assignment.clone()
        } else {
            vec![Vec::new(); self.clusters.n_clusters()]
        };
        ClusterStructure {
            partition,
            edges: self.clusters.edges.clone(),
            noise_assignment,
        }
    }

    /// Whether a sensor edge joins the same or ring-adjacent clusters.
    fn edge_within_graph(&self, e: &SensorEdge, cl: &[usize]) -> bool {
        let (a, b) = (cl[e.i].min(cl[e.j]), cl[e.i].max(cl[e.j]));
        a == b || self.clusters.edges.contains(&(a, b))
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<SnlInstance> {
        let inst: SnlInstance = serde_json::from_str(text)?;
        inst.problem.validate()?;
        inst.clusters
            .validate(inst.problem.n_sensors, inst.n_noise())
            .or_else(|_| {
                inst.clusters
                    .validate(inst.problem.n_sensors, inst.clusters.n_clusters())
            })?;
        let n = inst.problem.n_sensors;
        if inst.sensors.len() != n || inst.sensors.iter().any(|s| s.len() != inst.problem.dim) {
            return Err(SsosError::Structure(
                "sensor positions do not match the problem type".into(),
            ));
        }
        let d = inst.n_noise();
        let ok_ss = inst
            .sensor_edges
            .iter()
            .all(|e| e.i < e.j && e.j < n && e.noise < d);
        let ok_sa = inst
            .anchor_edges
            .iter()
            .all(|e| e.sensor < n && e.anchor < inst.anchors.len() && e.noise < d);
        if !ok_ss || !ok_sa || inst.hard_sensors.iter().any(|&s| s >= n) {
            return Err(SsosError::Structure(
                "edge or pin references are out of range".into(),
            ));
        }
        Ok(inst)
    }
}

/// `(sum_c (u_c - v_c)^2 - (d + eps * w)^2)^2` where `v` is either a
/// second sensor or a fixed anchor.
fn penalty(
    inst: &SnlInstance,
    i: usize,
    other: std::result::Result<usize, &[f64]>,
    d: f64,
    eps: f64,
    noise: usize,
) -> Result<Polynomial> {
    let (dim, n_x, n_w) = (inst.problem.dim, inst.n_x(), inst.n_noise());
    let n = n_x + n_w;
    let unit = |v, p| MultiIndex::unit(n, v, p);
    let mut q = Polynomial::constant(n_x, n_w, -d * d);
    for c in 0..dim {
        let xi = i * dim + c;
        q.add_term(unit(xi, 2), 1.0);
        match other {
            Ok(j) => {
                let xj = j * dim + c;
                q.add_term(unit(xj, 2), 1.0);
                let mut e = vec![0; n];
                e[xi] = 1;
                e[xj] = 1;
                q.add_term(MultiIndex::new(e), -2.0);
            }
            Err(a) => {
                q.add_term(unit(xi, 1), -2.0 * a[c]);
                q.add_term(MultiIndex::zeros(n), a[c] * a[c]);
            }
        }
    }
    if eps != 0.0 {
        q.add_term(unit(n_x + noise, 1), -2.0 * d * eps);
        q.add_term(unit(n_x + noise, 2), -eps * eps);
    }
    q.multiply(&q)
}

fn potential_from_edges<'a>(
    inst: &SnlInstance,
    eps: f64,
    sensor_edges: impl Iterator<Item = &'a SensorEdge>,
) -> Result<Polynomial> {
    let mut f = Polynomial::zero(inst.n_x(), inst.n_noise());
    for e in sensor_edges {
        f = f.try_add(&penalty(inst, e.i, Ok(e.j), e.distance, eps, e.noise)?)?;
    }
    for e in &inst.anchor_edges {
        let a = inst.anchors[e.anchor].as_slice();
        f = f.try_add(&penalty(inst, e.sensor, Err(a), e.distance, eps, e.noise)?)?;
    }
    Ok(f)
}

/// The quartic penalty over every observed distance with noisy distances
/// `d + eps * w_k`. Zero at the true positions with `w = 0`.
pub fn build_potential(inst: &SnlInstance, eps: f64) -> Result<Polynomial> {
    potential_from_edges(inst, eps, inst.sensor_edges.iter())
}

/// Like [`build_potential`], but sensor edges between clusters that are not
/// ring neighbours are left out. Returns the potential and the number of
/// edges dropped.
pub fn build_cluster_potential(inst: &SnlInstance, eps: f64) -> Result<(Polynomial, usize)> {
    let cl = inst.sensor_cluster();
    let kept: Vec<&SensorEdge> = inst
        .sensor_edges
        .iter()
        .filter(|e| inst.edge_within_graph(e, &cl))
        .collect();
    let dropped = inst.sensor_edges.len() - kept.len();
    Ok((potential_from_edges(inst, eps, kept.into_iter())?, dropped))
}

/// Drops the terms of `f` that are not products of two basis entries and
/// reports the dropped mass `sum |coeff|`.
pub fn prune_potential(f: &Polynomial, basis: &MonomialBasis) -> (Polynomial, f64) {
    let table = product_index_table(basis);
    let mut dropped = 0.0;
    let kept = f.filter_terms(|a| {
        let ok = table.contains(a);
        if !ok {
            dropped += f.coeff(a).abs();
        }
        ok
    });
    (kept, dropped)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SnlBasis {
    /// Every monomial of degree at most 2.
    Full,
    /// Cluster basis with body order 2, per-variable degree 2 and total
    /// degree 2 over the instance's clusters.
    Cluster,
}

/// Position estimate from one S-SOS dual solve.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SsosEstimate {
    pub status: SolveStatus,
    pub objective: f64,
    pub basis_size: usize,
    pub means: Vec<f64>,
    pub variances: Vec<f64>,
    /// Sensor edges dropped by the cluster graph.
    pub dropped_edges: usize,
    pub dropped_mass: f64,
    /// Mahalanobis distance to the truth over the unpinned sensors.
    pub delta_m: f64,
}

pub fn snl_basis(inst: &SnlInstance, kind: SnlBasis) -> Result<MonomialBasis> {
    match kind {
        SnlBasis::Full => Ok(lasserre_basis(inst.n_x(), inst.n_noise(), 2)),
        SnlBasis::Cluster => cluster_basis(
            inst.n_x(),
            inst.n_noise(),
            &inst.variable_structure(),
            ClusterLevel::new(2, 2).with_total_degree(2),
        ),
    }
}

/// Indices of the x-variables that belong to unpinned sensors.
pub fn free_variables(inst: &SnlInstance) -> Vec<usize> {
    let dim = inst.problem.dim;
    (0..inst.problem.n_sensors)
        .filter(|s| !inst.hard_sensors.contains(s))
        .flat_map(|s| (0..dim).map(move |c| s * dim + c))
        .collect()
}

/// Mahalanobis distance of an estimate over the unpinned coordinates.
pub fn delta_m(inst: &SnlInstance, means: &[f64], variances: &[f64]) -> Result<f64> {
    let free = free_variables(inst);
    let truth = inst.truth();
    let pick = |v: &[f64]| free.iter().map(|&k| v[k]).collect::<Vec<f64>>();
    mahalanobis(&pick(&truth), &pick(means), &pick(variances))
}

/// Builds, solves and reads back the moment relaxation of `inst`.
pub fn solve_ssos(
    inst: &SnlInstance,
    kind: SnlBasis,
    opts: &SolverOptions,
) -> Result<SsosEstimate> {
    let eps = inst.problem.epsilon;
    let basis = snl_basis(inst, kind)?;
    let (f, dropped_edges) = match kind {
        SnlBasis::Full => (build_potential(inst, eps)?, 0),
        SnlBasis::Cluster => build_cluster_potential(inst, eps)?,
    };
    let (f, dropped_mass) = prune_potential(&f, &basis);
    let dist = NoiseDistribution::uniform(inst.n_noise());
    let hard = inst.hard_constraints()?;
    let dual = assemble_dual(&f, &basis, &dist, &hard)?;
    let sol = if hard.is_empty() {
        solve(&dual.problem, opts)?
    } else {
        let face = dual.pinned_face(&hard)?;
        face.lift(&dual.problem, &solve(&face.problem, opts)?)
    };
    let m = extract_moments(&sol, &basis)?;
    let delta_m = delta_m(inst, &m.means, &m.variances)?;
    Ok(SsosEstimate {
        status: sol.status,
        objective: sol.objective_primal,
        basis_size: basis.len(),
        means: m.means,
        variances: m.variances,
        dropped_edges,
        dropped_mass,
        delta_m,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn soft(n: usize, r: f64, eps: f64, seed: u64) -> SnlInstance {
        generate_instance(&SnlProblemType::new(1, n, r, eps, seed)).unwrap()
    }

    #[test]
    fn complete_graph_when_radius_covers_the_box() {
        let t = SnlProblemType::new(2, 6, 2.0 * 2f64.sqrt() + 1e-9, 0.1, 3);
        let inst = generate_instance(&t).unwrap();
        assert_eq!(inst.sensor_edges.len(), 15);
        assert_eq!(inst.anchor_edges.len(), 18);
    }

    #[test]
    fn generation_is_seeded() {
        assert_eq!(soft(5, 1.0, 0.1, 9), soft(5, 1.0, 0.1, 9));
        assert_ne!(soft(5, 1.0, 0.1, 9).sensors, soft(5, 1.0, 0.1, 10).sensors);
    }

    #[test]
    fn edges_respect_radius_and_connectivity() {
        let inst = soft(8, 0.6, 0.1, 4);
        assert!(inst.sensor_edges.iter().all(|e| e.distance <= 0.6));
        assert!(inst.anchor_edges.iter().all(|e| e.distance <= 0.6));
        let roots: Vec<usize> = inst.anchor_edges.iter().map(|e| e.sensor).collect();
        assert!(connected(8, &inst.sensor_edges, &roots));
    }

    #[test]
    fn tiny_radius_exhausts_retries() {
        let t = SnlProblemType::new(2, 10, 1e-3, 0.1, 0);
        assert!(matches!(
            generate_instance(&t),
            Err(SsosError::Generation(_))
        ));
    }

    #[test]
    fn invalid_problem_types() {
        let mut t = SnlProblemType::new(1, 3, 1.0, 0.1, 0);
        t.anchor_mode = AnchorMode::Hard { n_hard: 3 };
        assert!(generate_instance(&t).is_err());
        t.anchor_mode = AnchorMode::Soft;
        t.n_clusters = 4;
        assert!(generate_instance(&t).is_err());
        t.n_clusters = 1;
        t.radius = 0.0;
        assert!(generate_instance(&t).is_err());
    }

    #[test]
    fn potential_vanishes_at_truth_and_is_nonnegative() {
        let inst = soft(4, 3.0, 0.2, 1);
        let f = build_potential(&inst, 0.2).unwrap();
        assert_eq!(f.degree(), 4);
        let mut z = inst.truth();
        z.push(0.0);
        assert!(f.evaluate(&z).unwrap().abs() < 1e-12);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for _ in 0..1000 {
            let p: Vec<f64> = (0..5).map(|_| rng.random_range(-2.0..2.0)).collect();
            assert!(f.evaluate(&p).unwrap() >= -1e-12);
        }
    }

    #[test]
    fn single_edge_quartic_noise_coefficient() {
        let inst = SnlInstance {
            problem: SnlProblemType::new(1, 2, 2.0, 0.3, 0),
            sensors: vec![vec![-0.5], vec![0.5]],
            anchors: Vec::new(),
            sensor_edges: vec![SensorEdge {
                i: 0,
                j: 1,
                distance: 1.0,
                noise: 0,
            }],
            anchor_edges: Vec::new(),
            clusters: ClusterStructure::single(2),
            hard_sensors: Vec::new(),
        };
        let f = build_potential(&inst, 0.3).unwrap();
        assert!((f.coeff(&MultiIndex::new(vec![0, 0, 4])) - 0.3f64.powi(4)).abs() < 1e-15);
        // (u - (1 + 0.3 w)^2)^2 at u = 4, w = 1: (4 - 1.69)^2
        let v = f.evaluate(&[1.0, -1.0, 1.0]).unwrap();
        assert!((v - (4.0 - 1.69f64).powi(2)).abs() < 1e-12);
    }

    #[test]
    fn hard_mode_has_no_anchor_terms() {
        let mut t = SnlProblemType::new(1, 5, 3.0, 0.1, 2);
        t.anchor_mode = AnchorMode::Hard { n_hard: 2 };
        let inst = generate_instance(&t).unwrap();
        assert!(inst.anchors.is_empty() && inst.anchor_edges.is_empty());
        assert_eq!(inst.hard_sensors.len(), 2);
        let h = inst.hard_constraints().unwrap();
        assert_eq!(h.len(), 2);
        for &(v, x) in h.pins() {
            assert_eq!(inst.sensors[v][0], x);
        }
    }

    #[test]
    fn per_cluster_noise_wiring() {
        let mut t = SnlProblemType::new(2, 9, 3.0, 0.1, 5);
        t.n_clusters = 3;
        let inst = generate_instance(&t).unwrap();
        let cl = inst.sensor_cluster();
        assert!(inst.sensor_edges.iter().all(|e| e.noise == cl[e.i]));
        assert!(inst.anchor_edges.iter().all(|e| e.noise == cl[e.sensor]));
        let vs = inst.variable_structure();
        vs.validate(inst.n_x(), inst.n_noise()).unwrap();
        assert_eq!(vs.edges.len(), 3);
    }

    #[test]
    fn round_robin_noise_wiring() {
        let mut t = SnlProblemType::new(1, 5, 3.0, 0.1, 5);
        t.noise_dim = Some(2);
        let inst = generate_instance(&t).unwrap();
        let all: Vec<usize> = inst
            .sensor_edges
            .iter()
            .map(|e| e.noise)
            .chain(inst.anchor_edges.iter().map(|e| e.noise))
            .collect();
        assert!(all.iter().enumerate().all(|(k, &w)| w == k % 2));
        assert!(inst
            .variable_structure()
            .noise_assignment
            .iter()
            .all(Vec::is_empty));
    }

    #[test]
    fn ring_edges() {
        let pts: Vec<Vec<f64>> = (0..6).map(|i| vec![i as f64]).collect();
        assert!(kmeans_partition(&pts, 1, 0).unwrap().edges.is_empty());
        assert_eq!(kmeans_partition(&pts, 2, 0).unwrap().edges, vec![(0, 1)]);
        let cs = kmeans_partition(&pts, 6, 0).unwrap();
        assert_eq!(cs.edges.len(), 6);
        // ordered by coordinate
        for (c, members) in cs.partition.iter().enumerate() {
            assert_eq!(members, &vec![c]);
        }
    }

    #[test]
    fn full_basis_prunes_nothing() {
        let inst = soft(3, 3.0, 0.1, 0);
        let f = build_potential(&inst, 0.1).unwrap();
        let (g, mass) = prune_potential(&f, &snl_basis(&inst, SnlBasis::Full).unwrap());
        assert_eq!(g, f);
        assert_eq!(mass, 0.0);
    }

    #[test]
    fn cross_cluster_edge_is_pruned() {
        let mut cs = ClusterStructure::single(2);
        cs.partition = vec![vec![0], vec![1]];
        cs.noise_assignment = vec![vec![], vec![]];
        let inst = SnlInstance {
            problem: SnlProblemType::new(1, 2, 2.0, 0.0, 0),
            sensors: vec![vec![-0.5], vec![0.5]],
            anchors: Vec::new(),
            sensor_edges: vec![SensorEdge {
                i: 0,
                j: 1,
                distance: 1.0,
                noise: 0,
            }],
            anchor_edges: Vec::new(),
            clusters: cs.clone(),
            hard_sensors: Vec::new(),
        };
        let f = build_potential(&inst, 0.0).unwrap();
        let basis = cluster_basis(2, 1, &cs, ClusterLevel::new(2, 2).with_total_degree(2)).unwrap();
        let (g, mass) = prune_potential(&f, &basis);
        // x0^3 x1 needs the cross-cluster entry x0 x1; x0 x1 itself is x0 * x1
        assert!(mass > 0.0);
        assert_eq!(g.coeff(&MultiIndex::new(vec![3, 1, 0])), 0.0);
        assert_eq!(g.coeff(&MultiIndex::new(vec![1, 1, 0])), 4.0);
        assert_eq!(g.coeff(&MultiIndex::new(vec![4, 0, 0])), 1.0);
        let (h, dropped) = build_cluster_potential(&inst, 0.0).unwrap();
        assert_eq!(dropped, 1);
        assert!(h.is_zero());
    }

    #[test]
    fn json_round_trip() {
        let inst = soft(4, 1.5, 0.1, 11);
        let back = SnlInstance::from_json(&inst.to_json().unwrap()).unwrap();
        assert_eq!(back, inst);
        assert!(SnlInstance::from_json("{}").is_err());
    }

    #[test]
    fn noiseless_recovery() {
        let inst = soft(2, 3.0, 0.0, 6);
        let est = solve_ssos(&inst, SnlBasis::Full, &SolverOptions::default()).unwrap();
        assert_eq!(est.status, SolveStatus::Optimal);
        assert!(est.objective.abs() < 1e-6);
        for (m, t) in est.means.iter().zip(inst.truth()) {
            assert!((m - t).abs() < 1e-3, "{m} vs {t}");
        }
        assert!(est.variances.iter().all(|&v| v < 1e-4));
    }
}
