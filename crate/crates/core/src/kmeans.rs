//! Seeded k-means: k-means++ initialization followed by Lloyd iterations.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Result, SsosError};

const MAX_LLOYD: usize = 300;
const MAX_RESEEDS: u64 = 10;

#[derive(Clone, Debug, PartialEq)]
pub struct KMeans {
    pub labels: Vec<usize>,
    pub centroids: Vec<Vec<f64>>,
}

fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn plus_plus_init(points: &[Vec<f64>], k: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let mut centroids = vec![points[rng.random_range(0..points.len())].clone()];
    while centroids.len() < k {
        let d: Vec<f64> = points
            .iter()
            .map(|p| {
                centroids
                    .iter()
                    .map(|c| dist2(p, c))
                    .fold(f64::INFINITY, f64::min)
            })
            .collect();
        let total: f64 = d.iter().sum();
        let next = if total > 0.0 {
            let mut u = rng.random::<f64>() * total;
            let mut pick = points.len() - 1;
            for (i, di) in d.iter().enumerate() {
                if u < *di {
                    pick = i;
                    break;
                }
                u -= di;
            }
            pick
        } else {
            rng.random_range(0..points.len())
        };
        centroids.push(points[next].clone());
    }
    centroids
}

/// Lloyd iterations; `None` if a cluster empties.
fn lloyd(points: &[Vec<f64>], mut centroids: Vec<Vec<f64>>) -> Option<KMeans> {
    let k = centroids.len();
    let dim = points[0].len();
    let mut labels = vec![usize::MAX; points.len()];
    for _ in 0..MAX_LLOYD {
        let mut changed = false;
        for (p, label) in points.iter().zip(labels.iter_mut()) {
            let best = (0..k)
                .min_by(|&a, &b| dist2(p, &centroids[a]).total_cmp(&dist2(p, &centroids[b])))
                .unwrap_or(0);
            if *label != best {
                *label = best;
                changed = true;
            }
        }
        let mut sums = vec![vec![0.0; dim]; k];
        let mut counts = vec![0usize; k];
        for (p, &l) in points.iter().zip(&labels) {
            counts[l] += 1;
            for (s, v) in sums[l].iter_mut().zip(p) {
                *s += v;
            }
        }
        if counts.contains(&0) {
            return None;
        }
        for ((c, s), n) in centroids.iter_mut().zip(sums).zip(&counts) {
            *c = s.into_iter().map(|v| v / *n as f64).collect();
        }
        if !changed {
            break;
        }
    }
    Some(KMeans { labels, centroids })
}

/// Clusters `points` into `k` non-empty groups. Empty clusters trigger a
/// re-seeded restart.
pub fn kmeans(points: &[Vec<f64>], k: usize, seed: u64) -> Result<KMeans> {
    if k == 0 || k > points.len() {
        return Err(SsosError::Parameter(format!(
            "cannot form {k} clusters from {} points",
            points.len()
        )));
    }
    for attempt in 0..MAX_RESEEDS {
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(attempt));
        let init = plus_plus_init(points, k, &mut rng);
        if let Some(result) = lloyd(points, init) {
            return Ok(result);
        }
    }
    Err(SsosError::Generation(format!(
        "k-means left a cluster empty after {MAX_RESEEDS} seedings"
    )))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn separates_obvious_groups() {
        let pts: Vec<Vec<f64>> = [-1.0, -0.9, -0.95, 0.9, 1.0, 0.95]
            .iter()
            .map(|&v| vec![v])
            .collect();
        let km = kmeans(&pts, 2, 7).unwrap();
        assert_eq!(km.labels[0], km.labels[1]);
        assert_eq!(km.labels[1], km.labels[2]);
        assert_eq!(km.labels[3], km.labels[4]);
        assert_ne!(km.labels[0], km.labels[3]);
    }

    #[test]
    fn k_equals_n_gives_singletons() {
        let pts: Vec<Vec<f64>> = (0..6).map(|i| vec![i as f64, (i * i) as f64]).collect();
        let km = kmeans(&pts, 6, 1).unwrap();
        let mut l = km.labels.clone();
        l.sort();
        assert_eq!(l, (0..6).collect::<Vec<_>>());
    }

    #[test]
    fn seeded_is_deterministic() {
        let pts: Vec<Vec<f64>> = (0..20).map(|i| vec![(i as f64 * 0.37).sin()]).collect();
        assert_eq!(kmeans(&pts, 3, 5).unwrap(), kmeans(&pts, 3, 5).unwrap());
    }

    #[test]
    fn bad_cluster_counts() {
        let pts = vec![vec![0.0]];
        assert!(kmeans(&pts, 0, 0).is_err());
        assert!(kmeans(&pts, 2, 0).is_err());
    }
}
