//! Single-linkage clustering of endpoint clouds, the atom detector for
//! pullback ensembles. Points within a linkage-epsilon chain belong to one
//! cluster; atoms of the statistical equilibrium are points, numerical
//! clouds have integrator-scale width, so the default epsilon is a couple
//! of orders above the per-step noise scale.

use nalgebra::DVector;

use crate::error::{Error, Result};

/// Point-cloud metric.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    Euclidean,
    /// Arc-length on [0, 2π) applied to the first coordinate.
    CircleArc,
}

impl Metric {
    pub fn distance(&self, a: &DVector<f64>, b: &DVector<f64>) -> f64 {
        match self {
            Metric::Euclidean => (a - b).norm(),
            Metric::CircleArc => {
                let tau = std::f64::consts::TAU;
                let d = (a[0] - b[0]).rem_euclid(tau);
                d.min(tau - d)
            }
        }
    }
}

/// Default linkage epsilon: 20x the per-step noise scale σ√dt.
pub fn default_linkage_epsilon(sigma: f64, dt: f64) -> f64 {
    20.0 * sigma.abs().max(1e-12) * dt.sqrt()
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct ClusterReport {
    pub linkage_epsilon: f64,
    pub cluster_count: usize,
    pub cluster_centers: Vec<Vec<f64>>,
    pub cluster_sizes: Vec<usize>,
    pub max_intra_cluster_diameter: f64,
    pub metric: Metric,
}

struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        UnionFind { parent: (0..n).collect() }
    }

    fn find(&mut self, i: usize) -> usize {
        if self.parent[i] != i {
            let root = self.find(self.parent[i]);
            self.parent[i] = root;
        }
        self.parent[i]
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            // Smaller index wins, keeping cluster labels order-stable.
            let (lo, hi) = (ra.min(rb), ra.max(rb));
            self.parent[hi] = lo;
        }
    }
}

/// Single-linkage clustering with threshold `linkage_epsilon`.
pub fn cluster_count(
    points: &[DVector<f64>],
    linkage_epsilon: f64,
    metric: Metric,
) -> Result<ClusterReport> {
    if points.is_empty() {
        return Err(Error::Config {
            key: "cluster.points".into(),
            message: "cannot cluster an empty point set".into(),
        });
    }
    if !(linkage_epsilon > 0.0) {
        return Err(Error::Config {
            key: "cluster.epsilon".into(),
            message: "linkage epsilon must be positive".into(),
        });
    }
    let n = points.len();
    let mut uf = UnionFind::new(n);
    for a in 0..n {
        for b in (a + 1)..n {
            if metric.distance(&points[a], &points[b]) <= linkage_epsilon {
                uf.union(a, b);
            }
        }
    }
    // Collect clusters in first-appearance order.
    let mut roots: Vec<usize> = Vec::new();
    let mut membership = vec![0usize; n];
    for i in 0..n {
        let r = uf.find(i);
        let cid = match roots.iter().position(|&x| x == r) {
            Some(c) => c,
            None => {
                roots.push(r);
                roots.len() - 1
            }
        };
        membership[i] = cid;
    }
    let k = roots.len();
    let mut sizes = vec![0usize; k];
    for &m in &membership {
        sizes[m] += 1;
    }
    let dim = points[0].len();
    let mut centers = Vec::with_capacity(k);
    for c in 0..k {
        let members: Vec<&DVector<f64>> =
            (0..n).filter(|i| membership[*i] == c).map(|i| &points[i]).collect();
        let center = match metric {
            Metric::Euclidean => {
                let mut m = DVector::zeros(dim);
                for p in &members {
                    m += *p;
                }
                m /= members.len() as f64;
                m.iter().copied().collect::<Vec<f64>>()
            }
            Metric::CircleArc => {
                // Circular mean of the angles.
                let (s, co) = members
                    .iter()
                    .fold((0.0f64, 0.0f64), |(s, c), p| (s + p[0].sin(), c + p[0].cos()));
                vec![s.atan2(co).rem_euclid(std::f64::consts::TAU)]
            }
        };
        centers.push(center);
    }
    let mut max_diam: f64 = 0.0;
    for a in 0..n {
        for b in (a + 1)..n {
            if membership[a] == membership[b] {
                max_diam = max_diam.max(metric.distance(&points[a], &points[b]));
            }
        }
    }
    Ok(ClusterReport {
        linkage_epsilon,
        cluster_count: k,
        cluster_centers: centers,
        cluster_sizes: sizes,
        max_intra_cluster_diameter: max_diam,
        metric,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn pt(x: f64) -> DVector<f64> {
        DVector::from_vec(vec![x])
    }

    #[test]
    fn identical_points_one_cluster() {
        let pts = vec![pt(1.0); 8];
        let r = cluster_count(&pts, 0.1, Metric::Euclidean).unwrap();
        assert_eq!(r.cluster_count, 1);
        assert_eq!(r.cluster_sizes, vec![8]);
        assert_eq!(r.max_intra_cluster_diameter, 0.0);
    }

    #[test]
    fn single_point_degenerate() {
        let r = cluster_count(&[pt(3.0)], 0.5, Metric::Euclidean).unwrap();
        assert_eq!(r.cluster_count, 1);
    }

    #[test]
    fn two_antipodal_groups_on_circle() {
        use std::f64::consts::PI;
        let mut pts = Vec::new();
        for i in 0..20 {
            let jitter = 0.01 * (i as f64 / 20.0 - 0.5);
            pts.push(pt((0.3 + jitter).rem_euclid(std::f64::consts::TAU)));
            pts.push(pt((0.3 + PI + jitter).rem_euclid(std::f64::consts::TAU)));
        }
        let r = cluster_count(&pts, 0.2, Metric::CircleArc).unwrap();
        assert_eq!(r.cluster_count, 2);
        let c0 = r.cluster_centers[0][0];
        let c1 = r.cluster_centers[1][0];
        let arc = Metric::CircleArc.distance(&pt(c0), &pt(c1));
        assert!((arc - PI).abs() < 0.1, "centers {c0}, {c1} arc {arc}");
        // Centers separated by more than the linkage threshold.
        assert!(arc > r.linkage_epsilon);
    }

    #[test]
    fn chain_merges_into_one() {
        let pts: Vec<_> = (0..10).map(|i| pt(i as f64 * 0.09)).collect();
        let r = cluster_count(&pts, 0.1, Metric::Euclidean).unwrap();
        assert_eq!(r.cluster_count, 1);
    }

    #[test]
    fn wraparound_arc_distance() {
        let a = pt(0.05);
        let b = pt(std::f64::consts::TAU - 0.05);
        assert!(Metric::CircleArc.distance(&a, &b) < 0.11);
    }

    proptest! {
        #[test]
        fn permutation_and_duplicate_invariance(
            xs in proptest::collection::vec(-5.0f64..5.0, 2..40),
            eps in 0.05f64..1.0,
            dup_idx in 0usize..40,
        ) {
            let pts: Vec<DVector<f64>> = xs.iter().map(|&x| pt(x)).collect();
            let base = cluster_count(&pts, eps, Metric::Euclidean).unwrap();
            // Permuted.
            let mut rev: Vec<DVector<f64>> = pts.clone();
            rev.reverse();
            let permuted = cluster_count(&rev, eps, Metric::Euclidean).unwrap();
            prop_assert_eq!(base.cluster_count, permuted.cluster_count);
            // Duplicated point.
            let mut dup = pts.clone();
            dup.push(pts[dup_idx % pts.len()].clone());
            let with_dup = cluster_count(&dup, eps, Metric::Euclidean).unwrap();
            prop_assert_eq!(base.cluster_count, with_dup.cluster_count);
        }
    }
}
