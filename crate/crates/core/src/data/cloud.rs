//! Point clouds and unsigned distance samples.

use alloc::vec::Vec;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Uniform};

use crate::data::kdtree::KdTree;
use crate::error::{Error, Result};
use crate::model::FieldDataset;

/// Query count per shape.
pub const DEFAULT_QUERIES: usize = 10_000;
/// Half-width of the cube clouds are fitted into.
pub const FIT_HALF_WIDTH: f64 = 0.9;

const QUERY_KEY: u64 = 0x5544_4651_5545_5259;

/// Points inside `[-1, 1]³`.
#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud {
    points: Vec<[f64; 3]>,
}

impl PointCloud {
    pub fn new(points: Vec<[f64; 3]>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::EmptyCloud);
        }
        if let Some(i) = points
            .iter()
            .position(|p| p.iter().any(|x| !x.is_finite() || x.abs() > 1.0))
        {
            return Err(Error::Numeric(alloc::format!(
                "point {i} non-finite or outside [-1, 1]^3"
            )));
        }
        Ok(Self { points })
    }

    /// Translates the bounding box center to the origin and scales uniformly
    /// so the largest extent spans `[-0.9, 0.9]`.
    pub fn fit(raw: &[[f64; 3]]) -> Result<Self> {
        if raw.is_empty() {
            return Err(Error::EmptyCloud);
        }
        if raw.iter().flatten().any(|x| !x.is_finite()) {
            return Err(Error::Numeric("non-finite point in cloud".into()));
        }
        let mut lo = [f64::INFINITY; 3];
        let mut hi = [f64::NEG_INFINITY; 3];
        for p in raw {
            for a in 0..3 {
                lo[a] = lo[a].min(p[a]);
                hi[a] = hi[a].max(p[a]);
            }
        }
        let center = [
            0.5 * (lo[0] + hi[0]),
            0.5 * (lo[1] + hi[1]),
            0.5 * (lo[2] + hi[2]),
        ];
        let half = (0..3).map(|a| 0.5 * (hi[a] - lo[a])).fold(0.0, f64::max);
        let scale = if half > 0.0 {
            FIT_HALF_WIDTH / half
        } else {
            1.0
        };
        let points = raw
            .iter()
            .map(|p| {
                let mut q = [0.0; 3];
                for a in 0..3 {
                    q[a] = ((p[a] - center[a]) * scale).clamp(-FIT_HALF_WIDTH, FIT_HALF_WIDTH);
                }
                q
            })
            .collect();
        Self::new(points)
    }

    pub fn points(&self) -> &[[f64; 3]] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Uniform queries in `[-1, 1]³` (`n × 3`) and their distances to the cloud.
#[derive(Debug, Clone, PartialEq)]
pub struct UdfSample {
    pub queries: Vec<f64>,
    pub udf: Vec<f64>,
}

/// Queries depend only on `(seed, shape_index)`, so shapes can be sampled
/// in any order.
pub fn sample_udf(
    cloud: &PointCloud,
    n_queries: usize,
    seed: u64,
    shape_index: u64,
) -> Result<UdfSample> {
    let tree = KdTree::build(cloud.points())?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ QUERY_KEY);
    rng.set_stream(shape_index);
    let unit = Uniform::new_inclusive(-1.0, 1.0).expect("finite bounds");
    let mut queries = Vec::with_capacity(3 * n_queries);
    let mut udf = Vec::with_capacity(n_queries);
    for _ in 0..n_queries {
        let q = [
            unit.sample(&mut rng),
            unit.sample(&mut rng),
            unit.sample(&mut rng),
        ];
        queries.extend_from_slice(&q);
        udf.push(tree.nn_distance(&q));
    }
    Ok(UdfSample { queries, udf })
}

/// A per-sample field dataset of distance samples, shape `j` keyed by index
/// `j`.
pub fn udf_dataset(
    clouds: &[PointCloud],
    labels: Vec<u32>,
    n_queries: usize,
    seed: u64,
) -> Result<FieldDataset> {
    if clouds.is_empty() {
        return Err(Error::Config("no shapes to sample".into()));
    }
    let mut coords = Vec::with_capacity(clouds.len() * 3 * n_queries);
    let mut targets = Vec::with_capacity(clouds.len() * n_queries);
    for (j, cloud) in clouds.iter().enumerate() {
        let s = sample_udf(cloud, n_queries, seed, j as u64)?;
        coords.extend_from_slice(&s.queries);
        targets.extend_from_slice(&s.udf);
    }
    FieldDataset::per_sample(3, 1, n_queries, coords, targets, labels)
}
