//! Sample containers and the trained model bundle.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::hypernet::{HyperNetArch, HyperNetParams};
use crate::linalg::Matrix;

/// One sample's coordinates (`n × p`) and target values (`n × c`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SampleBatch<'a> {
    coords: &'a [f64],
    targets: &'a [f64],
    input_dim: usize,
    output_dim: usize,
}

impl<'a> SampleBatch<'a> {
    /// Checks shapes, that coordinates lie in `[-1, 1]` and that all values
    /// are finite.
    pub fn new(
        coords: &'a [f64],
        targets: &'a [f64],
        input_dim: usize,
        output_dim: usize,
    ) -> Result<Self> {
        if input_dim == 0 || output_dim == 0 {
            return Err(Error::Config("sample dimensions must be positive".into()));
        }
        let n = coords.len() / input_dim;
        if n == 0 || coords.len() != n * input_dim {
            return Err(Error::Shape {
                what: "sample coordinates",
                expected: n.max(1) * input_dim,
                got: coords.len(),
            });
        }
        if targets.len() != n * output_dim {
            return Err(Error::Shape {
                what: "sample targets",
                expected: n * output_dim,
                got: targets.len(),
            });
        }
        if let Some(i) = coords.iter().position(|x| !(-1.0..=1.0).contains(x)) {
            return Err(Error::Numeric(alloc::format!(
                "coordinate {i} outside [-1, 1]"
            )));
        }
        if let Some(i) = targets.iter().position(|x| !x.is_finite()) {
            return Err(Error::Numeric(alloc::format!("non-finite target at {i}")));
        }
        Ok(Self {
            coords,
            targets,
            input_dim,
            output_dim,
        })
    }

    pub fn len(&self) -> usize {
        self.coords.len() / self.input_dim
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn coords(&self) -> &'a [f64] {
        self.coords
    }

    pub fn targets(&self) -> &'a [f64] {
        self.targets
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn output_dim(&self) -> usize {
        self.output_dim
    }
}

/// Coordinates of a dataset: one grid shared by every sample (images) or a
/// separate query set per sample (unsigned distance fields).
#[derive(Debug, Clone, PartialEq)]
pub enum Coords {
    Shared(Vec<f64>),
    PerSample(Vec<f64>),
}

/// `t` samples with `n` points each, stored flat.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldDataset {
    input_dim: usize,
    output_dim: usize,
    points: usize,
    coords: Coords,
    targets: Vec<f64>,
    labels: Vec<u32>,
}

impl FieldDataset {
    /// Samples on one shared grid (`n × p`); `targets` is `t × n × c`.
    /// `labels` is empty or has one entry per sample.
    pub fn shared(
        input_dim: usize,
        output_dim: usize,
        grid: Vec<f64>,
        targets: Vec<f64>,
        labels: Vec<u32>,
    ) -> Result<Self> {
        let points = grid.len() / input_dim.max(1);
        Self::with_points(
            input_dim,
            output_dim,
            points,
            Coords::Shared(grid),
            targets,
            labels,
        )
    }

    /// Samples with their own `n` query points each (`t × n × p`).
    pub fn per_sample(
        input_dim: usize,
        output_dim: usize,
        points: usize,
        coords: Vec<f64>,
        targets: Vec<f64>,
        labels: Vec<u32>,
    ) -> Result<Self> {
        Self::with_points(
            input_dim,
            output_dim,
            points,
            Coords::PerSample(coords),
            targets,
            labels,
        )
    }

    pub fn with_points(
        input_dim: usize,
        output_dim: usize,
        points: usize,
        coords: Coords,
        targets: Vec<f64>,
        labels: Vec<u32>,
    ) -> Result<Self> {
        if input_dim == 0 || output_dim == 0 || points == 0 {
            return Err(Error::Config("dataset dimensions must be positive".into()));
        }
        let per_sample = points * output_dim;
        if !targets.len().is_multiple_of(per_sample) {
            return Err(Error::Shape {
                what: "dataset targets",
                expected: per_sample,
                got: targets.len(),
            });
        }
        let t = targets.len() / per_sample;
        let expected_coords = match &coords {
            Coords::Shared(_) => points * input_dim,
            Coords::PerSample(_) => t * points * input_dim,
        };
        let got = match &coords {
            Coords::Shared(c) | Coords::PerSample(c) => c.len(),
        };
        if got != expected_coords {
            return Err(Error::Shape {
                what: "dataset coordinates",
                expected: expected_coords,
                got,
            });
        }
        if !labels.is_empty() && labels.len() != t {
            return Err(Error::Shape {
                what: "dataset labels",
                expected: t,
                got: labels.len(),
            });
        }
        let ds = Self {
            input_dim,
            output_dim,
            points,
            coords,
            targets,
            labels,
        };
        for j in 0..t {
            ds.sample(j)?;
        }
        Ok(ds)
    }

    pub fn len(&self) -> usize {
        self.targets.len() / (self.points * self.output_dim)
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn output_dim(&self) -> usize {
        self.output_dim
    }

    pub fn points(&self) -> usize {
        self.points
    }

    pub fn labels(&self) -> &[u32] {
        &self.labels
    }

    pub fn coords(&self) -> &Coords {
        &self.coords
    }

    pub fn targets(&self) -> &[f64] {
        &self.targets
    }

    pub fn sample(&self, j: usize) -> Result<SampleBatch<'_>> {
        if j >= self.len() {
            return Err(Error::Lookup(j));
        }
        let (n, p, c) = (self.points, self.input_dim, self.output_dim);
        let coords = match &self.coords {
            Coords::Shared(g) => &g[..],
            Coords::PerSample(all) => &all[j * n * p..(j + 1) * n * p],
        };
        SampleBatch::new(coords, &self.targets[j * n * c..(j + 1) * n * c], p, c)
    }

    /// The samples at `indices`, in that order.
    pub fn subset(&self, indices: &[usize]) -> Result<Self> {
        let (n, c) = (self.points, self.output_dim);
        let mut targets = Vec::with_capacity(indices.len() * n * c);
        let mut labels = Vec::new();
        let mut per = Vec::new();
        for &j in indices {
            let s = self.sample(j)?;
            targets.extend_from_slice(s.targets());
            if let Coords::PerSample(_) = self.coords {
                per.extend_from_slice(s.coords());
            }
            if !self.labels.is_empty() {
                labels.push(self.labels[j]);
            }
        }
        let coords = match &self.coords {
            Coords::Shared(g) => Coords::Shared(g.clone()),
            Coords::PerSample(_) => Coords::PerSample(per),
        };
        Self::with_points(self.input_dim, self.output_dim, n, coords, targets, labels)
    }
}

/// Provenance stored with a bundle.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct BundleMeta {
    /// Digest of the configuration that produced the bundle.
    pub fingerprint: [u8; 32],
    pub seed: u64,
}

/// A trained hypernetwork with one latent per training sample.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelBundle {
    pub hyper: HyperNetParams,
    /// `t × l`; row `j` belongs to training sample `j`.
    pub latents: Matrix,
    /// Empty or one label per latent row.
    pub labels: Vec<u32>,
    pub meta: BundleMeta,
}

impl ModelBundle {
    pub fn new(
        hyper: HyperNetParams,
        latents: Matrix,
        labels: Vec<u32>,
        meta: BundleMeta,
    ) -> Result<Self> {
        let l = hyper.arch().latent_dim;
        if latents.cols() != l {
            return Err(Error::Shape {
                what: "bundle latents",
                expected: l,
                got: latents.cols(),
            });
        }
        if !labels.is_empty() && labels.len() != latents.rows() {
            return Err(Error::Shape {
                what: "bundle labels",
                expected: latents.rows(),
                got: labels.len(),
            });
        }
        Ok(Self {
            hyper,
            latents,
            labels,
            meta,
        })
    }

    pub fn arch(&self) -> &HyperNetArch {
        self.hyper.arch()
    }

    pub fn latent(&self, j: usize) -> Result<&[f64]> {
        if j >= self.latents.rows() {
            return Err(Error::Lookup(j));
        }
        Ok(self.latents.row(j))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn rejects_out_of_range_coordinates() {
        assert!(SampleBatch::new(&[0.5, 1.5], &[0.0], 2, 1).is_err());
        assert!(SampleBatch::new(&[0.5, -1.0], &[f64::NAN], 2, 1).is_err());
        assert!(SampleBatch::new(&[0.5, -1.0], &[0.0, 1.0], 2, 1).is_err());
        let s = SampleBatch::new(&[0.5, -1.0], &[0.25], 2, 1).unwrap();
        assert_eq!(s.len(), 1);
    }

    #[test]
    fn shared_and_per_sample_layouts() {
        let grid = vec![-0.5, -0.5, 0.5, 0.5];
        let ds = FieldDataset::shared(
            2,
            1,
            grid.clone(),
            vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0],
            vec![0, 1, 2],
        )
        .unwrap();
        assert_eq!(ds.len(), 3);
        assert_eq!(ds.sample(1).unwrap().targets(), &[3.0, 4.0]);
        assert_eq!(ds.sample(2).unwrap().coords(), &grid[..]);
        assert!(matches!(ds.sample(3), Err(Error::Lookup(3))));

        let sub = ds.subset(&[2, 0]).unwrap();
        assert_eq!(sub.labels(), &[2, 0]);
        assert_eq!(sub.sample(0).unwrap().targets(), &[5.0, 6.0]);

        let per =
            FieldDataset::per_sample(1, 1, 2, vec![0.1, 0.2, 0.3, 0.4], vec![1.0; 4], vec![7, 8])
                .unwrap();
        assert_eq!(per.points(), 2);
        assert_eq!(per.sample(1).unwrap().coords(), &[0.3, 0.4]);
    }
}
