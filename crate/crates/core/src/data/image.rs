//! Grayscale image datasets on a pixel-center coordinate grid.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::model::FieldDataset;

/// Pixel centers of an `h × w` image mapped to `[-1, 1]²`, row-major,
/// each point `(x, y)` with `x` along columns.
pub fn make_grid(h: usize, w: usize) -> Vec<f64> {
    let mut g = Vec::with_capacity(2 * h * w);
    for r in 0..h {
        let y = -1.0 + (2 * r + 1) as f64 / h as f64;
        for c in 0..w {
            g.push(-1.0 + (2 * c + 1) as f64 / w as f64);
            g.push(y);
        }
    }
    g
}

#[derive(Debug, Clone, PartialEq)]
pub struct ImageDataset {
    images: Vec<f64>,
    labels: Vec<u32>,
    height: usize,
    width: usize,
}

impl ImageDataset {
    /// `images` is `t × (h·w)` with values in `[0, 1]`; one label per image.
    pub fn new(images: Vec<f64>, labels: Vec<u32>, height: usize, width: usize) -> Result<Self> {
        let px = height * width;
        if px == 0 {
            return Err(Error::Config("image size must be positive".into()));
        }
        if images.len() != labels.len() * px {
            return Err(Error::Shape {
                what: "image pixels",
                expected: labels.len() * px,
                got: images.len(),
            });
        }
        if let Some(i) = images.iter().position(|x| !(0.0..=1.0).contains(x)) {
            return Err(Error::Numeric(alloc::format!("pixel {i} outside [0, 1]")));
        }
        Ok(Self {
            images,
            labels,
            height,
            width,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn labels(&self) -> &[u32] {
        &self.labels
    }

    pub fn pixels(&self) -> &[f64] {
        &self.images
    }

    pub fn image(&self, j: usize) -> Result<&[f64]> {
        let px = self.height * self.width;
        self.images
            .get(j * px..(j + 1) * px)
            .ok_or(Error::Lookup(j))
    }

    /// Number of distinct classes, `max label + 1`.
    pub fn num_classes(&self) -> usize {
        self.labels.iter().max().map_or(0, |&m| m as usize + 1)
    }

    pub fn subset(&self, indices: &[usize]) -> Result<Self> {
        let mut images = Vec::with_capacity(indices.len() * self.height * self.width);
        let mut labels = Vec::with_capacity(indices.len());
        for &j in indices {
            images.extend_from_slice(self.image(j)?);
            labels.push(self.labels[j]);
        }
        Self::new(images, labels, self.height, self.width)
    }

    /// Per class, skips the first `skip` images in dataset order and keeps
    /// the next `take`. Output keeps dataset order.
    pub fn take_per_class(&self, skip: usize, take: usize) -> Result<Self> {
        let mut seen = alloc::vec![0usize; self.num_classes()];
        let mut keep = Vec::new();
        for (j, &y) in self.labels.iter().enumerate() {
            let k = &mut seen[y as usize];
            if *k >= skip && *k < skip + take {
                keep.push(j);
            }
            *k += 1;
        }
        self.subset(&keep)
    }

    /// One sample per image on the shared pixel grid, `c = 1`.
    pub fn to_fields(&self) -> Result<FieldDataset> {
        if self.is_empty() {
            return Err(Error::Config("image dataset is empty".into()));
        }
        FieldDataset::shared(
            2,
            1,
            make_grid(self.height, self.width),
            self.images.clone(),
            self.labels.clone(),
        )
    }
}
