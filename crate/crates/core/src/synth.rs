//! Deterministic synthetic token grids.
//!
//! Randomness comes from `ChaCha8Rng::seed_from_u64(seed)` (rand_chacha) and
//! Gaussian draws from `rand_distr::StandardNormal`. Draw order is fixed:
//! prototypes or cluster centers first (row by row), then per-token noise in
//! token order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::TokenGrid;
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SynthKind {
    /// Tokens in each spatial block share a Gaussian cluster center plus noise.
    GaussianClusters,
    /// Every entry equal to `value`.
    Constant,
    /// Every feature of token `(x, y)` equals `x/W + y/H`.
    Gradient,
    /// Two random prototypes alternating by the parity of `row + col`.
    Checker,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub kind: SynthKind,
    pub width: usize,
    pub height: usize,
    #[serde(default = "one")]
    pub frames: usize,
    pub dim: usize,
    #[serde(default = "one")]
    pub n_clusters: usize,
    #[serde(default = "default_std")]
    pub cluster_std: f64,
    #[serde(default = "default_value")]
    pub value: f64,
    #[serde(default)]
    pub seed: u64,
}

fn one() -> usize {
    1
}

fn default_std() -> f64 {
    0.5
}

fn default_value() -> f64 {
    1.0
}

impl SynthSpec {
    pub fn new(kind: SynthKind, width: usize, height: usize, dim: usize) -> Self {
        Self {
            kind,
            width,
            height,
            frames: 1,
            dim,
            n_clusters: 1,
            cluster_std: default_std(),
            value: default_value(),
            seed: 0,
        }
    }

    pub fn gaussian_clusters(
        width: usize,
        height: usize,
        dim: usize,
        n_clusters: usize,
        seed: u64,
    ) -> Self {
        Self {
            n_clusters,
            seed,
            ..Self::new(SynthKind::GaussianClusters, width, height, dim)
        }
    }

    pub fn frames(self, frames: usize) -> Self {
        Self { frames, ..self }
    }

    pub fn seed(self, seed: u64) -> Self {
        Self { seed, ..self }
    }

    pub fn validate(&self) -> Result<()> {
        if self.width == 0 || self.height == 0 || self.frames == 0 || self.dim == 0 {
            return Err(Error::InvalidConfig(
                "synthetic grid sizes must be positive".into(),
            ));
        }
        if self.kind == SynthKind::GaussianClusters {
            if self.n_clusters == 0 || self.n_clusters > self.width * self.height {
                return Err(Error::InvalidConfig(format!(
                    "n_clusters = {} must lie in 1..={} (W x H)",
                    self.n_clusters,
                    self.width * self.height
                )));
            }
            if !(self.cluster_std > 0.0 && self.cluster_std.is_finite()) {
                return Err(Error::InvalidConfig("cluster_std must be positive".into()));
            }
        }
        if !self.value.is_finite() {
            return Err(Error::InvalidConfig("constant value must be finite".into()));
        }
        Ok(())
    }

    /// Cluster of the token at `(row, col)`: a `gx x gy` tiling of the frame
    /// when it fits, horizontal bands of the raster otherwise.
    fn cluster_of(&self, row: usize, col: usize) -> usize {
        let n = self.n_clusters;
        let gx = (n as f64).sqrt().ceil() as usize;
        let gy = n.div_ceil(gx);
        if gx <= self.width && gy <= self.height {
            let bx = col * gx / self.width;
            let by = row * gy / self.height;
            (by * gx + bx).min(n - 1)
        } else {
            (row * self.width + col) * n / (self.width * self.height)
        }
    }
}

fn normal_row(rng: &mut ChaCha8Rng, dim: usize) -> Vec<f64> {
    (0..dim).map(|_| StandardNormal.sample(rng)).collect()
}

/// Generates the grid described by `spec`; identical specs give bit-identical grids.
pub fn generate<T: Scalar>(spec: &SynthSpec) -> Result<TokenGrid<T>> {
    spec.validate()?;
    let per_frame = spec.width * spec.height;
    let m = per_frame * spec.frames;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut values = Vec::with_capacity(m * spec.dim);
    match spec.kind {
        SynthKind::Constant => values.resize(m * spec.dim, spec.value),
        SynthKind::Gradient => {
            for i in 0..m {
                let within = i % per_frame;
                let (row, col) = (within / spec.width, within % spec.width);
                let v =
                    (col + 1) as f64 / spec.width as f64 + (row + 1) as f64 / spec.height as f64;
                values.extend(std::iter::repeat_n(v, spec.dim));
            }
        }
        SynthKind::Checker => {
            let prototypes = [
                normal_row(&mut rng, spec.dim),
                normal_row(&mut rng, spec.dim),
            ];
            for i in 0..m {
                let within = i % per_frame;
                let parity = (within / spec.width + within % spec.width) % 2;
                values.extend_from_slice(&prototypes[parity]);
            }
        }
        SynthKind::GaussianClusters => {
            let centers: Vec<Vec<f64>> = (0..spec.n_clusters)
                .map(|_| normal_row(&mut rng, spec.dim))
                .collect();
            for i in 0..m {
                let within = i % per_frame;
                let center = &centers[spec.cluster_of(within / spec.width, within % spec.width)];
                for &c in center {
                    let noise: f64 = StandardNormal.sample(&mut rng);
                    values.push(c + spec.cluster_std * noise);
                }
            }
        }
    }
    TokenGrid::new(
        values.into_iter().map(T::of).collect(),
        spec.dim,
        spec.width,
        spec.height,
        spec.frames,
    )
}
