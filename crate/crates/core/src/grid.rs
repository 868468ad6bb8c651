//! Token grids and the preprocessing that runs before greedy selection:
//! variance, feature normalization and coordinate augmentation.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Default stability constant added to the feature variance.
pub const DEFAULT_EPSILON: f64 = 1e-6;

/// `M` visual token embeddings of width `D`, laid out on `frames` grids of
/// `width x height` tokens.
///
/// Token `i` sits in frame `i / (W*H)`, row `(i % (W*H)) / W` and column
/// `(i % (W*H)) % W`: row-major within a frame, frames concatenated.
#[derive(Debug, Clone, PartialEq)]
pub struct TokenGrid<T> {
    embeddings: Vec<T>,
    dim: usize,
    width: usize,
    height: usize,
    frames: usize,
}

impl<T: Scalar> TokenGrid<T> {
    /// Builds a grid from a row-major `M x dim` buffer, checking geometry and finiteness.
    pub fn new(
        embeddings: Vec<T>,
        dim: usize,
        width: usize,
        height: usize,
        frames: usize,
    ) -> Result<Self> {
        if dim == 0 || width == 0 || height == 0 || frames == 0 {
            return Err(Error::InvalidGrid(format!(
                "dimensions must be positive (D={dim}, W={width}, H={height}, F={frames})"
            )));
        }
        let tokens = width * height * frames;
        if embeddings.len() != tokens * dim {
            return Err(Error::InvalidGrid(format!(
                "expected {tokens} x {dim} = {} values, got {}",
                tokens * dim,
                embeddings.len()
            )));
        }
        if let Some(pos) = embeddings.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidGrid(format!(
                "non-finite embedding value at token {}, dim {}",
                pos / dim,
                pos % dim
            )));
        }
        Ok(Self {
            embeddings,
            dim,
            width,
            height,
            frames,
        })
    }

    /// Single-frame grid from one row per token.
    pub fn from_rows(rows: &[Vec<T>], width: usize, height: usize) -> Result<Self> {
        let dim = rows.first().map(Vec::len).unwrap_or(0);
        if rows.iter().any(|r| r.len() != dim) {
            return Err(Error::InvalidGrid("rows have differing lengths".into()));
        }
        Self::new(rows.concat(), dim, width, height, 1)
    }

    pub fn len(&self) -> usize {
        self.width * self.height * self.frames
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn frames(&self) -> usize {
        self.frames
    }

    pub fn embeddings(&self) -> &[T] {
        &self.embeddings
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.embeddings[i * self.dim..(i + 1) * self.dim]
    }

    pub fn rows(&self) -> std::slice::ChunksExact<'_, T> {
        self.embeddings.chunks_exact(self.dim)
    }

    /// `(frame, row, column)` of token `i`.
    pub fn position(&self, i: usize) -> (usize, usize, usize) {
        let per_frame = self.width * self.height;
        let within = i % per_frame;
        (i / per_frame, within / self.width, within % self.width)
    }

    /// Normalized `(x/W, y/H)` of token `i` using 1-based positions, so both
    /// components lie in `(0, 1]`. Frames share the same 2D coordinates.
    pub fn coords(&self, i: usize) -> [T; 2] {
        let (_, row, col) = self.position(i);
        [
            T::of_usize(col + 1) / T::of_usize(self.width),
            T::of_usize(row + 1) / T::of_usize(self.height),
        ]
    }

    /// Row-major `M x 2` coordinate matrix.
    pub fn coordinate_matrix(&self) -> Vec<T> {
        (0..self.len()).flat_map(|i| self.coords(i)).collect()
    }

    /// Same geometry, new embeddings.
    pub fn with_embeddings(&self, embeddings: Vec<T>) -> Result<Self> {
        Self::new(embeddings, self.dim, self.width, self.height, self.frames)
    }

    /// See [`total_variance`].
    pub fn total_variance(&self) -> T {
        total_variance(self)
    }

    /// Per-dimension mean vector.
    pub fn mean_vector(&self) -> Vec<T> {
        column_means(&self.embeddings, self.dim)
    }
}

/// Population variance of the embedding matrix as one scalar: the mean over
/// all `M*D` entries of the squared deviation from that entry's column mean.
/// Zero exactly when every row is identical.
pub fn total_variance<T: Scalar>(grid: &TokenGrid<T>) -> T {
    let mean = grid.mean_vector();
    let n = T::of_usize(grid.embeddings().len());
    grid.rows()
        .flat_map(|row| {
            row.iter().zip(&mean).map(|(&v, &m)| {
                let d = v - m;
                d * d
            })
        })
        .sum::<T>()
        / n
}

/// `(E - mu) / (Var(E) + epsilon)` with `mu` the per-dimension mean and
/// `Var(E)` the scalar total variance. Divides by the variance itself, not
/// the standard deviation.
pub fn normalize_features<T: Scalar>(grid: &TokenGrid<T>, epsilon: T) -> TokenGrid<T> {
    let scale = total_variance(grid) + epsilon;
    let mean = grid.mean_vector();
    let normalized = grid
        .rows()
        .flat_map(|row| row.iter().zip(&mean).map(|(&v, &m)| (v - m) / scale))
        .collect();
    grid.with_embeddings(normalized)
        .expect("normalization preserves geometry and finiteness")
}

/// Normalized features with `lambda`-scaled coordinates appended: the space
/// the spatially-aware selector works in.
#[derive(Debug, Clone, PartialEq)]
pub struct AugmentedTokens<T> {
    vectors: Vec<T>,
    width: usize,
    lambda: T,
    epsilon: T,
    mean_vector: Vec<T>,
}

impl<T: Scalar> AugmentedTokens<T> {
    /// Row-major `M x (D+2)` matrix.
    pub fn vectors(&self) -> &[T] {
        &self.vectors
    }

    /// Row width, `D + 2`.
    pub fn width(&self) -> usize {
        self.width
    }

    /// Feature width `D`; coordinate columns start here.
    pub fn feature_dim(&self) -> usize {
        self.width - 2
    }

    pub fn len(&self) -> usize {
        self.vectors.len() / self.width
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.vectors[i * self.width..(i + 1) * self.width]
    }

    pub fn lambda(&self) -> T {
        self.lambda
    }

    pub fn epsilon(&self) -> T {
        self.epsilon
    }

    /// Mean of the augmented vectors.
    pub fn mean_vector(&self) -> &[T] {
        &self.mean_vector
    }

    /// Copy of the columns `range` of every row, row-major.
    pub fn column_slice(&self, range: std::ops::Range<usize>) -> Vec<T> {
        self.vectors
            .chunks_exact(self.width)
            .flat_map(|row| row[range.clone()].iter().copied())
            .collect()
    }
}

/// Builds the augmented token matrix.
///
/// `lambda = Var(E) + epsilon` is taken from the raw embeddings, the features
/// are normalized, and `lambda * (x/W, y/H)` is appended to every row.
pub fn augment<T: Scalar>(grid: &TokenGrid<T>, epsilon: T) -> AugmentedTokens<T> {
    let lambda = total_variance(grid) + epsilon;
    let normalized = normalize_features(grid, epsilon);
    let width = grid.dim() + 2;
    let mut vectors = Vec::with_capacity(grid.len() * width);
    for (i, row) in normalized.rows().enumerate() {
        vectors.extend_from_slice(row);
        let [x, y] = grid.coords(i);
        vectors.push(lambda * x);
        vectors.push(lambda * y);
    }
    let mean_vector = column_means(&vectors, width);
    AugmentedTokens {
        vectors,
        width,
        lambda,
        epsilon,
        mean_vector,
    }
}

pub(crate) fn column_means<T: Scalar>(matrix: &[T], width: usize) -> Vec<T> {
    let rows = matrix.len() / width;
    let mut sums = vec![T::zero(); width];
    for row in matrix.chunks_exact(width) {
        for (s, &v) in sums.iter_mut().zip(row) {
            *s = *s + v;
        }
    }
    let n = T::of_usize(rows);
    sums.into_iter().map(|s| s / n).collect()
}

/// Knobs shared by every selector.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PruneConfig {
    /// Fraction of tokens retained, in `(0, 1]`.
    pub ratio: f64,
    pub epsilon: f64,
    /// Only read by stochastic selectors.
    pub seed: u64,
    /// Exact retained count, bypassing `floor(ratio * M)`.
    pub k_override: Option<usize>,
}

impl Default for PruneConfig {
    fn default() -> Self {
        Self {
            ratio: 1.0,
            epsilon: DEFAULT_EPSILON,
            seed: 0,
            k_override: None,
        }
    }
}

impl PruneConfig {
    pub fn with_ratio(ratio: f64) -> Self {
        Self {
            ratio,
            ..Self::default()
        }
    }

    pub fn with_k(k: usize) -> Self {
        Self {
            k_override: Some(k),
            ..Self::default()
        }
    }

    pub fn seed(self, seed: u64) -> Self {
        Self { seed, ..self }
    }

    pub fn epsilon(self, epsilon: f64) -> Self {
        Self { epsilon, ..self }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.ratio > 0.0 && self.ratio <= 1.0) {
            return Err(Error::InvalidConfig(format!(
                "ratio {} outside (0, 1]",
                self.ratio
            )));
        }
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "epsilon {} must be positive",
                self.epsilon
            )));
        }
        if self.k_override == Some(0) {
            return Err(Error::InvalidConfig("k override must be positive".into()));
        }
        Ok(())
    }

    /// Retained count for `m` tokens: the override if set, else `max(1, floor(r*m))`.
    pub fn effective_k(&self, m: usize) -> Result<usize> {
        self.validate()?;
        let k = match self.k_override {
            Some(k) => k,
            None => ((self.ratio * m as f64).floor() as usize).max(1),
        };
        if k > m {
            return Err(Error::InvalidConfig(format!(
                "k = {k} exceeds the {m} available tokens"
            )));
        }
        Ok(k)
    }
}
