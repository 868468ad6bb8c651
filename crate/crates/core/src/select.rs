//! Token selectors: the spatially-augmented greedy k-center (`evtp`), plain
//! feature-space k-center, seeded random sampling, a max-min diversity
//! baseline, and an exhaustive k-center oracle for small instances.

use std::fmt;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{augment, normalize_features, PruneConfig, TokenGrid};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Random,
    Kcenter,
    Evtp,
    Divmax,
    Oracle,
}

impl Method {
    /// Selectors runnable on a full grid.
    pub const SELECTORS: [Method; 4] = [
        Method::Random,
        Method::Kcenter,
        Method::Evtp,
        Method::Divmax,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::Random => "random",
            Method::Kcenter => "kcenter",
            Method::Evtp => "evtp",
            Method::Divmax => "divmax",
            Method::Oracle => "oracle",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "random" => Ok(Method::Random),
            "kcenter" | "k-center" => Ok(Method::Kcenter),
            "evtp" => Ok(Method::Evtp),
            "divmax" => Ok(Method::Divmax),
            _ => Err(Error::UnknownMethod(s.to_string())),
        }
    }
}

/// Retained token indices plus how they were chosen.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(from = "SelectionRecord", into = "SelectionRecord")]
pub struct Selection {
    /// Strictly increasing.
    pub indices: Vec<usize>,
    pub method: Method,
    pub k: usize,
    pub config: PruneConfig,
    /// Same indices in acquisition order.
    pub pick_order: Vec<usize>,
}

/// On-disk form of a [`Selection`].
#[derive(Serialize, Deserialize)]
struct SelectionRecord {
    method: Method,
    k: usize,
    ratio: f64,
    seed: u64,
    indices: Vec<usize>,
    pick_order: Vec<usize>,
}

impl From<Selection> for SelectionRecord {
    fn from(s: Selection) -> Self {
        SelectionRecord {
            method: s.method,
            k: s.k,
            ratio: s.config.ratio,
            seed: s.config.seed,
            indices: s.indices,
            pick_order: s.pick_order,
        }
    }
}

impl From<SelectionRecord> for Selection {
    fn from(r: SelectionRecord) -> Self {
        Selection {
            config: PruneConfig {
                ratio: r.ratio,
                seed: r.seed,
                k_override: Some(r.k),
                ..PruneConfig::default()
            },
            method: r.method,
            k: r.k,
            indices: r.indices,
            pick_order: r.pick_order,
        }
    }
}

impl Selection {
    pub fn from_pick_order(pick_order: Vec<usize>, method: Method, config: PruneConfig) -> Self {
        let mut indices = pick_order.clone();
        indices.sort_unstable();
        Selection {
            k: indices.len(),
            indices,
            method,
            config,
            pick_order,
        }
    }

    /// Checks the selection invariants against a population of `m` tokens.
    pub fn validate(&self, m: usize) -> Result<()> {
        if self.indices.is_empty() {
            return Err(Error::EmptySelection);
        }
        if self.indices.len() != self.k {
            return Err(Error::InvalidConfig(format!(
                "selection lists {} indices but k = {}",
                self.indices.len(),
                self.k
            )));
        }
        if let Some(&index) = self.indices.iter().find(|&&i| i >= m) {
            return Err(Error::IndexOutOfRange { index, len: m });
        }
        if self.indices.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidConfig(
                "indices must be strictly increasing".into(),
            ));
        }
        let mut order = self.pick_order.clone();
        order.sort_unstable();
        if order != self.indices {
            return Err(Error::InvalidConfig(
                "pick_order is not a permutation of indices".into(),
            ));
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

#[inline]
pub(crate) fn squared_distance<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).fold(T::zero(), |acc, (&x, &y)| {
        let d = x - y;
        acc + d * d
    })
}

/// True when `candidate` beats `incumbent` by more than rounding noise.
///
/// Squared distances within a relative `1024 * T::epsilon()` of each other
/// count as tied, so exact ties of the underlying geometry (grid symmetries,
/// duplicate tokens) resolve to the smallest index regardless of how the
/// coordinates were scaled.
#[inline]
fn clearly_greater<T: Scalar>(candidate: T, incumbent: T) -> bool {
    if incumbent <= T::zero() {
        return candidate > incumbent;
    }
    candidate > incumbent + incumbent * T::epsilon() * T::of(1024.0)
}

/// Index of the row farthest from `center`; smallest index on ties.
pub fn farthest_from<T: Scalar>(points: &[T], dim: usize, center: &[T]) -> usize {
    let mut best = 0;
    let mut best_dist = T::neg_infinity();
    for (i, row) in points.chunks_exact(dim).enumerate() {
        let d = squared_distance(row, center);
        if clearly_greater(d, best_dist) {
            best_dist = d;
            best = i;
        }
    }
    best
}

/// Farthest-first traversal of the row-major `points` matrix starting at
/// `first`, returning `k` indices in acquisition order.
///
/// Keeps each point's squared distance to the selected set and refreshes it
/// against the newest center only, so the whole run costs `O(k * M)` distance
/// evaluations. Ties, up to rounding, go to the smallest index.
pub fn farthest_first<T: Scalar>(points: &[T], dim: usize, first: usize, k: usize) -> Vec<usize> {
    let m = points.len() / dim;
    assert!(
        first < m && k <= m,
        "farthest_first: first={first}, k={k}, M={m}"
    );
    let mut order = Vec::with_capacity(k);
    if k == 0 {
        return order;
    }
    let mut min_dist = vec![T::infinity(); m];
    let mut selected = vec![false; m];
    let mut newest = first;
    order.push(first);
    selected[first] = true;
    while order.len() < k {
        let center = &points[newest * dim..(newest + 1) * dim];
        let mut best = usize::MAX;
        let mut best_dist = T::neg_infinity();
        for (i, (row, slot)) in points
            .chunks_exact(dim)
            .zip(min_dist.iter_mut())
            .enumerate()
        {
            let d = squared_distance(row, center);
            if d < *slot {
                *slot = d;
            }
            if clearly_greater(*slot, best_dist) {
                best_dist = *slot;
                best = i;
            }
        }
        // Once every remaining distance is zero the argmax lands on an
        // already selected point; fall back to the smallest unselected index.
        if best_dist <= T::zero() {
            best = (0..m)
                .find(|&i| !selected[i])
                .expect("k <= M leaves an unselected point");
        }
        order.push(best);
        selected[best] = true;
        newest = best;
    }
    order
}

fn run_greedy<T: Scalar>(points: &[T], dim: usize, mean: &[T], k: usize) -> Vec<usize> {
    let first = farthest_from(points, dim, mean);
    farthest_first(points, dim, first, k)
}

/// Greedy k-center in the augmented feature + scaled coordinate space.
///
/// Starts from the augmented token farthest from the augmented mean, then
/// repeatedly adds the token with the largest distance to the selected set.
/// The seed is ignored.
pub fn select_evtp<T: Scalar>(grid: &TokenGrid<T>, cfg: &PruneConfig) -> Result<Selection> {
    let k = cfg.effective_k(grid.len())?;
    let aug = augment(grid, T::of(cfg.epsilon));
    let order = run_greedy(aug.vectors(), aug.width(), aug.mean_vector(), k);
    Ok(Selection::from_pick_order(order, Method::Evtp, *cfg))
}

/// Greedy k-center on normalized features only. The seed is ignored.
pub fn select_kcenter<T: Scalar>(grid: &TokenGrid<T>, cfg: &PruneConfig) -> Result<Selection> {
    let k = cfg.effective_k(grid.len())?;
    let normalized = normalize_features(grid, T::of(cfg.epsilon));
    let order = run_greedy(
        normalized.embeddings(),
        grid.dim(),
        &normalized.mean_vector(),
        k,
    );
    Ok(Selection::from_pick_order(order, Method::Kcenter, *cfg))
}

/// Uniform sample of `k` tokens without replacement from a ChaCha8 stream
/// seeded with `cfg.seed`.
pub fn select_random<T: Scalar>(grid: &TokenGrid<T>, cfg: &PruneConfig) -> Result<Selection> {
    let k = cfg.effective_k(grid.len())?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let order = rand::seq::index::sample(&mut rng, grid.len(), k).into_vec();
    Ok(Selection::from_pick_order(order, Method::Random, *cfg))
}

/// Max-min diversity baseline in angular distance.
///
/// Normalized features are projected onto the unit sphere (zero rows stay
/// zero), where squared Euclidean distance is twice the cosine distance. The
/// set is seeded with the smaller index of the most distant pair, then grown
/// with the same farthest-first step as k-center. A stand-in for
/// diversity-driven pruning in the comparison harness, not a port of any
/// published selector.
pub fn select_divmax<T: Scalar>(grid: &TokenGrid<T>, cfg: &PruneConfig) -> Result<Selection> {
    let k = cfg.effective_k(grid.len())?;
    let normalized = normalize_features(grid, T::of(cfg.epsilon));
    let dim = grid.dim();
    let m = grid.len();
    let points: Vec<T> = normalized
        .rows()
        .flat_map(|row| {
            let norm = row.iter().fold(T::zero(), |acc, &v| acc + v * v).sqrt();
            row.iter().map(move |&v| {
                if norm > T::zero() {
                    v / norm
                } else {
                    T::zero()
                }
            })
        })
        .collect();
    let mut first = 0;
    let mut best = T::neg_infinity();
    for i in 0..m {
        let a = &points[i * dim..(i + 1) * dim];
        for j in i + 1..m {
            let d = squared_distance(a, &points[j * dim..(j + 1) * dim]);
            if d > best {
                best = d;
                first = i;
            }
        }
    }
    let order = farthest_first(&points, dim, first, k);
    Ok(Selection::from_pick_order(order, Method::Divmax, *cfg))
}

/// Dispatch by method name.
pub fn select<T: Scalar>(
    method: Method,
    grid: &TokenGrid<T>,
    cfg: &PruneConfig,
) -> Result<Selection> {
    match method {
        Method::Random => select_random(grid, cfg),
        Method::Kcenter => select_kcenter(grid, cfg),
        Method::Evtp => select_evtp(grid, cfg),
        Method::Divmax => select_divmax(grid, cfg),
        Method::Oracle => Err(Error::InvalidConfig(
            "the oracle works on point matrices, use oracle_optimal_radius".into(),
        )),
    }
}

pub const ORACLE_MAX_POINTS: usize = 20;
pub const ORACLE_MAX_K: usize = 6;

/// Optimal k-center radius by exhaustive enumeration of all `C(M, k)` subsets.
///
/// Returns the radius and the lexicographically smallest optimal subset.
/// Refuses instances above 20 points or `k > 6`.
pub fn oracle_optimal_radius<T: Scalar>(
    points: &[T],
    dim: usize,
    k: usize,
) -> Result<(T, Vec<usize>)> {
    if dim == 0 || !points.len().is_multiple_of(dim) || points.is_empty() {
        return Err(Error::InvalidConfig(
            "oracle needs a non-empty M x D matrix".into(),
        ));
    }
    let m = points.len() / dim;
    if m > ORACLE_MAX_POINTS || k > ORACLE_MAX_K {
        return Err(Error::OracleLimit {
            points: m,
            k,
            max_points: ORACLE_MAX_POINTS,
            max_k: ORACLE_MAX_K,
        });
    }
    if k == 0 || k > m {
        return Err(Error::InvalidConfig(format!(
            "oracle k = {k} must lie in 1..={m}"
        )));
    }
    let row = |i: usize| &points[i * dim..(i + 1) * dim];
    let pairwise: Vec<T> = (0..m)
        .flat_map(|i| (0..m).map(move |j| (i, j)))
        .map(|(i, j)| squared_distance(row(i), row(j)))
        .collect();

    let mut subset: Vec<usize> = (0..k).collect();
    let mut best = T::infinity();
    let mut witness = subset.clone();
    loop {
        let radius = (0..m)
            .map(|i| {
                subset
                    .iter()
                    .map(|&c| pairwise[i * m + c])
                    .fold(T::infinity(), T::min)
            })
            .fold(T::zero(), T::max);
        if radius < best {
            best = radius;
            witness.clone_from(&subset);
        }
        // Next combination in lexicographic order.
        let Some(pos) = (0..k).rev().find(|&p| subset[p] < m - k + p) else {
            break;
        };
        subset[pos] += 1;
        for p in pos + 1..k {
            subset[p] = subset[p - 1] + 1;
        }
    }
    Ok((best.sqrt(), witness))
}
