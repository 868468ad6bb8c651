//! Coverage radii and epsilon-ball coverage of a selection.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{augment, normalize_features, AugmentedTokens, TokenGrid};
use crate::scalar::Scalar;
use crate::select::{squared_distance, Selection};

/// Which feature values the feature radius is measured on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeatureSpace {
    /// After mean-centering and variance scaling, as the selectors see them.
    #[default]
    Normalized,
    Raw,
}

/// Squared distance from every row of `points` to its nearest center.
pub fn nearest_center_sq<T: Scalar>(points: &[T], dim: usize, centers: &[usize]) -> Result<Vec<T>> {
    if centers.is_empty() {
        return Err(Error::EmptySelection);
    }
    let m = points.len() / dim;
    if let Some(&index) = centers.iter().find(|&&c| c >= m) {
        return Err(Error::IndexOutOfRange { index, len: m });
    }
    let rows: Vec<&[T]> = points.chunks_exact(dim).collect();
    Ok(rows
        .iter()
        .map(|row| {
            centers
                .iter()
                .map(|&c| squared_distance(row, rows[c]))
                .fold(T::infinity(), T::min)
        })
        .collect())
}

/// `max_i min_{c in centers} ||p_i - p_c||` over the row-major matrix `points`.
pub fn coverage_radius<T: Scalar>(points: &[T], dim: usize, centers: &[usize]) -> Result<T> {
    Ok(nearest_center_sq(points, dim, centers)?
        .into_iter()
        .fold(T::zero(), T::max)
        .sqrt())
}

fn feature_matrix<T: Scalar>(grid: &TokenGrid<T>, space: FeatureSpace, epsilon: T) -> Vec<T> {
    match space {
        FeatureSpace::Normalized => normalize_features(grid, epsilon).embeddings().to_vec(),
        FeatureSpace::Raw => grid.embeddings().to_vec(),
    }
}

/// Largest distance from any token to its nearest selected token, in feature space.
pub fn feature_coverage_radius<T: Scalar>(
    grid: &TokenGrid<T>,
    sel: &Selection,
    space: FeatureSpace,
    epsilon: T,
) -> Result<T> {
    coverage_radius(
        &feature_matrix(grid, space, epsilon),
        grid.dim(),
        &sel.indices,
    )
}

/// Same max-min in the augmented `D + 2` dimensional space.
pub fn joint_coverage_radius<T: Scalar>(aug: &AugmentedTokens<T>, sel: &Selection) -> Result<T> {
    coverage_radius(aug.vectors(), aug.width(), &sel.indices)
}

/// Max-min over the normalized `(x/W, y/H)` coordinates only.
pub fn spatial_coverage_radius<T: Scalar>(grid: &TokenGrid<T>, sel: &Selection) -> Result<T> {
    coverage_radius(&grid.coordinate_matrix(), 2, &sel.indices)
}

/// Fraction of tokens within feature distance `eps` of some selected token, for each `eps`.
pub fn epsilon_ball_coverage<T: Scalar>(
    grid: &TokenGrid<T>,
    sel: &Selection,
    epsilons: &[T],
    space: FeatureSpace,
    epsilon: T,
) -> Result<Vec<(T, T)>> {
    if let Some(bad) = epsilons.iter().find(|e| e.is_nan() || **e < T::zero()) {
        return Err(Error::InvalidConfig(format!(
            "ball radius {bad} must be non-negative"
        )));
    }
    let nearest: Vec<T> = nearest_center_sq(
        &feature_matrix(grid, space, epsilon),
        grid.dim(),
        &sel.indices,
    )?
    .into_iter()
    .map(T::sqrt)
    .collect();
    let total = T::of_usize(nearest.len());
    Ok(epsilons
        .iter()
        .map(|&eps| {
            let covered = nearest.iter().filter(|&&d| d <= eps).count();
            (eps, T::of_usize(covered) / total)
        })
        .collect())
}

/// All coverage diagnostics for one `(grid, selection)` pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageReport {
    pub method: String,
    pub ratio: f64,
    pub seed: u64,
    pub k: usize,
    pub feature_radius: f64,
    pub joint_radius: f64,
    pub spatial_radius: f64,
    pub epsilon_ball_fractions: Vec<(f64, f64)>,
}

impl CoverageReport {
    pub fn compute<T: Scalar>(
        grid: &TokenGrid<T>,
        sel: &Selection,
        ball_radii: &[f64],
        space: FeatureSpace,
        epsilon: f64,
    ) -> Result<Self> {
        sel.validate(grid.len())?;
        let eps = T::of(epsilon);
        let aug = augment(grid, eps);
        let radii: Vec<T> = ball_radii.iter().map(|&r| T::of(r)).collect();
        Ok(CoverageReport {
            method: sel.method.to_string(),
            ratio: sel.config.ratio,
            seed: sel.config.seed,
            k: sel.k,
            feature_radius: feature_coverage_radius(grid, sel, space, eps)?.to_f64_lossy(),
            joint_radius: joint_coverage_radius(&aug, sel)?.to_f64_lossy(),
            spatial_radius: spatial_coverage_radius(grid, sel)?.to_f64_lossy(),
            epsilon_ball_fractions: epsilon_ball_coverage(grid, sel, &radii, space, eps)?
                .into_iter()
                .map(|(e, f)| (e.to_f64_lossy(), f.to_f64_lossy()))
                .collect(),
        })
    }

    /// CSV header: `method,ratio,seed,R_f,R_j,R_s` then one `eps_<r>` column per ball radius.
    pub fn csv_header(ball_radii: &[f64]) -> Vec<String> {
        ["method", "ratio", "seed", "R_f", "R_j", "R_s"]
            .iter()
            .map(|s| s.to_string())
            .chain(ball_radii.iter().map(|r| format!("eps_{r}")))
            .collect()
    }

    pub fn csv_record(&self) -> Vec<String> {
        [
            self.method.clone(),
            self.ratio.to_string(),
            self.seed.to_string(),
            self.feature_radius.to_string(),
            self.joint_radius.to_string(),
            self.spatial_radius.to_string(),
        ]
        .into_iter()
        .chain(
            self.epsilon_ball_fractions
                .iter()
                .map(|(_, f)| f.to_string()),
        )
        .collect()
    }

    pub fn to_csv(&self) -> Result<String> {
        let radii: Vec<f64> = self
            .epsilon_ball_fractions
            .iter()
            .map(|(e, _)| *e)
            .collect();
        let mut out = csv::Writer::from_writer(Vec::new());
        out.write_record(Self::csv_header(&radii))?;
        out.write_record(self.csv_record())?;
        Ok(
            String::from_utf8(out.into_inner().map_err(|e| e.into_error())?)
                .expect("csv output is utf-8"),
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::PruneConfig;
    use crate::select::{select_evtp, Method};

    fn sel(indices: &[usize]) -> Selection {
        Selection::from_pick_order(indices.to_vec(), Method::Oracle, PruneConfig::default())
    }

    fn line(values: &[f64], width: usize) -> TokenGrid<f64> {
        TokenGrid::new(values.to_vec(), 1, width, values.len() / width, 1).unwrap()
    }

    #[test]
    fn full_selection_has_zero_radii() {
        let g = TokenGrid::new((0..18).map(|i| (i as f64).sin()).collect(), 2, 3, 3, 1).unwrap();
        let all = sel(&(0..9).collect::<Vec<_>>());
        let r = CoverageReport::compute(&g, &all, &[0.0], FeatureSpace::Normalized, 1e-6).unwrap();
        assert_eq!(
            (r.feature_radius, r.joint_radius, r.spatial_radius),
            (0.0, 0.0, 0.0)
        );
        assert_eq!(r.epsilon_ball_fractions, vec![(0.0, 1.0)]);
    }

    #[test]
    fn feature_radius_in_normalized_space() {
        let g = line(&[0.0, 1.0, 2.0], 3);
        let r = feature_coverage_radius(&g, &sel(&[1]), FeatureSpace::Normalized, 1e-6).unwrap();
        let expected = 1.0 / (2.0 / 3.0 + 1e-6);
        assert!((r - expected).abs() < 1e-12);
        assert!((r - 1.4999978).abs() < 1e-6);
        let raw = feature_coverage_radius(&g, &sel(&[1]), FeatureSpace::Raw, 1e-6).unwrap();
        assert_eq!(raw, 1.0);
    }

    #[test]
    fn duplicates_contribute_nothing() {
        let g = line(&[5.0, 5.0, 5.0, 9.0], 4);
        let r = feature_coverage_radius(&g, &sel(&[1, 3]), FeatureSpace::Raw, 1e-6).unwrap();
        assert_eq!(r, 0.0);
    }

    #[test]
    fn joint_radius_on_constant_grid() {
        let g = TokenGrid::new(vec![1.0f64; 4], 1, 2, 2, 1).unwrap();
        let aug = augment(&g, 1e-6);
        let r = joint_coverage_radius(&aug, &sel(&[0])).unwrap();
        assert!((r - 1e-6 * 0.5f64.hypot(0.5)).abs() < 1e-18);
        let rs = spatial_coverage_radius(&g, &sel(&[0])).unwrap();
        assert!((r - aug.lambda() * rs).abs() < 1e-18);
    }

    #[test]
    fn spatial_radius_on_a_line() {
        let g = line(&[0.0, 0.0, 0.0], 3);
        let r = spatial_coverage_radius(&g, &sel(&[1])).unwrap();
        assert!((r - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn clustered_selection_covers_space_worse_than_evtp() {
        let g = TokenGrid::new(vec![0.0f64; 196], 1, 14, 14, 1).unwrap();
        let evtp = select_evtp(&g, &PruneConfig::with_k(19)).unwrap();
        let clustered = sel(&(0..19).collect::<Vec<_>>());
        let r_evtp = spatial_coverage_radius(&g, &evtp).unwrap();
        let r_clustered = spatial_coverage_radius(&g, &clustered).unwrap();
        assert!(r_clustered > r_evtp, "{r_clustered} vs {r_evtp}");
    }

    #[test]
    fn epsilon_ball_examples() {
        let g = line(&[0.0, 1.0, 2.0], 3);
        let f = epsilon_ball_coverage(
            &g,
            &sel(&[1]),
            &[0.0, 1.0, 1.5],
            FeatureSpace::Normalized,
            1e-6,
        )
        .unwrap();
        assert_eq!(f[0].1, 1.0 / 3.0);
        assert_eq!(f[1].1, 1.0 / 3.0);
        assert_eq!(f[2].1, 1.0);

        let distinct = line(&[0.0, 1.0, 3.0, 7.0, 15.0], 5);
        let f = epsilon_ball_coverage(&distinct, &sel(&[0, 4]), &[0.0], FeatureSpace::Raw, 1e-6)
            .unwrap();
        assert_eq!(f[0].1, 2.0 / 5.0);

        assert!(epsilon_ball_coverage(&g, &sel(&[1]), &[-0.5], FeatureSpace::Raw, 1e-6).is_err());
    }

    #[test]
    fn empty_selection_errors() {
        let g = line(&[0.0, 1.0], 2);
        let empty = sel(&[]);
        assert!(matches!(
            feature_coverage_radius(&g, &empty, FeatureSpace::Raw, 1e-6),
            Err(Error::EmptySelection)
        ));
        assert!(matches!(
            spatial_coverage_radius(&g, &empty),
            Err(Error::EmptySelection)
        ));
        assert!(matches!(
            joint_coverage_radius(&augment(&g, 1e-6), &empty),
            Err(Error::EmptySelection)
        ));
    }

    #[test]
    fn report_csv_row() {
        let g = line(&[0.0, 1.0, 2.0], 3);
        let r = CoverageReport::compute(
            &g,
            &sel(&[0, 1, 2]),
            &[0.5, 1.0],
            FeatureSpace::Normalized,
            1e-6,
        )
        .unwrap();
        let csv = r.to_csv().unwrap();
        let mut lines = csv.lines();
        assert_eq!(
            lines.next().unwrap(),
            "method,ratio,seed,R_f,R_j,R_s,eps_0.5,eps_1"
        );
        assert_eq!(lines.next().unwrap(), "oracle,1,0,0,0,0,1,1");
        assert!(lines.next().is_none());
    }
}
