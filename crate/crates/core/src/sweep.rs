//! Coverage-vs-ratio sweeps over selectors, ratios, seeds and inputs.
//!
//! Cells run in parallel on the current rayon pool; results are always
//! reported in spec order (input, method, ratio, seed).

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::grid::{PruneConfig, TokenGrid, DEFAULT_EPSILON};
use crate::io::read_grid;
use crate::metrics::{CoverageReport, FeatureSpace};
use crate::select::{select, Method};
use crate::synth::{generate, SynthSpec};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepInput {
    /// Grid file (JSON header or CSV). The same grid is used for every seed.
    File(PathBuf),
    /// Synthetic grid, regenerated with each sweep seed.
    Synth(SynthSpec),
}

impl SweepInput {
    pub fn label(&self) -> String {
        match self {
            SweepInput::File(p) => p.display().to_string(),
            SweepInput::Synth(s) => format!(
                "synth:{:?}:{}x{}x{}:d{}",
                s.kind, s.width, s.height, s.frames, s.dim
            )
            .to_lowercase(),
        }
    }

    fn load(&self, seed: u64) -> Result<TokenGrid<f64>> {
        match self {
            SweepInput::File(p) => read_grid(p),
            SweepInput::Synth(s) => generate(&s.seed(seed)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub methods: Vec<Method>,
    pub ratios: Vec<f64>,
    pub seeds: Vec<u64>,
    pub inputs: Vec<SweepInput>,
    /// Ball radii for epsilon-ball coverage columns.
    #[serde(default)]
    pub epsilons: Vec<f64>,
    /// Stability constant for variance normalization.
    #[serde(default = "default_epsilon")]
    pub stability_epsilon: f64,
    #[serde(default)]
    pub feature_space: FeatureSpace,
}

fn default_epsilon() -> f64 {
    DEFAULT_EPSILON
}

impl SweepSpec {
    pub fn validate(&self) -> Result<()> {
        let empty = |what: &str| {
            Err(Error::InvalidConfig(format!(
                "sweep needs at least one {what}"
            )))
        };
        if self.methods.is_empty() {
            return empty("method");
        }
        if self.ratios.is_empty() {
            return empty("ratio");
        }
        if self.seeds.is_empty() {
            return empty("seed");
        }
        if self.inputs.is_empty() {
            return empty("input");
        }
        if self.methods.contains(&Method::Oracle) {
            return Err(Error::InvalidConfig(
                "the oracle cannot be swept over full grids".into(),
            ));
        }
        for &r in &self.ratios {
            PruneConfig::with_ratio(r)
                .epsilon(self.stability_epsilon)
                .validate()?;
        }
        if let Some(e) = self.epsilons.iter().find(|e| e.is_nan() || **e < 0.0) {
            return Err(Error::InvalidConfig(format!(
                "ball radius {e} must be non-negative"
            )));
        }
        for input in &self.inputs {
            match input {
                SweepInput::File(p) if !p.exists() => {
                    return Err(Error::InvalidConfig(format!(
                        "input {} does not exist",
                        p.display()
                    )))
                }
                SweepInput::Synth(s) => s.validate()?,
                _ => {}
            }
        }
        Ok(())
    }

    /// SHA-256 of the canonical JSON encoding.
    pub fn config_hash(&self) -> String {
        let json = serde_json::to_vec(self).expect("sweep spec serializes");
        Sha256::digest(&json)
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub input: String,
    pub method: Method,
    pub ratio: f64,
    pub seed: u64,
    pub report: Option<CoverageReport>,
    pub error: Option<String>,
    #[serde(skip)]
    pub input_error: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodMean {
    pub method: Method,
    pub ratio: f64,
    pub rows: usize,
    pub mean_feature_radius: f64,
    pub mean_joint_radius: f64,
    pub mean_spatial_radius: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatioOrdering {
    pub ratio: f64,
    /// Methods sorted by ascending mean feature radius.
    pub by_feature_radius: Vec<Method>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSummary {
    pub means: Vec<MethodMean>,
    pub ordering: Vec<RatioOrdering>,
    pub failed_rows: usize,
}

impl SweepSummary {
    pub fn mean(&self, method: Method, ratio: f64) -> Option<&MethodMean> {
        self.means
            .iter()
            .find(|m| m.method == method && m.ratio == ratio)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepOutcome {
    pub rows: Vec<SweepRow>,
    pub summary: SweepSummary,
}

/// Runs every `(input, method, ratio, seed)` cell of `spec`.
///
/// Per-cell failures are recorded on the row; only an invalid spec fails the call.
pub fn run_sweep(spec: &SweepSpec) -> Result<SweepOutcome> {
    spec.validate()?;
    let grid_keys: Vec<(usize, u64)> = spec
        .inputs
        .iter()
        .enumerate()
        .flat_map(|(i, input)| match input {
            SweepInput::File(_) => vec![(i, 0)],
            SweepInput::Synth(_) => spec.seeds.iter().map(|&s| (i, s)).collect(),
        })
        .collect();
    let grids: Vec<Result<TokenGrid<f64>>> = grid_keys
        .par_iter()
        .map(|&(i, seed)| spec.inputs[i].load(seed))
        .collect();
    let grid_for = |input: usize, seed: u64| -> &Result<TokenGrid<f64>> {
        let seed = match spec.inputs[input] {
            SweepInput::File(_) => 0,
            SweepInput::Synth(_) => seed,
        };
        let pos = grid_keys
            .iter()
            .position(|&k| k == (input, seed))
            .expect("every cell has a loaded grid");
        &grids[pos]
    };

    let mut cells = Vec::new();
    for input in 0..spec.inputs.len() {
        for &method in &spec.methods {
            for &ratio in &spec.ratios {
                for &seed in &spec.seeds {
                    cells.push((input, method, ratio, seed));
                }
            }
        }
    }

    let rows: Vec<SweepRow> = cells
        .par_iter()
        .map(|&(input, method, ratio, seed)| {
            let cfg = PruneConfig::with_ratio(ratio)
                .seed(seed)
                .epsilon(spec.stability_epsilon);
            let result = match grid_for(input, seed) {
                Ok(grid) => select(method, grid, &cfg).and_then(|sel| {
                    CoverageReport::compute(
                        grid,
                        &sel,
                        &spec.epsilons,
                        spec.feature_space,
                        spec.stability_epsilon,
                    )
                }),
                Err(e) => Err(Error::InvalidGrid(e.to_string())),
            };
            let input_error = matches!(&result, Err(e) if e.is_input_error());
            let (report, error) = match result {
                Ok(r) => (Some(r), None),
                Err(e) => (None, Some(e.to_string())),
            };
            SweepRow {
                input: spec.inputs[input].label(),
                method,
                ratio,
                seed,
                report,
                error,
                input_error,
            }
        })
        .collect();

    let summary = summarize(spec, &rows);
    Ok(SweepOutcome { rows, summary })
}

fn summarize(spec: &SweepSpec, rows: &[SweepRow]) -> SweepSummary {
    let mut means = Vec::new();
    for &method in &spec.methods {
        for &ratio in &spec.ratios {
            let reports: Vec<&CoverageReport> = rows
                .iter()
                .filter(|r| r.method == method && r.ratio == ratio)
                .filter_map(|r| r.report.as_ref())
                .collect();
            let n = reports.len();
            let mean = |f: fn(&CoverageReport) -> f64| {
                if n == 0 {
                    f64::NAN
                } else {
                    reports.iter().map(|r| f(r)).sum::<f64>() / n as f64
                }
            };
            means.push(MethodMean {
                method,
                ratio,
                rows: n,
                mean_feature_radius: mean(|r| r.feature_radius),
                mean_joint_radius: mean(|r| r.joint_radius),
                mean_spatial_radius: mean(|r| r.spatial_radius),
            });
        }
    }
    let ordering = spec
        .ratios
        .iter()
        .map(|&ratio| {
            let mut at: Vec<&MethodMean> = means
                .iter()
                .filter(|m| m.ratio == ratio && m.rows > 0)
                .collect();
            at.sort_by(|a, b| a.mean_feature_radius.total_cmp(&b.mean_feature_radius));
            RatioOrdering {
                ratio,
                by_feature_radius: at.iter().map(|m| m.method).collect(),
            }
        })
        .collect();
    SweepSummary {
        means,
        ordering,
        failed_rows: rows.iter().filter(|r| r.error.is_some()).count(),
    }
}

/// CSV with one row per cell: `input,method,ratio,seed,k,R_f,R_j,R_s`, one
/// `eps_<r>` column per ball radius, then `error`.
pub fn rows_to_csv(spec: &SweepSpec, rows: &[SweepRow]) -> Result<String> {
    let mut out = csv::Writer::from_writer(Vec::new());
    let header: Vec<String> = ["input", "method", "ratio", "seed", "k", "R_f", "R_j", "R_s"]
        .iter()
        .map(|s| s.to_string())
        .chain(spec.epsilons.iter().map(|e| format!("eps_{e}")))
        .chain(std::iter::once("error".to_string()))
        .collect();
    out.write_record(&header)?;
    for row in rows {
        let mut record = vec![
            row.input.clone(),
            row.method.to_string(),
            row.ratio.to_string(),
            row.seed.to_string(),
        ];
        match &row.report {
            Some(r) => {
                record.extend([
                    r.k.to_string(),
                    r.feature_radius.to_string(),
                    r.joint_radius.to_string(),
                    r.spatial_radius.to_string(),
                ]);
                record.extend(r.epsilon_ball_fractions.iter().map(|(_, f)| f.to_string()));
            }
            None => record.extend(std::iter::repeat_n(String::new(), 4 + spec.epsilons.len())),
        }
        record.push(row.error.clone().unwrap_or_default());
        out.write_record(&record)?;
    }
    Ok(
        String::from_utf8(out.into_inner().map_err(|e| e.into_error())?)
            .expect("csv output is utf-8"),
    )
}

#[derive(Debug, Serialize)]
struct Manifest<'a> {
    tool: &'static str,
    version: &'static str,
    config_hash: String,
    seeds: &'a [u64],
    spec: &'a SweepSpec,
}

/// Line chart of mean feature radius against ratio, one polyline per method.
pub fn feature_radius_svg(summary: &SweepSummary) -> String {
    const W: f64 = 640.0;
    const H: f64 = 400.0;
    const PAD: f64 = 50.0;
    const COLORS: [&str; 5] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e"];
    let pts: Vec<&MethodMean> = summary
        .means
        .iter()
        .filter(|m| m.mean_feature_radius.is_finite())
        .collect();
    let (x_min, x_max) = pts
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), m| {
            (lo.min(m.ratio), hi.max(m.ratio))
        });
    let y_max = pts
        .iter()
        .map(|m| m.mean_feature_radius)
        .fold(0.0, f64::max);
    let sx = |x: f64| {
        if x_max > x_min {
            PAD + (x - x_min) / (x_max - x_min) * (W - 2.0 * PAD)
        } else {
            W / 2.0
        }
    };
    let sy = |y: f64| {
        if y_max > 0.0 {
            H - PAD - y / y_max * (H - 2.0 * PAD)
        } else {
            H - PAD
        }
    };

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">"#
    );
    let _ = writeln!(
        svg,
        r#"<path d="M{PAD} {PAD} L{PAD} {b} L{r} {b}" fill="none" stroke="black"/>"#,
        b = H - PAD,
        r = W - PAD
    );
    let _ = writeln!(
        svg,
        r#"<text x="{x}" y="{y}" text-anchor="middle" font-size="12">ratio ({x_min:.3} to {x_max:.3})</text>"#,
        x = W / 2.0,
        y = H - 15.0
    );
    let _ = writeln!(
        svg,
        r#"<text x="15" y="{y}" font-size="12" transform="rotate(-90 15 {y})">mean R_f (max {y_max:.4})</text>"#,
        y = H / 2.0
    );
    let mut methods: Vec<Method> = Vec::new();
    for m in &pts {
        if !methods.contains(&m.method) {
            methods.push(m.method);
        }
    }
    for (i, method) in methods.iter().enumerate() {
        let mut line: Vec<&&MethodMean> = pts.iter().filter(|m| m.method == *method).collect();
        line.sort_by(|a, b| a.ratio.total_cmp(&b.ratio));
        let d: Vec<String> = line
            .iter()
            .enumerate()
            .map(|(j, m)| {
                format!(
                    "{}{:.2} {:.2}",
                    if j == 0 { "M" } else { "L" },
                    sx(m.ratio),
                    sy(m.mean_feature_radius)
                )
            })
            .collect();
        let color = COLORS[i % COLORS.len()];
        let _ = writeln!(
            svg,
            r#"<path d="{}" fill="none" stroke="{color}" stroke-width="2"/>"#,
            d.join(" ")
        );
        let _ = writeln!(
            svg,
            r#"<text x="{x}" y="{y}" font-size="12" fill="{color}">{method}</text>"#,
            x = W - PAD + 5.0,
            y = PAD + 15.0 * i as f64
        );
    }
    svg.push_str("</svg>\n");
    svg
}

/// Output files written by [`write_outputs`].
pub const RESULTS_CSV: &str = "results.csv";
pub const SUMMARY_JSON: &str = "summary.json";
pub const MANIFEST_JSON: &str = "manifest.json";
pub const PLOT_SVG: &str = "feature_radius.svg";

/// Writes the results CSV, the summary, the manifest and optionally the chart into `dir`.
pub fn write_outputs(
    spec: &SweepSpec,
    outcome: &SweepOutcome,
    dir: &Path,
    svg: bool,
) -> Result<()> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join(RESULTS_CSV), rows_to_csv(spec, &outcome.rows)?)?;
    fs::write(
        dir.join(SUMMARY_JSON),
        serde_json::to_string_pretty(&outcome.summary)? + "\n",
    )?;
    let manifest = Manifest {
        tool: "coreprune",
        version: env!("CARGO_PKG_VERSION"),
        config_hash: spec.config_hash(),
        seeds: &spec.seeds,
        spec,
    };
    fs::write(
        dir.join(MANIFEST_JSON),
        serde_json::to_string_pretty(&manifest)? + "\n",
    )?;
    if svg {
        fs::write(dir.join(PLOT_SVG), feature_radius_svg(&outcome.summary))?;
    }
    Ok(())
}
