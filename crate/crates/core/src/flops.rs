//! Closed-form FLOPs of one forward pass through the segmentation pipeline:
//! language model, vision encoder, token pruning, mask decoder, temporal
//! module and the fusion block.
//!
//! Every formula is a polynomial in integer sizes, so results are exact in
//! `f64` as long as the totals stay below 2^53; the only division (by 10, in
//! the pruning cost) is applied once to an exact numerator.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Transformer sizes of every pipeline component.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelDims {
    /// LM hidden size.
    pub d: u64,
    /// LM FFN size.
    pub d_int: u64,
    /// LM layers.
    pub layers: u64,
    pub vocab: u64,
    /// Vision encoder hidden size.
    pub d_v: u64,
    pub n_patches: u64,
    pub vision_layers: u64,
    /// Mask decoder queries.
    pub queries: u64,
    pub d_m: u64,
    pub mask_layers: u64,
    pub temporal_queries: u64,
    pub temporal_layers: u64,
    /// Fusion hidden size.
    pub d_f: u64,
    pub fusion_layers: u64,
    /// Auxiliary tokens always present in the LM sequence.
    pub fixed_tokens: u64,
}

impl Default for ModelDims {
    fn default() -> Self {
        Self {
            d: 2560,
            d_int: 10240,
            layers: 32,
            vocab: 51200,
            d_v: 1152,
            n_patches: 729,
            vision_layers: 27,
            queries: 100,
            d_m: 256,
            mask_layers: 9,
            temporal_queries: 128,
            temporal_layers: 3,
            d_f: 1024,
            fusion_layers: 3,
            fixed_tokens: 100,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WorkloadPreset {
    pub name: String,
    pub text_tokens: u64,
    /// Visual tokens per frame.
    pub visual_tokens: u64,
    pub frames: u64,
}

const PRESET_TABLE: [(&str, u64, u64, u64); 8] = [
    ("RefCOCO", 15, 729, 1),
    ("RefCOCO+", 15, 729, 1),
    ("RefCOCOg", 23, 729, 1),
    ("MM-Conv", 50, 729, 1),
    ("ReasonSeg", 80, 729, 1),
    ("RefYouTube", 20, 729, 4),
    ("RefDAVIS", 18, 729, 4),
    ("ReVOS", 25, 729, 4),
];

/// Retained tokens per frame for the 100%, 20%, 10% and 5% settings.
pub const KEEP_PRESETS: [(&str, u64); 4] = [("100%", 729), ("20%", 146), ("10%", 73), ("5%", 36)];

impl WorkloadPreset {
    pub fn all() -> Vec<WorkloadPreset> {
        PRESET_TABLE
            .iter()
            .map(
                |&(name, text_tokens, visual_tokens, frames)| WorkloadPreset {
                    name: name.to_string(),
                    text_tokens,
                    visual_tokens,
                    frames,
                },
            )
            .collect()
    }

    /// Case-insensitive lookup.
    pub fn by_name(name: &str) -> Result<WorkloadPreset> {
        Self::all()
            .into_iter()
            .find(|p| p.name.eq_ignore_ascii_case(name))
            .ok_or_else(|| Error::UnknownPreset {
                name: name.to_string(),
                known: PRESET_TABLE
                    .iter()
                    .map(|p| p.0)
                    .collect::<Vec<_>>()
                    .join(", "),
            })
    }
}

/// Per-frame keep count for a named ratio preset such as `"20%"`.
pub fn keep_for_ratio_preset(name: &str) -> Result<u64> {
    KEEP_PRESETS
        .iter()
        .find(|(n, _)| *n == name.trim())
        .map(|&(_, keep)| keep)
        .ok_or_else(|| {
            Error::InvalidConfig(format!(
                "unknown ratio preset `{name}` (known: {})",
                KEEP_PRESETS
                    .iter()
                    .map(|p| p.0)
                    .collect::<Vec<_>>()
                    .join(", ")
            ))
        })
}

/// `S = T_text + T_fixed + V'`, with `v_prime` already summed over frames.
pub fn sequence_length(preset: &WorkloadPreset, dims: &ModelDims, v_prime: u64) -> Result<u64> {
    if v_prime == 0 {
        return Err(Error::InvalidConfig(
            "retained visual tokens must be positive".into(),
        ));
    }
    let available = preset.visual_tokens * preset.frames;
    if v_prime > available {
        return Err(Error::InvalidConfig(format!(
            "{v_prime} retained tokens exceed the {available} available in {}",
            preset.name
        )));
    }
    Ok(preset.text_tokens + dims.fixed_tokens + v_prime)
}

/// `L (4 S d^2 + 2 S^2 d + 2 S d d_int) + S d |V|`.
pub fn flops_lm(seq_len: u64, dims: &ModelDims) -> f64 {
    let (s, d) = (seq_len as f64, dims.d as f64);
    let attn = 3.0 * s * d * d + 2.0 * s * s * d + s * d * d;
    let ffn = 2.0 * s * d * dims.d_int as f64;
    dims.layers as f64 * (attn + ffn) + s * d * dims.vocab as f64
}

/// `L_v (6 N d_v^2 + 2 N^2 d_v) + N d_v d`.
pub fn flops_vision(dims: &ModelDims) -> f64 {
    let (n, dv) = (dims.n_patches as f64, dims.d_v as f64);
    dims.vision_layers as f64 * (6.0 * n * dv * dv + 2.0 * n * n * dv) + n * dv * dims.d as f64
}

/// `2 V d + V V' d / 10 + V' d`.
pub fn flops_prune(visual: u64, v_prime: u64, dims: &ModelDims) -> f64 {
    let (v, vp, d) = (visual as f64, v_prime as f64, dims.d as f64);
    // Single rounding: (20 V d + V V' d + 10 V' d) / 10.
    (20.0 * v * d + v * vp * d + 10.0 * vp * d) / 10.0
}

/// `L_d (12 Q d_m^2 + 2 Q^2 d_m + 2 Q V' d_m) + Q d_m V'`.
pub fn flops_mask(v_prime: u64, dims: &ModelDims) -> f64 {
    let (q, dm, vp) = (dims.queries as f64, dims.d_m as f64, v_prime as f64);
    dims.mask_layers as f64 * (12.0 * q * dm * dm + 2.0 * q * q * dm + 2.0 * q * vp * dm)
        + q * dm * vp
}

/// `L_t (Q_t F d^2 + 4 Q_t d^2)`.
pub fn flops_temporal(frames: u64, dims: &ModelDims) -> f64 {
    let (qt, d) = (dims.temporal_queries as f64, dims.d as f64);
    dims.temporal_layers as f64 * (qt * frames as f64 * d * d + 4.0 * qt * d * d)
}

/// `L_f (T_eff d d_f + V' d_v d_f + 2 T_eff V' d_f)`.
pub fn flops_vmtf(t_eff: u64, v_prime: u64, dims: &ModelDims) -> f64 {
    let (t, vp, df) = (t_eff as f64, v_prime as f64, dims.d_f as f64);
    dims.fusion_layers as f64
        * (t * dims.d as f64 * df + vp * dims.d_v as f64 * df + 2.0 * t * vp * df)
}

/// Single-expression estimate `(S + N (4 mu d^2 - 2 mu^2 d + 2 mu d D)) / 1e12`
/// where `shared` is the FLOPs of components outside the decoder, `layers` the
/// decoder depth, `d`/`ffn` its hidden and FFN sizes and `mu` the sequence length.
///
/// The quadratic attention term enters with a minus sign, as in the closed form it mirrors. The
/// component sum in [`flops_total`] is the estimate the rest of the crate uses.
pub fn tflops_maintext(shared: f64, layers: u64, d: u64, ffn: u64, mu: u64) -> f64 {
    let (n, d, ffn, mu) = (layers as f64, d as f64, ffn as f64, mu as f64);
    (shared + n * (4.0 * mu * d * d - 2.0 * mu * mu * d + 2.0 * mu * d * ffn)) / 1e12
}

/// How per-frame components are charged for multi-frame inputs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FrameAccounting {
    /// Vision, pruning, mask decoder and fusion are charged once, on per-frame `V'`.
    #[default]
    PerFrame,
    /// Those components are charged once per frame.
    AllFrames,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FlopsOptions {
    pub frame_accounting: FrameAccounting,
    /// Charge the temporal module on single-frame inputs too.
    pub temporal_for_images: bool,
}

impl Default for FlopsOptions {
    fn default() -> Self {
        Self {
            frame_accounting: FrameAccounting::PerFrame,
            temporal_for_images: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FlopsBreakdown {
    pub lm: f64,
    pub vision: f64,
    pub prune: f64,
    pub mask: f64,
    pub temporal: f64,
    pub vmtf: f64,
    pub total: f64,
    pub tflops: f64,
}

impl FlopsBreakdown {
    fn from_components(
        lm: f64,
        vision: f64,
        prune: f64,
        mask: f64,
        temporal: f64,
        vmtf: f64,
    ) -> Self {
        let total = lm + vision + prune + mask + temporal + vmtf;
        Self {
            lm,
            vision,
            prune,
            mask,
            temporal,
            vmtf,
            total,
            tflops: total * 1e-12,
        }
    }
}

/// Component-sum FLOPs of `preset` keeping `v_prime_per_frame` tokens per frame.
///
/// The LM sequence carries `V' x F` visual tokens; the fusion block uses
/// `T_eff = T_text + T_fixed`.
pub fn flops_total(
    preset: &WorkloadPreset,
    dims: &ModelDims,
    v_prime_per_frame: u64,
    opts: &FlopsOptions,
) -> Result<FlopsBreakdown> {
    if v_prime_per_frame > preset.visual_tokens {
        return Err(Error::InvalidConfig(format!(
            "keep {v_prime_per_frame} exceeds the {} tokens per frame of {}",
            preset.visual_tokens, preset.name
        )));
    }
    let seq_len = sequence_length(preset, dims, v_prime_per_frame * preset.frames)?;
    let per_frame_mult = match opts.frame_accounting {
        FrameAccounting::PerFrame => 1.0,
        FrameAccounting::AllFrames => preset.frames as f64,
    };
    let temporal = if preset.frames > 1 || opts.temporal_for_images {
        flops_temporal(preset.frames, dims)
    } else {
        0.0
    };
    let t_eff = preset.text_tokens + dims.fixed_tokens;
    Ok(FlopsBreakdown::from_components(
        flops_lm(seq_len, dims),
        per_frame_mult * flops_vision(dims),
        per_frame_mult * flops_prune(preset.visual_tokens, v_prime_per_frame, dims),
        per_frame_mult * flops_mask(v_prime_per_frame, dims),
        temporal,
        per_frame_mult * flops_vmtf(t_eff, v_prime_per_frame, dims),
    ))
}

/// One `(preset, keep)` line of a FLOPs table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlopsRow {
    pub preset: String,
    pub keep: u64,
    #[serde(flatten)]
    pub breakdown: FlopsBreakdown,
    /// Unpruned total over this total.
    pub reduction: f64,
    /// Reference TFLOPs for this setting, where one exists.
    pub reference_tflops: Option<f64>,
}

/// Reference TFLOPs figures: `(preset, keep, tflops)`.
pub const REFERENCE_TFLOPS: [(&str, u64, f64); 8] = [
    ("RefCOCO", 729, 2.376),
    ("RefCOCO", 146, 0.724),
    ("RefCOCO", 73, 0.525),
    ("RefCOCO", 36, 0.447),
    ("ReVOS", 729, 9.609),
    ("ReVOS", 146, 1.989),
    ("ReVOS", 73, 1.161),
    ("ReVOS", 36, 0.751),
];

pub fn reference_tflops(preset: &str, keep: u64) -> Option<f64> {
    REFERENCE_TFLOPS
        .iter()
        .find(|(p, k, _)| p.eq_ignore_ascii_case(preset) && *k == keep)
        .map(|r| r.2)
}

pub fn flops_row(
    preset: &WorkloadPreset,
    dims: &ModelDims,
    keep: u64,
    opts: &FlopsOptions,
) -> Result<FlopsRow> {
    let breakdown = flops_total(preset, dims, keep, opts)?;
    let full = flops_total(preset, dims, preset.visual_tokens, opts)?;
    Ok(FlopsRow {
        preset: preset.name.clone(),
        keep,
        reduction: full.total / breakdown.total,
        reference_tflops: reference_tflops(&preset.name, keep),
        breakdown,
    })
}

/// Every preset at every keep count in `keeps`, preset-major.
pub fn flops_table(dims: &ModelDims, keeps: &[u64], opts: &FlopsOptions) -> Result<Vec<FlopsRow>> {
    WorkloadPreset::all()
        .iter()
        .flat_map(|p| keeps.iter().map(move |&k| flops_row(p, dims, k, opts)))
        .collect()
}

pub const FLOPS_CSV_HEADER: [&str; 12] = [
    "preset",
    "keep",
    "lm",
    "vision",
    "prune",
    "mask",
    "temporal",
    "vmtf",
    "total",
    "tflops",
    "reduction",
    "reference_tflops",
];

pub fn flops_csv(rows: &[FlopsRow]) -> Result<String> {
    let mut out = csv::Writer::from_writer(Vec::new());
    out.write_record(FLOPS_CSV_HEADER)?;
    for r in rows {
        let b = &r.breakdown;
        out.write_record([
            r.preset.clone(),
            r.keep.to_string(),
            b.lm.to_string(),
            b.vision.to_string(),
            b.prune.to_string(),
            b.mask.to_string(),
            b.temporal.to_string(),
            b.vmtf.to_string(),
            b.total.to_string(),
            format!("{:.6}", b.tflops),
            format!("{:.6}", r.reduction),
            r.reference_tflops
                .map(|t| t.to_string())
                .unwrap_or_default(),
        ])?;
    }
    Ok(
        String::from_utf8(out.into_inner().map_err(|e| e.into_error())?)
            .expect("csv output is utf-8"),
    )
}
