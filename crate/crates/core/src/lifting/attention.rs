//! Single-head cross-attention from a voxel query to sampled image features.
//!
//! A strategy decides where to sample; aggregation is shared. Logits come
//! from a linear map of the query, the softmax runs jointly over every
//! sample on every level, and each sample is projected by its level's value
//! matrix before the weighted sum.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::geometry::Point2;
use crate::registry::Registry;
use crate::seeded;
use crate::vpsampler::{clamp_to, multi_scale_samples, SamplerConfig, LEVEL_STRIDES};

use super::pyramid::{bilinear_sample_into, FeaturePyramid};

/// Seeded attention parameters. Matrices are row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct AttentionWeights {
    pub channels: usize,
    pub num_points: usize,
    /// `C × N`: logit `n` is `Σ_c query[c] · m[c·N + n]`.
    pub query_to_logits: Vec<f64>,
    /// Per level, `C × C` with `out[i] = Σ_j m[i·C + j] · in[j]`.
    pub value_proj: [Vec<f64>; 3],
    /// `C × 2N` offset head, present for strategies that learn offsets.
    pub offset_proj: Option<Vec<f64>>,
    pub seed: u64,
}

impl AttentionWeights {
    /// Streams: 0 logits, 1–3 value projections, 4 offsets. All entries are
    /// uniform in `±1/√C`.
    pub fn seeded(seed: u64, channels: usize, num_points: usize, with_offsets: bool) -> Self {
        let bound = 1.0 / (channels.max(1) as f64).sqrt();
        let c2 = channels * channels;
        Self {
            channels,
            num_points,
            query_to_logits: seeded::uniform(seed, 0, channels * num_points, bound),
            value_proj: [1, 2, 3].map(|s| seeded::uniform(seed, s, c2, bound)),
            offset_proj: with_offsets
                .then(|| seeded::uniform(seed, 4, channels * 2 * num_points, bound)),
            seed,
        }
    }

    /// Replaces every value projection with the identity.
    pub fn with_identity_values(mut self) -> Self {
        let c = self.channels;
        let id: Vec<f64> = (0..c * c).map(|i| if i / c == i % c { 1.0 } else { 0.0 }).collect();
        self.value_proj = [id.clone(), id.clone(), id];
        self
    }

    pub fn logits(&self, query: &[f64]) -> Vec<f64> {
        let n = self.num_points;
        let mut out = vec![0.0; n];
        for (c, &q) in query.iter().enumerate() {
            let row = &self.query_to_logits[c * n..(c + 1) * n];
            for (o, &m) in out.iter_mut().zip(row) {
                *o += q * m;
            }
        }
        out
    }

    fn check(&self, query: &[f64], pyramid: &FeaturePyramid) -> Result<()> {
        if query.len() != self.channels || pyramid.channels() != self.channels {
            return Err(Error::DimensionMismatch(format!(
                "query width {}, pyramid channels {}, weights channels {}",
                query.len(),
                pyramid.channels(),
                self.channels
            )));
        }
        Ok(())
    }
}

pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&l| (l - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

/// A sampling location on one pyramid level.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Sample {
    pub level: usize,
    pub point: Point2,
}

#[derive(Clone, Debug, PartialEq)]
pub struct AttentionOutput {
    pub value: Vec<f64>,
    /// Softmax weights, one per sample.
    pub weights: Vec<f64>,
    pub samples: Vec<Sample>,
}

/// Aggregates `samples` with explicit logits.
pub fn attend_with_logits(
    logits: &[f64],
    samples: &[Sample],
    pyramid: &FeaturePyramid,
    w: &AttentionWeights,
) -> Result<AttentionOutput> {
    if logits.len() != samples.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} logits for {} samples",
            logits.len(),
            samples.len()
        )));
    }
    let c = w.channels;
    let weights = softmax(logits);
    // Weighted sum per level first; projection is linear so it can be applied once per level.
    let mut per_level = [vec![0.0; c], vec![0.0; c], vec![0.0; c]];
    let mut feat = vec![0.0; c];
    for (s, &a) in samples.iter().zip(&weights) {
        bilinear_sample_into(pyramid.level(s.level), s.point, &mut feat);
        for (acc, f) in per_level[s.level].iter_mut().zip(&feat) {
            *acc += a * f;
        }
    }
    let mut value = vec![0.0; c];
    for (proj, acc) in w.value_proj.iter().zip(&per_level) {
        for (i, v) in value.iter_mut().enumerate() {
            let row = &proj[i * c..(i + 1) * c];
            *v += row.iter().zip(acc).map(|(m, x)| m * x).sum::<f64>();
        }
    }
    Ok(AttentionOutput {
        value,
        weights,
        samples: samples.to_vec(),
    })
}

/// Where a lifting strategy samples image features for one query.
pub trait AttentionLifter: Send + Sync {
    fn name(&self) -> &'static str;

    /// Total samples across all levels; the width of the logit head.
    fn num_points(&self) -> usize;

    fn uses_offsets(&self) -> bool;

    /// Sampling locations for a query whose reference point is `r_full`
    /// (full-image pixels).
    fn sample_locations(
        &self,
        query: &[f64],
        r_full: Point2,
        vp_full: Point2,
        pyramid: &FeaturePyramid,
        w: &AttentionWeights,
    ) -> Result<Vec<Sample>>;

    fn attend(
        &self,
        query: &[f64],
        r_full: Point2,
        vp_full: Point2,
        pyramid: &FeaturePyramid,
        w: &AttentionWeights,
    ) -> Result<AttentionOutput> {
        w.check(query, pyramid)?;
        if w.num_points != self.num_points() {
            return Err(Error::DimensionMismatch(format!(
                "{} expects {} attention points, weights have {}",
                self.name(),
                self.num_points(),
                w.num_points
            )));
        }
        let samples = self.sample_locations(query, r_full, vp_full, pyramid, w)?;
        attend_with_logits(&w.logits(query), &samples, pyramid, w)
    }

    fn seeded_weights(&self, seed: u64, channels: usize) -> AttentionWeights {
        AttentionWeights::seeded(seed, channels, self.num_points(), self.uses_offsets())
    }
}

/// Vanishing-point guided sampling: nine geometric points per level.
#[derive(Clone, Debug, Default)]
pub struct VpGuided {
    pub sampler: SamplerConfig,
}

impl AttentionLifter for VpGuided {
    fn name(&self) -> &'static str {
        "vpca"
    }

    fn num_points(&self) -> usize {
        27
    }

    fn uses_offsets(&self) -> bool {
        false
    }

    fn sample_locations(
        &self,
        _query: &[f64],
        r_full: Point2,
        vp_full: Point2,
        pyramid: &FeaturePyramid,
        _w: &AttentionWeights,
    ) -> Result<Vec<Sample>> {
        let sets = multi_scale_samples(vp_full, r_full, &pyramid.level_dims(), &self.sampler)?;
        Ok(sets
            .iter()
            .flat_map(|s| s.points.iter().map(move |&point| Sample { level: s.level, point }))
            .collect())
    }
}

/// Deformable sampling: per-level offsets predicted from the query,
/// `tanh(query · offset_proj) · max_offset`, added to the reference point.
#[derive(Clone, Debug)]
pub struct Deformable {
    pub points_per_level: usize,
    /// Offset range in feature-map pixels.
    pub max_offset: f64,
}

impl Default for Deformable {
    fn default() -> Self {
        Self {
            points_per_level: 9,
            max_offset: 4.0,
        }
    }
}

impl AttentionLifter for Deformable {
    fn name(&self) -> &'static str {
        "dca"
    }

    fn num_points(&self) -> usize {
        3 * self.points_per_level
    }

    fn uses_offsets(&self) -> bool {
        true
    }

    fn sample_locations(
        &self,
        query: &[f64],
        r_full: Point2,
        _vp_full: Point2,
        pyramid: &FeaturePyramid,
        w: &AttentionWeights,
    ) -> Result<Vec<Sample>> {
        let proj = w
            .offset_proj
            .as_ref()
            .ok_or_else(|| Error::InvalidArgument("deformable attention needs offset weights".into()))?;
        let n2 = 2 * self.num_points();
        if proj.len() != query.len() * n2 {
            return Err(Error::DimensionMismatch("offset projection size".into()));
        }
        let mut raw = vec![0.0; n2];
        for (c, &q) in query.iter().enumerate() {
            for (o, &m) in raw.iter_mut().zip(&proj[c * n2..(c + 1) * n2]) {
                *o += q * m;
            }
        }
        let dims = pyramid.level_dims();
        Ok((0..self.num_points())
            .map(|j| {
                let level = j / self.points_per_level;
                let r = r_full.scale(1.0 / LEVEL_STRIDES[level] as f64);
                let p = Point2::new(
                    r.x + raw[2 * j].tanh() * self.max_offset,
                    r.y + raw[2 * j + 1].tanh() * self.max_offset,
                );
                let (lw, lh) = dims[level];
                Sample {
                    level,
                    point: clamp_to(p, lw, lh),
                }
            })
            .collect())
    }
}

#[derive(Clone, Debug, Default)]
pub struct LifterParams {
    pub sampler: SamplerConfig,
    pub deformable: Deformable,
}

/// Strategies available to [`super::lift_volume`], keyed by name.
pub fn lifter_registry(params: &LifterParams) -> Registry<dyn AttentionLifter> {
    let mut r: Registry<dyn AttentionLifter> = Registry::new("attention lifter");
    r.register(
        "vpca",
        Arc::new(VpGuided {
            sampler: params.sampler.clone(),
        }),
    );
    r.register("dca", Arc::new(params.deformable.clone()));
    r
}

/// VP-guided attention over the original-image pyramid.
pub fn vpca(
    query: &[f64],
    r_full: Point2,
    vp_full: Point2,
    pyramid: &FeaturePyramid,
    w: &AttentionWeights,
    sampler: &SamplerConfig,
) -> Result<Vec<f64>> {
    let lifter = VpGuided {
        sampler: sampler.clone(),
    };
    Ok(lifter.attend(query, r_full, vp_full, pyramid, w)?.value)
}

/// Deformable attention over the zoom-image pyramid.
pub fn dca(
    query: &[f64],
    r_full: Point2,
    pyramid: &FeaturePyramid,
    w: &AttentionWeights,
    points_per_level: usize,
    max_offset: f64,
) -> Result<Vec<f64>> {
    let lifter = Deformable {
        points_per_level,
        max_offset,
    };
    Ok(lifter.attend(query, r_full, r_full, pyramid, w)?.value)
}
