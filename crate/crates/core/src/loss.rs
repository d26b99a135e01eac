//! Scale-normalized pointmap regression loss and its confidence-weighted form.
//!
//! Both losses act on a pair of views expressed in the first view's frame.
//! The valid domain of each view is the intersection of the predicted and
//! ground-truth masks; every reduction uses pairwise summation so results do
//! not depend on traversal order.

use crate::geometry::Pointmap;
use thiserror::Error;

/// Default weight of the `-α log C` confidence regularizer.
pub const DEFAULT_ALPHA: f64 = 0.2;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LossError {
    #[error("no valid pixels in either view")]
    EmptyDomain,
    #[error("normalization factor is {0}, cannot rescale")]
    DegenerateScale(f64),
    #[error("view {view}: predicted is {pred:?}, ground truth is {gt:?}")]
    ShapeMismatch {
        view: usize,
        pred: (usize, usize),
        gt: (usize, usize),
    },
    #[error("raw confidence grid for view {view} has {actual} entries, expected {expected}")]
    ConfidenceShape {
        view: usize,
        expected: usize,
        actual: usize,
    },
    #[error("raw confidence at view {view}, pixel {index} is not finite ({value})")]
    NonFiniteConfidence { view: usize, index: usize, value: f64 },
    #[error("alpha must be finite and non-negative, got {0}")]
    Alpha(f64),
}

/// Sum with recursive halving; deterministic for a given slice.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    const BLOCK: usize = 32;
    if xs.len() <= BLOCK {
        xs.iter().sum()
    } else {
        let (a, b) = xs.split_at(xs.len() / 2);
        pairwise_sum(a) + pairwise_sum(b)
    }
}

fn mean_norm(views: [(&Pointmap, &[bool]); 2]) -> Result<f64, LossError> {
    let norms: Vec<f64> = views
        .iter()
        .flat_map(|(pm, dom)| {
            pm.points()
                .iter()
                .zip(dom.iter())
                .filter(|(_, &m)| m)
                .map(|(p, _)| p.norm())
        })
        .collect();
    if norms.is_empty() {
        return Err(LossError::EmptyDomain);
    }
    Ok(pairwise_sum(&norms) / norms.len() as f64)
}

/// Mean distance of all masked-in points of both maps from the origin.
pub fn norm_factor(pm1: &Pointmap, pm2: &Pointmap) -> Result<f64, LossError> {
    mean_norm([(pm1, pm1.mask()), (pm2, pm2.mask())])
}

/// Predicted and ground-truth pointmaps for views 1 and 2, both in view 1's frame.
#[derive(Debug, Clone)]
pub struct PointmapPairBatch {
    predicted: [Pointmap; 2],
    ground_truth: [Pointmap; 2],
    domains: [Vec<bool>; 2],
    alpha: f64,
}

impl PointmapPairBatch {
    pub fn new(
        predicted: [Pointmap; 2],
        ground_truth: [Pointmap; 2],
        alpha: f64,
    ) -> Result<Self, LossError> {
        if !(alpha.is_finite() && alpha >= 0.0) {
            return Err(LossError::Alpha(alpha));
        }
        for view in 0..2 {
            let (p, g) = (&predicted[view], &ground_truth[view]);
            if (p.width(), p.height()) != (g.width(), g.height()) {
                return Err(LossError::ShapeMismatch {
                    view,
                    pred: (p.width(), p.height()),
                    gt: (g.width(), g.height()),
                });
            }
        }
        let domains = [0, 1].map(|v| {
            predicted[v]
                .mask()
                .iter()
                .zip(ground_truth[v].mask())
                .map(|(&a, &b)| a && b)
                .collect::<Vec<_>>()
        });
        Ok(Self {
            predicted,
            ground_truth,
            domains,
            alpha,
        })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn predicted(&self) -> &[Pointmap; 2] {
        &self.predicted
    }

    pub fn ground_truth(&self) -> &[Pointmap; 2] {
        &self.ground_truth
    }

    /// Valid-pixel set of a view: predicted mask ∧ ground-truth mask.
    pub fn domain(&self, view: usize) -> &[bool] {
        &self.domains[view]
    }

    /// `(z, z̄)`: normalization factors of the predicted and ground-truth pairs.
    pub fn scale_factors(&self) -> Result<(f64, f64), LossError> {
        let d = &self.domains;
        let z = mean_norm([
            (&self.predicted[0], &d[0]),
            (&self.predicted[1], &d[1]),
        ])?;
        let z_bar = mean_norm([
            (&self.ground_truth[0], &d[0]),
            (&self.ground_truth[1], &d[1]),
        ])?;
        for s in [z, z_bar] {
            if !(s.is_finite() && s > 0.0) {
                return Err(LossError::DegenerateScale(s));
            }
        }
        Ok((z, z_bar))
    }
}

/// Per-pixel regression loss of one view. Excluded pixels hold 0.
#[derive(Debug, Clone, PartialEq)]
pub struct LossGrid {
    pub width: usize,
    pub height: usize,
    pub values: Vec<f64>,
    pub included: Vec<bool>,
}

/// `‖X/z − X̄/z̄‖` on every valid pixel of both views.
pub fn regr_loss(batch: &PointmapPairBatch) -> Result<[LossGrid; 2], LossError> {
    let (z, z_bar) = batch.scale_factors()?;
    Ok([0, 1].map(|v| {
        let pred = &batch.predicted[v];
        let gt = &batch.ground_truth[v];
        let dom = &batch.domains[v];
        let values = pred
            .points()
            .iter()
            .zip(gt.points())
            .zip(dom)
            .map(|((p, g), &m)| if m { (p / z - g / z_bar).norm() } else { 0.0 })
            .collect();
        LossGrid {
            width: pred.width(),
            height: pred.height(),
            values,
            included: dom.clone(),
        }
    }))
}

/// Effective confidence `1 + exp(raw)`.
pub fn effective_confidence(raw: f64) -> f64 {
    1.0 + raw.exp()
}

/// `Σ_v Σ_i C_i ℓ_regr(v, i) − α log C_i` with `C = 1 + exp(C̃)`, summed
/// (not averaged) over valid pixels.
pub fn conf_loss(batch: &PointmapPairBatch, raw_conf: [&[f64]; 2]) -> Result<f64, LossError> {
    for (view, raw) in raw_conf.iter().enumerate() {
        let expected = batch.predicted[view].len();
        if raw.len() != expected {
            return Err(LossError::ConfidenceShape {
                view,
                expected,
                actual: raw.len(),
            });
        }
        if let Some((index, &value)) = raw.iter().enumerate().find(|(_, c)| !c.is_finite()) {
            return Err(LossError::NonFiniteConfidence { view, index, value });
        }
    }
    let grids = regr_loss(batch)?;
    let alpha = batch.alpha;
    let terms: Vec<f64> = grids
        .iter()
        .zip(raw_conf)
        .flat_map(|(g, raw)| {
            g.values
                .iter()
                .zip(&g.included)
                .zip(raw)
                .filter(|((_, &m), _)| m)
                .map(move |((&l, _), &r)| {
                    let c = effective_confidence(r);
                    // ln(1 + e^r) computed without cancellation for very negative r
                    let log_c = r.exp().ln_1p();
                    c * l - alpha * log_c
                })
        })
        .collect();
    Ok(pairwise_sum(&terms))
}
