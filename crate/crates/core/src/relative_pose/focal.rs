use super::RelativePoseError;
use crate::geometry::Pointmap;

const MAX_ITERATIONS: usize = 200;
const MIN_PIXELS: usize = 8;

/// Outcome of [`estimate_focal`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FocalEstimate {
    pub focal: f64,
    pub iterations: usize,
    /// False when the iteration cap was hit; `focal` is then the best iterate.
    pub converged: bool,
}

/// Focal length of a camera-frame pointmap with the principal point at the
/// image center.
///
/// Minimizes `Σ ‖(u − c_x, v − c_y) − f·(x/z, y/z)‖` by Weiszfeld iterations
/// started from the median of per-pixel ratios.
pub fn estimate_focal(pm: &Pointmap) -> Result<FocalEstimate, RelativePoseError> {
    let cx = pm.width() as f64 / 2.0;
    let cy = pm.height() as f64 / 2.0;
    let mut obs = Vec::new();
    for (idx, p) in pm.valid_points() {
        if !(p.z > 0.0 && p.z.is_finite()) || (p.x == 0.0 && p.y == 0.0) {
            continue;
        }
        let (i, j) = pm.pixel(idx);
        let pix = (i as f64 - cx, j as f64 - cy);
        if pix == (0.0, 0.0) {
            continue;
        }
        let ray = (p.x / p.z, p.y / p.z);
        if !(ray.0.is_finite() && ray.1.is_finite()) {
            continue;
        }
        obs.push((pix, ray));
    }
    if obs.len() < MIN_PIXELS {
        return Err(RelativePoseError::InsufficientData {
            needed: MIN_PIXELS,
            available: obs.len(),
        });
    }

    let mut ratios: Vec<f64> = obs
        .iter()
        .map(|((px, py), (rx, ry))| px.hypot(*py) / rx.hypot(*ry))
        .collect();
    ratios.sort_by(f64::total_cmp);
    let mid = ratios.len() / 2;
    let mut f = if ratios.len() % 2 == 1 {
        ratios[mid]
    } else {
        0.5 * (ratios[mid - 1] + ratios[mid])
    };

    let objective = |f: f64| -> f64 {
        obs.iter()
            .map(|((px, py), (rx, ry))| (px - f * rx).hypot(py - f * ry))
            .sum()
    };
    let mut best = (objective(f), f);
    let mut prev_step = f64::INFINITY;
    for it in 1..=MAX_ITERATIONS {
        let (mut num, mut den) = (0.0, 0.0);
        for ((px, py), (rx, ry)) in &obs {
            let r = (px - f * rx).hypot(py - f * ry);
            let w = 1.0 / r.max(1e-9);
            num += w * (px * rx + py * ry);
            den += w * (rx * rx + ry * ry);
        }
        let next = num / den;
        let cost = objective(next);
        if cost < best.0 {
            best = (cost, next);
        }
        let step = (next - f).abs();
        f = next;
        // linear convergence at rate rho leaves about step·rho/(1 − rho)
        let rho = step / prev_step;
        let remaining = if it > 1 && rho < 1.0 { step * rho / (1.0 - rho) } else { step };
        prev_step = step;
        if remaining <= 1e-13 * f.abs() {
            return Ok(FocalEstimate {
                focal: settle(f, best, &objective),
                iterations: it,
                converged: true,
            });
        }
    }
    log::warn!("focal estimation did not converge in {MAX_ITERATIONS} iterations");
    Ok(FocalEstimate {
        focal: settle(f, best, &objective),
        iterations: MAX_ITERATIONS,
        converged: false,
    })
}

/// The last iterate, unless an earlier one is cheaper beyond round-off.
fn settle(f: f64, best: (f64, f64), objective: &impl Fn(f64) -> f64) -> f64 {
    let cost = objective(f);
    if best.0 < cost - 1e-12 * cost {
        best.1
    } else {
        f
    }
}
