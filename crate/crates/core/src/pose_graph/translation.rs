//! Linear translation averaging with a hard anchor on the first graph frame.

use super::linsolve::BlockSystem;
use super::{GraphError, PoseGraph};
use nalgebra::{DMatrix, Matrix3, Vector3};

#[derive(Debug, Clone, PartialEq)]
pub struct TranslationAveraging {
    /// Camera positions in the anchor frame; zero for frames outside the graph.
    pub positions: Vec<Vector3<f64>>,
    /// Relative residual of the solved normal equations.
    pub normal_residual: f64,
    /// The system was singular beyond the anchor; a least-norm solution was used.
    pub rank_deficient: bool,
    pub objective: f64,
}

/// `Σ k_ij ‖R_i t̂_ij − (t_j − t_i)‖²`.
pub fn translation_objective(
    g: &PoseGraph,
    rotations: &[Matrix3<f64>],
    positions: &[Vector3<f64>],
) -> f64 {
    g.edges()
        .iter()
        .map(|e| {
            let r = rotations[e.from] * e.translation - (positions[e.to] - positions[e.from]);
            e.weight * r.norm_squared()
        })
        .sum()
}

/// Positions minimizing the translation objective given absolute rotations
/// (camera-to-reference, as returned by rotation averaging). The
/// lowest-indexed frame in the graph is pinned to the origin.
pub fn translation_averaging(
    g: &PoseGraph,
    rotations: &[Matrix3<f64>],
) -> Result<TranslationAveraging, GraphError> {
    g.check_connected()?;
    if rotations.len() != g.n_frames() {
        return Err(GraphError::RotationCount {
            expected: g.n_frames(),
            actual: rotations.len(),
        });
    }
    let active = g.incident_frames();
    let frames: Vec<usize> = (0..g.n_frames()).filter(|&v| active[v]).collect();
    let mut index = vec![usize::MAX; g.n_frames()];
    for (c, &f) in frames.iter().enumerate() {
        index[f] = c;
    }

    // unknown block c-1 holds the position of compact vertex c; c = 0 is pinned
    let mut sys = BlockSystem::new(frames.len() - 1, 1);
    let eye = Matrix3::identity();
    for e in g.edges() {
        let k = e.weight;
        if k == 0.0 {
            continue;
        }
        let (ci, cj) = (index[e.from], index[e.to]);
        let m = rotations[e.from] * e.translation * k;
        let md = DMatrix::from_column_slice(3, 1, m.as_slice());
        if ci > 0 {
            sys.add_block(ci - 1, ci - 1, &(eye * k));
            sys.add_rhs(ci - 1, &(-&md));
        }
        if cj > 0 {
            sys.add_block(cj - 1, cj - 1, &(eye * k));
            sys.add_rhs(cj - 1, &md);
        }
        if ci > 0 && cj > 0 {
            sys.add_block(ci - 1, cj - 1, &(-eye * k));
            sys.add_block(cj - 1, ci - 1, &(-eye * k));
        }
    }
    let sol = sys.solve();
    if sol.rank_deficient {
        log::warn!("translation system is rank deficient beyond the anchor; using least-norm solution");
    }
    let mut positions = vec![Vector3::zeros(); g.n_frames()];
    for (c, &f) in frames.iter().enumerate().skip(1) {
        positions[f] = Vector3::new(
            sol.x[(3 * (c - 1), 0)],
            sol.x[(3 * (c - 1) + 1, 0)],
            sol.x[(3 * (c - 1) + 2, 0)],
        );
    }
    let objective = translation_objective(g, rotations, &positions);
    Ok(TranslationAveraging {
        positions,
        normal_residual: sol.residual,
        rank_deficient: sol.rank_deficient,
        objective,
    })
}
