//! Minimal three-point absolute pose.
//!
//! Grunert's formulation: unknown distances `s_k` along unit bearings satisfy
//! three law-of-cosines constraints. Writing `s2 = u·s1`, `s3 = v·s1` gives two
//! quadratics in `u` whose coefficients are polynomials in `v`; their
//! resultant is a quartic in `v`.

use nalgebra::{Matrix3, Matrix4, Vector3};

type Poly = [f64; 5];

fn mul(a: &Poly, b: &Poly) -> Poly {
    let mut out = [0.0; 5];
    for (i, &x) in a.iter().enumerate() {
        if x == 0.0 {
            continue;
        }
        for (j, &y) in b.iter().enumerate() {
            if i + j < 5 {
                out[i + j] += x * y;
            } else {
                debug_assert!(y == 0.0);
            }
        }
    }
    out
}

fn sub(a: &Poly, b: &Poly) -> Poly {
    std::array::from_fn(|k| a[k] - b[k])
}

fn scale(a: &Poly, s: f64) -> Poly {
    a.map(|x| x * s)
}

fn eval(p: &Poly, x: f64) -> f64 {
    p.iter().rev().fold(0.0, |acc, &c| acc * x + c)
}

fn eval_deriv(p: &Poly, x: f64) -> f64 {
    (1..5).rev().fold(0.0, |acc, k| acc * x + k as f64 * p[k])
}

/// Real roots of a quartic (coefficients low to high), polished by Newton.
fn quartic_real_roots(p: &Poly) -> Vec<f64> {
    let lead = p[4];
    if lead.abs() < 1e-300 {
        return Vec::new();
    }
    let c: Vec<f64> = p.iter().map(|x| x / lead).collect();
    let companion = Matrix4::new(
        0.0, 0.0, 0.0, -c[0], //
        1.0, 0.0, 0.0, -c[1], //
        0.0, 1.0, 0.0, -c[2], //
        0.0, 0.0, 1.0, -c[3],
    );
    let mut roots = Vec::with_capacity(4);
    for z in companion.complex_eigenvalues().iter() {
        if z.im.abs() > 1e-6 * (1.0 + z.re.abs()) {
            continue;
        }
        let mut x = z.re;
        for _ in 0..8 {
            let d = eval_deriv(p, x);
            if d == 0.0 {
                break;
            }
            let step = eval(p, x) / d;
            x -= step;
            if step.abs() <= 1e-15 * (1.0 + x.abs()) {
                break;
            }
        }
        if x.is_finite() {
            roots.push(x);
        }
    }
    roots
}

/// Rigid transform `(R, t)` with `q_k ≈ R p_k + t` in least squares.
pub(crate) fn kabsch(p: &[Vector3<f64>], q: &[Vector3<f64>]) -> Option<(Matrix3<f64>, Vector3<f64>)> {
    let n = p.len() as f64;
    if p.is_empty() || p.len() != q.len() {
        return None;
    }
    let pc = p.iter().sum::<Vector3<f64>>() / n;
    let qc = q.iter().sum::<Vector3<f64>>() / n;
    let mut h = Matrix3::zeros();
    for (a, b) in p.iter().zip(q) {
        h += (b - qc) * (a - pc).transpose();
    }
    let svd = h.svd(true, true);
    let (u, v_t) = (svd.u?, svd.v_t?);
    let mut s = Matrix3::identity();
    if (u * v_t).determinant() < 0.0 {
        s[(2, 2)] = -1.0;
    }
    let r = u * s * v_t;
    Some((r, qc - r * pc))
}

/// Up to four camera poses `(R, t)` with `s_k b_k = R p_k + t`, where `b_k`
/// are unit bearings and `p_k` world points.
pub fn solve(world: &[Vector3<f64>; 3], bearings: &[Vector3<f64>; 3]) -> Vec<(Matrix3<f64>, Vector3<f64>)> {
    let a2 = (world[1] - world[2]).norm_squared();
    let b2 = (world[0] - world[2]).norm_squared();
    let c2 = (world[0] - world[1]).norm_squared();
    if a2 < 1e-24 || b2 < 1e-24 || c2 < 1e-24 {
        return Vec::new();
    }
    let j: [Vector3<f64>; 3] = bearings.map(|b| b.normalize());
    let cos_alpha = j[1].dot(&j[2]);
    let cos_beta = j[0].dot(&j[2]);
    let cos_gamma = j[0].dot(&j[1]);

    // g(v) = 1 + v² − 2 v cos β
    let g: Poly = [1.0, -2.0 * cos_beta, 1.0, 0.0, 0.0];
    // (A): b² u² − 2 b² cos γ u + [b² − c² g(v)]
    let a_2 = b2;
    let a_1: Poly = [-2.0 * b2 * cos_gamma, 0.0, 0.0, 0.0, 0.0];
    let a_0: Poly = sub(&[b2, 0.0, 0.0, 0.0, 0.0], &scale(&g, c2));
    // (B): b² u² − 2 b² v cos α u + [b² v² − a² g(v)]
    let b_2 = b2;
    let b_1: Poly = [0.0, -2.0 * b2 * cos_alpha, 0.0, 0.0, 0.0];
    let b_0: Poly = sub(&[0.0, 0.0, b2, 0.0, 0.0], &scale(&g, a2));

    // resultant of two quadratics in u
    let t1 = sub(&scale(&b_0, a_2), &scale(&a_0, b_2));
    let t2 = sub(&scale(&b_1, a_2), &scale(&a_1, b_2));
    let t3 = sub(&mul(&a_1, &b_0), &mul(&a_0, &b_1));
    let quartic = sub(&mul(&t1, &t1), &mul(&t2, &t3));

    let world_pts = world.to_vec();
    let mut out = Vec::new();
    for v in quartic_real_roots(&quartic) {
        if v <= 0.0 {
            continue;
        }
        let denom = eval(&a_1, v) - eval(&b_1, v);
        if denom.abs() < 1e-14 * b2 {
            continue;
        }
        let u = (eval(&b_0, v) - eval(&a_0, v)) / denom;
        if u <= 0.0 {
            continue;
        }
        let gv = eval(&g, v);
        if gv <= 0.0 {
            continue;
        }
        let s1 = (b2 / gv).sqrt();
        let cam = vec![j[0] * s1, j[1] * (u * s1), j[2] * (v * s1)];
        if let Some(pose) = kabsch(&world_pts, &cam) {
            out.push(pose);
        }
    }
    out
}
