use crate::tensor::Tensor3;

/// Result of projecting onto the feasible dictionary set.
#[derive(Debug, Clone)]
pub struct Projection {
    pub tensor: Tensor3,
    pub iterations: usize,
    pub converged: bool,
}

/// Metric projection onto `{D ≥ 0, ‖D(:, i, :)‖_F ≤ √(pr) for every i}`.
///
/// Dykstra's alternating projections between the non-negative orthant and the
/// product of per-slice Frobenius balls. Stops once successive iterates differ
/// by less than `tol` in Frobenius norm.
pub fn project_onto_dictionary_set(t: &Tensor3, max_iter: usize, tol: f64) -> Projection {
    let (p, _, r) = t.dims();
    let radius = ((p * r) as f64).sqrt();
    let mut x = t.clone();
    let mut inc_orthant = Tensor3::zeros(t.dims().0, t.dims().1, t.dims().2);
    let mut inc_ball = inc_orthant.clone();
    for it in 1..=max_iter.max(1) {
        let prev = x.clone();

        // y = P_orthant(x + p); p ← x + p − y
        let shifted = &x + &inc_orthant;
        let y = shifted.map(|v| v.max(0.0));
        inc_orthant = &shifted - &y;

        // x = P_balls(y + q); q ← y + q − x
        let shifted = &y + &inc_ball;
        x = project_balls(&shifted, radius);
        inc_ball = &shifted - &x;

        if (&x - &prev).fro_norm() < tol {
            return Projection {
                tensor: x,
                iterations: it,
                converged: true,
            };
        }
    }
    Projection {
        tensor: x,
        iterations: max_iter.max(1),
        converged: false,
    }
}

/// Radially rescales each lateral slice whose norm exceeds `radius`.
fn project_balls(t: &Tensor3, radius: f64) -> Tensor3 {
    let (l, m, n) = t.dims();
    let mut out = t.clone();
    for j in 0..m {
        let norm = t.lateral_norm(j);
        if norm > radius {
            let s = radius / norm;
            for k in 0..n {
                for i in 0..l {
                    out.set(i, j, k, t.get(i, j, k) * s);
                }
            }
        }
    }
    out
}
