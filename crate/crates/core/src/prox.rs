//! Proximal operators and Euclidean projections.

use crate::linalg::Vector;

/// Coordinatewise soft-threshold by `t * lambda`.
pub fn prox_l1(v: &Vector, t: f64, lambda: f64) -> Vector {
    let k = t * lambda;
    Vector::from_raw(v.iter().map(|&x| x.signum() * (x.abs() - k).max(0.0)).collect())
}

/// Projection onto `{u : u >= 0, Σu = 1}` by sort-and-threshold.
pub fn project_simplex(v: &Vector) -> Vector {
    assert!(!v.is_empty(), "simplex projection of an empty vector");
    let mut sorted = v.as_slice().to_vec();
    // stable descending
    sorted.sort_by(|a, b| b.total_cmp(a));
    let mut cumsum = 0.0;
    let mut theta = 0.0;
    for (j, &u) in sorted.iter().enumerate() {
        cumsum += u;
        let t = (cumsum - 1.0) / (j + 1) as f64;
        if u - t > 0.0 {
            theta = t;
        }
    }
    Vector::from_raw(v.iter().map(|&x| (x - theta).max(0.0)).collect())
}

pub fn project_linf_ball(v: &Vector, r: f64) -> Vector {
    Vector::from_raw(v.iter().map(|&x| x.clamp(-r, r)).collect())
}

pub fn project_l2_ball(v: &Vector, r: f64) -> Vector {
    let norm = v.norm();
    if norm <= r {
        v.clone()
    } else {
        v.scale(r / norm)
    }
}
