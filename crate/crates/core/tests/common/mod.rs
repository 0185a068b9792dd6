//! Independent oracles shared by the integration suites. Everything here
//! solves the same problems as the library by a different route: sorting,
//! bisection, first-order iterations, dense factorizations.

#![allow(dead_code)]

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use omf_core::dictionary::{Dictionary, SurrogateStats};
use omf_core::projections::ConstraintSet;

pub fn gaussian_vec(n: usize, rng: &mut ChaCha8Rng) -> Array1<f64> {
    Array1::from_iter((0..n).map(|_| {
        let v: f64 = StandardNormal.sample(rng);
        v
    }))
}

pub fn gaussian_mat(r: usize, c: usize, rng: &mut ChaCha8Rng) -> Array2<f64> {
    Array2::from_shape_fn((r, c), |_| {
        let v: f64 = StandardNormal.sample(rng);
        v
    })
}

/// Random dictionary with unit-norm columns.
pub fn unit_dict(m: usize, k: usize, rng: &mut ChaCha8Rng) -> Dictionary<f64> {
    let mut atoms = gaussian_mat(m, k, rng);
    for mut col in atoms.columns_mut() {
        let norm = col.dot(&col).sqrt();
        col.mapv_inplace(|v| v / norm);
    }
    Dictionary::new(atoms, ConstraintSet::l2_ball()).unwrap()
}

/// Elastic-net ball value at `u`.
pub fn en_value(u: &ArrayView1<f64>, gamma: f64) -> f64 {
    let l1: f64 = u.iter().map(|v| v.abs()).sum();
    let sq: f64 = u.iter().map(|v| v * v).sum();
    l1 + 0.5 * gamma * sq
}

/// Bisection oracle for the elastic-net projection: finds the multiplier
/// where the shrunk vector meets the boundary, exploiting that the
/// constraint value is strictly decreasing in the multiplier.
pub fn elastic_net_projection_bisect(
    b: &ArrayView1<f64>,
    gamma: f64,
    tau: f64,
) -> Array1<f64> {
    if en_value(b, gamma) <= tau {
        return b.to_owned();
    }
    let shrink = |lambda: f64| -> Array1<f64> {
        Array1::from_iter(
            b.iter()
                .map(|&v| v.signum() * (v.abs() - lambda).max(0.0) / (1.0 + lambda * gamma)),
        )
    };
    let mut lo = 0.0f64;
    let mut hi = b.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if en_value(&shrink(mid).view(), gamma) > tau {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    shrink(0.5 * (lo + hi))
}

/// Sort-based projection onto the l1 ball. The support is identified by
/// the classic sorted-prefix rule; the final threshold is re-accumulated
/// over the support in index order.
pub fn l1_ball_projection_sort(b: &ArrayView1<f64>, tau: f64) -> Array1<f64> {
    let l1: f64 = b.iter().map(|v| v.abs()).sum();
    if l1 <= tau {
        return b.to_owned();
    }
    let mut mags: Vec<f64> = b.iter().map(|v| v.abs()).collect();
    mags.sort_by(|p, q| q.partial_cmp(p).unwrap());
    let mut cum = 0.0;
    let mut support_min = mags[0];
    for (i, &u) in mags.iter().enumerate() {
        cum += u;
        let theta = (cum - tau) / (i + 1) as f64;
        if u <= theta {
            break;
        }
        support_min = u;
    }
    // Same final arithmetic as the library: index-order accumulation.
    let mut s = 0.0;
    let mut rho = 0.0;
    for &v in b.iter() {
        if v.abs() >= support_min {
            s += v.abs();
            rho += 1.0;
        }
    }
    let theta = (s - tau) / rho;
    Array1::from_iter(b.iter().map(|&v| v.signum() * (v.abs() - theta).max(0.0)))
}

/// Fused-lasso signal approximation objective.
pub fn flsa_objective(u: &ArrayView1<f64>, b: &ArrayView1<f64>, g1: f64, g2: f64, g3: f64) -> f64 {
    let fit: f64 = u
        .iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        * 0.5;
    let l1: f64 = u.iter().map(|v| v.abs()).sum();
    let tv: f64 = u
        .iter()
        .zip(u.iter().skip(1))
        .map(|(a, c)| (c - a).abs())
        .sum();
    let sq: f64 = u.iter().map(|v| v * v).sum();
    fit + g1 * l1 + g2 * tv + 0.5 * g3 * sq
}

/// First-order oracle for the total-variation core `P(0, g2, 0)`:
/// projected gradient on the box-constrained dual, long run.
pub fn tv_prox_dual_oracle(b: &ArrayView1<f64>, g2: f64, iters: usize) -> Array1<f64> {
    let m = b.len();
    if m <= 1 || g2 <= 0.0 {
        return b.to_owned();
    }
    let p = m - 1;
    let mut z = vec![0.0f64; p];
    // Lipschitz constant of L L^T is below 4.
    let step = 0.25;
    let mut u = b.to_owned();
    for _ in 0..iters {
        // u = b - L^T z
        for i in 0..m {
            let mut v = b[i];
            if i < p {
                v += z[i];
            }
            if i > 0 {
                v -= z[i - 1];
            }
            u[i] = v;
        }
        // gradient of dual: -L u; ascent step then clip to the box.
        for i in 0..p {
            let lu = u[i + 1] - u[i];
            z[i] = (z[i] + step * lu).clamp(-g2, g2);
        }
    }
    for i in 0..m {
        let mut v = b[i];
        if i < p {
            v += z[i];
        }
        if i > 0 {
            v -= z[i - 1];
        }
        u[i] = v;
    }
    u
}

/// Dense inverse of an SPD matrix via Cholesky solves against the identity.
pub fn spd_inverse(a: &ArrayView2<f64>) -> Array2<f64> {
    let n = a.nrows();
    let l = omf_core::linalg::cholesky(a, 1e-300).expect("matrix not SPD");
    let mut inv = Array2::zeros((n, n));
    for j in 0..n {
        let mut e = Array1::zeros(n);
        e[j] = 1.0;
        let x = omf_core::linalg::cholesky_solve(&l, &e);
        inv.column_mut(j).assign(&x);
    }
    inv
}

/// Projected-gradient oracle for the dictionary update: minimizes the
/// quadratic surrogate over the constraint set with a fixed 1/L step.
pub fn projected_gradient_dictionary(
    d0: &Dictionary<f64>,
    stats: &SurrogateStats<f64>,
    iters: usize,
) -> Dictionary<f64> {
    let mut atoms = d0.atoms().clone();
    // Largest eigenvalue of A by power iteration.
    let k = stats.a.nrows();
    let mut v = Array1::from_elem(k, 1.0 / (k as f64).sqrt());
    for _ in 0..200 {
        let w = stats.a.dot(&v);
        let n = w.dot(&w).sqrt();
        if n == 0.0 {
            break;
        }
        v = w / n;
    }
    let lmax = v.dot(&stats.a.dot(&v)).max(1e-12);
    let step = 1.0 / lmax;
    for _ in 0..iters {
        let grad = atoms.dot(&stats.a) - &stats.b;
        atoms = atoms - step * &grad;
        for j in 0..k {
            let col = atoms.column(j).to_owned();
            let p = d0.constraint().project(&col.view()).unwrap();
            atoms.column_mut(j).assign(&p);
        }
    }
    Dictionary::from_columns_projected(atoms, *d0.constraint()).unwrap()
}

/// Proximal-gradient (ISTA) oracle for the row-sparse group problem.
pub fn group_lasso_ista(
    xs: &ArrayView2<f64>,
    dict: &Dictionary<f64>,
    lambda: f64,
    iters: usize,
) -> Array2<f64> {
    let k = dict.k();
    let q = xs.ncols();
    let gram = dict.gram();
    // Power iteration for the Lipschitz constant of the quadratic part.
    let mut v = Array1::from_elem(k, 1.0 / (k as f64).sqrt());
    for _ in 0..200 {
        let w = gram.dot(&v);
        let n = w.dot(&w).sqrt();
        if n == 0.0 {
            break;
        }
        v = w / n;
    }
    let lip = v.dot(&gram.dot(&v)).max(1e-12);
    let step = 1.0 / lip;
    let dtx = dict.atoms().t().dot(xs);
    let mut alpha = Array2::<f64>::zeros((k, q));
    for _ in 0..iters {
        let grad = gram.dot(&alpha) - &dtx;
        let trial = &alpha - &(step * &grad);
        for j in 0..k {
            let row = trial.row(j);
            let norm = row.dot(&row).sqrt();
            let scale = if norm > lambda * step {
                1.0 - lambda * step / norm
            } else {
                0.0
            };
            for c in 0..q {
                alpha[[j, c]] = trial[[j, c]] * scale;
            }
        }
    }
    alpha
}

/// Group-coding objective value.
pub fn group_objective(
    xs: &ArrayView2<f64>,
    dict: &Dictionary<f64>,
    alpha: &ArrayView2<f64>,
    lambda: f64,
) -> f64 {
    let resid = xs - &dict.atoms().dot(alpha);
    let mut obj = 0.5 * resid.iter().map(|v| v * v).sum::<f64>();
    for j in 0..alpha.nrows() {
        let row = alpha.row(j);
        obj += lambda * row.dot(&row).sqrt();
    }
    obj
}
