//! Reference implementations shared by the integration tests. They are written
//! independently of the library solvers and favor clarity over speed.
#![allow(dead_code)]

use regpoison_core::rng::mix64;
use regpoison_core::{Dataset, Matrix};

/// Uniform draws in `[0, 1)` from a hashed counter.
pub struct Uniform {
    state: u64,
}

impl Uniform {
    pub fn new(seed: u64) -> Self {
        Uniform { state: mix64(seed) }
    }

    pub fn next(&mut self) -> f64 {
        self.state = self.state.wrapping_add(0x9e37_79b9_7f4a_7c15);
        (mix64(self.state) >> 11) as f64 / (1u64 << 53) as f64
    }
}

pub fn random_problem(n: usize, d: usize, noise: f64, seed: u64) -> Dataset {
    let mut u = Uniform::new(seed);
    let w: Vec<f64> = (0..d).map(|_| 2.0 * u.next() - 1.0).collect();
    let mut x = Matrix::zeros(n, d);
    let mut y = Vec::with_capacity(n);
    for i in 0..n {
        let row: Vec<f64> = (0..d).map(|_| u.next()).collect();
        let t: f64 = row.iter().zip(&w).map(|(a, b)| a * b).sum::<f64>() + noise * (u.next() - 0.5);
        x.row_mut(i).copy_from_slice(&row);
        y.push(t);
    }
    Dataset::new(x, y).unwrap()
}

/// Gaussian elimination with partial pivoting.
pub fn gauss_solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    for col in 0..n {
        let p = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs())).unwrap();
        a.swap(col, p);
        b.swap(col, p);
        for r in col + 1..n {
            let f = a[r][col] / a[col][col];
            for c in col..n {
                a[r][c] -= f * a[col][c];
            }
            b[r] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let s: f64 = (r + 1..n).map(|c| a[r][c] * x[c]).sum();
        x[r] = (b[r] - s) / a[r][r];
    }
    x
}

/// Column-centered features and centered targets, with their means.
pub fn centered(data: &Dataset) -> (Vec<Vec<f64>>, Vec<f64>, Vec<f64>, f64) {
    let (n, d) = (data.n(), data.d());
    let xm: Vec<f64> = (0..d).map(|j| data.features.column(j).iter().sum::<f64>() / n as f64).collect();
    let ym = data.targets.iter().sum::<f64>() / n as f64;
    let xc = data.features.iter_rows().map(|r| r.iter().zip(&xm).map(|(a, m)| a - m).collect()).collect();
    let yc = data.targets.iter().map(|v| v - ym).collect();
    (xc, yc, xm, ym)
}

/// The ridge normal equations `(XcᵀXc + αI) w = Xcᵀyc` as a dense system.
pub fn ridge_system(data: &Dataset, alpha: f64) -> (Vec<Vec<f64>>, Vec<f64>) {
    let d = data.d();
    let (xc, yc, _, _) = centered(data);
    let mut a = vec![vec![0.0; d]; d];
    let mut b = vec![0.0; d];
    for (row, t) in xc.iter().zip(&yc) {
        for i in 0..d {
            b[i] += row[i] * t;
            for j in 0..d {
                a[i][j] += row[i] * row[j];
            }
        }
    }
    for (i, r) in a.iter_mut().enumerate() {
        r[i] += alpha;
    }
    (a, b)
}

/// Ridge weights and intercept by a direct solve of the normal equations.
pub fn ridge_oracle(data: &Dataset, alpha: f64) -> (Vec<f64>, f64) {
    let (a, b) = ridge_system(data, alpha);
    let w = gauss_solve(a, b);
    let (_, _, xm, ym) = centered(data);
    let b0 = ym - w.iter().zip(&xm).map(|(a, m)| a * m).sum::<f64>();
    (w, b0)
}

/// Elastic net weights by accelerated proximal gradient (FISTA) on
/// `‖yc − Xc w‖²/(2n) + α ρ ‖w‖₁ + α (1 − ρ)/2 ‖w‖²`.
pub fn elastic_net_oracle(data: &Dataset, alpha: f64, l1_ratio: f64) -> Vec<f64> {
    let (n, d) = (data.n() as f64, data.d());
    let (xc, yc, _, _) = centered(data);
    let l2 = alpha * (1.0 - l1_ratio);
    let l1 = alpha * l1_ratio;
    // Lipschitz constant of the smooth part, bounded by the Frobenius norm of XᵀX/n
    let mut gram = vec![vec![0.0; d]; d];
    for row in &xc {
        for i in 0..d {
            for j in 0..d {
                gram[i][j] += row[i] * row[j] / n;
            }
        }
    }
    let lip = gram.iter().flatten().map(|v| v * v).sum::<f64>().sqrt() + l2;
    let step = 1.0 / lip;
    let xty: Vec<f64> = (0..d).map(|j| xc.iter().zip(&yc).map(|(r, t)| r[j] * t).sum::<f64>() / n).collect();
    let grad = |w: &[f64]| -> Vec<f64> {
        (0..d).map(|i| (0..d).map(|j| gram[i][j] * w[j]).sum::<f64>() - xty[i] + l2 * w[i]).collect()
    };
    let shrink = |z: f64| z.signum() * (z.abs() - step * l1).max(0.0);
    let mut w = vec![0.0; d];
    let mut v = w.clone();
    let mut t = 1.0f64;
    for _ in 0..200_000 {
        let g = grad(&v);
        let next: Vec<f64> = v.iter().zip(&g).map(|(a, b)| shrink(a - step * b)).collect();
        let t_next = (1.0 + (1.0 + 4.0 * t * t).sqrt()) / 2.0;
        let change = next.iter().zip(&w).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        v = next.iter().zip(&w).map(|(a, b)| a + (t - 1.0) / t_next * (a - b)).collect();
        w = next;
        t = t_next;
        if change < 1e-13 {
            break;
        }
    }
    w
}

/// Least squares on one feature column plus intercept, and its mean squared error.
pub fn line_fit_loss(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let (mx, my) = (x.iter().sum::<f64>() / n, y.iter().sum::<f64>() / n);
    let sxx: f64 = x.iter().map(|v| (v - mx) * (v - mx)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    let icpt = my - slope * mx;
    x.iter().zip(y).map(|(a, b)| (icpt + slope * a - b).powi(2)).sum::<f64>() / n
}
