//! Reference solver for the side-decoding problem, independent of the
//! production decoder: a dense primal log-barrier interior-point method on
//! the epigraph formulation
//!
//! ```text
//!   min 1ᵀt   s.t.  -t ≤ θ ≤ t
//!                    ‖M_g θ - v_g‖₂ ≤ ε_g            (per group)
//!                    |M_g θ - v_g|  ≤ c_g  per row   (per group)
//! ```
//!
//! Second-order (Newton) steps on the barrier, nothing shared with the
//! ADMM implementation under test.

pub struct Group {
    pub matrix: Vec<Vec<f64>>,
    pub values: Vec<f64>,
    pub radius: f64,
    pub halfwidth: Vec<f64>,
}

struct Workspace<'a> {
    groups: &'a [Group],
    n: usize,
    /// Precomputed MᵀM per group.
    gram: Vec<Vec<Vec<f64>>>,
}

fn matvec(m: &[Vec<f64>], x: &[f64]) -> Vec<f64> {
    m.iter()
        .map(|row| row.iter().zip(x).map(|(a, b)| a * b).sum())
        .collect()
}

fn matvec_t(m: &[Vec<f64>], y: &[f64], n: usize) -> Vec<f64> {
    let mut out = vec![0.0; n];
    for (row, &yi) in m.iter().zip(y) {
        for (o, &a) in out.iter_mut().zip(row) {
            *o += yi * a;
        }
    }
    out
}

/// Cholesky solve of a dense symmetric positive definite system.
fn solve_spd(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for j in 0..n {
        for k in 0..j {
            let ljk = a[j][k];
            for i in j..n {
                a[i][j] -= a[i][k] * ljk;
            }
        }
        let d = a[j][j];
        if d <= 0.0 || !d.is_finite() {
            return None;
        }
        let root = d.sqrt();
        for i in j..n {
            a[i][j] /= root;
        }
    }
    // Forward substitution L z = b.
    for i in 0..n {
        for k in 0..i {
            b[i] -= a[i][k] * b[k];
        }
        b[i] /= a[i][i];
    }
    // Back substitution Lᵀ x = z.
    for i in (0..n).rev() {
        for k in (i + 1)..n {
            b[i] -= a[k][i] * b[k];
        }
        b[i] /= a[i][i];
    }
    Some(b)
}

impl<'a> Workspace<'a> {
    fn new(groups: &'a [Group], n: usize) -> Self {
        let gram = groups
            .iter()
            .map(|g| {
                let mut gram = vec![vec![0.0; n]; n];
                for row in &g.matrix {
                    for i in 0..n {
                        if row[i] != 0.0 {
                            for j in 0..n {
                                gram[i][j] += row[i] * row[j];
                            }
                        }
                    }
                }
                gram
            })
            .collect();
        Workspace { groups, n, gram }
    }

    /// Barrier value, or None if any slack is nonpositive.
    fn barrier(&self, theta: &[f64], t: &[f64]) -> Option<f64> {
        let mut phi = 0.0;
        for j in 0..self.n {
            let lo = t[j] - theta[j];
            let hi = t[j] + theta[j];
            if lo <= 0.0 || hi <= 0.0 {
                return None;
            }
            phi -= lo.ln() + hi.ln();
        }
        for g in self.groups {
            let u: Vec<f64> = matvec(&g.matrix, theta)
                .iter()
                .zip(&g.values)
                .map(|(a, v)| a - v)
                .collect();
            let ball = g.radius * g.radius - u.iter().map(|x| x * x).sum::<f64>();
            if ball <= 0.0 {
                return None;
            }
            phi -= ball.ln();
            for (ui, ci) in u.iter().zip(&g.halfwidth) {
                let lo = ci - ui;
                let hi = ci + ui;
                if lo <= 0.0 || hi <= 0.0 {
                    return None;
                }
                phi -= lo.ln() + hi.ln();
            }
        }
        Some(phi)
    }

    fn objective(&self, tau: f64, theta: &[f64], t: &[f64]) -> Option<f64> {
        Some(tau * t.iter().sum::<f64>() + self.barrier(theta, t)?)
    }

    /// One centering run for a fixed tau; x is updated in place.
    fn center(&self, tau: f64, theta: &mut Vec<f64>, t: &mut Vec<f64>) {
        let n = self.n;
        for _newton in 0..60 {
            let mut grad = vec![0.0; 2 * n];
            let mut hess = vec![vec![0.0; 2 * n]; 2 * n];
            for j in 0..n {
                let a = 1.0 / (t[j] - theta[j]);
                let b = 1.0 / (t[j] + theta[j]);
                grad[j] += a - b;
                grad[n + j] += tau - a - b;
                hess[j][j] += a * a + b * b;
                hess[n + j][n + j] += a * a + b * b;
                hess[j][n + j] += b * b - a * a;
                hess[n + j][j] += b * b - a * a;
            }
            for (g, gram) in self.groups.iter().zip(&self.gram) {
                let u: Vec<f64> = matvec(&g.matrix, theta)
                    .iter()
                    .zip(&g.values)
                    .map(|(a, v)| a - v)
                    .collect();
                let ball = g.radius * g.radius - u.iter().map(|x| x * x).sum::<f64>();
                let pulled = matvec_t(&g.matrix, &u, n);
                for j in 0..n {
                    grad[j] += 2.0 * pulled[j] / ball;
                }
                for i in 0..n {
                    for j in 0..n {
                        hess[i][j] += 2.0 * gram[i][j] / ball
                            + 4.0 * pulled[i] * pulled[j] / (ball * ball);
                    }
                }
                for (row, (ui, ci)) in g.matrix.iter().zip(u.iter().zip(&g.halfwidth)) {
                    let lo = 1.0 / (ci - ui);
                    let hi = 1.0 / (ci + ui);
                    let glin = lo - hi;
                    let hlin = lo * lo + hi * hi;
                    for i in 0..n {
                        if row[i] != 0.0 {
                            grad[i] += glin * row[i];
                            for j in 0..n {
                                hess[i][j] += hlin * row[i] * row[j];
                            }
                        }
                    }
                }
            }
            let rhs: Vec<f64> = grad.iter().map(|g| -g).collect();
            let step = match solve_spd(hess, rhs) {
                Some(s) => s,
                None => return,
            };
            let decrement: f64 = -grad.iter().zip(&step).map(|(g, s)| g * s).sum::<f64>();
            if decrement / 2.0 < 1e-10 {
                return;
            }
            // Backtrack into strict feasibility, then Armijo descent.
            let base = self
                .objective(tau, theta, t)
                .expect("iterate must be strictly feasible");
            let mut scale = 1.0;
            for _ in 0..80 {
                let cand_theta: Vec<f64> = theta
                    .iter()
                    .zip(&step[..n])
                    .map(|(x, d)| x + scale * d)
                    .collect();
                let cand_t: Vec<f64> = t
                    .iter()
                    .zip(&step[n..])
                    .map(|(x, d)| x + scale * d)
                    .collect();
                if let Some(value) = self.objective(tau, &cand_theta, &cand_t) {
                    if value <= base - 0.25 * scale * decrement {
                        *theta = cand_theta;
                        *t = cand_t;
                        break;
                    }
                }
                scale *= 0.5;
            }
        }
    }
}

/// Solves the side-decoding problem to high accuracy and returns θ.
pub fn solve(groups: &[Group], n: usize) -> Vec<f64> {
    // Strictly feasible start: the minimum-norm interpolant of all group
    // values has zero residual on every constraint.
    let rows: usize = groups.iter().map(|g| g.matrix.len()).sum();
    assert!(rows > 0 && rows < n, "oracle start needs an underdetermined system");
    let mut stacked: Vec<Vec<f64>> = Vec::with_capacity(rows);
    let mut values: Vec<f64> = Vec::with_capacity(rows);
    for g in groups {
        stacked.extend(g.matrix.iter().cloned());
        values.extend(g.values.iter().copied());
    }
    let mut outer = vec![vec![0.0; rows]; rows];
    for i in 0..rows {
        for j in 0..rows {
            outer[i][j] = stacked[i]
                .iter()
                .zip(&stacked[j])
                .map(|(a, b)| a * b)
                .sum();
        }
        outer[i][i] += 1e-12;
    }
    let weights = solve_spd(outer, values).expect("gram matrix must be positive definite");
    let mut theta = matvec_t(&stacked, &weights, n);
    let spread = theta.iter().fold(0.0f64, |acc, x| acc.max(x.abs()));
    let mut t: Vec<f64> = theta.iter().map(|x| x.abs() + 0.1 * (spread + 1.0)).collect();

    let workspace = Workspace::new(groups, n);
    let constraint_count: f64 =
        (2 * n + groups.iter().map(|g| 1 + 2 * g.matrix.len()).sum::<usize>()) as f64;
    let mut tau = 1.0;
    while constraint_count / tau > 1e-9 {
        workspace.center(tau, &mut theta, &mut t);
        tau *= 10.0;
    }
    theta
}
