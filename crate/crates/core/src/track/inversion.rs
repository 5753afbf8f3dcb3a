//! Joint Levenberg–Marquardt refinement of a trailing window of positions.
//!
//! Unknowns are the window's anchor position (the last slot before the
//! window, pulled toward its previous estimate by a prior) and one position
//! per window slot. Velocities are backward differences of positions, so
//! every residual touches at most three consecutive slots and the normal
//! equations are banded. Residuals are the weighted forward-model misfits
//! `a_n(p_k) · v_k − r_{k,n}` plus priors on the anchor offset, on velocity
//! changes and on the velocity magnitude.

use alloc::vec;
use alloc::vec::Vec;
// Float math for no_std builds; inherent methods take over when std is linked.
#[allow(unused_imports)]
use num_traits::Float;

use crate::error::Result;
use crate::geometry::{LinkGeometry, Point2, Vec2};

pub(crate) struct Window<'a> {
    pub links: &'a [LinkGeometry],
    pub anchor: Point2,
    pub prev_velocity: Option<Vec2>,
    pub dt: f64,
    /// `rows[k][n]` = (value, weight) of an available cell.
    pub rows: Vec<Vec<Option<(f64, f64)>>>,
    pub smoothness: f64,
    pub shift_prior: f64,
    pub regularization: f64,
}

/// A scalar residual and its nonzero partial derivatives.
struct Residual {
    value: f64,
    grad: [(usize, f64); 6],
    len: usize,
}

impl Residual {
    fn new(value: f64) -> Self {
        Self {
            value,
            grad: [(0, 0.0); 6],
            len: 0,
        }
    }

    fn with(mut self, index: usize, d: f64) -> Self {
        self.grad[self.len] = (index, d);
        self.len += 1;
        self
    }

    fn partials(&self) -> &[(usize, f64)] {
        &self.grad[..self.len]
    }
}

/// Half-bandwidth of the normal equations: residuals span three slots of
/// two coordinates.
const HALF_BAND: usize = 5;

/// Symmetric positive definite banded matrix, lower band stored per row.
struct Banded {
    rows: Vec<[f64; HALF_BAND + 1]>,
}

impl Banded {
    fn zeros(n: usize) -> Self {
        Self {
            rows: vec![[0.0; HALF_BAND + 1]; n],
        }
    }

    fn add(&mut self, i: usize, j: usize, v: f64) {
        let (i, j) = if i >= j { (i, j) } else { (j, i) };
        self.rows[i][i - j] += v;
    }

    fn get(&self, i: usize, j: usize) -> f64 {
        if i < j || i - j > HALF_BAND {
            0.0
        } else {
            self.rows[i][i - j]
        }
    }

    /// Cholesky factor in the same layout, or `None` if not positive
    /// definite.
    fn cholesky(&self) -> Option<Banded> {
        let n = self.rows.len();
        let mut l = Banded::zeros(n);
        for i in 0..n {
            for j in i.saturating_sub(HALF_BAND)..=i {
                let mut s = self.get(i, j);
                for k in i.saturating_sub(HALF_BAND)..j {
                    s -= l.get(i, k) * l.get(j, k);
                }
                if i == j {
                    if !(s > 0.0) {
                        return None;
                    }
                    l.rows[i][0] = s.sqrt();
                } else {
                    l.rows[i][i - j] = s / l.rows[j][0];
                }
            }
        }
        Some(l)
    }

    fn solve_factored(&self, b: &[f64]) -> Vec<f64> {
        let n = b.len();
        let mut y = b.to_vec();
        for i in 0..n {
            for k in i.saturating_sub(HALF_BAND)..i {
                y[i] -= self.get(i, k) * y[k];
            }
            y[i] /= self.rows[i][0];
        }
        for i in (0..n).rev() {
            for k in i + 1..n.min(i + HALF_BAND + 1) {
                y[i] -= self.get(k, i) * y[k];
            }
            y[i] /= self.rows[i][0];
        }
        y
    }
}

impl Window<'_> {
    fn slots(&self) -> usize {
        self.rows.len()
    }

    /// Anchor plus one position per window slot, two coordinates each.
    fn params(&self) -> usize {
        2 * (self.slots() + 1)
    }

    fn position(x: &[f64], j: usize) -> Vec2 {
        Vec2::new(x[2 * j], x[2 * j + 1])
    }

    fn residuals(&self, x: &[f64]) -> Result<Vec<Residual>> {
        let dt = self.dt;
        let mut out = Vec::new();
        for k in 1..=self.slots() {
            let p = Self::position(x, k);
            let v = (p - Self::position(x, k - 1)) / dt;
            for (n, cell) in self.rows[k - 1].iter().enumerate() {
                let Some((r, w)) = *cell else { continue };
                let link = &self.links[n];
                let a = link.fresnel_coefficients(p)?;
                let hv = link.coefficient_jacobian(p)?.apply(v);
                let sw = w.sqrt();
                let dp = (hv + a / dt) * sw;
                let dprev = a * (-sw / dt);
                out.push(
                    Residual::new(sw * (a.dot(v) - r))
                        .with(2 * k, dp.x)
                        .with(2 * k + 1, dp.y)
                        .with(2 * k - 2, dprev.x)
                        .with(2 * k - 1, dprev.y),
                );
            }
        }
        let ss = self.smoothness.sqrt();
        if ss > 0.0 {
            for k in 1..=self.slots() {
                let v = (Self::position(x, k) - Self::position(x, k - 1)) / dt;
                let c = ss / dt;
                if k >= 2 {
                    let before = (Self::position(x, k - 1) - Self::position(x, k - 2)) / dt;
                    let d = (v - before) * ss;
                    for (axis, value) in [(0, d.x), (1, d.y)] {
                        out.push(
                            Residual::new(value)
                                .with(2 * k + axis, c)
                                .with(2 * k - 2 + axis, -2.0 * c)
                                .with(2 * k - 4 + axis, c),
                        );
                    }
                } else if let Some(v0) = self.prev_velocity {
                    let d = (v - v0) * ss;
                    for (axis, value) in [(0, d.x), (1, d.y)] {
                        out.push(Residual::new(value).with(2 * k + axis, c).with(2 * k - 2 + axis, -c));
                    }
                }
            }
        }
        let sp = self.shift_prior.sqrt();
        let shift = Self::position(x, 0) - self.anchor;
        out.push(Residual::new(sp * shift.x).with(0, sp));
        out.push(Residual::new(sp * shift.y).with(1, sp));
        let sr = self.regularization.sqrt();
        if sr > 0.0 {
            for k in 1..=self.slots() {
                let v = (Self::position(x, k) - Self::position(x, k - 1)) / dt;
                let c = sr / dt;
                for (axis, value) in [(0, v.x), (1, v.y)] {
                    out.push(
                        Residual::new(sr * value)
                            .with(2 * k + axis, c)
                            .with(2 * k - 2 + axis, -c),
                    );
                }
            }
        }
        Ok(out)
    }

    fn cost(&self, x: &[f64]) -> Option<f64> {
        self.residuals(x)
            .ok()
            .map(|r| r.iter().map(|e| e.value * e.value).sum())
    }

    /// Gauss–Newton normal matrix, gradient and cost at `x`.
    fn normal_equations(&self, x: &[f64]) -> Result<(Banded, Vec<f64>, f64)> {
        let np = self.params();
        let mut jtj = Banded::zeros(np);
        let mut g = vec![0.0; np];
        let mut cost = 0.0;
        for r in self.residuals(x)? {
            cost += r.value * r.value;
            for &(i, di) in r.partials() {
                g[i] += di * r.value;
                for &(j, dj) in r.partials() {
                    if j <= i {
                        jtj.add(i, j, di * dj);
                    }
                }
            }
        }
        Ok((jtj, g, cost))
    }

    /// Returns the fitted anchor offset and window velocities; falls back
    /// to `init` when no step improves the cost.
    pub fn refine(&self, init: &[Vec2], iterations: usize) -> (Vec2, Vec<Vec2>) {
        debug_assert_eq!(init.len(), self.slots());
        let np = self.params();
        let mut x = Vec::with_capacity(np);
        let mut p = self.anchor;
        x.extend([p.x, p.y]);
        for v in init {
            p += *v * self.dt;
            x.extend([p.x, p.y]);
        }
        let mut lambda = 1e-3;
        for _ in 0..iterations {
            let Ok((jtj, g, cost)) = self.normal_equations(&x) else {
                break;
            };
            let mut improved = false;
            for _ in 0..8 {
                let mut lhs = Banded { rows: jtj.rows.clone() };
                for i in 0..np {
                    lhs.rows[i][0] += lambda * jtj.rows[i][0] + 1e-12;
                }
                let Some(chol) = lhs.cholesky() else {
                    lambda *= 10.0;
                    continue;
                };
                let neg: Vec<f64> = g.iter().map(|v| -v).collect();
                let step = chol.solve_factored(&neg);
                let candidate: Vec<f64> = x.iter().zip(&step).map(|(a, b)| a + b).collect();
                match self.cost(&candidate) {
                    Some(c) if c < cost => {
                        let size: f64 = step.iter().map(|s| s * s).sum::<f64>().sqrt();
                        x = candidate;
                        lambda = (lambda / 3.0).max(1e-9);
                        improved = size > 1e-10;
                        break;
                    }
                    _ => lambda *= 4.0,
                }
            }
            if !improved {
                break;
            }
        }
        let shift = Self::position(&x, 0) - self.anchor;
        let velocities = (1..=self.slots())
            .map(|k| (Self::position(&x, k) - Self::position(&x, k - 1)) / self.dt)
            .collect();
        (shift, velocities)
    }
}
