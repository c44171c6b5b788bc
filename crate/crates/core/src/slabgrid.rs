//! Collocation grids on `[0, h]`.

use alloc::format;
use alloc::vec::Vec;
use nalgebra::DMatrix;
#[allow(unused_imports)] // shadowed by inherent methods whenever std is linked
use num_traits::Float;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    #[default]
    ChebyshevLobatto,
    FiniteDifference4,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SlabGrid {
    n: usize,
    h: f64,
    scheme: Scheme,
    nodes: Vec<f64>,
    /// `d[k - 1]` is the k-th derivative operator, `k = 1..=4`.
    d: [DMatrix<f64>; 4],
    weights: Vec<f64>,
}

impl SlabGrid {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn scheme(&self) -> Scheme {
        self.scheme
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Dense k-th derivative operator, `1 <= k <= 4`.
    pub fn diff(&self, k: usize) -> &DMatrix<f64> {
        assert!((1..=4).contains(&k), "derivative order {k} not available");
        &self.d[k - 1]
    }

    pub fn apply(&self, k: usize, f: &[f64]) -> Vec<f64> {
        let d = self.diff(k);
        (0..self.n).map(|i| (0..self.n).map(|j| d[(i, j)] * f[j]).sum()).collect()
    }

    /// Weighted sum `sum_i w_i f(i)` over node indices.
    pub fn integrate(&self, f: impl Fn(usize) -> f64) -> f64 {
        self.weights.iter().enumerate().map(|(i, w)| w * f(i)).sum()
    }
}

pub fn build_grid(n: usize, h: f64, scheme: Scheme) -> Result<SlabGrid> {
    if n < 8 {
        return Err(Error::Config(format!("grid needs n >= 8 nodes, got {n}")));
    }
    if !(h > 0.0) {
        return Err(Error::Config(format!("slab height must be positive, got {h}")));
    }
    let (nodes, d, weights) = match scheme {
        Scheme::ChebyshevLobatto => chebyshev(n, h),
        Scheme::FiniteDifference4 => finite_difference(n, h),
    };
    Ok(SlabGrid {
        n,
        h,
        scheme,
        nodes,
        d,
        weights,
    })
}

fn chebyshev(n: usize, h: f64) -> (Vec<f64>, [DMatrix<f64>; 4], Vec<f64>) {
    use core::f64::consts::PI;
    let m = (n - 1) as f64;
    let theta: Vec<f64> = (0..n).map(|j| PI * j as f64 / m).collect();
    let mut nodes: Vec<f64> = theta.iter().map(|t| 0.5 * h * (1.0 - t.cos())).collect();
    nodes[0] = 0.0;
    nodes[n - 1] = h;
    // x_i - x_j = h sin((t_i + t_j)/2) sin((t_i - t_j)/2), free of cancellation.
    let dx = |i: usize, j: usize| h * (0.5 * (theta[i] + theta[j])).sin() * (0.5 * (theta[i] - theta[j])).sin();
    let bary: Vec<f64> = (0..n)
        .map(|j| {
            let s = if j % 2 == 0 { 1.0 } else { -1.0 };
            if j == 0 || j == n - 1 {
                0.5 * s
            } else {
                s
            }
        })
        .collect();

    let mut prev = DMatrix::<f64>::identity(n, n);
    let mut ops: Vec<DMatrix<f64>> = Vec::with_capacity(4);
    for k in 1..=4 {
        let mut dk = DMatrix::<f64>::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    dk[(i, j)] = k as f64 / dx(i, j) * (bary[j] / bary[i] * prev[(i, i)] - prev[(i, j)]);
                }
            }
            dk[(i, i)] = -negative_sum(&dk, i);
        }
        ops.push(dk.clone());
        prev = dk;
    }

    // Clenshaw-Curtis weights.
    let nn = n - 1;
    let mut w = alloc::vec![0.0; n];
    let interior_v = |t: f64| {
        let mut v = 1.0;
        if nn % 2 == 0 {
            for k in 1..nn / 2 {
                v -= 2.0 * (2.0 * k as f64 * t).cos() / (4.0 * (k * k) as f64 - 1.0);
            }
            v -= (nn as f64 * t).cos() / ((nn * nn) as f64 - 1.0);
        } else {
            for k in 1..=(nn - 1) / 2 {
                v -= 2.0 * (2.0 * k as f64 * t).cos() / (4.0 * (k * k) as f64 - 1.0);
            }
        }
        v
    };
    let end = if nn % 2 == 0 {
        1.0 / ((nn * nn) as f64 - 1.0)
    } else {
        1.0 / (nn * nn) as f64
    };
    w[0] = end;
    w[n - 1] = end;
    for (j, wj) in w.iter_mut().enumerate().take(n - 1).skip(1) {
        *wj = 2.0 * interior_v(theta[j]) / nn as f64;
    }
    let weights = w.iter().map(|v| 0.5 * h * v).collect();
    let ops: [DMatrix<f64>; 4] = [ops[0].clone(), ops[1].clone(), ops[2].clone(), ops[3].clone()];
    (nodes, ops, weights)
}

fn negative_sum(d: &DMatrix<f64>, i: usize) -> f64 {
    let mut terms: Vec<f64> = (0..d.ncols()).filter(|&j| j != i).map(|j| d[(i, j)]).collect();
    terms.sort_by(|a, b| a.abs().partial_cmp(&b.abs()).unwrap());
    terms.iter().sum()
}

fn finite_difference(n: usize, h: f64) -> (Vec<f64>, [DMatrix<f64>; 4], Vec<f64>) {
    let dx = h / (n - 1) as f64;
    let mut nodes: Vec<f64> = (0..n).map(|i| i as f64 * dx).collect();
    nodes[n - 1] = h;
    let unit: Vec<f64> = (0..n).map(|i| i as f64).collect();
    let mut ops: Vec<DMatrix<f64>> = Vec::with_capacity(4);
    for k in 1..=4usize {
        let centered = if k <= 2 { 5 } else { 7 };
        let half = centered / 2;
        let mut dk = DMatrix::<f64>::zeros(n, n);
        for i in 0..n {
            let (start, width) = if i >= half && i + half < n {
                (i - half, centered)
            } else {
                let w = k + 4;
                let s = i.saturating_sub(w / 2).min(n - w);
                (s, w)
            };
            let stencil = &unit[start..start + width];
            let c = fornberg(unit[i], stencil, k);
            for (m, cm) in c.iter().enumerate() {
                dk[(i, start + m)] = cm / dx.powi(k as i32);
            }
        }
        ops.push(dk);
    }
    let mut w = alloc::vec![dx; n];
    let ends = [3.0 / 8.0, 7.0 / 6.0, 23.0 / 24.0];
    for (j, e) in ends.iter().enumerate() {
        w[j] = e * dx;
        w[n - 1 - j] = e * dx;
    }
    let ops: [DMatrix<f64>; 4] = [ops[0].clone(), ops[1].clone(), ops[2].clone(), ops[3].clone()];
    (nodes, ops, w)
}

/// Fornberg's recursion: weights of the `order`-th derivative at `z` on `x`.
fn fornberg(z: f64, x: &[f64], order: usize) -> Vec<f64> {
    let n = x.len();
    let mut c = alloc::vec![alloc::vec![0.0; order + 1]; n];
    let mut c1 = 1.0;
    let mut c4 = x[0] - z;
    c[0][0] = 1.0;
    for i in 1..n {
        let mn = i.min(order);
        let mut c2 = 1.0;
        let c5 = c4;
        c4 = x[i] - z;
        for j in 0..i {
            let c3 = x[i] - x[j];
            c2 *= c3;
            if j == i - 1 {
                for k in (1..=mn).rev() {
                    c[i][k] = c1 * (k as f64 * c[i - 1][k - 1] - c5 * c[i - 1][k]) / c2;
                }
                c[i][0] = -c1 * c5 * c[i - 1][0] / c2;
            }
            for k in (1..=mn).rev() {
                c[j][k] = (c4 * c[j][k] - k as f64 * c[j][k - 1]) / c3;
            }
            c[j][0] = c4 * c[j][0] / c3;
        }
        c1 = c2;
    }
    c.iter().map(|row| row[order]).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BcKind {
    Dirichlet,
    Neumann,
    None,
}

/// Wall conditions for one scalar unknown: `(left, right)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BcMask {
    pub left: BcKind,
    pub right: BcKind,
}

impl BcMask {
    pub const DIRICHLET: BcMask = BcMask {
        left: BcKind::Dirichlet,
        right: BcKind::Dirichlet,
    };
    pub const NEUMANN: BcMask = BcMask {
        left: BcKind::Neumann,
        right: BcKind::Neumann,
    };
    pub const NONE: BcMask = BcMask {
        left: BcKind::None,
        right: BcKind::None,
    };
}

/// Replaces the first/last rows of `op` by the wall condition rows.
pub fn apply_bc(op: &DMatrix<f64>, grid: &SlabGrid, mask: BcMask) -> DMatrix<f64> {
    let n = grid.n();
    assert_eq!(op.shape(), (n, n), "operator must be n x n");
    let mut out = op.clone();
    for (row, kind) in [(0, mask.left), (n - 1, mask.right)] {
        match kind {
            BcKind::Dirichlet => {
                out.row_mut(row).fill(0.0);
                out[(row, row)] = 1.0;
            }
            BcKind::Neumann => out.row_mut(row).copy_from(&grid.diff(1).row(row)),
            BcKind::None => {}
        }
    }
    out
}

pub fn quadrature(grid: &SlabGrid, samples: &[f64]) -> Result<f64> {
    if samples.len() != grid.n() {
        return Err(Error::Shape {
            expected: grid.n(),
            got: samples.len(),
        });
    }
    Ok(grid.integrate(|i| samples[i]))
}

/// `|kappa|^(-s) * norm`: the horizontal `Lambda^{-s}` multiplier on one mode.
pub fn neg_tangential_norm(field_l2_norm: f64, kappa: f64, s: f64) -> Result<f64> {
    if kappa == 0.0 {
        return Err(Error::UndefinedNorm);
    }
    if !(s > 0.0 && s < 1.0) {
        return Err(Error::Domain(format!("s must lie in (0, 1), got {s}")));
    }
    Ok(kappa.abs().powf(-s) * field_l2_norm)
}
