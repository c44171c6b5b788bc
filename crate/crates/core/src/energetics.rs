//! Potential-energy functionals, the `r / rho'` identity, the quantum stress
//! split and Rayleigh quotients, all for a single horizontal mode.
//!
//! Energies are per unit horizontal area. For a mode with wavenumber
//! `kappa`, `|grad r|^2 = kappa^2 |r|^2 + |r'|^2`.

use alloc::format;
use alloc::vec::Vec;
use nalgebra::DMatrix;
use num_complex::Complex64;
#[allow(unused_imports)] // shadowed by inherent methods whenever std is linked
use num_traits::Float;
use serde::{Deserialize, Serialize};

use crate::linalg::sym_definite_eig;
use crate::profiles::{validate_profile, Condition, DensityProfile, PhysicalParams};
use crate::slabgrid::{BcMask, SlabGrid};
use crate::{Error, Result};

/// Profile derivatives sampled at the grid nodes.
#[derive(Debug, Clone)]
pub(crate) struct Nodal {
    pub rho: Vec<f64>,
    pub d1: Vec<f64>,
    pub d2: Vec<f64>,
    pub d3: Vec<f64>,
}

impl Nodal {
    pub fn new(p: &DensityProfile, grid: &SlabGrid) -> Self {
        let n = grid.n();
        let mut s = Nodal {
            rho: Vec::with_capacity(n),
            d1: Vec::with_capacity(n),
            d2: Vec::with_capacity(n),
            d3: Vec::with_capacity(n),
        };
        for &x in grid.nodes() {
            let j = p.jet(x);
            s.rho.push(j.derivative(0));
            s.d1.push(j.derivative(1));
            s.d2.push(j.derivative(2));
            s.d3.push(j.derivative(3));
        }
        s
    }

    /// `(rho''/rho)'`
    pub fn quantum_slope(&self, i: usize) -> f64 {
        (self.d3[i] * self.rho[i] - self.d2[i] * self.d1[i]) / (self.rho[i] * self.rho[i])
    }
}

/// Values of one scalar unknown at the grid nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField1D<'g> {
    pub grid: &'g SlabGrid,
    pub values: Vec<Complex64>,
    pub bc: BcMask,
}

impl<'g> ScalarField1D<'g> {
    pub fn new(grid: &'g SlabGrid, values: Vec<Complex64>, bc: BcMask) -> Result<Self> {
        if values.len() != grid.n() {
            return Err(Error::Shape {
                expected: grid.n(),
                got: values.len(),
            });
        }
        Ok(ScalarField1D { grid, values, bc })
    }

    /// Real samples of `f`, tagged Dirichlet.
    pub fn from_fn(grid: &'g SlabGrid, f: impl Fn(f64) -> f64) -> Self {
        let values = grid.nodes().iter().map(|&x| Complex64::new(f(x), 0.0)).collect();
        ScalarField1D {
            grid,
            values,
            bc: BcMask::DIRICHLET,
        }
    }

    pub fn from_real(grid: &'g SlabGrid, values: &[f64]) -> Result<Self> {
        Self::new(grid, values.iter().map(|&v| Complex64::new(v, 0.0)).collect(), BcMask::DIRICHLET)
    }

    pub fn derivative(&self) -> Vec<Complex64> {
        let d = self.grid.diff(1);
        let n = self.grid.n();
        (0..n).map(|i| (0..n).map(|j| self.values[j] * d[(i, j)]).sum()).collect()
    }

    /// `int weight |f|^2`
    fn weighted_sq(&self, f: &[Complex64], weight: impl Fn(usize) -> f64) -> f64 {
        self.grid.integrate(|i| weight(i) * f[i].norm_sqr())
    }

    pub fn l2_norm(&self) -> f64 {
        self.weighted_sq(&self.values, |_| 1.0).sqrt()
    }
}

/// How `E_L` treats a profile whose slope is negative somewhere.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SignMode {
    Strict,
    /// Use `rho' |r|^2` with its sign.
    #[default]
    Permissive,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct EnergyReport {
    pub e_l: f64,
    pub e: f64,
    pub h1_sq: f64,
    pub kinetic: f64,
    pub dissipation: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub neg_norms: Option<Vec<f64>>,
}

fn check_grid(r: &ScalarField1D, p: &DensityProfile) -> Result<()> {
    let (gh, ph) = (r.grid.h(), p.h());
    if (gh - ph).abs() > 1e-12 * ph {
        return Err(Error::Config(format!("grid height {gh} differs from profile height {ph}")));
    }
    Ok(())
}

fn require_stabilizing(p: &DensityProfile) -> Result<()> {
    if p.flags().stabilizing {
        return Ok(());
    }
    let w = *validate_profile(p).get(Condition::Stabilizing);
    Err(Error::CoercivityDomain {
        min_abs_slope: w.witness_value,
        at: w.witness_x3,
    })
}

/// `E_L(r) = eps^2 int (rho'^2/rho) |grad r|^2 - g int rho' |r|^2`.
pub fn energy_el(r: &ScalarField1D, kappa: f64, p: &DensityProfile, params: PhysicalParams, mode: SignMode) -> Result<f64> {
    check_grid(r, p)?;
    let s = Nodal::new(p, r.grid);
    if mode == SignMode::Strict {
        let min = s.d1.iter().copied().fold(f64::INFINITY, f64::min);
        let max = s.d1.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if min < 0.0 {
            return Err(Error::Sign { min, max });
        }
    }
    Ok(el_value(r, kappa, &s, params))
}

fn el_value(r: &ScalarField1D, kappa: f64, s: &Nodal, params: PhysicalParams) -> f64 {
    let dr = r.derivative();
    let k2 = kappa * kappa;
    let grad = r
        .grid
        .integrate(|i| s.d1[i] * s.d1[i] / s.rho[i] * (k2 * r.values[i].norm_sqr() + dr[i].norm_sqr()));
    let pot = r.weighted_sq(&r.values, |i| s.d1[i]);
    params.eps * params.eps * grad - params.g * pot
}

/// `E(r) = eps^2 int |grad r|^2 / rho + int ((eps^2 (rho''/rho)' - g) / rho') |r|^2`.
pub fn energy_e(r: &ScalarField1D, kappa: f64, p: &DensityProfile, params: PhysicalParams) -> Result<f64> {
    check_grid(r, p)?;
    require_stabilizing(p)?;
    let s = Nodal::new(p, r.grid);
    Ok(e_value(r, kappa, &s, params))
}

fn e_value(r: &ScalarField1D, kappa: f64, s: &Nodal, params: PhysicalParams) -> f64 {
    let dr = r.derivative();
    let k2 = kappa * kappa;
    let e2 = params.eps * params.eps;
    let grad = r.grid.integrate(|i| (k2 * r.values[i].norm_sqr() + dr[i].norm_sqr()) / s.rho[i]);
    let pot = r.weighted_sq(&r.values, |i| (e2 * s.quantum_slope(i) - params.g) / s.d1[i]);
    e2 * grad + pot
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UpsilonCheck {
    pub residual: f64,
    /// `int |grad r|^2/rho + ((rho''/rho)'/rho') |r|^2`
    pub lhs: f64,
    /// `int (rho'^2/rho) |grad Upsilon|^2`
    pub rhs: f64,
    pub energy_e: f64,
    /// `E_L(Upsilon)` with `Upsilon = r / rho'`.
    pub energy_el_upsilon: f64,
}

pub fn upsilon_identity_residual(r: &ScalarField1D, kappa: f64, p: &DensityProfile, params: PhysicalParams) -> Result<UpsilonCheck> {
    check_grid(r, p)?;
    require_stabilizing(p)?;
    let s = Nodal::new(p, r.grid);
    let k2 = kappa * kappa;
    let dr = r.derivative();
    let lhs = r
        .grid
        .integrate(|i| (k2 * r.values[i].norm_sqr() + dr[i].norm_sqr()) / s.rho[i] + s.quantum_slope(i) / s.d1[i] * r.values[i].norm_sqr());
    let ups = ScalarField1D {
        grid: r.grid,
        values: r.values.iter().zip(&s.d1).map(|(v, d)| v / d).collect(),
        bc: r.bc,
    };
    let du = ups.derivative();
    let rhs = r
        .grid
        .integrate(|i| s.d1[i] * s.d1[i] / s.rho[i] * (k2 * ups.values[i].norm_sqr() + du[i].norm_sqr()));
    let residual = (lhs - rhs).abs() / lhs.abs().max(rhs.abs()).max(1e-30);
    Ok(UpsilonCheck {
        residual,
        lhs,
        rhs,
        energy_e: e_value(r, kappa, &s, params),
        energy_el_upsilon: el_value(&ups, kappa, &s, params),
    })
}

/// `D1[:, I]^T diag(w * weight) D1[:, I]` over interior (Dirichlet) columns.
pub(crate) fn stiffness(grid: &SlabGrid, weight: impl Fn(usize) -> f64) -> DMatrix<f64> {
    let n = grid.n();
    let d = grid.diff(1).columns(1, n - 2);
    let wd = DMatrix::from_fn(n, n - 2, |i, j| grid.weights()[i] * weight(i) * d[(i, j)]);
    d.transpose() * wd
}

/// `diag(w * weight)` on interior nodes.
pub(crate) fn mass(grid: &SlabGrid, weight: impl Fn(usize) -> f64) -> DMatrix<f64> {
    let n = grid.n();
    DMatrix::from_fn(
        n - 2,
        n - 2,
        |i, j| if i == j { grid.weights()[i + 1] * weight(i + 1) } else { 0.0 },
    )
}

/// Discrete `int (1 + kappa^2)|r|^2 + |r'|^2` on the Dirichlet space.
fn h1_matrix(grid: &SlabGrid, kappa: f64) -> DMatrix<f64> {
    stiffness(grid, |_| 1.0) + mass(grid, |_| 1.0 + kappa * kappa)
}

fn embed(grid: &SlabGrid, interior: impl Iterator<Item = f64>) -> Vec<f64> {
    let mut v = alloc::vec![0.0];
    v.extend(interior);
    v.push(0.0);
    debug_assert_eq!(v.len(), grid.n());
    v
}

/// Smallest eigenvalue of the pencil (E_L form, H^1 form) on the Dirichlet
/// space. Positive exactly when `E_L` is coercive on the discrete space.
pub fn energy_el_pencil_minimum(kappa: f64, p: &DensityProfile, params: PhysicalParams, grid: &SlabGrid) -> Result<f64> {
    let s = Nodal::new(p, grid);
    let e2 = params.eps * params.eps;
    let q = |i: usize| s.d1[i] * s.d1[i] / s.rho[i];
    let el = stiffness(grid, q) * e2 + mass(grid, |i| e2 * kappa * kappa * q(i) - params.g * s.d1[i]);
    let (vals, _) = sym_definite_eig(&el, &h1_matrix(grid, kappa))?;
    Ok(vals[0])
}

/// Smallest `c` with `||r||_1^2 <= c E(r)` over the discrete Dirichlet space.
pub fn stabilizing_constant(kappa: f64, p: &DensityProfile, params: PhysicalParams, grid: &SlabGrid) -> Result<f64> {
    require_stabilizing(p)?;
    let s = Nodal::new(p, grid);
    let e2 = params.eps * params.eps;
    let e = stiffness(grid, |i| e2 / s.rho[i])
        + mass(grid, |i| {
            e2 * kappa * kappa / s.rho[i] + (e2 * s.quantum_slope(i) - params.g) / s.d1[i]
        });
    let h1 = h1_matrix(grid, kappa);
    let (vals, vecs) = sym_definite_eig(&e, &h1)?;
    let lam = vals[0];
    if lam <= 0.0 {
        // Columns are H^1-normalized, so E(direction) = lam.
        return Err(Error::NonCoercive {
            energy: lam,
            direction: embed(grid, vecs.column(0).iter().copied()),
        });
    }
    Ok(1.0 / lam)
}

fn quotient_parts(phi: &ScalarField1D, p: &DensityProfile) -> Result<(f64, f64, f64)> {
    check_grid(phi, p)?;
    let s = Nodal::new(p, phi.grid);
    let dphi = phi.derivative();
    let q = |i: usize| s.d1[i] * s.d1[i] / s.rho[i];
    let num = phi.weighted_sq(&phi.values, |i| s.d1[i]);
    let grad = phi.weighted_sq(&dphi, q);
    let zero = phi.weighted_sq(&phi.values, q);
    Ok((num, grad, zero))
}

/// `int rho' phi^2 / int (rho'^2/rho) phi'^2`.
pub fn rayleigh_quotient_1d(phi: &ScalarField1D, p: &DensityProfile) -> Result<f64> {
    let (num, den, _) = quotient_parts(phi, p)?;
    if !(den > 0.0) {
        return Err(Error::DegenerateQuotient);
    }
    Ok(num / den)
}

/// Reduced quotient of the divergence-free witness field with horizontal
/// frequency `k`: the denominator gains `8 k^-2 int (rho'^2/rho) phi^2`.
pub fn witness_quotient(phi: &ScalarField1D, k: f64, p: &DensityProfile) -> Result<f64> {
    if !(k > 0.0) {
        return Err(Error::Domain(format!("witness frequency must be positive, got {k}")));
    }
    let (num, grad, zero) = quotient_parts(phi, p)?;
    let den = grad + 8.0 / (k * k) * zero;
    if !(den > 0.0) {
        return Err(Error::DegenerateQuotient);
    }
    Ok(num / den)
}

/// Ratio `8 k^-2 int (rho'^2/rho) phi^2 / int (rho'^2/rho) phi'^2`.
pub fn witness_correction_ratio(phi: &ScalarField1D, k: f64, p: &DensityProfile) -> Result<f64> {
    let (_, grad, zero) = quotient_parts(phi, p)?;
    if !(grad > 0.0) {
        return Err(Error::DegenerateQuotient);
    }
    Ok(8.0 / (k * k) * zero / grad)
}

/// A real perturbation `varrho(x1, x3)` on a periodic-in-`x1` plane.
/// `values[(i, j)]` sits at `(i L1 / n1, x3_j)`.
#[derive(Debug, Clone, PartialEq)]
pub struct PlaneField<'g> {
    pub l1: f64,
    pub slab: &'g SlabGrid,
    pub values: DMatrix<f64>,
}

impl<'g> PlaneField<'g> {
    pub fn from_fn(l1: f64, n1: usize, slab: &'g SlabGrid, f: impl Fn(f64, f64) -> f64) -> Self {
        let values = DMatrix::from_fn(n1, slab.n(), |i, j| f(i as f64 * l1 / n1 as f64, slab.nodes()[j]));
        PlaneField { l1, slab, values }
    }

    pub fn n1(&self) -> usize {
        self.values.nrows()
    }
}

/// Vector field on the plane grid: `(x1 component, x3 component)`.
pub type PlaneVector = [DMatrix<f64>; 2];

#[derive(Debug, Clone, PartialEq)]
pub struct StressDecomposition {
    pub q: PlaneVector,
    pub ql: PlaneVector,
    pub qn: PlaneVector,
    pub residual: f64,
}

/// Periodic spectral first-derivative matrix on `n` uniform points of `[0, l)`.
pub fn periodic_diff(n: usize, l: f64) -> DMatrix<f64> {
    use core::f64::consts::PI;
    assert!(n >= 2 && n % 2 == 0, "periodic grid needs an even point count");
    let scale = 2.0 * PI / l;
    DMatrix::from_fn(n, n, |i, j| {
        if i == j {
            0.0
        } else {
            let d = i as f64 - j as f64;
            let sign = if (i + j) % 2 == 0 { 1.0 } else { -1.0 };
            0.5 * scale * sign / (PI * d / n as f64).tan()
        }
    })
}

/// Computes `Q`, `Q^L` and `Q^N` each from its own defining formula and
/// reports `max|Q - Q^L - Q^N| / max|Q|`.
pub fn decompose_quantum_stress(field: &PlaneField, p: &DensityProfile) -> Result<StressDecomposition> {
    let slab = field.slab;
    let (n1, n3) = (field.n1(), slab.n());
    let s = Nodal::new(p, slab);
    let r = &field.values;
    let dx = periodic_diff(n1, field.l1);
    let dzt = slab.diff(1).transpose();
    let d1 = |f: &DMatrix<f64>| &dx * f;
    let d3 = |f: &DMatrix<f64>| f * &dzt;
    let col = |v: &[f64]| DMatrix::from_fn(n1, n3, |_, j| v[j]);

    let rho_bar = col(&s.rho);
    let rho = &rho_bar + r;
    if let Some(((i, j), v)) = rho
        .iter()
        .enumerate()
        .map(|(k, v)| ((k % n1, k / n1), *v))
        .find(|(_, v)| !(*v > 0.0))
    {
        return Err(Error::Domain(format!(
            "total density {v} <= 0 at x1 = {}, x3 = {}",
            i as f64 * field.l1 / n1 as f64,
            slab.nodes()[j]
        )));
    }
    let a_v: Vec<f64> = (0..n3).map(|j| s.d1[j] / s.rho[j]).collect();
    let ap_v: Vec<f64> = (0..n3).map(|j| s.d2[j] / s.rho[j] - a_v[j] * a_v[j]).collect();
    let a = col(&a_v);
    let ap = col(&ap_v);
    let rb1 = col(&s.d1);

    let g1 = d1(r);
    let g3 = d3(r);
    let lap = d1(&g1) + d3(&g3);

    // Q = div(grad rho (x) grad rho / rho - grad rho_bar (x) grad rho_bar / rho_bar)
    let t1 = &rb1 + &g3;
    let t11 = g1.zip_map(&rho, |g, q| g * g / q);
    let t13 = g1.zip_zip_map(&t1, &rho, |g, t, q| g * t / q);
    let t33 = DMatrix::from_fn(n1, n3, |i, j| t1[(i, j)] * t1[(i, j)] / rho[(i, j)] - s.d1[j] * s.d1[j] / s.rho[j]);
    let q = [d1(&t11) + d3(&t13), d1(&t13) + d3(&t33)];

    // Q^L = d3(a grad r) + (a' d3 r - d3(a^2 r) + a lap r) e3
    let ag1 = a.component_mul(&g1);
    let ag3 = a.component_mul(&g3);
    let a2r = a.component_mul(&a).component_mul(r);
    let ql = [d3(&ag1), d3(&ag3) + ap.component_mul(&g3) - d3(&a2r) + a.component_mul(&lap)];

    // Q^N = d3(c (a r e3 - grad r)) + div(grad r (x) grad r / rho - c grad r (x) e3)
    let c = DMatrix::from_fn(n1, n3, |i, j| s.d1[j] * r[(i, j)] / (s.rho[j] * rho[(i, j)]));
    let cv1 = -c.component_mul(&g1);
    let cv3 = c.component_mul(&(a.component_mul(r) - &g3));
    let n11 = g1.zip_map(&rho, |g, q| g * g / q);
    let n13 = g1.zip_zip_map(&g3, &rho, |u, v, q| u * v / q);
    let n33 = g3.zip_map(&rho, |g, q| g * g / q);
    let cg1 = c.component_mul(&g1);
    let cg3 = c.component_mul(&g3);
    let qn = [
        d3(&cv1) + d1(&n11) + d3(&n13),
        d3(&cv3) + d1(&(n13.clone() - cg1)) + d3(&(n33 - cg3)),
    ];

    let qmax = q[0].amax().max(q[1].amax());
    let diff = (&q[0] - &ql[0] - &qn[0]).amax().max((&q[1] - &ql[1] - &qn[1]).amax());
    let residual = if qmax > 0.0 { diff / qmax } else { diff };
    Ok(StressDecomposition { q, ql, qn, residual })
}
