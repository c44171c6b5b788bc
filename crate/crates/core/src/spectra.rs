//! Critical scaled Planck constant, the single-mode linearized operator and
//! dispersion scans.
//!
//! The density unknown of the normal-mode pencil is the vertical displacement
//! `xi` with `varrho = -rho' xi`, so `sigma xi = v3` holds even where `rho'`
//! vanishes. The pressure is removed by the curl-curl reduction, which leaves
//! a fourth-order equation for `v3` coupled to `xi`, and a decoupled heat
//! equation for the vertical vorticity `omega3`.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use nalgebra::DMatrix;
use num_complex::Complex64;
#[allow(unused_imports)] // shadowed by inherent methods whenever std is linked
use num_traits::Float;
use serde::{Deserialize, Serialize};

use crate::energetics::{mass, stiffness, Nodal};
use crate::linalg::{condensation, eigenvalues, inverse_iteration, sym_definite_eig};
use crate::profiles::{DensityProfile, PhysicalParams, FLAG_SAMPLES};
use crate::slabgrid::{Scheme, SlabGrid};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GridMeta {
    pub n: usize,
    pub scheme: Scheme,
}

impl GridMeta {
    fn of(grid: &SlabGrid) -> Self {
        GridMeta {
            n: grid.n(),
            scheme: grid.scheme(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdResult {
    pub eps_c: f64,
    pub a3: f64,
    /// Extremal function at the grid nodes (zero at the walls), `int rho' phi^2 = 1`.
    pub phi_star: Vec<f64>,
    pub grid_meta: GridMeta,
}

fn a3_pencil(p: &DensityProfile, grid: &SlabGrid) -> (DMatrix<f64>, DMatrix<f64>, Nodal) {
    let s = Nodal::new(p, grid);
    let k = stiffness(grid, |i| s.d1[i] * s.d1[i] / s.rho[i]);
    let m = mass(grid, |i| s.d1[i]);
    (k, m, s)
}

/// Smallest eigenpair of `-((rho'^2/rho) phi')' = nu rho' phi` by collocation.
///
/// On the uniform grid the weak form `D1^T W D1` carries spurious modes
/// localized at the walls (the wide centered stencil has a decaying root),
/// which shift its extremum by O(dx); collocating the strong form keeps
/// fourth order.
fn collocated_extremal(grid: &SlabGrid, s: &Nodal, m: &DMatrix<f64>) -> Result<(f64, Vec<f64>)> {
    let n = grid.n();
    let (d1, d2) = (grid.diff(1), grid.diff(2));
    // w = rho'^2 / rho and its derivative
    let w = |i: usize| s.d1[i] * s.d1[i] / s.rho[i];
    let dw = |i: usize| (2.0 * s.d1[i] * s.d2[i] * s.rho[i] - s.d1[i].powi(3)) / (s.rho[i] * s.rho[i]);
    let a = DMatrix::from_fn(n - 2, n - 2, |i, j| {
        let (r, c) = (i + 1, j + 1);
        -(w(r) * d2[(r, c)] + dw(r) * d1[(r, c)]) / s.d1[r]
    });
    let nu = eigenvalues(a.clone())?
        .into_iter()
        .filter(|z| z.im.abs() <= 1e-8 * z.norm())
        .map(|z| z.re)
        .fold(f64::INFINITY, f64::min);
    if !(nu.is_finite() && nu > 0.0) {
        return Err(Error::Numerical(format!(
            "collocated threshold pencil has no positive real eigenvalue (got {nu})"
        )));
    }
    let x = inverse_iteration(&a, &DMatrix::identity(n - 2, n - 2), Complex64::new(nu, 0.0))?;
    let mut v: Vec<f64> = x.iter().map(|z| z.re).collect();
    let norm = (0..n - 2).map(|i| m[(i, i)] * v[i] * v[i]).sum::<f64>().sqrt();
    v.iter_mut().for_each(|e| *e /= norm);
    Ok((nu, v))
}

/// `a3 = sup int rho' phi^2 / int (rho'^2/rho) phi'^2` on the Dirichlet space,
/// and `eps_c = sqrt(g a3)`.
pub fn critical_epsilon(p: &DensityProfile, g: f64, grid: &SlabGrid) -> Result<ThresholdResult> {
    if !(g > 0.0) {
        return Err(Error::Config(format!("gravity must be positive, got {g}")));
    }
    let flags = p.flags();
    if !flags.stabilizing {
        return Err(Error::ThresholdUndefined {
            reason: "rho' vanishes inside the slab (stabilizing condition fails)",
        });
    }
    if !flags.rt_condition {
        return Err(Error::ThresholdUndefined {
            reason: "rho' < 0 everywhere, so the weighted mass is negative definite",
        });
    }
    let (k, m, s) = a3_pencil(p, grid);
    if s.d1.iter().any(|&d| !(d > 0.0)) {
        return Err(Error::ThresholdUndefined {
            reason: "rho' changes sign, so the weighted mass is indefinite",
        });
    }
    let (nu, interior) = match grid.scheme() {
        // K phi = nu M phi; columns come M-normalized.
        Scheme::ChebyshevLobatto => {
            let (nu, vecs) = sym_definite_eig(&k, &m)?;
            (nu[0], vecs.column(0).iter().copied().collect::<Vec<f64>>())
        }
        Scheme::FiniteDifference4 => collocated_extremal(grid, &s, &m)?,
    };
    let a3 = 1.0 / nu;
    let mut phi = vec![0.0];
    phi.extend(interior);
    phi.push(0.0);
    // Deterministic sign: positive in the interior majority.
    if phi.iter().sum::<f64>() < 0.0 {
        phi.iter_mut().for_each(|v| *v = -*v);
    }
    Ok(ThresholdResult {
        eps_c: (g * a3).sqrt(),
        a3,
        phi_star: phi,
        grid_meta: GridMeta::of(grid),
    })
}

/// Discrete `a3` without the stabilizing requirement; only `rho' >= 0` at the
/// nodes is needed. Used to watch `a3` blow up on degenerate profiles.
pub fn discrete_a3(p: &DensityProfile, grid: &SlabGrid) -> Result<f64> {
    let (k, m, s) = a3_pencil(p, grid);
    if s.d1.iter().any(|&d| d < 0.0) || s.d1.iter().all(|&d| d == 0.0) {
        return Err(Error::ThresholdUndefined {
            reason: "rho' must be nonnegative and not identically zero",
        });
    }
    let (lam, _) = sym_definite_eig(&m, &k)?;
    Ok(*lam.last().expect("nonempty pencil"))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UpperBounds {
    /// `(h/pi) sqrt(g ||rho'||_inf ||rho/rho'^2||_inf)`
    pub general: f64,
    /// `(h/pi) sqrt(g ||rho||_inf / alpha)` when `rho' = alpha` is constant.
    pub linear: Option<f64>,
}

pub fn epsilon_upper_bound(p: &DensityProfile, g: f64) -> Result<UpperBounds> {
    if !p.flags().stabilizing {
        return Err(Error::ThresholdUndefined {
            reason: "the bound needs inf |rho'| > 0",
        });
    }
    let h = p.h();
    let (mut slope_max, mut ratio_max, mut rho_max) = (0.0f64, 0.0f64, 0.0f64);
    let (mut slope_lo, mut slope_hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for i in 0..FLAG_SAMPLES {
        let j = p.jet(h * i as f64 / (FLAG_SAMPLES - 1) as f64);
        let (rho, d1) = (j.value(), j.derivative(1));
        slope_max = slope_max.max(d1.abs());
        ratio_max = ratio_max.max(rho / (d1 * d1));
        rho_max = rho_max.max(rho);
        slope_lo = slope_lo.min(d1);
        slope_hi = slope_hi.max(d1);
    }
    let pi = core::f64::consts::PI;
    let general = h / pi * (g * slope_max * ratio_max).sqrt();
    let constant = slope_lo > 0.0 && slope_hi - slope_lo <= 1e-10 * slope_hi;
    let linear = constant.then(|| h / pi * (g * rho_max / slope_lo).sqrt());
    Ok(UpperBounds { general, linear })
}

/// One condensed sub-pencil `B y' = A y` with `u = P y`.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Block {
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub p: DMatrix<f64>,
    /// Offset of the block's unknowns inside the stacked nodal vector.
    pub offset: usize,
    /// Nodal indices (relative to `offset`) kept as condensed coordinates.
    pub free: Vec<usize>,
}

/// Normal-mode pencil for one `|kappa|`.
#[derive(Debug, Clone, PartialEq)]
pub struct ModeOperator {
    pub kappa: f64,
    pub n: usize,
    pub h: f64,
    pub params: PhysicalParams,
    /// Full `3n x 3n` pencil on `(xi, v3, omega3)`; wall rows sit in `a` with
    /// zero rows in `b`.
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub wall_rows: Vec<usize>,
    pub(crate) blocks: Vec<Block>,
}

impl ModeOperator {
    /// `kappa = 0`: `v3` is forced to vanish, the density slot is neutral and
    /// the third slot carries a horizontal velocity component.
    pub fn is_degenerate(&self) -> bool {
        self.kappa == 0.0
    }

    /// Spurious-mode cutoff `10 mu n^4 / h^4`.
    pub fn cutoff(&self) -> f64 {
        10.0 * self.params.mu * (self.n as f64).powi(4) / self.h.powi(4)
    }
}

struct Coefficients {
    rho: Vec<f64>,
    d1: Vec<f64>,
    a: Vec<f64>,
    a2: Vec<f64>,
    app: Vec<f64>,
}

fn coefficients(p: &DensityProfile, grid: &SlabGrid) -> Coefficients {
    let s = Nodal::new(p, grid);
    let n = grid.n();
    let mut c = Coefficients {
        rho: s.rho.clone(),
        d1: s.d1.clone(),
        a: Vec::with_capacity(n),
        a2: Vec::with_capacity(n),
        app: Vec::with_capacity(n),
    };
    for i in 0..n {
        let a = s.d1[i] / s.rho[i];
        let ap = s.d2[i] / s.rho[i] - a * a;
        let app = s.d3[i] / s.rho[i] - s.d2[i] * s.d1[i] / (s.rho[i] * s.rho[i]) - 2.0 * a * ap;
        c.a.push(a);
        c.a2.push(a * a);
        c.app.push(app);
    }
    c
}

/// Coupled `(xi, v3)` block: rows `{0, 1, n-2, n-1}` of each unknown carry
/// `u = 0` and `D2 u = 0`.
fn coupled_block(c: &Coefficients, params: PhysicalParams, kappa: f64, grid: &SlabGrid) -> Result<(DMatrix<f64>, DMatrix<f64>, Block)> {
    let n = grid.n();
    let (d1, d2, d4) = (grid.diff(1), grid.diff(2), grid.diff(4));
    let k2 = kappa * kappa;
    let e2 = params.eps * params.eps;
    let mut a = DMatrix::<f64>::zeros(2 * n, 2 * n);
    let mut b = DMatrix::<f64>::zeros(2 * n, 2 * n);
    for i in 2..n - 2 {
        a[(i, n + i)] = 1.0;
        b[(i, i)] = 1.0;
        let row = n + i;
        for j in 0..n {
            let id = if i == j { 1.0 } else { 0.0 };
            b[(row, n + j)] = k2 * c.rho[i] * id - c.d1[i] * d1[(i, j)] - c.rho[i] * d2[(i, j)];
            a[(row, n + j)] = -params.mu * (d4[(i, j)] - 2.0 * k2 * d2[(i, j)] + k2 * k2 * id);
            // F = g + eps^2 (a (D2 - k^2) - a'' - D1 a^2), acting on rho' xi
            let f = params.g * id + e2 * (c.a[i] * (d2[(i, j)] - k2 * id) - c.app[i] * id - d1[(i, j)] * c.a2[j]);
            a[(row, j)] = k2 * f * c.d1[j];
        }
    }
    let wall = [0, 1, n - 2, n - 1];
    let mut constraints = DMatrix::<f64>::zeros(8, 2 * n);
    for (slot, off) in [0, n].into_iter().enumerate() {
        let r = 4 * slot;
        constraints[(r, off)] = 1.0;
        constraints[(r + 3, off + n - 1)] = 1.0;
        for j in 0..n {
            constraints[(r + 1, off + j)] = d2[(0, j)];
            constraints[(r + 2, off + j)] = d2[(n - 1, j)];
        }
    }
    let boundary: Vec<usize> = [0, n].iter().flat_map(|&off| wall.iter().map(move |w| off + w)).collect();
    for (k, &row) in boundary.iter().enumerate() {
        a.row_mut(row).copy_from(&constraints.row(k));
    }
    let p = condensation(&constraints, &boundary)?;
    let interior: Vec<usize> = (0..2 * n).filter(|r| !boundary.contains(r)).collect();
    let blk = Block {
        a: a.select_rows(&interior) * &p,
        b: b.select_rows(&interior) * &p,
        p,
        offset: 0,
        free: interior,
    };
    Ok((a, b, blk))
}

/// Heat block `sigma rho u = mu (D2 - kappa^2) u` with Neumann walls.
fn heat_block(c: &Coefficients, mu: f64, kappa: f64, grid: &SlabGrid, offset: usize) -> Result<(DMatrix<f64>, DMatrix<f64>, Block)> {
    let n = grid.n();
    let (d1, d2) = (grid.diff(1), grid.diff(2));
    let k2 = kappa * kappa;
    let mut a = DMatrix::<f64>::zeros(n, n);
    let mut b = DMatrix::<f64>::zeros(n, n);
    for i in 1..n - 1 {
        for j in 0..n {
            a[(i, j)] = mu * (d2[(i, j)] - if i == j { k2 } else { 0.0 });
        }
        b[(i, i)] = c.rho[i];
    }
    let mut constraints = DMatrix::<f64>::zeros(2, n);
    constraints.row_mut(0).copy_from(&d1.row(0));
    constraints.row_mut(1).copy_from(&d1.row(n - 1));
    a.row_mut(0).copy_from(&constraints.row(0));
    a.row_mut(n - 1).copy_from(&constraints.row(1));
    let p = condensation(&constraints, &[0, n - 1])?;
    let interior: Vec<usize> = (1..n - 1).collect();
    let blk = Block {
        a: a.select_rows(&interior) * &p,
        b: b.select_rows(&interior) * &p,
        p,
        offset,
        free: interior,
    };
    Ok((a, b, blk))
}

fn check_grid(p: &DensityProfile, grid: &SlabGrid) -> Result<()> {
    if (p.h() - grid.h()).abs() > 1e-12 * p.h() {
        return Err(Error::Config(format!(
            "grid height {} differs from profile height {}",
            grid.h(),
            p.h()
        )));
    }
    Ok(())
}

pub fn linearized_operator(p: &DensityProfile, params: PhysicalParams, kappa: f64, grid: &SlabGrid) -> Result<ModeOperator> {
    params.check()?;
    check_grid(p, grid)?;
    let kappa = kappa.abs();
    let n = grid.n();
    let c = coefficients(p, grid);
    let mut a = DMatrix::<f64>::zeros(3 * n, 3 * n);
    let mut b = DMatrix::<f64>::zeros(3 * n, 3 * n);
    let mut wall_rows = Vec::new();
    let mut blocks = Vec::new();
    if kappa == 0.0 {
        // Density: sigma xi = 0 with no wall rows. v3 = 0 identically.
        let density = Block {
            a: DMatrix::zeros(n, n),
            b: DMatrix::identity(n, n),
            p: DMatrix::identity(n, n),
            offset: 0,
            free: (0..n).collect(),
        };
        for i in 0..n {
            b[(i, i)] = 1.0;
            a[(n + i, n + i)] = 1.0;
            wall_rows.push(n + i);
        }
        blocks.push(density);
    } else {
        let (ac, bc, blk) = coupled_block(&c, params, kappa, grid)?;
        a.view_mut((0, 0), (2 * n, 2 * n)).copy_from(&ac);
        b.view_mut((0, 0), (2 * n, 2 * n)).copy_from(&bc);
        for off in [0, n] {
            wall_rows.extend([off, off + 1, off + n - 2, off + n - 1]);
        }
        blocks.push(blk);
    }
    let (ah, bh, blk) = heat_block(&c, params.mu, kappa, grid, 2 * n)?;
    a.view_mut((2 * n, 2 * n), (n, n)).copy_from(&ah);
    b.view_mut((2 * n, 2 * n), (n, n)).copy_from(&bh);
    wall_rows.extend([2 * n, 3 * n - 1]);
    blocks.push(blk);
    Ok(ModeOperator {
        kappa,
        n,
        h: grid.h(),
        params,
        a,
        b,
        wall_rows,
        blocks,
    })
}

/// Generalized eigenvalues of a condensed block by shift-and-invert.
pub(crate) fn block_eigenvalues(blk: &Block) -> Result<Vec<Complex64>> {
    let m = blk.a.nrows();
    if blk.a.iter().all(|&v| v == 0.0) {
        return Ok(vec![Complex64::new(0.0, 0.0); m]);
    }
    let scale = blk.a.amax() / blk.b.amax().max(f64::MIN_POSITIVE);
    let mut last = Error::Numerical("no usable shift".into());
    for s in [0.0, -1e-3, 1.3e-3, -0.1] {
        let shifted = &blk.a - &blk.b * s;
        let lu = shifted.lu();
        let u = lu.u();
        let diag_max = u.diagonal().amax();
        let diag_min = u.diagonal().iter().fold(f64::INFINITY, |acc, v| acc.min(v.abs()));
        if !(diag_min > 1e-14 * diag_max) {
            last = Error::Numerical(format!(
                "shifted pencil singular at shift {s} (pivot ratio {:e}, |A|/|B| = {scale:e})",
                diag_min / diag_max
            ));
            continue;
        }
        let t = match lu.solve(&blk.b) {
            Some(t) if t.iter().all(|v| v.is_finite()) => t,
            _ => continue,
        };
        let lam = eigenvalues(t)?;
        return Ok(lam
            .into_iter()
            .filter(|l| l.norm() > 0.0)
            .map(|l| Complex64::new(s, 0.0) + l.inv())
            .collect());
    }
    Err(last)
}

fn sort_by_growth(v: &mut [Complex64]) {
    v.sort_by(|x, y| y.re.total_cmp(&x.re).then(y.im.total_cmp(&x.im)));
}

/// The `count` eigenvalues of largest real part after dropping `|sigma|`
/// above [`ModeOperator::cutoff`].
pub fn mode_spectrum(op: &ModeOperator, count: usize) -> Result<Vec<Complex64>> {
    let cutoff = op.cutoff();
    let mut all = Vec::new();
    for blk in &op.blocks {
        all.extend(
            block_eigenvalues(blk)?
                .into_iter()
                .filter(|s| s.norm() <= cutoff && s.re.is_finite()),
        );
    }
    sort_by_growth(&mut all);
    all.truncate(count);
    Ok(all)
}

/// Eigenvalues of the `omega3` (or, at `kappa = 0`, horizontal velocity) block only.
pub fn diffusive_spectrum(op: &ModeOperator, count: usize) -> Result<Vec<Complex64>> {
    let blk = op.blocks.last().expect("heat block");
    let mut v: Vec<Complex64> = block_eigenvalues(blk)?.into_iter().filter(|s| s.norm() <= op.cutoff()).collect();
    sort_by_growth(&mut v);
    v.truncate(count);
    Ok(v)
}

/// Keeps the eigenvalues of `coarse` that reappear in `fine` within `rel`.
pub fn resolved_filter(coarse: &[Complex64], fine: &[Complex64], rel: f64) -> Vec<Complex64> {
    coarse
        .iter()
        .copied()
        .filter(|s| fine.iter().any(|f| (f - s).norm() <= rel * s.norm().max(1e-300)))
        .collect()
}

/// Largest real part of the coupled `(xi, v3)` block at `kappa > 0`. The
/// vorticity block is strictly dissipative and never decides the sign.
pub fn max_growth_rate(p: &DensityProfile, params: PhysicalParams, kappa: f64, grid: &SlabGrid) -> Result<f64> {
    if !(kappa.abs() > 0.0) {
        return Err(Error::Domain("growth rate scan needs kappa != 0".into()));
    }
    check_grid(p, grid)?;
    let c = coefficients(p, grid);
    let (_, _, blk) = coupled_block(&c, params, kappa.abs(), grid)?;
    let cutoff = 10.0 * params.mu * (grid.n() as f64).powi(4) / grid.h().powi(4);
    block_eigenvalues(&blk)?
        .into_iter()
        .filter(|s| s.norm() <= cutoff)
        .map(|s| s.re)
        .max_by(f64::total_cmp)
        .ok_or_else(|| Error::Numerical("every eigenvalue was filtered".into()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DispersionResult {
    pub kappas: Vec<f64>,
    /// Leading eigenvalues per `kappa`, sorted by real part (largest first).
    pub eigenvalues: Vec<Vec<Complex64>>,
    pub max_growth: Vec<f64>,
    pub kappa_c: Option<f64>,
    pub params: PhysicalParams,
    pub grid_meta: GridMeta,
}

pub fn check_kappa_grid(kappas: &[f64]) -> Result<()> {
    if kappas.is_empty() || kappas[0] <= 0.0 || kappas.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::Config("kappa grid must be positive and strictly increasing".into()));
    }
    Ok(())
}

/// First sign change of `values` over `kappas`, linearly interpolated.
pub fn sign_change(kappas: &[f64], values: &[f64]) -> Option<f64> {
    (0..values.len().saturating_sub(1)).find_map(|i| {
        let (f0, f1) = (values[i], values[i + 1]);
        if (f0 > 0.0) != (f1 > 0.0) {
            Some(kappas[i] + (kappas[i + 1] - kappas[i]) * f0 / (f0 - f1))
        } else {
            None
        }
    })
}

/// Leading eigenvalues at a single `kappa`; the unit of work of a scan.
pub fn scan_point(p: &DensityProfile, params: PhysicalParams, kappa: f64, grid: &SlabGrid, count: usize) -> Result<Vec<Complex64>> {
    let op = linearized_operator(p, params, kappa, grid)?;
    mode_spectrum(&op, count.max(1))
}

/// Assembles a scan from per-`kappa` results computed in any order.
pub fn assemble_dispersion(
    kappas: Vec<f64>,
    eigenvalues: Vec<Vec<Complex64>>,
    params: PhysicalParams,
    grid: &SlabGrid,
) -> DispersionResult {
    let max_growth: Vec<f64> = eigenvalues.iter().map(|e| e.first().map_or(f64::NEG_INFINITY, |s| s.re)).collect();
    let kappa_c = sign_change(&kappas, &max_growth);
    DispersionResult {
        kappas,
        eigenvalues,
        max_growth,
        kappa_c,
        params,
        grid_meta: GridMeta::of(grid),
    }
}

pub fn dispersion_scan(
    p: &DensityProfile,
    params: PhysicalParams,
    kappas: &[f64],
    grid: &SlabGrid,
    count: usize,
) -> Result<DispersionResult> {
    check_kappa_grid(kappas)?;
    let eig = kappas
        .iter()
        .map(|&k| scan_point(p, params, k, grid, count))
        .collect::<Result<Vec<_>>>()?;
    Ok(assemble_dispersion(kappas.to_vec(), eig, params, grid))
}

/// `count` log-spaced points of `[lo, hi]`.
pub fn log_spaced(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    assert!(count >= 2 && lo > 0.0 && hi > lo);
    let (a, b) = (lo.ln(), hi.ln());
    let mut v: Vec<f64> = (0..count).map(|i| (a + (b - a) * i as f64 / (count - 1) as f64).exp()).collect();
    v[0] = lo;
    v[count - 1] = hi;
    v
}

/// Relative bracket width at which bisection stops.
pub const BISECTION_TOLERANCE: f64 = 1e-3;

/// Bisection on the sign of `f(eps)` (the largest growth rate over a scan).
/// `f` is the caller's evaluator so scans may run in parallel.
pub fn bisect_threshold(bracket: (f64, f64), mut f: impl FnMut(f64) -> Result<f64>) -> Result<f64> {
    let (mut lo, mut hi) = bracket;
    if !(hi > lo && lo >= 0.0) {
        return Err(Error::Config(format!("invalid bracket [{lo}, {hi}]")));
    }
    let (f_lo, f_hi) = (f(lo)?, f(hi)?);
    if (f_lo > 0.0) == (f_hi > 0.0) {
        return Err(Error::Bracket { lo, hi, f_lo, f_hi });
    }
    let lo_unstable = f_lo > 0.0;
    while hi - lo > BISECTION_TOLERANCE * hi {
        let mid = 0.5 * (lo + hi);
        if (f(mid)? > 0.0) == lo_unstable {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Largest growth rate over `kappas`; stops at the first positive value.
pub fn scan_max_growth(p: &DensityProfile, params: PhysicalParams, kappas: &[f64], grid: &SlabGrid) -> Result<f64> {
    let mut best = f64::NEG_INFINITY;
    for &k in kappas {
        best = best.max(max_growth_rate(p, params, k, grid)?);
        if best > 0.0 {
            break;
        }
    }
    Ok(best)
}

/// The `eps` at which the scanned dispersion relation crosses neutral stability.
pub fn find_critical_epsilon_spectral(
    p: &DensityProfile,
    params: PhysicalParams,
    grid: &SlabGrid,
    kappas: &[f64],
    bracket: (f64, f64),
) -> Result<f64> {
    check_kappa_grid(kappas)?;
    bisect_threshold(bracket, |eps| scan_max_growth(p, params.with_eps(eps), kappas, grid))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BychkovRate {
    /// `sqrt(|g gamma - (eps gamma kappa)^2|)`.
    pub sigma: f64,
    /// True when the radicand is negative (oscillatory, no growth).
    pub stable: bool,
}

/// `sigma = sqrt(g gamma - (eps gamma kappa)^2)` for a locally exponential layer.
pub fn bychkov_growth_rate(g: f64, gamma: f64, eps: f64, kappa: f64) -> Result<BychkovRate> {
    if !(gamma > 0.0) {
        return Err(Error::Domain(format!("gamma must be positive, got {gamma}")));
    }
    let q = eps * gamma * kappa;
    let radicand = g * gamma - q * q;
    Ok(BychkovRate {
        sigma: radicand.abs().sqrt(),
        stable: radicand < 0.0,
    })
}

/// Cutoff `kappa = sqrt(g / gamma) / eps`; none without quantum stress.
pub fn bychkov_cutoff(g: f64, gamma: f64, eps: f64) -> Option<f64> {
    (eps > 0.0 && gamma > 0.0).then(|| (g / gamma).sqrt() / eps)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::profiles::{make_profile, ProfileSpec};
    use crate::slabgrid::build_grid;

    fn linear() -> DensityProfile {
        make_profile(&ProfileSpec::linear(1.0, 1.0, 1.0)).unwrap()
    }

    #[test]
    fn finite_difference_threshold_is_fourth_order() {
        let p = make_profile(&ProfileSpec::exponential(1.0, 1.0, 1.0)).unwrap();
        let exact = critical_epsilon(&p, 1.0, &build_grid(128, 1.0, Scheme::ChebyshevLobatto).unwrap())
            .unwrap()
            .eps_c;
        let err = |n| {
            let t = critical_epsilon(&p, 1.0, &build_grid(n, 1.0, Scheme::FiniteDifference4).unwrap()).unwrap();
            (t.eps_c - exact).abs() / exact
        };
        let (e1, e2) = (err(128), err(256));
        assert!(e2 < 1e-5 && e1 / e2 > 10.0, "{e1:e} {e2:e}");
    }

    #[test]
    fn threshold_basics() {
        let p = linear();
        let g = build_grid(64, 1.0, Scheme::ChebyshevLobatto).unwrap();
        let t = critical_epsilon(&p, 1.0, &g).unwrap();
        assert!((t.eps_c - t.a3.sqrt()).abs() < 1e-15);
        let b = epsilon_upper_bound(&p, 1.0).unwrap();
        assert!(t.eps_c < b.general);
        let lin = b.linear.unwrap();
        assert!((lin - 2f64.sqrt() / core::f64::consts::PI).abs() < 1e-14);
        assert!(t.eps_c <= lin);
        let wide = epsilon_upper_bound(&make_profile(&ProfileSpec::linear(1.0, 0.5, 2.0)).unwrap(), 1.0).unwrap();
        assert!((wide.linear.unwrap() - 4.0 / core::f64::consts::PI).abs() < 1e-12);
    }

    #[test]
    fn threshold_refuses_degenerate() {
        let p = make_profile(&ProfileSpec::degenerate(1.0, 1.0, 1.0, 0.5, 1.0)).unwrap();
        let g = build_grid(32, 1.0, Scheme::ChebyshevLobatto).unwrap();
        assert!(matches!(critical_epsilon(&p, 1.0, &g), Err(Error::ThresholdUndefined { .. })));
        assert!(discrete_a3(&p, &g).unwrap() > 0.0);
    }

    #[test]
    fn bychkov() {
        let r = bychkov_growth_rate(1.0, 1.0, 1.0, 0.5).unwrap();
        assert!((r.sigma - 0.75f64.sqrt()).abs() < 1e-15 && !r.stable);
        let k = bychkov_cutoff(2.0, 0.5, 0.3).unwrap();
        assert!(bychkov_growth_rate(2.0, 0.5, 0.3, k).unwrap().sigma < 1e-7);
        assert!(bychkov_growth_rate(1.0, 1.0, 1.0, 3.0).unwrap().stable);
        assert!(bychkov_growth_rate(1.0, 0.0, 1.0, 3.0).is_err());
        for k in [0.0, 1.0, 100.0] {
            assert_eq!(bychkov_growth_rate(2.0, 3.0, 0.0, k).unwrap().sigma, 6f64.sqrt());
        }
    }

    #[test]
    fn kappa_zero_branch() {
        let p = linear();
        let g = build_grid(24, 1.0, Scheme::ChebyshevLobatto).unwrap();
        let op = linearized_operator(&p, PhysicalParams::new(1.0, 0.5, 0.1).unwrap(), 0.0, &g).unwrap();
        assert!(op.is_degenerate());
        let s = mode_spectrum(&op, 100).unwrap();
        assert_eq!(s[0], Complex64::new(0.0, 0.0));
        assert!(s.iter().all(|z| z.re <= 1e-10));
    }

    #[test]
    fn classical_instability_without_quantum_stress() {
        let p = linear();
        let g = build_grid(32, 1.0, Scheme::ChebyshevLobatto).unwrap();
        let par = PhysicalParams::new(1.0, 0.01, 0.0).unwrap();
        assert!(max_growth_rate(&p, par, 3.0, &g).unwrap() > 0.0);
        let op = linearized_operator(&p, par, 3.0, &g).unwrap();
        let neg = linearized_operator(&p, par, -3.0, &g).unwrap();
        assert_eq!(mode_spectrum(&op, 5).unwrap(), mode_spectrum(&neg, 5).unwrap());
    }

    #[test]
    fn diffusive_branch_matches_constant_coefficients() {
        let p = make_profile(&ProfileSpec::linear(1.0, 0.005, 1.0)).unwrap();
        let g = build_grid(32, 1.0, Scheme::ChebyshevLobatto).unwrap();
        let (mu, k) = (0.3, 2.0);
        let op = linearized_operator(&p, PhysicalParams::new(1.0, mu, 0.0).unwrap(), k, &g).unwrap();
        let s = diffusive_spectrum(&op, 4).unwrap();
        let pi = core::f64::consts::PI;
        for (j, z) in s.iter().enumerate() {
            let want = -mu * (k * k + (j as f64 * pi).powi(2));
            assert!((z.re - want).abs() <= 0.01 * want.abs(), "j={j} {z} {want}");
        }
    }

    #[test]
    fn bisection_bracket_error() {
        let r = bisect_threshold((1.0, 2.0), |_| Ok(-1.0));
        assert!(matches!(r, Err(Error::Bracket { .. })));
        let x = bisect_threshold((0.0, 1.0), |e| Ok(0.3 - e)).unwrap();
        assert!((x - 0.3).abs() <= 1e-3);
    }

    #[test]
    fn sign_change_interpolates() {
        assert_eq!(sign_change(&[1.0, 2.0, 3.0], &[1.0, 1.0, -1.0]), Some(2.5));
        assert_eq!(sign_change(&[1.0, 2.0], &[-1.0, -2.0]), None);
    }
}
