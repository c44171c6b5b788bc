//! Trapezoidal time stepping of one horizontal mode and energy bookkeeping.
//!
//! For a mode along `x1` the horizontal velocity is recovered from
//! `v1 = i D v3 / kappa` and `v2 = -i omega3 / kappa`, so
//! `|v_h|^2 = (|D v3|^2 + |omega3|^2) / kappa^2`.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use nalgebra::DMatrix;
use num_complex::Complex64;
#[allow(unused_imports)] // shadowed by inherent methods whenever std is linked
use num_traits::Float;
use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};
use serde::{Deserialize, Serialize};

use crate::energetics::{energy_e, energy_el, EnergyReport, ScalarField1D, SignMode};
use crate::linalg::inverse_iteration;
use crate::profiles::{DensityProfile, PhysicalParams};
use crate::slabgrid::{BcMask, SlabGrid};
use crate::spectra::{block_eigenvalues, critical_epsilon, linearized_operator, Block, ModeOperator};
use crate::{Error, Result};

type CVec = Vec<Complex64>;

/// Nodal perturbation of one mode. `rho = -rho' xi`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeState {
    pub kappa: f64,
    pub t: f64,
    pub xi: CVec,
    pub rho: CVec,
    pub v3: CVec,
    pub omega: CVec,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Seed {
    Zero,
    /// A few low sine/cosine modes with coefficients drawn from ChaCha8.
    RandomSmooth {
        rng_seed: u64,
    },
    /// Eigenvector of the coupled block, `index` counted from the largest real part.
    Eigenmode {
        index: usize,
    },
    /// Displacement proportional to the extremal function of the threshold problem.
    PhiStar {
        amplitude: f64,
    },
}

impl Default for Seed {
    fn default() -> Self {
        Seed::RandomSmooth { rng_seed: 42 }
    }
}

/// Everything needed to advance one mode: the operator and the profile samples.
#[derive(Debug, Clone)]
pub struct ModeSystem<'a> {
    pub op: ModeOperator,
    pub profile: &'a DensityProfile,
    pub grid: &'a SlabGrid,
    slope: Vec<f64>,
    rho_bar: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub kappa: f64,
    pub times: Vec<f64>,
    pub reports: Vec<EnergyReport>,
    pub amplitudes: Vec<f64>,
    /// Balance residual of each interval between consecutive samples.
    pub balance: Vec<f64>,
    /// Set when the run stopped on amplitude under- or overflow.
    pub stopped_early: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecayFit {
    pub rate: f64,
    pub samples_used: usize,
    /// The trajectory stopped early, so only part of the requested window was fitted.
    pub partial: bool,
}

/// Default step `1e-3 h^2 / mu`.
pub fn default_dt(h: f64, params: PhysicalParams) -> f64 {
    1e-3 * h * h / params.mu
}

fn zeros(n: usize) -> CVec {
    vec![Complex64::new(0.0, 0.0); n]
}

fn matvec(m: &DMatrix<f64>, x: &[Complex64]) -> CVec {
    (0..m.nrows()).map(|i| (0..m.ncols()).map(|j| x[j] * m[(i, j)]).sum()).collect()
}

impl<'a> ModeSystem<'a> {
    pub fn new(p: &'a DensityProfile, params: PhysicalParams, kappa: f64, grid: &'a SlabGrid) -> Result<Self> {
        if !(kappa.abs() > 0.0) {
            return Err(Error::Domain("time stepping needs kappa != 0".into()));
        }
        let op = linearized_operator(p, params, kappa, grid)?;
        let slope = grid.nodes().iter().map(|&x| p.eval(1, x)).collect();
        let rho_bar = grid.nodes().iter().map(|&x| p.eval(0, x)).collect();
        Ok(ModeSystem {
            op,
            profile: p,
            grid,
            slope,
            rho_bar,
        })
    }

    pub fn kappa(&self) -> f64 {
        self.op.kappa
    }

    fn n(&self) -> usize {
        self.grid.n()
    }

    fn coupled(&self) -> &Block {
        &self.op.blocks[0]
    }

    fn heat(&self) -> &Block {
        &self.op.blocks[1]
    }

    /// Condensed coordinates of a stacked nodal vector `(xi, v3, omega)`.
    fn condense(&self, u: &[Complex64]) -> (CVec, CVec) {
        let c = self.coupled();
        let w = self.heat();
        (
            c.free.iter().map(|&i| u[c.offset + i]).collect(),
            w.free.iter().map(|&i| u[w.offset + i]).collect(),
        )
    }

    fn state_from(&self, t: f64, yc: &[Complex64], yw: &[Complex64]) -> ModeState {
        let n = self.n();
        let uc = matvec(&self.coupled().p, yc);
        let omega = matvec(&self.heat().p, yw);
        let xi = uc[..n].to_vec();
        let v3 = uc[n..].to_vec();
        let rho = xi.iter().zip(&self.slope).map(|(x, s)| -x * *s).collect();
        ModeState {
            kappa: self.kappa(),
            t,
            xi,
            rho,
            v3,
            omega,
        }
    }

    fn stacked(s: &ModeState) -> CVec {
        let mut u = s.xi.clone();
        u.extend_from_slice(&s.v3);
        u.extend_from_slice(&s.omega);
        u
    }

    /// Projects arbitrary nodal fields onto the wall conditions.
    pub fn project(&self, xi: &[Complex64], v3: &[Complex64], omega: &[Complex64]) -> ModeState {
        let mut u = xi.to_vec();
        u.extend_from_slice(v3);
        u.extend_from_slice(omega);
        let (yc, yw) = self.condense(&u);
        self.state_from(0.0, &yc, &yw)
    }

    pub fn init(&self, seed: Seed) -> Result<ModeState> {
        let n = self.n();
        let h = self.grid.h();
        let pi = core::f64::consts::PI;
        match seed {
            Seed::Zero => Ok(self.project(&zeros(n), &zeros(n), &zeros(n))),
            Seed::RandomSmooth { rng_seed } => {
                let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
                let mut draw = || (rng.next_u64() >> 11) as f64 / (1u64 << 53) as f64 * 2.0 - 1.0;
                let mut fields = [zeros(n), zeros(n), zeros(n)];
                for (f, field) in fields.iter_mut().enumerate() {
                    for j in 1..=4 {
                        let c = Complex64::new(draw(), draw()) / (j * j) as f64;
                        for (i, &x) in self.grid.nodes().iter().enumerate() {
                            let arg = j as f64 * pi * x / h;
                            // omega obeys Neumann walls: cosines; the others sines.
                            field[i] += c * if f == 2 { arg.cos() } else { arg.sin() };
                        }
                    }
                }
                Ok(self.project(&fields[0], &fields[1], &fields[2]))
            }
            Seed::Eigenmode { index } => Ok(self.eigenmode(index)?.1),
            Seed::PhiStar { amplitude } => {
                let t = critical_epsilon(self.profile, self.op.params.g, self.grid)?;
                let xi: CVec = t.phi_star.iter().map(|&v| Complex64::new(amplitude * v, 0.0)).collect();
                Ok(self.project(&xi, &zeros(n), &zeros(n)))
            }
        }
    }

    /// Eigenvalues of the coupled block, sorted by decreasing real part.
    pub fn coupled_spectrum(&self) -> Result<CVec> {
        let cutoff = self.op.cutoff();
        let mut v: CVec = block_eigenvalues(self.coupled())?
            .into_iter()
            .filter(|s| s.norm() <= cutoff)
            .collect();
        v.sort_by(|x, y| y.re.total_cmp(&x.re).then(y.im.total_cmp(&x.im)));
        Ok(v)
    }

    /// `(sigma, state)` for the `index`-th coupled eigenmode, unit amplitude.
    pub fn eigenmode(&self, index: usize) -> Result<(Complex64, ModeState)> {
        let spec = self.coupled_spectrum()?;
        let sigma = *spec
            .get(index)
            .ok_or_else(|| Error::Config(format!("eigenmode index {index} out of range ({} modes)", spec.len())))?;
        let blk = self.coupled();
        let y = inverse_iteration(&blk.a, &blk.b, sigma)?;
        let yc: CVec = y.iter().copied().collect();
        let mut s = self.state_from(0.0, &yc, &zeros(self.heat().free.len()));
        let amp = self.amplitude(&s);
        for f in [&mut s.xi, &mut s.rho, &mut s.v3, &mut s.omega] {
            f.iter_mut().for_each(|v| *v /= amp);
        }
        Ok((sigma, s))
    }

    /// `sqrt(int |xi|^2 + |v3|^2 + |omega|^2)`.
    pub fn amplitude(&self, s: &ModeState) -> f64 {
        self.grid
            .integrate(|i| s.xi[i].norm_sqr() + s.v3[i].norm_sqr() + s.omega[i].norm_sqr())
            .sqrt()
    }

    /// Largest wall-condition violation relative to the largest nodal value.
    pub fn wall_residual(&self, s: &ModeState) -> f64 {
        let n = self.n();
        let scale = Self::stacked(s).iter().fold(0.0f64, |a, v| a.max(v.norm()));
        if scale == 0.0 {
            return 0.0;
        }
        let d1 = self.grid.diff(1);
        let d2 = self.grid.diff(2);
        let apply = |d: &DMatrix<f64>, f: &[Complex64], i: usize| -> Complex64 { (0..n).map(|j| f[j] * d[(i, j)]).sum() };
        let mut worst = 0.0f64;
        for i in [0, n - 1] {
            worst = worst
                .max(s.v3[i].norm())
                .max(apply(d2, &s.v3, i).norm() / (n * n) as f64)
                .max(apply(d1, &s.omega, i).norm() / n as f64)
                .max(s.xi[i].norm());
        }
        worst / scale
    }

    /// Trapezoidal propagators `(B - dt/2 A)^-1 (B + dt/2 A)` for both blocks.
    fn propagators(&self, dt: f64) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
        if !(dt > 0.0) {
            return Err(Error::Config(format!("time step must be positive, got {dt}")));
        }
        let prop = |blk: &Block| -> Result<DMatrix<f64>> {
            let lhs = &blk.b - &blk.a * (0.5 * dt);
            let rhs = &blk.b + &blk.a * (0.5 * dt);
            lhs.lu()
                .solve(&rhs)
                .filter(|m| m.iter().all(|v| v.is_finite()))
                .ok_or_else(|| Error::Numerical(format!("trapezoidal system singular at dt = {dt}")))
        };
        Ok((prop(self.coupled())?, prop(self.heat())?))
    }

    pub fn step(&self, s: &ModeState, dt: f64) -> Result<ModeState> {
        let (gc, gw) = self.propagators(dt)?;
        Ok(self.advance(s, &gc, &gw, dt))
    }

    fn advance(&self, s: &ModeState, gc: &DMatrix<f64>, gw: &DMatrix<f64>, dt: f64) -> ModeState {
        let (yc, yw) = self.condense(&Self::stacked(s));
        self.state_from(s.t + dt, &matvec(gc, &yc), &matvec(gw, &yw))
    }

    pub fn energy_report(&self, s: &ModeState) -> Result<EnergyReport> {
        let g = self.grid;
        let params = self.op.params;
        let k = self.kappa();
        let k2 = k * k;
        let xi = ScalarField1D::new(g, s.xi.clone(), BcMask::DIRICHLET)?;
        let rho = ScalarField1D::new(g, s.rho.clone(), BcMask::DIRICHLET)?;
        let e_l = energy_el(&xi, k, self.profile, params, SignMode::Permissive)?;
        // E(varrho) = E_L(varrho / rho') = E_L(xi) whenever E is defined.
        let e = if self.profile.flags().stabilizing {
            energy_e(&rho, k, self.profile, params)?
        } else {
            e_l
        };
        let drho = rho.derivative();
        let h1_sq = g.integrate(|i| (1.0 + k2) * s.rho[i].norm_sqr() + drho[i].norm_sqr());
        let v3 = ScalarField1D::new(g, s.v3.clone(), BcMask::DIRICHLET)?;
        let dv3 = v3.derivative();
        let d2v3 = ScalarField1D::new(g, dv3.clone(), BcMask::NONE)?.derivative();
        let om = ScalarField1D::new(g, s.omega.clone(), BcMask::NEUMANN)?;
        let dom = om.derivative();
        let kinetic = g.integrate(|i| self.rho_bar[i] * (s.v3[i].norm_sqr() + (dv3[i].norm_sqr() + s.omega[i].norm_sqr()) / k2));
        let dissipation = params.mu
            * g.integrate(|i| {
                k2 * s.v3[i].norm_sqr() + 2.0 * dv3[i].norm_sqr() + s.omega[i].norm_sqr() + (d2v3[i].norm_sqr() + dom[i].norm_sqr()) / k2
            });
        Ok(EnergyReport {
            e_l,
            e,
            h1_sq,
            kinetic,
            dissipation,
            neg_norms: None,
        })
    }

    /// Runs to `t_end` (the last step is shortened to land on it) and samples
    /// every `sample_every` steps plus the final state.
    pub fn simulate(&self, state0: &ModeState, t_end: f64, dt: f64, sample_every: usize) -> Result<Trajectory> {
        if !(t_end > 0.0) {
            return Err(Error::Config(format!("final time must be positive, got {t_end}")));
        }
        let sample_every = sample_every.max(1);
        let (gc, gw) = self.propagators(dt)?;
        let mut traj = Trajectory {
            kappa: self.kappa(),
            times: Vec::new(),
            reports: Vec::new(),
            amplitudes: Vec::new(),
            balance: Vec::new(),
            stopped_early: false,
        };
        let record = |s: &ModeState, traj: &mut Trajectory| -> Result<f64> {
            let a = self.amplitude(s);
            traj.times.push(s.t);
            traj.reports.push(self.energy_report(s)?);
            traj.amplitudes.push(a);
            Ok(a)
        };
        let mut s = state0.clone();
        s.t = 0.0;
        record(&s, &mut traj)?;
        let steps = (t_end / dt).round().max(1.0) as usize;
        for k in 1..=steps {
            s = self.advance(&s, &gc, &gw, dt);
            if k % sample_every == 0 || k == steps {
                let a = record(&s, &mut traj)?;
                if !(a.is_finite() && a < 1e300) || (a > 0.0 && a < 1e-300) {
                    traj.stopped_early = k < steps;
                    break;
                }
            }
        }
        traj.balance = energy_balance_residual(&traj);
        Ok(traj)
    }
}

/// Per-interval residual of `d/dt (E + kinetic) + 2 dissipation = 0`, with
/// the dissipation averaged over the interval ends and normalized by the
/// largest term. `dissipation` already carries the factor `mu`.
pub fn energy_balance_residual(traj: &Trajectory) -> Vec<f64> {
    traj.reports
        .windows(2)
        .zip(traj.times.windows(2))
        .map(|(r, t)| {
            let dt = t[1] - t[0];
            let total = |e: &EnergyReport| e.e + e.kinetic;
            let rate = (total(&r[1]) - total(&r[0])) / dt;
            let diss = r[0].dissipation + r[1].dissipation;
            let scale = rate.abs().max(diss.abs()).max(r[0].dissipation.abs()).max(r[1].dissipation.abs());
            if scale == 0.0 {
                0.0
            } else {
                (rate + diss).abs() / scale
            }
        })
        .collect()
}

/// Least-squares slope of `ln(amplitude)` over the second half of the samples.
pub fn fit_decay(traj: &Trajectory) -> Result<DecayFit> {
    let pts: Vec<(f64, f64)> = traj
        .times
        .iter()
        .zip(&traj.amplitudes)
        .filter(|(_, a)| **a > 0.0 && a.is_finite())
        .map(|(t, a)| (*t, a.ln()))
        .collect();
    if pts.len() < 2 {
        return Err(Error::NoAmplitude);
    }
    let tail = &pts[pts.len() / 2..];
    let tail = if tail.len() < 2 { &pts[pts.len() - 2..] } else { tail };
    let m = tail.len() as f64;
    let tm = tail.iter().map(|p| p.0).sum::<f64>() / m;
    let ym = tail.iter().map(|p| p.1).sum::<f64>() / m;
    let sxy: f64 = tail.iter().map(|p| (p.0 - tm) * (p.1 - ym)).sum();
    let sxx: f64 = tail.iter().map(|p| (p.0 - tm) * (p.0 - tm)).sum();
    Ok(DecayFit {
        rate: sxy / sxx,
        samples_used: tail.len(),
        partial: traj.stopped_early,
    })
}

/// Trapezoidal amplification factor `(1 + z/2) / (1 - z/2)` for `z = sigma dt`.
pub fn trapezoidal_factor(sigma: Complex64, dt: f64) -> Complex64 {
    let z = sigma * dt;
    (Complex64::new(1.0, 0.0) + z * 0.5) / (Complex64::new(1.0, 0.0) - z * 0.5)
}
