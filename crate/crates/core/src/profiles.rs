//! Equilibrium density profiles `rho(x3)` on `[0, h]`.
//!
//! Every profile is evaluated through a [`Jet`], so `eval(k, x3)` is
//! consistent across all orders `0 <= k <= 8`. Analytic kinds get a
//! boundary corrector inside the two wall strips of width `mollifier_width`
//! that zeroes `rho''` and `rho''''` on the walls.

use alloc::string::ToString;
use alloc::vec::Vec;
#[allow(unused_imports)] // shadowed by inherent methods whenever std is linked
use num_traits::Float;
use serde::{Deserialize, Serialize};

use crate::{Error, Jet, Result};

/// Number of uniformly spaced samples used for flag evaluation (`10 * 128 + 1`).
pub const FLAG_SAMPLES: usize = 10 * 128 + 1;
/// Relative tolerance shared by all sampled condition checks.
pub const FLAG_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ProfileKind {
    /// `rho0 + slope * x3`.
    Linear { slope: f64 },
    /// `rho0 * exp(rate * x3)`.
    Exponential { rate: f64 },
    /// `rho0 + jump/2 * (1 + tanh((x3 - center) / width))`.
    TanhLayer { jump: f64, center: f64, width: f64 },
    /// `rho' = amplitude * |x3 - center|^(2 + tau)`, vanishing at `center`.
    Degenerate {
        amplitude: f64,
        tau: f64,
        center: f64,
        half_width: f64,
    },
    /// Samples `(x3[i], rho[i])` covering `[0, h]`, fitted by a Chebyshev series.
    Tabulated { x3: Vec<f64>, rho: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileSpec {
    #[serde(flatten)]
    pub kind: ProfileKind,
    #[serde(default = "one")]
    pub rho0: f64,
    pub h: f64,
    #[serde(default = "default_mollifier")]
    pub mollifier_width: f64,
    /// Also zero `rho^(6)` on the walls.
    #[serde(default)]
    pub zero_sixth_derivative: bool,
}

fn one() -> f64 {
    1.0
}

fn default_mollifier() -> f64 {
    0.1
}

impl ProfileSpec {
    pub fn linear(rho0: f64, slope: f64, h: f64) -> Self {
        ProfileSpec {
            kind: ProfileKind::Linear { slope },
            rho0,
            h,
            mollifier_width: 0.1 * h,
            zero_sixth_derivative: false,
        }
    }

    pub fn exponential(rho0: f64, rate: f64, h: f64) -> Self {
        ProfileSpec {
            kind: ProfileKind::Exponential { rate },
            ..Self::linear(rho0, 0.0, h)
        }
    }

    pub fn tanh_layer(rho0: f64, jump: f64, center: f64, width: f64, h: f64) -> Self {
        ProfileSpec {
            kind: ProfileKind::TanhLayer { jump, center, width },
            ..Self::linear(rho0, 0.0, h)
        }
    }

    pub fn degenerate(rho0: f64, amplitude: f64, tau: f64, center: f64, h: f64) -> Self {
        ProfileSpec {
            kind: ProfileKind::Degenerate {
                amplitude,
                tau,
                center,
                half_width: 0.25 * h.min(2.0 * center).min(2.0 * (h - center)),
            },
            ..Self::linear(rho0, 0.0, h)
        }
    }

    pub fn with_mollifier(mut self, width: f64) -> Self {
        self.mollifier_width = width;
        self
    }

    fn check(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        if !(self.h > 0.0) || !self.h.is_finite() {
            return bad("h must be positive");
        }
        if !(self.mollifier_width > 0.0 && self.mollifier_width < self.h / 4.0) {
            return bad("mollifier_width must lie in (0, h/4)");
        }
        match &self.kind {
            ProfileKind::Tabulated { x3, rho } => {
                if x3.len() != rho.len() || x3.len() < 4 {
                    return bad("tabulated profile needs >= 4 matching (x3, rho) samples");
                }
                if x3.windows(2).any(|w| w[1] <= w[0]) {
                    return bad("tabulated x3 must be strictly increasing");
                }
                let span = self.h * 1e-12;
                if (x3[0]).abs() > span || (x3[x3.len() - 1] - self.h).abs() > span {
                    return bad("tabulated x3 must start at 0 and end at h");
                }
            }
            _ if !(self.rho0 > 0.0) => return bad("rho0 must be positive"),
            ProfileKind::TanhLayer { width, .. } if !(*width > 0.0) => return bad("tanh layer width must be positive"),
            ProfileKind::Degenerate {
                tau, center, half_width, ..
            } => {
                if !(*tau > 0.0) {
                    return bad("degenerate tau must be positive");
                }
                if !(0.0 < center - half_width && center + half_width < self.h && *half_width > 0.0) {
                    return bad("degenerate profile needs 0 < x3_0 - eta < x3_0 + eta < h");
                }
            }
            _ => {}
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhysicalParams {
    pub g: f64,
    pub mu: f64,
    pub eps: f64,
}

impl PhysicalParams {
    pub fn new(g: f64, mu: f64, eps: f64) -> Result<Self> {
        let p = PhysicalParams { g, mu, eps };
        p.check()?;
        Ok(p)
    }

    pub fn check(&self) -> Result<()> {
        if !(self.g > 0.0 && self.mu > 0.0 && self.eps >= 0.0) {
            return Err(Error::Config("need g > 0, mu > 0, eps >= 0".to_string()));
        }
        Ok(())
    }

    pub fn with_eps(self, eps: f64) -> Self {
        PhysicalParams { eps, ..self }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProfileFlags {
    pub positive: bool,
    pub rt_condition: bool,
    pub stabilizing: bool,
    pub boundary_conditions_ok: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Condition {
    Positive,
    RtCondition,
    Stabilizing,
    BoundaryConditions,
}

impl Condition {
    pub fn name(self) -> &'static str {
        match self {
            Condition::Positive => "positive",
            Condition::RtCondition => "rt_condition",
            Condition::Stabilizing => "stabilizing",
            Condition::BoundaryConditions => "boundary_conditions",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConditionCheck {
    pub condition: Condition,
    pub passed: bool,
    /// Sample point that decides the outcome.
    pub witness_x3: f64,
    /// Value of the checked quantity there (`rho`, `rho'`, `|rho'|`, or the wall derivative).
    pub witness_value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub samples: usize,
    pub checks: Vec<ConditionCheck>,
}

impl ValidationReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn get(&self, c: Condition) -> &ConditionCheck {
        self.checks.iter().find(|k| k.condition == c).expect("every condition is reported")
    }

    pub fn flags(&self) -> ProfileFlags {
        ProfileFlags {
            positive: self.get(Condition::Positive).passed,
            rt_condition: self.get(Condition::RtCondition).passed,
            stabilizing: self.get(Condition::Stabilizing).passed,
            boundary_conditions_ok: self.get(Condition::BoundaryConditions).passed,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Raw {
    Linear {
        rho0: f64,
        slope: f64,
    },
    Exponential {
        rho0: f64,
        rate: f64,
    },
    Tanh {
        rho0: f64,
        jump: f64,
        center: f64,
        width: f64,
    },
    Degenerate {
        rho0: f64,
        amplitude: f64,
        power: f64,
        center: f64,
    },
    Chebyshev {
        coef: Vec<f64>,
    },
}

/// Polynomial wall correction `q(u)`, `u` measured from the wall.
#[derive(Debug, Clone, Copy, PartialEq)]
struct WallCorrection {
    coef: [f64; 7],
}

#[derive(Debug, Clone, PartialEq)]
pub struct DensityProfile {
    spec: ProfileSpec,
    raw: Raw,
    scale: f64,
    left: Option<WallCorrection>,
    right: Option<WallCorrection>,
    flags: ProfileFlags,
}

impl DensityProfile {
    pub fn h(&self) -> f64 {
        self.spec.h
    }

    pub fn spec(&self) -> &ProfileSpec {
        &self.spec
    }

    pub fn flags(&self) -> ProfileFlags {
        self.flags
    }

    /// The same profile multiplied by `c > 0`.
    pub fn scaled(&self, c: f64) -> DensityProfile {
        assert!(c > 0.0, "density scale must be positive");
        DensityProfile {
            scale: self.scale * c,
            ..self.clone()
        }
    }

    /// Taylor jet of `rho` at `x3`.
    pub fn jet(&self, x3: f64) -> Jet {
        let raw = self.raw_jet(x3);
        let h = self.spec.h;
        let d = self.spec.mollifier_width;
        let corrected = if x3 < d {
            match &self.left {
                Some(w) => raw + blend(Jet::variable(x3).scale(1.0 / d)) * Jet::variable(x3).polynomial(&w.coef),
                None => raw,
            }
        } else if x3 > h - d {
            match &self.right {
                Some(w) => {
                    let u = Jet::variable(x3) - Jet::constant(h);
                    raw + blend(u.scale(-1.0 / d)) * u.polynomial(&w.coef)
                }
                None => raw,
            }
        } else {
            raw
        };
        if self.scale == 1.0 {
            corrected
        } else {
            corrected.scale(self.scale)
        }
    }

    /// `rho^(k)(x3)` for `0 <= k <= 8`.
    pub fn eval(&self, k: usize, x3: f64) -> f64 {
        self.jet(x3).derivative(k)
    }

    /// `rho' / sqrt(rho)`.
    pub fn underline(&self, x3: f64) -> f64 {
        let j = self.jet(x3);
        j.derivative(1) / j.value().sqrt()
    }

    /// Profile evaluation before the wall correction (scaled).
    pub fn uncorrected(&self, k: usize, x3: f64) -> f64 {
        self.raw_jet(x3).derivative(k) * self.scale
    }

    fn raw_jet(&self, x3: f64) -> Jet {
        match &self.raw {
            Raw::Linear { rho0, slope } => Jet::variable(x3).scale(*slope) + Jet::constant(*rho0),
            Raw::Exponential { rho0, rate } => Jet::variable(x3).scale(*rate).exp().scale(*rho0),
            Raw::Tanh { rho0, jump, center, width } => {
                let arg = (Jet::variable(x3) - Jet::constant(*center)).scale(1.0 / width);
                (arg.tanh() + Jet::constant(1.0)).scale(0.5 * jump) + Jet::constant(*rho0)
            }
            Raw::Degenerate {
                rho0,
                amplitude,
                power,
                center,
            } => degenerate_jet(*rho0, *amplitude, *power, *center, x3),
            Raw::Chebyshev { coef } => {
                let t = Jet::variable(x3).scale(2.0 / self.spec.h) - Jet::constant(1.0);
                clenshaw(coef, t)
            }
        }
    }

    /// Uniform flag samples, plus any point where the construction forces `rho' = 0`.
    fn flag_samples(&self, count: usize) -> Vec<f64> {
        let h = self.spec.h;
        let mut xs: Vec<f64> = (0..count).map(|i| h * i as f64 / (count - 1) as f64).collect();
        if let Raw::Degenerate { center, .. } = self.raw {
            xs.push(center);
            xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
            xs.dedup();
        }
        xs
    }
}

/// Order of the blending smoothstep: derivatives `1..=BLEND_ORDER` vanish at both ends.
const BLEND_ORDER: usize = 16;

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// `1 - S(t)`: 1 at `t <= 0`, 0 at `t >= 1`. `S` is the degree `2m+1`
/// smoothstep, summed in Bernstein form because the monomial form cancels badly.
fn blend(t: Jet) -> Jet {
    if t.value() <= 0.0 {
        return Jet::constant(1.0);
    }
    if t.value() >= 1.0 {
        return Jet::constant(0.0);
    }
    let m = BLEND_ORDER;
    let top = 2 * m + 1;
    let u = Jet::constant(1.0) - t;
    let mut tp = Vec::with_capacity(top + 1);
    let mut up = Vec::with_capacity(top + 1);
    tp.push(Jet::constant(1.0));
    up.push(Jet::constant(1.0));
    for k in 1..=top {
        tp.push(tp[k - 1] * t);
        up.push(up[k - 1] * u);
    }
    // 1 - S = sum_{k <= m} C(2m+1, k) t^k (1-t)^(2m+1-k)
    (0..=m).fold(Jet::constant(0.0), |acc, k| acc + (tp[k] * up[top - k]).scale(binomial(top, k)))
}

fn clenshaw(coef: &[f64], t: Jet) -> Jet {
    let mut b1 = Jet::constant(0.0);
    let mut b2 = Jet::constant(0.0);
    for &c in coef.iter().skip(1).rev() {
        let b0 = (t * b1).scale(2.0) - b2 + Jet::constant(c);
        b2 = b1;
        b1 = b0;
    }
    t * b1 - b2 + Jet::constant(coef[0])
}

fn degenerate_jet(rho0: f64, amplitude: f64, power: f64, center: f64, x3: f64) -> Jet {
    // rho = rho0 + amplitude * (sgn(u)|u|^p + center^p) / p, u = x3 - center.
    let u = x3 - center;
    let s = if u > 0.0 {
        1.0
    } else if u < 0.0 {
        -1.0
    } else {
        0.0
    };
    let mut d = [0.0; 9];
    let mut falling = 1.0;
    for (k, dk) in d.iter_mut().enumerate() {
        let expo = power - k as f64;
        let abs_part = if u == 0.0 {
            if expo > 0.0 {
                0.0
            } else if expo == 0.0 {
                1.0
            } else {
                f64::NAN
            }
        } else {
            u.abs().powf(expo)
        };
        let sign = if k % 2 == 0 { s } else { s * s };
        *dk = amplitude / power * falling * sign * abs_part;
        falling *= power - k as f64;
    }
    d[0] += rho0 + amplitude * center.powf(power) / power;
    Jet::from_derivatives(&d)
}

/// Builds a profile, applies the wall corrector for analytic kinds and computes flags.
pub fn make_profile(spec: &ProfileSpec) -> Result<DensityProfile> {
    spec.check()?;
    let raw = match &spec.kind {
        ProfileKind::Linear { slope } => Raw::Linear {
            rho0: spec.rho0,
            slope: *slope,
        },
        ProfileKind::Exponential { rate } => Raw::Exponential {
            rho0: spec.rho0,
            rate: *rate,
        },
        ProfileKind::TanhLayer { jump, center, width } => Raw::Tanh {
            rho0: spec.rho0,
            jump: *jump,
            center: *center,
            width: *width,
        },
        ProfileKind::Degenerate {
            amplitude, tau, center, ..
        } => Raw::Degenerate {
            rho0: spec.rho0,
            amplitude: *amplitude,
            power: 3.0 + tau,
            center: *center,
        },
        ProfileKind::Tabulated { x3, rho } => Raw::Chebyshev {
            coef: fit_chebyshev(x3, rho, spec.h)?,
        },
    };
    let mut p = DensityProfile {
        spec: spec.clone(),
        raw,
        scale: 1.0,
        left: None,
        right: None,
        flags: ProfileFlags {
            positive: false,
            rt_condition: false,
            stabilizing: false,
            boundary_conditions_ok: false,
        },
    };
    if !matches!(p.raw, Raw::Chebyshev { .. }) {
        p.left = wall_correction(&p, 0.0);
        p.right = wall_correction(&p, spec.h);
        check_corrector(&p)?;
    }
    p.flags = validate_profile(&p).flags();
    Ok(p)
}

fn wall_correction(p: &DensityProfile, wall: f64) -> Option<WallCorrection> {
    let j = p.raw_jet(wall);
    let (d2, d4, d6) = (j.derivative(2), j.derivative(4), j.derivative(6));
    let mut coef = [0.0; 7];
    coef[2] = -d2 / 2.0;
    coef[4] = -d4 / 24.0;
    if p.spec.zero_sixth_derivative {
        coef[6] = -d6 / 720.0;
    }
    if coef.iter().all(|&c| c == 0.0) {
        None
    } else {
        Some(WallCorrection { coef })
    }
}

fn check_corrector(p: &DensityProfile) -> Result<()> {
    let h = p.spec.h;
    let d = p.spec.mollifier_width;
    let m = 400;
    for i in 0..=m {
        let s = d * i as f64 / m as f64;
        for x in [s, h - s] {
            let j = p.jet(x);
            if !(j.value() > 0.0) {
                return Err(Error::Construction {
                    condition: "positivity",
                    at: x,
                });
            }
            let raw_slope = p.uncorrected(1, x);
            let slope = j.derivative(1);
            let scale = p.uncorrected(1, x).abs().max(1e-300);
            if raw_slope.abs() > FLAG_TOLERANCE * scale && raw_slope.signum() != slope.signum() {
                return Err(Error::Construction {
                    condition: "sign of rho'",
                    at: x,
                });
            }
        }
    }
    Ok(())
}

fn fit_chebyshev(x3: &[f64], rho: &[f64], h: f64) -> Result<Vec<f64>> {
    use nalgebra::{DMatrix, DVector};
    let m = x3.len();
    let solve = |degree: usize| -> Result<Vec<f64>> {
        let a = DMatrix::from_fn(m, degree + 1, |i, j| {
            let t = 2.0 * x3[i] / h - 1.0;
            libm_cos(j as f64 * libm_acos(t.clamp(-1.0, 1.0)))
        });
        let b = DVector::from_column_slice(rho);
        let svd = a.svd(true, true);
        let c = svd.solve(&b, 1e-14).map_err(|e| Error::Numerical(e.to_string()))?;
        Ok(c.iter().copied().collect())
    };
    let dmax = (m - 1).min(48);
    let full = solve(dmax)?;
    let cmax = full.iter().fold(0.0f64, |a, c| a.max(c.abs()));
    let degree = full.iter().rposition(|c| c.abs() > 1e-10 * cmax).unwrap_or(0);
    if degree == dmax {
        Ok(full)
    } else {
        solve(degree.max(1))
    }
}

fn libm_cos(x: f64) -> f64 {
    x.cos()
}

fn libm_acos(x: f64) -> f64 {
    x.acos()
}

/// Checks the four equilibrium conditions on [`FLAG_SAMPLES`] points.
pub fn validate_profile(p: &DensityProfile) -> ValidationReport {
    validate_profile_with(p, FLAG_SAMPLES)
}

pub fn validate_profile_with(p: &DensityProfile, samples: usize) -> ValidationReport {
    let xs = p.flag_samples(samples.max(3));
    let jets: Vec<(f64, Jet)> = xs.iter().map(|&x| (x, p.jet(x))).collect();
    let argmin = |f: &dyn Fn(&Jet) -> f64| {
        jets.iter()
            .map(|(x, j)| (*x, f(j)))
            .fold((0.0, f64::INFINITY), |a, b| if b.1 < a.1 { b } else { a })
    };
    let argmax = |f: &dyn Fn(&Jet) -> f64| {
        jets.iter()
            .map(|(x, j)| (*x, f(j)))
            .fold((0.0, f64::NEG_INFINITY), |a, b| if b.1 > a.1 { b } else { a })
    };

    let (xmin, rmin) = argmin(&|j| j.value());
    let (_, slope_scale) = argmax(&|j| j.derivative(1).abs());
    let (xs_max, smax) = argmax(&|j| j.derivative(1));
    let (xa, amin) = argmin(&|j| j.derivative(1).abs());

    let mut checks = Vec::with_capacity(4);
    checks.push(ConditionCheck {
        condition: Condition::Positive,
        passed: rmin > 0.0,
        witness_x3: xmin,
        witness_value: rmin,
    });
    checks.push(ConditionCheck {
        condition: Condition::RtCondition,
        passed: smax > FLAG_TOLERANCE * slope_scale && smax > 0.0,
        witness_x3: xs_max,
        witness_value: smax,
    });
    checks.push(ConditionCheck {
        condition: Condition::Stabilizing,
        passed: amin > FLAG_TOLERANCE * slope_scale && amin > 0.0,
        witness_x3: xa,
        witness_value: amin,
    });

    let h = p.h();
    let interior = |k: usize| {
        jets.iter()
            .filter(|(x, _)| *x > 0.0 && *x < h)
            .fold(0.0f64, |a, (_, j)| a.max(j.derivative(k).abs()))
    };
    let mut passed = true;
    let mut worst = (0.0, 0.0, -1.0);
    for k in [2usize, 4] {
        let scale = interior(k);
        for wall in [0.0, h] {
            let v = p.eval(k, wall).abs();
            passed &= v <= FLAG_TOLERANCE * scale;
            let ratio = if scale > 0.0 {
                v / scale
            } else if v == 0.0 {
                0.0
            } else {
                f64::INFINITY
            };
            if ratio > worst.2 {
                worst = (wall, v, ratio);
            }
        }
    }
    checks.push(ConditionCheck {
        condition: Condition::BoundaryConditions,
        passed,
        witness_x3: worst.0,
        witness_value: worst.1,
    });
    ValidationReport { samples: xs.len(), checks }
}

/// Hydrostatic pressure with `P(0) = 0`.
#[derive(Debug, Clone, Copy)]
pub struct PressureProfile<'a> {
    profile: &'a DensityProfile,
    params: PhysicalParams,
}

pub fn hydrostatic_pressure<'a>(p: &'a DensityProfile, params: PhysicalParams) -> PressureProfile<'a> {
    PressureProfile { profile: p, params }
}

impl PressureProfile<'_> {
    /// `P' = eps^2 (rho'' - rho'^2 / rho)' - g rho`.
    pub fn derivative(&self, x3: f64) -> f64 {
        let j = self.profile.jet(x3);
        let rho = j.value();
        let (d1, d2, d3) = (j.derivative(1), j.derivative(2), j.derivative(3));
        let quantum = d3 - (2.0 * d1 * d2 * rho - d1 * d1 * d1) / (rho * rho);
        self.params.eps * self.params.eps * quantum - self.params.g * rho
    }

    /// `P(x3) = int_0^x3 P'` by composite 10-point Gauss-Legendre quadrature.
    pub fn value(&self, x3: f64) -> f64 {
        let panels = 32;
        let (nodes, weights) = gauss_legendre_10();
        let w = x3 / panels as f64;
        let mut sum = 0.0;
        for k in 0..panels {
            let a = k as f64 * w;
            for (t, wt) in nodes.iter().zip(weights.iter()) {
                sum += wt * self.derivative(a + 0.5 * w * (t + 1.0));
            }
        }
        0.5 * w * sum
    }
}

fn gauss_legendre_10() -> ([f64; 10], [f64; 10]) {
    let n = 10;
    let mut x = [0.0; 10];
    let mut w = [0.0; 10];
    for i in 0..n {
        let mut z = (core::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (z * p1 - p0) / (z * z - 1.0);
            let dz = p1 / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x[i] = z;
        w[i] = 2.0 / ((1.0 - z * z) * dp * dp);
    }
    (x, w)
}
