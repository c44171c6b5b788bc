//! Decay-exponent algebra: `s = 1 - theta`, `a = theta + 2/3` and the
//! inequalities that constrain `theta`.

use alloc::format;
use num_bigint::BigInt;
#[allow(unused_imports)] // shadowed by inherent methods whenever std is linked
use num_traits::Float;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Smaller root of `3 theta^2 - 19 theta + 1`, i.e. `(19 - sqrt 349) / 6`,
/// written as `2 / (19 + sqrt 349)` to avoid the cancellation.
pub fn theta_max() -> f64 {
    2.0 / (19.0 + 349.0f64.sqrt())
}

/// Near `theta_max` the floating-point comparisons are only trusted outside this band.
pub const STRICT_MARGIN: f64 = 1e-14;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExponentChecks {
    /// `(a - 1)(1 + s) < 2 a s / 3 - 1`
    pub gap: bool,
    /// Same condition through `3 theta^2 - 19 theta + 1 > 0`.
    pub gap_quadratic: bool,
    /// `3a > 2`
    pub a_above_two_thirds: bool,
    /// `a(4 + s) > 3s`
    pub ineq_1: bool,
    /// `3a > 2`
    pub ineq_2: bool,
    /// `a(9 + 4s) > 4(1 + s)`
    pub ineq_3: bool,
    /// `a(2 + s) > 1 + s`
    pub ineq_4: bool,
    /// `3a(1 + 2s) > (2 + s)(1 + s)`
    pub ineq_5: bool,
}

impl ExponentChecks {
    pub fn inequalities_all(&self) -> bool {
        self.ineq_1 && self.ineq_2 && self.ineq_3 && self.ineq_4 && self.ineq_5
    }

    pub fn all(&self) -> bool {
        self.gap && self.gap_quadratic && self.a_above_two_thirds && self.inequalities_all()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExponentReport {
    pub theta: f64,
    pub s: f64,
    pub a: f64,
    pub theta_max: f64,
    pub checks: ExponentChecks,
    /// The `gap` verdict was settled in exact rational arithmetic.
    pub exact: bool,
}

fn inequality_checks(a: f64, s: f64) -> [bool; 5] {
    [
        a * (4.0 + s) > 3.0 * s,
        3.0 * a > 2.0,
        a * (9.0 + 4.0 * s) > 4.0 * (1.0 + s),
        a * (2.0 + s) > 1.0 + s,
        3.0 * a * (1.0 + 2.0 * s) > (2.0 + s) * (1.0 + s),
    ]
}

/// Sign of `3 theta^2 - 19 theta + 1` with `theta` taken as the exact binary
/// value of the double.
fn quadratic_sign_exact(theta: f64) -> core::cmp::Ordering {
    // theta = m 2^e with integer m; scale the quadratic by 2^(-2e) when e < 0.
    let bits = theta.to_bits();
    let exp = ((bits >> 52) & 0x7ff) as i64;
    let frac = bits & ((1u64 << 52) - 1);
    let (m, e) = if exp == 0 {
        (frac, -1074)
    } else {
        (frac | (1u64 << 52), exp - 1075)
    };
    let m = BigInt::from(m);
    let value = if e >= 0 {
        let t = m << (e as usize);
        BigInt::from(3) * &t * &t - BigInt::from(19) * &t + 1
    } else {
        let k = (-e) as usize;
        // 3 m^2 - 19 m 2^k + 2^(2k)
        BigInt::from(3) * &m * &m - BigInt::from(19) * (&m << k) + (BigInt::from(1) << (2 * k))
    };
    value.sign().cmp(&num_bigint::Sign::NoSign)
}

fn report(theta: f64, exact: bool) -> Result<ExponentReport> {
    if !(theta > 0.0 && theta < 1.0) {
        return Err(Error::Domain(format!("theta must lie in (0, 1), got {theta}")));
    }
    let s = 1.0 - theta;
    let a = theta + 2.0 / 3.0;
    let q = 3.0 * theta * theta - 19.0 * theta + 1.0;
    let direct = (a - 1.0) * (1.0 + s) < 2.0 * a * s / 3.0 - 1.0;
    let quadratic = q > 0.0;
    let near_root = (theta - theta_max()).abs() <= STRICT_MARGIN;
    let (gap, gap_quadratic, exact_used) = if exact && near_root {
        let v = quadratic_sign_exact(theta) == core::cmp::Ordering::Greater;
        (v, v, true)
    } else if near_root {
        // Inside the margin the two float forms may round differently; the
        // quadratic form is the better conditioned one.
        (quadratic, quadratic, false)
    } else {
        (direct, quadratic, false)
    };
    let l = inequality_checks(a, s);
    Ok(ExponentReport {
        theta,
        s,
        a,
        theta_max: theta_max(),
        checks: ExponentChecks {
            gap,
            gap_quadratic,
            a_above_two_thirds: 3.0 * a > 2.0,
            ineq_1: l[0],
            ineq_2: l[1],
            ineq_3: l[2],
            ineq_4: l[3],
            ineq_5: l[4],
        },
        exact: exact_used,
    })
}

pub fn derive_exponents(theta: f64) -> Result<ExponentReport> {
    report(theta, false)
}

/// As [`derive_exponents`], deciding the gap condition exactly when `theta` is within
/// [`STRICT_MARGIN`] of `theta_max`.
pub fn derive_exponents_exact(theta: f64) -> Result<ExponentReport> {
    report(theta, true)
}

/// `0 < theta < theta_max`, strict.
pub fn theta_admissible(theta: f64) -> bool {
    theta > 0.0 && theta < theta_max()
}
