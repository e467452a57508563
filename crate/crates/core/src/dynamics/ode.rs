//! Dormand-Prince 5(4) with step-size control, over flat complex vectors.

use num_complex::Complex64 as C64;

use crate::error::{Error, Result};

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;

const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;

// fifth-order weights minus embedded fourth-order weights
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct StepStats {
    pub accepted: usize,
    pub rejected: usize,
    pub evaluations: usize,
}

pub(crate) struct Tolerances {
    pub rel: f64,
    pub abs: f64,
    pub max_step: f64,
}

#[inline]
fn combine(out: &mut [C64], y: &[C64], h: f64, terms: &[(f64, &[C64])]) {
    for i in 0..out.len() {
        let mut acc = C64::new(0.0, 0.0);
        for &(w, k) in terms {
            acc += k[i] * w;
        }
        out[i] = y[i] + acc * h;
    }
}

/// Integrate `y' = f(t, y)` from `t0` to `t1` in place. `observe` runs after
/// every accepted step and may abort the integration.
pub(crate) fn integrate<F, O>(y: &mut [C64], t0: f64, t1: f64, tol: &Tolerances, mut f: F, mut observe: O) -> Result<StepStats>
where
    F: FnMut(f64, &[C64], &mut [C64]),
    O: FnMut(f64, &[C64]) -> Result<()>,
{
    let n = y.len();
    let mut stats = StepStats::default();
    let span = t1 - t0;
    if span <= 0.0 {
        return Ok(stats);
    }
    let zero = C64::new(0.0, 0.0);
    let mut k1 = vec![zero; n];
    let mut k2 = vec![zero; n];
    let mut k3 = vec![zero; n];
    let mut k4 = vec![zero; n];
    let mut k5 = vec![zero; n];
    let mut k6 = vec![zero; n];
    let mut k7 = vec![zero; n];
    let mut tmp = vec![zero; n];
    let mut ynew = vec![zero; n];

    let mut t = t0;
    let mut h = tol.max_step.min(span);
    f(t, y, &mut k1);
    stats.evaluations += 1;
    let mut last_rejected = false;

    while t < t1 {
        let last = t + h >= t1 - 1e-14 * t1.abs().max(1.0);
        if last {
            h = t1 - t;
        }
        combine(&mut tmp, y, h, &[(A21, &k1)]);
        f(t + C2 * h, &tmp, &mut k2);
        combine(&mut tmp, y, h, &[(A31, &k1), (A32, &k2)]);
        f(t + C3 * h, &tmp, &mut k3);
        combine(&mut tmp, y, h, &[(A41, &k1), (A42, &k2), (A43, &k3)]);
        f(t + C4 * h, &tmp, &mut k4);
        combine(&mut tmp, y, h, &[(A51, &k1), (A52, &k2), (A53, &k3), (A54, &k4)]);
        f(t + C5 * h, &tmp, &mut k5);
        combine(&mut tmp, y, h, &[(A61, &k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)]);
        f(t + h, &tmp, &mut k6);
        combine(&mut ynew, y, h, &[(A71, &k1), (A73, &k3), (A74, &k4), (A75, &k5), (A76, &k6)]);
        f(t + h, &ynew, &mut k7);
        stats.evaluations += 6;

        let mut err_sq = 0.0;
        for i in 0..n {
            let e = (k1[i] * E1 + k3[i] * E3 + k4[i] * E4 + k5[i] * E5 + k6[i] * E6 + k7[i] * E7) * h;
            let scale = tol.abs + tol.rel * y[i].norm().max(ynew[i].norm());
            err_sq += e.norm_sqr() / (scale * scale);
        }
        let err = (err_sq / n as f64).sqrt();

        if err <= 1.0 {
            t = if last { t1 } else { t + h };
            y.copy_from_slice(&ynew);
            std::mem::swap(&mut k1, &mut k7);
            stats.accepted += 1;
            observe(t, y)?;
            let mut factor = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
            if last_rejected {
                factor = factor.min(1.0);
            }
            last_rejected = false;
            h = (h * factor).min(tol.max_step);
        } else {
            stats.rejected += 1;
            last_rejected = true;
            h *= (0.9 * err.powf(-0.2)).max(0.2);
            if h < 1e-14 * t.abs().max(1.0) {
                return Err(Error::StepUnderflow(t));
            }
        }
    }
    Ok(stats)
}
