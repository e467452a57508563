use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::C64;

/// `exp(t L) v` for a linear map `L` by restarted Arnoldi iteration.
///
/// The Krylov basis of each restart does not depend on the substep, so a
/// rejected substep only recomputes the small exponential. `tol` bounds the
/// estimated error per unit time relative to `|v|`. `on_step` sees every
/// accepted substep.
pub(crate) fn expmv(
    mut apply: impl FnMut(&[C64], &mut [C64]),
    v: &[C64],
    t: f64,
    tol: f64,
    m_max: usize,
    mut on_step: impl FnMut(f64, &[C64]) -> Result<()>,
) -> Result<Vec<C64>> {
    let n = v.len();
    let zero = C64::new(0.0, 0.0);
    let mut w = v.to_vec();
    let norm0 = norm(&w);
    if t == 0.0 || norm0 == 0.0 {
        return Ok(w);
    }
    let m_max = m_max.clamp(2, n.max(2));
    let mut basis: Vec<Vec<C64>> = (0..=m_max).map(|_| vec![zero; n]).collect();
    let mut p = vec![zero; n];
    let mut now = 0.0;
    let mut tau = {
        apply(&w, &mut p);
        let rate = norm(&p) / norm0;
        if rate > 0.0 {
            (0.5 * m_max as f64 / rate).min(t)
        } else {
            t
        }
    };
    let mut rejections = 0usize;
    while now < t {
        let beta = norm(&w);
        basis[0].iter_mut().zip(&w).for_each(|(b, x)| *b = x / beta);
        let mut h = DMatrix::<C64>::zeros(m_max, m_max);
        let mut dim = m_max;
        let mut residual = 0.0;
        for j in 0..m_max {
            apply(&basis[j], &mut p);
            // modified Gram-Schmidt, repeated once for stability
            for _ in 0..2 {
                for (i, b) in basis.iter().enumerate().take(j + 1) {
                    let c: C64 = b.iter().zip(&p).map(|(x, y)| x.conj() * y).sum();
                    h[(i, j)] += c;
                    p.iter_mut().zip(b).for_each(|(y, x)| *y -= c * x);
                }
            }
            let hn = norm(&p);
            if hn <= 1e-13 * beta.max(1.0) * (1.0 + h.column(j).norm()) {
                // invariant subspace: the projection is exact
                dim = j + 1;
                residual = 0.0;
                break;
            }
            residual = hn;
            if j + 1 < m_max {
                h[(j + 1, j)] = C64::new(hn, 0.0);
            }
            basis[j + 1].iter_mut().zip(&p).for_each(|(b, x)| *b = x / hn);
        }
        let hm = h.view((0, 0), (dim, dim)).into_owned();
        // keep the substep where the a-posteriori estimate is trustworthy
        let h_norm = hm.column_iter().map(|c| c.iter().map(|z| z.norm()).sum::<f64>()).fold(0.0, f64::max);
        if residual > 0.0 && h_norm > 0.0 {
            tau = tau.min(dim as f64 / (3.0 * h_norm));
        }
        loop {
            let step = tau.min(t - now);
            let f = (&hm * C64::new(step, 0.0)).exp();
            let err = beta * residual * step * f[(dim - 1, 0)].norm();
            if err <= tol * norm0 * step || residual == 0.0 || step < 1e-14 * t {
                w.iter_mut().for_each(|x| *x = zero);
                for (k, b) in basis.iter().enumerate().take(dim) {
                    let c = f[(k, 0)] * beta;
                    w.iter_mut().zip(b).for_each(|(y, x)| *y += c * x);
                }
                now = if step >= t - now { t } else { now + step };
                on_step(now, &w)?;
                let growth = if err > 0.0 { (0.9 * (tol * norm0 * step / err).powf(1.0 / dim as f64)).clamp(0.2, 2.0) } else { 2.0 };
                tau = step * growth;
                break;
            }
            rejections += 1;
            if rejections > 10_000 {
                return Err(Error::StepUnderflow(now));
            }
            tau = step * (0.9 * (tol * norm0 * step / err).powf(1.0 / dim as f64)).clamp(0.1, 0.5);
        }
    }
    Ok(w)
}

fn norm(x: &[C64]) -> f64 {
    x.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}
