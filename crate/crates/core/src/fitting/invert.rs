use crate::error::{domain, Error, Result};
use crate::mechanisms::DiffusionKernel;

/// Default search interval for total D, m²/s.
pub const DEFAULT_D_BRACKET: (f64, f64) = (1e-20, 1e-4);

const RELATIVE_WIDTH: f64 = 1e-10;
const MAX_BISECTIONS: usize = 400;

/// Solves R2(D) = `target_r2` for D by bisection in ln D.
///
/// R2 of the diffusion mechanism is strictly decreasing in D, so the root
/// is unique when `bracket` contains it. The interval is halved until its
/// relative width is below 1e-10.
pub fn invert_rate_for_d(
    target_r2: f64,
    kernel: &DiffusionKernel,
    bracket: (f64, f64),
) -> Result<f64> {
    let (lo, hi) = bracket;
    if !(lo > 0.0 && hi > lo) || !hi.is_finite() {
        return Err(domain(format!("invalid diffusion bracket [{lo}, {hi}]")));
    }
    if !(target_r2 > 0.0) || !target_r2.is_finite() {
        return Err(domain(format!("target rate must be > 0, got {target_r2}")));
    }
    let r_lo = kernel.rates(lo)?.r2;
    let r_hi = kernel.rates(hi)?.r2;
    if target_r2 > r_lo || target_r2 < r_hi {
        return Err(Error::Bracket {
            target: target_r2,
            achievable_low: r_hi,
            achievable_high: r_lo,
        });
    }
    let (mut a, mut b) = (lo.ln(), hi.ln());
    for _ in 0..MAX_BISECTIONS {
        if (b - a).exp() - 1.0 < RELATIVE_WIDTH {
            break;
        }
        let mid = 0.5 * (a + b);
        if kernel.rates(mid.exp())?.r2 > target_r2 {
            a = mid;
        } else {
            b = mid;
        }
    }
    Ok((0.5 * (a + b)).exp())
}
