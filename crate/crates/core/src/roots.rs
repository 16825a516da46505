use crate::error::{Error, Result};

const MAX_ITER: usize = 200;
const REL_TOL: f64 = 1e-13;

/// Root of a strictly decreasing `h` on `(lo, ∞)` with `h(lo) > 0`.
///
/// The upper end starts at `hi` and doubles its distance from `lo` until `h`
/// turns nonpositive; bisection then runs to relative width `1e-13`.
pub(crate) fn decreasing_root(h: impl Fn(f64) -> f64, lo: f64, hi: f64) -> Result<f64> {
    let mut lo = lo;
    let mut hi = hi.max(lo + 1.0);
    let h_lo = h(lo);
    if h_lo.is_nan() || h_lo <= 0.0 {
        return Err(Error::Internal(format!("no sign change: h({lo}) = {h_lo}")));
    }
    let mut expansions = 0;
    while h(hi) > 0.0 {
        hi = lo + 2.0 * (hi - lo);
        expansions += 1;
        if expansions > MAX_ITER || !hi.is_finite() {
            return Err(Error::Internal("failed to bracket the root".into()));
        }
    }
    for _ in 0..MAX_ITER {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi || hi - lo <= REL_TOL * hi.abs().max(1e-300) {
            break;
        }
        if h(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}
