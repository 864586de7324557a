use super::space::DiscreteSpace;

/// `+1` for `x >= 0`, `-1` otherwise. Zero maps to `+1`.
#[inline]
pub fn sign(x: f64) -> f64 {
    if x >= 0.0 {
        1.0
    } else {
        -1.0
    }
}

/// Ternary activation with dead zone `[-r, r]`. The boundary `|x| = r` is in
/// the zero band.
#[inline]
pub fn quantize_ternary(x: f64, r: f64) -> i8 {
    if x > r {
        1
    } else if x < -r {
        -1
    } else {
        0
    }
}

/// Multi-level activation onto `space` with dead zone `r`.
///
/// Outside the dead zone, `|x| - r` is split into `2^(N-1)` equal bands over
/// `[0, H - r]`; band `ω` (1-based) emits `±ω·dz`. A value sitting exactly on
/// a shared band edge takes the higher level, and `|x| > H` saturates to `±H`.
/// The dead zone is closed (`|x| <= r` gives 0) so that `N = 1` is the ternary
/// quantizer scaled by `H`. `N = 0` is `H·sign(x)`.
pub fn quantize_multilevel(x: f64, space: &DiscreteSpace, r: f64) -> f64 {
    let h = space.half_range();
    if space.state_param() == 0 {
        return h * sign(x);
    }
    let ax = x.abs();
    if ax <= r {
        return 0.0;
    }
    let bands = space.max_index() / 2;
    let span = h - r;
    let level = if span <= 0.0 {
        bands
    } else {
        let t = ((ax - r) * bands as f64 / span).floor();
        if t >= bands as f64 {
            bands
        } else {
            t as usize + 1
        }
    };
    let value = level as f64 * space.dz();
    if x < 0.0 {
        -value
    } else {
        value
    }
}
