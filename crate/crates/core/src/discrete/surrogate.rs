//! Bounded pulses standing in for the impulse-train derivative of the
//! quantizers during backpropagation.

use serde::{Deserialize, Serialize};

use super::space::DiscreteSpace;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SurrogateShape {
    Rectangular,
    Triangular,
}

impl std::str::FromStr for SurrogateShape {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "rectangular" | "rect" => Ok(Self::Rectangular),
            "triangular" | "tri" => Ok(Self::Triangular),
            other => Err(Error::Input(format!("unknown surrogate shape `{other}`"))),
        }
    }
}

/// Pulse shape, half-width `a` and quantizer window `r`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SurrogateSpec {
    pub shape: SurrogateShape,
    pub a: f64,
    pub r: f64,
}

impl SurrogateSpec {
    pub fn new(shape: SurrogateShape, a: f64, r: f64) -> Result<Self> {
        if !(a.is_finite() && a > 0.0) {
            return Err(Error::Input(format!("pulse half-width a must be positive, got {a}")));
        }
        if !(r.is_finite() && r >= 0.0) {
            return Err(Error::Input(format!("window r must be non-negative, got {r}")));
        }
        Ok(Self { shape, a, r })
    }

    pub fn rectangular(a: f64, r: f64) -> Self {
        Self {
            shape: SurrogateShape::Rectangular,
            a,
            r,
        }
    }

    pub fn triangular(a: f64, r: f64) -> Self {
        Self {
            shape: SurrogateShape::Triangular,
            a,
            r,
        }
    }
}

/// One pulse centered at `center` on the `|x|` axis, scaled so that it
/// integrates to `height` along one side of the origin.
#[inline]
fn pulse(ax: f64, center: f64, height: f64, shape: SurrogateShape, a: f64) -> f64 {
    match shape {
        SurrogateShape::Rectangular => {
            if center - a <= ax && ax <= center + a {
                height / (2.0 * a)
            } else {
                0.0
            }
        }
        SurrogateShape::Triangular => {
            let inv = height / (a * a);
            if center <= ax && ax <= center + a {
                -inv * (ax - (center + a))
            } else if center - a <= ax && ax < center {
                inv * (ax - (center - a))
            } else {
                0.0
            }
        }
    }
}

/// Rectangular pulse: `1/(2a)` on `r - a <= |x| <= r + a`.
#[inline]
pub fn surrogate_rect(x: f64, spec: &SurrogateSpec) -> f64 {
    pulse(x.abs(), spec.r, 1.0, SurrogateShape::Rectangular, spec.a)
}

/// Triangular pulse peaking at `1/a` on `|x| = r`.
#[inline]
pub fn surrogate_tri(x: f64, spec: &SurrogateSpec) -> f64 {
    pulse(x.abs(), spec.r, 1.0, SurrogateShape::Triangular, spec.a)
}

/// Ternary surrogate of the shape named in `spec`.
#[inline]
pub fn surrogate(x: f64, spec: &SurrogateSpec) -> f64 {
    pulse(x.abs(), spec.r, 1.0, spec.shape, spec.a)
}

/// Discontinuities of [`super::quantize_multilevel`] on `x >= 0`, as
/// `(location, jump height)`.
///
/// A jump that sits at the origin (binary space, or `r = 0`) is reported with
/// the full two-sided height.
pub fn jump_points(space: &DiscreteSpace, r: f64) -> Vec<(f64, f64)> {
    let h = space.half_range();
    if space.state_param() == 0 {
        return vec![(0.0, 2.0 * h)];
    }
    let dz = space.dz();
    let bands = space.max_index() / 2;
    let first = if r == 0.0 { 2.0 * dz } else { dz };
    let mut out = Vec::with_capacity(bands);
    out.push((r, first));
    if h > r {
        for w in 1..bands {
            out.push((r + w as f64 * (h - r) / bands as f64, dz));
        }
    }
    out
}

/// Sum of one pulse per discontinuity of the multi-level quantizer, each
/// integrating to the local jump height. With `N = 1, H = 1` and `r > 0` this
/// is exactly [`surrogate`].
pub fn surrogate_multilevel(x: f64, space: &DiscreteSpace, spec: &SurrogateSpec) -> f64 {
    let ax = x.abs();
    if space.state_param() == 0 {
        return pulse(ax, 0.0, 2.0 * space.half_range(), spec.shape, spec.a);
    }
    jump_points(space, spec.r)
        .into_iter()
        .map(|(c, height)| {
            // a pulse closer than `a` to the origin spills over onto the
            // other half-line, where it shows up as the mirror of the
            // opposite jump
            let mirror = if c > 0.0 && c < spec.a { pulse(ax, -c, height, spec.shape, spec.a) } else { 0.0 };
            pulse(ax, c, height, spec.shape, spec.a) + mirror
        })
        .sum()
}
