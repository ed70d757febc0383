//! Color math on the constant hue plane of the RGB cube.
//!
//! Every RGB pixel `x` lies on the triangle spanned by white `w = (1,1,1)`,
//! black `k = (0,0,0)` and its maximally saturated color `c`, the point of
//! the same hue with `min(c) = 0` and `max(c) = 1`. The barycentric
//! coefficients of that triangle have the closed form
//!
//! ```text
//! a_w = min(x)    a_c = max(x) - min(x)    a_k = 1 - max(x)
//! ```
//!
//! so swapping `c` for another saturated color changes the hue while keeping
//! the lightest and darkest channel of the pixel fixed.

use thiserror::Error;

use crate::scalar::Scalar;

/// Pixels whose channel spread is at or below this value have no usable hue.
pub const ACHROMATIC_EPSILON: f64 = 1e-6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum HueError {
    #[error("pixel is achromatic (channel spread {spread:e}), hue is undefined")]
    AchromaticPixel { spread: f64 },
    #[error("({r}, {g}, {b}) is not a maximally saturated color")]
    InvalidSaturatedColor { r: f64, g: f64, b: f64 },
    #[error("channel value {value} outside [0, 1]")]
    OutOfRange { value: f64 },
}

/// An RGB triplet with channels in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct RgbPixel<T> {
    pub r: T,
    pub g: T,
    pub b: T,
}

impl<T: Scalar> RgbPixel<T> {
    #[inline]
    pub const fn new(r: T, g: T, b: T) -> Self {
        Self { r, g, b }
    }

    /// Builds a pixel, rejecting channels outside `[0, 1]` or NaN.
    pub fn try_new(r: T, g: T, b: T) -> Result<Self, HueError> {
        for v in [r, g, b] {
            if !(v >= T::zero() && v <= T::one()) {
                return Err(HueError::OutOfRange { value: v.as_f64() });
            }
        }
        Ok(Self { r, g, b })
    }

    #[inline]
    pub fn gray(v: T) -> Self {
        Self::new(v, v, v)
    }

    #[inline]
    pub fn from_array([r, g, b]: [T; 3]) -> Self {
        Self::new(r, g, b)
    }

    #[inline]
    pub fn to_array(self) -> [T; 3] {
        [self.r, self.g, self.b]
    }

    #[inline]
    pub fn max_channel(self) -> T {
        self.r.max(self.g).max(self.b)
    }

    #[inline]
    pub fn min_channel(self) -> T {
        self.r.min(self.g).min(self.b)
    }

    #[inline]
    pub fn spread(self) -> T {
        self.max_channel() - self.min_channel()
    }

    #[inline]
    pub fn is_achromatic(self) -> bool {
        self.spread() <= T::lit(ACHROMATIC_EPSILON)
    }

    #[inline]
    pub fn map(self, f: impl Fn(T) -> T) -> Self {
        Self::new(f(self.r), f(self.g), f(self.b))
    }

    pub fn clamp_unit(self) -> Self {
        self.map(|v| v.max(T::zero()).min(T::one()))
    }

    /// Whether this pixel sits on the saturated-color locus (`min = 0`, `max = 1`).
    pub fn is_saturated_locus(self) -> bool {
        let tol = T::locus_tolerance();
        self.min_channel().abs() <= tol && (self.max_channel() - T::one()).abs() <= tol
    }
}

/// Barycentric coordinates of a pixel over white, black and its maximally
/// saturated color.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HuePlaneDecomposition<T> {
    pub a_w: T,
    pub a_k: T,
    pub a_c: T,
    pub c: RgbPixel<T>,
}

impl<T: Scalar> HuePlaneDecomposition<T> {
    /// Stand-in saturated color for pixels with zero chroma. It is only ever
    /// paired with `a_c = 0`, so it never reaches a recomposed value.
    pub fn sentinel() -> RgbPixel<T> {
        RgbPixel::new(T::one(), T::zero(), T::zero())
    }

    pub fn with_color(self, c: RgbPixel<T>) -> Self {
        Self { c, ..self }
    }
}

/// `c_l = (x_l - min(x)) / (max(x) - min(x))`.
pub fn max_saturated_color<T: Scalar>(x: RgbPixel<T>) -> Result<RgbPixel<T>, HueError> {
    let lo = x.min_channel();
    let spread = x.max_channel() - lo;
    if spread <= T::lit(ACHROMATIC_EPSILON) {
        return Err(HueError::AchromaticPixel {
            spread: spread.as_f64(),
        });
    }
    Ok(x.map(|v| (v - lo) / spread))
}

pub fn decompose<T: Scalar>(x: RgbPixel<T>) -> HuePlaneDecomposition<T> {
    let lo = x.min_channel();
    let hi = x.max_channel();
    let a_c = hi - lo;
    // Near-achromatic pixels (0 < spread <= epsilon) still get their exact
    // saturated color so that recomposition stays lossless.
    let c = if a_c > T::zero() {
        x.map(|v| (v - lo) / a_c)
    } else {
        HuePlaneDecomposition::sentinel()
    };
    HuePlaneDecomposition {
        a_w: lo,
        a_k: T::one() - hi,
        a_c,
        c,
    }
}

/// `a_w * w + a_k * k + a_c * c`. The black vertex contributes nothing.
pub fn recompose<T: Scalar>(d: HuePlaneDecomposition<T>) -> RgbPixel<T> {
    d.c.map(|c| d.a_w + d.a_c * c).clamp_unit()
}

/// Replaces the hue of `x` with that of `c_new`, keeping the white, black and
/// color coefficients of `x`. Achromatic pixels are returned unchanged.
pub fn transplant_hue<T: Scalar>(
    x: RgbPixel<T>,
    c_new: RgbPixel<T>,
) -> Result<RgbPixel<T>, HueError> {
    if !c_new.is_saturated_locus() {
        return Err(HueError::InvalidSaturatedColor {
            r: c_new.r.as_f64(),
            g: c_new.g.as_f64(),
            b: c_new.b.as_f64(),
        });
    }
    if x.is_achromatic() {
        return Ok(x);
    }
    Ok(recompose(decompose(x).with_color(c_new)))
}
