//! Real trigonometric mode algebra in one dimension.
//!
//! Lateral modes live on the unit torus and are encoded as `usize`:
//! `0` is the constant mode, `2k-1` is `sqrt(2) cos(2 pi k x)` and `2k` is
//! `sqrt(2) sin(2 pi k x)`. Vertical modes live on `(0, H)` and come in a
//! Neumann (cosine) and a Dirichlet (sine) family. All modes are normalized
//! in L2 of their interval, so products expand into short exact sums that
//! back the separable quadrature used by the assembly routines.

/// Encoded lateral mode: constant, cosine or sine at integer wavenumber.
pub const LAT_CONST: usize = 0;

#[inline]
pub fn lat_cos(k: usize) -> usize {
    debug_assert!(k >= 1);
    2 * k - 1
}

#[inline]
pub fn lat_sin(k: usize) -> usize {
    debug_assert!(k >= 1);
    2 * k
}

/// Wavenumber of an encoded lateral mode.
#[inline]
pub fn lat_wavenumber(code: usize) -> usize {
    code.div_ceil(2)
}

#[inline]
pub fn lat_is_sin(code: usize) -> bool {
    code != 0 && code % 2 == 0
}

/// Value of a lateral mode at `x` (unit torus).
pub fn lat_eval(code: usize, x: f64) -> f64 {
    if code == LAT_CONST {
        return 1.0;
    }
    let k = lat_wavenumber(code) as f64;
    let arg = 2.0 * std::f64::consts::PI * k * x;
    if lat_is_sin(code) {
        std::f64::consts::SQRT_2 * arg.sin()
    } else {
        std::f64::consts::SQRT_2 * arg.cos()
    }
}

/// Derivative of a lateral mode: returns the image mode and scale factor,
/// or `None` for the constant mode.
pub fn lat_deriv(code: usize) -> Option<(usize, f64)> {
    if code == LAT_CONST {
        return None;
    }
    let k = lat_wavenumber(code);
    let w = 2.0 * std::f64::consts::PI * k as f64;
    if lat_is_sin(code) {
        Some((lat_cos(k), w))
    } else {
        Some((lat_sin(k), -w))
    }
}

/// Expansion of a product of two lateral modes; at most two terms.
pub fn lat_product(a: usize, b: usize) -> Vec<(usize, f64)> {
    use std::f64::consts::FRAC_1_SQRT_2;
    if a == LAT_CONST {
        return vec![(b, 1.0)];
    }
    if b == LAT_CONST {
        return vec![(a, 1.0)];
    }
    let (ka, kb) = (lat_wavenumber(a), lat_wavenumber(b));
    let (sa, sb) = (lat_is_sin(a), lat_is_sin(b));
    let sum = ka + kb;
    let diff = ka.abs_diff(kb);
    match (sa, sb) {
        (false, false) => {
            // cos * cos
            if ka == kb {
                vec![(LAT_CONST, 1.0), (lat_cos(sum), FRAC_1_SQRT_2)]
            } else {
                vec![(lat_cos(diff), FRAC_1_SQRT_2), (lat_cos(sum), FRAC_1_SQRT_2)]
            }
        }
        (true, true) => {
            // sin * sin
            if ka == kb {
                vec![(LAT_CONST, 1.0), (lat_cos(sum), -FRAC_1_SQRT_2)]
            } else {
                vec![(lat_cos(diff), FRAC_1_SQRT_2), (lat_cos(sum), -FRAC_1_SQRT_2)]
            }
        }
        (false, true) => lat_cos_sin(ka, kb, sum, diff),
        (true, false) => lat_cos_sin(kb, ka, sum, diff),
    }
}

/// cos(ka) * sin(kb) with the sign bookkeeping for kb - ka.
fn lat_cos_sin(ka: usize, kb: usize, sum: usize, diff: usize) -> Vec<(usize, f64)> {
    use std::f64::consts::FRAC_1_SQRT_2;
    if ka == kb {
        vec![(lat_sin(sum), FRAC_1_SQRT_2)]
    } else if kb > ka {
        vec![(lat_sin(sum), FRAC_1_SQRT_2), (lat_sin(diff), FRAC_1_SQRT_2)]
    } else {
        vec![(lat_sin(sum), FRAC_1_SQRT_2), (lat_sin(diff), -FRAC_1_SQRT_2)]
    }
}

/// Vertical mode families on `(0, H)`.
///
/// `VertCos(m)` is the Neumann family (`m = 0` is the constant);
/// `VertSin(m)` is the Dirichlet family (`m >= 1`).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Vert {
    Cos(usize),
    Sin(usize),
}

pub fn vert_eval(v: Vert, z: f64, height: f64) -> f64 {
    let u = std::f64::consts::PI * z / height;
    match v {
        Vert::Cos(0) => (1.0 / height).sqrt(),
        Vert::Cos(m) => (2.0 / height).sqrt() * (m as f64 * u).cos(),
        Vert::Sin(m) => {
            debug_assert!(m >= 1);
            (2.0 / height).sqrt() * (m as f64 * u).sin()
        }
    }
}

/// Derivative of a vertical mode: image mode and scale factor.
pub fn vert_deriv(v: Vert, height: f64) -> Option<(Vert, f64)> {
    let rate = |m: usize| m as f64 * std::f64::consts::PI / height;
    match v {
        Vert::Cos(0) => None,
        Vert::Cos(m) => Some((Vert::Sin(m), -rate(m))),
        Vert::Sin(m) => Some((Vert::Cos(m), rate(m))),
    }
}

/// Expand a plain (unnormalized) `cos(q pi z / H)` onto the normalized
/// cosine family.
fn plain_cos(q: usize, coef: f64, height: f64) -> (Vert, f64) {
    if q == 0 {
        (Vert::Cos(0), coef * height.sqrt())
    } else {
        (Vert::Cos(q), coef * (height / 2.0).sqrt())
    }
}

/// Expand a plain `sin(q pi z / H)` onto the normalized sine family;
/// `q = 0` vanishes.
fn plain_sin(q: usize, coef: f64, height: f64) -> Option<(Vert, f64)> {
    if q == 0 {
        None
    } else {
        Some((Vert::Sin(q), coef * (height / 2.0).sqrt()))
    }
}

/// Expansion of a product of two vertical modes; at most two terms.
pub fn vert_product(a: Vert, b: Vert, height: f64) -> Vec<(Vert, f64)> {
    let h = height;
    match (a, b) {
        (Vert::Cos(0), other) | (other, Vert::Cos(0)) => {
            vec![(other, 1.0 / h.sqrt())]
        }
        (Vert::Sin(ma), Vert::Sin(mb)) => {
            // (2/H) sin sin = (1/H)[cos((a-b)u) - cos((a+b)u)]
            vec![
                plain_cos(ma.abs_diff(mb), 1.0 / h, h),
                plain_cos(ma + mb, -1.0 / h, h),
            ]
        }
        (Vert::Cos(ma), Vert::Cos(mb)) => {
            vec![
                plain_cos(ma.abs_diff(mb), 1.0 / h, h),
                plain_cos(ma + mb, 1.0 / h, h),
            ]
        }
        (Vert::Sin(ma), Vert::Cos(mb)) | (Vert::Cos(mb), Vert::Sin(ma)) => {
            // (2/H) sin(a) cos(b) = (1/H)[sin((a+b)u) + sin((a-b)u)]
            let mut out = Vec::with_capacity(2);
            if let Some(t) = plain_sin(ma + mb, 1.0 / h, h) {
                out.push(t);
            }
            let sign = if ma >= mb { 1.0 } else { -1.0 };
            if let Some(t) = plain_sin(ma.abs_diff(mb), sign / h, h) {
                out.push(t);
            }
            out
        }
    }
}
