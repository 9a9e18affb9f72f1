//! Small dense-vector helpers shared by the solvers.

use num_complex::Complex64;

pub type C64 = Complex64;

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

#[inline]
pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

pub fn scaled(alpha: f64, x: &[f64]) -> Vec<f64> {
    x.iter().map(|v| alpha * v).collect()
}

pub fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

pub fn add(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}

/// Returns `x / ‖x‖`; the zero vector is returned unchanged.
pub fn normalized(x: &[f64]) -> Vec<f64> {
    let n = norm(x);
    if n == 0.0 {
        x.to_vec()
    } else {
        scaled(1.0 / n, x)
    }
}

/// Angle between the lines spanned by `a` and `b` (sign-insensitive).
pub fn line_angle(a: &[f64], b: &[f64]) -> f64 {
    let c = (dot(a, b).abs() / (norm(a) * norm(b))).min(1.0);
    let s2 = (1.0 - c * c).max(0.0);
    s2.sqrt().asin()
}

/// Conjugate-linear-in-the-first-slot inner product.
pub fn cdot(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

pub fn cnorm(a: &[C64]) -> f64 {
    a.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
}

pub fn to_complex(x: &[f64]) -> Vec<C64> {
    x.iter().map(|&v| C64::new(v, 0.0)).collect()
}
