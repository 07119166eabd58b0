//! Small dense-vector helpers shared by the geometry modules.
//!
//! Points and tangent vectors are plain `f64` slices in ambient coordinates,
//! so these helpers stay allocation-light and avoid pulling a matrix type
//! into every signature.

use rand::Rng;
use rand_distr::StandardNormal;

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

pub fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

pub fn add(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}

pub fn scale(a: &[f64], s: f64) -> Vec<f64> {
    a.iter().map(|x| x * s).collect()
}

/// `y += s * x`
#[inline]
pub fn axpy(y: &mut [f64], s: f64, x: &[f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += s * xi;
    }
}

pub fn max_abs(a: &[f64]) -> f64 {
    a.iter().fold(0.0_f64, |m, x| m.max(x.abs()))
}

pub fn gaussian_vec<R: Rng + ?Sized>(rng: &mut R, len: usize) -> Vec<f64> {
    (0..len).map(|_| rng.sample::<f64, _>(StandardNormal)).collect()
}

/// Uniform random unit vector in `R^len`.
pub fn random_unit<R: Rng + ?Sized>(rng: &mut R, len: usize) -> Vec<f64> {
    loop {
        let v = gaussian_vec(rng, len);
        let n = norm(&v);
        if n > 1e-8 {
            return scale(&v, 1.0 / n);
        }
    }
}

/// Central finite-difference gradient with step `1e-6 * (1 + |x|)`.
pub fn central_difference_gradient<F>(f: F, x: &[f64]) -> Vec<f64>
where
    F: Fn(&[f64]) -> f64,
{
    let h = 1e-6 * (1.0 + norm(x));
    let mut probe = x.to_vec();
    (0..x.len())
        .map(|k| {
            let orig = probe[k];
            probe[k] = orig + h;
            let fp = f(&probe);
            probe[k] = orig - h;
            let fm = f(&probe);
            probe[k] = orig;
            (fp - fm) / (2.0 * h)
        })
        .collect()
}

/// Relative error `|a - b| / max(|a|, |b|, floor)`.
pub fn relative_error(a: &[f64], b: &[f64], floor: f64) -> f64 {
    let scale = norm(a).max(norm(b)).max(floor);
    dist(a, b) / scale
}
