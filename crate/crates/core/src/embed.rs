//! Embedded manifolds in Euclidean space.
//!
//! Every supported manifold lives in some `R^N` with the induced Euclidean
//! metric. Points are stored as flat coordinate vectors:
//!
//! * `Sphere(n)` uses `n + 1` coordinates.
//! * `ProductSpheres(n_1, .., n_k)` concatenates the factor coordinates.
//! * Hypersurfaces `{g = c}` use the coordinates of the ambient space of `g`.
//! * `StiefelV2(2n)` stores an orthonormal `2n x 2` frame column-major, i.e.
//!   the first `2n` entries are the base point `x_1` and the last `2n` the
//!   unit tangent vector `x_2`.

use std::ops::{Deref, Range};

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::{axpy, dot, gaussian_vec, norm, random_unit, scale};

/// Residual accepted for a point to count as lying on its manifold.
pub const POINT_TOL: f64 = 1e-9;

const NEWTON_MAX_ITERS: usize = 50;
const NEWTON_TOL: f64 = 1e-12;
const SINGULAR_EPS: f64 = 1e-14;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EmbedError {
    #[error("SingularInput: {0}")]
    SingularInput(&'static str),
    #[error("NoConvergence: hypersurface projection stalled at residual {residual:e} after {iterations} iterations")]
    NoConvergence { iterations: usize, residual: f64 },
    #[error("InvalidDirection: {0}")]
    InvalidDirection(String),
    #[error("OddLength: complex structure needs an even length, got {0}")]
    OddLength(usize),
    #[error("BadLength: quaternionic structure needs a length divisible by 4, got {0}")]
    BadLength(usize),
    #[error("InvalidSpec: {0}")]
    InvalidSpec(String),
    #[error("DimensionMismatch: expected {expected} coordinates, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("NotOnManifold: constraint residual {0:e}")]
    NotOnManifold(f64),
}

/// Built-in constraint functions for implicit hypersurfaces.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case")]
pub enum ConstraintField {
    /// `g(x) = sum_i (x_i / a_i)^2`
    Ellipsoid { semiaxes: Vec<f64> },
    /// `g(x) = (sqrt(x_1^2 + x_2^2) - major)^2 + x_3^2`, a torus of revolution
    /// about the third axis. The tube radius is `sqrt(level)`.
    Torus { major: f64 },
}

impl ConstraintField {
    pub fn dim(&self) -> usize {
        match self {
            ConstraintField::Ellipsoid { semiaxes } => semiaxes.len(),
            ConstraintField::Torus { .. } => 3,
        }
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        match self {
            ConstraintField::Ellipsoid { semiaxes } => x
                .iter()
                .zip(semiaxes)
                .map(|(xi, a)| (xi / a) * (xi / a))
                .sum(),
            ConstraintField::Torus { major } => {
                let rho = x[0].hypot(x[1]);
                (rho - major) * (rho - major) + x[2] * x[2]
            }
        }
    }

    pub fn gradient(&self, x: &[f64]) -> Vec<f64> {
        match self {
            ConstraintField::Ellipsoid { semiaxes } => x
                .iter()
                .zip(semiaxes)
                .map(|(xi, a)| 2.0 * xi / (a * a))
                .collect(),
            ConstraintField::Torus { major } => {
                let rho = x[0].hypot(x[1]);
                if rho == 0.0 {
                    return vec![0.0, 0.0, 2.0 * x[2]];
                }
                let s = 2.0 * (rho - major) / rho;
                vec![s * x[0], s * x[1], 2.0 * x[2]]
            }
        }
    }

    /// Row-major Hessian.
    pub fn hessian(&self, x: &[f64]) -> Vec<Vec<f64>> {
        let d = self.dim();
        let mut h = vec![vec![0.0; d]; d];
        match self {
            ConstraintField::Ellipsoid { semiaxes } => {
                for (i, a) in semiaxes.iter().enumerate() {
                    h[i][i] = 2.0 / (a * a);
                }
            }
            ConstraintField::Torus { major } => {
                let rho = x[0].hypot(x[1]);
                let rho3 = rho * rho * rho;
                for i in 0..2 {
                    for j in 0..2 {
                        let delta = if i == j { 1.0 } else { 0.0 };
                        h[i][j] = 2.0 * (1.0 - major / rho) * delta + 2.0 * major * x[i] * x[j] / rho3;
                    }
                }
                h[2][2] = 2.0;
            }
        }
        h
    }

    /// Semiaxes of an axis-aligned ellipsoid enclosing `{g = level}`.
    fn bounding_semiaxes(&self, level: f64) -> Vec<f64> {
        match self {
            ConstraintField::Ellipsoid { semiaxes } => {
                semiaxes.iter().map(|a| a * level.sqrt()).collect()
            }
            ConstraintField::Torus { major } => {
                let tube = level.sqrt();
                vec![major + tube, major + tube, tube]
            }
        }
    }

    fn validate(&self, level: f64) -> Result<(), EmbedError> {
        if !(level > 0.0 && level.is_finite()) {
            return Err(EmbedError::InvalidSpec(format!("level must be positive, got {level}")));
        }
        match self {
            ConstraintField::Ellipsoid { semiaxes } => {
                if semiaxes.len() < 2 {
                    return Err(EmbedError::InvalidSpec("ellipsoid needs at least two semiaxes".into()));
                }
                if semiaxes.iter().any(|a| !(*a > 0.0 && a.is_finite())) {
                    return Err(EmbedError::InvalidSpec("ellipsoid semiaxes must be strictly positive".into()));
                }
            }
            ConstraintField::Torus { major } => {
                if !(*major > 0.0) || level.sqrt() >= *major {
                    return Err(EmbedError::InvalidSpec(
                        "torus needs major radius greater than the tube radius sqrt(level)".into(),
                    ));
                }
            }
        }
        Ok(())
    }
}

/// Descriptor of a supported embedded manifold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ManifoldSpec {
    /// The unit sphere `S^n` in `R^(n+1)`.
    Sphere { n: usize },
    /// `S^(n_1) x .. x S^(n_k)`.
    ProductSpheres { dims: Vec<usize> },
    /// `{x : g(x) = level}`.
    Hypersurface { field: ConstraintField, level: f64 },
    /// `{x : sum (x_i / a_i)^2 = 1}`.
    Ellipsoid { semiaxes: Vec<f64> },
    /// Orthonormal 2-frames in `R^ambient`, i.e. the unit tangent bundle of
    /// `S^(ambient - 1)`. `ambient` must be even.
    #[serde(rename = "stiefel_v2")]
    StiefelV2 { ambient: usize },
}

impl ManifoldSpec {
    pub fn sphere(n: usize) -> Self {
        ManifoldSpec::Sphere { n }
    }

    pub fn product(dims: &[usize]) -> Self {
        ManifoldSpec::ProductSpheres { dims: dims.to_vec() }
    }

    pub fn ellipsoid(semiaxes: &[f64]) -> Self {
        ManifoldSpec::Ellipsoid { semiaxes: semiaxes.to_vec() }
    }

    /// `V_2(R^(2n))`, the unit tangent bundle of `S^(2n-1)`.
    pub fn unit_tangent(n: usize) -> Self {
        ManifoldSpec::StiefelV2 { ambient: 2 * n }
    }

    pub fn from_json(s: &str) -> Result<Self, EmbedError> {
        let spec: ManifoldSpec =
            serde_json::from_str(s).map_err(|e| EmbedError::InvalidSpec(e.to_string()))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<(), EmbedError> {
        match self {
            ManifoldSpec::Sphere { n } if *n == 0 => {
                Err(EmbedError::InvalidSpec("S^0 is not connected".into()))
            }
            ManifoldSpec::ProductSpheres { dims } if dims.is_empty() || dims.contains(&0) => {
                Err(EmbedError::InvalidSpec("product needs factors of positive dimension".into()))
            }
            ManifoldSpec::Hypersurface { field, level } => field.validate(*level),
            ManifoldSpec::Ellipsoid { semiaxes } => ConstraintField::Ellipsoid {
                semiaxes: semiaxes.clone(),
            }
            .validate(1.0),
            ManifoldSpec::StiefelV2 { ambient } if *ambient < 2 || ambient % 2 != 0 => Err(
                EmbedError::InvalidSpec(format!("StiefelV2 needs an even ambient dimension >= 2, got {ambient}")),
            ),
            _ => Ok(()),
        }
    }

    pub fn ambient_dim(&self) -> usize {
        match self {
            ManifoldSpec::Sphere { n } => n + 1,
            ManifoldSpec::ProductSpheres { dims } => dims.iter().map(|n| n + 1).sum(),
            ManifoldSpec::Hypersurface { field, .. } => field.dim(),
            ManifoldSpec::Ellipsoid { semiaxes } => semiaxes.len(),
            ManifoldSpec::StiefelV2 { ambient } => 2 * ambient,
        }
    }

    /// Coordinate blocks of the sphere factors; `None` for non-sphere kinds.
    pub fn sphere_blocks(&self) -> Option<Vec<Range<usize>>> {
        let dims: &[usize] = match self {
            ManifoldSpec::Sphere { n } => std::slice::from_ref(n),
            ManifoldSpec::ProductSpheres { dims } => dims,
            _ => return None,
        };
        let mut start = 0;
        Some(
            dims.iter()
                .map(|n| {
                    let r = start..start + n + 1;
                    start += n + 1;
                    r
                })
                .collect(),
        )
    }

    /// Sphere dimensions of the factors; `None` for non-sphere kinds.
    pub fn sphere_dims(&self) -> Option<Vec<usize>> {
        match self {
            ManifoldSpec::Sphere { n } => Some(vec![*n]),
            ManifoldSpec::ProductSpheres { dims } => Some(dims.clone()),
            _ => None,
        }
    }

    /// The `r`-fold product `M^r` for sphere products, slot-major.
    pub fn power(&self, r: usize) -> Option<ManifoldSpec> {
        let dims = self.sphere_dims()?;
        Some(ManifoldSpec::ProductSpheres {
            dims: std::iter::repeat_n(dims, r).flatten().collect(),
        })
    }

    /// Constraint function and level for hypersurface kinds.
    pub fn constraint(&self) -> Option<(ConstraintField, f64)> {
        match self {
            ManifoldSpec::Hypersurface { field, level } => Some((field.clone(), *level)),
            ManifoldSpec::Ellipsoid { semiaxes } => Some((
                ConstraintField::Ellipsoid { semiaxes: semiaxes.clone() },
                1.0,
            )),
            _ => None,
        }
    }

    pub fn is_hypersurface(&self) -> bool {
        matches!(self, ManifoldSpec::Hypersurface { .. } | ManifoldSpec::Ellipsoid { .. })
    }

    fn check_len(&self, x: &[f64]) -> Result<(), EmbedError> {
        let expected = self.ambient_dim();
        if x.len() != expected {
            return Err(EmbedError::DimensionMismatch { expected, got: x.len() });
        }
        Ok(())
    }

    /// Constraint residual of `x`: `| |x| - 1 |` per sphere factor,
    /// `|g(x) - c|` for hypersurfaces and `|X^T X - 1|_F` for frames.
    pub fn residual(&self, x: &[f64]) -> f64 {
        if let Some(blocks) = self.sphere_blocks() {
            return blocks
                .into_iter()
                .map(|b| (norm(&x[b]) - 1.0).abs())
                .fold(0.0, f64::max);
        }
        if let Some((field, level)) = self.constraint() {
            return (field.value(x) - level).abs();
        }
        let (x1, x2) = columns(x);
        let a = dot(x1, x1) - 1.0;
        let b = dot(x2, x2) - 1.0;
        let c = dot(x1, x2);
        (a * a + b * b + 2.0 * c * c).sqrt()
    }

    /// Tangency residual of `v` at `x`.
    pub fn tangency_residual(&self, x: &[f64], v: &[f64]) -> f64 {
        if let Some(blocks) = self.sphere_blocks() {
            return blocks
                .into_iter()
                .map(|b| dot(&x[b.clone()], &v[b]).abs())
                .fold(0.0, f64::max);
        }
        if let Some((field, _)) = self.constraint() {
            let g = field.gradient(x);
            return dot(&g, v).abs() / norm(&g);
        }
        let (x1, x2) = columns(x);
        let (y1, y2) = columns(v);
        let a = 2.0 * dot(x1, y1);
        let b = 2.0 * dot(x2, y2);
        let c = dot(x1, y2) + dot(x2, y1);
        (a * a + b * b + 2.0 * c * c).sqrt()
    }

    /// Retraction onto the manifold.
    ///
    /// Sphere factors are normalized, frames are orthonormalized by
    /// Gram-Schmidt anchored at the first column, and hypersurface points are
    /// moved by damped Newton steps along `grad g` until `|g - c| <= 1e-12`.
    pub fn project(&self, x: &[f64]) -> Result<Vec<f64>, EmbedError> {
        self.check_len(x)?;
        if let Some(blocks) = self.sphere_blocks() {
            let mut out = x.to_vec();
            for b in blocks {
                let n = norm(&x[b.clone()]);
                if n < SINGULAR_EPS {
                    return Err(EmbedError::SingularInput("zero sphere factor"));
                }
                out[b].iter_mut().for_each(|v| *v /= n);
            }
            return Ok(out);
        }
        if let Some((field, level)) = self.constraint() {
            return newton_to_level(&field, level, x);
        }
        orthonormalize_frame(x)
    }

    /// Orthogonal projection of an ambient vector onto `T_x M`.
    pub fn tangent_project(&self, x: &[f64], w: &[f64]) -> Vec<f64> {
        let mut out = w.to_vec();
        if let Some(blocks) = self.sphere_blocks() {
            for b in blocks {
                let s = dot(&x[b.clone()], &w[b.clone()]);
                axpy(&mut out[b.clone()], -s, &x[b]);
            }
            return out;
        }
        if let Some((field, _)) = self.constraint() {
            let g = field.gradient(x);
            let s = dot(&g, w) / dot(&g, &g);
            axpy(&mut out, -s, &g);
            return out;
        }
        // W - X sym(X^T W)
        let half = x.len() / 2;
        let (x1, x2) = columns(x);
        let (w1, w2) = columns(w);
        let a = dot(x1, w1);
        let b = dot(x2, w2);
        let c = 0.5 * (dot(x1, w2) + dot(x2, w1));
        {
            let (o1, o2) = out.split_at_mut(half);
            axpy(o1, -a, x1);
            axpy(o1, -c, x2);
            axpy(o2, -c, x1);
            axpy(o2, -b, x2);
        }
        out
    }

    /// Random point. Spheres and frames are sampled uniformly; hypersurface
    /// points are drawn uniformly from a thin shell around the surface (by
    /// rejection from a bounding ellipsoid) and then projected.
    pub fn random_point<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        if let Some(blocks) = self.sphere_blocks() {
            let mut out = vec![0.0; self.ambient_dim()];
            for b in blocks {
                let u = random_unit(rng, b.len());
                out[b].copy_from_slice(&u);
            }
            return out;
        }
        if let Some((field, level)) = self.constraint() {
            return sample_hypersurface(&field, level, rng);
        }
        loop {
            let g = gaussian_vec(rng, self.ambient_dim());
            if let Ok(p) = orthonormalize_frame(&g) {
                return p;
            }
        }
    }

    /// Random tangent vector at `x` (Gaussian, projected).
    pub fn random_tangent<R: Rng + ?Sized>(&self, x: &[f64], rng: &mut R) -> Vec<f64> {
        let w = gaussian_vec(rng, self.ambient_dim());
        self.tangent_project(x, &w)
    }
}

/// A point checked against its manifold's constraint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PointOnM(Vec<f64>);

impl PointOnM {
    pub fn new(spec: &ManifoldSpec, coords: Vec<f64>) -> Result<Self, EmbedError> {
        spec.check_len(&coords)?;
        let res = spec.residual(&coords);
        if !(res <= POINT_TOL) {
            return Err(EmbedError::NotOnManifold(res));
        }
        Ok(PointOnM(coords))
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl Deref for PointOnM {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        &self.0
    }
}

/// Split a column-major `2n x 2` frame into its columns.
pub fn columns(x: &[f64]) -> (&[f64], &[f64]) {
    x.split_at(x.len() / 2)
}

pub fn frame(x1: &[f64], x2: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(x1.len() * 2);
    out.extend_from_slice(x1);
    out.extend_from_slice(x2);
    out
}

fn orthonormalize_frame(x: &[f64]) -> Result<Vec<f64>, EmbedError> {
    let (c1, c2) = columns(x);
    let n1 = norm(c1);
    if n1 < SINGULAR_EPS {
        return Err(EmbedError::SingularInput("rank-deficient frame"));
    }
    let q1: Vec<f64> = if n1 == 1.0 { c1.to_vec() } else { scale(c1, 1.0 / n1) };
    let mut q2 = c2.to_vec();
    // two passes keep the orthogonality residual at rounding level
    for _ in 0..2 {
        let s = dot(&q1, &q2);
        axpy(&mut q2, -s, &q1);
    }
    let n2 = norm(&q2);
    if n2 < 1e-12 * norm(c2).max(1.0) {
        return Err(EmbedError::SingularInput("rank-deficient frame"));
    }
    if n2 != 1.0 {
        q2.iter_mut().for_each(|v| *v /= n2);
    }
    Ok(frame(&q1, &q2))
}

fn newton_to_level(field: &ConstraintField, level: f64, x: &[f64]) -> Result<Vec<f64>, EmbedError> {
    let mut y = x.to_vec();
    let mut res = field.value(&y) - level;
    for _ in 0..NEWTON_MAX_ITERS {
        if res.abs() <= NEWTON_TOL {
            return Ok(y);
        }
        let g = field.gradient(&y);
        let g2 = dot(&g, &g);
        if g2 < SINGULAR_EPS * SINGULAR_EPS {
            return Err(EmbedError::SingularInput("constraint gradient vanishes"));
        }
        let mut damping = 1.0;
        loop {
            let mut cand = y.clone();
            axpy(&mut cand, -damping * res / g2, &g);
            let cand_res = field.value(&cand) - level;
            if cand_res.abs() < res.abs() || damping < 1e-4 {
                y = cand;
                res = cand_res;
                break;
            }
            damping *= 0.5;
        }
    }
    if res.abs() <= NEWTON_TOL {
        Ok(y)
    } else {
        Err(EmbedError::NoConvergence { iterations: NEWTON_MAX_ITERS, residual: res.abs() })
    }
}

fn sample_hypersurface<R: Rng + ?Sized>(field: &ConstraintField, level: f64, rng: &mut R) -> Vec<f64> {
    let semi = field.bounding_semiaxes(level);
    let shell = 0.05 * semi.iter().cloned().fold(f64::INFINITY, f64::min);
    let outer: Vec<f64> = semi.iter().map(|a| a + shell).collect();
    let d = semi.len();
    loop {
        // uniform in the unit ball, stretched to the bounding ellipsoid
        let dir = random_unit(rng, d);
        let rad = rng.random::<f64>().powf(1.0 / d as f64);
        let p: Vec<f64> = dir.iter().zip(&outer).map(|(u, a)| u * a * rad).collect();
        let g = field.gradient(&p);
        let gn = norm(&g);
        if gn < 1e-8 {
            continue;
        }
        if (field.value(&p) - level).abs() / gn > shell {
            continue;
        }
        if let Ok(q) = newton_to_level(field, level, &p) {
            return q;
        }
    }
}

/// Great-circle segment `s(t) = cos(pi tau) x + sin(pi tau) dir`,
/// `tau = (t - t0) / (t1 - t0)`, running from `x` to `-x`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GreatCircle {
    pub x: Vec<f64>,
    pub dir: Vec<f64>,
    pub t0: f64,
    pub t1: f64,
}

impl GreatCircle {
    pub fn eval(&self, t: f64) -> Vec<f64> {
        let tau = (t - self.t0) / (self.t1 - self.t0);
        if tau == 0.0 {
            return self.x.clone();
        }
        if tau == 1.0 {
            return scale(&self.x, -1.0);
        }
        let (s, c) = (std::f64::consts::PI * tau).sin_cos();
        self.x.iter().zip(&self.dir).map(|(a, b)| c * a + s * b).collect()
    }

    pub fn velocity(&self, t: f64) -> Vec<f64> {
        let w = std::f64::consts::PI / (self.t1 - self.t0);
        let tau = (t - self.t0) / (self.t1 - self.t0);
        let (s, c) = (std::f64::consts::PI * tau).sin_cos();
        self.x.iter().zip(&self.dir).map(|(a, b)| w * (-s * a + c * b)).collect()
    }
}

/// The half great circle from `x` to `-x` leaving in direction `dir`,
/// traversed at constant speed on `[t0, t1]`.
pub fn geodesic_to_antipode(x: &[f64], dir: &[f64], t0: f64, t1: f64) -> Result<GreatCircle, EmbedError> {
    if x.len() != dir.len() {
        return Err(EmbedError::DimensionMismatch { expected: x.len(), got: dir.len() });
    }
    if (norm(x) - 1.0).abs() > POINT_TOL {
        return Err(EmbedError::NotOnManifold((norm(x) - 1.0).abs()));
    }
    if (norm(dir) - 1.0).abs() > POINT_TOL {
        return Err(EmbedError::InvalidDirection(format!("|dir| = {}", norm(dir))));
    }
    if dot(x, dir).abs() > POINT_TOL {
        return Err(EmbedError::InvalidDirection(format!("<x, dir> = {:e}", dot(x, dir))));
    }
    if !(t0 < t1) {
        return Err(EmbedError::InvalidDirection(format!("empty interval [{t0}, {t1}]")));
    }
    Ok(GreatCircle { x: x.to_vec(), dir: dir.to_vec(), t0, t1 })
}

/// Multiplication by the complex unit on `R^(2n) = C^n`:
/// `(x_1, .., x_2n) -> (x_2, -x_1, x_4, -x_3, ..)`.
pub fn mult_i(x: &[f64]) -> Result<Vec<f64>, EmbedError> {
    if !x.len().is_multiple_of(2) {
        return Err(EmbedError::OddLength(x.len()));
    }
    Ok(x.chunks_exact(2).flat_map(|p| [p[1], -p[0]]).collect())
}

/// Left multiplication by the quaternion `j` on `R^(4m) = H^m`:
/// `(x_1, .., x_4) -> (-x_4, -x_3, x_2, x_1)` blockwise.
pub fn mult_j(x: &[f64]) -> Result<Vec<f64>, EmbedError> {
    if !x.len().is_multiple_of(4) {
        return Err(EmbedError::BadLength(x.len()));
    }
    Ok(x.chunks_exact(4).flat_map(|q| [-q[3], -q[2], q[1], q[0]]).collect())
}
