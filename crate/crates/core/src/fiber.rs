//! The unit tangent bundle `US^(2n-1)` as a fibration over `S^(2n-1)`.
//!
//! A point is a frame `(x_1, x_2)` (see [`crate::embed`]); the bundle
//! projection is `p(x_1, x_2) = x_1`. `R^(2n)` is identified with `C^n` by
//! `z_k = x_(2k-1) + i x_(2k)`, under which [`mult_i`] is complex-linear.

use nalgebra::{Complex, DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::embed::{columns, frame, geodesic_to_antipode, mult_i, mult_j, EmbedError, ManifoldSpec, POINT_TOL};
use crate::flow::{ComponentLabel, ScalarField};
use crate::linalg::{axpy, dist, dot, norm, scale};
use crate::planner::{PathBlock, PathSpec, Segment};

type C64 = Complex<f64>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FiberError {
    #[error("NotTangent: tangency residual {0:e}")]
    NotTangent(f64),
    #[error("FiberMismatch: entry {index} has base point {offset:e} away from the first entry")]
    FiberMismatch { index: usize, offset: f64 },
    #[error("NotCriticalTuple: entry {0} is not of the form (x, +-ix)")]
    NotCriticalTuple(usize),
    #[error("WrongDimension: {0}")]
    WrongDimension(String),
    #[error("DegenerateBase: {0}")]
    DegenerateBase(String),
    #[error(transparent)]
    Embed(#[from] EmbedError),
}

fn stiefel(x: &[f64]) -> Result<ManifoldSpec, FiberError> {
    if !x.len().is_multiple_of(4) || x.is_empty() {
        return Err(FiberError::WrongDimension(format!("{} coordinates do not form a frame in R^(2n)", x.len())));
    }
    Ok(ManifoldSpec::StiefelV2 { ambient: x.len() / 2 })
}

fn check_tangent(x: &[f64], y: &[f64]) -> Result<(), FiberError> {
    let spec = stiefel(x)?;
    if y.len() != x.len() {
        return Err(EmbedError::DimensionMismatch { expected: x.len(), got: y.len() }.into());
    }
    let res = spec.tangency_residual(x, y);
    if res > 1e-9 * norm(y).max(1.0) {
        return Err(FiberError::NotTangent(res));
    }
    Ok(())
}

fn ut_value(x: &[f64]) -> f64 {
    let (x1, x2) = columns(x);
    dot(&mult_i(x1).expect("even column"), x2)
}

/// `f(X) = <i x_1, x_2>`.
pub fn f_ut(x: &[f64]) -> Result<f64, FiberError> {
    stiefel(x)?;
    Ok(ut_value(x))
}

/// `Df_X(Y) = <i y_1, x_2> + <i x_1, y_2>`.
pub fn df_ut(x: &[f64], y: &[f64]) -> Result<f64, FiberError> {
    check_tangent(x, y)?;
    let (x1, x2) = columns(x);
    let (y1, y2) = columns(y);
    Ok(dot(&mult_i(y1)?, x2) + dot(&mult_i(x1)?, y2))
}

/// `f_ut` as a field on `V_2(R^(2n))`.
#[derive(Debug, Clone)]
pub struct UtField {
    spec: ManifoldSpec,
}

impl UtField {
    /// On `US^(2n-1)`, i.e. frames in `R^(2n)`.
    pub fn new(n: usize) -> Self {
        UtField { spec: ManifoldSpec::unit_tangent(n) }
    }
}

impl ScalarField for UtField {
    fn manifold(&self) -> &ManifoldSpec {
        &self.spec
    }

    fn value(&self, x: &[f64]) -> f64 {
        ut_value(x)
    }

    /// `(-i x_2, i x_1)`, since `i` is skew-adjoint.
    fn euclidean_gradient(&self, x: &[f64]) -> Vec<f64> {
        let (x1, x2) = columns(x);
        frame(&scale(&mult_i(x2).expect("even column"), -1.0), &mult_i(x1).expect("even column"))
    }

    fn classify(&self, x: &[f64], tol: f64) -> ComponentLabel {
        let (x1, x2) = columns(x);
        let ix1 = mult_i(x1).expect("even column");
        if dist(x2, &ix1) <= tol {
            ComponentLabel::ComplexTag { sign: 1 }
        } else if dist(x2, &scale(&ix1, -1.0)) <= tol {
            ComponentLabel::ComplexTag { sign: -1 }
        } else {
            ComponentLabel::Unclassified
        }
    }
}

/// `f(X) = <x_1, e_1>`, constant on fibres.
#[derive(Debug, Clone)]
pub struct BaseOnlyField {
    spec: ManifoldSpec,
}

impl BaseOnlyField {
    pub fn new(n: usize) -> Self {
        BaseOnlyField { spec: ManifoldSpec::unit_tangent(n) }
    }
}

impl ScalarField for BaseOnlyField {
    fn manifold(&self) -> &ManifoldSpec {
        &self.spec
    }

    fn value(&self, x: &[f64]) -> f64 {
        x[0]
    }

    fn euclidean_gradient(&self, x: &[f64]) -> Vec<f64> {
        let mut g = vec![0.0; x.len()];
        g[0] = 1.0;
        g
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerticalDecomposition {
    pub base: Vec<f64>,
    pub vertical: Vec<f64>,
    pub horizontal: Vec<f64>,
}

fn vertical_part(x: &[f64], y: &[f64]) -> Vec<f64> {
    let (x1, x2) = columns(x);
    let (_, y2) = columns(y);
    let mut w = y2.to_vec();
    axpy(&mut w, -dot(y2, x1), x1);
    axpy(&mut w, -dot(y2, x2), x2);
    frame(&vec![0.0; w.len()], &w)
}

/// Split a tangent vector into its part along the fibre of `p` (first
/// column zero, second column orthogonal to `x_1, x_2`) and the rest.
pub fn vertical_project(x: &[f64], y: &[f64]) -> Result<VerticalDecomposition, FiberError> {
    check_tangent(x, y)?;
    let vertical = vertical_part(x, y);
    let horizontal = y.iter().zip(&vertical).map(|(a, b)| a - b).collect();
    Ok(VerticalDecomposition { base: x.to_vec(), vertical, horizontal })
}

/// Vertical gradient `pr_ver(grad f)` of a field on `V_2(R^(2n))`.
pub fn vertical_gradient<F: ScalarField + ?Sized>(field: &F, x: &[f64]) -> Vec<f64> {
    vertical_part(x, &field.gradient(x))
}

/// Restricts the flow of a field on the bundle to vertical directions.
/// Values and gradients are those of the wrapped field.
pub struct VerticalField<'a, F: ?Sized> {
    inner: &'a F,
}

impl<'a, F: ScalarField + ?Sized> VerticalField<'a, F> {
    pub fn new(inner: &'a F) -> Self {
        VerticalField { inner }
    }
}

impl<F: ScalarField + ?Sized> ScalarField for VerticalField<'_, F> {
    fn manifold(&self) -> &ManifoldSpec {
        self.inner.manifold()
    }
    fn value(&self, x: &[f64]) -> f64 {
        self.inner.value(x)
    }
    fn euclidean_gradient(&self, x: &[f64]) -> Vec<f64> {
        self.inner.euclidean_gradient(x)
    }
    fn gradient(&self, x: &[f64]) -> Vec<f64> {
        self.inner.gradient(x)
    }
    fn descent_direction(&self, x: &[f64]) -> (Vec<f64>, f64) {
        let v = vertical_gradient(self.inner, x);
        let n = norm(&v);
        (v, n)
    }
    fn classify(&self, x: &[f64], tol: f64) -> ComponentLabel {
        self.inner.classify(x, tol)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProportionalityReport {
    /// `sup |grad f| / |grad^ver f|` over samples with `|grad f| > 1e-6`.
    pub max_ratio: Option<f64>,
    pub evaluated: usize,
    pub skipped: usize,
    /// Samples with `|grad^ver f| <= 1e-8` but `|grad f| > 1e-6`.
    pub violations: usize,
    pub singular_consistency: bool,
}

/// Empirical vertical-proportionality constant and singular-set check.
pub fn vertical_proportionality_scan<F: ScalarField + ?Sized>(field: &F, samples: &[Vec<f64>]) -> ProportionalityReport {
    let norms: Vec<(f64, f64)> = samples
        .par_iter()
        .map(|x| {
            let g = field.gradient(x);
            (norm(&g), norm(&vertical_part(x, &g)))
        })
        .collect();
    let mut max_ratio: Option<f64> = None;
    let (mut evaluated, mut violations) = (0, 0);
    for (full, ver) in &norms {
        if *ver <= 1e-8 && *full > 1e-6 {
            violations += 1;
        }
        if *full > 1e-6 {
            evaluated += 1;
            let ratio = if *ver > 0.0 { full / ver } else { f64::INFINITY };
            max_ratio = Some(max_ratio.map_or(ratio, |m| m.max(ratio)));
        }
    }
    ProportionalityReport {
        max_ratio,
        evaluated,
        skipped: norms.len() - evaluated,
        violations,
        singular_consistency: violations == 0,
    }
}

/// `(u_1, .., u_r)` in the fibre product `E^r_X`: frames sharing `x_1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FiberTuple {
    pub r: usize,
    pub entries: Vec<Vec<f64>>,
}

impl FiberTuple {
    pub fn new(entries: Vec<Vec<f64>>) -> Result<Self, FiberError> {
        if entries.len() < 2 {
            return Err(FiberError::WrongDimension(format!("need r >= 2 entries, got {}", entries.len())));
        }
        let spec = stiefel(&entries[0])?;
        for (index, u) in entries.iter().enumerate() {
            if u.len() != entries[0].len() {
                return Err(EmbedError::DimensionMismatch { expected: entries[0].len(), got: u.len() }.into());
            }
            let res = spec.residual(u);
            if res > POINT_TOL {
                return Err(EmbedError::NotOnManifold(res).into());
            }
            let offset = dist(columns(u).0, columns(&entries[0]).0);
            if offset > POINT_TOL {
                return Err(FiberError::FiberMismatch { index, offset });
            }
        }
        Ok(FiberTuple { r: entries.len(), entries })
    }

    pub fn basepoint(&self) -> &[f64] {
        columns(&self.entries[0]).0
    }

    pub fn ambient(&self) -> usize {
        self.entries[0].len() / 2
    }
}

/// Componentwise vertical gradients `(grad^ver f(u_1), .., grad^ver f(u_r))`.
pub fn fiber_vertical_gradient<F: ScalarField + ?Sized>(field: &F, t: &FiberTuple) -> Vec<Vec<f64>> {
    t.entries.iter().map(|u| vertical_gradient(field, u)).collect()
}

/// Gradient of `F(u) = sum_i f(u_i)` on `E^r_X` for the metric induced
/// from `E^r`.
///
/// Tangent vectors are `(a, -<v_i, a> x + beta_i)_i` with `a` orthogonal to
/// `x` and `beta_i` orthogonal to `x, v_i`, where `u_i = (x, v_i)`. The
/// metric on the `a` part is `r I + sum_i v_i v_i^T`.
pub fn fiber_product_gradient<F: ScalarField + ?Sized>(field: &F, t: &FiberTuple) -> Vec<Vec<f64>> {
    let x = t.basepoint();
    let d = x.len();
    let mut rhs = vec![0.0; d];
    let mut betas = Vec::with_capacity(t.r);
    let mut metric = DMatrix::<f64>::identity(d, d) * t.r as f64;
    for u in &t.entries {
        let (_, v) = columns(u);
        let w = field.euclidean_gradient(u);
        let (w1, w2) = columns(&w);
        let c = dot(x, w2);
        axpy(&mut rhs, 1.0, w1);
        axpy(&mut rhs, -dot(x, w1), x);
        axpy(&mut rhs, -c, v);
        metric += DVector::from_column_slice(v) * DVector::from_column_slice(v).transpose();
        let mut beta = w2.to_vec();
        axpy(&mut beta, -c, x);
        axpy(&mut beta, -dot(w2, v), v);
        betas.push(beta);
    }
    let a = metric
        .cholesky()
        .expect("r I + sum v v^T is positive definite")
        .solve(&DVector::from_vec(rhs));
    let a: Vec<f64> = a.iter().copied().collect();
    t.entries
        .iter()
        .zip(betas)
        .map(|(u, beta)| {
            let (_, v) = columns(u);
            let mut second = beta;
            axpy(&mut second, -dot(v, &a), x);
            frame(&a, &second)
        })
        .collect()
}

/// Parametrized sequential planner on tuples of critical points `(x, +-ix)`
/// of `f_ut` over `US^(4m-1)`. The base point stays fixed; where
/// consecutive signs differ, the second column turns from `v` to `-v`
/// through `jx`.
pub fn sigma_u_planner(t: &FiberTuple) -> Result<PathSpec, FiberError> {
    let d = t.ambient();
    if !d.is_multiple_of(4) {
        return Err(FiberError::WrongDimension(format!("ambient dimension {d} is not a multiple of 4")));
    }
    let x = t.basepoint();
    let ix = mult_i(x)?;
    let jx = mult_j(x)?;
    let mut signs = Vec::with_capacity(t.r);
    for (index, u) in t.entries.iter().enumerate() {
        let v = columns(u).1;
        if dist(v, &ix) <= POINT_TOL {
            signs.push(1.0);
        } else if dist(v, &scale(&ix, -1.0)) <= POINT_TOL {
            signs.push(-1.0);
        } else {
            return Err(FiberError::NotCriticalTuple(index));
        }
    }
    let m = (t.r - 1) as f64;
    let mut second = Vec::with_capacity(t.r - 1);
    for l in 0..t.r - 1 {
        let (t0, t1) = (l as f64 / m, (l + 1) as f64 / m);
        let v = scale(&ix, signs[l]);
        if signs[l] == signs[l + 1] {
            second.push(Segment::Constant { point: v, t0, t1 });
        } else {
            second.push(Segment::GreatCircle(geodesic_to_antipode(&v, &jx, t0, t1)?));
        }
    }
    Ok(PathSpec {
        manifold: Some(ManifoldSpec::StiefelV2 { ambient: d }),
        dim: 2 * d,
        blocks: vec![
            PathBlock { start: 0, end: d, segments: vec![Segment::Constant { point: x.to_vec(), t0: 0.0, t1: 1.0 }] },
            PathBlock { start: d, end: 2 * d, segments: second },
        ],
    })
}

fn to_complex(x: &[f64]) -> DVector<C64> {
    DVector::from_iterator(x.len() / 2, x.chunks_exact(2).map(|p| C64::new(p[0], p[1])))
}

fn to_real(z: &DVector<C64>) -> Vec<f64> {
    z.iter().flat_map(|c| [c.re, c.im]).collect()
}

/// Unitary matrix whose first column is the unit vector `b`, completed by
/// Gram-Schmidt on the standard basis taken in order of increasing `|b_k|`.
fn unitary_with_first_column(b: &DVector<C64>) -> Result<DMatrix<C64>, FiberError> {
    let n = b.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&p, &q| b[p].norm().total_cmp(&b[q].norm()).then(p.cmp(&q)));
    let mut cols: Vec<DVector<C64>> = vec![b.clone()];
    for k in order {
        if cols.len() == n {
            break;
        }
        let mut v = DVector::<C64>::zeros(n);
        v[k] = C64::new(1.0, 0.0);
        for _ in 0..2 {
            for c in &cols {
                let proj = c.dotc(&v);
                v -= c * proj;
            }
        }
        let nv = v.norm();
        if nv > 1e-6 {
            cols.push(v / C64::new(nv, 0.0));
        }
    }
    if cols.len() != n {
        return Err(FiberError::DegenerateBase("Gram-Schmidt completion lost rank".into()));
    }
    Ok(DMatrix::from_columns(&cols))
}

/// `g in SU(n)` with `g b_0 = b`, together with the induced local
/// trivialization `psi(X) = (p(X), g^{-1} X)` of the bundle.
#[derive(Debug, Clone, PartialEq)]
pub struct TrivializationHandle {
    pub b0: Vec<f64>,
    pub b: Vec<f64>,
    pub g: DMatrix<C64>,
}

impl TrivializationHandle {
    /// `g` acting on a real vector of `R^(2n)`.
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        to_real(&(&self.g * to_complex(x)))
    }

    pub fn apply_inverse(&self, x: &[f64]) -> Vec<f64> {
        to_real(&(self.g.adjoint() * to_complex(x)))
    }

    /// `g` applied to both columns of a frame.
    pub fn apply_frame(&self, x: &[f64]) -> Vec<f64> {
        let (x1, x2) = columns(x);
        frame(&self.apply(x1), &self.apply(x2))
    }

    /// `psi(X) = (p(X), g^{-1} X)`.
    pub fn psi(&self, x: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let (x1, x2) = columns(x);
        (x1.to_vec(), frame(&self.apply_inverse(x1), &self.apply_inverse(x2)))
    }

    /// `psi^{-1}(b, X_0) = g X_0` for `X_0` in the fibre over `b_0`.
    pub fn psi_inv(&self, x0: &[f64]) -> Vec<f64> {
        self.apply_frame(x0)
    }

    /// `max |g^* g - 1|` entrywise.
    pub fn unitarity_residual(&self) -> f64 {
        let n = self.g.nrows();
        let e = self.g.adjoint() * &self.g - DMatrix::<C64>::identity(n, n);
        e.iter().map(|c| c.norm()).fold(0.0, f64::max)
    }

    pub fn determinant_residual(&self) -> f64 {
        (self.g.determinant() - C64::new(1.0, 0.0)).norm()
    }

    /// Row-major `[re, im]` pairs.
    pub fn g_pairs(&self) -> Vec<Vec<[f64; 2]>> {
        self.g.row_iter().map(|row| row.iter().map(|c| [c.re, c.im]).collect()).collect()
    }
}

impl Serialize for TrivializationHandle {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        #[derive(Serialize)]
        struct Repr<'a> {
            b0: &'a [f64],
            b: &'a [f64],
            g: Vec<Vec<[f64; 2]>>,
        }
        Repr { b0: &self.b0, b: &self.b, g: self.g_pairs() }.serialize(s)
    }
}

/// Build `g in SU(n)` with `g b_0 = b` for unit vectors of `R^(2n) = C^n`.
pub fn su_trivialization(b0: &[f64], b: &[f64]) -> Result<TrivializationHandle, FiberError> {
    if b0.len() != b.len() {
        return Err(EmbedError::DimensionMismatch { expected: b0.len(), got: b.len() }.into());
    }
    if !b0.len().is_multiple_of(2) || b0.is_empty() {
        return Err(EmbedError::OddLength(b0.len()).into());
    }
    for v in [b0, b] {
        if (norm(v) - 1.0).abs() > POINT_TOL {
            return Err(EmbedError::NotOnManifold((norm(v) - 1.0).abs()).into());
        }
    }
    let n = b0.len() / 2;
    if b0 == b {
        return Ok(TrivializationHandle { b0: b0.to_vec(), b: b.to_vec(), g: DMatrix::identity(n, n) });
    }
    if n == 1 {
        return Err(FiberError::DegenerateBase("SU(1) is trivial, so b must equal b0".into()));
    }
    let u0 = unitary_with_first_column(&to_complex(b0))?;
    let u1 = unitary_with_first_column(&to_complex(b))?;
    let mut g = &u1 * u0.adjoint();
    let phase = g.determinant().arg();
    let mut d = DMatrix::<C64>::identity(n, n);
    d[(n - 1, n - 1)] = C64::from_polar(1.0, -phase);
    g = &u1 * d * u0.adjoint();
    Ok(TrivializationHandle { b0: b0.to_vec(), b: b.to_vec(), g })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{central_difference_gradient, random_unit};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn e(n: usize, k: usize) -> Vec<f64> {
        let mut v = vec![0.0; n];
        v[k] = 1.0;
        v
    }

    fn critical(x: &[f64], s: f64) -> Vec<f64> {
        frame(x, &scale(&mult_i(x).unwrap(), s))
    }

    /// Random frame over a fixed base point.
    fn over(x: &[f64], rng: &mut ChaCha8Rng) -> Vec<f64> {
        let mut v = random_unit(rng, x.len());
        let s = dot(&v, x);
        axpy(&mut v, -s, x);
        let nv = norm(&v);
        frame(x, &scale(&v, 1.0 / nv))
    }

    #[test]
    fn f_ut_examples() {
        let x = vec![0.6, 0.0, 0.0, 0.8];
        assert!((f_ut(&critical(&x, 1.0)).unwrap() - 1.0).abs() < 1e-15);
        assert!((f_ut(&critical(&x, -1.0)).unwrap() + 1.0).abs() < 1e-15);
        assert_eq!(f_ut(&frame(&e(4, 0), &e(4, 2))).unwrap(), 0.0);
    }

    #[test]
    fn df_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let spec = ManifoldSpec::unit_tangent(2);
        let x = spec.project(&critical(&random_unit(&mut rng, 4), 1.0)).unwrap();
        for _ in 0..20 {
            let y = spec.random_tangent(&x, &mut rng);
            assert!(df_ut(&x, &y).unwrap().abs() < 1e-12);
        }
        let p = spec.random_point(&mut rng);
        let (x1, x2) = columns(&p);
        let ix1 = mult_i(x1).unwrap();
        let f = dot(&ix1, x2);
        let mut w = ix1.clone();
        axpy(&mut w, -f, x2);
        let y = frame(&[0.0; 4], &w);
        assert!((df_ut(&p, &y).unwrap() - (1.0 - f * f)).abs() < 1e-12);
        assert!(matches!(df_ut(&p, &frame(x1, &[0.0; 4])), Err(FiberError::NotTangent(_))));
    }

    #[test]
    fn gradient_matches_differential() {
        let field = UtField::new(3);
        let spec = field.manifold().clone();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..200 {
            let x = spec.random_point(&mut rng);
            let fd = spec.tangent_project(&x, &central_difference_gradient(|y| field.value(y), &x));
            assert!(crate::linalg::relative_error(&field.gradient(&x), &fd, 1e-8) < 1e-5);
            let y = spec.random_tangent(&x, &mut rng);
            assert!((dot(&field.gradient(&x), &y) - df_ut(&x, &y).unwrap()).abs() < 1e-12);
        }
    }

    #[test]
    fn vertical_decomposition_examples() {
        let x = frame(&e(4, 0), &e(4, 1));
        let y = frame(&[0.0; 4], &e(4, 2));
        let d = vertical_project(&x, &y).unwrap();
        assert_eq!(d.vertical, y);
        assert!(d.horizontal.iter().all(|c| *c == 0.0));
        let spec = ManifoldSpec::unit_tangent(3);
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for _ in 0..500 {
            let x = spec.random_point(&mut rng);
            let y = spec.random_tangent(&x, &mut rng);
            let d = vertical_project(&x, &y).unwrap();
            assert!(d.vertical[..6].iter().all(|c| *c == 0.0));
            let back: Vec<f64> = d.vertical.iter().zip(&d.horizontal).map(|(a, b)| a + b).collect();
            assert!(dist(&back, &y) <= 1e-12);
            assert!(dot(&d.vertical, &d.horizontal).abs() <= 1e-12);
        }
    }

    #[test]
    fn proportionality_scan_cases() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let spec = ManifoldSpec::unit_tangent(2);
        let samples: Vec<_> = (0..2000).map(|_| spec.random_point(&mut rng)).collect();
        let report = vertical_proportionality_scan(&UtField::new(2), &samples);
        assert!(report.singular_consistency);
        assert!((report.max_ratio.unwrap() - 2f64.sqrt()).abs() < 1e-9);
        let constant = crate::flow::ConstantField { spec: spec.clone(), value: 3.0 };
        let report = vertical_proportionality_scan(&constant, &samples);
        assert_eq!(report.evaluated, 0);
        assert_eq!(report.max_ratio, None);
        let report = vertical_proportionality_scan(&BaseOnlyField::new(2), &samples);
        assert!(!report.singular_consistency);
    }

    #[test]
    fn fiber_tuple_checks() {
        let x = e(4, 0);
        let a = critical(&x, 1.0);
        let b = critical(&e(4, 2), 1.0);
        assert!(matches!(FiberTuple::new(vec![a.clone(), b]), Err(FiberError::FiberMismatch { index: 1, .. })));
        let t = FiberTuple::new(vec![a.clone(), critical(&x, -1.0)]).unwrap();
        for g in fiber_vertical_gradient(&UtField::new(2), &t) {
            assert!(norm(&g) < 1e-15);
        }
        for g in fiber_product_gradient(&UtField::new(2), &t) {
            assert!(norm(&g) < 1e-15);
        }
    }

    #[test]
    fn one_noncritical_entry_gives_one_nonzero_component() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let x = random_unit(&mut rng, 4);
        let t = FiberTuple::new(vec![critical(&x, 1.0), over(&x, &mut rng)]).unwrap();
        let g = fiber_vertical_gradient(&UtField::new(2), &t);
        assert!(norm(&g[0]) < 1e-15);
        assert!(norm(&g[1]) > 1e-3);
    }

    #[test]
    fn sigma_r2_matches_formula() {
        let x = vec![0.5, 0.5, 0.5, 0.5];
        let t = FiberTuple::new(vec![critical(&x, 1.0), critical(&x, -1.0)]).unwrap();
        let path = sigma_u_planner(&t).unwrap();
        path.validate().unwrap();
        let ix = mult_i(&x).unwrap();
        let jx = mult_j(&x).unwrap();
        for k in 0..=16 {
            let s = k as f64 / 16.0;
            let p = crate::planner::eval_path(&path, s).unwrap();
            let (c, sn) = ((std::f64::consts::PI * s).cos(), (std::f64::consts::PI * s).sin());
            let expect: Vec<f64> = ix.iter().zip(&jx).map(|(a, b)| c * a + sn * b).collect();
            assert_eq!(columns(&p).0, &x[..]);
            assert!(dist(columns(&p).1, &expect) < 1e-15);
        }
        let back = crate::planner::path_fibration(&path, 2).unwrap();
        assert!(dist(&back[1], &t.entries[1]) <= 1e-9);
    }

    #[test]
    fn sigma_rejections() {
        let x = e(4, 0);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let t = FiberTuple::new(vec![critical(&x, 1.0), over(&x, &mut rng)]).unwrap();
        assert_eq!(sigma_u_planner(&t), Err(FiberError::NotCriticalTuple(1)));
        let y = e(6, 0);
        let t = FiberTuple::new(vec![critical(&y, 1.0), critical(&y, 1.0)]).unwrap();
        assert!(matches!(sigma_u_planner(&t), Err(FiberError::WrongDimension(_))));
    }

    #[test]
    fn trivialization_examples() {
        let h = su_trivialization(&e(4, 0), &e(4, 0)).unwrap();
        assert_eq!(h.g, DMatrix::identity(2, 2));
        let h = su_trivialization(&e(4, 0), &e(4, 2)).unwrap();
        assert!(dist(&h.apply(&e(4, 0)), &e(4, 2)) <= 1e-10);
        assert!(h.unitarity_residual() <= 1e-10);
        assert!(h.determinant_residual() <= 1e-10);
        assert!(matches!(su_trivialization(&e(2, 0), &e(2, 1)), Err(FiberError::DegenerateBase(_))));
        let json = serde_json::to_value(&h).unwrap();
        assert_eq!(json["g"].as_array().unwrap().len(), 2);
    }

    #[test]
    fn trivialization_preserves_f() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for n in [2, 3, 4] {
            for _ in 0..50 {
                let b0 = random_unit(&mut rng, 2 * n);
                let b = random_unit(&mut rng, 2 * n);
                let h = su_trivialization(&b0, &b).unwrap();
                let x0 = over(&b0, &mut rng);
                let moved = h.psi_inv(&x0);
                assert!(dist(columns(&moved).0, &b) <= 1e-10);
                assert!((ut_value(&moved) - ut_value(&x0)).abs() <= 1e-10);
                let (base, fibre) = h.psi(&moved);
                assert_eq!(base, columns(&moved).0);
                assert!(dist(&fibre, &x0) <= 1e-10);
            }
        }
        // antipodal base points need no special handling
        let b0 = e(4, 0);
        let h = su_trivialization(&b0, &scale(&b0, -1.0)).unwrap();
        assert!(dist(&h.apply(&b0), &scale(&b0, -1.0)) <= 1e-12);
    }
}
