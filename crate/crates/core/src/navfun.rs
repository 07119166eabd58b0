//! Chained-distance navigation functions and parallel-normal pair search.

use std::ops::Range;

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::embed::{ConstraintField, EmbedError, ManifoldSpec, POINT_TOL};
use crate::flow::{ComponentLabel, ScalarField};
use crate::linalg::{dist, dot, norm, scale, sub};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NavError {
    #[error("WrongSpec: {0}")]
    WrongSpec(String),
    #[error("InvalidTuple: {0}")]
    InvalidTuple(String),
    #[error("InvalidPattern: {0}")]
    InvalidPattern(String),
    #[error(transparent)]
    Embed(#[from] EmbedError),
}

/// `(x_1, .., x_r)` in `M^r`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NavTuple {
    pub spec: ManifoldSpec,
    pub r: usize,
    pub points: Vec<Vec<f64>>,
}

impl NavTuple {
    pub fn new(spec: ManifoldSpec, points: Vec<Vec<f64>>) -> Result<Self, NavError> {
        spec.validate()?;
        if points.len() < 2 {
            return Err(NavError::InvalidTuple(format!("need r >= 2 points, got {}", points.len())));
        }
        let dim = spec.ambient_dim();
        for p in &points {
            if p.len() != dim {
                return Err(EmbedError::DimensionMismatch { expected: dim, got: p.len() }.into());
            }
            let res = spec.residual(p);
            if res > POINT_TOL {
                return Err(EmbedError::NotOnManifold(res).into());
            }
        }
        Ok(NavTuple { r: points.len(), spec, points })
    }

    /// Split slot-major flat coordinates on `M^r` into a tuple.
    pub fn from_flat(spec: ManifoldSpec, r: usize, flat: &[f64]) -> Result<Self, NavError> {
        let dim = spec.ambient_dim();
        if flat.len() != dim * r {
            return Err(EmbedError::DimensionMismatch { expected: dim * r, got: flat.len() }.into());
        }
        Self::new(spec, flat.chunks_exact(dim).map(<[f64]>::to_vec).collect())
    }

    pub fn flat(&self) -> Vec<f64> {
        self.points.concat()
    }
}

/// Signs `lambda_{j,l}` of a critical tuple: slot `l` of factor `j` equals
/// `lambda_{j,l} x_{j,1}`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SignPattern {
    pub signs: Vec<Vec<i8>>,
}

impl SignPattern {
    pub fn new(signs: Vec<Vec<i8>>) -> Result<Self, NavError> {
        if signs.is_empty() {
            return Err(NavError::InvalidPattern("no factors".into()));
        }
        let r = signs[0].len();
        if r < 2 {
            return Err(NavError::InvalidPattern("need at least two slots".into()));
        }
        for factor in &signs {
            if factor.len() != r {
                return Err(NavError::InvalidPattern("factors disagree on the number of slots".into()));
            }
            if factor[0] != 1 {
                return Err(NavError::InvalidPattern("first slot of every factor must be +1".into()));
            }
            if factor.iter().any(|s| *s != 1 && *s != -1) {
                return Err(NavError::InvalidPattern("signs must be +1 or -1".into()));
            }
        }
        Ok(SignPattern { signs })
    }

    /// All-plus pattern.
    pub fn diagonal(factors: usize, r: usize) -> Self {
        SignPattern { signs: vec![vec![1; r]; factors] }
    }

    pub fn factors(&self) -> usize {
        self.signs.len()
    }

    pub fn r(&self) -> usize {
        self.signs[0].len()
    }

    /// Sign changes between consecutive slots, per factor.
    pub fn flips(&self) -> Vec<usize> {
        self.signs
            .iter()
            .map(|s| s.windows(2).filter(|w| w[0] != w[1]).count())
            .collect()
    }
}

/// `4 * (total consecutive flips)`, the value of the chained distance
/// function on tuples with this pattern.
pub fn pattern_value(p: &SignPattern) -> f64 {
    4.0 * p.flips().iter().sum::<usize>() as f64
}

/// `F_r = sum_i |x_i - x_{i+1}|^2`.
pub fn nav_value(t: &NavTuple) -> f64 {
    chain_value(&t.points)
}

fn chain_value<P: AsRef<[f64]>>(points: &[P]) -> f64 {
    points
        .windows(2)
        .map(|w| {
            let d = dist(w[0].as_ref(), w[1].as_ref());
            d * d
        })
        .sum()
}

fn chain_euclidean_gradient<P: AsRef<[f64]>>(points: &[P]) -> Vec<Vec<f64>> {
    let r = points.len();
    (0..r)
        .map(|i| {
            let x = points[i].as_ref();
            let mut g = vec![0.0; x.len()];
            if i > 0 {
                for (gk, (a, b)) in g.iter_mut().zip(x.iter().zip(points[i - 1].as_ref())) {
                    *gk += 2.0 * (a - b);
                }
            }
            if i + 1 < r {
                for (gk, (a, b)) in g.iter_mut().zip(x.iter().zip(points[i + 1].as_ref())) {
                    *gk += 2.0 * (a - b);
                }
            }
            g
        })
        .collect()
}

/// Riemannian gradient of `F_r`, one tangent vector per slot.
pub fn nav_gradient(t: &NavTuple) -> Vec<Vec<f64>> {
    chain_euclidean_gradient(&t.points)
        .into_iter()
        .zip(&t.points)
        .map(|(g, x)| t.spec.tangent_project(x, &g))
        .collect()
}

/// Outcome of [`classify_sphere_critical`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum Classification {
    Critical { pattern: SignPattern },
    /// `witness` is a unit tangent direction with `DF(witness) = slope`.
    Rejected { witness: Vec<Vec<f64>>, slope: f64 },
}

fn factor_blocks(spec: &ManifoldSpec) -> Result<Vec<Range<usize>>, NavError> {
    match spec {
        ManifoldSpec::Sphere { .. } | ManifoldSpec::ProductSpheres { .. } => Ok(spec.sphere_blocks().expect("sphere kinds have blocks")),
        other => Err(NavError::WrongSpec(format!("expected a sphere or a product of spheres, got {other:?}"))),
    }
}

fn sign_pattern_of<P: AsRef<[f64]>>(blocks: &[Range<usize>], points: &[P], tol: f64) -> Option<SignPattern> {
    let mut signs = Vec::with_capacity(blocks.len());
    for b in blocks {
        let base = &points[0].as_ref()[b.clone()];
        let mut factor = Vec::with_capacity(points.len());
        for p in points {
            let y = &p.as_ref()[b.clone()];
            let plus = dist(y, base);
            let minus = y.iter().zip(base).map(|(a, c)| (a + c) * (a + c)).sum::<f64>().sqrt();
            if plus <= tol {
                factor.push(1);
            } else if minus <= tol {
                factor.push(-1);
            } else {
                return None;
            }
        }
        signs.push(factor);
    }
    Some(SignPattern { signs })
}

/// Structural test for critical tuples on spheres and sphere products:
/// every slot of every factor must be within `tol` of `+-` the first slot.
pub fn classify_sphere_critical(t: &NavTuple, tol: f64) -> Result<Classification, NavError> {
    let blocks = factor_blocks(&t.spec)?;
    if let Some(pattern) = sign_pattern_of(&blocks, &t.points, tol) {
        return Ok(Classification::Critical { pattern });
    }
    let grad = nav_gradient(t);
    let gn = grad.iter().map(|g| dot(g, g)).sum::<f64>().sqrt();
    let witness = if gn > 0.0 {
        grad.iter().map(|g| scale(g, 1.0 / gn)).collect()
    } else {
        grad
    };
    Ok(Classification::Rejected { witness, slope: gn })
}

/// `F_r` as a field on `M^r` in slot-major flat coordinates.
#[derive(Debug, Clone)]
pub struct NavField {
    base: ManifoldSpec,
    power: ManifoldSpec,
    blocks: Vec<Range<usize>>,
    r: usize,
}

impl NavField {
    pub fn new(base: ManifoldSpec, r: usize) -> Result<Self, NavError> {
        base.validate()?;
        if r < 2 {
            return Err(NavError::InvalidTuple(format!("need r >= 2, got {r}")));
        }
        let blocks = factor_blocks(&base)?;
        let power = base.power(r).expect("sphere kinds have powers");
        Ok(NavField { base, power, blocks, r })
    }

    pub fn base(&self) -> &ManifoldSpec {
        &self.base
    }

    pub fn r(&self) -> usize {
        self.r
    }

    fn slots<'a>(&self, x: &'a [f64]) -> Vec<&'a [f64]> {
        x.chunks_exact(self.base.ambient_dim()).collect()
    }
}

impl ScalarField for NavField {
    fn manifold(&self) -> &ManifoldSpec {
        &self.power
    }

    fn value(&self, x: &[f64]) -> f64 {
        chain_value(&self.slots(x))
    }

    fn euclidean_gradient(&self, x: &[f64]) -> Vec<f64> {
        chain_euclidean_gradient(&self.slots(x)).concat()
    }

    fn classify(&self, x: &[f64], tol: f64) -> ComponentLabel {
        match sign_pattern_of(&self.blocks, &self.slots(x), tol) {
            Some(p) => ComponentLabel::SignPattern { signs: p.signs },
            None => ComponentLabel::Unclassified,
        }
    }
}

/// Multistart configuration for [`find_parallel_pairs`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairSearch {
    pub seeds: usize,
    pub seed: u64,
    pub dedup_tol: f64,
    pub max_iters: usize,
    pub residual_tol: f64,
}

impl Default for PairSearch {
    fn default() -> Self {
        PairSearch { seeds: 10_000, seed: 0, dedup_tol: 1e-3, max_iters: 200, residual_tol: 1e-12 }
    }
}

/// An unordered pair `{x, y}` with `T_x M = T_y M = (x - y)^perp`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriticalPair {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    /// `|x - y|^2`
    pub value: f64,
    /// Largest tangential component of the unit chord at `x` or `y`.
    pub alignment_residual: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ContinuumFlag {
    Continuum,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Alpha {
    Finite(usize),
    Continuum(ContinuumFlag),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CensusStatus {
    Found,
    NoPairsFound,
    ContinuumDetected,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairStats {
    pub seeds: usize,
    pub converged: usize,
    pub distinct: usize,
    /// Distinct pairs whose nearest other pair lies within `10 * dedup_tol`.
    pub clustered: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairCensus {
    pub alpha: Alpha,
    pub status: CensusStatus,
    pub pairs: Vec<CriticalPair>,
    pub stats: PairStats,
}

/// Constraint `g = level` of a hypersurface spec; round spheres count as
/// the level set `|x|^2 = 1`.
pub fn hypersurface_constraint(spec: &ManifoldSpec) -> Result<(ConstraintField, f64), NavError> {
    if let ManifoldSpec::Sphere { n } = spec {
        return Ok((ConstraintField::Ellipsoid { semiaxes: vec![1.0; n + 1] }, 1.0));
    }
    spec.constraint()
        .ok_or_else(|| NavError::WrongSpec(format!("expected a hypersurface, got {spec:?}")))
}

fn minors(a: &[f64], d: &[f64], out: &mut Vec<f64>) {
    for k in 0..a.len() {
        for l in k + 1..a.len() {
            out.push(a[k] * d[l] - a[l] * d[k]);
        }
    }
}

/// Residual of the pair system at `z = (x, y)`: `g(x) - c`, `g(y) - c` and
/// the 2x2 minors of `(grad g(x), d)` and `(grad g(y), d)` with
/// `d = (x - y) / |x - y|`.
pub fn pair_residual(field: &ConstraintField, level: f64, z: &[f64]) -> Vec<f64> {
    let n = z.len() / 2;
    let (x, y) = z.split_at(n);
    let diff = sub(x, y);
    let d = scale(&diff, 1.0 / norm(&diff));
    let mut out = vec![field.value(x) - level, field.value(y) - level];
    minors(&field.gradient(x), &d, &mut out);
    minors(&field.gradient(y), &d, &mut out);
    out
}

/// Row-major Jacobian of [`pair_residual`].
pub fn pair_jacobian(field: &ConstraintField, z: &[f64]) -> Vec<Vec<f64>> {
    let n = z.len() / 2;
    let (x, y) = z.split_at(n);
    let diff = sub(x, y);
    let s = norm(&diff);
    let d = scale(&diff, 1.0 / s);
    // dd/dx = (I - d d^T) / s, dd/dy = -dd/dx
    let dd: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..n).map(|m| ((if i == m { 1.0 } else { 0.0 }) - d[i] * d[m]) / s).collect())
        .collect();
    let mut rows = Vec::new();
    let gx = field.gradient(x);
    let gy = field.gradient(y);
    let mut row = vec![0.0; 2 * n];
    row[..n].copy_from_slice(&gx);
    rows.push(row);
    let mut row = vec![0.0; 2 * n];
    row[n..].copy_from_slice(&gy);
    rows.push(row);
    for (a, hess, own_offset) in [(&gx, field.hessian(x), 0), (&gy, field.hessian(y), n)] {
        for k in 0..n {
            for l in k + 1..n {
                let mut row = vec![0.0; 2 * n];
                for m in 0..n {
                    // through d
                    let vd = a[k] * dd[l][m] - a[l] * dd[k][m];
                    row[m] += vd;
                    row[n + m] -= vd;
                    // through grad g at the own point
                    row[own_offset + m] += hess[k][m] * d[l] - hess[l][m] * d[k];
                }
                rows.push(row);
            }
        }
    }
    rows
}

fn alignment_residual(field: &ConstraintField, x: &[f64], y: &[f64]) -> f64 {
    let diff = sub(x, y);
    let d = scale(&diff, 1.0 / norm(&diff));
    [x, y]
        .iter()
        .map(|p| {
            let g = field.gradient(p);
            let nh = scale(&g, 1.0 / norm(&g));
            let c = dot(&d, &nh);
            norm(&d.iter().zip(&nh).map(|(a, b)| a - c * b).collect::<Vec<_>>())
        })
        .fold(0.0, f64::max)
}

/// Levenberg-Marquardt on the pair system.
fn solve_pair(field: &ConstraintField, level: f64, z0: Vec<f64>, cfg: &PairSearch) -> Option<Vec<f64>> {
    let dim = z0.len();
    let eval = |z: &[f64]| -> Option<Vec<f64>> {
        let n = dim / 2;
        if dist(&z[..n], &z[n..]) < cfg.dedup_tol {
            return None;
        }
        Some(pair_residual(field, level, z))
    };
    let mut z = z0;
    let mut res = eval(&z)?;
    let mut cost = dot(&res, &res);
    let mut mu = 1e-3;
    for _ in 0..cfg.max_iters {
        if res.iter().all(|v| v.abs() <= cfg.residual_tol) {
            return Some(z);
        }
        let jac = pair_jacobian(field, &z);
        let j = DMatrix::from_fn(jac.len(), dim, |i, k| jac[i][k]);
        let rv = DVector::from_vec(res.clone());
        let jtj = j.transpose() * &j;
        let jtr = j.transpose() * rv;
        let mut accepted = false;
        for _ in 0..30 {
            let mut a = jtj.clone();
            for i in 0..dim {
                a[(i, i)] += mu * (1.0 + jtj[(i, i)]);
            }
            let Some(step) = a.cholesky().map(|c| c.solve(&jtr)) else {
                mu *= 10.0;
                continue;
            };
            let cand: Vec<f64> = z.iter().zip(step.iter()).map(|(a, b)| a - b).collect();
            if let Some(cres) = eval(&cand) {
                let ccost = dot(&cres, &cres);
                if ccost < cost {
                    z = cand;
                    res = cres;
                    cost = ccost;
                    mu = (mu * 0.3).max(1e-15);
                    accepted = true;
                    break;
                }
            }
            mu *= 10.0;
        }
        if !accepted {
            break;
        }
    }
    res.iter().all(|v| v.abs() <= cfg.residual_tol).then_some(z)
}

fn lex_less(a: &[f64], b: &[f64]) -> bool {
    a.iter()
        .zip(b)
        .map(|(x, y)| x.total_cmp(y))
        .find(|o| o.is_ne())
        .is_some_and(|o| o.is_lt())
}

fn pair_distance(p: &CriticalPair, q: &CriticalPair) -> f64 {
    let direct = dist(&p.x, &q.x).max(dist(&p.y, &q.y));
    let swapped = dist(&p.x, &q.y).max(dist(&p.y, &q.x));
    direct.min(swapped)
}

/// Multistart search for unordered pairs `{x, y}` on a hypersurface whose
/// normals are both parallel to the chord `x - y`.
///
/// More than 50 distinct pairs with a neighbour inside `10 * dedup_tol`
/// are reported as a continuum instead of a count.
pub fn find_parallel_pairs(spec: &ManifoldSpec, search: &PairSearch) -> Result<PairCensus, NavError> {
    spec.validate()?;
    let (field, level) = hypersurface_constraint(spec)?;
    let n = spec.ambient_dim();
    let solved: Vec<Option<CriticalPair>> = (0..search.seeds)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(search.seed);
            rng.set_stream(i as u64);
            let x = spec.random_point(&mut rng);
            let y = spec.random_point(&mut rng);
            let z = solve_pair(&field, level, [x, y].concat(), search)?;
            let (mut a, mut b) = (z[..n].to_vec(), z[n..].to_vec());
            if lex_less(&b, &a) {
                std::mem::swap(&mut a, &mut b);
            }
            let d = dist(&a, &b);
            Some(CriticalPair { value: d * d, alignment_residual: alignment_residual(&field, &a, &b), x: a, y: b })
        })
        .collect();
    let mut converged: Vec<CriticalPair> = solved.into_iter().flatten().collect();
    let converged_count = converged.len();
    converged.sort_by(|p, q| {
        p.value
            .total_cmp(&q.value)
            .then_with(|| lex_cmp(&p.x, &q.x))
            .then_with(|| lex_cmp(&p.y, &q.y))
    });
    let mut distinct: Vec<CriticalPair> = Vec::new();
    for p in converged {
        if !distinct.iter().any(|q| pair_distance(&p, q) < search.dedup_tol) {
            distinct.push(p);
        }
    }
    let near = 10.0 * search.dedup_tol;
    let clustered = (0..distinct.len())
        .into_par_iter()
        .filter(|&i| {
            distinct
                .iter()
                .enumerate()
                .any(|(j, q)| j != i && pair_distance(&distinct[i], q) < near)
        })
        .count();
    let stats = PairStats { seeds: search.seeds, converged: converged_count, distinct: distinct.len(), clustered };
    let (alpha, status) = if clustered > 50 {
        (Alpha::Continuum(ContinuumFlag::Continuum), CensusStatus::ContinuumDetected)
    } else if distinct.is_empty() {
        (Alpha::Finite(0), CensusStatus::NoPairsFound)
    } else {
        (Alpha::Finite(distinct.len()), CensusStatus::Found)
    };
    Ok(PairCensus { alpha, status, pairs: distinct, stats })
}

fn lex_cmp(a: &[f64], b: &[f64]) -> std::cmp::Ordering {
    a.iter()
        .zip(b)
        .map(|(x, y)| x.total_cmp(y))
        .find(|o| o.is_ne())
        .unwrap_or(std::cmp::Ordering::Equal)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{central_difference_gradient, relative_error};

    fn e(n: usize, k: usize) -> Vec<f64> {
        let mut v = vec![0.0; n];
        v[k] = 1.0;
        v
    }

    fn tuple(spec: ManifoldSpec, pts: Vec<Vec<f64>>) -> NavTuple {
        NavTuple::new(spec, pts).unwrap()
    }

    #[test]
    fn values_on_circle() {
        let s1 = ManifoldSpec::sphere(1);
        let x = e(2, 0);
        let mx = scale(&x, -1.0);
        assert_eq!(nav_value(&tuple(s1.clone(), vec![x.clone(), x.clone(), x.clone()])), 0.0);
        assert_eq!(nav_value(&tuple(s1.clone(), vec![x.clone(), mx.clone()])), 4.0);
        assert_eq!(nav_value(&tuple(s1, vec![x.clone(), mx, x])), 8.0);
    }

    #[test]
    fn antipodal_pair_is_critical() {
        let s1 = ManifoldSpec::sphere(1);
        let t = tuple(s1, vec![e(2, 0), scale(&e(2, 0), -1.0)]);
        for g in nav_gradient(&t) {
            assert!(norm(&g) < 1e-15);
        }
    }

    #[test]
    fn gradient_matches_finite_differences() {
        use rand::SeedableRng;
        let base = ManifoldSpec::sphere(2);
        let field = NavField::new(base, 3).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..200 {
            let x = field.manifold().random_point(&mut rng);
            let fd = central_difference_gradient(|y| field.value(y), &x);
            let fd = field.manifold().tangent_project(&x, &fd);
            assert!(relative_error(&field.gradient(&x), &fd, 1e-8) < 1e-5);
        }
    }

    #[test]
    fn classifier_examples() {
        let s1 = ManifoldSpec::sphere(1);
        let x = e(2, 0);
        let mx = scale(&x, -1.0);
        let t = tuple(s1, vec![x.clone(), mx, x]);
        match classify_sphere_critical(&t, 1e-9).unwrap() {
            Classification::Critical { pattern } => {
                assert_eq!(pattern.signs, vec![vec![1, -1, 1]]);
                assert_eq!(pattern_value(&pattern), 8.0);
            }
            other => panic!("{other:?}"),
        }
        let s2 = ManifoldSpec::sphere(2);
        let t = tuple(s2, vec![e(3, 0), e(3, 1)]);
        match classify_sphere_critical(&t, 1e-9).unwrap() {
            Classification::Rejected { witness, slope } => {
                assert!(slope > 0.1);
                // DF along the witness equals the slope
                let g = nav_gradient(&t);
                let df: f64 = g.iter().zip(&witness).map(|(a, b)| dot(a, b)).sum();
                assert!((df - slope).abs() < 1e-12);
            }
            other => panic!("{other:?}"),
        }
        let ell = tuple(ManifoldSpec::ellipsoid(&[1.0, 2.0]), vec![e(2, 0), e(2, 0)]);
        assert!(matches!(classify_sphere_critical(&ell, 1e-9), Err(NavError::WrongSpec(_))));
    }

    #[test]
    fn pattern_values() {
        assert_eq!(pattern_value(&SignPattern::diagonal(3, 4)), 0.0);
        assert_eq!(pattern_value(&SignPattern::new(vec![vec![1, -1]]).unwrap()), 4.0);
        let p = SignPattern::new(vec![vec![1, -1, 1], vec![1, 1, -1]]).unwrap();
        assert_eq!(p.flips(), vec![2, 1]);
        assert_eq!(pattern_value(&p), 12.0);
        assert!(SignPattern::new(vec![vec![-1, 1]]).is_err());
    }

    #[test]
    fn pair_jacobian_matches_finite_differences() {
        use rand::SeedableRng;
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let cases = [
            (ManifoldSpec::ellipsoid(&[1.0, 2.0, 3.0]), ConstraintField::Ellipsoid { semiaxes: vec![1.0, 2.0, 3.0] }, 1.0),
            (
                ManifoldSpec::Hypersurface { field: ConstraintField::Torus { major: 2.0 }, level: 0.25 },
                ConstraintField::Torus { major: 2.0 },
                0.25,
            ),
        ];
        for (spec, field, level) in cases {
            for _ in 0..100 {
                let z = [spec.random_point(&mut rng), spec.random_point(&mut rng)].concat();
                let jac = pair_jacobian(&field, &z);
                for (row, analytic) in jac.iter().enumerate() {
                    let fd = central_difference_gradient(|w| pair_residual(&field, level, w)[row], &z);
                    assert!(relative_error(analytic, &fd, 1e-6) < 1e-5, "row {row}");
                }
            }
        }
    }

    #[test]
    fn ellipsoid_has_three_axis_pairs() {
        let spec = ManifoldSpec::ellipsoid(&[1.0, 2.0, 3.0]);
        let census = find_parallel_pairs(&spec, &PairSearch { seeds: 400, ..PairSearch::default() }).unwrap();
        assert_eq!(census.alpha, Alpha::Finite(3));
        for (p, a) in census.pairs.iter().zip([1.0, 2.0, 3.0]) {
            assert!(p.alignment_residual <= 1e-10);
            assert!((p.value - 4.0 * a * a).abs() < 1e-9);
            assert_eq!(p.value, dist(&p.x, &p.y).powi(2));
        }
        let json = serde_json::to_value(&census).unwrap();
        assert_eq!(json["alpha"], 3);
    }

    #[test]
    fn round_sphere_is_a_continuum() {
        let census = find_parallel_pairs(&ManifoldSpec::sphere(2), &PairSearch { seeds: 3000, ..PairSearch::default() }).unwrap();
        assert_eq!(census.status, CensusStatus::ContinuumDetected);
        assert_eq!(serde_json::to_value(census.alpha).unwrap(), "continuum");
        for p in census.pairs.iter().take(50) {
            assert!(dist(&p.x, &scale(&p.y, -1.0)) < 1e-9);
        }
    }

    #[test]
    fn non_hypersurface_rejected() {
        let err = find_parallel_pairs(&ManifoldSpec::product(&[1, 1]), &PairSearch::default()).unwrap_err();
        assert!(matches!(err, NavError::WrongSpec(_)));
    }
}
