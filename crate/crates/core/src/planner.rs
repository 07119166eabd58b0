//! Piecewise paths, the path fibration and explicit sequential planners.

use std::ops::Range;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::embed::{geodesic_to_antipode, mult_i, EmbedError, GreatCircle, ManifoldSpec, POINT_TOL};
use crate::linalg::{dist, scale};
use crate::navfun::{classify_sphere_critical, Classification, NavError, NavTuple, SignPattern};

/// Knots per formula piece of a sampled conversion path, endpoints included.
pub const SAMPLED_KNOTS: usize = 64;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PlanError {
    #[error("OutOfDomain: path parameter {0} is outside [0, 1]")]
    OutOfDomain(f64),
    #[error("PatternMismatch: {0}")]
    PatternMismatch(String),
    #[error("EvenDimension: factor S^{0} has no nowhere-vanishing vector field")]
    EvenDimension(usize),
    #[error("NotEndingAtDiagonal: components of h(a, 1) differ by {0:e}")]
    NotEndingAtDiagonal(f64),
    #[error("TargetDomainMiss: the target planner is not defined at the time-1 image")]
    TargetDomainMiss,
    #[error("InvalidPath: {0}")]
    InvalidPath(String),
    #[error(transparent)]
    Nav(#[from] NavError),
    #[error(transparent)]
    Embed(#[from] EmbedError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Segment {
    Constant { point: Vec<f64>, t0: f64, t1: f64 },
    GreatCircle(GreatCircle),
    /// Piecewise linear through `points` at increasing `times`.
    Sampled { times: Vec<f64>, points: Vec<Vec<f64>> },
}

impl Segment {
    pub fn interval(&self) -> (f64, f64) {
        match self {
            Segment::Constant { t0, t1, .. } => (*t0, *t1),
            Segment::GreatCircle(g) => (g.t0, g.t1),
            Segment::Sampled { times, .. } => (times[0], times[times.len() - 1]),
        }
    }

    /// Value at `t` and whether it was produced by interpolation.
    fn eval(&self, t: f64) -> (Vec<f64>, bool) {
        match self {
            Segment::Constant { point, .. } => (point.clone(), false),
            Segment::GreatCircle(g) => (g.eval(t), false),
            Segment::Sampled { times, points } => {
                let k = times.partition_point(|s| *s <= t).clamp(1, times.len() - 1) - 1;
                if t == times[k] {
                    return (points[k].clone(), false);
                }
                if t == times[k + 1] {
                    return (points[k + 1].clone(), false);
                }
                let w = (t - times[k]) / (times[k + 1] - times[k]);
                let p = points[k].iter().zip(&points[k + 1]).map(|(a, b)| a + w * (b - a)).collect();
                (p, true)
            }
        }
    }

    fn dim(&self) -> usize {
        match self {
            Segment::Constant { point, .. } => point.len(),
            Segment::GreatCircle(g) => g.x.len(),
            Segment::Sampled { points, .. } => points[0].len(),
        }
    }
}

/// The segments driving one coordinate range of the path.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathBlock {
    pub start: usize,
    pub end: usize,
    pub segments: Vec<Segment>,
}

impl PathBlock {
    pub fn range(&self) -> Range<usize> {
        self.start..self.end
    }

    fn locate(&self, t: f64) -> &Segment {
        let last = self.segments.len() - 1;
        self.segments[..last]
            .iter()
            .find(|s| {
                let (t0, t1) = s.interval();
                t0 <= t && t < t1
            })
            .unwrap_or(&self.segments[last])
    }
}

/// A path `[0, 1] -> X`. Coordinates are split into blocks (for instance
/// sphere factors or frame columns), each with its own segment list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathSpec {
    /// Manifold the path lives on; `None` for Euclidean test spaces.
    pub manifold: Option<ManifoldSpec>,
    pub dim: usize,
    pub blocks: Vec<PathBlock>,
}

impl PathSpec {
    pub fn single_block(manifold: Option<ManifoldSpec>, segments: Vec<Segment>) -> Self {
        let dim = segments[0].dim();
        PathSpec { manifold, dim, blocks: vec![PathBlock { start: 0, end: dim, segments }] }
    }

    pub fn constant(manifold: Option<ManifoldSpec>, point: Vec<f64>) -> Self {
        Self::single_block(manifold, vec![Segment::Constant { point, t0: 0.0, t1: 1.0 }])
    }

    /// Checks block layout, that every block's segments partition `[0, 1]`,
    /// and continuity at every internal knot.
    pub fn validate(&self) -> Result<(), PlanError> {
        let mut cursor = 0;
        for b in &self.blocks {
            if b.start != cursor || b.end <= b.start {
                return Err(PlanError::InvalidPath("blocks must tile the coordinates in order".into()));
            }
            cursor = b.end;
            if b.segments.is_empty() {
                return Err(PlanError::InvalidPath("block without segments".into()));
            }
            let mut t = 0.0;
            for s in &b.segments {
                if s.dim() != b.end - b.start {
                    return Err(PlanError::InvalidPath("segment dimension does not match its block".into()));
                }
                if let Segment::Sampled { times, points } = s {
                    if times.len() < 2 || times.len() != points.len() || times.windows(2).any(|w| w[0] >= w[1]) {
                        return Err(PlanError::InvalidPath("sampled segment needs increasing times".into()));
                    }
                }
                let (t0, t1) = s.interval();
                if (t0 - t).abs() > 1e-12 || t1 <= t0 {
                    return Err(PlanError::InvalidPath(format!("segment [{t0}, {t1}] does not continue from {t}")));
                }
                t = t1;
            }
            if (t - 1.0).abs() > 1e-12 {
                return Err(PlanError::InvalidPath("segments must end at 1".into()));
            }
            for w in b.segments.windows(2) {
                let knot = w[0].interval().1;
                let gap = dist(&w[0].eval(knot).0, &w[1].eval(knot).0);
                if gap > POINT_TOL {
                    return Err(PlanError::InvalidPath(format!("jump of {gap:e} at t = {knot}")));
                }
            }
        }
        if cursor != self.dim {
            return Err(PlanError::InvalidPath("blocks do not cover every coordinate".into()));
        }
        Ok(())
    }

    /// Dense samples `t, x0, ..` at `n + 1` equally spaced times.
    pub fn to_csv(&self, n: usize) -> Result<String, PlanError> {
        let mut out = String::from("t");
        for k in 0..self.dim {
            out.push_str(&format!(",x{k}"));
        }
        out.push('\n');
        for i in 0..=n {
            let t = i as f64 / n as f64;
            out.push_str(&t.to_string());
            for c in eval_path(self, t)? {
                out.push_str(&format!(",{c}"));
            }
            out.push('\n');
        }
        Ok(out)
    }
}

/// Evaluate `p(t)`. Segments are half-open `[t0, t1)` except the last.
/// Interpolated sampled values are projected back onto the manifold.
pub fn eval_path(p: &PathSpec, t: f64) -> Result<Vec<f64>, PlanError> {
    if !(0.0..=1.0).contains(&t) {
        return Err(PlanError::OutOfDomain(t));
    }
    let mut out = vec![0.0; p.dim];
    let mut interpolated = false;
    for b in &p.blocks {
        let (v, interp) = b.locate(t).eval(t);
        out[b.range()].copy_from_slice(&v);
        interpolated |= interp;
    }
    match &p.manifold {
        Some(spec) if interpolated => Ok(spec.project(&out)?),
        _ => Ok(out),
    }
}

/// `p_r(gamma) = (gamma(0), gamma(1/(r-1)), .., gamma(1))`.
pub fn path_fibration(p: &PathSpec, r: usize) -> Result<Vec<Vec<f64>>, PlanError> {
    if r < 2 {
        return Err(PlanError::InvalidPath(format!("need r >= 2, got {r}")));
    }
    (0..r).map(|i| eval_path(p, knot_time(i, r))).collect()
}

fn knot_time(i: usize, r: usize) -> f64 {
    i as f64 / (r - 1) as f64
}

/// Sequential motion planner on the critical set of the chained distance
/// function on a product of odd spheres.
///
/// Per factor, the path between consecutive slots is constant when the
/// signs agree and otherwise the half great circle leaving in the direction
/// `i x`, traversed at speed `(r - 1) pi`.
pub fn plan_product_odd_spheres(t: &NavTuple, pattern: &SignPattern) -> Result<PathSpec, PlanError> {
    let dims = t.spec.sphere_dims().ok_or_else(|| {
        PlanError::Nav(NavError::WrongSpec("expected a sphere or a product of spheres".into()))
    })?;
    if let Some(&even) = dims.iter().find(|d| *d % 2 == 0) {
        return Err(PlanError::EvenDimension(even));
    }
    match classify_sphere_critical(t, POINT_TOL)? {
        Classification::Critical { pattern: found } if &found == pattern => {}
        Classification::Critical { pattern: found } => {
            return Err(PlanError::PatternMismatch(format!("tuple has signs {:?}, expected {:?}", found.signs, pattern.signs)))
        }
        Classification::Rejected { slope, .. } => {
            return Err(PlanError::PatternMismatch(format!("tuple is not critical (slope {slope:e})")))
        }
    }
    let r = t.r;
    let blocks = t.spec.sphere_blocks().expect("sphere kinds have blocks");
    let mut out = Vec::with_capacity(blocks.len());
    for (block, signs) in blocks.into_iter().zip(&pattern.signs) {
        let x1 = &t.points[0][block.clone()];
        let ix1 = mult_i(x1)?;
        let mut segments = Vec::with_capacity(r - 1);
        for l in 0..r - 1 {
            let (t0, t1) = (knot_time(l, r), knot_time(l + 1, r));
            let s = f64::from(signs[l]);
            let start = scale(x1, s);
            if signs[l] == signs[l + 1] {
                segments.push(Segment::Constant { point: start, t0, t1 });
            } else {
                segments.push(Segment::GreatCircle(geodesic_to_antipode(&start, &scale(&ix1, s), t0, t1)?));
            }
        }
        out.push(PathBlock { start: block.start, end: block.end, segments });
    }
    Ok(PathSpec { manifold: Some(t.spec.clone()), dim: t.spec.ambient_dim(), blocks: out })
}

/// A deformation `h: A x [0, 1] -> X^r` with `h(a, 0) = a`.
pub trait Deformation: Sync {
    /// `h(a, t)` as `r` component points.
    fn eval(&self, a: &[Vec<f64>], t: f64) -> Vec<Vec<f64>>;

    /// Whether `h(a, 1)` is claimed to lie on the diagonal.
    fn ends_at_diagonal(&self) -> bool;

    fn component(&self, a: &[Vec<f64>], i: usize, t: f64) -> Vec<f64> {
        self.eval(a, t).swap_remove(i)
    }

    fn manifold(&self) -> Option<&ManifoldSpec> {
        None
    }
}

/// Straight-line contraction of every component to the barycentre.
#[derive(Debug, Clone, Copy, Default)]
pub struct LinearContraction;

impl Deformation for LinearContraction {
    fn eval(&self, a: &[Vec<f64>], t: f64) -> Vec<Vec<f64>> {
        let n = a.len() as f64;
        let mean: Vec<f64> = (0..a[0].len()).map(|k| a.iter().map(|p| p[k]).sum::<f64>() / n).collect();
        if t == 1.0 {
            return vec![mean; a.len()];
        }
        a.iter()
            .map(|p| p.iter().zip(&mean).map(|(x, m)| (1.0 - t) * x + t * m).collect())
            .collect()
    }

    fn ends_at_diagonal(&self) -> bool {
        true
    }
}

/// `h(a, t) = a`.
#[derive(Debug, Clone, Copy, Default)]
pub struct IdentityDeformation;

impl Deformation for IdentityDeformation {
    fn eval(&self, a: &[Vec<f64>], _t: f64) -> Vec<Vec<f64>> {
        a.to_vec()
    }

    fn ends_at_diagonal(&self) -> bool {
        false
    }
}

/// Rotation of every component of a tuple on `S^1` by the angle `angle * t`.
#[derive(Debug, Clone)]
pub struct CircleRotation {
    pub angle: f64,
    spec: ManifoldSpec,
}

impl CircleRotation {
    pub fn new(angle: f64) -> Self {
        CircleRotation { angle, spec: ManifoldSpec::sphere(1) }
    }
}

impl Deformation for CircleRotation {
    fn eval(&self, a: &[Vec<f64>], t: f64) -> Vec<Vec<f64>> {
        if t == 0.0 {
            return a.to_vec();
        }
        let (s, c) = (self.angle * t).sin_cos();
        a.iter().map(|p| vec![c * p[0] - s * p[1], s * p[0] + c * p[1]]).collect()
    }

    fn ends_at_diagonal(&self) -> bool {
        false
    }

    fn manifold(&self) -> Option<&ManifoldSpec> {
        Some(&self.spec)
    }
}

/// Sampled piece on `[t0, t1]` with knot values `f(u_k)` for
/// `u_k = k / (SAMPLED_KNOTS - 1)`; knot times and parameters are computed
/// from integer indices so the end knots are exact.
fn sampled_piece<F>(t0: f64, t1: f64, mut f: F) -> Result<Segment, PlanError>
where
    F: FnMut(f64) -> Result<Vec<f64>, PlanError>,
{
    let last = SAMPLED_KNOTS - 1;
    let mut times = Vec::with_capacity(SAMPLED_KNOTS);
    let mut points = Vec::with_capacity(SAMPLED_KNOTS);
    for k in 0..=last {
        let u = k as f64 / last as f64;
        times.push(match k {
            0 => t0,
            k if k == last => t1,
            _ => t0 + (t1 - t0) * u,
        });
        points.push(f(u)?);
    }
    Ok(Segment::Sampled { times, points })
}

fn diagonal_spread(points: &[Vec<f64>]) -> f64 {
    points.iter().map(|p| dist(p, &points[0])).fold(0.0, f64::max)
}

/// The section built from a deformation into the diagonal: on the `j`-th
/// interval the path runs along `h_{j-1}(a, .)` into the diagonal and back
/// out along `h_j(a, .)` reversed.
pub fn deformation_to_section<D: Deformation + ?Sized>(h: &D, a: &[Vec<f64>], r: usize) -> Result<PathSpec, PlanError> {
    if r < 2 || a.len() != r {
        return Err(PlanError::InvalidPath(format!("need r >= 2 points, got {} for r = {r}", a.len())));
    }
    if !h.ends_at_diagonal() {
        return Err(PlanError::NotEndingAtDiagonal(f64::INFINITY));
    }
    let spread = diagonal_spread(&h.eval(a, 1.0));
    if spread > POINT_TOL {
        return Err(PlanError::NotEndingAtDiagonal(spread));
    }
    let m = (r - 1) as f64;
    let mut segments = Vec::with_capacity(2 * (r - 1));
    for j in 1..r {
        let jf = j as f64;
        let (start, mid, end) = ((jf - 1.0) / m, (jf - 0.5) / m, jf / m);
        segments.push(sampled_piece(start, mid, |u| Ok(h.component(a, j - 1, u)))?);
        segments.push(sampled_piece(mid, end, |u| Ok(h.component(a, j, 1.0 - u)))?);
    }
    Ok(PathSpec::single_block(h.manifold().cloned(), segments))
}

/// Pull a planner defined on the time-1 image back along a deformation
/// `Phi`: on the `j`-th interval the path follows `phi_{j-1}(x, .)`, then
/// the target planner's `j`-th interval at `Phi_1(x)`, then `phi_j(x, .)`
/// reversed.
pub fn compose_section_through_deformation<D, S>(phi: &D, s_target: S, x: &[Vec<f64>], r: usize) -> Result<PathSpec, PlanError>
where
    D: Deformation + ?Sized,
    S: Fn(&[Vec<f64>]) -> Option<PathSpec>,
{
    if r < 2 || x.len() != r {
        return Err(PlanError::InvalidPath(format!("need r >= 2 points, got {} for r = {r}", x.len())));
    }
    let image = phi.eval(x, 1.0);
    let target = s_target(&image).ok_or(PlanError::TargetDomainMiss)?;
    let m = (r - 1) as f64;
    let mut segments = Vec::with_capacity(3 * (r - 1));
    for j in 1..r {
        let jf = j as f64;
        let cuts = [(jf - 1.0) / m, (jf - 2.0 / 3.0) / m, (jf - 1.0 / 3.0) / m, jf / m];
        segments.push(sampled_piece(cuts[0], cuts[1], |u| Ok(phi.component(x, j - 1, u)))?);
        segments.push(sampled_piece(cuts[1], cuts[2], |u| eval_path(&target, (jf - 1.0 + u) / m))?);
        segments.push(sampled_piece(cuts[2], cuts[3], |u| Ok(phi.component(x, j, 1.0 - u)))?);
    }
    Ok(PathSpec::single_block(phi.manifold().cloned(), segments))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::max_abs;

    fn e(n: usize, k: usize) -> Vec<f64> {
        let mut v = vec![0.0; n];
        v[k] = 1.0;
        v
    }

    fn max_err(a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
        a.iter().zip(b).map(|(p, q)| dist(p, q)).fold(0.0, f64::max)
    }

    fn half_circle() -> PathSpec {
        let g = geodesic_to_antipode(&e(3, 0), &e(3, 1), 0.0, 1.0).unwrap();
        PathSpec::single_block(Some(ManifoldSpec::sphere(2)), vec![Segment::GreatCircle(g)])
    }

    #[test]
    fn eval_examples() {
        let c = PathSpec::constant(None, vec![1.0, 2.0]);
        assert_eq!(eval_path(&c, 0.3).unwrap(), vec![1.0, 2.0]);
        assert_eq!(eval_path(&half_circle(), 1.0).unwrap(), vec![-1.0, 0.0, 0.0]);
        assert!(matches!(eval_path(&c, 1.5), Err(PlanError::OutOfDomain(_))));
        assert!(matches!(eval_path(&c, f64::NAN), Err(PlanError::OutOfDomain(_))));
    }

    #[test]
    fn knots_agree_between_segments() {
        let x = e(2, 0);
        let a = geodesic_to_antipode(&x, &mult_i(&x).unwrap(), 0.0, 0.5).unwrap();
        let mx = scale(&x, -1.0);
        let b = Segment::Constant { point: mx.clone(), t0: 0.5, t1: 1.0 };
        let p = PathSpec::single_block(Some(ManifoldSpec::sphere(1)), vec![Segment::GreatCircle(a.clone()), b]);
        p.validate().unwrap();
        assert!(dist(&a.eval(0.5), &eval_path(&p, 0.5).unwrap()) <= 1e-9);
    }

    #[test]
    fn fibration_of_half_circle() {
        let p = half_circle();
        assert_eq!(path_fibration(&p, 2).unwrap(), vec![e(3, 0), vec![-1.0, 0.0, 0.0]]);
        let three = path_fibration(&p, 3).unwrap();
        assert!(dist(&three[1], &e(3, 1)) < 1e-15);
        let c = PathSpec::constant(None, vec![0.5]);
        assert_eq!(path_fibration(&c, 3).unwrap(), vec![vec![0.5]; 3]);
    }

    #[test]
    fn planner_on_circle_pair() {
        let s1 = ManifoldSpec::sphere(1);
        let x = vec![0.6, 0.8];
        let t = NavTuple::new(s1, vec![x.clone(), scale(&x, -1.0)]).unwrap();
        let pattern = SignPattern::new(vec![vec![1, -1]]).unwrap();
        let path = plan_product_odd_spheres(&t, &pattern).unwrap();
        path.validate().unwrap();
        assert!(max_err(&path_fibration(&path, 2).unwrap(), &t.points) <= 1e-9);
        let wrong = SignPattern::diagonal(1, 2);
        assert!(matches!(plan_product_odd_spheres(&t, &wrong), Err(PlanError::PatternMismatch(_))));
    }

    #[test]
    fn planner_on_product_three_slots() {
        let spec = ManifoldSpec::product(&[1, 3]);
        let a = [0.6, 0.8];
        let b = [0.5, -0.5, 0.5, 0.5];
        let slot = |sa: f64, sb: f64| -> Vec<f64> { a.iter().map(|v| sa * v).chain(b.iter().map(|v| sb * v)).collect() };
        let t = NavTuple::new(spec.clone(), vec![slot(1.0, 1.0), slot(-1.0, 1.0), slot(1.0, -1.0)]).unwrap();
        let pattern = SignPattern::new(vec![vec![1, -1, 1], vec![1, 1, -1]]).unwrap();
        let path = plan_product_odd_spheres(&t, &pattern).unwrap();
        path.validate().unwrap();
        assert_eq!(path.blocks[0].segments.len(), 2);
        assert!(max_err(&path_fibration(&path, 3).unwrap(), &t.points) <= 1e-9);
        for i in 0..=256 {
            let p = eval_path(&path, i as f64 / 256.0).unwrap();
            assert!(spec.residual(&p) <= 1e-9);
        }
    }

    #[test]
    fn planner_diagonal_is_constant() {
        let spec = ManifoldSpec::sphere(3);
        let x = e(4, 2);
        let t = NavTuple::new(spec, vec![x.clone(); 4]).unwrap();
        let path = plan_product_odd_spheres(&t, &SignPattern::diagonal(1, 4)).unwrap();
        for i in 0..=20 {
            assert_eq!(eval_path(&path, i as f64 / 20.0).unwrap(), x);
        }
    }

    #[test]
    fn planner_rejects_even_spheres() {
        let t = NavTuple::new(ManifoldSpec::sphere(2), vec![e(3, 0), e(3, 0)]).unwrap();
        assert_eq!(plan_product_odd_spheres(&t, &SignPattern::diagonal(1, 2)), Err(PlanError::EvenDimension(2)));
    }

    #[test]
    fn contraction_section_r2() {
        let a = vec![vec![1.0, 2.0], vec![-3.0, 0.5]];
        let s = deformation_to_section(&LinearContraction, &a, 2).unwrap();
        assert_eq!(eval_path(&s, 0.0).unwrap(), a[0]);
        assert_eq!(eval_path(&s, 1.0).unwrap(), a[1]);
        assert_eq!(eval_path(&s, 0.5).unwrap(), LinearContraction.component(&a, 0, 1.0));
    }

    #[test]
    fn contraction_section_r3_knots() {
        let a = vec![vec![1.0, 2.0], vec![-3.0, 0.5], vec![0.25, -1.0]];
        let s = deformation_to_section(&LinearContraction, &a, 3).unwrap();
        s.validate().unwrap();
        assert!(max_err(&path_fibration(&s, 3).unwrap(), &a) <= 1e-12);
    }

    #[test]
    fn diagonal_point_gives_constant_section() {
        let a = vec![vec![0.3, 0.4]; 3];
        let s = deformation_to_section(&LinearContraction, &a, 3).unwrap();
        for i in 0..=50 {
            assert!(dist(&eval_path(&s, i as f64 / 50.0).unwrap(), &a[0]) < 1e-15);
        }
        assert!(matches!(deformation_to_section(&IdentityDeformation, &a, 3), Err(PlanError::NotEndingAtDiagonal(_))));
    }

    #[test]
    fn identity_composition_reparametrizes_target() {
        let x = vec![vec![0.0, 0.0], vec![1.0, 1.0], vec![2.0, -1.0]];
        let target = |img: &[Vec<f64>]| deformation_to_section(&LinearContraction, img, 3).ok();
        let s = compose_section_through_deformation(&IdentityDeformation, target, &x, 3).unwrap();
        s.validate().unwrap();
        assert!(max_err(&path_fibration(&s, 3).unwrap(), &x) <= 1e-12);
        // first leg is constant at x_0
        assert_eq!(eval_path(&s, 0.1).unwrap(), x[0]);
    }

    #[test]
    fn rotation_composition_on_circle() {
        let y = vec![0.6, 0.8];
        let x = vec![y.clone(), scale(&y, -1.0)];
        let phi = CircleRotation::new(0.7);
        let pattern = SignPattern::new(vec![vec![1, -1]]).unwrap();
        let target = |img: &[Vec<f64>]| {
            let t = NavTuple::new(ManifoldSpec::sphere(1), img.to_vec()).ok()?;
            plan_product_odd_spheres(&t, &pattern).ok()
        };
        let s = compose_section_through_deformation(&phi, target, &x, 2).unwrap();
        assert!(max_err(&path_fibration(&s, 2).unwrap(), &x) <= 1e-9);
        for i in 0..=256 {
            let p = eval_path(&s, i as f64 / 256.0).unwrap();
            assert!((crate::linalg::norm(&p) - 1.0).abs() <= 1e-12);
        }
        // a target that refuses the image is reported
        let refuse = |_: &[Vec<f64>]| None;
        assert_eq!(compose_section_through_deformation(&phi, refuse, &x, 2), Err(PlanError::TargetDomainMiss));
    }

    #[test]
    fn degenerate_composition_visits_diagonal() {
        let x = vec![vec![1.0, 0.0], vec![0.0, 2.0], vec![-1.0, 1.0]];
        let constant = |img: &[Vec<f64>]| Some(PathSpec::constant(None, img[0].clone()));
        let s = compose_section_through_deformation(&LinearContraction, constant, &x, 3).unwrap();
        assert!(max_err(&path_fibration(&s, 3).unwrap(), &x) <= 1e-12);
        let mean = LinearContraction.component(&x, 0, 1.0);
        for mid in [0.25, 0.75] {
            assert!(max_abs(&crate::linalg::sub(&eval_path(&s, mid).unwrap(), &mean)) < 1e-15);
        }
    }

    #[test]
    fn json_and_csv() {
        let p = half_circle();
        let json = serde_json::to_string(&p).unwrap();
        let back: PathSpec = serde_json::from_str(&json).unwrap();
        assert_eq!(back, p);
        let csv = p.to_csv(4).unwrap();
        assert_eq!(csv.lines().next(), Some("t,x0,x1,x2"));
        assert_eq!(csv.lines().count(), 6);
    }
}
