//! Pseudo-gradient flows and critical-set detection.
//!
//! The vector field that is integrated is the pseudo-gradient
//! `X = h * grad F` with `h = 1 / rho(|grad F|)`, where `rho` is `1` on
//! `[0, 1]`, the identity on `[2, inf)` and a C^1 cubic blend in between.
//! With this choice `|X| <= 2 min(|grad F|, 1)` and
//! `DF(X) >= min(|grad F|, |grad F|^2)`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::embed::{EmbedError, ManifoldSpec};
use crate::linalg::{axpy, central_difference_gradient, dist, norm, scale};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FlowError {
    #[error("NegativeInput: rho is defined on [0, inf), got {0}")]
    NegativeInput(f64),
    #[error("ProjectionFailure: {0}")]
    ProjectionFailure(#[from] EmbedError),
    #[error("NoConvergedSeeds: none of {0} flows reached the gradient tolerance")]
    NoConvergedSeeds(usize),
    #[error("NoSeeds: detect_critical needs at least one seed")]
    NoSeeds,
    #[error("InvalidConfig: {0}")]
    InvalidConfig(String),
}

/// Structural tag attached to a detected critical component.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ComponentLabel {
    /// Per-factor, per-slot signs of a critical tuple of the chained
    /// distance function (`signs[j][l]` for factor `j`, slot `l`).
    SignPattern { signs: Vec<Vec<i8>> },
    /// `+1` for frames `(x, ix)`, `-1` for `(x, -ix)`.
    ComplexTag { sign: i8 },
    Unclassified,
}

/// A C^1 function on an embedded manifold.
///
/// Implementors provide the value on the ambient space; the Euclidean
/// gradient defaults to central differences. `descent_direction` is the
/// tangent field the flow follows; it equals the Riemannian gradient unless
/// a wrapper restricts it (e.g. to vertical directions).
pub trait ScalarField: Sync {
    fn manifold(&self) -> &ManifoldSpec;

    fn value(&self, x: &[f64]) -> f64;

    fn euclidean_gradient(&self, x: &[f64]) -> Vec<f64> {
        central_difference_gradient(|y| self.value(y), x)
    }

    /// Riemannian gradient for the induced metric.
    fn gradient(&self, x: &[f64]) -> Vec<f64> {
        self.manifold().tangent_project(x, &self.euclidean_gradient(x))
    }

    /// Direction that the flow descends along, together with the
    /// stationarity measure used as stopping criterion.
    fn descent_direction(&self, x: &[f64]) -> (Vec<f64>, f64) {
        let g = self.gradient(x);
        let n = norm(&g);
        (g, n)
    }

    fn criticality(&self, x: &[f64]) -> f64 {
        self.descent_direction(x).1
    }

    /// Structural label of a critical point, when the field knows one.
    fn classify(&self, _x: &[f64], _tol: f64) -> ComponentLabel {
        ComponentLabel::Unclassified
    }
}

impl<F: ScalarField + ?Sized> ScalarField for &F {
    fn manifold(&self) -> &ManifoldSpec {
        (**self).manifold()
    }
    fn value(&self, x: &[f64]) -> f64 {
        (**self).value(x)
    }
    fn euclidean_gradient(&self, x: &[f64]) -> Vec<f64> {
        (**self).euclidean_gradient(x)
    }
    fn gradient(&self, x: &[f64]) -> Vec<f64> {
        (**self).gradient(x)
    }
    fn descent_direction(&self, x: &[f64]) -> (Vec<f64>, f64) {
        (**self).descent_direction(x)
    }
    fn criticality(&self, x: &[f64]) -> f64 {
        (**self).criticality(x)
    }
    fn classify(&self, x: &[f64], tol: f64) -> ComponentLabel {
        (**self).classify(x, tol)
    }
}

/// Which flows `detect_critical` runs from each seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum SearchMode {
    /// Negative pseudo-gradient flow of `F` only. Generic seeds reach local
    /// minima only.
    Descent,
    /// Negative pseudo-gradient flow of `|grad F|^2 / 2`, whose zero set is
    /// all of `Crit F` regardless of index.
    Stationary,
    #[default]
    Both,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FlowConfig {
    pub step: f64,
    pub max_time: f64,
    pub grad_tol: f64,
    pub cluster_tol: f64,
    #[serde(default)]
    pub search: SearchMode,
}

impl Default for FlowConfig {
    fn default() -> Self {
        FlowConfig { step: 1e-2, max_time: 200.0, grad_tol: 1e-8, cluster_tol: 1e-4, search: SearchMode::Both }
    }
}

impl FlowConfig {
    pub fn validate(&self) -> Result<(), FlowError> {
        let positive = [self.step, self.max_time, self.grad_tol, self.cluster_tol]
            .iter()
            .all(|v| *v > 0.0 && v.is_finite());
        if !positive {
            return Err(FlowError::InvalidConfig("step, max_time, grad_tol and cluster_tol must be positive".into()));
        }
        if self.step >= self.max_time {
            return Err(FlowError::InvalidConfig("step must be smaller than max_time".into()));
        }
        Ok(())
    }
}

/// Sampled trajectory of the negative pseudo-gradient flow.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowTrace {
    pub times: Vec<f64>,
    pub points: Vec<Vec<f64>>,
    pub values: Vec<f64>,
    pub grad_norms: Vec<f64>,
}

impl FlowTrace {
    pub fn endpoint(&self) -> &[f64] {
        self.points.last().expect("trace has at least the start point")
    }

    /// Largest increase between consecutive values (0 for a monotone trace).
    pub fn max_increase(&self) -> f64 {
        self.values.windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max)
    }

    /// CSV with columns `t, x0, .., x{N-1}, F, gradnorm`.
    pub fn to_csv(&self) -> String {
        let dim = self.points.first().map_or(0, Vec::len);
        let mut out = String::from("t");
        for k in 0..dim {
            out.push_str(&format!(",x{k}"));
        }
        out.push_str(",F,gradnorm\n");
        for i in 0..self.times.len() {
            out.push_str(&format!("{}", self.times[i]));
            for c in &self.points[i] {
                out.push_str(&format!(",{c}"));
            }
            out.push_str(&format!(",{},{}\n", self.values[i], self.grad_norms[i]));
        }
        out
    }
}

/// Final state of a flow run without trace recording.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowEnd {
    pub point: Vec<f64>,
    pub value: f64,
    pub criticality: f64,
    pub time: f64,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriticalComponent {
    pub value: f64,
    pub representatives: Vec<Vec<f64>>,
    pub label: ComponentLabel,
}

/// The C^1 cutoff with `rho = 1` on `[0, 1]`, `rho(s) = s` on `[2, inf)` and
/// `rho(1 + t) = 1 + 2t^2 - t^3` in between.
pub fn rho(s: f64) -> Result<f64, FlowError> {
    if !(s >= 0.0) {
        return Err(FlowError::NegativeInput(s));
    }
    Ok(rho_unchecked(s))
}

fn rho_unchecked(s: f64) -> f64 {
    if s <= 1.0 {
        1.0
    } else if s >= 2.0 {
        s
    } else {
        let t = s - 1.0;
        1.0 + 2.0 * t * t - t * t * t
    }
}

/// Rescale a gradient-like vector of norm `n` by `h = 1 / rho(n)`.
fn pseudo_scale(mut v: Vec<f64>, n: f64) -> Vec<f64> {
    let h = 1.0 / rho_unchecked(n);
    if h != 1.0 {
        v.iter_mut().for_each(|c| *c *= h);
    }
    v
}

/// `X(x) = h(x) grad F(x)` with `h = 1 / rho(|grad F|)`.
pub fn pseudo_gradient<F: ScalarField + ?Sized>(field: &F, x: &[f64]) -> Vec<f64> {
    let g = field.gradient(x);
    let n = norm(&g);
    pseudo_scale(g, n)
}

fn descent_velocity<F: ScalarField + ?Sized>(field: &F, x: &[f64]) -> (Vec<f64>, f64) {
    let (d, crit) = field.descent_direction(x);
    let n = norm(&d);
    (pseudo_scale(d, n), crit)
}

/// One classical RK4 step of `x' = -X(x)`; every stage point is retracted
/// onto the manifold before it is evaluated.
fn rk4_step<F: ScalarField + ?Sized>(field: &F, x: &[f64], k1: &[f64], h: f64) -> Result<Vec<f64>, FlowError> {
    let spec = field.manifold();
    let stage = |base: &[f64], k: &[f64], s: f64| -> Result<Vec<f64>, FlowError> {
        let mut y = base.to_vec();
        axpy(&mut y, -s, k);
        Ok(spec.project(&y)?)
    };
    let x2 = stage(x, k1, 0.5 * h)?;
    let (k2, _) = descent_velocity(field, &x2);
    let x3 = stage(x, &k2, 0.5 * h)?;
    let (k3, _) = descent_velocity(field, &x3);
    let x4 = stage(x, &k3, h)?;
    let (k4, _) = descent_velocity(field, &x4);
    let mut y = x.to_vec();
    for i in 0..y.len() {
        y[i] -= h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }
    Ok(spec.project(&y)?)
}

/// Core integration loop. Calls `observe(t, x, crit)` at every accepted
/// state, including the start.
fn run<F, O>(field: &F, start: &[f64], step: f64, duration: f64, stop_tol: Option<f64>, mut observe: O) -> Result<FlowEnd, FlowError>
where
    F: ScalarField + ?Sized,
    O: FnMut(f64, &[f64], f64),
{
    let steps = (duration / step).ceil().max(1.0) as usize;
    let h = duration / steps as f64;
    let mut x = start.to_vec();
    let mut t = 0.0;
    for i in 0..=steps {
        let (k1, crit) = descent_velocity(field, &x);
        observe(t, &x, crit);
        if stop_tol.is_some_and(|tol| crit <= tol) {
            return Ok(FlowEnd { value: field.value(&x), point: x, criticality: crit, time: t, converged: true });
        }
        if i == steps {
            let converged = stop_tol.is_none_or(|tol| crit <= tol);
            return Ok(FlowEnd { value: field.value(&x), point: x, criticality: crit, time: t, converged });
        }
        x = rk4_step(field, &x, &k1, h)?;
        t = (i + 1) as f64 * h;
    }
    unreachable!("loop returns at i == steps")
}

/// Integrate the negative pseudo-gradient flow from `start` until the
/// stationarity measure drops below `cfg.grad_tol` or `cfg.max_time` is
/// reached, recording every step.
pub fn integrate_flow<F: ScalarField + ?Sized>(field: &F, start: &[f64], cfg: &FlowConfig) -> Result<FlowTrace, FlowError> {
    cfg.validate()?;
    let mut trace = FlowTrace { times: vec![], points: vec![], values: vec![], grad_norms: vec![] };
    run(field, start, cfg.step, cfg.max_time, Some(cfg.grad_tol), |t, x, crit| {
        trace.times.push(t);
        trace.points.push(x.to_vec());
        trace.values.push(field.value(x));
        trace.grad_norms.push(crit);
    })?;
    Ok(trace)
}

/// Same flow as [`integrate_flow`] but only the final state is kept.
pub fn flow_to_rest<F: ScalarField + ?Sized>(field: &F, start: &[f64], cfg: &FlowConfig) -> Result<FlowEnd, FlowError> {
    run(field, start, cfg.step, cfg.max_time, Some(cfg.grad_tol), |_, _, _| {})
}

/// Time-`duration` map of the flow (no early stop).
pub fn flow_for<F: ScalarField + ?Sized>(field: &F, start: &[f64], duration: f64, step: f64) -> Result<Vec<f64>, FlowError> {
    Ok(run(field, start, step, duration, None, |_, _, _| {})?.point)
}

/// `|grad F|^2 / 2` for a wrapped field `F`.
///
/// Its Riemannian gradient is `Hess F [grad F]`, evaluated here by central
/// differences of `grad F` along a retraction curve. Every critical point
/// of `F` is a global minimum of this function, so its descent flow also
/// reaches saddles and maxima of `F`.
pub struct Stationarity<'a, F: ?Sized> {
    inner: &'a F,
}

impl<'a, F: ScalarField + ?Sized> Stationarity<'a, F> {
    pub fn new(inner: &'a F) -> Self {
        Stationarity { inner }
    }

    fn hessian_times_gradient(&self, x: &[f64]) -> (Vec<f64>, f64) {
        let spec = self.inner.manifold();
        let g = self.inner.gradient(x);
        let n = norm(&g);
        if n == 0.0 {
            return (g, 0.0);
        }
        let eps = 1e-5;
        let u = scale(&g, 1.0 / n);
        let shifted = |s: f64| {
            let mut y = x.to_vec();
            axpy(&mut y, s, &u);
            spec.project(&y).map(|p| self.inner.gradient(&p))
        };
        match (shifted(eps), shifted(-eps)) {
            (Ok(gp), Ok(gm)) => {
                let diff: Vec<f64> = gp.iter().zip(&gm).map(|(a, b)| (a - b) * n / (2.0 * eps)).collect();
                (spec.tangent_project(x, &diff), n)
            }
            _ => (vec![0.0; x.len()], n),
        }
    }
}

impl<F: ScalarField + ?Sized> ScalarField for Stationarity<'_, F> {
    fn manifold(&self) -> &ManifoldSpec {
        self.inner.manifold()
    }

    fn value(&self, x: &[f64]) -> f64 {
        let g = self.inner.gradient(x);
        0.5 * norm(&g).powi(2)
    }

    fn euclidean_gradient(&self, x: &[f64]) -> Vec<f64> {
        self.hessian_times_gradient(x).0
    }

    fn gradient(&self, x: &[f64]) -> Vec<f64> {
        self.hessian_times_gradient(x).0
    }

    /// Descends `|grad F|^2 / 2` but stops on `|grad F|` itself.
    fn descent_direction(&self, x: &[f64]) -> (Vec<f64>, f64) {
        self.hessian_times_gradient(x)
    }
}

/// Flow every seed to rest and cluster the converged endpoints into
/// critical components.
///
/// Endpoints are grouped by value first (a gap larger than
/// `10 * cluster_tol` separates groups), then by structural label, and
/// unlabelled endpoints by single-linkage point distance with the same
/// threshold.
pub fn detect_critical<F: ScalarField + ?Sized>(field: &F, seeds: &[Vec<f64>], cfg: &FlowConfig) -> Result<Vec<CriticalComponent>, FlowError> {
    cfg.validate()?;
    if seeds.is_empty() {
        return Err(FlowError::NoSeeds);
    }
    let stationarity = Stationarity::new(field);
    let runs: Vec<Vec<FlowEnd>> = seeds
        .par_iter()
        .map(|seed| {
            let mut out = Vec::with_capacity(2);
            if matches!(cfg.search, SearchMode::Descent | SearchMode::Both) {
                out.push(flow_to_rest(field, seed, cfg)?);
            }
            if matches!(cfg.search, SearchMode::Stationary | SearchMode::Both) {
                out.push(flow_to_rest(&stationarity, seed, cfg)?);
            }
            Ok(out)
        })
        .collect::<Result<_, FlowError>>()?;
    let attempted: usize = runs.iter().map(Vec::len).sum();
    let mut endpoints: Vec<(f64, Vec<f64>)> = runs
        .into_iter()
        .flatten()
        .filter(|end| end.converged && field.criticality(&end.point) <= cfg.grad_tol)
        .map(|end| (field.value(&end.point), end.point))
        .collect();
    if endpoints.is_empty() {
        return Err(FlowError::NoConvergedSeeds(attempted));
    }
    endpoints.sort_by(|a, b| a.0.total_cmp(&b.0).then_with(|| lex_cmp(&a.1, &b.1)));
    Ok(cluster(field, endpoints, cfg))
}

fn lex_cmp(a: &[f64], b: &[f64]) -> std::cmp::Ordering {
    a.iter()
        .zip(b)
        .map(|(x, y)| x.total_cmp(y))
        .find(|o| o.is_ne())
        .unwrap_or(std::cmp::Ordering::Equal)
}

fn cluster<F: ScalarField + ?Sized>(field: &F, endpoints: Vec<(f64, Vec<f64>)>, cfg: &FlowConfig) -> Vec<CriticalComponent> {
    let gap = 10.0 * cfg.cluster_tol;
    let mut value_groups: Vec<Vec<(f64, Vec<f64>)>> = Vec::new();
    for ep in endpoints {
        match value_groups.last_mut() {
            Some(group) if ep.0 - group.last().unwrap().0 <= gap => group.push(ep),
            _ => value_groups.push(vec![ep]),
        }
    }
    let mut components = Vec::new();
    for group in value_groups {
        let mut by_label: Vec<(ComponentLabel, Vec<(f64, Vec<f64>)>)> = Vec::new();
        for ep in group {
            let label = field.classify(&ep.1, cfg.cluster_tol);
            match by_label.iter_mut().find(|(l, _)| *l == label) {
                Some((_, members)) => members.push(ep),
                None => by_label.push((label, vec![ep])),
            }
        }
        by_label.sort_by(|a, b| a.0.cmp(&b.0));
        for (label, members) in by_label {
            let parts = if label == ComponentLabel::Unclassified {
                single_linkage(members, gap)
            } else {
                vec![members]
            };
            for part in parts {
                let value = part.iter().map(|m| m.0).sum::<f64>() / part.len() as f64;
                components.push(CriticalComponent {
                    value,
                    representatives: part.into_iter().map(|m| m.1).collect(),
                    label: label.clone(),
                });
            }
        }
    }
    components
}

fn single_linkage(members: Vec<(f64, Vec<f64>)>, threshold: f64) -> Vec<Vec<(f64, Vec<f64>)>> {
    let n = members.len();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut [usize], mut i: usize) -> usize {
        while parent[i] != i {
            parent[i] = parent[parent[i]];
            i = parent[i];
        }
        i
    }
    for i in 0..n {
        for j in i + 1..n {
            if dist(&members[i].1, &members[j].1) <= threshold {
                let (a, b) = (find(&mut parent, i), find(&mut parent, j));
                if a != b {
                    parent[a.max(b)] = a.min(b);
                }
            }
        }
    }
    let mut roots: Vec<usize> = Vec::new();
    let mut out: Vec<Vec<(f64, Vec<f64>)>> = Vec::new();
    for (i, m) in members.into_iter().enumerate() {
        let r = find(&mut parent, i);
        match roots.iter().position(|&x| x == r) {
            Some(k) => out[k].push(m),
            None => {
                roots.push(r);
                out.push(vec![m]);
            }
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DescentSample {
    pub index: usize,
    pub decrement: f64,
    /// Fixed points (stationarity at most `grad_tol`) are not asserted on.
    pub excluded: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DescentReport {
    pub samples: Vec<DescentSample>,
    pub min_decrement: Option<f64>,
    pub argmin: Option<usize>,
    pub all_positive: bool,
}

/// Sampled check of the strict descent property `F(phi_1(x)) < F(x)` off
/// the fixed-point set, where `phi_1` is the time-1 map of the flow.
pub fn descent_diagnostic<F: ScalarField + ?Sized>(field: &F, samples: &[Vec<f64>], cfg: &FlowConfig) -> Result<DescentReport, FlowError> {
    cfg.validate()?;
    let entries: Vec<DescentSample> = samples
        .par_iter()
        .enumerate()
        .map(|(index, x)| {
            if field.criticality(x) <= cfg.grad_tol {
                return Ok(DescentSample { index, decrement: 0.0, excluded: true });
            }
            let y = flow_for(field, x, 1.0, cfg.step)?;
            Ok(DescentSample { index, decrement: field.value(x) - field.value(&y), excluded: false })
        })
        .collect::<Result<_, FlowError>>()?;
    let best = entries
        .iter()
        .filter(|e| !e.excluded)
        .min_by(|a, b| a.decrement.total_cmp(&b.decrement));
    Ok(DescentReport {
        min_decrement: best.map(|e| e.decrement),
        argmin: best.map(|e| e.index),
        all_positive: entries.iter().all(|e| e.excluded || e.decrement > 0.0),
        samples: entries,
    })
}

/// Last ambient coordinate, restricted to the manifold.
pub struct HeightField {
    pub spec: ManifoldSpec,
}

impl ScalarField for HeightField {
    fn manifold(&self) -> &ManifoldSpec {
        &self.spec
    }
    fn value(&self, x: &[f64]) -> f64 {
        x[x.len() - 1]
    }
    fn euclidean_gradient(&self, x: &[f64]) -> Vec<f64> {
        let mut g = vec![0.0; x.len()];
        g[x.len() - 1] = 1.0;
        g
    }
}

pub struct ConstantField {
    pub spec: ManifoldSpec,
    pub value: f64,
}

impl ScalarField for ConstantField {
    fn manifold(&self) -> &ManifoldSpec {
        &self.spec
    }
    fn value(&self, _x: &[f64]) -> f64 {
        self.value
    }
    fn euclidean_gradient(&self, x: &[f64]) -> Vec<f64> {
        vec![0.0; x.len()]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::dot;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    /// Quadratic `sum_i c_i x_i^2` with FD gradient (no analytic override).
    struct Quadratic {
        spec: ManifoldSpec,
        coef: Vec<f64>,
    }

    impl ScalarField for Quadratic {
        fn manifold(&self) -> &ManifoldSpec {
            &self.spec
        }
        fn value(&self, x: &[f64]) -> f64 {
            x.iter().zip(&self.coef).map(|(a, c)| c * a * a).sum()
        }
    }

    #[test]
    fn rho_branches() {
        assert_eq!(rho(0.5).unwrap(), 1.0);
        assert_eq!(rho(4.0).unwrap(), 4.0);
        assert_eq!(rho(1.5).unwrap(), 1.375);
        assert_eq!(rho(-1.0), Err(FlowError::NegativeInput(-1.0)));
    }

    /// Dense sampling of the blend: monotone, below the identity on [1, 2],
    /// and continuous with continuous slope at the junctions.
    #[test]
    fn rho_is_monotone_and_below_identity() {
        let mut prev = rho(0.0).unwrap();
        for k in 0..=30_000 {
            let s = 3.0 * k as f64 / 30_000.0;
            let v = rho(s).unwrap();
            assert!(v >= prev - 1e-15);
            if (1.0..=2.0).contains(&s) {
                assert!(v <= s + 1e-15);
            }
            prev = v;
        }
        let d = |s: f64| (rho(s + 1e-7).unwrap() - rho(s - 1e-7).unwrap()) / 2e-7;
        assert!(d(1.0).abs() < 1e-6);
        assert!((d(2.0) - 1.0).abs() < 1e-6);
    }

    #[test]
    fn pseudo_gradient_branches() {
        let spec = ManifoldSpec::sphere(2);
        let small = Quadratic { spec: spec.clone(), coef: vec![0.0, 0.0, 0.25] };
        // at x = (0, sin a, cos a) the gradient of c z^2 has norm c sin(2a)
        let x = vec![0.0, (0.3_f64).sin(), (0.3_f64).cos()];
        let g = small.gradient(&x);
        assert!(norm(&g) < 1.0);
        assert_eq!(pseudo_gradient(&small, &x), g);
        let big = Quadratic { spec: spec.clone(), coef: vec![0.0, 0.0, 20.0] };
        let gb = big.gradient(&x);
        assert!(norm(&gb) > 2.0);
        assert!((norm(&pseudo_gradient(&big, &x)) - 1.0).abs() < 1e-12);
        let pole = vec![0.0, 0.0, 1.0];
        assert!(norm(&pseudo_gradient(&big, &pole)) < 1e-8);
    }

    #[test]
    fn pseudo_gradient_contract_on_samples() {
        let spec = ManifoldSpec::sphere(3);
        let field = Quadratic { spec: spec.clone(), coef: vec![0.1, -3.0, 5.0, 0.4] };
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..1000 {
            let x = spec.random_point(&mut rng);
            let g = field.gradient(&x);
            let gn = norm(&g);
            let xv = pseudo_gradient(&field, &x);
            assert!(norm(&xv) <= 2.0 * gn.min(1.0) + 1e-10);
            assert!(dot(&g, &xv) >= gn.min(gn * gn) - 1e-10);
        }
    }

    #[test]
    fn height_flow_on_sphere_reaches_south_pole() {
        let spec = ManifoldSpec::sphere(2);
        let field = HeightField { spec: spec.clone() };
        let start = spec.project(&[0.01, 0.02, 1.0]).unwrap();
        let cfg = FlowConfig::default();
        let trace = integrate_flow(&field, &start, &cfg).unwrap();
        assert!(*trace.grad_norms.last().unwrap() <= cfg.grad_tol);
        assert!(dist(trace.endpoint(), &[0.0, 0.0, -1.0]) < 1e-6);
        assert!(trace.max_increase() <= 1e-10);
        // the symmetric start ends at the same pole; a half step agrees
        let half = FlowConfig { step: cfg.step / 2.0, ..cfg };
        let end_half = flow_to_rest(&field, &start, &half).unwrap();
        assert!(dist(&end_half.point, trace.endpoint()) < 1e-6);
    }

    #[test]
    fn critical_start_is_stationary() {
        let spec = ManifoldSpec::sphere(2);
        let field = HeightField { spec };
        let trace = integrate_flow(&field, &[0.0, 0.0, 1.0], &FlowConfig::default()).unwrap();
        assert_eq!(trace.points.len(), 1);
        assert!(dist(trace.endpoint(), &[0.0, 0.0, 1.0]) <= 1e-9);
    }

    #[test]
    fn height_critical_values_found_by_stationary_search() {
        let spec = ManifoldSpec::sphere(2);
        let field = HeightField { spec: spec.clone() };
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let seeds: Vec<_> = (0..40).map(|_| spec.random_point(&mut rng)).collect();
        let comps = detect_critical(&field, &seeds, &FlowConfig::default()).unwrap();
        let values: Vec<f64> = comps.iter().map(|c| c.value).collect();
        assert_eq!(values.len(), 2, "{values:?}");
        assert!((values[0] + 1.0).abs() < 1e-9 && (values[1] - 1.0).abs() < 1e-9);
        let descent = FlowConfig { search: SearchMode::Descent, ..FlowConfig::default() };
        let comps = detect_critical(&field, &seeds, &descent).unwrap();
        assert_eq!(comps.len(), 1);
    }

    #[test]
    fn no_converged_seeds_is_reported() {
        let spec = ManifoldSpec::sphere(2);
        let field = HeightField { spec: spec.clone() };
        let cfg = FlowConfig { max_time: 0.05, search: SearchMode::Descent, ..FlowConfig::default() };
        let seeds = vec![vec![1.0, 0.0, 0.0]];
        assert_eq!(detect_critical(&field, &seeds, &cfg), Err(FlowError::NoConvergedSeeds(1)));
        assert_eq!(detect_critical(&field, &[], &cfg), Err(FlowError::NoSeeds));
    }

    #[test]
    fn descent_diagnostic_on_height() {
        let spec = ManifoldSpec::sphere(2);
        let field = HeightField { spec };
        let samples = vec![
            vec![1.0, 0.0, 0.0],
            vec![0.0, 1.0, 0.0],
            vec![(0.5_f64).sqrt(), -(0.5_f64).sqrt(), 0.0],
            vec![0.0, 0.0, 1.0],
        ];
        let report = descent_diagnostic(&field, &samples, &FlowConfig::default()).unwrap();
        assert!(report.all_positive);
        assert!(report.samples[3].excluded);
        assert_eq!(report.samples[3].decrement, 0.0);
        assert!(report.min_decrement.unwrap() > 0.0);
    }

    #[test]
    fn trace_csv_layout() {
        let spec = ManifoldSpec::sphere(1);
        let field = HeightField { spec };
        let cfg = FlowConfig { max_time: 0.02, ..FlowConfig::default() };
        let trace = integrate_flow(&field, &[1.0, 0.0], &cfg).unwrap();
        let csv = trace.to_csv();
        let mut lines = csv.lines();
        assert_eq!(lines.next(), Some("t,x0,x1,F,gradnorm"));
        assert_eq!(lines.count(), trace.times.len());
    }

    #[test]
    fn config_validation() {
        assert!(FlowConfig { step: 0.0, ..FlowConfig::default() }.validate().is_err());
        assert!(FlowConfig { step: 300.0, ..FlowConfig::default() }.validate().is_err());
    }
}
