//! Upper bounds for sequential (parametrized) topological complexity from
//! critical data, in the unreduced convention.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Critical values closer than this are treated as equal.
pub const VALUE_TOL: f64 = 1e-6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BoundError {
    #[error("UnknownComplexity: components {0:?} have no assigned complexity")]
    UnknownComplexity(Vec<usize>),
    #[error("UnknownSpace: {0}")]
    UnknownSpace(String),
    #[error("InvalidInput: {0}")]
    InvalidInput(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UnknownTag {
    Unknown,
}

/// Subspace complexity of a component: a positive integer or `"unknown"`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Complexity {
    Known(u64),
    Unknown(UnknownTag),
}

impl Complexity {
    pub const UNKNOWN: Complexity = Complexity::Unknown(UnknownTag::Unknown);

    pub fn known(self) -> Option<u64> {
        match self {
            Complexity::Known(c) => Some(c),
            Complexity::Unknown(_) => None,
        }
    }
}

impl fmt::Display for Complexity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Complexity::Known(c) => write!(f, "{c}"),
            Complexity::Unknown(_) => f.write_str("unknown"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriticalData {
    pub value: f64,
    pub complexity: Complexity,
}

/// Critical data fed to [`ls_upper_bound`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum BoundInput {
    Plain { components: Vec<CriticalData> },
    /// Components are indexed by one value per slot; each component's value
    /// is the sum, and every component has the same complexity.
    ProductSum { slot_values: Vec<Vec<f64>>, complexity: Complexity },
    /// `r` slots sharing one value set (e.g. the signs of `Crit f`).
    FiberSigns { r: usize, values: Vec<f64>, complexity: Complexity },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BreakdownEntry {
    pub value: f64,
    /// Number of components at this value.
    pub components: u64,
    pub contribution: Complexity,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundResult {
    pub bound: Complexity,
    pub breakdown: Vec<BreakdownEntry>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lower_bound: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub exact: Option<bool>,
}

impl BoundResult {
    /// Aligned text table of the per-value contributions.
    pub fn table(&self) -> String {
        let rows: Vec<[String; 3]> = self
            .breakdown
            .iter()
            .map(|e| [format!("{}", e.value), e.components.to_string(), e.contribution.to_string()])
            .collect();
        let header = ["value", "components", "contribution"];
        let widths: Vec<usize> = (0..3)
            .map(|c| rows.iter().map(|r| r[c].len()).chain([header[c].len()]).max().unwrap_or(0))
            .collect();
        let line = |cells: [&str; 3]| {
            format!("{:>w0$}  {:>w1$}  {:>w2$}\n", cells[0], cells[1], cells[2], w0 = widths[0], w1 = widths[1], w2 = widths[2])
        };
        let mut out = line(header);
        for r in &rows {
            out.push_str(&line([&r[0], &r[1], &r[2]]));
        }
        out.push_str(&format!("bound: {}\n", self.bound));
        if let Some(lb) = self.lower_bound {
            out.push_str(&format!("lower bound: {lb}\n"));
        }
        if let Some(exact) = self.exact {
            out.push_str(&format!("exact: {exact}\n"));
        }
        out
    }
}

/// Distinct sums of one value per slot, with multiplicities.
fn slot_sums(slots: &[Vec<f64>]) -> Vec<(f64, u64)> {
    let mut acc: Vec<(f64, u64)> = vec![(0.0, 1)];
    for values in slots {
        let mut next: Vec<(f64, u64)> = Vec::new();
        for (s, count) in &acc {
            for v in values {
                next.push((s + v, *count));
            }
        }
        acc = merge_values(next);
    }
    acc
}

fn merge_values(mut items: Vec<(f64, u64)>) -> Vec<(f64, u64)> {
    items.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut out: Vec<(f64, u64)> = Vec::new();
    for (v, c) in items {
        match out.last_mut() {
            Some(last) if (v - last.0).abs() <= VALUE_TOL * last.0.abs().max(1.0) => last.1 += c,
            _ => out.push((v, c)),
        }
    }
    out
}

impl BoundInput {
    fn validate(&self) -> Result<(), BoundError> {
        let bad = |c: &Complexity| matches!(c, Complexity::Known(0));
        let finite = |v: &[f64]| v.iter().all(|x| x.is_finite());
        match self {
            BoundInput::Plain { components } => {
                if components.iter().any(|c| bad(&c.complexity) || !c.value.is_finite()) {
                    return Err(BoundError::InvalidInput("complexities must be >= 1 and values finite".into()));
                }
            }
            BoundInput::ProductSum { slot_values, complexity } => {
                if bad(complexity) || slot_values.iter().any(|s| s.is_empty() || !finite(s)) {
                    return Err(BoundError::InvalidInput("slots need finite, nonempty value sets and complexity >= 1".into()));
                }
            }
            BoundInput::FiberSigns { r, values, complexity } => {
                if *r < 1 || values.is_empty() || !finite(values) || bad(complexity) {
                    return Err(BoundError::InvalidInput("fiber signs need r >= 1, finite values and complexity >= 1".into()));
                }
            }
        }
        Ok(())
    }

    /// `(value, complexity, multiplicity)` groups before the cut.
    fn groups(&self) -> Vec<(f64, Vec<(usize, Complexity)>, u64)> {
        match self {
            BoundInput::Plain { components } => {
                let mut sorted: Vec<(usize, &CriticalData)> = components.iter().enumerate().collect();
                sorted.sort_by(|a, b| a.1.value.total_cmp(&b.1.value));
                let mut out: Vec<(f64, Vec<(usize, Complexity)>, u64)> = Vec::new();
                for (i, c) in sorted {
                    match out.last_mut() {
                        Some(g) if (c.value - g.0).abs() <= VALUE_TOL * g.0.abs().max(1.0) => {
                            g.1.push((i, c.complexity));
                            g.2 += 1;
                        }
                        _ => out.push((c.value, vec![(i, c.complexity)], 1)),
                    }
                }
                out
            }
            BoundInput::ProductSum { slot_values, complexity } => slot_sums(slot_values)
                .into_iter()
                .enumerate()
                .map(|(i, (v, count))| (v, vec![(i, *complexity)], count))
                .collect(),
            BoundInput::FiberSigns { r, values, complexity } => slot_sums(&vec![values.clone(); *r])
                .into_iter()
                .enumerate()
                .map(|(i, (v, count))| (v, vec![(i, *complexity)], count))
                .collect(),
        }
    }
}

/// `sum over critical values mu <= lambda_cut of max { complexity of C }`,
/// the maximum running over components `C` at value `mu`.
pub fn ls_upper_bound(inp: &BoundInput, lambda_cut: f64) -> Result<BoundResult, BoundError> {
    inp.validate()?;
    if lambda_cut.is_nan() {
        return Err(BoundError::InvalidInput("lambda_cut is NaN".into()));
    }
    let mut unknown = Vec::new();
    let mut breakdown = Vec::new();
    let mut total = 0u64;
    for (value, members, count) in inp.groups() {
        if value > lambda_cut + VALUE_TOL * value.abs().max(1.0) {
            continue;
        }
        let mut best = 0u64;
        for (idx, c) in &members {
            match c.known() {
                Some(k) => best = best.max(k),
                None => unknown.push(*idx),
            }
        }
        total += best;
        breakdown.push(BreakdownEntry { value, components: count, contribution: Complexity::Known(best) });
    }
    if !unknown.is_empty() {
        return Err(BoundError::UnknownComplexity(unknown));
    }
    Ok(BoundResult { bound: Complexity::Known(total), breakdown, lower_bound: None, exact: None })
}

/// Bound for `TC_r` of a product of `k` odd spheres from the chained distance
/// function: critical values `0, 4, .., 4k(r-1)`, each contributing 1.
pub fn product_spheres_bound(k: usize, r: usize) -> Result<BoundResult, BoundError> {
    if k < 1 || r < 2 {
        return Err(BoundError::InvalidInput(format!("need k >= 1 and r >= 2, got k = {k}, r = {r}")));
    }
    let per_factor: Vec<f64> = (0..r).map(|f| 4.0 * f as f64).collect();
    let input = BoundInput::ProductSum { slot_values: vec![per_factor; k], complexity: Complexity::Known(1) };
    let mut out = ls_upper_bound(&input, f64::INFINITY)?;
    let reference = reference_tc(&SpaceTag::ProductOddSpheres { k }, r)?;
    out.lower_bound = Some(reference);
    out.exact = Some(out.bound == Complexity::Known(reference));
    Ok(out)
}

/// Bound for `TC_r` of the unit tangent bundle `US^(4m-1) -> S^(4m-1)` from
/// `F = sum f(u_i)`: one group per sign sum, each of complexity 1. The lower
/// bound is `TC_r` of the fibre `S^(4m-2)`.
pub fn unit_tangent_bound(m: usize, r: usize) -> Result<BoundResult, BoundError> {
    if m < 1 || r < 2 {
        return Err(BoundError::InvalidInput(format!("need m >= 1 and r >= 2, got m = {m}, r = {r}")));
    }
    let input = BoundInput::FiberSigns { r, values: vec![-1.0, 1.0], complexity: Complexity::Known(1) };
    let mut out = ls_upper_bound(&input, f64::INFINITY)?;
    let lower = reference_tc(&SpaceTag::SphereEven, r)?;
    out.lower_bound = Some(lower);
    out.exact = Some(out.bound == Complexity::Known(lower));
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "space", rename_all = "snake_case")]
pub enum SpaceTag {
    SphereOdd,
    SphereEven,
    ProductOddSpheres { k: usize },
}

impl FromStr for SpaceTag {
    type Err = BoundError;

    /// `sphere-odd`, `sphere-even`, `product-odd-spheres:K` or `sphere:N`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let unknown = || BoundError::UnknownSpace(s.to_string());
        match s {
            "sphere-odd" => return Ok(SpaceTag::SphereOdd),
            "sphere-even" => return Ok(SpaceTag::SphereEven),
            _ => {}
        }
        let (head, arg) = s.split_once(':').ok_or_else(unknown)?;
        let n: usize = arg.trim().parse().map_err(|_| unknown())?;
        match head {
            "sphere" if n >= 1 => Ok(if n % 2 == 1 { SpaceTag::SphereOdd } else { SpaceTag::SphereEven }),
            "product-odd-spheres" if n >= 1 => Ok(SpaceTag::ProductOddSpheres { k: n }),
            _ => Err(unknown()),
        }
    }
}

/// Known values of `TC_r`: `r` for odd spheres, `r + 1` for even spheres
/// and `k(r - 1) + 1` for products of `k` odd spheres.
pub fn reference_tc(tag: &SpaceTag, r: usize) -> Result<u64, BoundError> {
    if r < 2 {
        return Err(BoundError::InvalidInput(format!("need r >= 2, got {r}")));
    }
    let r = r as u64;
    Ok(match tag {
        SpaceTag::SphereOdd => r,
        SpaceTag::SphereEven => r + 1,
        SpaceTag::ProductOddSpheres { k } => *k as u64 * (r - 1) + 1,
    })
}

/// Convenience constructor for plain inputs from `(value, complexity)`.
pub fn plain(components: &[(f64, Option<u64>)]) -> BoundInput {
    BoundInput::Plain {
        components: components
            .iter()
            .map(|(value, c)| CriticalData { value: *value, complexity: c.map_or(Complexity::UNKNOWN, Complexity::Known) })
            .collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bound(r: &BoundResult) -> u64 {
        r.bound.known().unwrap()
    }

    #[test]
    fn plain_examples() {
        let circle = plain(&[(0.0, Some(1)), (4.0, Some(1))]);
        assert_eq!(bound(&ls_upper_bound(&circle, f64::INFINITY).unwrap()), 2);
        assert_eq!(bound(&ls_upper_bound(&plain(&[(0.0, Some(1))]), f64::INFINITY).unwrap()), 1);
        let mixed = plain(&[(0.0, Some(1)), (4.0, Some(2)), (8.0, Some(1)), (8.0, Some(3))]);
        let res = ls_upper_bound(&mixed, f64::INFINITY).unwrap();
        assert_eq!(bound(&res), 6);
        assert_eq!(res.breakdown.len(), 3);
        assert_eq!(bound(&ls_upper_bound(&mixed, 4.0).unwrap()), 3);
    }

    #[test]
    fn unknown_complexity_is_an_error() {
        let inp = plain(&[(0.0, Some(1)), (4.0, None), (8.0, None)]);
        assert_eq!(ls_upper_bound(&inp, f64::INFINITY), Err(BoundError::UnknownComplexity(vec![1, 2])));
        // above the cut it does not matter
        assert_eq!(bound(&ls_upper_bound(&inp, 1.0).unwrap()), 1);
    }

    #[test]
    fn closed_forms() {
        assert_eq!(bound(&product_spheres_bound(1, 2).unwrap()), 2);
        assert_eq!(bound(&product_spheres_bound(3, 2).unwrap()), 4);
        assert_eq!(bound(&product_spheres_bound(2, 5).unwrap()), 9);
        let ut = unit_tangent_bound(1, 2).unwrap();
        assert_eq!((bound(&ut), ut.exact), (3, Some(true)));
        let ut = unit_tangent_bound(2, 5).unwrap();
        assert_eq!((bound(&ut), ut.exact), (6, Some(true)));
        for r in 2..=8 {
            assert_eq!(unit_tangent_bound(1, r).unwrap().breakdown.len(), r + 1);
        }
    }

    #[test]
    fn reference_table() {
        assert_eq!(reference_tc(&"sphere-even".parse().unwrap(), 2).unwrap(), 3);
        assert_eq!(reference_tc(&"sphere:1".parse().unwrap(), 2).unwrap(), 2);
        assert_eq!(reference_tc(&"product-odd-spheres:2".parse().unwrap(), 3).unwrap(), 5);
        assert!(matches!("torus".parse::<SpaceTag>(), Err(BoundError::UnknownSpace(_))));
    }

    #[test]
    fn json_shapes() {
        let v = serde_json::to_value(unit_tangent_bound(1, 2).unwrap()).unwrap();
        assert_eq!(v["bound"], 3);
        assert_eq!(v["exact"], true);
        let inp: BoundInput = serde_json::from_str(
            r#"{"mode":"plain","components":[{"value":0,"complexity":1},{"value":4,"complexity":"unknown"}]}"#,
        )
        .unwrap();
        assert!(matches!(ls_upper_bound(&inp, f64::INFINITY), Err(BoundError::UnknownComplexity(_))));
    }

    #[test]
    fn table_is_aligned() {
        let t = ls_upper_bound(&plain(&[(0.0, Some(1)), (12.0, Some(10))]), f64::INFINITY).unwrap().table();
        let lens: Vec<usize> = t.lines().take(3).map(str::len).collect();
        assert!(lens.windows(2).all(|w| w[0] == w[1]), "{t}");
    }
}
