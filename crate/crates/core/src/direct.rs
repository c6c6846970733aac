//! DIRECT (DIviding RECTangles) global minimization over a box.
//!
//! The search runs on the unit cube. Each rectangle stores its center, the
//! objective value there, and one integer level per dimension: the side along
//! dimension `d` is `3^-level[d]`. Every iteration selects the potentially
//! optimal rectangles and trisects each along its longest sides.

use serde::{Deserialize, Serialize};

use crate::error::{check_dims, Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchBox {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl SearchBox {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        let b = Self { lower, upper };
        b.validate()?;
        Ok(b)
    }

    /// `[lo, hi]` in every one of `dim` dimensions.
    pub fn cube(dim: usize, lo: f64, hi: f64) -> Result<Self> {
        Self::new(vec![lo; dim], vec![hi; dim])
    }

    pub fn validate(&self) -> Result<()> {
        check_dims("search box upper bound", self.lower.len(), self.upper.len())?;
        if self.lower.is_empty() {
            return Err(Error::InvalidArgument("search box has no dimensions".into()));
        }
        for (l, u) in self.lower.iter().zip(&self.upper) {
            if !(l.is_finite() && u.is_finite() && l < u) {
                return Err(Error::InvalidArgument(format!(
                    "empty or unbounded search interval [{l}, {u}]"
                )));
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn center(&self) -> Vec<f64> {
        self.lower.iter().zip(&self.upper).map(|(l, u)| 0.5 * (l + u)).collect()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dim()
            && x.iter()
                .zip(self.lower.iter().zip(&self.upper))
                .all(|(v, (l, u))| *v >= *l && *v <= *u)
    }

    pub fn from_unit(&self, u: &[f64]) -> Vec<f64> {
        u.iter()
            .zip(self.lower.iter().zip(&self.upper))
            .map(|(t, (l, h))| (l + t * (h - l)).clamp(*l, *h))
            .collect()
    }

    pub fn clamp(&self, x: &mut [f64]) {
        for (v, (l, u)) in x.iter_mut().zip(self.lower.iter().zip(&self.upper)) {
            *v = v.clamp(*l, *u);
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DirectConfig {
    pub budget: usize,
    pub epsilon: f64,
}

impl Default for DirectConfig {
    fn default() -> Self {
        Self {
            budget: 200,
            epsilon: 1e-4,
        }
    }
}

/// A hyperrectangle of the DIRECT partition, in unit-cube coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct DirectRect {
    pub center: Vec<f64>,
    pub f_center: f64,
    /// Side along dimension `d` is `3^-side_levels[d]`.
    pub side_levels: Vec<u32>,
    /// Half the diagonal.
    pub diameter: f64,
    /// Creation order; breaks ties between otherwise equal rectangles.
    pub index: usize,
}

impl DirectRect {
    fn new(center: Vec<f64>, f_center: f64, side_levels: Vec<u32>, index: usize) -> Self {
        let diameter = diameter_of(&side_levels);
        Self {
            center,
            f_center,
            side_levels,
            diameter,
            index,
        }
    }

    pub fn volume(&self) -> f64 {
        self.side_levels.iter().map(|k| 3f64.powi(-(*k as i32))).product()
    }

    pub fn side(&self, d: usize) -> f64 {
        3f64.powi(-(self.side_levels[d] as i32))
    }

    /// Strict interior membership.
    pub fn contains_interior(&self, u: &[f64]) -> bool {
        u.iter()
            .enumerate()
            .all(|(d, v)| (v - self.center[d]).abs() < 0.5 * self.side(d))
    }
}

/// Half-diagonal, summed in a canonical order so rectangles with the same
/// multiset of levels get bitwise-equal diameters.
fn diameter_of(levels: &[u32]) -> f64 {
    let mut sorted = levels.to_vec();
    sorted.sort_unstable();
    0.5 * sorted.iter().map(|k| 9f64.powi(-(*k as i32))).sum::<f64>().sqrt()
}

/// Indices (into `rects`) of the potentially optimal rectangles: the lower
/// right convex hull of the (diameter, value) cloud, filtered by the
/// `f - K d <= f_min - epsilon |f_min|` sufficient-decrease condition.
///
/// Among rectangles sharing a diameter only the lowest value is a candidate,
/// oldest first on ties. Never empty for non-empty input.
pub fn potentially_optimal(rects: &[DirectRect], f_min: f64, epsilon: f64) -> Vec<usize> {
    if rects.is_empty() {
        return Vec::new();
    }
    // per-diameter minimum
    let mut order: Vec<usize> = (0..rects.len()).collect();
    order.sort_by(|&a, &b| {
        let (ra, rb) = (&rects[a], &rects[b]);
        ra.diameter
            .total_cmp(&rb.diameter)
            .then(ra.f_center.total_cmp(&rb.f_center))
            .then(ra.index.cmp(&rb.index))
    });
    let mut cand: Vec<usize> = Vec::new();
    for i in order {
        match cand.last() {
            Some(&last) if rects[last].diameter == rects[i].diameter => {}
            _ => cand.push(i),
        }
    }

    // rightmost candidate attaining the minimum value
    let lowest = cand.iter().map(|&i| rects[i].f_center).fold(f64::INFINITY, f64::min);
    let start = cand
        .iter()
        .rposition(|&i| rects[i].f_center == lowest)
        .expect("non-empty candidates");

    let pt = |i: usize| (rects[i].diameter, rects[i].f_center);
    let mut hull: Vec<usize> = Vec::new();
    for &i in &cand[start..] {
        let p = pt(i);
        while hull.len() >= 2 {
            let a = pt(hull[hull.len() - 2]);
            let b = pt(hull[hull.len() - 1]);
            let cross = (b.0 - a.0) * (p.1 - a.1) - (b.1 - a.1) * (p.0 - a.0);
            if cross < 0.0 {
                hull.pop();
            } else {
                break;
            }
        }
        hull.push(i);
    }

    let threshold = f_min - epsilon * f_min.abs();
    let mut chosen: Vec<usize> = hull
        .iter()
        .enumerate()
        .filter(|(h, &i)| {
            let (d, f) = pt(i);
            match hull.get(h + 1) {
                None => true,
                Some(&next) => {
                    let (dn, fnext) = pt(next);
                    let k_max = (fnext - f) / (dn - d);
                    f - k_max * d <= threshold
                }
            }
        })
        .map(|(_, &i)| i)
        .collect();
    if chosen.is_empty() {
        chosen.push(cand[start]);
    }
    chosen
}

#[derive(Debug, Clone)]
pub struct DirectResult {
    pub best_point: Vec<f64>,
    pub best_value: f64,
    pub eval_count: usize,
    /// Every evaluation, in order, in box coordinates.
    pub evaluations: Vec<(Vec<f64>, f64)>,
}

/// Stepwise DIRECT state, for callers that want to look at the partition.
pub struct Direct<F> {
    objective: F,
    bounds: SearchBox,
    config: DirectConfig,
    rects: Vec<DirectRect>,
    evaluations: Vec<(Vec<f64>, f64)>,
    best: Option<usize>,
    max_finite: f64,
    exhausted: bool,
}

impl<F: FnMut(&[f64]) -> f64> Direct<F> {
    /// Validates inputs and evaluates the box center.
    pub fn new(objective: F, bounds: SearchBox, config: DirectConfig) -> Result<Self> {
        bounds.validate()?;
        if config.budget == 0 {
            return Err(Error::InvalidArgument("DIRECT budget must be at least 1".into()));
        }
        if !(config.epsilon >= 0.0) {
            return Err(Error::InvalidArgument(format!(
                "epsilon must be non-negative, got {}",
                config.epsilon
            )));
        }
        let dim = bounds.dim();
        let mut direct = Self {
            objective,
            bounds,
            config,
            rects: Vec::new(),
            evaluations: Vec::new(),
            best: None,
            max_finite: f64::NEG_INFINITY,
            exhausted: false,
        };
        let center = vec![0.5; dim];
        let f = direct.evaluate(&center);
        direct.rects.push(DirectRect::new(center, f, vec![0; dim], 0));
        Ok(direct)
    }

    fn evaluate(&mut self, unit: &[f64]) -> f64 {
        let x = self.bounds.from_unit(unit);
        let raw = (self.objective)(&x);
        let f = if raw.is_finite() { raw } else { f64::INFINITY };
        if f.is_finite() {
            self.max_finite = self.max_finite.max(f);
            let better = match self.best {
                None => true,
                Some(b) => f < self.evaluations[b].1,
            };
            if better {
                self.best = Some(self.evaluations.len());
            }
        }
        self.evaluations.push((x, f));
        f
    }

    fn remaining(&self) -> usize {
        self.config.budget - self.evaluations.len()
    }

    /// Selection value: non-finite evaluations count as the worst finite one.
    fn selection_value(&self, f: f64) -> f64 {
        if f.is_finite() {
            f
        } else if self.max_finite.is_finite() {
            self.max_finite
        } else {
            0.0
        }
    }

    pub fn rects(&self) -> &[DirectRect] {
        &self.rects
    }

    pub fn eval_count(&self) -> usize {
        self.evaluations.len()
    }

    pub fn is_exhausted(&self) -> bool {
        self.exhausted || self.remaining() < 2
    }

    /// One DIRECT iteration. Returns false once the budget cannot pay for
    /// another trisection.
    pub fn step(&mut self) -> bool {
        if self.is_exhausted() {
            return false;
        }
        let view: Vec<DirectRect> = self
            .rects
            .iter()
            .map(|r| DirectRect {
                f_center: self.selection_value(r.f_center),
                ..r.clone()
            })
            .collect();
        let f_min = view.iter().map(|r| r.f_center).fold(f64::INFINITY, f64::min);
        let mut selected = potentially_optimal(&view, f_min, self.config.epsilon);
        selected.sort_unstable();
        let mut divided_any = false;
        for i in selected {
            if self.remaining() < 2 {
                self.exhausted = true;
                break;
            }
            self.divide(i);
            divided_any = true;
        }
        divided_any
    }

    fn divide(&mut self, i: usize) {
        let parent = self.rects[i].clone();
        let k_min = *parent.side_levels.iter().min().expect("non-empty");
        let mut dims: Vec<usize> = (0..parent.side_levels.len())
            .filter(|&d| parent.side_levels[d] == k_min)
            .collect();
        dims.truncate(self.remaining() / 2);
        let delta = 3f64.powi(-(k_min as i32 + 1));

        let mut samples = Vec::with_capacity(dims.len());
        for &d in &dims {
            let mut lo = parent.center.clone();
            lo[d] -= delta;
            let mut hi = parent.center.clone();
            hi[d] += delta;
            let f_lo = self.evaluate(&lo);
            let f_hi = self.evaluate(&hi);
            let w = self.selection_value(f_lo).min(self.selection_value(f_hi));
            samples.push((d, w, lo, f_lo, hi, f_hi));
        }
        // best sampled direction keeps the largest new boxes; stable on index
        samples.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));

        let mut levels = parent.side_levels;
        for (d, _, lo, f_lo, hi, f_hi) in samples {
            levels[d] += 1;
            let next = self.rects.len();
            self.rects.push(DirectRect::new(lo, f_lo, levels.clone(), next));
            self.rects.push(DirectRect::new(hi, f_hi, levels.clone(), next + 1));
        }
        let r = &mut self.rects[i];
        r.diameter = diameter_of(&levels);
        r.side_levels = levels;
    }

    pub fn best(&self) -> Option<(&[f64], f64)> {
        self.best
            .map(|b| (self.evaluations[b].0.as_slice(), self.evaluations[b].1))
    }

    pub fn finish(self) -> Result<DirectResult> {
        let Some(b) = self.best else {
            return Err(Error::Optimization(format!(
                "objective was non-finite at all {} evaluated points",
                self.evaluations.len()
            )));
        };
        let (best_point, best_value) = self.evaluations[b].clone();
        Ok(DirectResult {
            best_point,
            best_value,
            eval_count: self.evaluations.len(),
            evaluations: self.evaluations,
        })
    }
}

/// Minimizes `objective` over `bounds` with at most `config.budget`
/// evaluations. The box center is always evaluated first, and the incumbent
/// only changes on strict improvement.
pub fn direct_minimize<F>(objective: F, bounds: &SearchBox, config: DirectConfig) -> Result<DirectResult>
where
    F: FnMut(&[f64]) -> f64,
{
    let mut direct = Direct::new(objective, bounds.clone(), config)?;
    while direct.step() {}
    direct.finish()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn rect(diameter: f64, f: f64, index: usize) -> DirectRect {
        DirectRect {
            center: vec![0.5],
            f_center: f,
            side_levels: vec![0],
            diameter,
            index,
        }
    }

    /// Checks the defining inequalities directly: some K >= 0 with
    /// f_j - K d_j <= f_i - K d_i for all i and the epsilon condition.
    fn oracle(rects: &[DirectRect], f_min: f64, eps: f64) -> Vec<usize> {
        let mut out = Vec::new();
        for (j, r) in rects.iter().enumerate() {
            let mut k_lo: f64 = 0.0;
            let mut k_hi = f64::INFINITY;
            let mut ok = true;
            for (i, o) in rects.iter().enumerate() {
                if i == j {
                    continue;
                }
                if o.diameter < r.diameter {
                    k_lo = k_lo.max((r.f_center - o.f_center) / (r.diameter - o.diameter));
                } else if o.diameter > r.diameter {
                    k_hi = k_hi.min((o.f_center - r.f_center) / (o.diameter - r.diameter));
                } else if o.f_center < r.f_center || (o.f_center == r.f_center && o.index < r.index) {
                    ok = false;
                }
            }
            let k_eps = (r.f_center - f_min + eps * f_min.abs()) / r.diameter;
            if ok && k_lo.max(k_eps) <= k_hi {
                out.push(j);
            }
        }
        out
    }

    #[test]
    fn singleton() {
        let rs = vec![rect(0.5, 3.0, 0)];
        assert_eq!(potentially_optimal(&rs, 3.0, 1e-4), vec![0]);
    }

    #[test]
    fn equal_diameter_keeps_lower() {
        let rs = vec![rect(0.3, 2.0, 0), rect(0.3, 1.0, 1)];
        assert_eq!(potentially_optimal(&rs, 1.0, 1e-4), vec![1]);
    }

    #[test]
    fn handcrafted_matches_oracle() {
        let rs = vec![
            rect(0.05, 1.0, 0),
            rect(0.1, 1.4, 1),
            rect(0.2, 1.3, 2),
            rect(0.3, 3.0, 3),
            rect(0.4, 2.0, 4),
        ];
        let mut got = potentially_optimal(&rs, 1.0, 1e-4);
        got.sort();
        assert_eq!(got, oracle(&rs, 1.0, 1e-4));
        assert_eq!(got, vec![0, 2, 4]);
    }

    proptest! {
        #[test]
        fn hull_matches_inequality_oracle(
            pts in prop::collection::vec((0usize..6, -5.0..5.0f64), 1..14),
            eps in prop_oneof![Just(0.0), Just(1e-4), Just(1e-2)],
        ) {
            let rs: Vec<DirectRect> = pts.iter().enumerate()
                .map(|(i, (k, f))| rect(0.5 * 3f64.powi(-(*k as i32)), *f, i)).collect();
            let f_min = rs.iter().map(|r| r.f_center).fold(f64::INFINITY, f64::min);
            let mut got = potentially_optimal(&rs, f_min, eps);
            got.sort();
            let want = oracle(&rs, f_min, eps);
            if want.is_empty() {
                prop_assert_eq!(got.len(), 1);
            } else {
                prop_assert_eq!(got, want);
            }
        }
    }

    #[test]
    fn constant_objective() {
        let b = SearchBox::new(vec![-1.0, 3.0], vec![2.0, 4.0]).unwrap();
        let r = direct_minimize(
            |_| 3.0,
            &b,
            DirectConfig {
                budget: 10,
                epsilon: 1e-4,
            },
        )
        .unwrap();
        assert_eq!(r.best_value, 3.0);
        assert_eq!(r.best_point, b.center());
        assert!(r.eval_count <= 10);
    }

    #[test]
    fn budget_one_evaluates_center_only() {
        let b = SearchBox::cube(3, -1.0, 1.0).unwrap();
        let r = direct_minimize(
            |x| x[0],
            &b,
            DirectConfig {
                budget: 1,
                epsilon: 1e-4,
            },
        )
        .unwrap();
        assert_eq!(r.eval_count, 1);
        assert_eq!(r.best_point, vec![0.0; 3]);
    }

    #[test]
    fn zero_budget_rejected() {
        let b = SearchBox::cube(1, 0.0, 1.0).unwrap();
        assert!(direct_minimize(
            |_| 0.0,
            &b,
            DirectConfig {
                budget: 0,
                epsilon: 1e-4
            }
        )
        .is_err());
    }

    #[test]
    fn all_nonfinite_is_an_error() {
        let b = SearchBox::cube(2, 0.0, 1.0).unwrap();
        let r = direct_minimize(
            |_| f64::NAN,
            &b,
            DirectConfig {
                budget: 20,
                epsilon: 1e-4,
            },
        );
        assert!(matches!(r, Err(Error::Optimization(_))));
    }

    #[test]
    fn nonfinite_regions_are_skipped() {
        let b = SearchBox::cube(2, -1.0, 1.0).unwrap();
        let f = |x: &[f64]| {
            if x[0] < 0.0 {
                f64::INFINITY
            } else {
                (x[0] - 0.5).powi(2) + x[1] * x[1]
            }
        };
        let r = direct_minimize(
            f,
            &b,
            DirectConfig {
                budget: 200,
                epsilon: 1e-4,
            },
        )
        .unwrap();
        assert!(r.best_value < 1e-3);
    }

    #[test]
    fn invalid_box_rejected() {
        assert!(SearchBox::new(vec![1.0], vec![1.0]).is_err());
        assert!(SearchBox::new(vec![0.0, 0.0], vec![1.0]).is_err());
    }

    #[test]
    fn splits_longest_side_lowest_index_first() {
        // one dimension left at the coarsest level gets split alone
        let b = SearchBox::cube(2, 0.0, 1.0).unwrap();
        let mut d = Direct::new(
            |x: &[f64]| x[0] + x[1],
            b,
            DirectConfig {
                budget: 100,
                epsilon: 0.0,
            },
        )
        .unwrap();
        while !d.is_exhausted() {
            let before: Vec<DirectRect> = d.rects().to_vec();
            if !d.step() {
                break;
            }
            for (old, new) in before.iter().zip(d.rects()) {
                if old.side_levels != new.side_levels {
                    let k_min = *old.side_levels.iter().min().unwrap();
                    for dd in 0..old.side_levels.len() {
                        if new.side_levels[dd] != old.side_levels[dd] {
                            assert_eq!(old.side_levels[dd], k_min);
                        }
                    }
                }
            }
        }
    }
}
