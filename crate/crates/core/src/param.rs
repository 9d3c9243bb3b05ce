//! Vertex/edge parametrization of commuting models with positive rates:
//! `p(u, v) = α_u · Γ(class(u, v)) · α_v⁻¹`.
//!
//! `Γ` is constant on translation classes of edges. The class of an edge
//! between `r·e_i + w` and `(r+x)·e_i + w` (with `w` having zero `i`-th
//! coordinate) is `(i, r, x)`.

use std::collections::BTreeMap;
use std::fmt;

use crate::error::{GbdpError, Result};
use crate::lattice::{Grid, GridShape, State};
use crate::model::TransitionModel;

/// Relative tolerance for agreement of path products and class representatives.
pub const CONSISTENCY_RTOL: f64 = 1e-9;

/// Translation class of an edge.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct EdgeClass {
    /// 0-based axis.
    pub axis: usize,
    /// Lower endpoint coordinate along the axis.
    pub offset: usize,
    /// Jump size.
    pub step: usize,
}

impl fmt::Display for EdgeClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "Gamma(dir={},offset={},step={})",
            self.axis + 1,
            self.offset,
            self.step
        )
    }
}

/// All edge classes of a shape with `l1 = l2 = l`, ordered by axis, step, offset.
pub fn edge_classes(shape: &GridShape) -> Result<Vec<EdgeClass>> {
    let l = require_balanced(shape)?;
    let mut out = Vec::new();
    for (axis, &n) in shape.dims().iter().enumerate() {
        for step in 1..=l {
            for offset in 0..=(n - step) {
                out.push(EdgeClass { axis, offset, step });
            }
        }
    }
    Ok(out)
}

fn require_balanced(shape: &GridShape) -> Result<usize> {
    shape.common_jump().ok_or_else(|| {
        GbdpError::Unsupported(format!(
            "needs equal forward and backward jump bounds, got l1 = {}, l2 = {}",
            shape.l1(),
            shape.l2()
        ))
    })
}

/// Class of the edge between two adjacent states; symmetric in its arguments.
pub fn edge_class_of(shape: &GridShape, u: &State, v: &State) -> Result<EdgeClass> {
    let q = shape.q();
    let bad = || GbdpError::Domain(format!("{u} and {v} are not adjacent"));
    if u.coords().len() != q || v.coords().len() != q {
        return Err(bad());
    }
    let grid = Grid::new(shape.clone());
    if !grid.contains(u) || !grid.contains(v) {
        return Err(bad());
    }
    let diff: Vec<usize> = (0..q).filter(|&k| u.coords()[k] != v.coords()[k]).collect();
    if diff.len() != 1 {
        return Err(bad());
    }
    let axis = diff[0];
    let (a, b) = (u.coords()[axis], v.coords()[axis]);
    let step = a.abs_diff(b);
    if step > shape.max_jump() {
        return Err(bad());
    }
    Ok(EdgeClass {
        axis,
        offset: a.min(b),
        step,
    })
}

/// Vertex parameters `α` (grid index order) and edge parameters `Γ`.
#[derive(Debug, Clone, PartialEq)]
pub struct Parametrization {
    shape: GridShape,
    alpha: Vec<f64>,
    gamma: BTreeMap<EdgeClass, f64>,
}

impl Parametrization {
    /// Requires `l1 = l2`, one strictly positive `α` per state and one
    /// non-negative `Γ` per edge class. Zero `Γ` is accepted so that
    /// degenerate inputs reach the operations that reject them.
    pub fn new(shape: GridShape, alpha: Vec<f64>, gamma: BTreeMap<EdgeClass, f64>) -> Result<Self> {
        let classes = edge_classes(&shape)?;
        if alpha.len() != shape.num_states() {
            return Err(GbdpError::Domain(format!(
                "expected {} vertex parameters, got {}",
                shape.num_states(),
                alpha.len()
            )));
        }
        if let Some(k) = alpha.iter().position(|a| !(a.is_finite() && *a > 0.0)) {
            return Err(GbdpError::Domain(format!(
                "vertex parameter {k} is {} (must be positive)",
                alpha[k]
            )));
        }
        if gamma.len() != classes.len() || classes.iter().any(|c| !gamma.contains_key(c)) {
            return Err(GbdpError::Domain(format!(
                "expected exactly {} edge parameters (one per class), got {}",
                classes.len(),
                gamma.len()
            )));
        }
        if let Some((c, g)) = gamma.iter().find(|(_, g)| !(g.is_finite() && **g >= 0.0)) {
            return Err(GbdpError::Domain(format!("{c} = {g} (must be non-negative)")));
        }
        Ok(Self { shape, alpha, gamma })
    }

    /// Same value for every class and unit vertex parameters.
    pub fn uniform(shape: GridShape, gamma: f64) -> Result<Self> {
        let classes = edge_classes(&shape)?;
        let n = shape.num_states();
        Self::new(shape, vec![1.0; n], classes.into_iter().map(|c| (c, gamma)).collect())
    }

    pub fn shape(&self) -> &GridShape {
        &self.shape
    }

    /// Common jump bound `l`.
    pub fn jump(&self) -> usize {
        self.shape.l1()
    }

    pub fn alpha(&self) -> &[f64] {
        &self.alpha
    }

    pub fn gamma(&self) -> &BTreeMap<EdgeClass, f64> {
        &self.gamma
    }

    pub fn gamma_of(&self, class: &EdgeClass) -> f64 {
        self.gamma[class]
    }

    /// Copy with every `α` multiplied by `c`.
    pub fn scale_alpha(&self, c: f64) -> Result<Self> {
        Self::new(
            self.shape.clone(),
            self.alpha.iter().map(|a| a * c).collect(),
            self.gamma.clone(),
        )
    }

    /// Copy with every `Γ` multiplied by `c`.
    pub fn scale_gamma(&self, c: f64) -> Result<Self> {
        Self::new(
            self.shape.clone(),
            self.alpha.clone(),
            self.gamma.iter().map(|(k, g)| (*k, g * c)).collect(),
        )
    }
}

/// `(edge parameter count, vertex parameter count)`.
pub fn param_counts(shape: &GridShape) -> Result<(usize, usize)> {
    Ok((edge_classes(shape)?.len(), shape.num_states()))
}

/// Model with `p(u, v) = α_u Γ(class(u, v)) / α_v` on every directed edge.
pub fn build_model(p: &Parametrization) -> TransitionModel {
    let mut model = TransitionModel::new(p.shape.clone());
    let grid = model.grid().clone();
    for u in 0..grid.len() {
        let cu = grid.state(u).coords();
        for (v, axis, step) in grid.out_edges(u) {
            let a = cu[axis];
            let class = EdgeClass {
                axis,
                offset: if step > 0 { a } else { a - step.unsigned_abs() },
                step: step.unsigned_abs(),
            };
            model.insert_index(u, v, p.gamma[&class] * (p.alpha[u] / p.alpha[v]));
        }
    }
    model
}

fn rel_diff(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs())
}

/// Product of `p(u_r, u_{r+1}) / p(u_{r+1}, u_r)` along a path of states.
pub fn path_product(model: &TransitionModel, path: &[State]) -> Result<f64> {
    let grid = model.grid();
    let mut beta = 1.0;
    for w in path.windows(2) {
        let (a, b) = match (grid.index_of(&w[0]), grid.index_of(&w[1])) {
            (Some(a), Some(b)) => (a, b),
            _ => return Err(GbdpError::Domain(format!("path leaves the grid at {} -> {}", w[0], w[1]))),
        };
        let (fwd, back) = (model.prob(a, b), model.prob(b, a));
        if !(fwd > 0.0 && back > 0.0) {
            return Err(GbdpError::Positivity(format!("zero rate on {} <-> {}", w[0], w[1])));
        }
        beta *= fwd / back;
    }
    Ok(beta)
}

/// Reversible measure `β` with `β_0 = 1`, built from unit-step path products.
///
/// Each state is reached from every predecessor `u − e_k` and all the
/// resulting values must agree; a disagreement means no such measure exists.
pub fn reversible_measure(model: &TransitionModel) -> Result<Vec<f64>> {
    let grid = model.grid();
    let q = grid.shape().q();
    let n = grid.len();
    for u in 0..n {
        for (v, _, _) in grid.out_edges(u) {
            if !(model.prob(u, v) > 0.0) {
                return Err(GbdpError::Positivity(format!(
                    "p({}, {}) = {}",
                    grid.state(u),
                    grid.state(v),
                    model.prob(u, v)
                )));
            }
        }
    }
    let mut beta = vec![f64::NAN; n];
    beta[0] = 1.0;
    // Lexicographic order visits u − e_k before u.
    for u in 1..n {
        let mut first: Option<(usize, f64)> = None;
        for k in 0..q {
            let Some(prev) = grid.neighbor(u, k, -1) else { continue };
            let value = beta[prev] * model.prob(prev, u) / model.prob(u, prev);
            match first {
                None => first = Some((prev, value)),
                Some((p0, v0)) => {
                    if rel_diff(v0, value) > CONSISTENCY_RTOL {
                        return Err(GbdpError::Consistency(format!(
                            "path products to {} disagree: {v0} via {} vs {value} via {}",
                            grid.state(u),
                            grid.state(p0),
                            grid.state(prev)
                        )));
                    }
                }
            }
        }
        beta[u] = first.expect("every non-origin state has a predecessor").1;
    }
    Ok(beta)
}

/// Recover `α` (with `α_0 = 1`) and `Γ` from a positive commuting model.
pub fn recover_params(model: &TransitionModel) -> Result<Parametrization> {
    let shape = model.shape().clone();
    require_balanced(&shape)?;
    let beta = reversible_measure(model)?;
    let alpha: Vec<f64> = beta.iter().map(|b| b.powf(-0.5)).collect();
    let grid = model.grid();
    let mut gamma: BTreeMap<EdgeClass, (f64, State, State)> = BTreeMap::new();
    for u in 0..grid.len() {
        for (v, _, _) in grid.out_edges(u) {
            let (su, sv) = (grid.state(u), grid.state(v));
            let class = edge_class_of(&shape, su, sv)?;
            let g = model.prob(u, v) * alpha[v] / alpha[u];
            match gamma.get(&class) {
                None => {
                    gamma.insert(class, (g, su.clone(), sv.clone()));
                }
                Some((g0, a, b)) => {
                    if rel_diff(*g0, g) > CONSISTENCY_RTOL {
                        return Err(GbdpError::Consistency(format!(
                            "{class} differs across representatives: {g0} on {a}->{b} vs {g} on {su}->{sv}"
                        )));
                    }
                }
            }
        }
    }
    Parametrization::new(
        shape,
        alpha,
        gamma.into_iter().map(|(k, (g, _, _))| (k, g)).collect(),
    )
}

#[derive(Debug, Clone, PartialEq)]
pub struct BalanceCheck {
    pub holds: bool,
    /// Largest `|β_u p(u,v) − β_v p(v,u)|`.
    pub worst: f64,
    pub worst_edge: Option<(State, State)>,
}

/// Check `β_u p(u,v) = β_v p(v,u)` on every edge.
pub fn detailed_balance_check(model: &TransitionModel, beta: &[f64], tol: f64) -> Result<BalanceCheck> {
    let grid = model.grid();
    if beta.len() != grid.len() {
        return Err(GbdpError::Domain(format!(
            "measure has {} entries, grid has {} states",
            beta.len(),
            grid.len()
        )));
    }
    if let Some(k) = beta.iter().position(|b| !(*b > 0.0)) {
        return Err(GbdpError::Domain(format!("measure is not positive at {}", grid.state(k))));
    }
    let mut worst = 0.0;
    let mut worst_edge = None;
    for u in 0..grid.len() {
        for v in 0..grid.len() {
            if u < v && grid.adjacent(u, v) {
                let gap = (beta[u] * model.prob(u, v) - beta[v] * model.prob(v, u)).abs();
                if gap > worst {
                    worst = gap;
                    worst_edge = Some((grid.state(u).clone(), grid.state(v).clone()));
                }
            }
        }
    }
    Ok(BalanceCheck {
        holds: worst <= tol,
        worst,
        worst_edge,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::commute::commutes_direct;

    fn shape(dims: &[usize], l: usize) -> GridShape {
        GridShape::balanced(dims.to_vec(), l).unwrap()
    }

    /// Parametrization with h = (h1,h2,h3), v = (v1,v2,v3) on the 3×3 grid, l = 2.
    fn hv_params(h: [f64; 3], v: [f64; 3], b: Vec<f64>) -> Parametrization {
        let s = shape(&[2, 2], 2);
        let mut gamma = BTreeMap::new();
        for (axis, vals) in [(0, h), (1, v)] {
            gamma.insert(EdgeClass { axis, offset: 0, step: 1 }, vals[0]);
            gamma.insert(EdgeClass { axis, offset: 1, step: 1 }, vals[1]);
            gamma.insert(EdgeClass { axis, offset: 0, step: 2 }, vals[2]);
        }
        Parametrization::new(s, b, gamma).unwrap()
    }

    #[test]
    fn class_of_long_horizontal_jump() {
        let s = shape(&[2, 2], 2);
        let c = edge_class_of(&s, &State::from([0, 1]), &State::from([2, 1])).unwrap();
        assert_eq!(c, EdgeClass { axis: 0, offset: 0, step: 2 });
        assert_eq!(edge_class_of(&s, &State::from([2, 1]), &State::from([0, 1])).unwrap(), c);
        assert!(matches!(
            edge_class_of(&s, &State::from([0, 0]), &State::from([1, 1])),
            Err(GbdpError::Domain(_))
        ));
        assert!(matches!(
            edge_class_of(&s, &State::from([0, 0]), &State::from([0, 0])),
            Err(GbdpError::Domain(_))
        ));
    }

    #[test]
    fn class_counts_per_direction() {
        let classes = edge_classes(&shape(&[3, 3], 2)).unwrap();
        assert_eq!(classes.iter().filter(|c| c.axis == 0).count(), 5);
    }

    #[test]
    fn counts() {
        assert_eq!(param_counts(&shape(&[2, 2], 2)).unwrap(), (6, 9));
        assert_eq!(param_counts(&shape(&[5], 1)).unwrap(), (5, 6));
        assert_eq!(param_counts(&shape(&[3, 4, 2], 2)).unwrap(), (15, 60));
        let lop = GridShape::new(vec![2, 2], 2, 1).unwrap();
        assert!(matches!(param_counts(&lop), Err(GbdpError::Unsupported(_))));
    }

    #[test]
    fn constant_parametrization() {
        let p = Parametrization::uniform(shape(&[2, 2], 2), 0.1).unwrap();
        let m = build_model(&p);
        assert_eq!(m.entries().count(), 36);
        assert!(m.entries().all(|(_, v)| v == 0.1));
        assert!(commutes_direct(&m, 0, 1, 1e-12).unwrap().commutes);
    }

    #[test]
    fn named_entries_of_three_by_three() {
        let b: Vec<f64> = (0..9).map(|k| 1.0 + 0.1 * k as f64).collect();
        let p = hv_params([0.11, 0.12, 0.13], [0.21, 0.22, 0.23], b.clone());
        let m = build_model(&p);
        let s = |i: usize, j: usize| State::from([i, j]);
        let bij = |i: usize, j: usize| b[3 * i + j];
        // r_{0,0}(1) = h1 b00 / b10
        assert_eq!(m.prob_between(&s(0, 0), &s(1, 0)), 0.11 * (bij(0, 0) / bij(1, 0)));
        // u_{2,0}(2) = v3 b20 / b22
        assert_eq!(m.prob_between(&s(2, 0), &s(2, 2)), 0.23 * (bij(2, 0) / bij(2, 2)));
        // l_{2,1}(1) = h2 b21 / b11
        assert_eq!(m.prob_between(&s(2, 1), &s(1, 1)), 0.12 * (bij(2, 1) / bij(1, 1)));
    }

    #[test]
    fn symmetric_model_has_uniform_measure() {
        let p = Parametrization::uniform(shape(&[2, 3], 2), 0.07).unwrap();
        let p = p.scale_gamma(1.5).unwrap();
        let m = build_model(&p);
        let rec = recover_params(&m).unwrap();
        assert!(rec.alpha().iter().all(|&a| a == 1.0));
        for (c, g) in rec.gamma() {
            assert!((g - p.gamma_of(c)).abs() < 1e-15);
        }
    }

    #[test]
    fn one_dimensional_measure() {
        let mut m = TransitionModel::new(shape(&[2], 1));
        m.insert(&State::from([0]), &State::from([1]), 0.5);
        m.insert(&State::from([1]), &State::from([0]), 0.3);
        m.insert(&State::from([1]), &State::from([2]), 0.6);
        m.insert(&State::from([2]), &State::from([1]), 0.4);
        let beta = reversible_measure(&m).unwrap();
        assert_eq!(beta[0], 1.0);
        assert!((beta[1] - 0.5 / 0.3).abs() < 1e-15);
        assert!((beta[2] - 2.5).abs() < 1e-15);
    }

    #[test]
    fn zero_rate_refused() {
        let p = Parametrization::uniform(shape(&[2, 2], 1), 0.1).unwrap();
        let mut m = build_model(&p);
        m.insert(&State::from([1, 1]), &State::from([1, 2]), 0.0);
        assert!(matches!(recover_params(&m), Err(GbdpError::Positivity(_))));
    }

    #[test]
    fn perturbed_model_is_inconsistent() {
        let p = Parametrization::uniform(shape(&[2, 2], 1), 0.1).unwrap();
        let mut m = build_model(&p);
        m.insert(&State::from([1, 1]), &State::from([1, 2]), 0.2);
        assert!(matches!(recover_params(&m), Err(GbdpError::Consistency(_))));
    }

    #[test]
    fn unequal_bounds_refused() {
        let m = TransitionModel::new(GridShape::new(vec![2, 2], 2, 1).unwrap());
        assert!(matches!(recover_params(&m), Err(GbdpError::Unsupported(_))));
    }

    #[test]
    fn gauge_scaling_by_power_of_two_is_exact() {
        let b: Vec<f64> = (0..9).map(|k| 0.5 + 0.37 * k as f64).collect();
        let p = hv_params([0.11, 0.12, 0.13], [0.21, 0.22, 0.23], b);
        let m1 = build_model(&p);
        let m2 = build_model(&p.scale_alpha(8.0).unwrap());
        assert!(m1.entries().zip(m2.entries()).all(|(a, b)| a == b));
    }

    #[test]
    fn cyclic_bias_breaks_detailed_balance() {
        // Clockwise drift around the unit square.
        let s = shape(&[1, 1], 1);
        let mut m = TransitionModel::new(s);
        let cycle = [[0, 0], [1, 0], [1, 1], [0, 1]];
        for k in 0..4 {
            let (a, b) = (State::from(cycle[k]), State::from(cycle[(k + 1) % 4]));
            m.insert(&a, &b, 0.4);
            m.insert(&b, &a, 0.1);
        }
        assert!(matches!(reversible_measure(&m), Err(GbdpError::Consistency(_))));
        let via_right = path_product(&m, &[State::from([0, 0]), State::from([1, 0]), State::from([1, 1])]).unwrap();
        let via_up = path_product(&m, &[State::from([0, 0]), State::from([0, 1]), State::from([1, 1])]).unwrap();
        assert!(via_right != via_up);
        for beta in [vec![1.0; 4], vec![1.0, 4.0, 16.0, 0.25]] {
            let c = detailed_balance_check(&m, &beta, 1e-12).unwrap();
            assert!(!c.holds && c.worst > 0.0);
        }
    }

    #[test]
    fn uniform_balance_for_symmetric_model() {
        let m = build_model(&Parametrization::uniform(shape(&[3, 2], 2), 0.05).unwrap());
        let c = detailed_balance_check(&m, &[1.0; 12], 1e-15).unwrap();
        assert!(c.holds);
        assert_eq!(c.worst, 0.0);
    }
}
