//! Transition probabilities of a generalized birth-death process.
//!
//! Probabilities are stored sparsely, keyed by ordered state pairs. Dense
//! matrices (`P_i`, `D`, `P = Σ P_i + D`) are built on demand.

use std::collections::BTreeMap;
use std::fmt;

use nalgebra::DMatrix;

use crate::error::{GbdpError, Result};
use crate::lattice::{Grid, GridShape, State};

/// Absolute tolerance for row-mass comparisons.
pub const MASS_TOL: f64 = 1e-12;

/// Probability of staying put.
#[derive(Debug, Clone, PartialEq, Default)]
pub enum SelfTransition {
    #[default]
    None,
    /// The same probability at every state (`D = αI`).
    Scalar(f64),
    /// One probability per state, in grid index order.
    PerState(Vec<f64>),
}

/// A model rule that does not hold.
#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    /// A key whose target or source lies outside the grid.
    EdgeExitsGrid { from: State, to: State },
    /// Both endpoints are in the grid but are not one allowed jump apart.
    NotAnEdge { from: State, to: State },
    ProbabilityOutOfRange { from: State, to: State, prob: f64 },
    SelfOutOfRange { state: State, prob: f64 },
    SelfTableLength { expected: usize, found: usize },
    MassExceedsOne { state: State, mass: f64 },
    /// Row mass below one in a model without an absorbing sink.
    MassDeficit { state: State, mass: f64 },
}

impl Violation {
    /// Violations that make the key set itself unusable.
    pub fn is_structural(&self) -> bool {
        matches!(
            self,
            Violation::EdgeExitsGrid { .. }
                | Violation::NotAnEdge { .. }
                | Violation::SelfTableLength { .. }
        )
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::EdgeExitsGrid { from, to } => write!(f, "edge exits grid: {from} -> {to}"),
            Violation::NotAnEdge { from, to } => {
                write!(f, "not a single-axis jump within bounds: {from} -> {to}")
            }
            Violation::ProbabilityOutOfRange { from, to, prob } => {
                write!(f, "probability {prob} outside [0,1] on {from} -> {to}")
            }
            Violation::SelfOutOfRange { state, prob } => {
                write!(f, "self probability {prob} out of range at {state}")
            }
            Violation::SelfTableLength { expected, found } => {
                write!(f, "self table has {found} entries, grid has {expected} states")
            }
            Violation::MassExceedsOne { state, mass } => {
                write!(f, "mass exceeds 1 at {state}: {mass}")
            }
            Violation::MassDeficit { state, mass } => {
                write!(f, "mass below 1 at {state} without absorbing sink: {mass}")
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct TransitionModel {
    grid: Grid,
    probs: BTreeMap<(usize, usize), f64>,
    // Keys with an endpoint outside the grid; kept so `validate` can report them.
    stray: Vec<(State, State, f64)>,
    self_transition: SelfTransition,
    absorbing: bool,
}

impl TransitionModel {
    /// Empty model: no transitions, no self mass, no sink.
    pub fn new(shape: GridShape) -> Self {
        Self {
            grid: Grid::new(shape),
            probs: BTreeMap::new(),
            stray: Vec::new(),
            self_transition: SelfTransition::None,
            absorbing: false,
        }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn shape(&self) -> &GridShape {
        self.grid.shape()
    }

    pub fn self_transition(&self) -> &SelfTransition {
        &self.self_transition
    }

    pub fn absorbing(&self) -> bool {
        self.absorbing
    }

    pub fn set_self(&mut self, s: SelfTransition) {
        self.self_transition = s;
    }

    pub fn set_absorbing(&mut self, absorbing: bool) {
        self.absorbing = absorbing;
    }

    /// Record `p(from, to)`. Keys are not checked here; see [`validate`](Self::validate).
    pub fn insert(&mut self, from: &State, to: &State, prob: f64) {
        match (self.grid.index_of(from), self.grid.index_of(to)) {
            (Some(u), Some(v)) => {
                self.probs.insert((u, v), prob);
            }
            _ => self.stray.push((from.clone(), to.clone(), prob)),
        }
    }

    pub fn insert_index(&mut self, from: usize, to: usize, prob: f64) {
        self.probs.insert((from, to), prob);
    }

    /// `p(u, v)` by index; zero when absent.
    pub fn prob(&self, u: usize, v: usize) -> f64 {
        self.probs.get(&(u, v)).copied().unwrap_or(0.0)
    }

    /// `p(u, v)` by state; zero when absent or off-grid.
    pub fn prob_between(&self, u: &State, v: &State) -> f64 {
        match (self.grid.index_of(u), self.grid.index_of(v)) {
            (Some(a), Some(b)) => self.prob(a, b),
            _ => 0.0,
        }
    }

    /// Stored in-grid entries `((u, v), p)` in index order.
    pub fn entries(&self) -> impl Iterator<Item = ((usize, usize), f64)> + '_ {
        self.probs.iter().map(|(&k, &p)| (k, p))
    }

    /// Stored keys with an endpoint outside the grid.
    pub fn stray_entries(&self) -> &[(State, State, f64)] {
        &self.stray
    }

    pub fn self_prob(&self, u: usize) -> f64 {
        match &self.self_transition {
            SelfTransition::None => 0.0,
            SelfTransition::Scalar(a) => *a,
            SelfTransition::PerState(d) => d.get(u).copied().unwrap_or(0.0),
        }
    }

    /// Total outgoing mass of a state, self mass included.
    pub fn row_mass(&self, u: usize) -> f64 {
        let moves: f64 = self
            .probs
            .range((u, 0)..(u + 1, 0))
            .filter(|(&(a, b), _)| self.grid.edge_between(a, b).is_some())
            .map(|(_, &p)| p)
            .sum();
        moves + self.self_prob(u)
    }

    /// `1 − row mass` per state: what an absorbing sink would receive.
    pub fn residual_mass(&self) -> Vec<f64> {
        (0..self.grid.len()).map(|u| 1.0 - self.row_mass(u)).collect()
    }

    /// Outgoing jumps of a state as `(target, probability)`, valid edges only.
    pub fn moves(&self, u: usize) -> Vec<(usize, f64)> {
        self.probs
            .range((u, 0)..(u + 1, 0))
            .filter(|(&(a, b), _)| self.grid.edge_between(a, b).is_some())
            .map(|(&(_, b), &p)| (b, p))
            .collect()
    }

    /// Matrix of jumps along one axis (0-based).
    pub fn directional_matrix(&self, axis: usize) -> Result<DMatrix<f64>> {
        let q = self.shape().q();
        if axis >= q {
            return Err(GbdpError::Domain(format!(
                "direction {} outside 1..={q}",
                axis + 1
            )));
        }
        let n = self.grid.len();
        let mut m = DMatrix::zeros(n, n);
        for (&(u, v), &p) in &self.probs {
            if let Some((a, _)) = self.grid.edge_between(u, v) {
                if a == axis {
                    m[(u, v)] = p;
                }
            }
        }
        Ok(m)
    }

    /// Diagonal self-transition matrix `D`.
    pub fn self_matrix(&self) -> DMatrix<f64> {
        let n = self.grid.len();
        DMatrix::from_fn(n, n, |i, j| if i == j { self.self_prob(i) } else { 0.0 })
    }

    /// `P = Σ_i P_i + D`.
    pub fn full_matrix(&self) -> DMatrix<f64> {
        let mut m = self.self_matrix();
        for (&(u, v), &p) in &self.probs {
            if self.grid.edge_between(u, v).is_some() {
                m[(u, v)] += p;
            }
        }
        m
    }

    /// All rule violations; empty means the model is well formed.
    pub fn validate(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        for (from, to, _) in &self.stray {
            out.push(Violation::EdgeExitsGrid {
                from: from.clone(),
                to: to.clone(),
            });
        }
        for (&(u, v), &p) in &self.probs {
            let (from, to) = (self.grid.state(u).clone(), self.grid.state(v).clone());
            if self.grid.edge_between(u, v).is_none() {
                out.push(Violation::NotAnEdge { from, to });
            } else if !(0.0..=1.0).contains(&p) {
                out.push(Violation::ProbabilityOutOfRange { from, to, prob: p });
            }
        }
        let n = self.grid.len();
        match &self.self_transition {
            SelfTransition::PerState(d) if d.len() != n => {
                out.push(Violation::SelfTableLength {
                    expected: n,
                    found: d.len(),
                });
            }
            _ => {}
        }
        for u in 0..n {
            let a = self.self_prob(u);
            let in_range = match self.self_transition {
                SelfTransition::PerState(_) => (0.0..=1.0).contains(&a),
                _ => (0.0..1.0).contains(&a),
            };
            if !in_range {
                out.push(Violation::SelfOutOfRange {
                    state: self.grid.state(u).clone(),
                    prob: a,
                });
            }
            let mass = self.row_mass(u);
            if mass > 1.0 + MASS_TOL {
                out.push(Violation::MassExceedsOne {
                    state: self.grid.state(u).clone(),
                    mass,
                });
            } else if !self.absorbing && mass < 1.0 - MASS_TOL {
                out.push(Violation::MassDeficit {
                    state: self.grid.state(u).clone(),
                    mass,
                });
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn path3() -> TransitionModel {
        let shape = GridShape::balanced(vec![2], 1).unwrap();
        let mut m = TransitionModel::new(shape);
        m.insert(&State::from([0]), &State::from([1]), 0.5);
        m.insert(&State::from([1]), &State::from([0]), 0.3);
        m.insert(&State::from([1]), &State::from([2]), 0.7);
        m.insert(&State::from([2]), &State::from([1]), 0.4);
        m
    }

    #[test]
    fn tridiagonal_directional_matrix() {
        let p = path3().directional_matrix(0).unwrap();
        let expected = DMatrix::from_row_slice(
            3,
            3,
            &[0.0, 0.5, 0.0, 0.3, 0.0, 0.7, 0.0, 0.4, 0.0],
        );
        assert_eq!(p, expected);
    }

    #[test]
    fn empty_model_gives_zero_matrix() {
        let m = TransitionModel::new(GridShape::balanced(vec![2, 2], 2).unwrap());
        assert_eq!(m.directional_matrix(1).unwrap(), DMatrix::zeros(9, 9));
        assert!(matches!(m.directional_matrix(2), Err(GbdpError::Domain(_))));
    }

    #[test]
    fn scalar_self_only() {
        let mut m = TransitionModel::new(GridShape::balanced(vec![1, 2], 1).unwrap());
        m.set_self(SelfTransition::Scalar(0.25));
        assert_eq!(m.full_matrix(), DMatrix::identity(6, 6) * 0.25);
    }

    #[test]
    fn full_matrix_decomposes() {
        let mut m = TransitionModel::new(GridShape::balanced(vec![2, 1], 1).unwrap());
        let g = m.grid().clone();
        for u in 0..g.len() {
            for (v, axis, step) in g.out_edges(u) {
                m.insert_index(u, v, 0.05 + 0.01 * (axis as f64) + 0.02 * step as f64);
            }
        }
        m.set_self(SelfTransition::PerState((0..g.len()).map(|u| 0.01 * u as f64).collect()));
        let total = m.directional_matrix(0).unwrap() + m.directional_matrix(1).unwrap() + m.self_matrix();
        assert_eq!((m.full_matrix() - total).amax(), 0.0);
    }

    #[test]
    fn mass_violation_reported() {
        let mut m = path3();
        m.insert(&State::from([0]), &State::from([1]), 1.01);
        let v = m.validate();
        assert!(v.iter().any(|x| x.to_string().starts_with("mass exceeds 1 at (0)")), "{v:?}");
    }

    #[test]
    fn off_grid_edge_reported() {
        let mut m = TransitionModel::new(GridShape::balanced(vec![2, 2], 1).unwrap());
        m.set_absorbing(true);
        m.insert(&State::from([2, 0]), &State::from([3, 0]), 0.2);
        let v = m.validate();
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].to_string(), "edge exits grid: (2,0) -> (3,0)");
        assert!(v[0].is_structural());
    }

    #[test]
    fn non_edge_reported() {
        let mut m = TransitionModel::new(GridShape::balanced(vec![2, 2], 1).unwrap());
        m.set_absorbing(true);
        m.insert(&State::from([0, 0]), &State::from([1, 1]), 0.2);
        m.insert(&State::from([0, 0]), &State::from([2, 0]), 0.2);
        assert_eq!(m.validate().len(), 2);
        assert_eq!(m.full_matrix().sum(), 0.0);
    }

    #[test]
    fn absorbing_residuals() {
        let mut m = path3();
        assert!(m.validate().iter().all(|v| matches!(v, Violation::MassDeficit { .. })));
        m.set_absorbing(true);
        assert!(m.validate().is_empty());
        let r = m.residual_mass();
        assert!((r[0] - 0.5).abs() < 1e-15 && r[1].abs() < 1e-15 && (r[2] - 0.6).abs() < 1e-15);
        assert!(r.iter().all(|&x| x >= 0.0));
    }
}
