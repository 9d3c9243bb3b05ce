//! Finite q-dimensional grids `{0..n_1} × … × {0..n_q}` with bounded
//! single-axis jumps.
//!
//! States are indexed lexicographically with the last coordinate varying
//! fastest, so on a 3×3 grid the order is `(0,0), (0,1), (0,2), (1,0), …`.
//! Every matrix produced by this crate uses that order.
//!
//! Axes are 0-based in the API. Text output (descriptors, files) numbers
//! directions from 1.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::algebra::IntMatrix;
use crate::error::{GbdpError, Result};

/// Grid dimensions and jump bounds.
///
/// Coordinate `i` ranges over `0..=dims[i]`. Forward jumps along any axis
/// have size at most `l1`, backward jumps at most `l2`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct GridShape {
    dims: Vec<usize>,
    l1: usize,
    l2: usize,
}

impl GridShape {
    /// Requires `q ≥ 1`, every `n_i ≥ 1`, `l1, l2 ≥ 1` and
    /// `max(l1, l2) ≤ min(n_i)`.
    pub fn new(dims: Vec<usize>, l1: usize, l2: usize) -> Result<Self> {
        if dims.is_empty() {
            return Err(GbdpError::Shape("q must be at least 1".into()));
        }
        if let Some(i) = dims.iter().position(|&n| n == 0) {
            return Err(GbdpError::Shape(format!(
                "n_{} = 0; every coordinate needs at least two values",
                i + 1
            )));
        }
        if l1 == 0 || l2 == 0 {
            return Err(GbdpError::Shape(format!(
                "jump bounds must be positive (l1 = {l1}, l2 = {l2})"
            )));
        }
        let min_n = *dims.iter().min().expect("non-empty");
        if l1.max(l2) > min_n {
            return Err(GbdpError::Shape(format!(
                "max(l1, l2) = {} exceeds min(n_i) = {min_n}",
                l1.max(l2)
            )));
        }
        Ok(Self { dims, l1, l2 })
    }

    /// Shape with equal forward and backward bounds.
    pub fn balanced(dims: Vec<usize>, l: usize) -> Result<Self> {
        Self::new(dims, l, l)
    }

    pub fn q(&self) -> usize {
        self.dims.len()
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn l1(&self) -> usize {
        self.l1
    }

    pub fn l2(&self) -> usize {
        self.l2
    }

    pub fn max_jump(&self) -> usize {
        self.l1.max(self.l2)
    }

    /// `Some(l)` when `l1 == l2 == l`.
    pub fn common_jump(&self) -> Option<usize> {
        (self.l1 == self.l2).then_some(self.l1)
    }

    pub fn num_states(&self) -> usize {
        self.dims.iter().map(|n| n + 1).product()
    }

    /// Whether a signed step along an axis respects the jump bounds.
    pub fn step_allowed(&self, step: isize) -> bool {
        match step {
            s if s > 0 => s as usize <= self.l1,
            s if s < 0 => s.unsigned_abs() <= self.l2,
            _ => false,
        }
    }

    /// Allowed signed steps, backward ones first: `-l2..=-1, 1..=l1`.
    pub fn steps(&self) -> impl Iterator<Item = isize> + '_ {
        (1..=self.l2 as isize)
            .rev()
            .map(|s| -s)
            .chain(1..=self.l1 as isize)
    }
}

impl fmt::Display for GridShape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let dims: Vec<String> = self.dims.iter().map(|n| n.to_string()).collect();
        write!(f, "dims=({}) l1={} l2={}", dims.join(","), self.l1, self.l2)
    }
}

/// A grid point. The coordinates are not checked against any shape.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct State(pub Vec<usize>);

impl State {
    pub fn new(coords: Vec<usize>) -> Self {
        Self(coords)
    }

    pub fn origin(q: usize) -> Self {
        Self(vec![0; q])
    }

    pub fn coords(&self) -> &[usize] {
        &self.0
    }

    /// `self + step·e_axis`, or `None` if a coordinate would go negative.
    pub fn shifted(&self, axis: usize, step: isize) -> Option<State> {
        let mut c = self.0.clone();
        let v = c[axis] as isize + step;
        if v < 0 {
            return None;
        }
        c[axis] = v as usize;
        Some(State(c))
    }

    /// Sum of coordinates.
    pub fn norm1(&self) -> usize {
        self.0.iter().sum()
    }
}

impl fmt::Display for State {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("(")?;
        for (k, c) in self.0.iter().enumerate() {
            if k > 0 {
                f.write_str(",")?;
            }
            write!(f, "{c}")?;
        }
        f.write_str(")")
    }
}

impl From<Vec<usize>> for State {
    fn from(v: Vec<usize>) -> Self {
        State(v)
    }
}

impl<const N: usize> From<[usize; N]> for State {
    fn from(v: [usize; N]) -> Self {
        State(v.to_vec())
    }
}

/// An ordered pair of grid states one allowed jump apart.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct DirectedEdge {
    pub from: State,
    pub to: State,
    /// 0-based axis along which the jump happens.
    pub axis: usize,
    /// Signed jump size; positive is forward.
    pub step: isize,
}

impl fmt::Display for DirectedEdge {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}->{}", self.from, self.to)
    }
}

/// Enumerated state space of a [`GridShape`].
#[derive(Debug, Clone)]
pub struct Grid {
    shape: GridShape,
    strides: Vec<usize>,
    states: Vec<State>,
}

impl Grid {
    pub fn new(shape: GridShape) -> Self {
        let q = shape.q();
        let mut strides = vec![1usize; q];
        for i in (0..q.saturating_sub(1)).rev() {
            strides[i] = strides[i + 1] * (shape.dims[i + 1] + 1);
        }
        let n = shape.num_states();
        let states = (0..n)
            .map(|mut idx| {
                let mut c = vec![0usize; q];
                for i in 0..q {
                    c[i] = idx / strides[i];
                    idx %= strides[i];
                }
                State(c)
            })
            .collect();
        Self {
            shape,
            strides,
            states,
        }
    }

    pub fn shape(&self) -> &GridShape {
        &self.shape
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn states(&self) -> &[State] {
        &self.states
    }

    pub fn state(&self, index: usize) -> &State {
        &self.states[index]
    }

    pub fn contains(&self, s: &State) -> bool {
        s.0.len() == self.shape.q() && s.0.iter().zip(&self.shape.dims).all(|(c, n)| c <= n)
    }

    /// Linear index of a state, `None` if it lies outside the grid.
    pub fn index_of(&self, s: &State) -> Option<usize> {
        if !self.contains(s) {
            return None;
        }
        Some(s.0.iter().zip(&self.strides).map(|(c, st)| c * st).sum())
    }

    /// Index of `state(index) + step·e_axis` if that point is in the grid.
    /// The step bounds are not consulted.
    pub fn neighbor(&self, index: usize, axis: usize, step: isize) -> Option<usize> {
        let c = self.states[index].0[axis] as isize + step;
        if c < 0 || c > self.shape.dims[axis] as isize {
            return None;
        }
        Some((index as isize + step * self.strides[axis] as isize) as usize)
    }

    /// Axis and signed step of a directed edge `from → to`, if it is one.
    pub fn edge_between(&self, from: usize, to: usize) -> Option<(usize, isize)> {
        let (a, b) = (&self.states[from].0, &self.states[to].0);
        let mut found = None;
        for i in 0..a.len() {
            if a[i] != b[i] {
                if found.is_some() {
                    return None;
                }
                found = Some((i, b[i] as isize - a[i] as isize));
            }
        }
        found.filter(|&(_, s)| self.shape.step_allowed(s))
    }

    /// Whether `u ↔ v`: one axis differs, by at most `max(l1, l2)`.
    pub fn adjacent(&self, u: usize, v: usize) -> bool {
        self.edge_between(u, v).is_some() || self.edge_between(v, u).is_some()
    }

    /// Outgoing edges of a state as `(target index, axis, step)`.
    pub fn out_edges(&self, index: usize) -> Vec<(usize, usize, isize)> {
        let mut out = Vec::new();
        for axis in 0..self.shape.q() {
            for step in self.shape.steps() {
                if let Some(t) = self.neighbor(index, axis, step) {
                    out.push((t, axis, step));
                }
            }
        }
        out
    }

    /// Directed edges ordered by source index, then axis, then step.
    pub fn directed_edges(&self) -> Vec<DirectedEdge> {
        let mut edges = Vec::new();
        for u in 0..self.len() {
            for (v, axis, step) in self.out_edges(u) {
                edges.push(DirectedEdge {
                    from: self.states[u].clone(),
                    to: self.states[v].clone(),
                    axis,
                    step,
                });
            }
        }
        edges
    }

    /// Adjacency matrix of the undirected grid graph.
    pub fn adjacency(&self) -> IntMatrix {
        let n = self.len();
        let labels: Vec<String> = self.states.iter().map(|s| s.to_string()).collect();
        let mut a = IntMatrix::zeros(n, n, labels.clone(), labels);
        for u in 0..n {
            for (v, _, _) in self.out_edges(u) {
                a.set(u, v, 1);
                a.set(v, u, 1);
            }
        }
        a
    }

    /// Graph Laplacian `Deg − A`.
    pub fn laplacian(&self) -> IntMatrix {
        let mut l = self.adjacency();
        let n = self.len();
        for u in 0..n {
            let deg: i64 = (0..n).map(|v| l.get(u, v)).sum();
            for v in 0..n {
                let a = l.get(u, v);
                l.set(u, v, -a);
            }
            l.set(u, u, deg);
        }
        l
    }
}

/// Enumerate the state space of a shape.
pub fn build_grid(shape: &GridShape) -> Grid {
    Grid::new(shape.clone())
}

pub fn directed_edges(shape: &GridShape) -> Vec<DirectedEdge> {
    Grid::new(shape.clone()).directed_edges()
}

pub fn adjacency_and_laplacian(shape: &GridShape) -> (IntMatrix, IntMatrix) {
    let g = Grid::new(shape.clone());
    (g.adjacency(), g.laplacian())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::integer_rank;

    fn shape(dims: &[usize], l: usize) -> GridShape {
        GridShape::balanced(dims.to_vec(), l).unwrap()
    }

    #[test]
    fn two_by_two_order_matches_listing() {
        let g = build_grid(&shape(&[2, 2], 2));
        let labels: Vec<String> = g.states().iter().map(|s| s.to_string()).collect();
        assert_eq!(
            labels,
            ["(0,0)", "(0,1)", "(0,2)", "(1,0)", "(1,1)", "(1,2)", "(2,0)", "(2,1)", "(2,2)"]
        );
    }

    #[test]
    fn smallest_one_dimensional_grid() {
        let g = build_grid(&shape(&[1], 1));
        assert_eq!(g.len(), 2);
        assert_eq!(g.state(0), &State::from([0]));
        assert_eq!(g.state(1), &State::from([1]));
    }

    #[test]
    fn three_dimensional_index() {
        let g = build_grid(&shape(&[2, 2, 2], 1));
        assert_eq!(g.len(), 27);
        assert_eq!(g.index_of(&State::from([1, 0, 2])), Some(11));
        assert_eq!(g.index_of(&State::from([3, 0, 0])), None);
        assert_eq!(g.index_of(&State::from([1, 0])), None);
    }

    #[test]
    fn shape_violations_are_named() {
        assert!(matches!(GridShape::new(vec![], 1, 1), Err(GbdpError::Shape(_))));
        assert!(matches!(GridShape::new(vec![2, 0], 1, 1), Err(GbdpError::Shape(_))));
        assert!(matches!(GridShape::new(vec![2, 2], 0, 1), Err(GbdpError::Shape(_))));
        let e = GridShape::new(vec![2, 3], 3, 1).unwrap_err();
        assert!(e.to_string().contains("max(l1, l2)"), "{e}");
        assert!(GridShape::new(vec![2, 2], 2, 2).is_ok());
    }

    #[test]
    fn edge_counts() {
        assert_eq!(directed_edges(&shape(&[2, 2], 2)).len(), 36);
        assert_eq!(directed_edges(&shape(&[1], 1)).len(), 2);
        assert_eq!(directed_edges(&shape(&[2, 2], 1)).len(), 24);
    }

    #[test]
    fn edge_count_formula_matches_enumeration() {
        for dims in [vec![2, 2], vec![3, 2], vec![4, 3], vec![2, 3, 2], vec![4]] {
            for l in 1..=2 {
                let s = shape(&dims, l);
                let mut expected = 0;
                for i in 0..dims.len() {
                    let others: usize = (0..dims.len())
                        .filter(|&j| j != i)
                        .map(|j| dims[j] + 1)
                        .product();
                    for x in 1..=l {
                        expected += (dims[i] - x + 1) * others;
                    }
                }
                assert_eq!(directed_edges(&s).len(), 2 * expected, "{s}");
            }
        }
    }

    #[test]
    fn asymmetric_bounds_give_asymmetric_edges() {
        let s = GridShape::new(vec![2], 2, 1).unwrap();
        let g = build_grid(&s);
        assert!(g.edge_between(0, 2).is_some());
        assert!(g.edge_between(2, 0).is_none());
        assert!(g.adjacent(2, 0));
    }

    #[test]
    fn degree_of_center() {
        let g = build_grid(&shape(&[2, 2], 2));
        let (a, _) = adjacency_and_laplacian(g.shape());
        let c = g.index_of(&State::from([1, 1])).unwrap();
        let nbrs: Vec<String> = (0..g.len())
            .filter(|&v| a.get(c, v) == 1)
            .map(|v| g.state(v).to_string())
            .collect();
        assert_eq!(nbrs, ["(0,1)", "(1,0)", "(1,2)", "(2,1)"]);
    }

    #[test]
    fn path_laplacian() {
        let (_, l) = adjacency_and_laplacian(&shape(&[2], 1));
        assert_eq!(l.to_rows(), vec![vec![1, -1, 0], vec![-1, 2, -1], vec![0, -1, 1]]);
    }

    #[test]
    fn laplacian_rank_and_kernel() {
        let s = shape(&[2, 2], 2);
        let (a, l) = adjacency_and_laplacian(&s);
        assert_eq!(integer_rank(&l), 8);
        for u in 0..l.rows() {
            assert_eq!((0..l.cols()).map(|v| l.get(u, v)).sum::<i64>(), 0);
            for v in 0..l.cols() {
                assert_eq!(a.get(u, v), a.get(v, u));
            }
        }
        let degree_sum: i64 = (0..l.rows()).map(|u| l.get(u, u)).sum();
        assert_eq!(degree_sum as usize, directed_edges(&s).len());
    }

    #[test]
    fn grid_graph_is_connected() {
        for (dims, l) in [(vec![3, 2], 1), (vec![2, 2, 2], 2), (vec![4], 3)] {
            let s = shape(&dims, l);
            let (_, lap) = adjacency_and_laplacian(&s);
            assert_eq!(integer_rank(&lap), s.num_states() - 1);
        }
    }

    #[test]
    fn index_bijection_and_edge_symmetry() {
        let g = build_grid(&shape(&[3, 2, 2], 2));
        for (k, s) in g.states().iter().enumerate() {
            assert_eq!(g.index_of(s), Some(k));
        }
        let edges = g.directed_edges();
        let set: std::collections::HashSet<(State, State)> =
            edges.iter().map(|e| (e.from.clone(), e.to.clone())).collect();
        for e in &edges {
            assert!(set.contains(&(e.to.clone(), e.from.clone())));
            assert_eq!(e.to.shifted(e.axis, -e.step).as_ref(), Some(&e.from));
        }
    }
}
