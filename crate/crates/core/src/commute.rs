//! Commutation of directional transition matrices.
//!
//! Two routes: multiply `P_i P_j − P_j P_i` densely, or evaluate the
//! bilinear two-step identities one rectangle at a time. A rectangle with
//! sides `s` along axis `i` and `t` along axis `j` starting at `u` gives
//!
//! ```text
//! p(u, u+s·e_i) p(u+s·e_i, w) = p(u, u+t·e_j) p(u+t·e_j, w),   w = u + s·e_i + t·e_j
//! ```
//!
//! and the four sign choices of `(s, t)` are the four constraint families.
//! The left-hand side minus the right-hand side is exactly the
//! `(u, w)` entry of the commutator.

use std::fmt;

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::error::{GbdpError, Result};
use crate::lattice::State;
use crate::model::TransitionModel;

/// Default absolute tolerance for commutation checks.
pub const DEFAULT_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CommuteCheck {
    pub commutes: bool,
    /// `max |P_i P_j − P_j P_i|`.
    pub residual: f64,
}

/// One bilinear identity.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Constraint {
    pub base: State,
    /// 0-based axes `(i, j)`; the left-hand path moves along `i` first.
    pub axes: (usize, usize),
    /// Signed steps along `i` and `j`.
    pub steps: (isize, isize),
    /// 1: (+,+), 2: (+,−), 3: (−,+), 4: (−,−).
    pub family: u8,
}

impl Constraint {
    /// Far corner `u + s·e_i + t·e_j`, when its coordinates are non-negative.
    pub fn target(&self) -> Option<State> {
        self.base
            .shifted(self.axes.0, self.steps.0)?
            .shifted(self.axes.1, self.steps.1)
    }
}

impl fmt::Display for Constraint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let (i, j) = self.axes;
        let (s, t) = self.steps;
        write!(
            f,
            "family {} at u={} directions ({},{}) steps ({:+},{:+}): p(u,u{:+}e{})p(.,w) = p(u,u{:+}e{})p(.,w)",
            self.family,
            self.base,
            i + 1,
            j + 1,
            s,
            t,
            s,
            i + 1,
            t,
            j + 1
        )
    }
}

fn family_of(s: isize, t: isize) -> u8 {
    match (s > 0, t > 0) {
        (true, true) => 1,
        (true, false) => 2,
        (false, true) => 3,
        (false, false) => 4,
    }
}

fn check_pair(model: &TransitionModel, i: usize, j: usize) -> Result<()> {
    let q = model.shape().q();
    if i >= q || j >= q {
        return Err(GbdpError::Domain(format!(
            "directions ({}, {}) outside 1..={q}",
            i + 1,
            j + 1
        )));
    }
    if i == j {
        return Err(GbdpError::Domain(
            "a direction trivially commutes with itself".into(),
        ));
    }
    Ok(())
}

/// Commutator of two directional matrices by dense multiplication.
pub fn commutator(model: &TransitionModel, i: usize, j: usize) -> Result<DMatrix<f64>> {
    check_pair(model, i, j)?;
    let pi = model.directional_matrix(i)?;
    let pj = model.directional_matrix(j)?;
    Ok(&pi * &pj - &pj * &pi)
}

pub fn commutes_direct(model: &TransitionModel, i: usize, j: usize, tol: f64) -> Result<CommuteCheck> {
    let residual = commutator(model, i, j)?.amax();
    Ok(CommuteCheck {
        commutes: residual <= tol,
        residual,
    })
}

/// Largest commutator entry over all direction pairs.
pub fn max_commutator(model: &TransitionModel) -> f64 {
    let q = model.shape().q();
    let mut worst: f64 = 0.0;
    for i in 0..q {
        for j in i + 1..q {
            worst = worst.max(commutator(model, i, j).expect("valid pair").amax());
        }
    }
    worst
}

fn residuals_impl(
    model: &TransitionModel,
    i: usize,
    j: usize,
    clipped: bool,
) -> Result<Vec<(Constraint, f64)>> {
    check_pair(model, i, j)?;
    let grid = model.grid();
    let shape = model.shape();
    let steps: Vec<isize> = shape.steps().collect();
    let per_base: Vec<Vec<(Constraint, f64)>> = (0..grid.len())
        .into_par_iter()
        .map(|u| {
            let mut out = Vec::new();
            for &s in &steps {
                for &t in &steps {
                    let mid_i = grid.neighbor(u, i, s);
                    let mid_j = grid.neighbor(u, j, t);
                    let far = mid_i.and_then(|m| grid.neighbor(m, j, t));
                    let in_grid = mid_i.is_some() && mid_j.is_some() && far.is_some();
                    if !in_grid && !clipped {
                        continue;
                    }
                    let lhs = match (mid_i, far) {
                        (Some(m), Some(w)) => model.prob(u, m) * model.prob(m, w),
                        _ => 0.0,
                    };
                    let rhs = match (mid_j, far) {
                        (Some(m), Some(w)) => model.prob(u, m) * model.prob(m, w),
                        _ => 0.0,
                    };
                    out.push((
                        Constraint {
                            base: grid.state(u).clone(),
                            axes: (i, j),
                            steps: (s, t),
                            family: family_of(s, t),
                        },
                        lhs - rhs,
                    ));
                }
            }
            out
        })
        .collect();
    Ok(per_base.into_iter().flatten().collect())
}

/// Residual of every bilinear identity whose rectangle lies in the grid.
///
/// Results are ordered by base state, then step along `i`, then step along `j`.
pub fn constraint_residuals(model: &TransitionModel, i: usize, j: usize) -> Result<Vec<(Constraint, f64)>> {
    residuals_impl(model, i, j, false)
}

/// Like [`constraint_residuals`] but also emits rectangles that leave the
/// grid; off-grid transitions count as probability zero, so those residuals
/// are exactly zero.
pub fn constraint_residuals_all_bases(
    model: &TransitionModel,
    i: usize,
    j: usize,
) -> Result<Vec<(Constraint, f64)>> {
    residuals_impl(model, i, j, true)
}

/// A 2×4 array whose rank-one condition encodes the four identities of one
/// rectangle on a 2-D grid.
#[derive(Debug, Clone, PartialEq)]
pub struct MinorGroup {
    /// Lower-left corner `c`.
    pub corner: State,
    /// Horizontal side (axis 1).
    pub x: usize,
    /// Vertical side (axis 2).
    pub y: usize,
    /// Columns: right jump, down jump, left jump, up jump.
    ///
    /// Row 0: `r_c(x), d_{c+(x,y)}(y), l_{c+(x,y)}(x), u_c(y)`;
    /// row 1: `r_{c+(0,y)}(x), d_{c+(0,y)}(y), l_{c+(x,0)}(x), u_{c+(x,0)}(y)`.
    pub entries: [[f64; 4]; 2],
    /// Minors for column pairs (0,1), (0,2), (0,3), (1,2), (1,3), (2,3).
    pub minors: [f64; 6],
}

impl MinorGroup {
    pub fn max_abs_minor(&self) -> f64 {
        self.minors.iter().fold(0.0, |m, x| m.max(x.abs()))
    }
}

/// All 2×2 minors of a 2×4 array, column pairs in lexicographic order.
pub fn minors_2x4(e: &[[f64; 4]; 2]) -> [f64; 6] {
    let mut out = [0.0; 6];
    let mut k = 0;
    for a in 0..4 {
        for b in a + 1..4 {
            out[k] = e[0][a] * e[1][b] - e[0][b] * e[1][a];
            k += 1;
        }
    }
    out
}

/// One minor group per in-grid rectangle of a 2-D model.
pub fn rank1_minor_report(model: &TransitionModel) -> Result<Vec<MinorGroup>> {
    let shape = model.shape();
    if shape.q() != 2 {
        return Err(GbdpError::Unsupported(format!(
            "rank-one minor report needs a 2-D grid, got q = {}",
            shape.q()
        )));
    }
    let (m, n) = (shape.dims()[0], shape.dims()[1]);
    let l = shape.max_jump();
    let p = |a: [usize; 2], b: [usize; 2]| model.prob_between(&State::from(a), &State::from(b));
    let mut out = Vec::new();
    for y in 1..=l {
        for x in 1..=l {
            for i in 0..=m.saturating_sub(x) {
                for j in 0..=n.saturating_sub(y) {
                    if i + x > m || j + y > n {
                        continue;
                    }
                    let (c, cx, cy, cxy) = ([i, j], [i + x, j], [i, j + y], [i + x, j + y]);
                    let entries = [
                        [p(c, cx), p(cxy, cx), p(cxy, cy), p(c, cy)],
                        [p(cy, cxy), p(cy, c), p(cx, c), p(cx, cxy)],
                    ];
                    out.push(MinorGroup {
                        corner: State::from(c),
                        x,
                        y,
                        minors: minors_2x4(&entries),
                        entries,
                    });
                }
            }
        }
    }
    Ok(out)
}
