//! Closed-form k-step probabilities for commuting models with `l1 = l2`.
//!
//! A parametrized model factors as `P_i = B A⁽ⁱ⁾ B⁻¹` with `B = diag(α)`
//! and `A⁽ⁱ⁾` acting as one symmetric banded block `U⁽ⁱ⁾` on axis `i` and
//! as the identity on every other axis. With orthonormal eigenpairs
//! `(λ⁽ⁱ⁾_r, w⁽ⁱ⁾_r)` of each block,
//!
//! ```text
//! P⁽ᵏ⁾(u, v) = α_u · Σ_{r_1..r_q} (a + Σ_i λ⁽ⁱ⁾_{r_i})ᵏ · Π_i w⁽ⁱ⁾_{r_i}(u_i) w⁽ⁱ⁾_{r_i}(v_i) · α_v⁻¹
//! ```
//!
//! where `a` is a scalar self-transition probability (zero if absent).

use nalgebra::DMatrix;

use crate::error::{GbdpError, Result};
use crate::lattice::{Grid, GridShape};
use crate::model::{SelfTransition, TransitionModel};
use crate::param::{recover_params, EdgeClass, Parametrization};

/// Sweep cap for the Jacobi iteration.
const MAX_SWEEPS: usize = 100;
/// Stop once the off-diagonal Frobenius norm drops below this fraction of `‖U‖_F`.
const OFF_DIAGONAL_RTOL: f64 = 1e-13;

/// `P_i = B A⁽ⁱ⁾ B⁻¹` factors of a parametrization.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockDecomposition {
    shape: GridShape,
    b: Vec<f64>,
    blocks: Vec<DMatrix<f64>>,
}

impl BlockDecomposition {
    pub fn shape(&self) -> &GridShape {
        &self.shape
    }

    /// Diagonal of `B`, grid index order.
    pub fn b(&self) -> &[f64] {
        &self.b
    }

    /// The `(n_i + 1) × (n_i + 1)` block of one axis.
    pub fn block(&self, axis: usize) -> &DMatrix<f64> {
        &self.blocks[axis]
    }

    pub fn blocks(&self) -> &[DMatrix<f64>] {
        &self.blocks
    }

    /// `A⁽ⁱ⁾` in grid index order.
    pub fn block_diagonal(&self, axis: usize) -> DMatrix<f64> {
        let grid = Grid::new(self.shape.clone());
        let n = grid.len();
        let u = &self.blocks[axis];
        DMatrix::from_fn(n, n, |a, b| {
            let (sa, sb) = (grid.state(a).coords(), grid.state(b).coords());
            let same_elsewhere = (0..sa.len()).all(|k| k == axis || sa[k] == sb[k]);
            if same_elsewhere {
                u[(sa[axis], sb[axis])]
            } else {
                0.0
            }
        })
    }

    /// `B A⁽ⁱ⁾ B⁻¹`.
    pub fn conjugated(&self, axis: usize) -> DMatrix<f64> {
        let a = self.block_diagonal(axis);
        DMatrix::from_fn(a.nrows(), a.ncols(), |u, v| a[(u, v)] * (self.b[u] / self.b[v]))
    }
}

/// Build `B = diag(α)` and the per-axis blocks `U⁽ⁱ⁾_{r, r+x} = Γ(i, r, x)`.
pub fn block_decompose(p: &Parametrization) -> Result<BlockDecomposition> {
    let shape = p.shape().clone();
    let l = shape.common_jump().ok_or_else(|| {
        GbdpError::Unsupported("blocks are not symmetric when l1 != l2".into())
    })?;
    let blocks = shape
        .dims()
        .iter()
        .enumerate()
        .map(|(axis, &n)| {
            let mut u = DMatrix::zeros(n + 1, n + 1);
            for step in 1..=l {
                for offset in 0..=(n - step) {
                    let g = p.gamma_of(&EdgeClass { axis, offset, step });
                    u[(offset, offset + step)] = g;
                    u[(offset + step, offset)] = g;
                }
            }
            u
        })
        .collect();
    Ok(BlockDecomposition {
        shape,
        b: p.alpha().to_vec(),
        blocks,
    })
}

/// Eigenvalues in ascending order with orthonormal eigenvectors as columns.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenSystem {
    pub values: Vec<f64>,
    pub vectors: DMatrix<f64>,
}

impl EigenSystem {
    /// `Σ_r λ_r w_r w_rᵀ`.
    pub fn reconstruct(&self) -> DMatrix<f64> {
        let d = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(self.values.clone()));
        &self.vectors * d * self.vectors.transpose()
    }
}

/// Cyclic Jacobi eigensolver for a real symmetric matrix.
///
/// Eigenvalues come out ascending; each eigenvector's first component with
/// magnitude above 1e-12 is made positive.
pub fn symmetric_eigen(u: &DMatrix<f64>, tol: f64) -> Result<EigenSystem> {
    let n = u.nrows();
    if u.ncols() != n {
        return Err(GbdpError::Domain(format!("matrix is {}x{}, not square", n, u.ncols())));
    }
    for i in 0..n {
        for j in i + 1..n {
            if (u[(i, j)] - u[(j, i)]).abs() > tol {
                return Err(GbdpError::Domain(format!(
                    "matrix is not symmetric: |U[{i},{j}] - U[{j},{i}]| = {:e}",
                    (u[(i, j)] - u[(j, i)]).abs()
                )));
            }
        }
    }
    let mut a = (u + u.transpose()) * 0.5;
    let mut v = DMatrix::<f64>::identity(n, n);
    let threshold = OFF_DIAGONAL_RTOL * a.norm();
    let off = |a: &DMatrix<f64>| {
        let mut s = 0.0;
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    s += a[(i, j)] * a[(i, j)];
                }
            }
        }
        s.sqrt()
    };

    let mut sweeps = 0;
    let mut last = off(&a);
    while last > threshold {
        if sweeps == MAX_SWEEPS {
            return Err(GbdpError::Convergence {
                iterations: sweeps,
                last_change: last,
            });
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[(p, q)];
                if apq == 0.0 {
                    continue;
                }
                let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (1.0 + theta * theta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (x, y) = (a[(k, p)], a[(k, q)]);
                    a[(k, p)] = c * x - s * y;
                    a[(k, q)] = s * x + c * y;
                }
                for k in 0..n {
                    let (x, y) = (a[(p, k)], a[(q, k)]);
                    a[(p, k)] = c * x - s * y;
                    a[(q, k)] = s * x + c * y;
                }
                a[(p, q)] = 0.0;
                a[(q, p)] = 0.0;
                for k in 0..n {
                    let (x, y) = (v[(k, p)], v[(k, q)]);
                    v[(k, p)] = c * x - s * y;
                    v[(k, q)] = s * x + c * y;
                }
            }
        }
        sweeps += 1;
        last = off(&a);
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[(i, i)].total_cmp(&a[(j, j)]));
    let values = order.iter().map(|&i| a[(i, i)]).collect();
    let mut vectors = DMatrix::zeros(n, n);
    for (col, &i) in order.iter().enumerate() {
        let mut w = v.column(i).clone_owned();
        if let Some(lead) = w.iter().find(|x| x.abs() > 1e-12) {
            if *lead < 0.0 {
                w.neg_mut();
            }
        }
        vectors.set_column(col, &w);
    }
    Ok(EigenSystem { values, vectors })
}

/// `Pᵏ` by binary exponentiation; `P⁰ = I`.
pub fn matrix_power(p: &DMatrix<f64>, k: u32) -> DMatrix<f64> {
    assert!(p.is_square(), "matrix_power needs a square matrix");
    let mut result = DMatrix::identity(p.nrows(), p.ncols());
    let mut base = p.clone();
    let mut e = k;
    while e > 0 {
        if e & 1 == 1 {
            result = &result * &base;
        }
        e >>= 1;
        if e > 0 {
            base = &base * &base;
        }
    }
    result
}

fn spectral_power(p: &Parametrization, alpha_self: f64, k: u32) -> Result<DMatrix<f64>> {
    let dec = block_decompose(p)?;
    let systems = dec
        .blocks()
        .iter()
        .map(|u| symmetric_eigen(u, 1e-12))
        .collect::<Result<Vec<_>>>()?;
    // Eigen index tuples share the grid's lexicographic enumeration.
    let grid = Grid::new(dec.shape().clone());
    let n = grid.len();
    let mut phi: DMatrix<f64> = DMatrix::zeros(n, n);
    let mut weights = Vec::with_capacity(n);
    for r in 0..n {
        let idx = grid.state(r).coords();
        let lambda: f64 = idx.iter().enumerate().map(|(i, &ri)| systems[i].values[ri]).sum();
        weights.push(powk(alpha_self + lambda, k));
        for u in 0..n {
            let cu = grid.state(u).coords();
            phi[(u, r)] = idx
                .iter()
                .enumerate()
                .map(|(i, &ri)| systems[i].vectors[(cu[i], ri)])
                .product();
        }
    }
    let mut scaled = phi.clone();
    for (r, w) in weights.iter().enumerate() {
        scaled.column_mut(r).scale_mut(*w);
    }
    let inner = scaled * phi.transpose();
    let b = dec.b();
    Ok(DMatrix::from_fn(n, n, |u, v| b[u] * inner[(u, v)] / b[v]))
}

fn powk(x: f64, k: u32) -> f64 {
    match i32::try_from(k) {
        Ok(e) => x.powi(e),
        Err(_) => x.powf(k as f64),
    }
}

/// k-step matrix of `Σ_i P_i` from the block eigensystems.
pub fn k_step(p: &Parametrization, k: u32) -> Result<DMatrix<f64>> {
    spectral_power(p, 0.0, k)
}

/// k-step matrix of `Σ_i P_i + αI`.
pub fn k_step_with_self(p: &Parametrization, alpha_self: f64, k: u32) -> Result<DMatrix<f64>> {
    if !(0.0..1.0).contains(&alpha_self) {
        return Err(GbdpError::Domain(format!(
            "self-transition probability {alpha_self} outside [0,1)"
        )));
    }
    spectral_power(p, alpha_self, k)
}

/// Spectral k-step matrix of an arbitrary model, via its recovered parametrization.
///
/// Refuses `l1 != l2` (the directional blocks are then not symmetric) and
/// self-transition tables that are not constant (a non-scalar `D` does not
/// commute with the directional matrices).
pub fn k_step_from_model(model: &TransitionModel, k: u32) -> Result<DMatrix<f64>> {
    let shape = model.shape();
    if shape.l1() != shape.l2() {
        return Err(GbdpError::Unsupported(format!(
            "spectral method needs l1 = l2 (got l1 = {}, l2 = {}): the directional blocks are not symmetric; use the power method",
            shape.l1(),
            shape.l2()
        )));
    }
    let alpha_self = match model.self_transition() {
        SelfTransition::None => 0.0,
        SelfTransition::Scalar(a) => *a,
        SelfTransition::PerState(d) => {
            let first = d.first().copied().unwrap_or(0.0);
            if d.iter().any(|&x| x != first) {
                return Err(GbdpError::Unsupported(
                    "per-state self-transition probabilities do not commute with the directional matrices; only a scalar self probability is supported".into(),
                ));
            }
            first
        }
    };
    let p = recover_params(model)?;
    k_step_with_self(&p, alpha_self, k)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::param::build_model;
    use std::collections::BTreeMap;

    fn max_abs(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
        (a - b).amax()
    }

    fn hv(h: [f64; 3], v: [f64; 3]) -> Parametrization {
        let s = GridShape::balanced(vec![2, 2], 2).unwrap();
        let mut gamma = BTreeMap::new();
        for (axis, vals) in [(0, h), (1, v)] {
            gamma.insert(EdgeClass { axis, offset: 0, step: 1 }, vals[0]);
            gamma.insert(EdgeClass { axis, offset: 1, step: 1 }, vals[1]);
            gamma.insert(EdgeClass { axis, offset: 0, step: 2 }, vals[2]);
        }
        let b = (0..9).map(|k| 1.0 + 0.25 * k as f64).collect();
        Parametrization::new(s, b, gamma).unwrap()
    }

    #[test]
    fn horizontal_block_layout() {
        let dec = block_decompose(&hv([0.1, 0.2, 0.3], [0.4, 0.5, 0.6])).unwrap();
        let expected = DMatrix::from_row_slice(3, 3, &[0.0, 0.1, 0.3, 0.1, 0.0, 0.2, 0.3, 0.2, 0.0]);
        assert_eq!(dec.block(0), &expected);
    }

    #[test]
    fn zero_gamma_gives_zero_blocks() {
        let p = Parametrization::uniform(GridShape::balanced(vec![2, 3], 2).unwrap(), 0.0).unwrap();
        let dec = block_decompose(&p).unwrap();
        assert!(dec.blocks().iter().all(|b| b.amax() == 0.0));
    }

    #[test]
    fn rectangular_block_entries() {
        let s = GridShape::balanced(vec![3, 2], 2).unwrap();
        let classes = crate::param::edge_classes(&s).unwrap();
        let gamma: BTreeMap<_, _> = classes.iter().enumerate().map(|(k, c)| (*c, 0.01 * (k + 1) as f64)).collect();
        let p = Parametrization::new(s, vec![1.0; 12], gamma.clone()).unwrap();
        let dec = block_decompose(&p).unwrap();
        let u = dec.block(0);
        assert_eq!(u.nrows(), 4);
        for r in 0..3 {
            assert_eq!(u[(r, r + 1)], gamma[&EdgeClass { axis: 0, offset: r, step: 1 }]);
        }
        for r in 0..2 {
            assert_eq!(u[(r, r + 2)], gamma[&EdgeClass { axis: 0, offset: r, step: 2 }]);
        }
        assert_eq!(u[(0, 3)], 0.0);
        let m = build_model(&p);
        for axis in 0..2 {
            assert!(max_abs(&dec.conjugated(axis), &m.directional_matrix(axis).unwrap()) <= 1e-12);
        }
    }

    #[test]
    fn identity_eigensystem() {
        let e = symmetric_eigen(&DMatrix::identity(4, 4), 1e-12).unwrap();
        assert_eq!(e.values, vec![1.0; 4]);
        assert!(max_abs(&(e.vectors.transpose() * &e.vectors), &DMatrix::identity(4, 4)) < 1e-15);
    }

    #[test]
    fn swap_matrix_eigensystem() {
        let u = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]);
        let e = symmetric_eigen(&u, 1e-12).unwrap();
        assert!((e.values[0] + 1.0).abs() < 1e-15 && (e.values[1] - 1.0).abs() < 1e-15);
        let r = std::f64::consts::FRAC_1_SQRT_2;
        assert!((e.vectors[(0, 0)] - r).abs() < 1e-15 && (e.vectors[(1, 0)] + r).abs() < 1e-15);
        assert!((e.vectors[(0, 1)] - r).abs() < 1e-15 && (e.vectors[(1, 1)] - r).abs() < 1e-15);
    }

    #[test]
    fn all_ones_off_diagonal() {
        let dec = block_decompose(&hv([1.0, 1.0, 1.0], [1.0, 1.0, 1.0])).unwrap();
        let e = symmetric_eigen(dec.block(0), 1e-12).unwrap();
        let expected = [-1.0, -1.0, 2.0];
        for (a, b) in e.values.iter().zip(expected) {
            assert!((a - b).abs() < 1e-13, "{:?}", e.values);
        }
        assert!(max_abs(&e.reconstruct(), dec.block(0)) < 1e-13);
    }

    #[test]
    fn nonsymmetric_input_rejected() {
        let u = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 0.5, 0.0]);
        assert!(matches!(symmetric_eigen(&u, 1e-12), Err(GbdpError::Domain(_))));
    }

    #[test]
    fn matrix_power_basics() {
        let p = DMatrix::from_row_slice(2, 2, &[0.2, 0.8, 0.6, 0.4]);
        assert_eq!(matrix_power(&p, 0), DMatrix::identity(2, 2));
        assert_eq!(matrix_power(&p, 1), p);
        let p7 = matrix_power(&p, 7);
        let naive = (0..7).fold(DMatrix::identity(2, 2), |acc, _| acc * &p);
        assert!(max_abs(&p7, &naive) < 1e-15);
        for k in [3u32, 17, 40] {
            let pk = matrix_power(&p, k);
            for r in 0..2 {
                assert!((pk.row(r).sum() - 1.0).abs() <= k as f64 * 1e-14);
            }
        }
    }

    #[test]
    fn k_zero_and_one() {
        let p = hv([0.05, 0.07, 0.03], [0.06, 0.02, 0.04]);
        let m = build_model(&p);
        assert!(max_abs(&k_step(&p, 0).unwrap(), &DMatrix::identity(9, 9)) < 1e-12);
        assert!(max_abs(&k_step(&p, 1).unwrap(), &m.full_matrix()) <= 1e-12);
        let with_self = k_step_with_self(&p, 0.3, 1).unwrap();
        let expected = m.full_matrix() + DMatrix::identity(9, 9) * 0.3;
        assert!(max_abs(&with_self, &expected) <= 1e-12);
        assert_eq!(k_step_with_self(&p, 0.0, 4).unwrap(), k_step(&p, 4).unwrap());
    }

    #[test]
    fn self_probability_range() {
        let p = hv([0.05, 0.07, 0.03], [0.06, 0.02, 0.04]);
        assert!(matches!(k_step_with_self(&p, 1.0, 2), Err(GbdpError::Domain(_))));
        assert!(matches!(k_step_with_self(&p, -0.1, 2), Err(GbdpError::Domain(_))));
    }

    #[test]
    fn model_route_refusals() {
        let lop = TransitionModel::new(GridShape::new(vec![2, 2], 2, 1).unwrap());
        let e = k_step_from_model(&lop, 3).unwrap_err();
        assert!(matches!(e, GbdpError::Unsupported(_)));
        assert!(e.to_string().contains("not symmetric"));

        let p = hv([0.05, 0.07, 0.03], [0.06, 0.02, 0.04]);
        let mut m = build_model(&p);
        m.set_self(SelfTransition::PerState((0..9).map(|k| 0.01 * k as f64).collect()));
        assert!(matches!(k_step_from_model(&m, 3), Err(GbdpError::Unsupported(_))));
        m.set_self(SelfTransition::PerState(vec![0.2; 9]));
        let via_model = k_step_from_model(&m, 5).unwrap();
        assert!(max_abs(&via_model, &matrix_power(&m.full_matrix(), 5)) < 1e-12);
    }
}
