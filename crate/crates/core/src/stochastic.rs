//! Perron-root normalization of parametrized models.
//!
//! With `M = Σ_i A⁽ⁱ⁾` irreducible and `(ρ, v)` its Perron pair, scaling
//! every `Γ` by `c = (1 − a)/ρ` and setting `α_u ∝ 1/v_u` makes every row
//! of `Σ_i P_i` sum to `1 − a`.

use nalgebra::DMatrix;

use crate::error::{GbdpError, Result};
use crate::param::Parametrization;
use crate::spectral::block_decompose;

/// Successive unit-sum iterates closer than this (∞-norm) count as converged.
const STEP_TOL: f64 = 1e-13;
/// Lower bound on the iteration cap; the cap is otherwise `100·n`.
const MIN_ITERATIONS: usize = 100_000;

#[derive(Debug, Clone, PartialEq)]
pub struct Perron {
    pub rho: f64,
    /// Strictly positive, sums to 1.
    pub vector: Vec<f64>,
    pub iterations: usize,
}

fn check_nonnegative_square(m: &DMatrix<f64>) -> Result<()> {
    if !m.is_square() {
        return Err(GbdpError::Domain(format!("matrix is {}x{}, not square", m.nrows(), m.ncols())));
    }
    if let Some(x) = m.iter().find(|x| !(**x >= 0.0)) {
        return Err(GbdpError::Domain(format!("matrix has a negative or non-finite entry {x}")));
    }
    Ok(())
}

fn reaches_all(m: &DMatrix<f64>, transpose: bool) -> bool {
    let n = m.nrows();
    let mut seen = vec![false; n];
    let mut stack = vec![0];
    seen[0] = true;
    while let Some(a) = stack.pop() {
        for b in 0..n {
            let x = if transpose { m[(b, a)] } else { m[(a, b)] };
            if x > 0.0 && !seen[b] {
                seen[b] = true;
                stack.push(b);
            }
        }
    }
    seen.into_iter().all(|s| s)
}

/// Strong connectivity of the nonzero pattern.
pub fn is_irreducible(m: &DMatrix<f64>) -> bool {
    m.nrows() > 0 && reaches_all(m, false) && reaches_all(m, true)
}

/// Perron root and unit-sum Perron vector of a non-negative irreducible matrix.
pub fn perron(m: &DMatrix<f64>, tol: f64) -> Result<Perron> {
    let n = m.nrows();
    perron_from(m, tol, &vec![1.0 / n.max(1) as f64; n])
}

/// [`perron`] from a caller-chosen positive starting vector.
///
/// Iterates on `M + sI` with `s = ‖M‖∞`: the shift moves the eigenvalue
/// `−ρ` of periodic patterns (bipartite grids with unit steps) to zero.
pub fn perron_from(m: &DMatrix<f64>, tol: f64, start: &[f64]) -> Result<Perron> {
    check_nonnegative_square(m)?;
    let n = m.nrows();
    if !is_irreducible(m) {
        return Err(GbdpError::Structure("matrix is reducible; the Perron vector is not unique".into()));
    }
    if start.len() != n || start.iter().any(|x| !(*x > 0.0)) {
        return Err(GbdpError::Domain("starting vector must be positive with one entry per row".into()));
    }
    let norm = inf_norm(m);
    let shift = norm;
    let total: f64 = start.iter().sum();
    let mut v: Vec<f64> = start.iter().map(|x| x / total).collect();
    let cap = (100 * n).max(MIN_ITERATIONS);
    let mut lambda = 0.0;
    let mut last_change = f64::INFINITY;
    let mut iterations = 0;
    while iterations < cap {
        iterations += 1;
        let mut w: Vec<f64> = (0..n)
            .map(|a| (0..n).map(|b| m[(a, b)] * v[b]).sum::<f64>() + shift * v[a])
            .collect();
        lambda = w.iter().sum();
        w.iter_mut().for_each(|x| *x /= lambda);
        last_change = w.iter().zip(&v).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        v = w;
        if last_change <= STEP_TOL {
            break;
        }
    }
    let mut rho = lambda - shift;
    // Slowly mixing patterns stop with componentwise errors far above the
    // step size; a few inverse-iteration steps just above ρ remove them.
    if let Some((r, w)) = polish(m, rho, &v, norm) {
        rho = r;
        v = w;
    }
    let residual = (0..n)
        .map(|a| ((0..n).map(|b| m[(a, b)] * v[b]).sum::<f64>() - rho * v[a]).abs())
        .fold(0.0, f64::max);
    if residual > tol * norm || v.iter().any(|x| !(*x > 0.0)) {
        return Err(GbdpError::Convergence { iterations, last_change });
    }
    Ok(Perron { rho, vector: v, iterations })
}

fn polish(m: &DMatrix<f64>, rho: f64, v: &[f64], norm: f64) -> Option<(f64, Vec<f64>)> {
    let n = m.nrows();
    let sigma = rho + 1e-9 * norm.max(f64::MIN_POSITIVE);
    let lu = (m - DMatrix::identity(n, n) * sigma).lu();
    let mut x = nalgebra::DVector::from_column_slice(v);
    for _ in 0..3 {
        let y = lu.solve(&x)?;
        let total = y.sum();
        if !total.is_finite() || total == 0.0 {
            return None;
        }
        x = y / total;
    }
    if x.iter().any(|c| !(*c > 0.0)) {
        return None;
    }
    let rho = (m * &x).sum() / x.sum();
    Some((rho, x.iter().copied().collect()))
}

fn inf_norm(m: &DMatrix<f64>) -> f64 {
    m.row_iter().map(|r| r.iter().map(|x| x.abs()).sum::<f64>()).fold(0.0, f64::max)
}

/// `Σ_i A⁽ⁱ⁾` of a parametrization (symmetric, in grid order).
pub fn block_sum(p: &Parametrization) -> Result<DMatrix<f64>> {
    let dec = block_decompose(p)?;
    let n = p.shape().num_states();
    Ok((0..p.shape().q()).fold(DMatrix::zeros(n, n), |acc, axis| acc + dec.block_diagonal(axis)))
}

/// Everything computed by [`normalization`].
#[derive(Debug, Clone, PartialEq)]
pub struct Normalization {
    pub params: Parametrization,
    pub rho: f64,
    pub perron_vector: Vec<f64>,
    /// Factor applied to every `Γ`.
    pub scale: f64,
}

/// Scale `Γ` by `(1 − a)/ρ` and replace `α` by reciprocal Perron components,
/// with `α` at the origin equal to 1.
pub fn normalization(p: &Parametrization, alpha_self: f64) -> Result<Normalization> {
    if !(0.0..1.0).contains(&alpha_self) {
        return Err(GbdpError::Domain(format!(
            "self-transition probability {alpha_self} outside [0,1)"
        )));
    }
    let m = block_sum(p)?;
    let pr = perron(&m, 1e-10)?;
    let scale = (1.0 - alpha_self) / pr.rho;
    let v0 = pr.vector[0];
    let alpha: Vec<f64> = pr.vector.iter().map(|x| v0 / x).collect();
    let gamma = p.gamma().iter().map(|(c, g)| (*c, g * scale)).collect();
    let params = Parametrization::new(p.shape().clone(), alpha, gamma)?;
    Ok(Normalization {
        params,
        rho: pr.rho,
        perron_vector: pr.vector,
        scale,
    })
}

pub fn normalize_stochastic(p: &Parametrization, alpha_self: f64) -> Result<Parametrization> {
    Ok(normalization(p, alpha_self)?.params)
}

/// Every row sum lies in `[1 − tol, 1 + tol]`.
pub fn is_stochastic(p: &DMatrix<f64>, tol: f64) -> Result<bool> {
    check_nonnegative_square(p)?;
    Ok(p.row_iter().all(|r| (r.sum() - 1.0).abs() <= tol))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::commute::max_commutator;
    use crate::lattice::GridShape;
    use crate::param::build_model;

    #[test]
    fn all_ones() {
        let pr = perron(&DMatrix::from_element(3, 3, 1.0), 1e-10).unwrap();
        assert!((pr.rho - 3.0).abs() < 1e-12);
        assert!(pr.vector.iter().all(|x| (x - 1.0 / 3.0).abs() < 1e-12));
    }

    #[test]
    fn periodic_swap() {
        let m = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]);
        let pr = perron(&m, 1e-10).unwrap();
        assert!((pr.rho - 1.0).abs() < 1e-12);
        assert!(pr.vector.iter().all(|x| (x - 0.5).abs() < 1e-12));
        let pr = perron_from(&m, 1e-10, &[0.9, 0.1]).unwrap();
        assert!(pr.vector.iter().all(|x| (x - 0.5).abs() < 1e-12));
    }

    #[test]
    fn reducible_and_negative_rejected() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 0.0, 1.0]);
        assert!(matches!(perron(&m, 1e-10), Err(GbdpError::Structure(_))));
        let m = DMatrix::from_row_slice(2, 2, &[0.0, -1.0, 1.0, 0.0]);
        assert!(matches!(perron(&m, 1e-10), Err(GbdpError::Domain(_))));
    }

    #[test]
    fn uniform_example() {
        let p = Parametrization::uniform(GridShape::balanced(vec![2, 2], 2).unwrap(), 1.0).unwrap();
        let norm = normalization(&p, 0.0).unwrap();
        assert!((norm.rho - 4.0).abs() < 1e-12);
        assert!(norm.params.gamma().values().all(|g| (g - 0.25).abs() < 1e-15));
        assert!(norm.params.alpha().iter().all(|a| (a - 1.0).abs() < 1e-12));
        let full = build_model(&norm.params).full_matrix();
        assert!(is_stochastic(&full, 1e-10).unwrap());
        let half = normalization(&p, 0.5).unwrap();
        assert!((half.scale - norm.scale / 2.0).abs() < 1e-15);
    }

    #[test]
    fn unequal_gammas_become_stochastic() {
        let s = GridShape::balanced(vec![2, 3], 1).unwrap();
        let classes = crate::param::edge_classes(&s).unwrap();
        let gamma = classes.iter().enumerate().map(|(k, c)| (*c, 0.5 + 0.3 * k as f64)).collect();
        let p = Parametrization::new(s, vec![1.0; 12], gamma).unwrap();
        let out = normalize_stochastic(&p, 0.2).unwrap();
        let m = build_model(&out);
        let full = m.full_matrix() + DMatrix::identity(12, 12) * 0.2;
        assert!(is_stochastic(&full, 1e-10).unwrap());
        assert!(max_commutator(&m) <= 1e-12);
        assert_eq!(out.alpha()[0], 1.0);
    }

    #[test]
    fn zero_gamma_is_reducible() {
        let p = Parametrization::uniform(GridShape::balanced(vec![2, 2], 1).unwrap(), 0.0).unwrap();
        assert!(matches!(normalize_stochastic(&p, 0.0), Err(GbdpError::Structure(_))));
    }

    #[test]
    fn stochastic_predicate() {
        assert!(is_stochastic(&DMatrix::identity(3, 3), 1e-12).unwrap());
        assert!(!is_stochastic(&DMatrix::zeros(3, 3), 1e-12).unwrap());
        assert!(is_stochastic(&DMatrix::from_row_slice(1, 1, &[-0.5]), 1e-12).is_err());
    }
}
