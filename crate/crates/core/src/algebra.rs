//! Integer constraint matrix `Q` and parameter matrix `R` with exact ranks.
//!
//! Columns of both matrices are the directed edges of the grid in
//! [`Grid::directed_edges`] order. A row of `Q` is one bilinear identity
//! `p(u, m)p(m, w) = p(u, m')p(m', w)` written in log space: `+1` at
//! `(u, m)` and `(m, w)`, `−1` at `(u, m')` and `(m', w)`. `R` has one row
//! per vertex parameter `α_u` followed by one row per edge class; column
//! `(u, v)` carries `+1` at `α_u`, `−1` at `α_v` and `+1` at its class.
//!
//! Ranks are computed over the rationals with sparse fraction-free
//! elimination. Rows are kept primitive (content divided out), which keeps
//! entries tiny for these matrices; the `i128` pass falls back to big
//! integers on overflow.

use std::collections::HashMap;
use std::fmt;

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{Signed, Zero};

use crate::error::{GbdpError, Result};
use crate::lattice::{Grid, GridShape};
use crate::param::{edge_class_of, edge_classes};

/// Dense integer matrix with row and column legends.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IntMatrix {
    rows: usize,
    cols: usize,
    data: Vec<i64>,
    row_labels: Vec<String>,
    col_labels: Vec<String>,
}

impl IntMatrix {
    pub fn zeros(rows: usize, cols: usize, row_labels: Vec<String>, col_labels: Vec<String>) -> Self {
        assert_eq!(row_labels.len(), rows, "row legend length");
        assert_eq!(col_labels.len(), cols, "column legend length");
        IntMatrix {
            rows,
            cols,
            data: vec![0; rows * cols],
            row_labels,
            col_labels,
        }
    }

    /// Rows given explicitly; legends are the indices.
    pub fn from_rows(rows: &[Vec<i64>]) -> Self {
        let cols = rows.first().map_or(0, |r| r.len());
        assert!(rows.iter().all(|r| r.len() == cols), "ragged rows");
        let mut m = IntMatrix::zeros(
            rows.len(),
            cols,
            (0..rows.len()).map(|i| i.to_string()).collect(),
            (0..cols).map(|j| j.to_string()).collect(),
        );
        for (i, r) in rows.iter().enumerate() {
            m.data[i * cols..(i + 1) * cols].copy_from_slice(r);
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, r: usize, c: usize) -> i64 {
        assert!(r < self.rows && c < self.cols);
        self.data[r * self.cols + c]
    }

    pub fn set(&mut self, r: usize, c: usize, v: i64) {
        assert!(r < self.rows && c < self.cols);
        self.data[r * self.cols + c] = v;
    }

    pub fn row_labels(&self) -> &[String] {
        &self.row_labels
    }

    pub fn col_labels(&self) -> &[String] {
        &self.col_labels
    }

    pub fn row(&self, r: usize) -> &[i64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn to_rows(&self) -> Vec<Vec<i64>> {
        (0..self.rows).map(|r| self.row(r).to_vec()).collect()
    }

    /// `(column, value)` pairs of one row, increasing column.
    pub fn row_nonzeros(&self, r: usize) -> Vec<(usize, i64)> {
        self.row(r)
            .iter()
            .enumerate()
            .filter(|(_, &v)| v != 0)
            .map(|(c, &v)| (c, v))
            .collect()
    }

    /// `(row, column, value)` triplets in row-major order.
    pub fn triplets(&self) -> Vec<(usize, usize, i64)> {
        (0..self.rows)
            .flat_map(|r| self.row_nonzeros(r).into_iter().map(move |(c, v)| (r, c, v)))
            .collect()
    }

    pub fn is_zero(&self) -> bool {
        self.data.iter().all(|&v| v == 0)
    }

    pub fn transpose(&self) -> IntMatrix {
        let mut t = IntMatrix::zeros(self.cols, self.rows, self.col_labels.clone(), self.row_labels.clone());
        for (r, c, v) in self.triplets() {
            t.set(c, r, v);
        }
        t
    }

    /// `self · otherᵀ`, computed sparsely. Both operands must share columns.
    pub fn mul_transpose(&self, other: &IntMatrix) -> IntMatrix {
        assert_eq!(self.cols, other.cols, "column counts differ");
        let mut by_col: Vec<Vec<(usize, i64)>> = vec![Vec::new(); other.cols];
        for (r, c, v) in other.triplets() {
            by_col[c].push((r, v));
        }
        let mut out = IntMatrix::zeros(
            self.rows,
            other.rows,
            self.row_labels.clone(),
            other.row_labels.clone(),
        );
        for a in 0..self.rows {
            for (c, x) in self.row_nonzeros(a) {
                for &(b, y) in &by_col[c] {
                    let cur = out.get(a, b);
                    out.set(a, b, cur + x * y);
                }
            }
        }
        out
    }
}

/// Integer arithmetic used by the elimination; `None` signals overflow.
trait Exact: Clone + PartialEq {
    fn from_i64(v: i64) -> Self;
    fn zero_p(&self) -> bool;
    fn negative(&self) -> bool;
    fn negate(&self) -> Self;
    fn gcd_with(&self, o: &Self) -> Self;
    fn div_by(&self, d: &Self) -> Self;
    fn is_one(&self) -> bool;
    /// `a·x − b·y`
    fn cross(a: &Self, x: &Self, b: &Self, y: &Self) -> Option<Self>;
}

impl Exact for i128 {
    fn from_i64(v: i64) -> Self {
        v as i128
    }
    fn zero_p(&self) -> bool {
        *self == 0
    }
    fn negative(&self) -> bool {
        *self < 0
    }
    fn negate(&self) -> Self {
        -*self
    }
    fn gcd_with(&self, o: &Self) -> Self {
        self.gcd(o)
    }
    fn div_by(&self, d: &Self) -> Self {
        *self / *d
    }
    fn is_one(&self) -> bool {
        *self == 1
    }
    fn cross(a: &Self, x: &Self, b: &Self, y: &Self) -> Option<Self> {
        a.checked_mul(*x)?.checked_sub(b.checked_mul(*y)?)
    }
}

impl Exact for BigInt {
    fn from_i64(v: i64) -> Self {
        BigInt::from(v)
    }
    fn zero_p(&self) -> bool {
        self.is_zero()
    }
    fn negative(&self) -> bool {
        self.is_negative()
    }
    fn negate(&self) -> Self {
        -self
    }
    fn gcd_with(&self, o: &Self) -> Self {
        self.gcd(o)
    }
    fn div_by(&self, d: &Self) -> Self {
        self / d
    }
    fn is_one(&self) -> bool {
        *self == BigInt::from(1)
    }
    fn cross(a: &Self, x: &Self, b: &Self, y: &Self) -> Option<Self> {
        Some(a * x - b * y)
    }
}

type SparseRow<T> = Vec<(usize, T)>;

/// Divide out the content and make the leading entry positive.
fn make_primitive<T: Exact>(row: &mut SparseRow<T>) {
    let Some(first) = row.first() else { return };
    let mut g = first.1.gcd_with(&first.1);
    for (_, v) in row.iter().skip(1) {
        if g.is_one() {
            break;
        }
        g = g.gcd_with(v);
    }
    if row[0].1.negative() {
        g = g.negate();
    }
    if !g.is_one() {
        for (_, v) in row.iter_mut() {
            *v = v.div_by(&g);
        }
    }
}

/// Cancel the leading entry of `cur` against pivot row `p` with the same lead.
fn cancel<T: Exact>(cur: &SparseRow<T>, p: &SparseRow<T>) -> Option<SparseRow<T>> {
    let (a, b) = (&cur[0].1, &p[0].1);
    let g = a.gcd_with(b);
    let (a, b) = (a.div_by(&g), b.div_by(&g));
    let zero = T::from_i64(0);
    let mut out = Vec::with_capacity(cur.len() + p.len());
    let (mut i, mut j) = (1, 1);
    while i < cur.len() || j < p.len() {
        let ci = cur.get(i).map_or(usize::MAX, |e| e.0);
        let cj = p.get(j).map_or(usize::MAX, |e| e.0);
        let (col, v) = if ci < cj {
            i += 1;
            (ci, T::cross(&b, &cur[i - 1].1, &a, &zero)?)
        } else if cj < ci {
            j += 1;
            (cj, T::cross(&b, &zero, &a, &p[j - 1].1)?)
        } else {
            i += 1;
            j += 1;
            (ci, T::cross(&b, &cur[i - 1].1, &a, &p[j - 1].1)?)
        };
        if !v.zero_p() {
            out.push((col, v));
        }
    }
    make_primitive(&mut out);
    Some(out)
}

fn eliminate<T: Exact>(rows: &[Vec<(usize, i64)>], cols: usize) -> Option<usize> {
    let mut pivots: Vec<Option<SparseRow<T>>> = vec![None; cols];
    let mut rank = 0;
    for r in rows {
        let mut cur: SparseRow<T> = r.iter().map(|&(c, v)| (c, T::from_i64(v))).collect();
        make_primitive(&mut cur);
        while let Some(lead) = cur.first().map(|e| e.0) {
            match &pivots[lead] {
                Some(p) => cur = cancel(&cur, p)?,
                None => break,
            }
        }
        if let Some(lead) = cur.first().map(|e| e.0) {
            pivots[lead] = Some(cur);
            rank += 1;
        }
    }
    Some(rank)
}

/// Rank over the rationals, exact.
pub fn integer_rank(m: &IntMatrix) -> usize {
    let rows: Vec<Vec<(usize, i64)>> = (0..m.rows())
        .map(|r| m.row_nonzeros(r))
        .filter(|r| !r.is_empty())
        .collect();
    eliminate::<i128>(&rows, m.cols()).unwrap_or_else(|| {
        eliminate::<BigInt>(&rows, m.cols()).expect("big integer elimination cannot overflow")
    })
}

fn require_balanced(shape: &GridShape) -> Result<usize> {
    shape.common_jump().ok_or_else(|| {
        GbdpError::Unsupported(format!(
            "constraint and parameter matrices need l1 = l2, got l1 = {}, l2 = {}",
            shape.l1(),
            shape.l2()
        ))
    })
}

fn edge_labels(grid: &Grid) -> (Vec<String>, HashMap<(usize, usize), usize>) {
    let edges = grid.directed_edges();
    let mut index = HashMap::with_capacity(edges.len());
    let labels = edges
        .iter()
        .enumerate()
        .map(|(c, e)| {
            let (u, v) = (grid.index_of(&e.from).unwrap(), grid.index_of(&e.to).unwrap());
            index.insert((u, v), c);
            format!("{}->{}", e.from, e.to)
        })
        .collect();
    (labels, index)
}

/// Constraint matrix: one row per in-grid bilinear identity, for axis pairs
/// `a < b`, base states in index order, then steps along `a` and `b`.
pub fn build_q(shape: &GridShape) -> Result<IntMatrix> {
    require_balanced(shape)?;
    let grid = Grid::new(shape.clone());
    let (col_labels, col) = edge_labels(&grid);
    let steps: Vec<isize> = shape.steps().collect();
    let mut entries: Vec<[(usize, i64); 4]> = Vec::new();
    let mut row_labels = Vec::new();
    let q = shape.q();
    for a in 0..q {
        for b in a + 1..q {
            for u in 0..grid.len() {
                for &s in &steps {
                    for &t in &steps {
                        let (Some(m1), Some(m2)) = (grid.neighbor(u, a, s), grid.neighbor(u, b, t)) else {
                            continue;
                        };
                        let Some(w) = grid.neighbor(m1, b, t) else { continue };
                        entries.push([
                            (col[&(u, m1)], 1),
                            (col[&(m1, w)], 1),
                            (col[&(u, m2)], -1),
                            (col[&(m2, w)], -1),
                        ]);
                        row_labels.push(format!(
                            "u={} dirs=({},{}) steps=({:+},{:+})",
                            grid.state(u),
                            a + 1,
                            b + 1,
                            s,
                            t
                        ));
                    }
                }
            }
        }
    }
    let mut m = IntMatrix::zeros(entries.len(), col_labels.len(), row_labels, col_labels);
    for (r, row) in entries.iter().enumerate() {
        for &(c, v) in row {
            m.set(r, c, v);
        }
    }
    Ok(m)
}

/// Parameter matrix: vertex rows in grid order, then edge-class rows.
pub fn build_r(shape: &GridShape) -> Result<IntMatrix> {
    let classes = edge_classes(shape)?;
    let grid = Grid::new(shape.clone());
    let (col_labels, _) = edge_labels(&grid);
    let n = grid.len();
    let class_row: HashMap<_, _> = classes.iter().enumerate().map(|(k, c)| (*c, n + k)).collect();
    let row_labels = grid
        .states()
        .iter()
        .map(|s| format!("alpha{s}"))
        .chain(classes.iter().map(|c| c.to_string()))
        .collect();
    let mut m = IntMatrix::zeros(n + classes.len(), col_labels.len(), row_labels, col_labels);
    for (c, e) in grid.directed_edges().iter().enumerate() {
        let (u, v) = (grid.index_of(&e.from).unwrap(), grid.index_of(&e.to).unwrap());
        m.set(u, c, 1);
        m.set(v, c, -1);
        m.set(class_row[&edge_class_of(shape, &e.from, &e.to)?], c, 1);
    }
    Ok(m)
}

fn prod_except(dims: &[usize], skip: &[usize]) -> usize {
    dims.iter()
        .enumerate()
        .filter(|(k, _)| !skip.contains(k))
        .map(|(_, &n)| n + 1)
        .product()
}

/// Number of directed edges, `2 Σ_i Σ_x (n_i − x + 1) Π_{j≠i}(n_j + 1)`.
pub fn edge_count_formula(shape: &GridShape) -> Result<usize> {
    let l = require_balanced(shape)?;
    let d = shape.dims();
    Ok(2 * (0..d.len())
        .map(|i| (1..=l).map(|x| d[i] - x + 1).sum::<usize>() * prod_except(d, &[i]))
        .sum::<usize>())
}

/// `(rows, cols)` of `Q` from the closed-form order expression.
pub fn q_order_formula(shape: &GridShape) -> Result<(usize, usize)> {
    let l = require_balanced(shape)?;
    let d = shape.dims();
    let mut rows = 0;
    for i in 0..d.len() {
        for j in 0..i {
            let per: usize = (1..=l)
                .flat_map(|x| (1..=l).map(move |y| (d[j] - y + 1) * (d[i] - x + 1)))
                .sum();
            rows += 4 * per * prod_except(d, &[i, j]);
        }
    }
    Ok((rows, edge_count_formula(shape)?))
}

/// `(rows, cols)` of `R` from the closed-form order expression.
pub fn r_order_formula(shape: &GridShape) -> Result<(usize, usize)> {
    let l = require_balanced(shape)?;
    let d = shape.dims();
    let classes: usize = d.iter().map(|&n| (1..=l).map(|x| n - x + 1).sum::<usize>()).sum();
    Ok((classes + shape.num_states(), edge_count_formula(shape)?))
}

/// Number of `(base, step, step)` combinations over all axis pairs,
/// counting rectangles that leave the grid.
pub fn constraint_count_all_bases(shape: &GridShape) -> usize {
    let q = shape.q();
    let steps = shape.l1() + shape.l2();
    q * (q - 1) / 2 * steps * steps * shape.num_states()
}

/// `l Σ n_i + Π(n_i + 1) − q(l − 1)l/2 − 1`.
pub fn rank_formula_r(shape: &GridShape) -> Result<i64> {
    let l = require_balanced(shape)? as i64;
    let q = shape.q() as i64;
    let sum: i64 = shape.dims().iter().map(|&n| n as i64).sum();
    Ok(l * sum + shape.num_states() as i64 - q * (l - 1) * l / 2 - 1)
}

/// Column count minus [`rank_formula_r`].
pub fn rank_formula_q(shape: &GridShape) -> Result<i64> {
    Ok(edge_count_formula(shape)? as i64 - rank_formula_r(shape)?)
}

/// `Σ_i [(l − 1) n_i − l(l − 1)/2]`.
///
/// Along a single line with `l ≥ 2` the triangles `r → r+x → r+x+y` versus
/// `r → r+x+y` close cycles that no rectangle identity touches, so the
/// null space of `Q` exceeds the row space of `R` by this many dimensions.
/// Zero when `l = 1`.
pub fn line_cycle_deficit(shape: &GridShape) -> Result<i64> {
    let l = require_balanced(shape)? as i64;
    Ok(shape
        .dims()
        .iter()
        .map(|&n| (l - 1) * n as i64 - l * (l - 1) / 2)
        .sum())
}

/// Facts about `Q` and `R` for one shape.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OrthoReport {
    pub q_order: (usize, usize),
    pub r_order: (usize, usize),
    pub q_order_formula: (usize, usize),
    pub r_order_formula: (usize, usize),
    pub constraints_all_bases: usize,
    pub rank_q: usize,
    pub rank_r: usize,
    pub rank_formula_q: i64,
    pub rank_formula_r: i64,
    pub line_cycle_deficit: i64,
    /// `Q Rᵀ` is the zero matrix.
    pub orthogonal: bool,
}

impl OrthoReport {
    pub fn columns(&self) -> usize {
        self.q_order.1
    }

    /// `rank Q + rank R` equals the column count.
    pub fn complementary(&self) -> bool {
        self.rank_q + self.rank_r == self.columns()
    }
}

impl fmt::Display for OrthoReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "Q: {}x{} rank {} (formula {})",
            self.q_order.0, self.q_order.1, self.rank_q, self.rank_formula_q
        )?;
        writeln!(
            f,
            "R: {}x{} rank {} (formula {})",
            self.r_order.0, self.r_order.1, self.rank_r, self.rank_formula_r
        )?;
        writeln!(
            f,
            "order formulas: Q {}x{}, R {}x{}; constraints counting clipped rectangles: {}",
            self.q_order_formula.0,
            self.q_order_formula.1,
            self.r_order_formula.0,
            self.r_order_formula.1,
            self.constraints_all_bases
        )?;
        writeln!(f, "QR^T=0: {}", if self.orthogonal { "yes" } else { "no" })?;
        write!(
            f,
            "rank Q + rank R = {} of {} columns: {} (line-cycle deficit {})",
            self.rank_q + self.rank_r,
            self.columns(),
            if self.complementary() { "complementary" } else { "not complementary" },
            self.line_cycle_deficit
        )
    }
}

/// Build `Q` and `R`, check `Q Rᵀ = 0` and compare exact ranks with the formulas.
pub fn verify_orthocomplement(shape: &GridShape) -> Result<OrthoReport> {
    let q = build_q(shape)?;
    let r = build_r(shape)?;
    let (rank_q, rank_r) = rayon::join(|| integer_rank(&q), || integer_rank(&r));
    Ok(OrthoReport {
        q_order: (q.rows(), q.cols()),
        r_order: (r.rows(), r.cols()),
        q_order_formula: q_order_formula(shape)?,
        r_order_formula: r_order_formula(shape)?,
        constraints_all_bases: constraint_count_all_bases(shape),
        rank_q,
        rank_r,
        rank_formula_q: rank_formula_q(shape)?,
        rank_formula_r: rank_formula_r(shape)?,
        line_cycle_deficit: line_cycle_deficit(shape)?,
        orthogonal: q.mul_transpose(&r).is_zero(),
    })
}
