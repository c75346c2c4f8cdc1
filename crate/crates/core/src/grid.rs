//! Uniform grids on the truncated s-line and the discrete operators on them.
//!
//! Derivatives use five-point fourth-order stencils. The two ghost nodes
//! past each end are filled either by odd reflection about a prescribed
//! slope (for `log gtilde`, whose tails are asymptotically linear) or by even
//! reflection (for fields that flatten out at the poles).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MIN_NODES: usize = 33;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    half_width: f64,
    len: usize,
}

impl Grid {
    pub fn new(half_width: f64, len: usize) -> Result<Self> {
        if !(half_width.is_finite() && half_width > 0.0) {
            return Err(Error::Argument(format!(
                "grid half-width must be positive, got {half_width}"
            )));
        }
        if len < MIN_NODES || len % 2 == 0 {
            return Err(Error::Argument(format!(
                "grid needs an odd number of nodes >= {MIN_NODES}, got {len}"
            )));
        }
        Ok(Self { half_width, len })
    }

    pub fn half_width(&self) -> f64 {
        self.half_width
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn spacing(&self) -> f64 {
        2.0 * self.half_width / (self.len - 1) as f64
    }

    pub fn node(&self, i: usize) -> f64 {
        // Symmetric about the centre so that s = 0 is hit exactly.
        let c = (self.len / 2) as f64;
        (i as f64 - c) * self.spacing()
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.len).map(|i| self.node(i)).collect()
    }

    pub fn center_index(&self) -> usize {
        self.len / 2
    }

    /// Same domain with the spacing halved.
    pub fn refined(&self) -> Self {
        Self {
            half_width: self.half_width,
            len: 2 * self.len - 1,
        }
    }

    /// Fractional index of a coordinate (not clamped).
    pub fn position(&self, s: f64) -> f64 {
        s / self.spacing() + (self.len / 2) as f64
    }
}

/// How values are continued past the ends of the grid.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Ghost {
    /// Odd reflection with slope `left` at the left end and `-right` at the
    /// right end: `u[-j] = u[j] - 2jh*left`, `u[n-1+j] = u[n-1-j] - 2jh*right`.
    Slopes { left: f64, right: f64 },
    /// Even reflection: zero slope at both ends.
    Even,
}

impl Ghost {
    fn fill(&self, u: &[f64], h: f64) -> [f64; 4] {
        let n = u.len();
        let (l, r) = match *self {
            Ghost::Slopes { left, right } => (left, right),
            Ghost::Even => (0.0, 0.0),
        };
        [
            u[2] - 4.0 * h * l,
            u[1] - 2.0 * h * l,
            u[n - 2] - 2.0 * h * r,
            u[n - 3] - 4.0 * h * r,
        ]
    }
}

fn with_ghosts(u: &[f64], ghost: Ghost, h: f64) -> Vec<f64> {
    let g = ghost.fill(u, h);
    let mut e = Vec::with_capacity(u.len() + 4);
    e.extend_from_slice(&g[..2]);
    e.extend_from_slice(u);
    e.extend_from_slice(&g[2..]);
    e
}

pub const D1_STENCIL: [f64; 5] = [1.0, -8.0, 0.0, 8.0, -1.0];
pub const D2_STENCIL: [f64; 5] = [-1.0, 16.0, -30.0, 16.0, -1.0];

pub fn first_derivative(u: &[f64], ghost: Ghost, h: f64) -> Vec<f64> {
    let e = with_ghosts(u, ghost, h);
    let scale = 1.0 / (12.0 * h);
    e.windows(5)
        .map(|w| scale * (w[0] - 8.0 * w[1] + 8.0 * w[3] - w[4]))
        .collect()
}

pub fn second_derivative(u: &[f64], ghost: Ghost, h: f64) -> Vec<f64> {
    let e = with_ghosts(u, ghost, h);
    let scale = 1.0 / (12.0 * h * h);
    e.windows(5)
        .map(|w| scale * (-w[0] + 16.0 * w[1] - 30.0 * w[2] + 16.0 * w[3] - w[4]))
        .collect()
}

/// Composite trapezoid rule.
pub fn trapezoid(f: &[f64], h: f64) -> f64 {
    let n = f.len();
    if n < 2 {
        return 0.0;
    }
    let inner: f64 = f[1..n - 1].iter().sum();
    h * (inner + 0.5 * (f[0] + f[n - 1]))
}

/// Trapezoid rule restricted to the nodes where `keep` holds.
pub fn masked_trapezoid(f: &[f64], keep: &[bool], h: f64) -> f64 {
    let n = f.len();
    let mut acc = 0.0;
    for i in 0..n {
        if keep[i] {
            let w = if i == 0 || i == n - 1 { 0.5 } else { 1.0 };
            acc += w * f[i];
        }
    }
    h * acc
}

/// Running integral `int_{s_0}^{s_i} f` with the Euler–Maclaurin end
/// correction, fourth order given the derivative `df`.
pub fn cumulative_from_left(f: &[f64], df: &[f64], h: f64) -> Vec<f64> {
    let n = f.len();
    let mut out = Vec::with_capacity(n);
    let mut acc = 0.0;
    out.push(0.0);
    for i in 1..n {
        acc += 0.5 * h * (f[i] + f[i - 1]);
        out.push(acc - h * h / 12.0 * (df[i] - df[0]));
    }
    out
}

/// Running integral `int_{s_i}^{s_{n-1}} f`, same accuracy as
/// [`cumulative_from_left`].
pub fn cumulative_from_right(f: &[f64], df: &[f64], h: f64) -> Vec<f64> {
    let n = f.len();
    let mut out = vec![0.0; n];
    let mut acc = 0.0;
    for i in (0..n - 1).rev() {
        acc += 0.5 * h * (f[i] + f[i + 1]);
        out[i] = acc - h * h / 12.0 * (df[n - 1] - df[i]);
    }
    out
}

/// Square matrix with `BAND` sub- and super-diagonals, factored by Gaussian
/// elimination with partial pivoting.
#[derive(Clone, Debug)]
pub struct BandedMatrix {
    n: usize,
    // Row-major storage of columns i-BAND ..= i+2*BAND (fill-in from pivoting).
    rows: Vec<[f64; WIDTH]>,
}

const BAND: usize = 2;
const WIDTH: usize = 3 * BAND + 1;

impl BandedMatrix {
    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            rows: vec![[0.0; WIDTH]; n],
        }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// Adds `value` at `(row, col)`; `|row - col|` must not exceed the band.
    pub fn add(&mut self, row: usize, col: usize, value: f64) {
        let off = col as isize - row as isize + BAND as isize;
        assert!(
            (0..=2 * BAND as isize).contains(&off),
            "entry ({row}, {col}) outside the band"
        );
        self.rows[row][off as usize] += value;
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        let off = col as isize - row as isize + BAND as isize;
        if (0..WIDTH as isize).contains(&off) {
            self.rows[row][off as usize]
        } else {
            0.0
        }
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        (0..self.n)
            .map(|i| {
                let mut acc = 0.0;
                for (k, a) in self.rows[i].iter().enumerate() {
                    let j = i as isize + k as isize - BAND as isize;
                    if *a != 0.0 && j >= 0 && (j as usize) < self.n {
                        acc += a * x[j as usize];
                    }
                }
                acc
            })
            .collect()
    }

    /// Solves `A x = b`. Returns `None` on a zero pivot or non-finite result.
    pub fn solve(self, b: &[f64]) -> Option<Vec<f64>> {
        self.factor()?.solve(b)
    }

    /// Solves `A x = b` followed by one step of iterative refinement.
    ///
    /// Rows of the flow matrices differ in scale by many orders of magnitude,
    /// and plain elimination leaves localized errors far above rounding level
    /// in the small-scale rows. One correction removes them.
    pub fn solve_refined(&self, b: &[f64]) -> Option<Vec<f64>> {
        let lu = self.clone().factor()?;
        let mut x = lu.solve(b)?;
        let ax = self.mul_vec(&x);
        let residual: Vec<f64> = b.iter().zip(&ax).map(|(p, q)| p - q).collect();
        let correction = lu.solve(&residual)?;
        x.iter_mut().zip(&correction).for_each(|(v, c)| *v += c);
        Some(x)
    }

    /// LU factorization with partial pivoting; `None` on a zero pivot.
    pub fn factor(mut self) -> Option<BandedLu> {
        let n = self.n;
        let col = |row: usize, k: usize| k as isize - row as isize + BAND as isize;
        let mut pivots = Vec::with_capacity(n);
        let mut multipliers = vec![[0.0; BAND]; n];
        for k in 0..n {
            let last = (k + BAND).min(n - 1);
            let mut piv = k;
            let mut best = self.rows[k][col(k, k) as usize].abs();
            for r in k + 1..=last {
                let v = self.rows[r][col(r, k) as usize].abs();
                if v > best {
                    best = v;
                    piv = r;
                }
            }
            if best == 0.0 || !best.is_finite() {
                return None;
            }
            if piv != k {
                // Swap rows k and piv over columns k ..= k + 2*BAND.
                for c in k..=(k + 2 * BAND).min(n - 1) {
                    let (a, b) = (col(k, c), col(piv, c));
                    let t = self.rows[k][a as usize];
                    self.rows[k][a as usize] = if (0..WIDTH as isize).contains(&b) {
                        self.rows[piv][b as usize]
                    } else {
                        0.0
                    };
                    if (0..WIDTH as isize).contains(&b) {
                        self.rows[piv][b as usize] = t;
                    }
                }
            }
            pivots.push(piv);
            let pivot = self.rows[k][col(k, k) as usize];
            for r in k + 1..=last {
                let factor = self.rows[r][col(r, k) as usize] / pivot;
                multipliers[k][r - k - 1] = factor;
                if factor == 0.0 {
                    continue;
                }
                self.rows[r][col(r, k) as usize] = 0.0;
                for c in k + 1..=(k + 2 * BAND).min(n - 1) {
                    let (a, b) = (col(r, c), col(k, c));
                    if (0..WIDTH as isize).contains(&a) && (0..WIDTH as isize).contains(&b) {
                        self.rows[r][a as usize] -= factor * self.rows[k][b as usize];
                    }
                }
            }
        }
        Some(BandedLu {
            upper: self,
            pivots,
            multipliers,
        })
    }
}

/// Factors produced by [`BandedMatrix::factor`].
#[derive(Clone, Debug)]
pub struct BandedLu {
    upper: BandedMatrix,
    pivots: Vec<usize>,
    multipliers: Vec<[f64; BAND]>,
}

impl BandedLu {
    /// Solves with the stored factors; `None` if the result is not finite.
    pub fn solve(&self, b: &[f64]) -> Option<Vec<f64>> {
        let n = self.upper.n;
        if b.len() != n {
            return None;
        }
        let mut rhs = b.to_vec();
        for k in 0..n {
            rhs.swap(k, self.pivots[k]);
            for (j, m) in self.multipliers[k].iter().enumerate() {
                let r = k + 1 + j;
                if r < n {
                    rhs[r] -= m * rhs[k];
                }
            }
        }
        let rows = &self.upper.rows;
        let mut x = vec![0.0; n];
        for k in (0..n).rev() {
            let mut acc = rhs[k];
            for c in k + 1..=(k + 2 * BAND).min(n - 1) {
                acc -= rows[k][c - k + BAND] * x[c];
            }
            x[k] = acc / rows[k][BAND];
            if !x[k].is_finite() {
                return None;
            }
        }
        Some(x)
    }
}
