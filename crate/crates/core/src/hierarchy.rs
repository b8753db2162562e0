//! The ladder of operators ρ_{m,n}, 0 ≤ m, n ≤ N.
//!
//! Only blocks with m ≤ n are stored; ρ_{n,m} is read back as ρ_{m,n}†, and any
//! negative index reads as the zero matrix.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::linalg::{self, c, CMat, C64};
use crate::system::FieldState;

/// Upper-triangular block storage shared by states and derivatives.
#[derive(Clone, Debug, PartialEq)]
pub struct BlockTriangle {
    n_max: usize,
    dim: usize,
    blocks: Vec<CMat>,
}

/// dρ_{m,n}/dt or an unnormalized update; same layout as the state.
pub type HierarchyDerivative = BlockTriangle;

#[inline]
fn index(m: usize, n: usize) -> usize {
    n * (n + 1) / 2 + m
}

pub fn stored_block_count(n_max: usize) -> usize {
    (n_max + 1) * (n_max + 2) / 2
}

impl BlockTriangle {
    pub fn zeros(n_max: usize, dim: usize) -> Self {
        Self {
            n_max,
            dim,
            blocks: vec![linalg::zeros(dim); stored_block_count(n_max)],
        }
    }

    pub fn n_max(&self) -> usize {
        self.n_max
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn stored_count(&self) -> usize {
        self.blocks.len()
    }

    /// Stored block with m ≤ n.
    #[inline]
    pub fn upper(&self, m: usize, n: usize) -> &CMat {
        debug_assert!(m <= n && n <= self.n_max);
        &self.blocks[index(m, n)]
    }

    #[inline]
    pub fn upper_mut(&mut self, m: usize, n: usize) -> &mut CMat {
        debug_assert!(m <= n && n <= self.n_max);
        &mut self.blocks[index(m, n)]
    }

    /// Total accessor: any (m, n), zero for negative or out-of-range indices.
    pub fn get(&self, m: isize, n: isize) -> CMat {
        if m < 0 || n < 0 || m as usize > self.n_max || n as usize > self.n_max {
            return linalg::zeros(self.dim);
        }
        let (m, n) = (m as usize, n as usize);
        if m <= n {
            self.upper(m, n).clone()
        } else {
            self.upper(n, m).adjoint()
        }
    }

    /// Iterates `(m, n, block)` over stored blocks.
    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, &CMat)> {
        (0..=self.n_max).flat_map(move |n| (0..=n).map(move |m| (m, n, self.upper(m, n))))
    }

    pub fn set(&mut self, m: usize, n: usize, value: CMat) {
        if m <= n {
            *self.upper_mut(m, n) = value;
        } else {
            *self.upper_mut(n, m) = value.adjoint();
        }
    }

    pub fn scale_mut(&mut self, f: f64) {
        for b in self.blocks.iter_mut() {
            *b *= c(f, 0.0);
        }
    }

    pub fn add_scaled(&mut self, other: &BlockTriangle, f: f64) {
        for (a, b) in self.blocks.iter_mut().zip(other.blocks.iter()) {
            *a += b * c(f, 0.0);
        }
    }

    pub fn blocks_mut(&mut self) -> impl Iterator<Item = &mut CMat> {
        self.blocks.iter_mut()
    }

    /// Replaces each diagonal block by its Hermitian part.
    pub fn symmetrize_diagonal(&mut self) {
        for n in 0..=self.n_max {
            let b = self.upper_mut(n, n);
            *b = linalg::hermitian_part(b);
        }
    }

    /// Σ c_{m,n} ρ_{m,n} over all pairs present in both the field and the ladder.
    pub fn weighted_sum(&self, field: &FieldState) -> CMat {
        let k = field.max_photons().min(self.n_max);
        let mut out = linalg::zeros(self.dim);
        for n in 0..=k {
            for m in 0..=n {
                let b = self.upper(m, n);
                let cmn = field.coeff(m, n);
                out += b * cmn;
                if m != n {
                    out += b.adjoint() * field.coeff(n, m);
                }
            }
        }
        out
    }

    /// Σ c_{m,n} Tr ρ_{m,n}, real for a Hermitian coefficient matrix.
    pub fn weighted_trace(&self, field: &FieldState) -> f64 {
        let k = field.max_photons().min(self.n_max);
        let mut acc = 0.0;
        for n in 0..=k {
            for m in 0..=n {
                let t = linalg::trace(self.upper(m, n));
                let w = field.coeff(m, n) * t;
                acc += if m == n { w.re } else { 2.0 * w.re };
            }
        }
        acc
    }

    pub fn max_abs_difference(&self, other: &BlockTriangle) -> f64 {
        self.blocks
            .iter()
            .zip(other.blocks.iter())
            .map(|(a, b)| linalg::distance(a, b))
            .fold(0.0, f64::max)
    }
}

/// Ladder state at a point in time.
#[derive(Clone, Debug, PartialEq)]
pub struct HierarchyState {
    pub time: f64,
    pub blocks: BlockTriangle,
}

/// ρ_{m,n}(t₀) = δ_{m,n} ρ₀.
pub fn init_hierarchy(rho0: &CMat, n_max: usize) -> Result<HierarchyState> {
    linalg::check_density_matrix(rho0, 1e-10)
        .map_err(|e| Error::Validation(format!("initial system state: {e}")))?;
    let mut blocks = BlockTriangle::zeros(n_max, rho0.nrows());
    for n in 0..=n_max {
        *blocks.upper_mut(n, n) = rho0.clone();
    }
    Ok(HierarchyState { time: 0.0, blocks })
}

impl HierarchyState {
    pub fn at_time(mut self, time: f64) -> Self {
        self.time = time;
        self
    }

    pub fn n_max(&self) -> usize {
        self.blocks.n_max()
    }

    pub fn dim(&self) -> usize {
        self.blocks.dim()
    }

    pub fn block(&self, m: isize, n: isize) -> CMat {
        self.blocks.get(m, n)
    }

    pub fn reduced_state(&self, field: &FieldState) -> Result<CMat> {
        reduced_state(self, field)
    }

    pub fn weighted_trace(&self, field: &FieldState) -> f64 {
        self.blocks.weighted_trace(field)
    }

    /// Text snapshot: header lines then one `block m n` line per stored block
    /// with row-major `re im` pairs.
    pub fn to_snapshot(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "# hierarchy snapshot");
        let _ = writeln!(s, "time {:.16e}", self.time);
        let _ = writeln!(s, "n_max {}", self.n_max());
        let _ = writeln!(s, "dim {}", self.dim());
        for (m, n, b) in self.blocks.iter() {
            let _ = write!(s, "block {m} {n}");
            for i in 0..b.nrows() {
                for j in 0..b.ncols() {
                    let z = b[(i, j)];
                    let _ = write!(s, " {:.16e} {:.16e}", z.re, z.im);
                }
            }
            s.push('\n');
        }
        s
    }

    pub fn from_snapshot(text: &str) -> Result<Self> {
        parse_snapshot(text)
    }
}

/// ρ_sys = Σ c_{m,n} ρ_{m,n}.
pub fn reduced_state(h: &HierarchyState, field: &FieldState) -> Result<CMat> {
    if field.max_photons() > h.n_max() {
        return Err(Error::Validation(format!(
            "field has {} photons but the ladder stops at {}",
            field.max_photons(),
            h.n_max()
        )));
    }
    Ok(h.blocks.weighted_sum(field))
}

const MAX_SNAPSHOT_DIM: usize = 4096;
const MAX_SNAPSHOT_LADDER: usize = 1024;

fn header_value<'a>(line: &'a str, key: &str, lineno: usize) -> Result<&'a str> {
    let mut parts = line.splitn(2, char::is_whitespace);
    match (parts.next(), parts.next()) {
        (Some(k), Some(v)) if k == key => Ok(v.trim()),
        _ => Err(Error::parse(lineno, format!("expected `{key} <value>`"))),
    }
}

fn parse_num<T: std::str::FromStr>(s: &str, lineno: usize, what: &str) -> Result<T> {
    s.parse::<T>()
        .map_err(|_| Error::parse(lineno, format!("invalid {what} `{s}`")))
}

pub fn parse_snapshot(text: &str) -> Result<HierarchyState> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));

    let mut next = |key: &str| -> Result<(usize, String)> {
        let (no, l) = lines
            .next()
            .ok_or_else(|| Error::parse(0, format!("missing `{key}` line")))?;
        Ok((no, header_value(l, key, no)?.to_string()))
    };
    let (no, t) = next("time")?;
    let time: f64 = parse_num(&t, no, "time")?;
    if !time.is_finite() {
        return Err(Error::parse(no, "time is not finite"));
    }
    let (no, n) = next("n_max")?;
    let n_max: usize = parse_num(&n, no, "n_max")?;
    let (no, d) = next("dim")?;
    let dim: usize = parse_num(&d, no, "dim")?;
    if dim == 0 || dim > MAX_SNAPSHOT_DIM || n_max > MAX_SNAPSHOT_LADDER {
        return Err(Error::parse(no, "snapshot size out of range"));
    }

    let mut blocks = BlockTriangle::zeros(n_max, dim);
    let mut seen = vec![false; blocks.stored_count()];
    for (no, l) in lines {
        let mut tok = l.split_whitespace();
        if tok.next() != Some("block") {
            return Err(Error::parse(no, "expected `block m n ...`"));
        }
        let m: usize = parse_num(tok.next().unwrap_or(""), no, "row index")?;
        let n: usize = parse_num(tok.next().unwrap_or(""), no, "column index")?;
        if m > n || n > n_max {
            return Err(Error::parse(no, format!("block ({m}, {n}) is not stored")));
        }
        let idx = index(m, n);
        if seen[idx] {
            return Err(Error::parse(no, format!("duplicate block ({m}, {n})")));
        }
        seen[idx] = true;
        let vals = tok
            .map(|s| parse_num::<f64>(s, no, "entry"))
            .collect::<Result<Vec<_>>>()?;
        if vals.len() != 2 * dim * dim {
            return Err(Error::parse(
                no,
                format!("expected {} numbers, found {}", 2 * dim * dim, vals.len()),
            ));
        }
        if vals.iter().any(|v| !v.is_finite()) {
            return Err(Error::parse(no, "non-finite entry"));
        }
        let b = blocks.upper_mut(m, n);
        for i in 0..dim {
            for j in 0..dim {
                let k = 2 * (i * dim + j);
                b[(i, j)] = C64::new(vals[k], vals[k + 1]);
            }
        }
    }
    if let Some(missing) = seen.iter().position(|s| !s) {
        let (m, n) = (0..=n_max)
            .flat_map(|n| (0..=n).map(move |m| (m, n)))
            .nth(missing)
            .unwrap_or((0, 0));
        return Err(Error::parse(0, format!("missing block ({m}, {n})")));
    }
    Ok(HierarchyState { time, blocks })
}
