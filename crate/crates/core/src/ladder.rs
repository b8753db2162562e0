//! Operators of the form `Q = Q₀ ⊗ 1 + Q₁ ⊗ a†` acting on the stacked ladder.
//!
//! Viewing the blocks as one matrix `P = Σ |m⟩⟨n| ⊗ ρ_{m,n}`, the raising part
//! shifts indices: `(a† P)_{m,n} = √m ρ_{m-1,n}` and `(P a)_{m,n} = √n ρ_{m,n-1}`.
//! Every discrete update in the integrator is a sum of `Q P Q†` terms.

use crate::hierarchy::BlockTriangle;
use crate::linalg::{self, c, CMat, C64};
use crate::system::FieldState;

#[derive(Clone, Debug, PartialEq)]
pub struct LadderOp {
    pub base: CMat,
    pub raise: CMat,
}

impl LadderOp {
    pub fn new(base: CMat, raise: CMat) -> Self {
        Self { base, raise }
    }

    /// `a·self + b·other`
    pub fn combine(&self, a: C64, other: &LadderOp, b: C64) -> LadderOp {
        LadderOp {
            base: &self.base * a + &other.base * b,
            raise: &self.raise * a + &other.raise * b,
        }
    }

    pub fn scaled(&self, a: C64) -> LadderOp {
        LadderOp {
            base: &self.base * a,
            raise: &self.raise * a,
        }
    }
}

/// Scratch buffers reused across sandwiches of the same shape.
#[derive(Clone, Debug)]
pub struct LadderWorkspace {
    left: Vec<CMat>,
    sub: Vec<CMat>,
    tmp: CMat,
    base_dag: CMat,
    raise_dag: CMat,
}

impl LadderWorkspace {
    pub fn new(n_max: usize, dim: usize) -> Self {
        Self {
            left: vec![linalg::zeros(dim); crate::hierarchy::stored_block_count(n_max)],
            sub: vec![linalg::zeros(dim); n_max + 1],
            tmp: linalg::zeros(dim),
            base_dag: linalg::zeros(dim),
            raise_dag: linalg::zeros(dim),
        }
    }

    fn fits(&self, p: &BlockTriangle) -> bool {
        self.sub.len() == p.n_max() + 1 && self.tmp.nrows() == p.dim()
    }
}

#[inline]
fn tri(m: usize, n: usize) -> usize {
    n * (n + 1) / 2 + m
}

/// `out += w · Q P Q†`, block by block for m ≤ n.
pub fn sandwich_acc(
    q: &LadderOp,
    p: &BlockTriangle,
    w: f64,
    out: &mut BlockTriangle,
    ws: &mut LadderWorkspace,
) {
    if !ws.fits(p) {
        *ws = LadderWorkspace::new(p.n_max(), p.dim());
    }
    let n_max = p.n_max();
    let one = c(1.0, 0.0);
    let zero = c(0.0, 0.0);
    let raise_zero = q.raise.iter().all(|z| *z == zero);

    // X = Q P on m ≤ n, plus the first subdiagonal X_{n,n-1}.
    for n in 0..=n_max {
        for m in 0..=n {
            let x = &mut ws.left[tri(m, n)];
            x.gemm(one, &q.base, p.upper(m, n), zero);
            if m > 0 && !raise_zero {
                x.gemm(c((m as f64).sqrt(), 0.0), &q.raise, p.upper(m - 1, n), one);
            }
        }
        if n > 0 {
            // ρ_{n,n-1} = ρ_{n-1,n}†
            p.upper(n - 1, n).adjoint_to(&mut ws.tmp);
            let x = &mut ws.sub[n];
            x.gemm(one, &q.base, &ws.tmp, zero);
            if !raise_zero {
                x.gemm(c((n as f64).sqrt(), 0.0), &q.raise, p.upper(n - 1, n - 1), one);
            }
        }
    }

    // Y = X Q†
    q.base.adjoint_to(&mut ws.base_dag);
    q.raise.adjoint_to(&mut ws.raise_dag);
    let wc = c(w, 0.0);
    for n in 0..=n_max {
        for m in 0..=n {
            let y = out.upper_mut(m, n);
            y.gemm(wc, &ws.left[tri(m, n)], &ws.base_dag, one);
            if n > 0 && !raise_zero {
                let prev = if m < n { &ws.left[tri(m, n - 1)] } else { &ws.sub[n] };
                y.gemm(wc * (n as f64).sqrt(), prev, &ws.raise_dag, one);
            }
        }
    }
}

/// `Q P Q†` as a fresh triangle.
pub fn sandwich(q: &LadderOp, p: &BlockTriangle) -> BlockTriangle {
    let mut out = BlockTriangle::zeros(p.n_max(), p.dim());
    let mut ws = LadderWorkspace::new(p.n_max(), p.dim());
    sandwich_acc(q, p, 1.0, &mut out, &mut ws);
    out
}

/// Field-weighted trace Σ c_{m,n} Tr[(Q P Q†)_{m,n}] without forming the blocks.
pub fn sandwich_weighted_trace(q: &LadderOp, p: &BlockTriangle, field: &FieldState) -> f64 {
    let qq = q.base.adjoint() * &q.base;
    let qr = q.base.adjoint() * &q.raise;
    let rr = q.raise.adjoint() * &q.raise;
    let rq = q.raise.adjoint() * &q.base;
    let k = field.max_photons().min(p.n_max());
    let mut acc = 0.0;
    for n in 0..=k {
        for m in 0..=n {
            let (mf, nf) = (m as f64, n as f64);
            let mut t = linalg::trace_of_product(&qq, p.upper(m, n));
            if m > 0 {
                t += linalg::trace_of_product(&qr, p.upper(m - 1, n)) * mf.sqrt();
            }
            if n > 0 {
                let s = if m < n {
                    linalg::trace_of_product(&rq, p.upper(m, n - 1))
                } else {
                    linalg::trace_of_product(&qr, p.upper(n - 1, n)).conj()
                };
                t += s * nf.sqrt();
            }
            if m > 0 && n > 0 {
                t += linalg::trace_of_product(&rr, p.upper(m - 1, n - 1)) * (mf * nf).sqrt();
            }
            let wt = field.coeff(m, n) * t;
            acc += if m == n { wt.re } else { 2.0 * wt.re };
        }
    }
    acc
}

/// Removes the part of the ladder in which the next time bin is occupied:
/// solves `P = P̸ + |c|² a† P̸ a` for `P̸`, where `|c|² = |ξ|² dt`.
pub fn cut_mut(p: &mut BlockTriangle, bin_weight: f64) {
    if bin_weight == 0.0 {
        return;
    }
    let n_max = p.n_max();
    for m in 1..=n_max {
        for n in m..=n_max {
            let f = bin_weight * ((m * n) as f64).sqrt();
            let prev = p.upper(m - 1, n - 1).clone();
            *p.upper_mut(m, n) -= prev * c(f, 0.0);
        }
    }
}
