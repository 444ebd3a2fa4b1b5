//! Generalized Laguerre polynomials and the displaced-oscillator overlap
//! `S_kn(f)` that fills every Coulomb-gauge Hamiltonian block.
//!
//! For `k >= n`
//!
//! ```text
//! S_kn(f) = (-1)^n sqrt(n!/k!) (2f)^(k-n) L_n^(k-n)(4f^2) exp(-2f^2),   S_kn = S_nk.
//! ```
//!
//! Equivalently `S = D(2f) P` with `D` the field displacement operator and `P`
//! the photon-number parity, so `S` is an orthogonal matrix in the untruncated
//! Fock space. The factorial ratio and the power of `2f` are carried in log
//! space and the Laguerre recurrence is rescaled on the fly, so nothing
//! overflows for indices in the thousands.

use std::sync::atomic::{AtomicBool, Ordering};

use crate::error::{Error, Result};
use crate::exec::{self, Execution};

/// Largest polynomial degree / table size accepted without an explicit limit.
pub const DEFAULT_K_MAX: usize = 1024;

/// Indices and couplings inside which the overlap has been checked against
/// the displacement-operator oracle and the orthogonality of `S`.
pub const VALIDATED_MAX_INDEX: usize = 1024;
pub const VALIDATED_MAX_COUPLING: f64 = 6.0;

const RESCALE_HIGH: f64 = 1e150;
const RESCALE_LOW: f64 = 1e-150;

static ENVELOPE_WARNED: AtomicBool = AtomicBool::new(false);

fn check_envelope(max_index: usize, f: f64) {
    if (max_index > VALIDATED_MAX_INDEX || f > VALIDATED_MAX_COUPLING)
        && !ENVELOPE_WARNED.swap(true, Ordering::Relaxed)
    {
        log::warn!(
            "overlap requested outside the validated envelope (index {max_index}, f = {f}); \
             double-precision Laguerre recurrence accuracy is not guaranteed"
        );
    }
}

/// Three-term recurrence in the degree index at fixed `alpha`, holding the
/// current value as `mantissa * exp(log_scale)`.
#[derive(Clone, Debug)]
struct ScaledLaguerre {
    alpha: f64,
    x: f64,
    degree: usize,
    prev: f64,
    cur: f64,
    log_scale: f64,
}

impl ScaledLaguerre {
    fn new(alpha: f64, x: f64) -> Self {
        Self { alpha, x, degree: 0, prev: 0.0, cur: 1.0, log_scale: 0.0 }
    }

    fn advance(&mut self) {
        let k = self.degree as f64;
        let next = ((2.0 * k + 1.0 + self.alpha - self.x) * self.cur - (k + self.alpha) * self.prev)
            / (k + 1.0);
        self.prev = self.cur;
        self.cur = next;
        self.degree += 1;

        let big = self.cur.abs().max(self.prev.abs());
        if big > RESCALE_HIGH || (big < RESCALE_LOW && big > 0.0) {
            let ln_big = big.ln();
            self.cur /= big;
            self.prev /= big;
            self.log_scale += ln_big;
        }
    }

    fn value(&self) -> f64 {
        self.cur * self.log_scale.exp()
    }
}

/// `ln(i!)` for `i = 0..=n` as running sums of `ln i`.
fn ln_factorials(n: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(n + 1);
    let mut acc = 0.0;
    out.push(acc);
    for i in 1..=n {
        acc += (i as f64).ln();
        out.push(acc);
    }
    out
}

/// Generalized Laguerre polynomial `L_n^alpha(x)` by upward recurrence in `n`.
pub fn laguerre_general(n: i64, alpha: i64, x: f64) -> Result<f64> {
    laguerre_general_with_limit(n, alpha, x, DEFAULT_K_MAX)
}

pub fn laguerre_general_with_limit(n: i64, alpha: i64, x: f64, k_max: usize) -> Result<f64> {
    if n < 0 {
        return Err(Error::Domain(format!("Laguerre degree must be nonnegative, got {n}")));
    }
    if alpha < -n {
        return Err(Error::Domain(format!("Laguerre order alpha = {alpha} is below -n = {}", -n)));
    }
    if !x.is_finite() || x < 0.0 {
        return Err(Error::Domain(format!("Laguerre argument must be finite and >= 0, got {x}")));
    }
    let n = n as usize;
    if n > k_max {
        return Err(Error::Resource(format!("Laguerre degree {n} exceeds K_max = {k_max}")));
    }
    let mut rec = ScaledLaguerre::new(alpha as f64, x);
    for _ in 0..n {
        rec.advance();
    }
    Ok(rec.value())
}

/// Recombine a Laguerre value with the prefactor of `S_kn`, `k >= n`, `f > 0`.
#[inline]
fn overlap_from_parts(n: usize, rec: &ScaledLaguerre, ln_fact_n: f64, ln_fact_k: f64, f: f64) -> f64 {
    if rec.cur == 0.0 {
        return 0.0;
    }
    let diff = rec.alpha;
    let ln_mag = rec.log_scale + rec.cur.abs().ln() + 0.5 * (ln_fact_n - ln_fact_k)
        + diff * (2.0 * f).ln()
        - 2.0 * f * f;
    let negative = (rec.cur < 0.0) ^ (n % 2 == 1);
    let mag = ln_mag.exp();
    if negative {
        -mag
    } else {
        mag
    }
}

fn check_coupling(f: f64) -> Result<()> {
    if !f.is_finite() || f < 0.0 {
        return Err(Error::Domain(format!("coupling must be finite and >= 0, got {f}")));
    }
    Ok(())
}

/// Single overlap element `S_kn(f)`. Symmetric in `(k, n)` through the same
/// code path, and bit-identical to the corresponding [`OverlapTable`] entry.
pub fn overlap_s(k: usize, n: usize, f: f64) -> f64 {
    let (hi, lo) = if k >= n { (k, n) } else { (n, k) };
    if f == 0.0 {
        return if hi != lo { 0.0 } else if lo % 2 == 0 { 1.0 } else { -1.0 };
    }
    check_envelope(hi, f);
    let ln_fact = ln_factorials(hi);
    let mut rec = ScaledLaguerre::new((hi - lo) as f64, 4.0 * f * f);
    for _ in 0..lo {
        rec.advance();
    }
    overlap_from_parts(lo, &rec, ln_fact[lo], ln_fact[hi], f)
}

/// Dense symmetric table of `S_kn(f)` for `0 <= k, n <= size`.
#[derive(Clone, Debug, PartialEq)]
pub struct OverlapTable {
    coupling: f64,
    size: usize,
    values: Vec<f64>,
}

impl OverlapTable {
    pub fn coupling(&self) -> f64 {
        self.coupling
    }

    /// Largest Fock index covered.
    pub fn size(&self) -> usize {
        self.size
    }

    #[inline]
    pub fn get(&self, k: usize, n: usize) -> f64 {
        self.values[k * (self.size + 1) + n]
    }

    /// Row `k` as a slice over `n = 0..=size`.
    pub fn row(&self, k: usize) -> &[f64] {
        let w = self.size + 1;
        &self.values[k * w..(k + 1) * w]
    }
}

pub fn build_overlap_table(f: f64, size: usize) -> Result<OverlapTable> {
    build_overlap_table_with(f, size, DEFAULT_K_MAX, Execution::default())
}

/// Table construction with an explicit size limit and execution mode. Each
/// `alpha = k - n` diagonal is one independent recurrence.
pub fn build_overlap_table_with(
    f: f64,
    size: usize,
    k_max: usize,
    exec: Execution,
) -> Result<OverlapTable> {
    check_coupling(f)?;
    if size < 1 {
        return Err(Error::Domain("overlap table size must be at least 1".into()));
    }
    if size > k_max {
        return Err(Error::Resource(format!("overlap table size {size} exceeds K_max = {k_max}")));
    }
    let w = size + 1;
    let mut values = vec![0.0; w * w];
    if f == 0.0 {
        for i in 0..w {
            values[i * w + i] = if i % 2 == 0 { 1.0 } else { -1.0 };
        }
        return Ok(OverlapTable { coupling: f, size, values });
    }
    check_envelope(size, f);

    let ln_fact = ln_factorials(size);
    let x = 4.0 * f * f;
    let diagonals: Vec<Vec<f64>> = exec::map_range(exec, 0..w, |alpha| {
        let mut rec = ScaledLaguerre::new(alpha as f64, x);
        let mut out = Vec::with_capacity(w - alpha);
        for n in 0..w - alpha {
            if n > 0 {
                rec.advance();
            }
            out.push(overlap_from_parts(n, &rec, ln_fact[n], ln_fact[n + alpha], f));
        }
        out
    });
    for (alpha, diag) in diagonals.iter().enumerate() {
        for (n, &s) in diag.iter().enumerate() {
            let k = n + alpha;
            values[k * w + n] = s;
            values[n * w + k] = s;
        }
    }
    Ok(OverlapTable { coupling: f, size, values })
}
