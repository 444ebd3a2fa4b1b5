//! Independent reference computations shared by the integration tests.
#![allow(dead_code)]

use nalgebra::DMatrix;
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};

/// `L_n^alpha(x)` from its finite series, summed exactly in rational arithmetic.
pub fn laguerre_series(n: u32, alpha: i64, x: &BigRational) -> f64 {
    let binom = |top: i64, r: u32| -> BigRational {
        let mut acc = BigRational::one();
        for i in 0..r {
            acc = acc * BigRational::from_integer(BigInt::from(top - i as i64))
                / BigRational::from_integer(BigInt::from(i + 1));
        }
        acc
    };
    let mut sum = BigRational::zero();
    let mut x_pow = BigRational::one();
    let mut fact = BigRational::one();
    for i in 0..=n {
        if i > 0 {
            x_pow = &x_pow * x;
            fact = fact * BigRational::from_integer(BigInt::from(i));
        }
        let term = binom(n as i64 + alpha, n - i) * &x_pow / &fact;
        if i % 2 == 0 {
            sum += term;
        } else {
            sum -= term;
        }
    }
    sum.to_f64().unwrap()
}

/// Fock dimension large enough that `exp(2f(a - a^+))` restricted to
/// `0..=max_index` is unaffected by truncation at the 1e-12 level.
pub fn oracle_dim(max_index: usize, f: f64) -> usize {
    let reach = (max_index as f64).sqrt() + 2.0 * f + 8.0;
    (reach * reach).ceil() as usize + 50
}

/// `<k| exp(2f(a - a^+)) |n>` for all `k, n < dim`, by matrix exponential of
/// the truncated tridiagonal generator.
pub fn displacement_oracle(f: f64, dim: usize) -> DMatrix<f64> {
    let mut gen = DMatrix::<f64>::zeros(dim, dim);
    for n in 1..dim {
        let s = 2.0 * f * (n as f64).sqrt();
        // a|n> = sqrt(n)|n-1>,  a^+|n-1> = sqrt(n)|n>
        gen[(n - 1, n)] = s;
        gen[(n, n - 1)] = -s;
    }
    gen.exp()
}

/// Overlap in the Hamiltonian's sign convention: `S_kn = (-1)^k <k|exp(2f(a - a^+))|n>`.
pub fn overlap_oracle(f: f64, max_index: usize) -> DMatrix<f64> {
    let dim = oracle_dim(max_index, f);
    let d = displacement_oracle(f, dim);
    DMatrix::from_fn(max_index + 1, max_index + 1, |k, n| {
        let v = d[(k, n)];
        if k % 2 == 0 { v } else { -v }
    })
}

/// Cyclic Jacobi eigenvalues for small symmetric matrices, ascending.
pub fn jacobi_eigenvalues(m: &DMatrix<f64>) -> Vec<f64> {
    let n = m.nrows();
    let mut a = m.clone();
    for _sweep in 0..100 {
        let mut off = 0.0;
        for p in 0..n {
            for q in p + 1..n {
                off += a[(p, q)] * a[(p, q)];
            }
        }
        if off < 1e-30 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if a[(p, q)].abs() < 1e-300 {
                    continue;
                }
                let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * a[(p, q)]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    a[(k, p)] = c * akp - s * akq;
                    a[(k, q)] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[(p, k)];
                    let aqk = a[(q, k)];
                    a[(p, k)] = c * apk - s * aqk;
                    a[(q, k)] = s * apk + c * aqk;
                }
            }
        }
    }
    let mut v: Vec<f64> = (0..n).map(|i| a[(i, i)]).collect();
    v.sort_by(f64::total_cmp);
    v
}

/// Natural log of `|q|` for a nonzero big rational, without overflowing f64.
pub fn ln_abs(q: &BigRational) -> f64 {
    fn ln_big(b: &BigInt) -> f64 {
        let bits = b.bits();
        let shift = bits.saturating_sub(60);
        let top = (b >> shift).to_f64().unwrap().abs();
        top.ln() + shift as f64 * std::f64::consts::LN_2
    }
    ln_big(q.numer()) - ln_big(q.denom())
}

/// `L_n^alpha(x)` for rational `x` as an exact rational, `O(n)` operations.
pub fn laguerre_exact(n: u32, alpha: u32, x: &BigRational) -> BigRational {
    // term_i = (-1)^i C(n+alpha, n-i) x^i / i!
    let mut term = BigRational::one();
    for i in 0..n {
        // C(n+alpha, n) = prod_{i<n} (alpha+1+i)/(i+1)
        term = term * BigRational::from_integer(BigInt::from(alpha + 1 + i))
            / BigRational::from_integer(BigInt::from(i + 1));
    }
    let mut sum = term.clone();
    for i in 0..n {
        // C(n+a, n-i-1)/C(n+a, n-i) = (n-i)/(a+i+1)
        term = -term * BigRational::from_integer(BigInt::from(n - i)) * x
            / BigRational::from_integer(BigInt::from((alpha + i + 1) as u64 * (i + 1) as u64));
        sum += &term;
    }
    sum
}

/// `S_kn` for `k >= n` at `f = two_f / 2` from an exact Laguerre value; returns
/// `(sign, ln |S|)` or `None` when the polynomial vanishes.
pub fn overlap_exact(k: u32, n: u32, two_f: u32) -> Option<(f64, f64)> {
    assert!(k >= n);
    let alpha = k - n;
    let x = BigRational::from_integer(BigInt::from(two_f * two_f));
    let l = laguerre_exact(n, alpha, &x);
    if l.is_zero() {
        return None;
    }
    let ln_fact = |m: u32| (1..=m).map(|i| (i as f64).ln()).sum::<f64>();
    let f = two_f as f64 / 2.0;
    let ln_s = 0.5 * (ln_fact(n) - ln_fact(k)) + alpha as f64 * (two_f as f64).ln() + ln_abs(&l) - 2.0 * f * f;
    let negative = (l < BigRational::zero()) ^ (n % 2 == 1);
    Some((if negative { -1.0 } else { 1.0 }, ln_s))
}
