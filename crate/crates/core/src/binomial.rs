//! Binomial arithmetic that stays accurate at collaborative-filtering scale.
//!
//! Raw binomial coefficients like C(93705, 116) dwarf what 64-bit integers
//! can hold and sit near the top of the `f64` range, while the disjunctive
//! closed form subtracts several of them and keeps only a sliver of the
//! magnitude. Everything here therefore works with *ratios* of binomials,
//! evaluated as running products of factors in [0, 1], and the ratios are
//! accumulated in double-double precision so that the final
//! inclusion–exclusion combination survives cancellation with ~1e-30
//! absolute error instead of ~1e-14.

use std::collections::HashMap;
use std::sync::{OnceLock, RwLock};

use crate::error::{Error, Result};

// ---------------------------------------------------------------------------
// Double-double scalar
// ---------------------------------------------------------------------------

/// An unevaluated sum `hi + lo` with `|lo| <= ulp(hi)/2`, giving roughly
/// 31 significant decimal digits.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct Dd {
    hi: f64,
    lo: f64,
}

#[inline]
fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    let err = (a - (s - bb)) + (b - bb);
    (s, err)
}

#[inline]
fn quick_two_sum(a: f64, b: f64) -> (f64, f64) {
    // requires |a| >= |b| or a == 0
    let s = a + b;
    let err = b - (s - a);
    (s, err)
}

#[inline]
fn two_prod(a: f64, b: f64) -> (f64, f64) {
    let p = a * b;
    let err = f64::mul_add(a, b, -p);
    (p, err)
}

impl Dd {
    pub(crate) const ZERO: Dd = Dd { hi: 0.0, lo: 0.0 };
    pub(crate) const ONE: Dd = Dd { hi: 1.0, lo: 0.0 };

    #[inline]
    pub(crate) fn to_f64(self) -> f64 {
        self.hi + self.lo
    }

    #[inline]
    pub(crate) fn add(self, other: Dd) -> Dd {
        let (s, e) = two_sum(self.hi, other.hi);
        let e = e + self.lo + other.lo;
        let (hi, lo) = quick_two_sum(s, e);
        Dd { hi, lo }
    }

    #[inline]
    pub(crate) fn sub(self, other: Dd) -> Dd {
        self.add(Dd {
            hi: -other.hi,
            lo: -other.lo,
        })
    }

    #[inline]
    pub(crate) fn mul_f64(self, f: f64) -> Dd {
        let (p, e) = two_prod(self.hi, f);
        let e = e + self.lo * f;
        let (hi, lo) = quick_two_sum(p, e);
        Dd { hi, lo }
    }

    #[inline]
    pub(crate) fn div_f64(self, f: f64) -> Dd {
        let q1 = self.hi / f;
        // remainder of the first quotient, exact via fused multiply-add
        let r = f64::mul_add(-q1, f, self.hi) + self.lo;
        let q2 = r / f;
        let (hi, lo) = quick_two_sum(q1, q2);
        Dd { hi, lo }
    }

    #[inline]
    pub(crate) fn mul(self, other: Dd) -> Dd {
        let (p, e) = two_prod(self.hi, other.hi);
        let e = e + self.hi * other.lo + self.lo * other.hi;
        let (hi, lo) = quick_two_sum(p, e);
        Dd { hi, lo }
    }
}

/// `C(a, d) / C(b, d)` as a double-double, via the running product
/// `prod_{i=0..d-1} (a - i) / (b - i)`. Caller has checked `a <= b`, `d <= b`.
pub(crate) fn ratio_dd(a: u64, b: u64, d: u32) -> Dd {
    if (a as u128) < d as u128 {
        return Dd::ZERO;
    }
    let mut acc = Dd::ONE;
    for i in 0..d as u64 {
        acc = acc.mul_f64((a - i) as f64).div_f64((b - i) as f64);
    }
    acc
}

/// `C(q, d)` as a double-double; 0 when `q < d`. Uncached.
pub(crate) fn binom_dd(q: u64, d: u32) -> Dd {
    if (q as u128) < d as u128 {
        return Dd::ZERO;
    }
    let mut acc = Dd::ONE;
    for i in 0..d as u64 {
        acc = acc.mul_f64((q - i) as f64).div_f64((i + 1) as f64);
    }
    acc
}

// ---------------------------------------------------------------------------
// Public operations
// ---------------------------------------------------------------------------

/// `C(a, d) / C(b, d)` without ever forming either coefficient.
///
/// Returns 0 when `a < d`. Errors when `a > b` or `d > b` or `d == 0`.
pub fn binom_ratio(a: u64, b: u64, d: u32) -> Result<f64> {
    if d == 0 {
        return Err(Error::Domain("binom_ratio: d must be >= 1".into()));
    }
    if a > b {
        return Err(Error::Domain(format!("binom_ratio: a={a} exceeds b={b}")));
    }
    if d as u64 > b {
        return Err(Error::Domain(format!("binom_ratio: d={d} exceeds b={b}")));
    }
    Ok(ratio_dd(a, b, d).to_f64())
}

fn binom_cache() -> &'static RwLock<HashMap<(u64, u32), f64>> {
    static CACHE: OnceLock<RwLock<HashMap<(u64, u32), f64>>> = OnceLock::new();
    CACHE.get_or_init(|| RwLock::new(HashMap::new()))
}

/// Binomial coefficient `C(q, d)` as the running product
/// `prod_{i=0..d-1} (q - i) / (i + 1)`; 0 when `q < d`.
///
/// Every prefix of the product is itself a binomial coefficient, so the
/// value is exact whenever it stays below 2^53 and carries only ~d ulp of
/// relative error beyond that. Results are memoized by `(q, d)`; lookups
/// take a shared lock, insertions an exclusive one.
pub fn binom(q: u64, d: u32) -> f64 {
    if d == 0 {
        return 1.0;
    }
    if (q as u128) < d as u128 {
        return 0.0;
    }
    let key = (q, d);
    if let Some(&v) = binom_cache().read().expect("binom cache poisoned").get(&key) {
        return v;
    }
    let mut c = 1.0_f64;
    for i in 0..d as u64 {
        c *= (q - i) as f64;
        c /= (i + 1) as f64;
    }
    binom_cache()
        .write()
        .expect("binom cache poisoned")
        .insert(key, c);
    c
}

// ---------------------------------------------------------------------------
// Ratio table for Gram construction
// ---------------------------------------------------------------------------

/// All ratios `r(a) = C(a, d) / C(n, d)` for `a = 0..=n`, fixed `(n, d)`.
///
/// One Gram build touches r at `n - |x|` per item and `n - |x| - |z| + |x∩z|`
/// per pair, all in `0..=n`, so a dense table computed up front replaces the
/// shared-cache traffic entirely; afterwards the table is immutable and read
/// from any number of threads.
pub(crate) struct RatioTable {
    values: Vec<Dd>,
}

impl RatioTable {
    pub(crate) fn new(n: u64, d: u32) -> RatioTable {
        debug_assert!(d as u64 <= n);
        let values = (0..=n).map(|a| ratio_dd(a, n, d)).collect();
        RatioTable { values }
    }

    #[inline]
    pub(crate) fn get(&self, a: u64) -> Dd {
        self.values[a as usize]
    }
}
