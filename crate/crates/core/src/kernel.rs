//! Scalar boolean kernel functions over binary vectors.
//!
//! Every kernel here depends on a pair of binary vectors only through four
//! counts: the dimension, the two active counts, and the common active
//! count. [`BinaryVectorStats`] carries exactly those, so Gram construction
//! can share one pass of pairwise intersection counting across all kernel
//! families and arities.

use crate::binomial::{binom, binom_dd, ratio_dd, Dd};
use crate::error::{Error, Result};

/// The four counts a boolean kernel needs about a pair of binary vectors
/// `x, z` of common dimension `n`: active counts and intersection size.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BinaryVectorStats {
    /// Dimension (number of variables).
    pub n: u64,
    /// Number of active variables in `x`.
    pub nx: u64,
    /// Number of active variables in `z`.
    pub nz: u64,
    /// Number of variables active in both, which equals the dot product.
    pub nxz: u64,
}

impl BinaryVectorStats {
    /// Validates `nxz <= min(nx, nz) <= max(nx, nz) <= n`.
    pub fn new(n: u64, nx: u64, nz: u64, nxz: u64) -> Result<BinaryVectorStats> {
        if nx > n || nz > n {
            return Err(Error::Domain(format!(
                "active counts nx={nx}, nz={nz} exceed dimension n={n}"
            )));
        }
        if nxz > nx.min(nz) {
            return Err(Error::Domain(format!(
                "intersection nxz={nxz} exceeds min(nx={nx}, nz={nz})"
            )));
        }
        Ok(BinaryVectorStats { n, nx, nz, nxz })
    }

    /// Stats of a vector paired with itself.
    pub fn self_stats(n: u64, nx: u64) -> Result<BinaryVectorStats> {
        BinaryVectorStats::new(n, nx, nx, nx)
    }
}

/// Kernel families supported on binary data.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum KernelFamily {
    /// Plain dot product, the common active count.
    Linear,
    /// Counts conjunctions of `d` variables true in both vectors.
    Conjunctive,
    /// Counts disjunctions of `d` variables true in both vectors.
    Disjunctive,
    /// Counts monotone conjunctions of every arity at once.
    Mdnf,
    /// Jaccard overlap of the active sets.
    Tanimoto,
}

impl KernelFamily {
    /// `true` for the families whose feature space is parameterized by an
    /// arity; the others ignore [`KernelSpec::arity`].
    pub fn uses_arity(self) -> bool {
        matches!(self, KernelFamily::Conjunctive | KernelFamily::Disjunctive)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            KernelFamily::Linear => "linear",
            KernelFamily::Conjunctive => "conjunctive",
            KernelFamily::Disjunctive => "disjunctive",
            KernelFamily::Mdnf => "mdnf",
            KernelFamily::Tanimoto => "tanimoto",
        }
    }
}

impl std::fmt::Display for KernelFamily {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for KernelFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<KernelFamily> {
        match s.trim().to_ascii_lowercase().as_str() {
            "linear" => Ok(KernelFamily::Linear),
            "conjunctive" | "c-kernel" | "c" => Ok(KernelFamily::Conjunctive),
            "disjunctive" | "d-kernel" | "d" => Ok(KernelFamily::Disjunctive),
            "mdnf" => Ok(KernelFamily::Mdnf),
            "tanimoto" | "jaccard" => Ok(KernelFamily::Tanimoto),
            other => Err(Error::Domain(format!("unknown kernel family '{other}'"))),
        }
    }
}

/// A kernel family together with its arity and normalization choice.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct KernelSpec {
    pub family: KernelFamily,
    /// Arity `d` of the conjunctive or disjunctive features; must be >= 1.
    /// Ignored by the other families.
    pub arity: u32,
    /// Whether pairwise values are divided by the geometric mean of the
    /// two self-similarities.
    pub normalized: bool,
}

impl KernelSpec {
    pub fn new(family: KernelFamily, arity: u32, normalized: bool) -> Result<KernelSpec> {
        if arity == 0 {
            return Err(Error::Domain("kernel arity must be >= 1".into()));
        }
        Ok(KernelSpec {
            family,
            arity,
            normalized,
        })
    }

    pub fn linear(normalized: bool) -> KernelSpec {
        KernelSpec {
            family: KernelFamily::Linear,
            arity: 1,
            normalized,
        }
    }

    pub fn conjunctive(arity: u32, normalized: bool) -> Result<KernelSpec> {
        KernelSpec::new(KernelFamily::Conjunctive, arity, normalized)
    }

    pub fn disjunctive(arity: u32, normalized: bool) -> Result<KernelSpec> {
        KernelSpec::new(KernelFamily::Disjunctive, arity, normalized)
    }

    pub fn mdnf(normalized: bool) -> KernelSpec {
        KernelSpec {
            family: KernelFamily::Mdnf,
            arity: 1,
            normalized,
        }
    }

    pub fn tanimoto(normalized: bool) -> KernelSpec {
        KernelSpec {
            family: KernelFamily::Tanimoto,
            arity: 1,
            normalized,
        }
    }

    /// Short label such as `disjunctive(38)` or `linear`, used in reports.
    pub fn label(&self) -> String {
        if self.family.uses_arity() {
            format!("{}({})", self.family, self.arity)
        } else {
            self.family.to_string()
        }
    }
}

/// Dot product of the two binary vectors.
pub fn linear_kernel(stats: BinaryVectorStats) -> f64 {
    stats.nxz as f64
}

/// Cosine of the two binary vectors; 0 when either is empty.
pub fn linear_kernel_normalized(stats: BinaryVectorStats) -> f64 {
    if stats.nx == 0 || stats.nz == 0 {
        return 0.0;
    }
    (stats.nxz as f64 / ((stats.nx as f64) * (stats.nz as f64)).sqrt()).min(1.0)
}

/// Number of `d`-variable conjunctions true in both vectors: `C(nxz, d)`.
///
/// Expects `d >= 1`; `d = 0` degenerates to the constant kernel 1.
pub fn c_kernel(stats: BinaryVectorStats, d: u32) -> f64 {
    binom(stats.nxz, d)
}

/// Normalized conjunctive kernel
/// `C(nxz,d) / sqrt(C(nx,d) C(nz,d)) = sqrt(r(nxz,nx,d) r(nxz,nz,d))`
/// with `r` a ratio of binomials, so the huge coefficients never appear.
///
/// Returns 0 when either vector activates fewer than `d` variables: its
/// embedding is the null vector and the pair has nothing in common. The
/// self-similarity of such a vector is also 0; Gram assembly replaces that
/// diagonal entry with 1.
pub fn c_kernel_normalized(stats: BinaryVectorStats, d: u32) -> Result<f64> {
    if d == 0 {
        return Err(Error::Domain("conjunctive arity must be >= 1".into()));
    }
    let d64 = d as u64;
    if stats.nx < d64 || stats.nz < d64 {
        return Ok(0.0);
    }
    if stats.nxz < d64 {
        return Ok(0.0);
    }
    let rx = ratio_dd(stats.nxz, stats.nx, d).to_f64();
    let rz = ratio_dd(stats.nxz, stats.nz, d).to_f64();
    Ok((rx * rz).sqrt().min(1.0))
}

/// Fraction of `d`-variable subsets hit by both active sets, in
/// double-double precision:
/// `1 - r(n-nx) - r(n-nz) + r(n-nx-nz+nxz)` with `r(a) = C(a,d)/C(n,d)`.
///
/// The three subtracted ratios can each be close to 1 while their
/// combination is close to 0, so the accumulation is kept in extended
/// precision until the caller is done combining.
pub(crate) fn d_hit_fraction_dd(stats: BinaryVectorStats, d: u32) -> Dd {
    let n = stats.n;
    let union = stats.nx + stats.nz - stats.nxz;
    let miss_x = ratio_dd(n - stats.nx, n, d);
    let miss_z = ratio_dd(n - stats.nz, n, d);
    let miss_both = ratio_dd(n - union, n, d);
    Dd::ONE.sub(miss_x).sub(miss_z).add(miss_both)
}

fn check_d_arity(stats: BinaryVectorStats, d: u32) -> Result<()> {
    if d == 0 {
        return Err(Error::Domain("disjunctive arity must be >= 1".into()));
    }
    if d as u64 > stats.n {
        return Err(Error::Domain(format!(
            "disjunctive arity d={d} exceeds dimension n={}",
            stats.n
        )));
    }
    Ok(())
}

/// Number of `d`-variable disjunctions true in both vectors, by
/// inclusion–exclusion over the subsets missing each active set:
/// `C(n,d) - C(n-nx,d) - C(n-nz,d) + C(n-nx-nz+nxz,d)`.
///
/// Evaluated as `C(n,d)` times the hit fraction, both in double-double
/// precision, so the result keeps close to full accuracy even when the
/// four terms cancel almost completely. The count is an integer by
/// definition, so the result is rounded: below 2^53 that snaps the last
/// speck of extended-precision residue to the exact integer, above it
/// rounding is the identity. The product overflows to infinity once
/// `C(n,d)` passes the top of the `f64` range (around n=20000 at d=120);
/// ranking work at that scale uses [`d_kernel_normalized`], where
/// `C(n,d)` cancels.
pub fn d_kernel(stats: BinaryVectorStats, d: u32) -> Result<f64> {
    check_d_arity(stats, d)?;
    let g = d_hit_fraction_dd(stats, d);
    Ok(binom_dd(stats.n, d).mul(g).to_f64().round())
}

/// Normalized disjunctive kernel `g(x,z) / sqrt(g(x,x) g(z,z))` where `g`
/// is the hit fraction; the shared `C(n,d)` factor cancels exactly. The
/// true value lies in [0,1], so residue from the cancelling sums is
/// clamped away.
///
/// Returns 0 when either vector is empty (null embedding; Gram assembly
/// fixes the corresponding diagonal entry to 1).
pub fn d_kernel_normalized(stats: BinaryVectorStats, d: u32) -> Result<f64> {
    check_d_arity(stats, d)?;
    if stats.nx == 0 || stats.nz == 0 {
        return Ok(0.0);
    }
    let g = d_hit_fraction_dd(stats, d).to_f64();
    let gx = Dd::ONE
        .sub(ratio_dd(stats.n - stats.nx, stats.n, d))
        .to_f64();
    let gz = Dd::ONE
        .sub(ratio_dd(stats.n - stats.nz, stats.n, d))
        .to_f64();
    Ok((g / (gx * gz).sqrt()).clamp(0.0, 1.0))
}

/// `log2(2^t - 1)`, finite for `t >= 1`.
fn log2_pow2m1(t: u64) -> f64 {
    debug_assert!(t >= 1);
    let correction = (-(-(t as f64)).exp2()).ln_1p() / std::f64::consts::LN_2;
    t as f64 + correction
}

/// A monotone-DNF kernel value `2^nxz - 1`, which outgrows every integer
/// type: small counts are held directly, large ones as a base-2 logarithm.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MdnfValue {
    /// The value itself; produced when `nxz <= 30`, where it is exact.
    Exact(f64),
    /// `log2(2^nxz - 1)`; produced for larger counts.
    Log2(f64),
}

impl MdnfValue {
    /// The value in plain `f64`, overflowing to infinity past `2^1024`.
    pub fn to_f64(self) -> f64 {
        match self {
            MdnfValue::Exact(v) => v,
            MdnfValue::Log2(l) => l.exp2(),
        }
    }

    /// Base-2 logarithm of the value; negative infinity for 0.
    pub fn log2(self) -> f64 {
        match self {
            MdnfValue::Exact(v) => v.log2(),
            MdnfValue::Log2(l) => l,
        }
    }
}

/// Monotone-DNF kernel `2^nxz - 1`: the number of non-empty monotone
/// conjunctions true in both vectors, summing the conjunctive kernel over
/// every arity.
pub fn mdnf_kernel(stats: BinaryVectorStats) -> MdnfValue {
    if stats.nxz <= 30 {
        MdnfValue::Exact(((1u64 << stats.nxz) - 1) as f64)
    } else {
        MdnfValue::Log2(log2_pow2m1(stats.nxz))
    }
}

/// Normalized monotone-DNF kernel
/// `(2^nxz - 1) / sqrt((2^nx - 1)(2^nz - 1))`, evaluated entirely in
/// log-space so counts in the thousands cannot overflow.
pub fn mdnf_kernel_normalized(stats: BinaryVectorStats) -> f64 {
    if stats.nxz == 0 {
        return 0.0;
    }
    let l = log2_pow2m1(stats.nxz) - 0.5 * (log2_pow2m1(stats.nx) + log2_pow2m1(stats.nz));
    l.exp2()
}

/// Jaccard overlap `nxz / (nx + nz - nxz)`; 0 when both vectors are empty
/// (degenerate pair, treated as maximally dissimilar). Self-similarity is
/// 1 for any non-empty vector, so the normalized kernel coincides with the
/// raw one.
pub fn tanimoto_kernel(stats: BinaryVectorStats) -> f64 {
    let union = stats.nx + stats.nz - stats.nxz;
    if union == 0 {
        return 0.0;
    }
    stats.nxz as f64 / union as f64
}

/// Evaluates the kernel selected by `spec` on one pair of vectors.
///
/// For unnormalized monotone DNF this returns the plain `f64` value (exact
/// up to `2^31 - 1`, then rounded, eventually infinite); callers that need
/// the large-count representation use [`mdnf_kernel`] directly.
pub fn kernel_value(spec: KernelSpec, stats: BinaryVectorStats) -> Result<f64> {
    match (spec.family, spec.normalized) {
        (KernelFamily::Linear, false) => Ok(linear_kernel(stats)),
        (KernelFamily::Linear, true) => Ok(linear_kernel_normalized(stats)),
        (KernelFamily::Conjunctive, false) => Ok(c_kernel(stats, spec.arity)),
        (KernelFamily::Conjunctive, true) => c_kernel_normalized(stats, spec.arity),
        (KernelFamily::Disjunctive, false) => d_kernel(stats, spec.arity),
        (KernelFamily::Disjunctive, true) => d_kernel_normalized(stats, spec.arity),
        (KernelFamily::Mdnf, false) => Ok(mdnf_kernel(stats).to_f64()),
        (KernelFamily::Mdnf, true) => Ok(mdnf_kernel_normalized(stats)),
        (KernelFamily::Tanimoto, _) => Ok(tanimoto_kernel(stats)),
    }
}
