//! Exact-rational mirror of the distribution constructors, for supports up to
//! ~10^4 entries.
//!
//! Probability buckets are bounded by powers of two, so a float that lands on
//! a dyadic boundary must not be mis-bucketed by log round-off. The rational
//! backend computes the same distributions and bucket indices in exact
//! arithmetic; unit tests compare the float path against it entrywise.

use alloc::format;
use alloc::vec::Vec;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::dist::{JointDistribution, SymbolId};
use crate::{Error, Result};

/// A joint law with exact rational probabilities.
#[derive(Clone, Debug)]
pub struct RationalJoint {
    pub x_size: u32,
    pub y_size: u32,
    /// Sorted by `(y, x)`, strictly positive entries.
    pub entries: Vec<(SymbolId, SymbolId, BigRational)>,
}

fn ratio(num: i64, den: i64) -> BigRational {
    BigRational::new(BigInt::from(num), BigInt::from(den))
}

impl RationalJoint {
    pub fn total_mass(&self) -> BigRational {
        self.entries
            .iter()
            .fold(BigRational::zero(), |acc, (_, _, p)| acc + p)
    }

    /// Exact conditional row `p(x | y)`, normalized.
    pub fn conditional_row(&self, y: SymbolId) -> Result<Vec<(SymbolId, BigRational)>> {
        let row: Vec<_> = self
            .entries
            .iter()
            .filter(|&&(_, ey, _)| ey == y)
            .collect();
        if row.is_empty() {
            return Err(Error::UnknownY(y.0));
        }
        let mass = row
            .iter()
            .fold(BigRational::zero(), |acc, (_, _, p)| acc + p);
        Ok(row
            .into_iter()
            .map(|(x, _, p)| (*x, p / &mass))
            .collect())
    }

    /// Rounds every entry to the nearest double and revalidates.
    pub fn to_f64(&self) -> Result<JointDistribution> {
        let entries = self
            .entries
            .iter()
            .map(|(x, y, p)| {
                let pf = p.to_f64().ok_or_else(|| {
                    Error::InvalidDistribution(format!("entry ({x}, {y}) does not fit in f64"))
                })?;
                Ok((*x, *y, pf))
            })
            .collect::<Result<Vec<_>>>()?;
        JointDistribution::new(self.x_size, self.y_size, entries)
    }
}

/// Exact counterpart of [`crate::dist::presets::delta_noise`] with
/// `delta = delta_num / delta_den`.
pub fn delta_noise_exact(n: u32, delta_num: i64, delta_den: i64) -> Result<RationalJoint> {
    if n == 0 {
        return Err(Error::BadParam("delta_noise requires n >= 1".into()));
    }
    let delta = ratio(delta_num, delta_den);
    if !(delta.is_positive() && delta < ratio(1, 2)) {
        return Err(Error::BadParam(format!(
            "delta_noise requires 0 < delta < 1/2, got {delta_num}/{delta_den}"
        )));
    }
    let size = n + 1;
    let one = BigRational::one();
    let diag = (&one - &delta) / BigRational::from(BigInt::from(size));
    let off = &delta / BigRational::from(BigInt::from(n as u64 * size as u64));
    let mut entries = Vec::with_capacity((size as usize) * (size as usize));
    for j in 0..size {
        for i in 0..size {
            let p = if i == j { diag.clone() } else { off.clone() };
            entries.push((SymbolId(i), SymbolId(j), p));
        }
    }
    Ok(RationalJoint {
        x_size: size,
        y_size: size,
        entries,
    })
}

/// Exact counterpart of [`crate::dist::presets::harmonic_permutation`].
pub fn harmonic_permutation_exact(n: u32) -> Result<RationalJoint> {
    use crate::dist::presets::{factorial, permutation_from_rank, MAX_PERMUTATION_N};
    if n == 0 || n > MAX_PERMUTATION_N {
        return Err(Error::BadParam(format!(
            "harmonic_permutation_exact requires 1 <= n <= {MAX_PERMUTATION_N}"
        )));
    }
    let h_n = (1..=n as i64).fold(BigRational::zero(), |acc, k| acc + ratio(1, k));
    let n_fact = factorial(n);
    let mut entries = Vec::with_capacity((n as u64 * n_fact) as usize);
    for rank in 0..n_fact {
        let perm = permutation_from_rank(n, rank);
        for i in 1..=n {
            let sigma_i = perm[(i - 1) as usize] as i64;
            let p = (ratio(1, sigma_i) / &h_n) / BigRational::from(BigInt::from(n_fact));
            entries.push((SymbolId(i - 1), SymbolId(rank as u32), p));
        }
    }
    Ok(RationalJoint {
        x_size: n,
        y_size: n_fact as u32,
        entries,
    })
}

/// Exact counterpart of [`crate::dist::presets::fano_tight`] with
/// `eps = eps_num / eps_den`.
pub fn fano_tight_exact(n: u32, eps_num: i64, eps_den: i64) -> Result<RationalJoint> {
    if n == 0 || n > 20 {
        return Err(Error::BadParam(format!(
            "fano_tight requires 1 <= n <= 20, got {n}"
        )));
    }
    let eps = ratio(eps_num, eps_den);
    if !(eps.is_positive() && eps < BigRational::one()) {
        return Err(Error::BadParam("fano_tight requires 0 < eps < 1".into()));
    }
    let strings = 1u32 << n;
    let mut entries = Vec::with_capacity(strings as usize + 1);
    entries.push((SymbolId(0), SymbolId(0), BigRational::one() - &eps));
    let p = &eps / BigRational::from(BigInt::from(strings));
    for i in 1..=strings {
        entries.push((SymbolId(i), SymbolId(0), p.clone()));
    }
    Ok(RationalJoint {
        x_size: strings + 1,
        y_size: 1,
        entries,
    })
}

/// Exact bucket index: the unique `i >= 0` with `2^(-i-1) < p <= 2^(-i)`,
/// for `0 < p <= 1`.
pub fn bucket_index_exact(p: &BigRational) -> Result<u32> {
    if !p.is_positive() || p > &BigRational::one() {
        return Err(Error::BadParam(format!(
            "bucket index needs a probability in (0, 1], got {p}"
        )));
    }
    // Minimal i with p * 2^(i+1) > 1; minimality gives p * 2^i <= 1.
    let num = p.numer();
    let den = p.denom();
    let mut i = 0u32;
    loop {
        if (num << (i + 1)) > *den {
            return Ok(i);
        }
        i += 1;
        if i > 4096 {
            return Err(Error::BadParam("probability too small to bucket".into()));
        }
    }
}
