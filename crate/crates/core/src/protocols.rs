//! The staged hash-exchange transmission protocols.
//!
//! All three constructions share one skeleton. Bob partitions the candidates
//! by conditional probability into buckets
//! `S_i = { x : p(x) in (2^-(i+1), 2^-i] }`. Alice reveals hash values of her
//! input in stages; at each stage Bob scans the buckets newly admitted by the
//! stage schedule and terminates as soon as some candidate agrees with every
//! hash value received so far, replying 1 and outputting it (0 continues the
//! interaction). With `k = ceil(log2(1/eps)) + 1` initial hash values, a
//! union bound over all candidates puts the failure probability below `eps`
//! for every input in the support.
//!
//! The schedules:
//!
//! - [`staged_transmit`]: a fixed `stage_width` of fresh hash values per
//!   stage. Stage `t` scans buckets `{h(t-1)+1, ..., ht}` (stage 0 scans
//!   bucket 0 alone); earlier buckets are never rescanned.
//! - [`tuned_transmit`]: the same protocol on the conditional law `p(x|y)`
//!   with `stage_width = ceil(sqrt(H(X|Y)))`, which lands the expected total
//!   at `H(X|Y) + 2 sqrt(H(X|Y)) + log2(1/eps) + O(1)` bits.
//! - [`const_round_transmit`]: stage 0 sends `k + l` hash values and stage
//!   `t` sends `l * 2^t` more, `l = max(ceil(H(X|Y)), 1)`. The geometric
//!   growth caps the expected number of rounds at 4 while the expected total
//!   stays within `3 H(X|Y) + log2(1/eps) + O(1)` bits.
//!
//! For batches over one joint law, [`JointProtocol`] precomputes every
//! conditional row and bucket partition once; the free functions are one-shot
//! conveniences on top of it. [`derandomize`] turns any of the protocols into
//! a deterministic one by fixing the first candidate seed whose exact
//! support-weighted error is within budget.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)] // f64 math comes from the trait under no_std
use num_traits::Float;

use crate::dist::{condition_on, conditional_entropy, Distribution, JointDistribution, SymbolId};
use crate::engine::{run_protocol, ProtocolOutcome};
use crate::hashing::{HashBackend, HashOracle, SharedSeed};
use crate::{Error, Result};

/// Additive constant pinning the `O(1)` of the tuned protocol's expected-bits
/// ceiling; derived from the exact stage accounting.
pub const TUNED_BITS_CONSTANT: f64 = 5.0;
/// Additive constant pinning the `O(1)` of the constant-round protocol's
/// expected-bits ceiling.
pub const CONST_ROUND_BITS_CONSTANT: f64 = 6.0;

/// `ceil` with a relative guard: values within 1e-9 of an integer round to
/// that integer, so dyadic inputs cannot drift across the ceiling under
/// float round-off.
pub(crate) fn ceil_guard(v: f64) -> u32 {
    debug_assert!(v >= 0.0);
    let nearest = v.round();
    if (v - nearest).abs() <= 1e-9 {
        nearest as u32
    } else {
        v.ceil() as u32
    }
}

/// Bucket index of a probability: the unique `i >= 0` with
/// `p in (2^-(i+1), 2^-i]`.
///
/// Computed as `floor(log2(1/p))`, with probabilities within relative 1e-12
/// of a power of two snapped onto the dyadic boundary so that round-off in
/// the logarithm cannot move them into the neighboring bucket. The exact
/// counterpart is [`crate::rational::bucket_index_exact`].
pub fn bucket_index(p: f64) -> Result<u32> {
    // Row renormalization can overshoot 1 by an ulp; tolerate that, reject
    // anything genuinely out of range.
    if !(p > 0.0 && p <= 1.0 + 1e-9) {
        return Err(Error::BadParam(format!(
            "bucket index needs a probability in (0, 1], got {p}"
        )));
    }
    let neg_log = -p.log2();
    let nearest = neg_log.round();
    if nearest >= 0.0 && (p * nearest.exp2() - 1.0).abs() <= 1e-12 {
        Ok(nearest as u32)
    } else {
        Ok(neg_log.floor().max(0.0) as u32)
    }
}

/// The receiver's bucket partition of a distribution's support. Every support
/// element lies in exactly one bucket; members are kept in ascending id
/// order, which fixes the tie-break (the smallest matching id in the first
/// nonempty matched bucket wins).
#[derive(Clone, Debug)]
pub struct BucketPartition {
    /// Sorted bucket indices that are nonempty.
    indices: Vec<u32>,
    /// Parallel to `indices`; each member list ascending.
    members: Vec<Vec<SymbolId>>,
    i_max: u32,
}

impl BucketPartition {
    pub fn new(dist: &Distribution) -> Result<Self> {
        let mut pairs: Vec<(u32, SymbolId)> = Vec::with_capacity(dist.support_len());
        for &(id, p) in dist.entries() {
            pairs.push((bucket_index(p)?, id));
        }
        pairs.sort_unstable();
        let mut indices = Vec::new();
        let mut members: Vec<Vec<SymbolId>> = Vec::new();
        for (i, id) in pairs {
            if indices.last() != Some(&i) {
                indices.push(i);
                members.push(Vec::new());
            }
            members.last_mut().expect("just pushed").push(id);
        }
        let i_max = *indices.last().expect("nonempty support");
        Ok(BucketPartition {
            indices,
            members,
            i_max,
        })
    }

    /// Largest bucket index in the support.
    pub fn i_max(&self) -> u32 {
        self.i_max
    }

    /// Bucket containing symbol `a`, if any.
    pub fn bucket_of(&self, a: SymbolId) -> Option<u32> {
        for (i, members) in self.indices.iter().zip(&self.members) {
            if members.binary_search(&a).is_ok() {
                return Some(*i);
            }
        }
        None
    }

    /// Nonempty buckets with index in `[lo, hi]`, ascending.
    fn in_window(&self, lo: u32, hi: u32) -> impl Iterator<Item = (u32, &[SymbolId])> {
        let start = self.indices.partition_point(|&i| i < lo);
        let end = self.indices.partition_point(|&i| i <= hi);
        self.indices[start..end]
            .iter()
            .zip(&self.members[start..end])
            .map(|(&i, m)| (i, m.as_slice()))
    }
}

/// How many hash values each stage adds and which buckets it admits.
#[derive(Clone, Copy, Debug)]
enum Schedule {
    /// Stage 0 sends `k` values and scans bucket 0; stage `t` sends `h` more
    /// and scans `{h(t-1)+1, ..., ht}`.
    Fixed { k: u32, h: u32 },
    /// Stage 0 sends `k + l` values and scans buckets `0..=l`; stage `t`
    /// sends `l * 2^t` more and scans `{l(2^t - 1)+1, ..., l(2^(t+1) - 1)}`.
    Geometric { k: u32, l: u32 },
}

impl Schedule {
    fn new_hashes(self, stage: u32) -> u32 {
        match self {
            Schedule::Fixed { k, h } => {
                if stage == 0 {
                    k
                } else {
                    h
                }
            }
            Schedule::Geometric { k, l } => {
                if stage == 0 {
                    k + l
                } else {
                    ((l as u64) << stage)
                        .try_into()
                        .expect("stage budget fits in u32 at desk scale")
                }
            }
        }
    }

    fn window(self, stage: u32) -> (u32, u32) {
        match self {
            Schedule::Fixed { h, .. } => {
                if stage == 0 {
                    (0, 0)
                } else {
                    (h * (stage - 1) + 1, h * stage)
                }
            }
            Schedule::Geometric { l, .. } => {
                if stage == 0 {
                    (0, l)
                } else {
                    let lo = (l as u64) * ((1u64 << stage) - 1) + 1;
                    let hi = (l as u64) * ((1u64 << (stage + 1)) - 1);
                    (
                        lo.try_into().expect("bucket window fits in u32"),
                        hi.min(u32::MAX as u64) as u32,
                    )
                }
            }
        }
    }

    /// First stage whose window covers bucket `i`.
    fn stage_of(self, i: u32) -> u32 {
        match self {
            Schedule::Fixed { h, .. } => {
                if i == 0 {
                    0
                } else {
                    i.div_ceil(h)
                }
            }
            Schedule::Geometric { l, .. } => {
                if i <= l {
                    0
                } else {
                    let mut t = 1;
                    while (l as u64) * ((1u64 << (t + 1)) - 1) < i as u64 {
                        t += 1;
                    }
                    t
                }
            }
        }
    }

    /// Total hash values available to Bob after `stage` completes.
    fn hashes_through(self, stage: u32) -> u64 {
        (0..=stage).map(|t| self.new_hashes(t) as u64).sum()
    }
}

/// Does `cand` agree with every hash value Alice has sent?
#[inline]
fn matches_all(oracle: &HashOracle, cand: SymbolId, sent: &[bool]) -> bool {
    sent.iter()
        .enumerate()
        .all(|(j, &b)| oracle.bit_unchecked(j as u32, cand) == b)
}

/// The shared protocol skeleton; `a` must be in the partition's support.
fn run_staged(
    a: SymbolId,
    partition: &BucketPartition,
    schedule: Schedule,
    oracle: &HashOracle,
) -> Result<ProtocolOutcome> {
    let max_stage = schedule.stage_of(partition.i_max());
    let mut sent_count = 0u32;
    let alice = move |turn: usize, _from_bob: &[bool]| {
        let add = schedule.new_hashes(turn as u32);
        let msg: Vec<bool> = (sent_count..sent_count + add)
            .map(|j| oracle.bit_unchecked(j, a))
            .collect();
        sent_count += add;
        msg
    };
    let bob = move |turn: usize, from_alice: &[bool]| {
        let (lo, hi) = schedule.window(turn as u32);
        for (_, members) in partition.in_window(lo, hi) {
            for &cand in members {
                if matches_all(oracle, cand, from_alice) {
                    return (vec![true], Some(cand));
                }
            }
        }
        (vec![false], None)
    };
    run_protocol(alice, bob, a, max_stage as usize + 2)
}

/// Parameters of the fixed-width staged protocol.
#[derive(Clone, Copy, Debug)]
pub struct StagedConfig {
    pub eps: f64,
    /// Fresh hash values per stage after stage 0.
    pub stage_width: u32,
}

impl StagedConfig {
    pub fn new(eps: f64, stage_width: u32) -> Result<Self> {
        if !(eps > 0.0 && eps < 1.0) {
            return Err(Error::BadParam(format!(
                "error budget must lie in (0, 1), got {eps}"
            )));
        }
        if stage_width == 0 {
            return Err(Error::BadParam("stage width must be positive".into()));
        }
        Ok(StagedConfig { eps, stage_width })
    }

    /// Hash values sent before the first reply: `ceil(log2(1/eps)) + 1`.
    pub fn k(&self) -> u32 {
        ceil_guard((1.0 / self.eps).log2()) + 1
    }
}

/// Hash tables a fixed-width run over `partition` can consume, for
/// pre-materialization: `k + h * ceil(i_max / h)`.
pub fn staged_tables_needed(partition: &BucketPartition, cfg: &StagedConfig) -> u32 {
    let schedule = Schedule::Fixed {
        k: cfg.k(),
        h: cfg.stage_width,
    };
    schedule.hashes_through(schedule.stage_of(partition.i_max())) as u32
}

/// Transmits `a`, known to Alice, to a receiver who knows only the
/// distribution `mu`, using `k` hash values up front and `stage_width` fresh
/// values per stage.
///
/// Over the oracle's randomness the output differs from `a` with probability
/// at most `cfg.eps`, and every run costs Alice exactly `k + stage_width * t`
/// bits and Bob `t + 1` bits, where the stop stage `t` never exceeds
/// `ceil(i/stage_width)` for `i = floor(log2(1/mu(a)))`.
pub fn staged_transmit(
    a: SymbolId,
    mu: &Distribution,
    cfg: &StagedConfig,
    oracle: &HashOracle,
) -> Result<ProtocolOutcome> {
    if oracle.domain_size() != mu.domain_size() {
        return Err(Error::BadParam(format!(
            "oracle domain {} does not match distribution domain {}",
            oracle.domain_size(),
            mu.domain_size()
        )));
    }
    if mu.prob(a) == 0.0 {
        return Err(Error::NotInSupport(a.0));
    }
    let partition = BucketPartition::new(mu)?;
    run_staged(
        a,
        &partition,
        Schedule::Fixed {
            k: cfg.k(),
            h: cfg.stage_width,
        },
        oracle,
    )
}

/// Fixed-width run over a prebuilt partition; used by the compressor, which
/// prepares its own per-coin partitions.
pub(crate) fn run_staged_over(
    a: SymbolId,
    partition: &BucketPartition,
    cfg: &StagedConfig,
    oracle: &HashOracle,
) -> Result<ProtocolOutcome> {
    run_staged(
        a,
        partition,
        Schedule::Fixed {
            k: cfg.k(),
            h: cfg.stage_width,
        },
        oracle,
    )
}

/// Which of the three constructions a [`JointProtocol`] runs.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case"))]
pub enum ProtocolKind {
    /// Fixed stage width, chosen by the caller.
    Staged { stage_width: u32 },
    /// Stage width `ceil(sqrt(H(X|Y)))`, clamped to at least 1.
    Tuned,
    /// Geometric stage widths from `l = max(ceil(H(X|Y)), 1)`.
    ConstRound,
}

struct RowState {
    cond: Distribution,
    partition: BucketPartition,
}

/// A transmission protocol prepared for one joint law: every conditional row
/// and bucket partition is computed once, so repeated runs only pay for hash
/// queries. Immutable after construction; runs are pure given `(x, y, oracle)`.
pub struct JointProtocol {
    kind: ProtocolKind,
    eps: f64,
    k: u32,
    /// Stage width for Staged/Tuned; `l` for ConstRound.
    stage_param: u32,
    cond_entropy: f64,
    x_size: u32,
    rows: Vec<RowState>,
    support: Vec<(SymbolId, SymbolId, f64)>,
    tables_needed: u32,
}

impl JointProtocol {
    pub fn new(joint: &JointDistribution, kind: ProtocolKind, eps: f64) -> Result<Self> {
        if !(eps > 0.0 && eps < 1.0) {
            return Err(Error::BadParam(format!(
                "error budget must lie in (0, 1), got {eps}"
            )));
        }
        let h_cond = conditional_entropy(joint);
        let k = ceil_guard((1.0 / eps).log2()) + 1;
        let stage_param = match kind {
            ProtocolKind::Staged { stage_width } => {
                if stage_width == 0 {
                    return Err(Error::BadParam("stage width must be positive".into()));
                }
                stage_width
            }
            ProtocolKind::Tuned => ceil_guard(h_cond.sqrt()).max(1),
            // l = 0 would make the stage-0 window empty; the clamp costs at
            // most one bit.
            ProtocolKind::ConstRound => ceil_guard(h_cond).max(1),
        };
        let mut rows = Vec::with_capacity(joint.y_size() as usize);
        let mut i_max = 0;
        for y in 0..joint.y_size() {
            let cond = condition_on(joint, SymbolId(y))?.dist;
            let partition = BucketPartition::new(&cond)?;
            i_max = i_max.max(partition.i_max());
            rows.push(RowState { cond, partition });
        }
        let schedule = match kind {
            ProtocolKind::ConstRound => Schedule::Geometric { k, l: stage_param },
            _ => Schedule::Fixed { k, h: stage_param },
        };
        let tables_needed = schedule.hashes_through(schedule.stage_of(i_max)) as u32;
        Ok(JointProtocol {
            kind,
            eps,
            k,
            stage_param,
            cond_entropy: h_cond,
            x_size: joint.x_size(),
            rows,
            support: joint.entries().to_vec(),
            tables_needed,
        })
    }

    pub fn kind(&self) -> ProtocolKind {
        self.kind
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    pub fn k(&self) -> u32 {
        self.k
    }

    /// Stage width for Staged/Tuned, `l` for ConstRound.
    pub fn stage_param(&self) -> u32 {
        self.stage_param
    }

    pub fn cond_entropy(&self) -> f64 {
        self.cond_entropy
    }

    pub fn x_size(&self) -> u32 {
        self.x_size
    }

    /// Hash tables a run can consume; pass to
    /// [`HashOracle::with_tables`](crate::hashing::HashOracle::with_tables)
    /// to pre-materialize per trial.
    pub fn tables_needed(&self) -> u32 {
        self.tables_needed
    }

    /// Support triples `(x, y, p)` of the underlying joint law.
    pub fn support(&self) -> &[(SymbolId, SymbolId, f64)] {
        &self.support
    }

    /// Conditional probability `p(x | y)`; errors outside the y-domain.
    pub fn conditional_prob(&self, x: SymbolId, y: SymbolId) -> Result<f64> {
        let row = self
            .rows
            .get(y.index())
            .ok_or(Error::UnknownY(y.0))?;
        Ok(row.cond.prob(x))
    }

    fn schedule(&self) -> Schedule {
        match self.kind {
            ProtocolKind::ConstRound => Schedule::Geometric {
                k: self.k,
                l: self.stage_param,
            },
            _ => Schedule::Fixed {
                k: self.k,
                h: self.stage_param,
            },
        }
    }

    /// One run on inputs `(x, y)`; `x` must be in the support of `p(.|y)`.
    pub fn run(&self, x: SymbolId, y: SymbolId, oracle: &HashOracle) -> Result<ProtocolOutcome> {
        if oracle.domain_size() != self.x_size {
            return Err(Error::BadParam(format!(
                "oracle domain {} does not match x domain {}",
                oracle.domain_size(),
                self.x_size
            )));
        }
        let row = self.rows.get(y.index()).ok_or(Error::UnknownY(y.0))?;
        if row.cond.prob(x) == 0.0 {
            return Err(Error::NotInSupport(x.0));
        }
        run_staged(x, &row.partition, self.schedule(), oracle)
    }
}

/// One-shot entropy-tuned transmission of `x` to a receiver holding `y`.
/// For batches build a [`JointProtocol`] with [`ProtocolKind::Tuned`] once.
pub fn tuned_transmit(
    joint: &JointDistribution,
    x: SymbolId,
    y: SymbolId,
    eps: f64,
    oracle: &HashOracle,
) -> Result<ProtocolOutcome> {
    JointProtocol::new(joint, ProtocolKind::Tuned, eps)?.run(x, y, oracle)
}

/// One-shot constant-expected-rounds transmission.
pub fn const_round_transmit(
    joint: &JointDistribution,
    x: SymbolId,
    y: SymbolId,
    eps: f64,
    oracle: &HashOracle,
) -> Result<ProtocolOutcome> {
    JointProtocol::new(joint, ProtocolKind::ConstRound, eps)?.run(x, y, oracle)
}

/// Ceiling on the tuned protocol's expected total bits:
/// `H + 2 sqrt(H) + log2(1/eps) + 5`. Monotone in `H` and in `1/eps`.
pub fn tuned_bits_bound(cond_entropy: f64, eps: f64) -> f64 {
    cond_entropy + 2.0 * cond_entropy.sqrt() + (1.0 / eps).log2() + TUNED_BITS_CONSTANT
}

/// Ceiling on the constant-round protocol's expected total bits:
/// `3H + log2(1/eps) + 6`.
pub fn const_round_bits_bound(cond_entropy: f64, eps: f64) -> f64 {
    3.0 * cond_entropy + (1.0 / eps).log2() + CONST_ROUND_BITS_CONSTANT
}

/// Ceiling on the fixed-width staged protocol's expected total bits for an
/// arbitrary stage width `w`: `H + H/w + w + log2(1/eps) + 5`. The tuned
/// bound is this expression optimized over `w`.
pub fn staged_bits_bound(cond_entropy: f64, stage_width: u32, eps: f64) -> f64 {
    let w = stage_width as f64;
    cond_entropy + cond_entropy / w + w + (1.0 / eps).log2() + TUNED_BITS_CONSTANT
}

/// Exact evaluation of one fixed seed: the protocol is run deterministically
/// on every support pair.
#[derive(Clone, Copy, Debug)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SeedReport {
    pub seed: SharedSeed,
    /// Support-weighted probability of a wrong output.
    pub exact_error: f64,
    /// Support-weighted mean of total bits.
    pub mean_total_bits: f64,
    /// Support-weighted mean of Alice-to-Bob bits.
    pub mean_bits_a_to_b: f64,
}

/// Runs `protocol` with the fixed `seed` on every support pair and weights
/// the results by the joint law.
pub fn evaluate_seed(
    protocol: &JointProtocol,
    seed: SharedSeed,
    backend: HashBackend,
) -> Result<SeedReport> {
    let oracle = HashOracle::with_tables(
        seed,
        protocol.x_size(),
        backend,
        protocol.tables_needed(),
    )?;
    let mut exact_error = 0.0;
    let mut mean_total_bits = 0.0;
    let mut mean_bits_a_to_b = 0.0;
    for &(x, y, p) in protocol.support() {
        let outcome = protocol.run(x, y, &oracle)?;
        if !outcome.correct {
            exact_error += p;
        }
        mean_total_bits += p * outcome.transcript.total_bits() as f64;
        mean_bits_a_to_b += p * outcome.transcript.bits_a_to_b() as f64;
    }
    Ok(SeedReport {
        seed,
        exact_error,
        mean_total_bits,
        mean_bits_a_to_b,
    })
}

/// One Monte-Carlo trial: the input pair is sampled from the joint law and
/// the hash oracle is freshly derived, both from `(master, trial)`, so trials
/// are independent of one another and reproducible in any execution order.
pub fn monte_carlo_trial(
    protocol: &JointProtocol,
    joint: &JointDistribution,
    master: SharedSeed,
    backend: HashBackend,
    trial: u64,
) -> Result<crate::engine::TrialRecord> {
    use crate::hashing::{derive_seed, TAG_TRIAL_INPUT, TAG_TRIAL_ORACLE};
    use rand_chacha::rand_core::SeedableRng;
    let mut input_rng =
        rand_chacha::ChaCha20Rng::from_seed(derive_seed(master, TAG_TRIAL_INPUT, trial).0);
    let (x, y) = joint.sample(&mut input_rng);
    let oracle = HashOracle::with_tables(
        derive_seed(master, TAG_TRIAL_ORACLE, trial),
        protocol.x_size(),
        backend,
        protocol.tables_needed(),
    )?;
    let outcome = protocol.run(x, y, &oracle)?;
    Ok(crate::engine::TrialRecord::from_outcome(trial, x, y, &outcome))
}

/// Fixes the shared randomness: returns the report of the first candidate
/// seed whose exact support-weighted error is at most the protocol's budget.
///
/// A random seed qualifies in expectation, so a short candidate list
/// suffices; [`Error::NoSeedFound`] signals that the list was too short. The
/// support must be small enough to enumerate (at most 10^5 pairs).
pub fn derandomize(
    protocol: &JointProtocol,
    candidates: &[SharedSeed],
    backend: HashBackend,
) -> Result<SeedReport> {
    if candidates.is_empty() {
        return Err(Error::BadParam("candidate seed list is empty".into()));
    }
    if protocol.support().len() > 100_000 {
        return Err(Error::BadParam(format!(
            "support of {} pairs is too large for exhaustive seed evaluation",
            protocol.support().len()
        )));
    }
    for &seed in candidates {
        let report = evaluate_seed(protocol, seed, backend)?;
        if report.exact_error <= protocol.eps() {
            return Ok(report);
        }
    }
    Err(Error::NoSeedFound)
}

#[cfg(test)]
mod tests;
