//! One-round public-coin protocol compression.
//!
//! A one-round protocol sends a single message `Pi = message_fn(X, R)` from
//! Alice to Bob, where `R` is a public coin. Its information complexity
//! `I = I(X : Pi | Y, R)` equals `H(Pi | Y, R)` in the public-coin case,
//! because `Pi` is determined by `(X, R)`. The compressor replays the
//! protocol cheaply: both parties draw the shared `r`, Bob forms the message
//! law `p(pi | y, r)`, and they run the staged hash protocol over the
//! transcript space with stage width `ceil(sqrt(I))`, which reconstructs
//! `Pi' = Pi` up to statistical distance `eps` per input pair at an expected
//! cost of about `I + 2 sqrt(I)` bits.
//!
//! The compressor's hash bits and the protocol's coin are carved from
//! disjoint streams of the same seed (see [`crate::hashing`]), preserving
//! their independence.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::vec::Vec;

#[allow(unused_imports)] // f64 math comes from the trait under no_std
use num_traits::Float;

use crate::dist::{
    conditional_mutual_information, condition_on, CmiAtom, Distribution, JointDistribution,
    SymbolId,
};
use crate::engine::ProtocolOutcome;
use crate::hashing::{derive_seed, HashBackend, HashOracle, SharedSeed, TAG_TRIAL_ORACLE};
use crate::protocols::{ceil_guard, run_staged_over, BucketPartition, StagedConfig};
use crate::{Error, Result};

/// A public-coin one-round protocol: a total message map over
/// `support(X) x support(R)` together with the coin's law.
///
/// Transcript symbols are renumbered densely in ascending label order; the
/// original labels stay available through [`label`](Self::label).
#[derive(Clone, Debug)]
pub struct OneRoundProtocol {
    r_dist: Distribution,
    /// (x, r) -> dense transcript id.
    map: BTreeMap<(u32, u32), SymbolId>,
    /// Dense id -> original label; sorted ascending.
    labels: Vec<u32>,
}

impl OneRoundProtocol {
    /// Builds a protocol from `(x, r, pi)` triples. Every listed `r` must lie
    /// in the coin domain; totality over a joint law's x-support is checked
    /// when the protocol is used.
    pub fn new(r_dist: Distribution, messages: &[(u32, u32, u32)]) -> Result<Self> {
        if messages.is_empty() {
            return Err(Error::IncompatibleSupports("empty message map".into()));
        }
        let mut labels: Vec<u32> = messages.iter().map(|&(_, _, pi)| pi).collect();
        labels.sort_unstable();
        labels.dedup();
        let mut map = BTreeMap::new();
        for &(x, r, pi) in messages {
            if r >= r_dist.domain_size() {
                return Err(Error::IncompatibleSupports(format!(
                    "coin symbol {r} outside the coin domain"
                )));
            }
            let dense = labels.binary_search(&pi).expect("label collected above") as u32;
            if map.insert((x, r), SymbolId(dense)).is_some() {
                return Err(Error::IncompatibleSupports(format!(
                    "duplicate message entry for (x={x}, r={r})"
                )));
            }
        }
        Ok(OneRoundProtocol {
            r_dist,
            map,
            labels,
        })
    }

    /// The identity protocol `pi = x` with a trivial coin; compressing it
    /// reduces to plain entropy-tuned transmission.
    pub fn verbatim(x_domain: u32) -> Result<Self> {
        let r_dist = Distribution::point_mass(SymbolId(0), 1)?;
        let messages: Vec<(u32, u32, u32)> = (0..x_domain).map(|x| (x, 0, x)).collect();
        OneRoundProtocol::new(r_dist, &messages)
    }

    /// `pi = x XOR r` over `bits`-bit strings with a uniform public coin.
    pub fn xor_uniform(bits: u32) -> Result<Self> {
        if bits == 0 || bits > 16 {
            return Err(Error::BadParam(format!(
                "xor_uniform requires 1 <= bits <= 16, got {bits}"
            )));
        }
        let n = 1u32 << bits;
        let r_dist = Distribution::uniform(n)?;
        let mut messages = Vec::with_capacity((n as usize) * (n as usize));
        for x in 0..n {
            for r in 0..n {
                messages.push((x, r, x ^ r));
            }
        }
        OneRoundProtocol::new(r_dist, &messages)
    }

    pub fn r_dist(&self) -> &Distribution {
        &self.r_dist
    }

    /// Size of the transcript space (the image of the message map).
    pub fn transcript_space(&self) -> u32 {
        self.labels.len() as u32
    }

    /// Original label of a dense transcript id.
    pub fn label(&self, pi: SymbolId) -> u32 {
        self.labels[pi.index()]
    }

    /// Dense transcript id of Alice's message on `(x, r)`.
    pub fn message(&self, x: SymbolId, r: SymbolId) -> Result<SymbolId> {
        self.map.get(&(x.0, r.0)).copied().ok_or_else(|| {
            Error::IncompatibleSupports(format!("message map has no entry for (x={x}, r={r})"))
        })
    }

    /// Message map as `(x, r, label)` triples, for serialization.
    pub fn entries(&self) -> impl Iterator<Item = (u32, u32, u32)> + '_ {
        self.map
            .iter()
            .map(|(&(x, r), &pi)| (x, r, self.labels[pi.index()]))
    }
}

/// Information complexity `I(X : Pi | Y, R)` of a public-coin one-round
/// protocol under a joint law, by exact enumeration of `(X, Y, R, Pi)`.
///
/// Two independent routes are evaluated: the conditional-mutual-information
/// definition and `H(Pi | Y, R)`, which coincide here because
/// `H(Pi | X, Y, R) = 0`; they must agree within 1e-9.
pub fn information_complexity(p: &OneRoundProtocol, joint: &JointDistribution) -> Result<f64> {
    let mut atoms: Vec<CmiAtom> = Vec::new();
    let mut mass_z: BTreeMap<u64, f64> = BTreeMap::new();
    let mut mass_pz: BTreeMap<(u32, u64), f64> = BTreeMap::new();
    for &(x, y, pxy) in joint.entries() {
        for &(r, pr) in p.r_dist().entries() {
            let pi = p.message(x, r)?;
            let prob = pxy * pr;
            let z = ((y.0 as u64) << 32) | r.0 as u64;
            atoms.push((x.0, pi.0, z, prob));
            *mass_z.entry(z).or_insert(0.0) += prob;
            *mass_pz.entry((pi.0, z)).or_insert(0.0) += prob;
        }
    }
    let by_definition = conditional_mutual_information(&atoms)?;
    // Second route: H(Pi | Y, R).
    let message_entropy: f64 = mass_pz
        .iter()
        .map(|(&(_, z), &prob)| prob * (mass_z[&z] / prob).log2())
        .sum();
    assert!(
        (by_definition - message_entropy).abs() <= 1e-9,
        "information complexity routes disagree: {by_definition} vs {message_entropy}"
    );
    Ok(by_definition)
}

/// Largest difference in probability any event can have under two laws on a
/// common symbol space; equals half the L1 distance.
pub fn statistical_distance(a: &Distribution, b: &Distribution) -> f64 {
    let mut l1 = 0.0;
    let mut ia = a.entries().iter().peekable();
    let mut ib = b.entries().iter().peekable();
    loop {
        match (ia.peek(), ib.peek()) {
            (Some(&&(xa, pa)), Some(&&(xb, pb))) => {
                if xa < xb {
                    l1 += pa;
                    ia.next();
                } else if xb < xa {
                    l1 += pb;
                    ib.next();
                } else {
                    l1 += (pa - pb).abs();
                    ia.next();
                    ib.next();
                }
            }
            (Some(&&(_, pa)), None) => {
                l1 += pa;
                ia.next();
            }
            (None, Some(&&(_, pb))) => {
                l1 += pb;
                ib.next();
            }
            (None, None) => break,
        }
    }
    l1 / 2.0
}

struct CoinRow {
    message_law: Distribution,
    partition: BucketPartition,
}

/// A compressor prepared for one `(protocol, joint law, eps)` triple: the
/// information complexity and every per-`(y, r)` message law are computed up
/// front, so each run only draws the coin and exchanges hash values.
pub struct CompressionSession {
    protocol: OneRoundProtocol,
    eps: f64,
    info_complexity: f64,
    cfg: StagedConfig,
    /// Keyed by (y, r).
    rows: BTreeMap<(u32, u32), CoinRow>,
    tables_needed: u32,
}

impl CompressionSession {
    pub fn new(protocol: OneRoundProtocol, joint: &JointDistribution, eps: f64) -> Result<Self> {
        let info_complexity = information_complexity(&protocol, joint)?;
        // Stage width tuned to the exactly-enumerated complexity, not an
        // estimate.
        let cfg = StagedConfig::new(eps, ceil_guard(info_complexity.sqrt()).max(1))?;
        let mut rows = BTreeMap::new();
        let mut tables_needed = 0;
        for y in 0..joint.y_size() {
            let cond_x = condition_on(joint, SymbolId(y))?.dist;
            for &(r, _) in protocol.r_dist().entries() {
                let mut mass: BTreeMap<SymbolId, f64> = BTreeMap::new();
                for &(x, px) in cond_x.entries() {
                    let pi = protocol.message(x, r)?;
                    *mass.entry(pi).or_insert(0.0) += px;
                }
                let message_law = Distribution::new(
                    protocol.transcript_space(),
                    mass.into_iter().collect(),
                )?;
                let partition = BucketPartition::new(&message_law)?;
                tables_needed =
                    tables_needed.max(crate::protocols::staged_tables_needed(&partition, &cfg));
                rows.insert((y, r.0), CoinRow {
                    message_law,
                    partition,
                });
            }
        }
        Ok(CompressionSession {
            protocol,
            eps,
            info_complexity,
            cfg,
            rows,
            tables_needed,
        })
    }

    pub fn info_complexity(&self) -> f64 {
        self.info_complexity
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    /// Stage width the inner staged protocol uses: `max(ceil(sqrt(I)), 1)`.
    pub fn stage_width(&self) -> u32 {
        self.cfg.stage_width
    }

    pub fn tables_needed(&self) -> u32 {
        self.tables_needed
    }

    /// The law of `Pi` conditioned on `X = x` (which is its law conditioned
    /// on any `(x, y)` pair, since the coin is independent of the inputs).
    pub fn message_law_given_x(&self, x: SymbolId) -> Result<Distribution> {
        let mut mass: BTreeMap<SymbolId, f64> = BTreeMap::new();
        for &(r, pr) in self.protocol.r_dist().entries() {
            let pi = self.protocol.message(x, r)?;
            *mass.entry(pi).or_insert(0.0) += pr;
        }
        Distribution::new(self.protocol.transcript_space(), mass.into_iter().collect())
    }

    /// One compression run with the coin drawn from the oracle's coin stream.
    pub fn run(&self, x: SymbolId, y: SymbolId, oracle: &HashOracle) -> Result<ProtocolOutcome> {
        let mut coin = oracle.coin_rng();
        let r = self.protocol.r_dist().sample(&mut coin);
        self.run_with_coin(x, y, r, oracle)
    }

    /// One compression run with an explicit coin value.
    pub fn run_with_coin(
        &self,
        x: SymbolId,
        y: SymbolId,
        r: SymbolId,
        oracle: &HashOracle,
    ) -> Result<ProtocolOutcome> {
        if oracle.domain_size() != self.protocol.transcript_space() {
            return Err(Error::BadParam(format!(
                "oracle domain {} does not match transcript space {}",
                oracle.domain_size(),
                self.protocol.transcript_space()
            )));
        }
        let row = self
            .rows
            .get(&(y.0, r.0))
            .ok_or(Error::UnknownY(y.0))?;
        let target = self.protocol.message(x, r)?;
        if row.message_law.prob(target) == 0.0 {
            return Err(Error::NotInSupport(x.0));
        }
        run_staged_over(target, &row.partition, &self.cfg, oracle)
    }
}

/// Per-pair quality and cost of compressing one protocol under one law.
#[derive(Clone, Debug)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CompressionReport {
    pub info_complexity: f64,
    pub eps: f64,
    /// Support-weighted mean of total bits per run.
    pub mean_bits: f64,
    /// Statistical distance between the reconstructed and the true message
    /// law, conditioned on each support pair `(x, y)`; empirical over the
    /// requested trials.
    pub per_pair_stat_distance: Vec<((u32, u32), f64)>,
}

/// Monte-Carlo compression report: for every support pair, `trials_per_pair`
/// conditional runs under derived per-trial seeds, compared against the exact
/// law of the original message.
pub fn compression_report(
    session: &CompressionSession,
    joint: &JointDistribution,
    trials_per_pair: u32,
    master: SharedSeed,
    backend: HashBackend,
) -> Result<CompressionReport> {
    if trials_per_pair == 0 {
        return Err(Error::BadParam("at least one trial required".into()));
    }
    let mut per_pair = Vec::with_capacity(joint.support_len());
    let mut mean_bits = 0.0;
    let mut trial_counter = 0u64;
    for &(x, y, pxy) in joint.entries() {
        let exact = session.message_law_given_x(x)?;
        let mut counts: BTreeMap<SymbolId, u64> = BTreeMap::new();
        let mut pair_bits = 0u64;
        for _ in 0..trials_per_pair {
            let seed = derive_seed(master, TAG_TRIAL_ORACLE, trial_counter);
            trial_counter += 1;
            let oracle = HashOracle::with_tables(
                seed,
                session.protocol.transcript_space(),
                backend,
                session.tables_needed(),
            )?;
            let outcome = session.run(x, y, &oracle)?;
            *counts.entry(outcome.output).or_insert(0) += 1;
            pair_bits += outcome.transcript.total_bits() as u64;
        }
        let empirical = Distribution::new(
            session.protocol.transcript_space(),
            counts
                .into_iter()
                .map(|(pi, c)| (pi, c as f64 / trials_per_pair as f64))
                .collect(),
        )?;
        per_pair.push(((x.0, y.0), statistical_distance(&empirical, &exact)));
        mean_bits += pxy * (pair_bits as f64 / trials_per_pair as f64);
    }
    Ok(CompressionReport {
        info_complexity: session.info_complexity(),
        eps: session.eps(),
        mean_bits,
        per_pair_stat_distance: per_pair,
    })
}

/// One-shot compression run; prepare a [`CompressionSession`] for batches.
pub fn compress_one_round(
    protocol: &OneRoundProtocol,
    joint: &JointDistribution,
    x: SymbolId,
    y: SymbolId,
    eps: f64,
    oracle: &HashOracle,
) -> Result<ProtocolOutcome> {
    CompressionSession::new(protocol.clone(), joint, eps)?.run(x, y, oracle)
}
