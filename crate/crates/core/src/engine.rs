//! Two-party alternating-message simulation with bit-exact transcript,
//! direction, and round accounting.
//!
//! Protocols are modeled at message level: each move is a nonempty block of
//! bits. Round and bit counts are unchanged relative to a bit-level tree; a
//! round is a maximal run of consecutive same-direction messages. The
//! receiver's per-stage continue/terminate signal is an ordinary one-bit
//! message and counts toward both totals.

use alloc::vec::Vec;
use core::fmt;

#[allow(unused_imports)] // f64 math comes from the trait under no_std
use num_traits::Float;

use crate::dist::SymbolId;
use crate::{Error, Result};

/// Who sent a message.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Direction {
    AliceToBob,
    BobToAlice,
}

/// Ordered record of every message exchanged in one run.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Transcript {
    messages: Vec<(Direction, Vec<bool>)>,
}

impl Transcript {
    pub fn new() -> Self {
        Transcript::default()
    }

    /// Appends a message. Empty messages are not representable.
    pub fn push(&mut self, direction: Direction, bits: Vec<bool>) {
        debug_assert!(!bits.is_empty());
        self.messages.push((direction, bits));
    }

    pub fn messages(&self) -> &[(Direction, Vec<bool>)] {
        &self.messages
    }

    pub fn total_bits(&self) -> u32 {
        self.messages.iter().map(|(_, b)| b.len() as u32).sum()
    }

    pub fn bits_in(&self, direction: Direction) -> u32 {
        self.messages
            .iter()
            .filter(|(d, _)| *d == direction)
            .map(|(_, b)| b.len() as u32)
            .sum()
    }

    pub fn bits_a_to_b(&self) -> u32 {
        self.bits_in(Direction::AliceToBob)
    }

    pub fn bits_b_to_a(&self) -> u32 {
        self.bits_in(Direction::BobToAlice)
    }

    /// Number of maximal runs of consecutive same-direction messages.
    pub fn rounds(&self) -> u32 {
        let mut rounds = 0;
        let mut last = None;
        for (d, _) in &self.messages {
            if last != Some(*d) {
                rounds += 1;
                last = Some(*d);
            }
        }
        rounds
    }

    /// All bits sent by one party, concatenated in order.
    pub fn bits_from(&self, direction: Direction) -> Vec<bool> {
        let mut out = Vec::new();
        for (d, bits) in &self.messages {
            if *d == direction {
                out.extend_from_slice(bits);
            }
        }
        out
    }
}

impl fmt::Display for Transcript {
    /// One line per message: `A>B: 0110` or `B>A: 1`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (d, bits) in &self.messages {
            let tag = match d {
                Direction::AliceToBob => "A>B",
                Direction::BobToAlice => "B>A",
            };
            write!(f, "{tag}: ")?;
            for &b in bits {
                write!(f, "{}", b as u8)?;
            }
            writeln!(f)?;
        }
        Ok(())
    }
}

/// Result of one protocol run: the receiver's output, the full transcript,
/// and whether the output matched the reference value.
#[derive(Clone, Debug)]
pub struct ProtocolOutcome {
    pub output: SymbolId,
    pub transcript: Transcript,
    pub correct: bool,
}

/// Drives an alternating interaction until Bob outputs.
///
/// Per turn, Alice is offered the bits Bob has sent so far and returns her
/// next message; Bob is then offered everything Alice has sent and returns
/// his reply plus, to terminate, his output. Either side may return an empty
/// message, which sends nothing (used for one-way and zero-communication
/// protocols). Strategies must be deterministic functions of their own input,
/// the shared oracle they capture, and the bits received so far.
///
/// `max_turns` is a hard cap; exceeding it means the protocol is buggy, not
/// unlucky, and surfaces as [`Error::NonTermination`].
pub fn run_protocol<A, B>(
    mut alice: A,
    mut bob: B,
    reference: SymbolId,
    max_turns: usize,
) -> Result<ProtocolOutcome>
where
    A: FnMut(usize, &[bool]) -> Vec<bool>,
    B: FnMut(usize, &[bool]) -> (Vec<bool>, Option<SymbolId>),
{
    let mut transcript = Transcript::new();
    let mut alice_sent: Vec<bool> = Vec::new();
    let mut bob_sent: Vec<bool> = Vec::new();
    for turn in 0..max_turns {
        let msg = alice(turn, &bob_sent);
        if !msg.is_empty() {
            alice_sent.extend_from_slice(&msg);
            transcript.push(Direction::AliceToBob, msg);
        }
        let (reply, output) = bob(turn, &alice_sent);
        if !reply.is_empty() {
            bob_sent.extend_from_slice(&reply);
            transcript.push(Direction::BobToAlice, reply);
        }
        if let Some(output) = output {
            let correct = output == reference;
            return Ok(ProtocolOutcome {
                output,
                transcript,
                correct,
            });
        }
    }
    Err(Error::NonTermination { max_turns })
}

/// Width of the fixed-length binary encoding of a domain: `ceil(log2(n))`.
pub fn code_width(domain_size: u32) -> u32 {
    32 - domain_size.saturating_sub(1).leading_zeros()
}

/// Big-endian fixed-width bits of a symbol.
pub fn encode_symbol(a: SymbolId, width: u32) -> Vec<bool> {
    (0..width).rev().map(|i| (a.0 >> i) & 1 == 1).collect()
}

pub fn decode_symbol(bits: &[bool]) -> SymbolId {
    SymbolId(bits.iter().fold(0u32, |acc, &b| (acc << 1) | b as u32))
}

/// One-way baseline: Alice sends `x` verbatim in `ceil(log2(domain))` bits.
pub fn run_verbatim(x: SymbolId, domain_size: u32, reference: SymbolId) -> ProtocolOutcome {
    let width = code_width(domain_size);
    run_protocol(
        move |_, _| encode_symbol(x, width),
        move |_, received| (Vec::new(), Some(decode_symbol(received))),
        reference,
        2,
    )
    .expect("verbatim protocol terminates on turn 0")
}

/// Zero-communication baseline: Bob outputs a constant guess.
pub fn run_constant_output(guess: SymbolId, reference: SymbolId) -> ProtocolOutcome {
    run_protocol(
        |_, _| Vec::new(),
        move |_, _| (Vec::new(), Some(guess)),
        reference,
        2,
    )
    .expect("constant protocol terminates on turn 0")
}

/// One row of a Monte-Carlo experiment.
#[derive(Clone, Copy, Debug)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TrialRecord {
    pub trial: u64,
    pub x: SymbolId,
    pub y: SymbolId,
    pub bits_a_to_b: u32,
    pub bits_b_to_a: u32,
    pub rounds: u32,
    pub correct: bool,
}

impl TrialRecord {
    pub fn from_outcome(trial: u64, x: SymbolId, y: SymbolId, outcome: &ProtocolOutcome) -> Self {
        TrialRecord {
            trial,
            x,
            y,
            bits_a_to_b: outcome.transcript.bits_a_to_b(),
            bits_b_to_a: outcome.transcript.bits_b_to_a(),
            rounds: outcome.transcript.rounds(),
            correct: outcome.correct,
        }
    }

    pub fn total_bits(&self) -> u32 {
        self.bits_a_to_b + self.bits_b_to_a
    }
}

/// Aggregate statistics over a batch of trials.
///
/// All accumulators are integers, so the result is independent of summation
/// order and bit-identical across sequential and parallel runs.
#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct RunStats {
    pub trials: u64,
    pub mean_total_bits: f64,
    pub mean_bits_a_to_b: f64,
    pub mean_bits_b_to_a: f64,
    pub mean_rounds: f64,
    pub error_rate: f64,
    pub max_bits_per_input: u32,
    /// Standard error of `mean_bits_a_to_b`, for Monte-Carlo slack.
    pub se_bits_a_to_b: f64,
}

impl RunStats {
    pub fn from_records(records: &[TrialRecord]) -> Result<Self> {
        if records.is_empty() {
            return Err(Error::BadParam("stats need at least one trial".into()));
        }
        let n = records.len() as u64;
        let mut sum_total = 0u64;
        let mut sum_ab = 0u64;
        let mut sum_ab_sq = 0u64;
        let mut sum_ba = 0u64;
        let mut sum_rounds = 0u64;
        let mut errors = 0u64;
        let mut max_bits = 0u32;
        for r in records {
            sum_total += r.total_bits() as u64;
            sum_ab += r.bits_a_to_b as u64;
            sum_ab_sq += (r.bits_a_to_b as u64) * (r.bits_a_to_b as u64);
            sum_ba += r.bits_b_to_a as u64;
            sum_rounds += r.rounds as u64;
            errors += !r.correct as u64;
            max_bits = max_bits.max(r.total_bits());
        }
        let nf = n as f64;
        let mean_ab = sum_ab as f64 / nf;
        let var_ab = (sum_ab_sq as f64 / nf - mean_ab * mean_ab).max(0.0);
        Ok(RunStats {
            trials: n,
            mean_total_bits: sum_total as f64 / nf,
            mean_bits_a_to_b: mean_ab,
            mean_bits_b_to_a: sum_ba as f64 / nf,
            mean_rounds: sum_rounds as f64 / nf,
            error_rate: errors as f64 / nf,
            max_bits_per_input: max_bits,
            se_bits_a_to_b: (var_ab / nf).sqrt(),
        })
    }
}

/// Runs `run_trial` for trial indices `0..trials` and collects the rows.
pub fn collect_trials<F>(trials: u64, run_trial: F) -> Result<Vec<TrialRecord>>
where
    F: FnMut(u64) -> Result<TrialRecord>,
{
    if trials == 0 {
        return Err(Error::BadParam("at least one trial required".into()));
    }
    (0..trials).map(run_trial).collect()
}

/// Arithmetic means over repeated runs; deterministic given the runner.
pub fn expected_stats<F>(trials: u64, run_trial: F) -> Result<RunStats>
where
    F: FnMut(u64) -> Result<TrialRecord>,
{
    RunStats::from_records(&collect_trials(trials, run_trial)?)
}
