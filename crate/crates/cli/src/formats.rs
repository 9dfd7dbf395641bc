//! On-disk JSON shapes for distributions, one-round protocols, and protocol
//! outcomes, plus CSV export of conditionals.
//!
//! A joint distribution is stored as
//! `{"x_support": [...], "y_support": [...], "entries": [[x, y, p], ...]}`;
//! a one-round protocol as
//! `{"r_dist": [...], "messages": [[x, r, pi], ...]}` with `r_dist` a dense
//! array of positive coin probabilities.

use std::fs;
use std::io::Write;
use std::path::Path;

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

use sidelink_core::compress::OneRoundProtocol;
use sidelink_core::dist::{condition_on, Distribution, JointDistribution, SymbolId};
use sidelink_core::engine::{Direction, ProtocolOutcome};

/// Serialized form of a joint distribution.
#[derive(Serialize, Deserialize)]
pub struct JointDistFile {
    pub x_support: Vec<u32>,
    pub y_support: Vec<u32>,
    pub entries: Vec<(u32, u32, f64)>,
}

impl JointDistFile {
    pub fn from_joint(joint: &JointDistribution) -> Self {
        JointDistFile {
            x_support: (0..joint.x_size()).collect(),
            y_support: (0..joint.y_size()).collect(),
            entries: joint
                .entries()
                .iter()
                .map(|&(x, y, p)| (x.0, y.0, p))
                .collect(),
        }
    }

    pub fn into_joint(self) -> Result<JointDistribution> {
        for (i, &x) in self.x_support.iter().enumerate() {
            if x != i as u32 {
                bail!("x_support must be the dense range 0..{}", self.x_support.len());
            }
        }
        for (i, &y) in self.y_support.iter().enumerate() {
            if y != i as u32 {
                bail!("y_support must be the dense range 0..{}", self.y_support.len());
            }
        }
        let entries = self
            .entries
            .into_iter()
            .map(|(x, y, p)| (SymbolId(x), SymbolId(y), p))
            .collect();
        JointDistribution::new(
            self.x_support.len() as u32,
            self.y_support.len() as u32,
            entries,
        )
        .map_err(Into::into)
    }
}

pub fn load_joint(path: &Path) -> Result<JointDistribution> {
    let text = fs::read_to_string(path)
        .with_context(|| format!("reading distribution file {}", path.display()))?;
    let file: JointDistFile =
        serde_json::from_str(&text).context("parsing distribution JSON")?;
    file.into_joint()
}

pub fn save_joint(joint: &JointDistribution, path: &Path) -> Result<()> {
    let text = serde_json::to_string_pretty(&JointDistFile::from_joint(joint))?;
    fs::write(path, text)
        .with_context(|| format!("writing distribution file {}", path.display()))
}

/// Serialized form of a public-coin one-round protocol.
#[derive(Serialize, Deserialize)]
pub struct OneRoundProtocolFile {
    /// Dense positive probabilities of the coin symbols `0..len`.
    pub r_dist: Vec<f64>,
    /// `(x, r, pi)` message triples.
    pub messages: Vec<(u32, u32, u32)>,
}

impl OneRoundProtocolFile {
    pub fn from_protocol(p: &OneRoundProtocol) -> Self {
        OneRoundProtocolFile {
            r_dist: (0..p.r_dist().domain_size())
                .map(|r| p.r_dist().prob(SymbolId(r)))
                .collect(),
            messages: p.entries().collect(),
        }
    }

    pub fn into_protocol(self) -> Result<OneRoundProtocol> {
        let entries = self
            .r_dist
            .iter()
            .enumerate()
            .map(|(i, &p)| (SymbolId(i as u32), p))
            .collect();
        let r_dist = Distribution::new(self.r_dist.len() as u32, entries)?;
        OneRoundProtocol::new(r_dist, &self.messages).map_err(Into::into)
    }
}

pub fn load_protocol(path: &Path) -> Result<OneRoundProtocol> {
    let text = fs::read_to_string(path)
        .with_context(|| format!("reading protocol file {}", path.display()))?;
    let file: OneRoundProtocolFile =
        serde_json::from_str(&text).context("parsing protocol JSON")?;
    file.into_protocol()
}

/// JSON view of one protocol run.
#[derive(Serialize, Deserialize)]
pub struct OutcomeView {
    pub output: u32,
    pub correct: bool,
    pub bits_a_to_b: u32,
    pub bits_b_to_a: u32,
    pub total_bits: u32,
    pub rounds: u32,
    /// One `A>B: 0110` / `B>A: 1` line per message.
    pub transcript: Vec<String>,
}

impl OutcomeView {
    pub fn from_outcome(outcome: &ProtocolOutcome) -> Self {
        let transcript = outcome
            .transcript
            .messages()
            .iter()
            .map(|(d, bits)| {
                let tag = match d {
                    Direction::AliceToBob => "A>B",
                    Direction::BobToAlice => "B>A",
                };
                let body: String = bits.iter().map(|&b| if b { '1' } else { '0' }).collect();
                format!("{tag}: {body}")
            })
            .collect();
        OutcomeView {
            output: outcome.output.0,
            correct: outcome.correct,
            bits_a_to_b: outcome.transcript.bits_a_to_b(),
            bits_b_to_a: outcome.transcript.bits_b_to_a(),
            total_bits: outcome.transcript.total_bits(),
            rounds: outcome.transcript.rounds(),
            transcript,
        }
    }
}

/// Writes every conditional row `p(x | y)` as CSV lines `y,x,p`.
pub fn export_conditionals_csv<W: Write>(joint: &JointDistribution, mut out: W) -> Result<()> {
    writeln!(out, "y,x,p")?;
    for y in 0..joint.y_size() {
        let row = condition_on(joint, SymbolId(y))?;
        for &(x, p) in row.dist.entries() {
            writeln!(out, "{y},{x},{p}")?;
        }
    }
    Ok(())
}
