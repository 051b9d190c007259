//! The protocol model: a prover and a randomized verifier alternate for a
//! fixed number of rounds. In round `i` the prover sends a message of
//! `msg_bits[i]` bits, then the verifier draws `rand_bits[i]` fresh uniform
//! bits and replies with a message computed by a deterministic rule from the
//! input, the prover messages so far, and all randomness so far. After the
//! last round the verifier pays a reward in `[0, 1]`; a separate value rule
//! names what a transcript claims (for decision protocols, the accept bit).
//!
//! The prover never sees the randomness itself, only the verifier's replies,
//! so its information sets are observable transcripts.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::dyadic::Dyadic;
use crate::error::{Error, Result};

/// A bit string of at most 63 bits, stored as `(width, value)`. Rendering is
/// most-significant bit first; `concat` puts the left operand in the high
/// bits, matching reading order.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct BitString {
    width: u8,
    value: u64,
}

impl BitString {
    pub fn new(value: u64, width: u8) -> Self {
        assert!(width <= 63, "bit string too wide");
        assert!(
            width == 63 || value < (1u64 << width),
            "value {value} does not fit in {width} bits"
        );
        BitString { width, value }
    }

    pub fn empty() -> Self {
        BitString::default()
    }

    pub fn width(self) -> u8 {
        self.width
    }

    pub fn value(self) -> u64 {
        self.value
    }

    /// Single bit as a one-character string, for value rules.
    pub fn bit_str(bit: u64) -> String {
        if bit & 1 == 1 { "1".into() } else { "0".into() }
    }

    /// All strings of the given width in numeric order.
    pub fn all(width: u8) -> impl Iterator<Item = BitString> {
        assert!(width <= 63);
        (0..(1u64 << width)).map(move |v| BitString { width, value: v })
    }

    pub fn concat(self, rhs: BitString) -> BitString {
        let width = self.width + rhs.width;
        assert!(width <= 63, "concatenation too wide");
        BitString {
            width,
            value: (self.value << rhs.width) | rhs.value,
        }
    }

    /// The `w` high (leftmost) bits.
    pub fn high(self, w: u8) -> BitString {
        assert!(w <= self.width);
        BitString {
            width: w,
            value: self.value >> (self.width - w),
        }
    }

    /// The `w` low (rightmost) bits.
    pub fn low(self, w: u8) -> BitString {
        assert!(w <= self.width);
        BitString {
            width: w,
            value: self.value & ((1u64 << w) - 1),
        }
    }

    /// Number of one bits.
    pub fn ones(self) -> u32 {
        self.value.count_ones()
    }
}

impl fmt::Display for BitString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for i in (0..self.width).rev() {
            f.write_str(if (self.value >> i) & 1 == 1 { "1" } else { "0" })?;
        }
        Ok(())
    }
}

impl fmt::Debug for BitString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "\"{self}\"")
    }
}

impl FromStr for BitString {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s.len() > 63 {
            return Err(Error::WidthOverflow { bits: s.len() as u32 });
        }
        let mut value = 0u64;
        for c in s.chars() {
            value = (value << 1)
                | match c {
                    '0' => 0,
                    '1' => 1,
                    _ => return Err(Error::MalformedTranscript(format!("bad bit string {s:?}"))),
                };
        }
        Ok(BitString {
            width: s.len() as u8,
            value,
        })
    }
}

impl Serialize for BitString {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for BitString {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let text = String::deserialize(d)?;
        text.parse().map_err(serde::de::Error::custom)
    }
}

/// An observable transcript: the input, the prover messages sent so far and
/// the verifier replies so far. Well formed when the prover has sent either
/// as many messages as the verifier (a complete round boundary) or exactly
/// one more (awaiting the verifier's reply).
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Debug, Serialize, Deserialize)]
pub struct Transcript {
    pub input: String,
    pub prover: Vec<BitString>,
    pub verifier: Vec<BitString>,
}

impl Transcript {
    pub fn root(input: impl Into<String>) -> Self {
        Transcript {
            input: input.into(),
            prover: Vec::new(),
            verifier: Vec::new(),
        }
    }

    /// Number of complete rounds (prover message plus verifier reply).
    pub fn rounds_complete(&self) -> usize {
        self.verifier.len()
    }

    /// True when the prover moves next (no reply is pending).
    pub fn at_round_boundary(&self) -> bool {
        self.prover.len() == self.verifier.len()
    }

    /// Serializes the transcript for use as a derived protocol's input.
    pub fn to_input_string(&self) -> String {
        serde_json::to_string(self).expect("transcript serialization cannot fail")
    }

    pub fn from_input_string(s: &str) -> Result<Self> {
        serde_json::from_str(s)
            .map_err(|e| Error::MalformedTranscript(format!("bad transcript input: {e}")))
    }

    /// Checks lengths and widths against a protocol shape.
    pub fn validate_shape(&self, spec: &ProtocolSpec) -> Result<()> {
        let p = self.prover.len();
        let v = self.verifier.len();
        if p != v && p != v + 1 {
            return Err(Error::MalformedTranscript(format!(
                "{p} prover message(s) cannot pair with {v} reply(ies)"
            )));
        }
        if p > spec.rounds() {
            return Err(Error::MalformedTranscript(format!(
                "{p} prover messages in a {}-round protocol",
                spec.rounds()
            )));
        }
        for (i, m) in self.prover.iter().enumerate() {
            if m.width() != spec.msg_bits()[i] {
                return Err(Error::MalformedTranscript(format!(
                    "round {} message has width {}, expected {}",
                    i + 1,
                    m.width(),
                    spec.msg_bits()[i]
                )));
            }
        }
        Ok(())
    }
}

pub type VerifierRule = Arc<dyn Fn(&str, &[BitString], &[BitString]) -> BitString + Send + Sync>;
pub type RewardRule = Arc<dyn Fn(&str, &[BitString], &[BitString]) -> Dyadic + Send + Sync>;
pub type ValueRule = Arc<dyn Fn(&str, &[BitString], &[BitString]) -> String + Send + Sync>;
pub type DeltaRule = Arc<dyn Fn(&str) -> Dyadic + Send + Sync>;
pub type InputCheck = Arc<dyn Fn(&str) -> Result<()> + Send + Sync>;

/// A complete protocol description. The behavioral fields are closures over
/// the instance they were built from; the `input` string they receive is an
/// opaque identifier passed through by the solver (derived protocols use it
/// to carry a serialized transcript prefix).
#[derive(Clone)]
pub struct ProtocolSpec {
    name: String,
    msg_bits: Vec<u8>,
    rand_bits: Vec<u8>,
    verifier: VerifierRule,
    reward: RewardRule,
    value: ValueRule,
    declared_delta: Option<DeltaRule>,
    reward_resolution_bits: Option<u32>,
    nesting_depth: u32,
    input_check: Option<InputCheck>,
}

impl ProtocolSpec {
    /// Builds a protocol and validates its shape. `msg_bits` and `rand_bits`
    /// must have one entry per round; at least one round is required.
    pub fn new(
        name: impl Into<String>,
        msg_bits: Vec<u8>,
        rand_bits: Vec<u8>,
        verifier: VerifierRule,
        reward: RewardRule,
        value: ValueRule,
    ) -> Result<Self> {
        if msg_bits.is_empty() {
            return Err(Error::MalformedSpec("a protocol needs at least one round".into()));
        }
        if msg_bits.len() != rand_bits.len() {
            return Err(Error::MalformedSpec(format!(
                "{} message widths but {} randomness widths",
                msg_bits.len(),
                rand_bits.len()
            )));
        }
        for &w in msg_bits.iter().chain(rand_bits.iter()) {
            if w > 63 {
                return Err(Error::WidthOverflow { bits: w as u32 });
            }
        }
        Ok(ProtocolSpec {
            name: name.into(),
            msg_bits,
            rand_bits,
            verifier,
            reward,
            value,
            declared_delta: None,
            reward_resolution_bits: None,
            nesting_depth: 0,
            input_check: None,
        })
    }

    pub fn with_declared_delta(mut self, delta: DeltaRule) -> Self {
        self.declared_delta = Some(delta);
        self
    }

    pub fn with_resolution_bits(mut self, bits: u32) -> Self {
        self.reward_resolution_bits = Some(bits);
        self
    }

    pub fn with_nesting_depth(mut self, depth: u32) -> Self {
        self.nesting_depth = depth;
        self
    }

    pub fn with_input_check(mut self, check: InputCheck) -> Self {
        self.input_check = Some(check);
        self
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn rounds(&self) -> usize {
        self.msg_bits.len()
    }

    pub fn msg_bits(&self) -> &[u8] {
        &self.msg_bits
    }

    pub fn rand_bits(&self) -> &[u8] {
        &self.rand_bits
    }

    /// Every reward is a multiple of `2^-reward_resolution_bits`, when the
    /// builder declared a grid. The solver enforces the declaration; the
    /// reward-collapsing and expectation-eliciting transforms require one.
    pub fn reward_resolution_bits(&self) -> Option<u32> {
        self.reward_resolution_bits
    }

    /// How many expectation-eliciting wrappers sit around a base protocol.
    pub fn nesting_depth(&self) -> u32 {
        self.nesting_depth
    }

    pub fn total_rand_bits(&self) -> u32 {
        self.rand_bits.iter().map(|&b| b as u32).sum()
    }

    /// Every exact node value lies on the `2^-value_resolution_bits()` grid:
    /// rewards live on the reward grid and every expectation divides by a
    /// power of two no larger than the full randomness space. Only available
    /// when a reward grid was declared.
    pub fn value_resolution_bits(&self) -> Option<u32> {
        self.reward_resolution_bits.map(|p| p + self.total_rand_bits())
    }

    /// The verifier's reply after prover messages `ms` using randomness `rs`
    /// (one draw per completed round, `ms.len() == rs.len()`).
    pub fn verifier_msg(&self, input: &str, ms: &[BitString], rs: &[BitString]) -> BitString {
        debug_assert_eq!(ms.len(), rs.len());
        (self.verifier)(input, ms, rs)
    }

    /// The final reward for a full play (`rounds` messages and draws).
    pub fn reward(&self, input: &str, ms: &[BitString], rs: &[BitString]) -> Dyadic {
        debug_assert_eq!(ms.len(), self.rounds());
        debug_assert_eq!(rs.len(), self.rounds());
        (self.reward)(input, ms, rs)
    }

    /// The claim a full transcript makes; takes all prover messages and the
    /// verifier replies before the final one (the last reply never matters).
    pub fn value(&self, input: &str, ms: &[BitString], verifier_msgs: &[BitString]) -> String {
        debug_assert_eq!(ms.len(), self.rounds());
        debug_assert_eq!(verifier_msgs.len(), self.rounds() - 1);
        (self.value)(input, ms, verifier_msgs)
    }

    /// The constructor-declared lower bound on the suboptimality gap, when
    /// one was declared. Derived wrappers leave this empty and the exact gap
    /// is measured instead.
    pub fn declared_delta(&self, input: &str) -> Option<Dyadic> {
        self.declared_delta.as_ref().map(|d| d(input))
    }

    pub fn has_declared_delta(&self) -> bool {
        self.declared_delta.is_some()
    }

    /// Validates an input string before any enumeration runs. Base protocols
    /// accept anything; derived protocols check their transcript prefixes.
    pub fn check_input(&self, input: &str) -> Result<()> {
        match &self.input_check {
            Some(check) => check(input),
            None => Ok(()),
        }
    }

    /// Total enumeration size: the product of all message and randomness
    /// space sizes, saturating at `u128::MAX`.
    pub fn enumeration_size(&self) -> u128 {
        let mut bits: u32 = 0;
        for &w in self.msg_bits.iter().chain(self.rand_bits.iter()) {
            bits = bits.saturating_add(w as u32);
        }
        if bits >= 128 {
            u128::MAX
        } else {
            1u128 << bits
        }
    }
}

impl fmt::Debug for ProtocolSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ProtocolSpec")
            .field("name", &self.name)
            .field("msg_bits", &self.msg_bits)
            .field("rand_bits", &self.rand_bits)
            .field("reward_resolution_bits", &self.reward_resolution_bits)
            .field("nesting_depth", &self.nesting_depth)
            .field("declared_delta", &self.declared_delta.is_some())
            .finish()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bit_strings_render_msb_first() {
        let b = BitString::new(0b101, 3);
        assert_eq!(b.to_string(), "101");
        assert_eq!("101".parse::<BitString>().unwrap(), b);
        assert_eq!(BitString::empty().to_string(), "");
        assert_eq!("".parse::<BitString>().unwrap(), BitString::empty());
        assert!("102".parse::<BitString>().is_err());
    }

    #[test]
    fn concat_keeps_reading_order() {
        let a = BitString::new(0b10, 2);
        let b = BitString::new(0b01, 2);
        let c = a.concat(b);
        assert_eq!(c.to_string(), "1001");
        assert_eq!(c.high(2), a);
        assert_eq!(c.low(2), b);
    }

    #[test]
    fn enumeration_is_ordered_and_complete() {
        let all: Vec<String> = BitString::all(2).map(|b| b.to_string()).collect();
        assert_eq!(all, ["00", "01", "10", "11"]);
    }

    #[test]
    fn transcripts_round_trip_as_inputs() {
        let t = Transcript {
            input: "circuit #7\nwith newline".into(),
            prover: vec![BitString::new(1, 1), BitString::new(0b11, 2)],
            verifier: vec![BitString::new(0, 1)],
        };
        let s = t.to_input_string();
        assert_eq!(Transcript::from_input_string(&s).unwrap(), t);
    }

    #[test]
    fn spec_shape_is_validated() {
        let v: VerifierRule = Arc::new(|_, _, _| BitString::empty());
        let r: RewardRule = Arc::new(|_, _, _| Dyadic::zero());
        let val: ValueRule = Arc::new(|_, _, _| "0".into());
        assert!(ProtocolSpec::new("empty", vec![], vec![], v.clone(), r.clone(), val.clone()).is_err());
        assert!(ProtocolSpec::new("ragged", vec![1], vec![1, 2], v.clone(), r.clone(), val.clone()).is_err());
        let spec = ProtocolSpec::new("ok", vec![1, 2], vec![3, 0], v, r, val).unwrap();
        assert_eq!(spec.rounds(), 2);
        assert_eq!(spec.total_rand_bits(), 3);
        assert_eq!(spec.enumeration_size(), 1 << 6);
    }
}
