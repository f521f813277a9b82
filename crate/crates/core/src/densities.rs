//! Finite message densities and the conditional error-probability functional.
//!
//! Every density-evolution engine in this crate works on pairs of densities
//! conditioned on the codeword bit at the receiving variable node. Messages are
//! stored as integer indices; the quantization step only matters when channel
//! LLRs are mapped into the alphabet.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Tolerance on the total mass of a density.
pub const NORMALIZATION_TOL: f64 = 1e-10;

/// Message alphabet shared by a family of densities.
///
/// `Binary` holds the hard-decision messages `{0, 1}` of Gallager B, where `0`
/// votes for bit 0. `Quantized` holds the `2^q - 1` symmetric indices
/// `-(2^(q-1) - 1) ..= 2^(q-1) - 1`; index `k` has real value `k * step`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MessageAlphabet {
    Binary,
    Quantized { q: u32, step: f64 },
}

impl MessageAlphabet {
    pub fn quantized(q: u32, step: f64) -> Result<Self> {
        if !(2..=16).contains(&q) {
            return Err(Error::InvalidParameter(format!(
                "bit width q must be in 2..=16, got {q}"
            )));
        }
        if !(step.is_finite() && step > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "quantization step must be positive, got {step}"
            )));
        }
        Ok(MessageAlphabet::Quantized { q, step })
    }

    pub fn len(&self) -> usize {
        match *self {
            MessageAlphabet::Binary => 2,
            MessageAlphabet::Quantized { q, .. } => (1usize << q) - 1,
        }
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn is_binary(&self) -> bool {
        matches!(self, MessageAlphabet::Binary)
    }

    /// Largest message value.
    pub fn max_index(&self) -> i32 {
        match *self {
            MessageAlphabet::Binary => 1,
            MessageAlphabet::Quantized { q, .. } => (1i32 << (q - 1)) - 1,
        }
    }

    /// Smallest message value.
    pub fn min_index(&self) -> i32 {
        match *self {
            MessageAlphabet::Binary => 0,
            MessageAlphabet::Quantized { .. } => -self.max_index(),
        }
    }

    pub fn step(&self) -> f64 {
        match *self {
            MessageAlphabet::Binary => 1.0,
            MessageAlphabet::Quantized { step, .. } => step,
        }
    }

    pub fn bits(&self) -> u32 {
        match *self {
            MessageAlphabet::Binary => 1,
            MessageAlphabet::Quantized { q, .. } => q,
        }
    }

    pub fn value(&self, pos: usize) -> i32 {
        self.min_index() + pos as i32
    }

    pub fn position(&self, value: i32) -> Option<usize> {
        if value < self.min_index() || value > self.max_index() {
            None
        } else {
            Some((value - self.min_index()) as usize)
        }
    }

    pub fn real_value(&self, value: i32) -> f64 {
        value as f64 * self.step()
    }

    pub fn values(&self) -> impl Iterator<Item = i32> {
        self.min_index()..=self.max_index()
    }

    pub fn clamp(&self, value: i32) -> i32 {
        value.clamp(self.min_index(), self.max_index())
    }

    /// Image of `value` under the bit-flip symmetry (`k -> -k`, or `m -> 1 - m`).
    pub fn mirror(&self, value: i32) -> i32 {
        match self {
            MessageAlphabet::Binary => 1 - value,
            MessageAlphabet::Quantized { .. } => -value,
        }
    }

    /// Probability that a message with this value leads to a wrong decision
    /// when the codeword bit is 0 (zero-valued messages count one half).
    pub fn error_weight_given0(&self, value: i32) -> f64 {
        match self {
            MessageAlphabet::Binary => {
                if value == 1 {
                    1.0
                } else {
                    0.0
                }
            }
            MessageAlphabet::Quantized { .. } => match value.signum() {
                -1 => 1.0,
                0 => 0.5,
                _ => 0.0,
            },
        }
    }
}

/// Probability mass function over a [`MessageAlphabet`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawDensity")]
pub struct DiscreteDensity {
    alphabet: MessageAlphabet,
    mass: Vec<f64>,
}

#[derive(Deserialize)]
struct RawDensity {
    alphabet: MessageAlphabet,
    mass: Vec<f64>,
}

impl TryFrom<RawDensity> for DiscreteDensity {
    type Error = Error;

    fn try_from(raw: RawDensity) -> Result<Self> {
        DiscreteDensity::new(raw.alphabet, raw.mass)
    }
}

impl DiscreteDensity {
    pub fn new(alphabet: MessageAlphabet, mass: Vec<f64>) -> Result<Self> {
        let density = DiscreteDensity { alphabet, mass };
        density.validate()?;
        Ok(density)
    }

    /// Builds a density from nonnegative weights with a positive sum.
    pub fn from_weights(alphabet: MessageAlphabet, weights: Vec<f64>) -> Result<Self> {
        if weights.len() != alphabet.len() {
            return Err(Error::InvalidDensity(format!(
                "expected {} masses, got {}",
                alphabet.len(),
                weights.len()
            )));
        }
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::InvalidDensity("negative or non-finite weight".into()));
        }
        let total: f64 = weights.iter().sum();
        if total <= 0.0 {
            return Err(Error::InvalidDensity("weights sum to zero".into()));
        }
        Ok(DiscreteDensity {
            alphabet,
            mass: weights.into_iter().map(|w| w / total).collect(),
        })
    }

    pub fn delta(alphabet: MessageAlphabet, value: i32) -> Result<Self> {
        let pos = alphabet.position(value).ok_or_else(|| {
            Error::InvalidDensity(format!("value {value} outside the alphabet"))
        })?;
        let mut mass = vec![0.0; alphabet.len()];
        mass[pos] = 1.0;
        Ok(DiscreteDensity { alphabet, mass })
    }

    /// Uniform density over the listed values.
    pub fn uniform(alphabet: MessageAlphabet, values: &[i32]) -> Result<Self> {
        let mut weights = vec![0.0; alphabet.len()];
        for &v in values {
            let pos = alphabet.position(v).ok_or_else(|| {
                Error::InvalidDensity(format!("value {v} outside the alphabet"))
            })?;
            weights[pos] += 1.0;
        }
        Self::from_weights(alphabet, weights)
    }

    /// Unchecked constructor for engine internals; callers renormalize.
    pub(crate) fn from_raw(alphabet: MessageAlphabet, mass: Vec<f64>) -> Self {
        debug_assert_eq!(alphabet.len(), mass.len());
        DiscreteDensity { alphabet, mass }
    }

    pub fn validate(&self) -> Result<()> {
        if self.mass.len() != self.alphabet.len() {
            return Err(Error::InvalidDensity(format!(
                "expected {} masses, got {}",
                self.alphabet.len(),
                self.mass.len()
            )));
        }
        if let Some(m) = self.mass.iter().find(|m| !m.is_finite() || **m < 0.0) {
            return Err(Error::InvalidDensity(format!("mass {m} is not a probability")));
        }
        let total = self.total();
        if (total - 1.0).abs() > NORMALIZATION_TOL {
            return Err(Error::InvalidDensity(format!("total mass {total} != 1")));
        }
        Ok(())
    }

    pub fn alphabet(&self) -> MessageAlphabet {
        self.alphabet
    }

    pub fn mass(&self) -> &[f64] {
        &self.mass
    }

    pub fn at(&self, value: i32) -> f64 {
        self.alphabet
            .position(value)
            .map(|pos| self.mass[pos])
            .unwrap_or(0.0)
    }

    pub fn total(&self) -> f64 {
        self.mass.iter().sum()
    }

    pub fn mirror(&self) -> Self {
        let mut mass = self.mass.clone();
        mass.reverse();
        DiscreteDensity {
            alphabet: self.alphabet,
            mass,
        }
    }

    /// Rescales to unit mass and returns the deviation of the old total from 1.
    pub(crate) fn renormalize(&mut self) -> f64 {
        let total = self.total();
        if total > 0.0 {
            for m in &mut self.mass {
                *m /= total;
            }
        }
        (total - 1.0).abs()
    }

    /// Mass that leads to a wrong decision if the codeword bit is 0.
    pub fn error_mass_given0(&self) -> f64 {
        self.alphabet
            .values()
            .zip(&self.mass)
            .map(|(v, m)| self.alphabet.error_weight_given0(v) * m)
            .sum()
    }

    /// Mass that leads to a wrong decision if the codeword bit is 1.
    pub fn error_mass_given1(&self) -> f64 {
        self.alphabet
            .values()
            .zip(&self.mass)
            .map(|(v, m)| self.alphabet.error_weight_given0(self.alphabet.mirror(v)) * m)
            .sum()
    }

    pub fn max_abs_diff(&self, other: &DiscreteDensity) -> f64 {
        self.mass
            .iter()
            .zip(&other.mass)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

/// Message densities conditioned on codeword bit `x = 0` and `x = 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionalDensityPair {
    pub given0: DiscreteDensity,
    pub given1: DiscreteDensity,
}

impl ConditionalDensityPair {
    pub fn new(given0: DiscreteDensity, given1: DiscreteDensity) -> Result<Self> {
        if given0.alphabet != given1.alphabet {
            return Err(Error::AlphabetMismatch(
                "conditional densities use different alphabets".into(),
            ));
        }
        Ok(ConditionalDensityPair { given0, given1 })
    }

    /// Pair `(d, mirror(d))` as produced under the all-zero-codeword reduction.
    pub fn symmetric_from(given0: DiscreteDensity) -> Self {
        let given1 = given0.mirror();
        ConditionalDensityPair { given0, given1 }
    }

    pub fn alphabet(&self) -> MessageAlphabet {
        self.given0.alphabet
    }

    /// Largest deviation from `given1(m) = given0(mirror(m))`.
    pub fn mirror_defect(&self) -> f64 {
        self.given1.max_abs_diff(&self.given0.mirror())
    }

    pub fn is_mirror_symmetric(&self, tol: f64) -> bool {
        self.mirror_defect() <= tol
    }

    pub fn max_abs_diff(&self, other: &ConditionalDensityPair) -> f64 {
        self.given0
            .max_abs_diff(&other.given0)
            .max(self.given1.max_abs_diff(&other.given1))
    }

    pub(crate) fn renormalize(&mut self) -> f64 {
        self.given0.renormalize().max(self.given1.renormalize())
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let alphabet = self.alphabet();
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["index", "value", "mass_given0", "mass_given1"])?;
        for (pos, v) in alphabet.values().enumerate() {
            w.write_record(&[
                v.to_string(),
                alphabet.real_value(v).to_string(),
                self.given0.mass[pos].to_string(),
                self.given1.mass[pos].to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Message error probability of a conditional pair with equiprobable codeword
/// bits: `sum_{m<0} P(m) + P(0) / 2` where `P(m) = (given0(m) + given1(-m)) / 2`.
///
/// For the binary alphabet this is `(given0(1) + given1(0)) / 2`.
pub fn error_probability(pair: &ConditionalDensityPair) -> Result<f64> {
    pair.given0.validate()?;
    pair.given1.validate()?;
    Ok(error_probability_unchecked(pair))
}

pub(crate) fn error_probability_unchecked(pair: &ConditionalDensityPair) -> f64 {
    let pe = 0.5 * pair.given0.error_mass_given0() + 0.5 * pair.given1.error_mass_given1();
    pe.clamp(0.0, 1.0)
}

/// Density of `clamp(u + v)` for independent `u ~ a`, `v ~ b`.
pub fn saturating_convolve(a: &DiscreteDensity, b: &DiscreteDensity) -> Result<DiscreteDensity> {
    if a.alphabet != b.alphabet {
        return Err(Error::AlphabetMismatch(
            "saturating convolution of different alphabets".into(),
        ));
    }
    if a.alphabet.is_binary() {
        return Err(Error::AlphabetMismatch(
            "saturating convolution needs a quantized alphabet".into(),
        ));
    }
    Ok(saturating_convolve_raw(a, b))
}

pub(crate) fn saturating_convolve_raw(a: &DiscreteDensity, b: &DiscreteDensity) -> DiscreteDensity {
    let n = a.mass.len();
    let mut full = vec![0.0; 2 * n - 1];
    for (i, &ma) in a.mass.iter().enumerate() {
        if ma == 0.0 {
            continue;
        }
        for (j, &mb) in b.mass.iter().enumerate() {
            full[i + j] += ma * mb;
        }
    }
    // full[i + j] holds value (i + j) - 2 * max; fold both tails onto the extremes.
    let max = (n - 1) / 2;
    let mut mass = vec![0.0; n];
    for (s, &m) in full.iter().enumerate() {
        let pos = s.saturating_sub(max).min(n - 1);
        mass[pos] += m;
    }
    DiscreteDensity::from_raw(a.alphabet, mass)
}

/// Convex combination of conditional pairs.
pub fn mix(weights: &[(f64, &ConditionalDensityPair)]) -> Result<ConditionalDensityPair> {
    let (_, first) = weights
        .first()
        .ok_or_else(|| Error::InvalidParameter("empty mixture".into()))?;
    let alphabet = first.alphabet();
    let total: f64 = weights.iter().map(|(w, _)| *w).sum();
    if weights.iter().any(|(w, _)| !w.is_finite() || *w < 0.0) {
        return Err(Error::InvalidParameter("negative mixture weight".into()));
    }
    if (total - 1.0).abs() > NORMALIZATION_TOL {
        return Err(Error::InvalidParameter(format!(
            "mixture weights sum to {total}"
        )));
    }
    let n = alphabet.len();
    let mut m0 = vec![0.0; n];
    let mut m1 = vec![0.0; n];
    for (w, pair) in weights {
        if pair.alphabet() != alphabet {
            return Err(Error::AlphabetMismatch("mixture of different alphabets".into()));
        }
        for i in 0..n {
            m0[i] += w * pair.given0.mass[i];
            m1[i] += w * pair.given1.mass[i];
        }
    }
    Ok(ConditionalDensityPair {
        given0: DiscreteDensity::from_raw(alphabet, m0),
        given1: DiscreteDensity::from_raw(alphabet, m1),
    })
}
