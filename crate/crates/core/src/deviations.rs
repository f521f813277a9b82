//! Hardware deviation models: independent bit flips on stored message words,
//! their exact transition matrices, hard-bit flips for Gallager B and additive
//! deviations for belief propagation.

use std::io::Write;

use rand::Rng;
use rand_distr::{ChiSquared, Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::densities::{ConditionalDensityPair, DiscreteDensity, MessageAlphabet};
use crate::{Error, Result};

/// Independent per-bit flips: a stored 0 reads as 1 with probability `eps01`
/// and a stored 1 reads as 0 with probability `eps10`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BitFlipModel {
    pub eps01: f64,
    pub eps10: f64,
}

impl BitFlipModel {
    pub fn new(eps01: f64, eps10: f64) -> Result<Self> {
        for (name, e) in [("eps01", eps01), ("eps10", eps10)] {
            if !(0.0..1.0).contains(&e) {
                return Err(Error::InvalidParameter(format!(
                    "{name} must lie in [0, 1), got {e}"
                )));
            }
        }
        Ok(BitFlipModel { eps01, eps10 })
    }

    pub fn none() -> Self {
        BitFlipModel {
            eps01: 0.0,
            eps10: 0.0,
        }
    }

    pub fn is_noiseless(&self) -> bool {
        self.eps01 == 0.0 && self.eps10 == 0.0
    }

    pub fn is_symmetric(&self) -> bool {
        self.eps01 == self.eps10
    }

    /// Probability that a stored `bit` reads back as `out`.
    pub fn bit_transition(&self, bit: u32, out: u32) -> f64 {
        match (bit, out) {
            (0, 0) => 1.0 - self.eps01,
            (0, _) => self.eps01,
            (_, 0) => self.eps10,
            _ => 1.0 - self.eps10,
        }
    }

    pub fn flip_bit<R: Rng + ?Sized>(&self, bit: u8, rng: &mut R) -> u8 {
        let e = if bit == 0 { self.eps01 } else { self.eps10 };
        if e > 0.0 && rng.random::<f64>() < e {
            bit ^ 1
        } else {
            bit
        }
    }

    /// One noisy read of the sign-magnitude word holding `value`.
    pub fn sample_value<R: Rng + ?Sized>(&self, value: i32, q: u32, rng: &mut R) -> i32 {
        self.sample_value_with(value, q, ZeroSign::Positive, rng)
    }

    pub fn sample_value_with<R: Rng + ?Sized>(
        &self,
        value: i32,
        q: u32,
        zero_sign: ZeroSign,
        rng: &mut R,
    ) -> i32 {
        if self.is_noiseless() {
            return value;
        }
        let mut word = sign_magnitude_encode(value, q);
        if value == 0 && zero_sign == ZeroSign::Balanced && rng.random::<bool>() {
            word |= 1 << (q - 1);
        }
        for b in 0..q {
            let bit = ((word >> b) & 1) as u8;
            if self.flip_bit(bit, rng) != bit {
                word ^= 1 << b;
            }
        }
        sign_magnitude_decode(word, q)
    }
}

/// Sign bit stored for a zero-valued message.
///
/// `Positive` always stores sign bit 0. `Balanced` stores a fair coin, which
/// makes equal flip rates act symmetrically on positive and negative values.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ZeroSign {
    #[default]
    Positive,
    Balanced,
}

/// Sign bit (set for negative values) above `q - 1` magnitude bits.
pub fn sign_magnitude_encode(value: i32, q: u32) -> u32 {
    let mag = value.unsigned_abs();
    debug_assert!(mag < 1 << (q - 1));
    if value < 0 {
        (1 << (q - 1)) | mag
    } else {
        mag
    }
}

/// Inverse of [`sign_magnitude_encode`]; the negative-zero pattern reads as 0.
pub fn sign_magnitude_decode(word: u32, q: u32) -> i32 {
    let mag = (word & ((1 << (q - 1)) - 1)) as i32;
    if word >> (q - 1) & 1 == 1 {
        -mag
    } else {
        mag
    }
}

/// Row-stochastic matrix `entry(i, k) = Pr(noisy = k | clean = i)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransitionMatrix {
    alphabet: MessageAlphabet,
    rows: Vec<Vec<f64>>,
}

impl TransitionMatrix {
    pub fn identity(alphabet: MessageAlphabet) -> Self {
        let n = alphabet.len();
        let rows = (0..n)
            .map(|i| {
                let mut r = vec![0.0; n];
                r[i] = 1.0;
                r
            })
            .collect();
        TransitionMatrix { alphabet, rows }
    }

    /// Exact matrix of independent bit flips on sign-magnitude words.
    pub fn sign_magnitude(alphabet: MessageAlphabet, model: BitFlipModel) -> Result<Self> {
        Self::sign_magnitude_with(alphabet, model, ZeroSign::Positive)
    }

    pub fn sign_magnitude_with(
        alphabet: MessageAlphabet,
        model: BitFlipModel,
        zero_sign: ZeroSign,
    ) -> Result<Self> {
        let q = match alphabet {
            MessageAlphabet::Quantized { q, .. } => q,
            MessageAlphabet::Binary => {
                return Err(Error::AlphabetMismatch(
                    "sign-magnitude words need a quantized alphabet".into(),
                ))
            }
        };
        let n = alphabet.len();
        let mut rows = vec![vec![0.0; n]; n];
        for (pos, row) in rows.iter_mut().enumerate() {
            let value = alphabet.value(pos);
            let clean = sign_magnitude_encode(value, q);
            let words: &[(u32, f64)] = if value == 0 && zero_sign == ZeroSign::Balanced {
                &[(clean, 0.5), (clean | 1 << (q - 1), 0.5)]
            } else {
                &[(clean, 1.0)]
            };
            for &(word, weight) in words {
                for noisy in 0u32..(1 << q) {
                    let p: f64 = (0..q)
                        .map(|b| model.bit_transition(word >> b & 1, noisy >> b & 1))
                        .product();
                    let k = sign_magnitude_decode(noisy, q);
                    row[alphabet.position(k).expect("decoded value in range")] += weight * p;
                }
            }
        }
        Ok(TransitionMatrix { alphabet, rows })
    }

    pub fn alphabet(&self) -> MessageAlphabet {
        self.alphabet
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    pub fn entry(&self, clean: i32, noisy: i32) -> f64 {
        match (self.alphabet.position(clean), self.alphabet.position(noisy)) {
            (Some(i), Some(k)) => self.rows[i][k],
            _ => 0.0,
        }
    }

    pub fn is_identity(&self) -> bool {
        self.rows
            .iter()
            .enumerate()
            .all(|(i, r)| r.iter().enumerate().all(|(k, &v)| v == if i == k { 1.0 } else { 0.0 }))
    }

    /// Density of the noisy message when the clean message has density `density`.
    pub fn apply(&self, density: &DiscreteDensity) -> Result<DiscreteDensity> {
        if density.alphabet() != self.alphabet {
            return Err(Error::AlphabetMismatch(
                "transition matrix and density use different alphabets".into(),
            ));
        }
        let mut out = self.apply_raw(density);
        out.renormalize();
        Ok(out)
    }

    pub(crate) fn apply_raw(&self, density: &DiscreteDensity) -> DiscreteDensity {
        let n = self.alphabet.len();
        let mut mass = vec![0.0; n];
        for (row, &p) in self.rows.iter().zip(density.mass()) {
            if p == 0.0 {
                continue;
            }
            for (m, &t) in mass.iter_mut().zip(row) {
                *m += p * t;
            }
        }
        DiscreteDensity::from_raw(self.alphabet, mass)
    }

    pub fn apply_pair(&self, pair: &ConditionalDensityPair) -> Result<ConditionalDensityPair> {
        ConditionalDensityPair::new(self.apply(&pair.given0)?, self.apply(&pair.given1)?)
    }

    /// Cumulative rows for drawing noisy values with one uniform number each.
    pub fn sampler(&self) -> TransitionSampler {
        let cdf = self
            .rows
            .iter()
            .map(|r| {
                let mut acc = 0.0;
                r.iter()
                    .map(|v| {
                        acc += v;
                        acc
                    })
                    .collect()
            })
            .collect();
        TransitionSampler {
            alphabet: self.alphabet,
            cdf,
        }
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header = vec!["clean".to_string()];
        header.extend(self.alphabet.values().map(|v| v.to_string()));
        w.write_record(&header)?;
        for (pos, row) in self.rows.iter().enumerate() {
            let mut rec = vec![self.alphabet.value(pos).to_string()];
            rec.extend(row.iter().map(|v| v.to_string()));
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// `P~ = Pi . P` for a single density.
pub fn apply_pi(pi: &TransitionMatrix, density: &DiscreteDensity) -> Result<DiscreteDensity> {
    pi.apply(density)
}

/// Inverse-CDF lookup tables of a transition matrix.
#[derive(Debug, Clone)]
pub struct TransitionSampler {
    alphabet: MessageAlphabet,
    cdf: Vec<Vec<f64>>,
}

impl TransitionSampler {
    /// Noisy value for clean `value` given a uniform draw `u` in `[0, 1)`.
    pub fn sample_with(&self, value: i32, u: f64) -> i32 {
        let row = &self.cdf[self.alphabet.position(value).expect("value in alphabet")];
        let k = row.partition_point(|&c| c <= u).min(row.len() - 1);
        self.alphabet.value(k)
    }

    pub fn sample<R: Rng + ?Sized>(&self, value: i32, rng: &mut R) -> i32 {
        self.sample_with(value, rng.random())
    }
}

/// Hard-message deviations: `Q~_x(0) = eps10 Q_x(1) + (1 - eps01) Q_x(0)`.
pub fn gallager_b_noise(pair: &ConditionalDensityPair, model: BitFlipModel) -> Result<ConditionalDensityPair> {
    if !pair.alphabet().is_binary() {
        return Err(Error::AlphabetMismatch(
            "hard-message deviations need the binary alphabet".into(),
        ));
    }
    let noisy = |d: &DiscreteDensity| {
        let zero = model.eps10 * d.at(1) + (1.0 - model.eps01) * d.at(0);
        DiscreteDensity::from_raw(MessageAlphabet::Binary, vec![zero, 1.0 - zero])
    };
    Ok(ConditionalDensityPair {
        given0: noisy(&pair.given0),
        given1: noisy(&pair.given1),
    })
}

/// Law of an additive deviation on real-valued messages.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum AdditiveDeviation {
    /// Normal with the given mean and variance; zero variance gives a constant.
    Gaussian { mean: f64, var: f64 },
    /// `shift + scale * X` with `X` chi-square on `dof` degrees of freedom.
    ChiSquare { dof: f64, scale: f64, shift: f64 },
}

impl AdditiveDeviation {
    pub fn none() -> Self {
        AdditiveDeviation::Gaussian { mean: 0.0, var: 0.0 }
    }

    pub fn constant(c: f64) -> Self {
        AdditiveDeviation::Gaussian { mean: c, var: 0.0 }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            AdditiveDeviation::Gaussian { mean, var } => mean.is_finite() && var.is_finite() && var >= 0.0,
            AdditiveDeviation::ChiSquare { dof, scale, shift } => {
                dof.is_finite() && dof > 0.0 && scale.is_finite() && shift.is_finite()
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!("invalid additive deviation {self:?}")))
        }
    }

    pub fn mean(&self) -> f64 {
        match *self {
            AdditiveDeviation::Gaussian { mean, .. } => mean,
            AdditiveDeviation::ChiSquare { dof, scale, shift } => shift + scale * dof,
        }
    }

    pub fn variance(&self) -> f64 {
        match *self {
            AdditiveDeviation::Gaussian { var, .. } => var,
            AdditiveDeviation::ChiSquare { dof, scale, .. } => 2.0 * dof * scale * scale,
        }
    }

    /// Whether the law is symmetric about zero.
    pub fn is_symmetric(&self) -> bool {
        matches!(*self, AdditiveDeviation::Gaussian { mean, .. } if mean == 0.0)
    }

    pub fn sampler(&self) -> Result<AdditiveSampler> {
        self.validate()?;
        Ok(match *self {
            AdditiveDeviation::Gaussian { mean, var } if var == 0.0 => AdditiveSampler::Constant(mean),
            AdditiveDeviation::Gaussian { mean, var } => {
                AdditiveSampler::Normal(Normal::new(mean, var.sqrt()).expect("validated"))
            }
            AdditiveDeviation::ChiSquare { dof, scale, shift } => AdditiveSampler::ChiSquare {
                dist: ChiSquared::new(dof).expect("validated"),
                scale,
                shift,
            },
        })
    }
}

/// Prepared sampler for an [`AdditiveDeviation`].
#[derive(Debug, Clone, Copy)]
pub enum AdditiveSampler {
    Constant(f64),
    Normal(Normal<f64>),
    ChiSquare { dist: ChiSquared<f64>, scale: f64, shift: f64 },
}

impl AdditiveSampler {
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            AdditiveSampler::Constant(c) => *c,
            AdditiveSampler::Normal(n) => n.sample(rng),
            AdditiveSampler::ChiSquare { dist, scale, shift } => shift + scale * dist.sample(rng),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stream::stream_rng;
    use proptest::prelude::*;

    fn alph(q: u32) -> MessageAlphabet {
        MessageAlphabet::quantized(q, 1.0).unwrap()
    }

    #[test]
    fn encoding_round_trip() {
        for q in 2..=7 {
            let a = alph(q);
            for v in a.values() {
                assert_eq!(sign_magnitude_decode(sign_magnitude_encode(v, q), q), v);
            }
            assert_eq!(sign_magnitude_decode(1 << (q - 1), q), 0);
        }
    }

    #[test]
    fn noiseless_pi_is_identity() {
        for q in 2..=6 {
            let pi = TransitionMatrix::sign_magnitude(alph(q), BitFlipModel::none()).unwrap();
            assert!(pi.is_identity());
        }
    }

    #[test]
    fn q2_row_for_zero() {
        let e = 0.07;
        let pi = TransitionMatrix::sign_magnitude(alph(2), BitFlipModel::new(e, 0.0).unwrap()).unwrap();
        assert!((pi.entry(0, 0) - ((1.0 - e) * (1.0 - e) + e * (1.0 - e))).abs() < 1e-15);
        assert!((pi.entry(0, 1) - (1.0 - e) * e).abs() < 1e-15);
        assert!((pi.entry(0, -1) - e * e).abs() < 1e-15);
    }

    #[test]
    fn fixed_zero_sign_breaks_symmetry_of_the_zero_row() {
        let a = alph(3);
        let e = 0.1;
        let pi = TransitionMatrix::sign_magnitude(a, BitFlipModel::new(e, e).unwrap()).unwrap();
        // magnitude 1 from clean 0: one magnitude bit up, the other kept
        let m = e * (1.0 - e);
        assert!((pi.entry(0, 1) - (1.0 - e) * m).abs() < 1e-15);
        assert!((pi.entry(0, -1) - e * m).abs() < 1e-15);
    }

    #[test]
    fn balanced_zero_matches_sampling() {
        let a = alph(3);
        let model = BitFlipModel::new(0.2, 0.05).unwrap();
        let pi = TransitionMatrix::sign_magnitude_with(a, model, ZeroSign::Balanced).unwrap();
        let mut rng = stream_rng(2, &[]);
        let n = 500_000;
        let mut hist = vec![0usize; a.len()];
        for _ in 0..n {
            hist[a.position(model.sample_value_with(0, 3, ZeroSign::Balanced, &mut rng)).unwrap()] += 1;
        }
        for k in a.values() {
            let p = pi.entry(0, k);
            let sd = (n as f64 * p * (1.0 - p)).sqrt();
            assert!((hist[a.position(k).unwrap()] as f64 - n as f64 * p).abs() <= 3.0 * sd + 1.0);
        }
    }

    #[test]
    fn rows_are_stochastic() {
        let pi = TransitionMatrix::sign_magnitude(alph(7), BitFlipModel::new(0.03, 1e-3).unwrap()).unwrap();
        for r in pi.rows() {
            assert!((r.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            assert!(r.iter().all(|&v| v >= 0.0));
        }
    }

    #[test]
    fn rows_match_sampled_flips() {
        let q = 4;
        let a = alph(q);
        let model = BitFlipModel::new(0.05, 0.02).unwrap();
        let pi = TransitionMatrix::sign_magnitude(a, model).unwrap();
        let mut rng = stream_rng(21, &[]);
        let n = 1_000_000;
        for clean in [-7, -2, 0, 3] {
            let mut hist = vec![0usize; a.len()];
            for _ in 0..n {
                hist[a.position(model.sample_value(clean, q, &mut rng)).unwrap()] += 1;
            }
            for k in a.values() {
                let p = pi.entry(clean, k);
                let sd = (n as f64 * p * (1.0 - p)).sqrt();
                let c = hist[a.position(k).unwrap()] as f64;
                assert!((c - n as f64 * p).abs() <= 3.0 * sd + 1.0, "clean {clean} noisy {k}");
            }
        }
    }

    #[test]
    fn table_sampler_matches_rows() {
        let a = alph(3);
        let pi = TransitionMatrix::sign_magnitude(a, BitFlipModel::new(0.1, 0.2).unwrap()).unwrap();
        let s = pi.sampler();
        let mut rng = stream_rng(4, &[]);
        let n = 1_000_000;
        let mut hist = vec![0usize; a.len()];
        for _ in 0..n {
            hist[a.position(s.sample(1, &mut rng)).unwrap()] += 1;
        }
        for k in a.values() {
            let p = pi.entry(1, k);
            let sd = (n as f64 * p * (1.0 - p)).sqrt();
            assert!((hist[a.position(k).unwrap()] as f64 - n as f64 * p).abs() <= 3.0 * sd + 1.0);
        }
    }

    #[test]
    fn apply_identity_delta_and_twice() {
        let a = alph(3);
        let d = DiscreteDensity::new(a, vec![0.1, 0.1, 0.2, 0.2, 0.1, 0.2, 0.1]).unwrap();
        assert!(apply_pi(&TransitionMatrix::identity(a), &d).unwrap().max_abs_diff(&d) < 1e-15);

        let pi = TransitionMatrix::sign_magnitude(a, BitFlipModel::new(0.1, 0.05).unwrap()).unwrap();
        let row = apply_pi(&pi, &DiscreteDensity::delta(a, -2).unwrap()).unwrap();
        let pos = a.position(-2).unwrap();
        for (k, v) in row.mass().iter().enumerate() {
            assert!((v - pi.rows()[pos][k]).abs() < 1e-15);
        }

        let once = pi.apply(&d).unwrap();
        let twice = pi.apply(&once).unwrap();
        assert!(once.max_abs_diff(&twice) > 1e-4);

        let other = DiscreteDensity::delta(alph(4), 0).unwrap();
        assert!(pi.apply(&other).is_err());
    }

    #[test]
    fn hard_message_noise() {
        let b = MessageAlphabet::Binary;
        let model = BitFlipModel::new(1e-2, 1e-4).unwrap();
        let pair = ConditionalDensityPair::new(
            DiscreteDensity::new(b, vec![0.7, 0.3]).unwrap(),
            DiscreteDensity::new(b, vec![1.0, 0.0]).unwrap(),
        )
        .unwrap();
        let out = gallager_b_noise(&pair, model).unwrap();
        assert!((out.given0.at(0) - 0.69303).abs() < 1e-15);
        assert!((out.given1.at(0) - 0.99).abs() < 1e-15);
        assert!(gallager_b_noise(&pair, BitFlipModel::none()).unwrap().max_abs_diff(&pair) < 1e-15);

        let sym = ConditionalDensityPair::new(
            DiscreteDensity::new(b, vec![0.8, 0.2]).unwrap(),
            DiscreteDensity::new(b, vec![0.2, 0.8]).unwrap(),
        )
        .unwrap();
        let asym = gallager_b_noise(&sym, BitFlipModel::new(0.05, 0.001).unwrap()).unwrap();
        assert!((asym.given0.at(0) - (1.0 - asym.given1.at(0))).abs() > 1e-3);

        let q = DiscreteDensity::delta(alph(3), 0).unwrap();
        assert!(gallager_b_noise(&ConditionalDensityPair::symmetric_from(q), model).is_err());
    }

    #[test]
    fn additive_moments() {
        let mut rng = stream_rng(8, &[]);
        let n = 1_000_000;
        let s = AdditiveDeviation::Gaussian { mean: 0.2, var: 0.01 }.sampler().unwrap();
        let mean = (0..n).map(|_| s.sample(&mut rng)).sum::<f64>() / n as f64;
        assert!((mean - 0.2).abs() <= 3.0 * (0.01f64 / n as f64).sqrt());

        let chi = AdditiveDeviation::ChiSquare { dof: 3.0, scale: 0.5, shift: -1.0 };
        let s = chi.sampler().unwrap();
        let mean = (0..n).map(|_| s.sample(&mut rng)).sum::<f64>() / n as f64;
        assert!((mean - chi.mean()).abs() <= 3.0 * (chi.variance() / n as f64).sqrt());

        let c = AdditiveDeviation::constant(0.3).sampler().unwrap();
        assert_eq!(c.sample(&mut rng), 0.3);
        assert!(AdditiveDeviation::Gaussian { mean: 0.0, var: -1.0 }.validate().is_err());
    }

    #[test]
    fn noiseless_sampling_is_identity() {
        let mut rng = stream_rng(1, &[]);
        for v in -7..=7 {
            assert_eq!(BitFlipModel::none().sample_value(v, 4, &mut rng), v);
        }
        assert_eq!(BitFlipModel::none().flip_bit(1, &mut rng), 1);
    }

    #[test]
    fn pi_csv_has_one_row_per_value() {
        let pi = TransitionMatrix::sign_magnitude(alph(2), BitFlipModel::new(0.1, 0.1).unwrap()).unwrap();
        let mut buf = Vec::new();
        pi.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 4);
        assert!(text.starts_with("clean,-1,0,1\n"));
    }

    proptest! {
        #[test]
        fn equal_rates_give_sign_symmetric_pi(q in 2u32..6, e in 0.0f64..0.3) {
            let a = alph(q);
            let model = BitFlipModel::new(e, e).unwrap();
            let fixed = TransitionMatrix::sign_magnitude(a, model).unwrap();
            let balanced = TransitionMatrix::sign_magnitude_with(a, model, ZeroSign::Balanced).unwrap();
            for i in a.values() {
                for k in a.values() {
                    prop_assert!((balanced.entry(i, k) - balanced.entry(-i, -k)).abs() < 1e-15);
                    if i != 0 {
                        prop_assert!((fixed.entry(i, k) - fixed.entry(-i, -k)).abs() < 1e-15);
                    }
                }
            }
        }

        #[test]
        fn apply_preserves_mass(w in proptest::collection::vec(0.0f64..1.0, 15), e01 in 0.0f64..0.2, e10 in 0.0f64..0.2) {
            prop_assume!(w.iter().sum::<f64>() > 1e-3);
            let a = alph(4);
            let d = DiscreteDensity::from_weights(a, w).unwrap();
            let pi = TransitionMatrix::sign_magnitude(a, BitFlipModel::new(e01, e10).unwrap()).unwrap();
            prop_assert!((pi.apply_raw(&d).total() - 1.0).abs() < 1e-12);
        }
    }
}
