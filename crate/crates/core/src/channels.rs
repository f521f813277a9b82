//! BSC and BPSK-AWGN channels: sampling, initial message densities and SNR
//! bookkeeping.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use statrs::function::erf::{erf, erfc, erfc_inv};

use crate::densities::{ConditionalDensityPair, DiscreteDensity, MessageAlphabet};
use crate::stream::stream_rng;
use crate::{Error, Result};

/// Memoryless binary-input symmetric channel.
///
/// For AWGN the codeword bit `x` is sent as `1 - 2x`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ChannelModel {
    Bsc { p: f64 },
    Awgn { sigma2: f64 },
}

impl ChannelModel {
    pub fn bsc(p: f64) -> Result<Self> {
        if !(0.0..=0.5).contains(&p) {
            return Err(Error::InvalidParameter(format!(
                "BSC crossover must lie in [0, 1/2], got {p}"
            )));
        }
        Ok(ChannelModel::Bsc { p })
    }

    pub fn awgn(sigma2: f64) -> Result<Self> {
        if !(sigma2.is_finite() && sigma2 > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "noise variance must be positive, got {sigma2}"
            )));
        }
        Ok(ChannelModel::Awgn { sigma2 })
    }

    pub fn awgn_snr_db(snr_db: f64, rate: f64) -> Result<Self> {
        Self::awgn(snr_db_to_sigma2(snr_db, rate)?)
    }

    /// Crossover probability of the hard-decision channel.
    pub fn crossover(&self) -> f64 {
        match *self {
            ChannelModel::Bsc { p } => p,
            ChannelModel::Awgn { sigma2 } => awgn_crossover(sigma2),
        }
    }
}

/// Channel-LLR scaling applied separately to nonnegative and negative outputs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AsymScaling {
    /// Factor for `y >= 0`.
    pub gamma0: f64,
    /// Factor for `y < 0`.
    pub gamma1: f64,
}

impl AsymScaling {
    pub fn new(gamma0: f64, gamma1: f64) -> Result<Self> {
        if !(gamma0.is_finite() && gamma0 > 0.0 && gamma1.is_finite() && gamma1 > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "scalings must be positive, got ({gamma0}, {gamma1})"
            )));
        }
        Ok(AsymScaling { gamma0, gamma1 })
    }

    pub fn symmetric(gamma: f64) -> Result<Self> {
        Self::new(gamma, gamma)
    }

    pub fn unit() -> Self {
        AsymScaling {
            gamma0: 1.0,
            gamma1: 1.0,
        }
    }

    pub fn is_symmetric(&self) -> bool {
        self.gamma0 == self.gamma1
    }

    pub fn for_output(&self, y: f64) -> f64 {
        if y >= 0.0 {
            self.gamma0
        } else {
            self.gamma1
        }
    }
}

fn check_rate(rate: f64) -> Result<()> {
    if !(rate > 0.0 && rate < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "code rate must lie in (0, 1), got {rate}"
        )));
    }
    Ok(())
}

/// Noise variance for a normalized SNR `10 log10(1 / (2 R sigma^2))`.
pub fn snr_db_to_sigma2(snr_db: f64, rate: f64) -> Result<f64> {
    check_rate(rate)?;
    Ok(1.0 / (2.0 * rate * 10f64.powf(snr_db / 10.0)))
}

pub fn sigma2_to_snr_db(sigma2: f64, rate: f64) -> Result<f64> {
    check_rate(rate)?;
    if !(sigma2 > 0.0) {
        return Err(Error::InvalidParameter("noise variance must be positive".into()));
    }
    Ok(10.0 * (1.0 / (2.0 * rate * sigma2)).log10())
}

/// Hard-decision crossover `1/2 erfc(1 / sqrt(2 sigma^2))`.
pub fn awgn_crossover(sigma2: f64) -> f64 {
    0.5 * erfc(1.0 / (2.0 * sigma2).sqrt())
}

/// Noise variance whose hard-decision crossover equals `z`.
pub fn sigma2_for_crossover(z: f64) -> f64 {
    // erf^{-1}(1 - 2z) written through erfc^{-1} to keep precision for small z
    let e = erfc_inv(2.0 * z);
    1.0 / (2.0 * e * e)
}

/// Standard normal CDF.
pub fn normal_cdf(u: f64) -> f64 {
    0.5 * erfc(-u / std::f64::consts::SQRT_2)
}

/// `Pr(lo <= U < hi)` for a standard normal `U`.
///
/// Branches are chosen so that `mass(lo, hi) == mass(-hi, -lo)` bit for bit.
fn std_normal_interval(lo: f64, hi: f64) -> f64 {
    if hi <= lo {
        return 0.0;
    }
    let upper = |u: f64| 0.5 * erfc(u / std::f64::consts::SQRT_2);
    let m = if lo >= 0.0 {
        upper(lo) - upper(hi)
    } else if hi <= 0.0 {
        upper(-hi) - upper(-lo)
    } else {
        1.0 - (upper(-lo) + upper(hi))
    };
    m.max(0.0)
}

fn llr_params(x: u8, sigma2: f64, gamma: f64) -> (f64, f64) {
    let mean = 2.0 * gamma * (1.0 - 2.0 * x as f64) / sigma2;
    let sd = 2.0 * gamma / sigma2.sqrt();
    (mean, sd)
}

/// CDF of the scaled channel LLR `z = 2 gamma(y) y / sigma^2` given bit `x`.
pub fn asym_scaled_cdf(t: f64, x: u8, sigma2: f64, scaling: AsymScaling) -> f64 {
    let (mu1, s1) = llr_params(x, sigma2, scaling.gamma1);
    let (mu0, s0) = llr_params(x, sigma2, scaling.gamma0);
    let r = std::f64::consts::SQRT_2;
    let v = if t < 0.0 {
        0.5 + 0.5 * erf((t - mu1) / (r * s1))
    } else {
        0.5 + 0.5 * erf(-mu1 / (r * s1)) + 0.5 * erf(mu0 / (r * s0))
            + 0.5 * erf((t - mu0) / (r * s0))
    };
    v.clamp(0.0, 1.0)
}

/// Scaled channel LLR of a received value.
pub fn scaled_llr(y: f64, sigma2: f64, scaling: AsymScaling) -> f64 {
    2.0 * scaling.for_output(y) * y / sigma2
}

/// Maps a real value to its quantizer cell: `[(k - 1/2) step, (k + 1/2) step)`.
pub fn quantize(z: f64, alphabet: MessageAlphabet) -> i32 {
    let k = (z / alphabet.step() + 0.5).floor();
    let max = alphabet.max_index() as f64;
    k.clamp(-max, max) as i32
}

fn cell_bounds(alphabet: MessageAlphabet, k: i32) -> (f64, f64) {
    let step = alphabet.step();
    let lo = if k == alphabet.min_index() {
        f64::NEG_INFINITY
    } else {
        (k as f64 - 0.5) * step
    };
    let hi = if k == alphabet.max_index() {
        f64::INFINITY
    } else {
        (k as f64 + 0.5) * step
    };
    (lo, hi)
}

/// Quantized density of the scaled channel LLR given bit `x`.
fn awgn_quantized(sigma2: f64, x: u8, alphabet: MessageAlphabet, scaling: AsymScaling) -> Vec<f64> {
    let sigma = sigma2.sqrt();
    let mean_y = 1.0 - 2.0 * x as f64;
    // Work in the y domain: z in [a, b) with z >= 0 means y in [a s2/(2g0), b s2/(2g0)).
    let to_y = |z: f64, gamma: f64| z * sigma2 / (2.0 * gamma);
    let y_mass = |ylo: f64, yhi: f64| std_normal_interval((ylo - mean_y) / sigma, (yhi - mean_y) / sigma);
    alphabet
        .values()
        .map(|k| {
            let (lo, hi) = cell_bounds(alphabet, k);
            let mut m = 0.0;
            if lo < 0.0 {
                m += y_mass(to_y(lo, scaling.gamma1), to_y(hi.min(0.0), scaling.gamma1));
            }
            if hi > 0.0 {
                m += y_mass(to_y(lo.max(0.0), scaling.gamma0), to_y(hi, scaling.gamma0));
            }
            m
        })
        .collect()
}

/// Conditional densities of the decoder's initial messages.
///
/// BSC requires the binary alphabet. AWGN with the binary alphabet yields the
/// hard-decision channel; with a quantized alphabet the scaled LLR is binned.
pub fn initial_density(
    channel: ChannelModel,
    alphabet: MessageAlphabet,
    scaling: AsymScaling,
) -> Result<ConditionalDensityPair> {
    match (channel, alphabet) {
        (ChannelModel::Bsc { p }, MessageAlphabet::Binary) => bsc_pair(p),
        (ChannelModel::Bsc { .. }, _) => Err(Error::InvalidParameter(
            "BSC initial messages need the binary alphabet".into(),
        )),
        (ChannelModel::Awgn { sigma2 }, MessageAlphabet::Binary) => bsc_pair(awgn_crossover(sigma2)),
        (ChannelModel::Awgn { sigma2 }, _) => {
            let w0 = awgn_quantized(sigma2, 0, alphabet, scaling);
            let w1 = awgn_quantized(sigma2, 1, alphabet, scaling);
            ConditionalDensityPair::new(
                DiscreteDensity::new(alphabet, w0)?,
                DiscreteDensity::new(alphabet, w1)?,
            )
        }
    }
}

fn bsc_pair(p: f64) -> Result<ConditionalDensityPair> {
    let b = MessageAlphabet::Binary;
    ConditionalDensityPair::new(
        DiscreteDensity::new(b, vec![1.0 - p, p])?,
        DiscreteDensity::new(b, vec![p, 1.0 - p])?,
    )
}

/// Channel output for a codeword.
#[derive(Debug, Clone, PartialEq)]
pub enum Received {
    Hard(Vec<u8>),
    Soft(Vec<f64>),
}

pub fn transmit_with<R: Rng + ?Sized>(channel: ChannelModel, codeword: &[u8], rng: &mut R) -> Received {
    match channel {
        ChannelModel::Bsc { p } => Received::Hard(
            codeword
                .iter()
                .map(|&c| if rng.random::<f64>() < p { c ^ 1 } else { c })
                .collect(),
        ),
        ChannelModel::Awgn { sigma2 } => {
            let noise = Normal::new(0.0, sigma2.sqrt()).expect("positive variance");
            Received::Soft(
                codeword
                    .iter()
                    .map(|&c| (1.0 - 2.0 * c as f64) + noise.sample(rng))
                    .collect(),
            )
        }
    }
}

/// Sends `codeword` through the channel with a generator seeded by `seed`.
pub fn transmit(channel: ChannelModel, codeword: &[u8], seed: u64) -> Received {
    transmit_with(channel, codeword, &mut stream_rng(seed, &[]))
}
