//! Exact discrete density evolution for the quantized offset Min-Sum decoder
//! with sign-dependent channel scaling and offsets, and bit-level deviations
//! on variable-to-check messages.

use serde::{Deserialize, Serialize};

use crate::channels::{initial_density, AsymScaling, ChannelModel};
use crate::densities::{
    error_probability_unchecked, saturating_convolve_raw, ConditionalDensityPair, DiscreteDensity,
    MessageAlphabet,
};
use crate::deviations::{BitFlipModel, TransitionMatrix, ZeroSign};
use crate::result::{DeRunResult, RunOptions};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MinSumParams {
    pub dv: usize,
    pub dc: usize,
    /// Message bit width.
    pub q: u32,
    /// Quantization step of channel LLRs.
    pub step: f64,
    /// Channel scaling for nonnegative outputs.
    pub gamma0: f64,
    /// Channel scaling for negative outputs.
    pub gamma1: f64,
    /// Offset subtracted from positive check outputs (index units).
    pub lambda_plus: i32,
    /// Offset subtracted from negative check outputs (index units).
    pub lambda_minus: i32,
    pub iterations: usize,
    /// Sign bit stored for zero-valued messages.
    #[serde(default)]
    pub zero_sign: ZeroSign,
}

impl MinSumParams {
    /// Symmetric decoder with scaling `gamma` and offset `lambda`.
    pub fn symmetric(dv: usize, dc: usize, q: u32, step: f64, gamma: f64, lambda: i32, iterations: usize) -> Result<Self> {
        let p = MinSumParams {
            dv,
            dc,
            q,
            step,
            gamma0: gamma,
            gamma1: gamma,
            lambda_plus: lambda,
            lambda_minus: lambda,
            iterations,
            zero_sign: ZeroSign::Positive,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn with_asymmetry(mut self, gamma0: f64, gamma1: f64, lambda_plus: i32, lambda_minus: i32) -> Result<Self> {
        self.gamma0 = gamma0;
        self.gamma1 = gamma1;
        self.lambda_plus = lambda_plus;
        self.lambda_minus = lambda_minus;
        self.validate()?;
        Ok(self)
    }

    pub fn alphabet(&self) -> Result<MessageAlphabet> {
        MessageAlphabet::quantized(self.q, self.step)
    }

    pub fn scaling(&self) -> Result<AsymScaling> {
        AsymScaling::new(self.gamma0, self.gamma1)
    }

    pub fn is_symmetric(&self) -> bool {
        self.gamma0 == self.gamma1 && self.lambda_plus == self.lambda_minus
    }

    pub fn validate(&self) -> Result<()> {
        let alphabet = self.alphabet()?;
        self.scaling()?;
        if self.dv < 2 || self.dc < 2 {
            return Err(Error::InvalidParameter("degrees must be at least 2".into()));
        }
        if self.iterations == 0 {
            return Err(Error::InvalidParameter("at least one iteration is required".into()));
        }
        for l in [self.lambda_plus, self.lambda_minus] {
            if l < 0 || l >= alphabet.max_index() {
                return Err(Error::InvalidParameter(format!(
                    "offset {l} outside [0, {})",
                    alphabet.max_index()
                )));
            }
        }
        Ok(())
    }
}

fn check_pair(pair: &ConditionalDensityPair) -> Result<()> {
    if pair.alphabet().is_binary() {
        Err(Error::AlphabetMismatch("Min-Sum densities need a quantized alphabet".into()))
    } else {
        Ok(())
    }
}

/// Left fold `init ⊛ cn ⊛ ... ⊛ cn` with `copies` check terms.
fn fold_vn(init: &DiscreteDensity, cn: &DiscreteDensity, copies: usize) -> DiscreteDensity {
    (0..copies).fold(init.clone(), |acc, _| saturating_convolve_raw(&acc, cn))
}

/// Variable-to-check densities: channel term plus `dv - 1` check messages
/// with saturation after every addition.
pub fn vn_density(
    init: &ConditionalDensityPair,
    cn: &ConditionalDensityPair,
    dv: usize,
) -> Result<ConditionalDensityPair> {
    check_pair(init)?;
    check_pair(cn)?;
    if init.alphabet() != cn.alphabet() {
        return Err(Error::AlphabetMismatch("init and check densities differ in alphabet".into()));
    }
    if dv < 1 {
        return Err(Error::InvalidParameter("variable degree must be positive".into()));
    }
    Ok(vn_density_raw(init, cn, dv - 1))
}

fn vn_density_raw(init: &ConditionalDensityPair, cn: &ConditionalDensityPair, copies: usize) -> ConditionalDensityPair {
    ConditionalDensityPair {
        given0: fold_vn(&init.given0, &cn.given0, copies),
        given1: fold_vn(&init.given1, &cn.given1, copies),
    }
}

/// Adds `a ∘ b` to `out`, where `∘` is the law of `sgn(u) sgn(v) min(|u|, |v|)`.
fn min_sign_accumulate(out: &mut [f64], a: &[f64], b: &[f64], max: i32) {
    for (i, &pa) in a.iter().enumerate() {
        if pa == 0.0 {
            continue;
        }
        let u = i as i32 - max;
        for (j, &pb) in b.iter().enumerate() {
            let v = j as i32 - max;
            let c = u.signum() * v.signum() * u.abs().min(v.abs());
            out[(c + max) as usize] += pa * pb;
        }
    }
}

/// `v -> sgn(v) max(|v| - offset_sgn(v), 0)`.
pub fn apply_offset(mass: &[f64], alphabet: MessageAlphabet, lambda_plus: i32, lambda_minus: i32) -> Vec<f64> {
    let mut out = vec![0.0; mass.len()];
    for (pos, &m) in mass.iter().enumerate() {
        let v = alphabet.value(pos);
        let w = match v.signum() {
            1 => (v - lambda_plus).max(0),
            -1 => -((-v - lambda_minus).max(0)),
            _ => 0,
        };
        out[alphabet.position(w).expect("offset stays inside")] += m;
    }
    out
}

/// Check-to-variable densities for degree `dc` with sign-dependent offsets.
///
/// Each incoming message carries the pair `(E, O) = (P~_0 / 2, P~_1 / 2)`
/// of densities tagged by the parity of its hidden bit. Two tagged messages
/// combine as `E = E∘E' + O∘O'`, `O = E∘O' + O∘E'`, so after `dc - 1` inputs
/// `2E` and `2O` are the outputs for target bits 0 and 1.
pub fn cn_density(
    noisy_vn: &ConditionalDensityPair,
    dc: usize,
    lambda_plus: i32,
    lambda_minus: i32,
) -> Result<ConditionalDensityPair> {
    check_pair(noisy_vn)?;
    if dc < 2 {
        return Err(Error::InvalidParameter("check degree must be at least 2".into()));
    }
    let max = noisy_vn.alphabet().max_index();
    if lambda_plus < 0 || lambda_minus < 0 || lambda_plus > max || lambda_minus > max {
        return Err(Error::InvalidParameter("offsets outside the alphabet".into()));
    }
    Ok(cn_density_raw(noisy_vn, dc, lambda_plus, lambda_minus))
}

fn cn_density_raw(noisy_vn: &ConditionalDensityPair, dc: usize, lambda_plus: i32, lambda_minus: i32) -> ConditionalDensityPair {
    let alphabet = noisy_vn.alphabet();
    let max = alphabet.max_index();
    let n = alphabet.len();
    let e_in: Vec<f64> = noisy_vn.given0.mass().iter().map(|m| 0.5 * m).collect();
    let o_in: Vec<f64> = noisy_vn.given1.mass().iter().map(|m| 0.5 * m).collect();
    let mut e = e_in.clone();
    let mut o = o_in.clone();
    for _ in 1..dc - 1 {
        let mut e2 = vec![0.0; n];
        let mut o2 = vec![0.0; n];
        min_sign_accumulate(&mut e2, &e, &e_in, max);
        min_sign_accumulate(&mut e2, &o, &o_in, max);
        min_sign_accumulate(&mut o2, &e, &o_in, max);
        min_sign_accumulate(&mut o2, &o, &e_in, max);
        e = e2;
        o = o2;
    }
    let q0: Vec<f64> = e.iter().map(|m| 2.0 * m).collect();
    let q1: Vec<f64> = o.iter().map(|m| 2.0 * m).collect();
    ConditionalDensityPair {
        given0: DiscreteDensity::from_raw(alphabet, apply_offset(&q0, alphabet, lambda_plus, lambda_minus)),
        given1: DiscreteDensity::from_raw(alphabet, apply_offset(&q1, alphabet, lambda_plus, lambda_minus)),
    }
}

/// Deviation matrices applied during a run.
#[derive(Debug, Clone)]
pub struct MinSumDeviations {
    /// Applied to every variable-to-check message.
    pub vn: TransitionMatrix,
    /// Optionally applied to every check-to-variable message.
    pub cn: Option<TransitionMatrix>,
}

impl MinSumDeviations {
    pub fn vn_only(alphabet: MessageAlphabet, model: BitFlipModel, zero_sign: ZeroSign) -> Result<Self> {
        Ok(MinSumDeviations {
            vn: TransitionMatrix::sign_magnitude_with(alphabet, model, zero_sign)?,
            cn: None,
        })
    }
}

/// Runs DE from explicit initial densities.
///
/// Iteration `l` computes variable messages from the previous check messages
/// (initially all zero), passes them through the deviation matrix, records
/// their error probability, and computes the new check messages. The APP
/// trace uses the channel term plus all `dv` check messages.
pub fn run_with(
    init: &ConditionalDensityPair,
    params: &MinSumParams,
    deviations: &MinSumDeviations,
    options: RunOptions,
) -> Result<DeRunResult> {
    params.validate()?;
    check_pair(init)?;
    let alphabet = params.alphabet()?;
    if init.alphabet() != alphabet || deviations.vn.alphabet() != alphabet {
        return Err(Error::AlphabetMismatch("run inputs use different alphabets".into()));
    }
    let init = if options.all_zero_reference {
        ConditionalDensityPair::symmetric_from(init.given0.clone())
    } else {
        init.clone()
    };
    let mut result = DeRunResult::with_capacity(params.iterations);
    let mut history = options.record_history.then(Vec::new);
    let zero = DiscreteDensity::delta(alphabet, 0)?;
    let mut cn = ConditionalDensityPair::symmetric_from(zero);
    let mut noisy_vn = init.clone();
    for _ in 0..params.iterations {
        let vn = vn_density_raw(&init, &cn, params.dv - 1);
        let mut next = ConditionalDensityPair {
            given0: deviations.vn.apply_raw(&vn.given0),
            given1: deviations.vn.apply_raw(&vn.given1),
        };
        result.mass_drift = result.mass_drift.max(next.renormalize());
        if options.all_zero_reference {
            next = ConditionalDensityPair::symmetric_from(next.given0);
        }
        result.err_given0.push(next.given0.error_mass_given0());
        result.err_given1.push(next.given1.error_mass_given1());
        result.pe.push(error_probability_unchecked(&next));

        let mut c = cn_density_raw(&next, params.dc, params.lambda_plus, params.lambda_minus);
        if let Some(pi) = &deviations.cn {
            c = ConditionalDensityPair {
                given0: pi.apply_raw(&c.given0),
                given1: pi.apply_raw(&c.given1),
            };
        }
        result.mass_drift = result.mass_drift.max(c.renormalize());
        let app = vn_density_raw(&init, &c, params.dv);
        result.pe_app.push(error_probability_unchecked(&app));
        if let Some(h) = history.as_mut() {
            h.push(next.clone());
        }
        noisy_vn = next;
        cn = c;
    }
    result.final_vn = Some(noisy_vn);
    result.final_cn = Some(cn);
    result.history = history;
    Ok(result)
}

/// Initial densities of the scaled, quantized AWGN channel LLRs.
pub fn init_density(sigma2: f64, params: &MinSumParams) -> Result<ConditionalDensityPair> {
    initial_density(ChannelModel::awgn(sigma2)?, params.alphabet()?, params.scaling()?)
}

/// Runs DE on a BPSK-AWGN channel with noise variance `sigma2`.
pub fn run(sigma2: f64, params: &MinSumParams, deviation: BitFlipModel) -> Result<DeRunResult> {
    run_opts(sigma2, params, deviation, RunOptions::default())
}

pub fn run_opts(sigma2: f64, params: &MinSumParams, deviation: BitFlipModel, options: RunOptions) -> Result<DeRunResult> {
    let init = init_density(sigma2, params)?;
    let devs = MinSumDeviations::vn_only(params.alphabet()?, deviation, params.zero_sign)?;
    run_with(&init, params, &devs, options)
}

/// Conventional all-zero-codeword DE of the same decoder.
pub fn run_reference(sigma2: f64, params: &MinSumParams, deviation: BitFlipModel) -> Result<DeRunResult> {
    run_opts(
        sigma2,
        params,
        deviation,
        RunOptions {
            all_zero_reference: true,
            record_history: false,
        },
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channels::snr_db_to_sigma2;
    use crate::stream::stream_rng;
    use proptest::prelude::*;
    use rand::Rng;

    fn alph(q: u32) -> MessageAlphabet {
        MessageAlphabet::quantized(q, 1.0).unwrap()
    }

    fn random_density<R: Rng>(a: MessageAlphabet, rng: &mut R) -> DiscreteDensity {
        let w: Vec<f64> = (0..a.len()).map(|_| rng.random::<f64>()).collect();
        DiscreteDensity::from_weights(a, w).unwrap()
    }

    fn random_pair<R: Rng>(a: MessageAlphabet, rng: &mut R) -> ConditionalDensityPair {
        ConditionalDensityPair::new(random_density(a, rng), random_density(a, rng)).unwrap()
    }

    /// Sums over neighbour bit patterns with the required parity and over
    /// every tuple of incoming messages.
    fn cn_oracle(p: &ConditionalDensityPair, dc: usize, lp: i32, lm: i32) -> ConditionalDensityPair {
        let a = p.alphabet();
        let n = dc - 1;
        let k = a.len();
        let mut out = [vec![0.0; k], vec![0.0; k]];
        for x in 0..2usize {
            let mut patterns = 0usize;
            for bits in 0u32..(1 << n) {
                if bits.count_ones() as usize % 2 != x {
                    continue;
                }
                patterns += 1;
                let mut idx = vec![0usize; n];
                loop {
                    let mut prob = 1.0;
                    let mut sign = 1;
                    let mut mag = i32::MAX;
                    for (i, &j) in idx.iter().enumerate() {
                        let d = if bits >> i & 1 == 0 { &p.given0 } else { &p.given1 };
                        prob *= d.mass()[j];
                        let v = a.value(j);
                        sign *= v.signum();
                        mag = mag.min(v.abs());
                    }
                    let raw = sign * mag;
                    let val = if raw > 0 {
                        (raw - lp).max(0)
                    } else if raw < 0 {
                        -((-raw - lm).max(0))
                    } else {
                        0
                    };
                    out[x][a.position(val).unwrap()] += prob;
                    let mut i = 0;
                    while i < n {
                        idx[i] += 1;
                        if idx[i] < k {
                            break;
                        }
                        idx[i] = 0;
                        i += 1;
                    }
                    if i == n {
                        break;
                    }
                }
            }
            for m in &mut out[x] {
                *m /= patterns as f64;
            }
        }
        let [o0, o1] = out;
        ConditionalDensityPair::new(
            DiscreteDensity::from_raw(a, o0),
            DiscreteDensity::from_raw(a, o1),
        )
        .unwrap()
    }

    #[test]
    fn vn_identity_and_saturation() {
        let a = alph(3);
        let mut rng = stream_rng(1, &[]);
        let init = random_pair(a, &mut rng);
        let zero = ConditionalDensityPair::symmetric_from(DiscreteDensity::delta(a, 0).unwrap());
        assert_eq!(vn_density(&init, &zero, 2).unwrap(), init);

        let one = DiscreteDensity::delta(a, 1).unwrap();
        let ones = ConditionalDensityPair::new(one.clone(), one).unwrap();
        let out = vn_density(&ones, &ones, 3).unwrap();
        assert_eq!(out.given0, DiscreteDensity::delta(a, 3).unwrap());
    }

    #[test]
    fn vn_matches_enumeration() {
        let a = alph(3);
        let mut rng = stream_rng(2, &[]);
        for _ in 0..20 {
            let init = random_pair(a, &mut rng);
            let cn = random_pair(a, &mut rng);
            let out = vn_density(&init, &cn, 3).unwrap();
            for (d_init, d_cn, d_out) in [
                (&init.given0, &cn.given0, &out.given0),
                (&init.given1, &cn.given1, &out.given1),
            ] {
                let mut want = vec![0.0; a.len()];
                for u in a.values() {
                    for v in a.values() {
                        for w in a.values() {
                            let s = a.clamp(a.clamp(u + v) + w);
                            want[a.position(s).unwrap()] += d_init.at(u) * d_cn.at(v) * d_cn.at(w);
                        }
                    }
                }
                for (x, y) in want.iter().zip(d_out.mass()) {
                    assert!((x - y).abs() < 1e-14);
                }
            }
        }
    }

    #[test]
    fn cn_deterministic_inputs() {
        let a = alph(3);
        for k in 1..=3 {
            let p = ConditionalDensityPair::new(
                DiscreteDensity::delta(a, k).unwrap(),
                DiscreteDensity::delta(a, -k).unwrap(),
            )
            .unwrap();
            let (lp, lm) = (1, 0);
            let out = cn_density(&p, 4, lp, lm).unwrap();
            assert_eq!(out.given0, DiscreteDensity::delta(a, (k - lp).max(0)).unwrap());
            assert_eq!(out.given1, DiscreteDensity::delta(a, -(k - lm).max(0)).unwrap());
        }
        let z = ConditionalDensityPair::symmetric_from(DiscreteDensity::delta(a, 0).unwrap());
        assert_eq!(cn_density(&z, 5, 0, 0).unwrap(), z);
    }

    #[test]
    fn cn_matches_enumeration_with_offsets() {
        let a = alph(3);
        let mut rng = stream_rng(3, &[]);
        for _ in 0..10 {
            let p = random_pair(a, &mut rng);
            let got = cn_density(&p, 4, 1, 0).unwrap();
            let want = cn_oracle(&p, 4, 1, 0);
            assert!(got.max_abs_diff(&want) < 1e-12);
        }
    }

    #[test]
    fn cn_oracle_all_small_degrees() {
        let mut rng = stream_rng(4, &[]);
        for q in 2..=3 {
            let a = alph(q);
            for dc in 2..=5 {
                for _ in 0..5 {
                    let p = random_pair(a, &mut rng);
                    let lp = rng.random_range(0..a.max_index());
                    let lm = rng.random_range(0..a.max_index());
                    let got = cn_density(&p, dc, lp, lm).unwrap();
                    assert!(got.max_abs_diff(&cn_oracle(&p, dc, lp, lm)) < 1e-12);
                }
            }
        }
    }

    fn params(q: u32, step: f64, gamma: f64, iterations: usize) -> MinSumParams {
        MinSumParams::symmetric(3, 6, q, step, gamma, 0, iterations).unwrap()
    }

    #[test]
    fn noiseless_high_snr_converges() {
        let p = params(4, 1.0, 1.0, 20);
        let r = run(snr_db_to_sigma2(8.0, 0.5).unwrap(), &p, BitFlipModel::none()).unwrap();
        assert!(r.final_pe() < 1e-12);
        assert!(r.final_pe_app() < 1e-12);
    }

    #[test]
    fn symmetric_setup_mirrors_every_iteration() {
        let mut p = params(5, 0.5, 0.8, 15);
        p.zero_sign = ZeroSign::Balanced;
        let dev = BitFlipModel::new(2e-3, 2e-3).unwrap();
        let s2 = snr_db_to_sigma2(2.0, 0.5).unwrap();
        let opts = RunOptions {
            record_history: true,
            ..Default::default()
        };
        let r = run_opts(s2, &p, dev, opts).unwrap();
        for h in r.history.as_ref().unwrap() {
            assert!(h.mirror_defect() < 1e-14);
        }
        let reference = run_reference(s2, &p, dev).unwrap();
        for (a, b) in r.pe.iter().zip(&reference.pe) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    /// Conventional single-density recursion written independently.
    fn all_zero_trace(s2: f64, p: &MinSumParams) -> Vec<f64> {
        let a = p.alphabet().unwrap();
        let init = init_density(s2, p).unwrap().given0;
        let k = a.len();
        let max = a.max_index();
        let mut q = DiscreteDensity::delta(a, 0).unwrap();
        let mut trace = Vec::new();
        for _ in 0..p.iterations {
            let mut v = init.clone();
            for _ in 0..p.dv - 1 {
                let mut m = vec![0.0; k];
                for x in a.values() {
                    for y in a.values() {
                        m[a.position(a.clamp(x + y)).unwrap()] += v.at(x) * q.at(y);
                    }
                }
                v = DiscreteDensity::from_raw(a, m);
            }
            // mass errors would otherwise grow like t^(dv-1)(dc-1) per iteration
            v.renormalize();
            trace.push(v.error_mass_given0());
            // cumulative complementary magnitudes: Pr(|u| >= t) by sign
            let mut c = v.clone();
            for _ in 0..p.dc - 2 {
                let mut m = vec![0.0; k];
                for x in a.values() {
                    for y in a.values() {
                        let s = x.signum() * y.signum() * x.abs().min(y.abs());
                        m[(s + max) as usize] += c.at(x) * v.at(y);
                    }
                }
                c = DiscreteDensity::from_raw(a, m);
            }
            let mut m = vec![0.0; k];
            for x in a.values() {
                let w = x.signum() * (x.abs() - p.lambda_plus).max(0);
                m[(w + max) as usize] += c.at(x);
            }
            q = DiscreteDensity::from_raw(a, m);
            q.renormalize();
        }
        trace
    }

    #[test]
    fn noiseless_symmetric_matches_all_zero_recursion() {
        let p = MinSumParams::symmetric(3, 6, 4, 1.0, 0.7, 1, 12).unwrap();
        for snr in [1.0, 2.5, 4.0] {
            let s2 = snr_db_to_sigma2(snr, 0.5).unwrap();
            let r = run(s2, &p, BitFlipModel::none()).unwrap();
            let want = all_zero_trace(s2, &p);
            for (a, b) in r.pe.iter().zip(&want) {
                assert!((a - b).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn cn_hook_changes_the_trace() {
        let p = params(4, 1.0, 0.8, 10);
        let a = p.alphabet().unwrap();
        let s2 = snr_db_to_sigma2(3.0, 0.5).unwrap();
        let init = init_density(s2, &p).unwrap();
        let dev = BitFlipModel::new(1e-3, 1e-3).unwrap();
        let plain = MinSumDeviations::vn_only(a, dev, ZeroSign::Positive).unwrap();
        let mut both = plain.clone();
        both.cn = Some(TransitionMatrix::sign_magnitude(a, BitFlipModel::new(0.02, 0.0).unwrap()).unwrap());
        let r1 = run_with(&init, &p, &plain, RunOptions::default()).unwrap();
        let r2 = run_with(&init, &p, &both, RunOptions::default()).unwrap();
        assert!(r2.final_pe() > r1.final_pe());
    }

    #[test]
    fn params_validation() {
        assert!(MinSumParams::symmetric(3, 6, 4, 1.0, 0.8, 7, 10).is_err());
        assert!(MinSumParams::symmetric(3, 6, 4, 1.0, 0.0, 0, 10).is_err());
        assert!(MinSumParams::symmetric(3, 6, 4, 1.0, 0.8, -1, 10).is_err());
        assert!(MinSumParams::symmetric(3, 6, 4, 1.0, 0.8, 2, 10).is_ok());
    }

    proptest! {
        #[test]
        fn iteration_preserves_mass(snr in 0.0f64..4.0, e01 in 0.0f64..0.05, e10 in 0.0f64..0.05) {
            let p = MinSumParams::symmetric(3, 6, 4, 1.0, 0.8, 0, 3).unwrap()
                .with_asymmetry(0.9, 0.6, 1, 0).unwrap();
            let r = run(snr_db_to_sigma2(snr, 0.5).unwrap(), &p, BitFlipModel::new(e01, e10).unwrap()).unwrap();
            prop_assert!(r.mass_drift < 1e-10);
            let vn = r.final_vn.unwrap();
            let max = p.alphabet().unwrap().max_index();
            prop_assert!(vn.given0.mass().len() == (2 * max + 1) as usize);
        }

        #[test]
        fn offsets_stay_inside(lp in 0i32..7, lm in 0i32..7, w in proptest::collection::vec(0.0f64..1.0, 15)) {
            let a = alph(4);
            let out = apply_offset(&w, a, lp, lm);
            prop_assert_eq!(out.len(), a.len());
            prop_assert!((out.iter().sum::<f64>() - w.iter().sum::<f64>()).abs() < 1e-12);
        }
    }
}
