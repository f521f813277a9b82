//! Finite-length Monte-Carlo simulation of the deviated Gallager B and
//! quantized Min-Sum decoders on concrete Tanner graphs.

use std::io::Write;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Geometric};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channels::{quantize, scaled_llr, transmit_with, ChannelModel, Received};
use crate::codes::{Encoder, TannerGraph};
use crate::de_gallager_b::{validate_thresholds, ThresholdSchedule};
use crate::de_minsum::MinSumParams;
use crate::densities::MessageAlphabet;
use crate::deviations::{sign_magnitude_decode, sign_magnitude_encode, BitFlipModel, ZeroSign};
use crate::stream::stream_rng;
use crate::{Error, Result};

/// Edge-indexed adjacency: edges of check `c` are `cn_start[c]..cn_start[c+1]`.
#[derive(Debug, Clone)]
pub struct EdgeLayout {
    pub n: usize,
    pub cn_start: Vec<usize>,
    pub edge_var: Vec<usize>,
    pub vn_start: Vec<usize>,
    /// Edge ids grouped by variable node.
    pub vn_edges: Vec<usize>,
}

impl EdgeLayout {
    pub fn new(graph: &TannerGraph) -> Self {
        let mut cn_start = vec![0];
        let mut edge_var = Vec::with_capacity(graph.edge_count());
        for c in graph.checks() {
            edge_var.extend_from_slice(c);
            cn_start.push(edge_var.len());
        }
        let n = graph.n();
        let mut vn_start = vec![0usize; n + 1];
        for &v in &edge_var {
            vn_start[v + 1] += 1;
        }
        for v in 0..n {
            vn_start[v + 1] += vn_start[v];
        }
        let mut fill = vn_start.clone();
        let mut vn_edges = vec![0; edge_var.len()];
        for (e, &v) in edge_var.iter().enumerate() {
            vn_edges[fill[v]] = e;
            fill[v] += 1;
        }
        EdgeLayout {
            n,
            cn_start,
            edge_var,
            vn_start,
            vn_edges,
        }
    }

    pub fn edges(&self) -> usize {
        self.edge_var.len()
    }

    fn checks(&self) -> impl Iterator<Item = std::ops::Range<usize>> + '_ {
        self.cn_start.windows(2).map(|w| w[0]..w[1])
    }

    fn var_edges(&self, v: usize) -> &[usize] {
        &self.vn_edges[self.vn_start[v]..self.vn_start[v + 1]]
    }

    pub fn syndrome_ok(&self, word: &[u8]) -> bool {
        self.checks().all(|r| r.fold(0u8, |acc, e| acc ^ word[self.edge_var[e]]) == 0)
    }
}

/// Visits every slot in `0..len` independently with probability `p` by
/// geometric skipping.
fn for_each_hit<R: Rng + ?Sized, F: FnMut(usize, &mut R)>(len: usize, p: f64, rng: &mut R, mut f: F) {
    if p <= 0.0 || len == 0 {
        return;
    }
    if p >= 1.0 {
        for i in 0..len {
            f(i, rng);
        }
        return;
    }
    let geo = Geometric::new(p).expect("probability in (0, 1)");
    let mut i = geo.sample(rng);
    while (i as u128) < len as u128 {
        f(i as usize, rng);
        let skip = geo.sample(rng);
        i = match i.checked_add(skip + 1) {
            Some(j) => j,
            None => break,
        };
    }
}

/// Applies the asymmetric bit-flip channel to every bit in `bits`.
pub fn flip_bits<R: Rng + ?Sized>(bits: &mut [u8], model: BitFlipModel, rng: &mut R) {
    let p = model.eps01.max(model.eps10);
    for_each_hit(bits.len(), p, rng, |i, rng| {
        let e = if bits[i] == 0 { model.eps01 } else { model.eps10 };
        if e >= p || rng.random::<f64>() * p < e {
            bits[i] ^= 1;
        }
    });
}

/// Passes each quantized message through sign-magnitude storage with
/// independent asymmetric bit flips.
pub fn flip_messages<R: Rng + ?Sized>(values: &mut [i32], q: u32, model: BitFlipModel, zero_sign: ZeroSign, rng: &mut R) {
    let p = model.eps01.max(model.eps10);
    let q_us = q as usize;
    let mut current: Option<(usize, u32)> = None;
    let commit = |values: &mut [i32], cur: Option<(usize, u32)>| {
        if let Some((e, w)) = cur {
            values[e] = sign_magnitude_decode(w, q);
        }
    };
    for_each_hit(values.len() * q_us, p, rng, |slot, rng| {
        let (e, bit) = (slot / q_us, slot % q_us);
        if current.is_none_or(|(ce, _)| ce != e) {
            commit(values, current);
            let v = values[e];
            let mut w = sign_magnitude_encode(v, q);
            if v == 0 && zero_sign == ZeroSign::Balanced && rng.random::<bool>() {
                w |= 1 << (q - 1);
            }
            current = Some((e, w));
        }
        let (_, w) = current.as_mut().expect("set above");
        let b = (*w >> bit) & 1;
        let eps = if b == 0 { model.eps01 } else { model.eps10 };
        if eps >= p || rng.random::<f64>() * p < eps {
            *w ^= 1 << bit;
        }
    });
    commit(values, current);
}

/// Decoder output.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Decoded {
    pub bits: Vec<u8>,
    /// Iterations run before the syndrome check passed (or the limit).
    pub iterations: usize,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GallagerBDecoder {
    pub iterations: usize,
    pub thresholds: ThresholdSchedule,
    /// Stop as soon as the hard decisions satisfy every check.
    #[serde(default = "yes")]
    pub early_exit: bool,
}

fn yes() -> bool {
    true
}

/// Flooding Gallager B. Each check output bit is flipped by `deviation`; the
/// decision is the majority of the channel bit and all check messages, with
/// ties kept at the channel bit.
pub fn decode_gallager_b<R: Rng + ?Sized>(
    layout: &EdgeLayout,
    received: &[u8],
    params: &GallagerBDecoder,
    deviation: BitFlipModel,
    rng: &mut R,
) -> Decoded {
    let n = layout.n;
    let mut v2c: Vec<u8> = layout.edge_var.iter().map(|&v| received[v]).collect();
    let mut c2v = vec![0u8; layout.edges()];
    let mut bits = received.to_vec();
    if params.early_exit && layout.syndrome_ok(&bits) {
        return Decoded {
            bits,
            iterations: 0,
            converged: true,
        };
    }
    for l in 1..=params.iterations {
        for r in layout.checks() {
            let total = r.clone().fold(0u8, |a, e| a ^ v2c[e]);
            for e in r {
                c2v[e] = total ^ v2c[e];
            }
        }
        flip_bits(&mut c2v, deviation, rng);
        let (b0, b1) = params.thresholds.at(l);
        for v in 0..n {
            let edges = layout.var_edges(v);
            let ch = received[v];
            let ones: usize = edges.iter().map(|&e| c2v[e] as usize).sum();
            let dv = edges.len();
            for &e in edges {
                let others_one = ones - c2v[e] as usize;
                v2c[e] = if ch == 0 {
                    (others_one >= b0) as u8
                } else {
                    let others_zero = dv - 1 - others_one;
                    (others_zero < b1) as u8
                };
            }
            let disagree = if ch == 0 { ones } else { dv - ones };
            // majority over dv + 1 votes, channel bit wins ties
            bits[v] = if 2 * disagree > dv + 1 { ch ^ 1 } else { ch };
        }
        if params.early_exit && layout.syndrome_ok(&bits) {
            return Decoded {
                bits,
                iterations: l,
                converged: true,
            };
        }
    }
    let converged = layout.syndrome_ok(&bits);
    Decoded {
        bits,
        iterations: params.iterations,
        converged,
    }
}

/// Quantized channel values of the Min-Sum decoder.
pub fn quantize_received(y: &[f64], sigma2: f64, params: &MinSumParams) -> Result<Vec<i32>> {
    let alphabet = params.alphabet()?;
    let scaling = params.scaling()?;
    Ok(y.iter().map(|&v| quantize(scaled_llr(v, sigma2, scaling), alphabet)).collect())
}

fn saturate(x: i32, max: i32) -> i32 {
    x.clamp(-max, max)
}

fn offset(v: i32, lambda_plus: i32, lambda_minus: i32) -> i32 {
    match v.signum() {
        1 => (v - lambda_plus).max(0),
        -1 => -((-v - lambda_minus).max(0)),
        _ => 0,
    }
}

/// Flooding offset Min-Sum in index arithmetic. Variable-to-check messages
/// are stored with bit flips; sums saturate after every addition.
pub fn decode_minsum<R: Rng + ?Sized>(
    layout: &EdgeLayout,
    channel: &[i32],
    params: &MinSumParams,
    deviation: BitFlipModel,
    early_exit: bool,
    rng: &mut R,
) -> Result<Decoded> {
    params.validate()?;
    let alphabet: MessageAlphabet = params.alphabet()?;
    let max = alphabet.max_index();
    let q = params.q;
    let n = layout.n;
    let mut v2c = vec![0i32; layout.edges()];
    let mut c2v = vec![0i32; layout.edges()];
    let mut bits = vec![0u8; n];
    for l in 1..=params.iterations {
        for v in 0..n {
            let edges = layout.var_edges(v);
            for (k, &e) in edges.iter().enumerate() {
                let mut acc = channel[v];
                for (j, &f) in edges.iter().enumerate() {
                    if j != k {
                        acc = saturate(acc + c2v[f], max);
                    }
                }
                v2c[e] = acc;
            }
        }
        flip_messages(&mut v2c, q, deviation, params.zero_sign, rng);
        for r in layout.checks() {
            let mut negative = false;
            let (mut m1, mut m2, mut arg) = (i32::MAX, i32::MAX, usize::MAX);
            let mut zeros = 0;
            for e in r.clone() {
                let x = v2c[e];
                if x == 0 {
                    zeros += 1;
                }
                negative ^= x < 0;
                let a = x.abs();
                if a < m1 {
                    m2 = m1;
                    m1 = a;
                    arg = e;
                } else if a < m2 {
                    m2 = a;
                }
            }
            for e in r {
                let x = v2c[e];
                let others_zero = zeros - usize::from(x == 0);
                c2v[e] = if others_zero > 0 {
                    0
                } else {
                    let mag = if e == arg { m2 } else { m1 };
                    let neg = negative ^ (x < 0);
                    offset(if neg { -mag } else { mag }, params.lambda_plus, params.lambda_minus)
                };
            }
        }
        for (v, bit) in bits.iter_mut().enumerate() {
            let app = layout
                .var_edges(v)
                .iter()
                .fold(channel[v], |acc, &e| saturate(acc + c2v[e], max));
            *bit = match app.signum() {
                1 => 0,
                -1 => 1,
                _ => rng.random::<bool>() as u8,
            };
        }
        if early_exit && layout.syndrome_ok(&bits) {
            return Ok(Decoded {
                bits,
                iterations: l,
                converged: true,
            });
        }
    }
    let converged = layout.syndrome_ok(&bits);
    Ok(Decoded {
        bits,
        iterations: params.iterations,
        converged,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DecoderConfig {
    GallagerB(GallagerBDecoder),
    MinSum {
        params: MinSumParams,
        #[serde(default = "yes")]
        early_exit: bool,
    },
}

/// Default stopping rule: 100 frame errors or 10^7 frames per point.
pub const DEFAULT_TARGET_FRAME_ERRORS: u64 = 100;
pub const DEFAULT_MAX_CODEWORDS: u64 = 10_000_000;
/// Reported points with fewer frame errors are flagged.
pub const MIN_REPORTED_ERRORS: u64 = 50;
const BLOCK: u64 = 32;
const STREAM_INFO: u64 = 1;
const STREAM_CHANNEL: u64 = 2;
const STREAM_DECODER: u64 = 3;

#[derive(Debug, Clone)]
pub struct SimConfig<'a> {
    pub graph: &'a TannerGraph,
    pub encoder: &'a Encoder,
    pub points: Vec<ChannelModel>,
    pub decoder: DecoderConfig,
    pub deviation: BitFlipModel,
    pub max_codewords: u64,
    pub target_frame_errors: u64,
    /// Transmit the all-zero codeword instead of random codewords.
    pub all_zero: bool,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimPoint {
    pub channel: ChannelModel,
    /// Bit error rate over all codeword positions.
    pub ber: f64,
    pub fer: f64,
    pub codewords: u64,
    pub bit_errors: u64,
    pub frame_errors: u64,
    /// Wilson 95% interval for the BER.
    pub ci_lo: f64,
    pub ci_hi: f64,
    pub flags: Vec<String>,
}

impl SimPoint {
    /// Channel parameter for tables: crossover for BSC, noise variance for AWGN.
    pub fn channel_param(&self) -> f64 {
        match self.channel {
            ChannelModel::Bsc { p } => p,
            ChannelModel::Awgn { sigma2 } => sigma2,
        }
    }

    /// Binomial standard deviation of the BER estimate.
    pub fn ber_std(&self, n: usize) -> f64 {
        let bits = (self.codewords * n as u64) as f64;
        (self.ber * (1.0 - self.ber) / bits).sqrt()
    }
}

/// Wilson score interval at 95%.
pub fn wilson_interval(successes: u64, trials: u64) -> (f64, f64) {
    if trials == 0 {
        return (0.0, 1.0);
    }
    let z = 1.959_963_984_540_054;
    let n = trials as f64;
    let p = successes as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let centre = (p + z2 / (2.0 * n)) / denom;
    let half = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    let lo = if successes == 0 { 0.0 } else { (centre - half).max(0.0) };
    let hi = if successes == trials { 1.0 } else { (centre + half).min(1.0) };
    (lo, hi)
}

struct Trial {
    bit_errors: u64,
    frame_error: bool,
}

fn run_trial(cfg: &SimConfig<'_>, layout: &EdgeLayout, point: usize, index: u64) -> Result<Trial> {
    let n = cfg.graph.n();
    let tags = |s: u64| [point as u64, index, s];
    let codeword = if cfg.all_zero {
        vec![0u8; n]
    } else {
        let mut rng = stream_rng(cfg.seed, &tags(STREAM_INFO));
        let info: Vec<u8> = (0..cfg.encoder.k()).map(|_| rng.random::<bool>() as u8).collect();
        cfg.encoder.encode(&info)?
    };
    let channel = cfg.points[point];
    let mut ch_rng: ChaCha8Rng = stream_rng(cfg.seed, &tags(STREAM_CHANNEL));
    let received = transmit_with(channel, &codeword, &mut ch_rng);
    let mut dec_rng = stream_rng(cfg.seed, &tags(STREAM_DECODER));
    let decoded = match (&cfg.decoder, received) {
        (DecoderConfig::GallagerB(p), Received::Hard(r)) => decode_gallager_b(layout, &r, p, cfg.deviation, &mut dec_rng),
        (DecoderConfig::MinSum { params, early_exit }, Received::Soft(y)) => {
            let sigma2 = match channel {
                ChannelModel::Awgn { sigma2 } => sigma2,
                ChannelModel::Bsc { .. } => unreachable!("soft output implies AWGN"),
            };
            let ch = quantize_received(&y, sigma2, params)?;
            decode_minsum(layout, &ch, params, cfg.deviation, *early_exit, &mut dec_rng)?
        }
        _ => {
            return Err(Error::InvalidParameter(
                "Gallager B needs a BSC point and Min-Sum an AWGN point".into(),
            ))
        }
    };
    let bit_errors = decoded.bits.iter().zip(&codeword).filter(|(a, b)| a != b).count() as u64;
    Ok(Trial {
        bit_errors,
        frame_error: bit_errors > 0,
    })
}

impl SimConfig<'_> {
    pub fn validate(&self) -> Result<()> {
        if self.encoder.n() != self.graph.n() {
            return Err(Error::InvalidParameter("encoder and graph lengths differ".into()));
        }
        if self.points.is_empty() {
            return Err(Error::InvalidParameter("no channel points".into()));
        }
        if self.max_codewords == 0 || self.target_frame_errors == 0 {
            return Err(Error::InvalidParameter("budget and target must be positive".into()));
        }
        match &self.decoder {
            DecoderConfig::GallagerB(p) => {
                let dv_max = self.graph.vn_degrees().into_iter().max().unwrap_or(0);
                let check = |(b0, b1): (usize, usize)| validate_thresholds(dv_max, b0, b1);
                match &p.thresholds {
                    ThresholdSchedule::Fixed(b0, b1) => check((*b0, *b1))?,
                    ThresholdSchedule::PerIteration(list) => list.iter().try_for_each(|&b| check(b))?,
                }
            }
            DecoderConfig::MinSum { params, .. } => params.validate()?,
        }
        Ok(())
    }
}

/// Runs every channel point until the frame-error target or the codeword
/// budget is reached. Codewords are simulated in fixed-size blocks, each
/// codeword on its own streams, so results do not depend on the thread count.
pub fn ber_experiment(cfg: &SimConfig<'_>) -> Result<Vec<SimPoint>> {
    cfg.validate()?;
    let layout = EdgeLayout::new(cfg.graph);
    let n = cfg.graph.n() as u64;
    let mut out = Vec::with_capacity(cfg.points.len());
    for point in 0..cfg.points.len() {
        let (mut done, mut bit_errors, mut frame_errors) = (0u64, 0u64, 0u64);
        while done < cfg.max_codewords && frame_errors < cfg.target_frame_errors {
            let end = (done + BLOCK).min(cfg.max_codewords);
            let trials = (done..end)
                .into_par_iter()
                .map(|i| run_trial(cfg, &layout, point, i))
                .collect::<Result<Vec<_>>>()?;
            for t in trials {
                bit_errors += t.bit_errors;
                frame_errors += t.frame_error as u64;
            }
            done = end;
        }
        let (ci_lo, ci_hi) = wilson_interval(bit_errors, done * n);
        let mut flags = Vec::new();
        if frame_errors == 0 {
            flags.push("no errors observed".to_string());
        } else if frame_errors < cfg.target_frame_errors {
            flags.push(format!(
                "target of {} frame errors not reached ({frame_errors} in {done})",
                cfg.target_frame_errors
            ));
        }
        if frame_errors > 0 && frame_errors < MIN_REPORTED_ERRORS {
            flags.push(format!("fewer than {MIN_REPORTED_ERRORS} frame errors"));
        }
        out.push(SimPoint {
            channel: cfg.points[point],
            ber: bit_errors as f64 / (done * n) as f64,
            fer: frame_errors as f64 / done as f64,
            codewords: done,
            bit_errors,
            frame_errors,
            ci_lo,
            ci_hi,
            flags,
        });
    }
    Ok(out)
}

/// Per-point CSV: `channel,param,ber,fer,trials,errors,frame_errors,ci_lo,ci_hi`.
pub fn write_points_csv<W: Write>(points: &[SimPoint], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["channel", "param", "ber", "fer", "trials", "errors", "frame_errors", "ci_lo", "ci_hi"])?;
    for p in points {
        let kind = match p.channel {
            ChannelModel::Bsc { .. } => "bsc",
            ChannelModel::Awgn { .. } => "awgn",
        };
        w.write_record([
            kind.to_string(),
            p.channel_param().to_string(),
            p.ber.to_string(),
            p.fer.to_string(),
            p.codewords.to_string(),
            p.bit_errors.to_string(),
            p.frame_errors.to_string(),
            p.ci_lo.to_string(),
            p.ci_hi.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::codes::{build_encoder, peg_construct, DegreeDistribution};
    use crate::deviations::TransitionMatrix;

    fn code(n: usize, dv: usize, dc: usize, seed: u64) -> (TannerGraph, Encoder) {
        let g = peg_construct(n, &DegreeDistribution::regular(dv, dc).unwrap(), seed).unwrap();
        let e = build_encoder(&g);
        (g, e)
    }

    fn gb(iterations: usize, b: usize) -> DecoderConfig {
        DecoderConfig::GallagerB(GallagerBDecoder {
            iterations,
            thresholds: ThresholdSchedule::Fixed(b, b),
            early_exit: true,
        })
    }

    #[test]
    fn layout_matches_graph() {
        let (g, _) = code(48, 3, 6, 1);
        let l = EdgeLayout::new(&g);
        assert_eq!(l.edges(), 144);
        for v in 0..48 {
            let mut cs: Vec<usize> = l
                .var_edges(v)
                .iter()
                .map(|&e| l.cn_start.partition_point(|&s| s <= e) - 1)
                .collect();
            cs.sort_unstable();
            assert_eq!(cs, g.vars()[v]);
        }
    }

    #[test]
    fn geometric_skipping_hits_at_rate() {
        let mut rng = stream_rng(1, &[]);
        let mut hits = 0usize;
        let len = 1_000_000;
        for_each_hit(len, 0.01, &mut rng, |_, _| hits += 1);
        let sd = (len as f64 * 0.01 * 0.99).sqrt();
        assert!((hits as f64 - 1e4).abs() < 4.0 * sd);
        let mut bits = vec![0u8; 200_000];
        bits[100_000..].fill(1);
        flip_bits(&mut bits, BitFlipModel::new(0.02, 0.005).unwrap(), &mut rng);
        let f01 = bits[..100_000].iter().filter(|&&b| b == 1).count() as f64 / 1e5;
        let f10 = bits[100_000..].iter().filter(|&&b| b == 0).count() as f64 / 1e5;
        assert!((f01 - 0.02).abs() < 4.0 * (0.02 * 0.98 / 1e5f64).sqrt());
        assert!((f10 - 0.005).abs() < 4.0 * (0.005 * 0.995 / 1e5f64).sqrt());
    }

    #[test]
    fn message_flips_follow_transition_matrix() {
        let q = 3;
        let alphabet = MessageAlphabet::quantized(q, 1.0).unwrap();
        let model = BitFlipModel::new(0.05, 0.02).unwrap();
        for zero_sign in [ZeroSign::Positive, ZeroSign::Balanced] {
            let pi = TransitionMatrix::sign_magnitude_with(alphabet, model, zero_sign).unwrap();
            let mut rng = stream_rng(17, &[zero_sign as u64]);
            let per_value = 200_000;
            for clean in alphabet.values() {
                let mut msgs = vec![clean; per_value];
                flip_messages(&mut msgs, q, model, zero_sign, &mut rng);
                for noisy in alphabet.values() {
                    let got = msgs.iter().filter(|&&m| m == noisy).count() as f64 / per_value as f64;
                    let p = pi.entry(clean, noisy);
                    let sd = (p * (1.0 - p) / per_value as f64).sqrt();
                    assert!((got - p).abs() <= 3.0 * sd + 1e-12, "{clean}->{noisy}: {got} vs {p}");
                }
            }
        }
    }

    #[test]
    fn noiseless_gallager_b_is_exact() {
        let (g, e) = code(96, 3, 6, 2);
        let cfg = SimConfig {
            graph: &g,
            encoder: &e,
            points: vec![ChannelModel::bsc(0.0).unwrap()],
            decoder: gb(10, 2),
            deviation: BitFlipModel::none(),
            max_codewords: 300,
            target_frame_errors: 100,
            all_zero: false,
            seed: 3,
        };
        let r = ber_experiment(&cfg).unwrap();
        assert_eq!(r[0].ber, 0.0);
        assert_eq!(r[0].codewords, 300);
        assert!(r[0].flags.iter().any(|f| f == "no errors observed"));
    }

    #[test]
    fn gallager_b_corrects_a_single_error() {
        let (g, e) = code(96, 3, 6, 2);
        let l = EdgeLayout::new(&g);
        let mut rng = stream_rng(5, &[]);
        let info: Vec<u8> = (0..e.k()).map(|_| rng.random::<bool>() as u8).collect();
        let cw = e.encode(&info).unwrap();
        let p = GallagerBDecoder {
            iterations: 10,
            thresholds: ThresholdSchedule::Fixed(2, 2),
            early_exit: true,
        };
        for pos in [0, 17, 95] {
            let mut r = cw.clone();
            r[pos] ^= 1;
            let d = decode_gallager_b(&l, &r, &p, BitFlipModel::none(), &mut rng);
            assert_eq!(d.bits, cw);
            assert!(d.converged);
        }
    }

    #[test]
    fn noiseless_minsum_at_high_snr() {
        let (g, e) = code(96, 3, 6, 4);
        let params = MinSumParams::symmetric(3, 6, 4, 1.0, 1.0, 0, 10).unwrap();
        let cfg = SimConfig {
            graph: &g,
            encoder: &e,
            points: vec![ChannelModel::awgn_snr_db(9.0, 0.5).unwrap()],
            decoder: DecoderConfig::MinSum {
                params,
                early_exit: true,
            },
            deviation: BitFlipModel::none(),
            max_codewords: 10_000,
            target_frame_errors: 100,
            all_zero: false,
            seed: 8,
        };
        let r = ber_experiment(&cfg).unwrap();
        assert_eq!(r[0].bit_errors, 0);
        assert_eq!(r[0].codewords, 10_000);
    }

    #[test]
    fn minsum_check_rule_matches_definition() {
        // single check of degree 4 fed directly through a degree-1 layout
        let g = TannerGraph::from_checks(4, vec![vec![0, 1, 2, 3]]).unwrap();
        let l = EdgeLayout::new(&g);
        let params = MinSumParams::symmetric(2, 4, 4, 1.0, 1.0, 1, 1).unwrap();
        let ch = vec![3, -5, 2, 7];
        let mut rng = stream_rng(0, &[]);
        // with one iteration each decision is ch + its check message
        let d = decode_minsum(&l, &ch, &params, BitFlipModel::none(), false, &mut rng).unwrap();
        // messages to var 0: sign(-)·min(5,2,7)=−2 → offset −1; app 3−1 = 2 → 0
        // to var 1: sign(+)·min(3,2,7)=2 → 1; app −5+1 → 1
        // to var 2: −3 → −2; app 0 → coin
        // to var 3: −2 → −1; app 6 → 0
        assert_eq!(d.bits[0], 0);
        assert_eq!(d.bits[1], 1);
        assert_eq!(d.bits[3], 0);
    }

    #[test]
    fn same_seed_same_output() {
        let (g, e) = code(96, 3, 6, 2);
        let cfg = SimConfig {
            graph: &g,
            encoder: &e,
            points: vec![ChannelModel::bsc(0.04).unwrap(), ChannelModel::bsc(0.06).unwrap()],
            decoder: gb(20, 2),
            deviation: BitFlipModel::new(1e-2, 1e-4).unwrap(),
            max_codewords: 2000,
            target_frame_errors: 60,
            all_zero: false,
            seed: 9,
        };
        let a = ber_experiment(&cfg).unwrap();
        let b = ber_experiment(&cfg).unwrap();
        assert_eq!(a, b);
        assert!(a[0].frame_errors > 0);
        assert!(a[0].ci_lo <= a[0].ber && a[0].ber <= a[0].ci_hi);
        let mut buf = Vec::new();
        write_points_csv(&a, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("channel,param,ber,fer,trials,errors,frame_errors,ci_lo,ci_hi\nbsc,0.04,"));
    }

    #[test]
    fn symmetric_deviation_makes_codeword_irrelevant() {
        let (g, e) = code(200, 3, 6, 6);
        let run = |all_zero| {
            let cfg = SimConfig {
                graph: &g,
                encoder: &e,
                points: vec![ChannelModel::bsc(0.05).unwrap()],
                decoder: gb(20, 2),
                deviation: BitFlipModel::new(5e-3, 5e-3).unwrap(),
                max_codewords: 3000,
                target_frame_errors: u64::MAX,
                all_zero,
                seed: 12,
            };
            ber_experiment(&cfg).unwrap().remove(0)
        };
        let a = run(true);
        let b = run(false);
        let sd = (a.ber_std(200).powi(2) + b.ber_std(200).powi(2)).sqrt();
        // bits within a frame are correlated; allow frame-level spread
        let frame_sd = ((a.fer * (1.0 - a.fer) / 3000.0).sqrt() * a.ber / a.fer.max(1e-12)).max(sd);
        assert!((a.ber - b.ber).abs() < 3.0 * frame_sd * 2f64.sqrt(), "{} vs {}", a.ber, b.ber);
    }

    #[test]
    fn wilson_interval_values() {
        let (lo, hi) = wilson_interval(0, 100);
        assert_eq!(lo, 0.0);
        assert!((hi - 0.036_995).abs() < 1e-5);
        let (lo, hi) = wilson_interval(50, 100);
        assert!((lo - 0.403_831).abs() < 1e-5 && (hi - 0.596_169).abs() < 1e-5);
    }
}
