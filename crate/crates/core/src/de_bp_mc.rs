//! Population (Monte-Carlo) density evolution for belief propagation with an
//! additive deviation on every variable-to-check message.

use std::io::Write;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::deviations::{AdditiveDeviation, AdditiveSampler};
use crate::result::DeRunResult;
use crate::stream::stream_rng;
use crate::{Error, Result};

/// Smallest population accepted by [`population_de_run`].
pub const MIN_POPULATION: usize = 10_000;
/// Magnitudes entering `-log tanh(|x|/2)` are clamped to this range.
pub const MIN_MAGNITUDE: f64 = 1e-15;
pub const MAX_MAGNITUDE: f64 = 50.0;

const CHUNK: usize = 4096;

const STAGE_VN: u64 = 1;
const STAGE_DEV: u64 = 2;
const STAGE_CN: u64 = 3;
const STAGE_APP: u64 = 4;

/// Sampled conditional message densities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Population {
    pub samples0: Vec<f64>,
    pub samples1: Vec<f64>,
}

impl Population {
    pub fn constant(value: f64, size: usize) -> Self {
        Population {
            samples0: vec![value; size],
            samples1: vec![value; size],
        }
    }

    pub fn len(&self) -> usize {
        self.samples0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples0.is_empty()
    }

    pub fn given(&self, x: u8) -> &[f64] {
        if x == 0 {
            &self.samples0
        } else {
            &self.samples1
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.samples0.len() != self.samples1.len() {
            return Err(Error::InvalidParameter("population halves differ in size".into()));
        }
        if self.samples0.iter().chain(&self.samples1).any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("population holds a non-finite sample".into()));
        }
        Ok(())
    }

    /// Fraction of samples on the wrong side of zero given bit `x`, zeros
    /// counting one half.
    pub fn error_fraction(&self, x: u8) -> f64 {
        let s = self.given(x);
        let wrong: f64 = s
            .iter()
            .map(|&v| {
                let v = if x == 0 { v } else { -v };
                if v < 0.0 {
                    1.0
                } else if v == 0.0 {
                    0.5
                } else {
                    0.0
                }
            })
            .sum();
        wrong / s.len() as f64
    }

    /// Error probability and its standard error.
    pub fn error_probability(&self) -> (f64, f64) {
        let e0 = self.error_fraction(0);
        let e1 = self.error_fraction(1);
        let n = self.len() as f64;
        let var = 0.25 * (e0 * (1.0 - e0) + e1 * (1.0 - e1)) / n;
        (0.5 * (e0 + e1), var.sqrt())
    }

    /// Histogram CSV with bins `[k w, (k+1) w)`: bin centre and the
    /// normalized density of each half.
    pub fn write_histogram_csv<W: Write>(&self, writer: W, bin_width: f64) -> Result<()> {
        if !(bin_width > 0.0 && bin_width.is_finite()) {
            return Err(Error::InvalidParameter(format!("bin width {bin_width}")));
        }
        let bin = |v: f64| (v / bin_width).floor() as i64;
        let all = self.samples0.iter().chain(&self.samples1);
        let (lo, hi) = all.fold((i64::MAX, i64::MIN), |(lo, hi), &v| (lo.min(bin(v)), hi.max(bin(v))));
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["bin_center", "density_given0", "density_given1"])?;
        if lo > hi {
            w.flush()?;
            return Ok(());
        }
        let width = (hi - lo + 1) as usize;
        let count = |s: &[f64]| {
            let mut c = vec![0usize; width];
            for &v in s {
                c[(bin(v) - lo) as usize] += 1;
            }
            c
        };
        let c0 = count(&self.samples0);
        let c1 = count(&self.samples1);
        let norm = bin_width * self.len() as f64;
        for k in 0..width {
            let centre = (lo + k as i64) as f64 * bin_width + bin_width / 2.0;
            w.write_record([
                centre.to_string(),
                (c0[k] as f64 / norm).to_string(),
                (c1[k] as f64 / norm).to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// `-log tanh(x / 2)`, an involution on the positive reals. Written as
/// `log((1 + e^-x) / (1 - e^-x))` so large arguments do not round to zero.
pub fn phi(x: f64) -> f64 {
    let e = (-x).exp();
    if x > 1.0 {
        e.ln_1p() - (-e).ln_1p()
    } else {
        e.ln_1p() - (-(-x).exp_m1()).ln()
    }
}

/// Exact BP check-node rule on LLRs with clamped magnitudes; returns the
/// output and the number of clamped inputs.
pub fn bp_check(inputs: &[f64]) -> (f64, u32) {
    let mut negative = false;
    let mut sum = 0.0;
    let mut clamped = 0;
    for &m in inputs {
        negative ^= m.is_sign_negative();
        let a = m.abs();
        let a = if a < MIN_MAGNITUDE {
            clamped += 1;
            MIN_MAGNITUDE
        } else if a > MAX_MAGNITUDE {
            clamped += 1;
            MAX_MAGNITUDE
        } else {
            a
        };
        sum += phi(a);
    }
    let mag = phi(sum.max(phi(MAX_MAGNITUDE)));
    (if negative { -mag } else { mag }, clamped)
}

/// Full output of a population run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PopulationRun {
    pub result: DeRunResult,
    /// Variable-to-check messages (after the deviation) of the last iteration.
    pub vn: Population,
    /// Check-to-variable messages of the last iteration.
    pub cn: Population,
    pub clamp_events: u64,
}

/// Configuration of [`population_de_run_full`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PopulationParams {
    pub sigma2: f64,
    pub dv: usize,
    pub dc: usize,
    pub iterations: usize,
    pub deviation: AdditiveDeviation,
    pub population: usize,
    pub seed: u64,
}

impl PopulationParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.sigma2 > 0.0 && self.sigma2.is_finite()) {
            return Err(Error::InvalidParameter(format!("sigma2 = {}", self.sigma2)));
        }
        if self.dv < 2 || self.dc < 2 {
            return Err(Error::InvalidParameter(format!("degrees ({}, {})", self.dv, self.dc)));
        }
        if self.population < MIN_POPULATION {
            return Err(Error::InvalidParameter(format!(
                "population {} below {MIN_POPULATION}",
                self.population
            )));
        }
        self.deviation.validate()
    }
}

/// Pe trace of population DE; see [`population_de_run_full`].
pub fn population_de_run(
    sigma2: f64,
    dv: usize,
    dc: usize,
    iterations: usize,
    deviation: AdditiveDeviation,
    population: usize,
    seed: u64,
) -> Result<DeRunResult> {
    let params = PopulationParams {
        sigma2,
        dv,
        dc,
        iterations,
        deviation,
        population,
        seed,
    };
    Ok(population_de_run_full(&params)?.result)
}

/// Runs `iterations` rounds of sampled DE. The message Pe is measured on the
/// deviated VN messages; `pe_app` uses a fresh channel sample plus `dv`
/// check messages.
pub fn population_de_run_full(p: &PopulationParams) -> Result<PopulationRun> {
    p.validate()?;
    let dev = p.deviation.sampler()?;
    let chan = channel_laws(p.sigma2);
    let mut cn = Population::constant(0.0, p.population);
    let mut vn = cn.clone();
    let mut result = DeRunResult::with_capacity(p.iterations);
    let mut std_err = Vec::with_capacity(p.iterations);
    let mut clamp_events = 0u64;
    for it in 0..p.iterations as u64 {
        vn = vn_step(&cn, &chan, p.dv - 1, &dev, p.seed, it);
        let (pe, se) = vn.error_probability();
        result.err_given0.push(vn.error_fraction(0));
        result.err_given1.push(vn.error_fraction(1));
        result.pe.push(pe);
        std_err.push(se);
        let (next, clamped) = cn_step(&vn, p.dc, p.seed, it, |s| bp_check(s));
        cn = next;
        clamp_events += clamped;
        let app = app_population(&cn, &chan, p.dv, p.seed, it);
        result.pe_app.push(app.error_probability().0);
    }
    result.pe_std_err = Some(std_err);
    if clamp_events > 0 {
        result.flags.push(format!("{clamp_events} message magnitudes clamped"));
    }
    Ok(PopulationRun {
        result,
        vn,
        cn,
        clamp_events,
    })
}

fn channel_laws(sigma2: f64) -> [Normal<f64>; 2] {
    let sd = 2.0 / sigma2.sqrt();
    [
        Normal::new(2.0 / sigma2, sd).expect("positive variance"),
        Normal::new(-2.0 / sigma2, sd).expect("positive variance"),
    ]
}

fn chunk_rng(seed: u64, it: u64, stage: u64, x: u8, chunk: usize) -> ChaCha8Rng {
    stream_rng(seed, &[it, stage, x as u64, chunk as u64])
}

/// Sample-parallel fill with deterministic per-chunk streams.
fn fill<F>(size: usize, seed: u64, it: u64, stage: u64, x: u8, f: F) -> Vec<f64>
where
    F: Fn(&mut ChaCha8Rng, &mut ChaCha8Rng) -> f64 + Sync,
{
    let mut out = vec![0.0; size];
    out.par_chunks_mut(CHUNK).enumerate().for_each(|(chunk, slot)| {
        let mut rng = chunk_rng(seed, it, stage, x, chunk);
        let mut dev_rng = chunk_rng(seed, it, STAGE_DEV, x, chunk);
        for s in slot {
            *s = f(&mut rng, &mut dev_rng);
        }
    });
    out
}

/// Variable-node update: channel draw plus `fan_in` resampled check
/// messages plus one deviation draw from its own stream.
pub(crate) fn vn_step(
    cn: &Population,
    chan: &[Normal<f64>; 2],
    fan_in: usize,
    dev: &AdditiveSampler,
    seed: u64,
    it: u64,
) -> Population {
    let side = |x: u8| {
        let src = cn.given(x);
        fill(cn.len(), seed, it, STAGE_VN, x, |rng, dev_rng| {
            let mut v = chan[x as usize].sample(rng);
            for _ in 0..fan_in {
                v += src[rng.random_range(0..src.len())];
            }
            v + dev.sample(dev_rng)
        })
    };
    Population {
        samples0: side(0),
        samples1: side(1),
    }
}

/// Check-node update with parity-consistent labels: for an output destined
/// to bit `x`, `dc - 2` input labels are uniform and the last one makes the
/// XOR equal `x`. Returns the population and the clamp count.
pub(crate) fn cn_step<K>(vn: &Population, dc: usize, seed: u64, it: u64, kernel: K) -> (Population, u64)
where
    K: Fn(&[f64]) -> (f64, u32) + Sync,
{
    let clamps = std::sync::atomic::AtomicU64::new(0);
    let side = |x: u8| {
        let mut out = vec![0.0; vn.len()];
        out.par_chunks_mut(CHUNK).enumerate().for_each(|(chunk, slot)| {
            let mut rng = chunk_rng(seed, it, STAGE_CN, x, chunk);
            let mut inputs = vec![0.0; dc - 1];
            let mut local = 0u64;
            for s in slot {
                let mut parity = x;
                for (j, inp) in inputs.iter_mut().enumerate() {
                    let label = if j + 2 < dc {
                        let b = rng.random::<bool>() as u8;
                        parity ^= b;
                        b
                    } else {
                        parity
                    };
                    let src = vn.given(label);
                    *inp = src[rng.random_range(0..src.len())];
                }
                let (v, c) = kernel(&inputs);
                local += c as u64;
                *s = v;
            }
            clamps.fetch_add(local, std::sync::atomic::Ordering::Relaxed);
        });
        out
    };
    let pop = Population {
        samples0: side(0),
        samples1: side(1),
    };
    (pop, clamps.into_inner())
}

fn app_population(cn: &Population, chan: &[Normal<f64>; 2], dv: usize, seed: u64, it: u64) -> Population {
    let side = |x: u8| {
        let src = cn.given(x);
        fill(cn.len(), seed, it, STAGE_APP, x, |rng, _| {
            let mut v = chan[x as usize].sample(rng);
            for _ in 0..dv {
                v += src[rng.random_range(0..src.len())];
            }
            v
        })
    };
    Population {
        samples0: side(0),
        samples1: side(1),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Two-sample Kolmogorov-Smirnov statistic.
    fn ks_statistic(a: &[f64], b: &[f64]) -> f64 {
        let mut a = a.to_vec();
        let mut b = b.to_vec();
        a.sort_by(f64::total_cmp);
        b.sort_by(f64::total_cmp);
        let (mut i, mut j, mut d) = (0, 0, 0.0f64);
        while i < a.len() && j < b.len() {
            let t = a[i].min(b[j]);
            while i < a.len() && a[i] <= t {
                i += 1;
            }
            while j < b.len() && b[j] <= t {
                j += 1;
            }
            d = d.max((i as f64 / a.len() as f64 - j as f64 / b.len() as f64).abs());
        }
        d
    }

    /// Critical value at level 0.01.
    fn ks_critical(n: usize, m: usize) -> f64 {
        1.628 * ((n + m) as f64 / (n * m) as f64).sqrt()
    }

    fn params(sigma2: f64, dev: AdditiveDeviation) -> PopulationParams {
        PopulationParams {
            sigma2,
            dv: 3,
            dc: 6,
            iterations: 30,
            deviation: dev,
            population: 20_000,
            seed: 7,
        }
    }

    #[test]
    fn phi_is_an_involution() {
        for x in [0.01, 0.3, 1.0, 4.0, 12.0] {
            assert!((phi(phi(x)) - x).abs() < 1e-9 * x.max(1.0), "{x}");
            assert!((phi(x) + (x / 2.0).tanh().ln()).abs() < 1e-12);
        }
        assert!((phi(MAX_MAGNITUDE) - 2.0 * (-MAX_MAGNITUDE).exp()).abs() < 1e-30);
    }

    #[test]
    fn bp_check_matches_tanh_rule() {
        let inputs = [1.2, -0.7, 2.5, 0.4, -3.0];
        let prod: f64 = inputs.iter().map(|&m: &f64| (m / 2.0).tanh()).product();
        let (out, clamps) = bp_check(&inputs);
        assert!((out - 2.0 * prod.atanh()).abs() < 1e-12);
        assert_eq!(clamps, 0);
        let (zero, clamps) = bp_check(&[0.0, 1.0]);
        assert!(zero.abs() < 1e-14);
        assert_eq!(clamps, 1);
        let (big, clamps) = bp_check(&[400.0, 300.0]);
        assert!(big.is_finite() && big > 40.0);
        assert_eq!(clamps, 2);
    }

    #[test]
    fn noiseless_converges_below_threshold() {
        let r = population_de_run_full(&params(0.6, AdditiveDeviation::none())).unwrap();
        let pe = &r.result.pe;
        assert!(pe[0] > 0.01);
        assert!(*pe.last().unwrap() < 1e-4, "{pe:?}");
        let se = r.result.pe_std_err.as_ref().unwrap();
        assert!(se.iter().all(|&s| s <= 1.0 / (20_000f64).sqrt()));
    }

    #[test]
    fn noiseless_stalls_above_threshold() {
        let r = population_de_run(1.2, 3, 6, 30, AdditiveDeviation::none(), 20_000, 1).unwrap();
        assert!(r.final_pe() > 0.05);
    }

    #[test]
    fn symmetric_deviation_gives_mirrored_populations() {
        let mut p = params(0.8, AdditiveDeviation::Gaussian { mean: 0.0, var: 0.5 });
        p.iterations = 8;
        let r = population_de_run_full(&p).unwrap();
        let mirrored: Vec<f64> = r.vn.samples1.iter().map(|v| -v).collect();
        let d = ks_statistic(&r.vn.samples0, &mirrored);
        assert!(d < ks_critical(p.population, p.population), "KS {d}");
    }

    #[test]
    fn ks_detects_an_asymmetric_deviation() {
        let mut p = params(0.8, AdditiveDeviation::ChiSquare { dof: 2.0, scale: 1.0, shift: 0.0 });
        p.iterations = 3;
        let r = population_de_run_full(&p).unwrap();
        let mirrored: Vec<f64> = r.vn.samples1.iter().map(|v| -v).collect();
        assert!(ks_statistic(&r.vn.samples0, &mirrored) > ks_critical(p.population, p.population));
    }

    #[test]
    fn constant_shift_moves_every_vn_message() {
        let chan = channel_laws(0.8);
        let cn = {
            let mut p = params(0.8, AdditiveDeviation::none());
            p.iterations = 3;
            population_de_run_full(&p).unwrap().cn
        };
        let c = 0.37;
        let base = vn_step(&cn, &chan, 2, &AdditiveDeviation::none().sampler().unwrap(), 11, 5);
        let shifted = vn_step(&cn, &chan, 2, &AdditiveDeviation::constant(c).sampler().unwrap(), 11, 5);
        for x in 0..2u8 {
            for (a, b) in base.given(x).iter().zip(shifted.given(x)) {
                assert!((b - a - c).abs() < 1e-12);
            }
        }
        // first iteration of full runs agrees as well: check inputs are all zero
        let mut p = params(0.8, AdditiveDeviation::none());
        p.iterations = 1;
        let a = population_de_run_full(&p).unwrap().vn;
        p.deviation = AdditiveDeviation::constant(c);
        let b = population_de_run_full(&p).unwrap().vn;
        assert!(a.samples0.iter().zip(&b.samples0).all(|(x, y)| (y - x - c).abs() < 1e-12));
    }

    /// With values in {-1, 0, 1} and the sign-product kernel the sampled check
    /// output must follow the parity-conditioned mixture, which is enumerated
    /// here over all label and value tuples.
    #[test]
    fn parity_labels_reproduce_discrete_check_mixture() {
        let dc = 4;
        let law0 = [0.15, 0.25, 0.60]; // P(-1), P(0), P(1) given bit 0
        let law1 = [0.50, 0.30, 0.20];
        let n = 200_000;
        let mut rng = stream_rng(3, &[]);
        let mut draw = |law: &[f64; 3]| {
            let u: f64 = rng.random();
            if u < law[0] {
                -1.0
            } else if u < law[0] + law[1] {
                0.0
            } else {
                1.0
            }
        };
        let vn = Population {
            samples0: (0..n).map(|_| draw(&law0)).collect(),
            samples1: (0..n).map(|_| draw(&law1)).collect(),
        };
        let kernel = |s: &[f64]| (s.iter().product::<f64>(), 0u32);
        let (out, _) = cn_step(&vn, dc, 9, 0, kernel);

        for x in 0..2u8 {
            let mut expect = [0.0; 3];
            let k = dc - 1;
            for labels in 0u32..(1 << k) {
                let parity = (labels.count_ones() & 1) as u8;
                if parity != x {
                    continue;
                }
                for values in 0..3usize.pow(k as u32) {
                    let (mut prob, mut prod, mut rest) = (1.0, 1i32, values);
                    for j in 0..k {
                        let idx = rest % 3;
                        rest /= 3;
                        let law = if labels >> j & 1 == 0 { &law0 } else { &law1 };
                        prob *= law[idx];
                        prod *= idx as i32 - 1;
                    }
                    expect[(prod + 1) as usize] += prob / (1 << (k - 1)) as f64;
                }
            }
            let s = out.given(x);
            for (cls, &e) in expect.iter().enumerate() {
                let v = cls as f64 - 1.0;
                let got = s.iter().filter(|&&y| y == v).count() as f64 / s.len() as f64;
                let tol = 4.0 * (e * (1.0 - e) / s.len() as f64).sqrt() + 1e-9;
                assert!((got - e).abs() < tol, "x={x} class {v}: {got} vs {e}");
            }
        }
    }

    #[test]
    fn deterministic_given_seed() {
        let mut p = params(0.9, AdditiveDeviation::Gaussian { mean: 0.1, var: 0.2 });
        p.iterations = 4;
        let a = population_de_run_full(&p).unwrap();
        let b = population_de_run_full(&p).unwrap();
        assert_eq!(a, b);
        p.seed += 1;
        assert_ne!(population_de_run_full(&p).unwrap().result.pe, a.result.pe);
    }

    #[test]
    fn rejects_small_population_and_writes_histogram() {
        assert!(population_de_run(0.8, 3, 6, 2, AdditiveDeviation::none(), 100, 0).is_err());
        let pop = Population {
            samples0: vec![0.1, 0.2, 1.1],
            samples1: vec![-0.3, 0.4, 0.6],
        };
        let mut buf = Vec::new();
        pop.write_histogram_csv(&mut buf, 0.5).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "bin_center,density_given0,density_given1");
        assert_eq!(lines.len(), 1 + 4);
        assert_eq!(lines[1], "-0.25,0,0.6666666666666666");
        assert_eq!(pop.error_fraction(0), 0.0);
        assert!((pop.error_fraction(1) - 2.0 / 3.0).abs() < 1e-15);
    }
}
