//! Density evolution of the Gallager B decoder on the BSC with deviations on
//! check-node outputs, tracked separately for codeword bits 0 and 1.

use serde::{Deserialize, Serialize};

use crate::channels::{initial_density, AsymScaling, ChannelModel};
use crate::densities::{error_probability_unchecked, ConditionalDensityPair, DiscreteDensity, MessageAlphabet};
use crate::deviations::{gallager_b_noise, BitFlipModel};
use crate::result::{DeRunResult, RunOptions};
use crate::{Error, Result};

/// Flip thresholds used by the variable nodes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ThresholdSchedule {
    /// Same `(b0, b1)` at every iteration.
    Fixed(usize, usize),
    /// One `(b0, b1)` per iteration; the last entry repeats if the list is short.
    PerIteration(Vec<(usize, usize)>),
}

impl ThresholdSchedule {
    pub fn at(&self, iteration: usize) -> (usize, usize) {
        match self {
            ThresholdSchedule::Fixed(b0, b1) => (*b0, *b1),
            ThresholdSchedule::PerIteration(list) => {
                *list.get(iteration - 1).or(list.last()).expect("nonempty schedule")
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GallagerBParams {
    pub dv: usize,
    pub dc: usize,
    pub iterations: usize,
    pub thresholds: ThresholdSchedule,
}

impl GallagerBParams {
    /// Regular decoder with the same threshold `b` for both channel values.
    pub fn symmetric(dv: usize, dc: usize, iterations: usize, b: usize) -> Result<Self> {
        Self::new(dv, dc, iterations, ThresholdSchedule::Fixed(b, b))
    }

    pub fn new(dv: usize, dc: usize, iterations: usize, thresholds: ThresholdSchedule) -> Result<Self> {
        let p = GallagerBParams {
            dv,
            dc,
            iterations,
            thresholds,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if self.dv < 2 || self.dc < 2 {
            return Err(Error::InvalidParameter("degrees must be at least 2".into()));
        }
        if self.iterations == 0 {
            return Err(Error::InvalidParameter("at least one iteration is required".into()));
        }
        let check = |(b0, b1): (usize, usize)| validate_thresholds(self.dv, b0, b1);
        match &self.thresholds {
            ThresholdSchedule::Fixed(b0, b1) => check((*b0, *b1)),
            ThresholdSchedule::PerIteration(list) if list.is_empty() => {
                Err(Error::InvalidParameter("empty threshold schedule".into()))
            }
            ThresholdSchedule::PerIteration(list) => list.iter().try_for_each(|&b| check(b)),
        }
    }
}

/// Admissible thresholds `ceil(dv/2) ..= dv-1` (just `1` when `dv = 2`).
pub fn threshold_range(dv: usize) -> std::ops::RangeInclusive<usize> {
    dv.div_ceil(2).max(1)..=dv - 1
}

pub fn validate_thresholds(dv: usize, b0: usize, b1: usize) -> Result<()> {
    let range = threshold_range(dv);
    if range.contains(&b0) && range.contains(&b1) {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!(
            "thresholds ({b0}, {b1}) outside {range:?} for dv = {dv}"
        )))
    }
}

pub(crate) fn binom(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

fn binary_pair(one0: f64, one1: f64) -> ConditionalDensityPair {
    let b = MessageAlphabet::Binary;
    let d = |one: f64| {
        let one = one.clamp(0.0, 1.0);
        DiscreteDensity::from_raw(b, vec![1.0 - one, one])
    };
    ConditionalDensityPair {
        given0: d(one0),
        given1: d(one1),
    }
}

fn require_binary(pair: &ConditionalDensityPair) -> Result<()> {
    if pair.alphabet().is_binary() {
        Ok(())
    } else {
        Err(Error::AlphabetMismatch("Gallager B densities must be binary".into()))
    }
}

/// Check-node output densities.
///
/// `Q_x(1) = 2^-(dc-1) sum_{v = x mod 2} C(dc-1, v) (1 - (1 - 2a)^(dc-1-v) (1 - 2b)^v)`
/// with `a = Pv_0(1)` and `b = Pv_1(1)`, where `v` counts neighbours carrying bit 1.
pub fn cn_update(vn: &ConditionalDensityPair, dc: usize) -> Result<ConditionalDensityPair> {
    require_binary(vn)?;
    if dc < 2 {
        return Err(Error::InvalidParameter("check degree must be at least 2".into()));
    }
    Ok(cn_update_raw(vn, dc))
}

fn cn_update_raw(vn: &ConditionalDensityPair, dc: usize) -> ConditionalDensityPair {
    let r0 = 1.0 - 2.0 * vn.given0.at(1);
    let r1 = 1.0 - 2.0 * vn.given1.at(1);
    let n = dc - 1;
    let scale = 0.5f64.powi(n as i32);
    let mut q = [0.0f64; 2];
    for v in 0..=n {
        q[v % 2] += binom(n, v) * (1.0 - r0.powi((n - v) as i32) * r1.powi(v as i32));
    }
    binary_pair(scale * q[0], scale * q[1])
}

/// `sum_{v >= b} C(n, v) r^v (1 - r)^(n - v)`.
pub(crate) fn binomial_tail(n: usize, b: usize, r: f64) -> f64 {
    (b..=n)
        .map(|v| binom(n, v) * r.powi(v as i32) * (1.0 - r).powi((n - v) as i32))
        .sum()
}

/// Variable-node output densities for thresholds `(b0, b1)`.
///
/// A node whose channel bit is 0 sends 1 when at least `b0` of the other
/// `dv - 1` incoming messages are 1; a node whose channel bit is 1 sends 0 when
/// at least `b1` of them are 0.
pub fn vn_update(
    init: &ConditionalDensityPair,
    noisy_cn: &ConditionalDensityPair,
    dv: usize,
    b0: usize,
    b1: usize,
) -> Result<ConditionalDensityPair> {
    require_binary(init)?;
    require_binary(noisy_cn)?;
    validate_thresholds(dv, b0, b1)?;
    Ok(vn_update_raw(init, noisy_cn, dv, b0, b1))
}

pub(crate) fn vn_update_raw(
    init: &ConditionalDensityPair,
    noisy_cn: &ConditionalDensityPair,
    dv: usize,
    b0: usize,
    b1: usize,
) -> ConditionalDensityPair {
    let n = dv - 1;
    let one = |ch: &DiscreteDensity, q: &DiscreteDensity| {
        let q1 = q.at(1);
        ch.at(0) * binomial_tail(n, b0, q1) + ch.at(1) * (1.0 - binomial_tail(n, b1, 1.0 - q1))
    };
    binary_pair(one(&init.given0, &noisy_cn.given0), one(&init.given1, &noisy_cn.given1))
}

/// Error probability of the hard decision taken from the channel bit and all
/// `dv` noisy check messages (majority vote, ties kept at the channel bit).
pub fn app_error(init: &ConditionalDensityPair, noisy_cn: &ConditionalDensityPair, dv: usize) -> f64 {
    let wrong_given = |x: usize| -> f64 {
        let (ch, q) = if x == 0 {
            (&init.given0, &noisy_cn.given0)
        } else {
            (&init.given1, &noisy_cn.given1)
        };
        let ch_wrong = if x == 0 { ch.at(1) } else { ch.at(0) };
        let msg_wrong = if x == 0 { q.at(1) } else { q.at(0) };
        let mut pe = 0.0;
        for w in 0..=dv {
            let pw = binom(dv, w) * msg_wrong.powi(w as i32) * (1.0 - msg_wrong).powi((dv - w) as i32);
            if 2 * (w + 1) >= dv + 1 {
                pe += ch_wrong * pw;
            }
            if 2 * w > dv + 1 {
                pe += (1.0 - ch_wrong) * pw;
            }
        }
        pe
    };
    (0.5 * wrong_given(0) + 0.5 * wrong_given(1)).clamp(0.0, 1.0)
}

/// State handed to an online threshold selector before the variable-node update.
pub struct SelectionContext<'a> {
    pub iteration: usize,
    pub init: &'a ConditionalDensityPair,
    /// Variable-node densities from the previous iteration.
    pub previous_vn: &'a ConditionalDensityPair,
    /// Noisy check-node densities of this iteration.
    pub noisy_cn: &'a ConditionalDensityPair,
    pub previous: Option<(usize, usize)>,
}

/// Outcome of a selector call: the thresholds and whether a fallback was used.
pub type Selection = ((usize, usize), bool);

/// Runs DE with thresholds chosen online by `select`.
pub fn run_with<F>(
    init: &ConditionalDensityPair,
    dv: usize,
    dc: usize,
    iterations: usize,
    deviation: BitFlipModel,
    options: RunOptions,
    mut select: F,
) -> Result<DeRunResult>
where
    F: FnMut(&SelectionContext<'_>) -> Selection,
{
    require_binary(init)?;
    if dv < 2 || dc < 2 || iterations == 0 {
        return Err(Error::InvalidParameter("invalid degrees or iteration count".into()));
    }
    let mut init = init.clone();
    if options.all_zero_reference {
        init = ConditionalDensityPair::symmetric_from(init.given0);
    }
    let mut result = DeRunResult::with_capacity(iterations);
    let mut schedule = Vec::with_capacity(iterations);
    let mut history = options.record_history.then(Vec::new);
    let mut vn = init.clone();
    let mut noisy_cn = None;
    let mut previous = None;
    for l in 1..=iterations {
        let cn = cn_update_raw(&vn, dc);
        let qn = gallager_b_noise(&cn, deviation)?;
        let ((b0, b1), fallback) = select(&SelectionContext {
            iteration: l,
            init: &init,
            previous_vn: &vn,
            noisy_cn: &qn,
            previous,
        });
        validate_thresholds(dv, b0, b1)?;
        if fallback {
            result.fallback_iterations.push(l);
        }
        schedule.push((b0, b1));
        previous = Some((b0, b1));

        let mut next = vn_update_raw(&init, &qn, dv, b0, b1);
        result.mass_drift = result.mass_drift.max(next.renormalize());
        if options.all_zero_reference {
            next = ConditionalDensityPair::symmetric_from(next.given0);
        }
        result.err_given0.push(next.given0.error_mass_given0());
        result.err_given1.push(next.given1.error_mass_given1());
        result.pe.push(error_probability_unchecked(&next));
        result.pe_app.push(app_error(&init, &qn, dv));
        if let Some(h) = history.as_mut() {
            h.push(next.clone());
        }
        vn = next;
        noisy_cn = Some(qn);
    }
    result.schedule = Some(schedule);
    result.final_vn = Some(vn);
    result.final_cn = noisy_cn;
    result.history = history;
    Ok(result)
}

/// Runs DE on a BSC with crossover `p0` and the schedule in `params`.
pub fn run(p0: f64, params: &GallagerBParams, deviation: BitFlipModel) -> Result<DeRunResult> {
    run_opts(p0, params, deviation, RunOptions::default())
}

pub fn run_opts(
    p0: f64,
    params: &GallagerBParams,
    deviation: BitFlipModel,
    options: RunOptions,
) -> Result<DeRunResult> {
    params.validate()?;
    let init = initial_density(ChannelModel::bsc(p0)?, MessageAlphabet::Binary, AsymScaling::unit())?;
    let schedule = params.thresholds.clone();
    run_with(
        &init,
        params.dv,
        params.dc,
        params.iterations,
        deviation,
        options,
        |ctx| (schedule.at(ctx.iteration), false),
    )
}

/// Conventional all-zero-codeword DE driven by the same updates.
pub fn run_reference(p0: f64, params: &GallagerBParams, deviation: BitFlipModel) -> Result<DeRunResult> {
    run_opts(
        p0,
        params,
        deviation,
        RunOptions {
            all_zero_reference: true,
            record_history: false,
        },
    )
}
