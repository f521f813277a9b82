//! Decoder parameter selection: the online `(b0, b1)` rule for Gallager B and
//! the exhaustive scaling/offset search for quantized Min-Sum.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analysis::{threshold_search, ThresholdQuery, ThresholdResult};
use crate::channels::{initial_density, snr_db_to_sigma2, AsymScaling, ChannelModel};
use crate::de_gallager_b::{self, binom, threshold_range, vn_update_raw, Selection, SelectionContext};
use crate::de_minsum::{self, MinSumParams};
use crate::densities::{ConditionalDensityPair, MessageAlphabet};
use crate::deviations::BitFlipModel;
use crate::result::{DeRunResult, RunOptions};
use crate::{Error, Result};

/// How Gallager B thresholds are chosen at each iteration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum GbRule {
    Fixed { b0: usize, b1: usize },
    /// Smallest `b` with `(b, b)` satisfying both inequalities.
    Symmetric,
    /// Minimal `b0 + b1` among admissible pairs, then the smallest gap.
    Asymmetric,
}

/// Both sides of the two selection inequalities in product form:
/// `A0 <= B0` and `A1 >= B1` with
/// `A_x = Pinit_x(0) C(dv-1, b0) q^b0 (1-q)^(dv-1-b0)` and
/// `B_x = Pinit_x(1) C(dv-1, b1) (1-q)^b1 q^(dv-1-b1)`, `q = Q~_x(1)`.
pub fn inequality_sides(
    init: &ConditionalDensityPair,
    noisy_cn: &ConditionalDensityPair,
    dv: usize,
    b0: usize,
    b1: usize,
) -> [(f64, f64); 2] {
    let n = dv - 1;
    let side = |x: u8| {
        let (ch, q) = if x == 0 {
            (&init.given0, noisy_cn.given0.at(1))
        } else {
            (&init.given1, noisy_cn.given1.at(1))
        };
        let a = ch.at(0) * binom(n, b0) * q.powi(b0 as i32) * (1.0 - q).powi((n - b0) as i32);
        let b = ch.at(1) * binom(n, b1) * (1.0 - q).powi(b1 as i32) * q.powi((n - b1) as i32);
        (a, b)
    };
    [side(0), side(1)]
}

pub fn satisfies_inequalities(
    init: &ConditionalDensityPair,
    noisy_cn: &ConditionalDensityPair,
    dv: usize,
    b0: usize,
    b1: usize,
) -> bool {
    let [(a0, b0s), (a1, b1s)] = inequality_sides(init, noisy_cn, dv, b0, b1);
    a0 <= b0s && a1 >= b1s
}

/// `|P_0(1) - P_1(0)|` after a VN update with `(b0, b1)`.
pub fn decision_gap(init: &ConditionalDensityPair, noisy_cn: &ConditionalDensityPair, dv: usize, b0: usize, b1: usize) -> f64 {
    let v = vn_update_raw(init, noisy_cn, dv, b0, b1);
    (v.given0.at(1) - v.given1.at(0)).abs()
}

/// Asymmetric selection from the iteration's noisy check densities. Falls
/// back to `(dv-1, dv-1)` (flagged) when no pair satisfies both inequalities.
pub fn select_gb_thresholds(ctx: &SelectionContext<'_>, dv: usize) -> Selection {
    let range = threshold_range(dv);
    let mut best: Option<((usize, usize), usize, f64)> = None;
    for b0 in range.clone() {
        for b1 in range.clone() {
            if !satisfies_inequalities(ctx.init, ctx.noisy_cn, dv, b0, b1) {
                continue;
            }
            let sum = b0 + b1;
            let better = match best {
                None => true,
                Some((_, s, _)) if sum < s => true,
                Some((_, s, _)) if sum > s => false,
                Some((_, _, g)) => decision_gap(ctx.init, ctx.noisy_cn, dv, b0, b1) < g,
            };
            if better {
                best = Some(((b0, b1), sum, decision_gap(ctx.init, ctx.noisy_cn, dv, b0, b1)));
            }
        }
    }
    match best {
        Some((pair, _, _)) => (pair, false),
        None => ((dv - 1, dv - 1), true),
    }
}

/// Single-threshold selection: the smallest `b` for which `(b, b)` passes.
pub fn select_gb_symmetric(ctx: &SelectionContext<'_>, dv: usize) -> Selection {
    threshold_range(dv)
        .find(|&b| satisfies_inequalities(ctx.init, ctx.noisy_cn, dv, b, b))
        .map_or(((dv - 1, dv - 1), true), |b| ((b, b), false))
}

/// Gallager B DE on a BSC with thresholds chosen by `rule`.
pub fn run_gallager_b(
    p0: f64,
    dv: usize,
    dc: usize,
    iterations: usize,
    rule: GbRule,
    deviation: BitFlipModel,
    options: RunOptions,
) -> Result<DeRunResult> {
    let init = initial_density(ChannelModel::bsc(p0)?, MessageAlphabet::Binary, AsymScaling::unit())?;
    if let GbRule::Fixed { b0, b1 } = rule {
        de_gallager_b::validate_thresholds(dv, b0, b1)?;
    }
    de_gallager_b::run_with(&init, dv, dc, iterations, deviation, options, |ctx| match rule {
        GbRule::Fixed { b0, b1 } => ((b0, b1), false),
        GbRule::Symmetric => select_gb_symmetric(ctx, dv),
        GbRule::Asymmetric => select_gb_thresholds(ctx, dv),
    })
}

/// BSC threshold under a threshold-selection rule.
pub fn gallager_b_rule_threshold(
    dv: usize,
    dc: usize,
    iterations: usize,
    rule: GbRule,
    deviation: BitFlipModel,
    query: &ThresholdQuery,
    options: RunOptions,
) -> Result<ThresholdResult> {
    threshold_search(query, |p| {
        Ok(run_gallager_b(p, dv, dc, iterations, rule, deviation, options)?.final_pe())
    })
}

/// Candidate values of the Min-Sum search.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MsGrid {
    pub gammas: Vec<f64>,
    pub lambdas: Vec<i32>,
}

impl Default for MsGrid {
    fn default() -> Self {
        MsGrid {
            gammas: (1..=20).map(|k| k as f64 * 0.05).collect(),
            lambdas: vec![0, 1, 2],
        }
    }
}

impl MsGrid {
    pub fn validate(&self) -> Result<()> {
        if self.gammas.is_empty() || self.lambdas.is_empty() {
            return Err(Error::InvalidParameter("empty search grid".into()));
        }
        if self.gammas.iter().any(|g| !(*g > 0.0 && g.is_finite())) {
            return Err(Error::InvalidParameter("grid scalings must be positive".into()));
        }
        if self.lambdas.iter().any(|&l| l < 0) {
            return Err(Error::InvalidParameter("grid offsets must be nonnegative".into()));
        }
        Ok(())
    }

    /// Tuples in lexicographic order; the symmetric space ties each pair.
    pub fn tuples(&self, symmetric: bool) -> Vec<MsTuple> {
        let mut gammas = self.gammas.clone();
        gammas.sort_by(f64::total_cmp);
        gammas.dedup();
        let mut lambdas = self.lambdas.clone();
        lambdas.sort_unstable();
        lambdas.dedup();
        let mut out = Vec::new();
        for &g0 in &gammas {
            for &g1 in &gammas {
                if symmetric && g1 != g0 {
                    continue;
                }
                for &lp in &lambdas {
                    for &lm in &lambdas {
                        if symmetric && lm != lp {
                            continue;
                        }
                        out.push(MsTuple {
                            gamma0: g0,
                            gamma1: g1,
                            lambda_plus: lp,
                            lambda_minus: lm,
                        });
                    }
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MsTuple {
    pub gamma0: f64,
    pub gamma1: f64,
    pub lambda_plus: i32,
    pub lambda_minus: i32,
}

impl MsTuple {
    pub fn apply(&self, base: &MinSumParams) -> Result<MinSumParams> {
        base.clone().with_asymmetry(self.gamma0, self.gamma1, self.lambda_plus, self.lambda_minus)
    }
}

/// Ranking criterion of the Min-Sum search.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum MsSearchMode {
    /// Lowest SNR threshold wins.
    Threshold { query: ThresholdQuery },
    /// Lowest last-iteration message Pe at a fixed SNR wins.
    PeAtSnr { snr_db: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MsEvaluation {
    pub tuple: MsTuple,
    /// Threshold (dB) or Pe, depending on the mode; `None` when the tuple failed.
    pub score: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MsSearchResult {
    pub best: MsTuple,
    pub score: f64,
    pub mode: MsSearchMode,
    pub symmetric: bool,
    pub evaluations: Vec<MsEvaluation>,
}

impl MsSearchResult {
    pub fn failures(&self) -> usize {
        self.evaluations.iter().filter(|e| e.score.is_none()).count()
    }

    /// Rows `gamma0,gamma1,lambda_plus,lambda_minus,score,mode`.
    pub fn write_csv<W: std::io::Write>(&self, writer: W) -> Result<()> {
        let mode = match self.mode {
            MsSearchMode::Threshold { .. } => "threshold_db".to_string(),
            MsSearchMode::PeAtSnr { snr_db } => format!("pe_at_{snr_db}db"),
        };
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["gamma0", "gamma1", "lambda_plus", "lambda_minus", "score", "mode"])?;
        for e in &self.evaluations {
            w.write_record([
                e.tuple.gamma0.to_string(),
                e.tuple.gamma1.to_string(),
                e.tuple.lambda_plus.to_string(),
                e.tuple.lambda_minus.to_string(),
                e.score.map(|s| s.to_string()).unwrap_or_else(|| "nan".into()),
                mode.clone(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Scores one tuple under `mode`.
pub fn score_ms_tuple(
    tuple: &MsTuple,
    base: &MinSumParams,
    deviation: BitFlipModel,
    rate: f64,
    mode: &MsSearchMode,
) -> Result<f64> {
    let params = tuple.apply(base)?;
    match mode {
        MsSearchMode::Threshold { query } => {
            Ok(crate::analysis::minsum_threshold(&params, deviation, rate, query, false)?.threshold)
        }
        MsSearchMode::PeAtSnr { snr_db } => {
            Ok(de_minsum::run(snr_db_to_sigma2(*snr_db, rate)?, &params, deviation)?.final_pe())
        }
    }
}

/// Exhaustive search; every tuple is scored in parallel and the lowest score
/// wins, earlier tuples winning exact ties.
pub fn grid_search_ms(
    grid: &MsGrid,
    symmetric: bool,
    base: &MinSumParams,
    deviation: BitFlipModel,
    rate: f64,
    mode: MsSearchMode,
) -> Result<MsSearchResult> {
    grid.validate()?;
    base.validate()?;
    let tuples = grid.tuples(symmetric);
    let evaluations: Vec<MsEvaluation> = tuples
        .par_iter()
        .map(|t| match score_ms_tuple(t, base, deviation, rate, &mode) {
            Ok(s) => MsEvaluation {
                tuple: *t,
                score: Some(s),
                error: None,
            },
            Err(e) => MsEvaluation {
                tuple: *t,
                score: None,
                error: Some(e.to_string()),
            },
        })
        .collect();
    let mut best: Option<(MsTuple, f64)> = None;
    for e in &evaluations {
        if let Some(s) = e.score {
            if best.is_none_or(|(_, b)| s < b) {
                best = Some((e.tuple, s));
            }
        }
    }
    let (best, score) = best.ok_or(Error::NoConvergence {
        epsilon: match mode {
            MsSearchMode::Threshold { query } => query.epsilon,
            MsSearchMode::PeAtSnr { .. } => f64::NAN,
        },
    })?;
    Ok(MsSearchResult {
        best,
        score,
        mode,
        symmetric,
        evaluations,
    })
}
