//! Threshold search, the finite-length BER predictor and irregular-ensemble
//! density evolution over any discrete engine.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channels::{awgn_crossover, snr_db_to_sigma2};
use crate::codes::DegreeDistribution;
use crate::de_gallager_b::{self, GallagerBParams};
use crate::de_minsum::{self, MinSumDeviations, MinSumParams};
use crate::densities::{error_probability_unchecked, mix, ConditionalDensityPair, DiscreteDensity};
use crate::deviations::{gallager_b_noise, BitFlipModel};
use crate::result::DeRunResult;
use crate::{Error, Result};

/// Which end of the search interval is the good channel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Orientation {
    /// Pe grows with the parameter (BSC crossover, noise variance): the
    /// threshold is the largest good value.
    GoodBelow,
    /// Pe falls with the parameter (SNR): the threshold is the smallest good value.
    GoodAbove,
}

pub const DEFAULT_EPSILON: f64 = 1e-3;
pub const DEFAULT_BSC_RESOLUTION: f64 = 1e-4;
pub const DEFAULT_SNR_RESOLUTION: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThresholdQuery {
    /// A parameter is good when its Pe is strictly below this bound.
    pub epsilon: f64,
    pub lo: f64,
    pub hi: f64,
    pub resolution: f64,
    pub orientation: Orientation,
    /// Extra evenly spaced probes used to detect several crossings; 0 disables.
    #[serde(default)]
    pub scan_points: usize,
}

impl ThresholdQuery {
    /// Largest BSC crossover in `[0, 0.5]` with Pe below `epsilon`.
    pub fn bsc(epsilon: f64) -> Self {
        ThresholdQuery {
            epsilon,
            lo: 0.0,
            hi: 0.5,
            resolution: DEFAULT_BSC_RESOLUTION,
            orientation: Orientation::GoodBelow,
            scan_points: 0,
        }
    }

    /// Smallest SNR (dB) in `[lo, hi]` with Pe below `epsilon`.
    pub fn snr_db(epsilon: f64, lo: f64, hi: f64) -> Self {
        ThresholdQuery {
            epsilon,
            lo,
            hi,
            resolution: DEFAULT_SNR_RESOLUTION,
            orientation: Orientation::GoodAbove,
            scan_points: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return Err(Error::InvalidParameter(format!("epsilon {} outside (0, 1)", self.epsilon)));
        }
        if !(self.lo < self.hi) || !self.lo.is_finite() || !self.hi.is_finite() {
            return Err(Error::InvalidParameter(format!("interval [{}, {}]", self.lo, self.hi)));
        }
        if !(self.resolution > 0.0) {
            return Err(Error::InvalidParameter(format!("resolution {}", self.resolution)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdResult {
    /// Good end of the final bracket.
    pub threshold: f64,
    /// Bad end of the final bracket (within `resolution` of `threshold`).
    pub bad_side: f64,
    pub pe_at_threshold: f64,
    pub pe_at_bad_side: f64,
    pub evaluations: usize,
    /// Number of good/bad alternations seen on the scan grid, when scanned.
    pub crossings: Option<usize>,
    pub flags: Vec<String>,
}

/// Bisection for the threshold of `pe`. Fails with `NoCrossing` unless the
/// good end of the interval is good and the bad end is bad.
pub fn threshold_search<F>(query: &ThresholdQuery, mut pe: F) -> Result<ThresholdResult>
where
    F: FnMut(f64) -> Result<f64>,
{
    query.validate()?;
    let (mut good, mut bad) = match query.orientation {
        Orientation::GoodBelow => (query.lo, query.hi),
        Orientation::GoodAbove => (query.hi, query.lo),
    };
    let mut evaluations = 0;
    let mut eval = |x: f64, evaluations: &mut usize| -> Result<f64> {
        *evaluations += 1;
        pe(x)
    };
    let mut pe_good = eval(good, &mut evaluations)?;
    let mut pe_bad = eval(bad, &mut evaluations)?;
    if !(pe_good < query.epsilon) || pe_bad < query.epsilon {
        return Err(Error::NoCrossing {
            lo: query.lo,
            hi: query.hi,
            epsilon: query.epsilon,
        });
    }
    let mut flags = Vec::new();
    let crossings = if query.scan_points > 0 {
        let k = query.scan_points + 1;
        let mut states = vec![true];
        for i in 1..k {
            let x = good + (bad - good) * i as f64 / k as f64;
            states.push(eval(x, &mut evaluations)? < query.epsilon);
        }
        states.push(false);
        let c = states.windows(2).filter(|w| w[0] != w[1]).count();
        if c > 1 {
            flags.push(format!("Pe crosses epsilon {c} times on the scan grid"));
        }
        Some(c)
    } else {
        None
    };
    while (bad - good).abs() > query.resolution {
        let mid = 0.5 * (good + bad);
        let p = eval(mid, &mut evaluations)?;
        if p < query.epsilon {
            good = mid;
            pe_good = p;
        } else {
            bad = mid;
            pe_bad = p;
        }
    }
    Ok(ThresholdResult {
        threshold: good,
        bad_side: bad,
        pe_at_threshold: pe_good,
        pe_at_bad_side: pe_bad,
        evaluations,
        crossings,
        flags,
    })
}

/// BSC threshold of a fixed-schedule Gallager B decoder, measured on the
/// last-iteration message Pe.
pub fn gallager_b_threshold(
    params: &GallagerBParams,
    deviation: BitFlipModel,
    query: &ThresholdQuery,
    all_zero_reference: bool,
) -> Result<ThresholdResult> {
    threshold_search(query, |p| {
        let r = if all_zero_reference {
            de_gallager_b::run_reference(p, params, deviation)?
        } else {
            de_gallager_b::run(p, params, deviation)?
        };
        Ok(r.final_pe())
    })
}

/// SNR threshold (dB) of a Min-Sum decoder at code rate `rate`.
pub fn minsum_threshold(
    params: &MinSumParams,
    deviation: BitFlipModel,
    rate: f64,
    query: &ThresholdQuery,
    all_zero_reference: bool,
) -> Result<ThresholdResult> {
    threshold_search(query, |snr| {
        let s2 = snr_db_to_sigma2(snr, rate)?;
        let r = if all_zero_reference {
            de_minsum::run_reference(s2, params, deviation)?
        } else {
            de_minsum::run(s2, params, deviation)?
        };
        Ok(r.final_pe())
    })
}

/// Asymptotic Pe sampled on a grid of crossover probabilities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PeCurveRepr")]
pub struct PeCurve {
    z: Vec<f64>,
    pe: Vec<f64>,
    #[serde(skip)]
    slopes: Vec<f64>,
}

impl PeCurve {
    pub fn new(z: Vec<f64>, pe: Vec<f64>) -> Result<Self> {
        if z.len() != pe.len() || z.is_empty() {
            return Err(Error::InvalidParameter("curve grid and values differ in length".into()));
        }
        if z.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::InvalidParameter("curve grid must be strictly increasing".into()));
        }
        if pe.iter().any(|p| !(0.0..=1.0).contains(p)) {
            return Err(Error::InvalidParameter("curve values must lie in [0, 1]".into()));
        }
        let slopes = log_slopes(&z, &pe);
        Ok(PeCurve { z, pe, slopes })
    }

    /// Evaluates `f` on every grid point in parallel.
    pub fn build<F>(z: Vec<f64>, f: F) -> Result<Self>
    where
        F: Fn(f64) -> Result<f64> + Sync,
    {
        let pe = z.par_iter().map(|&x| f(x)).collect::<Result<Vec<_>>>()?;
        Self::new(z, pe)
    }

    pub fn grid(&self) -> &[f64] {
        &self.z
    }

    pub fn values(&self) -> &[f64] {
        &self.pe
    }

    pub fn covers(&self, lo: f64, hi: f64) -> bool {
        self.z[0] <= lo && hi <= *self.z.last().expect("nonempty")
    }

    /// Monotone cubic interpolation of `ln Pe`; segments touching a zero value
    /// are linear in Pe. Outside the grid the end values are held.
    pub fn eval(&self, x: f64) -> f64 {
        let n = self.z.len();
        if n == 1 || x <= self.z[0] {
            return self.pe[0];
        }
        if x >= self.z[n - 1] {
            return self.pe[n - 1];
        }
        let i = self.z.partition_point(|&g| g <= x) - 1;
        let (x0, x1) = (self.z[i], self.z[i + 1]);
        let (p0, p1) = (self.pe[i], self.pe[i + 1]);
        let t = (x - x0) / (x1 - x0);
        if p0 <= 0.0 || p1 <= 0.0 {
            return p0 + t * (p1 - p0);
        }
        let h = x1 - x0;
        let (y0, y1) = (p0.ln(), p1.ln());
        let (m0, m1) = (self.slopes()[i], self.slopes()[i + 1]);
        let t2 = t * t;
        let t3 = t2 * t;
        let y = (2.0 * t3 - 3.0 * t2 + 1.0) * y0
            + (t3 - 2.0 * t2 + t) * h * m0
            + (-2.0 * t3 + 3.0 * t2) * y1
            + (t3 - t2) * h * m1;
        y.exp().clamp(0.0, 1.0)
    }

    fn slopes(&self) -> &[f64] {
        &self.slopes
    }

}

#[derive(Deserialize)]
struct PeCurveRepr {
    z: Vec<f64>,
    pe: Vec<f64>,
}

impl TryFrom<PeCurveRepr> for PeCurve {
    type Error = Error;
    fn try_from(r: PeCurveRepr) -> Result<Self> {
        PeCurve::new(r.z, r.pe)
    }
}

/// Fritsch-Carlson tangents of `ln pe`; zero wherever a neighbour is zero.
fn log_slopes(z: &[f64], pe: &[f64]) -> Vec<f64> {
    let n = z.len();
    if n < 2 {
        return vec![0.0; n];
    }
    let y: Vec<f64> = pe.iter().map(|&p| if p > 0.0 { p.ln() } else { f64::NAN }).collect();
    let d: Vec<f64> = (0..n - 1).map(|i| (y[i + 1] - y[i]) / (z[i + 1] - z[i])).collect();
    let mut m = vec![0.0; n];
    m[0] = d[0];
    m[n - 1] = d[n - 2];
    for i in 1..n - 1 {
        m[i] = if d[i - 1] * d[i] <= 0.0 || d[i - 1].is_nan() || d[i].is_nan() {
            0.0
        } else {
            0.5 * (d[i - 1] + d[i])
        };
    }
    for i in 0..n - 1 {
        if d[i].is_nan() {
            m[i] = 0.0;
            m[i + 1] = 0.0;
            continue;
        }
        if d[i] == 0.0 {
            m[i] = 0.0;
            m[i + 1] = 0.0;
            continue;
        }
        let a = m[i] / d[i];
        let b = m[i + 1] / d[i];
        let s = a * a + b * b;
        if s > 9.0 {
            let tau = 3.0 / s.sqrt();
            m[i] = tau * a * d[i];
            m[i + 1] = tau * b * d[i];
        }
    }
    for v in m.iter_mut() {
        if !v.is_finite() {
            *v = 0.0;
        }
    }
    m
}

/// Operating point for the finite-length predictor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ChannelPoint {
    Bsc { p: f64 },
    /// BPSK-AWGN, mapped to its hard-decision crossover.
    Awgn { sigma2: f64 },
}

impl ChannelPoint {
    pub fn crossover(&self) -> f64 {
        match *self {
            ChannelPoint::Bsc { p } => p,
            ChannelPoint::Awgn { sigma2 } => awgn_crossover(sigma2),
        }
    }
}

/// Composite Simpson panels used by [`finite_length_pe`].
pub const FL_PANELS: usize = 1024;
const FL_WIDTH_SD: f64 = 8.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FlPrediction {
    pub pe: f64,
    /// Crossover the channel is centred on.
    pub p0: f64,
    /// Standard deviation of the observed crossover.
    pub sd: f64,
    /// The integration range left the curve grid and end values were held.
    pub clamped: bool,
}

/// `int Pe(z) N(z; p0, p0 (1 - p0) / n) dz` over `[0, 1/2]`.
///
/// For AWGN points the observed crossover is modelled in the same way, and
/// the curve is expected on the crossover axis (DE evaluated at the noise
/// variance whose hard-decision crossover is `z`).
pub fn finite_length_pe(curve: &PeCurve, n: usize, point: ChannelPoint) -> Result<FlPrediction> {
    finite_length_pe_with(curve, n, point, FL_PANELS)
}

pub fn finite_length_pe_with(curve: &PeCurve, n: usize, point: ChannelPoint, panels: usize) -> Result<FlPrediction> {
    if n == 0 {
        return Err(Error::InvalidParameter("code length must be positive".into()));
    }
    let p0 = point.crossover();
    if !(0.0..=0.5).contains(&p0) {
        return Err(Error::InvalidParameter(format!("crossover {p0} outside [0, 1/2]")));
    }
    let sd = (p0 * (1.0 - p0) / n as f64).sqrt();
    let lo = (p0 - FL_WIDTH_SD * sd).max(0.0);
    let hi = (p0 + FL_WIDTH_SD * sd).min(0.5);
    let clamped = !curve.covers(lo, hi);
    if clamped {
        log::warn!(
            "finite-length integral over [{lo:.3e}, {hi:.3e}] leaves the curve grid; end values held"
        );
    }
    if sd == 0.0 || hi - lo <= f64::EPSILON * p0.max(1e-300) {
        return Ok(FlPrediction {
            pe: curve.eval(p0),
            p0,
            sd,
            clamped,
        });
    }
    let panels = panels.max(2) + panels % 2;
    let h = (hi - lo) / panels as f64;
    let norm = 1.0 / (sd * (2.0 * std::f64::consts::PI).sqrt());
    let f = |z: f64| {
        let u = (z - p0) / sd;
        curve.eval(z) * norm * (-0.5 * u * u).exp()
    };
    let mut acc = f(lo) + f(hi);
    for k in 1..panels {
        let w = if k % 2 == 1 { 4.0 } else { 2.0 };
        acc += w * f(lo + k as f64 * h);
    }
    Ok(FlPrediction {
        pe: (acc * h / 3.0).clamp(0.0, 1.0),
        p0,
        sd,
        clamped,
    })
}

/// Per-degree updates of a discrete engine, the building blocks of
/// irregular-ensemble DE.
pub trait DensityEngine {
    /// Variable-to-check densities of a degree-`dv` node, deviations included.
    fn vn_step(&self, init: &ConditionalDensityPair, cn: &ConditionalDensityPair, dv: usize) -> Result<ConditionalDensityPair>;
    /// Check-to-variable densities of a degree-`dc` node, deviations included.
    fn cn_step(&self, vn: &ConditionalDensityPair, dc: usize) -> Result<ConditionalDensityPair>;
    /// Decision error probability of a degree-`dv` node.
    fn app_error(&self, init: &ConditionalDensityPair, cn: &ConditionalDensityPair, dv: usize) -> Result<f64>;
    /// Check-to-variable densities before the first variable update, or
    /// `None` when an iteration starts at the checks from the channel messages.
    fn initial_cn(&self, init: &ConditionalDensityPair) -> Result<Option<ConditionalDensityPair>>;
}

/// Gallager B with per-degree thresholds (default: the smallest strict
/// majority of the other `dv - 1` messages, clipped to the admissible range).
#[derive(Debug, Clone, PartialEq)]
pub struct GallagerBEngine {
    pub deviation: BitFlipModel,
    pub thresholds: BTreeMap<usize, (usize, usize)>,
}

impl GallagerBEngine {
    pub fn new(deviation: BitFlipModel) -> Self {
        GallagerBEngine {
            deviation,
            thresholds: BTreeMap::new(),
        }
    }

    pub fn thresholds_for(&self, dv: usize) -> (usize, usize) {
        self.thresholds.get(&dv).copied().unwrap_or_else(|| {
            let r = de_gallager_b::threshold_range(dv);
            let b = (dv / 2 + 1).clamp(*r.start(), *r.end());
            (b, b)
        })
    }
}

impl DensityEngine for GallagerBEngine {
    fn vn_step(&self, init: &ConditionalDensityPair, cn: &ConditionalDensityPair, dv: usize) -> Result<ConditionalDensityPair> {
        let (b0, b1) = self.thresholds_for(dv);
        de_gallager_b::vn_update(init, cn, dv, b0, b1)
    }

    fn cn_step(&self, vn: &ConditionalDensityPair, dc: usize) -> Result<ConditionalDensityPair> {
        gallager_b_noise(&de_gallager_b::cn_update(vn, dc)?, self.deviation)
    }

    fn app_error(&self, init: &ConditionalDensityPair, cn: &ConditionalDensityPair, dv: usize) -> Result<f64> {
        Ok(de_gallager_b::app_error(init, cn, dv))
    }

    /// Gallager B iterations start at the checks, fed by the channel bits.
    fn initial_cn(&self, _init: &ConditionalDensityPair) -> Result<Option<ConditionalDensityPair>> {
        Ok(None)
    }
}

/// Quantized Min-Sum with deviations on every variable-to-check message.
#[derive(Debug, Clone)]
pub struct MinSumEngine {
    pub deviations: MinSumDeviations,
    pub lambda_plus: i32,
    pub lambda_minus: i32,
}

impl MinSumEngine {
    pub fn new(params: &MinSumParams, deviation: BitFlipModel) -> Result<Self> {
        params.validate()?;
        Ok(MinSumEngine {
            deviations: MinSumDeviations::vn_only(params.alphabet()?, deviation, params.zero_sign)?,
            lambda_plus: params.lambda_plus,
            lambda_minus: params.lambda_minus,
        })
    }
}

impl DensityEngine for MinSumEngine {
    fn vn_step(&self, init: &ConditionalDensityPair, cn: &ConditionalDensityPair, dv: usize) -> Result<ConditionalDensityPair> {
        let v = de_minsum::vn_density(init, cn, dv)?;
        self.deviations.vn.apply_pair(&v)
    }

    fn cn_step(&self, vn: &ConditionalDensityPair, dc: usize) -> Result<ConditionalDensityPair> {
        let c = de_minsum::cn_density(vn, dc, self.lambda_plus, self.lambda_minus)?;
        match &self.deviations.cn {
            Some(pi) => pi.apply_pair(&c),
            None => Ok(c),
        }
    }

    fn app_error(&self, init: &ConditionalDensityPair, cn: &ConditionalDensityPair, dv: usize) -> Result<f64> {
        Ok(error_probability_unchecked(&de_minsum::vn_density(init, cn, dv + 1)?))
    }

    fn initial_cn(&self, init: &ConditionalDensityPair) -> Result<Option<ConditionalDensityPair>> {
        let zero = DiscreteDensity::delta(init.alphabet(), 0)?;
        Ok(Some(ConditionalDensityPair::symmetric_from(zero)))
    }
}

/// Densities carried between irregular iterations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IrregularState {
    /// Edge-averaged variable-to-check densities.
    pub vn: ConditionalDensityPair,
    /// Edge-averaged check-to-variable densities.
    pub cn: ConditionalDensityPair,
}

/// State before the first variable update. Engines whose iterations start
/// at the checks get one check update of the channel densities.
pub fn irregular_initial_state<E: DensityEngine>(
    engine: &E,
    init: &ConditionalDensityPair,
    profile: &DegreeDistribution,
) -> Result<IrregularState> {
    let cn = match engine.initial_cn(init)? {
        Some(cn) => cn,
        None => blend(&profile.cn_edge, |dc| engine.cn_step(init, dc))?,
    };
    Ok(IrregularState { vn: init.clone(), cn })
}

fn blend<F>(weights: &BTreeMap<usize, f64>, f: F) -> Result<ConditionalDensityPair>
where
    F: Fn(usize) -> Result<ConditionalDensityPair>,
{
    let parts: Vec<(f64, ConditionalDensityPair)> = weights
        .iter()
        .filter(|(_, &w)| w > 0.0)
        .map(|(&d, &w)| Ok((w, f(d)?)))
        .collect::<Result<_>>()?;
    let refs: Vec<(f64, &ConditionalDensityPair)> = parts.iter().map(|(w, p)| (*w, p)).collect();
    mix(&refs)
}

/// One irregular iteration: `vn = sum lambda_i VN_i(init, cn)` followed by
/// `cn = sum rho_j CN_j(vn)`.
pub fn irregular_de_step<E: DensityEngine>(
    engine: &E,
    init: &ConditionalDensityPair,
    profile: &DegreeDistribution,
    state: &IrregularState,
) -> Result<IrregularState> {
    let mut vn = blend(&profile.vn_edge, |dv| engine.vn_step(init, &state.cn, dv))?;
    let _ = vn.renormalize();
    let mut cn = blend(&profile.cn_edge, |dc| engine.cn_step(&vn, dc))?;
    let _ = cn.renormalize();
    Ok(IrregularState { vn, cn })
}

/// Runs `iterations` irregular steps. `pe` is measured on the blended
/// variable-to-check densities and `pe_app` averages decision errors over
/// the node-perspective degree fractions, using the check messages of the
/// same iteration as the engine's regular driver does.
pub fn irregular_run<E: DensityEngine>(
    engine: &E,
    init: &ConditionalDensityPair,
    profile: &DegreeDistribution,
    iterations: usize,
) -> Result<DeRunResult> {
    profile.validate()?;
    let node = profile.vn_node_fractions();
    let check_first = engine.initial_cn(init)?.is_none();
    let app = |cn: &ConditionalDensityPair| -> Result<f64> {
        node.iter().map(|(&dv, &f)| Ok(f * engine.app_error(init, cn, dv)?)).sum()
    };
    let mut state = irregular_initial_state(engine, init, profile)?;
    let mut result = DeRunResult::with_capacity(iterations);
    for l in 0..iterations {
        if check_first && l > 0 {
            state.cn = blend(&profile.cn_edge, |dc| engine.cn_step(&state.vn, dc))?;
            result.mass_drift = result.mass_drift.max(state.cn.renormalize());
        }
        if check_first {
            result.pe_app.push(app(&state.cn)?);
        }
        let mut vn = blend(&profile.vn_edge, |dv| engine.vn_step(init, &state.cn, dv))?;
        result.mass_drift = result.mass_drift.max(vn.renormalize());
        result.err_given0.push(vn.given0.error_mass_given0());
        result.err_given1.push(vn.given1.error_mass_given1());
        result.pe.push(error_probability_unchecked(&vn));
        state.vn = vn;
        if !check_first {
            state.cn = blend(&profile.cn_edge, |dc| engine.cn_step(&state.vn, dc))?;
            result.mass_drift = result.mass_drift.max(state.cn.renormalize());
            result.pe_app.push(app(&state.cn)?);
        }
    }
    result.final_vn = Some(state.vn);
    result.final_cn = Some(state.cn);
    Ok(result)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channels::{initial_density, sigma2_for_crossover, AsymScaling, ChannelModel};
    use crate::densities::MessageAlphabet;
    use proptest::prelude::*;

    /// Classic Gallager B recursion on the all-zero codeword for (3,6), b = 2:
    /// `x <- p0 - p0 f(x)^2 + (1 - p0) g(x)^2`, with
    /// `f = (1 + (1-2x)^5) / 2`, `g = (1 - (1-2x)^5) / 2`.
    fn scalar_gallager_b(p0: f64, iterations: usize) -> f64 {
        let mut x = p0;
        for _ in 0..iterations {
            let r = (1.0 - 2.0 * x).powi(5);
            let f = 0.5 * (1.0 + r);
            let g = 0.5 * (1.0 - r);
            x = p0 - p0 * f * f + (1.0 - p0) * g * g;
        }
        x
    }

    #[test]
    fn stub_runner_threshold_is_epsilon() {
        let q = ThresholdQuery::bsc(1e-3);
        let r = threshold_search(&q, |p| Ok(p)).unwrap();
        assert!((r.threshold - 1e-3).abs() <= q.resolution);
        assert!(r.threshold < 1e-3 && r.bad_side >= 1e-3);
        assert!(r.pe_at_threshold < 1e-3 && r.pe_at_bad_side >= 1e-3);

        let q = ThresholdQuery::snr_db(1e-3, 0.0, 10.0);
        let r = threshold_search(&q, |s| Ok(10f64.powf(-s))).unwrap();
        assert!((r.threshold - 3.0).abs() <= q.resolution);
        assert!(r.threshold > 3.0);
    }

    #[test]
    fn no_crossing_is_reported() {
        let q = ThresholdQuery::bsc(1e-3);
        assert!(matches!(threshold_search(&q, |_| Ok(0.5)), Err(Error::NoCrossing { .. })));
        assert!(matches!(threshold_search(&q, |_| Ok(0.0)), Err(Error::NoCrossing { .. })));
    }

    #[test]
    fn non_monotone_curve_is_flagged() {
        let mut q = ThresholdQuery::bsc(0.5);
        q.scan_points = 40;
        let r = threshold_search(&q, |p| Ok(if (0.1..0.2).contains(&p) { 0.9 } else { 2.0 * p })).unwrap();
        assert!(r.crossings.unwrap() >= 3);
        assert!(!r.flags.is_empty());
        assert!(r.pe_at_threshold < 0.5 && r.pe_at_bad_side >= 0.5);
    }

    #[test]
    fn scalar_oracle_threshold() {
        let q = ThresholdQuery::bsc(1e-3);
        let oracle = threshold_search(&q, |p| Ok(scalar_gallager_b(p, 200))).unwrap();
        let params = GallagerBParams::symmetric(3, 6, 200, 2).unwrap();
        let de = gallager_b_threshold(&params, BitFlipModel::none(), &q, false).unwrap();
        assert!((de.threshold - oracle.threshold).abs() <= q.resolution);
        assert!((de.threshold - 0.0394).abs() < 5e-4, "{}", de.threshold);
    }

    fn flat(c: f64) -> PeCurve {
        PeCurve::new(vec![0.0, 0.25, 0.5], vec![c, c, c]).unwrap()
    }

    #[test]
    fn constant_curve_integrates_to_constant() {
        for (n, p) in [(100, 0.25), (10_000, 0.05)] {
            let r = finite_length_pe(&flat(0.3), n, ChannelPoint::Bsc { p }).unwrap();
            assert!((r.pe - 0.3).abs() < 1e-6, "{}", r.pe);
            assert!(!r.clamped);
        }
    }

    #[test]
    fn huge_length_concentrates_at_p0() {
        let curve = PeCurve::new(vec![0.01, 0.02, 0.03, 0.04, 0.05], vec![1e-7, 1e-6, 1e-5, 1e-3, 1e-2]).unwrap();
        let r = finite_length_pe(&curve, 1_000_000_000_000, ChannelPoint::Bsc { p: 0.033 }).unwrap();
        assert!((r.pe - curve.eval(0.033)).abs() < 1e-6 * curve.eval(0.033).max(1.0));
    }

    #[test]
    fn simpson_is_converged() {
        let curve = PeCurve::new(vec![0.0, 0.02, 0.03, 0.04, 0.06, 0.5], vec![0.0, 1e-6, 1e-4, 3e-3, 5e-2, 0.5]).unwrap();
        for &(n, p) in &[(1000, 0.03), (10_000, 0.035), (200, 0.02)] {
            let a = finite_length_pe_with(&curve, n, ChannelPoint::Bsc { p }, 512).unwrap().pe;
            let b = finite_length_pe_with(&curve, n, ChannelPoint::Bsc { p }, 1024).unwrap().pe;
            assert!((a - b).abs() < 1e-8, "{a} {b}");
        }
    }

    #[test]
    fn awgn_point_uses_hard_decision_crossover() {
        let z = 0.03;
        let s2 = sigma2_for_crossover(z);
        let curve = PeCurve::new(vec![0.0, 0.5], vec![0.0, 0.5]).unwrap();
        let a = finite_length_pe(&curve, 500, ChannelPoint::Awgn { sigma2: s2 }).unwrap();
        let b = finite_length_pe(&curve, 500, ChannelPoint::Bsc { p: z }).unwrap();
        assert!((a.pe - b.pe).abs() < 1e-10, "{} {}", a.pe, b.pe);
        assert!((a.p0 - z).abs() < 1e-10);
    }

    #[test]
    fn coverage_clamping_is_reported() {
        let curve = PeCurve::new(vec![0.04, 0.05], vec![1e-4, 1e-3]).unwrap();
        let r = finite_length_pe(&curve, 100, ChannelPoint::Bsc { p: 0.045 }).unwrap();
        assert!(r.clamped);
    }

    #[test]
    fn interpolation_is_monotone_and_exact_on_grid() {
        let z = vec![0.01, 0.02, 0.03, 0.05, 0.08];
        let pe = vec![1e-9, 1e-7, 1e-5, 1e-2, 0.2];
        let c = PeCurve::new(z.clone(), pe.clone()).unwrap();
        for (x, p) in z.iter().zip(&pe) {
            assert!((c.eval(*x) - p).abs() <= 1e-12 * p);
        }
        let mut last = 0.0;
        for k in 0..=700 {
            let v = c.eval(0.01 + 0.07 * k as f64 / 700.0);
            assert!(v >= last * (1.0 - 1e-12));
            last = v;
        }
        let with_zero = PeCurve::new(vec![0.0, 0.1], vec![0.0, 0.2]).unwrap();
        assert!((with_zero.eval(0.05) - 0.1).abs() < 1e-15);
    }

    fn gb_init(p: f64) -> ConditionalDensityPair {
        initial_density(ChannelModel::bsc(p).unwrap(), MessageAlphabet::Binary, AsymScaling::unit()).unwrap()
    }

    #[test]
    fn regular_profile_matches_regular_engine() {
        let dev = BitFlipModel::new(1e-2, 1e-4).unwrap();
        let profile = DegreeDistribution::regular(3, 6).unwrap();
        let engine = GallagerBEngine::new(dev);
        let irr = irregular_run(&engine, &gb_init(0.02), &profile, 30).unwrap();
        let reg = de_gallager_b::run(0.02, &GallagerBParams::symmetric(3, 6, 30, 2).unwrap(), dev).unwrap();
        for (a, b) in irr.pe.iter().zip(&reg.pe) {
            assert!((a - b).abs() < 1e-14);
        }
        for (a, b) in irr.pe_app.iter().zip(&reg.pe_app) {
            assert!((a - b).abs() < 1e-14);
        }

        let ms = MinSumParams::symmetric(3, 6, 4, 1.0, 0.85, 0, 10).unwrap();
        let dev = BitFlipModel::new(1e-2, 1e-5).unwrap();
        let s2 = snr_db_to_sigma2(2.0, 0.5).unwrap();
        let engine = MinSumEngine::new(&ms, dev).unwrap();
        let init = de_minsum::init_density(s2, &ms).unwrap();
        let irr = irregular_run(&engine, &init, &profile, 10).unwrap();
        let reg = de_minsum::run(s2, &ms, dev).unwrap();
        for (a, b) in irr.pe.iter().zip(&reg.pe) {
            assert!((a - b).abs() < 1e-13, "{a} {b}");
        }
    }

    #[test]
    fn two_degree_step_is_convex_combination() {
        let dev = BitFlipModel::new(1e-3, 3e-3).unwrap();
        let engine = GallagerBEngine::new(dev);
        let init = gb_init(0.03);
        let state = irregular_initial_state(&engine, &init, &DegreeDistribution::regular(3, 6).unwrap()).unwrap();
        let w = 0.3;
        let mixed = DegreeDistribution::from_pairs(&[(3, w), (5, 1.0 - w)], &[(6, 1.0)]).unwrap();
        let step = irregular_de_step(&engine, &init, &mixed, &state).unwrap();
        let v3 = engine.vn_step(&init, &state.cn, 3).unwrap();
        let v5 = engine.vn_step(&init, &state.cn, 5).unwrap();
        for x in 0..2 {
            let (a, b, m) = if x == 0 {
                (&v3.given0, &v5.given0, &step.vn.given0)
            } else {
                (&v3.given1, &v5.given1, &step.vn.given1)
            };
            for k in 0..2 {
                assert!((m.at(k) - (w * a.at(k) + (1.0 - w) * b.at(k))).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn irregular_rate_half_minsum_keeps_mass() {
        let profile = DegreeDistribution::from_pairs(&[(3, 0.7857), (9, 0.2143)], &[(7, 1.0)]).unwrap();
        assert!((profile.design_rate() - 0.5).abs() < 1e-4);
        let ms = MinSumParams::symmetric(3, 7, 4, 1.0, 0.85, 0, 50).unwrap();
        let engine = MinSumEngine::new(&ms, BitFlipModel::new(1e-2, 1e-5).unwrap()).unwrap();
        let init = de_minsum::init_density(snr_db_to_sigma2(3.0, 0.5).unwrap(), &ms).unwrap();
        let r = irregular_run(&engine, &init, &profile, 50).unwrap();
        assert_eq!(r.iterations(), 50);
        assert!(r.mass_drift < 1e-8, "{}", r.mass_drift);
        assert!(r.final_pe() < r.pe[0]);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn bracket_straddles_epsilon(t in 0.01f64..0.45, eps in 0.05f64..0.9) {
            // steep monotone stub with its crossing at t
            let q = ThresholdQuery::bsc(eps);
            let r = threshold_search(&q, |p| Ok(if p < t { eps * p / t * 0.5 } else { eps + (1.0 - eps) * (p - t) })).unwrap();
            prop_assert!(r.pe_at_threshold < eps && r.pe_at_bad_side >= eps);
            prop_assert!((r.bad_side - r.threshold).abs() <= q.resolution);
            prop_assert!((r.threshold - t).abs() <= q.resolution);
        }

        #[test]
        fn finite_length_monotone_in_length_for_convex_curve(p in 0.02f64..0.4) {
            // Pe(z) = 2 z^2 is nondecreasing and convex, so a tighter
            // observation law can only lower the average
            let z: Vec<f64> = (1..=250).map(|k| 0.5 * k as f64 / 250.0).collect();
            let pe: Vec<f64> = z.iter().map(|x| 2.0 * x * x).collect();
            let curve = PeCurve::new(z, pe).unwrap();
            let mut last = 1.0;
            for n in [1000usize, 10_000, 100_000, 1_000_000] {
                let v = finite_length_pe(&curve, n, ChannelPoint::Bsc { p }).unwrap().pe;
                prop_assert!(v <= last + 1e-12, "{} > {}", v, last);
                last = v;
            }
        }
    }
}
