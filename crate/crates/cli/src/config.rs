//! JSON run configuration.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use faultyde::analysis::{ThresholdQuery, DEFAULT_EPSILON, DEFAULT_SNR_RESOLUTION};
use faultyde::channels::{snr_db_to_sigma2, ChannelModel};
use faultyde::codes::DegreeDistribution;
use faultyde::de_minsum::MinSumParams;
use faultyde::deviations::{AdditiveDeviation, BitFlipModel, ZeroSign};
use faultyde::optimize::{GbRule, MsGrid, MsSearchMode};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::{CliError, CliResult};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub code: CodeSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub channel: Option<ChannelSection>,
    pub decoder: DecoderSection,
    #[serde(default)]
    pub deviation: DeviationSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub task: Option<TaskSection>,
    #[serde(default)]
    pub seed: u64,
}

/// Ensemble plus, for finite-length work, a concrete graph.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CodeSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dv: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dc: Option<usize>,
    /// Edge-perspective profile; exclusive with `dv`/`dc`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub profile: Option<DegreeDistribution>,
    /// Code length for PEG construction and the finite-length predictor.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    /// Parity-check matrix to use instead of a PEG construction.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alist: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub peg_seed: Option<u64>,
}

impl CodeSection {
    pub fn profile(&self) -> CliResult<DegreeDistribution> {
        match (&self.profile, self.dv, self.dc) {
            (Some(p), None, None) => {
                p.validate()?;
                Ok(p.clone())
            }
            (None, Some(dv), Some(dc)) => Ok(DegreeDistribution::regular(dv, dc)?),
            _ => Err(CliError::Config(
                "code needs either `dv` and `dc` or a `profile`".into(),
            )),
        }
    }

    /// Degrees of a regular ensemble.
    pub fn regular(&self) -> CliResult<Option<(usize, usize)>> {
        let p = self.profile()?;
        Ok(p.is_regular().then(|| (p.max_vn_degree(), p.max_cn_degree())))
    }

    pub fn rate(&self) -> CliResult<f64> {
        Ok(self.profile()?.design_rate())
    }

    pub(crate) fn resolve_paths(&mut self, base: &Path) {
        if let Some(p) = &self.alist {
            if p.is_relative() {
                self.alist = Some(base.join(p));
            }
        }
    }
}

/// A single value or a list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum OneOrMany<T> {
    One(T),
    Many(Vec<T>),
}

impl<T: Clone> OneOrMany<T> {
    pub fn to_vec(&self) -> Vec<T> {
        match self {
            OneOrMany::One(v) => vec![v.clone()],
            OneOrMany::Many(v) => v.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum ChannelSection {
    Bsc { p: OneOrMany<f64> },
    /// SNR in dB as Eb/N0 at the design rate of the ensemble.
    Awgn { snr_db: OneOrMany<f64> },
}

/// A channel point with its user-facing parameter.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Point {
    /// Crossover probability or SNR in dB.
    pub param: f64,
    pub channel: ChannelModel,
}

impl ChannelSection {
    pub fn points(&self, rate: f64) -> CliResult<Vec<Point>> {
        match self {
            ChannelSection::Bsc { p } => p
                .to_vec()
                .into_iter()
                .map(|p| Ok(Point { param: p, channel: ChannelModel::bsc(p)? }))
                .collect(),
            ChannelSection::Awgn { snr_db } => snr_db
                .to_vec()
                .into_iter()
                .map(|s| {
                    Ok(Point {
                        param: s,
                        channel: ChannelModel::awgn(snr_db_to_sigma2(s, rate)?)?,
                    })
                })
                .collect(),
        }
    }

    pub fn is_bsc(&self) -> bool {
        matches!(self, ChannelSection::Bsc { .. })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum DecoderSection {
    GallagerB {
        iterations: usize,
        #[serde(default = "default_gb_rule")]
        thresholds: GbRule,
        /// Per-degree `(b0, b1)` for irregular profiles.
        #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
        degree_thresholds: BTreeMap<usize, (usize, usize)>,
        #[serde(default = "yes")]
        early_exit: bool,
    },
    MinSum {
        q: u32,
        step: f64,
        #[serde(default = "one")]
        gamma0: f64,
        #[serde(default = "one")]
        gamma1: f64,
        #[serde(default)]
        lambda_plus: i32,
        #[serde(default)]
        lambda_minus: i32,
        iterations: usize,
        #[serde(default)]
        zero_sign: ZeroSign,
        #[serde(default = "yes")]
        early_exit: bool,
    },
    Bp {
        iterations: usize,
        #[serde(default = "default_population")]
        population: usize,
    },
}

fn default_gb_rule() -> GbRule {
    GbRule::Asymmetric
}

fn yes() -> bool {
    true
}

fn one() -> f64 {
    1.0
}

fn default_population() -> usize {
    faultyde::de_bp_mc::MIN_POPULATION * 5
}

impl DecoderSection {
    pub fn iterations(&self) -> usize {
        match self {
            DecoderSection::GallagerB { iterations, .. }
            | DecoderSection::MinSum { iterations, .. }
            | DecoderSection::Bp { iterations, .. } => *iterations,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            DecoderSection::GallagerB { .. } => "gallager_b",
            DecoderSection::MinSum { .. } => "min_sum",
            DecoderSection::Bp { .. } => "bp",
        }
    }

    /// Min-Sum parameters for degrees `(dv, dc)`.
    pub fn min_sum_params(&self, dv: usize, dc: usize) -> CliResult<MinSumParams> {
        match *self {
            DecoderSection::MinSum {
                q,
                step,
                gamma0,
                gamma1,
                lambda_plus,
                lambda_minus,
                iterations,
                zero_sign,
                ..
            } => {
                let mut p = MinSumParams::symmetric(dv, dc, q, step, 1.0, 0, iterations)?
                    .with_asymmetry(gamma0, gamma1, lambda_plus, lambda_minus)?;
                p.zero_sign = zero_sign;
                p.validate()?;
                Ok(p)
            }
            _ => Err(CliError::Config("decoder is not min_sum".into())),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum DeviationSection {
    #[default]
    None,
    Bitflip { eps01: f64, eps10: f64 },
    Additive { law: AdditiveDeviation },
}

impl DeviationSection {
    pub fn bit_flip(&self) -> CliResult<BitFlipModel> {
        match *self {
            DeviationSection::None => Ok(BitFlipModel::none()),
            DeviationSection::Bitflip { eps01, eps10 } => Ok(BitFlipModel::new(eps01, eps10)?),
            DeviationSection::Additive { .. } => Err(CliError::Config(
                "additive deviations apply to the bp decoder only".into(),
            )),
        }
    }

    pub fn additive(&self) -> CliResult<AdditiveDeviation> {
        match *self {
            DeviationSection::None => Ok(AdditiveDeviation::none()),
            DeviationSection::Additive { law } => {
                law.validate()?;
                Ok(law)
            }
            DeviationSection::Bitflip { .. } => Err(CliError::Config(
                "the bp decoder takes additive deviations".into(),
            )),
        }
    }
}

/// Search settings shared by threshold-type tasks.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SearchSettings {
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    /// Search interval; defaults to `[0, 0.5]` for BSC and `[0, 10]` dB for AWGN.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lo: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hi: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub resolution: Option<f64>,
    #[serde(default)]
    pub scan_points: usize,
}

impl Default for SearchSettings {
    fn default() -> Self {
        SearchSettings {
            epsilon: DEFAULT_EPSILON,
            lo: None,
            hi: None,
            resolution: None,
            scan_points: 0,
        }
    }
}

fn default_epsilon() -> f64 {
    DEFAULT_EPSILON
}

impl SearchSettings {
    pub fn query(&self, bsc: bool) -> ThresholdQuery {
        let mut q = if bsc {
            ThresholdQuery::bsc(self.epsilon)
        } else {
            let mut q = ThresholdQuery::snr_db(self.epsilon, 0.0, 10.0);
            q.resolution = DEFAULT_SNR_RESOLUTION;
            q
        };
        if let Some(lo) = self.lo {
            q.lo = lo;
        }
        if let Some(hi) = self.hi {
            q.hi = hi;
        }
        if let Some(r) = self.resolution {
            q.resolution = r;
        }
        q.scan_points = self.scan_points;
        q
    }
}

/// Crossover grid of a cached Pe curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CurveGrid {
    pub lo: f64,
    pub hi: f64,
    pub points: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "command", rename_all = "kebab-case", deny_unknown_fields)]
pub enum TaskSection {
    Threshold {
        #[serde(default)]
        search: SearchSettings,
        #[serde(default)]
        all_zero_reference: bool,
    },
    DeRun {
        #[serde(default)]
        all_zero_reference: bool,
        /// Histogram bin width for the bp population densities.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        histogram_bin: Option<f64>,
    },
    FlBer {
        /// Code lengths; defaults to `code.n`.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        n: Option<OneOrMany<usize>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        grid: Option<CurveGrid>,
        #[serde(default)]
        all_zero_reference: bool,
    },
    OptimizeGb {
        #[serde(default)]
        search: SearchSettings,
    },
    OptimizeMs {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        grid: Option<MsGrid>,
        #[serde(default)]
        symmetric: bool,
        /// Rank by Pe at the first channel point instead of by threshold.
        #[serde(default)]
        pe_at_snr: bool,
        #[serde(default)]
        search: SearchSettings,
    },
    Simulate {
        #[serde(default = "default_max_codewords")]
        max_codewords: u64,
        #[serde(default = "default_target")]
        target_frame_errors: u64,
        #[serde(default)]
        all_zero: bool,
    },
}

fn default_max_codewords() -> u64 {
    faultyde::sim::DEFAULT_MAX_CODEWORDS
}

fn default_target() -> u64 {
    faultyde::sim::DEFAULT_TARGET_FRAME_ERRORS
}

impl TaskSection {
    pub fn command(&self) -> &'static str {
        match self {
            TaskSection::Threshold { .. } => "threshold",
            TaskSection::DeRun { .. } => "de-run",
            TaskSection::FlBer { .. } => "fl-ber",
            TaskSection::OptimizeGb { .. } => "optimize-gb",
            TaskSection::OptimizeMs { .. } => "optimize-ms",
            TaskSection::Simulate { .. } => "simulate",
        }
    }

    /// Defaults for a command given without a task section.
    pub fn default_for(command: &str) -> CliResult<Self> {
        let json = serde_json::json!({ "command": command });
        serde_json::from_value(json).map_err(|e| CliError::Config(format!("task `{command}`: {e}")))
    }
}

impl RunConfig {
    pub fn from_json(text: &str) -> CliResult<Self> {
        serde_json::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    /// Loads a config; relative alist paths are taken relative to the file.
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        let mut cfg = Self::from_json(&text)?;
        if let Some(dir) = path.parent() {
            cfg.code.resolve_paths(dir);
        }
        Ok(cfg)
    }

    /// Task for `command`, checking that the config does not name another one.
    pub fn task_for(&self, command: &str) -> CliResult<TaskSection> {
        match &self.task {
            Some(t) if t.command() == command => Ok(t.clone()),
            Some(t) => Err(CliError::Config(format!(
                "config task is `{}` but `{command}` was invoked",
                t.command()
            ))),
            None => TaskSection::default_for(command),
        }
    }

    pub fn channel(&self) -> CliResult<&ChannelSection> {
        self.channel
            .as_ref()
            .ok_or_else(|| CliError::Config("this command needs a `channel` section".into()))
    }

    pub fn points(&self) -> CliResult<Vec<Point>> {
        self.channel()?.points(self.code.rate()?)
    }

    pub fn to_canonical_json(&self) -> String {
        serde_json::to_string(self).expect("config serializes")
    }

    /// SHA-256 of the canonical serialization.
    pub fn hash(&self) -> String {
        hash_json(&self.to_canonical_json())
    }
}

pub fn hash_json(text: &str) -> String {
    hex::encode(Sha256::digest(text.as_bytes()))
}

/// Search mode of the Min-Sum optimizer.
pub fn ms_mode(pe_at_snr: bool, search: &SearchSettings, points: &[Point]) -> CliResult<MsSearchMode> {
    if pe_at_snr {
        let p = points
            .first()
            .ok_or_else(|| CliError::Config("pe_at_snr needs an AWGN channel point".into()))?;
        Ok(MsSearchMode::PeAtSnr { snr_db: p.param })
    } else {
        Ok(MsSearchMode::Threshold {
            query: search.query(false),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const GB: &str = r#"{
        "code": {"dv": 3, "dc": 6},
        "channel": {"type": "bsc", "p": [0.01, 0.02]},
        "decoder": {"family": "gallager_b", "iterations": 20, "thresholds": {"rule": "fixed", "b0": 2, "b1": 2}},
        "deviation": {"type": "bitflip", "eps01": 0.01, "eps10": 0.0001},
        "task": {"command": "threshold", "search": {"epsilon": 0.001}}
    }"#;

    #[test]
    fn parses_and_hashes() {
        let c = RunConfig::from_json(GB).unwrap();
        assert_eq!(c.points().unwrap().len(), 2);
        assert_eq!(c.task_for("threshold").unwrap().command(), "threshold");
        assert!(c.task_for("simulate").is_err());
        let again = RunConfig::from_json(&c.to_canonical_json()).unwrap();
        assert_eq!(again, c);
        assert_eq!(again.hash(), c.hash());
        assert_eq!(c.hash().len(), 64);
    }

    #[test]
    fn rejects_unknown_keys() {
        let bad = GB.replace("\"seed\"", "\"x\"").replace("\"dv\": 3", "\"dv\": 3, \"colour\": 1");
        assert!(RunConfig::from_json(&bad).is_err());
        let bad_task = GB.replace("\"epsilon\": 0.001", "\"epsilon\": 0.001, \"bogus\": 2");
        assert!(RunConfig::from_json(&bad_task).is_err());
        let bad_cmd = GB.replace("\"threshold\"", "\"plot\"");
        assert!(RunConfig::from_json(&bad_cmd).is_err());
    }

    #[test]
    fn default_tasks_exist_for_every_config_command() {
        for c in ["threshold", "de-run", "fl-ber", "optimize-gb", "optimize-ms", "simulate"] {
            assert_eq!(TaskSection::default_for(c).unwrap().command(), c);
        }
    }

    #[test]
    fn awgn_points_use_design_rate() {
        let text = r#"{"code": {"dv": 3, "dc": 6}, "channel": {"type": "awgn", "snr_db": 2.0},
            "decoder": {"family": "min_sum", "q": 4, "step": 1.0, "iterations": 10}}"#;
        let c = RunConfig::from_json(text).unwrap();
        let p = c.points().unwrap();
        match p[0].channel {
            ChannelModel::Awgn { sigma2 } => assert!((sigma2 - 1.0 / 10f64.powf(0.2)).abs() < 1e-12),
            _ => panic!(),
        }
    }
}
