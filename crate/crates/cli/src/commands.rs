//! Subcommand implementations. Each writes its files into the output
//! directory and reports flags; the caller writes the manifest.

use std::fs::File;
use std::io::BufWriter;
use std::path::Path;

use faultyde::analysis::{
    finite_length_pe, irregular_run, threshold_search, ChannelPoint, GallagerBEngine, MinSumEngine, PeCurve,
    ThresholdResult,
};
use faultyde::channels::{initial_density, sigma2_for_crossover, snr_db_to_sigma2, AsymScaling, ChannelModel};
use faultyde::codes::{build_encoder_cached, girth, peg_construct, DegreeDistribution, TannerGraph};
use faultyde::de_bp_mc::{population_de_run_full, PopulationParams};
use faultyde::de_gallager_b::{threshold_range, ThresholdSchedule};
use faultyde::de_minsum;
use faultyde::densities::MessageAlphabet;
use faultyde::deviations::{TransitionMatrix, ZeroSign};
use faultyde::optimize::{gallager_b_rule_threshold, grid_search_ms, run_gallager_b, GbRule, MsGrid};
use faultyde::result::{DeRunResult, RunOptions};
use faultyde::sim::{ber_experiment, write_points_csv, DecoderConfig, GallagerBDecoder, SimConfig};
use faultyde::stream::derive_seed;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::cache::{Cache, LedgerRow};
use crate::config::{hash_json, ms_mode, CurveGrid, DecoderSection, RunConfig, TaskSection};
use crate::{CliError, CliResult};

/// What a command produced.
#[derive(Debug, Default)]
pub struct Outcome {
    pub outputs: Vec<String>,
    pub flags: Vec<String>,
    pub summary: Value,
    pub cache_hits: Vec<String>,
}

pub struct Context<'a> {
    pub out: &'a Path,
    pub cache: &'a Cache,
}

impl Context<'_> {
    fn create(&self, name: &str, outcome: &mut Outcome) -> CliResult<BufWriter<File>> {
        outcome.outputs.push(name.to_string());
        Ok(BufWriter::new(File::create(self.out.join(name))?))
    }

    fn write_json<T: Serialize>(&self, name: &str, value: &T, outcome: &mut Outcome) -> CliResult<()> {
        let w = self.create(name, outcome)?;
        serde_json::to_writer_pretty(w, value)?;
        Ok(())
    }
}

pub fn run_config_command(command: &str, cfg: &RunConfig, ctx: &Context<'_>) -> CliResult<Outcome> {
    let task = cfg.task_for(command)?;
    match task {
        TaskSection::Threshold { search, all_zero_reference } => {
            threshold(cfg, ctx, &search.query(is_hard(cfg)), all_zero_reference)
        }
        TaskSection::DeRun { all_zero_reference, histogram_bin } => de_run(cfg, ctx, all_zero_reference, histogram_bin),
        TaskSection::FlBer { n, grid, all_zero_reference } => {
            let lengths = match n {
                Some(n) => n.to_vec(),
                None => vec![cfg
                    .code
                    .n
                    .ok_or_else(|| CliError::Config("fl-ber needs `task.n` or `code.n`".into()))?],
            };
            fl_ber(cfg, ctx, &lengths, grid, all_zero_reference)
        }
        TaskSection::OptimizeGb { search } => optimize_gb(cfg, ctx, &search.query(true)),
        TaskSection::OptimizeMs { grid, symmetric, pe_at_snr, search } => {
            let points = if pe_at_snr { cfg.points()? } else { Vec::new() };
            let mode = ms_mode(pe_at_snr, &search, &points)?;
            optimize_ms(cfg, ctx, grid.unwrap_or_default(), symmetric, mode)
        }
        TaskSection::Simulate {
            max_codewords,
            target_frame_errors,
            all_zero,
        } => simulate(cfg, ctx, max_codewords, target_frame_errors, all_zero),
    }
}

fn is_hard(cfg: &RunConfig) -> bool {
    matches!(cfg.decoder, DecoderSection::GallagerB { .. })
}

fn regular_only(cfg: &RunConfig, what: &str) -> CliResult<(usize, usize)> {
    cfg.code
        .regular()?
        .ok_or_else(|| CliError::Config(format!("{what} supports regular ensembles only")))
}

/// Channel at search coordinate `x`: crossover for Gallager B, SNR in dB otherwise.
fn channel_at(cfg: &RunConfig, x: f64) -> CliResult<ChannelModel> {
    if is_hard(cfg) {
        Ok(ChannelModel::bsc(x)?)
    } else {
        Ok(ChannelModel::awgn(snr_db_to_sigma2(x, cfg.code.rate()?)?)?)
    }
}

/// One density-evolution run of the configured decoder on `channel`.
pub fn evolve(cfg: &RunConfig, channel: ChannelModel, all_zero_reference: bool) -> CliResult<DeRunResult> {
    Ok(evolve_full(cfg, channel, all_zero_reference)?.0)
}

fn evolve_full(
    cfg: &RunConfig,
    channel: ChannelModel,
    all_zero_reference: bool,
) -> CliResult<(DeRunResult, Option<faultyde::de_bp_mc::PopulationRun>)> {
    let profile = cfg.code.profile()?;
    let regular = profile.is_regular();
    let (dv, dc) = (profile.max_vn_degree(), profile.max_cn_degree());
    let options = RunOptions {
        all_zero_reference,
        record_history: false,
    };
    let irregular_reference = || {
        CliError::Config("the all-zero reference is available for regular ensembles only".into())
    };
    match &cfg.decoder {
        DecoderSection::GallagerB {
            iterations,
            thresholds,
            degree_thresholds,
            ..
        } => {
            let p = match channel {
                ChannelModel::Bsc { p } => p,
                ChannelModel::Awgn { .. } => return Err(CliError::Config("gallager_b needs a bsc channel".into())),
            };
            let dev = cfg.deviation.bit_flip()?;
            if regular {
                Ok((run_gallager_b(p, dv, dc, *iterations, *thresholds, dev, options)?, None))
            } else {
                if all_zero_reference {
                    return Err(irregular_reference());
                }
                let mut engine = GallagerBEngine::new(dev);
                engine.thresholds = degree_thresholds.clone();
                let init = initial_density(channel, MessageAlphabet::Binary, AsymScaling::unit())?;
                Ok((irregular_run(&engine, &init, &profile, *iterations)?, None))
            }
        }
        DecoderSection::MinSum { iterations, .. } => {
            let sigma2 = awgn_sigma2(channel)?;
            let params = cfg.decoder.min_sum_params(dv, dc)?;
            let dev = cfg.deviation.bit_flip()?;
            if regular {
                Ok((de_minsum::run_opts(sigma2, &params, dev, options)?, None))
            } else {
                if all_zero_reference {
                    return Err(irregular_reference());
                }
                let engine = MinSumEngine::new(&params, dev)?;
                let init = de_minsum::init_density(sigma2, &params)?;
                Ok((irregular_run(&engine, &init, &profile, *iterations)?, None))
            }
        }
        DecoderSection::Bp { iterations, population } => {
            if !regular {
                return Err(CliError::Config("bp supports regular ensembles only".into()));
            }
            if all_zero_reference {
                return Err(CliError::Config("bp always tracks both conditional densities".into()));
            }
            let params = PopulationParams {
                sigma2: awgn_sigma2(channel)?,
                dv,
                dc,
                iterations: *iterations,
                deviation: cfg.deviation.additive()?,
                population: *population,
                seed: cfg.seed,
            };
            let run = population_de_run_full(&params)?;
            Ok((run.result.clone(), Some(run)))
        }
    }
}

fn awgn_sigma2(channel: ChannelModel) -> CliResult<f64> {
    match channel {
        ChannelModel::Awgn { sigma2 } => Ok(sigma2),
        ChannelModel::Bsc { .. } => Err(CliError::Config("this decoder needs an awgn channel".into())),
    }
}

fn deviation_columns(cfg: &RunConfig) -> (String, String) {
    match cfg.deviation {
        crate::config::DeviationSection::Bitflip { eps01, eps10 } => (eps01.to_string(), eps10.to_string()),
        _ => ("0".into(), "0".into()),
    }
}

fn ledger(cfg_hash: &str, command: &str, point: String, quantity: &str, value: f64, flags: &[String]) -> LedgerRow {
    LedgerRow {
        config_hash: cfg_hash.to_string(),
        command: command.to_string(),
        point,
        quantity: quantity.to_string(),
        value,
        flags: flags.join("; "),
    }
}

fn threshold(
    cfg: &RunConfig,
    ctx: &Context<'_>,
    query: &faultyde::analysis::ThresholdQuery,
    all_zero_reference: bool,
) -> CliResult<Outcome> {
    let mut outcome = Outcome::default();
    let r: ThresholdResult = threshold_search(query, |x| {
        let ch = channel_at(cfg, x).map_err(CliError::into_core)?;
        Ok(evolve(cfg, ch, all_zero_reference).map_err(CliError::into_core)?.final_pe())
    })?;
    let unit = if is_hard(cfg) { "p" } else { "snr_db" };
    let (e01, e10) = deviation_columns(cfg);
    {
        let mut w = csv::Writer::from_writer(ctx.create("threshold.csv", &mut outcome)?);
        w.write_record([
            "decoder", "threshold", "bad_side", "unit", "epsilon", "iterations", "eps01", "eps10", "pe_at_threshold",
            "evaluations",
        ])?;
        w.write_record([
            cfg.decoder.name().to_string(),
            r.threshold.to_string(),
            r.bad_side.to_string(),
            unit.to_string(),
            query.epsilon.to_string(),
            cfg.decoder.iterations().to_string(),
            e01,
            e10,
            r.pe_at_threshold.to_string(),
            r.evaluations.to_string(),
        ])?;
        w.flush()?;
    }
    ctx.write_json("threshold.json", &r, &mut outcome)?;
    outcome.flags.extend(r.flags.iter().cloned());
    ctx.cache.append(&[ledger(&cfg.hash(), "threshold", String::new(), "threshold", r.threshold, &r.flags)])?;
    outcome.summary = json!({ "threshold": r.threshold, "unit": unit });
    Ok(outcome)
}

fn run_flags(r: &DeRunResult) -> Vec<String> {
    let mut f = r.flags.clone();
    if !r.fallback_iterations.is_empty() {
        f.push(format!("threshold selection fell back at iterations {:?}", r.fallback_iterations));
    }
    f
}

fn de_run(cfg: &RunConfig, ctx: &Context<'_>, all_zero_reference: bool, histogram_bin: Option<f64>) -> CliResult<Outcome> {
    let mut outcome = Outcome::default();
    let points = cfg.points()?;
    let mut summary = Vec::new();
    let mut rows = Vec::new();
    for (i, p) in points.iter().enumerate() {
        let (r, population) = evolve_full(cfg, p.channel, all_zero_reference)?;
        r.write_csv(ctx.create(&format!("de_run_{i}.csv"), &mut outcome)?)?;
        ctx.write_json(&format!("de_run_{i}.json"), &r, &mut outcome)?;
        if let (Some(bin), Some(pop)) = (histogram_bin, &population) {
            pop.vn.write_histogram_csv(ctx.create(&format!("density_{i}.csv"), &mut outcome)?, bin)?;
        }
        let flags = run_flags(&r);
        for f in &flags {
            outcome.flags.push(format!("point {}: {f}", p.param));
        }
        rows.push(ledger(&cfg.hash(), "de-run", p.param.to_string(), "pe_final", r.final_pe(), &flags));
        summary.push(json!({ "param": p.param, "pe": r.final_pe(), "pe_app": r.final_pe_app() }));
    }
    ctx.cache.append(&rows)?;
    outcome.summary = Value::Array(summary);
    Ok(outcome)
}

/// Default curve grid: the union of `p0 +- 8 sd` over all points and lengths.
fn auto_grid(crossovers: &[f64], lengths: &[usize]) -> CurveGrid {
    let mut lo: f64 = 0.5;
    let mut hi: f64 = 0.0;
    for &p0 in crossovers {
        for &n in lengths {
            let sd = (p0 * (1.0 - p0) / n as f64).sqrt();
            lo = lo.min(p0 - 8.0 * sd);
            hi = hi.max(p0 + 8.0 * sd);
        }
    }
    CurveGrid {
        lo: lo.max(1e-9),
        hi: hi.clamp(lo.max(1e-9) * 1.0001, 0.5),
        points: 65,
    }
}

fn curve_key(cfg: &RunConfig, grid: &CurveGrid, all_zero_reference: bool) -> CliResult<String> {
    let key = json!({
        "profile": cfg.code.profile()?,
        "decoder": cfg.decoder,
        "deviation": cfg.deviation,
        "seed": cfg.seed,
        "grid": grid,
        "all_zero_reference": all_zero_reference,
    });
    Ok(hash_json(&key.to_string()))
}

/// Decision error probability on the crossover axis.
fn pe_curve(cfg: &RunConfig, grid: &CurveGrid, all_zero_reference: bool) -> CliResult<PeCurve> {
    if grid.points < 2 || !(grid.lo < grid.hi) || grid.lo < 0.0 || grid.hi > 0.5 {
        return Err(CliError::Config(format!("invalid curve grid {grid:?}")));
    }
    let z: Vec<f64> = (0..grid.points)
        .map(|i| grid.lo + (grid.hi - grid.lo) * i as f64 / (grid.points - 1) as f64)
        .collect();
    let hard = is_hard(cfg);
    Ok(PeCurve::build(z, |z| {
        let ch = if hard {
            ChannelModel::bsc(z)?
        } else {
            ChannelModel::awgn(sigma2_for_crossover(z.max(1e-12)))?
        };
        Ok(evolve(cfg, ch, all_zero_reference).map_err(CliError::into_core)?.final_pe_app())
    })?)
}

fn fl_ber(
    cfg: &RunConfig,
    ctx: &Context<'_>,
    lengths: &[usize],
    grid: Option<CurveGrid>,
    all_zero_reference: bool,
) -> CliResult<Outcome> {
    let mut outcome = Outcome::default();
    let points = cfg.points()?;
    let crossovers: Vec<f64> = points.iter().map(|p| p.channel.crossover()).collect();
    let grid = grid.unwrap_or_else(|| auto_grid(&crossovers, lengths));
    let key = curve_key(cfg, &grid, all_zero_reference)?;
    let curve = match ctx.cache.load_curve(&key) {
        Some(c) => {
            outcome.cache_hits.push(format!("curve {key}"));
            c
        }
        None => {
            let c = pe_curve(cfg, &grid, all_zero_reference)?;
            ctx.cache.store_curve(&key, &c)?;
            c
        }
    };
    ctx.write_json("pe_curve.json", &curve, &mut outcome)?;
    let kind = if is_hard(cfg) { "bsc" } else { "awgn" };
    let mut rows = Vec::new();
    let mut summary = Vec::new();
    {
        let mut w = csv::Writer::from_writer(ctx.create("fl_ber.csv", &mut outcome)?);
        w.write_record(["channel", "param", "n", "ber", "p0", "sd", "clamped"])?;
        for &n in lengths {
            for p in &points {
                let cp = match p.channel {
                    ChannelModel::Bsc { p } => ChannelPoint::Bsc { p },
                    ChannelModel::Awgn { sigma2 } => ChannelPoint::Awgn { sigma2 },
                };
                let fl = finite_length_pe(&curve, n, cp)?;
                let mut flags = Vec::new();
                if fl.clamped {
                    flags.push("integration range left the curve grid".to_string());
                    outcome.flags.push(format!("point {} n={n}: integration range left the curve grid", p.param));
                }
                w.write_record([
                    kind.to_string(),
                    p.param.to_string(),
                    n.to_string(),
                    fl.pe.to_string(),
                    fl.p0.to_string(),
                    fl.sd.to_string(),
                    fl.clamped.to_string(),
                ])?;
                rows.push(ledger(&cfg.hash(), "fl-ber", format!("{}@{n}", p.param), "ber", fl.pe, &flags));
                summary.push(json!({ "param": p.param, "n": n, "ber": fl.pe }));
            }
        }
        w.flush()?;
    }
    ctx.cache.append(&rows)?;
    outcome.summary = json!({ "curve_key": key, "points": summary });
    Ok(outcome)
}

fn optimize_gb(cfg: &RunConfig, ctx: &Context<'_>, query: &faultyde::analysis::ThresholdQuery) -> CliResult<Outcome> {
    let mut outcome = Outcome::default();
    let (dv, dc) = regular_only(cfg, "optimize-gb")?;
    let (iterations, early_exit) = match cfg.decoder {
        DecoderSection::GallagerB { iterations, early_exit, .. } => (iterations, early_exit),
        _ => return Err(CliError::Config("optimize-gb needs a gallager_b decoder".into())),
    };
    let dev = cfg.deviation.bit_flip()?;
    let mut rules: Vec<GbRule> = threshold_range(dv).map(|b| GbRule::Fixed { b0: b, b1: b }).collect();
    rules.extend([GbRule::Symmetric, GbRule::Asymmetric]);
    let results: Vec<(GbRule, Option<ThresholdResult>, Option<String>)> = rules
        .iter()
        .map(|&rule| {
            match gallager_b_rule_threshold(dv, dc, iterations, rule, dev, query, RunOptions::default()) {
                Ok(r) => (rule, Some(r), None),
                Err(e) => (rule, None, Some(e.to_string())),
            }
        })
        .collect();
    let name = |r: &GbRule| match r {
        GbRule::Fixed { b0, b1 } => format!("fixed_{b0}_{b1}"),
        GbRule::Symmetric => "symmetric".into(),
        GbRule::Asymmetric => "asymmetric".into(),
    };
    {
        let mut w = csv::Writer::from_writer(ctx.create("optimize_gb.csv", &mut outcome)?);
        w.write_record(["rule", "threshold", "bad_side", "evaluations", "error"])?;
        for (rule, r, e) in &results {
            w.write_record([
                name(rule),
                r.as_ref().map_or("nan".into(), |r| r.threshold.to_string()),
                r.as_ref().map_or("nan".into(), |r| r.bad_side.to_string()),
                r.as_ref().map_or("0".into(), |r| r.evaluations.to_string()),
                e.clone().unwrap_or_default(),
            ])?;
        }
        w.flush()?;
    }
    let best_of = |filter: &dyn Fn(&GbRule) -> bool| {
        results
            .iter()
            .filter(|(rule, r, _)| filter(rule) && r.is_some())
            .map(|(rule, r, _)| (*rule, r.as_ref().expect("filtered").threshold))
            .fold(None, |acc: Option<(GbRule, f64)>, (rule, t)| match acc {
                Some((_, bt)) if bt >= t => acc,
                _ => Some((rule, t)),
            })
    };
    let best_symmetric = best_of(&|r| !matches!(r, GbRule::Asymmetric));
    let best = best_of(&|_| true).ok_or(CliError::Core(faultyde::Error::NoConvergence {
        epsilon: query.epsilon,
    }))?;
    let decoder = DecoderSection::GallagerB {
        iterations,
        thresholds: best.0,
        degree_thresholds: Default::default(),
        early_exit,
    };
    let record = json!({
        "rule": name(&best.0),
        "threshold": best.1,
        "best_symmetric": best_symmetric.map(|(r, t)| json!({ "rule": name(&r), "threshold": t })),
        "decoder": decoder,
    });
    ctx.write_json("best.json", &record, &mut outcome)?;
    let rows: Vec<LedgerRow> = results
        .iter()
        .filter_map(|(rule, r, _)| {
            r.as_ref()
                .map(|r| ledger(&cfg.hash(), "optimize-gb", name(rule), "threshold", r.threshold, &r.flags))
        })
        .collect();
    ctx.cache.append(&rows)?;
    outcome.summary = record;
    Ok(outcome)
}

fn optimize_ms(
    cfg: &RunConfig,
    ctx: &Context<'_>,
    grid: MsGrid,
    symmetric: bool,
    mode: faultyde::optimize::MsSearchMode,
) -> CliResult<Outcome> {
    let mut outcome = Outcome::default();
    let (dv, dc) = regular_only(cfg, "optimize-ms")?;
    let base = cfg.decoder.min_sum_params(dv, dc)?;
    let dev = cfg.deviation.bit_flip()?;
    let r = grid_search_ms(&grid, symmetric, &base, dev, cfg.code.rate()?, mode)?;
    r.write_csv(ctx.create("optimize_ms.csv", &mut outcome)?)?;
    let early_exit = match cfg.decoder {
        DecoderSection::MinSum { early_exit, .. } => early_exit,
        _ => true,
    };
    let decoder = DecoderSection::MinSum {
        q: base.q,
        step: base.step,
        gamma0: r.best.gamma0,
        gamma1: r.best.gamma1,
        lambda_plus: r.best.lambda_plus,
        lambda_minus: r.best.lambda_minus,
        iterations: base.iterations,
        zero_sign: base.zero_sign,
        early_exit,
    };
    let record = json!({
        "tuple": r.best,
        "score": r.score,
        "mode": r.mode,
        "symmetric": r.symmetric,
        "failed_tuples": r.failures(),
        "decoder": decoder,
    });
    ctx.write_json("best.json", &record, &mut outcome)?;
    ctx.cache
        .append(&[ledger(&cfg.hash(), "optimize-ms", String::new(), "score", r.score, &[])])?;
    outcome.summary = record;
    Ok(outcome)
}

/// The graph named by the code section: an alist file or a PEG construction.
pub fn load_graph(cfg: &RunConfig) -> CliResult<TannerGraph> {
    if let Some(path) = &cfg.code.alist {
        return Ok(TannerGraph::load_alist(path)?);
    }
    let n = cfg
        .code
        .n
        .ok_or_else(|| CliError::Config("simulation needs `code.n` or `code.alist`".into()))?;
    Ok(peg_construct(n, &cfg.code.profile()?, cfg.code.peg_seed.unwrap_or(cfg.seed))?)
}

fn simulate(
    cfg: &RunConfig,
    ctx: &Context<'_>,
    max_codewords: u64,
    target_frame_errors: u64,
    all_zero: bool,
) -> CliResult<Outcome> {
    let mut outcome = Outcome::default();
    let graph = load_graph(cfg)?;
    if cfg.code.alist.is_none() {
        let mut w = ctx.create("code.alist", &mut outcome)?;
        graph.write_alist(&mut w)?;
    }
    let encoder = build_encoder_cached(&graph, &ctx.cache.generators())?;
    let dev = cfg.deviation.bit_flip()?;
    let points = cfg.points()?;
    let dv_max = graph.vn_degrees().into_iter().max().unwrap_or(0);
    let dc_max = graph.cn_degrees().into_iter().max().unwrap_or(0);
    let mut results = Vec::new();
    for (i, p) in points.iter().enumerate() {
        let decoder = match &cfg.decoder {
            DecoderSection::GallagerB {
                iterations,
                thresholds,
                early_exit,
                ..
            } => {
                let schedule = match *thresholds {
                    GbRule::Fixed { b0, b1 } => ThresholdSchedule::Fixed(b0, b1),
                    rule => {
                        let (dv, dc) = regular_only(cfg, "adaptive gallager_b thresholds")?;
                        let pb = match p.channel {
                            ChannelModel::Bsc { p } => p,
                            _ => return Err(CliError::Config("gallager_b needs a bsc channel".into())),
                        };
                        let r = run_gallager_b(pb, dv, dc, *iterations, rule, dev, RunOptions::default())?;
                        ThresholdSchedule::PerIteration(r.schedule.unwrap_or_default())
                    }
                };
                DecoderConfig::GallagerB(GallagerBDecoder {
                    iterations: *iterations,
                    thresholds: schedule,
                    early_exit: *early_exit,
                })
            }
            DecoderSection::MinSum { early_exit, .. } => DecoderConfig::MinSum {
                params: cfg.decoder.min_sum_params(dv_max, dc_max)?,
                early_exit: *early_exit,
            },
            DecoderSection::Bp { .. } => {
                return Err(CliError::Config("finite-length simulation supports gallager_b and min_sum".into()))
            }
        };
        let sim = SimConfig {
            graph: &graph,
            encoder: &encoder,
            points: vec![p.channel],
            decoder,
            deviation: dev,
            max_codewords,
            target_frame_errors,
            all_zero,
            seed: derive_seed(cfg.seed, &[i as u64]),
        };
        let mut r = ber_experiment(&sim)?;
        results.append(&mut r);
    }
    // report the user-facing parameter (SNR in dB for AWGN)
    let mut rows = Vec::new();
    for (p, r) in points.iter().zip(&results) {
        for f in &r.flags {
            outcome.flags.push(format!("point {}: {f}", p.param));
        }
        rows.push(ledger(&cfg.hash(), "simulate", p.param.to_string(), "ber", r.ber, &r.flags));
    }
    write_points_csv(&results, ctx.create("simulate.csv", &mut outcome)?)?;
    let details: Vec<Value> = points
        .iter()
        .zip(&results)
        .map(|(p, r)| json!({ "param": p.param, "result": r }))
        .collect();
    let summary = json!({
        "graph_hash": graph.hash_hex(),
        "n": graph.n(),
        "k": encoder.k(),
        "points": details,
    });
    ctx.write_json("simulate.json", &summary, &mut outcome)?;
    ctx.cache.append(&rows)?;
    outcome.summary = summary;
    Ok(outcome)
}

/// Arguments of the `peg` subcommand.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PegArgs {
    pub n: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dv: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dc: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub profile: Option<DegreeDistribution>,
    pub seed: u64,
}

pub fn peg(args: &PegArgs, ctx: &Context<'_>) -> CliResult<Outcome> {
    let mut outcome = Outcome::default();
    let profile = match (&args.profile, args.dv, args.dc) {
        (Some(p), _, _) => p.clone(),
        (None, Some(dv), Some(dc)) => DegreeDistribution::regular(dv, dc)?,
        _ => return Err(CliError::Config("peg needs --dv and --dc or a profile".into())),
    };
    let g = peg_construct(args.n, &profile, args.seed)?;
    {
        let mut w = ctx.create("code.alist", &mut outcome)?;
        g.write_alist(&mut w)?;
    }
    let gi = girth(&g);
    let report = json!({
        "n": g.n(),
        "m": g.m(),
        "edges": g.edge_count(),
        "design_rate": g.design_rate(),
        "girth": gi,
        "hash": g.hash_hex(),
    });
    ctx.write_json("peg.json", &report, &mut outcome)?;
    outcome.summary = report;
    Ok(outcome)
}

/// Arguments of the `inspect-pi` subcommand.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PiArgs {
    pub q: u32,
    pub eps01: f64,
    pub eps10: f64,
    #[serde(default)]
    pub zero_sign: ZeroSign,
}

pub fn transition_matrix(args: &PiArgs) -> CliResult<TransitionMatrix> {
    let alphabet = MessageAlphabet::quantized(args.q, 1.0)?;
    let model = faultyde::deviations::BitFlipModel::new(args.eps01, args.eps10)?;
    Ok(TransitionMatrix::sign_magnitude_with(alphabet, model, args.zero_sign)?)
}

pub fn inspect_pi(args: &PiArgs, ctx: &Context<'_>) -> CliResult<Outcome> {
    let mut outcome = Outcome::default();
    let pi = transition_matrix(args)?;
    pi.write_csv(ctx.create("pi.csv", &mut outcome)?)?;
    let worst = pi
        .rows()
        .iter()
        .map(|r| (r.iter().sum::<f64>() - 1.0).abs())
        .fold(0.0, f64::max);
    outcome.summary = json!({ "size": pi.rows().len(), "max_row_sum_error": worst });
    Ok(outcome)
}
