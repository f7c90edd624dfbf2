use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use rayon::prelude::*;

use mocap_gapeval::corrupt::{
    add_global_noise, add_masked_noise, apply_mask, curriculum, noise_sigma, sample_mask_for, GapMode, GapSpec,
};
use mocap_gapeval::io::{
    atomic_write, metrics_to_string, read_markers, read_mask, read_metrics, read_ratings, read_skeleton,
    write_markers, write_mask,
};
use mocap_gapeval::metrics::{bdp, bdp_gt, rmse, vd, vd_gt};
use mocap_gapeval::reconstruct::{
    fill_hips_outwards, fill_interpolation, fill_ridge, postprocess, train_ridge, EdgeMode, PartModels, RidgeConfig,
    RidgeDenoiser, SmoothScope, SmoothingParams,
};
use mocap_gapeval::stats::{aggregate, alpha_from_units, bootstrap_ci, correlate_metric, correlations_to_string};
use mocap_gapeval::synth::{generate, SynthSpec};
use mocap_gapeval::{
    BodyPart, CurriculumParams, Error, MarkerSequence, MetricName, MetricReport, MetricRow, NormMode,
    ObservationMask, SkeletonConfig,
};

use crate::manifest::Manifest;
use crate::plot;
use crate::{CliError, CliResult};

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

fn load_skeleton(path: Option<&Path>, manifest: &mut Manifest) -> CliResult<SkeletonConfig> {
    match path {
        Some(p) => {
            manifest.input(p)?;
            Ok(read_skeleton(p)?)
        }
        None => Ok(SkeletonConfig::default_two_actor()),
    }
}

fn read_seq(path: &Path, manifest: &mut Manifest) -> CliResult<MarkerSequence> {
    manifest.input(path)?;
    Ok(read_markers(path, None)?)
}

/// Mask columns must match the sequence's markers in order.
fn read_mask_for(path: &Path, seq: &MarkerSequence, manifest: &mut Manifest) -> CliResult<ObservationMask> {
    manifest.input(path)?;
    let (mask, ids) = read_mask(path)?;
    if ids != seq.marker_ids() {
        return Err(Error::Shape(format!("{}: mask markers differ from the sequence", path.display())).into());
    }
    mask.check_shape(seq)?;
    Ok(mask)
}

fn parse_curve(s: &str) -> Result<[f64; 4], String> {
    let v: Vec<f64> = s
        .split(',')
        .map(|x| x.trim().parse::<f64>().map_err(|_| format!("{x:?} is not a number")))
        .collect::<Result<_, _>>()?;
    v.try_into().map_err(|_| "expected n_start,n_rate,d_start,d_rate".to_string())
}

fn curve_params(curve: [f64; 4], noise_c: f64, lambda: f64) -> CliResult<CurriculumParams> {
    let p = CurriculumParams {
        n_start: curve[0],
        n_rate: curve[1],
        d_start: curve[2],
        d_rate: curve[3],
        noise_cap: noise_c,
        velocity_weight: lambda,
    };
    p.validate()?;
    Ok(p)
}

fn stem(path: &Path) -> CliResult<String> {
    path.file_stem()
        .and_then(|s| s.to_str())
        .map(str::to_string)
        .ok_or_else(|| usage(format!("cannot derive a stimulus id from {}", path.display())))
}

// ---------------------------------------------------------------------------

#[derive(Args, Debug)]
pub struct SynthArgs {
    /// Skeleton JSON with a rest pose (bundled two-actor layout if omitted).
    #[arg(long)]
    skel: Option<PathBuf>,
    #[arg(long, default_value_t = 2)]
    actors: usize,
    #[arg(long, default_value_t = 20.0)]
    seconds: f64,
    #[arg(long, default_value_t = 120.0)]
    fps: f64,
    /// Motion amplitude, cm.
    #[arg(long)]
    amplitude: Option<f64>,
    /// Measurement jitter as a fraction of the amplitude.
    #[arg(long)]
    jitter: Option<f64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

pub fn synth(a: &SynthArgs, raw: &[String]) -> CliResult<()> {
    let mut man = Manifest::new("synth", raw);
    let mut skel = load_skeleton(a.skel.as_deref(), &mut man)?;
    if a.actors == 0 || a.actors > skel.actors.len() {
        return Err(usage(format!("--actors must be between 1 and {}", skel.actors.len())));
    }
    if a.actors == 1 && skel.actors.len() > 1 {
        skel = skel.restrict_to_actor(&skel.actors[0].clone())?;
    } else if a.actors != skel.actors.len() {
        return Err(usage(format!("skeleton has {} actors", skel.actors.len())));
    }
    let defaults = SynthSpec::default();
    let spec = SynthSpec {
        actors: a.actors,
        seconds: a.seconds,
        fps: a.fps,
        amplitude: a.amplitude.unwrap_or(defaults.amplitude),
        jitter: a.jitter.unwrap_or(defaults.jitter),
        seed: a.seed,
        ..defaults
    };
    let seq = generate(&spec, &skel)?;
    write_markers(&seq, &a.out)?;
    man.output(&a.out)?;
    man.write_beside(&a.out)?;
    Ok(())
}

// ---------------------------------------------------------------------------

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum ModeArg {
    Iid,
    Window,
    Bodypart,
}

#[derive(Args, Debug)]
pub struct CorruptArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    skel: Option<PathBuf>,
    #[arg(long, value_enum)]
    mode: ModeArg,
    /// iid: per-entry missing probability.
    #[arg(long)]
    p: Option<f64>,
    /// window: number of gapped markers.
    #[arg(long)]
    n: Option<usize>,
    /// window / bodypart: gap duration, seconds.
    #[arg(long)]
    d: Option<f64>,
    /// bodypart: hips, torso, head or limbs.
    #[arg(long)]
    part: Option<BodyPart>,
    /// Curriculum epoch; with --curve it sets window count and duration.
    #[arg(long)]
    epoch: Option<usize>,
    /// n_start,n_rate,d_start,d_rate (durations in frames).
    #[arg(long, value_parser = parse_curve)]
    curve: Option<[f64; 4]>,
    /// Cap of the noise schedule; adds masked noise at the epoch's sigma.
    #[arg(long)]
    noise_c: Option<f64>,
    /// Standard deviation of additive noise on every entry, cm.
    #[arg(long)]
    global_sigma: Option<f64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    mask_out: PathBuf,
}

pub fn corrupt(a: &CorruptArgs, raw: &[String]) -> CliResult<()> {
    let mut man = Manifest::new("corrupt", raw);
    let clean = read_seq(&a.input, &mut man)?;
    let skel = load_skeleton(a.skel.as_deref(), &mut man)?.for_markers(clean.marker_ids())?;
    let frames = |d: f64| -> CliResult<usize> {
        if !(d.is_finite() && d >= 0.0) {
            return Err(usage(format!("--d must be >= 0 seconds, got {d}")));
        }
        Ok((d * clean.fps()).round() as usize)
    };
    let epoch = a.epoch.unwrap_or(0);
    let mode = match a.mode {
        ModeArg::Iid => GapMode::Iid {
            p: a.p.ok_or_else(|| usage("--mode iid needs --p"))?,
        },
        ModeArg::Window => match (a.curve, a.n, a.d) {
            (Some(c), _, _) => {
                let params = curve_params(c, a.noise_c.unwrap_or(1.0), 0.0)?;
                let (markers, duration) = curriculum(epoch, &params, clean.n_frames(), clean.n_markers());
                GapMode::Window { markers, duration }
            }
            (None, Some(n), Some(d)) => GapMode::Window {
                markers: n,
                duration: frames(d)?,
            },
            _ => return Err(usage("--mode window needs --n and --d, or --curve")),
        },
        ModeArg::Bodypart => GapMode::BodyPart {
            part: a.part.ok_or_else(|| usage("--mode bodypart needs --part"))?,
            duration: frames(a.d.ok_or_else(|| usage("--mode bodypart needs --d"))?)?,
        },
    };
    let mask = sample_mask_for(&clean, &GapSpec { mode, seed: a.seed }, &skel)?;
    let mut seq = clean;
    if let Some(sigma) = a.global_sigma {
        seq = add_global_noise(&seq, sigma, a.seed.wrapping_add(2))?;
    }
    seq = match a.noise_c {
        Some(c) => add_masked_noise(&seq, &mask, noise_sigma(epoch as f64, c), a.seed.wrapping_add(1))?,
        None => apply_mask(&seq, &mask)?,
    };
    write_markers(&seq, &a.out)?;
    write_mask(&mask, seq.marker_ids(), &a.mask_out)?;
    man.output(&a.out)?;
    man.output(&a.mask_out)?;
    man.write_beside(&a.out)?;
    Ok(())
}

// ---------------------------------------------------------------------------

#[derive(Args, Debug)]
pub struct TrainArgs {
    /// Directory of clean Marker CSV files.
    #[arg(long)]
    clean: PathBuf,
    #[arg(long)]
    skel: Option<PathBuf>,
    #[arg(long)]
    epochs: usize,
    /// Window radius, frames.
    #[arg(long)]
    window: usize,
    #[arg(long)]
    reg: f64,
    #[arg(long, value_parser = parse_curve)]
    curve: [f64; 4],
    #[arg(long)]
    noise_c: f64,
    /// Velocity-term weight of the training loss.
    #[arg(long, default_value_t = 1.0)]
    lambda: f64,
    /// Train only this body part's markers.
    #[arg(long)]
    part: Option<BodyPart>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

pub fn train(a: &TrainArgs, raw: &[String]) -> CliResult<()> {
    let mut man = Manifest::new("train", raw);
    let mut files: Vec<PathBuf> = std::fs::read_dir(&a.clean)
        .map_err(|e| Error::io(&a.clean, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "csv"))
        .collect();
    files.sort();
    if files.is_empty() {
        return Err(Error::Missing(format!("no .csv files in {}", a.clean.display())).into());
    }
    let seqs = files.iter().map(|f| read_seq(f, &mut man)).collect::<CliResult<Vec<_>>>()?;
    let skel = load_skeleton(a.skel.as_deref(), &mut man)?.for_markers(seqs[0].marker_ids())?;
    let mut cfg = RidgeConfig::new(a.window, a.reg, a.epochs, curve_params(a.curve, a.noise_c, a.lambda)?, a.seed);
    cfg.target_part = a.part;
    let model = train_ridge(&seqs, &skel, &cfg)?;
    model.write(&a.out)?;
    man.output(&a.out)?;
    man.write_beside(&a.out)?;
    Ok(())
}

// ---------------------------------------------------------------------------

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum MethodArg {
    Interp,
    Ridge,
    HipsOutwards,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum ScopeArg {
    All,
    Gaps,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum EdgeArg {
    Interp,
    Mirror,
}

#[derive(Args, Debug)]
pub struct FillArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    mask: PathBuf,
    #[arg(long)]
    skel: Option<PathBuf>,
    #[arg(long, value_enum)]
    method: MethodArg,
    /// Ridge model (shared by every part for hips-outwards).
    #[arg(long)]
    model: Option<PathBuf>,
    #[arg(long)]
    model_hips: Option<PathBuf>,
    #[arg(long)]
    model_torso: Option<PathBuf>,
    #[arg(long)]
    model_head: Option<PathBuf>,
    #[arg(long)]
    model_limbs: Option<PathBuf>,
    /// Savitzky-Golay window; any smoothing flag turns post-processing on.
    #[arg(long)]
    smooth_window: Option<usize>,
    #[arg(long)]
    smooth_order: Option<usize>,
    #[arg(long, value_enum)]
    smooth_scope: Option<ScopeArg>,
    #[arg(long, value_enum)]
    smooth_edges: Option<EdgeArg>,
    /// Original values restored at observed entries before smoothing
    /// (defaults to --in).
    #[arg(long)]
    raw: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

fn load_model(path: &Path, man: &mut Manifest) -> CliResult<RidgeDenoiser> {
    man.input(path)?;
    Ok(RidgeDenoiser::read(path)?)
}

pub fn fill(a: &FillArgs, raw: &[String]) -> CliResult<()> {
    let mut man = Manifest::new("fill", raw);
    let seq = read_seq(&a.input, &mut man)?;
    let file_mask = read_mask_for(&a.mask, &seq, &mut man)?;
    let skel = load_skeleton(a.skel.as_deref(), &mut man)?.for_markers(seq.marker_ids())?;
    // entries absent from the input are filled as well
    let bits = file_mask.bits().iter().zip(seq.presence()).map(|(&o, &p)| o && p).collect();
    let mask = ObservationMask::from_bits(seq.n_frames(), seq.n_markers(), bits)?;

    let filled = match a.method {
        MethodArg::Interp => fill_interpolation(&seq, &mask)?,
        MethodArg::Ridge => {
            let path = a.model.as_deref().ok_or_else(|| usage("--method ridge needs --model"))?;
            fill_ridge(&load_model(path, &mut man)?, &seq, &mask, &skel)?
        }
        MethodArg::HipsOutwards => {
            let parts = [&a.model_hips, &a.model_torso, &a.model_head, &a.model_limbs];
            let models: Vec<RidgeDenoiser> = match (&a.model, parts.iter().all(|p| p.is_some())) {
                (Some(p), false) if parts.iter().all(|p| p.is_none()) => vec![load_model(p, &mut man)?],
                (None, true) => parts
                    .iter()
                    .map(|p| load_model(p.as_deref().expect("checked"), &mut man))
                    .collect::<CliResult<_>>()?,
                _ => {
                    return Err(usage(
                        "--method hips-outwards needs either --model or all of --model-hips/-torso/-head/-limbs",
                    ))
                }
            };
            let pm = if models.len() == 1 {
                PartModels::shared(&models[0])
            } else {
                PartModels::new(&models[0], &models[1], &models[2], &models[3])
            };
            fill_hips_outwards(&pm, &seq, &mask, &skel)?
        }
    };

    let smooth = a.smooth_window.is_some() || a.smooth_order.is_some() || a.smooth_scope.is_some() || a.smooth_edges.is_some();
    let out = if smooth {
        let defaults = SmoothingParams::default();
        let params = SmoothingParams {
            window: a.smooth_window.unwrap_or(defaults.window),
            order: a.smooth_order.unwrap_or(defaults.order),
            scope: match a.smooth_scope {
                Some(ScopeArg::Gaps) => SmoothScope::Gaps,
                Some(ScopeArg::All) | None => SmoothScope::All,
            },
            edges: match a.smooth_edges {
                Some(EdgeArg::Mirror) => EdgeMode::Mirror,
                Some(EdgeArg::Interp) | None => EdgeMode::Interp,
            },
        };
        let original = match &a.raw {
            Some(p) => read_seq(p, &mut man)?,
            None => seq.clone(),
        };
        postprocess(&filled, &original, &mask, &params)?
    } else {
        filled
    };
    write_markers(&out, &a.out)?;
    man.output(&a.out)?;
    man.write_beside(&a.out)?;
    Ok(())
}

// ---------------------------------------------------------------------------

#[derive(Clone, Copy, Debug, ValueEnum, PartialEq, Eq)]
pub enum EvalScope {
    All,
    Missing,
}

#[derive(Args, Debug)]
pub struct EvalArgs {
    /// Prediction files; each file stem is a stimulus id.
    #[arg(long, required = true)]
    pred: Vec<PathBuf>,
    /// Ground truth: one file for all predictions, or one per prediction.
    #[arg(long)]
    gt: Vec<PathBuf>,
    /// Masks: one for all predictions, or one per prediction.
    #[arg(long)]
    mask: Vec<PathBuf>,
    #[arg(long)]
    skel: Option<PathBuf>,
    /// Comma-separated subset of rmse,vd_gt,vd,bdp_gt,bdp.
    #[arg(long, value_delimiter = ',')]
    metrics: Option<Vec<MetricName>>,
    #[arg(long, default_value = "per_coordinate")]
    norm: NormMode,
    /// `missing` restricts rmse to masked-missing entries.
    #[arg(long, value_enum, default_value = "all")]
    scope: EvalScope,
    #[arg(long)]
    out: PathBuf,
}

fn pick<'a>(list: &'a [PathBuf], i: usize, what: &str, n: usize) -> CliResult<Option<&'a PathBuf>> {
    match list.len() {
        0 => Ok(None),
        1 => Ok(Some(&list[0])),
        k if k == n => Ok(Some(&list[i])),
        k => Err(usage(format!("{k} --{what} files for {n} predictions; give 1 or {n}"))),
    }
}

pub fn eval(a: &EvalArgs, raw: &[String]) -> CliResult<()> {
    let mut man = Manifest::new("eval", raw);
    let metrics = a.metrics.clone().unwrap_or_else(|| {
        if a.gt.is_empty() {
            vec![MetricName::Vd, MetricName::Bdp]
        } else {
            MetricName::ALL.to_vec()
        }
    });
    if a.gt.is_empty() {
        if let Some(m) = metrics.iter().find(|m| m.needs_ground_truth()) {
            return Err(usage(format!("metric {m} needs --gt")));
        }
    }
    if a.scope == EvalScope::Missing && a.mask.is_empty() {
        return Err(usage("--scope missing needs --mask"));
    }
    let n = a.pred.len();
    let mut seen = BTreeSet::new();
    let mut jobs = Vec::with_capacity(n);
    for (i, p) in a.pred.iter().enumerate() {
        let id = stem(p)?;
        if !seen.insert(id.clone()) {
            return Err(usage(format!("duplicate stimulus id {id}")));
        }
        jobs.push((id, p, pick(&a.gt, i, "gt", n)?, pick(&a.mask, i, "mask", n)?));
    }
    for (_, p, g, m) in &jobs {
        man.input(p)?;
        if let Some(g) = g {
            man.input(g)?;
        }
        if let Some(m) = m {
            man.input(m)?;
        }
    }
    let base_skel = load_skeleton(a.skel.as_deref(), &mut man)?;
    let per_stimulus: Vec<CliResult<Vec<MetricRow>>> = jobs
        .par_iter()
        .map(|(id, p, g, m)| -> CliResult<Vec<MetricRow>> {
            let pred = read_markers(p, None)?;
            let gt = g.map(|g| read_markers(g, None)).transpose()?;
            let skel = base_skel.for_markers(pred.marker_ids())?;
            let mask = match m {
                Some(m) => {
                    let (mask, ids) = read_mask(m)?;
                    if ids != pred.marker_ids() {
                        return Err(Error::Shape(format!("{}: mask markers differ from the prediction", m.display())).into());
                    }
                    Some(mask)
                }
                None => None,
            };
            let scope = if a.scope == EvalScope::Missing { mask.as_ref() } else { None };
            let ctx = |e: Error| e.context(format!("stimulus {id}"));
            metrics
                .iter()
                .map(|&metric| {
                    let gt = || gt.as_ref().expect("checked above");
                    let value = match metric {
                        MetricName::Rmse => rmse(&pred, gt(), a.norm, scope),
                        MetricName::VdGt => vd_gt(&pred, gt(), a.norm),
                        MetricName::Vd => vd(&pred, a.norm),
                        MetricName::BdpGt => bdp_gt(&pred, gt(), &skel),
                        MetricName::Bdp => bdp(&pred, &skel),
                    }
                    .map_err(ctx)?;
                    Ok(MetricRow {
                        stimulus_id: id.clone(),
                        metric,
                        value,
                        norm: a.norm,
                    })
                })
                .collect()
        })
        .collect();
    let mut report = MetricReport::default();
    for rows in per_stimulus {
        for row in rows? {
            report.push(row)?;
        }
    }
    atomic_write(&a.out, metrics_to_string(&report).as_bytes())?;
    man.output(&a.out)?;
    man.write_beside(&a.out)?;
    Ok(())
}

// ---------------------------------------------------------------------------

#[derive(Args, Debug)]
pub struct CorrelateArgs {
    #[arg(long)]
    metrics: PathBuf,
    #[arg(long)]
    ratings: PathBuf,
    #[arg(long, default_value_t = 50_000)]
    resamples: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
    /// Also write Krippendorff's alpha with a stimulus-level bootstrap
    /// interval.
    #[arg(long)]
    alpha_out: Option<PathBuf>,
}

/// Values of one metric per stimulus; a metric reported under two
/// normalisations is ambiguous.
fn metric_values(report: &MetricReport, metric: MetricName) -> CliResult<BTreeMap<String, f64>> {
    let norms: BTreeSet<String> = report
        .rows()
        .iter()
        .filter(|r| r.metric == metric)
        .map(|r| r.norm.to_string())
        .collect();
    if norms.len() > 1 {
        return Err(Error::InvalidArgument(format!("metric {metric} appears with several normalisations: {norms:?}")).into());
    }
    let mut out = BTreeMap::new();
    for r in report.rows().iter().filter(|r| r.metric == metric) {
        if out.insert(r.stimulus_id.clone(), r.value).is_some() {
            return Err(Error::InvalidArgument(format!("metric {metric} given twice for {}", r.stimulus_id)).into());
        }
    }
    Ok(out)
}

pub fn correlate(a: &CorrelateArgs, raw: &[String]) -> CliResult<()> {
    let mut man = Manifest::new("correlate", raw);
    man.input(&a.metrics)?;
    man.input(&a.ratings)?;
    let report = read_metrics(&a.metrics)?;
    let ratings = read_ratings(&a.ratings)?;
    let scores = aggregate(&ratings)?;
    let known = report.stimuli();
    let unknown: Vec<&str> = scores.scores.keys().map(String::as_str).filter(|s| !known.contains(s)).collect();
    if !unknown.is_empty() {
        return Err(Error::Missing(format!("ratings name stimuli absent from the metrics: {}", unknown.join(", "))).into());
    }
    let unrated: Vec<&str> = known.iter().copied().filter(|s| !scores.scores.contains_key(*s)).collect();
    if !unrated.is_empty() {
        eprintln!("warning: no ratings for {}; excluded", unrated.join(", "));
    }
    let mut rows = vec![];
    for metric in report.metrics() {
        let values = metric_values(&report, metric)?;
        let mut pairs = vec![];
        let mut lacking = vec![];
        for (id, s) in &scores.scores {
            match values.get(id) {
                Some(&v) => pairs.push((v, s.mean)),
                None => lacking.push(id.as_str()),
            }
        }
        if !lacking.is_empty() {
            eprintln!("warning: {metric} missing for {}; omitted", lacking.join(", "));
        }
        if pairs.len() < 2 {
            eprintln!("warning: {metric} has fewer than 2 rated stimuli; omitted");
            continue;
        }
        rows.push(correlate_metric(metric, &pairs, a.resamples, a.seed).map_err(|e| e.context(format!("metric {metric}")))?);
    }
    atomic_write(&a.out, correlations_to_string(&rows).as_bytes())?;
    man.output(&a.out)?;
    if let Some(path) = &a.alpha_out {
        let units: Vec<Vec<i64>> = ratings.by_stimulus().into_values().collect();
        let cats = ratings.categories();
        let alpha = alpha_from_units(&units, cats)?;
        let ci = bootstrap_ci(&units, a.resamples, a.seed, |s| alpha_from_units(s, cats))?;
        let text = format!("alpha,ci_lo,ci_hi,n_stimuli\n{alpha},{},{},{}\n", ci.lo, ci.hi, units.len());
        atomic_write(path, text.as_bytes())?;
        man.output(path)?;
    }
    man.write_beside(&a.out)?;
    Ok(())
}

// ---------------------------------------------------------------------------

#[derive(Args, Debug)]
pub struct ReportArgs {
    #[arg(long)]
    metrics: PathBuf,
    #[arg(long)]
    ratings: Option<PathBuf>,
    #[arg(long)]
    out_dir: PathBuf,
}

/// Stimulus id up to the first underscore.
fn condition_of(stimulus: &str) -> &str {
    stimulus.split('_').next().unwrap_or(stimulus)
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

pub fn report(a: &ReportArgs, raw: &[String]) -> CliResult<()> {
    let mut man = Manifest::new("report", raw);
    man.input(&a.metrics)?;
    let report = read_metrics(&a.metrics)?;
    let scores = match &a.ratings {
        Some(p) => {
            man.input(p)?;
            Some(aggregate(&read_ratings(p)?)?)
        }
        None => None,
    };
    std::fs::create_dir_all(&a.out_dir).map_err(|e| Error::io(&a.out_dir, e))?;
    let metrics: Vec<MetricName> = report.metrics().into_iter().collect();
    let mut values = BTreeMap::new();
    for &m in &metrics {
        values.insert(m, metric_values(&report, m)?);
    }
    let stimuli: Vec<String> = report.stimuli().into_iter().map(str::to_string).collect();
    let conditions: Vec<String> = stimuli
        .iter()
        .map(|s| condition_of(s).to_string())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();

    let mut written: Vec<PathBuf> = vec![];
    let mut md = String::from("# Metric report\n\n");
    md.push_str(&format!("{} stimuli in {} conditions.\n\n", stimuli.len(), conditions.len()));

    md.push_str("## Per stimulus\n\n| stimulus |");
    for m in &metrics {
        md.push_str(&format!(" {m} |"));
    }
    if scores.is_some() {
        md.push_str(" mean rating |");
    }
    md.push_str("\n|---|");
    for _ in &metrics {
        md.push_str("---:|");
    }
    if scores.is_some() {
        md.push_str("---:|");
    }
    md.push('\n');
    for s in &stimuli {
        md.push_str(&format!("| {s} |"));
        for m in &metrics {
            match values[m].get(s) {
                Some(v) => md.push_str(&format!(" {v:.3} |")),
                None => md.push_str(" - |"),
            }
        }
        if let Some(sc) = &scores {
            match sc.mean_of(s) {
                Some(v) => md.push_str(&format!(" {v:.2} |")),
                None => md.push_str(" - |"),
            }
        }
        md.push('\n');
    }

    // per-condition means
    let cond_mean = |vals: &BTreeMap<String, f64>, c: &str| -> Option<f64> {
        let v: Vec<f64> = vals.iter().filter(|(s, _)| condition_of(s) == c).map(|(_, v)| *v).collect();
        (!v.is_empty()).then(|| mean(&v))
    };
    md.push_str("\n## Per condition\n\n| condition |");
    for m in &metrics {
        md.push_str(&format!(" {m} |"));
    }
    md.push_str("\n|---|");
    for _ in &metrics {
        md.push_str("---:|");
    }
    md.push('\n');
    let mut series = vec![];
    for m in &metrics {
        series.push((m.to_string(), conditions.iter().map(|c| cond_mean(&values[m], c).unwrap_or(0.0)).collect::<Vec<_>>()));
    }
    for (ci, c) in conditions.iter().enumerate() {
        md.push_str(&format!("| {c} |"));
        for (_, v) in &series {
            md.push_str(&format!(" {:.3} |", v[ci]));
        }
        md.push('\n');
    }
    let bars = a.out_dir.join("conditions.svg");
    atomic_write(&bars, plot::bar_chart("Mean metric per condition", "cm", &conditions, &series).as_bytes())?;
    written.push(bars);
    md.push_str("\n![metrics per condition](conditions.svg)\n");

    if let Some(sc) = &scores {
        let rating_means: BTreeMap<String, f64> = sc.scores.iter().map(|(k, v)| (k.clone(), v.mean)).collect();
        let per_cond: Vec<f64> = conditions
            .iter()
            .map(|c| cond_mean(&rating_means, c).unwrap_or(0.0))
            .collect();
        let path = a.out_dir.join("ratings.svg");
        atomic_write(
            &path,
            plot::bar_chart("Mean rating per condition", "rating", &conditions, &[("rating".into(), per_cond)]).as_bytes(),
        )?;
        written.push(path);
        md.push_str("\n## Ratings\n\n![ratings per condition](ratings.svg)\n");
        for m in &metrics {
            let pts: Vec<(String, f64, f64)> = values[m]
                .iter()
                .filter_map(|(s, v)| sc.mean_of(s).map(|r| (s.clone(), *v, r)))
                .collect();
            let name = format!("scatter_{m}.svg");
            let path = a.out_dir.join(&name);
            atomic_write(
                &path,
                plot::scatter(&format!("{m} vs mean rating"), &format!("{m} (cm)"), "mean rating", &pts, true).as_bytes(),
            )?;
            written.push(path);
            md.push_str(&format!("\n![{m} vs rating]({name})\n"));
        }
    } else {
        md.push_str("\n## Values\n");
        for m in &metrics {
            let pts: Vec<(String, f64, f64)> = values[m]
                .iter()
                .map(|(s, v)| {
                    let c = conditions.iter().position(|c| c == condition_of(s)).unwrap_or(0);
                    (s.clone(), *v, c as f64)
                })
                .collect();
            let name = format!("values_{m}.svg");
            let path = a.out_dir.join(&name);
            atomic_write(&path, plot::scatter(&format!("{m} per stimulus"), &format!("{m} (cm)"), "condition index", &pts, false).as_bytes())?;
            written.push(path);
            md.push_str(&format!("\n![{m} per stimulus]({name})\n"));
        }
    }
    let md_path = a.out_dir.join("report.md");
    atomic_write(&md_path, md.as_bytes())?;
    written.push(md_path);
    for p in &written {
        man.output(p)?;
    }
    man.write_to(&a.out_dir.join("manifest.json"))?;
    Ok(())
}
