//! Subcommand implementations.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use log::info;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use seabed_core::bayes::{synthesize, ForwardModel, Likelihood};
use seabed_core::diagnostics::{
    credibility_band, kde, posterior_mean_seabed, sample_curves, summarize, BandMethod, ChainSummary, MIN_BAND_SAMPLES,
};
use seabed_core::io::{self, atomic_write, CurveMeta};
use seabed_core::prior::{out_of_prior_seabed, KlBasis, SeabedCurve};
use seabed_core::samplers::{fes_run, gibbs_run, run_with_warmup, GibbsState, Phase, SampleSet, SamplerConfig};
use seabed_core::solver::Measurement;

use crate::config::RunConfig;
use crate::error::{CliError, CliResult};
use crate::manifest::{record, sha256_file, FileRecord, RunManifest, MANIFEST_NAME, MANIFEST_SCHEMA};
use crate::plot::{line_plot, Series};
use crate::{Command, Common, DiagnoseArgs, GenerateArgs, OopArgs, SampleArgs, SeabedArgs};

/// Files read and written by one command.
#[derive(Debug, Default)]
pub struct RunRecord {
    pub inputs: Vec<FileRecord>,
    pub outputs: Vec<String>,
    pub timings: BTreeMap<String, f64>,
    pub summary: String,
}

struct Ctx<'a> {
    out: &'a Path,
    svg: bool,
    rec: RunRecord,
}

impl Ctx<'_> {
    fn output(&mut self, name: &str) -> PathBuf {
        self.rec.outputs.push(name.to_string());
        self.out.join(name)
    }

    fn input(&mut self, path: &Path) -> CliResult<()> {
        self.rec.inputs.push(record(path, path.display().to_string())?);
        Ok(())
    }

    fn time<T>(&mut self, stage: &str, f: impl FnOnce() -> T) -> T {
        let t = Instant::now();
        let v = f();
        self.rec.timings.insert(stage.to_string(), t.elapsed().as_secs_f64());
        v
    }

    fn write_svg(&mut self, name: &str, svg: String) -> CliResult<()> {
        if self.svg {
            let p = self.output(name);
            atomic_write(&p, svg.as_bytes())?;
        }
        Ok(())
    }
}

fn common(cmd: &Command) -> Option<&Common> {
    match cmd {
        Command::Forward(a) => Some(&a.common),
        Command::GenerateData(a) => Some(&a.common),
        Command::SampleFixedS(a) | Command::SampleMwg(a) | Command::SampleFes(a) => Some(&a.common),
        Command::Diagnose(a) => Some(&a.common),
        Command::MakeOopSeabed(a) => Some(&a.common),
        Command::Replay(_) => None,
    }
}

fn absolute(p: &Path) -> CliResult<PathBuf> {
    std::fs::canonicalize(p).map_err(|e| CliError::Config(format!("cannot open {}: {e}", p.display())))
}

/// Makes input paths absolute so the recorded command can be replayed from
/// any working directory.
fn canonicalize_inputs(cmd: &mut Command) -> CliResult<()> {
    match cmd {
        Command::Forward(a) => {
            if let Some(p) = &a.seabed.seabed {
                a.seabed.seabed = Some(absolute(p)?);
            }
        }
        Command::GenerateData(a) => {
            if let Some(p) = &a.seabed.seabed {
                a.seabed.seabed = Some(absolute(p)?);
            }
        }
        Command::SampleFixedS(a) | Command::SampleMwg(a) | Command::SampleFes(a) => a.data = absolute(&a.data)?,
        Command::Diagnose(a) => {
            a.samples = absolute(&a.samples)?;
            if let Some(p) = &a.truth {
                a.truth = Some(absolute(p)?);
            }
        }
        Command::MakeOopSeabed(_) | Command::Replay(_) => {}
    }
    Ok(())
}

/// Folds command-line flags into the configuration so that the manifest
/// records the values actually used.
fn apply_flags(cmd: &Command, cfg: &mut RunConfig) {
    let sample = |a: &SampleArgs, cfg: &mut RunConfig, which: &Command| {
        if let Some(seed) = a.seed {
            cfg.chain.seed = seed;
        }
        match which {
            Command::SampleFixedS(_) => {
                if let Some(n) = a.samples {
                    cfg.pcn.n_sample = n;
                }
                if let Some(n) = a.warmup {
                    cfg.pcn.n_warmup = n;
                }
            }
            Command::SampleMwg(_) => {
                if let Some(n) = a.samples {
                    cfg.mwg.n_sample = n;
                }
                if let Some(n) = a.warmup {
                    cfg.mwg.n_warmup = n;
                }
            }
            _ => {
                if let Some(n) = a.samples {
                    cfg.fes.n_sample = n;
                }
                if let Some(n) = a.warmup {
                    cfg.fes.ensemble.n_warmup = n;
                }
            }
        }
    };
    let seabed = |s: &SeabedArgs, cfg: &mut RunConfig| {
        if let Some(seed) = s.truth_seed {
            cfg.data.truth_seed = seed;
        }
        if let Some(v) = s.truth_s {
            cfg.data.truth_s = v;
        }
    };
    match cmd {
        Command::Forward(a) => seabed(&a.seabed, cfg),
        Command::GenerateData(a) => {
            seabed(&a.seabed, cfg);
            if let Some(seed) = a.noise_seed {
                cfg.data.noise_seed = seed;
            }
        }
        Command::SampleFixedS(a) | Command::SampleMwg(a) | Command::SampleFes(a) => sample(a, cfg, cmd),
        _ => {}
    }
}

fn thread_count(cfg: &RunConfig) -> CliResult<usize> {
    match std::env::var("SEABED_THREADS") {
        Ok(v) => v
            .trim()
            .parse::<usize>()
            .ok()
            .filter(|&n| n > 0)
            .ok_or_else(|| CliError::Config(format!("SEABED_THREADS must be a positive integer, got '{v}'"))),
        Err(_) => Ok(cfg.threads.unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))),
    }
}

/// Runs `cmd` with a resolved configuration inside a thread pool of the
/// configured size and writes outputs plus manifest into `out`.
pub fn execute(cmd: &Command, cfg: &RunConfig, out: &Path) -> CliResult<RunManifest> {
    let threads = thread_count(cfg)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| CliError::Config(format!("thread pool: {e}")))?;
    std::fs::create_dir_all(out)?;
    let svg = common(cmd).is_some_and(|c| c.svg);
    let mut ctx = Ctx { out, svg, rec: RunRecord::default() };
    pool.install(|| match cmd {
        Command::Forward(a) => forward(&mut ctx, cfg, &a.seabed),
        Command::GenerateData(a) => generate_data(&mut ctx, cfg, a),
        Command::SampleFixedS(a) => sample_fixed_s(&mut ctx, cfg, a),
        Command::SampleMwg(a) => sample_mwg(&mut ctx, cfg, a),
        Command::SampleFes(a) => sample_fes(&mut ctx, cfg, a),
        Command::Diagnose(a) => diagnose(&mut ctx, cfg, a),
        Command::MakeOopSeabed(a) => make_oop(&mut ctx, cfg, a),
        Command::Replay(_) => Err(CliError::Usage("replay cannot be nested".into())),
    })?;
    let outputs = ctx
        .rec
        .outputs
        .iter()
        .map(|name| record(&out.join(name), name.clone()))
        .collect::<CliResult<Vec<_>>>()?;
    let manifest = RunManifest {
        schema: MANIFEST_SCHEMA.into(),
        version: env!("CARGO_PKG_VERSION").into(),
        command: cmd.clone(),
        config: cfg.clone(),
        threads,
        inputs: ctx.rec.inputs,
        outputs,
        timings: ctx.rec.timings,
    };
    manifest.write(out)?;
    info!("{}", ctx.rec.summary);
    Ok(manifest)
}

/// Entry point behind [`crate::run`]; returns a one-line summary.
pub fn dispatch(mut cmd: Command) -> CliResult<String> {
    if let Command::Replay(a) = &cmd {
        let out = a.out.clone().unwrap_or_else(|| a.manifest.parent().unwrap_or(Path::new(".")).join("replay"));
        let n = replay(&a.manifest, &out)?;
        return Ok(format!("replay: {n} outputs bitwise identical ({})", out.display()));
    }
    canonicalize_inputs(&mut cmd)?;
    let c = common(&cmd).expect("non-replay command");
    let mut cfg = RunConfig::load(c.config.as_deref(), &c.overrides)?;
    apply_flags(&cmd, &mut cfg);
    let out = c.out.clone();
    let manifest = execute(&cmd, &cfg, &out)?;
    Ok(format!("wrote {} files and {} to {}", manifest.outputs.len(), MANIFEST_NAME, out.display()))
}

/// Re-executes a manifest into `out` and compares every output hash.
/// Returns the number of identical outputs.
pub fn replay(manifest_path: &Path, out: &Path) -> CliResult<usize> {
    let m = RunManifest::read(manifest_path)?;
    for input in &m.inputs {
        let now = sha256_file(Path::new(&input.path))
            .map_err(|e| CliError::Config(format!("input {} unavailable: {e}", input.path)))?;
        if now != input.sha256 {
            return Err(CliError::Mismatch(format!("input {} changed since the recorded run", input.path)));
        }
    }
    let again = execute(&m.command, &m.config, out)?;
    let mut differing = Vec::new();
    for rec in &m.outputs {
        match again.outputs.iter().find(|r| r.path == rec.path) {
            Some(r) if r.sha256 == rec.sha256 => {}
            _ => differing.push(rec.path.clone()),
        }
    }
    if !differing.is_empty() || again.outputs.len() != m.outputs.len() {
        return Err(CliError::Mismatch(format!("outputs differ: {}", differing.join(", "))));
    }
    Ok(m.outputs.len())
}

fn resolve_seabed(ctx: &mut Ctx, cfg: &RunConfig, args: &SeabedArgs) -> CliResult<(SeabedCurve, Option<u64>)> {
    if let Some(p) = &args.seabed {
        ctx.input(p)?;
        return Ok((io::read_curve(p)?, None));
    }
    if let Some(h) = args.flat {
        return Ok((SeabedCurve::flat(cfg.kl.grid(), h), None));
    }
    let basis = KlBasis::new(cfg.kl)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.data.truth_seed);
    Ok((basis.sample_prior(&mut rng, cfg.data.truth_s, cfg.mean_offset)?, Some(cfg.data.truth_seed)))
}

fn write_curve(ctx: &mut Ctx, name: &str, curve: &SeabedCurve, ell: Option<f64>, seed: Option<u64>) -> CliResult<()> {
    let p = ctx.output(name);
    io::write_curve(&p, curve, &CurveMeta::new(curve, ell, seed))?;
    ctx.rec.outputs.push(io::sidecar_path(Path::new(name)).display().to_string());
    Ok(())
}

/// Trace of the sensor nearest the centre, one column per frequency.
fn write_center_trace(ctx: &mut Ctx, name: &str, m: &Measurement) -> CliResult<()> {
    let k = m.n_sensor() / 2;
    let t: Vec<f64> = (1..=m.n_time()).map(|l| l as f64 * m.meta.dt).collect();
    let cols: Vec<Vec<f64>> = (0..m.n_freq()).map(|i| (0..m.n_time()).map(|l| m.get(i, k, l)).collect()).collect();
    let names: Vec<String> = m.meta.frequencies.iter().map(|f| format!("f0={f}")).collect();
    let mut all_names = vec!["t"];
    all_names.extend(names.iter().map(String::as_str));
    let mut all_cols: Vec<&[f64]> = vec![&t];
    all_cols.extend(cols.iter().map(Vec::as_slice));
    let p = ctx.output(&format!("{name}.csv"));
    io::write_columns(&p, &all_names, &all_cols)?;
    let series: Vec<Series> = cols.iter().zip(&names).map(|(c, n)| Series::line(n, &t, c)).collect();
    let title = format!("surface trace at x = {}", m.meta.sensor_xs[k]);
    ctx.write_svg(&format!("{name}.svg"), line_plot(&title, "t", "u", &series))
}

fn forward(ctx: &mut Ctx, cfg: &RunConfig, args: &SeabedArgs) -> CliResult<()> {
    let (h, seed) = resolve_seabed(ctx, cfg, args)?;
    let fwd = cfg.inference_context()?;
    let m = ctx.time("forward", || fwd.forward(&h))?;
    io::write_measurement(&ctx.output("measurement.csv"), &m)?;
    write_curve(ctx, "seabed.csv", &h, Some(cfg.kl.ell), seed)?;
    write_center_trace(ctx, "trace_center", &m)?;
    ctx.rec.summary = format!("{} snapshots x {} sensors x {} channels", m.n_time(), m.n_sensor(), m.n_freq());
    Ok(())
}

fn generate_data(ctx: &mut Ctx, cfg: &RunConfig, args: &GenerateArgs) -> CliResult<()> {
    if (cfg.data.nx, cfg.data.ny) == (cfg.mesh.nx, cfg.mesh.ny) && !args.allow_inverse_crime {
        return Err(CliError::Config(format!(
            "data mesh {}x{} equals the inference mesh; pass --allow-inverse-crime to proceed anyway",
            cfg.data.nx, cfg.data.ny
        )));
    }
    let (h, seed) = resolve_seabed(ctx, cfg, &args.seabed)?;
    let fwd = cfg.data_context()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.data.noise_seed);
    let (clean, noisy) = ctx.time("forward", || {
        synthesize(&fwd, &h, cfg.data.noise.rel_level, Some(cfg.data.noise_seed), &mut rng)
    })?;
    io::write_measurement(&ctx.output("data.csv"), &noisy)?;
    io::write_measurement(&ctx.output("clean.csv"), &clean)?;
    write_curve(ctx, "truth.csv", &h, Some(cfg.kl.ell), seed)?;
    write_center_trace(ctx, "trace_center", &noisy)?;
    ctx.rec.summary = format!("noise sigma {:?}", noisy.sigma.as_deref().unwrap_or(&[]));
    Ok(())
}

fn forward_model(ctx: &mut Ctx, cfg: &RunConfig, data: &Path) -> CliResult<ForwardModel> {
    ctx.input(data)?;
    let m = io::read_measurement(data)?;
    let lik = Likelihood::new(m, cfg.data.noise.convention)?;
    Ok(ForwardModel::new(cfg.inference_context()?, KlBasis::new(cfg.kl)?, lik, cfg.mean_offset)?)
}

fn sampler_config(cfg: &RunConfig, n_sample: usize, n_inner_h: usize, n_inner_s: usize, phase: Phase) -> SamplerConfig {
    SamplerConfig {
        beta_h: cfg.chain.beta_h,
        beta_s: cfg.chain.beta_s,
        n_sample,
        n_inner_h,
        n_inner_s,
        phase,
        adapt: cfg.chain.adapt,
        bounds: cfg.chain.bounds,
        seed: cfg.chain.seed,
    }
}

fn write_chains(ctx: &mut Ctx, warm: &SampleSet, online: &SampleSet) -> CliResult<()> {
    io::write_samples(&ctx.output("warmup.csv"), warm)?;
    io::write_samples(&ctx.output("samples.csv"), online)?;
    let (ah, as_) = online.acceptance();
    ctx.rec.summary = format!(
        "{} online samples, acceptance h {ah:.3} s {as_:.3}, beta_h {:.4e} beta_s {:.4e}",
        online.len(),
        online.beta_h,
        online.beta_s
    );
    Ok(())
}

fn sample_fixed_s(ctx: &mut Ctx, cfg: &RunConfig, args: &SampleArgs) -> CliResult<()> {
    let mut model = forward_model(ctx, cfg, &args.data)?;
    let s = cfg.pcn.s;
    let init = GibbsState::new(vec![0.0; cfg.kl.n_kl], s, &mut model)?;
    let scfg = sampler_config(cfg, cfg.pcn.n_sample, 1, 0, Phase::WarmUp);
    let (warm, online) = ctx.time("sampling", || run_with_warmup(&scfg, cfg.pcn.n_warmup, &mut model, init))?;
    write_chains(ctx, &warm, &online)
}

fn sample_mwg(ctx: &mut Ctx, cfg: &RunConfig, args: &SampleArgs) -> CliResult<()> {
    let mut model = forward_model(ctx, cfg, &args.data)?;
    let w = &cfg.mwg;
    if w.n_inner_warmup == 0 || w.n_inner_online == 0 {
        return Err(CliError::Config("mwg inner loop lengths must be >= 1".into()));
    }
    let init = GibbsState::new(vec![0.0; cfg.kl.n_kl], w.s_init, &mut model)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.chain.seed);
    let warm_cfg = sampler_config(cfg, w.n_warmup, w.n_inner_warmup, w.n_inner_warmup, Phase::WarmUp);
    let (warm, state) = ctx.time("warmup", || gibbs_run(&warm_cfg, &mut model, init, &mut rng))?;
    let mut online_cfg = sampler_config(cfg, w.n_sample, w.n_inner_online, w.n_inner_online, Phase::Online);
    if w.n_warmup > 0 {
        online_cfg.beta_h = warm.beta_h;
        online_cfg.beta_s = warm.beta_s;
    }
    let (online, _) = ctx.time("online", || gibbs_run(&online_cfg, &mut model, state, &mut rng))?;
    write_chains(ctx, &warm, &online)
}

fn sample_fes(ctx: &mut Ctx, cfg: &RunConfig, args: &SampleArgs) -> CliResult<()> {
    let mut model = forward_model(ctx, cfg, &args.data)?;
    let basis = KlBasis::new(cfg.kl)?;
    let s = cfg.fes.s;
    // Walkers start from independent prior draws that stay inside the domain.
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.chain.seed.wrapping_add(0x9e37_79b9_7f4a_7c15));
    let init = (0..cfg.fes.ensemble.n_walkers)
        .map(|_| basis.sample_prior(&mut rng, s, cfg.mean_offset).map(|c| c.coeffs.expect("expansion coefficients")))
        .collect::<seabed_core::Result<Vec<_>>>()?;
    let scfg = sampler_config(cfg, cfg.fes.n_sample, 1, 0, Phase::WarmUp);
    let out = ctx.time("sampling", || fes_run(&cfg.fes.ensemble, &scfg, &mut model, s, init))?;
    write_chains(ctx, &out.warmup, &out.online)
}

#[derive(Debug, Serialize)]
struct CoeffReport {
    j: usize,
    #[serde(flatten)]
    summary: ChainSummary,
    truth: Option<f64>,
    truth_in_hpd95: Option<bool>,
}

#[derive(Debug, Serialize)]
struct DiagnosticsReport {
    n_samples: usize,
    acceptance_h: f64,
    acceptance_s: f64,
    beta_h: f64,
    beta_s: f64,
    s: Option<ChainSummary>,
    phi: ChainSummary,
    coefficients: Vec<CoeffReport>,
    band_level: f64,
    band_method: String,
    band_coverage_truth: Option<f64>,
    mean_seabed_max_error: Option<f64>,
}

fn diagnose(ctx: &mut Ctx, cfg: &RunConfig, args: &DiagnoseArgs) -> CliResult<()> {
    if !(args.level > 0.0 && args.level < 1.0) {
        return Err(CliError::Usage(format!("--level must lie in (0, 1), got {}", args.level)));
    }
    ctx.input(&args.samples)?;
    let set = io::read_samples(&args.samples)?;
    if set.n_kl != cfg.kl.n_kl {
        return Err(CliError::Config(format!("sample file has {} coefficients, kl.n_kl = {}", set.n_kl, cfg.kl.n_kl)));
    }
    let truth = match &args.truth {
        Some(p) => {
            ctx.input(p)?;
            Some(io::read_curve(p)?)
        }
        None => None,
    };
    let basis = KlBasis::new(cfg.kl)?;
    let (acc_h, acc_s) = set.acceptance();
    let s_chain = set.s_chain();
    let s_varies = s_chain.windows(2).any(|w| w[0] != w[1]);
    let n_coeffs = args.n_coeffs.min(set.n_kl);

    let truth_coeffs = truth.as_ref().and_then(|t| t.coeffs.clone());
    let coefficients: Vec<CoeffReport> = (0..set.n_kl)
        .map(|j| {
            let summary = summarize(&set.coeff_chain(j));
            let t = truth_coeffs.as_ref().and_then(|c| c.get(j).copied());
            let inside = t.zip(summary.hpd95).map(|(t, (lo, hi))| lo <= t && t <= hi);
            CoeffReport { j: j + 1, summary, truth: t, truth_in_hpd95: inside }
        })
        .collect();
    let hpd_cols: Vec<Vec<f64>> = vec![
        coefficients.iter().map(|c| c.j as f64).collect(),
        coefficients.iter().map(|c| c.summary.mean).collect(),
        coefficients.iter().map(|c| c.summary.hpd95.map_or(f64::NAN, |h| h.0)).collect(),
        coefficients.iter().map(|c| c.summary.hpd95.map_or(f64::NAN, |h| h.1)).collect(),
        coefficients.iter().map(|c| c.truth.unwrap_or(f64::NAN)).collect(),
    ];
    let refs: Vec<&[f64]> = hpd_cols.iter().map(Vec::as_slice).collect();
    io::write_columns(&ctx.output("coefficients.csv"), &["j", "mean", "hpd95_lo", "hpd95_hi", "truth"], &refs)?;
    ctx.write_svg(
        "coefficients.svg",
        line_plot(
            "posterior mean and 95% HPD per coefficient",
            "j",
            "beta_j",
            &[
                Series::line("mean", &hpd_cols[0], &hpd_cols[1]),
                Series::dashed("hpd lo", &hpd_cols[0], &hpd_cols[2]),
                Series::dashed("hpd hi", &hpd_cols[0], &hpd_cols[3]),
                Series::line("truth", &hpd_cols[0], &hpd_cols[4]),
            ],
        ),
    )?;

    // Traces.
    let idx: Vec<f64> = (0..set.len()).map(|i| i as f64).collect();
    let mut trace_names = vec!["iteration".to_string(), "walker".into(), "s".into(), "phi".into()];
    let mut trace_cols = vec![
        set.samples.iter().map(|c| c.iteration as f64).collect::<Vec<_>>(),
        set.samples.iter().map(|c| c.walker as f64).collect(),
        s_chain.clone(),
        set.phi_chain(),
    ];
    for j in 0..n_coeffs {
        trace_names.push(format!("beta_{}", j + 1));
        trace_cols.push(set.coeff_chain(j));
    }
    let names: Vec<&str> = trace_names.iter().map(String::as_str).collect();
    let refs: Vec<&[f64]> = trace_cols.iter().map(Vec::as_slice).collect();
    io::write_columns(&ctx.output("trace.csv"), &names, &refs)?;
    let series: Vec<Series> = (0..n_coeffs).map(|j| Series::line(names[4 + j], &idx, &trace_cols[4 + j])).collect();
    ctx.write_svg("trace.svg", line_plot("coefficient traces", "sample", "beta_j", &series))?;

    // Regularity.
    let s_summary = if s_varies && s_chain.len() >= 10 {
        let d = kde(&s_chain, None)?;
        io::write_columns(&ctx.output("kde_s.csv"), &["s", "density"], &[&d.x, &d.density])?;
        ctx.write_svg("kde_s.svg", line_plot("posterior density of s", "s", "density", &[Series::line("KDE", &d.x, &d.density)]))?;
        ctx.write_svg("trace_s.svg", line_plot("trace of s", "sample", "s", &[Series::line("s", &idx, &s_chain)]))?;
        Some(summarize(&s_chain))
    } else {
        None
    };

    // Seabed band and posterior mean.
    let method = if args.hpd_band { BandMethod::Hpd } else { BandMethod::EqualTailed };
    let mut coverage = None;
    let mut mean_err = None;
    if set.len() >= MIN_BAND_SAMPLES {
        let curves = sample_curves(&set, &basis, cfg.mean_offset)?;
        let x = basis.config().grid().points();
        let band = credibility_band(&x, &curves, args.level, method)?;
        let hbar = posterior_mean_seabed(&set, &basis, cfg.mean_offset, args.s)?;
        let mut names = vec!["x", "lower", "upper", "mean", "posterior_mean"];
        let mut cols: Vec<&[f64]> = vec![&band.x, &band.lower, &band.upper, &band.mean, &hbar.values];
        let truth_on_grid = match &truth {
            Some(t) => Some(x.iter().map(|&xi| t.height_at(xi)).collect::<seabed_core::Result<Vec<f64>>>()?),
            None => None,
        };
        if let Some(t) = &truth_on_grid {
            names.push("truth");
            cols.push(t);
            coverage = Some(band.coverage(t, -2.0, 2.0));
            mean_err = Some(t.iter().zip(&hbar.values).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max));
        }
        io::write_columns(&ctx.output("band.csv"), &names, &cols)?;
        let mut series = vec![
            Series::dashed("lower", &band.x, &band.lower),
            Series::dashed("upper", &band.x, &band.upper),
            Series::line("posterior mean", &band.x, &hbar.values),
        ];
        if let Some(t) = &truth_on_grid {
            series.push(Series::line("truth", &band.x, t));
        }
        ctx.write_svg("band.svg", line_plot(&format!("{}% pointwise band", args.level * 100.0), "x", "h", &series))?;
    } else {
        log::warn!("{} samples are too few for a credibility band (need {MIN_BAND_SAMPLES})", set.len());
    }

    let report = DiagnosticsReport {
        n_samples: set.len(),
        acceptance_h: acc_h,
        acceptance_s: acc_s,
        beta_h: set.beta_h,
        beta_s: set.beta_s,
        s: s_summary,
        phi: summarize(&set.phi_chain()),
        coefficients,
        band_level: args.level,
        band_method: format!("{method:?}"),
        band_coverage_truth: coverage,
        mean_seabed_max_error: mean_err,
    };
    let mut bytes = serde_json::to_vec_pretty(&report)?;
    bytes.push(b'\n');
    atomic_write(&ctx.output("summary.json"), &bytes)?;
    ctx.rec.summary = match (&report.s, coverage) {
        (Some(s), _) => format!("s: median {:.3}, ESS {:?}", s.median, s.ess),
        (None, Some(c)) => format!("band coverage of truth on [-2, 2]: {c:.3}"),
        _ => format!("{} samples summarised", report.n_samples),
    };
    Ok(())
}

fn make_oop(ctx: &mut Ctx, cfg: &RunConfig, args: &OopArgs) -> CliResult<()> {
    if args.count == 0 {
        return Err(CliError::Usage("--count must be >= 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(args.seed);
    let mut first = None;
    for k in 0..args.count {
        let curve = out_of_prior_seabed(&mut rng, &cfg.oop)?;
        let name = if args.count == 1 { "seabed.csv".to_string() } else { format!("seabed_{k:03}.csv") };
        write_curve(ctx, &name, &curve, None, Some(args.seed))?;
        first.get_or_insert(curve);
    }
    if let Some(c) = first {
        let x = c.grid.points();
        ctx.write_svg("seabed.svg", line_plot("generated seabed", "x", "h", &[Series::line("h", &x, &c.values)]))?;
    }
    ctx.rec.summary = format!("{} seabeds", args.count);
    Ok(())
}
