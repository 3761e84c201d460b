use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::Context as _;
use serde::Serialize;

use super::manifest::{sha256_file, sha256_hex, InputDigest, OutputDigest, RunManifest};
use super::{
    DispatchSessionArgs, GenerateArgs, GeneratePricesArgs, PeakStudyArgs, QuantileArgs,
    RunContext, ScenarioArgs,
};
use crate::aggregate::{
    cp_load_profiles, mix_seed, peak_study_from_loads, quantile_by_hour, AggregateProfile,
    CpFleet,
};
use crate::dispatch::{dispatch, evaluate_cost, DispatchStrategy};
use crate::io::{
    format_utc, generate_synthetic_fleet, generate_synthetic_prices, write_prices,
    write_results, write_sessions, PriceSource, ResultFormat, ResultRef, ScenarioConfig,
    SessionCostRow, SessionSource, SyntheticFleetParams, SyntheticPriceParams,
};
use crate::model::{validate_session, ChargingSession, PriceSeries, SessionWindow, TimeGrid};

/// A scenario with its data loaded and mapped onto the grid.
struct Prepared {
    cfg: ScenarioConfig,
    grid: TimeGrid,
    strategy: DispatchStrategy,
    windows: Arc<Vec<SessionWindow>>,
    inputs: Vec<InputDigest>,
}

/// Loaded inputs shared between scenarios of one invocation.
#[derive(Default)]
struct Cache {
    sessions: HashMap<String, (Arc<Vec<ChargingSession>>, InputDigest)>,
    prices: HashMap<String, (Arc<PriceSeries>, InputDigest)>,
    windows: HashMap<String, Arc<Vec<SessionWindow>>>,
}

fn scenarios(args: &ScenarioArgs) -> anyhow::Result<Vec<ScenarioConfig>> {
    if args.scenarios.is_empty() {
        return Ok(ScenarioConfig::presets());
    }
    args.scenarios
        .iter()
        .map(|s| ScenarioConfig::resolve(s).map_err(Into::into))
        .collect()
}

fn slug(alias: &str) -> String {
    alias
        .replace('λ', "lambda")
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || "+-_.".contains(c) { c } else { '_' })
        .collect()
}

fn prepare(
    ctx: &mut RunContext,
    cache: &mut Cache,
    cfg: ScenarioConfig,
    args: &ScenarioArgs,
) -> anyhow::Result<Prepared> {
    let grid = cfg.grid.build()?;
    let mut inputs = vec![InputDigest {
        role: "scenario".into(),
        source: cfg.alias.clone(),
        is_file: false,
        sha256: sha256_hex(cfg.to_toml_string().as_bytes()),
    }];

    let prices = if cfg.needs_prices() {
        let key = match &args.prices {
            Some(p) => format!("file:{}", p.display()),
            None => format!("{:?}|{:?}", cfg.prices, cfg.grid),
        };
        if !cache.prices.contains_key(&key) {
            let series = cfg
                .load_prices(args.prices.as_deref())?
                .expect("scenario needs prices");
            let digest = match (&args.prices, &cfg.prices) {
                (Some(p), _) | (None, Some(PriceSource::File { path: p })) => InputDigest {
                    role: "prices".into(),
                    source: p.display().to_string(),
                    is_file: true,
                    sha256: sha256_file(p)?,
                },
                _ => {
                    let mut buf = Vec::new();
                    write_prices(&mut buf, &series)?;
                    InputDigest {
                        role: "prices".into(),
                        source: format!("synthetic {:?}", cfg.prices),
                        is_file: false,
                        sha256: sha256_hex(&buf),
                    }
                }
            };
            cache.prices.insert(key.clone(), (series, digest));
        }
        let (series, digest) = &cache.prices[&key];
        inputs.push(digest.clone());
        Some(series.clone())
    } else {
        None
    };
    let strategy = cfg.build_strategy(prices)?;

    let key = match &args.sessions {
        Some(p) => format!("file:{}", p.display()),
        None => format!("{:?}", cfg.sessions),
    };
    if !cache.sessions.contains_key(&key) {
        let load = cfg.load_sessions(args.sessions.as_deref())?;
        for r in &load.rejects {
            ctx.warn(format!(
                "sessions line {}: rejected ({}): {}",
                r.line,
                r.reason.code(),
                r.detail
            ));
        }
        let digest = match (&args.sessions, &cfg.sessions) {
            (Some(p), _) | (None, Some(SessionSource::File { path: p })) => InputDigest {
                role: "sessions".into(),
                source: p.display().to_string(),
                is_file: true,
                sha256: sha256_file(p)?,
            },
            _ => {
                let mut buf = Vec::new();
                write_sessions(&mut buf, &load.sessions)?;
                InputDigest {
                    role: "sessions".into(),
                    source: format!("synthetic {:?}", cfg.sessions.as_ref().map(source_label)),
                    is_file: false,
                    sha256: sha256_hex(&buf),
                }
            }
        };
        if load.sessions.is_empty() {
            ctx.warn("no sessions loaded; the fleet load is zero".into());
        }
        cache.sessions.insert(key.clone(), (Arc::new(load.sessions), digest));
    }
    let (sessions, digest) = cache.sessions[&key].clone();
    inputs.push(digest);

    let windows_key = format!("{key}|{:?}", cfg.grid);
    if !cache.windows.contains_key(&windows_key) {
        let mut windows = Vec::with_capacity(sessions.len());
        let (mut clipped, mut outside) = (0usize, 0usize);
        for s in sessions.iter() {
            match validate_session(s, &grid) {
                Ok((w, clip)) => {
                    clipped += usize::from(clip.is_some());
                    windows.push(w);
                }
                Err(_) => outside += 1,
            }
        }
        if clipped > 0 {
            ctx.warn(format!(
                "{clipped} sessions cut at the horizon or over-demanding; their energy was clipped to the deliverable amount"
            ));
        }
        if outside > 0 {
            ctx.warn(format!("{outside} sessions lie outside the horizon and were skipped"));
        }
        cache.windows.insert(windows_key.clone(), Arc::new(windows));
    }
    let windows = cache.windows[&windows_key].clone();
    Ok(Prepared {
        cfg,
        grid,
        strategy,
        windows,
        inputs,
    })
}

fn source_label(s: &SessionSource) -> String {
    match s {
        SessionSource::File { path } => path.display().to_string(),
        SessionSource::Preset { preset } => format!("preset {preset}"),
        SessionSource::Synthetic { synthetic } => format!("generator seed {}", synthetic.seed),
    }
}

struct ManifestInfo<'a> {
    cfg: Option<&'a ScenarioConfig>,
    inputs: Vec<InputDigest>,
    seed: Option<u64>,
    grid: Option<TimeGrid>,
}

fn finish_output(ctx: &mut RunContext, path: &Path, info: ManifestInfo<'_>) -> anyhow::Result<()> {
    let manifest = RunManifest {
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        command: ctx.command.to_string(),
        args: ctx.args.clone(),
        scenario_alias: info.cfg.map(|c| c.alias.clone()),
        scenario: info.cfg.map(ScenarioConfig::to_toml_string),
        inputs: info.inputs,
        seed: info.seed,
        grid: info.grid,
        threads: ctx.threads,
        output: OutputDigest {
            file: path.file_name().unwrap_or_default().to_string_lossy().into_owned(),
            sha256: sha256_file(path)?,
        },
        wall_clock_seconds: ctx.started.elapsed().as_secs_f64(),
    };
    manifest.write(&RunManifest::path_for(path))?;
    ctx.report.outputs.push(path.to_path_buf());
    Ok(())
}

fn out_dir(dir: &Path) -> anyhow::Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

#[derive(Serialize)]
struct StepRow {
    time_utc: String,
    availability: f64,
    power_kw: f64,
    segment_power_kw: Vec<f64>,
    cumulative_kwh: f64,
    energy_price_eur_per_kwh: Option<f64>,
    marginal_price_eur_per_kwh: Option<f64>,
}

pub(super) fn dispatch_session(ctx: &mut RunContext, a: &DispatchSessionArgs) -> anyhow::Result<()> {
    out_dir(&a.scenario.output.out)?;
    let mut cache = Cache::default();
    for cfg in scenarios(&a.scenario)? {
        let p = prepare(ctx, &mut cache, cfg, &a.scenario)?;
        let window = p
            .windows
            .iter()
            .find(|w| w.session_id == a.session_id)
            .with_context(|| format!("unknown session id '{}'", a.session_id))?;
        let profile = dispatch(window, &p.strategy)?;
        let step_prices = match p.strategy.prices() {
            Some(prices) => Some(prices.step_prices(&p.grid, window.first_step, window.len())?),
            None => None,
        };
        let tariff = p.strategy.tariff();
        let n_seg = tariff.map_or(0, |t| t.n_segments());
        let cumulative = profile.cumulative_kwh();
        let rows: Vec<StepRow> = (0..window.len())
            .map(|i| {
                let seg = profile
                    .segment_power_kw
                    .as_ref()
                    .map(|s| s.row(i).to_vec())
                    .unwrap_or_default();
                let energy_price = step_prices.as_ref().map(|v| v[i]);
                // cost of one more kWh in this step: energy price plus the price of the next unused band
                let band_price = tariff.map(|t| {
                    let top = seg.iter().rposition(|&x| x > 0.0).unwrap_or(0);
                    let full = seg.get(top).is_some_and(|&x| x >= t.widths_kw()[top] - 1e-9);
                    let next = if full { (top + 1).min(t.n_segments() - 1) } else { top };
                    t.prices()[next]
                });
                let marginal = match (energy_price, band_price) {
                    (None, None) => None,
                    (e, b) => Some(e.unwrap_or(0.0) + b.unwrap_or(0.0)),
                };
                StepRow {
                    time_utc: format_utc(p.grid.step_start(window.first_step + i)),
                    availability: window.availability[i],
                    power_kw: profile.power_kw[i],
                    segment_power_kw: seg,
                    cumulative_kwh: cumulative[i],
                    energy_price_eur_per_kwh: energy_price,
                    marginal_price_eur_per_kwh: marginal,
                }
            })
            .collect();
        let path = a.scenario.output.out.join(format!(
            "dispatch_{}_{}.{}",
            slug(&p.cfg.alias),
            slug(&a.session_id),
            a.scenario.output.format.extension()
        ));
        match a.scenario.output.format {
            ResultFormat::Json => fs::write(&path, serde_json::to_string_pretty(&rows)? + "\n")
                .with_context(|| format!("writing {}", path.display()))?,
            ResultFormat::Csv => {
                let mut w = csv::Writer::from_path(&path).with_context(|| format!("writing {}", path.display()))?;
                let mut header = vec!["time_utc".to_string(), "availability".into(), "power_kw".into()];
                header.extend((0..n_seg).map(|k| format!("segment_{k}_kw")));
                header.extend(["cumulative_kwh", "energy_price_eur_per_kwh", "marginal_price_eur_per_kwh"].map(String::from));
                w.write_record(&header)?;
                let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
                for r in &rows {
                    let mut rec = vec![r.time_utc.clone(), r.availability.to_string(), r.power_kw.to_string()];
                    rec.extend((0..n_seg).map(|k| r.segment_power_kw.get(k).copied().unwrap_or(0.0).to_string()));
                    rec.extend([r.cumulative_kwh.to_string(), opt(r.energy_price_eur_per_kwh), opt(r.marginal_price_eur_per_kwh)]);
                    w.write_record(&rec)?;
                }
                w.flush()?;
            }
        }
        finish_output(
            ctx,
            &path,
            ManifestInfo {
                cfg: Some(&p.cfg),
                inputs: p.inputs.clone(),
                seed: None,
                grid: Some(p.grid),
            },
        )?;
    }
    Ok(())
}

pub(super) fn session_costs(ctx: &mut RunContext, a: &ScenarioArgs) -> anyhow::Result<()> {
    out_dir(&a.output.out)?;
    let mut cache = Cache::default();
    for cfg in scenarios(a)? {
        let p = prepare(ctx, &mut cache, cfg, a)?;
        let rows: Vec<SessionCostRow> = {
            use rayon::prelude::*;
            p.windows
                .par_iter()
                .map(|w| {
                    let profile = dispatch(w, &p.strategy)?;
                    let c = evaluate_cost(&profile, &p.strategy)?;
                    Ok(SessionCostRow {
                        session_id: w.session_id.clone(),
                        cp_id: w.cp_id.clone(),
                        energy_kwh: profile.delivered_kwh(),
                        energy_cost_eur: c.energy_cost_eur,
                        network_cost_eur: c.network_cost_eur,
                        total_eur: c.total_eur,
                    })
                })
                .collect::<Result<_, crate::dispatch::DispatchError>>()?
        };
        let path = a
            .output
            .out
            .join(format!("costs_{}.{}", slug(&p.cfg.alias), a.output.format.extension()));
        write_results(ResultRef::Costs(&rows), &path, a.output.format)?;
        finish_output(
            ctx,
            &path,
            ManifestInfo {
                cfg: Some(&p.cfg),
                inputs: p.inputs.clone(),
                seed: None,
                grid: Some(p.grid),
            },
        )?;
    }
    Ok(())
}

pub(super) fn quantile_profile(ctx: &mut RunContext, a: &QuantileArgs) -> anyhow::Result<()> {
    let sa = &a.scenario;
    out_dir(&sa.output.out)?;
    let mut cache = Cache::default();
    for cfg in scenarios(sa)? {
        let p = prepare(ctx, &mut cache, cfg, sa)?;
        let levels = a.quantiles.clone().unwrap_or_else(|| p.cfg.study.quantile_levels.clone());
        let fleet = CpFleet::from_windows(p.grid, p.windows.iter().cloned());
        let loads = cp_load_profiles(&fleet, &p.strategy)?;
        let mut agg = AggregateProfile::zeros(&p.grid, fleet.n_cps());
        for series in &loads.series_kw {
            for (acc, x) in agg.power_kw.iter_mut().zip(series) {
                *acc += x;
            }
        }
        let profile = quantile_by_hour(&agg, &levels)?;
        let path = sa
            .output
            .out
            .join(format!("quantile_{}.{}", slug(&p.cfg.alias), sa.output.format.extension()));
        write_results(ResultRef::Quantile(&profile), &path, sa.output.format)?;
        finish_output(
            ctx,
            &path,
            ManifestInfo {
                cfg: Some(&p.cfg),
                inputs: p.inputs.clone(),
                seed: None,
                grid: Some(p.grid),
            },
        )?;
    }
    Ok(())
}

pub(super) fn peak_study(ctx: &mut RunContext, a: &PeakStudyArgs) -> anyhow::Result<()> {
    let sa = &a.scenario;
    out_dir(&sa.output.out)?;
    let mut cache = Cache::default();
    for (i, cfg) in scenarios(sa)?.into_iter().enumerate() {
        let p = prepare(ctx, &mut cache, cfg, sa)?;
        let mut params = p.cfg.study.params();
        if let Some(s) = a.seed {
            params.seed = s;
        }
        if let Some(l) = &a.levels {
            params.levels = l.clone();
        }
        if let Some(r) = a.repeats {
            params.repeats = r;
        }
        let seed = params.seed;
        if !p.cfg.study.reuse_fleets {
            // independent draws per scenario instead of paired fleets
            params.seed = mix_seed(&[seed, i as u64 + 1]);
        }
        let fleet = CpFleet::from_windows(p.grid, p.windows.iter().cloned());
        let loads = cp_load_profiles(&fleet, &p.strategy)?;
        let result = peak_study_from_loads(&loads, &params)
            .with_context(|| format!("peak study for {}", p.cfg.alias))?;
        let path = sa
            .output
            .out
            .join(format!("peak_{}.{}", slug(&p.cfg.alias), sa.output.format.extension()));
        write_results(ResultRef::Peak(&result), &path, sa.output.format)?;
        finish_output(
            ctx,
            &path,
            ManifestInfo {
                cfg: Some(&p.cfg),
                inputs: p.inputs.clone(),
                seed: Some(seed),
                grid: Some(p.grid),
            },
        )?;
    }
    Ok(())
}

pub(super) fn generate(ctx: &mut RunContext, a: &GenerateArgs) -> anyhow::Result<()> {
    let mut inputs = Vec::new();
    let mut params = match &a.params {
        Some(path) => {
            let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            inputs.push(InputDigest {
                role: "generator".into(),
                source: path.display().to_string(),
                is_file: true,
                sha256: sha256_hex(text.as_bytes()),
            });
            toml::from_str::<SyntheticFleetParams>(&text)
                .map_err(|e| crate::io::DataError::Synthetic(format!("{}: {}", path.display(), e.message())))?
        }
        None => SyntheticFleetParams::reference(),
    };
    if let Some(s) = a.seed {
        params.seed = s;
    }
    if let Some(n) = a.n_cps {
        params.n_cps = n;
    }
    if let Some(n) = a.sessions_per_cp {
        params.sessions_per_cp = n;
    }
    let sessions = generate_synthetic_fleet(&params)?;
    out_dir(&a.out)?;
    let path = a.out.join("sessions.csv");
    let file = fs::File::create(&path).with_context(|| format!("writing {}", path.display()))?;
    write_sessions(std::io::BufWriter::new(file), &sessions)?;
    finish_output(
        ctx,
        &path,
        ManifestInfo {
            cfg: None,
            inputs,
            seed: Some(params.seed),
            grid: None,
        },
    )
}

pub(super) fn generate_prices(ctx: &mut RunContext, a: &GeneratePricesArgs) -> anyhow::Result<()> {
    let series = generate_synthetic_prices(&SyntheticPriceParams {
        start: a.start,
        n_hours: a.hours,
        ..SyntheticPriceParams::reference(a.seed)
    })?;
    out_dir(&a.out)?;
    let path: PathBuf = a.out.join("prices.csv");
    let file = fs::File::create(&path).with_context(|| format!("writing {}", path.display()))?;
    write_prices(std::io::BufWriter::new(file), &series)?;
    finish_output(
        ctx,
        &path,
        ManifestInfo {
            cfg: None,
            inputs: Vec::new(),
            seed: Some(a.seed),
            grid: None,
        },
    )
}
