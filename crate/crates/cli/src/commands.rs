use std::collections::BTreeMap;
use std::fs::File;
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, ensure, Context, Result};
use cgpt_core::cgpt::{from_real_blocks, to_real_blocks, CgptPair, RealCgptBlocks};
use cgpt_core::experiment::{
    identification_study, letter_scenario, match_errors, petal_study, reconstruction_study, split_seed, Acquisition,
    Algorithm, ExperimentConfig, IdentificationRow, OrderChoice,
};
use cgpt_core::geometry::ShapeSpec;
use cgpt_core::io::{
    read_cgpt_json, read_dictionary_json, read_msr_csv, write_cgpt_json, write_dictionary_json, write_json,
    write_msr_csv, MsrHeader, TableWriter, FORMAT_VERSION,
};
use cgpt_core::matching::{antidiagonal_means, petal_count, shape_descriptors, Dictionary};
use cgpt_core::msr::{add_noise, max_truncation_order, reconstruct_cgpt, relative_block_error, resolving_order};
use cgpt_core::potential::contrast_from_conductivity;
use log::{info, warn};
use serde::Serialize;
use serde_json::json;

use crate::{NoiseArgs, ScenarioArgs};

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path).with_context(|| format!("cannot create {}", path.display()))?))
}

fn open(path: &Path) -> Result<BufReader<File>> {
    Ok(BufReader::new(File::open(path).with_context(|| format!("cannot open {}", path.display()))?))
}

fn sink(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(create(p)?),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn file_name(path: &Path) -> String {
    path.file_name().map_or_else(|| path.display().to_string(), |n| n.to_string_lossy().into_owned())
}

/// The ellipse setup: semi-axes 1 and 0.5, 51 elements on the circle of
/// radius 2 about the origin.
fn default_config() -> ExperimentConfig {
    serde_json::from_value(json!({
        "shape": "ellipse:1,0.5",
        "array": { "n": 51, "radius": 2.0, "z0": [0.0, 0.0] },
    }))
    .expect("default config is valid")
}

/// Effective configuration: the config file (or the default setup), then
/// command-line overrides. The output path is never part of it.
pub fn resolve_config(scn: &ScenarioArgs, noise: &NoiseArgs) -> Result<ExperimentConfig> {
    let mut cfg = match &scn.config {
        Some(p) => serde_json::from_reader(open(p)?).with_context(|| format!("invalid config {}", p.display()))?,
        None => {
            let mut cfg = default_config();
            if let Some(shape) = &scn.shape {
                cfg.shape = shape.clone();
                cfg.array.radius = None;
                cfg.array.epsilon = Some(0.5);
                cfg.array.z0 = None;
            }
            cfg
        }
    };
    if let (Some(shape), Some(_)) = (&scn.shape, &scn.config) {
        cfg.shape = shape.clone();
    }
    if let Some(k) = scn.kappa {
        cfg.kappa = k;
    }
    if scn.nodes.is_some() {
        cfg.nodes = scn.nodes;
    }
    cfg.normalize |= scn.normalize;
    if let Some(n) = scn.elements {
        cfg.array.n = n;
    }
    if let Some(r) = scn.radius {
        cfg.array.radius = Some(r);
        cfg.array.epsilon = None;
    }
    if let Some(e) = scn.epsilon {
        cfg.array.epsilon = Some(e);
        cfg.array.radius = None;
    }
    if let Some(z) = &scn.z0 {
        cfg.array.z0 = Some([z[0], z[1]]);
    }
    if let Some(t) = &scn.transform {
        cfg.transform.z = [t[0], t[1]];
        cfg.transform.s = t[2];
        cfg.transform.theta = t[3];
    }
    apply_noise(&mut cfg, noise);
    cfg.output = None;
    cfg.validate()?;
    Ok(cfg)
}

fn apply_noise(cfg: &mut ExperimentConfig, noise: &NoiseArgs) {
    if let Some(s) = noise.seed {
        cfg.seed = s;
    }
    if let Some(t) = noise.trials {
        cfg.trials = t;
    }
    if let Some(s) = &noise.sigma0 {
        cfg.sigma0 = s.clone();
    }
    if let Some(t) = noise.tau0 {
        cfg.tau0 = t;
    }
}

fn noise_levels(cfg: &ExperimentConfig) -> Vec<f64> {
    if cfg.sigma0.is_empty() {
        vec![0.0]
    } else {
        cfg.sigma0.clone()
    }
}

/// Shortest round-trip form, scientific for very small or large values.
fn num(x: f64) -> String {
    format!("{x:?}")
}

/// Resolving order, unbounded for noiseless data.
fn fmt_order(m: usize) -> String {
    if m == usize::MAX {
        "inf".into()
    } else {
        m.to_string()
    }
}

fn provenance<S: Serialize>(command: &str, config: &S) -> Result<String> {
    Ok(format!("command: {command}\nconfig: {}", serde_json::to_string(config)?))
}

pub fn simulate(scn: &ScenarioArgs, noise: &NoiseArgs, out: &Path) -> Result<()> {
    let cfg = resolve_config(scn, noise)?;
    ensure!(cfg.sigma0.len() <= 1, "simulate takes a single noise level");
    let sigma0 = cfg.sigma0.first().copied().unwrap_or(0.0);
    // a config file's trial count applies; otherwise one realization
    let trials = noise.trials.or(scn.config.as_ref().map(|_| cfg.trials)).unwrap_or(1);
    let scenario = cfg.scenario()?;
    let clean = scenario.simulate()?;
    info!("simulated {} elements, ε = {:.4}", clean.config.n, scenario.epsilon()?);

    let write = |path: &Path, seed: u64| -> Result<()> {
        let v = add_noise(&clean, sigma0, seed)?;
        let mut w = create(path)?;
        write_msr_csv(&mut w, &v, &MsrHeader::for_scenario(&scenario, &v, sigma0, seed))?;
        w.flush()?;
        Ok(())
    };
    if trials <= 1 || sigma0 == 0.0 {
        return write(out, split_seed(cfg.seed, 0));
    }
    let stem = out.file_stem().map_or_else(|| "msr".into(), |s| s.to_string_lossy().into_owned());
    let ext = out.extension().map_or_else(|| "csv".into(), |s| s.to_string_lossy().into_owned());
    let width = (trials - 1).to_string().len().max(3);
    for t in 0..trials {
        let path = out.with_file_name(format!("{stem}_t{t:0width$}.{ext}"));
        write(&path, split_seed(cfg.seed, t as u64))?;
    }
    Ok(())
}

pub fn reconstruct(msr: &[PathBuf], tau0: f64, order: Option<usize>, out: &Path, table: Option<&Path>) -> Result<()> {
    ensure!(tau0 > 0.0 && tau0 <= 1.0, "τ₀ must lie in (0, 1], got {tau0}");
    let mut data = Vec::with_capacity(msr.len());
    for p in msr {
        data.push(read_msr_csv(open(p)?).with_context(|| format!("invalid MSR file {}", p.display()))?);
    }
    let h0 = data[0].1.clone();
    for (p, (_, h)) in msr.iter().zip(&data) {
        let same = MsrHeader { seed: h0.seed, noise_sigma: h0.noise_sigma, ..h.clone() };
        ensure!(same == h0, "{} does not share the acquisition of {}", p.display(), msr[0].display());
    }
    let scenario = h0.scenario()?;
    let (n, eps, lambda) = (h0.n, scenario.epsilon()?, scenario.lambda()?);
    let noise_sigma = data.iter().map(|(_, h)| h.noise_sigma).sum::<f64>() / data.len() as f64;
    let k = match order {
        Some(k) => k,
        None => max_truncation_order(noise_sigma, n, eps)?.min((n - 1) / 2),
    };
    let m0 = resolving_order(noise_sigma, tau0, eps)?;
    let keep = m0.min(k);
    info!("σ_noise = {noise_sigma:e}, ε = {eps:.4}: K = {k}, m₀ = {m0}");

    let estimates = data.iter().map(|(v, _)| reconstruct_cgpt(v, k)).collect::<Result<Vec<_>, _>>()?;
    let sum = estimates.iter().skip(1).fold(estimates[0].m.clone(), |acc, e| acc + &e.m);
    let mean = RealCgptBlocks::new(sum / estimates.len() as f64)?;
    let pair = from_real_blocks(&mean.truncate(keep)?, lambda)?;
    let sources: Vec<String> = msr.iter().map(|p| file_name(p)).collect();
    let mut w = create(out)?;
    write_cgpt_json(&mut w, &pair, Some(format!("mean of {}: {}", sources.len(), sources.join(" "))))?;
    w.flush()?;

    if let Some(path) = table {
        let exact = to_real_blocks(&scenario.oracle_cgpt(k)?);
        let prov = provenance(
            "reconstruct",
            &json!({ "msr": sources, "tau0": tau0, "sigma0": h0.sigma0, "noise_sigma": noise_sigma, "K": k, "m0": (m0 != usize::MAX).then_some(m0) }),
        )?;
        let mut t = TableWriter::new(create(path)?, &prov, &["m", "mean_error", "trial_error", "resolved"])?;
        for m in 1..=k {
            let mut trial = 0.0;
            for e in &estimates {
                trial += relative_block_error(e, &exact, m)?;
            }
            trial /= estimates.len() as f64;
            let err = relative_block_error(&mean, &exact, m)?;
            t.row([m.to_string(), num(err), num(trial), (m <= m0).to_string()])?;
        }
        t.finish()?;
    }
    Ok(())
}

fn parse_letters(letters: &str) -> Result<Vec<char>> {
    if letters.eq_ignore_ascii_case("all") {
        return Ok(('A'..='Z').collect());
    }
    let chars: Vec<char> = letters.chars().filter(|c| !c.is_whitespace() && *c != ',').collect();
    if let Some(c) = chars.iter().find(|c| !c.is_ascii_uppercase()) {
        bail!("`{c}` is not a capital letter");
    }
    Ok(chars)
}

pub fn build_dict(
    shapes: &[String],
    letters: Option<&str>,
    order: usize,
    kappa: f64,
    nodes: Option<usize>,
    out: &Path,
) -> Result<()> {
    let mut specs = shapes.iter().map(|s| s.parse::<ShapeSpec>()).collect::<Result<Vec<_>, _>>()?;
    if let Some(l) = letters {
        specs.extend(parse_letters(l)?.into_iter().map(ShapeSpec::Letter));
    }
    ensure!(!specs.is_empty(), "no shapes given (use --shape or --letters)");
    let dict = Dictionary::from_shapes(&specs, order, contrast_from_conductivity(kappa)?, nodes)?;
    info!("built {} entries at order {order}", dict.len());
    let mut w = create(out)?;
    write_dictionary_json(&mut w, &dict)?;
    w.flush()?;
    Ok(())
}

pub struct MatchArgs {
    pub dict: PathBuf,
    pub query: Vec<PathBuf>,
    pub letters: Option<String>,
    pub algo: String,
    pub order: usize,
    pub truth: Option<String>,
    pub noise: NoiseArgs,
    pub out: Option<PathBuf>,
    pub confusion: Option<PathBuf>,
}

enum Query {
    Exact(CgptPair<f64>),
    Data(Acquisition),
}

fn load_query(path: &Path) -> Result<(Query, Option<String>)> {
    let is_json = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json"));
    if is_json {
        let pair = read_cgpt_json(open(path)?).with_context(|| format!("invalid CGPT file {}", path.display()))?;
        return Ok((Query::Exact(pair), None));
    }
    let (v, h) = read_msr_csv(open(path)?).with_context(|| format!("invalid MSR file {}", path.display()))?;
    if h.sigma0 > 0.0 {
        warn!("{} already carries noise (σ₀ = {}); trials add more", path.display(), h.sigma0);
    }
    let scenario = h.scenario()?;
    let acq = Acquisition { clean: v, eps: scenario.epsilon()?, lambda: scenario.lambda()? };
    Ok((Query::Data(acq), Some(scenario.shape.name())))
}

#[derive(Serialize)]
struct LevelReport {
    sigma0: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    orders: Option<OrderChoice>,
    trials: usize,
    /// Mean `e_n` in dictionary order.
    mean_errors: Vec<f64>,
    mean_winner: String,
    wins: BTreeMap<String, usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    success_rate: Option<f64>,
}

#[derive(Serialize)]
struct QueryReport {
    query: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    truth: Option<String>,
    levels: Vec<LevelReport>,
}

pub fn matching(args: &MatchArgs) -> Result<()> {
    let dict = read_dictionary_json(open(&args.dict)?)
        .with_context(|| format!("invalid dictionary {}", args.dict.display()))?;
    ensure!(!dict.is_empty(), "dictionary is empty");
    let algo: Algorithm = args.algo.parse()?;
    ensure!(
        args.order >= 1 && args.order <= dict.order(),
        "order {} exceeds the dictionary order {}",
        args.order,
        dict.order()
    );
    let mut cfg = default_config();
    cfg.trials = 100;
    apply_noise(&mut cfg, &args.noise);
    cfg.validate()?;
    let levels = noise_levels(&cfg);

    let mut queries: Vec<(String, Query, Option<String>)> = Vec::new();
    for p in &args.query {
        let (q, truth) = load_query(p)?;
        queries.push((file_name(p), q, truth));
    }
    if let Some(l) = &args.letters {
        for c in parse_letters(l)? {
            queries.push((format!("letter:{c}"), Query::Data(letter_scenario(c)?.acquire()?), Some(c.to_string())));
        }
    }
    ensure!(!queries.is_empty(), "no queries given (use --query or --letters)");
    if let Some(t) = &args.truth {
        ensure!(queries.len() == 1, "--truth needs a single query");
        queries[0].2 = Some(t.clone());
    }

    let names: Vec<String> = dict.entries.iter().map(|e| e.name.clone()).collect();
    let mut reports = Vec::with_capacity(queries.len());
    for (qi, (label, query, truth)) in queries.iter().enumerate() {
        let truth_index = truth.as_ref().and_then(|t| dict.index_of(t));
        let mut level_reports = Vec::new();
        match query {
            Query::Exact(pair) => {
                let errors = match_errors(pair, &dict, algo, args.order)?;
                let row = IdentificationRow {
                    truth: truth.clone().unwrap_or_default(),
                    orders: OrderChoice {
                        sigma0: 0.0,
                        noise_sigma: 0.0,
                        truncation: pair.order(),
                        resolving: pair.order(),
                    },
                    winners: vec![argmin(&errors)],
                    mean_errors: errors,
                };
                level_reports.push(level_report(&row, None, &names, truth_index));
            }
            Query::Data(acq) => {
                let stream = split_seed(cfg.seed, qi as u64);
                for (li, &sigma0) in levels.iter().enumerate() {
                    let row = identification_study(
                        acq,
                        truth.as_deref().unwrap_or(label),
                        &dict,
                        algo,
                        args.order,
                        sigma0,
                        cfg.trials,
                        cfg.tau0,
                        split_seed(stream, li as u64),
                    )?;
                    level_reports.push(level_report(&row, Some(row.orders), &names, truth_index));
                }
            }
        }
        for l in &level_reports {
            info!("{label} σ₀ = {}: mean winner {}, success {:?}", l.sigma0, l.mean_winner, l.success_rate);
        }
        reports.push(QueryReport { query: label.clone(), truth: truth.clone(), levels: level_reports });
    }

    let settings = json!({
        "dict": file_name(&args.dict),
        "algo": args.algo,
        "order": args.order,
        "seed": cfg.seed,
        "trials": cfg.trials,
        "tau0": cfg.tau0,
        "sigma0": levels,
    });
    if let Some(path) = &args.confusion {
        let mut columns = vec!["query"];
        columns.extend(names.iter().map(String::as_str));
        let mut t = TableWriter::new(create(path)?, &provenance("match --confusion", &settings)?, &columns)?;
        for r in &reports {
            let mut row = vec![r.truth.clone().unwrap_or_else(|| r.query.clone())];
            row.extend(r.levels[0].mean_errors.iter().copied().map(num));
            t.row(row)?;
        }
        t.finish()?;
    }
    let report = json!({
        "version": FORMAT_VERSION,
        "command": "match",
        "settings": settings,
        "dictionary": names,
        "queries": reports,
    });
    let mut w = sink(args.out.as_deref())?;
    write_json(&mut w, &report)?;
    w.flush()?;
    Ok(())
}

fn argmin(v: &[f64]) -> usize {
    (0..v.len()).fold(0, |best, i| if v[i] < v[best] { i } else { best })
}

fn level_report(
    row: &IdentificationRow,
    orders: Option<OrderChoice>,
    names: &[String],
    truth: Option<usize>,
) -> LevelReport {
    let mut wins = BTreeMap::new();
    for &w in &row.winners {
        *wins.entry(names[w].clone()).or_insert(0) += 1;
    }
    LevelReport {
        sigma0: row.orders.sigma0,
        orders,
        trials: row.winners.len(),
        mean_errors: row.mean_errors.clone(),
        mean_winner: names[row.mean_winner()].clone(),
        wins,
        success_rate: truth.map(|t| row.wins(t) as f64 / row.winners.len() as f64),
    }
}

pub fn petal(
    query: Option<&Path>,
    scn: &ScenarioArgs,
    noise: &NoiseArgs,
    p_max: Option<usize>,
    out: Option<&Path>,
    detections: Option<&Path>,
) -> Result<()> {
    let mut cfg = resolve_config(scn, noise)?;
    if let Some(p) = p_max {
        cfg.p_max = p;
    }
    ensure!(cfg.p_max >= 2, "p_max must be at least 2");
    let levels = noise_levels(&cfg);
    let loaded = query.map(load_query).transpose()?;
    let prov = match query {
        Some(q) => provenance(
            "petal",
            &json!({ "query": file_name(q), "p_max": cfg.p_max, "sigma0": levels, "trials": cfg.trials, "tau0": cfg.tau0, "seed": cfg.seed }),
        )?,
        None => provenance("petal", &cfg)?,
    };
    let mut means = TableWriter::new(sink(out)?, &prov, &["sigma0", "noise_sigma", "K", "m0", "l", "mean"])?;
    let mut found: Vec<(f64, usize, String, usize)> = Vec::new();

    if let Some((Query::Exact(pair), _)) = &loaded {
        let desc = shape_descriptors(pair)?;
        let k = desc.order();
        for (l, m) in antidiagonal_means(&desc, cfg.p_max.min(2 * k)) {
            means.row([num(0.0), num(0.0), k.to_string(), k.to_string(), l.to_string(), num(m)])?;
        }
        let l_max = cfg.p_max.min(k + 1);
        let detected = match petal_count(&desc, l_max) {
            Ok(p) => p.to_string(),
            Err(cgpt_core::Error::NoSymmetryDetected { .. }) => "none".into(),
            Err(e) => return Err(e.into()),
        };
        found.push((0.0, l_max, detected, 1));
    } else {
        let acq = match loaded {
            Some((Query::Data(acq), _)) => acq,
            _ => cfg.scenario()?.acquire()?,
        };
        for row in petal_study(&acq, &levels, cfg.trials, cfg.tau0, cfg.p_max, cfg.seed)? {
            let o = row.orders;
            for (l, m) in &row.antidiagonal_means {
                means.row([
                    num(o.sigma0),
                    num(o.noise_sigma),
                    o.truncation.to_string(),
                    fmt_order(o.resolving),
                    l.to_string(),
                    num(*m),
                ])?;
            }
            let mut counts: BTreeMap<Option<usize>, usize> = BTreeMap::new();
            for d in &row.detections {
                *counts.entry(*d).or_insert(0) += 1;
            }
            for (d, c) in counts {
                found.push((o.sigma0, row.l_max, d.map_or_else(|| "none".into(), |p| p.to_string()), c));
            }
        }
    }
    means.finish()?;

    for (sigma0, l_max, d, c) in &found {
        eprintln!("σ₀ = {sigma0}: p = {d} in {c} trial(s) (l ≤ {l_max})");
    }
    if let Some(path) = detections {
        let mut t = TableWriter::new(create(path)?, &prov, &["sigma0", "l_max", "detected", "count"])?;
        for (sigma0, l_max, d, c) in found {
            t.row([num(sigma0), l_max.to_string(), d, c.to_string()])?;
        }
        t.finish()?;
    }
    Ok(())
}

pub fn sweep(
    scn: &ScenarioArgs,
    noise: &NoiseArgs,
    order: Option<usize>,
    truncation: Option<usize>,
    out: Option<&Path>,
) -> Result<()> {
    let cfg = resolve_config(scn, noise)?;
    let levels = noise_levels(&cfg);
    let max_order = order.unwrap_or_else(|| cfg.max_order());
    ensure!(max_order >= 1, "order must be at least 1");
    let scenario = cfg.scenario()?;
    let rows = reconstruction_study(&scenario, &levels, cfg.trials, cfg.tau0, max_order, truncation, cfg.seed)?;
    let prov = provenance("sweep", &json!({ "config": cfg, "order": max_order, "truncation": truncation }))?;
    let columns = ["sigma0", "noise_sigma", "K", "m0", "m", "mean_error", "trial_error"];
    let mut t = TableWriter::new(sink(out)?, &prov, &columns)?;
    for row in rows {
        let o = row.orders;
        for (i, (mean, trial)) in row.mean_error.iter().zip(&row.trial_error).enumerate() {
            t.row([
                num(o.sigma0),
                num(o.noise_sigma),
                o.truncation.to_string(),
                fmt_order(o.resolving),
                (i + 1).to_string(),
                num(*mean),
                num(*trial),
            ])?;
        }
    }
    t.finish()?;
    Ok(())
}
