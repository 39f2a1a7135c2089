use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use h2sgnn_core::checkpoint::{Checkpoint, CHECKPOINT_VERSION};
use h2sgnn_core::dataio::{build_input, load_config, load_dataset, resolve_dataset_dir, write_dataset};
use h2sgnn_core::filters::{frequency_response, lambda_grid};
use h2sgnn_core::hetgraph::{build_subgraph, edge_homophily, labeled_edge_homophily, weighted_edge_homophily, MetaPath, SubgraphOptions};
use h2sgnn_core::model::LocalBases;
use h2sgnn_core::oracle::{count_params, count_terms, oracle_check, CountVariant};
use h2sgnn_core::synthetic::{make_fixture, FixtureSpec};
use h2sgnn_core::train::{evaluate, train, TrainReport};
use h2sgnn_core::{DatasetBundle, Error};
use log::{info, warn};
use serde::Serialize;

use crate::args::*;

/// Writes `text` to `out`, or stdout when no path is given.
pub fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(path) => {
            if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
                fs::create_dir_all(parent).with_context(|| format!("creating {}", parent.display()))?;
            }
            fs::write(path, text).with_context(|| format!("writing {}", path.display()))
        }
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn to_json<T: Serialize>(v: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(v)?;
    s.push('\n');
    Ok(s)
}

fn load(dir: &Path) -> Result<DatasetBundle> {
    let dir = resolve_dataset_dir(dir);
    Ok(load_dataset(&dir)?)
}

/// `PAP,PSP` is two paths; a value with `=` is a single explicit path.
pub fn split_metapath_specs(values: &[String]) -> Vec<String> {
    values
        .iter()
        .flat_map(|v| {
            if v.contains('=') {
                vec![v.trim().to_string()]
            } else {
                v.split(',').map(|s| s.trim().to_string()).filter(|s| !s.is_empty()).collect()
            }
        })
        .collect()
}

pub fn homophily(args: &HomophilyArgs, out: Option<&Path>) -> Result<()> {
    let bundle = load(&args.dataset.dataset)?;
    let g = &bundle.graph;
    let opts = SubgraphOptions {
        binarize: args.binarize,
        drop_selfloops: !args.keep_selfloops,
    };
    let mut csv = String::from("metapath,homophily\n");
    for spec in split_metapath_specs(&args.metapaths) {
        let mp = MetaPath::parse(&spec, g)?;
        let sg = build_subgraph(g, &mp, opts)?;
        let adj = sg.processed_adj(opts);
        let h = if args.labeled_only {
            labeled_edge_homophily(&adj, g.labels(), args.weighted)?
        } else if args.weighted {
            weighted_edge_homophily(&adj, &g.dense_labels())?
        } else {
            edge_homophily(&adj, &g.dense_labels())?
        };
        info!("{}: {} stored entries", mp.name, adj.nnz());
        writeln!(csv, "{},{:.2}", mp.name, 100.0 * h)?;
    }
    emit(out, &csv)
}

#[derive(Debug, Serialize)]
pub struct MeanStderr {
    pub mean: f64,
    pub stderr: f64,
}

impl MeanStderr {
    /// Sample mean and standard error of the mean (zero for one value).
    pub fn of(values: &[f64]) -> Self {
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let stderr = if values.len() < 2 {
            0.0
        } else {
            let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
            (var / n).sqrt()
        };
        Self { mean, stderr }
    }
}

#[derive(Debug, Serialize)]
pub struct RunSummary {
    pub seed: u64,
    pub best_epoch: usize,
    pub epochs_run: usize,
    pub test_micro_f1: f64,
    pub test_macro_f1: f64,
}

#[derive(Debug, Serialize)]
pub struct Aggregate {
    pub dataset: String,
    pub variant: h2sgnn_core::Variant,
    pub metapaths: Vec<String>,
    pub seeds: Vec<u64>,
    pub micro_f1: MeanStderr,
    pub macro_f1: MeanStderr,
    /// Percentages as `mean ± stderr`.
    pub summary: String,
    pub runs: Vec<RunSummary>,
}

pub fn train_cmd(args: &TrainArgs, seed: Option<u64>, out: Option<&Path>) -> Result<()> {
    let mut cfg = load_config(&args.config)?;
    if let Some(d) = &args.dataset {
        cfg.dataset = Some(d.clone());
    }
    if let Some(v) = args.variant {
        cfg.variant = v;
    }
    if let Some(e) = args.epochs {
        cfg.epochs = e;
    }
    if let Some(s) = seed {
        cfg.seeds = vec![s];
    }
    let Some(dataset) = cfg.dataset.clone() else {
        bail!(Error::Argument("no dataset: set `dataset` in the config or pass --dataset".into()));
    };
    let bundle = load(&dataset)?;
    let g = &bundle.graph;
    let metapaths = cfg.resolve_metapaths(g)?;
    let model = cfg.model_config(&metapaths)?;
    let input = build_input(g, &metapaths, cfg.subgraph_options(), cfg.row_normalize)?;
    let out_dir = args
        .output_dir
        .clone()
        .or_else(|| cfg.output_dir.clone())
        .unwrap_or_else(|| PathBuf::from("runs"));
    fs::create_dir_all(&out_dir).with_context(|| format!("creating {}", out_dir.display()))?;

    let mut reports: Vec<TrainReport> = Vec::new();
    for &s in &cfg.seeds {
        info!("training seed {s} ({} on `{}`)", model.variant, bundle.meta.name);
        let outcome = train(&input, g.labels(), g.num_classes(), &bundle.splits, &model, &cfg.hyper(s))
            .with_context(|| format!("seed {s} failed; reports of earlier seeds are in {}", out_dir.display()))?;
        let ckpt = Checkpoint {
            version: CHECKPOINT_VERSION,
            dataset: Some(bundle.meta.name.clone()),
            config: model.clone(),
            metapaths: metapaths.clone(),
            options: cfg.subgraph_options(),
            row_normalize: cfg.row_normalize,
            in_dim: g.features().n_cols(),
            num_classes: g.num_classes(),
            seed: s,
            best_epoch: Some(outcome.report.best_epoch),
            params: outcome.params,
        };
        ckpt.save(&out_dir.join(format!("checkpoint_seed{s}.json")))?;
        emit(Some(&out_dir.join(format!("report_seed{s}.json"))), &to_json(&outcome.report)?)?;
        reports.push(outcome.report);
    }

    let micro: Vec<f64> = reports.iter().map(|r| r.test_micro_f1).collect();
    let macro_: Vec<f64> = reports.iter().map(|r| r.test_macro_f1).collect();
    let (mi, ma) = (MeanStderr::of(&micro), MeanStderr::of(&macro_));
    let agg = Aggregate {
        dataset: bundle.meta.name.clone(),
        variant: model.variant,
        metapaths: model.metapaths.clone(),
        seeds: cfg.seeds.clone(),
        summary: format!(
            "micro-F1 {:.2} ± {:.2}, macro-F1 {:.2} ± {:.2}",
            100.0 * mi.mean,
            100.0 * mi.stderr,
            100.0 * ma.mean,
            100.0 * ma.stderr
        ),
        micro_f1: mi,
        macro_f1: ma,
        runs: reports
            .iter()
            .map(|r| RunSummary {
                seed: r.seed,
                best_epoch: r.best_epoch,
                epochs_run: r.epochs_run,
                test_micro_f1: r.test_micro_f1,
                test_macro_f1: r.test_macro_f1,
            })
            .collect(),
    };
    let text = to_json(&agg)?;
    emit(Some(&out_dir.join("aggregate.json")), &text)?;
    info!("{}", agg.summary);
    emit(out, &text)
}

#[derive(Debug, Serialize)]
struct EvalResult {
    split: &'static str,
    nodes: usize,
    loss: f64,
    micro_f1: f64,
    macro_f1: f64,
}

pub fn eval(args: &EvalArgs, out: Option<&Path>) -> Result<()> {
    let ckpt = Checkpoint::load(&args.checkpoint)?;
    let bundle = load(&args.dataset.dataset)?;
    let g = &bundle.graph;
    if g.features().n_cols() != ckpt.in_dim || g.num_classes() != ckpt.num_classes {
        bail!(Error::Shape(format!(
            "checkpoint expects {} features and {} classes, dataset has {} and {}",
            ckpt.in_dim,
            ckpt.num_classes,
            g.features().n_cols(),
            g.num_classes()
        )));
    }
    for mp in &ckpt.metapaths {
        mp.validate(g)?;
    }
    let input = build_input(g, &ckpt.metapaths, ckpt.options, ckpt.row_normalize)?;
    let (name, mask) = match args.split {
        SplitName::Train => ("train", &bundle.splits.train),
        SplitName::Val => ("val", &bundle.splits.val),
        SplitName::Test => ("test", &bundle.splits.test),
    };
    let e = evaluate(&input, &ckpt.params, &ckpt.config, &g.dense_labels(), g.num_classes(), mask)?;
    emit(
        out,
        &to_json(&EvalResult {
            split: name,
            nodes: mask.len(),
            loss: e.loss,
            micro_f1: e.micro_f1,
            macro_f1: e.macro_f1,
        })?,
    )
}

pub fn filter_response(args: &FilterResponseArgs, out: Option<&Path>) -> Result<()> {
    let ckpt = Checkpoint::load(&args.checkpoint)?;
    if args.samples == 0 {
        bail!(Error::Argument("--samples must be positive".into()));
    }
    let grid = lambda_grid(args.samples);
    let unit = |c: &[f64]| -> Vec<f64> {
        let mut v = vec![0.0; c.len()];
        v[0] = 1.0;
        v
    };
    let cfg = &ckpt.config;
    let mut curves = Vec::new();
    if cfg.variant.uses_local() {
        for (i, name) in cfg.metapaths.iter().enumerate() {
            let coeffs = ckpt.params.alpha.row(i);
            let basis = match &cfg.local_basis {
                LocalBases::Shared(b) => *b,
                LocalBases::PerPath(v) => v[i],
            };
            let c = if args.unit_coeffs { unit(coeffs) } else { coeffs.to_vec() };
            curves.push((name.clone(), basis, c));
        }
    }
    if cfg.variant.uses_global() {
        let g = &ckpt.params.gamma;
        let c = if args.unit_coeffs { unit(g) } else { g.clone() };
        curves.push(("global".to_string(), cfg.global_basis, c));
    }
    if curves.is_empty() {
        warn!("checkpoint has no filters");
    }
    let mut csv = String::from("metapath,lambda,response\n");
    for (name, basis, coeffs) in curves {
        for (lambda, r) in frequency_response(basis, &coeffs, &grid)? {
            writeln!(csv, "{name},{lambda},{r}")?;
        }
    }
    emit(out, &csv)
}

#[derive(Debug, Serialize)]
struct CountRow {
    variant: CountVariant,
    r: usize,
    k: usize,
    params: u128,
    terms: u128,
}

pub fn count(args: &CountParamsArgs, out: Option<&Path>) -> Result<()> {
    let row = |v: CountVariant| -> Result<CountRow> {
        Ok(CountRow {
            variant: v,
            r: args.r,
            k: args.k,
            params: count_params(v, args.r, args.k)?,
            terms: count_terms(v, args.r, args.k)?,
        })
    };
    let text = match args.variant {
        Some(v) => to_json(&row(v)?)?,
        None => to_json(&CountVariant::ALL.into_iter().map(row).collect::<Result<Vec<_>>>()?)?,
    };
    emit(out, &text)
}

/// Returns whether every order passed.
pub fn oracle(args: &OracleCheckArgs, seed: Option<u64>, out: Option<&Path>) -> Result<bool> {
    if args.seeds == 0 {
        bail!(Error::Argument("--seeds must be positive".into()));
    }
    let base = seed.unwrap_or(0);
    let seeds: Vec<u64> = (base..base + args.seeds as u64).collect();
    let rep = oracle_check(args.r, args.k, args.nodes, &seeds, args.trials, args.tol)?;
    emit(out, &to_json(&rep)?)?;
    if !rep.pass {
        warn!("discrepancy above {} for R={} K={}", args.tol, args.r, args.k);
    }
    Ok(rep.pass)
}

pub fn fixture(args: &MakeFixtureArgs, seed: Option<u64>, out: Option<&Path>) -> Result<()> {
    let Some(dir) = out else {
        bail!(Error::Argument("make-fixture needs --out <DIR>".into()));
    };
    let spec = FixtureSpec {
        kind: args.kind,
        nodes: args.nodes,
        feature_dim: args.feature_dim,
        signal: args.signal,
        seed: seed.unwrap_or(0),
        ..FixtureSpec::default()
    };
    let bundle = make_fixture(&spec)?;
    write_dataset(&bundle, dir)?;
    info!(
        "wrote `{}` to {} ({} nodes, {} edges; meta-paths {})",
        bundle.meta.name,
        dir.display(),
        bundle.stats.nodes,
        bundle.stats.edges,
        args.kind.metapaths().join(",")
    );
    Ok(())
}
