//! One function per subcommand. Each writes its artifacts under the output
//! directory and prints a short human-readable summary.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use log::info;
use serde::Serialize;

use mfel::bundle::ModelBundle;
use mfel::corpus::{dataset_stats, load_dataset, LabeledDataset};
use mfel::eval::{ablation_suite, grid_search, prepare_folds, run_experiment, split, GridModel, GridResult, ParamGrid, SplitScheme};
use mfel::features::{FeatureLayout, FittedFeaturizer};
use mfel::lexicon::{LexiconSource, Lexicons};
use mfel::ml::train_ensemble;
use mfel::pipeline::{prepare_dataset, PreparedUser};
use mfel::webcontext::{fetch_all, FetchPolicy, HttpFetcher, PageFetcher, UrlTitleCache};

use crate::config::Settings;

/// Every JSON artifact records the seed and config fingerprint that produced
/// it, with the payload under `key`.
fn write_json<T: Serialize>(settings: &Settings, name: &str, key: &str, body: &T) -> Result<PathBuf> {
    let mut doc = serde_json::Map::new();
    doc.insert("seed".into(), settings.experiment.seed.into());
    doc.insert("config_fingerprint".into(), settings.experiment.fingerprint().into());
    doc.insert(key.into(), serde_json::to_value(body)?);
    let mut text = serde_json::to_string_pretty(&doc)?;
    text.push('\n');
    write_file(settings, name, &text)
}

fn write_file(settings: &Settings, name: &str, contents: &str) -> Result<PathBuf> {
    fs::create_dir_all(&settings.out).with_context(|| format!("creating {}", settings.out.display()))?;
    let path = settings.out.join(name);
    fs::write(&path, contents).with_context(|| format!("writing {}", path.display()))?;
    info!("wrote {}", path.display());
    Ok(path)
}

fn dataset(settings: &Settings) -> Result<LabeledDataset> {
    let path = settings.dataset()?;
    load_dataset(path).with_context(|| format!("loading dataset {}", path.display()))
}

/// Cached titles, or an empty cache when none is configured. Only
/// `fetch-titles` ever adds to the cache.
fn titles(settings: &Settings) -> Result<UrlTitleCache> {
    match &settings.cache {
        Some(p) => UrlTitleCache::load_or_default(p).with_context(|| format!("loading title cache {}", p.display())),
        None => Ok(UrlTitleCache::new()),
    }
}

pub fn stats(settings: &Settings) -> Result<()> {
    let report = dataset_stats(&dataset(settings)?);
    #[derive(Serialize)]
    struct Body<'a> {
        #[serde(flatten)]
        report: &'a mfel::corpus::StatsReport,
        rows: Vec<mfel::corpus::StatsRow>,
    }
    write_json(
        settings,
        "stats.json",
        "stats",
        &Body {
            report: &report,
            rows: report.rows(),
        },
    )?;
    let table = format!("{report}\n");
    write_file(settings, "stats.txt", &table)?;
    print!("{table}");
    Ok(())
}

struct NoNetwork;

impl PageFetcher for NoNetwork {
    fn fetch(&self, url: &str, _: &FetchPolicy) -> Result<Vec<u8>, String> {
        Err(format!("offline: refusing to fetch {url}"))
    }
}

pub fn fetch_titles(settings: &Settings) -> Result<()> {
    let ds = dataset(settings)?;
    let cache_path = settings
        .cache
        .clone()
        .unwrap_or_else(|| settings.out.join("title_cache.json"));
    let mut cache = UrlTitleCache::load_or_default(&cache_path)
        .with_context(|| format!("loading title cache {}", cache_path.display()))?;
    let policy = if settings.offline {
        FetchPolicy::offline()
    } else {
        FetchPolicy::default()
    };
    let fetcher: Box<dyn PageFetcher> = if settings.offline {
        Box::new(NoNetwork)
    } else {
        Box::new(HttpFetcher::new(&policy))
    };
    let urls: Vec<String> = ds.users.iter().flat_map(|u| &u.tweets).flat_map(|t| t.all_urls()).collect();
    let summary = fetch_all(urls.iter().map(String::as_str), &mut cache, &policy, fetcher.as_ref(), chrono::Utc::now());
    if summary.fetched > 0 {
        if let Some(dir) = cache_path.parent().filter(|d| !d.as_os_str().is_empty()) {
            fs::create_dir_all(dir)?;
        }
        cache
            .save(&cache_path)
            .with_context(|| format!("saving title cache {}", cache_path.display()))?;
    }
    write_json(settings, "fetch_summary.json", "summary", &summary)?;
    println!(
        "{} distinct URLs: {} cached, {} fetched, {} failed, {} offline misses",
        summary.distinct_urls,
        summary.cache_hits,
        summary.fetched,
        summary.failed,
        summary.offline_misses.len()
    );
    for url in &summary.offline_misses {
        println!("  not cached: {url}");
    }
    Ok(())
}

/// Users the featurizer and models are fitted on: the training side of the
/// holdout split when one is requested, otherwise everyone.
fn training_partition(settings: &Settings, ds: &LabeledDataset, prepared: &[PreparedUser]) -> Result<Vec<PreparedUser>> {
    match settings.holdout {
        Some(frac) => {
            let folds = split(&ds.labels(), SplitScheme::Holdout(frac), settings.experiment.seed)?;
            Ok(folds[0].train.iter().map(|&i| prepared[i].clone()).collect())
        }
        None => Ok(prepared.to_vec()),
    }
}

struct Fitted {
    ds: LabeledDataset,
    lexicons: Lexicons,
    prepared: Vec<PreparedUser>,
    train: Vec<PreparedUser>,
    featurizer: FittedFeaturizer,
}

fn fit_featurizer(settings: &Settings) -> Result<Fitted> {
    let ds = dataset(settings)?;
    let lexicons = settings.lexicons()?;
    let prepared = prepare_dataset(&ds, &titles(settings)?, &lexicons.stopwords, &settings.experiment.prepare);
    let train = training_partition(settings, &ds, &prepared)?;
    info!("fitting featurizer on {} of {} users", train.len(), prepared.len());
    let featurizer = FittedFeaturizer::fit(&train, &lexicons, &settings.experiment.fold_features(0))?;
    Ok(Fitted {
        ds,
        lexicons,
        prepared,
        train,
        featurizer,
    })
}

#[derive(Serialize)]
struct Manifest<'a> {
    dataset: &'a str,
    users: usize,
    layout: &'a FeatureLayout,
    layout_fingerprint: String,
    columns: Vec<String>,
    lexicons: &'a [LexiconSource],
    training_users: Vec<&'a str>,
    /// Users with no tweet left after filtering; only profile features and a
    /// uniform topic vector describe them.
    emptied_users: Vec<&'a str>,
}

pub fn featurize(settings: &Settings) -> Result<()> {
    let f = fit_featurizer(settings)?;
    let matrix = f.featurizer.transform(&f.prepared, &f.lexicons)?.ablate(&settings.experiment.drop);
    write_json(settings, "features.json", "features", &matrix)?;
    write_json(
        settings,
        "manifest.json",
        "manifest",
        &Manifest {
            dataset: &f.ds.source_name,
            users: matrix.len(),
            layout: &matrix.layout,
            layout_fingerprint: matrix.layout.fingerprint(),
            columns: matrix.layout.column_names(),
            lexicons: &f.lexicons.sources,
            training_users: f.train.iter().map(|u| u.record.user_id.as_str()).collect(),
            emptied_users: f
                .prepared
                .iter()
                .filter(|u| u.is_emptied())
                .map(|u| u.record.user_id.as_str())
                .collect(),
        },
    )?;
    println!("{} users x {} features", matrix.len(), matrix.dim());
    Ok(())
}

pub fn train(settings: &Settings) -> Result<()> {
    let f = fit_featurizer(settings)?;
    let x = f.featurizer.transform(&f.train, &f.lexicons)?.ablate(&settings.experiment.drop);
    info!("training ensemble on {} x {}", x.len(), x.dim());
    let ensemble = train_ensemble(&x.rows, &x.labels, &settings.experiment.fold_models(0))?;
    let bundle = ModelBundle::new(
        settings.experiment.seed,
        settings.experiment.fingerprint(),
        f.lexicons.sources.clone(),
        x.user_ids.clone(),
        settings.experiment.drop.clone(),
        f.featurizer,
        ensemble,
    );
    fs::create_dir_all(&settings.out)?;
    let path = settings.out.join("model.json");
    bundle.save(&path)?;
    println!("trained on {} users, {} features; bundle at {}", x.len(), x.dim(), path.display());
    Ok(())
}

fn emit_report(settings: &Settings, stem: &str, report: &mfel::eval::EvalReport) -> Result<()> {
    write_file(settings, &format!("{stem}.json"), &report.to_json())?;
    let table = report.to_string();
    write_file(settings, &format!("{stem}.txt"), &table)?;
    print!("{table}");
    Ok(())
}

pub fn evaluate(settings: &Settings) -> Result<()> {
    let report = run_experiment(&dataset(settings)?, &titles(settings)?, &settings.lexicons()?, &settings.experiment)?;
    emit_report(settings, "report", &report)
}

pub fn ablate(settings: &Settings) -> Result<()> {
    if !settings.experiment.drop.is_empty() {
        bail!("ablate already leaves out each modality in turn; remove --drop");
    }
    let report = ablation_suite(&dataset(settings)?, &titles(settings)?, &settings.lexicons()?, &settings.experiment)?;
    emit_report(settings, "ablation", &report)
}

fn load_grid(path: &Path) -> Result<ParamGrid> {
    let text = fs::read_to_string(path).with_context(|| format!("reading grid {}", path.display()))?;
    let grid: BTreeMap<String, Vec<f64>> = if path.extension().is_some_and(|e| e == "json") {
        serde_json::from_str(&text)?
    } else {
        toml::from_str(&text)?
    };
    Ok(ParamGrid(grid))
}

fn grid_table(result: &GridResult) -> String {
    let width = result.rows.iter().map(|r| r.label.len()).max().unwrap_or(6).max(6);
    let mut out = format!(
        "# Grid search: {} (seed {})\n{:<width$}  {:>12}  {:>12}\n",
        result.model, result.seed, "Params", "F1-Score (%)", "Accuracy (%)"
    );
    for (i, r) in result.rows.iter().enumerate() {
        out.push_str(&format!(
            "{:<width$}  {:>12.1}  {:>12.1}{}\n",
            r.label,
            r.metrics.f1 * 100.0,
            r.metrics.accuracy * 100.0,
            if i == result.best { "  *" } else { "" }
        ));
    }
    out
}

pub fn gridsearch(settings: &Settings, model: &str, grid_path: &Path) -> Result<()> {
    let model: GridModel = model.parse()?;
    let grid = load_grid(grid_path)?;
    let ds = dataset(settings)?;
    let folds = prepare_folds(&ds, &titles(settings)?, &settings.lexicons()?, &settings.experiment)?;
    let cfg = &settings.experiment;
    let result = grid_search(&folds, model, &grid, &cfg.models, &cfg.drop, cfg.seed)?;
    write_json(settings, "gridsearch.json", "grid_search", &result)?;
    let table = grid_table(&result);
    write_file(settings, "gridsearch.txt", &table)?;
    print!("{table}");
    Ok(())
}
