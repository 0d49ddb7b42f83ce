//! The four pipeline stages. Each reads what earlier stages wrote under the
//! output root and returns the paths it wrote.
//!
//! ```text
//! <out>/run_config.toml            effective configuration
//! <out>/datasets/<stem>.csv|.json  records and regeneration metadata
//! <out>/models/<model>.json        parameters and training metadata
//! <out>/models/<model>_loss.csv    epoch,loss
//! <out>/reports/benchmark.csv|json per-axis integrated errors
//! <out>/reports/slice_*.csv        D-force transects
//! <out>/reports/contour_*.csv      D-force lateral grids
//! <out>/reports/summary.json       peak counts and support radii
//! ```

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use downwash_core::dataset::{Dataset, DatasetMeta};
use downwash_core::eval::{
    benchmark, contour_grid, count_profile_peaks, slice_profile, BenchCase, EvalReport, EvalSettings,
};
use downwash_core::formations::Formation;
use downwash_core::models::{
    samples_from_records, saved_from_trainable, train, GridLookupModel, GridSpec, ModelFile, ModelKind, SavedModel,
    TrainReport, TrainingMeta,
};
use downwash_core::oracle::OracleKind;
use downwash_core::WrenchModel;
use serde::Serialize;

use crate::config::RunConfig;
use crate::error::CliError;

pub struct Layout {
    pub root: PathBuf,
}

impl Layout {
    pub fn new(cfg: &RunConfig) -> Self {
        Layout { root: cfg.out.clone() }
    }

    pub fn datasets(&self) -> PathBuf {
        self.root.join("datasets")
    }

    pub fn models(&self) -> PathBuf {
        self.root.join("models")
    }

    pub fn reports(&self) -> PathBuf {
        self.root.join("reports")
    }

    pub fn dataset(&self, stem: &str) -> PathBuf {
        self.datasets().join(format!("{stem}.csv"))
    }

    pub fn model(&self, kind: ModelKind) -> PathBuf {
        self.models().join(format!("{kind}.json"))
    }

    pub fn loss(&self, kind: ModelKind) -> PathBuf {
        self.models().join(format!("{kind}_loss.csv"))
    }
}

fn create_dir(p: &Path) -> Result<(), CliError> {
    fs::create_dir_all(p).map_err(|e| downwash_core::Error::Io {
        path: p.to_path_buf(),
        source: e,
    })?;
    Ok(())
}

fn write_file(p: &Path, contents: &str) -> Result<PathBuf, CliError> {
    fs::write(p, contents).map_err(|e| downwash_core::Error::Io {
        path: p.to_path_buf(),
        source: e,
    })?;
    Ok(p.to_path_buf())
}

fn write_run_config(cfg: &RunConfig) -> Result<(), CliError> {
    create_dir(&cfg.out)?;
    write_file(&cfg.out.join("run_config.toml"), &cfg.to_toml())?;
    Ok(())
}

fn read_dataset(path: &Path) -> Result<Dataset, CliError> {
    if !path.exists() {
        return Err(CliError::MissingInput {
            path: path.to_path_buf(),
            hint: "run `downwash gen` first".into(),
        });
    }
    Ok(Dataset::read(path)?)
}

/// Generate every configured dataset.
pub fn cmd_gen(cfg: &RunConfig) -> Result<Vec<PathBuf>, CliError> {
    write_run_config(cfg)?;
    let layout = Layout::new(cfg);
    create_dir(&layout.datasets())?;
    let mut written = Vec::new();
    for spec in &cfg.datasets {
        let stem = spec.stem();
        let meta = DatasetMeta::new(
            spec.formation,
            spec.k,
            cfg.sweep_for(spec),
            spec.oracle,
            cfg.field,
            cfg.noise_params(&stem),
        );
        let data = Dataset::regenerate(&meta)?;
        let path = layout.dataset(&stem);
        data.write(&path)?;
        eprintln!("wrote {} ({} records)", path.display(), data.records.len());
        written.push(path);
    }
    Ok(written)
}

/// Grid model fitted on the K=1 datasets, aligned with the first one's sweep.
pub fn fit_naive(datasets: &[(String, Dataset)], e_cells: usize) -> Result<GridLookupModel, CliError> {
    let single: Vec<&Dataset> = datasets.iter().map(|(_, d)| d).filter(|d| d.k() == 1).collect();
    let first = single
        .first()
        .ok_or_else(|| CliError::config("the naive model needs at least one K=1 dataset"))?;
    let spec = GridSpec::for_sweep(&first.meta.sweep, e_cells)?;
    Ok(GridLookupModel::fit(single.iter().flat_map(|d| &d.records), spec)?)
}

/// Train one registered model on the given datasets.
pub fn train_one(
    cfg: &RunConfig,
    kind: ModelKind,
    datasets: &[(String, Dataset)],
) -> Result<(SavedModel, TrainReport), CliError> {
    let arch = &cfg.train.architecture;
    let mut model = kind.init_trainable(arch, cfg.init_seed(kind.as_str()))?;
    let samples = samples_from_records(datasets.iter().flat_map(|(_, d)| &d.records));
    let report = train(model.as_mut(), &samples, &cfg.train_config(kind.as_str()))?;
    Ok((saved_from_trainable(kind, arch, model.as_ref())?, report))
}

fn loss_csv(history: &[f64]) -> String {
    let mut out = String::from("epoch,loss\n");
    for (i, l) in history.iter().enumerate() {
        let _ = writeln!(out, "{i},{l}");
    }
    out
}

/// Fit the naive model and train the learnt ones.
///
/// With explicit `dataset_paths`, those files replace the configured mix:
/// K=1 files feed the naive model and all of them the learnt models.
pub fn cmd_train(cfg: &RunConfig, dataset_paths: &[PathBuf]) -> Result<Vec<PathBuf>, CliError> {
    write_run_config(cfg)?;
    let layout = Layout::new(cfg);
    let load = |stems: &[String]| -> Result<Vec<(String, Dataset)>, CliError> {
        stems
            .iter()
            .map(|s| Ok((s.clone(), read_dataset(&layout.dataset(s))?)))
            .collect()
    };
    let (naive_data, train_data) = if dataset_paths.is_empty() {
        let all: Vec<String> = cfg.datasets.iter().map(|d| d.stem()).collect();
        let single: Vec<String> = cfg.datasets.iter().filter(|d| d.k == 1).map(|d| d.stem()).collect();
        let pick = |listed: &[String], fallback: &[String]| {
            if listed.is_empty() {
                fallback.to_vec()
            } else {
                listed.to_vec()
            }
        };
        (
            load(&pick(&cfg.naive.datasets, &single))?,
            load(&pick(&cfg.train.datasets, &all))?,
        )
    } else {
        let data = dataset_paths
            .iter()
            .map(|p| {
                let d = read_dataset(p)?;
                Ok((d.meta.stem(), d))
            })
            .collect::<Result<Vec<_>, CliError>>()?;
        (data.clone(), data)
    };

    create_dir(&layout.models())?;
    let mut written = Vec::new();

    let naive = fit_naive(&naive_data, cfg.naive.e_cells)?;
    let file = ModelFile::new(
        SavedModel::from(&naive),
        TrainingMeta {
            datasets: naive_data
                .iter()
                .filter(|(_, d)| d.k() == 1)
                .map(|(s, _)| s.clone())
                .collect(),
            config: None,
            loss_history: Vec::new(),
        },
    );
    let path = layout.model(ModelKind::Naive);
    file.save(&path)?;
    eprintln!("wrote {}", path.display());
    written.push(path);

    let stems: Vec<String> = train_data.iter().map(|(s, _)| s.clone()).collect();
    for &kind in &cfg.train.models {
        let (saved, report) = train_one(cfg, kind, &train_data)?;
        let file = ModelFile::new(
            saved,
            TrainingMeta {
                datasets: stems.clone(),
                config: Some(cfg.train_config(kind.as_str())),
                loss_history: report.loss_history.clone(),
            },
        );
        let path = layout.model(kind);
        file.save(&path)?;
        written.push(path.clone());
        written.push(write_file(&layout.loss(kind), &loss_csv(&report.loss_history))?);
        eprintln!(
            "wrote {} (final loss {:.6})",
            path.display(),
            report.loss_history.last().copied().unwrap_or(f64::NAN)
        );
    }
    Ok(written)
}

/// A model argument: a registered model name (resolved under the output
/// root), `oracle:<name>`, or a path to a model file.
pub fn load_model(cfg: &RunConfig, spec: &str) -> Result<Box<dyn WrenchModel>, CliError> {
    if let Some(name) = spec.strip_prefix("oracle:") {
        let kind: OracleKind = name.parse()?;
        return Ok(kind.build(&cfg.field));
    }
    let path = match spec.parse::<ModelKind>() {
        Ok(kind) => Layout::new(cfg).model(kind),
        Err(_) => PathBuf::from(spec),
    };
    if !path.exists() {
        return Err(CliError::MissingInput {
            path,
            hint: "train it first or pass a model file".into(),
        });
    }
    Ok(ModelFile::load(&path)?.model.into_model()?)
}

fn load_models(cfg: &RunConfig, specs: &[String]) -> Result<Vec<Box<dyn WrenchModel>>, CliError> {
    let defaults: Vec<String> = ModelKind::ALL.iter().map(|k| k.as_str().to_string()).collect();
    let specs = if specs.is_empty() { &defaults } else { specs };
    specs.iter().map(|s| load_model(cfg, s)).collect()
}

/// Benchmark table for the given models over the configured cases.
pub fn evaluate(cfg: &RunConfig, models: &[&dyn WrenchModel]) -> Result<EvalReport, CliError> {
    let truth = cfg.eval.oracle.build(&cfg.field);
    let cases = cfg
        .eval
        .cases
        .iter()
        .map(|c| {
            Ok(BenchCase {
                label: c.label(),
                formation: Formation::new(c.formation, c.k, cfg.sweep.spacing)?,
                truth: truth.as_ref(),
            })
        })
        .collect::<Result<Vec<_>, downwash_core::Error>>()?;
    Ok(benchmark(models, &cases, &cfg.eval.settings())?)
}

pub fn cmd_eval(cfg: &RunConfig, model_specs: &[String]) -> Result<Vec<PathBuf>, CliError> {
    let models = load_models(cfg, model_specs)?;
    let refs: Vec<&dyn WrenchModel> = models.iter().map(|m| m.as_ref()).collect();
    let report = evaluate(cfg, &refs)?;
    write_run_config(cfg)?;
    let dir = Layout::new(cfg).reports();
    create_dir(&dir)?;
    let written = vec![
        write_file(&dir.join("benchmark.csv"), &report.to_csv())?,
        write_file(&dir.join("benchmark.json"), &report.to_json())?,
    ];
    for p in &written {
        eprintln!("wrote {}", p.display());
    }
    Ok(written)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SliceSummary {
    pub case: String,
    pub altitude: f64,
    pub file: String,
    /// Peak count per column, in column order.
    pub peaks: Vec<(String, usize)>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ContourSummary {
    pub case: String,
    pub altitude: f64,
    pub model: String,
    pub file: String,
    pub max_f_d: f64,
    /// Radius of the disc with the area where D-force is at least half its maximum.
    pub support_radius_50: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReportSummary {
    pub oracle: String,
    pub settings: EvalSettings,
    pub slices: Vec<SliceSummary>,
    pub contours: Vec<ContourSummary>,
}

fn altitude_tag(a: f64) -> String {
    format!("{a}").replace('.', "p")
}

/// Slice profiles and contour grids for every case and altitude, plus a
/// JSON summary of peak counts and support radii.
pub fn cmd_report(cfg: &RunConfig, model_specs: &[String]) -> Result<Vec<PathBuf>, CliError> {
    let models = load_models(cfg, model_specs)?;
    let refs: Vec<&dyn WrenchModel> = models.iter().map(|m| m.as_ref()).collect();
    let truth = cfg.eval.oracle.build(&cfg.field);
    let settings = cfg.eval.settings();
    write_run_config(cfg)?;
    let dir = Layout::new(cfg).reports();
    create_dir(&dir)?;

    let mut written = Vec::new();
    let mut summary = ReportSummary {
        oracle: cfg.eval.oracle.to_string(),
        settings: settings.clone(),
        slices: Vec::new(),
        contours: Vec::new(),
    };
    for case in &cfg.eval.cases {
        let formation = Formation::new(case.formation, case.k, cfg.sweep.spacing)?;
        for &alt in &settings.altitudes {
            let tag = format!("{}_{}", case.label(), altitude_tag(alt));
            let plane = settings.plane(alt);
            let slice = slice_profile(
                &refs,
                truth.as_ref(),
                &formation,
                alt,
                cfg.eval.slice_axis,
                cfg.eval.extent,
                cfg.eval.slice_resolution,
                plane.velocity,
            )?;
            let name = format!("slice_{tag}.csv");
            written.push(write_file(&dir.join(&name), &slice.to_csv())?);
            summary.slices.push(SliceSummary {
                case: case.label(),
                altitude: alt,
                file: name,
                peaks: slice
                    .names
                    .iter()
                    .zip(&slice.columns)
                    .map(|(n, c)| (n.clone(), count_profile_peaks(c)))
                    .collect(),
            });

            let labelled = refs
                .iter()
                .map(|m| (m.name().to_string(), *m))
                .chain(std::iter::once(("ground_truth".to_string(), truth.as_ref())));
            for (label, m) in labelled {
                let grid = contour_grid(m, &formation, &plane)?;
                let name = format!("contour_{tag}_{label}.csv");
                written.push(write_file(&dir.join(&name), &grid.to_csv())?);
                summary.contours.push(ContourSummary {
                    case: case.label(),
                    altitude: alt,
                    model: label,
                    file: name,
                    max_f_d: grid.max(),
                    support_radius_50: grid.support_radius(0.5),
                });
            }
        }
    }
    let json = serde_json::to_string_pretty(&summary).expect("summary serializes") + "\n";
    written.push(write_file(&dir.join("summary.json"), &json)?);
    eprintln!("wrote {} report files to {}", written.len(), dir.display());
    Ok(written)
}
