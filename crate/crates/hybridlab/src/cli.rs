//! Command-line pipeline: simulate, generate, train, eval, predict.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use ndarray::{Array2, Axis};
use rayon::prelude::*;

use crate::config::{ProfileSpec, Role, RunConfig};
use crate::core::{rer, Dataset};
use crate::datagen::{derive_seed, generate_aging_series, generate_truth};
use crate::error::{Error, Result};
use crate::fnn::{train, FnnModel};
use crate::hybrid::{
    build_training_pairs, evaluate, predict_series, EvalReport, HybridModel, ModelArtifact,
    PhysicalModelKind, TrainingMeta,
};
use crate::svg;

#[derive(Debug, Parser)]
#[command(name = "hybridlab", version, about = "Battery hybrid-modeling toolkit")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct CommonArgs {
    /// Run configuration (JSON).
    #[arg(long)]
    pub config: PathBuf,
    /// Output directory; overrides the config's output.dir.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Seed override for the whole run.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Time step override [s].
    #[arg(long)]
    pub dt: Option<f64>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run a physical model open-loop over a configured profile.
    Simulate {
        #[command(flatten)]
        common: CommonArgs,
        /// Profile name from the config (default: first).
        #[arg(long)]
        profile: Option<String>,
    },
    /// Generate ground-truth datasets and a manifest.
    Generate {
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Train a hybrid model from a generated manifest.
    Train {
        #[command(flatten)]
        common: CommonArgs,
        /// Manifest CSV from `generate`.
        #[arg(long)]
        manifest: PathBuf,
    },
    /// Evaluate a trained artifact against a manifest.
    Eval {
        #[command(flatten)]
        common: CommonArgs,
        /// Trained model artifact (JSON).
        #[arg(long)]
        model: PathBuf,
        /// Manifest CSV from `generate`.
        #[arg(long)]
        manifest: PathBuf,
    },
    /// Open-loop hybrid prediction without ground truth.
    Predict {
        #[command(flatten)]
        common: CommonArgs,
        /// Trained model artifact (JSON).
        #[arg(long)]
        model: PathBuf,
        /// Profile name from the config (default: first).
        #[arg(long)]
        profile: Option<String>,
        /// State of health fed to aging-aware artifacts.
        #[arg(long)]
        soh: Option<f64>,
        /// Ambient temperature for circuit-model hybrids [deg C].
        #[arg(long, default_value_t = 25.0)]
        temperature: f64,
    },
}

/// Applies CLI overrides to a loaded config.
fn load_config(common: &CommonArgs) -> Result<RunConfig> {
    let mut cfg = RunConfig::load(&common.config)?;
    if let Some(out) = &common.out {
        cfg.output.dir = out.to_string_lossy().into_owned();
    }
    if let Some(seed) = common.seed {
        cfg.experiment.seed = seed;
        cfg.training.train.seed = seed;
    }
    if let Some(dt) = common.dt {
        if !(dt > 0.0) {
            return Err(Error::Config("--dt must be > 0".into()));
        }
        cfg.experiment.dt_s = dt;
    }
    Ok(cfg)
}

fn out_dir(cfg: &RunConfig) -> Result<PathBuf> {
    let dir = if Path::new(&cfg.output.dir).is_absolute() {
        PathBuf::from(&cfg.output.dir)
    } else {
        cfg.base_dir.join(&cfg.output.dir)
    };
    std::fs::create_dir_all(&dir)?;
    Ok(dir)
}

/// Writes via a temp file in the same directory, then renames, so failed
/// runs never leave partial files behind.
pub fn write_atomic(path: &Path, contents: &str) -> Result<()> {
    let dir = path.parent().unwrap_or_else(|| Path::new("."));
    let tmp = dir.join(format!(
        ".{}.tmp{}",
        path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default(),
        std::process::id()
    ));
    std::fs::write(&tmp, contents)?;
    std::fs::rename(&tmp, path)?;
    Ok(())
}

/// One manifest row: a dataset file with its role in the experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct ManifestEntry {
    pub path: PathBuf,
    pub role: Role,
    pub profile_name: String,
    pub soh: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Manifest {
    pub entries: Vec<ManifestEntry>,
}

impl Manifest {
    pub fn to_csv_string(&self) -> String {
        let mut out = String::from("path,role,profile_name,soh\n");
        for e in &self.entries {
            out.push_str(&format!(
                "{},{},{},{}\n",
                e.path.display(),
                e.role,
                e.profile_name,
                e.soh.map(|s| s.to_string()).unwrap_or_default()
            ));
        }
        out
    }

    /// Loads a manifest; relative dataset paths resolve against the
    /// manifest's own directory.
    pub fn load(path: &Path) -> Result<Self> {
        let base = path.parent().unwrap_or_else(|| Path::new(".")).to_path_buf();
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Data(format!("{}: {e}", path.display())))?;
        let mut entries = Vec::new();
        let mut lines = text.lines().enumerate();
        match lines.next() {
            Some((_, h)) if h.trim() == "path,role,profile_name,soh" => {}
            _ => {
                return Err(Error::CsvParse {
                    line: 1,
                    what: "expected header path,role,profile_name,soh".into(),
                })
            }
        }
        for (k, line) in lines {
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != 4 {
                return Err(Error::CsvParse { line: k + 1, what: "expected 4 fields".into() });
            }
            let role = match fields[1].trim() {
                "train" => Role::Train,
                "test" => Role::Test,
                other => {
                    return Err(Error::CsvParse {
                        line: k + 1,
                        what: format!("unknown role '{other}'"),
                    })
                }
            };
            let soh = match fields[3].trim() {
                "" => None,
                s => Some(s.parse::<f64>().map_err(|e| Error::CsvParse {
                    line: k + 1,
                    what: e.to_string(),
                })?),
            };
            let p = PathBuf::from(fields[0].trim());
            let path = if p.is_absolute() { p } else { base.join(p) };
            entries.push(ManifestEntry { path, role, profile_name: fields[2].trim().into(), soh });
        }
        Ok(Manifest { entries })
    }
}

pub fn cmd_simulate(common: &CommonArgs, profile_name: Option<&str>) -> Result<()> {
    let cfg = load_config(common)?;
    let params = cfg.params()?;
    let spec = pick_profile(&cfg, profile_name)?;
    let profile = spec.build(&params, &cfg.base_dir)?;
    let trace = params.simulate(cfg.experiment.initial_soc, &profile, cfg.experiment.dt_s)?;
    let dir = out_dir(&cfg)?;
    let path = dir.join(format!("{}_trace.csv", spec.name));
    write_atomic(&path, &trace.to_csv_string())?;
    println!("wrote {} ({} rows)", path.display(), trace.records().len());
    if let Some(c) = trace.cutoff {
        // the window edge ended the run early; surface it as a numerical note
        return Err(Error::NumericalFailure {
            time: c.time_s,
            what: format!(
                "{} voltage limit reached at {:.4} V (trace written)",
                if c.lower { "lower" } else { "upper" },
                c.voltage_v
            ),
        });
    }
    Ok(())
}

fn pick_profile<'a>(cfg: &'a RunConfig, name: Option<&str>) -> Result<&'a ProfileSpec> {
    if cfg.experiment.profiles.is_empty() {
        return Err(Error::Config("no profiles configured".into()));
    }
    match name {
        None => Ok(&cfg.experiment.profiles[0]),
        Some(n) => cfg
            .experiment
            .profiles
            .iter()
            .find(|p| p.name == n)
            .ok_or_else(|| Error::Config(format!("profile '{n}' not found in config"))),
    }
}

pub fn cmd_generate(common: &CommonArgs) -> Result<()> {
    let cfg = load_config(common)?;
    if cfg.experiment.profiles.is_empty() {
        return Err(Error::Config("no profiles configured".into()));
    }
    let params = cfg.params()?;
    let truth = cfg.truth_spec();
    let dir = out_dir(&cfg)?;
    let dt = cfg.experiment.dt_s;
    let soc0 = cfg.experiment.initial_soc;
    let seed = cfg.experiment.seed;

    let mut entries = Vec::new();
    if cfg.experiment.soh_grid.is_empty() {
        let jobs: Vec<(usize, &ProfileSpec)> =
            cfg.experiment.profiles.iter().enumerate().collect();
        let datasets: Vec<Dataset> = jobs
            .par_iter()
            .map(|(idx, spec)| {
                let profile = spec.build(&params, &cfg.base_dir)?;
                generate_truth(
                    &truth,
                    &params,
                    &profile,
                    soc0,
                    dt,
                    derive_seed(seed, *idx as u64),
                    &spec.name,
                )
            })
            .collect::<Result<Vec<_>>>()?;
        for (spec, ds) in cfg.experiment.profiles.iter().zip(datasets) {
            let file = format!("{}.csv", spec.name);
            write_atomic(&dir.join(&file), &ds.to_csv_string())?;
            entries.push(ManifestEntry {
                path: PathBuf::from(file),
                role: spec.role,
                profile_name: spec.name.clone(),
                soh: None,
            });
        }
    } else {
        let profiles: Vec<(String, crate::core::CurrentProfile)> = cfg
            .experiment
            .profiles
            .iter()
            .map(|s| Ok((s.name.clone(), s.build(&params, &cfg.base_dir)?)))
            .collect::<Result<Vec<_>>>()?;
        let datasets = generate_aging_series(
            &truth,
            &params,
            &cfg.experiment.soh_grid,
            &profiles,
            soc0,
            dt,
            seed,
        )?;
        let mut it = datasets.into_iter();
        for &soh in &cfg.experiment.soh_grid {
            for spec in &cfg.experiment.profiles {
                let ds = it.next().expect("one dataset per (soh, profile)");
                let file = format!("{}.csv", ds.meta.label);
                write_atomic(&dir.join(&file), &ds.to_csv_string())?;
                entries.push(ManifestEntry {
                    path: PathBuf::from(file),
                    role: spec.role,
                    profile_name: spec.name.clone(),
                    soh: Some(soh),
                });
            }
        }
    }
    let manifest = Manifest { entries };
    let mpath = dir.join("manifest.csv");
    write_atomic(&mpath, &manifest.to_csv_string())?;
    println!("wrote {} datasets and {}", manifest.entries.len(), mpath.display());
    Ok(())
}

pub fn cmd_train(common: &CommonArgs, manifest_path: &Path) -> Result<()> {
    let cfg = load_config(common)?;
    let params = cfg.params()?;
    let spec = cfg.training.feature_spec(cfg.model.kind)?;
    let manifest = Manifest::load(manifest_path)?;
    let train_rows: Vec<&ManifestEntry> =
        manifest.entries.iter().filter(|e| e.role == Role::Train).collect();
    if train_rows.is_empty() {
        return Err(Error::Data("manifest has no train entries".into()));
    }
    let dt = cfg.experiment.dt_s;
    let soc0 = cfg.experiment.initial_soc;

    let pairs: Vec<(Array2<f64>, Array2<f64>)> = train_rows
        .par_iter()
        .map(|entry| {
            let ds = Dataset::from_csv(&entry.path)?;
            let profile = ds.profile()?;
            let trace = params.simulate(soc0, &profile, dt)?;
            build_training_pairs(&spec, &trace, &ds)
        })
        .collect::<Result<Vec<_>>>()?;
    let views: Vec<_> = pairs.iter().map(|(x, _)| x.view()).collect();
    let inputs = ndarray::concatenate(Axis(0), &views).map_err(|e| Error::Data(e.to_string()))?;
    let views: Vec<_> = pairs.iter().map(|(_, y)| y.view()).collect();
    let targets = ndarray::concatenate(Axis(0), &views).map_err(|e| Error::Data(e.to_string()))?;

    let layer_sizes = cfg.layer_sizes()?;
    let init = FnnModel::new(&layer_sizes, cfg.training.train.seed)?;
    let (fnn, history) = train(init, &inputs, &targets, &cfg.training.train)?;
    let final_stats = history.last().copied();
    let hybrid = HybridModel::new(spec, fnn)?;
    let meta = TrainingMeta {
        seed: cfg.training.train.seed,
        config: cfg.training.train.clone(),
        final_train_loss: final_stats.map(|s| s.train_loss),
        final_val_loss: final_stats.and_then(|s| s.val_loss),
    };
    let artifact = ModelArtifact::from_model(&hybrid, meta);

    let dir = out_dir(&cfg)?;
    write_atomic(&dir.join("model.json"), &artifact.to_json()?)?;
    let mut loss_csv = String::from("epoch,train_loss,val_loss\n");
    for s in &history {
        loss_csv.push_str(&format!(
            "{},{},{}\n",
            s.epoch,
            s.train_loss,
            s.val_loss.map(|v| v.to_string()).unwrap_or_default()
        ));
    }
    write_atomic(&dir.join("loss_history.csv"), &loss_csv)?;
    println!(
        "trained on {} samples over {} epochs -> {}",
        inputs.nrows(),
        history.len(),
        dir.join("model.json").display()
    );
    Ok(())
}

/// Per-profile evaluation row for the report table.
#[derive(Debug, Clone)]
pub struct ReportRow {
    pub profile: String,
    pub role: Role,
    pub soh: Option<f64>,
    pub rmse_phy: f64,
    pub rmse_hybrid: f64,
    pub rer: f64,
}

pub fn format_report_table(rows: &[ReportRow]) -> String {
    let mut out = String::new();
    out.push_str(&format!(
        "{:<24} {:<6} {:>6} {:>15} {:>18} {:>9}\n",
        "profile", "role", "soh", "RMSE phy [mV]", "RMSE hybrid [mV]", "RER [%]"
    ));
    for r in rows {
        out.push_str(&format!(
            "{:<24} {:<6} {:>6} {:>15.2} {:>18.2} {:>9.2}\n",
            r.profile,
            r.role.to_string(),
            r.soh.map(|s| format!("{s:.2}")).unwrap_or_else(|| "-".into()),
            r.rmse_phy * 1e3,
            r.rmse_hybrid * 1e3,
            r.rer
        ));
    }
    out
}

pub fn cmd_eval(common: &CommonArgs, model_path: &Path, manifest_path: &Path) -> Result<()> {
    let cfg = load_config(common)?;
    let params = cfg.params()?;
    let artifact = ModelArtifact::from_json(
        &std::fs::read_to_string(model_path)
            .map_err(|e| Error::Data(format!("{}: {e}", model_path.display())))?,
    )?;
    let hybrid = artifact.into_model()?;
    let manifest = Manifest::load(manifest_path)?;
    if manifest.entries.is_empty() {
        return Err(Error::Data("manifest is empty".into()));
    }
    let dt = cfg.experiment.dt_s;
    let soc0 = cfg.experiment.initial_soc;

    let results: Vec<(EvalReport, Dataset)> = manifest
        .entries
        .par_iter()
        .map(|entry| {
            let ds = Dataset::from_csv(&entry.path)?;
            let profile = ds.profile()?;
            let rep = evaluate(&hybrid, &params, soc0, &profile, &ds, dt)?;
            Ok((rep, ds))
        })
        .collect::<Result<Vec<_>>>()?;

    let dir = out_dir(&cfg)?;
    let mut rows = Vec::new();
    for (entry, (rep, ds)) in manifest.entries.iter().zip(&results) {
        let label = if ds.meta.label.is_empty() { entry.profile_name.clone() } else { ds.meta.label.clone() };
        rows.push(ReportRow {
            profile: label.clone(),
            role: entry.role,
            soh: entry.soh,
            rmse_phy: rep.rmse_phy,
            rmse_hybrid: rep.rmse_hybrid,
            rer: rep.rer,
        });
        let mut resid = String::from("time_s,v_true,v_phy,v_hybrid\n");
        for i in 0..rep.times.len() {
            resid.push_str(&format!(
                "{},{},{},{}\n",
                rep.times[i], rep.v_true[i], rep.v_phy[i], rep.v_hybrid[i]
            ));
        }
        write_atomic(&dir.join(format!("residuals_{label}.csv")), &resid)?;
        if cfg.output.plots {
            let truth: Vec<(f64, f64)> =
                rep.times.iter().copied().zip(rep.v_true.iter().copied()).collect();
            let phy: Vec<(f64, f64)> =
                rep.times.iter().copied().zip(rep.v_phy.iter().copied()).collect();
            let hyb: Vec<(f64, f64)> =
                rep.times.iter().copied().zip(rep.v_hybrid.iter().copied()).collect();
            let chart = svg::line_chart(
                &format!("voltage overlay: {label}"),
                "time [s]",
                "voltage [V]",
                &[("truth", &truth), ("physical", &phy), ("hybrid", &hyb)],
            );
            if let Err(e) = write_atomic(&dir.join(format!("overlay_{label}.svg")), &chart) {
                eprintln!("warning: failed to write plot for {label}: {e}");
            }
        }
    }

    let mut report_csv = String::from("profile,role,soh,rmse_phy_v,rmse_hybrid_v,rer_percent\n");
    for r in &rows {
        report_csv.push_str(&format!(
            "{},{},{},{},{},{}\n",
            r.profile,
            r.role,
            r.soh.map(|s| s.to_string()).unwrap_or_default(),
            r.rmse_phy,
            r.rmse_hybrid,
            r.rer
        ));
    }
    write_atomic(&dir.join("report.csv"), &report_csv)?;
    let table = format_report_table(&rows);
    write_atomic(&dir.join("report.txt"), &table)?;
    print!("{table}");

    // internal consistency: table RER equals core::rer of its own columns
    for r in &rows {
        debug_assert!((rer(r.rmse_phy, r.rmse_hybrid).unwrap_or(r.rer) - r.rer).abs() < 1e-9);
    }

    if cfg.output.plots && rows.iter().any(|r| r.soh.is_some()) {
        // RMSE-vs-SoH bars, aggregated over profiles at each SoH point
        let mut sohs: Vec<f64> = rows.iter().filter_map(|r| r.soh).collect();
        sohs.sort_by(|a, b| b.partial_cmp(a).unwrap());
        sohs.dedup();
        let labels: Vec<String> = sohs.iter().map(|s| format!("{s:.2}")).collect();
        let agg = |f: &dyn Fn(&ReportRow) -> f64| -> Vec<f64> {
            sohs.iter()
                .map(|&s| {
                    let vals: Vec<f64> = rows
                        .iter()
                        .filter(|r| r.soh == Some(s))
                        .map(|r| f(r) * 1e3)
                        .collect();
                    vals.iter().sum::<f64>() / vals.len() as f64
                })
                .collect()
        };
        let phy = agg(&|r| r.rmse_phy);
        let hyb = agg(&|r| r.rmse_hybrid);
        let chart = svg::bar_chart(
            "RMSE vs SoH",
            "SoH",
            "RMSE [mV]",
            &labels,
            &[("physical", &phy), ("hybrid", &hyb)],
        );
        if let Err(e) = write_atomic(&dir.join("rmse_vs_soh.svg"), &chart) {
            eprintln!("warning: failed to write RMSE-vs-SoH plot: {e}");
        }
    }
    Ok(())
}

pub fn cmd_predict(
    common: &CommonArgs,
    model_path: &Path,
    profile_name: Option<&str>,
    soh: Option<f64>,
    temperature_c: f64,
) -> Result<()> {
    let cfg = load_config(common)?;
    let params = cfg.params()?;
    let artifact = ModelArtifact::from_json(
        &std::fs::read_to_string(model_path)
            .map_err(|e| Error::Data(format!("{}: {e}", model_path.display())))?,
    )?;
    let hybrid = artifact.into_model()?;
    let spec = pick_profile(&cfg, profile_name)?;
    let profile = spec.build(&params, &cfg.base_dir)?;
    let ambient = match hybrid.spec.physical_model {
        PhysicalModelKind::Ndc => Some(temperature_c),
        PhysicalModelKind::Spmt => None,
    };
    let (trace, v_hybrid) = predict_series(
        &hybrid,
        &params,
        cfg.experiment.initial_soc,
        &profile,
        cfg.experiment.dt_s,
        ambient,
        soh,
    )?;
    let mut out = String::from("time_s,current_a,v_phy,v_hybrid\n");
    for (rec, vh) in trace.records().iter().zip(&v_hybrid) {
        out.push_str(&format!("{},{},{},{}\n", rec.time_s, rec.current_a, rec.voltage_v, vh));
    }
    let dir = out_dir(&cfg)?;
    let path = dir.join(format!("predict_{}.csv", spec.name));
    write_atomic(&path, &out)?;
    println!("wrote {} ({} rows)", path.display(), v_hybrid.len());
    Ok(())
}

/// Dispatches a parsed command; returns the process exit code.
pub fn run(cli: Cli) -> i32 {
    if let Ok(threads) = std::env::var("HYBRIDLAB_THREADS") {
        if let Ok(n) = threads.parse::<usize>() {
            let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
        }
    }
    let result = match &cli.command {
        Command::Simulate { common, profile } => cmd_simulate(common, profile.as_deref()),
        Command::Generate { common } => cmd_generate(common),
        Command::Train { common, manifest } => cmd_train(common, manifest),
        Command::Eval { common, model, manifest } => cmd_eval(common, model, manifest),
        Command::Predict { common, model, profile, soh, temperature } => {
            cmd_predict(common, model, profile.as_deref(), *soh, *temperature)
        }
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn manifest_round_trip() {
        let m = Manifest {
            entries: vec![
                ManifestEntry {
                    path: PathBuf::from("a.csv"),
                    role: Role::Train,
                    profile_name: "c1".into(),
                    soh: Some(0.95),
                },
                ManifestEntry {
                    path: PathBuf::from("b.csv"),
                    role: Role::Test,
                    profile_name: "c3".into(),
                    soh: None,
                },
            ],
        };
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("manifest.csv");
        std::fs::write(&p, m.to_csv_string()).unwrap();
        let back = Manifest::load(&p).unwrap();
        assert_eq!(back.entries.len(), 2);
        assert_eq!(back.entries[0].path, dir.path().join("a.csv"));
        assert_eq!(back.entries[0].soh, Some(0.95));
        assert_eq!(back.entries[1].soh, None);
        assert_eq!(back.entries[1].role, Role::Test);
    }

    #[test]
    fn manifest_rejects_bad_header() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("manifest.csv");
        std::fs::write(&p, "nope\n").unwrap();
        assert!(matches!(Manifest::load(&p), Err(Error::CsvParse { line: 1, .. })));
    }

    #[test]
    fn atomic_write_replaces_content() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("f.txt");
        write_atomic(&p, "one").unwrap();
        write_atomic(&p, "two").unwrap();
        assert_eq!(std::fs::read_to_string(&p).unwrap(), "two");
        // no temp litter
        assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 1);
    }

    #[test]
    fn report_table_layout() {
        let rows = vec![ReportRow {
            profile: "1C".into(),
            role: Role::Train,
            soh: None,
            rmse_phy: 0.02034,
            rmse_hybrid: 0.00429,
            rer: 78.91,
        }];
        let t = format_report_table(&rows);
        assert!(t.contains("RMSE phy [mV]"));
        assert!(t.contains("20.34"));
        assert!(t.contains("4.29"));
        assert!(t.contains("78.91"));
    }
}
