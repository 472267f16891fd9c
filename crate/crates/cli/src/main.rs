//! `patchselect`: batch front-end for the GPR buried-threat-detection
//! pipeline. Subcommands: `generate` synthetic scenes to disk, `prescreen`
//! them into labeled alarms, `run` an experiment sweep to CSV (and
//! optionally SVG), and `report` strategy rankings from a results CSV.
//!
//! Verbosity is controlled by the `PATCHSELECT_LOG` environment variable
//! (e.g. `PATCHSELECT_LOG=info`). Exit codes: 0 on success, 1 on runtime
//! errors (IO, config, format), 2 on usage errors.

mod config;
mod report;
mod svg;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;

use patchselect_core::alarm::GroundTruth;
use patchselect_core::dataset::Dataset;
use patchselect_core::eval::cluster_and_fold;
use patchselect_core::eval::experiments::{
    fig4_table, fig5_table, fig6_table, fig7_table, fig8_table, run_policy_grid,
    run_strategy_bench, ClfKind,
};
use patchselect_core::features::FeatureKind;
use patchselect_core::io::{
    load_bscan, read_truth_csv, save_bscan, write_alarms_csv, write_truth_csv, TruthRow,
};
use patchselect_core::strategy::registry;
use patchselect_core::synth::{generate_scene, SceneConfig};

use config::ExperimentConfig;

#[derive(Parser)]
#[command(
    name = "patchselect",
    version,
    about = "GPR buried-threat detection: synthetic scenes, keypoint utilization strategies, and ROC/pAUC sweeps"
)]
struct Cli {
    /// Experiment configuration (TOML); defaults match the committed benchmark.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory (overrides the config's output_dir).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Replace the config's dataset seed list with this single seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (0 or absent: all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Overwrite existing outputs.
    #[arg(long, global = true)]
    force: bool,
    /// Also emit SVG charts next to the CSV.
    #[arg(long, global = true)]
    svg: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate the configured scene grid to disk with truth manifests.
    Generate,
    /// Prescreen generated scenes into a labeled, clustered alarm list.
    Prescreen,
    /// Run an experiment sweep and write results.csv.
    Run {
        #[arg(value_enum)]
        experiment: Experiment,
    },
    /// Print strategy rankings from a results CSV.
    Report {
        /// Path to a results.csv produced by `run fig4` or `run single`.
        results: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Experiment {
    Fig4,
    Fig5,
    Fig6,
    Fig7,
    Fig8,
    Single,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("PATCHSELECT_LOG", "warn"))
        .init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(1)
        }
    }
}

fn run(cli: Cli) -> anyhow::Result<()> {
    #[cfg(feature = "parallel")]
    if let Some(jobs) = cli.jobs {
        if jobs > 0 {
            rayon::ThreadPoolBuilder::new()
                .num_threads(jobs)
                .build_global()
                .context("configuring the worker pool")?;
        }
    }
    #[cfg(not(feature = "parallel"))]
    if cli.jobs.is_some() {
        log::warn!("--jobs has no effect: built without the `parallel` feature");
    }

    let mut config = ExperimentConfig::load(cli.config.as_deref())?;
    if let Some(out) = cli.out {
        config.output_dir = out;
    }
    if let Some(seed) = cli.seed {
        config.bench.dataset_seeds = vec![seed];
    }
    config.validate()?;

    match cli.command {
        Command::Generate => cmd_generate(&config, cli.force),
        Command::Prescreen => cmd_prescreen(&config, cli.force),
        Command::Run { experiment } => cmd_run(&config, experiment, cli.force, cli.svg),
        Command::Report { results } => cmd_report(&results, &config, cli.svg),
    }
}

/// Serialize rows to CSV and append the config-hash column. All emitted
/// fields are plain numbers or identifier-safe strings, so textual column
/// appending stays valid CSV.
fn write_csv_with_hash<T: Serialize>(rows: &[T], hash: &str, path: &Path) -> anyhow::Result<()> {
    let mut writer = csv::Writer::from_writer(Vec::new());
    for row in rows {
        writer.serialize(row)?;
    }
    let body = String::from_utf8(writer.into_inner()?)?;
    let mut out = String::with_capacity(body.len() + rows.len() * 20);
    for (i, line) in body.lines().enumerate() {
        out.push_str(line);
        out.push(',');
        out.push_str(if i == 0 { "config_hash" } else { hash });
        out.push('\n');
    }
    std::fs::write(path, out).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

fn refuse_overwrite(path: &Path, force: bool) -> anyhow::Result<()> {
    if path.exists() && !force {
        bail!(
            "{} already exists; pass --force to overwrite",
            path.display()
        );
    }
    Ok(())
}

fn scene_grid(config: &ExperimentConfig) -> Vec<SceneConfig> {
    let bench = &config.bench;
    let mut out = Vec::new();
    for &seed in &bench.dataset_seeds {
        for lane in 0..bench.lanes {
            for run in 0..bench.runs {
                out.push(SceneConfig {
                    lane_id: lane,
                    run_id: run,
                    seed,
                    ..bench.scene.clone()
                });
            }
        }
    }
    out
}

#[derive(Serialize)]
struct SceneRow {
    dataset_seed: u64,
    lane_id: u32,
    run_id: u32,
    path: String,
    t_len: usize,
    x_len: usize,
    downtrack_spacing_m: f64,
    lane_area_m2: f64,
}

fn cmd_generate(config: &ExperimentConfig, force: bool) -> anyhow::Result<()> {
    let out_dir = &config.output_dir;
    let manifest = out_dir.join("scenes.csv");
    refuse_overwrite(&manifest, force)?;
    std::fs::create_dir_all(out_dir.join("scenes"))?;

    let hash = config.hash();
    let mut scene_rows = Vec::new();
    let mut truth_rows: Vec<TruthRow> = Vec::new();
    let mut n_objects = 0usize;
    for scene_cfg in scene_grid(config) {
        let (bscan, truth) = generate_scene(&scene_cfg)?;
        let name = format!(
            "seed{:03}_lane{:02}_run{:02}.gprb",
            scene_cfg.seed, scene_cfg.lane_id, scene_cfg.run_id
        );
        let path = out_dir.join("scenes").join(&name);
        save_bscan(&bscan, &path)?;
        scene_rows.push(SceneRow {
            dataset_seed: scene_cfg.seed,
            lane_id: scene_cfg.lane_id,
            run_id: scene_cfg.run_id,
            path: format!("scenes/{name}"),
            t_len: bscan.t_len(),
            x_len: bscan.x_len(),
            downtrack_spacing_m: bscan.downtrack_spacing_m(),
            lane_area_m2: truth.lane_area_m2,
        });
        // The layout is per (seed, lane); record truth once per lane.
        if scene_cfg.run_id == 0 {
            n_objects += truth.objects.len();
            truth_rows.extend(
                truth
                    .objects
                    .iter()
                    .map(|o| TruthRow::from_object(o, truth.lane_area_m2)),
            );
        }
    }
    write_csv_with_hash(&scene_rows, &hash, &manifest)?;
    // Core truth CSV format plus the appended hash column.
    let mut buffer = Vec::new();
    write_truth_csv(&truth_rows, &mut buffer)?;
    append_hash_column(&buffer, &hash, &out_dir.join("truth.csv"))?;

    println!(
        "generated {} scenes ({} buried objects) under {}",
        scene_rows.len(),
        n_objects,
        out_dir.display()
    );
    Ok(())
}

fn append_hash_column(csv_body: &[u8], hash: &str, path: &Path) -> anyhow::Result<()> {
    let body = std::str::from_utf8(csv_body)?;
    let mut out = String::with_capacity(body.len() + 64);
    for (i, line) in body.lines().enumerate() {
        out.push_str(line);
        out.push(',');
        out.push_str(if i == 0 { "config_hash" } else { hash });
        out.push('\n');
    }
    std::fs::write(path, out).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

fn cmd_prescreen(config: &ExperimentConfig, force: bool) -> anyhow::Result<()> {
    let out_dir = &config.output_dir;
    let alarms_path = out_dir.join("alarms.csv");
    refuse_overwrite(&alarms_path, force)?;

    let manifest = out_dir.join("scenes.csv");
    let mut reader = csv::Reader::from_path(&manifest)
        .with_context(|| format!("reading {} (run `generate` first)", manifest.display()))?;
    #[derive(serde::Deserialize)]
    struct SceneRowIn {
        dataset_seed: u64,
        lane_id: u32,
        path: String,
    }
    let truth_rows = read_truth_csv(std::fs::File::open(out_dir.join("truth.csv"))?)?;

    let bench = &config.bench;
    let mut all_alarms = Vec::new();
    let mut by_seed: std::collections::BTreeMap<u64, Vec<(patchselect_core::bscan::BScan, GroundTruth)>> =
        std::collections::BTreeMap::new();
    for row in reader.deserialize() {
        let row: SceneRowIn = row.context("format: malformed scenes.csv row")?;
        let bscan = load_bscan(&out_dir.join(&row.path))?;
        let objects: Vec<_> = truth_rows
            .iter()
            .filter(|t| t.lane_id == row.lane_id)
            .map(|t| t.to_object())
            .collect();
        let lane_area_m2 = truth_rows
            .iter()
            .find(|t| t.lane_id == row.lane_id)
            .map(|t| t.lane_area_m2)
            .unwrap_or_else(|| {
                bscan.x_len() as f64 * bscan.downtrack_spacing_m()
            });
        let truth = GroundTruth {
            objects,
            lane_area_m2,
        };
        by_seed.entry(row.dataset_seed).or_default().push((bscan, truth));
    }
    if by_seed.is_empty() {
        bail!("format: scenes.csv holds no scenes");
    }
    for (seed, scenes) in by_seed {
        let data = Dataset::from_scenes(scenes, &bench.prescreener, bench.halo_radius_m)?;
        let plan = cluster_and_fold(
            &data.alarms,
            bench.cluster_distance_m,
            bench.n_folds,
            patchselect_core::seeds::derive(bench.fold_seed, &[seed]),
        );
        let mut alarms = data.alarms;
        plan.annotate(&mut alarms);
        println!(
            "seed {seed}: {} alarms = {} targets + {} non-targets over {:.0} m^2",
            alarms.len(),
            alarms.iter().filter(|a| a.is_target()).count(),
            alarms.iter().filter(|a| !a.is_target()).count(),
            data.total_area_m2
        );
        all_alarms.extend(alarms);
    }
    let mut buffer = Vec::new();
    write_alarms_csv(&all_alarms, &mut buffer)?;
    append_hash_column(&buffer, &config.hash(), &alarms_path)?;
    println!("wrote {}", alarms_path.display());
    Ok(())
}

fn cmd_run(
    config: &ExperimentConfig,
    experiment: Experiment,
    force: bool,
    emit_svg: bool,
) -> anyhow::Result<()> {
    let out_dir = &config.output_dir;
    let results_path = out_dir.join("results.csv");
    refuse_overwrite(&results_path, force)?;
    std::fs::create_dir_all(out_dir)?;
    let hash = config.hash();
    let bench = &config.bench;

    let chart: Option<(String, String)> = match experiment {
        Experiment::Fig4 | Experiment::Single => {
            let (strategies, kinds, classifiers, label) = match experiment {
                Experiment::Fig4 => (
                    registry(),
                    FeatureKind::ALL.to_vec(),
                    ClfKind::ALL.to_vec(),
                    "fig4",
                ),
                _ => (
                    config.resolved_strategies()?,
                    config.resolved_features()?,
                    config.resolved_classifiers()?,
                    "single",
                ),
            };
            let run = run_strategy_bench(bench, &strategies, &kinds, &classifiers)?;
            let mut rows = fig4_table(&run, bench.far2)?;
            for row in rows.iter_mut() {
                row.experiment = label.to_string();
            }
            write_csv_with_hash(&rows, &hash, &results_path)?;
            println!("wrote {} rows to {}", rows.len(), results_path.display());

            let groups: Vec<String> = kinds
                .iter()
                .flat_map(|k| classifiers.iter().map(move |c| format!("{}+{}", k, c.name())))
                .collect();
            let series: Vec<String> = strategies.iter().map(|s| s.name.clone()).collect();
            let values: Vec<Vec<f64>> = groups
                .iter()
                .map(|g| {
                    rows.iter()
                        .filter(|r| format!("{}+{}", r.feature, r.classifier) == *g)
                        .map(|r| r.mean_pauc)
                        .collect()
                })
                .collect();
            Some((
                format!("{label}.svg"),
                svg::bar_chart(
                    &format!("normalized pAUC at FAR {} per m^2", bench.far2),
                    &hash,
                    &groups,
                    &series,
                    &values,
                ),
            ))
        }
        Experiment::Fig5 => {
            let run = run_strategy_bench(bench, &registry(), &FeatureKind::ALL, &ClfKind::ALL)?;
            let rows = fig5_table(&run, &bench.far2_list)?;
            write_csv_with_hash(&rows, &hash, &results_path)?;
            println!("wrote {} rows to {}", rows.len(), results_path.display());
            let lines: Vec<(String, Vec<f64>)> = registry()
                .iter()
                .map(|s| {
                    (
                        s.name.clone(),
                        rows.iter()
                            .filter(|r| r.strategy_index == s.index)
                            .map(|r| r.mean_pauc)
                            .collect(),
                    )
                })
                .collect();
            Some((
                "fig5.svg".into(),
                svg::line_chart(
                    "mean pAUC across conditions vs FAR ceiling",
                    &hash,
                    "FAR ceiling (per m^2)",
                    &bench.far2_list,
                    &lines,
                ),
            ))
        }
        Experiment::Fig6 | Experiment::Fig7 | Experiment::Fig8 => {
            let grid = run_policy_grid(bench)?;
            let x: Vec<f64> = bench.l_grid.iter().map(|&l| l as f64).collect();
            match experiment {
                Experiment::Fig6 => {
                    let rows = fig6_table(&grid, bench)?;
                    write_csv_with_hash(&rows, &hash, &results_path)?;
                    println!("wrote {} rows to {}", rows.len(), results_path.display());
                    let lines: Vec<(String, Vec<f64>)> = ["en", "ds"]
                        .iter()
                        .map(|o| {
                            (
                                o.to_string(),
                                rows.iter()
                                    .filter(|r| r.ordering == *o)
                                    .map(|r| r.mean_pauc)
                                    .collect(),
                            )
                        })
                        .collect();
                    Some((
                        "fig6.svg".into(),
                        svg::line_chart(
                            "energy vs decision-statistic ordering",
                            &hash,
                            "L",
                            &x,
                            &lines,
                        ),
                    ))
                }
                Experiment::Fig7 => {
                    let rows = fig7_table(&grid, bench)?;
                    write_csv_with_hash(&rows, &hash, &results_path)?;
                    println!("wrote {} rows to {}", rows.len(), results_path.display());
                    let samplers = ["top_energy", "regular_5", "down_depth_4"];
                    let lines: Vec<(String, Vec<f64>)> = samplers
                        .iter()
                        .map(|sampler| {
                            (
                                sampler.to_string(),
                                rows.iter()
                                    .filter(|r| r.nontarget_sampler == *sampler)
                                    .map(|r| r.mean_pauc)
                                    .collect(),
                            )
                        })
                        .collect();
                    Some((
                        "fig7.svg".into(),
                        svg::line_chart("non-target training comparison", &hash, "L", &x, &lines),
                    ))
                }
                _ => {
                    let rows = fig8_table(&grid, bench)?;
                    write_csv_with_hash(&rows, &hash, &results_path)?;
                    println!("wrote {} rows to {}", rows.len(), results_path.display());
                    let lines: Vec<(String, Vec<f64>)> = [1usize, 2, 3, 4]
                        .iter()
                        .map(|k| {
                            (
                                format!("K={k}"),
                                rows.iter()
                                    .filter(|r| r.target_k == *k)
                                    .map(|r| r.mean_pauc)
                                    .collect(),
                            )
                        })
                        .collect();
                    Some((
                        "fig8.svg".into(),
                        svg::line_chart("target patches per alarm", &hash, "L", &x, &lines),
                    ))
                }
            }
        }
    };

    if emit_svg {
        if let Some((name, body)) = chart {
            let path = out_dir.join(name);
            std::fs::write(&path, body)?;
            println!("wrote {}", path.display());
        }
    }
    Ok(())
}

fn cmd_report(results: &Path, config: &ExperimentConfig, emit_svg: bool) -> anyhow::Result<()> {
    let rows = report::read_rows(results)?;
    let built = report::build_report(&rows)?;
    report::print_report(&built);
    if emit_svg {
        let hash = rows
            .first()
            .map(|r| r.config_hash.clone())
            .unwrap_or_default();
        let groups: Vec<String> = built.conditions.iter().map(|(l, _)| l.clone()).collect();
        let mut series: Vec<String> = Vec::new();
        for (_, ranked) in &built.conditions {
            for (_, index, name, _) in ranked {
                let label = format!("s{index:02} {name}");
                if !series.contains(&label) {
                    series.push(label);
                }
            }
        }
        let values: Vec<Vec<f64>> = built
            .conditions
            .iter()
            .map(|(_, ranked)| {
                series
                    .iter()
                    .map(|label| {
                        ranked
                            .iter()
                            .find(|(_, index, name, _)| format!("s{index:02} {name}") == *label)
                            .map(|(_, _, _, p)| *p)
                            .unwrap_or(0.0)
                    })
                    .collect()
            })
            .collect();
        let path = config.output_dir.join("report.svg");
        std::fs::create_dir_all(&config.output_dir)?;
        std::fs::write(
            &path,
            svg::bar_chart("strategy mean pAUC by condition", &hash, &groups, &series, &values),
        )?;
        println!("wrote {}", path.display());
    }
    Ok(())
}
