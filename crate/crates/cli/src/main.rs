use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use floodpulse::netdyn::{aggregates_to_csv, clusters_to_csv, edges_to_csv};
use floodpulse::pipeline::{
    self, export, flood_extent_geojson, pretty, ExportFormat, PipelineError, RunConfig, ScenarioSpec, ALL_FORMATS,
};
use floodpulse::presence::{daily_to_csv, weekly_to_csv};

#[derive(Parser)]
#[command(
    name = "floodpulse",
    version,
    about = "Flood detection from social, rainfall and presence data"
)]
struct Cli {
    #[command(subcommand)]
    verb: Verb,
}

#[derive(Args)]
struct Common {
    /// Run configuration (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Override the configured seed.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Preset {
    Torrential,
    Overflow,
    Quiet,
}

#[derive(Subcommand)]
enum Verb {
    /// Check every input file and print per-file row accounting.
    Validate {
        #[arg(long)]
        config: PathBuf,
    },
    /// Full run, writing every export format.
    Run(Common),
    /// Write a synthetic scenario (datasets plus config.toml).
    Generate {
        /// Scenario description (TOML); defaults apply to missing keys.
        #[arg(long, conflicts_with = "preset")]
        config: Option<PathBuf>,
        #[arg(long, value_enum)]
        preset: Option<Preset>,
        #[arg(long, default_value = "scenario")]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Flood extent and elevation statistics from the hydrography layers.
    Segment(Common),
    /// Daily and weekly presence series plus the daily z-map.
    Presence(Common),
    /// Daily social proxy series.
    Proxies(Common),
    /// Mention/retweet network and cluster profiles.
    Network(Common),
    /// Full run, writing only the chosen formats.
    Export {
        #[command(flatten)]
        common: Common,
        /// Comma-separated: json,text,csv,geojson,jsonl.
        #[arg(long, value_delimiter = ',', default_value = "json,text,csv,geojson,jsonl")]
        formats: Vec<ExportFormat>,
    },
}

fn load(c: &Common) -> Result<RunConfig, PipelineError> {
    let mut cfg = RunConfig::load(&c.config)?;
    if let Some(seed) = c.seed {
        cfg.seed = seed;
    }
    Ok(cfg)
}

fn write(dir: &Path, name: &str, body: &str) -> Result<(), PipelineError> {
    let io = |path: &Path, e: std::io::Error| PipelineError::Io {
        path: path.to_path_buf(),
        message: e.to_string(),
    };
    fs::create_dir_all(dir).map_err(|e| io(dir, e))?;
    let path = dir.join(name);
    fs::write(&path, body).map_err(|e| io(&path, e))?;
    println!("wrote {}", path.display());
    Ok(())
}

fn json<T: serde::Serialize>(v: &T) -> String {
    pretty(&serde_json::to_value(v).expect("serializable"))
}

fn full_run(c: &Common, formats: &[ExportFormat]) -> Result<(), PipelineError> {
    let cfg = load(c)?;
    let out = pipeline::run(&cfg)?;
    print!("{}", out.report.summary());
    for p in export(&out, &c.out, formats)? {
        println!("wrote {}", p.display());
    }
    Ok(())
}

fn dispatch(verb: Verb) -> Result<(), PipelineError> {
    match verb {
        Verb::Validate { config } => {
            let cfg = RunConfig::load(&config)?;
            let report = pipeline::validate_inputs(&cfg)?;
            for f in &report.files {
                println!(
                    "{:<12} {:<32} rows {:>7}  accepted {:>7}  rejected {:>5}",
                    f.input,
                    f.path,
                    f.rows,
                    f.accepted,
                    f.rejected.len()
                );
                for r in f.rejected.iter().take(5) {
                    println!("    line {}: {}", r.line, r.reason);
                }
            }
            Ok(())
        }
        Verb::Run(c) => full_run(&c, &ALL_FORMATS),
        Verb::Export { common, formats } => full_run(&common, &formats),
        Verb::Generate {
            config,
            preset,
            out,
            seed,
        } => {
            let mut spec = match (config, preset) {
                (Some(path), _) => {
                    let text = fs::read_to_string(&path).map_err(|_| PipelineError::MissingInput {
                        input: "scenario".into(),
                        path: path.clone(),
                    })?;
                    ScenarioSpec::from_toml_str(&text)?
                }
                (None, Some(Preset::Torrential)) => ScenarioSpec::golden_torrential(),
                (None, Some(Preset::Overflow)) => ScenarioSpec::golden_overflow(),
                (None, Some(Preset::Quiet)) => ScenarioSpec::golden_quiet(),
                (None, None) => ScenarioSpec::default(),
            };
            if let Some(s) = seed {
                spec.seed = s;
            }
            let g = pipeline::generate_scenario(&spec, &out)?;
            for f in &g.files {
                println!("wrote {}", f.display());
            }
            Ok(())
        }
        Verb::Segment(c) => {
            let cfg = load(&c)?;
            let (data, _) = pipeline::load_inputs(&cfg)?;
            let mut notes = Vec::new();
            let seg = pipeline::stage_segment(&cfg, &data, &mut notes)?
                .ok_or_else(|| PipelineError::Config("no hydrography layers configured".into()))?;
            for n in &notes {
                eprintln!("note: {n}");
            }
            write(&c.out, "segmentation.json", &json(&seg.report))?;
            write(
                &c.out,
                "flood_extent.geojson",
                &pretty(&flood_extent_geojson(Some(&seg.extent))),
            )
        }
        Verb::Presence(c) => {
            let cfg = load(&c)?;
            let (data, _) = pipeline::load_inputs(&cfg)?;
            let p = pipeline::stage_presence(&cfg, &data, &[])?;
            write(&c.out, "presence_daily.csv", &daily_to_csv(&p.daily, &p.locations))?;
            write(&c.out, "presence_weekly.csv", &weekly_to_csv(&p.weekly))?;
            write(&c.out, "zmap_daily.geojson", &pretty(&p.daily_zmap.to_geojson()))
        }
        Verb::Proxies(c) => {
            let cfg = load(&c)?;
            let (data, _) = pipeline::load_inputs(&cfg)?;
            let p = pipeline::stage_proxies(&cfg, &data)?;
            for s in [&p.total, &p.awareness, &p.damage, &p.normalized] {
                write(&c.out, &format!("series_{}.csv", s.name), &s.to_csv())?;
            }
            Ok(())
        }
        Verb::Network(c) => {
            let cfg = load(&c)?;
            let (data, _) = pipeline::load_inputs(&cfg)?;
            let proxies = pipeline::stage_proxies(&cfg, &data)?;
            let n = pipeline::stage_network(&cfg, &proxies)?
                .ok_or_else(|| PipelineError::Config("network analysis is disabled".into()))?;
            write(&c.out, "network_edges.csv", &edges_to_csv(&n.network.edges))?;
            write(
                &c.out,
                "network_clusters.csv",
                &clusters_to_csv(&n.network.nodes, &n.profiles),
            )?;
            write(&c.out, "network_aggregates.csv", &aggregates_to_csv(&n.profiles))?;
            write(&c.out, "network_profiles.json", &json(&n.profiles))
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.verb) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_validation() { 1 } else { 2 })
        }
    }
}
