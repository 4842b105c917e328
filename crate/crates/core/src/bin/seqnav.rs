use std::collections::BTreeMap;
use std::path::{Path as FsPath, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};

use seqnav::harness::{generate_suite, run, run_ablation, write_ablation, write_run, Preset, RunConfig};
use seqnav::mapping::{encode_map, MapEncoderWeights, TourMap};
use seqnav::metrics::{aggregate, episode_metrics, tndtw, EpisodeResult, Format, Table};
use seqnav::tensor::TensorManifest;
use seqnav::tours::{stitch_trajectories, write_tours, EpisodeRecord, LlmClient, StitchConfig};
use seqnav::world::{generate_scene, observe, read_scene, write_scene};
use seqnav::{Error, Result};

#[derive(Parser)]
#[command(name = "seqnav", version, about = "Sequential-horizon VLN engine: simulate, stitch, score and sweep")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// JSON run config; defaults are used for missing fields.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides the config seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, default_value = "json", value_parser = parse_format)]
    format: Format,
}

#[derive(Subcommand)]
enum Command {
    /// Run the configured tours and write episode logs and a report.
    Simulate(Common),
    /// Stitch single episodes into tours.
    Stitch {
        #[command(flatten)]
        common: Common,
        /// Episode records as JSON lines; generated from the config when absent.
        #[arg(long)]
        records: Option<PathBuf>,
        #[arg(long, default_value_t = seqnav::tours::DEFAULT_STITCH_TOL)]
        tol: f64,
        #[arg(long, default_value_t = seqnav::tours::DEFAULT_MAX_CHAIN)]
        max_chain: usize,
        /// Join instructions with the LLM named by SEQNAV_LLM_URL.
        #[arg(long)]
        llm: bool,
    },
    /// Score stored episode results (JSON lines).
    Metrics {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        paths: PathBuf,
    },
    /// Run an ablation preset.
    Ablate {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value = "table6", value_parser = parse_preset)]
        preset: Preset,
    },
    /// Load or seed map-encoder weights and run one crop through them.
    EncodeCheck {
        #[command(flatten)]
        common: Common,
        /// Tensor manifest; overrides `map_weights` in the config.
        #[arg(long)]
        weights: Option<PathBuf>,
    },
    /// Generate a synthetic scene.
    GenScene(Common),
}

fn parse_format(s: &str) -> std::result::Result<Format, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_preset(s: &str) -> std::result::Result<Preset, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

impl Common {
    fn config(&self) -> Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(p) => RunConfig::load(p)?,
            None => RunConfig::default(),
        };
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn out_dir(&self) -> Result<Option<&FsPath>> {
        if let Some(d) = &self.out {
            std::fs::create_dir_all(d).map_err(|e| Error::Io { path: d.clone(), source: e })?;
        }
        Ok(self.out.as_deref())
    }
}

fn write_file(dir: &FsPath, name: &str, text: &str) -> Result<()> {
    let p = dir.join(name);
    std::fs::write(&p, text).map_err(|e| Error::Io { path: p, source: e })
}

fn read_file(p: &FsPath) -> Result<String> {
    std::fs::read_to_string(p).map_err(|e| Error::Io { path: p.to_path_buf(), source: e })
}

/// Prints a small key/value summary in the requested format.
fn summary(format: Format, fields: &[(&str, Value)]) -> String {
    match format {
        Format::Json => {
            let map: serde_json::Map<String, Value> = fields.iter().map(|(k, v)| (k.to_string(), v.clone())).collect();
            serde_json::to_string_pretty(&map).unwrap_or_default()
        }
        Format::Csv => {
            let keys: Vec<&str> = fields.iter().map(|(k, _)| *k).collect();
            let vals: Vec<String> = fields.iter().map(|(_, v)| plain(v)).collect();
            format!("{}\n{}", keys.join(","), vals.join(","))
        }
        Format::Md => {
            let mut s = String::from("| field | value |\n|---|---|\n");
            for (k, v) in fields {
                s += &format!("| {k} | {} |\n", plain(v));
            }
            s.trim_end().to_string()
        }
    }
}

fn plain(v: &Value) -> String {
    match v {
        Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

fn simulate(c: &Common) -> Result<()> {
    let cfg = c.config()?;
    let report = run(&cfg)?;
    if let Some(dir) = c.out_dir()? {
        write_run(dir, &cfg, &report, c.format)?;
    }
    let mut table = Table::metrics("simulate", "run");
    table.push(format!("seed {}", cfg.seed), &report.aggregate);
    print!("{}", table.render(c.format)?);
    Ok(())
}

fn load_records(path: &FsPath) -> Result<Vec<EpisodeRecord>> {
    let text = read_file(path)?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            let rec: EpisodeRecord = serde_json::from_str(l).map_err(|e| Error::Parse {
                file: path.display().to_string(),
                line: i + 1,
                message: e.to_string(),
            })?;
            rec.validate()?;
            Ok(rec)
        })
        .collect()
}

/// Every generated episode as a stand-alone record; consecutive episodes
/// of a tour share endpoints, so stitching recovers the tours.
fn generated_records(cfg: &RunConfig) -> Result<Vec<EpisodeRecord>> {
    let mut out = Vec::new();
    for tour in generate_suite(cfg, cfg.seed)? {
        for ep in &tour.episodes {
            out.push(EpisodeRecord::from_episode(ep.id.clone(), &ep.reference, ep.instruction.clone())?);
        }
    }
    Ok(out)
}

fn stitch(c: &Common, records: Option<&FsPath>, tol: f64, max_chain: usize, llm: bool) -> Result<()> {
    let cfg = c.config()?;
    let records = match records {
        Some(p) => load_records(p)?,
        None => generated_records(&cfg)?,
    };
    let client = if llm { Some(LlmClient::from_env("default", Duration::from_secs(30), 2)?) } else { None };
    let tours = stitch_trajectories(&records, &StitchConfig { tol, max_chain }, client.as_ref())?;
    for t in &tours {
        t.validate(tol)?;
    }
    if let Some(dir) = c.out_dir()? {
        write_tours(dir.join("tours.jsonl"), &tours)?;
    }
    let multi = tours.iter().filter(|t| t.episodes.len() > 1).count();
    let subtasks: usize = tours.iter().map(|t| t.subtask_count).sum();
    println!(
        "{}",
        summary(
            c.format,
            &[
                ("records", json!(records.len())),
                ("tours", json!(tours.len())),
                ("multi_episode_tours", json!(multi)),
                ("subtasks", json!(subtasks)),
            ]
        )
    );
    Ok(())
}

/// Accepts bare episode results or `simulate` episode lines (which carry
/// the result under `result` and their tour under `tour`).
fn load_results(path: &FsPath) -> Result<Vec<(String, EpisodeResult)>> {
    let text = read_file(path)?;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
        let parse_err = |e: serde_json::Error| Error::Parse { file: path.display().to_string(), line: i + 1, message: e.to_string() };
        let mut v: Value = serde_json::from_str(line).map_err(parse_err)?;
        let tour = v.get("tour").and_then(Value::as_str).unwrap_or("").to_string();
        let tour = match v.get("repeat") {
            Some(r) => format!("{tour}#{r}"),
            None => tour,
        };
        let body = match v.get_mut("result") {
            Some(r) => r.take(),
            None => v,
        };
        let res: EpisodeResult = serde_json::from_value(body).map_err(parse_err)?;
        res.validate()?;
        out.push((tour, res));
    }
    if out.is_empty() {
        return Err(Error::Degenerate(format!("{} holds no episodes", path.display())));
    }
    Ok(out)
}

fn metrics(c: &Common, paths: &FsPath) -> Result<()> {
    let cfg = c.config()?;
    let results = load_results(paths)?;
    let episodes = results.iter().map(|(_, r)| episode_metrics(r, &cfg.metrics)).collect::<Result<Vec<_>>>()?;
    let mut tours: BTreeMap<&str, Vec<EpisodeResult>> = BTreeMap::new();
    for (t, r) in &results {
        tours.entry(t.as_str()).or_default().push(r.clone());
    }
    let tour_scores = tours.values().map(|eps| tndtw(eps, cfg.metrics.d_th)).collect::<Result<Vec<_>>>()?;
    let mut table = Table::metrics("metrics", "input");
    table.push(paths.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default(), &aggregate(&episodes, &tour_scores));
    let text = table.render(c.format)?;
    if let Some(dir) = c.out_dir()? {
        write_file(dir, &format!("metrics.{}", c.format.extension()), &text)?;
    }
    print!("{text}");
    Ok(())
}

fn ablate(c: &Common, preset: Preset) -> Result<()> {
    let cfg = c.config()?;
    let report = run_ablation(preset, &cfg)?;
    if let Some(dir) = c.out_dir()? {
        write_ablation(dir, &cfg, &report, c.format)?;
    }
    print!("{}", report.table.render(c.format)?);
    Ok(())
}

fn encode_check(c: &Common, weights: Option<&FsPath>) -> Result<()> {
    let cfg = c.config()?;
    let (w, source) = match weights.or(cfg.map_weights.as_deref()) {
        Some(p) => (MapEncoderWeights::from_manifest(TensorManifest::load(p)?)?, p.display().to_string()),
        None => (MapEncoderWeights::seeded(cfg.seed), format!("seeded({})", cfg.seed)),
    };
    let scene = generate_scene(cfg.seed, &cfg.suite.scene)?;
    let pose = {
        let lm = &scene.landmarks()[0];
        seqnav::Pose::new(lm.position.x, lm.position.y, 0.0)
    };
    let mut map = TourMap::new(scene.resolution());
    map.integrate_observation(&observe(&scene, pose));
    let crop = map.crop_ego(pose);
    let z = encode_map(&crop, &w)?;
    let zero = encode_map(&crop, &MapEncoderWeights::zeros())?;
    let finite = z.is_finite();
    let annihilated = zero.data().iter().all(|&v| v == 0.0);
    let l2 = z.data().iter().map(|v| v * v).sum::<f64>().sqrt();
    println!(
        "{}",
        summary(
            c.format,
            &[
                ("weights", json!(source)),
                ("shape", json!(format!("{:?}", z.shape()))),
                ("finite", json!(finite)),
                ("zero_weights_output_zero", json!(annihilated)),
                ("l2_norm", json!(l2)),
            ]
        )
    );
    if let Some(dir) = c.out_dir()? {
        w.to_manifest().save(dir.join("map_weights.json"))?;
    }
    if !finite || !annihilated || z.shape() != [128, 4, 4] {
        return Err(Error::Degenerate("map encoder check failed".into()));
    }
    Ok(())
}

fn gen_scene(c: &Common) -> Result<()> {
    let cfg = c.config()?;
    let scene = match &cfg.scene_file {
        Some(p) => read_scene(p)?,
        None => generate_scene(cfg.seed, &cfg.suite.scene)?,
    };
    if let Some(dir) = c.out_dir()? {
        write_scene(dir.join(format!("{}.json", scene.id())), &scene)?;
    }
    let labels: Vec<&str> = scene.landmarks().iter().map(|l| l.label.as_str()).collect();
    println!(
        "{}",
        summary(
            c.format,
            &[
                ("id", json!(scene.id())),
                ("width", json!(scene.width())),
                ("height", json!(scene.height())),
                ("rooms", json!(scene.rooms().len())),
                ("free_cells", json!(scene.free_cells().count())),
                ("landmarks", json!(labels.join(" "))),
            ]
        )
    );
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let res = match &cli.command {
        Command::Simulate(c) => simulate(c),
        Command::Stitch { common, records, tol, max_chain, llm } => {
            stitch(common, records.as_deref(), *tol, *max_chain, *llm)
        }
        Command::Metrics { common, paths } => metrics(common, paths),
        Command::Ablate { common, preset } => ablate(common, *preset),
        Command::EncodeCheck { common, weights } => encode_check(common, weights.as_deref()),
        Command::GenScene(c) => gen_scene(c),
    };
    match res {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
