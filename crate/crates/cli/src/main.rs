//! `raychannel`: one subcommand per toolchain stage.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use raychannel::channel::{augment, band_limit, to_sparse_cir, AugmentSpec, DEFAULT_SKEW, DEFAULT_SNR_DB, UWB_BANDWIDTH_HZ};
use raychannel::datagen::{generate_dataset, read_dataset_rows, split_spatial, write_dataset, Split, DEFAULT_BLOCK_M, DEFAULT_TEST_FRACTION};
use raychannel::forest::{evaluate, recursive_feature_elimination, train_forest, ForestModel, Hyperparams, Samples};
use raychannel::map::{build_maps, render_map};
use raychannel::scene::{load_scene, make_cabin_scene, scene_to_json, Scene};
use raychannel::tracer::{trace_all, trace_link, LinkResult};
use raychannel::{Error, Parallelism, Vec3};

#[derive(Parser)]
#[command(name = "raychannel", version, about = "Deterministic ray-traced CIR data generation and LOS/NLOS classification")]
struct Cli {
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a parametric cabin scene, or validate and normalize a scene file.
    Scene(SceneArgs),
    /// Trace every receiver of a scene and write the path table as CSV.
    Trace(TraceArgs),
    /// Write one band-limited CIR as CSV (t_ns, re, im, abs).
    Cir(CirArgs),
    /// Build a labeled, spatially split feature dataset.
    Dataset(DatasetArgs),
    /// Train a random forest on the train split of a dataset.
    Train(TrainArgs),
    /// Evaluate a model on the test split of a dataset.
    Evaluate(EvaluateArgs),
    /// Render ground-truth and estimated LOS/NLOS maps as PGM.
    Map(MapArgs),
}

#[derive(Args)]
struct SceneArgs {
    /// Cabin dimensions as LENGTHxWIDTHxHEIGHT in meters.
    #[arg(long, value_parser = parse_dims, conflicts_with = "scene")]
    cabin: Option<[f64; 3]>,
    /// Number of seat rows in the cabin.
    #[arg(long, default_value_t = 10)]
    rows: u32,
    /// Existing scene file to validate.
    #[arg(long)]
    scene: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output path (stdout when omitted).
    #[arg(short = 'o', long = "output")]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct TraceArgs {
    #[arg(long)]
    scene: PathBuf,
    /// Trace only this receiver position (X,Y,Z) instead of the plan.
    #[arg(long, value_parser = parse_vec3)]
    rx: Option<Vec3>,
    #[arg(short = 'o', long = "output")]
    output: Option<PathBuf>,
}

#[derive(Args, Clone)]
struct AugmentArgs {
    #[arg(long, default_value_t = 1)]
    replicas: u32,
    /// Comma-separated reconstruction bandwidths in Hz.
    #[arg(long, value_delimiter = ',', default_values_t = [UWB_BANDWIDTH_HZ])]
    bandwidths: Vec<f64>,
    /// Additive noise SNR in dB; "inf" disables the noise floor.
    #[arg(long = "snr-db", default_value_t = DEFAULT_SNR_DB, allow_negative_numbers = true)]
    snr_db: f64,
    /// Log-normal magnitude jitter shape; 0 disables it.
    #[arg(long, default_value_t = DEFAULT_SKEW)]
    skew: f64,
}

impl AugmentArgs {
    fn spec(&self, seed: u64) -> AugmentSpec {
        AugmentSpec {
            bandwidth_set_hz: self.bandwidths.clone(),
            noise_snr_db: self.snr_db.is_finite().then_some(self.snr_db),
            skew: self.skew,
            replicas_per_link: self.replicas,
            rng_seed: seed,
        }
    }
}

#[derive(Args)]
struct CirArgs {
    #[arg(long)]
    scene: PathBuf,
    /// Receiver position X,Y,Z.
    #[arg(long, value_parser = parse_vec3, conflicts_with = "link")]
    rx: Option<Vec3>,
    /// Index of a receiver in the scene plan.
    #[arg(long)]
    link: Option<usize>,
    /// Reconstruction bandwidth in Hz (scene bandwidth when omitted).
    #[arg(long)]
    bandwidth: Option<f64>,
    /// Add augmentation noise at this SNR in dB.
    #[arg(long = "snr-db", allow_negative_numbers = true)]
    snr_db: Option<f64>,
    #[arg(long, default_value_t = 0.0)]
    skew: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(short = 'o', long = "output")]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct DatasetArgs {
    #[arg(long)]
    scene: PathBuf,
    #[command(flatten)]
    augment: AugmentArgs,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long = "test-frac", default_value_t = DEFAULT_TEST_FRACTION)]
    test_frac: f64,
    #[arg(long = "block-m", default_value_t = DEFAULT_BLOCK_M)]
    block_m: f64,
    /// Dataset CSV path; the meta sidecar goes next to it.
    #[arg(short = 'o', long = "output")]
    output: PathBuf,
}

#[derive(Args)]
struct TrainArgs {
    /// Dataset CSV.
    #[arg(long)]
    data: PathBuf,
    #[arg(long, default_value_t = 100)]
    trees: usize,
    #[arg(long = "max-depth", default_value_t = 12)]
    max_depth: usize,
    #[arg(long = "min-leaf", default_value_t = 5)]
    min_leaf: usize,
    /// Run recursive feature elimination down to this many features first.
    #[arg(long = "select-k")]
    select_k: Option<usize>,
    /// Where to write the RFE step report (JSON).
    #[arg(long = "rfe-report", requires = "select_k")]
    rfe_report: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Model JSON path.
    #[arg(short = 'o', long = "output")]
    output: PathBuf,
}

#[derive(Args)]
struct EvaluateArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    model: PathBuf,
    /// Report JSON path (stdout when omitted).
    #[arg(short = 'o', long = "output")]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct MapArgs {
    #[arg(long)]
    scene: PathBuf,
    #[arg(long)]
    model: PathBuf,
    #[command(flatten)]
    augment: AugmentArgs,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Estimated map (PGM).
    #[arg(short = 'o', long = "output")]
    output: PathBuf,
    /// Ground-truth map (PGM).
    #[arg(long)]
    truth: PathBuf,
}

fn parse_dims(s: &str) -> Result<[f64; 3], String> {
    let parts: Vec<&str> = s.split(['x', 'X']).collect();
    match parts.as_slice() {
        [l, w, h] => {
            let p = |v: &str| v.trim().parse::<f64>().map_err(|e| format!("{v}: {e}"));
            Ok([p(l)?, p(w)?, p(h)?])
        }
        _ => Err("expected LENGTHxWIDTHxHEIGHT".into()),
    }
}

fn parse_vec3(s: &str) -> Result<Vec3, String> {
    let v: Vec<f64> = s
        .split(',')
        .map(|p| p.trim().parse::<f64>().map_err(|e| format!("{p}: {e}")))
        .collect::<Result<_, _>>()?;
    match v.as_slice() {
        [x, y, z] => Ok(Vec3::new(*x, *y, *z)),
        _ => Err("expected X,Y,Z".into()),
    }
}

type CmdResult = Result<(), Error>;

fn output(path: Option<&Path>) -> Result<Box<dyn Write>, Error> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p).map_err(|e| io_err(p, e))?)),
        None => Box::new(BufWriter::new(std::io::stdout().lock())),
    })
}

fn io_err(path: &Path, source: std::io::Error) -> Error {
    Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn finish(mut w: Box<dyn Write>, path: Option<&Path>) -> CmdResult {
    w.flush().map_err(|e| io_err(path.unwrap_or(Path::new("<stdout>")), e))
}

fn write_text(path: Option<&Path>, text: &str) -> CmdResult {
    let mut w = output(path)?;
    w.write_all(text.as_bytes())
        .map_err(|e| io_err(path.unwrap_or(Path::new("<stdout>")), e))?;
    finish(w, path)
}

fn cmd_scene(a: SceneArgs) -> CmdResult {
    let scene = match (a.cabin, &a.scene) {
        (Some([l, w, h]), _) => make_cabin_scene(l, w, h, a.rows, a.seed)?,
        (None, Some(p)) => load_scene(p)?,
        (None, None) => make_cabin_scene(30.0, 4.0, 2.2, a.rows, a.seed)?,
    };
    write_text(a.output.as_deref(), &scene_to_json(&scene))?;
    eprintln!(
        "scene: {} facets, {} receivers, hash {:016x}",
        scene.facets().len(),
        scene.receiver_points().len(),
        scene.hash()
    );
    Ok(())
}

fn write_path_table(links: &[LinkResult], w: &mut dyn Write) -> std::io::Result<()> {
    writeln!(w, "rx_x,rx_y,rx_z,path_index,n_reflections,length_m,delay_ns,gain_re,gain_im,los_state")?;
    for l in links {
        let p = l.rx_position;
        if l.paths.is_empty() {
            writeln!(w, "{},{},{},,,,,,,{}", p.x, p.y, p.z, l.los_state.as_str())?;
        }
        for (i, path) in l.paths.iter().enumerate() {
            writeln!(
                w,
                "{},{},{},{},{},{},{},{},{},{}",
                p.x,
                p.y,
                p.z,
                i,
                path.n_reflections(),
                path.length_m,
                path.delay_s * 1e9,
                path.gain.re,
                path.gain.im,
                l.los_state.as_str()
            )?;
        }
    }
    Ok(())
}

fn cmd_trace(a: TraceArgs, par: Parallelism) -> CmdResult {
    let scene = load_scene(&a.scene)?;
    let links = match a.rx {
        Some(rx) => vec![trace_link(&scene, rx)?],
        None => trace_all(&scene, par)?,
    };
    let path = a.output.as_deref();
    let mut w = output(path)?;
    write_path_table(&links, &mut w).map_err(|e| io_err(path.unwrap_or(Path::new("<stdout>")), e))?;
    finish(w, path)?;
    let count = |s| links.iter().filter(|l| l.los_state == s).count();
    use raychannel::tracer::LosState::*;
    eprintln!("trace: {} links ({} LOS, {} NLOS, {} DEAD)", links.len(), count(Los), count(Nlos), count(Dead));
    Ok(())
}

fn pick_rx(scene: &Scene, rx: Option<Vec3>, link: Option<usize>) -> Result<(Vec3, u32), Error> {
    match (rx, link) {
        (Some(p), _) => Ok((p, 0)),
        (None, Some(i)) => scene
            .receiver_points()
            .get(i)
            .map(|&p| (p, i as u32))
            .ok_or_else(|| Error::InvalidArgument(format!("scene has no receiver {i}"))),
        (None, None) => Err(Error::InvalidArgument("give --rx or --link".into())),
    }
}

fn cmd_cir(a: CirArgs) -> CmdResult {
    let scene = load_scene(&a.scene)?;
    let (rx, link_index) = pick_rx(&scene, a.rx, a.link)?;
    let link = trace_link(&scene, rx)?;
    let cir = to_sparse_cir(&link)?;
    let bandwidth = a.bandwidth.unwrap_or(scene.radio().bandwidth_hz);
    let sampled = if a.snr_db.is_none() && a.skew == 0.0 {
        band_limit(&cir, &scene.radio().with_bandwidth(bandwidth))?
    } else {
        let spec = AugmentSpec {
            bandwidth_set_hz: vec![bandwidth],
            noise_snr_db: a.snr_db,
            skew: a.skew,
            replicas_per_link: 1,
            rng_seed: a.seed,
        };
        augment(&cir, &spec, scene.radio(), link_index)?.remove(0)
    };
    let path = a.output.as_deref();
    let mut w = output(path)?;
    let io = |e| io_err(path.unwrap_or(Path::new("<stdout>")), e);
    writeln!(w, "t_ns,re,im,abs").map_err(io)?;
    for (k, s) in sampled.samples.iter().enumerate() {
        writeln!(w, "{},{},{},{}", sampled.time_of(k) * 1e9, s.re, s.im, s.norm()).map_err(io)?;
    }
    finish(w, path)?;
    eprintln!("cir: {} taps, {} samples, link {}", cir.n_taps(), sampled.len(), link.los_state.as_str());
    Ok(())
}

fn cmd_dataset(a: DatasetArgs, par: Parallelism) -> CmdResult {
    let scene = load_scene(&a.scene)?;
    let spec = a.augment.spec(a.seed);
    let raw = generate_dataset(&scene, &spec, par)?;
    let ds = split_spatial(&raw, a.test_frac, a.block_m, a.seed)?;
    write_dataset(&ds, &a.output)?;
    let [los, nlos] = ds.class_counts(None);
    eprintln!(
        "dataset: {} rows ({los} LOS, {nlos} NLOS) from {} links, {} dead; train {} / test {}",
        ds.rows.len(),
        ds.meta.n_links,
        ds.meta.dead_links,
        ds.rows.iter().filter(|r| r.split == Split::Train).count(),
        ds.rows.iter().filter(|r| r.split == Split::Test).count(),
    );
    for w in &ds.meta.warnings {
        eprintln!("warning: {w}");
    }
    Ok(())
}

fn cmd_train(a: TrainArgs, par: Parallelism) -> CmdResult {
    let rows = read_dataset_rows(&a.data)?;
    let train = Samples::from_rows(rows.iter().filter(|r| r.split == Split::Train))?;
    let hp = Hyperparams {
        n_trees: a.trees,
        max_depth: a.max_depth,
        min_leaf_samples: a.min_leaf,
        ..Hyperparams::default()
    };
    let mask = match a.select_k {
        Some(k) => {
            let rfe = recursive_feature_elimination(&train, &hp, k, a.seed, par)?;
            for (i, s) in rfe.steps.iter().enumerate() {
                eprintln!(
                    "rfe step {i}: {} features, validation accuracy {:.4}",
                    s.active.iter().filter(|x| **x).count(),
                    s.validation_accuracy
                );
            }
            if let Some(p) = &a.rfe_report {
                write_text(Some(p), &(serde_json::to_string_pretty(&rfe)? + "\n"))?;
            }
            Some(rfe.mask)
        }
        None => None,
    };
    let model = train_forest(&train, mask.as_deref(), &hp, a.seed, par)?;
    model.save(&a.output)?;
    eprintln!("train: {} trees on {} rows", model.n_trees, train.len());
    for (name, imp) in model.feature_names.iter().zip(&model.importances) {
        eprintln!("  {name:<22} {imp:.4}");
    }
    Ok(())
}

fn cmd_evaluate(a: EvaluateArgs) -> CmdResult {
    let rows = read_dataset_rows(&a.data)?;
    let test = Samples::from_rows(rows.iter().filter(|r| r.split == Split::Test))?;
    let model = ForestModel::load(&a.model)?;
    let report = evaluate(&model, &test)?;
    write_text(a.output.as_deref(), &(serde_json::to_string_pretty(&report)? + "\n"))?;
    eprintln!("evaluate: accuracy {:.4} on {} test rows", report.accuracy, report.n_test);
    Ok(())
}

fn cmd_map(a: MapArgs, par: Parallelism) -> CmdResult {
    let scene = load_scene(&a.scene)?;
    let model = ForestModel::load(&a.model)?;
    let (truth, estimate) = build_maps(&scene, &model, &a.augment.spec(a.seed), par)?;
    let ratio = render_map(&truth, &estimate, &a.truth, &a.output)?;
    println!("agreement {ratio:.6}");
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(2) } else { ExitCode::SUCCESS };
        }
    };
    let par = match Parallelism::from_env() {
        Ok(p) => p,
        Err(msg) => {
            eprintln!("error: {msg}");
            return ExitCode::from(2);
        }
    };
    let result = match cli.cmd {
        Command::Scene(a) => cmd_scene(a),
        Command::Trace(a) => cmd_trace(a, par),
        Command::Cir(a) => cmd_cir(a),
        Command::Dataset(a) => cmd_dataset(a, par),
        Command::Train(a) => cmd_train(a, par),
        Command::Evaluate(a) => cmd_evaluate(a),
        Command::Map(a) => cmd_map(a, par),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
