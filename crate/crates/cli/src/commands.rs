use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::Serialize;
use tweezer_readout::calibrate::{calibrate, CalibrationConfig};
use tweezer_readout::kernel::write_projector_blob;
use tweezer_readout::perf::{predict_latency, run_bench, BenchConfig, LatencyModel};
use tweezer_readout::reconstruct::{reconstruct, threshold_channel, Mode, ReconstructionConfig};
use tweezer_readout::sim::{sample_frame, SceneSpec};
use tweezer_readout::{CalibrationArtifact, Image};

use crate::args::{
    BenchArgs, CalibrateArgs, EmissionFormat, PredictArgs, ReconstructArgs, SimulateArgs,
};
use crate::error::{io_err, CliError, CliResult};
use crate::manifest::Run;

fn read_json<T: DeserializeOwned>(path: &Path) -> CliResult<T> {
    let text = std::fs::read_to_string(path).map_err(io_err(path))?;
    serde_json::from_str(&text).map_err(|source| CliError::Parse {
        path: path.to_path_buf(),
        source,
    })
}

fn to_value<T: Serialize>(v: &T) -> serde_json::Value {
    serde_json::to_value(v).expect("config serializes")
}

fn pretty<T: Serialize>(v: &T) -> String {
    serde_json::to_string_pretty(v).expect("value serializes")
}

pub fn simulate(args: &SimulateArgs) -> CliResult<()> {
    let mut spec = match &args.scene {
        Some(p) => read_json::<SceneSpec>(p)?,
        None => SceneSpec::default_10x10(),
    };
    if let Some(seed) = args.seed {
        spec.seed = seed;
    }
    spec.validate()?;
    let mut run = Run::start("simulate", &args.out)?;
    for i in 0..args.count {
        let (img, truth) = sample_frame(&spec, i)?;
        let (pgm, clipped) = img.to_pgm();
        if clipped > 0 {
            log::warn!("frame {i}: {clipped} pixels clipped at the camera maximum");
        }
        run.write(&format!("frame_{i:04}.pgm"), pgm)?;
        run.write(&format!("truth_{i:04}.json"), pretty(&truth))?;
    }
    log::info!("wrote {} frames to {}", args.count, args.out.display());
    let config = serde_json::json!({ "scene": spec, "count": args.count });
    run.finish(
        config,
        args.scene.iter().cloned().collect(),
        Some(spec.seed),
    )
}

fn frame_paths(pattern: &str) -> CliResult<Vec<PathBuf>> {
    let pattern = if Path::new(pattern).is_dir() {
        format!("{}/*.pgm", pattern.trim_end_matches('/'))
    } else {
        pattern.to_string()
    };
    let mut paths: Vec<PathBuf> = glob::glob(&pattern)
        .map_err(|e| CliError::Usage(format!("bad frames pattern '{pattern}': {e}")))?
        .filter_map(|p| p.ok())
        .filter(|p| p.is_file())
        .collect();
    paths.sort();
    if paths.is_empty() {
        return Err(CliError::Usage(format!("no frames match '{pattern}'")));
    }
    Ok(paths)
}

fn read_frame(path: &Path) -> CliResult<Image> {
    let bytes = std::fs::read(path).map_err(io_err(path))?;
    Image::from_pgm(&bytes).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
}

pub fn calibrate_cmd(args: &CalibrateArgs) -> CliResult<()> {
    let mut cfg = match &args.config {
        Some(p) => read_json::<CalibrationConfig>(p)?,
        None => CalibrationConfig::default(),
    };
    macro_rules! apply {
        ($($field:ident),*) => {
            $(if let Some(v) = args.$field { cfg.$field = v; })*
        };
    }
    apply!(
        kernel_size,
        rows,
        cols,
        min_images,
        occupancy_prefilter,
        threshold_channel,
        subtract_background,
        neighbor_aware
    );
    cfg.validate()?;
    let paths = frame_paths(&args.frames)?;
    let frames = paths
        .iter()
        .map(|p| read_frame(p))
        .collect::<CliResult<Vec<_>>>()?;
    log::info!("calibrating on {} frames", frames.len());
    let artifact = calibrate(&frames, &cfg)?;

    let mut run = Run::start("calibrate", &args.out)?;
    run.write("calibration.json", artifact.to_json()?)?;
    if args.projector_blob {
        let mut blob = Vec::new();
        write_projector_blob(&mut blob, &artifact.projectors)?;
        run.write("projectors.bin", blob)?;
    }
    let mut inputs = paths;
    inputs.extend(args.config.iter().cloned());
    let config = serde_json::json!({ "calibration": cfg, "projector_blob": args.projector_blob });
    run.finish(config, inputs, None)
}

pub fn reconstruct_cmd(args: &ReconstructArgs) -> CliResult<()> {
    if args.emit_trace && args.mode != Mode::Dataflow {
        return Err(CliError::Usage("--emit-trace needs --mode dataflow".into()));
    }
    let artifact: CalibrationArtifact = read_json(&args.calibration)?;
    artifact.validate()?;
    let image = read_frame(&args.image)?;
    let cfg = ReconstructionConfig {
        mode: args.mode,
        subtract_background: args.subtract_background,
        emission_channel: args.channel,
        worker_count: args.workers,
    };
    let (em, traces) = reconstruct(&image, &artifact, &cfg)?;
    let channel = args.channel.unwrap_or(artifact.channel());
    let occ = threshold_channel(&em, artifact.threshold, channel);
    log::info!("{} of {} sites occupied", occ.count(), em.len());

    let mut run = Run::start("reconstruct", &args.out)?;
    match args.format {
        EmissionFormat::Json => run.write("emissions.json", pretty(&em))?,
        EmissionFormat::Csv => run.write("emissions.csv", em.to_csv(channel))?,
    };
    run.write("occupancy.csv", occ.to_csv())?;
    run.write("occupancy.pgm", occ.to_pgm())?;
    if let (true, Some(t)) = (args.emit_trace, &traces) {
        run.write("trace.json", pretty(t))?;
    }
    let config = serde_json::json!({
        "reconstruction": cfg,
        "channel": channel,
        "format": args.format,
        "emit_trace": args.emit_trace,
    });
    run.finish(
        config,
        vec![args.calibration.clone(), args.image.clone()],
        None,
    )
}

pub fn bench(args: &BenchArgs) -> CliResult<()> {
    let mut cfg = match &args.config {
        Some(p) => read_json::<BenchConfig>(p)?,
        None => BenchConfig::default(),
    };
    if let Some(v) = &args.sizes {
        cfg.sizes = v.clone();
    }
    if let Some(v) = &args.modes {
        cfg.modes = v.clone();
    }
    if let Some(v) = args.trials {
        cfg.trials = v;
    }
    if let Some(v) = args.warmup {
        cfg.warmup = v;
    }
    if let Some(v) = args.workers {
        cfg.worker_count = v;
    }
    if let Some(v) = args.seed {
        cfg.seed = v;
    }
    if cfg.worker_count == 0 {
        return Err(CliError::Usage("--workers must be >= 1".into()));
    }
    let report = run_bench(&cfg)?;
    let mut run = Run::start("bench", &args.out)?;
    let csv = report.to_csv();
    print!("{csv}");
    run.write("bench.csv", csv)?;
    run.write("bench.json", pretty(&report))?;
    run.finish(
        to_value(&cfg),
        args.config.iter().cloned().collect(),
        Some(cfg.seed),
    )
}

pub fn predict(args: &PredictArgs) -> CliResult<()> {
    let model = match &args.model {
        Some(p) => {
            let m: LatencyModel = read_json(p)?;
            LatencyModel::new(m.cycles_per_atom, m.fixed_cycles, m.clock_hz)?
        }
        None => LatencyModel::reported(),
    };
    let seconds = predict_latency(&model, args.atoms as f64);
    println!("{:.3} µs", seconds * 1e6);
    if let Some(out) = &args.out {
        let mut run = Run::start("predict", out)?;
        let result = serde_json::json!({ "atoms": args.atoms, "seconds": seconds, "model": model });
        run.write("prediction.json", pretty(&result))?;
        let config = serde_json::json!({ "atoms": args.atoms, "model": model });
        run.finish(config, args.model.iter().cloned().collect(), None)?;
    }
    Ok(())
}
