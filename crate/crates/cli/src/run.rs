use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use sha2::{Digest, Sha256};

use crate::experiment::ExperimentSpec;
use crate::failure::Failure;
use crate::manifest::{Manifest, Status, TaskRecord, MANIFEST};
use crate::output::write_json;
use crate::tasks::{run_task, Context};

pub const THREADS_VAR: &str = "GOSSIPFIELD_THREADS";

/// Installs the global thread pool, capped by `GOSSIPFIELD_THREADS` when set.
pub fn configure_threads() -> Result<(), Failure> {
    let Ok(value) = std::env::var(THREADS_VAR) else {
        return Ok(());
    };
    let threads: usize = value
        .trim()
        .parse()
        .ok()
        .filter(|&t| t > 0)
        .ok_or_else(|| {
            Failure::new(
                "cli.invalid_threads",
                format!("{THREADS_VAR} must be a positive integer, got `{value}`"),
            )
        })?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| Failure::new("cli.invalid_threads", e.to_string()))
}

/// Runs the experiment in `spec_path`. The manifest is written whenever the
/// output directory is known, whether or not the run succeeds. A failed
/// `setup` (thread configuration) is recorded like any other failure.
pub fn run(
    spec_path: &Path,
    out: Option<&Path>,
    setup: Result<(), Failure>,
) -> Result<Manifest, Failure> {
    let clock = Instant::now();
    let started_unix = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    let mut manifest = Manifest {
        tool: "gossipfield".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        spec_sha256: None,
        seed: None,
        threads: rayon::current_num_threads(),
        started_unix,
        wall_clock_seconds: 0.0,
        status: Status::Failed,
        tasks: Vec::new(),
        artifacts: Vec::new(),
        failure: None,
    };
    let base = spec_path
        .parent()
        .map(Path::to_path_buf)
        .unwrap_or_else(|| PathBuf::from("."));

    let mut out_dir = out.map(Path::to_path_buf);
    if let Some(dir) = &out_dir {
        std::fs::create_dir_all(dir)
            .map_err(|e| Failure::io(&dir.display().to_string(), e))?;
    }
    let result = (|| {
        setup?;
        let bytes = std::fs::read(spec_path).map_err(|e| {
            Failure::new(
                "cli.spec_unreadable",
                format!("{}: {e}", spec_path.display()),
            )
        })?;
        manifest.spec_sha256 = Some(hex::encode(Sha256::digest(&bytes)));
        let text = String::from_utf8(bytes)
            .map_err(|e| Failure::new("cli.invalid_spec", e.to_string()))?;
        let spec = ExperimentSpec::parse(&text)?;
        manifest.seed = spec.seed;
        if out_dir.is_none() {
            let dir = spec.output_dir.as_ref().map(|d| base.join(d)).ok_or_else(|| {
                Failure::new(
                    "cli.no_output_dir",
                    "pass --out or set output_dir in the spec",
                )
            })?;
            std::fs::create_dir_all(&dir)
                .map_err(|e| Failure::io(&dir.display().to_string(), e))?;
            out_dir = Some(dir);
        }
        let dir = out_dir.clone().unwrap();
        spec.validate(&base)?;
        let (net, edges) = spec.build_network(&base)?;
        log::info!(
            "network: {} agents, {} stubborn, {} edges",
            net.n(),
            net.stubborn().len(),
            net.edges().len()
        );
        if let Some(edges) = edges {
            std::fs::write(dir.join("graph.txt"), edges)
                .map_err(|e| Failure::io("graph.txt", e))?;
            manifest.artifacts.push("graph.txt".into());
        }
        let ctx = Context {
            net: &net,
            seed: spec.seed,
            out: &dir,
        };
        for (i, task) in spec.tasks.iter().enumerate() {
            log::info!("task {i}: {}", task.name());
            let t = Instant::now();
            let outputs = run_task(&ctx, i, task).map_err(|f| f.at_task(i))?;
            let seconds = t.elapsed().as_secs_f64();
            log::info!("task {i} done in {seconds:.3}s: {}", outputs.join(", "));
            manifest.tasks.push(TaskRecord {
                index: i,
                task: task.name().into(),
                outputs,
                seconds,
            });
        }
        Ok::<(), Failure>(())
    })();

    manifest.wall_clock_seconds = clock.elapsed().as_secs_f64();
    match &result {
        Ok(()) => manifest.status = Status::Ok,
        Err(f) => manifest.failure = Some(f.clone()),
    }
    if let Some(dir) = &out_dir {
        write_json(&dir.join(MANIFEST), &manifest)?;
    }
    result.map(|()| manifest)
}
