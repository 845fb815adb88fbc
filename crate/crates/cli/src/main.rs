//! `darkroom`: render Cinema G-buffer databases, shade them headless, serve them.
//!
//! Exit codes: 0 success, 2 bad input or parse failure, 3 invalid pipeline,
//! 4 I/O failure. `DARKROOM_THREADS` caps the worker threads.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;
use std::time::Instant;

use clap::{Parser, Subcommand, ValueEnum};
use darkroom_core::camera::Projection;
use darkroom_core::cinema::{self, CinemaError};
use darkroom_core::geometry::{obj, shapes, Bvh, GeometryError, TriangleMesh};
use darkroom_core::grid::GridSpec;
use darkroom_core::imaging::{render_gbuffer, RenderOptions};
use darkroom_core::math::Vec3;
use darkroom_core::pipeline::{Registry, DEMO_PIPELINE};
use darkroom_core::session::{self, OutputFormat, Selection, Selector, SessionRequest};
use darkroom_core::Real;
use rayon::prelude::*;

#[derive(Parser)]
#[command(name = "darkroom", version, about = "Deferred shading for Cinema image databases")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Precision {
    F32,
    F64,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Png8,
    Gbuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum Shape {
    Torus,
    Icosphere,
}

#[derive(Subcommand)]
enum Command {
    /// Ray trace a mesh from every camera of a grid into a Cinema database.
    Render {
        #[arg(long)]
        mesh: PathBuf,
        /// Scalar-field sidecar: `{"fields": {"name": [one value per vertex]}}`.
        #[arg(long)]
        fields: Option<PathBuf>,
        /// A grid JSON file, `fibonacci:N` (auto-framed) or `fibonacci:N:RADIUS`.
        #[arg(long)]
        grid: String,
        #[arg(long)]
        out: PathBuf,
        /// Overrides the grid's resolution, e.g. 256x256.
        #[arg(long, value_parser = parse_resolution)]
        resolution: Option<(u32, u32)>,
        #[arg(long)]
        emit_normals: bool,
        #[arg(long)]
        emit_positions: bool,
        /// Jitter primary rays inside each pixel with this seed (default: pixel centers).
        #[arg(long)]
        seed: Option<u64>,
        /// Vertical field of view in degrees for `fibonacci:` grids.
        #[arg(long, default_value_t = 45.0)]
        fov: f64,
        /// Arithmetic used for ray tracing.
        #[arg(long, value_enum, default_value = "f64")]
        precision: Precision,
    },
    /// Run a pipeline on one database sample and write the sink's output.
    Shade {
        #[arg(long)]
        db: PathBuf,
        /// Pipeline JSON file, or `demo` for the built-in demo pipeline.
        #[arg(long)]
        pipeline: String,
        /// Exact axis values, e.g. phi=0,theta=45. Repeat to load several samples.
        #[arg(long, value_parser = parse_selector)]
        select: Vec<Selector>,
        /// Output port, as node:port.
        #[arg(long)]
        sink: String,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum, default_value = "png8")]
        format: Format,
        /// Value range for channel previews, as LO,HI.
        #[arg(long, value_parser = parse_range)]
        range: Option<[f64; 2]>,
    },
    /// Serve the databases below a directory over HTTP.
    Serve {
        #[arg(long)]
        root: PathBuf,
        /// 0 picks a free port; the address is printed on startup.
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: String,
    },
    /// Write a procedural test mesh as OBJ.
    Mesh {
        #[arg(value_enum)]
        shape: Shape,
        #[arg(long)]
        out: PathBuf,
        /// Subdivision level (icosphere) or rings (torus; sides = rings / 2).
        #[arg(long, default_value_t = 64)]
        detail: u32,
    },
}

fn parse_resolution(s: &str) -> Result<(u32, u32), String> {
    let (w, h) = s.split_once(['x', 'X']).ok_or("expected WIDTHxHEIGHT")?;
    let w: u32 = w.trim().parse().map_err(|e| format!("width: {e}"))?;
    let h: u32 = h.trim().parse().map_err(|e| format!("height: {e}"))?;
    if w == 0 || h == 0 {
        return Err("resolution must be positive".into());
    }
    Ok((w, h))
}

fn parse_selector(s: &str) -> Result<Selector, String> {
    let mut sel = Selector::new();
    for pair in s.split(',').filter(|p| !p.trim().is_empty()) {
        let (k, v) = pair
            .split_once('=')
            .ok_or_else(|| format!("`{pair}` is not axis=value"))?;
        let v: f64 = v.trim().parse().map_err(|_| format!("`{v}` is not a number"))?;
        sel.insert(k.trim().to_owned(), v);
    }
    Ok(sel)
}

fn parse_range(s: &str) -> Result<[f64; 2], String> {
    let (lo, hi) = s.split_once(',').ok_or("expected LO,HI")?;
    let p = |v: &str| v.trim().parse::<f64>().map_err(|e| e.to_string());
    Ok([p(lo)?, p(hi)?])
}

/// A failure with its exit code.
struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn input(message: impl ToString) -> Self {
        Self {
            code: 2,
            message: message.to_string(),
        }
    }

    fn io(message: impl ToString) -> Self {
        Self {
            code: 4,
            message: message.to_string(),
        }
    }
}

impl From<session::SessionError> for Failure {
    fn from(e: session::SessionError) -> Self {
        Self {
            code: e.exit_code() as u8,
            message: e.to_string(),
        }
    }
}

impl From<CinemaError> for Failure {
    fn from(e: CinemaError) -> Self {
        match e {
            CinemaError::Io { .. } => Failure::io(e),
            _ => Failure::input(e),
        }
    }
}

fn thread_cap() -> Result<Option<usize>, Failure> {
    match std::env::var("DARKROOM_THREADS") {
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(Some(n)),
            _ => Err(Failure::input(format!(
                "DARKROOM_THREADS must be a positive integer, got `{v}`"
            ))),
        },
        Err(_) => Ok(None),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp(None)
        .init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    let threads = thread_cap()?;
    if let Some(n) = threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Failure::input(format!("thread pool: {e}")))?;
    }
    match cli.command {
        Command::Render {
            mesh,
            fields,
            grid,
            out,
            resolution,
            emit_normals,
            emit_positions,
            seed,
            fov,
            precision,
        } => {
            let args = RenderArgs {
                mesh: &mesh,
                fields: fields.as_deref(),
                grid: &grid,
                out: &out,
                resolution,
                fov,
                options: RenderOptions {
                    emit_position: emit_positions,
                    emit_normal: emit_normals,
                    jitter_seed: seed,
                },
            };
            match precision {
                Precision::F32 => render::<f32>(&args),
                Precision::F64 => render::<f64>(&args),
            }
        }
        Command::Shade {
            db,
            pipeline,
            select,
            sink,
            out,
            format,
            range,
        } => shade(&db, &pipeline, select, sink, &out, format, range),
        Command::Serve { root, port, host } => serve(root, &host, port, threads),
        Command::Mesh { shape, out, detail } => write_mesh(shape, &out, detail),
    }
}

struct RenderArgs<'a> {
    mesh: &'a Path,
    fields: Option<&'a Path>,
    grid: &'a str,
    out: &'a Path,
    resolution: Option<(u32, u32)>,
    fov: f64,
    options: RenderOptions,
}

fn geometry_failure(e: GeometryError) -> Failure {
    Failure::input(e)
}

fn grid_spec<T: Real>(
    arg: &str,
    mesh: &TriangleMesh<T>,
    resolution: (u32, u32),
    fov: f64,
) -> Result<GridSpec, Failure> {
    if let Some(rest) = arg.strip_prefix("fibonacci:") {
        let mut parts = rest.split(':');
        let n: usize = parts
            .next()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| Failure::input(format!("--grid {arg}: expected fibonacci:N[:RADIUS]")))?;
        let bounds = mesh.bounds();
        let center = bounds.centroid().cast::<f64>();
        let explicit = parts.next().map(str::parse::<f64>).transpose();
        let radius = match explicit {
            Ok(Some(r)) => r,
            Ok(None) => {
                // Fit the bounding sphere into the vertical field of view, with a margin.
                let half_diag = bounds.diagonal().cast::<f64>().length() / 2.0;
                1.1 * half_diag / (fov.to_radians() / 2.0).sin()
            }
            Err(_) => return Err(Failure::input(format!("--grid {arg}: radius is not a number"))),
        };
        return Ok(GridSpec::Fibonacci {
            center,
            radius,
            n,
            resolution,
            projection: Projection::Perspective { fov_y: fov },
            up: Vec3::unit_y(),
        });
    }
    let text = fs::read_to_string(arg).map_err(|e| Failure::input(format!("{arg}: {e}")))?;
    let mut spec: GridSpec = serde_json::from_str(&text).map_err(|e| Failure::input(format!("{arg}: {e}")))?;
    spec.set_resolution(resolution);
    Ok(spec)
}

fn render<T: Real>(args: &RenderArgs<'_>) -> Result<(), Failure> {
    let started = Instant::now();
    let mut mesh: TriangleMesh<T> = obj::load_obj(args.mesh).map_err(geometry_failure)?;
    if let Some(path) = args.fields {
        obj::load_fields_json(&mut mesh, path).map_err(geometry_failure)?;
    }
    let resolution = match (args.resolution, args.grid.starts_with("fibonacci:")) {
        (Some(r), _) => r,
        (None, true) => (256, 256),
        (None, false) => {
            let text = fs::read_to_string(args.grid).map_err(|e| Failure::input(format!("{}: {e}", args.grid)))?;
            let spec: GridSpec =
                serde_json::from_str(&text).map_err(|e| Failure::input(format!("{}: {e}", args.grid)))?;
            spec.resolution()
        }
    };
    let spec = grid_spec(args.grid, &mesh, resolution, args.fov)?;
    let grid = spec
        .build::<T>()
        .map_err(|e| Failure::input(format!("--grid {}: {e}", args.grid)))?;
    let bvh = Bvh::build(&mesh).map_err(geometry_failure)?;
    let fields: Vec<String> = mesh.field_names().map(str::to_owned).collect();
    log::info!(
        "{} triangles, {} cameras at {}x{}, fields {:?}",
        mesh.triangles().len(),
        grid.len(),
        resolution.0,
        resolution.1,
        fields
    );

    let results: Vec<_> = grid
        .cameras()
        .par_iter()
        .map(|camera| {
            let t = Instant::now();
            render_gbuffer(&mesh, &bvh, camera, &fields, &args.options).map(|g| (g, t.elapsed()))
        })
        .collect::<Result<_, _>>()
        .map_err(Failure::input)?;
    let axes = grid.axes();
    for (i, (_, elapsed)) in results.iter().enumerate() {
        let labels: Vec<String> = axes.iter().map(|(k, v)| format!("{k}={}", v[i])).collect();
        println!(
            "camera {:>4}/{} [{}]: {:.1} ms",
            i + 1,
            grid.len(),
            labels.join(" "),
            elapsed.as_secs_f64() * 1e3
        );
    }
    let gbuffers: Vec<_> = results.into_iter().map(|(g, _)| g).collect();
    let db = cinema::write_database(args.out, &grid, &gbuffers, &Default::default())?;
    let mut total = 0u64;
    for row in 0..db.len() {
        let path = db.file_path(row)?;
        total += fs::metadata(&path)
            .map_err(|e| Failure::io(format!("{}: {e}", path.display())))?
            .len();
    }
    println!(
        "wrote {} G-buffers to {}: {} bytes ({:.2} MiB) in {:.2} s",
        db.len(),
        args.out.display(),
        total,
        total as f64 / (1024.0 * 1024.0),
        started.elapsed().as_secs_f64()
    );
    Ok(())
}

fn shade(
    db: &Path,
    pipeline: &str,
    select: Vec<Selector>,
    sink: String,
    out: &Path,
    format: Format,
    range: Option<[f64; 2]>,
) -> Result<(), Failure> {
    let text = if pipeline == "demo" {
        DEMO_PIPELINE.to_owned()
    } else {
        fs::read_to_string(pipeline).map_err(|e| Failure::input(format!("{pipeline}: {e}")))?
    };
    let pipeline: serde_json::Value =
        serde_json::from_str(&text).map_err(|e| Failure::input(format!("{pipeline}: malformed JSON: {e}")))?;
    if !db.join(cinema::INDEX_FILE).is_file() {
        return Err(Failure::input(format!(
            "{}: not a Cinema database (no {})",
            db.display(),
            cinema::INDEX_FILE
        )));
    }
    let database = cinema::read_database(db)?;
    let request = SessionRequest {
        database: db
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_default(),
        select: match select.len() {
            0 => Selection::default(),
            1 => Selection::One(select.into_iter().next().unwrap()),
            _ => Selection::Many(select),
        },
        pipeline,
        sink,
        format: match format {
            Format::Png8 => OutputFormat::Png8,
            Format::Gbuf => OutputFormat::Gbuf,
        },
        range,
    };
    let rendered = session::execute(&database, &request, Arc::new(Registry::standard()))?;
    fs::write(out, &rendered.bytes).map_err(|e| Failure::io(format!("{}: {e}", out.display())))?;
    println!("wrote {} ({} bytes)", out.display(), rendered.bytes.len());
    Ok(())
}

fn serve(root: PathBuf, host: &str, port: u16, threads: Option<usize>) -> Result<(), Failure> {
    if !root.is_dir() {
        return Err(Failure::input(format!("{}: not a directory", root.display())));
    }
    let mut builder = tokio::runtime::Builder::new_multi_thread();
    if let Some(n) = threads {
        builder.worker_threads(n).max_blocking_threads(n);
    }
    let runtime = builder.enable_all().build().map_err(Failure::io)?;
    runtime.block_on(async {
        let listener = tokio::net::TcpListener::bind((host, port))
            .await
            .map_err(|e| Failure::io(format!("cannot listen on {host}:{port}: {e}")))?;
        let addr = listener.local_addr().map_err(Failure::io)?;
        // On stdout so scripts can pick up the port chosen for `--port 0`.
        println!("serving {} on http://{addr}", root.display());
        darkroom_service::serve(listener, root).await.map_err(Failure::io)
    })
}

fn write_mesh(shape: Shape, out: &Path, detail: u32) -> Result<(), Failure> {
    let mesh: TriangleMesh<f64> = match shape {
        Shape::Torus => shapes::torus(1.0, 0.35, detail.max(3), (detail / 2).max(3)),
        Shape::Icosphere => shapes::icosphere(detail.min(7)),
    };
    fs::write(out, obj::to_obj(&mesh)).map_err(|e| Failure::io(format!("{}: {e}", out.display())))?;
    println!("wrote {} ({} triangles)", out.display(), mesh.triangles().len());
    Ok(())
}
