//! Command-line pipeline driver: synthesize ground-truth sequences,
//! calibrate, track to CSV or a live stream, receive into CSV/OBJ, and
//! benchmark throughput.

use std::fs;
use std::io::Write;
use std::net::TcpListener;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use posecast::pgm;
use posecast::pipeline::{Tracker, TrackerConfig};
use posecast::pose3d::{self, JointLimits};
use posecast::skeleton::{build_dancer_mesh, export_obj, pose_mesh};
use posecast::synth::{
    self, expected_occlusion, parse_angle_script, render_silhouette, BodyParams, NoiseConfig,
};
use posecast::vision::{calibrate, Calibration};
use posecast::wire::{encode, serve_session, PoseSender};

#[derive(Parser)]
#[command(
    name = "posecast",
    about = "Single-camera arm tracking: silhouette frames to joint-angle streams to a posed dancer mesh",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Render a synthetic silhouette sequence with ground-truth keypoints
    Synth(SynthArgs),
    /// Measure the user from a spread-arm calibration frame
    Calibrate(CalibrateArgs),
    /// Track a frame sequence into joint angles (CSV and/or a live stream)
    Track(TrackArgs),
    /// Receive a joint-angle stream; write CSV and/or per-frame OBJ meshes
    Receive(ReceiveArgs),
    /// Benchmark the detect-lift-encode pipeline on a sequence
    Bench(BenchArgs),
}

/// Figure geometry and scene intensities (pixels at camera scale).
#[derive(Args, Clone)]
struct BodyArgs {
    #[arg(long, default_value_t = 96.0)]
    shoulder_width: f64,
    #[arg(long, default_value_t = 230.0)]
    torso_height: f64,
    #[arg(long, default_value_t = 170.0)]
    torso_top: f64,
    #[arg(long, default_value_t = 320.0)]
    body_center_x: f64,
    #[arg(long, default_value_t = 88.0)]
    upper_arm_len: f64,
    #[arg(long, default_value_t = 72.0)]
    forearm_len: f64,
    #[arg(long, default_value_t = 18.0)]
    arm_width: f64,
    #[arg(long, default_value_t = 22.0)]
    head_radius: f64,
    #[arg(long, default_value_t = 205)]
    skin: u8,
    #[arg(long, default_value_t = 95)]
    clothing: u8,
    #[arg(long, default_value_t = 18)]
    background: u8,
}

impl BodyArgs {
    fn to_params(&self) -> BodyParams<f64> {
        BodyParams {
            shoulder_width: self.shoulder_width,
            torso_height: self.torso_height,
            torso_top: self.torso_top,
            body_center_x: self.body_center_x,
            upper_arm_len: self.upper_arm_len,
            forearm_len: self.forearm_len,
            arm_width: self.arm_width,
            head_radius: self.head_radius,
            skin_intensity: self.skin,
            clothing_intensity: self.clothing,
            background_intensity: self.background,
        }
    }
}

#[derive(Args)]
struct SynthArgs {
    /// Angle script: one frame per line, ten angles (l_az l_el l_roll
    /// l_elbow l_wrist r_az r_el r_roll r_elbow r_wrist), `#` comments
    #[arg(long)]
    script: PathBuf,
    /// Output directory for frame_NNNNNN.pgm and truth.csv
    #[arg(long)]
    out_dir: PathBuf,
    #[arg(long, default_value_t = 640)]
    width: u32,
    #[arg(long, default_value_t = 480)]
    height: u32,
    /// Additive Gaussian noise level; 0 disables
    #[arg(long, default_value_t = 2.0)]
    noise_sigma: f64,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[command(flatten)]
    body: BodyArgs,
}

#[derive(Args)]
struct CalibrateArgs {
    /// Calibration-pose frame (PGM)
    #[arg(long)]
    frame: PathBuf,
    /// Output calibration file (key=value text)
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct TrackArgs {
    /// Directory of PGM frames, processed in filename order
    #[arg(long)]
    frames: PathBuf,
    /// Calibration file from `posecast calibrate`
    #[arg(long)]
    calib: PathBuf,
    /// Write joint angles as CSV
    #[arg(long)]
    csv: Option<PathBuf>,
    /// Stream frames to a receiver at host:port
    #[arg(long)]
    send: Option<String>,
    /// Frame rate the timestamps assume
    #[arg(long, default_value_t = 30.0)]
    fps: f64,
}

#[derive(Args)]
struct ReceiveArgs {
    #[arg(long, default_value_t = 9470)]
    port: u16,
    #[arg(long, default_value = "0.0.0.0")]
    host: String,
    /// Write received angles as CSV
    #[arg(long)]
    csv: Option<PathBuf>,
    /// Write one posed dancer OBJ per frame into this directory
    #[arg(long)]
    obj_dir: Option<PathBuf>,
    /// Print session stats as one JSON object when the stream ends
    #[arg(long)]
    stats: bool,
    #[command(flatten)]
    body: BodyArgs,
}

#[derive(Args)]
struct BenchArgs {
    #[arg(long)]
    frames: PathBuf,
    #[arg(long)]
    calib: PathBuf,
}

fn main() {
    if let Err(err) = run() {
        eprintln!("error: {err:#}");
        std::process::exit(1);
    }
}

fn run() -> Result<()> {
    match Cli::parse().command {
        Command::Synth(args) => cmd_synth(args),
        Command::Calibrate(args) => cmd_calibrate(args),
        Command::Track(args) => cmd_track(args),
        Command::Receive(args) => cmd_receive(args),
        Command::Bench(args) => cmd_bench(args),
    }
}

fn cmd_synth(args: SynthArgs) -> Result<()> {
    let body = args.body.to_params();
    body.validate()?;
    let text = fs::read_to_string(&args.script)
        .with_context(|| format!("reading script {}", args.script.display()))?;
    let poses = parse_angle_script(&text)?;
    if poses.is_empty() {
        bail!("script {} contains no frames", args.script.display());
    }
    fs::create_dir_all(&args.out_dir)?;

    let mut truth_csv = String::new();
    truth_csv.push_str(&synth::truth_csv_header());
    truth_csv.push('\n');
    for (i, pose) in poses.iter().enumerate() {
        let mut pose = *pose;
        let (l_occ, r_occ) = expected_occlusion(&body, &pose)?;
        pose.expect_left_occluded = l_occ;
        pose.expect_right_occluded = r_occ;
        let noise = NoiseConfig {
            sigma: args.noise_sigma,
            // one stream per frame keeps re-renders of a frame identical
            seed: args.seed.wrapping_add(i as u64),
        };
        let frame = render_silhouette(&body, &pose, args.width, args.height, noise)
            .with_context(|| format!("rendering script frame {}", i + 1))?;
        let path = args.out_dir.join(pgm::sequence_file_name(i + 1));
        pgm::write_pgm_file(&path, &frame)?;
        let truth = synth::project_keypoints(&body, &pose)?;
        truth_csv.push_str(&synth::truth_csv_row(i + 1, &truth));
        truth_csv.push('\n');
    }
    fs::write(args.out_dir.join("truth.csv"), truth_csv)?;
    println!(
        "wrote {} frames and truth.csv to {}",
        poses.len(),
        args.out_dir.display()
    );
    Ok(())
}

fn cmd_calibrate(args: CalibrateArgs) -> Result<()> {
    let frame = pgm::read_pgm_file(&args.frame)
        .with_context(|| format!("reading {}", args.frame.display()))?;
    let calib = calibrate(&frame)?;
    fs::write(&args.out, calib.to_key_values())
        .with_context(|| format!("writing {}", args.out.display()))?;
    println!(
        "calibrated: body_width={:.1} arm_len={:.1} arm_width={:.1} threshold={} skin=[{},{}]",
        calib.body_width,
        calib.arm_len,
        calib.arm_width,
        calib.threshold,
        calib.skin_lo,
        calib.skin_hi
    );
    Ok(())
}

fn load_calibration(path: &Path) -> Result<Calibration> {
    let text = fs::read_to_string(path)
        .with_context(|| format!("reading calibration {}", path.display()))?;
    Ok(Calibration::from_key_values(&text)?)
}

fn list_frames(dir: &Path) -> Result<Vec<PathBuf>> {
    let frames = pgm::list_sequence(dir).with_context(|| format!("listing {}", dir.display()))?;
    if frames.is_empty() {
        bail!("no frames in {}", dir.display());
    }
    Ok(frames)
}

fn cmd_track(args: TrackArgs) -> Result<()> {
    let frames = list_frames(&args.frames)?;
    let calib = load_calibration(&args.calib)?;
    if args.fps <= 0.0 {
        bail!("fps must be positive");
    }

    let mut csv = args
        .csv
        .as_ref()
        .map(|p| -> Result<fs::File> {
            let mut f =
                fs::File::create(p).with_context(|| format!("creating {}", p.display()))?;
            writeln!(f, "{}", pose3d::csv_header())?;
            Ok(f)
        })
        .transpose()?;
    let mut sender = args
        .send
        .as_ref()
        .map(|addr| PoseSender::connect(addr).with_context(|| format!("connecting to {addr}")))
        .transpose()?;

    let mut tracker = Tracker::new(calib, TrackerConfig::default());
    for (i, path) in frames.iter().enumerate() {
        let frame =
            pgm::read_pgm_file(path).with_context(|| format!("reading {}", path.display()))?;
        let tracked = tracker.track(&frame);
        if let Some(warning) = &tracked.warning {
            eprintln!(
                "warning: frame {}: {warning}; repeating previous angles",
                path.display()
            );
        }
        if let Some(csv) = csv.as_mut() {
            writeln!(csv, "{}", pose3d::csv_row(&tracked.angles))?;
        }
        if let Some(sender) = sender.as_mut() {
            let ts = (i as f64 * 1000.0 / args.fps).round() as u32;
            sender.send_stamped(&tracked.angles, ts)?;
        }
    }
    println!("tracked {} frames", frames.len());
    Ok(())
}

fn cmd_receive(args: ReceiveArgs) -> Result<()> {
    let listener = TcpListener::bind((args.host.as_str(), args.port))
        .with_context(|| format!("binding {}:{}", args.host, args.port))?;
    let limits = JointLimits::default();
    let session = serve_session(listener, limits);

    let mut csv = args
        .csv
        .as_ref()
        .map(|p| -> Result<fs::File> {
            let mut f =
                fs::File::create(p).with_context(|| format!("creating {}", p.display()))?;
            writeln!(f, "{}", pose3d::csv_header())?;
            Ok(f)
        })
        .transpose()?;

    let mesh_setup = args
        .obj_dir
        .as_ref()
        .map(|dir| -> Result<_> {
            fs::create_dir_all(dir)?;
            let body = args.body.to_params();
            body.validate()?;
            let rest = build_dancer_mesh(&body);
            Ok((dir.clone(), body, rest))
        })
        .transpose()?;

    let mut received = 0u64;
    while let Ok(frame) = session.frames().recv() {
        received += 1;
        if let Some(csv) = csv.as_mut() {
            writeln!(csv, "{}", pose3d::csv_row(&frame.angles))?;
        }
        if let Some((dir, body, rest)) = &mesh_setup {
            let posed = pose_mesh(rest, &frame.angles, body, &limits)?;
            let name = format!("frame_{:06}.obj", frame.seq as u64 + 1);
            fs::write(dir.join(name), export_obj(&posed))?;
        }
    }
    let stats = session.finish()?;
    if args.stats {
        println!("{}", stats.to_json());
    } else {
        println!("received {received} frames");
    }
    Ok(())
}

fn cmd_bench(args: BenchArgs) -> Result<()> {
    let paths = list_frames(&args.frames)?;
    let calib = load_calibration(&args.calib)?;

    // Preload so disk I/O stays out of the pipeline measurement; its cost
    // is reported separately.
    let t_load = Instant::now();
    let frames: Vec<_> = paths
        .iter()
        .map(|p| pgm::read_pgm_file(p).with_context(|| format!("reading {}", p.display())))
        .collect::<Result<_>>()?;
    let load_s = t_load.elapsed().as_secs_f64();

    let mut tracker = Tracker::new(calib, TrackerConfig::default());
    let mut detect_s = 0.0;
    let mut encode_s = 0.0;
    let t_total = Instant::now();
    for (i, frame) in frames.iter().enumerate() {
        let t0 = Instant::now();
        let tracked = tracker.track(frame);
        detect_s += t0.elapsed().as_secs_f64();
        let t1 = Instant::now();
        let msg = encode(&tracked.angles, i as u32, (i as u32).wrapping_mul(33))?;
        std::hint::black_box(msg);
        encode_s += t1.elapsed().as_secs_f64();
    }
    let total_s = t_total.elapsed().as_secs_f64();
    let n = frames.len() as f64;

    println!("frames:            {}", frames.len());
    println!(
        "load:              {:8.3} ms/frame (excluded from fps)",
        1e3 * load_s / n
    );
    println!("detect+lift:       {:8.3} ms/frame", 1e3 * detect_s / n);
    println!("encode:            {:8.3} ms/frame", 1e3 * encode_s / n);
    println!("pipeline total:    {:8.3} ms/frame", 1e3 * total_s / n);
    println!("pipeline fps:      {:8.1}", n / total_s);
    Ok(())
}
