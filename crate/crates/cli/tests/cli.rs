use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use pano2video::io::{read_png, write_json, write_png, write_poses, BitDepth};
use pano2video::scene::SyntheticRoom;
use pano2video::trajectory::interpolate_poses;
use pano2video::{CameraIntrinsics, CameraPose, PanoramaImage, Quaternion, Raster};

fn run(args: &[&str], envs: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_pano2video"));
    cmd.args(args).env_remove("PANO2VIDEO_THREADS").env_remove("PANO2VIDEO_CACHE_DIR");
    for (k, v) in envs {
        cmd.env(k, v);
    }
    cmd.output().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn pano_png(dir: &Path) -> std::path::PathBuf {
    let pano = PanoramaImage::from_lon_lat(128, 3, |lon, lat, px| {
        px[0] = (0.5 + 0.4 * lon.sin() * lat.cos()) as f32;
        px[1] = (0.5 + 0.4 * (2.0 * lon).cos()) as f32;
        px[2] = (0.5 + 0.4 * lat.sin()) as f32;
    })
    .unwrap();
    let path = dir.join("pano.png");
    write_png(&path, pano.raster(), BitDepth::Sixteen).unwrap();
    path
}

fn frame_poses(n: usize) -> Vec<(CameraPose, CameraIntrinsics)> {
    let k = CameraIntrinsics::new(16.0, 16.0, 16.0, 16.0, 32, 32).unwrap();
    let a = CameraPose::identity();
    let b = CameraPose::new(Quaternion::from_axis_angle(nalgebra::Vector3::z(), 0.3), nalgebra::Vector3::new(0.5, 0.2, 0.0))
        .unwrap();
    interpolate_poses(&a, &b, n).into_iter().map(|p| (p, k)).collect()
}

#[test]
fn project_round_trip_and_bad_window() {
    let dir = tempfile::tempdir().unwrap();
    let pano = pano_png(dir.path());
    let view = dir.path().join("view.png");
    let back = dir.path().join("back.png");
    let o = run(
        &["project", "--input", p(&pano), "--output", p(&view), "--yaw", "-30", "--hfov", "80", "--out-size", "48x32"],
        &[],
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let r = read_png(&view).unwrap();
    assert_eq!((r.width, r.height), (48, 32));
    let mask = dir.path().join("cov.png");
    let o = run(
        &[
            "project", "--direction", "persp2pano", "--input", p(&view), "--output", p(&back), "--yaw", "-30", "--hfov",
            "80", "--out-size", "128x64", "--mask", p(&mask),
        ],
        &[],
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(mask.exists());

    let bad = run(&["project", "--input", p(&pano), "--output", p(&view), "--hfov", "200", "--out-size", "8x8"], &[]);
    assert_eq!(code(&bad), 2);
    let missing = run(&["project", "--input", "/nonexistent.png", "--output", p(&view), "--out-size", "8x8"], &[]);
    assert_eq!(code(&missing), 2);
}

#[test]
fn keyframes_emit_pairs() {
    let dir = tempfile::tempdir().unwrap();
    let pano = pano_png(dir.path());
    let out = dir.path().join("kf");
    let o = run(
        &["keyframes", "--input", p(&pano), "--output", p(&out), "--views", "4", "--overlap", "0.2", "--out-size", "16x16"],
        &[],
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let listing: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("pairs.json")).unwrap()).unwrap();
    // four 90° views with 20% overlap leave a gap, so the ring does not close
    assert_eq!(listing.as_array().unwrap().len(), 3);
    assert!(out.join("pair_002/inpaint_mask.png").exists());

    let no_depth = run(&["keyframes", "--input", p(&pano), "--output", p(&out), "--mode", "walkin"], &[]);
    assert_eq!(code(&no_depth), 2);
}

#[test]
fn trajectory_and_cached_raymap() {
    let dir = tempfile::tempdir().unwrap();
    let keys = dir.path().join("keys.json");
    write_poses(&keys, &[frame_poses(2)[0], frame_poses(2)[1]]).unwrap();
    let traj = dir.path().join("traj.json");
    let o = run(&["trajectory", "--mode", "interpolate", "--poses", p(&keys), "--frames", "6", "--output", p(&traj)], &[]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let poses: Vec<serde_json::Value> = serde_json::from_str(&fs::read_to_string(&traj).unwrap()).unwrap();
    assert_eq!(poses.len(), 6);

    let cache = dir.path().join("cache");
    let plkr = dir.path().join("rays.plkr");
    let args = ["raymap", "--poses", p(&traj), "--out-size", "8x8", "--output", p(&plkr)];
    let o = run(&args, &[("PANO2VIDEO_CACHE_DIR", p(&cache)), ("PANO2VIDEO_THREADS", "2")]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let bytes = fs::read(&plkr).unwrap();
    assert_eq!(&bytes[..4], b"PLKR");
    assert_eq!(bytes.len(), 16 + 6 * 8 * 8 * 6 * 4);
    assert!(plkr.with_extension("json").exists());
    assert_eq!(fs::read_dir(cache.join("raymaps")).unwrap().count(), 1);

    let o = run(&args, &[("PANO2VIDEO_THREADS", "zero")]);
    assert_eq!(code(&o), 2);
}

#[test]
fn video_oracle_sampling_recovers_frames() {
    let dir = tempfile::tempdir().unwrap();
    let n = 5;
    let poses = frame_poses(n);
    let room = SyntheticRoom::default();
    let truth = dir.path().join("truth");
    let mut frames = Vec::new();
    for (i, (pose, k)) in poses.iter().enumerate() {
        let r = room.render_view(pose, k).unwrap();
        write_png(&truth.join(format!("frame_{i:03}.png")), &r, BitDepth::Sixteen).unwrap();
        frames.push(read_png(&truth.join(format!("frame_{i:03}.png"))).unwrap());
    }
    let pose_file = dir.path().join("poses.json");
    write_poses(&pose_file, &poses).unwrap();
    let out = dir.path().join("out");
    let oracle = format!("oracle:{}", truth.display());
    let o = run(
        &[
            "sample", "--mode", "video", "--poses", p(&pose_file), "--source", p(&truth.join("frame_000.png")),
            "--target", p(&truth.join("frame_004.png")), "--denoiser", &oracle, "--weight-mode", "blend",
            "--zero-variance", "--steps", "10", "--bit-depth", "16", "--output", p(&out),
        ],
        &[],
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    for (i, f) in frames.iter().enumerate() {
        let got = read_png(&out.join(format!("frame_{i:03}.png"))).unwrap();
        let worst = got.data.iter().zip(&f.data).map(|(a, b)| (a - b).abs()).fold(0.0f32, f32::max);
        assert!(worst <= 1.0 / 65535.0, "frame {i}: {worst}");
    }
    assert!(out.join("weights.json").exists());

    let refused = run(
        &[
            "sample", "--mode", "video", "--poses", p(&pose_file), "--source", p(&truth.join("frame_000.png")),
            "--target", p(&truth.join("frame_004.png")), "--denoiser", "external:127.0.0.1:1", "--output", p(&out),
        ],
        &[],
    );
    assert_eq!(code(&refused), 3);
    let unknown = run(&["sample", "--mode", "panorama", "--denoiser", "magic", "--output", p(&out)], &[]);
    assert_eq!(code(&unknown), 2);
}

#[test]
fn panorama_sampling_keeps_known_pixels() {
    let dir = tempfile::tempdir().unwrap();
    let known = Raster::from_fn(32, 16, 3, |u, v, px| px.fill(((u + 2 * v) % 7) as f32 / 7.0));
    let kp = dir.path().join("known.png");
    write_png(&kp, &known, BitDepth::Eight).unwrap();
    let mask: Vec<bool> = (0..32 * 16).map(|i| i % 32 < 16).collect();
    let mp = dir.path().join("mask.png");
    pano2video::io::write_mask_png(&mp, &mask, 32, 16).unwrap();
    let out = dir.path().join("pano_out.png");
    let o = run(
        &[
            "sample", "--mode", "panorama", "--known", p(&kp), "--mask", p(&mp), "--cycle-interval", "3", "--steps", "8",
            "--output", p(&out),
        ],
        &[],
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let (got, known) = (read_png(&out).unwrap(), read_png(&kp).unwrap());
    for (i, &m) in mask.iter().enumerate() {
        if m {
            assert_eq!(got.pixel(i % 32, i / 32), known.pixel(i % 32, i / 32));
        }
    }
}

#[test]
fn eval_reports_metrics() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for d in [&a, &b] {
        let r = Raster::from_fn(16, 16, 1, |u, v, px| px[0] = ((u * v) % 5) as f32 / 4.0);
        write_png(&d.join("x.png"), &r, BitDepth::Eight).unwrap();
    }
    let report = dir.path().join("report");
    let o = run(
        &["eval", "--metric", "psnr", "--metric", "ssim", "--reference", p(&a), "--candidate", p(&b), "--output-dir", p(&report)],
        &[],
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let stdout = String::from_utf8(o.stdout).unwrap();
    assert!(stdout.contains("x.png,1,inf,1,,"), "{stdout}");
    assert!(report.join("report.json").exists());

    let real: Vec<Vec<f64>> = (0..6).map(|i| vec![i as f64, (i * i) as f64 * 0.1]).collect();
    let shifted: Vec<Vec<f64>> = real.iter().map(|v| vec![v[0] + 3.0, v[1]]).collect();
    let (rp, gp) = (dir.path().join("real.feat"), dir.path().join("gen.feat"));
    pano2video::io::write_feat_file(&rp, &real).unwrap();
    pano2video::io::write_feat_file(&gp, &shifted).unwrap();
    let o = run(&["eval", "--metric", "fvd", "--real", p(&rp), "--generated", p(&gp)], &[]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let line = String::from_utf8(o.stdout).unwrap().lines().nth(1).unwrap().to_string();
    let fvd: f64 = line.rsplit(',').next().unwrap().parse().unwrap();
    assert!((fvd - 9.0).abs() < 1e-4, "{line}");

    let bad = dir.path().join("bad.json");
    write_json(&bad, &serde_json::json!([{"matches": [], "extra": 1}])).unwrap();
    let o = run(&["eval", "--metric", "mtsed", "--matches", p(&bad), "--poses", p(&bad)], &[]);
    assert_eq!(code(&o), 2);
}

#[test]
fn pipeline_and_sweep_from_config() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let cfg = dir.path().join("run.toml");
    fs::write(
        &cfg,
        format!(
            "seed = 3\noutput_dir = {:?}\nrecord_wall_clock = false\n\n[input]\npanorama_width_px = 128\n\n\
             [project]\nwidth_px = 16\nheight_px = 16\n\n[keyframes]\nmax_pairs = 1\n\n[trajectory]\nframes = 4\n\n\
             [raymap]\nwidth_px = 4\nheight_px = 4\n\n[sampler]\nsteps = 4\n",
            out.to_str().unwrap()
        ),
    )
    .unwrap();
    let o = run(&["pipeline", "--config", p(&cfg), "--stages", "project,keyframes"], &[]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(out.join("manifest.json").exists());
    assert!(out.join("keyframes/pairs.json").exists());
    assert!(!out.join("sample").exists());

    let svg = dir.path().join("sweep.svg");
    let o = run(&["sweep", "--config", p(&cfg), "--tau-t", "1:3:1", "--tau-q", "1:2:1", "--output", p(&svg)], &[]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(fs::read_to_string(&svg).unwrap().starts_with("<svg"));

    let bad = dir.path().join("bad.toml");
    fs::write(&bad, "output_dir = \"x\"\nbogus = 1\n").unwrap();
    assert_eq!(code(&run(&["pipeline", "--config", p(&bad)], &[])), 2);
    assert_eq!(code(&run(&["pipeline", "--config", p(&cfg), "--stages", "render"], &[])), 2);
}
