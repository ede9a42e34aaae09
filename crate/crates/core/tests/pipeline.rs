use std::fs;
use std::path::Path;

use serde_json::Value;

use pano2video::io::{read_png, write_png, BitDepth};
use pano2video::pipeline::{run_pipeline, KeyframeMode, PipelineConfig, RunManifest, RunOptions, Stage};
use pano2video::sampler::WeightMode;
use pano2video::Raster;

fn small(dir: &Path) -> PipelineConfig {
    let mut c = PipelineConfig::new(dir);
    c.record_wall_clock = false;
    c.input.panorama_width_px = 256;
    c.project.width_px = 24;
    c.project.height_px = 24;
    c.raymap.width_px = 8;
    c.raymap.height_px = 8;
    c.trajectory.frames = 5;
    c.sampler.steps = 20;
    c.keyframes.max_pairs = Some(2);
    c
}

fn report(dir: &Path) -> Vec<Value> {
    serde_json::from_str(&fs::read_to_string(dir.join("eval/report.json")).unwrap()).unwrap()
}

#[test]
fn oracle_run_on_synthetic_room_matches_ground_truth() {
    let dir = tempfile::tempdir().unwrap();
    let mut c = small(dir.path());
    c.sampler.mode = WeightMode::Blend;
    c.sampler.zero_variance = true;
    let m = run_pipeline(&c, &RunOptions::default()).unwrap();
    assert_eq!(m.stages.len(), Stage::ALL.len());
    assert!(m.verify(dir.path()).is_empty());

    let rows = report(dir.path());
    let pairs: Vec<&Value> = rows.iter().filter(|r| r["name"].as_str().unwrap().starts_with("pair_")).collect();
    assert_eq!(pairs.len(), 2);
    for r in &pairs {
        // exact reconstruction reports an infinite PSNR
        let psnr = &r["psnr"];
        assert!(psnr == "inf" || psnr.as_f64().unwrap() > 80.0, "{r}");
        assert!((r["ssim"].as_f64().unwrap() - 1.0).abs() < 1e-6, "{r}");
    }
    let all = rows.iter().find(|r| r["name"] == "all").expect("aggregate row");
    assert!(all["fvd"].as_f64().unwrap().abs() < 1e-6, "{all}");

    let frame = read_png(&dir.path().join("sample/pair_000/frame_000.png")).unwrap();
    let source = read_png(&dir.path().join("keyframes/pair_000/source.png")).unwrap();
    assert_eq!(frame, source);
}

#[test]
fn walkin_run_writes_masks_and_frames() {
    let dir = tempfile::tempdir().unwrap();
    let mut c = small(dir.path());
    c.keyframes.mode = KeyframeMode::Walkin;
    c.keyframes.max_pairs = Some(1);
    c.sampler.steps = 4;
    run_pipeline(&c, &RunOptions::default()).unwrap();
    let (w, h, mask) = pano2video::io::read_mask_png(&dir.path().join("keyframes/pair_000/inpaint_mask.png")).unwrap();
    assert_eq!((w, h), (24, 24));
    assert!(mask.iter().any(|&m| m) && mask.iter().any(|&m| !m));
    assert!(dir.path().join("sample/pair_000/frame_004.png").exists());
}

#[test]
fn eval_only_on_identical_dirs_gives_infinite_psnr() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for d in [&a, &b] {
        fs::create_dir_all(d).unwrap();
        for i in 0..3 {
            let r = Raster::from_fn(16, 16, 3, |u, v, px| {
                px.fill(((u + v * 3 + i) % 11) as f32 / 10.0);
            });
            write_png(&d.join(format!("img_{i}.png")), &r, BitDepth::Eight).unwrap();
        }
    }
    let out = dir.path().join("out");
    let mut c = small(&out);
    c.stages = vec![Stage::Eval];
    c.eval.reference_dir = Some(a);
    c.eval.candidate_dir = Some(b);
    let m = run_pipeline(&c, &RunOptions::default()).unwrap();
    assert_eq!(m.inputs.len(), 6);
    let rows = report(&out);
    assert_eq!(rows.len(), 3);
    assert!(rows.iter().all(|r| r["psnr"] == "inf" && r["ssim"].as_f64() == Some(1.0)));
    let csv = fs::read_to_string(out.join("eval/report.csv")).unwrap();
    assert!(csv.starts_with("name,frames,psnr,ssim,mtsed,fvd\n"));
    assert!(csv.contains("img_0.png,1,inf,1,,"));
}

#[test]
fn manifest_round_trips_and_detects_tampering() {
    let dir = tempfile::tempdir().unwrap();
    let mut c = small(dir.path());
    c.stages = vec![Stage::Project, Stage::Trajectory];
    run_pipeline(&c, &RunOptions::default()).unwrap();
    let m = RunManifest::read(dir.path()).unwrap();
    assert!(m.error.is_none());
    let victim = m.outputs().next().unwrap().path.clone();
    fs::write(dir.path().join(&victim), b"tampered").unwrap();
    assert_eq!(m.verify(dir.path()), vec![victim]);
}

#[test]
fn missing_panorama_is_a_validation_error() {
    let dir = tempfile::tempdir().unwrap();
    let mut c = small(dir.path());
    c.input.synthetic_room = false;
    c.input.panorama = Some(dir.path().join("absent.png"));
    let err = run_pipeline(&c, &RunOptions::default()).unwrap_err();
    assert!(err.is_validation(), "{err}");
}
