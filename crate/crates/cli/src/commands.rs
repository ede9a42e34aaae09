use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::Vector3;
use serde_json::json;

use pano2video::io::{
    list_pngs, read_depth, read_feat_file, read_json, read_mask_png, read_png, read_poses, write_json, write_mask_png,
    write_png, write_poses, BitDepth,
};
use pano2video::keyframes::{build_neighboring_pairs, build_walkin_pair, window_depth, AxisDepth};
use pano2video::metrics::{feature_distribution, frechet_distance, mtsed_sequence, psnr, ssim, Correspondences, MetricsError};
use pano2video::pipeline::{
    cached_plkr, emit_report, emit_sweep, parse_grid, render_report, run_pipeline, run_sweep, PipelineConfig,
    PipelineError, ReportFormat, ReportRow, RunOptions, Stage,
};
use pano2video::projection::{pano_to_perspective, perspective_to_pano, vfov_from_aspect, CanvasShape, ViewWindow};
use pano2video::raymap::{read_plkr, scale_intrinsics, stack_raymaps, RaymapSidecar};
use pano2video::sampler::{
    make_schedule, panorama_outpaint_sample, spatial_diffusion_sample, stub_features, Anchor, Denoiser,
    ExternalDenoiser, Latent, OracleDenoiser, SamplerError, SpatialConfig, StubDenoiser, VideoRequest, WeightMode,
};
use pano2video::trajectory::{
    generate_star_trajectory, interpolate_poses, upsample_trajectory, StarOptions, TrajectorySpec, DEFAULT_FRAME_RATE,
};
use pano2video::io::PoseRecord;
use pano2video::{CameraIntrinsics, CameraPose, PanoramaImage, PerspectiveImage};

use crate::{
    Direction, EvalArgs, KeyframesArgs, MetricArg, PairMode, PipelineArgs, ProjectArgs, RaymapArgs, SampleArgs, SampleMode,
    SweepArgs, TrajectoryArgs, TrajectoryMode, WeightArg,
};

/// A failed command: bad arguments or inputs, or a failure while running.
#[derive(Debug)]
pub enum Failure {
    Invalid(String),
    Runtime(String),
}

impl Failure {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Failure::Invalid(msg.into())
    }

    pub fn runtime(msg: impl Into<String>) -> Self {
        Failure::Runtime(msg.into())
    }

    pub fn code(&self) -> u8 {
        match self {
            Failure::Invalid(_) => 2,
            Failure::Runtime(_) => 3,
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Invalid(m) | Failure::Runtime(m) => f.write_str(m),
        }
    }
}

impl From<PipelineError> for Failure {
    fn from(e: PipelineError) -> Self {
        if e.is_validation() {
            Failure::Invalid(e.to_string())
        } else {
            Failure::Runtime(e.to_string())
        }
    }
}

impl From<SamplerError> for Failure {
    fn from(e: SamplerError) -> Self {
        match e {
            SamplerError::Schedule(_)
            | SamplerError::Shape(_)
            | SamplerError::IndivisibleWidth(_)
            | SamplerError::Temperature(_)
            | SamplerError::Missing(_) => Failure::Invalid(e.to_string()),
            _ => Failure::Runtime(e.to_string()),
        }
    }
}

impl From<MetricsError> for Failure {
    fn from(e: MetricsError) -> Self {
        match e {
            MetricsError::SquareRoot(_) => Failure::Runtime(e.to_string()),
            _ => Failure::Invalid(e.to_string()),
        }
    }
}

trait Classify<T> {
    fn invalid(self) -> Result<T, Failure>;
    fn runtime(self) -> Result<T, Failure>;
}

impl<T, E: fmt::Display> Classify<T> for Result<T, E> {
    fn invalid(self) -> Result<T, Failure> {
        self.map_err(|e| Failure::Invalid(e.to_string()))
    }

    fn runtime(self) -> Result<T, Failure> {
        self.map_err(|e| Failure::Runtime(e.to_string()))
    }
}

pub fn parse_size(s: &str) -> Result<(usize, usize), String> {
    let (w, h) = s.split_once(['x', 'X']).ok_or_else(|| format!("expected WxH, got {s:?}"))?;
    let dim = |d: &str| d.trim().parse::<usize>().ok().filter(|&n| n > 0);
    match (dim(w), dim(h)) {
        (Some(w), Some(h)) => Ok((w, h)),
        _ => Err(format!("expected positive WxH, got {s:?}")),
    }
}

pub fn parse_bit_depth(s: &str) -> Result<u8, String> {
    match s {
        "8" => Ok(8),
        "16" => Ok(16),
        _ => Err(format!("bit depth must be 8 or 16, got {s:?}")),
    }
}

pub fn parse_vec3(s: &str) -> Result<[f64; 3], String> {
    let parts: Vec<f64> = s
        .split(',')
        .map(|p| p.trim().parse::<f64>().map_err(|e| format!("{p:?}: {e}")))
        .collect::<Result<_, _>>()?;
    <[f64; 3]>::try_from(parts).map_err(|_| format!("expected x,y,z, got {s:?}"))
}

fn bit_depth(b: u8) -> BitDepth {
    if b == 16 {
        BitDepth::Sixteen
    } else {
        BitDepth::Eight
    }
}

fn required<'a>(p: &'a Option<PathBuf>, flag: &str) -> Result<&'a Path, Failure> {
    p.as_deref().ok_or_else(|| Failure::invalid(format!("{flag} is required here")))
}

fn window(yaw: f64, pitch: f64, hfov: f64, vfov: Option<f64>, w: usize, h: usize) -> Result<ViewWindow, Failure> {
    match vfov {
        Some(v) => ViewWindow::from_degrees(yaw, pitch, hfov, v, w, h),
        None => ViewWindow::with_aspect(yaw.to_radians(), pitch.to_radians(), hfov.to_radians(), w, h),
    }
    .invalid()
}

pub fn project(a: ProjectArgs) -> Result<(), Failure> {
    let raster = read_png(&a.input).invalid()?;
    let depth = bit_depth(a.bit_depth);
    match a.direction {
        Direction::Pano2persp => {
            let pano = PanoramaImage::new(raster).invalid()?;
            let (w, h) = a.out_size;
            let win = window(a.yaw, a.pitch, a.hfov, a.vfov, w, h)?;
            let (persp, mask) = pano_to_perspective(&pano, &win);
            write_png(&a.output, &persp.raster, depth).runtime()?;
            if let Some(m) = &a.mask {
                write_mask_png(m, &mask.data, w, h).runtime()?;
            }
        }
        Direction::Persp2pano => {
            let (cw, ch) = a.out_size;
            if cw != 2 * ch {
                return Err(Failure::invalid(format!("panorama canvas must be 2:1, got {cw}x{ch}")));
            }
            let win = window(a.yaw, a.pitch, a.hfov, a.vfov, raster.width, raster.height)?;
            let canvas = CanvasShape {
                width: cw,
                channels: raster.channels,
            };
            let (pano, covered) = perspective_to_pano(&PerspectiveImage::new(raster), &win, canvas).invalid()?;
            write_png(&a.output, pano.raster(), depth).runtime()?;
            if let Some(m) = &a.mask {
                write_mask_png(m, &covered, cw, ch).runtime()?;
            }
        }
    }
    Ok(())
}

pub fn keyframes(a: KeyframesArgs) -> Result<(), Failure> {
    let pano = PanoramaImage::new(read_png(&a.input).invalid()?).invalid()?;
    let (w, h) = a.out_size;
    let hfov = a.hfov.to_radians();
    let pairs = match a.mode {
        PairMode::Neighbor => build_neighboring_pairs(&pano, a.views, a.overlap, hfov, w, h).invalid()?,
        PairMode::Walkin => {
            let pano_depth = read_depth(required(&a.depth, "--depth")?, a.max_depth).invalid()?;
            let win = ViewWindow::with_aspect(a.yaw.to_radians(), a.pitch.to_radians(), hfov, w, h).invalid()?;
            let depth = window_depth(&pano_depth, &win.pose(Vector3::zeros()), &win.intrinsics()).invalid()?;
            vec![build_walkin_pair(&pano, &depth, &win, a.walk_ratio, AxisDepth::CentralPixel).invalid()?]
        }
    };
    let mut listing = Vec::with_capacity(pairs.len());
    for (i, p) in pairs.iter().enumerate() {
        let name = format!("pair_{i:03}");
        let dir = a.output.join(&name);
        write_png(&dir.join("source.png"), &p.source.raster, BitDepth::Eight).runtime()?;
        write_png(&dir.join("target.png"), &p.target.raster, BitDepth::Eight).runtime()?;
        write_mask_png(&dir.join("inpaint_mask.png"), &p.target_inpaint_mask, w, h).runtime()?;
        write_poses(&dir.join("poses.json"), &[(p.source_pose, p.intrinsics), (p.target_pose, p.intrinsics)]).runtime()?;
        listing.push(json!({
            "name": name,
            "relation": p.relation,
            "inpaint_pixels": p.inpaint_area(),
            "source": format!("{name}/source.png"),
            "target": format!("{name}/target.png"),
            "inpaint_mask": format!("{name}/inpaint_mask.png"),
            "poses": format!("{name}/poses.json"),
        }));
    }
    write_json(&a.output.join("pairs.json"), &listing).runtime()?;
    println!("{} pair(s) written to {}", pairs.len(), a.output.display());
    Ok(())
}

pub fn trajectory(a: TrajectoryArgs) -> Result<(), Failure> {
    let out: Vec<(CameraPose, CameraIntrinsics)> = match a.mode {
        TrajectoryMode::Interpolate | TrajectoryMode::Upsample => {
            let keys = read_poses(required(&a.poses, "--poses")?).invalid()?;
            if keys.len() < 2 {
                return Err(Failure::invalid(format!("need at least 2 keyposes, got {}", keys.len())));
            }
            let k = keys[0].1;
            let poses: Vec<CameraPose> = keys.iter().map(|(p, _)| *p).collect();
            let list = if a.mode == TrajectoryMode::Interpolate {
                if a.frames < 2 {
                    return Err(Failure::invalid("--frames must be at least 2"));
                }
                let mut list = vec![poses[0]];
                for w in poses.windows(2) {
                    list.extend(interpolate_poses(&w[0], &w[1], a.frames).into_iter().skip(1));
                }
                list
            } else {
                let spec = TrajectorySpec::uniform(poses, DEFAULT_FRAME_RATE).invalid()?;
                upsample_trajectory(&spec, a.max_rotation.to_radians(), a.max_translation).invalid()?.poses()
            };
            list.into_iter().map(|p| (p, k)).collect()
        }
        TrajectoryMode::Star => {
            let depth = read_depth(required(&a.depth, "--depth")?, a.max_depth).invalid()?;
            let (w, h) = a.out_size;
            let hfov = a.hfov.to_radians();
            let k = CameraIntrinsics::from_fov(hfov, vfov_from_aspect(hfov, w, h), w, h).invalid()?;
            let spec =
                generate_star_trajectory(&depth, Vector3::from(a.center), a.directions, a.margin, &StarOptions::default())
                    .invalid()?;
            spec.poses().into_iter().map(|p| (p, k)).collect()
        }
    };
    write_poses(&a.output, &out).runtime()?;
    println!("{} pose(s) written to {}", out.len(), a.output.display());
    Ok(())
}

pub fn raymap(a: RaymapArgs, cache: Option<PathBuf>) -> Result<(), Failure> {
    let poses = read_poses(&a.poses).invalid()?;
    let Some(&(_, k0)) = poses.first() else {
        return Err(Failure::invalid("pose file is empty"));
    };
    if poses.iter().any(|(_, k)| *k != k0) {
        log::warn!("pose intrinsics differ; using those of the first pose");
    }
    let k = scale_intrinsics(&k0, a.out_size);
    let list: Vec<CameraPose> = poses.iter().map(|(p, _)| *p).collect();
    let mut vol = stack_raymaps(&list, &k, a.out_size).invalid()?;
    if a.normalized {
        vol.frames = vol.frames.iter().map(|f| f.normalized()).collect();
    }
    let sidecar = RaymapSidecar {
        width: a.out_size.0,
        height: a.out_size.1,
        frames: list.len(),
        channels_per_frame: 6,
        normalized: a.normalized,
        intrinsics: k,
        poses: list.iter().map(|p| PoseRecord::new(p, k)).collect(),
    };
    let mut text = serde_json::to_string_pretty(&sidecar).runtime()?;
    text.push('\n');
    let bytes = cached_plkr(cache.as_deref(), &text, &vol)?;
    if let Some(dir) = a.output.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).runtime()?;
    }
    fs::write(&a.output, bytes).runtime()?;
    fs::write(a.output.with_extension("json"), text).runtime()?;
    Ok(())
}

fn make_denoiser(spec: &str) -> Result<Box<dyn Denoiser>, Failure> {
    if spec == "stub" {
        return Ok(Box::new(StubDenoiser));
    }
    if let Some(path) = spec.strip_prefix("oracle:") {
        let path = Path::new(path);
        let files = if path.is_dir() {
            list_pngs(path).invalid()?
        } else {
            vec![path.to_path_buf()]
        };
        if files.is_empty() {
            return Err(Failure::invalid(format!("no PNG targets in {}", path.display())));
        }
        let targets = files
            .iter()
            .map(|f| read_png(f).map(|r| Latent::from_raster(&r)))
            .collect::<Result<Vec<_>, _>>()
            .invalid()?;
        return Ok(Box::new(OracleDenoiser::new(targets)));
    }
    if let Some(addr) = spec.strip_prefix("external:") {
        return Ok(Box::new(ExternalDenoiser::connect(addr).runtime()?));
    }
    Err(Failure::invalid(format!(
        "unknown denoiser {spec:?}; use stub, oracle:<path> or external:<address>"
    )))
}

fn read_mask(path: &Path, width: usize, height: usize) -> Result<Vec<bool>, Failure> {
    let (w, h, m) = read_mask_png(path).invalid()?;
    if (w, h) != (width, height) {
        return Err(Failure::invalid(format!(
            "mask {} is {w}x{h}, expected {width}x{height}",
            path.display()
        )));
    }
    Ok(m)
}

pub fn sample(a: SampleArgs) -> Result<(), Failure> {
    let mut schedule = make_schedule(a.steps, a.beta_min, a.beta_max)?;
    if a.zero_variance {
        schedule = schedule.zero_variance();
    }
    let denoiser = make_denoiser(&a.denoiser)?;
    let depth = bit_depth(a.bit_depth);
    match a.mode {
        SampleMode::Panorama => {
            let known = Latent::from_raster(&read_png(required(&a.known, "--known")?).invalid()?);
            let mask = match &a.mask {
                Some(p) => read_mask(p, known.width, known.height)?,
                None => vec![false; known.pixels()],
            };
            let out = panorama_outpaint_sample(&*denoiser, &known, &mask, &schedule, a.cycle_interval, a.seed)?;
            write_png(&a.output, &out.latent.to_raster(), depth).runtime()?;
        }
        SampleMode::Video => {
            let poses: Vec<CameraPose> =
                read_poses(required(&a.poses, "--poses")?).invalid()?.into_iter().map(|(p, _)| p).collect();
            if poses.len() < 2 {
                return Err(Failure::invalid("video sampling needs at least 2 frame poses"));
            }
            let source = read_png(required(&a.source, "--source")?).invalid()?;
            let target = read_png(required(&a.target, "--target")?).invalid()?;
            if !source.same_shape(&target) {
                return Err(Failure::invalid("source and target keyframes differ in shape"));
            }
            let unknown = match &a.target_mask {
                Some(p) => read_mask(p, target.width, target.height)?,
                None => vec![false; target.width * target.height],
            };
            let anchors = [
                Anchor {
                    frame: 0,
                    clean: Latent::from_raster(&source),
                    known: vec![true; source.width * source.height],
                },
                Anchor {
                    frame: poses.len() - 1,
                    clean: Latent::from_raster(&target),
                    known: unknown.iter().map(|u| !u).collect(),
                },
            ];
            let raymaps = match &a.raymaps {
                Some(p) => Some(read_plkr(fs::File::open(p).invalid()?).invalid()?),
                None => None,
            };
            let features = (stub_features(&source, a.feature_dim), stub_features(&target, a.feature_dim));
            let req = VideoRequest {
                frame_poses: &poses,
                anchors: &anchors,
                raymaps: raymaps.as_ref(),
                features: Some((&features.0, &features.1)),
            };
            let cfg = SpatialConfig {
                tau_t: a.tau_t,
                tau_q: a.tau_q,
                mode: match a.weight_mode {
                    WeightArg::Literal => WeightMode::Literal,
                    WeightArg::Blend => WeightMode::Blend,
                },
                seed: a.seed,
            };
            let out = spatial_diffusion_sample(&*denoiser, &schedule, &req, &cfg)?;
            for (i, f) in out.frames.iter().enumerate() {
                write_png(&a.output.join(format!("frame_{i:03}.png")), &f.to_raster(), depth).runtime()?;
            }
            write_json(&a.output.join("weights.json"), &out.weights).runtime()?;
            println!("{} frame(s) written to {}", out.frames.len(), a.output.display());
        }
    }
    Ok(())
}

fn mean(xs: &[f64]) -> Option<f64> {
    (!xs.is_empty()).then(|| xs.iter().sum::<f64>() / xs.len() as f64)
}

fn image_rows(a: &EvalArgs) -> Result<Vec<ReportRow>, Failure> {
    let (want_psnr, want_ssim) = (a.metric.contains(&MetricArg::Psnr), a.metric.contains(&MetricArg::Ssim));
    let reference = required(&a.reference, "--reference")?;
    let candidate = required(&a.candidate, "--candidate")?;
    let (refs, cands) = (list_pngs(reference).invalid()?, list_pngs(candidate).invalid()?);
    let names = |v: &[PathBuf]| v.iter().map(|p| p.file_name().map(|n| n.to_owned())).collect::<Vec<_>>();
    if refs.is_empty() || names(&refs) != names(&cands) {
        return Err(Failure::invalid(format!(
            "{} and {} must hold the same non-empty set of PNG names",
            reference.display(),
            candidate.display()
        )));
    }
    let mut rows = Vec::with_capacity(refs.len() + 1);
    for (r, c) in refs.iter().zip(&cands) {
        let (x, y) = (read_png(r).invalid()?, read_png(c).invalid()?);
        rows.push(ReportRow {
            name: r.file_name().unwrap_or_default().to_string_lossy().into_owned(),
            frames: 1,
            psnr: if want_psnr { Some(psnr(&x, &y, a.peak)?) } else { None },
            ssim: if want_ssim { Some(ssim(&x, &y)?) } else { None },
            ..Default::default()
        });
    }
    let collect = |f: fn(&ReportRow) -> Option<f64>| mean(&rows.iter().filter_map(f).collect::<Vec<_>>());
    let summary = ReportRow {
        name: "mean".into(),
        frames: rows.len(),
        psnr: collect(|r| r.psnr),
        ssim: collect(|r| r.ssim),
        ..Default::default()
    };
    rows.push(summary);
    Ok(rows)
}

pub fn eval(a: EvalArgs) -> Result<(), Failure> {
    let mut rows = Vec::new();
    if a.metric.contains(&MetricArg::Psnr) || a.metric.contains(&MetricArg::Ssim) {
        rows.extend(image_rows(&a)?);
    }
    if a.metric.contains(&MetricArg::Mtsed) {
        let sets: Vec<Correspondences> = read_json(required(&a.matches, "--matches")?).invalid()?;
        let poses = read_poses(required(&a.poses, "--poses")?).invalid()?;
        if poses.len() < 2 || sets.len() + 1 != poses.len() {
            return Err(Failure::invalid(format!(
                "{} correspondence sets for {} poses; expected one per consecutive pair",
                sets.len(),
                poses.len()
            )));
        }
        let k = poses[0].1;
        let mut pairs = Vec::with_capacity(sets.len());
        for (i, set) in sets.into_iter().enumerate() {
            set.check_bounds(&poses[i].1, &poses[i + 1].1)?;
            pairs.push((set, poses[i].0.relative_pose(&poses[i + 1].0)));
        }
        let (fraction, per_pair) = mtsed_sequence(&pairs, &k, a.t_error, a.t_match)?;
        for (i, p) in per_pair.iter().enumerate() {
            log::info!("pair {i}: median {:.4} px over {} matches, pass={}", p.median, p.count, p.pass);
        }
        rows.push(ReportRow {
            name: "sequence".into(),
            frames: poses.len(),
            mtsed: Some(fraction),
            ..Default::default()
        });
    }
    if a.metric.contains(&MetricArg::Fvd) {
        let real = read_feat_file(required(&a.real, "--real")?).invalid()?;
        let generated = read_feat_file(required(&a.generated, "--generated")?).invalid()?;
        let fvd = frechet_distance(&feature_distribution(&real)?, &feature_distribution(&generated)?)?;
        rows.push(ReportRow {
            name: "fvd".into(),
            frames: generated.len(),
            fvd: Some(fvd),
            ..Default::default()
        });
    }
    let csv = render_report(&rows, ReportFormat::Csv)?;
    print!("{}", String::from_utf8_lossy(&csv));
    if let Some(dir) = &a.output_dir {
        for f in [ReportFormat::Csv, ReportFormat::Json] {
            emit_report(&rows, f, &dir.join(format!("report.{}", f.extension())))?;
        }
    }
    Ok(())
}

fn parse_stage(name: &str) -> Result<Stage, Failure> {
    Stage::ALL
        .iter()
        .copied()
        .find(|s| s.name() == name.trim())
        .ok_or_else(|| Failure::invalid(format!("unknown stage {name:?}")))
}

pub fn pipeline(a: PipelineArgs, cache: Option<PathBuf>) -> Result<(), Failure> {
    let mut cfg = PipelineConfig::load(&a.config)?;
    if let Some(dir) = a.output_dir {
        cfg.output_dir = dir;
    }
    if let Some(seed) = a.seed {
        cfg.seed = seed;
    }
    if let Some(stages) = &a.stages {
        cfg.stages = stages.iter().map(|s| parse_stage(s)).collect::<Result<_, _>>()?;
    }
    cfg.validate()?;
    let manifest = run_pipeline(&cfg, &RunOptions { cache_dir: cache })?;
    for s in &manifest.stages {
        println!("{:<10} {} file(s)", s.stage.name(), s.outputs.len());
    }
    println!("manifest: {}", cfg.output_dir.join(pano2video::pipeline::MANIFEST_FILE).display());
    Ok(())
}

pub fn sweep(a: SweepArgs) -> Result<(), Failure> {
    let cfg = PipelineConfig::load(&a.config)?;
    let (tau_t, tau_q) = (parse_grid(&a.tau_t)?, parse_grid(&a.tau_q)?);
    let format: ReportFormat = match &a.format {
        Some(f) => f.parse()?,
        None => a
            .output
            .extension()
            .and_then(|e| e.to_str())
            .unwrap_or("")
            .parse()
            .map_err(|_| Failure::invalid("cannot infer the report format; pass --format"))?,
    };
    let result = run_sweep(&cfg, &tau_t, &tau_q)?;
    emit_sweep(&result, format, &a.output)?;
    let (t, q, s) = result.best;
    println!("best tau_t={t} tau_q={q} score={s:.6}");
    Ok(())
}
