use std::path::{Path, PathBuf};

use humimic_core::critic::{
    critic_widths, train_critic_step, Adam, AdamConfig, FeatureStats, LossKind, Mlp, DEFAULT_HIDDEN,
};
use humimic_core::harness::{
    emit_report, summarize, train_adversarial, DatasetSpec, SUMMARY_WINDOW,
};
use humimic_core::mocap::{
    parse_bvh_with, parse_robot_skeleton, read_motion, write_motion, BvhOptions,
};
use humimic_core::postprocess::{ema_filter, ema_filter_targets, resample};
use humimic_core::retarget::SourceAxes;
use humimic_core::{
    bind, effector_errors, solve_sequence, BindingConfig, IkMapping, Retargeter, RobotSkeleton,
    TargetFrame,
};
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::config::{FilterOrder, PipelineConfig};
use crate::fail::{input, runtime, CliResult, Context};
use crate::{
    Axes, BenchArgs, Cli, Command, FeaturesArgs, FilterArgs, IkArgs, RetargetArgs, TrainCriticArgs,
};

/// IK goals plus what is needed to solve them without the source files.
#[derive(Debug, Serialize, Deserialize)]
pub struct TargetFile {
    pub frame_time: f64,
    pub mapping: IkMapping,
    pub frames: Vec<TargetFrame>,
}

struct Ctx {
    cfg: PipelineConfig,
    dry_run: bool,
}

impl Ctx {
    fn out_dir(&self) -> PathBuf {
        self.cfg
            .paths
            .out
            .clone()
            .unwrap_or_else(|| PathBuf::from("out"))
    }

    fn create_out(&self) -> CliResult<PathBuf> {
        let dir = self.out_dir();
        std::fs::create_dir_all(&dir)
            .map_err(|e| runtime(format!("cannot create {}: {e}", dir.display())))?;
        Ok(dir)
    }
}

pub fn run(cli: Cli) -> CliResult<u8> {
    let mut cfg = match &cli.global.config {
        Some(p) => PipelineConfig::load(p)?,
        None => PipelineConfig::default(),
    };
    if let Some(seed) = cli.global.seed {
        cfg.seed = seed;
    }
    if let Some(out) = cli.global.out {
        cfg.paths.out = Some(out);
    }
    let seed_flag = cli.global.seed;
    let ctx = Ctx {
        cfg,
        dry_run: cli.global.dry_run,
    };
    match cli.command {
        Command::Retarget(a) => cmd_retarget(ctx, a),
        Command::Ik(a) => cmd_ik(ctx, a),
        Command::Filter(a) => cmd_filter(ctx, a),
        Command::Features(a) => cmd_features(ctx, a),
        Command::Bench(a) => cmd_bench(ctx, a, seed_flag),
        Command::TrainCritic(a) => cmd_train_critic(ctx, a),
    }
}

fn require(path: Option<PathBuf>, what: &str) -> CliResult<PathBuf> {
    let p = path.ok_or_else(|| {
        input(format!(
            "no {what} file given (flag or [paths] in --config)"
        ))
    })?;
    if !p.is_file() {
        return Err(input(format!("{what} file not found: {}", p.display())));
    }
    Ok(p)
}

fn read_text(path: &Path) -> CliResult<String> {
    std::fs::read_to_string(path).map_err(|e| input(format!("cannot read {}: {e}", path.display())))
}

fn load_robot(path: Option<PathBuf>) -> CliResult<RobotSkeleton> {
    let p = require(path, "robot")?;
    parse_robot_skeleton(&read_text(&p)?).input_ctx(p.display())
}

fn check_alpha(alpha: Option<f64>) -> CliResult<()> {
    match alpha {
        Some(a) if !(a > 0.0 && a <= 1.0) => {
            Err(input(format!("alpha must lie in (0, 1], got {a}")))
        }
        _ => Ok(()),
    }
}

fn check_fps(fps: Option<f64>) -> CliResult<()> {
    match fps {
        Some(f) if !(f > 0.0 && f.is_finite()) => {
            Err(input(format!("fps must be positive, got {f}")))
        }
        _ => Ok(()),
    }
}

fn write_file(path: &Path, contents: &str) -> CliResult<()> {
    std::fs::write(path, contents)
        .map_err(|e| runtime(format!("cannot write {}: {e}", path.display())))
}

fn cmd_retarget(mut ctx: Ctx, a: RetargetArgs) -> CliResult<u8> {
    let paths = &ctx.cfg.paths;
    let bvh = require(a.bvh.or(paths.bvh.clone()), "bvh")?;
    let robot_path = a.robot.or(paths.robot.clone());
    let binding = require(a.binding.or(paths.binding.clone()), "binding")?;
    let robot = load_robot(robot_path)?;
    let post = &mut ctx.cfg.postprocess;
    post.scale = a.scale.unwrap_or(post.scale);
    post.filter_order = a.filter_order.unwrap_or(post.filter_order);
    post.alpha = a.alpha.or(post.alpha);
    post.fps = a.fps.or(post.fps);
    check_alpha(post.alpha)?;
    check_fps(post.fps)?;
    if !(post.scale > 0.0 && post.scale.is_finite()) {
        return Err(input(format!("scale must be positive, got {}", post.scale)));
    }
    if let Some(axes) = a.source_axes {
        ctx.cfg.retarget.source_axes = match axes {
            Axes::ZUp => SourceAxes::ZUp,
            Axes::YUp => SourceAxes::YUp,
        };
    }

    let (source, seq) = parse_bvh_with(&read_text(&bvh)?, &BvhOptions { scale: post.scale })
        .input_ctx(bvh.display())?;
    let bcfg = BindingConfig::load(&binding).input_ctx(binding.display())?;
    let prim = bind(&source, &robot, &bcfg).input_ctx("binding")?;
    let retargeter =
        Retargeter::new(&source, &prim, &robot, &ctx.cfg.retarget).input_ctx("retarget setup")?;
    if ctx.dry_run {
        println!(
            "ok: {} frames, {} key joints, {} effectors",
            seq.frames.len(),
            prim.len(),
            robot.end_effectors.len()
        );
        return Ok(0);
    }
    if seq.frames.is_empty() {
        return Err(input(format!("{}: no motion frames", bvh.display())));
    }
    let mut targets = retargeter.retarget_sequence(&seq).runtime_ctx("retarget")?;
    if let (FilterOrder::Pre, Some(alpha)) =
        (ctx.cfg.postprocess.filter_order, ctx.cfg.postprocess.alpha)
    {
        targets = ema_filter_targets(&targets, alpha).runtime_ctx("filter")?;
    }
    let file = TargetFile {
        frame_time: seq.frame_time,
        mapping: retargeter.mapping(),
        frames: targets,
    };
    solve_and_write(&ctx, &robot, &file)
}

fn cmd_ik(ctx: Ctx, a: IkArgs) -> CliResult<u8> {
    let robot = load_robot(a.robot.or(ctx.cfg.paths.robot.clone()))?;
    let path = require(Some(a.targets), "targets")?;
    let file: TargetFile = serde_json::from_str(&read_text(&path)?)
        .map_err(|e| input(format!("{}: {e}", path.display())))?;
    if !(file.frame_time > 0.0) {
        return Err(input(format!(
            "{}: frame_time must be positive",
            path.display()
        )));
    }
    let joints = robot.skeleton.joints.len();
    if let Some(j) = file
        .mapping
        .key_joints
        .iter()
        .chain(&file.mapping.effectors)
        .find(|&&j| j >= joints)
    {
        return Err(input(format!(
            "{}: joint index {j} out of range for robot",
            path.display()
        )));
    }
    check_alpha(ctx.cfg.postprocess.alpha)?;
    check_fps(ctx.cfg.postprocess.fps)?;
    if ctx.dry_run {
        println!("ok: {} target frames", file.frames.len());
        return Ok(0);
    }
    solve_and_write(&ctx, &robot, &file)
}

/// Solves, post-processes and writes `targets.json`, `motion.csv` and
/// `ik_report.csv`.
fn solve_and_write(ctx: &Ctx, robot: &RobotSkeleton, file: &TargetFile) -> CliResult<u8> {
    let ik = &ctx.cfg.ik;
    let sol = solve_sequence(
        &file.frames,
        &robot.neutral,
        robot,
        &file.mapping,
        &ik.weights,
        &ik.options,
        file.frame_time,
    )
    .runtime_ctx("ik")?;

    let mut report =
        String::from("frame,c1,c2,c3,total,converged,iterations,ee_error_mean,ee_error_max\n");
    let (mut ee_sum, mut ee_count, mut ee_max) = (0.0, 0usize, 0.0f64);
    for (i, (r, (target, frame))) in sol
        .reports
        .iter()
        .zip(file.frames.iter().zip(&sol.motion.frames))
        .enumerate()
    {
        let errs = effector_errors(target, &frame.theta, robot).runtime_ctx("effector error")?;
        let fmax = errs.iter().copied().fold(0.0, f64::max);
        let fmean = if errs.is_empty() {
            0.0
        } else {
            errs.iter().sum::<f64>() / errs.len() as f64
        };
        ee_sum += errs.iter().sum::<f64>();
        ee_count += errs.len();
        ee_max = ee_max.max(fmax);
        let c = r.cost;
        report.push_str(&format!(
            "{i},{},{},{},{},{},{},{fmean},{fmax}\n",
            c.c1, c.c2, c.c3, c.total, r.converged, r.iterations
        ));
    }

    let post = &ctx.cfg.postprocess;
    let mut motion = sol.motion.clone();
    if let (FilterOrder::Post, Some(alpha)) = (post.filter_order, post.alpha) {
        motion = ema_filter(&motion, alpha).runtime_ctx("filter")?;
    }
    if let Some(fps) = post.fps {
        motion = resample(&motion, 1.0 / fps).runtime_ctx("resample")?;
    }

    let dir = ctx.create_out()?;
    let targets_json = serde_json::to_string(file).map_err(|e| runtime(e.to_string()))?;
    write_file(&dir.join("targets.json"), &targets_json)?;
    write_motion(&motion, dir.join("motion.csv")).runtime_ctx("write motion")?;
    write_file(&dir.join("ik_report.csv"), &report)?;

    let c1: Vec<f64> = sol.reports.iter().map(|r| r.cost.c1).collect();
    let n = c1.len().max(1) as f64;
    println!("frames: {}", sol.reports.len());
    println!(
        "c1 mean: {:.3e}  max: {:.3e}",
        c1.iter().sum::<f64>() / n,
        c1.iter().copied().fold(0.0, f64::max)
    );
    println!("converged: {:.1}%", 100.0 * sol.converged_fraction());
    println!(
        "ee error mean: {:.3e} m  max: {:.3e} m",
        ee_sum / ee_count.max(1) as f64,
        ee_max
    );
    println!("wrote {}", dir.display());
    Ok(0)
}

fn cmd_filter(ctx: Ctx, a: FilterArgs) -> CliResult<u8> {
    let alpha = a.alpha.or(ctx.cfg.postprocess.alpha);
    let fps = a.fps.or(ctx.cfg.postprocess.fps);
    check_alpha(alpha)?;
    check_fps(fps)?;
    let path = require(Some(a.motion), "motion")?;
    let mut motion = read_motion(&path, None).input_ctx(path.display())?;
    if ctx.dry_run {
        println!("ok: {} frames", motion.len());
        return Ok(0);
    }
    if let Some(alpha) = alpha {
        motion = ema_filter(&motion, alpha).runtime_ctx("filter")?;
    }
    if let Some(fps) = fps {
        motion = resample(&motion, 1.0 / fps).runtime_ctx("resample")?;
    }
    let dir = ctx.create_out()?;
    write_motion(&motion, dir.join("filtered.csv")).runtime_ctx("write motion")?;
    println!(
        "wrote {} frames to {}",
        motion.len(),
        dir.join("filtered.csv").display()
    );
    Ok(0)
}

#[derive(Debug, Serialize, Deserialize)]
struct StatsFile {
    n: usize,
    dim: usize,
    mean: Vec<f64>,
    std: Vec<f64>,
}

fn write_matrix(path: &Path, rows: &Array2<f64>) -> CliResult<()> {
    let mut text = (0..rows.ncols())
        .map(|k| format!("f{k}"))
        .collect::<Vec<_>>()
        .join(",");
    text.push('\n');
    for row in rows.rows() {
        text.push_str(
            &row.iter()
                .map(|v| v.to_string())
                .collect::<Vec<_>>()
                .join(","),
        );
        text.push('\n');
    }
    write_file(path, &text)
}

fn read_matrix(path: &Path) -> CliResult<Array2<f64>> {
    let mut reader =
        csv::Reader::from_path(path).map_err(|e| input(format!("{}: {e}", path.display())))?;
    let width = reader
        .headers()
        .map_err(|e| input(format!("{}: {e}", path.display())))?
        .len();
    let mut values = Vec::new();
    let mut rows = 0;
    for (i, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| input(format!("{}: {e}", path.display())))?;
        for field in rec.iter() {
            let v: f64 = field.trim().parse().map_err(|_| {
                input(format!(
                    "{} row {}: bad number '{field}'",
                    path.display(),
                    i + 2
                ))
            })?;
            if !v.is_finite() {
                return Err(input(format!(
                    "{} row {}: non-finite value",
                    path.display(),
                    i + 2
                )));
            }
            values.push(v);
        }
        rows += 1;
    }
    if rows == 0 || width == 0 {
        return Err(input(format!("{}: no feature rows", path.display())));
    }
    Array2::from_shape_vec((rows, width), values)
        .map_err(|e| input(format!("{}: {e}", path.display())))
}

fn cmd_features(ctx: Ctx, a: FeaturesArgs) -> CliResult<u8> {
    let robot = load_robot(a.robot.or(ctx.cfg.paths.robot.clone()))?;
    let path = require(Some(a.motion), "motion")?;
    let motion = read_motion(&path, None).input_ctx(path.display())?;
    if motion.is_empty() {
        return Err(input(format!("{}: empty motion", path.display())));
    }
    if motion.dof() != robot.dof() {
        return Err(input(format!(
            "{}: motion has {} joints, robot has {}",
            path.display(),
            motion.dof(),
            robot.dof()
        )));
    }
    let rows =
        humimic_core::critic::transition_matrix(&motion, &robot, a.n).input_ctx("features")?;
    let stats = FeatureStats::from_rows(&rows).runtime_ctx("feature statistics")?;
    if ctx.dry_run {
        println!("ok: {} transitions of width {}", rows.nrows(), rows.ncols());
        return Ok(0);
    }
    let dir = ctx.create_out()?;
    write_matrix(&dir.join("features.csv"), &rows)?;
    let sidecar = StatsFile {
        n: a.n,
        dim: rows.ncols(),
        mean: stats.mean,
        std: stats.std,
    };
    write_file(
        &dir.join("features_stats.json"),
        &serde_json::to_string_pretty(&sidecar).map_err(|e| runtime(e.to_string()))?,
    )?;
    println!(
        "wrote {} transitions of width {}",
        rows.nrows(),
        rows.ncols()
    );
    Ok(0)
}

fn parse_losses(text: &str) -> CliResult<Vec<LossKind>> {
    text.split(',')
        .map(|s| {
            s.trim()
                .parse::<LossKind>()
                .map_err(|e| input(format!("--losses: {e}")))
        })
        .collect()
}

/// `a..b` (inclusive), `a..=b`, or `a,b,c`.
fn parse_seeds(text: &str) -> CliResult<Vec<u64>> {
    let bad = || input(format!("--seeds: cannot parse '{text}'"));
    if let Some((a, b)) = text.split_once("..") {
        let b = b.strip_prefix('=').unwrap_or(b);
        let (a, b): (u64, u64) = (
            a.trim().parse().map_err(|_| bad())?,
            b.trim().parse().map_err(|_| bad())?,
        );
        if a > b {
            return Err(bad());
        }
        return Ok((a..=b).collect());
    }
    text.split(',')
        .map(|s| s.trim().parse().map_err(|_| bad()))
        .collect()
}

fn cmd_bench(ctx: Ctx, a: BenchArgs, seed_flag: Option<u64>) -> CliResult<u8> {
    let mut spec = ctx.cfg.bench.clone();
    if let Some(d) = &a.dataset {
        spec.dataset = DatasetSpec::parse(d).input_ctx("--dataset")?;
    }
    if let Some(l) = &a.losses {
        spec.losses = parse_losses(l)?;
    }
    if let Some(s) = a.steps {
        spec.steps = s;
    }
    match (&a.seeds, seed_flag) {
        (Some(s), _) => spec.seeds = parse_seeds(s)?,
        (None, Some(s)) => spec.seeds = vec![s],
        (None, None) => {}
    }
    spec.validate().input_ctx("benchmark spec")?;
    if let DatasetSpec::MotionFeatures(p) = &spec.dataset {
        if !p.is_file() {
            return Err(input(format!(
                "motion_features manifest not found: {}",
                p.display()
            )));
        }
    }
    if ctx.dry_run {
        humimic_core::harness::make_dataset(&spec.dataset).input_ctx("dataset")?;
        println!(
            "ok: {} runs of {} steps",
            spec.losses.len() * spec.seeds.len(),
            spec.steps
        );
        return Ok(0);
    }
    let reports = train_adversarial(&spec).runtime_ctx("bench")?;
    let dir = ctx.create_out()?;
    emit_report(&reports, &dir).runtime_ctx("report")?;
    for s in summarize(&reports, SUMMARY_WINDOW) {
        let cov = s
            .coverage
            .map(|c| format!("  coverage {c}"))
            .unwrap_or_default();
        println!(
            "{:8} runs {}  diverged {}  output_range {:.4}  reward_std {:.4}{cov}",
            s.loss.name(),
            s.runs,
            s.diverged,
            s.stability.output_range,
            s.stability.reward_std_max
        );
    }
    let diverged = reports.iter().filter(|r| r.diverged).count();
    if diverged > 0 {
        eprintln!("{diverged} run(s) diverged");
        return Ok(crate::fail::EXIT_RUNTIME);
    }
    Ok(0)
}

fn parse_widths(text: &str) -> CliResult<Vec<usize>> {
    text.split(',')
        .map(|s| match s.trim().parse::<usize>() {
            Ok(w) if w > 0 => Ok(w),
            _ => Err(input(format!("--hidden: bad width '{s}'"))),
        })
        .collect()
}

fn sample_rows<R: Rng>(data: &Array2<f64>, n: usize, rng: &mut R) -> Array2<f64> {
    let idx: Vec<usize> = (0..n).map(|_| rng.gen_range(0..data.nrows())).collect();
    data.select(ndarray::Axis(0), &idx)
}

fn cmd_train_critic(ctx: Ctx, a: TrainCriticArgs) -> CliResult<u8> {
    let mut loss = ctx.cfg.loss;
    if let Some(l) = &a.loss {
        loss.kind = l.parse().map_err(|e| input(format!("--loss: {e}")))?;
    }
    loss.validate().input_ctx("loss config")?;
    let hidden = match &a.hidden {
        Some(h) => parse_widths(h)?,
        None => DEFAULT_HIDDEN.to_vec(),
    };
    let lr = a.lr.unwrap_or(AdamConfig::default().lr);
    if !(lr > 0.0 && lr.is_finite()) || a.batch == 0 {
        return Err(input("learning rate and batch must be positive"));
    }
    let real_path = require(Some(a.real), "real features")?;
    let fake_path = require(Some(a.fake), "fake features")?;
    let mut real = read_matrix(&real_path)?;
    let mut fake = read_matrix(&fake_path)?;
    if real.ncols() != fake.ncols() {
        return Err(input(format!(
            "feature widths differ: {} vs {}",
            real.ncols(),
            fake.ncols()
        )));
    }
    if ctx.dry_run {
        println!(
            "ok: {} real / {} fake rows of width {}",
            real.nrows(),
            fake.nrows(),
            real.ncols()
        );
        return Ok(0);
    }
    let stats = FeatureStats::from_rows(&real).runtime_ctx("feature statistics")?;
    stats.normalize(&mut real).runtime_ctx("normalize")?;
    stats.normalize(&mut fake).runtime_ctx("normalize")?;

    let stream = |k: u64| {
        let mut r = ChaCha8Rng::seed_from_u64(ctx.cfg.seed);
        r.set_stream(k);
        r
    };
    let (mut init_rng, mut data_rng, mut pen_rng) = (stream(1), stream(2), stream(3));
    let mut net = Mlp::new(&critic_widths(real.ncols(), &hidden), &mut init_rng)
        .input_ctx("critic widths")?;
    let mut opt = Adam::new(
        &net,
        AdamConfig {
            lr,
            ..Default::default()
        },
    );
    let mut log = String::from("step,loss,d_real_mean,d_fake_mean,penalty\n");
    let mut diverged = false;
    for step in 0..a.steps {
        let r = sample_rows(&real, a.batch, &mut data_rng);
        let f = sample_rows(&fake, a.batch, &mut data_rng);
        let o = train_critic_step(&mut net, r.view(), f.view(), &loss, &mut opt, &mut pen_rng)
            .runtime_ctx("critic step")?;
        let m = o.metrics;
        log.push_str(&format!(
            "{step},{},{},{},{}\n",
            o.loss, m.d_real_mean, m.d_fake_mean, m.penalty
        ));
        if o.rejected {
            diverged = true;
            break;
        }
    }
    let dir = ctx.create_out()?;
    write_file(&dir.join("critic.json"), &net.to_json())?;
    write_file(&dir.join("critic_log.csv"), &log)?;
    let sidecar = StatsFile {
        n: 0,
        dim: real.ncols(),
        mean: stats.mean,
        std: stats.std,
    };
    write_file(
        &dir.join("critic_stats.json"),
        &serde_json::to_string_pretty(&sidecar).map_err(|e| runtime(e.to_string()))?,
    )?;
    if diverged {
        eprintln!("critic training diverged");
        return Ok(crate::fail::EXIT_RUNTIME);
    }
    println!(
        "trained {} critic for {} steps; wrote {}",
        loss.kind,
        a.steps,
        dir.display()
    );
    Ok(0)
}
