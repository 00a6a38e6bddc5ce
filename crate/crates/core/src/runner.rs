//! Experiment runner: executes one subcommand from a configuration, sweeps
//! seeds in parallel with ordered reduction, writes JSON reports plus CSV
//! time series, and emits the reproducibility manifest.

use std::fs;
use std::io::Write as _;
use std::path::Path;
use std::time::Instant;

use nalgebra::DVector;
use rayon::prelude::*;
use serde_json::json;

use crate::config::ExperimentConfig;
use crate::diagnostics::{
    self, check_eventual_monotone, check_monotone_on_large_sets, check_one_sided_lipschitz,
    cluster_count, contraction_witness, estimate_contraction_constant, gradient_direction_search,
    swift_control, Metric,
};
use crate::error::{Error, Result};
use crate::flow;
use crate::lyapunov;
use crate::manifest::RunManifest;
use crate::measure;
use crate::noise::{derive_member_seed, WienerPath};

/// Environment variable consulted for the default worker count.
pub const WORKERS_ENV: &str = "STOSYNC_WORKERS";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Simulate,
    Lyapunov,
    Gibbs,
    Sync,
    Diam,
    Pullback,
    Cluster,
    Check,
    Control,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Simulate => "simulate",
            Command::Lyapunov => "lyapunov",
            Command::Gibbs => "gibbs",
            Command::Sync => "sync",
            Command::Diam => "diam",
            Command::Pullback => "pullback",
            Command::Cluster => "cluster",
            Command::Check => "check",
            Command::Control => "control",
        }
    }
}

/// Resolve the worker count: explicit config wins, then the environment
/// variable, then all available cores.
pub fn resolve_workers(config_workers: usize) -> usize {
    if config_workers > 0 {
        return config_workers;
    }
    if let Ok(v) = std::env::var(WORKERS_ENV) {
        if let Ok(n) = v.parse::<usize>() {
            if n > 0 {
                return n;
            }
        }
    }
    std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1)
}

fn fmt_f64(v: f64) -> String {
    format!("{v:?}")
}

fn write_csv(dir: &Path, name: &str, header: &str, rows: &[Vec<f64>]) -> Result<()> {
    let mut out = String::with_capacity(rows.len() * 32 + header.len() + 1);
    out.push_str(header);
    out.push('\n');
    for row in rows {
        let mut first = true;
        for v in row {
            if !first {
                out.push(',');
            }
            out.push_str(&fmt_f64(*v));
            first = false;
        }
        out.push('\n');
    }
    let mut f = fs::File::create(dir.join(name))?;
    f.write_all(out.as_bytes())?;
    Ok(())
}

fn write_json(dir: &Path, name: &str, value: &serde_json::Value) -> Result<()> {
    fs::write(dir.join(name), serde_json::to_string_pretty(value)?)?;
    Ok(())
}

/// Execute `command` under `config`, writing outputs and a manifest into
/// `out_dir`. Returns the manifest; per-seed failures are recorded in it
/// (the caller maps them to a nonzero exit).
pub fn run(config: &ExperimentConfig, command: Command, out_dir: &Path) -> Result<RunManifest> {
    fs::create_dir_all(out_dir)?;
    let start = Instant::now();
    let mut manifest = RunManifest::new(command.name(), config);
    let workers = resolve_workers(config.run.workers);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::Config {
            key: "run.workers".into(),
            message: e.to_string(),
        })?;
    pool.install(|| dispatch(config, command, out_dir, &mut manifest))?;
    manifest.wall_clock_seconds = start.elapsed().as_secs_f64();
    manifest.write(out_dir)?;
    Ok(manifest)
}

fn dispatch(
    config: &ExperimentConfig,
    command: Command,
    dir: &Path,
    manifest: &mut RunManifest,
) -> Result<()> {
    match command {
        Command::Simulate => run_simulate(config, dir, manifest),
        Command::Lyapunov => run_lyapunov(config, dir, manifest),
        Command::Gibbs => run_gibbs(config, dir, manifest),
        Command::Sync => run_sync(config, dir, manifest),
        Command::Diam => run_diam(config, dir, manifest),
        Command::Pullback => run_pullback(config, dir, manifest),
        Command::Cluster => run_cluster(config, dir, manifest),
        Command::Check => run_check(config, dir, manifest),
        Command::Control => run_control(config, dir, manifest),
    }
}

fn derived_seeds(config: &ExperimentConfig) -> Vec<u64> {
    (0..config.run.seeds)
        .map(|i| derive_member_seed(config.noise.seed, i as u64))
        .collect()
}

fn run_simulate(config: &ExperimentConfig, dir: &Path, manifest: &mut RunManifest) -> Result<()> {
    let field = config.build_field()?;
    let ispec = config.integrator_spec();
    let sigma = config.noise.sigma;
    let x0s = config.x0_points(field.dim())?;
    let seeds = derived_seeds(config);
    manifest.derived_seeds = seeds.clone();
    let (t0, t1) = (config.run.t0, config.run.t1);
    let dt = ispec.dt;

    type SeedOut = Vec<(String, Vec<Vec<f64>>)>;
    let results: Vec<(usize, std::result::Result<SeedOut, String>)> = seeds
        .par_iter()
        .enumerate()
        .map(|(si, &seed)| {
            let run_one = || -> Result<SeedOut> {
                // An explicit noise.window (model times) wins; otherwise the
                // window covers the run span.
                let (w0, w1) = match config.noise.window {
                    Some([a, b]) => (a.min(t0), b.max(t1)),
                    None => (t0, t1),
                };
                let k0 = (w0 / dt).floor() as i64;
                let k1 = (w1 / dt).ceil() as i64;
                let path =
                    WienerPath::sample(seed, field.noise_dim(), dt, (k0.min(0), k1.max(0)))?;
                let mut files = Vec::new();
                for (mi, x0) in x0s.iter().enumerate() {
                    let traj = flow::evolve(&field, &ispec, sigma, &path, x0, t0, t1)?;
                    let rows: Vec<Vec<f64>> = traj
                        .times
                        .iter()
                        .zip(traj.states.iter())
                        .map(|(t, s)| {
                            let mut row = vec![*t];
                            row.extend(s.iter().copied());
                            row
                        })
                        .collect();
                    files.push((format!("trajectory_s{si}_m{mi}.csv"), rows));
                }
                Ok(files)
            };
            (si, run_one().map_err(|e| e.to_string()))
        })
        .collect();

    let header = {
        let mut h = String::from("t");
        for i in 1..=field.dim() {
            h.push_str(&format!(",x{i}"));
        }
        h
    };
    for (si, res) in results {
        match res {
            Ok(files) => {
                for (name, rows) in files {
                    write_csv(dir, &name, &header, &rows)?;
                    manifest.record_output(dir, &name)?;
                }
            }
            Err(msg) => manifest.seed_errors.push((si, msg)),
        }
    }
    Ok(())
}

fn run_lyapunov(config: &ExperimentConfig, dir: &Path, manifest: &mut RunManifest) -> Result<()> {
    let field = config.build_field()?;
    let ispec = config.integrator_spec();
    let sigma = config.noise.sigma;
    let lcfg = config.lyapunov.clone().unwrap_or_default();
    let t_total = config.run.t1 - config.run.t0;
    let burn_in = if lcfg.burn_in < 0.0 { t_total / 10.0 } else { lcfg.burn_in };
    let x0s = config.x0_points(field.dim())?;
    let x0 = x0s.first().cloned().unwrap_or_else(|| DVector::zeros(field.dim()));
    let seeds = derived_seeds(config);
    manifest.derived_seeds = seeds.clone();

    let results: Vec<(usize, std::result::Result<lyapunov::LyapunovSpectrum, String>)> = seeds
        .par_iter()
        .enumerate()
        .map(|(si, &seed)| {
            let r = lyapunov::spectrum_benettin(
                &field, &ispec, sigma, seed, &x0, lcfg.k, t_total, burn_in, lcfg.qr_every,
            )
            .map_err(|e| e.to_string());
            (si, r)
        })
        .collect();

    let mut replicas = Vec::new();
    for (si, r) in results {
        match r {
            Ok(s) => replicas.push(s),
            Err(msg) => manifest.seed_errors.push((si, msg)),
        }
    }
    if replicas.is_empty() {
        return Err(Error::NumericRange("every replica failed".into()));
    }
    let agg = lyapunov::aggregate_spectra(&replicas)?;
    let twopoint = if lcfg.twopoint {
        Some(lyapunov::top_exponent_twopoint(
            &field,
            &ispec,
            sigma,
            seeds[0],
            &x0,
            lcfg.delta0,
            t_total,
            lcfg.renorm_threshold,
        )?)
    } else {
        None
    };

    let report = json!({
        "exponents": agg.exponents,
        "stderr": agg.std_errors,
        "n_replicas": agg.n_replicas,
        "per_replica": replicas.iter().map(|r| json!({
            "seed": r.seed,
            "exponents": r.exponents,
            "block_std_errors": r.block_std_errors,
            "t_effective": r.t_effective,
        })).collect::<Vec<_>>(),
        "twopoint_top": twopoint,
        "config_hash": manifest.config_hash,
    });
    write_json(dir, "lyapunov.json", &report)?;
    manifest.record_output(dir, "lyapunov.json")?;

    // Running estimates of the first replica, for convergence plots.
    let rows: Vec<Vec<f64>> = replicas[0]
        .history
        .iter()
        .map(|(t, ls)| {
            let mut row = vec![*t];
            row.extend(ls.iter().copied());
            row
        })
        .collect();
    let mut header = String::from("t");
    for i in 1..=lcfg.k {
        header.push_str(&format!(",lambda{i}"));
    }
    write_csv(dir, "lyapunov_running.csv", &header, &rows)?;
    manifest.record_output(dir, "lyapunov_running.csv")?;
    Ok(())
}

fn run_gibbs(config: &ExperimentConfig, dir: &Path, manifest: &mut RunManifest) -> Result<()> {
    let field = config.build_field()?;
    let gcfg = config.gibbs.clone().unwrap_or_default();
    let box_ = gcfg.box_.map(|b| (b[0], b[1]));
    let gibbs = measure::normalize(
        &field,
        config.noise.sigma,
        box_,
        gcfg.points_per_axis,
        gcfg.tail_tol,
    )?;
    let (mean, cov) = gibbs.moments()?;

    // Ball-mass table across the requested sigma ladder.
    let mut sigmas = vec![config.noise.sigma];
    sigmas.extend(gcfg.sigmas.iter().copied().filter(|s| *s != config.noise.sigma));
    let mut table = Vec::new();
    for &s in &sigmas {
        let g = if s == config.noise.sigma {
            gibbs.clone()
        } else {
            measure::normalize(&field, s, box_, gcfg.points_per_axis, gcfg.tail_tol)?
        };
        for &r in &gcfg.ball_radii {
            table.push(json!({"sigma": s, "radius": r, "mass": g.ball_mass(r)?}));
        }
    }

    let report = json!({
        "z": gibbs.z(),
        "log_z": gibbs.log_z(),
        "box": gibbs.quadrature_box(),
        "grid_points_per_axis": gibbs.grid_points_per_axis(),
        "tail_mass_estimate": gibbs.tail_mass_estimate(),
        "mean": mean.iter().copied().collect::<Vec<f64>>(),
        "covariance": (0..field.dim()).map(|i| (0..field.dim()).map(|j| cov[(i,j)]).collect::<Vec<f64>>()).collect::<Vec<_>>(),
        "ball_mass": table,
        "config_hash": manifest.config_hash,
    });
    write_json(dir, "gibbs.json", &report)?;
    manifest.record_output(dir, "gibbs.json")?;

    // Density on a decimated plot grid.
    let (lo, hi) = gibbs.quadrature_box();
    let n = gcfg.plot_points.clamp(16, 1024);
    let dim = field.dim();
    let mut rows = Vec::new();
    let mut header = String::new();
    match dim {
        1 => {
            header.push_str("x1,density");
            for j in 0..n {
                let x = lo + (hi - lo) * j as f64 / (n - 1) as f64;
                let d = gibbs.density(&DVector::from_vec(vec![x]))?;
                rows.push(vec![x, d]);
            }
        }
        2 => {
            header.push_str("x1,x2,density");
            let m = n.min(257);
            for j0 in 0..m {
                let x = lo + (hi - lo) * j0 as f64 / (m - 1) as f64;
                for j1 in 0..m {
                    let y = lo + (hi - lo) * j1 as f64 / (m - 1) as f64;
                    let d = gibbs.density(&DVector::from_vec(vec![x, y]))?;
                    rows.push(vec![x, y, d]);
                }
            }
        }
        _ => {
            header.push_str("x1,x2,x3,density");
            let m = n.min(33);
            for j0 in 0..m {
                let x = lo + (hi - lo) * j0 as f64 / (m - 1) as f64;
                for j1 in 0..m {
                    let y = lo + (hi - lo) * j1 as f64 / (m - 1) as f64;
                    for j2 in 0..m {
                        let z = lo + (hi - lo) * j2 as f64 / (m - 1) as f64;
                        let d = gibbs.density(&DVector::from_vec(vec![x, y, z]))?;
                        rows.push(vec![x, y, z, d]);
                    }
                }
            }
        }
    }
    write_csv(dir, "gibbs_density.csv", &header, &rows)?;
    manifest.record_output(dir, "gibbs_density.csv")?;
    Ok(())
}

fn sync_csv_rows(report: &diagnostics::SyncReport) -> Vec<Vec<f64>> {
    report
        .checkpoints
        .iter()
        .enumerate()
        .map(|(i, t)| {
            let q = &report.distance_quantiles[i];
            vec![*t, q.q05, q.q25, q.q50, q.q75, q.q95, report.exceed_prob[i].estimate]
        })
        .collect()
}

fn run_sync(config: &ExperimentConfig, dir: &Path, manifest: &mut RunManifest) -> Result<()> {
    let field = config.build_field()?;
    let ispec = config.integrator_spec();
    let scfg = config.sync.clone().ok_or_else(|| Error::Config {
        key: "sync".into(),
        message: "sync command needs a [sync] block".into(),
    })?;
    let t_total = config.run.t1 - config.run.t0;
    let mut report = diagnostics::two_point_sync(
        &field,
        &ispec,
        config.noise.sigma,
        &DVector::from_vec(scfg.x.clone()),
        &DVector::from_vec(scfg.y.clone()),
        t_total,
        scfg.n_seeds,
        config.noise.seed,
        &scfg.checkpoints,
        scfg.epsilon,
    )?;
    report.config_hash = Some(manifest.config_hash.clone());
    manifest.derived_seeds =
        (0..scfg.n_seeds).map(|i| derive_member_seed(config.noise.seed, i as u64)).collect();
    write_json(dir, "sync_report.json", &serde_json::to_value(&report)?)?;
    manifest.record_output(dir, "sync_report.json")?;
    write_csv(
        dir,
        "sync_timeseries.csv",
        "t,q05,q25,q50,q75,q95,exceed_prob",
        &sync_csv_rows(&report),
    )?;
    manifest.record_output(dir, "sync_timeseries.csv")?;
    Ok(())
}

fn run_diam(config: &ExperimentConfig, dir: &Path, manifest: &mut RunManifest) -> Result<()> {
    let field = config.build_field()?;
    let ispec = config.integrator_spec();
    let dcfg = config.diam.clone().ok_or_else(|| Error::Config {
        key: "diam".into(),
        message: "diam command needs a [diam] block".into(),
    })?;
    let t_total = config.run.t1 - config.run.t0;
    let mut report = diagnostics::ball_diameter(
        &field,
        &ispec,
        config.noise.sigma,
        &DVector::from_vec(dcfg.center.clone()),
        dcfg.radius,
        dcfg.mesh_n,
        t_total,
        dcfg.n_seeds,
        config.noise.seed,
        &dcfg.checkpoints,
        dcfg.epsilon,
    )?;
    report.config_hash = Some(manifest.config_hash.clone());
    write_json(dir, "diam_report.json", &serde_json::to_value(&report)?)?;
    manifest.record_output(dir, "diam_report.json")?;
    write_csv(
        dir,
        "diam_timeseries.csv",
        "t,q05,q25,q50,q75,q95,exceed_prob",
        &sync_csv_rows(&report),
    )?;
    manifest.record_output(dir, "diam_timeseries.csv")?;
    Ok(())
}

fn run_pullback(config: &ExperimentConfig, dir: &Path, manifest: &mut RunManifest) -> Result<()> {
    let field = config.build_field()?;
    let ispec = config.integrator_spec();
    let pcfg = config.pullback.clone().ok_or_else(|| Error::Config {
        key: "pullback".into(),
        message: "pullback command needs a [pullback] block".into(),
    })?;
    let init: Vec<DVector<f64>> = match &pcfg.init {
        Some(points) => points.iter().map(|p| DVector::from_vec(p.clone())).collect(),
        None if pcfg.init_from_gibbs => {
            // Starts distributed per the invariant measure, the natural
            // input for the statistical-equilibrium approximation.
            let gibbs = measure::normalize(&field, config.noise.sigma, None, None, None)?;
            gibbs.sample(&ispec, pcfg.n_init, config.noise.seed ^ 0xA11CE, 10.0, 1.0)?
        }
        None => {
            if field.is_circle() {
                (0..pcfg.n_init)
                    .map(|i| {
                        DVector::from_vec(vec![
                            std::f64::consts::TAU * i as f64 / pcfg.n_init as f64,
                        ])
                    })
                    .collect()
            } else {
                crate::sampling::ball_mesh(
                    &DVector::zeros(field.dim()),
                    pcfg.init_radius,
                    pcfg.n_init,
                    config.noise.seed,
                )
            }
        }
    };
    let ens = diagnostics::pullback_ensemble(
        &field,
        &ispec,
        config.noise.sigma,
        config.noise.seed,
        &init,
        &pcfg.times,
    )?;
    let mut rows = Vec::new();
    for (ti, t) in ens.times.iter().enumerate() {
        for (mi, p) in ens.clouds[ti].iter().enumerate() {
            let mut row = vec![*t, mi as f64];
            row.extend(p.iter().copied());
            rows.push(row);
        }
    }
    let mut header = String::from("t,member");
    for i in 1..=field.dim() {
        header.push_str(&format!(",x{i}"));
    }
    write_csv(dir, "pullback_points.csv", &header, &rows)?;
    manifest.record_output(dir, "pullback_points.csv")?;
    let report = json!({
        "times": ens.times,
        "n_members": init.len(),
        "explosion_count": ens.explosion_count,
        "config_hash": manifest.config_hash,
    });
    write_json(dir, "pullback_report.json", &report)?;
    manifest.record_output(dir, "pullback_report.json")?;
    Ok(())
}

/// Parse a points CSV with header `x1..xd` (extra leading columns such as
/// `t,member` from pullback output are accepted; coordinates are taken from
/// the `x*` columns).
fn read_points_csv(path: &Path) -> Result<Vec<DVector<f64>>> {
    let text = fs::read_to_string(path)?;
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| Error::Config {
        key: "cluster.input".into(),
        message: "empty points file".into(),
    })?;
    let cols: Vec<&str> = header.split(',').collect();
    let coord_idx: Vec<usize> = cols
        .iter()
        .enumerate()
        .filter(|(_, c)| c.starts_with('x'))
        .map(|(i, _)| i)
        .collect();
    if coord_idx.is_empty() {
        return Err(Error::Config {
            key: "cluster.input".into(),
            message: format!("no coordinate columns in header `{header}`"),
        });
    }
    let mut points = Vec::new();
    for (ln, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        let mut coords = Vec::with_capacity(coord_idx.len());
        for &i in &coord_idx {
            let v: f64 = fields
                .get(i)
                .and_then(|s| s.trim().parse().ok())
                .ok_or_else(|| Error::Config {
                    key: "cluster.input".into(),
                    message: format!("bad value on line {}", ln + 2),
                })?;
            coords.push(v);
        }
        points.push(DVector::from_vec(coords));
    }
    Ok(points)
}

fn run_cluster(config: &ExperimentConfig, dir: &Path, manifest: &mut RunManifest) -> Result<()> {
    let ccfg = config.cluster.clone().ok_or_else(|| Error::Config {
        key: "cluster".into(),
        message: "cluster command needs a [cluster] block".into(),
    })?;
    let points = read_points_csv(Path::new(&ccfg.input))?;
    let metric = if ccfg.circle { Metric::CircleArc } else { Metric::Euclidean };
    let eps = ccfg.epsilon.unwrap_or_else(|| {
        diagnostics::default_linkage_epsilon(config.noise.sigma, config.integrator_spec().dt)
    });
    let report = cluster_count(&points, eps, metric)?;
    write_json(dir, "cluster_report.json", &serde_json::to_value(&report)?)?;
    manifest.record_output(dir, "cluster_report.json")?;
    Ok(())
}

fn run_check(config: &ExperimentConfig, dir: &Path, manifest: &mut RunManifest) -> Result<()> {
    let field = config.build_field()?;
    let ccfg = config.check.clone().ok_or_else(|| Error::Config {
        key: "check".into(),
        message: "check command needs a [check] block".into(),
    })?;
    let n_pairs = ccfg.n_pairs.unwrap_or(100_000);
    let seed = config.noise.seed;
    let report = match ccfg.kind.as_str() {
        "one_sided_lipschitz" => {
            let b = ccfg.box_.unwrap_or([-4.0, 4.0]);
            check_one_sided_lipschitz(&field, b[0], b[1], n_pairs, seed)?
        }
        "eventual_monotone" => {
            let r = ccfg.radius.ok_or_else(|| Error::Config {
                key: "check.radius".into(),
                message: "eventual_monotone needs radius".into(),
            })?;
            check_eventual_monotone(&field, r, n_pairs, seed)?
        }
        "monotone_large_sets" => {
            let r = ccfg.r.ok_or_else(|| Error::Config {
                key: "check.r".into(),
                message: "monotone_large_sets needs r".into(),
            })?;
            let zs: Vec<DVector<f64>> = ccfg
                .z_candidates
                .clone()
                .unwrap_or_default()
                .into_iter()
                .map(DVector::from_vec)
                .collect();
            check_monotone_on_large_sets(&field, r, &zs, n_pairs, seed)?
        }
        "gradient_direction" => {
            let v = DVector::from_vec(ccfg.v.clone().ok_or_else(|| Error::Config {
                key: "check.v".into(),
                message: "gradient_direction needs v".into(),
            })?);
            let zs: Vec<DVector<f64>> = ccfg
                .z_grid
                .clone()
                .unwrap_or_default()
                .into_iter()
                .map(DVector::from_vec)
                .collect();
            gradient_direction_search(&field, &v, &zs)?
        }
        other => {
            return Err(Error::Config {
                key: "check.kind".into(),
                message: format!("unknown check kind `{other}`"),
            })
        }
    };
    write_json(dir, "check_report.json", &serde_json::to_value(&report)?)?;
    manifest.record_output(dir, "check_report.json")?;
    Ok(())
}

fn run_control(config: &ExperimentConfig, dir: &Path, manifest: &mut RunManifest) -> Result<()> {
    let field = config.build_field()?;
    let ispec = config.integrator_spec();
    let sigma = config.noise.sigma;
    let ccfg = config.control.clone().ok_or_else(|| Error::Config {
        key: "control".into(),
        message: "control command needs a [control] block".into(),
    })?;
    let seed = config.noise.seed;
    let value = match ccfg.mode.as_str() {
        "swift" => {
            let x = DVector::from_vec(ccfg.x.clone().ok_or_else(|| conf("control.x"))?);
            let z = DVector::from_vec(ccfg.z.clone().ok_or_else(|| conf("control.z"))?);
            let r = ccfg.r.ok_or_else(|| conf("control.r"))?;
            let delta = ccfg.delta.ok_or_else(|| conf("control.delta"))?;
            let t0 = ccfg.t0.ok_or_else(|| conf("control.t0"))?;
            let rep =
                swift_control(&field, &ispec, sigma, &x, r, &z, t0, delta, ccfg.mesh_n, seed)?;
            serde_json::to_value(&rep)?
        }
        "contraction" => {
            let z = DVector::from_vec(ccfg.z.clone().ok_or_else(|| conf("control.z"))?);
            let radius = ccfg.radius.ok_or_else(|| conf("control.radius"))?;
            let c = match ccfg.c_estimate {
                Some(c) if c > 0.0 => c,
                _ => estimate_contraction_constant(&field, &z, radius, 20_000, seed)?,
            };
            let rep = contraction_witness(&field, &ispec, sigma, &z, radius, c, ccfg.mesh_n, seed)?;
            let mut v = serde_json::to_value(&rep)?;
            v["c_estimate"] = json!(c);
            v
        }
        other => {
            return Err(Error::Config {
                key: "control.mode".into(),
                message: format!("unknown control mode `{other}` (swift|contraction)"),
            })
        }
    };
    write_json(dir, "control_report.json", &value)?;
    manifest.record_output(dir, "control_report.json")?;
    Ok(())
}

fn conf(key: &str) -> Error {
    Error::Config {
        key: key.into(),
        message: "required key missing".into(),
    }
}
