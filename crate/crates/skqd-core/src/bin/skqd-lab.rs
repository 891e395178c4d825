//! Command-line front end: exact diagonalization, sampled-subspace runs,
//! field sweeps, sparsity maps, bound evaluation, and material presets.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use skqd_core::analysis::{ed_ground, ed_ground_sector, OracleCache};
use skqd_core::config::{
    load_config, GeometryKind, InitKind, LayoutName, MaterialPreset, MethodName, RunConfig,
    SweepSection, MATERIAL_PRESETS,
};
use skqd_core::error::{Error, Result};
use skqd_core::hamiltonian::build_terms;
use skqd_core::sampling::SampleTable;
use skqd_core::skqd::{
    energy_error_bound, project_hamiltonian, sample_count_bound, skqd_run_with_tables,
    solve_subspace, BoundParams, OracleMode, ShotSpec, SkqdTask,
};
use skqd_core::sweep::{
    field_sweep, field_sweep_csv, linspace, sector_detail_csv, sparsity_map, sparsity_map_csv,
    SweepSettings,
};

#[derive(Parser)]
#[command(name = "skqd-lab", version, about = "Sampled Krylov diagonalization lab for XXZ spin models")]
struct Cli {
    /// Worker threads (default: hardware parallelism).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Exact ground state (full space, or one sector with --sector).
    Ed(EdArgs),
    /// Full sampled-subspace pipeline for one parameter point.
    Skqd(SkqdArgs),
    /// Magnetization and energy across a longitudinal-field grid.
    FieldSweep(FieldSweepArgs),
    /// log(IPR) of the ground state over the (delta, h_z) plane.
    SparsityMap(SparsityMapArgs),
    /// Evaluate the energy-error and sample-count bounds.
    Bounds(BoundsArgs),
    /// List material presets.
    Materials,
}

/// Flags mirroring the config file; explicit flags override the file.
#[derive(Args, Clone, Default)]
struct CommonArgs {
    /// JSON run configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    j: Option<f64>,
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long = "h-z")]
    h_z: Option<f64>,
    #[arg(long = "h-x")]
    h_x: Option<f64>,
    /// chain | rect
    #[arg(long)]
    geometry: Option<String>,
    /// Material preset supplying J and delta.
    #[arg(long)]
    preset: Option<String>,
    /// singlet_product | neel | w_state_product
    #[arg(long)]
    init: Option<String>,
    /// Sector for w_state_product initialization.
    #[arg(long = "init-k")]
    init_k: Option<usize>,
    /// identity | snake
    #[arg(long)]
    layout: Option<String>,
    #[arg(long)]
    dt: Option<f64>,
    #[arg(long = "krylov-dim")]
    krylov_dim: Option<usize>,
    /// trotter2 | exact
    #[arg(long)]
    method: Option<String>,
    #[arg(long)]
    reps: Option<usize>,
    #[arg(long)]
    shots: Option<u64>,
    /// Readout flip probability.
    #[arg(long = "noise-p")]
    noise_p: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    output: Option<PathBuf>,
}

impl CommonArgs {
    /// Load the config file (or defaults) and overlay the flags.
    fn build_config(&self) -> Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(path) => load_config(path)?,
            None => {
                let n = self.n.ok_or_else(|| {
                    Error::Config("either --config or --n must be given".into())
                })?;
                let mut c = RunConfig::default();
                c.model.n = n;
                c
            }
        };
        if let Some(n) = self.n {
            cfg.model.n = n;
        }
        if self.j.is_some() {
            cfg.model.j = self.j;
        }
        if self.delta.is_some() {
            cfg.model.delta = self.delta;
        }
        if let Some(hz) = self.h_z {
            cfg.model.h_z = hz;
        }
        if let Some(hx) = self.h_x {
            cfg.model.h_x = hx;
        }
        if let Some(g) = &self.geometry {
            cfg.model.geometry = match g.as_str() {
                "chain" => GeometryKind::Chain,
                "rect" => GeometryKind::Rect,
                other => return Err(Error::Config(format!("unknown geometry '{other}'"))),
            };
        }
        if self.preset.is_some() {
            cfg.model.preset = self.preset.clone();
        }
        if let Some(kind) = &self.init {
            cfg.init.kind = match kind.as_str() {
                "singlet_product" | "singlet" => InitKind::SingletProduct,
                "neel" => InitKind::Neel,
                "w_state_product" | "wstate" => InitKind::WStateProduct,
                other => return Err(Error::Config(format!("unknown init kind '{other}'"))),
            };
        }
        if self.init_k.is_some() {
            cfg.init.k = self.init_k;
        }
        if let Some(layout) = &self.layout {
            cfg.init.layout = match layout.as_str() {
                "identity" => LayoutName::Identity,
                "snake" => LayoutName::Snake,
                other => return Err(Error::Config(format!("unknown layout '{other}'"))),
            };
        }
        if let Some(dt) = self.dt {
            cfg.evolution.dt = dt;
        }
        if let Some(d) = self.krylov_dim {
            cfg.evolution.krylov_dim = d;
        }
        if let Some(m) = &self.method {
            cfg.evolution.method = match m.as_str() {
                "trotter2" | "trotter" => MethodName::Trotter2,
                "exact" => MethodName::Exact,
                other => return Err(Error::Config(format!("unknown method '{other}'"))),
            };
        }
        if let Some(r) = self.reps {
            cfg.evolution.reps = r;
        }
        if let Some(s) = self.shots {
            cfg.shots = s;
        }
        if let Some(p) = self.noise_p {
            cfg.noise = Some(skqd_core::config::NoiseSection { readout_flip_prob: p });
        }
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(o) = &self.output {
            cfg.output_dir = o.clone();
        }
        Ok(cfg)
    }
}

#[derive(Args)]
struct EdArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Restrict to one Hamming-weight sector.
    #[arg(long)]
    sector: Option<usize>,
}

#[derive(Args)]
struct SkqdArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Post-select samples on this Hamming weight.
    #[arg(long = "filter-k")]
    filter_k: Option<usize>,
    /// Enumerate the exact support instead of drawing shots.
    #[arg(long)]
    exhaustive: bool,
    /// Write per-step sample tables (JSON lines) into the output directory.
    #[arg(long = "dump-samples")]
    dump_samples: bool,
    /// Skip simulation; diagonalize in the basis of these sample files.
    #[arg(long = "from-samples", num_args = 1..)]
    from_samples: Vec<PathBuf>,
}

#[derive(Args)]
struct FieldSweepArgs {
    #[command(flatten)]
    common: CommonArgs,
    #[arg(long = "hz-min")]
    hz_min: Option<f64>,
    #[arg(long = "hz-max")]
    hz_max: Option<f64>,
    /// Number of grid points.
    #[arg(long = "grid-points")]
    grid_points: Option<usize>,
    /// Sweep only sectors within this window of the oracle optimum.
    #[arg(long)]
    window: Option<usize>,
    /// Comma-separated sector list.
    #[arg(long, value_delimiter = ',')]
    sectors: Option<Vec<usize>>,
}

#[derive(Args)]
struct SparsityMapArgs {
    #[arg(long)]
    n: usize,
    #[arg(long, default_value_t = 1.0)]
    j: f64,
    #[arg(long = "delta-min", default_value_t = -2.0, allow_hyphen_values = true)]
    delta_min: f64,
    #[arg(long = "delta-max", default_value_t = 4.0)]
    delta_max: f64,
    #[arg(long = "delta-steps", default_value_t = 21)]
    delta_steps: usize,
    #[arg(long = "hz-min", default_value_t = 0.0)]
    hz_min: f64,
    #[arg(long = "hz-max", default_value_t = 10.0)]
    hz_max: f64,
    #[arg(long = "hz-steps", default_value_t = 21)]
    hz_steps: usize,
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct BoundsArgs {
    #[arg(long = "alpha-l")]
    alpha_l: Option<f64>,
    #[arg(long = "h-norm")]
    h_norm: Option<f64>,
    #[arg(long)]
    d: Option<usize>,
    #[arg(long)]
    l: Option<usize>,
    #[arg(long)]
    eta: Option<f64>,
    #[arg(long = "gamma0-sq")]
    gamma0_sq: Option<f64>,
    #[arg(long = "beta-l")]
    beta_l: Option<f64>,
    #[arg(long = "eps-tilde", default_value_t = 0.0)]
    eps_tilde: f64,
}

fn main() {
    let cli = Cli::parse();
    if let Some(threads) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .ok();
    }
    let code = match run(cli.cmd) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    };
    std::process::exit(code);
}

fn run(cmd: Command) -> Result<()> {
    match cmd {
        Command::Ed(args) => cmd_ed(args),
        Command::Skqd(args) => cmd_skqd(args),
        Command::FieldSweep(args) => cmd_field_sweep(args),
        Command::SparsityMap(args) => cmd_sparsity_map(args),
        Command::Bounds(args) => cmd_bounds(args),
        Command::Materials => cmd_materials(),
    }
}

fn echo_value(cfg: &RunConfig) -> Result<serde_json::Value> {
    Ok(serde_json::to_value(cfg)?)
}

fn cmd_ed(args: EdArgs) -> Result<()> {
    let cfg = args.common.build_config()?;
    let run = cfg.resolve()?;
    let terms = build_terms(&run.params);
    let ed = match args.sector {
        Some(k) => ed_ground_sector(&terms, k, &run.caps)?,
        None => ed_ground(&terms, &run.caps)?,
    };
    let out = serde_json::json!({
        "energy": ed.energy,
        "gap": ed.gap,
        "degenerate": ed.degenerate,
        "residual": ed.residual,
        "sector": args.sector,
        "config_echo": echo_value(&cfg)?,
    });
    println!("{}", serde_json::to_string_pretty(&out)?);
    Ok(())
}

fn cmd_skqd(args: SkqdArgs) -> Result<()> {
    let cfg = args.common.build_config()?;
    let run = cfg.resolve()?;

    if !args.from_samples.is_empty() {
        // External counts: merge, project, solve.
        let mut tables = Vec::new();
        for path in &args.from_samples {
            let file = std::fs::File::open(path)
                .map_err(|e| Error::Config(format!("cannot open {}: {e}", path.display())))?;
            tables.push(SampleTable::read_jsonl(std::io::BufReader::new(file))?);
        }
        let merged = skqd_core::sampling::merge_tables(&tables)?;
        if merged.n_sites != run.params.geometry.n_sites {
            return Err(Error::DimensionMismatch(format!(
                "samples have {} sites, model has {}",
                merged.n_sites,
                run.params.geometry.n_sites
            )));
        }
        let terms = build_terms(&run.params);
        let problem = project_hamiltonian(&terms, &merged.masks)?;
        let result = solve_subspace(&problem)?;
        let out = serde_json::json!({
            "energy": result.energy,
            "basis_size": result.basis_size,
            "residual": result.residual,
            "gamma0_sq": result.gamma0_sq,
            "shots_discarded": result.shots_discarded,
            "config_echo": echo_value(&cfg)?,
        });
        println!("{}", serde_json::to_string_pretty(&out)?);
        return Ok(());
    }

    let mut task = SkqdTask::new(&run.params, run.init);
    task.evolution = run.evolution;
    task.shots = if args.exhaustive { ShotSpec::Exhaustive } else { run.shots };
    task.noise = run.noise;
    task.filter_k = args.filter_k;
    task.seed = run.seed;
    task.oracle = OracleMode::Auto(run.caps);
    let (result, tables) = skqd_run_with_tables(&task)?;

    if args.dump_samples {
        std::fs::create_dir_all(&run.output_dir)?;
        for table in &tables {
            let path = run
                .output_dir
                .join(format!("samples_step{}.jsonl", table.meta.krylov_step));
            let mut file = std::fs::File::create(&path)?;
            table.write_jsonl(&mut file)?;
        }
    }

    let out = serde_json::json!({
        "energy": result.energy,
        "basis_size": result.basis_size,
        "residual": result.residual,
        "gamma0_sq": result.gamma0_sq,
        "shots_discarded": result.shots_discarded,
        "config_echo": echo_value(&cfg)?,
    });
    println!("{}", serde_json::to_string_pretty(&out)?);
    Ok(())
}

fn cmd_field_sweep(args: FieldSweepArgs) -> Result<()> {
    let mut cfg = args.common.build_config()?;
    let mut sweep_section = cfg.sweep.take().unwrap_or_default();
    if let (Some(lo), Some(hi), Some(steps)) = (args.hz_min, args.hz_max, args.grid_points) {
        sweep_section = SweepSection {
            hz_grid: None,
            hz_min: Some(lo),
            hz_max: Some(hi),
            steps: Some(steps),
            ..sweep_section
        };
    }
    if args.window.is_some() {
        sweep_section.sector_window = args.window;
    }
    if args.sectors.is_some() {
        sweep_section.sectors = args.sectors.clone();
    }
    cfg.sweep = Some(sweep_section.clone());
    let run = cfg.resolve()?;
    let grid = sweep_section.grid()?;

    let settings = SweepSettings {
        evolution: run.evolution,
        shots: run.shots,
        noise: run.noise,
        seed: run.seed,
        caps: run.caps,
        cache: OracleCache::from_env(),
    };
    let out = field_sweep(
        &run.params,
        &grid,
        sweep_section.sectors.as_deref(),
        sweep_section.sector_window,
        &settings,
    )?;

    std::fs::create_dir_all(&run.output_dir)?;
    let sweep_path = run.output_dir.join("field_sweep.csv");
    let detail_path = run.output_dir.join("sector_detail.csv");
    std::fs::write(&sweep_path, field_sweep_csv(&out.rows))?;
    std::fs::write(&detail_path, sector_detail_csv(&out.details))?;

    let summary = serde_json::json!({
        "grid_points": out.rows.len(),
        "field_sweep_csv": sweep_path,
        "sector_detail_csv": detail_path,
        "config_echo": echo_value(&cfg)?,
    });
    println!("{}", serde_json::to_string_pretty(&summary)?);
    Ok(())
}

fn cmd_sparsity_map(args: SparsityMapArgs) -> Result<()> {
    let deltas = linspace(args.delta_min, args.delta_max, args.delta_steps);
    let fields = linspace(args.hz_min, args.hz_max, args.hz_steps);
    let settings = SweepSettings { cache: OracleCache::from_env(), ..Default::default() };
    let rows = sparsity_map(args.n, args.j, &deltas, &fields, &settings)?;
    let dir = args.output.unwrap_or_else(|| PathBuf::from("."));
    std::fs::create_dir_all(&dir)?;
    let path = dir.join("sparsity_map.csv");
    std::fs::write(&path, sparsity_map_csv(&rows))?;
    let summary = serde_json::json!({
        "rows": rows.len(),
        "sparsity_map_csv": path,
    });
    println!("{}", serde_json::to_string_pretty(&summary)?);
    Ok(())
}

fn cmd_bounds(args: BoundsArgs) -> Result<()> {
    let energy_bound = match (args.alpha_l, args.h_norm) {
        (Some(a), Some(h)) => Some(energy_error_bound(a, h)?),
        (None, None) => None,
        _ => {
            return Err(Error::Config(
                "the energy bound needs both --alpha-l and --h-norm".into(),
            ))
        }
    };
    let sample_bound = match (args.d, args.l, args.eta, args.gamma0_sq, args.beta_l) {
        (Some(d), Some(l), Some(eta), Some(gamma0_sq), Some(beta_l)) => {
            Some(sample_count_bound(&BoundParams {
                d,
                l,
                eta,
                gamma0_sq,
                beta_l,
                eps_tilde: args.eps_tilde,
                alpha_l: args.alpha_l.unwrap_or(1.0),
                h_norm: args.h_norm.unwrap_or(0.0),
            })?)
        }
        (None, None, None, None, None) => None,
        _ => {
            return Err(Error::Config(
                "the sample bound needs --d, --l, --eta, --gamma0-sq and --beta-l".into(),
            ))
        }
    };
    if energy_bound.is_none() && sample_bound.is_none() {
        return Err(Error::Config("no bound inputs given".into()));
    }
    let out = serde_json::json!({
        "energy_error_bound": energy_bound,
        "sample_count_bound": sample_bound,
    });
    println!("{}", serde_json::to_string_pretty(&out)?);
    Ok(())
}

fn cmd_materials() -> Result<()> {
    for MaterialPreset { name, j_mev, delta } in MATERIAL_PRESETS {
        println!("{name} {j_mev} {delta}");
    }
    Ok(())
}
