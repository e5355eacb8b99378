use clap::{Parser, Subcommand};
use phasekit::config::{
    configuration_from_csv, contour_json, scan_csv, trace_csv, RunConfig,
};
use phasekit::contours::extract_contours;
use phasekit::energy::ModelKind;
use phasekit::geometry::{IBox, SpinField};
use phasekit::peierls::{adversarial_fields, critical_window, estimate_b_plus, GapVariant};
use phasekit::polymer::{PressureLadder, SurrogateSystem};
use phasekit::sampler::{hysteresis_scan, ChainState};
use phasekit::{Error, Result};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "phasekit", version, about = "Gibbs point-process phase-coexistence toolkit")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
    /// Omit timestamps so outputs are byte-identical across reruns.
    #[arg(long, global = true)]
    no_timestamp: bool,
    /// Worker-thread cap (default: PHASEKIT_THREADS or all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Print the resolved model parameters and derived constants.
    ModelInfo {
        #[arg(long)]
        config: PathBuf,
    },
    /// Run one MCMC chain and write a trace CSV.
    Sample {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Hysteresis scan over an activity grid, both boundary conditions.
    Scan {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Extract contours from a configuration CSV and dump them as JSON.
    Contours {
        #[arg(long)]
        config: PathBuf,
        /// Point configuration CSV (columns x1,…,xd,mark).
        #[arg(long)]
        points: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Peierls gap report over an adversarial + random field corpus.
    Peierls {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Analytic sufficient condition for a tabulated dilution potential.
    CheckCondition {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Verify the contour development identity on the configured box.
    PolymerVerify {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Bracket the critical activity from truncated pressures.
    Critical {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let threads = cli
        .threads
        .or_else(|| std::env::var("PHASEKIT_THREADS").ok().and_then(|v| v.parse().ok()));
    if let Some(n) = threads {
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::Numerical(_) => ExitCode::from(3),
                _ => ExitCode::from(2),
            }
        }
    }
}


fn pretty(v: &serde_json::Value) -> Result<String> {
    serde_json::to_string_pretty(v).map_err(|e| Error::invalid(format!("json: {e}")))
}

fn to_value<T: serde::Serialize>(t: &T) -> Result<serde_json::Value> {
    serde_json::to_value(t).map_err(|e| Error::invalid(format!("json: {e}")))
}

fn load(path: &Path) -> Result<RunConfig> {
    RunConfig::parse(&std::fs::read_to_string(path)?)
}

fn csv_header(cfg: &RunConfig, no_timestamp: bool) -> String {
    let mut h = format!("# phasekit {}\n", env!("CARGO_PKG_VERSION"));
    if !no_timestamp {
        let t = std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0);
        h.push_str(&format!("# generated: {t}\n"));
    }
    for line in cfg.resolved().lines() {
        h.push_str(&format!("# {line}\n"));
    }
    h
}

fn json_envelope(cfg: &RunConfig, no_timestamp: bool) -> serde_json::Map<String, serde_json::Value> {
    let mut m = serde_json::Map::new();
    m.insert("schema".into(), 1.into());
    m.insert("version".into(), env!("CARGO_PKG_VERSION").into());
    if !no_timestamp {
        let t = std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0);
        m.insert("generated".into(), t.into());
    }
    m.insert("config".into(), cfg.resolved().into());
    m
}

fn out_path(cfg: &RunConfig, out: &Option<PathBuf>, name: &str) -> PathBuf {
    out.clone()
        .unwrap_or_else(|| Path::new(&cfg.out_dir()).join(name))
}

fn write_file(path: &Path, body: &str) -> Result<()> {
    std::fs::write(path, body)?;
    println!("wrote {}", path.display());
    Ok(())
}

fn run(cli: &Cli) -> Result<()> {
    match &cli.cmd {
        Cmd::ModelInfo { config } => {
            let cfg = load(config)?;
            let model = cfg.model()?;
            let beta = cfg.beta()?;
            let (z_minus, z_plus) =
                critical_window(beta, model.sat.b, model.sat.b0, model.sat.delta, model.dim)?;
            let mut m = json_envelope(&cfg, cli.no_timestamp);
            m.insert("kind".into(), model.kind_name().into());
            m.insert("dim".into(), model.dim.into());
            m.insert("delta".into(), model.sat.delta.into());
            m.insert("L".into(), model.sat.l.into());
            m.insert("b".into(), model.sat.b.into());
            m.insert("b0".into(), model.sat.b0.into());
            m.insert("range".into(), model.range.into());
            m.insert("pitch".into(), model.pitch.into());
            m.insert("c_s".into(), model.c_s().into());
            m.insert("c_t".into(), model.c_t().into());
            m.insert("beta".into(), beta.into());
            m.insert("z_minus".into(), z_minus.into());
            m.insert("z_plus".into(), z_plus.into());
            if let ModelKind::DilutedPairwise { phi, r_dilution } = &model.kind {
                m.insert("c_phi".into(), phi.c_phi(model.dim).into());
                m.insert("R".into(), (*r_dilution).into());
                m.insert("R1".into(), phi.r1.into());
                m.insert("R2".into(), phi.r2.into());
            }
            m.insert(
                "run_defaults".into(),
                serde_json::json!({
                    "steps": cfg.steps()?, "thin": cfg.thin()?, "replicas": cfg.replicas()?,
                    "seed": cfg.seed()?, "sharp": cfg.sharp()?, "rank": cfg.rank()?,
                    "ladder": cfg.ladder()?, "tol": cfg.tol()?,
                }),
            );
            println!("{}", pretty(&serde_json::Value::Object(m))?);
            Ok(())
        }
        Cmd::Sample { config, out } => {
            let cfg = load(config)?;
            let mut chain = ChainState::new(
                cfg.model()?,
                cfg.lambda()?,
                cfg.sharp()?,
                cfg.z()?,
                cfg.beta()?,
                cfg.seed()?,
            )?;
            let trace = chain.run_chain(cfg.steps()?, cfg.thin()?)?;
            let body = csv_header(&cfg, cli.no_timestamp) + &trace_csv(&trace);
            write_file(&out_path(&cfg, out, "trace.csv"), &body)
        }
        Cmd::Scan { config, out } => {
            let cfg = load(config)?;
            let rows = hysteresis_scan(
                &cfg.model()?,
                &cfg.lambda()?,
                cfg.beta()?,
                &cfg.z_grid()?,
                cfg.steps()?,
                cfg.replicas()?,
                cfg.seed()?,
            )?;
            let body = csv_header(&cfg, cli.no_timestamp) + &scan_csv(&rows);
            write_file(&out_path(&cfg, out, "scan.csv"), &body)
        }
        Cmd::Contours { config, points, out } => {
            let cfg = load(config)?;
            let model = cfg.model()?;
            let lambda = cfg.lambda()?;
            let sharp = cfg.sharp()?;
            let tiling = model.tiling();
            let omega =
                configuration_from_csv(&std::fs::read_to_string(points)?, lambda.hat(&tiling))?;
            let pad = 2 * (2.0 * model.sat.l / tiling.delta).ceil() as i64 + 2;
            let mut field = SpinField::constant(lambda.grown(pad), sharp, sharp);
            for s in lambda.sites() {
                field.set(&s, phasekit::geometry::occupancy(&omega, &s, &tiling));
            }
            let contours = extract_contours(&field, model.sat.l, &tiling)?;
            let mut m = json_envelope(&cfg, cli.no_timestamp);
            m.insert(
                "contours".into(),
                contours.iter().map(|c| contour_json(c, model.dim)).collect(),
            );
            let body = pretty(&serde_json::Value::Object(m))?;
            write_file(&out_path(&cfg, out, "contours.json"), &body)
        }
        Cmd::Peierls { config, out } => {
            let cfg = load(config)?;
            let model = cfg.model()?;
            if model.dim != 2 {
                return Err(Error::invalid("the peierls corpus generator is two-dimensional"));
            }
            let side = cfg.lambda()?.hi.0[0] - cfg.lambda()?.lo.0[0] + 1;
            let sharp = cfg.sharp()?;
            let fields = adversarial_fields(side, sharp);
            let report = estimate_b_plus(&model, &fields, GapVariant::MinusInnerBoundary, cfg.seed()?)?;
            let mut m = json_envelope(&cfg, cli.no_timestamp);
            m.insert("report".into(), to_value(&report)?);
            let body = pretty(&serde_json::Value::Object(m))?;
            write_file(&out_path(&cfg, out, "peierls.json"), &body)
        }
        Cmd::CheckCondition { config, out } => {
            let cfg = load(config)?;
            let profile = cfg.profile()?;
            let (pass, margin) = profile.check()?;
            let mut m = json_envelope(&cfg, cli.no_timestamp);
            m.insert("c_phi".into(), profile.c_phi().into());
            m.insert("R".into(), profile.r.into());
            m.insert("R1".into(), profile.phi.r1.into());
            m.insert("R2".into(), profile.phi.r2.into());
            m.insert("margin".into(), margin.into());
            m.insert("pass".into(), pass.into());
            m.insert("b_empty".into(), profile.b_empty()?.into());
            let body = pretty(&serde_json::Value::Object(m))?;
            write_file(&out_path(&cfg, out, "condition.json"), &body)
        }
        Cmd::PolymerVerify { config, out } => {
            let cfg = load(config)?;
            let system = SurrogateSystem::new(cfg.model()?, cfg.z()?, cfg.beta()?)?;
            let check = system.polymer_development(&cfg.lambda()?, cfg.sharp()?)?;
            let mut m = json_envelope(&cfg, cli.no_timestamp);
            m.insert("phi_direct".into(), check.phi_direct.into());
            m.insert("phi_contour".into(), check.phi_contour.into());
            m.insert("rel_err".into(), check.rel_err.into());
            m.insert("contours_enumerated".into(), check.contours_enumerated.into());
            let body = pretty(&serde_json::Value::Object(m))?;
            write_file(&out_path(&cfg, out, "polymer.json"), &body)
        }
        Cmd::Critical { config, out } => {
            let cfg = load(config)?;
            let model = cfg.model()?;
            let beta = cfg.beta()?;
            let boxes: Vec<IBox> = cfg
                .ladder()?
                .iter()
                .map(|&side| IBox::cube(0, side, model.dim))
                .collect::<Result<_>>()?;
            let ladder_sides = cfg.ladder()?;
            let ladder = PressureLadder::new(model.clone(), beta, boxes)?;
            let (z_minus, z_plus) = match cfg.window()? {
                Some(w) => w,
                None => critical_window(beta, model.sat.b, model.sat.b0, model.sat.delta, model.dim)?,
            };
            let rank = cfg.rank()?;
            let grid: Vec<f64> = (0..20)
                .map(|k| z_minus + (z_plus - z_minus) * (k as f64 + 0.5) / 20.0)
                .collect();
            let g_values: Vec<f64> = grid
                .iter()
                .map(|&z| ladder.g(z, rank))
                .collect::<Result<_>>()?;
            let interval = ladder.bracket_critical_activity((z_minus, z_plus), rank, cfg.tol()?)?;
            let mut m = json_envelope(&cfg, cli.no_timestamp);
            m.insert("z_minus".into(), z_minus.into());
            m.insert("z_plus".into(), z_plus.into());
            m.insert("z_c_interval".into(), serde_json::json!([interval.0, interval.1]));
            m.insert("rank".into(), rank.into());
            m.insert("box_ladder".into(), to_value(&ladder_sides)?);
            m.insert(
                "G_values".into(),
                to_value(&grid.iter().zip(&g_values).collect::<Vec<_>>())?,
            );
            let body = pretty(&serde_json::Value::Object(m))?;
            write_file(&out_path(&cfg, out, "critical.json"), &body)?;
            let mut csv = csv_header(&cfg, cli.no_timestamp) + "z,G\n";
            for (z, g) in grid.iter().zip(&g_values) {
                csv.push_str(&format!("{z},{g}\n"));
            }
            write_file(&out_path(&cfg, &None, "critical.csv"), &csv)
        }
    }
}
