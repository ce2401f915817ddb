use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use superliouville::census::{self, SurfaceClass};
use superliouville::runner::{self, exit_code, parse_config, RunConfig};
use superliouville::{eigendecompose, Error, Result};

#[derive(Parser)]
#[command(name = "superliouville", version, about = "Min-max solver for the super-Liouville system on a flat spin torus")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Find a nontrivial critical point and write its artifacts.
    Solve(SolveArgs),
    /// Print harmonic-spinor dimension tables.
    Census(CensusArgs),
    /// Re-certify a dumped point on the Nehari manifold.
    NehariCheck(CheckArgs),
    /// Export the Dirac spectrum as CSV.
    Spectrum(SpectrumArgs),
    /// Fit the Moser-Trudinger constant by random sampling.
    MtProbe(ProbeArgs),
}

#[derive(Args, Clone)]
struct GeometryArgs {
    /// Grid points per side.
    #[arg(long, default_value_t = 32)]
    grid: usize,
    /// Side lengths `L1,L2` (default 2 pi each).
    #[arg(long, value_parser = pair)]
    lengths: Option<(f64, f64)>,
    /// Spin offsets `d1,d2`, each 0 or 0.5.
    #[arg(long, value_parser = pair, default_value = "0.5,0")]
    offset: (f64, f64),
}

impl GeometryArgs {
    fn apply(&self, cfg: &mut RunConfig) {
        cfg.n1 = self.grid;
        cfg.n2 = self.grid;
        if let Some((l1, l2)) = self.lengths {
            cfg.l1 = l1;
            cfg.l2 = l2;
        }
        (cfg.delta1, cfg.delta2) = self.offset;
    }

    fn geometry(&self) -> Result<std::sync::Arc<superliouville::TorusGeometry>> {
        let mut cfg = RunConfig::with_rho(1.0);
        self.apply(&mut cfg);
        runner::geometry_of(&cfg)
    }
}

#[derive(Args)]
struct SolveArgs {
    /// Run configuration file (key=value lines); flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    rho: Option<f64>,
    /// auto, mp or link.
    #[arg(long)]
    regime: Option<String>,
    #[arg(long)]
    grid: Option<usize>,
    #[arg(long, value_parser = pair)]
    lengths: Option<(f64, f64)>,
    #[arg(long, value_parser = pair)]
    offset: Option<(f64, f64)>,
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<String>,
    /// Record every energy evaluation in the trace.
    #[arg(long)]
    trace_energy: bool,
    /// Any config key, as `key=value`; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Print the effective configuration and exit.
    #[arg(long)]
    print_config: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Text,
    Csv,
}

#[derive(Args)]
struct CensusArgs {
    #[arg(long)]
    genus: u32,
    /// Surface class; defaults to torus for genus 1 and hyperelliptic otherwise.
    #[arg(long)]
    class: Option<String>,
    #[arg(long, value_enum, default_value_t = Format::Text)]
    format: Format,
}

#[derive(Args)]
struct CheckArgs {
    /// Run directory holding `u.slfd`, `psi.slfd` and `report.json`.
    dir: Option<PathBuf>,
    #[arg(long)]
    u: Option<PathBuf>,
    #[arg(long)]
    psi: Option<PathBuf>,
    /// Coupling; read from the run's report.json when omitted.
    #[arg(long)]
    rho: Option<f64>,
    #[arg(long, default_value_t = superliouville::Coupling::DEFAULT_GAP_TOL)]
    gap_tol: f64,
}

#[derive(Args)]
struct SpectrumArgs {
    #[command(flatten)]
    geometry: GeometryArgs,
    /// Number of modes to list (all when omitted).
    #[arg(long)]
    count: Option<usize>,
    /// Output file (stdout when omitted).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ProbeArgs {
    #[command(flatten)]
    geometry: GeometryArgs,
    #[arg(long, default_value_t = 500)]
    samples: usize,
    #[arg(long, default_value_t = 7)]
    seed: u64,
}

fn pair(s: &str) -> std::result::Result<(f64, f64), String> {
    let (a, b) = s.split_once(',').ok_or_else(|| format!("expected two comma-separated numbers, got '{s}'"))?;
    let parse = |x: &str| x.trim().parse::<f64>().map_err(|e| format!("'{x}': {e}"));
    Ok((parse(a)?, parse(b)?))
}

fn solve_config(args: &SolveArgs) -> Result<RunConfig> {
    let mut cfg = match &args.config {
        Some(path) => parse_config(&std::fs::read_to_string(path)?)?,
        None => RunConfig::with_rho(args.rho.ok_or_else(|| {
            Error::InvalidArgument("--rho is required without --config".into())
        })?),
    };
    let mut pairs: Vec<(String, String)> = Vec::new();
    let mut push = |k: &str, v: String| pairs.push((k.to_string(), v));
    if let Some(v) = args.rho {
        push("rho", v.to_string());
    }
    if let Some(v) = &args.regime {
        push("regime", v.clone());
    }
    if let Some(n) = args.grid {
        push("N1", n.to_string());
        push("N2", n.to_string());
    }
    if let Some((a, b)) = args.lengths {
        push("L1", a.to_string());
        push("L2", b.to_string());
    }
    if let Some((a, b)) = args.offset {
        push("delta1", a.to_string());
        push("delta2", b.to_string());
    }
    if let Some(v) = args.tol {
        push("tol", v.to_string());
    }
    if let Some(v) = args.seed {
        push("seed", v.to_string());
    }
    if let Some(v) = &args.out {
        push("out", v.clone());
    }
    if args.trace_energy {
        push("trace_energy", "true".into());
    }
    for kv in &args.set {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| Error::InvalidArgument(format!("--set expects key=value, got '{kv}'")))?;
        push(k.trim(), v.to_string());
    }
    for (k, v) in pairs {
        cfg.set(&k, &v).map_err(|m| Error::InvalidArgument(format!("{k}: {m}")))?;
    }
    cfg.check().map_err(|(k, m)| Error::InvalidArgument(format!("{k}: {m}")))?;
    Ok(cfg)
}

fn solve(args: SolveArgs) -> Result<i32> {
    let cfg = solve_config(&args)?;
    if args.print_config {
        print!("{}", runner::emit_config(&cfg));
        return Ok(0);
    }
    let outcome = runner::run(&cfg)?;
    match &outcome.report.solution {
        Some(s) => println!(
            "{} level {:.10} (vol {:.6}, excess {:.6e}) residual {:.3e} ||psi|| {:.6} -> {}",
            s.regime,
            s.level,
            s.vol,
            s.excess,
            s.residual,
            s.psi_l2,
            outcome.dir.display()
        ),
        None => eprintln!(
            "error: {} (report in {})",
            outcome.report.error.as_deref().unwrap_or("unknown failure"),
            outcome.dir.display()
        ),
    }
    Ok(outcome.exit_code)
}

fn census_cmd(args: CensusArgs) -> Result<i32> {
    let class = match &args.class {
        Some(c) => c.parse()?,
        None if args.genus == 1 => SurfaceClass::Torus,
        None => SurfaceClass::Hyperelliptic,
    };
    let entry = census::known_case(args.genus, class)?;
    entry.verify()?;
    match args.format {
        Format::Text => print!("{}", census::format_text(&entry)),
        Format::Csv => print!("{}", census::format_csv(&entry)),
    }
    Ok(0)
}

fn rho_from_report(dir: &Path) -> Result<f64> {
    let path = dir.join("report.json");
    let text = std::fs::read_to_string(&path)?;
    let v: serde_json::Value = serde_json::from_str(&text)?;
    v["manifest"]["rho"]
        .as_str()
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| Error::InvalidArgument(format!("no manifest rho in {}", path.display())))
}

fn nehari_check(args: CheckArgs) -> Result<i32> {
    let (u, psi) = match (&args.dir, &args.u, &args.psi) {
        (_, Some(u), Some(p)) => (u.clone(), p.clone()),
        (Some(d), None, None) => (d.join("u.slfd"), d.join("psi.slfd")),
        _ => return Err(Error::InvalidArgument("give a run directory or both --u and --psi".into())),
    };
    let rho = match (args.rho, &args.dir) {
        (Some(r), _) => r,
        (None, Some(d)) => rho_from_report(d)?,
        (None, None) => return Err(Error::InvalidArgument("--rho is required without a run directory".into())),
    };
    let check = runner::nehari_check(&u, &psi, rho, args.gap_tol)?;
    println!("{}", serde_json::to_string_pretty(&check)?);
    Ok(if check.certified { 0 } else { 1 })
}

fn spectrum_cmd(args: SpectrumArgs) -> Result<i32> {
    let g = args.geometry.geometry()?;
    let csv = runner::spectrum_csv(&eigendecompose(&g), args.count);
    match &args.out {
        Some(path) => std::fs::write(path, csv)?,
        None => print!("{csv}"),
    }
    Ok(0)
}

fn mt_probe(args: ProbeArgs) -> Result<i32> {
    let g = args.geometry.geometry()?;
    let probe = runner::mt_probe(&g, args.samples, args.seed)?;
    println!("{}", serde_json::to_string_pretty(&probe)?);
    Ok(0)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Solve(a) => solve(a),
        Command::Census(a) => census_cmd(a),
        Command::NehariCheck(a) => nehari_check(a),
        Command::Spectrum(a) => spectrum_cmd(a),
        Command::MtProbe(a) => mt_probe(a),
    };
    match result {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e) as u8)
        }
    }
}
