//! Command-line driver: sweep the number of APs, run Monte Carlo trials and
//! write CSV results plus an optional SVG plot.

use std::collections::HashMap;
use std::path::PathBuf;
use std::process::ExitCode;
use std::str::FromStr;

use clap::Parser;

use cfmimo::config::{dbm_to_mw, NetworkConfig, Scheme};
use cfmimo::harness::{emit_csv, emit_plot, run_experiment, ExperimentPlan};
use cfmimo::memory::{AllocationRule, MemoryKind, MemoryPolicy};

#[derive(Parser, Debug)]
#[command(
    name = "cfmimo",
    about = "Cell-free massive MIMO uplink with daisy-chain fronthaul and limited-memory APs"
)]
struct Cli {
    /// Config file with `key = value` lines; CLI flags override it.
    #[arg(long)]
    config: Option<PathBuf>,

    /// Comma-separated AP counts to sweep, e.g. 2,4,8,16,32,64,128.
    #[arg(long)]
    l_list: Option<String>,

    /// Total antenna count NL, distributed over each L of the sweep.
    #[arg(long)]
    total_antennas: Option<usize>,

    /// Number of single-antenna users K.
    #[arg(long)]
    users: Option<usize>,

    /// Compression scheme (vc, ec or none); repeat for several.
    #[arg(long = "scheme")]
    schemes: Vec<String>,

    /// Memory model: fap (fixed per AP), ft (fixed total) or inf.
    #[arg(long)]
    memory: Option<String>,

    /// Memory capacity in KB (C_AP for fap, C_T for ft).
    #[arg(long)]
    capacity_kb: Option<u64>,

    /// Memory capacity in MB.
    #[arg(long)]
    capacity_mb: Option<u64>,

    /// OFDM subcarriers F sharing each AP's memory.
    #[arg(long)]
    subcarriers: Option<usize>,

    /// Monte Carlo trials per configuration.
    #[arg(long)]
    trials: Option<usize>,

    /// Master seed for the derived per-trial RNG streams.
    #[arg(long)]
    seed: Option<u64>,

    /// Per-user transmit power, dBm.
    #[arg(long)]
    power_dbm: Option<f64>,

    /// Noise power per antenna, dBm.
    #[arg(long)]
    noise_dbm: Option<f64>,

    /// Outer square perimeter, meters (APs sit on it).
    #[arg(long)]
    perimeter_m: Option<f64>,

    /// Inner square perimeter, meters (users inside it).
    #[arg(long)]
    inner_perimeter_m: Option<f64>,

    /// Vertical AP-user offset, meters.
    #[arg(long)]
    height_m: Option<f64>,

    /// Per-vector budget rule: per-ap-load or uniform-worst-case.
    #[arg(long)]
    alloc: Option<String>,

    /// Uplink fraction tau_u / tau_c applied to the SE.
    #[arg(long)]
    tau_factor: Option<f64>,

    /// Antenna correlation coefficient of the exponential model (0 = none).
    #[arg(long)]
    corr_rho: Option<f64>,

    /// Worker threads; defaults to all cores.
    #[arg(long)]
    threads: Option<usize>,

    /// Output CSV path.
    #[arg(long)]
    out: Option<PathBuf>,

    /// Optional SVG plot path.
    #[arg(long)]
    plot: Option<PathBuf>,
}

struct Usage(String);

fn parse_config_file(path: &PathBuf) -> Result<HashMap<String, String>, String> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| format!("cannot read config file {}: {e}", path.display()))?;
    let mut map = HashMap::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(format!(
                "{}:{}: expected `key = value`, got `{raw}`",
                path.display(),
                lineno + 1
            ));
        };
        map.insert(key.trim().to_string(), value.trim().to_string());
    }
    Ok(map)
}

/// CLI value if given, else config-file value, else the default.
fn resolve<T: FromStr>(
    cli: Option<T>,
    file: &HashMap<String, String>,
    key: &str,
    default: T,
) -> Result<T, Usage>
where
    T::Err: std::fmt::Display,
{
    if let Some(v) = cli {
        return Ok(v);
    }
    match file.get(key) {
        Some(raw) => raw
            .parse()
            .map_err(|e| Usage(format!("config key `{key}`: {e}"))),
        None => Ok(default),
    }
}

fn build_plan(cli: &Cli, file: &HashMap<String, String>) -> Result<(ExperimentPlan, PathBuf, Option<PathBuf>), Usage> {
    let l_list_raw = resolve(
        cli.l_list.clone(),
        file,
        "l-list",
        "2,4,8,16,32,64,128".to_string(),
    )?;
    let l_sweep: Vec<usize> = l_list_raw
        .split(',')
        .map(|s| {
            s.trim()
                .parse()
                .map_err(|e| Usage(format!("bad L value `{s}`: {e}")))
        })
        .collect::<Result<_, _>>()?;

    let total_antennas = resolve(cli.total_antennas, file, "total-antennas", 128)?;
    let users = resolve(cli.users, file, "users", 4)?;
    let subcarriers = resolve(cli.subcarriers, file, "subcarriers", 1024)?;
    let trials = resolve(cli.trials, file, "trials", 100)?;
    let seed = resolve(cli.seed, file, "seed", 1)?;
    let power_dbm = resolve(cli.power_dbm, file, "power-dbm", 10.0)?;
    let noise_dbm = resolve(cli.noise_dbm, file, "noise-dbm", -85.0)?;
    let perimeter_m = resolve(cli.perimeter_m, file, "perimeter-m", 500.0)?;
    let inner_perimeter_m = resolve(cli.inner_perimeter_m, file, "inner-perimeter-m", 400.0)?;
    let height_m = resolve(cli.height_m, file, "height-m", 5.0)?;
    let tau_factor = resolve(cli.tau_factor, file, "tau-factor", 1.0)?;
    let corr_rho = resolve(cli.corr_rho, file, "corr-rho", 0.0)?;

    let scheme_names: Vec<String> = if !cli.schemes.is_empty() {
        cli.schemes.clone()
    } else if let Some(raw) = file.get("scheme") {
        raw.split(',').map(|s| s.trim().to_string()).collect()
    } else {
        vec!["vc".into(), "ec".into()]
    };
    let schemes: Vec<Scheme> = scheme_names
        .iter()
        .map(|s| Scheme::from_str(s).map_err(|e| Usage(e.to_string())))
        .collect::<Result<_, _>>()?;

    let memory_name = resolve(cli.memory.clone(), file, "memory", "fap".to_string())?;
    let kind = match memory_name.as_str() {
        "fap" => MemoryKind::FixedPerAp,
        "ft" => MemoryKind::FixedTotal,
        "inf" => MemoryKind::Infinite,
        other => return Err(Usage(format!("unknown memory model `{other}`"))),
    };

    let capacity_kb = resolve(cli.capacity_kb, file, "capacity-kb", u64::MAX)?;
    let capacity_mb = resolve(cli.capacity_mb, file, "capacity-mb", u64::MAX)?;
    let capacity_bytes = match (capacity_kb, capacity_mb) {
        (u64::MAX, u64::MAX) => 64 * 1024, // 64 KB
        (kb, u64::MAX) => kb * 1024,
        (u64::MAX, mb) => mb * 1024 * 1024,
        _ => {
            return Err(Usage(
                "give either --capacity-kb or --capacity-mb, not both".into(),
            ))
        }
    };
    if kind == MemoryKind::Infinite
        && (capacity_kb != u64::MAX || capacity_mb != u64::MAX)
    {
        eprintln!("warning: --memory inf ignores the given capacity");
    }

    let alloc_name = resolve(cli.alloc.clone(), file, "alloc", "per-ap-load".to_string())?;
    let allocation_rule = match alloc_name.as_str() {
        "per-ap-load" => AllocationRule::PerApLoad,
        "uniform-worst-case" => AllocationRule::UniformWorstCase,
        other => return Err(Usage(format!("unknown allocation rule `{other}`"))),
    };

    let policy = MemoryPolicy {
        kind,
        capacity_bytes: if kind == MemoryKind::Infinite {
            0
        } else {
            capacity_bytes
        },
        allocation_rule,
    };

    let first_l = *l_sweep.first().ok_or_else(|| Usage("empty L sweep".into()))?;
    if first_l == 0 || total_antennas % first_l != 0 {
        return Err(Usage(format!(
            "L = {first_l} does not divide the total antenna count {total_antennas}"
        )));
    }

    let base = NetworkConfig {
        num_aps: first_l,
        antennas_per_ap: total_antennas / first_l,
        num_users: users,
        power_mw: dbm_to_mw(power_dbm),
        noise_mw: dbm_to_mw(noise_dbm),
        perimeter_m,
        inner_perimeter_m,
        height_m,
        subcarriers,
        tau_factor,
        corr_rho,
        memory_policy: policy,
        scheme: schemes[0],
        trials,
        master_seed: seed,
    };

    let plan = ExperimentPlan {
        base,
        l_sweep,
        schemes,
        policies: vec![policy],
    };
    plan.validate().map_err(|e| Usage(e.to_string()))?;

    let out = resolve(cli.out.clone(), file, "out", PathBuf::from("results.csv"))?;
    let plot = match cli.plot.clone() {
        Some(p) => Some(p),
        None => file.get("plot").map(PathBuf::from),
    };
    Ok((plan, out, plot))
}

fn main() -> ExitCode {
    let cli = Cli::parse();

    let file = match &cli.config {
        Some(path) => match parse_config_file(path) {
            Ok(map) => map,
            Err(msg) => {
                eprintln!("error: {msg}");
                return ExitCode::from(2);
            }
        },
        None => HashMap::new(),
    };

    let (plan, out, plot) = match build_plan(&cli, &file) {
        Ok(v) => v,
        Err(Usage(msg)) => {
            eprintln!("error: {msg}");
            return ExitCode::from(2);
        }
    };

    if let Some(threads) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
        {
            eprintln!("error: {e}");
            return ExitCode::FAILURE;
        }
    }

    let records = match run_experiment(&plan) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::FAILURE;
        }
    };

    if let Err(e) = emit_csv(&records, &out) {
        eprintln!("error: {e}");
        return ExitCode::FAILURE;
    }
    eprintln!("wrote {} records to {}", records.len(), out.display());

    if let Some(plot_path) = plot {
        if let Err(e) = emit_plot(&records, &plot_path) {
            eprintln!("error: {e}");
            return ExitCode::FAILURE;
        }
        eprintln!("wrote plot to {}", plot_path.display());
    }

    ExitCode::SUCCESS
}
