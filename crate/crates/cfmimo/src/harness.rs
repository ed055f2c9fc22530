//! Monte Carlo experiment driver: deterministic per-trial RNG streams,
//! CSV output and an SVG plot of the per-user SE versus L.

use std::fs;
use std::io::Write as _;
use std::path::Path;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use sha2::{Digest, Sha256};

use crate::channel::draw_channel;
use crate::compression::{build_whitener, ec_waterfill, vc_waterfill, Compression, Whitener};
use crate::config::{NetworkConfig, Scheme};
use crate::error::{Error, Result};
use crate::geometry::{place_aps, place_users, Placement};
use crate::memory::{per_vector_bits, MemoryKind, MemoryPolicy};
use crate::metrics::se_report;

/// A sweep over AP counts, schemes and memory policies around one base config.
#[derive(Debug, Clone)]
pub struct ExperimentPlan {
    pub base: NetworkConfig,
    pub l_sweep: Vec<usize>,
    pub schemes: Vec<Scheme>,
    pub policies: Vec<MemoryPolicy>,
}

impl ExperimentPlan {
    pub fn validate(&self) -> Result<()> {
        self.base.validate()?;
        if self.l_sweep.is_empty() {
            return Err(Error::Config("L sweep must be nonempty".into()));
        }
        if self.schemes.is_empty() {
            return Err(Error::Config("need at least one scheme".into()));
        }
        if self.policies.is_empty() {
            return Err(Error::Config("need at least one memory policy".into()));
        }
        let total = self.base.total_antennas();
        for &l in &self.l_sweep {
            if l == 0 || total % l != 0 {
                return Err(Error::Config(format!(
                    "L = {l} does not divide the total antenna count {total}"
                )));
            }
        }
        Ok(())
    }
}

/// One Monte Carlo trial's SE outputs.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialRecord {
    pub scheme: Scheme,
    pub memory_kind: MemoryKind,
    pub capacity_bytes: u64,
    pub num_aps: usize,
    pub antennas_per_ap: usize,
    pub num_users: usize,
    pub subcarriers: usize,
    pub trial_index: usize,
    pub seed: u64,
    pub sum_se_exact: f64,
    pub sum_se_bound: f64,
    pub per_user_exact: f64,
    pub per_user_bound: f64,
}

impl TrialRecord {
    fn sort_key(&self) -> (MemoryKind, u64, Scheme, usize, usize) {
        (
            self.memory_kind,
            self.capacity_bytes,
            self.scheme,
            self.num_aps,
            self.trial_index,
        )
    }
}

/// Derive the 32-byte RNG seed of one trial from its identifying key.
///
/// The scheme and capacity are deliberately left out: the same channels are
/// drawn for every scheme and capacity under a memory kind, so scheme and
/// capacity comparisons are paired and a compression-free run cannot depend
/// on the capacity at all.
fn trial_seed(master_seed: u64, kind: MemoryKind, num_aps: usize, trial: usize) -> [u8; 32] {
    let key = format!("{master_seed}:{kind}:{num_aps}:{trial}");
    let digest = Sha256::digest(key.as_bytes());
    let mut seed = [0u8; 32];
    seed.copy_from_slice(&digest);
    seed
}

fn seed_label(seed: &[u8; 32]) -> u64 {
    u64::from_le_bytes(seed[..8].try_into().unwrap())
}

fn run_trial(
    cfg: &NetworkConfig,
    policy: &MemoryPolicy,
    scheme: Scheme,
    trial: usize,
) -> Result<TrialRecord> {
    let seed = trial_seed(cfg.master_seed, policy.kind, cfg.num_aps, trial);
    let mut rng = ChaCha8Rng::from_seed(seed);

    let placement = Placement {
        ap_positions: place_aps(cfg.num_aps, cfg.perimeter_m)?,
        user_positions: place_users(cfg.num_users, cfg, &mut rng)?,
    };
    let channel = draw_channel(cfg, &placement, &mut rng)?;
    let budget = per_vector_bits(policy, cfg.num_aps, cfg.subcarriers)?;

    let whiteners: Vec<Whitener> = channel
        .h
        .iter()
        .zip(&budget.per_ap)
        .map(|(h, &b)| {
            let alloc = match scheme {
                Scheme::None => Compression::None,
                Scheme::Vc => Compression::Vc(vc_waterfill(h, cfg.power_mw, cfg.noise_mw, b)?),
                Scheme::Ec => Compression::Ec(ec_waterfill(h, cfg.power_mw, cfg.noise_mw, b)?),
            };
            Ok(build_whitener(&alloc, cfg.noise_mw, cfg.antennas_per_ap))
        })
        .collect::<Result<_>>()?;

    let report = se_report(
        &channel.h,
        &whiteners,
        cfg.power_mw,
        scheme,
        cfg.num_users,
        cfg.tau_factor,
    );

    Ok(TrialRecord {
        scheme,
        memory_kind: policy.kind,
        capacity_bytes: if policy.kind == MemoryKind::Infinite {
            0
        } else {
            policy.capacity_bytes
        },
        num_aps: cfg.num_aps,
        antennas_per_ap: cfg.antennas_per_ap,
        num_users: cfg.num_users,
        subcarriers: cfg.subcarriers,
        trial_index: trial,
        seed: seed_label(&seed),
        sum_se_exact: report.sum_se_exact,
        sum_se_bound: report.sum_se_bound,
        per_user_exact: report.per_user_exact,
        per_user_bound: report.per_user_bound,
    })
}

/// Run every (policy, scheme, L, trial) combination of the plan.
///
/// Trials execute in parallel; each derives its own RNG stream, so the
/// record set is identical to a serial run. Records come back sorted.
pub fn run_experiment(plan: &ExperimentPlan) -> Result<Vec<TrialRecord>> {
    plan.validate()?;

    let mut jobs = Vec::new();
    for policy in &plan.policies {
        for &scheme in &plan.schemes {
            for &l in &plan.l_sweep {
                let cfg = plan.base.with_num_aps(l)?;
                for trial in 0..plan.base.trials {
                    jobs.push((cfg.clone(), *policy, scheme, trial));
                }
            }
        }
    }

    let mut records: Vec<TrialRecord> = jobs
        .par_iter()
        .map(|(cfg, policy, scheme, trial)| run_trial(cfg, policy, *scheme, *trial))
        .collect::<Result<_>>()?;
    records.sort_by_key(|r| r.sort_key());
    Ok(records)
}

pub const CSV_HEADER: &str = "scheme,memory_kind,capacity_bytes,L,N,K,F,trial,seed,sum_se_exact,sum_se_bound,per_user_exact,per_user_bound";

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

pub fn format_records(records: &[TrialRecord]) -> String {
    let mut out = String::with_capacity(64 * (records.len() + 1));
    out.push_str(CSV_HEADER);
    out.push('\n');
    for r in records {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{:.9e},{:.9e},{:.9e},{:.9e}\n",
            r.scheme,
            r.memory_kind,
            r.capacity_bytes,
            r.num_aps,
            r.antennas_per_ap,
            r.num_users,
            r.subcarriers,
            r.trial_index,
            r.seed,
            r.sum_se_exact,
            r.sum_se_bound,
            r.per_user_exact,
            r.per_user_bound,
        ));
    }
    out
}

pub fn emit_csv(records: &[TrialRecord], path: &Path) -> Result<()> {
    let mut file = fs::File::create(path).map_err(io_err(path))?;
    file.write_all(format_records(records).as_bytes())
        .map_err(io_err(path))
}

/// A curve group: same scheme, memory kind and capacity.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
struct GroupKey {
    memory_kind: MemoryKind,
    capacity_bytes: u64,
    scheme: Scheme,
}

impl GroupKey {
    fn label(&self) -> String {
        match self.memory_kind {
            MemoryKind::Infinite => format!("{} / infinite memory", self.scheme),
            _ => {
                let cap = self.capacity_bytes;
                let cap_label = if cap >= 1 << 20 && cap % (1 << 20) == 0 {
                    format!("{}MB", cap >> 20)
                } else if cap >= 1 << 10 && cap % (1 << 10) == 0 {
                    format!("{}KB", cap >> 10)
                } else {
                    format!("{cap}B")
                };
                format!("{} / {} {}", self.scheme, self.memory_kind, cap_label)
            }
        }
    }
}

/// Group means of per-user exact SE, keyed by (group, L).
pub fn group_means(records: &[TrialRecord]) -> Vec<(String, Vec<(usize, f64)>)> {
    use std::collections::BTreeMap;
    let mut acc: BTreeMap<(GroupKey, usize), (f64, usize)> = BTreeMap::new();
    for r in records {
        let key = GroupKey {
            memory_kind: r.memory_kind,
            capacity_bytes: r.capacity_bytes,
            scheme: r.scheme,
        };
        let e = acc.entry((key, r.num_aps)).or_insert((0.0, 0));
        e.0 += r.per_user_exact;
        e.1 += 1;
    }
    let mut curves: BTreeMap<GroupKey, Vec<(usize, f64)>> = BTreeMap::new();
    for ((key, l), (sum, n)) in acc {
        curves.entry(key).or_default().push((l, sum / n as f64));
    }
    curves
        .into_iter()
        .map(|(k, pts)| (k.label(), pts))
        .collect()
}

const PALETTE: [&str; 8] = [
    "#00a0c0", "#000000", "#c02020", "#208020", "#8040c0", "#c08000", "#2050c0", "#707070",
];

/// Render the mean per-user SE versus L as a self-contained SVG.
pub fn emit_plot(records: &[TrialRecord], path: &Path) -> Result<()> {
    if records.is_empty() {
        return Err(Error::Config(
            "cannot plot an empty record set; run at least one trial".into(),
        ));
    }
    let curves = group_means(records);

    let mut ls: Vec<usize> = records.iter().map(|r| r.num_aps).collect();
    ls.sort_unstable();
    ls.dedup();
    let x_index = |l: usize| ls.iter().position(|&v| v == l).unwrap();

    let (y_min, y_max) = curves
        .iter()
        .flat_map(|(_, pts)| pts.iter().map(|&(_, y)| y))
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), y| {
            (lo.min(y), hi.max(y))
        });
    let pad = ((y_max - y_min) * 0.08).max(1e-6);
    let (y_min, y_max) = (y_min - pad, y_max + pad);

    let (w, h) = (760.0, 480.0);
    let (ml, mr, mt, mb) = (70.0, 220.0, 20.0, 55.0);
    let px = |i: usize| {
        if ls.len() == 1 {
            ml + (w - ml - mr) / 2.0
        } else {
            ml + (w - ml - mr) * i as f64 / (ls.len() - 1) as f64
        }
    };
    let py = |y: f64| mt + (h - mt - mb) * (1.0 - (y - y_min) / (y_max - y_min));

    let mut svg = String::new();
    svg.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" viewBox=\"0 0 {w} {h}\">\n"
    ));
    svg.push_str("<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n");
    // axes
    svg.push_str(&format!(
        "<line x1=\"{ml}\" y1=\"{0}\" x2=\"{1}\" y2=\"{0}\" stroke=\"black\"/>\n",
        h - mb,
        w - mr
    ));
    svg.push_str(&format!(
        "<line x1=\"{ml}\" y1=\"{mt}\" x2=\"{ml}\" y2=\"{}\" stroke=\"black\"/>\n",
        h - mb
    ));
    for (i, &l) in ls.iter().enumerate() {
        let x = px(i);
        svg.push_str(&format!(
            "<line x1=\"{x}\" y1=\"{0}\" x2=\"{x}\" y2=\"{1}\" stroke=\"black\"/>\n",
            h - mb,
            h - mb + 5.0
        ));
        svg.push_str(&format!(
            "<text x=\"{x}\" y=\"{}\" text-anchor=\"middle\" font-size=\"12\">L={l}</text>\n",
            h - mb + 20.0
        ));
    }
    for j in 0..=5 {
        let y = y_min + (y_max - y_min) * j as f64 / 5.0;
        let yp = py(y);
        svg.push_str(&format!(
            "<line x1=\"{0}\" y1=\"{yp}\" x2=\"{ml}\" y2=\"{yp}\" stroke=\"black\"/>\n",
            ml - 5.0
        ));
        svg.push_str(&format!(
            "<text x=\"{0}\" y=\"{1}\" text-anchor=\"end\" font-size=\"12\">{y:.2}</text>\n",
            ml - 9.0,
            yp + 4.0
        ));
    }
    svg.push_str(&format!(
        "<text x=\"{0}\" y=\"{1}\" text-anchor=\"middle\" font-size=\"13\">Number of APs</text>\n",
        ml + (w - ml - mr) / 2.0,
        h - 12.0
    ));
    svg.push_str(&format!(
        "<text x=\"16\" y=\"{0}\" text-anchor=\"middle\" font-size=\"13\" transform=\"rotate(-90 16 {0})\">Average per-user SE (bit/s/Hz)</text>\n",
        mt + (h - mt - mb) / 2.0
    ));

    for (ci, (label, pts)) in curves.iter().enumerate() {
        let color = PALETTE[ci % PALETTE.len()];
        let points: Vec<String> = pts
            .iter()
            .map(|&(l, y)| format!("{:.2},{:.2}", px(x_index(l)), py(y)))
            .collect();
        svg.push_str(&format!(
            "<polyline fill=\"none\" stroke=\"{color}\" stroke-width=\"1.8\" points=\"{}\"/>\n",
            points.join(" ")
        ));
        for &(l, y) in pts {
            svg.push_str(&format!(
                "<circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"3\" fill=\"{color}\"/>\n",
                px(x_index(l)),
                py(y)
            ));
        }
        let ly = mt + 18.0 * ci as f64 + 10.0;
        svg.push_str(&format!(
            "<line x1=\"{0}\" y1=\"{ly}\" x2=\"{1}\" y2=\"{ly}\" stroke=\"{color}\" stroke-width=\"1.8\"/>\n",
            w - mr + 12.0,
            w - mr + 36.0
        ));
        svg.push_str(&format!(
            "<text x=\"{0}\" y=\"{1}\" font-size=\"12\">{label}</text>\n",
            w - mr + 42.0,
            ly + 4.0
        ));
    }
    svg.push_str("</svg>\n");

    fs::write(path, svg).map_err(io_err(path))
}

/// Symbol-level chain check hook used by tests; re-exported here so that the
/// estimator path stays wired to the same whitener construction as the
/// SE harness.
pub fn whiteners_for_scheme(
    channels: &[DMatrix<Complex64>],
    budgets: &[crate::memory::VectorBudget],
    scheme: Scheme,
    power: f64,
    sigma2: f64,
) -> Result<Vec<Whitener>> {
    channels
        .iter()
        .zip(budgets)
        .map(|(h, &b)| {
            let alloc = match scheme {
                Scheme::None => Compression::None,
                Scheme::Vc => Compression::Vc(vc_waterfill(h, power, sigma2, b)?),
                Scheme::Ec => Compression::Ec(ec_waterfill(h, power, sigma2, b)?),
            };
            Ok(build_whitener(&alloc, sigma2, h.nrows()))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::dbm_to_mw;
    use crate::memory::AllocationRule;

    fn plan(trials: usize) -> ExperimentPlan {
        ExperimentPlan {
            base: NetworkConfig {
                num_aps: 2,
                antennas_per_ap: 4,
                num_users: 2,
                power_mw: 10.0,
                noise_mw: dbm_to_mw(-85.0),
                perimeter_m: 500.0,
                inner_perimeter_m: 400.0,
                height_m: 5.0,
                subcarriers: 64,
                tau_factor: 1.0,
                corr_rho: 0.0,
                memory_policy: MemoryPolicy::infinite(),
                scheme: Scheme::None,
                trials,
                master_seed: 99,
            },
            l_sweep: vec![2, 4, 8],
            schemes: vec![Scheme::None, Scheme::Vc],
            policies: vec![MemoryPolicy {
                kind: MemoryKind::FixedPerAp,
                capacity_bytes: 4096,
                allocation_rule: AllocationRule::PerApLoad,
            }],
        }
    }

    #[test]
    fn record_cardinality() {
        let records = run_experiment(&plan(5)).unwrap();
        assert_eq!(records.len(), 3 * 2 * 5);
        for r in &records {
            assert_eq!(r.num_aps * r.antennas_per_ap, 8);
        }
    }

    #[test]
    fn identical_plans_give_identical_bytes() {
        let a = format_records(&run_experiment(&plan(3)).unwrap());
        let b = format_records(&run_experiment(&plan(3)).unwrap());
        assert_eq!(a, b);
    }

    #[test]
    fn serial_matches_parallel() {
        let p = plan(4);
        let parallel = run_experiment(&p).unwrap();
        let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let serial = pool.install(|| run_experiment(&p)).unwrap();
        assert_eq!(parallel, serial);
    }

    #[test]
    fn uncompressed_se_independent_of_capacity() {
        let mut p = plan(2);
        p.schemes = vec![Scheme::None];
        p.l_sweep = vec![4];
        let small = run_experiment(&p).unwrap();
        p.policies[0].capacity_bytes = 1 << 24;
        let large = run_experiment(&p).unwrap();
        for (a, b) in small.iter().zip(&large) {
            assert_eq!(a.sum_se_exact, b.sum_se_exact);
        }
    }

    #[test]
    fn infeasible_sweep_rejected_up_front() {
        let mut p = plan(1);
        p.l_sweep = vec![3];
        assert!(run_experiment(&p).is_err());
    }

    #[test]
    fn csv_round_trip() {
        let records = run_experiment(&plan(2)).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("out.csv");
        emit_csv(&records, &path).unwrap();
        let text = fs::read_to_string(&path).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], CSV_HEADER);
        assert_eq!(lines.len(), records.len() + 1);
        for (line, r) in lines[1..].iter().zip(&records) {
            let fields: Vec<&str> = line.split(',').collect();
            assert_eq!(fields.len(), 13);
            assert_eq!(fields[3].parse::<usize>().unwrap(), r.num_aps);
            let parsed: f64 = fields[9].parse().unwrap();
            assert!((parsed - r.sum_se_exact).abs() <= 1e-8 * r.sum_se_exact.abs());
        }
    }

    #[test]
    fn empty_csv_is_header_only() {
        assert_eq!(format_records(&[]), format!("{CSV_HEADER}\n"));
    }

    #[test]
    fn plot_has_one_polyline_per_group() {
        let records = run_experiment(&plan(2)).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("out.svg");
        emit_plot(&records, &path).unwrap();
        let svg = fs::read_to_string(&path).unwrap();
        // One (scheme=none) + one (scheme=vc) group under a single policy.
        assert_eq!(svg.matches("<polyline").count(), 2);
        assert!(svg.contains("L=2") && svg.contains("L=8"));
        assert!(emit_plot(&[], &path).is_err());
    }

    #[test]
    fn plot_group_means_match_recomputation() {
        let records = run_experiment(&plan(3)).unwrap();
        let curves = group_means(&records);
        for (label, pts) in curves {
            for (l, mean) in pts {
                let vals: Vec<f64> = records
                    .iter()
                    .filter(|r| {
                        r.num_aps == l
                            && label.starts_with(&r.scheme.to_string())
                    })
                    .map(|r| r.per_user_exact)
                    .collect();
                let expect = vals.iter().sum::<f64>() / vals.len() as f64;
                assert!((mean - expect).abs() < 1e-12);
            }
        }
    }
}
