//! Batch experiment driver: plain-text config in, CSV results out.
//!
//! A config file is one `key = value` per line with `#` comments. The
//! experiment is the cross product of the listed protocols, SNR points,
//! latency caps, estimation-error variants and repetitions; every cell gets
//! its own deterministic seed derived from the master seed, so any row can
//! be reproduced in isolation. Rows are emitted in the fixed nest order
//! (protocol, snr, lol, csi, repetition) regardless of how many workers ran
//! them, and measured floats are printed with six significant digits, so a
//! repeated run yields byte-identical output.

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use rayon::prelude::*;

use crate::channel::{CsiErrorModel, Topology};
use crate::engine::{run, ProtocolKind, RunMetrics, SimConfig};
use crate::error::{Error, Result};
use crate::modem::Constellation;

/// A parsed sweep description.
#[derive(Debug, Clone, PartialEq)]
pub struct Experiment {
    pub name: String,
    pub topology: Topology,
    pub buffer_packets: usize,
    pub symbols_per_packet: usize,
    pub packet_target: usize,
    pub snr_grid: Vec<f64>,
    pub protocols: Vec<ProtocolKind>,
    pub lol_values: Vec<usize>,
    pub csi_variants: Vec<CsiErrorModel>,
    pub repetitions: usize,
    pub g_calibration_draws: usize,
}

/// Reads and validates a config file.
pub fn parse_config(path: &Path) -> Result<Experiment> {
    let text = fs::read_to_string(path)?;
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "experiment".to_string());
    parse_config_str(&name, &text)
}

/// Parses config text. Split from [`parse_config`] so tests can feed
/// strings directly.
pub fn parse_config_str(name: &str, text: &str) -> Result<Experiment> {
    let mut values: HashMap<&str, (usize, String)> = HashMap::new();
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| Error::Config {
            line: line_no,
            msg: format!("expected `key = value`, got `{line}`"),
        })?;
        let key = key.trim();
        let value = value.trim();
        const KNOWN: [&str; 15] = [
            "K",
            "N",
            "Ms",
            "U",
            "V",
            "J",
            "LoL",
            "T",
            "n_packets",
            "snr_db_list",
            "protocols",
            "beta",
            "alpha",
            "repetitions",
            "g_calibration_draws",
        ];
        let key = KNOWN
            .iter()
            .find(|&&k| k == key)
            .ok_or_else(|| Error::Config {
                line: line_no,
                msg: format!("unknown key `{key}`"),
            })?;
        if values
            .insert(key, (line_no, value.to_string()))
            .is_some()
        {
            return Err(Error::Config {
                line: line_no,
                msg: format!("duplicate key `{key}`"),
            });
        }
    }

    let at = |key: &str| values.get(key).cloned();
    let uint = |key: &str, default: usize| -> Result<(usize, usize)> {
        match at(key) {
            None => Ok((default, 0)),
            Some((line, v)) => v
                .parse::<usize>()
                .map(|x| (x, line))
                .map_err(|_| Error::Config {
                    line,
                    msg: format!("`{key}` must be a non-negative integer, got `{v}`"),
                }),
        }
    };
    let uint_list = |key: &str, default: Vec<usize>| -> Result<(Vec<usize>, usize)> {
        match at(key) {
            None => Ok((default, 0)),
            Some((line, v)) => v
                .split(',')
                .map(|p| p.trim().parse::<usize>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map(|x| (x, line))
                .map_err(|_| Error::Config {
                    line,
                    msg: format!("`{key}` must be a comma-separated integer list, got `{v}`"),
                }),
        }
    };
    let float_list = |key: &str, default: Vec<f64>| -> Result<(Vec<f64>, usize)> {
        match at(key) {
            None => Ok((default, 0)),
            Some((line, v)) => {
                let parsed = v
                    .split(',')
                    .map(|p| p.trim().parse::<f64>())
                    .collect::<std::result::Result<Vec<_>, _>>()
                    .map_err(|_| Error::Config {
                        line,
                        msg: format!("`{key}` must be a comma-separated number list, got `{v}`"),
                    })?;
                if parsed.iter().any(|x| !x.is_finite()) {
                    return Err(Error::Config {
                        line,
                        msg: format!("`{key}` entries must be finite"),
                    });
                }
                Ok((parsed, line))
            }
        }
    };

    let (ms, _) = uint("Ms", 2)?;
    let (k, _) = uint("K", 5)?;
    let (n, _) = uint("N", 10)?;
    let (u, _) = uint("U", 2)?;
    let (v, v_line) = uint("V", 1)?;
    let topology = Topology::new(k, n, ms, u, v).map_err(|e| Error::Config {
        line: v_line,
        msg: e.to_string(),
    })?;

    let (j, j_line) = uint("J", 3 * ms)?;
    if j == 0 || !j.is_multiple_of(ms) {
        return Err(Error::Config {
            line: j_line,
            msg: format!("`J` must be a positive multiple of Ms={ms}, got {j}"),
        });
    }
    let groups = j / ms;
    let (lol_values, _) = uint_list("LoL", vec![k * groups + 1])?;
    let (t, t_line) = uint("T", 100)?;
    if t == 0 {
        return Err(Error::Config {
            line: t_line,
            msg: "`T` must be positive".into(),
        });
    }
    let (n_packets, np_line) = uint("n_packets", 1000 * ms)?;
    if n_packets == 0 {
        return Err(Error::Config {
            line: np_line,
            msg: "`n_packets` must be positive".into(),
        });
    }
    let (snr_grid, snr_line) = float_list("snr_db_list", vec![0.0, 2.0, 4.0, 6.0, 8.0, 10.0])?;
    if snr_grid.is_empty() {
        return Err(Error::Config {
            line: snr_line,
            msg: "`snr_db_list` must be nonempty".into(),
        });
    }

    let protocols = match at("protocols") {
        None => vec![ProtocolKind::Mwc, ProtocolKind::MaxLink],
        Some((line, v)) => v
            .split(',')
            .map(|p| match p.trim() {
                "MWC" => Ok(ProtocolKind::Mwc),
                "MAXLINK" => Ok(ProtocolKind::MaxLink),
                other => Err(Error::Config {
                    line,
                    msg: format!("unknown protocol `{other}` (expected MWC or MAXLINK)"),
                }),
            })
            .collect::<Result<Vec<_>>>()?,
    };

    let (betas, beta_line) = float_list("beta", vec![0.0])?;
    let (alphas, alpha_line) = float_list("alpha", vec![1.0])?;
    // A singleton broadcasts across the other list; otherwise lengths must
    // agree pairwise.
    let n_variants = betas.len().max(alphas.len());
    if (betas.len() != n_variants && betas.len() != 1)
        || (alphas.len() != n_variants && alphas.len() != 1)
    {
        return Err(Error::Config {
            line: beta_line.max(alpha_line),
            msg: format!(
                "`beta` ({}) and `alpha` ({}) lists must match in length or be singletons",
                betas.len(),
                alphas.len()
            ),
        });
    }
    let csi_variants = (0..n_variants)
        .map(|i| {
            let b = betas[i.min(betas.len() - 1)];
            let a = alphas[i.min(alphas.len() - 1)];
            CsiErrorModel::new(b, a).map_err(|e| Error::Config {
                line: beta_line.max(alpha_line),
                msg: e.to_string(),
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let (repetitions, rep_line) = uint("repetitions", 1)?;
    if repetitions == 0 {
        return Err(Error::Config {
            line: rep_line,
            msg: "`repetitions` must be positive".into(),
        });
    }
    let (g_calibration_draws, g_line) = uint("g_calibration_draws", 1000)?;
    if g_calibration_draws == 0 {
        return Err(Error::Config {
            line: g_line,
            msg: "`g_calibration_draws` must be positive".into(),
        });
    }

    Ok(Experiment {
        name: name.to_string(),
        topology,
        buffer_packets: j,
        symbols_per_packet: t,
        packet_target: n_packets,
        snr_grid,
        protocols,
        lol_values,
        csi_variants,
        repetitions,
        g_calibration_draws,
    })
}

/// One scheduled run of the sweep.
#[derive(Debug, Clone)]
struct Job {
    protocol: ProtocolKind,
    snr_db: f64,
    lol: usize,
    csi: CsiErrorModel,
    seed: u64,
}

/// Finished sweep: the CSV text plus descriptions of any failed runs.
#[derive(Debug, Clone)]
pub struct ExperimentOutcome {
    pub csv: String,
    pub failures: Vec<String>,
}

impl ExperimentOutcome {
    pub fn all_succeeded(&self) -> bool {
        self.failures.is_empty()
    }
}

const SPLITMIX_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

fn splitmix64(seed: u64) -> u64 {
    let mut z = seed.wrapping_add(SPLITMIX_GAMMA);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Per-row seed: a splitmix64 chain folding the sweep indices into the
/// master seed, one mixing round per index.
fn derive_seed(master: u64, indices: &[u64]) -> u64 {
    let mut s = splitmix64(master);
    for &i in indices {
        s = splitmix64(s ^ i.wrapping_add(1));
    }
    s
}

fn jobs(exp: &Experiment, master_seed: u64) -> Vec<Job> {
    let mut out = Vec::new();
    for (pi, &protocol) in exp.protocols.iter().enumerate() {
        for (si, &snr_db) in exp.snr_grid.iter().enumerate() {
            for (li, &lol) in exp.lol_values.iter().enumerate() {
                for (ci, &csi) in exp.csi_variants.iter().enumerate() {
                    for ri in 0..exp.repetitions {
                        out.push(Job {
                            protocol,
                            snr_db,
                            lol,
                            csi,
                            seed: derive_seed(master_seed, &[
                                pi as u64, si as u64, li as u64, ci as u64, ri as u64,
                            ]),
                        });
                    }
                }
            }
        }
    }
    out
}

fn sim_config(exp: &Experiment, job: &Job) -> SimConfig {
    SimConfig {
        topology: exp.topology,
        snr_db: job.snr_db,
        n0: 1.0,
        buffer_packets: exp.buffer_packets,
        lol: job.lol,
        symbols_per_packet: exp.symbols_per_packet,
        packet_target: exp.packet_target,
        csi: job.csi,
        seed: job.seed,
        protocol: job.protocol,
        g_calibration_draws: exp.g_calibration_draws,
        constellation: Constellation::bpsk(),
    }
}

pub const CSV_HEADER: &str =
    "snr_db,protocol,lol,beta,alpha,seed,ber,avg_sum_rate,avg_delay,n_sr,n_rs,slots";

fn csv_row(job: &Job, m: &RunMetrics) -> String {
    format!(
        "{},{},{},{},{},{},{:.5e},{:.5e},{:.5e},{},{},{}",
        job.snr_db,
        job.protocol.label(),
        job.lol,
        job.csi.beta,
        job.csi.alpha,
        job.seed,
        m.ber,
        m.sum_rate_avg,
        m.avg_delay,
        m.n_sr,
        m.n_rs,
        m.slots(),
    )
}

/// Runs the whole sweep, optionally capping the worker thread count, and
/// assembles the CSV in schedule order.
pub fn run_experiment(
    exp: &Experiment,
    master_seed: u64,
    workers: Option<usize>,
) -> Result<ExperimentOutcome> {
    let schedule = jobs(exp, master_seed);
    let execute = || -> Vec<(Job, Result<RunMetrics>)> {
        schedule
            .par_iter()
            .map(|job| (job.clone(), run(sim_config(exp, job))))
            .collect()
    };
    let results = match workers {
        Some(w) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(w)
                .build()
                .map_err(|e| Error::InvalidArgument(format!("worker pool: {e}")))?;
            pool.install(execute)
        }
        None => execute(),
    };

    let mut csv = String::from(CSV_HEADER);
    csv.push('\n');
    let mut failures = Vec::new();
    for (job, result) in &results {
        match result {
            Ok(metrics) => {
                debug_assert!((0.0..=1.0).contains(&metrics.ber));
                csv.push_str(&csv_row(job, metrics));
                csv.push('\n');
            }
            Err(e) => failures.push(format!(
                "run failed (protocol={}, snr_db={}, lol={}, beta={}, seed={}): {e}",
                job.protocol.label(),
                job.snr_db,
                job.lol,
                job.csi.beta,
                job.seed
            )),
        }
    }
    Ok(ExperimentOutcome { csv, failures })
}

/// Writes `content` to `path` atomically: a temp file in the same directory
/// is renamed over the target only after a complete write.
pub fn write_atomic(path: &Path, content: &str) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty());
    let mut tmp = match dir {
        Some(d) => tempfile::NamedTempFile::new_in(d)?,
        None => tempfile::NamedTempFile::new_in(".")?,
    };
    use std::io::Write;
    tmp.write_all(content.as_bytes())?;
    tmp.flush()?;
    tmp.persist(path)
        .map_err(|e| Error::Io(e.error))?;
    Ok(())
}
