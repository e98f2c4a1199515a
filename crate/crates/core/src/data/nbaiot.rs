//! Reader for the per-device, per-class N-BaIoT CSV files.
//!
//! Two directory layouts are recognised:
//!
//! * the original archive: `<Device>/benign_traffic.csv`,
//!   `<Device>/gafgyt_attacks/<attack>.csv`, `<Device>/mirai_attacks/<attack>.csv`
//! * the flattened mirror: `<n>.benign.csv`, `<n>.gafgyt.<attack>.csv`,
//!   `<n>.mirai.<attack>.csv` with `n` the device number 1–9.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rand::Rng;

use super::vocab::LabelVocab;
use crate::error::{Error, Result};
use crate::rng;

pub const N_FEATURES: usize = 115;

/// Device names of the flattened mirror, by device number.
pub const DEVICES: [&str; 9] = [
    "Danmini_Doorbell",
    "Ecobee_Thermostat",
    "Ennio_Doorbell",
    "Philips_B120N10_Baby_Monitor",
    "Provision_PT_737E_Security_Camera",
    "Provision_PT_838_Security_Camera",
    "Samsung_SNH_1011_N_Webcam",
    "SimpleHome_XCS7_1002_WHT_Security_Camera",
    "SimpleHome_XCS7_1003_WHT_Security_Camera",
];

/// The 115 column names in file order: five stream aggregates over five
/// decay windows.
pub fn feature_names() -> Vec<String> {
    const WINDOWS: [&str; 5] = ["L5", "L3", "L1", "L0.1", "L0.01"];
    const STATS_1D: [&str; 3] = ["weight", "mean", "variance"];
    const STATS_2D: [&str; 7] = ["weight", "mean", "std", "magnitude", "radius", "covariance", "pcc"];
    let mut names = Vec::with_capacity(N_FEATURES);
    for (prefix, stats) in [
        ("MI_dir", &STATS_1D[..]),
        ("H", &STATS_1D[..]),
        ("HH", &STATS_2D[..]),
        ("HH_jit", &STATS_1D[..]),
        ("HpHp", &STATS_2D[..]),
    ] {
        for w in WINDOWS {
            for s in stats {
                names.push(format!("{prefix}_{w}_{s}"));
            }
        }
    }
    names
}

/// Maps a file's (family, attack) to a vocabulary class; files whose class is
/// not in the vocabulary are skipped.
#[derive(Debug, Clone)]
pub struct ClassMap {
    pub vocab: LabelVocab,
    /// Extra `raw name -> class name` aliases, applied before the vocabulary
    /// lookup (for example `bashlite_udp -> gafgyt_udp`).
    pub aliases: BTreeMap<String, String>,
}

impl Default for ClassMap {
    fn default() -> Self {
        let aliases = ["combo", "junk", "scan", "tcp", "udp"]
            .iter()
            .map(|a| (format!("bashlite_{a}"), format!("gafgyt_{a}")))
            .collect();
        ClassMap {
            vocab: LabelVocab::nbaiot(),
            aliases,
        }
    }
}

/// Where a file came from, derived from its path.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FileTag {
    pub device: String,
    /// Raw class name such as `gafgyt_tcp`, before vocabulary filtering.
    pub class: String,
}

/// Derive device and class from a CSV path relative to the data root.
pub fn tag_for(rel: &Path) -> Option<FileTag> {
    let stem = rel.file_stem()?.to_str()?.to_ascii_lowercase();
    let dirs: Vec<String> = rel
        .parent()
        .map(|p| {
            p.components()
                .filter_map(|c| c.as_os_str().to_str().map(str::to_string))
                .collect()
        })
        .unwrap_or_default();
    let parts: Vec<&str> = stem.split('.').collect();

    if parts.len() >= 2 && parts[0].parse::<usize>().is_ok() {
        let n: usize = parts[0].parse().ok()?;
        let device = DEVICES.get(n.checked_sub(1)?)?.to_string();
        let class = match parts[1] {
            "benign" => "benign".to_string(),
            family @ ("gafgyt" | "bashlite" | "mirai") => format!("{family}_{}", parts.get(2)?),
            _ => return None,
        };
        return Some(FileTag { device, class });
    }

    let device = dirs.first()?.clone();
    let lower_dirs: Vec<String> = dirs.iter().map(|d| d.to_ascii_lowercase()).collect();
    let class = if stem.starts_with("benign") {
        "benign".to_string()
    } else {
        let fam = lower_dirs.iter().find_map(|d| {
        ["gafgyt", "bashlite", "mirai"].into_iter().find(|f| d.starts_with(f))
    })?;
        format!("{fam}_{stem}")
    };
    Some(FileTag { device, class })
}

/// Loaded feature rows with their source tags.
#[derive(Debug, Clone, Default)]
pub struct RawTable {
    /// Row-major `[n_rows, 115]`.
    pub features: Vec<f64>,
    /// Class id of each row.
    pub labels: Vec<usize>,
    /// Index into `devices` for each row.
    pub device_of: Vec<usize>,
    pub devices: Vec<String>,
    /// Rows read per `(device, class)`, before any reservoir cap.
    pub counts: BTreeMap<(String, String), usize>,
    /// Files read, relative to the data root, in load order.
    pub files: Vec<String>,
    /// Files skipped because their class is outside the vocabulary.
    pub skipped: Vec<String>,
    /// Rows dropped for non-numeric or missing cells.
    pub rejected_rows: usize,
}

impl RawTable {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.features[i * N_FEATURES..(i + 1) * N_FEATURES]
    }

    pub fn class_counts(&self, n_classes: usize) -> Vec<usize> {
        let mut c = vec![0; n_classes];
        self.labels.iter().for_each(|&l| c[l] += 1);
        c
    }

    /// Table restricted to `rows`, in the given order.
    pub fn select(&self, rows: &[usize]) -> RawTable {
        let mut features = Vec::with_capacity(rows.len() * N_FEATURES);
        for &i in rows {
            features.extend_from_slice(self.row(i));
        }
        RawTable {
            features,
            labels: rows.iter().map(|&i| self.labels[i]).collect(),
            device_of: rows.iter().map(|&i| self.device_of[i]).collect(),
            devices: self.devices.clone(),
            counts: self.counts.clone(),
            files: self.files.clone(),
            skipped: self.skipped.clone(),
            rejected_rows: self.rejected_rows,
        }
    }

    /// Append a row directly (used by generators and tests).
    pub fn push_row(&mut self, row: &[f64], label: usize, device: &str) -> Result<()> {
        if row.len() != N_FEATURES {
            return Err(Error::Shape(format!("row has {} features, expected {N_FEATURES}", row.len())));
        }
        let d = match self.devices.iter().position(|x| x == device) {
            Some(d) => d,
            None => {
                self.devices.push(device.to_string());
                self.devices.len() - 1
            }
        };
        self.features.extend_from_slice(row);
        self.labels.push(label);
        self.device_of.push(d);
        Ok(())
    }
}

#[derive(Debug, Clone, Default)]
pub struct LoadOptions {
    /// Keep only devices whose name contains one of these substrings
    /// (case-insensitive). Empty keeps all.
    pub device_filter: Vec<String>,
    pub class_map: ClassMap,
    /// Retain a seeded uniform reservoir of at most this many rows per class
    /// instead of every row. Counts still reflect every row read.
    pub reservoir: Option<(usize, u64)>,
}

fn collect_csvs(root: &Path, dir: &Path, out: &mut Vec<PathBuf>) -> Result<()> {
    let entries = std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    for e in entries {
        let path = e.map_err(|e| Error::io(dir, e))?.path();
        if path.is_dir() {
            collect_csvs(root, &path, out)?;
        } else if path.extension().is_some_and(|x| x.eq_ignore_ascii_case("csv")) {
            out.push(path.strip_prefix(root).unwrap().to_path_buf());
        }
    }
    Ok(())
}

struct Reservoir {
    cap: usize,
    seen: usize,
    slots: Vec<usize>,
    rng: rng::StreamRng,
}

/// Load every recognised CSV under `dir`, in sorted path order.
pub fn load_nbaiot(dir: &Path, opts: &LoadOptions) -> Result<RawTable> {
    if !dir.is_dir() {
        return Err(Error::io(
            dir,
            std::io::Error::new(std::io::ErrorKind::NotFound, "data directory not found"),
        ));
    }
    let mut files = Vec::new();
    collect_csvs(dir, dir, &mut files)?;
    files.sort();

    let vocab = &opts.class_map.vocab;
    let filters: Vec<String> = opts.device_filter.iter().map(|f| f.to_ascii_lowercase()).collect();
    let mut table = RawTable::default();
    let mut reservoirs: Vec<Option<Reservoir>> = (0..vocab.len())
        .map(|c| {
            opts.reservoir.map(|(cap, seed)| Reservoir {
                cap,
                seen: 0,
                slots: Vec::new(),
                rng: rng::stream(seed, &format!("reservoir/{}", vocab.name(c).unwrap())),
            })
        })
        .collect();

    for rel in files {
        let rel_str = rel.to_string_lossy().replace('\\', "/");
        let Some(tag) = tag_for(&rel) else {
            log::info!("ignoring unrecognised file {rel_str}");
            continue;
        };
        if !filters.is_empty() && !filters.iter().any(|f| tag.device.to_ascii_lowercase().contains(f)) {
            continue;
        }
        let class_name = opts.class_map.aliases.get(&tag.class).cloned().unwrap_or(tag.class.clone());
        let Some(class) = vocab.id(&class_name) else {
            log::info!("skipping {rel_str}: class {class_name} is not in the label vocabulary");
            table.skipped.push(rel_str);
            continue;
        };
        let path = dir.join(&rel);
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(true)
            .from_path(&path)
            .map_err(|e| Error::Schema { file: path.clone(), msg: e.to_string() })?;
        let header = reader
            .headers()
            .map_err(|e| Error::Schema { file: path.clone(), msg: e.to_string() })?
            .clone();
        if header.len() != N_FEATURES || header.iter().any(|h| h.trim().is_empty()) {
            return Err(Error::Schema {
                file: path,
                msg: format!("header has {} columns, expected {N_FEATURES} named columns", header.len()),
            });
        }
        let device_idx = match table.devices.iter().position(|d| *d == tag.device) {
            Some(i) => i,
            None => {
                table.devices.push(tag.device.clone());
                table.devices.len() - 1
            }
        };
        let mut row = [0.0f64; N_FEATURES];
        let mut n_rows = 0usize;
        let mut rejected = 0usize;
        for record in reader.records() {
            let record = match record {
                Ok(r) => r,
                Err(_) => {
                    rejected += 1;
                    continue;
                }
            };
            let ok = record.len() == N_FEATURES
                && record.iter().zip(row.iter_mut()).all(|(cell, slot)| match cell.trim().parse::<f64>() {
                    Ok(v) if v.is_finite() => {
                        *slot = v;
                        true
                    }
                    _ => false,
                });
            if !ok {
                rejected += 1;
                continue;
            }
            n_rows += 1;
            match reservoirs[class].as_mut() {
                None => {
                    table.features.extend_from_slice(&row);
                    table.labels.push(class);
                    table.device_of.push(device_idx);
                }
                Some(res) => {
                    res.seen += 1;
                    let target = if res.slots.len() < res.cap {
                        let at = table.labels.len();
                        table.features.extend_from_slice(&row);
                        table.labels.push(class);
                        table.device_of.push(device_idx);
                        res.slots.push(at);
                        None
                    } else {
                        let j = res.rng.gen_range(0..res.seen);
                        (j < res.cap).then(|| res.slots[j])
                    };
                    if let Some(at) = target {
                        table.features[at * N_FEATURES..(at + 1) * N_FEATURES].copy_from_slice(&row);
                        table.device_of[at] = device_idx;
                    }
                }
            }
        }
        if rejected > 0 {
            log::warn!("{rel_str}: rejected {rejected} rows with missing or non-numeric cells");
        }
        table.rejected_rows += rejected;
        *table.counts.entry((tag.device.clone(), class_name)).or_default() += n_rows;
        table.files.push(rel_str);
    }
    Ok(table)
}
