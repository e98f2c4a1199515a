//! Seeded Gaussian-blob data with the N-BaIoT shape, and a writer that lays a
//! table out as N-BaIoT-style CSV files.

use std::fs;
use std::io::Write;
use std::path::Path;

use rand::Rng;
use rand_distr::{Distribution, Normal};

use super::nbaiot::{feature_names, RawTable, N_FEATURES};
use super::vocab::LabelVocab;
use crate::error::{Error, Result};
use crate::rng;

#[derive(Debug, Clone, PartialEq)]
pub struct BlobSpec {
    pub n_classes: usize,
    pub per_class: usize,
    /// Distance between class means along every feature where they differ,
    /// in units of `sigma`.
    pub separation: f64,
    pub sigma: f64,
    pub seed: u64,
}

impl Default for BlobSpec {
    fn default() -> Self {
        BlobSpec {
            n_classes: 10,
            per_class: 500,
            separation: 4.0,
            sigma: 1.0,
            seed: 7,
        }
    }
}

/// Class-mean vectors: each coordinate is `0` or `separation·sigma`, drawn
/// per class, with all classes distinct.
pub fn blob_means(spec: &BlobSpec) -> Vec<Vec<f64>> {
    let mut r = rng::stream(spec.seed, "blobs/means");
    let step = spec.separation * spec.sigma;
    let mut means: Vec<Vec<f64>> = Vec::with_capacity(spec.n_classes);
    while means.len() < spec.n_classes {
        let m: Vec<f64> = (0..N_FEATURES).map(|_| if r.gen::<bool>() { step } else { 0.0 }).collect();
        if !means.contains(&m) {
            means.push(m);
        }
    }
    means
}

/// `per_class` isotropic Gaussian samples around each class mean, class-major,
/// tagged with device `synthetic`.
pub fn gaussian_blobs(spec: &BlobSpec) -> Result<RawTable> {
    if spec.n_classes == 0 || spec.per_class == 0 || !(spec.sigma > 0.0) {
        return Err(Error::Config(format!("invalid blob spec {spec:?}")));
    }
    let normal = Normal::new(0.0, spec.sigma).map_err(|e| Error::Config(e.to_string()))?;
    let mut r = rng::stream(spec.seed, "blobs/samples");
    let mut table = RawTable::default();
    let mut row = vec![0.0; N_FEATURES];
    for (c, mean) in blob_means(spec).iter().enumerate() {
        for _ in 0..spec.per_class {
            for (v, m) in row.iter_mut().zip(mean) {
                *v = m + normal.sample(&mut r);
            }
            table.push_row(&row, c, "synthetic")?;
        }
    }
    Ok(table)
}

/// Relative path of the file holding `class` rows for `device`, in the
/// original archive layout.
pub fn archive_path(device: &str, class: &str) -> String {
    match class.split_once('_') {
        Some((family, attack)) => format!("{device}/{family}_attacks/{attack}.csv"),
        None => format!("{device}/{class}_traffic.csv"),
    }
}

/// Write `table` under `dir` as one CSV per `(device, class)`, with the
/// canonical 115-column header. Values use shortest round-trip formatting.
pub fn write_nbaiot_csv(dir: &Path, table: &RawTable, vocab: &LabelVocab) -> Result<()> {
    let header = feature_names().join(",");
    let mut files: std::collections::BTreeMap<String, Vec<usize>> = Default::default();
    for i in 0..table.len() {
        let class = vocab
            .name(table.labels[i])
            .ok_or_else(|| Error::Label { row: i, label: table.labels[i], n_classes: vocab.len() })?;
        files.entry(archive_path(&table.devices[table.device_of[i]], class)).or_default().push(i);
    }
    for (rel, rows) in files {
        let path = dir.join(&rel);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
        let mut out = String::with_capacity(rows.len() * N_FEATURES * 20);
        out.push_str(&header);
        out.push('\n');
        for i in rows {
            let cells: Vec<String> = table.row(i).iter().map(|v| v.to_string()).collect();
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        fs::File::create(&path)
            .and_then(|mut f| f.write_all(out.as_bytes()))
            .map_err(|e| Error::io(&path, e))?;
    }
    Ok(())
}
