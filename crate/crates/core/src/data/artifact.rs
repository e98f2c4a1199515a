use std::path::Path;

use super::scaler::MinMaxScaler;
use super::split::DatasetSplit;
use super::vocab::LabelVocab;
use crate::container::{Container, Entry, Kind};
use crate::error::{Error, Result};

fn u32s(values: &[usize]) -> Result<Entry> {
    let data = values
        .iter()
        .map(|&v| u32::try_from(v).map_err(|_| Error::Data(format!("index {v} does not fit in u32"))))
        .collect::<Result<Vec<u32>>>()?;
    Ok(Entry::U32 { shape: vec![data.len()], data })
}

fn matrix(values: &[f64], width: usize) -> Entry {
    Entry::F64 { shape: vec![values.len() / width, width], data: values.to_vec() }
}

pub fn dataset_to_container(split: &DatasetSplit) -> Result<Container> {
    let d = split.n_features();
    let mut c = Container::new(Kind::Dataset);
    c.insert_text("meta/label_vocab", split.vocab.names().to_vec());
    c.insert_text("meta/seed", vec![split.seed.to_string()]);
    c.insert_text("meta/files", split.files.clone());
    c.insert("scaler/min", Entry::F64 { shape: vec![d], data: split.scaler.min.clone() });
    c.insert("scaler/max", Entry::F64 { shape: vec![d], data: split.scaler.max.clone() });
    c.insert("train/x", matrix(&split.train_x, d));
    c.insert("train/y", u32s(&split.train_y)?);
    c.insert("train/rows", u32s(&split.train_rows)?);
    c.insert("test/x", matrix(&split.test_x, d));
    c.insert("test/y", u32s(&split.test_y)?);
    c.insert("test/rows", u32s(&split.test_rows)?);
    Ok(c)
}

pub fn dataset_from_container(c: &Container) -> Result<DatasetSplit> {
    let vocab = LabelVocab::new(c.text("meta/label_vocab")?.to_vec())?;
    let seed = c
        .text("meta/seed")?
        .first()
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| Error::Format("meta/seed is not an integer".into()))?;
    let scaler = MinMaxScaler {
        min: c.f64s("scaler/min")?.1.to_vec(),
        max: c.f64s("scaler/max")?.1.to_vec(),
    };
    let d = scaler.n_features();
    let x = |name: &str| -> Result<Vec<f64>> {
        let (shape, data) = c.f64s(name)?;
        if shape.len() != 2 || shape[1] != d {
            return Err(Error::Format(format!("{name} has shape {shape:?}, expected [n, {d}]")));
        }
        Ok(data.to_vec())
    };
    let idx = |name: &str| -> Result<Vec<usize>> { Ok(c.u32s(name)?.1.iter().map(|&v| v as usize).collect()) };
    let split = DatasetSplit {
        train_x: x("train/x")?,
        train_y: idx("train/y")?,
        test_x: x("test/x")?,
        test_y: idx("test/y")?,
        scaler,
        vocab,
        seed,
        train_rows: idx("train/rows")?,
        test_rows: idx("test/rows")?,
        files: c.text("meta/files")?.to_vec(),
    };
    if split.train_x.len() != split.n_train() * d || split.test_x.len() != split.n_test() * d {
        return Err(Error::Format("feature and label counts disagree".into()));
    }
    if let Some(&l) = split.train_y.iter().chain(&split.test_y).find(|&&l| l >= split.vocab.len()) {
        return Err(Error::Format(format!("label {l} outside the {}-class vocabulary", split.vocab.len())));
    }
    Ok(split)
}

pub fn save_dataset(split: &DatasetSplit, path: &Path) -> Result<()> {
    dataset_to_container(split)?.write(path)
}

pub fn load_dataset(path: &Path) -> Result<DatasetSplit> {
    dataset_from_container(&Container::read(path, Kind::Dataset)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{gaussian_blobs, stratified_split, BlobSpec};

    #[test]
    fn dataset_round_trip() {
        let t = gaussian_blobs(&BlobSpec { per_class: 10, ..Default::default() }).unwrap();
        let split = stratified_split(&t, &LabelVocab::nbaiot(), 0.2, 5).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("data.bin");
        save_dataset(&split, &path).unwrap();
        assert_eq!(load_dataset(&path).unwrap(), split);
    }
}
