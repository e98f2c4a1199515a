//! Loading, balancing, splitting and scaling of the traffic feature tables.

mod artifact;
mod nbaiot;
mod scaler;
mod split;
mod synthetic;
mod vocab;

pub use artifact::{dataset_from_container, dataset_to_container, load_dataset, save_dataset};
pub use nbaiot::{feature_names, load_nbaiot, tag_for, ClassMap, FileTag, LoadOptions, RawTable, DEVICES, N_FEATURES};
pub use scaler::MinMaxScaler;
pub use split::{
    apply_scaler, balance_classes, fit_transform_scaler, stratified_indices, stratified_split, to_model_input,
    DatasetSplit,
};
pub use synthetic::{archive_path, blob_means, gaussian_blobs, write_nbaiot_csv, BlobSpec};
pub use vocab::{LabelVocab, NBAIOT_CLASSES};
