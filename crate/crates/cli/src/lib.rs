//! Command implementations behind the `botnet-ids` binary.

mod commands;
mod config;

pub use commands::{
    cmd_eval, cmd_infer, cmd_prepare, cmd_train, counts_table, prepare_out, InferSummary, CHECKPOINT_FILE,
    CURVES_FILE, DATASET_FILE,
};
pub use config::RunConfig;

use botnet_ids::ErrorKind;

/// Process exit status for a failed command.
pub fn exit_code(err: &botnet_ids::Error) -> i32 {
    match err.kind() {
        ErrorKind::Usage => 2,
        ErrorKind::Data => 3,
        ErrorKind::Internal => 4,
    }
}
