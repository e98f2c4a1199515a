//! Bidirectional LSTM encoder and single-query key/value attention, with
//! backpropagation through time.

mod attention;
mod lstm;

pub use attention::{attention_backward, attention_forward, AttentionCtx, AttentionGrads, AttentionOutput, AttentionParams};
pub use lstm::{
    bilstm_backward, bilstm_forward, lstm_cell, lstm_cell_backward, lstm_cell_forward, BiLstmCtx, BiLstmOutput,
    DirectionGrads, LstmCellCtx, LstmCellGrads, LstmDirection, LstmGrads, LstmParams,
};
