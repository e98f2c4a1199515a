use crate::error::{Error, Result};

/// Per-feature min-max scaling to `[0, 1]`, fitted on training rows.
#[derive(Debug, Clone, PartialEq)]
pub struct MinMaxScaler {
    pub min: Vec<f64>,
    pub max: Vec<f64>,
}

impl MinMaxScaler {
    /// Fit on row-major `rows` of width `n_features`.
    pub fn fit(rows: &[f64], n_features: usize) -> Result<Self> {
        if n_features == 0 || rows.is_empty() || !rows.len().is_multiple_of(n_features) {
            return Err(Error::Data(format!(
                "cannot fit scaler on {} values of width {n_features}",
                rows.len()
            )));
        }
        let mut min = vec![f64::INFINITY; n_features];
        let mut max = vec![f64::NEG_INFINITY; n_features];
        for row in rows.chunks_exact(n_features) {
            for (j, &v) in row.iter().enumerate() {
                min[j] = min[j].min(v);
                max[j] = max[j].max(v);
            }
        }
        Ok(MinMaxScaler { min, max })
    }

    pub fn n_features(&self) -> usize {
        self.min.len()
    }

    /// `(x − min) / (max − min)` clipped to `[0, 1]`; constant features map
    /// to 0.
    pub fn transform_value(&self, j: usize, v: f64) -> f64 {
        let span = self.max[j] - self.min[j];
        if span > 0.0 {
            ((v - self.min[j]) / span).clamp(0.0, 1.0)
        } else {
            0.0
        }
    }

    pub fn transform(&self, rows: &[f64]) -> Result<Vec<f64>> {
        let d = self.n_features();
        if !rows.len().is_multiple_of(d) {
            return Err(Error::Shape(format!("{} values are not rows of width {d}", rows.len())));
        }
        Ok(rows
            .chunks_exact(d)
            .flat_map(|row| row.iter().enumerate().map(|(j, &v)| self.transform_value(j, v)))
            .collect())
    }
}
