use crate::error::{MqfError, Result};
use crate::loss::common_component;
use crate::model::{FitResult, MatrixPanel};

/// Fills every unobserved entry with the fitted common component; observed
/// entries are copied unchanged and the result is fully observed.
pub fn impute(panel: &MatrixPanel, fit: &FitResult) -> Result<MatrixPanel> {
    if fit.params.dims() != panel.dims() {
        return Err(MqfError::DimensionMismatch(format!(
            "fit has (T, p1, p2) = {:?} but the panel has {:?}",
            fit.params.dims(),
            panel.dims()
        )));
    }
    if panel.is_fully_observed() {
        return Ok(panel.clone());
    }
    let (_, p1, p2) = panel.dims();
    let mut values = panel.values().to_vec();
    for (t, common) in common_component(&fit.params).iter().enumerate() {
        for i in 0..p1 {
            for j in 0..p2 {
                let idx = panel.index(t, i, j);
                if !panel.mask()[idx] {
                    values[idx] = common[(i, j)];
                }
            }
        }
    }
    let (periods, ..) = panel.dims();
    MatrixPanel::new(periods, p1, p2, values)
}
