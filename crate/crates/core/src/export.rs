//! Number formatting shared by CSV writers.

/// Scientific notation with 17 significant digits; parses back to the same `f64`.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}
