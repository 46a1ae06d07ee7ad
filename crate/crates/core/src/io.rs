//! Plain-text output helpers.

use nalgebra::DMatrix;

/// Matrix Market `array` format (column-major, general).
pub fn dense_matrix_market(m: &DMatrix<f64>) -> String {
    let mut out = String::with_capacity(24 * m.len() + 64);
    out.push_str("%%MatrixMarket matrix array real general\n");
    out.push_str(&format!("{} {}\n", m.nrows(), m.ncols()));
    for v in m.iter() {
        out.push_str(&format!("{v:.17e}\n"));
    }
    out
}
