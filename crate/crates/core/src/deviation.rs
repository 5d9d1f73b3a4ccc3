/// `|answer - reference| <= 10% of |reference|`, boundary inclusive.
///
/// Evaluated as `10 |answer - reference| <= |reference|` so that decimal
/// boundaries such as 165 vs. 150 are not lost to the rounding of `0.1`.
pub fn within_ten_percent(answer: f64, reference: f64) -> bool {
    10.0 * (answer - reference).abs() <= reference.abs()
}
