//! Number formatting shared by the text outputs.

/// Rounds to `digits` significant digits and prints the shortest decimal
/// that reads back as that rounded value.
pub fn sig(x: f64, digits: usize) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return format!("{x}");
    }
    let rounded: f64 = format!("{:.*e}", digits.saturating_sub(1), x)
        .parse()
        .expect("scientific notation parses");
    format!("{rounded}")
}

/// Twelve significant digits, the precision of every text output.
pub fn g12(x: f64) -> String {
    sig(x, 12)
}
