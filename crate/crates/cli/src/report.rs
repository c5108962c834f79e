/// Formats `v` with six significant digits, switching to exponent form for
/// very large or very small magnitudes.
pub fn sig6(v: f64) -> String {
    if v == 0.0 || !v.is_finite() {
        return format!("{v}");
    }
    let magnitude = v.abs().log10().floor() as i32;
    if (-4..6).contains(&magnitude) {
        format!("{:.*}", (5 - magnitude).max(0) as usize, v)
    } else {
        format!("{v:.5e}")
    }
}

#[cfg(test)]
mod tests {
    use super::sig6;

    #[test]
    fn six_significant_digits() {
        assert_eq!(sig6(0.634555), "0.634555");
        assert_eq!(sig6(2.2077912), "2.20779");
        assert_eq!(sig6(591.234567), "591.235");
        assert_eq!(sig6(1e-4), "0.000100000");
        assert_eq!(sig6(7.5e8), "7.50000e8");
        assert_eq!(sig6(0.0), "0");
    }
}
