//! Float formatting shared by every text and CSV writer.

/// Shortest string that parses back to exactly `x`. Plain decimal for
/// magnitudes in `[1e-4, 1e15)` and zero, scientific otherwise.
pub fn float(x: f64) -> String {
    let a = x.abs();
    if a == 0.0 || (1e-4..1e15).contains(&a) || !a.is_finite() {
        x.to_string()
    } else {
        format!("{x:e}")
    }
}

#[cfg(test)]
mod tests {
    use super::float;

    #[test]
    fn round_trips() {
        for x in [
            0.0,
            -0.0,
            1.0,
            0.99,
            1e-4,
            9.99e-5,
            2.0664793313050358e-19,
            1e15,
            123456.789,
            -3.5e300,
            f64::MIN_POSITIVE,
        ] {
            let s = float(x);
            assert_eq!(s.parse::<f64>().unwrap().to_bits(), x.to_bits(), "{s}");
        }
        assert_eq!(float(0.99), "0.99");
        assert_eq!(float(2.5e-19), "2.5e-19");
        assert_eq!(float(1e15), "1e15");
    }
}
