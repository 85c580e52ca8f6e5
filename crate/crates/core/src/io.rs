//! Deterministic text formatting for emitted artifacts.

/// Formats a float with 17 significant digits, enough to round-trip any
/// `f64` bit pattern. All CSV/COO emission funnels through here so reruns
/// are byte-identical.
pub fn fmt_f64(v: f64) -> String {
    format!("{:.16e}", v)
}

#[cfg(test)]
mod tests {
    use super::fmt_f64;

    #[test]
    fn roundtrips_exactly() {
        for &v in &[0.0, -1.5, std::f64::consts::PI, 1e-300, -3.33e200, 0.1 + 0.2] {
            let s = fmt_f64(v);
            assert_eq!(s.parse::<f64>().unwrap().to_bits(), v.to_bits(), "{s}");
        }
    }
}
