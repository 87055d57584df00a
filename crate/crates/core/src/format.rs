/// 17 significant digits; round-trips every `f64` exactly.
pub fn float(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        format!("{x}")
    }
}

pub fn opt_float(x: Option<f64>) -> String {
    x.map_or_else(|| "NaN".to_string(), float)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn seventeen_digits() {
        assert_eq!(float(1.0), "1.0000000000000000e0");
        assert_eq!(float(-0.1), "-1.0000000000000001e-1");
        assert_eq!(opt_float(None), "NaN");
    }

    proptest! {
        #[test]
        fn round_trips(x in proptest::num::f64::NORMAL | proptest::num::f64::SUBNORMAL) {
            prop_assert_eq!(float(x).parse::<f64>().unwrap(), x);
        }
    }
}
