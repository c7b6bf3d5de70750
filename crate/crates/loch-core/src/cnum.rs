//! Complex scalar helpers: parsing of `RE+IMi` literals and deterministic
//! text formatting for CSV/JSON artifacts.

use num_complex::Complex64;

/// Parses a complex literal of the form `RE+IMi`, `RE-IMi`, `RE`, `IMi`,
/// `i`, or `-i`. Whitespace is not permitted.
pub fn parse_complex(s: &str) -> Result<Complex64, String> {
    let t = s.trim();
    if t.is_empty() {
        return Err("empty complex literal".into());
    }
    if let Some(body) = t.strip_suffix(['i', 'I']) {
        // split at the sign that separates RE from IM, skipping a leading
        // sign and signs inside exponents
        let bytes = body.as_bytes();
        let mut split = None;
        for k in (1..bytes.len()).rev() {
            let c = bytes[k] as char;
            if (c == '+' || c == '-') && !matches!(bytes[k - 1] as char, 'e' | 'E') {
                split = Some(k);
                break;
            }
        }
        match split {
            Some(k) => {
                let re: f64 = body[..k]
                    .parse()
                    .map_err(|_| format!("bad real part in {t:?}"))?;
                let im_str = &body[k..];
                let im: f64 = if im_str == "+" {
                    1.0
                } else if im_str == "-" {
                    -1.0
                } else {
                    im_str
                        .parse()
                        .map_err(|_| format!("bad imaginary part in {t:?}"))?
                };
                Ok(Complex64::new(re, im))
            }
            None => {
                let im: f64 = if body.is_empty() {
                    1.0
                } else if body == "-" {
                    -1.0
                } else {
                    body.parse()
                        .map_err(|_| format!("bad imaginary part in {t:?}"))?
                };
                Ok(Complex64::new(0.0, im))
            }
        }
    } else {
        let re: f64 = t
            .parse()
            .map_err(|_| format!("bad complex literal {t:?}"))?;
        Ok(Complex64::new(re, 0.0))
    }
}

/// Formats a real with 17 significant decimal digits, enough to round-trip
/// any f64 exactly.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

/// Formats a complex scalar as `RE+IMi` with full precision.
pub fn fmt_complex(z: Complex64) -> String {
    if z.im >= 0.0 {
        format!("{}+{}i", fmt_f64(z.re), fmt_f64(z.im))
    } else {
        format!("{}{}i", fmt_f64(z.re), fmt_f64(z.im))
    }
}
