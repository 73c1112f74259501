//! Fixed-width number rendering for TSV outputs.

/// `v` with 6 significant digits, trailing zeros trimmed; scientific
/// notation outside `[1e-5, 1e6)`. Absent values render as `NA`.
pub fn sig6(v: f64) -> String {
    sig(v, 6)
}

pub fn sig(v: f64, digits: usize) -> String {
    if v.is_nan() {
        return "NaN".into();
    }
    if v.is_infinite() {
        return if v > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if v == 0.0 {
        return "0".into();
    }
    let digits = digits.max(1);
    // round first so the exponent reflects the rendered value (e.g. 999999.7)
    let sci = format!("{:.*e}", digits - 1, v);
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-5..6).contains(&exp) {
        let decimals = (digits as i32 - 1 - exp).max(0) as usize;
        trim(format!("{v:.decimals$}"))
    } else {
        format!("{}e{exp}", trim(mantissa.to_string()))
    }
}

fn trim(s: String) -> String {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    }
}

pub fn opt_sig6(v: Option<f64>) -> String {
    v.map_or_else(|| "NA".into(), sig6)
}
