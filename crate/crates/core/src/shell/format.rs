//! Number formatting and range-flag parsing.

/// C-style `%.{sig}g`.
pub fn fmt_g(x: f64, sig: usize) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return "0".into();
    }
    let sig = sig.max(1);
    let sci = format!("{:.*e}", sig - 1, x);
    let (mant, exp) = sci.split_once('e').expect("exponent form");
    let exp: i32 = exp.parse().expect("integer exponent");
    if exp < -4 || exp >= sig as i32 {
        let mant = trim_zeros(mant);
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{mant}e{sign}{:02}", exp.abs())
    } else {
        let decimals = (sig as i32 - 1 - exp).max(0) as usize;
        trim_zeros(&format!("{:.*}", decimals, x)).to_string()
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

pub fn fmt_data(x: f64) -> String {
    fmt_g(x, 15)
}

pub fn fmt_svg(x: f64) -> String {
    fmt_g(x, 12)
}

/// Real-valued list: comma-separated items, each a number or
/// `start:stop:step` (the stop is included up to rounding).
pub fn parse_reals(s: &str) -> Result<Vec<f64>, String> {
    let mut out = Vec::new();
    for item in s.split(',').map(str::trim).filter(|t| !t.is_empty()) {
        let parts: Vec<&str> = item.split(':').collect();
        match parts.as_slice() {
            [v] => out.push(num(v)?),
            [a, b, h] => {
                let (a, b, h) = (num(a)?, num(b)?, num(h)?);
                if h == 0.0 || (b - a) * h < 0.0 {
                    return Err(format!("bad range '{item}'"));
                }
                // never step past the stop beyond rounding noise
                let n = ((b - a) / h + 1e-9).floor() as i64;
                out.extend((0..=n).map(|i| a + i as f64 * h));
            }
            _ => return Err(format!("bad range '{item}' (expected start:stop:step)")),
        }
    }
    if out.is_empty() {
        return Err("empty list".into());
    }
    Ok(out)
}

/// Integer list: comma-separated items, each an integer or inclusive `a..b`.
pub fn parse_ints(s: &str) -> Result<Vec<i64>, String> {
    let mut out = Vec::new();
    for item in s.split(',').map(str::trim).filter(|t| !t.is_empty()) {
        if let Some((a, b)) = item.split_once("..") {
            let (a, b) = (int(a)?, int(b.trim_start_matches('='))?);
            if b < a {
                return Err(format!("bad range '{item}'"));
            }
            out.extend(a..=b);
        } else {
            out.push(int(item)?);
        }
    }
    if out.is_empty() {
        return Err("empty list".into());
    }
    Ok(out)
}

pub fn parse_positive(s: &str) -> Result<Vec<usize>, String> {
    parse_ints(s)?
        .into_iter()
        .map(|v| if v >= 1 { Ok(v as usize) } else { Err(format!("index {v} must be >= 1")) })
        .collect()
}

/// `a:b` pair.
pub fn parse_span(s: &str) -> Result<(f64, f64), String> {
    let (a, b) = s.split_once(':').ok_or_else(|| format!("bad span '{s}' (expected lo:hi)"))?;
    let (a, b) = (num(a)?, num(b)?);
    if b <= a {
        return Err(format!("empty span '{s}'"));
    }
    Ok((a, b))
}

fn num(s: &str) -> Result<f64, String> {
    s.trim().parse().map_err(|_| format!("not a number: '{s}'"))
}

fn int(s: &str) -> Result<i64, String> {
    s.trim().parse().map_err(|_| format!("not an integer: '{s}'"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn g_format() {
        assert_eq!(fmt_g(0.1, 15), "0.1");
        assert_eq!(fmt_g(1e-5, 15), "1e-05");
        assert_eq!(fmt_g(123456.0, 3), "1.23e+05");
        assert_eq!(fmt_g(-2.5, 12), "-2.5");
        assert_eq!(fmt_g(100.0, 15), "100");
    }

    #[test]
    fn ranges() {
        assert_eq!(parse_reals("0:1:0.5").unwrap(), vec![0.0, 0.5, 1.0]);
        assert_eq!(parse_reals("0:0.95:0.5").unwrap(), vec![0.0, 0.5]);
        assert_eq!(parse_reals("0:0.99:0.5").unwrap().len(), 2);
        assert_eq!(parse_reals("0:4:0.1").unwrap().len(), 41);
        assert_eq!(parse_reals("0:50:0.1").unwrap().len(), 501);
        assert_eq!(parse_ints("1..3,7").unwrap(), vec![1, 2, 3, 7]);
        assert!(parse_reals("1:2").is_err());
    }
}
