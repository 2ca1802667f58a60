//! Offline trace replay: one arrival timestamp in seconds per line, `#`
//! comments and blank lines ignored. Timestamps must be strictly
//! increasing.

use std::fs;
use std::path::Path;

use super::LearnerError;

pub fn load_trace(path: &Path) -> Result<Vec<f64>, LearnerError> {
    let text = fs::read_to_string(path).map_err(|e| LearnerError::Trace {
        line: 0,
        msg: format!("cannot read {}: {e}", path.display()),
    })?;
    parse_trace(&text)
}

pub fn parse_trace(text: &str) -> Result<Vec<f64>, LearnerError> {
    let mut out = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let lineno = idx + 1;
        let line = match raw.find('#') {
            Some(p) => &raw[..p],
            None => raw,
        }
        .trim();
        if line.is_empty() {
            continue;
        }
        let t: f64 = line.parse().map_err(|_| LearnerError::Trace {
            line: lineno,
            msg: format!("bad timestamp `{line}`"),
        })?;
        if let Some(&last) = out.last() {
            if t <= last {
                return Err(LearnerError::Trace {
                    line: lineno,
                    msg: format!("timestamp {t} not increasing"),
                });
            }
        }
        out.push(t);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_comments_and_blanks() {
        let ts = parse_trace("# header\n0.0\n\n1.0e-3 # inline\n2e-3\n").unwrap();
        assert_eq!(ts, vec![0.0, 1.0e-3, 2e-3]);
    }

    #[test]
    fn rejects_non_monotonic_with_line() {
        let e = parse_trace("0.0\n2.0\n1.0\n").unwrap_err();
        assert!(e.to_string().contains("line 3"), "{e}");
    }
}
