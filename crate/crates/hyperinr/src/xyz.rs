//! ASCII point clouds: one `x y z` triple per line, `#` starts a comment.

use hyperinr_core::{Error, Result};

pub fn parse_xyz(text: &str) -> Result<Vec<[f64; 3]>> {
    let mut out = Vec::new();
    let mut offset = 0;
    for line in text.split_inclusive('\n') {
        let bad = |reason: String| Error::Format { offset, reason };
        let tokens: Vec<&str> = line
            .split('#')
            .next()
            .unwrap_or("")
            .split_whitespace()
            .collect();
        match tokens.len() {
            0 => {}
            3 => {
                let mut p = [0.0f64; 3];
                for (x, tok) in p.iter_mut().zip(&tokens) {
                    *x = tok
                        .parse()
                        .map_err(|_| bad(format!("not a number: {tok:?}")))?;
                }
                if !p.iter().all(|x| x.is_finite()) {
                    return Err(bad("non-finite coordinate".into()));
                }
                out.push(p);
            }
            n => return Err(bad(format!("expected 3 values, found {n}"))),
        }
        offset += line.len();
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn comments_blank_lines_and_errors() {
        let pts = parse_xyz("# header\n1 2 3\n\n  -0.5\t0 1e-3 # tail\n").unwrap();
        assert_eq!(pts, [[1.0, 2.0, 3.0], [-0.5, 0.0, 1e-3]]);
        assert!(matches!(
            parse_xyz("1 2\n"),
            Err(Error::Format { offset: 0, .. })
        ));
        assert!(matches!(
            parse_xyz("0 0 0\n1 2 x\n"),
            Err(Error::Format { offset: 6, .. })
        ));
        assert!(parse_xyz("1 2 3 4\n").is_err());
        assert!(parse_xyz("1 2 nan\n").is_err());
        assert!(parse_xyz("").unwrap().is_empty());
    }
}
