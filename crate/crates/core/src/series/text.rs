//! Line-oriented text form: `k1 .. kn | l1 .. ln | p1 .. p2m | re im`.
//!
//! An optional header `# dims <n> <m> [real|complex]` fixes the dimensions;
//! without it they are inferred from the first term line. Other lines
//! starting with `#` and blank lines are ignored.

use std::fmt::Write as _;

use num_complex::Complex64;

use super::{Dims, FtSeries, MultiIndex};
use crate::error::SeriesError;

impl FtSeries {
    pub fn to_text(&self) -> String {
        let d = self.dims;
        let mut out = String::new();
        let tag = if self.real { "real" } else { "complex" };
        let _ = writeln!(out, "# dims {} {} {}", d.n, d.m, tag);
        for (idx, c) in self.terms() {
            let join = |v: Vec<String>| v.join(" ");
            let _ = writeln!(
                out,
                "{} | {} | {} | {:e} {:e}",
                join(idx.k.iter().map(|v| v.to_string()).collect()),
                join(idx.l.iter().map(|v| v.to_string()).collect()),
                join(idx.p.iter().map(|v| v.to_string()).collect()),
                c.re,
                c.im
            );
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self, SeriesError> {
        let mut dims: Option<Dims> = None;
        let mut real = true;
        let mut terms = Vec::new();
        for (no, raw) in text.lines().enumerate() {
            let line_no = no + 1;
            let line = raw.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix('#') {
                let mut it = rest.split_whitespace();
                if it.next() == Some("dims") {
                    let n = parse_num::<usize>(it.next(), line_no, "n")?;
                    let m = parse_num::<usize>(it.next(), line_no, "m")?;
                    dims = Some(Dims::new(n, m)?);
                    if let Some(tag) = it.next() {
                        real = match tag {
                            "real" => true,
                            "complex" => false,
                            other => {
                                return Err(SeriesError::Parse {
                                    line: line_no,
                                    msg: format!("unknown tag `{other}`"),
                                })
                            }
                        };
                    }
                }
                continue;
            }
            let fields: Vec<&str> = line.split('|').collect();
            if fields.len() != 4 {
                return Err(SeriesError::Parse {
                    line: line_no,
                    msg: format!("expected 4 `|`-separated fields, found {}", fields.len()),
                });
            }
            let k = parse_list::<i32>(fields[0], line_no, "k")?;
            let l = parse_list::<u32>(fields[1], line_no, "l")?;
            let p = parse_list::<u32>(fields[2], line_no, "p")?;
            let c = parse_list::<f64>(fields[3], line_no, "coefficient")?;
            if c.len() != 2 {
                return Err(SeriesError::Parse {
                    line: line_no,
                    msg: "coefficient needs `re im`".into(),
                });
            }
            let d = match dims {
                Some(d) => d,
                None => {
                    if p.len() % 2 != 0 {
                        return Err(SeriesError::Parse {
                            line: line_no,
                            msg: "odd number of normal exponents".into(),
                        });
                    }
                    let d = Dims::new(k.len(), p.len() / 2)?;
                    dims = Some(d);
                    d
                }
            };
            if k.len() != d.n || l.len() != d.n || p.len() != d.normal() {
                return Err(SeriesError::Parse {
                    line: line_no,
                    msg: format!("index lengths ({}, {}, {}) do not match dims", k.len(), l.len(), p.len()),
                });
            }
            terms.push((MultiIndex::new(k, l, p), Complex64::new(c[0], c[1])));
        }
        let dims = dims.ok_or(SeriesError::Parse {
            line: 0,
            msg: "no dims header and no terms".into(),
        })?;
        FtSeries::from_terms(dims, terms, real)
    }
}

fn parse_num<T: std::str::FromStr>(tok: Option<&str>, line: usize, what: &str) -> Result<T, SeriesError> {
    tok.and_then(|t| t.parse().ok()).ok_or_else(|| SeriesError::Parse {
        line,
        msg: format!("bad or missing {what}"),
    })
}

fn parse_list<T: std::str::FromStr>(field: &str, line: usize, what: &str) -> Result<Vec<T>, SeriesError> {
    field
        .split_whitespace()
        .map(|t| {
            t.parse().map_err(|_| SeriesError::Parse {
                line,
                msg: format!("cannot parse {what} entry `{t}`"),
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn roundtrip_is_exact() {
        let d = Dims::new(2, 1).unwrap();
        let s = FtSeries::from_terms(
            d,
            vec![
                (MultiIndex::new(vec![1, -2], vec![0, 1], vec![2, 0]), Complex64::new(0.1, -1.0 / 3.0)),
                (MultiIndex::new(vec![-1, 2], vec![0, 1], vec![2, 0]), Complex64::new(0.1, 1.0 / 3.0)),
            ],
            true,
        )
        .unwrap();
        let back = FtSeries::from_text(&s.to_text()).unwrap();
        assert_eq!(back, s);
        assert!(back.is_real());
        assert_eq!(back.to_text(), s.to_text());
    }

    #[test]
    fn infers_dims_and_reports_line() {
        let s = FtSeries::from_text("0 0 | 1 0 | | 2 0\n").unwrap();
        assert_eq!(s.dims(), Dims::new(2, 0).unwrap());
        let err = FtSeries::from_text("# dims 1 0\n1 | 0 | | x 0\n").unwrap_err();
        assert!(matches!(err, SeriesError::Parse { line: 2, .. }));
    }
}
