use std::fmt::Write as _;

use crate::error::SeriesError;
use crate::series::{Dims, FtSeries};

/// One link `(F_v, y*_v)` of the transformation chain.
#[derive(Clone, Debug, PartialEq)]
pub struct ChainLink {
    pub generator: FtSeries,
    pub y_star: Vec<f64>,
}

/// `Psi = Phi_1 o ... o Phi_v` with `Phi_j(z) = phi_{F_j}^1(z + y*_j)`.
/// Links are stored in step order, so the last link acts first.
#[derive(Clone, Debug, PartialEq)]
pub struct TransformChain {
    pub dims: Dims,
    pub links: Vec<ChainLink>,
}

impl TransformChain {
    pub fn new(dims: Dims) -> Self {
        TransformChain { dims, links: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.links.len()
    }

    pub fn is_empty(&self) -> bool {
        self.links.is_empty()
    }

    pub fn push(&mut self, generator: FtSeries, y_star: Vec<f64>) {
        self.links.push(ChainLink { generator, y_star });
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        writeln!(out, "# chain {} {} {}", self.dims.n, self.dims.m, self.links.len()).unwrap();
        for (i, link) in self.links.iter().enumerate() {
            writeln!(out, "link {}", i + 1).unwrap();
            let ys: Vec<String> = link.y_star.iter().map(|v| format!("{v:e}")).collect();
            writeln!(out, "ystar {}", ys.join(" ")).unwrap();
            writeln!(out, "generator").unwrap();
            out.push_str(&link.generator.to_text());
            writeln!(out, "end").unwrap();
        }
        out
    }

    pub fn from_text(src: &str) -> Result<Self, SeriesError> {
        let err = |line: usize, msg: &str| SeriesError::Parse { line, msg: msg.to_string() };
        let mut lines = src.lines().enumerate().map(|(i, l)| (i + 1, l.trim()));
        let (ln, head) = lines.find(|(_, l)| !l.is_empty()).ok_or_else(|| err(1, "empty chain file"))?;
        let fields: Vec<&str> = head.split_whitespace().collect();
        if fields.len() != 5 || fields[0] != "#" || fields[1] != "chain" {
            return Err(err(ln, "expected header '# chain n m links'"));
        }
        let num = |s: &str| s.parse::<usize>().map_err(|_| err(ln, "bad integer in header"));
        let dims = Dims::new(num(fields[2])?, num(fields[3])?)?;
        let count = num(fields[4])?;
        let mut chain = TransformChain::new(dims);
        while let Some((ln, line)) = lines.next() {
            if line.is_empty() {
                continue;
            }
            if !line.starts_with("link") {
                return Err(err(ln, "expected 'link'"));
            }
            let (ln, ys) = lines.next().ok_or_else(|| err(ln, "missing ystar line"))?;
            let ys = ys.strip_prefix("ystar").ok_or_else(|| err(ln, "expected 'ystar'"))?;
            let y_star = ys
                .split_whitespace()
                .map(|t| t.parse::<f64>().map_err(|_| err(ln, "bad ystar value")))
                .collect::<Result<Vec<_>, _>>()?;
            if y_star.len() != dims.n {
                return Err(err(ln, "ystar has the wrong length"));
            }
            let (ln, g) = lines.next().ok_or_else(|| err(ln, "missing generator block"))?;
            if g != "generator" {
                return Err(err(ln, "expected 'generator'"));
            }
            let start = ln + 1;
            let mut body = String::new();
            let mut closed = false;
            for (_, l) in lines.by_ref() {
                if l == "end" {
                    closed = true;
                    break;
                }
                body.push_str(l);
                body.push('\n');
            }
            if !closed {
                return Err(err(start, "generator block not closed by 'end'"));
            }
            let generator = FtSeries::from_text(&body).map_err(|e| match e {
                SeriesError::Parse { line, msg } => SeriesError::Parse { line: line + start - 1, msg },
                other => other,
            })?;
            if generator.dims() != dims {
                return Err(err(start, "generator dimensions differ from the header"));
            }
            chain.push(generator, y_star);
        }
        if chain.len() != count {
            return Err(err(ln, "link count differs from the header"));
        }
        Ok(chain)
    }
}
