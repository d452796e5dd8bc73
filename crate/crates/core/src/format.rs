//! Problem-definition files.
//!
//! A file is TOML. Real numbers are TOML floats (`inf` allowed for interval
//! ends); complex entries are strings `"re+imj"`; matrices are arrays of rows.
//!
//! ```toml
//! interval = [-inf, inf]
//! x0 = -1.0
//! J = [["0+1j"]]
//! boundary = [["0+1j", "1+0j"]]
//!
//! [[w.atom]]
//! at = 0.0
//! jump = [["1+0j"]]
//!
//! [[q.density]]
//! on = [0.0, 1.0]
//! coefficients = [[["0+0j"]]]
//! ```
//!
//! `coefficients[k]` multiplies `x^k`. An optional `[[f.density]]` list gives a
//! piecewise-polynomial vector function (`coefficients[k]` is a vector).

use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use toml::Spanned;

use crate::error::{Error, Result};
use crate::ivp::{SpectralProblem, VectorFn};
use crate::linalg::{CMat, CVec, C64};
use crate::measures::{Atom, Density, MatrixMeasure, Piece, RealInterval};

#[derive(Debug, Clone, PartialEq)]
pub struct PieceSpec {
    pub left: f64,
    pub right: f64,
    pub coefficients: Vec<CMat>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AtomSpec {
    pub at: f64,
    pub jump: CMat,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct MeasureSpec {
    pub pieces: Vec<PieceSpec>,
    pub atoms: Vec<AtomSpec>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FnPieceSpec {
    pub left: f64,
    pub right: f64,
    pub coefficients: Vec<CVec>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProblemFile {
    pub interval: (f64, f64),
    pub x0: f64,
    pub j: CMat,
    pub q: MeasureSpec,
    pub w: MeasureSpec,
    pub boundary: Option<CMat>,
    pub f: Option<Vec<FnPieceSpec>>,
}

#[derive(Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
struct FileRepr<S> {
    interval: [f64; 2],
    x0: f64,
    #[serde(rename = "J")]
    j: Vec<Vec<S>>,
    #[serde(default = "Option::default", skip_serializing_if = "Option::is_none")]
    boundary: Option<Vec<Vec<S>>>,
    #[serde(default = "MeasureRepr::default")]
    q: MeasureRepr<S>,
    #[serde(default = "MeasureRepr::default")]
    w: MeasureRepr<S>,
    #[serde(default = "Option::default", skip_serializing_if = "Option::is_none")]
    f: Option<FnRepr<S>>,
}

#[derive(Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
struct MeasureRepr<S> {
    #[serde(default = "Vec::new")]
    density: Vec<PieceRepr<S>>,
    #[serde(default = "Vec::new")]
    atom: Vec<AtomRepr<S>>,
}

impl<S> MeasureRepr<S> {
    fn default() -> Self {
        Self {
            density: Vec::new(),
            atom: Vec::new(),
        }
    }
}

#[derive(Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
struct PieceRepr<S> {
    on: [f64; 2],
    coefficients: Vec<Vec<Vec<S>>>,
}

#[derive(Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
struct AtomRepr<S> {
    at: f64,
    jump: Vec<Vec<S>>,
}

#[derive(Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
struct FnRepr<S> {
    density: Vec<FnPieceRepr<S>>,
}

#[derive(Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
struct FnPieceRepr<S> {
    on: [f64; 2],
    coefficients: Vec<Vec<S>>,
}

/// `re+imj` with 17 significant digits in both parts.
pub fn format_complex(z: C64) -> String {
    format!("{:.16e}{:+.16e}j", z.re, z.im)
}

pub fn parse_complex(s: &str) -> Option<C64> {
    let t = s.trim();
    let Some(body) = t.strip_suffix(['j', 'i']) else {
        return f64::from_str(t).ok().map(|re| C64::new(re, 0.0));
    };
    // the imaginary part starts at the last sign that is not an exponent sign
    let bytes = body.as_bytes();
    let split = (1..bytes.len())
        .rev()
        .find(|&k| matches!(bytes[k], b'+' | b'-') && !matches!(bytes[k - 1], b'e' | b'E'));
    let (re, im) = match split {
        Some(k) => (f64::from_str(&body[..k]).ok()?, &body[k..]),
        None => (0.0, body),
    };
    let im = match im {
        "" | "+" => 1.0,
        "-" => -1.0,
        _ => f64::from_str(im).ok()?,
    };
    Some(C64::new(re, im))
}

fn line_column(text: &str, offset: usize) -> (usize, usize) {
    let offset = offset.min(text.len());
    let before = &text[..offset];
    let line = before.matches('\n').count() + 1;
    let column = before.rsplit('\n').next().map_or(0, |l| l.chars().count()) + 1;
    (line, column)
}

struct Reader<'a> {
    text: &'a str,
}

impl Reader<'_> {
    fn error(&self, offset: usize, message: impl Into<String>) -> Error {
        let (line, column) = line_column(self.text, offset);
        Error::Parse {
            line,
            column,
            message: message.into(),
        }
    }

    fn entry(&self, s: &Spanned<String>) -> Result<C64> {
        parse_complex(s.get_ref())
            .ok_or_else(|| self.error(s.span().start, format!("`{}` is not a complex number", s.get_ref())))
    }

    fn matrix(&self, rows: &[Vec<Spanned<String>>], what: &str, at: usize) -> Result<CMat> {
        let nr = rows.len();
        let nc = rows.first().map_or(0, Vec::len);
        if nr == 0 || nc == 0 {
            return Err(self.error(at, format!("{what} is empty")));
        }
        let mut m = CMat::zeros(nr, nc);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != nc {
                let pos = row.first().map_or(at, |s| s.span().start);
                return Err(self.error(pos, format!("{what}: row {} has {} entries, expected {nc}", i + 1, row.len())));
            }
            for (j, s) in row.iter().enumerate() {
                m[(i, j)] = self.entry(s)?;
            }
        }
        Ok(m)
    }

    fn vector(&self, entries: &[Spanned<String>], at: usize) -> Result<CVec> {
        if entries.is_empty() {
            return Err(self.error(at, "empty coefficient vector"));
        }
        Ok(CVec::from_vec(entries.iter().map(|s| self.entry(s)).collect::<Result<_>>()?))
    }

    fn first_span(rows: &[Vec<Spanned<String>>]) -> Option<usize> {
        rows.iter().flatten().next().map(|s| s.span().start)
    }

    fn measure(&self, m: &MeasureRepr<Spanned<String>>, name: &str) -> Result<MeasureSpec> {
        let mut pieces = Vec::new();
        for p in &m.density {
            let at = p.coefficients.iter().find_map(|c| Self::first_span(c)).unwrap_or(0);
            if p.coefficients.is_empty() {
                return Err(self.error(at, format!("{name}.density on {:?} has no coefficients", p.on)));
            }
            let coefficients = p
                .coefficients
                .iter()
                .map(|c| self.matrix(c, &format!("{name}.density coefficient"), at))
                .collect::<Result<Vec<_>>>()?;
            pieces.push(PieceSpec {
                left: p.on[0],
                right: p.on[1],
                coefficients,
            });
        }
        let atoms = m
            .atom
            .iter()
            .map(|a| {
                let at = Self::first_span(&a.jump).unwrap_or(0);
                Ok(AtomSpec {
                    at: a.at,
                    jump: self.matrix(&a.jump, &format!("{name}.atom jump"), at)?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(MeasureSpec { pieces, atoms })
    }
}

fn write_matrix(m: &CMat) -> Vec<Vec<String>> {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| format_complex(m[(i, j)])).collect())
        .collect()
}

fn write_measure(m: &MeasureSpec) -> MeasureRepr<String> {
    MeasureRepr {
        density: m
            .pieces
            .iter()
            .map(|p| PieceRepr {
                on: [p.left, p.right],
                coefficients: p.coefficients.iter().map(write_matrix).collect(),
            })
            .collect(),
        atom: m
            .atoms
            .iter()
            .map(|a| AtomRepr {
                at: a.at,
                jump: write_matrix(&a.jump),
            })
            .collect(),
    }
}

impl MeasureSpec {
    fn build(&self, n: usize, iv: RealInterval) -> Result<MatrixMeasure> {
        let pieces = self
            .pieces
            .iter()
            .map(|p| Piece::new(p.left, p.right, Density::Polynomial(p.coefficients.clone())))
            .collect();
        let atoms = self.atoms.iter().map(|a| Atom::new(a.at, a.jump.clone())).collect();
        MatrixMeasure::new(n, n, iv, pieces, atoms)
    }

    fn from_measure(m: &MatrixMeasure) -> Result<Self> {
        let pieces = m
            .pieces()
            .iter()
            .map(|p| match &p.density {
                Density::Polynomial(c) => Ok(PieceSpec {
                    left: p.left,
                    right: p.right,
                    coefficients: c.clone(),
                }),
                Density::Callable(_) => Err(Error::Unsupported("callable densities cannot be written to a file".into())),
            })
            .collect::<Result<Vec<_>>>()?;
        let atoms = m
            .atoms()
            .iter()
            .map(|a| AtomSpec {
                at: a.location,
                jump: a.jump.clone(),
            })
            .collect();
        Ok(Self { pieces, atoms })
    }
}

impl ProblemFile {
    pub fn parse(text: &str) -> Result<Self> {
        let r = Reader { text };
        let repr: FileRepr<Spanned<String>> = toml::from_str(text).map_err(|e| {
            let offset = e.span().map_or(0, |s| s.start);
            r.error(offset, e.message().trim().to_string())
        })?;
        let j_at = Reader::first_span(&repr.j).unwrap_or(0);
        let j = r.matrix(&repr.j, "J", j_at)?;
        if !j.is_square() {
            return Err(r.error(j_at, format!("J must be square, got {}×{}", j.nrows(), j.ncols())));
        }
        let boundary = match &repr.boundary {
            Some(rows) => Some(r.matrix(rows, "boundary", Reader::first_span(rows).unwrap_or(0))?),
            None => None,
        };
        let f = match &repr.f {
            Some(fr) => Some(
                fr.density
                    .iter()
                    .map(|p| {
                        let at = p.coefficients.iter().flatten().next().map_or(0, |s| s.span().start);
                        if p.coefficients.is_empty() {
                            return Err(r.error(at, "f.density has no coefficients"));
                        }
                        Ok(FnPieceSpec {
                            left: p.on[0],
                            right: p.on[1],
                            coefficients: p.coefficients.iter().map(|c| r.vector(c, at)).collect::<Result<_>>()?,
                        })
                    })
                    .collect::<Result<Vec<_>>>()?,
            ),
            None => None,
        };
        Ok(Self {
            interval: (repr.interval[0], repr.interval[1]),
            x0: repr.x0,
            q: r.measure(&repr.q, "q")?,
            w: r.measure(&repr.w, "w")?,
            j,
            boundary,
            f,
        })
    }

    pub fn to_text(&self) -> String {
        let repr = FileRepr {
            interval: [self.interval.0, self.interval.1],
            x0: self.x0,
            j: write_matrix(&self.j),
            boundary: self.boundary.as_ref().map(write_matrix),
            q: write_measure(&self.q),
            w: write_measure(&self.w),
            f: self.f.as_ref().map(|pieces| FnRepr {
                density: pieces
                    .iter()
                    .map(|p| FnPieceRepr {
                        on: [p.left, p.right],
                        coefficients: p
                            .coefficients
                            .iter()
                            .map(|v| v.iter().map(|z| format_complex(*z)).collect())
                            .collect(),
                    })
                    .collect(),
            }),
        };
        toml::to_string(&repr).expect("problem files always serialize")
    }

    pub fn from_problem(p: &SpectralProblem, boundary: Option<&CMat>) -> Result<Self> {
        let iv = p.interval();
        Ok(Self {
            interval: (iv.a, iv.b),
            x0: p.x0(),
            j: p.j().clone(),
            q: MeasureSpec::from_measure(p.q())?,
            w: MeasureSpec::from_measure(p.w())?,
            boundary: boundary.cloned(),
            f: None,
        })
    }

    /// `q` and `w` as measures, before any check on `J`.
    pub fn measures(&self) -> Result<(MatrixMeasure, MatrixMeasure)> {
        let n = self.j.nrows();
        let iv = RealInterval::new(self.interval.0, self.interval.1)?;
        Ok((self.q.build(n, iv)?, self.w.build(n, iv)?))
    }

    /// Builds and validates the problem.
    pub fn problem(&self) -> Result<SpectralProblem> {
        let (q, w) = self.measures()?;
        SpectralProblem::new(self.j.clone(), q, w, self.x0)
    }

    /// The `f` block as a function, zero off its pieces.
    pub fn function(&self) -> Option<Result<VectorFn>> {
        let pieces = self.f.clone()?;
        let n = self.j.nrows();
        if let Some(bad) = pieces.iter().flat_map(|p| &p.coefficients).find(|v| v.len() != n) {
            return Some(Err(Error::Usage(format!("f coefficients have length {}, expected {n}", bad.len()))));
        }
        Some(Ok(Arc::new(move |x| {
            let mut out = CVec::zeros(n);
            if let Some(p) = pieces.iter().find(|p| p.left <= x && x <= p.right) {
                let mut pow = 1.0;
                for c in &p.coefficients {
                    out += c * C64::new(pow, 0.0);
                    pow *= x;
                }
            }
            out
        })))
    }
}
