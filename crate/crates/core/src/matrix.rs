//! Bit-packed bipartite adjacency matrices and their text format.
//!
//! Text format: a header line `"n1 n2"` followed by `n1` lines of exactly
//! `n2` characters from `{'0', '1'}`, each newline-terminated.

use std::fmt;
use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};

const WORD: usize = 64;

/// An `n1 × n2` binary matrix stored row-major, 64 entries per word.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct AdjacencyMatrix {
    n1: usize,
    n2: usize,
    words_per_row: usize,
    bits: Vec<u64>,
}

impl AdjacencyMatrix {
    pub fn zeros(n1: usize, n2: usize) -> Self {
        let words_per_row = n2.div_ceil(WORD);
        AdjacencyMatrix {
            n1,
            n2,
            words_per_row,
            bits: vec![0; n1 * words_per_row],
        }
    }

    pub fn ones(n1: usize, n2: usize) -> Self {
        Self::from_fn(n1, n2, |_, _| true)
    }

    pub fn from_fn(n1: usize, n2: usize, mut f: impl FnMut(usize, usize) -> bool) -> Self {
        let mut m = Self::zeros(n1, n2);
        for i in 0..n1 {
            for j in 0..n2 {
                if f(i, j) {
                    m.set(i, j, true);
                }
            }
        }
        m
    }

    /// Builds a matrix from rows of 0/1 values.
    pub fn from_rows<R: AsRef<[u8]>>(rows: &[R]) -> Result<Self> {
        let n1 = rows.len();
        let n2 = rows.first().map_or(0, |r| r.as_ref().len());
        let mut m = Self::zeros(n1, n2);
        for (i, row) in rows.iter().enumerate() {
            let row = row.as_ref();
            if row.len() != n2 {
                return Err(Error::param(format!(
                    "row {i} has length {} but row 0 has length {n2}",
                    row.len()
                )));
            }
            for (j, &v) in row.iter().enumerate() {
                match v {
                    0 => {}
                    1 => m.set(i, j, true),
                    other => return Err(Error::param(format!("entry ({i},{j}) = {other} is not 0/1"))),
                }
            }
        }
        Ok(m)
    }

    #[inline]
    pub fn n1(&self) -> usize {
        self.n1
    }

    #[inline]
    pub fn n2(&self) -> usize {
        self.n2
    }

    pub fn words_per_row(&self) -> usize {
        self.words_per_row
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> bool {
        debug_assert!(i < self.n1 && j < self.n2);
        let w = self.bits[i * self.words_per_row + j / WORD];
        (w >> (j % WORD)) & 1 == 1
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, value: bool) {
        debug_assert!(i < self.n1 && j < self.n2);
        let w = &mut self.bits[i * self.words_per_row + j / WORD];
        let mask = 1u64 << (j % WORD);
        if value {
            *w |= mask;
        } else {
            *w &= !mask;
        }
    }

    /// Packed words of row `i`; bits past `n2` are zero.
    #[inline]
    pub fn row_words(&self, i: usize) -> &[u64] {
        let s = i * self.words_per_row;
        &self.bits[s..s + self.words_per_row]
    }

    pub(crate) fn row_words_mut(&mut self, i: usize) -> &mut [u64] {
        let s = i * self.words_per_row;
        &mut self.bits[s..s + self.words_per_row]
    }

    pub fn count_ones(&self) -> u64 {
        self.bits.iter().map(|w| u64::from(w.count_ones())).sum()
    }

    /// Degrees of the left vertices (sums along each row).
    pub fn row_sums(&self) -> Vec<u32> {
        (0..self.n1)
            .map(|i| self.row_words(i).iter().map(|w| w.count_ones()).sum())
            .collect()
    }

    /// Degrees of the right vertices (sums down each column).
    pub fn col_sums(&self) -> Vec<u32> {
        let mut sums = vec![0u32; self.n2];
        for i in 0..self.n1 {
            for (wi, &word) in self.row_words(i).iter().enumerate() {
                let mut w = word;
                while w != 0 {
                    let b = w.trailing_zeros() as usize;
                    sums[wi * WORD + b] += 1;
                    w &= w - 1;
                }
            }
        }
        sums
    }

    pub fn transpose(&self) -> AdjacencyMatrix {
        let mut t = AdjacencyMatrix::zeros(self.n2, self.n1);
        for i in 0..self.n1 {
            for (wi, &word) in self.row_words(i).iter().enumerate() {
                let mut w = word;
                while w != 0 {
                    let b = w.trailing_zeros() as usize;
                    t.set(wi * WORD + b, i, true);
                    w &= w - 1;
                }
            }
        }
        t
    }

    /// True when every entry of `self` is ≤ the matching entry of `other`.
    pub fn dominated_by(&self, other: &AdjacencyMatrix) -> bool {
        self.n1 == other.n1 && self.n2 == other.n2 && self.bits.iter().zip(&other.bits).all(|(a, b)| a & !b == 0)
    }

    pub fn write_to<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "{} {}", self.n1, self.n2)?;
        let mut line = Vec::with_capacity(self.n2 + 1);
        for i in 0..self.n1 {
            line.clear();
            line.extend((0..self.n2).map(|j| if self.get(i, j) { b'1' } else { b'0' }));
            line.push(b'\n');
            out.write_all(&line)?;
        }
        Ok(())
    }

    pub fn read_from<R: BufRead>(input: R) -> Result<Self> {
        let mut lines = input.lines().enumerate();
        let header = match lines.next() {
            Some((_, line)) => line.map_err(|e| Error::Format {
                line: 1,
                message: e.to_string(),
            })?,
            None => {
                return Err(Error::Format {
                    line: 1,
                    message: "missing header \"n1 n2\"".into(),
                })
            }
        };
        let (n1, n2) = parse_header(header.trim_end_matches('\r'))?;
        let mut m = AdjacencyMatrix::zeros(n1, n2);
        for i in 0..n1 {
            let line_no = i + 2;
            let line = match lines.next() {
                Some((_, line)) => line.map_err(|e| Error::Format {
                    line: line_no,
                    message: e.to_string(),
                })?,
                None => {
                    return Err(Error::Format {
                        line: line_no,
                        message: format!("expected {n1} rows, found {i}"),
                    })
                }
            };
            let row = line.trim_end_matches('\r').as_bytes();
            if row.len() != n2 {
                return Err(Error::Format {
                    line: line_no,
                    message: format!("row has length {} but header declares {n2}", row.len()),
                });
            }
            for (j, &c) in row.iter().enumerate() {
                match c {
                    b'0' => {}
                    b'1' => m.set(i, j, true),
                    _ => {
                        return Err(Error::Format {
                            line: line_no,
                            message: format!("invalid character {:?} at column {}", c as char, j + 1),
                        })
                    }
                }
            }
        }
        for (idx, line) in lines {
            let line = line.map_err(|e| Error::Format {
                line: idx + 1,
                message: e.to_string(),
            })?;
            if !line.trim().is_empty() {
                return Err(Error::Format {
                    line: idx + 1,
                    message: format!("unexpected content after {n1} rows"),
                });
            }
        }
        Ok(m)
    }
}

fn parse_header(header: &str) -> Result<(usize, usize)> {
    let bad = |message: String| Error::Format { line: 1, message };
    let fields: Vec<&str> = header.split_whitespace().collect();
    if fields.len() != 2 {
        return Err(bad(format!("header must be \"n1 n2\", got {header:?}")));
    }
    let parse = |s: &str| {
        s.parse::<usize>()
            .ok()
            .filter(|&v| v > 0)
            .ok_or_else(|| bad(format!("dimension {s:?} is not a positive integer")))
    };
    Ok((parse(fields[0])?, parse(fields[1])?))
}

impl fmt::Debug for AdjacencyMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "AdjacencyMatrix {}x{}", self.n1, self.n2)?;
        for i in 0..self.n1.min(16) {
            let row: String = (0..self.n2.min(64))
                .map(|j| if self.get(i, j) { '1' } else { '0' })
                .collect();
            writeln!(f, "  {row}")?;
        }
        Ok(())
    }
}

impl fmt::Display for AdjacencyMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut buf = Vec::new();
        self.write_to(&mut buf).map_err(|_| fmt::Error)?;
        f.write_str(std::str::from_utf8(&buf).map_err(|_| fmt::Error)?)
    }
}

impl FromStr for AdjacencyMatrix {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        AdjacencyMatrix::read_from(s.as_bytes())
    }
}

pub fn read_matrix(path: impl AsRef<Path>) -> Result<AdjacencyMatrix> {
    let path = path.as_ref();
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    AdjacencyMatrix::read_from(BufReader::new(file))
}

pub fn write_matrix(a: &AdjacencyMatrix, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    a.write_to(&mut out)
        .and_then(|_| out.flush())
        .map_err(|e| Error::io(path, e))
}
