//! Unscrambled Sobol sequences in Gray-code order.
//!
//! The direction-number table ships in `data/sobol_directions.txt`. The
//! all-zeros point at index 0 is skipped, so the first emitted point is
//! `(0.5, …, 0.5)`.

use std::sync::OnceLock;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scalar::Scalar;

/// Highest supported dimension.
pub const MAX_DIMENSION: usize = 21;

const BITS: usize = 32;
const TABLE: &str = include_str!("../data/sobol_directions.txt");

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum QmcError {
    #[error("sobol dimension {0} is outside [1, {MAX_DIMENSION}]")]
    Dimension(usize),
    #[error("sobol sequence exhausted after 2^32 - 1 points")]
    Exhausted,
    #[error("malformed direction-number table at line {line}: {reason}")]
    Table { line: usize, reason: String },
}

/// One row of the direction-number table.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DirectionEntry {
    pub degree: u32,
    pub coeffs: u32,
    pub initial: Vec<u32>,
}

/// Parses the table format: `#` comments and blank lines are ignored, every
/// other line is `s a m_1 .. m_s`.
pub fn parse_direction_table(text: &str) -> Result<Vec<DirectionEntry>, QmcError> {
    let mut out = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let bad = |reason: &str| QmcError::Table {
            line: lineno + 1,
            reason: reason.to_string(),
        };
        let nums = line
            .split_whitespace()
            .map(|t| t.parse::<u32>().map_err(|_| bad("non-integer token")))
            .collect::<Result<Vec<_>, _>>()?;
        if nums.len() < 2 {
            return Err(bad("expected at least `s a`"));
        }
        let degree = nums[0];
        let initial = nums[2..].to_vec();
        if initial.len() != degree as usize {
            return Err(bad("number of m_i differs from s"));
        }
        for (i, &m) in initial.iter().enumerate() {
            if m % 2 == 0 || m >= 1 << (i + 1) {
                return Err(bad("m_i must be odd and below 2^i"));
            }
        }
        out.push(DirectionEntry {
            degree,
            coeffs: nums[1],
            initial,
        });
    }
    Ok(out)
}

fn builtin_table() -> &'static [DirectionEntry] {
    static CELL: OnceLock<Vec<DirectionEntry>> = OnceLock::new();
    CELL.get_or_init(|| parse_direction_table(TABLE).expect("embedded sobol table is valid"))
}

/// Expands one table row into 32 direction integers `v_k = m_k · 2^(32-k)`.
fn direction_numbers(entry: &DirectionEntry) -> [u32; BITS] {
    let mut v = [0u32; BITS];
    let s = entry.degree as usize;
    if s == 0 {
        for (k, vk) in v.iter_mut().enumerate() {
            *vk = 1 << (BITS - 1 - k);
        }
        return v;
    }
    for k in 0..s.min(BITS) {
        v[k] = entry.initial[k] << (BITS - 1 - k);
    }
    for k in s..BITS {
        let mut x = v[k - s] ^ (v[k - s] >> s);
        for j in 1..s {
            if (entry.coeffs >> (s - 1 - j)) & 1 == 1 {
                x ^= v[k - j];
            }
        }
        v[k] = x;
    }
    v
}

/// Stateful Sobol generator.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SobolEngine {
    dimension: usize,
    /// Number of points drawn so far, not counting the skipped origin.
    index: u64,
    #[serde(skip)]
    state: Vec<u32>,
    #[serde(skip)]
    directions: Vec<[u32; BITS]>,
}

impl SobolEngine {
    pub fn new(dimension: usize) -> Result<Self, QmcError> {
        if !(1..=MAX_DIMENSION).contains(&dimension) {
            return Err(QmcError::Dimension(dimension));
        }
        let directions = builtin_table()[..dimension]
            .iter()
            .map(direction_numbers)
            .collect();
        Ok(Self {
            dimension,
            index: 0,
            state: vec![0; dimension],
            directions,
        })
    }

    /// An engine that has already emitted `skip` points.
    pub fn with_skip(dimension: usize, skip: u64) -> Result<Self, QmcError> {
        let mut e = Self::new(dimension)?;
        e.fast_forward(skip)?;
        Ok(e)
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    /// Number of points emitted so far.
    pub fn index(&self) -> u64 {
        self.index
    }

    /// Jumps ahead by `n` points. The Gray-code state at position `i` is the
    /// XOR of the direction numbers at the set bits of `i ^ (i >> 1)`.
    pub fn fast_forward(&mut self, n: u64) -> Result<(), QmcError> {
        let target = self.index + n;
        if target >= 1 << BITS {
            return Err(QmcError::Exhausted);
        }
        let gray = target ^ (target >> 1);
        for (state, dirs) in self.state.iter_mut().zip(&self.directions) {
            *state = (0..BITS)
                .filter(|&b| (gray >> b) & 1 == 1)
                .fold(0, |acc, b| acc ^ dirs[b]);
        }
        self.index = target;
        Ok(())
    }

    fn advance(&mut self) -> Result<(), QmcError> {
        // Moving from Gray code of i to i+1 flips the bit at trailing_ones(i).
        let bit = self.index.trailing_ones() as usize;
        if bit >= BITS {
            return Err(QmcError::Exhausted);
        }
        for (state, dirs) in self.state.iter_mut().zip(&self.directions) {
            *state ^= dirs[bit];
        }
        self.index += 1;
        Ok(())
    }

    /// Next point in `[0,1)^d`.
    pub fn next_point<T: Scalar>(&mut self) -> Result<Vec<T>, QmcError> {
        self.advance()?;
        let scale = 1.0 / (1u64 << BITS) as f64;
        Ok(self
            .state
            .iter()
            .map(|&s| T::lit(f64::from(s) * scale))
            .collect())
    }

    /// Draws `n` points.
    pub fn draw<T: Scalar>(&mut self, n: usize) -> Result<Vec<Vec<T>>, QmcError> {
        (0..n).map(|_| self.next_point()).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_points_in_two_dimensions() {
        let mut e = SobolEngine::new(2).unwrap();
        let pts: Vec<Vec<f64>> = e.draw(3).unwrap();
        assert_eq!(
            pts,
            vec![vec![0.5, 0.5], vec![0.75, 0.25], vec![0.25, 0.75]]
        );
        assert_eq!(e.index(), 3);
    }

    #[test]
    fn rejects_bad_dimensions() {
        assert_eq!(SobolEngine::new(0).unwrap_err(), QmcError::Dimension(0));
        assert_eq!(SobolEngine::new(22).unwrap_err(), QmcError::Dimension(22));
        assert!(SobolEngine::new(21).is_ok());
    }

    #[test]
    fn fast_forward_matches_stepping() {
        let mut a = SobolEngine::new(7).unwrap();
        let stepped: Vec<Vec<f64>> = a.draw(40).unwrap();
        let mut b = SobolEngine::with_skip(7, 33).unwrap();
        assert_eq!(b.next_point::<f64>().unwrap(), stepped[33]);
    }

    #[test]
    fn table_parser_reports_line() {
        let err = parse_direction_table("# c\n1 0 1\n2 1 1\n").unwrap_err();
        assert!(matches!(err, QmcError::Table { line: 3, .. }));
        assert!(parse_direction_table("1 0 2\n").is_err());
        assert_eq!(builtin_table().len(), MAX_DIMENSION);
    }
}
