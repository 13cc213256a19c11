//! Observation ingestion, ordinal ranks and pseudo-observations.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

/// Name of the embedded 20-point bivariate loss dataset from Cottin &
/// Pfeifer's example 4.2, used throughout the reference study.
pub const FIXTURE_COTTIN_PFEIFER: &str = "cottin-pfeifer-4.2";

const COTTIN_PFEIFER_42: [[f64; 2]; 20] = [
    [0.468, 0.966],
    [9.951, 2.679],
    [0.866, 0.897],
    [6.731, 2.249],
    [1.421, 0.956],
    [2.040, 1.141],
    [2.967, 1.707],
    [1.200, 1.008],
    [0.426, 1.065],
    [1.946, 1.162],
    [0.676, 0.918],
    [1.184, 1.336],
    [0.960, 0.933],
    [1.972, 1.077],
    [1.549, 1.041],
    [0.819, 0.899],
    [0.063, 0.710],
    [1.280, 1.118],
    [0.824, 0.894],
    [0.227, 0.837],
];

/// Resolve a named embedded dataset.
pub fn fixture(name: &str) -> Option<ObservationSet> {
    match name {
        FIXTURE_COTTIN_PFEIFER => {
            let rows: Vec<Vec<f64>> = COTTIN_PFEIFER_42.iter().map(|r| r.to_vec()).collect();
            Some(ObservationSet::from_rows(rows).expect("embedded fixture is valid"))
        }
        _ => None,
    }
}

/// An `n × d` matrix of raw observations (losses), row per observation.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservationSet {
    n: usize,
    d: usize,
    values: Vec<f64>, // row-major
}

impl ObservationSet {
    /// Build from row vectors. Requires `n ≥ 2`, `d ≥ 2`, rectangular shape
    /// and finite entries.
    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let n = rows.len();
        if n < 2 {
            return Err(Error::invalid("n", format!("need at least 2 observations, got {n}")));
        }
        let d = rows[0].len();
        if d < 2 {
            return Err(Error::invalid("d", format!("need dimension >= 2, got {d}")));
        }
        let mut values = Vec::with_capacity(n * d);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != d {
                return Err(Error::Parse {
                    row: i + 1,
                    message: format!("expected {d} columns, found {}", row.len()),
                });
            }
            for &v in row {
                if !v.is_finite() {
                    return Err(Error::Parse {
                        row: i + 1,
                        message: format!("non-finite value {v}"),
                    });
                }
            }
            values.extend_from_slice(row);
        }
        Ok(Self { n, d, values })
    }

    /// Load a CSV file: comma-separated, '.' decimals, one observation per
    /// row, optional single header row. Row order is preserved.
    pub fn load_csv(path: impl AsRef<Path>, has_header: bool) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::parse_csv(&text, has_header)
    }

    /// Parse CSV text; line numbers in errors are 1-based over the whole
    /// input (header included).
    pub fn parse_csv(text: &str, has_header: bool) -> Result<Self> {
        let mut rows: Vec<Vec<f64>> = Vec::new();
        let mut width: Option<usize> = None;
        for (lineno, line) in text.lines().enumerate() {
            let row = lineno + 1;
            if lineno == 0 && has_header {
                continue;
            }
            if line.trim().is_empty() {
                continue;
            }
            let mut parsed = Vec::new();
            for cell in line.split(',') {
                let cell = cell.trim();
                let v: f64 = cell.parse().map_err(|_| Error::Parse {
                    row,
                    message: format!("non-numeric cell {cell:?}"),
                })?;
                if !v.is_finite() {
                    return Err(Error::Parse {
                        row,
                        message: format!("non-finite value {cell:?}"),
                    });
                }
                parsed.push(v);
            }
            match width {
                None => {
                    if parsed.len() < 2 {
                        return Err(Error::invalid(
                            "d",
                            format!("need dimension >= 2, got {} (row {row})", parsed.len()),
                        ));
                    }
                    width = Some(parsed.len());
                }
                Some(w) if parsed.len() != w => {
                    return Err(Error::Parse {
                        row,
                        message: format!("ragged row: expected {w} columns, found {}", parsed.len()),
                    });
                }
                _ => {}
            }
            rows.push(parsed);
        }
        Self::from_rows(rows)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn value(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.d + col]
    }

    pub fn row(&self, row: usize) -> &[f64] {
        &self.values[row * self.d..(row + 1) * self.d]
    }

    pub fn column(&self, col: usize) -> Vec<f64> {
        (0..self.n).map(|i| self.value(i, col)).collect()
    }
}

/// Ordinal ranks of an [`ObservationSet`]: each column is a permutation of
/// `{1, …, n}`, ties broken by row order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RankMatrix {
    n: usize,
    d: usize,
    ranks: Vec<u32>, // row-major
}

impl RankMatrix {
    /// Rank each column: the rank of a value is 1 + the number of strictly
    /// smaller values, with equal values ordered by row index.
    pub fn from_observations(obs: &ObservationSet) -> Self {
        let (n, d) = (obs.n(), obs.d());
        let mut ranks = vec![0u32; n * d];
        let mut order: Vec<usize> = Vec::with_capacity(n);
        for k in 0..d {
            order.clear();
            order.extend(0..n);
            order.sort_by(|&a, &b| {
                obs.value(a, k)
                    .partial_cmp(&obs.value(b, k))
                    .expect("finite values")
                    .then(a.cmp(&b))
            });
            for (pos, &row) in order.iter().enumerate() {
                ranks[row * d + k] = (pos + 1) as u32;
            }
        }
        Self { n, d, ranks }
    }

    /// Build directly from rank rows; every column must be a permutation of
    /// `{1, …, n}`.
    pub fn from_rows(rows: Vec<Vec<u32>>) -> Result<Self> {
        let n = rows.len();
        if n < 1 {
            return Err(Error::invalid("n", "empty rank matrix"));
        }
        let d = rows[0].len();
        if d < 2 {
            return Err(Error::invalid("d", format!("need dimension >= 2, got {d}")));
        }
        let mut ranks = vec![0u32; n * d];
        for (i, row) in rows.iter().enumerate() {
            if row.len() != d {
                return Err(Error::Parse {
                    row: i + 1,
                    message: format!("expected {d} columns, found {}", row.len()),
                });
            }
            for (k, &r) in row.iter().enumerate() {
                ranks[i * d + k] = r;
            }
        }
        let m = Self { n, d, ranks };
        for k in 0..d {
            if !m.column_is_permutation(k) {
                return Err(Error::invalid(
                    "ranks",
                    format!("column {k} is not a permutation of 1..={n}"),
                ));
            }
        }
        Ok(m)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn rank(&self, row: usize, col: usize) -> u32 {
        self.ranks[row * self.d + col]
    }

    pub fn row(&self, row: usize) -> &[u32] {
        &self.ranks[row * self.d..(row + 1) * self.d]
    }

    pub fn column(&self, col: usize) -> Vec<u32> {
        (0..self.n).map(|i| self.rank(i, col)).collect()
    }

    fn column_is_permutation(&self, col: usize) -> bool {
        let mut seen = vec![false; self.n];
        for i in 0..self.n {
            let r = self.rank(i, col) as usize;
            if r < 1 || r > self.n || seen[r - 1] {
                return false;
            }
            seen[r - 1] = true;
        }
        true
    }
}

/// Scaling convention mapping ranks into the unit interval.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum RankConvention {
    /// `rank / n`, values in `(0, 1]` — the convention used by the reference
    /// study's plots.
    #[default]
    ROverN,
    /// `rank / (n + 1)`, values strictly inside `(0, 1)`.
    ROverNPlus1,
}

/// Ranks scaled into the unit cube.
#[derive(Debug, Clone, PartialEq)]
pub struct PseudoObservations {
    n: usize,
    d: usize,
    values: Vec<f64>,
    convention: RankConvention,
}

impl PseudoObservations {
    pub fn from_ranks(ranks: &RankMatrix, convention: RankConvention) -> Self {
        let denom = match convention {
            RankConvention::ROverN => ranks.n() as f64,
            RankConvention::ROverNPlus1 => (ranks.n() + 1) as f64,
        };
        let values = ranks.ranks.iter().map(|&r| r as f64 / denom).collect();
        Self {
            n: ranks.n(),
            d: ranks.d(),
            values,
            convention,
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn value(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.d + col]
    }

    pub fn convention(&self) -> RankConvention {
        self.convention
    }
}
