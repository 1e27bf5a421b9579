//! Shared data containers: the observed sample, penalty loadings, and
//! seedable random-number streams.

use std::io::Read;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Observed data: response `y`, treatment `d`, and control matrix `x`
/// (n rows, p columns; the first column may be an all-ones intercept).
///
/// Immutable after construction; all rows are finite and the three parts
/// share the row count.
#[derive(Debug, Clone)]
pub struct Sample {
    y: DVector<f64>,
    d: DVector<f64>,
    x: DMatrix<f64>,
}

impl Sample {
    pub fn new(y: DVector<f64>, d: DVector<f64>, x: DMatrix<f64>) -> Result<Self> {
        let n = y.len();
        if n < 2 {
            return Err(Error::InvalidInput(format!("need n >= 2 rows, got {n}")));
        }
        if d.len() != n || x.nrows() != n {
            return Err(Error::InvalidInput(format!(
                "row mismatch: y has {n}, d has {}, x has {}",
                d.len(),
                x.nrows()
            )));
        }
        if x.ncols() < 1 {
            return Err(Error::InvalidInput("need p >= 1 control columns".into()));
        }
        let finite = y.iter().all(|v| v.is_finite())
            && d.iter().all(|v| v.is_finite())
            && x.iter().all(|v| v.is_finite());
        if !finite {
            return Err(Error::InvalidInput("non-finite entry in sample".into()));
        }
        Ok(Self { y, d, x })
    }

    pub fn n(&self) -> usize {
        self.y.len()
    }

    pub fn p(&self) -> usize {
        self.x.ncols()
    }

    pub fn y(&self) -> &DVector<f64> {
        &self.y
    }

    pub fn d(&self) -> &DVector<f64> {
        &self.d
    }

    pub fn x(&self) -> &DMatrix<f64> {
        &self.x
    }

    /// Index of the first all-ones column of `x`, if any.
    pub fn intercept_column(&self) -> Option<usize> {
        (0..self.x.ncols()).find(|&j| self.x.column(j).iter().all(|&v| v == 1.0))
    }

    /// Read a sample from CSV with a header row tagging columns `y`, `d`,
    /// `x1`..`xp` (any order). Parsing is strict: every field must be a finite
    /// float, rows must all have the header's width, and the x-columns must be
    /// numbered consecutively from 1.
    pub fn from_csv_reader<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(true)
            .flexible(false)
            .trim(csv::Trim::All)
            .from_reader(reader);

        let headers = rdr
            .headers()
            .map_err(|e| Error::Csv(format!("reading header: {e}")))?
            .clone();
        let mut y_col = None;
        let mut d_col = None;
        let mut x_cols: Vec<(usize, usize)> = Vec::new(); // (x index, csv column)
        for (idx, name) in headers.iter().enumerate() {
            match name {
                "y" => {
                    if y_col.replace(idx).is_some() {
                        return Err(Error::Csv("duplicate column y".into()));
                    }
                }
                "d" => {
                    if d_col.replace(idx).is_some() {
                        return Err(Error::Csv("duplicate column d".into()));
                    }
                }
                _ => {
                    let Some(num) = name.strip_prefix('x').and_then(|s| s.parse::<usize>().ok())
                    else {
                        return Err(Error::Csv(format!("unrecognized column {name:?}")));
                    };
                    if num == 0 {
                        return Err(Error::Csv("x columns are numbered from x1".into()));
                    }
                    if x_cols.iter().any(|&(k, _)| k == num) {
                        return Err(Error::Csv(format!("duplicate column x{num}")));
                    }
                    x_cols.push((num, idx));
                }
            }
        }
        let y_col = y_col.ok_or_else(|| Error::Csv("missing column y".into()))?;
        let d_col = d_col.ok_or_else(|| Error::Csv("missing column d".into()))?;
        if x_cols.is_empty() {
            return Err(Error::Csv("missing x columns (x1..xp)".into()));
        }
        x_cols.sort_unstable();
        for (want, &(got, _)) in (1..).zip(x_cols.iter()) {
            if got != want {
                return Err(Error::Csv(format!("x columns must be consecutive: missing x{want}")));
            }
        }

        let parse = |field: &str, row: usize, name: &str| -> Result<f64> {
            let v: f64 = field
                .parse()
                .map_err(|_| Error::Csv(format!("row {row}: bad float {field:?} in {name}")))?;
            if !v.is_finite() {
                return Err(Error::Csv(format!("row {row}: non-finite value in {name}")));
            }
            Ok(v)
        };

        let mut y = Vec::new();
        let mut d = Vec::new();
        let mut xs: Vec<Vec<f64>> = vec![Vec::new(); x_cols.len()];
        for (row_idx, rec) in rdr.records().enumerate() {
            let rec = rec.map_err(|e| Error::Csv(format!("row {}: {e}", row_idx + 1)))?;
            y.push(parse(&rec[y_col], row_idx + 1, "y")?);
            d.push(parse(&rec[d_col], row_idx + 1, "d")?);
            for (slot, &(num, csv_idx)) in xs.iter_mut().zip(x_cols.iter()) {
                slot.push(parse(&rec[csv_idx], row_idx + 1, &format!("x{num}"))?);
            }
        }
        let n = y.len();
        if n < 2 {
            return Err(Error::Csv(format!("need at least 2 data rows, got {n}")));
        }
        let x = DMatrix::from_columns(
            &xs.into_iter().map(DVector::from_vec).collect::<Vec<_>>(),
        );
        Sample::new(DVector::from_vec(y), DVector::from_vec(d), x)
    }

    pub fn from_csv_path(path: impl AsRef<Path>) -> Result<Self> {
        let file = std::fs::File::open(path)?;
        Self::from_csv_reader(file)
    }
}

/// The median-regression sign score: 1/2 - 1{t <= 0}.
#[inline]
pub fn sign_score(t: f64) -> f64 {
    if t > 0.0 {
        0.5
    } else {
        -0.5
    }
}

/// Diagonal penalty loadings for the weighted l1 penalty: entry 0 normalizes
/// the treatment column, entries 1..=p the control columns, each the root mean
/// square of its column.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PenaltyWeights {
    /// Length p+1; entry j is sqrt(E_n of the squared column), or 0 for a
    /// column explicitly exempted from penalization.
    pub psi: Vec<f64>,
}

impl PenaltyWeights {
    /// Zero the loading of control column `j` (0-based within x), removing it
    /// from the penalty. Used by the intercept-exemption switch.
    pub fn exempt_x_column(&mut self, j: usize) {
        self.psi[j + 1] = 0.0;
    }
}

/// Compute penalty loadings from the sample; rejects identically-zero columns
/// whose loading would be zero.
pub fn column_loadings(sample: &Sample) -> Result<PenaltyWeights> {
    let n = sample.n() as f64;
    let mut psi = Vec::with_capacity(sample.p() + 1);
    let rms = |col: nalgebra::DVectorView<f64>| (col.iter().map(|v| v * v).sum::<f64>() / n).sqrt();
    psi.push(rms(sample.d().as_view()));
    if psi[0] == 0.0 {
        return Err(Error::DegenerateColumn("d".into()));
    }
    for j in 0..sample.p() {
        let l = rms(sample.x().column(j));
        if l == 0.0 {
            return Err(Error::DegenerateColumn(format!("x{}", j + 1)));
        }
        psi.push(l);
    }
    Ok(PenaltyWeights { psi })
}

/// A reproducible random stream: identical (seed, stream) pairs produce
/// bit-identical draw sequences regardless of thread schedule. The Monte Carlo
/// harness keys one stream per replication, the bootstrap one per draw block.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RngStream {
    pub seed: u64,
    pub stream: u64,
}

impl RngStream {
    pub fn new(seed: u64, stream: u64) -> Self {
        Self { seed, stream }
    }

    pub fn substream(&self, offset: u64) -> Self {
        Self { seed: self.seed, stream: self.stream.wrapping_add(offset) }
    }

    /// Instantiate the generator positioned at the start of this stream.
    pub fn rng(&self) -> ChaCha8Rng {
        let mut state = self.seed;
        let mut key = [0u8; 32];
        for chunk in key.chunks_exact_mut(8) {
            chunk.copy_from_slice(&splitmix64(&mut state).to_le_bytes());
        }
        let mut rng = ChaCha8Rng::from_seed(key);
        rng.set_stream(self.stream);
        rng
    }
}

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
