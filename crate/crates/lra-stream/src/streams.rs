//! Stream sources: synthetic generators and CSV ingestion.
//!
//! Every source carries a [`StreamMeta`] describing how it was produced, so
//! reports stay reproducible from their JSON alone.

use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StreamKind {
    Csv,
    RandomInteger,
    LowerBound,
    AlternatingDominance,
}

/// Provenance of a stream; serialized next to every report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StreamMeta {
    pub kind: StreamKind,
    /// Rows actually emitted (generators may round down to whole phases).
    pub n: usize,
    pub d: usize,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub k: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub eps: Option<f64>,
    /// Largest |entry| in the stream.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub max_abs: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub seed: Option<u64>,
    /// Phase growth constant of the adversarial generator.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub c_lb: Option<f64>,
    /// Realized per-step recourse-rate constant of the emitted stream.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub c0: Option<f64>,
    /// Interleaved round counts, one per completed phase.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub phase_copy_counts: Option<Vec<usize>>,
    /// True when the requested length was rounded down to whole phases.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub truncated: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub source: Option<String>,
}

impl StreamMeta {
    /// Metadata with only the required fields; generators fill the rest.
    pub fn bare(kind: StreamKind, n: usize, d: usize) -> Self {
        StreamMeta {
            kind,
            n,
            d,
            k: None,
            eps: None,
            max_abs: None,
            seed: None,
            c_lb: None,
            c0: None,
            phase_copy_counts: None,
            truncated: None,
            source: None,
        }
    }
}

/// A fully materialized stream: metadata plus the n×d row matrix.
#[derive(Debug, Clone)]
pub struct StreamSource {
    pub meta: StreamMeta,
    rows: DMatrix<f64>,
}

impl StreamSource {
    pub fn new(meta: StreamMeta, rows: DMatrix<f64>) -> Self {
        debug_assert_eq!(meta.n, rows.nrows());
        debug_assert_eq!(meta.d, rows.ncols());
        StreamSource { meta, rows }
    }

    pub fn n(&self) -> usize {
        self.rows.nrows()
    }

    pub fn dim(&self) -> usize {
        self.rows.ncols()
    }

    pub fn rows(&self) -> &DMatrix<f64> {
        &self.rows
    }

    /// Row `i` (0-based) as a column vector.
    pub fn row(&self, i: usize) -> DVector<f64> {
        self.rows.row(i).transpose()
    }
}

fn max_abs_entry(rows: &DMatrix<f64>) -> f64 {
    rows.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Uniform random integer entries in `[-max_abs, max_abs]`, or
/// `[0, max_abs]` when `nonneg` is set.
pub fn gen_random_integer_stream(
    n: usize,
    d: usize,
    max_abs: u64,
    seed: u64,
    nonneg: bool,
) -> Result<StreamSource> {
    if n == 0 || d == 0 {
        return Err(Error::InvalidParameter(
            "stream must have n ≥ 1 rows and d ≥ 1 columns".into(),
        ));
    }
    if max_abs == 0 {
        return Err(Error::InvalidParameter("entry bound must be ≥ 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let m = max_abs as i64;
    let lo = if nonneg { 0 } else { -m };
    let rows = DMatrix::from_fn(n, d, |_, _| rng.gen_range(lo..=m) as f64);
    let mut meta = StreamMeta::bare(StreamKind::RandomInteger, n, d);
    meta.max_abs = Some(max_abs_entry(&rows));
    meta.seed = Some(seed);
    Ok(StreamSource::new(meta, rows))
}

/// Adversarial phase stream forcing recourse on any near-optimal tracker.
///
/// Phase `i` (1-based) interleaves `⌈(1 + c_lb·eps)^i⌉` rounds of the
/// standard vectors `e_1..e_k` (odd phases) or `e_{k+1}..e_{2k}` (even
/// phases). Each completed phase overtakes everything before it, so the
/// best rank-k subspace alternates between the two orthogonal blocks at
/// every phase boundary. Only whole phases are emitted; at least two must
/// fit in `n`.
pub fn gen_lower_bound_stream(
    n: usize,
    d: Option<usize>,
    k: usize,
    eps: f64,
    c_lb: f64,
) -> Result<StreamSource> {
    if k == 0 {
        return Err(Error::InvalidParameter("k must be ≥ 1".into()));
    }
    // The phase construction only separates OPT between consecutive phases
    // when eps clears the coupon-ish floor log(n)/n; below that the phase
    // counts collapse and the alternation argument falls apart.
    let floor = (n as f64).ln() / n as f64;
    if !eps.is_finite() || eps <= floor {
        return Err(Error::InvalidParameter(format!(
            "eps must exceed log(n)/n = {floor:.3e}, got {eps}"
        )));
    }
    if !c_lb.is_finite() || c_lb <= 2.0 {
        return Err(Error::InvalidParameter(format!(
            "phase growth constant must exceed 2, got {c_lb}"
        )));
    }
    let d = d.unwrap_or(2 * k);
    if d < 2 * k {
        return Err(Error::InvalidParameter(format!(
            "need d ≥ 2k = {} for two disjoint blocks, got {d}",
            2 * k
        )));
    }

    let growth = 1.0 + c_lb * eps;
    let mut counts: Vec<usize> = Vec::new();
    let mut used = 0usize;
    loop {
        let i = counts.len() as i32 + 1;
        let cnt = growth.powi(i).ceil() as usize;
        let need = k
            .checked_mul(cnt)
            .and_then(|r| r.checked_add(used))
            .ok_or_else(|| Error::InvalidParameter("phase size overflow".into()))?;
        if need > n {
            break;
        }
        counts.push(cnt);
        used = need;
    }
    if counts.len() < 2 {
        return Err(Error::InvalidParameter(format!(
            "n = {n} fits only {} full phase(s); the stream needs at least 2",
            counts.len()
        )));
    }

    let mut rows = DMatrix::zeros(used, d);
    let mut r = 0;
    for (idx, &cnt) in counts.iter().enumerate() {
        let offset = if idx % 2 == 0 { 0 } else { k };
        for _ in 0..cnt {
            for j in 0..k {
                rows[(r, offset + j)] = 1.0;
                r += 1;
            }
        }
    }
    debug_assert_eq!(r, used);

    let phases = counts.len();
    let c0 = phases as f64 * eps / (used as f64 / k as f64).ln();
    let mut meta = StreamMeta::bare(StreamKind::LowerBound, used, d);
    meta.k = Some(k);
    meta.eps = Some(eps);
    meta.max_abs = Some(1.0);
    meta.c_lb = Some(c_lb);
    meta.c0 = Some(c0);
    meta.phase_copy_counts = Some(counts);
    meta.truncated = Some(used < n);
    Ok(StreamSource::new(meta, rows))
}

/// Two-column stream whose dominant direction flips every single step:
/// row `t` is `t·e1` for odd `t` and `t·e2` for even `t`. Any tracker that
/// greedily follows the top direction pays recourse at every arrival.
pub fn gen_alternating_dominance_stream(n: usize) -> Result<StreamSource> {
    if n < 2 {
        return Err(Error::InvalidParameter(
            "alternation needs at least 2 rows".into(),
        ));
    }
    // Row i (0-based) carries t = i+1 in column 0 when t is odd, column 1
    // when t is even.
    let rows = DMatrix::from_fn(n, 2, |i, j| {
        let t = (i + 1) as f64;
        if i % 2 == j {
            t
        } else {
            0.0
        }
    });
    let mut meta = StreamMeta::bare(StreamKind::AlternatingDominance, n, 2);
    meta.max_abs = Some(n as f64);
    Ok(StreamSource::new(meta, rows))
}

/// Loads a comma-separated numeric file, one stream row per line.
///
/// A first line with any non-numeric field is treated as a header. With
/// `quantize = Some(s)`, every entry `x` becomes `round(s · x)`, mapping
/// real data onto the integer grid the additive tracker's guarantees are
/// stated for.
pub fn load_csv_stream(path: &Path, quantize: Option<f64>) -> Result<StreamSource> {
    if let Some(s) = quantize {
        if !(s > 0.0) || !s.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "quantization scale must be positive, got {s}"
            )));
        }
    }
    let text = std::fs::read_to_string(path)?;
    let mut data: Vec<Vec<f64>> = Vec::new();
    let mut width: Option<usize> = None;
    let mut saw_any_line = false;

    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        let parsed: std::result::Result<Vec<f64>, _> =
            fields.iter().map(|f| f.parse::<f64>()).collect();
        let row = match parsed {
            Ok(row) => row,
            Err(_) if !saw_any_line => {
                // Header line; column names are not data.
                saw_any_line = true;
                continue;
            }
            Err(_) => {
                return Err(Error::Ingestion {
                    line: line_no,
                    msg: "non-numeric field".into(),
                });
            }
        };
        saw_any_line = true;
        if row.iter().any(|x| !x.is_finite()) {
            return Err(Error::Ingestion {
                line: line_no,
                msg: "non-finite value".into(),
            });
        }
        match width {
            None => width = Some(row.len()),
            Some(w) if w != row.len() => {
                return Err(Error::Ingestion {
                    line: line_no,
                    msg: format!("expected {w} fields, found {}", row.len()),
                });
            }
            Some(_) => {}
        }
        data.push(row);
    }

    let d = width.ok_or_else(|| Error::Ingestion {
        line: 0,
        msg: "no data rows".into(),
    })?;
    let n = data.len();
    let mut rows = DMatrix::zeros(n, d);
    for (i, row) in data.iter().enumerate() {
        for (j, &x) in row.iter().enumerate() {
            rows[(i, j)] = match quantize {
                Some(s) => (s * x).round(),
                None => x,
            };
        }
    }
    let mut meta = StreamMeta::bare(StreamKind::Csv, n, d);
    meta.max_abs = Some(max_abs_entry(&rows));
    meta.source = Some(path.display().to_string());
    Ok(StreamSource::new(meta, rows))
}
