//! Joint points `z = (x, y)` and sample sets.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result, VrmError};

/// Largest supported joint dimension `K`.
pub const MAX_DIM: usize = 32;
/// Largest training set accepted by the matching and covering routines.
pub const MAX_POINTS: usize = 5000;

/// Partition of the `K = I + J` coordinates of a joint point into input and
/// output blocks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Split {
    pub input_dim: usize,
    pub output_dim: usize,
}

impl Split {
    pub fn new(input_dim: usize, output_dim: usize) -> Result<Self> {
        if input_dim == 0 || output_dim == 0 {
            return invalid("input and output blocks must both be non-empty");
        }
        if input_dim + output_dim > MAX_DIM {
            return invalid(format!("K = {} exceeds {MAX_DIM}", input_dim + output_dim));
        }
        Ok(Self { input_dim, output_dim })
    }

    /// Total dimension `K`.
    pub fn dim(&self) -> usize {
        self.input_dim + self.output_dim
    }
}

/// One joint point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Point {
    coords: Vec<f64>,
    split: Split,
}

impl Point {
    pub fn new(coords: Vec<f64>, split: Split) -> Result<Self> {
        if coords.len() != split.dim() {
            return Err(VrmError::DimensionMismatch { expected: split.dim(), found: coords.len() });
        }
        if coords.iter().any(|c| !c.is_finite()) {
            return invalid("point coordinates must be finite");
        }
        Ok(Self { coords, split })
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn split(&self) -> Split {
        self.split
    }

    pub fn x(&self) -> &[f64] {
        &self.coords[..self.split.input_dim]
    }

    pub fn y(&self) -> &[f64] {
        &self.coords[self.split.input_dim..]
    }
}

/// Where a sample set came from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub generator: String,
    pub seed: Option<u64>,
}

impl Provenance {
    pub fn manual() -> Self {
        Self { generator: "manual".into(), seed: None }
    }
}

/// An ordered list of `N` points sharing one split, stored row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SampleSetRepr", into = "SampleSetRepr")]
pub struct SampleSet {
    data: Vec<f64>,
    len: usize,
    split: Split,
    provenance: Provenance,
}

impl SampleSet {
    /// Builds a set from a flat row-major buffer.
    pub fn from_flat(data: Vec<f64>, split: Split, provenance: Provenance) -> Result<Self> {
        let k = split.dim();
        if data.is_empty() {
            return invalid("a sample set needs at least one point");
        }
        if !data.len().is_multiple_of(k) {
            return Err(VrmError::DimensionMismatch { expected: k, found: data.len() % k });
        }
        if data.iter().any(|c| !c.is_finite()) {
            return invalid("point coordinates must be finite");
        }
        let len = data.len() / k;
        Ok(Self { data, len, split, provenance })
    }

    pub fn from_rows(rows: &[Vec<f64>], split: Split) -> Result<Self> {
        let mut data = Vec::with_capacity(rows.len() * split.dim());
        for row in rows {
            if row.len() != split.dim() {
                return Err(VrmError::DimensionMismatch { expected: split.dim(), found: row.len() });
            }
            data.extend_from_slice(row);
        }
        Self::from_flat(data, split, Provenance::manual())
    }

    pub fn from_points(points: &[Point]) -> Result<Self> {
        let Some(first) = points.first() else {
            return invalid("a sample set needs at least one point");
        };
        let split = first.split();
        let mut data = Vec::with_capacity(points.len() * split.dim());
        for p in points {
            if p.split() != split {
                return Err(VrmError::DimensionMismatch { expected: split.dim(), found: p.coords().len() });
            }
            data.extend_from_slice(p.coords());
        }
        Self::from_flat(data, split, Provenance::manual())
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn split(&self) -> Split {
        self.split
    }

    pub fn dim(&self) -> usize {
        self.split.dim()
    }

    pub fn provenance(&self) -> &Provenance {
        &self.provenance
    }

    pub fn with_provenance(mut self, provenance: Provenance) -> Self {
        self.provenance = provenance;
        self
    }

    /// Coordinates of point `n`.
    pub fn row(&self, n: usize) -> &[f64] {
        let k = self.dim();
        &self.data[n * k..(n + 1) * k]
    }

    pub fn point(&self, n: usize) -> Point {
        Point { coords: self.row(n).to_vec(), split: self.split }
    }

    pub fn rows(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.data.chunks_exact(self.dim())
    }

    pub fn as_flat(&self) -> &[f64] {
        &self.data
    }

    /// Checks that `other` has the same split.
    pub fn check_compatible(&self, other: &SampleSet) -> Result<()> {
        if self.split != other.split {
            return Err(VrmError::DimensionMismatch { expected: self.dim(), found: other.dim() });
        }
        Ok(())
    }

    /// Points reordered so that row `n` of the result is row `order[n]` of `self`.
    pub fn reordered(&self, order: &[usize]) -> SampleSet {
        let mut data = Vec::with_capacity(self.data.len());
        for &i in order {
            data.extend_from_slice(self.row(i));
        }
        SampleSet { data, len: order.len(), split: self.split, provenance: self.provenance.clone() }
    }

    /// Adds `shift` to every point.
    pub fn translated(&self, shift: &[f64]) -> Result<SampleSet> {
        if shift.len() != self.dim() {
            return Err(VrmError::DimensionMismatch { expected: self.dim(), found: shift.len() });
        }
        let data = self.rows().flat_map(|r| r.iter().zip(shift).map(|(a, b)| a + b)).collect();
        SampleSet::from_flat(data, self.split, self.provenance.clone())
    }

    /// CSV with header `z_1,...,z_K` and one row per point.
    pub fn to_csv(&self) -> String {
        let mut out = (1..=self.dim()).map(|k| format!("z_{k}")).collect::<Vec<_>>().join(",");
        out.push('\n');
        for row in self.rows() {
            let line: Vec<String> = row.iter().map(|v| format!("{v}")).collect();
            out.push_str(&line.join(","));
            out.push('\n');
        }
        out
    }

    pub fn from_csv(text: &str, split: Split) -> Result<SampleSet> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty() && !l.starts_with('#'));
        let header = lines.next().ok_or_else(|| VrmError::InvalidParameter("empty CSV".into()))?;
        let cols = header.split(',').count();
        if cols != split.dim() {
            return Err(VrmError::DimensionMismatch { expected: split.dim(), found: cols });
        }
        let mut data = Vec::new();
        for line in lines {
            let before = data.len();
            for field in line.split(',') {
                let v: f64 =
                    field.trim().parse().map_err(|_| VrmError::InvalidParameter(format!("bad number `{field}`")))?;
                data.push(v);
            }
            if data.len() - before != cols {
                return Err(VrmError::DimensionMismatch { expected: cols, found: data.len() - before });
            }
        }
        SampleSet::from_flat(data, split, Provenance { generator: "csv".into(), seed: None })
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SampleSetRepr {
    input_dim: usize,
    output_dim: usize,
    provenance: Provenance,
    points: Vec<Vec<f64>>,
}

impl From<SampleSet> for SampleSetRepr {
    fn from(s: SampleSet) -> Self {
        SampleSetRepr {
            input_dim: s.split.input_dim,
            output_dim: s.split.output_dim,
            points: s.rows().map(|r| r.to_vec()).collect(),
            provenance: s.provenance,
        }
    }
}

impl TryFrom<SampleSetRepr> for SampleSet {
    type Error = VrmError;

    fn try_from(r: SampleSetRepr) -> Result<Self> {
        let split = Split::new(r.input_dim, r.output_dim)?;
        let set = SampleSet::from_rows(&r.points, split)?;
        Ok(set.with_provenance(r.provenance))
    }
}
