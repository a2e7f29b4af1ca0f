//! Dense sensing matrices and their on-disk formats.
//!
//! Storage is column-major because every restricted-isometry computation
//! works on column subsets. The binary and CSV formats are row-major.

use std::io::{BufRead, BufReader, Read, Write};

use crate::error::{Error, Result};

/// Normalization convention carried by a matrix.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Scale {
    /// Entries as sampled, e.g. i.i.d. standard Gaussian.
    Raw,
    /// Already multiplied by `1/sqrt(m)` (or otherwise pre-scaled).
    OneOverSqrtM,
}

impl Scale {
    pub fn tag(self) -> u8 {
        match self {
            Scale::Raw => 0,
            Scale::OneOverSqrtM => 1,
        }
    }

    pub fn from_tag(tag: u8) -> Result<Self> {
        match tag {
            0 => Ok(Scale::Raw),
            1 => Ok(Scale::OneOverSqrtM),
            t => Err(Error::Format(format!("unknown scale tag {t}"))),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Scale::Raw => "raw",
            Scale::OneOverSqrtM => "one-over-sqrt-m",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "raw" => Ok(Scale::Raw),
            "one-over-sqrt-m" => Ok(Scale::OneOverSqrtM),
            other => Err(Error::Format(format!("unknown scale '{other}'"))),
        }
    }
}

/// Which generator produced a matrix.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ModelTag {
    Null,
    Planted,
    Custom,
}

impl ModelTag {
    pub fn tag(self) -> u8 {
        match self {
            ModelTag::Null => 0,
            ModelTag::Planted => 1,
            ModelTag::Custom => 2,
        }
    }

    pub fn from_tag(tag: u8) -> Result<Self> {
        match tag {
            0 => Ok(ModelTag::Null),
            1 => Ok(ModelTag::Planted),
            2 => Ok(ModelTag::Custom),
            t => Err(Error::Format(format!("unknown model tag {t}"))),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ModelTag::Null => "null",
            ModelTag::Planted => "planted",
            ModelTag::Custom => "custom",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "null" => Ok(ModelTag::Null),
            "planted" => Ok(ModelTag::Planted),
            "custom" => Ok(ModelTag::Custom),
            other => Err(Error::Format(format!("unknown model '{other}'"))),
        }
    }
}

/// An `m x n` real matrix with its scaling convention and provenance.
#[derive(Clone, Debug, PartialEq)]
pub struct SensingMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
    scale: Scale,
    seed: u64,
    model: ModelTag,
}

impl SensingMatrix {
    /// Builds a matrix from column-major data. All entries must be finite.
    pub fn from_col_major(
        rows: usize,
        cols: usize,
        data: Vec<f64>,
        scale: Scale,
        seed: u64,
        model: ModelTag,
    ) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::param(format!("matrix shape {rows}x{cols} is empty")));
        }
        if data.len() != rows * cols {
            return Err(Error::data(format!(
                "expected {} entries for a {rows}x{cols} matrix, got {}",
                rows * cols,
                data.len()
            )));
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::data(format!(
                "non-finite entry at row {}, column {}",
                pos % rows,
                pos / rows
            )));
        }
        Ok(SensingMatrix {
            rows,
            cols,
            data,
            scale,
            seed,
            model,
        })
    }

    pub fn from_rows(rows: &[Vec<f64>], scale: Scale) -> Result<Self> {
        let m = rows.len();
        let n = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != n) {
            return Err(Error::data("ragged rows"));
        }
        let mut data = vec![0.0; m * n];
        for (i, row) in rows.iter().enumerate() {
            for (j, &v) in row.iter().enumerate() {
                data[j * m + i] = v;
            }
        }
        Self::from_col_major(m, n, data, scale, 0, ModelTag::Custom)
    }

    /// The first `n` columns of `scale * I_m` (requires `n <= m`).
    pub fn scaled_identity(m: usize, n: usize, scale: f64) -> Result<Self> {
        if n > m {
            return Err(Error::param("identity embedding needs n <= m"));
        }
        let mut data = vec![0.0; m * n];
        for j in 0..n {
            data[j * m + j] = scale;
        }
        Self::from_col_major(m, n, data, Scale::OneOverSqrtM, 0, ModelTag::Custom)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn scale(&self) -> Scale {
        self.scale
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn model(&self) -> ModelTag {
        self.model
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[j * self.rows + i]
    }

    pub fn col(&self, j: usize) -> &[f64] {
        &self.data[j * self.rows..(j + 1) * self.rows]
    }

    pub fn col_major(&self) -> &[f64] {
        &self.data
    }

    pub fn row_major(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.data.len());
        for i in 0..self.rows {
            for j in 0..self.cols {
                out.push(self.get(i, j));
            }
        }
        out
    }

    /// `X v` for a dense `n`-vector.
    pub fn apply(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(v.len(), self.cols);
        let mut out = vec![0.0; self.rows];
        for (j, &vj) in v.iter().enumerate() {
            if vj != 0.0 {
                for (o, a) in out.iter_mut().zip(self.col(j)) {
                    *o += a * vj;
                }
            }
        }
        out
    }

    pub fn column_norms(&self) -> Vec<f64> {
        (0..self.cols)
            .map(|j| self.col(j).iter().map(|a| a * a).sum::<f64>().sqrt())
            .collect()
    }

    /// The `1/sqrt(m)`-scaled matrix. Already scaled matrices are returned as is.
    pub fn normalized(&self) -> SensingMatrix {
        match self.scale {
            Scale::OneOverSqrtM => self.clone(),
            Scale::Raw => {
                let f = 1.0 / (self.rows as f64).sqrt();
                SensingMatrix {
                    data: self.data.iter().map(|a| a * f).collect(),
                    scale: Scale::OneOverSqrtM,
                    ..self.clone()
                }
            }
        }
    }

    /// Rescales every column to unit Euclidean norm.
    pub fn with_unit_columns(&self) -> Result<SensingMatrix> {
        let norms = self.column_norms();
        if let Some(j) = norms.iter().position(|&v| v == 0.0) {
            return Err(Error::data(format!("column {j} is zero and cannot be normalized")));
        }
        let mut data = self.data.clone();
        for (j, nrm) in norms.iter().enumerate() {
            for a in &mut data[j * self.rows..(j + 1) * self.rows] {
                *a /= nrm;
            }
        }
        Ok(SensingMatrix {
            data,
            scale: Scale::OneOverSqrtM,
            ..self.clone()
        })
    }

    /// Largest deviation of a squared column norm from one.
    pub fn max_column_deviation(&self) -> f64 {
        (0..self.cols)
            .map(|j| (self.col(j).iter().map(|a| a * a).sum::<f64>() - 1.0).abs())
            .fold(0.0, f64::max)
    }
}

pub const MAGIC: [u8; 4] = *b"RIPM";
pub const FORMAT_VERSION: u16 = 1;
pub const HEADER_LEN: usize = 32;

/// Writes the flat binary format: a 32-byte little-endian header
/// (magic, version, scale tag, model tag, m, n, seed) followed by the
/// row-major `f64` payload.
pub fn write_bin<W: Write>(mut w: W, x: &SensingMatrix) -> Result<()> {
    let mut header = [0u8; HEADER_LEN];
    header[0..4].copy_from_slice(&MAGIC);
    header[4..6].copy_from_slice(&FORMAT_VERSION.to_le_bytes());
    header[6] = x.scale.tag();
    header[7] = x.model.tag();
    header[8..16].copy_from_slice(&(x.rows as u64).to_le_bytes());
    header[16..24].copy_from_slice(&(x.cols as u64).to_le_bytes());
    header[24..32].copy_from_slice(&x.seed.to_le_bytes());
    w.write_all(&header)?;
    let mut buf = Vec::with_capacity(x.data.len() * 8);
    for v in x.row_major() {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    w.write_all(&buf)?;
    w.flush()?;
    Ok(())
}

pub fn read_bin<R: Read>(mut r: R) -> Result<SensingMatrix> {
    let mut header = [0u8; HEADER_LEN];
    r.read_exact(&mut header)
        .map_err(|e| Error::Format(format!("truncated header: {e}")))?;
    if header[0..4] != MAGIC {
        return Err(Error::Format("bad magic".into()));
    }
    let version = u16::from_le_bytes([header[4], header[5]]);
    if version != FORMAT_VERSION {
        return Err(Error::Format(format!("unsupported version {version}")));
    }
    let scale = Scale::from_tag(header[6])?;
    let model = ModelTag::from_tag(header[7])?;
    let word = |k: usize| u64::from_le_bytes(header[k..k + 8].try_into().expect("8 bytes"));
    let (m, n, seed) = (word(8) as usize, word(16) as usize, word(24));
    let len = m
        .checked_mul(n)
        .and_then(|e| e.checked_mul(8))
        .ok_or_else(|| Error::Format("shape overflows".into()))?;
    let mut payload = vec![0u8; len];
    r.read_exact(&mut payload)
        .map_err(|e| Error::Format(format!("truncated payload: {e}")))?;
    let mut data = vec![0.0; m * n];
    for (k, chunk) in payload.chunks_exact(8).enumerate() {
        let (i, j) = (k / n, k % n);
        data[j * m + i] = f64::from_le_bytes(chunk.try_into().expect("8 bytes"));
    }
    SensingMatrix::from_col_major(m, n, data, scale, seed, model)
}

/// CSV export: one comment line with the metadata, then one line per row.
pub fn write_csv<W: Write>(mut w: W, x: &SensingMatrix) -> Result<()> {
    writeln!(
        w,
        "# m={} n={} scale={} seed={} model={}",
        x.rows,
        x.cols,
        x.scale.name(),
        x.seed,
        x.model.name()
    )?;
    for i in 0..x.rows {
        let line: Vec<String> = (0..x.cols).map(|j| format!("{:e}", x.get(i, j))).collect();
        writeln!(w, "{}", line.join(","))?;
    }
    w.flush()?;
    Ok(())
}

/// Reads the CSV export. Without a metadata line the matrix is tagged
/// `raw`, seed 0, model `custom`.
pub fn read_csv<R: Read>(r: R) -> Result<SensingMatrix> {
    let mut scale = Scale::Raw;
    let mut seed = 0;
    let mut model = ModelTag::Custom;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for line in BufReader::new(r).lines() {
        let line = line?;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(meta) = line.strip_prefix('#') {
            for kv in meta.split_whitespace() {
                match kv.split_once('=') {
                    Some(("scale", v)) => scale = Scale::parse(v)?,
                    Some(("seed", v)) => {
                        seed = v.parse().map_err(|_| Error::Format(format!("bad seed '{v}'")))?
                    }
                    Some(("model", v)) => model = ModelTag::parse(v)?,
                    _ => {}
                }
            }
            continue;
        }
        let row = line
            .split(',')
            .map(|f| {
                f.trim()
                    .parse::<f64>()
                    .map_err(|_| Error::Format(format!("bad number '{f}'")))
            })
            .collect::<Result<Vec<_>>>()?;
        rows.push(row);
    }
    let mut x = SensingMatrix::from_rows(&rows, scale)?;
    x.seed = seed;
    x.model = model;
    Ok(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> SensingMatrix {
        SensingMatrix::from_rows(&[vec![1.0, -2.5, 0.125], vec![3.0, 4.0, -1e-300]], Scale::Raw)
            .unwrap()
    }

    #[test]
    fn row_major_and_column_access_agree() {
        let x = sample();
        assert_eq!(x.col(1), &[-2.5, 4.0]);
        assert_eq!(x.row_major(), vec![1.0, -2.5, 0.125, 3.0, 4.0, -1e-300]);
    }

    #[test]
    fn binary_header_layout() {
        let mut buf = Vec::new();
        write_bin(&mut buf, &sample()).unwrap();
        assert_eq!(buf.len(), HEADER_LEN + 6 * 8);
        assert_eq!(&buf[0..4], b"RIPM");
        assert_eq!(u16::from_le_bytes([buf[4], buf[5]]), 1);
        assert_eq!(u64::from_le_bytes(buf[8..16].try_into().unwrap()), 2);
        assert_eq!(u64::from_le_bytes(buf[16..24].try_into().unwrap()), 3);
        assert_eq!(f64::from_le_bytes(buf[40..48].try_into().unwrap()), -2.5);
    }

    #[test]
    fn binary_rejects_bad_magic_and_truncation() {
        let mut buf = Vec::new();
        write_bin(&mut buf, &sample()).unwrap();
        let mut bad = buf.clone();
        bad[0] = b'X';
        assert!(matches!(read_bin(&bad[..]), Err(Error::Format(_))));
        assert!(matches!(read_bin(&buf[..buf.len() - 1]), Err(Error::Format(_))));
    }

    #[test]
    fn csv_round_trip_keeps_metadata() {
        let x = sample().normalized();
        let mut buf = Vec::new();
        write_csv(&mut buf, &x).unwrap();
        let y = read_csv(&buf[..]).unwrap();
        assert_eq!(x, y);
    }

    #[test]
    fn non_finite_entries_are_rejected() {
        let err = SensingMatrix::from_rows(&[vec![1.0, f64::NAN]], Scale::Raw).unwrap_err();
        assert!(matches!(err, Error::Data(_)));
    }

    #[test]
    fn normalization_is_idempotent() {
        let x = sample().normalized();
        assert_eq!(x.scale(), Scale::OneOverSqrtM);
        assert_eq!(x.normalized(), x);
        let u = sample().with_unit_columns().unwrap();
        assert!(u.max_column_deviation() < 1e-15);
    }
}
