use std::fs;
use std::path::Path;

use super::{FieldKind, ScalarField};
use crate::error::{Error, Result};
use crate::grid::validate_dimension;

/// Values on a tensor-product grid, multilinearly interpolated.
///
/// Points outside the grid are clamped to its boundary. Derivatives come from
/// finite differences of the interpolant.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledField {
    axes: Vec<Vec<f64>>,
    values: Vec<f64>,
}

const BINARY_MAGIC: &[u8; 8] = b"BLSFv001";

impl SampledField {
    /// Builds the field from `(point, value)` rows covering a full tensor grid.
    pub fn from_samples(n: usize, rows: &[(Vec<f64>, f64)]) -> Result<Self> {
        validate_dimension(n)?;
        if rows.is_empty() {
            return Err(Error::InvalidInput("no samples".into()));
        }
        let mut axes: Vec<Vec<f64>> = vec![Vec::new(); n];
        for (p, v) in rows {
            if p.len() != n || p.iter().any(|c| !c.is_finite()) || !v.is_finite() {
                return Err(Error::InvalidInput(format!("malformed sample {p:?} -> {v}")));
            }
            for (axis, c) in axes.iter_mut().zip(p) {
                axis.push(*c);
            }
        }
        for axis in &mut axes {
            axis.sort_by(f64::total_cmp);
            axis.dedup();
            if axis.len() < 2 {
                return Err(Error::InvalidInput(
                    "every axis needs at least two distinct coordinates".into(),
                ));
            }
        }
        let total: usize = axes.iter().map(Vec::len).product();
        if total != rows.len() {
            return Err(Error::InvalidInput(format!(
                "{} samples do not form a tensor grid ({total} expected)",
                rows.len()
            )));
        }
        let mut values = vec![f64::NAN; total];
        for (p, v) in rows {
            let mut flat = 0;
            for (axis, c) in axes.iter().zip(p) {
                let i = axis
                    .binary_search_by(|a| a.total_cmp(c))
                    .expect("coordinate is on its axis");
                flat = flat * axis.len() + i;
            }
            if !values[flat].is_nan() {
                return Err(Error::InvalidInput(format!("duplicate sample at {p:?}")));
            }
            values[flat] = *v;
        }
        Ok(SampledField { axes, values })
    }

    /// Samples `u` on the tensor grid spanned by `axes`.
    pub fn from_field<F: ScalarField + ?Sized>(u: &F, axes: Vec<Vec<f64>>) -> Result<Self> {
        let n = u.dimension();
        if axes.len() != n || axes.iter().any(|a| a.len() < 2 || a.windows(2).any(|w| !(w[1] > w[0]))) {
            return Err(Error::InvalidInput(
                "axes must be strictly increasing with two or more entries".into(),
            ));
        }
        let total: usize = axes.iter().map(Vec::len).product();
        let mut values = Vec::with_capacity(total);
        let mut idx = vec![0usize; n];
        let mut p = vec![0.0; n];
        for _ in 0..total {
            for d in 0..n {
                p[d] = axes[d][idx[d]];
            }
            values.push(u.value(&p));
            for d in (0..n).rev() {
                idx[d] += 1;
                if idx[d] < axes[d].len() {
                    break;
                }
                idx[d] = 0;
            }
        }
        Ok(SampledField { axes, values })
    }

    pub fn axes(&self) -> &[Vec<f64>] {
        &self.axes
    }

    /// Grid points with values in row-major order.
    pub fn rows(&self) -> Vec<(Vec<f64>, f64)> {
        let n = self.axes.len();
        let mut idx = vec![0usize; n];
        let mut out = Vec::with_capacity(self.values.len());
        for &v in &self.values {
            out.push(((0..n).map(|d| self.axes[d][idx[d]]).collect(), v));
            for d in (0..n).rev() {
                idx[d] += 1;
                if idx[d] < self.axes[d].len() {
                    break;
                }
                idx[d] = 0;
            }
        }
        out
    }

    /// Reads a CSV with header `x1,…,xn,u`.
    pub fn read_csv(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let mut reader = csv::Reader::from_path(path)?;
        let headers = reader.headers()?.clone();
        if headers.len() < 4 || headers.get(headers.len() - 1) != Some("u") {
            return Err(Error::InvalidInput(format!(
                "{}: header must read x1,...,xn,u",
                path.display()
            )));
        }
        let n = headers.len() - 1;
        let mut rows = Vec::new();
        for record in reader.records() {
            let record = record?;
            let nums: std::result::Result<Vec<f64>, _> = record.iter().map(|s| s.trim().parse::<f64>()).collect();
            let nums = nums.map_err(|e| Error::InvalidInput(format!("{}: {e}", path.display())))?;
            if nums.len() != n + 1 {
                return Err(Error::InvalidInput(format!("{}: ragged row", path.display())));
            }
            rows.push((nums[..n].to_vec(), nums[n]));
        }
        SampledField::from_samples(n, &rows)
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let n = self.axes.len();
        let mut writer = csv::Writer::from_path(path.as_ref())?;
        let mut header: Vec<String> = (1..=n).map(|i| format!("x{i}")).collect();
        header.push("u".into());
        writer.write_record(&header)?;
        for (p, v) in self.rows() {
            let mut rec: Vec<String> = p.iter().map(|c| format!("{c:?}")).collect();
            rec.push(format!("{v:?}"));
            writer.write_record(&rec)?;
        }
        writer.flush().map_err(|e| Error::io(path.as_ref(), e))?;
        Ok(())
    }

    /// Little-endian binary form: magic, `n`, row count, then rows of `n + 1` doubles.
    pub fn write_binary(&self, path: impl AsRef<Path>) -> Result<()> {
        let rows = self.rows();
        let n = self.axes.len();
        let mut buf = Vec::with_capacity(24 + rows.len() * (n + 1) * 8);
        buf.extend_from_slice(BINARY_MAGIC);
        buf.extend_from_slice(&(n as u64).to_le_bytes());
        buf.extend_from_slice(&(rows.len() as u64).to_le_bytes());
        for (p, v) in rows {
            for c in p {
                buf.extend_from_slice(&c.to_le_bytes());
            }
            buf.extend_from_slice(&v.to_le_bytes());
        }
        fs::write(path.as_ref(), buf).map_err(|e| Error::io(path.as_ref(), e))
    }

    pub fn read_binary(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        let bad = || Error::InvalidInput(format!("{}: not a sampled-field binary file", path.display()));
        if bytes.len() < 24 || &bytes[..8] != BINARY_MAGIC {
            return Err(bad());
        }
        let word = |i: usize| -> [u8; 8] { bytes[i..i + 8].try_into().expect("slice of eight bytes") };
        let n = u64::from_le_bytes(word(8)) as usize;
        let count = u64::from_le_bytes(word(16)) as usize;
        if bytes.len() != 24 + count * (n + 1) * 8 {
            return Err(bad());
        }
        let rows: Vec<(Vec<f64>, f64)> = (0..count)
            .map(|r| {
                let base = 24 + r * (n + 1) * 8;
                let nums: Vec<f64> = (0..=n).map(|j| f64::from_le_bytes(word(base + 8 * j))).collect();
                (nums[..n].to_vec(), nums[n])
            })
            .collect();
        SampledField::from_samples(n, &rows)
    }
}

impl ScalarField for SampledField {
    fn dimension(&self) -> usize {
        self.axes.len()
    }

    fn kind(&self) -> FieldKind {
        FieldKind::Sampled
    }

    fn value(&self, x: &[f64]) -> f64 {
        let n = self.axes.len();
        let mut lower = [0usize; crate::grid::MAX_DIM];
        let mut frac = [0.0; crate::grid::MAX_DIM];
        for d in 0..n {
            let axis = &self.axes[d];
            let c = x[d].clamp(axis[0], axis[axis.len() - 1]);
            let i = axis.partition_point(|a| *a <= c).clamp(1, axis.len() - 1) - 1;
            lower[d] = i;
            frac[d] = (c - axis[i]) / (axis[i + 1] - axis[i]);
        }
        let mut acc = 0.0;
        for corner in 0..(1usize << n) {
            let mut w = 1.0;
            let mut flat = 0;
            for d in 0..n {
                let up = (corner >> (n - 1 - d)) & 1;
                w *= if up == 1 { frac[d] } else { 1.0 - frac[d] };
                flat = flat * self.axes[d].len() + lower[d] + up;
            }
            if w != 0.0 {
                acc += w * self.values[flat];
            }
        }
        acc
    }
}
