use std::fmt;

use crate::error::{Error, Result};

/// Dense row-major `f32` array of rank 1 to 4.
///
/// Rank-4 tensors are laid out `(batch, height, width, channel)` with the
/// channel index varying fastest.
#[derive(Clone, PartialEq)]
pub struct Tensor {
    dims: Vec<usize>,
    data: Vec<f32>,
}

impl Tensor {
    pub fn new(dims: impl Into<Vec<usize>>, data: Vec<f32>) -> Result<Self> {
        let dims = dims.into();
        check_dims(&dims)?;
        let expected = dims.iter().product::<usize>();
        if expected != data.len() {
            return Err(Error::Shape(format!(
                "dims {:?} need {} elements, got {}",
                dims,
                expected,
                data.len()
            )));
        }
        Ok(Tensor { dims, data })
    }

    pub fn zeros(dims: impl Into<Vec<usize>>) -> Result<Self> {
        Self::filled(dims, 0.0)
    }

    pub fn filled(dims: impl Into<Vec<usize>>, value: f32) -> Result<Self> {
        let dims = dims.into();
        check_dims(&dims)?;
        let n = dims.iter().product();
        Ok(Tensor {
            dims,
            data: vec![value; n],
        })
    }

    /// Builds a tensor and rejects NaN or infinite elements.
    pub fn new_finite(dims: impl Into<Vec<usize>>, data: Vec<f32>) -> Result<Self> {
        let t = Self::new(dims, data)?;
        t.ensure_finite("tensor")?;
        Ok(t)
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn rank(&self) -> usize {
        self.dims.len()
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f32] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f32> {
        self.data
    }

    pub fn reshape(self, dims: impl Into<Vec<usize>>) -> Result<Self> {
        Self::new(dims, self.data)
    }

    /// Row `i` of a rank-2 tensor.
    pub fn row(&self, i: usize) -> &[f32] {
        let cols = self.dims[self.dims.len() - 1];
        &self.data[i * cols..(i + 1) * cols]
    }

    /// Stacks rank-2 rows selected by `indices` into a new `(indices.len(), cols)` tensor.
    pub fn gather_rows(&self, indices: &[usize]) -> Result<Self> {
        let (rows, cols) = self.as_matrix()?;
        let mut data = Vec::with_capacity(indices.len() * cols);
        for &i in indices {
            if i >= rows {
                return Err(Error::Shape(format!("row {i} out of range for {rows} rows")));
            }
            data.extend_from_slice(self.row(i));
        }
        Tensor::new(vec![indices.len(), cols], data)
    }

    /// `(rows, cols)` of a rank-2 tensor.
    pub fn as_matrix(&self) -> Result<(usize, usize)> {
        match self.dims[..] {
            [r, c] => Ok((r, c)),
            _ => Err(Error::Shape(format!("expected rank-2 tensor, got dims {:?}", self.dims))),
        }
    }

    /// `(batch, height, width, channels)` of a rank-4 tensor.
    pub fn as_nhwc(&self) -> Result<(usize, usize, usize, usize)> {
        match self.dims[..] {
            [b, h, w, c] => Ok((b, h, w, c)),
            _ => Err(Error::Shape(format!("expected rank-4 tensor, got dims {:?}", self.dims))),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn ensure_finite(&self, what: &str) -> Result<()> {
        match self.data.iter().position(|v| !v.is_finite()) {
            None => Ok(()),
            Some(i) => Err(Error::Numeric(format!(
                "{what} has non-finite value {} at flat index {i}",
                self.data[i]
            ))),
        }
    }

    /// FNV-1a over dims and the bit patterns of the data.
    pub fn checksum(&self) -> u64 {
        let mut h = 0xcbf2_9ce4_8422_2325u64;
        let mut eat = |bytes: &[u8]| {
            for &b in bytes {
                h ^= u64::from(b);
                h = h.wrapping_mul(0x0100_0000_01b3);
            }
        };
        for &d in &self.dims {
            eat(&(d as u64).to_le_bytes());
        }
        for v in &self.data {
            eat(&v.to_bits().to_le_bytes());
        }
        h
    }
}

fn check_dims(dims: &[usize]) -> Result<()> {
    if dims.is_empty() || dims.len() > 4 {
        return Err(Error::Shape(format!("rank must be 1..=4, got dims {dims:?}")));
    }
    if dims.iter().any(|&d| d == 0) {
        return Err(Error::Shape(format!("dims must be positive, got {dims:?}")));
    }
    Ok(())
}

impl fmt::Debug for Tensor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let preview: Vec<f32> = self.data.iter().take(8).copied().collect();
        f.debug_struct("Tensor")
            .field("dims", &self.dims)
            .field("head", &preview)
            .finish()
    }
}
