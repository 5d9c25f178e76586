use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use rayon::prelude::*;

use super::Kernel;
use crate::error::{Error, Result};

/// Radial grid `m/M`, `0 <= m < RM`, on the truncated interval `[0, R)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    per_unit: usize,
    radius: f64,
    len: usize,
}

impl Grid {
    /// `per_unit` points per unit length up to the cutoff `radius` (`>= 2`);
    /// `radius·per_unit` must be an integer.
    pub fn new(per_unit: usize, radius: f64) -> Result<Self> {
        if per_unit == 0 {
            return Err(Error::invalid("grid needs M >= 1 points per unit length"));
        }
        if !(radius >= 2.0) || !radius.is_finite() {
            return Err(Error::invalid(format!("cutoff radius must be >= 2, got {radius}")));
        }
        let exact = radius * per_unit as f64;
        let len = exact.round();
        if (exact - len).abs() > 1e-9 * exact {
            return Err(Error::invalid(format!("R·M = {exact} is not an integer")));
        }
        Ok(Grid {
            per_unit,
            radius,
            len: len as usize,
        })
    }

    /// Points per unit length `M`.
    pub fn per_unit(&self) -> usize {
        self.per_unit
    }

    /// Cutoff `R`.
    pub fn radius(&self) -> f64 {
        self.radius
    }

    /// Number of grid points `RM`.
    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn point(&self, i: usize) -> f64 {
        i as f64 / self.per_unit as f64
    }

    /// Largest grid radius `(RM − 1)/M`.
    pub fn last_point(&self) -> f64 {
        self.point(self.len - 1)
    }

    /// Whether `(ℓ/M, m/M)` can carry a nonzero kernel value, i.e. lies off
    /// both axes with `M/ℓ + M/m > 1`.
    pub fn in_support(&self, ell: usize, m: usize) -> bool {
        if ell == 0 || m == 0 {
            return false;
        }
        let big_m = self.per_unit as u128;
        (ell as u128) * (m as u128) < big_m * (ell as u128 + m as u128)
    }

    /// Length of the stored prefix of row `m`: every `ℓ` outside it has
    /// `ψ_{ℓm} = 0`.
    pub fn support_len(&self, m: usize) -> usize {
        let big_m = self.per_unit;
        if m <= big_m {
            return self.len;
        }
        // ℓ(m − M) < M·m
        let last = (big_m as u128 * m as u128 - 1) / (m - big_m) as u128;
        (last as usize + 1).min(self.len)
    }
}

/// The kernel sampled on a grid, `ψ_{ℓm} = Ψ(ℓ/M, m/M)`.
///
/// Rows are stored up to the support boundary; every entry beyond it (and
/// every entry on row or column 0) is an exact zero.
#[derive(Debug, Clone, PartialEq)]
pub struct PsiMatrix {
    grid: Grid,
    offsets: Vec<usize>,
    data: Vec<f64>,
}

const DENSE_HEADER_BYTES: usize = 24;

impl PsiMatrix {
    fn zeroed(grid: Grid) -> Self {
        let mut offsets = Vec::with_capacity(grid.len() + 1);
        let mut total = 0;
        offsets.push(0);
        for m in 0..grid.len() {
            total += grid.support_len(m);
            offsets.push(total);
        }
        PsiMatrix {
            grid,
            offsets,
            data: vec![0.0; total],
        }
    }

    /// Number of stored entries (a measure of memory use).
    pub fn stored_entries(&self) -> usize {
        self.data.len()
    }

    /// Builds a symmetric matrix from `entry(ℓ, m)`, which is called only for
    /// in-support pairs with `ℓ <= m`.
    pub fn from_fn<F>(grid: Grid, entry: F) -> Self
    where
        F: Fn(usize, usize) -> f64 + Sync,
    {
        let mut matrix = PsiMatrix::zeroed(grid);
        let mut rows: Vec<(usize, &mut [f64])> = Vec::with_capacity(grid.len());
        let mut rest = matrix.data.as_mut_slice();
        for m in 0..grid.len() {
            let (row, tail) = rest.split_at_mut(matrix.offsets[m + 1] - matrix.offsets[m]);
            rows.push((m, row));
            rest = tail;
        }
        rows.into_par_iter().for_each(|(m, row)| {
            let upto = row.len().min(m + 1);
            for (ell, slot) in row[..upto].iter_mut().enumerate() {
                if grid.in_support(ell, m) {
                    *slot = entry(ell, m);
                }
            }
        });
        for m in 0..grid.len() {
            let start = matrix.offsets[m];
            for ell in (m + 1)..grid.support_len(m) {
                matrix.data[start + ell] = matrix.data[matrix.offsets[ell] + m];
            }
        }
        matrix
    }

    /// Samples `kernel` on the grid.
    pub fn from_kernel<K: Kernel + ?Sized>(kernel: &K, grid: Grid) -> Self {
        let scale = grid.per_unit() as f64;
        PsiMatrix::from_fn(grid, |ell, m| kernel.psi(ell as f64 / scale, m as f64 / scale))
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }

    pub fn len(&self) -> usize {
        self.grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grid.is_empty()
    }

    /// Stored prefix of row `m`; entries past its end are zero.
    #[inline]
    pub fn row(&self, m: usize) -> &[f64] {
        &self.data[self.offsets[m]..self.offsets[m + 1]]
    }

    pub fn get(&self, ell: usize, m: usize) -> f64 {
        self.row(m).get(ell).copied().unwrap_or(0.0)
    }

    pub fn diagonal(&self, m: usize) -> f64 {
        self.get(m, m)
    }

    /// Largest `|ψ_{ℓm}|`.
    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |acc, v| acc.max(v.abs()))
    }

    /// Writes the dense matrix: `M` (u64), `R` (f64), `RM` (u64), then
    /// `RM × RM` row-major f64, all little-endian.
    pub fn write_dense(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut out = BufWriter::new(file);
        let n = self.len();
        let mut write = |bytes: &[u8]| out.write_all(bytes).map_err(|e| Error::io(path, e));
        write_grid_header(&mut write, self.grid)?;
        let zeros = vec![0u8; 8 * n];
        for m in 0..n {
            let row = self.row(m);
            let mut buf = Vec::with_capacity(8 * row.len());
            row.iter().for_each(|v| buf.extend_from_slice(&v.to_le_bytes()));
            write(&buf)?;
            write(&zeros[..8 * (n - row.len())])?;
        }
        out.flush().map_err(|e| Error::io(path, e))
    }

    /// Reads a matrix written by [`PsiMatrix::write_dense`]. Entries outside the
    /// support must be zero and the matrix must be symmetric.
    pub fn read_dense(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        let expected_len = file.metadata().map_err(|e| Error::io(path, e))?.len();
        let mut input = BufReader::new(file);
        let grid = read_grid_header(&mut input, path)?;
        let n = grid.len();
        let want = DENSE_HEADER_BYTES as u64 + 8 * (n as u64) * (n as u64);
        if expected_len != want {
            return Err(format_error(path, format!("file has {expected_len} bytes, header implies {want}")));
        }
        let mut matrix = PsiMatrix::zeroed(grid);
        let mut buf = vec![0u8; 8 * n];
        for m in 0..n {
            input.read_exact(&mut buf).map_err(|e| Error::io(path, e))?;
            let start = matrix.offsets[m];
            let stored = grid.support_len(m);
            for (ell, chunk) in buf.chunks_exact(8).enumerate() {
                let v = f64::from_le_bytes(chunk.try_into().unwrap());
                if ell < stored {
                    matrix.data[start + ell] = v;
                } else if v != 0.0 {
                    return Err(format_error(path, format!("nonzero entry ({ell}, {m}) outside the kernel support")));
                }
            }
        }
        for m in 0..n {
            for ell in 0..matrix.grid.support_len(m).min(m) {
                if matrix.get(ell, m) != matrix.get(m, ell) {
                    return Err(format_error(path, format!("matrix is not symmetric at ({ell}, {m})")));
                }
            }
        }
        Ok(matrix)
    }
}

fn format_error(path: &Path, message: String) -> Error {
    Error::Format {
        path: path.to_path_buf(),
        message,
    }
}

pub(crate) fn write_grid_header<W>(write: &mut W, grid: Grid) -> Result<()>
where
    W: FnMut(&[u8]) -> Result<()>,
{
    write(&(grid.per_unit() as u64).to_le_bytes())?;
    write(&grid.radius().to_le_bytes())?;
    write(&(grid.len() as u64).to_le_bytes())
}

pub(crate) fn read_grid_header<R: Read>(input: &mut R, path: &Path) -> Result<Grid> {
    let mut word = [0u8; 8];
    let mut next = |input: &mut R| -> Result<[u8; 8]> {
        input.read_exact(&mut word).map_err(|e| Error::io(path, e))?;
        Ok(word)
    };
    let per_unit = u64::from_le_bytes(next(input)?) as usize;
    let radius = f64::from_le_bytes(next(input)?);
    let len = u64::from_le_bytes(next(input)?) as usize;
    let grid = Grid::new(per_unit, radius).map_err(|e| format_error(path, e.to_string()))?;
    if grid.len() != len {
        return Err(format_error(path, format!("header RM = {len} disagrees with M·R = {}", grid.len())));
    }
    Ok(grid)
}
