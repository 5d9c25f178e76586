use rayon::prelude::*;

use super::{psi_sphere_sphere, Grid, Kernel, PsiMatrix, ShellKernel};
use crate::error::{Error, Result};

/// Precomputed `T_{jkℓm} = (jk/(ℓm))³·Ψ_σσ(Kℓ/(Mj), Km/(Mk))` for shells on
/// the lattice `j/K`.
///
/// Only the in-support lower triangle `1 <= ℓ <= m` is stored; the other half
/// follows from `T_{jkℓm} = T_{kjmℓ}`. Each stored grid pair holds a
/// contiguous `K×K` block.
#[derive(Debug, Clone)]
pub struct SphereTensor {
    shells: usize,
    grid: Grid,
    /// Start of row `m` in units of blocks; row `m` covers `ℓ = 1..=last(m)`.
    row_offsets: Vec<usize>,
    data: Vec<f64>,
}

impl SphereTensor {
    fn row_last(grid: Grid, m: usize) -> usize {
        // entries 1..=min(m, support_len − 1)
        if m == 0 {
            0
        } else {
            m.min(grid.support_len(m) - 1)
        }
    }

    /// Bytes the tensor would occupy for `(K, grid)`.
    pub fn required_bytes(shells: usize, grid: Grid) -> u64 {
        let blocks: u64 = (0..grid.len()).map(|m| SphereTensor::row_last(grid, m) as u64).sum();
        blocks * (shells * shells) as u64 * 8
    }

    pub fn build(shells: usize, grid: Grid, budget_bytes: u64) -> Result<Self> {
        if shells == 0 {
            return Err(Error::invalid("tensor needs K >= 1"));
        }
        let required_bytes = SphereTensor::required_bytes(shells, grid);
        if required_bytes > budget_bytes {
            return Err(Error::Resource {
                what: "sphere tensor",
                required_bytes,
                budget_bytes,
            });
        }
        let block = shells * shells;
        let mut row_offsets = Vec::with_capacity(grid.len() + 1);
        row_offsets.push(0);
        for m in 0..grid.len() {
            let next = row_offsets[m] + SphereTensor::row_last(grid, m);
            row_offsets.push(next);
        }
        let mut data = vec![0.0; row_offsets[grid.len()] * block];
        let k = shells as f64;
        let per_unit = grid.per_unit() as f64;
        data.par_chunks_mut(block)
            .enumerate()
            .for_each(|(index, out)| {
                let m = row_offsets.partition_point(|&o| o <= index) - 1;
                let ell = index - row_offsets[m] + 1;
                let (lf, mf) = (ell as f64, m as f64);
                for j in 1..=shells {
                    for l in 1..=shells {
                        let (jf, kf) = (j as f64, l as f64);
                        let scale = (jf * kf / (lf * mf)).powi(3);
                        out[(j - 1) * shells + (l - 1)] =
                            scale * psi_sphere_sphere(k * lf / (per_unit * jf), k * mf / (per_unit * kf));
                    }
                }
            });
        Ok(SphereTensor {
            shells,
            grid,
            row_offsets,
            data,
        })
    }

    pub fn shells(&self) -> usize {
        self.shells
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }

    pub fn bytes(&self) -> u64 {
        8 * self.data.len() as u64
    }

    fn block(&self, ell: usize, m: usize) -> &[f64] {
        let b = self.shells * self.shells;
        let index = self.row_offsets[m] + ell - 1;
        &self.data[index * b..(index + 1) * b]
    }

    /// `T_{jkℓm}` with 1-based shell indices; zero outside the kernel support.
    pub fn get(&self, j: usize, k: usize, ell: usize, m: usize) -> f64 {
        assert!((1..=self.shells).contains(&j) && (1..=self.shells).contains(&k));
        if !self.grid.in_support(ell, m) {
            return 0.0;
        }
        let (ell, m, j, k) = if ell <= m { (ell, m, j, k) } else { (m, ell, k, j) };
        self.block(ell, m)[(j - 1) * self.shells + (k - 1)]
    }

    /// Assembles `ψ` for `kernel` by contracting the tensor with the shell
    /// coupling and adding the origin-atom terms directly.
    pub fn contract(&self, kernel: &ShellKernel) -> Result<PsiMatrix> {
        let lattice = kernel
            .lattice()
            .ok_or_else(|| Error::invalid("tensor path needs mu and nu on the same shell lattice"))?;
        if lattice.shells != self.shells {
            return Err(Error::invalid(format!(
                "tensor was built for K = {} but the measures use K = {}",
                self.shells, lattice.shells
            )));
        }
        let per_unit = self.grid.per_unit() as f64;
        let norm = (self.shells as f64).powi(-6);
        Ok(PsiMatrix::from_fn(self.grid, |ell, m| {
            let dot: f64 = self
                .block(ell, m)
                .iter()
                .zip(&lattice.coupling)
                .map(|(t, c)| t * c)
                .sum();
            let (lf, mf) = (ell as f64, m as f64);
            (lf * mf).powi(3) * norm * dot + kernel.atom_part(lf / per_unit, mf / per_unit)
        }))
    }
}

/// Samples the kernel of two sphere combinations, through the tensor when one
/// is supplied.
pub fn build_psi_matrix(kernel: &ShellKernel, grid: Grid, tensor: Option<&SphereTensor>) -> Result<PsiMatrix> {
    match tensor {
        Some(t) if t.grid() != grid => Err(Error::invalid(format!(
            "tensor grid (M={}, R={}) does not match requested grid (M={}, R={})",
            t.grid().per_unit(),
            t.grid().radius(),
            grid.per_unit(),
            grid.radius()
        ))),
        Some(t) => t.contract(kernel),
        None => Ok(PsiMatrix::from_kernel(kernel as &dyn Kernel, grid)),
    }
}
