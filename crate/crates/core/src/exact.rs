//! Exact propagator by diagonalization, the diagonal sum for `J_z^2`, and the
//! classical timescales of the `J_z^2` return probability.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::hamiltonian::{Hamiltonian, HamiltonianSpec, DEFAULT_MAX_DIM};
use crate::spin::{log_normalization, normalized_coefficients, SpinContext, C64};

/// Largest dimension for which the eigendecomposition residual is enforced.
pub const RESIDUAL_CHECK_MAX_DIM: usize = 201;

#[derive(Debug, Clone, PartialEq)]
pub struct SeriesMeta {
    pub z_i: C64,
    pub z_f: C64,
    pub two_j: u32,
    pub spec_id: String,
    pub normalized: bool,
}

/// Propagator samples on a grid of scaled times. `None` marks a sample with
/// no value (a semiclassical sum where every branch was excluded).
#[derive(Debug, Clone, PartialEq)]
pub struct PropagatorSeries {
    pub taus: Vec<f64>,
    pub values: Vec<Option<C64>>,
    pub meta: SeriesMeta,
}

impl PropagatorSeries {
    /// Multiplies every value by `(1 + |z_i|^2)^j (1 + |z_f|^2)^j`.
    pub fn denormalized(mut self) -> Self {
        if self.meta.normalized {
            let ctx = SpinContext::from_two_j(self.meta.two_j).expect("valid stored spin");
            let scale = log_normalization(self.meta.z_i, self.meta.z_f, &ctx).exp();
            for v in self.values.iter_mut().flatten() {
                *v *= scale;
            }
            self.meta.normalized = false;
        }
        self
    }

    pub fn len(&self) -> usize {
        self.taus.len()
    }

    pub fn is_empty(&self) -> bool {
        self.taus.is_empty()
    }
}

/// Cached Hermitian eigendecomposition `H = V diag(E) V^dagger`.
#[derive(Debug, Clone)]
pub struct ExactPropagator {
    spec: HamiltonianSpec,
    ctx: SpinContext,
    energies: Vec<f64>,
    vectors: DMatrix<C64>,
}

impl ExactPropagator {
    pub fn new(spec: &HamiltonianSpec, ctx: &SpinContext) -> Result<Self> {
        Self::with_max_dim(spec, ctx, DEFAULT_MAX_DIM)
    }

    pub fn with_max_dim(spec: &HamiltonianSpec, ctx: &SpinContext, max_dim: usize) -> Result<Self> {
        let ham = Hamiltonian::new(spec.clone(), *ctx)?;
        let matrix = ham.quantum_matrix(max_dim)?;
        let norm = matrix.iter().map(|v| v.norm()).fold(0.0, f64::max);
        let eig = SymmetricEigen::try_new(matrix.clone(), 1e-15, 100_000).ok_or_else(|| {
            Error::Eigensolver(format!(
                "no convergence for dim {} (max |H_ij| = {norm:e})",
                ctx.dim()
            ))
        })?;
        let vectors = eig.eigenvectors;
        let energies: Vec<f64> = eig.eigenvalues.iter().copied().collect();
        if ctx.dim() <= RESIDUAL_CHECK_MAX_DIM {
            let lambda = DMatrix::from_diagonal(&DVector::from_iterator(
                energies.len(),
                energies.iter().map(|&e| C64::new(e, 0.0)),
            ));
            let residual = (&matrix * &vectors - &vectors * lambda)
                .iter()
                .map(|v| v.norm())
                .fold(0.0, f64::max);
            if residual > 1e-10 * norm.max(f64::MIN_POSITIVE) {
                return Err(Error::Eigensolver(format!(
                    "residual {residual:e} exceeds 1e-10 * max |H_ij| = {norm:e}"
                )));
            }
        }
        Ok(Self {
            spec: spec.clone(),
            ctx: *ctx,
            energies,
            vectors,
        })
    }

    pub fn energies(&self) -> &[f64] {
        &self.energies
    }

    /// Normalized propagator `<z_f| exp(-i H T / hbar) |z_i>` for each `tau`.
    pub fn series(&self, z_i: C64, z_f: C64, taus: &[f64]) -> Result<PropagatorSeries> {
        check_taus(taus)?;
        let psi_i = DVector::from_vec(normalized_coefficients(z_i, &self.ctx));
        let psi_f = DVector::from_vec(normalized_coefficients(z_f, &self.ctx));
        // <a|z_i> and <z_f|a>
        let right = self.vectors.adjoint() * psi_i;
        let left = self.vectors.transpose() * psi_f.map(|c| c.conj());
        let weights: Vec<C64> = left.iter().zip(right.iter()).map(|(l, r)| l * r).collect();
        // E T / hbar = E tau / (hbar^2 nu)
        let hbar = self.ctx.hbar();
        let rate = 1.0 / (hbar * hbar * self.spec.nu);
        let values = taus
            .par_iter()
            .map(|&tau| {
                let sum = weights
                    .iter()
                    .zip(&self.energies)
                    .map(|(w, &e)| w * C64::from_polar(1.0, -e * tau * rate))
                    .sum::<C64>();
                Some(sum)
            })
            .collect();
        Ok(PropagatorSeries {
            taus: taus.to_vec(),
            values,
            meta: SeriesMeta {
                z_i,
                z_f,
                two_j: self.ctx.two_j(),
                spec_id: self.spec.id(),
                normalized: true,
            },
        })
    }
}

fn check_taus(taus: &[f64]) -> Result<()> {
    if let Some(t) = taus.iter().find(|t| !t.is_finite()) {
        return Err(Error::InvalidArgument(format!("non-finite tau {t}")));
    }
    Ok(())
}

/// Exact normalized propagator series through a fresh eigendecomposition.
pub fn exact_series(
    spec: &HamiltonianSpec,
    z_i: C64,
    z_f: C64,
    taus: &[f64],
    ctx: &SpinContext,
) -> Result<PropagatorSeries> {
    check_taus(taus)?;
    ExactPropagator::new(spec, ctx)?.series(z_i, z_f, taus)
}

/// `sum_m |<m|z_i>|^2 exp(-i m^2 tau)`, the normalized `J_z^2` return amplitude.
pub fn jz2_diagonal_series(z_i: C64, taus: &[f64], ctx: &SpinContext) -> Result<PropagatorSeries> {
    check_taus(taus)?;
    let weights: Vec<(f64, f64)> = normalized_coefficients(z_i, ctx)
        .iter()
        .enumerate()
        .map(|(k, c)| (ctx.m_of(k), c.norm_sqr()))
        .collect();
    let values = taus
        .par_iter()
        .map(|&tau| {
            Some(
                weights
                    .iter()
                    .map(|&(m, w)| C64::from_polar(w, -m * m * tau))
                    .sum::<C64>(),
            )
        })
        .collect();
    Ok(PropagatorSeries {
        taus: taus.to_vec(),
        values,
        meta: SeriesMeta {
            z_i,
            z_f: z_i,
            two_j: ctx.two_j(),
            spec_id: HamiltonianSpec::jz_squared(1.0).id(),
            normalized: true,
        },
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PeakIndex {
    pub m0: f64,
    pub tau_c: f64,
    pub tau_r: f64,
}

/// Dominant `m` of the `J_z^2` return sum and the associated timescales.
pub fn classical_peak_index(z_i: C64, ctx: &SpinContext) -> Result<PeakIndex> {
    let r2 = z_i.norm_sqr();
    if !r2.is_finite() {
        return Err(Error::Domain("z_i is the point at infinity".to_string()));
    }
    let m0 = ctx.j() * (r2 - 1.0) / (r2 + 1.0);
    let tau_c = if m0 == 0.0 {
        f64::INFINITY
    } else {
        PI / m0.abs()
    };
    Ok(PeakIndex {
        m0,
        tau_c,
        tau_r: 2.0 * PI,
    })
}

/// Evenly spaced grid of `samples` points on `[min, max]`.
pub fn tau_grid(min: f64, max: f64, samples: usize) -> Vec<f64> {
    match samples {
        0 => Vec::new(),
        1 => vec![min],
        n => (0..n)
            .map(|i| min + (max - min) * i as f64 / (n - 1) as f64)
            .collect(),
    }
}
