//! Hamiltonians, their classical symbols `H(z, zbar) = <z|H|z>/<z|z>` on
//! independent `(z, zbar)`, and the Solari-Kochetov integrand.
//!
//! Operators are written in the dimensionless spin operators `J_z`, `J_+`,
//! `J_-`. A polynomial term `c * W` with a word `W` of length `L` contributes
//! `nu * c * hbar^L * W`, so `hbar nu J_z` and `hbar^2 nu J_z^2` are the
//! one- and two-letter words.

use std::collections::BTreeMap;
use std::fmt;

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::spin::{ln_binomials, CoefficientJet, PhasePoint, SpinContext, C64};

/// Default cap on the representation dimension for dense matrices.
pub const DEFAULT_MAX_DIM: usize = 4001;

/// Longest operator word accepted in a polynomial Hamiltonian.
pub const MAX_WORD_LEN: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum HamiltonianKind {
    LinearJz,
    JzSquared,
    Anisotropic,
    GenericPolynomial,
}

impl HamiltonianKind {
    pub fn name(&self) -> &'static str {
        match self {
            Self::LinearJz => "linear_jz",
            Self::JzSquared => "jz_squared",
            Self::Anisotropic => "anisotropic",
            Self::GenericPolynomial => "polynomial",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SpinOp {
    Z,
    Raise,
    Lower,
}

impl SpinOp {
    fn symbol(&self) -> char {
        match self {
            Self::Z => 'z',
            Self::Raise => '+',
            Self::Lower => '-',
        }
    }

    /// Action on basis index `k`; returns the target index and coefficient.
    fn apply(&self, k: usize, ctx: &SpinContext) -> Option<(usize, f64)> {
        let j = ctx.j();
        let m = ctx.m_of(k);
        match self {
            Self::Z => Some((k, m)),
            Self::Raise => {
                if k + 1 >= ctx.dim() {
                    None
                } else {
                    Some((k + 1, (j * (j + 1.0) - m * (m + 1.0)).sqrt()))
                }
            }
            Self::Lower => {
                if k == 0 {
                    None
                } else {
                    Some((k - 1, (j * (j + 1.0) - m * (m - 1.0)).sqrt()))
                }
            }
        }
    }
}

/// `coefficient * word`, where the word is a product applied right to left.
#[derive(Debug, Clone, PartialEq)]
pub struct PolyTerm {
    pub coefficient: C64,
    pub word: Vec<SpinOp>,
}

impl PolyTerm {
    pub fn new(coefficient: C64, word: Vec<SpinOp>) -> Self {
        Self { coefficient, word }
    }

    /// Parses a word such as `"z+-"` (letters `z`, `+`, `-`).
    pub fn parse_word(word: &str) -> Result<Vec<SpinOp>> {
        word.chars()
            .map(|ch| match ch {
                'z' | 'Z' => Ok(SpinOp::Z),
                '+' => Ok(SpinOp::Raise),
                '-' => Ok(SpinOp::Lower),
                other => Err(Error::InvalidArgument(format!(
                    "unknown operator letter '{other}' in word '{word}'"
                ))),
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HamiltonianSpec {
    pub kind: HamiltonianKind,
    pub nu: f64,
    pub kappa: f64,
    pub terms: Vec<PolyTerm>,
}

impl HamiltonianSpec {
    /// `hbar nu J_z`
    pub fn linear_jz(nu: f64) -> Self {
        Self {
            kind: HamiltonianKind::LinearJz,
            nu,
            kappa: 0.0,
            terms: Vec::new(),
        }
    }

    /// `hbar^2 nu J_z^2`
    pub fn jz_squared(nu: f64) -> Self {
        Self {
            kind: HamiltonianKind::JzSquared,
            nu,
            kappa: 0.0,
            terms: Vec::new(),
        }
    }

    /// `hbar^2 nu (J_z^2 + kappa J_x^2)`
    pub fn anisotropic(nu: f64, kappa: f64) -> Self {
        Self {
            kind: HamiltonianKind::Anisotropic,
            nu,
            kappa,
            terms: Vec::new(),
        }
    }

    pub fn polynomial(nu: f64, terms: Vec<PolyTerm>) -> Self {
        Self {
            kind: HamiltonianKind::GenericPolynomial,
            nu,
            kappa: 0.0,
            terms,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !self.nu.is_finite() || !self.kappa.is_finite() {
            return Err(Error::InvalidArgument(
                "nu and kappa must be finite".to_string(),
            ));
        }
        if self.kind == HamiltonianKind::GenericPolynomial {
            if self.terms.is_empty() {
                return Err(Error::InvalidArgument(
                    "polynomial hamiltonian has no terms".to_string(),
                ));
            }
            for t in &self.terms {
                if t.word.is_empty() || t.word.len() > MAX_WORD_LEN {
                    return Err(Error::InvalidArgument(format!(
                        "operator word length {} outside 1..={MAX_WORD_LEN}",
                        t.word.len()
                    )));
                }
            }
        }
        Ok(())
    }

    /// The operator as a list of polynomial terms.
    pub fn operator_terms(&self) -> Vec<PolyTerm> {
        use SpinOp::*;
        let one = C64::new(1.0, 0.0);
        match self.kind {
            HamiltonianKind::LinearJz => vec![PolyTerm::new(one, vec![Z])],
            HamiltonianKind::JzSquared => vec![PolyTerm::new(one, vec![Z, Z])],
            HamiltonianKind::Anisotropic => {
                let q = C64::new(0.25 * self.kappa, 0.0);
                vec![
                    PolyTerm::new(one, vec![Z, Z]),
                    PolyTerm::new(q, vec![Raise, Raise]),
                    PolyTerm::new(q, vec![Raise, Lower]),
                    PolyTerm::new(q, vec![Lower, Raise]),
                    PolyTerm::new(q, vec![Lower, Lower]),
                ]
            }
            HamiltonianKind::GenericPolynomial => self.terms.clone(),
        }
    }

    /// Short identifier used in series metadata and reports.
    pub fn id(&self) -> String {
        self.to_string()
    }
}

impl fmt::Display for HamiltonianSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.kind {
            HamiltonianKind::Anisotropic => {
                write!(f, "anisotropic(nu={},kappa={})", self.nu, self.kappa)
            }
            HamiltonianKind::GenericPolynomial => {
                write!(f, "polynomial(nu={};", self.nu)?;
                for (i, t) in self.terms.iter().enumerate() {
                    if i > 0 {
                        write!(f, ";")?;
                    }
                    let w: String = t.word.iter().map(SpinOp::symbol).collect();
                    write!(f, "{},{}:{}", t.coefficient.re, t.coefficient.im, w)?;
                }
                write!(f, ")")
            }
            kind => write!(f, "{}(nu={})", kind.name(), self.nu),
        }
    }
}

/// `H` and its first and second partial derivatives in `(z, zbar)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SymbolJet {
    pub h: C64,
    pub h_z: C64,
    pub h_zbar: C64,
    pub h_zz: C64,
    pub h_zzbar: C64,
    pub h_zbarzbar: C64,
}

impl SymbolJet {
    /// Jet of a symbol `F(x)` with `x = z zbar`, given `F`, `F'`, `F''`.
    fn radial(p: PhasePoint, f: C64, f1: C64, f2: C64) -> Self {
        let x = p.z * p.zbar;
        Self {
            h: f,
            h_z: f1 * p.zbar,
            h_zbar: f1 * p.z,
            h_zz: f2 * p.zbar * p.zbar,
            h_zzbar: f1 + f2 * x,
            h_zbarzbar: f2 * p.z * p.z,
        }
    }
}

/// A Hamiltonian bound to a spin representation.
///
/// Holds the sparse `J_z`-basis matrix built once at construction; symbol
/// evaluation for the anisotropic and polynomial kinds contracts it with the
/// coefficient vectors on independent `(z, zbar)`.
#[derive(Debug, Clone)]
pub struct Hamiltonian {
    spec: HamiltonianSpec,
    ctx: SpinContext,
    entries: Vec<(usize, usize, C64)>,
    ln_binom: Vec<f64>,
}

impl Hamiltonian {
    pub fn new(spec: HamiltonianSpec, ctx: SpinContext) -> Result<Self> {
        spec.validate()?;
        let entries = sparse_entries(&spec, &ctx);
        let scale = entries.iter().map(|e| e.2.norm()).fold(0.0, f64::max);
        let lookup: BTreeMap<(usize, usize), C64> =
            entries.iter().map(|&(r, c, v)| ((r, c), v)).collect();
        let mut asym = 0.0f64;
        for (&(r, c), &v) in &lookup {
            let t = lookup.get(&(c, r)).copied().unwrap_or_default();
            asym = asym.max((v - t.conj()).norm());
        }
        if asym > 1e-12 * scale.max(1e-300) {
            return Err(Error::NonHermitian(asym));
        }
        let ln_binom = ln_binomials(&ctx);
        Ok(Self {
            spec,
            ctx,
            entries,
            ln_binom,
        })
    }

    pub fn spec(&self) -> &HamiltonianSpec {
        &self.spec
    }

    pub fn ctx(&self) -> &SpinContext {
        &self.ctx
    }

    pub fn nu(&self) -> f64 {
        self.spec.nu
    }

    /// Nonzero matrix elements `(row, col, value)` in the `|m>` basis.
    pub fn entries(&self) -> &[(usize, usize, C64)] {
        &self.entries
    }

    /// Symbol jet, in closed form where one exists.
    pub fn jet(&self, p: PhasePoint) -> Result<SymbolJet> {
        match self.spec.kind {
            HamiltonianKind::LinearJz | HamiltonianKind::JzSquared => self.radial_jet(p),
            HamiltonianKind::Anisotropic => self.anisotropic_jet(p),
            HamiltonianKind::GenericPolynomial => self.jet_by_contraction(p),
        }
    }

    /// Closed-form jet for the two `J_z`-only Hamiltonians.
    fn radial_jet(&self, p: PhasePoint) -> Result<SymbolJet> {
        let s = p.checked_one_plus_product()?;
        let x = p.z * p.zbar;
        let u = (x - 1.0) / s;
        let u1 = 2.0 / (s * s);
        let u2 = -4.0 / (s * s * s);
        let hbar = self.ctx.hbar();
        let j = self.ctx.j();
        let nu = self.spec.nu;
        let (f, f1, f2) = match self.spec.kind {
            HamiltonianKind::LinearJz => {
                let a = hbar * nu * j;
                (a * u, a * u1, a * u2)
            }
            HamiltonianKind::JzSquared => {
                let a = hbar * hbar * nu;
                let mu = self.ctx.mu();
                (
                    a * (mu * u * u + 0.5 * j),
                    a * 2.0 * mu * u * u1,
                    a * 2.0 * mu * (u1 * u1 + u * u2),
                )
            }
            _ => unreachable!("radial jet requested for a non-radial hamiltonian"),
        };
        Ok(SymbolJet::radial(p, f, f1, f2))
    }

    /// Closed form `hbar^2 nu [mu (n_z^2 + kappa n_x^2) + (j/2)(1 + kappa)]`
    /// with `n_z = (x - 1)/(x + 1)` and `n_x = (z + zbar)/(1 + x)`.
    fn anisotropic_jet(&self, p: PhasePoint) -> Result<SymbolJet> {
        let s = p.checked_one_plus_product()?;
        let (z, zb) = (p.z, p.zbar);
        let x = z * zb;
        let (s2, s3) = (s * s, s * s * s);
        let nz = BlochJet {
            v: 1.0 - 2.0 / s,
            z: 2.0 * zb / s2,
            zb: 2.0 * z / s2,
            zz: -4.0 * zb * zb / s3,
            zzb: 2.0 * (1.0 - x) / s3,
            zbzb: -4.0 * z * z / s3,
        };
        let q = z + zb;
        let nx = BlochJet {
            v: q / s,
            z: 1.0 / s - q * zb / s2,
            zb: 1.0 / s - q * z / s2,
            zz: -2.0 * zb / s2 + 2.0 * q * zb * zb / s3,
            zzb: -2.0 * q / s3,
            zbzb: -2.0 * z / s2 + 2.0 * q * z * z / s3,
        };
        let hbar = self.ctx.hbar();
        let kappa = self.spec.kappa;
        let a = hbar * hbar * self.spec.nu * self.ctx.mu();
        let c0 = hbar * hbar * self.spec.nu * 0.5 * self.ctx.j() * (1.0 + kappa);
        let sq_z = nz.square();
        let sq_x = nx.square();
        let comb = |u: C64, w: C64| a * (u + kappa * w);
        Ok(SymbolJet {
            h: comb(sq_z.v, sq_x.v) + c0,
            h_z: comb(sq_z.z, sq_x.z),
            h_zbar: comb(sq_z.zb, sq_x.zb),
            h_zz: comb(sq_z.zz, sq_x.zz),
            h_zzbar: comb(sq_z.zzb, sq_x.zzb),
            h_zbarzbar: comb(sq_z.zbzb, sq_x.zbzb),
        })
    }

    /// `v(zbar)^T H v(z) / (1 + z zbar)^(2j)` with analytic derivatives of the
    /// coefficient vectors `v`.
    pub fn jet_by_contraction(&self, p: PhasePoint) -> Result<SymbolJet> {
        let s = p.checked_one_plus_product()?;
        let j = self.ctx.j();
        // each side carries (1 + x)^j so the product carries (1 + x)^(2j)
        let half_scale = j * s.ln();
        let ket = CoefficientJet::new(p.z, half_scale, &self.ctx, &self.ln_binom);
        let bra = CoefficientJet::new(p.zbar, half_scale, &self.ctx, &self.ln_binom);

        let zero = C64::new(0.0, 0.0);
        let (mut n, mut n_z, mut n_zb, mut n_zz, mut n_zzb, mut n_zbzb) =
            (zero, zero, zero, zero, zero, zero);
        for &(r, c, v) in &self.entries {
            n += bra.value[r] * v * ket.value[c];
            n_z += bra.value[r] * v * ket.d1[c];
            n_zb += bra.d1[r] * v * ket.value[c];
            n_zz += bra.value[r] * v * ket.d2[c];
            n_zzb += bra.d1[r] * v * ket.d1[c];
            n_zbzb += bra.d2[r] * v * ket.value[c];
        }

        // derivatives of l = ln (1 + x)^(2j)
        let two_j = 2.0 * j;
        let l_z = two_j * p.zbar / s;
        let l_zb = two_j * p.z / s;
        let l_zz = -two_j * p.zbar * p.zbar / (s * s);
        let l_zbzb = -two_j * p.z * p.z / (s * s);
        let l_zzb = two_j / (s * s);

        let h = n;
        Ok(SymbolJet {
            h,
            h_z: n_z - h * l_z,
            h_zbar: n_zb - h * l_zb,
            h_zz: n_zz - 2.0 * n_z * l_z - h * l_zz + h * l_z * l_z,
            h_zzbar: n_zzb - n_z * l_zb - n_zb * l_z - h * l_zzb + h * l_z * l_zb,
            h_zbarzbar: n_zbzb - 2.0 * n_zb * l_zb - h * l_zbzb + h * l_zb * l_zb,
        })
    }

    pub fn energy(&self, p: PhasePoint) -> Result<C64> {
        Ok(self.jet(p)?.h)
    }

    /// Solari-Kochetov integrand
    /// `A = d/dzbar[(1/4g) H_z] + d/dz[(1/4g) H_zbar]`.
    pub fn sk_integrand(&self, p: PhasePoint) -> Result<C64> {
        let jet = self.jet(p)?;
        Ok(sk_from_jet(&jet, p, &self.ctx))
    }

    /// Dense `J_z`-basis matrix, rows and columns ordered by ascending `m`.
    pub fn quantum_matrix(&self, max_dim: usize) -> Result<DMatrix<Complex64>> {
        let dim = self.ctx.dim();
        if dim > max_dim {
            return Err(Error::DimensionLimit {
                dim,
                limit: max_dim,
            });
        }
        let mut m = DMatrix::<Complex64>::zeros(dim, dim);
        for &(r, c, v) in &self.entries {
            m[(r, c)] += v;
        }
        Ok(m)
    }
}

/// Value and derivatives of one analytically continued Bloch component.
struct BlochJet {
    v: C64,
    z: C64,
    zb: C64,
    zz: C64,
    zzb: C64,
    zbzb: C64,
}

impl BlochJet {
    fn square(&self) -> Self {
        Self {
            v: self.v * self.v,
            z: 2.0 * self.v * self.z,
            zb: 2.0 * self.v * self.zb,
            zz: 2.0 * (self.z * self.z + self.v * self.zz),
            zzb: 2.0 * (self.z * self.zb + self.v * self.zzb),
            zbzb: 2.0 * (self.zb * self.zb + self.v * self.zbzb),
        }
    }
}

/// `A` from a precomputed jet, with `1/g = (1 + x)^2 / 2j`.
pub(crate) fn sk_from_jet(jet: &SymbolJet, p: PhasePoint, ctx: &SpinContext) -> C64 {
    let s = p.one_plus_product();
    let two_j = ctx.two_j() as f64;
    let inv_g = s * s / two_j;
    let inv_g_z = 2.0 * s * p.zbar / two_j;
    let inv_g_zb = 2.0 * s * p.z / two_j;
    0.25 * (inv_g_zb * jet.h_z + inv_g_z * jet.h_zbar + 2.0 * inv_g * jet.h_zzbar)
}

/// Builds `quantum_matrix` for a spec directly.
pub fn quantum_matrix(
    spec: &HamiltonianSpec,
    ctx: &SpinContext,
    max_dim: usize,
) -> Result<DMatrix<Complex64>> {
    if ctx.dim() > max_dim {
        return Err(Error::DimensionLimit {
            dim: ctx.dim(),
            limit: max_dim,
        });
    }
    Hamiltonian::new(spec.clone(), *ctx)?.quantum_matrix(max_dim)
}

fn sparse_entries(spec: &HamiltonianSpec, ctx: &SpinContext) -> Vec<(usize, usize, C64)> {
    let hbar = ctx.hbar();
    let mut acc: BTreeMap<(usize, usize), C64> = BTreeMap::new();
    for term in spec.operator_terms() {
        let scale = spec.nu * hbar.powi(term.word.len() as i32);
        for col in 0..ctx.dim() {
            let mut k = col;
            let mut amp = 1.0;
            let mut alive = true;
            for op in term.word.iter().rev() {
                match op.apply(k, ctx) {
                    Some((next, a)) => {
                        k = next;
                        amp *= a;
                    }
                    None => {
                        alive = false;
                        break;
                    }
                }
            }
            if alive && amp != 0.0 {
                *acc.entry((k, col)).or_default() += term.coefficient * (scale * amp);
            }
        }
    }
    acc.into_iter()
        .filter(|(_, v)| v.norm() > 0.0)
        .map(|((r, c), v)| (r, c, v))
        .collect()
}
