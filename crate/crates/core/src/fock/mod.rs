//! Multimode bosonic Fock states and their superpositions.
//!
//! A mode is addressed by an external channel (the optical path or
//! polarization a detector can tell apart) and an internal index (temporal or
//! Schmidt mode a detector cannot resolve). States are stored sparsely and in
//! canonical order so that equality, hashing and serialization are
//! deterministic.

mod expand;
mod permanent;

use std::collections::BTreeMap;
use std::fmt;

use nalgebra::DMatrix;

use crate::{Error, Result, C64};

pub use expand::{apply_linear_map, apply_mode_transform};
pub use permanent::{permanent, transition_amplitude};

/// Amplitudes smaller than this in magnitude are dropped from a [`Ket`].
pub const PRUNE_THRESHOLD: f64 = 1e-14;

/// Tolerance on `U U^dagger = 1` accepted by [`ModeTransform::new`].
pub const UNITARITY_TOL: f64 = 1e-12;

/// Largest photon number the expansion engine and permanent oracle accept.
pub const MAX_PHOTONS: u32 = 10;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ModeId {
    pub external: usize,
    pub internal: usize,
}

impl ModeId {
    pub const fn new(external: usize, internal: usize) -> Self {
        ModeId { external, internal }
    }

    /// External channel `external` in internal mode 0.
    pub const fn channel(external: usize) -> Self {
        ModeId::new(external, 0)
    }
}

impl fmt::Display for ModeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.external, self.internal)
    }
}

/// An occupation-number basis state.
///
/// Entries are sorted by `(external, internal)` and never hold a zero count.
/// The same type doubles as a monomial of creation operators inside the
/// expansion engine.
#[derive(Clone, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct FockState {
    occupations: Vec<(ModeId, u32)>,
    total_n: u32,
}

impl FockState {
    pub fn vacuum() -> Self {
        FockState::default()
    }

    /// Builds a canonical state, summing repeated modes and dropping zeros.
    pub fn from_counts<I>(counts: I) -> Self
    where
        I: IntoIterator<Item = (ModeId, u32)>,
    {
        let mut merged: BTreeMap<ModeId, u32> = BTreeMap::new();
        for (mode, n) in counts {
            *merged.entry(mode).or_insert(0) += n;
        }
        let occupations: Vec<_> = merged.into_iter().filter(|&(_, n)| n > 0).collect();
        let total_n = occupations.iter().map(|&(_, n)| n).sum();
        FockState {
            occupations,
            total_n,
        }
    }

    /// Counts per external channel, all in internal mode 0.
    pub fn from_channel_counts(counts: &[u32]) -> Self {
        FockState::from_counts(
            counts
                .iter()
                .enumerate()
                .map(|(ext, &n)| (ModeId::channel(ext), n)),
        )
    }

    pub fn occupations(&self) -> &[(ModeId, u32)] {
        &self.occupations
    }

    pub fn total_n(&self) -> u32 {
        self.total_n
    }

    pub fn is_vacuum(&self) -> bool {
        self.total_n == 0
    }

    pub fn count(&self, mode: ModeId) -> u32 {
        self.occupations
            .binary_search_by(|(m, _)| m.cmp(&mode))
            .map(|i| self.occupations[i].1)
            .unwrap_or(0)
    }

    /// Photon count per external channel, summed over internal modes.
    pub fn channel_counts(&self, channels: usize) -> Vec<u32> {
        let mut out = vec![0; channels];
        for &(mode, n) in &self.occupations {
            if mode.external < channels {
                out[mode.external] += n;
            }
        }
        out
    }

    /// One past the largest external index in use (0 for vacuum).
    pub fn channel_extent(&self) -> usize {
        self.occupations
            .iter()
            .map(|(m, _)| m.external + 1)
            .max()
            .unwrap_or(0)
    }

    /// One past the largest internal index in use (0 for vacuum).
    pub fn internal_extent(&self) -> usize {
        self.occupations
            .iter()
            .map(|(m, _)| m.internal + 1)
            .max()
            .unwrap_or(0)
    }

    /// `prod_i n_i!` as a float; exact for the photon numbers handled here.
    pub fn factorial_product(&self) -> f64 {
        self.occupations
            .iter()
            .map(|&(_, n)| factorial(n) as f64)
            .product()
    }

    /// Monomial product: occupation counts add mode by mode.
    pub fn product(&self, other: &FockState) -> FockState {
        FockState::from_counts(
            self.occupations
                .iter()
                .chain(other.occupations.iter())
                .copied(),
        )
    }

    /// Removes one photon from `mode`, or `None` if it is empty.
    pub fn lowered(&self, mode: ModeId) -> Option<FockState> {
        let i = self
            .occupations
            .binary_search_by(|(m, _)| m.cmp(&mode))
            .ok()?;
        let mut occupations = self.occupations.clone();
        occupations[i].1 -= 1;
        if occupations[i].1 == 0 {
            occupations.remove(i);
        }
        Some(FockState {
            occupations,
            total_n: self.total_n - 1,
        })
    }
}

impl fmt::Display for FockState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "|")?;
        for (i, (mode, n)) in self.occupations.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{}@{}", n, mode)?;
        }
        write!(f, ">")
    }
}

/// Builds a Fock state from signed counts, rejecting negatives. Repeated
/// modes are merged by summation.
pub fn make_fock(occupations: &[(ModeId, i64)]) -> Result<FockState> {
    let mut counts = Vec::with_capacity(occupations.len());
    for &(mode, n) in occupations {
        if n < 0 {
            return Err(Error::invalid(format!(
                "negative photon count {} for mode {}",
                n, mode
            )));
        }
        let n = u32::try_from(n)
            .map_err(|_| Error::invalid(format!("photon count {} out of range", n)))?;
        counts.push((mode, n));
    }
    Ok(FockState::from_counts(counts))
}

pub(crate) fn factorial(n: u32) -> u64 {
    (1..=n as u64).product()
}

/// A superposition of Fock states with a fixed total photon number.
#[derive(Clone, Debug, PartialEq)]
pub struct Ket {
    terms: BTreeMap<FockState, C64>,
    photon_number: u32,
}

impl Ket {
    pub fn basis(state: FockState) -> Self {
        let photon_number = state.total_n();
        let mut terms = BTreeMap::new();
        terms.insert(state, C64::new(1.0, 0.0));
        Ket {
            terms,
            photon_number,
        }
    }

    pub fn vacuum() -> Self {
        Ket::basis(FockState::vacuum())
    }

    /// The zero vector in the `photon_number` sector.
    pub fn zero(photon_number: u32) -> Self {
        Ket {
            terms: BTreeMap::new(),
            photon_number,
        }
    }

    /// Sums the given terms, pruning negligible amplitudes. All states must
    /// carry the same photon number.
    pub fn from_terms<I>(terms: I) -> Result<Self>
    where
        I: IntoIterator<Item = (FockState, C64)>,
    {
        let mut map: BTreeMap<FockState, C64> = BTreeMap::new();
        let mut photon_number = None;
        for (state, amp) in terms {
            match photon_number {
                None => photon_number = Some(state.total_n()),
                Some(n) if n != state.total_n() => {
                    return Err(Error::invalid(format!(
                        "mixed photon numbers {} and {} in one ket",
                        n,
                        state.total_n()
                    )))
                }
                _ => {}
            }
            *map.entry(state).or_insert(C64::new(0.0, 0.0)) += amp;
        }
        Ok(Ket::from_map(map, photon_number.unwrap_or(0)))
    }

    pub(crate) fn from_map(mut terms: BTreeMap<FockState, C64>, photon_number: u32) -> Self {
        terms.retain(|_, a| a.norm() >= PRUNE_THRESHOLD);
        Ket {
            terms,
            photon_number,
        }
    }

    pub fn photon_number(&self) -> u32 {
        self.photon_number
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> impl Iterator<Item = (&FockState, &C64)> {
        self.terms.iter()
    }

    pub fn amplitude(&self, state: &FockState) -> C64 {
        self.terms.get(state).copied().unwrap_or_default()
    }

    pub fn norm_sqr(&self) -> f64 {
        self.terms.values().map(|a| a.norm_sqr()).sum()
    }

    pub fn normalized(&self) -> Result<Ket> {
        let n2 = self.norm_sqr();
        if !(n2.is_finite() && n2 > 0.0) {
            return Err(Error::InvalidState(format!(
                "cannot normalize a ket with squared norm {}",
                n2
            )));
        }
        Ok(self.scaled(C64::new(1.0 / n2.sqrt(), 0.0)))
    }

    pub fn scaled(&self, factor: C64) -> Ket {
        let terms = self
            .terms
            .iter()
            .map(|(s, a)| (s.clone(), a * factor))
            .collect();
        Ket::from_map(terms, self.photon_number)
    }

    /// `<self|other>`, conjugate-linear in `self`.
    pub fn inner(&self, other: &Ket) -> C64 {
        inner(self, other)
    }

    /// One past the largest external channel used by any term.
    pub fn channel_extent(&self) -> usize {
        self.terms
            .keys()
            .map(FockState::channel_extent)
            .max()
            .unwrap_or(0)
    }

    /// One past the largest internal index used by any term.
    pub fn internal_extent(&self) -> usize {
        self.terms
            .keys()
            .map(FockState::internal_extent)
            .max()
            .unwrap_or(0)
    }

    /// Applies the annihilation operator of `mode` (unnormalized).
    pub fn annihilate(&self, mode: ModeId) -> Ket {
        let mut out: BTreeMap<FockState, C64> = BTreeMap::new();
        for (state, amp) in &self.terms {
            let n = state.count(mode);
            if let Some(lower) = state.lowered(mode) {
                *out.entry(lower).or_default() += amp * (n as f64).sqrt();
            }
        }
        Ket::from_map(out, self.photon_number.saturating_sub(1))
    }

    /// Largest amplitude difference against `other`, over the union of terms.
    pub fn max_abs_diff(&self, other: &Ket) -> f64 {
        self.terms
            .keys()
            .chain(other.terms.keys())
            .map(|s| (self.amplitude(s) - other.amplitude(s)).norm())
            .fold(0.0, f64::max)
    }
}

impl fmt::Display for Ket {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        for (i, (state, amp)) in self.terms.iter().enumerate() {
            if i > 0 {
                write!(f, " + ")?;
            }
            write!(f, "({:.6}{:+.6}i){}", amp.re, amp.im, state)?;
        }
        Ok(())
    }
}

/// `<x|y>`: conjugate-linear in `x`, linear in `y`.
pub fn inner(x: &Ket, y: &Ket) -> C64 {
    if x.photon_number != y.photon_number {
        return C64::default();
    }
    let (small, large, swap) = if x.terms.len() <= y.terms.len() {
        (x, y, false)
    } else {
        (y, x, true)
    };
    let mut acc = C64::default();
    for (state, a) in &small.terms {
        if let Some(b) = large.terms.get(state) {
            acc += if swap { b.conj() * a } else { a.conj() * b };
        }
    }
    acc
}

/// A unitary acting on external channels, identity on internal modes.
///
/// Convention: the annihilation operators transform as `out = U in`, so the
/// creation operator of input channel `j` is replaced by
/// `sum_i U[i][j] out_i^dagger`.
#[derive(Clone, Debug, PartialEq)]
pub struct ModeTransform {
    matrix: DMatrix<C64>,
    label: String,
}

impl ModeTransform {
    pub fn new(matrix: DMatrix<C64>, label: impl Into<String>) -> Result<Self> {
        if matrix.nrows() != matrix.ncols() {
            return Err(Error::invalid(format!(
                "mode transform must be square, got {}x{}",
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        if matrix.nrows() == 0 {
            return Err(Error::invalid("mode transform needs at least one channel"));
        }
        let dev = unitarity_defect(&matrix);
        if !(dev <= UNITARITY_TOL) {
            return Err(Error::invalid(format!(
                "matrix is not unitary (max |UU^dagger - 1| = {:e})",
                dev
            )));
        }
        Ok(ModeTransform {
            matrix,
            label: label.into(),
        })
    }

    pub fn identity(channels: usize) -> Self {
        ModeTransform {
            matrix: DMatrix::identity(channels, channels),
            label: "identity".into(),
        }
    }

    pub fn channels(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.matrix
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    /// The transform that applies `self` first and `next` afterwards.
    pub fn then(&self, next: &ModeTransform) -> Result<ModeTransform> {
        if self.channels() != next.channels() {
            return Err(Error::invalid(format!(
                "cannot compose {}-channel and {}-channel transforms",
                self.channels(),
                next.channels()
            )));
        }
        Ok(ModeTransform {
            matrix: &next.matrix * &self.matrix,
            label: format!("{} . {}", next.label, self.label),
        })
    }
}

fn unitarity_defect(m: &DMatrix<C64>) -> f64 {
    let prod = m * m.adjoint();
    let n = m.nrows();
    let mut worst: f64 = 0.0;
    for i in 0..n {
        for j in 0..n {
            let target = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((prod[(i, j)] - C64::new(target, 0.0)).norm());
        }
    }
    worst
}
