//! Mode transforms by substitution of creation operators.
//!
//! Each basis term `prod_m (a_m^dagger)^{n_m} / sqrt(n_m!) |0>` has every
//! creation operator replaced by a linear combination of output creation
//! operators. Each power is expanded with integer multinomial coefficients,
//! the per-mode polynomials are multiplied, and every resulting monomial
//! `prod_k (b_k^dagger)^{k}` is mapped back to `sqrt(prod k!) |k>`.

use std::collections::BTreeMap;

use super::{factorial, FockState, Ket, ModeId, ModeTransform, MAX_PHOTONS};
use crate::{Error, Result, C64};

type Poly = BTreeMap<FockState, C64>;

/// Applies the single-particle linear map `image` to every photon of `ket`.
///
/// `image(m)` lists the output modes (with coefficients) that the creation
/// operator of `m` is replaced by. The map need not be square; an isometry
/// into a larger internal space is how delays are modeled.
pub fn apply_linear_map<F>(ket: &Ket, image: F) -> Result<Ket>
where
    F: Fn(ModeId) -> Vec<(ModeId, C64)>,
{
    if ket.photon_number() > MAX_PHOTONS {
        return Err(Error::invalid(format!(
            "photon number {} exceeds the supported maximum {}",
            ket.photon_number(),
            MAX_PHOTONS
        )));
    }
    let mut images: BTreeMap<ModeId, Vec<(ModeId, C64)>> = BTreeMap::new();
    let mut out: Poly = BTreeMap::new();
    for (state, amp) in ket.terms() {
        let mut poly: Poly = BTreeMap::new();
        poly.insert(FockState::vacuum(), *amp / state.factorial_product().sqrt());
        for &(mode, n) in state.occupations() {
            let lin = images
                .entry(mode)
                .or_insert_with(|| merge_linear(image(mode)));
            let power = multinomial_power(lin, n);
            poly = poly_mul(&poly, &power);
        }
        for (mono, c) in poly {
            let norm = mono.factorial_product().sqrt();
            *out.entry(mono).or_default() += c * norm;
        }
    }
    Ok(Ket::from_map(out, ket.photon_number()))
}

/// Applies an external-channel unitary to `state`.
pub fn apply_mode_transform(state: &Ket, u: &ModeTransform) -> Result<Ket> {
    let m = u.channels();
    if state.channel_extent() > m {
        return Err(Error::invalid(format!(
            "ket uses channel {} but the transform has only {} channels",
            state.channel_extent() - 1,
            m
        )));
    }
    let matrix = u.matrix();
    apply_linear_map(state, |mode| {
        (0..m)
            .map(|row| {
                (
                    ModeId::new(row, mode.internal),
                    matrix[(row, mode.external)],
                )
            })
            .collect()
    })
}

fn merge_linear(lin: Vec<(ModeId, C64)>) -> Vec<(ModeId, C64)> {
    let mut merged: BTreeMap<ModeId, C64> = BTreeMap::new();
    for (mode, c) in lin {
        *merged.entry(mode).or_default() += c;
    }
    merged.into_iter().filter(|(_, c)| *c != C64::default()).collect()
}

/// `(sum_t c_t x_t)^n` as a polynomial in the `x_t`.
fn multinomial_power(lin: &[(ModeId, C64)], n: u32) -> Poly {
    let mut out = Poly::new();
    if n == 0 {
        out.insert(FockState::vacuum(), C64::new(1.0, 0.0));
        return out;
    }
    if lin.is_empty() {
        return out;
    }
    let n_fact = factorial(n);
    let mut parts = vec![0u32; lin.len()];
    compositions(n, 0, &mut parts, &mut |parts| {
        let mut coef = n_fact;
        let mut value = C64::new(1.0, 0.0);
        for (&k, &(_, c)) in parts.iter().zip(lin) {
            coef /= factorial(k);
            value *= c.powu(k);
        }
        let mono = FockState::from_counts(lin.iter().zip(parts).map(|(&(m, _), &k)| (m, k)));
        *out.entry(mono).or_default() += value * coef as f64;
    });
    out
}

/// Visits every way to write `remaining` as an ordered sum over
/// `parts[slot..]`.
fn compositions(remaining: u32, slot: usize, parts: &mut [u32], visit: &mut impl FnMut(&[u32])) {
    if slot + 1 == parts.len() {
        parts[slot] = remaining;
        visit(parts);
        return;
    }
    for k in 0..=remaining {
        parts[slot] = k;
        compositions(remaining - k, slot + 1, parts, visit);
    }
}

fn poly_mul(a: &Poly, b: &Poly) -> Poly {
    let mut out = Poly::new();
    for (ma, ca) in a {
        for (mb, cb) in b {
            *out.entry(ma.product(mb)).or_default() += ca * cb;
        }
    }
    out
}
