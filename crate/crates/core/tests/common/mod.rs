#![allow(dead_code)]

use fourphoton::fock::{FockState, Ket, ModeId, ModeTransform};
use fourphoton::C64;
use nalgebra::DMatrix;
use rand::{RngExt, SeedableRng};
use rand_distr::StandardNormal;
use rand_pcg::Pcg64;

pub fn rng(seed: u64) -> Pcg64 {
    Pcg64::seed_from_u64(seed)
}

/// Haar-random unitary: QR of a complex Gaussian matrix with the phases of
/// R's diagonal divided out.
pub fn random_unitary(rng: &mut Pcg64, m: usize) -> ModeTransform {
    let z = DMatrix::from_fn(m, m, |_, _| {
        C64::new(rng.sample::<f64, _>(StandardNormal), rng.sample::<f64, _>(StandardNormal))
    });
    let qr = z.qr();
    let (mut q, r) = (qr.q(), qr.r());
    for j in 0..m {
        let d = r[(j, j)];
        let phase = d / d.norm();
        for i in 0..m {
            q[(i, j)] *= phase;
        }
    }
    ModeTransform::new(q, "haar").unwrap()
}

/// All Fock states with `n` photons over the given modes.
pub fn basis(modes: &[ModeId], n: u32) -> Vec<FockState> {
    fn rec(modes: &[ModeId], n: u32, acc: &mut Vec<(ModeId, u32)>, out: &mut Vec<FockState>) {
        if modes.len() == 1 {
            acc.push((modes[0], n));
            out.push(FockState::from_counts(acc.iter().copied()));
            acc.pop();
            return;
        }
        for k in 0..=n {
            acc.push((modes[0], k));
            rec(&modes[1..], n - k, acc, out);
            acc.pop();
        }
    }
    let mut out = Vec::new();
    rec(modes, n, &mut Vec::new(), &mut out);
    out
}

pub fn random_ket(rng: &mut Pcg64, modes: &[ModeId], n: u32) -> Ket {
    let terms = basis(modes, n).into_iter().map(|s| {
        let a = C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
        (s, a)
    });
    Ket::from_terms(terms).unwrap().normalized().unwrap()
}

pub fn two_channel_modes(internal: usize) -> Vec<ModeId> {
    (0..2)
        .flat_map(|e| (0..internal).map(move |i| ModeId::new(e, i)))
        .collect()
}
