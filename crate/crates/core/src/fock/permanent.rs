use nalgebra::DMatrix;

use super::{FockState, ModeTransform, MAX_PHOTONS};
use crate::{Error, Result, C64};

const MAX_PERMANENT_DIM: usize = 20;

/// Matrix permanent by Ryser's formula, visiting column subsets in Gray-code
/// order so each step updates the row sums by one column. O(2^n n).
pub fn permanent(m: &DMatrix<C64>) -> Result<C64> {
    let n = m.nrows();
    if n != m.ncols() {
        return Err(Error::invalid(format!(
            "permanent needs a square matrix, got {}x{}",
            n,
            m.ncols()
        )));
    }
    if n > MAX_PERMANENT_DIM {
        return Err(Error::invalid(format!(
            "permanent limited to {}x{}, got {}x{}",
            MAX_PERMANENT_DIM, MAX_PERMANENT_DIM, n, n
        )));
    }
    if n == 0 {
        return Ok(C64::new(1.0, 0.0));
    }
    let mut row_sums = vec![C64::default(); n];
    let mut total = C64::default();
    let mut gray: u32 = 0;
    for k in 1u32..(1u32 << n) {
        let j = k.trailing_zeros() as usize;
        gray ^= 1 << j;
        let added = gray & (1 << j) != 0;
        for (i, s) in row_sums.iter_mut().enumerate() {
            if added {
                *s += m[(i, j)];
            } else {
                *s -= m[(i, j)];
            }
        }
        let prod: C64 = row_sums.iter().product();
        if gray.count_ones().is_multiple_of(2) {
            total += prod;
        } else {
            total -= prod;
        }
    }
    Ok(if n.is_multiple_of(2) { total } else { -total })
}

/// `<output| U |input>` for single-internal-mode Fock states, via the
/// permanent of `U` with rows repeated by output occupancy and columns by
/// input occupancy, divided by `sqrt(prod n! prod m!)`.
pub fn transition_amplitude(
    input: &FockState,
    output: &FockState,
    u: &ModeTransform,
) -> Result<C64> {
    if input.total_n() != output.total_n() {
        return Err(Error::invalid(format!(
            "photon number mismatch: input {} vs output {}",
            input.total_n(),
            output.total_n()
        )));
    }
    if input.total_n() > MAX_PHOTONS {
        return Err(Error::invalid(format!(
            "photon number {} exceeds {}",
            input.total_n(),
            MAX_PHOTONS
        )));
    }
    for s in [input, output] {
        if s.internal_extent() > 1 {
            return Err(Error::invalid(
                "transition_amplitude takes external-only states (internal mode 0)",
            ));
        }
        if s.channel_extent() > u.channels() {
            return Err(Error::invalid(format!(
                "state uses channel {} beyond the {}-channel transform",
                s.channel_extent() - 1,
                u.channels()
            )));
        }
    }
    let expand = |s: &FockState| -> Vec<usize> {
        s.occupations()
            .iter()
            .flat_map(|&(mode, n)| std::iter::repeat_n(mode.external, n as usize))
            .collect()
    };
    let rows = expand(output);
    let cols = expand(input);
    let n = rows.len();
    let sub = DMatrix::from_fn(n, n, |i, j| u.matrix()[(rows[i], cols[j])]);
    let per = permanent(&sub)?;
    Ok(per / (input.factorial_product() * output.factorial_product()).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    /// Sum over all permutations, straight from the definition.
    fn permanent_by_definition(m: &DMatrix<C64>) -> C64 {
        fn rec(m: &DMatrix<C64>, row: usize, used: &mut Vec<bool>) -> C64 {
            if row == m.nrows() {
                return c(1.0, 0.0);
            }
            let mut acc = C64::default();
            for j in 0..m.ncols() {
                if !used[j] {
                    used[j] = true;
                    acc += m[(row, j)] * rec(m, row + 1, used);
                    used[j] = false;
                }
            }
            acc
        }
        rec(m, 0, &mut vec![false; m.ncols()])
    }

    #[test]
    fn two_by_two() {
        let (a, b, cc, d) = (c(1.0, 2.0), c(-0.5, 0.3), c(0.7, -1.1), c(2.0, 0.0));
        let m = DMatrix::from_row_slice(2, 2, &[a, b, cc, d]);
        assert!((permanent(&m).unwrap() - (a * d + b * cc)).norm() < 1e-14);
    }

    #[test]
    fn identity_and_ones() {
        for n in 1..=6 {
            let id = DMatrix::<C64>::identity(n, n);
            assert!((permanent(&id).unwrap() - c(1.0, 0.0)).norm() < 1e-14);
        }
        let ones = DMatrix::from_element(4, 4, c(1.0, 0.0));
        assert!((permanent(&ones).unwrap() - c(24.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn matches_definition_on_fixed_matrices() {
        for n in 1..=6usize {
            let m = DMatrix::from_fn(n, n, |i, j| {
                let x = (i * 7 + j * 3 + 1) as f64;
                c((x * 0.37).sin(), (x * 0.91).cos())
            });
            let want = permanent_by_definition(&m);
            assert!((permanent(&m).unwrap() - want).norm() < 1e-10 * want.norm().max(1.0));
        }
    }

    #[test]
    fn non_square_rejected() {
        let m = DMatrix::from_element(2, 3, c(1.0, 0.0));
        assert!(matches!(permanent(&m), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn photon_number_mismatch_rejected() {
        let u = ModeTransform::identity(2);
        let a = FockState::from_channel_counts(&[1, 1]);
        let b = FockState::from_channel_counts(&[2, 1]);
        assert!(transition_amplitude(&a, &b, &u).is_err());
    }
}
