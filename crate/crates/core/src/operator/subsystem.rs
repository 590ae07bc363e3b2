//! Index bookkeeping for operators on tensor-product spaces.
//!
//! Subsystems are ordered left to right with the leftmost factor most
//! significant, matching the Kronecker product convention.

use super::{CMatrix, Error, Result};

pub fn kron(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a.kronecker(b)
}

fn check_dims(dims: &[usize], total: usize) -> Result<()> {
    let prod: usize = dims.iter().product();
    if prod != total || dims.iter().any(|&d| d == 0) {
        return Err(Error::InconsistentSubsystems { dims: dims.to_vec(), dim: total });
    }
    Ok(())
}

fn check_indices(idx: &[usize], n: usize, dims: &[usize], total: usize) -> Result<()> {
    let mut seen = vec![false; n];
    for &i in idx {
        if i >= n || seen[i] {
            return Err(Error::InconsistentSubsystems { dims: dims.to_vec(), dim: total });
        }
        seen[i] = true;
    }
    Ok(())
}

fn digits(mut index: usize, dims: &[usize], out: &mut [usize]) {
    for k in (0..dims.len()).rev() {
        out[k] = index % dims[k];
        index /= dims[k];
    }
}

/// Partial trace keeping the subsystems in `keep` (in ascending order).
pub fn partial_trace_matrix(m: &CMatrix, dims: &[usize], keep: &[usize]) -> Result<CMatrix> {
    let total = m.nrows();
    check_dims(dims, total)?;
    check_indices(keep, dims.len(), dims, total)?;
    let mut kept: Vec<usize> = keep.to_vec();
    kept.sort_unstable();
    let traced: Vec<usize> = (0..dims.len()).filter(|i| !kept.contains(i)).collect();
    let kept_dim: usize = kept.iter().map(|&i| dims[i]).product();
    let traced_dim: usize = traced.iter().map(|&i| dims[i]).product();

    // groups[t] lists (full index, kept index) pairs sharing traced index t.
    let mut groups: Vec<Vec<(usize, usize)>> = vec![Vec::with_capacity(kept_dim); traced_dim];
    let mut dig = vec![0usize; dims.len()];
    for full in 0..total {
        digits(full, dims, &mut dig);
        let k = kept.iter().fold(0, |acc, &i| acc * dims[i] + dig[i]);
        let t = traced.iter().fold(0, |acc, &i| acc * dims[i] + dig[i]);
        groups[t].push((full, k));
    }
    let mut out = CMatrix::zeros(kept_dim, kept_dim);
    for group in &groups {
        for &(r, kr) in group {
            for &(col, kc) in group {
                out[(kr, kc)] += m[(r, col)];
            }
        }
    }
    Ok(out)
}

fn permutation_map(dims: &[usize], perm: &[usize]) -> Vec<usize> {
    let total: usize = dims.iter().product();
    let new_dims: Vec<usize> = perm.iter().map(|&p| dims[p]).collect();
    let mut dig = vec![0usize; dims.len()];
    (0..total)
        .map(|old| {
            digits(old, dims, &mut dig);
            perm.iter().zip(&new_dims).fold(0, |acc, (&p, &d)| acc * d + dig[p])
        })
        .collect()
}

/// Reorders tensor factors: factor `j` of the result is factor `perm[j]` of `m`.
pub fn permute_subsystems(m: &CMatrix, dims: &[usize], perm: &[usize]) -> Result<CMatrix> {
    let total = m.nrows();
    check_dims(dims, total)?;
    if perm.len() != dims.len() {
        return Err(Error::InconsistentSubsystems { dims: dims.to_vec(), dim: total });
    }
    check_indices(perm, dims.len(), dims, total)?;
    let map = permutation_map(dims, perm);
    let mut out = CMatrix::zeros(total, m.ncols());
    if m.ncols() == total {
        for r in 0..total {
            for col in 0..total {
                out[(map[r], map[col])] = m[(r, col)];
            }
        }
    } else {
        for r in 0..total {
            out.set_row(map[r], &m.row(r));
        }
    }
    Ok(out)
}

pub(crate) fn inverse_permutation(perm: &[usize]) -> Vec<usize> {
    let mut inv = vec![0; perm.len()];
    for (j, &p) in perm.iter().enumerate() {
        inv[p] = j;
    }
    inv
}

/// `(K ⊗ I_r) X` for `K` of shape `k_out × k_in` and `X` with `k_in · r` rows.
pub fn left_mul_local(k: &CMatrix, x: &CMatrix, r: usize) -> CMatrix {
    let (k_out, k_in) = k.shape();
    debug_assert_eq!(x.nrows(), k_in * r);
    let mut out = CMatrix::zeros(k_out * r, x.ncols());
    for a in 0..k_out {
        for col in 0..k_in {
            let coeff = k[(a, col)];
            if coeff.norm_sqr() == 0.0 {
                continue;
            }
            let src = x.rows(col * r, r);
            let mut dst = out.rows_mut(a * r, r);
            dst.zip_apply(&src, |d, s| *d += coeff * s);
        }
    }
    out
}

/// Conjugates `x` by a square operator acting on the `targets` factors:
/// `(K_targets ⊗ I) X (K_targets ⊗ I)†`. Pass a single-column `x` to apply
/// `K` to a state vector instead (only the left multiplication is done).
pub fn apply_local(x: &CMatrix, dims: &[usize], targets: &[usize], k: &CMatrix) -> Result<CMatrix> {
    let total = x.nrows();
    check_dims(dims, total)?;
    check_indices(targets, dims.len(), dims, total)?;
    let local: usize = targets.iter().map(|&t| dims[t]).product();
    if k.nrows() != local || k.ncols() != local {
        return Err(Error::DimensionMismatch { expected: local, actual: k.ncols() });
    }
    let mut perm: Vec<usize> = targets.to_vec();
    perm.extend((0..dims.len()).filter(|i| !targets.contains(i)));
    let r = total / local;
    let moved = permute_subsystems(x, dims, &perm)?;
    let mut y = left_mul_local(k, &moved, r);
    if x.ncols() == total {
        y = left_mul_local(k, &y.adjoint(), r).adjoint();
    }
    let new_dims: Vec<usize> = perm.iter().map(|&p| dims[p]).collect();
    permute_subsystems(&y, &new_dims, &inverse_permutation(&perm))
}
