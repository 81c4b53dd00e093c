//! Left-looking sparse LU with partial pivoting.
//!
//! Column `j` of the factors comes from a sparse triangular solve against the
//! already-computed columns (reachability DFS for the pattern, then numeric
//! elimination in topological order), followed by a partial-pivot choice:
//! largest modulus, ties broken by smallest original row index, which makes
//! the factorization fully deterministic for a given matrix.

use super::sparse::{Scalar, SparseMatrix};
use super::LinAlgError;

/// LU factors `P·A = L·U` of one specific matrix state.
///
/// The factorization remembers the matrix's identity and version; `solve`
/// re-checks both, so using it after the matrix was updated in place (or
/// against a different matrix) fails with
/// [`LinAlgError::StaleFactorization`] instead of silently returning wrong
/// results. One factorization can serve any number of right-hand sides.
#[derive(Debug, Clone)]
pub struct Factorization<S> {
    n: usize,
    // L is unit lower triangular; only the strictly-lower multipliers are
    // stored, with original (unpermuted) row indices.
    l_colptr: Vec<usize>,
    l_rows: Vec<usize>,
    l_vals: Vec<S>,
    // U is upper triangular in pivot-position space; the diagonal is split
    // off for the backward solve.
    u_colptr: Vec<usize>,
    u_pos: Vec<usize>,
    u_vals: Vec<S>,
    u_diag: Vec<S>,
    /// `perm[k]` = original row chosen as the `k`-th pivot.
    perm: Vec<usize>,
    matrix_id: u64,
    matrix_version: u64,
}

impl<S: Scalar> Factorization<S> {
    /// Factors a square matrix. Fails with [`LinAlgError::Singular`] when a
    /// column has no nonzero pivot candidate.
    pub fn new(a: &SparseMatrix<S>) -> Result<Self, LinAlgError> {
        let n = a.nrows();
        if a.ncols() != n {
            return Err(LinAlgError::DimensionMismatch {
                expected: n,
                got: a.ncols(),
            });
        }

        let mut f = Factorization {
            n,
            l_colptr: vec![0; 1],
            l_rows: Vec::new(),
            l_vals: Vec::new(),
            u_colptr: vec![0; 1],
            u_pos: Vec::new(),
            u_vals: Vec::new(),
            u_diag: Vec::with_capacity(n),
            perm: Vec::with_capacity(n),
            matrix_id: a.id(),
            matrix_version: a.version(),
        };

        // pinv[orig row] = pivot position, or usize::MAX while unpivoted.
        let mut pinv = vec![usize::MAX; n];
        let mut x = vec![S::zero(); n];
        let mut mark = vec![0u64; n];
        let mut topo: Vec<usize> = Vec::new();
        let mut stack: Vec<(usize, usize)> = Vec::new();

        for j in 0..n {
            let stamp = (j + 1) as u64;

            // Pattern of x = L \ A[:,j] by DFS through the finished columns;
            // reverse postorder gives the elimination order.
            topo.clear();
            for (s, _) in a.col(j) {
                if mark[s] == stamp {
                    continue;
                }
                mark[s] = stamp;
                stack.push((s, 0));
                while let Some((r, ci)) = stack.pop() {
                    let k = pinv[r];
                    let children: &[usize] = if k == usize::MAX {
                        &[]
                    } else {
                        &f.l_rows[f.l_colptr[k]..f.l_colptr[k + 1]]
                    };
                    if ci < children.len() {
                        stack.push((r, ci + 1));
                        let c = children[ci];
                        if mark[c] != stamp {
                            mark[c] = stamp;
                            stack.push((c, 0));
                        }
                    } else {
                        topo.push(r);
                    }
                }
            }
            topo.reverse();

            // Numeric phase: scatter A[:,j], then eliminate.
            for &r in &topo {
                x[r] = S::zero();
            }
            for (i, v) in a.col(j) {
                x[i] = v;
            }
            for &r in &topo {
                let k = pinv[r];
                if k == usize::MAX {
                    continue;
                }
                let xr = x[r];
                for p in f.l_colptr[k]..f.l_colptr[k + 1] {
                    x[f.l_rows[p]] -= f.l_vals[p] * xr;
                }
            }

            // Pivot: largest modulus among unpivoted rows, smallest original
            // index on ties.
            let mut pivot_row = usize::MAX;
            let mut pivot_mag = 0.0f64;
            for &r in &topo {
                if pinv[r] != usize::MAX {
                    continue;
                }
                let m = x[r].modulus_sq();
                if m > pivot_mag || (m == pivot_mag && m > 0.0 && r < pivot_row) {
                    pivot_mag = m;
                    pivot_row = r;
                }
            }
            if pivot_row == usize::MAX || pivot_mag == 0.0 {
                return Err(LinAlgError::Singular { col: j });
            }
            let pivot = x[pivot_row];
            pinv[pivot_row] = j;
            f.perm.push(pivot_row);
            f.u_diag.push(pivot);

            // Gather U (finished pivot positions) and L (multipliers).
            for &r in &topo {
                let k = pinv[r];
                if k != usize::MAX && k < j {
                    f.u_pos.push(k);
                    f.u_vals.push(x[r]);
                } else if r != pivot_row {
                    f.l_rows.push(r);
                    f.l_vals.push(x[r] / pivot);
                }
            }
            f.u_colptr.push(f.u_pos.len());
            f.l_colptr.push(f.l_rows.len());
        }

        Ok(f)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Solves `A·x = b` for the matrix state this factorization was computed
    /// from; `a` must be that same object, unmodified since.
    pub fn solve(&self, a: &SparseMatrix<S>, b: &[S]) -> Result<Vec<S>, LinAlgError> {
        if a.id() != self.matrix_id || a.version() != self.matrix_version {
            return Err(LinAlgError::StaleFactorization);
        }
        if b.len() != self.n {
            return Err(LinAlgError::DimensionMismatch {
                expected: self.n,
                got: b.len(),
            });
        }

        // Forward substitution in original row space: x := L⁻¹·P·b.
        let mut work = b.to_vec();
        let mut z = vec![S::zero(); self.n];
        for k in 0..self.n {
            let xk = work[self.perm[k]];
            z[k] = xk;
            for p in self.l_colptr[k]..self.l_colptr[k + 1] {
                work[self.l_rows[p]] -= self.l_vals[p] * xk;
            }
        }

        // Backward substitution with U in pivot-position space.
        for j in (0..self.n).rev() {
            let xj = z[j] / self.u_diag[j];
            z[j] = xj;
            for p in self.u_colptr[j]..self.u_colptr[j + 1] {
                z[self.u_pos[p]] -= self.u_vals[p] * xj;
            }
        }
        Ok(z)
    }
}
