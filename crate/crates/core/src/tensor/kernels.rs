//! Dense matrix kernels. Loop orders are fixed so that every output element
//! accumulates its reduction left-to-right over the shared dimension; no
//! kernel may reorder floating-point sums.

/// C = A[m,k] * B[k,n].
pub fn mm_nn(a: &[f64], b: &[f64], m: usize, k: usize, n: usize) -> Vec<f64> {
    let mut out = vec![0.0; m * n];
    for i in 0..m {
        let a_row = &a[i * k..(i + 1) * k];
        let o_row = &mut out[i * n..(i + 1) * n];
        for (p, &av) in a_row.iter().enumerate() {
            let b_row = &b[p * n..(p + 1) * n];
            for j in 0..n {
                o_row[j] += av * b_row[j];
            }
        }
    }
    out
}

/// Accumulate C += A[m,n] * B[k,n]^T, i.e. C[i,p] += sum_j A[i,j] * B[p,j].
pub fn mm_nt_acc(a: &[f64], b: &[f64], m: usize, n: usize, k: usize, out: &mut [f64]) {
    debug_assert_eq!(out.len(), m * k);
    for i in 0..m {
        let a_row = &a[i * n..(i + 1) * n];
        for p in 0..k {
            let b_row = &b[p * n..(p + 1) * n];
            let mut acc = 0.0;
            for j in 0..n {
                acc += a_row[j] * b_row[j];
            }
            out[i * k + p] += acc;
        }
    }
}

/// Accumulate C += A[m,k]^T * B[m,n], i.e. C[p,j] += sum_i A[i,p] * B[i,j].
pub fn mm_tn_acc(a: &[f64], b: &[f64], m: usize, k: usize, n: usize, out: &mut [f64]) {
    debug_assert_eq!(out.len(), k * n);
    for i in 0..m {
        let b_row = &b[i * n..(i + 1) * n];
        for p in 0..k {
            let av = a[i * k + p];
            let o_row = &mut out[p * n..(p + 1) * n];
            for j in 0..n {
                o_row[j] += av * b_row[j];
            }
        }
    }
}
