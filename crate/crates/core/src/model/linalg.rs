//! Dense row-major helpers over `f64` slices. Vectors are rows: `v·M`.

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// `out = v · M`
pub fn vec_mat(v: &[f64], m: &[f64], out: &mut [f64]) {
    let d = v.len();
    out.fill(0.0);
    for (i, &vi) in v.iter().enumerate() {
        if vi == 0.0 {
            continue;
        }
        for (o, &mij) in out.iter_mut().zip(&m[i * d..(i + 1) * d]) {
            *o += vi * mij;
        }
    }
}

/// `out = M · u`
pub fn mat_vec(m: &[f64], u: &[f64], out: &mut [f64]) {
    let d = u.len();
    for (i, o) in out.iter_mut().enumerate() {
        *o = dot(&m[i * d..(i + 1) * d], u);
    }
}

/// `out = A · B`
pub fn matmul(a: &[f64], b: &[f64], out: &mut [f64], d: usize) {
    out.fill(0.0);
    for i in 0..d {
        let row = &mut out[i * d..(i + 1) * d];
        for k in 0..d {
            let aik = a[i * d + k];
            for (o, &bkj) in row.iter_mut().zip(&b[k * d..(k + 1) * d]) {
                *o += aik * bkj;
            }
        }
    }
}

/// `out = Aᵀ · B`
pub fn matmul_tn(a: &[f64], b: &[f64], out: &mut [f64], d: usize) {
    out.fill(0.0);
    for k in 0..d {
        for i in 0..d {
            let aki = a[k * d + i];
            let row = &mut out[i * d..(i + 1) * d];
            for (o, &bkj) in row.iter_mut().zip(&b[k * d..(k + 1) * d]) {
                *o += aki * bkj;
            }
        }
    }
}

/// `out = A · Bᵀ`
pub fn matmul_nt(a: &[f64], b: &[f64], out: &mut [f64], d: usize) {
    for i in 0..d {
        for j in 0..d {
            out[i * d + j] = dot(&a[i * d..(i + 1) * d], &b[j * d..(j + 1) * d]);
        }
    }
}

/// `out += s · (a ⊗ b)`
pub fn add_outer(out: &mut [f64], s: f64, a: &[f64], b: &[f64]) {
    let d = b.len();
    for (i, &ai) in a.iter().enumerate() {
        let f = s * ai;
        for (o, &bj) in out[i * d..(i + 1) * d].iter_mut().zip(b) {
            *o += f * bj;
        }
    }
}

pub fn identity(d: usize) -> Vec<f64> {
    let mut m = vec![0.0; d * d];
    for i in 0..d {
        m[i * d + i] = 1.0;
    }
    m
}

pub fn trace(m: &[f64], d: usize) -> f64 {
    (0..d).map(|i| m[i * d + i]).sum()
}

pub fn transpose(m: &[f64], d: usize) -> Vec<f64> {
    let mut t = vec![0.0; d * d];
    for i in 0..d {
        for j in 0..d {
            t[j * d + i] = m[i * d + j];
        }
    }
    t
}
