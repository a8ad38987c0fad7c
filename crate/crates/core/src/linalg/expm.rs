//! Matrix exponential by scaling and squaring with diagonal Padé
//! approximants of degree 3, 5, 7, 9 or 13, selected from the 1-norm.

#[allow(unused_imports)]
use num_traits::Float;

use super::lu::Lu;
use crate::matrix::{c64, Matrix};

const THETA: [(usize, f64); 4] = [
    (3, 1.495_585_217_958_292e-2),
    (5, 2.539_398_330_063_230e-1),
    (7, 9.504_178_996_162_932e-1),
    (9, 2.097_847_961_257_068e0),
];
const THETA_13: f64 = 5.371_920_351_148_152;

const B3: [f64; 4] = [120.0, 60.0, 12.0, 1.0];
const B5: [f64; 6] = [30240.0, 15120.0, 3360.0, 420.0, 30.0, 1.0];
const B7: [f64; 8] = [17_297_280.0, 8_648_640.0, 1_995_840.0, 277_200.0, 25200.0, 1512.0, 56.0, 1.0];
const B9: [f64; 10] = [
    17_643_225_600.0,
    8_821_612_800.0,
    2_075_673_600.0,
    302_702_400.0,
    30_270_240.0,
    2_162_160.0,
    110_880.0,
    3960.0,
    90.0,
    1.0,
];
const B13: [f64; 14] = [
    64_764_752_532_480_000.0,
    32_382_376_266_240_000.0,
    7_771_770_303_897_600.0,
    1_187_353_796_428_800.0,
    129_060_195_264_000.0,
    10_559_470_521_600.0,
    670_442_572_800.0,
    33_522_128_640.0,
    1_323_241_920.0,
    40_840_800.0,
    960_960.0,
    16380.0,
    182.0,
    1.0,
];

/// `e^M` for a square matrix `M`.
pub fn expm(m: &Matrix) -> Matrix {
    assert!(m.is_square(), "expm needs a square matrix");
    let n = m.rows();
    if n == 0 {
        return Matrix::zeros(0, 0);
    }
    let norm = m.norm_one();
    if norm == 0.0 {
        return Matrix::identity(n);
    }
    for &(deg, theta) in &THETA {
        if norm <= theta {
            let coeffs: &[f64] = match deg {
                3 => &B3,
                5 => &B5,
                7 => &B7,
                _ => &B9,
            };
            return pade_low(m, coeffs);
        }
    }
    let s = if norm > THETA_13 { (norm / THETA_13).log2().ceil().max(0.0) as i32 } else { 0 };
    let scaled = m.scale_real(2f64.powi(-s));
    let mut r = pade13(&scaled);
    for _ in 0..s {
        r = r.matmul(&r);
    }
    r
}

fn pade_solve(u: &Matrix, v: &Matrix) -> Matrix {
    // (V - U)^{-1} (V + U)
    let p = v + u;
    let q = v - u;
    match Lu::new(&q) {
        Ok(lu) => lu.solve(&p),
        // Q is a small perturbation of 2 b_0 I for the selected degree and
        // cannot have a zero pivot unless the input is not finite.
        Err(_) => Matrix::from_fn(u.rows(), u.cols(), |_, _| c64(f64::NAN, f64::NAN)),
    }
}

fn pade_low(a: &Matrix, b: &[f64]) -> Matrix {
    let n = a.rows();
    let ident = Matrix::identity(n);
    let a2 = a.matmul(a);
    // Even powers A^0, A^2, A^4, ...
    let mut evens = alloc::vec![ident.clone(), a2.clone()];
    while evens.len() * 2 < b.len() {
        let next = evens.last().unwrap().matmul(&a2);
        evens.push(next);
    }
    let mut u_inner = Matrix::zeros(n, n);
    let mut v = Matrix::zeros(n, n);
    for (k, pk) in evens.iter().enumerate() {
        if 2 * k + 1 < b.len() {
            u_inner = &u_inner + &pk.scale_real(b[2 * k + 1]);
        }
        if 2 * k < b.len() {
            v = &v + &pk.scale_real(b[2 * k]);
        }
    }
    let u = a.matmul(&u_inner);
    pade_solve(&u, &v)
}

fn pade13(a: &Matrix) -> Matrix {
    let b = &B13;
    let n = a.rows();
    let ident = Matrix::identity(n);
    let a2 = a.matmul(a);
    let a4 = a2.matmul(&a2);
    let a6 = a4.matmul(&a2);
    let lin = |c: [f64; 4]| -> Matrix {
        let mut m = ident.scale_real(c[0]);
        m = &m + &a2.scale_real(c[1]);
        m = &m + &a4.scale_real(c[2]);
        &m + &a6.scale_real(c[3])
    };
    let u_hi = a6.matmul(&lin([0.0, b[9], b[11], b[13]]));
    let u = a.matmul(&(&u_hi + &lin([b[1], b[3], b[5], b[7]])));
    let v_hi = a6.matmul(&lin([0.0, b[8], b[10], b[12]]));
    let v = &v_hi + &lin([b[0], b[2], b[4], b[6]]);
    pade_solve(&u, &v)
}
