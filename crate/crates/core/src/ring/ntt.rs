//! Negacyclic number-theoretic transform for `q ≡ 1 (mod 2n)`.

use super::modular::{add_mod, inv_mod, mul_mod, mul_shoup, pow_mod, shoup, sub_mod};

#[derive(Debug, Clone)]
pub struct NttTables {
    q: u64,
    n: usize,
    psi_rev: Vec<u64>,
    psi_rev_shoup: Vec<u64>,
    psi_inv_rev: Vec<u64>,
    psi_inv_rev_shoup: Vec<u64>,
    n_inv: u64,
    n_inv_shoup: u64,
}

fn bit_reverse(mut x: usize, bits: u32) -> usize {
    let mut r = 0;
    for _ in 0..bits {
        r = (r << 1) | (x & 1);
        x >>= 1;
    }
    r
}

/// Find a primitive 2n-th root of unity: any `x^((q-1)/2n)` whose n-th power is -1.
fn find_psi(q: u64, n: usize) -> Option<u64> {
    let two_n = 2 * n as u64;
    if (q - 1) % two_n != 0 {
        return None;
    }
    let exp = (q - 1) / two_n;
    (2..q.min(1 << 20)).find_map(|x| {
        let psi = pow_mod(x, exp, q);
        (pow_mod(psi, n as u64, q) == q - 1).then_some(psi)
    })
}

impl NttTables {
    /// `None` when `q` is not NTT-friendly for degree `n`.
    pub fn new(q: u64, n: usize) -> Option<Self> {
        if n < 2 || !n.is_power_of_two() {
            return None;
        }
        let psi = find_psi(q, n)?;
        let psi_inv = inv_mod(psi, q)?;
        let bits = n.trailing_zeros();
        let mut psi_rev = vec![0; n];
        let mut psi_inv_rev = vec![0; n];
        for i in 0..n {
            let r = bit_reverse(i, bits) as u64;
            psi_rev[i] = pow_mod(psi, r, q);
            psi_inv_rev[i] = pow_mod(psi_inv, r, q);
        }
        let psi_rev_shoup = psi_rev.iter().map(|&w| shoup(w, q)).collect();
        let psi_inv_rev_shoup = psi_inv_rev.iter().map(|&w| shoup(w, q)).collect();
        let n_inv = inv_mod(n as u64, q)?;
        Some(Self {
            q,
            n,
            psi_rev,
            psi_rev_shoup,
            psi_inv_rev,
            psi_inv_rev_shoup,
            n_inv,
            n_inv_shoup: shoup(n_inv, q),
        })
    }

    pub fn forward(&self, a: &mut [u64]) {
        debug_assert_eq!(a.len(), self.n);
        let q = self.q;
        let mut t = self.n;
        let mut m = 1;
        while m < self.n {
            t >>= 1;
            for i in 0..m {
                let j1 = 2 * i * t;
                let (w, ws) = (self.psi_rev[m + i], self.psi_rev_shoup[m + i]);
                for j in j1..j1 + t {
                    let u = a[j];
                    let v = mul_shoup(a[j + t], w, ws, q);
                    a[j] = add_mod(u, v, q);
                    a[j + t] = sub_mod(u, v, q);
                }
            }
            m <<= 1;
        }
    }

    pub fn inverse(&self, a: &mut [u64]) {
        debug_assert_eq!(a.len(), self.n);
        let q = self.q;
        let mut t = 1;
        let mut m = self.n;
        while m > 1 {
            let h = m >> 1;
            let mut j1 = 0;
            for i in 0..h {
                let (w, ws) = (self.psi_inv_rev[h + i], self.psi_inv_rev_shoup[h + i]);
                for j in j1..j1 + t {
                    let u = a[j];
                    let v = a[j + t];
                    a[j] = add_mod(u, v, q);
                    a[j + t] = mul_shoup(sub_mod(u, v, q), w, ws, q);
                }
                j1 += 2 * t;
            }
            t <<= 1;
            m = h;
        }
        for x in a.iter_mut() {
            *x = mul_shoup(*x, self.n_inv, self.n_inv_shoup, q);
        }
    }

    /// Negacyclic product of two residue vectors in `[0, q)`.
    pub fn multiply(&self, a: &[u64], b: &[u64]) -> Vec<u64> {
        let mut fa = a.to_vec();
        let mut fb = b.to_vec();
        self.forward(&mut fa);
        self.forward(&mut fb);
        for (x, y) in fa.iter_mut().zip(&fb) {
            *x = mul_mod(*x, *y, self.q);
        }
        self.inverse(&mut fa);
        fa
    }
}
