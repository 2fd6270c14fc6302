//! Scalar arithmetic modulo a word-sized prime.

#[inline]
pub fn mul_mod(a: u64, b: u64, q: u64) -> u64 {
    ((a as u128 * b as u128) % q as u128) as u64
}

#[inline]
pub fn add_mod(a: u64, b: u64, q: u64) -> u64 {
    let s = a + b;
    if s >= q {
        s - q
    } else {
        s
    }
}

#[inline]
pub fn sub_mod(a: u64, b: u64, q: u64) -> u64 {
    if a >= b {
        a - b
    } else {
        a + q - b
    }
}

pub fn pow_mod(mut base: u64, mut exp: u64, q: u64) -> u64 {
    let mut acc = 1 % q;
    base %= q;
    while exp > 0 {
        if exp & 1 == 1 {
            acc = mul_mod(acc, base, q);
        }
        base = mul_mod(base, base, q);
        exp >>= 1;
    }
    acc
}

/// `floor(w · 2^64 / q)`, the precomputed companion of a fixed multiplier.
#[inline]
pub fn shoup(w: u64, q: u64) -> u64 {
    (((w as u128) << 64) / q as u128) as u64
}

/// `a · w mod q` given `w_shoup = shoup(w, q)`; valid for `q < 2^63`.
#[inline]
pub fn mul_shoup(a: u64, w: u64, w_shoup: u64, q: u64) -> u64 {
    let hi = ((a as u128 * w_shoup as u128) >> 64) as u64;
    let r = a.wrapping_mul(w).wrapping_sub(hi.wrapping_mul(q));
    if r >= q {
        r - q
    } else {
        r
    }
}

/// Center a value already known to lie in `(-q, q)`.
#[inline]
pub fn center_small(x: i64, q: u64) -> i64 {
    let r = if x < 0 { x + q as i64 } else { x };
    center(r as u64, q)
}

/// Modular inverse by the extended Euclidean algorithm. `None` when `a` and
/// `q` are not coprime.
pub fn inv_mod(a: u64, q: u64) -> Option<u64> {
    let (mut old_r, mut r) = (reduce_i128(a as i128, q) as i128, q as i128);
    let (mut old_s, mut s) = (1i128, 0i128);
    while r != 0 {
        let quot = old_r / r;
        (old_r, r) = (r, old_r - quot * r);
        (old_s, s) = (s, old_s - quot * s);
    }
    if old_r != 1 {
        return None;
    }
    Some(reduce_i128(old_s, q))
}

/// Reduce any signed value into `[0, q)`.
#[inline]
pub fn reduce_i128(x: i128, q: u64) -> u64 {
    x.rem_euclid(q as i128) as u64
}

/// Map a residue in `[0, q)` to the centered range `[-q/2, q/2)`.
#[inline]
pub fn center(x: u64, q: u64) -> i64 {
    // for odd q the centered range is [-(q-1)/2, (q-1)/2]; for even q, [-q/2, q/2)
    if x >= q - q / 2 {
        x as i64 - q as i64
    } else {
        x as i64
    }
}

/// Map a centered (or any signed) value into `[0, q)`.
#[inline]
pub fn uncenter(x: i64, q: u64) -> u64 {
    if x >= 0 {
        x as u64 % q
    } else {
        reduce_i128(x as i128, q)
    }
}

/// Centered reduction of an arbitrary signed value.
#[inline]
pub fn center_i128(x: i128, q: u64) -> i64 {
    center(reduce_i128(x, q), q)
}

/// Deterministic Miller-Rabin, exact for all 64-bit inputs.
pub fn is_prime(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    for p in [2u64, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37] {
        if n % p == 0 {
            return n == p;
        }
    }
    let mut d = n - 1;
    let mut s = 0;
    while d % 2 == 0 {
        d /= 2;
        s += 1;
    }
    'witness: for a in [2u64, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37] {
        let mut x = pow_mod(a, d, n);
        if x == 1 || x == n - 1 {
            continue;
        }
        for _ in 1..s {
            x = mul_mod(x, x, n);
            if x == n - 1 {
                continue 'witness;
            }
        }
        return false;
    }
    true
}
