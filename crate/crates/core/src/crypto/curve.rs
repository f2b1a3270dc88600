//! Curve domain parameters with self-contained affine arithmetic.
//!
//! The big-integer arithmetic here is independent of the projective
//! implementation used on the hot path, so it doubles as a cross-check:
//! `validate` recomputes the curve equation at the generator and confirms
//! `n·G` is the point at infinity.

use num_bigint::BigUint;
use num_traits::{One, Zero};

/// Short-Weierstrass curve constants: `y² = x³ + a·x + b (mod p)` with
/// generator `G`, group order `n`, and cofactor `h`.
#[derive(Debug, Clone)]
pub struct CurveParams {
    pub name: &'static str,
    pub p: BigUint,
    pub a: BigUint,
    pub b: BigUint,
    pub gx: BigUint,
    pub gy: BigUint,
    pub n: BigUint,
    pub h: u32,
}

/// An affine point or the point at infinity.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum AffinePoint {
    Infinity,
    Point { x: BigUint, y: BigUint },
}

impl CurveParams {
    /// The secp256k1 domain parameters (SEC 2).
    pub fn secp256k1() -> Self {
        let hexint = |s: &str| BigUint::parse_bytes(s.as_bytes(), 16).unwrap();
        CurveParams {
            name: "secp256k1",
            p: hexint("fffffffffffffffffffffffffffffffffffffffffffffffffffffffefffffc2f"),
            a: BigUint::zero(),
            b: BigUint::from(7u32),
            gx: hexint("79be667ef9dcbbac55a06295ce870b07029bfcdb2dce28d959f2815b16f81798"),
            gy: hexint("483ada7726a3c4655da4fbfc0e1108a8fd17b448a68554199c47d08ffb10d4b8"),
            n: hexint("fffffffffffffffffffffffffffffffebaaedce6af48a03bbfd25e8cd0364141"),
            h: 1,
        }
    }

    /// True iff `(x, y)` satisfies the curve equation.
    pub fn on_curve(&self, x: &BigUint, y: &BigUint) -> bool {
        let lhs = y * y % &self.p;
        let rhs = (x * x * x + &self.a * x + &self.b) % &self.p;
        lhs == rhs
    }

    /// Checks the structural invariants: `G` on curve and `n·G = ∞`.
    pub fn validate(&self) -> bool {
        if !self.on_curve(&self.gx, &self.gy) {
            return false;
        }
        let g = self.generator();
        self.scalar_mul(&self.n, &g) == AffinePoint::Infinity
    }

    pub fn generator(&self) -> AffinePoint {
        AffinePoint::Point {
            x: self.gx.clone(),
            y: self.gy.clone(),
        }
    }

    fn mod_inv(&self, a: &BigUint) -> BigUint {
        // p is prime: a^(p-2) mod p
        a.modpow(&(&self.p - 2u32), &self.p)
    }

    /// Affine point addition.
    pub fn add(&self, p1: &AffinePoint, p2: &AffinePoint) -> AffinePoint {
        let (x1, y1) = match p1 {
            AffinePoint::Infinity => return p2.clone(),
            AffinePoint::Point { x, y } => (x, y),
        };
        let (x2, y2) = match p2 {
            AffinePoint::Infinity => return p1.clone(),
            AffinePoint::Point { x, y } => (x, y),
        };
        let p = &self.p;
        if x1 == x2 && (y1 + y2) % p == BigUint::zero() {
            return AffinePoint::Infinity;
        }
        let lambda = if x1 == x2 {
            // tangent slope: (3x² + a) / 2y
            let num = (BigUint::from(3u32) * x1 * x1 + &self.a) % p;
            let den = self.mod_inv(&((BigUint::from(2u32) * y1) % p));
            num * den % p
        } else {
            let num = (p + y2 - y1) % p;
            let den = self.mod_inv(&((p + x2 - x1) % p));
            num * den % p
        };
        let x3 = (&lambda * &lambda + p + p - x1 - x2) % p;
        let y3 = (&lambda * ((p + x1 - &x3) % p) + p - y1) % p;
        AffinePoint::Point { x: x3, y: y3 }
    }

    /// Double-and-add scalar multiplication.
    pub fn scalar_mul(&self, k: &BigUint, point: &AffinePoint) -> AffinePoint {
        let mut result = AffinePoint::Infinity;
        let mut addend = point.clone();
        let mut k = k.clone();
        while !k.is_zero() {
            if &k % 2u32 == BigUint::one() {
                result = self.add(&result, &addend);
            }
            addend = self.add(&addend, &addend);
            k >>= 1;
        }
        result
    }
}
