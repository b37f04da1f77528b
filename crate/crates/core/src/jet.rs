//! Second-order forward-mode dual numbers for one-variable profiles.
//!
//! A [`Jet`] carries `(f, f', f'')` through arithmetic so radial cutoff
//! profiles yield exact first and second derivatives without finite
//! differences.

use std::ops::{Add, Div, Mul, Neg, Sub};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Jet {
    pub v: f64,
    pub d1: f64,
    pub d2: f64,
}

impl Jet {
    pub const fn constant(v: f64) -> Self {
        Self { v, d1: 0.0, d2: 0.0 }
    }

    /// The independent variable at `v`.
    pub const fn variable(v: f64) -> Self {
        Self { v, d1: 1.0, d2: 0.0 }
    }

    /// Applies a scalar function given its value and first two derivatives
    /// at `self.v`.
    #[inline]
    fn chain(self, f: f64, df: f64, ddf: f64) -> Self {
        Self {
            v: f,
            d1: df * self.d1,
            d2: ddf * self.d1 * self.d1 + df * self.d2,
        }
    }

    pub fn ln(self) -> Self {
        let x = self.v;
        self.chain(x.ln(), 1.0 / x, -1.0 / (x * x))
    }

    pub fn exp(self) -> Self {
        let e = self.v.exp();
        self.chain(e, e, e)
    }

    pub fn scale(self, c: f64) -> Self {
        Self {
            v: c * self.v,
            d1: c * self.d1,
            d2: c * self.d2,
        }
    }
}

impl From<f64> for Jet {
    fn from(v: f64) -> Self {
        Jet::constant(v)
    }
}

impl Add for Jet {
    type Output = Jet;
    fn add(self, o: Jet) -> Jet {
        Jet {
            v: self.v + o.v,
            d1: self.d1 + o.d1,
            d2: self.d2 + o.d2,
        }
    }
}

impl Sub for Jet {
    type Output = Jet;
    fn sub(self, o: Jet) -> Jet {
        Jet {
            v: self.v - o.v,
            d1: self.d1 - o.d1,
            d2: self.d2 - o.d2,
        }
    }
}

impl Mul for Jet {
    type Output = Jet;
    fn mul(self, o: Jet) -> Jet {
        Jet {
            v: self.v * o.v,
            d1: self.d1 * o.v + self.v * o.d1,
            d2: self.d2 * o.v + 2.0 * self.d1 * o.d1 + self.v * o.d2,
        }
    }
}

impl Div for Jet {
    type Output = Jet;
    fn div(self, o: Jet) -> Jet {
        let inv = 1.0 / o.v;
        let r = o.chain(inv, -inv * inv, 2.0 * inv * inv * inv);
        self * r
    }
}

impl Neg for Jet {
    type Output = Jet;
    fn neg(self) -> Jet {
        self.scale(-1.0)
    }
}

impl Add<f64> for Jet {
    type Output = Jet;
    fn add(self, c: f64) -> Jet {
        Jet { v: self.v + c, ..self }
    }
}

impl Sub<f64> for Jet {
    type Output = Jet;
    fn sub(self, c: f64) -> Jet {
        Jet { v: self.v - c, ..self }
    }
}

impl Mul<f64> for Jet {
    type Output = Jet;
    fn mul(self, c: f64) -> Jet {
        self.scale(c)
    }
}

impl Sub<Jet> for f64 {
    type Output = Jet;
    fn sub(self, j: Jet) -> Jet {
        -j + self
    }
}

/// Gradient and Hessian of the radial function `x -> p(|x|)` given the jet
/// of `p` at `r = |x|`.
pub fn radial_derivatives(x: [f64; 2], p: Jet) -> ([f64; 2], [[f64; 2]; 2]) {
    let r = x[0].hypot(x[1]);
    if r == 0.0 {
        // smooth radial functions have p'(0) = 0; the Hessian is p''(0) I
        return ([0.0, 0.0], [[p.d2, 0.0], [0.0, p.d2]]);
    }
    let e = [x[0] / r, x[1] / r];
    let grad = [p.d1 * e[0], p.d1 * e[1]];
    let tang = p.d1 / r;
    let mut hess = [[0.0; 2]; 2];
    for a in 0..2 {
        for b in 0..2 {
            let id = if a == b { 1.0 } else { 0.0 };
            hess[a][b] = p.d2 * e[a] * e[b] + tang * (id - e[a] * e[b]);
        }
    }
    (grad, hess)
}
