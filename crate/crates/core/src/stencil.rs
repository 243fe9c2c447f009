//! Finite-difference weights.
//!
//! Centered spatial tables and the non-uniform time weights used by the
//! history buffer both come from Fornberg's recursion.

use std::sync::LazyLock;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Fornberg weights: `w[d][j]` approximates the `d`-th derivative at `x0`
/// from samples at `nodes[j]`, for `d = 0..=max_deriv`.
pub fn fornberg(x0: f64, nodes: &[f64], max_deriv: usize) -> Vec<Vec<f64>> {
    let n = nodes.len();
    let m = max_deriv;
    let mut c = vec![vec![0.0; n]; m + 1];
    c[0][0] = 1.0;
    let mut c1 = 1.0;
    let mut c4 = nodes[0] - x0;
    for i in 1..n {
        let mn = i.min(m);
        let mut c2 = 1.0;
        let c5 = c4;
        c4 = nodes[i] - x0;
        for j in 0..i {
            let c3 = nodes[i] - nodes[j];
            c2 *= c3;
            if j == i - 1 {
                for k in (1..=mn).rev() {
                    c[k][i] = c1 * (k as f64 * c[k - 1][i - 1] - c5 * c[k][i - 1]) / c2;
                }
                c[0][i] = -c1 * c5 * c[0][i - 1] / c2;
            }
            for k in (1..=mn).rev() {
                c[k][j] = (c4 * c[k][j] - k as f64 * c[k - 1][j]) / c3;
            }
            c[0][j] = c4 * c[0][j] / c3;
        }
        c1 = c2;
    }
    c
}

/// Accuracy order of centered spatial differences.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum StencilOrder {
    Second,
    Fourth,
    Sixth,
    Eighth,
}

impl StencilOrder {
    pub fn from_int(p: u32) -> Result<Self> {
        match p {
            2 => Ok(Self::Second),
            4 => Ok(Self::Fourth),
            6 => Ok(Self::Sixth),
            8 => Ok(Self::Eighth),
            _ => Err(Error::Invalid(format!("stencil order {p} not in {{2,4,6,8}}"))),
        }
    }

    pub fn as_int(self) -> u32 {
        match self {
            Self::Second => 2,
            Self::Fourth => 4,
            Self::Sixth => 6,
            Self::Eighth => 8,
        }
    }

    fn slot(self) -> usize {
        (self.as_int() / 2 - 1) as usize
    }

    /// Half-width of the centered stencil for derivative `deriv`.
    pub fn half_width(self, deriv: usize) -> usize {
        self.as_int() as usize / 2 + (deriv.max(1) - 1) / 2
    }
}

static TABLES: LazyLock<Vec<[Vec<f64>; 4]>> = LazyLock::new(|| {
    [StencilOrder::Second, StencilOrder::Fourth, StencilOrder::Sixth, StencilOrder::Eighth]
        .iter()
        .map(|&o| {
            let build = |d: usize| -> Vec<f64> {
                if d == 0 {
                    return vec![1.0];
                }
                let h = o.half_width(d) as isize;
                let nodes: Vec<f64> = (-h..=h).map(|m| m as f64).collect();
                let mut w = fornberg(0.0, &nodes, d).swap_remove(d);
                // enforce exact (anti)symmetry so rounding never breaks parity
                let len = w.len();
                for m in 0..len / 2 {
                    let (a, b) = (w[m], w[len - 1 - m]);
                    if d % 2 == 0 {
                        let avg = 0.5 * (a + b);
                        w[m] = avg;
                        w[len - 1 - m] = avg;
                    } else {
                        let avg = 0.5 * (b - a);
                        w[m] = -avg;
                        w[len - 1 - m] = avg;
                    }
                }
                if d % 2 == 1 {
                    w[len / 2] = 0.0;
                }
                w
            };
            [build(0), build(1), build(2), build(3)]
        })
        .collect()
});

/// Centered weights for derivative `deriv` in 0..=3 on offsets `-h..=h` (unit spacing).
pub fn coefficients(deriv: usize, order: StencilOrder) -> &'static [f64] {
    assert!(deriv <= 3, "derivative order {deriv} unsupported");
    &TABLES[order.slot()][deriv]
}

/// Per-axis first/second derivative weights at a fixed spacing.
#[derive(Clone, Debug)]
pub struct Stencil {
    pub order: StencilOrder,
    /// Half-width of the first/second derivative stencils.
    pub h: usize,
    /// `d1[m-1]` multiplies `f(+m) - f(-m)`, already divided by dx.
    pub d1: Vec<f64>,
    /// `d2[0]` is the centre weight, `d2[m]` multiplies `f(+m) + f(-m)`; divided by dx².
    pub d2: Vec<f64>,
}

impl Stencil {
    pub fn new(order: StencilOrder, dx: f64) -> Self {
        let h = order.half_width(1);
        let c1 = coefficients(1, order);
        let c2 = coefficients(2, order);
        let d1 = (1..=h).map(|m| c1[h + m] / dx).collect();
        let d2 = (0..=h).map(|m| c2[h + m] / (dx * dx)).collect();
        Stencil { order, h, d1, d2 }
    }
}
