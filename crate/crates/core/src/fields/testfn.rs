use std::f64::consts::PI;

use serde::Serialize;

use crate::error::{invalid, Result};

/// `a cos(2 pi k x) + b sin(2 pi k x)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Mode {
    pub k: u32,
    pub cos: f64,
    pub sin: f64,
}

/// A trigonometric polynomial on the unit torus,
/// `phi(x) = c + sum_k a_k cos(2 pi k x) + b_k sin(2 pi k x)`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TestFunction {
    pub name: String,
    pub constant: f64,
    pub modes: Vec<Mode>,
}

impl TestFunction {
    /// Modes with the same frequency are merged; frequency zero must go in `constant`.
    pub fn new(name: impl Into<String>, constant: f64, modes: Vec<Mode>) -> Result<Self> {
        let mut merged: Vec<Mode> = Vec::new();
        for m in modes {
            if m.k == 0 {
                return Err(invalid("frequency zero belongs in the constant term"));
            }
            if !(m.cos.is_finite() && m.sin.is_finite()) {
                return Err(invalid("test-function coefficients must be finite"));
            }
            match merged.iter_mut().find(|x| x.k == m.k) {
                Some(x) => {
                    x.cos += m.cos;
                    x.sin += m.sin;
                }
                None => merged.push(m),
            }
        }
        merged.sort_by_key(|m| m.k);
        Ok(Self {
            name: name.into(),
            constant,
            modes: merged,
        })
    }

    pub fn constant(c: f64) -> Self {
        Self {
            name: format!("const({c})"),
            constant: c,
            modes: Vec::new(),
        }
    }

    pub fn sin(k: u32) -> Self {
        Self::new(format!("sin{k}"), 0.0, vec![Mode { k, cos: 0.0, sin: 1.0 }]).expect("k >= 1")
    }

    pub fn cos(k: u32) -> Self {
        Self::new(format!("cos{k}"), 0.0, vec![Mode { k, cos: 1.0, sin: 0.0 }]).expect("k >= 1")
    }

    /// `sin1, cos1, ..., sinK, cosK`.
    pub fn library(max_freq: u32) -> Vec<Self> {
        (1..=max_freq).flat_map(|k| [Self::sin(k), Self::cos(k)]).collect()
    }

    /// Parses `sinK`, `cosK` or `const`.
    pub fn from_name(s: &str) -> Result<Self> {
        let s = s.trim();
        if s == "const" || s == "one" {
            return Ok(Self::constant(1.0));
        }
        let (kind, k) = if let Some(k) = s.strip_prefix("sin") {
            ("sin", k)
        } else if let Some(k) = s.strip_prefix("cos") {
            ("cos", k)
        } else {
            return Err(invalid(format!("unknown test function '{s}' (use sinK, cosK or const)")));
        };
        let k: u32 = k.parse().map_err(|_| invalid(format!("bad frequency in '{s}'")))?;
        if k == 0 {
            return Err(invalid("frequency must be at least 1"));
        }
        Ok(if kind == "sin" { Self::sin(k) } else { Self::cos(k) })
    }

    /// Fejér-smoothed truncation of `eps^{-1} 1_[x0, x0 + eps)` with order `ceil(4 / eps)`.
    pub fn fejer_indicator(x0: f64, eps: f64) -> Result<Self> {
        if !(eps > 0.0 && eps <= 1.0) {
            return Err(invalid(format!("window width must lie in (0, 1], got {eps}")));
        }
        let order = (4.0 / eps).ceil() as u32;
        let mut modes = Vec::with_capacity(order as usize);
        for k in 1..=order {
            // c_k = eps^{-1} int_{x0}^{x0+eps} e^{-2 pi i k y} dy
            let w = 2.0 * PI * k as f64;
            let (s0, c0) = (w * x0).sin_cos();
            let (s1, c1) = (w * (x0 + eps)).sin_cos();
            let re = (s1 - s0) / (w * eps);
            let im = (c1 - c0) / (w * eps);
            let fejer = 1.0 - k as f64 / (order as f64 + 1.0);
            modes.push(Mode {
                k,
                cos: 2.0 * re * fejer,
                sin: -2.0 * im * fejer,
            });
        }
        Self::new(format!("iota({x0},{eps})"), 1.0, modes)
    }

    pub fn max_freq(&self) -> u32 {
        self.modes.iter().map(|m| m.k).max().unwrap_or(0)
    }

    pub fn value(&self, x: f64) -> f64 {
        self.constant
            + self
                .modes
                .iter()
                .map(|m| {
                    let (s, c) = (2.0 * PI * m.k as f64 * x).sin_cos();
                    m.cos * c + m.sin * s
                })
                .sum::<f64>()
    }

    pub fn derivative(&self, x: f64) -> f64 {
        self.modes
            .iter()
            .map(|m| {
                let w = 2.0 * PI * m.k as f64;
                let (s, c) = (w * x).sin_cos();
                w * (m.sin * c - m.cos * s)
            })
            .sum()
    }

    pub fn second_derivative(&self, x: f64) -> f64 {
        self.modes
            .iter()
            .map(|m| {
                let w = 2.0 * PI * m.k as f64;
                let (s, c) = (w * x).sin_cos();
                -w * w * (m.cos * c + m.sin * s)
            })
            .sum()
    }

    /// `||phi||^2` on the unit torus, from the coefficients.
    pub fn l2_norm_sq(&self) -> f64 {
        self.constant * self.constant + 0.5 * self.modes.iter().map(|m| m.cos * m.cos + m.sin * m.sin).sum::<f64>()
    }

    /// `||phi'||^2`.
    pub fn derivative_l2_norm_sq(&self) -> f64 {
        0.5 * self
            .modes
            .iter()
            .map(|m| (2.0 * PI * m.k as f64).powi(2) * (m.cos * m.cos + m.sin * m.sin))
            .sum::<f64>()
    }
}
