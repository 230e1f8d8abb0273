//! Closed-form solutions of `−∇·(κ∇u) = f` used to drive and check the
//! scenarios.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::{distance, Point};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CaseId {
    /// `f ≡ 0`, `u ≡ 0`.
    Zero,
    /// 1D, `u = x(1 − x)/2`, `f = κ`.
    Quadratic,
    /// 1D, `u = (x − x³)/6`, `f = κx`.
    Cubic,
    /// 2D, `u = sin(πx)·sin(πy)`, `f = 2π²κu`.
    SinSin,
    /// Piecewise linear with continuous unit flux (1D) or `u = 1 + x + 2y`
    /// (2D). Nonhomogeneous Dirichlet data, `f = 0`.
    Linear,
    /// Star of segments with constant loads, zero outer values.
    ConstantLoads,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FractureSegment {
    pub outer: Point,
    pub junction: Point,
    pub load: f64,
}

impl FractureSegment {
    pub fn length(&self) -> f64 {
        distance(self.outer, self.junction)
    }

    /// Unit vector from the junction toward the outer end.
    fn direction(&self) -> Point {
        let l = self.length();
        [(self.outer[0] - self.junction[0]) / l, (self.outer[1] - self.junction[1]) / l]
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Kind {
    Zero,
    Quadratic,
    Cubic,
    SinSin,
    Linear2d,
    /// Unit flux; `starts[k]` is the left end of subdomain `k`, `base[k]` the
    /// value there.
    Linear1d { starts: Vec<f64>, base: Vec<f64> },
    Star { segments: Vec<FractureSegment>, junction_value: f64 },
}

/// A manufactured solution with piecewise constant `κ` per subdomain.
#[derive(Debug, Clone, PartialEq)]
pub struct ManufacturedCase {
    pub id: CaseId,
    pub kappa: Vec<f64>,
    kind: Kind,
    scale: f64,
}

impl ManufacturedCase {
    pub fn zero(kappa: Vec<f64>) -> Self {
        Self { id: CaseId::Zero, kappa, kind: Kind::Zero, scale: 1.0 }
    }

    pub fn quadratic_1d(kappa: Vec<f64>) -> Self {
        Self { id: CaseId::Quadratic, kappa, kind: Kind::Quadratic, scale: 1.0 }
    }

    pub fn cubic_1d(kappa: Vec<f64>) -> Self {
        Self { id: CaseId::Cubic, kappa, kind: Kind::Cubic, scale: 1.0 }
    }

    pub fn sin_sin_2d(kappa: Vec<f64>) -> Self {
        Self { id: CaseId::SinSin, kappa, kind: Kind::SinSin, scale: 1.0 }
    }

    pub fn linear_2d(kappa: Vec<f64>) -> Self {
        Self { id: CaseId::Linear, kappa, kind: Kind::Linear2d, scale: 1.0 }
    }

    /// Piecewise linear `u` with `κu' = 1` on the chain with breakpoints
    /// `breaks` (`K + 1` increasing values) and `u(breaks[0]) = 1`.
    pub fn linear_1d(kappa: Vec<f64>, breaks: &[f64]) -> Self {
        let mut base = vec![1.0];
        for k in 0..breaks.len() - 2 {
            let last = base[k];
            base.push(last + (breaks[k + 1] - breaks[k]) / kappa[k]);
        }
        let starts = breaks[..breaks.len() - 1].to_vec();
        Self { id: CaseId::Linear, kappa, kind: Kind::Linear1d { starts, base }, scale: 1.0 }
    }

    /// Segments meeting at a junction with conductances `kappa`, constant
    /// loads and zero outer values. The junction value follows from flux
    /// balance: `U·Σ κ_k/L_k = Σ f_k·L_k/2`.
    pub fn star(kappa: Vec<f64>, segments: Vec<FractureSegment>) -> Self {
        let num: f64 = segments.iter().map(|s| s.load * s.length() / 2.0).sum();
        let den: f64 = segments.iter().zip(&kappa).map(|(s, a)| a / s.length()).sum();
        let junction_value = num / den;
        Self { id: CaseId::ConstantLoads, kappa, kind: Kind::Star { segments, junction_value }, scale: 1.0 }
    }

    /// The same case with `u` (and hence `f`) multiplied by `c`.
    pub fn scaled(&self, c: f64) -> Self {
        Self { scale: self.scale * c, ..self.clone() }
    }

    pub fn kappa(&self, k: usize) -> f64 {
        self.kappa[k]
    }

    pub fn u(&self, k: usize, p: Point) -> f64 {
        let (x, y) = (p[0], p[1]);
        let v = match &self.kind {
            Kind::Zero => 0.0,
            Kind::Quadratic => x * (1.0 - x) / 2.0,
            Kind::Cubic => (x - x * x * x) / 6.0,
            Kind::SinSin => (PI * x).sin() * (PI * y).sin(),
            Kind::Linear2d => 1.0 + x + 2.0 * y,
            Kind::Linear1d { starts, base } => base[k] + (x - starts[k]) / self.kappa[k],
            Kind::Star { segments, junction_value } => {
                let s = &segments[k];
                let (l, a) = (s.length(), self.kappa[k]);
                let t = distance(p, s.junction);
                junction_value * (1.0 - t / l) + s.load * t * (l - t) / (2.0 * a)
            }
        };
        self.scale * v
    }

    pub fn grad(&self, k: usize, p: Point) -> Point {
        let (x, y) = (p[0], p[1]);
        let g = match &self.kind {
            Kind::Zero => [0.0, 0.0],
            Kind::Quadratic => [0.5 - x, 0.0],
            Kind::Cubic => [(1.0 - 3.0 * x * x) / 6.0, 0.0],
            Kind::SinSin => [
                PI * (PI * x).cos() * (PI * y).sin(),
                PI * (PI * x).sin() * (PI * y).cos(),
            ],
            Kind::Linear2d => [1.0, 2.0],
            Kind::Linear1d { .. } => [1.0 / self.kappa[k], 0.0],
            Kind::Star { segments, junction_value } => {
                let s = &segments[k];
                let (l, a) = (s.length(), self.kappa[k]);
                let t = distance(p, s.junction);
                let du = -junction_value / l + s.load * (l - 2.0 * t) / (2.0 * a);
                let d = s.direction();
                [du * d[0], du * d[1]]
            }
        };
        [self.scale * g[0], self.scale * g[1]]
    }

    /// `f = −∇·(κ∇u)` on subdomain `k`.
    pub fn source(&self, k: usize, p: Point) -> f64 {
        let (x, y) = (p[0], p[1]);
        let a = self.kappa[k];
        let v = match &self.kind {
            Kind::Zero | Kind::Linear2d | Kind::Linear1d { .. } => 0.0,
            Kind::Quadratic => a,
            Kind::Cubic => a * x,
            Kind::SinSin => 2.0 * PI * PI * a * (PI * x).sin() * (PI * y).sin(),
            Kind::Star { segments, .. } => segments[k].load,
        };
        self.scale * v
    }

    /// Conormal flux `κ∇u·n` of subdomain `k` at `p` for the normal `n`.
    pub fn flux(&self, k: usize, p: Point, n: Point) -> f64 {
        let g = self.grad(k, p);
        self.kappa[k] * (g[0] * n[0] + g[1] * n[1])
    }

    /// Outward junction fluxes `κ_k·∂u_k/∂n_k` of a star case.
    pub fn junction_fluxes(&self) -> Option<Vec<f64>> {
        match &self.kind {
            Kind::Star { segments, junction_value } => Some(
                segments
                    .iter()
                    .zip(&self.kappa)
                    .map(|(s, a)| self.scale * (a * junction_value / s.length() - s.load * s.length() / 2.0))
                    .collect(),
            ),
            _ => None,
        }
    }

    /// Junction value of a star case.
    pub fn junction_value(&self) -> Option<f64> {
        match &self.kind {
            Kind::Star { junction_value, .. } => Some(self.scale * junction_value),
            _ => None,
        }
    }
}
