//! Scalar controls `p(t)`, piecewise linear on a nondecreasing node list.
//!
//! A repeated node encodes a jump: the signal takes the left value up to the
//! node and the right value after it. Outside its support the signal is 0.

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct ControlSignal {
    nodes: Vec<f64>,
    values: Vec<f64>,
}

/// One linear piece `[t0, t1]` with end values `(p0, p1)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Segment {
    pub t0: f64,
    pub t1: f64,
    pub p0: f64,
    pub p1: f64,
}

impl Segment {
    pub fn len(&self) -> f64 {
        self.t1 - self.t0
    }

    pub fn at(&self, t: f64) -> f64 {
        let h = self.len();
        if h <= 0.0 {
            return self.p1;
        }
        let s = ((t - self.t0) / h).clamp(0.0, 1.0);
        self.p0 + s * (self.p1 - self.p0)
    }

    /// `int_a^b p` for `t0 <= a <= b <= t1`.
    pub fn integral(&self, a: f64, b: f64) -> f64 {
        0.5 * (b - a) * (self.at(a) + self.at(b))
    }
}

impl ControlSignal {
    pub fn new(nodes: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if nodes.len() != values.len() {
            return Err(Error::Dimension {
                expected: nodes.len(),
                got: values.len(),
            });
        }
        if nodes.len() < 2 {
            return Err(Error::Domain("a control needs at least two nodes".into()));
        }
        if nodes.iter().chain(&values).any(|v| !v.is_finite()) {
            return Err(Error::Domain(
                "control nodes and values must be finite".into(),
            ));
        }
        if nodes.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::Domain("control nodes must be nondecreasing".into()));
        }
        if nodes[nodes.len() - 1] <= nodes[0] {
            return Err(Error::Domain("control support has zero length".into()));
        }
        Ok(Self { nodes, values })
    }

    pub fn zero(t0: f64, t1: f64) -> Self {
        Self::constant(t0, t1, 0.0)
    }

    pub fn constant(t0: f64, t1: f64, c: f64) -> Self {
        Self::new(vec![t0, t1], vec![c, c]).expect("valid constant control")
    }

    /// Samples `f` on `n` uniform intervals of `[t0, t1]`.
    pub fn from_fn(t0: f64, t1: f64, n: usize, f: impl Fn(f64) -> f64) -> Self {
        let nodes: Vec<f64> = (0..=n)
            .map(|i| t0 + (t1 - t0) * i as f64 / n as f64)
            .collect();
        let values = nodes.iter().map(|t| f(*t)).collect();
        Self::new(nodes, values).expect("valid sampled control")
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn start(&self) -> f64 {
        self.nodes[0]
    }

    pub fn end(&self) -> f64 {
        self.nodes[self.nodes.len() - 1]
    }

    /// Pieces of positive length, in time order.
    pub fn segments(&self) -> impl Iterator<Item = Segment> + '_ {
        self.nodes
            .windows(2)
            .zip(self.values.windows(2))
            .filter(|(t, _)| t[1] > t[0])
            .map(|(t, p)| Segment {
                t0: t[0],
                t1: t[1],
                p0: p[0],
                p1: p[1],
            })
    }

    /// Linear pieces tiling `[t0, t1]`, with zero pieces where the signal
    /// is not supported.
    pub fn pieces(&self, t0: f64, t1: f64) -> Vec<Segment> {
        let mut out = Vec::new();
        let mut cursor = t0;
        for seg in self.segments() {
            let a = seg.t0.max(t0);
            let b = seg.t1.min(t1);
            if b <= a {
                continue;
            }
            if a > cursor {
                out.push(Segment {
                    t0: cursor,
                    t1: a,
                    p0: 0.0,
                    p1: 0.0,
                });
            }
            out.push(Segment {
                t0: a,
                t1: b,
                p0: seg.at(a),
                p1: seg.at(b),
            });
            cursor = b;
        }
        if t1 > cursor {
            out.push(Segment {
                t0: cursor,
                t1,
                p0: 0.0,
                p1: 0.0,
            });
        }
        out
    }

    /// Right-continuous evaluation; 0 outside the support.
    pub fn value_at(&self, t: f64) -> f64 {
        if t < self.start() || t > self.end() {
            return 0.0;
        }
        // last index with nodes[i] <= t
        let i = self.nodes.partition_point(|x| *x <= t);
        if i >= self.nodes.len() {
            return self.values[self.values.len() - 1];
        }
        let i0 = i - 1;
        let (t0, t1) = (self.nodes[i0], self.nodes[i]);
        let s = (t - t0) / (t1 - t0);
        self.values[i0] + s * (self.values[i] - self.values[i0])
    }

    /// Exact `int_a^b p(t) dt`.
    pub fn integral(&self, a: f64, b: f64) -> f64 {
        if b < a {
            return -self.integral(b, a);
        }
        let mut s = 0.0;
        for seg in self.segments() {
            let lo = seg.t0.max(a);
            let hi = seg.t1.min(b);
            if hi > lo {
                s += seg.integral(lo, hi);
            }
        }
        s
    }

    pub fn l2_norm_squared(&self) -> f64 {
        self.segments()
            .map(|g| g.len() / 3.0 * (g.p0 * g.p0 + g.p0 * g.p1 + g.p1 * g.p1))
            .sum()
    }

    pub fn l2_norm(&self) -> f64 {
        self.l2_norm_squared().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// The same signal on `[start + dt, end + dt]`.
    pub fn shifted(&self, dt: f64) -> Self {
        Self {
            nodes: self.nodes.iter().map(|t| t + dt).collect(),
            values: self.values.clone(),
        }
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self {
            nodes: self.nodes.clone(),
            values: self.values.iter().map(|v| c * v).collect(),
        }
    }

    /// Appends `next`, which must start at or after this signal's end. A gap
    /// is filled with zero.
    pub fn concat(&self, next: &ControlSignal) -> Result<Self> {
        let end = self.end();
        if next.start() < end - 1e-12 * end.abs().max(1.0) {
            return Err(Error::Domain(format!(
                "cannot append a control starting at {} to one ending at {end}",
                next.start()
            )));
        }
        let mut nodes = self.nodes.clone();
        let mut values = self.values.clone();
        if next.start() > end {
            nodes.extend([end, next.start()]);
            values.extend([0.0, 0.0]);
        }
        let start = end.max(next.start());
        nodes.push(start);
        values.push(next.values[0]);
        nodes.extend(next.nodes[1..].iter().map(|t| t.max(start)));
        values.extend_from_slice(&next.values[1..]);
        Self::new(nodes, values)
    }

    /// Extends by zero up to `t_end` (no-op if already longer).
    pub fn extended_to(&self, t_end: f64) -> Self {
        if t_end <= self.end() {
            return self.clone();
        }
        self.concat(&Self::zero(self.end(), t_end))
            .expect("zero tail")
    }

    /// Restriction to `[a, b]` within the support.
    pub fn restricted(&self, a: f64, b: f64) -> Result<Self> {
        let a = a.max(self.start());
        let b = b.min(self.end());
        if b <= a {
            return Err(Error::Domain(format!("empty restriction [{a}, {b}]")));
        }
        let mut nodes = vec![a];
        let mut values = vec![self.right_value(a)];
        for (t, v) in self.nodes.iter().zip(&self.values) {
            if *t > a && *t < b {
                nodes.push(*t);
                values.push(*v);
            }
        }
        nodes.push(b);
        values.push(self.left_value(b));
        Self::new(nodes, values)
    }

    fn right_value(&self, t: f64) -> f64 {
        self.value_at(t)
    }

    fn left_value(&self, t: f64) -> f64 {
        let i = self.nodes.partition_point(|x| *x < t);
        if i == 0 {
            return self.values[0];
        }
        if i >= self.nodes.len() {
            return self.values[self.values.len() - 1];
        }
        let (t0, t1) = (self.nodes[i - 1], self.nodes[i]);
        let s = (t - t0) / (t1 - t0);
        self.values[i - 1] + s * (self.values[i] - self.values[i - 1])
    }

    /// Samples `(t, p(t))` at every node (both sides of each jump).
    pub fn samples(&self) -> Vec<(f64, f64)> {
        self.nodes
            .iter()
            .copied()
            .zip(self.values.iter().copied())
            .collect()
    }
}
