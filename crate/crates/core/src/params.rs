use std::ops::{Deref, DerefMut, Range};

/// Flat parameter vector holding one agent's copy of the joint-policy parameters.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ParamVector(Vec<f64>);

impl ParamVector {
    pub fn zeros(dim: usize) -> Self {
        Self(vec![0.0; dim])
    }

    pub fn from_vec(values: Vec<f64>) -> Self {
        Self(values)
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|x| x.is_finite())
    }

    /// `self += scale * other`
    pub fn axpy(&mut self, scale: f64, other: &[f64]) {
        debug_assert_eq!(self.0.len(), other.len());
        for (x, o) in self.0.iter_mut().zip(other) {
            *x += scale * o;
        }
    }

    pub fn scale(&mut self, factor: f64) {
        for x in &mut self.0 {
            *x *= factor;
        }
    }

    pub fn norm_sq(&self) -> f64 {
        self.0.iter().map(|x| x * x).sum()
    }

    pub fn dot(&self, other: &[f64]) -> f64 {
        self.0.iter().zip(other).map(|(a, b)| a * b).sum()
    }
}

impl Deref for ParamVector {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl DerefMut for ParamVector {
    fn deref_mut(&mut self) -> &mut [f64] {
        &mut self.0
    }
}

impl From<Vec<f64>> for ParamVector {
    fn from(v: Vec<f64>) -> Self {
        Self(v)
    }
}

/// Maps contiguous slices of a [`ParamVector`] to per-agent sub-policies.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamLayout {
    agent_ranges: Vec<Range<usize>>,
}

impl ParamLayout {
    pub fn from_sizes(sizes: &[usize]) -> Self {
        let mut start = 0;
        let agent_ranges = sizes
            .iter()
            .map(|&len| {
                let r = start..start + len;
                start += len;
                r
            })
            .collect();
        Self { agent_ranges }
    }

    pub fn dim(&self) -> usize {
        self.agent_ranges.last().map_or(0, |r| r.end)
    }

    pub fn n_agents(&self) -> usize {
        self.agent_ranges.len()
    }

    pub fn agent(&self, i: usize) -> Range<usize> {
        self.agent_ranges[i].clone()
    }
}

/// Network average of a stack of equally sized vectors.
pub fn mean_of(stack: &[ParamVector]) -> ParamVector {
    // Shifted by the first vector so identical stacks average to themselves exactly.
    let Some(first) = stack.first() else {
        return ParamVector::zeros(0);
    };
    let mut shift = ParamVector::zeros(first.len());
    for v in &stack[1..] {
        for ((s, x), f) in shift.iter_mut().zip(v.iter()).zip(first.iter()) {
            *s += x - f;
        }
    }
    let n = stack.len() as f64;
    first.iter().zip(shift.iter()).map(|(f, s)| f + s / n).collect::<Vec<_>>().into()
}

/// `‖x − 1 x̄‖²` for a stack of agent vectors.
pub fn disagreement_sq(stack: &[ParamVector]) -> f64 {
    if stack.is_empty() {
        return 0.0;
    }
    let mean = mean_of(stack);
    stack
        .iter()
        .map(|v| v.iter().zip(mean.iter()).map(|(a, m)| (a - m) * (a - m)).sum::<f64>())
        .sum()
}
