use std::collections::HashMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::autodiff::{AdError, Scalar, Tape, Tensor, Var};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum Init {
    Zeros,
    Ones,
    /// Uniform on `[-b, b]`.
    Uniform(f32),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParamSpec {
    pub name: String,
    pub shape: Vec<usize>,
    pub offset: usize,
    pub init: Init,
}

impl ParamSpec {
    pub fn len(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Names, shapes and offsets of every parameter inside one flat vector.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ParamLayout {
    specs: Vec<ParamSpec>,
    index: HashMap<String, usize>,
    total: usize,
}

impl ParamLayout {
    pub fn new() -> Self {
        Self::default()
    }

    /// Appends a parameter. Panics on a duplicate name.
    pub fn push(&mut self, name: impl Into<String>, shape: Vec<usize>, init: Init) {
        let name = name.into();
        let spec = ParamSpec { name: name.clone(), offset: self.total, shape, init };
        self.total += spec.len();
        let prev = self.index.insert(name.clone(), self.specs.len());
        assert!(prev.is_none(), "duplicate parameter {name}");
        self.specs.push(spec);
    }

    /// A dense layer `[fan_in, fan_out]` plus bias, both uniform in
    /// `1/sqrt(fan_in)`.
    pub fn linear(&mut self, prefix: &str, fan_in: usize, fan_out: usize) {
        let b = 1.0 / (fan_in as f32).sqrt();
        self.push(format!("{prefix}.w"), vec![fan_in, fan_out], Init::Uniform(b));
        self.push(format!("{prefix}.b"), vec![1, fan_out], Init::Uniform(b));
    }

    pub fn total(&self) -> usize {
        self.total
    }

    pub fn specs(&self) -> &[ParamSpec] {
        &self.specs
    }

    pub fn get(&self, name: &str) -> Option<&ParamSpec> {
        self.index.get(name).map(|&i| &self.specs[i])
    }

    pub fn names_with_prefix<'a>(&'a self, prefix: &'a str) -> impl Iterator<Item = &'a str> + 'a {
        self.specs.iter().map(|s| s.name.as_str()).filter(move |n| n.starts_with(prefix))
    }

    pub fn set_init(&mut self, name: &str, init: Init) {
        let i = self.index[name];
        self.specs[i].init = init;
    }

    pub fn init<R: Rng>(&self, rng: &mut R) -> Vec<f32> {
        let mut data = Vec::with_capacity(self.total);
        for s in &self.specs {
            match s.init {
                Init::Zeros => data.extend(std::iter::repeat(0.0).take(s.len())),
                Init::Ones => data.extend(std::iter::repeat(1.0).take(s.len())),
                Init::Uniform(b) => data.extend((0..s.len()).map(|_| rng.random_range(-b..=b))),
            }
        }
        data
    }
}

/// Slices named parameters out of one flat tape leaf, once each.
pub struct Bound<'a> {
    pub flat: Var,
    layout: &'a ParamLayout,
    cache: HashMap<&'a str, Var>,
}

impl<'a> Bound<'a> {
    pub fn new(flat: Var, layout: &'a ParamLayout) -> Self {
        Self { flat, layout, cache: HashMap::new() }
    }

    /// Records `values` as a differentiable leaf.
    pub fn param<T: Scalar>(tape: &mut Tape<T>, layout: &'a ParamLayout, values: &[f32]) -> Result<Self, AdError> {
        let data = values.iter().map(|&v| T::from_f32(v).unwrap()).collect();
        let flat = tape.param(Tensor::new(vec![values.len()], data)?)?;
        Ok(Self::new(flat, layout))
    }

    /// Records `values` without gradient tracking.
    pub fn constant<T: Scalar>(tape: &mut Tape<T>, layout: &'a ParamLayout, values: &[f32]) -> Result<Self, AdError> {
        let data = values.iter().map(|&v| T::from_f32(v).unwrap()).collect();
        let flat = tape.constant(Tensor::new(vec![values.len()], data)?)?;
        Ok(Self::new(flat, layout))
    }

    pub fn layout(&self) -> &'a ParamLayout {
        self.layout
    }

    pub fn get<T: Scalar>(&mut self, tape: &mut Tape<T>, name: &str) -> Result<Var, AdError> {
        let spec = self.layout.get(name).unwrap_or_else(|| panic!("unknown parameter {name}"));
        if let Some(&v) = self.cache.get(spec.name.as_str()) {
            return Ok(v);
        }
        let v = tape.slice(self.flat, spec.offset, spec.shape.clone())?;
        self.cache.insert(spec.name.as_str(), v);
        Ok(v)
    }

    /// `x W + b` for the dense layer `prefix`.
    pub fn linear<T: Scalar>(&mut self, tape: &mut Tape<T>, prefix: &str, x: Var) -> Result<Var, AdError> {
        let w = self.get(tape, &format!("{prefix}.w"))?;
        let b = self.get(tape, &format!("{prefix}.b"))?;
        let y = tape.matmul(x, w)?;
        tape.add_row(y, b)
    }

    /// Dense layers `prefix.0 .. prefix.{n-1}` with ReLU between them.
    pub fn mlp<T: Scalar>(&mut self, tape: &mut Tape<T>, prefix: &str, n: usize, x: Var) -> Result<Var, AdError> {
        let mut h = x;
        for i in 0..n {
            h = self.linear(tape, &format!("{prefix}.{i}"), h)?;
            if i + 1 < n {
                h = tape.relu(h)?;
            }
        }
        Ok(h)
    }
}
