use std::io::{BufRead, Write};

use crate::tensor::Tensor;
use crate::{NnError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ParamId(pub usize);

/// Named trainable tensors, addressed by [`ParamId`].
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ParamStore {
    names: Vec<String>,
    tensors: Vec<Tensor>,
}

const FORMAT_HEADER: &str = "nilm-params v1";

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, name: impl Into<String>, value: Tensor) -> ParamId {
        self.names.push(name.into());
        self.tensors.push(value);
        ParamId(self.tensors.len() - 1)
    }

    pub fn get(&self, id: ParamId) -> &Tensor {
        &self.tensors[id.0]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Tensor {
        &mut self.tensors[id.0]
    }

    pub fn name(&self, id: ParamId) -> &str {
        &self.names[id.0]
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    pub fn ids(&self) -> impl Iterator<Item = ParamId> {
        (0..self.tensors.len()).map(ParamId)
    }

    pub fn tensors(&self) -> &[Tensor] {
        &self.tensors
    }

    /// Total number of scalar parameters.
    pub fn num_scalars(&self) -> usize {
        self.tensors.iter().map(Tensor::len).sum()
    }

    /// Text format: a header line, the parameter count, one
    /// `name rank dims...` line per tensor, then every value in row-major
    /// order, one per line, in shortest round-trip notation.
    pub fn write_text(&self, mut w: impl Write) -> std::io::Result<()> {
        writeln!(w, "{FORMAT_HEADER}")?;
        writeln!(w, "{}", self.tensors.len())?;
        for (name, t) in self.names.iter().zip(&self.tensors) {
            write!(w, "{} {}", name, t.shape().len())?;
            for d in t.shape() {
                write!(w, " {d}")?;
            }
            writeln!(w)?;
        }
        for t in &self.tensors {
            for v in t.data() {
                writeln!(w, "{v}")?;
            }
        }
        Ok(())
    }

    pub fn read_text(r: impl BufRead) -> Result<Self> {
        let bad = |line: usize, what: &str| NnError::Format(format!("line {line}: {what}"));
        let mut lines = r.lines().enumerate().map(|(i, l)| (i + 1, l));
        let mut next = || -> Result<(usize, String)> {
            match lines.next() {
                Some((i, Ok(l))) => Ok((i, l)),
                Some((i, Err(e))) => Err(bad(i, &e.to_string())),
                None => Err(NnError::Format("unexpected end of file".into())),
            }
        };
        let (i, header) = next()?;
        if header.trim() != FORMAT_HEADER {
            return Err(bad(i, "unsupported header"));
        }
        let (i, count) = next()?;
        let count: usize = count.trim().parse().map_err(|_| bad(i, "bad parameter count"))?;
        let mut table = Vec::with_capacity(count);
        for _ in 0..count {
            let (i, line) = next()?;
            let mut parts = line.split_whitespace();
            let name = parts.next().ok_or_else(|| bad(i, "missing name"))?.to_string();
            let dims: Vec<usize> = parts
                .map(|p| p.parse().map_err(|_| bad(i, "bad dimension")))
                .collect::<Result<_>>()?;
            match dims.split_first() {
                Some((&rank, shape)) if rank == shape.len() => table.push((name, shape.to_vec())),
                _ => return Err(bad(i, "rank does not match dimensions")),
            }
        }
        let mut store = ParamStore::new();
        for (name, shape) in table {
            let n: usize = shape.iter().product();
            let mut data = Vec::with_capacity(n);
            for _ in 0..n {
                let (i, line) = next()?;
                let v: f64 = line.trim().parse().map_err(|_| bad(i, "bad value"))?;
                data.push(v);
            }
            store.add(name, Tensor::new(shape, data)?);
        }
        Ok(store)
    }
}

/// One gradient tensor per parameter, same shapes as the store.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients(pub(crate) Vec<Tensor>);

impl Gradients {
    pub fn zeros_like(store: &ParamStore) -> Self {
        Self(store.tensors().iter().map(|t| Tensor::zeros(t.shape())).collect())
    }

    pub fn get(&self, id: ParamId) -> &Tensor {
        &self.0[id.0]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Tensor {
        &mut self.0[id.0]
    }

    pub fn tensors(&self) -> &[Tensor] {
        &self.0
    }

    pub fn global_norm(&self) -> f64 {
        self.0.iter().flat_map(|t| t.data()).map(|g| g * g).sum::<f64>().sqrt()
    }

    pub fn scale(&mut self, factor: f64) {
        for v in self.0.iter_mut().flat_map(|t| t.data_mut()) {
            *v *= factor;
        }
    }
}
