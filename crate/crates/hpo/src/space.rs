//! Conditional parameter trees and flat configurations.

use std::collections::BTreeMap;
use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::{HpoError, Result};

/// Largest quantization lattice a `QUniform` may span.
pub const MAX_LATTICE: usize = 100_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Value {
    Int(i64),
    Float(f64),
    Str(String),
}

impl Value {
    pub fn as_f64(&self) -> Option<f64> {
        match self {
            Self::Int(i) => Some(*i as f64),
            Self::Float(f) => Some(*f),
            Self::Str(_) => None,
        }
    }

    pub fn as_str(&self) -> Option<&str> {
        match self {
            Self::Str(s) => Some(s),
            _ => None,
        }
    }

    pub fn as_i64(&self) -> Option<i64> {
        match self {
            Self::Int(i) => Some(*i),
            Self::Float(f) if f.fract() == 0.0 => Some(*f as i64),
            _ => None,
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Int(i) => write!(f, "{i}"),
            Self::Float(x) => write!(f, "{x}"),
            Self::Str(s) => f.write_str(s),
        }
    }
}

impl From<&str> for Value {
    fn from(s: &str) -> Self {
        Self::Str(s.to_string())
    }
}

impl From<i64> for Value {
    fn from(i: i64) -> Self {
        Self::Int(i)
    }
}

impl From<f64> for Value {
    fn from(x: f64) -> Self {
        Self::Float(x)
    }
}

/// Flat assignment of path keys to values.
pub type Configuration = BTreeMap<String, Value>;

#[derive(Debug, Clone, PartialEq)]
pub struct ChoiceOption {
    pub value: Value,
    /// Parameters active only when this option is chosen.
    pub subspace: Vec<ParamSpec>,
}

impl ChoiceOption {
    pub fn leaf(value: impl Into<Value>) -> Self {
        Self {
            value: value.into(),
            subspace: Vec::new(),
        }
    }

    /// Prefix for keys of the nested parameters.
    pub fn label(&self) -> String {
        self.value.to_string()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ParamSpec {
    Choice { name: String, options: Vec<ChoiceOption> },
    Uniform { name: String, lo: f64, hi: f64 },
    /// Uniform on `[lo, hi]` rounded to the nearest multiple of `q`, then
    /// clamped.
    QUniform { name: String, lo: f64, hi: f64, q: f64 },
}

impl ParamSpec {
    pub fn choice(name: &str, options: Vec<ChoiceOption>) -> Self {
        Self::Choice {
            name: name.to_string(),
            options,
        }
    }

    /// Choice of plain values with no nested parameters.
    pub fn choice_of<V: Into<Value>>(name: &str, values: impl IntoIterator<Item = V>) -> Self {
        Self::choice(name, values.into_iter().map(ChoiceOption::leaf).collect())
    }

    pub fn uniform(name: &str, lo: f64, hi: f64) -> Self {
        Self::Uniform {
            name: name.to_string(),
            lo,
            hi,
        }
    }

    pub fn quniform(name: &str, lo: f64, hi: f64, q: f64) -> Self {
        Self::QUniform {
            name: name.to_string(),
            lo,
            hi,
            q,
        }
    }

    pub fn name(&self) -> &str {
        match self {
            Self::Choice { name, .. } | Self::Uniform { name, .. } | Self::QUniform { name, .. } => name,
        }
    }

    /// Every value a `QUniform` can take, ascending.
    pub fn lattice(&self) -> Vec<f64> {
        match *self {
            Self::QUniform { lo, hi, q, .. } => {
                let (first, last) = ((lo / q).round() as i64, (hi / q).round() as i64);
                let mut out: Vec<f64> = (first..=last).map(|k| (k as f64 * q).clamp(lo, hi)).collect();
                out.dedup();
                out
            }
            _ => Vec::new(),
        }
    }

    /// Rounds onto the lattice and converts to the value type (integers
    /// when `lo` and `q` are integral).
    pub fn quantize(&self, x: f64) -> Value {
        match *self {
            Self::QUniform { lo, hi, q, .. } => {
                let v = ((x / q).round() * q).clamp(lo, hi);
                if q.fract() == 0.0 && lo.fract() == 0.0 && hi.fract() == 0.0 {
                    Value::Int(v.round() as i64)
                } else {
                    Value::Float(v)
                }
            }
            _ => Value::Float(x),
        }
    }

    fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(HpoError::InvalidSpace(format!("`{}`: {m}", self.name())));
        match self {
            Self::Choice { options, .. } => {
                if options.is_empty() {
                    return bad("choice needs at least one option".into());
                }
                for (i, o) in options.iter().enumerate() {
                    if options[..i].iter().any(|p| p.value == o.value) {
                        return bad(format!("duplicate option {}", o.value));
                    }
                }
            }
            Self::Uniform { lo, hi, .. } => {
                if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                    return bad("needs finite lo < hi".into());
                }
            }
            Self::QUniform { lo, hi, q, .. } => {
                if !(lo.is_finite() && hi.is_finite() && lo < hi && *q > 0.0) {
                    return bad("needs finite lo < hi and q > 0".into());
                }
                if (hi - lo) / q > MAX_LATTICE as f64 {
                    return bad("quantization lattice too large".into());
                }
            }
        }
        Ok(())
    }

    /// Whether `v` is a value this spec can produce.
    pub fn contains(&self, v: &Value) -> bool {
        match self {
            Self::Choice { options, .. } => options.iter().any(|o| &o.value == v),
            Self::Uniform { lo, hi, .. } => matches!(v, Value::Float(x) if (*lo..=*hi).contains(x)),
            Self::QUniform { .. } => v.as_f64().is_some_and(|x| {
                std::mem::discriminant(v) == std::mem::discriminant(&self.quantize(x)) && self.lattice().contains(&x)
            }),
        }
    }
}

/// A forest of parameter trees (usually a single root `model` choice).
#[derive(Debug, Clone, PartialEq)]
pub struct SearchSpace {
    pub params: Vec<ParamSpec>,
}

fn child_prefix(prefix: &str, option: &ChoiceOption) -> String {
    format!("{prefix}{}.", option.label())
}

impl SearchSpace {
    pub fn new(params: Vec<ParamSpec>) -> Result<Self> {
        let s = Self { params };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        fn walk(params: &[ParamSpec], prefix: &str, seen: &mut Vec<String>) -> Result<()> {
            for p in params {
                p.validate()?;
                let key = format!("{prefix}{}", p.name());
                if seen.contains(&key) {
                    return Err(HpoError::InvalidSpace(format!("duplicate key `{key}`")));
                }
                seen.push(key);
                if let ParamSpec::Choice { options, .. } = p {
                    for o in options {
                        walk(&o.subspace, &child_prefix(prefix, o), seen)?;
                    }
                }
            }
            Ok(())
        }
        walk(&self.params, "", &mut Vec::new())
    }

    /// Draws a configuration by walking from the roots; only chosen
    /// branches are instantiated.
    pub fn sample_random(&self, rng: &mut impl Rng) -> Configuration {
        fn walk(params: &[ParamSpec], prefix: &str, rng: &mut impl Rng, out: &mut Configuration) {
            for p in params {
                let key = format!("{prefix}{}", p.name());
                match p {
                    ParamSpec::Choice { options, .. } => {
                        let o = &options[rng.random_range(0..options.len())];
                        out.insert(key, o.value.clone());
                        walk(&o.subspace, &child_prefix(prefix, o), rng, out);
                    }
                    ParamSpec::Uniform { lo, hi, .. } => {
                        out.insert(key, Value::Float(rng.random_range(*lo..*hi)));
                    }
                    ParamSpec::QUniform { lo, hi, .. } => {
                        let x = rng.random_range(*lo..=*hi);
                        out.insert(key, p.quantize(x));
                    }
                }
            }
        }
        let mut out = Configuration::new();
        walk(&self.params, "", rng, &mut out);
        out
    }

    /// Checks bounds, lattices and that exactly the active keys are set.
    pub fn check(&self, config: &Configuration) -> Result<()> {
        fn walk(params: &[ParamSpec], prefix: &str, config: &Configuration, used: &mut usize) -> Result<()> {
            for p in params {
                let key = format!("{prefix}{}", p.name());
                let v = config
                    .get(&key)
                    .ok_or_else(|| HpoError::InvalidConfig(format!("missing `{key}`")))?;
                *used += 1;
                if !p.contains(v) {
                    return Err(HpoError::OutOfDomain {
                        key,
                        value: v.to_string(),
                    });
                }
                if let ParamSpec::Choice { options, .. } = p {
                    let o = options.iter().find(|o| &o.value == v).expect("contains checked");
                    walk(&o.subspace, &child_prefix(prefix, o), config, used)?;
                }
            }
            Ok(())
        }
        let mut used = 0;
        walk(&self.params, "", config, &mut used)?;
        if used != config.len() {
            return Err(HpoError::InvalidConfig("configuration has keys from inactive branches".into()));
        }
        Ok(())
    }

    /// Every `(key, spec)` pair in the tree, depth first.
    pub fn keys(&self) -> Vec<(String, &ParamSpec)> {
        fn walk<'a>(params: &'a [ParamSpec], prefix: &str, out: &mut Vec<(String, &'a ParamSpec)>) {
            for p in params {
                out.push((format!("{prefix}{}", p.name()), p));
                if let ParamSpec::Choice { options, .. } = p {
                    for o in options {
                        walk(&o.subspace, &child_prefix(prefix, o), out);
                    }
                }
            }
        }
        let mut out = Vec::new();
        walk(&self.params, "", &mut out);
        out
    }

    fn find_mut(&mut self, key: &str) -> Option<&mut ParamSpec> {
        fn walk<'a>(params: &'a mut [ParamSpec], prefix: &str, key: &str) -> Option<&'a mut ParamSpec> {
            for p in params.iter_mut() {
                if format!("{prefix}{}", p.name()) == key {
                    return Some(p);
                }
                if let ParamSpec::Choice { options, .. } = p {
                    for o in options.iter_mut() {
                        let child = child_prefix(prefix, o);
                        if key.starts_with(&child) {
                            if let Some(found) = walk(&mut o.subspace, &child, key) {
                                return Some(found);
                            }
                        }
                    }
                }
            }
            None
        }
        walk(&mut self.params, "", key)
    }

    /// Keeps only the listed options of the choice at `key`, in their
    /// original order.
    pub fn restrict(&mut self, key: &str, allowed: &[Value]) -> Result<()> {
        let p = self
            .find_mut(key)
            .ok_or_else(|| HpoError::InvalidSpace(format!("unknown parameter `{key}`")))?;
        let ParamSpec::Choice { options, .. } = p else {
            return Err(HpoError::InvalidSpace(format!("`{key}` is not a choice")));
        };
        if let Some(v) = allowed.iter().find(|v| !options.iter().any(|o| &o.value == *v)) {
            return Err(HpoError::OutOfDomain {
                key: key.to_string(),
                value: v.to_string(),
            });
        }
        options.retain(|o| allowed.contains(&o.value));
        self.validate()
    }

    /// Replaces the parameter at `key` by a one-option choice.
    pub fn fix(&mut self, key: &str, value: Value) -> Result<()> {
        let p = self
            .find_mut(key)
            .ok_or_else(|| HpoError::InvalidSpace(format!("unknown parameter `{key}`")))?;
        match p {
            ParamSpec::Choice { .. } => return self.restrict(key, &[value]),
            ParamSpec::Uniform { lo, hi, .. } => {
                if !value.as_f64().is_some_and(|x| (*lo..=*hi).contains(&x)) {
                    return Err(HpoError::OutOfDomain {
                        key: key.to_string(),
                        value: value.to_string(),
                    });
                }
            }
            ParamSpec::QUniform { .. } => {
                if !value.as_f64().is_some_and(|x| p.contains(&p.quantize(x))) {
                    return Err(HpoError::OutOfDomain {
                        key: key.to_string(),
                        value: value.to_string(),
                    });
                }
            }
        }
        let value = match (&*p, value) {
            (ParamSpec::Uniform { .. }, v) => Value::Float(v.as_f64().expect("checked")),
            (q @ ParamSpec::QUniform { .. }, v) => q.quantize(v.as_f64().expect("checked")),
            (_, v) => v,
        };
        let name = p.name().to_string();
        *p = ParamSpec::choice(&name, vec![ChoiceOption::leaf(value)]);
        Ok(())
    }
}
