//! Flat parameter storage with named, shaped views.

use super::Scalar;
use std::sync::Arc;

/// Handle to one named array inside a [`ParamSet`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ParamId(usize);

#[derive(Debug, Clone, PartialEq)]
pub struct ParamSpec {
    pub name: String,
    pub shape: Vec<usize>,
    pub offset: usize,
    pub len: usize,
}

/// Registration-ordered arrays; the order fixes initialization and
/// checkpoint layout.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamLayout {
    specs: Vec<ParamSpec>,
    total: usize,
}

impl ParamLayout {
    pub fn builder() -> ParamLayoutBuilder {
        ParamLayoutBuilder {
            specs: Vec::new(),
            total: 0,
        }
    }

    pub fn total(&self) -> usize {
        self.total
    }

    pub fn specs(&self) -> &[ParamSpec] {
        &self.specs
    }

    pub fn spec(&self, id: ParamId) -> &ParamSpec {
        &self.specs[id.0]
    }

    pub fn slice_of<'a, F>(&self, data: &'a [F], id: ParamId) -> &'a [F] {
        let s = &self.specs[id.0];
        &data[s.offset..s.offset + s.len]
    }

    pub fn slice_of_mut<'a, F>(&self, data: &'a mut [F], id: ParamId) -> &'a mut [F] {
        let s = &self.specs[id.0];
        &mut data[s.offset..s.offset + s.len]
    }
}

pub struct ParamLayoutBuilder {
    specs: Vec<ParamSpec>,
    total: usize,
}

impl ParamLayoutBuilder {
    pub fn add(&mut self, name: impl Into<String>, shape: &[usize]) -> ParamId {
        let len: usize = shape.iter().product();
        let spec = ParamSpec {
            name: name.into(),
            shape: shape.to_vec(),
            offset: self.total,
            len,
        };
        self.total += len;
        self.specs.push(spec);
        ParamId(self.specs.len() - 1)
    }

    pub fn build(self) -> Arc<ParamLayout> {
        Arc::new(ParamLayout {
            specs: self.specs,
            total: self.total,
        })
    }
}

/// All trainable values of one model.
#[derive(Debug, Clone)]
pub struct ParamSet<F> {
    pub layout: Arc<ParamLayout>,
    pub data: Vec<F>,
}

impl<F: Scalar> ParamSet<F> {
    pub fn zeros(layout: Arc<ParamLayout>) -> Self {
        ParamSet {
            data: vec![F::ZERO; layout.total()],
            layout,
        }
    }

    pub fn get(&self, id: ParamId) -> &[F] {
        self.layout.slice_of(&self.data, id)
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut [F] {
        let s = self.layout.spec(id);
        let (offset, len) = (s.offset, s.len);
        &mut self.data[offset..offset + len]
    }

    /// Element-wise cast, preserving the layout. Used by the gradient-check
    /// harness to lift `f32` models into `f64`.
    pub fn cast<G: Scalar>(&self) -> ParamSet<G> {
        ParamSet {
            layout: self.layout.clone(),
            data: self.data.iter().map(|v| G::from_f64(v.to_f64())).collect(),
        }
    }

    pub fn grad_buffer(&self) -> Vec<F> {
        vec![F::ZERO; self.data.len()]
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn offsets_and_shapes() {
        let mut b = ParamLayout::builder();
        let a = b.add("a", &[2, 3]);
        let c = b.add("c", &[4]);
        let layout = b.build();
        assert_eq!(layout.total(), 10);
        assert_eq!(layout.spec(a).offset, 0);
        assert_eq!(layout.spec(c).offset, 6);
        let mut ps = ParamSet::<f32>::zeros(layout);
        ps.get_mut(c)[0] = 1.5;
        assert_eq!(ps.data[6], 1.5);
        let cast: ParamSet<f64> = ps.cast();
        assert_eq!(cast.get(c)[0], 1.5);
    }
}
