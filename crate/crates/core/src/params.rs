//! Flat parameter vectors with a recorded per-model layout.

use serde::{Deserialize, Serialize};

use crate::error::{shape_err, PiError, Result};
use crate::scalar::Real;

/// Anything with an ordered list of trainable scalars.
pub trait Parameterized<T> {
    fn param_count(&self) -> usize;
    /// Writes the parameters into `out`, which has length `param_count()`.
    fn write_params(&self, out: &mut [T]);
    /// Overwrites the parameters from `src`, which has length `param_count()`.
    fn read_params(&mut self, src: &[T]);
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Segment {
    pub id: String,
    pub offset: usize,
    pub len: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamVector<T> {
    layout: Vec<Segment>,
    values: Vec<T>,
}

impl<T: Real> ParamVector<T> {
    pub fn from_parts(layout: Vec<Segment>, values: Vec<T>) -> Result<Self> {
        let mut next = 0;
        for s in &layout {
            if s.offset != next {
                return shape_err(format!("segment {} starts at {} but expected {next}", s.id, s.offset));
            }
            next += s.len;
        }
        if next != values.len() {
            return shape_err(format!("layout covers {next} values but {} were given", values.len()));
        }
        Ok(Self { layout, values })
    }

    /// Same layout, all values zero.
    pub fn zeros_like(&self) -> Self {
        Self { layout: self.layout.clone(), values: vec![T::zero(); self.values.len()] }
    }

    pub fn layout(&self) -> &[Segment] {
        &self.layout
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [T] {
        &mut self.values
    }

    pub fn find(&self, id: &str) -> Option<&Segment> {
        self.layout.iter().find(|s| s.id == id)
    }

    pub fn segment(&self, id: &str) -> Option<&[T]> {
        self.find(id).map(|s| &self.values[s.offset..s.offset + s.len])
    }

    pub fn segment_mut(&mut self, id: &str) -> Option<&mut [T]> {
        let s = self.find(id)?.clone();
        Some(&mut self.values[s.offset..s.offset + s.len])
    }

    pub fn same_layout(&self, other: &Self) -> bool {
        self.layout == other.layout
    }
}

/// Concatenates the parameters of `models` in order.
pub fn pack_params<T: Real>(models: &[(&str, &dyn Parameterized<T>)]) -> ParamVector<T> {
    let mut layout = Vec::with_capacity(models.len());
    let mut values = Vec::new();
    for (id, model) in models {
        let offset = values.len();
        let len = model.param_count();
        values.resize(offset + len, T::zero());
        model.write_params(&mut values[offset..]);
        layout.push(Segment { id: (*id).to_string(), offset, len });
    }
    ParamVector { layout, values }
}

/// Overwrites each model from its segment of `pv`.
pub fn unpack_params<T: Real>(pv: &ParamVector<T>, models: &mut [(&str, &mut dyn Parameterized<T>)]) -> Result<()> {
    if pv.layout.len() != models.len() {
        return shape_err(format!("layout has {} segments for {} models", pv.layout.len(), models.len()));
    }
    let total: usize = models.iter().map(|(_, m)| m.param_count()).sum();
    if total != pv.values.len() {
        return shape_err(format!("parameter vector has {} values, models need {total}", pv.values.len()));
    }
    for (seg, (id, model)) in pv.layout.iter().zip(models.iter()) {
        if seg.id != *id || seg.len != model.param_count() {
            return Err(PiError::Shape(format!(
                "segment {}({}) does not match model {id}({})",
                seg.id,
                seg.len,
                model.param_count()
            )));
        }
    }
    for (seg, (_, model)) in pv.layout.iter().zip(models.iter_mut()) {
        model.read_params(&pv.values[seg.offset..seg.offset + seg.len]);
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Plain(Vec<f64>);

    impl Parameterized<f64> for Plain {
        fn param_count(&self) -> usize {
            self.0.len()
        }
        fn write_params(&self, out: &mut [f64]) {
            out[..self.0.len()].copy_from_slice(&self.0);
        }
        fn read_params(&mut self, src: &[f64]) {
            self.0.copy_from_slice(src);
        }
    }

    #[test]
    fn pack_concatenates() {
        let a = Plain(vec![1.0, 2.0, 3.0]);
        let b = Plain(vec![4.0, 5.0]);
        let pv = pack_params(&[("a", &a), ("b", &b)]);
        assert_eq!(pv.values(), &[1.0, 2.0, 3.0, 4.0, 5.0]);
        assert_eq!(pv.layout()[0], Segment { id: "a".into(), offset: 0, len: 3 });
        assert_eq!(pv.layout()[1], Segment { id: "b".into(), offset: 3, len: 2 });
        assert!(pack_params::<f64>(&[]).is_empty());
    }

    #[test]
    fn unpack_segment_disjointness_and_errors() {
        let mut a = Plain(vec![1.0, 2.0, 3.0]);
        let mut b = Plain(vec![4.0, 5.0]);
        let mut pv = pack_params(&[("a", &a), ("b", &b)]);
        pv.segment_mut("b").unwrap()[0] = 9.0;
        unpack_params(&pv, &mut [("a", &mut a), ("b", &mut b)]).unwrap();
        assert_eq!(a.0, vec![1.0, 2.0, 3.0]);
        assert_eq!(b.0, vec![9.0, 5.0]);

        let short = ParamVector::from_parts(vec![Segment { id: "a".into(), offset: 0, len: 3 }], vec![0.0; 3]).unwrap();
        assert!(matches!(unpack_params(&short, &mut [("a", &mut a), ("b", &mut b)]), Err(PiError::Shape(_))));
        let wrong_len = ParamVector::from_parts(
            vec![Segment { id: "a".into(), offset: 0, len: 2 }, Segment { id: "b".into(), offset: 2, len: 2 }],
            vec![0.0; 4],
        )
        .unwrap();
        assert!(unpack_params(&wrong_len, &mut [("a", &mut a), ("b", &mut b)]).is_err());
        assert!(ParamVector::from_parts(vec![Segment { id: "a".into(), offset: 1, len: 2 }], vec![0.0; 3]).is_err());
    }

    proptest::proptest! {
        #[test]
        fn pack_unpack_round_trip(xs in proptest::collection::vec(-1e6f64..1e6, 0..20), split in 0usize..20) {
            let split = split.min(xs.len());
            let mut a = Plain(xs[..split].to_vec());
            let mut b = Plain(xs[split..].to_vec());
            let pv = pack_params(&[("a", &a), ("b", &b)]);
            unpack_params(&pv, &mut [("a", &mut a), ("b", &mut b)]).unwrap();
            let again = pack_params(&[("a", &a), ("b", &b)]);
            proptest::prop_assert_eq!(pv, again);
        }
    }
}
