//! Dense tensors and interval tensors.
//!
//! A [`Tensor`] is a row-major array of `f64` with an explicit shape. An
//! [`IntervalTensor`] is an axis-aligned box stored in center/radius form,
//! which keeps the affine image of a box cheap: the center moves like a point
//! and the radius moves through the absolute weights.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Row-major array of `f64` with an explicit shape. Data is always finite.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawTensor")]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f64>,
}

/// Serde-facing mirror of [`Tensor`]; validation happens in `try_from`.
#[derive(Deserialize)]
struct RawTensor {
    shape: Vec<usize>,
    data: Vec<f64>,
}

impl TryFrom<RawTensor> for Tensor {
    type Error = Error;

    fn try_from(raw: RawTensor) -> Result<Tensor> {
        Tensor::new(raw.shape, raw.data)
    }
}

impl Tensor {
    /// Builds a tensor, checking that `data.len()` matches the shape product
    /// and that every entry is finite.
    pub fn new(shape: Vec<usize>, data: Vec<f64>) -> Result<Tensor> {
        let expect: usize = shape.iter().product();
        if expect != data.len() {
            return Err(Error::shape("tensor data length", &shape, &[data.len()]));
        }
        if !data.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite("tensor data".into()));
        }
        Ok(Tensor { shape, data })
    }

    /// 1-D tensor from a slice.
    pub fn vector(data: &[f64]) -> Result<Tensor> {
        Tensor::new(vec![data.len()], data.to_vec())
    }

    #[must_use]
    pub fn zeros(shape: Vec<usize>) -> Tensor {
        let len = shape.iter().product();
        Tensor {
            shape,
            data: vec![0.0; len],
        }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    /// Same data under a new shape. The element count must not change.
    pub fn reshape(&self, shape: Vec<usize>) -> Result<Tensor> {
        let expect: usize = shape.iter().product();
        if expect != self.data.len() {
            return Err(Error::shape("reshape", &shape, &self.shape));
        }
        Ok(Tensor {
            shape,
            data: self.data.clone(),
        })
    }

    /// Entrywise map. The result must stay finite; callers only pass maps
    /// that preserve finiteness (relu, abs, scaling by finite factors).
    #[must_use]
    pub fn map(&self, f: impl Fn(f64) -> f64) -> Tensor {
        Tensor {
            shape: self.shape.clone(),
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    /// Entrywise max(0, x).
    #[must_use]
    pub fn relu(&self) -> Tensor {
        self.map(|v| v.max(0.0))
    }

    /// Point on the segment from `a` to `b` at parameter `t`.
    pub fn lerp(a: &Tensor, b: &Tensor, t: f64) -> Result<Tensor> {
        let data = zip_data("lerp", a, b)?
            .map(|(x, y)| x + t * (y - x))
            .collect();
        Ok(Tensor {
            shape: a.shape.clone(),
            data,
        })
    }

    pub fn dot(a: &Tensor, b: &Tensor) -> Result<f64> {
        Ok(zip_data("dot", a, b)?.map(|(x, y)| x * y).sum())
    }

    pub fn sub(a: &Tensor, b: &Tensor) -> Result<Tensor> {
        let data = zip_data("sub", a, b)?.map(|(x, y)| x - y).collect();
        Ok(Tensor {
            shape: a.shape.clone(),
            data,
        })
    }

    /// Euclidean distance between two tensors of equal shape.
    pub fn distance(a: &Tensor, b: &Tensor) -> Result<f64> {
        Ok(zip_data("distance", a, b)?
            .map(|(x, y)| (x - y) * (x - y))
            .sum::<f64>()
            .sqrt())
    }

    /// Euclidean norm of the data.
    pub fn norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Comma-separated entries, e.g. `(2.75, 3)`.
    pub fn display_point(&self) -> String {
        let parts: Vec<String> = self.data.iter().map(|v| format!("{v}")).collect();
        format!("({})", parts.join(", "))
    }
}

fn zip_data<'a>(
    context: &str,
    a: &'a Tensor,
    b: &'a Tensor,
) -> Result<impl Iterator<Item = (f64, f64)> + 'a> {
    if a.shape != b.shape {
        return Err(Error::shape(context, &a.shape, &b.shape));
    }
    Ok(a.data.iter().zip(b.data.iter()).map(|(&x, &y)| (x, y)))
}

/// Axis-aligned box in center/radius form; `radius` is entrywise nonnegative.
#[derive(Debug, Clone, PartialEq)]
pub struct IntervalTensor {
    center: Tensor,
    radius: Tensor,
}

impl IntervalTensor {
    pub fn new(center: Tensor, radius: Tensor) -> Result<IntervalTensor> {
        if center.shape != radius.shape {
            return Err(Error::shape("interval", &center.shape, &radius.shape));
        }
        if radius.data.iter().any(|&r| r < 0.0) {
            return Err(Error::InvalidArgument(
                "interval radius must be nonnegative".into(),
            ));
        }
        Ok(IntervalTensor { center, radius })
    }

    /// Box spanned entrywise by `lower` and `upper` (`lower[i] <= upper[i]`).
    pub fn from_bounds(lower: &Tensor, upper: &Tensor) -> Result<IntervalTensor> {
        let pairs: Vec<(f64, f64)> = zip_data("interval bounds", lower, upper)?.collect();
        if pairs.iter().any(|&(l, u)| l > u) {
            return Err(Error::InvalidArgument(
                "interval lower bound above upper bound".into(),
            ));
        }
        let center = pairs.iter().map(|&(l, u)| 0.5 * (l + u)).collect();
        let radius = pairs.iter().map(|&(l, u)| 0.5 * (u - l)).collect();
        Ok(IntervalTensor {
            center: Tensor {
                shape: lower.shape.clone(),
                data: center,
            },
            radius: Tensor {
                shape: lower.shape.clone(),
                data: radius,
            },
        })
    }

    /// Bounding box of two points (entrywise min/max).
    pub fn enclosing_points(a: &Tensor, b: &Tensor) -> Result<IntervalTensor> {
        let pairs: Vec<(f64, f64)> = zip_data("enclosing points", a, b)?.collect();
        let lower: Vec<f64> = pairs.iter().map(|&(x, y)| x.min(y)).collect();
        let upper: Vec<f64> = pairs.iter().map(|&(x, y)| x.max(y)).collect();
        IntervalTensor::from_bounds(
            &Tensor {
                shape: a.shape.clone(),
                data: lower,
            },
            &Tensor {
                shape: a.shape.clone(),
                data: upper,
            },
        )
    }

    pub fn center(&self) -> &Tensor {
        &self.center
    }

    pub fn radius(&self) -> &Tensor {
        &self.radius
    }

    pub fn shape(&self) -> &[usize] {
        self.center.shape()
    }

    #[must_use]
    pub fn lower(&self) -> Tensor {
        Tensor {
            shape: self.center.shape.clone(),
            data: self
                .center
                .data
                .iter()
                .zip(&self.radius.data)
                .map(|(c, r)| c - r)
                .collect(),
        }
    }

    #[must_use]
    pub fn upper(&self) -> Tensor {
        Tensor {
            shape: self.center.shape.clone(),
            data: self
                .center
                .data
                .iter()
                .zip(&self.radius.data)
                .map(|(c, r)| c + r)
                .collect(),
        }
    }

    /// Exact interval image of entrywise max(0, x):
    /// center 0.5 (relu(c+r) + relu(c-r)), radius 0.5 (relu(c+r) - relu(c-r)).
    #[must_use]
    pub fn relu(&self) -> IntervalTensor {
        let upper = self.upper().relu();
        let lower = self.lower().relu();
        IntervalTensor::from_bounds(&lower, &upper)
            .expect("relu preserves bound ordering")
    }

    /// Smallest box containing both operands.
    pub fn hull(&self, other: &IntervalTensor) -> Result<IntervalTensor> {
        let (sl, su) = (self.lower(), self.upper());
        let (ol, ou) = (other.lower(), other.upper());
        let lower: Vec<f64> = zip_data("hull", &sl, &ol)?.map(|(x, y)| x.min(y)).collect();
        let upper: Vec<f64> = zip_data("hull", &su, &ou)?.map(|(x, y)| x.max(y)).collect();
        IntervalTensor::from_bounds(
            &Tensor {
                shape: sl.shape.clone(),
                data: lower,
            },
            &Tensor {
                shape: su.shape.clone(),
                data: upper,
            },
        )
    }

    /// Whether `point` lies inside the box, inflated entrywise by `slack`.
    pub fn contains(&self, point: &Tensor, slack: f64) -> Result<bool> {
        if point.shape != self.center.shape {
            return Err(Error::shape("contains", &self.center.shape, &point.shape));
        }
        Ok(point
            .data
            .iter()
            .zip(&self.center.data)
            .zip(&self.radius.data)
            .all(|((&p, &c), &r)| (p - c).abs() <= r + slack))
    }

    pub fn reshape(&self, shape: Vec<usize>) -> Result<IntervalTensor> {
        Ok(IntervalTensor {
            center: self.center.reshape(shape.clone())?,
            radius: self.radius.reshape(shape)?,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn new_rejects_bad_length_and_nan() {
        assert!(Tensor::new(vec![2, 2], vec![1.0; 3]).is_err());
        assert!(Tensor::new(vec![2], vec![1.0, f64::NAN]).is_err());
        assert!(Tensor::new(vec![2], vec![1.0, f64::INFINITY]).is_err());
        assert!(Tensor::new(vec![2], vec![1.0, 2.0]).is_ok());
    }

    #[test]
    fn lerp_hits_endpoints_and_midpoint() {
        let a = Tensor::vector(&[1.0, 2.0]).unwrap();
        let b = Tensor::vector(&[-1.0, 3.0]).unwrap();
        assert_eq!(Tensor::lerp(&a, &b, 0.0).unwrap(), a);
        assert_eq!(Tensor::lerp(&a, &b, 1.0).unwrap(), b);
        let mid = Tensor::lerp(&a, &b, 0.5).unwrap();
        assert_eq!(mid.data(), &[0.0, 2.5]);
    }

    #[test]
    fn relu_box_of_centered_interval_halves() {
        // 1-D box [-2, 2] maps to [0, 2], i.e. center 1, radius 1.
        let b = IntervalTensor::new(
            Tensor::vector(&[0.0]).unwrap(),
            Tensor::vector(&[2.0]).unwrap(),
        )
        .unwrap();
        let r = b.relu();
        assert_eq!(r.center().data(), &[1.0]);
        assert_eq!(r.radius().data(), &[1.0]);
    }

    #[test]
    fn relu_box_matches_worked_example() {
        // [-0.5, 0.5] x [2, 4.5] maps to [0, 0.5] x [2, 4.5].
        let b = IntervalTensor::new(
            Tensor::vector(&[0.0, 3.25]).unwrap(),
            Tensor::vector(&[0.5, 1.25]).unwrap(),
        )
        .unwrap();
        let r = b.relu();
        assert_eq!(r.lower().data(), &[0.0, 2.0]);
        assert_eq!(r.upper().data(), &[0.5, 4.5]);
    }

    #[test]
    fn hull_spans_both_boxes() {
        let a = IntervalTensor::from_bounds(
            &Tensor::vector(&[0.0, 0.0]).unwrap(),
            &Tensor::vector(&[1.0, 1.0]).unwrap(),
        )
        .unwrap();
        let b = IntervalTensor::from_bounds(
            &Tensor::vector(&[-1.0, 0.5]).unwrap(),
            &Tensor::vector(&[0.5, 3.0]).unwrap(),
        )
        .unwrap();
        let h = a.hull(&b).unwrap();
        assert_eq!(h.lower().data(), &[-1.0, 0.0]);
        assert_eq!(h.upper().data(), &[1.0, 3.0]);
    }

    #[test]
    fn tensor_json_round_trips() {
        let t = Tensor::new(vec![2, 2], vec![0.1, -2.5, 3.0, 0.921875]).unwrap();
        let s = serde_json::to_string(&t).unwrap();
        let back: Tensor = serde_json::from_str(&s).unwrap();
        assert_eq!(back, t);
    }

    #[test]
    fn tensor_json_rejects_nan_and_bad_shape() {
        assert!(serde_json::from_str::<Tensor>(r#"{"shape":[3],"data":[1,2]}"#).is_err());
        // JSON has no NaN literal; a mismatched product is the realistic failure.
        assert!(serde_json::from_str::<Tensor>(r#"{"shape":[2,2],"data":[1,2,3]}"#).is_err());
    }

    proptest! {
        #[test]
        fn relu_box_is_exact_hull_of_pointwise_relu(
            c in proptest::collection::vec(-10.0f64..10.0, 1..8),
            r in proptest::collection::vec(0.0f64..5.0, 1..8),
            t in 0.0f64..1.0,
        ) {
            let n = c.len().min(r.len());
            let c = Tensor::vector(&c[..n]).unwrap();
            let r = Tensor::vector(&r[..n]).unwrap();
            let b = IntervalTensor::new(c, r).unwrap();
            let image = b.relu();
            // Pointwise image of any point stays inside.
            let p = Tensor::lerp(&b.lower(), &b.upper(), t).unwrap().relu();
            prop_assert!(image.contains(&p, 1e-12).unwrap());
            // Exactness up to rounding in the center/radius split: the
            // endpoint images are attained, so this is the tightest box.
            let (img_lo, img_hi) = (image.lower(), image.upper());
            let (arg_lo, arg_hi) = (b.lower().relu(), b.upper().relu());
            for (got, want) in img_lo.data().iter().zip(arg_lo.data()) {
                prop_assert!((got - want).abs() <= 1e-12);
            }
            for (got, want) in img_hi.data().iter().zip(arg_hi.data()) {
                prop_assert!((got - want).abs() <= 1e-12);
            }
        }

        #[test]
        fn zero_radius_interval_tracks_the_point(
            c in proptest::collection::vec(-10.0f64..10.0, 1..8),
        ) {
            let point = Tensor::vector(&c).unwrap();
            let b = IntervalTensor::new(point.clone(), Tensor::zeros(vec![c.len()])).unwrap();
            let image = b.relu();
            for (got, want) in image.center().data().iter().zip(point.relu().data()) {
                prop_assert!((got - want).abs() <= 1e-12);
            }
            prop_assert!(image.radius().data().iter().all(|&r| r <= 1e-12));
        }
    }

    #[test]
    fn distance_and_norm() {
        let a = Tensor::vector(&[3.0, 4.0]).unwrap();
        let b = Tensor::zeros(vec![2]);
        assert_abs_diff_eq!(Tensor::distance(&a, &b).unwrap(), 5.0);
        assert_abs_diff_eq!(a.norm(), 5.0);
    }
}
